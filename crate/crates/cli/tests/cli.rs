use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_anderson"));
    c.env_remove("ANDERSON_OUT_DIR");
    c
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin().args(args).current_dir(dir).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

const HEADER: &str = "m,w,kappa,epsilon,solver,seed,status,time_s,fill_ratio,outer_iters,inner_avg";

#[test]
fn generate_writes_deterministic_matrix_market() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = run(&["generate", "-m", "4", "--seed", "7", "-o", "a.mtx"], d);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.contains("n 64"));
    assert!(out.contains("nnz 256"));
    run(&["generate", "-m", "4", "--seed", "7", "-o", "b.mtx"], d);
    run(&["generate", "-m", "4", "--seed", "8", "-o", "c.mtx"], d);
    let a = std::fs::read(d.join("a.mtx")).unwrap();
    assert_eq!(a, std::fs::read(d.join("b.mtx")).unwrap());
    assert_ne!(a, std::fs::read(d.join("c.mtx")).unwrap());
    assert!(String::from_utf8_lossy(&a).starts_with("%%MatrixMarket matrix coordinate real symmetric"));
}

#[test]
fn generate_default_name_goes_to_out_dir() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["generate", "-m", "3", "--boundary", "hard-wall", "--out-dir", "mats"], dir.path());
    assert_eq!(code(&o), 0);
    assert!(dir.path().join("mats/anderson_m3_w16.5_seed1_hardwall.mtx").exists());
}

#[test]
fn env_out_dir_is_used() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("envdir");
    let o = bin().args(["generate", "-m", "3"]).env("ANDERSON_OUT_DIR", &target).current_dir(dir.path()).output().unwrap();
    assert_eq!(code(&o), 0);
    assert!(target.join("anderson_m3_w16.5_seed1.mtx").exists());
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&run(&["generate", "-m", "2"], d)), 1);
    assert_eq!(code(&run(&["solve", "-m", "4", "--solver", "lobpcg"], d)), 1);
    assert_eq!(code(&run(&["solve", "-m", "4", "--solver", "all"], d)), 1);
    assert_eq!(code(&run(&["solve", "--bogus-flag"], d)), 1);
    assert_eq!(code(&run(&["solve", "-m", "4", "--set", "solver.nonsense=1"], d)), 1);
    assert_eq!(code(&run(&["solve", "-m", "4", "--inner-tol", "2"], d)), 1);
    assert_eq!(code(&run(&["verify", "-m", "8", "--dense-cap", "100"], d)), 1);
    assert_eq!(code(&run(&["--help"], d)), 0);
}

#[test]
fn missing_files_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&run(&["solve", "--matrix", "missing.mtx"], d)), 3);
    assert_eq!(code(&run(&["solve", "-m", "4", "--config", "missing.ini"], d)), 3);
    std::fs::write(d.join("bad.mtx"), "not a matrix\n").unwrap();
    assert_eq!(code(&run(&["solve", "--matrix", "bad.mtx"], d)), 3);
}

#[test]
fn solve_prints_converged_pairs_and_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["solve", "-m", "8", "-w", "16.5", "--solver", "jd", "--verify"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let pairs: Vec<Vec<&str>> = out
        .lines()
        .map(|l| l.split_whitespace().collect::<Vec<_>>())
        .filter(|t| t.len() == 6 && t[0].parse::<usize>().is_ok())
        .collect();
    assert_eq!(pairs.len(), 5, "{out}");
    assert!(pairs.iter().all(|t| t[4] == "true" && t[3].parse::<f64>().unwrap() <= 1e-8));
    assert!(out.contains("preconditioner: fill"));
    assert!(out.lines().any(|l| l.starts_with("verify jd: PASS")), "{out}");
}

#[test]
fn solve_cwi_reports_lanczos_memory_and_dumps_vectors() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["solve", "-m", "5", "--solver", "cwi", "--n-wanted", "2", "--dump", "--trace"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(!out.contains("preconditioner: fill"));
    assert!(out.lines().any(|l| l.starts_with("lanczos: ") && l.contains("memory")), "{out}");
    for k in 0..2 {
        let text = std::fs::read_to_string(dir.path().join(format!("eigvec_{k}.tsv"))).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "i\tj\tk\tprob");
        let total: f64 = lines.map(|l| l.split('\t').nth(3).unwrap().parse::<f64>().unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }
}

#[test]
fn verify_all_solvers_pass() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["verify", "-m", "6", "--solver", "all"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    for s in ["cwi", "silanczos", "jd"] {
        assert!(out.contains(&format!("verify {s}: PASS")), "{out}");
    }
}

#[test]
fn verify_detects_loose_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["verify", "-m", "6", "--solver", "jd", "--outer-tol", "1"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(stdout(&o).contains("verify jd: FAIL"));
}

#[test]
fn verify_reads_matrix_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    run(&["generate", "-m", "5", "--disorder", "off-diagonal", "-o", "off.mtx"], d);
    let o = run(&["verify", "--matrix", "off.mtx", "--solver", "silanczos,jd", "--target", "1.28"], d);
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).matches(": PASS").count(), 2);
}

#[test]
fn match_reports_cycles_and_blocks() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["match", "-m", "3", "-o", "match.txt"], dir.path());
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(dir.path().join("match.txt")).unwrap();
    for key in ["objective ", "matching ", "cycles ", "blocks ", "p_s ", "scaling"] {
        assert!(text.lines().any(|l| l.starts_with(key)), "missing {key}");
    }
    let p_s: Vec<usize> = text.lines().find(|l| l.starts_with("p_s ")).unwrap()[4..]
        .split_whitespace()
        .map(|v| v.parse().unwrap())
        .collect();
    let mut sorted = p_s.clone();
    sorted.sort_unstable();
    assert_eq!(sorted, (0..27).collect::<Vec<_>>());
}

#[test]
fn bench_empty_grid_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["bench", "--m-list", "6", "--solvers", ""], dir.path());
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o), format!("{HEADER}\n"));
}

#[test]
fn bench_kappa_sweep_fill_increases_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["bench", "--m-list", "10", "--w-list", "16.5", "--kappa-list", "5,10,20", "--solvers", "jd", "-o", "b.csv"];
    let o = run(&args, dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let first = std::fs::read_to_string(dir.path().join("b.csv")).unwrap();
    assert_eq!(first.lines().next().unwrap(), HEADER);
    let rows = csv_rows(&first);
    assert_eq!(rows.len(), 3);
    let fill: Vec<f64> = rows.iter().map(|r| r[8].parse().unwrap()).collect();
    assert!(fill[0] < fill[1] && fill[1] < fill[2], "{fill:?}");
    assert!(rows.iter().all(|r| r[6] == "ok"));

    run(&args, dir.path());
    let second = csv_rows(&std::fs::read_to_string(dir.path().join("b.csv")).unwrap());
    for (a, b) in rows.iter().zip(&second) {
        let strip = |r: &Vec<String>| r.iter().enumerate().filter(|(i, _)| *i != 7).map(|(_, v)| v.clone()).collect::<Vec<_>>();
        assert_eq!(strip(a), strip(b));
    }
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("run.ini"),
        "[matrix]\nm = 5\nw = 12\nseed = 3\n\n[solver]\nname = silanczos\nn_wanted = 3\n\n[bench]\nm = 5\nkappa = 5\nsolvers = jd\n",
    )
    .unwrap();
    let o = run(&["solve", "--config", "run.ini"], d);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.contains("m=5 w=12 seed=3"), "{out}");
    assert!(out.contains("solver: silanczos"), "{out}");

    let o = run(&["solve", "--config", "run.ini", "--set", "solver.name=jd", "--seed", "4"], d);
    let out = stdout(&o);
    assert!(out.contains("seed=4") && out.contains("solver: jd"), "{out}");

    let o = run(&["bench", "--config", "run.ini"], d);
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 1);
    assert_eq!(&rows[0][..6], &["5", "12", "5", rows[0][3].as_str(), "jd", "3"]);

    std::fs::write(d.join("bad.ini"), "[matrix]\ncolour = red\n").unwrap();
    assert_eq!(code(&run(&["solve", "--config", "bad.ini"], d)), 1);
}

#[test]
fn ordering_file_overrides_first_level() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let n = 125;
    let order: String = (0..n).rev().map(|i| format!("{i}\n")).collect();
    std::fs::write(d.join("order.txt"), format!("# reversed\n{order}")).unwrap();
    let o = run(&["solve", "-m", "5", "--ordering", "order.txt", "--verify"], d);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("verify jd: PASS"));

    std::fs::write(d.join("short.txt"), "0\n1\n2\n").unwrap();
    assert_eq!(code(&run(&["solve", "-m", "5", "--ordering", "short.txt"], d)), 1);
}
