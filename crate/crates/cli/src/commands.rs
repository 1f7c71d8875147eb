use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anderson_core::anderson::{build_anderson, site_coords, wavefunction_probabilities, AndersonConfig, Boundary, Disorder};
use anderson_core::dense::{dense_eig, to_dense_capped};
use anderson_core::eigen::{cwi_solve, jd_solve, si_lanczos_ir, EigenResult, MultilevelFactory, SolverConfig, SqmrShiftInvert};
use anderson_core::matching::symmetric_matching;
use anderson_core::mlildl::{factorize, FactorParams, FactorStats};
use anderson_core::mmio::{format_matrix_market, read_matrix_market};
use anderson_core::sparse::SparseSymMatrix;

use crate::config::{read_permutation, BenchGrid, MatrixSource, RunConfig, SolverKind};
use crate::error::{io_error, CliError, CliResult};

/// Eigenvector angles are checked only for eigenvalues this far (relative
/// to `‖A‖₁`) from every other eigenvalue.
const SIMPLE_GAP: f64 = 1e-3;
const ANGLE_TOL: f64 = 1e-5;

pub const CSV_HEADER: &str = "m,w,kappa,epsilon,solver,seed,status,time_s,fill_ratio,outer_iters,inner_avg";

/// A loaded matrix and, for generated matrices, the lattice edge.
pub struct Problem {
    pub a: SparseSymMatrix,
    pub lattice: Option<usize>,
    pub label: String,
}

pub fn describe(cfg: &AndersonConfig) -> String {
    let boundary = match cfg.boundary {
        Boundary::Periodic => "periodic".to_string(),
        Boundary::HardWall => "hard-wall".to_string(),
    };
    let disorder = match cfg.disorder {
        Disorder::Diagonal => format!("w={}", cfg.w),
        Disorder::OffDiagonal { shift } => format!("off-diagonal shift={shift}"),
    };
    format!("anderson m={} {disorder} seed={} {boundary}", cfg.m, cfg.seed)
}

pub fn load_problem(source: &MatrixSource) -> CliResult<Problem> {
    match source {
        MatrixSource::Anderson(cfg) => {
            Ok(Problem { a: build_anderson(cfg)?, lattice: Some(cfg.m), label: describe(cfg) })
        }
        MatrixSource::File(path) => {
            Ok(Problem { a: read_matrix_market(path)?, lattice: None, label: format!("file {}", path.display()) })
        }
    }
}

fn factor_params(rc: &RunConfig, n: usize) -> CliResult<FactorParams> {
    let mut p = rc.factor.clone();
    if let Some(path) = &rc.ordering_file {
        p.initial_ordering = Some(read_permutation(path, n)?);
    }
    Ok(p)
}

pub fn run_solver(kind: SolverKind, a: &SparseSymMatrix, params: &FactorParams, cfg: &SolverConfig) -> CliResult<EigenResult> {
    cfg.validate(a.n())?;
    let factory = MultilevelFactory { a, params: params.clone() };
    let res = match kind {
        SolverKind::Cwi => cwi_solve(a, cfg)?,
        SolverKind::SiLanczos => {
            let mut inner = SqmrShiftInvert::new(a, cfg.target, &factory, cfg.inner_tol, cfg.inner_maxit)?;
            si_lanczos_ir(a, &mut inner, cfg)?
        }
        SolverKind::Jd => jd_solve(a, &factory, cfg)?,
    };
    Ok(res)
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| io_error(path, e))
}

/// Prints to stdout, or writes to `output` when given.
fn emit(output: Option<&Path>, text: &str) -> CliResult<()> {
    match output {
        Some(p) => write_file(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn generate(cfg: &AndersonConfig, out_dir: &Path, output: Option<PathBuf>) -> CliResult<String> {
    let a = build_anderson(cfg)?;
    let path = output.unwrap_or_else(|| {
        let mut name = format!("anderson_m{}_w{}_seed{}", cfg.m, cfg.w, cfg.seed);
        if cfg.boundary == Boundary::HardWall {
            name.push_str("_hardwall");
        }
        if let Disorder::OffDiagonal { shift } = cfg.disorder {
            let _ = write!(name, "_offdiag{shift}");
        }
        out_dir.join(format!("{name}.mtx"))
    });
    write_file(&path, &format_matrix_market(&a))?;
    Ok(format!("wrote {}\nn {}\nnnz {}\nseed {}\n", path.display(), a.n(), a.nnz_lower(), cfg.seed))
}

pub struct SolveOptions {
    pub trace: bool,
    pub dump: bool,
    pub verify: bool,
    pub verify_tol: f64,
    pub dense_cap: usize,
}

fn memory_mb(stats: &FactorStats, a: &SparseSymMatrix) -> f64 {
    // one value and one index per stored entry
    stats.fill_ratio * a.nnz_lower() as f64 * 16.0 / 1e6
}

pub fn solve(rc: &RunConfig, opts: &SolveOptions) -> CliResult<String> {
    let [kind] = rc.solvers[..] else {
        return Err(CliError::Usage("solve runs exactly one solver; use verify or bench for several".into()));
    };
    let problem = load_problem(&rc.source)?;
    let a = &problem.a;
    let params = factor_params(rc, a.n())?;
    let cfg = &rc.solver;
    let mut out = String::new();
    let _ = writeln!(out, "matrix: {} (n {}, nnz {}, |A|_1 {:.6})", problem.label, a.n(), a.nnz_lower(), a.norm1());
    let _ = writeln!(out, "solver: {kind} target {} wanted {}", cfg.target, cfg.n_wanted);
    if kind.uses_preconditioner() {
        let t = Instant::now();
        let f = factorize(&a.shifted(cfg.target), &params)?;
        let _ = writeln!(
            out,
            "preconditioner: fill {:.4} levels {} accepted {:?} dense {} memory {:.3} MB factor {:.3} s",
            f.stats.fill_ratio,
            f.stats.level_dims.len(),
            f.stats.accepted,
            f.stats.dense_dim,
            memory_mb(&f.stats, a),
            t.elapsed().as_secs_f64()
        );
    } else {
        let steps = (cfg.cwi_factor * a.n()).min(cfg.cwi_max_steps);
        let _ = writeln!(out, "lanczos: {steps} steps, memory {:.3} MB", (2 * steps + 3 * a.n()) as f64 * 8.0 / 1e6);
    }

    let t = Instant::now();
    let res = run_solver(kind, a, &params, cfg)?;
    let secs = t.elapsed().as_secs_f64();
    if opts.trace {
        for line in &res.stats.trace {
            let _ = writeln!(out, "trace {line}");
        }
    }
    let anorm = a.norm1();
    let _ = writeln!(out, "{:>3}  {:>22}  {:>10}  {:>10}  {:>9}  {:>4}", "k", "lambda", "residual", "rel_res", "converged", "mult");
    for (k, p) in res.pairs.iter().enumerate() {
        let _ = writeln!(
            out,
            "{k:>3}  {:>+22.15e}  {:>10.3e}  {:>10.3e}  {:>9}  {:>4}",
            p.lambda,
            p.residual,
            p.residual / anorm,
            p.converged,
            p.multiplicity_hint
        );
    }
    let _ = writeln!(
        out,
        "time {secs:.3} s  outer {}  inner {}  inner_avg {:.2}",
        res.stats.outer_iterations,
        res.stats.inner_iterations,
        res.stats.inner_average()
    );

    if opts.dump {
        for (k, p) in res.pairs.iter().enumerate() {
            let path = rc.out_dir.join(format!("eigvec_{k}.tsv"));
            write_file(&path, &probability_table(&p.x, problem.lattice)?)?;
            let _ = writeln!(out, "wrote {}", path.display());
        }
    }
    let mut failed = res.pairs.iter().filter(|p| !p.converged).count();
    if failed > 0 {
        let _ = writeln!(out, "warning: {failed} of {} pairs did not converge", res.pairs.len());
    }
    if opts.verify {
        let (text, ok) = verify_result(a, kind, &res, cfg.target, opts.verify_tol, opts.dense_cap)?;
        out.push_str(&text);
        if !ok {
            failed += 1;
        }
    }
    print!("{out}");
    if failed > 0 {
        return Err(CliError::Numerical(format!("{kind} did not deliver every requested pair within tolerance")));
    }
    Ok(String::new())
}

/// `|x_j|²` per site; lattice sites carry their 1-based coordinates.
pub fn probability_table(x: &[f64], lattice: Option<usize>) -> CliResult<String> {
    let p = wavefunction_probabilities(x)?;
    let mut s = String::new();
    match lattice {
        Some(m) => {
            s.push_str("i\tj\tk\tprob\n");
            for (idx, v) in p.iter().enumerate() {
                let (i, j, k) = site_coords(idx, m)?;
                let _ = writeln!(s, "{i}\t{j}\t{k}\t{v:.12e}");
            }
        }
        None => {
            s.push_str("site\tprob\n");
            for (idx, v) in p.iter().enumerate() {
                let _ = writeln!(s, "{idx}\t{v:.12e}");
            }
        }
    }
    Ok(s)
}

/// Compares `res` with the eigenvalues of `a` nearest `target` from a dense
/// eigendecomposition, and eigenvectors of well separated eigenvalues.
pub fn verify_result(
    a: &SparseSymMatrix,
    kind: SolverKind,
    res: &EigenResult,
    target: f64,
    tol: f64,
    cap: usize,
) -> CliResult<(String, bool)> {
    let eig = dense_eig(&to_dense_capped(a, cap)?);
    let anorm = a.norm1();
    let mut idx: Vec<usize> = (0..eig.values.len()).collect();
    idx.sort_by(|&i, &j| {
        let (x, y) = (eig.values[i], eig.values[j]);
        (x - target).abs().total_cmp(&(y - target).abs()).then(x.total_cmp(&y))
    });
    idx.truncate(res.pairs.len());
    let mut want: Vec<f64> = idx.iter().map(|&i| eig.values[i]).collect();
    let mut got: Vec<f64> = res.pairs.iter().map(|p| p.lambda).collect();
    want.sort_by(f64::total_cmp);
    got.sort_by(f64::total_cmp);
    let max_err = want.iter().zip(&got).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);

    let mut max_sin = 0.0f64;
    for p in &res.pairs {
        let k = (0..eig.values.len())
            .min_by(|&i, &j| (eig.values[i] - p.lambda).abs().total_cmp(&(eig.values[j] - p.lambda).abs()))
            .ok_or_else(|| CliError::Numerical("empty spectrum".into()))?;
        let gap = eig
            .values
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != k)
            .map(|(_, v)| (v - eig.values[k]).abs())
            .fold(f64::INFINITY, f64::min);
        if gap >= SIMPLE_GAP * anorm {
            let d: f64 = p.x.iter().zip(&eig.vectors[k]).map(|(u, v)| u * v).sum();
            max_sin = max_sin.max((1.0 - d * d).max(0.0).sqrt());
        }
    }
    let max_res = res.pairs.iter().map(|p| p.residual).fold(0.0, f64::max);
    let ok = !res.pairs.is_empty() && max_err <= tol * anorm && max_sin <= ANGLE_TOL;
    let text = format!(
        "verify {kind}: {} max |dlambda|/|A|_1 {:.3e} max sin(angle) {:.3e} max residual/|A|_1 {:.3e} (tol {tol:.1e})\n",
        if ok { "PASS" } else { "FAIL" },
        max_err / anorm,
        max_sin,
        max_res / anorm
    );
    Ok((text, ok))
}

pub fn verify(rc: &RunConfig, tol: f64, cap: usize) -> CliResult<String> {
    let problem = load_problem(&rc.source)?;
    let a = &problem.a;
    if a.n() > cap {
        return Err(CliError::Usage(format!("matrix order {} exceeds the dense oracle cap {cap}", a.n())));
    }
    let params = factor_params(rc, a.n())?;
    let mut out = format!("matrix: {} (n {})\n", problem.label, a.n());
    let mut all_ok = true;
    for &kind in &rc.solvers {
        match run_solver(kind, a, &params, &rc.solver) {
            Ok(res) => {
                let (text, ok) = verify_result(a, kind, &res, rc.solver.target, tol, cap)?;
                out.push_str(&text);
                all_ok &= ok;
            }
            Err(e) => {
                let _ = writeln!(out, "verify {kind}: FAIL {e}");
                all_ok = false;
            }
        }
    }
    print!("{out}");
    if all_ok {
        Ok(String::new())
    } else {
        Err(CliError::Numerical("oracle verification failed".into()))
    }
}

pub fn matching_report(rc: &RunConfig) -> CliResult<String> {
    let problem = load_problem(&rc.source)?;
    let m = symmetric_matching(&problem.a)?;
    let mut s = String::new();
    let _ = writeln!(s, "# {} (n {}); indices are 0-based", problem.label, problem.a.n());
    let _ = writeln!(s, "scaling_fallback {}", m.scaling_fallback);
    let _ = writeln!(s, "objective {:.12e}", m.assignment.objective);
    let join = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(" ");
    let cycles: String = m.cycles.iter().map(|c| format!("({})", join(c))).collect();
    let blocks: String = m.blocks.iter().map(|b| format!("({})", join(&b.members()))).collect();
    let _ = writeln!(s, "matching {}", join(m.assignment.sigma.forward()));
    let _ = writeln!(s, "cycles {cycles}");
    let _ = writeln!(s, "blocks {blocks}");
    let _ = writeln!(s, "p_s {}", join(m.p_s.order()));
    s.push_str("scaling\n");
    for (i, d) in m.scaling.as_slice().iter().enumerate() {
        let _ = writeln!(s, "{i} {d:.12e}");
    }
    Ok(s)
}

pub fn write_matching(rc: &RunConfig, output: Option<&Path>) -> CliResult<()> {
    emit(output, &matching_report(rc)?)
}

fn csv_float(v: f64) -> String {
    format!("{v}")
}

/// One CSV row per grid point, solver and realization.
pub fn bench(base: &AndersonConfig, grid: &BenchGrid, params: &FactorParams, cfg: &SolverConfig) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for &m in &grid.m {
        for &w in &grid.w {
            for rep in 0..grid.repetitions {
                let acfg = AndersonConfig { m, w, seed: base.seed + rep as u64, ..*base };
                let a = match build_anderson(&acfg) {
                    Ok(a) => a,
                    Err(e) => {
                        eprintln!("bench: m={m} w={w}: {e}");
                        continue;
                    }
                };
                for &kappa in &grid.kappa {
                    for &epsilon in &grid.epsilon {
                        let p = FactorParams { kappa, epsilon, ..params.clone() };
                        let eps = p.epsilon_for(a.n());
                        for &kind in &grid.solvers {
                            let fill = if kind.uses_preconditioner() {
                                factorize(&a.shifted(cfg.target), &p).ok().map(|f| f.stats.fill_ratio)
                            } else {
                                None
                            };
                            let t = Instant::now();
                            let res = run_solver(kind, &a, &p, cfg);
                            let secs = t.elapsed().as_secs_f64();
                            let prefix =
                                format!("{m},{},{},{},{kind},{}", csv_float(w), csv_float(kappa), csv_float(eps), acfg.seed);
                            let fill_cell = fill.map_or(String::new(), |f| format!("{f:.6}"));
                            match res {
                                Ok(r) => {
                                    let status = if r.pairs.iter().all(|p| p.converged) { "ok" } else { "unconverged" };
                                    let _ = writeln!(
                                        out,
                                        "{prefix},{status},{secs:.6},{fill_cell},{},{:.4}",
                                        r.stats.outer_iterations,
                                        r.stats.inner_average()
                                    );
                                }
                                Err(e) => {
                                    eprintln!("bench: {prefix}: {e}");
                                    let _ = writeln!(out, "{prefix},error,{secs:.6},{fill_cell},,");
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

pub fn write_bench(base: &AndersonConfig, grid: &BenchGrid, params: &FactorParams, cfg: &SolverConfig, output: Option<&Path>) -> CliResult<()> {
    emit(output, &bench(base, grid, params, cfg))
}
