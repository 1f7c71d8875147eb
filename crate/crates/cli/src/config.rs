//! Run configuration: an INI file with `[matrix]`, `[preconditioner]`,
//! `[solver]`, `[output]` and `[bench]` sections, overridden by flags.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use anderson_core::anderson::{AndersonConfig, Boundary, Disorder, OFF_DIAGONAL_DEFAULT_SHIFT};
use anderson_core::eigen::SolverConfig;
use anderson_core::mlildl::FactorParams;
use anderson_core::sparse::Permutation;

use crate::error::{io_error, CliError, CliResult};

pub const OUT_DIR_ENV: &str = "ANDERSON_OUT_DIR";

const KNOWN_KEYS: &[(&str, &[&str])] = &[
    ("matrix", &["file", "m", "w", "seed", "boundary", "disorder", "shift"]),
    (
        "preconditioner",
        &["kappa", "epsilon", "tau", "max_levels", "small_block_cutoff", "matching", "aggressive_drop", "ordering"],
    ),
    (
        "solver",
        &[
            "name",
            "n_wanted",
            "target",
            "max_basis",
            "restart_size",
            "outer_tol",
            "inner_tol",
            "inner_maxit",
            "max_outer",
            "seed",
            "cwi_factor",
            "cwi_max_steps",
            "cwi_tol",
        ],
    ),
    ("output", &["dir"]),
    ("bench", &["m", "w", "kappa", "epsilon", "solvers", "repetitions"]),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Cwi,
    SiLanczos,
    Jd,
}

impl SolverKind {
    pub const ALL: [SolverKind; 3] = [SolverKind::Cwi, SolverKind::SiLanczos, SolverKind::Jd];

    pub fn parse(s: &str) -> CliResult<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cwi" => Ok(SolverKind::Cwi),
            "silanczos" => Ok(SolverKind::SiLanczos),
            "jd" => Ok(SolverKind::Jd),
            other => Err(CliError::Usage(format!("unknown solver '{other}' (expected cwi, silanczos or jd)"))),
        }
    }

    /// A single name, or `all`.
    pub fn parse_list(s: &str) -> CliResult<Vec<Self>> {
        if s.trim().eq_ignore_ascii_case("all") {
            return Ok(Self::ALL.to_vec());
        }
        split_list(s).iter().map(|t| Self::parse(t)).collect()
    }

    pub fn uses_preconditioner(self) -> bool {
        self != SolverKind::Cwi
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverKind::Cwi => "cwi",
            SolverKind::SiLanczos => "silanczos",
            SolverKind::Jd => "jd",
        })
    }
}

/// Where the matrix comes from.
#[derive(Debug, Clone)]
pub enum MatrixSource {
    Anderson(AndersonConfig),
    File(PathBuf),
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub source: MatrixSource,
    pub solvers: Vec<SolverKind>,
    pub factor: FactorParams,
    pub ordering_file: Option<PathBuf>,
    pub solver: SolverConfig,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone)]
pub struct BenchGrid {
    pub m: Vec<usize>,
    pub w: Vec<f64>,
    pub kappa: Vec<f64>,
    /// `None` entries use the default `1/sqrt(N)`.
    pub epsilon: Vec<Option<f64>>,
    pub solvers: Vec<SolverKind>,
    pub repetitions: usize,
}

/// Flat `section.key → value` settings.
#[derive(Debug, Clone, Default)]
pub struct Settings {
    values: BTreeMap<(String, String), String>,
}

impl Settings {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let mut s = Settings::default();
        let Some(path) = path else {
            return Ok(s);
        };
        let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        let ini = ini::Ini::load_from_str(&text)
            .map_err(|e| CliError::Usage(format!("cannot parse config {}: {e}", path.display())))?;
        for (section, props) in ini.iter() {
            let section = section.unwrap_or("").to_string();
            for (k, v) in props.iter() {
                s.set(&section, k, v)?;
            }
        }
        Ok(s)
    }

    pub fn set(&mut self, section: &str, key: &str, value: &str) -> CliResult<()> {
        let known = KNOWN_KEYS.iter().find(|(s, _)| *s == section).ok_or_else(|| {
            let names: Vec<&str> = KNOWN_KEYS.iter().map(|(s, _)| *s).collect();
            CliError::Usage(format!("unknown config section [{section}] (expected one of {})", names.join(", ")))
        })?;
        if !known.1.contains(&key) {
            return Err(CliError::Usage(format!(
                "unknown key '{key}' in [{section}] (expected one of {})",
                known.1.join(", ")
            )));
        }
        self.values.insert((section.to_string(), key.to_string()), value.trim().to_string());
        Ok(())
    }

    /// Applies a `section.key=value` override.
    pub fn set_assignment(&mut self, assignment: &str) -> CliResult<()> {
        let (lhs, value) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("override '{assignment}' must look like section.key=value")))?;
        let (section, key) = lhs
            .trim()
            .split_once('.')
            .ok_or_else(|| CliError::Usage(format!("override '{assignment}' must name section.key")))?;
        self.set(section, key, value)
    }

    pub fn set_opt<T: ToString>(&mut self, section: &str, key: &str, value: Option<T>) -> CliResult<()> {
        match value {
            Some(v) => self.set(section, key, &v.to_string()),
            None => Ok(()),
        }
    }

    fn raw(&self, section: &str, key: &str) -> Option<&str> {
        self.values.get(&(section.to_string(), key.to_string())).map(String::as_str)
    }

    fn get<T: std::str::FromStr>(&self, section: &str, key: &str, default: T) -> CliResult<T> {
        match self.raw(section, key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| CliError::Usage(format!("[{section}] {key} = '{v}' is not a valid value"))),
        }
    }

    fn get_bool(&self, section: &str, key: &str, default: bool) -> CliResult<bool> {
        match self.raw(section, key).map(|v| v.to_ascii_lowercase()) {
            None => Ok(default),
            Some(v) => match v.as_str() {
                "true" | "yes" | "on" | "1" => Ok(true),
                "false" | "no" | "off" | "0" => Ok(false),
                _ => Err(CliError::Usage(format!("[{section}] {key} = '{v}' is not a boolean"))),
            },
        }
    }

    fn get_list<T: std::str::FromStr>(&self, section: &str, key: &str, default: Vec<T>) -> CliResult<Vec<T>> {
        match self.raw(section, key) {
            None => Ok(default),
            Some(v) => split_list(v)
                .iter()
                .map(|t| t.parse().map_err(|_| CliError::Usage(format!("[{section}] {key}: '{t}' is not a valid value"))))
                .collect(),
        }
    }

    pub fn anderson(&self) -> CliResult<AndersonConfig> {
        let boundary = match self.get::<String>("matrix", "boundary", "periodic".into())?.as_str() {
            "periodic" => Boundary::Periodic,
            "hard-wall" | "hardwall" => Boundary::HardWall,
            other => return Err(CliError::Usage(format!("boundary '{other}' must be periodic or hard-wall"))),
        };
        let disorder = match self.get::<String>("matrix", "disorder", "diagonal".into())?.as_str() {
            "diagonal" => Disorder::Diagonal,
            "off-diagonal" | "offdiagonal" => {
                Disorder::OffDiagonal { shift: self.get("matrix", "shift", OFF_DIAGONAL_DEFAULT_SHIFT)? }
            }
            other => return Err(CliError::Usage(format!("disorder '{other}' must be diagonal or off-diagonal"))),
        };
        let cfg = AndersonConfig {
            m: self.get("matrix", "m", 8)?,
            w: self.get("matrix", "w", 16.5)?,
            boundary,
            disorder,
            seed: self.get("matrix", "seed", 1)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn factor_params(&self) -> CliResult<FactorParams> {
        let d = FactorParams::default();
        let epsilon = match self.raw("preconditioner", "epsilon") {
            None | Some("default") | Some("") => None,
            Some(_) => Some(self.get("preconditioner", "epsilon", 0.0)?),
        };
        let p = FactorParams {
            kappa: self.get("preconditioner", "kappa", d.kappa)?,
            epsilon,
            tau: self.get("preconditioner", "tau", d.tau)?,
            max_levels: self.get("preconditioner", "max_levels", d.max_levels)?,
            small_block_cutoff: self.get("preconditioner", "small_block_cutoff", d.small_block_cutoff)?,
            enable_matching: self.get_bool("preconditioner", "matching", d.enable_matching)?,
            enable_aggressive_drop: self.get_bool("preconditioner", "aggressive_drop", d.enable_aggressive_drop)?,
            initial_ordering: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn solver_config(&self) -> CliResult<SolverConfig> {
        let d = SolverConfig::default();
        Ok(SolverConfig {
            n_wanted: self.get("solver", "n_wanted", d.n_wanted)?,
            target: self.get("solver", "target", d.target)?,
            max_basis: self.get("solver", "max_basis", d.max_basis)?,
            restart_size: self.get("solver", "restart_size", d.restart_size)?,
            outer_tol: self.get("solver", "outer_tol", d.outer_tol)?,
            inner_tol: self.get("solver", "inner_tol", d.inner_tol)?,
            inner_maxit: self.get("solver", "inner_maxit", d.inner_maxit)?,
            max_outer: self.get("solver", "max_outer", d.max_outer)?,
            seed: self.get("solver", "seed", d.seed)?,
            cwi_factor: self.get("solver", "cwi_factor", d.cwi_factor)?,
            cwi_max_steps: self.get("solver", "cwi_max_steps", d.cwi_max_steps)?,
            cwi_tol: self.get("solver", "cwi_tol", d.cwi_tol)?,
        })
    }

    /// Flag value, then `[output] dir`, then the environment, then `.`.
    pub fn out_dir(&self) -> PathBuf {
        if let Some(d) = self.raw("output", "dir") {
            return PathBuf::from(d);
        }
        std::env::var_os(OUT_DIR_ENV).map_or_else(|| PathBuf::from("."), PathBuf::from)
    }

    pub fn run_config(&self) -> CliResult<RunConfig> {
        let source = match self.raw("matrix", "file") {
            Some(f) if !f.is_empty() => MatrixSource::File(PathBuf::from(f)),
            _ => MatrixSource::Anderson(self.anderson()?),
        };
        Ok(RunConfig {
            source,
            solvers: SolverKind::parse_list(self.raw("solver", "name").unwrap_or("jd"))?,
            factor: self.factor_params()?,
            ordering_file: self.raw("preconditioner", "ordering").filter(|s| !s.is_empty()).map(PathBuf::from),
            solver: self.solver_config()?,
            out_dir: self.out_dir(),
        })
    }

    pub fn bench_grid(&self) -> CliResult<BenchGrid> {
        let base = self.anderson()?;
        let kappa = self.factor_params()?.kappa;
        let epsilon = match self.raw("bench", "epsilon") {
            None => vec![None],
            Some(v) => split_list(v)
                .iter()
                .map(|t| match t.as_str() {
                    "default" => Ok(None),
                    _ => t.parse().map(Some).map_err(|_| CliError::Usage(format!("[bench] epsilon: '{t}' is not a number"))),
                })
                .collect::<CliResult<_>>()?,
        };
        let solvers = match self.raw("bench", "solvers") {
            None => SolverKind::parse_list(self.raw("solver", "name").unwrap_or("jd"))?,
            Some(v) if v.trim().is_empty() => Vec::new(),
            Some(v) => SolverKind::parse_list(v)?,
        };
        let grid = BenchGrid {
            m: self.get_list("bench", "m", vec![base.m])?,
            w: self.get_list("bench", "w", vec![base.w])?,
            kappa: self.get_list("bench", "kappa", vec![kappa])?,
            epsilon,
            solvers,
            repetitions: self.get("bench", "repetitions", 1)?,
        };
        if grid.repetitions == 0 {
            return Err(CliError::Usage("[bench] repetitions must be at least 1".into()));
        }
        Ok(grid)
    }
}

fn split_list(s: &str) -> Vec<String> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty()).map(String::from).collect()
}

/// Whitespace-separated 0-based indices in elimination order; `#` and `%`
/// start comments.
pub fn read_permutation(path: &Path, n: usize) -> CliResult<Permutation> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let mut order = Vec::with_capacity(n);
    for (lineno, line) in text.lines().enumerate() {
        let body = line.split(['#', '%']).next().unwrap_or("");
        for tok in body.split_whitespace() {
            let idx: usize = tok.parse().map_err(|_| {
                CliError::Io(format!("{}:{}: '{tok}' is not an index", path.display(), lineno + 1))
            })?;
            order.push(idx);
        }
    }
    if order.len() != n {
        return Err(CliError::Usage(format!(
            "ordering file {} has {} entries but the matrix has order {n}",
            path.display(),
            order.len()
        )));
    }
    Permutation::from_order(order)
        .map_err(|e| CliError::Usage(format!("ordering file {} is not a permutation: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unknown_keys_and_sections() {
        let mut s = Settings::default();
        assert!(s.set("matrix", "m", "4").is_ok());
        assert!(matches!(s.set("matrix", "size", "4"), Err(CliError::Usage(_))));
        assert!(matches!(s.set("nope", "m", "4"), Err(CliError::Usage(_))));
        assert!(s.set_assignment("solver.target=0.5").is_ok());
        assert!(s.set_assignment("solver.target").is_err());
        assert!(s.set_assignment("target=1").is_err());
    }

    #[test]
    fn typed_values_and_defaults() {
        let mut s = Settings::default();
        s.set("matrix", "m", "6").unwrap();
        s.set("matrix", "boundary", "hard-wall").unwrap();
        s.set("preconditioner", "matching", "off").unwrap();
        s.set("solver", "name", "cwi").unwrap();
        let rc = s.run_config().unwrap();
        match rc.source {
            MatrixSource::Anderson(c) => {
                assert_eq!(c.m, 6);
                assert_eq!(c.boundary, Boundary::HardWall);
                assert_eq!(c.w, 16.5);
            }
            MatrixSource::File(_) => panic!("expected an Anderson source"),
        }
        assert!(!rc.factor.enable_matching);
        assert_eq!(rc.solvers, vec![SolverKind::Cwi]);
        s.set("matrix", "m", "x").unwrap();
        assert!(matches!(s.run_config(), Err(CliError::Usage(_))));
    }

    #[test]
    fn solver_lists() {
        assert_eq!(SolverKind::parse_list("all").unwrap().len(), 3);
        assert_eq!(SolverKind::parse_list("jd, cwi").unwrap(), vec![SolverKind::Jd, SolverKind::Cwi]);
        assert!(SolverKind::parse_list("lobpcg").is_err());
    }

    #[test]
    fn bench_grid_lists() {
        let mut s = Settings::default();
        s.set("bench", "m", "4, 5").unwrap();
        s.set("bench", "epsilon", "default, 0.01").unwrap();
        s.set("bench", "solvers", "").unwrap();
        let g = s.bench_grid().unwrap();
        assert_eq!(g.m, vec![4, 5]);
        assert_eq!(g.epsilon, vec![None, Some(0.01)]);
        assert!(g.solvers.is_empty());
    }
}
