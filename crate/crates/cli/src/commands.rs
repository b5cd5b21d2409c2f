//! The five pipeline stages. Each returns the process exit code or an
//! [`Exit`] carrying the code and the reason.

use std::path::{Path, PathBuf};

use anyhow::anyhow;
use krs_core::algebra::{fuzz, IDENTITY_TOLERANCE};
use krs_core::io::{load_solution, read_constants, save_solution, stability_csv, write_atomic, write_json};
use krs_core::oracle::{pin_constants, OracleSettings};
use krs_core::solver::{identity_suite, solve_both, solve_momentum, solve_shooting};
use krs_core::stability::{default_family, sign_explorer, Sign, NORMALIZATION_TOLERANCE};
use krs_core::{CurvatureConstants, Error, ResidualReport, SolitonSolution};
use serde::Serialize;
use serde_json::json;

use crate::config::{MethodChoice, RunConfig, Tolerances, DEFAULT_SEED};

pub const OK: u8 = 0;
pub const CONFIG: u8 = 1;
pub const ORACLE: u8 = 2;
pub const NO_SOLITON: u8 = 3;
pub const IDENTITY: u8 = 4;

/// Allowed sup-norm disagreement between the two solvers.
pub const CROSS_METHOD_TOLERANCE: f64 = 1e-6;
/// Allowed `|∫ Δ_u u e^{-u} dV|`.
pub const DIVERGENCE_TOLERANCE: f64 = 1e-8;

#[derive(Debug)]
pub struct Exit {
    pub code: u8,
    pub error: anyhow::Error,
}

pub type Outcome = std::result::Result<u8, Exit>;

trait WithCode<T> {
    fn code(self, code: u8) -> std::result::Result<T, Exit>;
}

impl<T, E: Into<anyhow::Error>> WithCode<T> for std::result::Result<T, E> {
    fn code(self, code: u8) -> std::result::Result<T, Exit> {
        self.map_err(|e| Exit {
            code,
            error: e.into(),
        })
    }
}

/// Options shared by every subcommand.
#[derive(Debug, Clone)]
pub struct Common {
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: Option<u64>,
}

impl Common {
    fn run_config(&self) -> std::result::Result<Option<RunConfig>, Exit> {
        self.config.as_deref().map(RunConfig::load).transpose().code(CONFIG)
    }

    /// Explicit `--config`, else the copy saved by `solve`, else nothing.
    fn stored_config(&self) -> std::result::Result<Option<RunConfig>, Exit> {
        if self.config.is_some() {
            return self.run_config();
        }
        let saved = self.out.join(RUN_FILE);
        saved.exists().then(|| RunConfig::load(&saved)).transpose().code(CONFIG)
    }

    fn seed(&self, cfg: Option<&RunConfig>) -> u64 {
        self.seed.or(cfg.map(|c| c.seed)).unwrap_or(DEFAULT_SEED)
    }
}

pub const CONSTANTS_FILE: &str = "constants.json";
pub const RUN_FILE: &str = "run.json";
pub const PRIMARY: &str = "solution";
pub const SECONDARY: &str = "shooting";
pub const VERIFY_FILE: &str = "verify.json";
pub const STABILITY_CSV: &str = "stability.csv";
pub const STABILITY_JSON: &str = "stability.json";
pub const FUZZ_FILE: &str = "fuzz.json";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.json";

#[derive(Serialize)]
struct FailedPin<'a> {
    #[serde(flatten)]
    constants: &'a CurvatureConstants,
    oracle_error: f64,
    unique: bool,
}

pub fn pin(common: &Common, fd_step: Option<f64>) -> Outcome {
    let cfg = common.run_config()?;
    let seed = common.seed(cfg.as_ref());
    let mut settings = OracleSettings::default();
    if let Some(h) = fd_step {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Exit {
                code: CONFIG,
                error: anyhow!("--fd-step must be positive"),
            });
        }
        // a single unextrapolated level at the given step
        settings.initial_step = h;
        settings.max_levels = 1;
    }
    let report = pin_constants(krs_core::ansatz::PIN_MIN_SAMPLES, seed, &settings).code(ORACLE)?;
    let path = common.out.join(CONSTANTS_FILE);
    let c = &report.constants;
    if report.succeeded() {
        write_json(&path, c).code(ORACLE)?;
        println!("A = {} B = {} max_rel_err = {:e} samples = {}", c.a, c.b, c.max_rel_err, c.samples);
        Ok(OK)
    } else {
        let failed = FailedPin {
            constants: c,
            oracle_error: report.oracle_error,
            unique: report.unique,
        };
        write_json(&path, &failed).code(ORACLE)?;
        Err(Exit {
            code: ORACLE,
            error: anyhow!(
                "pinning failed: best max_rel_err {:e}, unique = {}, oracle error estimate {:e}",
                c.max_rel_err,
                report.unique,
                report.oracle_error
            ),
        })
    }
}

fn solver_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::FactorMismatch { .. } => CONFIG,
        Error::Unpinned(_) | Error::OracleConvergence { .. } | Error::OracleState(_) => ORACLE,
        _ => NO_SOLITON,
    }
}

/// Residual targets for one solution; returns the failed checks.
fn residual_failures(r: &ResidualReport, tol: &Tolerances) -> Vec<String> {
    let mut bad = Vec::new();
    if !(r.soliton() < tol.residual) {
        bad.push(format!("soliton residual {:e}", r.soliton()));
    }
    if !(r.kaehler < tol.residual) {
        bad.push(format!("Kähler residual {:e}", r.kaehler));
    }
    if !(r.normalization < NORMALIZATION_TOLERANCE) {
        bad.push(format!("normalization {:e}", r.normalization));
    }
    if let Some(d) = r.cross_method {
        if !(d < CROSS_METHOD_TOLERANCE) {
            bad.push(format!("cross-method distance {d:e}"));
        }
    }
    bad
}

pub fn solve(common: &Common, constants: Option<&Path>) -> Outcome {
    let Some(cfg) = common.run_config()? else {
        return Err(Exit {
            code: CONFIG,
            error: anyhow!("solve needs --config"),
        });
    };
    let bundle = cfg.bundle().code(CONFIG)?;
    let cpath = constants.map_or_else(|| common.out.join(CONSTANTS_FILE), Path::to_path_buf);
    let constants = read_constants(&cpath)
        .map_err(|e| anyhow!("reading {}: {e}; run pin-constants first", cpath.display()))
        .code(ORACLE)?;
    constants.validated().code(ORACLE)?;
    let opts = cfg.solver_options();
    let solved = match cfg.method {
        MethodChoice::Both => solve_both(&bundle, &constants, &opts).map(|(m, s)| (m, Some(s))),
        MethodChoice::Momentum => solve_momentum(&bundle, &constants, &opts).map(|m| (m, None)),
        MethodChoice::Shooting => solve_shooting(&bundle, &constants, &opts).map(|s| (s, None)),
    };
    let (primary, secondary) = match solved {
        Ok(s) => s,
        Err(e) => {
            let code = solver_code(&e);
            if code == NO_SOLITON {
                let diag = json!({
                    "error": e.to_string(),
                    "config": bundle,
                    "method": cfg.method,
                });
                write_json(&common.out.join(DIAGNOSTICS_FILE), &diag).code(NO_SOLITON)?;
            }
            return Err(Exit {
                code,
                error: e.into(),
            });
        }
    };
    write_json(&common.out.join(RUN_FILE), &cfg).code(CONFIG)?;
    save_solution(&common.out, PRIMARY, &primary).code(IDENTITY)?;
    let mut failures = residual_failures(&primary.residuals, &cfg.tolerances);
    if let Some(s) = &secondary {
        save_solution(&common.out, SECONDARY, s).code(IDENTITY)?;
        failures.extend(
            residual_failures(&s.residuals, &cfg.tolerances)
                .into_iter()
                .map(|f| format!("shooting: {f}")),
        );
    }
    println!(
        "c = {:.15} T = {:.15} residual = {:e}{}",
        primary.c_slope,
        primary.grid.length(),
        primary.residuals.soliton(),
        primary
            .residuals
            .cross_method
            .map_or(String::new(), |d| format!(" cross-method = {d:e}"))
    );
    if failures.is_empty() {
        Ok(OK)
    } else {
        Err(Exit {
            code: IDENTITY,
            error: anyhow!("residual targets missed: {}", failures.join("; ")),
        })
    }
}

#[derive(Debug, Serialize)]
struct Check {
    name: &'static str,
    value: f64,
    tolerance: f64,
    passed: bool,
}

fn checks(r: &ResidualReport, tol: &Tolerances) -> Vec<Check> {
    let row = |name, value: f64, tolerance| Check {
        name,
        value,
        tolerance,
        passed: value < tolerance,
    };
    vec![
        row("soliton_residual", r.soliton(), tol.residual),
        row("kaehler", r.kaehler, tol.residual),
        row("drift_laplacian", r.drift_laplacian, tol.identity),
        row("trace_identity", r.trace_identity, tol.identity),
        row("hamilton_constancy", r.hamilton_constancy, tol.identity),
        row("normalization", r.normalization, NORMALIZATION_TOLERANCE),
        row("weighted_divergence", r.weighted_divergence, DIVERGENCE_TOLERANCE),
    ]
}

/// Loads the primary solution and recomputes its identities.
fn verified(common: &Common, tol: &Tolerances) -> std::result::Result<(SolitonSolution, Vec<Check>), Exit> {
    let sol = load_solution(&common.out, PRIMARY).code(IDENTITY)?;
    let residuals = identity_suite(&sol).code(IDENTITY)?;
    let list = checks(&residuals, tol);
    Ok((SolitonSolution { residuals, ..sol }, list))
}

pub fn verify(common: &Common) -> Outcome {
    let cfg = common.stored_config()?;
    let tol = cfg.map(|c| c.tolerances).unwrap_or_default();
    let (sol, list) = verified(common, &tol)?;
    let passed = list.iter().all(|c| c.passed);
    let report = json!({
        "method": sol.method,
        "nodes": sol.grid.len(),
        "residuals": sol.residuals,
        "checks": list,
        "passed": passed,
    });
    write_json(&common.out.join(VERIFY_FILE), &report).code(IDENTITY)?;
    for c in list.iter().filter(|c| !c.passed) {
        eprintln!("{}: {:e} exceeds {:e}", c.name, c.value, c.tolerance);
    }
    if passed {
        println!("all identities hold");
        Ok(OK)
    } else {
        Err(Exit {
            code: IDENTITY,
            error: anyhow!("identity suite failed"),
        })
    }
}

pub fn stability(common: &Common) -> Outcome {
    let cfg = common.stored_config()?;
    let tol = cfg.as_ref().map(|c| c.tolerances).unwrap_or_default();
    let (sol, list) = verified(common, &tol)?;
    if let Some(c) = list.iter().find(|c| !c.passed) {
        return Err(Exit {
            code: IDENTITY,
            error: anyhow!("solution is not verified: {} = {:e}", c.name, c.value),
        });
    }
    let prefactor = cfg.as_ref().map_or(2.0, RunConfig::prefactor);
    let family = match cfg.as_ref().and_then(RunConfig::profiles) {
        Some(specs) => specs
            .iter()
            .enumerate()
            .map(|(i, s)| Ok((s.label(i), s.build(&sol)?)))
            .collect::<anyhow::Result<Vec<_>>>()
            .code(CONFIG)?,
        None => default_family(&sol).code(CONFIG)?,
    };
    let rows = sign_explorer(&sol, &family, prefactor).code(IDENTITY)?;
    write_atomic(&common.out.join(STABILITY_CSV), &stability_csv(&rows).code(IDENTITY)?).code(IDENTITY)?;
    let reports: Vec<_> = rows
        .iter()
        .map(|(id, r)| json!({"profile_id": id, "report": r}))
        .collect();
    write_json(&common.out.join(STABILITY_JSON), &reports).code(IDENTITY)?;
    for (id, r) in &rows {
        println!("{id}: {} ({:+.6e} of scale)", r.sign.as_str(), r.normalized());
    }
    let broken: Vec<&str> = family
        .iter()
        .zip(&rows)
        .filter(|((_, p), (_, r))| p.is_constant() && r.sign != Sign::Zero)
        .map(|((id, _), _)| id.as_str())
        .collect();
    if broken.is_empty() {
        Ok(OK)
    } else {
        Err(Exit {
            code: IDENTITY,
            error: anyhow!("constant profiles with nonzero value: {}", broken.join(", ")),
        })
    }
}

pub fn fuzz_algebra(common: &Common, trials: usize) -> Outcome {
    let cfg = common.run_config()?;
    let seed = common.seed(cfg.as_ref());
    let (report, breakdown) = fuzz(trials, seed).code(IDENTITY)?;
    write_json(&common.out.join(FUZZ_FILE), &report).code(IDENTITY)?;
    println!("{}", serde_json::to_string(&report).code(IDENTITY)?);
    if report.max_residual < IDENTITY_TOLERANCE {
        Ok(OK)
    } else {
        Err(Exit {
            code: IDENTITY,
            error: anyhow!("pointwise identities exceed {IDENTITY_TOLERANCE:e}: {breakdown:?}"),
        })
    }
}
