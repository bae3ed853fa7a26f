//! Cross-module invariant suites behind `optoqfi validate`.

use nalgebra::DMatrix;
use optoqfi::estimation::{self, Quadrature};
use optoqfi::model::{self, ModelVariant, PhysicalParams};
use optoqfi::sweep::{figure_preset, log_space, Tolerances};
use optoqfi_oracle as oracle;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

pub const ORACLE_SEED: u64 = 0x5eed_0f1d;
pub const ORACLE_POINTS: usize = 10;

#[derive(Debug, Clone, Serialize)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub checks: usize,
    pub failures: usize,
    /// Largest observed value of the suite's error measure.
    pub worst: f64,
    pub tolerance: f64,
    pub note: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub suites: Vec<SuiteResult>,
}

struct Tally {
    checks: usize,
    failures: usize,
    worst: f64,
    errors: Vec<String>,
}

impl Tally {
    fn new() -> Self {
        Tally {
            checks: 0,
            failures: 0,
            worst: f64::NEG_INFINITY,
            errors: Vec::new(),
        }
    }

    fn record(&mut self, measure: f64, tol: f64) {
        self.checks += 1;
        if measure.is_nan() || measure > tol {
            self.failures += 1;
        }
        if measure.is_nan() || measure > self.worst {
            self.worst = measure;
        }
    }

    fn error(&mut self, what: String) {
        self.checks += 1;
        self.failures += 1;
        self.errors.push(what);
    }

    fn finish(self, name: &'static str, tolerance: f64, note: &str) -> SuiteResult {
        let mut note = note.to_string();
        if !self.errors.is_empty() {
            note = format!("{note}; errors: {}", self.errors.join("; "));
        }
        SuiteResult {
            name,
            passed: self.failures == 0,
            checks: self.checks,
            failures: self.failures,
            worst: if self.worst == f64::NEG_INFINITY {
                0.0
            } else {
                self.worst
            },
            tolerance,
            note,
        }
    }
}

/// The full figure-1(a) grid: both variants, three temperatures, 60 drives.
pub fn full_grid() -> Vec<PhysicalParams> {
    figure_preset("fig1a").expect("fig1a preset").points()
}

/// 20 drives at each of T ∈ {0, 1 mK, 80 mK}, quadratic model.
pub fn gradient_subgrid() -> Vec<PhysicalParams> {
    let mut out = Vec::new();
    for t in [0.0, 1e-3, 0.08] {
        for e in log_space(1e8, 3.8e9, 20) {
            out.push(
                PhysicalParams::reference()
                    .with_drive(e)
                    .with_temperature(t),
            );
        }
    }
    out
}

fn label(p: &PhysicalParams) -> String {
    format!("{} E={:e} T={}", p.variant, p.drive, p.temperature)
}

pub fn lyapunov_suite(tol: &Tolerances) -> SuiteResult {
    let results: Vec<_> = full_grid()
        .par_iter()
        .map(|p| {
            (
                label(p),
                model::steady_state(p).map(|s| s.lyapunov_residual()),
            )
        })
        .collect();
    let mut t = Tally::new();
    for (l, r) in results {
        match r {
            Ok(res) => t.record(res, tol.lyapunov_residual),
            Err(e) => t.error(format!("{l}: {e}")),
        }
    }
    t.finish(
        "lyapunov_residual",
        tol.lyapunov_residual,
        "relative residual over the fig1a grid",
    )
}

pub fn gradient_suite(tol: &Tolerances) -> SuiteResult {
    let results: Vec<_> = gradient_subgrid()
        .par_iter()
        .map(|p| (label(p), oracle::gradient_check(p, tol.gradient_fd)))
        .collect();
    let mut t = Tally::new();
    let mut unresolved = 0;
    let mut raw: f64 = 0.0;
    for (l, r) in results {
        match r {
            Ok(c) => {
                t.record(c.deviation, tol.gradient_fd);
                unresolved += c.unresolved;
                raw = raw.max(c.raw_deviation);
            }
            Err(e) => t.error(format!("{l}: {e}")),
        }
    }
    let note = format!(
        "analytic vs Richardson central differences, 20 drives x 3 temperatures; \
         each entry allowed its round-off floor; {unresolved} entries below finite-difference \
         resolution; worst deviation without the floor {raw:e}"
    );
    t.finish("gradient_finite_differences", tol.gradient_fd, &note)
}

/// Per-point information orderings and the decomposition identity.
struct InfoChecks {
    dominance: f64,
    monotonicity: f64,
    decomposition: f64,
}

fn info_checks(p: &PhysicalParams) -> Result<InfoChecks, String> {
    let s = model::steady_state(p).map_err(|e| e.to_string())?;
    let g = estimation::parameter_gradients(&s).map_err(|e| e.to_string())?;
    let local = estimation::local_qfim_from(&s, &g).map_err(|e| e.to_string())?;
    let fi = estimation::all_quadrature_fi(s.covariance(), &g).map_err(|e| e.to_string())?;
    let excess = |a: f64, b: f64| {
        if b > 0.0 {
            a / b - 1.0
        } else if a > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    };
    let mut dominance = f64::NEG_INFINITY;
    let mut monotonicity = f64::NEG_INFINITY;
    for i in 0..2 {
        let gi = local.global.total[(i, i)];
        for q in Quadrature::ALL {
            dominance = dominance.max(excess(fi.get(q)[(i, i)], gi));
        }
        monotonicity = monotonicity
            .max(excess(local.light.total[(i, i)], gi))
            .max(excess(local.mechanics.total[(i, i)], gi));
    }
    let mut decomposition: f64 = 0.0;
    for r in [&local.global, &local.light, &local.mechanics] {
        let scale = r.total.amax().max(f64::MIN_POSITIVE);
        decomposition = decomposition.max((r.total - r.averages - r.variances).amax() / scale);
    }
    Ok(InfoChecks {
        dominance,
        monotonicity,
        decomposition,
    })
}

pub fn information_suites(tol: &Tolerances) -> Vec<SuiteResult> {
    let results: Vec<_> = full_grid()
        .par_iter()
        .map(|p| (label(p), info_checks(p)))
        .collect();
    let mut dom = Tally::new();
    let mut mono = Tally::new();
    let mut dec = Tally::new();
    for (l, r) in results {
        match r {
            Ok(c) => {
                dom.record(c.dominance, tol.fi_dominance);
                mono.record(c.monotonicity, tol.reduction_monotonicity);
                dec.record(c.decomposition, tol.decomposition);
            }
            Err(e) => {
                dom.error(format!("{l}: {e}"));
                mono.error(format!("{l}: {e}"));
                dec.error(format!("{l}: {e}"));
            }
        }
    }
    vec![
        dom.finish(
            "fi_dominance",
            tol.fi_dominance,
            "max over quadratures of J_ii/I_ii - 1",
        ),
        mono.finish(
            "reduction_monotonicity",
            tol.reduction_monotonicity,
            "max of local I_ii/global I_ii - 1",
        ),
        dec.finish(
            "decomposition_exactness",
            tol.decomposition,
            "|I - averages - variances| relative to |I|",
        ),
    ]
}

pub fn decoupled_suite(tol: &Tolerances) -> SuiteResult {
    let mut t = Tally::new();
    for temp in [0.0, 0.08] {
        for e in log_space(1e8, 3.8e9, 5) {
            let p = PhysicalParams::reference()
                .with_couplings(0.0, 0.0)
                .with_drive(e)
                .with_temperature(temp);
            match model::steady_state(&p) {
                Ok(s) => {
                    let n = p.n_bar();
                    let expected = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
                        0.5,
                        0.5,
                        n + 0.5,
                        n + 0.5,
                    ]));
                    t.record(
                        (s.covariance() - &expected).amax() / (n + 0.5),
                        tol.decoupled,
                    );
                }
                Err(e) => t.error(format!("{}: {e}", label(&p))),
            }
        }
    }
    t.finish(
        "decoupled_covariance",
        tol.decoupled,
        "g1 = g2 = 0 gives diag(1/2, 1/2, n+1/2, n+1/2)",
    )
}

fn rel(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}

pub fn variant_suite(tol: &Tolerances) -> SuiteResult {
    let points: Vec<PhysicalParams> = full_grid()
        .into_iter()
        .filter(|p| p.variant == ModelVariant::Quadratic)
        .map(|p| p.with_couplings(p.g1, 0.0))
        .collect();
    let results: Vec<_> = points
        .par_iter()
        .map(|p| {
            let q = estimation::estimate(p, 1);
            let l = estimation::estimate(&p.with_variant(ModelVariant::Linear), 1);
            (label(p), q, l)
        })
        .collect();
    let mut t = Tally::new();
    for (lab, q, l) in results {
        match (q, l) {
            (Ok(q), Ok(l)) => {
                let mut worst = rel(q.op_point.x0(), l.op_point.x0());
                worst = worst.max(rel(q.op_point.photon_number, l.op_point.photon_number));
                worst = worst.max(rel(
                    q.qfim.global.total[(0, 0)],
                    l.qfim.global.total[(0, 0)],
                ));
                worst = worst.max(rel(
                    q.bounds.global.relative[0],
                    l.bounds.global.relative[0],
                ));
                t.record(worst, tol.variant_agreement);
            }
            (Err(e), _) | (_, Err(e)) => t.error(format!("{lab}: {e}")),
        }
    }
    t.finish(
        "variant_agreement",
        tol.variant_agreement,
        "linear vs quadratic at g2 = 0: x0, |alpha|^2, I11, dg1/g1",
    )
}

/// Grid points eligible for the fidelity oracle, drawn with a fixed seed.
pub fn oracle_sample(count: usize, seed: u64) -> (Vec<PhysicalParams>, usize) {
    let mut candidates: Vec<PhysicalParams> = full_grid()
        .into_iter()
        .filter(|p| p.variant == ModelVariant::Quadratic)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    candidates.shuffle(&mut rng);
    let mut chosen = Vec::new();
    let mut skipped = 0;
    for p in candidates {
        if chosen.len() == count {
            break;
        }
        let eligible = model::steady_state(&p)
            .map(|s| oracle::symplectic_excess(s.covariance()) >= oracle::MIN_SYMPLECTIC_EXCESS)
            .unwrap_or(false);
        if eligible {
            chosen.push(p);
        } else {
            skipped += 1;
        }
    }
    (chosen, skipped)
}

pub fn fidelity_suite(tol: &Tolerances) -> SuiteResult {
    let (points, skipped) = oracle_sample(ORACLE_POINTS, ORACLE_SEED);
    let results: Vec<_> = points
        .par_iter()
        .map(|p| {
            let r = estimation::local_qfim(p)
                .map_err(oracle::OracleError::from)
                .and_then(|q| {
                    let mut worst: f64 = 0.0;
                    for k in 0..2 {
                        let f = oracle::fidelity_qfi(p, k)?;
                        worst = worst.max(rel(f.value, q.global.total[(k, k)]));
                    }
                    Ok(worst)
                });
            (label(p), r)
        })
        .collect();
    let mut t = Tally::new();
    for (l, r) in results {
        match r {
            Ok(d) => t.record(d, tol.fidelity_oracle),
            Err(e) => t.error(format!("{l}: {e}")),
        }
    }
    if t.checks < ORACLE_POINTS {
        t.error(format!("only {} eligible points", t.checks));
    }
    t.finish(
        "fidelity_oracle",
        tol.fidelity_oracle,
        &format!("I11 and I22 vs 8(1-F)/(2 eps)^2 at {ORACLE_POINTS} seeded points ({skipped} near-pure points skipped)"),
    )
}

pub fn dimensionless_suite(tol: &Tolerances) -> SuiteResult {
    let mut points = Vec::new();
    for t in [0.0, 0.08] {
        for e in log_space(1e8, 3.8e9, 5) {
            points.push(
                PhysicalParams::reference()
                    .with_drive(e)
                    .with_temperature(t),
            );
        }
    }
    let results: Vec<_> = points
        .par_iter()
        .map(|p| {
            let r =
                oracle::dimensionless_qfim_by_differences(p).and_then(|fd| {
                    let i = estimation::local_qfim(p)?.global.total;
                    let w2 = p.omega_m * p.omega_m;
                    Ok(rel(fd.total[(0, 0)], w2 * i[(0, 0)])
                        .max(rel(fd.total[(1, 1)], w2 * i[(1, 1)])))
                });
            (label(p), r)
        })
        .collect();
    let mut t = Tally::new();
    for (l, r) in results {
        match r {
            Ok(d) => t.record(d, tol.dimensionless),
            Err(e) => t.error(format!("{l}: {e}")),
        }
    }
    t.finish(
        "dimensionless_consistency",
        tol.dimensionless,
        "QFIM from differences in g/omega_m vs omega_m^2 I",
    )
}

/// Runs every suite.
pub fn validate(tol: &Tolerances) -> ValidationReport {
    let mut suites = vec![lyapunov_suite(tol), gradient_suite(tol)];
    suites.extend(information_suites(tol));
    suites.push(decoupled_suite(tol));
    suites.push(variant_suite(tol));
    suites.push(fidelity_suite(tol));
    suites.push(dimensionless_suite(tol));
    ValidationReport {
        passed: suites.iter().all(|s| s.passed),
        suites,
    }
}
