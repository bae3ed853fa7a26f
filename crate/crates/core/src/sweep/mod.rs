//! Drive/temperature sweeps of the estimation pipeline, figure presets and
//! CSV/JSON/SVG output.

mod config;
mod emit;
mod preset;

use std::collections::BTreeSet;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimation::{self, EstimationError, EstimationReport};
use crate::model::{ModelError, ModelVariant, PhysicalParams};

pub use config::{parse_config, parse_key_values, parse_tolerances, ConfigError};
pub use emit::{emit, render_svg, write_csv, EmitError, SCHEMA_VERSION};
pub use preset::{figure_preset, CurveSpec, FigureSpec, PRESET_NAMES, T_HIGH, T_LOW, T_ZERO};

/// `n` log-spaced values from `lo` to `hi`, endpoints exact.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.log10(), hi.log10());
            (0..n)
                .map(|k| match k {
                    0 => lo,
                    k if k == n - 1 => hi,
                    k => 10f64.powf(a + (b - a) * k as f64 / (n - 1) as f64),
                })
                .collect()
        }
    }
}

pub const DEFAULT_DRIVE_MIN: f64 = 1e8;
pub const DEFAULT_DRIVE_MAX: f64 = 3.8e9;
pub const DEFAULT_DRIVE_POINTS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
    Svg,
}

impl std::str::FromStr for OutputFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            "svg" => Ok(OutputFormat::Svg),
            other => Err(format!("unknown output format '{other}'")),
        }
    }
}

/// Thresholds used by the validation suites.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub lyapunov_residual: f64,
    pub gradient_fd: f64,
    pub fi_dominance: f64,
    pub reduction_monotonicity: f64,
    pub decomposition: f64,
    pub decoupled: f64,
    pub variant_agreement: f64,
    pub fidelity_oracle: f64,
    pub dimensionless: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            lyapunov_residual: 1e-10,
            gradient_fd: 1e-5,
            fi_dominance: 1e-9,
            reduction_monotonicity: 1e-9,
            decomposition: 1e-12,
            decoupled: 1e-12,
            variant_agreement: 1e-12,
            fidelity_oracle: 1e-3,
            dimensionless: 1e-5,
        }
    }
}

impl Tolerances {
    pub const KEYS: [&'static str; 9] = [
        "lyapunov_residual",
        "gradient_fd",
        "fi_dominance",
        "reduction_monotonicity",
        "decomposition",
        "decoupled",
        "variant_agreement",
        "fidelity_oracle",
        "dimensionless",
    ];

    pub fn get_mut(&mut self, key: &str) -> Option<&mut f64> {
        Some(match key {
            "lyapunov_residual" => &mut self.lyapunov_residual,
            "gradient_fd" => &mut self.gradient_fd,
            "fi_dominance" => &mut self.fi_dominance,
            "reduction_monotonicity" => &mut self.reduction_monotonicity,
            "decomposition" => &mut self.decomposition,
            "decoupled" => &mut self.decoupled,
            "variant_agreement" => &mut self.variant_agreement,
            "fidelity_oracle" => &mut self.fidelity_oracle,
            "dimensionless" => &mut self.dimensionless,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepConfig {
    /// Preset name, or `"sweep"` for hand-written configurations.
    pub name: String,
    /// Everything but `drive`, `temperature` and `variant` is taken from here.
    pub base: PhysicalParams,
    pub drive_grid: Vec<f64>,
    pub temperatures: Vec<f64>,
    pub variants: Vec<ModelVariant>,
    pub runs: u32,
    pub out_dir: PathBuf,
    pub formats: BTreeSet<OutputFormat>,
    pub tolerances: Tolerances,
    pub figure: Option<FigureSpec>,
}

impl SweepConfig {
    pub fn new(name: &str, base: PhysicalParams) -> Self {
        SweepConfig {
            name: name.to_string(),
            base,
            drive_grid: log_space(DEFAULT_DRIVE_MIN, DEFAULT_DRIVE_MAX, DEFAULT_DRIVE_POINTS),
            temperatures: vec![0.0],
            variants: vec![ModelVariant::Quadratic],
            runs: 1,
            out_dir: PathBuf::from("out").join(name),
            formats: [OutputFormat::Csv, OutputFormat::Json]
                .into_iter()
                .collect(),
            tolerances: Tolerances::default(),
            figure: None,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.drive_grid.is_empty() {
            return bad("drive grid is empty".into());
        }
        if self.drive_grid.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return bad("drive values must be finite and positive".into());
        }
        if self.drive_grid.windows(2).any(|w| w[1] <= w[0]) {
            return bad("drive grid must be strictly increasing".into());
        }
        if self.temperatures.is_empty() {
            return bad("temperature list is empty".into());
        }
        if self
            .temperatures
            .iter()
            .any(|t| !(t.is_finite() && *t >= 0.0))
        {
            return bad("temperatures must be finite and >= 0".into());
        }
        if self.variants.is_empty() {
            return bad("variant list is empty".into());
        }
        if self.runs == 0 {
            return bad("runs must be positive".into());
        }
        if self.formats.is_empty() {
            return bad("no output format selected".into());
        }
        self.base
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    /// Grid points in output order: variant, then temperature, then drive.
    pub fn points(&self) -> Vec<PhysicalParams> {
        let mut out = Vec::new();
        for &v in &self.variants {
            for &t in &self.temperatures {
                for &e in &self.drive_grid {
                    out.push(self.base.with_variant(v).with_temperature(t).with_drive(e));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PointStatus {
    Ok,
    Multistable,
    Unstable,
    Failed,
}

impl PointStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            PointStatus::Ok => "ok",
            PointStatus::Multistable => "multistable",
            PointStatus::Unstable => "unstable",
            PointStatus::Failed => "failed",
        }
    }
}

macro_rules! metrics {
    ($($field:ident),* $(,)?) => {
        /// Numeric outputs of one grid point; field names are the CSV column names.
        #[derive(Debug, Clone, Copy, PartialEq, Serialize)]
        pub struct PointMetrics {
            $(pub $field: f64,)*
        }

        impl PointMetrics {
            pub const COLUMNS: &'static [&'static str] = &[$(stringify!($field)),*];

            pub fn values(&self) -> Vec<f64> {
                vec![$(self.$field),*]
            }

            pub fn get(&self, column: &str) -> Option<f64> {
                match column {
                    $(stringify!($field) => Some(self.$field),)*
                    _ => None,
                }
            }
        }
    };
}

metrics!(
    photon_number,
    log10_photon_number,
    x0,
    delta_eff,
    omega_eff,
    g_eff,
    n_bar,
    lyapunov_residual,
    i11,
    i22,
    i12,
    avg11,
    avg22,
    var11,
    var22,
    light_i11,
    light_i22,
    mech_i11,
    mech_i22,
    j11_q,
    j22_q,
    j11_p,
    j22_p,
    j11_xb,
    j22_xb,
    j11_pb,
    j22_pb,
    it11,
    it22,
    avgt11,
    avgt22,
    vart11,
    vart22,
    rel_g1_global,
    rel_g2_global,
    rel_g1_light,
    rel_g2_light,
    rel_g1_mech,
    rel_g2_mech,
    rel_g1_q,
    rel_g2_q,
    rel_g1_p,
    rel_g2_p,
    rel_g1_xb,
    rel_g2_xb,
    rel_g1_pb,
    rel_g2_pb,
);

impl PointMetrics {
    pub fn from_report(r: &EstimationReport) -> Self {
        let op = &r.op_point;
        let g = &r.qfim.global;
        let dl = &r.qfim_dimensionless;
        let b = &r.bounds;
        PointMetrics {
            photon_number: op.photon_number,
            log10_photon_number: op.photon_number.log10(),
            x0: op.x0(),
            delta_eff: op.delta_eff,
            omega_eff: op.omega_eff,
            g_eff: op.g_eff,
            n_bar: op.n_bar,
            lyapunov_residual: r.lyapunov_residual,
            i11: g.total[(0, 0)],
            i22: g.total[(1, 1)],
            i12: g.total[(0, 1)],
            avg11: g.averages[(0, 0)],
            avg22: g.averages[(1, 1)],
            var11: g.variances[(0, 0)],
            var22: g.variances[(1, 1)],
            light_i11: r.qfim.light.total[(0, 0)],
            light_i22: r.qfim.light.total[(1, 1)],
            mech_i11: r.qfim.mechanics.total[(0, 0)],
            mech_i22: r.qfim.mechanics.total[(1, 1)],
            j11_q: r.fi.q[(0, 0)],
            j22_q: r.fi.q[(1, 1)],
            j11_p: r.fi.p[(0, 0)],
            j22_p: r.fi.p[(1, 1)],
            j11_xb: r.fi.xb[(0, 0)],
            j22_xb: r.fi.xb[(1, 1)],
            j11_pb: r.fi.pb[(0, 0)],
            j22_pb: r.fi.pb[(1, 1)],
            it11: dl.total[(0, 0)],
            it22: dl.total[(1, 1)],
            avgt11: dl.averages[(0, 0)],
            avgt22: dl.averages[(1, 1)],
            vart11: dl.variances[(0, 0)],
            vart22: dl.variances[(1, 1)],
            rel_g1_global: b.global.relative[0],
            rel_g2_global: b.global.relative[1],
            rel_g1_light: b.light.relative[0],
            rel_g2_light: b.light.relative[1],
            rel_g1_mech: b.mechanics.relative[0],
            rel_g2_mech: b.mechanics.relative[1],
            rel_g1_q: b.q.relative[0],
            rel_g2_q: b.q.relative[1],
            rel_g1_p: b.p.relative[0],
            rel_g2_p: b.p.relative[1],
            rel_g1_xb: b.xb.relative[0],
            rel_g2_xb: b.xb.relative[1],
            rel_g1_pb: b.pb.relative[0],
            rel_g2_pb: b.pb.relative[1],
        }
    }
}

/// One grid point. `metrics` is `None` exactly when `status` is not `Ok`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub drive: f64,
    pub temperature: f64,
    pub variant: ModelVariant,
    pub status: PointStatus,
    pub gaussianity_warning: bool,
    pub message: String,
    pub metrics: Option<PointMetrics>,
}

impl SweepRecord {
    pub const LEADING_COLUMNS: [&'static str; 5] = [
        "drive",
        "temperature",
        "variant",
        "status",
        "gaussianity_warning",
    ];

    pub fn columns() -> Vec<&'static str> {
        Self::LEADING_COLUMNS
            .iter()
            .chain(PointMetrics::COLUMNS)
            .copied()
            .collect()
    }

    pub fn is_ok(&self) -> bool {
        self.status == PointStatus::Ok
    }

    /// A metric column, `None` for failed points or unknown names.
    pub fn get(&self, column: &str) -> Option<f64> {
        match column {
            "drive" => Some(self.drive),
            "temperature" => Some(self.temperature),
            _ => self.metrics.as_ref().and_then(|m| m.get(column)),
        }
    }

    pub fn evaluate(params: &PhysicalParams, runs: u32) -> SweepRecord {
        let result = estimation::estimate(params, runs);
        let (status, message) = match &result {
            Ok(_) => (PointStatus::Ok, String::new()),
            Err(EstimationError::Model(ModelError::Multistable { .. })) => (
                PointStatus::Multistable,
                result.as_ref().unwrap_err().to_string(),
            ),
            Err(EstimationError::Model(ModelError::Unstable { .. })) => (
                PointStatus::Unstable,
                result.as_ref().unwrap_err().to_string(),
            ),
            Err(e) => (PointStatus::Failed, e.to_string()),
        };
        let report = result.ok();
        SweepRecord {
            drive: params.drive,
            temperature: params.temperature,
            variant: params.variant,
            status,
            gaussianity_warning: report.as_ref().is_some_and(|r| r.gaussianity_warning),
            message,
            metrics: report.as_ref().map(PointMetrics::from_report),
        }
    }
}

#[derive(Debug, Error)]
pub enum SweepError {
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Evaluates every grid point (in parallel) and returns the records in
/// [`SweepConfig::points`] order. Failing points are kept and flagged.
pub fn run_sweep(config: &SweepConfig) -> Result<Vec<SweepRecord>, SweepError> {
    config.validate()?;
    Ok(config
        .points()
        .par_iter()
        .map(|p| SweepRecord::evaluate(p, config.runs))
        .collect())
}

/// Records matching one temperature and variant, in drive order.
pub fn select(
    records: &[SweepRecord],
    temperature: f64,
    variant: ModelVariant,
) -> Vec<&SweepRecord> {
    records
        .iter()
        .filter(|r| r.temperature == temperature && r.variant == variant)
        .collect()
}

/// Abscissae where two curves sampled on the same `x` grid cross, found by
/// linear interpolation of `a − b` between consecutive samples.
pub fn crossovers(x: &[f64], a: &[f64], b: &[f64]) -> Vec<f64> {
    let d: Vec<f64> = a.iter().zip(b).map(|(p, q)| p - q).collect();
    let mut out = Vec::new();
    for k in 0..d.len().saturating_sub(1) {
        let (d0, d1) = (d[k], d[k + 1]);
        if d0 == 0.0 {
            out.push(x[k]);
        } else if d0 * d1 < 0.0 {
            out.push(x[k] + (x[k + 1] - x[k]) * d0 / (d0 - d1));
        }
    }
    if d.last() == Some(&0.0) && d.len() > 1 {
        out.push(x[d.len() - 1]);
    }
    out
}

/// Same as [`crossovers`] on `log₁₀` of both curves.
pub fn log_crossovers(x: &[f64], a: &[f64], b: &[f64]) -> Vec<f64> {
    let la: Vec<f64> = a.iter().map(|v| v.log10()).collect();
    let lb: Vec<f64> = b.iter().map(|v| v.log10()).collect();
    crossovers(x, &la, &lb)
}
