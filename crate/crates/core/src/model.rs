//! Driven-dissipative optomechanical model with linear and quadratic
//! coupling: parameters, semi-classical operating point and the bilinear
//! Hamiltonian/damping matrices around it.
//!
//! Every rate (ω_m, κ, Γ_m, Δ₀, g₁, g₂, 𝓔) is an angular frequency in s⁻¹,
//! including inside `ħω_m/k_BT`.

use std::f64::consts::SQRT_2;

use nalgebra::{DMatrix, DVector, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gaussian::{self, DampingMatrix, DriftDiffusion, GaussianError, MomentState};
use crate::poly::{Polynomial, RootFindingError};

/// Reduced Planck constant, J·s (CODATA 2018, exact).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant, J/K (CODATA 2018, exact).
pub const K_B: f64 = 1.380_649e-23;

/// Photon numbers below this raise the Gaussianity advisory flag.
pub const GAUSSIANITY_MIN_PHOTONS: f64 = 50.0;
/// Tolerance on `2σ + W ⪰ 0` used when classifying operating points.
pub const PHYSICALITY_TOL: f64 = 1e-9;
/// Relative residual every accepted root must meet in the first-moment equations.
pub const OPERATING_POINT_RESIDUAL_TOL: f64 = 1e-10;

pub const MODE_LABELS: [&str; 2] = ["light", "mechanics"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("multistable regime: {} stable operating points at x0 = {stable_roots:?}", stable_roots.len())]
    Multistable { stable_roots: Vec<f64> },
    #[error("no stable operating point (real roots x0 = {roots:?})")]
    Unstable { roots: Vec<f64> },
    #[error("operating point x0 = {x0:e} misses the first-moment equations by {residual:.3e}")]
    Residual { x0: f64, residual: f64 },
    #[error(transparent)]
    Gaussian(#[from] GaussianError),
    #[error(transparent)]
    RootFinding(#[from] RootFindingError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum ModelVariant {
    Linear,
    Quadratic,
}

impl ModelVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelVariant::Linear => "linear",
            ModelVariant::Quadratic => "quadratic",
        }
    }
}

impl std::str::FromStr for ModelVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linear" => Ok(ModelVariant::Linear),
            "quadratic" => Ok(ModelVariant::Quadratic),
            other => Err(format!("unknown model variant '{other}'")),
        }
    }
}

impl std::fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Model constants. Rates in s⁻¹, mass in kg, temperature in K.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub omega_m: f64,
    pub mass: f64,
    pub gamma_m: f64,
    pub delta_0: f64,
    pub kappa: f64,
    pub g1: f64,
    pub g2: f64,
    pub drive: f64,
    pub temperature: f64,
    pub variant: ModelVariant,
}

impl PhysicalParams {
    /// Sideband-cooling regime: ω_m = 1.1×10⁷, m = 4.8×10⁻¹⁴ kg, Γ_m = 32,
    /// Δ₀ = ω_m, κ = 10⁵, g₁ = 200, g₂ = 1.1×10⁻⁵, at 𝓔 = 10⁸ and T = 0.
    pub fn reference() -> Self {
        PhysicalParams {
            omega_m: 1.1e7,
            mass: 4.8e-14,
            gamma_m: 32.0,
            delta_0: 1.1e7,
            kappa: 1e5,
            g1: 2e2,
            g2: 1.1e-5,
            drive: 1e8,
            temperature: 0.0,
            variant: ModelVariant::Quadratic,
        }
    }

    pub fn with_drive(mut self, drive: f64) -> Self {
        self.drive = drive;
        self
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn with_variant(mut self, variant: ModelVariant) -> Self {
        self.variant = variant;
        self
    }

    pub fn with_couplings(mut self, g1: f64, g2: f64) -> Self {
        self.g1 = g1;
        self.g2 = g2;
        self
    }

    /// `g₂` as seen by the formulas: zero for the linear variant.
    pub fn effective_g2(&self) -> f64 {
        match self.variant {
            ModelVariant::Linear => 0.0,
            ModelVariant::Quadratic => self.g2,
        }
    }

    pub fn n_bar(&self) -> f64 {
        thermal_occupation(self.omega_m, self.temperature)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = [
            ("omega_m", self.omega_m),
            ("mass", self.mass),
            ("gamma_m", self.gamma_m),
            ("kappa", self.kappa),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ModelError::InvalidParams(format!(
                    "{name} must be > 0, got {v}"
                )));
            }
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(ModelError::InvalidParams(format!(
                "temperature must be >= 0, got {}",
                self.temperature
            )));
        }
        if !(self.g1 >= 0.0 && self.g1.is_finite()) {
            return Err(ModelError::InvalidParams(format!(
                "g1 must be >= 0, got {}",
                self.g1
            )));
        }
        for (name, v) in [
            ("g2", self.g2),
            ("delta_0", self.delta_0),
            ("drive", self.drive),
        ] {
            if !v.is_finite() {
                return Err(ModelError::InvalidParams(format!(
                    "{name} must be finite, got {v}"
                )));
            }
        }
        Ok(())
    }
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self::reference()
    }
}

/// Bose–Einstein occupancy `1/(exp(ħω/k_BT) − 1)`; exactly 0 at `T = 0`.
pub fn thermal_occupation(omega_m: f64, temperature: f64) -> f64 {
    if temperature <= 0.0 {
        return 0.0;
    }
    let x = HBAR * omega_m / (K_B * temperature);
    1.0 / x.exp_m1()
}

/// Fabry–Perot couplings `(ω₀x_zp/L, 2ω₀x_zp²/L²)` with `x_zp = √(ħ/2mω_m)`.
pub fn fabry_perot_couplings(omega_0: f64, length: f64, mass: f64, omega_m: f64) -> (f64, f64) {
    let x_zp = (HBAR / (2.0 * mass * omega_m)).sqrt();
    let ratio = x_zp / length;
    (omega_0 * ratio, 2.0 * omega_0 * ratio * ratio)
}

/// The static mechanical displacement equation with denominators cleared:
///
/// `F(x) = x·[(ω_m² + Γ_m²/4)(Δ(x)² + κ²/4) + 2g₂ω_m𝓔²] + √2·g₁ω_m𝓔²`
///
/// with `Δ(x) = Δ₀ − √2·g₁x + g₂x²`.
#[derive(Debug, Clone, Copy)]
pub struct DisplacementEquation {
    mech: f64,
    drive_term: f64,
    g1: f64,
    g2: f64,
    delta_0: f64,
    kappa: f64,
}

impl DisplacementEquation {
    pub fn new(params: &PhysicalParams) -> Self {
        DisplacementEquation {
            mech: params.omega_m * params.omega_m + params.gamma_m * params.gamma_m / 4.0,
            drive_term: params.omega_m * params.drive * params.drive,
            g1: params.g1,
            g2: params.effective_g2(),
            delta_0: params.delta_0,
            kappa: params.kappa,
        }
    }

    pub fn detuning(&self, x: f64) -> f64 {
        self.delta_0 - SQRT_2 * self.g1 * x + self.g2 * x * x
    }

    /// `∂Δ/∂x`, which coincides with `g_eff`.
    pub fn detuning_slope(&self, x: f64) -> f64 {
        -SQRT_2 * self.g1 + 2.0 * self.g2 * x
    }

    fn bracket(&self, x: f64) -> f64 {
        let d = self.detuning(x);
        self.mech * (d * d + self.kappa * self.kappa / 4.0) + 2.0 * self.g2 * self.drive_term
    }

    /// `(F(x), ∂F/∂x)`.
    pub fn residual(&self, x: f64) -> (f64, f64) {
        let d = self.detuning(x);
        let f = x * self.bracket(x) + SQRT_2 * self.g1 * self.drive_term;
        let df = self.bracket(x) + x * self.mech * 2.0 * d * self.detuning_slope(x);
        (f, df)
    }

    /// `(∂F/∂g₁, ∂F/∂g₂)` at fixed `x`. The second entry is zero for the
    /// linear variant, where `g₂` does not enter.
    pub fn parameter_partials(&self, x: f64, quadratic: bool) -> [f64; 2] {
        let d = self.detuning(x);
        let dg1 = x * self.mech * 2.0 * d * (-SQRT_2 * x) + SQRT_2 * self.drive_term;
        let dg2 = if quadratic {
            x * (self.mech * 2.0 * d * x * x + 2.0 * self.drive_term)
        } else {
            0.0
        };
        [dg1, dg2]
    }

    /// Right-hand side of the displacement equation, `x = rhs(x)` at a root.
    pub fn rhs(&self, x: f64) -> f64 {
        -SQRT_2 * self.g1 * self.drive_term / self.bracket(x)
    }

    /// Expanded polynomial, degree ≤ 5 (≤ 3 when `g₂ = 0`).
    pub fn polynomial(&self) -> Polynomial {
        let d = Polynomial::new(vec![self.delta_0, -SQRT_2 * self.g1, self.g2]);
        let inner = d
            .mul(&d)
            .add(&Polynomial::new(vec![self.kappa * self.kappa / 4.0]))
            .scale(self.mech)
            .add(&Polynomial::new(vec![2.0 * self.g2 * self.drive_term]));
        Polynomial::new(vec![0.0, 1.0])
            .mul(&inner)
            .add(&Polynomial::new(vec![SQRT_2 * self.g1 * self.drive_term]))
    }

    /// Real roots of `F`, Newton polished on the unexpanded residual.
    pub fn real_roots(&self) -> Result<Vec<f64>, RootFindingError> {
        self.polynomial().real_roots_with(|x| self.residual(x))
    }
}

/// Semi-classical first moments and the effective quantities derived from them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SteadyOperatingPoint {
    /// `(Q₀, P₀, x₀, p₀)`.
    pub r0: Vector4<f64>,
    pub delta_eff: f64,
    pub omega_eff: f64,
    pub g_eff: f64,
    /// `|α|² = (Q₀² + P₀²)/2`.
    pub photon_number: f64,
    pub n_bar: f64,
}

impl SteadyOperatingPoint {
    /// Reconstructs the light means, `p₀` and the effective quantities from a
    /// mechanical displacement `x₀`.
    pub fn from_displacement(params: &PhysicalParams, x0: f64) -> Self {
        let eq = DisplacementEquation::new(params);
        let g2 = params.effective_g2();
        let delta_eff = eq.detuning(x0);
        let den = SQRT_2 * (delta_eff * delta_eff + params.kappa * params.kappa / 4.0);
        let q0 = -2.0 * delta_eff * params.drive / den;
        let p0 = -params.kappa * params.drive / den;
        let mech_p0 = params.gamma_m / (2.0 * params.omega_m) * x0;
        let photon_number = (q0 * q0 + p0 * p0) / 2.0;
        SteadyOperatingPoint {
            r0: Vector4::new(q0, p0, x0, mech_p0),
            delta_eff,
            omega_eff: params.omega_m + 2.0 * g2 * photon_number,
            g_eff: -SQRT_2 * params.g1 + 2.0 * g2 * x0,
            photon_number,
            n_bar: params.n_bar(),
        }
    }

    pub fn q0(&self) -> f64 {
        self.r0[0]
    }
    pub fn p0(&self) -> f64 {
        self.r0[1]
    }
    pub fn x0(&self) -> f64 {
        self.r0[2]
    }
    pub fn mech_p0(&self) -> f64 {
        self.r0[3]
    }
}

fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Largest relative residual of `R₀` in the four first-moment equations.
pub fn operating_point_residual(params: &PhysicalParams, op: &SteadyOperatingPoint) -> f64 {
    let eq = DisplacementEquation::new(params);
    let x0 = op.x0();
    let d = eq.detuning(x0);
    let den = SQRT_2 * (d * d + params.kappa * params.kappa / 4.0);
    [
        rel_diff(op.q0(), -2.0 * d * params.drive / den),
        rel_diff(op.p0(), -params.kappa * params.drive / den),
        rel_diff(x0, eq.rhs(x0)),
        rel_diff(op.mech_p0(), params.gamma_m / (2.0 * params.omega_m) * x0),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

/// `H/ħ` in s⁻¹ for quadratures `(Q, P, X_b, P_b)`.
pub fn build_hamiltonian_matrix(
    params: &PhysicalParams,
    op: &SteadyOperatingPoint,
) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(4, 4);
    h[(0, 0)] = op.delta_eff;
    h[(1, 1)] = op.delta_eff;
    h[(2, 2)] = op.omega_eff;
    h[(3, 3)] = params.omega_m;
    h[(0, 2)] = op.g_eff * op.q0();
    h[(2, 0)] = h[(0, 2)];
    h[(1, 2)] = op.g_eff * op.p0();
    h[(2, 1)] = h[(1, 2)];
    h
}

/// Cavity decay plus thermal mechanical damping, no thermal photons.
pub fn build_damping_matrix(params: &PhysicalParams) -> DampingMatrix {
    let k = params.kappa / 2.0;
    let gm = params.gamma_m / 2.0;
    let d = gm * (2.0 * params.n_bar() + 1.0);
    let c = Complex64::new;
    #[rustfmt::skip]
    let gamma = DMatrix::from_row_slice(4, 4, &[
        c(k, 0.0), c(0.0, -k), c(0.0, 0.0), c(0.0, 0.0),
        c(0.0, k), c(k, 0.0),  c(0.0, 0.0), c(0.0, 0.0),
        c(0.0, 0.0), c(0.0, 0.0), c(d, 0.0), c(0.0, -gm),
        c(0.0, 0.0), c(0.0, 0.0), c(0.0, gm), c(d, 0.0),
    ]);
    DampingMatrix::new(gamma).expect("4x4 damping matrix")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MultistablePolicy {
    /// Multiple stable roots are an error.
    #[default]
    Strict,
    /// Pick the stable root with the smallest `|x₀|`.
    SmallestDisplacement,
}

/// One real root of the displacement equation and its classification.
#[derive(Debug, Clone, PartialEq)]
pub struct RootCandidate {
    pub op_point: SteadyOperatingPoint,
    pub residual: f64,
    pub spectral_abscissa: f64,
    pub physical: bool,
}

impl RootCandidate {
    pub fn is_stable(&self) -> bool {
        self.spectral_abscissa < 0.0 && self.physical
    }
}

/// Every real root with its stability classification, ascending in `x₀`.
pub fn operating_point_candidates(
    params: &PhysicalParams,
) -> Result<Vec<RootCandidate>, ModelError> {
    params.validate()?;
    let eq = DisplacementEquation::new(params);
    let damping = build_damping_matrix(params);
    let mut out = Vec::new();
    for x0 in eq.real_roots()? {
        let op = SteadyOperatingPoint::from_displacement(params, x0);
        let h = build_hamiltonian_matrix(params, &op);
        let dd = gaussian::build_drift_diffusion(&h, &damping)?;
        let abscissa = gaussian::spectral_abscissa(&dd.drift)?;
        let physical = abscissa < 0.0
            && gaussian::solve_lyapunov(&dd.drift, &dd.diffusion)
                .map(|s| gaussian::min_uncertainty_eigenvalue(&s) >= -PHYSICALITY_TOL)
                .unwrap_or(false);
        out.push(RootCandidate {
            residual: operating_point_residual(params, &op),
            op_point: op,
            spectral_abscissa: abscissa,
            physical,
        });
    }
    Ok(out)
}

pub fn solve_operating_point(params: &PhysicalParams) -> Result<SteadyOperatingPoint, ModelError> {
    solve_operating_point_with(params, MultistablePolicy::Strict)
}

/// The unique stable, physical operating point.
pub fn solve_operating_point_with(
    params: &PhysicalParams,
    policy: MultistablePolicy,
) -> Result<SteadyOperatingPoint, ModelError> {
    let candidates = operating_point_candidates(params)?;
    let mut stable: Vec<&RootCandidate> = candidates.iter().filter(|c| c.is_stable()).collect();
    let chosen = match (stable.len(), policy) {
        (0, _) => {
            return Err(ModelError::Unstable {
                roots: candidates.iter().map(|c| c.op_point.x0()).collect(),
            })
        }
        (1, _) => stable[0],
        (_, MultistablePolicy::Strict) => {
            return Err(ModelError::Multistable {
                stable_roots: stable.iter().map(|c| c.op_point.x0()).collect(),
            })
        }
        (_, MultistablePolicy::SmallestDisplacement) => {
            stable.sort_by(|a, b| a.op_point.x0().abs().total_cmp(&b.op_point.x0().abs()));
            stable[0]
        }
    };
    if chosen.residual > OPERATING_POINT_RESIDUAL_TOL {
        return Err(ModelError::Residual {
            x0: chosen.op_point.x0(),
            residual: chosen.residual,
        });
    }
    Ok(chosen.op_point)
}

/// Everything known about the Gaussian steady state at one parameter point.
#[derive(Debug, Clone)]
pub struct SteadyState {
    pub params: PhysicalParams,
    pub op_point: SteadyOperatingPoint,
    /// Lab-frame means `R₀` and steady covariance `σ̄`.
    pub state: MomentState,
    pub hamiltonian: DMatrix<f64>,
    pub damping: DampingMatrix,
    pub dynamics: DriftDiffusion,
    /// Set when `|α|²` is below [`GAUSSIANITY_MIN_PHOTONS`].
    pub gaussianity_warning: bool,
}

impl SteadyState {
    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.state.covariance
    }

    /// `‖Bᵀσ̄ + σ̄B − C‖_F / max(1, ‖C‖_F)`.
    pub fn lyapunov_residual(&self) -> f64 {
        gaussian::lyapunov_residual(
            &self.dynamics.drift,
            self.covariance(),
            &self.dynamics.diffusion,
        ) / self.dynamics.diffusion.norm().max(1.0)
    }
}

pub fn steady_state(params: &PhysicalParams) -> Result<SteadyState, ModelError> {
    steady_state_with(params, MultistablePolicy::Strict)
}

pub fn steady_state_with(
    params: &PhysicalParams,
    policy: MultistablePolicy,
) -> Result<SteadyState, ModelError> {
    let op_point = solve_operating_point_with(params, policy)?;
    let hamiltonian = build_hamiltonian_matrix(params, &op_point);
    let damping = build_damping_matrix(params);
    let dynamics = gaussian::build_drift_diffusion(&hamiltonian, &damping)?;
    let sigma = gaussian::solve_lyapunov(&dynamics.drift, &dynamics.diffusion)?;
    let state = MomentState::new(
        DVector::from_column_slice(op_point.r0.as_slice()),
        sigma,
        MODE_LABELS.iter().map(|s| s.to_string()).collect(),
    )?;
    Ok(SteadyState {
        params: *params,
        gaussianity_warning: op_point.photon_number < GAUSSIANITY_MIN_PHOTONS,
        op_point,
        state,
        hamiltonian,
        damping,
        dynamics,
    })
}
