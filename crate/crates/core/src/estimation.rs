//! Sensitivity of the steady state to `(g₁, g₂)` and the information
//! quantities built on it: QFIM with its averages/variances split, the
//! classical FI of single-quadrature homodyne, local QFIs of the reduced
//! light and mechanics states, and Cramér–Rao bounds.

use std::f64::consts::SQRT_2;

use nalgebra::{DMatrix, DVector, Matrix2, Vector4};
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::gaussian::{self, CommutatorMatrix, GaussianError, MomentState};
use crate::model::{
    self, DisplacementEquation, ModelError, ModelVariant, PhysicalParams, SteadyOperatingPoint,
    SteadyState, PHYSICALITY_TOL,
};

/// Relative singular-value cutoff of the variances-term pseudoinverse.
pub const PINV_RELATIVE_CUTOFF: f64 = 1e-12;
/// `|∂F/∂x₀|` below this fraction of its term scale is a fold point.
pub const DEGENERATE_ROOT_TOL: f64 = 1e-12;
/// Reciprocal condition number below which an information matrix is singular.
pub const SINGULAR_INFORMATION_TOL: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimationError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Gaussian(#[from] GaussianError),
    #[error("fold point: dF/dx0 = {slope:e} against term scale {scale:e}")]
    DegenerateRoot { slope: f64, scale: f64 },
    #[error("covariance violates the uncertainty principle (min eigenvalue of 2σ + W is {0:e})")]
    NonPhysicalState(f64),
    #[error("quadrature {quadrature} has non-positive variance {variance:e}")]
    DegenerateVariance {
        quadrature: Quadrature,
        variance: f64,
    },
    #[error("information matrix is singular")]
    SingularInformation,
    #[error("gradient dimensions do not match the state: {0}")]
    Dimension(String),
}

/// Derivatives of the operating-point quantities with respect to one coupling.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct OperatingPointDerivative {
    /// `∂(Q₀, P₀, x₀, p₀)`.
    pub r0: Vector4<f64>,
    pub delta_eff: f64,
    pub omega_eff: f64,
    pub g_eff: f64,
    pub photon_number: f64,
    /// Always zero: the bath occupancy does not depend on the couplings.
    pub n_bar: f64,
}

/// `[∂/∂g₁, ∂/∂g₂]` of the operating point.
pub type OperatingPointGradients = [OperatingPointDerivative; 2];

/// Every gradient the information quantities need.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterGradients {
    pub op: OperatingPointGradients,
    /// `∂σ̄/∂g₁`, `∂σ̄/∂g₂`.
    pub d_sigma: [DMatrix<f64>; 2],
}

impl ParameterGradients {
    pub fn d_r0(&self) -> [DVector<f64>; 2] {
        self.op.map(|d| DVector::from_column_slice(d.r0.as_slice()))
    }
}

/// Implicit differentiation of the displacement equation, then the chain
/// rule through the light means, `p₀`, `Δ_eff`, `ω_eff` and `g_eff`.
///
/// For the linear variant `g₂` does not enter the model and every `∂/∂g₂`
/// is zero.
pub fn operating_point_gradients(
    params: &PhysicalParams,
    op: &SteadyOperatingPoint,
) -> Result<OperatingPointGradients, EstimationError> {
    let quadratic = params.variant == ModelVariant::Quadratic;
    let eq = DisplacementEquation::new(params);
    let g2 = params.effective_g2();
    let x = op.x0();
    let d = eq.detuning(x);
    let slope = eq.detuning_slope(x);
    let mech = params.omega_m * params.omega_m + params.gamma_m * params.gamma_m / 4.0;
    let drive2 = params.drive * params.drive;

    let bracket =
        mech * (d * d + params.kappa * params.kappa / 4.0) + 2.0 * g2 * params.omega_m * drive2;
    let fold_term = x * mech * 2.0 * d * slope;
    let f_x = bracket + fold_term;
    let scale = bracket.abs() + fold_term.abs();
    if f_x.abs() < DEGENERATE_ROOT_TOL * scale || f_x == 0.0 {
        return Err(EstimationError::DegenerateRoot { slope: f_x, scale });
    }
    let f_g = eq.parameter_partials(x, quadratic);

    let den = d * d + params.kappa * params.kappa / 4.0;
    let dq0_dd = -SQRT_2 * params.drive * (params.kappa * params.kappa / 4.0 - d * d) / (den * den);
    let dp0_dd = params.kappa * params.drive * 2.0 * d / (SQRT_2 * den * den);

    let mut out = [OperatingPointDerivative::default(); 2];
    for (i, slot) in out.iter_mut().enumerate() {
        if i == 1 && !quadratic {
            continue;
        }
        let dx = -f_g[i] / f_x;
        let explicit_d = if i == 0 { -SQRT_2 * x } else { x * x };
        let dd = explicit_d + slope * dx;
        let dq0 = dq0_dd * dd;
        let dp0 = dp0_dd * dd;
        let dmech_p0 = params.gamma_m / (2.0 * params.omega_m) * dx;
        let da2 = op.q0() * dq0 + op.p0() * dp0;
        let explicit_w = if i == 1 { 2.0 * op.photon_number } else { 0.0 };
        let explicit_g = if i == 0 { -SQRT_2 } else { 2.0 * x };
        *slot = OperatingPointDerivative {
            r0: Vector4::new(dq0, dp0, dx, dmech_p0),
            delta_eff: dd,
            omega_eff: explicit_w + 2.0 * g2 * da2,
            g_eff: explicit_g + 2.0 * g2 * dx,
            photon_number: da2,
            n_bar: 0.0,
        };
    }
    Ok(out)
}

/// `∂(H/ħ)` for one coupling, laid out like [`model::build_hamiltonian_matrix`].
pub fn hamiltonian_derivative(
    op: &SteadyOperatingPoint,
    d: &OperatingPointDerivative,
) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(4, 4);
    h[(0, 0)] = d.delta_eff;
    h[(1, 1)] = d.delta_eff;
    h[(2, 2)] = d.omega_eff;
    h[(0, 2)] = d.g_eff * op.q0() + op.g_eff * d.r0[0];
    h[(2, 0)] = h[(0, 2)];
    h[(1, 2)] = d.g_eff * op.p0() + op.g_eff * d.r0[1];
    h[(2, 1)] = h[(1, 2)];
    h
}

/// Solves `Bᵀ·∂σ + ∂σ·B = −(∂Bᵀ·σ̄ + σ̄·∂B)` with `∂B = i·∂H·W`.
pub fn covariance_gradients(
    steady: &SteadyState,
    op_grads: &OperatingPointGradients,
) -> Result<[DMatrix<f64>; 2], EstimationError> {
    let w = CommutatorMatrix::new(2);
    let b = &steady.dynamics.drift;
    let sigma = steady.covariance();
    let solve = |d: &OperatingPointDerivative| -> Result<DMatrix<f64>, EstimationError> {
        let dh = hamiltonian_derivative(&steady.op_point, d).map(|x| Complex64::new(x, 0.0));
        let db = (dh * w.matrix() * Complex64::i()).map(|z| z.re);
        let rhs = -(db.transpose() * sigma + sigma * &db);
        Ok(gaussian::solve_lyapunov(b, &rhs)?)
    };
    Ok([solve(&op_grads[0])?, solve(&op_grads[1])?])
}

/// Operating-point and covariance gradients of a solved steady state.
pub fn parameter_gradients(steady: &SteadyState) -> Result<ParameterGradients, EstimationError> {
    let op = operating_point_gradients(&steady.params, &steady.op_point)?;
    let d_sigma = covariance_gradients(steady, &op)?;
    Ok(ParameterGradients { op, d_sigma })
}

/// Quantum Fisher information matrix for `(g₁, g₂)` and its split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QfimResult {
    /// `I = averages + variances`, in s².
    pub total: Matrix2<f64>,
    pub averages: Matrix2<f64>,
    pub variances: Matrix2<f64>,
}

impl QfimResult {
    pub fn zero() -> Self {
        QfimResult {
            total: Matrix2::zeros(),
            averages: Matrix2::zeros(),
            variances: Matrix2::zeros(),
        }
    }

    /// Information on the dimensionless couplings `g̃ᵢ = gᵢ/ω_m`: `Ĩ = ω_m²·I`.
    pub fn dimensionless(&self, omega_m: f64) -> QfimResult {
        let s = omega_m * omega_m;
        QfimResult {
            total: self.total * s,
            averages: self.averages * s,
            variances: self.variances * s,
        }
    }
}

fn symmetrize(m: Matrix2<f64>) -> Matrix2<f64> {
    (m + m.transpose()) * 0.5
}

/// Moore–Penrose pseudoinverse with singular values below
/// `PINV_RELATIVE_CUTOFF·σ_max` discarded.
pub fn pseudoinverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let cutoff = PINV_RELATIVE_CUTOFF * smax;
    let u = svd.u.as_ref().expect("svd with u");
    let vt = svd.v_t.as_ref().expect("svd with v_t");
    let mut out = DMatrix::zeros(m.ncols(), m.nrows());
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            out += vt.row(k).transpose() * u.column(k).transpose() / s;
        }
    }
    out
}

/// Kronecker representation of `X ↦ 4σXσ + WXW` on column-major `vec(X)`.
pub fn variances_superoperator(sigma: &DMatrix<f64>, w: &CommutatorMatrix) -> DMatrix<f64> {
    let ww = w.matrix().kronecker(w.matrix()).map(|z| z.re);
    sigma.kronecker(sigma) * 4.0 + ww
}

/// QFIM of a Gaussian family from its mean and covariance gradients.
///
/// `averages_ij = ∂ᵢRᵀ σ̄⁻¹ ∂ⱼR` (SPD solve) and
/// `variances_ij = 2·vec(∂ᵢσ̄)ᵀ (4σ̄⊗σ̄ + W⊗W)⁺ vec(∂ⱼσ̄)`.
pub fn qfim(
    d_r0: &[DVector<f64>; 2],
    sigma: &DMatrix<f64>,
    d_sigma: &[DMatrix<f64>; 2],
    w: &CommutatorMatrix,
) -> Result<QfimResult, EstimationError> {
    let n = sigma.nrows();
    if w.dim() != n
        || d_r0.iter().any(|d| d.len() != n)
        || d_sigma.iter().any(|d| d.nrows() != n || d.ncols() != n)
    {
        return Err(EstimationError::Dimension(format!(
            "covariance {n}x{n}, commutator {0}x{0}",
            w.dim()
        )));
    }
    let min_eig = gaussian::min_uncertainty_eigenvalue(sigma);
    if min_eig < -PHYSICALITY_TOL {
        return Err(EstimationError::NonPhysicalState(min_eig));
    }

    let chol = sigma
        .clone()
        .cholesky()
        .ok_or(EstimationError::NonPhysicalState(min_eig))?;
    let solved: Vec<DVector<f64>> = d_r0.iter().map(|d| chol.solve(d)).collect();
    let averages = Matrix2::from_fn(|i, j| d_r0[i].dot(&solved[j]));

    let pinv = pseudoinverse(&variances_superoperator(sigma, w));
    let vecs: Vec<DVector<f64>> = d_sigma
        .iter()
        .map(|d| DVector::from_column_slice(d.as_slice()))
        .collect();
    let applied: Vec<DVector<f64>> = vecs.iter().map(|v| &pinv * v).collect();
    let variances = Matrix2::from_fn(|i, j| 2.0 * vecs[i].dot(&applied[j]));

    let averages = symmetrize(averages);
    let variances = symmetrize(variances);
    Ok(QfimResult {
        total: averages + variances,
        averages,
        variances,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Quadrature {
    Q,
    P,
    #[serde(rename = "Xb")]
    Xb,
    #[serde(rename = "Pb")]
    Pb,
}

impl Quadrature {
    pub const ALL: [Quadrature; 4] = [Quadrature::Q, Quadrature::P, Quadrature::Xb, Quadrature::Pb];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Quadrature::Q => "Q",
            Quadrature::P => "P",
            Quadrature::Xb => "Xb",
            Quadrature::Pb => "Pb",
        }
    }
}

impl std::fmt::Display for Quadrature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Classical FI of homodyne detection of one quadrature, whose outcome is
/// Gaussian with mean `s₀` and variance `σ̄_kk`:
/// `J_ij = [2σ̄_kk ∂ᵢs₀ ∂ⱼs₀ + ∂ᵢσ̄_kk ∂ⱼσ̄_kk] / (2σ̄_kk²)`.
pub fn quadrature_fi(
    quadrature: Quadrature,
    sigma: &DMatrix<f64>,
    grads: &ParameterGradients,
) -> Result<Matrix2<f64>, EstimationError> {
    let k = quadrature.index();
    let var = sigma[(k, k)];
    if !(var > 0.0) {
        return Err(EstimationError::DegenerateVariance {
            quadrature,
            variance: var,
        });
    }
    let dm = [grads.op[0].r0[k], grads.op[1].r0[k]];
    let dv = [grads.d_sigma[0][(k, k)], grads.d_sigma[1][(k, k)]];
    Ok(Matrix2::from_fn(|i, j| {
        (2.0 * var * dm[i] * dm[j] + dv[i] * dv[j]) / (2.0 * var * var)
    }))
}

/// The four homodyne FIs, indexed like [`Quadrature::ALL`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FiResult {
    pub q: Matrix2<f64>,
    pub p: Matrix2<f64>,
    pub xb: Matrix2<f64>,
    pub pb: Matrix2<f64>,
}

impl FiResult {
    pub fn get(&self, q: Quadrature) -> &Matrix2<f64> {
        match q {
            Quadrature::Q => &self.q,
            Quadrature::P => &self.p,
            Quadrature::Xb => &self.xb,
            Quadrature::Pb => &self.pb,
        }
    }
}

pub fn all_quadrature_fi(
    sigma: &DMatrix<f64>,
    grads: &ParameterGradients,
) -> Result<FiResult, EstimationError> {
    Ok(FiResult {
        q: quadrature_fi(Quadrature::Q, sigma, grads)?,
        p: quadrature_fi(Quadrature::P, sigma, grads)?,
        xb: quadrature_fi(Quadrature::Xb, sigma, grads)?,
        pb: quadrature_fi(Quadrature::Pb, sigma, grads)?,
    })
}

/// QFIMs of the full state and of the light-only and mechanics-only states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocalQfim {
    pub global: QfimResult,
    pub light: QfimResult,
    pub mechanics: QfimResult,
}

fn reduced_qfim(
    state: &MomentState,
    grads: &ParameterGradients,
    mode: usize,
) -> Result<QfimResult, EstimationError> {
    let reduced = gaussian::reduce_state(state, &[mode])?;
    let idx = gaussian::quadrature_indices(&[mode]);
    let d_r0 = grads.d_r0().map(|d| DVector::from_fn(2, |i, _| d[idx[i]]));
    let d_sigma = grads
        .d_sigma
        .clone()
        .map(|d| DMatrix::from_fn(2, 2, |i, j| d[(idx[i], idx[j])]));
    qfim(
        &d_r0,
        &reduced.covariance,
        &d_sigma,
        &CommutatorMatrix::new(1),
    )
}

pub fn local_qfim_from(
    steady: &SteadyState,
    grads: &ParameterGradients,
) -> Result<LocalQfim, EstimationError> {
    Ok(LocalQfim {
        global: qfim(
            &grads.d_r0(),
            steady.covariance(),
            &grads.d_sigma,
            &CommutatorMatrix::new(2),
        )?,
        light: reduced_qfim(&steady.state, grads, 0)?,
        mechanics: reduced_qfim(&steady.state, grads, 1)?,
    })
}

pub fn local_qfim(params: &PhysicalParams) -> Result<LocalQfim, EstimationError> {
    let steady = model::steady_state(params)?;
    let grads = parameter_gradients(&steady)?;
    local_qfim_from(&steady, &grads)
}

/// Cramér–Rao bounds after `runs` repetitions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorBounds {
    /// `Δgᵢ/gᵢ = 1/(gᵢ·√(M·I_ii))`; `+∞` where `I_ii = 0`.
    pub relative: [f64; 2],
    /// `I⁻¹/M`, absent when `I` is singular.
    pub covariance: Option<Matrix2<f64>>,
}

impl ErrorBounds {
    pub fn covariance_bound(&self) -> Result<Matrix2<f64>, EstimationError> {
        self.covariance.ok_or(EstimationError::SingularInformation)
    }
}

pub fn error_bounds(info: &Matrix2<f64>, couplings: [f64; 2], runs: u32) -> ErrorBounds {
    let m = f64::from(runs);
    let relative = [0, 1].map(|i| 1.0 / (couplings[i].abs() * (m * info[(i, i)]).sqrt()));
    let sym = symmetrize(*info);
    let eig = sym.symmetric_eigenvalues();
    let (lo, hi) = (eig.min(), eig.max().abs());
    let covariance = if hi > 0.0 && lo > SINGULAR_INFORMATION_TOL * hi {
        sym.try_inverse().map(|inv| inv / m)
    } else {
        None
    };
    ErrorBounds {
        relative,
        covariance,
    }
}

/// Relative bounds for every information source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundsBySource {
    pub global: ErrorBounds,
    pub light: ErrorBounds,
    pub mechanics: ErrorBounds,
    pub q: ErrorBounds,
    pub p: ErrorBounds,
    pub xb: ErrorBounds,
    pub pb: ErrorBounds,
}

/// Full single-point estimation analysis.
#[derive(Debug, Clone, Serialize)]
pub struct EstimationReport {
    pub params: PhysicalParams,
    pub op_point: SteadyOperatingPoint,
    pub gaussianity_warning: bool,
    pub lyapunov_residual: f64,
    pub qfim: LocalQfim,
    /// Global QFIM on `g̃ᵢ = gᵢ/ω_m`.
    pub qfim_dimensionless: QfimResult,
    pub fi: FiResult,
    pub runs: u32,
    pub bounds: BoundsBySource,
}

pub fn estimate(params: &PhysicalParams, runs: u32) -> Result<EstimationReport, EstimationError> {
    let steady = model::steady_state(params)?;
    estimate_from(&steady, runs)
}

pub fn estimate_from(steady: &SteadyState, runs: u32) -> Result<EstimationReport, EstimationError> {
    let params = steady.params;
    let grads = parameter_gradients(steady)?;
    let qfim = local_qfim_from(steady, &grads)?;
    let fi = all_quadrature_fi(steady.covariance(), &grads)?;
    let g = [params.g1, params.effective_g2()];
    let b = |m: &Matrix2<f64>| error_bounds(m, g, runs);
    let bounds = BoundsBySource {
        global: b(&qfim.global.total),
        light: b(&qfim.light.total),
        mechanics: b(&qfim.mechanics.total),
        q: b(&fi.q),
        p: b(&fi.p),
        xb: b(&fi.xb),
        pb: b(&fi.pb),
    };
    Ok(EstimationReport {
        params,
        op_point: steady.op_point,
        gaussianity_warning: steady.gaussianity_warning,
        lyapunov_residual: steady.lyapunov_residual(),
        qfim_dimensionless: qfim.global.dimensionless(params.omega_m),
        qfim,
        fi,
        runs,
        bounds,
    })
}
