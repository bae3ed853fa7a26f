//! Independent cross-checks for the estimation pipeline.
//!
//! Nothing here is used to compute results. The functions only re-derive
//! quantities by other routes: Gaussian-state fidelity, QFI from the
//! fidelity between neighbouring steady states, and finite differences of
//! the full steady-state pipeline.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use optoqfi::estimation::{self, QfimResult};
use optoqfi::gaussian::{self, CommutatorMatrix};
use optoqfi::model::{self, ModelError, PhysicalParams};
use thiserror::Error;

/// States whose smallest symplectic eigenvalue exceeds ½ by less than this
/// are too close to pure for the fidelity expansion to be resolved.
pub const MIN_SYMPLECTIC_EXCESS: f64 = 1e-7;
/// Targets for `1 − F` tried when choosing the fidelity step.
pub const FIDELITY_TARGETS: [f64; 7] = [1e-4, 3e-5, 1e-5, 3e-6, 1e-6, 3e-7, 1e-7];
/// Decades the pilot step may grow by before the fidelity is declared unresolved.
pub const PILOT_DECADES: usize = 14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Estimation(#[from] estimation::EstimationError),
    #[error("fidelity evaluation failed: {0}")]
    Fidelity(String),
    #[error("state too close to pure (symplectic excess {0:e})")]
    NearlyPure(f64),
    #[error("no step resolves the fidelity")]
    Unresolved,
}

/// Root fidelity `√F` convention: `F(ρ, ρ) = 1`, vacuum covariance `½·I`.
///
/// Uses the auxiliary-matrix formula for Gaussian states:
/// `V_aux = Ωᵀ(V₁+V₂)⁻¹(Ω/4 + V₂ΩV₁)`,
/// `F_tot⁴ = 2^{2n}·det(V_aux)·Π_k(√(1 + λ_k) + 1)` with `λ_k` the eigenvalues
/// of `((V_aux Ω)⁻¹)²/4`, and
/// `F = F_tot·det(V₁+V₂)^{-1/4}·exp(−¼ δᵀ(V₁+V₂)⁻¹δ)`.
pub fn gaussian_fidelity(
    mu1: &DVector<f64>,
    v1: &DMatrix<f64>,
    mu2: &DVector<f64>,
    v2: &DMatrix<f64>,
) -> Result<f64, OracleError> {
    let dim = v1.nrows();
    let n = dim / 2;
    let omega = CommutatorMatrix::new(n).symplectic_form();
    let sum = v1 + v2;
    let sum_inv = sum
        .clone()
        .try_inverse()
        .ok_or_else(|| OracleError::Fidelity("V1 + V2 is singular".into()))?;
    let v_aux = omega.transpose() * &sum_inv * (&omega / 4.0 + v2 * &omega * v1);
    let m = (&v_aux * &omega)
        .try_inverse()
        .ok_or_else(|| OracleError::Fidelity("V_aux Ω is singular".into()))?;
    let a = &m * &m / 4.0;
    let lambdas = gaussian::eigenvalues(&a).map_err(|e| OracleError::Fidelity(e.to_string()))?;
    let prod = lambdas.iter().fold(Complex64::new(1.0, 0.0), |acc, l| {
        acc * ((Complex64::new(1.0, 0.0) + l).sqrt() + 1.0)
    });
    let f_tot4 = prod * v_aux.determinant() * 4f64.powi(n as i32);
    let f_tot = f_tot4.re.powf(0.25);
    let d = mu2 - mu1;
    let quad = d.dot(&(&sum_inv * &d));
    Ok(f_tot / sum.determinant().powf(0.25) * (-0.25 * quad).exp())
}

/// `ν_min − ½` for a covariance matrix.
pub fn symplectic_excess(covariance: &DMatrix<f64>) -> f64 {
    gaussian::symplectic_eigenvalues(covariance)
        .ok()
        .and_then(|nu| nu.first().copied())
        .map_or(f64::NAN, |nu| nu - 0.5)
}

fn with_coupling(params: &PhysicalParams, index: usize, value: f64) -> PhysicalParams {
    let mut p = *params;
    if index == 0 {
        p.g1 = value;
    } else {
        p.g2 = value;
    }
    p
}

fn coupling(params: &PhysicalParams, index: usize) -> f64 {
    if index == 0 {
        params.g1
    } else {
        params.g2
    }
}

fn moments(params: &PhysicalParams) -> Result<(DVector<f64>, DMatrix<f64>), OracleError> {
    let s = model::steady_state(params)?;
    Ok((s.state.first_moments.clone(), s.state.covariance.clone()))
}

/// `1 − F(ρ(g − ε), ρ(g + ε))` for coupling `index`.
pub fn infidelity(params: &PhysicalParams, index: usize, eps: f64) -> Result<f64, OracleError> {
    let g = coupling(params, index);
    let (m1, v1) = moments(&with_coupling(params, index, g - eps))?;
    let (m2, v2) = moments(&with_coupling(params, index, g + eps))?;
    Ok(1.0 - gaussian_fidelity(&m1, &v1, &m2, &v2)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FidelityQfi {
    pub value: f64,
    /// Half-separation of the chosen state pair.
    pub epsilon: f64,
    /// Relative difference between the two adjacent ladder estimates kept.
    pub spread: f64,
}

/// QFI for one coupling from `I ≈ 8(1 − F)/(2ε)²`.
///
/// A pilot step sizes `ε` so that `1 − F` walks down
/// [`FIDELITY_TARGETS`]; the estimate is the mean of the adjacent pair of
/// ladder values that agree best.
pub fn fidelity_qfi(params: &PhysicalParams, index: usize) -> Result<FidelityQfi, OracleError> {
    let (_, cov) = moments(params)?;
    let excess = symplectic_excess(&cov);
    if !(excess >= MIN_SYMPLECTIC_EXCESS) {
        return Err(OracleError::NearlyPure(excess));
    }
    let g = coupling(params, index);
    let base = g.abs().max(params.gamma_m * 1e-6);
    let qfi_at = |eps: f64| -> Result<f64, OracleError> {
        Ok(8.0 * infidelity(params, index, eps)? / (2.0 * eps).powi(2))
    };

    let mut eps = 1e-4 * base;
    let mut pilot = None;
    for _ in 0..PILOT_DECADES {
        let inf = infidelity(params, index, eps)?;
        if inf > 1e-9 {
            pilot = Some(8.0 * inf / (2.0 * eps).powi(2));
            break;
        }
        eps *= 10.0;
    }
    let pilot = pilot.ok_or(OracleError::Unresolved)?;

    let mut ladder = Vec::with_capacity(FIDELITY_TARGETS.len());
    for target in FIDELITY_TARGETS {
        let eps = (8.0 * target / pilot).sqrt() / 2.0;
        ladder.push((eps, qfi_at(eps)?));
    }
    let (k, spread) = ladder
        .windows(2)
        .map(|w| (w[0].1 - w[1].1).abs() / w[0].1.abs().max(w[1].1.abs()))
        .enumerate()
        .filter(|(_, s)| s.is_finite())
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or(OracleError::Unresolved)?;
    Ok(FidelityQfi {
        value: 0.5 * (ladder[k].1 + ladder[k + 1].1),
        epsilon: ladder[k + 1].0,
        spread,
    })
}

/// Multiple of `ε·|y|/h` taken as the round-off floor of a Richardson
/// central difference.
pub const ROUNDOFF_FACTOR: f64 = 16.0;

/// Central-difference gradients of `(R₀, σ̄)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FdGradients {
    pub d_r0: [DVector<f64>; 2],
    pub d_sigma: [DMatrix<f64>; 2],
    /// Round-off floor of each entry, `ROUNDOFF_FACTOR·ε·|y|/h`.
    pub r0_noise: [DVector<f64>; 2],
    pub sigma_noise: [DMatrix<f64>; 2],
    /// Largest relative change between the `h` and `h/2` estimates.
    pub richardson_change: f64,
}

/// Finite differences in the couplings measured in units of `unit`
/// (`unit = 1` for `gᵢ`, `unit = ω_m` for `g̃ᵢ = gᵢ/ω_m`).
///
/// Step `h = 10⁻⁶·max(|gᵢ|, Γ_m)` in physical units, Richardson-combined
/// with `h/2`. For the linear variant the `g₂` derivative is zero.
pub fn fd_gradients(params: &PhysicalParams, unit: f64) -> Result<FdGradients, OracleError> {
    fd_gradients_with_step(params, unit, FD_RELATIVE_STEP)
}

/// Default relative finite-difference step.
pub const FD_RELATIVE_STEP: f64 = 1e-6;
/// Relative step for differences that feed a QFIM.
pub const QFIM_RELATIVE_STEP: f64 = 1e-4;

/// [`fd_gradients`] with `h = rel_step·max(|gᵢ|, Γ_m)`.
pub fn fd_gradients_with_step(
    params: &PhysicalParams,
    unit: f64,
    rel_step: f64,
) -> Result<FdGradients, OracleError> {
    let mut d_r0 = [DVector::zeros(4), DVector::zeros(4)];
    let mut d_sigma = [DMatrix::zeros(4, 4), DMatrix::zeros(4, 4)];
    let mut r0_noise = [DVector::zeros(4), DVector::zeros(4)];
    let mut sigma_noise = [DMatrix::zeros(4, 4), DMatrix::zeros(4, 4)];
    let (m0, v0) = moments(params)?;
    let mut change: f64 = 0.0;
    let indices: &[usize] = match params.variant {
        model::ModelVariant::Quadratic => &[0, 1],
        model::ModelVariant::Linear => &[0],
    };
    for &i in indices {
        let g = coupling(params, i);
        let h = rel_step * g.abs().max(params.gamma_m);
        let central = |h: f64| -> Result<(DVector<f64>, DMatrix<f64>), OracleError> {
            let (mp, vp) = moments(&with_coupling(params, i, g + h))?;
            let (mm, vm) = moments(&with_coupling(params, i, g - h))?;
            let s = unit / (2.0 * h);
            Ok(((mp - mm) * s, (vp - vm) * s))
        };
        let (r1, s1) = central(h)?;
        let (r2, s2) = central(h / 2.0)?;
        let rel = |a: &[f64], b: &[f64]| {
            let scale = b.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let diff = a
                .iter()
                .zip(b)
                .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
            if scale > 0.0 {
                diff / scale
            } else {
                diff
            }
        };
        change = change
            .max(rel(r1.as_slice(), r2.as_slice()))
            .max(rel(s1.as_slice(), s2.as_slice()));
        d_r0[i] = (&r2 * 4.0 - r1) / 3.0;
        d_sigma[i] = (&s2 * 4.0 - s1) / 3.0;
        let floor = ROUNDOFF_FACTOR * f64::EPSILON * unit / h;
        r0_noise[i] = m0.map(|y| y.abs() * floor);
        sigma_noise[i] = v0.map(|y| y.abs() * floor);
    }
    Ok(FdGradients {
        d_r0,
        d_sigma,
        r0_noise,
        sigma_noise,
        richardson_change: change,
    })
}

/// Largest deviation of `analytic` from `reference`, relative to the
/// largest magnitude in `reference` (0 when both vanish).
pub fn max_relative_deviation(analytic: &[f64], reference: &[f64]) -> f64 {
    let scale = reference.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let diff = analytic
        .iter()
        .zip(reference)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

/// Outcome of comparing analytic gradients with finite differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheck {
    /// Largest `max(0, |a − f| − noise)/scale` over every entry, with `scale`
    /// the largest magnitude of the finite-difference object (`∂R₀` or `∂σ̄`).
    pub deviation: f64,
    /// Same without subtracting the round-off floor.
    pub raw_deviation: f64,
    /// Entries whose round-off floor exceeds `tol·scale`, i.e. where finite
    /// differences cannot resolve the gradient to the requested tolerance.
    pub unresolved: usize,
}

fn compare(a: &[f64], f: &[f64], noise: &[f64], tol: f64, out: &mut GradientCheck) {
    let scale = f.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let scale = if scale > 0.0 { scale } else { 1.0 };
    for ((x, y), n) in a.iter().zip(f).zip(noise) {
        let d = (x - y).abs();
        out.raw_deviation = out.raw_deviation.max(d / scale);
        out.deviation = out.deviation.max((d - n).max(0.0) / scale);
        if *n > tol * scale {
            out.unresolved += 1;
        }
    }
}

/// Analytic `∂R₀`, `∂σ̄` against Richardson central differences for both
/// couplings, allowing each entry its round-off floor.
pub fn gradient_check(params: &PhysicalParams, tol: f64) -> Result<GradientCheck, OracleError> {
    let steady = model::steady_state(params)?;
    let analytic = estimation::parameter_gradients(&steady)?;
    let fd = fd_gradients(params, 1.0)?;
    let a_r0 = analytic.d_r0();
    let mut out = GradientCheck {
        deviation: 0.0,
        raw_deviation: 0.0,
        unresolved: 0,
    };
    for i in 0..2 {
        compare(
            a_r0[i].as_slice(),
            fd.d_r0[i].as_slice(),
            fd.r0_noise[i].as_slice(),
            tol,
            &mut out,
        );
        compare(
            analytic.d_sigma[i].as_slice(),
            fd.d_sigma[i].as_slice(),
            fd.sigma_noise[i].as_slice(),
            tol,
            &mut out,
        );
    }
    Ok(out)
}

/// QFIM on the dimensionless couplings, built from finite differences taken
/// in `g̃ᵢ` directly.
pub fn dimensionless_qfim_by_differences(
    params: &PhysicalParams,
) -> Result<QfimResult, OracleError> {
    let steady = model::steady_state(params)?;
    let fd = fd_gradients_with_step(params, params.omega_m, QFIM_RELATIVE_STEP)?;
    Ok(estimation::qfim(
        &fd.d_r0,
        steady.covariance(),
        &fd.d_sigma,
        &CommutatorMatrix::new(2),
    )?)
}
