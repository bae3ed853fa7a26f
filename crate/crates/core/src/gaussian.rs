//! Gaussian-state machinery for `N` bosonic modes in quadrature ordering
//! `(X_1, P_1, ..., X_N, P_N)` with vacuum covariance `½·I`.
//!
//! Hamiltonian matrices are always passed as `H/ħ` (units of s⁻¹), so `ħ`
//! never appears in the arithmetic here.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

/// Relative bound on imaginary parts that are discarded when a complex
/// intermediate is truncated to a real matrix.
pub const IMAG_RESIDUE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GaussianError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("{what} has imaginary residue {residue:.3e} (relative), expected a real matrix")]
    ImaginaryResidue { what: &'static str, residue: f64 },
    #[error("Lyapunov system is singular (degenerate dynamics)")]
    SingularSystem,
    #[error("eigenvalue computation failed to converge")]
    Eigensolver,
    #[error("invalid mode subset: {0}")]
    ModeSubset(String),
}

/// Matrix of commutators `W_ij = [R_i, R_j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CommutatorMatrix(DMatrix<Complex64>);

impl CommutatorMatrix {
    /// Block-diagonal `2N×2N` matrix with blocks `[[0, i], [-i, 0]]`.
    ///
    /// Panics if `n_modes == 0`.
    pub fn new(n_modes: usize) -> Self {
        assert!(n_modes >= 1, "commutator matrix needs at least one mode");
        let dim = 2 * n_modes;
        let mut w = DMatrix::zeros(dim, dim);
        for k in 0..n_modes {
            w[(2 * k, 2 * k + 1)] = Complex64::i();
            w[(2 * k + 1, 2 * k)] = -Complex64::i();
        }
        CommutatorMatrix(w)
    }

    pub fn n_modes(&self) -> usize {
        self.0.nrows() / 2
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    /// The real symplectic form `Ω` with `W = i·Ω`.
    pub fn symplectic_form(&self) -> DMatrix<f64> {
        self.0.map(|z| z.im)
    }
}

/// `commutator_matrix(n)` as a free function, mirroring the other operations.
pub fn commutator_matrix(n_modes: usize) -> CommutatorMatrix {
    CommutatorMatrix::new(n_modes)
}

/// Damping matrix `γ` of a Lindblad dissipator together with its symmetric
/// and antisymmetric parts.
#[derive(Debug, Clone, PartialEq)]
pub struct DampingMatrix {
    pub gamma: DMatrix<Complex64>,
    pub gamma_s: DMatrix<Complex64>,
    pub gamma_a: DMatrix<Complex64>,
}

impl DampingMatrix {
    pub fn new(gamma: DMatrix<Complex64>) -> Result<Self, GaussianError> {
        let (gamma_s, gamma_a) = split_damping(&gamma)?;
        Ok(DampingMatrix {
            gamma,
            gamma_s,
            gamma_a,
        })
    }

    pub fn dim(&self) -> usize {
        self.gamma.nrows()
    }

    /// Smallest eigenvalue of `γ` viewed as a Hermitian matrix.
    pub fn min_hermitian_eigenvalue(&self) -> f64 {
        let herm = (&self.gamma + self.gamma.adjoint()).scale(0.5);
        herm.symmetric_eigenvalues().min()
    }
}

/// `γ_S = (γ + γᵀ)/2`, `γ_A = (γ − γᵀ)/2`.
pub fn split_damping(
    gamma: &DMatrix<Complex64>,
) -> Result<(DMatrix<Complex64>, DMatrix<Complex64>), GaussianError> {
    if !gamma.is_square() || !gamma.nrows().is_multiple_of(2) || gamma.nrows() == 0 {
        return Err(GaussianError::Dimension(format!(
            "damping matrix must be square with even dimension, got {}x{}",
            gamma.nrows(),
            gamma.ncols()
        )));
    }
    let gt = gamma.transpose();
    let sym = (gamma + &gt).scale(0.5);
    let anti = (gamma - &gt).scale(0.5);
    Ok((sym, anti))
}

/// Drift `B` and diffusion `C` of the moment equations, with the steady
/// covariance solving `Bᵀσ + σB = C`.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftDiffusion {
    pub drift: DMatrix<f64>,
    pub diffusion: DMatrix<f64>,
}

fn to_complex(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Truncates a complex matrix to its real part after checking that the
/// imaginary part is negligible relative to the matrix norm.
pub(crate) fn real_part_checked(
    m: &DMatrix<Complex64>,
    what: &'static str,
    tol: f64,
) -> Result<DMatrix<f64>, GaussianError> {
    let norm = m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let imag = m.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    let residue = if norm > 0.0 { imag / norm } else { imag };
    if residue > tol {
        return Err(GaussianError::ImaginaryResidue { what, residue });
    }
    Ok(m.map(|z| z.re))
}

fn check_square(m: &DMatrix<f64>, dim: usize, what: &str) -> Result<(), GaussianError> {
    if m.nrows() != dim || m.ncols() != dim {
        return Err(GaussianError::Dimension(format!(
            "{what} is {}x{}, expected {dim}x{dim}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// `B = i·H·W + γ_A·W` and `C = −W·γ_S·W`, with `h_freq = H/ħ`.
pub fn build_drift_diffusion(
    h_freq: &DMatrix<f64>,
    damping: &DampingMatrix,
) -> Result<DriftDiffusion, GaussianError> {
    let dim = damping.dim();
    check_square(h_freq, dim, "Hamiltonian matrix")?;
    let w = CommutatorMatrix::new(dim / 2);
    let w = w.matrix();
    let h = to_complex(h_freq);
    let b = &h * w * Complex64::i() + &damping.gamma_a * w;
    let c = -(w * &damping.gamma_s * w);
    let drift = real_part_checked(&b, "drift matrix", IMAG_RESIDUE_TOL)?;
    let c = real_part_checked(&c, "diffusion matrix", IMAG_RESIDUE_TOL)?;
    let diffusion = (&c + c.transpose()).scale(0.5);
    Ok(DriftDiffusion { drift, diffusion })
}

/// Kronecker-vectorized operator of `X ↦ BᵀX + XB` acting on column-major
/// `vec(X)`: `I⊗Bᵀ + Bᵀ⊗I`.
pub fn lyapunov_operator(b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = b.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let bt = b.transpose();
    eye.kronecker(&bt) + bt.kronecker(&eye)
}

/// Solves `Bᵀσ + σB = C` by full vectorization and symmetrizes the result.
pub fn solve_lyapunov(b: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>, GaussianError> {
    let n = b.nrows();
    check_square(b, n, "drift")?;
    check_square(c, n, "right-hand side")?;
    let op = lyapunov_operator(b);
    let rhs = DVector::from_column_slice(c.as_slice());
    let scale = op.amax();
    let lu = op.lu();
    let min_pivot = (0..n * n)
        .map(|i| lu.u()[(i, i)].abs())
        .fold(f64::INFINITY, f64::min);
    if !(min_pivot > 1e-14 * scale) {
        return Err(GaussianError::SingularSystem);
    }
    let x = lu.solve(&rhs).ok_or(GaussianError::SingularSystem)?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(GaussianError::SingularSystem);
    }
    let sigma = DMatrix::from_column_slice(n, n, x.as_slice());
    Ok((&sigma + sigma.transpose()).scale(0.5))
}

/// Frobenius residual `‖Bᵀσ + σB − C‖`.
pub fn lyapunov_residual(b: &DMatrix<f64>, sigma: &DMatrix<f64>, c: &DMatrix<f64>) -> f64 {
    (b.transpose() * sigma + sigma * b - c).norm()
}

/// Diagonal shifts, in units of the matrix norm, tried when the QR
/// iteration stalls.
const EIGEN_SHIFTS: [f64; 4] = [0.0, 0.137, -0.291, 0.613];

/// Eigenvalues of a general real square matrix.
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex64>, GaussianError> {
    if !m.is_square() {
        return Err(GaussianError::Dimension(
            "eigenvalues of a non-square matrix".into(),
        ));
    }
    let scale = m.norm().max(f64::MIN_POSITIVE);
    let n = m.nrows();
    for shift in EIGEN_SHIFTS {
        let c = shift * scale;
        let shifted = m + DMatrix::identity(n, n) * c;
        if let Some(schur) = nalgebra::Schur::try_new(shifted, f64::EPSILON, 10_000) {
            return Ok(schur.complex_eigenvalues().iter().map(|z| z - c).collect());
        }
    }
    Err(GaussianError::Eigensolver)
}

/// Largest real part over the spectrum of `B`.
pub fn spectral_abscissa(b: &DMatrix<f64>) -> Result<f64, GaussianError> {
    Ok(eigenvalues(b)?
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Hurwitz test: every eigenvalue of `B` has strictly negative real part.
pub fn is_stable(b: &DMatrix<f64>) -> Result<bool, GaussianError> {
    Ok(spectral_abscissa(b)? < 0.0)
}

/// First and second moments of a Gaussian state.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentState {
    pub first_moments: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub mode_labels: Vec<String>,
}

impl MomentState {
    pub fn new(
        first_moments: DVector<f64>,
        covariance: DMatrix<f64>,
        mode_labels: Vec<String>,
    ) -> Result<Self, GaussianError> {
        let dim = 2 * mode_labels.len();
        if dim == 0 || first_moments.len() != dim {
            return Err(GaussianError::Dimension(format!(
                "{} modes need {dim} first moments, got {}",
                mode_labels.len(),
                first_moments.len()
            )));
        }
        check_square(&covariance, dim, "covariance")?;
        Ok(MomentState {
            first_moments,
            covariance,
            mode_labels,
        })
    }

    pub fn n_modes(&self) -> usize {
        self.mode_labels.len()
    }

    /// Vacuum (`σ = ½·I`, zero mean) for the given modes.
    pub fn vacuum(mode_labels: Vec<String>) -> Self {
        let dim = 2 * mode_labels.len();
        MomentState {
            first_moments: DVector::zeros(dim),
            covariance: DMatrix::identity(dim, dim).scale(0.5),
            mode_labels,
        }
    }
}

/// Minimum eigenvalue of the Hermitian matrix `2σ + W`.
pub fn min_uncertainty_eigenvalue(covariance: &DMatrix<f64>) -> f64 {
    let w = CommutatorMatrix::new(covariance.nrows() / 2);
    let m = to_complex(&covariance.scale(2.0)) + w.matrix();
    let herm = (&m + m.adjoint()).scale(0.5);
    herm.symmetric_eigenvalues().min()
}

/// Robertson–Schrödinger check `2σ + W ⪰ −tol`.
pub fn check_physical(state: &MomentState, tol: f64) -> bool {
    min_uncertainty_eigenvalue(&state.covariance) >= -tol
}

/// Symplectic eigenvalues `ν_k ≥ ½` of a covariance matrix, ascending.
pub fn symplectic_eigenvalues(covariance: &DMatrix<f64>) -> Result<Vec<f64>, GaussianError> {
    let omega = CommutatorMatrix::new(covariance.nrows() / 2).symplectic_form();
    let mut nu: Vec<f64> = eigenvalues(&(omega * covariance))?
        .iter()
        .filter(|z| z.im > 0.0)
        .map(|z| z.im)
        .collect();
    nu.sort_by(|a, b| a.total_cmp(b));
    Ok(nu)
}

/// Instantaneous `(dR₀/dt, dσ/dt)` of the homogeneous moment equations:
/// `Ṙ₀ = (−i·W·H + W·γ_A)R₀` and `σ̇ = Bᵀσ + σB − C`.
pub fn moment_time_derivatives(
    state: &MomentState,
    h_freq: &DMatrix<f64>,
    damping: &DampingMatrix,
) -> Result<(DVector<f64>, DMatrix<f64>), GaussianError> {
    let dim = state.first_moments.len();
    if damping.dim() != dim {
        return Err(GaussianError::Dimension(format!(
            "damping is {0}x{0}, state has dimension {dim}",
            damping.dim()
        )));
    }
    check_square(h_freq, dim, "Hamiltonian matrix")?;
    let w = CommutatorMatrix::new(dim / 2);
    let w = w.matrix();
    let h = to_complex(h_freq);
    let mean_generator = w * &h * (-Complex64::i()) + w * &damping.gamma_a;
    let mean_generator =
        real_part_checked(&mean_generator, "first-moment generator", IMAG_RESIDUE_TOL)?;
    let dr = mean_generator * &state.first_moments;

    let dd = build_drift_diffusion(h_freq, damping)?;
    let s = &state.covariance;
    let dsigma = dd.drift.transpose() * s + s * &dd.drift - &dd.diffusion;
    Ok((dr, dsigma))
}

/// Reduced state of a mode subset: sub-vector of means and principal
/// sub-block of the covariance, in the order the modes are listed.
pub fn reduce_state(state: &MomentState, modes: &[usize]) -> Result<MomentState, GaussianError> {
    if modes.is_empty() {
        return Err(GaussianError::ModeSubset("empty subset".into()));
    }
    let n = state.n_modes();
    let mut seen = vec![false; n];
    for &m in modes {
        if m >= n {
            return Err(GaussianError::ModeSubset(format!(
                "mode index {m} out of range for {n} modes"
            )));
        }
        if seen[m] {
            return Err(GaussianError::ModeSubset(format!(
                "mode index {m} repeated"
            )));
        }
        seen[m] = true;
    }
    let idx = quadrature_indices(modes);
    let k = idx.len();
    let first = DVector::from_fn(k, |i, _| state.first_moments[idx[i]]);
    let cov = DMatrix::from_fn(k, k, |i, j| state.covariance[(idx[i], idx[j])]);
    let labels = modes
        .iter()
        .map(|&m| state.mode_labels[m].clone())
        .collect();
    Ok(MomentState {
        first_moments: first,
        covariance: cov,
        mode_labels: labels,
    })
}

/// Quadrature indices `(2m, 2m+1)` for each listed mode.
pub fn quadrature_indices(modes: &[usize]) -> Vec<usize> {
    modes.iter().flat_map(|&m| [2 * m, 2 * m + 1]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn cavity_damping(kappa: f64) -> DampingMatrix {
        let g = DMatrix::from_row_slice(
            2,
            2,
            &[
                c(kappa / 2.0, 0.0),
                c(0.0, -kappa / 2.0),
                c(0.0, kappa / 2.0),
                c(kappa / 2.0, 0.0),
            ],
        );
        DampingMatrix::new(g).unwrap()
    }

    fn mechanics_damping(gamma_m: f64, nbar: f64) -> DampingMatrix {
        let d = gamma_m * (2.0 * nbar + 1.0) / 2.0;
        let g = DMatrix::from_row_slice(
            2,
            2,
            &[
                c(d, 0.0),
                c(0.0, -gamma_m / 2.0),
                c(0.0, gamma_m / 2.0),
                c(d, 0.0),
            ],
        );
        DampingMatrix::new(g).unwrap()
    }

    #[test]
    fn commutator_single_mode() {
        let w = commutator_matrix(1);
        let m = w.matrix();
        assert_eq!(m[(0, 1)], c(0.0, 1.0));
        assert_eq!(m[(1, 0)], c(0.0, -1.0));
        assert_eq!(m[(0, 0)], c(0.0, 0.0));
        assert_eq!(m[(1, 1)], c(0.0, 0.0));
    }

    #[test]
    fn commutator_two_modes_matches_block_form() {
        let w = commutator_matrix(2);
        let i = Complex64::i();
        let z = c(0.0, 0.0);
        let expected =
            DMatrix::from_row_slice(4, 4, &[z, i, z, z, -i, z, z, z, z, z, z, i, z, z, -i, z]);
        assert_eq!(w.matrix(), &expected);
    }

    #[test]
    fn commutator_algebraic_identities() {
        for n in 1..=4 {
            let w = commutator_matrix(n);
            let m = w.matrix();
            assert_eq!(m.transpose(), -m.clone());
            assert_eq!(m.adjoint(), m.clone());
            assert_eq!(m * m, DMatrix::identity(2 * n, 2 * n));
        }
    }

    #[test]
    fn split_damping_reads_off_parts() {
        let kappa = 1e5;
        let gm = 32.0;
        let nbar = 3.0;
        let mut g = DMatrix::zeros(4, 4);
        g.view_mut((0, 0), (2, 2))
            .copy_from(&cavity_damping(kappa).gamma);
        g.view_mut((2, 2), (2, 2))
            .copy_from(&mechanics_damping(gm, nbar).gamma);
        let (s, a) = split_damping(&g).unwrap();
        let d = gm * (2.0 * nbar + 1.0) / 2.0;
        let expected_s = DMatrix::from_diagonal(&DVector::from_vec(vec![
            c(kappa / 2.0, 0.0),
            c(kappa / 2.0, 0.0),
            c(d, 0.0),
            c(d, 0.0),
        ]));
        assert_eq!(s, expected_s);
        let mut expected_a = DMatrix::zeros(4, 4);
        expected_a[(0, 1)] = c(0.0, -kappa / 2.0);
        expected_a[(1, 0)] = c(0.0, kappa / 2.0);
        expected_a[(2, 3)] = c(0.0, -gm / 2.0);
        expected_a[(3, 2)] = c(0.0, gm / 2.0);
        assert_eq!(a, expected_a);
        assert_eq!(&s + &a, g);
    }

    #[test]
    fn split_damping_symmetric_input_has_no_antisymmetric_part() {
        let g =
            DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(2.0, 0.5), c(2.0, 0.5), c(3.0, 0.0)]);
        let (s, a) = split_damping(&g).unwrap();
        assert_eq!(s, g);
        assert!(a.iter().all(|z| *z == c(0.0, 0.0)));
    }

    #[test]
    fn split_damping_rejects_bad_dimensions() {
        assert!(split_damping(&DMatrix::zeros(3, 3)).is_err());
        assert!(split_damping(&DMatrix::zeros(2, 4)).is_err());
    }

    #[test]
    fn drift_of_decoupled_cavity() {
        let kappa = 1e5;
        let delta = 1.1e7;
        let h = DMatrix::identity(2, 2).scale(delta);
        let dd = build_drift_diffusion(&h, &cavity_damping(kappa)).unwrap();
        // direct complex product i·H·W + γ_A·W
        let expected_b =
            DMatrix::from_row_slice(2, 2, &[-kappa / 2.0, -delta, delta, -kappa / 2.0]);
        assert_eq!(dd.drift, expected_b);
        assert_eq!(dd.diffusion, DMatrix::identity(2, 2).scale(-kappa / 2.0));
    }

    #[test]
    fn drift_of_mechanics_block() {
        let gm = 32.0;
        let nbar = 951.648;
        let wm = 1.1e7;
        let h = DMatrix::identity(2, 2).scale(wm);
        let dd = build_drift_diffusion(&h, &mechanics_damping(gm, nbar)).unwrap();
        let expected_c = DMatrix::identity(2, 2).scale(-gm * (2.0 * nbar + 1.0) / 2.0);
        assert_relative_eq!(dd.diffusion, expected_c, max_relative = 1e-15);
        assert_relative_eq!(dd.drift[(0, 0)], -gm / 2.0);
        assert_relative_eq!(dd.drift[(0, 1)], -wm);
        assert_relative_eq!(dd.drift[(1, 0)], wm);
    }

    #[test]
    fn zero_inputs_give_zero_drift() {
        let dmp = DampingMatrix::new(DMatrix::zeros(4, 4)).unwrap();
        let dd = build_drift_diffusion(&DMatrix::zeros(4, 4), &dmp).unwrap();
        assert!(dd.drift.iter().all(|&x| x == 0.0));
        assert!(dd.diffusion.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn imaginary_residue_is_reported() {
        // a non-Hermitian γ with a real antisymmetric part leaves imaginary drift
        let g =
            DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0), c(1.0, 0.0)]);
        let dmp = DampingMatrix::new(g).unwrap();
        let err = build_drift_diffusion(&DMatrix::zeros(2, 2), &dmp).unwrap_err();
        assert!(matches!(err, GaussianError::ImaginaryResidue { .. }));
    }

    #[test]
    fn lyapunov_vacuum_cavity() {
        let kappa = 1e5;
        let dd = build_drift_diffusion(&DMatrix::zeros(2, 2), &cavity_damping(kappa)).unwrap();
        assert_eq!(dd.drift, DMatrix::identity(2, 2).scale(-kappa / 2.0));
        let s = solve_lyapunov(&dd.drift, &dd.diffusion).unwrap();
        assert_relative_eq!(s, DMatrix::identity(2, 2).scale(0.5), max_relative = 1e-14);
    }

    #[test]
    fn lyapunov_thermal_mechanics() {
        let nbar = 11.4;
        let dd = build_drift_diffusion(
            &DMatrix::identity(2, 2).scale(1.1e7),
            &mechanics_damping(32.0, nbar),
        )
        .unwrap();
        let s = solve_lyapunov(&dd.drift, &dd.diffusion).unwrap();
        assert_relative_eq!(
            s,
            DMatrix::identity(2, 2).scale(nbar + 0.5),
            max_relative = 1e-10
        );
        assert!(
            lyapunov_residual(&dd.drift, &s, &dd.diffusion) <= 1e-10 * dd.diffusion.norm().max(1.0)
        );
    }

    #[test]
    fn lyapunov_singular_system() {
        // Bᵀσ + σB is not invertible when B has eigenvalues λ and −λ
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let err = solve_lyapunov(&b, &DMatrix::identity(2, 2)).unwrap_err();
        assert_eq!(err, GaussianError::SingularSystem);
    }

    #[test]
    fn stability_examples() {
        assert!(is_stable(&DMatrix::identity(3, 3).scale(-1.0)).unwrap());
        let rot = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!(!is_stable(&rot).unwrap());
        assert!(!is_stable(&DMatrix::identity(2, 2)).unwrap());
    }

    #[test]
    fn physicality_examples() {
        let vac = MomentState::vacuum(vec!["a".into()]);
        assert!(check_physical(&vac, 0.0));
        assert!(min_uncertainty_eigenvalue(&vac.covariance).abs() < 1e-15);
        let squeezed_below = MomentState::new(
            DVector::zeros(2),
            DMatrix::identity(2, 2).scale(0.4),
            vec!["a".into()],
        )
        .unwrap();
        assert!(!check_physical(&squeezed_below, 1e-9));
        // a squeezed vacuum is still pure and physical
        let r: f64 = 0.7;
        let sq = MomentState::new(
            DVector::zeros(2),
            DMatrix::from_diagonal(&DVector::from_vec(vec![
                0.5 * (2.0 * r).exp(),
                0.5 * (-2.0 * r).exp(),
            ])),
            vec!["a".into()],
        )
        .unwrap();
        assert!(check_physical(&sq, 1e-12));
    }

    #[test]
    fn symplectic_eigenvalues_of_thermal_state() {
        let s = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 0.5, 3.5, 3.5]));
        let nu = symplectic_eigenvalues(&s).unwrap();
        assert_relative_eq!(nu[0], 0.5, max_relative = 1e-12);
        assert_relative_eq!(nu[1], 3.5, max_relative = 1e-12);
    }

    #[test]
    fn derivatives_vanish_at_steady_state() {
        let h = DMatrix::from_row_slice(
            4,
            4,
            &[
                2.0, 0.0, 0.3, 0.0, 0.0, 2.0, 0.1, 0.0, 0.3, 0.1, 1.5, 0.0, 0.0, 0.0, 0.0, 1.2,
            ],
        );
        let mut g = DMatrix::zeros(4, 4);
        g.view_mut((0, 0), (2, 2))
            .copy_from(&cavity_damping(0.8).gamma);
        g.view_mut((2, 2), (2, 2))
            .copy_from(&mechanics_damping(0.05, 2.0).gamma);
        let dmp = DampingMatrix::new(g).unwrap();
        let dd = build_drift_diffusion(&h, &dmp).unwrap();
        assert!(is_stable(&dd.drift).unwrap());
        let sigma = solve_lyapunov(&dd.drift, &dd.diffusion).unwrap();
        let labels = vec!["light".to_string(), "mechanics".to_string()];
        let st = MomentState::new(DVector::zeros(4), sigma.clone(), labels.clone()).unwrap();
        let (dr, ds) = moment_time_derivatives(&st, &h, &dmp).unwrap();
        assert!(dr.iter().all(|&x| x == 0.0));
        assert!(ds.norm() <= 1e-9 * sigma.norm());
        assert!(check_physical(&st, 1e-9));

        // linear response to σ + εI
        let eps = 1e-3;
        let pert = MomentState::new(
            DVector::zeros(4),
            &sigma + DMatrix::identity(4, 4).scale(eps),
            labels,
        )
        .unwrap();
        let (_, ds) = moment_time_derivatives(&pert, &h, &dmp).unwrap();
        let e = DMatrix::identity(4, 4).scale(eps);
        let expected = dd.drift.transpose() * &e + &e * &dd.drift;
        assert!((ds - &expected).norm() <= 1e-9 * expected.norm());
    }

    #[test]
    fn mean_generator_matches_drift_transpose() {
        let h = DMatrix::identity(2, 2).scale(3.0);
        let dmp = cavity_damping(0.4);
        let st = MomentState::new(
            DVector::from_vec(vec![1.0, -2.0]),
            DMatrix::identity(2, 2).scale(0.5),
            vec!["a".into()],
        )
        .unwrap();
        let (dr, _) = moment_time_derivatives(&st, &h, &dmp).unwrap();
        let dd = build_drift_diffusion(&h, &dmp).unwrap();
        let expected = dd.drift.transpose() * &st.first_moments;
        assert_relative_eq!(dr, expected, max_relative = 1e-14);
    }

    #[test]
    fn reduce_state_selects_blocks() {
        let nbar = 4.0;
        let st = MomentState::new(
            DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]),
            DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 0.5, nbar + 0.5, nbar + 0.5])),
            vec!["light".into(), "mechanics".into()],
        )
        .unwrap();
        let full = reduce_state(&st, &[0, 1]).unwrap();
        assert_eq!(full, st);
        let mech = reduce_state(&st, &[1]).unwrap();
        assert_eq!(mech.first_moments.as_slice(), &[3.0, 4.0]);
        assert_eq!(mech.covariance, DMatrix::identity(2, 2).scale(nbar + 0.5));
        assert_eq!(mech.mode_labels, vec!["mechanics".to_string()]);
        assert!(reduce_state(&st, &[]).is_err());
        assert!(reduce_state(&st, &[2]).is_err());
        assert!(reduce_state(&st, &[0, 0]).is_err());
    }
}
