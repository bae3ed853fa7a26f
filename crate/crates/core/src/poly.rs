//! Real polynomials and their real roots via companion-matrix eigenvalues.

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

/// Roots with `|Im z| < REAL_ROOT_IMAG_TOL·(1 + |z|)` are treated as real.
pub const REAL_ROOT_IMAG_TOL: f64 = 1e-6;
/// Real roots closer than `ROOT_MERGE_TOL·max(1, |x|)` are merged.
pub const ROOT_MERGE_TOL: f64 = 1e-7;

/// Polynomial with real coefficients in ascending order of degree.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    /// Trailing exact zeros (vanishing leading coefficients) are dropped.
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Polynomial { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Polynomial {
        if self.coeffs.len() <= 1 {
            return Polynomial::new(vec![0.0]);
        }
        Polynomial::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| k as f64 * c)
                .collect(),
        )
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(other.coeffs.len());
        Polynomial::new(
            (0..n)
                .map(|k| self.coeffs.get(k).unwrap_or(&0.0) + other.coeffs.get(k).unwrap_or(&0.0))
                .collect(),
        )
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Polynomial::new(out)
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        Polynomial::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    /// Coefficients of `q(y) = p(y + c)`.
    pub fn shifted(&self, c: f64) -> Polynomial {
        let mut a = self.coeffs.clone();
        let n = a.len();
        for k in 0..n {
            for j in (k..n - 1).rev() {
                a[j] += c * a[j + 1];
            }
        }
        Polynomial::new(a)
    }

    /// All complex roots as eigenvalues of the companion matrix.
    ///
    /// The variable is rescaled as `x = s·y` with `s` the geometric mean of
    /// the root magnitudes (`|c₀/cₙ|^{1/n}`) so the companion entries stay
    /// balanced when coefficients span many decades. Spectra symmetric about
    /// the origin can stall the QR iteration; those are retried on a shifted
    /// variable.
    pub fn complex_roots(&self) -> Result<Vec<Complex64>, RootFindingError> {
        let n = self.degree();
        if n == 0 {
            return Ok(Vec::new());
        }
        let zeros = self.coeffs.iter().take_while(|&&c| c == 0.0).count();
        let mut roots = vec![Complex64::new(0.0, 0.0); zeros];
        let reduced = Polynomial::new(self.coeffs[zeros..].to_vec());
        if reduced.degree() == 0 {
            return Ok(roots);
        }
        let s = scale_of(&reduced.coeffs);
        for shift in [0.0, 0.137, -0.291, 0.613] {
            let p = if shift == 0.0 {
                reduced.clone()
            } else {
                reduced.shifted(shift * s)
            };
            let s_p = scale_of(&p.coeffs);
            if let Some(ev) = companion_eigenvalues(&p.coeffs, s_p) {
                roots.extend(ev.iter().map(|z| z * s_p + shift * s));
                return Ok(roots);
            }
        }
        Err(RootFindingError)
    }

    /// Real roots, filtered from [`complex_roots`](Self::complex_roots), Newton
    /// polished on `self` and deduplicated; ascending.
    pub fn real_roots(&self) -> Result<Vec<f64>, RootFindingError> {
        self.real_roots_with(|x| (self.eval(x), self.derivative().eval(x)))
    }

    /// Like [`real_roots`](Self::real_roots) but polishes each candidate with
    /// Newton steps on a caller-supplied exact residual `f(x) -> (value, slope)`.
    pub fn real_roots_with<F>(&self, residual: F) -> Result<Vec<f64>, RootFindingError>
    where
        F: Fn(f64) -> (f64, f64),
    {
        let mut out: Vec<f64> = self
            .complex_roots()?
            .into_iter()
            .filter(|z| z.im.abs() < REAL_ROOT_IMAG_TOL * (1.0 + z.norm()))
            .map(|z| newton_polish(z.re, &residual))
            .filter(|x| x.is_finite())
            .collect();
        out.sort_by(|a, b| a.total_cmp(b));
        out.dedup_by(|b, a| (*b - *a).abs() < ROOT_MERGE_TOL * a.abs().max(b.abs()).max(1.0));
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("companion-matrix eigenvalue iteration did not converge")]
pub struct RootFindingError;

fn scale_of(coeffs: &[f64]) -> f64 {
    let m = coeffs.len() - 1;
    let s = (coeffs[0] / coeffs[m]).abs().powf(1.0 / m as f64);
    if s.is_finite() && s > 0.0 {
        s
    } else {
        1.0
    }
}

/// Eigenvalues `y` of the companion matrix of `p(s·y)/(cₙsⁿ)`.
fn companion_eigenvalues(coeffs: &[f64], s: f64) -> Option<Vec<Complex64>> {
    let m = coeffs.len() - 1;
    let lead = coeffs[m];
    let mut comp = DMatrix::<f64>::zeros(m, m);
    for i in 1..m {
        comp[(i, i - 1)] = 1.0;
    }
    for k in 0..m {
        comp[(k, m - 1)] = -coeffs[k] / lead * s.powi(k as i32 - m as i32);
    }
    nalgebra::Schur::try_new(comp, f64::EPSILON, 10_000)
        .map(|sch| sch.complex_eigenvalues().iter().copied().collect())
}

/// Newton iteration from `x0`, stopping when the step no longer shrinks the
/// residual or falls below round-off.
pub fn newton_polish<F>(x0: f64, residual: F) -> f64
where
    F: Fn(f64) -> (f64, f64),
{
    let mut x = x0;
    let (mut fx, mut dfx) = residual(x);
    for _ in 0..50 {
        if fx == 0.0 || dfx == 0.0 || !dfx.is_finite() {
            break;
        }
        let step = fx / dfx;
        let cand = x - step;
        let (fc, dfc) = residual(cand);
        if !(fc.abs() <= fx.abs()) {
            break;
        }
        x = cand;
        fx = fc;
        dfx = dfc;
        if step.abs() <= 4.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn from_roots(roots: &[f64]) -> Polynomial {
        roots.iter().fold(Polynomial::new(vec![1.0]), |p, &r| {
            p.mul(&Polynomial::new(vec![-r, 1.0]))
        })
    }

    #[test]
    fn eval_and_derivative() {
        let p = Polynomial::new(vec![1.0, -3.0, 0.0, 2.0]);
        assert_eq!(p.eval(2.0), 1.0 - 6.0 + 16.0);
        assert_eq!(p.derivative().coeffs(), &[-3.0, 0.0, 6.0]);
        assert_eq!(Polynomial::new(vec![1.0, 2.0, 0.0, 0.0]).degree(), 1);
    }

    #[test]
    fn cubic_with_three_real_roots() {
        let p = from_roots(&[-2.0, 0.5, 3.0]);
        let r = p.real_roots().unwrap();
        assert_eq!(r.len(), 3);
        assert_relative_eq!(r[0], -2.0, max_relative = 1e-14);
        assert_relative_eq!(r[1], 0.5, max_relative = 1e-14);
        assert_relative_eq!(r[2], 3.0, max_relative = 1e-14);
    }

    #[test]
    fn complex_pairs_are_discarded() {
        // (x² + 1)(x − 4)
        let p = Polynomial::new(vec![1.0, 0.0, 1.0]).mul(&Polynomial::new(vec![-4.0, 1.0]));
        assert_eq!(p.real_roots().unwrap(), vec![4.0]);
    }

    #[test]
    fn zero_root_and_constant() {
        let p = Polynomial::new(vec![0.0, 0.0, 1.0, 1.0]);
        let r = p.real_roots().unwrap();
        assert_eq!(r, vec![-1.0, 0.0]);
        assert!(Polynomial::new(vec![5.0]).real_roots().unwrap().is_empty());
    }

    #[test]
    fn widely_scaled_quintic() {
        // roots spanning many decades, as in the operating-point polynomial
        let roots = [-3.0e-3, -2.5e6, 7.0e6];
        let p = from_roots(&roots).mul(&Polynomial::new(vec![1e14, 0.0, 1.0]));
        let r = p.real_roots().unwrap();
        assert_eq!(r.len(), 3);
        assert_relative_eq!(r[1], -3.0e-3, max_relative = 1e-12);
    }

    #[test]
    fn double_root_is_merged() {
        let p = from_roots(&[1.0, 1.0, -5.0]);
        let r = p.real_roots().unwrap();
        assert_eq!(r.len(), 2);
        assert_relative_eq!(r[1], 1.0, max_relative = 1e-7);
    }

    #[test]
    fn shift_matches_evaluation() {
        let p = Polynomial::new(vec![1.0, -2.0, 0.5, 3.0]);
        let q = p.shifted(0.7);
        for x in [-1.3, 0.0, 2.2] {
            assert_relative_eq!(q.eval(x), p.eval(x + 0.7), max_relative = 1e-13);
        }
    }

    #[test]
    fn symmetric_spectrum_terminates() {
        // odd quintic with roots 0, ±z, ±z̄ that stalls unshifted QR
        let p = Polynomial::new(vec![
            0.0,
            1.4641302492990978e28,
            0.0,
            -8.5184e16,
            0.0,
            123904.0,
        ]);
        assert_eq!(p.complex_roots().unwrap().len(), 5);
        assert_eq!(p.real_roots().unwrap(), vec![0.0]);
        let q = from_roots(&[-3e5, -1e5, 0.0, 1e5, 3e5]);
        let r = q.real_roots().unwrap();
        assert_eq!(r.len(), 5);
        assert_relative_eq!(r[0], -3e5, max_relative = 1e-12);
        assert_relative_eq!(r[3], 1e5, max_relative = 1e-12);
    }

    proptest! {
        #[test]
        fn recovers_separated_real_roots(
            a in -100.0f64..100.0,
            gap1 in 0.5f64..50.0,
            gap2 in 0.5f64..50.0,
            lead in prop_oneof![-1e3f64..-1e-3, 1e-3f64..1e3],
        ) {
            let roots = [a, a + gap1, a + gap1 + gap2];
            let p = from_roots(&roots).scale(lead);
            let r = p.real_roots().unwrap();
            prop_assert_eq!(r.len(), 3);
            for (x, y) in r.iter().zip(roots.iter()) {
                prop_assert!((x - y).abs() <= 1e-9 * y.abs().max(1.0));
            }
        }
    }
}
