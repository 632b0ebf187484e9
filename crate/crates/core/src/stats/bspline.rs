//! Clamped cubic B-spline basis with a second-difference penalty, the
//! building block of the additive model smooths.

/// Cubic B-spline basis of `n_basis` functions on `[lo, hi]` with equally
/// spaced interior knots. Inputs are clamped to the range.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Basis {
    pub lo: f64,
    pub hi: f64,
    pub n_basis: usize,
    knots: Vec<f64>,
}

const DEGREE: usize = 3;

impl Basis {
    pub fn new(lo: f64, hi: f64, n_basis: usize) -> Basis {
        assert!(n_basis > DEGREE, "need more basis functions than the degree");
        // degenerate ranges (constant covariates) still get a valid basis
        let (lo, hi) = if hi - lo > 1e-12 { (lo, hi) } else { (lo, lo + 1.0) };
        let n_interior = n_basis - DEGREE - 1;
        let mut knots = Vec::with_capacity(n_basis + DEGREE + 1);
        for _ in 0..=DEGREE {
            knots.push(lo);
        }
        for i in 1..=n_interior {
            knots.push(lo + (hi - lo) * i as f64 / (n_interior + 1) as f64);
        }
        for _ in 0..=DEGREE {
            knots.push(hi);
        }
        Basis {
            lo,
            hi,
            n_basis,
            knots,
        }
    }

    /// All basis values at `x` (Cox-de Boor recursion).
    pub fn eval(&self, x: f64) -> Vec<f64> {
        let t = &self.knots;
        let k = self.n_basis;
        let x = x.clamp(self.lo, self.hi);
        // order-0 indicators; the final span is closed at the right edge
        let mut b = vec![0.0; k + DEGREE];
        for (i, bi) in b.iter_mut().enumerate() {
            let last_span = t[i] < t[i + 1] && t[i + 1] >= self.hi;
            if (x >= t[i] && x < t[i + 1]) || (last_span && x == self.hi) {
                *bi = 1.0;
            }
        }
        for d in 1..=DEGREE {
            for i in 0..k + DEGREE - d {
                let left = if t[i + d] > t[i] {
                    (x - t[i]) / (t[i + d] - t[i]) * b[i]
                } else {
                    0.0
                };
                let right = if t[i + d + 1] > t[i + 1] {
                    (t[i + d + 1] - x) / (t[i + d + 1] - t[i + 1]) * b[i + 1]
                } else {
                    0.0
                };
                b[i] = left + right;
            }
        }
        b.truncate(k);
        b
    }
}

/// `D^T D` for the second-difference penalty matrix `D` with rows
/// `(1, -2, 1)`, returned dense `(k x k)` in row-major order.
pub fn second_difference_gram(k: usize) -> Vec<f64> {
    let mut dtd = vec![0.0; k * k];
    for r in 0..k.saturating_sub(2) {
        let cols = [r, r + 1, r + 2];
        let vals = [1.0, -2.0, 1.0];
        for a in 0..3 {
            for b in 0..3 {
                dtd[cols[a] * k + cols[b]] += vals[a] * vals[b];
            }
        }
    }
    dtd
}

/// Quadratic form `alpha^T (D^T D) alpha`, the roughness of a coefficient
/// vector.
pub fn penalty_quadform(dtd: &[f64], alpha: &[f64]) -> f64 {
    let k = alpha.len();
    let mut q = 0.0;
    for i in 0..k {
        for j in 0..k {
            q += alpha[i] * dtd[i * k + j] * alpha[j];
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_of_unity() {
        let basis = Basis::new(-2.0, 5.0, 10);
        for i in 0..=100 {
            let x = -2.0 + 7.0 * i as f64 / 100.0;
            let b = basis.eval(x);
            assert_eq!(b.len(), 10);
            let sum: f64 = b.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12, "x={x}: sum {sum}");
            assert!(b.iter().all(|&v| v >= -1e-15));
        }
    }

    #[test]
    fn endpoints_are_single_basis() {
        let basis = Basis::new(0.0, 1.0, 10);
        let at_lo = basis.eval(0.0);
        assert!((at_lo[0] - 1.0).abs() < 1e-12);
        let at_hi = basis.eval(1.0);
        assert!((at_hi[9] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn clamps_out_of_range_inputs() {
        let basis = Basis::new(0.0, 1.0, 8);
        assert_eq!(basis.eval(-5.0), basis.eval(0.0));
        assert_eq!(basis.eval(9.0), basis.eval(1.0));
    }

    #[test]
    fn local_support_spans_four_knots() {
        let basis = Basis::new(0.0, 1.0, 10);
        let b = basis.eval(0.5);
        let nonzero = b.iter().filter(|&&v| v > 1e-12).count();
        assert!(nonzero <= 4, "cubic splines have 4 nonzero values, got {nonzero}");
    }

    #[test]
    fn penalty_kills_linear_coefficients() {
        let k = 10;
        let dtd = second_difference_gram(k);
        let linear: Vec<f64> = (0..k).map(|i| 3.0 - 0.7 * i as f64).collect();
        assert!(penalty_quadform(&dtd, &linear).abs() < 1e-12);
        let curved: Vec<f64> = (0..k).map(|i| (i as f64).powi(2)).collect();
        assert!(penalty_quadform(&dtd, &curved) > 1.0);
    }

    #[test]
    fn constant_covariate_basis_stays_finite() {
        let basis = Basis::new(2.0, 2.0, 10);
        let b = basis.eval(2.0);
        assert!(b.iter().all(|v| v.is_finite()));
        let sum: f64 = b.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }
}
