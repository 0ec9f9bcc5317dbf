//! Factorization of `I + M S` for symmetric `M` and a ±1 sign diagonal `S`.
//!
//! `I + M S = (S + M) S` because `S^2 = I`, so the work is a factorization of
//! the symmetric matrix `S + M`: Cholesky when every sign is positive, LU with
//! partial pivoting otherwise.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, LU};

/// Condition estimates above this are reported as near-singular.
pub const NEAR_SINGULAR_CONDITION: f64 = 1e12;
/// Condition estimates above this are treated as numerically singular.
pub const SINGULAR_CONDITION: f64 = 1e15;

enum Inner {
    Empty,
    Cholesky(Cholesky<f64, Dyn>),
    Lu(LU<f64, Dyn, Dyn>),
}

pub struct Factorization {
    inner: Inner,
    /// `S + M`, kept for residual refinement.
    matrix: DMatrix<f64>,
    signs: Vec<f64>,
    /// `log |det(I + M S)|`.
    pub log_abs_det: f64,
    /// Sign of `det(I + M S)`; `0.0` for an exactly singular matrix.
    pub det_sign: f64,
    /// `|| |S| + |M| ||_1 * ||(S + M)^{-1}||_1`, estimated.
    pub condition: f64,
}

impl std::fmt::Debug for Factorization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Factorization")
            .field("dim", &self.dim())
            .field("cholesky", &self.is_cholesky())
            .field("log_abs_det", &self.log_abs_det)
            .field("det_sign", &self.det_sign)
            .field("condition", &self.condition)
            .finish()
    }
}

impl Factorization {
    pub fn new(matrix: &DMatrix<f64>, signs: &[f64]) -> Factorization {
        let mut a = matrix.clone();
        for (i, s) in signs.iter().enumerate() {
            a[(i, i)] += s;
        }
        Self::from_shifted(a, signs)
    }

    /// Factorizes a matrix already given in the form `S + M`.
    pub fn from_shifted(a: DMatrix<f64>, signs: &[f64]) -> Factorization {
        let n = signs.len();
        if n == 0 {
            return Factorization {
                inner: Inner::Empty,
                matrix: DMatrix::zeros(0, 0),
                signs: vec![],
                log_abs_det: 0.0,
                det_sign: 1.0,
                condition: 1.0,
            };
        }
        // ||S| + |M||_1: conditioning relative to the parts, so that
        // cancellation between S and M shows up as ill-conditioning
        let norm1 = a
            .column_iter()
            .enumerate()
            .map(|(j, c)| {
                c.iter()
                    .enumerate()
                    .map(|(i, v)| if i == j { (v - signs[j]).abs() + 1.0 } else { v.abs() })
                    .sum::<f64>()
            })
            .fold(0.0, f64::max);
        let negatives = signs.iter().filter(|&&s| s < 0.0).count();
        let sign_of_s = if negatives % 2 == 0 { 1.0 } else { -1.0 };

        let mut fac = if negatives == 0 {
            match Cholesky::new(a.clone()) {
                Some(ch) => {
                    let log_abs_det = 2.0 * ch.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
                    Factorization {
                        inner: Inner::Cholesky(ch),
                        matrix: a,
                        signs: signs.to_vec(),
                        log_abs_det,
                        det_sign: 1.0,
                        condition: 0.0,
                    }
                }
                None => Self::lu(a.clone(), a, signs, sign_of_s),
            }
        } else {
            Self::lu(a.clone(), a, signs, sign_of_s)
        };
        fac.condition = if fac.det_sign == 0.0 {
            f64::INFINITY
        } else {
            norm1 * fac.inverse_one_norm_estimate()
        };
        fac
    }

    fn lu(a: DMatrix<f64>, matrix: DMatrix<f64>, signs: &[f64], sign_of_s: f64) -> Factorization {
        let lu = LU::new(a);
        let mut log_abs_det = 0.0;
        let mut sign = lu.p().determinant::<f64>();
        let u = lu.u();
        for d in u.diagonal().iter() {
            if *d == 0.0 || !d.is_finite() {
                sign = 0.0;
                break;
            }
            log_abs_det += d.abs().ln();
            if *d < 0.0 {
                sign = -sign;
            }
        }
        Factorization {
            inner: Inner::Lu(lu),
            matrix,
            signs: signs.to_vec(),
            log_abs_det: if sign == 0.0 { f64::NEG_INFINITY } else { log_abs_det },
            det_sign: sign * sign_of_s,
            condition: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.signs.len()
    }

    pub fn is_cholesky(&self) -> bool {
        matches!(self.inner, Inner::Cholesky(_))
    }

    /// Solves `(S + M) u = b`.
    fn solve_symmetric(&self, b: &[f64]) -> Vec<f64> {
        let rhs = DVector::from_column_slice(b);
        match &self.inner {
            Inner::Empty => vec![],
            Inner::Cholesky(ch) => ch.solve(&rhs).as_slice().to_vec(),
            Inner::Lu(lu) => lu
                .solve(&rhs)
                .map(|v| v.as_slice().to_vec())
                .unwrap_or_else(|| vec![f64::NAN; b.len()]),
        }
    }

    /// Solves `(I + M S) z = b`, with two steps of iterative refinement on
    /// residuals computed without rounding error in the products. Removal
    /// systems near a determinant zero have condition numbers around 1e8 and
    /// lose most of their digits without it.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut u = self.solve_symmetric(b);
        for _ in 0..REFINEMENT_STEPS {
            if u.iter().any(|v| !v.is_finite()) {
                break;
            }
            let r: Vec<f64> = (0..u.len())
                .map(|i| residual(b[i], self.matrix.row(i).iter().copied(), &u))
                .collect();
            let du = self.solve_symmetric(&r);
            for (ui, d) in u.iter_mut().zip(&du) {
                *ui += d;
            }
        }
        for (ui, s) in u.iter_mut().zip(&self.signs) {
            *ui *= s;
        }
        u
    }

    /// Hager–Higham estimate of `||(S + M)^{-1}||_1`; the matrix is symmetric,
    /// so the transposed solves reuse the same factorization.
    fn inverse_one_norm_estimate(&self) -> f64 {
        let n = self.dim();
        let mut x = vec![1.0 / n as f64; n];
        let mut estimate = 0.0;
        for _ in 0..5 {
            let y = self.solve_symmetric(&x);
            if y.iter().any(|v| !v.is_finite()) {
                return f64::INFINITY;
            }
            estimate = y.iter().map(|v| v.abs()).sum::<f64>();
            let xi: Vec<f64> = y.iter().map(|v| if *v >= 0.0 { 1.0 } else { -1.0 }).collect();
            let z = self.solve_symmetric(&xi);
            let (jmax, zmax) = z
                .iter()
                .enumerate()
                .map(|(j, v)| (j, v.abs()))
                .fold((0, 0.0), |acc, p| if p.1 > acc.1 { p } else { acc });
            let ztx: f64 = z.iter().zip(&x).map(|(a, b)| a * b).sum();
            if zmax <= ztx {
                break;
            }
            x = vec![0.0; n];
            x[jmax] = 1.0;
        }
        estimate
    }
}

const REFINEMENT_STEPS: usize = 2;

/// `b - Σ a_i u_i` accumulated with error-free products and Neumaier
/// summation.
fn residual(b: f64, row: impl Iterator<Item = f64>, u: &[f64]) -> f64 {
    let mut sum = b;
    let mut comp = 0.0;
    let mut add = |v: f64| {
        let t = sum + v;
        comp += if sum.abs() >= v.abs() {
            (sum - t) + v
        } else {
            (v - t) + sum
        };
        sum = t;
    };
    for (a, x) in row.zip(u) {
        let p = a * x;
        let e = a.mul_add(*x, -p);
        add(-p);
        add(-e);
    }
    sum + comp
}
