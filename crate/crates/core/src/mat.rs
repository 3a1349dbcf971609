//! Small dense complex matrices.
//!
//! Everything in the model is 2x2 blocks, 4x4 chain matrices or the stacked
//! boundary system (12x12), so a hand-rolled dense implementation with
//! explicit conditioning estimates beats pulling in a general linear-algebra
//! stack. All routines are over `Complex64` and allocation-free where the
//! size is fixed.

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Reciprocal condition floor below which inverses are rejected.
pub const RCOND_FLOOR: f64 = 1e-14;

/// A 2x2 complex matrix in row-major order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2(pub [[C64; 2]; 2]);

impl Mat2 {
    pub fn zero() -> Self {
        Mat2([[ZERO; 2]; 2])
    }

    pub fn identity() -> Self {
        Mat2([[ONE, ZERO], [ZERO, ONE]])
    }

    pub fn diag(a: C64, b: C64) -> Self {
        Mat2([[a, ZERO], [ZERO, b]])
    }

    pub fn mul(&self, rhs: &Mat2) -> Mat2 {
        let a = &self.0;
        let b = &rhs.0;
        Mat2([
            [
                a[0][0] * b[0][0] + a[0][1] * b[1][0],
                a[0][0] * b[0][1] + a[0][1] * b[1][1],
            ],
            [
                a[1][0] * b[0][0] + a[1][1] * b[1][0],
                a[1][0] * b[0][1] + a[1][1] * b[1][1],
            ],
        ])
    }

    pub fn mul_vec(&self, v: [C64; 2]) -> [C64; 2] {
        [
            self.0[0][0] * v[0] + self.0[0][1] * v[1],
            self.0[1][0] * v[0] + self.0[1][1] * v[1],
        ]
    }

    pub fn add(&self, rhs: &Mat2) -> Mat2 {
        let mut out = *self;
        for i in 0..2 {
            for j in 0..2 {
                out.0[i][j] += rhs.0[i][j];
            }
        }
        out
    }

    pub fn sub(&self, rhs: &Mat2) -> Mat2 {
        let mut out = *self;
        for i in 0..2 {
            for j in 0..2 {
                out.0[i][j] -= rhs.0[i][j];
            }
        }
        out
    }

    pub fn scale(&self, s: C64) -> Mat2 {
        let mut out = *self;
        for i in 0..2 {
            for j in 0..2 {
                out.0[i][j] *= s;
            }
        }
        out
    }

    pub fn det(&self) -> C64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn norm_one(&self) -> f64 {
        let c0 = self.0[0][0].norm() + self.0[1][0].norm();
        let c1 = self.0[0][1].norm() + self.0[1][1].norm();
        c0.max(c1)
    }

    pub fn inverse(&self) -> Result<Mat2> {
        let det = self.det();
        let scale = self.norm_one();
        if det.norm() <= RCOND_FLOOR * scale * scale {
            return Err(Error::SingularMatrix {
                rcond: if scale > 0.0 {
                    det.norm() / (scale * scale)
                } else {
                    0.0
                },
            });
        }
        let inv = Mat2([
            [self.0[1][1] / det, -self.0[0][1] / det],
            [-self.0[1][0] / det, self.0[0][0] / det],
        ]);
        Ok(inv)
    }

    /// Reciprocal condition estimate in the 1-norm.
    pub fn rcond(&self) -> f64 {
        match self.inverse() {
            Ok(inv) => {
                let p = self.norm_one() * inv.norm_one();
                if p > 0.0 {
                    1.0 / p
                } else {
                    0.0
                }
            }
            Err(_) => 0.0,
        }
    }
}

/// Eigen-decomposition of a 2x2 complex matrix.
///
/// Returns `(lambda1, v1, lambda2, v2)` with unit-normalized eigenvectors.
/// The eigenvalue ordering is by descending magnitude so results are stable
/// across parameter perturbations.
pub fn eig2(m: &Mat2) -> (C64, [C64; 2], C64, [C64; 2]) {
    let a = m.0[0][0];
    let b = m.0[0][1];
    let c = m.0[1][0];
    let d = m.0[1][1];
    let tr = a + d;
    let disc = ((a - d) * (a - d) + 4.0 * b * c).sqrt();
    let l1 = (tr + disc) * 0.5;
    let l2 = (tr - disc) * 0.5;
    let (l1, l2) = if l1.norm() >= l2.norm() {
        (l1, l2)
    } else {
        (l2, l1)
    };
    (l1, eigvec2(m, l1), l2, eigvec2(m, l2))
}

fn eigvec2(m: &Mat2, lambda: C64) -> [C64; 2] {
    let a = m.0[0][0];
    let b = m.0[0][1];
    let c = m.0[1][0];
    let d = m.0[1][1];
    // (m - lambda I) v = 0: either row yields a null vector; take the better
    // scaled of the two candidates.
    let cand1 = [b, lambda - a];
    let cand2 = [lambda - d, c];
    let n1 = cand1[0].norm_sqr() + cand1[1].norm_sqr();
    let n2 = cand2[0].norm_sqr() + cand2[1].norm_sqr();
    let v = if n1 >= n2 { cand1 } else { cand2 };
    let n = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
    if n == 0.0 {
        // Matrix is lambda*I; any direction is an eigenvector.
        return [ONE, ZERO];
    }
    [v[0] / n, v[1] / n]
}

/// Dense complex matrix with runtime dimensions, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    nrows: usize,
    ncols: usize,
    data: Vec<C64>,
}

impl CMat {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CMat {
            nrows,
            ncols,
            data: vec![ZERO; nrows * ncols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Self {
        let nrows = rows.len();
        let ncols = if nrows > 0 { rows[0].len() } else { 0 };
        let mut data = Vec::with_capacity(nrows * ncols);
        for r in rows {
            assert_eq!(r.len(), ncols, "ragged rows");
            data.extend_from_slice(r);
        }
        CMat { nrows, ncols, data }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn mul(&self, rhs: &CMat) -> CMat {
        assert_eq!(self.ncols, rhs.nrows, "dimension mismatch");
        let mut out = CMat::zeros(self.nrows, rhs.ncols);
        for i in 0..self.nrows {
            for k in 0..self.ncols {
                let aik = self[(i, k)];
                if aik == ZERO {
                    continue;
                }
                for j in 0..rhs.ncols {
                    out[(i, j)] += aik * rhs[(k, j)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.ncols, v.len(), "dimension mismatch");
        let mut out = vec![ZERO; self.nrows];
        for i in 0..self.nrows {
            let mut acc = ZERO;
            for j in 0..self.ncols {
                acc += self[(i, j)] * v[j];
            }
            out[i] = acc;
        }
        out
    }

    pub fn norm_one(&self) -> f64 {
        let mut best = 0.0f64;
        for j in 0..self.ncols {
            let mut s = 0.0;
            for i in 0..self.nrows {
                s += self[(i, j)].norm();
            }
            best = best.max(s);
        }
        best
    }

    /// Write `block` into this matrix with its top-left corner at `(r0, c0)`.
    pub fn set_block(&mut self, r0: usize, c0: usize, block: &CMat) {
        for i in 0..block.nrows {
            for j in 0..block.ncols {
                self[(r0 + i, c0 + j)] = block[(i, j)];
            }
        }
    }

    /// Inverse by partial-pivoted LU, together with a reciprocal condition
    /// estimate `1 / (||A||_1 * ||A^-1||_1)`.
    pub fn lu_inverse(&self) -> Result<(CMat, f64)> {
        assert_eq!(self.nrows, self.ncols, "inverse of non-square matrix");
        let n = self.nrows;
        let mut lu = self.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut pmax = lu[(k, k)].norm();
            let mut prow = k;
            for i in k + 1..n {
                let v = lu[(i, k)].norm();
                if v > pmax {
                    pmax = v;
                    prow = i;
                }
            }
            if pmax == 0.0 {
                return Err(Error::SingularMatrix { rcond: 0.0 });
            }
            if prow != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(prow, j)];
                    lu[(prow, j)] = tmp;
                }
                perm.swap(k, prow);
            }
            let piv = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / piv;
                lu[(i, k)] = f;
                for j in k + 1..n {
                    let v = lu[(k, j)];
                    lu[(i, j)] -= f * v;
                }
            }
        }
        // Solve for each unit vector.
        let mut inv = CMat::zeros(n, n);
        let mut x = vec![ZERO; n];
        for col in 0..n {
            for i in 0..n {
                x[i] = if perm[i] == col { ONE } else { ZERO };
            }
            for i in 0..n {
                for j in 0..i {
                    let f = lu[(i, j)];
                    let xj = x[j];
                    x[i] -= f * xj;
                }
            }
            for i in (0..n).rev() {
                for j in i + 1..n {
                    let f = lu[(i, j)];
                    let xj = x[j];
                    x[i] -= f * xj;
                }
                x[i] /= lu[(i, i)];
            }
            for i in 0..n {
                inv[(i, col)] = x[i];
            }
        }
        let denom = self.norm_one() * inv.norm_one();
        let rcond = if denom > 0.0 { 1.0 / denom } else { 0.0 };
        if rcond < RCOND_FLOOR {
            return Err(Error::SingularMatrix { rcond });
        }
        Ok((inv, rcond))
    }
}

impl std::ops::Index<(usize, usize)> for CMat {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.ncols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.ncols + j]
    }
}

/// Residual `b - A y` with error-free product transformations (FMA) and
/// compensated accumulation, giving an effectively double-precision
/// residual. Iterative refinement against an ill-conditioned system only
/// gains digits when the residual is computed beyond working precision.
pub fn residual_compensated(a: &CMat, y: &[C64], b: &[C64]) -> Vec<C64> {
    assert_eq!(a.ncols(), y.len());
    assert_eq!(a.nrows(), b.len());
    let mut out = vec![ZERO; a.nrows()];
    for i in 0..a.nrows() {
        // Accumulate real and imaginary parts separately with a Neumaier
        // running compensation plus the exact FMA product errors.
        let mut sum = [b[i].re, b[i].im];
        let mut comp = [0.0f64, 0.0f64];
        let add = |part: usize, v: f64, sum: &mut [f64; 2], comp: &mut [f64; 2]| {
            let t = sum[part] + v;
            if sum[part].abs() >= v.abs() {
                comp[part] += (sum[part] - t) + v;
            } else {
                comp[part] += (v - t) + sum[part];
            }
            sum[part] = t;
        };
        for j in 0..a.ncols() {
            let m = a[(i, j)];
            let v = y[j];
            // (m.re + i m.im)(v.re + i v.im): four real products, each with
            // its exact rounding error via FMA.
            for (part, x, z) in [
                (0usize, -m.re, v.re),
                (0, m.im, v.im),
                (1, -m.re, v.im),
                (1, -m.im, v.re),
            ] {
                let p = x * z;
                let e = f64::mul_add(x, z, -p);
                add(part, p, &mut sum, &mut comp);
                add(part, e, &mut sum, &mut comp);
            }
        }
        out[i] = C64::new(sum[0] + comp[0], sum[1] + comp[1]);
    }
    out
}

/// Least-squares solution of `A x = b` by complex Householder QR.
///
/// Returns the solution, the relative residual `||Ax - b|| / ||b||` and a
/// cheap reciprocal-condition estimate `min|R_kk| / max|R_kk|`.
pub fn qr_least_squares(a: &CMat, b: &[C64]) -> Result<(Vec<C64>, f64, f64)> {
    let m = a.nrows();
    let n = a.ncols();
    assert!(m >= n, "underdetermined system");
    assert_eq!(b.len(), m);
    let mut r = a.clone();
    let mut rhs = b.to_vec();
    let bnorm = rhs.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();

    for k in 0..n {
        // Householder vector for column k below the diagonal.
        let mut xnorm2 = 0.0;
        for i in k..m {
            xnorm2 += r[(i, k)].norm_sqr();
        }
        let xnorm = xnorm2.sqrt();
        if xnorm == 0.0 {
            return Err(Error::SingularSystem {
                detail: format!("rank deficient at column {k}"),
            });
        }
        let x0 = r[(k, k)];
        let phase = if x0.norm() > 0.0 { x0 / x0.norm() } else { ONE };
        let alpha = -phase * xnorm;
        // v = x - alpha e1, stored in place of the column tail.
        let mut v = vec![ZERO; m - k];
        v[0] = x0 - alpha;
        for i in k + 1..m {
            v[i - k] = r[(i, k)];
        }
        let vnorm2: f64 = v.iter().map(|c| c.norm_sqr()).sum();
        if vnorm2 == 0.0 {
            // Column already reduced.
            continue;
        }
        let tau = 2.0 / vnorm2;
        // Apply H = I - tau v v^H to the remaining columns and to rhs.
        for j in k..n {
            let mut dot = ZERO;
            for i in k..m {
                dot += v[i - k].conj() * r[(i, j)];
            }
            let f = dot * tau;
            for i in k..m {
                let vi = v[i - k];
                r[(i, j)] -= f * vi;
            }
        }
        let mut dot = ZERO;
        for i in k..m {
            dot += v[i - k].conj() * rhs[i];
        }
        let f = dot * tau;
        for i in k..m {
            rhs[i] -= f * v[i - k];
        }
    }

    let mut dmin = f64::INFINITY;
    let mut dmax = 0.0f64;
    for k in 0..n {
        let d = r[(k, k)].norm();
        dmin = dmin.min(d);
        dmax = dmax.max(d);
    }
    let rcond = if dmax > 0.0 { dmin / dmax } else { 0.0 };
    if rcond < RCOND_FLOOR {
        return Err(Error::SingularSystem {
            detail: format!("triangular factor rcond {rcond:.3e}"),
        });
    }

    let mut x = vec![ZERO; n];
    for i in (0..n).rev() {
        let mut acc = rhs[i];
        for j in i + 1..n {
            acc -= r[(i, j)] * x[j];
        }
        x[i] = acc / r[(i, i)];
    }
    let resid2: f64 = rhs[n..].iter().map(|c| c.norm_sqr()).sum();
    let rel_resid = if bnorm > 0.0 {
        resid2.sqrt() / bnorm
    } else {
        resid2.sqrt()
    };
    Ok((x, rel_resid, rcond))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn mat2_inverse_round_trip() {
        let m = Mat2([[c(1.0, 2.0), c(0.5, -1.0)], [c(-0.2, 0.1), c(3.0, 0.4)]]);
        let inv = m.inverse().unwrap();
        let prod = m.mul(&inv);
        for i in 0..2 {
            for j in 0..2 {
                let expect = if i == j { ONE } else { ZERO };
                assert!((prod.0[i][j] - expect).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn mat2_singular_rejected() {
        let m = Mat2([[c(1.0, 0.0), c(2.0, 0.0)], [c(2.0, 0.0), c(4.0, 0.0)]]);
        assert!(matches!(m.inverse(), Err(Error::SingularMatrix { .. })));
    }

    #[test]
    fn eig2_diagonal() {
        let m = Mat2::diag(c(3.0, 1.0), c(1.0, 0.0));
        let (l1, v1, l2, v2) = eig2(&m);
        assert!((l1 - c(3.0, 1.0)).norm() < 1e-12);
        assert!((l2 - c(1.0, 0.0)).norm() < 1e-12);
        assert!(v1[1].norm() < 1e-12);
        assert!(v2[0].norm() < 1e-12);
    }

    #[test]
    fn eig2_reconstructs_matrix() {
        let m = Mat2([[c(2.0, 0.3), c(0.7, -0.2)], [c(0.1, 0.5), c(-1.0, 1.2)]]);
        let (l1, v1, l2, v2) = eig2(&m);
        for (l, v) in [(l1, v1), (l2, v2)] {
            let mv = m.mul_vec(v);
            for k in 0..2 {
                assert!((mv[k] - l * v[k]).norm() < 1e-10 * l.norm().max(1.0));
            }
        }
    }

    #[test]
    fn lu_inverse_identity() {
        let m = CMat::identity(4);
        let (inv, rcond) = m.lu_inverse().unwrap();
        assert_eq!(inv, CMat::identity(4));
        assert!((rcond - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lu_inverse_zero_matrix() {
        let m = CMat::zeros(4, 4);
        assert!(matches!(
            m.lu_inverse(),
            Err(Error::SingularMatrix { .. })
        ));
    }

    #[test]
    fn qr_solves_square_system() {
        let a = CMat::from_rows(&[
            vec![c(2.0, 1.0), c(0.0, -1.0), c(1.0, 0.0)],
            vec![c(0.5, 0.0), c(3.0, 0.2), c(-1.0, 1.0)],
            vec![c(1.0, -1.0), c(0.3, 0.0), c(2.0, 2.0)],
        ]);
        let x_true = vec![c(1.0, 1.0), c(-2.0, 0.5), c(0.3, -0.7)];
        let b = a.mul_vec(&x_true);
        let (x, resid, rcond) = qr_least_squares(&a, &b).unwrap();
        assert!(resid < 1e-12);
        assert!(rcond > 1e-6);
        for (got, want) in x.iter().zip(&x_true) {
            assert!((got - want).norm() < 1e-12);
        }
    }

    #[test]
    fn qr_reports_residual_for_inconsistent_system() {
        // Overdetermined and inconsistent: residual must be nonzero.
        let a = CMat::from_rows(&[
            vec![ONE, ZERO],
            vec![ZERO, ONE],
            vec![ONE, ONE],
        ]);
        let b = vec![c(1.0, 0.0), c(1.0, 0.0), c(5.0, 0.0)];
        let (_, resid, _) = qr_least_squares(&a, &b).unwrap();
        assert!(resid > 0.1);
    }
}
