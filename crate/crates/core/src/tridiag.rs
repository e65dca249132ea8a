//! Symmetric tridiagonal matrices.
//!
//! Every operator in this crate comes from piecewise-linear elements on a 1D
//! grid, so the stiffness and mass matrices are symmetric tridiagonal. This
//! module carries the few kernels needed on them: products, SPD solves,
//! pivoted solves for shifted (indefinite) pencils, and Sylvester inertia
//! counts for bisection on a generalized eigenproblem.

/// Symmetric tridiagonal matrix stored by its diagonal and first
/// off-diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn zeros(n: usize) -> Self {
        Self {
            diag: vec![0.0; n],
            off: vec![0.0; n.saturating_sub(1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Adds a symmetric 2x2 element block at rows/cols `(i, i+1)`.
    pub fn add_block(&mut self, i: usize, b00: f64, b01: f64, b11: f64) {
        self.diag[i] += b00;
        self.off[i] += b01;
        self.diag[i + 1] += b11;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match i.abs_diff(j) {
            0 => self.diag[i],
            1 => self.off[i.min(j)],
            _ => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(x.len(), n);
        let mut y: Vec<f64> = self.diag.iter().zip(x).map(|(d, v)| d * v).collect();
        for i in 0..n.saturating_sub(1) {
            y[i] += self.off[i] * x[i + 1];
            y[i + 1] += self.off[i] * x[i];
        }
        y
    }

    /// `x^T A y`.
    /// `(self - sigma * other) x` accumulated in double-double arithmetic and
    /// rounded once per entry.
    pub fn shifted_residual(&self, other: &SymTridiag, sigma: f64, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let mut acc = Compensated::default();
                let lo = i.saturating_sub(1);
                let hi = (i + 1).min(n - 1);
                for j in lo..=hi {
                    acc.add_product(self.get(i, j), x[j]);
                    let (p, e) = two_prod(other.get(i, j), x[j]);
                    acc.add_product(-sigma, p);
                    acc.add_product(-sigma, e);
                }
                acc.value()
            })
            .collect()
    }

    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(x, &self.mul_vec(y))
    }

    /// `self - sigma * other`.
    pub fn shifted(&self, other: &SymTridiag, sigma: f64) -> SymTridiag {
        SymTridiag {
            diag: self
                .diag
                .iter()
                .zip(&other.diag)
                .map(|(a, b)| a - sigma * b)
                .collect(),
            off: self
                .off
                .iter()
                .zip(&other.off)
                .map(|(a, b)| a - sigma * b)
                .collect(),
        }
    }

    /// Number of negative pivots in the LDL^T factorization. For `K - s M`
    /// with `M` positive definite this is the number of generalized
    /// eigenvalues strictly below `s`.
    pub fn negative_pivots(&self) -> usize {
        let n = self.dim();
        let mut count = 0;
        let mut d = self.diag[0];
        for i in 0..n {
            if i > 0 {
                d = self.diag[i] - self.off[i - 1] * self.off[i - 1] / d;
            }
            if d == 0.0 {
                d = -f64::EPSILON * (self.diag[i].abs() + 1.0);
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// Solves `A x = b` for a positive definite `A` (Thomas algorithm).
    pub fn solve_spd(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(b.len(), n);
        let mut c = vec![0.0; n];
        let mut x = b.to_vec();
        let mut denom = self.diag[0];
        if n > 1 {
            c[0] = self.off[0] / denom;
        }
        x[0] /= denom;
        for i in 1..n {
            denom = self.diag[i] - self.off[i - 1] * c[i - 1];
            if i + 1 < n {
                c[i] = self.off[i] / denom;
            }
            x[i] = (x[i] - self.off[i - 1] * x[i - 1]) / denom;
        }
        for i in (0..n.saturating_sub(1)).rev() {
            x[i] -= c[i] * x[i + 1];
        }
        x
    }

    /// Solves `A x = b` by Gaussian elimination with partial pivoting.
    /// Exactly singular pivots are replaced by a tiny value, which is what
    /// inverse iteration wants.
    pub fn solve_pivoted(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(b.len(), n);
        if n == 1 {
            return vec![b[0] / nonzero(self.diag[0], 1.0)];
        }
        let scale = self.diag.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
        // Row i of U has entries at columns i, i+1, i+2.
        let mut u0 = vec![0.0; n];
        let mut u1 = vec![0.0; n];
        let mut u2 = vec![0.0; n];
        let mut rhs = b.to_vec();
        // Working row i: [diag_i, sup_i, 0]; sub entry below.
        let mut cur = [self.diag[0], self.off[0], 0.0];
        for i in 0..n - 1 {
            let sub = self.off[i];
            let next = [self.diag[i + 1], if i + 2 < n { self.off[i + 1] } else { 0.0 }];
            if cur[0].abs() >= sub.abs() {
                let p = nonzero(cur[0], scale);
                let m = sub / p;
                u0[i] = p;
                u1[i] = cur[1];
                u2[i] = cur[2];
                rhs[i + 1] -= m * rhs[i];
                cur = [next[0] - m * cur[1], next[1] - m * cur[2], 0.0];
            } else {
                // Swap rows i and i+1.
                let m = cur[0] / sub;
                u0[i] = sub;
                u1[i] = next[0];
                u2[i] = next[1];
                rhs.swap(i, i + 1);
                rhs[i + 1] -= m * rhs[i];
                cur = [cur[1] - m * next[0], cur[2] - m * next[1], 0.0];
            }
        }
        u0[n - 1] = nonzero(cur[0], scale);
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = rhs[i];
            if i + 1 < n {
                s -= u1[i] * x[i + 1];
            }
            if i + 2 < n {
                s -= u2[i] * x[i + 2];
            }
            x[i] = s / u0[i];
        }
        x
    }
}

fn nonzero(p: f64, scale: f64) -> f64 {
    if p == 0.0 {
        f64::EPSILON * f64::EPSILON * scale
    } else {
        p
    }
}

pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub(crate) fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// Solves the symmetric matrix with off-diagonal entries `-e[i]` and
/// diagonal `e[i-1] + e[i] + s[i]`, for `e > 0` and `s >= 0` not all zero.
///
/// Pivots are built from the row sums `s`, so nothing cancels when `s` is
/// tiny next to `e` (fine grids with a weak reaction term).
pub fn solve_m_matrix(e: &[f64], s: &[f64], b: &[f64]) -> Vec<f64> {
    let n = s.len();
    let mut u = vec![0.0; n];
    let mut y = b.to_vec();
    let mut sigma = s[0];
    for i in 0..n {
        if i > 0 {
            let l = e[i - 1] / u[i - 1];
            sigma = s[i] + l * sigma;
            y[i] += l * y[i - 1];
        }
        u[i] = sigma + if i + 1 < n { e[i] } else { 0.0 };
    }
    let mut x = vec![0.0; n];
    x[n - 1] = y[n - 1] / u[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = (y[i] + e[i] * x[i + 1]) / u[i];
    }
    x
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

#[derive(Default)]
struct Compensated {
    hi: f64,
    lo: f64,
}

impl Compensated {
    fn add_product(&mut self, a: f64, b: f64) {
        let (p, e) = two_prod(a, b);
        let (s, e2) = two_sum(self.hi, p);
        self.hi = s;
        self.lo += e + e2;
    }

    fn value(&self) -> f64 {
        self.hi + self.lo
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    fn sample(n: usize, shift: f64) -> SymTridiag {
        SymTridiag {
            diag: (0..n).map(|i| 2.0 + 0.1 * i as f64 - shift).collect(),
            off: (0..n - 1).map(|i| -1.0 + 0.05 * (i % 3) as f64).collect(),
        }
    }

    fn dense(a: &SymTridiag) -> DMatrix<f64> {
        let n = a.dim();
        DMatrix::from_fn(n, n, |i, j| a.get(i, j))
    }

    #[test]
    fn spd_solve_matches_dense() {
        let a = sample(12, 0.0);
        let b: Vec<f64> = (0..12).map(|i| (i as f64).sin()).collect();
        let x = a.solve_spd(&b);
        let r = dense(&a) * DVector::from_vec(x) - DVector::from_vec(b);
        assert!(r.norm() < 1e-12);
    }

    #[test]
    fn pivoted_solve_handles_indefinite() {
        let a = sample(15, 2.3);
        let b: Vec<f64> = (0..15).map(|i| 1.0 + (i as f64).cos()).collect();
        let x = a.solve_pivoted(&b);
        let r = dense(&a) * DVector::from_vec(x) - DVector::from_vec(b);
        assert!(r.norm() < 1e-10, "residual {}", r.norm());
    }

    #[test]
    fn inertia_counts_eigenvalues_below_shift() {
        let a = sample(20, 0.0);
        let eig = dense(&a).symmetric_eigen().eigenvalues;
        for s in [-0.5, 0.3, 1.0, 2.2, 3.9, 6.0] {
            let expected = eig.iter().filter(|&&e| e < s).count();
            let id = SymTridiag {
                diag: vec![1.0; 20],
                off: vec![0.0; 19],
            };
            assert_eq!(a.shifted(&id, s).negative_pivots(), expected, "shift {s}");
        }
    }

    #[test]
    fn m_matrix_solve_matches_general_solver() {
        let e = [3.0, 0.5, 2.0, 1.0];
        let s = [0.1, 0.0, 1e-3, 0.2, 0.05];
        let mut m = SymTridiag::zeros(5);
        for i in 0..5 {
            m.diag[i] = s[i] + if i > 0 { e[i - 1] } else { 0.0 } + if i < 4 { e[i] } else { 0.0 };
        }
        for i in 0..4 {
            m.off[i] = -e[i];
        }
        let b = [1.0, -2.0, 0.5, 0.0, 3.0];
        let x = solve_m_matrix(&e, &s, &b);
        let y = m.solve_spd(&b);
        for (a, c) in x.iter().zip(&y) {
            assert!((a - c).abs() <= 1e-12 * (1.0 + c.abs()));
        }
    }
}
