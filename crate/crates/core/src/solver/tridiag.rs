//! Complex tridiagonal LU with partial pivoting (the LAPACK `gttrf`/`gttrs`
//! scheme) plus a Hager-Higham estimate of the 1-norm condition number.

use num::complex::Complex64;
use num::Zero;

#[derive(Debug, Clone)]
pub struct TridiagLu {
    dl: Vec<Complex64>,
    d: Vec<Complex64>,
    du: Vec<Complex64>,
    du2: Vec<Complex64>,
    swapped: Vec<bool>,
    norm1: f64,
    symmetric: bool,
}

/// Zero pivot at the given row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SingularPivot(pub usize);

impl TridiagLu {
    /// Factors the matrix with sub-diagonal `lower`, diagonal `diag`, super-diagonal `upper`.
    pub fn factor(lower: &[Complex64], diag: &[Complex64], upper: &[Complex64]) -> Result<Self, SingularPivot> {
        let n = diag.len();
        assert!(n >= 1 && lower.len() + 1 == n && upper.len() + 1 == n);
        let mut norm1 = 0.0f64;
        for c in 0..n {
            let mut col = diag[c].norm();
            if c > 0 {
                col += upper[c - 1].norm();
            }
            if c + 1 < n {
                col += lower[c].norm();
            }
            norm1 = norm1.max(col);
        }
        let symmetric = lower == upper;
        let mut dl = lower.to_vec();
        let mut d = diag.to_vec();
        let mut du = upper.to_vec();
        let mut du2 = vec![Complex64::zero(); n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            if d[i].norm() >= dl[i].norm() {
                if !d[i].is_zero() {
                    let fact = dl[i] / d[i];
                    dl[i] = fact;
                    d[i + 1] -= fact * du[i];
                }
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du[i + 1];
                }
                swapped[i] = true;
            }
        }
        if let Some(i) = d.iter().position(|p| p.is_zero() || !p.is_finite()) {
            return Err(SingularPivot(i));
        }
        Ok(Self { dl, d, du, du2, swapped, norm1, symmetric })
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    pub fn solve_in_place(&self, b: &mut [Complex64]) {
        let n = self.d.len();
        for i in 0..n - 1 {
            if self.swapped[i] {
                let temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - self.dl[i] * b[i];
            } else {
                let l = self.dl[i] * b[i];
                b[i + 1] -= l;
            }
        }
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }

    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// Estimated `||A||_1 ||A^{-1}||_1`. Requires a complex-symmetric matrix so
    /// that `A^{-H} b = conj(A^{-1} conj(b))`; returns `None` otherwise.
    pub fn condition_estimate(&self) -> Option<f64> {
        if !self.symmetric {
            return None;
        }
        let n = self.len();
        let solve_h = |v: &[Complex64]| -> Vec<Complex64> {
            let conj: Vec<Complex64> = v.iter().map(|z| z.conj()).collect();
            self.solve(&conj).into_iter().map(|z| z.conj()).collect()
        };
        let norm1 = |v: &[Complex64]| v.iter().map(|z| z.norm()).sum::<f64>();
        let sign = |v: &[Complex64]| -> Vec<Complex64> {
            v.iter().map(|z| if z.norm() > 0.0 { z / z.norm() } else { Complex64::new(1.0, 0.0) }).collect()
        };
        let mut x = vec![Complex64::new(1.0 / n as f64, 0.0); n];
        let mut y = self.solve(&x);
        let mut est = norm1(&y);
        if n > 1 {
            let mut z = solve_h(&sign(&y));
            let mut last = usize::MAX;
            for _ in 0..5 {
                let j = argmax(&z);
                if j == last {
                    break;
                }
                last = j;
                x.iter_mut().for_each(|v| *v = Complex64::zero());
                x[j] = Complex64::new(1.0, 0.0);
                y = self.solve(&x);
                let next = norm1(&y);
                if next <= est {
                    break;
                }
                est = next;
                z = solve_h(&sign(&y));
            }
            let alt: Vec<Complex64> = (0..n)
                .map(|i| {
                    let s = if i % 2 == 0 { 1.0 } else { -1.0 };
                    Complex64::new(s * (1.0 + i as f64 / (n - 1) as f64), 0.0)
                })
                .collect();
            est = est.max(2.0 * norm1(&self.solve(&alt)) / (3.0 * n as f64));
        }
        Some(est * self.norm1)
    }
}

fn argmax(v: &[Complex64]) -> usize {
    let mut best = 0;
    for (i, z) in v.iter().enumerate() {
        if z.norm() > v[best].norm() {
            best = i;
        }
    }
    best
}
