//! Banded LU factorization for the 5-point finite-volume stencil.
//!
//! The assembled matrix is an M-matrix (positive diagonal, non-positive
//! off-diagonals, weak diagonal dominance with at least one Dirichlet row per
//! connected block), so Gaussian elimination without pivoting is stable and
//! fill-in stays inside the band.

use crate::thermal::ThermalError;
use crate::Scalar;

/// Five-point operator `A x` with `A[i,i] = diag[i]` and negative couplings
/// to the axial (`west`/`east`, offset `band`) and radial (`south`/`north`,
/// offset 1) neighbours.
#[derive(Debug, Clone)]
pub struct Stencil<T> {
    pub band: usize,
    pub diag: Vec<T>,
    pub west: Vec<T>,
    pub east: Vec<T>,
    pub south: Vec<T>,
    pub north: Vec<T>,
}

impl<T: Scalar> Stencil<T> {
    pub fn zeros(n: usize, band: usize) -> Self {
        Self {
            band,
            diag: vec![T::zero(); n],
            west: vec![T::zero(); n],
            east: vec![T::zero(); n],
            south: vec![T::zero(); n],
            north: vec![T::zero(); n],
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// `b - A·x`, accumulated in double precision.
    pub fn residual(&self, x: &[T], b: &[T]) -> Vec<f64> {
        let n = self.len();
        let p = self.band;
        let f = |v: T| v.as_f64();
        (0..n)
            .map(|i| {
                let mut y = f(b[i]) - f(self.diag[i]) * f(x[i]);
                if i >= p {
                    y += f(self.west[i]) * f(x[i - p]);
                }
                if i + p < n {
                    y += f(self.east[i]) * f(x[i + p]);
                }
                if i >= 1 {
                    y += f(self.south[i]) * f(x[i - 1]);
                }
                if i + 1 < n {
                    y += f(self.north[i]) * f(x[i + 1]);
                }
                y
            })
            .collect()
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        let n = self.len();
        let p = self.band;
        (0..n)
            .map(|i| {
                let mut y = self.diag[i] * x[i];
                if i >= p {
                    y = y - self.west[i] * x[i - p];
                }
                if i + p < n {
                    y = y - self.east[i] * x[i + p];
                }
                if i >= 1 {
                    y = y - self.south[i] * x[i - 1];
                }
                if i + 1 < n {
                    y = y - self.north[i] * x[i + 1];
                }
                y
            })
            .collect()
    }
}

/// In-place LU factors of a banded matrix with equal lower/upper bandwidth.
#[derive(Debug, Clone)]
pub struct BandedLu<T> {
    n: usize,
    band: usize,
    data: Vec<T>,
}

impl<T: Scalar> BandedLu<T> {
    fn width(&self) -> usize {
        2 * self.band + 1
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        i * self.width() + j + self.band - i
    }

    pub fn factor(stencil: &Stencil<T>) -> Result<Self, ThermalError> {
        let n = stencil.len();
        let p = stencil.band;
        let mut lu = Self {
            n,
            band: p,
            data: vec![T::zero(); n * (2 * p + 1)],
        };
        for i in 0..n {
            let d = lu.at(i, i);
            lu.data[d] = stencil.diag[i];
            if i >= p {
                let k = lu.at(i, i - p);
                lu.data[k] = -stencil.west[i];
            }
            if i + p < n {
                let k = lu.at(i, i + p);
                lu.data[k] = -stencil.east[i];
            }
            if i >= 1 {
                let k = lu.at(i, i - 1);
                lu.data[k] = -stencil.south[i];
            }
            if i + 1 < n {
                let k = lu.at(i, i + 1);
                lu.data[k] = -stencil.north[i];
            }
        }

        for k in 0..n {
            let pivot = lu.data[lu.at(k, k)];
            if !(pivot.abs() > T::zero()) || !pivot.is_finite() {
                return Err(ThermalError::Singular { row: k });
            }
            let last = (k + p).min(n - 1);
            for i in k + 1..=last {
                let ik = lu.at(i, k);
                if lu.data[ik] == T::zero() {
                    continue;
                }
                let l = lu.data[ik] / pivot;
                lu.data[ik] = l;
                let row_k = lu.at(k, k);
                let row_i = lu.at(i, k);
                for off in 1..=last - k {
                    let u = lu.data[row_k + off];
                    lu.data[row_i + off] = lu.data[row_i + off] - l * u;
                }
            }
        }
        Ok(lu)
    }

    pub fn solve(&self, rhs: &[T]) -> Vec<T> {
        let n = self.n;
        let p = self.band;
        let mut x = rhs.to_vec();
        for i in 0..n {
            let start = i.saturating_sub(p);
            let mut acc = x[i];
            for (j, xj) in x.iter().enumerate().take(i).skip(start) {
                acc = acc - self.data[self.at(i, j)] * *xj;
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let end = (i + p).min(n - 1);
            let mut acc = x[i];
            for (j, xj) in x.iter().enumerate().take(end + 1).skip(i + 1) {
                acc = acc - self.data[self.at(i, j)] * *xj;
            }
            x[i] = acc / self.data[self.at(i, i)];
        }
        x
    }
}

fn norm<T: Scalar>(v: &[T]) -> T {
    v.iter().map(|&x| x * x).sum::<T>().sqrt()
}

/// Direct solve followed by iterative refinement until the relative residual
/// drops below `tol`. Residuals are formed in double precision so that
/// refinement also pays off for `f32`.
pub fn solve_refined<T: Scalar>(
    stencil: &Stencil<T>,
    lu: &BandedLu<T>,
    rhs: &[T],
    tol: T,
) -> Result<(Vec<T>, T), ThermalError> {
    let b_norm = norm(rhs);
    if b_norm == T::zero() {
        return Ok((vec![T::zero(); rhs.len()], T::zero()));
    }
    let mut x = lu.solve(rhs);
    let mut history = Vec::new();
    for _ in 0..4 {
        let r = stencil.residual(&x, rhs);
        let rel = r.iter().map(|v| v * v).sum::<f64>().sqrt() / b_norm.as_f64();
        history.push(rel);
        if rel <= tol.as_f64() {
            return Ok((x, T::of(rel)));
        }
        let r: Vec<T> = r.into_iter().map(T::of).collect();
        let dx = lu.solve(&r);
        for (xi, d) in x.iter_mut().zip(dx) {
            *xi = *xi + d;
        }
    }
    Err(ThermalError::NotConverged { residuals: history })
}
