//! Dense vectors and small symmetric-matrix routines.
//!
//! Problem sizes here are desk scale (n up to a few hundred nodes, d up to a
//! few hundred dimensions), so everything is plain `Vec<f64>` with row-major
//! dense matrices. No BLAS.

use crate::error::{Error, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    // Four accumulators: the batch subgradient loop is the hot path of the
    // reference solver and a single serial sum chain is latency bound.
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let j = 4 * i;
        acc[0] += a[j] * b[j];
        acc[1] += a[j + 1] * b[j + 1];
        acc[2] += a[j + 2] * b[j + 2];
        acc[3] += a[j + 3] * b[j + 3];
    }
    let mut tail = 0.0;
    for j in 4 * chunks..a.len() {
        tail += a[j] * b[j];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        s += d * d;
    }
    s.sqrt()
}

/// `y += alpha * x`
pub fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    debug_assert_eq!(y.len(), x.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale(a: &[f64], alpha: f64) -> Vec<f64> {
    a.iter().map(|x| alpha * x).collect()
}

pub fn mean_of(vectors: &[Vec<f64>]) -> Vec<f64> {
    assert!(!vectors.is_empty());
    let d = vectors[0].len();
    let mut out = vec![0.0; d];
    for v in vectors {
        axpy(&mut out, 1.0, v);
    }
    let inv = 1.0 / vectors.len() as f64;
    for x in &mut out {
        *x *= inv;
    }
    out
}

/// Row-major dense square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        SquareMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// `self * other`, both n x n.
    pub fn matmul(&self, other: &SquareMatrix) -> SquareMatrix {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = SquareMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    /// `self * v`
    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n);
        (0..self.n).map(|i| dot(self.row(i), v)).collect()
    }

    /// All eigenvalues of a symmetric matrix, sorted descending.
    ///
    /// Cyclic Jacobi rotations; adequate and robust for the n <= 512 dense
    /// path. Fails on asymmetric input rather than silently symmetrizing.
    pub fn symmetric_eigenvalues(&self) -> Result<Vec<f64>> {
        let asym = self.max_asymmetry();
        if asym > 1e-9 {
            return Err(Error::AsymmetricMatrix { max_abs: asym });
        }
        let n = self.n;
        let mut a = self.clone();
        // Symmetrize roundoff so rotations stay exact.
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (a.get(i, j) + a.get(j, i));
                a.set(i, j, v);
                a.set(j, i, v);
            }
        }
        let off = |m: &SquareMatrix| -> f64 {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        s += m.get(i, j) * m.get(i, j);
                    }
                }
            }
            s.sqrt()
        };
        let scale_ref: f64 = (0..n).map(|i| a.get(i, i).abs()).fold(1.0, f64::max);
        let tol = 1e-14 * scale_ref * n as f64;
        for _sweep in 0..64 {
            if off(&a) <= tol {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a.get(p, q);
                    if apq.abs() <= tol / (n * n) as f64 {
                        continue;
                    }
                    let app = a.get(p, p);
                    let aqq = a.get(q, q);
                    let theta = (aqq - app) / (2.0 * apq);
                    let t = if theta >= 0.0 {
                        1.0 / (theta + (1.0 + theta * theta).sqrt())
                    } else {
                        1.0 / (theta - (1.0 + theta * theta).sqrt())
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a.get(k, p);
                        let akq = a.get(k, q);
                        a.set(k, p, c * akp - s * akq);
                        a.set(k, q, s * akp + c * akq);
                    }
                    for k in 0..n {
                        let apk = a.get(p, k);
                        let aqk = a.get(q, k);
                        a.set(p, k, c * apk - s * aqk);
                        a.set(q, k, s * apk + c * aqk);
                    }
                }
            }
        }
        let mut eig: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
        eig.sort_by(|x, y| y.partial_cmp(x).unwrap());
        Ok(eig)
    }
}

/// Extreme eigenvalues `(lambda2, lambda_min)` of a symmetric stochastic-like
/// matrix P restricted to the subspace orthogonal to the all-ones vector,
/// via power iteration. Returns `None` when that subspace is trivial (n = 1).
///
/// Uses the shifted operators `P + I` (spectrum in [0, 2], dominant value
/// `lambda2 + 1`) and `I - P` (dominant `1 - lambda_min`), which sidesteps the
/// non-convergence of plain power iteration on spectra with matched +/- pairs.
pub fn deflated_extreme_eigenvalues(p: &SquareMatrix, max_iter: usize) -> Option<(f64, f64)> {
    if p.n() < 2 {
        return None;
    }
    let top = deflated_power(p, 1.0, max_iter);
    let bottom = deflated_power(p, -1.0, max_iter);
    Some((top - 1.0, 1.0 - bottom))
}

/// Largest eigenvalue of `v -> I v + sign * P v` on the mean-zero subspace.
fn deflated_power(p: &SquareMatrix, sign: f64, max_iter: usize) -> f64 {
    let n = p.n();
    let mut v: Vec<f64> = (0..n).map(|i| ((i + 1) as f64).sin() + 0.5).collect();
    remove_mean(&mut v);
    let nv = norm(&v);
    if nv < 1e-300 {
        return 0.0;
    }
    for x in &mut v {
        *x /= nv;
    }
    let mut lambda = f64::NAN;
    for _ in 0..max_iter {
        let pv = p.matvec(&v);
        let mut w = v.clone();
        axpy(&mut w, sign, &pv);
        remove_mean(&mut w);
        let rayleigh = dot(&v, &w);
        let nw = norm(&w);
        if nw < 1e-300 {
            // Operator annihilates the deflated subspace: eigenvalue 0.
            return 0.0;
        }
        for x in &mut w {
            *x /= nw;
        }
        if (rayleigh - lambda).abs() <= 1e-14 * rayleigh.abs().max(1.0) {
            return rayleigh;
        }
        lambda = rayleigh;
        v = w;
    }
    lambda
}

fn remove_mean(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    for x in v.iter_mut() {
        *x -= mean;
    }
}
