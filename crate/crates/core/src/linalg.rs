//! Small dense linear algebra helpers: tridiagonal and cyclic-tridiagonal
//! solves for the implicit signal update, pivoted elimination for the
//! turning-operator systems, and a scaling-and-squaring matrix exponential
//! for the stiff collision sub-step.
//!
//! Everything here works on velocity grids with at most a few dozen nodes
//! or on banded spatial systems, so plain `Vec<f64>` storage is enough.

use crate::error::{Result, SimError};

/// Dense row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub n: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    #[inline]
    pub fn add_to(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] += v;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = vec![0.0; n];
        for i in 0..n {
            let row = &self.data[i * n..(i + 1) * n];
            y[i] = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
        y
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        let n = self.n;
        let mut out = Mat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let aik = self.get(i, k);
                if aik == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += aik * other.get(k, j);
                }
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> Mat {
        Mat {
            n: self.n,
            data: self.data.iter().map(|a| a * s).collect(),
        }
    }

    /// Max row sum norm.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| {
                self.data[i * self.n..(i + 1) * self.n]
                    .iter()
                    .map(|a| a.abs())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub fn lu_solve(a: &Mat, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.n;
    if b.len() != n {
        return Err(SimError::Contract(format!(
            "lu_solve: rhs length {} does not match matrix size {}",
            b.len(),
            n
        )));
    }
    let mut m = a.data.clone();
    let mut x = b.to_vec();
    for k in 0..n {
        let mut piv = k;
        let mut best = m[k * n + k].abs();
        for i in (k + 1)..n {
            let cand = m[i * n + k].abs();
            if cand > best {
                best = cand;
                piv = i;
            }
        }
        if best < f64::MIN_POSITIVE.max(1e-300) {
            return Err(SimError::Contract("lu_solve: matrix is singular".into()));
        }
        if piv != k {
            for j in 0..n {
                m.swap(k * n + j, piv * n + j);
            }
            x.swap(k, piv);
        }
        let pivot = m[k * n + k];
        for i in (k + 1)..n {
            let factor = m[i * n + k] / pivot;
            if factor == 0.0 {
                continue;
            }
            m[i * n + k] = 0.0;
            for j in (k + 1)..n {
                m[i * n + j] -= factor * m[k * n + j];
            }
            x[i] -= factor * x[k];
        }
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for j in (i + 1)..n {
            s -= m[i * n + j] * x[j];
        }
        x[i] = s / m[i * n + i];
    }
    Ok(x)
}

/// Estimates the null-space dimension of `a` by elimination with complete
/// pivoting; pivots below `tol` (relative to the largest initial entry)
/// count as zero.
pub fn nullity(a: &Mat, tol: f64) -> usize {
    let n = a.n;
    let mut m = a.data.clone();
    let scale = m.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        return n;
    }
    let threshold = tol * scale;
    let mut rank = 0;
    let mut row_used = vec![false; n];
    let mut col_used = vec![false; n];
    for _ in 0..n {
        // complete pivoting over the untouched submatrix
        let mut best = 0.0;
        let mut bi = usize::MAX;
        let mut bj = usize::MAX;
        for i in 0..n {
            if row_used[i] {
                continue;
            }
            for j in 0..n {
                if col_used[j] {
                    continue;
                }
                let v = m[i * n + j].abs();
                if v > best {
                    best = v;
                    bi = i;
                    bj = j;
                }
            }
        }
        if best <= threshold {
            break;
        }
        rank += 1;
        row_used[bi] = true;
        col_used[bj] = true;
        let pivot = m[bi * n + bj];
        for i in 0..n {
            if row_used[i] {
                continue;
            }
            let factor = m[i * n + bj] / pivot;
            if factor == 0.0 {
                continue;
            }
            for j in 0..n {
                if col_used[j] {
                    continue;
                }
                m[i * n + j] -= factor * m[bi * n + j];
            }
        }
    }
    n - rank
}

/// Solves a tridiagonal system by the Thomas algorithm.
/// `sub[i]` couples row `i` to `x[i-1]` (`sub[0]` ignored), `sup[i]` couples
/// row `i` to `x[i+1]` (`sup[n-1]` ignored).
pub fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if sub.len() != n || sup.len() != n || rhs.len() != n {
        return Err(SimError::Contract(
            "tridiagonal solve: length mismatch".into(),
        ));
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut denom = diag[0];
    if denom.abs() < 1e-300 {
        return Err(SimError::Contract("tridiagonal solve: zero pivot".into()));
    }
    c[0] = sup[0] / denom;
    d[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - sub[i] * c[i - 1];
        if denom.abs() < 1e-300 {
            return Err(SimError::Contract("tridiagonal solve: zero pivot".into()));
        }
        c[i] = if i + 1 < n { sup[i] / denom } else { 0.0 };
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / denom;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    Ok(x)
}

/// Solves a cyclic tridiagonal system (row 0 couples to `x[n-1]` through
/// `sub[0]`, row n-1 couples to `x[0]` through `sup[n-1]`) via the
/// Sherman-Morrison correction of a plain tridiagonal solve.
pub fn solve_cyclic_tridiagonal(
    sub: &[f64],
    diag: &[f64],
    sup: &[f64],
    rhs: &[f64],
) -> Result<Vec<f64>> {
    let n = diag.len();
    if n < 3 {
        return Err(SimError::Contract(
            "cyclic tridiagonal solve needs at least 3 unknowns".into(),
        ));
    }
    // corner entries: row 0 couples to x[n-1] through `top`, row n-1 couples
    // to x[0] through `bottom`; the rank-one update u v^T with
    // u = (gamma, 0, .., bottom) and v = (1, 0, .., top / gamma) restores them
    let top = sub[0];
    let bottom = sup[n - 1];
    if top == 0.0 && bottom == 0.0 {
        return solve_tridiagonal(sub, diag, sup, rhs);
    }
    let gamma = -diag[0];
    let mut diag_mod = diag.to_vec();
    diag_mod[0] -= gamma;
    diag_mod[n - 1] -= top * bottom / gamma;
    let x1 = solve_tridiagonal(sub, &diag_mod, sup, rhs)?;
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = bottom;
    let z = solve_tridiagonal(sub, &diag_mod, sup, &u)?;
    let factor = (x1[0] + top * x1[n - 1] / gamma) / (1.0 + z[0] + top * z[n - 1] / gamma);
    Ok(x1.iter().zip(&z).map(|(xi, zi)| xi - factor * zi).collect())
}

/// Matrix exponential by scaling and squaring with a diagonal Pade
/// approximant. Exact enough for the collision generators used here, whose
/// scaled norm is brought below one half before the Pade step.
pub fn matexp(a: &Mat) -> Mat {
    let n = a.n;
    let norm = a.norm_inf();
    let squarings = if norm > 0.5 {
        ((norm / 0.5).log2().ceil() as i32).max(0) as u32
    } else {
        0
    };
    let scaled = a.scale(0.5f64.powi(squarings as i32));

    // [6/6] diagonal Pade approximant
    const P: usize = 6;
    let mut coeff = [0.0; P + 1];
    coeff[0] = 1.0;
    for k in 1..=P {
        coeff[k] = coeff[k - 1] * (P + 1 - k) as f64 / ((k * (2 * P + 1 - k)) as f64);
    }
    let mut numer = Mat::zeros(n);
    let mut denom = Mat::zeros(n);
    let mut power = Mat::identity(n);
    for (k, &c) in coeff.iter().enumerate() {
        if k > 0 {
            power = power.matmul(&scaled);
        }
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        for idx in 0..n * n {
            numer.data[idx] += c * power.data[idx];
            denom.data[idx] += sign * c * power.data[idx];
        }
    }
    // solve denom * X = numer column by column
    let mut exp = Mat::zeros(n);
    for j in 0..n {
        let col: Vec<f64> = (0..n).map(|i| numer.get(i, j)).collect();
        let x = lu_solve(&denom, &col).expect("Pade denominator is well conditioned");
        for i in 0..n {
            exp.set(i, j, x[i]);
        }
    }
    for _ in 0..squarings {
        exp = exp.matmul(&exp);
    }
    exp
}
