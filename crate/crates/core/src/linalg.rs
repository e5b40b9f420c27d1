//! Dense symmetric eigensolver: Householder tridiagonalization followed by the
//! implicit QL iteration with Wilkinson-style shifts.
//!
//! Eigenvectors are kept as *rows* of a row-major buffer so that every Givens
//! rotation of the QL sweep touches two contiguous slices.

use crate::error::{Error, Result};

/// Upper bound on QL sweeps spent on a single eigenvalue.
const MAX_QL_SWEEPS: usize = 60;

pub(crate) struct RawEigen {
    /// Eigenvalues in the order produced by the QL iteration (unsorted).
    pub values: Vec<f64>,
    /// Row `i` holds the unit eigenvector for `values[i]`.
    pub vectors: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Decompose the symmetric `n`×`n` row-major matrix `a` (consumed).
pub(crate) fn symmetric_eigen(mut a: Vec<f64>, n: usize) -> Result<RawEigen> {
    debug_assert_eq!(a.len(), n * n);
    if n == 0 {
        return Ok(RawEigen {
            values: vec![],
            vectors: vec![],
        });
    }
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    let mut tau = vec![0.0; n];
    tridiagonalize(&mut a, n, &mut d, &mut e, &mut tau);
    let q = accumulate_reflectors(&a, n, &tau);
    // Rows of `m` are the columns of Q.
    let mut m = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..n {
            m[c * n + r] = q[r * n + c];
        }
    }
    drop(q);
    tridiagonal_ql(&mut d, &mut e, &mut m, n)?;
    Ok(RawEigen {
        values: d,
        vectors: m,
    })
}

/// Reduce `a` to tridiagonal form `Q^T A Q = T`. On return `d` is the diagonal of
/// `T`, `e[j]` couples `j` and `j + 1`, and row `j` of `a` stores the Householder
/// vector (entries `j+1..n`, leading entry implicitly 1) with scalar `tau[j]`.
fn tridiagonalize(a: &mut [f64], n: usize, d: &mut [f64], e: &mut [f64], tau: &mut [f64]) {
    let mut v = vec![0.0; n];
    let mut w = vec![0.0; n];
    for j in 0..n.saturating_sub(2) {
        d[j] = a[j * n + j];
        let len = n - j - 1;
        let x = &a[j * n + j + 1..(j + 1) * n];
        let alpha = x[0];
        let xnorm = x[1..].iter().map(|t| t * t).sum::<f64>().sqrt();
        if xnorm == 0.0 {
            tau[j] = 0.0;
            e[j] = alpha;
            continue;
        }
        let beta = -alpha.hypot(xnorm).copysign(alpha);
        let t = (beta - alpha) / beta;
        let scale = 1.0 / (alpha - beta);
        let v = &mut v[..len];
        v[0] = 1.0;
        for (vi, xi) in v[1..].iter_mut().zip(&x[1..]) {
            *vi = xi * scale;
        }
        tau[j] = t;
        e[j] = beta;

        // w = tau * B v - (tau/2)(v' tau B v) v, B the trailing block.
        let w = &mut w[..len];
        for r in 0..len {
            let row = (j + 1 + r) * n + j + 1;
            w[r] = t * dot(&a[row..row + len], v);
        }
        let kk = -0.5 * t * dot(w, v);
        for (wi, vi) in w.iter_mut().zip(v.iter()) {
            *wi += kk * vi;
        }
        for r in 0..len {
            let row = (j + 1 + r) * n + j + 1;
            let (vr, wr) = (v[r], w[r]);
            for (c, cell) in a[row..row + len].iter_mut().enumerate() {
                *cell -= vr * w[c] + wr * v[c];
            }
        }
        a[j * n + j + 1..(j + 1) * n].copy_from_slice(v);
    }
    if n >= 2 {
        d[n - 2] = a[(n - 2) * n + n - 2];
        e[n - 2] = a[(n - 2) * n + n - 1];
        tau[n - 2] = 0.0;
    }
    d[n - 1] = a[(n - 1) * n + n - 1];
    e[n - 1] = 0.0;
    tau[n - 1] = 0.0;
}

/// Form `Q = H_0 H_1 ... H_{n-3}` (row-major) from the stored reflectors.
fn accumulate_reflectors(a: &[f64], n: usize, tau: &[f64]) -> Vec<f64> {
    let mut q = vec![0.0; n * n];
    for i in 0..n {
        q[i * n + i] = 1.0;
    }
    let mut u = vec![0.0; n];
    for j in (0..n.saturating_sub(2)).rev() {
        let t = tau[j];
        if t == 0.0 {
            continue;
        }
        let len = n - j - 1;
        let v = &a[j * n + j + 1..(j + 1) * n];
        let u = &mut u[..len];
        u.iter_mut().for_each(|x| *x = 0.0);
        for r in 0..len {
            let row = (j + 1 + r) * n + j + 1;
            let vr = v[r];
            for (uc, qc) in u.iter_mut().zip(&q[row..row + len]) {
                *uc += vr * qc;
            }
        }
        for r in 0..len {
            let row = (j + 1 + r) * n + j + 1;
            let f = t * v[r];
            for (qc, uc) in q[row..row + len].iter_mut().zip(u.iter()) {
                *qc -= f * uc;
            }
        }
    }
    q
}

/// Implicit QL on the tridiagonal `(d, e)`; rotations are applied to the rows of
/// `m`. Follows the EISPACK `tql2` recurrence.
fn tridiagonal_ql(d: &mut [f64], e: &mut [f64], m: &mut [f64], n: usize) -> Result<()> {
    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut mm = l;
        while mm < n {
            if e[mm].abs() <= eps * tst1 {
                break;
            }
            mm += 1;
        }
        let mm = mm.min(n - 1);
        if mm > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_QL_SWEEPS {
                    return Err(Error::NoConvergence {
                        index: l,
                        iterations: iter - 1,
                    });
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let h = g - d[l];
                for di in d[l + 2..n].iter_mut() {
                    *di -= h;
                }
                f += h;

                p = d[mm];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..mm).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    let h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    let (lo, hi) = m.split_at_mut((i + 1) * n);
                    let row_i = &mut lo[i * n..];
                    let row_next = &mut hi[..n];
                    for (a, b) in row_i.iter_mut().zip(row_next.iter_mut()) {
                        let hb = *b;
                        *b = s * *a + c * hb;
                        *a = c * *a - s * hb;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}
