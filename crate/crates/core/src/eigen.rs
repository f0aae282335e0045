//! Symmetric eigensolver used as the numerical oracle for PSD checks.
//!
//! The default path is the cyclic Jacobi method: a sequence of plane rotations,
//! each annihilating one off-diagonal pair, swept row by row until the
//! off-diagonal mass is negligible. It is slow (roughly `8m³` flops per sweep)
//! but very accurate. Matrices above [`EigenOptions::jacobi_max_dim`] go
//! through Householder tridiagonalisation followed by implicit QL, which is
//! an order of magnitude cheaper at the certificate sizes we densify.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{DenseSym, Matrix};

/// Default cap on the dimension of a matrix handed to the eigensolver.
pub const DEFAULT_MAX_DIM: usize = 2048;
pub const DEFAULT_MAX_SWEEPS: usize = 100;

/// Eigenvalues sorted ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
}

impl Spectrum {
    pub fn from_unsorted(mut eigenvalues: Vec<f64>) -> Self {
        eigenvalues.sort_by(f64::total_cmp);
        Spectrum { eigenvalues }
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(f64::NAN)
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(f64::NAN)
    }

    pub fn sum(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    /// Largest pointwise gap between two sorted multisets; `None` if their
    /// sizes differ.
    pub fn max_abs_diff(&self, other: &Spectrum) -> Option<f64> {
        if self.len() != other.len() {
            return None;
        }
        Some(
            self.eigenvalues
                .iter()
                .zip(&other.eigenvalues)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
        )
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EigenOptions {
    /// Relative convergence threshold on the off-diagonal Frobenius norm.
    pub tol: f64,
    pub max_sweeps: usize,
    pub max_dim: usize,
    /// Largest dimension solved by Jacobi; bigger inputs use tridiagonal QL.
    pub jacobi_max_dim: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            tol: 1e-14,
            max_sweeps: DEFAULT_MAX_SWEEPS,
            max_dim: DEFAULT_MAX_DIM,
            jacobi_max_dim: 400,
        }
    }
}

impl EigenOptions {
    pub fn with_tol(tol: f64) -> Self {
        EigenOptions {
            tol,
            ..Default::default()
        }
    }

    pub fn jacobi_only(mut self) -> Self {
        self.jacobi_max_dim = usize::MAX;
        self
    }
}

/// Eigenvalues of a symmetric matrix.
pub fn sym_eigs(m: &DenseSym, tol: f64) -> Result<Spectrum> {
    sym_eigs_with(m, &EigenOptions::with_tol(tol))
}

pub fn sym_eigs_with(m: &DenseSym, opts: &EigenOptions) -> Result<Spectrum> {
    check_args(m, opts)?;
    if m.dim() <= opts.jacobi_max_dim {
        let (values, _) = jacobi(m, opts, false)?;
        Ok(Spectrum::from_unsorted(values))
    } else {
        tridiagonal_ql(m).map(Spectrum::from_unsorted)
    }
}

/// Eigenpairs by Jacobi; column `k` of the returned matrix is the eigenvector
/// for the `k`-th returned eigenvalue (not sorted).
pub fn sym_eigen_pairs(m: &DenseSym, opts: &EigenOptions) -> Result<(Vec<f64>, Matrix)> {
    check_args(m, opts)?;
    let (values, vectors) = jacobi(m, opts, true)?;
    Ok((values, vectors.expect("vectors requested")))
}

fn check_args(m: &DenseSym, opts: &EigenOptions) -> Result<()> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(
            "eigen tolerance must be positive".into(),
        ));
    }
    if m.dim() > opts.max_dim {
        return Err(Error::Sizing {
            what: "eigensolver dimension",
            requested: m.dim(),
            cap: opts.max_dim,
        });
    }
    Ok(())
}

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for i in 0..n {
        for (j, x) in a.row(i).iter().enumerate() {
            if i != j {
                s += x * x;
            }
        }
    }
    s.sqrt()
}

fn jacobi(
    m: &DenseSym,
    opts: &EigenOptions,
    want_vectors: bool,
) -> Result<(Vec<f64>, Option<Matrix>)> {
    let n = m.dim();
    let mut a = m.as_matrix().clone();
    let mut v = want_vectors.then(|| Matrix::identity(n));
    let scale = a.norm_frobenius();
    if n == 1 || scale == 0.0 {
        return Ok(((0..n).map(|i| a[(i, i)]).collect(), v));
    }
    let target = opts.tol * scale;
    let mut row_p = vec![0.0; n];
    let mut row_q = vec![0.0; n];

    for _sweep in 0..opts.max_sweeps {
        let off = off_diagonal_norm(&a);
        if off <= target {
            return Ok(((0..n).map(|i| a[(i, i)]).collect(), v));
        }
        // entries this small cannot move any eigenvalue by a representable amount
        let skip = f64::EPSILON * 1e-3 * scale / n as f64;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() <= skip {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.is_finite() {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                } else {
                    0.0
                };
                if t == 0.0 {
                    continue;
                }
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                let data = a.as_mut_slice();
                row_p.copy_from_slice(&data[p * n..(p + 1) * n]);
                row_q.copy_from_slice(&data[q * n..(q + 1) * n]);
                for k in 0..n {
                    let xp = row_p[k];
                    let xq = row_q[k];
                    data[p * n + k] = c * xp - s * xq;
                    data[q * n + k] = s * xp + c * xq;
                }
                data[p * n + p] = app - t * apq;
                data[q * n + q] = aqq + t * apq;
                data[p * n + q] = 0.0;
                data[q * n + p] = 0.0;
                for k in 0..n {
                    if k != p && k != q {
                        data[k * n + p] = data[p * n + k];
                        data[k * n + q] = data[q * n + k];
                    }
                }

                if let Some(v) = v.as_mut() {
                    let vd = v.as_mut_slice();
                    for k in 0..n {
                        let xp = vd[k * n + p];
                        let xq = vd[k * n + q];
                        vd[k * n + p] = c * xp - s * xq;
                        vd[k * n + q] = s * xp + c * xq;
                    }
                }
            }
        }
    }
    let off = off_diagonal_norm(&a);
    if off <= target {
        return Ok(((0..n).map(|i| a[(i, i)]).collect(), v));
    }
    Err(Error::NotConverged {
        sweeps: opts.max_sweeps,
        off_norm: off,
    })
}

/// Householder reduction to tridiagonal form (eigenvalues only), then implicit
/// QL with Wilkinson shifts.
fn tridiagonal_ql(m: &DenseSym) -> Result<Vec<f64>> {
    let n = m.dim();
    let mut a = m.as_matrix().clone();
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut p = vec![0.0; n];

    // Reduce columns 0..n-2. After step k, a[k+1.., k] holds the Householder
    // vector and the trailing block has been updated.
    for k in 0..n.saturating_sub(2) {
        let alpha_norm: f64 = (k + 1..n)
            .map(|i| a[(i, k)] * a[(i, k)])
            .sum::<f64>()
            .sqrt();
        diag[k] = a[(k, k)];
        if alpha_norm == 0.0 {
            off[k] = 0.0;
            continue;
        }
        let x0 = a[(k + 1, k)];
        let alpha = if x0 > 0.0 { -alpha_norm } else { alpha_norm };
        off[k] = alpha;
        // v = x - alpha e1, H = I - 2 v vᵀ / (vᵀv)
        for i in k + 1..n {
            w[i] = a[(i, k)];
        }
        w[k + 1] -= alpha;
        let vtv: f64 = (k + 1..n).map(|i| w[i] * w[i]).sum();
        if vtv == 0.0 {
            continue;
        }
        let beta = 2.0 / vtv;
        // p = beta * A v on the trailing block
        {
            let data = a.as_slice();
            for i in k + 1..n {
                let row = &data[i * n + k + 1..i * n + n];
                let s: f64 = row.iter().zip(&w[k + 1..n]).map(|(x, y)| x * y).sum();
                p[i] = beta * s;
            }
        }
        // q = p - (beta/2)(pᵀv) v ; A <- A - v qᵀ - q vᵀ
        let ptv: f64 = (k + 1..n).map(|i| p[i] * w[i]).sum();
        let kk = 0.5 * beta * ptv;
        for i in k + 1..n {
            p[i] -= kk * w[i];
        }
        let data = a.as_mut_slice();
        for i in k + 1..n {
            let (wi, pi) = (w[i], p[i]);
            let row = &mut data[i * n + k + 1..i * n + n];
            for (j, x) in row.iter_mut().enumerate() {
                let jj = k + 1 + j;
                *x -= wi * p[jj] + pi * w[jj];
            }
        }
    }
    if n >= 2 {
        diag[n - 2] = a[(n - 2, n - 2)];
        off[n - 2] = a[(n - 1, n - 2)];
    }
    diag[n - 1] = a[(n - 1, n - 1)];
    off[n - 1] = 0.0;

    tql(&mut diag, &mut off)?;
    Ok(diag)
}

/// Implicit QL on a symmetric tridiagonal matrix; `e[i]` couples `d[i]` and
/// `d[i+1]`. Eigenvalues are left in `d`.
fn tql(d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    const MAX_ITERS: usize = 60;
    // absolute floor so couplings between zero eigenvalues still deflate
    let norm = (0..n).map(|i| d[i].abs() + e[i].abs()).fold(0.0, f64::max);
    let floor = 1e-6 * norm;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd.max(floor) {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > MAX_ITERS {
                return Err(Error::NotConverged {
                    sweeps: iter,
                    off_norm: e[l].abs(),
                });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut deflated = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn both(m: &DenseSym) -> (Spectrum, Spectrum) {
        let j = sym_eigs_with(m, &EigenOptions::default().jacobi_only()).unwrap();
        let mut opts = EigenOptions::default();
        opts.jacobi_max_dim = 0;
        let t = sym_eigs_with(m, &opts).unwrap();
        (j, t)
    }

    #[test]
    fn identity_and_ones() {
        {
            let (s, _) = both(&DenseSym::identity(3));
            assert_eq!(s.eigenvalues(), &[1.0, 1.0, 1.0]);
        }
        let (j, t) = both(&DenseSym::ones(4));
        for s in [j, t] {
            let expected = [0.0, 0.0, 0.0, 4.0];
            for (a, b) in s.eigenvalues().iter().zip(expected) {
                assert!((a - b).abs() < 1e-12, "{s:?}");
            }
        }
    }

    #[test]
    fn ql_deflates_repeated_zero_eigenvalues() {
        let m = DenseSym::from_upper(60, |i, j| if i / 6 == j / 6 { 1.0 } else { 0.0 });
        let (_, t) = both(&m);
        assert_eq!(
            t.eigenvalues().iter().filter(|x| x.abs() < 1e-12).count(),
            50
        );
        assert!(t.eigenvalues()[50..]
            .iter()
            .all(|x| (x - 6.0).abs() < 1e-12));
    }

    #[test]
    fn cycle_adjacency_six() {
        let m = DenseSym::from_upper(6, |i, j| {
            let d = (j + 6 - i) % 6;
            if d == 1 || d == 5 {
                1.0
            } else {
                0.0
            }
        });
        let (j, t) = both(&m);
        for s in [j, t] {
            let expected = [-2.0, -1.0, -1.0, 1.0, 1.0, 2.0];
            for (a, b) in s.eigenvalues().iter().zip(expected) {
                assert!((a - b).abs() < 1e-12, "{s:?}");
            }
        }
    }

    #[test]
    fn one_by_one_and_two_by_two() {
        let s = sym_eigs(&DenseSym::from_upper(1, |_, _| -3.5), 1e-12).unwrap();
        assert_eq!(s.eigenvalues(), &[-3.5]);
        let m = DenseSym::from_upper(2, |i, j| if i == j { 2.0 } else { 1.0 });
        let (j, t) = both(&m);
        for s in [j, t] {
            assert!((s.eigenvalues()[0] - 1.0).abs() < 1e-14);
            assert!((s.eigenvalues()[1] - 3.0).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(sym_eigs(&DenseSym::identity(2), 0.0).is_err());
        let opts = EigenOptions {
            max_dim: 3,
            ..Default::default()
        };
        assert!(matches!(
            sym_eigs_with(&DenseSym::identity(4), &opts),
            Err(Error::Sizing { .. })
        ));
    }

    #[test]
    fn sweep_limit_reports_non_convergence() {
        let m = DenseSym::from_upper(8, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        let opts = EigenOptions {
            max_sweeps: 1,
            tol: 1e-15,
            ..Default::default()
        };
        match sym_eigs_with(&m, &opts.jacobi_only()) {
            Err(Error::NotConverged {
                sweeps: 1,
                off_norm,
            }) => assert!(off_norm > 0.0),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn eigenpair_residuals() {
        let m = DenseSym::from_upper(12, |i, j| ((i + 1) * (j + 2) % 7) as f64 / 3.0);
        let (values, vectors) = sym_eigen_pairs(&m, &EigenOptions::with_tol(1e-13)).unwrap();
        let tol = 1e-12 * m.as_matrix().norm_inf();
        for (k, lambda) in values.iter().enumerate() {
            let v: Vec<f64> = (0..12).map(|i| vectors[(i, k)]).collect();
            let mv = m.as_matrix().mat_vec(&v);
            let res = mv
                .iter()
                .zip(&v)
                .map(|(a, b)| (a - lambda * b).abs())
                .fold(0.0, f64::max);
            assert!(res <= tol, "residual {res} for eigenvalue {lambda}");
        }
    }
}
