//! A small ADMM solver for tiny SDPs, used to corroborate the certificate
//! bounds and the three-vertex value of the reduced SDP.
//!
//! The iterate is split three ways: `X` on the affine constraint set, `W` on
//! the PSD cone and `Z` on the nonnegative orthant, with consensus
//! `X = W = Z`. The reported matrix is the cone iterate (`Z` when
//! nonnegativity is required), so one cone holds exactly and the other
//! constraints hold to the reported residuals. There is no dual
//! certificate; the objective value is corroboration, not proof.
//!
//! The assignment-type problems here have no strictly feasible point, which
//! stalls plain ADMM. Problems may therefore carry a face basis and a zero
//! mask implied by their constraints, and the cone projections respect them.

use serde::{Deserialize, Serialize};

use crate::eigen::{sym_eigen_pairs, sym_eigs, EigenOptions};
use crate::error::{invalid, Error, Result};
use crate::instance::SimplicialInstance;
use crate::matrix::{trace_inner, DenseSym, Matrix};
use crate::reduced::{build_reduction, gap_record, Reduction};
use crate::sigfig::f64_str;

/// Largest problem dimension `solve` accepts.
pub const MAX_SOLVER_DIM: usize = 64;
/// Largest reduced size `n` that `encode_reduced` accepts.
pub const MAX_ENCODE_N: usize = 6;

mod sym_rows {
    use super::*;
    use crate::sigfig::{format17, parse17};
    use serde::{de::Error as _, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &DenseSym, s: S) -> std::result::Result<S::Ok, S::Error> {
        let n = m.dim();
        let rows: Vec<Vec<String>> = (0..n)
            .map(|i| (0..n).map(|j| format17(m[(i, j)])).collect())
            .collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<DenseSym, D::Error> {
        let rows = Vec::<Vec<String>>::deserialize(d)?;
        let parsed = rows
            .iter()
            .map(|r| {
                r.iter()
                    .map(|x| parse17(x).map_err(D::Error::custom))
                    .collect()
            })
            .collect::<std::result::Result<Vec<Vec<f64>>, _>>()?;
        let m = Matrix::from_rows(&parsed).map_err(D::Error::custom)?;
        DenseSym::try_from_matrix(m).map_err(D::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    #[serde(with = "sym_rows")]
    pub a: DenseSym,
    #[serde(with = "f64_str")]
    pub b: f64,
}

mod opt_rows {
    use super::*;
    use crate::sigfig::{format17, parse17};
    use serde::{de::Error as _, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(
        m: &Option<Matrix>,
        s: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        m.as_ref()
            .map(|m| {
                (0..m.rows())
                    .map(|i| m.row(i).iter().map(|x| format17(*x)).collect())
                    .collect::<Vec<Vec<String>>>()
            })
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<Option<Matrix>, D::Error> {
        let rows = Option::<Vec<Vec<String>>>::deserialize(d)?;
        rows.map(|rows| {
            let parsed = rows
                .iter()
                .map(|r| {
                    r.iter()
                        .map(|x| parse17(x).map_err(D::Error::custom))
                        .collect()
                })
                .collect::<std::result::Result<Vec<Vec<f64>>, _>>()?;
            Matrix::from_rows(&parsed).map_err(D::Error::custom)
        })
        .transpose()
    }
}

/// `min ⟨C, Y⟩` subject to `⟨A_i, Y⟩ = b_i` and the selected cones.
///
/// Two optional restrictions must already be implied by the constraints;
/// they only help the solver. `face` has orthonormal columns spanning a
/// subspace that contains the range of every feasible `Y`. `zero_mask`
/// marks entries that every feasible `Y` has equal to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdpProblem {
    pub dim: usize,
    #[serde(with = "sym_rows")]
    pub objective: DenseSym,
    pub constraints: Vec<Constraint>,
    pub psd: bool,
    pub nonneg: bool,
    #[serde(default, with = "opt_rows")]
    pub face: Option<Matrix>,
    #[serde(default)]
    pub zero_mask: Option<Vec<bool>>,
}

impl SdpProblem {
    pub fn new(
        objective: DenseSym,
        constraints: Vec<Constraint>,
        psd: bool,
        nonneg: bool,
    ) -> Result<Self> {
        let dim = objective.dim();
        if let Some(c) = constraints.iter().find(|c| c.a.dim() != dim) {
            return Err(Error::DimensionMismatch(format!(
                "constraint of dimension {} in a problem of dimension {dim}",
                c.a.dim()
            )));
        }
        Ok(SdpProblem {
            dim,
            objective,
            constraints,
            psd,
            nonneg,
            face: None,
            zero_mask: None,
        })
    }

    pub fn with_face(mut self, face: Matrix) -> Result<Self> {
        if face.rows() != self.dim || face.cols() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "face basis is {}x{} for a problem of dimension {}",
                face.rows(),
                face.cols(),
                self.dim
            )));
        }
        self.face = Some(face);
        Ok(self)
    }

    pub fn with_zero_mask(mut self, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != self.dim * self.dim {
            return Err(Error::DimensionMismatch(
                "zero mask must cover every entry".into(),
            ));
        }
        self.zero_mask = Some(mask);
        Ok(self)
    }

    pub fn objective_at(&self, y: &DenseSym) -> Result<f64> {
        trace_inner(&self.objective, y)
    }

    pub fn max_equality_residual(&self, y: &DenseSym) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for c in &self.constraints {
            worst = worst.max((trace_inner(&c.a, y)? - c.b).abs());
        }
        Ok(worst)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdpSolution {
    #[serde(with = "sym_rows")]
    pub y_hat: DenseSym,
    #[serde(with = "f64_str")]
    pub objective_value: f64,
    #[serde(with = "f64_str")]
    pub max_equality_residual: f64,
    #[serde(with = "f64_str")]
    pub min_eigenvalue: f64,
    #[serde(with = "f64_str")]
    pub min_entry: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub eq_tol: f64,
    pub psd_tol: f64,
    pub nn_tol: f64,
    /// Bound on the change of the cone iterates between checks, scaled by
    /// the penalty; stands in for dual feasibility.
    pub dual_tol: f64,
    pub max_iters: usize,
    pub rho: f64,
    pub check_every: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            eq_tol: 1e-6,
            psd_tol: 1e-7,
            nn_tol: 1e-9,
            dual_tol: 1e-7,
            max_iters: 200_000,
            rho: 1.0,
            check_every: 25,
        }
    }
}

/// Orthogonal projection onto `{Y : ⟨A_i, Y⟩ = b_i}` in the Frobenius
/// inner product, through the pseudo-inverse of the Gram matrix so that
/// redundant constraints are harmless.
struct AffineProjector {
    rows: Vec<Vec<f64>>,
    b: Vec<f64>,
    gram_pinv: Matrix,
}

impl AffineProjector {
    fn new(p: &SdpProblem) -> Result<Self> {
        let rows: Vec<Vec<f64>> = p
            .constraints
            .iter()
            .map(|c| c.a.as_matrix().as_slice().to_vec())
            .collect();
        let b = p.constraints.iter().map(|c| c.b).collect();
        let k = rows.len();
        let gram_pinv = if k == 0 {
            Matrix::zeros(0, 0)
        } else {
            let gram = DenseSym::from_upper(k, |i, j| dot(&rows[i], &rows[j]));
            let (vals, vecs) = sym_eigen_pairs(&gram, &EigenOptions::with_tol(1e-15))?;
            let top = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let cut = top * 1e-12 * k as f64;
            Matrix::from_fn(k, k, |i, j| {
                (0..k)
                    .filter(|&t| vals[t].abs() > cut)
                    .map(|t| vecs[(i, t)] * vecs[(j, t)] / vals[t])
                    .sum()
            })
        };
        Ok(AffineProjector { rows, b, gram_pinv })
    }

    fn project(&self, v: &mut [f64]) {
        let k = self.rows.len();
        if k == 0 {
            return;
        }
        let resid: Vec<f64> = (0..k).map(|i| dot(&self.rows[i], v) - self.b[i]).collect();
        let lambda = self.gram_pinv.mat_vec(&resid);
        for (row, l) in self.rows.iter().zip(&lambda) {
            for (x, a) in v.iter_mut().zip(row) {
                *x -= l * a;
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn to_sym(m: usize, v: &[f64]) -> DenseSym {
    DenseSym::from_upper(m, |i, j| 0.5 * (v[i * m + j] + v[j * m + i]))
}

/// Nearest matrix of the form `V·R·Vᵀ` with `R ⪰ 0`, for `V` with
/// orthonormal columns.
pub fn project_face_psd(y: &DenseSym, v: &Matrix) -> Result<DenseSym> {
    let inner = v.transpose().matmul(&y.as_matrix().matmul(v)?)?;
    let r = project_psd(&DenseSym::symmetrize(&inner)?)?;
    let back = v.matmul(&r.as_matrix().matmul(&v.transpose())?)?;
    DenseSym::symmetrize(&back)
}

/// Nearest PSD matrix in Frobenius norm: negative eigenvalues clipped.
pub fn project_psd(y: &DenseSym) -> Result<DenseSym> {
    let m = y.dim();
    let (vals, vecs) = sym_eigen_pairs(y, &EigenOptions::with_tol(1e-15))?;
    let keep: Vec<usize> = (0..m).filter(|&t| vals[t] > 0.0).collect();
    Ok(DenseSym::from_upper(m, |i, j| {
        keep.iter()
            .map(|&t| vals[t] * vecs[(i, t)] * vecs[(j, t)])
            .sum()
    }))
}

pub fn solve(p: &SdpProblem, opts: &SolveOptions) -> Result<SdpSolution> {
    let m = p.dim;
    if m == 0 || m > MAX_SOLVER_DIM {
        return Err(Error::Sizing {
            what: "SDP solver dimension",
            requested: m,
            cap: MAX_SOLVER_DIM,
        });
    }
    if !(opts.eq_tol > 0.0 && opts.psd_tol > 0.0 && opts.nn_tol > 0.0 && opts.rho > 0.0) {
        return Err(invalid("solver tolerances and penalty must be positive"));
    }
    let proj = AffineProjector::new(p)?;
    let c = p.objective.as_matrix().as_slice();
    let len = m * m;
    let mut rho = opts.rho;
    let mut w = vec![0.0; len];
    let mut z = vec![0.0; len];
    let mut u1 = vec![0.0; len];
    let mut u2 = vec![0.0; len];
    let mut x = vec![0.0; len];
    let mut w_prev = w.clone();
    let mut z_prev = z.clone();
    let check_every = opts.check_every.max(1);

    let mut iter = 0;
    while iter < opts.max_iters {
        iter += 1;
        for t in 0..len {
            let mut acc = 0.0;
            let mut parts = 0.0;
            if p.psd {
                acc += w[t] - u1[t];
                parts += 1.0;
            }
            if p.nonneg {
                acc += z[t] - u2[t];
                parts += 1.0;
            }
            x[t] = if parts > 0.0 {
                (acc - c[t] / rho) / parts
            } else {
                -c[t] / rho
            };
        }
        proj.project(&mut x);
        if !p.psd && !p.nonneg {
            break;
        }
        if p.psd {
            let shifted: Vec<f64> = x.iter().zip(&u1).map(|(a, b)| a + b).collect();
            let sym = to_sym(m, &shifted);
            let ws = match &p.face {
                Some(v) => project_face_psd(&sym, v)?,
                None => project_psd(&sym)?,
            };
            w.copy_from_slice(ws.as_matrix().as_slice());
            for t in 0..len {
                u1[t] += x[t] - w[t];
            }
        }
        if p.nonneg {
            for t in 0..len {
                let pinned = p.zero_mask.as_ref().is_some_and(|mask| mask[t]);
                z[t] = if pinned { 0.0 } else { (x[t] + u2[t]).max(0.0) };
                u2[t] += x[t] - z[t];
            }
        }

        if iter % check_every != 0 {
            continue;
        }
        let mut primal: f64 = 0.0;
        let mut dual = 0.0;
        if p.psd {
            primal = primal.max(dist(&x, &w));
            dual += rho * dist(&w, &w_prev);
        }
        if p.nonneg {
            primal = primal.max(dist(&x, &z));
            dual += rho * dist(&z, &z_prev);
        }
        w_prev.copy_from_slice(&w);
        z_prev.copy_from_slice(&z);

        if primal <= opts.eq_tol && dual <= opts.dual_tol {
            let cand = candidate(p, &x, &w, &z);
            let sol = assess(p, cand, iter, opts)?;
            if sol.converged {
                return Ok(sol);
            }
        }
        // residual balancing keeps both residuals shrinking at similar rates
        let scale = if primal > 10.0 * dual {
            2.0
        } else if dual > 10.0 * primal {
            0.5
        } else {
            1.0
        };
        if scale != 1.0 {
            rho *= scale;
            for t in 0..len {
                u1[t] /= scale;
                u2[t] /= scale;
            }
        }
    }
    assess(p, candidate(p, &x, &w, &z), iter, opts)
}

fn candidate(p: &SdpProblem, x: &[f64], w: &[f64], z: &[f64]) -> DenseSym {
    let m = p.dim;
    if p.nonneg {
        to_sym(m, z)
    } else if p.psd {
        to_sym(m, w)
    } else {
        to_sym(m, x)
    }
}

fn assess(
    p: &SdpProblem,
    y: DenseSym,
    iterations: usize,
    opts: &SolveOptions,
) -> Result<SdpSolution> {
    let max_equality_residual = p.max_equality_residual(&y)?;
    let min_eigenvalue = sym_eigs(&y, 1e-14)?.min();
    let min_entry = y.as_matrix().min_entry();
    let converged = max_equality_residual <= opts.eq_tol
        && (!p.psd || min_eigenvalue >= -opts.psd_tol)
        && (!p.nonneg || min_entry >= -opts.nn_tol);
    Ok(SdpSolution {
        objective_value: p.objective_at(&y)?,
        y_hat: y,
        max_equality_residual,
        min_eigenvalue,
        min_entry,
        iterations,
        converged,
    })
}

fn unit(n: usize, j: usize) -> DenseSym {
    DenseSym::unit_pair(n, j, j)
}

/// The reduced SDP for an `n + 1`-vertex instance as an explicit problem
/// on `n² × n²` matrices.
pub fn encode_reduced(inst: &SimplicialInstance, red: &Reduction) -> Result<SdpProblem> {
    let n = red.n();
    if n > MAX_ENCODE_N {
        return Err(Error::Sizing {
            what: "reduced SDP size n",
            requested: n,
            cap: MAX_ENCODE_N,
        });
    }
    if inst.n_total() != n + 1 {
        return Err(Error::DimensionMismatch(format!(
            "instance has {} vertices but the reduction expects {}",
            inst.n_total(),
            n + 1
        )));
    }
    let d = DenseSym::try_from_matrix(red.d_beta.clone())?;
    let half_ring = DenseSym::try_from_matrix(red.c1_alpha.scale(0.5))?;
    let diag = DenseSym::from_upper(n * n, |p, q| if p == q { red.cbar[p] } else { 0.0 });
    let objective = d.kron(&half_ring)?.add(&diag)?;

    let eye = DenseSym::identity(n);
    let off = DenseSym::ones(n).sub(&eye)?;
    let mut constraints = Vec::with_capacity(2 * n + 2);
    for j in 0..n {
        constraints.push(Constraint {
            a: eye.kron(&unit(n, j))?,
            b: 1.0,
        });
    }
    for j in 0..n {
        constraints.push(Constraint {
            a: unit(n, j).kron(&eye)?,
            b: 1.0,
        });
    }
    constraints.push(Constraint {
        a: eye.kron(&off)?.add(&off.kron(&eye)?)?,
        b: 0.0,
    });
    constraints.push(Constraint {
        a: DenseSym::ones(n * n),
        b: (n * n) as f64,
    });
    // entry (i·n + a, j·n + b) is forced to zero when exactly one of the
    // vertex and position indices coincides
    let mask = (0..n * n * n * n)
        .map(|t| {
            let (p, q) = (t / (n * n), t % (n * n));
            let (i, a, j, b) = (p / n, p % n, q / n, q % n);
            (i == j) != (a == b)
        })
        .collect();
    SdpProblem::new(objective, constraints, true, true)?
        .with_face(assignment_face(n))?
        .with_zero_mask(mask)
}

/// Orthonormal basis of `span{e⊗e} ⊕ range(V⊗V)`, where `V` spans the
/// complement of `e` in `ℝⁿ`. Every feasible point of the assignment
/// constraints has its range there: the sum of all blocks is PSD with unit
/// diagonal and total `n²`, so it equals `J`, which annihilates `V`.
pub fn assignment_face(n: usize) -> Matrix {
    let v = complement_of_ones(n);
    let k = n - 1;
    let e = 1.0 / n as f64;
    Matrix::from_fn(n * n, k * k + 1, |p, c| {
        if c == 0 {
            e
        } else {
            let (s, t) = ((c - 1) / k, (c - 1) % k);
            v[(p / n, s)] * v[(p % n, t)]
        }
    })
}

/// Orthonormal columns spanning the vectors that sum to zero (Helmert basis).
fn complement_of_ones(n: usize) -> Matrix {
    Matrix::from_fn(n, n - 1, |i, c| {
        let k = (c + 1) as f64;
        let norm = (k * (k + 1.0)).sqrt();
        if i <= c {
            1.0 / norm
        } else if i == c + 1 {
            -k / norm
        } else {
            0.0
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonMonotonicityReport {
    pub small_vertices: usize,
    #[serde(with = "f64_str")]
    pub small_value: f64,
    pub small_converged: bool,
    pub large_vertices: usize,
    /// Reduced-SDP objective of the certificate on the larger instance.
    #[serde(with = "f64_str")]
    pub large_bound: f64,
    #[serde(with = "f64_str")]
    pub margin: f64,
    pub conclusive: bool,
    pub non_monotonic: bool,
}

/// Solves the three-vertex reduced SDP numerically and compares it with the
/// certificate bound on the `large_n + 1`-vertex two-group instance.
pub fn nonmonotonicity_check_with(
    large_n: usize,
    opts: &SolveOptions,
) -> Result<NonMonotonicityReport> {
    let small = SimplicialInstance::make_one_extra(2, 1)?;
    let red = build_reduction(&small, 0, 0)?;
    let sol = solve(&encode_reduced(&small, &red)?, opts)?;
    let large = gap_record(1, large_n)?;
    let margin = sol.objective_value - large.sdp_upper_bound;
    Ok(NonMonotonicityReport {
        small_vertices: 3,
        small_value: sol.objective_value,
        small_converged: sol.converged,
        large_vertices: large_n + 1,
        large_bound: large.sdp_upper_bound,
        margin,
        conclusive: sol.converged,
        non_monotonic: sol.converged && margin > 0.0,
    })
}

pub fn nonmonotonicity_check() -> Result<NonMonotonicityReport> {
    nonmonotonicity_check_with(16, &SolveOptions::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psd_projection_is_idempotent() {
        let y = DenseSym::from_upper(5, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        let once = project_psd(&y).unwrap();
        let twice = project_psd(&once).unwrap();
        assert!(once.as_matrix().max_abs_diff(twice.as_matrix()) <= 1e-12);
        assert!(sym_eigs(&once, 1e-14).unwrap().min() >= -1e-12);
    }

    #[test]
    fn face_basis_is_orthonormal_and_holds_permutations() {
        let n = 4;
        let v = assignment_face(n);
        let gram = v.transpose().matmul(&v).unwrap();
        assert!(gram.max_abs_diff(&Matrix::identity(10)) <= 1e-14);
        // vec of a permutation matrix lies in the face
        let perm = [2usize, 0, 3, 1];
        let x: Vec<f64> = (0..n * n)
            .map(|p| if perm[p / n] == p % n { 1.0 } else { 0.0 })
            .collect();
        let coords = v.transpose().mat_vec(&x);
        let back = v.mat_vec(&coords);
        assert!(back.iter().zip(&x).all(|(a, b)| (a - b).abs() <= 1e-12));
    }

    #[test]
    fn trace_minimisation_sanity() {
        let m = 4;
        let p = SdpProblem::new(
            DenseSym::identity(m),
            vec![Constraint {
                a: DenseSym::ones(m),
                b: m as f64,
            }],
            true,
            true,
        )
        .unwrap();
        let s = solve(&p, &SolveOptions::default()).unwrap();
        assert!(s.converged, "{s:?}");
        assert!((s.objective_value - 1.0).abs() <= 1e-4);
        let target = DenseSym::ones(m).scale(1.0 / m as f64);
        assert!(s.y_hat.as_matrix().max_abs_diff(target.as_matrix()) <= 1e-4);
    }

    #[test]
    fn zero_objective() {
        let small = SimplicialInstance::make_one_extra(2, 1).unwrap();
        let red = build_reduction(&small, 0, 0).unwrap();
        let mut p = encode_reduced(&small, &red).unwrap();
        p.objective = DenseSym::zeros(p.dim);
        let s = solve(&p, &SolveOptions::default()).unwrap();
        assert!(s.converged);
        assert_eq!(s.objective_value, 0.0);
    }

    #[test]
    fn three_vertex_encoding() {
        let small = SimplicialInstance::make_one_extra(2, 1).unwrap();
        let red = build_reduction(&small, 0, 0).unwrap();
        let p = encode_reduced(&small, &red).unwrap();
        assert_eq!(p.dim, 4);
        assert_eq!(p.constraints.len(), 6);
    }

    #[test]
    fn encode_rejects_large() {
        let inst = SimplicialInstance::make_one_extra(2, 4).unwrap();
        let red = build_reduction(&inst, 0, 0).unwrap();
        assert!(matches!(
            encode_reduced(&inst, &red),
            Err(Error::Sizing { .. })
        ));
    }

    #[test]
    fn problem_json_round_trip() {
        let small = SimplicialInstance::make_one_extra(2, 1).unwrap();
        let red = build_reduction(&small, 0, 0).unwrap();
        let p = encode_reduced(&small, &red).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        let back: SdpProblem = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
        assert_eq!(serde_json::to_string(&back).unwrap(), s);
    }
}
