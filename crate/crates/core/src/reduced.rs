//! The symmetry-reduced SDP on `n + 1` vertices and the gap tables built
//! from it.
//!
//! Fixing vertex `s` to tour position `r` removes one index from each side:
//! `α` drops position `r`, `β` drops vertex `s`. The reduced objective is
//! `trace((D[β] ⊗ ½C_1[α])·Y) + trace(Diag(c̄)·Y)` with
//! `c̄ = vec(C_1[α, {r}]·D[{s}, β])`.

use serde::{Deserialize, Serialize};

use crate::certificate::{
    assemble, coeffs_general, verify_povh_rendl, BlockKind, CertificateY, FeasibilityTolerances,
    GapConstants, VerifyMode,
};
use crate::error::{invalid, Error, Result};
use crate::instance::{tsp_optimum, SimplicialInstance, TspMethod};
use crate::matrix::{vec_stack, DenseSym, Matrix};
use crate::sigfig::f64_str;

/// Adjacency of the cycle on `m` vertices, including odd `m`.
pub fn ring_matrix(m: usize) -> Matrix {
    Matrix::from_fn(m, m, |a, b| {
        let off = (a + m - b) % m;
        if m > 1 && a != b && (off == 1 || off == m - 1) {
            1.0
        } else {
            0.0
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reduction {
    /// Fixed tour position, 0-based.
    pub r: usize,
    /// Fixed vertex, 0-based.
    pub s: usize,
    pub alpha: Vec<usize>,
    pub beta: Vec<usize>,
    pub d_beta: Matrix,
    pub c1_alpha: Matrix,
    /// Column-stacked, so `cbar[j·n + a]` pairs vertex `β_j` with position
    /// `α_a`, matching the index order of `Y`.
    pub cbar: Vec<f64>,
}

impl Reduction {
    /// Size of the reduced index sets.
    pub fn n(&self) -> usize {
        self.alpha.len()
    }

    pub fn cbar_ones(&self) -> usize {
        self.cbar.iter().filter(|v| **v == 1.0).count()
    }
}

pub fn build_reduction(inst: &SimplicialInstance, r: usize, s: usize) -> Result<Reduction> {
    let total = inst.n_total();
    let n = total - 1;
    if n < 2 || !n.is_multiple_of(2) {
        return Err(invalid(format!(
            "the reduction needs an odd vertex count of at least 3, got {total}"
        )));
    }
    if r >= total || s >= total {
        return Err(invalid(format!(
            "r = {r} and s = {s} must be below {total}"
        )));
    }
    let alpha: Vec<usize> = (0..total).filter(|&a| a != r).collect();
    let beta: Vec<usize> = (0..total).filter(|&v| v != s).collect();
    let ring = ring_matrix(total);
    let costs = inst.cost_matrix();
    let d_beta = costs.select(&beta, &beta);
    let c1_alpha = ring.select(&alpha, &alpha);
    let column = ring.select(&alpha, &[r]);
    let row = costs.select(&[s], &beta);
    let cbar = vec_stack(&column.matmul(&row)?)?;
    Ok(Reduction {
        r,
        s,
        alpha,
        beta,
        d_beta,
        c1_alpha,
        cbar,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedObjective {
    #[serde(with = "f64_str")]
    pub kron_term: f64,
    #[serde(with = "f64_str")]
    pub diag_term: f64,
}

impl ReducedObjective {
    pub fn total(&self) -> f64 {
        self.kron_term + self.diag_term
    }
}

/// Both parts of the reduced objective at a certificate, computed per
/// block kind.
pub fn objective_reduced(y: &CertificateY, red: &Reduction) -> Result<ReducedObjective> {
    let n = y.n();
    if red.n() != n {
        return Err(Error::DimensionMismatch(format!(
            "certificate has n = {n} but the reduction has {}",
            red.n()
        )));
    }
    let half_ring_inner = |kind: BlockKind| -> f64 {
        let mut s = 0.0;
        for a in 0..n {
            for b in 0..n {
                let c = red.c1_alpha[(a, b)];
                if c != 0.0 {
                    s += c * y.block_entry(kind, a, b);
                }
            }
        }
        0.5 * s
    };
    let inner = [
        half_ring_inner(BlockKind::Identity),
        half_ring_inner(BlockKind::A),
        half_ring_inner(BlockKind::B),
    ];
    let mut kron_term = 0.0;
    for i in 0..n {
        for j in 0..n {
            let d = red.d_beta[(i, j)];
            if d != 0.0 {
                kron_term += d * inner[y.block_kind(i, j) as usize];
            }
        }
    }
    // every diagonal entry of Y is the identity-block diagonal 1/n
    let weight: f64 = red.cbar.iter().sum();
    let diag_term = weight / n as f64;
    Ok(ReducedObjective {
        kron_term,
        diag_term,
    })
}

/// The same two terms from a dense `Y`, by explicit Kronecker product and
/// diagonal sum.
pub fn objective_reduced_dense(y: &DenseSym, red: &Reduction) -> Result<ReducedObjective> {
    let half = DenseSym::try_from_matrix(red.c1_alpha.scale(0.5))?;
    let d = DenseSym::try_from_matrix(red.d_beta.clone())?;
    let kron_term = crate::matrix::trace_inner(&d.kron(&half)?, y)?;
    if y.dim() != red.cbar.len() {
        return Err(Error::DimensionMismatch(format!(
            "Y has dimension {} but c̄ has length {}",
            y.dim(),
            red.cbar.len()
        )));
    }
    let diag_term = red
        .cbar
        .iter()
        .enumerate()
        .map(|(k, c)| c * y[(k, k)])
        .sum();
    Ok(ReducedObjective {
        kron_term,
        diag_term,
    })
}

/// One row of a gap table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRecord {
    pub z: usize,
    pub g: usize,
    pub n: usize,
    #[serde(rename = "tsp", with = "f64_str")]
    pub tsp_value: f64,
    #[serde(with = "f64_str")]
    pub kron_term: f64,
    #[serde(with = "f64_str")]
    pub diag_term: f64,
    #[serde(rename = "sdp_upper", with = "f64_str")]
    pub sdp_upper_bound: f64,
    #[serde(rename = "gap_lower", with = "f64_str")]
    pub gap_lower_bound: f64,
    /// `2zn/(2n + c̃_g)`, the bound obtained from `diag_term ≤ 2` and
    /// `kron_term ≤ c̃_g/n`.
    #[serde(with = "f64_str")]
    pub gap_bound: f64,
    /// Largest equality residual of the certificate.
    #[serde(with = "f64_str")]
    pub max_residual: f64,
    pub certified: bool,
}

pub const GAP_CSV_HEADER: &str =
    "z,g,n,tsp,kron_term,diag_term,sdp_upper,gap_lower,gap_bound,max_residual,certified";

pub fn gap_record(z: usize, n: usize) -> Result<GapRecord> {
    if z == 0 {
        return Err(invalid("z must be at least 1"));
    }
    let g = 2 * z;
    let coeffs = coeffs_general(n, g)?;
    let y = assemble(&coeffs)?;
    let report = verify_povh_rendl(
        &y,
        &FeasibilityTolerances::default(),
        VerifyMode::Structured,
    )?;
    let inst = SimplicialInstance::make_one_extra(g, n / g)?;
    let red = build_reduction(&inst, 0, 0)?;
    let obj = objective_reduced(&y, &red)?;
    let tsp = tsp_optimum(&inst, TspMethod::Analytic)?.value;
    let c_tilde = GapConstants::new(g)?.c_tilde;
    let nf = n as f64;
    Ok(GapRecord {
        z,
        g,
        n,
        tsp_value: tsp,
        kron_term: obj.kron_term,
        diag_term: obj.diag_term,
        sdp_upper_bound: obj.total(),
        gap_lower_bound: tsp / obj.total(),
        gap_bound: 2.0 * z as f64 * nf / (2.0 * nf + c_tilde),
        max_residual: report.max_equality_residual(),
        certified: report.pass,
    })
}

/// Gap records for `g = 2z` over the given sizes, sorted by `n`.
pub fn gap_table(z: usize, n_values: &[usize]) -> Result<Vec<GapRecord>> {
    let mut ns = n_values.to_vec();
    ns.sort_unstable();
    ns.dedup();
    ns.into_iter().map(|n| gap_record(z, n)).collect()
}

pub fn gap_table_csv(records: &[GapRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r).map_err(|e| invalid(e.to_string()))?;
    }
    if records.is_empty() {
        return Ok(format!("{GAP_CSV_HEADER}\n"));
    }
    let bytes = w.into_inner().map_err(|e| invalid(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| invalid(e.to_string()))
}

pub fn parse_gap_csv(text: &str) -> Result<Vec<GapRecord>> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    rd.deserialize()
        .map(|r| r.map_err(|e| invalid(e.to_string())))
        .collect()
}
