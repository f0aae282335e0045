//! Explicit feasible solutions of the Povh–Rendl SDP on simplicial instances.
//!
//! With `n` vertices split into `g` equal groups the certificate is
//!
//! ```text
//! 2n·Y = (J_g − I_g) ⊗ J_{n/g} ⊗ B + I_g ⊗ J_{n/g} ⊗ A + I_g ⊗ I_{n/g} ⊗ (2I − A)
//! ```
//!
//! where `A = Σ a_i C_i` and `B = Σ b_i C_i` are symmetric circulants. `Y` is
//! kept structurally; the dense `n² × n²` matrix is only built on request.
//! Dense index `i·n + a` pairs vertex `i` (the major index) with tour
//! position `a` (the minor index).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::circulant::{
    cos_pi_ratio, CosineProfile, IdentityCheck, IdentityReport, SymmetricCirculant,
};
use crate::eigen::{sym_eigs_with, EigenOptions, Spectrum, DEFAULT_MAX_DIM};
use crate::error::{invalid, Error, Result};
use crate::instance::SimplicialInstance;
use crate::matrix::DenseSym;
use crate::sigfig::{f64_str, opt_f64_str, vec_f64_str};

fn check_layout(n: usize, g: usize) -> Result<()> {
    if g < 2 || !g.is_multiple_of(2) {
        return Err(invalid(format!("g must be even and at least 2, got {g}")));
    }
    if !n.is_multiple_of(2) {
        return Err(invalid(format!("n must be even, got {n}")));
    }
    if !n.is_multiple_of(g) {
        return Err(invalid(format!("g = {g} does not divide n = {n}")));
    }
    if n <= g {
        return Err(invalid(format!("need n > g, got n = {n}, g = {g}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertCoeffs {
    pub n: usize,
    pub g: usize,
    #[serde(with = "vec_f64_str")]
    pub a: Vec<f64>,
    #[serde(with = "vec_f64_str")]
    pub b: Vec<f64>,
}

/// Closed-form coefficients for two groups.
pub fn coeffs_two_group(n: usize) -> Result<CertCoeffs> {
    if n < 6 || !n.is_multiple_of(2) {
        return Err(invalid(format!("n must be even and at least 6, got {n}")));
    }
    let d = n / 2;
    let nf = n as f64;
    let mut a = Vec::with_capacity(d);
    let mut b = Vec::with_capacity(d);
    for i in 1..=d {
        let c = cos_pi_ratio(i as i64, d as i64);
        a.push(2.0 / (nf - 2.0) * (c + 1.0));
        b.push(if i < d {
            2.0 / nf * (1.0 - c)
        } else {
            2.0 / nf
        });
    }
    Ok(CertCoeffs { n, g: 2, a, b })
}

/// Coefficients for `g` equal groups of size `n/g`.
pub fn coeffs_general(n: usize, g: usize) -> Result<CertCoeffs> {
    check_layout(n, g)?;
    let d = n / 2;
    let (nf, gf) = (n as f64, g as f64);
    let mut a = Vec::with_capacity(d);
    let mut b = Vec::with_capacity(d);
    for i in 1..=d {
        let s: f64 = (1..g)
            .map(|j| (g - j) as f64 * cos_pi_ratio((i * j) as i64, d as i64))
            .sum();
        let bracket = 2.0 + 4.0 / gf * s;
        let (ai, numer) = if i < d {
            let ai = bracket / (nf - gf);
            (ai, 2.0 * gf - (nf - gf) * ai)
        } else {
            let ai = 0.5 * bracket / (nf - gf);
            (ai, gf - (nf - gf) * ai)
        };
        a.push(ai);
        b.push(numer / (nf * (gf - 1.0)));
    }
    Ok(CertCoeffs { n, g, a, b })
}

/// Deviations of a coefficient set from its defining invariants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoeffResiduals {
    #[serde(with = "f64_str")]
    pub sum_a: f64,
    #[serde(with = "f64_str")]
    pub sum_b: f64,
    #[serde(with = "f64_str")]
    pub min_a: f64,
    #[serde(with = "f64_str")]
    pub min_b: f64,
    #[serde(with = "f64_str")]
    pub linear_coupling: f64,
}

impl CoeffResiduals {
    pub fn holds(&self, eq_tol: f64, nonneg_tol: f64) -> bool {
        self.sum_a <= eq_tol
            && self.sum_b <= eq_tol
            && self.linear_coupling <= eq_tol
            && self.min_a >= -nonneg_tol
            && self.min_b >= -nonneg_tol
    }
}

impl CertCoeffs {
    /// Wraps arbitrary coefficients. Only the shape is validated, so that
    /// perturbed coefficient sets can be pushed through the verifier.
    pub fn from_parts(n: usize, g: usize, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        check_layout(n, g)?;
        if a.len() != n / 2 || b.len() != n / 2 {
            return Err(invalid(format!(
                "expected {} coefficients each, got {} and {}",
                n / 2,
                a.len(),
                b.len()
            )));
        }
        Ok(CertCoeffs { n, g, a, b })
    }

    pub fn d(&self) -> usize {
        self.n / 2
    }

    pub fn a_circulant(&self) -> SymmetricCirculant {
        SymmetricCirculant::new(self.n, self.a.clone()).expect("shape checked on construction")
    }

    pub fn b_circulant(&self) -> SymmetricCirculant {
        SymmetricCirculant::new(self.n, self.b.clone()).expect("shape checked on construction")
    }

    pub fn a_profile(&self) -> CosineProfile {
        self.a_circulant().cosine_profile()
    }

    pub fn b_profile(&self) -> CosineProfile {
        self.b_circulant().cosine_profile()
    }

    pub fn residuals(&self) -> CoeffResiduals {
        let (nf, gf) = (self.n as f64, self.g as f64);
        let d = self.d();
        let linear_coupling = (0..d)
            .map(|i| {
                let rhs = if i + 1 < d { 2.0 * gf } else { gf };
                ((nf - gf) * self.a[i] + nf * (gf - 1.0) * self.b[i] - rhs).abs()
            })
            .fold(0.0, f64::max);
        CoeffResiduals {
            sum_a: (self.a.iter().sum::<f64>() - 1.0).abs(),
            sum_b: (self.b.iter().sum::<f64>() - 1.0).abs(),
            min_a: self.a.iter().copied().fold(f64::INFINITY, f64::min),
            min_b: self.b.iter().copied().fold(f64::INFINITY, f64::min),
            linear_coupling,
        }
    }
}

/// Which `n × n` minor block a pair of vertices selects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockKind {
    /// `(1/n)·I`, on the minor diagonal.
    Identity,
    /// `A/2n`, distinct vertices of one group.
    A,
    /// `B/2n`, vertices of different groups.
    B,
}

/// Counts of each minor-block kind across the `n × n` grid of blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockLayout {
    pub g: usize,
    pub n: usize,
    pub per_group: usize,
    pub identity_blocks: usize,
    pub a_blocks: usize,
    pub b_blocks: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateY {
    coeffs: CertCoeffs,
    a: SymmetricCirculant,
    b: SymmetricCirculant,
}

pub fn assemble(coeffs: &CertCoeffs) -> Result<CertificateY> {
    check_layout(coeffs.n, coeffs.g)?;
    Ok(CertificateY {
        a: coeffs.a_circulant(),
        b: coeffs.b_circulant(),
        coeffs: coeffs.clone(),
    })
}

impl CertificateY {
    pub fn coeffs(&self) -> &CertCoeffs {
        &self.coeffs
    }

    pub fn n(&self) -> usize {
        self.coeffs.n
    }

    pub fn g(&self) -> usize {
        self.coeffs.g
    }

    pub fn dim(&self) -> usize {
        self.n() * self.n()
    }

    pub fn per_group(&self) -> usize {
        self.n() / self.g()
    }

    pub fn group_of(&self, vertex: usize) -> usize {
        vertex / self.per_group()
    }

    pub fn block_kind(&self, i: usize, j: usize) -> BlockKind {
        if i == j {
            BlockKind::Identity
        } else if self.group_of(i) == self.group_of(j) {
            BlockKind::A
        } else {
            BlockKind::B
        }
    }

    pub fn layout(&self) -> BlockLayout {
        let (n, g, p) = (self.n(), self.g(), self.per_group());
        BlockLayout {
            g,
            n,
            per_group: p,
            identity_blocks: n,
            a_blocks: n * (p - 1),
            b_blocks: g * (g - 1) * p * p,
        }
    }

    /// Entry `(s, t)` of a minor block of the given kind.
    pub fn block_entry(&self, kind: BlockKind, s: usize, t: usize) -> f64 {
        let n = self.n() as f64;
        match kind {
            BlockKind::Identity => {
                if s == t {
                    1.0 / n
                } else {
                    0.0
                }
            }
            BlockKind::A => self.a.entry(s, t) / (2.0 * n),
            BlockKind::B => self.b.entry(s, t) / (2.0 * n),
        }
    }

    /// First row of a minor block; every block kind is circulant.
    fn block_first_row(&self, kind: BlockKind) -> Vec<f64> {
        (0..self.n())
            .map(|t| self.block_entry(kind, 0, t))
            .collect()
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        let n = self.n();
        self.block_entry(self.block_kind(row / n, col / n), row % n, col % n)
    }

    pub fn densify(&self) -> Result<DenseSym> {
        self.densify_capped(DEFAULT_MAX_DIM)
    }

    pub fn densify_capped(&self, max_dim: usize) -> Result<DenseSym> {
        let dim = self.dim();
        if dim > max_dim {
            return Err(Error::Sizing {
                what: "dense certificate dimension",
                requested: dim,
                cap: max_dim,
            });
        }
        Ok(DenseSym::from_upper(dim, |p, q| self.entry(p, q)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// One eigenvector per `k`; value `2n` at `k = 0`, zero otherwise.
    CoupledZero,
    /// `g − 1` eigenvectors per `k`.
    Middle,
    /// `n − g` eigenvectors per `k`.
    Plain,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralEntry {
    pub k: usize,
    pub family: Family,
    #[serde(with = "f64_str")]
    pub value: f64,
    pub multiplicity: usize,
}

/// Eigenvalues of `2n·Y`, grouped by cosine index and family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertSpectrum {
    pub n: usize,
    pub g: usize,
    pub families: Vec<SpectralEntry>,
}

impl CertSpectrum {
    pub fn total_multiplicity(&self) -> usize {
        self.families.iter().map(|e| e.multiplicity).sum()
    }

    pub fn min_value(&self) -> f64 {
        self.families
            .iter()
            .filter(|e| e.multiplicity > 0)
            .map(|e| e.value)
            .fold(f64::INFINITY, f64::min)
    }

    /// The full multiset, eigenvalues of `2n·Y`.
    pub fn to_spectrum(&self) -> Spectrum {
        Spectrum::from_unsorted(
            self.families
                .iter()
                .flat_map(|e| std::iter::repeat_n(e.value, e.multiplicity))
                .collect(),
        )
    }

    /// Eigenvalues of `Y` itself.
    pub fn to_y_spectrum(&self) -> Spectrum {
        let s = 2.0 * self.n as f64;
        Spectrum::from_unsorted(
            self.to_spectrum()
                .eigenvalues()
                .iter()
                .map(|v| v / s)
                .collect(),
        )
    }
}

/// Eigenvalues of `2n·Y` from the circulant transforms `a^(k)`, `b^(k)`.
///
/// The u-vectors of the group structure give block multipliers
/// `(μ^B, μ^A) = ((g−1)n/g, n/g)`, `(−n/g, n/g)` and `(0, 0)`; with `A` and
/// `B` sharing the Fourier vectors `v_k`, each pairs into
/// `2μ^B b^(k) + 2μ^A a^(k) + 2 − 2a^(k)`.
pub fn closed_form_spectrum(coeffs: &CertCoeffs) -> CertSpectrum {
    let (n, g) = (coeffs.n, coeffs.g);
    let p = (n / g) as f64;
    let gf = g as f64;
    let ap = coeffs.a_profile();
    let bp = coeffs.b_profile();
    let mut families = Vec::with_capacity(3 * n);
    for k in 0..n {
        let (ak, bk) = (ap.get(k), bp.get(k));
        let plain = 2.0 - 2.0 * ak;
        families.push(SpectralEntry {
            k,
            family: Family::CoupledZero,
            value: 2.0 * (gf - 1.0) * p * bk + 2.0 * p * ak + plain,
            multiplicity: 1,
        });
        families.push(SpectralEntry {
            k,
            family: Family::Middle,
            value: -2.0 * p * bk + 2.0 * p * ak + plain,
            multiplicity: g - 1,
        });
        families.push(SpectralEntry {
            k,
            family: Family::Plain,
            value: plain,
            multiplicity: n - g,
        });
    }
    CertSpectrum { n, g, families }
}

/// Same spectrum after eliminating `b^(k)` through the coupling relation:
/// `{2n, 0, 0}` at `k = 0`, otherwise `0`, `2g/(g−1) + 2(n−g)/(g−1)·a^(k)`
/// and `2 − 2a^(k)`.
pub fn simplified_spectrum(coeffs: &CertCoeffs) -> CertSpectrum {
    let (n, g) = (coeffs.n, coeffs.g);
    let (nf, gf) = (n as f64, g as f64);
    let ap = coeffs.a_profile();
    let mut families = Vec::with_capacity(3 * n);
    for k in 0..n {
        let ak = ap.get(k);
        let (coupled, middle, plain) = if k == 0 {
            (2.0 * nf, 0.0, 0.0)
        } else {
            (
                0.0,
                2.0 * gf / (gf - 1.0) + 2.0 * (nf - gf) / (gf - 1.0) * ak,
                2.0 - 2.0 * ak,
            )
        };
        families.push(SpectralEntry {
            k,
            family: Family::CoupledZero,
            value: coupled,
            multiplicity: 1,
        });
        families.push(SpectralEntry {
            k,
            family: Family::Middle,
            value: middle,
            multiplicity: g - 1,
        });
        families.push(SpectralEntry {
            k,
            family: Family::Plain,
            value: plain,
            multiplicity: n - g,
        });
    }
    CertSpectrum { n, g, families }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AkkBounds {
    #[serde(with = "f64_str")]
    pub min: f64,
    #[serde(with = "f64_str")]
    pub max: f64,
    /// `−g/(n−g)`.
    #[serde(with = "f64_str")]
    pub lower_limit: f64,
}

impl AkkBounds {
    pub fn holds(&self) -> bool {
        self.min >= self.lower_limit - 1e-10 && self.max <= 1.0 + 1e-12
    }
}

/// Range of `a^(k)` over `k ≥ 1`, against the lower limit `−g/(n−g)` that
/// keeps the middle family nonnegative.
pub fn lower_bound_akk(coeffs: &CertCoeffs) -> AkkBounds {
    let p = coeffs.a_profile();
    AkkBounds {
        min: p.min_nonzero_index(),
        max: p.max_nonzero_index(),
        lower_limit: -(coeffs.g as f64) / ((coeffs.n - coeffs.g) as f64),
    }
}

/// `½·((g−1)/g)·n²·b_1`.
pub fn objective_closed_form(coeffs: &CertCoeffs) -> f64 {
    let (nf, gf) = (coeffs.n as f64, coeffs.g as f64);
    0.5 * (gf - 1.0) / gf * nf * nf * coeffs.b[0]
}

fn check_instance(inst: &SimplicialInstance, y: &CertificateY) -> Result<()> {
    if !inst.is_equal_layout() || inst.g() != y.g() || inst.n_total() != y.n() {
        return Err(Error::StructureMismatch(format!(
            "instance with groups {:?} does not match a certificate with n = {}, g = {}",
            inst.group_sizes(),
            y.n(),
            y.g()
        )));
    }
    Ok(())
}

/// `½·trace((D ⊗ C_1)·Y)`, summed block by block.
pub fn objective_povh_rendl(inst: &SimplicialInstance, y: &CertificateY) -> Result<f64> {
    check_instance(inst, y)?;
    let n = y.n();
    let ring = SymmetricCirculant::basis(n, 1)?;
    let ring_row = ring.first_row();
    let inner = |kind: BlockKind| -> f64 {
        // ⟨C_1, K⟩ = n·Σ_t C_1[0,t]·K[0,t] for circulant K
        n as f64
            * (0..n)
                .map(|t| ring_row[t] * y.block_entry(kind, 0, t))
                .sum::<f64>()
    };
    let (ia, ib) = (inner(BlockKind::A), inner(BlockKind::B));
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let c = inst.cost(i, j);
            if c != 0.0 {
                total += c * match y.block_kind(i, j) {
                    BlockKind::A => ia,
                    BlockKind::B => ib,
                    BlockKind::Identity => 0.0,
                };
            }
        }
    }
    Ok(0.5 * total)
}

/// Brute-force `½·Σ_{p,q} (D ⊗ C_1)_{pq}·Y_{pq}` over a dense `Y`.
pub fn objective_dense(inst: &SimplicialInstance, y: &DenseSym) -> Result<f64> {
    let n = inst.n_total();
    if y.dim() != n * n {
        return Err(Error::DimensionMismatch(format!(
            "Y has dimension {} but the instance needs {}",
            y.dim(),
            n * n
        )));
    }
    let mut total = 0.0;
    for p in 0..n * n {
        for q in 0..n * n {
            let (i, a) = (p / n, p % n);
            let (j, b) = (q / n, q % n);
            let off = (a + n - b) % n;
            if off == 1 || off == n - 1 {
                total += inst.cost(i, j) * y[(p, q)];
            }
        }
    }
    Ok(0.5 * total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityTolerances {
    #[serde(with = "f64_str")]
    pub eq: f64,
    /// Minimum eigenvalue of `Y` must be at least `−psd`.
    #[serde(with = "f64_str")]
    pub psd: f64,
    /// Minimum entry of `Y` must be at least `−nonneg`.
    #[serde(with = "f64_str")]
    pub nonneg: f64,
}

impl Default for FeasibilityTolerances {
    fn default() -> Self {
        FeasibilityTolerances {
            eq: 1e-9,
            psd: 1e-8,
            nonneg: 1e-15,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerifyMode {
    /// Residuals from block kinds, PSD from the closed-form spectrum only.
    Structured,
    /// Residuals and eigenvalues from the materialised matrix, with the
    /// closed form checked against it.
    Dense,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub n: usize,
    pub g: usize,
    pub mode: VerifyMode,
    #[serde(with = "f64_str")]
    pub row_assignment: f64,
    #[serde(with = "f64_str")]
    pub column_assignment: f64,
    #[serde(with = "f64_str")]
    pub gangster: f64,
    #[serde(with = "f64_str")]
    pub total_sum: f64,
    #[serde(with = "f64_str")]
    pub min_entry: f64,
    /// Minimum eigenvalue of `Y` from the dense eigensolver.
    #[serde(with = "opt_f64_str")]
    pub min_numeric_eigenvalue: Option<f64>,
    /// Minimum eigenvalue of `Y` from the closed form.
    #[serde(with = "f64_str")]
    pub min_closed_form_eigenvalue: f64,
    /// Largest gap between the closed-form and numeric spectra of `2n·Y`.
    #[serde(with = "opt_f64_str")]
    pub spectrum_deviation: Option<f64>,
    pub pass: bool,
    pub tolerances: FeasibilityTolerances,
}

impl FeasibilityReport {
    pub fn max_equality_residual(&self) -> f64 {
        self.row_assignment
            .max(self.column_assignment)
            .max(self.gangster)
            .max(self.total_sum)
    }

    fn decide(&mut self) {
        let eigen_ok = |v: f64| v >= -self.tolerances.psd;
        self.pass = self.max_equality_residual() <= self.tolerances.eq
            && self.min_entry >= -self.tolerances.nonneg
            && eigen_ok(self.min_closed_form_eigenvalue)
            && self.min_numeric_eigenvalue.is_none_or(eigen_ok);
    }
}

pub fn verify_povh_rendl(
    y: &CertificateY,
    tol: &FeasibilityTolerances,
    mode: VerifyMode,
) -> Result<FeasibilityReport> {
    verify_povh_rendl_capped(y, tol, mode, DEFAULT_MAX_DIM)
}

pub fn verify_povh_rendl_capped(
    y: &CertificateY,
    tol: &FeasibilityTolerances,
    mode: VerifyMode,
    max_dim: usize,
) -> Result<FeasibilityReport> {
    let closed = closed_form_spectrum(y.coeffs());
    let two_n = 2.0 * y.n() as f64;
    let mut report = match mode {
        VerifyMode::Structured => structured_residuals(y, tol),
        VerifyMode::Dense => {
            let dense = y.densify_capped(max_dim)?;
            let mut r = dense_residuals(&dense, y.n(), y.g(), tol);
            let numeric = sym_eigs_with(
                &dense.scale(two_n),
                &EigenOptions {
                    max_dim,
                    ..EigenOptions::default()
                },
            )?;
            r.min_numeric_eigenvalue = Some(numeric.min() / two_n);
            r.spectrum_deviation = closed.to_spectrum().max_abs_diff(&numeric);
            r
        }
    };
    report.min_closed_form_eigenvalue = closed.min_value() / two_n;
    report.decide();
    Ok(report)
}

fn empty_report(
    n: usize,
    g: usize,
    mode: VerifyMode,
    tol: &FeasibilityTolerances,
) -> FeasibilityReport {
    FeasibilityReport {
        n,
        g,
        mode,
        row_assignment: 0.0,
        column_assignment: 0.0,
        gangster: 0.0,
        total_sum: 0.0,
        min_entry: f64::INFINITY,
        min_numeric_eigenvalue: None,
        min_closed_form_eigenvalue: f64::NAN,
        spectrum_deviation: None,
        pass: false,
        tolerances: *tol,
    }
}

fn structured_residuals(y: &CertificateY, tol: &FeasibilityTolerances) -> FeasibilityReport {
    let n = y.n();
    let mut r = empty_report(n, y.g(), VerifyMode::Structured, tol);

    // Σ_i Y^(ii)_jj and trace(Y^(jj)): only identity blocks sit on the diagonal
    for j in 0..n {
        let row: f64 = (0..n).map(|i| y.entry(i * n + j, i * n + j)).sum();
        let col: f64 = (0..n).map(|a| y.entry(j * n + a, j * n + a)).sum();
        r.row_assignment = r.row_assignment.max((row - 1.0).abs());
        r.column_assignment = r.column_assignment.max((col - 1.0).abs());
    }

    let kinds = [BlockKind::Identity, BlockKind::A, BlockKind::B];
    let mut counts = [0usize; 3];
    for i in 0..n {
        for j in 0..n {
            counts[y.block_kind(i, j) as usize] += 1;
        }
    }
    let mut gangster = 0.0;
    let mut total = 0.0;
    for (kind, count) in kinds.into_iter().zip(counts) {
        let first = y.block_first_row(kind);
        let diag_sum = n as f64 * first[0];
        let full_sum = n as f64 * first.iter().sum::<f64>();
        gangster += count as f64
            * if kind == BlockKind::Identity {
                full_sum - diag_sum
            } else {
                diag_sum
            };
        total += count as f64 * full_sum;
        if count > 0 {
            r.min_entry = first.iter().copied().fold(r.min_entry, f64::min);
        }
    }
    r.gangster = gangster.abs();
    r.total_sum = (total - (n * n) as f64).abs();
    r
}

fn dense_residuals(
    y: &DenseSym,
    n: usize,
    g: usize,
    tol: &FeasibilityTolerances,
) -> FeasibilityReport {
    let mut r = empty_report(n, g, VerifyMode::Dense, tol);
    let mut row = vec![0.0; n];
    let mut col = vec![0.0; n];
    let mut gangster = Neumaier::default();
    let mut total = Neumaier::default();
    for p in 0..n * n {
        for q in 0..n * n {
            let v = y[(p, q)];
            total.add(v);
            r.min_entry = r.min_entry.min(v);
            let (i, a) = (p / n, p % n);
            let (j, b) = (q / n, q % n);
            if p == q {
                row[a] += v;
                col[i] += v;
            } else if i == j || a == b {
                gangster.add(v);
            }
        }
    }
    r.row_assignment = row.iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max);
    r.column_assignment = col.iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max);
    r.gangster = gangster.value().abs();
    r.total_sum = (total.value() - (n * n) as f64).abs();
    r
}

/// Compensated summation for the `n⁴`-term dense sums.
#[derive(Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Constants in the gap asymptotics for group count `g`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapConstants {
    pub g: usize,
    /// `(2/g)·π²·Σ_{j<g} (g−j)·j²`.
    pub c: f64,
    /// `4c/(g−1)`, so that `b_1 ≤ ĉ/n³`.
    pub c_hat: f64,
    /// `½·((g−1)/g)·ĉ`, so that the objective is at most `c̃/n`.
    pub c_tilde: f64,
}

impl GapConstants {
    pub fn new(g: usize) -> Result<Self> {
        if g < 2 || !g.is_multiple_of(2) {
            return Err(invalid(format!("g must be even and at least 2, got {g}")));
        }
        let gf = g as f64;
        let s: f64 = (1..g).map(|j| ((g - j) * j * j) as f64).sum();
        let c = 2.0 / gf * PI * PI * s;
        let c_hat = 4.0 * c / (gf - 1.0);
        Ok(GapConstants {
            g,
            c,
            c_hat,
            c_tilde: 0.5 * (gf - 1.0) / gf * c_hat,
        })
    }
}

struct Check {
    name: &'static str,
    evaluations: usize,
    max_residual: f64,
}

impl Check {
    fn new(name: &'static str) -> Self {
        Check {
            name,
            evaluations: 0,
            max_residual: 0.0,
        }
    }

    fn equal(&mut self, lhs: f64, rhs: f64) {
        self.evaluations += 1;
        self.max_residual = self.max_residual.max((lhs - rhs).abs());
    }

    fn at_least(&mut self, lhs: f64, bound: f64) {
        self.evaluations += 1;
        self.max_residual = self.max_residual.max(bound - lhs);
    }

    fn finish(self) -> IdentityCheck {
        IdentityCheck {
            name: self.name.to_string(),
            evaluations: self.evaluations,
            max_residual: self.max_residual.max(0.0),
        }
    }
}

/// Checks the transform identities of the certificate coefficients for
/// `(n, g)`. The two-group closed forms are added when `g = 2`.
pub fn coefficient_identities(n: usize, g: usize) -> Result<IdentityReport> {
    let coeffs = coeffs_general(n, g)?;
    let (nf, gf) = (n as f64, g as f64);
    let d = n / 2;
    let ap = coeffs.a_profile();
    let bp = coeffs.b_profile();
    let mut checks = Vec::new();

    let mut c = Check::new("transform_at_zero");
    c.equal(ap.get(0), 1.0);
    c.equal(bp.get(0), 1.0);
    checks.push(c.finish());

    let mut c = Check::new("transform_coupling");
    for k in 1..n {
        c.equal(
            bp.get(k) + gf / (nf * (gf - 1.0)) + (nf - gf) / (nf * (gf - 1.0)) * ap.get(k),
            0.0,
        );
    }
    checks.push(c.finish());

    let mut c = Check::new("transform_lower_bound");
    for k in 1..n {
        c.at_least(ap.get(k), -gf / (nf - gf));
        c.at_least(1.0, ap.get(k));
    }
    checks.push(c.finish());

    let mut c = Check::new("coefficient_nonnegativity");
    for i in 0..d {
        c.at_least(coeffs.a[i], 0.0);
        c.at_least(coeffs.b[i], 0.0);
    }
    checks.push(c.finish());

    let mut c = Check::new("first_b_bound");
    c.at_least(GapConstants::new(g)?.c_hat / (nf * nf * nf), coeffs.b[0]);
    checks.push(c.finish());

    let mut c = Check::new("spectrum_simplification");
    let general = closed_form_spectrum(&coeffs);
    let simple = simplified_spectrum(&coeffs);
    for (x, y) in general.families.iter().zip(&simple.families) {
        c.equal(x.value, y.value);
    }
    checks.push(c.finish());

    if g == 2 {
        let df = d as f64;
        let mut c = Check::new("two_group_transforms");
        c.equal(ap.get(1), (df - 2.0) / (nf - 2.0));
        for k in 2..=d {
            c.equal(ap.get(k), -2.0 / (nf - 2.0));
        }
        for k in 1..n {
            c.equal(bp.get(k), -(1.0 - 2.0 / nf) * ap.get(k) - 2.0 / nf);
        }
        checks.push(c.finish());

        let mut c = Check::new("two_group_b_bound");
        c.at_least(4.0 * PI * PI / (nf * nf * nf), coeffs.b[0]);
        checks.push(c.finish());
    }

    Ok(IdentityReport { g, n, checks })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn two_group_coefficients_n8() {
        let c = coeffs_two_group(8).unwrap();
        let a = [
            0.569_035_593_728_849_1,
            1.0 / 3.0,
            0.097_631_072_937_817_5,
            0.0,
        ];
        let b = [
            0.073_223_304_703_363_12,
            0.25,
            0.426_776_695_296_636_9,
            0.25,
        ];
        for i in 0..4 {
            assert!(close(c.a[i], a[i], 1e-12), "a[{i}] = {}", c.a[i]);
            assert!(close(c.b[i], b[i], 1e-12), "b[{i}] = {}", c.b[i]);
        }
        assert_eq!(c.a[3], 0.0);
        assert!(c.b[0] <= 4.0 * PI * PI / 512.0);
    }

    #[test]
    fn two_group_rejects_bad_n() {
        assert!(coeffs_two_group(4).is_err());
        assert!(coeffs_two_group(7).is_err());
    }

    #[test]
    fn general_reduces_to_two_group() {
        for n in (6..=40).step_by(2) {
            let x = coeffs_general(n, 2).unwrap();
            let y = coeffs_two_group(n).unwrap();
            for i in 0..n / 2 {
                assert!(close(x.a[i], y.a[i], 1e-14));
                assert!(close(x.b[i], y.b[i], 1e-14));
            }
        }
    }

    #[test]
    fn general_rejects_bad_layouts() {
        assert!(coeffs_general(12, 3).is_err());
        assert!(coeffs_general(12, 8).is_err());
        assert!(coeffs_general(8, 8).is_err());
        assert!(coeffs_general(9, 2).is_err());
    }

    #[test]
    fn general_invariants() {
        for (n, g) in [(16, 4), (24, 4), (36, 6), (32, 8), (8, 2), (4, 2)] {
            let r = coeffs_general(n, g).unwrap().residuals();
            assert!(r.holds(1e-12, 1e-15), "({n},{g}): {r:?}");
        }
    }

    #[test]
    fn diagonal_and_block_sums() {
        for (n, g) in [(4, 2), (6, 2), (8, 4), (12, 4)] {
            let y = assemble(&coeffs_general(n, g).unwrap()).unwrap();
            let dense = y.densify().unwrap();
            for p in 0..n * n {
                assert_eq!(dense[(p, p)], 1.0 / n as f64);
            }
            for i in 0..n {
                for j in 0..n {
                    let s: f64 = (0..n)
                        .flat_map(|a| (0..n).map(move |b| (a, b)))
                        .map(|(a, b)| dense[(i * n + a, j * n + b)])
                        .sum();
                    assert!(
                        close(s, 1.0, 1e-13),
                        "block ({i},{j}) of ({n},{g}) sums to {s}"
                    );
                }
            }
        }
    }

    #[test]
    fn layout_counts() {
        let y = assemble(&coeffs_general(16, 4).unwrap()).unwrap();
        let l = y.layout();
        assert_eq!(l.identity_blocks + l.a_blocks + l.b_blocks, 256);
        assert_eq!(l.b_blocks, 4 * 3 * 16);
        let mut seen = [0usize; 3];
        for i in 0..16 {
            for j in 0..16 {
                seen[y.block_kind(i, j) as usize] += 1;
            }
        }
        assert_eq!(seen, [l.identity_blocks, l.a_blocks, l.b_blocks]);
    }

    #[test]
    fn densify_respects_cap() {
        let y = assemble(&coeffs_two_group(8).unwrap()).unwrap();
        assert!(matches!(y.densify_capped(63), Err(Error::Sizing { .. })));
    }

    #[test]
    fn spectrum_examples() {
        let s = closed_form_spectrum(&coeffs_two_group(8).unwrap());
        assert_eq!(s.total_multiplicity(), 64);
        let at = |k: usize, f: Family| {
            s.families
                .iter()
                .find(|e| e.k == k && e.family == f)
                .unwrap()
                .value
        };
        assert!(close(at(0, Family::CoupledZero), 16.0, 1e-12));
        assert!(close(at(0, Family::Middle), 0.0, 1e-12));
        assert!(close(at(0, Family::Plain), 0.0, 1e-12));
        for k in 1..8 {
            assert!(close(at(k, Family::CoupledZero), 0.0, 1e-12));
        }
        assert!(close(at(1, Family::Plain), 2.0 - 2.0 / 3.0, 1e-12));
        assert!(s.min_value() >= -1e-12);
    }

    #[test]
    fn akk_bounds() {
        let b = lower_bound_akk(&coeffs_two_group(8).unwrap());
        assert!(close(b.min, -1.0 / 3.0, 1e-14));
        assert!(close(b.lower_limit, -1.0 / 3.0, 0.0));
        assert!(b.holds());
        let b = lower_bound_akk(&coeffs_general(16, 4).unwrap());
        assert!(b.holds(), "{b:?}");
    }

    #[test]
    fn objective_examples() {
        let c8 = coeffs_two_group(8).unwrap();
        let y8 = assemble(&c8).unwrap();
        let inst = SimplicialInstance::make_equal(2, 4).unwrap();
        let v = objective_povh_rendl(&inst, &y8).unwrap();
        assert!(close(v, 1.171_572_875_253_81, 1e-9), "{v}");
        assert!(close(v, objective_closed_form(&c8), 1e-12));
        assert!(v <= 4.0 * PI * PI * 16.0 / 512.0);

        let c16 = coeffs_two_group(16).unwrap();
        let y16 = assemble(&c16).unwrap();
        let inst16 = SimplicialInstance::make_equal(2, 8).unwrap();
        assert!(close(
            objective_povh_rendl(&inst16, &y16).unwrap(),
            0.608_963_744,
            1e-8
        ));
    }

    #[test]
    fn objective_structure_mismatch() {
        let y = assemble(&coeffs_two_group(8).unwrap()).unwrap();
        let wrong = SimplicialInstance::make_equal(4, 2).unwrap();
        assert!(matches!(
            objective_povh_rendl(&wrong, &y),
            Err(Error::StructureMismatch(_))
        ));
        let uneven = SimplicialInstance::make_one_extra(2, 3).unwrap();
        assert!(objective_povh_rendl(&uneven, &y).is_err());
    }

    #[test]
    fn verify_passes_both_modes() {
        let tol = FeasibilityTolerances::default();
        for (n, g) in [(8, 2), (16, 4)] {
            let y = assemble(&coeffs_general(n, g).unwrap()).unwrap();
            for mode in [VerifyMode::Structured, VerifyMode::Dense] {
                let r = verify_povh_rendl(&y, &tol, mode).unwrap();
                assert!(r.pass, "{r:?}");
                assert!(r.max_equality_residual() <= 1e-12, "{r:?}");
                assert!(r.min_closed_form_eigenvalue >= -1e-10);
            }
        }
    }

    #[test]
    fn perturbed_b_fails_total_sum() {
        let mut c = coeffs_two_group(8).unwrap();
        c.b[1] += 0.1;
        let c = CertCoeffs::from_parts(8, 2, c.a, c.b).unwrap();
        let y = assemble(&c).unwrap();
        let tol = FeasibilityTolerances::default();
        for mode in [VerifyMode::Structured, VerifyMode::Dense] {
            let r = verify_povh_rendl(&y, &tol, mode).unwrap();
            assert!(!r.pass);
            // each of the g(g−1)(n/g)² = 32 B-blocks gains 0.1
            assert!(close(r.total_sum, 3.2, 1e-9), "{mode:?}: {}", r.total_sum);
        }
    }

    #[test]
    fn identities_hold() {
        for (n, g) in [(8, 2), (16, 4), (24, 4), (36, 6), (32, 8), (64, 2)] {
            let r = coefficient_identities(n, g).unwrap();
            assert!(r.max_residual() <= 1e-10, "({n},{g}): {r:?}");
        }
    }

    #[test]
    fn gap_constants_two_groups() {
        let k = GapConstants::new(2).unwrap();
        assert!(close(k.c, PI * PI, 1e-12));
        assert!(close(k.c_hat, 4.0 * PI * PI, 1e-12));
        assert!(close(k.c_tilde, PI * PI, 1e-12));
    }

    #[test]
    fn report_json_uses_decimal_strings() {
        let y = assemble(&coeffs_two_group(8).unwrap()).unwrap();
        let r = verify_povh_rendl(
            &y,
            &FeasibilityTolerances::default(),
            VerifyMode::Structured,
        )
        .unwrap();
        let s = serde_json::to_string(&r).unwrap();
        assert!(
            s.contains("\"tolerances\":{\"eq\":\"1.0000000000000001e-9\""),
            "{s}"
        );
        let back: FeasibilityReport = serde_json::from_str(&s).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), s);
    }
}
