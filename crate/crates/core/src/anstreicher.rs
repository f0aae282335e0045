//! Feasibility of the certificate for the Anstreicher relaxation, which
//! replaces the assignment and zero-pattern constraints by block sums, block
//! traces, `trace(Y·FᵀF) = 2n` and `Y − J/n² ⪰ 0`.

use serde::{Deserialize, Serialize};

use crate::certificate::{
    closed_form_spectrum, objective_povh_rendl, BlockKind, CertCoeffs, CertSpectrum, CertificateY,
    Family, FeasibilityTolerances,
};
use crate::circulant::SymmetricCirculant;
use crate::eigen::{sym_eigs_with, EigenOptions, DEFAULT_MAX_DIM};
use crate::error::Result;
use crate::instance::SimplicialInstance;
use crate::matrix::{kron, trace_inner, DenseSym, Matrix};
use crate::sigfig::{f64_str, opt_f64_str};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnstreicherReport {
    pub n: usize,
    pub g: usize,
    pub dense: bool,
    /// `‖Σ_i Y^(ii) − I‖∞`.
    #[serde(with = "f64_str")]
    pub residual_block_sum: f64,
    /// `‖(trace Y^(ij)) − I‖∞`.
    #[serde(with = "f64_str")]
    pub residual_trace_pattern: f64,
    /// `|trace(Y·FᵀF) − 2n|`.
    #[serde(with = "f64_str")]
    pub residual_f: f64,
    #[serde(with = "f64_str")]
    pub min_entry: f64,
    /// Minimum eigenvalue of `Y − J/n²` from the closed form.
    #[serde(with = "f64_str")]
    pub min_shifted_eigenvalue: f64,
    /// The same from the dense eigensolver.
    #[serde(with = "opt_f64_str")]
    pub min_shifted_numeric: Option<f64>,
    /// Largest gap between closed-form and numeric spectra of `2n(Y − J/n²)`.
    #[serde(with = "opt_f64_str")]
    pub spectrum_deviation: Option<f64>,
    pub pass: bool,
}

/// Eigenvalues of `2n(Y − J/n²)`: those of `2n·Y` with the all-ones
/// eigenvalue `2n` moved to zero.
pub fn shifted_spectrum(coeffs: &CertCoeffs) -> CertSpectrum {
    let mut s = closed_form_spectrum(coeffs);
    for e in &mut s.families {
        if e.k == 0 && e.family == Family::CoupledZero {
            e.value -= 2.0 * coeffs.n as f64;
        }
    }
    s
}

/// `F = [eᵀ ⊗ I; I ⊗ eᵀ]`, of shape `2n × n²`.
pub fn f_matrix(n: usize) -> Result<Matrix> {
    let e = Matrix::from_fn(1, n, |_, _| 1.0);
    let top = kron(&e, &Matrix::identity(n))?;
    let bottom = kron(&Matrix::identity(n), &e)?;
    Ok(Matrix::from_fn(2 * n, n * n, |r, c| {
        if r < n {
            top[(r, c)]
        } else {
            bottom[(r - n, c)]
        }
    }))
}

pub fn verify_anstreicher(y: &CertificateY, dense: bool) -> Result<AnstreicherReport> {
    verify_anstreicher_capped(y, dense, &FeasibilityTolerances::default(), DEFAULT_MAX_DIM)
}

pub fn verify_anstreicher_capped(
    y: &CertificateY,
    dense: bool,
    tol: &FeasibilityTolerances,
    max_dim: usize,
) -> Result<AnstreicherReport> {
    let n = y.n();
    let two_n = 2.0 * n as f64;
    let shifted = shifted_spectrum(y.coeffs());
    let mut report = if dense {
        let d = y.densify_capped(max_dim)?;
        let mut r = dense_checks(&d, n, y.g())?;
        let shift = DenseSym::ones(n * n).scale(1.0 / (n * n) as f64);
        let opts = EigenOptions {
            max_dim,
            ..EigenOptions::default()
        };
        let numeric = sym_eigs_with(&d.sub(&shift)?.scale(two_n), &opts)?;
        r.min_shifted_numeric = Some(numeric.min() / two_n);
        r.spectrum_deviation = shifted.to_spectrum().max_abs_diff(&numeric);
        r
    } else {
        structured_checks(y)
    };
    report.min_shifted_eigenvalue = shifted.min_value() / two_n;
    let eig_ok = |v: f64| v >= -tol.psd;
    report.pass = report.residual_block_sum <= tol.eq
        && report.residual_trace_pattern <= tol.eq
        && report.residual_f <= tol.eq
        && report.min_entry >= -tol.nonneg
        && eig_ok(report.min_shifted_eigenvalue)
        && report.min_shifted_numeric.is_none_or(eig_ok);
    Ok(report)
}

fn blank(n: usize, g: usize, dense: bool) -> AnstreicherReport {
    AnstreicherReport {
        n,
        g,
        dense,
        residual_block_sum: 0.0,
        residual_trace_pattern: 0.0,
        residual_f: 0.0,
        min_entry: f64::INFINITY,
        min_shifted_eigenvalue: f64::NAN,
        min_shifted_numeric: None,
        spectrum_deviation: None,
        pass: false,
    }
}

fn structured_checks(y: &CertificateY) -> AnstreicherReport {
    let (n, g) = (y.n(), y.g());
    let mut r = blank(n, g, false);
    let kinds = [BlockKind::Identity, BlockKind::A, BlockKind::B];
    let rows: Vec<Vec<f64>> = kinds
        .iter()
        .map(|&k| (0..n).map(|t| y.block_entry(k, 0, t)).collect())
        .collect();
    let trace_of = |k: BlockKind| n as f64 * rows[k as usize][0];
    let sum_of = |k: BlockKind| n as f64 * rows[k as usize].iter().sum::<f64>();

    // every block kind is circulant, so the block sum is too
    let mut diag_row = vec![0.0; n];
    let mut sum_diag_blocks = 0.0;
    let mut trace_total = 0.0;
    for i in 0..n {
        let k = y.block_kind(i, i);
        for (t, v) in rows[k as usize].iter().enumerate() {
            diag_row[t] += v;
        }
        sum_diag_blocks += sum_of(k);
        for j in 0..n {
            let k = y.block_kind(i, j);
            let want = if i == j { 1.0 } else { 0.0 };
            let tr = trace_of(k);
            trace_total += tr;
            r.residual_trace_pattern = r.residual_trace_pattern.max((tr - want).abs());
        }
    }
    r.residual_block_sum = diag_row
        .iter()
        .enumerate()
        .map(|(t, v)| (v - if t == 0 { 1.0 } else { 0.0 }).abs())
        .fold(0.0, f64::max);
    // trace(Y(J⊗I)) sums all block traces; trace(Y(I⊗J)) sums the diagonal blocks
    r.residual_f = (trace_total + sum_diag_blocks - 2.0 * n as f64).abs();
    r.min_entry = rows.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    r
}

fn dense_checks(y: &DenseSym, n: usize, g: usize) -> Result<AnstreicherReport> {
    let mut r = blank(n, g, true);
    let block = |i: usize, j: usize, a: usize, b: usize| y[(i * n + a, j * n + b)];
    for a in 0..n {
        for b in 0..n {
            let s: f64 = (0..n).map(|i| block(i, i, a, b)).sum();
            let want = if a == b { 1.0 } else { 0.0 };
            r.residual_block_sum = r.residual_block_sum.max((s - want).abs());
        }
    }
    for i in 0..n {
        for j in 0..n {
            let tr: f64 = (0..n).map(|a| block(i, j, a, a)).sum();
            let want = if i == j { 1.0 } else { 0.0 };
            r.residual_trace_pattern = r.residual_trace_pattern.max((tr - want).abs());
        }
    }
    let f = f_matrix(n)?;
    let ftf = DenseSym::try_from_matrix(f.transpose().matmul(&f)?)?;
    r.residual_f = (trace_inner(y, &ftf)? - 2.0 * n as f64).abs();
    r.min_entry = y.as_matrix().min_entry();
    Ok(r)
}

/// `½·trace((D ⊗ C_1)·Y)`. With a dense `Y` the Kronecker product is
/// materialised; otherwise the blockwise evaluation is used.
pub fn objective_anstreicher(
    inst: &SimplicialInstance,
    y: &CertificateY,
    dense: bool,
) -> Result<f64> {
    if !dense {
        return objective_povh_rendl(inst, y);
    }
    let d = DenseSym::try_from_matrix(inst.cost_matrix())?;
    let ring = SymmetricCirculant::basis(y.n(), 1)?.densify();
    let cost = d.kron(&ring)?;
    Ok(0.5 * trace_inner(&cost, &y.densify()?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificate::{assemble, coeffs_general, coeffs_two_group};

    #[test]
    fn f_gram_matrix() {
        let n = 3;
        let f = f_matrix(n).unwrap();
        let ftf = f.transpose().matmul(&f).unwrap();
        let j = Matrix::from_fn(n, n, |_, _| 1.0);
        let i = Matrix::identity(n);
        let want = kron(&j, &i).unwrap();
        let want2 = kron(&i, &j).unwrap();
        for p in 0..n * n {
            for q in 0..n * n {
                assert_eq!(ftf[(p, q)], want[(p, q)] + want2[(p, q)]);
            }
        }
    }

    #[test]
    fn n8_passes_both_modes() {
        let y = assemble(&coeffs_two_group(8).unwrap()).unwrap();
        for dense in [false, true] {
            let r = verify_anstreicher(&y, dense).unwrap();
            assert!(r.pass, "{r:?}");
            assert!(r.residual_block_sum <= 1e-12);
            assert!(r.residual_trace_pattern <= 1e-12);
            assert!(r.residual_f <= 1e-12);
            assert!(r.min_shifted_eigenvalue.abs() <= 1e-10);
        }
        let r = verify_anstreicher(&y, true).unwrap();
        assert!(r.spectrum_deviation.unwrap() <= 1e-8);
        assert!(r.min_shifted_numeric.unwrap().abs() <= 1e-10);
    }

    #[test]
    fn shifted_spectrum_shape() {
        let c = coeffs_two_group(8).unwrap();
        let plain = closed_form_spectrum(&c).to_y_spectrum();
        assert!((plain.max() - 1.0).abs() < 1e-12);
        let s = shifted_spectrum(&c);
        assert_eq!(s.total_multiplicity(), 64);
        let ys = s.to_y_spectrum();
        let second = plain.eigenvalues()[62];
        assert!((ys.max() - second).abs() < 1e-12);
        assert!(s.min_value() >= -1e-12);
    }

    #[test]
    fn objective_unchanged() {
        for n in [8, 16, 24] {
            let y = assemble(&coeffs_general(n, 2).unwrap()).unwrap();
            let inst = SimplicialInstance::make_equal(2, n / 2).unwrap();
            let a = objective_anstreicher(&inst, &y, true).unwrap();
            let b = objective_povh_rendl(&inst, &y).unwrap();
            assert!((a - b).abs() <= 1e-12, "n={n}: {a} vs {b}");
        }
    }
}
