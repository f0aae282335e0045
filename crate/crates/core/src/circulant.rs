//! Symmetric circulant matrices over the basis `C_1..C_{m/2}`.
//!
//! `C_i` (for `i < m/2`) has ones at cyclic offsets `±i`; `C_{m/2}` has a 2 at
//! offset `m/2`. Every basis element therefore has zero diagonal and row sums
//! equal to 2. `C_0 = 2I` is deliberately not part of the basis: every
//! combination used here has zero diagonal, and anything that needs a diagonal
//! goes through the dense layer.

use serde::{Deserialize, Serialize};

use crate::eigen::Spectrum;
use crate::error::{invalid, Result};
use crate::matrix::DenseSym;
use crate::sigfig::f64_str;

/// `cos(π·num/den)` with the argument reduced exactly in integers first, so
/// multiples of `π/2` come out as exact `1`, `0` or `-1`.
pub fn cos_pi_ratio(num: i64, den: i64) -> f64 {
    assert!(den > 0, "denominator must be positive");
    let period = 2 * den;
    let mut r = num.rem_euclid(period);
    if r > den {
        r = period - r;
    }
    if r == 0 {
        1.0
    } else if r == den {
        -1.0
    } else if 2 * r == den {
        0.0
    } else if 2 * r > den {
        // cos(π - x) = -cos(x) keeps the argument in [0, π/2)
        -(std::f64::consts::PI * (den - r) as f64 / den as f64).cos()
    } else {
        (std::f64::consts::PI * r as f64 / den as f64).cos()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetricCirculant {
    m: usize,
    coeffs: Vec<f64>,
}

impl SymmetricCirculant {
    pub fn new(m: usize, coeffs: Vec<f64>) -> Result<Self> {
        if m == 0 || !m.is_multiple_of(2) {
            return Err(invalid(format!(
                "circulant dimension must be even and positive, got {m}"
            )));
        }
        if coeffs.len() != m / 2 {
            return Err(invalid(format!(
                "expected {} basis coefficients, got {}",
                m / 2,
                coeffs.len()
            )));
        }
        Ok(SymmetricCirculant { m, coeffs })
    }

    pub fn zero(m: usize) -> Result<Self> {
        Self::new(m, vec![0.0; m / 2])
    }

    /// The basis element `C_i`, `1 <= i <= m/2`.
    pub fn basis(m: usize, i: usize) -> Result<Self> {
        let mut c = Self::zero(m)?;
        if i == 0 || i > m / 2 {
            return Err(invalid(format!("basis index {i} outside 1..={}", m / 2)));
        }
        c.coeffs[i - 1] = 1.0;
        Ok(c)
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    /// `c_1..c_{m/2}`.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Entry at cyclic offset `t` (first row, column `t`).
    pub fn offset_value(&self, t: usize) -> f64 {
        let half = self.m / 2;
        let t = t % self.m;
        if t == 0 {
            0.0
        } else if t == half {
            2.0 * self.coeffs[half - 1]
        } else if t < half {
            self.coeffs[t - 1]
        } else {
            self.coeffs[self.m - t - 1]
        }
    }

    pub fn first_row(&self) -> Vec<f64> {
        (0..self.m).map(|t| self.offset_value(t)).collect()
    }

    pub fn entry(&self, s: usize, t: usize) -> f64 {
        self.offset_value((t + self.m - s % self.m) % self.m)
    }

    pub fn densify(&self) -> DenseSym {
        let row = self.first_row();
        let m = self.m;
        DenseSym::from_upper(m, |s, t| row[(t + m - s) % m])
    }

    /// Sum of one row; every row has the same sum.
    pub fn row_sum(&self) -> f64 {
        2.0 * self.coeffs.iter().sum::<f64>()
    }

    /// `Σ_st self_st other_st` computed from first rows only.
    pub fn trace_inner(&self, other: &SymmetricCirculant) -> Result<f64> {
        if self.m != other.m {
            return Err(crate::Error::DimensionMismatch(format!(
                "{} vs {}",
                self.m, other.m
            )));
        }
        let per_row: f64 = (0..self.m)
            .map(|t| self.offset_value(t) * other.offset_value(t))
            .sum();
        Ok(self.m as f64 * per_row)
    }

    /// `λ_k = 2 Σ_i c_i cos(2πik/m)` for `k = 0..m-1`, in `k` order.
    pub fn eigenvalues_by_index(&self) -> Vec<f64> {
        self.cosine_profile()
            .values
            .iter()
            .map(|v| 2.0 * v)
            .collect()
    }

    /// `Σ_i c_i cos(2πik/m)` for `k = 0..m-1`.
    pub fn cosine_profile(&self) -> CosineProfile {
        let m = self.m as i64;
        let values = (0..m)
            .map(|k| {
                self.coeffs
                    .iter()
                    .enumerate()
                    .map(|(idx, c)| c * cos_pi_ratio(2 * (idx as i64 + 1) * k, m))
                    .sum()
            })
            .collect();
        CosineProfile { n: self.m, values }
    }

    pub fn spectrum(&self) -> Spectrum {
        Spectrum::from_unsorted(self.eigenvalues_by_index())
    }
}

/// Eigenvalues of a symmetric circulant from Gray's formula, in real form.
pub fn circulant_spectrum(c: &SymmetricCirculant) -> Spectrum {
    c.spectrum()
}

pub fn cosine_profile(c: &SymmetricCirculant) -> CosineProfile {
    c.cosine_profile()
}

/// The cosine transform `x^(k) = Σ_i x_i cos(2πik/n)`, `k = 0..n-1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CosineProfile {
    pub n: usize,
    pub values: Vec<f64>,
}

impl CosineProfile {
    pub fn get(&self, k: usize) -> f64 {
        self.values[k % self.n]
    }

    /// Largest `|x^(k) - x^(n-k)|`, which is zero up to roundoff.
    pub fn reflection_defect(&self) -> f64 {
        (1..self.n)
            .map(|k| (self.values[k] - self.values[self.n - k]).abs())
            .fold(0.0, f64::max)
    }

    /// Minimum over `k >= 1`.
    pub fn min_nonzero_index(&self) -> f64 {
        self.values[1..]
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_nonzero_index(&self) -> f64 {
        self.values[1..]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Closed form of `Σ_{j=1}^{d} cos(πjk/d)` with `d = n/2`: `d` when `k` is a
/// multiple of `n`, else `(-1 + (-1)^k)/2`.
pub fn lagrange_cosine_sum(n: usize, k: i64) -> Result<f64> {
    if n == 0 || !n.is_multiple_of(2) {
        return Err(invalid(format!("n must be even and positive, got {n}")));
    }
    if k.rem_euclid(n as i64) == 0 {
        return Ok((n / 2) as f64);
    }
    Ok(if k.rem_euclid(2) == 0 { 0.0 } else { -1.0 })
}

/// Direct evaluation of `Σ_{j=1}^{d} cos(πjk/d)`.
pub fn cosine_sum_direct(n: usize, k: i64) -> f64 {
    let d = (n / 2) as i64;
    (1..=d).map(|j| cos_pi_ratio(j * k, d)).sum()
}

fn parity(x: i64) -> i64 {
    x.rem_euclid(2)
}

fn sign_pow(k: i64) -> f64 {
    if parity(k) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// One named identity evaluated over its full index grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub name: String,
    pub evaluations: usize,
    /// Max `|lhs - rhs|` for equalities; max shortfall below the bound for
    /// inequalities.
    #[serde(with = "f64_str")]
    pub max_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub g: usize,
    pub n: usize,
    pub checks: Vec<IdentityCheck>,
}

impl IdentityReport {
    pub fn max_residual(&self) -> f64 {
        self.checks
            .iter()
            .map(|c| c.max_residual)
            .fold(0.0, f64::max)
    }

    pub fn check(&self, name: &str) -> Option<&IdentityCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

struct Accumulator {
    name: &'static str,
    evaluations: usize,
    max_residual: f64,
}

impl Accumulator {
    fn new(name: &'static str) -> Self {
        Accumulator {
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

/// Evaluates both sides of the trigonometric and counting identities the
/// certificate construction rests on, for group count `g` and size `n`.
pub fn identity_suite(g: usize, n: usize) -> Result<IdentityReport> {
    if g < 2 || !g.is_multiple_of(2) {
        return Err(invalid(format!("g must be even and at least 2, got {g}")));
    }
    if n < 2 || !n.is_multiple_of(2) {
        return Err(invalid(format!("n must be even and at least 2, got {n}")));
    }
    let (gi, ni) = (g as i64, n as i64);
    let d = ni / 2;
    let mut checks = Vec::new();

    // Σ_{j=1}^{d} cos(πjk/d) = (-1 + (-1)^k)/2 for 0 < k < n
    let mut acc = Accumulator::new("cosine_sum_closed_form");
    for k in 0..=ni {
        acc.equal(cosine_sum_direct(n, k), lagrange_cosine_sum(n, k)?);
    }
    checks.push(acc.finish());

    let weights = |j: i64| (gi - j) as f64;

    let mut acc = Accumulator::new("odd_weighted_sum");
    let odd: f64 = (1..gi).filter(|j| parity(*j) == 1).map(weights).sum();
    acc.equal(odd, (gi * gi) as f64 / 4.0);
    checks.push(acc.finish());

    let mut acc = Accumulator::new("alternating_weighted_sum");
    let alt: f64 = (1..gi).map(|j| weights(j) * sign_pow(j)).sum();
    acc.equal(alt, -(gi as f64) / 2.0);
    checks.push(acc.finish());

    // (2cosθ - 2) Σ (g-j) cos(jθ) = cos(gθ) - g cosθ + (g-1), θ = πi/d
    let mut acc = Accumulator::new("weighted_cosine_product");
    for i in 1..=d {
        let cos_t = cos_pi_ratio(i, d);
        let lhs = (2.0 * cos_t - 2.0)
            * (1..gi)
                .map(|j| weights(j) * cos_pi_ratio(i * j, d))
                .sum::<f64>();
        let rhs = cos_pi_ratio(gi * i, d) - gi as f64 * cos_t + (gi - 1) as f64;
        acc.equal(lhs, rhs);
    }
    checks.push(acc.finish());

    // Σ_j (g-j) cos(πij/d) >= -g/2, which makes every a_i nonnegative
    let mut acc = Accumulator::new("weighted_cosine_lower_bound");
    for i in 1..=d {
        let s: f64 = (1..gi).map(|j| weights(j) * cos_pi_ratio(i * j, d)).sum();
        acc.at_least(s, -(gi as f64) / 2.0);
    }
    checks.push(acc.finish());

    // product-to-sum reduction of Σ_i cos(πij/d) cos(πik/d); the lower bound
    // needs at least two vertices per group
    let mut cases = Accumulator::new("cosine_product_cases");
    let mut lower = Accumulator::new("cosine_product_lower_bound");
    let bound_applies = n.is_multiple_of(g) && n >= 2 * g;
    for j in 1..gi {
        for k in 1..ni {
            let direct: f64 = (1..=d)
                .map(|i| cos_pi_ratio(i * j, d) * cos_pi_ratio(i * k, d))
                .sum();
            let closed = 0.5 * (lagrange_cosine_sum(n, j - k)? + lagrange_cosine_sum(n, j + k)?);
            cases.equal(direct, closed);
            if bound_applies {
                let indicator = if parity(j - k) == 1 { 1.0 } else { 0.0 };
                lower.at_least(direct, -indicator);
            }
        }
    }
    checks.push(cases.finish());
    if bound_applies {
        checks.push(lower.finish());
    }

    // Σ_j (g-j) 1{j-k odd} = (g(g-1) + g(-1)^k)/4
    let mut acc = Accumulator::new("parity_weighted_sum");
    for k in 0..ni {
        let lhs: f64 = (1..gi).filter(|j| parity(j - k) == 1).map(weights).sum();
        let rhs = 0.25 * ((gi * (gi - 1)) as f64 + gi as f64 * sign_pow(k));
        acc.equal(lhs, rhs);
    }
    checks.push(acc.finish());

    Ok(IdentityReport { g, n, checks })
}
