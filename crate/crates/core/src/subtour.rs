//! The subtour elimination LP over edge variables, solved by a dense
//! two-phase bounded-variable tableau simplex (Dantzig pricing with a Bland
//! fallback) and cut generation through global minimum cuts.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::instance::SimplicialInstance;
use crate::matrix::Matrix;
use crate::sigfig::f64_str;

pub const MAX_LP_VERTICES: usize = 60;
pub const DEFAULT_MAX_PIVOTS: usize = 10_000;
pub const DEFAULT_MAX_ROUNDS: usize = 500;
pub const CUT_THRESHOLD: f64 = 2.0 - 1e-6;

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

/// `min cᵀx` subject to the rows and `0 ≤ x ≤ upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lp {
    pub cost: Vec<f64>,
    pub rows: Vec<(Vec<f64>, Sense, f64)>,
    /// Per-variable upper bounds, `f64::INFINITY` for none.
    pub upper: Vec<f64>,
}

impl Lp {
    /// An LP with no upper bounds.
    pub fn new(cost: Vec<f64>, rows: Vec<(Vec<f64>, Sense, f64)>) -> Self {
        let upper = vec![f64::INFINITY; cost.len()];
        Lp { cost, rows, upper }
    }

    pub fn with_upper(mut self, upper: Vec<f64>) -> Self {
        self.upper = upper;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpResult {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
}

/// Bounded-variable tableau. Nonbasic columns sit at zero or, when
/// `at_upper` is set, at their upper bound; `beta` holds the basic values.
struct Tableau {
    t: Vec<Vec<f64>>,
    beta: Vec<f64>,
    basis: Vec<usize>,
    upper: Vec<f64>,
    at_upper: Vec<bool>,
}

impl Tableau {
    fn cols(&self) -> usize {
        self.upper.len()
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.t[r][c];
        for v in self.t[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
        self.basis[r] = c;
    }

    /// Reduced costs of `cost` over the current basis.
    fn reduced(&self, cost: &[f64]) -> Vec<f64> {
        let mut d = cost.to_vec();
        for (r, &b) in self.basis.iter().enumerate() {
            let cb = cost[b];
            if cb != 0.0 {
                for (j, dj) in d.iter_mut().enumerate() {
                    *dj -= cb * self.t[r][j];
                }
            }
        }
        d
    }

    /// Pivots until optimal. Entering columns follow Dantzig's rule until
    /// `STALL` consecutive degenerate steps, then Bland's rule until the
    /// objective moves again, which rules out cycling. `allowed` masks
    /// columns that may enter.
    fn run(&mut self, cost: &[f64], allowed: &[bool], pivots: &mut usize, max: usize) -> LpStatus {
        const STALL: usize = 50;
        let mut degenerate_run = 0;
        let mut is_basic = vec![false; self.cols()];
        for &b in &self.basis {
            is_basic[b] = true;
        }
        loop {
            let d = self.reduced(cost);
            let bland = degenerate_run >= STALL;
            // improvement per unit step: increase from zero or decrease from the bound
            let gain = |j: usize| if self.at_upper[j] { d[j] } else { -d[j] };
            let candidates =
                (0..self.cols()).filter(|&j| allowed[j] && !is_basic[j] && gain(j) > EPS);
            let enter = if bland {
                candidates.min()
            } else {
                candidates.max_by(|&a, &b| gain(a).total_cmp(&gain(b)))
            };
            let Some(enter) = enter else {
                return LpStatus::Optimal;
            };
            let sigma = if self.at_upper[enter] { -1.0 } else { 1.0 };

            // the binding basic variable, ties to the smallest basis index
            let mut leave: Option<(usize, bool, f64)> = None;
            for r in 0..self.t.len() {
                let rate = -sigma * self.t[r][enter];
                let b = self.basis[r];
                let (limit, to_upper) = if rate < -EPS {
                    (self.beta[r].max(0.0) / -rate, false)
                } else if rate > EPS && self.upper[b].is_finite() {
                    ((self.upper[b] - self.beta[r]).max(0.0) / rate, true)
                } else {
                    continue;
                };
                let better = match leave {
                    None => true,
                    Some((lr, _, best)) => {
                        limit < best - EPS || (limit <= best + EPS && b < self.basis[lr])
                    }
                };
                if better {
                    leave = Some((r, to_upper, limit));
                }
            }
            // a strictly smaller entering bound means a bound flip
            let flip = self.upper[enter];
            let (step, leave) = match leave {
                Some((r, to_upper, limit)) if limit <= flip + EPS => (limit, Some((r, to_upper))),
                _ => (flip, None),
            };
            if step.is_infinite() {
                return LpStatus::Unbounded;
            }
            if *pivots >= max {
                return LpStatus::IterationLimit;
            }
            *pivots += 1;
            degenerate_run = if step <= EPS { degenerate_run + 1 } else { 0 };
            for r in 0..self.t.len() {
                self.beta[r] -= sigma * self.t[r][enter] * step;
            }
            match leave {
                None => self.at_upper[enter] = !self.at_upper[enter],
                Some((r, to_upper)) => {
                    let old = self.basis[r];
                    let value = if self.at_upper[enter] {
                        self.upper[enter] - step
                    } else {
                        step
                    };
                    self.pivot(r, enter);
                    self.beta[r] = value;
                    self.at_upper[enter] = false;
                    self.at_upper[old] = to_upper;
                    is_basic[old] = false;
                    is_basic[enter] = true;
                }
            }
        }
    }
}

/// Two-phase bounded-variable simplex; see `Tableau::run` for the pricing
/// rule.
pub fn simplex(lp: &Lp, max_pivots: usize) -> LpResult {
    let n = lp.cost.len();
    let m = lp.rows.len();
    // columns: structural, one slack/surplus per inequality, one artificial per row needing it
    let mut slack_of = vec![None; m];
    let mut art_of = vec![None; m];
    let mut cols = n;
    for (i, (_, sense, _)) in lp.rows.iter().enumerate() {
        if *sense != Sense::Eq {
            slack_of[i] = Some(cols);
            cols += 1;
        }
    }
    let first_art = cols;
    for i in 0..m {
        let (_, sense, b) = &lp.rows[i];
        let slack_feasible = match sense {
            Sense::Le => *b >= 0.0,
            Sense::Ge => *b <= 0.0,
            Sense::Eq => false,
        };
        if !slack_feasible {
            art_of[i] = Some(cols);
            cols += 1;
        }
    }

    let mut t = Vec::with_capacity(m);
    let mut beta = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    for i in 0..m {
        let (a, sense, b) = &lp.rows[i];
        let mut row = vec![0.0; cols];
        row[..n].copy_from_slice(a);
        if let Some(s) = slack_of[i] {
            row[s] = if *sense == Sense::Le { 1.0 } else { -1.0 };
        }
        let mut rhs = *b;
        // artificials need a nonnegative right-hand side
        if art_of[i].is_some() && rhs < 0.0 {
            for v in row.iter_mut() {
                *v = -*v;
            }
            rhs = -rhs;
        }
        match art_of[i] {
            Some(a) => {
                row[a] = 1.0;
                basis.push(a);
            }
            None => basis.push(slack_of[i].expect("slack-feasible rows have a slack")),
        }
        t.push(row);
        beta.push(rhs);
    }
    let mut upper = vec![f64::INFINITY; cols];
    upper[..n].copy_from_slice(&lp.upper);
    let mut tab = Tableau {
        t,
        beta,
        basis,
        upper,
        at_upper: vec![false; cols],
    };
    let mut pivots = 0;

    let mut phase1 = vec![0.0; cols];
    for c in phase1.iter_mut().skip(first_art) {
        *c = 1.0;
    }
    let all = vec![true; cols];
    let status = tab.run(&phase1, &all, &mut pivots, max_pivots);
    if status == LpStatus::IterationLimit {
        return finish(&tab, lp, n, LpStatus::IterationLimit, pivots);
    }
    let infeas: f64 = tab
        .basis
        .iter()
        .enumerate()
        .filter(|(_, &b)| b >= first_art)
        .map(|(r, _)| tab.beta[r])
        .sum();
    if infeas > 1e-7 {
        return finish(&tab, lp, n, LpStatus::Infeasible, pivots);
    }
    // drive zero-level artificials out where a real column can replace them
    for r in 0..m {
        if tab.basis[r] >= first_art {
            let nonbasic = |j: &usize| !tab.basis.contains(j);
            if let Some(c) = (0..first_art)
                .filter(nonbasic)
                .find(|&j| tab.t[r][j].abs() > EPS)
            {
                let value = if tab.at_upper[c] { tab.upper[c] } else { 0.0 };
                tab.pivot(r, c);
                tab.beta[r] = value;
                tab.at_upper[c] = false;
            }
        }
    }

    let mut phase2 = vec![0.0; cols];
    phase2[..n].copy_from_slice(&lp.cost);
    let allowed: Vec<bool> = (0..cols).map(|j| j < first_art).collect();
    let status = tab.run(&phase2, &allowed, &mut pivots, max_pivots);
    finish(&tab, lp, n, status, pivots)
}

fn finish(tab: &Tableau, lp: &Lp, n: usize, status: LpStatus, pivots: usize) -> LpResult {
    let mut x: Vec<f64> = (0..n)
        .map(|j| if tab.at_upper[j] { tab.upper[j] } else { 0.0 })
        .collect();
    for (r, &b) in tab.basis.iter().enumerate() {
        if b < n {
            x[b] = tab.beta[r];
        }
    }
    let objective = x.iter().zip(&lp.cost).map(|(a, c)| a * c).sum();
    LpResult {
        status,
        x,
        objective,
        pivots,
    }
}

/// Stoer–Wagner global minimum cut of a symmetric nonnegative weight
/// matrix. Returns the cut value and the vertices on one side.
pub fn min_cut(weights: &Matrix) -> Result<(f64, Vec<usize>)> {
    let n = weights.rows();
    if n < 2 || !weights.is_square() {
        return Err(invalid(
            "min_cut needs a square matrix with at least two vertices",
        ));
    }
    let mut w: Vec<Vec<f64>> = (0..n).map(|i| weights.row(i).to_vec()).collect();
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut active: Vec<usize> = (0..n).collect();
    let mut best = (f64::INFINITY, Vec::new());

    while active.len() > 1 {
        let mut added = vec![false; n];
        let mut conn = vec![0.0; n];
        let mut prev = active[0];
        let mut last = active[0];
        added[last] = true;
        for &v in &active {
            conn[v] = w[last][v];
        }
        for _ in 1..active.len() {
            let next = *active
                .iter()
                .filter(|&&v| !added[v])
                .max_by(|&&a, &&b| conn[a].total_cmp(&conn[b]).then(b.cmp(&a)))
                .expect("an unadded vertex remains");
            prev = last;
            last = next;
            added[next] = true;
            for &v in &active {
                if !added[v] {
                    conn[v] += w[next][v];
                }
            }
        }
        // cut of the phase separates `last` from everything else
        let cut: f64 = active
            .iter()
            .filter(|&&v| v != last)
            .map(|&v| w[last][v])
            .sum();
        if cut < best.0 {
            best = (cut, members[last].clone());
        }
        let moved = std::mem::take(&mut members[last]);
        members[prev].extend(moved);
        for &v in &active {
            let x = w[last][v];
            w[prev][v] += x;
            w[v][prev] += x;
        }
        w[prev][prev] = 0.0;
        active.retain(|&v| v != last);
    }
    let mut side = best.1;
    side.sort_unstable();
    Ok((best.0, side))
}

/// Vertex sets of the connected components of the positive-weight support.
fn components(weights: &Matrix) -> Vec<Vec<usize>> {
    let n = weights.rows();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for s in 0..n {
        if seen[s] {
            continue;
        }
        let mut comp = vec![s];
        seen[s] = true;
        let mut k = 0;
        while k < comp.len() {
            let u = comp[k];
            for v in 0..n {
                if !seen[v] && weights[(u, v)] > EPS {
                    seen[v] = true;
                    comp.push(v);
                }
            }
            k += 1;
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeValue(pub usize, pub usize, #[serde(with = "f64_str")] pub f64);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpEdgeSolution {
    pub n: usize,
    pub edges: Vec<EdgeValue>,
    #[serde(with = "f64_str")]
    pub objective: f64,
    pub cuts_added: usize,
    pub cut_sets: Vec<Vec<usize>>,
    /// Minimum cut of the final support.
    #[serde(with = "f64_str")]
    pub min_cut: f64,
    pub rounds: usize,
    pub pivots: usize,
    pub status: LpStatus,
}

impl LpEdgeSolution {
    pub fn value(&self, u: usize, v: usize) -> f64 {
        let (a, b) = if u < v { (u, v) } else { (v, u) };
        self.edges
            .iter()
            .find(|e| e.0 == a && e.1 == b)
            .map_or(0.0, |e| e.2)
    }

    pub fn weights(&self) -> Matrix {
        let mut w = Matrix::zeros(self.n, self.n);
        for e in &self.edges {
            w[(e.0, e.1)] = e.2;
            w[(e.1, e.0)] = e.2;
        }
        w
    }

    pub fn crossing(&self, set: &[usize]) -> f64 {
        let mut inside = vec![false; self.n];
        for &v in set {
            inside[v] = true;
        }
        self.edges
            .iter()
            .filter(|e| inside[e.0] != inside[e.1])
            .map(|e| e.2)
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubtourOptions {
    pub max_pivots: usize,
    pub max_rounds: usize,
}

impl Default for SubtourOptions {
    fn default() -> Self {
        SubtourOptions {
            max_pivots: DEFAULT_MAX_PIVOTS,
            max_rounds: DEFAULT_MAX_ROUNDS,
        }
    }
}

pub fn solve_subtour(inst: &SimplicialInstance) -> Result<LpEdgeSolution> {
    solve_subtour_costs(&inst.cost_matrix(), &SubtourOptions::default())
}

/// Subtour LP for an arbitrary symmetric cost matrix.
pub fn solve_subtour_costs(costs: &Matrix, opts: &SubtourOptions) -> Result<LpEdgeSolution> {
    let n = costs.rows();
    if !costs.is_square() || n < 3 {
        return Err(invalid(
            "the subtour LP needs a square cost matrix on at least 3 vertices",
        ));
    }
    if n > MAX_LP_VERTICES {
        return Err(crate::error::Error::Sizing {
            what: "subtour LP vertices",
            requested: n,
            cap: MAX_LP_VERTICES,
        });
    }
    let edges: Vec<(usize, usize)> = (0..n)
        .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
        .collect();
    let ne = edges.len();
    let cost: Vec<f64> = edges.iter().map(|&(u, v)| costs[(u, v)]).collect();
    let mut rows: Vec<(Vec<f64>, Sense, f64)> = Vec::new();
    for v in 0..n {
        let a = edges
            .iter()
            .map(|&(p, q)| if p == v || q == v { 1.0 } else { 0.0 })
            .collect();
        rows.push((a, Sense::Eq, 2.0));
    }

    let mut cut_sets: Vec<Vec<usize>> = Vec::new();
    let mut pivots = 0;
    let mut rounds = 0;
    loop {
        rounds += 1;
        let lp = Lp::new(cost.clone(), rows.clone()).with_upper(vec![1.0; ne]);
        let res = simplex(&lp, opts.max_pivots);
        pivots += res.pivots;
        let mut sol = LpEdgeSolution {
            n,
            edges: edges
                .iter()
                .zip(&res.x)
                .filter(|(_, x)| **x > EPS)
                .map(|(&(u, v), &x)| EdgeValue(u, v, x))
                .collect(),
            objective: res.objective,
            cuts_added: cut_sets.len(),
            cut_sets: cut_sets.clone(),
            min_cut: f64::NAN,
            rounds,
            pivots,
            status: res.status,
        };
        if res.status != LpStatus::Optimal {
            return Ok(sol);
        }
        let w = sol.weights();
        let comps = components(&w);
        let mut new_cuts: Vec<Vec<usize>> = if comps.len() > 1 {
            sol.min_cut = 0.0;
            comps
        } else {
            let (value, side) = min_cut(&w)?;
            sol.min_cut = value;
            if value < CUT_THRESHOLD {
                vec![side]
            } else {
                Vec::new()
            }
        };
        new_cuts.retain(|s| !cut_sets.contains(s));
        if new_cuts.is_empty() {
            if sol.min_cut < CUT_THRESHOLD {
                // a repeated violated cut means the LP solve is not honouring it
                sol.status = LpStatus::IterationLimit;
            }
            return Ok(sol);
        }
        if rounds >= opts.max_rounds {
            sol.status = LpStatus::IterationLimit;
            return Ok(sol);
        }
        for set in new_cuts {
            let mut inside = vec![false; n];
            for &v in &set {
                inside[v] = true;
            }
            let a = edges
                .iter()
                .map(|&(p, q)| if inside[p] != inside[q] { 1.0 } else { 0.0 })
                .collect();
            rows.push((a, Sense::Ge, 2.0));
            cut_sets.push(set);
        }
    }
}
