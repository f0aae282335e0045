//! Simplicial TSP instances: vertices split into groups, cost 0 inside a
//! group and 1 across groups. Labels are group-contiguous.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::matrix::Matrix;

/// Largest vertex count the Held–Karp oracle accepts.
pub const DP_MAX_VERTICES: usize = 18;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "InstanceSpec", into = "InstanceSpec")]
pub struct SimplicialInstance {
    group_sizes: Vec<usize>,
    /// `group_of[v]` for every vertex.
    #[serde(skip)]
    group_of: Vec<usize>,
}

/// Wire form: `{"g": 2, "group_sizes": [5, 4]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub g: usize,
    pub group_sizes: Vec<usize>,
}

impl TryFrom<InstanceSpec> for SimplicialInstance {
    type Error = Error;

    fn try_from(spec: InstanceSpec) -> Result<Self> {
        if spec.g != spec.group_sizes.len() {
            return Err(invalid(format!(
                "g = {} but {} group sizes were given",
                spec.g,
                spec.group_sizes.len()
            )));
        }
        SimplicialInstance::from_group_sizes(spec.group_sizes)
    }
}

impl From<SimplicialInstance> for InstanceSpec {
    fn from(inst: SimplicialInstance) -> Self {
        InstanceSpec {
            g: inst.g(),
            group_sizes: inst.group_sizes,
        }
    }
}

impl SimplicialInstance {
    /// Any layout with at least two nonempty groups; `g` may be odd.
    pub fn from_group_sizes(group_sizes: Vec<usize>) -> Result<Self> {
        if group_sizes.len() < 2 {
            return Err(invalid("a simplicial instance needs at least two groups"));
        }
        if group_sizes.contains(&0) {
            return Err(invalid("every group must be nonempty"));
        }
        let group_of = group_sizes
            .iter()
            .enumerate()
            .flat_map(|(grp, size)| std::iter::repeat_n(grp, *size))
            .collect();
        Ok(SimplicialInstance {
            group_sizes,
            group_of,
        })
    }

    /// `g` equal groups of `per_group` vertices; cost matrix
    /// `(J_g - I_g) ⊗ J_per_group`.
    pub fn make_equal(g: usize, per_group: usize) -> Result<Self> {
        check_even_groups(g)?;
        if per_group < 2 {
            return Err(invalid(format!(
                "need at least 2 vertices per group, got {per_group}"
            )));
        }
        Self::from_group_sizes(vec![per_group; g])
    }

    /// Like [`make_equal`](Self::make_equal) but group 0 has one extra vertex,
    /// for `g·per_group + 1` vertices in total. `per_group = 1` is accepted so
    /// the three-vertex instance `{0, 1}, {2}` can be built.
    pub fn make_one_extra(g: usize, per_group: usize) -> Result<Self> {
        check_even_groups(g)?;
        if per_group < 1 {
            return Err(invalid("need at least 1 vertex per group"));
        }
        let mut sizes = vec![per_group; g];
        sizes[0] += 1;
        Self::from_group_sizes(sizes)
    }

    pub fn g(&self) -> usize {
        self.group_sizes.len()
    }

    pub fn group_sizes(&self) -> &[usize] {
        &self.group_sizes
    }

    pub fn n_total(&self) -> usize {
        self.group_of.len()
    }

    pub fn group_of(&self, v: usize) -> usize {
        self.group_of[v]
    }

    pub fn is_equal_layout(&self) -> bool {
        self.group_sizes.iter().all(|s| *s == self.group_sizes[0])
    }

    pub fn cost(&self, u: usize, v: usize) -> f64 {
        if self.group_of[u] == self.group_of[v] {
            0.0
        } else {
            1.0
        }
    }

    pub fn cost_matrix(&self) -> Matrix {
        let n = self.n_total();
        Matrix::from_fn(n, n, |u, v| self.cost(u, v))
    }

    pub fn is_metric(&self) -> bool {
        is_metric(&self.cost_matrix())
    }

    pub fn spec(&self) -> InstanceSpec {
        self.clone().into()
    }
}

fn check_even_groups(g: usize) -> Result<()> {
    if g < 2 || !g.is_multiple_of(2) {
        return Err(invalid(format!("g must be even and at least 2, got {g}")));
    }
    Ok(())
}

/// Symmetric, zero diagonal, and every triangle inequality holds exactly.
pub fn is_metric(costs: &Matrix) -> bool {
    if !costs.is_square() {
        return false;
    }
    let n = costs.rows();
    for u in 0..n {
        if costs[(u, u)] != 0.0 {
            return false;
        }
        for v in 0..n {
            if costs[(u, v)] != costs[(v, u)] || costs[(u, v)] < 0.0 {
                return false;
            }
            for w in 0..n {
                if costs[(u, v)] > costs[(u, w)] + costs[(w, v)] {
                    return false;
                }
            }
        }
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TspMethod {
    Analytic,
    Dp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TspValue {
    pub value: f64,
    pub method: TspMethod,
}

/// Optimal tour cost. Analytically every group is entered and left once, so
/// the optimum is `g`; the DP route is an independent Held–Karp check.
pub fn tsp_optimum(inst: &SimplicialInstance, method: TspMethod) -> Result<TspValue> {
    let value = match method {
        TspMethod::Analytic => inst.g() as f64,
        TspMethod::Dp => held_karp(&inst.cost_matrix())?,
    };
    Ok(TspValue { value, method })
}

/// Exact minimum Hamiltonian cycle cost by subset DP, tours anchored at
/// vertex 0.
pub fn held_karp(costs: &Matrix) -> Result<f64> {
    let n = costs.rows();
    if !costs.is_square() || n < 2 {
        return Err(invalid(
            "held_karp needs a square cost matrix with at least 2 vertices",
        ));
    }
    if n > DP_MAX_VERTICES {
        return Err(Error::Sizing {
            what: "Held-Karp vertices",
            requested: n,
            cap: DP_MAX_VERTICES,
        });
    }
    if n == 2 {
        return Ok(costs[(0, 1)] + costs[(1, 0)]);
    }
    // vertices 1..n map to bits 0..n-1
    let m = n - 1;
    let full = 1usize << m;
    let mut dp = vec![f64::INFINITY; full * m];
    for j in 0..m {
        dp[(1 << j) * m + j] = costs[(0, j + 1)];
    }
    for mask in 1..full {
        for last in 0..m {
            if mask & (1 << last) == 0 {
                continue;
            }
            let cur = dp[mask * m + last];
            if !cur.is_finite() {
                continue;
            }
            for next in 0..m {
                if mask & (1 << next) != 0 {
                    continue;
                }
                let nm = mask | (1 << next);
                let cand = cur + costs[(last + 1, next + 1)];
                let slot = &mut dp[nm * m + next];
                if cand < *slot {
                    *slot = cand;
                }
            }
        }
    }
    let last_mask = full - 1;
    Ok((0..m)
        .map(|j| dp[last_mask * m + j] + costs[(j + 1, 0)])
        .fold(f64::INFINITY, f64::min))
}
