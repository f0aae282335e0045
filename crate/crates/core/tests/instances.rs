use simplicial_gap::instance::{
    held_karp, tsp_optimum, SimplicialInstance, TspMethod, DP_MAX_VERTICES,
};
use simplicial_gap::matrix::{kron, Matrix};

/// Partitions of `n` into nonincreasing parts no larger than `max`.
fn partitions(n: usize, max: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for first in (1..=max.min(n)).rev() {
        for mut rest in partitions(n - first, first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

fn even_group_layouts(max_total: usize) -> Vec<Vec<usize>> {
    (3..=max_total)
        .flat_map(|n| partitions(n, n))
        .filter(|p| p.len() >= 2 && p.len() % 2 == 0)
        .collect()
}

#[test]
fn dp_matches_analytic_value() {
    let layouts = even_group_layouts(14);
    assert!(layouts.len() > 100);
    for sizes in layouts {
        let inst = SimplicialInstance::from_group_sizes(sizes.clone()).unwrap();
        let dp = tsp_optimum(&inst, TspMethod::Dp).unwrap().value;
        let analytic = tsp_optimum(&inst, TspMethod::Analytic).unwrap().value;
        assert_eq!(dp, analytic, "{sizes:?}");
    }
}

#[test]
fn cost_matrices_are_metric_zero_one() {
    for sizes in even_group_layouts(10) {
        let inst = SimplicialInstance::from_group_sizes(sizes.clone()).unwrap();
        let c = inst.cost_matrix();
        let n = c.rows();
        for u in 0..n {
            assert_eq!(c[(u, u)], 0.0);
            for v in 0..n {
                assert!(c[(u, v)] == 0.0 || c[(u, v)] == 1.0);
                assert_eq!(c[(u, v)], c[(v, u)]);
            }
        }
        assert!(inst.is_metric(), "{sizes:?}");
    }
}

#[test]
fn equal_layout_is_kron_of_group_pattern() {
    for g in [2, 4, 6] {
        for p in [2, 3, 5] {
            let inst = SimplicialInstance::make_equal(g, p).unwrap();
            let pattern = Matrix::from_fn(g, g, |i, j| if i == j { 0.0 } else { 1.0 });
            let want = kron(&pattern, &Matrix::from_fn(p, p, |_, _| 1.0)).unwrap();
            assert_eq!(inst.cost_matrix().max_abs_diff(&want), 0.0);
            if g * p <= DP_MAX_VERTICES {
                assert_eq!(held_karp(&inst.cost_matrix()).unwrap(), g as f64);
            }
        }
    }
}
