use std::time::Instant;

use simplicial_gap::certificate::{assemble, coeffs_general};
use simplicial_gap::instance::SimplicialInstance;
use simplicial_gap::reduced::{build_reduction, objective_reduced};
use simplicial_gap::sdp::{encode_reduced, nonmonotonicity_check, solve, SolveOptions};

#[test]
fn three_vertex_value_is_two() {
    let inst = SimplicialInstance::make_one_extra(2, 1).unwrap();
    let red = build_reduction(&inst, 0, 0).unwrap();
    let p = encode_reduced(&inst, &red).unwrap();
    let s = solve(&p, &SolveOptions::default()).unwrap();
    assert!(s.converged, "{s:?}");
    assert!(
        (s.objective_value - 2.0).abs() <= 1e-3,
        "{}",
        s.objective_value
    );
}

#[test]
fn five_vertex_value_below_certificate() {
    let inst = SimplicialInstance::make_one_extra(2, 2).unwrap();
    let red = build_reduction(&inst, 0, 0).unwrap();
    let p = encode_reduced(&inst, &red).unwrap();
    assert_eq!(p.dim, 16);

    let y = assemble(&coeffs_general(4, 2).unwrap()).unwrap();
    let dense = y.densify().unwrap();
    let cert = objective_reduced(&y, &red).unwrap().total();
    assert!((p.objective_at(&dense).unwrap() - cert).abs() <= 1e-12);
    assert!(p.max_equality_residual(&dense).unwrap() <= 1e-12);

    let start = Instant::now();
    let s = solve(&p, &SolveOptions::default()).unwrap();
    eprintln!(
        "5-vertex: {:?} in {:?}, value {} vs certificate {cert}",
        s.iterations,
        start.elapsed(),
        s.objective_value
    );
    assert!(s.converged);
    assert!(s.objective_value <= cert + 1e-3);
}

#[test]
fn non_monotonic() {
    let r = nonmonotonicity_check().unwrap();
    assert!(r.conclusive);
    assert!(r.non_monotonic);
    assert!(r.margin >= 0.3, "{r:?}");
}

#[test]
fn trace_minimisation_sanity() {
    use simplicial_gap::matrix::DenseSym;
    use simplicial_gap::sdp::{Constraint, SdpProblem};
    for m in [3, 5, 8] {
        let c = Constraint {
            a: DenseSym::ones(m),
            b: m as f64,
        };
        let p = SdpProblem::new(DenseSym::identity(m), vec![c], true, true).unwrap();
        let s = solve(&p, &SolveOptions::default()).unwrap();
        assert!(s.converged);
        assert!(
            (s.objective_value - 1.0).abs() <= 1e-4,
            "m={m}: {}",
            s.objective_value
        );
        let j = DenseSym::ones(m).scale(1.0 / m as f64);
        assert!(s.y_hat.as_matrix().max_abs_diff(j.as_matrix()) <= 1e-3);
    }
}
