//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::f64::consts::PI;
use std::process::Command;
use std::time::{Duration, Instant};

use simplicial_gap::anstreicher::objective_anstreicher;
use simplicial_gap::certificate::{
    assemble, coeffs_general, coeffs_two_group, objective_closed_form, objective_povh_rendl,
};
use simplicial_gap::instance::{tsp_optimum, SimplicialInstance, TspMethod};
use simplicial_gap::reduced::gap_table;
use simplicial_gap_cli::{baseline_report, identities_output, CertifyOutput, TinyReport};

const EQ_TOL: f64 = 1e-9;
const PSD_TOL: f64 = 1e-8;
const SPECTRUM_TOL: f64 = 1e-8;
const DENSE_MAX_N: usize = 36;
const CERT_CONFIGS: [(usize, usize); 6] = [(2, 8), (2, 16), (2, 32), (4, 16), (4, 32), (6, 36)];

type Verdict = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_secs: u64) -> Result<(), String> {
    ensure(elapsed <= Duration::from_secs(limit_secs), || {
        format!("took {elapsed:.2?}, limit {limit_secs} s")
    })
}

fn cli(args: &[&str]) -> Result<(i32, String), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_simplicial-gap"))
        .args(args)
        .output()
        .map_err(|e| format!("cannot run the binary: {e}"))?;
    let code = out.status.code().unwrap_or(-1);
    Ok((code, String::from_utf8_lossy(&out.stdout).into_owned()))
}

fn certify(g: usize, n: usize, dense: bool) -> Result<CertifyOutput, String> {
    let (g_s, n_s) = (g.to_string(), n.to_string());
    let mut args = vec!["certify", "--g", &g_s, "--n", &n_s];
    if dense {
        args.push("--dense");
    }
    let (code, text) = cli(&args)?;
    ensure(code == 0, || {
        format!("certify g={g} n={n} exited with {code}")
    })?;
    serde_json::from_str(&text).map_err(|e| format!("certify output does not parse: {e}"))
}

/// Certificate feasibility for both verification routes.
fn criterion_1(runs: &[(usize, usize, CertifyOutput)], elapsed: Duration) -> Verdict {
    let mut worst_res: f64 = 0.0;
    let mut worst_eig = f64::INFINITY;
    for (g, n, out) in runs {
        let r = &out.reports[0];
        ensure(r.pass, || format!("g={g} n={n} failed"))?;
        ensure(r.dense == (*n <= DENSE_MAX_N), || {
            format!("g={g} n={n}: dense oracle not run")
        })?;
        for f in &r.povh_rendl {
            worst_res = worst_res.max(f.max_equality_residual());
            let eig = f
                .min_numeric_eigenvalue
                .unwrap_or(f.min_closed_form_eigenvalue);
            worst_eig = worst_eig.min(eig.min(f.min_closed_form_eigenvalue));
        }
    }
    ensure(worst_res <= EQ_TOL, || format!("residual {worst_res:e}"))?;
    ensure(worst_eig >= -PSD_TOL, || {
        format!("min eigenvalue {worst_eig:e}")
    })?;
    within(elapsed, 120)?;
    Ok(format!(
        "max residual {worst_res:.1e}, min eigenvalue {worst_eig:.1e}, {elapsed:.2?}"
    ))
}

/// Closed-form and dense spectra agree.
fn criterion_2(runs: &[(usize, usize, CertifyOutput)]) -> Verdict {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for (g, n, out) in runs.iter().filter(|r| r.1 <= DENSE_MAX_N) {
        let dev = out.reports[0]
            .povh_rendl
            .iter()
            .find_map(|f| f.spectrum_deviation)
            .ok_or_else(|| format!("g={g} n={n}: no dense spectrum"))?;
        worst = worst.max(dev);
        count += 1;
    }
    ensure(worst <= SPECTRUM_TOL, || format!("deviation {worst:e}"))?;
    Ok(format!("{count} configurations, max deviation {worst:.1e}"))
}

/// Trigonometric and coefficient identity suites.
fn criterion_3() -> Verdict {
    let start = Instant::now();
    let ns: Vec<usize> = (4..=200).step_by(2).collect();
    let out = identities_output(&[2, 4, 6, 8, 10], &ns, EQ_TOL).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure(out.pass, || format!("max residual {:e}", out.max_residual))?;
    within(elapsed, 30)?;
    Ok(format!(
        "{} grids, max residual {:.1e}, {elapsed:.2?}",
        out.entries.len(),
        out.max_residual
    ))
}

/// Two-group objective decays below the bound and the gap ratio grows.
fn criterion_4() -> Verdict {
    let mut n = 8;
    while n <= 512 {
        let c = coeffs_two_group(n).map_err(|e| e.to_string())?;
        let nf = n as f64;
        let d = nf / 2.0;
        let obj = objective_closed_form(&c);
        let bound = 4.0 * PI * PI * d * d / nf.powi(3);
        ensure(obj <= bound, || format!("n={n}: {obj} > {bound}"))?;
        n += 2;
    }
    let ratio = 2.0 / objective_closed_form(&coeffs_two_group(512).map_err(|e| e.to_string())?);
    ensure(ratio > 10.0, || format!("ratio {ratio} at n = 512"))?;
    Ok(format!(
        "bound holds for even n in 8..=512, ratio {ratio:.2} at n = 512"
    ))
}

fn gap_grid(z: usize) -> Vec<usize> {
    let g = 2 * z;
    (2..=40).map(|p| g * p).filter(|&n| n >= 6).collect()
}

/// Reduced-SDP gap thresholds and monotone columns.
fn criterion_5() -> Verdict {
    let start = Instant::now();
    let mut notes = Vec::new();
    for (z, n, threshold) in [(1, 64, 1.7), (2, 128, 1.8), (3, 192, 2.6)] {
        let table = gap_table(z, &gap_grid(z)).map_err(|e| e.to_string())?;
        let row = table
            .iter()
            .find(|r| r.n == n)
            .ok_or("threshold size missing from grid")?;
        ensure(row.certified, || format!("z={z} n={n} not certified"))?;
        ensure(row.gap_lower_bound > threshold, || {
            format!("z={z} n={n}: {} <= {threshold}", row.gap_lower_bound)
        })?;
        for w in table.windows(2) {
            ensure(w[1].gap_lower_bound >= w[0].gap_lower_bound, || {
                format!("z={z}: decreases at n={}", w[1].n)
            })?;
        }
        notes.push(format!("z={z} n={n}: {:.5}", row.gap_lower_bound));
    }
    let elapsed = start.elapsed();
    within(elapsed, 60)?;
    Ok(format!("{}, {elapsed:.2?}", notes.join("; ")))
}

/// The diagonal correction term is exact.
fn criterion_6() -> Verdict {
    let mut checked = 0;
    for z in 1..=4 {
        let table = gap_table(z, &gap_grid(z)).map_err(|e| e.to_string())?;
        for r in &table {
            if z == 1 {
                ensure((r.diag_term - 1.0).abs() <= 1e-12, || {
                    format!("n={}: {}", r.n, r.diag_term)
                })?;
            }
            ensure(r.diag_term <= 2.0 + 1e-12, || {
                format!("z={z} n={}: {}", r.n, r.diag_term)
            })?;
            checked += 1;
        }
    }
    Ok(format!("{checked} rows, z = 1 exactly 1, all at most 2"))
}

/// Feasibility and objective for the Anstreicher relaxation.
fn criterion_7() -> Verdict {
    let mut worst: f64 = 0.0;
    for n in [8, 16, 24] {
        let out = certify(2, n, true)?;
        let r = &out.reports[0];
        ensure(
            r.anstreicher.len() == 2 && r.anstreicher.iter().all(|a| a.pass),
            || format!("n={n}: Anstreicher checks failed"),
        )?;
        let y = assemble(&coeffs_general(n, 2).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        let inst = SimplicialInstance::make_equal(2, n / 2).map_err(|e| e.to_string())?;
        let full = objective_povh_rendl(&inst, &y).map_err(|e| e.to_string())?;
        for dense in [false, true] {
            let v = objective_anstreicher(&inst, &y, dense).map_err(|e| e.to_string())?;
            worst = worst.max((v - full).abs());
        }
    }
    ensure(worst <= 1e-12, || format!("objective difference {worst:e}"))?;
    Ok(format!(
        "n in {{8, 16, 24}} pass, objective difference {worst:.1e}"
    ))
}

/// The three-vertex optimum exceeds the seventeen-vertex certificate bound.
fn criterion_8() -> Verdict {
    let start = Instant::now();
    let (code, text) = cli(&["solve-tiny", "--n", "16"])?;
    let elapsed = start.elapsed();
    let r: TinyReport = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let nm = r.nonmonotonicity.ok_or("no comparison in report")?;
    ensure(code == 0, || format!("solve-tiny exited with {code}"))?;
    ensure((r.value - 2.0).abs() <= 1e-3, || {
        format!("three-vertex value {}", r.value)
    })?;
    ensure(nm.margin >= 0.3, || format!("margin {}", nm.margin))?;
    within(elapsed, 120)?;
    Ok(format!(
        "value {:.6}, bound {:.6}, margin {:.4}, {elapsed:.2?}",
        r.value, nm.large_bound, nm.margin
    ))
}

/// Subtour LP value equals the TSP value.
fn criterion_9() -> Verdict {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for g in [2, 3, 4, 6] {
        for p in [2, 3, 4] {
            let r = baseline_report(g, p).map_err(|e| e.to_string())?;
            ensure(r.subtour_agrees, || {
                format!(
                    "g={g} p={p}: {:?} {}",
                    r.subtour.status, r.subtour.objective
                )
            })?;
            worst = worst.max((r.subtour.objective - g as f64).abs());
        }
    }
    let elapsed = start.elapsed();
    within(elapsed, 120)?;
    Ok(format!(
        "12 instances, max deviation {worst:.1e}, {elapsed:.2?}"
    ))
}

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

/// Held–Karp agrees with the analytic TSP value.
fn criterion_10() -> Verdict {
    let mut count = 0;
    for total in 2..=14 {
        for sizes in partitions(total, total)
            .into_iter()
            .filter(|p| p.len() % 2 == 0)
        {
            let inst =
                SimplicialInstance::from_group_sizes(sizes.clone()).map_err(|e| e.to_string())?;
            let dp = tsp_optimum(&inst, TspMethod::Dp)
                .map_err(|e| e.to_string())?
                .value;
            let analytic = tsp_optimum(&inst, TspMethod::Analytic)
                .map_err(|e| e.to_string())?
                .value;
            ensure(dp == analytic, || {
                format!("{sizes:?}: dp {dp} vs {analytic}")
            })?;
            count += 1;
        }
    }
    Ok(format!("{count} layouts up to 14 vertices"))
}

fn main() {
    let start = Instant::now();
    let mut runs = Vec::new();
    let mut setup_error = None;
    for (g, n) in CERT_CONFIGS {
        match certify(g, n, n <= DENSE_MAX_N) {
            Ok(out) => runs.push((g, n, out)),
            Err(e) => {
                setup_error = Some(e);
                break;
            }
        }
    }
    let cert_elapsed = start.elapsed();
    let cert = |f: &dyn Fn() -> Verdict| match &setup_error {
        Some(e) => Err(e.clone()),
        None => f(),
    };

    let results: Vec<(usize, &str, Verdict)> = vec![
        (
            1,
            "certificate feasibility",
            cert(&|| criterion_1(&runs, cert_elapsed)),
        ),
        (
            2,
            "spectrum oracle equivalence",
            cert(&|| criterion_2(&runs)),
        ),
        (3, "identity suites", criterion_3()),
        (4, "two-group objective decay", criterion_4()),
        (5, "reduced SDP gap thresholds", criterion_5()),
        (6, "diagonal term exactness", criterion_6()),
        (7, "Anstreicher relaxation", criterion_7()),
        (8, "non-monotonicity", criterion_8()),
        (9, "subtour LP value", criterion_9()),
        (10, "Held-Karp agreement", criterion_10()),
    ];
    let mut failed = 0;
    for (k, name, verdict) in &results {
        match verdict {
            Ok(detail) => println!("criterion {k:>2} PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("criterion {k:>2} FAIL  {name}: {why}");
            }
        }
    }
    println!(
        "{} of {} criteria passed in {:.2?}",
        results.len() - failed,
        results.len(),
        start.elapsed()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
