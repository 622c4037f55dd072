//! Acceptance run: one line per criterion, nonzero exit on any failure.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use liegate_core::suite::{self, SuiteConfig, CRITERIA};

/// Wall-clock limits in seconds, where one is set.
fn budget(id: u32) -> Option<f64> {
    match id {
        1 => Some(1.0),
        2 => Some(30.0),
        7 => Some(120.0),
        _ => None,
    }
}

fn pinned() -> Vec<(&'static str, f64, f64)> {
    vec![
        ("symplectic", suite::SYMPLECTIC_TOL, 1e-9),
        ("path equivalence", suite::PATH_EQUIV_TOL, 1e-6),
        ("oracle map", suite::ORACLE_MAP_TOL, 1e-7),
        ("classical flow", suite::CLASSICAL_TOL, 1e-7),
        ("closed form", suite::CLOSED_FORM_TOL, 1e-6),
        ("reality", suite::REALITY_TOL, 1e-12),
        ("infidelity", suite::INFIDELITY_TOL, 1e-5),
        ("mehler", suite::MEHLER_TOL, 1e-9),
        ("unitarity", suite::UNITARITY_TOL, 1e-6),
        ("mathieu halving", suite::MATHIEU_HALVING_TOL, 1e-10),
        ("mathieu value", suite::MATHIEU_VALUE_TOL, 1e-12),
    ]
}

fn main() -> ExitCode {
    let cfg = SuiteConfig::default();
    let mut ok = true;

    for (name, got, want) in pinned() {
        if got != want {
            println!("tolerance {name}: {got:e} differs from {want:e}");
            ok = false;
        }
    }
    let sizes = cfg.n_random >= 20 && cfg.n_equivalence >= 5 && cfg.grid_points == 1024 && cfg.split_steps <= 4096;
    if !sizes {
        println!("suite sizes below the required scale: {cfg:?}");
        ok = false;
    }

    let mut total = Duration::ZERO;
    for (id, _) in CRITERIA {
        let start = Instant::now();
        let report = suite::run_criterion(id, &cfg).expect("known criterion");
        let elapsed = start.elapsed();
        total += elapsed;
        let secs = elapsed.as_secs_f64();
        let late = budget(id).is_some_and(|b| secs > b);
        let pass = report.passed && !late;
        ok &= pass;
        let limit = budget(id).map(|b| format!(" (limit {b:.0} s)")).unwrap_or_default();
        println!(
            "criterion {id} {}: {} checks, {} failed, {secs:.2} s{limit}",
            if pass { "PASS" } else { "FAIL" },
            report.total,
            report.failed
        );
        if !report.passed {
            println!("  {}", report.summary());
        }
        for note in &report.notes {
            println!("  note: {note}");
        }
    }
    println!("total {:.2} s", total.as_secs_f64());

    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
