//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Values are checked against closed forms for the two
//! registry problems and against the brute-force oracle.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use bilevel_core::continuation::{
    check_monotone, limit_estimate, run_continuation, ContinuationTrace, EpsSchedule, TraceRow,
};
use bilevel_core::diagnostics::{build_certificate, fit_rate};
use bilevel_core::lower_solver::{enumerate_vertices, frank_wolfe_minimize, lp_minimize, FwConfig, Quadratic};
use bilevel_core::model::{registry_get, validate_problem};
use bilevel_core::oracle::{gap_table, solve_three_level, OracleConfig};
use bilevel_core::sampling::rng;
use bilevel_core::selection::{constancy_check, SelectConfig};
use bilevel_core::upper_solver::{solve_penalized, UpperConfig};
use bilevel_core::{BilevelProblem, Polytope, Sign};
use rand::Rng;

const SLACK: f64 = 2e-4;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn qb() -> BilevelProblem {
    registry_get("QB").expect("QB is registered")
}

fn fs() -> BilevelProblem {
    registry_get("FS").expect("FS is registered")
}

fn qb_value(eps: f64) -> f64 {
    4.0 / (1.0 + 4.0 * eps)
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

fn criterion_1() -> Outcome {
    let p = qb();
    let mut worst: f64 = 0.0;
    let mut slowest = Duration::ZERO;
    for eps in [0.1, 0.05, 0.01, 0.001] {
        let (s, dt) =
            timed(|| solve_penalized(&p, eps, Sign::Pessimistic, &UpperConfig::default(), &SelectConfig::default(), None));
        let s = match s {
            Ok(s) => s,
            Err(e) => return outcome(false, format!("eps = {eps}: {e}")),
        };
        worst = worst.max((s.value - qb_value(eps)).abs());
        slowest = slowest.max(dt);
    }
    outcome(
        worst <= SLACK && slowest <= Duration::from_secs(5),
        format!("max |v - 4/(1+4eps)| = {worst:.2e}, slowest solve {:.2} s", slowest.as_secs_f64()),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let p = qb();
    let run = || -> bilevel_core::Result<(f64, f64)> {
        let oracle = solve_three_level(&p, &OracleConfig::default())?;
        let mut rows = Vec::new();
        for eps in [0.1, 0.05, 0.01, 0.001] {
            let s = solve_penalized(&p, eps, Sign::Pessimistic, &UpperConfig::default(), &SelectConfig::default(), None)?;
            rows.push(TraceRow {
                epsilon: eps,
                y: s.y,
                x: s.selection.x,
                v: s.value,
                h_value: s.selection.h_value,
                fw_gap: s.selection.fw_gap,
                evals: s.evals,
                converged: s.converged,
            });
        }
        let trace = ContinuationTrace { problem: p.name.clone(), sign: Sign::Pessimistic, seed: 0, rows };
        let table_err = gap_table(&oracle, &trace)?
            .iter()
            .map(|g| (g.gap - 16.0 * g.epsilon / (1.0 + 4.0 * g.epsilon)).abs())
            .fold(0.0, f64::max);
        // ten points, three per decade: eps from 1e-1 down to 1e-4
        let schedule = EpsSchedule::new(0.1, 10f64.powf(-1.0 / 3.0), 10)?;
        let t = run_continuation(&p, &schedule, Sign::Pessimistic, &UpperConfig::default(), &SelectConfig::default())?;
        let fit = fit_rate(&gap_table(&oracle, &t)?, 0.15)?;
        Ok((table_err, fit.slope.unwrap_or(f64::NAN)))
    };
    match run() {
        Ok((err, slope)) => {
            let dt = start.elapsed();
            outcome(
                err <= 5e-4 && (0.9..=1.1).contains(&slope) && dt <= Duration::from_secs(60),
                format!("max gap-table error {err:.2e}, fitted slope {slope:.4}, {:.2} s", dt.as_secs_f64()),
            )
        }
        Err(e) => outcome(false, e.to_string()),
    }
}

fn criterion_3() -> Outcome {
    let mut failures = Vec::new();
    for p in [qb(), fs()] {
        for seed in 0..5 {
            let cfg = UpperConfig { seed, ..UpperConfig::default() };
            let sel = SelectConfig { seed, ..SelectConfig::default() };
            let ok = run_continuation(&p, &EpsSchedule::default(), Sign::Pessimistic, &cfg, &sel)
                .and_then(|t| check_monotone(&t, SLACK).map(|m| (t.rows.len(), m)));
            match ok {
                Ok((12, m)) if m.ok => {}
                Ok((rows, m)) => failures.push(format!("{} seed {seed}: {rows} rows, violations {:?}", p.name, m.violations)),
                Err(e) => failures.push(format!("{} seed {seed}: {e}", p.name)),
            }
        }
    }
    outcome(failures.is_empty(), if failures.is_empty() { "QB and FS, 12 rows, seeds 0..5".into() } else { failures.join("; ") })
}

fn criterion_4() -> Outcome {
    let p = qb();
    let mut worst: f64 = 0.0;
    for y in [0.0, 0.25, 0.5] {
        for eps in [0.1, 0.01] {
            match constancy_check(&p, &[y], eps, 16, &SelectConfig::default()) {
                Ok(r) => worst = worst.max(r.spread),
                Err(e) => return outcome(false, e.to_string()),
            }
        }
    }
    outcome(worst <= 1e-5, format!("max spread of f over 16 starts {worst:.2e}"))
}

fn criterion_5() -> Outcome {
    let (f, dt_f) = timed(|| solve_three_level(&fs(), &OracleConfig::default()));
    let (q, dt_q) = timed(|| solve_three_level(&qb(), &OracleConfig::default()));
    match (f, q) {
        (Ok(f), Ok(q)) => {
            let fs_ok = (f.y_star[0] - 0.5).abs() <= 1e-3
                && (f.beta_star - 2.0).abs() <= 1e-3
                && (f.x_star[0] - 0.0).abs() <= 1e-3
                && (f.x_star[1] - 1.0).abs() <= 1e-3;
            let qb_ok = (q.beta_star - 4.0).abs() <= 1e-3;
            let fast = dt_f <= Duration::from_secs(30) && dt_q <= Duration::from_secs(30);
            outcome(
                fs_ok && qb_ok && fast,
                format!(
                    "FS y* = {:.6}, beta* = {:.6}, x* = {:?} ({:.2} s); QB beta* = {:.6} ({:.2} s)",
                    f.y_star[0],
                    f.beta_star,
                    f.x_star,
                    dt_f.as_secs_f64(),
                    q.beta_star,
                    dt_q.as_secs_f64()
                ),
            )
        }
        (Err(e), _) | (_, Err(e)) => outcome(false, e.to_string()),
    }
}

fn criterion_6() -> Outcome {
    let limit = |p: &BilevelProblem| -> bilevel_core::Result<f64> {
        let t = run_continuation(p, &EpsSchedule::default(), Sign::Pessimistic, &UpperConfig::default(), &SelectConfig::default())?;
        Ok(limit_estimate(&t)?.v_limit)
    };
    match (limit(&qb()), limit(&fs())) {
        (Ok(q), Ok(f)) => outcome(
            (q - 4.0).abs() <= 1e-3 && (f - 2.0).abs() <= 1e-6,
            format!("QB v_limit = {q:.6}, FS v_limit = {f:.9}"),
        ),
        (Err(e), _) | (_, Err(e)) => outcome(false, e.to_string()),
    }
}

fn criterion_7() -> Outcome {
    let run = || -> bilevel_core::Result<(f64, bool, f64, f64)> {
        let s = solve_penalized(&fs(), 0.01, Sign::Optimistic, &UpperConfig::default(), &SelectConfig::default(), None)?;
        let t = run_continuation(&qb(), &EpsSchedule::default(), Sign::Optimistic, &UpperConfig::default(), &SelectConfig::default())?;
        let m = check_monotone(&t, SLACK)?;
        let lowest = t.rows.iter().map(|r| r.v).fold(f64::INFINITY, f64::min);
        let last = t.rows.last().map_or(f64::NAN, |r| r.v);
        Ok((s.value, m.ok, lowest, last))
    };
    match run() {
        Ok((fs_value, monotone, lowest, last)) => outcome(
            (fs_value - 3.0).abs() <= 1e-3 && monotone && lowest >= 4.0 - SLACK && (last - 4.0).abs() <= 1e-3,
            format!("FS optimistic value {fs_value:.6}; QB optimistic trace monotone = {monotone}, min v {lowest:.6}, last v {last:.6}"),
        ),
        Err(e) => outcome(false, e.to_string()),
    }
}

fn criterion_8() -> Outcome {
    let mut details = Vec::new();
    let mut pass = true;
    for p in [fs(), qb()] {
        let cert = solve_three_level(&p, &OracleConfig::default()).and_then(|o| build_certificate(&p, &o, 1e-6, 1000, 0));
        match cert {
            Ok(c) => {
                pass &= c.valid;
                let example = c
                    .counterexamples
                    .first()
                    .map(|ce| format!(" (e.g. x = {:?}: h = {:.3}, f = {:.3})", ce.x, ce.h, ce.f))
                    .unwrap_or_default();
                details.push(format!("{}: {} counterexamples / {}{example}", p.name, c.n_counterexamples, c.samples));
            }
            Err(e) => {
                pass = false;
                details.push(format!("{}: {e}", p.name));
            }
        }
    }
    outcome(pass, details.join("; "))
}

/// A random `½xᵀQx + cᵀx` with `Q = LLᵀ`.
fn random_convex_quadratic(n: usize, r: &mut impl Rng) -> Quadratic {
    let l: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| r.gen_range(-1.0..1.0)).collect()).collect();
    let q = (0..n).map(|i| (0..n).map(|j| (0..n).map(|k| l[i][k] * l[j][k]).sum()).collect()).collect();
    let c = (0..n).map(|_| r.gen_range(-2.0..2.0)).collect();
    Quadratic { q, c, constant: 0.0 }
}

fn value(obj: &Quadratic, x: &[f64]) -> f64 {
    use bilevel_core::lower_solver::Objective;
    obj.value(x)
}

/// Dense grid minimum over FS (`x = (t, 1−t)`) or QB (`x = (s, t, 1−s, 1−t)`).
fn grid_minimum(obj: &Quadratic, qb_shape: bool) -> f64 {
    let steps = if qb_shape { 1000 } else { 100_000 };
    let coord = |i: usize| i as f64 / steps as f64;
    let mut best = f64::INFINITY;
    if qb_shape {
        for i in 0..=steps {
            for j in 0..=steps {
                let (s, t) = (coord(i), coord(j));
                best = best.min(value(obj, &[s, t, 1.0 - s, 1.0 - t]));
            }
        }
    } else {
        for i in 0..=steps {
            best = best.min(value(obj, &[coord(i), 1.0 - coord(i)]));
        }
    }
    best
}

fn criterion_9() -> Outcome {
    let mut r = rng(2024);
    let mut fw_worst: f64 = 0.0;
    let mut lp_mismatches = 0;
    let mut lp_checked = 0;
    for (p, qb_shape) in [(fs(), false), (qb(), true)] {
        let c: &Polytope = &p.c;
        for _ in 0..50 {
            let obj = random_convex_quadratic(c.n(), &mut r);
            let fw = match frank_wolfe_minimize(&obj, c, &FwConfig::default(), None) {
                Ok(s) => s.value,
                Err(e) => return outcome(false, e.to_string()),
            };
            fw_worst = fw_worst.max((fw - grid_minimum(&obj, qb_shape)).abs());
        }
        let vertices = match enumerate_vertices(c) {
            Ok(v) => v,
            Err(e) => return outcome(false, e.to_string()),
        };
        for _ in 0..200 {
            let cost: Vec<f64> = (0..c.n()).map(|_| r.gen_range(-1.0..1.0)).collect();
            let dot = |x: &[f64]| -> f64 { cost.iter().zip(x).map(|(a, b)| a * b).sum() };
            let lp = lp_minimize(&cost, c);
            let best = vertices.iter().map(|v| dot(v)).fold(f64::INFINITY, f64::min);
            lp_checked += 1;
            if !(vertices.contains(&lp.x) && dot(&lp.x) == best) {
                lp_mismatches += 1;
            }
        }
    }
    outcome(
        fw_worst <= 1e-5 && lp_mismatches == 0,
        format!("max |FW - grid| = {fw_worst:.2e} over 100 quadratics; LP vs enumeration mismatches {lp_mismatches}/{lp_checked}"),
    )
}

fn criterion_10() -> Outcome {
    let mut details = Vec::new();
    let mut pass = true;
    for p in [fs(), qb()] {
        match validate_problem(&p, 1000, 10) {
            Ok(r) => {
                let c = r.check("gradient_consistency").expect("gradient check present");
                pass &= c.passed;
                details.push(format!("{}: worst relative error {:.2e}", p.name, c.worst_value));
            }
            Err(e) => {
                pass = false;
                details.push(e.to_string());
            }
        }
    }
    outcome(pass, details.join("; "))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("QB closed-form penalized value", criterion_1),
        ("QB gap law and rate fit", criterion_2),
        ("monotone continuation traces", criterion_3),
        ("constancy of f on the selection set", criterion_4),
        ("three-level oracle", criterion_5),
        ("limit extrapolation", criterion_6),
        ("optimistic variant", criterion_7),
        ("certificate descriptions agree", criterion_8),
        ("solver substrate vs brute force", criterion_9),
        ("gradient hygiene", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!("criterion {:>2} [{}] {name}: {}", i + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
