use std::fs;
use std::path::{Path, PathBuf};

use bilevel_core::continuation::{
    check_monotone, limit_estimate, run_continuation, ContinuationTrace, EpsSchedule, TraceRow,
};
use bilevel_core::diagnostics::{build_certificate, diagnose, fit_rate, strong_slope_lower_bound, Hypothesis, RateClass};
use bilevel_core::model::{validate_problem, ProblemDoc, Registry};
use bilevel_core::oracle::{gap_table, solve_three_level, write_gap_csv, OracleConfig};
use bilevel_core::report::{self, ORACLE_SCHEMA, RATES_SCHEMA, SOLUTION_SCHEMA, TRACE_SCHEMA};
use bilevel_core::selection::SelectConfig;
use bilevel_core::upper_solver::{solve_penalized, UpperConfig};
use bilevel_core::{BilevelProblem, Error, Result, Sign};
use serde_json::{json, Value};

use crate::{Common, ContinuationArgs, ExportArgs, Format, ListArgs, OracleArgs, RatesArgs, SignArg, SolveArgs, ValidateArgs};

pub enum Status {
    Ok,
    SoftFail(Vec<String>),
}

impl Status {
    fn from_reasons(reasons: Vec<String>) -> Self {
        if reasons.is_empty() {
            Status::Ok
        } else {
            Status::SoftFail(reasons)
        }
    }
}

impl From<SignArg> for Sign {
    fn from(s: SignArg) -> Self {
        match s {
            SignArg::Pessimistic => Sign::Pessimistic,
            SignArg::Optimistic => Sign::Optimistic,
        }
    }
}

/// The built-in problems plus every `*.json` problem in `dir`.
fn load_registry(dir: Option<&Path>) -> Result<Registry> {
    let mut registry = Registry::default();
    if let Some(dir) = dir {
        let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        for path in paths {
            registry.register(ProblemDoc::load(&path)?)?;
        }
    }
    Ok(registry)
}

fn resolve_problem(common: &Common) -> Result<BilevelProblem> {
    let registry = load_registry(common.registry.as_deref())?;
    if registry.names().contains(&common.problem.as_str()) {
        return registry.get(&common.problem);
    }
    let path = Path::new(&common.problem);
    if path.is_file() {
        return ProblemDoc::load(path)?.build();
    }
    Err(Error::UnknownProblem(common.problem.clone()))
}

fn output_path(dir: &Path, file: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    Ok(dir.join(file))
}

/// Writes `body` as a versioned JSON record to `<output>/<stem>.json`, or to
/// stdout when no output directory was given.
fn emit_json(common: &Common, stem: &str, schema: &str, body: &Value) -> Result<()> {
    let text = report::to_json(schema, body)?;
    match &common.output {
        Some(dir) => {
            let path = output_path(dir, &format!("{stem}.json"))?;
            fs::write(&path, text)?;
            eprintln!("wrote {}", path.display());
        }
        None => print_stdout(&text)?,
    }
    Ok(())
}

/// Prints to stdout, treating a closed pipe (`| head`) as success.
fn print_stdout(text: &str) -> Result<()> {
    use std::io::Write;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn emit_csv(common: &Common, stem: &str, write: impl FnOnce(&mut dyn std::io::Write) -> Result<()>) -> Result<()> {
    match &common.output {
        Some(dir) => {
            let path = output_path(dir, &format!("{stem}.csv"))?;
            let mut file = fs::File::create(&path)?;
            write(&mut file)?;
            eprintln!("wrote {}", path.display());
        }
        None => match write(&mut std::io::stdout().lock()) {
            Err(Error::Csv(e)) if e.is_io_error() => {}
            other => other?,
        },
    }
    Ok(())
}

/// JSON for `json`/`both`, CSV for `csv`/`both`; on stdout `both` prints
/// only the JSON.
fn emit_tabular(
    common: &Common,
    stem: &str,
    schema: &str,
    body: &Value,
    write_csv: impl FnOnce(&mut dyn std::io::Write) -> Result<()>,
) -> Result<()> {
    let json = common.format != Format::Csv;
    let csv = common.format == Format::Csv || (common.format == Format::Both && common.output.is_some());
    if json {
        emit_json(common, stem, schema, body)?;
    }
    if csv {
        emit_csv(common, stem, write_csv)?;
    }
    Ok(())
}

fn upper_config(seed: u64) -> UpperConfig {
    UpperConfig { seed, ..UpperConfig::default() }
}

fn select_config(seed: u64) -> SelectConfig {
    SelectConfig { seed, ..SelectConfig::default() }
}

pub fn solve(a: &SolveArgs) -> Result<Status> {
    if !(a.epsilon > 0.0) {
        return Err(Error::NonPositiveEpsilon(a.epsilon));
    }
    let p = resolve_problem(&a.common)?;
    let seed = a.common.seed;
    let sign = Sign::from(a.sign);
    let cfg = UpperConfig { n_multistarts: a.multistarts, ..upper_config(seed) };
    let s = solve_penalized(&p, a.epsilon, sign, &cfg, &select_config(seed), None)?;
    let sel = &s.selection;
    let body = json!({
        "problem": p.name,
        "epsilon": a.epsilon,
        "sign": sign,
        "seed": seed,
        "y": s.y,
        "x": sel.x,
        "value": s.value,
        "h_value": sel.h_value,
        "penalized_value": sel.penalized_value,
        "fw_gap": sel.fw_gap,
        "evals": s.evals,
        "converged": s.converged,
    });
    let one_row = ContinuationTrace {
        problem: p.name.clone(),
        sign,
        seed,
        rows: vec![TraceRow {
            epsilon: a.epsilon,
            y: s.y.clone(),
            x: sel.x.clone(),
            v: s.value,
            h_value: sel.h_value,
            fw_gap: sel.fw_gap,
            evals: s.evals,
            converged: s.converged,
        }],
    };
    emit_tabular(&a.common, "solution", SOLUTION_SCHEMA, &body, |w| one_row.write_csv(w))?;
    eprintln!("{}: eps = {}, y = {:?}, value = {:.9}", p.name, a.epsilon, s.y, s.value);
    let mut reasons = Vec::new();
    if !s.converged {
        reasons.push(format!("search did not converge (selection fw_gap = {:e})", sel.fw_gap));
    }
    Ok(Status::from_reasons(reasons))
}

pub fn continuation(a: &ContinuationArgs) -> Result<Status> {
    if a.limit && a.schedule.k < 3 {
        return Err(Error::Config("need k ≥ 3 for limit estimate".into()));
    }
    let schedule = EpsSchedule::new(a.schedule.eps0, a.schedule.rho, a.schedule.k)?;
    let p = resolve_problem(&a.common)?;
    let seed = a.common.seed;
    let t = run_continuation(&p, &schedule, a.sign.into(), &upper_config(seed), &select_config(seed))?;
    let monotone = check_monotone(&t, a.slack)?;
    let limit = if a.limit { Some(limit_estimate(&t)?) } else { None };

    let mut body = serde_json::to_value(&t)?;
    body["schedule"] = serde_json::to_value(schedule)?;
    body["monotone"] = serde_json::to_value(&monotone)?;
    if let Some(l) = &limit {
        body["limit"] = serde_json::to_value(l)?;
    }
    emit_tabular(&a.common, "trace", TRACE_SCHEMA, &body, |w| t.write_csv(w))?;

    let first = t.rows.first().map_or(f64::NAN, |r| r.v);
    let last = t.rows.last().map_or(f64::NAN, |r| r.v);
    eprintln!("{}: v {first:.6} -> {last:.6} over {} rows", p.name, t.rows.len());
    if let Some(l) = &limit {
        eprintln!("limit estimate: v = {:.6}", l.v_limit);
    }
    let mut reasons = Vec::new();
    if !monotone.ok {
        reasons.push(format!("monotonicity violated at rows {:?}", monotone.violations));
    }
    let unconverged: Vec<usize> = t.rows.iter().enumerate().filter(|(_, r)| !r.converged).map(|(k, _)| k).collect();
    if !unconverged.is_empty() {
        reasons.push(format!("rows {unconverged:?} did not converge"));
    }
    Ok(Status::from_reasons(reasons))
}

fn oracle_config(ygrid: f64, xgrid: f64) -> OracleConfig {
    OracleConfig { y_step: ygrid, x_step: xgrid, ..OracleConfig::default() }
}

pub fn oracle(a: &OracleArgs) -> Result<Status> {
    let p = resolve_problem(&a.common)?;
    let o = solve_three_level(&p, &oracle_config(a.grid.ygrid, a.grid.xgrid))?;
    let mut body = serde_json::to_value(&o)?;
    body["seed"] = json!(a.common.seed);
    emit_json(&a.common, "oracle", ORACLE_SCHEMA, &body)?;
    eprintln!("{}: y* = {:?}, beta* = {:.9}, alpha* = {:e}", p.name, o.y_star, o.beta_star, o.alpha_star);
    Ok(Status::Ok)
}

pub fn rates(a: &RatesArgs) -> Result<Status> {
    let schedule = EpsSchedule::new(a.eps0, a.rho, a.k)?;
    let p = resolve_problem(&a.common)?;
    let seed = a.common.seed;
    let t = run_continuation(&p, &schedule, Sign::Pessimistic, &upper_config(seed), &select_config(seed))?;
    let monotone = check_monotone(&t, 2e-4)?;
    let o = solve_three_level(&p, &oracle_config(a.grid.ygrid, a.grid.xgrid))?;
    let gaps = gap_table(&o, &t)?;
    let fit = fit_rate(&gaps, a.tau)?;
    let slope = strong_slope_lower_bound(&p.h, &o.y_star, &p.c, a.samples, seed)?;
    let cert = build_certificate(&p, &o, a.tol, a.samples, seed)?;
    let diagnosis = diagnose(&fit, &slope);

    let body = json!({
        "problem": p.name,
        "seed": seed,
        "schedule": schedule,
        "tau": a.tau,
        "oracle": o,
        "gaps": gaps,
        "fit": fit,
        "slope": slope,
        "certificate": cert,
        "monotone": monotone,
        "diagnosis": diagnosis,
        // the fit's class, tempered by whether a Hoffman bound backs H1
        "classification": match diagnosis {
            Hypothesis::H1 => RateClass::ConsistentH1,
            Hypothesis::H2 => RateClass::ConsistentH2,
            Hypothesis::ExactSelection => RateClass::ExactSelection,
            Hypothesis::Inconclusive => RateClass::Inconclusive,
        },
    });
    emit_json(&a.common, "rates", RATES_SCHEMA, &body)?;
    if a.common.format != Format::Json {
        emit_csv(&a.common, "gaps", |w| write_gap_csv(&gaps, w))?;
    }
    eprintln!(
        "{}: slope = {}, fit class = {:?}, diagnosis = {:?}",
        p.name,
        fit.slope.map_or("n/a".into(), |s| format!("{s:.4}")),
        fit.classification,
        diagnosis
    );

    let mut reasons = Vec::new();
    if !cert.valid {
        reasons.push(format!("certificate has {} counterexamples among {} samples", cert.n_counterexamples, cert.samples));
    }
    if !monotone.ok {
        reasons.push(format!("monotonicity violated at rows {:?}", monotone.violations));
    }
    if fit.classification == RateClass::Inconclusive {
        reasons.push("rate fit is inconclusive".into());
    }
    Ok(Status::from_reasons(reasons))
}

pub fn validate(a: &ValidateArgs) -> Result<Status> {
    let p = resolve_problem(&a.common)?;
    let r = validate_problem(&p, a.samples, a.common.seed)?;
    let mut body = serde_json::to_value(&r)?;
    body["seed"] = json!(a.common.seed);
    emit_json(&a.common, "validation", "validation-v1", &body)?;
    let failed: Vec<String> = r.checks.iter().filter(|c| !c.passed).map(|c| format!("check '{}' failed", c.name)).collect();
    Ok(Status::from_reasons(failed))
}

pub fn export(a: &ExportArgs) -> Result<Status> {
    let p = resolve_problem(&a.common)?;
    let text = p.to_json()?;
    match &a.common.output {
        Some(dir) => {
            let path = output_path(dir, &format!("{}.json", p.name))?;
            fs::write(&path, text)?;
            eprintln!("wrote {}", path.display());
        }
        None => print_stdout(&text)?,
    }
    Ok(Status::Ok)
}

pub fn list(a: &ListArgs) -> Result<Status> {
    let registry = load_registry(a.dir.as_deref())?;
    for name in registry.names() {
        let doc = registry.doc(name)?;
        print_stdout(&format!("{name}\tp={}\tn={}", doc.dim_y, doc.dim_x))?;
    }
    Ok(Status::Ok)
}
