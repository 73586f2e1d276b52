use std::fs::File;
use std::io::{self, Write};

use bellman_core::adversary::{AdversaryReport, random_adversary_with};
use bellman_core::constant::{Branch, ConstantSolver};
use bellman_core::extremizer::certify;
use bellman_core::io::fmt17;
use bellman_core::surface::{GridSpec, Surface};
use bellman_core::verify::{Tolerances, VerifyOptions, verify_surface};
use bellman_core::{Error, ProblemParams};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{Value, json};

use crate::args::{Cli, Command, Format};

pub const SCHEMA: u64 = 1;
/// Adversary ratios above `1 + RATIO_SLACK` count as a failure.
pub const RATIO_SLACK: f64 = 1e-9;
pub const MAJORIZATION_SLACK: f64 = 1e-8;
pub const VERIFY_TRIALS: u64 = 2000;

#[derive(Debug)]
pub enum Failure {
    /// Verification ran and failed.
    Check(String),
    Domain(String),
    Io(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Check(_) => 1,
            Failure::Domain(_) => 2,
            Failure::Io(_) => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Check(m) => write!(f, "verification failed: {m}"),
            Failure::Domain(m) | Failure::Io(m) => f.write_str(m),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(m) => Failure::Io(m),
            other => Failure::Domain(other.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

pub type Outcome = std::result::Result<(), Failure>;

/// Parses `1.2,1.5,2:3:5` into values; `a:b:n` expands to `n` evenly spaced points.
pub fn parse_list(flag: &str, text: &str) -> std::result::Result<Vec<f64>, Failure> {
    let mut out = Vec::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let parts: Vec<&str> = item.split(':').collect();
        match parts.as_slice() {
            [v] => out.push(parse_value(flag, v)?),
            [a, b, n] => {
                let (a, b) = (parse_value(flag, a)?, parse_value(flag, b)?);
                let n: usize = n
                    .parse()
                    .map_err(|_| Failure::Domain(format!("--{flag}: bad count in `{item}`")))?;
                match n {
                    0 => {}
                    1 => out.push(a),
                    _ => out.extend((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64)),
                }
            }
            _ => return Err(Failure::Domain(format!("--{flag}: cannot parse `{item}`"))),
        }
    }
    Ok(out)
}

fn parse_value(flag: &str, s: &str) -> std::result::Result<f64, Failure> {
    match s.trim() {
        "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
        t => t
            .parse()
            .map_err(|_| Failure::Domain(format!("--{flag}: `{s}` is not a number"))),
    }
}

fn single(flag: &str, text: &str) -> std::result::Result<f64, Failure> {
    match parse_list(flag, text)?.as_slice() {
        [v] => Ok(*v),
        _ => Err(Failure::Domain(format!(
            "--{flag} takes a single value outside `sweep`"
        ))),
    }
}

fn sink(cli: &Cli) -> std::result::Result<Box<dyn Write>, Failure> {
    Ok(match &cli.out {
        Some(path) => Box::new(io::BufWriter::new(
            File::create(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?,
        )),
        None => Box::new(io::BufWriter::new(io::stdout().lock())),
    })
}

fn tagged<T: Serialize>(command: &str, body: &T) -> std::result::Result<Value, Failure> {
    let mut v = json!({ "schema": SCHEMA, "command": command });
    let body = serde_json::to_value(body).map_err(|e| Failure::Io(e.to_string()))?;
    if let (Some(obj), Value::Object(fields)) = (v.as_object_mut(), body) {
        obj.extend(fields);
    }
    Ok(v)
}

fn write_json(cli: &Cli, value: &Value) -> Outcome {
    let mut w = sink(cli)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Failure::Io(e.to_string()))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn params(cli: &Cli) -> std::result::Result<ProblemParams, Failure> {
    Ok(ProblemParams::new(
        single("p", &cli.p)?,
        single("tau", &cli.tau)?,
    )?)
}

pub fn run(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Constant => cmd_constant(cli),
        Command::Surface => cmd_surface(cli),
        Command::Verify {
            samples,
            inject_t2_flip,
        } => cmd_verify(cli, *samples, *inject_t2_flip),
        Command::Sweep => cmd_sweep(cli),
        Command::Extremizer { y3 } => cmd_extremizer(cli, *y3),
        Command::Adversary => cmd_adversary(cli),
    }
}

fn cmd_constant(cli: &Cli) -> Outcome {
    let q = params(cli)?;
    let beta = single("beta", &cli.beta)?;
    let report = ConstantSolver::new(&q)?.report(beta)?;
    match cli.format.unwrap_or(Format::Json) {
        Format::Json => {
            let mut v = tagged("constant", &report)?;
            v["p"] = json!(q.p());
            v["tau"] = json!(q.tau());
            write_json(cli, &v)
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(sink(cli)?);
            w.write_record(SWEEP_HEADER)?;
            w.write_record(sweep_row(&SweepRow {
                p: q.p(),
                tau: q.tau(),
                beta,
                result: Ok(report),
            }))?;
            w.flush()?;
            Ok(())
        }
    }
}

fn cmd_surface(cli: &Cli) -> Outcome {
    let q = params(cli)?;
    let d = GridSpec::default();
    let grid = GridSpec {
        n_y2: cli.grid_y2.unwrap_or(d.n_y2),
        n_y3: cli.grid_y3.unwrap_or(d.n_y3),
        y3_max: cli.y3_max.unwrap_or(d.y3_max),
    };
    grid.validate(&q)?;
    let surface = Surface::build(&q)?;
    match cli.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut w = sink(cli)?;
            surface.write_grid_csv(&grid, &mut w)?;
            w.flush()?;
            Ok(())
        }
        Format::Json => {
            let mut rows = Vec::with_capacity(grid.n_y2 * grid.n_y3);
            for (y2, y3) in grid.points(&q) {
                let e = surface.eval(bellman_core::surface::OmegaPoint::new(&q, y2, y3)?)?;
                rows.push(json!({
                    "y2": y2, "y3": y3, "region": e.region.to_string(), "s": e.s,
                    "B": e.value, "t1": e.grad.0, "t2": e.grad.1,
                }));
            }
            let v = json!({
                "schema": SCHEMA, "command": "surface", "p": q.p(), "tau": q.tau(),
                "grid": grid, "rows": rows,
            });
            write_json(cli, &v)
        }
    }
}

fn adversary_failed(r: &AdversaryReport) -> bool {
    !(r.max_ratio <= 1.0 + RATIO_SLACK && r.max_majorization_excess <= MAJORIZATION_SLACK)
}

fn cmd_verify(cli: &Cli, samples: Option<usize>, flip: bool) -> Outcome {
    let q = params(cli)?;
    let mut opts = VerifyOptions::default();
    if let Some(n) = samples {
        if n == 0 {
            return Err(Failure::Domain("--samples must be positive".into()));
        }
        opts.n_y2 = n;
        opts.n_y3 = n;
        opts.line_samples = n;
    }
    opts.n_y2 = cli.grid_y2.unwrap_or(opts.n_y2);
    opts.n_y3 = cli.grid_y3.unwrap_or(opts.n_y3);
    opts.y3_max = cli.y3_max.unwrap_or(opts.y3_max);
    GridSpec {
        n_y2: opts.n_y2,
        n_y3: opts.n_y3,
        y3_max: opts.y3_max,
    }
    .validate(&q)?;
    let trials = cli
        .trials
        .unwrap_or(samples.map_or(VERIFY_TRIALS, |n| n as u64));

    let mut surface = Surface::build(&q)?;
    if flip {
        surface = surface.with_flipped_t2();
    }
    let solver = ConstantSolver::new(&q)?;
    let checks = verify_surface(&surface, &opts, &Tolerances::default());
    let adversary = random_adversary_with(&surface, &solver, cli.seed, trials, cli.depth)?;
    let passed = checks.passed && !adversary_failed(&adversary);
    let v = json!({
        "schema": SCHEMA, "command": "verify", "p": q.p(), "tau": q.tau(),
        "passed": passed, "options": opts, "surface": checks, "adversary": adversary,
    });
    write_json(cli, &v)?;
    if passed {
        return Ok(());
    }
    let mut failed: Vec<String> = checks.failed().into_iter().map(String::from).collect();
    if adversary_failed(&adversary) {
        failed.push("adversary".into());
    }
    Err(Failure::Check(failed.join(", ")))
}

const SWEEP_HEADER: [&str; 8] = [
    "p",
    "tau",
    "beta",
    "beta_prime",
    "case",
    "C_power",
    "C_norm",
    "error",
];

struct SweepRow {
    p: f64,
    tau: f64,
    beta: f64,
    result: bellman_core::Result<bellman_core::constant::ConstantReport>,
}

fn sweep_row(row: &SweepRow) -> Vec<String> {
    let mut rec = vec![fmt17(row.p), fmt17(row.tau), fmt17(row.beta)];
    match &row.result {
        Ok(r) => {
            let case = if r.case == Branch::CaseI {
                "CaseI"
            } else {
                "CaseII"
            };
            rec.extend([
                fmt17(r.beta_prime),
                case.into(),
                fmt17(r.c_power),
                fmt17(r.c_norm),
                String::new(),
            ]);
        }
        Err(e) => rec.extend([
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            e.to_string(),
        ]),
    }
    rec
}

fn cmd_sweep(cli: &Cli) -> Outcome {
    let mut ps = parse_list("p", &cli.p)?;
    let mut taus = parse_list("tau", &cli.tau)?;
    let mut betas = parse_list("beta", &cli.beta)?;
    for v in [&mut ps, &mut taus, &mut betas] {
        v.sort_by(f64::total_cmp);
        v.dedup();
    }
    let pairs: Vec<(f64, f64)> = ps
        .iter()
        .flat_map(|&p| taus.iter().map(move |&t| (p, t)))
        .collect();
    let rows: Vec<SweepRow> = pairs
        .par_iter()
        .flat_map_iter(|&(p, tau)| {
            let solver = ProblemParams::new(p, tau).and_then(|q| ConstantSolver::new(&q));
            betas
                .iter()
                .map(|&beta| SweepRow {
                    p,
                    tau,
                    beta,
                    result: solver
                        .as_ref()
                        .map_err(Clone::clone)
                        .and_then(|s| s.report(beta)),
                })
                .collect::<Vec<_>>()
        })
        .collect();

    for &p in &ps {
        let flips = case_flips(&rows, p);
        if flips > 1 {
            eprintln!("warning: case changes {flips} times along tau at p = {p}");
        }
    }

    match cli.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(sink(cli)?);
            w.write_record(SWEEP_HEADER)?;
            for r in &rows {
                w.write_record(sweep_row(r))?;
            }
            w.flush()?;
            Ok(())
        }
        Format::Json => {
            let out: Vec<Value> = rows
                .iter()
                .map(|r| match &r.result {
                    Ok(rep) => json!({ "p": r.p, "tau": r.tau, "beta": r.beta, "report": rep }),
                    Err(e) => {
                        json!({ "p": r.p, "tau": r.tau, "beta": r.beta, "error": e.to_string() })
                    }
                })
                .collect();
            write_json(
                cli,
                &json!({ "schema": SCHEMA, "command": "sweep", "rows": out }),
            )
        }
    }
}

/// Number of case changes along increasing `tau` at fixed `p`, per `beta`, maximised.
fn case_flips(rows: &[SweepRow], p: f64) -> usize {
    let mut by_beta: std::collections::BTreeMap<u64, Vec<(f64, bool)>> = Default::default();
    for r in rows.iter().filter(|r| r.p == p) {
        if let Ok(rep) = &r.result {
            by_beta
                .entry(r.beta.to_bits())
                .or_default()
                .push((r.tau, rep.case == Branch::CaseI));
        }
    }
    by_beta
        .values_mut()
        .map(|v| {
            v.sort_by(|a, b| a.0.total_cmp(&b.0));
            v.windows(2).filter(|w| w[0].1 != w[1].1).count()
        })
        .max()
        .unwrap_or(0)
}

fn cmd_extremizer(cli: &Cli, y3: f64) -> Outcome {
    let q = params(cli)?;
    let surface = Surface::build(&q)?;
    let (pair, report) = certify(&surface, y3, cli.eps)?;
    match cli.format.unwrap_or(Format::Json) {
        Format::Json => {
            let mut v = tagged("extremizer", &report)?;
            v["digest"] = json!(pair.digest());
            write_json(cli, &v)
        }
        Format::Csv => {
            let mut w = sink(cli)?;
            pair.write_csv(&mut w)?;
            w.flush()?;
            Ok(())
        }
    }
}

fn cmd_adversary(cli: &Cli) -> Outcome {
    let q = params(cli)?;
    if cli.format == Some(Format::Csv) {
        return Err(Failure::Domain("adversary reports are JSON only".into()));
    }
    let surface = Surface::build(&q)?;
    let solver = ConstantSolver::new(&q)?;
    let report = random_adversary_with(
        &surface,
        &solver,
        cli.seed,
        cli.trials.unwrap_or(10_000),
        cli.depth,
    )?;
    write_json(cli, &tagged("adversary", &report)?)?;
    if adversary_failed(&report) {
        return Err(Failure::Check(format!("max ratio {}", report.max_ratio)));
    }
    Ok(())
}
