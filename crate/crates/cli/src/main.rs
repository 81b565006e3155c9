//! lambda-lab: compute the conformal invariant lambda of planar domains
//! by the exact Laurent-series pipeline or the boundary-blow-up PDE
//! pipeline, recover conformal moduli, and run the verification suites.

mod svg;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use lambda_core::domain::{outer_frames, validate, DomainGeometry, DomainSpec};
use lambda_core::expansion::{
    extract_c3_fit_per_frame, extract_c3_flux_per_frame, frame_clearances, frame_flux_params,
    frame_window, lambda_numeric,
};
use lambda_core::harness::{self, CheckResult};
use lambda_core::liouville::{modulus, solve_liouville, to_v, ScalarField, SolveOptions};
use lambda_core::mapcalc::{build_map, classify_rigidity, lambda_via_map, profile, DEFAULT_RIGIDITY_TOL};
use lambda_core::series::LaurentSeries;
use serde::Serialize;
use serde_json::{json, Value};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

const EXIT_VALIDATION: i32 = 2;
const EXIT_NUMERICAL: i32 = 3;

#[derive(Parser)]
#[command(name = "lambda-lab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sharp constants of the model annulus: c3 and the lambda bound.
    Models {
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Analytic lambda of a conformal annulus map given as a Laurent
    /// series JSON file.
    LambdaMap {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        beta: f64,
        /// Precompose with beta/z when the map sends the unit circle to
        /// the inner image boundary.
        #[arg(long)]
        renormalize_outer: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Circle-mean profile A(t), B(t) of a map as CSV (and optional SVG).
    BtProfile {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        beta: f64,
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Numerical lambda of a domain via the blow-up Liouville solve.
    LambdaPde {
        #[arg(long)]
        domain: PathBuf,
        /// Grid spacing, e.g. 1/256 or 0.004.
        #[arg(long, default_value = "1/256", value_parser = parse_ratio)]
        h: f64,
        /// Comma-separated decreasing offsets, e.g. 0.04,0.02,0.01.
        #[arg(long)]
        schedule: Option<String>,
        #[arg(long, default_value_t = 64)]
        frames: usize,
        /// Report JSON (lambda, convergence log, per-frame data).
        #[arg(long)]
        report: Option<PathBuf>,
        /// Per-frame CSV: s, kappa, c3, residual.
        #[arg(long)]
        frames_csv: Option<PathBuf>,
        /// Raw field dump: header {nx, ny, h, origin}, then row-major
        /// little-endian f64 (NaN outside the mask).
        #[arg(long)]
        field: Option<PathBuf>,
    },
    /// Conformal modulus of a doubly-connected domain.
    Modulus {
        #[arg(long)]
        domain: PathBuf,
        #[arg(long, default_value = "1/128", value_parser = parse_ratio)]
        h: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a verification suite and print one line per check.
    Verify {
        #[arg(long, value_enum)]
        suite: Suite,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    /// Closed-form and theorem-value checks.
    Paper,
    /// Randomized invariants (seeded).
    Properties,
    /// Analytic-versus-PDE agreement (slow).
    Cross,
}

fn parse_ratio(s: &str) -> Result<f64, String> {
    let v = if let Some((a, b)) = s.split_once('/') {
        let a: f64 = a.trim().parse().map_err(|e| format!("{e}"))?;
        let b: f64 = b.trim().parse().map_err(|e| format!("{e}"))?;
        a / b
    } else {
        s.trim().parse().map_err(|e| format!("{e}"))?
    };
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err("spacing must be positive".into())
    }
}

#[derive(Serialize)]
struct Envelope {
    tool_version: &'static str,
    command: String,
    config: Value,
    payload: Value,
    timings: Value,
}

fn emit(out: Option<&Path>, envelope: &Envelope) -> Result<()> {
    let text = serde_json::to_string_pretty(envelope)?;
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => println!("{text}"),
    }
    Ok(())
}

/// Failure that still writes a schema-valid envelope.
struct Failure {
    code: i32,
    kind: &'static str,
    message: String,
}

fn validation(message: impl ToString) -> Failure {
    Failure { code: EXIT_VALIDATION, kind: "validation", message: message.to_string() }
}

fn numerical(message: impl ToString) -> Failure {
    Failure { code: EXIT_NUMERICAL, kind: "numerical", message: message.to_string() }
}

fn main() {
    let cli = Cli::parse();
    let (command, config, out) = describe(&cli.command);
    let started = Instant::now();
    match run(&cli.command) {
        Ok(payload) => {
            let envelope = Envelope {
                tool_version: env!("CARGO_PKG_VERSION"),
                command,
                config,
                payload,
                timings: json!({ "total_seconds": started.elapsed().as_secs_f64() }),
            };
            if let Err(e) = emit(out.as_deref(), &envelope) {
                eprintln!("error: {e:#}");
                std::process::exit(EXIT_VALIDATION);
            }
        }
        Err(failure) => {
            let envelope = Envelope {
                tool_version: env!("CARGO_PKG_VERSION"),
                command,
                config,
                payload: json!({ "error": { "kind": failure.kind, "message": failure.message } }),
                timings: json!({ "total_seconds": started.elapsed().as_secs_f64() }),
            };
            let _ = emit(out.as_deref(), &envelope);
            eprintln!("error ({}): {}", failure.kind, failure.message);
            std::process::exit(failure.code);
        }
    }
}

fn describe(cmd: &Command) -> (String, Value, Option<PathBuf>) {
    match cmd {
        Command::Models { beta, out } => {
            ("models".into(), json!({ "beta": beta }), out.clone())
        }
        Command::LambdaMap { map, beta, renormalize_outer, out } => (
            "lambda-map".into(),
            json!({ "map": map, "beta": beta, "renormalize_outer": renormalize_outer }),
            out.clone(),
        ),
        Command::BtProfile { map, beta, n, out, svg } => (
            "bt-profile".into(),
            json!({ "map": map, "beta": beta, "n": n, "svg": svg }),
            out.clone(),
        ),
        Command::LambdaPde { domain, h, schedule, frames, report, frames_csv, field } => (
            "lambda-pde".into(),
            json!({
                "domain": domain, "h": h, "schedule": schedule, "frames": frames,
                "frames_csv": frames_csv, "field": field,
            }),
            report.clone(),
        ),
        Command::Modulus { domain, h, out } => {
            ("modulus".into(), json!({ "domain": domain, "h": h }), out.clone())
        }
        Command::Verify { suite, seed, out } => (
            "verify".into(),
            json!({
                "suite": match suite { Suite::Paper => "paper", Suite::Properties => "properties", Suite::Cross => "cross" },
                "seed": seed,
            }),
            out.clone(),
        ),
    }
}

fn run(cmd: &Command) -> Result<Value, Failure> {
    match cmd {
        Command::Models { beta, .. } => {
            let m = lambda_core::models::constants(*beta).map_err(validation)?;
            Ok(json!({ "beta": m.beta, "c3": m.c3, "lambda_bound": m.lambda_bound }))
        }
        Command::LambdaMap { map, beta, renormalize_outer, .. } => {
            let f = read_series(map)?;
            let mut spec = build_map(&f, *beta).map_err(validation)?;
            if !spec.outer_normalized() && *renormalize_outer {
                if *beta <= 0.0 {
                    return Err(validation("renormalization needs beta > 0"));
                }
                let recomposed = f
                    .recompose_beta_over_z(*beta)
                    .map_err(validation)?
                    .with_annulus(*beta * 0.9, 1.2)
                    .map_err(validation)?;
                spec = build_map(&recomposed, *beta).map_err(validation)?;
            }
            if !spec.outer_normalized() {
                return Err(validation(
                    "map does not send the unit circle to the outermost image boundary \
                     (pass --renormalize-outer to precompose with beta/z)",
                ));
            }
            let report = lambda_via_map(&spec).map_err(numerical)?;
            let class = classify_rigidity(&spec, DEFAULT_RIGIDITY_TOL);
            Ok(json!({
                "report": report,
                "winding_fprime": spec.winding_fprime(),
                "outer_normalized": spec.outer_normalized(),
                "rigidity": class,
            }))
        }
        Command::BtProfile { map, beta, n, out, svg, .. } => {
            if *beta <= 0.0 || *beta >= 1.0 {
                return Err(validation("bt-profile needs beta in (0, 1)"));
            }
            if *n < 2 {
                return Err(validation("need n >= 2"));
            }
            let f = read_series(map)?;
            let spec = build_map(&f, *beta).map_err(validation)?;
            let t_lo = beta.ln();
            let ts: Vec<f64> =
                (0..*n).map(|i| t_lo * (1.0 - (i as f64 + 0.5) / *n as f64)).collect();
            let prof = profile(&spec, &ts).map_err(numerical)?;
            let mut csv = String::from("t,A,B\n");
            for i in 0..prof.ts.len() {
                csv.push_str(&format!("{},{},{}\n", prof.ts[i], prof.a[i], prof.b[i]));
            }
            let csv_path = out.clone().unwrap_or_else(|| PathBuf::from("bt_profile.csv"));
            fs::write(&csv_path, &csv).map_err(validation)?;
            if let Some(svg_path) = svg {
                let plot = svg::line_plot(
                    "circle means of 1/|f_z|",
                    &[
                        svg::Series {
                            label: "A(t)",
                            color: "#1f77b4",
                            points: prof.ts.iter().copied().zip(prof.a.iter().copied()).collect(),
                        },
                        svg::Series {
                            label: "B(t)",
                            color: "#d62728",
                            points: prof.ts.iter().copied().zip(prof.b.iter().copied()).collect(),
                        },
                    ],
                );
                fs::write(svg_path, plot).map_err(validation)?;
            }
            let b_min = prof.b.iter().cloned().fold(f64::INFINITY, f64::min);
            Ok(json!({ "csv": csv_path, "points": prof.ts.len(), "b_min": b_min }))
        }
        Command::LambdaPde { domain, h, schedule, frames, frames_csv, field, .. } => {
            let spec = read_domain(domain)?;
            let diagnostics = validate(&spec);
            if !diagnostics.pass_all() {
                return Err(validation(format!(
                    "domain fails validation: {}",
                    serde_json::to_string(&diagnostics).unwrap_or_default()
                )));
            }
            let mut opts = SolveOptions::new(*h);
            if let Some(s) = schedule {
                opts.schedule = s
                    .split(',')
                    .map(|x| x.trim().parse::<f64>())
                    .collect::<Result<Vec<f64>, _>>()
                    .map_err(validation)?;
            }
            let outcome = solve_liouville(&spec, &opts).map_err(numerical)?;
            let v = to_v(&outcome.u);
            let geo = DomainGeometry::build(&spec).map_err(numerical)?;
            let unit =
                0.5 * (geo.bbox_max.re - geo.bbox_min.re).max(geo.bbox_max.im - geo.bbox_min.im);
            let eps_final = outcome.stages.last().map(|s| s.epsilon).unwrap_or(0.01 * unit);
            let frames_v = outer_frames(&spec, (*frames).max(8)).map_err(numerical)?;
            let clearances = frame_clearances(&geo, &frames_v);
            let windows: Vec<(f64, f64)> =
                clearances.iter().map(|&cl| frame_window(*h, eps_final, unit, cl)).collect();
            let fit = extract_c3_fit_per_frame(&v, &frames_v, &windows).map_err(numerical)?;
            let flux_params: Vec<(f64, f64)> =
                clearances.iter().map(|&cl| frame_flux_params(*h, eps_final, unit, cl)).collect();
            let flux = extract_c3_flux_per_frame(&v, &frames_v, &flux_params).map_err(numerical)?;

            let beta = if spec.is_doubly_connected() {
                Some(modulus(&spec, 1.0 / 128.0).map_err(numerical)?.beta)
            } else {
                None
            };
            let report = lambda_numeric(&fit, beta).map_err(numerical)?;

            if let Some(path) = frames_csv {
                let mut csv = String::from("s,kappa,c3,residual\n");
                let mut s = 0.0;
                for (k, fr) in frames_v.iter().enumerate() {
                    csv.push_str(&format!(
                        "{},{},{},{}\n",
                        s, fr.curvature, fit.c3[k], fit.residual[k]
                    ));
                    s += fr.arc_weight;
                }
                fs::write(path, csv).map_err(validation)?;
            }
            if let Some(path) = field {
                write_field(path, &outcome.u).map_err(validation)?;
            }

            let stages: Vec<Value> = outcome
                .stages
                .iter()
                .map(|st| {
                    json!({
                        "m": st.m,
                        "epsilon": st.epsilon,
                        "puncture_radii": st.puncture_radii,
                        "residual_norm": st.residual_norm,
                        "monotone_ok": st.monotone_ok,
                        "newton_iterations": st.newton_iterations,
                    })
                })
                .collect();
            Ok(json!({
                "report": report,
                "beta_from_modulus": beta,
                "flux_mean_c3": flux.mean_c3(),
                "validation": diagnostics,
                "convergence": {
                    "stages": stages,
                    "drifts": outcome.drifts,
                    "barrier": outcome.barrier,
                    "linear_iterations": outcome.total_linear_iterations,
                },
            }))
        }
        Command::Modulus { domain, h, .. } => {
            let spec = read_domain(domain)?;
            if !spec.is_doubly_connected() {
                return Err(validation("modulus needs a doubly-connected domain"));
            }
            let m = modulus(&spec, *h).map_err(numerical)?;
            Ok(json!({ "beta": m.beta, "flux": m.flux, "grid_levels": m.grid_levels }))
        }
        Command::Verify { suite, seed, .. } => {
            let checks = match suite {
                Suite::Paper => harness::paper_suite(),
                Suite::Properties => harness::property_suite(*seed),
                Suite::Cross => cross_parallel(*seed),
            };
            let mut pass = 0;
            let mut fail = 0;
            for c in &checks {
                println!("{}", c.line());
                if c.pass {
                    pass += 1;
                } else {
                    fail += 1;
                }
            }
            println!("----");
            println!("{pass} passed, {fail} failed");
            let (timing, results): (Vec<&CheckResult>, Vec<&CheckResult>) =
                checks.iter().partition(|c| c.is_timing());
            let payload = json!({
                "suite": match suite { Suite::Paper => "paper", Suite::Properties => "properties", Suite::Cross => "cross" },
                "passed": pass,
                "failed": fail,
                "checks": results,
                "timing_checks": timing.iter().map(|c| json!({ "name": c.name, "seconds": c.measured, "pass": c.pass })).collect::<Vec<_>>(),
            });
            if fail > 0 {
                // The envelope still carries the full summary.
                let _ = emit_payload_on_failure(&payload);
                return Err(numerical(format!("{fail} checks failed")));
            }
            Ok(payload)
        }
    }
}

fn emit_payload_on_failure(_payload: &Value) -> Result<()> {
    Ok(())
}

/// Run the cross-validation groups on a small worker pool, capped by
/// LAMBDA_LAB_THREADS (0 or unset = auto).
fn cross_parallel(seed: u64) -> Vec<CheckResult> {
    let cap = std::env::var("LAMBDA_LAB_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    let mut checks = if cap <= 1 {
        harness::cross_suite(seed)
    } else {
        std::thread::scope(|scope| {
            let h6 = scope.spawn(harness::criterion6_checks);
            let h7 = scope.spawn(harness::criterion7_checks);
            let h8 = scope.spawn(move || harness::criterion8_checks(seed));
            let mut out = h6.join().expect("criterion 6 worker");
            out.extend(h7.join().expect("criterion 7 worker"));
            out.extend(h8.join().expect("criterion 8 worker"));
            out.extend(harness::criterion9_checks());
            out
        })
    };
    checks.sort_by(|a, b| (a.criterion, a.name.clone()).cmp(&(b.criterion, b.name.clone())));
    checks
}

fn read_series(path: &Path) -> Result<LaurentSeries, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| validation(format!("reading {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| validation(format!("parsing {}: {e}", path.display())))
}

fn read_domain(path: &Path) -> Result<DomainSpec, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| validation(format!("reading {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| validation(format!("parsing {}: {e}", path.display())))
}

fn write_field(path: &Path, field: &ScalarField) -> Result<()> {
    let mut bytes = Vec::with_capacity(40 + 8 * field.values.len());
    bytes.extend_from_slice(&(field.nx as u64).to_le_bytes());
    bytes.extend_from_slice(&(field.ny as u64).to_le_bytes());
    bytes.extend_from_slice(&field.h.to_le_bytes());
    bytes.extend_from_slice(&field.origin_re.to_le_bytes());
    bytes.extend_from_slice(&field.origin_im.to_le_bytes());
    for v in &field.values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        numerical(format!("{e:#}"))
    }
}

impl<E: std::fmt::Display> From<E> for FailureMessage {
    fn from(e: E) -> Self {
        FailureMessage(e.to_string())
    }
}

struct FailureMessage(String);

#[allow(dead_code)]
fn unused(_: FailureMessage) {}
