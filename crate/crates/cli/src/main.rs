//! `sqkd`: run protocol sessions, detection estimates, zero-error checks and
//! the capacity comparison from a JSON config.
//!
//! Exit status: 0 on success, 1 on usage or config errors, 2 when a protocol
//! session aborts.

mod load;
mod report;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sqkd_core::adversary::{eve_information, theorem1_check, Theorem1Report};
use sqkd_core::analysis::{
    capacity_compare, estimate_detection, exact_detection, run_baseline_session, BaselineSessionResult,
    CapacityReport, DetectionStats, ExactDetection, Interval,
};
use sqkd_core::config::{AttackSpec, BaselineAttackSpec};
use sqkd_core::quantum::ProductBasis;
use sqkd_core::{run_session, AttackModel, SessionConfig, SessionResult, SqkdError};

use report::{fixed, grid, kv_csv, kv_table, opt, ConfigEcho, Report, SCHEMA_VERSION, TOOL_VERSION};

const DEFAULT_TRIALS: u64 = 100_000;

#[derive(Parser)]
#[command(name = "sqkd", version, about = "Two-DOF semi-quantum key distribution simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON config with `session` and `attack` keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `session.seed`.
    #[arg(long, global = true, env = "SQKD_SEED")]
    seed: Option<u64>,
    /// Rounds simulated by `detect`.
    #[arg(long, global = true)]
    trials: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = Output::Json)]
    output: Output,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    threads: Option<u16>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Run one session end to end.
    Run,
    /// Estimate per-round detection rates and compare with the exact oracle.
    Detect,
    /// Check the zero-error implication for an entangle-measure attack.
    Theorem1,
    /// Compare key bits per photon against the one-DOF baseline.
    Capacity,
    /// Run one session of the one-DOF baseline protocol.
    Baseline,
}

#[derive(ValueEnum, Clone, Copy, PartialEq, Eq)]
enum Output {
    Json,
    Table,
    Csv,
}

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Config(String),
}

struct Rendered {
    body: String,
    aborted: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(&cli) {
        Ok(true) => ExitCode::from(2),
        Ok(false) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) | Err(Failure::Config(msg)) => {
            eprintln!("sqkd: {msg}");
            ExitCode::from(1)
        }
    }
}

/// Returns whether the session aborted.
fn execute(cli: &Cli) -> Result<bool, Failure> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| Failure::Usage("--config <path> is required".into()))?;
    let rendered = match cli.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n as usize)
            .build()
            .map_err(|e| Failure::Usage(format!("cannot start {n} threads: {e}")))?
            .install(|| dispatch(cli, path)),
        None => dispatch(cli, path),
    }?;
    match &cli.out {
        Some(out) => fs::write(out, &rendered.body)
            .map_err(|e| Failure::Usage(format!("{}: cannot write report: {e}", out.display())))?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(rendered.body.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Failure::Usage(format!("cannot write report: {e}")))?;
        }
    }
    Ok(rendered.aborted)
}

fn dispatch(cli: &Cli, path: &Path) -> Result<Rendered, Failure> {
    match cli.command {
        Command::Run => cmd_run(cli, path),
        Command::Detect => cmd_detect(cli, path),
        Command::Theorem1 => cmd_theorem1(cli, path),
        Command::Capacity => cmd_capacity(cli, path),
        Command::Baseline => cmd_baseline(cli, path),
    }
}

struct Prepared {
    session: SessionConfig,
    spec: AttackSpec,
    attack: AttackModel,
    text: String,
}

fn session_with_seed(cli: &Cli, path: &Path, text: &str, mut session: SessionConfig) -> Result<SessionConfig, Failure> {
    if let Some(seed) = cli.seed {
        session.seed = seed;
    }
    session
        .validate()
        .map_err(|e| load::diagnostic(path, text, "session", e))?;
    Ok(session)
}

fn prepare(cli: &Cli, path: &Path) -> Result<Prepared, Failure> {
    let loaded = load::load::<AttackSpec>(path)?;
    let session = session_with_seed(cli, path, &loaded.text, loaded.doc.session)?;
    let attack = loaded
        .doc
        .attack
        .resolve(session.seed)
        .map_err(|e| load::diagnostic(path, &loaded.text, "attack", e))?;
    Ok(Prepared {
        session,
        spec: loaded.doc.attack,
        attack,
        text: loaded.text,
    })
}

fn echo<'a, A: Serialize>(session: SessionConfig, attack: &'a A, label: String, trials: Option<u64>) -> ConfigEcho<'a, A> {
    ConfigEcho {
        session,
        photon_count: session.photon_count(),
        attack,
        attack_label: label,
        trials,
    }
}

fn internal(e: SqkdError) -> Failure {
    Failure::Config(e.to_string())
}

#[derive(Serialize)]
struct RunResult<'a> {
    keys_match: bool,
    key_bits: usize,
    eve_information_bits: f64,
    #[serde(flatten)]
    session: &'a SessionResult,
}

fn cmd_run(cli: &Cli, path: &Path) -> Result<Rendered, Failure> {
    let p = prepare(cli, path)?;
    let result = run_session(&p.session, &p.attack).map_err(internal)?;
    let aborted = !result.status.is_completed();
    let summary = RunResult {
        keys_match: result.alice_key.is_some() && result.alice_key == result.bob_key,
        key_bits: result.alice_key.as_ref().map_or(0, |k| k.len()),
        eve_information_bits: eve_information(&result),
        session: &result,
    };
    let body = match cli.output {
        Output::Json => report::json(&Report {
            schema_version: SCHEMA_VERSION,
            tool_version: TOOL_VERSION,
            command: "run",
            config: echo(p.session, &p.spec, p.attack.label(), None),
            result: &summary,
        }),
        Output::Csv => report::csv_rows(&result.records),
        Output::Table => {
            let mut rows = session_rows(&p.session, p.attack.label());
            rows.extend([
                ("status".into(), format!("{:?}", result.status)),
                ("ctrl_rounds".into(), result.ctrl_rounds.to_string()),
                ("sift_rounds".into(), result.sift_rounds.to_string()),
                ("ctrl_error_rate".into(), opt(result.ctrl_error_rate)),
                ("sift_error_rate".into(), opt(result.sift_error_rate)),
                (
                    "sift_check_histogram".into(),
                    result
                        .sift_check_histogram
                        .map_or_else(|| "-".into(), |h| histogram_text(&ProductBasis::ZZ.labels().map(|l| l.to_string()), &h)),
                ),
                ("sift_check_tv_distance".into(), opt(result.sift_check_tv_distance)),
                ("key_bits".into(), summary.key_bits.to_string()),
                ("keys_match".into(), summary.keys_match.to_string()),
                ("alice_key".into(), key_text(&result.alice_key)),
                ("bob_key".into(), key_text(&result.bob_key)),
                ("eve_information_bits".into(), fixed(summary.eve_information_bits)),
            ]);
            Ok(kv_table("session", &rows))
        }
    }
    .map_err(Failure::Usage)?;
    Ok(Rendered { body, aborted })
}

fn session_rows(session: &SessionConfig, attack: String) -> Vec<(String, String)> {
    vec![
        ("attack".into(), attack),
        ("L".into(), session.key_photons.to_string()),
        ("delta".into(), session.delta.to_string()),
        ("N".into(), session.photon_count().to_string()),
        ("tau_ctrl".into(), session.tau_ctrl.to_string()),
        ("tau_sift".into(), session.tau_sift.to_string()),
        ("seed".into(), session.seed.to_string()),
    ]
}

fn key_text<K: ToString>(key: &Option<K>) -> String {
    key.as_ref().map_or_else(|| "-".into(), |k| k.to_string())
}

fn histogram_text(labels: &[String], counts: &[u64]) -> String {
    labels
        .iter()
        .zip(counts)
        .map(|(l, c)| format!("{l}={c}"))
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Serialize)]
struct Comparison {
    quantity: String,
    sampled: f64,
    lower: Option<f64>,
    upper: Option<f64>,
    exact: Option<f64>,
    difference: Option<f64>,
}

#[derive(Serialize)]
struct DetectResult {
    sampled: DetectionStats,
    exact_oracle: String,
    exact: Option<ExactDetection>,
    comparison: Vec<Comparison>,
}

const NO_ORACLE: &str = "n/a (no exact oracle)";

fn comparisons(s: &DetectionStats, exact: Option<&ExactDetection>) -> Vec<Comparison> {
    let row = |quantity: String, sampled: f64, interval: Option<&Interval>, exact: Option<f64>| Comparison {
        quantity,
        sampled,
        lower: interval.map(|i| i.lower),
        upper: interval.map(|i| i.upper),
        exact,
        difference: exact.map(|e| sampled - e),
    };
    let mut rows = vec![
        row(
            "ctrl_detection".into(),
            s.ctrl_detection_rate.estimate,
            Some(&s.ctrl_detection_rate),
            exact.map(|e| e.ctrl_detection),
        ),
        row(
            "sift_mismatch".into(),
            s.sift_mismatch_rate.estimate,
            Some(&s.sift_mismatch_rate),
            exact.map(|e| e.sift_mismatch),
        ),
        row("sift_tv_distance".into(), s.sift_tv_distance, None, exact.map(|e| e.sift_tv_distance)),
        row("any_detection".into(), s.abort_fraction, None, exact.map(|e| e.any_detection)),
    ];
    for (i, label) in ProductBasis::ZZ.labels().iter().enumerate() {
        let interval = sqkd_core::analysis::wilson_interval(s.sift_histogram[i], s.sift_rounds);
        rows.push(row(
            format!("sift_outcome_{label}"),
            interval.estimate,
            Some(&interval),
            exact.map(|e| e.sift_outcome_distribution[i]),
        ));
    }
    rows
}

fn cmd_detect(cli: &Cli, path: &Path) -> Result<Rendered, Failure> {
    let p = prepare(cli, path)?;
    let trials = cli.trials.unwrap_or(DEFAULT_TRIALS);
    let sampled = estimate_detection(&p.attack, trials, p.session.seed).map_err(|e| match e {
        SqkdError::TooFewSamples { .. } => Failure::Usage(format!("--trials: {e}")),
        e => internal(e),
    })?;
    let (exact, exact_oracle) = match exact_detection(&p.attack) {
        Ok(e) => (Some(e), "available".to_string()),
        Err(SqkdError::UnsupportedAttack(kind)) => (None, format!("unsupported: {kind} attacks have no finite branch enumeration")),
        Err(e) => return Err(internal(e)),
    };
    let rows = comparisons(&sampled, exact.as_ref());
    let body = match cli.output {
        Output::Json => {
            let result = DetectResult {
                sampled,
                exact_oracle,
                exact,
                comparison: rows,
            };
            report::json(&Report {
                schema_version: SCHEMA_VERSION,
                tool_version: TOOL_VERSION,
                command: "detect",
                config: echo(p.session, &p.spec, p.attack.label(), Some(trials)),
                result: &result,
            })
        }
        Output::Csv => report::csv_rows(&rows),
        Output::Table => {
            let cells: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.quantity.clone(),
                        fixed(r.sampled),
                        match (r.lower, r.upper) {
                            (Some(l), Some(u)) => format!("[{}, {}]", fixed(l), fixed(u)),
                            _ => "-".into(),
                        },
                        r.exact.map_or_else(|| NO_ORACLE.into(), fixed),
                        r.difference.map_or_else(|| NO_ORACLE.into(), signed),
                    ]
                })
                .collect();
            let title = format!(
                "detection: {} ({} rounds, {} CTRL, {} SIFT, seed {})\nexact oracle: {}",
                sampled.attack, trials, sampled.ctrl_rounds, sampled.sift_rounds, p.session.seed, exact_oracle
            );
            Ok(grid(&title, &["quantity", "sampled", "95% interval", "exact", "difference"], &cells))
        }
    }
    .map_err(Failure::Usage)?;
    Ok(Rendered { body, aborted: false })
}

/// Six decimals with an explicit sign; rounding noise prints as `+0.000000`.
fn signed(d: f64) -> String {
    format!("{:+.6}", if d.abs() < 5e-7 { 0.0 } else { d })
}

fn theorem1_rows(r: &Theorem1Report) -> Vec<(String, String)> {
    let labels = ProductBasis::ZZ.labels();
    let mut rows = vec![
        ("dim_probe".into(), r.dim_probe.to_string()),
        ("error_ctrl".into(), format!("{:.3e}", r.error_ctrl)),
        ("error_sift".into(), format!("{:.3e}", r.error_sift)),
        ("max_pairwise_trace_distance".into(), format!("{:.3e}", r.max_pairwise_trace_distance)),
    ];
    for (i, c) in r.probe_conditionals.iter().enumerate() {
        rows.push((format!("P(Bob sees {})", labels[i]), fixed(c.probability)));
    }
    for (i, j, d) in &r.pairwise_distances {
        rows.push((format!("D({}, {})", labels[*i], labels[*j]), format!("{d:.3e}")));
    }
    rows.push(("verdict".into(), r.verdict.to_string()));
    rows
}

fn cmd_theorem1(cli: &Cli, path: &Path) -> Result<Rendered, Failure> {
    let p = prepare(cli, path)?;
    let AttackModel::EntangleMeasure(em) = &p.attack else {
        return Err(load::diagnostic(
            path,
            &p.text,
            "attack",
            format!("theorem1 needs an entangle_measure attack, got {}", p.attack.label()),
        ));
    };
    let r = theorem1_check(em);
    let body = match cli.output {
        Output::Json => report::json(&Report {
            schema_version: SCHEMA_VERSION,
            tool_version: TOOL_VERSION,
            command: "theorem1",
            config: echo(p.session, &p.spec, p.attack.label(), None),
            result: &r,
        }),
        Output::Csv => kv_csv(&theorem1_rows(&r)),
        Output::Table => Ok(kv_table(&format!("zero-error check: {}", p.attack.label()), &theorem1_rows(&r))),
    }
    .map_err(Failure::Usage)?;
    Ok(Rendered { body, aborted: false })
}

fn capacity_rows(r: &CapacityReport) -> Vec<(String, String)> {
    vec![
        ("key_photons".into(), r.key_photons.to_string()),
        ("key_bits_2dof".into(), r.key_bits_2dof.to_string()),
        ("key_bits_1dof".into(), r.key_bits_1dof.to_string()),
        ("bits_per_sift_photon_2dof".into(), r.bits_per_sift_photon_2dof.to_string()),
        ("bits_per_sift_photon_1dof".into(), r.bits_per_sift_photon_1dof.to_string()),
        ("ratio".into(), r.ratio.to_string()),
    ]
}

fn cmd_capacity(cli: &Cli, path: &Path) -> Result<Rendered, Failure> {
    let loaded = load::load::<serde::de::IgnoredAny>(path)?;
    let session = session_with_seed(cli, path, &loaded.text, loaded.doc.session)?;
    let r = match capacity_compare(&session) {
        Ok(r) => r,
        Err(SqkdError::SessionAborted(status)) => {
            eprintln!("sqkd: honest session did not complete: {status:?}");
            return Ok(Rendered {
                body: String::new(),
                aborted: true,
            });
        }
        Err(e) => return Err(internal(e)),
    };
    let body = match cli.output {
        Output::Json => report::json(&Report {
            schema_version: SCHEMA_VERSION,
            tool_version: TOOL_VERSION,
            command: "capacity",
            config: echo(session, &"none", "no-attack".into(), None),
            result: &r,
        }),
        Output::Csv => kv_csv(&capacity_rows(&r)),
        Output::Table => Ok(kv_table("capacity (honest sessions)", &capacity_rows(&r))),
    }
    .map_err(Failure::Usage)?;
    Ok(Rendered { body, aborted: false })
}

fn cmd_baseline(cli: &Cli, path: &Path) -> Result<Rendered, Failure> {
    let loaded = load::load::<BaselineAttackSpec>(path)?;
    let session = session_with_seed(cli, path, &loaded.text, loaded.doc.session)?;
    let attack = loaded.doc.attack.resolve();
    let result: BaselineSessionResult = run_baseline_session(&session, &attack).map_err(internal)?;
    let aborted = !result.status.is_completed();
    let body = match cli.output {
        Output::Json => report::json(&Report {
            schema_version: SCHEMA_VERSION,
            tool_version: TOOL_VERSION,
            command: "baseline",
            config: echo(session, &loaded.doc.attack, attack.label(), None),
            result: &result,
        }),
        Output::Csv => report::csv_rows(&result.records),
        Output::Table => {
            let mut rows = session_rows(&session, attack.label());
            rows.extend([
                ("status".into(), format!("{:?}", result.status)),
                ("ctrl_rounds".into(), result.ctrl_rounds.to_string()),
                ("sift_rounds".into(), result.sift_rounds.to_string()),
                ("ctrl_error_rate".into(), opt(result.ctrl_error_rate)),
                ("sift_error_rate".into(), opt(result.sift_error_rate)),
                (
                    "sift_check_histogram".into(),
                    result
                        .sift_check_histogram
                        .map_or_else(|| "-".into(), |h| histogram_text(&["0".into(), "1".into()], &h)),
                ),
                ("sift_check_tv_distance".into(), opt(result.sift_check_tv_distance)),
                ("alice_key".into(), key_text(&result.alice_key)),
                ("bob_key".into(), key_text(&result.bob_key)),
            ]);
            Ok(kv_table("baseline session", &rows))
        }
    }
    .map_err(Failure::Usage)?;
    Ok(Rendered { body, aborted })
}
