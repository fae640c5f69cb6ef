//! Subcommand implementations. Each returns a document; the binary only
//! handles argument parsing, output and exit codes.

use std::collections::BTreeSet;
use std::f64::consts::{FRAC_PI_2, PI};
use std::path::Path;

use serde_json::{json, Map, Value};
use thiserror::Error;

use super::config::{parse_config, ConfigError};
use super::report::{self, ResultDocument};
use crate::engine::{
    run_exact, run_monte_carlo, EngineError, ExactResults, InterpretationMode, MeasurementScheme, ProtocolConfig,
};
use crate::relativity;

/// Differences above this count as physically distinct results.
pub const DIFFERENCE_TOL: f64 = 1e-9;
/// Minimum distance of a requested boost from the inversion threshold.
pub const THRESHOLD_EXCLUSION: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Engine(#[from] EngineError),
    #[error("configuration error: {0}")]
    Usage(String),
    #[error("I/O error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("geometry validation failed: {0}")]
    GeometryInvalid(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) | CliError::GeometryInvalid(_) => 2,
            CliError::Engine(e) if e.is_configuration() => 2,
            CliError::Io { .. } => 3,
            CliError::Engine(_) => 4,
        }
    }

    pub fn category(&self) -> &'static str {
        match self.exit_code() {
            2 => "configuration",
            3 => "io",
            _ => "internal",
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

pub fn load_config(path: &Path) -> Result<ProtocolConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
    Ok(parse_config(&text)?)
}

pub fn render(doc: &ResultDocument, format: Format) -> String {
    match format {
        Format::Json => doc.to_json(),
        Format::Csv => doc.to_csv(),
    }
}

/// Writes to `out`, or standard output when `None`.
pub fn write_output(text: &str, out: Option<&Path>) -> Result<()> {
    use std::io::Write;
    match out {
        Some(p) => std::fs::write(p, text).map_err(|source| CliError::Io { path: p.display().to_string(), source }),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|source| CliError::Io { path: "<stdout>".into(), source }),
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub exact: bool,
    pub mc: bool,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
}

/// Exact enumeration and/or Monte Carlo for one configuration. With neither
/// flag set, both run.
pub fn cmd_run(config: &ProtocolConfig, opts: &RunOptions) -> Result<ResultDocument> {
    let mut c = config.clone();
    if let Some(n) = opts.trials {
        c.trials = n;
    }
    if let Some(s) = opts.seed {
        c.seed = s;
    }
    c.validate()?;
    let both = !opts.exact && !opts.mc;
    let mut doc = ResultDocument::new("run", &c);
    doc.insert("geometry", report::geometry_json(&c));
    if opts.exact || both {
        doc.insert("exact", report::exact_json(&c, &run_exact(&c)?));
    }
    if opts.mc || both {
        doc.insert("monte_carlo", report::monte_carlo_json(&run_monte_carlo(&c, c.trials, c.seed)?));
    }
    Ok(doc)
}

fn check_beta(beta: f64, beta_star: f64) -> Result<()> {
    if !(beta.abs() < 1.0) {
        return Err(CliError::Usage(format!("beta = {beta} must satisfy |beta| < 1")));
    }
    if (beta - beta_star).abs() <= THRESHOLD_EXCLUSION {
        return Err(CliError::Usage(format!(
            "beta = {beta} is at the inversion threshold beta* = {beta_star} (simultaneity); choose another frame"
        )));
    }
    Ok(())
}

fn beta_star(config: &ProtocolConfig) -> Result<f64> {
    let ev = config.geometry.events();
    relativity::inversion_threshold(&ev[2], &ev[3]).map_err(|e| CliError::Engine(EngineError::Kinematics(e)))
}

fn distribution_distance(a: &ExactResults, b: &ExactResults) -> f64 {
    let keys: BTreeSet<_> = a.friend_record_distribution.keys().chain(b.friend_record_distribution.keys()).collect();
    let mut d = keys
        .into_iter()
        .map(|k| {
            let pa = a.friend_record_distribution.get(k).copied().unwrap_or(0.0);
            let pb = b.friend_record_distribution.get(k).copied().unwrap_or(0.0);
            (pa - pb).abs()
        })
        .fold(0.0, f64::max);
    if let (Some(pa), Some(pb)) = (&a.projective, &b.projective) {
        let keys: BTreeSet<_> = pa.outcome_distribution.keys().chain(pb.outcome_distribution.keys()).collect();
        for k in keys {
            let x = pa.outcome_distribution.get(k).copied().unwrap_or(0.0);
            let y = pb.outcome_distribution.get(k).copied().unwrap_or(0.0);
            d = d.max((x - y).abs());
        }
    }
    d
}

/// Exact results per frame velocity and the pairwise differences.
pub fn cmd_compare_frames(config: &ProtocolConfig, betas: &[f64]) -> Result<ResultDocument> {
    if betas.is_empty() {
        return Err(CliError::Usage("beta list is empty".into()));
    }
    let bs = beta_star(config)?;
    for &b in betas {
        check_beta(b, bs)?;
    }
    let results: Vec<ExactResults> =
        betas.iter().map(|&b| run_exact(&config.with_boost(b))).collect::<std::result::Result<_, _>>()?;
    let rows: Vec<Value> = betas
        .iter()
        .zip(&results)
        .map(|(&b, r)| json!({ "beta": b, "exact": report::exact_json(&config.with_boost(b), r) }))
        .collect();
    let mut diffs = Vec::new();
    for i in 0..betas.len() {
        for j in i + 1..betas.len() {
            let (a, b) = (&results[i], &results[j]);
            let mut m = Map::new();
            m.insert("beta_a".into(), json!(betas[i]));
            m.insert("beta_b".into(), json!(betas[j]));
            let mut worst = distribution_distance(a, b);
            if let (Some(x), Some(y)) = (a.joint_moment_unnormalized, b.joint_moment_unnormalized) {
                m.insert("moment_difference".into(), json!(x - y));
                worst = worst.max((x - y).abs());
            }
            m.insert("distribution_difference".into(), json!(distribution_distance(a, b)));
            m.insert("frame_dependent".into(), json!(worst > DIFFERENCE_TOL));
            diffs.push(Value::Object(m));
        }
    }
    let mut doc = ResultDocument::new("compare-frames", config);
    doc.insert("geometry", report::geometry_json(config));
    doc.insert("rows", Value::Array(rows));
    doc.insert("differences", Value::Array(diffs));
    Ok(doc)
}

/// Toggles Alice's basis between z and x in the ordering-inverted frame and
/// compares W's weak moment; objective collapse serves as the control.
pub fn cmd_signalling_test(config: &ProtocolConfig) -> Result<ResultDocument> {
    let bs = beta_star(config)?;
    check_beta(config.boost, bs)?;
    if config.boost <= bs {
        return Err(CliError::Usage(format!(
            "beta = {} does not exceed beta* = {bs}: no ordering inversion; test undefined",
            config.boost
        )));
    }
    let base = config.with_scheme(MeasurementScheme::Weak);
    let witness = |mode: InterpretationMode| -> Result<Value> {
        let c = base.with_mode(mode);
        let z = run_exact(&c.with_alice_basis(0.0))?.joint_moment_unnormalized.unwrap_or(f64::NAN);
        let x = run_exact(&c.with_alice_basis(FRAC_PI_2))?.joint_moment_unnormalized.unwrap_or(f64::NAN);
        let d = z - x;
        Ok(json!({
            "mode": mode.as_str(),
            "moment_alice_z": { "value": z, "convention": "unnormalized" },
            "moment_alice_x": { "value": x, "convention": "unnormalized" },
            "difference": d,
            "signalling": d.abs() > DIFFERENCE_TOL,
        }))
    };
    let mut doc = ResultDocument::new("signalling-test", config);
    doc.insert("beta_star", json!(bs));
    doc.insert("unitary_lab", witness(InterpretationMode::UnitaryLab)?);
    doc.insert("objective_collapse_control", witness(InterpretationMode::ObjectiveCollapse)?);
    Ok(doc)
}

#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    pub grid: usize,
    /// Velocity of the primed frame; defaults to the configured one when it
    /// exceeds beta*, otherwise to `2·beta*` (or `(1 + beta*)/2` if that is
    /// not below 1).
    pub beta_prime: Option<f64>,
    pub mc_trials: Option<u64>,
}

fn num(v: f64) -> String {
    serde_json::Number::from_f64(v).map(|n| n.to_string()).unwrap_or_else(|| "nan".into())
}

pub fn default_beta_prime(config: &ProtocolConfig, beta_star: f64) -> f64 {
    if config.boost > beta_star {
        config.boost
    } else if 2.0 * beta_star < 1.0 {
        2.0 * beta_star
    } else {
        (1.0 + beta_star) / 2.0
    }
}

/// Weak-scheme moments over an `N×N` grid of post-selection angles in the
/// rest frame (beta = 0) and a primed frame past the inversion threshold.
pub fn cmd_sweep(config: &ProtocolConfig, opts: &SweepOptions) -> Result<String> {
    let n = opts.grid;
    if n < 2 {
        return Err(CliError::Usage(format!("theta grid needs N >= 2, got {n}")));
    }
    let bs = beta_star(config)?;
    let bp = opts.beta_prime.unwrap_or_else(|| default_beta_prime(config, bs));
    check_beta(bp, bs)?;
    check_beta(0.0, bs)?;
    let base = config.with_scheme(MeasurementScheme::Weak);
    let angle = |i: usize| if i == n - 1 { PI } else { PI * i as f64 / (n - 1) as f64 };
    let mut header = vec!["theta1", "theta2", "beta_prime", "moment_r", "moment_r_prime", "difference"];
    if opts.mc_trials.is_some() {
        header.extend(["mc_r_mean", "mc_r_se", "mc_r_prime_mean", "mc_r_prime_se"]);
    }
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Io { path: "<csv>".into(), source: e.into() };
    w.write_record(&header).map_err(csv_err)?;
    for i in 0..n {
        for j in 0..n {
            let c = base.with_angles(angle(i), angle(j));
            let r = run_exact(&c.with_boost(0.0))?.joint_moment_unnormalized.unwrap_or(f64::NAN);
            let rp = run_exact(&c.with_boost(bp))?.joint_moment_unnormalized.unwrap_or(f64::NAN);
            let mut row = vec![num(c.theta1), num(c.theta2), num(bp), num(r), num(rp), num(r - rp)];
            if let Some(trials) = opts.mc_trials {
                for b in [0.0, bp] {
                    let s = run_monte_carlo(&c.with_boost(b), trials, c.seed)?;
                    let e = s.joint_moment_unnormalized.expect("weak scheme");
                    row.push(num(e.mean));
                    row.push(num(e.standard_error));
                }
            }
            w.write_record(&row).map_err(csv_err)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io { path: "<csv>".into(), source: e.into_error() })?;
    Ok(String::from_utf8(bytes).expect("utf-8 fields"))
}

/// Geometry checks and beta*; the flag is `true` iff every check passed.
pub fn cmd_validate_geometry(config: &ProtocolConfig) -> (ResultDocument, bool) {
    let mut doc = ResultDocument::new("validate-geometry", config);
    let g = report::geometry_json(config);
    let ok = g["valid"].as_bool().unwrap_or(false);
    doc.insert("geometry", g);
    (doc, ok)
}
