//! Command-line front end: JSON run configs in, CSV tables out.
//!
//! Exit codes: 0 on success, 1 on I/O failure, 2 when the config or its
//! parameters are rejected, 3 when the numerics fail on valid input
//! (unstable or singular point, non-converged mean field).

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::Parser;
use nalgebra::Matrix6;
use serde::{Deserialize, Serialize};

use crate::experiments::{
    analyze_point, find_threshold, robustness_scan, sweep, Extinction, SweepAxis, SweepResult,
};
use crate::lyapunov::solve_steady_lyapunov;
use crate::measures::{FullReport, Pair};
use crate::model::{effective_params, solve_mean_fields, LinearModel, RawParams, SystemParams};
use crate::oracle::{estimate_covariance, OracleConfig};
use crate::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Column names of the sweep table.
pub const SWEEP_HEADER: &str = "axis1,axis2,stable,margin,residual,nu_minus_om,EN_om,QD_om,nu_minus_oa,EN_oa,QD_oa,nu_minus_ma,EN_ma,QD_ma";
/// Column names of the single-point report.
pub const POINT_HEADER: &str = "stable,margin,residual,nu_minus_om,EN_om,QD_om,nu_minus_oa,EN_oa,QD_oa,nu_minus_ma,EN_ma,QD_ma";
pub const THRESHOLD_HEADER: &str = "param,lo,hi,bipartition,threshold";
pub const ROBUSTNESS_HEADER: &str = "J_m,measure,bipartition,n_th_star,beyond_range";
/// Covariance tables: one labelled row per quadrature.
pub const COVARIANCE_HEADER: &str = "row,X_a1,Y_a1,X_ba,Y_ba,X_bm,Y_bm";
const QUADRATURES: [&str; 6] = ["X_a1", "Y_a1", "X_ba", "Y_ba", "X_bm", "Y_bm"];

#[derive(Parser, Debug)]
#[command(name = "brillouin-qc", version, about = "Steady-state entanglement and discord of a Brillouin optomechanical system")]
pub struct Args {
    /// JSON run config.
    #[arg(long)]
    pub config: PathBuf,
    /// Output CSV path (overrides `output` in the config; stdout if neither).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Bipartition for threshold and robustness modes.
    #[arg(long, value_parser = ["om", "oa", "ma"])]
    pub bipartition: Option<String>,
    /// Seed for the oracle mode (overrides the config).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker thread cap.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Print the normalized config and exit.
    #[arg(long)]
    pub print_config: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    Point,
    Sweep,
    Threshold,
    Robustness,
    Oracle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdSpec {
    pub param: String,
    pub bracket: [f64; 2],
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RobustnessMeasure {
    #[default]
    Entanglement,
    Discord,
}

fn default_discord_floor() -> f64 {
    0.01
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobustnessSpec {
    pub n_th_axis: SweepAxis,
    #[serde(rename = "J_m")]
    pub hopping: Vec<f64>,
    #[serde(default)]
    pub measure: RobustnessMeasure,
    #[serde(default = "default_discord_floor")]
    pub discord_floor: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: RunMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<SystemParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_params: Option<RawParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axes: Option<Vec<SweepAxis>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<ThresholdSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub robustness: Option<RobustnessSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bipartition: Option<Pair>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    Invalid(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => EXIT_INVALID,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::Io(_) => EXIT_IO,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Invalid(m) | CliError::Numerical(m) | CliError::Io(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Invalid(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Invalid(msg.into()))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Invalid(format!("config: {e}")))
    }

    /// Checks that exactly the keys the mode needs are present and that the
    /// parameters themselves are valid.
    pub fn validate(&self) -> Result<(), CliError> {
        match (&self.params, &self.raw_params) {
            (Some(p), None) => p.validate().map_err(Error::from)?,
            (None, Some(r)) => r.validate().map_err(Error::from)?,
            (Some(_), Some(_)) => return invalid("`params` and `raw_params` are mutually exclusive"),
            (None, None) => return invalid("one of `params` or `raw_params` is required"),
        }
        let present = [
            ("axes", self.axes.is_some(), RunMode::Sweep),
            ("oracle", self.oracle.is_some(), RunMode::Oracle),
            ("threshold", self.threshold.is_some(), RunMode::Threshold),
            ("robustness", self.robustness.is_some(), RunMode::Robustness),
        ];
        for (key, is_present, owner) in present {
            if is_present && owner != self.mode {
                return invalid(format!("`{key}` is not allowed in {:?} mode", self.mode));
            }
            if !is_present && owner == self.mode {
                return invalid(format!("`{key}` is required in {:?} mode", self.mode));
            }
        }
        if let Some(axes) = &self.axes {
            if axes.is_empty() || axes.len() > 2 {
                return invalid(format!("`axes` must hold 1 or 2 axes, got {}", axes.len()));
            }
            for axis in axes {
                axis.validate().map_err(Error::from)?;
            }
        }
        if let Some(t) = &self.threshold {
            SweepAxis::linear(&t.param, t.bracket[0], t.bracket[1], 2)
                .validate()
                .map_err(Error::from)?;
        }
        if let Some(r) = &self.robustness {
            if r.n_th_axis.param != "n_th" {
                return invalid(format!(
                    "`robustness.n_th_axis.param` must be `n_th`, got `{}`",
                    r.n_th_axis.param
                ));
            }
            r.n_th_axis.validate().map_err(Error::from)?;
            if r.hopping.is_empty() {
                return invalid("`robustness.J_m` must list at least one value");
            }
            if let Some(j) = r.hopping.iter().find(|j| !(j.is_finite() && **j >= 0.0)) {
                return invalid(format!("`robustness.J_m` entry {j} must be finite and >= 0"));
            }
            if !r.discord_floor.is_finite() {
                return invalid("`robustness.discord_floor` must be finite");
            }
        }
        Ok(())
    }

    fn apply_overrides(&mut self, args: &Args) {
        if let Some(out) = &args.out {
            self.output = Some(out.clone());
        }
        if let Some(code) = &args.bipartition {
            self.bipartition = Pair::from_code(code);
        }
        if let (Some(seed), Some(oracle)) = (args.seed, self.oracle.as_mut()) {
            oracle.seed = seed;
        }
    }

    /// Effective parameters, running the mean-field reduction if the config
    /// gives drive-level parameters.
    pub fn system_params(&self) -> Result<SystemParams, Error> {
        match (&self.params, &self.raw_params) {
            (Some(p), _) => Ok(*p),
            (None, Some(raw)) => {
                let mf = solve_mean_fields(raw)?;
                Ok(effective_params(raw, &mf))
            }
            (None, None) => unreachable!("validated"),
        }
    }

    fn pair(&self) -> Pair {
        self.bipartition.unwrap_or(Pair::OpticalMechanical)
    }
}

/// Fixed-width scientific rendering with 17 significant digits; `NaN` for
/// missing values.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else {
        format!("{x:.16e}")
    }
}

fn push_measures(line: &mut String, report: Option<&FullReport>) {
    for pair in Pair::ALL {
        let r = report.map(|r| *r.get(pair));
        for value in [
            r.map(|r| r.nu_minus),
            r.map(|r| r.log_negativity),
            r.map(|r| r.discord),
        ] {
            line.push(',');
            line.push_str(&fmt_f64(value.unwrap_or(f64::NAN)));
        }
    }
}

pub fn sweep_csv(result: &SweepResult) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for row in &result.rows {
        let axis2 = row.coords.get(1).copied().unwrap_or(f64::NAN);
        let mut line = format!(
            "{},{},{},{},{}",
            fmt_f64(row.coords[0]),
            fmt_f64(axis2),
            row.stable,
            fmt_f64(row.margin),
            fmt_f64(row.residual.unwrap_or(f64::NAN)),
        );
        push_measures(&mut line, row.report.as_ref());
        out.push_str(&line);
        out.push('\n');
    }
    out
}

pub fn point_csv(stable: bool, margin: f64, residual: Option<f64>, report: Option<&FullReport>) -> String {
    let mut line = format!(
        "{},{},{}",
        stable,
        fmt_f64(margin),
        fmt_f64(residual.unwrap_or(f64::NAN))
    );
    push_measures(&mut line, report);
    format!("{POINT_HEADER}\n{line}\n")
}

pub fn covariance_csv(m: &Matrix6<f64>) -> String {
    let mut out = String::from(COVARIANCE_HEADER);
    out.push('\n');
    for (r, label) in QUADRATURES.iter().enumerate() {
        out.push_str(label);
        for c in 0..6 {
            out.push(',');
            out.push_str(&fmt_f64(m[(r, c)]));
        }
        out.push('\n');
    }
    out
}

/// Parses a table written by [`covariance_csv`].
pub fn parse_covariance_csv(text: &str) -> Option<Matrix6<f64>> {
    let mut lines = text.lines();
    if lines.next()? != COVARIANCE_HEADER {
        return None;
    }
    let mut m = Matrix6::zeros();
    for r in 0..6 {
        let mut fields = lines.next()?.split(',');
        if fields.next()? != QUADRATURES[r] {
            return None;
        }
        for c in 0..6 {
            m[(r, c)] = fields.next()?.parse().ok()?;
        }
    }
    Some(m)
}

/// Writes via a temporary file in the target directory and renames it into
/// place.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// `dir/stem_suffix.csv` next to `path`.
pub fn sidecar_path(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}_{suffix}.csv"))
}

struct Outputs {
    main: String,
    sidecars: Vec<(&'static str, String)>,
    summary: String,
}

fn emit(config: &RunConfig, outputs: &Outputs) -> Result<(), CliError> {
    match &config.output {
        Some(path) => {
            write_atomic(path, &outputs.main)?;
            for (suffix, text) in &outputs.sidecars {
                write_atomic(&sidecar_path(path, suffix), text)?;
            }
            eprint!("{}", outputs.summary);
        }
        None => {
            print!("{}", outputs.main);
            eprint!("{}", outputs.summary);
        }
    }
    Ok(())
}

fn run_point(config: &RunConfig) -> Result<(Outputs, Option<CliError>), CliError> {
    let params = config.system_params()?;
    let model = LinearModel::new(&params).map_err(Error::from)?;
    let stability = crate::lyapunov::check_stability(&model.drift).map_err(Error::from)?;
    match analyze_point(&params) {
        Ok(a) => {
            let mut summary = String::new();
            let _ = writeln!(
                summary,
                "stable (margin {:.3e}), Lyapunov residual {:.3e}",
                a.stability.margin, a.covariance.residual
            );
            for r in &a.report.pairs {
                let _ = writeln!(
                    summary,
                    "  {}: nu- = {:.6}  E_N = {:.6}  QD = {:.6}",
                    r.pair, r.nu_minus, r.log_negativity, r.discord
                );
            }
            Ok((
                Outputs {
                    main: point_csv(true, a.stability.margin, Some(a.covariance.residual), Some(&a.report)),
                    sidecars: vec![("covariance", covariance_csv(&a.covariance.v))],
                    summary,
                },
                None,
            ))
        }
        Err(e) => {
            let err = CliError::from(e);
            Ok((
                Outputs {
                    main: point_csv(stability.stable, stability.margin, None, None),
                    sidecars: vec![],
                    summary: String::new(),
                },
                Some(err),
            ))
        }
    }
}

fn run_oracle(config: &RunConfig) -> Result<Outputs, CliError> {
    let params = config.system_params()?;
    let model = LinearModel::new(&params).map_err(Error::from)?;
    let cfg = config.oracle.expect("validated");
    let est = estimate_covariance(&model, &cfg).map_err(Error::from)?;
    let lyap = solve_steady_lyapunov(&model.drift, &model.diffusion).map_err(Error::from)?;
    let rel = (est.v - lyap.v).norm() / lyap.v.norm();
    Ok(Outputs {
        main: covariance_csv(&est.v),
        sidecars: vec![
            ("stderr", covariance_csv(&est.stderr)),
            ("lyapunov", covariance_csv(&lyap.v)),
        ],
        summary: format!(
            "oracle: {} trajectories x {} samples, relative Frobenius distance to Lyapunov {:.4e}\n",
            cfg.n_traj, est.samples_per_trajectory, rel
        ),
    })
}

fn dispatch(config: &RunConfig) -> Result<(), CliError> {
    let pair = config.pair();
    let outputs = match config.mode {
        RunMode::Point => {
            let (outputs, failure) = run_point(config)?;
            emit(config, &outputs)?;
            return match failure {
                Some(e) => Err(e),
                None => Ok(()),
            };
        }
        RunMode::Sweep => {
            let params = config.system_params()?;
            let axes = config.axes.as_deref().expect("validated");
            let result = sweep(&params, axes).map_err(Error::from)?;
            let unstable = result.rows.iter().filter(|r| !r.stable).count();
            Outputs {
                main: sweep_csv(&result),
                sidecars: vec![],
                summary: format!("sweep: {} rows, {} unstable\n", result.rows.len(), unstable),
            }
        }
        RunMode::Threshold => {
            let params = config.system_params()?;
            let spec = config.threshold.as_ref().expect("validated");
            let (lo, hi) = (spec.bracket[0], spec.bracket[1]);
            let t = find_threshold(&params, &spec.param, (lo, hi), pair)?;
            Outputs {
                main: format!(
                    "{THRESHOLD_HEADER}\n{},{},{},{},{}\n",
                    spec.param,
                    fmt_f64(lo),
                    fmt_f64(hi),
                    pair,
                    fmt_f64(t)
                ),
                sidecars: vec![],
                summary: format!("threshold {} = {t:.6}\n", spec.param),
            }
        }
        RunMode::Robustness => {
            let params = config.system_params()?;
            let spec = config.robustness.as_ref().expect("validated");
            let criterion = match spec.measure {
                RobustnessMeasure::Entanglement => Extinction::Entanglement { pair },
                RobustnessMeasure::Discord => Extinction::Discord {
                    pair,
                    floor: spec.discord_floor,
                },
            };
            let records = robustness_scan(&params, &spec.n_th_axis, &spec.hopping, criterion)?;
            let measure = match spec.measure {
                RobustnessMeasure::Entanglement => "entanglement",
                RobustnessMeasure::Discord => "discord",
            };
            let mut main = format!("{ROBUSTNESS_HEADER}\n");
            for r in &records {
                let _ = writeln!(
                    main,
                    "{},{measure},{pair},{},{}",
                    fmt_f64(r.hopping),
                    fmt_f64(r.extinction.unwrap_or(f64::NAN)),
                    r.extinction.is_none()
                );
            }
            Outputs {
                main,
                sidecars: vec![],
                summary: String::new(),
            }
        }
        RunMode::Oracle => run_oracle(config)?,
    };
    emit(config, &outputs)
}

fn load(args: &Args) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Io(format!("{}: {e}", args.config.display())))?;
    let mut config = RunConfig::parse(&text)?;
    config.apply_overrides(args);
    config.validate()?;
    Ok(config)
}

/// Runs one invocation and returns the process exit code.
pub fn run(args: Args) -> i32 {
    let result = (|| -> Result<(), CliError> {
        let config = load(&args)?;
        if args.print_config {
            let text = serde_json::to_string_pretty(&config)
                .map_err(|e| CliError::Io(e.to_string()))?;
            println!("{text}");
            return Ok(());
        }
        match args.threads {
            Some(0) => invalid("`--threads` must be >= 1"),
            Some(n) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| CliError::Io(e.to_string()))?;
                pool.install(|| dispatch(&config))
            }
            None => dispatch(&config),
        }
    })();
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}
