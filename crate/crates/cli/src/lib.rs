//! Configuration and subcommands of the `hopf-rigidity` binary.
//!
//! Every run is described by a [`RunConfig`]. It can be read from a JSON
//! file with `--config`; flags given on the command line override the file.
//! Reports go to files (JSON for checks, CSV or JSON for the functionals
//! and sweeps) under `--out`, or under `$HOPF_RIGIDITY_OUT_DIR`, or the
//! working directory.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use hopf_rigidity::calculus::DiffMode;
use hopf_rigidity::fields::Twist;
use hopf_rigidity::functionals::FieldIntegrals;
use hopf_rigidity::geom::{CapDomain, SpherePoint};
use hopf_rigidity::phimap::{DEFAULT_DET_FLOOR, DEFAULT_T_GRID};
use hopf_rigidity::quadrature::{RuleSpec, DEFAULT_ORDERS, MIN_MC_SAMPLES, MIN_ORDER};
use hopf_rigidity::verify::{self, FieldSpec, SweepSpec, Tolerances, VerifyConfig};

pub const OUT_DIR_ENV: &str = "HOPF_RIGIDITY_OUT_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] hopf_rigidity::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use hopf_rigidity::Error as E;
        match self {
            CliError::Config(_) => EXIT_USAGE,
            CliError::Core(
                E::OffSphere { .. }
                | E::NotTangent { .. }
                | E::NotUnit { .. }
                | E::InvalidRadius(_)
                | E::InvalidAxis(_)
                | E::InvalidParameter(_)
                | E::OrderTooSmall(_)
                | E::NotHopfBoundary { .. }
                | E::InvalidStep { .. },
            ) => EXIT_USAGE,
            _ => EXIT_CHECK_FAILED,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, Subcommand)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Run every check over the configured field and cap; exit 1 on any failure.
    #[default]
    Verify,
    /// Energy and volume of the configured field next to the Hopf values.
    Functionals,
    /// Energy and volume over an amplitude grid of the perturbed family.
    Sweep,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum FieldName {
    #[default]
    Hopf,
    Perturbed,
    SmallCap,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum RuleName {
    Gauss,
    MonteCarlo,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeName {
    Ad,
    Fd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    pub center: [f64; 4],
    pub radius: f64,
    pub field: FieldName,
    pub amplitude: f64,
    pub exponent: u32,
    pub twist: Twist,
    pub axis: [f64; 3],
    pub rule: RuleName,
    pub orders: [usize; 3],
    pub samples: usize,
    pub seed: u64,
    pub t_grid: Vec<f64>,
    pub det_floor: f64,
    pub mode: DiffMode,
    pub tolerances: Tolerances,
    pub hopf_samples: usize,
    pub doubling: bool,
    pub amplitudes: Vec<f64>,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let verify = VerifyConfig::default();
        Self {
            command: Command::Verify,
            center: [1.0, 0.0, 0.0, 0.0],
            radius: 1.0,
            field: FieldName::Hopf,
            amplitude: 0.5,
            exponent: 3,
            twist: Twist::default(),
            axis: [1.0, 0.0, 0.0],
            rule: RuleName::Gauss,
            orders: DEFAULT_ORDERS,
            samples: 100_000,
            seed: 0,
            t_grid: DEFAULT_T_GRID.to_vec(),
            det_floor: DEFAULT_DET_FLOOR,
            mode: DiffMode::Ad,
            tolerances: Tolerances::default(),
            hopf_samples: verify.hopf_samples,
            doubling: verify.doubling,
            amplitudes: SweepSpec::default().amplitudes,
            output: None,
            format: None,
        }
    }
}

impl RunConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn cap(&self) -> Result<CapDomain> {
        let center = SpherePoint::new(self.center)
            .map_err(|e| CliError::Config(format!("cap center {:?}: {e}", self.center)))?;
        Ok(CapDomain::new(center, self.radius)?)
    }

    pub fn rule_spec(&self) -> RuleSpec {
        match self.rule {
            RuleName::Gauss => RuleSpec::Gauss { orders: self.orders },
            RuleName::MonteCarlo => RuleSpec::MonteCarlo {
                samples: self.samples,
                seed: self.seed,
            },
        }
    }

    pub fn field_spec(&self) -> FieldSpec {
        match self.field {
            FieldName::Hopf => FieldSpec::Hopf { axis: self.axis },
            FieldName::Perturbed => FieldSpec::Perturbed {
                amplitude: self.amplitude,
                exponent: self.exponent,
                twist: self.twist,
                axis: self.axis,
            },
            FieldName::SmallCap => FieldSpec::SmallCap { radius: self.radius },
        }
    }

    pub fn sweep_spec(&self) -> SweepSpec {
        SweepSpec {
            amplitudes: self.amplitudes.clone(),
            exponent: self.exponent,
            twist: self.twist,
            ..SweepSpec::default()
        }
    }

    pub fn verify_config(&self) -> Result<VerifyConfig> {
        Ok(VerifyConfig {
            fields: vec![self.field_spec()],
            caps: vec![self.cap()?],
            rule: self.rule_spec(),
            mode: self.mode,
            t_grid: self.t_grid.clone(),
            det_floor: self.det_floor,
            tolerances: self.tolerances.clone(),
            hopf_samples: self.hopf_samples,
            seed: self.seed,
            doubling: self.doubling && self.rule == RuleName::Gauss,
            sweep: None,
            ..VerifyConfig::default()
        })
    }

    /// Rejects configurations no command can run.
    pub fn validate(&self) -> Result<()> {
        let cap = self.cap()?;
        match self.rule_spec() {
            RuleSpec::Gauss { orders } => {
                if let Some(&n) = orders.iter().find(|&&n| n < MIN_ORDER) {
                    return Err(hopf_rigidity::Error::OrderTooSmall(n).into());
                }
            }
            RuleSpec::MonteCarlo { samples, .. } => {
                if samples < MIN_MC_SAMPLES {
                    return Err(CliError::Config(format!(
                        "{samples} Monte Carlo samples; at least {MIN_MC_SAMPLES} required"
                    )));
                }
            }
        }
        self.field_spec().build(&cap)?;
        if !(self.det_floor.is_finite() && self.det_floor >= 0.0) {
            return Err(CliError::Config(format!("det floor {} must be nonnegative", self.det_floor)));
        }
        if self.t_grid.iter().any(|t| !t.is_finite()) {
            return Err(CliError::Config("t grid must be finite".into()));
        }
        if self.command == Command::Sweep {
            if self.amplitudes.is_empty() || !self.amplitudes.contains(&0.0) {
                return Err(CliError::Config("sweep grid must contain A = 0".into()));
            }
            if self.amplitudes.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(CliError::Config("sweep grid must be strictly ascending".into()));
            }
        }
        Ok(())
    }

    fn format_or(&self, default: Format) -> Format {
        self.format.unwrap_or(default)
    }

    /// Explicit `--out`, else `<$HOPF_RIGIDITY_OUT_DIR or .>/<command>.<ext>`.
    pub fn output_path(&self, format: Format) -> PathBuf {
        if let Some(p) = &self.output {
            return p.clone();
        }
        let dir = std::env::var_os(OUT_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("."));
        let stem = match self.command {
            Command::Verify => "verify",
            Command::Functionals => "functionals",
            Command::Sweep => "sweep",
        };
        let ext = match format {
            Format::Json => "json",
            Format::Csv => "csv",
        };
        dir.join(format!("{stem}.{ext}"))
    }
}

#[derive(Debug, Parser)]
#[command(name = "hopf-rigidity", version, about = "Energy and volume of unit fields on caps of S³")]
pub struct Cli {
    /// Defaults to the config file's command, else `verify`.
    #[command(subcommand)]
    pub command: Option<Command>,
    #[command(flatten)]
    pub flags: Flags,
}

/// Every flag is optional so that it only overrides what it names.
#[derive(Debug, Default, Args)]
pub struct Flags {
    /// JSON run configuration; flags override its entries.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Cap center as w,x,y,z.
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub center: Option<Vec<f64>>,
    #[arg(long = "cap-radius", global = true)]
    pub radius: Option<f64>,
    #[arg(long, global = true)]
    pub field: Option<FieldName>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub amplitude: Option<f64>,
    #[arg(long, global = true)]
    pub exponent: Option<u32>,
    /// none, angular, or an angle in radians.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub twist: Option<Twist>,
    /// Hopf axis as i,j,k.
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub axis: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub rule: Option<RuleName>,
    /// Gauss orders N_ρ,N_θ,N_φ.
    #[arg(long, global = true, value_delimiter = ',')]
    pub orders: Option<Vec<usize>>,
    /// Monte Carlo sample count.
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long = "t-grid", global = true, value_delimiter = ',')]
    pub t_grid: Option<Vec<f64>>,
    #[arg(long = "det-floor", global = true)]
    pub det_floor: Option<f64>,
    #[arg(long, global = true)]
    pub mode: Option<ModeName>,
    /// One tolerance for every equality and bound check.
    #[arg(long, global = true)]
    pub tolerance: Option<f64>,
    #[arg(long = "hopf-samples", global = true)]
    pub hopf_samples: Option<usize>,
    /// Skip the rerun with doubled Gauss orders.
    #[arg(long = "no-doubling", global = true)]
    pub no_doubling: bool,
    /// Sweep grid, ascending and containing 0.
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub amplitudes: Option<Vec<f64>>,
    #[arg(long = "out", global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true)]
    pub format: Option<Format>,
}

fn fixed<T: Copy, const N: usize>(flag: &str, v: &[T]) -> Result<[T; N]> {
    v.try_into()
        .map_err(|_| CliError::Config(format!("{flag} takes {N} comma-separated values, got {}", v.len())))
}

impl Cli {
    /// Configuration file (or defaults) with the flags applied.
    pub fn into_config(self) -> Result<RunConfig> {
        let f = self.flags;
        let mut c = match &f.config {
            Some(path) => RunConfig::from_json_file(path)?,
            None => RunConfig::default(),
        };
        if let Some(command) = self.command {
            c.command = command;
        }
        if let Some(v) = f.center {
            c.center = fixed("--center", &v)?;
        }
        if let Some(r) = f.radius {
            c.radius = r;
        }
        if let Some(v) = f.field {
            c.field = v;
        }
        if let Some(v) = f.amplitude {
            c.amplitude = v;
        }
        if let Some(v) = f.exponent {
            c.exponent = v;
        }
        if let Some(v) = f.twist {
            c.twist = v;
        }
        if let Some(v) = f.axis {
            c.axis = fixed("--axis", &v)?;
        }
        if let Some(v) = f.rule {
            c.rule = v;
        }
        if let Some(v) = f.orders {
            c.orders = fixed("--orders", &v)?;
        }
        if let Some(v) = f.samples {
            c.samples = v;
        }
        if let Some(v) = f.seed {
            c.seed = v;
        }
        if let Some(v) = f.t_grid {
            c.t_grid = v;
        }
        if let Some(v) = f.det_floor {
            c.det_floor = v;
        }
        if let Some(v) = f.mode {
            c.mode = match v {
                ModeName::Ad => DiffMode::Ad,
                ModeName::Fd => DiffMode::Fd,
            };
        }
        if let Some(v) = f.tolerance {
            c.tolerances = Tolerances::uniform(v);
        }
        if let Some(v) = f.hopf_samples {
            c.hopf_samples = v;
        }
        if f.no_doubling {
            c.doubling = false;
        }
        if let Some(v) = f.amplitudes {
            c.amplitudes = v;
        }
        if let Some(v) = f.output {
            c.output = Some(v);
        }
        if let Some(v) = f.format {
            c.format = Some(v);
        }
        Ok(c)
    }
}

/// Where a command wrote its report, the text it prints, and its exit code.
#[derive(Debug)]
pub struct Outcome {
    pub exit_code: i32,
    pub path: PathBuf,
    pub summary: String,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let mut file = fs::File::create(path).map_err(io)?;
    file.write_all(bytes).map_err(io)
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value).map_err(hopf_rigidity::Error::from)?;
    out.push(b'\n');
    Ok(out)
}

pub fn cmd_verify(config: &RunConfig) -> Result<Outcome> {
    config.validate()?;
    let reports = verify::run_all(&config.verify_config()?)?;
    let path = config.output_path(Format::Json);
    write_file(&path, &json_bytes(&reports)?)?;
    let failed = reports.iter().filter(|r| !r.pass).count();
    let mut summary = String::new();
    for r in &reports {
        summary.push_str(&format!(
            "{} {:<28} lhs {:>14.8e} rhs {:>14.8e} rel {:.2e} tol {:.1e}\n",
            if r.pass { "PASS" } else { "FAIL" },
            r.name,
            r.lhs,
            r.rhs,
            r.rel_err,
            r.tolerance
        ));
    }
    summary.push_str(&format!("{} of {} checks passed\n", reports.len() - failed, reports.len()));
    Ok(Outcome {
        exit_code: if failed == 0 { EXIT_OK } else { EXIT_CHECK_FAILED },
        path,
        summary,
    })
}

/// One row of the functionals report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionalsRow {
    pub cap_volume: f64,
    pub energy: f64,
    pub volume: f64,
    pub hopf_energy: f64,
    pub hopf_volume: f64,
    pub energy_surplus: f64,
    pub volume_surplus: f64,
    pub energy_error: f64,
    pub volume_error: f64,
}

impl From<&FieldIntegrals> for FunctionalsRow {
    fn from(fi: &FieldIntegrals) -> Self {
        let e = fi.energy();
        let v = fi.volume();
        Self {
            cap_volume: fi.cap_volume,
            energy: e.value,
            volume: v.value,
            hopf_energy: fi.hopf_energy(),
            hopf_volume: fi.hopf_volume(),
            energy_surplus: e.value - fi.hopf_energy(),
            volume_surplus: v.value - fi.hopf_volume(),
            energy_error: e.error_estimate,
            volume_error: v.error_estimate,
        }
    }
}

fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    w.into_inner().map_err(|e| CliError::Csv(e.into_error().into()))
}

pub fn cmd_functionals(config: &RunConfig) -> Result<Outcome> {
    config.validate()?;
    let cap = config.cap()?;
    let field = config.field_spec().build(&cap)?;
    let rule = config.rule_spec().build(&cap)?;
    let integrals = FieldIntegrals::compute(&field, &rule, config.mode)?;
    let row = FunctionalsRow::from(&integrals);
    let format = config.format_or(Format::Csv);
    let bytes = match format {
        Format::Csv => csv_bytes(&[&row])?,
        Format::Json => json_bytes(&row)?,
    };
    let path = config.output_path(format);
    write_file(&path, &bytes)?;
    Ok(Outcome {
        exit_code: EXIT_OK,
        path,
        summary: String::from_utf8_lossy(&bytes).into_owned(),
    })
}

#[derive(Serialize)]
struct SweepRow {
    #[serde(rename = "A")]
    amplitude: f64,
    energy: f64,
    volume: f64,
}

pub fn cmd_sweep(config: &RunConfig) -> Result<Outcome> {
    config.validate()?;
    let cap = config.cap()?;
    let rule = config.rule_spec().build(&cap)?;
    let spec = config.sweep_spec();
    let result = verify::sweep_family(&cap, &spec, &rule, config.mode)?;
    let format = config.format_or(Format::Csv);
    let bytes = match format {
        Format::Csv => {
            let rows: Vec<SweepRow> = (0..result.amplitudes.len())
                .map(|i| SweepRow {
                    amplitude: result.amplitudes[i],
                    energy: result.energies[i],
                    volume: result.volumes[i],
                })
                .collect();
            csv_bytes(&rows)?
        }
        Format::Json => json_bytes(&result)?,
    };
    let path = config.output_path(format);
    write_file(&path, &bytes)?;
    let checks = verify::sweep_checks(&result, &rule, &spec, &config.tolerances);
    let pass = checks.iter().all(|c| c.pass);
    let summary = format!(
        "energy argmin A = {} (refined {:.3e}, unimodal {})\nvolume argmin A = {} (refined {:.3e}, unimodal {})\n",
        result.energy_argmin_amplitude(),
        result.refined_energy_argmin,
        result.energy_unimodal,
        result.volume_argmin_amplitude(),
        result.refined_volume_argmin,
        result.volume_unimodal,
    );
    Ok(Outcome {
        exit_code: if pass { EXIT_OK } else { EXIT_CHECK_FAILED },
        path,
        summary,
    })
}

pub fn run(config: &RunConfig) -> Result<Outcome> {
    match config.command {
        Command::Verify => cmd_verify(config),
        Command::Functionals => cmd_functionals(config),
        Command::Sweep => cmd_sweep(config),
    }
}
