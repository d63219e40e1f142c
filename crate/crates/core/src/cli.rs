//! Command-line front end of the `pulseforge` binary.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | internal numerical failure |
//! | 2 | usage, config or input error |
//! | 3 | degenerate spectrum |
//! | 4 | unreachable target |
//! | 5 | branch search or pulse budget exhausted |
//! | 6 | dimension mismatch |
//! | 7 | gap class without a synthesis route |

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::analysis::{sweep_ratio, verify, SweepResult};
use crate::error::Error;
use crate::model::{
    classify_gaps, normalize_target, random_target, validate_target, GapTag, LevelSystem,
    Protocol, TargetDecomposition,
};
use crate::simulator::run;
use crate::synthesis::{synthesize, DriveBudget, LadderWeights, SynthesisOptions};

#[derive(Debug, Parser)]
#[command(
    name = "pulseforge",
    version,
    about = "Synthesize and verify square-pulse control protocols"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Write the main output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for the random target used when the config has none.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the gap class of the configured spectrum.
    Classify,
    /// Synthesize a protocol for the configured target and report on it.
    Synth {
        /// Write the exact trajectory as CSV.
        #[arg(long)]
        trajectory: Option<PathBuf>,
        /// Number of trajectory samples.
        #[arg(long, default_value_t = 201)]
        samples: usize,
    },
    /// Re-run a protocol (or a synth report) against the configured target.
    Verify {
        #[arg(long)]
        protocol: PathBuf,
    },
    /// Exact infidelity against the drive ratio `d / omega`.
    Sweep,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub energies: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    pub amplitudes: Vec<[f64; 2]>,
    /// Rescale to unit norm instead of rejecting non-normalized input.
    #[serde(default)]
    pub normalize: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub ratios: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub system: SystemConfig,
    #[serde(default)]
    pub target: Option<TargetConfig>,
    #[serde(default)]
    pub budget: DriveBudget,
    #[serde(default, rename = "sysIII")]
    pub ladder: Option<LadderWeights>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl Config {
    pub fn from_json(text: &str) -> Result<Config, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Config, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Config::from_json(&text)
    }

    pub fn system(&self) -> Result<LevelSystem, CliError> {
        Ok(LevelSystem::new(self.system.energies.clone())?)
    }

    pub fn options(&self) -> SynthesisOptions {
        SynthesisOptions {
            budget: self.budget,
            ladder: self.ladder.unwrap_or_default(),
        }
    }

    /// The configured target, or a seeded random one when absent.
    pub fn target(&self, dim: usize, seed: Option<u64>) -> Result<TargetDecomposition, CliError> {
        match &self.target {
            Some(t) => {
                if t.amplitudes.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found: t.amplitudes.len(),
                    }
                    .into());
                }
                let amps: Vec<Complex64> =
                    t.amplitudes.iter().map(|&[re, im]| Complex64::new(re, im)).collect();
                Ok(if t.normalize {
                    normalize_target(&amps)?
                } else {
                    validate_target(&amps)?
                })
            }
            None => {
                let seed = seed.or(self.seed).unwrap_or(0);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                Ok(validate_target(&random_target(dim, &mut rng))?)
            }
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Config(String),
    Io(String),
    Lib(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Lib(e) => match e {
                Error::Degenerate { .. } => 3,
                Error::UnreachableTarget(_)
                | Error::UnreachableAmplitudes { .. }
                | Error::DegenerateChain { .. }
                | Error::InconsistentAmplitudes(_) => 4,
                Error::BranchSearchExhausted { .. } | Error::BudgetExceeded { .. } => 5,
                Error::DimensionMismatch { .. } => 6,
                Error::UnsupportedGapClass(_) | Error::WrongGapClass { .. } => 7,
                Error::NotHermitian { .. } | Error::ConvergenceFailure => 1,
                Error::ZeroVector
                | Error::InvalidIndex(_)
                | Error::InvalidProtocol(_)
                | Error::InvalidInput(_) => 2,
            },
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "Usage",
            CliError::Config(_) => "Config",
            CliError::Io(_) => "Io",
            CliError::Lib(e) => e.kind(),
        }
    }

    pub fn message(&self) -> String {
        match self {
            CliError::Usage(m) | CliError::Config(m) | CliError::Io(m) => m.clone(),
            CliError::Lib(e) => e.to_string(),
        }
    }

    /// `{"error": kind, "message": text}`
    pub fn to_json(&self) -> String {
        json!({ "error": self.kind(), "message": self.message() }).to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyOutput {
    pub class: GapTag,
    pub gaps: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))
}

fn json_only(format: Option<Format>) -> Result<(), CliError> {
    match format {
        Some(Format::Csv) => Err(CliError::Usage("CSV output is only available for sweep".into())),
        _ => Ok(()),
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn classify(config: &Config) -> Result<ClassifyOutput, CliError> {
    let system = config.system()?;
    let class = classify_gaps(&system);
    let note = (system.dim() == 2)
        .then(|| "two-level system: synthesized as a System I chain of length 1".to_string());
    Ok(ClassifyOutput {
        class: class.tag,
        gaps: class.gaps,
        note,
    })
}

/// CSV of `time, re_1, im_1, ..., re_N, im_N`.
pub fn trajectory_csv(protocol: &Protocol, samples: usize) -> Result<String, CliError> {
    let traj = run(protocol, &protocol.initial_state(), Some(samples.max(2)))?;
    let mut out = String::from("time");
    for k in 1..=protocol.dim() {
        write!(out, ",re_{k},im_{k}").unwrap();
    }
    out.push('\n');
    for (t, s) in traj.times.iter().zip(&traj.states) {
        write!(out, "{t:?}").unwrap();
        for a in s.amplitudes() {
            write!(out, ",{:?},{:?}", a.re, a.im).unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

/// CSV rows `ratio,fidelity,infidelity,status` and a trailing JSON summary.
pub fn sweep_csv(result: &SweepResult) -> String {
    let mut out = String::from("ratio,fidelity,infidelity,status\n");
    let opt = |x: Option<f64>| x.map(|v| format!("{v:?}")).unwrap_or_default();
    for p in &result.points {
        writeln!(out, "{:?},{},{},{}", p.ratio, opt(p.fidelity), opt(p.infidelity), p.status).unwrap();
    }
    let summary = json!({
        "slope": result.fit.map(|f| f.slope),
        "intercept": result.fit.map(|f| f.intercept),
        "residual": result.fit.map(|f| f.residual),
        "ok": result.points.iter().filter(|p| p.status == "ok").count(),
        "failed": result.points.iter().filter(|p| p.status != "ok").count(),
    });
    writeln!(out, "{summary}").unwrap();
    out
}

/// A protocol plus the target stored alongside it in a report, if any.
pub type LoadedProtocol = (Protocol, Option<Vec<[f64; 2]>>);

/// Reads a protocol file holding either a protocol or a synth report.
pub fn load_protocol(path: &Path) -> Result<LoadedProtocol, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Config(e.to_string()))?;
    let parse = |v: serde_json::Value| {
        serde_json::from_value::<Protocol>(v).map_err(|e| CliError::Config(format!("protocol: {e}")))
    };
    match value.get_mut("protocol") {
        Some(p) => {
            let protocol = parse(p.take())?;
            let target = value
                .get("target")
                .map(|t| serde_json::from_value(t.clone()))
                .transpose()
                .map_err(|e| CliError::Config(format!("report target: {e}")))?;
            Ok((protocol, target))
        }
        None => Ok((parse(value)?, None)),
    }
}

/// Executes one command and returns the text for stdout or `--out`.
pub fn execute(cli: &Cli) -> Result<String, CliError> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| CliError::Usage("--config PATH is required".into()))?;
    let config = Config::load(path)?;
    match &cli.command {
        Command::Classify => {
            json_only(cli.format)?;
            to_json(&classify(&config)?)
        }
        Command::Synth {
            trajectory,
            samples,
        } => {
            json_only(cli.format)?;
            let system = config.system()?;
            let target = config.target(system.dim(), cli.seed)?;
            let synthesis = synthesize(&target, &system, &config.options())?;
            log::info!(
                "{:?}: angles {:?}, waits {:?}",
                synthesis.class,
                synthesis.angles.angles,
                synthesis.waits.waits
            );
            let report = verify(&synthesis.protocol, &target)?;
            if let Some(p) = trajectory {
                write_file(p, &trajectory_csv(&synthesis.protocol, *samples)?)?;
            }
            to_json(&report)
        }
        Command::Verify { protocol } => {
            json_only(cli.format)?;
            let system = config.system()?;
            let (protocol, report_target) = load_protocol(protocol)?;
            if protocol.dim() != system.dim() {
                return Err(Error::DimensionMismatch {
                    expected: system.dim(),
                    found: protocol.dim(),
                }
                .into());
            }
            let target = match (&config.target, report_target) {
                (None, Some(amps)) => {
                    let amps: Vec<Complex64> =
                        amps.iter().map(|&[re, im]| Complex64::new(re, im)).collect();
                    validate_target(&amps)?
                }
                _ => config.target(system.dim(), cli.seed)?,
            };
            to_json(&verify(&protocol, &target)?)
        }
        Command::Sweep => {
            let system = config.system()?;
            let target = config.target(system.dim(), cli.seed)?;
            let ratios = config
                .sweep
                .as_ref()
                .map(|s| s.ratios.clone())
                .ok_or_else(|| CliError::Usage("config needs sweep.ratios".into()))?;
            let result = sweep_ratio(&target, &system, &ratios, &config.options())?;
            match cli.format.unwrap_or(Format::Csv) {
                Format::Csv => Ok(sweep_csv(&result)),
                Format::Json => to_json(&result),
            }
        }
    }
}

/// Entry point of the binary: parses arguments, runs, reports errors as JSON
/// on stderr and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            if code != 0 {
                eprintln!("{}", CliError::Usage(e.kind().to_string()).to_json());
            }
            return code;
        }
    };
    match execute(&cli) {
        Ok(text) => {
            let text = if text.ends_with('\n') { text } else { text + "\n" };
            match &cli.out {
                Some(p) => match write_file(p, &text) {
                    Ok(()) => 0,
                    Err(e) => {
                        eprintln!("{}", e.to_json());
                        e.exit_code()
                    }
                },
                None => {
                    print!("{text}");
                    0
                }
            }
        }
        Err(e) => {
            log::error!("{}", e.message());
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults() {
        let c = Config::from_json(r#"{"system": {"energies": [0, 1, 3]}}"#).unwrap();
        assert_eq!(c.budget, DriveBudget::default());
        assert!(c.target.is_none() && c.sweep.is_none() && c.ladder.is_none());
        let c = Config::from_json(
            r#"{"system": {"energies": [0, 1, 2]}, "budget": {"ratio": 50}, "sysIII": {"d1": 1, "d2": 2}}"#,
        )
        .unwrap();
        assert_eq!(c.budget.ratio, 50.0);
        assert_eq!(c.budget.l_max, 1_000_000);
        assert_eq!(c.options().ladder, LadderWeights { d1: 1.0, d2: 2.0 });
        assert!(matches!(
            Config::from_json(r#"{"system": {"energies": [0, 1]}, "bogus": 1}"#),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn classify_examples() {
        let c = |e: &str| classify(&Config::from_json(&format!(r#"{{"system": {{"energies": {e}}}}}"#)).unwrap());
        assert_eq!(c("[0,1,3,5]").unwrap().class, GapTag::SystemI);
        assert_eq!(c("[0,1,3,4]").unwrap().class, GapTag::SystemII);
        let two = c("[0,1]").unwrap();
        assert_eq!(two.class, GapTag::Other);
        assert!(two.note.is_some());
        assert_eq!(c("[0,1,1]").unwrap_err().exit_code(), 3);
    }

    #[test]
    fn seeded_targets_are_deterministic() {
        let c = Config::from_json(r#"{"system": {"energies": [0, 1, 3]}, "seed": 9}"#).unwrap();
        assert_eq!(c.target(3, None).unwrap(), c.target(3, None).unwrap());
        assert_ne!(c.target(3, None).unwrap(), c.target(3, Some(10)).unwrap());
    }

    #[test]
    fn target_checks() {
        let c = Config::from_json(
            r#"{"system": {"energies": [0, 1, 3]}, "target": {"amplitudes": [[1, 0], [0, 0]]}}"#,
        )
        .unwrap();
        assert_eq!(c.target(3, None).unwrap_err().exit_code(), 6);
        let c = Config::from_json(
            r#"{"system": {"energies": [0, 1]}, "target": {"amplitudes": [[1, 0], [1, 0]], "normalize": true}}"#,
        )
        .unwrap();
        assert!((c.target(2, None).unwrap().magnitudes[0] - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::from(Error::UnreachableTarget("x".into())).exit_code(), 4);
        assert_eq!(CliError::from(Error::BudgetExceeded { needed: 2, max: 1 }).exit_code(), 5);
        assert_eq!(CliError::from(Error::BranchSearchExhausted { bound: 64 }).exit_code(), 5);
        assert_eq!(CliError::from(Error::UnsupportedGapClass(GapTag::Other)).exit_code(), 7);
        let j: serde_json::Value = serde_json::from_str(&CliError::Usage("m".into()).to_json()).unwrap();
        assert_eq!(j["error"], "Usage");
    }
}
