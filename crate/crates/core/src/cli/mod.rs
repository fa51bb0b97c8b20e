//! Command-line interface.
//!
//! Every run resolves defaults, then command-line flags, then the optional
//! `--config` file (which wins), and writes the result to `manifest.txt` in
//! the output directory. Passing that manifest back as `--config` repeats
//! the run exactly.

mod commands;
pub mod pipeline;

pub use commands::execute;

use crate::error::{Error, Result};
use crate::simulator::{parse_pairs, DgpConfig};
use clap::{Args, Parser, Subcommand};
use std::fmt::Write as _;
use std::path::PathBuf;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_ESTIMATION: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "discount-cml",
    version,
    about = "Causal effects of price discounts among always buyers"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Simulate,
    Estimate,
    Diagnose,
    Predict,
    Heterogeneity,
    McStudy,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a synthetic survey with known ground truth.
    Simulate(CommonArgs),
    /// Causal forest, DML, OLS and matching estimates among always buyers.
    Estimate(CommonArgs),
    /// Monotonicity and conditional-independence tests.
    Diagnose(CommonArgs),
    /// Predictive outcome analysis with classification forests.
    Predict(CommonArgs),
    /// Conditional-effect distribution and best linear predictors.
    Heterogeneity(CommonArgs),
    /// Monte Carlo study of one estimator against the oracle.
    McStudy(CommonArgs),
}

impl Command {
    pub fn split(self) -> (CommandKind, CommonArgs) {
        match self {
            Command::Simulate(a) => (CommandKind::Simulate, a),
            Command::Estimate(a) => (CommandKind::Estimate, a),
            Command::Diagnose(a) => (CommandKind::Diagnose, a),
            Command::Predict(a) => (CommandKind::Predict, a),
            Command::Heterogeneity(a) => (CommandKind::Heterogeneity, a),
            Command::McStudy(a) => (CommandKind::McStudy, a),
        }
    }
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Simulate => "simulate",
            CommandKind::Estimate => "estimate",
            CommandKind::Diagnose => "diagnose",
            CommandKind::Predict => "predict",
            CommandKind::Heterogeneity => "heterogeneity",
            CommandKind::McStudy => "mc-study",
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Survey CSV.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Column-role schema; defaults to the data path with a `.schema` extension.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Key-value run configuration; overrides flags. A manifest works here.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub trees: Option<usize>,
    #[arg(long)]
    pub folds: Option<usize>,
    /// Propensity trimming threshold.
    #[arg(long)]
    pub trim: Option<f64>,
    /// Discount at or above which the binary treatment is 1.
    #[arg(long = "binarize-at")]
    pub binarize_at: Option<f64>,
    /// Bootstrap replicates for matching standard errors.
    #[arg(long)]
    pub bootstrap: Option<usize>,
    /// Customers drawn by `simulate` and per replication of `mc-study`.
    #[arg(long)]
    pub n: Option<usize>,
    /// Monte Carlo replications.
    #[arg(long)]
    pub reps: Option<usize>,
    /// Estimator for `mc-study`: cf_ape, dml_ate, dml_oracle or naive_ols.
    #[arg(long)]
    pub estimator: Option<String>,
    /// Also run the predictive analysis within each discount arm.
    #[arg(long)]
    pub subsamples: bool,
    /// Comma-separated characteristics for the heterogeneity regression.
    #[arg(long)]
    pub basis: Option<String>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
}

/// Fully resolved run settings; everything that affects outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: CommandKind,
    pub data: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub seed: u64,
    pub trees: usize,
    pub folds: usize,
    pub trim: f64,
    pub binarize_at: f64,
    pub max_discount: f64,
    pub bootstrap: usize,
    pub tune: bool,
    pub reps: usize,
    pub estimator: String,
    pub subsamples: bool,
    pub basis: Vec<String>,
    pub oracle_draws: usize,
    pub dgp: DgpConfig,
}

impl RunConfig {
    pub fn defaults(command: CommandKind) -> Self {
        RunConfig {
            command,
            data: None,
            schema: None,
            seed: 1,
            trees: 500,
            folds: 3,
            trim: 0.01,
            binarize_at: 0.3,
            max_discount: 0.7,
            bootstrap: 199,
            tune: true,
            reps: 20,
            estimator: "cf_ape".into(),
            subsamples: false,
            basis: Vec::new(),
            oracle_draws: 1_000_000,
            dgp: DgpConfig::default(),
        }
    }

    fn uses_dgp(&self) -> bool {
        matches!(self.command, CommandKind::Simulate | CommandKind::McStudy)
    }

    /// Defaults, then flags, then the config file.
    pub fn resolve(command: CommandKind, args: &CommonArgs) -> Result<Self> {
        let mut c = RunConfig::defaults(command);
        c.data = args.data.clone();
        c.schema = args.schema.clone();
        if let Some(v) = args.seed {
            c.seed = v;
        }
        if let Some(v) = args.trees {
            c.trees = v;
        }
        if let Some(v) = args.folds {
            c.folds = v;
        }
        if let Some(v) = args.trim {
            c.trim = v;
        }
        if let Some(v) = args.binarize_at {
            c.binarize_at = v;
        }
        if let Some(v) = args.bootstrap {
            c.bootstrap = v;
        }
        if let Some(v) = args.n {
            c.dgp.n = v;
        }
        if let Some(v) = args.reps {
            c.reps = v;
        }
        if let Some(v) = &args.estimator {
            c.estimator = v.clone();
        }
        c.subsamples |= args.subsamples;
        if let Some(v) = &args.basis {
            c.set("basis", v)?;
        }
        if let Some(path) = &args.config {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            for (k, v) in parse_pairs(&text)? {
                c.set(&k, &v).map_err(|e| Error::Parse {
                    path: path.clone(),
                    message: e.to_string(),
                })?;
            }
        }
        c.dgp.seed = c.seed;
        c.dgp.binarize_at = c.binarize_at;
        c.dgp.max_discount = c.max_discount;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trees == 0 {
            return Err(Error::validation("trees must be positive"));
        }
        if self.folds < 2 {
            return Err(Error::validation("folds must be at least 2"));
        }
        if !(0.0..0.5).contains(&self.trim) {
            return Err(Error::validation("trim must lie in [0, 0.5)"));
        }
        if self.uses_dgp() {
            self.dgp.validate()?;
        }
        if self.command == CommandKind::McStudy {
            crate::simulator::McEstimator::parse(&self.estimator)?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let parse_err = || Error::validation(format!("{key}: cannot parse {v:?}"));
        match key {
            "command" => {
                if v != self.command.name() {
                    return Err(Error::validation(format!(
                        "configuration is for {v:?}, not {:?}",
                        self.command.name()
                    )));
                }
            }
            "data" => self.data = (!v.is_empty()).then(|| PathBuf::from(v)),
            "schema" => self.schema = (!v.is_empty()).then(|| PathBuf::from(v)),
            "seed" => self.seed = v.parse().map_err(|_| parse_err())?,
            "trees" => self.trees = v.parse().map_err(|_| parse_err())?,
            "folds" => self.folds = v.parse().map_err(|_| parse_err())?,
            "trim" => self.trim = v.parse().map_err(|_| parse_err())?,
            "binarize_at" => self.binarize_at = v.parse().map_err(|_| parse_err())?,
            "max_discount" => self.max_discount = v.parse().map_err(|_| parse_err())?,
            "bootstrap" => self.bootstrap = v.parse().map_err(|_| parse_err())?,
            "tune" => self.tune = v.parse().map_err(|_| parse_err())?,
            "reps" => self.reps = v.parse().map_err(|_| parse_err())?,
            "estimator" => self.estimator = v.to_string(),
            "subsamples" => self.subsamples = v.parse().map_err(|_| parse_err())?,
            "basis" => {
                self.basis = v
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(str::to_string)
                    .collect()
            }
            "oracle_draws" => self.oracle_draws = v.parse().map_err(|_| parse_err())?,
            _ if DgpConfig::is_key(key) => self.dgp.set(key, v)?,
            _ => return Err(Error::validation(format!("unknown configuration key {key:?}"))),
        }
        Ok(())
    }

    /// Manifest text; `--config` on it reproduces this configuration.
    pub fn to_manifest(&self) -> String {
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let mut s = String::new();
        let _ = writeln!(s, "# discount-cml {} run manifest", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(s, "command = {}", self.command.name());
        let _ = writeln!(s, "data = {}", path(&self.data));
        let _ = writeln!(s, "schema = {}", path(&self.schema));
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "trees = {}", self.trees);
        let _ = writeln!(s, "folds = {}", self.folds);
        let _ = writeln!(s, "trim = {:?}", self.trim);
        let _ = writeln!(s, "binarize_at = {:?}", self.binarize_at);
        let _ = writeln!(s, "max_discount = {:?}", self.max_discount);
        let _ = writeln!(s, "bootstrap = {}", self.bootstrap);
        let _ = writeln!(s, "tune = {}", self.tune);
        let _ = writeln!(s, "reps = {}", self.reps);
        let _ = writeln!(s, "estimator = {}", self.estimator);
        let _ = writeln!(s, "subsamples = {}", self.subsamples);
        let _ = writeln!(s, "basis = {}", self.basis.join(","));
        let _ = writeln!(s, "oracle_draws = {}", self.oracle_draws);
        if self.uses_dgp() {
            for line in self.dgp.to_text().lines() {
                // seed, binarize_at and max_discount are already listed
                if !["seed", "binarize_at", "max_discount"]
                    .iter()
                    .any(|k| line.starts_with(&format!("{k} ")))
                {
                    let _ = writeln!(s, "{line}");
                }
            }
        }
        s
    }
}

/// Exit code for an error: 2 for invalid input, 3 for estimation failures.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Estimation(_) | Error::Json(_) => EXIT_ESTIMATION,
        _ => EXIT_VALIDATION,
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let (kind, args) = cli.command.split();
    if let Some(t) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            log::warn!("could not set thread count: {e}");
        }
    }
    let cfg = match RunConfig::resolve(kind, &args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    match execute(&cfg, &args.out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
