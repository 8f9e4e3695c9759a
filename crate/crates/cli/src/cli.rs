//! Argument parsing and subcommand dispatch.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::bundle::{write_manifest, Bundle, RunInfo};
use crate::commands::{self as cmd, Ctx};
use crate::config::{sha256_hex, RunConfig};
use crate::error::{CliError, Result};
use crate::exec::Pool;

#[derive(Debug, Parser)]
#[command(name = "panc-risk", version, about = "ICU readmission risk pipeline for acute pancreatitis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic cohort and write cohort.csv
    Synth(Common),
    /// Build the cohort from static and event extracts and write cohort.csv
    Ingest(Common),
    /// Exclusions, split, preprocessing and feature selection
    Select(WithCohort),
    /// Grid search and final fit for every configured model
    Train(Common),
    /// Train and test metrics, ROC and calibration
    Evaluate(Common),
    /// SHAP attributions and cohort comparison statistics
    Explain(WithCohort),
    /// Leave-one-feature-out ablation
    Ablate(Common),
    /// Every stage, written to the output directory in one commit
    Run(WithCohort),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Run configuration (JSON)
    #[arg(long)]
    pub config: PathBuf,
    /// Override the configured seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (defaults to the available cores)
    #[arg(long, env = "PANC_RISK_WORKERS")]
    pub workers: Option<usize>,
    /// Output directory (overrides the config)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct WithCohort {
    #[command(flatten)]
    pub common: Common,
    /// Read the cohort from this CSV instead of the output directory or config source
    #[arg(long)]
    pub from_cohort: Option<PathBuf>,
}

fn workers(flag: Option<usize>) -> usize {
    flag.filter(|&n| n > 0).unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

struct Session {
    cfg: RunConfig,
    info: RunInfo,
    pool: Pool,
    out: PathBuf,
}

impl Session {
    fn open(c: &Common) -> Result<Self> {
        let (cfg, bytes) = RunConfig::load(&c.config)?;
        let seed = c.seed.unwrap_or(cfg.seed);
        let out = c
            .out
            .clone()
            .or_else(|| cfg.out.as_ref().map(|o| c.config.parent().unwrap_or(Path::new(".")).join(o)))
            .ok_or_else(|| CliError::Config("no output directory: pass --out or set `out` in the config".into()))?;
        Ok(Self { info: RunInfo { seed, config_sha256: sha256_hex(&bytes) }, pool: Pool::new(workers(c.workers)), cfg, out })
    }

    fn ctx(&self) -> Ctx<'_> {
        Ctx { cfg: &self.cfg, seed: self.info.seed, pool: &self.pool, out: self.out.clone() }
    }

    fn commit(&self, bundle: &Bundle) -> Result<()> {
        bundle.commit(&self.out, &self.info)?;
        eprintln!("wrote {} files to {}", bundle.paths().count(), self.out.display());
        Ok(())
    }
}

pub fn execute(command: &Command) -> Result<()> {
    match command {
        Command::Synth(c) | Command::Ingest(c) => {
            let s = Session::open(c)?;
            match (command, s.cfg.source()?) {
                (Command::Synth(_), crate::config::Source::Extract(_)) => {
                    return Err(CliError::Config("`synth` needs a `synthetic` source in the config".into()))
                }
                (Command::Ingest(_), crate::config::Source::Synthetic(_)) => {
                    return Err(CliError::Config("`ingest` needs an `input` source in the config".into()))
                }
                _ => {}
            }
            let cohort = cmd::config_cohort(&s.ctx())?;
            s.commit(&cmd::cohort_bundle(&cohort))
        }
        Command::Select(w) => {
            let s = Session::open(&w.common)?;
            let ctx = s.ctx();
            let cohort = cmd::load_cohort(&ctx, w.from_cohort.as_deref())?;
            let (_, b) = cmd::stage_select(&ctx, &cohort)?;
            s.commit(&b)
        }
        Command::Train(c) => {
            let s = Session::open(c)?;
            let ctx = s.ctx();
            let (train, _) = cmd::load_matrices(&ctx)?;
            let (_, b) = cmd::stage_train(&ctx, &train, &cmd::load_folds(&ctx)?)?;
            s.commit(&b)
        }
        Command::Evaluate(c) => {
            let s = Session::open(c)?;
            let ctx = s.ctx();
            let (train, test) = cmd::load_matrices(&ctx)?;
            let (_, b) = cmd::stage_evaluate(&ctx, &cmd::load_models(&ctx)?, &train, &test)?;
            s.commit(&b)
        }
        Command::Explain(w) => {
            let s = Session::open(&w.common)?;
            let ctx = s.ctx();
            let (_, test) = cmd::load_matrices(&ctx)?;
            let models = cmd::load_models(&ctx)?;
            let (cohort, split) = cmd::load_split_cohort(&ctx, w.from_cohort.as_deref())?;
            s.commit(&cmd::stage_explain(&ctx, &models, &test, &cohort, &split)?)
        }
        Command::Ablate(c) => {
            let s = Session::open(c)?;
            let ctx = s.ctx();
            let ablation = &s.cfg.pipeline.ablation;
            if !ablation.enabled {
                eprintln!("ablate: disabled in the config, nothing to do");
                return write_manifest(&s.out, &s.info);
            }
            let (train, test) = cmd::load_matrices(&ctx)?;
            let params = cmd::load_best_params(&ctx, &ablation.model)?;
            s.commit(&cmd::stage_ablate(&ctx, &params, &train, &test)?)
        }
        Command::Run(w) => {
            let s = Session::open(&w.common)?;
            let ctx = s.ctx();
            let cohort = match &w.from_cohort {
                Some(p) => cmd::load_cohort(&ctx, Some(p))?,
                None => cmd::config_cohort(&ctx)?,
            };
            s.commit(&cmd::run_all(&ctx, &cohort)?)
        }
    }
}

/// Parse `args`, run the command and return the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
