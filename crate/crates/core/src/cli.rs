//! The `kglab` command line.
//!
//! Exit status is the machine-readable result: 0 when every check passes,
//! 1 when a check fails or a run breaks down, 2 on usage or configuration
//! errors. Numbers go to JSON and CSV files; standard output is a summary.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::ConfigFile;
use crate::dyadic::partition_check;
use crate::evolution::Status;
use crate::exec::Exec;
use crate::experiments::{
    dispersion_decay, lifespan_scan, nonlinear_decay, simulate, DecaySettings, DispersionSettings, LifespanSettings,
    RunRecord,
};
use crate::phases::{audit_phase_bounds, BoundId, Sampling};
use crate::pseudoproduct::{bound_audit, AuditSettings, Lemma, SymbolTables};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "kglab", version, about = "Klein-Gordon pseudospectral laboratory")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
struct Common {
    /// JSON configuration; absent keys take the subcommand's defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `experiment.output_dir`.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Keep every loop on the calling thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BoundArg {
    Badphase,
    #[value(name = "3phase")]
    ThreePhase,
    Bdd1,
    All,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate the seed data and write a run directory.
    Simulate(Common),
    /// Linear decay fits and the kernel constant sweep.
    Dispersion(Common),
    /// Threshold-crossing times over the ε list.
    Lifespan(Common),
    /// Nonlinear decay fits and Z_α tracking of the profile.
    Znorm(Common),
    /// Phase lower bounds and finiteness audits.
    PhaseAudit {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "all")]
        bound: BoundArg,
        /// Uniform samples for the finiteness audits.
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
    },
    /// Operator-norm ratio sweeps for the multiplier lemmas.
    MultiplierAudit {
        #[command(flatten)]
        common: Common,
        /// Lemma id, or `all`.
        #[arg(long, default_value = "all")]
        lemma: String,
    },
    /// Partition of unity and projection checks.
    LpCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
    },
}

impl Command {
    fn tag(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Dispersion(_) => "dispersion",
            Command::Lifespan(_) => "lifespan",
            Command::Znorm(_) => "znorm",
            Command::PhaseAudit { .. } => "phase-audit",
            Command::MultiplierAudit { .. } => "multiplier-audit",
            Command::LpCheck { .. } => "lp-check",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Simulate(c) | Command::Dispersion(c) | Command::Lifespan(c) | Command::Znorm(c) => c,
            Command::PhaseAudit { common, .. } | Command::MultiplierAudit { common, .. } | Command::LpCheck { common, .. } => {
                common
            }
        }
    }
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Run(crate::Error),
}

impl From<crate::Error> for Failure {
    fn from(e: crate::Error) -> Self {
        Failure::Run(e)
    }
}

/// Resolve the configuration for a subcommand.
pub fn resolve_config(tag: &str, path: Option<&Path>) -> crate::Result<ConfigFile> {
    let base = ConfigFile::defaults_for(tag)?;
    let Some(path) = path else {
        return Ok(base);
    };
    let text = std::fs::read_to_string(path)?;
    let doc: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| crate::Error::Config { field: "json".into(), reason: e.to_string() })?;
    if let Some(t) = doc.pointer("/experiment/tag").and_then(|t| t.as_str()) {
        if t != tag {
            return Err(crate::Error::Config {
                field: "experiment.tag".into(),
                reason: format!("`{t}` does not match the subcommand `{tag}`"),
            });
        }
    }
    ConfigFile::from_value(doc, base)
}

/// Parse `argv` (program name first), run the subcommand and return the exit
/// status.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli.command) {
        Ok(true) => EXIT_PASS,
        Ok(false) => EXIT_FAIL,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            EXIT_FAIL
        }
    }
}

fn run(cmd: &Command) -> Result<bool, Failure> {
    let common = cmd.common();
    let cfg = resolve_config(cmd.tag(), common.config.as_deref()).map_err(|e| Failure::Usage(e.to_string()))?;
    for w in cfg.warnings() {
        eprintln!("{w}");
    }
    let exec = if common.sequential { Exec::Sequential } else { Exec::default() };
    let root = common.output.clone().unwrap_or_else(|| PathBuf::from(&cfg.experiment.output_dir));
    let mut rec = RunRecord::new(&cfg);
    match cmd {
        Command::Simulate(_) => {
            let (traj, dir) = simulate(&cfg, &root)?;
            println!("status: {:?}", traj.status());
            println!("wrote {}", dir.display());
            return Ok(!matches!(traj.status(), Status::AliasingAbort { .. }));
        }
        Command::Dispersion(_) => dispersion_decay(&DispersionSettings::from_config(&cfg), exec)?.record_into(&mut rec)?,
        Command::Znorm(_) => nonlinear_decay(&DecaySettings::from_config(&cfg), exec)?.record_into(&mut rec)?,
        Command::Lifespan(_) => {
            if cfg.evolution.nonlinearity != "dtu_sq_dxu" {
                return Err(Failure::Usage("lifespan needs evolution.F = \"dtu_sq_dxu\"".into()));
            }
            lifespan_scan(&LifespanSettings::from_config(&cfg), exec)?.record_into(&mut rec)?
        }
        Command::PhaseAudit { bound, samples, .. } => {
            let uniform = Sampling::Uniform { count: *samples, range: 1024.0, seed: cfg.experiment.seed };
            let jobs: Vec<(BoundId, Sampling)> = match bound {
                BoundArg::Badphase => vec![(BoundId::BadPhase, Sampling::dyadic_default())],
                BoundArg::ThreePhase => vec![(BoundId::ThreePhase, uniform)],
                BoundArg::Bdd1 => vec![(BoundId::Bdd1, uniform)],
                BoundArg::All => vec![
                    (BoundId::BadPhase, Sampling::dyadic_default()),
                    (BoundId::ThreePhase, uniform.clone()),
                    (BoundId::Bdd1, uniform),
                ],
            };
            for (b, s) in jobs {
                let r = audit_phase_bounds(b, &s, exec)?;
                rec.push_check(format!("{b:?} violations"), r.passed(), r.violations as f64, "0");
                rec.push_detail(&r)?;
            }
        }
        Command::MultiplierAudit { lemma, .. } => {
            let lemmas = if lemma == "all" {
                Lemma::ALL.to_vec()
            } else {
                vec![Lemma::parse(lemma).map_err(|e| Failure::Usage(e.to_string()))?]
            };
            let tables = Arc::new(SymbolTables::u_squared().merged(&SymbolTables::dtu_sq_dxu()));
            for l in lemmas {
                let a = bound_audit(l, &AuditSettings::for_lemma(l), &tables, exec)?;
                let growth = a.top_quartile_max / a.bottom_quartile_max;
                rec.push_check(format!("{} top/bottom quartile", l.id()), a.no_growth(), growth, "<= 4");
                rec.push_detail(&a)?;
            }
        }
        Command::LpCheck { samples, .. } => {
            let r = partition_check(*samples, exec)?;
            rec.push_check("partition of unity and projections", r.passed(), r.max_projection_error, "1e-12 / 1e-10");
            rec.push_detail(&r)?;
        }
    }
    for c in rec.checks() {
        println!("{} {}: {:.6e} ({})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.value, c.tolerance);
    }
    let dir = rec.write(&root)?;
    println!("wrote {}", dir.display());
    Ok(rec.passed())
}
