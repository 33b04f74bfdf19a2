use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{error, info};
use mnl_bandit::harness::{load_config, run_experiment, run_verify, write_summary, RunKind, VerifyOptions};
use mnl_bandit::instances;
use mnl_bandit::{Error, Instance};

const EXIT_RUN_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;

/// Simulate and benchmark low-switching MNL bandit policies.
#[derive(Debug, Parser)]
#[command(name = "mnl-bandit", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every (policy, horizon, seed) combination of a config.
    Simulate(ConfigArg),
    /// Like `simulate`, but also crosses the config's `n_grid` and fits scaling laws.
    Sweep(ConfigArg),
    /// Run the built-in self-check suites.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Use the wrong tie-break in the optimizer (negative control).
        #[arg(long, hide = true)]
        corrupt_tie_break: bool,
    },
    /// Instance utilities.
    #[command(subcommand)]
    Instance(InstanceCommand),
}

#[derive(Debug, Args)]
struct ConfigArg {
    #[arg(long)]
    config: PathBuf,
}

#[derive(Debug, Subcommand)]
enum InstanceCommand {
    /// Generate an instance and write it as JSON.
    Gen(GenArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Family {
    Uniform,
    LbBase,
    LbPerturbed,
}

#[derive(Debug, Args)]
struct GenArgs {
    family: Family,
    #[arg(long)]
    n: usize,
    /// Capacity for `uniform`.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// One-based index of the lifted item for `lb-perturbed`.
    #[arg(long)]
    k_item: Option<usize>,
    #[arg(long)]
    t1: Option<u64>,
    /// Capacity for the lower-bound families (default 1).
    #[arg(long)]
    capacity: Option<usize>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate(arg) => experiment(&arg.config, RunKind::Simulate),
        Command::Sweep(arg) => experiment(&arg.config, RunKind::Sweep),
        Command::Verify {
            seed,
            corrupt_tie_break,
        } => verify(seed, corrupt_tie_break),
        Command::Instance(InstanceCommand::Gen(args)) => generate(&args),
    }
}

fn is_config_error(err: &Error) -> bool {
    matches!(err, Error::Config { .. } | Error::Parse { .. })
}

fn experiment(path: &PathBuf, kind: RunKind) -> ExitCode {
    let config = match load_config(path) {
        Ok(c) => c,
        Err(e) => {
            error!("{e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let result = match run_experiment(&config, kind) {
        Ok(r) => r,
        Err(e) => {
            error!("{e}");
            return ExitCode::from(if is_config_error(&e) { EXIT_CONFIG } else { EXIT_RUN_FAILURE });
        }
    };
    match write_summary(&result) {
        Ok(Some(path)) => info!("summary written to {}", path.display()),
        Ok(None) => println!("{}", result.to_json()),
        Err(e) => {
            error!("{e}");
            return ExitCode::from(EXIT_RUN_FAILURE);
        }
    }
    for group in &result.groups {
        println!(
            "{:<14} n={:<4} T={:<9} regret {:>10.2} ± {:<8.2} asst {:>7.2} item {:>8.2}",
            group.policy.to_string(),
            group.n_items,
            group.horizon,
            group.regret.mean,
            group.regret.std,
            group.asst_switches.mean,
            group.item_switches.mean
        );
    }
    for fit in &result.fits {
        match (&fit.fit, &fit.error) {
            (Some(f), _) => println!(
                "fit {} n={} {}: best {:?} (r² {:.4})",
                fit.policy, fit.n_items, fit.metric, f.best.model, f.best.r_squared
            ),
            (None, Some(e)) => println!("fit {} n={} {}: {e}", fit.policy, fit.n_items, fit.metric),
            (None, None) => {}
        }
    }
    if result.failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        for f in &result.failures {
            error!("run {} n={} T={:?} seed={} failed: {}", f.policy, f.n_items, f.horizons, f.seed, f.error);
        }
        ExitCode::from(EXIT_RUN_FAILURE)
    }
}

fn verify(seed: u64, corrupt_tie_break: bool) -> ExitCode {
    let report = run_verify(&VerifyOptions {
        seed,
        corrupt_tie_break,
    });
    for suite in &report.suites {
        println!(
            "{:<20} {} {}/{} passed ({:.2}s) {}",
            suite.name,
            if suite.passed() { "PASS" } else { "FAIL" },
            suite.checks - suite.failures,
            suite.checks,
            suite.seconds,
            suite.detail
        );
    }
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_RUN_FAILURE)
    }
}

fn require<T>(value: Option<T>, flag: &str, family: &str) -> Result<T, String> {
    value.ok_or_else(|| format!("--{flag} is required for {family}"))
}

fn build_instance(args: &GenArgs) -> Result<Instance, String> {
    let built = match args.family {
        Family::Uniform => instances::gen_uniform_random(args.n, require(args.k, "k", "uniform")?, args.seed),
        Family::LbBase => instances::gen_lowerbound_base_with_capacity(args.n, args.capacity.unwrap_or(1)),
        Family::LbPerturbed => instances::gen_lowerbound_perturbed_with_capacity(
            args.n,
            require(args.k_item, "k-item", "lb-perturbed")?,
            require(args.t1, "t1", "lb-perturbed")?,
            args.capacity.unwrap_or(1),
        ),
    };
    built.map_err(|e| e.to_string())
}

fn generate(args: &GenArgs) -> ExitCode {
    let inst = match build_instance(args) {
        Ok(i) => i,
        Err(e) => {
            error!("{e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match &args.out {
        Some(path) => {
            if let Err(e) = instances::save(&inst, path) {
                error!("{e}");
                return ExitCode::from(EXIT_RUN_FAILURE);
            }
            info!("wrote {} (sha256 {})", path.display(), instances::instance_hash(&inst));
        }
        None => println!("{}", instances::to_json(&inst)),
    }
    ExitCode::SUCCESS
}
