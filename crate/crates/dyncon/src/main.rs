use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dyncon::commands::{self, Context, FIELD_FILE};
use dyncon::config::{RunConfig, THREADS_ENV};
use dyncon::report::deviation_table;
use dyncon::CliError;

/// Dynamic principal-agent contract solver.
#[derive(Parser)]
#[command(name = "dyncon", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the principal's problem and write the value-field artifact.
    Solve(Common),
    /// Simulate contract paths from a solved field.
    Simulate(WithField),
    /// Check incentive compatibility of a solved field.
    Verify(WithField),
    /// Run the packaged load-control example end to end.
    Example {
        /// Output directory (overrides the environment).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        n_paths: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the environment and the config).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct WithField {
    #[command(flatten)]
    common: Common,
    /// Value-field artifact; defaults to `field.bin` in the output directory.
    #[arg(long)]
    field: Option<PathBuf>,
    #[arg(long)]
    n_paths: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

fn configure_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .parse()
            .map_err(|_| CliError::Config(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    Ok(())
}

fn context(c: &Common) -> Result<(Context, PathBuf), CliError> {
    let ctx = Context::from_file(&c.config)?;
    let out = c.out.clone().unwrap_or_else(|| ctx.config.output_dir());
    Ok((ctx, out))
}

fn with_field(w: &WithField, sim: bool) -> Result<(Context, PathBuf, PathBuf), CliError> {
    let (mut ctx, out) = context(&w.common)?;
    if sim {
        if let Some(n) = w.n_paths {
            ctx.config.simulation.n_paths = n;
        }
        if let Some(s) = w.seed {
            ctx.config.simulation.base_seed = s;
        }
    } else {
        if let Some(n) = w.n_paths {
            ctx.config.verify.n_paths = n;
        }
        if let Some(s) = w.seed {
            ctx.config.verify.base_seed = s;
        }
    }
    let field = w.field.clone().unwrap_or_else(|| out.join(FIELD_FILE));
    Ok((ctx, out, field))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Solve(c) => {
            let (ctx, out) = context(&c)?;
            let r = commands::cmd_solve(&ctx, &out)?;
            println!("{}", r.report.value);
            if let Some(gap) = r.report.principal_gap {
                eprintln!("convergence gap {gap}");
            }
            eprintln!("wrote {}", r.artifact_path.display());
        }
        Command::Simulate(w) => {
            let (ctx, out, field) = with_field(&w, true)?;
            let artifact = commands::load_artifact(&ctx, &field)?;
            let r = commands::cmd_simulate(&ctx, &artifact, &out)?;
            let s = &r.report.summary;
            println!("principal payoff {} +- {}", s.principal.mean, s.principal.se);
            println!("agent payoff     {} +- {}", s.agent.mean, s.agent.se);
            if let Some(b) = &r.report.band {
                println!("band occupancy   min {} mean {}", b.min_share, b.mean_share);
            }
        }
        Command::Verify(w) => {
            let (ctx, out, field) = with_field(&w, false)?;
            let artifact = commands::load_artifact(&ctx, &field)?;
            let r = commands::cmd_verify(&ctx, &artifact, &out)?;
            print!("{}", deviation_table(&r));
            if !r.passed() {
                return Err(CliError::IcViolation);
            }
        }
        Command::Example { out, n_paths, seed } => {
            let mut cfg = RunConfig::load_control_example();
            if let Some(n) = n_paths {
                cfg.simulation.n_paths = n;
            }
            if let Some(s) = seed {
                cfg.simulation.base_seed = s;
            }
            let out = out.unwrap_or_else(|| {
                let d = cfg.output_dir();
                if d == Path::new("out") {
                    PathBuf::from("out/example")
                } else {
                    d
                }
            });
            let r = commands::cmd_example(cfg, &out)?;
            println!("{}", serde_json::to_string_pretty(&r.summary).expect("summary serializes"));
            if !r.verify.passed() {
                return Err(CliError::IcViolation);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
