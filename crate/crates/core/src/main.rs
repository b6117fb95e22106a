use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sdlab::config::ExperimentConfig;
use sdlab::experiment::{self, RunResult};

#[derive(Parser, Debug)]
#[command(name = "sdlab", version, about = "Superdiffusion experiments on billiards and spreading chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true, env = "SDLAB_SEED")]
    seed: Option<u64>,
    /// Worker threads; overrides the config.
    #[arg(long, global = true, env = "SDLAB_THREADS")]
    threads: Option<usize>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Induced orbits or chain trajectories to returns.csv.
    Simulate,
    /// Tail of the return time, tail.csv and tail_summary.csv.
    Tail,
    /// Binned transition kernel, kernel.csv.
    Transition,
    /// Normalised sums, clt.csv and clt_summary.csv.
    Clt,
    /// Rescaled paths, path.csv and diagnostics.
    Ip,
    /// Diffusion constants, constants.csv.
    Constants,
    /// Run the acceptance suite; exit code 4 on any failure.
    Verify,
}

fn load(cli: &Cli) -> RunResult<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.threads {
        cfg.threads = Some(t);
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> RunResult<bool> {
    let cfg = load(cli)?;
    if let Some(t) = cfg.threads {
        if t == 0 {
            return Err(sdlab::config::ConfigError::Field {
                field: "threads".into(),
                message: "must be positive".into(),
            }
            .into());
        }
        // fails only if a pool already exists, which cannot happen here
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    match cli.command {
        Command::Simulate => {
            let p = experiment::cmd_simulate(&cfg)?;
            println!("wrote {}", p.display());
        }
        Command::Tail => {
            let e = experiment::cmd_tail(&cfg)?;
            println!(
                "plateau {:.6} (95% CI {:.6}..{:.6}) from {} samples",
                e.plateau, e.ci.0, e.ci.1, e.total
            );
        }
        Command::Transition => {
            let e = experiment::cmd_transition(&cfg)?;
            println!("{} kernel cells", e.cells.len());
        }
        Command::Clt => {
            let r = experiment::cmd_clt(&cfg)?;
            println!(
                "KS {:.4}, mean {:.4}, var {:.4}, {} replicas dropped",
                r.ks, r.moments.mean, r.moments.var, r.failures
            );
        }
        Command::Ip => {
            let p = experiment::cmd_ip(&cfg)?;
            println!(
                "Var W(t) slope {:.4}, Var W(1) {:.4}, max |increment correlation| {:.4}",
                p.var_fit.slope,
                p.var_at_one(),
                p.max_increment_corr()
            );
        }
        Command::Constants => {
            for d in experiment::cmd_constants(&cfg)? {
                println!("{}: sigma2 {:.6} ({})", d.model, d.sigma2_induced, d.provenance);
            }
        }
        Command::Verify => {
            let results = sdlab::acceptance::run_all(cfg.seed, |r| println!("{r}"));
            let failed = results.iter().filter(|r| !r.passed).count();
            println!("{} of {} criteria passed", results.len() - failed, results.len());
            return Ok(failed == 0);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(4),
        Err(e) => {
            eprintln!("sdlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
