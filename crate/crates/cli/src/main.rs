use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hyperwalk_cli::selftest::Kernel;
use hyperwalk_cli::{execute, run_selftest, Config, RunError, EXIT_CONTRACT, EXIT_OK, EXIT_USAGE};

#[derive(Parser)]
#[command(name = "hyperwalk", version, about = "Random walks on the hyperbolic plane: experiments and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// `key = value` file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Registry root for run directories.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    /// Worker threads (default: available cores).
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    steps: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    /// Extra `key=value` settings.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Geometry and oracle invariants.
    Selftest {
        /// Run against a deliberately broken kernel (`busemann-sign`).
        #[arg(long, hide = true)]
        inject: Option<String>,
    },
    /// Poisson-Delaunay walk over an intensity grid.
    Pd {
        #[command(flatten)]
        common: Common,
        /// Comma-separated intensities in [0.05, 1].
        #[arg(long)]
        lambda: Option<String>,
    },
    /// Right-angled walk over a step-length grid.
    Ra {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        r: Option<String>,
    },
    /// Walk on the {p,q} tessellation over a q grid.
    Pq {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        p: Option<String>,
        #[arg(long)]
        q: Option<String>,
    },
    /// Lyapunov exponent of a random matrix product.
    Lyap {
        #[command(flatten)]
        common: Common,
        /// Matrix law: one `a b c d weight` line per matrix.
        #[arg(long)]
        spec: Option<PathBuf>,
    },
    /// Correlation dimension of the exit law.
    Dim {
        #[command(flatten)]
        common: Common,
        /// `pq` or `ra`.
        #[arg(long)]
        walk: Option<String>,
        #[arg(long)]
        p: Option<String>,
        #[arg(long)]
        q: Option<String>,
        #[arg(long)]
        r: Option<String>,
    },
    /// Probability that a point at distance r is a Delaunay neighbor of o.
    Edgeprob {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        lambda: Option<String>,
        #[arg(long)]
        r: Option<String>,
    },
}

fn build_config(common: &Common, flags: &[(&str, &Option<String>)]) -> Result<Config, String> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            Config::parse(&text).map_err(|e| e.to_string())?
        }
        None => Config::default(),
    };
    for kv in &common.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| format!("--set expects key=value, got {kv:?}"))?;
        cfg.set(k.trim(), v.trim());
    }
    let seed = common.seed.map(|s| s.to_string());
    let all = [("seed", &seed), ("steps", &common.steps), ("trials", &common.trials)];
    for (k, v) in all.iter().chain(flags) {
        if let Some(v) = v {
            cfg.set(k, v);
        }
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, common, flags): (&str, Common, Vec<(&str, Option<String>)>) = match cli.command {
        Command::Selftest { inject } => {
            let kernel = match inject.as_deref() {
                None => Kernel::default(),
                Some(name) => match Kernel::injected(name) {
                    Some(k) => k,
                    None => {
                        eprintln!("error: unknown defect {name:?}");
                        return ExitCode::from(EXIT_USAGE as u8);
                    }
                },
            };
            return match run_selftest(&kernel, std::io::stdout()) {
                Ok(true) => ExitCode::from(EXIT_OK as u8),
                Ok(false) => ExitCode::from(EXIT_CONTRACT as u8),
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_CONTRACT as u8)
                }
            };
        }
        Command::Pd { common, lambda } => ("pd", common, vec![("lambda", lambda)]),
        Command::Ra { common, r } => ("ra", common, vec![("r", r)]),
        Command::Pq { common, p, q } => ("pq", common, vec![("p", p), ("q", q)]),
        Command::Lyap { common, spec } => ("lyap", common, vec![("spec", spec.map(|p| p.display().to_string()))]),
        Command::Dim { common, walk, p, q, r } => ("dim", common, vec![("walk", walk), ("p", p), ("q", q), ("r", r)]),
        Command::Edgeprob { common, lambda, r } => ("edgeprob", common, vec![("lambda", lambda), ("r", r)]),
    };
    let flag_refs: Vec<(&str, &Option<String>)> = flags.iter().map(|(k, v)| (*k, v)).collect();
    let cfg = match build_config(&common, &flag_refs) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE as u8);
        }
    };
    let workers = common.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    match execute(name, cfg, &common.out, workers) {
        Ok(s) => {
            println!("{} {}", if s.passed { "pass" } else { "FAIL" }, s.dir.display());
            ExitCode::from(if s.passed { EXIT_OK } else { EXIT_CONTRACT } as u8)
        }
        Err(RunError::Usage(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE as u8)
        }
        Err(RunError::Io(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONTRACT as u8)
        }
    }
}
