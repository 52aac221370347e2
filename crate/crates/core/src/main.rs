use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use spectral_rl::agents::AgentKind;
use spectral_rl::config::ExperimentConfig;
use spectral_rl::env::EnvKind;
use spectral_rl::experiment::{run_experiments, OUT_ENV_VAR};
use spectral_rl::harness::{read_run_dir, read_sidecar, seed_stem, Metric};
use spectral_rl::plot::write_plots;
use spectral_rl::verify::{run_suite, Suite};
use spectral_rl::{Error, Result};

#[derive(Parser)]
#[command(name = "spectral-rl", version, about = "Spectral reward decomposition experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one agent on one environment for one or more seeds.
    Run {
        #[arg(long)]
        env: EnvKind,
        #[arg(long)]
        agent: AgentKind,
        #[command(flatten)]
        common: Common,
    },
    /// Train every agent/environment combination, several seeds in parallel.
    Sweep {
        #[arg(long, value_delimiter = ',', required = true)]
        envs: Vec<EnvKind>,
        #[arg(long, value_delimiter = ',', required = true)]
        agents: Vec<AgentKind>,
        /// Maximum concurrent runs.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Run an oracle suite; exits non-zero if any property fails.
    Verify {
        #[arg(value_enum)]
        suite: Suite,
    },
    /// Draw return curves and TD-error charts from run directories.
    Plot {
        #[arg(required = true)]
        run_dirs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Frames per averaging window.
        #[arg(long, default_value_t = 10_000)]
        window: u64,
        #[arg(long, value_enum, default_value_t = MetricArg::Unexponentiated)]
        metric: MetricArg,
    },
}

#[derive(Args)]
struct Common {
    /// Number of seeds, run as seeds 0..N.
    #[arg(long)]
    seeds: Option<u64>,
    #[arg(long)]
    frames: Option<u64>,
    #[arg(long, default_value = "desk")]
    preset: String,
    /// JSON object overriding preset fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output root (defaults to $SPECTRAL_RL_OUT, then ./runs).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Return,
    Unexponentiated,
}

impl Common {
    fn config(&self, agent: AgentKind, env: EnvKind) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::preset(&self.preset, agent, env)?;
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            cfg = cfg.overlay(&serde_json::from_str(&text)?)?;
        }
        // command-line selections win over the overlay
        let mut patch = serde_json::json!({"agent": agent, "env": env});
        if let Some(frames) = self.frames {
            patch["frames"] = frames.into();
        }
        if let Some(n) = self.seeds {
            patch["seeds"] = (0..n).collect::<Vec<u64>>().into();
        }
        cfg.overlay(&patch)
    }

    fn out_root(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV_VAR).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("runs"))
    }
}

fn report_dirs(dirs: &[PathBuf]) {
    for d in dirs {
        println!("wrote {}", d.display());
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { env, agent, common } => {
            let cfg = common.config(agent, env)?;
            report_dirs(&run_experiments(&[cfg], &common.out_root(), 1)?);
        }
        Command::Sweep {
            envs,
            agents,
            jobs,
            common,
        } => {
            let mut configs = Vec::new();
            for &env in &envs {
                for &agent in &agents {
                    configs.push(common.config(agent, env)?);
                }
            }
            report_dirs(&run_experiments(&configs, &common.out_root(), jobs)?);
        }
        Command::Verify { suite } => {
            let report = run_suite(suite);
            for line in &report {
                println!("{line}");
            }
            let failed = report.iter().filter(|l| !l.passed).count();
            println!("{} checks, {} failed", report.len(), failed);
            return Ok(failed == 0);
        }
        Command::Plot {
            run_dirs,
            out,
            window,
            metric,
        } => {
            let metric = match metric {
                MetricArg::Return => Metric::Return,
                MetricArg::Unexponentiated => Metric::Unexponentiated,
            };
            let mut records = Vec::new();
            let mut buckets = None;
            for dir in &run_dirs {
                let runs = read_run_dir(dir)?;
                // the score cap fixes the bucket partition; take it from a sidecar
                let sidecar = read_sidecar(&seed_stem(dir, runs[0].seed).with_extension("json")).ok();
                if let Some(cap) = sidecar.and_then(|s| s.config.get("score_cap").and_then(|v| v.as_u64())) {
                    buckets = Some(buckets.unwrap_or(0).max(cap as usize));
                }
                records.extend(runs);
            }
            for path in write_plots(&records, Path::new(&out), window, metric, buckets)? {
                println!("wrote {}", path.display());
            }
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
