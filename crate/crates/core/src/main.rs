use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use shrinkcomb::airframe::Phase;
use shrinkcomb::harness::{self, ExperimentConfig, TrialBlocks};
use shrinkcomb::seed::trial_seed;

#[derive(Parser)]
#[command(name = "shrinkcomb", version, about = "Shrinkage-regularized direct-estimate combining: Monte-Carlo SER experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep and write CSV/SVG results.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = "SHRINKCOMB_THREADS")]
        threads: Option<usize>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Dump every iterative-fit trajectory to trace.csv.
        #[arg(long)]
        trace: bool,
        /// Fill the wallclock_s column (makes output run-dependent).
        #[arg(long)]
        record_wallclock: bool,
        /// Write trial 0's pilot and data blocks per sweep point as raw f64 LE.
        #[arg(long)]
        dump_blocks: bool,
    },
    /// Run the reduced property suites.
    Validate {
        #[arg(long, default_value_t = 10)]
        seeds: u64,
    },
    /// Render a sweep CSV as an SVG plot.
    Plot {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run {
            config,
            trials,
            seed,
            threads,
            out,
            trace,
            record_wallclock,
            dump_blocks,
        } => {
            let mut cfg = ExperimentConfig::load(&config)
                .with_context(|| format!("loading {}", config.display()))?;
            if let Some(t) = trials {
                cfg.trials = t;
            }
            if let Some(s) = seed {
                cfg.scenario.master_seed = s;
            }
            cfg.options.keep_trace = trace;
            cfg.validate()?;
            let threads = threads.unwrap_or_else(|| {
                std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
            });
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;

            let result = harness::run_sweep(&cfg, threads, record_wallclock)?;
            harness::write_csv(&result.records, &out.join("sweep.csv"))?;
            harness::write_per_ue(&result.per_ue, &out.join("per_ue.csv"))?;
            harness::write_diagnostics(&result.diagnostics, &out.join("diagnostics.csv"))?;
            std::fs::write(out.join("sweep.svg"), harness::render_svg(&result.records))?;
            if trace {
                harness::write_trace(&result.traces, &out.join("trace.csv"))?;
            }
            if dump_blocks {
                for &v in &cfg.sweep.values {
                    let sc = cfg.point_scenario(v)?;
                    let blocks = TrialBlocks::draw(&sc, trial_seed(sc.master_seed, 0, 0))?;
                    for blk in [&blocks.pilot, &blocks.data] {
                        let tag = if blk.phase == Phase::Pilot { "pilot" } else { "data" };
                        let f = std::fs::File::create(out.join(format!("{tag}_{v}.bin")))?;
                        blk.write_le(std::io::BufWriter::new(f))?;
                    }
                }
            }
            for r in &result.records {
                println!("{:<14} {:>8} ser={:.6e} trials={}", r.method.as_str(), r.sweep_value, r.ser, r.trials);
            }
            Ok(())
        }
        Command::Validate { seeds } => {
            let checks = shrinkcomb::validate::run_all(seeds)?;
            let mut failed = 0;
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                failed += usize::from(!c.passed);
            }
            if failed > 0 {
                bail!("{failed} validation check(s) failed");
            }
            Ok(())
        }
        Command::Plot { csv, out } => {
            harness::emit_svg_plot(&csv, &out)?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({ "status": "error", "message": format!("{e:#}") });
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}
