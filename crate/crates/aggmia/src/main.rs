use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aggmia::plots::{self, PlotKind};
use aggmia::runner::{self, RunOptions};
use aggmia::spec::{ExperimentSpec, GeneratorSpec};
use aggmia::{io, report, results, Error};
use aggmia_core::seed;
use aggmia_core::synthgen::{self, PanelKind};
use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "aggmia", version, about = "Membership inference experiments on aggregate location time-series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Commuter,
    Cab,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a panel file, or every generated panel of a spec.
    Gen {
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "commuter")]
        kind: Kind,
        #[arg(long, default_value_t = 1000)]
        users: usize,
        /// ROIs including the null ROI.
        #[arg(long, default_value_t = 201)]
        rois: usize,
        #[arg(long, default_value_t = 504)]
        slots: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Output file, or output directory with --spec.
        #[arg(long)]
        out: PathBuf,
    },
    /// Execute an experiment spec.
    Run {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Falls back to AGGMIA_WORKERS, then to the number of cores.
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        clamp_nonneg: bool,
    },
    /// Draw SVG figures from a result CSV.
    Plot {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// cdf, box or line; all figures with data when omitted.
        #[arg(long)]
        kind: Option<String>,
    },
    /// Print summary tables of a result CSV.
    Report {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Gen { spec: Some(spec), seed, out, .. } => {
            let spec = ExperimentSpec::load(&spec)?;
            let root = seed.unwrap_or(spec.seed);
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            for (i, p) in spec.panels.iter().enumerate() {
                if let Some(g) = &p.generator {
                    let panel = synthgen::generate_panel(&g.config(seed::derive(root, "panel", i as u64)))?;
                    let path = out.join(format!("{}.panel", p.name));
                    io::write_panel(&panel, &path)?;
                    println!("{}", path.display());
                }
            }
        }
        Command::Gen { spec: None, kind, users, rois, slots, seed, out } => {
            let kind = match kind {
                Kind::Commuter => PanelKind::Commuter,
                Kind::Cab => PanelKind::Cab,
            };
            let g = GeneratorSpec { kind, users, rois, slots, regularity: None, active_slot_fraction: None, popularity_exponent: None };
            let panel = synthgen::generate_panel(&g.config(seed.unwrap_or(0)))?;
            io::write_panel(&panel, &out)?;
        }
        Command::Run { spec: spec_path, seed, out, workers, clamp_nonneg } => {
            let spec = ExperimentSpec::load(&spec_path)?;
            let base = spec_path.parent().unwrap_or(Path::new("."));
            let out = out.or_else(|| spec.output.clone()).unwrap_or_else(|| PathBuf::from("out"));
            let opts = RunOptions { seed, workers: runner::resolve_workers(workers), clamp_nonneg };
            let output = runner::run(&spec, &opts, base)?;
            runner::write_outputs(&output, &out)?;
            write_plots(&output.rows, &out.join("plots"))?;
            println!(
                "{} rows, {} failed cells, results in {}",
                output.rows.len(),
                output.errors.len(),
                out.display()
            );
            if !output.errors.is_empty() {
                eprintln!("see {}", out.join("errors.log").display());
                return Ok(ExitCode::from(2));
            }
        }
        Command::Plot { results: path, out, kind } => {
            let rows = results::read_csv(&path)?;
            match kind {
                Some(k) => {
                    let k: PlotKind = k.parse().map_err(anyhow::Error::msg)?;
                    for p in plots::emit_plots(&rows, &[k], &out)? {
                        println!("{}", p.display());
                    }
                }
                None => write_plots(&rows, &out)?,
            }
        }
        Command::Report { results: path, out } => {
            let text = report::summarize(&results::read_csv(&path)?);
            match out {
                Some(o) => std::fs::write(&o, &text).with_context(|| format!("writing {}", o.display()))?,
                None => print!("{text}"),
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

/// Emits every figure the rows have data for.
fn write_plots(rows: &[results::ResultRow], dir: &Path) -> anyhow::Result<()> {
    for k in PlotKind::ALL {
        match plots::emit_plots(rows, &[k], dir) {
            Ok(_) | Err(Error::EmptySelection(_)) => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(())
}
