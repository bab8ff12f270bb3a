use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use sspsim::dtree::{induce, parse_tree, render};
use sspsim::harness::{
    metrics_rows, parse_config, plot_data, sweep, write_metrics_csv, Axis, HarnessError,
};
use sspsim::model::export_snapshot;
use sspsim::routing::{dataset_from_log, read_log_csv, write_log_csv};
use sspsim::simkernel::{run_scenario, ScenarioConfig};

#[derive(Parser)]
#[command(
    name = "sspsim",
    version,
    about = "Super-peer overlay routing simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and print its metrics CSV.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Metrics CSV path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write every group's query log as one CSV.
        #[arg(long)]
        log_out: Option<PathBuf>,
        /// Write each group's index as `<ssp>.txt` into this directory.
        #[arg(long)]
        tree_dir: Option<PathBuf>,
        /// Write the final topology snapshot.
        #[arg(long)]
        snapshot_out: Option<PathBuf>,
    },
    /// Run a scenario per value of one parameter.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        axis: String,
        /// Comma-separated ascending values.
        #[arg(long, value_delimiter = ',')]
        values: Vec<usize>,
        #[arg(long)]
        out: PathBuf,
        /// Two-column curve data for plotting.
        #[arg(long)]
        plot_out: Option<PathBuf>,
    },
    /// Induce a tree from a log CSV.
    Induce {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        min_rows: usize,
    },
    /// Parse a tree file and print it re-rendered; fails unless the text
    /// survives the round trip unchanged.
    RenderTree {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        if e.is_config_error() {
            Failure::Config(e.into())
        } else {
            Failure::Runtime(e.into())
        }
    }
}

fn runtime<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Runtime(e.into())
}

fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<ScenarioConfig, Failure> {
    let mut cfg = match path {
        Some(p) => {
            let text = fs::read_to_string(p)
                .with_context(|| format!("reading {}", p.display()))
                .map_err(Failure::Config)?;
            parse_config(&text)?
        }
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .with_context(|| format!("creating {}", path.display()))
        .map_err(Failure::Runtime)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate {
            config,
            seed,
            out,
            log_out,
            tree_dir,
            snapshot_out,
        } => {
            let cfg = load_config(config.as_deref(), seed)?;
            let report = run_scenario(&cfg).map_err(HarnessError::from)?;
            let rows = metrics_rows(&report)?;
            match out {
                Some(p) => write_metrics_csv(create(&p)?, &rows)?,
                None => write_metrics_csv(io::stdout().lock(), &rows)?,
            }
            if let Some(p) = log_out {
                let all: Vec<_> = report.logs.values().flatten().cloned().collect();
                write_log_csv(create(&p)?, &all, cfg.k_components).map_err(runtime)?;
            }
            if let Some(dir) = tree_dir {
                fs::create_dir_all(&dir).map_err(runtime)?;
                for (ssp, tree) in &report.trees {
                    fs::write(dir.join(format!("{ssp}.txt")), render(tree)).map_err(runtime)?;
                }
            }
            if let Some(p) = snapshot_out {
                fs::write(&p, export_snapshot(&report.final_state)).map_err(runtime)?;
            }
            if let Some(c) = report.classifier {
                eprintln!(
                    "classifier: top-1 {:.4}, hit rate {:.4} over {} held-out rows",
                    c.top1_accuracy, c.hit_rate, c.rows
                );
            }
            Ok(())
        }
        Command::Sweep {
            config,
            seed,
            axis,
            values,
            out,
            plot_out,
        } => {
            let cfg = load_config(config.as_deref(), seed)?;
            let axis: Axis = axis.parse()?;
            let rows = sweep(&cfg, axis, &values)?;
            write_metrics_csv(create(&out)?, &rows)?;
            if let Some(p) = plot_out {
                fs::write(&p, plot_data(axis, &rows)).map_err(runtime)?;
            }
            Ok(())
        }
        Command::Induce { log, out, min_rows } => {
            let file = File::open(&log)
                .with_context(|| format!("opening {}", log.display()))
                .map_err(Failure::Runtime)?;
            let (records, k) = read_log_csv(file).map_err(runtime)?;
            let data = dataset_from_log(&records, k).map_err(runtime)?;
            let tree = induce(&data, min_rows.max(1)).map_err(runtime)?;
            let mut w = create(&out)?;
            w.write_all(render(&tree).as_bytes()).map_err(runtime)?;
            w.flush().map_err(runtime)?;
            Ok(())
        }
        Command::RenderTree { input } => {
            let text = fs::read_to_string(&input)
                .with_context(|| format!("reading {}", input.display()))
                .map_err(Failure::Runtime)?;
            let tree = parse_tree(&text, None).map_err(runtime)?;
            let rendered = render(&tree);
            print!("{rendered}");
            if rendered != text {
                return Err(Failure::Runtime(anyhow::anyhow!(
                    "{} does not survive the round trip unchanged",
                    input.display()
                )));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
