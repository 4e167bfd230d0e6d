use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use readout_bench::benchmark::run_benchmark;
use readout_bench::compare::compare_reports;
use readout_bench::generate::run_generate;
use readout_bench::probe::{probe_values, run_probe};
use readout_bench::report::Table;
use readout_bench::sweeps::{sweep_dataset, sweep_latent};
use readout_bench::{BenchError, ExperimentConfig, Method, Result};

#[derive(Parser, Debug)]
#[command(name = "readout-bench", version, about = "Qubit readout classification benchmarks")]
struct Cli {
    #[command(flatten)]
    common: Common,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Measurement windows in ns, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    tm: Option<Vec<f64>>,

    /// Methods to run: gmm, ffnn, pretrann (comma separated).
    #[arg(long, global = true, value_delimiter = ',')]
    methods: Option<Vec<String>>,

    #[arg(long, global = true)]
    repeats: Option<usize>,

    #[arg(long, global = true)]
    shots_per_state: Option<usize>,

    /// Number of prepared states (2 or 3).
    #[arg(long, global = true)]
    states: Option<usize>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Simulate new shots for every repeat.
    #[arg(long, global = true)]
    fresh_data: bool,

    /// Do not write raw shots.
    #[arg(long, global = true)]
    no_raw: bool,

    /// Save every trained model.
    #[arg(long, global = true)]
    save_models: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate shots and write raw, trajectory and I/Q datasets.
    Generate,
    /// Train and evaluate every method at every window.
    Benchmark,
    /// PreTraNN accuracy and loss per latent fraction.
    SweepLatent {
        #[arg(long, value_delimiter = ',')]
        fractions: Option<Vec<f64>>,
    },
    /// PreTraNN accuracy and training time per training-set size.
    SweepDataset {
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
    },
    /// Reconstructions while sweeping one latent component.
    LatentProbe {
        #[arg(long)]
        model: PathBuf,
        /// Trajectory dataset (QRD-TRAJ).
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0)]
        shot: usize,
        #[arg(long, default_value_t = 0)]
        component: usize,
        /// Explicit probe values, comma separated.
        #[arg(long, value_delimiter = ',', conflicts_with = "range", allow_negative_numbers = true)]
        values: Option<Vec<f64>>,
        /// LO,HI,COUNT evenly spaced probe values.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        range: Option<Vec<f64>>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Percentage-point differences between two methods.
    Compare {
        /// Benchmark summary files.
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        #[arg(long, default_value = "pretrann")]
        a: String,
        #[arg(long, default_value = "gmm")]
        b: String,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Print the header of a dataset or model file and verify its checksum.
    Inspect { file: PathBuf },
}

fn load_config(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.master_seed = s;
    }
    if let Some(d) = &c.out_dir {
        cfg.out_dir = d.clone();
    }
    if let Some(tm) = &c.tm {
        cfg.tm_list_ns = tm.clone();
    }
    if let Some(m) = &c.methods {
        cfg.methods = m.iter().map(|s| s.parse()).collect::<Result<Vec<Method>>>()?;
    }
    if let Some(r) = c.repeats {
        cfg.repeats = r;
    }
    if let Some(n) = c.shots_per_state {
        cfg.shots_per_state = n;
    }
    if let Some(n) = c.states {
        cfg.states = (0..n).collect();
    }
    cfg.fresh_data |= c.fresh_data;
    cfg.save_models |= c.save_models;
    if c.no_raw {
        cfg.save_raw = false;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_out(table: &Table, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| BenchError::Io {
            path: parent.to_path_buf(),
            source: e,
        })?;
    }
    table.write(path)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| BenchError::Usage(format!("cannot set thread count: {e}")))?;
    }
    match cli.command {
        Command::Inspect { file } => {
            print!("{}", readout_bench::formats::inspect(&file)?);
        }
        Command::Compare { reports, a, b, output } => {
            let named = reports
                .iter()
                .map(|p| Ok((p.display().to_string(), Table::read(p)?)))
                .collect::<Result<Vec<_>>>()?;
            let t = compare_reports(&named, a.parse()?, b.parse()?)?;
            for r in &t.rows {
                println!("{}", r.join("\t"));
            }
            if let Some(o) = output {
                write_out(&t, &o)?;
            }
        }
        Command::LatentProbe {
            model,
            data,
            shot,
            component,
            values,
            range,
            output,
        } => {
            let values = match (values, range) {
                (Some(v), _) => v,
                (None, Some(r)) => {
                    if r.len() != 3 || r[2] < 0.0 || r[2].fract() != 0.0 {
                        return Err(BenchError::Usage("--range takes LO,HI,COUNT with a whole COUNT".into()));
                    }
                    probe_values(r[0], r[1], r[2] as usize)
                }
                (None, None) => probe_values(-1.0, 1.0, 5),
            };
            let t = run_probe(&model, &data, shot, component, &values)?;
            let out = output.unwrap_or_else(|| PathBuf::from("latent_probe.csv"));
            write_out(&t, &out)?;
        }
        Command::Generate => {
            let cfg = load_config(&cli.common)?;
            for p in run_generate(&cfg)? {
                println!("wrote {}", p.display());
            }
        }
        Command::Benchmark => {
            let cfg = load_config(&cli.common)?;
            let out = run_benchmark(&cfg)?;
            for p in out.write(&cfg.out_dir)? {
                println!("wrote {}", p.display());
            }
            let failed = out.cells.iter().filter(|c| c.outcome.is_err()).count();
            if failed == out.cells.len() && out.numeric_failures() > 0 {
                return Err(qubit_readout::ReadoutError::NonFiniteLoss { epoch: 0, batch: 0 }.into());
            }
        }
        Command::SweepLatent { fractions } => {
            let cfg = load_config(&cli.common)?;
            let fr = fractions.unwrap_or_else(|| cfg.latent_fractions.clone());
            for p in sweep_latent(&cfg, &fr)?.write(&cfg.out_dir, "sweep_latent")? {
                println!("wrote {}", p.display());
            }
        }
        Command::SweepDataset { sizes } => {
            let cfg = load_config(&cli.common)?;
            let sizes = sizes.unwrap_or_else(|| cfg.dataset_sizes.clone());
            for p in sweep_dataset(&cfg, &sizes)?.write(&cfg.out_dir, "sweep_dataset")? {
                println!("wrote {}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
