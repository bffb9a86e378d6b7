use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ma_chanest::harness::{
    coherence_report, simulate, snr_map, sweep, write_aggregate_csv, write_sweep_csv, Axis, ExperimentConfig, SetupSpec,
};
use ma_chanest::metrics::error_report;
use ma_chanest::{Error, SetupKind};

#[derive(Parser)]
#[command(name = "ma-chanest", version, about = "Movable-antenna channel estimation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mutual coherence column of a measurement setup
    Coherence {
        #[command(flatten)]
        common: Common,
        /// 1-based reference column
        #[arg(long, default_value_t = 1)]
        n_ref: usize,
        /// Plans to average over for random setups
        #[arg(long, default_value_t = 1)]
        coherence_trials: usize,
    },
    /// Run one trial and print its error report as JSON
    Estimate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        trial: usize,
    },
    /// Monte Carlo sweep over M, N or SNR
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_axis)]
        axis: Axis,
        /// Comma-separated axis values
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// Per-value aggregate CSV (defaults to <out>.aggregate.csv when --out is set)
        #[arg(long)]
        aggregate_out: Option<PathBuf>,
    },
    /// SNR over Tx positions with Rx fixed at the perfect-CSI optimum
    SnrMap {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        trial: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Setup {
    Upa,
    Edge,
    Cross,
    Random,
    Walk,
}

impl From<Setup> for SetupKind {
    fn from(s: Setup) -> Self {
        match s {
            Setup::Upa => SetupKind::UpaShape,
            Setup::Edge => SetupKind::EdgeOfRegion,
            Setup::Cross => SetupKind::CrossShape,
            Setup::Random => SetupKind::RandomDistribution,
            Setup::Walk => SetupKind::RandomWalk,
        }
    }
}

fn parse_axis(s: &str) -> Result<Axis, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Args)]
struct Common {
    /// Side length of the square Tx/Rx regions, in wavelengths
    #[arg(long)]
    region: Option<f64>,
    /// Angles per dimension of the dictionary
    #[arg(long)]
    grid_n: Option<usize>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    snr_db: Option<f64>,
    /// OMP stopping threshold on the relative residual
    #[arg(long)]
    epsilon0: Option<f64>,
    #[arg(long)]
    k_max: Option<usize>,
    /// Tikhonov term for the least-squares refit
    #[arg(long)]
    ridge: Option<f64>,
    #[arg(long, value_enum, default_value = "random")]
    setup: Setup,
    #[arg(long)]
    spacing: Option<f64>,
    /// Random-walk step length
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    measurements: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sample points per axis for metrics
    #[arg(long)]
    metric_d: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Start from full-scale defaults (N=24, D=51, 1000 trials)
    #[arg(long)]
    full_scale: bool,
    /// Report wall_ms as 0 so output is byte-reproducible
    #[arg(long)]
    no_timing: bool,
    /// Draw path angles on the dictionary lattice
    #[arg(long)]
    on_grid: bool,
    /// Measure without noise
    #[arg(long)]
    noiseless: bool,
}

impl Common {
    fn config(&self) -> ExperimentConfig {
        let mut c = if self.full_scale { ExperimentConfig::default() } else { ExperimentConfig::desk() };
        let mut setup = SetupSpec::new(self.setup.into());
        setup.spacing = self.spacing;
        setup.measurements = self.measurements;
        if let Some(s) = self.step {
            setup.step = s;
        }
        c.setup = setup;
        c.master_seed = self.seed;
        c.on_grid = self.on_grid;
        c.noiseless = self.noiseless;
        c.timing = !self.no_timing;
        macro_rules! set {
            ($($field:ident => $target:ident),*) => {$(if let Some(v) = self.$field { c.$target = v; })*};
        }
        set!(region => region, grid_n => grid_n, paths => paths, snr_db => snr_db, epsilon0 => epsilon0,
             k_max => k_max, ridge => ridge, trials => trials, metric_d => metric_d);
        c
    }

    fn workers(&self) -> usize {
        self.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }

    fn output(&self) -> io::Result<Box<dyn Write>> {
        open(self.out.as_deref())
    }
}

fn open(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn aggregate_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.aggregate.csv"))
}

enum Failure {
    Config(Error),
    Runtime(Error),
    Partial(usize, usize),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_) => Failure::Config(e),
            other => Failure::Runtime(other),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Coherence { common, n_ref, coherence_trials } => {
            let rep = coherence_report(&common.config(), n_ref, coherence_trials)?;
            let mut w = common.output()?;
            match common.format {
                Format::Csv => {
                    rep.write_csv(&mut w)?;
                    writeln!(w)?;
                    rep.write_sinc_csv(&mut w)?;
                }
                Format::Json => writeln!(w, "{}", serde_json::to_string(&rep).map_err(Error::from)?)?,
            }
            w.flush()?;
        }
        Command::Estimate { common, trial } => {
            let cfg = common.config();
            let st = simulate(&cfg, 0, trial, None)?;
            let rep = error_report(&st.channel, &st.estimated, &cfg.sample_grid()?)?;
            let mut w = common.output()?;
            writeln!(w, "{}", serde_json::to_string(&rep).map_err(Error::from)?)?;
            w.flush()?;
        }
        Command::Sweep { common, axis, values, aggregate_out } => {
            let cfg = common.config();
            let res = sweep(&cfg, axis, &values, common.workers())?;
            let mut w = common.output()?;
            match common.format {
                Format::Csv => write_sweep_csv(&res.rows, &mut w)?,
                Format::Json => writeln!(w, "{}", serde_json::to_string(&res).map_err(Error::from)?)?,
            }
            w.flush()?;
            let agg_path = aggregate_out.or_else(|| common.out.as_deref().map(aggregate_path));
            match agg_path {
                Some(p) => {
                    let mut a = open(Some(&p))?;
                    write_aggregate_csv(&res.aggregates, &mut a)?;
                    a.flush()?;
                }
                None => write_aggregate_csv(&res.aggregates, io::stderr().lock())?,
            }
            let failed = res.failures();
            if failed > 0 {
                for row in res.rows.iter().filter(|r| r.record.failed()) {
                    eprintln!(
                        "trial {} at {}={} failed: {}",
                        row.record.trial,
                        row.axis,
                        row.value,
                        row.record.error.as_deref().unwrap_or_default()
                    );
                }
                return Err(Failure::Partial(failed, res.rows.len()));
            }
        }
        Command::SnrMap { common, trial } => {
            let map = snr_map(&common.config(), trial)?;
            let mut w = common.output()?;
            match common.format {
                Format::Csv => map.write_csv(&mut w)?,
                Format::Json => writeln!(w, "{}", serde_json::to_string(&map).map_err(Error::from)?)?,
            }
            w.flush()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
        Err(Failure::Partial(failed, total)) => {
            eprintln!("{failed} of {total} trials failed");
            ExitCode::from(3)
        }
    }
}
