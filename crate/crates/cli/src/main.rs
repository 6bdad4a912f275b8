//! `lwave`: design filters, run schemes, and analyse the recordings.
//!
//! Exit codes: 0 done or passed, 1 usage or input error, 2 verification
//! failure, 3 resource limit.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{CmdResult, Failure, SearchArgs};
use config::{AnalysisSection, ExperimentConfig, InitKind, ModeArg, Precision};
use lwave::FilterBand;

#[derive(Parser)]
#[command(name = "lwave", version, about = "Linear wave structures on periodic lattices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Differentiating filter coefficients, spectrum and error curve.
    Design(DesignArgs),
    /// Run a scheme and record its history.
    Simulate(SimulateArgs),
    /// Space-time spectrum heatmap with ridge or cone peaks.
    Afc(AfcArgs),
    /// Check group velocities, cones and the virtual-system residual.
    Verify(VerifyArgs),
    /// Search multiplier rules (four dimensions by default).
    Search4d(Search4dArgs),
}

#[derive(Args)]
struct DesignArgs {
    /// Filter order n (number of taps per side).
    #[arg(long = "n", alias = "order")]
    n: usize,
    #[arg(long, default_value = "zeromax")]
    band: FilterBand,
    /// Grid size for the spectrum and error curves.
    #[arg(long, default_value_t = 1024)]
    grid: usize,
    #[arg(long, default_value = "lwave-out")]
    out: PathBuf,
}

#[derive(Args, Default)]
struct AnalysisArgs {
    /// Peak threshold as a fraction of each column's maximum.
    #[arg(long)]
    threshold: Option<f64>,
    /// Cone radius in bins around each apex.
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    velocity_tolerance: Option<f64>,
    #[arg(long)]
    cone_tolerance: Option<f64>,
    /// Fail when the virtual-system residual exceeds this.
    #[arg(long)]
    pde_tolerance: Option<f64>,
}

impl AnalysisArgs {
    fn apply(&self, a: &mut AnalysisSection) {
        if let Some(v) = self.threshold {
            a.threshold = v;
        }
        if self.radius.is_some() {
            a.radius = self.radius;
        }
        if let Some(v) = self.velocity_tolerance {
            a.velocity_tolerance = v;
        }
        if let Some(v) = self.cone_tolerance {
            a.cone_tolerance = v;
        }
        if self.pde_tolerance.is_some() {
            a.pde_tolerance = self.pde_tolerance;
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// TOML experiment file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    band: Option<FilterBand>,
    #[arg(long)]
    order: Option<usize>,
    /// Lattice extent N.
    #[arg(long)]
    grid: Option<usize>,
    /// Frames K to record, including the initial one.
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long, value_enum)]
    init: Option<InitKind>,
    /// Harmonic frequency per axis, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    freq: Option<Vec<i64>>,
    #[arg(long)]
    phase: Option<f64>,
    /// Gaussian envelope width in sites for harmonic initial conditions.
    #[arg(long)]
    width: Option<f64>,
    /// Noise band half-width in bins.
    #[arg(long)]
    delta: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long, value_enum)]
    precision: Option<Precision>,
    /// Memory cap in MiB.
    #[arg(long)]
    budget_mib: Option<u64>,
    #[command(flatten)]
    analysis: AnalysisArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl SimulateArgs {
    fn config(&self) -> Result<ExperimentConfig, Failure> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::load(p).map_err(Failure::Usage)?,
            None => ExperimentConfig::default(),
        };
        let s = &mut c.scheme;
        macro_rules! set {
            ($dst:expr, $src:expr) => {
                if let Some(v) = $src.clone() {
                    $dst = v;
                }
            };
        }
        set!(s.dim, self.dim);
        set!(s.band, self.band);
        set!(s.order, self.order);
        set!(s.mode, self.mode);
        set!(s.precision, self.precision);
        set!(s.budget_mib, self.budget_mib);
        if self.grid.is_some() {
            s.grid = self.grid;
        }
        if self.steps.is_some() {
            s.steps = self.steps;
        }
        set!(c.init.kind, self.init);
        set!(c.init.phase, self.phase);
        if self.freq.is_some() {
            c.init.freq = self.freq.clone();
        }
        if self.width.is_some() {
            c.init.width = self.width;
        }
        if self.delta.is_some() {
            c.init.delta = self.delta;
        }
        set!(c.seed, self.seed);
        if self.out.is_some() {
            c.out = self.out.clone();
        }
        self.analysis.apply(&mut c.analysis);
        Ok(c)
    }
}

#[derive(Args)]
struct AfcArgs {
    /// A history (.lwav) or spectra (.lwsp) file.
    input: PathBuf,
    /// Band used for ridge search and cone apexes; defaults to the file's.
    #[arg(long)]
    band: Option<FilterBand>,
    #[command(flatten)]
    analysis: AnalysisArgs,
    #[arg(long, default_value = "lwave-out")]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    input: PathBuf,
    #[arg(long)]
    band: Option<FilterBand>,
    #[command(flatten)]
    analysis: AnalysisArgs,
    /// Also write the report to DIR/verify.txt.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Search4dArgs {
    /// Searches both bands when omitted.
    #[arg(long)]
    band: Option<FilterBand>,
    /// Lattice dimension; 2 and 3 cross-check against the published rules.
    #[arg(long, default_value_t = 4)]
    dim: usize,
    /// Filter order of the confirming run.
    #[arg(long, default_value_t = 2)]
    order: usize,
    #[arg(long, default_value_t = 16)]
    check_grid: usize,
    #[arg(long, default_value_t = 32)]
    check_frames: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn dispatch(cmd: Command) -> CmdResult {
    match cmd {
        Command::Design(a) => commands::design(a.n, a.band, a.grid, &a.out),
        Command::Simulate(a) => {
            let c = a.config()?;
            let out = c.out.clone().unwrap_or_else(|| PathBuf::from("lwave-out"));
            commands::simulate(&c, &out)
        }
        Command::Afc(a) => {
            let mut an = AnalysisSection::default();
            a.analysis.apply(&mut an);
            commands::afc(&a.input, &a.out, a.band, &an)
        }
        Command::Verify(a) => {
            let mut an = AnalysisSection::default();
            a.analysis.apply(&mut an);
            commands::verify(&a.input, a.band, &an, a.out.as_deref())
        }
        Command::Search4d(a) => commands::search(&SearchArgs {
            dim: a.dim,
            bands: a.band.map_or_else(|| FilterBand::ALL.to_vec(), |b| vec![b]),
            order: a.order,
            check_grid: a.check_grid,
            check_frames: a.check_frames,
            out: a.out,
        }),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.exit_code())
        }
    }
}
