//! Batch runner: executes a scenario and writes frames, a metrics table and a
//! determinism digest.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use amoeba_core::engine::{self, Observer, StepStats, World};
use amoeba_core::metrics::{self, DEFAULT_GAP_TOLERANCE};
use amoeba_core::pgm;
use amoeba_core::render::render_frame;
use amoeba_core::scenario::{self, ScenarioError, ScenarioSpec};
use clap::{Args, Parser, Subcommand};
use thiserror::Error;

/// Trailing window used for the oscillation_strength column.
pub const OSCILLATION_WINDOW: usize = 256;

pub const METRICS_HEADER: &str =
    "step,moved,blocked,moved_fraction,trail_mass,centroid_x,centroid_y,components,oscillation_strength";

#[derive(Debug, Parser)]
#[command(
    name = "amoeba",
    version,
    about = "Run lattice amoeboid-collective scenarios"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Run a scenario file or a built-in preset.
    Run(RunArgs),
    /// List the built-in presets, optionally writing them out as scenario files.
    Presets {
        #[arg(long, value_name = "DIR")]
        export: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Scenario file. A preset name is accepted when no such file exists.
    #[arg(
        long,
        value_name = "PATH",
        conflicts_with = "preset",
        required_unless_present = "preset"
    )]
    pub scenario: Option<PathBuf>,
    #[arg(long, value_name = "NAME")]
    pub preset: Option<String>,
    #[arg(long)]
    pub steps: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
    #[arg(long, value_name = "N")]
    pub frame_every: Option<u64>,
    #[arg(long, value_name = "N")]
    pub metrics_every: Option<u64>,
    /// Replace a scenario setting, e.g. `pID=0.001`. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Render high concentration dark.
    #[arg(long)]
    pub invert: bool,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("no scenario file or preset named {0:?}")]
    MissingScenario(String),
    #[error("invalid scenario: {0}")]
    Scenario(#[from] ScenarioError),
    #[error("invalid override {0:?}: expected KEY=VALUE")]
    OverrideSyntax(String),
    #[error("output directory {path}: {source}")]
    Output {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Run(#[from] engine::RunError),
}

/// What a finished run produced.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub scenario: ScenarioSpec,
    pub digest: String,
    pub frames: Vec<PathBuf>,
    pub stats: Vec<StepStats>,
}

pub fn load_scenario(args: &RunArgs) -> Result<ScenarioSpec, CliError> {
    let mut spec = match (&args.scenario, &args.preset) {
        (Some(path), _) if path.is_file() => scenario::parse_scenario_file(path)?,
        (Some(path), _) => {
            let name = path.to_string_lossy();
            scenario::preset(&name).ok_or_else(|| CliError::MissingScenario(name.into_owned()))?
        }
        (None, Some(name)) => {
            scenario::preset(name).ok_or_else(|| CliError::MissingScenario(name.clone()))?
        }
        (None, None) => return Err(CliError::MissingScenario(String::new())),
    };
    for o in &args.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| CliError::OverrideSyntax(o.clone()))?;
        spec.apply_override(k.trim(), v.trim())?;
    }
    if let Some(s) = args.steps {
        spec.steps = s;
    }
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    if let Some(n) = args.frame_every {
        spec.frame_every = n;
    }
    if let Some(n) = args.metrics_every {
        spec.metrics_every = n;
    }
    Ok(spec)
}

type ObserverResult = Result<(), Box<dyn std::error::Error + Send + Sync>>;

/// Writes `frame_%08d.pgm` every `every` steps and once before the first.
pub struct FrameWriter {
    dir: PathBuf,
    every: u64,
    invert: bool,
    pub written: Vec<PathBuf>,
}

impl FrameWriter {
    pub fn new(dir: &Path, every: u64, invert: bool) -> Self {
        Self {
            dir: dir.to_path_buf(),
            every,
            invert,
            written: Vec::new(),
        }
    }

    fn write(&mut self, world: &World) -> ObserverResult {
        let path = self
            .dir
            .join(format!("frame_{:08}.pgm", world.step_index()));
        fs::write(
            &path,
            pgm::encode(&render_frame(world.trail(), self.invert)),
        )?;
        self.written.push(path);
        Ok(())
    }
}

impl Observer for FrameWriter {
    fn cadence(&self) -> u64 {
        self.every
    }

    fn on_start(&mut self, world: &World) -> ObserverResult {
        if self.every > 0 {
            self.write(world)?;
        }
        Ok(())
    }

    fn on_step(&mut self, world: &World, _stats: &StepStats) -> ObserverResult {
        self.write(world)
    }
}

/// Appends a CSV row every `every` steps. Watches every step so the
/// oscillation column sees the full moved-fraction series.
pub struct MetricsWriter<W: Write> {
    out: W,
    every: u64,
    moved_fraction: Vec<f64>,
}

impl<W: Write> MetricsWriter<W> {
    pub fn new(mut out: W, every: u64) -> std::io::Result<Self> {
        writeln!(out, "{METRICS_HEADER}")?;
        Ok(Self {
            out,
            every,
            moved_fraction: Vec::new(),
        })
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> Observer for MetricsWriter<W> {
    fn cadence(&self) -> u64 {
        if self.every == 0 {
            0
        } else {
            1
        }
    }

    fn on_step(&mut self, world: &World, stats: &StepStats) -> ObserverResult {
        self.moved_fraction.push(stats.moved_fraction());
        // rows are keyed by completed steps, like frame file names
        let step = world.step_index();
        if !step.is_multiple_of(self.every) {
            return Ok(());
        }
        let components =
            metrics::connected_components(world.occupancy(), DEFAULT_GAP_TOLERANCE).component_count;
        let window = self.moved_fraction.len().min(OSCILLATION_WINDOW);
        let osc = metrics::oscillation_strength(&self.moved_fraction, window)
            .map(|v| v.to_string())
            .unwrap_or_default();
        let (cx, cy) = match stats.centroid {
            Some([x, y]) => (x.to_string(), y.to_string()),
            None => (String::new(), String::new()),
        };
        writeln!(
            self.out,
            "{step},{},{},{},{},{cx},{cy},{components},{osc}",
            stats.moved,
            stats.blocked,
            stats.moved_fraction(),
            stats.total_trail_mass,
        )?;
        Ok(())
    }
}

fn output_error(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Output {
        path: path.to_path_buf(),
        source,
    }
}

/// Runs a fully resolved scenario into `out`.
pub fn execute(spec: ScenarioSpec, out: &Path, invert: bool) -> Result<RunSummary, CliError> {
    fs::create_dir_all(out).map_err(output_error(out))?;
    let world = spec.init_world()?;

    let csv_path = out.join("metrics.csv");
    let csv = File::create(&csv_path).map_err(output_error(&csv_path))?;
    let mut metrics = MetricsWriter::new(BufWriter::new(csv), spec.metrics_every)
        .map_err(output_error(&csv_path))?;
    let mut frames = FrameWriter::new(out, spec.frame_every, invert);

    let result = engine::run(world, spec.steps, &mut [&mut metrics, &mut frames])?;
    metrics
        .into_inner()
        .flush()
        .map_err(output_error(&csv_path))?;

    let digest = engine::digest(&result.world, &result.stats);
    let digest_path = out.join("digest.txt");
    fs::write(&digest_path, format!("{digest}\n")).map_err(output_error(&digest_path))?;
    Ok(RunSummary {
        scenario: spec,
        digest,
        frames: frames.written,
        stats: result.stats,
    })
}

fn export_presets(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(output_error(dir))?;
    for spec in scenario::builtin_presets() {
        let path = dir.join(format!("{}.scenario", spec.name));
        fs::write(&path, spec.to_text()).map_err(output_error(&path))?;
    }
    Ok(())
}

pub fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        CliCommand::Run(args) => {
            let spec = load_scenario(&args)?;
            let summary = execute(spec, &args.out, args.invert)?;
            println!("{}", summary.digest);
        }
        CliCommand::Presets { export } => {
            for name in scenario::PRESET_NAMES {
                println!("{name}");
            }
            if let Some(dir) = export {
                export_presets(&dir)?;
            }
        }
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs them.
pub fn run_command<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
