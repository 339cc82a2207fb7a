//! Command-line front end: single scenarios, the three canned sweeps, and the
//! conflict matrix.

pub mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use intersection_consensus::report::{cycles_csv, scenario_json, sweep_csv, sweep_json};
use intersection_consensus::scenario::ScenarioConfig;
use intersection_consensus::suites::{run_lane_sweep, run_quorum_comparison, run_tvision_sweep};
use intersection_consensus::{run_replicates, IntersectionGeometry};
use serde_json::{json, Value};

use crate::config::{apply, parse_config, SettingError};

#[derive(Debug, Parser)]
#[command(name = "intersection-sim", version, about = "Simulate vehicles negotiating an unsignalised intersection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario, `--runs` times with consecutive seeds.
    Run(ScenarioArgs),
    /// Majority against full quorum over CAV ratios 0.0 to 1.0.
    QuorumCompare(ScenarioArgs),
    /// Vision thresholds of 50, 300 and 500 ms.
    TvisionSweep(ScenarioArgs),
    /// 2, 4, 6 and 8 lanes against CAV ratios 0.0 to 1.0.
    LaneSweep(ScenarioArgs),
    /// Movement conflict matrix of one geometry.
    ExportConflicts(ConflictArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Default, Args)]
pub struct OutputArgs {
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Defaults to the `--out` extension, else csv.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

impl OutputArgs {
    fn format(&self) -> Format {
        match (self.format, self.out.as_deref().and_then(Path::extension)) {
            (Some(f), _) => f,
            (None, Some(ext)) if ext == "json" => Format::Json,
            _ => Format::Csv,
        }
    }
}

#[derive(Debug, Default, Args)]
pub struct ScenarioArgs {
    /// Configuration file of `key = value` lines; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Total lanes: 2, 4, 6 or 8.
    #[arg(long)]
    pub lanes: Option<u32>,
    #[arg(long)]
    pub vehicles: Option<u32>,
    #[arg(long)]
    pub cav_ratio: Option<f64>,
    #[arg(long)]
    pub t_vision_ms: Option<f64>,
    #[arg(long)]
    pub hv_delay_ms: Option<f64>,
    /// `majority` or `full`.
    #[arg(long)]
    pub quorum: Option<String>,
    /// `uniform:MIN,MAX`, `fixed:D` (ms) or `lognormal:MU,SIGMA`.
    #[arg(long)]
    pub delay: Option<String>,
    #[arg(long)]
    pub loss: Option<f64>,
    #[arg(long)]
    pub jitter_ms: Option<f64>,
    /// Time a vehicle spends on each protocol message.
    #[arg(long)]
    pub handling_ms: Option<f64>,
    #[arg(long)]
    pub passage_ms: Option<f64>,
    #[arg(long)]
    pub min_batch: Option<u64>,
    #[arg(long)]
    pub max_batch: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub runs: Option<u32>,
    #[command(flatten)]
    pub output: OutputArgs,
}

impl ScenarioArgs {
    fn overrides(&self) -> Vec<(&'static str, Value)> {
        let mut out = Vec::new();
        let mut put = |k: &'static str, v: Option<Value>| {
            if let Some(v) = v {
                out.push((k, v));
            }
        };
        put("lanes", self.lanes.map(Value::from));
        put("vehicles", self.vehicles.map(Value::from));
        put("cav_ratio", self.cav_ratio.map(Value::from));
        put("t_vision_ms", self.t_vision_ms.map(Value::from));
        put("hv_delay_ms", self.hv_delay_ms.map(Value::from));
        put("quorum", self.quorum.clone().map(Value::from));
        put("delay", self.delay.clone().map(Value::from));
        put("loss", self.loss.map(Value::from));
        put("jitter_ms", self.jitter_ms.map(Value::from));
        put("handling_ms", self.handling_ms.map(Value::from));
        put("passage_ms", self.passage_ms.map(Value::from));
        put("min_batch", self.min_batch.map(Value::from));
        put("max_batch", self.max_batch.map(Value::from));
        put("seed", self.seed.map(Value::from));
        put("runs", self.runs.map(Value::from));
        out
    }

    /// Defaults, then the configuration file, then flags.
    pub fn resolve(&self) -> Result<ScenarioConfig, SettingError> {
        let mut cfg = ScenarioConfig::default();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| SettingError::new("config", format!("{}: {e}", path.display())))?;
            for (k, v) in parse_config(&text)? {
                apply(&mut cfg, &k, &v)?;
            }
        }
        for (k, v) in self.overrides() {
            apply(&mut cfg, k, &v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct ConflictArgs {
    #[arg(long, default_value_t = 2)]
    pub lanes: u32,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug)]
enum Failure {
    Setting(SettingError),
    Io(std::io::Error),
}

impl From<SettingError> for Failure {
    fn from(e: SettingError) -> Self {
        Failure::Setting(e)
    }
}

fn conflicts_json(g: &IntersectionGeometry) -> String {
    let dirs = g.all_directions();
    let matrix: Vec<Vec<u8>> = dirs
        .iter()
        .map(|a| {
            dirs.iter()
                .map(|b| u8::from(g.conflicts(a, b).expect("directions come from the geometry")))
                .collect()
        })
        .collect();
    let doc = json!({
        "lanes": g.total_lanes(),
        "directions": dirs.iter().map(|d| d.to_string()).collect::<Vec<_>>(),
        "conflicts": matrix,
    });
    let mut s = serde_json::to_string_pretty(&doc).expect("plain data serializes");
    s.push('\n');
    s
}

fn render(command: &Command) -> Result<(String, &OutputArgs), Failure> {
    let sweep = |args: &ScenarioArgs, rows: Vec<_>| match args.output.format() {
        Format::Csv => sweep_csv(&rows),
        Format::Json => sweep_json(&rows),
    };
    Ok(match command {
        Command::Run(args) => {
            let cfg = args.resolve()?;
            let results = run_replicates(&cfg).map_err(SettingError::from)?;
            let text = match args.output.format() {
                Format::Csv => cycles_csv(&results),
                Format::Json => scenario_json(&cfg, &results),
            };
            (text, &args.output)
        }
        Command::QuorumCompare(args) => {
            let rows = run_quorum_comparison(&args.resolve()?).map_err(SettingError::from)?;
            (sweep(args, rows), &args.output)
        }
        Command::TvisionSweep(args) => {
            let rows = run_tvision_sweep(&args.resolve()?).map_err(SettingError::from)?;
            (sweep(args, rows), &args.output)
        }
        Command::LaneSweep(args) => {
            let rows = run_lane_sweep(&args.resolve()?).map_err(SettingError::from)?;
            (sweep(args, rows), &args.output)
        }
        Command::ExportConflicts(args) => {
            let g = IntersectionGeometry::new(args.lanes)
                .map_err(|_| SettingError::new("lanes", format!("{} is not one of 2, 4, 6, 8", args.lanes)))?;
            let text = match args.output.format() {
                Format::Csv => g.conflict_matrix_csv(),
                Format::Json => conflicts_json(&g),
            };
            (text, &args.output)
        }
    })
}

fn execute(command: &Command, stdout: &mut dyn Write) -> Result<(), Failure> {
    let (text, output) = render(command)?;
    match &output.out {
        Some(path) => std::fs::write(path, text).map_err(Failure::Io),
        None => stdout.write_all(text.as_bytes()).map_err(Failure::Io),
    }
}

/// Parse `args` (program name first) and run. Returns the process exit
/// code: 0 on success, 2 for usage and configuration errors, 1 when output
/// cannot be written.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(rendered.as_bytes())
            } else {
                stdout.write_all(rendered.as_bytes())
            };
            return code;
        }
    };
    match execute(&cli.command, stdout) {
        Ok(()) => 0,
        Err(Failure::Setting(e)) => {
            let _ = writeln!(stderr, "error: {e}");
            2
        }
        Err(Failure::Io(e)) => {
            let _ = writeln!(stderr, "error: cannot write output: {e}");
            1
        }
    }
}
