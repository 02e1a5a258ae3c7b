use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use greenval_core::io::{emit_report, load_case_study, CaseStudyDocument, Format};
use greenval_core::scenario::{EvaluationMode, RoiBase, WaterVolume};
use greenval_core::sensitivity::{Distribution, Override, ParameterSpec, ParameterTarget};

use crate::engine::{self, Operation, RunParams};
use crate::server::{self, Registry};

#[derive(Debug, Parser)]
#[command(name = "greenval", version, about = "Cost-benefit evaluation of green-infrastructure scenarios")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// KPI reports for both scenarios of a case study
    Evaluate(RunArgs),
    /// Baseline vs alternative with a recommendation
    Compare(RunArgs),
    /// Comparison grid over one or more parameters
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// `name=a,b,c` or `name=low..high/steps`; repeat for a cross product
        #[arg(long = "param", value_parser = parse_param)]
        params: Vec<ParameterSpec>,
    },
    /// Cumulative NPV forecast with a 95% band under water-volume uncertainty
    Forecast {
        #[command(flatten)]
        run: RunArgs,
        /// Forecast one scenario only
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long)]
        samples: Option<u32>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        distribution: Option<DistributionArg>,
        /// `min,nominal,max` in m3/yr, replacing the scenario's bounds
        #[arg(long, value_parser = parse_water_range)]
        water_range: Option<WaterVolume>,
    },
    /// Load and validate datasets
    Validate {
        #[arg(required = true)]
        datasets: Vec<String>,
    },
    /// Run the HTTP API
    Serve {
        #[arg(long, env = "GREENVAL_PORT", default_value_t = 8080)]
        port: u16,
        /// Extra dataset files to serve next to the bundled ones
        #[arg(long = "dataset")]
        datasets: Vec<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Dataset file, or a bundled id (sicily, emilia-romagna)
    pub dataset: String,
    #[arg(long)]
    pub discount_rate: Option<f64>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Years for horizon-dcf (defaults to the lifespan)
    #[arg(long)]
    pub horizon: Option<u32>,
    #[arg(long, value_enum, default_value_t = RoiBaseArg::TotalCosts)]
    pub roi_base: RoiBaseArg,
    #[arg(long)]
    pub variant: Option<String>,
    /// `target=value`, e.g. `water=6000` or `item:ordinary_maintenance=3000`
    #[arg(long = "set", value_parser = parse_override)]
    pub overrides: Vec<Override>,
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    pub format: FormatArg,
    /// Write the report here instead of stdout
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Annualized,
    HorizonDcf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RoiBaseArg {
    TotalCosts,
    Capex,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DistributionArg {
    Uniform,
    Triangular,
}

fn parse_override(s: &str) -> Result<Override, String> {
    let (target, value) = s.split_once('=').ok_or("expected target=value")?;
    Ok(Override {
        target: target.parse::<ParameterTarget>().map_err(|e| e.to_string())?,
        value: value.trim().parse().map_err(|_| format!("not a number: {value:?}"))?,
    })
}

fn parse_param(s: &str) -> Result<ParameterSpec, String> {
    let (target, rest) = s.split_once('=').ok_or("expected name=a,b,c or name=low..high/steps")?;
    let target = target.parse::<ParameterTarget>().map_err(|e| e.to_string())?;
    let num = |x: &str| x.trim().parse::<f64>().map_err(|_| format!("not a number: {x:?}"));
    if let Some((range, steps)) = rest.split_once('/') {
        let (low, high) = range.split_once("..").ok_or("expected low..high/steps")?;
        let steps = steps.trim().parse::<u32>().map_err(|_| format!("bad step count {steps:?}"))?;
        if steps == 0 {
            return Err("steps must be >= 1".into());
        }
        return Ok(ParameterSpec::range(target, num(low)?, num(high)?, steps));
    }
    let values = rest.split(',').map(num).collect::<Result<Vec<_>, _>>()?;
    Ok(ParameterSpec::list(target, values))
}

fn parse_water_range(s: &str) -> Result<WaterVolume, String> {
    let parts = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| format!("not a number: {x:?}")))
        .collect::<Result<Vec<_>, _>>()?;
    let w = match parts[..] {
        [min, nominal, max] => WaterVolume { min, nominal, max },
        [min, max] => WaterVolume { min, nominal: 0.5 * (min + max), max },
        _ => return Err("expected min,nominal,max".into()),
    };
    if !w.is_valid() {
        return Err("need 0 <= min <= nominal <= max".into());
    }
    Ok(w)
}

impl RunArgs {
    fn params(&self) -> RunParams {
        RunParams {
            variant: self.variant.clone(),
            discount_rate: self.discount_rate,
            mode: self.mode.map(|m| match m {
                ModeArg::Annualized => EvaluationMode::Annualized,
                ModeArg::HorizonDcf => EvaluationMode::HorizonDcf,
            }),
            roi_base: match self.roi_base {
                RoiBaseArg::TotalCosts => RoiBase::TotalCosts,
                RoiBaseArg::Capex => RoiBase::Capex,
            },
            horizon: self.horizon,
            overrides: self.overrides.clone(),
            ..RunParams::default()
        }
    }

    fn format(&self) -> Format {
        match self.format {
            FormatArg::Json => Format::Json,
            FormatArg::Csv => Format::Csv,
        }
    }
}

/// A dataset path, falling back to the bundled datasets by name.
pub fn load_dataset(name: &str) -> Result<CaseStudyDocument> {
    let path = Path::new(name);
    if path.is_file() {
        let bytes = std::fs::read(path).with_context(|| format!("reading {name}"))?;
        return load_case_study(&bytes).with_context(|| format!("loading {name}"));
    }
    match engine::bundled_by_name(name) {
        Some(doc) => Ok(doc?),
        None => bail!("{name}: no such file or bundled dataset"),
    }
}

fn write_output(bytes: &[u8], output: Option<&Path>) -> Result<()> {
    match output {
        Some(p) => std::fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
            Ok(())
        }
    }
}

fn run_op(op: Operation, run: &RunArgs, params: RunParams) -> Result<()> {
    let doc = load_dataset(&run.dataset)?;
    let report = engine::run(op, &doc, &params)?;
    write_output(&emit_report(&report, run.format()), run.output.as_deref())
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Evaluate(run) => run_op(Operation::Evaluate, &run, run.params()),
        Command::Compare(run) => run_op(Operation::Compare, &run, run.params()),
        Command::Sweep { run, params } => {
            let p = RunParams { parameters: params, ..run.params() };
            run_op(Operation::Sweep, &run, p)
        }
        Command::Forecast {
            run,
            scenario,
            samples,
            seed,
            distribution,
            water_range,
        } => {
            let p = RunParams {
                scenario,
                samples,
                seed,
                distribution: distribution.map(|d| match d {
                    DistributionArg::Uniform => Distribution::Uniform,
                    DistributionArg::Triangular => Distribution::Triangular,
                }),
                water_range,
                ..run.params()
            };
            run_op(Operation::Forecast, &run, p)
        }
        Command::Validate { datasets } => {
            for name in &datasets {
                let doc = load_dataset(name)?;
                let items: usize = doc.scenarios.iter().map(|s| s.items.len()).sum();
                println!("{name}: ok ({}, {items} items, sha256 {})", doc.id(), doc.dataset_hash());
            }
            Ok(())
        }
        Command::Serve { port, datasets } => {
            let mut registry = Registry::bundled();
            for path in &datasets {
                let name = path.to_string_lossy();
                registry.insert(load_dataset(&name)?);
            }
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(server::serve(registry, port))
                .map_err(|e| anyhow!("serving on port {port}: {e}"))
        }
    }
}

/// Parses arguments and runs: 0 on success, 1 on data or validation errors, 2 on usage errors.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
