use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;
use xdc::mosaic::{tile_sheet, Tile};
use xdc::{diagnose, pipeline, sweep, toy, CliError, RunArgs, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "xdc", version, about = "Region-controlled guided diffusion compositing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Paste an object (optional) and immerse it with masked guidance.
    Composite(RunArgs),
    /// Run the cross product of parameter values and tile the results.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long = "sweep-t-in", value_delimiter = ',')]
        sweep_t_in: Vec<f64>,
        #[arg(long = "sweep-n-in", value_delimiter = ',')]
        sweep_n_in: Vec<usize>,
        #[arg(long = "sweep-r", value_delimiter = ',')]
        sweep_r: Vec<f64>,
    },
    /// Draw unguided samples from a known mixture with the exact denoiser.
    ToySample {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 16)]
        count: usize,
        #[arg(long, default_value_t = 16)]
        height: usize,
        #[arg(long, default_value_t = 16)]
        width: usize,
    },
    /// Report boundary energy with and without each aliasing mitigation.
    Diagnose {
        #[command(flatten)]
        run: RunArgs,
        /// Number of consecutive seeds, starting at --seed.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
    },
}

fn required_output(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    cfg.output.clone().ok_or_else(|| CliError::Input("no --output path given".into()))
}

fn print_json(value: &impl serde::Serialize) -> Result<(), CliError> {
    let line = serde_json::to_string(value).map_err(|e| CliError::Internal(e.to_string()))?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "{line}").map_err(|e| CliError::Internal(e.to_string()))
}

fn composite(args: &RunArgs) -> Result<(), CliError> {
    let cfg = args.resolve()?;
    let output = required_output(&cfg)?;
    let inputs = pipeline::load_inputs(&cfg)?;
    let mut observer = pipeline::observer_for(&inputs, cfg.band);
    let out = pipeline::run(&cfg, &inputs, observer.as_mut())?;
    let sidecar = pipeline::write_outputs(&cfg, &out, &output)?;
    info!(
        "wrote {} ({} evaluations, {} guided pixel-steps), record in {}",
        output.display(),
        out.evaluations,
        out.guided_pixel_steps,
        sidecar.display()
    );
    Ok(())
}

fn run_sweep(args: &RunArgs, t_in: &[f64], n_in: &[usize], r: &[f64]) -> Result<(), CliError> {
    let mut cfg = args.resolve()?;
    for (slot, v) in [(&mut cfg.sweep_t_in, t_in), (&mut cfg.sweep_r, r)] {
        if !v.is_empty() {
            *slot = v.to_vec();
        }
    }
    if !n_in.is_empty() {
        cfg.sweep_n_in = n_in.to_vec();
    }
    let output = required_output(&cfg)?;
    let inputs = pipeline::load_inputs(&cfg)?;
    let (reports, failure) = sweep::run(&cfg, &inputs, &output)?;
    for r in &reports {
        print_json(r)?;
    }
    match failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn toy_sample(args: &RunArgs, count: usize, height: usize, width: usize) -> Result<(), CliError> {
    let cfg = args.resolve()?;
    let gmm = toy::toy_mixture(height, width, cfg.oracle_std)?;
    let samples = toy::run(&cfg, &gmm, count)?;
    for s in &samples {
        print_json(s)?;
    }
    if let Some(output) = &cfg.output {
        let cols = (count as f64).sqrt().ceil().max(1.0) as usize;
        let tiles: Vec<Tile> =
            samples.iter().map(|s| Tile { image: Some(&s.image), label: format!("K{}", s.component) }).collect();
        let sheet = tile_sheet(&tiles, count.div_ceil(cols), cols, height, width);
        xdc_core::image_io::write_png(&sheet, output)?;
    }
    Ok(())
}

fn run_diagnose(args: &RunArgs, seeds: u64) -> Result<(), CliError> {
    let cfg = args.resolve()?;
    let inputs = pipeline::load_inputs(&cfg)?;
    let seeds: Vec<u64> = (0..seeds.max(1)).map(|i| cfg.seed.wrapping_add(i)).collect();
    for record in diagnose::run(&cfg, &inputs, &seeds)? {
        print_json(&record)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("XDC_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Composite(args) => composite(args),
        Command::Sweep { run, sweep_t_in, sweep_n_in, sweep_r } => run_sweep(run, sweep_t_in, sweep_n_in, sweep_r),
        Command::ToySample { run, count, height, width } => toy_sample(run, *count, *height, *width),
        Command::Diagnose { run, seeds } => run_diagnose(run, *seeds),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("xdc: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
