//! Paste → guide → write: the composite pipeline shared by every subcommand.

use std::path::{Path, PathBuf};

use log::{debug, info, warn};
use sha2::{Digest, Sha256};
use xdc_core::bridge::protocol::caps;
use xdc_core::bridge::BridgeDenoiser;
use xdc_core::image_io::{read_mask, read_rgb, read_rgba, write_png};
use xdc_core::paste::paste;
use xdc_core::sampler::{JsonTrace, Silent, StepObserver};
use xdc_core::{
    low_pass, run_composite_observed, Condition, GaussianMixture, Grid, ImageGrid, Mask, Mask64, NoiseSchedule,
    OracleDenoiser, RunOutput,
};

use crate::config::{BackendKind, RunConfig};
use crate::error::CliError;

/// Reference image and binary edit mask, both in pixel space.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub reference: Grid,
    pub mask: Mask64,
}

pub fn load_inputs(cfg: &RunConfig) -> Result<Inputs, CliError> {
    let path = cfg.reference.as_ref().ok_or_else(|| CliError::Input("no --reference image given".into()))?;
    let background = read_rgb::<f64>(path)?;
    let (reference, footprint) = match &cfg.object {
        Some(obj) => {
            let object = read_rgba::<f64>(obj)?;
            let (y, m) = paste(&object, &background, (cfg.position[0], cfg.position[1]), cfg.scale)?;
            (y, Some(m))
        }
        None => (background, None),
    };
    let mask = match (&cfg.mask, footprint) {
        (Some(p), _) => {
            let raw = read_mask::<f64>(p)?;
            let m = raw.binarize(0.5);
            if m != raw {
                warn!("mask {} is not binary; thresholded at 0.5", p.display());
            }
            m
        }
        (None, Some(m)) => m,
        (None, None) => return Err(CliError::Input("need --mask or --object to define the edit region".into())),
    };
    mask.expect_matches(reference.shape())?;
    Ok(Inputs { reference, mask })
}

/// Two-component mixture around the blurred reference and its mirror image:
/// a stand-in model whose samples look like plausible variants of the scene.
pub fn oracle_for(reference: &Grid, factor: usize, std: f64, steps: usize) -> Result<OracleDenoiser<f64>, CliError> {
    let longest = reference.height().max(reference.width());
    let base = low_pass(reference, factor.clamp(1, longest))?;
    let mirrored = base.flip_horizontal();
    let gmm = GaussianMixture::uniform(vec![base, mirrored], std)?;
    Ok(OracleDenoiser::new(gmm, NoiseSchedule::linear(steps)?))
}

fn condition(cfg: &RunConfig) -> Option<Condition> {
    cfg.prompt.clone().map(Condition::Text)
}

/// Runs one guided composite as configured.
pub fn run(cfg: &RunConfig, inputs: &Inputs, observer: &mut dyn StepObserver<f64>) -> Result<RunOutput<f64>, CliError> {
    cfg.check_backend()?;
    let guidance = cfg.guidance();
    let schedule = NoiseSchedule::<f64>::linear(guidance.steps)?;
    if let Some(d) = &cfg.schedule_digest {
        if *d != schedule.digest() {
            return Err(CliError::Input(format!(
                "schedule digest {d} does not match this build's {}",
                schedule.digest()
            )));
        }
    }
    let cond = condition(cfg);
    match cfg.backend {
        BackendKind::Oracle => {
            let mut backend = oracle_for(&inputs.reference, cfg.oracle_factor, cfg.oracle_std, guidance.steps)?;
            Ok(run_composite_observed(&inputs.reference, &inputs.mask, &guidance, &mut backend, cond.as_ref(), observer)?)
        }
        BackendKind::Bridge => {
            let addr = cfg.bridge_addr.as_deref().expect("checked above");
            let mut backend = BridgeDenoiser::connect(addr)?;
            let hello = *backend.client_mut().hello();
            info!("bridge at {addr}: grid {}, {} steps, flags {:#04x}", hello.shape, hello.steps, hello.flags);
            if hello.shape == inputs.reference.shape() {
                return Ok(run_composite_observed(
                    &inputs.reference,
                    &inputs.mask,
                    &guidance,
                    &mut backend,
                    cond.as_ref(),
                    observer,
                )?);
            }
            if hello.flags & caps::ENCODE_DECODE == 0 {
                return Err(CliError::Input(format!(
                    "reference is {} but the bridge works on {} and cannot encode",
                    inputs.reference.shape(),
                    hello.shape
                )));
            }
            // Guide in latent space; filtering latents stands in for filtering pixels.
            let latent: Grid = backend.client_mut().encode(&inputs.reference.cast())?.cast();
            let mask = resample_mask(&inputs.mask, latent.height(), latent.width());
            let mut out = run_composite_observed(&latent, &mask, &guidance, &mut backend, cond.as_ref(), observer)?;
            out.image = backend.client_mut().decode(&out.image.cast())?.cast();
            Ok(out)
        }
    }
}

/// Nearest-neighbour resize, which keeps binary masks binary.
fn resample_mask(mask: &Mask64, height: usize, width: usize) -> Mask64 {
    let (h, w) = (mask.height(), mask.width());
    Mask::from_fn(height, width, |i, j| {
        let y = ((i as f64 + 0.5) * h as f64 / height as f64) as usize;
        let x = ((j as f64 + 0.5) * w as f64 / width as f64) as usize;
        mask.get(y.min(h - 1), x.min(w - 1))
    })
}

/// Observer that emits JSON step records through the logger at debug level.
pub fn observer_for(inputs: &Inputs, band: usize) -> Box<dyn StepObserver<f64>> {
    if log::log_enabled!(log::Level::Debug) {
        Box::new(JsonTrace::new(LineLogger::default(), Some(inputs.mask.clone()), band))
    } else {
        Box::new(Silent)
    }
}

#[derive(Default)]
struct LineLogger(Vec<u8>);

impl std::io::Write for LineLogger {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        self.0.extend_from_slice(buf);
        while let Some(pos) = self.0.iter().position(|&b| b == b'\n') {
            let line: Vec<u8> = self.0.drain(..=pos).collect();
            debug!(target: "xdc::trace", "{}", String::from_utf8_lossy(&line[..line.len() - 1]));
        }
        Ok(buf.len())
    }

    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}

pub fn sidecar_path(output: &Path) -> PathBuf {
    output.with_extension("toml")
}

pub fn file_sha256(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Internal(format!("re-reading {}: {e}", path.display())))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

fn absolute(p: &Option<PathBuf>) -> Option<PathBuf> {
    p.as_ref().map(|p| std::fs::canonicalize(p).unwrap_or_else(|_| p.clone()))
}

/// Writes the image and its reproducibility sidecar. Returns the sidecar
/// path.
pub fn write_outputs(cfg: &RunConfig, out: &RunOutput<f64>, path: &Path) -> Result<PathBuf, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))?;
    }
    write_png(&out.image, path)?;
    let mut record = cfg.clone();
    record.reference = absolute(&cfg.reference);
    record.object = absolute(&cfg.object);
    record.mask = absolute(&cfg.mask);
    record.output = absolute(&Some(path.to_path_buf()));
    record.sweep_t_in.clear();
    record.sweep_n_in.clear();
    record.sweep_r.clear();
    record.schedule_digest = Some(out.schedule_digest.clone());
    record.output_sha256 = Some(file_sha256(path)?);
    let side = sidecar_path(path);
    std::fs::write(&side, record.to_toml()).map_err(|e| CliError::Input(format!("{}: {e}", side.display())))?;
    Ok(side)
}

/// Pixel grid → 3-channel grid for display.
pub fn to_rgb(grid: &Grid) -> Grid {
    match grid.channels() {
        3 => grid.clone(),
        c => ImageGrid::from_fn(grid.height(), grid.width(), 3, |y, x, k| grid.get(y, x, k.min(c - 1))),
    }
}
