//! Flat key-value run configuration.
//!
//! A run is described by one TOML table whose keys mirror the guidance
//! settings plus the input/output paths. Command-line flags override file
//! values. The sidecar written next to every output is a complete config of
//! this shape, so feeding it back through `--config` repeats the run.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use xdc_core::{BlendSpace, GuidanceConfig, SamplerKind};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    /// Exact Gaussian-mixture denoiser built from the reference.
    #[default]
    Oracle,
    /// External model server.
    Bridge,
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Oracle => "oracle",
            Self::Bridge => "bridge",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub object: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mask: Option<PathBuf>,
    /// Top-left corner of the pasted object, `[row, col]`.
    pub position: [isize; 2],
    pub scale: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,

    pub t_in: f64,
    pub t_out: f64,
    pub n_in: usize,
    pub n_out: usize,
    pub r: f64,
    pub u: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_blend: Option<usize>,
    pub blend_space: BlendSpace,
    pub sampler: SamplerKind,
    pub steps: usize,
    pub seed: u64,
    pub guidance_scale: f64,

    pub backend: BackendKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bridge_addr: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
    /// Per-component standard deviation of the oracle mixture.
    pub oracle_std: f64,
    /// Low-pass factor used to derive the oracle mixture means.
    pub oracle_factor: usize,
    /// Shell width for boundary-energy reports.
    pub band: usize,
    pub workers: usize,

    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub sweep_t_in: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub sweep_n_in: Vec<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub sweep_r: Vec<f64>,

    /// Written into sidecars; checked against the rebuilt schedule on load.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule_digest: Option<String>,
    /// Informational; ignored on load.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_sha256: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let g = GuidanceConfig::default();
        Self {
            reference: None,
            object: None,
            mask: None,
            position: [0, 0],
            scale: 1.0,
            output: None,
            t_in: g.t_in,
            t_out: g.t_out,
            n_in: g.n_in,
            n_out: g.n_out,
            r: g.r,
            u: g.u,
            p_blend: g.p_blend,
            blend_space: g.blend_space,
            sampler: g.sampler,
            steps: g.steps,
            seed: g.seed,
            guidance_scale: g.guidance_scale,
            backend: BackendKind::Oracle,
            bridge_addr: None,
            prompt: None,
            oracle_std: 0.1,
            oracle_factor: 4,
            band: 2,
            workers: 1,
            sweep_t_in: Vec::new(),
            sweep_n_in: Vec::new(),
            sweep_r: Vec::new(),
            schedule_digest: None,
            output_sha256: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config is always serialisable")
    }

    pub fn guidance(&self) -> GuidanceConfig {
        GuidanceConfig {
            t_in: self.t_in,
            t_out: self.t_out,
            n_in: self.n_in,
            n_out: self.n_out,
            r: self.r,
            u: self.u,
            p_blend: self.p_blend,
            blend_space: self.blend_space,
            sampler: self.sampler,
            steps: self.steps,
            seed: self.seed,
            guidance_scale: self.guidance_scale,
        }
    }

    /// Exactly one backend, with the address it needs.
    pub fn check_backend(&self) -> Result<(), CliError> {
        match (self.backend, &self.bridge_addr) {
            (BackendKind::Bridge, None) => Err(CliError::Input("--backend bridge needs --bridge-addr".into())),
            (BackendKind::Oracle, Some(_)) => {
                Err(CliError::Input("--bridge-addr given but the oracle backend is selected".into()))
            }
            _ => Ok(()),
        }
    }
}

fn parse_position(s: &str) -> Result<[isize; 2], String> {
    let (r, c) = s.split_once(',').ok_or_else(|| format!("expected ROW,COL, got {s:?}"))?;
    let p = |v: &str| v.trim().parse::<isize>().map_err(|e| format!("{v:?}: {e}"));
    Ok([p(r)?, p(c)?])
}

/// Flags shared by every subcommand; each one overrides the config file.
#[derive(Debug, Default, Clone, Args)]
pub struct RunArgs {
    /// TOML config file (flat keys; flags take precedence).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Reference / background image.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// RGBA object pasted onto the reference.
    #[arg(long)]
    pub object: Option<PathBuf>,
    /// Edit mask (white = inside).
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Object top-left corner as ROW,COL.
    #[arg(long, value_parser = parse_position, allow_hyphen_values = true)]
    pub position: Option<[isize; 2]>,
    /// Object scale factor.
    #[arg(long)]
    pub scale: Option<f64>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,

    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "t-in")]
    pub t_in: Option<f64>,
    #[arg(long = "t-out")]
    pub t_out: Option<f64>,
    #[arg(long = "n-in")]
    pub n_in: Option<usize>,
    #[arg(long = "n-out")]
    pub n_out: Option<usize>,
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long)]
    pub u: Option<usize>,
    #[arg(long = "p-blend")]
    pub p_blend: Option<usize>,
    #[arg(long = "blend-space")]
    pub blend_space: Option<BlendSpace>,
    #[arg(long)]
    pub sampler: Option<SamplerKind>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long = "guidance-scale")]
    pub guidance_scale: Option<f64>,

    #[arg(long, value_enum)]
    pub backend: Option<BackendKind>,
    #[arg(long = "bridge-addr")]
    pub bridge_addr: Option<String>,
    #[arg(long)]
    pub prompt: Option<String>,
    #[arg(long = "oracle-std")]
    pub oracle_std: Option<f64>,
    #[arg(long = "oracle-factor")]
    pub oracle_factor: Option<usize>,
    #[arg(long)]
    pub band: Option<usize>,
    #[arg(long)]
    pub workers: Option<usize>,
}

macro_rules! overlay {
    ($cfg:expr, $args:expr, $($field:ident),*) => {
        $(if let Some(v) = $args.$field.clone() { $cfg.$field = v; })*
    };
}

impl RunArgs {
    /// Config file (if any) with flags applied on top.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        overlay!(
            cfg,
            self,
            position,
            scale,
            t_in,
            t_out,
            n_in,
            n_out,
            r,
            u,
            blend_space,
            sampler,
            steps,
            seed,
            guidance_scale,
            backend,
            oracle_std,
            oracle_factor,
            band,
            workers
        );
        for (slot, v) in [
            (&mut cfg.reference, &self.reference),
            (&mut cfg.object, &self.object),
            (&mut cfg.mask, &self.mask),
            (&mut cfg.output, &self.output),
        ] {
            if v.is_some() {
                slot.clone_from(v);
            }
        }
        if self.p_blend.is_some() {
            cfg.p_blend = self.p_blend;
        }
        if self.bridge_addr.is_some() {
            cfg.bridge_addr.clone_from(&self.bridge_addr);
        }
        if self.prompt.is_some() {
            cfg.prompt.clone_from(&self.prompt);
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_through_toml() {
        let cfg = RunConfig {
            reference: Some("/tmp/a.png".into()),
            p_blend: Some(3),
            sweep_t_in: vec![0.25, 0.5],
            schedule_digest: Some("abc".into()),
            blend_space: BlendSpace::X0,
            ..Default::default()
        };
        assert_eq!(RunConfig::parse(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg = RunConfig::parse("t_in = 0.25\nsampler = \"ddpm\"\n").unwrap();
        assert_eq!(cfg.t_in, 0.25);
        assert_eq!(cfg.sampler, SamplerKind::Ddpm);
        assert_eq!(cfg.n_in, RunConfig::default().n_in);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::parse("tin = 0.3\n").is_err());
    }

    #[test]
    fn position_flag() {
        assert_eq!(parse_position("3,-4").unwrap(), [3, -4]);
        assert!(parse_position("3").is_err());
    }

    #[test]
    fn bridge_needs_address() {
        let cfg = RunConfig { backend: BackendKind::Bridge, ..Default::default() };
        assert!(cfg.check_backend().is_err());
    }
}
