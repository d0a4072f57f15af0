//! Experiment configuration files.
//!
//! One TOML document per run. Top-level keys `seed` and `output-dir`, then
//! the sections `[phantom]`, `[geometry]`, `[noise]`, `[method]`,
//! `[method-params]`, `[inputs]`, `[compress]` and `[export]`. Unknown keys
//! are rejected. `--set section.key=value` overrides single keys before
//! the document is checked.

use std::fs;
use std::path::{Path, PathBuf};

use dynshape::recon::dss::{ExtensionConfig, ReconConfig};
use dynshape::recon::optim::LineSearchConfig;
use dynshape::BaselineConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub phantom: Option<PhantomConfig>,
    #[serde(default)]
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub method: Option<MethodConfig>,
    #[serde(default)]
    pub method_params: MethodParams,
    #[serde(default)]
    pub inputs: Inputs,
    #[serde(default)]
    pub compress: CompressConfig,
    #[serde(default)]
    pub export: ExportConfig,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PhantomConfig {
    /// Bouncing balls; `balls` replaces the default pair.
    Rigid {
        n: usize,
        frames: usize,
        #[serde(default)]
        balls: Option<Vec<BallConfig>>,
    },
    /// Sinusoidally warped bell.
    NonRigid {
        n: usize,
        #[serde(default = "default_nonrigid_frames")]
        frames: usize,
        #[serde(default = "default_frequency")]
        frequency: f64,
        #[serde(default = "default_amplitude")]
        amplitude: f64,
    },
    /// Static centred disk, radius `n / 4` unless given.
    Disk {
        n: usize,
        frames: usize,
        #[serde(default)]
        radius: Option<f64>,
    },
}

fn default_nonrigid_frames() -> usize {
    360
}
fn default_frequency() -> f64 {
    10.0
}
fn default_amplitude() -> f64 {
    2.0
}

impl PhantomConfig {
    pub fn n(&self) -> usize {
        match *self {
            PhantomConfig::Rigid { n, .. } | PhantomConfig::NonRigid { n, .. } | PhantomConfig::Disk { n, .. } => n,
        }
    }

    pub fn frames(&self) -> usize {
        match *self {
            PhantomConfig::Rigid { frames, .. }
            | PhantomConfig::NonRigid { frames, .. }
            | PhantomConfig::Disk { frames, .. } => frames,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallConfig {
    pub radius: f64,
    pub position: [f64; 2],
    pub velocity: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    #[serde(default)]
    pub theta1: f64,
    #[serde(default = "default_delta")]
    pub delta_theta: f64,
    #[serde(default = "default_pixel")]
    pub pixel_size: f64,
    #[serde(default)]
    pub n_det: Option<usize>,
    #[serde(default)]
    pub det_spacing: Option<f64>,
}

fn default_delta() -> f64 {
    5.0
}
fn default_pixel() -> f64 {
    1.0
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self { theta1: 0.0, delta_theta: 5.0, pixel_size: 1.0, n_det: None, det_spacing: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// `inf` disables noise.
    #[serde(default = "default_snr")]
    pub snr_db: f64,
}

fn default_snr() -> f64 {
    f64::INFINITY
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { snr_db: f64::INFINITY }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Static,
    Css,
    Boxl2,
    Dss,
    DssAtten,
    DssMultilevel,
    DssPerim,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    pub name: Method,
}

/// Solver parameters. Unset keys keep the library defaults. The
/// shape-sensing keys also drive CSS, and the line-search keys are shared
/// by every method.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodParams {
    pub tau: Option<f64>,
    pub outer_iters: Option<usize>,
    pub inner_iters: Option<usize>,
    pub kappa0: Option<f64>,
    pub kappa_decay: Option<f64>,
    pub dct_fraction: Option<f64>,
    pub ls_shrink: Option<f64>,
    pub ls_c: Option<f64>,
    pub ls_max: Option<usize>,
    pub init_bin: Option<usize>,
    pub bin_size: Option<usize>,
    pub alpha_tv: Option<f64>,
    pub beta_temporal: Option<f64>,
    pub tv_mu: Option<f64>,
    pub max_iters: Option<usize>,
    pub rel_tol: Option<f64>,
    pub css_tau: Option<f64>,
    pub attenuation: Option<Vec<f64>>,
    pub gray_levels: Option<Vec<f64>>,
    pub perimeter_lambda: Option<f64>,
}

impl MethodParams {
    pub fn recon(&self) -> ReconConfig {
        let d = ReconConfig::default();
        ReconConfig {
            tau: self.tau.or(d.tau),
            outer_iters: self.outer_iters.unwrap_or(d.outer_iters),
            inner_iters: self.inner_iters.unwrap_or(d.inner_iters),
            kappa0: self.kappa0.unwrap_or(d.kappa0),
            kappa_decay: self.kappa_decay.unwrap_or(d.kappa_decay),
            dct_fraction: self.dct_fraction.unwrap_or(d.dct_fraction),
            ls_shrink: self.ls_shrink.unwrap_or(d.ls_shrink),
            ls_c: self.ls_c.unwrap_or(d.ls_c),
            ls_max: self.ls_max.unwrap_or(d.ls_max),
            init_bin: self.init_bin.unwrap_or(d.init_bin),
        }
    }

    pub fn baseline(&self) -> BaselineConfig {
        let d = BaselineConfig::default();
        let recon = self.recon();
        BaselineConfig {
            bin_size: self.bin_size.unwrap_or(d.bin_size),
            alpha_tv: self.alpha_tv.unwrap_or(d.alpha_tv),
            beta_temporal: self.beta_temporal.unwrap_or(d.beta_temporal),
            tv_mu: self.tv_mu.unwrap_or(d.tv_mu),
            max_iters: self.max_iters.unwrap_or(d.max_iters),
            rel_tol: self.rel_tol.unwrap_or(d.rel_tol),
            css_tau: self.css_tau,
            line_search: LineSearchConfig { shrink: recon.ls_shrink, c: recon.ls_c, max_backtracks: recon.ls_max },
            css: recon,
        }
    }

    pub fn extensions(&self) -> ExtensionConfig {
        ExtensionConfig {
            attenuation: self.attenuation.clone(),
            gray_levels: self.gray_levels.clone(),
            perimeter_lambda: self.perimeter_lambda,
        }
    }
}

/// Input files. Unset paths default to the files the earlier pipeline
/// stages write into the output directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inputs {
    pub phantom: Option<PathBuf>,
    pub sinogram: Option<PathBuf>,
    pub recon: Option<PathBuf>,
    /// Ground truth for `metrics`; defaults to the phantom.
    pub gt: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompressConfig {
    #[serde(default = "default_fractions")]
    pub fractions: Vec<f64>,
    #[serde(default = "default_width")]
    pub heaviside_width: f64,
}

fn default_fractions() -> Vec<f64> {
    vec![0.01, 0.02, 0.05, 0.1, 0.2]
}
fn default_width() -> f64 {
    0.1
}

impl Default for CompressConfig {
    fn default() -> Self {
        Self { fractions: default_fractions(), heaviside_width: default_width() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Pgm,
    Png,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExportConfig {
    #[serde(default = "default_format")]
    pub format: ExportFormat,
    #[serde(default = "default_stride")]
    pub stride: usize,
}

fn default_format() -> ExportFormat {
    ExportFormat::Pgm
}
fn default_stride() -> usize {
    1
}

impl Default for ExportConfig {
    fn default() -> Self {
        Self { format: ExportFormat::Pgm, stride: 1 }
    }
}

impl ExperimentConfig {
    /// Reads a config file, applies `--set` overrides and `--out`.
    pub fn load(path: &Path, sets: &[String], out: Option<&Path>) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::parse(&text, sets)?;
        if let Some(o) = out {
            cfg.output_dir = o.to_path_buf();
        }
        Ok(cfg)
    }

    pub fn parse(text: &str, sets: &[String]) -> CliResult<Self> {
        let mut doc: toml::Table = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        for s in sets {
            apply_override(&mut doc, s)?;
        }
        doc.try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))
    }

    pub fn phantom_path(&self) -> PathBuf {
        self.inputs.phantom.clone().unwrap_or_else(|| self.output_dir.join("phantom.f32"))
    }

    pub fn sinogram_path(&self) -> PathBuf {
        self.inputs.sinogram.clone().unwrap_or_else(|| self.output_dir.join("sinogram.f32"))
    }

    pub fn recon_path(&self) -> PathBuf {
        self.inputs.recon.clone().unwrap_or_else(|| self.output_dir.join("recon.f32"))
    }

    pub fn gt_path(&self) -> PathBuf {
        self.inputs.gt.clone().unwrap_or_else(|| self.phantom_path())
    }
}

/// Sets `a.b.c = value` in a TOML table. The value is read as a TOML
/// literal when it parses as one and as a bare string otherwise.
pub fn apply_override(doc: &mut toml::Table, spec: &str) -> CliResult<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override '{spec}' is not of the form key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("bad override key '{key}'")));
    }
    let raw = raw.trim();
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let (last, parents) = path.split_last().expect("non-empty path");
    let mut table = doc;
    for p in parents {
        let entry = table.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("override '{key}': '{p}' is not a section")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}
