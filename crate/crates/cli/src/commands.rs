use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use dynshape::metrics::report;
use dynshape::phantoms::{add_awgn, disk, nonrigid_bell, rigid_balls, Ball, NonRigidSpec, RigidBallSpec};
use dynshape::projector::forward_sequence;
use dynshape::recon::baselines::{
    bin_measurements, boxl2_reconstruct, css_sequence, replicate_bins, static_tv_reconstruct,
};
use dynshape::recon::dss::{dss_attenuation, dss_reconstruct_with, ExtensionConfig};
use dynshape::recon::optim::PgResult;
use dynshape::recon::trace::trace_csv;
use dynshape::transforms::compression_error;
use dynshape::{DetectorArray, ImageGrid, ImageSequence, ShapeResult, Sinogram, TraceRow};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, ExportFormat, GeometryConfig, Method, PhantomConfig};
use crate::error::{CliError, CliResult};
use crate::io::{
    coeff_artifacts, pgm_bytes, png_bytes, read_sinogram, read_volume, sinogram_artifacts, volume_artifacts, write_all,
    Artifact,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Phantom,
    Simulate,
    Reconstruct,
    Metrics,
    CompressStudy,
    Export,
}

/// Runs one pipeline stage and returns the files it wrote.
pub fn run(cmd: Command, cfg: &ExperimentConfig) -> CliResult<Vec<PathBuf>> {
    let artifacts = match cmd {
        Command::Phantom => cmd_phantom(cfg)?,
        Command::Simulate => cmd_simulate(cfg)?,
        Command::Reconstruct => cmd_reconstruct(cfg)?,
        Command::Metrics => cmd_metrics(cfg)?,
        Command::CompressStudy => cmd_compress_study(cfg)?,
        Command::Export => cmd_export(cfg)?,
    };
    write_all(&artifacts)?;
    Ok(artifacts.into_iter().map(|a| a.path).collect())
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

pub fn build_phantom(p: &PhantomConfig) -> CliResult<ImageSequence> {
    Ok(match p {
        PhantomConfig::Rigid { n, frames, balls } => {
            let mut spec = RigidBallSpec::default_for(*n, *frames);
            if let Some(b) = balls {
                spec.balls =
                    b.iter().map(|b| Ball { radius: b.radius, position: b.position, velocity: b.velocity }).collect();
            }
            rigid_balls(&spec)?
        }
        PhantomConfig::NonRigid { n, frames, frequency, amplitude } => {
            nonrigid_bell(&NonRigidSpec::bell(*n, *frames, *frequency, *amplitude))?
        }
        PhantomConfig::Disk { n, frames, radius } => disk(*n, radius.unwrap_or(*n as f64 / 4.0), *frames)?,
    })
}

fn cmd_phantom(cfg: &ExperimentConfig) -> CliResult<Vec<Artifact>> {
    let p = cfg.phantom.as_ref().ok_or_else(|| config_err("phantom command needs a [phantom] section"))?;
    let g = &cfg.geometry;
    ImageGrid::new(p.n(), p.n(), g.pixel_size)?;
    let seq = build_phantom(p)?;
    Ok(volume_artifacts(&cfg.output_dir.join("phantom.f32"), &seq, g.pixel_size))
}

fn detector_for(g: &GeometryConfig, grid: &ImageGrid) -> CliResult<DetectorArray> {
    let d = DetectorArray::default_for(grid);
    Ok(DetectorArray::new(g.n_det.unwrap_or(d.n_det), g.det_spacing.unwrap_or(d.det_spacing))?)
}

pub fn simulate(cfg: &ExperimentConfig, seq: &ImageSequence, pixel_size: f64) -> CliResult<(Sinogram, ImageGrid)> {
    let g = &cfg.geometry;
    if pixel_size != g.pixel_size {
        return Err(config_err(format!(
            "phantom pixel size {pixel_size} differs from geometry.pixel_size {}",
            g.pixel_size
        )));
    }
    let grid = ImageGrid::new(seq.nx(), seq.ny(), pixel_size)?;
    let det = detector_for(g, &grid)?;
    let sched = dynshape::AngleSchedule::new(g.theta1, g.delta_theta, seq.frames())?;
    let clean = forward_sequence(seq, &grid, &sched, &det)?;
    if cfg.noise.snr_db.is_nan() {
        return Err(config_err("noise.snr_db is NaN"));
    }
    Ok((add_awgn(&clean, cfg.noise.snr_db, cfg.seed)?, grid))
}

fn cmd_simulate(cfg: &ExperimentConfig) -> CliResult<Vec<Artifact>> {
    let (seq, pixel_size) = read_volume(&cfg.phantom_path())?;
    let (sino, grid) = simulate(cfg, &seq, pixel_size)?;
    Ok(sinogram_artifacts(&cfg.output_dir.join("sinogram.f32"), &sino, &grid))
}

fn check_geometry(cfg: &ExperimentConfig, sino: &Sinogram, grid: &ImageGrid) -> CliResult<()> {
    let g = &cfg.geometry;
    let mut bad = Vec::new();
    if g.theta1 != sino.schedule.theta1 {
        bad.push(format!("theta1 {} vs {}", g.theta1, sino.schedule.theta1));
    }
    if g.delta_theta != sino.schedule.delta_theta {
        bad.push(format!("delta_theta {} vs {}", g.delta_theta, sino.schedule.delta_theta));
    }
    if g.pixel_size != grid.pixel_size {
        bad.push(format!("pixel_size {} vs {}", g.pixel_size, grid.pixel_size));
    }
    if let Some(n) = g.n_det.filter(|&n| n != sino.detector.n_det) {
        bad.push(format!("n_det {n} vs {}", sino.detector.n_det));
    }
    if let Some(s) = g.det_spacing.filter(|&s| s != sino.detector.det_spacing) {
        bad.push(format!("det_spacing {s} vs {}", sino.detector.det_spacing));
    }
    if let Some(p) = &cfg.phantom {
        if p.n() != grid.nx || p.n() != grid.ny || p.frames() != sino.frames() {
            bad.push(format!("phantom {0}x{0}x{1} vs {2}x{3}x{4}", p.n(), p.frames(), grid.nx, grid.ny, sino.frames()));
        }
    }
    if bad.is_empty() {
        Ok(())
    } else {
        Err(config_err(format!("config geometry does not match the sinogram header: {}", bad.join(", "))))
    }
}

/// Images, trace and coefficient dumps of one reconstruction.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub images: ImageSequence,
    pub trace: Vec<TraceRow>,
    pub shapes: Vec<ShapeResult>,
}

fn pg_trace(bin: usize, r: &PgResult) -> impl Iterator<Item = TraceRow> + '_ {
    r.steps.iter().map(move |s| TraceRow {
        outer: bin,
        inner: s.iteration,
        objective: s.value,
        step: s.step,
        epsilon: f64::NAN,
        l1_norm: f64::NAN,
    })
}

fn check_pg(r: &PgResult) -> CliResult<()> {
    if r.x.iter().any(|v| !v.is_finite()) {
        return Err(CliError::Numerical("non-finite reconstruction".into()));
    }
    if r.stagnated && r.steps.is_empty() {
        return Err(CliError::Numerical("line search failed on the first iteration".into()));
    }
    Ok(())
}

fn check_shape(r: &ShapeResult) -> CliResult<()> {
    if r.phi.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(CliError::Numerical("non-finite level-set function".into()));
    }
    if r.trace.is_empty() {
        return Err(CliError::Numerical(format!(
            "no step accepted in any of the {} outer iterations",
            r.stagnant_outer.len()
        )));
    }
    Ok(())
}

pub fn reconstruct(
    method: Method,
    cfg: &ExperimentConfig,
    sino: &Sinogram,
    grid: &ImageGrid,
) -> CliResult<Reconstruction> {
    let params = &cfg.method_params;
    let base = params.baseline();
    let recon = params.recon();
    let ext = params.extensions();
    let shape = |r: ShapeResult| -> CliResult<Reconstruction> {
        check_shape(&r)?;
        Ok(Reconstruction { images: r.images.clone(), trace: r.trace.clone(), shapes: vec![r] })
    };
    match method {
        Method::Static => {
            base.validate()?;
            let bins = bin_measurements(sino, base.bin_size.min(sino.frames()))?;
            let results: Vec<PgResult> =
                bins.par_iter().map(|b| static_tv_reconstruct(b, grid, &base)).collect::<dynshape::Result<_>>()?;
            results.iter().try_for_each(check_pg)?;
            let images: Vec<Vec<f64>> = results.iter().map(|r| r.x.clone()).collect();
            let trace = results.iter().enumerate().flat_map(|(i, r)| pg_trace(i + 1, r)).collect();
            Ok(Reconstruction { images: replicate_bins(&images, &bins, grid)?, trace, shapes: Vec::new() })
        }
        Method::Css => {
            let (binned, results) = css_sequence(sino, grid, &base)?;
            results.iter().try_for_each(check_shape)?;
            let trace = results.iter().flat_map(|r| r.trace.iter().copied()).collect();
            Ok(Reconstruction { images: binned.images, trace, shapes: results })
        }
        Method::Boxl2 => {
            let (images, r) = boxl2_reconstruct(sino, grid, &base)?;
            check_pg(&r)?;
            Ok(Reconstruction { images, trace: pg_trace(1, &r).collect(), shapes: Vec::new() })
        }
        Method::Dss => shape(dss_reconstruct_with(sino, grid, &recon, &ext)?),
        Method::DssAtten => shape(dss_attenuation(sino, grid, &recon, &ext)?),
        Method::DssMultilevel => {
            if ext.gray_levels.is_none() {
                return Err(config_err("dss-multilevel needs method-params.gray_levels"));
            }
            shape(dss_reconstruct_with(sino, grid, &recon, &ext)?)
        }
        Method::DssPerim => {
            if ext.perimeter_lambda.is_none() {
                return Err(config_err("dss-perim needs method-params.perimeter_lambda"));
            }
            let ext = ExtensionConfig { gray_levels: None, ..ext };
            shape(dss_reconstruct_with(sino, grid, &recon, &ext)?)
        }
    }
}

fn cmd_reconstruct(cfg: &ExperimentConfig) -> CliResult<Vec<Artifact>> {
    let method = cfg.method.as_ref().ok_or_else(|| config_err("reconstruct needs a [method] section"))?.name;
    let (sino, grid) = read_sinogram(&cfg.sinogram_path())?;
    check_geometry(cfg, &sino, &grid)?;
    let r = reconstruct(method, cfg, &sino, &grid)?;
    let out = &cfg.output_dir;
    let mut arts = volume_artifacts(&out.join("recon.f32"), &r.images, grid.pixel_size);
    match r.shapes.as_slice() {
        [] => {}
        [one] => arts.extend(coeff_artifacts(&out.join("coeffs.f64"), &one.coeffs, one.tau)),
        many => {
            for (i, s) in many.iter().enumerate() {
                arts.extend(coeff_artifacts(&out.join(format!("coeffs_bin{i:03}.f64")), &s.coeffs, s.tau));
            }
        }
    }
    if let [one] = r.shapes.as_slice() {
        if method == Method::DssAtten {
            let mut s = String::from("frame,attenuation\n");
            for (t, u) in one.attenuation.iter().enumerate() {
                let _ = writeln!(s, "{t},{u:e}");
            }
            arts.push(Artifact { path: out.join("attenuation.csv"), bytes: s.into_bytes() });
        }
    }
    arts.push(Artifact { path: out.join("trace.csv"), bytes: trace_csv(&r.trace).into_bytes() });
    Ok(arts)
}

fn cmd_metrics(cfg: &ExperimentConfig) -> CliResult<Vec<Artifact>> {
    let (gt, _) = read_volume(&cfg.gt_path())?;
    let (recon, _) = read_volume(&cfg.recon_path())?;
    let rep = report(&gt, &recon)?;
    Ok(vec![Artifact { path: cfg.output_dir.join("metrics.csv"), bytes: rep.to_csv().into_bytes() }])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompressMode {
    Levelset,
    Direct,
    LevelsetPermuted,
    DirectPermuted,
}

impl CompressMode {
    pub const ALL: [CompressMode; 4] =
        [CompressMode::Levelset, CompressMode::Direct, CompressMode::LevelsetPermuted, CompressMode::DirectPermuted];

    pub fn name(self) -> &'static str {
        match self {
            CompressMode::Levelset => "levelset",
            CompressMode::Direct => "direct",
            CompressMode::LevelsetPermuted => "levelset-permuted",
            CompressMode::DirectPermuted => "direct-permuted",
        }
    }

    fn levelset(self) -> bool {
        matches!(self, CompressMode::Levelset | CompressMode::LevelsetPermuted)
    }

    fn permuted(self) -> bool {
        matches!(self, CompressMode::LevelsetPermuted | CompressMode::DirectPermuted)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompressRow {
    pub fraction: f64,
    pub mode: CompressMode,
    pub mse: f64,
    pub ssim: f64,
}

/// Seeded random reordering of the frames.
pub fn time_permutation(frames: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..frames).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order
}

/// Compression errors of a binary phantom and of a time-shuffled copy,
/// in both modes, at every kept fraction.
pub fn compress_study(
    phantom: &ImageSequence,
    fractions: &[f64],
    width: f64,
    seed: u64,
) -> CliResult<Vec<CompressRow>> {
    if fractions.is_empty() {
        return Err(config_err("compress.fractions is empty"));
    }
    if let Some(f) = fractions.iter().find(|&&f| !(f > 0.0 && f <= 1.0)) {
        return Err(config_err(format!("kept fraction {f} outside (0, 1]")));
    }
    if phantom.as_slice().iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(config_err("compress-study needs a binary phantom"));
    }
    let shuffled = phantom.permuted(&time_permutation(phantom.frames(), seed))?;
    let jobs: Vec<(f64, CompressMode)> =
        fractions.iter().flat_map(|&f| CompressMode::ALL.into_iter().map(move |m| (f, m))).collect();
    jobs.par_iter()
        .map(|&(fraction, mode)| {
            let vol = if mode.permuted() { &shuffled } else { phantom };
            let s = compression_error(vol, fraction, mode.levelset(), width)?;
            Ok(CompressRow { fraction, mode, mse: s.mse, ssim: s.ssim })
        })
        .collect()
}

pub fn compress_csv(rows: &[CompressRow]) -> String {
    let mut s = String::from("fraction,mode,mse,ssim\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{:e},{:e}", r.fraction, r.mode.name(), r.mse, r.ssim);
    }
    s
}

fn cmd_compress_study(cfg: &ExperimentConfig) -> CliResult<Vec<Artifact>> {
    let c = &cfg.compress;
    if c.fractions.is_empty() {
        return Err(config_err("compress.fractions is empty"));
    }
    let (phantom, _) = read_volume(&cfg.phantom_path())?;
    let rows = compress_study(&phantom, &c.fractions, c.heaviside_width, cfg.seed)?;
    Ok(vec![Artifact { path: cfg.output_dir.join("compress.csv"), bytes: compress_csv(&rows).into_bytes() }])
}

pub fn export_frames(seq: &ImageSequence, format: ExportFormat, stride: usize, dir: &Path) -> CliResult<Vec<Artifact>> {
    if stride == 0 {
        return Err(config_err("export.stride must be at least 1"));
    }
    let ext = match format {
        ExportFormat::Pgm => "pgm",
        ExportFormat::Png => "png",
    };
    (0..seq.frames())
        .step_by(stride)
        .map(|t| {
            let f = seq.frame(t);
            let bytes = match format {
                ExportFormat::Pgm => pgm_bytes(f, seq.nx(), seq.ny()),
                ExportFormat::Png => png_bytes(f, seq.nx(), seq.ny())?,
            };
            Ok(Artifact { path: dir.join(format!("frame_{t:04}.{ext}")), bytes })
        })
        .collect()
}

fn cmd_export(cfg: &ExperimentConfig) -> CliResult<Vec<Artifact>> {
    if cfg.export.stride == 0 {
        return Err(config_err("export.stride must be at least 1"));
    }
    let (seq, _) = read_volume(&cfg.recon_path())?;
    export_frames(&seq, cfg.export.format, cfg.export.stride, &cfg.output_dir.join("frames"))
}

/// Caps rayon's global pool at `DYNSHAPE_THREADS` when it is set.
pub fn init_threads() -> CliResult<()> {
    let Ok(v) = std::env::var("DYNSHAPE_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| config_err(format!("DYNSHAPE_THREADS must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| config_err(format!("thread pool: {e}")))
}
