//! Raw volume files with TOML sidecar headers, and frame export.
//!
//! A volume `name.f32` holds little-endian `f32` values in frame-major
//! order (`(t * ny + y) * nx + x`); its geometry lives in `name.toml`.
//! Coefficient dumps use `f64` so that they round-trip exactly.

use std::fs;
use std::path::{Path, PathBuf};

use dynshape::transforms::{DctCoeffs, DctDims, TruncationMask};
use dynshape::{AngleSchedule, DetectorArray, ImageGrid, ImageSequence, Sinogram};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Header {
    Volume {
        nx: usize,
        ny: usize,
        frames: usize,
        pixel_size: f64,
    },
    Sinogram {
        #[serde(rename = "T")]
        frames: usize,
        n_det: usize,
        det_spacing: f64,
        theta1: f64,
        delta_theta: f64,
        pixel_size: f64,
        nx: usize,
        ny: usize,
    },
    DctCoefficients {
        nx: usize,
        ny: usize,
        nt: usize,
        kx: usize,
        ky: usize,
        kt: usize,
        tau: f64,
    },
}

impl Header {
    fn values(&self) -> usize {
        match *self {
            Header::Volume { nx, ny, frames, .. } => nx * ny * frames,
            Header::Sinogram { frames, n_det, .. } => frames * n_det,
            Header::DctCoefficients { kx, ky, kt, .. } => kx * ky * kt,
        }
    }

    fn width(&self) -> usize {
        match self {
            Header::DctCoefficients { .. } => 8,
            _ => 4,
        }
    }

    pub fn sinogram_of(sino: &Sinogram, grid: &ImageGrid) -> Self {
        Header::Sinogram {
            frames: sino.frames(),
            n_det: sino.detector.n_det,
            det_spacing: sino.detector.det_spacing,
            theta1: sino.schedule.theta1,
            delta_theta: sino.schedule.delta_theta,
            pixel_size: grid.pixel_size,
            nx: grid.nx,
            ny: grid.ny,
        }
    }
}

/// Sidecar header path for a data file.
pub fn header_path(data: &Path) -> PathBuf {
    data.with_extension("toml")
}

/// A file ready to be written. Commands assemble all of their outputs
/// first so that a failure leaves nothing behind.
#[derive(Debug, Clone)]
pub struct Artifact {
    pub path: PathBuf,
    pub bytes: Vec<u8>,
}

pub fn write_all(artifacts: &[Artifact]) -> CliResult<()> {
    for a in artifacts {
        if let Some(dir) = a.path.parent() {
            fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
        fs::write(&a.path, &a.bytes).map_err(|e| CliError::io(&a.path, e))?;
    }
    Ok(())
}

fn encode_header(h: &Header) -> Vec<u8> {
    toml::to_string(h).expect("header serializes").into_bytes()
}

fn f32_bytes(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|&v| (v as f32).to_le_bytes()).collect()
}

/// Data file plus header for an image sequence.
pub fn volume_artifacts(path: &Path, seq: &ImageSequence, pixel_size: f64) -> Vec<Artifact> {
    let h = Header::Volume { nx: seq.nx(), ny: seq.ny(), frames: seq.frames(), pixel_size };
    vec![
        Artifact { path: path.to_path_buf(), bytes: f32_bytes(seq.as_slice()) },
        Artifact { path: header_path(path), bytes: encode_header(&h) },
    ]
}

pub fn sinogram_artifacts(path: &Path, sino: &Sinogram, grid: &ImageGrid) -> Vec<Artifact> {
    vec![
        Artifact { path: path.to_path_buf(), bytes: f32_bytes(sino.as_slice()) },
        Artifact { path: header_path(path), bytes: encode_header(&Header::sinogram_of(sino, grid)) },
    ]
}

pub fn coeff_artifacts(path: &Path, coeffs: &DctCoeffs, tau: f64) -> Vec<Artifact> {
    let (d, m) = (coeffs.dims, coeffs.mask);
    let h = Header::DctCoefficients { nx: d.nx, ny: d.ny, nt: d.nt, kx: m.kx, ky: m.ky, kt: m.kt, tau };
    vec![
        Artifact { path: path.to_path_buf(), bytes: coeffs.values.iter().flat_map(|v| v.to_le_bytes()).collect() },
        Artifact { path: header_path(path), bytes: encode_header(&h) },
    ]
}

pub fn read_header(data: &Path) -> CliResult<Header> {
    let hp = header_path(data);
    let text = fs::read_to_string(&hp).map_err(|e| CliError::io(&hp, e))?;
    toml::from_str(&text).map_err(|e| CliError::io(&hp, format!("bad header: {e}")))
}

fn read_values(data: &Path, h: &Header) -> CliResult<Vec<f64>> {
    let bytes = fs::read(data).map_err(|e| CliError::io(data, e))?;
    let w = h.width();
    if bytes.len() != h.values() * w {
        return Err(CliError::io(data, format!("{} bytes, header promises {}", bytes.len(), h.values() * w)));
    }
    Ok(if w == 4 {
        bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect()
    } else {
        bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect()
    })
}

fn bad_header(data: &Path, what: &str) -> CliError {
    CliError::io(data, format!("header does not describe {what}"))
}

/// Reads an image sequence and its pixel size.
pub fn read_volume(data: &Path) -> CliResult<(ImageSequence, f64)> {
    let h = read_header(data)?;
    let Header::Volume { nx, ny, frames, pixel_size } = h else {
        return Err(bad_header(data, "a volume"));
    };
    let v = read_values(data, &h)?;
    let seq = ImageSequence::from_vec(nx, ny, frames, v).map_err(|e| CliError::io(data, e))?;
    Ok((seq, pixel_size))
}

pub fn read_sinogram(data: &Path) -> CliResult<(Sinogram, ImageGrid)> {
    let h = read_header(data)?;
    let Header::Sinogram { frames, n_det, det_spacing, theta1, delta_theta, pixel_size, nx, ny } = h else {
        return Err(bad_header(data, "a sinogram"));
    };
    let v = read_values(data, &h)?;
    let wrap = |e: dynshape::Error| CliError::io(data, e);
    let grid = ImageGrid::new(nx, ny, pixel_size).map_err(wrap)?;
    let sched = AngleSchedule::new(theta1, delta_theta, frames).map_err(wrap)?;
    let det = DetectorArray::new(n_det, det_spacing).map_err(wrap)?;
    Ok((Sinogram::new(sched, det, v).map_err(wrap)?, grid))
}

pub fn read_coeffs(data: &Path) -> CliResult<(DctCoeffs, f64)> {
    let h = read_header(data)?;
    let Header::DctCoefficients { nx, ny, nt, kx, ky, kt, tau } = h else {
        return Err(bad_header(data, "DCT coefficients"));
    };
    let v = read_values(data, &h)?;
    let wrap = |e: dynshape::Error| CliError::io(data, e);
    let dims = DctDims::new(nx, ny, nt).map_err(wrap)?;
    Ok((DctCoeffs::new(dims, TruncationMask { kx, ky, kt }, v).map_err(wrap)?, tau))
}

/// 8-bit gray value `clamp(255 x)`, rounded.
pub fn to_gray(x: f64) -> u8 {
    if x.is_nan() {
        0
    } else {
        (255.0 * x).round().clamp(0.0, 255.0) as u8
    }
}

/// Binary PGM (P5) of one frame, row `y = 0` first.
pub fn pgm_bytes(frame: &[f64], nx: usize, ny: usize) -> Vec<u8> {
    let mut out = format!("P5\n{nx} {ny}\n255\n").into_bytes();
    out.extend(frame.iter().take(nx * ny).map(|&v| to_gray(v)));
    out
}

pub fn png_bytes(frame: &[f64], nx: usize, ny: usize) -> CliResult<Vec<u8>> {
    use image::ImageEncoder;
    let pixels: Vec<u8> = frame.iter().take(nx * ny).map(|&v| to_gray(v)).collect();
    let mut out = Vec::new();
    image::codecs::png::PngEncoder::new(&mut out)
        .write_image(&pixels, nx as u32, ny as u32, image::ExtendedColorType::L8)
        .map_err(|e| CliError::Io(format!("png encoding: {e}")))?;
    Ok(out)
}
