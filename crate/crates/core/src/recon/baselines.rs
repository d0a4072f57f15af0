//! Comparison reconstructors: binned static TV, binned compressed shape
//! sensing and Box-ℓ2 temporal regularization.

use rayon::prelude::*;

use crate::error::{dim_err, param_err, Result};
use crate::projector::{ImageGrid, SequenceProjector, Sinogram};
use crate::recon::dss::{
    binned_backprojection, initial_levelset, run_shape_sensing, GrayLevels, ReconConfig, ShapeProblem, ShapeResult,
};
use crate::recon::optim::{projected_gradient, BbStep, LineSearchConfig, Objective, PgOptions, PgResult};
use crate::recon::tv::{tv_add_gradient, tv_value};
use crate::transforms::{make_spatial_mask, DctBasis, DctDims};
use crate::volume::ImageSequence;

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineConfig {
    pub bin_size: usize,
    pub alpha_tv: f64,
    pub beta_temporal: f64,
    pub tv_mu: f64,
    pub max_iters: usize,
    /// Stop when an accepted step improves the objective by less than this
    /// fraction of its value.
    pub rel_tol: f64,
    /// ℓ1 radius for CSS; `None` uses the initializer's norm.
    pub css_tau: Option<f64>,
    /// Annealing and line-search settings for CSS. Its `tau` is ignored in
    /// favour of `css_tau`.
    pub css: ReconConfig,
    pub line_search: LineSearchConfig,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            bin_size: 36,
            alpha_tv: 0.1,
            beta_temporal: 1.0,
            tv_mu: 1e-6,
            max_iters: 1000,
            rel_tol: 0.0,
            css_tau: None,
            css: ReconConfig::default(),
            line_search: LineSearchConfig::default(),
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bin_size == 0 {
            return param_err("bin size must be at least 1");
        }
        if !(self.alpha_tv >= 0.0 && self.alpha_tv.is_finite()) {
            return param_err(format!("TV weight must be non-negative, got {}", self.alpha_tv));
        }
        if !(self.beta_temporal >= 0.0 && self.beta_temporal.is_finite()) {
            return param_err(format!("temporal weight must be non-negative, got {}", self.beta_temporal));
        }
        if !(self.tv_mu > 0.0 && self.tv_mu.is_finite()) {
            return param_err(format!("TV smoothing must be positive, got {}", self.tv_mu));
        }
        if self.max_iters == 0 {
            return param_err("max_iters must be at least 1");
        }
        if !(self.rel_tol >= 0.0) {
            return param_err("rel_tol must be non-negative");
        }
        if let Some(t) = self.css_tau {
            if !(t > 0.0 && t.is_finite()) {
                return param_err(format!("css_tau must be positive, got {t}"));
            }
        }
        self.line_search.validate()
    }

    fn pg_options(&self) -> PgOptions {
        PgOptions { max_iters: self.max_iters, rel_tol: self.rel_tol, line_search: self.line_search }
    }
}

/// Contiguous groups of `bin` frames; the last group may be shorter.
pub fn bin_measurements(sino: &Sinogram, bin: usize) -> Result<Vec<Sinogram>> {
    if bin == 0 || bin > sino.frames() {
        return param_err(format!("bin size {bin} outside 1..={}", sino.frames()));
    }
    (0..sino.frames()).step_by(bin).map(|start| sino.slice_frames(start, bin.min(sino.frames() - start))).collect()
}

fn clamp_unit(v: &mut [f64]) -> Result<()> {
    v.iter_mut().for_each(|x| *x = x.clamp(0.0, 1.0));
    Ok(())
}

/// `Σ_t ‖A_t x − y_t‖² + α TV_μ(x)` for one static image observed at every
/// angle of a bin.
pub struct StaticTvObjective {
    projector: SequenceProjector,
    data: Vec<f64>,
    alpha_tv: f64,
    mu: f64,
}

impl StaticTvObjective {
    pub fn new(bin: &Sinogram, grid: &ImageGrid, alpha_tv: f64, mu: f64) -> Self {
        Self {
            projector: SequenceProjector::for_schedule(*grid, bin.detector, &bin.schedule),
            data: bin.as_slice().to_vec(),
            alpha_tv,
            mu,
        }
    }

    fn eval(&self, x: &[f64], grad: Option<&mut [f64]>) -> Result<f64> {
        let grid = self.projector.grid();
        if x.len() != grid.len() {
            return dim_err(format!("image has {} pixels, grid has {}", x.len(), grid.len()));
        }
        let n_det = self.projector.detector().n_det;
        let mut res = vec![0.0; n_det];
        let mut value = 0.0;
        let mut grad = grad;
        for r in 0..self.projector.rows() {
            let m = self.projector.matrix(r);
            m.forward_into(x, &mut res);
            for (v, y) in res.iter_mut().zip(&self.data[r * n_det..(r + 1) * n_det]) {
                *v -= y;
            }
            value += res.iter().map(|v| v * v).sum::<f64>();
            if let Some(g) = grad.as_deref_mut() {
                res.iter_mut().for_each(|v| *v *= 2.0);
                m.adjoint_add(&res, g);
            }
        }
        if self.alpha_tv > 0.0 {
            value += self.alpha_tv
                * match grad {
                    Some(g) => tv_add_gradient(x, grid.nx, grid.ny, self.mu, self.alpha_tv, g),
                    None => tv_value(x, grid.nx, grid.ny, self.mu),
                };
        }
        Ok(value)
    }
}

impl Objective for StaticTvObjective {
    fn value(&self, x: &[f64]) -> Result<f64> {
        self.eval(x, None)
    }

    fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let mut g = vec![0.0; x.len()];
        let v = self.eval(x, Some(&mut g))?;
        Ok((v, g))
    }
}

/// Box-constrained TV reconstruction of one bin, started from zero.
pub fn static_tv_reconstruct(bin: &Sinogram, grid: &ImageGrid, cfg: &BaselineConfig) -> Result<PgResult> {
    cfg.validate()?;
    let obj = StaticTvObjective::new(bin, grid, cfg.alpha_tv, cfg.tv_mu);
    projected_gradient(&obj, &vec![0.0; grid.len()], clamp_unit, &cfg.pg_options(), &mut BbStep::default())
}

/// Compressed shape sensing of one bin: a single spatial level-set
/// function with a truncated 2-D DCT, observed by every row of the bin.
pub fn css_reconstruct(bin: &Sinogram, grid: &ImageGrid, cfg: &BaselineConfig) -> Result<ShapeResult> {
    cfg.validate()?;
    let shape = ReconConfig { tau: cfg.css_tau, ..cfg.css.clone() };
    shape.validate()?;
    let dims = DctDims::new(grid.nx, grid.ny, 1)?;
    let basis = DctBasis::new(dims, make_spatial_mask(&dims, shape.dct_fraction)?)?;
    let projector = SequenceProjector::for_schedule(*grid, bin.detector, &bin.schedule);
    let mut problem = ShapeProblem::new(projector, bin.as_slice().to_vec(), &vec![0; bin.frames()], basis)?;
    let bp = binned_backprojection(bin, grid, bin.frames())?;
    let recon = ImageSequence::from_vec(grid.nx, grid.ny, 1, bp.frame(0).to_vec())?;
    let phi0 = initial_levelset(&recon, &GrayLevels::binary())?;
    run_shape_sensing(&mut problem, &phi0, &shape, false)
}

/// Spreads one image per bin over the bin's frames.
pub fn replicate_bins(images: &[Vec<f64>], bins: &[Sinogram], grid: &ImageGrid) -> Result<ImageSequence> {
    if images.len() != bins.len() {
        return dim_err("one image per bin is required");
    }
    let frames: usize = bins.iter().map(Sinogram::frames).sum();
    let mut out = ImageSequence::zeros(grid.nx, grid.ny, frames);
    let mut t = 0;
    for (img, bin) in images.iter().zip(bins) {
        if img.len() != grid.len() {
            return dim_err("bin image does not match grid");
        }
        for _ in 0..bin.frames() {
            out.frame_mut(t).copy_from_slice(img);
            t += 1;
        }
    }
    Ok(out)
}

/// Outcome of a binned baseline over a whole sequence.
#[derive(Debug, Clone)]
pub struct BinnedResult {
    pub images: ImageSequence,
    pub bin_sizes: Vec<usize>,
    /// Accepted steps per bin.
    pub steps: Vec<usize>,
}

/// Static TV on every bin, replicated across frames.
pub fn static_tv_sequence(sino: &Sinogram, grid: &ImageGrid, cfg: &BaselineConfig) -> Result<BinnedResult> {
    let bins = bin_measurements(sino, cfg.bin_size.min(sino.frames()))?;
    let results: Vec<PgResult> = bins.par_iter().map(|b| static_tv_reconstruct(b, grid, cfg)).collect::<Result<_>>()?;
    let images: Vec<Vec<f64>> = results.iter().map(|r| r.x.clone()).collect();
    Ok(BinnedResult {
        images: replicate_bins(&images, &bins, grid)?,
        bin_sizes: bins.iter().map(Sinogram::frames).collect(),
        steps: results.iter().map(|r| r.steps.len()).collect(),
    })
}

/// CSS on every bin, replicated across frames.
pub fn css_sequence(
    sino: &Sinogram,
    grid: &ImageGrid,
    cfg: &BaselineConfig,
) -> Result<(BinnedResult, Vec<ShapeResult>)> {
    let bins = bin_measurements(sino, cfg.bin_size.min(sino.frames()))?;
    let results: Vec<ShapeResult> = bins.par_iter().map(|b| css_reconstruct(b, grid, cfg)).collect::<Result<_>>()?;
    let images: Vec<Vec<f64>> = results.iter().map(|r| r.images.frame(0).to_vec()).collect();
    let binned = BinnedResult {
        images: replicate_bins(&images, &bins, grid)?,
        bin_sizes: bins.iter().map(Sinogram::frames).collect(),
        steps: results.iter().map(|r| r.trace.len()).collect(),
    };
    Ok((binned, results))
}

/// `Σ_t ‖A_t x_t − y_t‖² + α Σ_t TV_μ(x_t) + β Σ_t ‖x_{t+1} − x_t‖²` over a
/// frame-major stack.
pub struct BoxL2Objective {
    projector: SequenceProjector,
    data: Vec<f64>,
    alpha_tv: f64,
    beta: f64,
    mu: f64,
}

impl BoxL2Objective {
    pub fn new(sino: &Sinogram, grid: &ImageGrid, alpha_tv: f64, beta: f64, mu: f64) -> Self {
        Self {
            projector: SequenceProjector::for_schedule(*grid, sino.detector, &sino.schedule),
            data: sino.as_slice().to_vec(),
            alpha_tv,
            beta,
            mu,
        }
    }

    fn eval(&self, x: &[f64], want_grad: bool) -> Result<(f64, Option<Vec<f64>>)> {
        let grid = *self.projector.grid();
        let n = grid.len();
        let frames = self.projector.rows();
        if x.len() != n * frames {
            return dim_err(format!("stack has {} values, expected {}", x.len(), n * frames));
        }
        let n_det = self.projector.detector().n_det;
        let parts: Vec<(f64, Option<Vec<f64>>)> = (0..frames)
            .into_par_iter()
            .map(|t| {
                let xt = &x[t * n..(t + 1) * n];
                let m = self.projector.matrix(t);
                let mut res = m.forward(xt);
                for (v, y) in res.iter_mut().zip(&self.data[t * n_det..(t + 1) * n_det]) {
                    *v -= y;
                }
                let mut value: f64 = res.iter().map(|v| v * v).sum();
                let mut g = want_grad.then(|| vec![0.0; n]);
                if let Some(g) = g.as_mut() {
                    res.iter_mut().for_each(|v| *v *= 2.0);
                    m.adjoint_add(&res, g);
                }
                if self.alpha_tv > 0.0 {
                    value += self.alpha_tv
                        * match g.as_mut() {
                            Some(g) => tv_add_gradient(xt, grid.nx, grid.ny, self.mu, self.alpha_tv, g),
                            None => tv_value(xt, grid.nx, grid.ny, self.mu),
                        };
                }
                (value, g)
            })
            .collect();
        let mut value: f64 = parts.iter().map(|p| p.0).sum();
        let mut grad = want_grad.then(|| {
            let mut g = Vec::with_capacity(x.len());
            for (_, p) in &parts {
                g.extend_from_slice(p.as_ref().expect("gradient requested"));
            }
            g
        });
        if self.beta > 0.0 {
            for t in 0..frames.saturating_sub(1) {
                for i in 0..n {
                    let d = x[(t + 1) * n + i] - x[t * n + i];
                    value += self.beta * d * d;
                    if let Some(g) = grad.as_mut() {
                        g[(t + 1) * n + i] += 2.0 * self.beta * d;
                        g[t * n + i] -= 2.0 * self.beta * d;
                    }
                }
            }
        }
        Ok((value, grad))
    }
}

impl Objective for BoxL2Objective {
    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.eval(x, false)?.0)
    }

    fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (v, g) = self.eval(x, true)?;
        Ok((v, g.expect("gradient requested")))
    }
}

/// Coupled Box-ℓ2 reconstruction over all frames, started from zero.
pub fn boxl2_reconstruct(sino: &Sinogram, grid: &ImageGrid, cfg: &BaselineConfig) -> Result<(ImageSequence, PgResult)> {
    cfg.validate()?;
    if sino.frames() < 2 {
        return param_err("Box-l2 needs at least two frames");
    }
    let obj = BoxL2Objective::new(sino, grid, cfg.alpha_tv, cfg.beta_temporal, cfg.tv_mu);
    let x0 = vec![0.0; grid.len() * sino.frames()];
    let r = projected_gradient(&obj, &x0, clamp_unit, &cfg.pg_options(), &mut BbStep::default())?;
    Ok((ImageSequence::from_vec(grid.nx, grid.ny, sino.frames(), r.x.clone())?, r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projector::{AngleSchedule, DetectorArray};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sino(frames: usize, n: usize) -> Sinogram {
        let s = AngleSchedule::new(0.0, 5.0, frames).unwrap();
        Sinogram::zeros(s, DetectorArray::new(n, 1.0).unwrap())
    }

    #[test]
    fn bins_are_contiguous_with_short_tail() {
        let s = sino(10, 4);
        let sizes: Vec<usize> = bin_measurements(&s, 4).unwrap().iter().map(|b| b.frames()).collect();
        assert_eq!(sizes, vec![4, 4, 2]);
        assert_eq!(bin_measurements(&s, 10).unwrap().len(), 1);
        assert_eq!(bin_measurements(&s, 1).unwrap().len(), 10);
        assert!(bin_measurements(&s, 0).is_err());
        assert!(bin_measurements(&s, 11).is_err());
    }

    #[test]
    fn zero_data_gives_zero_image() {
        let grid = ImageGrid::square(8).unwrap();
        let cfg = BaselineConfig { max_iters: 50, ..Default::default() };
        let r = static_tv_reconstruct(&sino(4, 8), &grid, &cfg).unwrap();
        assert!(r.x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn boxl2_without_coupling_is_sum_of_static_objectives() {
        let grid = ImageGrid::square(8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = AngleSchedule::new(0.0, 5.0, 3).unwrap();
        let data: Vec<f64> = (0..24).map(|_| rng.random::<f64>()).collect();
        let s = Sinogram::new(s, DetectorArray::new(8, 1.0).unwrap(), data).unwrap();
        let x: Vec<f64> = (0..192).map(|_| rng.random::<f64>()).collect();
        let coupled = BoxL2Objective::new(&s, &grid, 0.3, 0.0, 1e-3).value(&x).unwrap();
        let split: f64 = (0..3)
            .map(|t| {
                let b = s.slice_frames(t, 1).unwrap();
                StaticTvObjective::new(&b, &grid, 0.3, 1e-3).value(&x[t * 64..(t + 1) * 64]).unwrap()
            })
            .sum();
        assert!((coupled - split).abs() <= 1e-8 * split.abs().max(1.0));
    }

    #[test]
    fn boxl2_gradient_matches_finite_differences() {
        let grid = ImageGrid::square(6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = AngleSchedule::new(10.0, 35.0, 3).unwrap();
        let data: Vec<f64> = (0..18).map(|_| rng.random::<f64>()).collect();
        let s = Sinogram::new(s, DetectorArray::new(6, 1.0).unwrap(), data).unwrap();
        let obj = BoxL2Objective::new(&s, &grid, 0.2, 0.7, 0.05);
        let x: Vec<f64> = (0..108).map(|_| rng.random::<f64>()).collect();
        let (_, g) = obj.value_and_gradient(&x).unwrap();
        for i in 0..x.len() {
            let h = 1e-6;
            let (mut p, mut m) = (x.clone(), x.clone());
            p[i] += h;
            m[i] -= h;
            let fd = (obj.value(&p).unwrap() - obj.value(&m).unwrap()) / (2.0 * h);
            assert!((fd - g[i]).abs() <= 1e-5 * fd.abs().max(1.0), "{i}: {fd} vs {}", g[i]);
        }
    }
}
