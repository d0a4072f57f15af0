//! Dynamic shape sensing: the object is `h_ε(Ψα)` where `Ψ` is a truncated
//! spatiotemporal DCT, and `α` is fitted to single-shot projections under an
//! ℓ1-ball constraint.
//!
//! [`ShapeProblem`] is shared with the per-bin compressed shape sensing
//! baseline: it maps every measurement row to one frame of the synthesized
//! volume, so a static bin is simply a one-frame volume observed by many
//! rows.

use rayon::prelude::*;

use crate::error::{dim_err, param_err, Error, Result};
use crate::levelset::{dirac_prime_unchecked, dirac_unchecked, epsilon_from_phi, heaviside_unchecked, sharp_step};
use crate::metrics::otsu_threshold;
use crate::projector::{ImageGrid, SequenceProjector, Sinogram};
use crate::recon::l1ball::project_l1_ball_in_place;
use crate::recon::optim::{backtracking, BbStep, LineSearchConfig, LineSearchOutcome, Objective};
use crate::recon::trace::TraceRow;
use crate::transforms::{make_mask, DctBasis, DctCoeffs, DctDims, TruncationMask};
use crate::volume::ImageSequence;

/// Solver settings for the shape-sensing reconstructors.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconConfig {
    /// ℓ1 radius; `None` uses the ℓ1 norm of the initial coefficients.
    pub tau: Option<f64>,
    pub outer_iters: usize,
    pub inner_iters: usize,
    pub kappa0: f64,
    pub kappa_decay: f64,
    /// Kept fraction of frequencies per axis.
    pub dct_fraction: f64,
    pub ls_shrink: f64,
    pub ls_c: f64,
    pub ls_max: usize,
    /// Frames per bin of the backprojection initializer.
    pub init_bin: usize,
}

impl Default for ReconConfig {
    fn default() -> Self {
        Self {
            tau: None,
            outer_iters: 20,
            inner_iters: 30,
            kappa0: 0.1,
            kappa_decay: 0.8,
            dct_fraction: 0.01,
            ls_shrink: 0.5,
            ls_c: 1e-4,
            ls_max: 30,
            init_bin: 36,
        }
    }
}

impl ReconConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(t) = self.tau {
            if !(t > 0.0 && t.is_finite()) {
                return param_err(format!("tau must be positive, got {t}"));
            }
        }
        if self.outer_iters == 0 || self.inner_iters == 0 {
            return param_err("outer and inner iteration counts must be at least 1");
        }
        if !(self.kappa0 > 0.0 && self.kappa0 <= 1.0) {
            return param_err(format!("kappa0 must lie in (0, 1], got {}", self.kappa0));
        }
        if !(self.kappa_decay > 0.0 && self.kappa_decay < 1.0) {
            return param_err(format!("kappa decay must lie in (0, 1), got {}", self.kappa_decay));
        }
        if !(self.dct_fraction > 0.0 && self.dct_fraction <= 1.0) {
            return param_err(format!("DCT fraction must lie in (0, 1], got {}", self.dct_fraction));
        }
        if self.ls_max == 0 || self.init_bin == 0 {
            return param_err("ls_max and init_bin must be at least 1");
        }
        self.line_search().validate()
    }

    pub fn line_search(&self) -> LineSearchConfig {
        LineSearchConfig { shrink: self.ls_shrink, c: self.ls_c, max_backtracks: self.ls_max }
    }
}

/// Optional model extensions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExtensionConfig {
    /// Per-frame attenuation. When set the values are the starting point and
    /// are re-estimated after every inner loop.
    pub attenuation: Option<Vec<f64>>,
    /// Known gray levels `u_1 < … < u_m`.
    pub gray_levels: Option<Vec<f64>>,
    /// Weight of the boundary-length penalty `λ Σ ‖δ_ε(φ)‖²`.
    pub perimeter_lambda: Option<f64>,
}

impl ExtensionConfig {
    pub fn validate(&self, frames: usize) -> Result<()> {
        if let Some(u) = &self.attenuation {
            if u.len() != frames {
                return dim_err(format!("attenuation has {} entries, expected {frames}", u.len()));
            }
            if u.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return param_err("attenuation values must be finite and non-negative");
            }
        }
        if let Some(l) = &self.gray_levels {
            GrayLevels::new(l)?;
        }
        if let Some(l) = self.perimeter_lambda {
            if !(l >= 0.0 && l.is_finite()) {
                return param_err(format!("perimeter weight must be non-negative, got {l}"));
            }
        }
        Ok(())
    }
}

/// Intensity map `φ ↦ Σ_j w_j h(φ − s_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayLevels {
    terms: Vec<(f64, f64)>,
}

impl GrayLevels {
    pub fn binary() -> Self {
        Self { terms: vec![(1.0, 0.0)] }
    }

    /// Multi-material map for strictly increasing positive levels: the first
    /// term is `u_1 h(φ − u_1)`, each further term
    /// `(u_p − u_{p−1}) h(φ − (u_p − u_{p−1}))`.
    pub fn new(levels: &[f64]) -> Result<Self> {
        if levels.is_empty() {
            return param_err("at least one gray level is required");
        }
        if levels.iter().any(|u| !(*u > 0.0 && u.is_finite())) {
            return param_err("gray levels must be positive");
        }
        if levels.windows(2).any(|w| w[1] <= w[0]) {
            return param_err("gray levels must be strictly increasing");
        }
        let mut terms = vec![(levels[0], levels[0])];
        for w in levels.windows(2) {
            let d = w[1] - w[0];
            terms.push((d, d));
        }
        Ok(Self { terms })
    }

    fn value(&self, phi: f64, eps: f64) -> f64 {
        self.terms.iter().map(|&(w, s)| w * heaviside_unchecked(phi - s, eps)).sum()
    }

    fn derivative(&self, phi: f64, eps: f64) -> f64 {
        self.terms.iter().map(|&(w, s)| w * dirac_unchecked(phi - s, eps)).sum()
    }

    fn sharp(&self, phi: f64) -> f64 {
        self.terms.iter().map(|&(w, s)| w * sharp_step(phi - s)).sum()
    }

    fn smallest_shift(&self) -> f64 {
        self.terms.iter().map(|t| t.1).fold(f64::INFINITY, f64::min)
    }

    fn largest_shift(&self) -> f64 {
        self.terms.iter().map(|t| t.1).fold(0.0, f64::max)
    }
}

/// Least-squares shape fit: `Σ_r ‖A_r(u_t · I(Ψα)_t) − y_r‖² + λ Σ ‖δ_ε(Ψα)‖²`,
/// where row `r` observes frame `t = frame_of_row[r]`.
#[derive(Debug, Clone)]
pub struct ShapeProblem {
    projector: SequenceProjector,
    data: Vec<f64>,
    rows_of_frame: Vec<Vec<usize>>,
    basis: DctBasis,
    levels: GrayLevels,
    attenuation: Vec<f64>,
    perimeter: f64,
}

impl ShapeProblem {
    pub fn new(projector: SequenceProjector, data: Vec<f64>, frame_of_row: &[usize], basis: DctBasis) -> Result<Self> {
        let dims = *basis.dims();
        let grid = projector.grid();
        if grid.nx != dims.nx || grid.ny != dims.ny {
            return dim_err("projector grid and DCT dims disagree");
        }
        if frame_of_row.len() != projector.rows() {
            return dim_err("row-to-frame map must cover every projector row");
        }
        if data.len() != projector.rows() * projector.detector().n_det {
            return dim_err("measurement data does not match projector rows");
        }
        let mut rows_of_frame = vec![Vec::new(); dims.nt];
        for (r, &t) in frame_of_row.iter().enumerate() {
            if t >= dims.nt {
                return dim_err(format!("row {r} maps to frame {t}, volume has {}", dims.nt));
            }
            rows_of_frame[t].push(r);
        }
        Ok(Self {
            projector,
            data,
            rows_of_frame,
            basis,
            levels: GrayLevels::binary(),
            attenuation: vec![1.0; dims.nt],
            perimeter: 0.0,
        })
    }

    /// One frame per sinogram row with a `make_mask(fraction)` basis.
    pub fn dynamic(sino: &Sinogram, grid: &ImageGrid, fraction: f64) -> Result<Self> {
        let dims = DctDims::new(grid.nx, grid.ny, sino.frames())?;
        let basis = DctBasis::new(dims, make_mask(&dims, fraction)?)?;
        Self::with_basis(sino, grid, basis)
    }

    /// One frame per sinogram row with the given basis.
    pub fn with_basis(sino: &Sinogram, grid: &ImageGrid, basis: DctBasis) -> Result<Self> {
        if basis.dims().nt != sino.frames() {
            return dim_err("basis frame count differs from sinogram");
        }
        let projector = SequenceProjector::for_schedule(*grid, sino.detector, &sino.schedule);
        let map: Vec<usize> = (0..sino.frames()).collect();
        Self::new(projector, sino.as_slice().to_vec(), &map, basis)
    }

    pub fn with_gray_levels(mut self, levels: GrayLevels) -> Self {
        self.levels = levels;
        self
    }

    pub fn with_perimeter(mut self, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return param_err(format!("perimeter weight must be non-negative, got {lambda}"));
        }
        self.perimeter = lambda;
        Ok(self)
    }

    pub fn with_attenuation(mut self, u: Vec<f64>) -> Result<Self> {
        if u.len() != self.basis.dims().nt {
            return dim_err("attenuation length must equal frame count");
        }
        self.attenuation = u;
        Ok(self)
    }

    pub fn basis(&self) -> &DctBasis {
        &self.basis
    }

    pub fn attenuation(&self) -> &[f64] {
        &self.attenuation
    }

    pub fn gray_levels(&self) -> &GrayLevels {
        &self.levels
    }

    pub fn n_coeffs(&self) -> usize {
        self.basis.mask().len()
    }

    pub fn synthesize(&self, alpha: &[f64]) -> Result<ImageSequence> {
        let d = self.basis.dims();
        ImageSequence::from_vec(d.nx, d.ny, d.nt, self.basis.synthesize(alpha)?)
    }

    /// Smooth image `u_t · I_ε(φ)`.
    pub fn smooth_image(&self, phi: &ImageSequence, eps: f64) -> ImageSequence {
        let mut out = phi.clone();
        for t in 0..phi.frames() {
            let u = self.attenuation[t];
            for v in out.frame_mut(t) {
                *v = u * self.levels.value(*v, eps);
            }
        }
        out
    }

    /// Final image with the exact step in place of the smooth Heaviside.
    pub fn sharp_image(&self, phi: &ImageSequence) -> ImageSequence {
        let mut out = phi.clone();
        for t in 0..phi.frames() {
            let u = self.attenuation[t];
            for v in out.frame_mut(t) {
                *v = u * self.levels.sharp(*v);
            }
        }
        out
    }

    fn frame_terms(&self, phi_t: &[f64], t: usize, eps: f64, want_grad: bool) -> (f64, Option<Vec<f64>>) {
        let u = self.attenuation[t];
        let n_det = self.projector.detector().n_det;
        let img: Vec<f64> = phi_t.iter().map(|&p| u * self.levels.value(p, eps)).collect();
        let mut value = 0.0;
        let mut back = if want_grad { Some(vec![0.0; phi_t.len()]) } else { None };
        let mut res = vec![0.0; n_det];
        for &r in &self.rows_of_frame[t] {
            let m = self.projector.matrix(r);
            m.forward_into(&img, &mut res);
            for (v, y) in res.iter_mut().zip(&self.data[r * n_det..(r + 1) * n_det]) {
                *v -= y;
            }
            value += res.iter().map(|v| v * v).sum::<f64>();
            if let Some(b) = back.as_mut() {
                m.adjoint_add(&res, b);
            }
        }
        if self.perimeter > 0.0 {
            value += self.perimeter * phi_t.iter().map(|&p| dirac_unchecked(p, eps).powi(2)).sum::<f64>();
        }
        let grad = back.map(|mut b| {
            for (g, &p) in b.iter_mut().zip(phi_t) {
                *g *= 2.0 * u * self.levels.derivative(p, eps);
                if self.perimeter > 0.0 {
                    *g += 2.0 * self.perimeter * dirac_unchecked(p, eps) * dirac_prime_unchecked(p, eps);
                }
            }
            b
        });
        (value, grad)
    }

    fn evaluate(&self, alpha: &[f64], eps: f64, want_grad: bool) -> Result<(f64, Option<Vec<f64>>)> {
        if !(eps > 0.0 && eps.is_finite()) {
            return param_err(format!("Heaviside width must be positive, got {eps}"));
        }
        let phi = self.synthesize(alpha)?;
        let parts: Vec<(f64, Option<Vec<f64>>)> =
            (0..phi.frames()).into_par_iter().map(|t| self.frame_terms(phi.frame(t), t, eps, want_grad)).collect();
        let value = parts.iter().map(|p| p.0).sum();
        if !want_grad {
            return Ok((value, None));
        }
        let mut dphi = Vec::with_capacity(phi.as_slice().len());
        for (_, g) in parts {
            dphi.extend(g.expect("gradient requested"));
        }
        Ok((value, Some(self.basis.analyze(&dphi)?)))
    }

    pub fn objective(&self, alpha: &[f64], eps: f64) -> Result<f64> {
        Ok(self.evaluate(alpha, eps, false)?.0)
    }

    pub fn objective_and_gradient(&self, alpha: &[f64], eps: f64) -> Result<(f64, Vec<f64>)> {
        let (v, g) = self.evaluate(alpha, eps, true)?;
        Ok((v, g.expect("gradient requested")))
    }

    /// Objective at a fixed Heaviside width.
    pub fn at_width(&self, eps: f64) -> FixedWidth<'_> {
        FixedWidth { problem: self, eps }
    }

    /// Backtracking search along `−gradient` with projection onto the ℓ1
    /// ball of radius `tau`.
    #[allow(clippy::too_many_arguments)]
    pub fn line_search(
        &self,
        alpha: &[f64],
        value: f64,
        gradient: &[f64],
        eps: f64,
        tau: f64,
        step0: f64,
        cfg: &LineSearchConfig,
    ) -> Result<LineSearchOutcome> {
        backtracking(&self.at_width(eps), alpha, value, gradient, step0, |v| project_l1_ball_in_place(v, tau), cfg)
    }

    /// Closed-form per-frame attenuation for fixed `α`:
    /// `u_t = ⟨A_t I, y_t⟩ / ‖A_t I‖²`, clamped at zero. Frames whose shape
    /// projects to nothing keep their previous value.
    pub fn update_attenuation(&mut self, alpha: &[f64], eps: f64) -> Result<()> {
        let phi = self.synthesize(alpha)?;
        let n_det = self.projector.detector().n_det;
        let updates: Vec<Option<f64>> = (0..phi.frames())
            .into_par_iter()
            .map(|t| {
                let img: Vec<f64> = phi.frame(t).iter().map(|&p| self.levels.value(p, eps)).collect();
                let (mut num, mut den) = (0.0, 0.0);
                let mut proj = vec![0.0; n_det];
                for &r in &self.rows_of_frame[t] {
                    self.projector.matrix(r).forward_into(&img, &mut proj);
                    let y = &self.data[r * n_det..(r + 1) * n_det];
                    num += proj.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
                    den += proj.iter().map(|a| a * a).sum::<f64>();
                }
                (den > 0.0).then(|| (num / den).max(0.0))
            })
            .collect();
        for (u, new) in self.attenuation.iter_mut().zip(updates) {
            if let Some(v) = new {
                *u = v;
            }
        }
        Ok(())
    }
}

/// [`ShapeProblem`] with `ε` frozen, as an [`Objective`] over `α`.
pub struct FixedWidth<'a> {
    problem: &'a ShapeProblem,
    eps: f64,
}

impl Objective for FixedWidth<'_> {
    fn value(&self, x: &[f64]) -> Result<f64> {
        self.problem.objective(x, self.eps)
    }

    fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.problem.objective_and_gradient(x, self.eps)
    }
}

/// Unweighted backprojection of contiguous groups of `bin` rows, each
/// replicated across its frames and rescaled to `[0, 1]` over the volume.
pub fn binned_backprojection(sino: &Sinogram, grid: &ImageGrid, bin: usize) -> Result<ImageSequence> {
    if bin == 0 {
        return param_err("bin size must be at least 1");
    }
    let bin = bin.min(sino.frames());
    let projector = SequenceProjector::for_schedule(*grid, sino.detector, &sino.schedule);
    let n_det = sino.detector.n_det;
    let mut out = ImageSequence::zeros(grid.nx, grid.ny, sino.frames());
    let mut start = 0;
    while start < sino.frames() {
        let end = (start + bin).min(sino.frames());
        let mut img = vec![0.0; grid.len()];
        for r in start..end {
            projector.matrix(r).adjoint_add(&sino.as_slice()[r * n_det..(r + 1) * n_det], &mut img);
        }
        for t in start..end {
            out.frame_mut(t).copy_from_slice(&img);
        }
        start = end;
    }
    let lo = out.as_slice().iter().copied().fold(f64::INFINITY, f64::min);
    let hi = out.as_slice().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        return Err(Error::ConstantImage("backprojection is constant; no shape to initialize from".into()));
    }
    Ok(out.map(|v| (v - lo) / (hi - lo)))
}

/// Initial level-set function: the normalized backprojection minus its
/// Otsu threshold, shifted and scaled so multi-level maps start with the
/// foreground above the smallest level shift.
pub fn initial_levelset(recon: &ImageSequence, levels: &GrayLevels) -> Result<ImageSequence> {
    let thr = otsu_threshold(recon.as_slice())?;
    if levels == &GrayLevels::binary() {
        return Ok(recon.map(|v| v - thr));
    }
    let (lo, span) = (levels.smallest_shift(), levels.largest_shift().max(1.0));
    Ok(recon.map(|v| lo + 2.0 * span * (v - thr)))
}

/// Outcome of a shape-sensing run.
#[derive(Debug, Clone)]
pub struct ShapeResult {
    /// Final images (exact step applied to `Ψα`).
    pub images: ImageSequence,
    pub coeffs: DctCoeffs,
    pub phi: ImageSequence,
    pub tau: f64,
    pub trace: Vec<TraceRow>,
    /// Outer iterations (1-based) in which no step was accepted.
    pub stagnant_outer: Vec<usize>,
    pub attenuation: Vec<f64>,
}

impl ShapeResult {
    pub fn stagnated(&self) -> bool {
        !self.stagnant_outer.is_empty()
    }
}

/// Outer/inner annealed projected gradient on `α` starting from `phi0`.
///
/// Every outer iteration derives `ε = κ max|∇φ|` from the current iterate,
/// runs up to `inner_iters` projected-gradient steps at that width, and
/// shrinks `κ`. An inner loop ends early when the line search fails.
pub fn run_shape_sensing(
    problem: &mut ShapeProblem,
    phi0: &ImageSequence,
    cfg: &ReconConfig,
    update_attenuation: bool,
) -> Result<ShapeResult> {
    cfg.validate()?;
    let mut alpha = problem.basis().analyze(phi0.as_slice())?;
    let tau = match cfg.tau {
        Some(t) => t,
        None => {
            let n: f64 = alpha.iter().map(|v| v.abs()).sum();
            if n <= 0.0 {
                return Err(Error::FlatLevelSet);
            }
            n
        }
    };
    project_l1_ball_in_place(&mut alpha, tau)?;
    let ls = cfg.line_search();
    let mut bb = BbStep::default();
    let mut trace = Vec::new();
    let mut stagnant_outer = Vec::new();
    let mut kappa = cfg.kappa0;
    for q in 1..=cfg.outer_iters {
        let phi = problem.synthesize(&alpha)?;
        let eps = epsilon_from_phi(&phi, kappa)?;
        let mut accepted = 0;
        for p in 1..=cfg.inner_iters {
            let (value, grad) = problem.objective_and_gradient(&alpha, eps)?;
            if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Numerical(format!("non-finite objective at outer {q}, inner {p}")));
            }
            let step0 = bb.initial_step(&alpha, &grad);
            let out = problem.line_search(&alpha, value, &grad, eps, tau, step0, &ls)?;
            if out.stagnated() {
                break;
            }
            bb.record(&alpha, &grad);
            alpha = out.x;
            accepted += 1;
            trace.push(TraceRow {
                outer: q,
                inner: p,
                objective: out.value,
                step: out.step,
                epsilon: eps,
                l1_norm: alpha.iter().map(|v| v.abs()).sum(),
            });
        }
        if accepted == 0 {
            stagnant_outer.push(q);
        }
        if update_attenuation {
            problem.update_attenuation(&alpha, eps)?;
        }
        kappa *= cfg.kappa_decay;
    }
    let phi = problem.synthesize(&alpha)?;
    let images = problem.sharp_image(&phi);
    let basis = problem.basis();
    Ok(ShapeResult {
        images,
        coeffs: DctCoeffs::new(*basis.dims(), *basis.mask(), alpha)?,
        phi,
        tau,
        trace,
        stagnant_outer,
        attenuation: problem.attenuation().to_vec(),
    })
}

fn check_nonempty(sino: &Sinogram) -> Result<()> {
    if sino.frames() == 0 {
        return dim_err("empty sinogram");
    }
    Ok(())
}

/// Dynamic shape sensing with optional extensions.
pub fn dss_reconstruct_with(
    sino: &Sinogram,
    grid: &ImageGrid,
    cfg: &ReconConfig,
    ext: &ExtensionConfig,
) -> Result<ShapeResult> {
    cfg.validate()?;
    ext.validate(sino.frames())?;
    check_nonempty(sino)?;
    let mut problem = ShapeProblem::dynamic(sino, grid, cfg.dct_fraction)?;
    let levels = match &ext.gray_levels {
        Some(l) => GrayLevels::new(l)?,
        None => GrayLevels::binary(),
    };
    problem = problem.with_gray_levels(levels.clone());
    if let Some(l) = ext.perimeter_lambda {
        problem = problem.with_perimeter(l)?;
    }
    if let Some(u) = &ext.attenuation {
        problem = problem.with_attenuation(u.clone())?;
    }
    let recon = binned_backprojection(sino, grid, cfg.init_bin)?;
    let phi0 = initial_levelset(&recon, &levels)?;
    run_shape_sensing(&mut problem, &phi0, cfg, ext.attenuation.is_some())
}

/// Dynamic shape sensing of a binary object.
pub fn dss_reconstruct(sino: &Sinogram, grid: &ImageGrid, cfg: &ReconConfig) -> Result<ShapeResult> {
    dss_reconstruct_with(sino, grid, cfg, &ExtensionConfig::default())
}

/// Dynamic shape sensing with free per-frame attenuation, alternating
/// between gradient steps on `α` and exact updates of `u`. Starts from
/// `u ≡ 1` unless `ext.attenuation` provides a starting point.
pub fn dss_attenuation(
    sino: &Sinogram,
    grid: &ImageGrid,
    cfg: &ReconConfig,
    ext: &ExtensionConfig,
) -> Result<ShapeResult> {
    let mut ext = ext.clone();
    if ext.attenuation.is_none() {
        ext.attenuation = Some(vec![1.0; sino.frames()]);
    }
    dss_reconstruct_with(sino, grid, cfg, &ext)
}

/// `J(α) = Σ_t ‖A_t h_ε(Ψ_t α) − y_t‖²`.
pub fn objective(alpha: &DctCoeffs, sino: &Sinogram, grid: &ImageGrid, eps: f64) -> Result<f64> {
    let problem = ShapeProblem::with_basis(sino, grid, DctBasis::new(alpha.dims, alpha.mask)?)?;
    problem.objective(&alpha.values, eps)
}

/// `∇J(α)`.
pub fn gradient(alpha: &DctCoeffs, sino: &Sinogram, grid: &ImageGrid, eps: f64) -> Result<Vec<f64>> {
    let problem = ShapeProblem::with_basis(sino, grid, DctBasis::new(alpha.dims, alpha.mask)?)?;
    Ok(problem.objective_and_gradient(&alpha.values, eps)?.1)
}

/// Smooth multi-level image `I_t(α)` for known gray levels.
pub fn multilevel_image(alpha: &DctCoeffs, eps: f64, levels: &[f64]) -> Result<ImageSequence> {
    if !(eps > 0.0 && eps.is_finite()) {
        return param_err(format!("Heaviside width must be positive, got {eps}"));
    }
    let gl = GrayLevels::new(levels)?;
    let basis = DctBasis::new(alpha.dims, alpha.mask)?;
    let phi = basis.synthesize_coeffs(alpha)?;
    Ok(phi.map(|p| gl.value(p, eps)))
}

/// Boundary-length penalty `λ Σ ‖δ_ε(Ψα)‖²` and its gradient in `α`.
pub fn perimeter_penalty(alpha: &DctCoeffs, eps: f64, lambda: f64) -> Result<(f64, Vec<f64>)> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return param_err(format!("perimeter weight must be non-negative, got {lambda}"));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return param_err(format!("Heaviside width must be positive, got {eps}"));
    }
    let basis = DctBasis::new(alpha.dims, alpha.mask)?;
    let phi = basis.synthesize(&alpha.values)?;
    let value = lambda * phi.iter().map(|&p| dirac_unchecked(p, eps).powi(2)).sum::<f64>();
    let dphi: Vec<f64> =
        phi.iter().map(|&p| 2.0 * lambda * dirac_unchecked(p, eps) * dirac_prime_unchecked(p, eps)).collect();
    Ok((value, basis.analyze(&dphi)?))
}

/// Coefficient mask a dynamic run on this geometry would use.
pub fn dynamic_mask(grid: &ImageGrid, frames: usize, fraction: f64) -> Result<TruncationMask> {
    make_mask(&DctDims::new(grid.nx, grid.ny, frames)?, fraction)
}
