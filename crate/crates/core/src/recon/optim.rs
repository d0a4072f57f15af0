//! Projected gradient descent with Armijo backtracking and a
//! Barzilai-Borwein initial step.

use crate::error::{param_err, Error, Result};
use crate::volume::{dot, norm_sq};

/// A differentiable objective over a flat parameter vector.
pub trait Objective {
    fn value(&self, x: &[f64]) -> Result<f64>;
    fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchConfig {
    /// Backtracking factor applied to the step on each rejection.
    pub shrink: f64,
    /// Armijo sufficient-decrease constant.
    pub c: f64,
    pub max_backtracks: usize,
}

impl Default for LineSearchConfig {
    fn default() -> Self {
        Self { shrink: 0.5, c: 1e-4, max_backtracks: 30 }
    }
}

impl LineSearchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return param_err(format!("line-search shrink must lie in (0, 1), got {}", self.shrink));
        }
        if !(self.c > 0.0 && self.c < 1.0) {
            return param_err(format!("Armijo constant must lie in (0, 1), got {}", self.c));
        }
        Ok(())
    }
}

/// Outcome of one backtracking search. `step == 0` means no trial step
/// satisfied the decrease condition and `x` is unchanged.
#[derive(Debug, Clone)]
pub struct LineSearchOutcome {
    pub step: f64,
    pub x: Vec<f64>,
    pub value: f64,
    pub backtracks: usize,
}

impl LineSearchOutcome {
    pub fn stagnated(&self) -> bool {
        self.step == 0.0
    }
}

/// Largest `γ = γ0 · shrink^k`, `k ≤ max_backtracks`, with
/// `f(x⁺) ≤ f(x) − c ⟨g, x − x⁺⟩` where `x⁺ = P(x − γ g)`. Without an active
/// projection the decrease term is `c γ ‖g‖²`.
pub fn backtracking<O, P>(
    obj: &O,
    x: &[f64],
    fx: f64,
    grad: &[f64],
    step0: f64,
    project: P,
    cfg: &LineSearchConfig,
) -> Result<LineSearchOutcome>
where
    O: Objective + ?Sized,
    P: Fn(&mut [f64]) -> Result<()>,
{
    let gg = norm_sq(grad);
    if gg == 0.0 {
        return Ok(LineSearchOutcome { step: step0, x: x.to_vec(), value: fx, backtracks: 0 });
    }
    let mut step = step0;
    let mut trial = vec![0.0; x.len()];
    for k in 0..=cfg.max_backtracks {
        for ((t, &xi), &gi) in trial.iter_mut().zip(x).zip(grad) {
            *t = xi - step * gi;
        }
        project(&mut trial)?;
        let ft = obj.value(&trial)?;
        let decrease: f64 = grad.iter().zip(x).zip(&trial).map(|((g, a), b)| g * (a - b)).sum();
        if ft.is_finite() && decrease > 0.0 && ft <= fx - cfg.c * decrease {
            return Ok(LineSearchOutcome { step, x: trial, value: ft, backtracks: k });
        }
        step *= cfg.shrink;
    }
    Ok(LineSearchOutcome { step: 0.0, x: x.to_vec(), value: fx, backtracks: cfg.max_backtracks })
}

/// Barzilai-Borwein step memory.
#[derive(Debug, Clone, Default)]
pub struct BbStep {
    prev: Option<(Vec<f64>, Vec<f64>)>,
}

impl BbStep {
    /// `⟨s, s⟩ / ⟨s, y⟩` from the last recorded iterate, `1 / ‖g‖` when no
    /// usable history exists.
    pub fn initial_step(&self, x: &[f64], grad: &[f64]) -> f64 {
        let fallback = 1.0 / norm_sq(grad).sqrt();
        let Some((px, pg)) = &self.prev else {
            return fallback;
        };
        let s: Vec<f64> = x.iter().zip(px).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = grad.iter().zip(pg).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        let ss = norm_sq(&s);
        if sy > 0.0 && ss > 0.0 {
            let step = ss / sy;
            if step.is_finite() {
                return step;
            }
        }
        fallback
    }

    pub fn record(&mut self, x: &[f64], grad: &[f64]) {
        self.prev = Some((x.to_vec(), grad.to_vec()));
    }

    pub fn reset(&mut self) {
        self.prev = None;
    }
}

/// One accepted projected-gradient step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub iteration: usize,
    pub value: f64,
    pub step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PgOptions {
    pub max_iters: usize,
    /// Stop once an accepted step improves the objective by less than this
    /// fraction of its value.
    pub rel_tol: f64,
    pub line_search: LineSearchConfig,
}

impl Default for PgOptions {
    fn default() -> Self {
        Self { max_iters: 1000, rel_tol: 0.0, line_search: LineSearchConfig::default() }
    }
}

#[derive(Debug, Clone)]
pub struct PgResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub steps: Vec<StepRecord>,
    /// The loop ended on a failed line search.
    pub stagnated: bool,
}

/// Projected gradient descent from `x0` (which is projected first).
pub fn projected_gradient<O, P>(obj: &O, x0: &[f64], project: P, opts: &PgOptions, bb: &mut BbStep) -> Result<PgResult>
where
    O: Objective + ?Sized,
    P: Fn(&mut [f64]) -> Result<()>,
{
    opts.line_search.validate()?;
    let mut x = x0.to_vec();
    project(&mut x)?;
    let mut steps = Vec::new();
    let mut value = obj.value(&x)?;
    let mut stagnated = false;
    for it in 0..opts.max_iters {
        let (fx, g) = obj.value_and_gradient(&x)?;
        if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite objective or gradient at iteration {it}")));
        }
        let step0 = bb.initial_step(&x, &g);
        let ls = backtracking(obj, &x, fx, &g, step0, &project, &opts.line_search)?;
        if ls.stagnated() {
            stagnated = true;
            value = fx;
            break;
        }
        bb.record(&x, &g);
        let improvement = fx - ls.value;
        x = ls.x;
        value = ls.value;
        steps.push(StepRecord { iteration: it, value, step: ls.step });
        if norm_sq(&g) == 0.0 || improvement <= opts.rel_tol * value.abs() {
            break;
        }
    }
    Ok(PgResult { x, value, steps, stagnated })
}
