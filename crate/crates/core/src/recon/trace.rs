//! Per-step iteration trace.

use std::fmt::Write;

/// One accepted step: outer iteration `q`, inner iteration `p` (both
/// 1-based), objective after the step, step size, Heaviside width and
/// ℓ1 norm of the coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub outer: usize,
    pub inner: usize,
    pub objective: f64,
    pub step: f64,
    pub epsilon: f64,
    pub l1_norm: f64,
}

pub const TRACE_HEADER: &str = "outer,inner,objective,step,epsilon,l1_norm";

pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut s = String::from(TRACE_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(s, "{},{},{:e},{:e},{:e},{:e}", r.outer, r.inner, r.objective, r.step, r.epsilon, r.l1_norm);
    }
    s
}
