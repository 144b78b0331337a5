//! Right-continuous piecewise-linear paths.

use serde::Serialize;

use crate::error::{invalid, Result};

/// A càdlàg function on `[0, end]`: on `[breakpoints[i], breakpoints[i+1])`
/// it equals `segments[i].0 + segments[i].1 · (t - breakpoints[i])`.
/// Step functions have slope zero on every segment.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CadlagPath {
    breakpoints: Vec<f64>,
    segments: Vec<(f64, f64)>,
    end: f64,
}

impl CadlagPath {
    pub fn new(breakpoints: Vec<f64>, segments: Vec<(f64, f64)>, end: f64) -> Result<Self> {
        if breakpoints.is_empty() || breakpoints[0] != 0.0 {
            return Err(invalid("first breakpoint must be 0"));
        }
        if breakpoints.len() != segments.len() {
            return Err(invalid("one segment per breakpoint required"));
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid("breakpoints must be strictly increasing"));
        }
        if !(end >= *breakpoints.last().unwrap()) || !end.is_finite() {
            return Err(invalid("end must not precede the last breakpoint"));
        }
        if segments.iter().any(|(v, s)| !v.is_finite() || !s.is_finite()) {
            return Err(invalid("segment values must be finite"));
        }
        Ok(CadlagPath { breakpoints, segments, end })
    }

    pub fn constant(value: f64, end: f64) -> Result<Self> {
        CadlagPath::new(vec![0.0], vec![(value, 0.0)], end)
    }

    /// Step function taking `levels[k]` on `[k/n, (k+1)/n)`, ending at `(len-1)/n`.
    pub fn step_on_lattice(levels: &[f64], n: usize) -> Result<Self> {
        if levels.is_empty() {
            return Err(invalid("at least one level required"));
        }
        let breakpoints = (0..levels.len()).map(|k| k as f64 / n as f64).collect();
        let segments = levels.iter().map(|&v| (v, 0.0)).collect();
        CadlagPath::new(breakpoints, segments, (levels.len() - 1) as f64 / n as f64)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn segments(&self) -> &[(f64, f64)] {
        &self.segments
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    fn segment_at(&self, i: usize, t: f64) -> f64 {
        let (v, s) = self.segments[i];
        if s == 0.0 {
            v
        } else {
            v + s * (t - self.breakpoints[i])
        }
    }

    /// Value at `t`; times before 0 read the first segment, times past the
    /// end extend the last one.
    pub fn eval(&self, t: f64) -> f64 {
        let i = self.breakpoints.partition_point(|&b| b <= t).max(1) - 1;
        self.segment_at(i, t)
    }

    /// `f(t-)`; equals `f(0)` at `t <= 0`.
    pub fn left_limit(&self, t: f64) -> f64 {
        let i = self.breakpoints.partition_point(|&b| b < t).max(1) - 1;
        self.segment_at(i, t)
    }

    pub fn sample(&self, grid: &[f64]) -> Vec<f64> {
        grid.iter().map(|&t| self.eval(t)).collect()
    }

    pub fn is_step(&self) -> bool {
        self.segments.iter().all(|&(_, s)| s == 0.0)
    }
}
