//! Piecewise-linear paths on `[0, 1]`.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::{Error, Result};

/// Total-variation budget `L ∈ (0, 1)` of the input space: a path belongs to
/// it when it starts at the origin and has total variation at most `L`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathConfig {
    l: f64,
}

impl PathConfig {
    pub fn new(l: f64) -> Result<Self> {
        if !(l > 0.0 && l < 1.0) {
            return Err(Error::InvalidArgument("total-variation budget L must lie in (0, 1)"));
        }
        Ok(PathConfig { l })
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    /// Slope `(1 - L) / 2` of the time channel added by [`PiecewiseLinearPath::time_augment`].
    pub fn time_slope(&self) -> f64 {
        (1.0 - self.l) / 2.0
    }
}

impl Default for PathConfig {
    fn default() -> Self {
        PathConfig { l: 0.5 }
    }
}

/// A continuous path given by its breakpoints, linear in between.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinearPath {
    dim: usize,
    times: Vec<f64>,
    /// Row-major, one point of length `dim` per breakpoint.
    values: Vec<f64>,
}

/// One linear piece of a path, clipped to a query interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub origin: Vec<f64>,
    /// Increment over `[start, end]`.
    pub delta: Vec<f64>,
}

impl PiecewiseLinearPath {
    /// Builds a path from breakpoints. A single breakpoint gives the constant path.
    pub fn new(times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.is_empty() || times.len() != values.len() {
            return Err(Error::EmptySamples);
        }
        let dim = values[0].len();
        if dim == 0 {
            return Err(Error::InvalidArgument("path dimension must be positive"));
        }
        if values.iter().any(|v| v.len() != dim) {
            return Err(Error::ShapeMismatch("all path points must share one dimension"));
        }
        if values.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("path values must be finite"));
        }
        if values.len() == 1 {
            return Ok(Self::constant(&values[0]));
        }
        let increasing = times.windows(2).all(|w| w[0] < w[1]);
        if !increasing || times[0] != 0.0 || *times.last().unwrap() != 1.0 {
            return Err(Error::InvalidBreakpoints);
        }
        Ok(PiecewiseLinearPath { dim, times, values: values.concat() })
    }

    pub fn constant(point: &[f64]) -> Self {
        assert!(!point.is_empty(), "path dimension must be positive");
        PiecewiseLinearPath { dim: point.len(), times: vec![0.0, 1.0], values: [point, point].concat() }
    }

    /// Path through the origin at `t = 0` and `x_j` at `t = j / T`.
    pub fn from_samples(samples: &[Vec<f64>]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptySamples);
        }
        let n = samples.len();
        let dim = samples[0].len();
        let times = (0..=n).map(|j| j as f64 / n as f64).collect();
        let mut values = Vec::with_capacity(n + 1);
        values.push(vec![0.0; dim]);
        values.extend(samples.iter().cloned());
        Self::new(times, values)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// Linear interpolant at `t`, clamped to `[0, 1]`.
    pub fn evaluate(&self, t: f64) -> Vec<f64> {
        let t = t.clamp(0.0, 1.0);
        // index of the segment [times[i], times[i+1]] containing t
        let i = match self.times.binary_search_by(|s| s.partial_cmp(&t).unwrap()) {
            Ok(i) => return self.point(i).to_vec(),
            Err(i) => i - 1,
        };
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let w = (t - t0) / (t1 - t0);
        self.point(i).iter().zip(self.point(i + 1)).map(|(a, b)| a + w * (b - a)).collect()
    }

    /// The linear pieces meeting `[s, t]`, clipped to it. Empty when `s == t`.
    pub fn segments(&self, s: f64, t: f64) -> Result<Vec<Segment>> {
        check_interval(s, t)?;
        let mut out = Vec::new();
        for i in 0..self.times.len() - 1 {
            let lo = self.times[i].max(s);
            let hi = self.times[i + 1].min(t);
            if hi <= lo {
                continue;
            }
            let a = if lo == self.times[i] { self.point(i).to_vec() } else { self.evaluate(lo) };
            let b = if hi == self.times[i + 1] { self.point(i + 1).to_vec() } else { self.evaluate(hi) };
            let delta = b.iter().zip(&a).map(|(x, y)| x - y).collect();
            out.push(Segment { start: lo, end: hi, origin: a, delta });
        }
        Ok(out)
    }

    /// Total variation on `[s, t]`: for a piecewise-linear path, the summed
    /// Euclidean lengths of the pieces.
    pub fn total_variation(&self, s: f64, t: f64) -> Result<f64> {
        Ok(self.segments(s, t)?.iter().map(|seg| math::norm(&seg.delta)).sum())
    }

    /// Translates the path to start at the origin and scales its values by
    /// `min(1, L / TV)`, returning the new path and the scale factor used.
    pub fn normalize(&self, config: PathConfig) -> (PiecewiseLinearPath, f64) {
        let tv = self.total_variation(0.0, 1.0).expect("full interval is valid");
        let scale = if tv > config.l() { config.l() / tv } else { 1.0 };
        let x0 = self.point(0).to_vec();
        let values = self
            .values
            .chunks(self.dim)
            .flat_map(|p| p.iter().zip(&x0).map(|(x, o)| (x - o) * scale).collect::<Vec<_>>())
            .collect();
        (PiecewiseLinearPath { dim: self.dim, times: self.times.clone(), values }, scale)
    }

    /// Appends the channel `((1 - L) / 2) t`.
    pub fn time_augment(&self, config: PathConfig) -> PiecewiseLinearPath {
        let slope = config.time_slope();
        let dim = self.dim + 1;
        let mut values = Vec::with_capacity(self.times.len() * dim);
        for (i, &t) in self.times.iter().enumerate() {
            values.extend_from_slice(self.point(i));
            values.push(slope * t);
        }
        PiecewiseLinearPath { dim, times: self.times.clone(), values }
    }

    /// The path equal to `self` on `[0, j/T]` and constant afterwards.
    pub fn stop_at(&self, j: usize, steps: usize) -> Result<PiecewiseLinearPath> {
        if j == 0 || j > steps {
            return Err(Error::StopIndexOutOfRange { index: j, len: steps });
        }
        if j == steps {
            return Ok(self.clone());
        }
        let cut = j as f64 / steps as f64;
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (i, &t) in self.times.iter().enumerate() {
            if t < cut {
                times.push(t);
                values.extend_from_slice(self.point(i));
            }
        }
        let stop = self.evaluate(cut);
        times.push(cut);
        values.extend_from_slice(&stop);
        times.push(1.0);
        values.extend_from_slice(&stop);
        Ok(PiecewiseLinearPath { dim: self.dim, times, values })
    }

    /// `sup_t ‖X_t‖`, attained at a breakpoint.
    pub fn sup_norm(&self) -> f64 {
        self.values.chunks(self.dim).map(math::norm).fold(0.0, f64::max)
    }

    /// Scales every value by `factor`, keeping breakpoints.
    pub fn scaled(&self, factor: f64) -> PiecewiseLinearPath {
        PiecewiseLinearPath {
            dim: self.dim,
            times: self.times.clone(),
            values: self.values.iter().map(|x| x * factor).collect(),
        }
    }
}

pub(crate) fn check_interval(s: f64, t: f64) -> Result<()> {
    if !(0.0 <= s && s <= t && t <= 1.0) {
        return Err(Error::InvalidInterval { start: s, end: t });
    }
    Ok(())
}
