//! Security-rate trade-off over pairs of channel parameters.
//!
//! The objective `F(n1, n2) = p_wrong(n1, n2) * p_final_rate(n1, n2)`
//! weighs Eve's per-mismatch distortion against the key yield.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::gbs::{p_final_rate, p_wrong, ChannelParam};

pub const MIN_AXIS_POINTS: usize = 10;

/// Grid values are rounded to this many decimals so that `min + i * step`
/// lands on the intended decimal.
const GRID_DECIMALS: i32 = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl Axis {
    pub fn new(min: f64, max: f64, step: f64) -> Self {
        Self { min, max, step }
    }

    pub fn validate(&self) -> Result<(), AnalysisError> {
        let bad = |msg: String| Err(AnalysisError::InvalidGrid(msg));
        if !(self.min.is_finite() && self.max.is_finite() && self.step.is_finite()) {
            return bad("grid bounds must be finite".into());
        }
        if self.min <= 0.0 || self.max >= 1.0 {
            return bad(format!(
                "axis [{}, {}] must lie inside (0, 1)",
                self.min, self.max
            ));
        }
        if self.max < self.min {
            return bad(format!("axis max {} below min {}", self.max, self.min));
        }
        if self.step <= 0.0 {
            return bad(format!("step {} must be positive", self.step));
        }
        if self.step > self.max - self.min {
            return bad(format!(
                "step {} exceeds range {}",
                self.step,
                self.max - self.min
            ));
        }
        let count = self.values().len();
        if count < MIN_AXIS_POINTS {
            return bad(format!(
                "{count} points per axis, need at least {MIN_AXIS_POINTS}"
            ));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let scale = 10f64.powi(GRID_DECIMALS);
        let count = ((self.max - self.min) / self.step + 1e-9).floor() as usize + 1;
        (0..count)
            .map(|i| ((self.min + i as f64 * self.step) * scale).round() / scale)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n1: Axis,
    pub n2: Axis,
}

impl GridSpec {
    pub fn square(min: f64, max: f64, step: f64) -> Self {
        let axis = Axis::new(min, max, step);
        Self { n1: axis, n2: axis }
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        Self::square(0.05, 0.95, 0.05)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanPoint {
    pub n1: f64,
    pub n2: f64,
    pub p_wrong: f64,
    pub rate: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanResult {
    pub grid: GridSpec,
    /// Row-major: `n1` outer, `n2` inner.
    pub points: Vec<ScanPoint>,
    pub argmax: ScanPoint,
    /// Smallest objective among points with `n1 != n2`.
    pub argmin_off_diagonal: Option<ScanPoint>,
    /// Largest objective on the diagonal; zero by construction.
    pub diagonal_max: Option<f64>,
}

impl ScanResult {
    pub fn diagonal(&self) -> impl Iterator<Item = &ScanPoint> {
        self.points.iter().filter(|p| p.n1 == p.n2)
    }

    pub fn at(&self, n1: f64, n2: f64) -> Option<&ScanPoint> {
        self.points.iter().find(|p| p.n1 == n1 && p.n2 == n2)
    }
}

/// Objective at one point.
pub fn objective(n1: ChannelParam, n2: ChannelParam) -> ScanPoint {
    let w = p_wrong(n1, n2);
    let rate = p_final_rate(&[n1, n2]).expect("two parameters");
    ScanPoint {
        n1: n1.value(),
        n2: n2.value(),
        p_wrong: w,
        rate,
        objective: w * rate,
    }
}

pub fn scan(grid: &GridSpec) -> Result<ScanResult, AnalysisError> {
    grid.n1.validate()?;
    grid.n2.validate()?;
    let xs = grid.n1.values();
    let ys = grid.n2.values();
    let pairs: Vec<(f64, f64)> = xs
        .iter()
        .flat_map(|&x| ys.iter().map(move |&y| (x, y)))
        .collect();
    let points: Vec<ScanPoint> = pairs
        .par_iter()
        .map(|&(x, y)| {
            let n1 = ChannelParam::new(x).expect("validated axis");
            let n2 = ChannelParam::new(y).expect("validated axis");
            objective(n1, n2)
        })
        .collect();

    // First strict improvement wins, so ties resolve to the earliest point.
    let mut argmax = points[0];
    for p in &points[1..] {
        if p.objective > argmax.objective {
            argmax = *p;
        }
    }
    let mut argmin_off_diagonal: Option<ScanPoint> = None;
    for p in points.iter().filter(|p| p.n1 != p.n2) {
        if argmin_off_diagonal.is_none_or(|best| p.objective < best.objective) {
            argmin_off_diagonal = Some(*p);
        }
    }
    let diagonal_max = points
        .iter()
        .filter(|p| p.n1 == p.n2)
        .map(|p| p.objective)
        .reduce(f64::max);

    Ok(ScanResult {
        grid: *grid,
        points,
        argmax,
        argmin_off_diagonal,
        diagonal_max,
    })
}
