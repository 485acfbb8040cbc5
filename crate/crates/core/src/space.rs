//! Bounded search boxes and the log2 encoding of SVM parameters.
//!
//! Optimizers work on a [`Position`] inside a [`SearchSpace`]. For SVM tuning
//! the space is two dimensional: the first coordinate is `log2 C`, the second
//! `log2 gamma`, each in `[-10, 10]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default `|v_d|` cap as a fraction of the per-dimension range.
pub const DEFAULT_VELOCITY_CAP_FRACTION: f64 = 0.05;

/// An axis-aligned box with inclusive bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    lower: Vec<f64>,
    upper: Vec<f64>,
    velocity_cap_fraction: f64,
}

impl SearchSpace {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::domain("search space needs at least one dimension"));
        }
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                found: upper.len(),
            });
        }
        for (d, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(Error::domain(format!(
                    "dimension {d}: lower bound {lo} must be finite and below upper bound {hi}"
                )));
            }
        }
        Ok(Self {
            lower,
            upper,
            velocity_cap_fraction: DEFAULT_VELOCITY_CAP_FRACTION,
        })
    }

    /// The same bounds in every one of `dims` dimensions.
    pub fn uniform(dims: usize, lower: f64, upper: f64) -> Result<Self> {
        Self::new(vec![lower; dims], vec![upper; dims])
    }

    /// `[-10, 10]^2` over `(log2 C, log2 gamma)`.
    pub fn svm_default() -> Self {
        Self::uniform(2, -10.0, 10.0).expect("static bounds are valid")
    }

    pub fn with_velocity_cap_fraction(mut self, fraction: f64) -> Result<Self> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::domain(format!(
                "velocity cap fraction {fraction} must lie in (0, 1]"
            )));
        }
        self.velocity_cap_fraction = fraction;
        Ok(self)
    }

    pub fn dims(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn range(&self, d: usize) -> f64 {
        self.upper[d] - self.lower[d]
    }

    pub fn velocity_cap_fraction(&self) -> f64 {
        self.velocity_cap_fraction
    }

    /// Largest allowed `|v_d|` in dimension `d`.
    pub fn velocity_cap(&self, d: usize) -> f64 {
        self.velocity_cap_fraction * self.range(d)
    }

    pub fn contains(&self, pos: &Position) -> bool {
        pos.dims() == self.dims()
            && pos
                .coords()
                .iter()
                .enumerate()
                .all(|(d, &x)| x >= self.lower[d] && x <= self.upper[d])
    }

    /// Projects every coordinate into `[lower[d], upper[d]]`.
    pub fn clamp(&self, pos: &Position) -> Position {
        clamp(pos, self)
    }
}

/// A point in the (log2-scaled) search space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Position(Vec<f64>);

impl Position {
    pub fn new(coords: Vec<f64>) -> Self {
        Position(coords)
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn coords_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn dims(&self) -> usize {
        self.0.len()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn distance(&self, other: &Position) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl From<Vec<f64>> for Position {
    fn from(coords: Vec<f64>) -> Self {
        Position(coords)
    }
}

impl<const N: usize> From<[f64; N]> for Position {
    fn from(coords: [f64; N]) -> Self {
        Position(coords.to_vec())
    }
}

/// Penalty `C` and RBF width `gamma`, both strictly positive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    pub gamma: f64,
}

impl SvmParams {
    pub fn new(c: f64, gamma: f64) -> Result<Self> {
        let params = SvmParams { c, gamma };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::domain(format!("C must be positive, got {}", self.c)));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::domain(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        Ok(())
    }
}

/// `(C, gamma) -> (log2 C, log2 gamma)`.
pub fn encode(params: &SvmParams) -> Result<Position> {
    params.validate()?;
    Ok(Position(vec![params.c.log2(), params.gamma.log2()]))
}

/// `(x, y) -> (2^x, 2^y)`.
///
/// # Panics
///
/// If `pos` is not two dimensional.
pub fn decode(pos: &Position) -> SvmParams {
    assert_eq!(pos.dims(), 2, "SVM positions are (log2 C, log2 gamma)");
    SvmParams {
        c: pos.0[0].exp2(),
        gamma: pos.0[1].exp2(),
    }
}

pub fn clamp(pos: &Position, space: &SearchSpace) -> Position {
    debug_assert_eq!(pos.dims(), space.dims());
    Position(
        pos.0
            .iter()
            .enumerate()
            .map(|(d, &x)| x.clamp(space.lower[d], space.upper[d]))
            .collect(),
    )
}
