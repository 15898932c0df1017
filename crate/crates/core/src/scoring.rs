//! Scoring functions whose empirical averages drive estimation and window
//! selection.
//!
//! * mean: squared loss `(x - mu)^2`
//! * VaR at level `alpha`: pinball (check) loss `(1{x < v} - alpha)(v - x)`
//! * (VaR, ES): the joint score with `G1(x) = x` and the logistic choice
//!   `G2(x) = -exp(-x) / (1 + exp(-x))`, whose antiderivative is taken as
//!   `softplus(-x) = log(1 + exp(-x))` so that both vanish at `+inf`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{domain, parameter, Result};

/// A probability level strictly inside (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Level(f64);

impl Level {
    pub fn new(value: f64) -> Result<Self> {
        if value > 0.0 && value < 1.0 {
            Ok(Self(value))
        } else {
            Err(parameter(format!("level {value} must lie strictly inside (0, 1)")))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Level {
    type Error = crate::BawsError;

    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<Level> for f64 {
    fn from(level: Level) -> f64 {
        level.0
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// The statistic being forecast, which also fixes the scoring function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ForecastTarget {
    Mean,
    Var { alpha: Level },
    VarEs { alpha: Level },
}

impl ForecastTarget {
    pub fn var(alpha: f64) -> Result<Self> {
        Ok(Self::Var { alpha: Level::new(alpha)? })
    }

    pub fn var_es(alpha: f64) -> Result<Self> {
        Ok(Self::VarEs { alpha: Level::new(alpha)? })
    }

    /// Parameter dimension: 1 for mean and VaR, 2 for (VaR, ES).
    pub fn dim(&self) -> usize {
        match self {
            Self::Mean | Self::Var { .. } => 1,
            Self::VarEs { .. } => 2,
        }
    }

    pub fn alpha(&self) -> Option<Level> {
        match self {
            Self::Mean => None,
            Self::Var { alpha } | Self::VarEs { alpha } => Some(*alpha),
        }
    }

    /// Pointwise score `l(x, theta)`.
    pub fn score(&self, x: f64, theta: &ParamVector) -> Result<f64> {
        check_dim(self, theta)?;
        match (self, theta) {
            (Self::Mean, ParamVector::Scalar(mu)) => squared_loss(x, *mu),
            (Self::Var { alpha }, ParamVector::Scalar(v)) => pinball_score(x, *v, alpha.get()),
            (Self::VarEs { alpha }, ParamVector::Pair(v, e)) => {
                joint_vares_score(x, *v, *e, alpha.get())
            }
            _ => unreachable!("dimension checked above"),
        }
    }
}

impl fmt::Display for ForecastTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Mean => write!(f, "mean"),
            Self::Var { alpha } => write!(f, "var({alpha})"),
            Self::VarEs { alpha } => write!(f, "vares({alpha})"),
        }
    }
}

/// Parameter of a forecast: a scalar (mean or VaR) or a (VaR, ES) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ParamVector {
    Scalar(f64),
    Pair(f64, f64),
}

impl ParamVector {
    pub fn dim(&self) -> usize {
        match self {
            Self::Scalar(_) => 1,
            Self::Pair(..) => 2,
        }
    }

    /// First component (mean, or VaR).
    pub fn first(&self) -> f64 {
        match *self {
            Self::Scalar(x) | Self::Pair(x, _) => x,
        }
    }

    /// Second component (ES) when present.
    pub fn second(&self) -> Option<f64> {
        match *self {
            Self::Scalar(_) => None,
            Self::Pair(_, e) => Some(e),
        }
    }

    pub fn components(&self) -> Vec<f64> {
        match *self {
            Self::Scalar(x) => vec![x],
            Self::Pair(v, e) => vec![v, e],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.components().iter().all(|c| c.is_finite())
    }

    /// Adds `c` to every component.
    pub fn shifted(&self, c: f64) -> Self {
        match *self {
            Self::Scalar(x) => Self::Scalar(x + c),
            Self::Pair(v, e) => Self::Pair(v + c, e + c),
        }
    }
}

fn check_dim(target: &ForecastTarget, theta: &ParamVector) -> Result<()> {
    if theta.dim() != target.dim() {
        return Err(domain(format!(
            "parameter of dimension {} does not match target {target} (dimension {})",
            theta.dim(),
            target.dim()
        )));
    }
    if !theta.is_finite() {
        return Err(domain("parameter has non-finite components"));
    }
    Ok(())
}

fn check_level(alpha: f64) -> Result<()> {
    Level::new(alpha).map(|_| ())
}

fn check_finite(values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(domain("non-finite input to scoring function"))
    }
}

pub fn squared_loss(x: f64, mu: f64) -> Result<f64> {
    check_finite(&[x, mu])?;
    Ok((x - mu) * (x - mu))
}

/// `(1{x < v} - alpha)(v - x)`. Ties `x == v` take the `1{x < v} = 0` branch.
pub fn pinball_score(x: f64, v: f64, alpha: f64) -> Result<f64> {
    check_level(alpha)?;
    check_finite(&[x, v])?;
    Ok(pinball_unchecked(x, v, alpha))
}

#[inline]
pub(crate) fn pinball_unchecked(x: f64, v: f64, alpha: f64) -> f64 {
    let ind = if x < v { 1.0 } else { 0.0 };
    (ind - alpha) * (v - x)
}

/// `G2(z) = -exp(-z) / (1 + exp(-z)) = -1 / (1 + exp(z))`.
#[inline]
pub fn g2(z: f64) -> f64 {
    if z >= 0.0 {
        let w = (-z).exp();
        -w / (1.0 + w)
    } else {
        -1.0 / (1.0 + z.exp())
    }
}

/// Antiderivative of [`g2`] with zero integration constant at `+inf`:
/// `log(1 + exp(-z))`, evaluated as a stable softplus.
#[inline]
pub fn g2_antiderivative(z: f64) -> f64 {
    // softplus(-z)
    if z > 0.0 {
        (-z).exp().ln_1p()
    } else {
        -z + z.exp().ln_1p()
    }
}

/// Joint (VaR, ES) score with `G1(x) = x` and the logistic `G2`.
pub fn joint_vares_score(x: f64, v: f64, e: f64, alpha: f64) -> Result<f64> {
    check_level(alpha)?;
    check_finite(&[x, v, e])?;
    Ok(joint_unchecked(x, v, e, alpha))
}

#[inline]
pub(crate) fn joint_unchecked(x: f64, v: f64, e: f64, alpha: f64) -> f64 {
    let ge = g2(e);
    let exceed = if x >= v { 1.0 } else { 0.0 };
    pinball_unchecked(x, v, alpha) + ge * exceed * (v - x) / (1.0 - alpha) + ge * (e - v)
        - g2_antiderivative(e)
}

/// `(1/k) * sum l(x_i, theta)` over the window.
pub fn empirical_score(window: &[f64], theta: &ParamVector, target: &ForecastTarget) -> Result<f64> {
    if window.is_empty() {
        return Err(domain("empirical score of an empty window"));
    }
    check_dim(target, theta)?;
    check_finite(window)?;
    let total: f64 = match (target, theta) {
        (ForecastTarget::Mean, ParamVector::Scalar(mu)) => {
            window.iter().map(|x| (x - mu) * (x - mu)).sum()
        }
        (ForecastTarget::Var { alpha }, ParamVector::Scalar(v)) => window
            .iter()
            .map(|&x| pinball_unchecked(x, *v, alpha.get()))
            .sum(),
        (ForecastTarget::VarEs { alpha }, ParamVector::Pair(v, e)) => window
            .iter()
            .map(|&x| joint_unchecked(x, *v, *e, alpha.get()))
            .sum(),
        _ => unreachable!("dimension checked above"),
    };
    Ok(total / window.len() as f64)
}
