//! Synthetic data generators with known ground truth.
//!
//! Every generator returns a [`ScenarioPath`]: the simulated losses together
//! with the true location, scale and (optionally) VaR path aligned
//! index-for-index, plus enough information to recover the full conditional
//! loss distribution at each time (see [`ScenarioPath::distribution_at`]).
//!
//! Time is 1-based in the model formulas; vector index `t - 1` holds time `t`.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{parameter, BawsError, Result};
use crate::rng::{self, StreamRng};
use crate::scoring::Level;
use crate::stats::{norm_cdf, norm_pdf, norm_quantile, StudentT};

/// Scenario identifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    A1,
    A2,
    A3,
    B1,
    B2,
    B3,
    Garch,
}

impl Scenario {
    pub const ALL: [Scenario; 7] = [Self::A1, Self::A2, Self::A3, Self::B1, Self::B2, Self::B3, Self::Garch];

    /// True for the Gaussian settings whose observations are independent.
    pub fn is_independent(self) -> bool {
        self != Self::Garch
    }

    /// Generates one path of length `len`.
    pub fn generate(self, len: usize, seed: u64, alpha: Option<Level>) -> Result<ScenarioPath> {
        match self {
            Self::A1 | Self::A2 | Self::A3 => gen_setting_a(self, len, seed, alpha),
            Self::B1 | Self::B2 | Self::B3 => gen_setting_b(self, len, seed, alpha),
            Self::Garch => gen_garch(len, seed, alpha),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::A1 => "A1",
            Self::A2 => "A2",
            Self::A3 => "A3",
            Self::B1 => "B1",
            Self::B2 => "B2",
            Self::B3 => "B3",
            Self::Garch => "GARCH",
        };
        f.write_str(s)
    }
}

impl FromStr for Scenario {
    type Err = BawsError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|sc| sc.to_string().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| parameter(format!("unknown scenario '{s}'")))
    }
}

/// Fernández–Steel skewed Student-t, standardized to zero mean and unit
/// variance.
///
/// The unstandardized variable is `Z = r|T|` with probability `r^2/(1+r^2)`
/// and `Z = -|T|/r` otherwise, for `T` a Student-t with `nu` degrees of
/// freedom; the standardized variable is `(Z - m) / s`.
#[derive(Debug, Clone)]
pub struct SkewedT {
    r: f64,
    t: StudentT,
    p_pos: f64,
    m: f64,
    s: f64,
}

impl SkewedT {
    pub fn new(nu: f64, r: f64) -> Result<Self> {
        if !(nu.is_finite() && nu > 2.0) {
            return Err(parameter(format!("skewed-t needs nu > 2 for a finite variance, got {nu}")));
        }
        if !(r.is_finite() && r > 0.0) {
            return Err(parameter(format!("skewness r = {r} must be positive")));
        }
        let t = StudentT::new(nu).ok_or_else(|| parameter(format!("invalid degrees of freedom {nu}")))?;
        let abs_mean = 2.0 * t.upper_partial_mean(0.0);
        let m = abs_mean * (r - 1.0 / r);
        let second = nu / (nu - 2.0) * (r * r - 1.0 + 1.0 / (r * r));
        let s = (second - m * m).sqrt();
        Ok(Self { r, t, p_pos: r * r / (1.0 + r * r), m, s })
    }

    /// The innovation law of the GARCH scenario: `nu = 5`, `r = 0.95`.
    pub fn garch_innovation() -> Self {
        Self::new(5.0, 0.95).expect("valid constants")
    }

    pub fn nu(&self) -> f64 {
        self.t.nu()
    }

    pub fn skewness(&self) -> f64 {
        self.r
    }

    fn p_neg(&self) -> f64 {
        1.0 - self.p_pos
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let abs_t = rand_distr::StudentT::new(self.nu())
            .expect("nu validated")
            .sample(rng)
            .abs();
        let z = if rng.random::<f64>() < self.p_pos { self.r * abs_t } else { -abs_t / self.r };
        (z - self.m) / self.s
    }

    fn raw_cdf(&self, z: f64) -> f64 {
        if z < 0.0 {
            2.0 * self.p_neg() * self.t.cdf(self.r * z)
        } else {
            self.p_neg() + self.p_pos * (2.0 * self.t.cdf(z / self.r) - 1.0)
        }
    }

    fn raw_pdf(&self, z: f64) -> f64 {
        let c = 2.0 / (self.r + 1.0 / self.r);
        if z < 0.0 {
            c * self.t.pdf(self.r * z)
        } else {
            c * self.t.pdf(z / self.r)
        }
    }

    /// `E[Z 1{Z <= z}]` for the unstandardized variable.
    fn raw_lower_partial_mean(&self, z: f64) -> f64 {
        if z < 0.0 {
            -2.0 * self.p_neg() / self.r * self.t.upper_partial_mean(-self.r * z)
        } else {
            let at_zero = -2.0 * self.p_neg() / self.r * self.t.upper_partial_mean(0.0);
            let b = z / self.r;
            at_zero
                + 2.0 * self.p_pos * self.r * (self.t.upper_partial_mean(0.0) - self.t.upper_partial_mean(b))
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.raw_cdf(self.m + self.s * x)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.s * self.raw_pdf(self.m + self.s * x)
    }

    /// `E[eps 1{eps <= x}]`.
    pub fn lower_partial_mean(&self, x: f64) -> f64 {
        let z = self.m + self.s * x;
        (self.raw_lower_partial_mean(z) - self.m * self.raw_cdf(z)) / self.s
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(parameter(format!("probability {p} must lie in (0, 1)")));
        }
        let z = if p < self.p_neg() {
            self.t.quantile(p / (2.0 * self.p_neg())) / self.r
        } else {
            self.r * self.t.quantile((1.0 + (p - self.p_neg()) / self.p_pos) / 2.0)
        };
        Ok((z - self.m) / self.s)
    }
}

/// One standardized skewed-t draw.
pub fn skewed_t_sample<R: Rng + ?Sized>(nu: f64, r: f64, rng: &mut R) -> Result<f64> {
    Ok(SkewedT::new(nu, r)?.sample(rng))
}

/// Quantile of the standardized skewed-t.
pub fn skewed_t_quantile(p: f64, nu: f64, r: f64) -> Result<f64> {
    SkewedT::new(nu, r)?.quantile(p)
}

/// Standardized noise driving a scenario. Losses are `location + scale * Y`
/// with `Y ~ N(0, 1)` or `Y = -eps`, `eps` standardized skewed-t.
#[derive(Debug, Clone)]
pub enum Innovation {
    Gaussian,
    NegatedSkewedT(SkewedT),
}

impl Innovation {
    fn quantile(&self, p: f64) -> f64 {
        match self {
            Self::Gaussian => norm_quantile(p),
            Self::NegatedSkewedT(d) => -d.quantile(1.0 - p).expect("p in (0, 1)"),
        }
    }

    /// `P(Y < y)`.
    fn cdf(&self, y: f64) -> f64 {
        match self {
            Self::Gaussian => norm_cdf(y),
            Self::NegatedSkewedT(d) => 1.0 - d.cdf(-y),
        }
    }

    /// `E[Y 1{Y < y}]`. For `Y = -eps` this is `-E[eps 1{eps > -y}]`, which
    /// equals `E[eps 1{eps <= -y}]` because `eps` has mean zero.
    fn lower_partial_mean(&self, y: f64) -> f64 {
        match self {
            Self::Gaussian => -norm_pdf(y),
            Self::NegatedSkewedT(d) => d.lower_partial_mean(-y),
        }
    }

    fn density(&self, y: f64) -> f64 {
        match self {
            Self::Gaussian => norm_pdf(y),
            Self::NegatedSkewedT(d) => d.pdf(-y),
        }
    }
}

/// Conditional law of the loss at one time point.
#[derive(Debug, Clone, Copy)]
pub struct LossDistribution<'a> {
    pub location: f64,
    pub scale: f64,
    pub innovation: &'a Innovation,
}

impl LossDistribution<'_> {
    pub fn quantile(&self, alpha: f64) -> f64 {
        self.location + self.scale * self.innovation.quantile(alpha)
    }

    /// `P(X < v)`.
    pub fn prob_below(&self, v: f64) -> f64 {
        self.innovation.cdf((v - self.location) / self.scale)
    }

    /// `E[X 1{X < v}]`.
    pub fn partial_mean_below(&self, v: f64) -> f64 {
        let y = (v - self.location) / self.scale;
        self.location * self.innovation.cdf(y) + self.scale * self.innovation.lower_partial_mean(y)
    }

    pub fn density(&self, x: f64) -> f64 {
        self.innovation.density((x - self.location) / self.scale) / self.scale
    }

    /// `E[X | X >= VaR_alpha]`; both innovation laws have mean zero.
    pub fn expected_shortfall(&self, alpha: f64) -> f64 {
        let q = self.innovation.quantile(alpha);
        self.location - self.scale * self.innovation.lower_partial_mean(q) / (1.0 - alpha)
    }
}

/// A simulated loss path with its ground truth.
#[derive(Debug, Clone)]
pub struct ScenarioPath {
    pub scenario: Scenario,
    pub seed: u64,
    pub losses: Vec<f64>,
    pub true_mean: Vec<f64>,
    pub true_sigma: Vec<f64>,
    pub alpha: Option<Level>,
    pub true_var: Option<Vec<f64>>,
    pub innovation: Innovation,
}

impl ScenarioPath {
    fn assemble(
        scenario: Scenario,
        seed: u64,
        losses: Vec<f64>,
        true_mean: Vec<f64>,
        true_sigma: Vec<f64>,
        innovation: Innovation,
        alpha: Option<Level>,
    ) -> Self {
        let mut path =
            Self { scenario, seed, losses, true_mean, true_sigma, alpha, true_var: None, innovation };
        if let Some(a) = alpha {
            let q = path.innovation.quantile(a.get());
            path.true_var =
                Some(path.true_mean.iter().zip(&path.true_sigma).map(|(m, s)| m + s * q).collect());
        }
        path
    }

    pub fn len(&self) -> usize {
        self.losses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.losses.is_empty()
    }

    /// Law of the loss at 1-based time `t`.
    pub fn distribution_at(&self, t: usize) -> LossDistribution<'_> {
        LossDistribution {
            location: self.true_mean[t - 1],
            scale: self.true_sigma[t - 1],
            innovation: &self.innovation,
        }
    }

    /// Writes `t, loss, true_mean, true_sigma, true_var` rows (1-based `t`;
    /// `true_var` is empty when no level was supplied).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "loss", "true_mean", "true_sigma", "true_var"])?;
        for idx in 0..self.len() {
            let var = self.true_var.as_ref().map(|v| format_sig(v[idx])).unwrap_or_default();
            w.write_record([
                (idx + 1).to_string(),
                format_sig(self.losses[idx]),
                format_sig(self.true_mean[idx]),
                format_sig(self.true_sigma[idx]),
                var,
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Formats with 12 significant digits, dropping trailing zeros.
pub fn format_sig(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        let s = if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.').to_string() } else { s };
        if s == "-0" { "0".into() } else { s }
    } else {
        let s = format!("{x:.11e}");
        let (mant, e) = s.split_once('e').expect("exponent present");
        let mant = if mant.contains('.') { mant.trim_end_matches('0').trim_end_matches('.') } else { mant };
        format!("{mant}e{e}")
    }
}

fn check_len(len: usize) -> Result<()> {
    if len == 0 {
        return Err(parameter("path length must be at least 1"));
    }
    Ok(())
}

fn gaussian_losses(mean: &[f64], sigma: &[f64], rng: &mut StreamRng) -> Vec<f64> {
    mean.iter()
        .zip(sigma)
        .map(|(m, s)| m + s * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Settings with abrupt breaks.
///
/// * A1: mean 1 up to `len/2`, then 2; variance 0.25.
/// * A2: mean 1 / 0 / 2 with breaks after 800 and 1400; variance 0.25.
/// * A3: A2's means with variances 0.25 / 1 / 0.49.
pub fn gen_setting_a(variant: Scenario, len: usize, seed: u64, alpha: Option<Level>) -> Result<ScenarioPath> {
    check_len(len)?;
    let regime = |t: usize| usize::from(t > 800) + usize::from(t > 1400);
    let (mean, var): (Vec<f64>, Vec<f64>) = match variant {
        Scenario::A1 => (1..=len).map(|t| (if 2 * t <= len { 1.0 } else { 2.0 }, 0.25)).unzip(),
        Scenario::A2 => (1..=len).map(|t| ([1.0, 0.0, 2.0][regime(t)], 0.25)).unzip(),
        Scenario::A3 => (1..=len).map(|t| ([1.0, 0.0, 2.0][regime(t)], [0.25, 1.0, 0.49][regime(t)])).unzip(),
        other => return Err(parameter(format!("{other} is not an abrupt-break setting"))),
    };
    let sigma: Vec<f64> = var.iter().map(|v| v.sqrt()).collect();
    let mut r = rng::stream(seed, &[0xA]);
    let losses = gaussian_losses(&mean, &sigma, &mut r);
    Ok(ScenarioPath::assemble(variant, seed, losses, mean, sigma, Innovation::Gaussian, alpha))
}

/// Settings with a continuously drifting mean and variance 0.25.
///
/// * B1: `mu_t = sin(2 pi t / len)`.
/// * B2: random walk from 0 with `N(0, 1/len)` increments.
/// * B3: `mu_t = exp((0.5 - 0.25/2) t/len + 0.5 W_t)`, `W` a random walk with
///   `N(0, 1/len)` increments.
pub fn gen_setting_b(variant: Scenario, len: usize, seed: u64, alpha: Option<Level>) -> Result<ScenarioPath> {
    check_len(len)?;
    let n = len as f64;
    let mut drift_rng = rng::stream(seed, &[0xB, 1]);
    let walk = |rng: &mut StreamRng| -> Vec<f64> {
        let sd = (1.0 / n).sqrt();
        let mut w = 0.0;
        (0..len)
            .map(|_| {
                w += sd * rng.sample::<f64, _>(StandardNormal);
                w
            })
            .collect()
    };
    let mean: Vec<f64> = match variant {
        Scenario::B1 => (1..=len).map(|t| (2.0 * std::f64::consts::PI * t as f64 / n).sin()).collect(),
        Scenario::B2 => walk(&mut drift_rng),
        Scenario::B3 => {
            let (mu0, mu, s2) = (1.0, 0.5, 0.25_f64);
            walk(&mut drift_rng)
                .into_iter()
                .enumerate()
                .map(|(idx, w)| mu0 * ((mu - s2 / 2.0) * (idx + 1) as f64 / n + s2.sqrt() * w).exp())
                .collect()
        }
        other => return Err(parameter(format!("{other} is not a drifting-mean setting"))),
    };
    let sigma = vec![0.5; len];
    let mut r = rng::stream(seed, &[0xB, 2]);
    let losses = gaussian_losses(&mean, &sigma, &mut r);
    Ok(ScenarioPath::assemble(variant, seed, losses, mean, sigma, Innovation::Gaussian, alpha))
}

const GARCH_OMEGA: f64 = 1e-5;
const GARCH_ARCH: f64 = 0.04;
const GARCH_BURN_IN: usize = 200;

fn garch_persistence(t: usize) -> f64 {
    if t > 1000 {
        0.95
    } else {
        0.7
    }
}

/// Unconditional variance of the pre-break regime, used to start the recursion.
pub fn garch_initial_variance() -> f64 {
    GARCH_OMEGA / (1.0 - GARCH_ARCH - garch_persistence(0))
}

/// Skewed-t GARCH(1,1) with a persistence shift after `t = 1000`:
/// `L_t = -sigma_t eps_t`, `sigma_t^2 = 1e-5 + 0.04 L_{t-1}^2 + g_t sigma_{t-1}^2`,
/// `g_t = 0.7` up to 1000 and 0.95 afterwards. The recursion starts at the
/// pre-break unconditional variance and runs 200 discarded steps first.
pub fn gen_garch(len: usize, seed: u64, alpha: Option<Level>) -> Result<ScenarioPath> {
    check_len(len)?;
    let eps_law = SkewedT::garch_innovation();
    let mut r = rng::stream(seed, &[0xC]);
    let mut var = garch_initial_variance();
    let mut loss = -var.sqrt() * eps_law.sample(&mut r);
    for _ in 1..GARCH_BURN_IN {
        var = GARCH_OMEGA + GARCH_ARCH * loss * loss + garch_persistence(0) * var;
        loss = -var.sqrt() * eps_law.sample(&mut r);
    }
    let mut losses = Vec::with_capacity(len);
    let mut sigma = Vec::with_capacity(len);
    for t in 1..=len {
        var = GARCH_OMEGA + GARCH_ARCH * loss * loss + garch_persistence(t) * var;
        let s = var.sqrt();
        loss = -s * eps_law.sample(&mut r);
        sigma.push(s);
        losses.push(loss);
    }
    Ok(ScenarioPath::assemble(
        Scenario::Garch,
        seed,
        losses,
        vec![0.0; len],
        sigma,
        Innovation::NegatedSkewedT(eps_law),
        alpha,
    ))
}
