//! Thin wrappers over `statrs` for the handful of distribution functions used
//! throughout the crate.

use std::sync::OnceLock;

use statrs::distribution::{Continuous, ContinuousCDF, Normal, StudentsT};

fn std_normal() -> &'static Normal {
    static N: OnceLock<Normal> = OnceLock::new();
    N.get_or_init(|| Normal::new(0.0, 1.0).expect("valid standard normal"))
}

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    std_normal().pdf(x)
}

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    std_normal().cdf(x)
}

/// Standard normal quantile. `p` must lie in (0, 1).
pub fn norm_quantile(p: f64) -> f64 {
    std_normal().inverse_cdf(p)
}

/// Unit-scale Student-t distribution with `nu` degrees of freedom.
#[derive(Debug, Clone)]
pub struct StudentT {
    nu: f64,
    inner: StudentsT,
}

impl StudentT {
    pub fn new(nu: f64) -> Option<Self> {
        if !(nu.is_finite() && nu > 0.0) {
            return None;
        }
        StudentsT::new(0.0, 1.0, nu)
            .ok()
            .map(|inner| Self { nu, inner })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.inner.pdf(x)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.inner.cdf(x)
    }

    pub fn quantile(&self, p: f64) -> f64 {
        self.inner.inverse_cdf(p)
    }

    /// `E[T 1{T >= a}] = (nu + a^2) / (nu - 1) * pdf(a)`, valid for `nu > 1`.
    pub fn upper_partial_mean(&self, a: f64) -> f64 {
        (self.nu + a * a) / (self.nu - 1.0) * self.pdf(a)
    }
}
