//! Exact empirical minimizers of the window objective `f_{t,k}` for each
//! forecast target.
//!
//! All fits go through [`WindowSummary`], a sorted copy of the window with
//! prefix sums. It evaluates the empirical pinball and joint scores at any
//! parameter in `O(log k)`, which is what makes the pairwise stability tests
//! and bootstrap gaps cheap.

use crate::error::{domain, Result};
use crate::scoring::{g2, g2_antiderivative, empirical_score, ForecastTarget, Level, ParamVector};

/// Minimizer of the empirical score on one window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    pub theta: ParamVector,
    /// Empirical score of the window at `theta`.
    pub achieved_score: f64,
    pub window_length: usize,
}

/// 1-based order-statistic index of the empirical `alpha`-quantile minimizer:
/// `ceil(alpha * k)`, or `alpha * k` itself when that is an integer (the lower
/// end of the minimizing interval).
pub fn var_order_index(k: usize, alpha: f64) -> usize {
    let ak = alpha * k as f64;
    let nearest = ak.round();
    let j = if (ak - nearest).abs() <= 1e-9 * ak.max(1.0) {
        nearest as usize
    } else {
        ak.ceil() as usize
    };
    j.clamp(1, k)
}

/// Sorted window with prefix sums of deviations from an anchor point (the
/// median), so constant windows produce exactly zero scores.
#[derive(Debug, Clone)]
pub struct WindowSummary {
    sorted: Vec<f64>,
    anchor: f64,
    prefix: Vec<f64>,
    mean: f64,
    /// Population variance (divisor `k`).
    spread: f64,
}

impl WindowSummary {
    pub fn new(window: &[f64]) -> Result<Self> {
        if window.is_empty() {
            return Err(domain("cannot fit on an empty window"));
        }
        if window.iter().any(|x| !x.is_finite()) {
            return Err(domain("window contains non-finite values"));
        }
        Ok(Self::from_finite(window.to_vec()))
    }

    /// Builds a summary from owned, finite, non-empty data.
    pub(crate) fn from_finite(mut data: Vec<f64>) -> Self {
        let k = data.len() as f64;
        let mean = shifted_mean(&data);
        let spread = data.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / k;
        data.sort_unstable_by(f64::total_cmp);
        let anchor = data[data.len() / 2];
        let mut prefix = Vec::with_capacity(data.len() + 1);
        let mut acc = 0.0;
        prefix.push(0.0);
        for &x in &data {
            acc += x - anchor;
            prefix.push(acc);
        }
        Self { sorted: data, anchor, prefix, mean, spread }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Number of observations strictly below `v`.
    #[inline]
    fn count_below(&self, v: f64) -> usize {
        self.sorted.partition_point(|&x| x < v)
    }

    /// `(sum_{x<v} (v - x), sum_{x>=v} (x - v))`.
    #[inline]
    fn split_sums(&self, v: f64) -> (f64, f64) {
        let p = self.count_below(v);
        self.split_sums_at(p, v)
    }

    #[inline]
    fn split_sums_at(&self, p: usize, v: f64) -> (f64, f64) {
        let k = self.sorted.len();
        let d = v - self.anchor;
        let below = p as f64 * d - self.prefix[p];
        let above = (self.prefix[k] - self.prefix[p]) - (k - p) as f64 * d;
        (below, above)
    }

    /// Empirical pinball score at `v`.
    pub fn pinball(&self, v: f64, alpha: f64) -> f64 {
        let (below, above) = self.split_sums(v);
        ((1.0 - alpha) * below + alpha * above) / self.len() as f64
    }

    /// Empirical joint (VaR, ES) score at `(v, e)`.
    pub fn joint(&self, v: f64, e: f64, alpha: f64) -> f64 {
        let k = self.len() as f64;
        let (below, above) = self.split_sums(v);
        let ge = g2(e);
        ((1.0 - alpha) * below + alpha * above) / k - ge * above / ((1.0 - alpha) * k)
            + ge * (e - v)
            - g2_antiderivative(e)
    }

    /// Empirical score `f(theta)` of this window for `target`.
    pub fn objective(&self, target: &ForecastTarget, theta: &ParamVector) -> f64 {
        match (target, theta) {
            (ForecastTarget::Mean, ParamVector::Scalar(mu)) => {
                self.spread + (mu - self.mean) * (mu - self.mean)
            }
            (ForecastTarget::Var { alpha }, ParamVector::Scalar(v)) => self.pinball(*v, alpha.get()),
            (ForecastTarget::VarEs { alpha }, ParamVector::Pair(v, e)) => {
                self.joint(*v, *e, alpha.get())
            }
            _ => panic!("parameter dimension {} does not match target {target}", theta.dim()),
        }
    }

    pub fn fit_mean(&self) -> FitResult {
        FitResult {
            theta: ParamVector::Scalar(self.mean),
            achieved_score: self.spread,
            window_length: self.len(),
        }
    }

    pub fn fit_var(&self, alpha: Level) -> FitResult {
        let j = var_order_index(self.len(), alpha.get());
        let v = self.sorted[j - 1];
        FitResult {
            theta: ParamVector::Scalar(v),
            achieved_score: self.pinball(v, alpha.get()),
            window_length: self.len(),
        }
    }

    /// First-order-condition ES for a fixed VaR `v`.
    pub fn tail_es_given_v(&self, v: f64, alpha: Level) -> f64 {
        let (_, above) = self.split_sums(v);
        v + above / ((1.0 - alpha.get()) * self.len() as f64)
    }

    /// Profile minimization over `v` in the sample points with closed-form `e(v)`.
    pub fn fit_var_es(&self, alpha: Level) -> FitResult {
        let a = alpha.get();
        let k = self.len();
        let kf = k as f64;
        let mut best: Option<(f64, f64, f64)> = None;
        let mut p = 0;
        while p < k {
            let v = self.sorted[p];
            let (below, above) = self.split_sums_at(p, v);
            let e = v + above / ((1.0 - a) * kf);
            let ge = g2(e);
            let score = ((1.0 - a) * below + a * above) / kf - ge * above / ((1.0 - a) * kf)
                + ge * (e - v)
                - g2_antiderivative(e);
            // near-equal profile scores count as ties and keep the smaller v
            if best.is_none_or(|(s, _, _)| score < s - 1e-12 * s.abs().max(1.0)) {
                best = Some((score, v, e));
            }
            // skip duplicates of v
            p += self.sorted[p..].partition_point(|&x| x <= v);
        }
        let (score, v, e) = best.expect("non-empty window");
        FitResult { theta: ParamVector::Pair(v, e), achieved_score: score, window_length: k }
    }

    pub fn fit(&self, target: &ForecastTarget) -> FitResult {
        match target {
            ForecastTarget::Mean => self.fit_mean(),
            ForecastTarget::Var { alpha } => self.fit_var(*alpha),
            ForecastTarget::VarEs { alpha } => self.fit_var_es(*alpha),
        }
    }
}

/// Mean computed as `x_0 + mean(x - x_0)`; exact on constant data.
pub(crate) fn shifted_mean(data: &[f64]) -> f64 {
    let x0 = data[0];
    x0 + data.iter().map(|x| x - x0).sum::<f64>() / data.len() as f64
}

/// Sample mean.
pub fn fit_mean(window: &[f64]) -> Result<FitResult> {
    Ok(WindowSummary::new(window)?.fit_mean())
}

/// Empirical VaR: the order statistic given by [`var_order_index`].
pub fn fit_var(window: &[f64], alpha: Level) -> Result<FitResult> {
    Ok(WindowSummary::new(window)?.fit_var(alpha))
}

/// `e(v) = v + (1/(1-alpha)) * (1/k) * sum 1{x >= v}(x - v)`.
pub fn tail_es_given_v(window: &[f64], v: f64, alpha: Level) -> Result<f64> {
    Ok(WindowSummary::new(window)?.tail_es_given_v(v, alpha))
}

/// Exact joint (VaR, ES) minimizer; ties go to the smallest `v`.
pub fn fit_var_es(window: &[f64], alpha: Level) -> Result<FitResult> {
    Ok(WindowSummary::new(window)?.fit_var_es(alpha))
}

/// Fits `target` on `window`.
pub fn fit(window: &[f64], target: &ForecastTarget) -> Result<FitResult> {
    Ok(WindowSummary::new(window)?.fit(target))
}

/// Direct `O(k)` evaluation, used to cross-check [`WindowSummary::objective`].
pub fn direct_objective(window: &[f64], target: &ForecastTarget, theta: &ParamVector) -> Result<f64> {
    empirical_score(window, theta, target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn lvl(a: f64) -> Level {
        Level::new(a).unwrap()
    }

    fn permuted(n: usize, seed: u64) -> Vec<f64> {
        let mut v: Vec<f64> = (1..=n).map(|i| i as f64).collect();
        v.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        v
    }

    /// Brute-force VaR: the sample point with the smallest direct pinball score,
    /// ties to the smallest point.
    fn brute_var(window: &[f64], alpha: f64) -> (f64, f64) {
        let target = ForecastTarget::var(alpha).unwrap();
        let mut pts = window.to_vec();
        pts.sort_by(f64::total_cmp);
        let mut best = (f64::INFINITY, f64::NAN);
        for &v in &pts {
            let s = empirical_score(window, &ParamVector::Scalar(v), &target).unwrap();
            if s < best.0 - 1e-12 {
                best = (s, v);
            }
        }
        best
    }

    #[test]
    fn mean_examples() {
        assert_eq!(fit_mean(&[1.0, 2.0, 3.0]).unwrap().theta, ParamVector::Scalar(2.0));
        assert_eq!(fit_mean(&[7.5]).unwrap().theta, ParamVector::Scalar(7.5));
        assert_eq!(fit_mean(&[-1.0, 1.0]).unwrap().theta, ParamVector::Scalar(0.0));
        assert!(fit_mean(&[]).is_err());
    }

    #[test]
    fn mean_is_a_strict_minimizer() {
        let w = permuted(37, 3);
        let fit = fit_mean(&w).unwrap();
        let mu = fit.theta.first();
        for eps in [1e-3, -1e-3] {
            let s = empirical_score(&w, &ParamVector::Scalar(mu + eps), &ForecastTarget::Mean).unwrap();
            assert!(s > fit.achieved_score);
        }
    }

    #[test]
    fn var_examples() {
        let fit = fit_var(&permuted(20, 1), lvl(0.9)).unwrap();
        assert_eq!(fit.theta, ParamVector::Scalar(18.0));
        assert_eq!(brute_var(&permuted(20, 1), 0.9).1, 18.0);

        let fit = fit_var(&permuted(100, 2), lvl(0.95)).unwrap();
        assert_eq!(fit.theta, ParamVector::Scalar(95.0));
        assert_eq!(brute_var(&permuted(100, 2), 0.95).1, 95.0);

        let fit = fit_var(&[3.3; 9], lvl(0.95)).unwrap();
        assert_eq!(fit.theta, ParamVector::Scalar(3.3));
        assert_eq!(fit.achieved_score, 0.0);

        assert!(fit_var(&[], lvl(0.9)).is_err());
    }

    #[test]
    fn order_index_rule() {
        assert_eq!(var_order_index(20, 0.9), 18);
        assert_eq!(var_order_index(100, 0.95), 95);
        assert_eq!(var_order_index(10, 0.95), 10);
        assert_eq!(var_order_index(7, 0.5), 4);
        assert_eq!(var_order_index(1, 0.01), 1);
        assert_eq!(var_order_index(250, 0.95), 238);
    }

    #[test]
    fn tail_es_examples() {
        let w = permuted(20, 5);
        assert!((tail_es_given_v(&w, 18.0, lvl(0.9)).unwrap() - 19.5).abs() < 1e-12);
        assert_eq!(tail_es_given_v(&[2.0; 4], 2.0, lvl(0.9)).unwrap(), 2.0);
        assert!((tail_es_given_v(&[0.0, 10.0], 0.0, lvl(0.5)).unwrap() - 10.0).abs() < 1e-12);
        assert!(tail_es_given_v(&[], 0.0, lvl(0.5)).is_err());
    }

    #[test]
    fn tail_es_is_stationary_in_e() {
        let w = permuted(31, 9);
        let a = 0.8;
        let s = WindowSummary::new(&w).unwrap();
        let v = 22.0;
        let e = s.tail_es_given_v(v, lvl(a));
        let h = 1e-5;
        let d = (s.joint(v, e + h, a) - s.joint(v, e - h, a)) / (2.0 * h);
        assert!(d.abs() < 1e-7, "{d}");
    }

    #[test]
    fn var_es_examples() {
        let w = permuted(20, 11);
        let fit = fit_var_es(&w, lvl(0.9)).unwrap();
        assert_eq!(fit.theta.first(), 18.0);
        assert!((fit.theta.second().unwrap() - 19.5).abs() < 1e-12);

        // brute force over sample points x fine e grid
        let target = ForecastTarget::var_es(0.9).unwrap();
        let mut best = f64::INFINITY;
        for &v in &w {
            for j in 0..=4000 {
                let e = 10.0 + j as f64 * 0.005;
                let s = empirical_score(&w, &ParamVector::Pair(v, e), &target).unwrap();
                best = best.min(s);
            }
        }
        assert!(fit.achieved_score <= best + 1e-12);
        assert!(best - fit.achieved_score < 1e-4);

        let fit = fit_var_es(&[-0.4; 5], lvl(0.95)).unwrap();
        assert_eq!(fit.theta, ParamVector::Pair(-0.4, -0.4));
    }

    #[test]
    fn var_es_large_sample_matches_normal_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let w: Vec<f64> = (0..100_000).map(|_| rng.sample(StandardNormal)).collect();
        let fit = fit_var_es(&w, lvl(0.95)).unwrap();
        let (v, e) = (fit.theta.first(), fit.theta.second().unwrap());
        assert!((v - 1.6449).abs() < 0.05, "{v}");
        assert!((e - 2.0627).abs() < 0.05, "{e}");
    }

    #[test]
    fn single_point_windows() {
        let fit = fit_var_es(&[1.25], lvl(0.99)).unwrap();
        assert_eq!(fit.theta, ParamVector::Pair(1.25, 1.25));
        assert_eq!(fit_var(&[1.25], lvl(0.01)).unwrap().theta, ParamVector::Scalar(1.25));
    }

    #[test]
    fn no_sample_point_beats_the_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..200 {
            let k = rng.random_range(1..=200);
            let w: Vec<f64> = (0..k).map(|_| rng.random_range(-3.0..3.0)).collect();
            let alpha = rng.random_range(0.5..0.99);
            let var = fit_var(&w, lvl(alpha)).unwrap();
            let (bs, _) = brute_var(&w, alpha);
            assert!(var.achieved_score <= bs + 1e-12);

            let joint = fit_var_es(&w, lvl(alpha)).unwrap();
            let target = ForecastTarget::var_es(alpha).unwrap();
            for &v in &w {
                let e = tail_es_given_v(&w, v, lvl(alpha)).unwrap();
                let s = empirical_score(&w, &ParamVector::Pair(v, e), &target).unwrap();
                assert!(joint.achieved_score <= s + 1e-12);
            }
        }
    }

    #[test]
    fn var_es_and_var_agree_up_to_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(4242);
        for _ in 0..1000 {
            let k = rng.random_range(1..=40);
            let w: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let alpha = rng.random_range(0.5..0.99);
            let s = WindowSummary::new(&w).unwrap();
            let v1 = s.fit_var(lvl(alpha)).theta.first();
            let v2 = s.fit_var_es(lvl(alpha)).theta.first();
            if v1 != v2 {
                let profile = |v: f64| s.joint(v, s.tail_es_given_v(v, lvl(alpha)), alpha);
                assert!((profile(v1) - profile(v2)).abs() < 1e-12, "{w:?} {alpha}");
            }
        }
    }

    #[test]
    fn achieved_score_matches_direct_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for target in [
            ForecastTarget::Mean,
            ForecastTarget::var(0.95).unwrap(),
            ForecastTarget::var_es(0.975).unwrap(),
        ] {
            for _ in 0..50 {
                let k = rng.random_range(1..=300);
                let w: Vec<f64> = (0..k).map(|_| rng.random_range(-5.0..5.0)).collect();
                let f = fit(&w, &target).unwrap();
                let d = direct_objective(&w, &target, &f.theta).unwrap();
                assert!((f.achieved_score - d).abs() < 1e-12, "{target} {} vs {d}", f.achieved_score);
                assert_eq!(f.window_length, k);
            }
        }
    }

    proptest! {
        #[test]
        fn summary_objective_matches_direct(
            xs in proptest::collection::vec(-10.0f64..10.0, 1..80),
            v in -12.0f64..12.0,
            e in -12.0f64..12.0,
            alpha in 0.01f64..0.99,
        ) {
            let s = WindowSummary::new(&xs).unwrap();
            for (target, theta) in [
                (ForecastTarget::Mean, ParamVector::Scalar(v)),
                (ForecastTarget::var(alpha).unwrap(), ParamVector::Scalar(v)),
                (ForecastTarget::var_es(alpha).unwrap(), ParamVector::Pair(v, e)),
            ] {
                let fast = s.objective(&target, &theta);
                let slow = direct_objective(&xs, &target, &theta).unwrap();
                prop_assert!((fast - slow).abs() < 1e-10 * slow.abs().max(1.0));
            }
        }

        #[test]
        fn fits_are_location_equivariant(
            xs in proptest::collection::vec(-5.0f64..5.0, 1..60),
            c in -100.0f64..100.0,
        ) {
            let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
            let a = lvl(0.9);
            let v0 = fit_var(&xs, a).unwrap().theta.first();
            let v1 = fit_var(&shifted, a).unwrap().theta.first();
            prop_assert!((v1 - (v0 + c)).abs() < 1e-12 * c.abs().max(1.0));
            let m0 = fit_mean(&xs).unwrap().theta.first();
            let m1 = fit_mean(&shifted).unwrap().theta.first();
            prop_assert!((m1 - (m0 + c)).abs() < 1e-10 * c.abs().max(1.0));
            let j0 = fit_var_es(&xs, a).unwrap().theta;
            let j1 = fit_var_es(&shifted, a).unwrap().theta;
            prop_assert!((j1.first() - (j0.first() + c)).abs() < 1e-12 * c.abs().max(1.0));
            prop_assert!((j1.second().unwrap() - (j0.second().unwrap() + c)).abs() < 1e-9 * c.abs().max(1.0));
        }
    }
}
