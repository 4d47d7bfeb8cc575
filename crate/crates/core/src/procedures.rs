//! Concrete confidence procedures: the finite-window NP, UMP, SD, and
//! trivial intervals, plus the normal-model t interval.
//!
//! All window procedures are parameterized by the hull width; the
//! half-width `h = hull_width / 2` plays the role the constant 5 plays at
//! the default 10-meter width.

use thiserror::Error;

use crate::model::{Interval, ModelError, UniformDesign};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProcedureError {
    #[error("normal sample needs at least two values")]
    SampleTooSmall,
    #[error("sigma must be positive and finite, got {0}")]
    InvalidSigma(f64),
    #[error("sample values must be finite")]
    NonFiniteSample,
    #[error("alpha must lie strictly inside (0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error("relative width is undefined for an infinite interval")]
    InfiniteInterval,
    #[error("relative width {0} fell outside [0, 1]")]
    WidthOutOfRange(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A pair of observations from a uniform window design.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubmarineSample {
    x1: f64,
    x2: f64,
    design: UniformDesign,
}

impl SubmarineSample {
    pub fn new(x1: f64, x2: f64, design: UniformDesign) -> Result<Self, ModelError> {
        let (lo, hi) = design.support();
        for value in [x1, x2] {
            if !design.contains(value) {
                return Err(ModelError::SampleOutsideWindow { value, lo, hi });
            }
        }
        Ok(Self { x1, x2, design })
    }

    pub fn x1(&self) -> f64 {
        self.x1
    }

    pub fn x2(&self) -> f64 {
        self.x2
    }

    pub fn design(&self) -> UniformDesign {
        self.design
    }

    pub fn min(&self) -> f64 {
        self.x1.min(self.x2)
    }

    pub fn max(&self) -> f64 {
        self.x1.max(self.x2)
    }

    pub fn mean(&self) -> f64 {
        0.5 * (self.x1 + self.x2)
    }

    /// Spread `d = |x1 - x2|`.
    pub fn spread(&self) -> f64 {
        (self.x1 - self.x2).abs()
    }
}

/// The interval spanned by the two observations.
pub fn np_interval(sample: &SubmarineSample) -> Interval {
    Interval::new(sample.min(), sample.max()).expect("ordered endpoints")
}

/// The shorter of the two equal-coverage intervals: the spanned interval
/// when the spread is below the half-width, otherwise the window-clipped
/// interval. The spread-equals-half-width boundary takes the clipped branch.
pub fn ump_interval(sample: &SubmarineSample) -> Interval {
    let h = sample.design().half_width();
    let (lo, hi) = if sample.spread() < h {
        (sample.min(), sample.max())
    } else {
        (sample.max() - h, sample.min() + h)
    };
    Interval::new(lo, hi).expect("spread never exceeds the hull width")
}

/// Fixed-width interval around the sample mean, `x_bar +- h(1 - 1/sqrt(2))`,
/// sized so the mean of two uniforms lands inside exactly half the time.
pub fn sd_interval(sample: &SubmarineSample) -> Interval {
    let c = sd_half_width(sample.design().hull_width());
    let mean = sample.mean();
    Interval::new(mean - c, mean + c).expect("c is non-negative")
}

/// Half-width of the SD interval for a given hull width.
pub fn sd_half_width(hull_width: f64) -> f64 {
    0.5 * hull_width * (1.0 - std::f64::consts::FRAC_1_SQRT_2)
}

/// The `[-inf, inf]` interval; its coverage indicator is identically 1.
pub fn trivial_interval() -> Interval {
    Interval::unbounded()
}

/// Interval length divided by the window length; must land in [0, 1] for
/// the window procedures. Infinite intervals have no relative width.
pub fn relative_width(interval: &Interval, hull_width: f64) -> Result<f64, ProcedureError> {
    if !(hull_width.is_finite() && hull_width > 0.0) {
        return Err(ModelError::InvalidHullWidth(hull_width).into());
    }
    if !interval.is_finite() {
        return Err(ProcedureError::InfiniteInterval);
    }
    let w = interval.width() / hull_width;
    if !(0.0..=1.0).contains(&w) {
        return Err(ProcedureError::WidthOutOfRange(w));
    }
    Ok(w)
}

/// `min(d, 1 - d)`: the folded relative width, which is the short
/// interval's relative width. A deterministic coarsening of `d`.
pub fn folded_width(d: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&d), "relative width out of range: {d}");
    d.min(1.0 - d)
}

/// A normal sample with simulation-known mean and scale.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalSample {
    values: Vec<f64>,
    mu: f64,
    sigma: f64,
}

impl NormalSample {
    pub fn new(values: Vec<f64>, mu: f64, sigma: f64) -> Result<Self, ProcedureError> {
        if values.len() < 2 {
            return Err(ProcedureError::SampleTooSmall);
        }
        if values.iter().any(|v| !v.is_finite()) || !mu.is_finite() {
            return Err(ProcedureError::NonFiniteSample);
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(ProcedureError::InvalidSigma(sigma));
        }
        Ok(Self { values, mu, sigma })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.len() as f64
    }

    /// Sample standard deviation with the n-1 divisor.
    pub fn sample_sd(&self) -> f64 {
        let mean = self.mean();
        let ss: f64 = self.values.iter().map(|v| (v - mean) * (v - mean)).sum();
        (ss / (self.len() - 1) as f64).sqrt()
    }
}

/// Two-sided t interval `mean +- t_crit(n-1, 1-alpha/2) * sd / sqrt(n)`.
/// A zero-variance sample yields a width-0 interval; callers may flag it.
pub fn t_interval(sample: &NormalSample, alpha: f64) -> Result<Interval, ProcedureError> {
    if !(alpha.is_finite() && 0.0 < alpha && alpha < 1.0) {
        return Err(ProcedureError::InvalidAlpha(alpha));
    }
    let n = sample.len() as f64;
    let crit = t_quantile(1.0 - alpha / 2.0, n - 1.0);
    let half = crit * sample.sample_sd() / n.sqrt();
    let mean = sample.mean();
    Ok(Interval::new(mean - half, mean + half).expect("half-width is non-negative"))
}

pub use student_t::{cdf as t_cdf, quantile as t_quantile};

/// Student-t distribution via ln-gamma and the regularized incomplete beta
/// function; quantiles by bisection. No table dependency.
mod student_t {
    /// CDF of the t distribution with `df` degrees of freedom.
    pub fn cdf(t: f64, df: f64) -> f64 {
        assert!(df > 0.0, "degrees of freedom must be positive");
        if t == 0.0 {
            return 0.5;
        }
        let x = df / (df + t * t);
        let tail = 0.5 * regularized_incomplete_beta(x, 0.5 * df, 0.5);
        if t > 0.0 {
            1.0 - tail
        } else {
            tail
        }
    }

    /// Inverse CDF by bisection on the CDF, to an absolute 1e-10 on t.
    pub fn quantile(p: f64, df: f64) -> f64 {
        assert!(df > 0.0, "degrees of freedom must be positive");
        assert!(0.0 < p && p < 1.0, "p must lie strictly inside (0, 1)");
        if p < 0.5 {
            return -quantile(1.0 - p, df);
        }
        let mut lo = 0.0_f64;
        let mut hi = 1.0_f64;
        while cdf(hi, df) < p {
            hi *= 2.0;
            if hi > 1e300 {
                break;
            }
        }
        while hi - lo > 1e-10 {
            let mid = 0.5 * (lo + hi);
            if cdf(mid, df) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    // Lanczos approximation, g = 7, 9 coefficients.
    const LANCZOS: [f64; 8] = [
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];

    fn ln_gamma(x: f64) -> f64 {
        if x < 0.5 {
            let pi = std::f64::consts::PI;
            return pi.ln() - (pi * x).sin().ln() - ln_gamma(1.0 - x);
        }
        let x = x - 1.0;
        let mut acc = 0.999_999_999_999_809_9;
        for (i, &c) in LANCZOS.iter().enumerate() {
            acc += c / (x + i as f64 + 1.0);
        }
        let t = x + 7.5;
        0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
    }

    /// Regularized incomplete beta I_x(a, b), continued fraction form.
    fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        let ln_front =
            ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
        let front = ln_front.exp();
        if x < (a + 1.0) / (a + b + 2.0) {
            front * beta_continued_fraction(x, a, b) / a
        } else {
            1.0 - front * beta_continued_fraction(1.0 - x, b, a) / b
        }
    }

    // Lentz's algorithm.
    fn beta_continued_fraction(x: f64, a: f64, b: f64) -> f64 {
        const MAX_ITER: usize = 300;
        const EPS: f64 = 3e-16;
        const FPMIN: f64 = 1e-300;

        let qab = a + b;
        let qap = a + 1.0;
        let qam = a - 1.0;
        let mut c = 1.0;
        let mut d = 1.0 - qab * x / qap;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        d = 1.0 / d;
        let mut h = d;
        for m in 1..=MAX_ITER {
            let m = m as f64;
            let m2 = 2.0 * m;
            let numerator = m * (b - m) * x / ((qam + m2) * (a + m2));
            d = 1.0 + numerator * d;
            if d.abs() < FPMIN {
                d = FPMIN;
            }
            c = 1.0 + numerator / c;
            if c.abs() < FPMIN {
                c = FPMIN;
            }
            d = 1.0 / d;
            h *= d * c;
            let numerator = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
            d = 1.0 + numerator * d;
            if d.abs() < FPMIN {
                d = FPMIN;
            }
            c = 1.0 + numerator / c;
            if c.abs() < FPMIN {
                c = FPMIN;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < EPS {
                break;
            }
        }
        h
    }

}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(x1: f64, x2: f64, theta: f64, hull: f64) -> SubmarineSample {
        SubmarineSample::new(x1, x2, UniformDesign::new(theta, hull).unwrap()).unwrap()
    }

    #[test]
    fn np_spans_the_observations() {
        let s = sample(2.0, 7.0, 4.0, 10.0);
        let i = np_interval(&s);
        assert_eq!((i.lower(), i.upper()), (2.0, 7.0));
        // order invariance
        let s = sample(7.0, 2.0, 4.0, 10.0);
        let i = np_interval(&s);
        assert_eq!((i.lower(), i.upper()), (2.0, 7.0));
    }

    #[test]
    fn ump_branches() {
        // wide spread clips to the window-consistent core
        let s = sample(0.0, 8.0, 4.0, 10.0);
        let i = ump_interval(&s);
        assert_eq!((i.lower(), i.upper()), (3.0, 5.0));
        // narrow spread keeps the spanned interval
        let s = sample(0.0, 2.0, 1.0, 10.0);
        let i = ump_interval(&s);
        assert_eq!((i.lower(), i.upper()), (0.0, 2.0));
        // boundary spread d == h goes to the clipped branch (same endpoints)
        let s = sample(0.0, 5.0, 2.5, 10.0);
        let i = ump_interval(&s);
        assert_eq!((i.lower(), i.upper()), (0.0, 5.0));
    }

    #[test]
    fn sd_is_fixed_width_around_the_mean() {
        let c = 5.0 - 5.0 / std::f64::consts::SQRT_2;
        let s = sample(-1.0, 1.0, 0.0, 10.0);
        let i = sd_interval(&s);
        assert!((i.lower() + c).abs() < 1e-12);
        assert!((i.upper() - c).abs() < 1e-12);
        assert!((c - 1.464_466_094_067_262).abs() < 1e-12);
        // degenerate sample still gets the full width
        let s = sample(0.0, 0.0, 0.0, 10.0);
        let i = sd_interval(&s);
        assert!((i.width() - 2.0 * c).abs() < 1e-12);
    }

    #[test]
    fn trivial_is_unbounded() {
        let i = trivial_interval();
        assert_eq!(i.lower(), f64::NEG_INFINITY);
        assert_eq!(i.upper(), f64::INFINITY);
    }

    #[test]
    fn relative_width_examples() {
        let i = Interval::new(2.0, 7.0).unwrap();
        assert_eq!(relative_width(&i, 10.0).unwrap(), 0.5);
        let i = Interval::new(0.0, 2.5).unwrap();
        assert_eq!(relative_width(&i, 10.0).unwrap(), 0.25);
        assert!(matches!(
            relative_width(&trivial_interval(), 10.0),
            Err(ProcedureError::InfiniteInterval)
        ));
        let too_wide = Interval::new(0.0, 20.0).unwrap();
        assert!(matches!(
            relative_width(&too_wide, 10.0),
            Err(ProcedureError::WidthOutOfRange(_))
        ));
    }

    #[test]
    fn folded_width_examples() {
        assert!((folded_width(0.8) - 0.2).abs() < 1e-15);
        assert_eq!(folded_width(0.5), 0.5);
        assert_eq!(folded_width(0.0), 0.0);
    }

    #[test]
    fn sample_outside_window_is_rejected() {
        let design = UniformDesign::new(0.0, 10.0).unwrap();
        assert!(SubmarineSample::new(0.0, 5.1, design).is_err());
        assert!(SubmarineSample::new(-5.1, 0.0, design).is_err());
        assert!(SubmarineSample::new(-5.0, 5.0, design).is_ok());
    }

    #[test]
    fn t_interval_basics() {
        let s = NormalSample::new(vec![1.0, 2.0, 3.0, 4.0, 5.0], 3.0, 1.0).unwrap();
        let i = t_interval(&s, 0.05).unwrap();
        // mean 3, sd sqrt(2.5), half-width 2.776445 * sqrt(2.5) / sqrt(5)
        let half = 2.776_445 * (2.5_f64).sqrt() / 5.0_f64.sqrt();
        assert!((i.midpoint() - 3.0).abs() < 1e-12);
        assert!((i.width() - 2.0 * half).abs() < 1e-4);
    }

    #[test]
    fn t_interval_degenerate_sample() {
        let s = NormalSample::new(vec![0.0; 5], 0.0, 1.0).unwrap();
        let i = t_interval(&s, 0.05).unwrap();
        assert_eq!(i.width(), 0.0);
        assert_eq!(i.midpoint(), 0.0);
    }

    #[test]
    fn t_interval_validation() {
        assert!(matches!(
            NormalSample::new(vec![1.0], 0.0, 1.0),
            Err(ProcedureError::SampleTooSmall)
        ));
        assert!(matches!(
            NormalSample::new(vec![1.0, 2.0], 0.0, 0.0),
            Err(ProcedureError::InvalidSigma(_))
        ));
        let s = NormalSample::new(vec![1.0, 2.0], 0.0, 1.0).unwrap();
        assert!(matches!(
            t_interval(&s, 0.0),
            Err(ProcedureError::InvalidAlpha(_))
        ));
    }
}
