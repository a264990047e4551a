//! Time and disorder averages, convergence checks and power-law fits.

use std::f64::consts::TAU;

use crate::error::{Error, Result};

/// Relative tolerance separating converged from unconverged sweep points.
pub const CONVERGENCE_TOLERANCE: f64 = 0.01;

/// Slack allowed when checking that a trajectory covers a window.
const COVERAGE_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WindowAverage {
    pub mean: f64,
    /// Sample standard deviation over `√M`, ignoring autocorrelation.
    pub stderr: f64,
    pub samples: usize,
}

/// Mean of the samples with `lo <= τ <= hi`; the series must span the window.
pub fn saturation_average(series: &[(f64, f64)], lo: f64, hi: f64) -> Result<WindowAverage> {
    if !(lo <= hi) {
        return Err(Error::Parameter(format!("empty window [{lo}, {hi}]")));
    }
    let (first, last) = match (series.first(), series.last()) {
        (Some(a), Some(b)) => (a.0, b.0),
        _ => return Err(Error::InsufficientData { needed: 1, got: 0 }),
    };
    let slack = COVERAGE_SLACK * hi.abs().max(1.0);
    if first > lo + slack || last < hi - slack {
        return Err(Error::Analysis(format!(
            "trajectory [{first}, {last}] does not cover the window [{lo}, {hi}]"
        )));
    }
    let values: Vec<f64> = series.iter().filter(|(t, _)| (lo..=hi).contains(t)).map(|p| p.1).collect();
    let m = values.len();
    if m == 0 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let mean = values.iter().sum::<f64>() / m as f64;
    let stderr = if m > 1 {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
        (var / m as f64).sqrt()
    } else {
        0.0
    };
    Ok(WindowAverage { mean, stderr, samples: m })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DisorderAverage {
    pub mean: f64,
    /// Sample standard deviation over `√M`.
    pub stderr: f64,
    pub count: usize,
}

pub fn disorder_average(values: &[f64]) -> Result<DisorderAverage> {
    let m = values.len();
    if m < 2 {
        return Err(Error::InsufficientData { needed: 2, got: m });
    }
    let mean = values.iter().sum::<f64>() / m as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
    Ok(DisorderAverage { mean, stderr: (var / m as f64).sqrt(), count: m })
}

/// Outcome of an `E_C` ladder: a point is converged when the saturated
/// fraction moves by less than `tolerance` relative (default [`CONVERGENCE_TOLERANCE`]).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergenceReport {
    pub coarse: f64,
    pub fine: f64,
    pub relative_change: f64,
    pub converged: bool,
}

pub fn convergence_report(coarse: f64, fine: f64, tolerance: f64) -> ConvergenceReport {
    let relative_change = if fine == 0.0 {
        if coarse == 0.0 { 0.0 } else { f64::INFINITY }
    } else {
        ((fine - coarse) / fine).abs()
    };
    ConvergenceReport { coarse, fine, relative_change, converged: relative_change < tolerance }
}

/// One `(α, f_R_sat)` point of a sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepPoint {
    pub alpha: f64,
    pub d: usize,
    pub atoms: usize,
    pub c6: f64,
    pub realizations: usize,
    pub f_r: f64,
    pub stderr: f64,
    pub cutoff: f64,
    pub converged: bool,
}

impl SweepPoint {
    /// Point without an ensemble behind it, e.g. from the mean-field solver.
    pub fn bare(alpha: f64, d: usize, f_r: f64) -> Self {
        Self { alpha, d, atoms: 0, c6: 0.0, realizations: 0, f_r, stderr: 0.0, cutoff: 0.0, converged: true }
    }
}

/// `f_R = c · α^ν`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerLawFit {
    pub nu: f64,
    pub c: f64,
    pub stderr_nu: f64,
    pub r_squared: f64,
    pub points: usize,
}

impl PowerLawFit {
    pub fn eval(&self, alpha: f64) -> f64 {
        self.c * alpha.powf(self.nu)
    }
}

/// Weighted least squares of `ln f` on `ln α` over converged points.
///
/// The weight of a point is `(f / stderr)^2`, the inverse variance of `ln f`;
/// when any stderr is zero the fit is unweighted. `stderr_nu` is the usual
/// residual-scaled slope error and needs at least three points.
pub fn powerlaw_fit(points: &[SweepPoint]) -> Result<PowerLawFit> {
    let used: Vec<&SweepPoint> = points.iter().filter(|p| p.converged).collect();
    if used.len() < 3 {
        return Err(Error::InsufficientData { needed: 3, got: used.len() });
    }
    if used.iter().any(|p| !(p.alpha > 0.0 && p.f_r > 0.0)) {
        return Err(Error::Analysis("power-law fit needs positive alpha and f_R".into()));
    }
    let weighted = used.iter().all(|p| p.stderr > 0.0);
    let data: Vec<(f64, f64, f64)> = used
        .iter()
        .map(|p| {
            let w = if weighted { (p.f_r / p.stderr).powi(2) } else { 1.0 };
            (p.alpha.ln(), p.f_r.ln(), w)
        })
        .collect();
    let sw: f64 = data.iter().map(|d| d.2).sum();
    let xm = data.iter().map(|d| d.2 * d.0).sum::<f64>() / sw;
    let ym = data.iter().map(|d| d.2 * d.1).sum::<f64>() / sw;
    let sxx: f64 = data.iter().map(|d| d.2 * (d.0 - xm).powi(2)).sum();
    let sxy: f64 = data.iter().map(|d| d.2 * (d.0 - xm) * (d.1 - ym)).sum();
    let syy: f64 = data.iter().map(|d| d.2 * (d.1 - ym).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::Analysis("all alpha values coincide".into()));
    }
    let nu = sxy / sxx;
    let intercept = ym - nu * xm;
    let sse: f64 = data.iter().map(|d| d.2 * (d.1 - intercept - nu * d.0).powi(2)).sum();
    let dof = (data.len() - 2) as f64;
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Ok(PowerLawFit {
        nu,
        c: intercept.exp(),
        stderr_nu: (sse / dof / sxx).sqrt(),
        r_squared,
        points: data.len(),
    })
}

/// Angular frequency of the strongest periodogram peak of `series`
/// restricted to `lo <= τ <= hi`, searched on `(0, omega_max]`.
///
/// The mean is removed first. The peak is located on a grid four times finer
/// than the Fourier spacing `2π / (hi - lo)` and refined by golden section.
pub fn dominant_frequency(series: &[(f64, f64)], lo: f64, hi: f64, omega_max: f64) -> Result<f64> {
    let window: Vec<(f64, f64)> = series.iter().copied().filter(|(t, _)| (lo..=hi).contains(t)).collect();
    if window.len() < 4 {
        return Err(Error::InsufficientData { needed: 4, got: window.len() });
    }
    let span = window[window.len() - 1].0 - window[0].0;
    if !(span > 0.0 && omega_max > 0.0) {
        return Err(Error::Parameter("need a positive time span and frequency range".into()));
    }
    let mean = window.iter().map(|p| p.1).sum::<f64>() / window.len() as f64;
    let power = |w: f64| {
        let (mut re, mut im) = (0.0, 0.0);
        for &(t, f) in &window {
            let (s, c) = (w * t).sin_cos();
            re += (f - mean) * c;
            im += (f - mean) * s;
        }
        re * re + im * im
    };
    let step = 0.25 * TAU / span;
    let count = (omega_max / step).ceil() as usize;
    let (mut best, mut best_p) = (step, f64::NEG_INFINITY);
    for k in 1..=count {
        let w = k as f64 * step;
        let p = power(w);
        if p > best_p {
            best = w;
            best_p = p;
        }
    }
    let (mut a, mut b) = ((best - step).max(0.5 * step), best + step);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let x1 = b - phi * (b - a);
        let x2 = a + phi * (b - a);
        if power(x1) >= power(x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn window_average() {
        let s: Vec<(f64, f64)> = (0..10).map(|k| (k as f64, k as f64)).collect();
        let w = saturation_average(&s, 2.0, 4.0).unwrap();
        assert_eq!((w.mean, w.samples), (3.0, 3));
        assert_abs_diff_eq!(w.stderr, (1.0f64 / 3.0).sqrt(), epsilon = 1e-15);
        assert!(saturation_average(&s, 5.0, 30.0).is_err());
    }

    #[test]
    fn constant_trajectory() {
        let s: Vec<(f64, f64)> = (0..=800).map(|k| (0.5 * k as f64, 0.3)).collect();
        let w = saturation_average(&s, 250.0, 400.0).unwrap();
        assert_abs_diff_eq!(w.mean, 0.3, epsilon = 1e-14);
        assert_abs_diff_eq!(w.stderr, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn sinusoid_over_whole_periods() {
        // Period 10, window [250, 400) holds 15 periods sampled uniformly.
        let s: Vec<(f64, f64)> = (0..=8000).map(|k| {
            let t = 0.05 * k as f64;
            (t, 0.2 + 0.1 * (TAU * t / 10.0).sin())
        }).collect();
        let w = saturation_average(&s, 250.0, 399.99).unwrap();
        assert!((w.mean - 0.2).abs() < 1e-6, "{}", w.mean);
    }

    #[test]
    fn free_spin_rabi_average() {
        let s: Vec<(f64, f64)> = (0..=800).map(|k| {
            let t = 0.5 * k as f64;
            (t, (0.5 * t).sin().powi(2))
        }).collect();
        let w = saturation_average(&s, 250.0, 400.0).unwrap();
        assert!((w.mean - 0.5).abs() < 5e-3, "{}", w.mean);
    }

    #[test]
    fn disorder_stderr() {
        let a = disorder_average(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(a.mean, 2.5);
        assert_abs_diff_eq!(a.stderr, (5.0f64 / 3.0 / 4.0).sqrt(), epsilon = 1e-15);
        assert!(disorder_average(&[1.0]).is_err());
    }

    #[test]
    fn convergence_threshold() {
        assert!(convergence_report(0.1, 0.1005, CONVERGENCE_TOLERANCE).converged);
        assert!(!convergence_report(0.1, 0.102, CONVERGENCE_TOLERANCE).converged);
        assert!(convergence_report(0.0, 0.0, CONVERGENCE_TOLERANCE).converged);
    }

    #[test]
    fn fit_needs_three_converged_points() {
        let p = |a: f64, ok| SweepPoint { converged: ok, ..SweepPoint::bare(a, 3, a) };
        let err = powerlaw_fit(&[p(1.0, true), p(2.0, true), p(3.0, false)]).unwrap_err();
        assert!(matches!(err, Error::InsufficientData { needed: 3, got: 2 }));
    }

    #[test]
    fn frequency_of_a_damped_cosine() {
        let s: Vec<(f64, f64)> = (0..2000).map(|k| {
            let t = 0.1 * k as f64;
            (t, 0.2 + (-t / 80.0).exp() * (0.73 * t).cos())
        }).collect();
        let w = dominant_frequency(&s, 0.0, 200.0, 5.0).unwrap();
        assert!((w - 0.73).abs() < 5e-3, "{w}");
    }

    proptest! {
        #[test]
        fn exact_power_laws_are_recovered(nu in 0.1f64..1.0, c in 0.05f64..2.0, a0 in 1e-4f64..1e-2) {
            let pts: Vec<SweepPoint> = (0..6).map(|k| {
                let alpha = a0 * 2f64.powi(k);
                SweepPoint { stderr: 1e-3, ..SweepPoint::bare(alpha, 3, c * alpha.powf(nu)) }
            }).collect();
            let fit = powerlaw_fit(&pts).unwrap();
            prop_assert!((fit.nu - nu).abs() < 1e-10);
            prop_assert!((fit.c / c - 1.0).abs() < 1e-9);
            prop_assert!(fit.r_squared > 1.0 - 1e-12);
            prop_assert!(fit.stderr_nu < 1e-8);
        }

        #[test]
        fn stderr_scales_with_spread(values in prop::collection::vec(-1.0f64..1.0, 2..40), k in 0.1f64..10.0) {
            let a = disorder_average(&values).unwrap();
            let scaled: Vec<f64> = values.iter().map(|v| v * k).collect();
            let b = disorder_average(&scaled).unwrap();
            prop_assert!((b.stderr - k * a.stderr).abs() <= 1e-12 * (1.0 + b.stderr));
        }
    }
}
