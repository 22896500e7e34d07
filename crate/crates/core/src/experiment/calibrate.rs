//! One-parameter noise fit: bisection on `p2` (with `p1 = p2 / 10`) so the
//! exact-mode negativity at a chosen hop count hits a target.
//!
//! Trajectory streams do not depend on the noise rates, so every evaluation
//! sees the same measurement and fault variates and the fitted curve is
//! smooth in `p2`.

use super::config::ExperimentConfig;
use super::run_experiment;
use crate::error::{Error, Result};
use crate::noise::NoiseModel;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitOptions {
    pub p2_max: f64,
    /// A fit within this distance of the target counts as converged.
    pub tolerance: f64,
    /// Bisection stops once |negativity − target| is below this.
    pub precision: f64,
    pub max_iterations: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { p2_max: 0.1, tolerance: 0.01, precision: 0.0005, max_iterations: 30 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationFit {
    pub model: NoiseModel,
    pub negativity: f64,
    /// Every `(p2, negativity)` evaluated, in order.
    pub evaluations: Vec<(f64, f64)>,
    /// Whether the final negativity is within tolerance of the target.
    pub converged: bool,
}

fn model_for(base: &NoiseModel, p2: f64) -> NoiseModel {
    NoiseModel { p1: p2 / 10.0, p2, ..*base }
}

pub fn calibrate_noise(base: &ExperimentConfig, target: f64, at_hops: usize, options: FitOptions) -> Result<CalibrationFit> {
    if !(0.0..=0.5).contains(&target) {
        return Err(Error::InvalidConfig(format!("target negativity {target} outside [0, 0.5]")));
    }
    let mut evaluations = Vec::new();
    let mut eval = |p2: f64| -> Result<f64> {
        let config = ExperimentConfig {
            hops: vec![at_hops],
            exact: true,
            timing: false,
            noise: model_for(&base.noise, p2),
            ..base.clone()
        };
        let value = run_experiment(&config)?[0].negativity;
        evaluations.push((p2, value));
        Ok(value)
    };
    let finish = |p2: f64, value: f64, evaluations: Vec<(f64, f64)>| CalibrationFit {
        model: model_for(&base.noise, p2),
        negativity: value,
        evaluations,
        converged: (value - target).abs() <= options.tolerance,
    };

    let (mut lo, mut hi) = (0.0, options.p2_max);
    let f_lo = eval(lo)?;
    if f_lo <= target + options.precision {
        return Ok(finish(lo, f_lo, evaluations));
    }
    let f_hi = eval(hi)?;
    if f_hi >= target - options.precision {
        return Ok(finish(hi, f_hi, evaluations));
    }
    let mut best = (hi, f_hi);
    for _ in 0..options.max_iterations {
        let mid = 0.5 * (lo + hi);
        let f = eval(mid)?;
        if (f - target).abs() < (best.1 - target).abs() {
            best = (mid, f);
        }
        if (f - target).abs() <= options.precision {
            break;
        }
        if f > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(finish(best.0, best.1, evaluations))
}
