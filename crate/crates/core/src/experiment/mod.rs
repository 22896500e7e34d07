//! Hop sweeps: trajectories → averaged pair state → tomography → metrics.
//!
//! Each trajectory is run once to the largest requested hop count and
//! snapshotted on the way, so a sweep costs one trajectory per noise
//! realization. Tomography shots are drawn from the trajectory-averaged pair
//! state with readout corruption applied at sampling time.

mod calibrate;
mod config;
mod output;

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use calibrate::{calibrate_noise, CalibrationFit, FitOptions};
pub use config::{parse_hops, CalibrationSource, ExperimentConfig, OutputFormat};
pub use output::{emit_results, format_results, parse_results, round_sig, ResultsFile};

use crate::density::{graph_pair, DensityMatrix, PairVector};
use crate::error::{Error, Result};
use crate::metrics::{bootstrap_many, fidelity_pure, negativity, possible_discriminators, variant_target};
use crate::noise::{build_calibration, estimate_calibration, CalibrationMatrix};
use crate::rng::{derive, Domain, TrajectoryRng};
use crate::tomography::{reconstruct, tomograph, tomograph_buckets, CountsTable, DensitySource, PipelineOptions, ShotMode};
use crate::wheel::{CorrectionMode, Discriminator, ProtocolRun, Snapshot, WheelConfig};

/// Per-discriminator result in post-selection mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariantResult {
    pub z: bool,
    pub x: bool,
    /// Expected fraction of trajectories read with this discriminator.
    pub weight: f64,
    /// Absent when the bucket received no shots in some setting.
    pub negativity: Option<f64>,
    pub fidelity: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub m: usize,
    pub mode: CorrectionMode,
    pub negativity: f64,
    pub neg_err: f64,
    pub fidelity: f64,
    pub fid_err: f64,
    pub trajectories: usize,
    /// Wall-clock seconds since the run started when this row was finished;
    /// 0 unless timing is enabled.
    pub seconds: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub variants: Vec<VariantResult>,
}

/// Runs trajectory `index` up to the largest of `hops`, returning a snapshot
/// at each requested hop count in the order given.
pub fn sweep_trajectory(wheel: &WheelConfig, index: u64, hops: &[usize]) -> Result<Vec<Snapshot>> {
    let max = hops.iter().copied().max().unwrap_or(0);
    let mut rng = TrajectoryRng::new(wheel.seed, index);
    let mut run = ProtocolRun::start(WheelConfig { m: max, ..wheel.clone() }, &mut rng)?;
    let mut taken: BTreeMap<usize, Snapshot> = BTreeMap::new();
    loop {
        if hops.contains(&run.hops()) {
            taken.insert(run.hops(), run.snapshot()?);
        }
        if run.hops() == max {
            break;
        }
        run.perform_hop(None, &mut rng)?;
    }
    Ok(hops.iter().map(|m| taken[m].clone()).collect())
}

fn mean_density<'a>(items: impl IntoIterator<Item = &'a DensityMatrix>) -> Option<DensityMatrix> {
    let items: Vec<&DensityMatrix> = items.into_iter().collect();
    if items.is_empty() {
        return None;
    }
    let w = 1.0 / items.len() as f64;
    Some(DensityMatrix::weighted_sum(items.into_iter().map(|r| (r, w))))
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    config.validate()?;
    let started = Instant::now();
    let wheel = WheelConfig {
        n: config.n,
        m: 0,
        correction_mode: config.mode,
        noise: config.noise,
        seed: config.seed,
    };
    let per_trajectory: Vec<Result<Vec<Snapshot>>> = (0..config.trajectories as u64)
        .into_par_iter()
        .map(|t| sweep_trajectory(&wheel, t, &config.hops))
        .collect();
    let per_trajectory = per_trajectory.into_iter().collect::<Result<Vec<_>>>()?;

    config
        .hops
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            let snapshots: Vec<&Snapshot> = per_trajectory.iter().map(|s| &s[i]).collect();
            let mut row = analyze_point(config, m, &snapshots)?;
            if config.timing {
                row.seconds = started.elapsed().as_secs_f64();
            }
            Ok(row)
        })
        .collect()
}

fn rem_calibration(config: &ExperimentConfig, m: usize) -> [CalibrationMatrix; 2] {
    match config.calibration {
        CalibrationSource::Analytic => [build_calibration(&config.noise); 2],
        CalibrationSource::Empirical => [0u64, 1].map(|q| {
            let mut rng = derive(config.seed, Domain::Calibration, 2 * m as u64 + q);
            estimate_calibration(&config.noise, config.calibration_shots, &mut rng)
        }),
    }
}

/// Tomography and metrics for one hop count.
fn analyze_point(config: &ExperimentConfig, m: usize, snapshots: &[&Snapshot]) -> Result<ResultRow> {
    let readout = [build_calibration(&config.noise); 2];
    let cal = rem_calibration(config, m);
    let mode = if config.exact { ShotMode::Exact } else { ShotMode::Sampled(config.shots) };
    let options = PipelineOptions::default();
    let mut shot_rng = derive(config.seed, Domain::Shots, m as u64);
    let mut boot_rng = derive(config.seed, Domain::Bootstrap, m as u64);
    let mut row = ResultRow {
        m,
        mode: config.mode,
        negativity: 0.0,
        neg_err: 0.0,
        fidelity: 0.0,
        fid_err: 0.0,
        trajectories: snapshots.len(),
        seconds: 0.0,
        variants: Vec::new(),
    };

    match config.mode {
        CorrectionMode::Dynamic => {
            let rho = mean_density(snapshots.iter().map(|s| &s.rho)).expect("at least one trajectory");
            let source = DensitySource { rho, readout };
            let tomogram = tomograph(&source, mode, &cal, options, &mut shot_rng)?;
            let target = graph_pair();
            row.negativity = negativity(&tomogram.rho);
            row.fidelity = fidelity_pure(&tomogram.rho, &target);
            if let Some(counts) = tomogram.counts {
                let estimator = |tables: &[CountsTable]| {
                    let rho = reconstruct(&tables[0], &cal, options)?;
                    Ok(vec![negativity(&rho), fidelity_pure(&rho, &target)])
                };
                let ci = bootstrap_many(&[counts], estimator, config.bootstrap, &mut boot_rng)?;
                row.neg_err = ci[0].epsilon;
                row.fid_err = ci[1].epsilon;
            }
        }
        CorrectionMode::PostSelection => {
            let keys = possible_discriminators(m);
            let total = snapshots.len() as f64;
            let buckets: Vec<(Discriminator, f64, DensitySource)> = keys
                .iter()
                .map(|&d| {
                    // Each trajectory lands in a bucket with the chance its outcomes are read as `d`.
                    let slot = Discriminator::ALL.iter().position(|&k| k == d).unwrap_or(0);
                    let members: Vec<(&DensityMatrix, f64)> = snapshots
                        .iter()
                        .map(|s| (&s.rho, s.discriminator_weights[slot]))
                        .filter(|&(_, w)| w > 0.0)
                        .collect();
                    let mass: f64 = members.iter().map(|&(_, w)| w).sum();
                    let rho = if mass > 0.0 {
                        DensityMatrix::weighted_sum(members.into_iter().map(|(r, w)| (r, w / mass)))
                    } else {
                        DensityMatrix::maximally_mixed()
                    };
                    (d, mass / total, DensitySource { rho, readout })
                })
                .collect();
            let results = tomograph_buckets(&buckets, mode, &cal, options, &mut shot_rng);

            let mut present: Vec<(PairVector, Option<CountsTable>)> = Vec::new();
            let (mut negs, mut fids) = (Vec::new(), Vec::new());
            for ((d, weight, _), (_, result)) in buckets.iter().zip(results) {
                let mut variant = VariantResult { z: d.z, x: d.x, weight: *weight, negativity: None, fidelity: None };
                match result {
                    Ok(tomogram) => {
                        let target = variant_target(m, *d);
                        let (n, f) = (negativity(&tomogram.rho), fidelity_pure(&tomogram.rho, &target));
                        variant.negativity = Some(n);
                        variant.fidelity = Some(f);
                        negs.push(n);
                        fids.push(f);
                        present.push((target, tomogram.counts));
                    }
                    Err(Error::EmptyBucket { .. }) => {}
                    Err(e) => return Err(e),
                }
                row.variants.push(variant);
            }
            if present.is_empty() {
                return Err(Error::NoShots(format!("every discriminator bucket at m={m}")));
            }
            row.negativity = mean(&negs);
            row.fidelity = mean(&fids);
            if !config.exact {
                let targets: Vec<PairVector> = present.iter().map(|p| p.0).collect();
                let tables: Vec<CountsTable> = present.into_iter().filter_map(|p| p.1).collect();
                let estimator = |tables: &[CountsTable]| {
                    let mut n_sum = 0.0;
                    let mut f_sum = 0.0;
                    for (table, target) in tables.iter().zip(&targets) {
                        let rho = reconstruct(table, &cal, options)?;
                        n_sum += negativity(&rho);
                        f_sum += fidelity_pure(&rho, target);
                    }
                    let k = tables.len() as f64;
                    Ok(vec![n_sum / k, f_sum / k])
                };
                let ci = bootstrap_many(&tables, estimator, config.bootstrap, &mut boot_rng)?;
                row.neg_err = ci[0].epsilon;
                row.fid_err = ci[1].epsilon;
            }
        }
    }
    Ok(row)
}
