use rayon::prelude::*;

use super::{mean_stderr, ExperimentConfig, ExperimentReport, ReportRow, Scheme, TrialRow};
use crate::error::Result;
use crate::runtime::{
    expected_finishing_time, hier_finishing_time, sample_worker_times_with, sumrate_finishing_time,
    trial_rng, ExpectationMode,
};
use crate::tiling::Profile;

/// Per layer count: the three schemes' finishing times for one timeline.
type TrialTimes = Vec<[Option<f64>; 3]>;

const HIER: usize = 0;
const PLAIN: usize = 1;
const SUMRATE: usize = 2;

/// Monte Carlo finishing times with common random numbers: each trial
/// draws one timeline and every scheme and layer count is evaluated on it.
pub fn run_monte_carlo(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let params = config.runtime_params()?;
    let wants = |s: Scheme| config.schemes.contains(&s);

    // per layer count: hierarchical profile (or why it is infeasible)
    let hier_profiles: Vec<std::result::Result<Profile, String>> = config
        .layers
        .iter()
        .map(|&l| config.hier_profile(l).map_err(|e| e.to_string()))
        .collect();
    let plain_profile = Profile::new(vec![config.load])?;
    let plain_ok = config.load <= config.n_workers;

    let per_trial: Vec<TrialTimes> = (0..config.trials)
        .into_par_iter()
        .map(|trial| {
            let timeline =
                sample_worker_times_with(&params, &mut trial_rng(config.seed, trial as u64));
            let plain = (wants(Scheme::Plain) && plain_ok)
                .then(|| {
                    hier_finishing_time(&plain_profile, &timeline)
                        .map(|f| f.tau)
                        .ok()
                })
                .flatten();
            config
                .layers
                .iter()
                .zip(&hier_profiles)
                .map(|(&layers, profile)| {
                    let hier = match profile {
                        Ok(p) if wants(Scheme::Hier) => {
                            hier_finishing_time(p, &timeline).ok().map(|f| f.tau)
                        }
                        _ => None,
                    };
                    let sumrate = wants(Scheme::SumRate)
                        .then(|| {
                            sumrate_finishing_time(config.load * layers, layers, &timeline).ok()
                        })
                        .flatten();
                    [hier, plain, sumrate]
                })
                .collect()
        })
        .collect();

    let mut rows = Vec::new();
    let mut trial_rows = Vec::with_capacity(config.trials * config.layers.len());
    for (li, &layers) in config.layers.iter().enumerate() {
        for &scheme in &config.schemes {
            let (slot, profile) = match scheme {
                Scheme::Hier => match &hier_profiles[li] {
                    Ok(p) => (HIER, p.clone()),
                    Err(e) => {
                        rows.push(ReportRow::skipped(scheme, layers, e.clone()));
                        continue;
                    }
                },
                Scheme::Plain => (PLAIN, plain_profile.clone()),
                Scheme::SumRate => (SUMRATE, Profile::new(vec![config.load * layers])?),
            };
            let samples: Vec<f64> = per_trial.iter().filter_map(|t| t[li][slot]).collect();
            if samples.len() != config.trials {
                rows.push(ReportRow::skipped(
                    scheme,
                    layers,
                    format!("threshold not reachable with {} workers", config.n_workers),
                ));
                continue;
            }
            let (mean, stderr) = mean_stderr(&samples);
            let mut row = ReportRow::new(scheme, layers, profile.thresholds().to_vec());
            row.trials = samples.len();
            row.mean_finish = Some(mean);
            row.stderr_finish = Some(stderr);
            if scheme != Scheme::SumRate {
                row.expected_exact =
                    expected_finishing_time(&profile, &params, ExpectationMode::Exact)
                        .ok()
                        .map(|e| e.value);
            }
            rows.push(row);
        }
        for (trial, times) in per_trial.iter().enumerate() {
            let [hier, plain, sumrate] = times[li];
            trial_rows.push(TrialRow {
                trial,
                layers,
                hier,
                plain,
                sumrate,
                stragglers: None,
            });
        }
    }

    Ok(ExperimentReport {
        mode: config.mode,
        config_hash: config.config_hash(),
        seed: config.seed,
        trials: config.trials,
        rows,
        trial_rows,
        notes: vec![
            "mean_finish is the empirical expectation of the max over layers; expected_exact is the max over layers of per-layer expectations".into(),
        ],
    })
}
