use super::{
    first_three_profile, CostProfile, ExperimentConfig, ExperimentReport, ReportRow, Scheme,
};
use crate::error::Result;
use crate::runtime::{
    decode_cost, expected_finishing_time, DecodeMode, ExpectationMode, RuntimeParams,
};
use crate::tiling::Profile;

fn expectations(profile: &Profile, params: &RuntimeParams) -> (Option<f64>, Option<f64>) {
    let exact = expected_finishing_time(profile, params, ExpectationMode::Exact)
        .ok()
        .map(|e| e.value);
    let log = expected_finishing_time(profile, params, ExpectationMode::LogApprox)
        .ok()
        .map(|e| e.value);
    (exact, log)
}

/// Closed-form expected finishing times and decode-cost model per layer count.
pub fn run_analytic_sweep(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let params = config.runtime_params()?;
    let [n_x, _, n_y] = config.dims;
    let area = (n_x * n_y) as f64;
    let mut rows = Vec::new();
    let mut notes = Vec::new();
    if config.cost_profile == CostProfile::FirstThree {
        notes.push("hierarchical decode costs use the first-three-layers preset profile".into());
    }

    for &layers in &config.layers {
        let k_sum = config.load * layers;
        for &scheme in &config.schemes {
            let row = match scheme {
                Scheme::Hier => {
                    let profile = match config.hier_profile(layers) {
                        Ok(p) => p,
                        Err(e) => {
                            rows.push(ReportRow::skipped(scheme, layers, e.to_string()));
                            continue;
                        }
                    };
                    let cost_profile = match config.cost_profile {
                        CostProfile::Optimized => profile.clone(),
                        CostProfile::FirstThree => first_three_profile(layers, config.load)?,
                    };
                    let polys = area / cost_profile.k_sum() as f64;
                    let mut row = ReportRow::new(scheme, layers, profile.thresholds().to_vec());
                    (row.expected_exact, row.expected_log) = expectations(&profile, &params);
                    row.decode_cost_serial = Some(decode_cost(
                        cost_profile.thresholds(),
                        DecodeMode::SerialHier,
                        polys,
                    )?);
                    row.decode_cost_parallel = Some(decode_cost(
                        cost_profile.thresholds(),
                        DecodeMode::ParallelHier,
                        polys,
                    )?);
                    if cost_profile != profile {
                        row.cost_profile = Some(cost_profile.thresholds().to_vec());
                    }
                    row
                }
                Scheme::Plain => {
                    if config.load > config.n_workers {
                        rows.push(ReportRow::skipped(
                            scheme,
                            layers,
                            format!(
                                "threshold {} exceeds {} workers",
                                config.load, config.n_workers
                            ),
                        ));
                        continue;
                    }
                    let profile = Profile::new(vec![config.load])?;
                    let mut row = ReportRow::new(scheme, layers, vec![config.load]);
                    (row.expected_exact, row.expected_log) = expectations(&profile, &params);
                    let cost =
                        decode_cost(&[config.load], DecodeMode::Plain, area / config.load as f64)?;
                    row.decode_cost_serial = Some(cost);
                    row.decode_cost_parallel = Some(cost);
                    row
                }
                Scheme::SumRate => {
                    if k_sum > config.n_workers * layers {
                        rows.push(ReportRow::skipped(
                            scheme,
                            layers,
                            format!(
                                "threshold {k_sum} exceeds {} subtasks",
                                config.n_workers * layers
                            ),
                        ));
                        continue;
                    }
                    let mut row = ReportRow::new(scheme, layers, vec![k_sum]);
                    let cost = decode_cost(&[k_sum], DecodeMode::SumRate, area / k_sum as f64)?;
                    row.decode_cost_serial = Some(cost);
                    row.decode_cost_parallel = Some(cost);
                    row
                }
            };
            rows.push(row);
        }
    }

    Ok(ExperimentReport {
        mode: config.mode,
        config_hash: config.config_hash(),
        seed: config.seed,
        trials: 0,
        rows,
        trial_rows: vec![],
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::super::tests::sweep_config;
    use super::*;

    #[test]
    fn single_layer_row_is_plain_anchor() {
        let report = run_analytic_sweep(&sweep_config()).unwrap();
        let hier = report.row(Scheme::Hier, 1).unwrap();
        let plain = report.row(Scheme::Plain, 1).unwrap();
        assert_eq!(hier.profile, vec![29]);
        assert_eq!(hier.expected_log, plain.expected_log);
        assert!((plain.expected_log.unwrap() - 5.747e-3).abs() / 5.747e-3 < 0.01);
    }

    #[test]
    fn expected_time_non_increasing_in_layers() {
        let report = run_analytic_sweep(&sweep_config()).unwrap();
        let vals: Vec<f64> = [1, 2, 4, 8, 16]
            .iter()
            .map(|&l| report.row(Scheme::Hier, l).unwrap().expected_exact.unwrap())
            .collect();
        assert!(vals.windows(2).all(|w| w[1] <= w[0]), "{vals:?}");
    }

    #[test]
    fn preset_cost_ordering() {
        let mut cfg = sweep_config();
        cfg.load = 10;
        cfg.layers = vec![4, 8, 16, 32];
        cfg.cost_profile = CostProfile::FirstThree;
        let report = run_analytic_sweep(&cfg).unwrap();
        for &l in &cfg.layers {
            let h = report.row(Scheme::Hier, l).unwrap();
            let s = report.row(Scheme::SumRate, l).unwrap();
            assert!(s.decode_cost_serial.unwrap() > h.decode_cost_serial.unwrap());
            assert!(h.decode_cost_serial.unwrap() > h.decode_cost_parallel.unwrap());
        }
    }

    #[test]
    fn infeasible_rows_are_skipped() {
        let mut cfg = sweep_config();
        cfg.n_workers = 20;
        let report = run_analytic_sweep(&cfg).unwrap();
        assert!(report.row(Scheme::Plain, 1).unwrap().skipped.is_some());
        assert!(report.row(Scheme::Hier, 1).unwrap().skipped.is_some());
    }
}
