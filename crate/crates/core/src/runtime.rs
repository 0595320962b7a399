//! Shifted-exponential worker speeds and the conditionally deterministic
//! completion model: given its total time `T_n`, worker `n` finishes its
//! `j`-th subtask at `j * T_n / k_sum`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tiling::Profile;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuntimeParams {
    pub n_workers: usize,
    /// Scale of the exponential part, seconds.
    pub mu: f64,
    /// Shift, seconds.
    pub alpha: f64,
}

impl RuntimeParams {
    pub fn new(n_workers: usize, mu: f64, alpha: f64) -> Result<Self> {
        let p = Self {
            n_workers,
            mu,
            alpha,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_workers == 0 {
            return Err(Error::InvalidParameter("n_workers must be positive".into()));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "mu must be positive, got {}",
                self.mu
            )));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "alpha must be non-negative, got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Realized time each worker would need for the whole product on its own.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkerTimeline {
    pub total_times: Vec<f64>,
}

impl WorkerTimeline {
    pub fn new(total_times: Vec<f64>) -> Result<Self> {
        if total_times.is_empty() || total_times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::InvalidParameter(
                "worker times must be finite and non-negative".into(),
            ));
        }
        Ok(Self { total_times })
    }

    pub fn n_workers(&self) -> usize {
        self.total_times.len()
    }

    fn sorted(&self) -> Vec<f64> {
        let mut t = self.total_times.clone();
        t.sort_by(f64::total_cmp);
        t
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FinishingTime {
    pub tau: f64,
    pub per_layer_times: Vec<f64>,
}

/// RNG for Monte Carlo trial `trial`: the base seed selects the ChaCha key
/// and the trial index selects the stream, so trials are independent of
/// the order in which they run.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

pub fn sample_worker_times_with<R: Rng + ?Sized>(
    params: &RuntimeParams,
    rng: &mut R,
) -> WorkerTimeline {
    let total_times = (0..params.n_workers)
        .map(|_| {
            let e: f64 = rng.sample(Exp1);
            params.alpha + params.mu * e
        })
        .collect();
    WorkerTimeline { total_times }
}

pub fn sample_worker_times(params: &RuntimeParams, seed: u64) -> WorkerTimeline {
    sample_worker_times_with(params, &mut trial_rng(seed, 0))
}

/// Completion time of the `j`-th sequential subtask of a worker with total
/// time `t` when the product is cut into `k_sum` equal quanta.
#[inline]
pub fn subtask_completion(j: usize, t: f64, k_sum: usize) -> f64 {
    j as f64 * t / k_sum as f64
}

/// Layer `l` completes once the `K_l`-th fastest worker finishes `l` subtasks.
pub fn hier_finishing_time(profile: &Profile, timeline: &WorkerTimeline) -> Result<FinishingTime> {
    profile.validate_for(timeline.n_workers())?;
    let sorted = timeline.sorted();
    let k_sum = profile.k_sum();
    let per_layer_times: Vec<f64> = profile
        .thresholds()
        .iter()
        .enumerate()
        .map(|(idx, &k)| subtask_completion(idx + 1, sorted[k - 1], k_sum))
        .collect();
    let tau = per_layer_times
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(FinishingTime {
        tau,
        per_layer_times,
    })
}

/// The `k_s`-th earliest of all `N * layers` subtask completions.
pub fn sumrate_finishing_time(k_s: usize, layers: usize, timeline: &WorkerTimeline) -> Result<f64> {
    let total = timeline.n_workers() * layers;
    if k_s == 0 || k_s > total {
        return Err(Error::InfeasibleCode(format!(
            "threshold {k_s} not reachable with {total} subtasks"
        )));
    }
    let mut events: Vec<f64> = timeline
        .total_times
        .iter()
        .flat_map(|&t| (1..=layers).map(move |j| subtask_completion(j, t, k_s)))
        .collect();
    let (_, kth, _) = events.select_nth_unstable_by(k_s - 1, f64::total_cmp);
    Ok(*kth)
}

/// `E[T_(k:N)] = alpha + mu * sum_{i=N-k+1}^{N} 1/i`.
pub fn expected_order_stat(k: usize, params: &RuntimeParams) -> Result<f64> {
    let n = params.n_workers;
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!(
            "order statistic {k} outside 1..={n}"
        )));
    }
    let harmonic: f64 = (n - k + 1..=n).map(|i| 1.0 / i as f64).sum();
    Ok(params.alpha + params.mu * harmonic)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpectationMode {
    /// Harmonic-sum expectation of the order statistic.
    Exact,
    /// `alpha + mu ln(N / (N - k))`; undefined at `k = N`.
    LogApprox,
}

/// Expected time for the `k`-th fastest of `N` workers to finish everything,
/// under the chosen expectation mode.
pub fn threshold_time(k: usize, params: &RuntimeParams, mode: ExpectationMode) -> Result<f64> {
    match mode {
        ExpectationMode::Exact => expected_order_stat(k, params),
        ExpectationMode::LogApprox => {
            let n = params.n_workers;
            if k == 0 || k >= n {
                return Err(Error::InvalidParameter(format!(
                    "log approximation needs 1 <= k < N, got k = {k}, N = {n}"
                )));
            }
            Ok(params.alpha + params.mu * (n as f64 / (n - k) as f64).ln())
        }
    }
}

/// Weight `l / k_sum` a layer's order statistic carries in the objective.
#[inline]
pub fn layer_weight(l: usize, k_sum: usize) -> f64 {
    l as f64 / k_sum as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectedFinish {
    pub value: f64,
    /// 1-based layer attaining the maximum.
    pub argmax_layer: usize,
}

/// `max_l (l / k_sum) g(K_l)` with `g` the per-mode threshold time.
pub fn expected_finishing_time(
    profile: &Profile,
    params: &RuntimeParams,
    mode: ExpectationMode,
) -> Result<ExpectedFinish> {
    params.validate()?;
    profile.validate_for(params.n_workers)?;
    let k_sum = profile.k_sum();
    let mut best = ExpectedFinish {
        value: f64::NEG_INFINITY,
        argmax_layer: 0,
    };
    for (idx, &k) in profile.thresholds().iter().enumerate() {
        let v = layer_weight(idx + 1, k_sum) * threshold_time(k, params, mode)?;
        if v > best.value {
            best = ExpectedFinish {
                value: v,
                argmax_layer: idx + 1,
            };
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeMode {
    SerialHier,
    ParallelHier,
    SumRate,
    Plain,
}

/// Cost of interpolating one degree-`k` polynomial, `k log2^2 k`.
pub fn poly_decode_cost(k: usize) -> f64 {
    let lg = (k.max(2) as f64).log2();
    k as f64 * lg * lg
}

/// Abstract decode cost.
///
/// For the hierarchical modes `thresholds` is the profile; for `SumRate` and
/// `Plain` the single code's threshold is the sum of `thresholds`, so either
/// a profile or `[k]` may be passed.
pub fn decode_cost(thresholds: &[usize], mode: DecodeMode, polys_per_layer: f64) -> Result<f64> {
    if thresholds.is_empty() || thresholds.contains(&0) {
        return Err(Error::InvalidParameter(
            "thresholds must be positive".into(),
        ));
    }
    let per_layer = thresholds
        .iter()
        .map(|&k| polys_per_layer * poly_decode_cost(k));
    Ok(match mode {
        DecodeMode::SerialHier => per_layer.sum(),
        DecodeMode::ParallelHier => per_layer.fold(0.0, f64::max),
        DecodeMode::SumRate | DecodeMode::Plain => {
            polys_per_layer * poly_decode_cost(thresholds.iter().sum())
        }
    })
}
