//! Profile optimization: choose `K_1 >= ... >= K_L` with `sum K_l = K`
//! minimizing `z = max_l (l / K) g(K_l)`, where `g(k)` is the expected time
//! for the `k`-th fastest worker to finish the whole product.
//!
//! For a candidate `z` each layer independently admits every `k` with
//! `(l / K) g(k) <= z`; since `g` increases, the admissible set is `1..=kmax_l`
//! and `kmax_l` is non-increasing in `l`. A candidate is feasible iff every
//! `kmax_l >= 1` and `sum kmax_l >= K`. The optimum is attained at one of
//! the finitely many values `(l / K) g(k)`, so bisection runs over that
//! sorted candidate set and lands on the exact integer optimum.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::runtime::{layer_weight, threshold_time, ExpectationMode, RuntimeParams};
use crate::tiling::Profile;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSpec {
    pub layers: usize,
    /// Fixed total threshold `K = sum K_l`.
    pub total_threshold: usize,
    pub params: RuntimeParams,
    pub mode: ExpectationMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizedProfile {
    pub profile: Profile,
    pub objective: f64,
}

impl OptimizerSpec {
    pub fn new(
        layers: usize,
        total_threshold: usize,
        params: RuntimeParams,
        mode: ExpectationMode,
    ) -> Result<Self> {
        let spec = Self {
            layers,
            total_threshold,
            params,
            mode,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Largest per-layer threshold the mode can evaluate.
    fn max_threshold(&self) -> usize {
        match self.mode {
            ExpectationMode::Exact => self.params.n_workers,
            ExpectationMode::LogApprox => self.params.n_workers - 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.layers == 0 {
            return Err(Error::InvalidParameter("layers must be at least 1".into()));
        }
        if self.total_threshold < self.layers {
            return Err(Error::InvalidParameter(format!(
                "total threshold {} below layer count {} (every K_l >= 1)",
                self.total_threshold, self.layers
            )));
        }
        let cap = self.layers * self.max_threshold();
        if self.total_threshold > cap {
            return Err(Error::InvalidParameter(format!(
                "total threshold {} exceeds L x max K_l = {cap}",
                self.total_threshold
            )));
        }
        Ok(())
    }

    /// `g(1..=kmax)`, index 0 unused.
    fn threshold_table(&self) -> Result<Vec<f64>> {
        let mut g = vec![f64::NAN; self.max_threshold() + 1];
        for (k, slot) in g.iter_mut().enumerate().skip(1) {
            *slot = threshold_time(k, &self.params, self.mode)?;
        }
        Ok(g)
    }
}

/// `max_l (l / K) g(K_l)` for a concrete profile.
pub fn profile_objective(thresholds: &[usize], spec: &OptimizerSpec) -> Result<f64> {
    let total: usize = thresholds.iter().sum();
    thresholds
        .iter()
        .enumerate()
        .map(|(idx, &k)| {
            Ok(layer_weight(idx + 1, total) * threshold_time(k, &spec.params, spec.mode)?)
        })
        .try_fold(f64::NEG_INFINITY, |acc, v: Result<f64>| Ok(acc.max(v?)))
}

/// Per-layer largest admissible threshold under `z`, 0 when none is.
fn max_thresholds(z: f64, g: &[f64], spec: &OptimizerSpec) -> Vec<usize> {
    let kmax = g.len() - 1;
    (1..=spec.layers)
        .map(|l| {
            let w = layer_weight(l, spec.total_threshold);
            // g increasing: count of k in 1..=kmax with w g(k) <= z
            g[1..=kmax].partition_point(|&gk| w * gk <= z)
        })
        .collect()
}

pub fn optimize_profile(spec: &OptimizerSpec) -> Result<OptimizedProfile> {
    spec.validate()?;
    let g = spec.threshold_table()?;
    let kmax = g.len() - 1;

    let mut candidates: Vec<f64> = (1..=spec.layers)
        .flat_map(|l| {
            let w = layer_weight(l, spec.total_threshold);
            g[1..=kmax].iter().map(move |&gk| w * gk)
        })
        .collect();
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();

    let feasible = |z: f64| {
        let caps = max_thresholds(z, &g, spec);
        caps.iter().all(|&c| c >= 1) && caps.iter().sum::<usize>() >= spec.total_threshold
    };
    let (mut lo, mut hi) = (0usize, candidates.len() - 1);
    if !feasible(candidates[hi]) {
        return Err(Error::InvalidParameter("no feasible profile".into()));
    }
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if feasible(candidates[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }

    let mut thresholds = max_thresholds(candidates[lo], &g, spec);
    let mut surplus = thresholds.iter().sum::<usize>() - spec.total_threshold;
    for k in thresholds.iter_mut().rev() {
        if surplus == 0 {
            break;
        }
        let cut = surplus.min(*k - 1);
        *k -= cut;
        surplus -= cut;
    }
    debug_assert_eq!(surplus, 0);

    let objective = profile_objective(&thresholds, spec)?;
    Ok(OptimizedProfile {
        profile: Profile::new(thresholds)?,
        objective,
    })
}

/// Enumeration budget for [`exhaustive_profile_search`].
pub const EXHAUSTIVE_BUDGET: usize = 5_000_000;

/// Global optimum by enumerating every non-increasing profile summing to `K`.
pub fn exhaustive_profile_search(spec: &OptimizerSpec) -> Result<OptimizedProfile> {
    spec.validate()?;
    let cap = spec.max_threshold();
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut visited = 0usize;
    let mut current = Vec::with_capacity(spec.layers);

    fn recurse(
        remaining: usize,
        slots: usize,
        upper: usize,
        current: &mut Vec<usize>,
        spec: &OptimizerSpec,
        visited: &mut usize,
        best: &mut Option<(f64, Vec<usize>)>,
    ) -> Result<()> {
        *visited += 1;
        if *visited > EXHAUSTIVE_BUDGET {
            return Err(Error::BudgetExceeded(EXHAUSTIVE_BUDGET));
        }
        if slots == 0 {
            if remaining == 0 {
                let z = profile_objective(current, spec)?;
                if best.as_ref().is_none_or(|(bz, _)| z < *bz) {
                    *best = Some((z, current.clone()));
                }
            }
            return Ok(());
        }
        // each later slot takes at least 1 and at most k
        let hi = upper.min(remaining - (slots - 1));
        for k in 1..=hi {
            if k * slots < remaining {
                continue;
            }
            current.push(k);
            recurse(remaining - k, slots - 1, k, current, spec, visited, best)?;
            current.pop();
        }
        Ok(())
    }

    recurse(
        spec.total_threshold,
        spec.layers,
        cap,
        &mut current,
        spec,
        &mut visited,
        &mut best,
    )?;
    let (objective, thresholds) =
        best.ok_or_else(|| Error::InvalidParameter("no feasible profile".into()))?;
    Ok(OptimizedProfile {
        profile: Profile::new(thresholds)?,
        objective,
    })
}
