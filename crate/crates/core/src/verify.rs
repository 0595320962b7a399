//! Codec audit: decode every (or a sample of) threshold-sized subset of
//! worker results per layer and compare against directly computed tiles.

use rand::seq::index::sample;
use serde::Serialize;

use crate::codec::{assemble, decode_layer, encode_hier, residual_product, CompletedResult};
use crate::error::Result;
use crate::matrix::{mat_mul, DenseMatrix, EvalPointSet, Scalar};
use crate::runtime::trial_rng;
use crate::tiling::TilePlan;

/// Test hook: perturb the result of `worker` (1-based) in `layer`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CorruptHook {
    pub layer: usize,
    pub worker: usize,
}

#[derive(Debug, Clone)]
pub struct AuditOptions {
    /// Enumerate all subsets of a layer when there are at most this many,
    /// otherwise check this many random subsets.
    pub subset_budget: usize,
    /// Relative error allowed per tile; 0 demands exact equality.
    pub tolerance: f64,
    pub seed: u64,
    pub corrupt: Option<CorruptHook>,
}

impl Default for AuditOptions {
    fn default() -> Self {
        Self {
            subset_budget: 10_000,
            tolerance: 0.0,
            seed: 0,
            corrupt: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerAudit {
    pub layer: usize,
    pub threshold: usize,
    pub subsets_checked: usize,
    pub exhaustive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Counterexample {
    pub layer: usize,
    /// 1-based workers whose results were decoded.
    pub workers: Vec<usize>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub layers: Vec<LayerAudit>,
    pub partition_ok: bool,
    pub assembled_ok: bool,
    pub counterexample: Option<Counterexample>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.partition_ok && self.assembled_ok && self.counterexample.is_none()
    }
}

fn binomial(n: usize, k: usize) -> Option<usize> {
    let k = k.min(n - k);
    let mut acc: usize = 1;
    for i in 0..k {
        acc = acc.checked_mul(n - i)? / (i + 1);
    }
    Some(acc)
}

/// Advance `idx` to the next k-combination of `0..n` in lexicographic order.
fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    for i in (0..k).rev() {
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn mismatch<T: Scalar>(
    got: &DenseMatrix<T>,
    want: &DenseMatrix<T>,
    tolerance: f64,
) -> Option<String> {
    if got.shape() != want.shape() {
        return Some(format!(
            "shape {:?}, expected {:?}",
            got.shape(),
            want.shape()
        ));
    }
    if tolerance == 0.0 {
        return (got.data() != want.data()).then(|| "decoded tile differs from oracle".to_string());
    }
    let (mut diff, mut norm) = (0.0, 0.0);
    for (g, w) in got.data().iter().zip(want.data()) {
        let (g, w) = (g.to_f64(), w.to_f64());
        diff += (g - w) * (g - w);
        norm += w * w;
    }
    let rel = if norm > 0.0 {
        (diff / norm).sqrt()
    } else {
        diff.sqrt()
    };
    (rel > tolerance || !rel.is_finite())
        .then(|| format!("relative error {rel:e} exceeds {tolerance:e}"))
}

/// Every product entry is covered by exactly one layer chunk or the residual.
pub fn partition_covers(plan: &TilePlan) -> bool {
    let mut count = vec![0u32; plan.n_x * plan.n_y];
    let mut mark = |rows: std::ops::Range<usize>, cols: std::ops::Range<usize>| {
        for i in rows {
            for j in cols.clone() {
                if i < plan.n_x && j < plan.n_y {
                    count[i * plan.n_y + j] += 1;
                }
            }
        }
    };
    for layer in &plan.layers {
        for rc in &layer.row_chunks {
            for cc in &layer.col_chunks {
                mark(rc.clone(), cc.clone());
            }
        }
    }
    mark(0..plan.n_x, plan.residual_cols.clone());
    count.iter().all(|&c| c == 1)
}

/// Encode `a`, `b` under `plan`, have all `n_workers` compute every layer,
/// and decode threshold-sized subsets of the results against the oracle.
///
/// Stops at the first failing subset and reports it.
pub fn audit_codec<T: Scalar>(
    a: &DenseMatrix<T>,
    b: &DenseMatrix<T>,
    plan: &TilePlan,
    points: &EvalPointSet,
    n_workers: usize,
    options: &AuditOptions,
) -> Result<AuditReport> {
    let partition_ok = partition_covers(plan);
    let oracle = mat_mul(a, b)?;
    let tasks = encode_hier(a, b, plan, points, n_workers)?;

    let mut by_layer: Vec<Vec<CompletedResult<T>>> =
        vec![Vec::with_capacity(n_workers); plan.layers.len()];
    for worker_tasks in &tasks {
        for task in worker_tasks {
            let mut result = task.complete(task.worker as f64);
            if options.corrupt
                == Some(CorruptHook {
                    layer: task.layer,
                    worker: task.worker,
                })
            {
                let bumped = result.product.get(0, 0).clone() + T::one();
                result.product.set(0, 0, bumped);
            }
            by_layer[task.layer - 1].push(result);
        }
    }

    let mut layers = Vec::new();
    let mut rng = trial_rng(options.seed, 0);
    let mut first_grids = Vec::with_capacity(plan.layers.len());
    for (li, results) in by_layer.iter().enumerate() {
        let l = li + 1;
        let tile = plan.layer(l);
        let k = tile.threshold;
        let want: Vec<Vec<DenseMatrix<T>>> = tile
            .row_chunks
            .iter()
            .map(|rc| {
                tile.col_chunks
                    .iter()
                    .map(|cc| oracle.slice_block(rc.clone(), cc.clone()))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;

        let total = binomial(n_workers, k);
        let exhaustive = total.is_some_and(|t| t <= options.subset_budget);
        let subsets: Box<dyn Iterator<Item = Vec<usize>>> = if exhaustive {
            let mut idx: Vec<usize> = (0..k).collect();
            let mut done = false;
            Box::new(std::iter::from_fn(move || {
                if done {
                    return None;
                }
                let cur = idx.clone();
                done = !next_combination(&mut idx, n_workers);
                Some(cur)
            }))
        } else {
            let draws: Vec<Vec<usize>> = (0..options.subset_budget)
                .map(|_| {
                    let mut s = sample(&mut rng, n_workers, k).into_vec();
                    s.sort_unstable();
                    s
                })
                .collect();
            Box::new(draws.into_iter())
        };

        let mut checked = 0;
        for subset in subsets {
            checked += 1;
            let chosen: Vec<CompletedResult<T>> =
                subset.iter().map(|&w| results[w].clone()).collect();
            let workers: Vec<usize> = subset.iter().map(|w| w + 1).collect();
            let failure = match decode_layer(&chosen, plan, l) {
                Err(e) => Some(e.to_string()),
                Ok(grid) => grid
                    .iter()
                    .flatten()
                    .zip(want.iter().flatten())
                    .find_map(|(g, w)| mismatch(g, w, options.tolerance)),
            };
            if let Some(reason) = failure {
                layers.push(LayerAudit {
                    layer: l,
                    threshold: k,
                    subsets_checked: checked,
                    exhaustive,
                });
                return Ok(AuditReport {
                    layers,
                    partition_ok,
                    assembled_ok: false,
                    counterexample: Some(Counterexample {
                        layer: l,
                        workers,
                        reason,
                    }),
                });
            }
        }
        layers.push(LayerAudit {
            layer: l,
            threshold: k,
            subsets_checked: checked,
            exhaustive,
        });
        first_grids.push(Some(decode_layer(&results[..k], plan, l)?));
    }

    let residual = residual_product(a, b, plan)?;
    let assembled = assemble(&first_grids, residual.as_ref(), plan)?;
    let assembled_ok = mismatch(&assembled, &oracle, options.tolerance).is_none();
    Ok(AuditReport {
        layers,
        partition_ok,
        assembled_ok,
        counterexample: None,
    })
}
