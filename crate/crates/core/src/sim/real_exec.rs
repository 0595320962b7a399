//! Local concurrent execution: one thread per worker computing its encoded
//! subtasks in order, a master collecting results over a channel, and
//! artificial stragglers that idle for `(slowdown - 1)` times the measured
//! compute time of each subtask before reporting it.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{mpsc, Barrier};
use std::thread;
use std::time::{Duration, Instant};

use rand::Rng;

use super::{mean_stderr, ExperimentConfig, ExperimentReport, ReportRow, Scheme, TrialRow};
use crate::codec::{
    assemble, decode_layer, decode_plain, decode_sumrate, encode_hier, encode_plain,
    encode_sumrate, residual_product, CompletedResult, EncodedTask, SingleCode, TileGrid,
};
use crate::error::{Error, Result};
use crate::matrix::{mat_mul, EvalPointSet, Matrix};
use crate::runtime::trial_rng;
use crate::tiling::{build_tile_plan, choose_grids, Profile, TilePlan};

/// Relative Frobenius error allowed between the decoded and reference product.
pub const REAL_EXEC_TOLERANCE: f64 = 1e-6;

const IDLE_SLICE: Duration = Duration::from_millis(2);

#[derive(Debug, Clone)]
pub struct RealExecOutcome {
    pub report: ExperimentReport,
    /// Product decoded in the last successful trial (hierarchical preferred).
    pub recovered: Option<Matrix>,
}

/// When the master has enough results to decode.
#[derive(Debug, Clone)]
enum Completion {
    /// At least `K_l` results of every layer `l`.
    PerLayer(Vec<usize>),
    /// At least this many results in total.
    Total(usize),
}

impl Completion {
    fn satisfied(&self, per_layer: &[usize], total: usize) -> bool {
        match self {
            Completion::PerLayer(k) => k.iter().zip(per_layer).all(|(need, have)| have >= need),
            Completion::Total(k) => total >= *k,
        }
    }
}

struct Execution {
    results: Vec<CompletedResult<f64>>,
    finish_time: Option<f64>,
}

fn idle(total: Duration, cancel: &AtomicBool) {
    let until = Instant::now() + total;
    loop {
        if cancel.load(Ordering::Relaxed) {
            return;
        }
        let now = Instant::now();
        if now >= until {
            return;
        }
        thread::sleep((until - now).min(IDLE_SLICE));
    }
}

fn execute(
    tasks: &[Vec<EncodedTask<f64>>],
    stragglers: &[bool],
    slowdown: f64,
    killed: &[usize],
    rule: &Completion,
) -> Execution {
    let cancel = AtomicBool::new(false);
    let barrier = Barrier::new(tasks.len() + 1);
    let (tx, rx) = mpsc::channel::<(Instant, CompletedResult<f64>)>();
    let layers = tasks.iter().map(Vec::len).max().unwrap_or(0);

    thread::scope(|s| {
        for (n, worker_tasks) in tasks.iter().enumerate() {
            let tx = tx.clone();
            let (cancel, barrier) = (&cancel, &barrier);
            let straggler = stragglers[n];
            let dead = killed.contains(&(n + 1));
            s.spawn(move || {
                barrier.wait();
                if dead {
                    return;
                }
                for task in worker_tasks {
                    if cancel.load(Ordering::Relaxed) {
                        return;
                    }
                    let t0 = Instant::now();
                    let product = task.compute();
                    let busy = t0.elapsed();
                    if straggler && slowdown > 1.0 {
                        idle(busy.mul_f64(slowdown - 1.0), cancel);
                    }
                    if cancel.load(Ordering::Relaxed) {
                        return;
                    }
                    let result = CompletedResult {
                        worker: task.worker,
                        layer: task.layer,
                        point: task.point,
                        product,
                        finish_time: 0.0,
                    };
                    if tx.send((Instant::now(), result)).is_err() {
                        return;
                    }
                }
            });
        }
        drop(tx);
        barrier.wait();
        let start = Instant::now();

        let mut results = Vec::new();
        let mut per_layer = vec![0usize; layers];
        let mut finish_time = None;
        while let Ok((at, mut result)) = rx.recv() {
            result.finish_time = at.saturating_duration_since(start).as_secs_f64();
            per_layer[result.layer - 1] += 1;
            let t = result.finish_time;
            results.push(result);
            if rule.satisfied(&per_layer, results.len()) {
                finish_time = Some(t);
                cancel.store(true, Ordering::Relaxed);
                break;
            }
        }
        Execution {
            results,
            finish_time,
        }
    })
}

/// A scheme ready to run: encoded tasks plus what decoding needs.
enum Prepared {
    Hier {
        plan: TilePlan,
        residual: Option<Matrix>,
        tasks: Vec<Vec<EncodedTask<f64>>>,
    },
    Single {
        code: SingleCode,
        sumrate: bool,
        tasks: Vec<Vec<EncodedTask<f64>>>,
    },
}

impl Prepared {
    fn tasks(&self) -> &[Vec<EncodedTask<f64>>] {
        match self {
            Prepared::Hier { tasks, .. } | Prepared::Single { tasks, .. } => tasks,
        }
    }

    fn rule(&self) -> Completion {
        match self {
            Prepared::Hier { plan, .. } => Completion::PerLayer(plan.profile.thresholds().to_vec()),
            Prepared::Single { code, .. } => Completion::Total(code.threshold()),
        }
    }

    fn profile(&self) -> Vec<usize> {
        match self {
            Prepared::Hier { plan, .. } => plan.profile.thresholds().to_vec(),
            Prepared::Single { code, .. } => vec![code.threshold()],
        }
    }

    /// Decoded product with serial and layer-parallel decode wall times.
    fn decode(&self, results: &[CompletedResult<f64>]) -> Result<(Matrix, f64, f64)> {
        match self {
            Prepared::Hier { plan, residual, .. } => {
                let by_layer: Vec<Vec<CompletedResult<f64>>> = (1..=plan.layers.len())
                    .map(|l| results.iter().filter(|r| r.layer == l).cloned().collect())
                    .collect();

                let t0 = Instant::now();
                let grids = by_layer
                    .iter()
                    .enumerate()
                    .map(|(i, rs)| decode_layer(rs, plan, i + 1).map(Some))
                    .collect::<Result<Vec<Option<TileGrid<f64>>>>>()?;
                let serial = t0.elapsed().as_secs_f64();

                let t1 = Instant::now();
                thread::scope(|s| {
                    let handles: Vec<_> = by_layer
                        .iter()
                        .enumerate()
                        .map(|(i, rs)| s.spawn(move || decode_layer(rs, plan, i + 1)))
                        .collect();
                    handles
                        .into_iter()
                        .map(|h| h.join().expect("decode thread panicked").map(|_| ()))
                        .collect::<Result<Vec<()>>>()
                })?;
                let parallel = t1.elapsed().as_secs_f64();

                Ok((assemble(&grids, residual.as_ref(), plan)?, serial, parallel))
            }
            Prepared::Single { code, sumrate, .. } => {
                let t0 = Instant::now();
                let out = if *sumrate {
                    decode_sumrate(results, code)?
                } else {
                    decode_plain(results, code)?
                };
                let t = t0.elapsed().as_secs_f64();
                Ok((out, t, t))
            }
        }
    }
}

fn single_code(config: &ExperimentConfig, threshold: usize) -> Result<SingleCode> {
    let [n_x, n_z, n_y] = config.dims;
    let grid = choose_grids(&Profile::new(vec![threshold])?, n_x, n_z, n_y)?[0];
    SingleCode::new(n_x, n_z, n_y, grid.m_x, grid.m_y)
}

fn prepare(
    config: &ExperimentConfig,
    scheme: Scheme,
    layers: usize,
    a: &Matrix,
    b: &Matrix,
) -> Result<Prepared> {
    let n = config.n_workers;
    let [n_x, n_z, n_y] = config.dims;
    match scheme {
        Scheme::Hier => {
            let profile = config.hier_profile(layers)?;
            profile.validate_for(n)?;
            let grids = choose_grids(&profile, n_x, n_z, n_y)?;
            let plan = build_tile_plan(n_x, n_z, n_y, &profile, &grids)?;
            let tasks = encode_hier(a, b, &plan, &EvalPointSet::new(config.points, n), n)?;
            let residual = residual_product(a, b, &plan)?;
            Ok(Prepared::Hier {
                plan,
                residual,
                tasks,
            })
        }
        Scheme::Plain => {
            let code = single_code(config, config.load)?;
            let tasks = encode_plain(a, b, &code, &EvalPointSet::new(config.points, n), n)?
                .into_iter()
                .map(|t| vec![t])
                .collect();
            Ok(Prepared::Single {
                code,
                sumrate: false,
                tasks,
            })
        }
        Scheme::SumRate => {
            let code = single_code(config, config.load * layers)?;
            let points = EvalPointSet::new(config.points, n * layers);
            let tasks = encode_sumrate(a, b, &code, layers, &points, n)?;
            Ok(Prepared::Single {
                code,
                sumrate: true,
                tasks,
            })
        }
    }
}

#[derive(Default)]
struct SchemeStats {
    finish: Vec<f64>,
    decode_serial: Vec<f64>,
    decode_parallel: Vec<f64>,
    max_rel_error: f64,
    failures: usize,
}

/// Run every configured scheme for `trials` trials on the same operands.
///
/// Straggler draws come from the trial's RNG stream and are shared by all
/// schemes and layer counts within the trial.
pub fn run_real_exec(config: &ExperimentConfig, a: &Matrix, b: &Matrix) -> Result<RealExecOutcome> {
    config.validate()?;
    let [n_x, n_z, n_y] = config.dims;
    if a.shape() != (n_x, n_z) || b.shape() != (n_z, n_y) {
        return Err(Error::DimensionMismatch(format!(
            "operands {:?} x {:?} do not match dims {:?}",
            a.shape(),
            b.shape(),
            config.dims
        )));
    }
    let oracle = mat_mul(a, b)?;

    // (layers, scheme) -> prepared code, or the reason it cannot run
    let mut prepared: Vec<(usize, Scheme, std::result::Result<Prepared, String>)> = Vec::new();
    for &layers in &config.layers {
        for &scheme in &config.schemes {
            let p = prepare(config, scheme, layers, a, b).map_err(|e| e.to_string());
            prepared.push((layers, scheme, p));
        }
    }
    let mut stats: Vec<SchemeStats> = prepared.iter().map(|_| SchemeStats::default()).collect();
    let mut trial_rows = Vec::new();
    let mut recovered: Option<(Scheme, Matrix)> = None;

    for trial in 0..config.trials {
        let mut rng = trial_rng(config.seed, trial as u64);
        let stragglers: Vec<bool> = (0..config.n_workers)
            .map(|_| rng.random_bool(config.straggler_probability))
            .collect();
        let straggler_count = stragglers.iter().filter(|&&s| s).count();

        for &layers in &config.layers {
            let mut row = TrialRow {
                trial,
                layers,
                hier: None,
                plain: None,
                sumrate: None,
                stragglers: Some(straggler_count),
            };
            for (idx, (l, scheme, prep)) in prepared.iter().enumerate() {
                let Ok(prep) = prep else { continue };
                if *l != layers {
                    continue;
                }
                let exec = execute(
                    prep.tasks(),
                    &stragglers,
                    config.slowdown,
                    &config.kill_workers,
                    &prep.rule(),
                );
                let st = &mut stats[idx];
                let Some(finish) = exec.finish_time else {
                    st.failures += 1;
                    continue;
                };
                match prep.decode(&exec.results) {
                    Ok((product, serial, parallel)) => {
                        let err = product.relative_error(&oracle)?;
                        st.finish.push(finish);
                        st.decode_serial.push(serial);
                        st.decode_parallel.push(parallel);
                        st.max_rel_error = st.max_rel_error.max(err);
                        match scheme {
                            Scheme::Hier => row.hier = Some(finish),
                            Scheme::Plain => row.plain = Some(finish),
                            Scheme::SumRate => row.sumrate = Some(finish),
                        }
                        if recovered
                            .as_ref()
                            .is_none_or(|(s, _)| *s != Scheme::Hier || *scheme == Scheme::Hier)
                        {
                            recovered = Some((*scheme, product));
                        }
                    }
                    Err(_) => st.failures += 1,
                }
            }
            trial_rows.push(row);
        }
    }

    let rows = prepared
        .iter()
        .zip(&stats)
        .map(|((layers, scheme, prep), st)| match prep {
            Err(reason) => ReportRow::skipped(*scheme, *layers, reason.clone()),
            Ok(prep) => {
                let mut row = ReportRow::new(*scheme, *layers, prep.profile());
                row.trials = config.trials;
                row.failures = st.failures;
                if !st.finish.is_empty() {
                    let (mean, stderr) = mean_stderr(&st.finish);
                    row.mean_finish = Some(mean);
                    row.stderr_finish = Some(stderr);
                    row.mean_decode_serial_s = Some(mean_stderr(&st.decode_serial).0);
                    row.mean_decode_parallel_s = Some(mean_stderr(&st.decode_parallel).0);
                    row.max_rel_error = Some(st.max_rel_error);
                }
                row
            }
        })
        .collect();

    Ok(RealExecOutcome {
        report: ExperimentReport {
            mode: config.mode,
            config_hash: config.config_hash(),
            seed: config.seed,
            trials: config.trials,
            rows,
            trial_rows,
            notes: vec![format!(
                "wall-clock times; straggler probability {}, slowdown {}",
                config.straggler_probability, config.slowdown
            )],
        },
        recovered: recovered.map(|(_, m)| m),
    })
}
