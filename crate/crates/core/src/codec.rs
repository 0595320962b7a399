//! Polynomial-coded encoding and threshold decoding for the three schemes:
//! hierarchical (one code per layer), plain polynomial, and sum-rate.
//!
//! For a grid of `m_x` row chunks `A_i` and `m_y` column chunks `B_j` the
//! encoders are `A(x) = sum_i A_i x^i` and `B(x) = sum_j B_j x^(j m_x)`
//! (0-based `i`, `j`), so the coefficient of `x^(i + j m_x)` in `A(x) B(x)`
//! is exactly the tile `A_i B_j`. Chunks of unequal size are zero-padded to
//! the largest chunk before encoding and cropped again after decoding.

use std::io::{Read, Write};
use std::ops::Range;

use crate::error::{Error, Result};
use crate::matrix::{interpolate_matrix_poly, mat_mul, DenseMatrix, EvalPointSet, Matrix, Scalar};
use crate::tiling::{split_near_equal, TilePlan};

/// One encoded subtask: the worker multiplies `a_hat * b_hat`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedTask<T> {
    /// 1-based worker index.
    pub worker: usize,
    /// 1-based layer (hierarchical) or subtask index (sum-rate); always 1 for plain.
    pub layer: usize,
    pub point: T,
    pub a_hat: DenseMatrix<T>,
    pub b_hat: DenseMatrix<T>,
}

impl<T: Scalar> EncodedTask<T> {
    pub fn compute(&self) -> DenseMatrix<T> {
        mat_mul(&self.a_hat, &self.b_hat).expect("encoded shapes agree")
    }

    pub fn complete(&self, finish_time: f64) -> CompletedResult<T> {
        CompletedResult {
            worker: self.worker,
            layer: self.layer,
            point: self.point.clone(),
            product: self.compute(),
            finish_time,
        }
    }
}

impl EncodedTask<f64> {
    /// Header of worker and layer (u64 LE) and point (f64 LE), then both
    /// matrices in the flat binary matrix layout.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&(self.worker as u64).to_le_bytes())?;
        w.write_all(&(self.layer as u64).to_le_bytes())?;
        w.write_all(&self.point.to_le_bytes())?;
        self.a_hat.write_binary(&mut w)?;
        self.b_hat.write_binary(&mut w)
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut word = [0u8; 8];
        r.read_exact(&mut word)?;
        let worker = u64::from_le_bytes(word) as usize;
        r.read_exact(&mut word)?;
        let layer = u64::from_le_bytes(word) as usize;
        r.read_exact(&mut word)?;
        let point = f64::from_le_bytes(word);
        let a_hat = read_matrix_prefix(&mut r)?;
        let b_hat = read_matrix_prefix(&mut r)?;
        Ok(Self {
            worker,
            layer,
            point,
            a_hat,
            b_hat,
        })
    }
}

fn read_matrix_prefix<R: Read>(r: &mut R) -> Result<Matrix> {
    let mut header = [0u8; 16];
    r.read_exact(&mut header)?;
    let rows = u64::from_le_bytes(header[..8].try_into().unwrap()) as usize;
    let cols = u64::from_le_bytes(header[8..].try_into().unwrap()) as usize;
    let mut payload = vec![0u8; rows * cols * 8];
    r.read_exact(&mut payload)?;
    let mut buf = header.to_vec();
    buf.extend_from_slice(&payload);
    Matrix::read_binary(&buf[..])
}

/// A finished subtask as received by the master.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletedResult<T> {
    pub worker: usize,
    pub layer: usize,
    pub point: T,
    pub product: DenseMatrix<T>,
    pub finish_time: f64,
}

/// Decoded information tiles of one layer, indexed `[i][j]` for row chunk
/// `i` and column chunk `j`.
pub type TileGrid<T> = Vec<Vec<DenseMatrix<T>>>;

/// Padded row chunks of `A` and column chunks of `B`.
type DataChunks<T> = (Vec<DenseMatrix<T>>, Vec<DenseMatrix<T>>);

/// Row and column chunking shared by the encoder and decoder of one code.
#[derive(Debug, Clone, PartialEq, Eq)]
struct ChunkLayout {
    row_chunks: Vec<Range<usize>>,
    col_chunks: Vec<Range<usize>>,
}

impl ChunkLayout {
    fn m_x(&self) -> usize {
        self.row_chunks.len()
    }

    fn m_y(&self) -> usize {
        self.col_chunks.len()
    }

    fn threshold(&self) -> usize {
        self.m_x() * self.m_y()
    }

    fn padded_shape(&self) -> (usize, usize) {
        (self.row_chunks[0].len(), self.col_chunks[0].len())
    }

    fn data_chunks<T: Scalar>(
        &self,
        a: &DenseMatrix<T>,
        b: &DenseMatrix<T>,
    ) -> Result<DataChunks<T>> {
        let (pr, pc) = self.padded_shape();
        let n_z = a.cols();
        let a_chunks = self
            .row_chunks
            .iter()
            .map(|r| Ok(a.slice_block(r.clone(), 0..n_z)?.padded(pr, n_z)))
            .collect::<Result<Vec<_>>>()?;
        let b_chunks = self
            .col_chunks
            .iter()
            .map(|c| Ok(b.slice_block(0..n_z, c.clone())?.padded(n_z, pc)))
            .collect::<Result<Vec<_>>>()?;
        Ok((a_chunks, b_chunks))
    }

    fn encode_at<T: Scalar>(
        &self,
        a_chunks: &[DenseMatrix<T>],
        b_chunks: &[DenseMatrix<T>],
        x: &T,
    ) -> (DenseMatrix<T>, DenseMatrix<T>) {
        let m_x = self.m_x();
        let mut a_hat = DenseMatrix::zeros(a_chunks[0].rows(), a_chunks[0].cols());
        for (i, chunk) in a_chunks.iter().enumerate() {
            a_hat
                .add_scaled(&x.pow(i), chunk)
                .expect("equal chunk shapes");
        }
        let mut b_hat = DenseMatrix::zeros(b_chunks[0].rows(), b_chunks[0].cols());
        for (j, chunk) in b_chunks.iter().enumerate() {
            b_hat
                .add_scaled(&x.pow(j * m_x), chunk)
                .expect("equal chunk shapes");
        }
        (a_hat, b_hat)
    }

    /// Interpolate `A(x)B(x)` from the selected results and cut the
    /// coefficients back into cropped tiles.
    fn decode<T: Scalar>(&self, results: &[&CompletedResult<T>]) -> Result<TileGrid<T>> {
        let shape = self.padded_shape();
        if let Some(r) = results.iter().find(|r| r.product.shape() != shape) {
            return Err(Error::DimensionMismatch(format!(
                "result from worker {} has shape {:?}, expected {:?}",
                r.worker,
                r.product.shape(),
                shape
            )));
        }
        let evals: Vec<(T, &DenseMatrix<T>)> = results
            .iter()
            .map(|r| (r.point.clone(), &r.product))
            .collect();
        let coeffs = interpolate_matrix_poly(&evals, self.threshold())?;
        let m_x = self.m_x();
        let grid = self
            .row_chunks
            .iter()
            .enumerate()
            .map(|(i, rc)| {
                self.col_chunks
                    .iter()
                    .enumerate()
                    .map(|(j, cc)| {
                        let c = &coeffs[i + j * m_x];
                        if c.shape() == (rc.len(), cc.len()) {
                            c.clone()
                        } else {
                            c.slice_block(0..rc.len(), 0..cc.len())
                                .expect("crop within padding")
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(grid)
    }

    fn place_grid<T: Scalar>(&self, out: &mut DenseMatrix<T>, grid: &TileGrid<T>) -> Result<()> {
        for (rc, row) in self.row_chunks.iter().zip(grid) {
            for (cc, tile) in self.col_chunks.iter().zip(row) {
                if tile.shape() != (rc.len(), cc.len()) {
                    return Err(Error::DimensionMismatch(format!(
                        "tile of shape {:?} for chunk {rc:?} x {cc:?}",
                        tile.shape()
                    )));
                }
                out.place_block(tile, rc.start, cc.start)?;
            }
        }
        Ok(())
    }
}

fn check_operands<T: Scalar>(
    a: &DenseMatrix<T>,
    b: &DenseMatrix<T>,
    n_x: usize,
    n_z: usize,
    n_y: usize,
) -> Result<()> {
    if a.shape() != (n_x, n_z) || b.shape() != (n_z, n_y) {
        return Err(Error::DimensionMismatch(format!(
            "operands {:?} x {:?} do not match {n_x}x{n_z} x {n_z}x{n_y}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

/// Keep the `k` results that arrived first, ties broken by worker then layer.
pub fn select_earliest<T>(results: &[CompletedResult<T>], k: usize) -> Vec<&CompletedResult<T>> {
    let mut sorted: Vec<&CompletedResult<T>> = results.iter().collect();
    sorted.sort_by(|a, b| {
        a.finish_time
            .total_cmp(&b.finish_time)
            .then(a.worker.cmp(&b.worker))
            .then(a.layer.cmp(&b.layer))
    });
    sorted.truncate(k);
    sorted
}

fn check_result_points<T: Scalar>(results: &[CompletedResult<T>]) -> Result<()> {
    for i in 0..results.len() {
        for j in i + 1..results.len() {
            if results[i].point == results[j].point {
                return Err(Error::DuplicatePoint(i, j));
            }
        }
    }
    Ok(())
}

fn layer_layout(plan: &TilePlan, l: usize) -> ChunkLayout {
    let layer = plan.layer(l);
    ChunkLayout {
        row_chunks: layer.row_chunks.clone(),
        col_chunks: layer.col_chunks.clone(),
    }
}

/// Hierarchical encoding: for every worker, one task per layer in layer order.
pub fn encode_hier<T: Scalar>(
    a: &DenseMatrix<T>,
    b: &DenseMatrix<T>,
    plan: &TilePlan,
    points: &EvalPointSet,
    n_workers: usize,
) -> Result<Vec<Vec<EncodedTask<T>>>> {
    check_operands(a, b, plan.n_x, plan.n_z, plan.n_y)?;
    if n_workers < plan.profile.max_threshold() {
        return Err(Error::InfeasibleCode(format!(
            "{n_workers} workers cannot meet layer-1 threshold {}",
            plan.profile.max_threshold()
        )));
    }
    if points.len() < n_workers {
        return Err(Error::InfeasibleCode(format!(
            "{} evaluation points for {n_workers} workers",
            points.len()
        )));
    }
    let xs: Vec<T> = points.values();
    let mut per_worker: Vec<Vec<EncodedTask<T>>> = (0..n_workers).map(|_| Vec::new()).collect();
    for l in 1..=plan.layers.len() {
        let layout = layer_layout(plan, l);
        let (a_chunks, b_chunks) = layout.data_chunks(a, b)?;
        for (n, tasks) in per_worker.iter_mut().enumerate() {
            let (a_hat, b_hat) = layout.encode_at(&a_chunks, &b_chunks, &xs[n]);
            tasks.push(EncodedTask {
                worker: n + 1,
                layer: l,
                point: xs[n].clone(),
                a_hat,
                b_hat,
            });
        }
    }
    Ok(per_worker)
}

/// Recover layer `l`'s information tiles from at least `K_l` results.
pub fn decode_layer<T: Scalar>(
    results: &[CompletedResult<T>],
    plan: &TilePlan,
    l: usize,
) -> Result<TileGrid<T>> {
    if l == 0 || l > plan.layers.len() {
        return Err(Error::OutOfRange(format!(
            "layer {l} of {}",
            plan.layers.len()
        )));
    }
    if let Some(r) = results.iter().find(|r| r.layer != l) {
        return Err(Error::InvalidParameter(format!(
            "result from worker {} belongs to layer {}, not {l}",
            r.worker, r.layer
        )));
    }
    let need = plan.layer(l).threshold;
    if results.len() < need {
        return Err(Error::NotEnoughResults {
            have: results.len(),
            need,
        });
    }
    check_result_points(results)?;
    layer_layout(plan, l).decode(&select_earliest(results, need))
}

/// Stitch decoded layers and the master's residual block into the full product.
///
/// `grids[l - 1]` holds layer `l`; `None` marks a layer that was not decoded.
pub fn assemble<T: Scalar>(
    grids: &[Option<TileGrid<T>>],
    residual: Option<&DenseMatrix<T>>,
    plan: &TilePlan,
) -> Result<DenseMatrix<T>> {
    let mut missing: Vec<usize> = (1..=plan.layers.len())
        .filter(|&l| grids.get(l - 1).is_none_or(Option::is_none))
        .collect();
    if grids.len() > plan.layers.len() {
        return Err(Error::InvalidParameter(format!(
            "{} tile grids for {} layers",
            grids.len(),
            plan.layers.len()
        )));
    }
    if !missing.is_empty() {
        missing.sort_unstable();
        return Err(Error::MissingLayers(missing));
    }
    let mut out = DenseMatrix::zeros(plan.n_x, plan.n_y);
    for (l, grid) in grids.iter().enumerate() {
        layer_layout(plan, l + 1).place_grid(&mut out, grid.as_ref().expect("checked above"))?;
    }
    if plan.has_residual() {
        let res =
            residual.ok_or_else(|| Error::InvalidParameter("residual block required".into()))?;
        if res.shape() != (plan.n_x, plan.residual_cols.len()) {
            return Err(Error::DimensionMismatch(format!(
                "residual block {:?}, expected {}x{}",
                res.shape(),
                plan.n_x,
                plan.residual_cols.len()
            )));
        }
        out.place_block(res, 0, plan.residual_cols.start)?;
    }
    Ok(out)
}

/// The master's direct product over the residual columns, if any.
pub fn residual_product<T: Scalar>(
    a: &DenseMatrix<T>,
    b: &DenseMatrix<T>,
    plan: &TilePlan,
) -> Result<Option<DenseMatrix<T>>> {
    if !plan.has_residual() {
        return Ok(None);
    }
    let cols = b.slice_block(0..plan.n_z, plan.residual_cols.clone())?;
    mat_mul(a, &cols).map(Some)
}

/// Single polynomial code over the whole product, used by the plain and
/// sum-rate schemes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SingleCode {
    pub n_x: usize,
    pub n_z: usize,
    pub n_y: usize,
    layout: ChunkLayout,
}

impl SingleCode {
    pub fn new(n_x: usize, n_z: usize, n_y: usize, m_x: usize, m_y: usize) -> Result<Self> {
        if m_x == 0 || m_y == 0 || m_x > n_x || m_y > n_y || n_z == 0 {
            return Err(Error::InfeasibleTiling(format!(
                "cannot split {n_x}x{n_y} into a {m_x}x{m_y} grid"
            )));
        }
        Ok(Self {
            n_x,
            n_z,
            n_y,
            layout: ChunkLayout {
                row_chunks: split_near_equal(0..n_x, m_x),
                col_chunks: split_near_equal(0..n_y, m_y),
            },
        })
    }

    pub fn m_x(&self) -> usize {
        self.layout.m_x()
    }

    pub fn m_y(&self) -> usize {
        self.layout.m_y()
    }

    pub fn threshold(&self) -> usize {
        self.layout.threshold()
    }

    fn encode_points<T: Scalar>(
        &self,
        a: &DenseMatrix<T>,
        b: &DenseMatrix<T>,
        xs: &[T],
    ) -> Result<Vec<(DenseMatrix<T>, DenseMatrix<T>)>> {
        check_operands(a, b, self.n_x, self.n_z, self.n_y)?;
        let (a_chunks, b_chunks) = self.layout.data_chunks(a, b)?;
        Ok(xs
            .iter()
            .map(|x| self.layout.encode_at(&a_chunks, &b_chunks, x))
            .collect())
    }
}

/// Plain polynomial code: one task per worker, threshold `m_x * m_y`.
pub fn encode_plain<T: Scalar>(
    a: &DenseMatrix<T>,
    b: &DenseMatrix<T>,
    code: &SingleCode,
    points: &EvalPointSet,
    n_workers: usize,
) -> Result<Vec<EncodedTask<T>>> {
    if n_workers < code.threshold() {
        return Err(Error::InfeasibleCode(format!(
            "{n_workers} workers cannot meet threshold {}",
            code.threshold()
        )));
    }
    if points.len() < n_workers {
        return Err(Error::InfeasibleCode(format!(
            "{} evaluation points for {n_workers} workers",
            points.len()
        )));
    }
    let xs: Vec<T> = points.values();
    let encoded = code.encode_points(a, b, &xs[..n_workers])?;
    Ok(encoded
        .into_iter()
        .zip(xs)
        .enumerate()
        .map(|(n, ((a_hat, b_hat), point))| EncodedTask {
            worker: n + 1,
            layer: 1,
            point,
            a_hat,
            b_hat,
        })
        .collect())
}

/// Sum-rate code: worker `n`'s `i`-th sequential subtask (both 1-based)
/// evaluates the single code at point index `(n - 1) * layers + i`.
pub fn encode_sumrate<T: Scalar>(
    a: &DenseMatrix<T>,
    b: &DenseMatrix<T>,
    code: &SingleCode,
    layers: usize,
    points: &EvalPointSet,
    n_workers: usize,
) -> Result<Vec<Vec<EncodedTask<T>>>> {
    let total = n_workers * layers;
    if layers == 0 || total < code.threshold() {
        return Err(Error::InfeasibleCode(format!(
            "{n_workers} workers x {layers} subtasks cannot meet threshold {}",
            code.threshold()
        )));
    }
    if points.len() < total {
        return Err(Error::InfeasibleCode(format!(
            "{} evaluation points for {total} subtasks",
            points.len()
        )));
    }
    let xs: Vec<T> = points.values();
    let mut encoded = code.encode_points(a, b, &xs[..total])?.into_iter();
    let tasks = (1..=n_workers)
        .map(|n| {
            (1..=layers)
                .map(|i| {
                    let (a_hat, b_hat) = encoded.next().expect("one encoding per subtask");
                    EncodedTask {
                        worker: n,
                        layer: i,
                        point: xs[(n - 1) * layers + i - 1].clone(),
                        a_hat,
                        b_hat,
                    }
                })
                .collect()
        })
        .collect();
    Ok(tasks)
}

/// Decode a single-code scheme (plain or sum-rate) into the full product.
pub fn decode_sumrate<T: Scalar>(
    results: &[CompletedResult<T>],
    code: &SingleCode,
) -> Result<DenseMatrix<T>> {
    let need = code.threshold();
    if results.len() < need {
        return Err(Error::NotEnoughResults {
            have: results.len(),
            need,
        });
    }
    check_result_points(results)?;
    let grid = code.layout.decode(&select_earliest(results, need))?;
    let mut out = DenseMatrix::zeros(code.n_x, code.n_y);
    code.layout.place_grid(&mut out, &grid)?;
    Ok(out)
}

/// Plain decoding is the single-code decoder with one result per worker.
pub fn decode_plain<T: Scalar>(
    results: &[CompletedResult<T>],
    code: &SingleCode,
) -> Result<DenseMatrix<T>> {
    decode_sumrate(results, code)
}
