//! Geometric decomposition of the `n_x x n_y` product into per-layer task
//! tiles, each split into a grid of information tiles.
//!
//! Layers take all rows and consume columns left to right: layer `l` gets
//! `floor(n_y / k_sum) * K_l` columns. Whatever is left on the right is the
//! residual, computed directly by the master.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-layer recovery thresholds `(K_1, ..., K_L)`, non-increasing.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Profile {
    thresholds: Vec<usize>,
}

impl Profile {
    pub fn new(thresholds: Vec<usize>) -> Result<Self> {
        if thresholds.is_empty() {
            return Err(Error::InvalidProfile(
                "profile needs at least one layer".into(),
            ));
        }
        if let Some(l) = thresholds.iter().position(|&k| k == 0) {
            return Err(Error::InvalidProfile(format!(
                "layer {} has threshold 0",
                l + 1
            )));
        }
        if let Some(l) = thresholds.windows(2).position(|w| w[0] < w[1]) {
            return Err(Error::InvalidProfile(format!(
                "thresholds must be non-increasing: K_{} = {} < K_{} = {}",
                l + 1,
                thresholds[l],
                l + 2,
                thresholds[l + 1]
            )));
        }
        Ok(Self { thresholds })
    }

    /// Checks `K_l <= n_workers` for every layer.
    pub fn validate_for(&self, n_workers: usize) -> Result<()> {
        match self.thresholds.iter().position(|&k| k > n_workers) {
            Some(l) => Err(Error::InfeasibleCode(format!(
                "layer {} threshold {} exceeds {} workers",
                l + 1,
                self.thresholds[l],
                n_workers
            ))),
            None => Ok(()),
        }
    }

    pub fn layers(&self) -> usize {
        self.thresholds.len()
    }

    pub fn thresholds(&self) -> &[usize] {
        &self.thresholds
    }

    /// Threshold of 1-based layer `l`.
    pub fn threshold(&self, l: usize) -> usize {
        self.thresholds[l - 1]
    }

    pub fn k_sum(&self) -> usize {
        self.thresholds.iter().sum()
    }

    pub fn max_threshold(&self) -> usize {
        self.thresholds[0]
    }
}

impl TryFrom<Vec<usize>> for Profile {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        Profile::new(v)
    }
}

impl From<Profile> for Vec<usize> {
    fn from(p: Profile) -> Self {
        p.thresholds
    }
}

/// Split of a task tile into `m_x` row chunks and `m_y` column chunks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LayerGrid {
    pub m_x: usize,
    pub m_y: usize,
}

impl LayerGrid {
    pub fn new(m_x: usize, m_y: usize) -> Self {
        Self { m_x, m_y }
    }

    pub fn tiles(&self) -> usize {
        self.m_x * self.m_y
    }
}

/// One layer's task tile and its chunk boundaries (absolute indices).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerTile {
    pub threshold: usize,
    pub rows: Range<usize>,
    pub cols: Range<usize>,
    pub grid: LayerGrid,
    pub row_chunks: Vec<Range<usize>>,
    pub col_chunks: Vec<Range<usize>>,
}

impl LayerTile {
    pub fn area(&self) -> usize {
        self.rows.len() * self.cols.len()
    }

    /// Shape every encoded product of this layer has (largest chunk sizes).
    pub fn padded_tile_shape(&self) -> (usize, usize) {
        (self.row_chunks[0].len(), self.col_chunks[0].len())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TilePlan {
    pub n_x: usize,
    pub n_z: usize,
    pub n_y: usize,
    pub profile: Profile,
    pub layers: Vec<LayerTile>,
    pub residual_cols: Range<usize>,
}

/// Split `range` into `parts` contiguous pieces whose sizes differ by at
/// most one; the first `len % parts` pieces are the longer ones.
pub fn split_near_equal(range: Range<usize>, parts: usize) -> Vec<Range<usize>> {
    assert!(
        parts > 0 && parts <= range.len(),
        "cannot split {range:?} into {parts}"
    );
    let base = range.len() / parts;
    let extra = range.len() % parts;
    let mut start = range.start;
    (0..parts)
        .map(|i| {
            let len = base + usize::from(i < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect()
}

fn column_unit(n_y: usize, profile: &Profile) -> Result<usize> {
    let unit = n_y / profile.k_sum();
    if unit == 0 {
        return Err(Error::InfeasibleTiling(format!(
            "k_sum = {} exceeds n_y = {n_y}",
            profile.k_sum()
        )));
    }
    Ok(unit)
}

/// Lay out the task tiles for `profile` with the given per-layer grids.
pub fn build_tile_plan(
    n_x: usize,
    n_z: usize,
    n_y: usize,
    profile: &Profile,
    grids: &[LayerGrid],
) -> Result<TilePlan> {
    if n_x == 0 || n_z == 0 || n_y == 0 {
        return Err(Error::InfeasibleTiling(
            "matrix dimensions must be positive".into(),
        ));
    }
    if grids.len() != profile.layers() {
        return Err(Error::InfeasibleTiling(format!(
            "{} grids supplied for {} layers",
            grids.len(),
            profile.layers()
        )));
    }
    let unit = column_unit(n_y, profile)?;

    let mut next_col = 0;
    let mut layers = Vec::with_capacity(grids.len());
    for (l, (grid, &k)) in grids.iter().zip(profile.thresholds()).enumerate() {
        if grid.tiles() != k {
            return Err(Error::InfeasibleTiling(format!(
                "layer {}: grid {}x{} does not give K_l = {k} tiles",
                l + 1,
                grid.m_x,
                grid.m_y
            )));
        }
        let width = unit * k;
        if grid.m_x > n_x || grid.m_y > width {
            return Err(Error::InfeasibleTiling(format!(
                "layer {}: grid {}x{} does not fit a {n_x}x{width} task tile",
                l + 1,
                grid.m_x,
                grid.m_y
            )));
        }
        let cols = next_col..next_col + width;
        next_col += width;
        layers.push(LayerTile {
            threshold: k,
            rows: 0..n_x,
            row_chunks: split_near_equal(0..n_x, grid.m_x),
            col_chunks: split_near_equal(cols.clone(), grid.m_y),
            cols,
            grid: *grid,
        });
    }

    Ok(TilePlan {
        n_x,
        n_z,
        n_y,
        profile: profile.clone(),
        layers,
        residual_cols: next_col..n_y,
    })
}

/// Per-worker data volume of a layer grid: rows of A plus columns of B shipped.
fn communication_proxy(n_x: usize, n_z: usize, width: usize, grid: LayerGrid) -> f64 {
    (n_x as f64 / grid.m_x as f64) * n_z as f64 + n_z as f64 * (width as f64 / grid.m_y as f64)
}

/// Pick `(m_x, m_y)` per layer minimizing the communication proxy, ties
/// going to the larger `m_x`.
pub fn choose_grids(
    profile: &Profile,
    n_x: usize,
    n_z: usize,
    n_y: usize,
) -> Result<Vec<LayerGrid>> {
    let unit = column_unit(n_y, profile)?;
    profile
        .thresholds()
        .iter()
        .enumerate()
        .map(|(l, &k)| {
            let width = unit * k;
            let mut best: Option<(f64, LayerGrid)> = None;
            for m_x in 1..=k {
                if k % m_x != 0 {
                    continue;
                }
                let grid = LayerGrid::new(m_x, k / m_x);
                if grid.m_x > n_x || grid.m_y > width {
                    continue;
                }
                let cost = communication_proxy(n_x, n_z, width, grid);
                // ascending m_x, so `<=` keeps the larger m_x on ties
                if best.is_none_or(|(c, _)| cost <= c) {
                    best = Some((cost, grid));
                }
            }
            best.map(|(_, g)| g).ok_or_else(|| {
                Error::InfeasibleTiling(format!("layer {}: no factorization of {k} fits", l + 1))
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResidualWork {
    pub rows: Range<usize>,
    pub cols: Range<usize>,
    pub op_count: usize,
}

/// The columns left over by the tiling; the master multiplies these directly.
pub fn residual_work(plan: &TilePlan) -> ResidualWork {
    ResidualWork {
        rows: 0..plan.n_x,
        cols: plan.residual_cols.clone(),
        op_count: plan.n_x * plan.n_z * plan.residual_cols.len(),
    }
}

impl TilePlan {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }

    /// 1-based layer access.
    pub fn layer(&self, l: usize) -> &LayerTile {
        &self.layers[l - 1]
    }

    pub fn has_residual(&self) -> bool {
        !self.residual_cols.is_empty()
    }
}
