//! Structured collocated grids, field storage and the discrete operators and
//! norms built on them.
//!
//! Nodes are stored with the first axis fastest: `idx = i + nx * (j + ny * k)`.
//! A periodic axis with `n` cells carries `n` nodes; any other axis carries
//! `n + 1` nodes including both faces.

mod io;
mod norms;
mod stencil;
mod trajectory;

pub use io::{read_field_dump, write_field_dump, write_norm_csv, NormCsvRow, DUMP_HEADER_LEN, DUMP_MAGIC};
pub use norms::{l2_norm, l2_norm_scalar, lipschitz_norm, max_norm, norm_report, sobolev_norm, NormReport};
pub(crate) use stencil::{apply_flux, for_each_slab, AxisStencil, Closure};
pub use stencil::{discrete_curl, discrete_div, discrete_partial, discrete_partial_scalar};
pub use trajectory::{fd_weights, gm_norm, TimeLevel, Trajectory};

use serde::{Deserialize, Serialize};

use crate::error::{QmxError, Result};

/// Six-component node value `(E1, E2, E3, H1, H2, H3)`.
pub type Vec6 = [f64; 6];

/// Default cap on the total number of cells.
pub const DEFAULT_CELL_CAP: usize = 1 << 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryMode {
    Periodic,
    /// Perfect conductor at the bottom face `x3 = origin3`, absorbing top face.
    PecBottomOpenTop,
    /// Absorbing faces at both ends.
    Open,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    cells: [usize; 3],
    spacing: [f64; 3],
    origin: [f64; 3],
    modes: [BoundaryMode; 3],
}

impl GridSpec {
    pub fn new(
        cells: [usize; 3],
        spacing: [f64; 3],
        origin: [f64; 3],
        modes: [BoundaryMode; 3],
    ) -> Result<Self> {
        Self::with_cap(cells, spacing, origin, modes, DEFAULT_CELL_CAP)
    }

    pub fn with_cap(
        cells: [usize; 3],
        spacing: [f64; 3],
        origin: [f64; 3],
        modes: [BoundaryMode; 3],
        cap: usize,
    ) -> Result<Self> {
        for a in 0..3 {
            if !(spacing[a].is_finite() && spacing[a] > 0.0) {
                return Err(QmxError::InvalidGrid(format!(
                    "spacing on axis {} must be positive, got {}",
                    a + 1,
                    spacing[a]
                )));
            }
            if cells[a] == 0 {
                return Err(QmxError::InvalidGrid(format!("axis {} has zero cells", a + 1)));
            }
            if !origin[a].is_finite() {
                return Err(QmxError::InvalidGrid("origin must be finite".into()));
            }
        }
        if modes[0] == BoundaryMode::PecBottomOpenTop || modes[1] == BoundaryMode::PecBottomOpenTop {
            return Err(QmxError::InvalidGrid(
                "pec_bottom_open_top is only legal on axis 3".into(),
            ));
        }
        let total = cells
            .iter()
            .try_fold(1usize, |acc, &c| acc.checked_mul(c))
            .ok_or_else(|| QmxError::InvalidGrid("cell count overflows".into()))?;
        if total > cap {
            return Err(QmxError::InvalidGrid(format!(
                "{total} cells exceeds the cap of {cap}"
            )));
        }
        Ok(Self {
            cells,
            spacing,
            origin,
            modes,
        })
    }

    /// Cube `[origin, origin + length]^3` with `n` cells per axis.
    pub fn cube(n: usize, length: f64, modes: [BoundaryMode; 3]) -> Result<Self> {
        let h = length / n as f64;
        Self::new([n; 3], [h; 3], [0.0; 3], modes)
    }

    pub fn cells(&self) -> [usize; 3] {
        self.cells
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn origin(&self) -> [f64; 3] {
        self.origin
    }

    pub fn modes(&self) -> [BoundaryMode; 3] {
        self.modes
    }

    pub fn is_periodic(&self, axis0: usize) -> bool {
        self.modes[axis0] == BoundaryMode::Periodic
    }

    pub fn dims(&self) -> [usize; 3] {
        let mut d = self.cells;
        for a in 0..3 {
            if !self.is_periodic(a) {
                d[a] += 1;
            }
        }
        d
    }

    pub fn node_count(&self) -> usize {
        let d = self.dims();
        d[0] * d[1] * d[2]
    }

    pub fn strides(&self) -> [usize; 3] {
        let d = self.dims();
        [1, d[0], d[0] * d[1]]
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        let d = self.dims();
        i + d[0] * (j + d[1] * k)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let d = self.dims();
        [idx % d[0], (idx / d[0]) % d[1], idx / (d[0] * d[1])]
    }

    #[inline]
    pub fn position(&self, idx: usize) -> [f64; 3] {
        let c = self.coords(idx);
        [
            self.origin[0] + c[0] as f64 * self.spacing[0],
            self.origin[1] + c[1] as f64 * self.spacing[1],
            self.origin[2] + c[2] as f64 * self.spacing[2],
        ]
    }

    pub fn positions(&self) -> Vec<[f64; 3]> {
        (0..self.node_count()).map(|n| self.position(n)).collect()
    }

    /// Physical length covered by an axis.
    pub fn extent(&self, axis0: usize) -> f64 {
        self.cells[axis0] as f64 * self.spacing[axis0]
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub fn has_pec_face(&self) -> bool {
        self.modes[2] == BoundaryMode::PecBottomOpenTop
    }

    /// Outer unit normal at the conducting face.
    pub fn pec_normal(&self) -> Option<[f64; 3]> {
        self.has_pec_face().then_some([0.0, 0.0, -1.0])
    }

    /// Number of nodes on the bottom (`k = 0`) face.
    pub fn face_node_count(&self) -> usize {
        let d = self.dims();
        d[0] * d[1]
    }

    /// One-dimensional trapezoid weight of index `i` on an axis.
    #[inline]
    pub fn axis_weight(&self, axis0: usize, i: usize) -> f64 {
        let h = self.spacing[axis0];
        if self.is_periodic(axis0) {
            h
        } else if i == 0 || i == self.cells[axis0] {
            0.5 * h
        } else {
            h
        }
    }

    #[inline]
    pub fn node_weight(&self, idx: usize) -> f64 {
        let c = self.coords(idx);
        self.axis_weight(0, c[0]) * self.axis_weight(1, c[1]) * self.axis_weight(2, c[2])
    }

    pub fn node_weights(&self) -> Vec<f64> {
        (0..self.node_count()).map(|n| self.node_weight(n)).collect()
    }

    /// Quadrature weight of a bottom-face node (lateral weights only).
    #[inline]
    pub fn face_weight(&self, face_idx: usize) -> f64 {
        let d = self.dims();
        self.axis_weight(0, face_idx % d[0]) * self.axis_weight(1, face_idx / d[0])
    }

    pub fn check_axis_cells(&self, axis0: usize, needed: usize) -> Result<()> {
        if self.cells[axis0] < needed {
            return Err(QmxError::GridTooSmall {
                axis: axis0 + 1,
                cells: self.cells[axis0],
                needed,
            });
        }
        Ok(())
    }

    /// Smallest distance from `x` to a non-periodic face.
    pub fn distance_to_open_faces(&self, x: [f64; 3]) -> f64 {
        let mut d = f64::INFINITY;
        for a in 0..3 {
            if !self.is_periodic(a) {
                let lo = self.origin[a];
                let hi = lo + self.extent(a);
                d = d.min(x[a] - lo).min(hi - x[a]);
            }
        }
        d
    }

    /// Distance to the absorbing faces only (the conducting face excluded).
    pub fn distance_to_artificial_faces(&self, x: [f64; 3]) -> f64 {
        let mut d = f64::INFINITY;
        for a in 0..3 {
            match self.modes[a] {
                BoundaryMode::Periodic => {}
                BoundaryMode::Open => {
                    let lo = self.origin[a];
                    d = d.min(x[a] - lo).min(lo + self.extent(a) - x[a]);
                }
                BoundaryMode::PecBottomOpenTop => {
                    d = d.min(self.origin[a] + self.extent(a) - x[a]);
                }
            }
        }
        d
    }

    /// Euclidean distance between two points, using minimum images on periodic axes.
    pub fn distance(&self, x: [f64; 3], y: [f64; 3]) -> f64 {
        let mut s = 0.0;
        for a in 0..3 {
            let mut d = x[a] - y[a];
            if self.is_periodic(a) {
                let l = self.extent(a);
                d -= l * (d / l).round();
            }
            s += d * d;
        }
        s.sqrt()
    }
}

/// Six-component state `u = (E, H)` sampled on every grid node at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldState {
    pub grid: GridSpec,
    pub time: f64,
    pub values: Vec<Vec6>,
}

impl FieldState {
    pub fn zeros(grid: GridSpec, time: f64) -> Self {
        Self {
            grid,
            time,
            values: vec![[0.0; 6]; grid.node_count()],
        }
    }

    pub fn new(grid: GridSpec, time: f64, values: Vec<Vec6>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(QmxError::ShapeMismatch(format!(
                "{} values for {} nodes",
                values.len(),
                grid.node_count()
            )));
        }
        Ok(Self { grid, time, values })
    }

    pub fn from_fn(grid: GridSpec, time: f64, mut f: impl FnMut([f64; 3]) -> Vec6) -> Self {
        let values = (0..grid.node_count()).map(|n| f(grid.position(n))).collect();
        Self { grid, time, values }
    }

    pub fn uniform(grid: GridSpec, time: f64, value: Vec6) -> Self {
        Self {
            grid,
            time,
            values: vec![value; grid.node_count()],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.iter().all(|x| x.is_finite()))
    }

    pub fn component(&self, c: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[c]).collect()
    }

    pub fn electric(&self) -> Vec<[f64; 3]> {
        self.values.iter().map(|v| [v[0], v[1], v[2]]).collect()
    }

    pub fn magnetic(&self) -> Vec<[f64; 3]> {
        self.values.iter().map(|v| [v[3], v[4], v[5]]).collect()
    }

    pub fn same_shape(&self, other: &FieldState) -> Result<()> {
        if self.grid != other.grid {
            return Err(QmxError::ShapeMismatch("states live on different grids".into()));
        }
        Ok(())
    }

    pub fn difference(&self, other: &FieldState) -> Result<FieldState> {
        self.same_shape(other)?;
        Ok(FieldState {
            grid: self.grid,
            time: self.time,
            values: sub_fields(&self.values, &other.values),
        })
    }
}

/// Tangential trace data on the conducting face, one 3-vector per face node.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryTrace {
    pub grid: GridSpec,
    pub time: f64,
    pub values: Vec<[f64; 3]>,
}

impl BoundaryTrace {
    pub fn zeros(grid: GridSpec, time: f64) -> Self {
        Self {
            grid,
            time,
            values: vec![[0.0; 3]; grid.face_node_count()],
        }
    }

    pub fn new(grid: GridSpec, time: f64, values: Vec<[f64; 3]>) -> Result<Self> {
        if values.len() != grid.face_node_count() {
            return Err(QmxError::ShapeMismatch(format!(
                "{} trace values for {} face nodes",
                values.len(),
                grid.face_node_count()
            )));
        }
        Ok(Self { grid, time, values })
    }

    pub fn l2_norm(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(n, v)| self.grid.face_weight(n) * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]))
            .sum::<f64>()
            .sqrt()
    }
}

pub(crate) fn sub_fields(a: &[Vec6], b: &[Vec6]) -> Vec<Vec6> {
    a.iter()
        .zip(b)
        .map(|(x, y)| std::array::from_fn(|c| x[c] - y[c]))
        .collect()
}

pub(crate) fn axpy_fields(y: &mut [Vec6], alpha: f64, x: &[Vec6]) {
    for (yv, xv) in y.iter_mut().zip(x) {
        for c in 0..6 {
            yv[c] += alpha * xv[c];
        }
    }
}

/// Evaluates `f` at every index in `0..n`, over worker threads when the
/// `parallel` feature is on.
pub(crate) fn map_nodes<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Send + Sync,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}
