use std::collections::BTreeMap;

use super::stencil::{partial_with, Closure};
use super::{FieldState, GridSpec, Trajectory, Vec6};
use crate::error::{QmxError, Result};

fn weighted_sq<const N: usize>(field: &[[f64; N]], w: &[f64]) -> f64 {
    field
        .iter()
        .zip(w)
        .map(|(v, &wi)| wi * v.iter().map(|x| x * x).sum::<f64>())
        .sum()
}

/// Discrete `L^2` norm with trapezoid cell-volume weights.
pub fn l2_norm<const N: usize>(grid: &GridSpec, field: &[[f64; N]]) -> f64 {
    weighted_sq(field, &grid.node_weights()).sqrt()
}

pub fn l2_norm_scalar(grid: &GridSpec, field: &[f64]) -> f64 {
    field
        .iter()
        .enumerate()
        .map(|(n, x)| grid.node_weight(n) * x * x)
        .sum::<f64>()
        .sqrt()
}

pub fn max_norm<const N: usize>(field: &[[f64; N]]) -> f64 {
    let mut m = 0.0f64;
    for v in field {
        for &x in v {
            if !x.is_finite() {
                return f64::INFINITY;
            }
            m = m.max(x.abs());
        }
    }
    m
}

fn accumulate_derivatives(
    grid: &GridSpec,
    field: &[Vec6],
    first_axis: usize,
    depth: usize,
    w: &[f64],
    total: &mut f64,
) -> Result<()> {
    for a in first_axis..3 {
        let d = partial_with(grid, field, a, Closure::SecondOrder)?;
        *total += weighted_sq(&d, w);
        if depth > 1 {
            accumulate_derivatives(grid, &d, a, depth - 1, w, total)?;
        }
    }
    Ok(())
}

/// Discrete `H^k` norm of raw node values: root of the weighted sum of squares
/// of every spatial derivative `d^beta`, `|beta| <= k`, each multi-index once.
pub(crate) fn sobolev_norm_values(grid: &GridSpec, values: &[Vec6], k: usize) -> Result<f64> {
    if k > 3 {
        return Err(QmxError::UnsupportedOrder(k));
    }
    let w = grid.node_weights();
    let mut total = weighted_sq(values, &w);
    if k > 0 {
        accumulate_derivatives(grid, values, 0, k, &w, &mut total)?;
    }
    Ok(total.sqrt())
}

/// Discrete surrogate of the `H^k(G)` norm for `k <= 3`.
pub fn sobolev_norm(state: &FieldState, k: usize) -> Result<f64> {
    sobolev_norm_values(&state.grid, &state.values, k)
}

pub(crate) fn lipschitz_values(grid: &GridSpec, values: &[Vec6]) -> Result<f64> {
    let mut m = max_norm(values);
    if !m.is_finite() {
        return Ok(f64::INFINITY);
    }
    for a in 0..3 {
        let d = partial_with(grid, values, a, Closure::SecondOrder)?;
        m = m.max(max_norm(&d));
    }
    Ok(m)
}

/// Discrete `W^{1,inf}` norm: largest node value or first partial of any component.
pub fn lipschitz_norm(state: &FieldState) -> Result<f64> {
    lipschitz_values(&state.grid, &state.values)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct NormReport {
    pub sobolev_orders: BTreeMap<usize, f64>,
    pub lipschitz: f64,
    /// `(m, gamma, value)` triples.
    pub gm: Vec<(usize, f64, f64)>,
}

/// Collects Sobolev and Lipschitz norms of the final level and the requested
/// `G_{m,gamma}` norms of the whole trajectory.
pub fn norm_report(
    trajectory: &Trajectory,
    orders: &[usize],
    gm: &[(usize, f64)],
) -> Result<NormReport> {
    let last = trajectory
        .levels
        .last()
        .ok_or_else(|| QmxError::InsufficientTimeResolution("empty trajectory".into()))?;
    let mut report = NormReport {
        lipschitz: lipschitz_norm(&last.state)?,
        ..Default::default()
    };
    for &k in orders {
        report.sobolev_orders.insert(k, sobolev_norm(&last.state, k)?);
    }
    for &(m, gamma) in gm {
        report.gm.push((m, gamma, super::gm_norm(trajectory, m, gamma)?));
    }
    Ok(report)
}
