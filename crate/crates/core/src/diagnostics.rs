//! Empirical checks on computed trajectories: divergence constraints and
//! charge bookkeeping, propagation cones, and continuous dependence on the
//! initial data.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{QmxError, Result};
use crate::grid::{discrete_div, gm_norm, l2_norm_scalar, sobolev_norm, FieldState, Trajectory, Vec6};
use crate::initial_data::{compatible_boundary, DataBundle};
use crate::linear::StepperConfig;
use crate::material::MaterialLaw;
use crate::picard::{continue_maximal, PicardConfig, SolveStatus};

/// `(1 / eta) sum_j ||A_j||` with `||A_j|| = 1` for the constant flux matrices.
pub fn propagation_speed_bound(eta: f64) -> f64 {
    3.0 / eta
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConeDirection {
    /// `|x - x0| < R - C0 (t - t0)`: the solution must vanish inside.
    Backward,
    /// `|x - x0| <= R + C0 (t - t0)`: the solution must vanish outside.
    Forward,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConeSpec {
    pub center: [f64; 3],
    pub radius: f64,
    pub speed: f64,
    pub direction: ConeDirection,
}

impl ConeSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.speed > 0.0) {
            return Err(QmxError::Config {
                path: "diagnostics.cone".into(),
                message: format!("radius and speed must be positive, got {} and {}", self.radius, self.speed),
            });
        }
        Ok(())
    }

    /// Cone radius after time `s` from the apex time.
    pub fn radius_at(&self, s: f64) -> f64 {
        match self.direction {
            ConeDirection::Backward => self.radius - self.speed * s,
            ConeDirection::Forward => self.radius + self.speed * s,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConeReport {
    pub times: Vec<f64>,
    /// Max `|u|` over the checked nodes per level.
    pub violations: Vec<f64>,
    pub max_violation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl ConeReport {
    pub fn csv(&self) -> String {
        let mut s = String::from("t,violation\n");
        for (t, v) in self.times.iter().zip(&self.violations) {
            let _ = writeln!(s, "{t:.12e},{v:.12e}");
        }
        s
    }
}

fn node_magnitude(v: &Vec6) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// Max `|u|` over nodes that lie strictly on the checked side of the cone at
/// time `s` after the apex time, with a one-cell margin.
fn cone_violation(state: &FieldState, cone: &ConeSpec, s: f64) -> f64 {
    let g = &state.grid;
    let margin = g.spacing().iter().copied().fold(0.0, f64::max);
    let r = cone.radius_at(s);
    let mut worst = 0.0f64;
    for (n, v) in state.values.iter().enumerate() {
        let d = g.distance(g.position(n), cone.center);
        let checked = match cone.direction {
            ConeDirection::Backward => d < r - margin,
            ConeDirection::Forward => d > r + margin,
        };
        if checked {
            worst = worst.max(node_magnitude(v));
        }
    }
    worst
}

/// Checks that a forward cone stays clear of absorbing faces and does not
/// wrap around periodic axes up to time `s`.
fn cone_fits(grid: &crate::grid::GridSpec, cone: &ConeSpec, s: f64) -> Result<()> {
    if cone.direction == ConeDirection::Backward {
        return Ok(());
    }
    let margin = grid.spacing().iter().copied().fold(0.0, f64::max);
    let r = cone.radius_at(s) + margin;
    if grid.distance_to_artificial_faces(cone.center) < r {
        return Err(QmxError::ConeLeavesGrid(format!(
            "radius {r:.4} reaches an absorbing face"
        )));
    }
    for a in 0..3 {
        if grid.is_periodic(a) && 2.0 * r >= grid.extent(a) {
            return Err(QmxError::ConeLeavesGrid(format!(
                "radius {r:.4} wraps around periodic axis {}",
                a + 1
            )));
        }
    }
    Ok(())
}

/// Measures `max |u|` inside a backward cone or outside a forward cone at
/// every level of the trajectory, with the apex at the first level's time.
pub fn cone_support_check(trajectory: &Trajectory, cone: &ConeSpec, tolerance: f64) -> Result<ConeReport> {
    cone.validate()?;
    let first = trajectory
        .levels
        .first()
        .ok_or_else(|| QmxError::InsufficientTimeResolution("empty trajectory".into()))?;
    let t0 = first.state.time;
    let t_last = trajectory.last_state().unwrap().time;
    cone_fits(&first.state.grid, cone, t_last - t0)?;
    let initial = cone_violation(&first.state, cone, 0.0);
    if initial > tolerance {
        return Err(QmxError::Config {
            path: "diagnostics.cone".into(),
            message: format!("initial data violate the cone by {initial:e}"),
        });
    }
    let mut rep = ConeReport {
        times: Vec::with_capacity(trajectory.len()),
        violations: Vec::with_capacity(trajectory.len()),
        max_violation: 0.0,
        tolerance,
        pass: true,
    };
    for lvl in &trajectory.levels {
        let s = lvl.state.time - t0;
        let v = cone_violation(&lvl.state, cone, s);
        rep.times.push(lvl.state.time);
        rep.violations.push(v);
        rep.max_violation = rep.max_violation.max(v);
    }
    rep.pass = rep.max_violation <= tolerance;
    Ok(rep)
}

/// Largest distance from `center` of a node with `|u| > level`.
pub fn support_radius(state: &FieldState, center: [f64; 3], level: f64) -> f64 {
    let g = &state.grid;
    state
        .values
        .iter()
        .enumerate()
        .filter(|(_, v)| node_magnitude(v) > level)
        .map(|(n, _)| g.distance(g.position(n), center))
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct DivergenceReport {
    pub times: Vec<f64>,
    pub div_b_l2: Vec<f64>,
    pub div_b_max: Vec<f64>,
    /// `div D - rho`.
    pub charge_l2: Vec<f64>,
    pub charge_max: Vec<f64>,
    /// `(last - first) / (t_last - t_first)` of the L2 series.
    pub div_b_drift_rate: f64,
    pub charge_drift_rate: f64,
}

impl DivergenceReport {
    pub fn csv(&self) -> String {
        let mut s = String::from("t,div_b_l2,div_b_max,charge_l2,charge_max\n");
        for i in 0..self.times.len() {
            let _ = writeln!(
                s,
                "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
                self.times[i], self.div_b_l2[i], self.div_b_max[i], self.charge_l2[i], self.charge_max[i]
            );
        }
        s
    }

    /// Largest L2 value of each residual over the run, `(div B, div D - rho)`.
    pub fn peak_l2(&self) -> (f64, f64) {
        (
            self.div_b_l2.iter().copied().fold(0.0, f64::max),
            self.charge_l2.iter().copied().fold(0.0, f64::max),
        )
    }
}

struct Constraints {
    div_d: Vec<f64>,
    div_b: Vec<f64>,
    div_j: Vec<f64>,
}

fn constraints(law: &dyn MaterialLaw, bundle: &DataBundle, state: &FieldState) -> Result<Constraints> {
    let g = &state.grid;
    let f = if bundle.f.is_zero() {
        None
    } else {
        Some(bundle.f.time_derivative(g, state.time, 0))
    };
    let n = g.node_count();
    let mut d = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    let mut j = Vec::with_capacity(n);
    for (k, u) in state.values.iter().enumerate() {
        let x = g.position(k);
        let th = law.theta(x, u);
        d.push([th[0], th[1], th[2]]);
        b.push([th[3], th[4], th[5]]);
        let su = law.sigma_apply(x, u, u);
        let fe = f.as_ref().map_or([0.0; 6], |f| f[k]);
        j.push([su[0] - fe[0], su[1] - fe[1], su[2] - fe[2]]);
    }
    Ok(Constraints {
        div_d: discrete_div(g, &d)?,
        div_b: discrete_div(g, &b)?,
        div_j: discrete_div(g, &j)?,
    })
}

/// Tracks `div B` and `div D - rho` along the trajectory, with
/// `rho(t) = rho(t0) - int_{t0}^t div J` by the trapezoid rule over the
/// stored levels and `J = sigma(u) u - f_E`.
pub fn divergence_check(law: &dyn MaterialLaw, trajectory: &Trajectory, bundle: &DataBundle) -> Result<DivergenceReport> {
    let grid = trajectory
        .grid()
        .ok_or_else(|| QmxError::InsufficientTimeResolution("empty trajectory".into()))?;
    let mut rho = bundle.rho0_values(law)?;
    let mut rep = DivergenceReport::default();
    let mut prev: Option<(f64, Vec<f64>)> = None;
    for lvl in &trajectory.levels {
        let s = &lvl.state;
        let c = constraints(law, bundle, s)?;
        if let Some((tp, jp)) = &prev {
            let dt = s.time - tp;
            for ((r, a), b) in rho.iter_mut().zip(jp).zip(&c.div_j) {
                *r -= 0.5 * dt * (a + b);
            }
        }
        let charge: Vec<f64> = c.div_d.iter().zip(&rho).map(|(d, r)| d - r).collect();
        rep.times.push(s.time);
        rep.div_b_l2.push(l2_norm_scalar(&grid, &c.div_b));
        rep.div_b_max.push(c.div_b.iter().fold(0.0, |m, v| m.max(v.abs())));
        rep.charge_l2.push(l2_norm_scalar(&grid, &charge));
        rep.charge_max.push(charge.iter().fold(0.0, |m, v| m.max(v.abs())));
        prev = Some((s.time, c.div_j));
    }
    let n = rep.times.len();
    if n >= 2 {
        let span = rep.times[n - 1] - rep.times[0];
        if span > 0.0 {
            rep.div_b_drift_rate = (rep.div_b_l2[n - 1] - rep.div_b_l2[0]) / span;
            rep.charge_drift_rate = (rep.charge_l2[n - 1] - rep.charge_l2[0]) / span;
        }
    }
    Ok(rep)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContinuityRow {
    pub delta: f64,
    /// `||Psi(delta) - Psi(0)||_{G_{m-1}}`.
    pub difference: f64,
    /// `difference / (delta ||v||_{H^m})`.
    pub ratio: f64,
    /// Same ratio in the `G_{m-1,1}` norm.
    pub weighted_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContinuityReport {
    pub rows: Vec<ContinuityRow>,
    pub direction_norm: f64,
    /// `max ratio / min ratio - 1` over the nonzero deltas.
    pub spread: f64,
}

impl ContinuityReport {
    pub fn csv(&self) -> String {
        let mut s = String::from("delta,difference,ratio,weighted_ratio\n");
        for r in &self.rows {
            let _ = writeln!(s, "{:.6e},{:.12e},{:.12e},{:.12e}", r.delta, r.difference, r.ratio, r.weighted_ratio);
        }
        s
    }

    /// `ratio(delta_i) / ratio(delta_{i+1})` for consecutive rows.
    pub fn consecutive_ratios(&self) -> Vec<f64> {
        self.rows
            .windows(2)
            .filter(|w| w[0].delta > 0.0 && w[1].delta > 0.0)
            .map(|w| w[0].ratio / w[1].ratio)
            .collect()
    }
}

fn perturbed(bundle: &DataBundle, direction: &[Vec6], delta: f64) -> DataBundle {
    let mut u0 = bundle.u0.clone();
    for (u, v) in u0.values.iter_mut().zip(direction) {
        for c in 0..6 {
            u[c] += delta * v[c];
        }
    }
    DataBundle {
        u0,
        ..bundle.clone()
    }
}

/// Solves from `u0 + delta v` for each delta, with the boundary data
/// corrected so the perturbed data stay compatible, and compares with the
/// unperturbed flow.
#[allow(clippy::too_many_arguments)]
pub fn continuous_dependence_experiment(
    law: &Arc<dyn MaterialLaw>,
    bundle: &DataBundle,
    m: usize,
    direction: &[Vec6],
    deltas: &[f64],
    cfg: &PicardConfig,
    stepper: &StepperConfig,
    horizon: f64,
) -> Result<ContinuityReport> {
    let grid = bundle.u0.grid;
    if direction.len() != grid.node_count() {
        return Err(QmxError::ShapeMismatch("perturbation does not match the grid".into()));
    }
    let k = m.saturating_sub(1);
    let vnorm = sobolev_norm(&FieldState::new(grid, bundle.t0, direction.to_vec())?, m.min(3))?;
    if vnorm == 0.0 {
        return Err(QmxError::ExperimentAborted("zero perturbation direction".into()));
    }
    let solve = |b: &DataBundle| -> Result<Trajectory> {
        let out = continue_maximal(law, b, m, cfg, stepper, horizon)?;
        match out.status {
            SolveStatus::HorizonReached | SolveStatus::Converged => Ok(out.trajectory),
            s => Err(QmxError::ExperimentAborted(format!(
                "run ended early with status {} at t = {}",
                s.name(),
                out.trajectory.last_state().map_or(b.t0, |u| u.time)
            ))),
        }
    };
    let base = solve(bundle)?;
    let mut rows = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        if delta == 0.0 {
            rows.push(ContinuityRow {
                delta,
                difference: 0.0,
                ratio: 0.0,
                weighted_ratio: 0.0,
            });
            continue;
        }
        let b = compatible_boundary(law.as_ref(), &perturbed(bundle, direction, delta), m)?;
        let tr = solve(&b)?;
        let diff = tr.difference(&base)?;
        let difference = gm_norm(&diff, k, 0.0)?;
        let weighted = gm_norm(&diff, k, 1.0)?;
        let scale = delta.abs() * vnorm;
        rows.push(ContinuityRow {
            delta,
            difference,
            ratio: difference / scale,
            weighted_ratio: weighted / scale,
        });
    }
    let ratios: Vec<f64> = rows.iter().filter(|r| r.delta != 0.0).map(|r| r.ratio).collect();
    let spread = if ratios.is_empty() {
        0.0
    } else {
        let hi = ratios.iter().copied().fold(f64::MIN, f64::max);
        let lo = ratios.iter().copied().fold(f64::MAX, f64::min);
        hi / lo - 1.0
    };
    Ok(ContinuityReport {
        rows,
        direction_norm: vnorm,
        spread,
    })
}
