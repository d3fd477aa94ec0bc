use super::norms::sobolev_norm_values;
use super::{sub_fields, FieldState, GridSpec, Vec6};
use crate::error::{QmxError, Result};

/// One stored time level: the state and, when the stepper produced it, the
/// exact semi-discrete time derivative at that level.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeLevel {
    pub state: FieldState,
    pub rate: Option<Vec<Vec6>>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub levels: Vec<TimeLevel>,
}

impl Trajectory {
    pub fn new() -> Self {
        Self { levels: Vec::new() }
    }

    pub fn push(&mut self, state: FieldState, rate: Option<Vec<Vec6>>) {
        self.levels.push(TimeLevel { state, rate });
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.state.time).collect()
    }

    pub fn grid(&self) -> Option<GridSpec> {
        self.levels.first().map(|l| l.state.grid)
    }

    pub fn last_state(&self) -> Option<&FieldState> {
        self.levels.last().map(|l| &l.state)
    }

    /// Appends `other`, skipping its first level when it repeats our last time.
    pub fn extend_from(&mut self, other: Trajectory) {
        let mut it = other.levels.into_iter().peekable();
        if let (Some(last), Some(first)) = (self.levels.last(), it.peek()) {
            if (last.state.time - first.state.time).abs() <= 1e-12 * (1.0 + last.state.time.abs()) {
                let first = it.next().unwrap();
                // keep the freshly computed rate at the junction
                if let Some(l) = self.levels.last_mut() {
                    if first.rate.is_some() {
                        l.rate = first.rate;
                    }
                }
            }
        }
        self.levels.extend(it);
    }

    /// Level-wise difference `self - other` (states and rates).
    pub fn difference(&self, other: &Trajectory) -> Result<Trajectory> {
        if self.len() != other.len() {
            return Err(QmxError::ShapeMismatch(format!(
                "trajectories with {} and {} levels",
                self.len(),
                other.len()
            )));
        }
        let mut out = Trajectory::new();
        for (a, b) in self.levels.iter().zip(&other.levels) {
            let state = a.state.difference(&b.state)?;
            let rate = match (&a.rate, &b.rate) {
                (Some(x), Some(y)) => Some(sub_fields(x, y)),
                _ => None,
            };
            out.push(state, rate);
        }
        Ok(out)
    }

    /// `d_t^order u` at level `n`: the stored rate for order one, otherwise
    /// finite differences in time of rates (preferred) or states.
    pub fn time_derivative(&self, n: usize, order: usize) -> Result<Vec<Vec6>> {
        if order == 0 {
            return Ok(self.levels[n].state.values.clone());
        }
        let have_rates = self.levels.iter().all(|l| l.rate.is_some());
        if order == 1 {
            if let Some(r) = &self.levels[n].rate {
                return Ok(r.clone());
            }
        }
        let (fd_order, use_rates) = if have_rates { (order - 1, true) } else { (order, false) };
        if self.len() < fd_order + 1 {
            return Err(QmxError::InsufficientTimeResolution(format!(
                "{} levels cannot resolve d_t^{order}",
                self.len()
            )));
        }
        let points = (fd_order + 2).min(self.len());
        let start = n.saturating_sub(points / 2).min(self.len() - points);
        let times: Vec<f64> = (start..start + points).map(|i| self.levels[i].state.time).collect();
        let w = fd_weights(self.levels[n].state.time, &times, fd_order);
        let nodes = self.levels[n].state.values.len();
        let mut out = vec![[0.0; 6]; nodes];
        for (p, wp) in w.iter().enumerate() {
            let lvl = &self.levels[start + p];
            let src = if use_rates {
                lvl.rate.as_ref().unwrap()
            } else {
                &lvl.state.values
            };
            super::axpy_fields(&mut out, *wp, src);
        }
        Ok(out)
    }
}

/// Finite-difference weights for the `order`-th derivative at `x0` from
/// samples at `xs` (Fornberg's recursion).
pub fn fd_weights(x0: f64, xs: &[f64], order: usize) -> Vec<f64> {
    let n = xs.len();
    let mut c = vec![vec![0.0; order + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[order]).collect()
}

/// Discrete `G_{m,gamma}` norm:
/// `max_{j <= m} sup_t e^{-gamma t} ||d_t^j u(t)||_{H^{m-j}}`.
pub fn gm_norm(trajectory: &Trajectory, m: usize, gamma: f64) -> Result<f64> {
    let grid = trajectory
        .grid()
        .ok_or_else(|| QmxError::InsufficientTimeResolution("empty trajectory".into()))?;
    let have_rates = trajectory.levels.iter().all(|l| l.rate.is_some());
    let needed = if have_rates { m.max(1) } else { m + 1 };
    if m > 0 && trajectory.len() < needed {
        return Err(QmxError::InsufficientTimeResolution(format!(
            "{} levels for G_{m}",
            trajectory.len()
        )));
    }
    let mut best = 0.0f64;
    for j in 0..=m {
        for n in 0..trajectory.len() {
            let t = trajectory.levels[n].state.time;
            let d = trajectory.time_derivative(n, j)?;
            let v = (-gamma * t).exp() * sobolev_norm_values(&grid, &d, m - j)?;
            if !v.is_finite() {
                return Ok(f64::INFINITY);
            }
            best = best.max(v);
        }
    }
    Ok(best)
}
