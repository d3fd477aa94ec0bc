use super::{taylor_weight, InitialJet};
use crate::grid::{FieldState, GridSpec, Trajectory, Vec6};

/// Smooth step equal to 1 for `s <= horizon / 2` and 0 for `s >= horizon`,
/// together with its derivative in `s`.
pub fn smooth_cutoff(s: f64, horizon: f64) -> (f64, f64) {
    let half = 0.5 * horizon;
    if s <= half {
        return (1.0, 0.0);
    }
    if s >= horizon {
        return (0.0, 0.0);
    }
    // r runs from 1 at s = horizon/2 down to 0 at s = horizon
    let r = (horizon - s) / half;
    let a = (-1.0 / r).exp();
    let b = (-1.0 / (1.0 - r)).exp();
    let psi = a / (a + b);
    let da = a / (r * r);
    let db = -b / ((1.0 - r) * (1.0 - r));
    let dpsi = (da * b - a * db) / ((a + b) * (a + b));
    (psi, -dpsi / half)
}

/// `u(t) = S_0 + phi(t - t0) sum_{p >= 1} (t - t0)^p / p! S_p` with the smooth
/// cutoff `phi`, so every time derivative at `t0` reproduces the jet.
#[derive(Clone, Debug, PartialEq)]
pub struct JetExtension {
    pub grid: GridSpec,
    pub t0: f64,
    pub horizon: f64,
    pub entries: Vec<Vec<Vec6>>,
}

pub fn jet_realizing_extension(jet: &InitialJet, horizon: f64) -> JetExtension {
    JetExtension {
        grid: jet.entries[0].grid,
        t0: jet.t0(),
        horizon,
        entries: jet.entries.iter().map(|s| s.values.clone()).collect(),
    }
}

impl JetExtension {
    fn polynomial(&self, s: f64, derivative: usize) -> Vec<Vec6> {
        let mut out = vec![[0.0; 6]; self.grid.node_count()];
        for (p, e) in self.entries.iter().enumerate().skip(derivative.max(1)) {
            let w = taylor_weight(s, p - derivative);
            for (o, v) in out.iter_mut().zip(e) {
                for c in 0..6 {
                    o[c] += w * v[c];
                }
            }
        }
        out
    }

    pub fn eval(&self, t: f64) -> Vec<Vec6> {
        let s = t - self.t0;
        let (phi, _) = smooth_cutoff(s, self.horizon);
        let mut out = self.entries[0].clone();
        if phi != 0.0 {
            for (o, v) in out.iter_mut().zip(self.polynomial(s, 0)) {
                for c in 0..6 {
                    o[c] += phi * v[c];
                }
            }
        }
        out
    }

    pub fn rate(&self, t: f64) -> Vec<Vec6> {
        let s = t - self.t0;
        let (phi, dphi) = smooth_cutoff(s, self.horizon);
        let mut out = vec![[0.0; 6]; self.grid.node_count()];
        if phi != 0.0 {
            for (o, v) in out.iter_mut().zip(self.polynomial(s, 1)) {
                for c in 0..6 {
                    o[c] += phi * v[c];
                }
            }
        }
        if dphi != 0.0 {
            for (o, v) in out.iter_mut().zip(self.polynomial(s, 0)) {
                for c in 0..6 {
                    o[c] += dphi * v[c];
                }
            }
        }
        out
    }

    pub fn state(&self, t: f64) -> FieldState {
        FieldState {
            grid: self.grid,
            time: t,
            values: self.eval(t),
        }
    }

    /// Samples states and exact rates at the given times.
    pub fn sample(&self, times: &[f64]) -> Trajectory {
        let mut tr = Trajectory::new();
        for &t in times {
            tr.push(self.state(t), Some(self.rate(t)));
        }
        tr
    }
}
