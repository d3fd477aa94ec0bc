use std::fmt;
use std::sync::Arc;

use nalgebra::{Cholesky, SymmetricEigen, Vector6, U6};

use crate::error::{QmxError, Result};
use crate::grid::{Trajectory, Vec6};
use crate::initial_data::JetExtension;
use crate::material::{Mat6, MaterialLaw};

/// A time-dependent field `u_hat(t)` supplying frozen coefficients.
pub trait CoefficientField: Send + Sync + fmt::Debug {
    fn values_at(&self, t: f64) -> Vec<Vec6>;
}

impl CoefficientField for JetExtension {
    fn values_at(&self, t: f64) -> Vec<Vec6> {
        self.eval(t)
    }
}

/// Time-independent field.
#[derive(Clone, Debug, PartialEq)]
pub struct StaticField(pub Vec<Vec6>);

impl CoefficientField for StaticField {
    fn values_at(&self, _t: f64) -> Vec<Vec6> {
        self.0.clone()
    }
}

/// Piecewise cubic Hermite interpolation of stored states and rates; held
/// constant outside the stored time range.
#[derive(Clone, Debug, PartialEq)]
pub struct HermiteField {
    times: Vec<f64>,
    states: Vec<Vec<Vec6>>,
    rates: Vec<Vec<Vec6>>,
}

impl HermiteField {
    pub fn from_trajectory(tr: &Trajectory) -> Result<Self> {
        if tr.is_empty() {
            return Err(QmxError::InsufficientTimeResolution("empty trajectory".into()));
        }
        let mut rates = Vec::with_capacity(tr.len());
        for l in &tr.levels {
            rates.push(
                l.rate
                    .clone()
                    .ok_or_else(|| QmxError::InsufficientTimeResolution("trajectory without rates".into()))?,
            );
        }
        Ok(Self {
            times: tr.times(),
            states: tr.levels.iter().map(|l| l.state.values.clone()).collect(),
            rates,
        })
    }
}

impl CoefficientField for HermiteField {
    fn values_at(&self, t: f64) -> Vec<Vec6> {
        let n = self.times.len();
        let tol = 1e-12 * (1.0 + t.abs());
        if n == 1 || t <= self.times[0] + tol {
            return self.states[0].clone();
        }
        if t >= self.times[n - 1] - tol {
            return self.states[n - 1].clone();
        }
        let i = self.times.partition_point(|&s| s <= t) - 1;
        if (t - self.times[i]).abs() <= tol {
            return self.states[i].clone();
        }
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        let (a, b) = (&self.states[i], &self.states[i + 1]);
        let (da, db) = (&self.rates[i], &self.rates[i + 1]);
        (0..a.len())
            .map(|k| std::array::from_fn(|c| h00 * a[k][c] + h10 * h * da[k][c] + h01 * b[k][c] + h11 * h * db[k][c]))
            .collect()
    }
}

/// Coefficients `A0 = chi(u_hat)`, `D = sigma(u_hat)` of the linear problem.
#[derive(Clone, Debug)]
pub enum FrozenCoefficients {
    /// The same matrices at every node and time.
    Uniform { a0: Mat6, d: Mat6 },
    /// A law evaluated along a frozen field.
    Law {
        law: Arc<dyn MaterialLaw>,
        field: Arc<dyn CoefficientField>,
    },
}

impl FrozenCoefficients {
    pub fn identity() -> Self {
        FrozenCoefficients::Uniform {
            a0: Mat6::identity(),
            d: Mat6::zeros(),
        }
    }

    pub fn eta_floor(&self) -> f64 {
        match self {
            FrozenCoefficients::Uniform { a0, .. } => SymmetricEigen::new(*a0).eigenvalues.min(),
            FrozenCoefficients::Law { law, .. } => law.eta(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let FrozenCoefficients::Uniform { a0, .. } = self {
            if (a0 - a0.transpose()).norm() > 1e-10 * a0.norm() {
                return Err(QmxError::MaterialDefect("A0 is not symmetric".into()));
            }
            if !(self.eta_floor() > 0.0) {
                return Err(QmxError::MaterialDefect("A0 is not positive definite".into()));
            }
        }
        Ok(())
    }

    pub(crate) fn snapshot(&self, t: f64) -> Result<CoefficientSnapshot<'_>> {
        Ok(match self {
            FrozenCoefficients::Uniform { a0, d } => CoefficientSnapshot::Uniform {
                chol: Cholesky::new(*a0).ok_or_else(|| QmxError::MaterialDefect("A0 is singular".into()))?,
                a0: *a0,
                d: *d,
            },
            FrozenCoefficients::Law { law, field } => CoefficientSnapshot::Law {
                law: law.as_ref(),
                values: field.values_at(t),
            },
        })
    }
}

pub(crate) enum CoefficientSnapshot<'a> {
    Uniform { chol: Cholesky<f64, U6>, a0: Mat6, d: Mat6 },
    Law { law: &'a dyn MaterialLaw, values: Vec<Vec6> },
}

impl CoefficientSnapshot<'_> {
    #[inline]
    pub fn damping(&self, n: usize, x: [f64; 3], u: &Vec6) -> Vec6 {
        match self {
            CoefficientSnapshot::Uniform { d, .. } => {
                let v = d * Vector6::from_column_slice(u);
                std::array::from_fn(|i| v[i])
            }
            CoefficientSnapshot::Law { law, values } => law.sigma_apply(x, &values[n], u),
        }
    }

    #[inline]
    pub fn solve(&self, n: usize, x: [f64; 3], rhs: &Vec6) -> Result<Vec6> {
        match self {
            CoefficientSnapshot::Uniform { chol, .. } => {
                let v = chol.solve(&Vector6::from_column_slice(rhs));
                Ok(std::array::from_fn(|i| v[i]))
            }
            CoefficientSnapshot::Law { law, values } => law.chi_solve(x, &values[n], rhs),
        }
    }

    /// `u^T A0 u` at node `n`.
    #[inline]
    pub fn energy_density(&self, n: usize, x: [f64; 3], u: &Vec6) -> f64 {
        let a0u = match self {
            CoefficientSnapshot::Uniform { a0, .. } => {
                let v = a0 * Vector6::from_column_slice(u);
                std::array::from_fn(|i| v[i])
            }
            CoefficientSnapshot::Law { law, values } => law.theta_derivative(x, &values[n], [0; 3], &[*u]),
        };
        (0..6).map(|c| a0u[c] * u[c]).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{BoundaryMode, FieldState, GridSpec};

    #[test]
    fn hermite_is_exact_on_cubics() {
        let g = GridSpec::cube(3, 1.0, [BoundaryMode::Periodic; 3]).unwrap();
        let f = |t: f64| t * t * t - 2.0 * t;
        let df = |t: f64| 3.0 * t * t - 2.0;
        let mut tr = Trajectory::new();
        for n in 0..4 {
            let t = 0.3 * n as f64;
            tr.push(
                FieldState::uniform(g, t, [f(t), 0.0, 0.0, 0.0, 0.0, 1.0]),
                Some(vec![[df(t), 0.0, 0.0, 0.0, 0.0, 0.0]; g.node_count()]),
            );
        }
        let h = HermiteField::from_trajectory(&tr).unwrap();
        for t in [0.0, 0.1, 0.45, 0.6, 0.89] {
            assert!((h.values_at(t)[0][0] - f(t)).abs() < 1e-13);
        }
        assert!((h.values_at(5.0)[0][0] - f(0.9)).abs() < 1e-14);
    }
}
