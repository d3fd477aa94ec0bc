use std::fmt;
use std::sync::Arc;

use crate::grid::{GridSpec, Vec6};

/// Interior source `f` with explicit time derivatives.
pub trait InteriorSource: Send + Sync + fmt::Debug {
    /// `d_t^j f(t)` at every node.
    fn time_derivative(&self, grid: &GridSpec, t: f64, j: usize) -> Vec<Vec6>;

    fn is_zero(&self) -> bool {
        false
    }
}

/// Boundary source `g` on the conducting face with explicit time derivatives.
pub trait BoundarySource: Send + Sync + fmt::Debug {
    /// `d_t^j g(t)` at every bottom-face node.
    fn time_derivative(&self, grid: &GridSpec, t: f64, j: usize) -> Vec<[f64; 3]>;

    fn is_zero(&self) -> bool {
        false
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ZeroSource;

impl InteriorSource for ZeroSource {
    fn time_derivative(&self, grid: &GridSpec, _t: f64, _j: usize) -> Vec<Vec6> {
        vec![[0.0; 6]; grid.node_count()]
    }

    fn is_zero(&self) -> bool {
        true
    }
}

impl BoundarySource for ZeroSource {
    fn time_derivative(&self, grid: &GridSpec, _t: f64, _j: usize) -> Vec<[f64; 3]> {
        vec![[0.0; 3]; grid.face_node_count()]
    }

    fn is_zero(&self) -> bool {
        true
    }
}

/// Source given pointwise by `f(j, t, x) = d_t^j f(t, x)`.
pub struct AnalyticSource<F> {
    label: String,
    f: F,
}

impl<F> AnalyticSource<F>
where
    F: Fn(usize, f64, [f64; 3]) -> Vec6 + Send + Sync,
{
    pub fn new(label: impl Into<String>, f: F) -> Self {
        Self { label: label.into(), f }
    }
}

impl<F> fmt::Debug for AnalyticSource<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AnalyticSource({})", self.label)
    }
}

impl<F> InteriorSource for AnalyticSource<F>
where
    F: Fn(usize, f64, [f64; 3]) -> Vec6 + Send + Sync,
{
    fn time_derivative(&self, grid: &GridSpec, t: f64, j: usize) -> Vec<Vec6> {
        (0..grid.node_count()).map(|n| (self.f)(j, t, grid.position(n))).collect()
    }
}

/// Boundary data given pointwise on the face by `g(j, t, x)`.
pub struct AnalyticTrace<F> {
    label: String,
    g: F,
}

impl<F> AnalyticTrace<F>
where
    F: Fn(usize, f64, [f64; 3]) -> [f64; 3] + Send + Sync,
{
    pub fn new(label: impl Into<String>, g: F) -> Self {
        Self { label: label.into(), g }
    }
}

impl<F> fmt::Debug for AnalyticTrace<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AnalyticTrace({})", self.label)
    }
}

impl<F> BoundarySource for AnalyticTrace<F>
where
    F: Fn(usize, f64, [f64; 3]) -> [f64; 3] + Send + Sync,
{
    fn time_derivative(&self, grid: &GridSpec, t: f64, j: usize) -> Vec<[f64; 3]> {
        (0..grid.face_node_count()).map(|n| (self.g)(j, t, grid.position(n))).collect()
    }
}

/// `base(t) + sum_p (t - t0)^p / p! c_p`, with face arrays `c_p`.
#[derive(Clone, Debug)]
pub struct TaylorTrace {
    pub t0: f64,
    pub base: Arc<dyn BoundarySource>,
    pub coeffs: Vec<Vec<[f64; 3]>>,
}

impl BoundarySource for TaylorTrace {
    fn time_derivative(&self, grid: &GridSpec, t: f64, j: usize) -> Vec<[f64; 3]> {
        let mut out = if self.base.is_zero() {
            vec![[0.0; 3]; grid.face_node_count()]
        } else {
            self.base.time_derivative(grid, t, j)
        };
        let s = t - self.t0;
        for (p, c) in self.coeffs.iter().enumerate().skip(j) {
            // d_t^j of s^p / p! is s^(p-j) / (p-j)!
            let w = taylor_weight(s, p - j);
            if w == 0.0 {
                continue;
            }
            for (o, v) in out.iter_mut().zip(c) {
                for k in 0..3 {
                    o[k] += w * v[k];
                }
            }
        }
        out
    }
}

/// `s^k / k!`.
pub fn taylor_weight(s: f64, k: usize) -> f64 {
    let mut w = 1.0;
    for i in 1..=k {
        w *= s / i as f64;
    }
    w
}

/// `scale * base`, used for linearity checks and perturbation sweeps.
#[derive(Clone, Debug)]
pub struct ScaledBoundary {
    pub scale: f64,
    pub base: Arc<dyn BoundarySource>,
}

impl BoundarySource for ScaledBoundary {
    fn time_derivative(&self, grid: &GridSpec, t: f64, j: usize) -> Vec<[f64; 3]> {
        self.base
            .time_derivative(grid, t, j)
            .into_iter()
            .map(|v| v.map(|x| self.scale * x))
            .collect()
    }

    fn is_zero(&self) -> bool {
        self.scale == 0.0 || self.base.is_zero()
    }
}

#[derive(Clone, Debug)]
pub struct ScaledInterior {
    pub scale: f64,
    pub base: Arc<dyn InteriorSource>,
}

impl InteriorSource for ScaledInterior {
    fn time_derivative(&self, grid: &GridSpec, t: f64, j: usize) -> Vec<Vec6> {
        self.base
            .time_derivative(grid, t, j)
            .into_iter()
            .map(|v| v.map(|x| self.scale * x))
            .collect()
    }

    fn is_zero(&self) -> bool {
        self.scale == 0.0 || self.base.is_zero()
    }
}
