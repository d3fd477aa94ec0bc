//! Data bundles `(f, g, u0)`, the recursive initial jet `S_0, .., S_m` and
//! the compatibility checker.

mod extension;
mod sources;

pub use extension::{jet_realizing_extension, smooth_cutoff, JetExtension};
pub use sources::{
    taylor_weight, AnalyticSource, AnalyticTrace, BoundarySource, InteriorSource, ScaledBoundary, ScaledInterior,
    TaylorTrace, ZeroSource,
};

use std::sync::Arc;

use crate::calculus::{tensor_terms, MultiIndex};
use crate::error::{QmxError, Result};
use crate::grid::{apply_flux, discrete_div, map_nodes, Closure, FieldState, Vec6};
use crate::linear::build_boundary_operators;
use crate::material::{MaterialLaw, Mat6};

/// Initial charge density: given node values or `div D(u0)` computed on the grid.
#[derive(Clone, Debug, PartialEq)]
pub enum Rho0 {
    Derived,
    Given(Vec<f64>),
}

#[derive(Clone, Debug)]
pub struct DataBundle {
    pub t0: f64,
    pub f: Arc<dyn InteriorSource>,
    pub g: Arc<dyn BoundarySource>,
    pub u0: FieldState,
    pub rho0: Rho0,
}

impl DataBundle {
    pub fn new(u0: FieldState, f: Arc<dyn InteriorSource>, g: Arc<dyn BoundarySource>) -> Self {
        Self {
            t0: u0.time,
            f,
            g,
            u0,
            rho0: Rho0::Derived,
        }
    }

    /// `f = 0`, `g = 0`.
    pub fn homogeneous(u0: FieldState) -> Self {
        Self::new(u0, Arc::new(ZeroSource), Arc::new(ZeroSource))
    }

    /// Same sources, restarted from `u0` at `u0.time`.
    pub fn restarted(&self, u0: FieldState) -> Self {
        Self {
            t0: u0.time,
            f: self.f.clone(),
            g: self.g.clone(),
            u0,
            rho0: Rho0::Derived,
        }
    }

    pub fn validate(&self, law: &dyn MaterialLaw) -> Result<()> {
        if self.t0 != self.u0.time {
            return Err(QmxError::ShapeMismatch("t0 differs from the time of u0".into()));
        }
        if !self.u0.is_finite() {
            return Err(QmxError::NonFinite { t: self.t0 });
        }
        if let Some(n) = self.u0.values.iter().position(|y| !law.state_domain().contains(y)) {
            return Err(QmxError::StateDomainViolation(format!(
                "u0 at node {n} is {:?}",
                self.u0.values[n]
            )));
        }
        if let Rho0::Given(r) = &self.rho0 {
            if r.len() != self.u0.grid.node_count() {
                return Err(QmxError::ShapeMismatch("rho0 does not match the grid".into()));
            }
        }
        if !self.g.is_zero() && !self.u0.grid.has_pec_face() {
            return Err(QmxError::ShapeMismatch("boundary data given but the grid has no conducting face".into()));
        }
        Ok(())
    }

    /// `rho0` as node values.
    pub fn rho0_values(&self, law: &dyn MaterialLaw) -> Result<Vec<f64>> {
        match &self.rho0 {
            Rho0::Given(r) => Ok(r.clone()),
            Rho0::Derived => {
                let g = &self.u0.grid;
                let d: Vec<[f64; 3]> = (0..g.node_count())
                    .map(|n| {
                        let th = law.theta(g.position(n), &self.u0.values[n]);
                        [th[0], th[1], th[2]]
                    })
                    .collect();
                discrete_div(g, &d)
            }
        }
    }
}

/// `S_0, .., S_m` at `t0`.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialJet {
    pub entries: Vec<FieldState>,
    pub order: usize,
}

impl InitialJet {
    pub fn t0(&self) -> f64 {
        self.entries[0].time
    }
}

/// `M_1^l z`: the `l`-th time derivative of `chi(u)` at `t0` applied to `z`.
fn m1_apply(law: &dyn MaterialLaw, x: [f64; 3], prefix: &[&[Vec6]], n: usize, l: usize, z: &Vec6) -> Result<Vec6> {
    let u0 = &prefix[0][n];
    let mut acc = [0.0; 6];
    let mut dirs = Vec::with_capacity(l + 1);
    for t in tensor_terms(MultiIndex::time(l))?.iter() {
        dirs.clear();
        dirs.extend(t.gammas.iter().map(|g| prefix[g.0[0]][n]));
        dirs.push(*z);
        let d = law.theta_derivative(x, u0, [0; 3], &dirs);
        for c in 0..6 {
            acc[c] += t.coefficient as f64 * d[c];
        }
    }
    Ok(acc)
}

/// `M_2^l z`, with `M_2^0 = sigma(u0)`.
fn m2_apply(law: &dyn MaterialLaw, x: [f64; 3], prefix: &[&[Vec6]], n: usize, l: usize, z: &Vec6) -> Result<Vec6> {
    let u0 = &prefix[0][n];
    if l == 0 {
        return Ok(law.sigma_apply(x, u0, z));
    }
    let mut acc = [0.0; 6];
    let mut dirs = Vec::with_capacity(l);
    for t in tensor_terms(MultiIndex::time(l))?.iter() {
        dirs.clear();
        dirs.extend(t.gammas.iter().map(|g| prefix[g.0[0]][n]));
        let s = law.sigma_derivative(x, u0, &dirs);
        for r in 0..3 {
            for c in 0..3 {
                acc[r] += t.coefficient as f64 * s[(r, c)] * z[c];
            }
        }
    }
    Ok(acc)
}

/// `M_k^p` as a 6x6 matrix per node. Needs the jet through order `p`.
pub fn compute_mkp(law: &dyn MaterialLaw, jet_prefix: &[FieldState], k: usize, p: usize) -> Result<Vec<Mat6>> {
    if !(k == 1 || k == 2) {
        return Err(QmxError::InvalidMultiIndex(format!("k must be 1 or 2, got {k}")));
    }
    if k == 1 && p == 0 {
        return Err(QmxError::InvalidMultiIndex("M_1 starts at p = 1".into()));
    }
    if jet_prefix.len() < p + 1 {
        return Err(QmxError::IncompleteJet {
            needed: p,
            have: jet_prefix.len().saturating_sub(1),
        });
    }
    let grid = jet_prefix[0].grid;
    let prefix: Vec<&[Vec6]> = jet_prefix.iter().map(|s| s.values.as_slice()).collect();
    map_nodes(grid.node_count(), |n| {
        let x = grid.position(n);
        let mut m = Mat6::zeros();
        for c in 0..6 {
            let mut e = [0.0; 6];
            e[c] = 1.0;
            let col = if k == 1 {
                m1_apply(law, x, &prefix, n, p, &e)?
            } else {
                m2_apply(law, x, &prefix, n, p, &e)?
            };
            for r in 0..6 {
                m[(r, c)] = col[r];
            }
        }
        Ok(m)
    })
}

fn binomial(n: usize, k: usize) -> f64 {
    let mut b = 1.0;
    for i in 0..k {
        b = b * (n - i) as f64 / (i + 1) as f64;
    }
    b
}

/// Computes the initial jet `S_0 = u0`,
/// `S_p = chi(u0)^{-1} (d_t^{p-1} f - sum_j A_j d_j S_{p-1}
///        - sum_{l=1}^{p-1} C(p-1, l) M_1^l S_{p-l} - sum_{l=0}^{p-1} C(p-1, l) M_2^l S_{p-1-l})`
/// with grid derivatives for `d_j`.
pub fn compute_jet(law: &dyn MaterialLaw, bundle: &DataBundle, m: usize) -> Result<InitialJet> {
    if m > law.max_order() {
        return Err(QmxError::DerivativeOrder {
            requested: m,
            max: law.max_order(),
        });
    }
    bundle.validate(law)?;
    let grid = bundle.u0.grid;
    let t0 = bundle.t0;
    let mut entries = vec![bundle.u0.clone()];
    for p in 1..=m {
        let src = if bundle.f.is_zero() {
            None
        } else {
            Some(bundle.f.time_derivative(&grid, t0, p - 1))
        };
        let flux = apply_flux(&grid, &entries[p - 1].values, Closure::SecondOrder)?;
        let prefix: Vec<&[Vec6]> = entries.iter().map(|s| s.values.as_slice()).collect();
        let values = map_nodes(grid.node_count(), |n| {
            let x = grid.position(n);
            let mut rhs = [0.0; 6];
            for c in 0..6 {
                rhs[c] = src.as_ref().map_or(0.0, |s| s[n][c]) - flux[n][c];
            }
            for l in 1..p {
                let v = m1_apply(law, x, &prefix, n, l, &prefix[p - l][n])?;
                let b = binomial(p - 1, l);
                for c in 0..6 {
                    rhs[c] -= b * v[c];
                }
            }
            for l in 0..p {
                let v = m2_apply(law, x, &prefix, n, l, &prefix[p - 1 - l][n])?;
                let b = binomial(p - 1, l);
                for c in 0..6 {
                    rhs[c] -= b * v[c];
                }
            }
            law.chi_solve(x, &prefix[0][n], &rhs)
        })?;
        let s = FieldState::new(grid, t0, values)?;
        if !s.is_finite() {
            return Err(QmxError::NonFinite { t: t0 });
        }
        entries.push(s);
    }
    Ok(InitialJet { entries, order: m })
}

#[derive(Clone, Debug, PartialEq)]
pub struct OrderResidual {
    pub order: usize,
    pub l2: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompatibilityReport {
    pub per_order_residual: Vec<OrderResidual>,
    pub tolerance: f64,
    pub pass: bool,
}

impl CompatibilityReport {
    /// Aligned text table.
    pub fn table(&self) -> String {
        let mut s = String::from("order  l2_residual    max_residual\n");
        for r in &self.per_order_residual {
            s.push_str(&format!("{:>5}  {:<13.6e}  {:.6e}\n", r.order, r.l2, r.max));
        }
        s.push_str(&format!(
            "tolerance {:e}: {}\n",
            self.tolerance,
            if self.pass { "PASS" } else { "FAIL" }
        ));
        s
    }

    pub fn csv(&self) -> String {
        let mut s = String::from("order,l2_residual,max_residual\n");
        for r in &self.per_order_residual {
            s.push_str(&format!("{},{},{}\n", r.order, r.l2, r.max));
        }
        s
    }
}

pub const DEFAULT_COMPAT_TOLERANCE: f64 = 1e-10;

/// Face residuals `B S_p - d_t^p g(t0)` for `p = 0..m-1` from a computed jet.
pub fn compatibility_from_jet(bundle: &DataBundle, jet: &InitialJet, m: usize, tolerance: f64) -> Result<CompatibilityReport> {
    let grid = bundle.u0.grid;
    let mut per = Vec::new();
    if let Some(nu) = grid.pec_normal() {
        let ops = build_boundary_operators(nu)?;
        if jet.entries.len() < m {
            return Err(QmxError::IncompleteJet {
                needed: m.saturating_sub(1),
                have: jet.entries.len().saturating_sub(1),
            });
        }
        for p in 0..m {
            let g = bundle.g.time_derivative(&grid, bundle.t0, p);
            let mut l2 = 0.0;
            let mut max = 0.0f64;
            for (n, gv) in g.iter().enumerate() {
                let b = ops.apply_b(&jet.entries[p].values[n]);
                let r: [f64; 3] = std::array::from_fn(|k| b[k] - gv[k]);
                let r2 = r.iter().map(|x| x * x).sum::<f64>();
                l2 += grid.face_weight(n) * r2;
                max = max.max(r2.sqrt());
            }
            per.push(OrderResidual {
                order: p,
                l2: l2.sqrt(),
                max,
            });
        }
    }
    let pass = per.iter().all(|r| r.max <= tolerance);
    Ok(CompatibilityReport {
        per_order_residual: per,
        tolerance,
        pass,
    })
}

/// Evaluates the compatibility conditions of order `m`. Grids without a
/// conducting face have no conditions and always pass.
pub fn check_compatibility(law: &dyn MaterialLaw, bundle: &DataBundle, m: usize, tolerance: f64) -> Result<CompatibilityReport> {
    let jet = compute_jet(law, bundle, m.saturating_sub(1))?;
    compatibility_from_jet(bundle, &jet, m, tolerance)
}

/// Replaces `g` by `g + sum_{p<m} (t - t0)^p / p! (B S_p - d_t^p g(t0))`, which
/// satisfies the compatibility conditions of order `m` by construction. The
/// jet does not depend on `g`, so `u0` and `f` are untouched.
pub fn compatible_boundary(law: &dyn MaterialLaw, bundle: &DataBundle, m: usize) -> Result<DataBundle> {
    let grid = bundle.u0.grid;
    let Some(nu) = grid.pec_normal() else {
        return Ok(bundle.clone());
    };
    let ops = build_boundary_operators(nu)?;
    let jet = compute_jet(law, bundle, m.saturating_sub(1))?;
    let mut coeffs = Vec::with_capacity(m);
    for p in 0..m {
        let g = bundle.g.time_derivative(&grid, bundle.t0, p);
        coeffs.push(
            g.iter()
                .enumerate()
                .map(|(n, gv)| {
                    let b = ops.apply_b(&jet.entries[p].values[n]);
                    std::array::from_fn(|k| b[k] - gv[k])
                })
                .collect(),
        );
    }
    let mut out = bundle.clone();
    out.g = Arc::new(TaylorTrace {
        t0: bundle.t0,
        base: bundle.g.clone(),
        coeffs,
    });
    Ok(out)
}
