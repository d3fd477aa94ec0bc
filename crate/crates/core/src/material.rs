//! Instantaneous constitutive laws `theta(x, y) = (D, B)` with their state
//! derivatives, the conductivity block and the admissible state domain.

use nalgebra::{Matrix3, Matrix6, SymmetricEigen, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{QmxError, Result};
use crate::grid::{FieldState, Vec6};

pub type Mat6 = Matrix6<f64>;
pub type Mat3 = Matrix3<f64>;

/// `J_1, J_2, J_3` with `sum_j J_j d_j = curl`.
pub fn curl_matrices() -> [[[f64; 3]; 3]; 3] {
    [
        [[0.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]],
        [[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [-1.0, 0.0, 0.0]],
        [[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]],
    ]
}

/// Block matrix `A_j = [[0, -J_j], [J_j, 0]]` for `j` in `1..=3`.
pub fn flux_matrix(j: usize) -> Mat6 {
    let jm = curl_matrices()[j - 1];
    let mut a = Mat6::zeros();
    for r in 0..3 {
        for c in 0..3 {
            a[(r, c + 3)] = -jm[r][c];
            a[(r + 3, c)] = jm[r][c];
        }
    }
    a
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateDomain {
    All,
    /// Centered ball `|y| < radius`.
    Ball { radius: f64 },
    /// Axis-aligned box `lower < y < upper`.
    Box { lower: [f64; 6], upper: [f64; 6] },
}

impl StateDomain {
    pub fn validate(&self) -> Result<()> {
        match self {
            StateDomain::All => Ok(()),
            StateDomain::Ball { radius } if radius.is_finite() && *radius > 0.0 => Ok(()),
            StateDomain::Ball { radius } => Err(QmxError::MaterialDefect(format!(
                "ball radius must be positive, got {radius}"
            ))),
            StateDomain::Box { lower, upper } => {
                if lower.iter().zip(upper).all(|(l, u)| l < u) {
                    Ok(())
                } else {
                    Err(QmxError::MaterialDefect("box needs lower < upper on every axis".into()))
                }
            }
        }
    }

    /// Signed distance to the boundary: positive inside, `+inf` for `All`.
    pub fn signed_distance(&self, y: &Vec6) -> f64 {
        match self {
            StateDomain::All => f64::INFINITY,
            StateDomain::Ball { radius } => radius - y.iter().map(|v| v * v).sum::<f64>().sqrt(),
            StateDomain::Box { lower, upper } => {
                let mut d = f64::INFINITY;
                for c in 0..6 {
                    d = d.min(y[c] - lower[c]).min(upper[c] - y[c]);
                }
                d
            }
        }
    }

    pub fn contains(&self, y: &Vec6) -> bool {
        self.signed_distance(y) > 0.0
    }
}

/// An instantaneous material law together with its analytic derivatives.
///
/// `theta_derivative(x, y, beta, dirs)` returns
/// `d_x^beta d_y^k theta(x, y)[dirs_1, ..., dirs_k]` with `k = dirs.len()`;
/// it must be symmetric in the directions. `sigma_derivative` is the same
/// for the conductivity block `sigma_1`.
pub trait MaterialLaw: Send + Sync + std::fmt::Debug {
    fn theta_derivative(&self, x: [f64; 3], y: &Vec6, beta: [usize; 3], dirs: &[Vec6]) -> Vec6;

    fn sigma_derivative(&self, x: [f64; 3], y: &Vec6, dirs: &[Vec6]) -> Mat3;

    fn eta(&self) -> f64;

    fn state_domain(&self) -> &StateDomain;

    /// Highest derivative order (in `x` and `y` combined) the law provides.
    fn max_order(&self) -> usize;

    /// True when `chi` and `sigma` do not depend on the state.
    fn is_state_independent(&self) -> bool {
        false
    }

    /// True when `chi` and `sigma` depend on neither the state nor `x`.
    fn is_homogeneous(&self) -> bool {
        false
    }

    fn theta(&self, x: [f64; 3], y: &Vec6) -> Vec6 {
        self.theta_derivative(x, y, [0; 3], &[])
    }

    fn chi(&self, x: [f64; 3], y: &Vec6) -> Mat6 {
        let mut m = Mat6::zeros();
        for c in 0..6 {
            let mut e = [0.0; 6];
            e[c] = 1.0;
            let col = self.theta_derivative(x, y, [0; 3], &[e]);
            for r in 0..6 {
                m[(r, c)] = col[r];
            }
        }
        m
    }

    /// Solves `chi(x, y) z = rhs`.
    fn chi_solve(&self, x: [f64; 3], y: &Vec6, rhs: &Vec6) -> Result<Vec6> {
        let chol = self
            .chi(x, y)
            .cholesky()
            .ok_or_else(|| QmxError::MaterialDefect(format!("chi is not positive definite at y = {y:?}")))?;
        let z = chol.solve(&Vector6::from_column_slice(rhs));
        Ok(std::array::from_fn(|i| z[i]))
    }

    fn sigma1(&self, x: [f64; 3], y: &Vec6) -> Mat3 {
        self.sigma_derivative(x, y, &[])
    }

    /// `sigma(x, y) z` with `sigma = blkdiag(sigma_1, 0)`.
    fn sigma_apply(&self, x: [f64; 3], y: &Vec6, z: &Vec6) -> Vec6 {
        let s = self.sigma1(x, y);
        let mut out = [0.0; 6];
        for r in 0..3 {
            for c in 0..3 {
                out[r] += s[(r, c)] * z[c];
            }
        }
        out
    }
}

fn check_domain(law: &dyn MaterialLaw, y: &Vec6) -> Result<()> {
    if y.iter().all(|v| v.is_finite()) && law.state_domain().contains(y) {
        Ok(())
    } else {
        Err(QmxError::StateDomainViolation(format!("{y:?}")))
    }
}

pub fn theta_eval(law: &dyn MaterialLaw, x: [f64; 3], y: &Vec6) -> Result<Vec6> {
    check_domain(law, y)?;
    Ok(law.theta(x, y))
}

pub fn chi_eval(law: &dyn MaterialLaw, x: [f64; 3], y: &Vec6) -> Result<Mat6> {
    check_domain(law, y)?;
    Ok(law.chi(x, y))
}

pub fn chi_inverse(law: &dyn MaterialLaw, x: [f64; 3], y: &Vec6) -> Result<Mat6> {
    let chi = chi_eval(law, x, y)?;
    let chol = chi
        .cholesky()
        .ok_or_else(|| QmxError::MaterialDefect(format!("chi is not positive definite at y = {y:?}")))?;
    Ok(chol.inverse())
}

pub fn sigma_eval(law: &dyn MaterialLaw, x: [f64; 3], y: &Vec6) -> Result<Mat6> {
    check_domain(law, y)?;
    let s = law.sigma1(x, y);
    let mut m = Mat6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&s);
    Ok(m)
}

/// `d_y^orders theta(x, y)` for a multi-index over the six state components.
pub fn y_derivative_eval(law: &dyn MaterialLaw, x: [f64; 3], y: &Vec6, orders: [usize; 6]) -> Result<Vec6> {
    let k: usize = orders.iter().sum();
    if k > law.max_order() {
        return Err(QmxError::DerivativeOrder {
            requested: k,
            max: law.max_order(),
        });
    }
    check_domain(law, y)?;
    let mut dirs = Vec::with_capacity(k);
    for (c, &n) in orders.iter().enumerate() {
        let mut e = [0.0; 6];
        e[c] = 1.0;
        dirs.extend(std::iter::repeat(e).take(n));
    }
    Ok(law.theta_derivative(x, y, [0; 3], &dirs))
}

/// Smallest distance of any node value to the boundary of the state domain
/// (`+inf` when the domain is all of `R^6`, `0` when a value lies outside).
pub fn distance_to_state_boundary(law: &dyn MaterialLaw, state: &FieldState) -> f64 {
    distance_of_values(law.state_domain(), &state.values)
}

pub(crate) fn distance_of_values(domain: &StateDomain, values: &[Vec6]) -> f64 {
    if matches!(domain, StateDomain::All) {
        return f64::INFINITY;
    }
    values
        .iter()
        .map(|y| domain.signed_distance(y).max(0.0))
        .fold(f64::INFINITY, f64::min)
}

/// Checks symmetry and the positivity floor of `chi` at the given samples.
pub fn validate_law(law: &dyn MaterialLaw, samples: &[([f64; 3], Vec6)]) -> Result<()> {
    for (x, y) in samples {
        if !law.state_domain().contains(y) {
            continue;
        }
        let chi = law.chi(*x, y);
        let asym = (chi - chi.transpose()).norm();
        if asym > 1e-10 * chi.norm().max(1.0) {
            return Err(QmxError::MaterialDefect(format!("chi asymmetric ({asym:e}) at y = {y:?}")));
        }
        let min_eig = SymmetricEigen::new(chi).eigenvalues.min();
        if min_eig < law.eta() - 1e-10 {
            return Err(QmxError::MaterialDefect(format!(
                "smallest eigenvalue {min_eig} below eta = {} at y = {y:?}",
                law.eta()
            )));
        }
    }
    Ok(())
}

fn dot3(a: &[f64], b: &[f64]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Kerr law `D = E + vartheta |E|^2 E`, `B = H`, with constant conductivity
/// `sigma_1 = conductivity I`.
#[derive(Clone, Debug, PartialEq)]
pub struct KerrLaw {
    vartheta: f64,
    conductivity: f64,
    domain: StateDomain,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Vartheta {
    Scalar(f64),
    Matrix([f64; 9]),
}

impl Vartheta {
    /// Reduces to a scalar. Only isotropic matrices `c I` are accepted, since
    /// an anisotropic coefficient makes the Jacobian of the cubic term
    /// non-symmetric.
    pub fn as_scalar(&self) -> Result<f64> {
        match self {
            Vartheta::Scalar(v) => Ok(*v),
            Vartheta::Matrix(m) => {
                let c = m[0];
                let iso = (0..9).all(|i| {
                    let expect = if i % 4 == 0 { c } else { 0.0 };
                    (m[i] - expect).abs() <= 1e-14 * (1.0 + c.abs())
                });
                if iso {
                    Ok(c)
                } else {
                    Err(QmxError::MaterialDefect(
                        "matrix vartheta must be a multiple of the identity".into(),
                    ))
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KerrParams {
    pub vartheta: Vartheta,
    pub conductivity_scale: f64,
}

impl KerrLaw {
    /// Kerr law with `vartheta >= 0` and conductivity of either sign. A negative
    /// conductivity is an anti-damping source, only meant for blow-up runs.
    pub fn new(vartheta: f64, conductivity: f64, domain: StateDomain) -> Result<Self> {
        if !(vartheta.is_finite() && vartheta >= 0.0) {
            return Err(QmxError::MaterialDefect(format!(
                "vartheta must be finite and nonnegative, got {vartheta}"
            )));
        }
        if !conductivity.is_finite() {
            return Err(QmxError::MaterialDefect("conductivity must be finite".into()));
        }
        domain.validate()?;
        Ok(Self {
            vartheta,
            conductivity,
            domain,
        })
    }

    pub fn from_params(p: &KerrParams, domain: StateDomain) -> Result<Self> {
        if !(p.conductivity_scale >= 0.0) {
            return Err(QmxError::MaterialDefect("conductivity_scale must be >= 0".into()));
        }
        Self::new(p.vartheta.as_scalar()?, p.conductivity_scale, domain)
    }

    pub fn vacuum() -> Self {
        Self::new(0.0, 0.0, StateDomain::All).unwrap()
    }

    pub fn vartheta(&self) -> f64 {
        self.vartheta
    }

    pub fn conductivity(&self) -> f64 {
        self.conductivity
    }
}

impl MaterialLaw for KerrLaw {
    fn theta_derivative(&self, _x: [f64; 3], y: &Vec6, beta: [usize; 3], dirs: &[Vec6]) -> Vec6 {
        let mut out = [0.0; 6];
        if beta != [0; 3] {
            return out;
        }
        let v = self.vartheta;
        let e = &y[..3];
        match dirs {
            [] => {
                let s = dot3(e, e);
                for i in 0..3 {
                    out[i] = e[i] + v * s * e[i];
                    out[i + 3] = y[i + 3];
                }
            }
            [w] => {
                let s = dot3(e, e);
                let ew = dot3(e, &w[..3]);
                for i in 0..3 {
                    out[i] = w[i] + v * (s * w[i] + 2.0 * ew * e[i]);
                    out[i + 3] = w[i + 3];
                }
            }
            [a, b] => {
                let (ea, eb, ab) = (dot3(e, &a[..3]), dot3(e, &b[..3]), dot3(&a[..3], &b[..3]));
                for i in 0..3 {
                    out[i] = 2.0 * v * (ea * b[i] + eb * a[i] + ab * e[i]);
                }
            }
            [a, b, c] => {
                let (ab, bc, ac) = (
                    dot3(&a[..3], &b[..3]),
                    dot3(&b[..3], &c[..3]),
                    dot3(&a[..3], &c[..3]),
                );
                for i in 0..3 {
                    out[i] = 2.0 * v * (ab * c[i] + bc * a[i] + ac * b[i]);
                }
            }
            _ => {}
        }
        out
    }

    fn sigma_derivative(&self, _x: [f64; 3], _y: &Vec6, dirs: &[Vec6]) -> Mat3 {
        if dirs.is_empty() {
            Mat3::identity() * self.conductivity
        } else {
            Mat3::zeros()
        }
    }

    fn eta(&self) -> f64 {
        1.0
    }

    fn state_domain(&self) -> &StateDomain {
        &self.domain
    }

    fn max_order(&self) -> usize {
        usize::MAX
    }

    fn is_state_independent(&self) -> bool {
        self.vartheta == 0.0
    }

    fn is_homogeneous(&self) -> bool {
        self.vartheta == 0.0
    }

    fn chi_solve(&self, _x: [f64; 3], y: &Vec6, rhs: &Vec6) -> Result<Vec6> {
        // chi_E = a I + b E E^T, inverted by Sherman-Morrison
        let e = &y[..3];
        let s = dot3(e, e);
        let a = 1.0 + self.vartheta * s;
        let b = 2.0 * self.vartheta;
        let k = b / (a + b * s);
        let er = dot3(e, &rhs[..3]);
        let mut z = *rhs;
        for i in 0..3 {
            z[i] = (rhs[i] - k * er * e[i]) / a;
        }
        Ok(z)
    }
}

/// State-independent medium `D = eps E`, `B = mu H` with conductivity `sigma_1`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearMedium {
    eps: Mat3,
    mu: Mat3,
    sigma1: Mat3,
    eta: f64,
    domain: StateDomain,
}

impl LinearMedium {
    pub fn new(eps: Mat3, mu: Mat3, sigma1: Mat3, domain: StateDomain) -> Result<Self> {
        for (name, m) in [("eps", &eps), ("mu", &mu)] {
            if (m - m.transpose()).norm() > 1e-12 * m.norm() {
                return Err(QmxError::MaterialDefect(format!("{name} is not symmetric")));
            }
        }
        domain.validate()?;
        let eta = SymmetricEigen::new(eps)
            .eigenvalues
            .min()
            .min(SymmetricEigen::new(mu).eigenvalues.min());
        if !(eta > 0.0) {
            return Err(QmxError::MaterialDefect("eps and mu must be positive definite".into()));
        }
        Ok(Self {
            eps,
            mu,
            sigma1,
            eta,
            domain,
        })
    }

    pub fn vacuum() -> Self {
        Self::new(Mat3::identity(), Mat3::identity(), Mat3::zeros(), StateDomain::All).unwrap()
    }

    pub fn with_conductivity(c: f64) -> Self {
        Self::new(Mat3::identity(), Mat3::identity(), Mat3::identity() * c, StateDomain::All).unwrap()
    }
}

impl MaterialLaw for LinearMedium {
    fn theta_derivative(&self, _x: [f64; 3], y: &Vec6, beta: [usize; 3], dirs: &[Vec6]) -> Vec6 {
        let mut out = [0.0; 6];
        if beta != [0; 3] || dirs.len() > 1 {
            return out;
        }
        let v = dirs.first().unwrap_or(y);
        for r in 0..3 {
            for c in 0..3 {
                out[r] += self.eps[(r, c)] * v[c];
                out[r + 3] += self.mu[(r, c)] * v[c + 3];
            }
        }
        out
    }

    fn sigma_derivative(&self, _x: [f64; 3], _y: &Vec6, dirs: &[Vec6]) -> Mat3 {
        if dirs.is_empty() {
            self.sigma1
        } else {
            Mat3::zeros()
        }
    }

    fn eta(&self) -> f64 {
        self.eta
    }

    fn state_domain(&self) -> &StateDomain {
        &self.domain
    }

    fn max_order(&self) -> usize {
        usize::MAX
    }

    fn is_state_independent(&self) -> bool {
        true
    }

    fn is_homogeneous(&self) -> bool {
        true
    }
}
