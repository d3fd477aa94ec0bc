use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{config_err, DataPreset, LawKind, ScenarioConfig};
use crate::error::{QmxError, Result};
use crate::grid::{BoundaryMode, FieldState, GridSpec, Vec6};
use crate::initial_data::{AnalyticSource, AnalyticTrace, DataBundle, Rho0};
use crate::linear::{build_boundary_operators, StepperConfig};
use crate::material::{KerrLaw, LinearMedium, Mat3, Mat6, MaterialLaw, StateDomain};
use crate::picard::PicardConfig;

/// Exact solution `d_t^j u(t, x)`.
pub type ExactSolution = Arc<dyn Fn(usize, f64, [f64; 3]) -> Vec6 + Send + Sync>;

/// Everything a run needs, assembled from a config.
#[derive(Clone)]
pub struct ScenarioSetup {
    pub law: Arc<dyn MaterialLaw>,
    pub bundle: DataBundle,
    pub stepper: StepperConfig,
    pub picard: PicardConfig,
    pub m: usize,
    pub horizon: f64,
    pub exact: Option<ExactSolution>,
}

impl std::fmt::Debug for ScenarioSetup {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScenarioSetup")
            .field("law", &self.law)
            .field("grid", &self.bundle.u0.grid)
            .field("m", &self.m)
            .field("horizon", &self.horizon)
            .field("exact", &self.exact.is_some())
            .finish()
    }
}

/// Delegates to `inner` but reports a smaller `eta`.
#[derive(Debug)]
struct EtaFloor {
    inner: Arc<dyn MaterialLaw>,
    eta: f64,
}

impl MaterialLaw for EtaFloor {
    fn theta_derivative(&self, x: [f64; 3], y: &Vec6, beta: [usize; 3], dirs: &[Vec6]) -> Vec6 {
        self.inner.theta_derivative(x, y, beta, dirs)
    }
    fn sigma_derivative(&self, x: [f64; 3], y: &Vec6, dirs: &[Vec6]) -> Mat3 {
        self.inner.sigma_derivative(x, y, dirs)
    }
    fn eta(&self) -> f64 {
        self.eta
    }
    fn state_domain(&self) -> &StateDomain {
        self.inner.state_domain()
    }
    fn max_order(&self) -> usize {
        self.inner.max_order()
    }
    fn is_state_independent(&self) -> bool {
        self.inner.is_state_independent()
    }
    fn chi(&self, x: [f64; 3], y: &Vec6) -> Mat6 {
        self.inner.chi(x, y)
    }
    fn chi_solve(&self, x: [f64; 3], y: &Vec6, rhs: &Vec6) -> Result<Vec6> {
        self.inner.chi_solve(x, y, rhs)
    }
}

fn build_law(cfg: &ScenarioConfig) -> Result<Arc<dyn MaterialLaw>> {
    let mat = &cfg.material;
    let domain = mat.state_domain.clone();
    let law: Arc<dyn MaterialLaw> = match mat.law {
        LawKind::Kerr => Arc::new(KerrLaw::new(
            mat.vartheta.as_scalar()?,
            mat.conductivity_scale - mat.gain,
            domain,
        )?),
        LawKind::Linear => Arc::new(LinearMedium::new(
            Mat3::identity() * mat.epsilon,
            Mat3::identity() * mat.mu,
            Mat3::identity() * mat.conductivity_scale,
            domain,
        )?),
    };
    match mat.eta {
        None => Ok(law),
        Some(eta) if eta <= law.eta() => Ok(Arc::new(EtaFloor { inner: law, eta })),
        Some(eta) => Err(config_err(
            "material.eta",
            format!("{eta} exceeds the law's own bound {}", law.eta()),
        )),
    }
}

/// `(1 - r^2 / a^2)^5` inside the ball, with its gradient.
fn bump_gradient(d: [f64; 3], a: f64) -> [f64; 3] {
    let s = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) / (a * a);
    if s >= 1.0 {
        return [0.0; 3];
    }
    let c = -10.0 / (a * a) * (1.0 - s).powi(4);
    [c * d[0], c * d[1], c * d[2]]
}

/// `max_s 10 s (1 - s^2)^4`, attained at `s = 1/3`.
const BUMP_SLOPE: f64 = 10.0 / 3.0 * (8.0 / 9.0) * (8.0 / 9.0) * (8.0 / 9.0) * (8.0 / 9.0);

/// `div D(u)` of an analytic field at the nodes, by fourth-order central
/// differences with a step far below the grid spacing.
fn pointwise_charge(law: &dyn MaterialLaw, grid: &GridSpec, scale: f64, u: impl Fn([f64; 3]) -> Vec6) -> Vec<f64> {
    let d = 1e-3 * scale;
    let w = [(-2.0, 1.0 / 12.0), (-1.0, -8.0 / 12.0), (1.0, 8.0 / 12.0), (2.0, -1.0 / 12.0)];
    (0..grid.node_count())
        .map(|n| {
            let x = grid.position(n);
            let mut div = 0.0;
            for a in 0..3 {
                for &(k, c) in &w {
                    let mut y = x;
                    y[a] += k * d;
                    div += c * law.theta(y, &u(y))[a] / d;
                }
            }
            div
        })
        .collect()
}

/// `E = c curl(psi e3)`, `H = c curl(psi e1)`, scaled so the peak of each
/// field is `amplitude`; both are divergence free.
pub fn pulse_value(x: [f64; 3], center: [f64; 3], width: f64, amplitude: f64) -> Vec6 {
    let d = [x[0] - center[0], x[1] - center[1], x[2] - center[2]];
    let g = bump_gradient(d, width);
    let c = amplitude * width / BUMP_SLOPE;
    [c * g[1], -c * g[0], 0.0, 0.0, c * g[2], -c * g[1]]
}

#[derive(Clone, Copy, Debug)]
struct Manufactured {
    amplitude: f64,
    omega: f64,
    k1: f64,
    k2: f64,
    origin: [f64; 3],
    z0: f64,
    width: f64,
}

impl Manufactured {
    fn phase(c: usize) -> f64 {
        0.3 + 0.7 * c as f64
    }

    /// `d_x^axis d_t^j u` with `axis = 0` meaning no spatial derivative.
    fn eval(&self, axis: usize, j: usize, t: f64, x: [f64; 3]) -> Vec6 {
        let x1 = x[0] - self.origin[0];
        let x2 = x[1] - self.origin[1];
        let z = (x[2] - self.z0) / self.width;
        let gz = (-z * z).exp();
        std::array::from_fn(|c| {
            let p = Self::phase(c);
            let time = self.omega.powi(j as i32) * (self.omega * t + p + j as f64 * 0.5 * PI).cos();
            let a1 = self.k1 * x1 + p;
            let a2 = self.k2 * x2 + 2.0 * p;
            let space = match axis {
                0 => a1.sin() * a2.cos() * gz,
                1 => self.k1 * a1.cos() * a2.cos() * gz,
                2 => -self.k2 * a1.sin() * a2.sin() * gz,
                _ => a1.sin() * a2.cos() * (-2.0 * z / self.width) * gz,
            };
            self.amplitude * time * space
        })
    }

    /// `[d_t^j u, d_t^{j+1} u, d_1 d_t^j u, d_2 d_t^j u, d_3 d_t^j u]`,
    /// sharing the trigonometric factors between the five fields.
    fn eval_all(&self, j: usize, t: f64, x: [f64; 3]) -> [Vec6; 5] {
        let x1 = x[0] - self.origin[0];
        let x2 = x[1] - self.origin[1];
        let z = (x[2] - self.z0) / self.width;
        let gz = (-z * z).exp();
        let dz = -2.0 * z / self.width;
        let mut out = [[0.0; 6]; 5];
        for c in 0..6 {
            let p = Self::phase(c);
            let wj = self.omega.powi(j as i32);
            let (sj, cj) = (self.omega * t + p + j as f64 * 0.5 * PI).sin_cos();
            // shifting the phase by pi/2 turns cos into -sin
            let (time, time_next) = (wj * cj, -wj * self.omega * sj);
            let (s1, c1) = (self.k1 * x1 + p).sin_cos();
            let (s2, c2) = (self.k2 * x2 + 2.0 * p).sin_cos();
            let a = self.amplitude * gz;
            out[0][c] = a * time * s1 * c2;
            out[1][c] = a * time_next * s1 * c2;
            out[2][c] = a * time * self.k1 * c1 * c2;
            out[3][c] = -a * time * self.k2 * s1 * s2;
            out[4][c] = a * time * s1 * c2 * dz;
        }
        out
    }

    /// `d_t^j f` for `f = diag(eps, mu) d_t u + (-curl H, curl E) + sigma u`.
    fn source(&self, j: usize, t: f64, x: [f64; 3], eps: f64, mu: f64, sigma: f64) -> Vec6 {
        let [u, ut, d1, d2, d3] = self.eval_all(j, t, x);
        let curl = |o: usize| {
            [
                d2[o + 2] - d3[o + 1],
                d3[o] - d1[o + 2],
                d1[o + 1] - d2[o],
            ]
        };
        let (ch, ce) = (curl(3), curl(0));
        [
            eps * ut[0] - ch[0] + sigma * u[0],
            eps * ut[1] - ch[1] + sigma * u[1],
            eps * ut[2] - ch[2] + sigma * u[2],
            mu * ut[3] + ce[0],
            mu * ut[4] + ce[1],
            mu * ut[5] + ce[2],
        ]
    }
}

fn manufactured_bundle(cfg: &ScenarioConfig, grid: GridSpec) -> Result<(DataBundle, ExactSolution)> {
    let modes = grid.modes();
    if modes[0] != BoundaryMode::Periodic || modes[1] != BoundaryMode::Periodic {
        return Err(config_err("grid.modes", "manufactured data need periodic axes 1 and 2"));
    }
    let d = &cfg.data;
    let mf = Manufactured {
        amplitude: d.amplitude,
        omega: 2.0 * PI * d.frequency,
        k1: 2.0 * PI * d.wavenumber / grid.extent(0),
        k2: 2.0 * PI / grid.extent(1),
        origin: grid.origin(),
        z0: d.center[2],
        width: d.width,
    };
    let (eps, mu) = match cfg.material.law {
        LawKind::Linear => (cfg.material.epsilon, cfg.material.mu),
        LawKind::Kerr => (1.0, 1.0),
    };
    let sigma = cfg.material.conductivity_scale - cfg.material.gain;
    let t0 = d.t0;
    let u0 = FieldState::from_fn(grid, t0, |x| mf.eval(0, 0, t0, x));
    let f = Arc::new(AnalyticSource::new("manufactured", move |j, t, x| mf.source(j, t, x, eps, mu, sigma)));
    let mut bundle = DataBundle::new(u0, f, Arc::new(crate::initial_data::ZeroSource));
    if let Some(nu) = grid.pec_normal() {
        let ops = build_boundary_operators(nu)?;
        bundle.g = Arc::new(AnalyticTrace::new("manufactured", move |j, t, x| ops.apply_b(&mf.eval(0, j, t, x))));
    }
    Ok((bundle, Arc::new(move |j, t, x| mf.eval(0, j, t, x))))
}

/// Builds law, data and solver settings for a validated config.
pub fn build_scenario(cfg: &ScenarioConfig) -> Result<ScenarioSetup> {
    cfg.validate()?;
    let law = build_law(cfg)?;
    let grid = cfg.grid.spec()?;
    let d = &cfg.data;
    let t0 = d.t0;
    let mut exact = None;
    let bundle = match d.preset {
        DataPreset::Zero => DataBundle::homogeneous(FieldState::zeros(grid, t0)),
        DataPreset::Pulse => {
            let field = |x: [f64; 3]| pulse_value(x, d.center, d.width, d.amplitude);
            let mut b = DataBundle::homogeneous(FieldState::from_fn(grid, t0, field));
            b.rho0 = Rho0::Given(pointwise_charge(law.as_ref(), &grid, d.width, field));
            b
        }
        DataPreset::PlaneWave => {
            let k = 2.0 * PI * d.wavenumber / grid.extent(0);
            let o = grid.origin()[0];
            DataBundle::homogeneous(FieldState::from_fn(grid, t0, |x| {
                let s = d.amplitude * (k * (x[0] - o)).sin();
                [0.0, s, 0.0, 0.0, 0.0, s]
            }))
        }
        DataPreset::Uniform => {
            let v = [d.e_field[0], d.e_field[1], d.e_field[2], d.h_field[0], d.h_field[1], d.h_field[2]];
            DataBundle::homogeneous(FieldState::uniform(grid, t0, v))
        }
        DataPreset::Manufactured => {
            let (b, e) = manufactured_bundle(cfg, grid)?;
            exact = Some(e);
            b
        }
    };
    bundle.validate(law.as_ref()).map_err(|e| match e {
        QmxError::StateDomainViolation(s) => config_err("data", format!("initial state leaves the state domain: {s}")),
        other => other,
    })?;
    Ok(ScenarioSetup {
        law,
        bundle,
        stepper: cfg.solver.stepper(),
        picard: cfg.solver.picard(),
        m: cfg.solver.m,
        horizon: cfg.solver.horizon,
        exact,
    })
}

/// Smooth compactly supported perturbation: a bump of radius `1.5 width` at
/// the data center with a random unit polarization drawn from `seed`.
pub fn perturbation_direction(cfg: &ScenarioConfig, grid: &GridSpec) -> Vec<Vec6> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut pol: Vec6 = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
    let n = pol.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    pol.iter_mut().for_each(|v| *v /= n);
    let a = 1.5 * cfg.data.width;
    let c = cfg.data.center;
    (0..grid.node_count())
        .map(|k| {
            let x = grid.position(k);
            let s = ((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2) + (x[2] - c[2]).powi(2)) / (a * a);
            let w = if s < 1.0 { (1.0 - s).powi(5) } else { 0.0 };
            pol.map(|p| w * p)
        })
        .collect()
}
