//! Independent oracles shared by the integration tests: truncated
//! multivariate polynomials in `(t, x1, x2, x3)`, truncated time series, and
//! a polynomial material law with explicit `x` dependence.
#![allow(dead_code)]

use std::collections::BTreeMap;

use qmx_core::grid::{discrete_curl, GridSpec, Vec6};
use qmx_core::material::{KerrLaw, Mat3, MaterialLaw, StateDomain};

pub const DEGREE: usize = 3;

/// Polynomial in four variables, truncated above total degree [`DEGREE`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Poly(pub BTreeMap<[usize; 4], f64>);

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

pub fn multi_factorial(a: [usize; 4]) -> f64 {
    a.iter().map(|&k| factorial(k)).product()
}

pub fn monomials() -> Vec<[usize; 4]> {
    let mut out = Vec::new();
    for t in 0..=DEGREE {
        for a in 0..=DEGREE - t {
            for b in 0..=DEGREE - t - a {
                for c in 0..=DEGREE - t - a - b {
                    out.push([t, a, b, c]);
                }
            }
        }
    }
    out
}

impl Poly {
    pub fn constant(c: f64) -> Self {
        let mut p = Poly::default();
        p.0.insert([0; 4], c);
        p
    }

    pub fn term(coeff: f64, exps: [usize; 4]) -> Self {
        let mut p = Poly::default();
        if exps.iter().sum::<usize>() <= DEGREE {
            p.0.insert(exps, coeff);
        }
        p
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (k, v) in &other.0 {
            *out.0.entry(*k).or_insert(0.0) += v;
        }
        out
    }

    pub fn scale(&self, s: f64) -> Poly {
        Poly(self.0.iter().map(|(k, v)| (*k, v * s)).collect())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::default();
        for (ka, va) in &self.0 {
            for (kb, vb) in &other.0 {
                let k = [ka[0] + kb[0], ka[1] + kb[1], ka[2] + kb[2], ka[3] + kb[3]];
                if k.iter().sum::<usize>() <= DEGREE {
                    *out.0.entry(k).or_insert(0.0) += va * vb;
                }
            }
        }
        out
    }

    pub fn coeff(&self, k: [usize; 4]) -> f64 {
        self.0.get(&k).copied().unwrap_or(0.0)
    }

    pub fn derivative(&self, a: [usize; 4]) -> Poly {
        let mut out = Poly::default();
        for (k, v) in &self.0 {
            if (0..4).all(|i| k[i] >= a[i]) {
                let mut c = *v;
                for i in 0..4 {
                    for r in 0..a[i] {
                        c *= (k[i] - r) as f64;
                    }
                }
                let nk = [k[0] - a[0], k[1] - a[1], k[2] - a[2], k[3] - a[3]];
                *out.0.entry(nk).or_insert(0.0) += c;
            }
        }
        out
    }

    pub fn eval(&self, p: [f64; 4]) -> f64 {
        self.0
            .iter()
            .map(|(k, v)| v * (0..4).map(|i| p[i].powi(k[i] as i32)).product::<f64>())
            .sum()
    }

    /// Taylor polynomial about `p` in the shifted variables.
    pub fn shifted(&self, p: [f64; 4]) -> Poly {
        let mut out = Poly::default();
        for k in monomials() {
            let c = self.derivative(k).eval(p) / multi_factorial(k);
            if c != 0.0 {
                out.0.insert(k, c);
            }
        }
        out
    }
}

/// `theta(x, y) = y + a(x) q(y)` with `q` the cubic Kerr term and a cubic
/// polynomial weight `a` in `x`.
#[derive(Debug)]
pub struct PolyKerr {
    pub weight: Poly,
    kerr: KerrLaw,
    domain: StateDomain,
}

impl PolyKerr {
    pub fn new(weight: Poly) -> Self {
        Self {
            weight,
            kerr: KerrLaw::new(1.0, 0.0, StateDomain::All).unwrap(),
            domain: StateDomain::All,
        }
    }

    pub fn default_weight() -> Poly {
        Poly::constant(1.0)
            .add(&Poly::term(0.3, [0, 1, 0, 0]))
            .add(&Poly::term(0.2, [0, 0, 1, 1]))
            .add(&Poly::term(0.1, [0, 0, 0, 2]))
            .add(&Poly::term(0.05, [0, 2, 1, 0]))
    }
}

fn linear_part(y: &Vec6, dirs: &[Vec6]) -> Vec6 {
    match dirs {
        [] => *y,
        [w] => *w,
        _ => [0.0; 6],
    }
}

impl MaterialLaw for PolyKerr {
    fn theta_derivative(&self, x: [f64; 3], y: &Vec6, beta: [usize; 3], dirs: &[Vec6]) -> Vec6 {
        let lin = linear_part(y, dirs);
        let k = self.kerr.theta_derivative(x, y, [0; 3], dirs);
        let a = self.weight.derivative([0, beta[0], beta[1], beta[2]]).eval([0.0, x[0], x[1], x[2]]);
        let base = if beta == [0; 3] { 1.0 } else { 0.0 };
        std::array::from_fn(|c| base * lin[c] + a * (k[c] - lin[c]))
    }

    fn sigma_derivative(&self, _x: [f64; 3], _y: &Vec6, _dirs: &[Vec6]) -> Mat3 {
        Mat3::zeros()
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
}

/// `theta(x, v(t, x))` expanded about `p` through degree 3, from Taylor
/// polynomials of the six components of `v`.
pub fn composed_taylor(weight: &Poly, v: &[Poly; 6], p: [f64; 4]) -> [Poly; 6] {
    let tv: Vec<Poly> = v.iter().map(|c| c.shifted(p)).collect();
    let ta = weight.shifted([0.0, p[1], p[2], p[3]]);
    let ee = tv[0].mul(&tv[0]).add(&tv[1].mul(&tv[1])).add(&tv[2].mul(&tv[2]));
    std::array::from_fn(|c| {
        if c < 3 {
            tv[c].add(&ta.mul(&ee.mul(&tv[c])))
        } else {
            tv[c].clone()
        }
    })
}

/// `(-curl H, curl E)` with the library's grid curl.
pub fn grid_flux(grid: &GridSpec, u: &[Vec6]) -> Vec<Vec6> {
    let e: Vec<[f64; 3]> = u.iter().map(|v| [v[0], v[1], v[2]]).collect();
    let h: Vec<[f64; 3]> = u.iter().map(|v| [v[3], v[4], v[5]]).collect();
    let ce = discrete_curl(grid, &e).unwrap();
    let ch = discrete_curl(grid, &h).unwrap();
    (0..u.len())
        .map(|n| [-ch[n][0], -ch[n][1], -ch[n][2], ce[n][0], ce[n][1], ce[n][2]])
        .collect()
}

/// Time-Taylor coefficients `u_k = d_t^k u(t0) / k!` of the Kerr system
/// `d_t theta(u) = f - A(d) u - sigma u` at every node, obtained by series
/// arithmetic. `source[k]` holds `d_t^k f(t0) / k!`.
pub fn kerr_series(
    grid: &GridSpec,
    vartheta: f64,
    conductivity: f64,
    u0: &[Vec6],
    source: &[Vec<Vec6>],
    order: usize,
) -> Vec<Vec<Vec6>> {
    use nalgebra::{Matrix6, Vector6};
    let mut series = vec![u0.to_vec()];
    for k in 0..order {
        let flux = grid_flux(grid, &series[k]);
        let next: Vec<Vec6> = (0..u0.len())
            .map(|n| {
                let e = |i: usize| [series[i][n][0], series[i][n][1], series[i][n][2]];
                let mut rhs = [0.0; 6];
                for c in 0..6 {
                    let damp = if c < 3 { conductivity * series[k][n][c] } else { 0.0 };
                    rhs[c] = (source[k][n][c] - flux[n][c] - damp) / (k + 1) as f64;
                }
                // cubic coefficient of order k + 1 from the known orders
                for a in 0..=k {
                    for b in 0..=k + 1 - a {
                        let c3 = k + 1 - a - b;
                        if b > k || c3 > k {
                            continue;
                        }
                        let (ea, eb, ec) = (e(a), e(b), e(c3));
                        let dot = ea[0] * eb[0] + ea[1] * eb[1] + ea[2] * eb[2];
                        for i in 0..3 {
                            rhs[i] -= vartheta * dot * ec[i];
                        }
                    }
                }
                let e0 = e(0);
                let s = e0[0] * e0[0] + e0[1] * e0[1] + e0[2] * e0[2];
                let mut chi = Matrix6::<f64>::identity();
                for i in 0..3 {
                    for j in 0..3 {
                        chi[(i, j)] += vartheta * (2.0 * e0[i] * e0[j] + if i == j { s } else { 0.0 });
                    }
                }
                let z = chi.lu().solve(&Vector6::from_column_slice(&rhs)).unwrap();
                std::array::from_fn(|i| z[i])
            })
            .collect();
        series.push(next);
    }
    series
}

/// Largest absolute entry.
pub fn max_abs(v: &[Vec6]) -> f64 {
    v.iter().flat_map(|x| x.iter()).fold(0.0, |m, c| m.max(c.abs()))
}

/// `max |a - b| / max(max |b|, floor)`.
pub fn rel_error(a: &[Vec6], b: &[Vec6], floor: f64) -> f64 {
    let d = a
        .iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max);
    d / max_abs(b).max(floor)
}
