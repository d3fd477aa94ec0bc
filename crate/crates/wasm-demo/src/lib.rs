//! Browser bindings for three small experiments: the Kerr constitutive
//! response at one field value, a mid-plane slice of a pulse with its
//! propagation cone, and the Lipschitz curve of a gain-driven uniform state.

use std::sync::Arc;

use wasm_bindgen::prelude::*;

use qmx_core::grid::lipschitz_norm;
use qmx_core::material::{chi_eval, theta_eval, KerrLaw, MaterialLaw, StateDomain};
use qmx_core::picard::continue_maximal;
use qmx_core::scenario::{build_scenario, parse_config, preset, ScenarioConfig};

fn js_err(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

fn load(name: &str) -> Result<ScenarioConfig, JsValue> {
    let p = preset(name).ok_or_else(|| js_err(format!("no preset {name}")))?;
    parse_config(p.toml).map_err(js_err)
}

/// `[D1, D2, D3, chi_min, chi_max, energy density]` for the Kerr law at
/// `E = (e1, e2, e3)`, `H = 0`. The eigenvalues are those of the electric
/// block, `1 + vartheta |E|^2` and `1 + 3 vartheta |E|^2`.
#[wasm_bindgen]
pub fn kerr_response(vartheta: f64, e1: f64, e2: f64, e3: f64) -> Result<Vec<f64>, JsValue> {
    let law = KerrLaw::new(vartheta, 0.0, StateDomain::All).map_err(js_err)?;
    let y = [e1, e2, e3, 0.0, 0.0, 0.0];
    let d = theta_eval(&law, [0.0; 3], &y).map_err(js_err)?;
    let chi = chi_eval(&law, [0.0; 3], &y).map_err(js_err)?;
    let eig = chi.fixed_view::<3, 3>(0, 0).into_owned().symmetric_eigenvalues();
    let energy: f64 = (0..3).map(|i| d[i] * y[i]).sum();
    Ok(vec![d[0], d[1], d[2], eig.min(), eig.max(), energy])
}

/// Pulse on an `n^3` periodic box evolved to `time`. Returns
/// `[n, t_final, cone_radius, half_width, |E|(i, j) for the mid plane...]`
/// with rows along the first axis.
#[wasm_bindgen]
pub fn pulse_slice(n: usize, amplitude: f64, vartheta: f64, time: f64) -> Result<Vec<f64>, JsValue> {
    if !(4..=24).contains(&n) {
        return Err(js_err("n must lie in 4..=24"));
    }
    let mut cfg = load(if vartheta > 0.0 { "kerr_pulse" } else { "vacuum_pulse" })?;
    cfg.grid = cfg.grid.with_resolution(n);
    cfg.data.amplitude = amplitude;
    if vartheta > 0.0 {
        cfg.material.vartheta = qmx_core::material::Vartheta::Scalar(vartheta);
        cfg.solver.m = 2;
    }
    cfg.solver.horizon = time;
    cfg.solver.tau = time.clamp(1e-3, 0.05);
    let setup = build_scenario(&cfg).map_err(js_err)?;
    let out = continue_maximal(&setup.law, &setup.bundle, setup.m, &setup.picard, &setup.stepper, time).map_err(js_err)?;
    let last = out.trajectory.last_state().ok_or_else(|| js_err("empty run"))?;
    let g = last.grid;
    let k = n / 2;
    let speed = 3.0 / setup.law.eta();
    let mut v = vec![
        n as f64,
        last.time,
        cfg.diagnostics.cone_radius + speed * (last.time - setup.bundle.t0),
        0.5 * g.extent(0),
    ];
    for i in 0..n {
        for j in 0..n {
            let u = &last.values[g.index(i, j, k)];
            v.push((u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt());
        }
    }
    Ok(v)
}

/// Lipschitz norm of a uniform Kerr state with gain `gain`, starting at
/// `|E| = s0`, sampled at every accepted level until it exceeds
/// `threshold` or `horizon` is reached. Returns `[t_ref, t0, l0, t1, l1, ...]`
/// where `t_ref` solves `ln(s/s0) + 1.5 vartheta (s^2 - s0^2) = gain t`.
#[wasm_bindgen]
pub fn blowup_curve(gain: f64, vartheta: f64, s0: f64, threshold: f64, horizon: f64) -> Result<Vec<f64>, JsValue> {
    if !(gain > 0.0 && s0 > 0.0 && threshold > s0) {
        return Err(js_err("need gain > 0 and threshold > s0 > 0"));
    }
    let mut cfg = load("kerr_ode_blowup")?;
    cfg.material.gain = gain;
    cfg.material.vartheta = qmx_core::material::Vartheta::Scalar(vartheta);
    cfg.data.e_field = [s0, 0.0, 0.0];
    cfg.solver.lipschitz_threshold = threshold;
    cfg.solver.horizon = horizon;
    let setup = build_scenario(&cfg).map_err(js_err)?;
    let law: Arc<dyn MaterialLaw> = setup.law.clone();
    let out = continue_maximal(&law, &setup.bundle, setup.m, &setup.picard, &setup.stepper, horizon).map_err(js_err)?;
    let t_ref = ((threshold / s0).ln() + 1.5 * vartheta * (threshold * threshold - s0 * s0)) / gain;
    let mut v = vec![t_ref];
    for lvl in &out.trajectory.levels {
        v.push(lvl.state.time);
        v.push(lipschitz_norm(&lvl.state).map_err(js_err)?);
    }
    Ok(v)
}
