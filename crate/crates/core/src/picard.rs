//! Picard iteration over frozen-coefficient linear solves on time slabs,
//! concatenated up to a horizon or a termination event.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{QmxError, Result};
use crate::grid::{gm_norm, lipschitz_norm, sobolev_norm, FieldState, Trajectory, Vec6};
use crate::initial_data::{
    check_compatibility, compute_jet, jet_realizing_extension, DataBundle, JetExtension,
};
use crate::linear::{
    solve_linear_steps, step_count, CoefficientField, FrozenCoefficients, HermiteField, LinearProblem, StepperConfig,
};
use crate::material::{chi_eval, distance_to_state_boundary, sigma_eval, MaterialLaw};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PicardConfig {
    /// Slab width `tau`.
    pub slab_width: f64,
    pub max_iterations: usize,
    /// Relative fixed-point distance at which a slab is accepted.
    pub fp_tolerance: f64,
    /// A warning is recorded when the measured ratio exceeds this value.
    pub contraction_warn: f64,
    /// Advisory bound on the iterates in the `G_{m-1}` norm.
    pub radius_r: Option<f64>,
    /// Minimum distance to the state-domain boundary; half the initial
    /// distance when unset.
    pub kappa_guard: Option<f64>,
    /// Weight rate of the fixed-point metric.
    pub gamma: f64,
    pub lipschitz_threshold: f64,
    /// Retries with half the slab width after a stall.
    pub max_halvings: usize,
}

impl Default for PicardConfig {
    fn default() -> Self {
        Self {
            slab_width: 0.05,
            max_iterations: 50,
            fp_tolerance: 1e-9,
            contraction_warn: 0.9,
            radius_r: None,
            kappa_guard: None,
            gamma: 0.0,
            lipschitz_threshold: 1e6,
            max_halvings: 6,
        }
    }
}

impl PicardConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |path: &str, message: &str| {
            Err(QmxError::Config {
                path: path.into(),
                message: message.into(),
            })
        };
        if !(self.slab_width > 0.0 && self.slab_width.is_finite()) {
            return bad("solver.tau", "must be positive");
        }
        if self.max_iterations == 0 {
            return bad("solver.max_iterations", "must be at least 1");
        }
        if !(self.fp_tolerance > 0.0) {
            return bad("solver.fp_tolerance", "must be positive");
        }
        if !(self.contraction_warn > 0.0) {
            return bad("solver.contraction_warn", "must be positive");
        }
        if !(self.lipschitz_threshold > 0.0) {
            return bad("solver.lipschitz_threshold", "must be positive");
        }
        if !(self.gamma >= 0.0) {
            return bad("solver.gamma", "must be nonnegative");
        }
        if let Some(k) = self.kappa_guard {
            if !(k >= 0.0) {
                return bad("solver.kappa_guard", "must be nonnegative");
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    BlowupLipschitz,
    LeftStateDomain,
    HorizonReached,
    PicardStalled,
    Nonfinite,
}

impl SolveStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            SolveStatus::Converged | SolveStatus::HorizonReached => 0,
            SolveStatus::BlowupLipschitz => 2,
            SolveStatus::LeftStateDomain => 3,
            SolveStatus::PicardStalled => 4,
            SolveStatus::Nonfinite => 5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::BlowupLipschitz => "blowup_lipschitz",
            SolveStatus::LeftStateDomain => "left_state_domain",
            SolveStatus::HorizonReached => "horizon_reached",
            SolveStatus::PicardStalled => "picard_stalled",
            SolveStatus::Nonfinite => "nonfinite",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlabReport {
    pub t_start: f64,
    pub t_end: f64,
    pub tau: f64,
    pub iterations: usize,
    pub final_distance: f64,
    /// Largest measured ratio of successive distances (0 when one solve sufficed).
    pub contraction_ratio: f64,
    pub distances: Vec<f64>,
    pub halvings: usize,
    pub compat_residual: f64,
    pub radius_exceeded: bool,
    pub contraction_warning: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BlowupKind {
    Lipschitz,
    StateDomain,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BlowupSignal {
    pub kind: BlowupKind,
    pub t: f64,
    pub value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DiagnosticRow {
    pub t: f64,
    pub lipschitz: f64,
    pub sobolev: f64,
    pub state_distance: f64,
}

#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub trajectory: Trajectory,
    pub status: SolveStatus,
    pub per_slab: Vec<SlabReport>,
    pub diagnostics: Vec<DiagnosticRow>,
    pub signal: Option<BlowupSignal>,
    pub message: Option<String>,
}

/// Fires when the Lipschitz norm exceeds the threshold or the state comes
/// closer than `kappa` to the boundary of the state domain.
pub fn blowup_monitor(state: &FieldState, law: &dyn MaterialLaw, threshold: f64, kappa: f64) -> Result<Option<BlowupSignal>> {
    let dist = distance_to_state_boundary(law, state);
    if dist < kappa {
        return Ok(Some(BlowupSignal {
            kind: BlowupKind::StateDomain,
            t: state.time,
            value: dist,
        }));
    }
    let lip = lipschitz_norm(state)?;
    if lip > threshold {
        return Ok(Some(BlowupSignal {
            kind: BlowupKind::Lipschitz,
            t: state.time,
            value: lip,
        }));
    }
    Ok(None)
}

/// Relative `G_{k,gamma}` distance `|a - b| / max(|a|, |b|)`, zero when both vanish.
pub fn relative_distance(a: &Trajectory, b: &Trajectory, k: usize, gamma: f64) -> Result<f64> {
    let diff = a.difference(b)?;
    let num = gm_norm(&diff, k, gamma)?;
    if num == 0.0 {
        return Ok(0.0);
    }
    let den = gm_norm(a, k, gamma)?.max(gm_norm(b, k, gamma)?);
    Ok(if den > 0.0 { num / den } else { f64::INFINITY })
}

/// One application of the fixed-point map: the linear solve with
/// coefficients frozen along `field`.
pub fn apply_fixed_point_map(
    law: &Arc<dyn MaterialLaw>,
    bundle: &DataBundle,
    field: Arc<dyn CoefficientField>,
    tau: f64,
    steps: usize,
    stepper: &StepperConfig,
) -> Result<Trajectory> {
    let coeffs = if law.is_homogeneous() {
        let (x, y) = ([0.0; 3], [0.0; 6]);
        FrozenCoefficients::Uniform {
            a0: chi_eval(law.as_ref(), x, &y)?,
            d: sigma_eval(law.as_ref(), x, &y)?,
        }
    } else {
        FrozenCoefficients::Law { law: law.clone(), field }
    };
    let problem = LinearProblem {
        coeffs,
        data: bundle.clone(),
        horizon: tau,
    };
    Ok(solve_linear_steps(&problem, stepper, Some(steps))?.trajectory)
}

/// Steps per slab of width `tau`.
pub fn slab_steps(law: &dyn MaterialLaw, bundle: &DataBundle, tau: f64, stepper: &StepperConfig) -> usize {
    step_count(tau, stepper.dt_bound(&bundle.u0.grid, law.eta()))
}

/// Iterates `u_{k+1} = Phi(u_k)` on `[t0, t0 + tau]` starting from `seed`
/// (the jet extension when `None`).
pub fn picard_slab_with_seed(
    law: &Arc<dyn MaterialLaw>,
    bundle: &DataBundle,
    m: usize,
    cfg: &PicardConfig,
    stepper: &StepperConfig,
    seed: Option<Arc<dyn CoefficientField>>,
) -> Result<(Trajectory, SlabReport)> {
    cfg.validate()?;
    let tau = cfg.slab_width;
    let steps = slab_steps(law.as_ref(), bundle, tau, stepper);
    let metric_order = m.saturating_sub(1);
    let seed: Arc<dyn CoefficientField> = match seed {
        Some(s) => s,
        None => {
            let jet = compute_jet(law.as_ref(), bundle, m)?;
            Arc::new(jet_realizing_extension(&jet, 2.0 * tau))
        }
    };
    let mut report = SlabReport {
        t_start: bundle.t0,
        t_end: bundle.t0 + tau,
        tau,
        iterations: 1,
        final_distance: 0.0,
        contraction_ratio: 0.0,
        distances: Vec::new(),
        halvings: 0,
        compat_residual: 0.0,
        radius_exceeded: false,
        contraction_warning: false,
    };
    let mut current = apply_fixed_point_map(law, bundle, seed, tau, steps, stepper)?;
    if law.is_state_independent() {
        return Ok((current, report));
    }
    loop {
        if report.iterations >= cfg.max_iterations {
            return Err(QmxError::PicardStalled {
                iterations: report.iterations,
                distance: report.final_distance,
            });
        }
        let field = Arc::new(HermiteField::from_trajectory(&current)?);
        let next = apply_fixed_point_map(law, bundle, field, tau, steps, stepper)?;
        report.iterations += 1;
        let d = relative_distance(&next, &current, metric_order, cfg.gamma)?;
        if !d.is_finite() {
            return Err(QmxError::NonFinite { t: bundle.t0 + tau });
        }
        if let Some(&prev) = report.distances.last() {
            // ratios at rounding level carry no information
            if prev > 0.0 && d > 1e3 * f64::EPSILON {
                let r = d / prev;
                report.contraction_ratio = report.contraction_ratio.max(r);
            }
        }
        report.distances.push(d);
        report.final_distance = d;
        if let Some(r) = cfg.radius_r {
            if gm_norm(&next, metric_order, cfg.gamma)? > r {
                report.radius_exceeded = true;
            }
        }
        current = next;
        if d <= cfg.fp_tolerance {
            break;
        }
        // three growing distances in a row: not contracting
        let n = report.distances.len();
        if n >= 4 && (n - 3..n).all(|i| report.distances[i] > report.distances[i - 1]) {
            return Err(QmxError::PicardStalled {
                iterations: report.iterations,
                distance: d,
            });
        }
    }
    report.contraction_warning = report.contraction_ratio > cfg.contraction_warn;
    Ok((current, report))
}

pub fn picard_slab(
    law: &Arc<dyn MaterialLaw>,
    bundle: &DataBundle,
    m: usize,
    cfg: &PicardConfig,
    stepper: &StepperConfig,
) -> Result<(Trajectory, SlabReport)> {
    picard_slab_with_seed(law, bundle, m, cfg, stepper, None)
}

/// Seed sharing the jet of `ext` through order `m - 1`:
/// `ext(t) + amplitude ((t - t0) / tau)^m w`, sampled with exact rates.
#[derive(Clone, Debug)]
pub struct PerturbedSeed {
    pub base: JetExtension,
    pub direction: Vec<Vec6>,
    pub amplitude: f64,
    pub order: usize,
    pub tau: f64,
}

impl PerturbedSeed {
    fn weight(&self, t: f64) -> (f64, f64) {
        let s = ((t - self.base.t0) / self.tau).max(0.0);
        let m = self.order as i32;
        let w = self.amplitude * s.powi(m);
        let dw = if m == 0 { 0.0 } else { self.amplitude * m as f64 * s.powi(m - 1) / self.tau };
        (w, dw)
    }

    pub fn rate(&self, t: f64) -> Vec<Vec6> {
        let (_, dw) = self.weight(t);
        let mut r = self.base.rate(t);
        for (o, d) in r.iter_mut().zip(&self.direction) {
            for c in 0..6 {
                o[c] += dw * d[c];
            }
        }
        r
    }

    pub fn sample(&self, times: &[f64]) -> Trajectory {
        let mut tr = Trajectory::new();
        for &t in times {
            let values = self.values_at(t);
            tr.push(
                FieldState {
                    grid: self.base.grid,
                    time: t,
                    values,
                },
                Some(self.rate(t)),
            );
        }
        tr
    }
}

impl CoefficientField for PerturbedSeed {
    fn values_at(&self, t: f64) -> Vec<Vec6> {
        let (w, _) = self.weight(t);
        let mut v = self.base.eval(t);
        for (o, d) in v.iter_mut().zip(&self.direction) {
            for c in 0..6 {
                o[c] += w * d[c];
            }
        }
        v
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ContractionEstimate {
    Ratio(f64),
    /// The probes coincide.
    Degenerate,
}

/// `d(Phi u1, Phi u2) / d(u1, u2)` in the relative `G_{m-1,gamma}` metric
/// for two probes sampled on the slab time levels.
pub fn contraction_estimate(
    law: &Arc<dyn MaterialLaw>,
    bundle: &DataBundle,
    m: usize,
    cfg: &PicardConfig,
    stepper: &StepperConfig,
    probes: (&Trajectory, &Trajectory),
) -> Result<ContractionEstimate> {
    let (p1, p2) = probes;
    let tau = cfg.slab_width;
    let steps = slab_steps(law.as_ref(), bundle, tau, stepper);
    if p1.len() != steps + 1 || p2.len() != steps + 1 {
        return Err(QmxError::ShapeMismatch(format!(
            "probes need {} levels, got {} and {}",
            steps + 1,
            p1.len(),
            p2.len()
        )));
    }
    let (a, b) = (&p1.levels[0], &p2.levels[0]);
    let scale = crate::grid::max_norm(&a.state.values).max(1.0);
    let state_gap = crate::grid::max_norm(&crate::grid::sub_fields(&a.state.values, &b.state.values));
    let rate_gap = match (&a.rate, &b.rate) {
        (Some(x), Some(y)) => crate::grid::max_norm(&crate::grid::sub_fields(x, y)),
        _ => return Err(QmxError::ProbeJetMismatch("probes need stored rates".into())),
    };
    if state_gap > 1e-12 * scale || (m >= 2 && rate_gap > 1e-10 * scale) {
        return Err(QmxError::ProbeJetMismatch(format!(
            "initial gap {state_gap:e}, rate gap {rate_gap:e}"
        )));
    }
    let k = m.saturating_sub(1);
    let den = gm_norm(&p1.difference(p2)?, k, cfg.gamma)?;
    if den == 0.0 {
        return Ok(ContractionEstimate::Degenerate);
    }
    let f1 = apply_fixed_point_map(law, bundle, Arc::new(HermiteField::from_trajectory(p1)?), tau, steps, stepper)?;
    let f2 = apply_fixed_point_map(law, bundle, Arc::new(HermiteField::from_trajectory(p2)?), tau, steps, stepper)?;
    let num = gm_norm(&f1.difference(&f2)?, k, cfg.gamma)?;
    Ok(ContractionEstimate::Ratio(num / den))
}

fn diagnostics_row(law: &dyn MaterialLaw, state: &FieldState, m: usize) -> Result<DiagnosticRow> {
    Ok(DiagnosticRow {
        t: state.time,
        lipschitz: lipschitz_norm(state)?,
        sobolev: sobolev_norm(state, m.min(3))?,
        state_distance: distance_to_state_boundary(law, state),
    })
}

/// Chains Picard slabs from `bundle` up to `t0 + horizon`, halving the slab
/// width after a stall, and stops at the first monitor event.
pub fn continue_maximal(
    law: &Arc<dyn MaterialLaw>,
    bundle: &DataBundle,
    m: usize,
    cfg: &PicardConfig,
    stepper: &StepperConfig,
    horizon: f64,
) -> Result<SolveOutcome> {
    continue_maximal_with(law, bundle, m, cfg, stepper, horizon, &mut |_, _| {})
}

/// As [`continue_maximal`], calling `progress` with the report and the last
/// state of every accepted slab.
pub fn continue_maximal_with(
    law: &Arc<dyn MaterialLaw>,
    bundle: &DataBundle,
    m: usize,
    cfg: &PicardConfig,
    stepper: &StepperConfig,
    horizon: f64,
    progress: &mut dyn FnMut(&SlabReport, &FieldState),
) -> Result<SolveOutcome> {
    cfg.validate()?;
    stepper.validate()?;
    bundle.validate(law.as_ref())?;
    let t_end = bundle.t0 + horizon;
    let kappa = cfg
        .kappa_guard
        .unwrap_or_else(|| 0.5 * distance_to_state_boundary(law.as_ref(), &bundle.u0));
    let kappa = if kappa.is_finite() { kappa } else { 0.0 };
    let h = bundle.u0.grid.min_spacing();
    let mut out = SolveOutcome {
        trajectory: Trajectory::new(),
        status: SolveStatus::HorizonReached,
        per_slab: Vec::new(),
        diagnostics: vec![diagnostics_row(law.as_ref(), &bundle.u0, m)?],
        signal: None,
        message: None,
    };
    if let Some(sig) = blowup_monitor(&bundle.u0, law.as_ref(), cfg.lipschitz_threshold, kappa)? {
        out.trajectory.push(bundle.u0.clone(), None);
        out.status = match sig.kind {
            BlowupKind::Lipschitz => SolveStatus::BlowupLipschitz,
            BlowupKind::StateDomain => SolveStatus::LeftStateDomain,
        };
        out.signal = Some(sig);
        return Ok(out);
    }
    let mut current = bundle.clone();
    let time_tol = 1e-12 * (1.0 + t_end.abs());
    while current.t0 < t_end - time_tol {
        let remaining = t_end - current.t0;
        let mut tau = cfg.slab_width.min(remaining);
        let compat = if m > 0 {
            check_compatibility(law.as_ref(), &current, m, h * h)?
                .per_order_residual
                .iter()
                .map(|r| r.max)
                .fold(0.0, f64::max)
        } else {
            0.0
        };
        let mut halvings = 0;
        let accepted = loop {
            let slab_cfg = PicardConfig {
                slab_width: tau,
                ..cfg.clone()
            };
            match picard_slab(law, &current, m, &slab_cfg, stepper) {
                Ok(r) => break Ok(r),
                Err(QmxError::PicardStalled { iterations, distance }) => {
                    if halvings >= cfg.max_halvings {
                        break Err((SolveStatus::PicardStalled, format!(
                            "stalled after {iterations} iterations (distance {distance:e}) with tau = {tau:e}"
                        )));
                    }
                    halvings += 1;
                    tau *= 0.5;
                }
                Err(QmxError::NonFinite { t }) => break Err((SolveStatus::Nonfinite, format!("non-finite values at t = {t}"))),
                Err(QmxError::StateDomainViolation(s)) => break Err((SolveStatus::LeftStateDomain, s)),
                Err(e) => return Err(e),
            }
        };
        let (slab, mut report) = match accepted {
            Ok(r) => r,
            Err((status, msg)) => {
                out.status = status;
                out.message = Some(msg);
                if out.trajectory.is_empty() {
                    out.trajectory.push(current.u0.clone(), None);
                }
                return Ok(out);
            }
        };
        report.halvings = halvings;
        report.compat_residual = compat;
        // monitor every level after the slab start
        let mut cut = None;
        for (i, lvl) in slab.levels.iter().enumerate().skip(1) {
            if !lvl.state.is_finite() {
                cut = Some((i, None));
                break;
            }
            if let Some(sig) = blowup_monitor(&lvl.state, law.as_ref(), cfg.lipschitz_threshold, kappa)? {
                cut = Some((i, Some(sig)));
                break;
            }
        }
        let mut slab = slab;
        if let Some((i, _)) = cut {
            slab.levels.truncate(i + 1);
        }
        for lvl in slab.levels.iter().skip(1) {
            out.diagnostics.push(diagnostics_row(law.as_ref(), &lvl.state, m)?);
        }
        out.trajectory.extend_from(slab);
        progress(&report, out.trajectory.last_state().unwrap());
        out.per_slab.push(report);
        if let Some((_, sig)) = cut {
            match sig {
                None => out.status = SolveStatus::Nonfinite,
                Some(s) => {
                    out.status = match s.kind {
                        BlowupKind::Lipschitz => SolveStatus::BlowupLipschitz,
                        BlowupKind::StateDomain => SolveStatus::LeftStateDomain,
                    };
                    out.signal = Some(s);
                }
            }
            return Ok(out);
        }
        let last = out.trajectory.last_state().unwrap().clone();
        current = current.restarted(last);
    }
    if out.trajectory.is_empty() {
        out.trajectory.push(bundle.u0.clone(), None);
    }
    Ok(out)
}
