use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::{build_scenario, perturbation_direction, ScenarioConfig};
use crate::diagnostics::{
    cone_support_check, continuous_dependence_experiment, divergence_check, propagation_speed_bound, ConeSpec,
};
use crate::error::{QmxError, Result};
use crate::grid::{l2_norm, lipschitz_norm, max_norm, write_field_dump, write_norm_csv, FieldState, NormCsvRow};
use crate::initial_data::check_compatibility;
use crate::linear::energy_along;
use crate::picard::{continue_maximal_with, BlowupSignal, SlabReport, SolveStatus};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunOptions {
    /// Overrides the config's output directory.
    pub output_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckLine {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunManifest {
    pub artifact: String,
    pub version: String,
    pub scenario: String,
    pub config: ScenarioConfig,
    pub status: String,
    pub exit_code: i32,
    pub final_time: f64,
    pub steps: usize,
    pub slabs: usize,
    pub picard_iterations: usize,
    pub blowup: Option<BlowupSignal>,
    pub message: Option<String>,
    pub checks: Vec<CheckLine>,
    pub wall_clock_seconds: f64,
    /// File name to SHA-256 of its contents.
    pub outputs: BTreeMap<String, String>,
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub status: SolveStatus,
    pub exit_code: i32,
    pub output_dir: PathBuf,
    pub manifest: RunManifest,
}

/// Process exit code for a run that failed before producing an outcome.
pub fn exit_code_for_error(e: &QmxError) -> i32 {
    match e {
        QmxError::Config { .. } | QmxError::InvalidGrid(_) | QmxError::ConeLeavesGrid(_) => 64,
        QmxError::StateDomainViolation(_) => SolveStatus::LeftStateDomain.exit_code(),
        QmxError::PicardStalled { .. } => SolveStatus::PicardStalled.exit_code(),
        QmxError::NonFinite { .. } => SolveStatus::Nonfinite.exit_code(),
        QmxError::Io(_) => 74,
        _ => 70,
    }
}

struct Artifacts {
    dir: PathBuf,
    hashes: BTreeMap<String, String>,
}

impl Artifacts {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            hashes: BTreeMap::new(),
        })
    }

    /// Writes through a temporary file and a rename.
    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let tmp = self.dir.join(format!(".{}.tmp", name.replace('/', "_")));
        fs::write(&tmp, bytes)?;
        fs::rename(&tmp, &path)?;
        self.hashes.insert(name.to_string(), hex(&Sha256::digest(bytes)));
        Ok(())
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(2 * bytes.len()), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn slab_csv(slabs: &[SlabReport]) -> String {
    let mut s = String::from(
        "t_start,t_end,tau,iterations,final_distance,contraction_ratio,halvings,compat_residual,contraction_warning\n",
    );
    for r in slabs {
        let _ = writeln!(
            s,
            "{:.12e},{:.12e},{:.6e},{},{:.6e},{:.6e},{},{:.6e},{}",
            r.t_start,
            r.t_end,
            r.tau,
            r.iterations,
            r.final_distance,
            r.contraction_ratio,
            r.halvings,
            r.compat_residual,
            r.contraction_warning
        );
    }
    s
}

fn state_energy(law: &dyn crate::material::MaterialLaw, s: &FieldState) -> f64 {
    let g = s.grid;
    s.values
        .iter()
        .enumerate()
        .map(|(n, u)| {
            let a0u = law.theta_derivative(g.position(n), u, [0; 3], &[*u]);
            g.node_weight(n) * (0..6).map(|c| a0u[c] * u[c]).sum::<f64>()
        })
        .sum()
}

pub fn run(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<RunResult> {
    run_with_progress(cfg, opts, &mut |_| {})
}

/// Runs a scenario and writes its artifacts, reporting one progress line per
/// accepted slab.
pub fn run_with_progress(cfg: &ScenarioConfig, opts: &RunOptions, progress: &mut dyn FnMut(&str)) -> Result<RunResult> {
    let started = Instant::now();
    let setup = build_scenario(cfg)?;
    let dir = opts.output_dir.clone().unwrap_or_else(|| cfg.output_path());
    let mut art = Artifacts::new(&dir)?;
    let mut checks = Vec::new();
    let law = setup.law.clone();
    let grid = setup.bundle.u0.grid;
    let h = grid.min_spacing();

    if setup.m > 0 {
        let tol = cfg.solver.compat_tolerance.unwrap_or(h * h);
        let rep = check_compatibility(law.as_ref(), &setup.bundle, setup.m, tol)?;
        art.write("compat.csv", rep.csv().as_bytes())?;
        checks.push(CheckLine {
            name: "compatibility".into(),
            pass: rep.pass,
            detail: format!(
                "max residual {:.3e} at tolerance {tol:.3e}",
                rep.per_order_residual.iter().map(|r| r.max).fold(0.0, f64::max)
            ),
        });
    }

    let mut step = 0usize;
    let outcome = continue_maximal_with(
        &law,
        &setup.bundle,
        setup.m,
        &setup.picard,
        &setup.stepper,
        setup.horizon,
        &mut |rep, state| {
            step += 1;
            let lip = lipschitz_norm(state).unwrap_or(f64::NAN);
            progress(&format!(
                "slab {step:>4}  t = {:.6}  iterations = {:>2}  energy = {:.6e}  lipschitz = {:.4e}",
                rep.t_end,
                rep.iterations,
                state_energy(law.as_ref(), state),
                lip
            ));
        },
    )?;
    let tr = &outcome.trajectory;

    let mut diag = String::from("t,lipschitz,sobolev,state_distance\n");
    let mut norm_rows = Vec::new();
    let sob_order = setup.m.min(3);
    for d in &outcome.diagnostics {
        let _ = writeln!(diag, "{:.12e},{:.12e},{:.12e},{:.12e}", d.t, d.lipschitz, d.sobolev, d.state_distance);
        norm_rows.push(NormCsvRow {
            t: d.t,
            norm_kind: "lipschitz".into(),
            order: 1,
            gamma: 0.0,
            value: d.lipschitz,
        });
        norm_rows.push(NormCsvRow {
            t: d.t,
            norm_kind: "sobolev".into(),
            order: sob_order,
            gamma: 0.0,
            value: d.sobolev,
        });
    }
    art.write("diagnostics.csv", diag.as_bytes())?;
    let mut norms = Vec::new();
    write_norm_csv(&mut norms, &norm_rows)?;
    art.write("norms.csv", &norms)?;
    art.write("slabs.csv", slab_csv(&outcome.per_slab).as_bytes())?;

    if cfg.diagnostics.energy {
        let e = energy_along(law.as_ref(), tr, &setup.bundle);
        art.write("energy.csv", e.csv().as_bytes())?;
    }

    if let Some(exact) = &setup.exact {
        let mut s = String::from("t,l2_error,max_error\n");
        for lvl in &tr.levels {
            let st = &lvl.state;
            let err: Vec<_> = (0..grid.node_count())
                .map(|n| {
                    let e = exact(0, st.time, grid.position(n));
                    std::array::from_fn::<f64, 6, _>(|c| st.values[n][c] - e[c])
                })
                .collect();
            let _ = writeln!(s, "{:.12e},{:.12e},{:.12e}", st.time, l2_norm(&grid, &err), max_norm(&err));
        }
        art.write("errors.csv", s.as_bytes())?;
    }

    if cfg.diagnostics.divergence {
        let rep = divergence_check(law.as_ref(), tr, &setup.bundle)?;
        art.write("divergence.csv", rep.csv().as_bytes())?;
        let (b, q) = rep.peak_l2();
        let (b0, q0) = (rep.div_b_l2[0], rep.charge_l2[0]);
        let floor = 1e-12;
        checks.push(CheckLine {
            name: "divergence".into(),
            pass: b <= 10.0 * b0.max(floor) && q <= 10.0 * q0.max(floor),
            detail: format!("div B peak {b:.3e} (initial {b0:.3e}), div D - rho peak {q:.3e} (initial {q0:.3e})"),
        });
    }

    if cfg.diagnostics.cone {
        let cone = ConeSpec {
            center: cfg.diagnostics.cone_center.unwrap_or(cfg.data.center),
            radius: cfg.diagnostics.cone_radius,
            speed: cfg
                .diagnostics
                .cone_speed
                .unwrap_or_else(|| propagation_speed_bound(law.eta())),
            direction: cfg.diagnostics.cone_direction,
        };
        let rep = cone_support_check(tr, &cone, cfg.diagnostics.cone_tolerance)?;
        art.write("cone.csv", rep.csv().as_bytes())?;
        checks.push(CheckLine {
            name: "cone".into(),
            pass: rep.pass,
            detail: format!(
                "max violation {:.3e} at tolerance {:.1e}, speed {}",
                rep.max_violation, rep.tolerance, cone.speed
            ),
        });
    }

    if cfg.diagnostics.continuity {
        let dir_field = perturbation_direction(cfg, &grid);
        match continuous_dependence_experiment(
            &law,
            &setup.bundle,
            setup.m,
            &dir_field,
            &cfg.diagnostics.continuity_deltas,
            &setup.picard,
            &setup.stepper,
            setup.horizon,
        ) {
            Ok(rep) => {
                art.write("continuity.csv", rep.csv().as_bytes())?;
                checks.push(CheckLine {
                    name: "continuity".into(),
                    pass: rep.spread <= 0.25,
                    detail: format!("ratio spread {:.3e}", rep.spread),
                });
            }
            Err(QmxError::ExperimentAborted(msg)) => checks.push(CheckLine {
                name: "continuity".into(),
                pass: false,
                detail: format!("aborted: {msg}"),
            }),
            Err(e) => return Err(e),
        }
    }

    if cfg.diagnostics.dump_every > 0 {
        for (n, lvl) in tr.levels.iter().enumerate() {
            if n % cfg.diagnostics.dump_every == 0 || n + 1 == tr.len() {
                let mut buf = Vec::new();
                write_field_dump(&mut buf, &lvl.state)?;
                art.write(&format!("dumps/level_{n:06}.qmxf"), &buf)?;
            }
        }
    }

    let final_time = tr.last_state().map_or(setup.bundle.t0, |s| s.time);
    let mut summary = String::new();
    let _ = writeln!(summary, "scenario    {}", cfg.name);
    let _ = writeln!(summary, "status      {}", outcome.status.name());
    let _ = writeln!(summary, "exit code   {}", outcome.status.exit_code());
    let _ = writeln!(summary, "final time  {final_time:.6}");
    let _ = writeln!(summary, "levels      {}", tr.len());
    let _ = writeln!(summary, "slabs       {}", outcome.per_slab.len());
    if let Some(sig) = outcome.signal {
        let _ = writeln!(summary, "blowup      {:?} at t = {:.6} (value {:.4e})", sig.kind, sig.t, sig.value);
    }
    if let Some(msg) = &outcome.message {
        let _ = writeln!(summary, "message     {msg}");
    }
    for c in &checks {
        let _ = writeln!(summary, "{} {:<14} {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    art.write("summary.txt", summary.as_bytes())?;

    let mut manifest = RunManifest {
        artifact: "qmx".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        scenario: cfg.name.clone(),
        config: cfg.clone(),
        status: outcome.status.name().into(),
        exit_code: outcome.status.exit_code(),
        final_time,
        steps: tr.len().saturating_sub(1),
        slabs: outcome.per_slab.len(),
        picard_iterations: outcome.per_slab.iter().map(|r| r.iterations).sum(),
        blowup: outcome.signal,
        message: outcome.message.clone(),
        checks,
        wall_clock_seconds: 0.0,
        outputs: art.hashes.clone(),
    };
    manifest.wall_clock_seconds = started.elapsed().as_secs_f64();
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| QmxError::Io(e.to_string()))?;
    art.write("manifest.json", json.as_bytes())?;
    Ok(RunResult {
        status: outcome.status,
        exit_code: outcome.status.exit_code(),
        output_dir: dir,
        manifest,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{parse_config, preset};
    use super::*;

    fn small(name: &str, n: usize) -> ScenarioConfig {
        let mut cfg = parse_config(preset(name).unwrap().toml).unwrap();
        cfg.grid = cfg.grid.with_resolution(n);
        cfg
    }

    #[test]
    fn plane_wave_run_writes_hashed_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small("vacuum_plane_wave", 8);
        cfg.solver.horizon = 0.1;
        cfg.diagnostics.dump_every = 5;
        let opts = RunOptions {
            output_dir: Some(dir.path().to_path_buf()),
        };
        let res = run(&cfg, &opts).unwrap();
        assert_eq!(res.exit_code, 0);
        for f in ["manifest.json", "energy.csv", "norms.csv", "diagnostics.csv", "slabs.csv", "summary.txt", "compat.csv"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        assert!(res.manifest.outputs.keys().any(|k| k.starts_with("dumps/")));
        let energy = std::fs::read_to_string(dir.path().join("energy.csv")).unwrap();
        assert!(energy.starts_with("t,energy,source_norm,boundary_norm,ratio\n"));
        let dump = std::fs::read(dir.path().join("dumps/level_000000.qmxf")).unwrap();
        let back = crate::grid::read_field_dump(&dump[..]).unwrap();
        assert_eq!(back.grid.cells(), [8; 3]);
    }

    #[test]
    fn reruns_are_byte_identical() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let mut cfg = small("kerr_pulse", 12);
        cfg.solver.horizon = 0.03;
        cfg.diagnostics.cone = false;
        let ra = run(&cfg, &RunOptions { output_dir: Some(a.path().into()) }).unwrap();
        let rb = run(&cfg, &RunOptions { output_dir: Some(b.path().into()) }).unwrap();
        assert_eq!(ra.manifest.outputs.get("energy.csv"), rb.manifest.outputs.get("energy.csv"));
        let strip = |m: &RunManifest| {
            let mut out = m.outputs.clone();
            out.remove("manifest.json");
            out
        };
        assert_eq!(strip(&ra.manifest), strip(&rb.manifest));
    }

    #[test]
    fn blowup_run_reports_the_crossing() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = parse_config(preset("kerr_ode_blowup").unwrap().toml).unwrap();
        let res = run(&cfg, &RunOptions { output_dir: Some(dir.path().into()) }).unwrap();
        assert_eq!(res.status, SolveStatus::BlowupLipschitz);
        assert_eq!(res.exit_code, 2);
        assert!(res.manifest.blowup.unwrap().t > 0.0);
    }

    #[test]
    fn error_exit_codes() {
        let cfg_err = QmxError::Config {
            path: "solver.cfl".into(),
            message: String::new(),
        };
        assert_eq!(exit_code_for_error(&cfg_err), 64);
        assert_eq!(exit_code_for_error(&QmxError::NonFinite { t: 0.0 }), 5);
    }
}
