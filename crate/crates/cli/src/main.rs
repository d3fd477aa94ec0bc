use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qmx_core::calculus::{format_term_table, MultiIndex};
use qmx_core::initial_data::check_compatibility;
use qmx_core::scenario::{
    build_scenario, emit_config, exit_code_for_error, list_scenarios, parse_config, preset, run_with_progress,
    RunOptions, ScenarioConfig,
};
use qmx_core::{QmxError, Result};

#[derive(Parser)]
#[command(name = "qmx", version, about = "Quasilinear Maxwell lab: Picard slabs, initial jets and diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file.
    Run {
        config: PathBuf,
        /// Output directory (defaults to the config's, then runs/<name>).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        quiet: bool,
    },
    /// Run a built-in scenario with command-line overrides.
    Solve {
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        horizon: Option<f64>,
        /// Cells per axis.
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        cfl: Option<f64>,
        #[arg(long)]
        penalty: Option<f64>,
        #[arg(long)]
        dissipation: Option<f64>,
        #[arg(long = "dump-every")]
        dump_every: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        quiet: bool,
    },
    /// List the built-in scenarios.
    Scenarios,
    /// Print the chain-rule term table for a multi-index `t,x1,x2,x3`.
    Terms { alpha: String },
    /// Print the compatibility table of a built-in scenario or a scenario file.
    Compat {
        #[arg(long, conflicts_with = "config")]
        scenario: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Highest order checked is m - 1 (the scenario's m when unset).
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        tolerance: Option<f64>,
        #[arg(long)]
        csv: bool,
    },
    /// Print a built-in scenario as a TOML file.
    EmitConfig {
        #[arg(long)]
        scenario: String,
    },
}

fn config_err(path: &str, message: impl Into<String>) -> QmxError {
    QmxError::Config {
        path: path.into(),
        message: message.into(),
    }
}

fn load_preset(name: &str) -> Result<ScenarioConfig> {
    let p = preset(name).ok_or_else(|| {
        let names: Vec<_> = list_scenarios().iter().map(|p| p.name).collect();
        config_err("--scenario", format!("unknown scenario `{name}` (known: {})", names.join(", ")))
    })?;
    parse_config(p.toml)
}

fn load_file(path: &PathBuf) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| QmxError::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

fn parse_alpha(s: &str) -> Result<MultiIndex> {
    let parts: Vec<_> = s.split(',').map(str::trim).collect();
    if parts.len() != 4 {
        return Err(config_err("alpha", "expected four comma-separated orders t,x1,x2,x3"));
    }
    let mut a = [0usize; 4];
    for (slot, p) in a.iter_mut().zip(&parts) {
        *slot = p.parse().map_err(|_| config_err("alpha", format!("`{p}` is not a nonnegative integer")))?;
    }
    Ok(MultiIndex(a))
}

fn execute(cfg: &ScenarioConfig, out: Option<PathBuf>, quiet: bool) -> Result<i32> {
    cfg.validate()?;
    let opts = RunOptions { output_dir: out };
    let res = run_with_progress(cfg, &opts, &mut |line| {
        if !quiet {
            eprintln!("{line}");
        }
    })?;
    let summary = std::fs::read_to_string(res.output_dir.join("summary.txt"))?;
    print!("{summary}");
    println!("output      {}", res.output_dir.display());
    Ok(res.exit_code)
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Run { config, out, quiet } => execute(&load_file(&config)?, out, quiet),
        Command::Solve {
            scenario,
            m,
            tau,
            horizon,
            grid,
            cfl,
            penalty,
            dissipation,
            dump_every,
            out,
            quiet,
        } => {
            let mut cfg = load_preset(&scenario)?;
            if let Some(n) = grid {
                cfg.grid = cfg.grid.with_resolution(n);
            }
            let s = &mut cfg.solver;
            s.m = m.unwrap_or(s.m);
            s.tau = tau.unwrap_or(s.tau);
            s.horizon = horizon.unwrap_or(s.horizon);
            s.cfl = cfl.unwrap_or(s.cfl);
            s.penalty = penalty.unwrap_or(s.penalty);
            s.dissipation = dissipation.unwrap_or(s.dissipation);
            if let Some(d) = dump_every {
                cfg.diagnostics.dump_every = d;
            }
            execute(&cfg, out, quiet)
        }
        Command::Scenarios => {
            for p in list_scenarios() {
                println!("{:<18} {}", p.name, p.description);
            }
            Ok(0)
        }
        Command::Terms { alpha } => {
            print!("{}", format_term_table(parse_alpha(&alpha)?)?);
            Ok(0)
        }
        Command::Compat {
            scenario,
            config,
            m,
            tolerance,
            csv,
        } => {
            let cfg = match (scenario, config) {
                (Some(s), None) => load_preset(&s)?,
                (None, Some(p)) => load_file(&p)?,
                _ => return Err(config_err("--scenario", "give either --scenario or --config")),
            };
            let setup = build_scenario(&cfg)?;
            let h = setup.bundle.u0.grid.min_spacing();
            let tol = tolerance.or(cfg.solver.compat_tolerance).unwrap_or(h * h);
            let rep = check_compatibility(setup.law.as_ref(), &setup.bundle, m.unwrap_or(setup.m), tol)?;
            if csv {
                print!("{}", rep.csv());
            } else {
                print!("{}", rep.table());
            }
            Ok(if rep.pass { 0 } else { 1 })
        }
        Command::EmitConfig { scenario } => {
            print!("{}", emit_config(&load_preset(&scenario)?)?);
            Ok(0)
        }
    }
}

fn init_threads() {
    if let Ok(v) = std::env::var("QMX_THREADS") {
        match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => eprintln!("warning: ignoring QMX_THREADS={v:?} (expected a positive integer)"),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_threads();
    let code = match dispatch(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for_error(&e)
        }
    };
    ExitCode::from(code.clamp(0, 255) as u8)
}
