//! Command-line front end: model and free-surface simulations, stability
//! scans, delta sweeps, comparisons, and the empirical inequality audits.
//!
//! Exit codes: 0 = all gates pass, 1 = a gate failed, 2 = runtime error.

use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use filmcascade::config::ExperimentConfig;
use filmcascade::diagnostics::{energy_audit, energy_report, korn_audit, EnergyWeights};
use filmcascade::error::{Error, Result};
use filmcascade::harness::{
    compare_models, compare_ns_model, emit_report, initial_elevation, ns_diagnostics_table,
    run_model_sampled, run_ns_sampled, sweep_delta, ReportTable,
};
use filmcascade::models::{ModelKind, ModelState};
use filmcascade::nssolver::{
    check_compatibility, compatible_initial_state, state_rates, NSState, Scheme,
};
use filmcascade::params::ScalingParams;
use filmcascade::spectral::{BulkField, Grid, Row, Snapshot, SurfaceField};
use filmcascade::stability::{dispersion, neutral_reynolds, os_spectrum, OSProblem};
use filmcascade::transform::extension_audit;

#[derive(Parser)]
#[command(name = "filmcascade", about = "thin-film flow simulation and verification toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct ConfigArgs {
    /// experiment configuration file (sectioned key-value text)
    #[arg(long)]
    config: PathBuf,
    /// output directory (overrides the config)
    #[arg(long)]
    out: Option<PathBuf>,
    /// random seed (overrides the config recipe seed)
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate one reduced long-wave model
    Simulate {
        /// burgers | kdvb | kawahara | benney
        #[arg(long)]
        model: String,
        #[command(flatten)]
        common: ConfigArgs,
    },
    /// Integrate the flattened free-surface solver
    SimulateNs {
        #[command(flatten)]
        common: ConfigArgs,
        /// also emit the energy-inequality audit of the run
        #[arg(long)]
        audit_energy: bool,
        /// number of binary state snapshots to write
        #[arg(long)]
        snapshots: Option<usize>,
    },
    /// Linear stability scan: model dispersion relations and, optionally,
    /// the collocation eigenvalue problem
    Stability {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        weber: f64,
        /// wavenumber range as start:end:count
        #[arg(long, value_name = "A:B:N")]
        k_range: String,
        /// Reynolds number of the growth-rate scan
        #[arg(long, default_value_t = 1.0)]
        reynolds: f64,
        /// also solve the collocation eigenvalue problem and trace the
        /// neutral Reynolds curve
        #[arg(long)]
        os: bool,
        #[arg(long, default_value_t = 48)]
        ny: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run the free-surface solver across the configured delta list and
    /// check uniformity of the energy
    SweepDelta {
        #[command(flatten)]
        common: ConfigArgs,
    },
    /// Time-synchronized error table between two models (or solver vs model
    /// when the config kind is compare-ns)
    Compare {
        #[command(flatten)]
        common: ConfigArgs,
    },
    /// Empirical norm bounds of the surface-to-strip extension operator
    ExtensionAudit {
        /// comma-separated deltas
        #[arg(long, default_value = "1,0.5,0.25,0.125,0.0625,0.03125,0.015625,0.0078125,0.00390625")]
        delta_list: String,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value_t = 64)]
        nx: usize,
        #[arg(long, default_value_t = 48)]
        ny: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// single-constant gate on every ratio maximum
        #[arg(long, default_value_t = 10.0)]
        gate: f64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Empirical best constant of the anisotropic Korn inequality
    KornAudit {
        #[arg(long, default_value = "1,0.25,0.0625")]
        delta_list: String,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 32)]
        nx: usize,
        #[arg(long, default_value_t = 32)]
        ny: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Audit the energy inequality along a stored snapshot trajectory
    EnergyAudit {
        /// directory of binary state snapshots
        #[arg(long)]
        traj: PathBuf,
        #[arg(long, default_value_t = 2)]
        m: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.cmd) {
        Ok(true) => ExitCode::from(0),
        Ok(false) => {
            eprintln!("gate failure");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn load(common: &ConfigArgs) -> Result<(ExperimentConfig, PathBuf)> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.initial.seed = seed;
    }
    let out = common
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    Ok((cfg, out))
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("bad list entry {t:?}: {e}")))
        })
        .collect()
}

fn parse_range(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Config(format!("expected A:B:N, got {s:?}")));
    }
    let a: f64 = parts[0].parse().map_err(|e| Error::Config(format!("{e}")))?;
    let b: f64 = parts[1].parse().map_err(|e| Error::Config(format!("{e}")))?;
    let n: usize = parts[2].parse().map_err(|e| Error::Config(format!("{e}")))?;
    if n < 2 || b <= a {
        return Err(Error::Config("range needs b > a and n >= 2".into()));
    }
    Ok((0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect())
}

fn snapshot_of_ns(state: &NSState, params: &ScalingParams, grid: &Grid) -> Snapshot {
    let mut s = Snapshot::new(grid.nx, grid.ny, state.t, params);
    s.eta = state.eta.to_grid(grid).data;
    s.u = state.u.data.clone();
    s.v = state.v.data.clone();
    s.p = state.p.data.clone();
    s
}

fn ns_state_of_snapshot(s: &Snapshot, grid: &Grid) -> NSState {
    NSState {
        eta: SurfaceField::from_grid(
            grid,
            &Row {
                nx: s.nx,
                data: s.eta.clone(),
            },
        ),
        u: BulkField {
            nx: s.nx,
            ny: s.ny,
            data: s.u.clone(),
        },
        v: BulkField {
            nx: s.nx,
            ny: s.ny,
            data: s.v.clone(),
        },
        p: BulkField {
            nx: s.nx,
            ny: s.ny,
            data: s.p.clone(),
        },
        t: s.time,
    }
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Contract(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}

fn dispatch(cmd: Cmd) -> Result<bool> {
    match cmd {
        Cmd::Simulate { model, common } => {
            let kind = ModelKind::parse(&model)?;
            let (cfg, out) = load(&common)?;
            let grid = Grid::new(cfg.grid.nx, cfg.grid.ny);
            let params = cfg.base_params()?;
            let eta0 = initial_elevation(&cfg, grid.nx);
            let states = run_model_sampled(
                kind,
                &eta0,
                &params,
                &grid,
                cfg.run.t_final,
                cfg.run.dt,
                cfg.experiment.samples,
            )?;
            let mut table = ReportTable::new(
                &format!("{} run", kind.name()),
                &["t", "mean", "L2", "max"],
            );
            for s in &states {
                let row = s.eta.to_grid(&grid);
                table.push(vec![s.t, row.mean(), s.eta.sobolev_norm(0.0), row.max_abs()]);
            }
            emit_report(&table, &format!("simulate_{}", kind.name()), &out, &["csv"], false)?;
            write_model_snapshots(&states, cfg.output.snapshots, &params, &grid, &out)?;
            Ok(true)
        }

        Cmd::SimulateNs {
            common,
            audit_energy,
            snapshots,
        } => {
            let (cfg, out) = load(&common)?;
            let grid = Grid::new(cfg.grid.nx, cfg.grid.ny);
            let params = cfg.base_params()?;
            let eta0 = initial_elevation(&cfg, grid.nx);
            let init = compatible_initial_state(&eta0, &params, &grid)?;
            let compat = check_compatibility(&init, &params, &grid)?;
            if !compat.pass {
                return Err(Error::Contract(format!(
                    "initial data failed the compatibility check: {compat:?}"
                )));
            }
            let scheme = if cfg.run.scheme == "imex1" {
                Scheme::Imex1
            } else {
                Scheme::CnAb2
            };
            let states = run_ns_sampled(
                &init,
                &params,
                &grid,
                cfg.run.t_final,
                cfg.run.dt,
                cfg.experiment.samples,
                scheme,
            )?;
            let (table, series) = ns_diagnostics_table(&states, &params, &grid)?;
            emit_report(&table, "simulate_ns", &out, &["csv"], false)?;

            let n_snap = snapshots.unwrap_or(cfg.output.snapshots);
            if n_snap > 0 {
                std::fs::create_dir_all(&out)?;
                let stride = (states.len() / n_snap).max(1);
                for (i, s) in states.iter().step_by(stride).enumerate() {
                    snapshot_of_ns(s, &params, &grid)
                        .write_to(&out.join(format!("state_{i:05}.tflm")))?;
                }
            }
            if audit_energy {
                let audit = energy_audit(&series, 2);
                emit_audit(&audit, &out)?;
                return Ok(audit.pass);
            }
            Ok(true)
        }

        Cmd::Stability {
            alpha,
            delta,
            weber,
            k_range,
            reynolds,
            os,
            ny,
            out,
        } => {
            let ks = parse_range(&k_range)?;
            let params = ScalingParams::from_nondimensional(delta, 0.0, reynolds, weber, alpha)?;
            let mut table = ReportTable::new(
                "linear growth rates",
                &["k", "re_lambda", "im_lambda", "model", "R"],
            );
            let kinds = [
                ModelKind::Burgers,
                ModelKind::KdVBurgers,
                ModelKind::Kawahara,
                ModelKind::Benney,
            ];
            for &k in &ks {
                for (mi, kind) in kinds.iter().enumerate() {
                    let lam = dispersion(*kind, k, &params);
                    table.push(vec![k, lam.re, lam.im, mi as f64, reynolds]);
                }
                if os {
                    let prob = OSProblem::new(k, params, ny)?;
                    let spec = os_spectrum(&prob)?;
                    if let Some(lead) = spec.iter().max_by(|a, b| a.re.total_cmp(&b.re)) {
                        table.push(vec![k, lead.re, lead.im, 4.0, reynolds]);
                    }
                }
            }
            emit_report(&table, "stability", &out, &["csv"], false)?;

            // growth-rate plot (Re lambda against k, one series per model)
            let mut plot = ReportTable::new(
                "growth rates",
                &["k", "burgers", "kdvb", "kawahara", "benney"],
            );
            for &k in &ks {
                let mut row = vec![k];
                for kind in &kinds {
                    row.push(dispersion(*kind, k, &params).re);
                }
                plot.push(row);
            }
            emit_report(&plot, "growth_rates", &out, &["svg"], false)?;

            if os {
                let rc = 1.25f64.max(5.0 / (4.0 * alpha.tan()));
                let mut neutral = ReportTable::new("neutral Reynolds curve", &["k", "R_neutral"]);
                for &k in &ks {
                    if let Ok(r) =
                        neutral_reynolds(k, delta, weber, alpha, ny, 0.2 * rc, 5.0 * rc)
                    {
                        neutral.push(vec![k, r]);
                    }
                }
                if !neutral.rows.is_empty() {
                    emit_report(&neutral, "neutral_curve", &out, &["csv", "svg"], false)?;
                }
            }
            Ok(true)
        }

        Cmd::SweepDelta { common } => {
            let (cfg, out) = load(&common)?;
            let result = sweep_delta(&cfg)?;
            let mut table = ReportTable::new(
                "delta sweep uniformity",
                &["delta", "epsilon", "sup_E2_tilde", "decay_rate", "flagged"],
            );
            for r in &result.rows {
                table.push(vec![
                    r.delta,
                    r.epsilon,
                    r.sup_e2_tilde,
                    r.decay_rate.unwrap_or(f64::NAN),
                    if r.flagged.is_some() { 1.0 } else { 0.0 },
                ]);
            }
            emit_report(&table, "sweep_delta", &out, &["csv", "json", "svg"], false)?;
            write_json(
                &out.join("sweep_summary.json"),
                &serde_json::json!({
                    "uniformity_factor": result.uniformity_factor,
                    "rate_per_delta_spread": result.rate_per_delta_spread,
                    "gate": cfg.gates.uniformity_factor,
                    "pass": result.pass,
                    "flagged": result.rows.iter()
                        .filter_map(|r| r.flagged.clone())
                        .collect::<Vec<_>>(),
                }),
            )?;
            Ok(result.pass)
        }

        Cmd::Compare { common } => {
            let (cfg, out) = load(&common)?;
            let result = if cfg.experiment.kind == "compare-ns" {
                compare_ns_model(&cfg)?
            } else {
                compare_models(&cfg)?
            };
            let mut table = ReportTable::new(
                &format!("{} vs {}", result.label_a, result.label_b),
                &["delta", "err_L2", "err_max", "flagged"],
            );
            for r in &result.rows {
                table.push(vec![
                    r.delta,
                    r.err_l2,
                    r.err_max,
                    if r.flagged.is_some() { 1.0 } else { 0.0 },
                ]);
            }
            emit_report(&table, "compare", &out, &["csv", "json", "svg"], true)?;
            write_json(
                &out.join("compare_summary.json"),
                &serde_json::json!({
                    "a": result.label_a,
                    "b": result.label_b,
                    "slope": result.slope.map(|s| s.0),
                    "slope_ci": result.slope.map(|s| s.1),
                }),
            )?;
            let pass = if cfg.experiment.kind == "compare-ns" {
                // exploratory gate: error monotone decreasing with delta
                let pts = result.clean_points();
                pts.len() == result.rows.len()
                    && pts.windows(2).all(|w| w[1].1 <= w[0].1)
            } else {
                match result.slope {
                    Some((s, _)) => s >= cfg.gates.slope_min && s <= cfg.gates.slope_max,
                    None => result.rows.iter().all(|r| r.flagged.is_none()),
                }
            };
            Ok(pass)
        }

        Cmd::ExtensionAudit {
            delta_list,
            trials,
            nx,
            ny,
            seed,
            gate,
            out,
        } => {
            let deltas = parse_list(&delta_list)?;
            let mut table = ReportTable::new(
                "extension-operator ratio maxima",
                &["delta", "i", "j", "ratio_plain", "ratio_half"],
            );
            let mut worst = 0.0f64;
            for i in 0..=4usize {
                for j in 0..=(4 - i) {
                    let rows = extension_audit(&deltas, i, j, trials, nx, ny, seed)?;
                    for r in rows {
                        worst = worst.max(r.ratio_plain).max(r.ratio_half.unwrap_or(0.0));
                        table.push(vec![
                            r.delta,
                            r.i as f64,
                            r.j as f64,
                            r.ratio_plain,
                            r.ratio_half.unwrap_or(f64::NAN),
                        ]);
                    }
                }
            }
            emit_report(&table, "extension_audit", &out, &["csv", "json"], false)?;
            println!("extension audit: worst ratio {worst:.6} (gate {gate})");
            Ok(worst <= gate)
        }

        Cmd::KornAudit {
            delta_list,
            trials,
            seed,
            nx,
            ny,
            out,
        } => {
            let deltas = parse_list(&delta_list)?;
            let grid = Grid::new(nx, ny);
            let mut table =
                ReportTable::new("anisotropic Korn ratio maxima", &["delta", "max_ratio"]);
            let mut worst = 0.0f64;
            for (i, &d) in deltas.iter().enumerate() {
                let r = korn_audit(d, trials, seed + i as u64, &grid)?;
                worst = worst.max(r);
                table.push(vec![d, r]);
            }
            emit_report(&table, "korn_audit", &out, &["csv", "json"], false)?;
            let gate = 3.0 + 1e-6;
            println!("korn audit: worst ratio {worst:.8} (gate {gate})");
            Ok(worst <= gate)
        }

        Cmd::EnergyAudit { traj, m, out } => {
            let mut files: Vec<PathBuf> = std::fs::read_dir(&traj)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().map_or(false, |x| x == "tflm"))
                .collect();
            files.sort();
            if files.len() < 3 {
                return Err(Error::Contract(
                    "energy audit needs at least 3 snapshots".into(),
                ));
            }
            let first = Snapshot::read_from(&files[0])?;
            let grid = Grid::new(first.nx, first.ny);
            let params = ScalingParams::from_nondimensional(
                first.delta,
                first.epsilon,
                first.reynolds,
                first.weber,
                first.alpha,
            )?;
            let weights = EnergyWeights::default();
            let mut series = Vec::new();
            for f in &files {
                let snap = Snapshot::read_from(f)?;
                let state = ns_state_of_snapshot(&snap, &grid);
                let rates = state_rates(&state, &params, &grid)?;
                let rep = energy_report(&state, Some(&rates), m, &weights, &params, &grid)?;
                series.push((state.t, rep));
            }
            let audit = energy_audit(&series, m);
            emit_audit(&audit, &out)?;
            println!(
                "energy audit: implied C {:.6}, dissipative fraction {:.3}{}",
                audit.max_implied_c,
                audit.dissipative_fraction,
                if audit.cadence_warning {
                    " (warning: cadence too coarse)"
                } else {
                    ""
                }
            );
            Ok(audit.pass)
        }
    }
}

fn emit_audit(audit: &filmcascade::diagnostics::EnergyAudit, out: &Path) -> Result<()> {
    let mut table = ReportTable::new(
        "energy inequality audit",
        &["t", "dEdt_plus_F", "N", "implied_C"],
    );
    for p in &audit.points {
        table.push(vec![p.t, p.de_dt_plus_f, p.n, p.implied_c]);
    }
    if !table.rows.is_empty() {
        emit_report(&table, "energy_audit", out, &["csv"], false)?;
    } else {
        std::fs::create_dir_all(out)?;
    }
    write_json(
        &out.join("energy_audit_summary.json"),
        &serde_json::json!({
            "m": audit.m,
            "max_implied_c": audit.max_implied_c,
            "dissipative_fraction": audit.dissipative_fraction,
            "cadence_warning": audit.cadence_warning,
            "pass": audit.pass,
        }),
    )?;
    Ok(())
}

fn write_model_snapshots(
    states: &[ModelState],
    n_snap: usize,
    params: &ScalingParams,
    grid: &Grid,
    out: &Path,
) -> Result<()> {
    if n_snap == 0 {
        return Ok(());
    }
    std::fs::create_dir_all(out)?;
    let stride = (states.len() / n_snap).max(1);
    for (i, s) in states.iter().step_by(stride).enumerate() {
        let mut snap = Snapshot::new(grid.nx, grid.ny, s.t, params);
        snap.eta = s.eta.to_grid(grid).data;
        snap.write_to(&out.join(format!("eta_{i:05}.tflm")))?;
    }
    Ok(())
}
