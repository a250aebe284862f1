//! Experiment orchestration: delta sweeps of the free-surface solver,
//! model-vs-model and solver-vs-model error tables with fitted truncation
//! slopes, and deterministic report emission (CSV / JSON / SVG).
//!
//! Every experiment is a pure function of (config, seed): all randomness
//! flows through the seeded generator of the initial-data recipe, per-delta
//! runs share no mutable state, and emitted artifacts are byte-stable.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::Path;

use crate::config::ExperimentConfig;
use crate::diagnostics::{energy_report, EnergyReport, EnergyWeights};
use crate::error::{Error, Result};
use crate::models::{stability_limit, Etdrk4, ModelKind, ModelState};
use crate::nssolver::{compatible_initial_state, default_dt, state_rates, NSState, NsStepper, Scheme};
use crate::params::ScalingParams;
use crate::spectral::{Grid, SurfaceField};

// ---------------------------------------------------------------------------
// initial data
// ---------------------------------------------------------------------------

/// Elevation from the config recipe: explicit modes plus an optional seeded
/// random band. The recipe is delta-independent by design; per-delta runs
/// regenerate their bulk velocities through the compatibility construction.
pub fn initial_elevation(cfg: &ExperimentConfig, nx: usize) -> SurfaceField {
    let init = &cfg.initial;
    let mut modes: Vec<(usize, Complex64)> = init
        .modes
        .iter()
        .map(|&(n, re, im)| (n, Complex64::new(re, im)))
        .collect();
    if init.random_modes > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(init.seed);
        for n in 1..=init.random_modes {
            let re = rng.gen_range(-1.0..1.0) * init.random_amplitude;
            let im = rng.gen_range(-1.0..1.0) * init.random_amplitude;
            modes.push((n, Complex64::new(re, im)));
        }
    }
    let mut merged: Vec<(usize, Complex64)> = Vec::new();
    for (n, c) in modes {
        if n == 0 || n >= nx / 2 {
            continue; // mean handled by the dynamics; keep band-limited
        }
        if let Some(slot) = merged.iter_mut().find(|(m, _)| *m == n) {
            slot.1 += c;
        } else {
            merged.push((n, c));
        }
    }
    SurfaceField::from_modes(nx, &merged)
}

// ---------------------------------------------------------------------------
// sampled runs
// ---------------------------------------------------------------------------

fn scheme_of(cfg: &ExperimentConfig) -> Scheme {
    if cfg.run.scheme == "imex1" {
        Scheme::Imex1
    } else {
        Scheme::CnAb2
    }
}

/// Advance a reduced model, recording the state at `samples + 1` uniformly
/// spaced times covering [0, t_final].
pub fn run_model_sampled(
    kind: ModelKind,
    eta0: &SurfaceField,
    params: &ScalingParams,
    grid: &Grid,
    t_final: f64,
    dt_request: f64,
    samples: usize,
) -> Result<Vec<ModelState>> {
    let samples = samples.max(1);
    let sample_dt = t_final / samples as f64;
    let state0 = ModelState::new(eta0.clone(), *params, kind);
    let dt_target = if dt_request > 0.0 {
        dt_request
    } else {
        0.5 * stability_limit(&state0, grid)
    };
    let per = (sample_dt / dt_target).ceil().max(1.0) as usize;
    let dt = sample_dt / per as f64;
    let stepper = Etdrk4::new(kind, params, grid, dt);
    let mut out = vec![state0.clone()];
    let mut state = state0;
    for _ in 0..samples {
        for _ in 0..per {
            state = stepper.step(&state, grid)?;
        }
        out.push(state.clone());
    }
    Ok(out)
}

/// Advance the free-surface solver likewise, recording `samples + 1` states.
pub fn run_ns_sampled(
    init: &NSState,
    params: &ScalingParams,
    grid: &Grid,
    t_final: f64,
    dt_request: f64,
    samples: usize,
    scheme: Scheme,
) -> Result<Vec<NSState>> {
    let samples = samples.max(1);
    let sample_dt = t_final / samples as f64;
    let dt_target = if dt_request > 0.0 {
        dt_request
    } else {
        default_dt(params, grid)
    };
    let per = (sample_dt / dt_target).ceil().max(1.0) as usize;
    let dt = sample_dt / per as f64;
    let mut stepper = NsStepper::new(grid, params, dt, scheme);
    let mut out = vec![init.clone()];
    let mut state = init.clone();
    for _ in 0..samples {
        for _ in 0..per {
            state = stepper.step(&state, grid)?;
        }
        out.push(state.clone());
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// slope fitting
// ---------------------------------------------------------------------------

/// Ordinary least squares y = a + b x; returns (intercept, slope,
/// stderr of the slope).
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    let n = xs.len();
    if n < 2 || n != ys.len() {
        return Err(Error::Contract("linear fit needs at least two points".into()));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Contract("linear fit: degenerate abscissae".into()));
    }
    let b = sxy / sxx;
    let a = my - b * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - (a + b * x);
            r * r
        })
        .sum();
    let se = if n > 2 {
        (ss_res / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok((a, b, se))
}

/// Fitted slope with confidence half-width of log(err) against log(delta).
/// Requires at least 4 points; the coarsest delta is dropped when its
/// residual exceeds three residual standard deviations (the asymptotic
/// regime routinely excludes it).
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    if points.len() < 4 {
        return Err(Error::Contract(
            "slope fit requires at least 4 delta points".into(),
        ));
    }
    if points.iter().any(|&(d, e)| d <= 0.0 || e <= 0.0) {
        return Err(Error::Contract(
            "slope fit requires positive deltas and errors".into(),
        ));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let (a, b, se) = linear_fit(&xs, &ys)?;
    // residual screen on the coarsest (largest-delta) point
    let res: Vec<f64> = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| y - (a + b * x))
        .collect();
    let sigma = (res.iter().map(|r| r * r).sum::<f64>() / res.len() as f64).sqrt();
    let coarse = points
        .iter()
        .enumerate()
        .max_by(|u, v| u.1 .0.total_cmp(&v.1 .0))
        .map(|(i, _)| i)
        .unwrap();
    if points.len() > 4 && sigma > 0.0 && res[coarse].abs() > 3.0 * sigma {
        let trimmed: Vec<(f64, f64)> = points
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != coarse)
            .map(|(_, p)| *p)
            .collect();
        return fit_loglog_slope(&trimmed);
    }
    Ok((b, 2.0 * se))
}

// ---------------------------------------------------------------------------
// delta sweep
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub delta: f64,
    pub epsilon: f64,
    /// sup over recorded times of the modified second-order energy
    pub sup_e2_tilde: f64,
    /// fitted exponential decay rate of E2 after the initial transient
    pub decay_rate: Option<f64>,
    /// set when the run blew up; the sweep continues
    pub flagged: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// max/min spread of sup E2-tilde across clean rows
    pub uniformity_factor: Option<f64>,
    /// max/min spread of decay_rate/delta across clean rows with a fit
    pub rate_per_delta_spread: Option<f64>,
    pub pass: bool,
}

fn sweep_one(cfg: &ExperimentConfig, delta: f64, grid: &Grid) -> SweepRow {
    let run = || -> Result<(f64, Option<f64>)> {
        let params = cfg.params_at_delta(delta)?;
        let eta0 = initial_elevation(cfg, grid.nx);
        let init = compatible_initial_state(&eta0, &params, grid)?;
        // uniform estimates hold up to t ~ 1/epsilon; cap the horizon there
        let t_final = cfg.run.t_final.min(if params.epsilon > 0.0 {
            1.0 / params.epsilon
        } else {
            f64::INFINITY
        });
        let samples = cfg.experiment.samples.max(8);
        let states = run_ns_sampled(
            &init,
            &params,
            grid,
            t_final,
            cfg.run.dt,
            samples,
            scheme_of(cfg),
        )?;
        let weights = EnergyWeights::default();
        let burn_in = cfg.run.burn_in;
        let mut sup = 0.0f64;
        let mut e2_series: Vec<(f64, f64)> = Vec::new();
        for s in &states {
            if s.t < burn_in {
                continue;
            }
            let rates = state_rates(s, &params, grid)?;
            let rep = energy_report(s, Some(&rates), 2, &weights, &params, grid)?;
            sup = sup.max(rep.em_tilde);
            e2_series.push((s.t, rep.em));
        }
        // decay fit on the latter 3/4 (skip any remaining transient)
        let tail: Vec<(f64, f64)> = e2_series
            .iter()
            .skip(e2_series.len() / 4)
            .filter(|(_, e)| *e > 0.0)
            .copied()
            .collect();
        let rate = if tail.len() >= 4 {
            let ts: Vec<f64> = tail.iter().map(|p| p.0).collect();
            let ls: Vec<f64> = tail.iter().map(|p| p.1.ln()).collect();
            linear_fit(&ts, &ls).ok().map(|(_, b, _)| -b)
        } else {
            None
        };
        Ok((sup, rate))
    };
    match run() {
        Ok((sup, rate)) => SweepRow {
            delta,
            epsilon: cfg.params_at_delta(delta).map(|p| p.epsilon).unwrap_or(f64::NAN),
            sup_e2_tilde: sup,
            decay_rate: rate,
            flagged: None,
        },
        Err(e) => SweepRow {
            delta,
            epsilon: f64::NAN,
            sup_e2_tilde: f64::NAN,
            decay_rate: None,
            flagged: Some(e.to_string()),
        },
    }
}

/// Run the free-surface solver at every delta of the list from the shared
/// initial-data recipe and tabulate the uniformity of sup_t E2-tilde.
pub fn sweep_delta(cfg: &ExperimentConfig) -> Result<SweepResult> {
    let grid = Grid::new(cfg.grid.nx, cfg.grid.ny);
    let deltas = cfg.experiment.delta_list.clone();
    // per-delta runs are independent; order of completion cannot matter
    let rows: Vec<SweepRow> = std::thread::scope(|scope| {
        let handles: Vec<_> = deltas
            .iter()
            .map(|&d| {
                let gref = &grid;
                scope.spawn(move || sweep_one(cfg, d, gref))
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });

    let clean: Vec<&SweepRow> = rows.iter().filter(|r| r.flagged.is_none()).collect();
    let sups: Vec<f64> = clean.iter().map(|r| r.sup_e2_tilde).collect();
    let uniformity = spread(&sups);
    let rates: Vec<f64> = clean
        .iter()
        .filter_map(|r| r.decay_rate.map(|x| x / r.delta))
        .filter(|x| *x > 0.0)
        .collect();
    let rate_spread = if rates.len() == clean.len() && !rates.is_empty() {
        spread(&rates)
    } else {
        None
    };
    let pass = rows.iter().all(|r| r.flagged.is_none())
        && uniformity.map_or(false, |u| u < cfg.gates.uniformity_factor);
    Ok(SweepResult {
        rows,
        uniformity_factor: uniformity,
        rate_per_delta_spread: rate_spread,
        pass,
    })
}

/// max/min of a positive list; None when empty or touching zero.
fn spread(vals: &[f64]) -> Option<f64> {
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().copied().fold(0.0f64, f64::max);
    if vals.is_empty() || !(lo > 0.0) || !hi.is_finite() {
        if vals.iter().all(|&v| v == 0.0) && !vals.is_empty() {
            return Some(1.0); // identically zero sweep is trivially uniform
        }
        return None;
    }
    Some(hi / lo)
}

// ---------------------------------------------------------------------------
// comparisons
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct CompareRow {
    pub delta: f64,
    /// sup over synchronized snapshots of the surface L2 norm of the
    /// elevation difference
    pub err_l2: f64,
    /// sup over snapshots of the pointwise maximum difference
    pub err_max: f64,
    pub flagged: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ComparisonResult {
    pub label_a: String,
    pub label_b: String,
    pub rows: Vec<CompareRow>,
    /// log-log slope of err_l2 against delta with confidence half-width;
    /// only fitted when at least 4 clean delta points exist
    pub slope: Option<(f64, f64)>,
}

impl ComparisonResult {
    pub fn clean_points(&self) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.flagged.is_none())
            .map(|r| (r.delta, r.err_l2))
            .collect()
    }
}

fn eta_errors(etas_a: &[SurfaceField], etas_b: &[SurfaceField], grid: &Grid) -> (f64, f64) {
    let mut e2 = 0.0f64;
    let mut emax = 0.0f64;
    for (a, b) in etas_a.iter().zip(etas_b) {
        let diff = a.sub(b);
        e2 = e2.max(diff.sobolev_norm(0.0));
        emax = emax.max(diff.to_grid(grid).max_abs());
    }
    (e2, emax)
}

/// Integrate two reduced models from the same elevation and tabulate the
/// time-synchronized elevation errors per delta, with the fitted truncation
/// slope when enough points are available.
pub fn compare_models(cfg: &ExperimentConfig) -> Result<ComparisonResult> {
    let kind_a = ModelKind::parse(&cfg.experiment.model_a)?;
    let kind_b = ModelKind::parse(&cfg.experiment.model_b)?;
    let grid = Grid::new(cfg.grid.nx, cfg.grid.ny);
    let deltas = cfg.experiment.delta_list.clone();
    let rows: Vec<CompareRow> = std::thread::scope(|scope| {
        let handles: Vec<_> = deltas
            .iter()
            .map(|&d| {
                let gref = &grid;
                scope.spawn(move || {
                    let run = || -> Result<(f64, f64)> {
                        let params = cfg.params_at_delta(d)?;
                        let eta0 = initial_elevation(cfg, gref.nx);
                        let sa = run_model_sampled(
                            kind_a,
                            &eta0,
                            &params,
                            gref,
                            cfg.run.t_final,
                            cfg.run.dt,
                            cfg.experiment.samples,
                        )?;
                        let sb = run_model_sampled(
                            kind_b,
                            &eta0,
                            &params,
                            gref,
                            cfg.run.t_final,
                            cfg.run.dt,
                            cfg.experiment.samples,
                        )?;
                        let ea: Vec<SurfaceField> = sa.into_iter().map(|s| s.eta).collect();
                        let eb: Vec<SurfaceField> = sb.into_iter().map(|s| s.eta).collect();
                        Ok(eta_errors(&ea, &eb, gref))
                    };
                    match run() {
                        Ok((e2, emax)) => CompareRow {
                            delta: d,
                            err_l2: e2,
                            err_max: emax,
                            flagged: None,
                        },
                        Err(e) => CompareRow {
                            delta: d,
                            err_l2: f64::NAN,
                            err_max: f64::NAN,
                            flagged: Some(e.to_string()),
                        },
                    }
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });

    let mut result = ComparisonResult {
        label_a: kind_a.name().into(),
        label_b: kind_b.name().into(),
        rows,
        slope: None,
    };
    let pts = result.clean_points();
    if pts.len() >= 4 && pts.iter().all(|&(_, e)| e > 0.0) {
        result.slope = fit_loglog_slope(&pts).ok();
    }
    Ok(result)
}

/// Free-surface solver against a reduced model (model_a), initialized from
/// the same elevation; exploratory — only monotonicity of the error in
/// delta is gated downstream, no convergence order is asserted.
pub fn compare_ns_model(cfg: &ExperimentConfig) -> Result<ComparisonResult> {
    let kind = ModelKind::parse(&cfg.experiment.model_a)?;
    let grid = Grid::new(cfg.grid.nx, cfg.grid.ny);
    let deltas = cfg.experiment.delta_list.clone();
    let rows: Vec<CompareRow> = std::thread::scope(|scope| {
        let handles: Vec<_> = deltas
            .iter()
            .map(|&d| {
                let gref = &grid;
                scope.spawn(move || {
                    let run = || -> Result<(f64, f64)> {
                        let params = cfg.params_at_delta(d)?;
                        let eta0 = initial_elevation(cfg, gref.nx);
                        let init = compatible_initial_state(&eta0, &params, gref)?;
                        let t_final = cfg.run.t_final.min(if params.epsilon > 0.0 {
                            1.0 / params.epsilon
                        } else {
                            f64::INFINITY
                        });
                        let ns = run_ns_sampled(
                            &init,
                            &params,
                            gref,
                            t_final,
                            cfg.run.dt,
                            cfg.experiment.samples,
                            scheme_of(cfg),
                        )?;
                        let md = run_model_sampled(
                            kind,
                            &eta0,
                            &params,
                            gref,
                            t_final,
                            0.0,
                            cfg.experiment.samples,
                        )?;
                        let ea: Vec<SurfaceField> = ns.into_iter().map(|s| s.eta).collect();
                        let eb: Vec<SurfaceField> = md.into_iter().map(|s| s.eta).collect();
                        Ok(eta_errors(&ea, &eb, gref))
                    };
                    match run() {
                        Ok((e2, emax)) => CompareRow {
                            delta: d,
                            err_l2: e2,
                            err_max: emax,
                            flagged: None,
                        },
                        Err(e) => CompareRow {
                            delta: d,
                            err_l2: f64::NAN,
                            err_max: f64::NAN,
                            flagged: Some(e.to_string()),
                        },
                    }
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });

    let mut result = ComparisonResult {
        label_a: "navier-stokes".into(),
        label_b: kind.name().into(),
        rows,
        slope: None,
    };
    let pts = result.clean_points();
    if pts.len() >= 4 && pts.iter().all(|&(_, e)| e > 0.0) {
        result.slope = fit_loglog_slope(&pts).ok();
    }
    Ok(result)
}

// ---------------------------------------------------------------------------
// report emission
// ---------------------------------------------------------------------------

/// Plain numeric table with named columns; the unit every emitter consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportTable {
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl ReportTable {
    pub fn new(title: &str, columns: &[&str]) -> Self {
        ReportTable {
            title: title.into(),
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row arity mismatch");
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String> {
        if self.rows.is_empty() {
            return Err(Error::Contract("cannot emit an empty table".into()));
        }
        let mut s = String::new();
        s.push_str(&self.columns.join(","));
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.12e}")).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        Ok(s)
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Contract("empty CSV".into()))?;
        let columns: Vec<String> = header.split(',').map(|s| s.to_string()).collect();
        let mut rows = Vec::new();
        for line in lines {
            if line.trim().is_empty() {
                continue;
            }
            let row: Vec<f64> = line
                .split(',')
                .map(|c| {
                    c.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Contract(format!("bad CSV cell {c:?}: {e}")))
                })
                .collect::<Result<_>>()?;
            if row.len() != columns.len() {
                return Err(Error::Contract("ragged CSV row".into()));
            }
            rows.push(row);
        }
        Ok(ReportTable {
            title: String::new(),
            columns,
            rows,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        if self.rows.is_empty() {
            return Err(Error::Contract("cannot emit an empty table".into()));
        }
        let obj = serde_json::json!({
            "title": self.title,
            "columns": self.columns,
            "rows": self.rows,
        });
        serde_json::to_string_pretty(&obj).map_err(|e| Error::Contract(e.to_string()))
    }

    /// Line plot of every column against the first; log-log uses base-10
    /// logarithms of absolute values (non-positive cells are skipped).
    pub fn to_svg(&self, loglog: bool) -> Result<String> {
        if self.rows.is_empty() {
            return Err(Error::Contract("cannot emit an empty table".into()));
        }
        let (w, h) = (720.0, 480.0);
        let (ml, mr, mt, mb) = (70.0, 150.0, 40.0, 50.0);
        let tx = |v: f64| if loglog { v.abs().log10() } else { v };
        let series: Vec<(String, Vec<(f64, f64)>)> = (1..self.columns.len())
            .map(|j| {
                let pts: Vec<(f64, f64)> = self
                    .rows
                    .iter()
                    .filter(|r| !loglog || (r[0] > 0.0 && r[j] > 0.0))
                    .filter(|r| r[0].is_finite() && r[j].is_finite())
                    .map(|r| (tx(r[0]), tx(r[j])))
                    .collect();
                (self.columns[j].clone(), pts)
            })
            .collect();
        let all: Vec<(f64, f64)> = series.iter().flat_map(|(_, p)| p.iter().copied()).collect();
        if all.is_empty() {
            return Err(Error::Contract("no plottable points".into()));
        }
        let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for &(x, y) in &all {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if x1 == x0 {
            x1 = x0 + 1.0;
        }
        if y1 == y0 {
            y1 = y0 + 1.0;
        }
        let px = |x: f64| ml + (x - x0) / (x1 - x0) * (w - ml - mr);
        let py = |y: f64| h - mb - (y - y0) / (y1 - y0) * (h - mt - mb);
        let palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
        let mut s = String::new();
        s.push_str(&format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
        ));
        s.push_str(&format!(
            "<text x=\"{:.1}\" y=\"24\" font-size=\"16\" text-anchor=\"middle\">{}</text>\n",
            (ml + w - mr) / 2.0,
            xml_escape(&self.title)
        ));
        // axes
        s.push_str(&format!(
            "<line x1=\"{ml}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
            h - mb,
            w - mr,
            h - mb
        ));
        s.push_str(&format!(
            "<line x1=\"{ml}\" y1=\"{mt}\" x2=\"{ml}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
            h - mb
        ));
        let fmt_tick = |v: f64| {
            if loglog {
                format!("1e{v:.2}")
            } else {
                format!("{v:.3}")
            }
        };
        for i in 0..=4 {
            let fx = x0 + (x1 - x0) * i as f64 / 4.0;
            let fy = y0 + (y1 - y0) * i as f64 / 4.0;
            s.push_str(&format!(
                "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
                px(fx),
                h - mb + 18.0,
                fmt_tick(fx)
            ));
            s.push_str(&format!(
                "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"end\">{}</text>\n",
                ml - 6.0,
                py(fy) + 4.0,
                fmt_tick(fy)
            ));
        }
        s.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"13\" text-anchor=\"middle\">{}</text>\n",
            (ml + w - mr) / 2.0,
            h - 8.0,
            xml_escape(&self.columns[0])
        ));
        for (i, (name, pts)) in series.iter().enumerate() {
            let color = palette[i % palette.len()];
            if pts.len() > 1 {
                let path: Vec<String> = pts
                    .iter()
                    .enumerate()
                    .map(|(k, &(x, y))| {
                        format!("{}{:.2},{:.2}", if k == 0 { "M" } else { "L" }, px(x), py(y))
                    })
                    .collect();
                s.push_str(&format!(
                    "<path d=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
                    path.join(" ")
                ));
            }
            for &(x, y) in pts {
                s.push_str(&format!(
                    "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\"/>\n",
                    px(x),
                    py(y)
                ));
            }
            // legend
            let ly = mt + 18.0 * i as f64;
            s.push_str(&format!(
                "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"12\" height=\"12\" fill=\"{color}\"/>\n",
                w - mr + 10.0,
                ly
            ));
            s.push_str(&format!(
                "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\">{}</text>\n",
                w - mr + 28.0,
                ly + 10.0,
                xml_escape(name)
            ));
        }
        s.push_str("</svg>\n");
        Ok(s)
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Write a table in the requested formats under `dir` as `<name>.<ext>`.
pub fn emit_report(
    table: &ReportTable,
    name: &str,
    dir: &Path,
    formats: &[&str],
    loglog: bool,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for f in formats {
        let (content, ext) = match *f {
            "csv" => (table.to_csv()?, "csv"),
            "json" => (table.to_json()?, "json"),
            "svg" => (table.to_svg(loglog)?, "svg"),
            other => return Err(Error::Config(format!("unknown report format {other:?}"))),
        };
        std::fs::write(dir.join(format!("{name}.{ext}")), content)?;
    }
    Ok(())
}

/// Per-snapshot diagnostics of a free-surface run, in the CSV layout the
/// `simulate-ns` command emits.
pub fn ns_diagnostics_table(
    states: &[NSState],
    params: &ScalingParams,
    grid: &Grid,
) -> Result<(ReportTable, Vec<(f64, EnergyReport)>)> {
    let weights = EnergyWeights::default();
    let mut table = ReportTable::new(
        "free-surface run diagnostics",
        &[
            "t",
            "E0",
            "F0",
            "E2",
            "F2",
            "N2",
            "div_residual",
            "mass",
            "max_eta",
        ],
    );
    let mut series = Vec::new();
    for s in states {
        let rates = state_rates(s, params, grid)?;
        let rep = energy_report(s, Some(&rates), 2, &weights, params, grid)?;
        let div = s.u.dx(grid, 1).add(&s.v.dy(grid, 1)).l2_norm(grid);
        let row = s.eta.to_grid(grid);
        table.push(vec![
            s.t,
            rep.e0,
            rep.f0,
            rep.em,
            rep.fm,
            rep.nm,
            div,
            row.mean(),
            row.max_abs(),
        ]);
        series.push((s.t, rep));
    }
    Ok((table, series))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentConfig;

    fn cfg(text: &str) -> ExperimentConfig {
        ExperimentConfig::from_str(text).unwrap()
    }

    const BASE: &str = r#"
[params]
delta = 0.1
epsilon = 0.1
reynolds = 0.9
weber = 1.0
alpha = 0.7853981633974483

[grid]
nx = 32
ny = 24
"#;

    #[test]
    fn initial_elevation_is_deterministic_and_band_limited() {
        let c = cfg(&format!(
            "{BASE}\n[initial]\nmodes = []\nrandom_modes = 3\nrandom_amplitude = 0.01\nseed = 9\n"
        ));
        let a = initial_elevation(&c, 32);
        let b = initial_elevation(&c, 32);
        for (x, y) in a.coeffs.iter().zip(&b.coeffs) {
            assert_eq!(x, y);
        }
        assert!(a.coeffs[0].norm() == 0.0, "mean mode must stay zero");
    }

    #[test]
    fn same_model_comparison_is_identically_zero() {
        let c = cfg(&format!(
            "{BASE}
[experiment]
kind = \"compare\"
delta_list = [0.2, 0.1]
model_a = \"burgers\"
model_b = \"burgers\"
samples = 4

[run]
t_final = 0.05
"
        ));
        let r = compare_models(&c).unwrap();
        for row in &r.rows {
            assert!(row.flagged.is_none());
            assert!(row.err_l2 == 0.0 && row.err_max == 0.0, "{row:?}");
        }
        assert!(r.slope.is_none(), "no fit with fewer than 4 points");
    }

    #[test]
    fn zero_initial_data_sweep_is_trivially_uniform() {
        let c = cfg(&format!(
            "{BASE}
[initial]
modes = []

[experiment]
kind = \"sweep-delta\"
delta_list = [0.2, 0.1]
samples = 2

[run]
t_final = 0.02
"
        ));
        let r = sweep_delta(&c).unwrap();
        for row in &r.rows {
            assert!(row.flagged.is_none(), "{row:?}");
            assert!(row.sup_e2_tilde.abs() < 1e-20, "{row:?}");
        }
        assert_eq!(r.uniformity_factor, Some(1.0));
        assert!(r.pass);
    }

    #[test]
    fn slope_fit_recovers_synthetic_order() {
        let pts: Vec<(f64, f64)> = [0.2, 0.1, 0.05, 0.025]
            .iter()
            .map(|&d: &f64| (d, 3.7 * d * d))
            .collect();
        let (slope, ci) = fit_loglog_slope(&pts).unwrap();
        assert!((slope - 2.0).abs() < 1e-10, "slope {slope}");
        assert!(ci < 1e-8);
        assert!(fit_loglog_slope(&pts[..3]).is_err(), "needs >= 4 points");
    }

    #[test]
    fn report_emission_is_deterministic_and_round_trips() {
        let mut t = ReportTable::new("demo", &["delta", "err"]);
        t.push(vec![0.2, 1.25e-3]);
        t.push(vec![0.1, 3.1e-4]);
        let csv1 = t.to_csv().unwrap();
        let csv2 = t.to_csv().unwrap();
        assert_eq!(csv1, csv2);
        assert_eq!(t.to_svg(true).unwrap(), t.to_svg(true).unwrap());
        assert_eq!(t.to_json().unwrap(), t.to_json().unwrap());

        let back = ReportTable::from_csv(&csv1).unwrap();
        assert_eq!(back.columns, t.columns);
        for (a, b) in back.rows.iter().flatten().zip(t.rows.iter().flatten()) {
            assert_eq!(a, b, "CSV numeric payload must round-trip exactly");
        }

        let empty = ReportTable::new("none", &["x"]);
        assert!(empty.to_csv().is_err());
        assert!(empty.to_json().is_err());
        assert!(empty.to_svg(false).is_err());
    }

    #[test]
    fn svg_has_axes_and_legend() {
        let mut t = ReportTable::new("plot", &["delta", "errA", "errB"]);
        t.push(vec![0.2, 1e-2, 2e-2]);
        t.push(vec![0.1, 2.5e-3, 1e-2]);
        t.push(vec![0.05, 6e-4, 5e-3]);
        let svg = t.to_svg(true).unwrap();
        assert!(svg.contains("<line"), "axes present");
        assert!(svg.contains("errA") && svg.contains("errB"), "legend present");
        assert!(svg.contains("<path"), "line series present");
    }
}
