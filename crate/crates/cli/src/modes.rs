//! `meanfield` and `master` modes.

use serde_json::{json, Value};

use rydberg_core::analysis::{dominant_frequency, saturation_average};
use rydberg_core::master::{fit_to_exact, integrate_master, MasterParams, MasterTrajectory, ScaleFit, SingleSiteState};
use rydberg_core::meanfield::{loglog_regression, solve_selfconsistent, MeanFieldSolution};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::{num, pretty, write_file, Manifest, Table};
use crate::sweep::alpha_grid;

/// `α` of a single-point run: explicit, or from `(Ω, C6, N, L)`.
pub fn run_alpha(cfg: &RunConfig) -> CliResult<f64> {
    match cfg.alpha {
        Some(a) => Ok(a),
        None => Ok(cfg.single_point()?.alpha()),
    }
}

fn solution_row(s: &MeanFieldSolution) -> Vec<String> {
    vec![num(s.alpha), num(s.f_r), num(s.a_r), num(s.omega0), num(s.n_block)]
}

/// `meanfield` mode: one `α` when given, otherwise the configured grid.
pub fn run_meanfield(cfg: &RunConfig) -> CliResult<Value> {
    let alphas = match cfg.alpha {
        Some(a) => vec![a],
        None => alpha_grid(cfg),
    };
    let mut table = Table::new(&["alpha", "f_R", "a_R", "omega0", "N_block"]);
    for &a in &alphas {
        table.push(solution_row(&solve_selfconsistent(a, cfg.d, cfg.protocol)?));
    }
    table.write(&cfg.output, "meanfield", &cfg.formats)?;
    let mut manifest = Manifest::new(cfg);
    if alphas.len() >= 3 {
        let (nu, c) = loglog_regression(cfg.d, cfg.protocol, cfg.alpha_min, cfg.alpha_max, cfg.alpha_points)?;
        manifest.set("regression", json!({ "nu": nu, "c": c }));
    }
    manifest.finish(&cfg.output)
}

/// Master trajectory of a config, integrated up to `t_max_tau`.
pub fn integrate(cfg: &RunConfig, alpha: f64, t_max_tau: f64, interval_tau: f64) -> CliResult<(MasterParams, MasterTrajectory)> {
    let mf = solve_selfconsistent(alpha, cfg.d, cfg.protocol)?;
    let params = MasterParams::new(alpha, cfg.d)?
        .with_hole(cfg.correlation_hole(mf.a_r))
        .with_rate_scale(cfg.rate_scale);
    let (_, traj) = integrate_master(SingleSiteState::ground(), &params, t_max_tau, interval_tau)?;
    Ok((params, traj))
}

/// Overlay of a fitted master curve on an exact averaged trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct Overlay {
    pub fit: ScaleFit,
    pub taus: Vec<f64>,
    pub exact: Vec<f64>,
    pub fitted: Vec<f64>,
}

impl Overlay {
    pub fn exact_series(&self) -> Vec<(f64, f64)> {
        self.taus.iter().copied().zip(self.exact.iter().copied()).collect()
    }

    pub fn fitted_series(&self) -> Vec<(f64, f64)> {
        self.taus.iter().copied().zip(self.fitted.iter().copied()).collect()
    }
}

/// Fits `master` onto `exact` and evaluates the fitted curve on the exact grid.
pub fn overlay(master: &[(f64, f64)], exact: &[(f64, f64)]) -> CliResult<Overlay> {
    let fit = fit_to_exact(master, exact)?;
    let taus: Vec<f64> = exact.iter().map(|p| p.0).collect();
    let fitted = fit.apply(master, &taus)?;
    Ok(Overlay { fit, exact: exact.iter().map(|p| p.1).collect(), taus, fitted })
}

/// The master curve is integrated this many times beyond the reference so
/// the time-axis scale can exceed 1.
pub const OVERLAY_SPAN: f64 = 2.0;

/// `master` mode, with an overlay when `reference` names an exact average.
pub fn run_master(cfg: &RunConfig) -> CliResult<Value> {
    let alpha = run_alpha(cfg)?;
    let interval = cfg.to_tau(cfg.sample_interval, alpha);
    let t_max = cfg.to_tau(cfg.t_max, alpha);
    let reference = match &cfg.reference {
        Some(path) => {
            if !path.exists() {
                return Err(CliError::Dependency(format!("exact reference {} not found; run `exact` first", path.display())));
            }
            let t = Table::read(path)?;
            let series: Vec<(f64, f64)> = t.numbers("tau")?.into_iter().zip(t.numbers("f_R")?).collect();
            Some(series)
        }
        None => None,
    };
    let span = match &reference {
        Some(series) => t_max.max(OVERLAY_SPAN * series.last().map_or(0.0, |p| p.0)),
        None => t_max,
    };
    let (params, traj) = integrate(cfg, alpha, span, interval)?;
    let mut table = Table::new(&["tau", "f_R", "trace", "energy", "min_eig"]);
    for s in traj.samples.iter().filter(|s| s.tau <= t_max * (1.0 + 1e-12)) {
        table.push(vec![num(s.tau), num(s.f_r), num(s.trace), num(s.energy), num(s.min_eig)]);
    }
    table.write(&cfg.output, "master", &cfg.formats)?;

    let mut manifest = Manifest::new(cfg);
    let f_star = solve_selfconsistent(alpha, cfg.d, cfg.protocol)?.f_r;
    manifest.set("alpha", json!(alpha));
    manifest.set("hole", json!(format!("{:?}", params.hole)));
    manifest.set("f_R_meanfield", json!(f_star));
    manifest.set("f_R_final", json!(traj.final_state_fraction()));
    manifest.set("positivity_violations", json!(traj.positivity_violations));
    manifest.set("steps", json!(traj.steps));
    manifest.set("max_energy", json!(traj.samples.iter().map(|s| s.energy.abs()).fold(0.0, f64::max)));

    if let Some(exact) = reference {
        let o = overlay(&traj.fraction_series(), &exact)?;
        let mut t = Table::new(&["tau", "f_R_exact", "f_R_master_fitted"]);
        for k in 0..o.taus.len() {
            t.push(vec![num(o.taus[k]), num(o.exact[k]), num(o.fitted[k])]);
        }
        t.write(&cfg.output, "overlay", &cfg.formats)?;
        let window = (cfg.to_tau(cfg.window.0, alpha), cfg.to_tau(cfg.window.1, alpha));
        let mut record = json!({
            "rabi_scale": o.fit.rabi_scale,
            "fR_scale": o.fit.fr_scale,
            "rms": o.fit.rms,
        });
        if let (Ok(e), Ok(m)) = (
            saturation_average(&o.exact_series(), window.0, window.1),
            saturation_average(&o.fitted_series(), window.0, window.1),
        ) {
            record["f_R_sat_exact"] = json!(e.mean);
            record["f_R_sat_master"] = json!(m.mean);
        }
        // Pre-saturation oscillation, searched up to a few collective frequencies.
        let omega_max = 10.0 * alpha * (1.0 / f_star).sqrt();
        if let (Ok(we), Ok(wm)) = (
            dominant_frequency(&o.exact_series(), 0.0, window.0, omega_max),
            dominant_frequency(&o.fitted_series(), 0.0, window.0, omega_max),
        ) {
            record["omega_exact"] = json!(we);
            record["omega_master"] = json!(wm);
        }
        write_file(&cfg.output.join("fit.json"), &pretty(&record))?;
        manifest.set("overlay_fit", record);
    }
    manifest.finish(&cfg.output)
}
