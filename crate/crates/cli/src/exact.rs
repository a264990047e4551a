//! Disorder-averaged exact runs.

use std::path::Path;

use serde_json::{json, Value};

use rydberg_core::analysis::{disorder_average, saturation_average};
use rydberg_core::basis::TruncatedBasis;
use rydberg_core::dynamics::{default_time_step, Drive, Hamiltonian, Rk4, StateVector, TrajectorySample};
use rydberg_core::geometry::{realization_seed, AtomEnsemble, InteractionTable};
use rydberg_core::meanfield::solve_selfconsistent;

use crate::config::{Cutoff, PhysicalPoint, RunConfig};
use crate::error::{CliError, CliResult};
use crate::output::{num, Manifest, Table};
use crate::pool::ordered_map;

/// Sampling grid and saturation window in `τ` for one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    pub interval: f64,
    pub samples: usize,
    pub window: (f64, f64),
}

impl TimeGrid {
    pub fn new(cfg: &RunConfig, alpha: f64) -> CliResult<Self> {
        let samples = (cfg.t_max / cfg.sample_interval).round() as usize;
        if samples == 0 {
            return Err(CliError::Config("t_max must hold at least one sample interval".into()));
        }
        Ok(Self {
            interval: cfg.to_tau(cfg.sample_interval, alpha),
            samples,
            window: (cfg.to_tau(cfg.window.0, alpha), cfg.to_tau(cfg.window.1, alpha)),
        })
    }

    pub fn t_max(&self) -> f64 {
        self.samples as f64 * self.interval
    }
}

/// `E_C` in the units of `Omega` and `C6`.
pub fn resolve_cutoff(cfg: &RunConfig, point: &PhysicalPoint) -> CliResult<f64> {
    Ok(match cfg.cutoff {
        Cutoff::Auto { factor } => {
            let mf = solve_selfconsistent(point.alpha(), point.d, cfg.protocol)?;
            // a_r is in units of n^{-1/d}, so n a_R^d = a_r^d.
            factor * point.omega * mf.a_r.powi(point.d as i32).sqrt()
        }
        Cutoff::Infinite => f64::INFINITY,
        Cutoff::Value(v) => v,
    })
}

/// One propagated disorder realization.
#[derive(Clone, Debug)]
pub struct RealizationRun {
    pub index: usize,
    pub seed: u64,
    pub basis_size: usize,
    pub max_excitations: u32,
    pub dt: f64,
    pub steps: usize,
    pub max_norm_drift: f64,
    pub renormalizations: usize,
    pub energy_drift: f64,
    pub samples: Vec<TrajectorySample>,
}

impl RealizationRun {
    pub fn fraction_series(&self) -> Vec<(f64, f64)> {
        self.samples.iter().map(|s| (s.tau, s.f_r)).collect()
    }

    pub fn manifest_entry(&self, saturation: Option<f64>) -> Value {
        json!({
            "index": self.index,
            "seed": self.seed,
            "basis_size": self.basis_size,
            "max_excitations": self.max_excitations,
            "dt": self.dt,
            "steps": self.steps,
            "max_norm_drift": self.max_norm_drift,
            "renormalizations": self.renormalizations,
            "energy_drift": self.energy_drift,
            "f_R_sat": saturation,
        })
    }
}

pub fn ensemble_for(point: &PhysicalPoint, master_seed: u64, k: usize) -> CliResult<AtomEnsemble> {
    let seed = realization_seed(master_seed, k as u64);
    Ok(AtomEnsemble::sample(point.atoms, point.box_length, point.d, seed)?)
}

/// Propagates the all-ground state of one ensemble.
///
/// The step is shrunk so that an integer number of steps fits each sample
/// interval; sample times are written as exact multiples of the interval.
pub fn run_realization(
    index: usize,
    point: &PhysicalPoint,
    ensemble: &AtomEnsemble,
    cutoff: f64,
    cfg: &RunConfig,
    grid: &TimeGrid,
) -> CliResult<RealizationRun> {
    let table = InteractionTable::new(ensemble, point.c6)?;
    let basis = TruncatedBasis::build_with_budget(&table, cutoff, cfg.max_states)?;
    let h = Hamiltonian::new(&basis, Drive { omega: point.omega, delta: point.delta }, point.energy_unit());
    let dt0 = cfg.dt.unwrap_or_else(|| default_time_step(&h, cfg.dt_factor));
    let substeps = ((grid.interval / dt0) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let dt = grid.interval / substeps as f64;
    let mut rk = Rk4::new(&h, dt)?;
    let mut psi = StateVector::all_ground(&basis);
    let traj = rk.propagate(&mut psi, grid.samples * substeps, substeps)?;
    let energy_drift = traj.energy_drift();
    let samples = traj
        .samples
        .into_iter()
        .enumerate()
        .map(|(j, s)| TrajectorySample { tau: j as f64 * grid.interval, ..s })
        .collect();
    Ok(RealizationRun {
        index,
        seed: ensemble.seed(),
        basis_size: basis.len(),
        max_excitations: basis.max_excitations(),
        dt,
        steps: traj.steps,
        max_norm_drift: traj.max_norm_drift,
        renormalizations: traj.renormalizations,
        energy_drift,
        samples,
    })
}

/// Sample-wise mean over realizations.
pub fn average_trajectory(runs: &[RealizationRun]) -> Vec<TrajectorySample> {
    let m = runs.len() as f64;
    let len = runs.iter().map(|r| r.samples.len()).min().unwrap_or(0);
    (0..len)
        .map(|j| {
            let mut acc = TrajectorySample { tau: runs[0].samples[j].tau, f_r: 0.0, norm: 0.0, energy: 0.0 };
            for r in runs {
                let s = &r.samples[j];
                acc.f_r += s.f_r;
                acc.norm += s.norm;
                acc.energy += s.energy;
            }
            acc.f_r /= m;
            acc.norm /= m;
            acc.energy /= m;
            acc
        })
        .collect()
}

pub fn trajectory_table(samples: &[TrajectorySample]) -> Table {
    let mut t = Table::new(&["tau", "f_R", "norm", "energy"]);
    for s in samples {
        t.push(vec![num(s.tau), num(s.f_r), num(s.norm), num(s.energy)]);
    }
    t
}

/// Saturated fraction of a set of realizations: mean over the window per
/// realization, then mean and standard error over realizations (window
/// standard error for a single realization).
#[derive(Clone, Debug, PartialEq)]
pub struct Saturation {
    pub per_realization: Vec<f64>,
    pub mean: f64,
    pub stderr: f64,
}

pub fn saturation(runs: &[RealizationRun], grid: &TimeGrid) -> CliResult<Saturation> {
    let windows = runs
        .iter()
        .map(|r| saturation_average(&r.fraction_series(), grid.window.0, grid.window.1))
        .collect::<Result<Vec<_>, _>>()?;
    let per_realization: Vec<f64> = windows.iter().map(|w| w.mean).collect();
    let (mean, stderr) = if per_realization.len() >= 2 {
        let avg = disorder_average(&per_realization)?;
        (avg.mean, avg.stderr)
    } else {
        (windows[0].mean, windows[0].stderr)
    };
    Ok(Saturation { per_realization, mean, stderr })
}

/// Realizations `0..cfg.realizations` of one point at one cutoff, in parallel.
pub fn run_point(cfg: &RunConfig, point: &PhysicalPoint, cutoff: f64, grid: &TimeGrid) -> CliResult<Vec<RealizationRun>> {
    ordered_map(cfg.realizations, cfg.threads, |k| {
        let ensemble = ensemble_for(point, cfg.master_seed, k)?;
        run_realization(k, point, &ensemble, cutoff, cfg, grid)
    })
    .into_iter()
    .collect()
}

pub fn point_record(point: &PhysicalPoint) -> Value {
    json!({
        "d": point.d,
        "N": point.atoms,
        "C6": point.c6,
        "Omega": point.omega,
        "Delta": point.delta,
        "L": point.box_length,
        "density": point.density(),
        "E0": point.energy_unit(),
        "alpha": point.alpha(),
    })
}

/// `exact` mode: per-realization trajectories, the disorder average and a manifest.
pub fn run_exact(cfg: &RunConfig) -> CliResult<Value> {
    let point = cfg.single_point()?;
    let grid = TimeGrid::new(cfg, point.alpha())?;
    let cutoff = resolve_cutoff(cfg, &point)?;
    let mut manifest = Manifest::new(cfg);
    let runs = run_point(cfg, &point, cutoff, &grid)?;
    let dir = &cfg.output;
    for r in &runs {
        trajectory_table(&r.samples).write(dir, &format!("realization_{:03}", r.index), &cfg.formats)?;
        let ensemble = ensemble_for(&point, cfg.master_seed, r.index)?;
        crate::output::write_file(&dir.join(format!("ensemble_{:03}.txt", r.index)), &ensemble.to_record())?;
    }
    let average = average_trajectory(&runs);
    trajectory_table(&average).write(dir, "average", &cfg.formats)?;
    manifest.set("point", point_record(&point));
    manifest.set("E_C", json!(num(cutoff)));
    manifest.set("time_grid", json!({ "interval_tau": grid.interval, "t_max_tau": grid.t_max(), "window_tau": [grid.window.0, grid.window.1] }));
    if grid.window.1 <= grid.t_max() * (1.0 + 1e-12) {
        let sat = saturation(&runs, &grid)?;
        manifest.set(
            "realizations",
            Value::Array(runs.iter().zip(&sat.per_realization).map(|(r, s)| r.manifest_entry(Some(*s))).collect()),
        );
        manifest.set("f_R_sat", json!(sat.mean));
        manifest.set("f_R_sat_stderr", json!(sat.stderr));
    }
    manifest.set("max_energy_drift", json!(runs.iter().map(|r| r.energy_drift).fold(0.0, f64::max)));
    manifest.set("max_norm_drift", json!(runs.iter().map(|r| r.max_norm_drift).fold(0.0, f64::max)));
    manifest.finish(dir)
}

/// `replay` mode: re-runs a single stored ensemble.
pub fn run_replay(cfg: &RunConfig) -> CliResult<Value> {
    let path = cfg.ensemble.as_deref().ok_or_else(|| CliError::Dependency("replay needs ensemble = <record file>".into()))?;
    let ensemble = read_ensemble(path)?;
    if cfg.c6.len() != 1 {
        return Err(CliError::Config("replay takes a single C6".into()));
    }
    let point = PhysicalPoint {
        d: ensemble.dim(),
        atoms: ensemble.len(),
        c6: cfg.c6[0],
        omega: cfg.omega,
        delta: cfg.delta,
        box_length: ensemble.box_length(),
    };
    let grid = TimeGrid::new(cfg, point.alpha())?;
    let cutoff = resolve_cutoff(cfg, &point)?;
    let mut manifest = Manifest::new(cfg);
    let run = run_realization(0, &point, &ensemble, cutoff, cfg, &grid)?;
    trajectory_table(&run.samples).write(&cfg.output, "replay", &cfg.formats)?;
    manifest.set("point", point_record(&point));
    manifest.set("E_C", json!(num(cutoff)));
    let sat = saturation(std::slice::from_ref(&run), &grid).ok().map(|s| s.mean);
    manifest.set("realization", run.manifest_entry(sat));
    manifest.finish(&cfg.output)
}

pub fn read_ensemble(path: &Path) -> CliResult<AtomEnsemble> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(AtomEnsemble::from_record(&text)?)
}
