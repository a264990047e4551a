//! Parameter sweeps, the `E_C` convergence ladder and power-law fits.

use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use rydberg_core::analysis::{convergence_report, powerlaw_fit, PowerLawFit, SweepPoint};
use rydberg_core::meanfield::solve_selfconsistent;

use crate::config::{Engine, PhysicalPoint, RunConfig};
use crate::error::{CliError, CliResult};
use crate::exact::{point_record, resolve_cutoff, run_point, saturation, TimeGrid};
use crate::output::{num, pretty, write_atomic, Manifest, Table};

pub const SWEEP_HEADER: [&str; 7] = ["alpha", "f_R_sat", "stderr", "N", "C6", "E_C", "converged"];

/// Outcome of one `(N, C6)` point including its ladder.
#[derive(Clone, Debug, PartialEq)]
pub struct LadderPoint {
    pub point: SweepPoint,
    /// Saturated fraction at `E_C` (the reported value is from `2 E_C`).
    pub coarse: f64,
    pub relative_change: f64,
    pub per_realization: Vec<f64>,
    pub max_basis: usize,
}

impl LadderPoint {
    fn to_json(&self, key: &str) -> Value {
        let p = &self.point;
        json!({
            "key": key,
            "alpha": p.alpha,
            "d": p.d,
            "N": p.atoms,
            "C6": p.c6,
            "realizations": p.realizations,
            "f_R_sat": p.f_r,
            "stderr": p.stderr,
            "E_C": num(p.cutoff),
            "converged": p.converged,
            "f_R_sat_coarse": self.coarse,
            "relative_change": num(self.relative_change),
            "per_realization": self.per_realization,
            "max_basis": self.max_basis,
        })
    }

    fn from_json(v: &Value) -> Option<Self> {
        let f = |k: &str| v.get(k)?.as_f64();
        let s = |k: &str| v.get(k)?.as_str()?.parse::<f64>().ok();
        let u = |k: &str| v.get(k)?.as_u64().map(|x| x as usize);
        Some(Self {
            point: SweepPoint {
                alpha: f("alpha")?,
                d: u("d")?,
                atoms: u("N")?,
                c6: f("C6")?,
                realizations: u("realizations")?,
                f_r: f("f_R_sat")?,
                stderr: f("stderr")?,
                cutoff: s("E_C")?,
                converged: v.get("converged")?.as_bool()?,
            },
            coarse: f("f_R_sat_coarse")?,
            relative_change: s("relative_change")?,
            per_realization: v.get("per_realization")?.as_array()?.iter().map(Value::as_f64).collect::<Option<_>>()?,
            max_basis: u("max_basis")?,
        })
    }
}

/// Identifies the inputs a stored point depends on, so stale files are recomputed.
fn point_key(cfg: &RunConfig, point: &PhysicalPoint) -> String {
    let skip = ["mode", "N", "C6", "include_unconverged", "engine", "alpha_min", "alpha_max", "alpha_points", "table", "reference", "ensemble"];
    let mut parts: Vec<String> = cfg
        .to_pairs()
        .into_iter()
        .filter(|(k, _)| !skip.contains(&k.as_str()))
        .map(|(k, v)| format!("{k}={v}"))
        .collect();
    parts.push(format!("N={}", point.atoms));
    parts.push(format!("C6={}", point.c6));
    parts.join(";")
}

fn point_path(dir: &Path, point: &PhysicalPoint) -> PathBuf {
    dir.join("points").join(format!("N{}_C6_{}.json", point.atoms, point.c6))
}

/// Runs (or reloads) one point: realizations at `E_C` and `2 E_C`.
pub fn ladder_point(cfg: &RunConfig, point: &PhysicalPoint) -> CliResult<LadderPoint> {
    let key = point_key(cfg, point);
    let path = point_path(&cfg.output, point);
    if let Ok(text) = std::fs::read_to_string(&path) {
        if let Ok(v) = serde_json::from_str::<Value>(&text) {
            if v.get("key").and_then(Value::as_str) == Some(key.as_str()) {
                if let Some(p) = LadderPoint::from_json(&v) {
                    log::info!("resuming: {} already done", path.display());
                    return Ok(p);
                }
            }
        }
        log::warn!("{} is stale or unreadable; recomputing", path.display());
    }
    let alpha = point.alpha();
    let grid = TimeGrid::new(cfg, alpha)?;
    let cutoff = resolve_cutoff(cfg, point)?;
    log::info!("{point}: alpha = {alpha}, E_C = {cutoff}");
    let fine_cutoff = 2.0 * cutoff;
    let (coarse, fine_runs) = if cutoff.is_infinite() {
        let runs = run_point(cfg, point, cutoff, &grid)?;
        (saturation(&runs, &grid)?.mean, runs)
    } else {
        let coarse_runs = run_point(cfg, point, cutoff, &grid)?;
        let coarse = saturation(&coarse_runs, &grid)?.mean;
        drop(coarse_runs);
        (coarse, run_point(cfg, point, fine_cutoff, &grid)?)
    };
    let fine = saturation(&fine_runs, &grid)?;
    let report = convergence_report(coarse, fine.mean, cfg.convergence_tolerance);
    let result = LadderPoint {
        point: SweepPoint {
            alpha,
            d: point.d,
            atoms: point.atoms,
            c6: point.c6,
            realizations: cfg.realizations,
            f_r: fine.mean,
            stderr: fine.stderr,
            cutoff: fine_cutoff,
            converged: report.converged,
        },
        coarse,
        relative_change: report.relative_change,
        per_realization: fine.per_realization,
        max_basis: fine_runs.iter().map(|r| r.basis_size).max().unwrap_or(0),
    };
    write_atomic(&path, &pretty(&result.to_json(&key)))?;
    Ok(result)
}

pub fn sweep_table(points: &[SweepPoint]) -> Table {
    let mut t = Table::new(&SWEEP_HEADER);
    for p in points {
        t.push(vec![
            num(p.alpha),
            num(p.f_r),
            num(p.stderr),
            p.atoms.to_string(),
            num(p.c6),
            num(p.cutoff),
            p.converged.to_string(),
        ]);
    }
    t
}

pub fn read_sweep_table(path: &Path) -> CliResult<Vec<SweepPoint>> {
    let t = Table::read(path)?;
    let alpha = t.numbers("alpha")?;
    let f = t.numbers("f_R_sat")?;
    let stderr = t.numbers("stderr")?;
    let atoms = t.numbers("N")?;
    let c6 = t.numbers("C6")?;
    let cutoff = t.numbers("E_C")?;
    let conv = t.column("converged")?;
    Ok((0..t.rows.len())
        .map(|k| SweepPoint {
            alpha: alpha[k],
            d: 0,
            atoms: atoms[k] as usize,
            c6: c6[k],
            realizations: 0,
            f_r: f[k],
            stderr: stderr[k],
            cutoff: cutoff[k],
            converged: t.rows[k][conv] == "true",
        })
        .collect())
}

pub fn fit_record(fit: &PowerLawFit) -> Value {
    json!({ "nu": fit.nu, "c": fit.c, "stderr_nu": fit.stderr_nu, "r_squared": fit.r_squared, "points": fit.points })
}

/// Fits the table, honouring `include_unconverged`.
pub fn fit_points(cfg: &RunConfig, points: &[SweepPoint]) -> CliResult<PowerLawFit> {
    let used: Vec<SweepPoint> = if cfg.include_unconverged {
        points.iter().map(|p| SweepPoint { converged: true, ..*p }).collect()
    } else {
        points.to_vec()
    };
    let converged = used.iter().filter(|p| p.converged).count();
    if converged < 3 {
        if points.len() >= 3 {
            return Err(CliError::Unconverged { bad: points.len() - converged, total: points.len() });
        }
        return Err(CliError::Config(format!("a power-law fit needs at least 3 points, got {}", points.len())));
    }
    Ok(powerlaw_fit(&used)?)
}

/// Log-spaced grid `alpha_min ..= alpha_max`.
pub fn alpha_grid(cfg: &RunConfig) -> Vec<f64> {
    let (a, b) = (cfg.alpha_min.ln(), cfg.alpha_max.ln());
    let n = cfg.alpha_points;
    (0..n).map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp()).collect()
}

/// `sweep` mode.
pub fn run_sweep(cfg: &RunConfig) -> CliResult<Value> {
    let mut manifest = Manifest::new(cfg);
    let (points, details) = match cfg.engine {
        Engine::MeanField => {
            let pts = alpha_grid(cfg)
                .into_iter()
                .map(|alpha| Ok(SweepPoint::bare(alpha, cfg.d, solve_selfconsistent(alpha, cfg.d, cfg.protocol)?.f_r)))
                .collect::<CliResult<Vec<_>>>()?;
            (pts, Vec::new())
        }
        Engine::Exact => {
            let mut pts = Vec::new();
            let mut details = Vec::new();
            for &n in &cfg.atoms {
                for &c6 in &cfg.c6 {
                    let point = cfg.point(n, c6);
                    let lp = ladder_point(cfg, &point)?;
                    details.push(json!({
                        "point": point_record(&point),
                        "f_R_sat": lp.point.f_r,
                        "stderr": lp.point.stderr,
                        "f_R_sat_coarse": lp.coarse,
                        "relative_change": num(lp.relative_change),
                        "converged": lp.point.converged,
                        "max_basis": lp.max_basis,
                    }));
                    pts.push(lp.point);
                }
            }
            (pts, details)
        }
    };
    let mut sorted = points.clone();
    sorted.sort_by(|a, b| a.alpha.total_cmp(&b.alpha).then(a.atoms.cmp(&b.atoms)));
    sweep_table(&sorted).write(&cfg.output, "sweep", &cfg.formats)?;
    let unconverged: Vec<Value> = sorted
        .iter()
        .filter(|p| !p.converged)
        .map(|p| json!({ "alpha": p.alpha, "N": p.atoms, "C6": p.c6 }))
        .collect();
    manifest.set("points", Value::Array(details));
    manifest.set("unconverged", Value::Array(unconverged));
    let fit = fit_points(cfg, &sorted);
    match &fit {
        Ok(f) => {
            crate::output::write_file(&cfg.output.join("fit.json"), &pretty(&fit_record(f)))?;
            manifest.set("fit", fit_record(f));
        }
        Err(e) => manifest.set("fit_error", json!(e.to_string())),
    }
    let value = manifest.finish(&cfg.output)?;
    fit.map(|_| value)
}

/// `fit` mode: refits an existing sweep table.
pub fn run_fit(cfg: &RunConfig) -> CliResult<Value> {
    let default = cfg.output.join("sweep.csv");
    let path = cfg.table.clone().unwrap_or(default);
    if !path.exists() {
        return Err(CliError::Dependency(format!("no sweep table at {}", path.display())));
    }
    let points = read_sweep_table(&path)?;
    let fit = fit_points(cfg, &points)?;
    crate::output::write_file(&cfg.output.join("fit.json"), &pretty(&fit_record(&fit)))?;
    let mut manifest = Manifest::new(cfg);
    manifest.set("fit", fit_record(&fit));
    manifest.finish(&cfg.output)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_grid_hits_both_ends() {
        let cfg = RunConfig { alpha_min: 1e-6, alpha_max: 1e-2, alpha_points: 5, ..RunConfig::default() };
        let g = alpha_grid(&cfg);
        assert_eq!(g.len(), 5);
        assert!((g[0] - 1e-6).abs() < 1e-20 && (g[4] - 1e-2).abs() < 1e-16);
        assert!((g[2] - 1e-4).abs() < 1e-16);
    }

    #[test]
    fn ladder_point_round_trips_with_infinite_cutoff() {
        let p = LadderPoint {
            point: SweepPoint { cutoff: f64::INFINITY, realizations: 3, stderr: 0.01, ..SweepPoint::bare(0.1, 3, 0.2) },
            coarse: 0.2,
            relative_change: 0.0,
            per_realization: vec![0.19, 0.2, 0.21],
            max_basis: 4096,
        };
        let v = p.to_json("k");
        let text = pretty(&v);
        let back = LadderPoint::from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn key_ignores_threads_and_output() {
        let a = RunConfig::default();
        let b = RunConfig { threads: 8, output: "elsewhere".into(), ..RunConfig::default() };
        let point = a.point(12, 0.02);
        assert_eq!(point_key(&a, &point), point_key(&b, &point));
        let c = RunConfig { realizations: 3, ..RunConfig::default() };
        assert_ne!(point_key(&a, &point), point_key(&c, &point));
    }

    #[test]
    fn too_few_converged_points_is_its_own_error() {
        let cfg = RunConfig::default();
        let pts: Vec<SweepPoint> = [1e-4, 1e-3, 1e-2]
            .iter()
            .enumerate()
            .map(|(k, &a)| SweepPoint { converged: k == 0, ..SweepPoint::bare(a, 3, a.powf(0.4)) })
            .collect();
        assert!(matches!(fit_points(&cfg, &pts), Err(CliError::Unconverged { bad: 2, total: 3 })));
        let all = RunConfig { include_unconverged: true, ..RunConfig::default() };
        assert!((fit_points(&all, &pts).unwrap().nu - 0.4).abs() < 1e-12);
    }
}
