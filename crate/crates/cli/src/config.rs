//! Flat `key = value` run configuration.
//!
//! Blank lines and `#` comments are ignored. Keys are case-insensitive.
//! Later assignments win, so command-line overrides are simply applied after
//! the file.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rydberg_core::analysis::CONVERGENCE_TOLERANCE;
use rydberg_core::basis::DEFAULT_MAX_STATES;
use rydberg_core::geometry::AtomEnsemble;
use rydberg_core::master::CorrelationHole;
use rydberg_core::meanfield::Protocol;

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Exact,
    MeanField,
    Master,
    Sweep,
    Fit,
    Replay,
}

impl FromStr for Mode {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        Ok(match s {
            "exact" => Mode::Exact,
            "meanfield" => Mode::MeanField,
            "master" => Mode::Master,
            "sweep" => Mode::Sweep,
            "fit" => Mode::Fit,
            "replay" => Mode::Replay,
            _ => return Err(CliError::Config(format!("unknown mode '{s}'"))),
        })
    }
}

/// Van der Waals cutoff `E_C` in the same units as `Omega` and `C6`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Cutoff {
    /// `factor · Ω · √(n a_R^d)` with `a_R` from the mean-field solution.
    Auto { factor: f64 },
    Infinite,
    Value(f64),
}

/// Unit of `t_max`, `sample_interval` and `window`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimeUnit {
    /// `τ = t E0`.
    Tau,
    /// `Ω t`, converted per point with `τ = Ω t / α`.
    Rabi,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Engine {
    Exact,
    MeanField,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HoleMode {
    Frozen,
    Instantaneous,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub d: usize,
    /// Several values only in sweeps.
    pub atoms: Vec<usize>,
    pub c6: Vec<f64>,
    pub omega: f64,
    pub delta: f64,
    /// Box length; the density is `N / L^d`.
    pub box_length: f64,
    /// Direct `α` for mean-field and master runs.
    pub alpha: Option<f64>,
    pub cutoff: Cutoff,
    pub dt: Option<f64>,
    pub dt_factor: f64,
    pub t_max: f64,
    pub sample_interval: f64,
    pub window: (f64, f64),
    pub time_unit: TimeUnit,
    pub realizations: usize,
    pub master_seed: u64,
    pub convergence_tolerance: f64,
    pub include_unconverged: bool,
    pub max_states: usize,
    pub protocol: Protocol,
    pub hole: HoleMode,
    pub rate_scale: f64,
    pub engine: Engine,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub alpha_points: usize,
    /// Exact averaged trajectory for the master-equation overlay.
    pub reference: Option<PathBuf>,
    /// Sweep table for `fit`.
    pub table: Option<PathBuf>,
    /// Ensemble record for `replay`.
    pub ensemble: Option<PathBuf>,
    pub output: PathBuf,
    pub formats: Vec<Format>,
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Exact,
            d: 3,
            atoms: vec![16],
            c6: vec![0.01],
            omega: 1.0,
            delta: 0.0,
            box_length: 1.0,
            alpha: None,
            cutoff: Cutoff::Auto { factor: 10.0 },
            dt: None,
            dt_factor: 0.02,
            t_max: 400.0,
            sample_interval: 0.5,
            window: (250.0, 400.0),
            time_unit: TimeUnit::Tau,
            realizations: 20,
            master_seed: 1,
            convergence_tolerance: CONVERGENCE_TOLERANCE,
            include_unconverged: false,
            max_states: DEFAULT_MAX_STATES,
            protocol: Protocol::Sudden,
            hole: HoleMode::Frozen,
            rate_scale: 1.0,
            engine: Engine::Exact,
            alpha_min: 1e-8,
            alpha_max: 1e-4,
            alpha_points: 41,
            reference: None,
            table: None,
            ensemble: None,
            output: PathBuf::from("out"),
            formats: vec![Format::Csv],
            threads: 1,
        }
    }
}

/// Splits a config text into `(key, value)` pairs.
pub fn parse_pairs(text: &str) -> CliResult<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (line_no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", line_no + 1)))?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(pairs)
}

/// Parses a single `key=value` override.
pub fn parse_override(s: &str) -> CliResult<(String, String)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override '{s}' must look like key=value")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

fn num<T: FromStr>(key: &str, v: &str) -> CliResult<T> {
    v.parse().map_err(|_| CliError::Config(format!("{key}: cannot parse '{v}'")))
}

fn list<T: FromStr>(key: &str, v: &str) -> CliResult<Vec<T>> {
    v.split(',').map(|x| num(key, x.trim())).collect()
}

fn flag(key: &str, v: &str) -> CliResult<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(CliError::Config(format!("{key}: expected true or false, got '{v}'"))),
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::default();
        cfg.apply_all(&parse_pairs(&text)?)?;
        Ok(cfg)
    }

    pub fn apply_all(&mut self, pairs: &[(String, String)]) -> CliResult<()> {
        for (k, v) in pairs {
            self.apply(k, v)?;
        }
        Ok(())
    }

    pub fn apply(&mut self, key: &str, v: &str) -> CliResult<()> {
        let k = key.to_ascii_lowercase();
        match k.as_str() {
            "mode" => self.mode = v.parse()?,
            "d" => self.d = num(key, v)?,
            "n" | "atoms" => self.atoms = list(key, v)?,
            "c6" => self.c6 = list(key, v)?,
            "omega" => self.omega = num(key, v)?,
            "delta" => self.delta = num(key, v)?,
            "l" | "box_length" => self.box_length = num(key, v)?,
            "alpha" => self.alpha = if v == "none" { None } else { Some(num(key, v)?) },
            "e_c" | "cutoff" => {
                self.cutoff = match v {
                    "auto" => Cutoff::Auto { factor: self.cutoff_factor() },
                    "inf" | "infinite" => Cutoff::Infinite,
                    _ => Cutoff::Value(num(key, v)?),
                }
            }
            "e_c_factor" => self.cutoff = Cutoff::Auto { factor: num(key, v)? },
            "dt" => self.dt = if v == "auto" { None } else { Some(num(key, v)?) },
            "dt_factor" => self.dt_factor = num(key, v)?,
            "t_max" => self.t_max = num(key, v)?,
            "sample_interval" => self.sample_interval = num(key, v)?,
            "window" => {
                let w: Vec<f64> = list(key, v)?;
                if w.len() != 2 {
                    return Err(CliError::Config("window needs two values lo,hi".into()));
                }
                self.window = (w[0], w[1]);
            }
            "time_unit" => {
                self.time_unit = match v {
                    "tau" => TimeUnit::Tau,
                    "rabi" => TimeUnit::Rabi,
                    _ => return Err(CliError::Config(format!("time_unit must be tau or rabi, got '{v}'"))),
                }
            }
            "realizations" => self.realizations = num(key, v)?,
            "master_seed" | "seed" => self.master_seed = num(key, v)?,
            "convergence_tolerance" => self.convergence_tolerance = num(key, v)?,
            "include_unconverged" => self.include_unconverged = flag(key, v)?,
            "max_states" => self.max_states = num(key, v)?,
            "protocol" => self.protocol = v.parse().map_err(|_| CliError::Config(format!("unknown protocol '{v}'")))?,
            "hole" => {
                self.hole = match v {
                    "frozen" => HoleMode::Frozen,
                    "instantaneous" => HoleMode::Instantaneous,
                    _ => return Err(CliError::Config(format!("hole must be frozen or instantaneous, got '{v}'"))),
                }
            }
            "rate_scale" => self.rate_scale = num(key, v)?,
            "engine" => {
                self.engine = match v {
                    "exact" => Engine::Exact,
                    "meanfield" => Engine::MeanField,
                    _ => return Err(CliError::Config(format!("engine must be exact or meanfield, got '{v}'"))),
                }
            }
            "alpha_min" => self.alpha_min = num(key, v)?,
            "alpha_max" => self.alpha_max = num(key, v)?,
            "alpha_points" => self.alpha_points = num(key, v)?,
            "reference" => self.reference = Some(PathBuf::from(v)),
            "table" => self.table = Some(PathBuf::from(v)),
            "ensemble" => self.ensemble = Some(PathBuf::from(v)),
            "output" => self.output = PathBuf::from(v),
            "formats" => {
                self.formats = v
                    .split(',')
                    .map(|f| match f.trim() {
                        "csv" => Ok(Format::Csv),
                        "json" => Ok(Format::Json),
                        other => Err(CliError::Config(format!("unknown format '{other}'"))),
                    })
                    .collect::<CliResult<_>>()?
            }
            "threads" => self.threads = num(key, v)?,
            _ => return Err(CliError::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    fn cutoff_factor(&self) -> f64 {
        match self.cutoff {
            Cutoff::Auto { factor } => factor,
            _ => 10.0,
        }
    }

    /// Checks ranges; called before any run.
    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if !(1..=3).contains(&self.d) {
            return bad(format!("d must be 1, 2 or 3, got {}", self.d));
        }
        if self.atoms.is_empty() || self.atoms.iter().any(|&n| n == 0) {
            return bad("N must list positive atom counts".into());
        }
        let positive = [
            ("C6", self.c6.iter().copied().fold(f64::INFINITY, f64::min)),
            ("Omega", self.omega),
            ("L", self.box_length),
            ("dt_factor", self.dt_factor),
            ("t_max", self.t_max),
            ("sample_interval", self.sample_interval),
            ("convergence_tolerance", self.convergence_tolerance),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return bad(format!("{name} must be positive and finite"));
            }
        }
        if self.c6.is_empty() {
            return bad("C6 must list at least one value".into());
        }
        if !self.delta.is_finite() {
            return bad("Delta must be finite".into());
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0 && a.is_finite()) {
                return bad("alpha must be positive".into());
            }
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) {
                return bad("dt must be positive".into());
            }
        }
        match self.cutoff {
            Cutoff::Auto { factor } if !(factor > 0.0) => return bad("E_C_factor must be positive".into()),
            Cutoff::Value(v) if !(v >= 0.0) => return bad("E_C must be non-negative".into()),
            _ => {}
        }
        if self.realizations == 0 {
            return bad("realizations must be at least 1".into());
        }
        if !(self.window.0 <= self.window.1) || self.window.1 > self.t_max + 1e-9 * self.t_max {
            return bad("window must satisfy lo <= hi <= t_max".into());
        }
        if !(self.rate_scale >= 0.0) {
            return bad("rate_scale must be non-negative".into());
        }
        if !(self.alpha_min > 0.0 && self.alpha_min < self.alpha_max) || self.alpha_points < 3 {
            return bad("need 0 < alpha_min < alpha_max and alpha_points >= 3".into());
        }
        if self.threads == 0 {
            return bad("threads must be at least 1".into());
        }
        if self.formats.is_empty() {
            return bad("formats must not be empty".into());
        }
        Ok(())
    }

    /// Single `(N, C6)` pair for non-sweep modes.
    pub fn single_point(&self) -> CliResult<PhysicalPoint> {
        if self.atoms.len() != 1 || self.c6.len() != 1 {
            return Err(CliError::Config("this mode takes a single N and a single C6".into()));
        }
        Ok(self.point(self.atoms[0], self.c6[0]))
    }

    pub fn point(&self, atoms: usize, c6: f64) -> PhysicalPoint {
        PhysicalPoint { d: self.d, atoms, c6, omega: self.omega, delta: self.delta, box_length: self.box_length }
    }

    pub fn correlation_hole(&self, a_r: f64) -> CorrelationHole {
        match self.hole {
            HoleMode::Frozen => CorrelationHole::Frozen { radius: a_r },
            HoleMode::Instantaneous => CorrelationHole::Instantaneous,
        }
    }

    /// Converts a configured time to `τ` at the given `α`.
    pub fn to_tau(&self, t: f64, alpha: f64) -> f64 {
        match self.time_unit {
            TimeUnit::Tau => t,
            TimeUnit::Rabi => t / alpha,
        }
    }

    /// Canonical `key = value` listing, used in manifests.
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let join = |v: Vec<String>| v.join(",");
        let mut out = vec![
            ("mode", format!("{:?}", self.mode).to_lowercase()),
            ("d", self.d.to_string()),
            ("N", join(self.atoms.iter().map(ToString::to_string).collect())),
            ("C6", join(self.c6.iter().map(ToString::to_string).collect())),
            ("Omega", self.omega.to_string()),
            ("Delta", self.delta.to_string()),
            ("L", self.box_length.to_string()),
            ("alpha", self.alpha.map_or("none".into(), |a| a.to_string())),
            (
                "E_C",
                match self.cutoff {
                    Cutoff::Auto { factor } => format!("auto (factor {factor})"),
                    Cutoff::Infinite => "inf".into(),
                    Cutoff::Value(v) => v.to_string(),
                },
            ),
            ("dt", self.dt.map_or("auto".into(), |d| d.to_string())),
            ("dt_factor", self.dt_factor.to_string()),
            ("t_max", self.t_max.to_string()),
            ("sample_interval", self.sample_interval.to_string()),
            ("window", format!("{},{}", self.window.0, self.window.1)),
            ("time_unit", format!("{:?}", self.time_unit).to_lowercase()),
            ("realizations", self.realizations.to_string()),
            ("master_seed", self.master_seed.to_string()),
            ("convergence_tolerance", self.convergence_tolerance.to_string()),
            ("include_unconverged", self.include_unconverged.to_string()),
            ("max_states", self.max_states.to_string()),
            ("protocol", format!("{:?}", self.protocol).to_lowercase()),
            ("hole", format!("{:?}", self.hole).to_lowercase()),
            ("rate_scale", self.rate_scale.to_string()),
            ("engine", format!("{:?}", self.engine).to_lowercase()),
            ("alpha_min", self.alpha_min.to_string()),
            ("alpha_max", self.alpha_max.to_string()),
            ("alpha_points", self.alpha_points.to_string()),
        ];
        for (k, p) in [("reference", &self.reference), ("table", &self.table), ("ensemble", &self.ensemble)] {
            if let Some(p) = p {
                out.push((k, p.display().to_string()));
            }
        }
        out.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }
}

/// Physical parameters of one `(N, C6)` point, `ħ = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhysicalPoint {
    pub d: usize,
    pub atoms: usize,
    pub c6: f64,
    pub omega: f64,
    pub delta: f64,
    pub box_length: f64,
}

impl PhysicalPoint {
    pub fn density(&self) -> f64 {
        self.atoms as f64 / self.box_length.powi(self.d as i32)
    }

    /// `E0 = C6 n^{6/d}`.
    pub fn energy_unit(&self) -> f64 {
        self.c6 * self.density().powf(6.0 / self.d as f64)
    }

    pub fn alpha(&self) -> f64 {
        self.omega / self.energy_unit()
    }

    /// Agrees with [`AtomEnsemble::energy_unit`] for any ensemble of this point.
    pub fn matches(&self, ensemble: &AtomEnsemble) -> bool {
        ensemble.len() == self.atoms && ensemble.dim() == self.d && ensemble.box_length() == self.box_length
    }
}

impl fmt::Display for PhysicalPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "d={} N={} C6={} Omega={} L={}", self.d, self.atoms, self.c6, self.omega, self.box_length)
    }
}
