//! Mean-field critical theory of the resonantly driven gas.
//!
//! Each atom sees the drive `α/2 σx` and the averaged van der Waals shift of
//! its neighbours outside a sharp correlation hole of radius `a_R`. Working
//! in units where `n = 1` and `E0 = C6 n^{6/d} = 1`, the single-site
//! Hamiltonian is
//!
//! ```text
//! H_MF = h_x σx + h_z σz + h0,   h_x = α/2,   h_z = K_d f^{6/d},   h0 = h_z (1 - f)
//! ```
//!
//! where the hole radius follows from `n f_R Vol_d(a_R) = 1` and
//!
//! ```text
//! K_d = S_d U_d^{(6-d)/d} / (2 (6 - d))
//! ```
//!
//! with `U_d` the unit-ball volume and `S_d = d U_d` the unit-sphere area
//! (`K_3 = 8π²/9`). The Rydberg fraction is then fixed self-consistently:
//!
//! * **sudden** switch-on: the equilibrium energy equals that of the initial
//!   ground state (zero), giving `f = (h_x² + h_z² f) / (2 h²)`;
//! * **adiabatic** switch-on: the atom stays in the lower eigenstate,
//!   `f = (1 - h_z / h) / 2`.
//!
//! For small `α` both branches scale as `f = c α^{ν_d}` with
//! `ν_d = 2d / (12 + d)`.

use std::f64::consts::FRAC_PI_2;

use nalgebra::Matrix2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{unit_ball_volume, unit_sphere_area};

/// Lower end of the bisection bracket.
pub const BRACKET_FLOOR: f64 = 1e-30;

/// How the drive is switched on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Protocol {
    Sudden,
    Adiabatic,
}

impl std::str::FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sudden" => Ok(Self::Sudden),
            "adiabatic" => Ok(Self::Adiabatic),
            other => Err(Error::Parameter(format!("unknown protocol {other:?}"))),
        }
    }
}

fn check_dim(d: usize) -> Result<()> {
    if (1..=4).contains(&d) {
        Ok(())
    } else {
        Err(Error::Parameter(format!("mean-field theory needs 1 <= d <= 4, got {d}")))
    }
}

/// Universal exponent `ν_d = 2d / (12 + d)`.
pub fn critical_exponent(d: usize) -> f64 {
    2.0 * d as f64 / (12.0 + d as f64)
}

/// Coefficient `K_d` in `h_z = K_d f^{6/d}`.
pub fn field_coefficient(d: usize) -> f64 {
    let df = d as f64;
    unit_sphere_area(d) * unit_ball_volume(d).powf((6.0 - df) / df) / (2.0 * (6.0 - df))
}

/// Longitudinal field `h_z` for a given Rydberg fraction.
pub fn longitudinal_field(f_r: f64, d: usize) -> f64 {
    field_coefficient(d) * f_r.max(0.0).powf(6.0 / d as f64)
}

/// Blockade radius from `n f_R U_d a_R^d = 1`.
pub fn blockade_radius(f_r: f64, density: f64, d: usize) -> Result<f64> {
    if !(f_r > 0.0) {
        return Err(Error::DivergentRadius);
    }
    if !(density > 0.0) {
        return Err(Error::Parameter(format!("density must be positive, got {density}")));
    }
    Ok((1.0 / (f_r * density * unit_ball_volume(d))).powf(1.0 / d as f64))
}

/// Right-hand side of the self-consistency equation.
fn update(alpha: f64, f: f64, d: usize, protocol: Protocol) -> f64 {
    let hx = 0.5 * alpha;
    let hz = longitudinal_field(f, d);
    let h2 = hx * hx + hz * hz;
    if h2 == 0.0 {
        return 0.0;
    }
    match protocol {
        Protocol::Sudden => 0.5 * (hx * hx + hz * hz * f) / h2,
        Protocol::Adiabatic => 0.5 * (1.0 - hz / h2.sqrt()),
    }
}

/// Function with the sign of `f - update(f)`, increasing in `f`.
fn signed_residual(alpha: f64, f: f64, d: usize, protocol: Protocol) -> f64 {
    let hx = 0.5 * alpha;
    let hz = longitudinal_field(f, d);
    match protocol {
        // (f - update) * h^2
        Protocol::Sudden => hx * hx * (f - 0.5) + 0.5 * f * hz * hz,
        Protocol::Adiabatic => f - update(alpha, f, d, protocol),
    }
}

/// Self-consistent mean-field state with its derived fields.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanFieldSolution {
    pub alpha: f64,
    pub d: usize,
    pub protocol: Protocol,
    pub f_r: f64,
    pub h_x: f64,
    pub h_z: f64,
    pub h0: f64,
    pub h: f64,
    /// `tan θ = h_x / h_z`, `θ = π/2` when `h_z = 0`.
    pub theta: f64,
    /// Level splitting `2h` in units of `E0`.
    pub omega0: f64,
    /// Blockade radius in units of `n^{-1/d}`.
    pub a_r: f64,
    /// Atoms inside the blockade volume, `n Vol_d(a_R) = 1 / f_R`.
    pub n_block: f64,
    /// `f - update(f)` at the returned root.
    pub residual: f64,
}

impl MeanFieldSolution {
    fn from_fraction(alpha: f64, d: usize, protocol: Protocol, f_r: f64) -> Self {
        let h_x = 0.5 * alpha;
        let h_z = longitudinal_field(f_r, d);
        let h = h_x.hypot(h_z);
        let theta = if h_z == 0.0 { FRAC_PI_2 } else { h_x.atan2(h_z) };
        let a_r = blockade_radius(f_r, 1.0, d).unwrap_or(f64::INFINITY);
        Self {
            alpha,
            d,
            protocol,
            f_r,
            h_x,
            h_z,
            h0: h_z * (1.0 - f_r),
            h,
            theta,
            omega0: 2.0 * h,
            a_r,
            n_block: if f_r > 0.0 { 1.0 / f_r } else { f64::INFINITY },
            residual: f_r - update(alpha, f_r, d, protocol),
        }
    }

    /// Expectation of `σ_z'` (the field axis) in the stationary state.
    pub fn polarization(&self) -> f64 {
        match self.protocol {
            Protocol::Sudden if self.h > 0.0 => -self.h0 / self.h,
            Protocol::Sudden => 0.0,
            Protocol::Adiabatic => -1.0,
        }
    }

    /// Stationary single-site density matrix in the `(|g>, |e>)` basis.
    pub fn density_matrix(&self) -> Matrix2<Complex64> {
        let p = self.polarization();
        let (s, c) = self.theta.sin_cos();
        // σz' = cos θ σz + sin θ σx with σz = diag(-1, 1) on (g, e).
        let sz = p * c;
        let sx = p * s;
        Matrix2::new(
            Complex64::new(0.5 * (1.0 - sz), 0.0),
            Complex64::new(0.5 * sx, 0.0),
            Complex64::new(0.5 * sx, 0.0),
            Complex64::new(0.5 * (1.0 + sz), 0.0),
        )
    }

    /// `Tr{H_MF ρ}` of the stationary state.
    pub fn energy(&self) -> f64 {
        self.h * self.polarization() + self.h0
    }
}

/// Solves the self-consistency equation by bracketing bisection on
/// `[BRACKET_FLOOR, 1/2]`.
pub fn solve_selfconsistent(alpha: f64, d: usize, protocol: Protocol) -> Result<MeanFieldSolution> {
    check_dim(d)?;
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::Parameter(format!("alpha must be non-negative and finite, got {alpha}")));
    }
    if alpha == 0.0 {
        return Ok(MeanFieldSolution::from_fraction(0.0, d, protocol, 0.0));
    }
    let g = |f: f64| signed_residual(alpha, f, d, protocol);
    let (mut lo, mut hi) = (BRACKET_FLOOR, 0.5);
    let (g_lo, g_hi) = (g(lo), g(hi));
    if g_lo > 0.0 {
        // Root below the floor; only reachable for absurdly small alpha.
        return Err(Error::Solver(format!("root below {BRACKET_FLOOR:e} for alpha = {alpha:e}")));
    }
    if g_hi < 0.0 {
        return Err(Error::Solver(format!("no sign change in [{lo:e}, {hi}] for alpha = {alpha:e}")));
    }
    for _ in 0..4000 {
        // Geometric steps while the bracket spans decades.
        let mid = if hi > 4.0 * lo { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let f = if g(lo).abs() <= g(hi).abs() { lo } else { hi };
    Ok(MeanFieldSolution::from_fraction(alpha, d, protocol, f))
}

/// Fits `ln f = ln c + ν ln α` by ordinary least squares over a log grid.
pub fn loglog_regression(d: usize, protocol: Protocol, alpha_lo: f64, alpha_hi: f64, points: usize) -> Result<(f64, f64)> {
    if points < 3 || !(alpha_lo > 0.0 && alpha_hi > alpha_lo) {
        return Err(Error::Parameter("need at least three points on a positive range".into()));
    }
    let (l0, l1) = (alpha_lo.ln(), alpha_hi.ln());
    let mut xs = Vec::with_capacity(points);
    let mut ys = Vec::with_capacity(points);
    for k in 0..points {
        let la = l0 + (l1 - l0) * k as f64 / (points - 1) as f64;
        let sol = solve_selfconsistent(la.exp(), d, protocol)?;
        xs.push(la);
        ys.push(sol.f_r.ln());
    }
    let m = points as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    Ok((slope, (my - slope * mx).exp()))
}

/// Largest decade `α = 10^-k` whose sudden solution has `f_R <= f_max`.
fn asymptotic_alpha(d: usize, f_max: f64) -> Result<f64> {
    let mut alpha = 1.0;
    for _ in 0..200 {
        if solve_selfconsistent(alpha, d, Protocol::Sudden)?.f_r <= f_max {
            return Ok(alpha);
        }
        alpha *= 0.1;
    }
    Err(Error::Solver(format!("could not reach f_R <= {f_max:e} in d = {d}")))
}

/// Small-α coefficient `c` of `f_R = c α^{ν_d}` for the sudden protocol.
///
/// Obtained by regression deep in the asymptotic regime (`f_R <= 1e-6`),
/// where corrections of relative order `ν f_R` are negligible.
pub fn prefactor(d: usize) -> Result<f64> {
    check_dim(d)?;
    let hi = asymptotic_alpha(d, 1e-6)?;
    let (_, c) = loglog_regression(d, Protocol::Sudden, hi * 1e-4, hi, 17)?;
    Ok(c)
}

/// Closed-form small-α coefficient, `c = (1 / (4 K_d²))^{d/(12+d)}`.
///
/// For `d = 3` this is `(9 / 16π²)^{2/5}`.
pub fn prefactor_closed_form(d: usize) -> f64 {
    let k = field_coefficient(d);
    (0.25 / (k * k)).powf(d as f64 / (12.0 + d as f64))
}

/// Region of the Δ–Ω plane.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Paramagnetic,
    Crystalline,
    Critical,
    Unclassified,
}

/// Classifies a point of the phase diagram. Exact only on the `Ω = 0` axis;
/// away from it only the resonant line is labelled.
pub fn phase_boundary_flags(delta: f64, omega: f64) -> Phase {
    if delta == 0.0 {
        Phase::Critical
    } else if omega != 0.0 {
        Phase::Unclassified
    } else if delta < 0.0 {
        Phase::Paramagnetic
    } else {
        Phase::Crystalline
    }
}

/// Volume of the blockade sphere for an explicit radius.
pub fn blockade_volume(a_r: f64, d: usize) -> f64 {
    unit_ball_volume(d) * a_r.powi(d as i32)
}
