//! Nonlinear second-order time-convolutionless (TCL2) master equation for
//! the single-site density matrix.
//!
//! One atom is the system with Hamiltonian `H_MF(f_R)`, every other atom is
//! an identical copy acting as the bath through the residual interaction
//! `ΔH = Σ g2 V_ij (P_i - f)(P_j - f)`. Decomposing `P_ee` into eigenoperators
//! of `H_MF`,
//!
//! ```text
//! P_ee = A(-ω0) + A(0) + A(+ω0),   [H_MF, A(ω)] = -ω A(ω),
//! ```
//!
//! the secular interaction `Σ_ω V A(ω) ⊗ A(ω)†` is static in the interaction
//! picture, so the TCL2 kernel is the double commutator times the elapsed
//! time. Back in the Schrödinger picture
//!
//! ```text
//! dρ/dτ = -i[H_MF, ρ] + Σ_{ω,ω'} γ(ω,ω') ( A(ω) ρ A(ω')† - ½{A(ω')† A(ω), ρ} )
//! γ(ω,ω') = κ_d C6² n a_R^{d-12} τ Tr{ρ A(ω') A(ω)†},   κ_d = 2 S_d / (12 - d)
//! ```
//!
//! where the spatial factor is the shell integral `n ∫_{a_R}^∞ (C6/r^6)² d^d r`
//! of the squared coupling outside the correlation hole, and the bath
//! average uses the system's own density matrix. Both `f_R` and the rates are
//! re-evaluated from the current state at every Runge–Kutta stage.
//!
//! Time is in units of `1/E0` and energies in units of `E0` with `n = 1`.

use std::f64::consts::{FRAC_PI_2, TAU};

use nalgebra::Matrix2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::unit_sphere_area;
use crate::meanfield::{blockade_radius, longitudinal_field, solve_selfconsistent, MeanFieldSolution, Protocol};

pub type Mat2 = Matrix2<Complex64>;

/// Below this Rydberg fraction the instantaneous hole is infinite and the bath is silent.
pub const SILENT_BATH: f64 = 1e-12;

/// Eigenvalues below this are reported as positivity violations.
pub const POSITIVITY_TOLERANCE: f64 = 1e-6;

/// Trace or Hermiticity drift that triggers symmetrization.
const REPAIR_THRESHOLD: f64 = 1e-12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// `σx` in the `(|g>, |e>)` basis.
pub fn sigma_x() -> Mat2 {
    Mat2::new(ZERO, ONE, ONE, ZERO)
}

/// `σz = diag(-1, 1)` in the `(|g>, |e>)` basis.
pub fn sigma_z() -> Mat2 {
    Mat2::new(-ONE, ZERO, ZERO, ONE)
}

/// Rydberg projector `P_ee`.
pub fn projector_excited() -> Mat2 {
    Mat2::new(ZERO, ZERO, ZERO, ONE)
}

fn trace(m: &Mat2) -> Complex64 {
    m[(0, 0)] + m[(1, 1)]
}

/// Smallest eigenvalue of the Hermitian part of `m`.
pub fn min_eigenvalue(m: &Mat2) -> f64 {
    let a = m[(0, 0)].re;
    let d = m[(1, 1)].re;
    let b = 0.5 * (m[(0, 1)] + m[(1, 0)].conj());
    0.5 * (a + d) - (0.25 * (a - d).powi(2) + b.norm_sqr()).sqrt()
}

/// Treatment of the pair-correlation hole `g2 = Θ(r - a_R)` during the evolution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CorrelationHole {
    /// Hole radius held fixed (units of `n^{-1/d}`).
    Frozen { radius: f64 },
    /// Hole radius recomputed from the instantaneous `f_R`.
    Instantaneous,
}

/// Spatial factor `κ_d C6² n a_R^{d-12}` of the TCL2 rates (per unit elapsed time).
pub fn rate_prefactor(hole_radius: f64, density: f64, c6: f64, d: usize) -> f64 {
    let df = d as f64;
    2.0 * unit_sphere_area(d) / (12.0 - df) * c6 * c6 * density * hole_radius.powf(df - 12.0)
}

/// Mean shift `Σ_j V_ij g2(r_ij) = S_d a^{d-6} / (6 - d)` felt from outside a hole of radius `a`.
pub fn hole_field(hole_radius: f64, d: usize) -> f64 {
    let df = d as f64;
    unit_sphere_area(d) * hole_radius.powf(df - 6.0) / (6.0 - df)
}

/// Mean-field Hamiltonian and its eigenoperator decomposition of `P_ee`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenFrame {
    pub f_r: f64,
    pub h_x: f64,
    pub h_z: f64,
    pub h0: f64,
    pub h: f64,
    pub theta: f64,
    pub omega0: f64,
    /// `A(-ω0), A(0), A(+ω0)`.
    pub jumps: [Mat2; 3],
    pub hamiltonian: Mat2,
}

impl EigenFrame {
    /// Frequencies matching [`EigenFrame::jumps`].
    pub fn frequencies(&self) -> [f64; 3] {
        [-self.omega0, 0.0, self.omega0]
    }

    pub fn from_fields(f_r: f64, h_x: f64, h_z: f64) -> Self {
        let h = h_x.hypot(h_z);
        let theta = if h_z == 0.0 { FRAC_PI_2 } else { h_x.atan2(h_z) };
        let h0 = h_z * (1.0 - f_r);
        let (s, c) = (0.5 * theta).sin_cos();
        // Upper (+h) and lower (-h) eigenvectors of h_x σx + h_z σz.
        let plus = nalgebra::Vector2::new(real(s), real(c));
        let minus = nalgebra::Vector2::new(real(c), real(-s));
        let proj_plus = plus * plus.adjoint();
        let proj_minus = minus * minus.adjoint();
        let p = projector_excited();
        let lowering = proj_minus * p * proj_plus;
        let raising = proj_plus * p * proj_minus;
        let diagonal = proj_plus * p * proj_plus + proj_minus * p * proj_minus;
        let hamiltonian = sigma_x() * real(h_x) + sigma_z() * real(h_z) + Mat2::identity() * real(h0);
        Self {
            f_r,
            h_x,
            h_z,
            h0,
            h,
            theta,
            omega0: 2.0 * h,
            jumps: [raising, diagonal, lowering],
            hamiltonian,
        }
    }

    /// `Tr{H_MF ρ}`.
    pub fn energy(&self, rho: &Mat2) -> f64 {
        trace(&(self.hamiltonian * rho)).re
    }
}

/// Frame with the hole radius following the instantaneous Rydberg fraction.
pub fn eigen_frame(rho: &SingleSiteState, alpha: f64, d: usize) -> EigenFrame {
    let f = rho.rydberg_fraction();
    EigenFrame::from_fields(f, 0.5 * alpha, longitudinal_field(f, d))
}

/// Single-site density matrix at dimensionless time `tau`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SingleSiteState {
    pub rho: Mat2,
    pub tau: f64,
}

impl SingleSiteState {
    pub fn ground() -> Self {
        Self { rho: Mat2::new(ONE, ZERO, ZERO, ZERO), tau: 0.0 }
    }

    pub fn from_meanfield(sol: &MeanFieldSolution) -> Self {
        Self { rho: sol.density_matrix(), tau: 0.0 }
    }

    /// `Tr{ρ P_ee}`.
    pub fn rydberg_fraction(&self) -> f64 {
        self.rho[(1, 1)].re
    }

    pub fn trace(&self) -> f64 {
        trace(&self.rho).re
    }

    pub fn purity(&self) -> f64 {
        trace(&(self.rho * self.rho)).re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.rho)
    }

    fn repair(&mut self) {
        let herm = (self.rho - self.rho.adjoint()).norm();
        let tr = trace(&self.rho);
        if herm > REPAIR_THRESHOLD || (tr - ONE).norm() > REPAIR_THRESHOLD {
            self.rho = (self.rho + self.rho.adjoint()) * real(0.5);
            let t = trace(&self.rho).re;
            self.rho /= real(t);
        }
    }
}

/// Rates `γ(ω, ω')` indexed like [`EigenFrame::jumps`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateMatrix {
    pub gamma: [[Complex64; 3]; 3],
    pub tau: f64,
}

impl RateMatrix {
    pub fn zero(tau: f64) -> Self {
        Self { gamma: [[ZERO; 3]; 3], tau }
    }

    pub fn max_abs(&self) -> f64 {
        self.gamma.iter().flatten().map(|g| g.norm()).fold(0.0, f64::max)
    }
}

/// Parameters of the reduced (n = 1, E0 = 1) master equation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MasterParams {
    pub alpha: f64,
    pub d: usize,
    pub hole: CorrelationHole,
    /// Multiplies every rate; 0 switches the bath off.
    pub rate_scale: f64,
}

impl MasterParams {
    /// Hole frozen at the radius of the sudden-quench mean-field solution.
    pub fn new(alpha: f64, d: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Parameter(format!("alpha must be positive, got {alpha}")));
        }
        let sol = solve_selfconsistent(alpha, d, Protocol::Sudden)?;
        Ok(Self { alpha, d, hole: CorrelationHole::Frozen { radius: sol.a_r }, rate_scale: 1.0 })
    }

    pub fn with_hole(mut self, hole: CorrelationHole) -> Self {
        self.hole = hole;
        self
    }

    pub fn with_rate_scale(mut self, scale: f64) -> Self {
        self.rate_scale = scale;
        self
    }

    /// Hole radius used for a given Rydberg fraction, `None` if it diverges.
    pub fn hole_radius(&self, f_r: f64) -> Option<f64> {
        match self.hole {
            CorrelationHole::Frozen { radius } => Some(radius),
            CorrelationHole::Instantaneous if f_r < SILENT_BATH => None,
            CorrelationHole::Instantaneous => blockade_radius(f_r, 1.0, self.d).ok(),
        }
    }

    pub fn frame(&self, f_r: f64) -> EigenFrame {
        let h_z = match self.hole {
            CorrelationHole::Frozen { radius } => 0.5 * f_r * hole_field(radius, self.d),
            CorrelationHole::Instantaneous => longitudinal_field(f_r, self.d),
        };
        EigenFrame::from_fields(f_r, 0.5 * self.alpha, h_z)
    }
}

/// TCL2 rates for the state `rho` at elapsed time `tau`, in physical units
/// given the density and `C6`; the reduced equation uses `n = C6 = 1`.
pub fn rates(rho: &SingleSiteState, frame: &EigenFrame, tau: f64, params: &MasterParams, density: f64, c6: f64) -> RateMatrix {
    let Some(radius) = params.hole_radius(rho.rydberg_fraction()) else {
        return RateMatrix::zero(tau);
    };
    let k = params.rate_scale * rate_prefactor(radius, density, c6, params.d) * tau;
    let mut gamma = [[ZERO; 3]; 3];
    for (w, row) in gamma.iter_mut().enumerate() {
        for (wp, g) in row.iter_mut().enumerate() {
            let corr = frame.jumps[wp] * frame.jumps[w].adjoint();
            *g = trace(&(rho.rho * corr)) * k;
        }
    }
    RateMatrix { gamma, tau }
}

/// Right-hand side `dρ/dτ` together with the frame and rates it used.
pub fn generator(rho: &Mat2, tau: f64, params: &MasterParams) -> (Mat2, EigenFrame, RateMatrix) {
    let state = SingleSiteState { rho: *rho, tau };
    let frame = params.frame(state.rydberg_fraction());
    let rates = rates(&state, &frame, tau, params, 1.0, 1.0);
    let h = frame.hamiltonian;
    let minus_i = Complex64::new(0.0, -1.0);
    let mut out = (h * rho - rho * h) * minus_i;
    for w in 0..3 {
        for wp in 0..3 {
            let g = rates.gamma[w][wp];
            if g == ZERO {
                continue;
            }
            let a = &frame.jumps[w];
            let b_dag = frame.jumps[wp].adjoint();
            let ba = b_dag * a;
            out += (a * rho * b_dag - (ba * rho + rho * ba) * real(0.5)) * g;
        }
    }
    (out, frame, rates)
}

/// One RK4 step with frame and rates recomputed at every stage.
pub fn step_master(state: &SingleSiteState, params: &MasterParams, dtau: f64) -> Result<SingleSiteState> {
    if !(dtau > 0.0 && dtau.is_finite()) {
        return Err(Error::Parameter(format!("time step must be positive, got {dtau}")));
    }
    let (t, y) = (state.tau, state.rho);
    let half = real(0.5 * dtau);
    let (k1, _, _) = generator(&y, t, params);
    let (k2, _, _) = generator(&(y + k1 * half), t + 0.5 * dtau, params);
    let (k3, _, _) = generator(&(y + k2 * half), t + 0.5 * dtau, params);
    let (k4, _, _) = generator(&(y + k3 * real(dtau)), t + dtau, params);
    let rho = y + (k1 + (k2 + k3) * real(2.0) + k4) * real(dtau / 6.0);
    let mut next = SingleSiteState { rho, tau: t + dtau };
    next.repair();
    Ok(next)
}

/// Step `min(0.01 · 2π/ω0, RATE_STEP / Σ|γ|)`, capped at `max_step`.
///
/// The rate sum is evaluated at the end of the step since the rates grow
/// linearly with the elapsed time.
pub fn adaptive_step(state: &SingleSiteState, params: &MasterParams, max_step: f64) -> f64 {
    let frame = params.frame(state.rydberg_fraction());
    let mut dt = max_step;
    if frame.omega0 > 0.0 {
        dt = dt.min(1e-2 * TAU / frame.omega0);
    }
    // Rate sum per unit elapsed time.
    let unit = rates(state, &frame, 1.0, params, 1.0, 1.0);
    let slope: f64 = unit.gamma.iter().flatten().map(|g| g.norm()).sum();
    if slope > 0.0 {
        // Largest dt with slope · (τ + dt) · dt <= RATE_STEP.
        let t = state.tau.max(0.0);
        let limit = 0.5 * (-t + (t * t + 4.0 * RATE_STEP / slope).sqrt());
        dt = dt.min(limit);
    }
    dt
}

/// Bound on `Σ|γ| · dτ` inside the RK4 stability region.
pub const RATE_STEP: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MasterSample {
    pub tau: f64,
    pub f_r: f64,
    pub trace: f64,
    pub energy: f64,
    pub min_eig: f64,
}

#[derive(Clone, Debug, Default)]
pub struct MasterTrajectory {
    pub samples: Vec<MasterSample>,
    /// Samples whose smallest eigenvalue fell below `-POSITIVITY_TOLERANCE`.
    pub positivity_violations: usize,
    pub steps: usize,
}

impl MasterTrajectory {
    pub fn fraction_series(&self) -> Vec<(f64, f64)> {
        self.samples.iter().map(|s| (s.tau, s.f_r)).collect()
    }

    pub fn final_state_fraction(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.f_r)
    }
}

/// Integrates from `initial` up to `tau_max`, sampling every `sample_interval`.
pub fn integrate_master(
    initial: SingleSiteState,
    params: &MasterParams,
    tau_max: f64,
    sample_interval: f64,
) -> Result<(SingleSiteState, MasterTrajectory)> {
    if !(sample_interval > 0.0) || !(tau_max >= initial.tau) {
        return Err(Error::Parameter("need a positive sample interval and tau_max >= start".into()));
    }
    let mut traj = MasterTrajectory::default();
    let mut state = initial;
    let record = |s: &SingleSiteState, traj: &mut MasterTrajectory| {
        let frame = params.frame(s.rydberg_fraction());
        let min_eig = s.min_eigenvalue();
        if min_eig < -POSITIVITY_TOLERANCE {
            traj.positivity_violations += 1;
        }
        traj.samples.push(MasterSample {
            tau: s.tau,
            f_r: s.rydberg_fraction(),
            trace: s.trace(),
            energy: frame.energy(&s.rho),
            min_eig,
        });
    };
    record(&state, &mut traj);
    let samples = ((tau_max - initial.tau) / sample_interval).floor() as usize;
    for k in 1..=samples {
        let target = initial.tau + k as f64 * sample_interval;
        while state.tau < target {
            let dt = adaptive_step(&state, params, sample_interval).min(target - state.tau);
            state = step_master(&state, params, dt)?;
            traj.steps += 1;
            if target - state.tau < 1e-12 * target.max(1.0) {
                state.tau = target;
            }
        }
        record(&state, &mut traj);
    }
    if traj.positivity_violations > 0 {
        log::warn!("{} samples with negative eigenvalues below -{POSITIVITY_TOLERANCE:e}", traj.positivity_violations);
    }
    Ok((state, traj))
}

/// Two-scalar match of a master-equation curve onto an exact curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaleFit {
    /// Time-axis scale: the fitted curve is `fr_scale · m(rabi_scale · τ)`.
    pub rabi_scale: f64,
    pub fr_scale: f64,
    pub rms: f64,
}

impl ScaleFit {
    /// Fitted master curve on the given time grid.
    pub fn apply(&self, master: &[(f64, f64)], taus: &[f64]) -> Result<Vec<f64>> {
        taus.iter()
            .map(|&t| interpolate_or_err(master, self.rabi_scale * t).map(|m| self.fr_scale * m))
            .collect()
    }
}

/// Linear interpolation on a sorted series; `None` outside its range.
pub fn interpolate(series: &[(f64, f64)], tau: f64) -> Option<f64> {
    let first = series.first()?;
    let last = series.last()?;
    if tau < first.0 || tau > last.0 {
        return None;
    }
    let k = series.partition_point(|p| p.0 <= tau);
    if k == 0 {
        return Some(first.1);
    }
    if k == series.len() {
        return Some(last.1);
    }
    let (a, b) = (series[k - 1], series[k]);
    let w = (tau - a.0) / (b.0 - a.0);
    Some(a.1 + w * (b.1 - a.1))
}

fn interpolate_or_err(series: &[(f64, f64)], tau: f64) -> Result<f64> {
    interpolate(series, tau).ok_or_else(|| Error::Analysis(format!("tau = {tau} outside the master curve")))
}

/// Least-squares amplitude and rms for a fixed time scale.
fn amplitude_fit(master: &[(f64, f64)], exact: &[(f64, f64)], scale: f64) -> Result<(f64, f64)> {
    let mut mm = 0.0;
    let mut me = 0.0;
    let mut m_vals = Vec::with_capacity(exact.len());
    for &(t, e) in exact {
        let m = interpolate_or_err(master, scale * t)?;
        mm += m * m;
        me += m * e;
        m_vals.push(m);
    }
    let amp = if mm > 0.0 { me / mm } else { 0.0 };
    let sse: f64 = m_vals.iter().zip(exact).map(|(m, (_, e))| (amp * m - e).powi(2)).sum();
    Ok((amp, (sse / exact.len() as f64).sqrt()))
}

/// Fits `exact(τ) ≈ A · master(s τ)` for the time scale `s` (effective Rabi
/// frequency) and amplitude `A` (saturated fraction).
///
/// `s` is searched on `[0.25, min(4, τ_master_max / τ_exact_max)]` with a
/// log grid followed by golden-section refinement; `A` is solved in closed
/// form for each `s`.
pub fn fit_to_exact(master: &[(f64, f64)], exact: &[(f64, f64)]) -> Result<ScaleFit> {
    if master.len() < 2 || exact.is_empty() {
        return Err(Error::InsufficientData { needed: 2, got: master.len().min(exact.len()) });
    }
    let m_lo = master[0].0;
    let m_hi = master[master.len() - 1].0;
    let e_lo = exact[0].0;
    let e_hi = exact[exact.len() - 1].0;
    if e_hi <= 0.0 {
        return Err(Error::Analysis("exact curve needs positive times".into()));
    }
    let s_hi = (m_hi / e_hi).min(4.0);
    let s_lo = if e_lo > 0.0 { (m_lo / e_lo).max(0.25) } else { 0.25 };
    if s_hi < s_lo || m_lo > 0.0 && e_lo <= 0.0 {
        return Err(Error::Analysis("master and exact time grids do not overlap".into()));
    }
    let cost = |s: f64| amplitude_fit(master, exact, s).map(|(_, rms)| rms);
    let grid = 400;
    let (l0, l1) = (s_lo.ln(), s_hi.ln());
    let points: Vec<f64> = (0..=grid).map(|k| (l0 + (l1 - l0) * k as f64 / grid as f64).exp()).collect();
    let mut best = 0;
    let mut best_cost = f64::INFINITY;
    for (k, &s) in points.iter().enumerate() {
        let c = cost(s)?;
        if c < best_cost {
            best_cost = c;
            best = k;
        }
    }
    let (mut a, mut b) = (points[best.saturating_sub(1)], points[(best + 1).min(grid)]);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let (mut c1, mut c2) = (cost(x1)?, cost(x2)?);
    for _ in 0..100 {
        if (b - a) < 1e-12 * b {
            break;
        }
        if c1 <= c2 {
            b = x2;
            x2 = x1;
            c2 = c1;
            x1 = b - phi * (b - a);
            c1 = cost(x1)?;
        } else {
            a = x1;
            x1 = x2;
            c1 = c2;
            x2 = a + phi * (b - a);
            c2 = cost(x2)?;
        }
    }
    let mut s = 0.5 * (a + b);
    if cost(points[best])? < cost(s)? {
        s = points[best];
    }
    let (amp, rms) = amplitude_fit(master, exact, s)?;
    Ok(ScaleFit { rabi_scale: s, fr_scale: amp, rms })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn commutator(a: &Mat2, b: &Mat2) -> Mat2 {
        a * b - b * a
    }

    #[test]
    fn free_spin_frame() {
        let frame = eigen_frame(&SingleSiteState::ground(), 0.3, 3);
        assert_eq!(frame.h_z, 0.0);
        assert_abs_diff_eq!(frame.omega0, 0.3, epsilon = 1e-15);
        assert_eq!(frame.theta, FRAC_PI_2);
    }

    #[test]
    fn jump_operators_resolve_the_projector() {
        for &f in &[0.0, 0.01, 0.2, 0.49] {
            let frame = EigenFrame::from_fields(f, 0.05, longitudinal_field(f, 3));
            let sum = frame.jumps[0] + frame.jumps[1] + frame.jumps[2];
            assert!((sum - projector_excited()).norm() < 1e-15);
            assert!((frame.jumps[0] - frame.jumps[2].adjoint()).norm() < 1e-15);
        }
    }

    #[test]
    fn eigenoperator_relations() {
        for &f in &[0.013, 0.1, 0.37] {
            let frame = EigenFrame::from_fields(f, 0.021, longitudinal_field(f, 3));
            for (a, w) in frame.jumps.iter().zip(frame.frequencies()) {
                let lhs = commutator(&frame.hamiltonian, a);
                assert!((lhs + a * real(w)).norm() < 1e-14, "ω = {w}");
            }
        }
    }

    #[test]
    fn rates_vanish_without_excitations() {
        let params = MasterParams::new(0.1, 3).unwrap().with_hole(CorrelationHole::Instantaneous);
        let rho = SingleSiteState::ground();
        let frame = params.frame(0.0);
        assert_eq!(rates(&rho, &frame, 5.0, &params, 1.0, 1.0).max_abs(), 0.0);
    }

    #[test]
    fn rates_are_linear_in_time_and_hermitian() {
        let params = MasterParams::new(0.1, 3).unwrap();
        let rho = SingleSiteState {
            rho: Mat2::new(real(0.7), Complex64::new(0.1, 0.2), Complex64::new(0.1, -0.2), real(0.3)),
            tau: 0.0,
        };
        let frame = params.frame(rho.rydberg_fraction());
        let a = rates(&rho, &frame, 2.0, &params, 1.0, 1.0);
        let b = rates(&rho, &frame, 4.0, &params, 1.0, 1.0);
        for w in 0..3 {
            for wp in 0..3 {
                assert!((b.gamma[w][wp] - a.gamma[w][wp] * 2.0).norm() < 1e-14);
                assert!((a.gamma[w][wp] - a.gamma[wp][w].conj()).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn meanfield_state_is_stationary() {
        for &alpha in &[1.0 / 36.0, 0.003, 0.5] {
            let params = MasterParams::new(alpha, 3).unwrap();
            let sol = solve_selfconsistent(alpha, 3, Protocol::Sudden).unwrap();
            let rho = sol.density_matrix();
            let (drho, frame, _) = generator(&rho, 100.0, &params);
            assert!(drho.norm() < 1e-9, "alpha = {alpha}: |dρ| = {}", drho.norm());
            assert!(frame.energy(&rho).abs() < 1e-12);
        }
    }

    #[test]
    fn unitary_without_bath() {
        let params = MasterParams::new(1.0 / 36.0, 3).unwrap().with_rate_scale(0.0);
        let (end, traj) = integrate_master(SingleSiteState::ground(), &params, 200.0, 1.0).unwrap();
        // RK4 is not exactly unitary; the loss is set by the step size.
        assert_abs_diff_eq!(end.purity(), 1.0, epsilon = 1e-6);
        for s in &traj.samples {
            assert!(s.min_eig.abs() < 1e-6);
            assert!(s.energy.abs() < 1e-6, "{s:?}");
        }
    }

    #[test]
    fn interpolation() {
        let s = [(0.0, 0.0), (1.0, 2.0), (3.0, 0.0)];
        assert_eq!(interpolate(&s, 0.5), Some(1.0));
        assert_eq!(interpolate(&s, 2.0), Some(1.0));
        assert_eq!(interpolate(&s, 3.5), None);
    }

    fn synthetic(t: f64) -> f64 {
        0.1 * (1.0 - (-t / 30.0).exp() * (0.3 * t).cos())
    }

    #[test]
    fn identical_curves_fit_trivially() {
        let curve: Vec<(f64, f64)> = (0..=400).map(|k| (k as f64, synthetic(k as f64))).collect();
        let fit = fit_to_exact(&curve, &curve).unwrap();
        assert_abs_diff_eq!(fit.rabi_scale, 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(fit.fr_scale, 1.0, epsilon = 1e-6);
        assert!(fit.rms < 1e-6);
    }

    #[test]
    fn recovers_a_stretched_time_axis() {
        let master: Vec<(f64, f64)> = (0..=8000).map(|k| (0.1 * k as f64, synthetic(0.1 * k as f64))).collect();
        let exact: Vec<(f64, f64)> = (0..=400).map(|k| (k as f64, 0.8 * synthetic(1.1 * k as f64))).collect();
        let fit = fit_to_exact(&master, &exact).unwrap();
        assert!((fit.rabi_scale - 1.1).abs() < 1e-3, "{fit:?}");
        assert!((fit.fr_scale - 0.8).abs() < 1e-3, "{fit:?}");
    }

    #[test]
    fn disjoint_grids_are_rejected() {
        let master: Vec<(f64, f64)> = (0..10).map(|k| (k as f64, 0.0)).collect();
        let exact: Vec<(f64, f64)> = (0..10).map(|k| (100.0 + k as f64, 0.0)).collect();
        assert!(fit_to_exact(&master, &exact).is_err());
    }
}
