//! Matrix-free Schrödinger dynamics on a truncated basis.
//!
//! The Hamiltonian is the projection of
//!
//! ```text
//! H = -Δ/2 Σ σz_i + Ω/2 Σ σx_i + Σ_{i<j} V_ij P_i P_j
//! ```
//!
//! onto the retained masks. Flips that leave the basis are dropped, which
//! keeps the projected operator Hermitian. All energies are divided by a
//! caller-chosen unit (normally `E0 = C6 n^{6/d}`), so time is measured in
//! the matching dimensionless unit `τ = t E0` (ħ = 1).

use num_complex::Complex64;

use crate::basis::TruncatedBasis;
use crate::error::{Error, Result};

/// Largest allowed `dt * max|H_kk|`.
pub const STABILITY_GUARD: f64 = 0.1;

/// Norm drift that triggers renormalization.
pub const RENORM_THRESHOLD: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Drive {
    pub omega: f64,
    pub delta: f64,
}

impl Drive {
    pub fn resonant(omega: f64) -> Self {
        Self { omega, delta: 0.0 }
    }
}

/// Truncated Hamiltonian with its diagonal cached; never stored as a matrix.
#[derive(Clone, Debug)]
pub struct Hamiltonian<'b> {
    basis: &'b TruncatedBasis,
    diagonal: Vec<f64>,
    coupling: f64,
}

impl<'b> Hamiltonian<'b> {
    /// `energy_unit` divides every energy, e.g. `E0`; pass 1 for raw units.
    pub fn new(basis: &'b TruncatedBasis, drive: Drive, energy_unit: f64) -> Self {
        let n = basis.atoms() as f64;
        let diagonal = basis
            .states()
            .iter()
            .map(|s| {
                let k = s.excitations() as f64;
                (-0.5 * drive.delta * (2.0 * k - n) + s.vdw_energy) / energy_unit
            })
            .collect();
        Self { basis, diagonal, coupling: 0.5 * drive.omega / energy_unit }
    }

    pub fn basis(&self) -> &TruncatedBasis {
        self.basis
    }

    pub fn dim(&self) -> usize {
        self.diagonal.len()
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    /// Off-diagonal element `Ω/2` in the scaled units.
    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    pub fn max_abs_diagonal(&self) -> f64 {
        self.diagonal.iter().fold(0.0, |m, d| m.max(d.abs()))
    }

    /// `out = H psi`.
    pub fn apply(&self, psi: &[Complex64], out: &mut [Complex64]) -> Result<()> {
        self.check(psi.len())?;
        self.check(out.len())?;
        self.apply_unchecked(psi, out, Complex64::new(1.0, 0.0));
        Ok(())
    }

    /// `out = factor * H psi`, lengths already validated.
    fn apply_unchecked(&self, psi: &[Complex64], out: &mut [Complex64], factor: Complex64) {
        let c = self.coupling;
        for (k, slot) in out.iter_mut().enumerate() {
            let mut acc = psi[k] * self.diagonal[k];
            let mut hop = Complex64::new(0.0, 0.0);
            for &p in self.basis.neighbors(k) {
                hop += psi[p as usize];
            }
            acc += hop * c;
            *slot = acc * factor;
        }
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: len });
        }
        Ok(())
    }

    /// `<psi|H|psi>` for a state of any norm.
    pub fn expectation(&self, psi: &[Complex64]) -> Result<f64> {
        let mut h = vec![Complex64::new(0.0, 0.0); psi.len()];
        self.apply(psi, &mut h)?;
        Ok(psi.iter().zip(&h).map(|(a, b)| (a.conj() * b).re).sum())
    }
}

/// Complex amplitudes over a truncated basis at dimensionless time `tau`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    pub amplitudes: Vec<Complex64>,
    pub tau: f64,
}

impl StateVector {
    /// All atoms in the ground state (the empty mask, index 0 of every basis).
    pub fn all_ground(basis: &TruncatedBasis) -> Self {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); basis.len()];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Self { amplitudes, tau: 0.0 }
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(Complex64::norm_sqr).sum::<f64>().sqrt()
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            let inv = 1.0 / n;
            self.amplitudes.iter_mut().for_each(|a| *a *= inv);
        }
    }
}

/// `f_R = Σ_k |a_k|² popcount(k) / N`.
pub fn rydberg_fraction(psi: &StateVector, basis: &TruncatedBasis) -> f64 {
    let weighted: f64 = psi
        .amplitudes
        .iter()
        .zip(basis.states())
        .map(|(a, s)| a.norm_sqr() * s.excitations() as f64)
        .sum();
    weighted / basis.atoms() as f64
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectorySample {
    pub tau: f64,
    pub f_r: f64,
    pub norm: f64,
    pub energy: f64,
}

#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    /// Number of renormalizations applied.
    pub renormalizations: usize,
    /// Largest `|norm - 1|` seen before any renormalization.
    pub max_norm_drift: f64,
    pub steps: usize,
}

impl Trajectory {
    pub fn fraction_series(&self) -> Vec<(f64, f64)> {
        self.samples.iter().map(|s| (s.tau, s.f_r)).collect()
    }

    /// Largest `|E(τ) - E(0)|`.
    pub fn energy_drift(&self) -> f64 {
        let e0 = self.samples.first().map_or(0.0, |s| s.energy);
        self.samples.iter().map(|s| (s.energy - e0).abs()).fold(0.0, f64::max)
    }
}

/// Classical fourth-order Runge–Kutta integrator for `i dψ/dτ = H ψ`.
pub struct Rk4<'h, 'b> {
    hamiltonian: &'h Hamiltonian<'b>,
    dt: f64,
    k: [Vec<Complex64>; 4],
    stage: Vec<Complex64>,
}

impl<'h, 'b> Rk4<'h, 'b> {
    pub fn new(hamiltonian: &'h Hamiltonian<'b>, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Parameter(format!("time step must be positive, got {dt}")));
        }
        let max_diag = hamiltonian.max_abs_diagonal();
        let product = dt * max_diag;
        if product > STABILITY_GUARD {
            return Err(Error::Stability { dt, max_diag, product });
        }
        let n = hamiltonian.dim();
        let zero = || vec![Complex64::new(0.0, 0.0); n];
        Ok(Self { hamiltonian, dt, k: [zero(), zero(), zero(), zero()], stage: zero() })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// One step without renormalization.
    pub fn step(&mut self, psi: &mut StateVector) -> Result<()> {
        let h = self.hamiltonian;
        h.check(psi.amplitudes.len())?;
        let dt = self.dt;
        let minus_i = Complex64::new(0.0, -1.0);
        let y = &mut psi.amplitudes;

        h.apply_unchecked(y, &mut self.k[0], minus_i);
        for (s, (a, k)) in self.stage.iter_mut().zip(y.iter().zip(&self.k[0])) {
            *s = a + k * (0.5 * dt);
        }
        h.apply_unchecked(&self.stage, &mut self.k[1], minus_i);
        for (s, (a, k)) in self.stage.iter_mut().zip(y.iter().zip(&self.k[1])) {
            *s = a + k * (0.5 * dt);
        }
        h.apply_unchecked(&self.stage, &mut self.k[2], minus_i);
        for (s, (a, k)) in self.stage.iter_mut().zip(y.iter().zip(&self.k[2])) {
            *s = a + k * dt;
        }
        h.apply_unchecked(&self.stage, &mut self.k[3], minus_i);

        let w = dt / 6.0;
        let [k1, k2, k3, k4] = &self.k;
        for (idx, a) in y.iter_mut().enumerate() {
            *a += (k1[idx] + (k2[idx] + k3[idx]) * 2.0 + k4[idx]) * w;
        }
        psi.tau += dt;
        Ok(())
    }

    /// Integrates `steps` steps, sampling every `sample_every` steps
    /// (including the initial state). The state is renormalized whenever its
    /// norm drifts beyond [`RENORM_THRESHOLD`].
    pub fn propagate(&mut self, psi: &mut StateVector, steps: usize, sample_every: usize) -> Result<Trajectory> {
        let sample_every = sample_every.max(1);
        let ham = self.hamiltonian;
        let basis = ham.basis();
        let mut traj = Trajectory::default();
        let record = |psi: &StateVector, traj: &mut Trajectory| -> Result<()> {
            let norm = psi.norm();
            let energy = ham.expectation(&psi.amplitudes)? / (norm * norm);
            traj.samples.push(TrajectorySample { tau: psi.tau, f_r: rydberg_fraction(psi, basis) / (norm * norm), norm, energy });
            Ok(())
        };
        record(psi, &mut traj)?;
        for step in 1..=steps {
            self.step(psi)?;
            let drift = (psi.norm() - 1.0).abs();
            traj.max_norm_drift = traj.max_norm_drift.max(drift);
            if drift > RENORM_THRESHOLD {
                log::debug!("renormalizing at tau = {:.4}: norm drift {drift:e}", psi.tau);
                psi.normalize();
                traj.renormalizations += 1;
            }
            if step % sample_every == 0 {
                record(psi, &mut traj)?;
            }
        }
        traj.steps = steps;
        Ok(traj)
    }
}

/// Default step `0.02 / max(Ω, E_max)` in the scaled units.
pub fn default_time_step(hamiltonian: &Hamiltonian<'_>, factor: f64) -> f64 {
    let scale = hamiltonian.max_abs_diagonal().max(2.0 * hamiltonian.coupling());
    factor / scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{AtomEnsemble, InteractionTable};
    use approx::assert_abs_diff_eq;

    fn single_atom() -> (InteractionTable, TruncatedBasis) {
        let v = InteractionTable::from_matrix(1, 1.0, vec![0.0]).unwrap();
        let b = TruncatedBasis::build(&v, f64::INFINITY).unwrap();
        (v, b)
    }

    #[test]
    fn single_spin_coupling() {
        let (_, b) = single_atom();
        let h = Hamiltonian::new(&b, Drive::resonant(2.0), 1.0);
        let psi = StateVector::all_ground(&b);
        let mut out = vec![Complex64::default(); 2];
        h.apply(&psi.amplitudes, &mut out).unwrap();
        assert_eq!(out[0], Complex64::new(0.0, 0.0));
        assert_eq!(out[1], Complex64::new(1.0, 0.0));
    }

    #[test]
    fn diagonal_without_drive() {
        let e = AtomEnsemble::sample(5, 1.0, 2, 3).unwrap();
        let v = InteractionTable::new(&e, 0.01).unwrap();
        let b = TruncatedBasis::build(&v, f64::INFINITY).unwrap();
        let h = Hamiltonian::new(&b, Drive { omega: 0.0, delta: 0.7 }, 1.0);
        for (k, s) in b.states().iter().enumerate() {
            let n_exc = s.excitations() as f64;
            assert_abs_diff_eq!(h.diagonal()[k], -0.35 * (2.0 * n_exc - 5.0) + s.vdw_energy, epsilon = 1e-12);
        }
    }

    #[test]
    fn mismatched_lengths_are_rejected() {
        let (_, b) = single_atom();
        let h = Hamiltonian::new(&b, Drive::resonant(1.0), 1.0);
        let mut out = vec![Complex64::default(); 3];
        assert!(matches!(h.apply(&[Complex64::default(); 2], &mut out), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn single_atom_rabi_oscillation() {
        let (_, b) = single_atom();
        let omega = 1.0;
        let h = Hamiltonian::new(&b, Drive::resonant(omega), 1.0);
        let mut rk = Rk4::new(&h, 1e-3 / omega).unwrap();
        let mut psi = StateVector::all_ground(&b);
        let traj = rk.propagate(&mut psi, 20_000, 50).unwrap();
        for s in &traj.samples {
            assert_abs_diff_eq!(s.f_r, (0.5 * omega * s.tau).sin().powi(2), epsilon = 1e-6);
        }
    }

    #[test]
    fn stationary_without_drive() {
        let e = AtomEnsemble::sample(4, 1.0, 1, 9).unwrap();
        let v = InteractionTable::new(&e, 1e-4).unwrap();
        let b = TruncatedBasis::build(&v, f64::INFINITY).unwrap();
        let h = Hamiltonian::new(&b, Drive::resonant(0.0), e.energy_unit(1e-4));
        let mut rk = Rk4::new(&h, default_time_step(&h, 0.02)).unwrap();
        let mut psi = StateVector::all_ground(&b);
        let traj = rk.propagate(&mut psi, 500, 10).unwrap();
        assert!(traj.samples.iter().all(|s| s.f_r == 0.0));
    }

    #[test]
    fn stability_guard_rejects_large_steps() {
        let e = AtomEnsemble::sample(4, 1.0, 3, 1).unwrap();
        let v = InteractionTable::new(&e, 1.0).unwrap();
        let b = TruncatedBasis::build(&v, f64::INFINITY).unwrap();
        let h = Hamiltonian::new(&b, Drive::resonant(1.0), 1.0);
        let dt = 1.0 / h.max_abs_diagonal();
        assert!(matches!(Rk4::new(&h, dt), Err(Error::Stability { .. })));
    }

    #[test]
    fn fraction_of_simple_states() {
        let v = InteractionTable::from_matrix(2, 1.0, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let b = TruncatedBasis::build(&v, f64::INFINITY).unwrap();
        let mut psi = StateVector::all_ground(&b);
        assert_eq!(rydberg_fraction(&psi, &b), 0.0);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        psi.amplitudes = vec![Complex64::new(s, 0.0), Complex64::new(s, 0.0), Complex64::default(), Complex64::default()];
        assert_abs_diff_eq!(rydberg_fraction(&psi, &b), 0.25, epsilon = 1e-15);
    }
}
