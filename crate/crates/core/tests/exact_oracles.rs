//! Matrix-free exact dynamics against dense brute force.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rydberg_core::basis::{Mask, TruncatedBasis};
use rydberg_core::dynamics::{rydberg_fraction, Drive, Hamiltonian, Rk4, StateVector};
use rydberg_core::geometry::{realization_seed, AtomEnsemble, InteractionTable};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Dense `H = Ω/2 Σ σx - Δ/2 Σ σz + Σ V_ij P_i P_j` over all `2^N` masks.
fn dense_hamiltonian(table: &InteractionTable, drive: Drive) -> DMatrix<f64> {
    let n = table.len();
    let dim = 1usize << n;
    let mut h = DMatrix::zeros(dim, dim);
    for m in 0..dim {
        let mut diag = 0.0;
        for i in 0..n {
            let ei = (m >> i) & 1 == 1;
            diag -= 0.5 * drive.delta * if ei { 1.0 } else { -1.0 };
            for j in i + 1..n {
                if ei && (m >> j) & 1 == 1 {
                    diag += table.get(i, j);
                }
            }
            h[(m ^ (1 << i), m)] += 0.5 * drive.omega;
        }
        h[(m, m)] = diag;
    }
    h
}

fn ensemble(n: usize, d: usize, k: u64) -> (AtomEnsemble, InteractionTable) {
    let e = AtomEnsemble::sample(n, 1.0, d, realization_seed(99, k)).unwrap();
    let v = InteractionTable::new(&e, 1.0).unwrap();
    (e, v)
}

#[test]
fn matrix_free_product_matches_dense() {
    let (_, v) = ensemble(8, 3, 1);
    let b = TruncatedBasis::build(&v, f64::INFINITY).unwrap();
    let drive = Drive { omega: 1.3, delta: -0.4 };
    let h = Hamiltonian::new(&b, drive, 1.0);
    let dense = dense_hamiltonian(&v, drive);
    let psi: Vec<Complex64> = (0..b.len()).map(|k| c((k as f64 * 0.37).sin(), (k as f64 * 0.11).cos())).collect();
    let mut out = vec![c(0.0, 0.0); b.len()];
    h.apply(&psi, &mut out).unwrap();
    for (k, s) in b.states().iter().enumerate() {
        let m = s.mask as usize;
        let expected: Complex64 = (0..b.len()).map(|j| psi[j] * dense[(m, b.states()[j].mask as usize)]).sum();
        assert!((out[k] - expected).norm() < 1e-10 * (1.0 + expected.norm()), "row {k}");
    }
}

#[test]
fn truncated_hamiltonian_is_hermitian() {
    let (_, v) = ensemble(10, 2, 2);
    let b = TruncatedBasis::build(&v, 50.0).unwrap();
    let h = Hamiltonian::new(&b, Drive { omega: 0.7, delta: 0.2 }, 1.0);
    let phi: Vec<Complex64> = (0..b.len()).map(|k| c((k as f64).cos(), (2.0 * k as f64).sin())).collect();
    let psi: Vec<Complex64> = (0..b.len()).map(|k| c((0.5 * k as f64).sin(), 0.3)).collect();
    let (mut hphi, mut hpsi) = (vec![c(0.0, 0.0); b.len()], vec![c(0.0, 0.0); b.len()]);
    h.apply(&phi, &mut hphi).unwrap();
    h.apply(&psi, &mut hpsi).unwrap();
    let lhs: Complex64 = phi.iter().zip(&hpsi).map(|(a, b)| a.conj() * b).sum();
    let rhs: Complex64 = hphi.iter().zip(&psi).map(|(a, b)| a.conj() * b).sum();
    assert!((lhs - rhs).norm() < 1e-9 * lhs.norm());
}

#[test]
fn basis_matches_exhaustive_enumeration() {
    for k in 0..4u64 {
        let (_, v) = ensemble(14, 3, 10 + k);
        let cutoff = [0.5, 5.0, 50.0, 500.0][k as usize];
        let b = TruncatedBasis::build(&v, cutoff).unwrap();
        let brute: Vec<Mask> = (0..1u128 << 14)
            .filter(|&m| rydberg_core::basis::vdw_energy(m, &v) <= cutoff)
            .collect();
        let built: Vec<Mask> = b.states().iter().map(|s| s.mask).collect();
        assert_eq!(built, brute, "cutoff {cutoff}");
    }
}

#[test]
fn fraction_matches_dense_projectors() {
    let (_, v) = ensemble(6, 1, 3);
    let b = TruncatedBasis::build(&v, f64::INFINITY).unwrap();
    let amps: Vec<Complex64> = (0..b.len()).map(|k| c(1.0 / (1.0 + k as f64), 0.1 * k as f64)).collect();
    let mut psi = StateVector { amplitudes: amps, tau: 0.0 };
    psi.normalize();
    let mut expected = 0.0;
    for i in 0..6 {
        let p = DVector::from_fn(64, |m, _| if (m >> i) & 1 == 1 { 1.0 } else { 0.0 });
        expected += psi.amplitudes.iter().zip(p.iter()).map(|(a, w)| a.norm_sqr() * w).sum::<f64>();
    }
    assert!((rydberg_fraction(&psi, &b) - expected / 6.0).abs() < 1e-14);
}

/// Exact `f_R(τ)` via the spectral decomposition of the dense Hamiltonian.
fn dense_fraction_curve(v: &InteractionTable, drive: Drive, taus: &[f64]) -> Vec<f64> {
    let n = v.len();
    let eig = dense_hamiltonian(v, drive).symmetric_eigen();
    let overlap = eig.eigenvectors.row(0).transpose();
    taus.iter()
        .map(|&t| {
            let mut total = 0.0;
            for m in 0..1usize << n {
                let amp: Complex64 = (0..overlap.len())
                    .map(|j| eig.eigenvectors[(m, j)] * overlap[j] * Complex64::from_polar(1.0, -eig.eigenvalues[j] * t))
                    .sum();
                total += amp.norm_sqr() * (m.count_ones() as f64);
            }
            total / n as f64
        })
        .collect()
}

#[test]
fn propagation_matches_dense_spectral_solution() {
    let (_, raw) = ensemble(7, 3, 4);
    // Rescale C6 so the largest diagonal entry is 4 Ω.
    let full = TruncatedBasis::build(&raw, f64::INFINITY).unwrap();
    let scale = 4.0 / full.max_vdw_energy();
    let n = raw.len();
    let values: Vec<f64> = (0..n * n).map(|k| raw.get(k / n, k % n) * scale).collect();
    let v = InteractionTable::from_matrix(n, scale, values).unwrap();
    let b = TruncatedBasis::build(&v, f64::INFINITY).unwrap();
    let drive = Drive::resonant(1.0);
    let h = Hamiltonian::new(&b, drive, 1.0);
    let mut rk = Rk4::new(&h, 0.002).unwrap();
    let mut psi = StateVector::all_ground(&b);
    let traj = rk.propagate(&mut psi, 10_000, 500).unwrap();
    let taus: Vec<f64> = traj.samples.iter().map(|s| s.tau).collect();
    let dense = dense_fraction_curve(&v, drive, &taus);
    for (s, e) in traj.samples.iter().zip(dense) {
        assert!((s.f_r - e).abs() < 1e-8, "tau = {}: {} vs {e}", s.tau, s.f_r);
    }
}

#[test]
fn blockaded_pair_oscillates_collectively() {
    // Three-state oracle: |gg> couples to (|eg> + |ge>)/√2 with matrix element √2 Ω/2.
    let v = InteractionTable::from_matrix(2, 1.0, vec![0.0, 1e4, 1e4, 0.0]).unwrap();
    let b = TruncatedBasis::build(&v, 10.0).unwrap();
    assert_eq!(b.len(), 3);
    let h = Hamiltonian::new(&b, Drive::resonant(1.0), 1.0);
    let mut rk = Rk4::new(&h, 1e-3).unwrap();
    let mut psi = StateVector::all_ground(&b);
    let traj = rk.propagate(&mut psi, 20_000, 100).unwrap();
    let w = 2f64.sqrt();
    for s in &traj.samples {
        let expected = 0.5 * (0.5 * w * s.tau).sin().powi(2);
        assert!((s.f_r - expected).abs() < 1e-9, "{s:?}");
    }
}
