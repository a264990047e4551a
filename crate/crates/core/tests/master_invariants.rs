//! Trajectory-level invariants of the TCL2 master equation.

use num_complex::Complex64;
use rydberg_core::master::{
    integrate_master, projector_excited, step_master, MasterParams, SingleSiteState,
};
use rydberg_core::meanfield::{solve_selfconsistent, Protocol};

#[test]
fn trace_energy_and_frames_along_a_trajectory() {
    for &(alpha, d) in &[(1.0 / 36.0, 3), (0.01, 1), (0.05, 2)] {
        let params = MasterParams::new(alpha, d).unwrap();
        let (_, traj) = integrate_master(SingleSiteState::ground(), &params, 400.0, 0.5).unwrap();
        assert_eq!(traj.positivity_violations, 0);
        for s in &traj.samples {
            assert!((s.trace - 1.0).abs() < 1e-9, "{s:?}");
            assert!(s.energy.abs() < 1e-6, "{s:?}");
            let frame = params.frame(s.f_r);
            let sum = frame.jumps[0] + frame.jumps[1] + frame.jumps[2];
            assert!((sum - projector_excited()).norm() < 1e-14);
            for (a, w) in frame.jumps.iter().zip(frame.frequencies()) {
                let comm = frame.hamiltonian * a - a * frame.hamiltonian;
                assert!((comm + a * Complex64::new(w, 0.0)).norm() < 1e-13);
            }
        }
    }
}

#[test]
fn relaxes_to_the_sudden_fixed_point() {
    for &(alpha, d) in &[(1.0 / 36.0, 3), (0.2, 3), (0.01, 1), (0.05, 2)] {
        let params = MasterParams::new(alpha, d).unwrap();
        let target = solve_selfconsistent(alpha, d, Protocol::Sudden).unwrap().f_r;
        let (end, _) = integrate_master(SingleSiteState::ground(), &params, 1500.0, 10.0).unwrap();
        assert!((end.rydberg_fraction() - target).abs() < 1e-3, "alpha = {alpha}, d = {d}");
    }
}

#[test]
fn unitary_limit_keeps_the_spectrum() {
    let params = MasterParams::new(0.05, 3).unwrap().with_rate_scale(0.0);
    let mixed = SingleSiteState {
        rho: nalgebra::Matrix2::new(
            Complex64::new(0.8, 0.0),
            Complex64::new(0.1, 0.05),
            Complex64::new(0.1, -0.05),
            Complex64::new(0.2, 0.0),
        ),
        tau: 0.0,
    };
    let initial = mixed.min_eigenvalue();
    let mut state = mixed;
    for _ in 0..2000 {
        state = step_master(&state, &params, 0.05).unwrap();
    }
    assert!((state.min_eigenvalue() - initial).abs() < 1e-9);
    assert!((state.purity() - mixed.purity()).abs() < 1e-9);
}
