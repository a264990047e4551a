//! Pair correlations of a many-body state.

use crate::basis::{set_bits, TruncatedBasis};
use crate::dynamics::{rydberg_fraction, StateVector};
use crate::error::{Error, Result};
use crate::geometry::AtomEnsemble;

/// Uniform radial bins on `[0, r_max)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadialBins {
    pub r_max: f64,
    pub count: usize,
}

impl RadialBins {
    pub fn width(&self) -> f64 {
        self.r_max / self.count as f64
    }

    fn locate(&self, r: f64) -> Option<usize> {
        if r < 0.0 || r >= self.r_max {
            return None;
        }
        Some(((r / self.width()) as usize).min(self.count - 1))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorrelationBin {
    pub r_center: f64,
    /// `NaN` when no pair falls into the bin.
    pub g2: f64,
    pub pairs: usize,
}

/// Expectation `<P_i P_j>` for every pair, row-major `N x N`.
pub fn pair_excitations(psi: &StateVector, basis: &TruncatedBasis) -> Vec<f64> {
    let n = basis.atoms();
    let mut out = vec![0.0; n * n];
    for (a, s) in psi.amplitudes.iter().zip(basis.states()) {
        let w = a.norm_sqr();
        if w == 0.0 || s.mask.count_ones() < 2 {
            continue;
        }
        for i in set_bits(s.mask) {
            for j in set_bits(s.mask.checked_shr(i as u32 + 1).unwrap_or(0)) {
                out[i * n + i + 1 + j] += w;
            }
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            out[j * n + i] = out[i * n + j];
        }
    }
    out
}

/// Radially binned `g2(r) = <P_i P_j> / f_R^2` averaged over the pairs in each bin.
pub fn pair_correlation(
    psi: &StateVector,
    basis: &TruncatedBasis,
    ensemble: &AtomEnsemble,
    bins: RadialBins,
) -> Result<Vec<CorrelationBin>> {
    if bins.count == 0 || !(bins.r_max > 0.0) {
        return Err(Error::Parameter("radial bins need a positive count and range".into()));
    }
    if ensemble.len() != basis.atoms() {
        return Err(Error::DimensionMismatch { expected: basis.atoms(), found: ensemble.len() });
    }
    let f_r = rydberg_fraction(psi, basis);
    if f_r <= 0.0 {
        return Err(Error::UndefinedCorrelation);
    }
    let n = basis.atoms();
    let pp = pair_excitations(psi, basis);
    let mut sums = vec![0.0; bins.count];
    let mut counts = vec![0usize; bins.count];
    for i in 0..n {
        for j in i + 1..n {
            if let Some(b) = bins.locate(ensemble.distance(i, j)) {
                sums[b] += pp[i * n + j];
                counts[b] += 1;
            }
        }
    }
    let w = bins.width();
    Ok((0..bins.count)
        .map(|b| CorrelationBin {
            r_center: (b as f64 + 0.5) * w,
            g2: if counts[b] > 0 { sums[b] / counts[b] as f64 / (f_r * f_r) } else { f64::NAN },
            pairs: counts[b],
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::Mask;
    use crate::geometry::InteractionTable;
    use num_complex::Complex64;

    fn full(ensemble: &AtomEnsemble) -> TruncatedBasis {
        let v = InteractionTable::new(ensemble, 1.0).unwrap();
        TruncatedBasis::build(&v, f64::INFINITY).unwrap()
    }

    #[test]
    fn product_state_is_uncorrelated() {
        // Every atom independently excited with probability p.
        let e = AtomEnsemble::sample(6, 1.0, 2, 11).unwrap();
        let b = full(&e);
        let p: f64 = 0.3;
        let amplitudes = b
            .states()
            .iter()
            .map(|s| {
                let k = s.excitations() as i32;
                Complex64::new((p.powi(k) * (1.0 - p).powi(6 - k)).sqrt(), 0.0)
            })
            .collect();
        let psi = StateVector { amplitudes, tau: 0.0 };
        let g2 = pair_correlation(&psi, &b, &e, RadialBins { r_max: 1.0, count: 5 }).unwrap();
        for bin in g2.iter().filter(|b| b.pairs > 0) {
            assert!((bin.g2 - 1.0).abs() < 1e-12, "{bin:?}");
        }
    }

    #[test]
    fn doubly_excited_pair() {
        let e = AtomEnsemble::from_positions(1, 4.0, 0, &[vec![0.5], vec![1.5]]).unwrap();
        let b = full(&e);
        let mut psi = StateVector::all_ground(&b);
        psi.amplitudes[0] = Complex64::default();
        psi.amplitudes[b.position(0b11 as Mask).unwrap()] = Complex64::new(1.0, 0.0);
        let g2 = pair_correlation(&psi, &b, &e, RadialBins { r_max: 2.0, count: 4 }).unwrap();
        assert_eq!(g2[2].pairs, 1);
        assert!((g2[2].g2 - 1.0).abs() < 1e-15);
        assert!(g2[0].g2.is_nan());
    }

    #[test]
    fn ground_state_has_no_correlation() {
        let e = AtomEnsemble::sample(3, 1.0, 1, 1).unwrap();
        let b = full(&e);
        let psi = StateVector::all_ground(&b);
        assert!(matches!(
            pair_correlation(&psi, &b, &e, RadialBins { r_max: 0.5, count: 2 }),
            Err(Error::UndefinedCorrelation)
        ));
    }
}
