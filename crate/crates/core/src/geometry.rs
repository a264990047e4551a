//! Frozen-gas disorder realizations.
//!
//! Atoms are placed uniformly at random in a cubic box `[0, L)^d` with
//! periodic boundaries. Distances use the minimum-image convention and the
//! pair interaction is the repulsive van der Waals tail `C6 / r^6`.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Pairs closer than this fraction of the box length are rejected.
pub const COINCIDENCE_FRACTION: f64 = 1e-6;

/// Upper bound on resampling attempts before giving up on an ensemble.
const MAX_RESAMPLES: usize = 1000;

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of realization `k` of a run with the given master seed.
///
/// Depends only on `(master, k)`, so realizations can be generated in any
/// order and on any thread.
pub fn realization_seed(master: u64, k: u64) -> u64 {
    mix64(mix64(master) ^ k.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

/// Minimum-image Euclidean distance between two points of a periodic box.
pub fn min_image_distance(a: &[f64], b: &[f64], box_length: f64) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let half = 0.5 * box_length;
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            // |x - y| keeps the result exactly symmetric in its arguments.
            let mut dx = (x - y).abs() % box_length;
            if dx > half {
                dx = box_length - dx;
            }
            dx * dx
        })
        .sum::<f64>()
        .sqrt()
}

/// Volume of the unit ball in `d` dimensions.
pub fn unit_ball_volume(d: usize) -> f64 {
    use std::f64::consts::PI;
    match d {
        1 => 2.0,
        2 => PI,
        3 => 4.0 * PI / 3.0,
        4 => PI * PI / 2.0,
        _ => {
            // Gamma recursion: V_d = 2 pi / d * V_{d-2}.
            2.0 * PI / d as f64 * unit_ball_volume(d - 2)
        }
    }
}

/// Surface area of the unit sphere in `d` dimensions, `d * V_d`.
pub fn unit_sphere_area(d: usize) -> f64 {
    d as f64 * unit_ball_volume(d)
}

/// Frozen atom positions in a periodic cubic box.
#[derive(Clone, Debug, PartialEq)]
pub struct AtomEnsemble {
    dim: usize,
    box_length: f64,
    seed: u64,
    // Row-major, `dim` coordinates per atom.
    coords: Vec<f64>,
}

impl AtomEnsemble {
    /// Draws `count` i.i.d. uniform positions in `[0, box_length)^dim`.
    ///
    /// Realizations with a pair closer than [`COINCIDENCE_FRACTION`]` * L`
    /// are discarded and redrawn from the continuing stream, so the result
    /// is still a pure function of the seed.
    pub fn sample(count: usize, box_length: f64, dim: usize, seed: u64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::Parameter(format!("dimension must be 1, 2 or 3, got {dim}")));
        }
        if count == 0 {
            return Err(Error::Parameter("atom count must be positive".into()));
        }
        if !(box_length > 0.0 && box_length.is_finite()) {
            return Err(Error::Parameter(format!("box length must be positive, got {box_length}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..MAX_RESAMPLES {
            let coords = (0..count * dim)
                .map(|_| {
                    let x = rng.gen::<f64>() * box_length;
                    // x * L can round up to L for x just below one.
                    if x < box_length {
                        x
                    } else {
                        0.0
                    }
                })
                .collect();
            let ensemble = Self { dim, box_length, seed, coords };
            if ensemble.closest_pair().map_or(true, |(_, _, r)| r >= COINCIDENCE_FRACTION * box_length) {
                return Ok(ensemble);
            }
        }
        Err(Error::Parameter(format!(
            "could not draw {count} non-coincident atoms after {MAX_RESAMPLES} attempts"
        )))
    }

    /// Builds an ensemble from explicit coordinates, wrapping them into the box.
    pub fn from_positions(dim: usize, box_length: f64, seed: u64, positions: &[Vec<f64>]) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::Parameter(format!("dimension must be 1, 2 or 3, got {dim}")));
        }
        if positions.is_empty() {
            return Err(Error::Parameter("atom count must be positive".into()));
        }
        if !(box_length > 0.0 && box_length.is_finite()) {
            return Err(Error::Parameter(format!("box length must be positive, got {box_length}")));
        }
        let mut coords = Vec::with_capacity(positions.len() * dim);
        for (i, p) in positions.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::Parameter(format!(
                    "atom {i} has {} coordinates, expected {dim}",
                    p.len()
                )));
            }
            coords.extend(p.iter().map(|&x| {
                let w = x.rem_euclid(box_length);
                if w < box_length {
                    w
                } else {
                    0.0
                }
            }));
        }
        Ok(Self { dim, box_length, seed, coords })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number density `N / L^d`.
    pub fn density(&self) -> f64 {
        self.len() as f64 / self.box_length.powi(self.dim as i32)
    }

    /// Characteristic interaction energy `E0 = C6 n^{6/d}`.
    pub fn energy_unit(&self, c6: f64) -> f64 {
        c6 * self.density().powf(6.0 / self.dim as f64)
    }

    /// Dimensionless drive `alpha = Omega / (C6 n^{6/d})` (hbar = 1).
    pub fn alpha(&self, omega: f64, c6: f64) -> f64 {
        omega / self.energy_unit(c6)
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn positions(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        min_image_distance(self.position(i), self.position(j), self.box_length)
    }

    /// Closest pair `(i, j, r)` with `i < j`, or `None` for a single atom.
    pub fn closest_pair(&self) -> Option<(usize, usize, f64)> {
        let n = self.len();
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..n {
            for j in i + 1..n {
                let r = self.distance(i, j);
                if best.map_or(true, |(_, _, b)| r < b) {
                    best = Some((i, j, r));
                }
            }
        }
        best
    }

    /// Plain-text record: a `key=value` header followed by one CSV row per atom.
    ///
    /// Coordinates are written with the shortest round-trip representation,
    /// so [`AtomEnsemble::from_record`] reproduces them bit for bit.
    pub fn to_record(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "d={}", self.dim);
        let _ = writeln!(out, "N={}", self.len());
        let _ = writeln!(out, "L={}", self.box_length);
        let _ = writeln!(out, "seed={}", self.seed);
        for p in self.positions() {
            let row: Vec<String> = p.iter().map(|x| x.to_string()).collect();
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }

    pub fn from_record(text: &str) -> Result<Self> {
        let mut dim = None;
        let mut count = None;
        let mut box_length = None;
        let mut seed = None;
        let mut rows = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |what: &str| Error::Record(format!("line {}: {what}: {line:?}", lineno + 1));
            if let Some((key, value)) = line.split_once('=') {
                let value = value.trim();
                match key.trim() {
                    "d" => dim = Some(value.parse::<usize>().map_err(|_| bad("bad dimension"))?),
                    "N" => count = Some(value.parse::<usize>().map_err(|_| bad("bad atom count"))?),
                    "L" => box_length = Some(value.parse::<f64>().map_err(|_| bad("bad box length"))?),
                    "seed" => seed = Some(value.parse::<u64>().map_err(|_| bad("bad seed"))?),
                    _ => return Err(bad("unknown key")),
                }
            } else {
                let row = line
                    .split(',')
                    .map(|s| s.trim().parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| bad("bad coordinate"))?;
                rows.push(row);
            }
        }
        let dim = dim.ok_or_else(|| Error::Record("missing d".into()))?;
        let count = count.ok_or_else(|| Error::Record("missing N".into()))?;
        let box_length = box_length.ok_or_else(|| Error::Record("missing L".into()))?;
        let seed = seed.unwrap_or(0);
        if rows.len() != count {
            return Err(Error::Record(format!("header says N={count} but {} rows follow", rows.len())));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.iter().any(|&x| !(0.0..box_length).contains(&x)) {
                return Err(Error::Record(format!("atom {i} lies outside [0, L)")));
            }
        }
        Self::from_positions(dim, box_length, seed, &rows)
    }
}

/// Pairwise van der Waals shifts `V_ij = C6 / r_ij^6`.
#[derive(Clone, Debug)]
pub struct InteractionTable {
    n: usize,
    c6: f64,
    values: Vec<f64>,
}

impl InteractionTable {
    pub fn new(ensemble: &AtomEnsemble, c6: f64) -> Result<Self> {
        if !(c6 > 0.0 && c6.is_finite()) {
            return Err(Error::Parameter(format!("C6 must be positive, got {c6}")));
        }
        let n = ensemble.len();
        let threshold = COINCIDENCE_FRACTION * ensemble.box_length();
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let r = ensemble.distance(i, j);
                if r < threshold {
                    return Err(Error::DegenerateInput { i, j, distance: r });
                }
                let v = c6 / r.powi(6);
                values[i * n + j] = v;
                values[j * n + i] = v;
            }
        }
        Ok(Self { n, c6, values })
    }

    /// Builds a table from an explicit symmetric matrix (row-major).
    pub fn from_matrix(n: usize, c6: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, found: values.len() });
        }
        for i in 0..n {
            if values[i * n + i] != 0.0 {
                return Err(Error::Parameter(format!("diagonal entry {i} must vanish")));
            }
            for j in i + 1..n {
                let v = values[i * n + j];
                if v != values[j * n + i] || !(v > 0.0) {
                    return Err(Error::Parameter(format!(
                        "entry ({i}, {j}) must be positive and symmetric"
                    )));
                }
            }
        }
        Ok(Self { n, c6, values })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn c6(&self) -> f64 {
        self.c6
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn wraps_across_the_boundary() {
        assert_abs_diff_eq!(min_image_distance(&[0.1], &[0.9], 1.0), 0.2, epsilon = 1e-15);
        assert_eq!(min_image_distance(&[0.3, 0.4], &[0.3, 0.4], 1.0), 0.0);
        let r = min_image_distance(&[0.0, 0.0, 0.0], &[0.5, 0.5, 0.5], 1.0);
        assert_abs_diff_eq!(r, 3f64.sqrt() / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn single_atom_ensemble() {
        let e = AtomEnsemble::sample(1, 1.0, 3, 7).unwrap();
        assert_eq!(e.len(), 1);
        assert_eq!(e.density(), 1.0);
        assert!(e.position(0).iter().all(|&x| (0.0..1.0).contains(&x)));
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = AtomEnsemble::sample(60, 1.0, 3, 99).unwrap();
        let b = AtomEnsemble::sample(60, 1.0, 3, 99).unwrap();
        assert_eq!(a, b);
        let c = AtomEnsemble::sample(60, 1.0, 3, 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn large_sample_has_uniform_mean() {
        let e = AtomEnsemble::sample(10_000, 1.0, 3, 2024).unwrap();
        for axis in 0..3 {
            let mean = e.positions().map(|p| p[axis]).sum::<f64>() / e.len() as f64;
            assert!((0.49..=0.51).contains(&mean), "axis {axis} mean {mean}");
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(AtomEnsemble::sample(0, 1.0, 3, 0), Err(Error::Parameter(_))));
        assert!(matches!(AtomEnsemble::sample(4, 0.0, 3, 0), Err(Error::Parameter(_))));
        assert!(matches!(AtomEnsemble::sample(4, 1.0, 4, 0), Err(Error::Parameter(_))));
    }

    #[test]
    fn density_matches_definition() {
        let e = AtomEnsemble::sample(20, 2.5, 2, 1).unwrap();
        assert_eq!(e.density(), 20.0 / 2.5f64.powi(2));
    }

    #[test]
    fn pair_values() {
        let e = AtomEnsemble::from_positions(1, 10.0, 0, &[vec![1.0], vec![2.0]]).unwrap();
        let v = InteractionTable::new(&e, 1.0).unwrap();
        assert_eq!(v.get(0, 1), 1.0);
        let e = AtomEnsemble::from_positions(1, 10.0, 0, &[vec![1.0], vec![3.0]]).unwrap();
        let v = InteractionTable::new(&e, 1.0).unwrap();
        assert_eq!(v.get(0, 1), 0.015625);
    }

    #[test]
    fn table_matches_brute_force() {
        let e = AtomEnsemble::sample(25, 1.0, 3, 5).unwrap();
        let v = InteractionTable::new(&e, 0.03).unwrap();
        for i in 0..e.len() {
            assert_eq!(v.get(i, i), 0.0);
            for j in 0..e.len() {
                if i == j {
                    continue;
                }
                // Explicit image search over the 27 neighbouring cells.
                let (a, b) = (e.position(i), e.position(j));
                let mut best = f64::INFINITY;
                for sx in -1..=1 {
                    for sy in -1..=1 {
                        for sz in -1..=1 {
                            let shift = [sx as f64, sy as f64, sz as f64];
                            let r2: f64 = (0..3).map(|k| (a[k] - b[k] - shift[k]).powi(2)).sum();
                            best = best.min(r2.sqrt());
                        }
                    }
                }
                let expected = 0.03 / best.powi(6);
                assert!((v.get(i, j) - expected).abs() <= 1e-12 * expected);
                assert!(v.get(i, j) > 0.0);
            }
        }
    }

    #[test]
    fn coincident_atoms_are_rejected() {
        let e = AtomEnsemble::from_positions(2, 1.0, 0, &[vec![0.2, 0.2], vec![0.2, 0.2]]).unwrap();
        assert!(matches!(InteractionTable::new(&e, 1.0), Err(Error::DegenerateInput { .. })));
    }

    #[test]
    fn record_round_trip_is_bit_exact() {
        let e = AtomEnsemble::sample(13, 1.7, 3, 31).unwrap();
        let back = AtomEnsemble::from_record(&e.to_record()).unwrap();
        assert_eq!(e, back);
    }

    #[test]
    fn malformed_records_are_rejected() {
        assert!(AtomEnsemble::from_record("d=1\nN=2\nL=1\n0.5\n").is_err());
        assert!(AtomEnsemble::from_record("d=1\nN=1\nL=1\n1.5\n").is_err());
        assert!(AtomEnsemble::from_record("N=1\nL=1\n0.5\n").is_err());
    }

    #[test]
    fn realization_seeds_differ() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|k| realization_seed(42, k)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_eq!(realization_seed(42, 3), realization_seed(42, 3));
    }

    fn point(d: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(0.0..1.0f64, d)
    }

    proptest! {
        #[test]
        fn distance_is_symmetric(a in point(3), b in point(3)) {
            prop_assert_eq!(min_image_distance(&a, &b, 1.0), min_image_distance(&b, &a, 1.0));
            prop_assert!(min_image_distance(&a, &b, 1.0) <= 3f64.sqrt() / 2.0 + 1e-15);
        }

        #[test]
        fn translation_leaves_interactions_unchanged(seed in 0u64..500, shift in point(3)) {
            let e = AtomEnsemble::sample(8, 1.0, 3, seed).unwrap();
            let moved: Vec<Vec<f64>> = e
                .positions()
                .map(|p| p.iter().zip(&shift).map(|(x, s)| x + s).collect())
                .collect();
            let f = AtomEnsemble::from_positions(3, 1.0, seed, &moved).unwrap();
            let (v, w) = (InteractionTable::new(&e, 1.0).unwrap(), InteractionTable::new(&f, 1.0).unwrap());
            for i in 0..8 {
                for j in 0..8 {
                    let (a, b) = (v.get(i, j), w.get(i, j));
                    prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
                }
            }
        }

        #[test]
        fn scaling_the_box_scales_interactions(seed in 0u64..500, lambda in 0.5..3.0f64) {
            let e = AtomEnsemble::sample(6, 1.0, 2, seed).unwrap();
            let scaled: Vec<Vec<f64>> = e.positions().map(|p| p.iter().map(|x| x * lambda).collect()).collect();
            let f = AtomEnsemble::from_positions(2, lambda, seed, &scaled).unwrap();
            let (v, w) = (InteractionTable::new(&e, 1.0).unwrap(), InteractionTable::new(&f, 1.0).unwrap());
            for i in 0..6 {
                for j in i + 1..6 {
                    let rel = (w.get(i, j) * lambda.powi(6) - v.get(i, j)).abs() / v.get(i, j);
                    prop_assert!(rel < 1e-10);
                    let dr = f.distance(i, j) - lambda * e.distance(i, j);
                    prop_assert!(dr.abs() < 1e-12 * lambda);
                }
            }
        }
    }
}
