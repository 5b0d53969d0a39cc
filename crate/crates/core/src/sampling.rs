//! Deterministic low-discrepancy samples on cubes, spheres and balls.

use nalgebra::DVector;
use statrs::distribution::{ContinuousCDF, Normal};

const PRIMES: [u64; 32] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
    97, 101, 103, 107, 109, 113, 127, 131,
];

/// Largest number of Halton coordinates supported.
pub const MAX_HALTON_DIM: usize = PRIMES.len();

/// Van der Corput radical inverse of `index` in `base`.
pub fn radical_inverse(base: u64, mut index: u64) -> f64 {
    let inv_base = 1.0 / base as f64;
    let mut inv = inv_base;
    let mut result = 0.0;
    while index > 0 {
        result += (index % base) as f64 * inv;
        index /= base;
        inv *= inv_base;
    }
    result
}

/// Halton sequence in `[0, 1)^dim`, starting after `offset` skipped points.
#[derive(Clone, Debug)]
pub struct Halton {
    dim: usize,
    index: u64,
}

impl Halton {
    pub fn new(dim: usize, offset: u64) -> Self {
        assert!(
            (1..=MAX_HALTON_DIM).contains(&dim),
            "Halton dimension {dim} out of range"
        );
        // index 0 maps to the origin for every base; always skip it
        Self {
            dim,
            index: offset.saturating_add(1),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

impl Iterator for Halton {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        let point = PRIMES[..self.dim]
            .iter()
            .map(|&b| radical_inverse(b, self.index))
            .collect();
        self.index += 1;
        Some(point)
    }
}

/// Low-discrepancy directions on the unit sphere `S^{dim-1}`.
///
/// Circles use the angle directly; higher dimensions push Halton points
/// through the inverse normal CDF and normalise.
pub fn sphere_points(dim: usize, count: usize, seed: u64) -> Vec<DVector<f64>> {
    match dim {
        0 => Vec::new(),
        1 => (0..count)
            .map(|i| {
                let s = if (i as u64 + seed).is_multiple_of(2) { 1.0 } else { -1.0 };
                DVector::from_element(1, s)
            })
            .collect(),
        2 => Halton::new(1, seed)
            .take(count)
            .map(|u| {
                let a = std::f64::consts::TAU * u[0];
                DVector::from_vec(vec![a.cos(), a.sin()])
            })
            .collect(),
        _ => {
            let normal = Normal::new(0.0, 1.0).expect("standard normal");
            Halton::new(dim, seed)
                .map(|u| {
                    DVector::from_iterator(
                        dim,
                        u.iter().map(|&ui| normal.inverse_cdf(ui.clamp(1e-12, 1.0 - 1e-12))),
                    )
                })
                .filter(|v| v.norm() > 1e-12)
                .take(count)
                .map(|v| v.normalize())
                .collect()
        }
    }
}

/// The `2 * dim` signed coordinate axes.
pub fn coordinate_axes(dim: usize) -> Vec<DVector<f64>> {
    let mut out = Vec::with_capacity(2 * dim);
    for i in 0..dim {
        for s in [1.0, -1.0] {
            let mut v = DVector::zeros(dim);
            v[i] = s;
            out.push(v);
        }
    }
    out
}

/// Low-discrepancy points in the closed ball of `radius` around `center`.
pub fn ball_points(center: &DVector<f64>, radius: f64, count: usize, seed: u64) -> Vec<DVector<f64>> {
    let dim = center.len();
    let dirs = sphere_points(dim, count, seed);
    let radial = Halton::new(1, seed.wrapping_add(7919)).take(count);
    dirs.into_iter()
        .zip(radial)
        .map(|(d, u)| center + d * (radius * u[0].powf(1.0 / dim as f64)))
        .collect()
}
