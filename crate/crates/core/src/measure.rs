//! Push-forward measures of rasterized multimaps and density ratios.
//!
//! A multimap is rasterized onto a source grid and a target grid with
//! half-open cells; `mu(E)` sums the density mass of every source cell whose
//! image meets `E`. For multivalued maps the preimages of disjoint sets may
//! overlap, which shows up as a negative additivity defect.

use std::collections::BTreeSet;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::angles::ConeSpec;
use crate::linalg::{angle, ball_volume};
use crate::map::MultiMap;
use crate::{Error, Result};

/// Set of cell indices.
pub type CellSet = BTreeSet<usize>;

/// Axis-aligned box split into `res[i]` half-open cells along axis `i`.
/// Cells are numbered row-major with the last axis fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    min: Vec<f64>,
    max: Vec<f64>,
    res: Vec<usize>,
}

impl Grid {
    pub fn new(min: Vec<f64>, max: Vec<f64>, res: Vec<usize>) -> Result<Self> {
        if min.len() != max.len() || min.len() != res.len() {
            return Err(Error::DimensionMismatch {
                expected: min.len(),
                found: if max.len() != min.len() { max.len() } else { res.len() },
            });
        }
        if min.is_empty() {
            return Err(Error::InvalidArgument("grid needs at least one axis".into()));
        }
        for i in 0..min.len() {
            if !(min[i].is_finite() && max[i].is_finite() && min[i] < max[i]) {
                return Err(Error::InvalidArgument(format!(
                    "axis {i}: need min < max, got [{}, {}]",
                    min[i], max[i]
                )));
            }
            if res[i] == 0 {
                return Err(Error::InvalidArgument(format!("axis {i}: zero resolution")));
            }
        }
        Ok(Self { min, max, res })
    }

    /// The cube `[lo, hi]^dim` with `res` cells per axis.
    pub fn cube(dim: usize, lo: f64, hi: f64, res: usize) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim], vec![res; dim])
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn min(&self) -> &[f64] {
        &self.min
    }

    pub fn max(&self) -> &[f64] {
        &self.max
    }

    pub fn resolution(&self) -> &[usize] {
        &self.res
    }

    pub fn cell_count(&self) -> usize {
        self.res.iter().product()
    }

    pub fn cell_width(&self, axis: usize) -> f64 {
        (self.max[axis] - self.min[axis]) / self.res[axis] as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|i| self.cell_width(i)).product()
    }

    /// Cell containing `x`, or `None` outside `[min, max)`.
    pub fn cell_of(&self, x: &DVector<f64>) -> Option<usize> {
        if x.len() != self.dim() {
            return None;
        }
        let mut idx = 0usize;
        for i in 0..self.dim() {
            let t = (x[i] - self.min[i]) / self.cell_width(i);
            if !(t >= 0.0) {
                return None;
            }
            let k = t.floor() as usize;
            if k >= self.res[i] {
                return None;
            }
            idx = idx * self.res[i] + k;
        }
        Some(idx)
    }

    pub fn multi_index(&self, mut cell: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        for i in (0..self.dim()).rev() {
            out[i] = cell % self.res[i];
            cell /= self.res[i];
        }
        out
    }

    /// Corners `(lo, hi)` of `cell`.
    pub fn cell_bounds(&self, cell: usize) -> (DVector<f64>, DVector<f64>) {
        let mi = self.multi_index(cell);
        let lo = DVector::from_iterator(self.dim(), (0..self.dim()).map(|i| self.min[i] + mi[i] as f64 * self.cell_width(i)));
        let hi = DVector::from_iterator(self.dim(), (0..self.dim()).map(|i| lo[i] + self.cell_width(i)));
        (lo, hi)
    }

    pub fn cell_center(&self, cell: usize) -> DVector<f64> {
        let (lo, hi) = self.cell_bounds(cell);
        (lo + hi) * 0.5
    }
}

/// Non-negative cell densities over a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridMeasure {
    grid: Grid,
    density: Vec<f64>,
}

impl GridMeasure {
    pub fn new(grid: Grid, density: Vec<f64>) -> Result<Self> {
        if density.len() != grid.cell_count() {
            return Err(Error::DimensionMismatch {
                expected: grid.cell_count(),
                found: density.len(),
            });
        }
        if let Some((i, d)) = density.iter().enumerate().find(|(_, d)| !(d.is_finite() && **d >= 0.0)) {
            return Err(Error::InvalidArgument(format!("density {d} at cell {i} is not a finite non-negative number")));
        }
        Ok(Self { grid, density })
    }

    pub fn uniform(grid: Grid, value: f64) -> Result<Self> {
        let n = grid.cell_count();
        Self::new(grid, vec![value; n])
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    /// Mass of one cell.
    pub fn cell_mass(&self, cell: usize) -> f64 {
        self.density[cell] * self.grid.cell_volume()
    }

    pub fn total_mass(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.grid.cell_volume()
    }
}

/// A multimap rasterized to cells: each source cell maps to a set of target
/// cells.
#[derive(Clone, Debug, PartialEq)]
pub struct CellMap {
    source: Grid,
    target: Grid,
    images: Vec<CellSet>,
    /// Graph points dropped because `x` or `xi` fell outside its grid.
    pub dropped: usize,
}

impl CellMap {
    pub fn from_images(source: Grid, target: Grid, images: Vec<CellSet>) -> Result<Self> {
        if images.len() != source.cell_count() {
            return Err(Error::DimensionMismatch {
                expected: source.cell_count(),
                found: images.len(),
            });
        }
        if let Some(bad) = images.iter().flatten().find(|&&c| c >= target.cell_count()) {
            return Err(Error::InvalidArgument(format!("target cell {bad} out of range")));
        }
        Ok(Self {
            source,
            target,
            images,
            dropped: 0,
        })
    }

    /// `xi in T(x)` puts the cell of `xi` into the image of the cell of `x`.
    pub fn rasterize(map: &MultiMap, source: Grid, target: Grid) -> Result<Self> {
        if map.dim() != source.dim() || map.dim() != target.dim() {
            return Err(Error::DimensionMismatch {
                expected: map.dim(),
                found: source.dim(),
            });
        }
        let mut images = vec![CellSet::new(); source.cell_count()];
        let mut dropped = 0;
        for gp in map.graph() {
            match (source.cell_of(gp.x), target.cell_of(gp.value)) {
                (Some(s), Some(t)) => {
                    images[s].insert(t);
                }
                _ => dropped += 1,
            }
        }
        if dropped > 0 {
            log::warn!("{dropped} graph points fall outside the grids and were dropped");
        }
        Ok(Self {
            source,
            target,
            images,
            dropped,
        })
    }

    pub fn source(&self) -> &Grid {
        &self.source
    }

    pub fn target(&self) -> &Grid {
        &self.target
    }

    pub fn images(&self) -> &[CellSet] {
        &self.images
    }

    /// Source cells whose image meets `e`.
    pub fn preimage(&self, e: &CellSet) -> CellSet {
        self.images
            .iter()
            .enumerate()
            .filter(|(_, img)| !img.is_disjoint(e))
            .map(|(i, _)| i)
            .collect()
    }

    /// Whether every source cell has at most one target cell.
    pub fn is_single_valued(&self) -> bool {
        self.images.iter().all(|img| img.len() <= 1)
    }
}

fn check_measure(t: &CellMap, f: &GridMeasure) -> Result<()> {
    if f.grid() != t.source() {
        return Err(Error::InvalidArgument(
            "density grid differs from the source grid of the cell map".into(),
        ));
    }
    Ok(())
}

/// Discrete `mu(E) = int_{T^{-1}(E)} f`.
pub fn pushforward(t: &CellMap, f: &GridMeasure, e: &CellSet) -> Result<f64> {
    check_measure(t, f)?;
    let outside = e.iter().filter(|&&c| c >= t.target().cell_count()).count();
    if outside > 0 {
        log::warn!("{outside} cells of E lie outside the target grid and are ignored");
    }
    Ok(t.preimage(e).iter().map(|&c| f.cell_mass(c)).sum())
}

/// `mu(union parts) - sum mu(part)`, which is `<= 0` and vanishes when the
/// preimages are disjoint.
pub fn additivity_defect(t: &CellMap, f: &GridMeasure, parts: &[CellSet]) -> Result<f64> {
    let mut union = CellSet::new();
    for part in parts {
        for &c in part {
            if !union.insert(c) {
                return Err(Error::NotDisjoint { cell: c });
            }
        }
    }
    let whole = pushforward(t, f, &union)?;
    let mut sum = 0.0;
    for part in parts {
        sum += pushforward(t, f, part)?;
    }
    Ok(whole - sum)
}

/// Position of an axis-aligned box relative to a region.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoxClass {
    Inside,
    Outside,
    Partial,
}

/// A subset of `R^n` with a membership test. `classify_box` may always
/// answer [`BoxClass::Partial`]; definite answers must be correct.
pub trait Region: Sync {
    fn contains(&self, x: &DVector<f64>) -> bool;

    fn classify_box(&self, _lo: &DVector<f64>, _hi: &DVector<f64>) -> BoxClass {
        BoxClass::Partial
    }
}

/// All of `R^n`.
#[derive(Clone, Copy, Debug)]
pub struct Whole;

impl Region for Whole {
    fn contains(&self, _x: &DVector<f64>) -> bool {
        true
    }

    fn classify_box(&self, _lo: &DVector<f64>, _hi: &DVector<f64>) -> BoxClass {
        BoxClass::Inside
    }
}

/// `{x : <normal, x> >= offset}`.
#[derive(Clone, Debug)]
pub struct HalfSpace {
    pub normal: DVector<f64>,
    pub offset: f64,
}

impl HalfSpace {
    /// Half-space whose boundary passes through `point`.
    pub fn through(point: &DVector<f64>, normal: DVector<f64>) -> Self {
        let offset = normal.dot(point);
        Self { normal, offset }
    }
}

impl Region for HalfSpace {
    fn contains(&self, x: &DVector<f64>) -> bool {
        self.normal.dot(x) >= self.offset
    }

    fn classify_box(&self, lo: &DVector<f64>, hi: &DVector<f64>) -> BoxClass {
        let (mut low, mut high) = (0.0, 0.0);
        for i in 0..lo.len() {
            let (a, b) = (self.normal[i] * lo[i], self.normal[i] * hi[i]);
            low += a.min(b);
            high += a.max(b);
        }
        if low >= self.offset {
            BoxClass::Inside
        } else if high < self.offset {
            BoxClass::Outside
        } else {
            BoxClass::Partial
        }
    }
}

impl Region for ConeSpec {
    fn contains(&self, x: &DVector<f64>) -> bool {
        ConeSpec::contains(self, x)
    }

    fn classify_box(&self, lo: &DVector<f64>, hi: &DVector<f64>) -> BoxClass {
        // bounding sphere of the box seen from the vertex
        let c = (lo + hi) * 0.5 - &self.vertex;
        let rho = (hi - lo).norm() * 0.5;
        let d = c.norm();
        if d <= rho {
            return BoxClass::Partial;
        }
        let spread = (rho / d).asin();
        let phi = angle(&c, &self.axis);
        // small margin against rounding in the angle computations
        let margin = 1e-12;
        if phi + spread < self.half_angle - margin {
            BoxClass::Inside
        } else if phi - spread > self.half_angle + margin {
            BoxClass::Outside
        } else {
            BoxClass::Partial
        }
    }
}

/// Complement of a region.
#[derive(Clone, Debug)]
pub struct Complement<R>(pub R);

impl<R: Region> Region for Complement<R> {
    fn contains(&self, x: &DVector<f64>) -> bool {
        !self.0.contains(x)
    }

    fn classify_box(&self, lo: &DVector<f64>, hi: &DVector<f64>) -> BoxClass {
        match self.0.classify_box(lo, hi) {
            BoxClass::Inside => BoxClass::Outside,
            BoxClass::Outside => BoxClass::Inside,
            BoxClass::Partial => BoxClass::Partial,
        }
    }
}

/// Union of grid cells.
#[derive(Clone, Debug)]
pub struct CellRegion {
    pub grid: Grid,
    pub cells: CellSet,
}

impl Region for CellRegion {
    fn contains(&self, x: &DVector<f64>) -> bool {
        self.grid.cell_of(x).is_some_and(|c| self.cells.contains(&c))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityOptions {
    /// Cells per axis of the overlay on `[x - r, x + r]^n`.
    pub cells_per_axis: usize,
    /// Monte Carlo samples per undecided cell.
    pub samples_per_cell: usize,
    pub seed: u64,
}

impl Default for DensityOptions {
    fn default() -> Self {
        Self {
            cells_per_axis: 16,
            samples_per_cell: 10_000,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityEstimate {
    pub radius: f64,
    /// `|S cap B_r(x)| / |B_r(x)|`.
    pub ratio: f64,
    /// Monte Carlo standard error of `ratio`.
    pub std_error: f64,
    pub samples: usize,
}

fn classify_ball(center: &DVector<f64>, r: f64, lo: &DVector<f64>, hi: &DVector<f64>) -> BoxClass {
    let mut near = 0.0;
    let mut far = 0.0;
    for i in 0..center.len() {
        let c = center[i];
        let d_near = if c < lo[i] {
            lo[i] - c
        } else if c > hi[i] {
            c - hi[i]
        } else {
            0.0
        };
        let d_far = (c - lo[i]).abs().max((hi[i] - c).abs());
        near += d_near * d_near;
        far += d_far * d_far;
    }
    if far <= r * r {
        BoxClass::Inside
    } else if near >= r * r {
        BoxClass::Outside
    } else {
        BoxClass::Partial
    }
}

/// Density ratio of `region` at `x` for each radius, by exact cell
/// classification plus seeded Monte Carlo on undecided cells.
pub fn density_ratio<R: Region>(
    region: &R,
    x: &DVector<f64>,
    radii: &[f64],
    opts: &DensityOptions,
) -> Result<Vec<DensityEstimate>> {
    let n = x.len();
    if n == 0 {
        return Err(Error::InvalidArgument("zero-dimensional point".into()));
    }
    if opts.cells_per_axis == 0 || opts.samples_per_cell == 0 {
        return Err(Error::InvalidArgument("density options need positive counts".into()));
    }
    radii
        .iter()
        .enumerate()
        .map(|(ri, &r)| {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::InvalidArgument(format!("radius must be positive, got {r}")));
            }
            let lo: Vec<f64> = x.iter().map(|c| c - r).collect();
            let hi: Vec<f64> = x.iter().map(|c| c + r).collect();
            let grid = Grid::new(lo, hi, vec![opts.cells_per_axis; n])?;
            let vol = grid.cell_volume();
            let (mass, var, samples) = (0..grid.cell_count())
                .into_par_iter()
                .map(|cell| {
                    let (clo, chi) = grid.cell_bounds(cell);
                    let ball = classify_ball(x, r, &clo, &chi);
                    if ball == BoxClass::Outside {
                        return (0.0, 0.0, 0usize);
                    }
                    let reg = region.classify_box(&clo, &chi);
                    if reg == BoxClass::Outside {
                        return (0.0, 0.0, 0);
                    }
                    if ball == BoxClass::Inside && reg == BoxClass::Inside {
                        return (vol, 0.0, 0);
                    }
                    let seed = opts
                        .seed
                        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                        .wrapping_add((ri as u64) << 32)
                        .wrapping_add(cell as u64);
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let k = opts.samples_per_cell;
                    let mut hits = 0usize;
                    let mut p = DVector::zeros(n);
                    for _ in 0..k {
                        for i in 0..n {
                            p[i] = rng.random_range(clo[i]..chi[i]);
                        }
                        if (&p - x).norm_squared() <= r * r && region.contains(&p) {
                            hits += 1;
                        }
                    }
                    let frac = hits as f64 / k as f64;
                    (vol * frac, vol * vol * frac * (1.0 - frac) / k as f64, k)
                })
                .reduce(|| (0.0, 0.0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
            let ball = ball_volume(n, r);
            Ok(DensityEstimate {
                radius: r,
                ratio: mass / ball,
                std_error: var.sqrt() / ball,
                samples,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn cells_are_half_open() {
        let g = Grid::cube(1, 0.0, 2.0, 2).unwrap();
        assert_eq!(g.cell_of(&v(&[0.0])), Some(0));
        assert_eq!(g.cell_of(&v(&[1.0])), Some(1));
        assert_eq!(g.cell_of(&v(&[2.0])), None);
        assert_eq!(g.cell_of(&v(&[-1e-300])), None);
        let g2 = Grid::new(vec![0.0, 0.0], vec![2.0, 3.0], vec![2, 3]).unwrap();
        assert_eq!(g2.cell_of(&v(&[1.5, 0.5])), Some(3));
        assert_eq!(g2.multi_index(5), vec![1, 2]);
        assert_eq!(g2.cell_center(5).as_slice(), &[1.5, 2.5]);
    }

    fn identity_cells(res: usize) -> (CellMap, GridMeasure) {
        let g = Grid::cube(1, 0.0, 1.0, res).unwrap();
        let images = (0..res).map(|i| CellSet::from([i])).collect();
        let f = GridMeasure::new(g.clone(), (0..res).map(|i| i as f64).collect()).unwrap();
        (CellMap::from_images(g.clone(), g, images).unwrap(), f)
    }

    #[test]
    fn identity_pushforward() {
        let (t, f) = identity_cells(4);
        let e = CellSet::from([1, 3]);
        assert_eq!(pushforward(&t, &f, &e).unwrap(), (1.0 + 3.0) * 0.25);
        let all: CellSet = (0..4).collect();
        assert_eq!(pushforward(&t, &f, &all).unwrap(), f.total_mass());
        assert_eq!(additivity_defect(&t, &f, &[CellSet::from([0, 1]), CellSet::from([3])]).unwrap(), 0.0);
    }

    #[test]
    fn overlap_defect() {
        let g = Grid::cube(1, 0.0, 2.0, 2).unwrap();
        let t = CellMap::from_images(g.clone(), g.clone(), vec![CellSet::from([0, 1]), CellSet::from([1])]).unwrap();
        let f = GridMeasure::new(g, vec![3.0, 1.0]).unwrap();
        let d = additivity_defect(&t, &f, &[CellSet::from([0]), CellSet::from([1])]).unwrap();
        assert_eq!(d, -3.0);
        assert!(matches!(
            additivity_defect(&t, &f, &[CellSet::from([0, 1]), CellSet::from([1])]),
            Err(Error::NotDisjoint { cell: 1 })
        ));
    }

    #[test]
    fn rasterize_drops_outside() {
        let map = MultiMap::from_pairs(1, [(v(&[0.5]), v(&[0.25])), (v(&[0.5]), v(&[5.0]))]).unwrap();
        let g = Grid::cube(1, 0.0, 1.0, 2).unwrap();
        let t = CellMap::rasterize(&map, g.clone(), g).unwrap();
        assert_eq!(t.dropped, 1);
        assert_eq!(t.images()[1], CellSet::from([0]));
    }

    #[test]
    fn density_of_simple_regions() {
        let x = v(&[0.1, -0.2]);
        let opts = DensityOptions::default();
        let whole = density_ratio(&Whole, &x, &[0.5, 1.0], &opts).unwrap();
        for est in &whole {
            // the overlay grid misses no part of the ball
            assert!((est.ratio - 1.0).abs() < 4.0 * est.std_error + 1e-9);
        }
        let half = HalfSpace::through(&x, v(&[1.0, 1.0]));
        let est = density_ratio(&half, &x, &[0.01], &opts).unwrap()[0];
        assert!((est.ratio - 0.5).abs() < 4.0 * est.std_error + 1e-9);
    }

    #[test]
    fn cone_box_classification() {
        let cone = ConeSpec::new(v(&[0.0, 0.0]), v(&[1.0, 0.0]), 0.3).unwrap();
        assert_eq!(cone.classify_box(&v(&[2.0, -0.01]), &v(&[2.02, 0.01])), BoxClass::Inside);
        assert_eq!(cone.classify_box(&v(&[-2.0, -0.01]), &v(&[-1.9, 0.01])), BoxClass::Outside);
        assert_eq!(cone.classify_box(&v(&[-0.1, -0.1]), &v(&[0.1, 0.1])), BoxClass::Partial);
    }
}
