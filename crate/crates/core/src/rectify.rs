//! Lipschitz charts for finite c-monotone sets.
//!
//! Near a base pair `(x0, y0)` with `A0 = D^2h(x0 - y0)` invertible, the
//! transform `(x, y) -> (u, v) = ((A0 x + y)/sqrt 2, (A0 x - y)/sqrt 2)`
//! turns a c-monotone set into the graph of a Lipschitz function `u -> v`
//! with constant `sqrt((1 + eps k) / (1 - eps k))`, where `k = |A0^{-1}|`
//! and `eps` bounds `|D^2h(x - y) - A0|` over the neighbourhood.
//!
//! The neighbourhood is the ball of radius `R` around `(x0, y0)` in
//! `R^{2n}`. Segments between two of its points stay inside
//! `B_R(x0) x B_R(y0)`, so `eps` is measured over `w = x - y` in
//! `B_{2R}(x0 - y0)`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::cost::CostSpec;
use crate::linalg::{op_norm, sym_eigenvalues};
use crate::sampling::{sphere_points, Halton};
use crate::{Error, Result};

/// A finite set of pairs `(x, y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MonotoneSet {
    dim: usize,
    pairs: Vec<(DVector<f64>, DVector<f64>)>,
}

impl MonotoneSet {
    /// Builds the set without checking monotonicity.
    pub fn new(dim: usize, pairs: Vec<(DVector<f64>, DVector<f64>)>) -> Result<Self> {
        for (x, y) in &pairs {
            for v in [x, y] {
                if v.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found: v.len(),
                    });
                }
            }
        }
        Ok(Self { dim, pairs })
    }

    /// Builds the set and checks `c(x,y) + c(x',y') <= c(x,y') + c(x',y) + tol`
    /// over all pairs.
    pub fn with_cost(cost: &CostSpec, pairs: Vec<(DVector<f64>, DVector<f64>)>, tol: f64) -> Result<Self> {
        let set = Self::new(cost.dim(), pairs)?;
        let p = &set.pairs;
        let (count, worst) = (0..p.len())
            .into_par_iter()
            .map(|i| {
                let mut count = 0usize;
                let mut worst = 0.0f64;
                for j in (i + 1)..p.len() {
                    let gap = cost.cost(&p[i].0, &p[j].1) + cost.cost(&p[j].0, &p[i].1)
                        - cost.cost(&p[i].0, &p[i].1)
                        - cost.cost(&p[j].0, &p[j].1);
                    if gap < -tol {
                        count += 1;
                        worst = worst.min(gap);
                    }
                }
                (count, worst)
            })
            .reduce(|| (0, 0.0), |a, b| (a.0 + b.0, a.1.min(b.1)));
        if count > 0 {
            return Err(Error::NotMonotone {
                count,
                worst_gap: worst,
            });
        }
        Ok(set)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn pairs(&self) -> &[(DVector<f64>, DVector<f64>)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Largest absolute coordinate.
    pub fn scale(&self) -> f64 {
        self.pairs
            .iter()
            .flat_map(|(x, y)| x.iter().chain(y.iter()))
            .fold(0.0, |acc: f64, c| acc.max(c.abs()))
    }
}

/// `D^2_{xy} c(x, y) = -D^2h(x - y)`.
pub fn mixed_hessian(cost: &CostSpec, x: &DVector<f64>, y: &DVector<f64>) -> DMatrix<f64> {
    -cost.hessian(&(x - y))
}

/// `(u, v) = ((A0 x + y)/sqrt 2, (A0 x - y)/sqrt 2)`.
pub fn cayley(a0: &DMatrix<f64>, x: &DVector<f64>, y: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let ax = a0 * x;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    ((&ax + y) * s, (&ax - y) * s)
}

/// Inverse of [`cayley`]: `x = A0^{-1}((u + v)/sqrt 2)`, `y = (u - v)/sqrt 2`.
pub fn cayley_inverse(
    a0: &DMatrix<f64>,
    u: &DVector<f64>,
    v: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let x = a0
        .clone()
        .lu()
        .solve(&((u + v) * s))
        .ok_or_else(|| Error::Degenerate("A0 is singular".into()))?;
    Ok((x, (u - v) * s))
}

/// Extreme singular values `(min, max)` of the block map
/// `(x, y) -> (u, v)`.
pub fn cayley_singular_values(a0: &DMatrix<f64>) -> (f64, f64) {
    let n = a0.nrows();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut block = DMatrix::zeros(2 * n, 2 * n);
    let id = DMatrix::<f64>::identity(n, n);
    block.view_mut((0, 0), (n, n)).copy_from(&(a0 * s));
    block.view_mut((0, n), (n, n)).copy_from(&(&id * s));
    block.view_mut((n, 0), (n, n)).copy_from(&(a0 * s));
    block.view_mut((n, n), (n, n)).copy_from(&(&id * -s));
    let sv = block.svd(false, false).singular_values;
    let lo = sv.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = sv.iter().copied().fold(0.0, f64::max);
    (lo, hi)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChartOptions {
    /// Halve the radius until `eps |A0^{-1}| <= shrink_target`.
    pub auto_shrink: bool,
    pub shrink_target: f64,
    pub min_radius: f64,
    /// Cap on grid points for the `eps` measurement.
    pub grid_cap: usize,
    /// Absolute slack on the pairwise checks.
    pub tol: f64,
}

impl Default for ChartOptions {
    fn default() -> Self {
        Self {
            auto_shrink: true,
            shrink_target: 0.5,
            min_radius: 1e-6,
            grid_cap: 100_000,
            tol: 1e-9,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Chart {
    pub base_index: usize,
    pub base: (DVector<f64>, DVector<f64>),
    pub a0: DMatrix<f64>,
    /// `|A0^{-1}|`.
    pub a0_inv_norm: f64,
    pub epsilon: f64,
    /// `eps` measured at twice the grid resolution.
    pub refined_epsilon: f64,
    pub radius: f64,
    pub lip: f64,
    /// Indices into the input set of the pairs inside the neighbourhood.
    pub indices: Vec<usize>,
    pub graph: Vec<(DVector<f64>, DVector<f64>)>,
    /// Largest `|dv| / |du|` over chart pairs.
    pub max_ratio: f64,
    /// Largest `A0(x' - x).(y - y') - eps |x - x'| |y - y'|`.
    pub max_estimate_excess: f64,
    pub cayley_singular_values: (f64, f64),
}

/// Sample points `w` for the `eps` measurement around `w0` with radius
/// `big_r`; grid pitch `big_r / (2 * per_half)` plus boundary directions.
fn sample_ball(w0: &DVector<f64>, big_r: f64, per_half: usize, cap: usize, seed: u64) -> Vec<DVector<f64>> {
    let n = w0.len();
    let side = 2 * per_half + 1;
    let total = (side as f64).powi(n as i32);
    let mut pts = Vec::new();
    if total <= cap as f64 {
        let pitch = big_r / per_half as f64;
        let mut idx = vec![0usize; n];
        loop {
            let off = DVector::from_iterator(n, idx.iter().map(|&i| (i as f64 - per_half as f64) * pitch));
            if off.norm() <= big_r * (1.0 + 1e-12) {
                pts.push(w0 + off);
            }
            let mut d = 0;
            while d < n {
                idx[d] += 1;
                if idx[d] < side {
                    break;
                }
                idx[d] = 0;
                d += 1;
            }
            if d == n {
                break;
            }
        }
    } else {
        pts.extend(Halton::new(n, seed).take(cap).filter_map(|u| {
            let off = DVector::from_iterator(n, u.iter().map(|&c| (2.0 * c - 1.0) * big_r));
            (off.norm() <= big_r).then(|| w0 + off)
        }));
    }
    let dirs = 64 * n.max(1);
    pts.extend(sphere_points(n, dirs, seed).into_iter().map(|d| w0 + d * big_r));
    pts
}

fn measure_epsilon(cost: &CostSpec, a0: &DMatrix<f64>, w0: &DVector<f64>, radius: f64, per_half: usize, cap: usize, seed: u64) -> f64 {
    sample_ball(w0, 2.0 * radius, per_half, cap, seed)
        .par_iter()
        .map(|w| op_norm(&(cost.hessian(w) - a0)))
        .reduce(|| 0.0, f64::max)
}

/// Chart around pair `base_index` of `set`.
pub fn build_chart(
    cost: &CostSpec,
    set: &MonotoneSet,
    base_index: usize,
    radius: f64,
    opts: &ChartOptions,
) -> Result<Chart> {
    if set.dim() != cost.dim() {
        return Err(Error::DimensionMismatch {
            expected: cost.dim(),
            found: set.dim(),
        });
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {radius}")));
    }
    let (x0, y0) = set
        .pairs()
        .get(base_index)
        .cloned()
        .ok_or_else(|| Error::InvalidArgument(format!("base index {base_index} out of range")))?;
    let w0 = &x0 - &y0;
    let a0 = cost.hessian(&w0);
    let ev = sym_eigenvalues(&a0);
    let top = ev.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let bottom = ev.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if !(top > 0.0 && bottom > 1e-12 * top) {
        return Err(Error::SingularBase { index: base_index });
    }
    let a0_inv_norm = 1.0 / bottom;

    // a grid pitch of R/8 in x and y gives pitch R/8 over the 2R ball in w
    let mut r = radius;
    let (eps, product) = loop {
        let eps = measure_epsilon(cost, &a0, &w0, r, 16, opts.grid_cap, 3);
        let product = eps * a0_inv_norm;
        if !opts.auto_shrink {
            if product >= 1.0 {
                return Err(Error::EpsilonTooLarge { product, limit: 1.0 });
            }
            break (eps, product);
        }
        if product <= opts.shrink_target {
            break (eps, product);
        }
        if r * 0.5 < opts.min_radius {
            return Err(Error::EpsilonTooLarge {
                product,
                limit: opts.shrink_target,
            });
        }
        r *= 0.5;
    };
    log::debug!("chart radius {r:e}, eps {eps:e}, eps*|A0^-1| {product:e}");

    let refined = measure_epsilon(cost, &a0, &w0, r, 32, opts.grid_cap, 5);
    if refined > 1.1 * eps + 1e-14 {
        return Err(Error::UnderResolved {
            reported: eps,
            refined,
        });
    }

    let lip = ((1.0 + product) / (1.0 - product)).sqrt();
    let indices: Vec<usize> = set
        .pairs()
        .iter()
        .enumerate()
        .filter(|(_, (x, y))| ((x - &x0).norm_squared() + (y - &y0).norm_squared()).sqrt() <= r)
        .map(|(i, _)| i)
        .collect();
    let pairs: Vec<&(DVector<f64>, DVector<f64>)> = indices.iter().map(|&i| &set.pairs()[i]).collect();
    let graph: Vec<(DVector<f64>, DVector<f64>)> = pairs.iter().map(|(x, y)| cayley(&a0, x, y)).collect();

    struct Scan {
        lip_bad: Vec<(usize, usize)>,
        est_bad: Vec<(usize, usize)>,
        worst_ratio: f64,
        worst_excess: f64,
    }
    let tol = opts.tol;
    let scan = (0..graph.len())
        .into_par_iter()
        .map(|i| {
            let mut s = Scan {
                lip_bad: Vec::new(),
                est_bad: Vec::new(),
                worst_ratio: 0.0,
                worst_excess: f64::NEG_INFINITY,
            };
            for j in (i + 1)..graph.len() {
                let du = (&graph[i].0 - &graph[j].0).norm();
                let dv = (&graph[i].1 - &graph[j].1).norm();
                let ok = if du < 1e-12 { dv < tol } else { dv <= lip * du + tol };
                if du > 0.0 {
                    s.worst_ratio = s.worst_ratio.max(dv / du);
                } else if dv > 0.0 {
                    s.worst_ratio = f64::INFINITY;
                }
                if !ok {
                    s.lip_bad.push((indices[i], indices[j]));
                }
                let (x, y) = pairs[i];
                let (xp, yp) = pairs[j];
                let lhs = (&a0 * (xp - x)).dot(&(y - yp));
                let excess = lhs - eps * (x - xp).norm() * (y - yp).norm();
                s.worst_excess = s.worst_excess.max(excess);
                if excess > tol {
                    s.est_bad.push((indices[i], indices[j]));
                }
            }
            s
        })
        .reduce(
            || Scan {
                lip_bad: Vec::new(),
                est_bad: Vec::new(),
                worst_ratio: 0.0,
                worst_excess: f64::NEG_INFINITY,
            },
            |mut a, b| {
                a.lip_bad.extend(b.lip_bad);
                a.est_bad.extend(b.est_bad);
                a.worst_ratio = a.worst_ratio.max(b.worst_ratio);
                a.worst_excess = a.worst_excess.max(b.worst_excess);
                a
            },
        );
    if !scan.lip_bad.is_empty() {
        let mut w = scan.lip_bad;
        w.sort_unstable();
        return Err(Error::LipschitzViolation {
            count: w.len(),
            worst_ratio: scan.worst_ratio,
            lip,
            witnesses: w.into_iter().take(100).collect(),
        });
    }
    if !scan.est_bad.is_empty() {
        let mut w = scan.est_bad;
        w.sort_unstable();
        return Err(Error::EstimateViolation {
            count: w.len(),
            worst_excess: scan.worst_excess,
            witnesses: w.into_iter().take(100).collect(),
        });
    }
    Ok(Chart {
        base_index,
        base: (x0, y0),
        cayley_singular_values: cayley_singular_values(&a0),
        a0,
        a0_inv_norm,
        epsilon: eps,
        refined_epsilon: refined,
        radius: r,
        lip,
        indices,
        graph,
        max_ratio: scan.worst_ratio,
        max_estimate_excess: scan.worst_excess.max(0.0),
    })
}

/// Default diagonal tolerance `1e-10 * max(1, scale)`.
pub fn default_diagonal_tol(set: &MonotoneSet) -> f64 {
    1e-10 * set.scale().max(1.0)
}

/// Splits `set` into pairs with `|x - y| > tol` and the diagonal part.
pub fn split_diagonal(set: &MonotoneSet, tol: f64) -> (MonotoneSet, MonotoneSet) {
    let (diag, off): (Vec<_>, Vec<_>) = set
        .pairs()
        .iter()
        .cloned()
        .partition(|(x, y)| (x - y).norm() <= tol);
    (
        MonotoneSet {
            dim: set.dim(),
            pairs: off,
        },
        MonotoneSet {
            dim: set.dim(),
            pairs: diag,
        },
    )
}
