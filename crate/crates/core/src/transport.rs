//! Exact discrete optimal assignments and their c-transform potentials.
//!
//! Optimal assignments between equal-size point clouds are c-cyclically
//! monotone, and the contact set of a c-transform pair is c-monotone; both
//! serve as guaranteed-monotone test data.

use itertools::Itertools;
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cost::CostSpec;
use crate::map::MultiMap;
use crate::{Error, Result};

/// Largest supported instance.
pub const MAX_POINTS: usize = 512;

/// Largest instance for exhaustive search.
pub const MAX_EXHAUSTIVE: usize = 9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AssignmentMethod {
    /// Exhaustive up to [`MAX_EXHAUSTIVE`] points, Hungarian above.
    Auto,
    Exhaustive,
    Hungarian,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    pub sources: Vec<DVector<f64>>,
    pub targets: Vec<DVector<f64>>,
    /// `perm[i]` is the target index assigned to source `i`.
    pub perm: Vec<usize>,
    pub total_cost: f64,
    pub method: AssignmentMethod,
}

impl Assignment {
    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    /// Single-valued map `source_i -> target_perm(i)`.
    pub fn as_multimap(&self) -> MultiMap {
        let dim = self.sources.first().map_or(0, |s| s.len());
        MultiMap::from_pairs(
            dim,
            self.sources
                .iter()
                .zip(&self.perm)
                .map(|(s, &j)| (s.clone(), self.targets[j].clone())),
        )
        .expect("assignment points share one dimension")
    }
}

fn cost_matrix(cost: &CostSpec, sources: &[DVector<f64>], targets: &[DVector<f64>]) -> Vec<Vec<f64>> {
    sources
        .iter()
        .map(|s| targets.iter().map(|t| cost.cost(s, t)).collect())
        .collect()
}

fn tie_tolerance(c: &[Vec<f64>]) -> f64 {
    let top = c.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    1e-12 * (1.0 + top) * c.len().max(1) as f64
}

fn validate(cost: &CostSpec, sources: &[DVector<f64>], targets: &[DVector<f64>]) -> Result<()> {
    if sources.len() != targets.len() {
        return Err(Error::SizeMismatch {
            sources: sources.len(),
            targets: targets.len(),
        });
    }
    if sources.is_empty() {
        return Err(Error::InvalidArgument("empty point sets".into()));
    }
    if sources.len() > MAX_POINTS {
        return Err(Error::TooLarge {
            size: sources.len(),
            cap: MAX_POINTS,
        });
    }
    for p in sources.iter().chain(targets) {
        cost.check_point(p)?;
    }
    Ok(())
}

/// Minimum-cost bijection, with [`AssignmentMethod::Auto`].
pub fn solve_assignment(cost: &CostSpec, sources: &[DVector<f64>], targets: &[DVector<f64>]) -> Result<Assignment> {
    solve_assignment_with(cost, sources, targets, AssignmentMethod::Auto)
}

/// Minimum-cost bijection; among (numerically) tied optima the
/// lexicographically smallest permutation is returned.
pub fn solve_assignment_with(
    cost: &CostSpec,
    sources: &[DVector<f64>],
    targets: &[DVector<f64>],
    method: AssignmentMethod,
) -> Result<Assignment> {
    validate(cost, sources, targets)?;
    let m = sources.len();
    let method = match method {
        AssignmentMethod::Auto if m <= MAX_EXHAUSTIVE => AssignmentMethod::Exhaustive,
        AssignmentMethod::Auto => AssignmentMethod::Hungarian,
        AssignmentMethod::Exhaustive if m > MAX_EXHAUSTIVE => {
            return Err(Error::TooLarge {
                size: m,
                cap: MAX_EXHAUSTIVE,
            })
        }
        other => other,
    };
    let c = cost_matrix(cost, sources, targets);
    let perm = match method {
        AssignmentMethod::Exhaustive => exhaustive(&c),
        _ => hungarian(&c),
    };
    let total_cost = perm.iter().enumerate().map(|(i, &j)| c[i][j]).sum();
    Ok(Assignment {
        sources: sources.to_vec(),
        targets: targets.to_vec(),
        perm,
        total_cost,
        method,
    })
}

fn exhaustive(c: &[Vec<f64>]) -> Vec<usize> {
    let m = c.len();
    let tol = tie_tolerance(c);
    let mut best = f64::INFINITY;
    let mut best_perm = Vec::new();
    // permutations come in lexicographic order, so only strict improvements
    // replace the incumbent
    for perm in (0..m).permutations(m) {
        let total: f64 = perm.iter().enumerate().map(|(i, &j)| c[i][j]).sum();
        if total < best - tol {
            best = total;
            best_perm = perm;
        }
    }
    best_perm
}

/// Shortest augmenting path Hungarian method with row and column duals,
/// followed by a lexicographic pass over the tight graph.
fn hungarian(c: &[Vec<f64>]) -> Vec<usize> {
    let m = c.len();
    let inf = f64::INFINITY;
    let mut u = vec![0.0; m + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=m {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = c[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_of = vec![0usize; m];
    let mut col_of = vec![0usize; m];
    for j in 1..=m {
        row_of[j - 1] = p[j] - 1;
        col_of[p[j] - 1] = j - 1;
    }
    let tol = tie_tolerance(c);
    let tight: Vec<Vec<bool>> = (0..m)
        .map(|i| (0..m).map(|j| c[i][j] - u[i + 1] - v[j + 1] <= tol).collect())
        .collect();
    lexicographic_matching(&tight, col_of, row_of)
}

/// Turns a perfect matching of the bipartite `tight` graph into the
/// lexicographically smallest one.
fn lexicographic_matching(tight: &[Vec<bool>], mut col_of: Vec<usize>, mut row_of: Vec<usize>) -> Vec<usize> {
    let m = tight.len();
    let mut fixed_col = vec![false; m];

    // augmenting path from `row` to the free column `target`, avoiding fixed
    // rows and columns
    fn augment(
        row: usize,
        target: usize,
        tight: &[Vec<bool>],
        fixed_col: &[bool],
        row_of: &mut [usize],
        col_of: &mut [usize],
        seen: &mut [bool],
    ) -> bool {
        for j in 0..tight.len() {
            if !tight[row][j] || fixed_col[j] || seen[j] {
                continue;
            }
            seen[j] = true;
            if j == target {
                row_of[j] = row;
                col_of[row] = j;
                return true;
            }
            let next = row_of[j];
            if augment(next, target, tight, fixed_col, row_of, col_of, seen) {
                row_of[j] = row;
                col_of[row] = j;
                return true;
            }
        }
        false
    }

    for i in 0..m {
        let current = col_of[i];
        for j in 0..current {
            if !tight[i][j] || fixed_col[j] {
                continue;
            }
            // try i -> j, then re-route the row displaced from j to `current`
            let displaced = row_of[j];
            let (saved_rows, saved_cols) = (row_of.clone(), col_of.clone());
            col_of[i] = j;
            row_of[j] = i;
            fixed_col[j] = true;
            let mut seen = vec![false; m];
            if augment(displaced, current, tight, &fixed_col, &mut row_of, &mut col_of, &mut seen) {
                break;
            }
            row_of = saved_rows;
            col_of = saved_cols;
            fixed_col[j] = false;
        }
        fixed_col[col_of[i]] = true;
    }
    col_of
}

/// Potentials of an optimal assignment: `phi` on sources and its finite
/// c-transform `phi_c` on targets, with `phi_i + phi_c_j <= c(x_i, m_j)` and
/// equality on assigned pairs (up to rounding).
#[derive(Clone, Debug, PartialEq)]
pub struct Potentials {
    pub phi: Vec<f64>,
    pub phi_c: Vec<f64>,
}

/// Potentials from the primal optimum: shortest paths over the exchange
/// graph give target potentials, followed by the finite c-transform.
pub fn c_potentials(cost: &CostSpec, assignment: &Assignment) -> Potentials {
    let c = cost_matrix(cost, &assignment.sources, &assignment.targets);
    let m = c.len();
    let perm = &assignment.perm;
    // psi_j <= psi_perm(i) + c(x_i, m_j) - c(x_i, m_perm(i))
    let mut psi = vec![0.0; m];
    for _ in 0..m {
        let mut changed = false;
        for i in 0..m {
            let own = perm[i];
            let base = psi[own] - c[i][own];
            for j in 0..m {
                let cand = base + c[i][j];
                if cand < psi[j] - 1e-15 * (1.0 + cand.abs()) {
                    psi[j] = cand;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let phi: Vec<f64> = (0..m).map(|i| c[i][perm[i]] - psi[perm[i]]).collect();
    let phi_c: Vec<f64> = (0..m)
        .map(|j| (0..m).map(|i| c[i][j] - phi[i]).fold(f64::INFINITY, f64::min))
        .collect();
    Potentials { phi, phi_c }
}

/// Default argmin tie tolerance `1e-9 (1 + scale^p)`.
pub fn tie_tolerance_for(cost: &CostSpec, points: &[&[DVector<f64>]]) -> f64 {
    let scale = points
        .iter()
        .flat_map(|set| set.iter().flat_map(|v| v.iter()))
        .fold(0.0f64, |m, c| m.max(c.abs()));
    1e-9 * (1.0 + scale.powf(cost.degree()))
}

/// Multimap `x -> argmin_j [c(x, m_j) - phi_c_j]` over `grid`, with ties
/// within `tol`.
pub fn contact_multimap(
    cost: &CostSpec,
    targets: &[DVector<f64>],
    phi_c: &[f64],
    grid: &[DVector<f64>],
    tol: f64,
) -> Result<MultiMap> {
    let mut map = MultiMap::new(cost.dim());
    for x in grid {
        let vals: Vec<f64> = targets.iter().zip(phi_c).map(|(t, &pc)| cost.cost(x, t) - pc).collect();
        let best = vals.iter().copied().fold(f64::INFINITY, f64::min);
        for (j, &val) in vals.iter().enumerate() {
            if val <= best + tol {
                map.insert(x.clone(), targets[j].clone())?;
            }
        }
    }
    Ok(map)
}

/// Solves the assignment, builds the c-transform pair and returns the
/// contact multimap over `grid` with the default tie tolerance.
pub fn c_potential_multimap(
    cost: &CostSpec,
    sources: &[DVector<f64>],
    targets: &[DVector<f64>],
    grid: &[DVector<f64>],
) -> Result<MultiMap> {
    let a = solve_assignment(cost, sources, targets)?;
    let pot = c_potentials(cost, &a);
    let tol = tie_tolerance_for(cost, &[sources, targets, grid]);
    contact_multimap(cost, targets, &pot.phi_c, grid, tol)
}

/// Tensor grid with `per_axis` equally spaced nodes (endpoints included)
/// on `[lo, hi]` per axis, last axis fastest.
pub fn node_grid(dim: usize, per_axis: usize, lo: f64, hi: f64) -> Vec<DVector<f64>> {
    if per_axis == 0 || dim == 0 {
        return Vec::new();
    }
    let step = if per_axis > 1 { (hi - lo) / (per_axis - 1) as f64 } else { 0.0 };
    let axis: Vec<f64> = (0..per_axis)
        .map(|i| if i + 1 == per_axis && per_axis > 1 { hi } else { lo + step * i as f64 })
        .collect();
    (0..dim)
        .map(|_| axis.iter().copied())
        .multi_cartesian_product()
        .map(DVector::from_vec)
        .collect()
}

/// `count` points uniform in `[lo, hi]^dim`.
pub fn uniform_points<R: Rng>(rng: &mut R, dim: usize, count: usize, lo: f64, hi: f64) -> Vec<DVector<f64>> {
    (0..count)
        .map(|_| DVector::from_iterator(dim, (0..dim).map(|_| rng.random_range(lo..hi))))
        .collect()
}

/// Random instance of `m` sources and targets in `[-1, 1]^dim`.
pub fn random_instance(dim: usize, m: usize, seed: u64) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = uniform_points(&mut rng, dim, m, -1.0, 1.0);
    let t = uniform_points(&mut rng, dim, m, -1.0, 1.0);
    (s, t)
}
