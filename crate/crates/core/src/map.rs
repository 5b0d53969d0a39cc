//! Finite multivalued maps and their monotonicity diagnostics.

use std::collections::HashMap;

use itertools::Itertools;
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cost::CostSpec;
use crate::{Error, Result};

/// Exact-equality key for a point; `-0.0` and `0.0` coincide.
fn key(v: &DVector<f64>) -> Vec<u64> {
    v.iter()
        .map(|&c| if c == 0.0 { 0u64 } else { c.to_bits() })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct MapEntry {
    pub x: DVector<f64>,
    pub values: Vec<DVector<f64>>,
}

/// A finite multivalued map `T`. Domain points are deduplicated by exact
/// equality; repeated insertions merge their values.
#[derive(Clone, Debug)]
pub struct MultiMap {
    dim: usize,
    entries: Vec<MapEntry>,
    index: HashMap<Vec<u64>, usize>,
}

impl PartialEq for MultiMap {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.entries == other.entries
    }
}

/// One point `(x, xi)` of the graph, with the index of `x` in the domain.
#[derive(Clone, Copy, Debug)]
pub struct GraphPoint<'a> {
    pub entry: usize,
    pub x: &'a DVector<f64>,
    pub value: &'a DVector<f64>,
}

impl MultiMap {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            entries: Vec::new(),
            index: HashMap::new(),
        }
    }

    /// Builds a map from `(x, xi)` graph pairs.
    pub fn from_pairs<I>(dim: usize, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (DVector<f64>, DVector<f64>)>,
    {
        let mut map = Self::new(dim);
        for (x, v) in pairs {
            map.insert(x, v)?;
        }
        Ok(map)
    }

    /// Adds `value` to `T(x)`. Exact duplicates are ignored.
    pub fn insert(&mut self, x: DVector<f64>, value: DVector<f64>) -> Result<()> {
        for v in [&x, &value] {
            if v.len() != self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    found: v.len(),
                });
            }
            if v.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "non-finite coordinate in {:?}",
                    v.as_slice()
                )));
            }
        }
        let k = key(&x);
        match self.index.get(&k) {
            Some(&i) => {
                let vk = key(&value);
                let entry = &mut self.entries[i];
                if !entry.values.iter().any(|v| key(v) == vk) {
                    entry.values.push(value);
                }
            }
            None => {
                self.index.insert(k, self.entries.len());
                self.entries.push(MapEntry {
                    x,
                    values: vec![value],
                });
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[MapEntry] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of domain points.
    pub fn domain_len(&self) -> usize {
        self.entries.len()
    }

    /// Number of graph points.
    pub fn graph_len(&self) -> usize {
        self.entries.iter().map(|e| e.values.len()).sum()
    }

    /// `T(x)`, if `x` is in the domain.
    pub fn get(&self, x: &DVector<f64>) -> Option<&[DVector<f64>]> {
        self.index
            .get(&key(x))
            .map(|&i| self.entries[i].values.as_slice())
    }

    /// Graph points in entry order.
    pub fn graph(&self) -> Vec<GraphPoint<'_>> {
        self.entries
            .iter()
            .enumerate()
            .flat_map(|(i, e)| {
                e.values.iter().map(move |v| GraphPoint {
                    entry: i,
                    x: &e.x,
                    value: v,
                })
            })
            .collect()
    }

    /// The graph as a sorted list of `(x, xi)` coordinate vectors, for
    /// exact set comparisons.
    pub fn graph_set(&self) -> Vec<(Vec<u64>, Vec<u64>)> {
        let mut g: Vec<_> = self
            .graph()
            .iter()
            .map(|gp| (key(gp.x), key(gp.value)))
            .collect();
        g.sort();
        g.dedup();
        g
    }

    /// Diameter of each value set, in entry order.
    pub fn diameters(&self) -> Vec<f64> {
        self.entries
            .iter()
            .map(|e| {
                e.values
                    .iter()
                    .tuple_combinations()
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0, f64::max)
            })
            .collect()
    }

    /// Fraction of domain points whose value set has diameter above
    /// `threshold`.
    pub fn multivalued_fraction(&self, threshold: f64) -> f64 {
        if self.entries.is_empty() {
            return 0.0;
        }
        let count = self.diameters().iter().filter(|&&d| d > threshold).count();
        count as f64 / self.entries.len() as f64
    }

    /// Largest absolute coordinate over the graph.
    pub fn scale(&self) -> f64 {
        self.entries
            .iter()
            .flat_map(|e| e.x.iter().chain(e.values.iter().flat_map(|v| v.iter())))
            .fold(0.0, |acc: f64, c| acc.max(c.abs()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ViolationKind {
    Pairwise,
    Cyclic,
    Maximality,
}

/// An offending tuple of graph points. For cyclic witnesses `permutation[i]`
/// is the position (within `points`) of the value reassigned to point `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct Witness {
    pub points: Vec<usize>,
    pub permutation: Vec<usize>,
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ViolationReport {
    pub kind: ViolationKind,
    /// Stored witnesses; capped at [`MAX_WITNESSES`] plus the worst one.
    pub witnesses: Vec<Witness>,
    /// Minimum gap over witnesses, `0` when there are none.
    pub worst_gap: f64,
    pub checked_count: u64,
    pub violation_count: u64,
    /// Fraction of the exhaustive search that was evaluated.
    pub coverage: f64,
}

impl ViolationReport {
    pub fn passed(&self) -> bool {
        self.witnesses.is_empty()
    }

    fn assemble(kind: ViolationKind, found: Vec<Witness>, checked: u64, coverage: f64) -> Self {
        let violation_count = found.len() as u64;
        let worst = found
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.gap.total_cmp(&b.1.gap))
            .map(|(i, w)| (i, w.clone()));
        let mut witnesses: Vec<Witness> = found.into_iter().take(MAX_WITNESSES).collect();
        let worst_gap = match worst {
            Some((i, w)) => {
                let gap = w.gap;
                if i >= MAX_WITNESSES {
                    witnesses.push(w);
                }
                gap
            }
            None => 0.0,
        };
        Self {
            kind,
            witnesses,
            worst_gap,
            checked_count: checked,
            violation_count,
            coverage,
        }
    }
}

pub const MAX_WITNESSES: usize = 1000;

/// Default graph-size guard for the quadratic pairwise check.
pub const MAX_GRAPH_POINTS: usize = 10_000;

/// Cap on permutation evaluations in [`check_cyclic`].
pub const MAX_CYCLE_EVALUATIONS: u64 = 1_000_000;

/// `1e-9 (1 + scale^p)`, with `scale` the largest absolute coordinate.
pub fn default_tolerance(cost: &CostSpec, map: &MultiMap) -> f64 {
    1e-9 * (1.0 + map.scale().powf(cost.degree()))
}

fn check_dims(cost: &CostSpec, map: &MultiMap) -> Result<()> {
    if map.dim() != cost.dim() {
        return Err(Error::DimensionMismatch {
            expected: cost.dim(),
            found: map.dim(),
        });
    }
    Ok(())
}

/// Pairwise h-monotonicity over all unordered pairs of graph points.
pub fn check_h_monotone(cost: &CostSpec, map: &MultiMap, tol: f64) -> Result<ViolationReport> {
    check_h_monotone_with_limit(cost, map, tol, MAX_GRAPH_POINTS)
}

pub fn check_h_monotone_with_limit(
    cost: &CostSpec,
    map: &MultiMap,
    tol: f64,
    limit: usize,
) -> Result<ViolationReport> {
    check_dims(cost, map)?;
    if map.is_empty() {
        return Err(Error::InvalidArgument("map has an empty domain".into()));
    }
    let graph = map.graph();
    if graph.len() > limit {
        return Err(Error::GraphTooLarge {
            size: graph.len(),
            limit,
        });
    }
    let found: Vec<Witness> = (0..graph.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            let gi = graph[i];
            let graph = &graph;
            ((i + 1)..graph.len()).filter_map(move |j| {
                let gj = graph[j];
                let gap = cost.cost(gi.x, gj.value) + cost.cost(gj.x, gi.value)
                    - cost.cost(gi.x, gi.value)
                    - cost.cost(gj.x, gj.value);
                (gap < -tol).then(|| Witness {
                    points: vec![i, j],
                    permutation: vec![1, 0],
                    gap,
                })
            })
        })
        .collect();
    let n = graph.len() as u64;
    Ok(ViolationReport::assemble(
        ViolationKind::Pairwise,
        found,
        n * n.saturating_sub(1) / 2,
        1.0,
    ))
}

fn binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn factorial(k: u64) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Cyclic monotonicity: for every subset of graph points of size
/// `2..=max_cycle` and every permutation of their values, the assigned cost
/// must not exceed the permuted cost by more than `tol`.
///
/// When the exhaustive search exceeds [`MAX_CYCLE_EVALUATIONS`] permutation
/// evaluations, subsets are sampled uniformly with a seeded generator and
/// `coverage` reports the evaluated fraction.
pub fn check_cyclic(
    cost: &CostSpec,
    map: &MultiMap,
    max_cycle: usize,
    tol: f64,
    seed: u64,
) -> Result<ViolationReport> {
    check_dims(cost, map)?;
    if !(2..=8).contains(&max_cycle) {
        return Err(Error::InvalidArgument(format!(
            "max_cycle {max_cycle} must lie in 2..=8"
        )));
    }
    if map.is_empty() {
        return Err(Error::InvalidArgument("map has an empty domain".into()));
    }
    let graph = map.graph();
    let g = graph.len();
    let sizes: Vec<usize> = (2..=max_cycle.min(g)).collect();

    // cost matrix between every source and every value
    let costs: Vec<Vec<f64>> = graph
        .par_iter()
        .map(|a| graph.iter().map(|b| cost.cost(a.x, b.value)).collect())
        .collect();

    let total: f64 = sizes
        .iter()
        .map(|&k| binomial(g as u64, k as u64) * (factorial(k as u64) - 1.0))
        .sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut found = Vec::new();
    let mut checked = 0u64;

    for &k in &sizes {
        let perms: Vec<Vec<usize>> = (0..k).permutations(k).skip(1).collect();
        let subsets = binomial(g as u64, k as u64);
        let per_subset = perms.len() as f64;
        let budget = MAX_CYCLE_EVALUATIONS as f64 / sizes.len() as f64;
        let eval_subset = |subset: &[usize]| -> Vec<Witness> {
            let base: f64 = subset.iter().map(|&i| costs[i][i]).sum();
            perms
                .iter()
                .filter_map(|perm| {
                    let permuted: f64 = perm
                        .iter()
                        .enumerate()
                        .map(|(a, &b)| costs[subset[a]][subset[b]])
                        .sum();
                    let gap = permuted - base;
                    (gap < -tol).then(|| Witness {
                        points: subset.to_vec(),
                        permutation: perm.clone(),
                        gap,
                    })
                })
                .collect()
        };
        if (total as u64) <= MAX_CYCLE_EVALUATIONS || subsets * per_subset <= budget {
            let all: Vec<Vec<usize>> = (0..g).combinations(k).collect();
            found.extend(all.par_iter().flat_map_iter(|s| eval_subset(s)).collect::<Vec<_>>());
            checked += (all.len() * perms.len()) as u64;
        } else {
            let draws = ((budget / per_subset).floor() as usize).max(1);
            let sample: Vec<Vec<usize>> = (0..draws)
                .map(|_| {
                    let mut s = rand::seq::index::sample(&mut rng, g, k).into_vec();
                    s.sort_unstable();
                    s
                })
                .collect();
            found.extend(sample.par_iter().flat_map_iter(|s| eval_subset(s)).collect::<Vec<_>>());
            checked += (draws * perms.len()) as u64;
        }
    }
    let coverage = if total > 0.0 {
        (checked as f64 / total).min(1.0)
    } else {
        1.0
    };
    if coverage < 1.0 {
        log::info!("cyclic check sampled {:.3e} of the search space", coverage);
    }
    Ok(ViolationReport::assemble(
        ViolationKind::Cyclic,
        found,
        checked,
        coverage,
    ))
}

/// Graph transposition: `T^{-1}(xi) = { x : xi in T(x) }`.
pub fn invert(map: &MultiMap) -> MultiMap {
    let mut inv = MultiMap::new(map.dim());
    for gp in map.graph() {
        inv.insert(gp.value.clone(), gp.x.clone())
            .expect("graph points share the map dimension");
    }
    inv
}

/// Monotonicity of `T^{-1}`; only meaningful for even costs, others are
/// rejected.
pub fn check_inverse_monotone(cost: &CostSpec, map: &MultiMap, tol: f64) -> Result<ViolationReport> {
    cost.is_even(64, 1e-10)?;
    check_h_monotone(cost, &invert(map), tol)
}

/// `min` over graph points `(y, zeta)` of
/// `h(x - zeta) + h(y - xi) - h(x - xi) - h(y - zeta)`.
///
/// The candidate `(x, xi)` can be added to a monotone `T` iff the result is
/// at least `-tol`. Returns `+inf` for an empty map.
pub fn maximality_gap(cost: &CostSpec, map: &MultiMap, x: &DVector<f64>, xi: &DVector<f64>) -> f64 {
    map.graph()
        .iter()
        .map(|gp| {
            cost.cost(x, gp.value) + cost.cost(gp.x, xi) - cost.cost(x, xi) - cost.cost(gp.x, gp.value)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Whether `(x, xi)` extends `T` monotonically, within `tol`.
pub fn admits_extension(cost: &CostSpec, map: &MultiMap, x: &DVector<f64>, xi: &DVector<f64>, tol: f64) -> bool {
    maximality_gap(cost, map, x, xi) >= -tol
}

/// Witnesses against extending `T` by `(x, xi)`.
pub fn maximality_report(
    cost: &CostSpec,
    map: &MultiMap,
    x: &DVector<f64>,
    xi: &DVector<f64>,
    tol: f64,
) -> ViolationReport {
    let graph = map.graph();
    let found: Vec<Witness> = graph
        .iter()
        .enumerate()
        .filter_map(|(i, gp)| {
            let gap = cost.cost(x, gp.value) + cost.cost(gp.x, xi) - cost.cost(x, xi) - cost.cost(gp.x, gp.value);
            (gap < -tol).then(|| Witness {
                points: vec![i],
                permutation: vec![],
                gap,
            })
        })
        .collect();
    ViolationReport::assemble(ViolationKind::Maximality, found, graph.len() as u64, 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProfileRow {
    pub radius: f64,
    /// `max |T(x) - T(x')|` over domain pairs with `|x - x'| <= radius`.
    pub oscillation: f64,
}

/// Oscillation profile of a single-valued map over a grid of radii.
pub fn continuity_profile(map: &MultiMap, radii: &[f64]) -> Result<Vec<ProfileRow>> {
    for e in map.entries() {
        if e.values.iter().any(|v| v != &e.values[0]) {
            return Err(Error::Multivalued {
                point: e.x.iter().copied().collect(),
            });
        }
    }
    let e = map.entries();
    let pairs: Vec<(f64, f64)> = (0..e.len())
        .tuple_combinations()
        .map(|(i, j)| ((&e[i].x - &e[j].x).norm(), (&e[i].values[0] - &e[j].values[0]).norm()))
        .collect();
    Ok(radii
        .iter()
        .map(|&r| ProfileRow {
            radius: r,
            oscillation: pairs
                .iter()
                .filter(|(d, _)| *d <= r)
                .map(|&(_, o)| o)
                .fold(0.0, f64::max),
        })
        .collect())
}
