//! Acceptance suite. Each test prints one `PASS`/`FAIL` line and then asserts.
//!
//! Run with `cargo test -p hmono --test acceptance -- --nocapture`.

use std::f64::consts::PI;
use std::time::Instant;

use hmono::angles::{
    admissible_delta0, admissible_theta1, cone_exclusion, delta_gap, f_angle, f_constant, g_lower_bound, AngleParams,
    ConeSpec, ExclusionSetup,
};
use hmono::cost::{ellipticity_bounds, CostSpec, DEFAULT_MARGIN};
use hmono::form::{form_matrix, monotone_pair_gap, sandwich_from, QuadratureConfig, Quadruple};
use hmono::linalg::angle;
use hmono::map::{check_cyclic, check_h_monotone, default_tolerance, MultiMap};
use hmono::measure::{
    additivity_defect, density_ratio, CellMap, CellSet, Complement, DensityOptions, Grid, GridMeasure,
};
use hmono::rectify::{build_chart, cayley, Chart, ChartOptions, MonotoneSet};
use hmono::sampling::sphere_points;
use hmono::transport::{
    c_potential_multimap, c_potentials, contact_multimap, node_grid, solve_assignment, tie_tolerance_for,
    uniform_points,
};
use hmono::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn verdict(id: u32, name: &str, pass: bool, detail: String) {
    println!("{} criterion {id:>2} ({name}): {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_quad(rng: &mut ChaCha8Rng, n: usize) -> Quadruple {
    let mut pts = uniform_points(rng, n, 4, -1.0, 1.0).into_iter();
    let mut next = || pts.next().unwrap();
    Quadruple::new(next(), next(), next(), next()).unwrap()
}

fn unit(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_iterator(n, (0..n).map(|_| rng.random_range(-1.0..1.0)));
        let norm = v.norm();
        if norm > 1e-3 && norm <= 1.0 {
            return v / norm;
        }
    }
}

/// Unit vector orthogonal to the unit vector `e`.
fn orthogonal_unit(rng: &mut ChaCha8Rng, e: &DVector<f64>) -> DVector<f64> {
    loop {
        let v = unit(rng, e.len());
        let z = &v - e * e.dot(&v);
        if z.norm() > 1e-3 {
            return z.normalize();
        }
    }
}

const COSTS: [(f64, usize); 12] = [
    (2.0, 1),
    (2.0, 2),
    (2.0, 3),
    (3.0, 1),
    (3.0, 2),
    (3.0, 3),
    (4.0, 1),
    (4.0, 2),
    (4.0, 3),
    (6.0, 1),
    (6.0, 2),
    (6.0, 3),
];

#[test]
fn criterion_01_equivalence_of_formulations() {
    let start = Instant::now();
    let cfg = QuadratureConfig::with_order(16);
    let mut violations = 0;
    let mut worst_p2: f64 = 0.0;
    let mut worst_ratio: f64 = 0.0;
    for (k, &(p, n)) in COSTS.iter().enumerate() {
        let cost = CostSpec::power(n, p).unwrap();
        let mut r = rng(100 + k as u64);
        for _ in 0..1000 {
            let q = random_quad(&mut r, n);
            let f = form_matrix(&cost, &q, &cfg).unwrap();
            let diff = (monotone_pair_gap(&cost, &q) - f.gap(&q)).abs();
            let allowed = f.est_error * (&q.x - &q.y).norm() * (&q.xi - &q.zeta).norm();
            if diff > allowed {
                violations += 1;
            }
            if allowed > 0.0 {
                worst_ratio = worst_ratio.max(diff / allowed);
            }
            if p == 2.0 {
                worst_p2 = worst_p2.max(diff);
                if diff > 1e-10 {
                    violations += 1;
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        1,
        "equivalence of formulations",
        violations == 0 && secs < 30.0,
        format!(
            "12 costs x 1000 quadruples, {violations} violations, worst |diff|/allowance {worst_ratio:.3}, worst p=2 diff {worst_p2:.2e}, {secs:.1} s"
        ),
    );
}

/// Central second differences with one Richardson step, error `O(step^4)`.
fn fd_hessian(cost: &CostSpec, x: &DVector<f64>, step: f64) -> DMatrix<f64> {
    (second_differences(cost, x, 0.5 * step) * 4.0 - second_differences(cost, x, step)) / 3.0
}

fn second_differences(cost: &CostSpec, x: &DVector<f64>, step: f64) -> DMatrix<f64> {
    let n = x.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let at = |si: f64, sj: f64| {
                let mut z = x.clone();
                z[i] += si * step;
                z[j] += sj * step;
                cost.h(&z)
            };
            m[(i, j)] = (at(1.0, 1.0) - at(1.0, -1.0) - at(-1.0, 1.0) + at(-1.0, -1.0)) / (4.0 * step * step);
        }
    }
    (&m + m.transpose()) * 0.5
}

#[test]
fn criterion_02_ellipticity_sandwich() {
    let start = Instant::now();
    let cfg = QuadratureConfig::with_order(16);
    let mut violations = 0;
    let mut checks = 0;
    let mut worst_fd: f64 = 0.0;
    for (k, &(p, n)) in COSTS.iter().enumerate() {
        let cost = CostSpec::power(n, p).unwrap();
        let b = ellipticity_bounds(&cost, 1000, DEFAULT_MARGIN, 0).unwrap();
        let mut r = rng(200 + k as u64);
        for _ in 0..1000 {
            let q = random_quad(&mut r, n);
            let f = form_matrix(&cost, &q, &cfg).unwrap();
            for _ in 0..10 {
                let v = unit(&mut r, n) * r.random_range(0.1..2.0);
                checks += 1;
                if !sandwich_from(&f, &b, &v, 0.0).passed() {
                    violations += 1;
                }
            }
        }
        // finite-difference extremes of D^2h on the unit sphere
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for u in sphere_points(n, 200, 7) {
            let ev = fd_hessian(&cost, &u, 2e-4).symmetric_eigenvalues();
            lo = lo.min(ev.min());
            hi = hi.max(ev.max());
        }
        let expected_lo = if n == 1 { p * (p - 1.0) } else { p };
        let err = (lo - b.lambda).abs().max((hi - b.big_lambda).abs());
        worst_fd = worst_fd.max(err);
        if (b.lambda - expected_lo).abs() > 0.0 || (b.big_lambda - p * (p - 1.0)).abs() > 0.0 || err > 1e-6 {
            violations += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        2,
        "ellipticity sandwich",
        violations == 0 && secs < 60.0,
        format!(
            "{checks} sandwich checks, {violations} violations, worst finite-difference mismatch {worst_fd:.2e}, {secs:.1} s"
        ),
    );
}

#[test]
fn criterion_03_phi_vanishing() {
    let cfg = QuadratureConfig::with_order(16);
    let mut nonpositive = 0;
    let mut smallest = f64::INFINITY;
    let mut degenerate_ok = true;
    for (k, p) in [2.0, 3.0, 4.0, 6.0].into_iter().enumerate() {
        let n = 2;
        let cost = CostSpec::power(n, p).unwrap();
        let mut r = rng(300 + k as u64);
        for i in 0..1000 {
            let q = if i % 2 == 0 {
                random_quad(&mut r, n)
            } else {
                // near-degenerate: start from a single point and move a
                // random non-empty subset of the four entries by 1e-6
                let base = uniform_points(&mut r, n, 1, -1.0, 1.0).pop().unwrap();
                let mask = r.random_range(1..16u32);
                let mut pts = Vec::new();
                for bit in 0..4 {
                    if mask & (1 << bit) != 0 {
                        pts.push(&base + unit(&mut r, n) * 1e-6);
                    } else {
                        pts.push(base.clone());
                    }
                }
                Quadruple::new(pts[0].clone(), pts[1].clone(), pts[2].clone(), pts[3].clone()).unwrap()
            };
            if q.is_fully_degenerate() {
                continue;
            }
            let phi = form_matrix(&cost, &q, &cfg).unwrap().phi;
            smallest = smallest.min(phi);
            if !(phi > 0.0) {
                nonpositive += 1;
            }
        }
        let x = DVector::from_vec(vec![0.3, -0.7]);
        let q = Quadruple::new(x.clone(), x.clone(), x.clone(), x).unwrap();
        let f = form_matrix(&cost, &q, &cfg).unwrap();
        // |w|^{p-2} is identically 1 for p = 2
        let expected = if p == 2.0 { 1.0 } else { 0.0 };
        degenerate_ok &= f.phi == expected;
    }
    verdict(
        3,
        "Phi vanishing characterization",
        nonpositive == 0 && degenerate_ok,
        format!(
            "4000 quadruples, {nonpositive} with Phi <= 0 (smallest {smallest:.3e}); fully degenerate Phi exact: {degenerate_ok}"
        ),
    );
}

#[test]
fn criterion_04_delta_bound() {
    let mut violations = 0;
    let mut worst_excess = f64::NEG_INFINITY;
    let mut r = rng(400);
    for ratio in [1.0f64, 3.0, 10.0] {
        for _ in 0..10_000 {
            let c: f64 = if ratio == 1.0 {
                1.0
            } else {
                (1.0 / ratio) * (ratio * ratio).powf(r.random::<f64>())
            };
            let b = r.random_range(-1.0..=1.0) * c.sqrt();
            let s = (1.0 - r.random::<f64>()) / (2.0 * c.sqrt());
            let params = AngleParams::new(b, c, 1.0, ratio).unwrap();
            let d = delta_gap(s, &params).unwrap();
            let bound = 2.0 * (c - b * b) * s * s;
            worst_excess = worst_excess.max(d - bound);
            if d < -1e-12 || d > bound + 1e-12 {
                violations += 1;
            }
        }
    }
    verdict(
        4,
        "Delta(s) bound",
        violations == 0,
        format!("30000 samples over ratios 1, 3, 10, {violations} violations, worst excess {worst_excess:.2e}"),
    );
}

#[test]
fn criterion_05_f_linear_bound() {
    let cfg = QuadratureConfig::with_order(16);
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for n in [2, 3] {
        let cost = CostSpec::power(n, 4.0).unwrap();
        let ratio = ellipticity_bounds(&cost, 1000, DEFAULT_MARGIN, 0).unwrap().ratio();
        let delta0 = admissible_delta0(ratio);
        let k = f_constant(ratio);
        let mut r = rng(500 + n as u64);
        for _ in 0..1000 {
            let q = random_quad(&mut r, n);
            let x0 = uniform_points(&mut r, n, 1, -1.0, 1.0).pop().unwrap();
            let e = unit(&mut r, n) * r.random_range(0.2..2.0);
            let e_hat = e.normalize();
            let z = orthogonal_unit(&mut r, &e_hat);
            let delta = delta0 * (1.0 - r.random::<f64>());
            let t = r.random_range(0.01..1.0);
            let x = &x0 + (&e_hat * delta.cos() + &z * delta.sin()) * t;
            let fa = f_angle(&cost, &x0, &x, &e, &q, &cfg).unwrap();
            count += 1;
            worst = worst.max(fa.f / fa.delta);
            if fa.f > k * fa.delta + 1e-9 {
                violations += 1;
            }
        }
    }
    verdict(
        5,
        "F(delta) linear bound",
        violations == 0,
        format!("{count} configurations, {violations} violations, worst F/delta {worst:.3} against 4 sqrt(3) = {:.3}", f_constant(3.0)),
    );
}

fn random_rotation(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    g.qr().q()
}

#[test]
fn criterion_06_g_lower_bound() {
    let mut violations = 0;
    let mut worst_margin = f64::INFINITY;
    let mut r = rng(600);
    for trial in 0..1000 {
        let n = 2 + trial % 2;
        let lambda = r.random_range(0.5..2.0);
        let ratio = r.random_range(1.0..10.0);
        let big_lambda = lambda * ratio;
        let mut spectrum: Vec<f64> = (0..n).map(|_| r.random_range(lambda..=big_lambda)).collect();
        spectrum[0] = lambda;
        spectrum[n - 1] = big_lambda;
        let q = random_rotation(&mut r, n);
        let root = &q * DMatrix::from_diagonal(&DVector::from_iterator(n, spectrum.iter().map(|v| v.sqrt()))) * q.transpose();
        let e = unit(&mut r, n);
        let z = orthogonal_unit(&mut r, &e);
        let theta1 = admissible_theta1(ratio);
        let theta = PI - theta1 * (1.0 - r.random::<f64>());
        let u = &e * theta.cos() + &z * theta.sin();
        let measured = angle(&(&root * &u), &(&root * &e));
        let bound = g_lower_bound(theta, lambda, big_lambda).unwrap();
        worst_margin = worst_margin.min(measured - bound);
        if measured < bound - 1e-9 {
            violations += 1;
        }
    }
    verdict(
        6,
        "G(theta) lower bound",
        violations == 0,
        format!("1000 trials, {violations} violations, smallest margin {worst_margin:.3e}"),
    );
}

/// Contact multimap of an optimal assignment, re-tuned so that `x0` has the
/// two values `y1`, `y2`, with extra targets just inside the ball around `y1`.
struct Seeded {
    map: MultiMap,
    setup: ExclusionSetup,
}

fn seeded_graph(cost: &CostSpec, ratio: f64, m: usize, seed: u64) -> Seeded {
    let n = cost.dim();
    let mut r = rng(seed);
    let sources = uniform_points(&mut r, n, m, -1.0, 1.0);
    let mut targets = uniform_points(&mut r, n, m, -1.0, 1.0);
    let a = solve_assignment(cost, &sources, &targets).unwrap();
    let mut phi_c = c_potentials(cost, &a).phi_c;

    let mut domain = node_grid(n, 21, -1.0, 1.0);
    let x0 = domain[r.random_range(0..domain.len())].clone();
    let vals: Vec<f64> = targets.iter().zip(&phi_c).map(|(t, pc)| cost.cost(&x0, t) - pc).collect();
    let (j1, level) = vals
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (j, v)| if v < best.1 { (j, v) } else { best });
    let mut j2 = r.random_range(0..m);
    while j2 == j1 {
        j2 = r.random_range(0..m);
    }
    phi_c[j1] = cost.cost(&x0, &targets[j1]) - level;
    phi_c[j2] = cost.cost(&x0, &targets[j2]) - level;
    let (y1, y2) = (targets[j1].clone(), targets[j2].clone());
    let setup = ExclusionSetup::new(x0.clone(), y1.clone(), y2.clone(), ratio).unwrap();

    for _ in 0..4 {
        let y = &y1 + unit(&mut r, n) * (0.5 * setup.ball_radius * r.random::<f64>());
        phi_c.push(cost.cost(&x0, &y) - level - 1e-6);
        targets.push(y);
    }

    let e = (&y2 - &y1).normalize();
    for &t in &[1e-4, 1e-3, 1e-2, 0.05, 0.1, 0.3] {
        // the cone (axis plus rotations up to delta0) and the opposite ray
        domain.push(&x0 + &e * t);
        domain.push(&x0 - &e * t);
        for _ in 0..4 {
            let z = orthogonal_unit(&mut r, &e);
            let d = setup.delta0 * r.random::<f64>();
            domain.push(&x0 + (&e * d.cos() + &z * d.sin()) * t);
        }
    }
    let tol = tie_tolerance_for(cost, &[&sources, &targets, &domain]);
    let map = contact_multimap(cost, &targets, &phi_c, &domain, tol).unwrap();
    Seeded { map, setup }
}

#[test]
fn criterion_07_cone_exclusion() {
    let cost = CostSpec::power(2, 4.0).unwrap();
    let ratio = ellipticity_bounds(&cost, 1000, DEFAULT_MARGIN, 0).unwrap().ratio();
    let mut hits = 0;
    let mut cone_points = 0;
    let mut ball_values = 0;
    let mut seeded_ok = true;
    let mut monotone_ok = true;
    for trial in 0..50u64 {
        let m = 8 + (trial as usize * 7) % 57;
        let s = seeded_graph(&cost, ratio, m, 700 + trial);
        let at_x0 = s.map.get(&s.setup.x0).unwrap();
        seeded_ok &= at_x0.contains(&s.setup.y1) && at_x0.contains(&s.setup.y2);
        monotone_ok &= check_h_monotone(&cost, &s.map, default_tolerance(&cost, &s.map)).unwrap().passed();
        let rep = cone_exclusion(&s.map, &s.setup);
        hits += rep.hits.len();
        cone_points += rep.cone_points;
        ball_values += rep.ball_values;
    }
    verdict(
        7,
        "cone exclusion",
        hits == 0 && seeded_ok && monotone_ok,
        format!(
            "50 graphs, {cone_points} cone points, {ball_values} ball values elsewhere, {hits} hits; seeds two-valued: {seeded_ok}, graphs monotone: {monotone_ok}"
        ),
    );
}

#[test]
fn criterion_08_cyclic_monotonicity() {
    let start = Instant::now();
    let mut violations = 0;
    let mut checked = 0u64;
    let mut r = rng(800);
    for trial in 0..100 {
        let m = 2 + trial % 6;
        let p = if trial % 2 == 0 { 2.0 } else { 4.0 };
        let n = 1 + (trial / 2) % 2;
        let cost = CostSpec::power(n, p).unwrap();
        let sources = uniform_points(&mut r, n, m, -1.0, 1.0);
        let targets = uniform_points(&mut r, n, m, -1.0, 1.0);
        let map = solve_assignment(&cost, &sources, &targets).unwrap().as_multimap();
        let rep = check_cyclic(&cost, &map, m, default_tolerance(&cost, &map), trial as u64).unwrap();
        checked += rep.checked_count;
        violations += rep.violation_count;
    }
    // three points rotated by 80 degrees: pairwise monotone, not 3-cyclically
    let cost = CostSpec::power(2, 2.0).unwrap();
    let rot = |v: &DVector<f64>, a: f64| DVector::from_vec(vec![a.cos() * v[0] - a.sin() * v[1], a.sin() * v[0] + a.cos() * v[1]]);
    let e1 = DVector::from_vec(vec![1.0, 0.0]);
    let xs: Vec<DVector<f64>> = (0..3).map(|i| rot(&e1, 2.0 * PI * i as f64 / 3.0)).collect();
    let bad = MultiMap::from_pairs(2, xs.iter().map(|x| (x.clone(), rot(x, 80f64.to_radians())))).unwrap();
    let pairwise = check_h_monotone(&cost, &bad, 1e-12).unwrap();
    let cyclic = check_cyclic(&cost, &bad, 3, 1e-12, 0).unwrap();
    let flagged = pairwise.passed() && !cyclic.passed() && cyclic.witnesses.iter().any(|w| w.points.len() == 3);
    let secs = start.elapsed().as_secs_f64();
    verdict(
        8,
        "cyclic monotonicity oracle",
        violations == 0 && flagged && secs < 60.0,
        format!(
            "100 assignments, {checked} cycles checked, {violations} violations; 3-cycle counterexample flagged: {flagged}, worst gap {:.4}, {secs:.1} s",
            cyclic.worst_gap
        ),
    );
}

/// Charts at every pair of an OT plan restricted to `|x - y| >= 0.5`.
fn ot_charts(n: usize, seed: u64) -> (MonotoneSet, Vec<Chart>) {
    let cost = CostSpec::power(n, 4.0).unwrap();
    let (sources, targets) = hmono::transport::random_instance(n, 40, seed);
    let a = solve_assignment(&cost, &sources, &targets).unwrap();
    let pairs: Vec<_> = a
        .sources
        .iter()
        .zip(&a.perm)
        .map(|(x, &j)| (x.clone(), a.targets[j].clone()))
        .filter(|(x, y)| (x - y).norm() >= 0.5)
        .collect();
    let set = MonotoneSet::with_cost(&cost, pairs, 1e-9).unwrap();
    let opts = ChartOptions::default();
    let charts = (0..set.len()).map(|i| build_chart(&cost, &set, i, 1.0, &opts).unwrap()).collect();
    (set, charts)
}

fn lipschitz_excess(set: &MonotoneSet, chart: &Chart) -> f64 {
    let uv: Vec<_> = chart.indices.iter().map(|&i| cayley(&chart.a0, &set.pairs()[i].0, &set.pairs()[i].1)).collect();
    let mut worst = f64::NEG_INFINITY;
    for i in 0..uv.len() {
        for j in i + 1..uv.len() {
            let du = (&uv[i].0 - &uv[j].0).norm();
            let dv = (&uv[i].1 - &uv[j].1).norm();
            worst = worst.max(dv - chart.lip * du);
        }
    }
    worst
}

fn estimate_excess(set: &MonotoneSet, chart: &Chart) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for &i in &chart.indices {
        for &j in &chart.indices {
            if i == j {
                continue;
            }
            let (x, y) = &set.pairs()[i];
            let (xp, yp) = &set.pairs()[j];
            let lhs = (&chart.a0 * (xp - x)).dot(&(y - yp));
            worst = worst.max(lhs - chart.epsilon * (x - xp).norm() * (y - yp).norm());
        }
    }
    worst
}

#[test]
fn criterion_09_rectifiability_chart() {
    let mut ok = true;
    let mut charts_built = 0;
    let mut worst_product: f64 = 0.0;
    let mut worst_lip = f64::NEG_INFINITY;
    let mut restricted = 0;
    for n in [1, 2] {
        for seed in 0..3 {
            let (set, charts) = ot_charts(n, 900 + 10 * n as u64 + seed);
            for chart in &charts {
                charts_built += 1;
                restricted += chart.indices.len();
                let product = chart.epsilon * chart.a0_inv_norm;
                worst_product = worst_product.max(product);
                let excess = lipschitz_excess(&set, chart);
                worst_lip = worst_lip.max(excess);
                ok &= product <= 0.5 && excess <= 1e-9;
            }
        }
    }
    // p = 2 on arbitrary monotone sets: y = S x with S positive semidefinite
    let mut lip_one = true;
    let cost = CostSpec::power(2, 2.0).unwrap();
    let mut r = rng(950);
    for _ in 0..5 {
        let g = DMatrix::from_fn(2, 2, |_, _| r.random_range(-1.0..1.0));
        let s = &g * g.transpose();
        let xs = uniform_points(&mut r, 2, 30, -1.0, 1.0);
        let set = MonotoneSet::with_cost(&cost, xs.iter().map(|x| (x.clone(), &s * x)).collect(), 1e-12).unwrap();
        let chart = build_chart(&cost, &set, 0, 10.0, &ChartOptions::default()).unwrap();
        lip_one &= chart.lip == 1.0 && chart.indices.len() == 30 && lipschitz_excess(&set, &chart) <= 1e-9;
    }
    verdict(
        9,
        "rectifiability chart",
        ok && lip_one,
        format!(
            "{charts_built} charts (p=4, n=1,2, {restricted} restricted pairs), worst eps|A0^-1| {worst_product:.3}, worst |dv| - lip|du| {worst_lip:.2e}; p=2 lip = 1: {lip_one}"
        ),
    );
}

#[test]
fn criterion_10_intermediate_estimate() {
    let mut worst = f64::NEG_INFINITY;
    let mut charts_built = 0;
    for n in [1, 2] {
        for seed in 0..3 {
            let (set, charts) = ot_charts(n, 900 + 10 * n as u64 + seed);
            for chart in &charts {
                charts_built += 1;
                worst = worst.max(estimate_excess(&set, chart));
            }
        }
    }
    verdict(
        10,
        "intermediate rectifier estimate",
        worst <= 1e-9,
        format!("{charts_built} charts, worst A0(x'-x).(y-y') - eps|x-x'||y-y'| = {worst:.3e}"),
    );
}

#[test]
fn criterion_11_single_valuedness_trend() {
    let mut ok = true;
    let mut lines = Vec::new();
    for n in [1, 2] {
        let (sources, targets): (Vec<DVector<f64>>, Vec<DVector<f64>>) = if n == 1 {
            (
                vec![DVector::from_vec(vec![-0.5]), DVector::from_vec(vec![0.5])],
                vec![DVector::from_vec(vec![-1.0]), DVector::from_vec(vec![1.0])],
            )
        } else {
            let axes = [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]];
            (
                axes.iter().map(|a| DVector::from_vec(vec![0.5 * a[0], 0.5 * a[1]])).collect(),
                axes.iter().map(|a| DVector::from_vec(a.to_vec())).collect(),
            )
        };
        let target = Grid::cube(n, -2.0, 2.0, if n == 1 { 2 } else { 4 }).unwrap();
        let parts: Vec<CellSet> = (0..target.cell_count()).map(|c| CellSet::from([c])).collect();
        for p in [2.0, 4.0] {
            let cost = CostSpec::power(n, p).unwrap();
            let mut fractions = Vec::new();
            let mut defects = Vec::new();
            for m in [8usize, 16, 32] {
                let grid = node_grid(n, m + 1, -1.0, 1.0);
                let map = c_potential_multimap(&cost, &sources, &targets, &grid).unwrap();
                fractions.push(map.multivalued_fraction(0.1));
                let h = 2.0 / m as f64;
                let source = Grid::cube(n, -1.0 - 0.5 * h, 1.0 + 0.5 * h, m + 1).unwrap();
                let f = GridMeasure::uniform(source.clone(), 1.0).unwrap();
                let cells = CellMap::rasterize(&map, source, target.clone()).unwrap();
                defects.push(additivity_defect(&cells, &f, &parts).unwrap().abs());
            }
            let equal_steps = fractions.windows(2).filter(|w| w[1] == w[0]).count();
            let frac_ok = fractions.windows(2).all(|w| w[1] <= w[0]) && equal_steps <= 1;
            let defect_ok = defects.windows(2).all(|w| w[1] <= w[0]);
            ok &= frac_ok && defect_ok;
            lines.push(format!("n={n} p={p}: fractions {fractions:.4?}, |defect| {defects:.4?}"));
        }
    }
    verdict(11, "single-valuedness trend", ok, lines.join("; "));
}

#[test]
fn criterion_12_pushforward_additivity() {
    let source = Grid::cube(2, 0.0, 1.0, 8).unwrap();
    let target = Grid::cube(2, 0.0, 1.0, 4).unwrap();
    let mut r = rng(1200);
    let density: Vec<f64> = (0..source.cell_count()).map(|_| r.random_range(0..8) as f64 * 0.25).collect();
    let f = GridMeasure::new(source.clone(), density).unwrap();
    let mut nonzero = 0;
    for _ in 0..20 {
        let images: Vec<CellSet> = (0..source.cell_count())
            .map(|_| CellSet::from([r.random_range(0..target.cell_count())]))
            .collect();
        let t = CellMap::from_images(source.clone(), target.clone(), images).unwrap();
        let k = r.random_range(1..=5);
        let mut parts = vec![CellSet::new(); k];
        for cell in 0..target.cell_count() {
            // some target cells are left out of every part
            let slot = r.random_range(0..=k);
            if slot < k {
                parts[slot].insert(cell);
            }
        }
        if additivity_defect(&t, &f, &parts).unwrap() != 0.0 {
            nonzero += 1;
        }
    }
    // one source cell of density 0.75 sent to two target cells
    let mut images: Vec<CellSet> = (0..source.cell_count()).map(|c| CellSet::from([c % target.cell_count()])).collect();
    let overlap_cell = 9;
    images[overlap_cell] = CellSet::from([2, 7]);
    let mut density = vec![0.25; source.cell_count()];
    density[overlap_cell] = 0.75;
    let g = GridMeasure::new(source.clone(), density).unwrap();
    let t = CellMap::from_images(source.clone(), target, images).unwrap();
    let defect = additivity_defect(&t, &g, &[CellSet::from([2]), CellSet::from([7])]).unwrap();
    let expected = -0.75 * source.cell_volume();
    verdict(
        12,
        "push-forward additivity",
        nonzero == 0 && defect == expected,
        format!("20 random partitions, {nonzero} nonzero defects; overlap defect {defect} (expected {expected})"),
    );
}

#[test]
fn criterion_13_cone_density_ratio() {
    let ratio = 3.0;
    let delta0 = admissible_delta0(ratio);
    let cone = ConeSpec::new(DVector::zeros(2), DVector::from_vec(vec![1.0, 0.0]), delta0).unwrap();
    let region = Complement(cone);
    let expected = 1.0 - delta0 / PI;
    let radii = [0.1, 1.0, 5.0];
    let est = density_ratio(&region, &DVector::zeros(2), &radii, &DensityOptions::default()).unwrap();
    let ok = est
        .iter()
        .all(|d| d.samples >= 100_000 && (d.ratio - expected).abs() <= 3.0 * d.std_error);
    let detail = est
        .iter()
        .map(|d| format!("r={}: {:.6} +- {:.1e} ({} samples)", d.radius, d.ratio, d.std_error, d.samples))
        .collect::<Vec<_>>()
        .join(", ");
    verdict(13, "cone density ratio", ok, format!("expected {expected:.6}; {detail}"));
}
