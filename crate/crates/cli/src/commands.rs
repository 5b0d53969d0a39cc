//! Subcommand implementations. CSV reports go to `--out` or stdout; the
//! human-readable summary goes to stderr.

use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use hmono::angles::{admissible_delta0, distorted_angle, f_angle, f_constant, SQRT_FLOOR};
use hmono::cost::{check_homogeneity, ellipticity_bounds, CostSpec, EllipticityBounds, DEFAULT_MARGIN};
use hmono::form::{form_matrix, monotone_pair_gap, sandwich_from};
use hmono::linalg::spd_sqrt;
use hmono::map::{check_cyclic, check_h_monotone, check_inverse_monotone, default_tolerance, ViolationReport};
use hmono::measure::{additivity_defect, pushforward, CellMap, CellSet, Grid};
use hmono::rectify::{build_chart, ChartOptions, MonotoneSet};
use hmono::transport::{c_potential_multimap, node_grid, solve_assignment, uniform_points};
use hmono::{DVector, Error};
use rand::RngCore;
use rand_chacha::ChaCha8Rng;

use crate::config::{parse_list, RunConfig};
use crate::io::{fmt, fmt_all, read_density, read_map, read_pairs, read_quadruples, write_map, writer};
use crate::CliError;

const ELLIPTICITY_SAMPLES: usize = 1000;

fn bounds(cost: &CostSpec, samples: usize, rng: &mut ChaCha8Rng) -> Result<EllipticityBounds, CliError> {
    ellipticity_bounds(cost, samples, DEFAULT_MARGIN, rng.next_u64() % 1_000_000).map_err(|e| match e {
        Error::NotElliptic { .. } => CliError::Check(e.to_string()),
        other => other.into(),
    })
}

fn check_dim(cost: &CostSpec, n: usize, what: &str) -> Result<(), CliError> {
    if n != cost.dim() {
        return Err(CliError::Input(format!(
            "{what} has dimension {n} but the cost has dimension {}",
            cost.dim()
        )));
    }
    Ok(())
}

pub fn validate_cost(cfg: &RunConfig, rng: &mut ChaCha8Rng, samples: usize, out: Option<&Path>) -> Result<(), CliError> {
    let cost = cfg.cost.build()?;
    let b = bounds(&cost, samples, rng)?;
    let hom = check_homogeneity(&cost, 200, cfg.tol.unwrap_or(1e-10), rng.next_u64() % 1_000_000);
    let even = cost.is_even(64, 1e-10).is_ok();
    let mut w = writer(out)?;
    w.write_record(["quantity", "value"])?;
    let rows: [(&str, String); 10] = [
        ("kind", format!("{:?}", cfg.cost.kind).to_lowercase()),
        ("p", fmt(cost.degree())),
        ("dim", cost.dim().to_string()),
        ("lambda", fmt(b.lambda)),
        ("Lambda", fmt(b.big_lambda)),
        ("ratio", fmt(b.ratio())),
        ("method", format!("{:?}", b.method)),
        ("homogeneity_worst", fmt(hom.worst_violation)),
        ("homogeneity_violations", hom.violations.len().to_string()),
        ("even", even.to_string()),
    ];
    for (k, v) in rows {
        w.write_record([k, v.as_str()])?;
    }
    w.flush()?;
    eprintln!(
        "cost: lambda = {}, Lambda = {} ({:?}); homogeneity {} over {} trials",
        b.lambda,
        b.big_lambda,
        b.method,
        if hom.passed() { "ok" } else { "VIOLATED" },
        hom.trials
    );
    if !hom.passed() {
        return Err(CliError::Check(format!(
            "{} homogeneity violation(s), worst {:e}",
            hom.violations.len(),
            hom.worst_violation
        )));
    }
    Ok(())
}

pub fn form(cfg: &RunConfig, rng: &mut ChaCha8Rng, path: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let cost = cfg.cost.build()?;
    let quads = read_quadruples(path)?;
    for q in &quads {
        check_dim(&cost, q.dim(), "quadruple")?;
    }
    let b = bounds(&cost, ELLIPTICITY_SAMPLES, rng)?;
    let tol = cfg.tol.unwrap_or(0.0);
    let mut w = writer(out)?;
    w.write_record(["row", "n", "phi", "est_error", "pair_gap", "form_gap", "status", "a (row-major)"])?;
    let mut failures = Vec::new();
    for (row, q) in quads.iter().enumerate() {
        let f = form_matrix(&cost, q, &cfg.quad)?;
        let pair_gap = monotone_pair_gap(&cost, q);
        let gap = f.gap(q);
        let dx = (&q.x - &q.y).norm();
        let dxi = (&q.xi - &q.zeta).norm();
        let agree = (pair_gap - gap).abs() <= f.est_error * dx * dxi + tol;
        let v = if dx > 0.0 {
            &q.x - &q.y
        } else if dxi > 0.0 {
            &q.xi - &q.zeta
        } else {
            let mut e = DVector::zeros(q.dim());
            e[0] = 1.0;
            e
        };
        let sandwich = sandwich_from(&f, &b, &v, tol);
        let ok = agree && sandwich.passed();
        if !ok {
            failures.push(row);
        }
        let mut rec = vec![
            row.to_string(),
            q.dim().to_string(),
            fmt(f.phi),
            fmt(f.est_error),
            fmt(pair_gap),
            fmt(gap),
            if ok { "pass" } else { "fail" }.to_string(),
        ];
        rec.extend(fmt_all(f.a.transpose().iter()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    eprintln!("form: {} quadruple(s), {} failure(s)", quads.len(), failures.len());
    if !failures.is_empty() {
        return Err(CliError::Check(format!("sandwich or gap agreement failed on rows {failures:?}")));
    }
    Ok(())
}

fn write_violations(w: &mut csv::Writer<Box<dyn std::io::Write>>, kind: &str, r: &ViolationReport) -> Result<(), CliError> {
    let join = |v: &[usize]| v.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(";");
    for wit in &r.witnesses {
        w.write_record([kind, &fmt(wit.gap), &join(&wit.points), &join(&wit.permutation)])?;
    }
    Ok(())
}

fn summarize(kind: &str, r: &ViolationReport) {
    eprintln!(
        "{kind}: checked {}, violations {}, worst gap {}, coverage {}",
        r.checked_count, r.violation_count, r.worst_gap, r.coverage
    );
}

pub fn check(
    cfg: &RunConfig,
    rng: &mut ChaCha8Rng,
    path: &Path,
    max_cycle: Option<usize>,
    inverse: bool,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let cost = cfg.cost.build()?;
    let map = read_map(path)?;
    check_dim(&cost, map.dim(), "map")?;
    let tol = cfg.tol.unwrap_or_else(|| default_tolerance(&cost, &map));
    let max_cycle = match max_cycle {
        Some(k) => Some(k),
        None => cfg.get::<usize>("check.max_cycle")?,
    };
    let mut reports = vec![("pairwise", check_h_monotone(&cost, &map, tol)?)];
    if let Some(k) = max_cycle {
        reports.push(("cyclic", check_cyclic(&cost, &map, k, tol, rng.next_u64())?));
    }
    if inverse {
        reports.push(("inverse", check_inverse_monotone(&cost, &map, tol)?));
    }
    let mut w = writer(out)?;
    w.write_record(["kind", "gap", "points", "permutation"])?;
    for (kind, r) in &reports {
        write_violations(&mut w, kind, r)?;
    }
    w.flush()?;
    eprintln!("map: {} domain point(s), {} graph point(s), tol {tol:e}", map.domain_len(), map.graph_len());
    for (kind, r) in &reports {
        summarize(kind, r);
    }
    let total: u64 = reports.iter().map(|(_, r)| r.violation_count).sum();
    if total > 0 {
        return Err(CliError::Check(format!("{total} monotonicity violation(s)")));
    }
    Ok(())
}

pub fn generate(
    cfg: &RunConfig,
    rng: &mut ChaCha8Rng,
    m: usize,
    grid: Option<usize>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let cost = cfg.cost.build()?;
    let n = cost.dim();
    let sources = uniform_points(rng, n, m, -1.0, 1.0);
    let targets = uniform_points(rng, n, m, -1.0, 1.0);
    let a = solve_assignment(&cost, &sources, &targets)?;
    let map = match grid {
        Some(g) => {
            if g == 0 {
                return Err(CliError::Input("--grid needs at least one node per axis".into()));
            }
            c_potential_multimap(&cost, &sources, &targets, &node_grid(n, g, -1.0, 1.0))?
        }
        None => a.as_multimap(),
    };
    write_map(out, &map)?;
    eprintln!(
        "generated m = {m}, n = {n}, p = {}: total cost {} ({:?}); {} graph point(s)",
        cost.degree(),
        a.total_cost,
        a.method,
        map.graph_len()
    );
    Ok(())
}

pub fn angles(
    cfg: &RunConfig,
    rng: &mut ChaCha8Rng,
    path: &Path,
    axis: Option<&str>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let cost = cfg.cost.build()?;
    let quads = read_quadruples(path)?;
    let n = cost.dim();
    for q in &quads {
        check_dim(&cost, q.dim(), "quadruple")?;
    }
    let axis = match axis {
        Some(s) => Some(parse_list("--axis", s)?),
        None => cfg.get_list("angles.axis")?,
    };
    let e = match axis {
        Some(v) => {
            if v.len() != n {
                return Err(CliError::Input(format!("axis has {} entries, expected {n}", v.len())));
            }
            DVector::from_vec(v)
        }
        None => {
            let mut e = DVector::zeros(n);
            e[0] = 1.0;
            e
        }
    };
    let b = bounds(&cost, ELLIPTICITY_SAMPLES, rng)?;
    let ratio = b.ratio();
    let delta0 = admissible_delta0(ratio);
    let k = f_constant(ratio);
    let mut w = writer(out)?;
    w.write_record(["row", "delta", "F", "bound", "in_window", "monotone_angle", "status"])?;
    let mut failures = Vec::new();
    // rows read (x, x0, xi, y2)
    for (row, q) in quads.iter().enumerate() {
        let fa = f_angle(&cost, &q.y, &q.x, &e, q, &cfg.quad)?;
        let bound = k * fa.delta;
        let in_window = fa.delta <= delta0;
        let root = spd_sqrt(&fa.a, SQRT_FLOOR);
        let mono = distorted_angle(&root, &(&q.x - &q.y), &(&q.xi - &q.zeta));
        let monotone_ok = monotone_pair_gap(&cost, q) < 0.0 || mono.is_nan() || mono <= FRAC_PI_2 + 1e-10;
        let f_ok = !in_window || fa.f <= bound + 1e-9;
        let status = if !(f_ok && monotone_ok) {
            failures.push(row);
            "fail"
        } else if in_window {
            "pass"
        } else {
            "outside"
        };
        w.write_record([
            row.to_string(),
            fmt(fa.delta),
            fmt(fa.f),
            fmt(bound),
            in_window.to_string(),
            fmt(mono),
            status.to_string(),
        ])?;
    }
    w.flush()?;
    eprintln!(
        "angles: Lambda/lambda = {ratio}, delta0 = {delta0}, K = {k}; {} row(s), {} failure(s)",
        quads.len(),
        failures.len()
    );
    if !failures.is_empty() {
        return Err(CliError::Check(format!("angle estimate failed on rows {failures:?}")));
    }
    Ok(())
}

pub fn rectify(
    cfg: &RunConfig,
    path: &Path,
    base_index: usize,
    radius: f64,
    auto_shrink: bool,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let cost = cfg.cost.build()?;
    let (n, pairs) = read_pairs(path)?;
    check_dim(&cost, n, "pair set")?;
    let set = MonotoneSet::new(n, pairs)?;
    let opts = ChartOptions {
        auto_shrink,
        tol: cfg.tol.unwrap_or(1e-9),
        ..ChartOptions::default()
    };
    let chart = build_chart(&cost, &set, base_index, radius, &opts).map_err(|e| match e {
        Error::EpsilonTooLarge { .. } | Error::UnderResolved { .. } | Error::EstimateViolation { .. } => {
            CliError::Check(e.to_string())
        }
        Error::LipschitzViolation { ref witnesses, .. } => {
            CliError::Check(format!("{e}; witness pairs {witnesses:?}"))
        }
        other => other.into(),
    })?;
    let mut w = writer(out)?;
    let mut header = vec!["index".to_string()];
    header.extend((1..=n).map(|i| format!("u{i}")));
    header.extend((1..=n).map(|i| format!("v{i}")));
    w.write_record(&header)?;
    for (idx, (u, v)) in chart.indices.iter().zip(&chart.graph) {
        let mut rec = vec![idx.to_string()];
        rec.extend(fmt_all(u.iter().chain(v.iter())));
        w.write_record(&rec)?;
    }
    w.flush()?;
    eprintln!(
        "chart at {}: radius {}, eps {}, |A0^-1| {}, lip {}, {} pair(s), max |dv|/|du| {}, cayley singular values [{}, {}]",
        chart.base_index,
        chart.radius,
        chart.epsilon,
        chart.a0_inv_norm,
        chart.lip,
        chart.indices.len(),
        chart.max_ratio,
        chart.cayley_singular_values.0,
        chart.cayley_singular_values.1
    );
    Ok(())
}

pub fn measure(
    cfg: &RunConfig,
    map_path: &Path,
    density_path: &Path,
    target_res: Option<usize>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let map = read_map(map_path)?;
    let f = read_density(density_path)?;
    let source = f.grid().clone();
    if source.dim() != map.dim() {
        return Err(CliError::Input(format!(
            "density grid has dimension {} but the map has dimension {}",
            source.dim(),
            map.dim()
        )));
    }
    let n = map.dim();
    let target = match (cfg.get_list("measure.target_min")?, cfg.get_list("measure.target_max")?) {
        (Some(lo), Some(hi)) => {
            let res = match target_res {
                Some(r) => vec![r; n],
                None => match cfg.get_list("measure.target_res")? {
                    Some(r) => r.iter().map(|&x| x as usize).collect(),
                    None => source.resolution().to_vec(),
                },
            };
            Grid::new(lo, hi, res)?
        }
        _ => {
            // bounding box of the values, widened so every value is inside
            // the half-open cells
            let mut lo = vec![f64::INFINITY; n];
            let mut hi = vec![f64::NEG_INFINITY; n];
            for e in map.entries() {
                for v in &e.values {
                    for i in 0..n {
                        lo[i] = lo[i].min(v[i]);
                        hi[i] = hi[i].max(v[i]);
                    }
                }
            }
            for i in 0..n {
                let pad = 1e-9 * (1.0 + lo[i].abs().max(hi[i].abs())) + 1e-9 * (hi[i] - lo[i]);
                lo[i] -= pad;
                hi[i] += pad;
            }
            let res = target_res.map_or_else(|| source.resolution().to_vec(), |r| vec![r; n]);
            Grid::new(lo, hi, res)?
        }
    };
    let cells = CellMap::rasterize(&map, source, target)?;
    let all: CellSet = (0..cells.target().cell_count()).collect();
    let parts: Vec<CellSet> = all.iter().map(|&c| CellSet::from([c])).collect();
    let mu_all = pushforward(&cells, &f, &all)?;
    let defect = additivity_defect(&cells, &f, &parts)?;
    let multivalued = cells.images().iter().filter(|img| img.len() > 1).count();
    let mut w = writer(out)?;
    w.write_record(["quantity", "value"])?;
    let rows: [(&str, String); 6] = [
        ("total_mass", fmt(f.total_mass())),
        ("mu_target_box", fmt(mu_all)),
        ("additivity_defect", fmt(defect)),
        ("multivalued_cells", multivalued.to_string()),
        ("source_cells", cells.source().cell_count().to_string()),
        ("dropped_points", cells.dropped.to_string()),
    ];
    for (k, v) in rows {
        w.write_record([k, v.as_str()])?;
    }
    w.flush()?;
    eprintln!(
        "measure (empirical): mu(target box) = {mu_all}, additivity defect over {} singleton cells = {defect}, {multivalued} multivalued source cell(s)",
        parts.len()
    );
    Ok(())
}
