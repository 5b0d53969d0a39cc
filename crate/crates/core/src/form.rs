//! The averaged-Hessian bilinear form.
//!
//! For a quadruple `(x, y, xi, zeta)` the path
//! `w(s, t) = y - zeta + s (zeta - xi) + t (x - y)` sweeps a parallelogram
//! and
//!
//! ```text
//! A   = int_0^1 int_0^1 D^2h(w(s, t)) dt ds
//! Phi = int_0^1 int_0^1 |w(s, t)|^{p-2} dt ds
//! ```
//!
//! Monotonicity of a pair of graph points is equivalent to
//! `<A (x - y), xi - zeta> >= 0`, and ellipticity of `D^2h` on the sphere
//! sandwiches `A` between `lambda Phi I` and `Lambda Phi I`.
//!
//! Both integrals are evaluated with tensor Gauss-Legendre rules on `(0,1)^2`.
//! The error estimate compares the working order against a lower order on
//! every leaf cell; when the integrand is not polynomial, cells whose
//! estimate is large (or whose nodes come within `1e-12` of a path zero) are
//! split into four, up to `max_depth` levels. In one dimension the path is
//! scalar and its sign change is a line across the cell; each cell is then
//! integrated piecewise on either side of that line.

use nalgebra::{DMatrix, DVector};
use twofloat::TwoFloat;

use crate::cost::{CostKind, CostSpec, EllipticityBounds};
use crate::linalg::max_abs;
use crate::quadrature::GaussLegendre;
use crate::{Error, Result};

/// Source points `x, y` with targets `xi` in `T(x)` and `zeta` in `T(y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Quadruple {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub xi: DVector<f64>,
    pub zeta: DVector<f64>,
}

impl Quadruple {
    pub fn new(
        x: DVector<f64>,
        y: DVector<f64>,
        xi: DVector<f64>,
        zeta: DVector<f64>,
    ) -> Result<Self> {
        let n = x.len();
        for v in [&y, &xi, &zeta] {
            if v.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: v.len(),
                });
            }
        }
        Ok(Self { x, y, xi, zeta })
    }

    /// Convenience constructor from slices.
    pub fn from_slices(x: &[f64], y: &[f64], xi: &[f64], zeta: &[f64]) -> Result<Self> {
        Self::new(
            DVector::from_column_slice(x),
            DVector::from_column_slice(y),
            DVector::from_column_slice(xi),
            DVector::from_column_slice(zeta),
        )
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// `w(s, t) = y - zeta + s (zeta - xi) + t (x - y)`.
    pub fn path(&self, s: f64, t: f64) -> DVector<f64> {
        &self.y - &self.zeta + (&self.zeta - &self.xi) * s + (&self.x - &self.y) * t
    }

    /// `(y, x; zeta, xi)`, for which `A` is unchanged.
    pub fn exchanged(&self) -> Self {
        Self {
            x: self.y.clone(),
            y: self.x.clone(),
            xi: self.zeta.clone(),
            zeta: self.xi.clone(),
        }
    }

    /// The path vanishes identically: `x = y`, `xi = zeta`, `y = zeta`.
    pub fn is_fully_degenerate(&self) -> bool {
        self.x == self.y && self.xi == self.zeta && self.y == self.zeta
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorEstimator {
    /// Compare against order `order - 1`.
    PreviousOrder,
    /// Compare against order `order / 2`.
    Halving,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureConfig {
    /// Gauss points per axis.
    pub order: usize,
    pub estimator: ErrorEstimator,
    /// Maximum subdivision depth (0 disables refinement).
    pub max_depth: usize,
    /// Refinement target relative to the magnitude of the result.
    pub refine_tol: f64,
    /// If set, an estimated error above this value is an error.
    pub max_error: Option<f64>,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            order: 16,
            estimator: ErrorEstimator::Halving,
            max_depth: 6,
            refine_tol: 1e-10,
            max_error: None,
        }
    }
}

impl QuadratureConfig {
    pub fn with_order(order: usize) -> Self {
        Self {
            order,
            ..Self::default()
        }
    }

    fn lower_order(&self) -> usize {
        match self.estimator {
            ErrorEstimator::PreviousOrder => self.order - 1,
            ErrorEstimator::Halving => (self.order / 2).max(1),
        }
    }
}

/// `A` and `Phi` for one quadruple with quadrature metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct FormResult {
    /// Symmetrised averaged Hessian.
    pub a: DMatrix<f64>,
    pub phi: f64,
    pub quad_order: usize,
    /// Error estimate for `A` in operator norm (and `Phi` scaled to match),
    /// including a floor for floating-point rounding.
    pub est_error: f64,
    /// Max-norm asymmetry of the raw quadrature output.
    pub asymmetry: f64,
    /// Number of leaf cells after refinement.
    pub cells: usize,
}

impl FormResult {
    /// `<A (x - y), xi - zeta>`.
    pub fn gap(&self, q: &Quadruple) -> f64 {
        (&self.a * (&q.x - &q.y)).dot(&(&q.xi - &q.zeta))
    }
}

/// Relative rounding floor folded into every error estimate.
const ROUNDING_FLOOR: f64 = 1e-13;

/// Nodes closer than this to a path zero force a split.
const PATH_ZERO: f64 = 1e-12;

#[derive(Clone, Copy, Debug)]
struct Cell {
    s0: f64,
    s1: f64,
    t0: f64,
    t1: f64,
    depth: usize,
}

impl Cell {
    fn area(&self) -> f64 {
        (self.s1 - self.s0) * (self.t1 - self.t0)
    }

    fn split_at(&self, s: f64, t: f64) -> [Cell; 4] {
        let d = self.depth + 1;
        [
            Cell { s0: self.s0, s1: s, t0: self.t0, t1: t, depth: d },
            Cell { s0: s, s1: self.s1, t0: self.t0, t1: t, depth: d },
            Cell { s0: self.s0, s1: s, t0: t, t1: self.t1, depth: d },
            Cell { s0: s, s1: self.s1, t0: t, t1: self.t1, depth: d },
        ]
    }
}

struct CellSums {
    a_hi: DMatrix<f64>,
    phi_hi: f64,
    a_lo: DMatrix<f64>,
    phi_lo: f64,
    min_norm: f64,
    argmin: (f64, f64),
}

struct Integrator<'a> {
    cost: &'a CostSpec,
    base: DVector<f64>,
    ds: DVector<f64>,
    dt: DVector<f64>,
    hi: GaussLegendre,
    lo: GaussLegendre,
}

impl Integrator<'_> {
    fn rule_sum(&self, rule: &GaussLegendre, cell: &Cell, track: &mut (f64, (f64, f64))) -> (DMatrix<f64>, f64) {
        let n = self.base.len();
        if n == 1 {
            return self.scalar_rule_sum(rule, cell);
        }
        let p = self.cost.degree();
        let (ls, lt) = (cell.s1 - cell.s0, cell.t1 - cell.t0);
        let mut a = DMatrix::zeros(n, n);
        let mut phi = 0.0;
        for (&us, &ws) in rule.nodes.iter().zip(&rule.weights) {
            let s = cell.s0 + ls * us;
            let ps = &self.base + &self.ds * s;
            for (&ut, &wt) in rule.nodes.iter().zip(&rule.weights) {
                let t = cell.t0 + lt * ut;
                let w = &ps + &self.dt * t;
                let r = w.norm();
                if r < track.0 {
                    *track = (r, (s, t));
                }
                let weight = ws * wt;
                a += self.cost.hessian(&w) * weight;
                phi += weight * if p == 2.0 { 1.0 } else { r.powf(p - 2.0) };
            }
        }
        let area = cell.area();
        (a * area, phi * area)
    }

    /// One-dimensional paths: `w = a + b s + c t` changes sign along a line,
    /// where `D^2h` has a kink. The cell is integrated as an iterated
    /// integral with breakpoints on that line, so each piece is smooth (and
    /// polynomial for integer `p`).
    fn scalar_rule_sum(&self, rule: &GaussLegendre, cell: &Cell) -> (DMatrix<f64>, f64) {
        let p = self.cost.degree();
        let (a, b, c) = (self.base[0], self.ds[0], self.dt[0]);
        let mut s_cuts = Vec::new();
        if b != 0.0 {
            s_cuts.push(-(a + c * cell.t0) / b);
            s_cuts.push(-(a + c * cell.t1) / b);
        }
        let mut hess = 0.0;
        let mut phi = 0.0;
        let mut w = DVector::zeros(1);
        for (sa, sb) in pieces(cell.s0, cell.s1, &mut s_cuts) {
            for (&us, &ws) in rule.nodes.iter().zip(&rule.weights) {
                let s = sa + (sb - sa) * us;
                let ws = ws * (sb - sa);
                let base = a + b * s;
                let mut t_cuts = if c != 0.0 { vec![-base / c] } else { Vec::new() };
                for (ta, tb) in pieces(cell.t0, cell.t1, &mut t_cuts) {
                    for (&ut, &wt) in rule.nodes.iter().zip(&rule.weights) {
                        w[0] = base + c * (ta + (tb - ta) * ut);
                        let weight = ws * wt * (tb - ta);
                        hess += self.cost.hessian(&w)[(0, 0)] * weight;
                        phi += weight * if p == 2.0 { 1.0 } else { w[0].abs().powf(p - 2.0) };
                    }
                }
            }
        }
        (DMatrix::from_element(1, 1, hess), phi)
    }

    fn cell(&self, cell: &Cell) -> CellSums {
        let mut track = (f64::INFINITY, (0.5, 0.5));
        let (a_hi, phi_hi) = self.rule_sum(&self.hi, cell, &mut track);
        let (a_lo, phi_lo) = self.rule_sum(&self.lo, cell, &mut track);
        CellSums {
            a_hi,
            phi_hi,
            a_lo,
            phi_lo,
            min_norm: track.0,
            argmin: track.1,
        }
    }
}

/// Subintervals of `[lo, hi]` between the cuts that fall strictly inside.
fn pieces(lo: f64, hi: f64, cuts: &mut Vec<f64>) -> Vec<(f64, f64)> {
    cuts.retain(|&x| x > lo && x < hi);
    cuts.sort_by(f64::total_cmp);
    let mut out = Vec::with_capacity(cuts.len() + 1);
    let mut start = lo;
    for &x in cuts.iter() {
        if x > start {
            out.push((start, x));
            start = x;
        }
    }
    out.push((start, hi));
    out
}

fn error_metric(n: usize, kappa: f64, c: &CellSums) -> f64 {
    n as f64 * max_abs(&(&c.a_hi - &c.a_lo)) + kappa * (c.phi_hi - c.phi_lo).abs()
}

/// Tensor Gauss-Legendre approximation of `A` and `Phi`.
pub fn form_matrix(cost: &CostSpec, q: &Quadruple, config: &QuadratureConfig) -> Result<FormResult> {
    if config.order < 2 {
        return Err(Error::InvalidArgument(format!(
            "quadrature order {} must be >= 2",
            config.order
        )));
    }
    cost.check_point(&q.x)?;
    let n = q.dim();
    for v in [&q.y, &q.xi, &q.zeta] {
        cost.check_point(v)?;
    }

    if q.is_fully_degenerate() {
        let zero = DVector::zeros(n);
        let p = cost.degree();
        return Ok(FormResult {
            a: cost.hessian(&zero),
            phi: if p == 2.0 { 1.0 } else { 0.0 },
            quad_order: config.order,
            est_error: 0.0,
            asymmetry: 0.0,
            cells: 1,
        });
    }

    let integ = Integrator {
        cost,
        base: &q.y - &q.zeta,
        ds: &q.zeta - &q.xi,
        dt: &q.x - &q.y,
        hi: GaussLegendre::new(config.order),
        lo: GaussLegendre::new(config.lower_order()),
    };
    let exact = cost.has_polynomial_hessian();

    let root = Cell { s0: 0.0, s1: 1.0, t0: 0.0, t1: 1.0, depth: 0 };
    let top = integ.cell(&root);
    let kappa = if top.phi_hi > 0.0 {
        n as f64 * max_abs(&top.a_hi) / top.phi_hi
    } else {
        0.0
    };
    let scale = n as f64 * max_abs(&top.a_hi) + kappa * top.phi_hi;
    let target = config.refine_tol * scale;

    let mut a = DMatrix::zeros(n, n);
    let mut phi = 0.0;
    let mut err_a = 0.0;
    let mut err_phi = 0.0;
    let mut leaves = 0usize;
    let mut stack = vec![(root, top)];
    while let Some((cell, sums)) = stack.pop() {
        let local = error_metric(n, kappa, &sums);
        let can_split = !exact && cell.depth < config.max_depth;
        let near_zero = sums.min_norm < PATH_ZERO;
        if can_split && (near_zero || local > target * cell.area()) {
            let (s, t) = if near_zero {
                sums.argmin
            } else {
                (0.5 * (cell.s0 + cell.s1), 0.5 * (cell.t0 + cell.t1))
            };
            for child in cell.split_at(s, t) {
                let child_sums = integ.cell(&child);
                stack.push((child, child_sums));
            }
            continue;
        }
        a += &sums.a_hi;
        phi += sums.phi_hi;
        err_a += max_abs(&(&sums.a_hi - &sums.a_lo));
        err_phi += (sums.phi_hi - sums.phi_lo).abs();
        leaves += 1;
    }

    let asymmetry = max_abs(&(&a - a.transpose()));
    let magnitude = max_abs(&a);
    if asymmetry > 1e-9 * (1.0 + magnitude) {
        return Err(Error::Asymmetric { asymmetry });
    }
    let a = (&a + a.transpose()) * 0.5;

    let kappa = if phi > 0.0 { n as f64 * max_abs(&a) / phi } else { 0.0 };
    let est_error = n as f64 * err_a + kappa * err_phi + ROUNDING_FLOOR * n as f64 * magnitude;

    if let Some(tol) = config.max_error {
        if est_error > tol {
            return Err(Error::NonConvergence {
                est_error,
                tolerance: tol,
            });
        }
    }

    Ok(FormResult {
        a,
        phi,
        quad_order: config.order,
        est_error,
        asymmetry,
        cells: leaves,
    })
}

/// `c(a, b)` in double-double arithmetic for the built-in families; `None`
/// for custom costs.
fn cost_dd(cost: &CostSpec, a: &DVector<f64>, b: &DVector<f64>) -> Option<TwoFloat> {
    let w: Vec<TwoFloat> = a.iter().zip(b.iter()).map(|(&u, &v)| TwoFloat::new_sub(u, v)).collect();
    let sq = match cost.kind() {
        CostKind::Power => w.iter().fold(TwoFloat::from(0.0), |acc, &c| acc + c * c),
        CostKind::Anisotropic(m) => {
            let mut acc = TwoFloat::from(0.0);
            for i in 0..w.len() {
                for j in 0..w.len() {
                    acc += w[i] * m[(i, j)] * w[j];
                }
            }
            acc
        }
        CostKind::Custom(_) => return None,
    };
    let p = cost.degree();
    if sq.hi() <= 0.0 {
        return Some(TwoFloat::from(0.0));
    }
    Some(if p == 2.0 {
        sq
    } else if p.fract() == 0.0 && p <= 64.0 {
        let k = p as i32;
        if k % 2 == 0 {
            sq.powi(k / 2)
        } else {
            sq.sqrt().powi(k)
        }
    } else {
        sq.powf(TwoFloat::from(0.5 * p))
    })
}

/// `c(x, zeta) + c(y, xi) - c(x, xi) - c(y, zeta)`, evaluated through `h`.
/// Non-negative iff the pair is h-monotone. Built-in costs are evaluated in
/// double-double arithmetic so that the cancellation between the four
/// terms costs no accuracy beyond the final rounding.
pub fn monotone_pair_gap(cost: &CostSpec, q: &Quadruple) -> f64 {
    let terms = [
        cost_dd(cost, &q.x, &q.zeta),
        cost_dd(cost, &q.y, &q.xi),
        cost_dd(cost, &q.x, &q.xi),
        cost_dd(cost, &q.y, &q.zeta),
    ];
    if let [Some(a), Some(b), Some(c), Some(d)] = terms {
        return ((a + b) - (c + d)).hi();
    }
    cost.cost(&q.x, &q.zeta) + cost.cost(&q.y, &q.xi) - cost.cost(&q.x, &q.xi) - cost.cost(&q.y, &q.zeta)
}

/// `<A (x - y), xi - zeta>` with `A` from [`form_matrix`].
pub fn form_gap(cost: &CostSpec, q: &Quadruple, config: &QuadratureConfig) -> Result<f64> {
    Ok(form_matrix(cost, q, config)?.gap(q))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SandwichSide {
    Lower,
    Upper,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SandwichViolation {
    pub side: SandwichSide,
    /// Amount by which the bound is exceeded beyond the tolerance.
    pub magnitude: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SandwichReport {
    /// `lambda Phi |v|^2`.
    pub lower: f64,
    /// `<A v, v>`.
    pub value: f64,
    /// `Lambda Phi |v|^2`.
    pub upper: f64,
    pub tolerance: f64,
    pub violation: Option<SandwichViolation>,
}

impl SandwichReport {
    pub fn passed(&self) -> bool {
        self.violation.is_none()
    }
}

/// Checks `lambda Phi |v|^2 <= <A v, v> <= Lambda Phi |v|^2` for an already
/// computed form. The tolerance is `tol + 3 est_error |v|^2`.
pub fn sandwich_from(form: &FormResult, bounds: &EllipticityBounds, v: &DVector<f64>, tol: f64) -> SandwichReport {
    let v2 = v.norm_squared();
    let value = (&form.a * v).dot(v);
    let lower = bounds.lambda * form.phi * v2;
    let upper = bounds.big_lambda * form.phi * v2;
    let tolerance = tol + 3.0 * form.est_error * v2;
    let violation = if value < lower - tolerance {
        Some(SandwichViolation {
            side: SandwichSide::Lower,
            magnitude: lower - tolerance - value,
        })
    } else if value > upper + tolerance {
        Some(SandwichViolation {
            side: SandwichSide::Upper,
            magnitude: value - upper - tolerance,
        })
    } else {
        None
    };
    SandwichReport {
        lower,
        value,
        upper,
        tolerance,
        violation,
    }
}

/// Computes the form for `q` and checks the ellipticity sandwich along `v`.
pub fn sandwich_check(
    cost: &CostSpec,
    bounds: &EllipticityBounds,
    q: &Quadruple,
    v: &DVector<f64>,
    config: &QuadratureConfig,
    tol: f64,
) -> Result<SandwichReport> {
    cost.check_point(v)?;
    if v.norm() == 0.0 {
        return Err(Error::InvalidArgument("direction v must be non-zero".into()));
    }
    let form = form_matrix(cost, q, config)?;
    Ok(sandwich_from(&form, bounds, v, tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::{ellipticity_bounds, DEFAULT_MARGIN};
    use approx::assert_relative_eq;

    fn quad(x: &[f64], y: &[f64], xi: &[f64], zeta: &[f64]) -> Quadruple {
        Quadruple::from_slices(x, y, xi, zeta).unwrap()
    }

    #[test]
    fn quadratic_cost_gives_constant_form() {
        let c = CostSpec::power(2, 2.0).unwrap();
        let q = quad(&[0.3, 1.0], &[-2.0, 0.5], &[1.0, 1.0], &[0.0, -4.0]);
        for order in [2, 5, 16] {
            let f = form_matrix(&c, &q, &QuadratureConfig::with_order(order)).unwrap();
            assert_relative_eq!(f.a, DMatrix::identity(2, 2) * 2.0, epsilon = 1e-14);
            assert_relative_eq!(f.phi, 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn one_dimensional_quartic() {
        // path = t, so A = 12 int t^2 = 4 and Phi = int t^2 = 1/3
        let c = CostSpec::power(1, 4.0).unwrap();
        let q = quad(&[1.0], &[0.0], &[0.0], &[0.0]);
        let f = form_matrix(&c, &q, &QuadratureConfig::default()).unwrap();
        assert_relative_eq!(f.a[(0, 0)], 4.0, epsilon = 1e-13);
        assert_relative_eq!(f.phi, 1.0 / 3.0, epsilon = 1e-14);
        assert_eq!(f.cells, 1);
    }

    #[test]
    fn degenerate_quadruple_vanishes() {
        let c = CostSpec::power(2, 4.0).unwrap();
        let q = quad(&[1.0, 2.0], &[1.0, 2.0], &[1.0, 2.0], &[1.0, 2.0]);
        let f = form_matrix(&c, &q, &QuadratureConfig::default()).unwrap();
        assert_eq!(f.phi, 0.0);
        assert_eq!(f.a, DMatrix::zeros(2, 2));
        let b = ellipticity_bounds(&c, 1, DEFAULT_MARGIN, 0).unwrap();
        let r = sandwich_from(&f, &b, &DVector::from_vec(vec![1.0, -1.0]), 0.0);
        assert_eq!((r.lower, r.value, r.upper), (0.0, 0.0, 0.0));
        assert!(r.passed());
    }

    #[test]
    fn pair_gap_examples() {
        let c2 = CostSpec::power(2, 2.0).unwrap();
        let q = quad(&[0.3, 1.0], &[-2.0, 0.5], &[1.0, 1.0], &[0.0, -4.0]);
        let expect = 2.0 * (&q.x - &q.y).dot(&(&q.xi - &q.zeta));
        assert_relative_eq!(monotone_pair_gap(&c2, &q), expect, epsilon = 1e-12);

        let same = quad(&[0.3, 1.0], &[-2.0, 0.5], &[1.0, 1.0], &[1.0, 1.0]);
        assert_eq!(monotone_pair_gap(&CostSpec::power(2, 3.5).unwrap(), &same), 0.0);

        let c4 = CostSpec::power(1, 4.0).unwrap();
        let anti = quad(&[1.0], &[0.0], &[0.0], &[1.0]);
        // h(0) + h(0) - h(1) - h(-1)
        assert_eq!(monotone_pair_gap(&c4, &anti), -2.0);
        let g = form_gap(&c4, &anti, &QuadratureConfig::default()).unwrap();
        // path = s + t - 1, A = 12 int (s + t - 1)^2 = 2, gap = 2 * 1 * (-1)
        assert!(g < 0.0);
        assert_relative_eq!(g, -2.0, epsilon = 1e-12);
    }

    #[test]
    fn coincident_sources_give_zero_form_gap() {
        let c = CostSpec::power(2, 3.0).unwrap();
        let q = quad(&[0.5, 0.5], &[0.5, 0.5], &[1.0, 0.0], &[-1.0, 2.0]);
        assert_eq!(form_gap(&c, &q, &QuadratureConfig::default()).unwrap(), 0.0);
    }

    #[test]
    fn rejects_bad_order_and_dimension() {
        let c = CostSpec::power(2, 3.0).unwrap();
        let q = quad(&[0.5, 0.5], &[0.5, 0.1], &[1.0, 0.0], &[-1.0, 2.0]);
        assert!(form_matrix(&c, &q, &QuadratureConfig::with_order(1)).is_err());
        let c3 = CostSpec::power(3, 3.0).unwrap();
        assert!(matches!(
            form_matrix(&c3, &q, &QuadratureConfig::default()),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(Quadruple::from_slices(&[1.0], &[1.0, 2.0], &[0.0], &[0.0]).is_err());
    }

    #[test]
    fn non_convergence_is_reported() {
        let c = CostSpec::power(1, 3.0).unwrap();
        let q = quad(&[1.0], &[-1.0], &[0.3], &[0.2]);
        let config = QuadratureConfig {
            order: 4,
            max_depth: 0,
            max_error: Some(1e-14),
            ..QuadratureConfig::default()
        };
        assert!(matches!(
            form_matrix(&c, &q, &config),
            Err(Error::NonConvergence { .. })
        ));
    }

    #[test]
    fn kink_is_integrated_exactly() {
        // in one dimension with p = 3 the integrand 6|w| has a kink where
        // w = 0; A (x - y)(xi - zeta) = 0.8^3 + 1.3^3 - 0.7^3 - 1.2^3 = 0.638
        let c = CostSpec::power(1, 3.0).unwrap();
        let q = quad(&[1.0], &[-1.0], &[0.3], &[0.2]);
        let f = form_matrix(&c, &q, &QuadratureConfig::default()).unwrap();
        assert_relative_eq!(f.a[(0, 0)], 0.638 / 0.2, epsilon = 1e-12);
        assert!(f.est_error < 1e-10);
        // a kink that only clips a corner of the square
        let q = quad(&[0.33869938413708445], &[0.9660044908178755], &[-0.8788106783780592], &[0.34383498412591784]);
        let f = form_matrix(&c, &q, &QuadratureConfig::default()).unwrap();
        let exact = monotone_pair_gap(&c, &q) / ((q.x[0] - q.y[0]) * (q.xi[0] - q.zeta[0]));
        assert_relative_eq!(f.a[(0, 0)], exact, epsilon = 1e-12);
    }
}
