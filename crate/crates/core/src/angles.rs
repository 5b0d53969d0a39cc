//! Angle estimates behind almost-everywhere single-valuedness.
//!
//! Around a point `x0` carrying two values `y1, y2` with `e = y2 - y1`, the
//! averaged Hessian `A = A(x, x0; xi, y2)` distorts angles by a factor that
//! depends only on the ellipticity ratio `r = Lambda / lambda`:
//!
//! * `F = angle(A^{1/2}(x - x0), A^{1/2} e) <= 4 sqrt(r) delta` for
//!   `delta = angle(x - x0, e) <= delta0`;
//! * `G = angle(A^{1/2}(xi - y2), A^{1/2} e) >= arccos(-1 + 8 r (pi - theta)^2)`
//!   for `theta = angle(xi - y2, e)` close to `pi`.
//!
//! Together with monotonicity these exclude graph values near `y1` over the
//! cone `{x : angle(x - x0, e) <= delta0}`.

use std::f64::consts::{FRAC_PI_2, PI};

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};

use crate::cost::CostSpec;
use crate::form::{form_matrix, QuadratureConfig, Quadruple};
use crate::linalg::{angle, orthogonal_part, spd_sqrt, sym_eigenvalues};
use crate::map::MultiMap;
use crate::sampling::{ball_points, sphere_points};
use crate::{Error, Result};

/// Relative eigenvalue floor for `A^{1/2}`.
pub const SQRT_FLOOR: f64 = 1e-14;

/// `A` counts as singular when its smallest eigenvalue is at most this
/// fraction of the largest.
pub const SINGULAR_RATIO: f64 = 1e-12;

/// Coefficients of the planar reduction of `A` onto `span(e, z)`:
/// `B = <A z^, e^> / <A e^, e^>` and `C = <A z^, z^> / <A e^, e^>`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AngleParams {
    b: f64,
    c: f64,
    lambda: f64,
    big_lambda: f64,
}

impl AngleParams {
    /// Validates `|B| <= sqrt(C)` and `lambda/Lambda <= C <= Lambda/lambda`
    /// up to a relative slack of `1e-12`.
    pub fn new(b: f64, c: f64, lambda: f64, big_lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && big_lambda >= lambda && big_lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "need 0 < lambda <= Lambda, got {lambda}, {big_lambda}"
            )));
        }
        if !(c > 0.0 && c.is_finite() && b.is_finite()) {
            return Err(Error::InvalidArgument(format!("need C > 0, got {c}")));
        }
        let slack = 1e-12;
        if b.abs() > c.sqrt() * (1.0 + slack) {
            return Err(Error::InvalidArgument(format!(
                "|B| = {} exceeds sqrt(C) = {}",
                b.abs(),
                c.sqrt()
            )));
        }
        let r = big_lambda / lambda;
        if c < (1.0 - slack) / r || c > r * (1.0 + slack) {
            return Err(Error::InvalidArgument(format!(
                "C = {c} outside [{}, {r}]",
                1.0 / r
            )));
        }
        Ok(Self {
            b,
            c,
            lambda,
            big_lambda,
        })
    }

    /// Reduction of the symmetric positive definite `a` along `e` and the
    /// orthogonal direction `z`. The ellipticity constants are the extreme
    /// eigenvalues of `a`.
    pub fn from_decomposition(a: &DMatrix<f64>, e: &DVector<f64>, z: &DVector<f64>) -> Result<Self> {
        let (e_hat, z_hat) = (e.normalize(), z.normalize());
        let ee = (a * &e_hat).dot(&e_hat);
        let b = (a * &z_hat).dot(&e_hat) / ee;
        let c = (a * &z_hat).dot(&z_hat) / ee;
        let ev = sym_eigenvalues(a);
        Self::new(b, c, ev[0], ev[ev.len() - 1])
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn big_lambda(&self) -> f64 {
        self.big_lambda
    }

    pub fn ratio(&self) -> f64 {
        self.big_lambda / self.lambda
    }

    /// `1 + C s^2 + 2 B s`, written as `(1 + B s)^2 + (C - B^2) s^2` so the
    /// collinear case `C = B^2` is an exact square.
    fn radicand(&self, s: f64) -> f64 {
        let lin = 1.0 + self.b * s;
        lin * lin + self.excess() * s * s
    }

    /// `C - B^2`, clamped at zero.
    fn excess(&self) -> f64 {
        (self.c - self.b * self.b).max(0.0)
    }
}

/// `g(s) = sign(s) (1 + B s) / sqrt(1 + C s^2 + 2 B s)`, so that
/// `cos F(delta) = g(tan delta)`.
pub fn g(s: f64, params: &AngleParams) -> Result<f64> {
    if s == 0.0 || !s.is_finite() {
        return Err(Error::InvalidArgument(format!("g needs a finite s != 0, got {s}")));
    }
    let rad = params.radicand(s);
    if rad <= 0.0 {
        return Err(Error::Degenerate(format!(
            "radicand 1 + C s^2 + 2 B s vanishes at s = {s}"
        )));
    }
    let val = (1.0 + params.b * s) / rad.sqrt();
    Ok(s.signum() * val.clamp(-1.0, 1.0))
}

/// `Delta(s) = 1 - g(s)` for `0 < s <= 1/(2 sqrt C)`, evaluated as
/// `(C - B^2) s^2 / ((1 + B s + sqrt R) sqrt R)` to avoid cancellation.
pub fn delta_gap(s: f64, params: &AngleParams) -> Result<f64> {
    let s_max = 0.5 / params.c.sqrt();
    if !(s > 0.0 && s <= s_max) {
        return Err(Error::InvalidArgument(format!(
            "s = {s} outside (0, {s_max}]"
        )));
    }
    let rad = params.radicand(s);
    let root = rad.sqrt();
    let num = params.excess() * s * s;
    Ok(num / ((1.0 + params.b * s + root) * root))
}

/// Angle between `A^{1/2} u` and `A^{1/2} v`.
pub fn distorted_angle(sqrt_a: &DMatrix<f64>, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
    angle(&(sqrt_a * u), &(sqrt_a * v))
}

#[derive(Clone, Debug, PartialEq)]
pub struct FAngle {
    /// `angle(A^{1/2}(x - x0), A^{1/2} e)`.
    pub f: f64,
    /// `angle(x - x0, e)`.
    pub delta: f64,
    /// Planar reduction; `None` when `x - x0` is parallel to `e`.
    pub params: Option<AngleParams>,
    pub a: DMatrix<f64>,
}

/// Distorted angle of `x - x0` against `e` under the averaged Hessian of `q`.
pub fn f_angle(
    cost: &CostSpec,
    x0: &DVector<f64>,
    x: &DVector<f64>,
    e: &DVector<f64>,
    q: &Quadruple,
    config: &QuadratureConfig,
) -> Result<FAngle> {
    let d = x - x0;
    if d.norm() == 0.0 {
        return Err(Error::InvalidArgument("x coincides with x0".into()));
    }
    if e.norm() == 0.0 {
        return Err(Error::InvalidArgument("axis e is zero".into()));
    }
    let a = form_matrix(cost, q, config)?.a;
    f_angle_with_matrix(&a, &d, e).map_err(|err| match err {
        Error::Degenerate(msg) => Error::Degenerate(format!(
            "{msg} for quadruple x={:?} y={:?} xi={:?} zeta={:?}",
            q.x.as_slice(),
            q.y.as_slice(),
            q.xi.as_slice(),
            q.zeta.as_slice()
        )),
        other => other,
    })
}

/// As [`f_angle`] with a precomputed `A` and `d = x - x0`.
pub fn f_angle_with_matrix(a: &DMatrix<f64>, d: &DVector<f64>, e: &DVector<f64>) -> Result<FAngle> {
    let ev = sym_eigenvalues(a);
    let (lo, hi) = (ev[0], ev[ev.len() - 1]);
    if !(hi > 0.0 && lo > SINGULAR_RATIO * hi) {
        return Err(Error::Degenerate(format!(
            "averaged Hessian is numerically singular (eigenvalues {lo:e}..{hi:e})"
        )));
    }
    let root = spd_sqrt(a, SQRT_FLOOR);
    let delta = angle(d, e);
    let f = distorted_angle(&root, d, e);
    let z = orthogonal_part(d, &e.normalize());
    let params = if z.norm() > 1e-12 * d.norm() {
        Some(AngleParams::from_decomposition(a, e, &z)?)
    } else {
        None
    };
    Ok(FAngle {
        f,
        delta,
        params,
        a: a.clone(),
    })
}

/// `arccos(-1 + 8 r (pi - theta)^2)` for `theta` in `[pi - theta1, pi]`,
/// with `theta1 = admissible_theta1(r)`.
pub fn g_lower_bound(theta: f64, lambda: f64, big_lambda: f64) -> Result<f64> {
    if !(lambda > 0.0 && big_lambda >= lambda) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < lambda <= Lambda, got {lambda}, {big_lambda}"
        )));
    }
    let r = big_lambda / lambda;
    let theta1 = admissible_theta1(r);
    if !(theta >= PI - theta1 && theta <= PI) {
        return Err(Error::InvalidArgument(format!(
            "theta = {theta} outside [pi - {theta1}, pi]"
        )));
    }
    let arg = -1.0 + 8.0 * r * (PI - theta).powi(2);
    Ok(arg.clamp(-1.0, 1.0).acos())
}

/// `min(0.1, sqrt(lambda/Lambda) / 4)`; keeps `tan delta <= sqrt(lambda/Lambda)/2`
/// and `tan delta <= 2 delta`.
pub fn admissible_delta0(ratio: f64) -> f64 {
    0.1f64.min(0.25 / ratio.sqrt())
}

/// Window below `pi` on which the `G` lower bound holds; same formula as
/// [`admissible_delta0`].
pub fn admissible_theta1(ratio: f64) -> f64 {
    admissible_delta0(ratio)
}

/// Constant in `F <= K delta`.
pub fn f_constant(ratio: f64) -> f64 {
    4.0 * ratio.sqrt()
}

/// `theta1` used for the cone exclusion: [`admissible_theta1`], reduced when
/// needed so that the `G` lower bound at `pi - theta1` still exceeds
/// `pi/2 + K delta0`.
pub fn exclusion_theta1(ratio: f64) -> f64 {
    let t = admissible_theta1(ratio);
    let spread = f_constant(ratio) * admissible_delta0(ratio);
    // arccos(-1 + 8 r t^2) > pi/2 + spread  <=>  8 r t^2 < 1 - sin(spread)
    let cap = ((1.0 - spread.sin()) / (8.0 * ratio)).sqrt();
    if t < cap {
        t
    } else {
        0.9 * cap
    }
}

/// Largest `eps = 2^-n` with `eps < 1/8` and `2 / (1/(2 eps) - 1) <= sin(theta1)`.
pub fn select_epsilon(theta1: f64) -> Result<f64> {
    if !(theta1 > 0.0 && theta1 < FRAC_PI_2) {
        return Err(Error::InvalidArgument(format!(
            "theta1 = {theta1} outside (0, pi/2)"
        )));
    }
    let target = theta1.sin();
    let mut eps = 1.0 / 16.0;
    for _ in 0..60 {
        if 2.0 / (0.5 / eps - 1.0) <= target {
            return Ok(eps);
        }
        eps *= 0.5;
    }
    Err(Error::InvalidArgument(format!("no admissible epsilon for theta1 = {theta1}")))
}

/// A closed cone `{x : angle(x - vertex, axis) <= half_angle}`; the vertex
/// itself belongs to it.
#[derive(Clone, Debug, PartialEq)]
pub struct ConeSpec {
    pub vertex: DVector<f64>,
    pub axis: DVector<f64>,
    pub half_angle: f64,
}

impl ConeSpec {
    pub fn new(vertex: DVector<f64>, axis: DVector<f64>, half_angle: f64) -> Result<Self> {
        if axis.len() != vertex.len() {
            return Err(Error::DimensionMismatch {
                expected: vertex.len(),
                found: axis.len(),
            });
        }
        if axis.norm() == 0.0 {
            return Err(Error::InvalidArgument("cone axis is zero".into()));
        }
        if !(half_angle > 0.0 && half_angle < FRAC_PI_2) {
            return Err(Error::InvalidArgument(format!(
                "half-angle {half_angle} outside (0, pi/2)"
            )));
        }
        Ok(Self {
            vertex,
            axis,
            half_angle,
        })
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        let d = x - &self.vertex;
        d.norm() == 0.0 || angle(&d, &self.axis) <= self.half_angle
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConeGeometry {
    /// `r / |y2 - xj|`.
    pub sin_beta: f64,
    /// `2 arcsin(sin_beta)`.
    pub alpha_bound: f64,
    /// Largest angle at `y2` between two sampled ball points.
    pub alpha_sampled: f64,
}

/// Number of ball samples used by [`cone_geometry`].
pub const CONE_SAMPLES: usize = 256;

/// Opening of the ice-cream cone spanned by `y2` and `B_r(xj)`.
pub fn cone_geometry(xj: &DVector<f64>, r: f64, y2: &DVector<f64>) -> Result<ConeGeometry> {
    let dist = (y2 - xj).norm();
    if !(r >= 0.0) || dist <= r {
        return Err(Error::InvalidArgument(format!(
            "vertex at distance {dist} is not outside the ball of radius {r}"
        )));
    }
    let sin_beta = r / dist;
    let alpha_bound = 2.0 * sin_beta.asin();
    let mut pts: Vec<DVector<f64>> = sphere_points(xj.len(), CONE_SAMPLES / 2, 17)
        .into_iter()
        .map(|d| xj + d * r)
        .collect();
    pts.extend(ball_points(xj, r, CONE_SAMPLES / 2, 29));
    let dirs: Vec<DVector<f64>> = pts.iter().map(|p| p - y2).collect();
    let alpha_sampled = dirs
        .iter()
        .tuple_combinations()
        .map(|(a, b)| angle(a, b))
        .fold(0.0, f64::max);
    Ok(ConeGeometry {
        sin_beta,
        alpha_bound,
        alpha_sampled,
    })
}

/// Constants of the exclusion argument at `x0` with values `y1, y2`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExclusionSetup {
    pub x0: DVector<f64>,
    pub y1: DVector<f64>,
    pub y2: DVector<f64>,
    /// `1 / (2 |y2 - y1|)`, so that `|y2 - y1| = 1/(2k)`.
    pub k: f64,
    pub delta0: f64,
    pub theta1: f64,
    pub epsilon: f64,
    pub cone: ConeSpec,
    /// Ball `B_{eps/k}(y1)`.
    pub ball_radius: f64,
}

impl ExclusionSetup {
    pub fn new(x0: DVector<f64>, y1: DVector<f64>, y2: DVector<f64>, ratio: f64) -> Result<Self> {
        let e = &y2 - &y1;
        let gap = e.norm();
        if gap == 0.0 {
            return Err(Error::InvalidArgument("y1 and y2 coincide".into()));
        }
        let k = 0.5 / gap;
        let delta0 = admissible_delta0(ratio);
        let theta1 = exclusion_theta1(ratio);
        let epsilon = select_epsilon(theta1)?;
        let cone = ConeSpec::new(x0.clone(), e, delta0)?;
        Ok(Self {
            x0,
            y1,
            y2,
            k,
            delta0,
            theta1,
            epsilon,
            cone,
            ball_radius: epsilon / k,
        })
    }

    pub fn in_ball(&self, xi: &DVector<f64>) -> bool {
        (xi - &self.y1).norm() <= self.ball_radius
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExclusionReport {
    /// Domain points other than `x0` inside the cone.
    pub cone_points: usize,
    /// Graph values inside the ball, over the whole domain except `x0`.
    pub ball_values: usize,
    /// Offending `(x, xi)` with `x` in the cone and `xi` in the ball.
    pub hits: Vec<(DVector<f64>, DVector<f64>)>,
}

impl ExclusionReport {
    pub fn passed(&self) -> bool {
        self.hits.is_empty()
    }
}

/// Exhaustive check that no domain point of the cone maps into the ball.
pub fn cone_exclusion(map: &MultiMap, setup: &ExclusionSetup) -> ExclusionReport {
    let mut report = ExclusionReport {
        cone_points: 0,
        ball_values: 0,
        hits: Vec::new(),
    };
    for entry in map.entries() {
        if entry.x == setup.x0 {
            continue;
        }
        let in_cone = setup.cone.contains(&entry.x);
        report.cone_points += in_cone as usize;
        for xi in &entry.values {
            if setup.in_ball(xi) {
                report.ball_values += 1;
                if in_cone {
                    report.hits.push((entry.x.clone(), xi.clone()));
                }
            }
        }
    }
    report
}
