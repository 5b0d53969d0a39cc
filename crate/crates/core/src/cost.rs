//! Homogeneous cost functions `h` with `c(x, y) = h(x - y)`.
//!
//! Built-in families are the power cost `|x|^p` and the anisotropic cost
//! `<Mx, x>^{p/2}` for a symmetric positive definite `M`; arbitrary `C^2`
//! functions plug in through [`HomogeneousFunction`].
//!
//! Regularity caveat: for `2 < p < 3` the Hessian of `|x|^p` is continuous
//! but not Lipschitz at the origin. Such degrees are accepted; quadrature
//! never evaluates the Hessian exactly at a path zero except on degenerate
//! inputs, and adaptive refinement handles the cusp.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::linalg::{max_abs, sym_eigenvalues};
use crate::sampling::{coordinate_axes, sphere_points};
use crate::{Error, Result};

/// User-supplied cost `h`, assumed `C^2` and positively homogeneous of the
/// degree declared alongside it.
pub trait HomogeneousFunction: Send + Sync {
    fn value(&self, x: &DVector<f64>) -> f64;
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;
    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64>;
}

#[derive(Clone)]
pub enum CostKind {
    /// `h(x) = |x|^p`.
    Power,
    /// `h(x) = <Mx, x>^{p/2}` with `M` symmetric positive definite.
    Anisotropic(DMatrix<f64>),
    Custom(Arc<dyn HomogeneousFunction>),
}

impl fmt::Debug for CostKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CostKind::Power => f.write_str("Power"),
            CostKind::Anisotropic(m) => f.debug_tuple("Anisotropic").field(m).finish(),
            CostKind::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// An immutable cost description. All evaluators are pure.
#[derive(Clone, Debug)]
pub struct CostSpec {
    dim: usize,
    degree: f64,
    kind: CostKind,
}

fn check_degree(p: f64) -> Result<()> {
    if !p.is_finite() || p < 2.0 {
        return Err(Error::InvalidArgument(format!(
            "degree p = {p} must be a finite number >= 2"
        )));
    }
    Ok(())
}

fn check_dim(dim: usize) -> Result<()> {
    if dim < 1 {
        return Err(Error::InvalidArgument("dimension must be at least 1".into()));
    }
    Ok(())
}

/// `t^e` using integer powers where possible so that scaling by powers of
/// two stays exact.
fn pow(t: f64, e: f64) -> f64 {
    if e == 0.0 {
        1.0
    } else if e.fract() == 0.0 && e.abs() <= 64.0 {
        t.powi(e as i32)
    } else {
        t.powf(e)
    }
}

impl CostSpec {
    /// `h(x) = |x|^p` on `R^dim`.
    pub fn power(dim: usize, p: f64) -> Result<Self> {
        check_dim(dim)?;
        check_degree(p)?;
        Ok(Self {
            dim,
            degree: p,
            kind: CostKind::Power,
        })
    }

    /// `h(x) = <Mx, x>^{p/2}`; `matrix` must be symmetric positive definite.
    pub fn anisotropic(matrix: DMatrix<f64>, p: f64) -> Result<Self> {
        check_degree(p)?;
        if !matrix.is_square() {
            return Err(Error::InvalidArgument("anisotropic matrix must be square".into()));
        }
        let dim = matrix.nrows();
        check_dim(dim)?;
        let asym = max_abs(&(&matrix - matrix.transpose()));
        if asym > 1e-12 * (1.0 + max_abs(&matrix)) {
            return Err(Error::Asymmetric { asymmetry: asym });
        }
        if matrix.clone().cholesky().is_none() {
            return Err(Error::InvalidArgument(
                "anisotropic matrix must be positive definite".into(),
            ));
        }
        Ok(Self {
            dim,
            degree: p,
            kind: CostKind::Anisotropic(matrix),
        })
    }

    /// A custom cost. Homogeneity is the caller's claim; see
    /// [`check_homogeneity`] to test it.
    pub fn custom(dim: usize, p: f64, h: Arc<dyn HomogeneousFunction>) -> Result<Self> {
        check_dim(dim)?;
        check_degree(p)?;
        Ok(Self {
            dim,
            degree: p,
            kind: CostKind::Custom(h),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> f64 {
        self.degree
    }

    pub fn kind(&self) -> &CostKind {
        &self.kind
    }

    /// True when the integrand `D^2h` is a polynomial (even integer degree
    /// for the built-in families), so tensor Gauss rules are exact.
    pub fn has_polynomial_hessian(&self) -> bool {
        let p = self.degree;
        !matches!(self.kind, CostKind::Custom(_)) && p.fract() == 0.0 && (p as i64) % 2 == 0
    }

    /// `h(x)`.
    pub fn h(&self, x: &DVector<f64>) -> f64 {
        let p = self.degree;
        match &self.kind {
            CostKind::Power => {
                if p == 2.0 {
                    x.norm_squared()
                } else {
                    pow(x.norm(), p)
                }
            }
            CostKind::Anisotropic(m) => {
                let q = x.dot(&(m * x));
                if p == 2.0 {
                    q
                } else {
                    pow(q.max(0.0).sqrt(), p)
                }
            }
            CostKind::Custom(f) => f.value(x),
        }
    }

    /// `Dh(x)`.
    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let p = self.degree;
        match &self.kind {
            CostKind::Power => {
                let r = x.norm();
                if r == 0.0 {
                    return DVector::zeros(self.dim);
                }
                x * (p * pow(r, p - 2.0))
            }
            CostKind::Anisotropic(m) => {
                let mx = m * x;
                let q = x.dot(&mx);
                if q <= 0.0 {
                    return DVector::zeros(self.dim);
                }
                mx * (p * pow(q.sqrt(), p - 2.0))
            }
            CostKind::Custom(f) => f.gradient(x),
        }
    }

    /// `D^2h(x)`. At the origin this is `2I` (resp. `2M`) for `p = 2` and
    /// the zero matrix for `p > 2`.
    pub fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let p = self.degree;
        let n = self.dim;
        match &self.kind {
            CostKind::Power => {
                if p == 2.0 {
                    return DMatrix::identity(n, n) * 2.0;
                }
                let r = x.norm();
                if r == 0.0 {
                    return DMatrix::zeros(n, n);
                }
                let u = x / r;
                let scale = p * pow(r, p - 2.0);
                let mut hess = &u * u.transpose() * ((p - 2.0) * scale);
                for i in 0..n {
                    hess[(i, i)] += scale;
                }
                hess
            }
            CostKind::Anisotropic(m) => {
                if p == 2.0 {
                    return m * 2.0;
                }
                let mx = m * x;
                let q = x.dot(&mx);
                if q <= 0.0 {
                    return DMatrix::zeros(n, n);
                }
                let rq = q.sqrt();
                let w = mx / rq;
                let scale = p * pow(rq, p - 2.0);
                m * scale + &w * w.transpose() * ((p - 2.0) * scale)
            }
            CostKind::Custom(f) => f.hessian(x),
        }
    }

    /// `c(x, y) = h(x - y)`.
    pub fn cost(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        self.h(&(x - y))
    }

    /// Whether `h(-x) = h(x)`. Built-in families are even by construction;
    /// custom costs are sampled at `samples` sphere points and radii.
    pub fn is_even(&self, samples: usize, tol: f64) -> Result<()> {
        if !matches!(self.kind, CostKind::Custom(_)) {
            return Ok(());
        }
        for (i, u) in sphere_points(self.dim, samples, 11).into_iter().enumerate() {
            let x = u * (0.5 + 1.5 * ((i % 7) as f64) / 6.0);
            let a = self.h(&x);
            let b = self.h(&(-&x));
            if (a - b).abs() > tol * (1.0 + a.abs()) {
                return Err(Error::NotEven {
                    point: x.iter().copied().collect(),
                });
            }
        }
        Ok(())
    }

    pub(crate) fn check_point(&self, v: &DVector<f64>) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: v.len(),
            });
        }
        Ok(())
    }
}

/// Shorthand for [`CostSpec::power`].
pub fn make_power_cost(dim: usize, p: f64) -> Result<CostSpec> {
    CostSpec::power(dim, p)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundsMethod {
    ClosedForm,
    SphereSampling,
}

/// Certified constants with `lambda |v|^2 <= <D^2h(x) v, v> <= Lambda |v|^2`
/// on the unit sphere.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EllipticityBounds {
    pub lambda: f64,
    pub big_lambda: f64,
    pub method: BoundsMethod,
    pub sample_count: usize,
    pub margin: f64,
}

impl EllipticityBounds {
    /// `Lambda / lambda`.
    pub fn ratio(&self) -> f64 {
        self.big_lambda / self.lambda
    }
}

/// Default deflation/inflation applied to sampled extremes.
pub const DEFAULT_MARGIN: f64 = 1e-3;

/// Ellipticity constants of `D^2h` on the unit sphere.
///
/// Power costs use the closed form: eigenvalues `p` (tangential) and
/// `p(p-1)` (radial), so `(lambda, Lambda) = (p, p(p-1))` for `dim >= 2`
/// and `p(p-1)` for both in one dimension. Other costs take the extreme
/// eigenvalues over `sample_count` low-discrepancy sphere points plus the
/// coordinate axes, deflated/inflated by `margin`.
pub fn ellipticity_bounds(
    cost: &CostSpec,
    sample_count: usize,
    margin: f64,
    seed: u64,
) -> Result<EllipticityBounds> {
    if sample_count < 1 {
        return Err(Error::InvalidArgument("sample_count must be >= 1".into()));
    }
    if !(0.0..1.0).contains(&margin) {
        return Err(Error::InvalidArgument(format!("margin {margin} not in [0, 1)")));
    }
    if let CostKind::Power = cost.kind {
        let p = cost.degree;
        let radial = p * (p - 1.0);
        let lambda = if cost.dim == 1 { radial } else { p };
        return Ok(EllipticityBounds {
            lambda,
            big_lambda: radial,
            method: BoundsMethod::ClosedForm,
            sample_count: 0,
            margin: 0.0,
        });
    }
    let mut points = coordinate_axes(cost.dim);
    points.extend(sphere_points(cost.dim, sample_count, seed));
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for x in &points {
        let ev = sym_eigenvalues(&cost.hessian(x));
        let (emin, emax) = (ev[0], ev[ev.len() - 1]);
        if !(emin > 0.0) {
            return Err(Error::NotElliptic {
                eigenvalue: emin,
                point: x.iter().copied().collect(),
            });
        }
        lo = lo.min(emin);
        hi = hi.max(emax);
    }
    Ok(EllipticityBounds {
        lambda: lo * (1.0 - margin),
        big_lambda: hi * (1.0 + margin),
        method: BoundsMethod::SphereSampling,
        sample_count: points.len(),
        margin,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HomogeneityQuantity {
    Value,
    Hessian,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HomogeneityViolation {
    pub x: Vec<f64>,
    pub t: f64,
    pub quantity: HomogeneityQuantity,
    /// Violation measured relative to `1 + |scaled reference|`.
    pub relative_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HomogeneityReport {
    pub trials: usize,
    pub tol: f64,
    pub worst_violation: f64,
    pub violations: Vec<HomogeneityViolation>,
}

impl HomogeneityReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

const SCALES: [f64; 6] = [2.0, 0.5, 3.0, 0.1, 7.5, 1.25];

/// Samples `(x, t)` pairs and tests `h(tx) = t^p h(x)` and
/// `D^2h(tx) = t^{p-2} D^2h(x)`. Never fails; violations are listed in the
/// report.
pub fn check_homogeneity(cost: &CostSpec, trials: usize, tol: f64, seed: u64) -> HomogeneityReport {
    let p = cost.degree;
    let mut violations = Vec::new();
    let mut worst: f64 = 0.0;
    for (i, u) in sphere_points(cost.dim, trials.max(1), seed).into_iter().enumerate() {
        let x = u * (0.5 + 1.5 * ((i % 5) as f64) / 4.0);
        let t = SCALES[i % SCALES.len()];
        let tx = &x * t;

        let reference = pow(t, p) * cost.h(&x);
        let err = (cost.h(&tx) - reference).abs() / (1.0 + reference.abs());
        worst = worst.max(err);
        if err > tol {
            violations.push(HomogeneityViolation {
                x: x.iter().copied().collect(),
                t,
                quantity: HomogeneityQuantity::Value,
                relative_error: err,
            });
        }

        let href = cost.hessian(&x) * pow(t, p - 2.0);
        let err = max_abs(&(cost.hessian(&tx) - &href)) / (1.0 + max_abs(&href));
        worst = worst.max(err);
        if err > tol {
            violations.push(HomogeneityViolation {
                x: x.iter().copied().collect(),
                t,
                quantity: HomogeneityQuantity::Hessian,
                relative_error: err,
            });
        }
    }
    HomogeneityReport {
        trials: trials.max(1),
        tol,
        worst_violation: worst,
        violations,
    }
}
