//! Travelling-wave velocities of the linearized recursions, their critical
//! points, the SU(2) phase boundary and the scaling fits.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::rng::{haar_unitary, RandomStream};

/// `4 / (3 + √3)`: value of `|sin(θ1+θ2) sin(θ1−θ2)|` on the SU(2) contour.
pub fn su2_contour_level() -> f64 {
    4.0 / (3.0 + 3f64.sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    /// U(1) tree with qubit sites.
    U1D1,
    /// U(1) tree in the infinite-qudit limit.
    U1Dinf,
    /// SU(2) expansion tree at `p = 1`.
    Su2P1,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum VelocityCurve {
    U1D1 { p: f64 },
    U1Dinf { p: f64 },
    Su2P1 { theta1: f64, theta2: f64 },
}

impl VelocityCurve {
    pub fn family(&self) -> Family {
        match self {
            VelocityCurve::U1D1 { .. } => Family::U1D1,
            VelocityCurve::U1Dinf { .. } => Family::U1Dinf,
            VelocityCurve::Su2P1 { .. } => Family::Su2P1,
        }
    }

    pub fn eval(&self, lambda: f64) -> Result<f64> {
        match *self {
            VelocityCurve::U1D1 { p } => velocity_u1_d1(p, lambda),
            VelocityCurve::U1Dinf { p } => velocity_u1_dinf(p, lambda),
            VelocityCurve::Su2P1 { theta1, theta2 } => {
                check_lambda(lambda)?;
                Ok(su2_growth_roots(lambda, theta1, theta2).0.ln() / lambda)
            }
        }
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda < 2.0) {
        return Err(Error::InvalidArgument(format!("λ = {lambda} outside (0, 2)")));
    }
    Ok(())
}

fn check_p(p: f64) -> Result<()> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("p = {p} outside [0, 1)")));
    }
    Ok(())
}

/// `(1/λ) ln[(1−p)(1/(2−λ) + 1/(1+λ))]`.
pub fn velocity_u1_d1(p: f64, lambda: f64) -> Result<f64> {
    check_p(p)?;
    check_lambda(lambda)?;
    Ok(((1.0 - p) * (1.0 / (2.0 - lambda) + 1.0 / (1.0 + lambda))).ln() / lambda)
}

/// Sampling estimate of [`velocity_u1_d1`] from Haar rows `(u1, u2)`.
pub fn velocity_u1_d1_sampled(p: f64, lambda: f64, samples: usize, stream: RandomStream) -> Result<f64> {
    check_p(p)?;
    check_lambda(lambda)?;
    let mut acc = 0.0;
    for i in 0..samples {
        let u = haar_unitary(&mut stream.at(0, i as u64), 2)?;
        let (a, b) = (u[(0, 0)].norm_sqr(), u[(0, 1)].norm_sqr());
        acc += a.powf(1.0 - lambda) + b.powf(1.0 - lambda) + a.powf(lambda) + b.powf(lambda);
    }
    let mean = acc / samples as f64;
    Ok((0.5 * (1.0 - p) * mean).ln() / lambda)
}

/// `(1/λ) ln[(1−p)(2^{λ−1} + 2^{−λ})]`.
pub fn velocity_u1_dinf(p: f64, lambda: f64) -> Result<f64> {
    check_p(p)?;
    check_lambda(lambda)?;
    Ok(((1.0 - p) * (2f64.powf(lambda - 1.0) + 2f64.powf(-lambda))).ln() / lambda)
}

fn su2_ab(theta1: f64, theta2: f64) -> (f64, f64) {
    (1.0 - (2.0 * theta1 + 2.0 * theta2).cos(), 1.0 - (2.0 * theta1 - 2.0 * theta2).cos())
}

/// `B(λ)` of the SU(2) growth equation.
pub fn su2_b(lambda: f64, theta1: f64, theta2: f64) -> f64 {
    let (a, b) = su2_ab(theta1, theta2);
    let x = 2.25 * a;
    0.25 * (x.powf(1.0 - lambda) * b.powf(lambda) + b.powf(1.0 - lambda) * x.powf(lambda))
}

/// `C` of the SU(2) growth equation.
pub fn su2_c(theta1: f64, theta2: f64) -> f64 {
    let (a, b) = su2_ab(theta1, theta2);
    3.0 * a * b / 32.0
}

/// Larger and smaller roots of `x² − B x + C = 0`; the physical growth
/// factor `e^{λ v}` is the larger one.
pub fn su2_growth_roots(lambda: f64, theta1: f64, theta2: f64) -> (f64, f64) {
    let b = su2_b(lambda, theta1, theta2);
    let c = su2_c(theta1, theta2);
    let disc = (b * b - 4.0 * c).max(0.0).sqrt();
    (0.5 * (b + disc), 0.5 * (b - disc))
}

/// `2 ln[(3+√3)/4 |sin(θ1+θ2)| |sin(θ1−θ2)|]`, or `-inf` on the lines where
/// the tree sharpens at once.
pub fn velocity_su2(theta1: f64, theta2: f64) -> f64 {
    let s = ((theta1 + theta2).sin() * (theta1 - theta2).sin()).abs();
    if s < 1e-300 {
        return f64::NEG_INFINITY;
    }
    2.0 * ((3.0 + 3f64.sqrt()) / 4.0 * s).ln()
}

/// `(3+√3)/4 |sin(θ1+θ2) sin(θ1−θ2)| − 1`.
pub fn contour_residual(theta1: f64, theta2: f64) -> f64 {
    ((theta1 + theta2).sin() * (theta1 - theta2).sin()).abs() / su2_contour_level() - 1.0
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LambdaMinimum {
    /// Minimizer over the search window.
    pub lambda_star: f64,
    /// `min(λ*, 1)`.
    pub lambda_phys: f64,
    pub v_min: f64,
}

const WINDOW: (f64, f64) = (0.01, 1.0);

/// Golden-section minimization of `v(λ)` over `(0.01, 1]`, polished by
/// bisection on the sign of a central-difference derivative.
pub fn minimize_lambda(curve: &VelocityCurve) -> Result<LambdaMinimum> {
    let (lo, hi) = WINDOW;
    let grid = 400;
    let xs: Vec<f64> = (0..=grid).map(|i| lo + (hi - lo) * i as f64 / grid as f64).collect();
    let vs: Vec<f64> = xs.iter().map(|&x| curve.eval(x)).collect::<Result<_>>()?;
    if vs.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("velocity curve is not finite on the window".into()));
    }
    let minima: Vec<usize> = (1..grid).filter(|&i| vs[i] < vs[i - 1] && vs[i] <= vs[i + 1]).collect();
    if minima.len() > 1 {
        return Err(Error::NotUnimodal(format!("{} interior minima on the grid", minima.len())));
    }
    let best = (0..=grid).min_by(|&a, &b| vs[a].total_cmp(&vs[b])).unwrap_or(0);
    let (mut a, mut b) = (xs[best.saturating_sub(1)], xs[(best + 1).min(grid)]);
    let f = |x: f64| curve.eval(x).unwrap_or(f64::INFINITY);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-10 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        }
    }
    let mut x = 0.5 * (a + b);
    // Function values stop resolving λ near 1e-8; the derivative sign does not.
    let h = 1e-6;
    if x - 1e-5 > lo + h && x + 1e-5 < hi - h {
        let slope = |t: f64| f(t + h) - f(t - h);
        let (mut l, mut r) = (x - 1e-5, x + 1e-5);
        if slope(l) < 0.0 && slope(r) > 0.0 {
            while r - l > 1e-12 {
                let m = 0.5 * (l + r);
                if slope(m) < 0.0 {
                    l = m;
                } else {
                    r = m;
                }
            }
            x = 0.5 * (l + r);
        }
    }
    if vs[grid] < f(x) {
        x = hi;
    }
    Ok(LambdaMinimum { lambda_star: x, lambda_phys: x.min(1.0), v_min: f(x) })
}

/// Root of `v(p, λ_phys(p)) = 0` by bisection to 1e-10.
pub fn find_critical_p(family: Family) -> Result<f64> {
    let curve = |p: f64| match family {
        Family::U1D1 => Ok(VelocityCurve::U1D1 { p }),
        Family::U1Dinf => Ok(VelocityCurve::U1Dinf { p }),
        Family::Su2P1 => Err(Error::InvalidArgument("the SU(2) family has no p to tune".into())),
    };
    let v = |p: f64| -> Result<f64> { Ok(minimize_lambda(&curve(p)?)?.v_min) };
    let (mut lo, mut hi) = (0.0, 0.32);
    let (vlo, vhi) = (v(lo)?, v(hi)?);
    if !(vlo > 0.0 && vhi < 0.0) {
        return Err(Error::NoBracket(format!("v({lo}) = {vlo}, v({hi}) = {vhi}")));
    }
    while hi - lo > 1e-11 {
        let mid = 0.5 * (lo + hi);
        if v(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// All `θ2 ∈ [0, π]` on the contour for each `θ1`, found by a sign scan and
/// bisection.
pub fn su2_contour(theta1s: &[f64]) -> Vec<(f64, f64)> {
    let scan = 4096;
    let mut out = Vec::new();
    for &t1 in theta1s {
        let f = |t2: f64| contour_residual(t1, t2);
        let mut prev_x = 0.0;
        let mut prev_f = f(0.0);
        if prev_f == 0.0 {
            out.push((t1, 0.0));
        }
        for i in 1..=scan {
            let x = PI * i as f64 / scan as f64;
            let fx = f(x);
            if fx == 0.0 {
                out.push((t1, x));
            } else if prev_f * fx < 0.0 {
                let (mut a, mut b, mut fa) = (prev_x, x, prev_f);
                for _ in 0..200 {
                    let m = 0.5 * (a + b);
                    let fm = f(m);
                    if fm == 0.0 || b - a < 1e-15 {
                        a = m;
                        b = m;
                        break;
                    }
                    if fa * fm < 0.0 {
                        b = m;
                    } else {
                        a = m;
                        fa = fm;
                    }
                }
                out.push((t1, 0.5 * (a + b)));
            }
            prev_x = x;
            prev_f = fx;
        }
    }
    out
}

/// `(κ, K)` at a contour point: `κ = sqrt(2|∇(B−C)| / ∂²_λ B)` at `λ = ½`
/// and `K = π/κ`.
pub fn scaling_constants_su2(theta1: f64, theta2: f64) -> Result<(f64, f64)> {
    let res = contour_residual(theta1, theta2);
    if res.abs() > 1e-8 {
        return Err(Error::InvalidArgument(format!("({theta1}, {theta2}) is off the contour by {res:e}")));
    }
    let g = |t1: f64, t2: f64| su2_b(0.5, t1, t2) - su2_c(t1, t2);
    let h1 = 1e-5;
    let d1 = (g(theta1 + h1, theta2) - g(theta1 - h1, theta2)) / (2.0 * h1);
    let d2 = (g(theta1, theta2 + h1) - g(theta1, theta2 - h1)) / (2.0 * h1);
    let grad = d1.hypot(d2);
    let h2 = 1e-4;
    let curv = (su2_b(0.5 + h2, theta1, theta2) - 2.0 * su2_b(0.5, theta1, theta2) + su2_b(0.5 - h2, theta1, theta2))
        / (h2 * h2);
    if !(curv > 0.0) {
        return Err(Error::InvalidArgument(format!("∂²_λ B = {curv} is not positive")));
    }
    let kappa = (2.0 * grad / curv).sqrt();
    Ok((kappa, PI / kappa))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingFit {
    /// Decay exponent `β` of `ln Z = −A k^β`; `None` for singularity fits.
    pub beta: Option<f64>,
    /// `A` for decay fits, `C` or `K` for `ln Z = c − C/√δ`.
    pub constant: f64,
    /// `c`; zero for decay fits.
    pub offset: f64,
    /// Covariance of `(constant, beta)` for decay fits, of
    /// `(offset, constant)` otherwise.
    pub covariance: DMatrix<f64>,
    pub residual_rms: f64,
    pub points: usize,
}

impl ScalingFit {
    pub fn beta_stderr(&self) -> Option<f64> {
        self.beta.map(|_| self.covariance[(1, 1)].sqrt())
    }
}

fn least_squares(design: &DMatrix<f64>, y: &DVector<f64>) -> Option<(DVector<f64>, f64)> {
    let ata = design.transpose() * design;
    let coef = ata.clone().cholesky()?.solve(&(design.transpose() * y));
    let rss = (design * &coef - y).norm_squared();
    Some((coef, rss))
}

/// Fits `ln Z_k = −A k^β`.
pub fn fit_critical_decay(k: &[f64], ln_z: &[f64]) -> Result<ScalingFit> {
    let n = k.len();
    if n < 10 || ln_z.len() != n {
        return Err(Error::Underdetermined(format!("need ≥ 10 points, got {n}")));
    }
    if k.iter().any(|&x| !(x > 0.0)) || ln_z.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("depths must be positive and ln Z finite".into()));
    }
    let y = DVector::from_column_slice(ln_z);
    let rss_at = |beta: f64| -> Option<(DVector<f64>, f64)> {
        let x = DMatrix::from_fn(n, 1, |i, _| -k[i].powf(beta));
        least_squares(&x, &y)
    };
    let score = |beta: f64| rss_at(beta).map_or(f64::INFINITY, |r| r.1);
    let grid: Vec<f64> = (1..=300).map(|i| 0.01 * i as f64).collect();
    let best = grid.iter().copied().min_by(|a, b| score(*a).total_cmp(&score(*b))).unwrap_or(0.33);
    let (mut a, mut b) = ((best - 0.01).max(1e-3), best + 0.01);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    while b - a > 1e-9 {
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        if score(c) < score(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let beta = 0.5 * (a + b);
    let (coef, rss) = rss_at(beta).ok_or_else(|| Error::Underdetermined("singular design".into()))?;
    let amp = coef[0];
    let jac = DMatrix::from_fn(n, 2, |i, j| match j {
        0 => -k[i].powf(beta),
        _ => -amp * k[i].powf(beta) * k[i].ln(),
    });
    let s2 = rss / (n as f64 - 2.0);
    let covariance = (jac.transpose() * jac)
        .try_inverse()
        .ok_or_else(|| Error::Underdetermined("singular Jacobian".into()))?
        * s2;
    Ok(ScalingFit { beta: Some(beta), constant: amp, offset: 0.0, covariance, residual_rms: (rss / n as f64).sqrt(), points: n })
}

/// Fits `ln Z_sat = c − C/√δ` where `δ` is the distance to criticality.
pub fn fit_essential_singularity(delta: &[f64], ln_z: &[f64]) -> Result<ScalingFit> {
    let n = delta.len();
    if n < 10 || ln_z.len() != n {
        return Err(Error::Underdetermined(format!("need ≥ 10 points, got {n}")));
    }
    if delta.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::InvalidArgument("distances must be positive".into()));
    }
    let x = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { -1.0 / delta[i].sqrt() });
    let y = DVector::from_column_slice(ln_z);
    let (coef, rss) = least_squares(&x, &y).ok_or_else(|| Error::Underdetermined("singular design".into()))?;
    let s2 = rss / (n as f64 - 2.0);
    let covariance = (x.transpose() * &x)
        .try_inverse()
        .ok_or_else(|| Error::Underdetermined("singular design".into()))?
        * s2;
    Ok(ScalingFit { beta: None, constant: coef[1], offset: coef[0], covariance, residual_rms: (rss / n as f64).sqrt(), points: n })
}
