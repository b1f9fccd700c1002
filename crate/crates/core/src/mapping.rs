//! Compressed-layer coordinate maps and the coefficients they induce.
//!
//! A map sends the bounded layer `a < r < b` onto the unbounded exterior
//! `rho > a` through `tau(r) = a exp(tau0 (r - a))`, leaving the inner
//! region untouched. Everything that would overflow for large `tau` is
//! written in terms of `1/tau` or ratios like `tau / (r tau')`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Mat2 = [[f64; 2]; 2];

/// Decay rate giving `exp(-tau0 d) = eps^2` across a layer of thickness `d`.
pub fn tau0_for(eps: f64, thickness: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain(format!("eps must lie in (0, 1), got {eps}")));
    }
    if !(thickness > 0.0) || !thickness.is_finite() {
        return Err(Error::Geometry(format!("layer thickness must be positive, got {thickness}")));
    }
    Ok((1.0 / (eps * eps)).ln() / thickness)
}

/// Matrix whose columns are `e_r` and `e_theta`.
pub fn rotation(theta: f64) -> Mat2 {
    let (s, c) = theta.sin_cos();
    [[c, -s], [s, c]]
}

/// `Q diag... Q^T` for a symmetric matrix given in the polar frame.
fn polar_to_cartesian(q: &Mat2, rr: f64, rt: f64, tt: f64) -> Mat2 {
    let m = [[rr, rt], [rt, tt]];
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let mut s = 0.0;
            for k in 0..2 {
                for l in 0..2 {
                    s += q[i][k] * m[k][l] * q[j][l];
                }
            }
            out[i][j] = s;
        }
    }
    out
}

fn rotate_vec(q: &Mat2, v: [Complex64; 2]) -> [Complex64; 2] {
    [q[0][0] * v[0] + q[0][1] * v[1], q[1][0] * v[0] + q[1][1] * v[1]]
}

/// Anisotropic coefficient matrix `C` and Jacobian determinant of the map at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerCoefficients {
    pub c: Mat2,
    pub jacobian: f64,
}

impl LayerCoefficients {
    pub fn identity() -> Self {
        LayerCoefficients { c: [[1.0, 0.0], [0.0, 1.0]], jacobian: 1.0 }
    }

    pub fn det_c(&self) -> f64 {
        self.c[0][0] * self.c[1][1] - self.c[0][1] * self.c[1][0]
    }
}

/// Radial map for the annular layer `a < r < b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircularMap {
    pub a: f64,
    pub b: f64,
    pub tau0: f64,
}

impl CircularMap {
    pub fn new(a: f64, b: f64, eps: f64) -> Result<Self> {
        if !(a > 0.0) || !(b > a) {
            return Err(Error::Geometry(format!("need 0 < a < b, got a = {a}, b = {b}")));
        }
        Ok(CircularMap { a, b, tau0: tau0_for(eps, b - a)? })
    }

    pub fn tau(&self, r: f64) -> f64 {
        if r <= self.a {
            r
        } else {
            self.a * (self.tau0 * (r - self.a)).exp()
        }
    }

    /// `1 / tau(r)` without forming `tau`.
    pub fn inv_tau(&self, r: f64) -> f64 {
        if r <= self.a {
            1.0 / r
        } else {
            (-self.tau0 * (r - self.a)).exp() / self.a
        }
    }

    /// `tau'(r)`, taken from the layer side at `r = a`.
    pub fn dtau(&self, r: f64) -> f64 {
        if r < self.a {
            1.0
        } else {
            self.tau0 * self.tau(r)
        }
    }

    /// `tau'`, the radial stretch.
    pub fn alpha(&self, r: f64) -> f64 {
        self.dtau(r)
    }

    /// `tau / r`, the angular stretch.
    pub fn beta(&self, r: f64) -> f64 {
        self.tau(r) / r
    }

    pub fn inverse(&self, rho: f64) -> f64 {
        if rho <= self.a {
            rho
        } else {
            self.a + (rho / self.a).ln() / self.tau0
        }
    }

    /// `C = R diag(tau/(r tau'), r tau'/tau) R^T` and `J = tau tau' / r` at `(r, theta)`.
    pub fn coefficients(&self, r: f64, theta: f64) -> LayerCoefficients {
        if r <= self.a {
            return LayerCoefficients::identity();
        }
        let q = rotation(theta);
        let radial = 1.0 / (r * self.tau0);
        let c = polar_to_cartesian(&q, radial, 0.0, 1.0 / radial);
        let tau = self.tau(r);
        LayerCoefficients { c, jacobian: self.tau0 * tau * tau / r }
    }
}

/// Distance from the origin to the rectangle `[-l1, l1] x [-l2, l2]` along direction `theta`,
/// with its derivative in `theta`.
pub fn rect_radius(l1: f64, l2: f64, theta: f64) -> (f64, f64) {
    let (s, c) = theta.sin_cos();
    let by_x = if c != 0.0 { l1 / c.abs() } else { f64::INFINITY };
    let by_y = if s != 0.0 { l2 / s.abs() } else { f64::INFINITY };
    if by_x <= by_y {
        (by_x, l1 * c.signum() * s / (c * c))
    } else {
        (by_y, -l2 * s.signum() * c / (s * s))
    }
}

/// Layer map around the rectangle `[-l1, l1] x [-l2, l2]`, with `a = a(theta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RectangularMap {
    pub l1: f64,
    pub l2: f64,
    pub tau0: f64,
}

/// Polar data of a layer point with the pieces every coefficient needs.
#[derive(Debug, Clone, Copy)]
struct LayerPoint {
    r: f64,
    theta: f64,
    da: f64,
    /// `1 / tau`.
    inv_tau: f64,
    /// `d_theta tau / tau`.
    q: f64,
}

impl RectangularMap {
    pub fn new(l1: f64, l2: f64, tau0: f64) -> Result<Self> {
        if !(l1 > 0.0 && l2 > 0.0) {
            return Err(Error::Geometry(format!("half-widths must be positive, got {l1}, {l2}")));
        }
        if !(tau0 > 0.0) || !tau0.is_finite() {
            return Err(Error::Domain(format!("tau0 must be positive, got {tau0}")));
        }
        Ok(RectangularMap { l1, l2, tau0 })
    }

    pub fn theta0(&self) -> f64 {
        (self.l2 / self.l1).atan()
    }

    pub fn a_of_theta(&self, theta: f64) -> (f64, f64) {
        rect_radius(self.l1, self.l2, theta)
    }

    pub fn in_layer(&self, x: f64, y: f64) -> bool {
        x.abs() > self.l1 || y.abs() > self.l2
    }

    fn layer_point(&self, x: f64, y: f64) -> LayerPoint {
        let r = x.hypot(y);
        let theta = y.atan2(x);
        let (a, da) = self.a_of_theta(theta);
        let inv_tau = (-self.tau0 * (r - a)).exp() / a;
        let q = da * (1.0 - self.tau0 * a) / a;
        LayerPoint { r, theta, da, inv_tau, q }
    }

    /// `tau(r, theta)`; equal to `r` inside the rectangle.
    pub fn tau(&self, r: f64, theta: f64) -> f64 {
        let (a, _) = self.a_of_theta(theta);
        if r <= a {
            r
        } else {
            a * (self.tau0 * (r - a)).exp()
        }
    }

    /// `(d_r tau, d_theta tau)` in the layer.
    pub fn tau_derivatives(&self, r: f64, theta: f64) -> (f64, f64) {
        let (a, da) = self.a_of_theta(theta);
        if r <= a {
            return (1.0, 0.0);
        }
        let e = (self.tau0 * (r - a)).exp();
        (self.tau0 * a * e, da * e * (1.0 - self.tau0 * a))
    }

    /// Radius `r` with `tau(r, theta) = rho`.
    pub fn inverse(&self, rho: f64, theta: f64) -> f64 {
        let (a, _) = self.a_of_theta(theta);
        if rho <= a {
            rho
        } else {
            a + (rho / a).ln() / self.tau0
        }
    }

    /// Physical image `tau(x) x / |x|` of a computational point.
    pub fn image(&self, x: f64, y: f64) -> [f64; 2] {
        let r = x.hypot(y);
        if !self.in_layer(x, y) {
            return [x, y];
        }
        let t = self.tau(r, y.atan2(x));
        [t * x / r, t * y / r]
    }

    pub fn coefficients(&self, x: f64, y: f64) -> LayerCoefficients {
        if !self.in_layer(x, y) {
            return LayerCoefficients::identity();
        }
        let p = self.layer_point(x, y);
        let q = rotation(p.theta);
        let rt0 = p.r * self.tau0;
        let c = polar_to_cartesian(&q, (1.0 + p.q * p.q) / rt0, -p.q, rt0);
        let tau = 1.0 / p.inv_tau;
        LayerCoefficients { c, jacobian: self.tau0 * tau * tau / p.r }
    }

    /// Oscillation factor `exp(ik(tau - a(theta)))`; identically one inside the rectangle.
    pub fn substitution_factor(&self, k: f64, x: f64, y: f64) -> Complex64 {
        if !self.in_layer(x, y) {
            return Complex64::new(1.0, 0.0);
        }
        let r = x.hypot(y);
        let theta = y.atan2(x);
        let (a, _) = self.a_of_theta(theta);
        Complex64::from_polar(1.0, k * (self.tau(r, theta) - a))
    }
}

/// Pointwise coefficients of the weak form
/// `(a1 grad v, grad phi) + (a2 . grad v, phi) + (a3 v, grad phi) + (a4 v, phi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaCoefficients {
    pub a1: Mat2,
    pub a2: [Complex64; 2],
    pub a3: [Complex64; 2],
    pub a4: Complex64,
}

impl AlphaCoefficients {
    pub fn interior(k: f64) -> Self {
        let z = Complex64::new(0.0, 0.0);
        AlphaCoefficients { a1: [[1.0, 0.0], [0.0, 1.0]], a2: [z, z], a3: [z, z], a4: Complex64::new(-k * k, 0.0) }
    }

    /// Integrand of the form for trial value/gradient `(v, gv)` and test value/gradient `(p, gp)`.
    pub fn integrand(&self, v: Complex64, gv: [Complex64; 2], p: Complex64, gp: [Complex64; 2]) -> Complex64 {
        let mut s = Complex64::new(0.0, 0.0);
        for i in 0..2 {
            for j in 0..2 {
                s += self.a1[i][j] * gv[j] * gp[i];
            }
            s += self.a2[i] * gv[i] * p + self.a3[i] * v * gp[i];
        }
        s + self.a4 * v * p
    }
}

/// Coefficients of the weak form for `v = u exp(-ik(tau - a))` at a computational point.
///
/// The form is `B(w v, w phi)` with test weight `r / tau`; all terms are bounded in the layer.
pub fn fem_alpha_coefficients(map: &RectangularMap, k: f64, x: f64, y: f64) -> AlphaCoefficients {
    if !map.in_layer(x, y) {
        return AlphaCoefficients::interior(k);
    }
    let p = map.layer_point(x, y);
    let t0 = map.tau0;
    let rot = rotation(p.theta);
    let coeffs = map.coefficients(x, y);
    let g = p.r * p.inv_tau;
    let a1 = [[g * coeffs.c[0][0], g * coeffs.c[0][1]], [g * coeffs.c[1][0], g * coeffs.c[1][1]]];

    let ik = Complex64::new(0.0, k);
    let c_grad_g = [
        Complex64::from(((1.0 + p.q * p.q) / (p.r * t0) - 1.0) * p.inv_tau),
        Complex64::from(-p.q * p.inv_tau),
    ];
    let g_c_grad_phase =
        [Complex64::from(1.0 + p.q * p.da * p.inv_tau), Complex64::from(-t0 * p.r * p.da * p.inv_tau)];
    let a2 = rotate_vec(&rot, [c_grad_g[0] - ik * g_c_grad_phase[0], c_grad_g[1] - ik * g_c_grad_phase[1]]);
    let a3 = rotate_vec(&rot, [ik * g_c_grad_phase[0], ik * g_c_grad_phase[1]]);
    let a4 = Complex64::from(k * k * t0 * p.da * p.da * p.inv_tau)
        + ik * ((1.0 - t0 * p.r) / p.r + p.q * p.da * p.inv_tau / p.r);
    AlphaCoefficients { a1, a2, a3, a4 }
}
