//! Energy densities and the exactly integrated discrete ribbon energy.
//!
//! The elastic density splits into quadratic parts and a nonquadratic
//! remainder psi handled through a regularized modulus: with
//! q(a, b) the density in curvature a = |y''| and torsion b = |b'|,
//!
//!   q_delta(a, b) = (1/2) a^2 + (5/2) b^2 + (1/2) psi_delta(a^2, b^2),
//!
//! which for delta = 0 coincides with the piecewise density
//! (a^2+b^2)^2/a^2 (curvature dominant) / 4 b^2 (torsion dominant).
//! The discrete energy evaluates every term with quadrature that is exact
//! for the integrand: elementwise averages for the psi and second penalty
//! terms, trapezoidal node weights for the first penalty term.

use crate::error::{Error, Result};
use crate::frames::FrameState;
use crate::vec3;

/// Regularization and penalty parameters. `delta = 0` is admissible for
/// energy evaluation only; the gradient flow requires `delta > 0`.
#[derive(Debug, Clone, Copy)]
pub struct RegParams {
    pub delta: f64,
    pub eps1: f64,
    pub eps2: f64,
}

impl RegParams {
    pub fn new(delta: f64, eps1: f64, eps2: f64) -> Result<Self> {
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "delta must be >= 0, got {delta}"
            )));
        }
        if !(eps1 > 0.0) || !(eps2 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "penalty parameters must be positive, got eps1 = {eps1}, eps2 = {eps2}"
            )));
        }
        Ok(RegParams { delta, eps1, eps2 })
    }
}

/// Corrected piecewise energy density:
/// (a^2 + b^2)^2 / a^2 where curvature dominates, 4 b^2 where torsion does.
/// Continuous and C^1 across a = b; the torsion branch removes the
/// singularity of the classical density at vanishing curvature.
pub fn q_bar(alpha: f64, beta: f64) -> f64 {
    debug_assert!(alpha >= 0.0 && beta >= 0.0);
    if alpha >= beta {
        let s = alpha * alpha + beta * beta;
        if alpha == 0.0 {
            0.0
        } else {
            s * s / (alpha * alpha)
        }
    } else {
        4.0 * beta * beta
    }
}

/// Gradient of `q_bar` on the closed positive quadrant; (0, 0) maps to zero.
pub fn q_bar_grad(alpha: f64, beta: f64) -> [f64; 2] {
    debug_assert!(alpha >= 0.0 && beta >= 0.0);
    if alpha >= beta {
        if alpha == 0.0 {
            return [0.0, 0.0];
        }
        let a2 = alpha * alpha;
        let b2 = beta * beta;
        [
            2.0 * alpha - 2.0 * b2 * b2 / (a2 * alpha),
            4.0 * beta + 4.0 * b2 * beta / a2,
        ]
    } else {
        [0.0, 8.0 * beta]
    }
}

/// Regularized modulus sqrt(x^2 + delta^2) with its first two derivatives.
/// Satisfies value >= delta, |sigma| <= 1, curvature <= 1/delta and
/// |value - |x|| <= delta. At x = delta = 0 the second derivative is
/// undefined and reported as NaN; only the flow (which requires delta > 0)
/// consumes it.
#[derive(Debug, Clone, Copy)]
pub struct ModDelta {
    pub value: f64,
    pub sigma: f64,
    pub curvature: f64,
}

pub fn mod_delta(x: f64, delta: f64) -> ModDelta {
    debug_assert!(delta >= 0.0);
    let value = x.hypot(delta);
    if value == 0.0 {
        return ModDelta {
            value: 0.0,
            sigma: 0.0,
            curvature: f64::NAN,
        };
    }
    ModDelta {
        value,
        sigma: x / value,
        curvature: delta * delta / (value * value * value),
    }
}

/// Regularized energy density; coincides with `q_bar` at delta = 0.
pub fn q_bar_delta(alpha: f64, beta: f64, delta: f64) -> f64 {
    debug_assert!(alpha >= 0.0 && beta >= 0.0 && delta >= 0.0);
    let a2 = alpha * alpha;
    let b2 = beta * beta;
    let m = mod_delta(a2 - b2, delta).value;
    let quadratic = 2.0 * b2 + 0.5 * a2 + 0.5 * b2 + 0.5 * m;
    let rational = if b2 == 0.0 {
        0.0
    } else {
        2.0 * b2 * b2 / (a2 + b2 + m)
    };
    quadratic + rational
}

/// psi_delta(r, s) = |r - s|_delta + 4 s^2 / (r + s + |r - s|_delta)
/// together with both partial derivatives (closed forms).
#[derive(Debug, Clone, Copy)]
pub struct PsiEval {
    pub value: f64,
    pub d_r: f64,
    pub d_s: f64,
}

/// Value of psi_delta for delta >= 0 (the 0/0 case at r = s = 0, delta = 0
/// is defined as 0).
pub fn psi_value(r: f64, s: f64, delta: f64) -> f64 {
    debug_assert!(r >= 0.0 && s >= 0.0 && delta >= 0.0);
    let m = mod_delta(r - s, delta).value;
    let rational = if s == 0.0 {
        0.0
    } else {
        4.0 * s * s / (r + s + m)
    };
    m + rational
}

/// psi_delta with derivatives; requires delta > 0 so the denominator is
/// bounded below by delta.
pub fn psi_delta(r: f64, s: f64, delta: f64) -> Result<PsiEval> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "psi_delta derivatives need delta > 0, got {delta}"
        )));
    }
    debug_assert!(r >= 0.0 && s >= 0.0);
    let m = mod_delta(r - s, delta);
    let den = r + s + m.value;
    let value = m.value + 4.0 * s * s / den;
    let d_r = m.sigma - 4.0 * s * s / (den * den) * (1.0 + m.sigma);
    let d_s = -m.sigma + 8.0 * s / den - 4.0 * s * s / (den * den) * (1.0 - m.sigma);
    Ok(PsiEval { value, d_r, d_s })
}

/// Componentwise breakdown of the discrete energy. `total` is the exact sum
/// of the five components; the figure quantities (pure bending and twist
/// energies, both with weight 1/2) are derived views.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBreakdown {
    /// (1/2) int |y''|^2
    pub bend: f64,
    /// (5/2) int |b'|^2
    pub twist: f64,
    /// (1/2) int psi_delta(|A_h y''|^2, |b'|^2)
    pub psi: f64,
    /// 1/(2 eps1) int I_h[(y'.b)^2]
    pub penalty1: f64,
    /// 1/(2 eps2) int (M_h y'.b')^2
    pub penalty2: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    /// E_bend = (1/2) int |y''|^2, as reported in the energy traces.
    pub fn pure_bend(&self) -> f64 {
        self.bend
    }

    /// E_twist = (1/2) int |b'|^2.
    pub fn pure_twist(&self) -> f64 {
        self.twist / 5.0
    }
}

/// Per-element curvature/torsion data of a state: (|A_h y''|, |b'|) and
/// whether torsion dominates curvature on the element.
#[derive(Debug, Clone, Copy)]
pub struct ElementProfile {
    pub curvature: f64,
    pub torsion: f64,
    pub torsion_dominant: bool,
}

pub fn element_profile(state: &FrameState, e: usize) -> Result<ElementProfile> {
    let curvature = vec3::norm(state.y.element_avg_second_derivative(e)?);
    let torsion = vec3::norm(state.b.element_derivative(e)?);
    Ok(ElementProfile {
        curvature,
        torsion,
        torsion_dominant: torsion > curvature,
    })
}

/// Pure bending and twist energies ((1/2) int |y''|^2, (1/2) int |b'|^2),
/// both integrated exactly (2-point Gauss for the piecewise quadratic
/// |y''|^2, elementwise constants for |b'|^2).
pub fn bend_twist(state: &FrameState) -> (f64, f64) {
    let mesh = state.mesh();
    let mut bend = 0.0;
    let mut twist = 0.0;
    for e in 0..mesh.element_count() {
        let h = mesh.element_size(e);
        let a = mesh.node(e);
        bend +=
            crate::quadrature::integrate(a, a + h, 2, |x| vec3::norm2(state.y.eval(x, 2).unwrap()));
        twist += h * vec3::norm2(state.b.element_derivative(e).unwrap());
    }
    (0.5 * bend, 0.5 * twist)
}

/// The exactly integrated discrete energy with full component breakdown.
pub fn energy_quad(state: &FrameState, params: &RegParams) -> EnergyBreakdown {
    let mesh = state.mesh();
    let weights = mesh.node_weights();

    let (pure_bend, pure_twist) = bend_twist(state);
    let bend = pure_bend;
    let twist = 5.0 * pure_twist;

    let mut psi = 0.0;
    let mut penalty2 = 0.0;
    for e in 0..mesh.element_count() {
        let h = mesh.element_size(e);
        let avg_curv = state.y.element_avg_second_derivative(e).unwrap();
        let torsion = state.b.element_derivative(e).unwrap();
        psi += 0.5 * h * psi_value(vec3::norm2(avg_curv), vec3::norm2(torsion), params.delta);
        let m = state.y.element_nodal_avg_first_derivative(e).unwrap();
        let p = vec3::dot(m, torsion);
        penalty2 += 0.5 / params.eps2 * h * p * p;
    }

    let mut penalty1 = 0.0;
    for j in 0..mesh.node_count() {
        let q = vec3::dot(state.y.node_derivative(j), state.b.node_value(j));
        penalty1 += 0.5 / params.eps1 * weights[j] * q * q;
    }

    let total = bend + twist + psi + penalty1 + penalty2;
    EnergyBreakdown {
        bend,
        twist,
        psi,
        penalty1,
        penalty2,
        total,
    }
}
