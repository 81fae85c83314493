//! The bracket `{χ(p), χ(q)}_{ω^f}` as a sum of clockwise contour integrals of
//! `ω_pq^f = (1/2πi) f(z) χ(z) (χ(p) - χ(q)) dz / ((z-p)(z-q))` around the poles of χ,
//! and the same quantity from residues at `p`, `q` and infinity.

use std::f64::consts::PI;

use log::warn;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::entire::EntireFunction;
use crate::error::{Error, Result};
use crate::rational::RationalFunction;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureConfig {
    pub nodes: usize,
    pub radius_fraction: f64,
    pub tolerance: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            nodes: 256,
            radius_fraction: 0.333,
            tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    Clockwise,
    Counterclockwise,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contour {
    pub center: C64,
    pub radius: f64,
    pub orientation: Orientation,
    pub node_count: usize,
}

impl Contour {
    pub fn new(
        center: C64,
        radius: f64,
        orientation: Orientation,
        node_count: usize,
    ) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidInput(format!(
                "contour radius {radius} must be positive"
            )));
        }
        if node_count < 16 {
            return Err(Error::InvalidInput(format!(
                "contour needs at least 16 nodes, got {node_count}"
            )));
        }
        Ok(Self {
            center,
            radius,
            orientation,
            node_count,
        })
    }

    pub fn nodes(&self) -> impl Iterator<Item = C64> + '_ {
        let n = self.node_count;
        (0..n).map(move |k| {
            self.center + C64::from_polar(self.radius, 2.0 * PI * k as f64 / n as f64)
        })
    }

    /// `∮ g(z) dz` by the equispaced trapezoidal rule.
    pub fn integrate(&self, mut g: impl FnMut(C64) -> C64) -> C64 {
        let n = self.node_count as f64;
        // dz = i (z - c) dθ, dθ = 2π/n
        let ccw: C64 = self.nodes().map(|z| g(z) * (z - self.center)).sum::<C64>()
            * C64::new(0.0, 2.0 * PI / n);
        match self.orientation {
            Orientation::Counterclockwise => ccw,
            Orientation::Clockwise => -ccw,
        }
    }
}

/// Integrand of ω without the `dz/2πi` factor.
pub fn omega_integrand(
    chi: &RationalFunction,
    f: &EntireFunction,
    p: C64,
    q: C64,
    z: C64,
) -> Result<C64> {
    if p == q {
        return Ok(ZERO);
    }
    chi.check_off_poles(p)?;
    chi.check_off_poles(q)?;
    chi.check_off_poles(z)?;
    let tol = chi.separation();
    if (z - p).norm() <= tol || (z - q).norm() <= tol {
        return Err(Error::AtPole {
            point: z.to_string(),
            pole: if (z - p).norm() <= tol { p } else { q }.to_string(),
            tolerance: tol,
        });
    }
    let diff = chi.eval_unchecked(p) - chi.eval_unchecked(q);
    Ok(f.eval(z) * chi.eval_unchecked(z) * diff / ((z - p) * (z - q)))
}

/// Contours `O_m` sized at `radius_fraction` of the distance from `z_m` to the
/// nearest other pole or evaluation point.
pub fn pole_contours(
    chi: &RationalFunction,
    p: C64,
    q: C64,
    cfg: &QuadratureConfig,
) -> Result<Vec<Contour>> {
    if !(cfg.radius_fraction > 0.0 && cfg.radius_fraction < 0.5) {
        return Err(Error::ContourOverlap(format!(
            "radius_fraction {} must lie in (0, 0.5)",
            cfg.radius_fraction
        )));
    }
    let poles = chi.poles();
    poles
        .iter()
        .enumerate()
        .map(|(m, &zm)| {
            let nearest = poles
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != m)
                .map(|(_, &zj)| (zj - zm).norm())
                .chain([(p - zm).norm(), (q - zm).norm()])
                .fold(f64::INFINITY, f64::min);
            let radius = cfg.radius_fraction * nearest;
            if !(radius > chi.separation()) {
                return Err(Error::ContourOverlap(format!(
                    "no room for a contour around pole {zm} (nearest obstacle at {nearest:e})"
                )));
            }
            Contour::new(zm, radius, Orientation::Clockwise, cfg.nodes)
        })
        .collect()
}

/// `Σ_m ∮_{O_m} ω_pq^f` with clockwise circles, by trapezoidal quadrature.
pub fn bracket_contour(
    chi: &RationalFunction,
    f: &EntireFunction,
    p: C64,
    q: C64,
    cfg: &QuadratureConfig,
) -> Result<C64> {
    if p == q {
        return Ok(ZERO);
    }
    chi.check_off_poles(p)?;
    chi.check_off_poles(q)?;
    let contours = pole_contours(chi, p, q, cfg)?;
    let diff = chi.eval_unchecked(p) - chi.eval_unchecked(q);
    let total: C64 = contours
        .iter()
        .map(|c| c.integrate(|z| f.eval(z) * chi.eval_unchecked(z) / ((z - p) * (z - q))))
        .sum();
    Ok(total * diff / C64::new(0.0, 2.0 * PI))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourEstimate {
    pub value: C64,
    /// Change when the node count is doubled.
    pub doubling_delta: f64,
}

/// [`bracket_contour`] plus a node-doubling convergence estimate; logs a warning
/// when the estimate exceeds 1e-9.
pub fn bracket_contour_with_estimate(
    chi: &RationalFunction,
    f: &EntireFunction,
    p: C64,
    q: C64,
    cfg: &QuadratureConfig,
) -> Result<ContourEstimate> {
    let value = bracket_contour(chi, f, p, q, cfg)?;
    let doubled = QuadratureConfig {
        nodes: cfg.nodes * 2,
        ..*cfg
    };
    let fine = bracket_contour(chi, f, p, q, &doubled)?;
    let doubling_delta = (fine - value).norm();
    if doubling_delta > 1e-9 {
        warn!(
            "contour quadrature not converged: doubling {} nodes changed the bracket by {doubling_delta:e}",
            cfg.nodes
        );
    }
    Ok(ContourEstimate {
        value,
        doubling_delta,
    })
}

/// The same bracket from one large circle enclosing every pole but neither `p`
/// nor `q`: the clockwise sum equals minus the counterclockwise large integral.
pub fn bracket_large_contour(
    chi: &RationalFunction,
    f: &EntireFunction,
    p: C64,
    q: C64,
    contour: &Contour,
) -> Result<C64> {
    if p == q {
        return Ok(ZERO);
    }
    for &zk in chi.poles() {
        if (zk - contour.center).norm() >= contour.radius {
            return Err(Error::ContourOverlap(format!(
                "pole {zk} lies outside the large contour"
            )));
        }
    }
    for pt in [p, q] {
        if (pt - contour.center).norm() <= contour.radius {
            return Err(Error::ContourOverlap(format!(
                "point {pt} lies inside the large contour"
            )));
        }
    }
    let diff = chi.eval_unchecked(p) - chi.eval_unchecked(q);
    let ccw = Contour {
        orientation: Orientation::Counterclockwise,
        ..*contour
    };
    let integral = ccw.integrate(|z| f.eval(z) * chi.eval_unchecked(z) / ((z - p) * (z - q)));
    Ok(-integral * diff / C64::new(0.0, 2.0 * PI))
}

/// Residue of ω at infinity for polynomial `f`, from the Laurent data of χ.
///
/// With `χ = c∞ - Σ_j c_j z^{-j-1}` and `1/((z-p)(z-q)) = Σ_n h_n z^{-n-2}`,
/// `h_n = Σ_{a+b=n} p^a q^b`, the residue is minus the `z^{-1}` coefficient.
pub fn residue_at_infinity(chi: &RationalFunction, coeffs: &[C64], p: C64, q: C64) -> C64 {
    let degree = coeffs.len();
    if degree == 0 {
        return ZERO;
    }
    let laurent = chi.laurent_coefficients(degree);
    let mut h = Vec::with_capacity(degree);
    // h_n = Σ_{a=0}^n p^a q^{n-a}
    for n in 0..degree {
        let mut s = ZERO;
        let mut pa = C64::new(1.0, 0.0);
        for a in 0..=n {
            s += pa * q.powu((n - a) as u32);
            pa *= p;
        }
        h.push(s);
    }
    let c_inf = chi.constant_at_infinity();
    let mut coeff = ZERO;
    for (d, &fd) in coeffs.iter().enumerate() {
        if d == 0 || fd == ZERO {
            continue;
        }
        let mut term = c_inf * h[d - 1];
        for j in 0..d.saturating_sub(1) {
            term -= laurent[j] * h[d - 2 - j];
        }
        coeff += fd * term;
    }
    let diff = chi.eval_unchecked(p) - chi.eval_unchecked(q);
    -diff * coeff
}

/// `res_p ω + res_q ω + res_∞ ω` for polynomial `f`.
pub fn bracket_residues(chi: &RationalFunction, f: &EntireFunction, p: C64, q: C64) -> Result<C64> {
    let coeffs = f
        .coefficients()
        .ok_or_else(|| Error::NotPolynomial(f.label().to_string()))?;
    if p == q {
        return Ok(ZERO);
    }
    chi.check_off_poles(p)?;
    chi.check_off_poles(q)?;
    let (cp, cq) = (chi.eval_unchecked(p), chi.eval_unchecked(q));
    let finite = (f.eval(p) * cp - f.eval(q) * cq) / (p - q) * (cp - cq);
    Ok(finite + residue_at_infinity(chi, coeffs, p, q))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedForm {
    pub value: C64,
    /// Set when `p = q`; the value is then the antisymmetry value 0.
    pub coincident: bool,
}

fn closed_form(
    chi: &RationalFunction,
    p: C64,
    q: C64,
    rule: impl Fn(C64, C64) -> C64,
) -> Result<ClosedForm> {
    if p == q {
        return Ok(ClosedForm {
            value: ZERO,
            coincident: true,
        });
    }
    let (cp, cq) = (chi.eval(p)?, chi.eval(q)?);
    Ok(ClosedForm {
        value: rule(cp, cq),
        coincident: false,
    })
}

/// `f = 1`: `(χ(p) - χ(q))² / (p - q)`.
pub fn closed_form_rational(chi: &RationalFunction, p: C64, q: C64) -> Result<ClosedForm> {
    closed_form(chi, p, q, |cp, cq| (cp - cq) * (cp - cq) / (p - q))
}

/// `f = z`: `(pχ(p) - qχ(q)) / (p - q) · (χ(p) - χ(q))`; exact for χ vanishing at infinity.
pub fn closed_form_trigonometric(chi: &RationalFunction, p: C64, q: C64) -> Result<ClosedForm> {
    closed_form(chi, p, q, |cp, cq| (p * cp - q * cq) / (p - q) * (cp - cq))
}

/// `f = z²`: `(p²χ(p) - q²χ(q)) / (p - q) · (χ(p) - χ(q)) + c₀ (χ(p) - χ(q))`, `c₀ = Σ ρ_k`.
/// Returns the value together with `c₀`.
pub fn closed_form_zsquared(chi: &RationalFunction, p: C64, q: C64) -> Result<(ClosedForm, C64)> {
    let c0: C64 = chi.residues().iter().sum();
    let form = closed_form(chi, p, q, |cp, cq| {
        (p * p * cp - q * q * cq) / (p - q) * (cp - cq) + c0 * (cp - cq)
    })?;
    Ok((form, c0))
}
