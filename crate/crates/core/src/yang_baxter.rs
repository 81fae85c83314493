//! Quadratic Poisson algebras of `S` and `Δ` for `f = 1` and `f = z`, and the
//! first Laurent extension needed when `f = z²`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::canonical::{structure_tensor, validate_point, Observable};
use crate::contour::{closed_form_rational, closed_form_trigonometric};
use crate::entire::EntireFunction;
use crate::error::{Error, Result};
use crate::rational::RationalFunction;
use crate::report::{fold_max, Check};

pub type QuadraticAlgebraReport = Check;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

fn rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / 1f64.max(a.norm()).max(b.norm())
}

/// Which right-hand side to use for `{S(q), Δ(p)}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Rational,
    /// The `((q+p)/2) S(q)Δ(p) - p S(p)Δ(q)` form.
    TrigonometricHalf,
    /// The `q S(q)Δ(p) - p S(p)Δ(q)` form.
    Trigonometric,
}

impl Family {
    pub fn f(self) -> EntireFunction {
        match self {
            Self::Rational => EntireFunction::one(),
            Self::TrigonometricHalf | Self::Trigonometric => EntireFunction::z(),
        }
    }

    /// Right-hand side of `{S(q), Δ(p)}` from values `S(q), S(p), Δ(q), Δ(p)`.
    pub fn s_delta(self, p: C64, q: C64, sq: C64, sp: C64, dq: C64, dp: C64) -> C64 {
        match self {
            Self::Rational => (sq * dp - sp * dq) / (q - p),
            Self::TrigonometricHalf => ((q + p) / 2.0 * sq * dp - p * sp * dq) / (q - p),
            Self::Trigonometric => (q * sq * dp - p * sp * dq) / (q - p),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Self::Rational => "rational",
            Self::TrigonometricHalf => "trigonometric",
            Self::Trigonometric => "trigonometric_qp",
        }
    }
}

/// `[{S,S} and {Δ,Δ} vanish, {S(q),Δ(p)} relation]` over the sample pairs.
pub fn verify_family(
    family: Family,
    z: &[C64],
    rho: &[C64],
    points: &[(C64, C64)],
    tolerance: f64,
) -> Result<[QuadraticAlgebraReport; 2]> {
    let f = family.f();
    let tensor = structure_tensor(&f, z, rho)?;
    let mut commuting = 0.0;
    let mut relation = 0.0;
    for &(p, q) in points {
        let (s_p, s_q) = (Observable::s_at(p), Observable::s_at(q));
        let (d_p, d_q) = (Observable::delta_at(p), Observable::delta_at(q));
        let gs_p = s_p.gradient(z, rho);
        let gs_q = s_q.gradient(z, rho);
        let gd_p = d_p.gradient(z, rho);
        let gd_q = d_q.gradient(z, rho);
        let ss = tensor.contract(&gs_q, &gs_p);
        let dd = tensor.contract(&gd_q, &gd_p);
        let scale = 1f64.max(s_p.value(z, rho).norm() * s_q.value(z, rho).norm());
        commuting = fold_max(commuting, ss.norm() / scale);
        commuting = fold_max(commuting, dd.norm());
        let lhs = tensor.contract(&gs_q, &gd_p);
        let rhs = family.s_delta(
            p,
            q,
            s_q.value(z, rho),
            s_p.value(z, rho),
            d_q.value(z, rho),
            d_p.value(z, rho),
        );
        relation = fold_max(relation, rel(lhs, rhs));
    }
    Ok([
        Check::new(
            format!("{}_commuting", family.name()),
            commuting,
            tolerance,
            points.len(),
        ),
        Check::new(
            format!("{}_s_delta", family.name()),
            relation,
            tolerance,
            points.len(),
        ),
    ])
}

pub fn verify_rational_yb(
    z: &[C64],
    rho: &[C64],
    points: &[(C64, C64)],
    tolerance: f64,
) -> Result<[QuadraticAlgebraReport; 2]> {
    verify_family(Family::Rational, z, rho, points, tolerance)
}

pub fn verify_trigonometric_yb(
    z: &[C64],
    rho: &[C64],
    points: &[(C64, C64)],
    tolerance: f64,
) -> Result<[QuadraticAlgebraReport; 2]> {
    verify_family(Family::TrigonometricHalf, z, rho, points, tolerance)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonclosureReport {
    /// `{χ(q), c₀} = q²χ² + (c₀ q + c₁) χ`.
    pub identity: QuadraticAlgebraReport,
    /// Largest relative `|{χ(q), c₀}|`; positive values refute closure.
    pub closure_violation: QuadraticAlgebraReport,
}

/// The `f = z²` bracket of χ with `c₀ = Σ ρ_k`, against the extension identity.
pub fn zsq_nonclosure(
    z: &[C64],
    rho: &[C64],
    points: &[C64],
    tolerance: f64,
    witness_threshold: f64,
) -> Result<NonclosureReport> {
    let tensor = structure_tensor(&EntireFunction::z_squared(), z, rho)?;
    let c0_obs = Observable::laurent(0);
    let g_c0 = c0_obs.gradient(z, rho);
    let c0 = c0_obs.value(z, rho);
    let c1 = Observable::laurent(1).value(z, rho);
    let mut identity = 0.0;
    let mut violation = 0.0;
    for &q in points {
        let chi = Observable::chi_at(q);
        let x = chi.value(z, rho);
        let lhs = tensor.contract(&chi.gradient(z, rho), &g_c0);
        let rhs = q * q * x * x + (c0 * q + c1) * x;
        identity = fold_max(identity, rel(lhs, rhs));
        violation = fold_max(
            violation,
            lhs.norm() / 1f64.max(x.norm() * x.norm() * q.norm() * q.norm()),
        );
    }
    Ok(NonclosureReport {
        identity: Check::new("zsq_c0_identity", identity, tolerance, points.len()),
        closure_violation: Check::at_least(
            "zsq_nonclosure_witness",
            violation,
            witness_threshold,
            points.len(),
        ),
    })
}

/// Lagrange basis values `L_i(x)` on `nodes`.
fn lagrange(nodes: &[C64], x: C64) -> Vec<C64> {
    (0..nodes.len())
        .map(|i| {
            nodes
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &xj)| (x - xj) / (nodes[i] - xj))
                .product()
        })
        .collect()
}

/// Recovers `X(a, b) = {S(a), Δ(b)}` from the closed χ-bracket alone, using
/// `{S,S} = {Δ,Δ} = 0` and the product rule on `χ = S/Δ`:
/// `{χ(p),χ(q)} = -S(q) X(p,q) / (Δ(p)Δ(q)²) + S(p) X(q,p) / (Δ(p)²Δ(q))`.
/// `X` has degree `N-1` in each variable; it is fitted by least squares on
/// `fit_points` and compared with the family relation on `test_points`.
pub fn implication_check(
    z: &[C64],
    rho: &[C64],
    family: Family,
    fit_points: &[(C64, C64)],
    test_points: &[(C64, C64)],
    tolerance: f64,
) -> Result<QuadraticAlgebraReport> {
    validate_point(z, rho)?;
    let n = z.len();
    let name = format!("{}_implication", family.name());
    if n == 0 {
        return Ok(Check::new(name, 0.0, tolerance, test_points.len()));
    }
    let unknowns = n * n;
    if fit_points.len() < unknowns {
        return Err(Error::InvalidInput(format!(
            "implication fit needs at least {unknowns} point pairs, got {}",
            fit_points.len()
        )));
    }
    let chi = RationalFunction::new(ZERO, z.to_vec(), rho.to_vec())?;
    let closed = |p: C64, q: C64| -> Result<C64> {
        Ok(match family {
            Family::Rational => closed_form_rational(&chi, p, q)?.value,
            Family::TrigonometricHalf | Family::Trigonometric => {
                closed_form_trigonometric(&chi, p, q)?.value
            }
        })
    };
    let s = |x: C64| Observable::s_at(x).value(z, rho);
    let d = |x: C64| Observable::delta_at(x).value(z, rho);

    // interpolation nodes on a circle around the pole cloud
    let centre: C64 = z.iter().sum::<C64>() / n as f64;
    let spread = z.iter().map(|&zk| (zk - centre).norm()).fold(0.0, f64::max);
    let nodes: Vec<C64> = (0..n)
        .map(|k| {
            centre
                + C64::from_polar(
                    1.0 + spread,
                    2.0 * std::f64::consts::PI * k as f64 / n as f64,
                )
        })
        .collect();

    let mut a = DMatrix::from_element(fit_points.len(), unknowns, ZERO);
    let mut rhs = DVector::from_element(fit_points.len(), ZERO);
    for (row, &(p, q)) in fit_points.iter().enumerate() {
        let (sp, sq, dp, dq) = (s(p), s(q), d(p), d(q));
        let alpha = -sq / (dp * dq * dq);
        let beta = sp / (dp * dp * dq);
        let (lp, lq) = (lagrange(&nodes, p), lagrange(&nodes, q));
        for i in 0..n {
            for j in 0..n {
                a[(row, i * n + j)] = alpha * lp[i] * lq[j] + beta * lq[i] * lp[j];
            }
        }
        rhs[row] = closed(p, q)?;
        let scale = a
            .row(row)
            .iter()
            .map(|c| c.norm())
            .fold(rhs[row].norm(), f64::max);
        if scale > 0.0 {
            let inv = C64::new(1.0 / scale, 0.0);
            for col in 0..unknowns {
                a[(row, col)] *= inv;
            }
            rhs[row] *= inv;
        }
    }
    let coeffs = a
        .svd(true, true)
        .solve(&rhs, 1e-13)
        .map_err(|e| Error::InvalidInput(format!("implication least squares failed: {e}")))?;

    let mut defect = 0.0;
    for &(p, q) in test_points {
        // X(q, p) = {S(q), Δ(p)}
        let (lq, lp) = (lagrange(&nodes, q), lagrange(&nodes, p));
        let mut x = ZERO;
        for i in 0..n {
            for j in 0..n {
                x += coeffs[i * n + j] * lq[i] * lp[j];
            }
        }
        let want = family.s_delta(p, q, s(q), s(p), d(q), d(p));
        defect = fold_max(defect, rel(x, want));
    }
    Ok(Check::new(name, defect, tolerance, test_points.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn grid_pairs(count: usize, shift: f64) -> Vec<(C64, C64)> {
        (0..count)
            .map(|k| {
                let t = k as f64 + shift;
                (
                    C64::new(2.5 * (0.7 * t).cos(), 1.5 + (1.3 * t).sin()),
                    C64::new(-2.0 + 0.3 * (t * 0.9).sin(), -1.2 - 0.8 * (0.4 * t).cos()),
                )
            })
            .collect()
    }

    #[test]
    fn single_pole_examples() {
        let (z, rho) = ([c(1.0)], [c(1.0)]);
        let pair = [(c(0.0), c(2.0))];
        let [comm, rel] = verify_rational_yb(&z, &rho, &pair, 1e-10).unwrap();
        assert!(comm.passed && comm.max_defect == 0.0);
        assert!(rel.passed, "{rel:?}");
        let tensor = structure_tensor(&EntireFunction::z(), &z, &rho).unwrap();
        let lhs = tensor.contract(
            &Observable::s_at(c(2.0)).gradient(&z, &rho),
            &Observable::delta_at(c(0.0)).gradient(&z, &rho),
        );
        assert_eq!(lhs, c(1.0));
        // the (q+p)/2 form gives 1/2 here
        let half =
            Family::TrigonometricHalf.s_delta(c(0.0), c(2.0), c(-1.0), c(-1.0), c(1.0), c(-1.0));
        assert_eq!(half, c(0.5));
        let [_, qp] = verify_family(Family::Trigonometric, &z, &rho, &pair, 1e-12).unwrap();
        assert!(qp.passed);
    }

    #[test]
    fn relations_hold_at_random_points() {
        let z = [c(-1.1), c(-0.2), c(0.6), c(1.7)];
        let rho = [c(0.9), c(-0.4), c(1.3), c(0.5)];
        let pts = grid_pairs(40, 0.0);
        for family in [Family::Rational, Family::Trigonometric] {
            for check in verify_family(family, &z, &rho, &pts, 1e-9).unwrap() {
                assert!(check.passed, "{check:?}");
            }
        }
        let [_, half] = verify_family(Family::TrigonometricHalf, &z, &rho, &pts, 1e-9).unwrap();
        assert!(!half.passed);
    }

    #[test]
    fn zsq_identity_and_witness() {
        let z = [c(-0.7), c(0.4), c(1.5)];
        let rho = [c(0.3), c(1.1), c(-0.6)];
        let pts: Vec<C64> = grid_pairs(20, 0.5).into_iter().map(|(p, _)| p).collect();
        let r = zsq_nonclosure(&z, &rho, &pts, 1e-9, 1e-2).unwrap();
        assert!(r.identity.passed && r.closure_violation.passed, "{r:?}");
        let zero = zsq_nonclosure(&z, &[c(0.0); 3], &pts, 1e-9, 1e-2).unwrap();
        assert_eq!(zero.identity.max_defect, 0.0);
        assert!(!zero.closure_violation.passed);
    }

    #[test]
    fn implication_recovers_relation() {
        let fit = grid_pairs(30, 0.1);
        let test = grid_pairs(10, 7.3);
        let r =
            implication_check(&[c(1.0)], &[c(1.0)], Family::Rational, &fit, &test, 1e-10).unwrap();
        assert!(r.passed, "{r:?}");
        let z = [c(-0.5), c(0.8)];
        let rho = [c(1.2), c(0.7)];
        let r = implication_check(&z, &rho, Family::Trigonometric, &fit, &test, 1e-9).unwrap();
        assert!(r.passed, "{r:?}");
        let r = implication_check(&z, &rho, Family::TrigonometricHalf, &fit, &test, 1e-9).unwrap();
        assert!(!r.passed);
        let r = implication_check(&[], &[], Family::Rational, &fit, &test, 1e-9).unwrap();
        assert_eq!(r.max_defect, 0.0);
    }
}
