//! Dense complex polynomials in ascending coefficient order.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub fn eval(coeffs: &[C64], z: C64) -> C64 {
    coeffs
        .iter()
        .rev()
        .fold(C64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

pub fn derivative(coeffs: &[C64]) -> Vec<C64> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &c)| c * k as f64)
        .collect()
}

/// Degree ignoring exact trailing zeros; the zero polynomial has degree 0.
pub fn degree(coeffs: &[C64]) -> usize {
    coeffs.iter().rposition(|c| c.norm() != 0.0).unwrap_or(0)
}

pub fn trim(mut coeffs: Vec<C64>) -> Vec<C64> {
    while coeffs.len() > 1 && coeffs.last().is_some_and(|c| c.norm() == 0.0) {
        coeffs.pop();
    }
    coeffs
}

/// Monic polynomial `Π (z - r_k)`.
pub fn from_roots(roots: &[C64]) -> Vec<C64> {
    let mut out = vec![C64::new(1.0, 0.0)];
    for &r in roots {
        let mut next = vec![C64::new(0.0, 0.0); out.len() + 1];
        for (k, &c) in out.iter().enumerate() {
            next[k + 1] += c;
            next[k] -= c * r;
        }
        out = next;
    }
    out
}

pub fn mul(a: &[C64], b: &[C64]) -> Vec<C64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![C64::new(0.0, 0.0); a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// All complex roots by Aberth–Ehrlich iteration followed by Newton polishing.
pub fn roots(coeffs: &[C64]) -> Result<Vec<C64>> {
    let coeffs = trim(coeffs.to_vec());
    let n = degree(&coeffs);
    if n == 0 {
        return Ok(Vec::new());
    }
    let lead = coeffs[n];
    let monic: Vec<C64> = coeffs[..=n].iter().map(|&c| c / lead).collect();
    let dmonic = derivative(&monic);

    // Cauchy bound for the initial circle.
    let bound = 1.0 + monic[..n].iter().map(|c| c.norm()).fold(0.0_f64, f64::max);
    let mut z: Vec<C64> = (0..n)
        .map(|k| {
            let theta = 2.0 * std::f64::consts::PI * (k as f64 + 0.25) / n as f64;
            C64::from_polar(0.5 * bound, theta + 0.4)
        })
        .collect();

    let mut converged = false;
    for _ in 0..500 {
        let mut max_step = 0.0_f64;
        for i in 0..n {
            let p = eval(&monic, z[i]);
            let dp = eval(&dmonic, z[i]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let repulsion: C64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| C64::new(1.0, 0.0) / (z[i] - z[j]))
                .sum();
            let step = ratio / (C64::new(1.0, 0.0) - ratio * repulsion);
            if step.is_finite() {
                z[i] -= step;
                max_step = max_step.max(step.norm() / (1.0 + z[i].norm()));
            }
        }
        if max_step < 1e-15 {
            converged = true;
            break;
        }
    }
    if !converged && z.iter().any(|r| !r.is_finite()) {
        return Err(Error::RootFinding(format!(
            "Aberth iteration diverged for degree {n}"
        )));
    }
    for r in z.iter_mut() {
        for _ in 0..3 {
            let dp = eval(&dmonic, *r);
            if dp.norm() == 0.0 {
                break;
            }
            let step = eval(&monic, *r) / dp;
            if !step.is_finite() {
                break;
            }
            *r -= step;
        }
    }
    Ok(z)
}

/// Real polynomial helpers used by the string solver.
pub mod real {
    pub fn eval(coeffs: &[f64], x: f64) -> f64 {
        coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn add_scaled(a: &[f64], b: &[f64], scale: f64) -> Vec<f64> {
        let len = a.len().max(b.len());
        (0..len)
            .map(|k| a.get(k).copied().unwrap_or(0.0) + scale * b.get(k).copied().unwrap_or(0.0))
            .collect()
    }

    /// `x * p(x)`
    pub fn shift(p: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(p.len() + 1);
        out.push(0.0);
        out.extend_from_slice(p);
        out
    }

    pub fn trim(mut p: Vec<f64>) -> Vec<f64> {
        while p.len() > 1 && p.last().is_some_and(|&c| c == 0.0) {
            p.pop();
        }
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn roots_of_product_are_recovered() {
        let want = [c(0.0), c(2.0), C64::new(-1.0, 0.5), c(-3.0)];
        let p = from_roots(&want);
        let mut got = roots(&p).unwrap();
        for w in want {
            let (idx, dist) = got
                .iter()
                .enumerate()
                .map(|(i, g)| (i, (g - w).norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            assert!(dist < 1e-12, "root {w} missed by {dist}");
            got.remove(idx);
        }
    }

    #[test]
    fn derivative_and_eval() {
        // 1 + 2z + 3z^2
        let p = [c(1.0), c(2.0), c(3.0)];
        assert_eq!(eval(&p, c(2.0)), c(17.0));
        assert_eq!(derivative(&p), vec![c(2.0), c(6.0)]);
    }
}
