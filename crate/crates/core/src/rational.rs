//! Rational functions in pole–residue form.
//!
//! The stored form is `χ(z) = c∞ + Σ_k ρ_k / (z_k - z)`; the numerator/denominator
//! pair `S/Δ` is derived from it on demand. Every pole is simple.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly;

pub const DEFAULT_SEPARATION: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRational", into = "RawRational")]
pub struct RationalFunction {
    constant: C64,
    poles: Vec<C64>,
    residues: Vec<C64>,
    separation: f64,
}

#[derive(Serialize, Deserialize)]
struct RawRational {
    constant: C64,
    poles: Vec<C64>,
    residues: Vec<C64>,
}

impl TryFrom<RawRational> for RationalFunction {
    type Error = Error;

    fn try_from(raw: RawRational) -> Result<Self> {
        RationalFunction::new(raw.constant, raw.poles, raw.residues)
    }
}

impl From<RationalFunction> for RawRational {
    fn from(r: RationalFunction) -> Self {
        RawRational {
            constant: r.constant,
            poles: r.poles,
            residues: r.residues,
        }
    }
}

/// Numerator `S` and monic denominator `Δ`, ascending coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialPair {
    pub numerator: Vec<C64>,
    pub denominator: Vec<C64>,
}

impl RationalFunction {
    pub fn new(constant: C64, poles: Vec<C64>, residues: Vec<C64>) -> Result<Self> {
        Self::with_separation(constant, poles, residues, DEFAULT_SEPARATION)
    }

    pub fn with_separation(
        constant: C64,
        poles: Vec<C64>,
        residues: Vec<C64>,
        separation: f64,
    ) -> Result<Self> {
        if poles.len() != residues.len() {
            return Err(Error::LengthMismatch {
                what: "poles vs residues",
                left: poles.len(),
                right: residues.len(),
            });
        }
        for i in 0..poles.len() {
            if !poles[i].is_finite() || !residues[i].is_finite() {
                return Err(Error::InvalidInput(format!(
                    "non-finite pole or residue at {i}"
                )));
            }
            if residues[i].norm() == 0.0 {
                return Err(Error::ZeroResidue(i));
            }
            for j in 0..i {
                if (poles[i] - poles[j]).norm() <= separation {
                    return Err(Error::CoincidentPoles(j, i));
                }
            }
        }
        Ok(Self {
            constant,
            poles,
            residues,
            separation,
        })
    }

    /// Rat_N element (vanishes at infinity) from real poles and residues.
    pub fn from_real(poles: &[f64], residues: &[f64]) -> Result<Self> {
        Self::new(
            C64::new(0.0, 0.0),
            poles.iter().map(|&x| C64::new(x, 0.0)).collect(),
            residues.iter().map(|&x| C64::new(x, 0.0)).collect(),
        )
    }

    pub fn zero() -> Self {
        Self::constant(C64::new(0.0, 0.0))
    }

    pub fn constant(c: C64) -> Self {
        Self {
            constant: c,
            poles: Vec::new(),
            residues: Vec::new(),
            separation: DEFAULT_SEPARATION,
        }
    }

    pub fn constant_at_infinity(&self) -> C64 {
        self.constant
    }

    pub fn poles(&self) -> &[C64] {
        &self.poles
    }

    pub fn residues(&self) -> &[C64] {
        &self.residues
    }

    pub fn degree(&self) -> usize {
        self.poles.len()
    }

    pub fn separation(&self) -> f64 {
        self.separation
    }

    /// Same function with a different constant at infinity.
    pub fn with_constant(&self, constant: C64) -> Self {
        Self {
            constant,
            ..self.clone()
        }
    }

    pub fn eval(&self, z: C64) -> Result<C64> {
        self.check_off_poles(z)?;
        Ok(self.eval_unchecked(z))
    }

    /// Evaluation without the pole-distance check; callers guarantee `z` is off the poles.
    pub fn eval_unchecked(&self, z: C64) -> C64 {
        self.poles
            .iter()
            .zip(&self.residues)
            .fold(self.constant, |acc, (&zk, &rk)| acc + rk / (zk - z))
    }

    /// Complex derivative `χ'(z)`.
    pub fn derivative_unchecked(&self, z: C64) -> C64 {
        self.poles
            .iter()
            .zip(&self.residues)
            .map(|(&zk, &rk)| rk / ((zk - z) * (zk - z)))
            .sum()
    }

    pub fn check_off_poles(&self, z: C64) -> Result<()> {
        for &zk in &self.poles {
            if (z - zk).norm() <= self.separation {
                return Err(Error::AtPole {
                    point: z.to_string(),
                    pole: zk.to_string(),
                    tolerance: self.separation,
                });
            }
        }
        Ok(())
    }

    /// Minimum pairwise pole distance (`+inf` for fewer than two poles).
    pub fn min_separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.poles.len() {
            for j in 0..i {
                best = best.min((self.poles[i] - self.poles[j]).norm());
            }
        }
        best
    }

    /// `S/Δ` with `Δ = Π (z - z_k)` and `S(z_k) = -Δ'(z_k) ρ_k`.
    pub fn to_polynomial_pair(&self) -> Result<PolynomialPair> {
        if self.constant.norm() != 0.0 {
            return Err(Error::NonzeroConstant(self.constant.to_string()));
        }
        let n = self.poles.len();
        let denominator = poly::from_roots(&self.poles);
        if n == 0 {
            return Ok(PolynomialPair {
                numerator: vec![C64::new(0.0, 0.0)],
                denominator,
            });
        }
        // S = Σ_k -ρ_k Π_{j≠k} (z - z_j)
        let mut numerator = vec![C64::new(0.0, 0.0); n];
        for k in 0..n {
            let others: Vec<C64> = self
                .poles
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != k)
                .map(|(_, &z)| z)
                .collect();
            let basis = poly::from_roots(&others);
            for (c, b) in numerator.iter_mut().zip(basis) {
                *c -= self.residues[k] * b;
            }
        }
        Ok(PolynomialPair {
            numerator,
            denominator,
        })
    }

    /// Partial fractions of `S/Δ`: `z_k` = roots of `Δ`, `ρ_k = -S(z_k)/Δ'(z_k)`.
    pub fn from_polynomial_pair(pp: &PolynomialPair) -> Result<Self> {
        let den = poly::trim(pp.denominator.clone());
        let num = poly::trim(pp.numerator.clone());
        let n = poly::degree(&den);
        let lead = den[n];
        if (lead - C64::new(1.0, 0.0)).norm() > 1e-14 {
            return Err(Error::NotMonic(lead.to_string()));
        }
        let num_is_zero = num.iter().all(|c| c.norm() == 0.0);
        if !num_is_zero && poly::degree(&num) >= n {
            return Err(Error::ImproperFraction {
                numerator: poly::degree(&num),
                denominator: n,
            });
        }
        if n == 0 {
            return Ok(Self::zero());
        }
        let roots = poly::roots(&den)?;
        let dden = poly::derivative(&den);
        let scale = roots.iter().map(|r| r.norm()).fold(1.0_f64, f64::max);
        for i in 0..n {
            for j in 0..i {
                if (roots[i] - roots[j]).norm() <= 1e-6 * scale {
                    return Err(Error::RepeatedRoot(roots[i].to_string()));
                }
            }
        }
        let mut poles = Vec::with_capacity(n);
        let mut residues = Vec::with_capacity(n);
        for &r in &roots {
            let rho = -poly::eval(&num, r) / poly::eval(&dden, r);
            if rho.norm() <= 1e-14 * (1.0 + num.iter().map(|c| c.norm()).fold(0.0, f64::max)) {
                // S and Δ share this root; it cancels.
                continue;
            }
            poles.push(r);
            residues.push(rho);
        }
        Self::new(C64::new(0.0, 0.0), poles, residues)
    }

    /// `c_j = Σ_k ρ_k z_k^j`, so that `χ(z) = c∞ - Σ_j c_j z^{-j-1}` near infinity.
    pub fn laurent_coefficients(&self, count: usize) -> Vec<C64> {
        let mut powers = vec![C64::new(1.0, 0.0); self.poles.len()];
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            out.push(powers.iter().zip(&self.residues).map(|(p, r)| p * r).sum());
            for (p, z) in powers.iter_mut().zip(&self.poles) {
                *p *= z;
            }
        }
        out
    }

    /// Largest imaginary part among constant, poles and residues.
    pub fn max_imaginary(&self) -> f64 {
        std::iter::once(&self.constant)
            .chain(&self.poles)
            .chain(&self.residues)
            .map(|c| c.im.abs())
            .fold(0.0, f64::max)
    }
}
