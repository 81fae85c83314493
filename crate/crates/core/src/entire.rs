//! The bracket parameter `f`: an entire function given either by polynomial
//! coefficients or by an analytic sampler.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::poly;

pub type Sampler = Arc<dyn Fn(C64) -> C64 + Send + Sync>;

#[derive(Clone)]
pub enum EntireFunction {
    /// Ascending coefficients.
    Polynomial { coeffs: Vec<C64>, label: String },
    /// Must be analytic on a disc containing every pole and evaluation point;
    /// this is a caller contract and is not checked.
    Sampler { sampler: Sampler, label: String },
}

impl fmt::Debug for EntireFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Polynomial { coeffs, label } => f
                .debug_struct("Polynomial")
                .field("label", label)
                .field("coeffs", coeffs)
                .finish(),
            Self::Sampler { label, .. } => f.debug_struct("Sampler").field("label", label).finish(),
        }
    }
}

impl EntireFunction {
    pub fn polynomial(coeffs: Vec<C64>, label: impl Into<String>) -> Self {
        Self::Polynomial {
            coeffs,
            label: label.into(),
        }
    }

    pub fn sampler(
        f: impl Fn(C64) -> C64 + Send + Sync + 'static,
        label: impl Into<String>,
    ) -> Self {
        Self::Sampler {
            sampler: Arc::new(f),
            label: label.into(),
        }
    }

    pub fn zero() -> Self {
        Self::polynomial(vec![C64::new(0.0, 0.0)], "0")
    }

    pub fn one() -> Self {
        Self::polynomial(vec![C64::new(1.0, 0.0)], "1")
    }

    pub fn z() -> Self {
        Self::monomial(1)
    }

    pub fn z_squared() -> Self {
        Self::monomial(2)
    }

    pub fn monomial(degree: usize) -> Self {
        let mut coeffs = vec![C64::new(0.0, 0.0); degree + 1];
        coeffs[degree] = C64::new(1.0, 0.0);
        let label = match degree {
            0 => "1".to_string(),
            1 => "z".to_string(),
            d => format!("z^{d}"),
        };
        Self::polynomial(coeffs, label)
    }

    pub fn exp() -> Self {
        Self::sampler(|z: C64| z.exp(), "exp")
    }

    /// Parses `0`, `1`, `z`, `z^n`, `exp`, or `poly:c0,c1,...` (real coefficients).
    pub fn parse(label: &str) -> Result<Self> {
        let label = label.trim();
        match label {
            "0" => return Ok(Self::zero()),
            "1" => return Ok(Self::one()),
            "z" => return Ok(Self::z()),
            "exp" => return Ok(Self::exp()),
            _ => {}
        }
        if let Some(power) = label.strip_prefix("z^") {
            let d: usize = power
                .parse()
                .map_err(|_| Error::InvalidInput(format!("bad monomial '{label}'")))?;
            return Ok(Self::monomial(d));
        }
        if let Some(list) = label.strip_prefix("poly:") {
            let coeffs = list
                .split(',')
                .map(|s| s.trim().parse::<f64>().map(|x| C64::new(x, 0.0)))
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::InvalidInput(format!("bad coefficients '{label}'")))?;
            return Ok(Self::polynomial(coeffs, label));
        }
        Err(Error::InvalidInput(format!(
            "unknown entire function '{label}'"
        )))
    }

    pub fn label(&self) -> &str {
        match self {
            Self::Polynomial { label, .. } | Self::Sampler { label, .. } => label,
        }
    }

    pub fn eval(&self, z: C64) -> C64 {
        match self {
            Self::Polynomial { coeffs, .. } => poly::eval(coeffs, z),
            Self::Sampler { sampler, .. } => sampler(z),
        }
    }

    pub fn coefficients(&self) -> Option<&[C64]> {
        match self {
            Self::Polynomial { coeffs, .. } => Some(coeffs),
            Self::Sampler { .. } => None,
        }
    }

    pub fn is_polynomial(&self) -> bool {
        matches!(self, Self::Polynomial { .. })
    }

    /// `a·self + b·other`; stays polynomial when both are.
    pub fn combine(&self, a: C64, other: &Self, b: C64) -> Self {
        let label = format!("({a})*{} + ({b})*{}", self.label(), other.label());
        match (self.coefficients(), other.coefficients()) {
            (Some(p), Some(q)) => {
                let len = p.len().max(q.len());
                let zero = C64::new(0.0, 0.0);
                let coeffs = (0..len)
                    .map(|k| {
                        a * p.get(k).copied().unwrap_or(zero)
                            + b * q.get(k).copied().unwrap_or(zero)
                    })
                    .collect();
                Self::polynomial(coeffs, label)
            }
            _ => {
                let (f, g) = (self.clone(), other.clone());
                Self::sampler(move |z| a * f.eval(z) + b * g.eval(z), label)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_labels() {
        let z = C64::new(2.0, 1.0);
        assert_eq!(
            EntireFunction::parse("1").unwrap().eval(z),
            C64::new(1.0, 0.0)
        );
        assert_eq!(EntireFunction::parse("z").unwrap().eval(z), z);
        assert_eq!(EntireFunction::parse("z^2").unwrap().eval(z), z * z);
        assert_eq!(EntireFunction::parse("exp").unwrap().eval(z), z.exp());
        assert_eq!(
            EntireFunction::parse("poly:1,0,3").unwrap().eval(z),
            C64::new(1.0, 0.0) + 3.0 * z * z
        );
        assert!(EntireFunction::parse("sin").is_err());
        assert!(!EntireFunction::exp().is_polynomial());
    }

    #[test]
    fn combination_is_linear() {
        let z = C64::new(-0.3, 0.8);
        let a = C64::new(0.3, 0.0);
        let sum =
            EntireFunction::z_squared().combine(a, &EntireFunction::one(), C64::new(1.0, 0.0));
        assert!(sum.is_polynomial());
        assert!((sum.eval(z) - (a * z * z + 1.0)).norm() < 1e-15);
        let mixed = EntireFunction::exp().combine(a, &EntireFunction::z(), a);
        assert!((mixed.eval(z) - a * (z.exp() + z)).norm() < 1e-15);
    }
}
