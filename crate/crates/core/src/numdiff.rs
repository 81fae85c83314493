//! Central differences with one Richardson level.

use log::warn;
use num_complex::Complex64 as C64;

pub const DEFAULT_STEP: f64 = 1e-4;

/// Step scaled by coordinate magnitude.
pub fn scaled_step(x: f64, base: f64) -> f64 {
    base * x.abs().max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivative {
    pub value: C64,
    /// Size of the Richardson correction `|D(h/2) - D(h)| / 3`.
    pub correction: f64,
    /// Rounding-noise estimate `ε |g| / h`.
    pub noise: f64,
}

/// `g'(0)` along a real direction; `R = (4 D(h/2) - D(h)) / 3`.
pub fn richardson(mut g: impl FnMut(f64) -> C64, h: f64) -> Derivative {
    let d = |g: &mut dyn FnMut(f64) -> C64, s: f64| (g(s) - g(-s)) / (2.0 * s);
    let coarse = d(&mut g, h);
    let fine = d(&mut g, h / 2.0);
    let value = (4.0 * fine - coarse) / 3.0;
    let magnitude = g(0.0).norm().max(value.norm() * h);
    Derivative {
        value,
        correction: (fine - coarse).norm() / 3.0,
        noise: f64::EPSILON * magnitude / h,
    }
}

/// [`richardson`] that logs when the estimate looks dominated by rounding.
pub fn richardson_checked(g: impl FnMut(f64) -> C64, h: f64) -> C64 {
    let d = richardson(g, h);
    if d.correction > 1e-3 * d.value.norm().max(1e-300) && d.correction < 10.0 * d.noise {
        warn!(
            "finite-difference step {h:e} looks too small: correction {:e} is at the noise floor {:e}",
            d.correction, d.noise
        );
    }
    d.value
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_derivative() {
        let x0 = 0.7_f64;
        let d = richardson(
            |s| C64::new((x0 + s).exp(), 0.0),
            scaled_step(x0, DEFAULT_STEP),
        );
        assert!((d.value.re - x0.exp()).abs() < 1e-10);
        assert!(d.correction < 1e-9);
    }

    #[test]
    fn holomorphic_direction() {
        let z0 = C64::new(0.3, -1.2);
        let v = richardson_checked(|s| (z0 + s).powu(3), 1e-4);
        assert!((v - 3.0 * z0 * z0).norm() < 1e-10);
    }
}
