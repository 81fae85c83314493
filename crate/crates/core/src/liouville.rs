//! The Camassa–Holm side: grid and point-mass potentials, the Helmholtz
//! inverse `R = (1 - D²)⁻¹`, the Hamiltonians `H₀..H₄`, the operators
//! `J₀ = mD + Dm` and `J₁ = D - D³`, Fréchet derivatives, the map to strings
//! `ξ = 2 tanh(x/2)`, `g = m cosh⁴(x/2)`, and the spectral cross-checks that
//! tie the grid brackets to the Weyl-function brackets.
//!
//! Grid operators act on interior points only: `D` and `D²` leave the two end
//! samples at zero, `D³` the two outermost on each side. Constants are
//! therefore annihilated exactly, and both operators are antisymmetric for
//! gradients that vanish near the ends.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::krein::{self, DiscreteString, WeylData, HALF_LENGTH};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub half_width: f64,
    pub h: f64,
    pub n_masses: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            half_width: 20.0,
            h: 1e-2,
            n_masses: 100,
        }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.half_width > 0.0 && self.half_width.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "grid half width {}",
                self.half_width
            )));
        }
        if !(self.h > 0.0 && self.h < self.half_width) {
            return Err(Error::InvalidInput(format!("grid spacing {}", self.h)));
        }
        if self.n_masses == 0 {
            return Err(Error::InvalidInput("n_masses must be positive".into()));
        }
        Ok(())
    }

    /// Number of samples on `[-X, X]`.
    pub fn len(&self) -> usize {
        (2.0 * self.half_width / self.h).round() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Samples `m_i = m(x_0 + i h) ≥ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPotential", into = "RawPotential")]
pub struct LinePotential {
    x0: f64,
    h: f64,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawPotential {
    x0: f64,
    h: f64,
    values: Vec<f64>,
}

impl TryFrom<RawPotential> for LinePotential {
    type Error = Error;
    fn try_from(raw: RawPotential) -> Result<Self> {
        Self::new(raw.x0, raw.h, raw.values)
    }
}

impl From<LinePotential> for RawPotential {
    fn from(m: LinePotential) -> Self {
        Self {
            x0: m.x0,
            h: m.h,
            values: m.values,
        }
    }
}

/// Weighted decay sums above this are treated as divergent.
const DECAY_LIMIT: f64 = 1e200;
/// Boundary samples above this fraction of the peak trigger a truncation warning.
const BOUNDARY_FRACTION: f64 = 1e-8;

thread_local! {
    /// Set while evaluating Fréchet perturbations, whose boundary samples are
    /// displaced on purpose.
    static PERTURBING: std::cell::Cell<bool> = const { std::cell::Cell::new(false) };
}

impl LinePotential {
    pub fn new(x0: f64, h: f64, values: Vec<f64>) -> Result<Self> {
        if !(h > 0.0 && h.is_finite() && x0.is_finite()) {
            return Err(Error::InvalidPotential(format!("grid x0 = {x0}, h = {h}")));
        }
        if values.len() < 5 {
            return Err(Error::InvalidPotential(format!(
                "{} samples, need at least 5",
                values.len()
            )));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= 0.0 && v.is_finite()))
        {
            return Err(Error::InvalidPotential(format!(
                "m[{i}] = {v} is not finite and nonnegative"
            )));
        }
        let m = Self { x0, h, values };
        let decay = m.decay_sum();
        if !(decay < DECAY_LIMIT) {
            return Err(Error::InvalidPotential(format!(
                "weighted decay sum {decay:e} diverges"
            )));
        }
        Ok(m)
    }

    pub fn from_fn(cfg: &GridConfig, f: impl Fn(f64) -> f64) -> Result<Self> {
        cfg.validate()?;
        let x0 = -cfg.half_width;
        let values = (0..cfg.len()).map(|i| f(x0 + i as f64 * cfg.h)).collect();
        Self::new(x0, cfg.h, values)
    }

    pub fn zero(cfg: &GridConfig) -> Result<Self> {
        Self::from_fn(cfg, |_| 0.0)
    }

    /// A copy with other samples on the same grid, skipping validation.
    pub(crate) fn with_values_unchecked(&self, values: Vec<f64>) -> Self {
        Self {
            x0: self.x0,
            h: self.h,
            values,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.h
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.x(i)).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `Σ m_i e^{|x_i|} h`.
    pub fn decay_sum(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(i, m)| m * self.x(i).abs().exp() * self.h)
            .sum()
    }

    pub fn boundary_value(&self) -> f64 {
        self.values[0].max(self.values[self.len() - 1])
    }

    pub fn peak(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Largest `|x_i|` with `m_i > threshold · max m`, or 0 for a zero potential.
    pub fn support_radius(&self, threshold: f64) -> f64 {
        let cut = threshold * self.peak();
        (0..self.len())
            .filter(|&i| self.values[i] > cut)
            .map(|i| self.x(i).abs())
            .fold(0.0, f64::max)
    }
}

/// `m = Σ c_i δ(x - x_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDelta", into = "RawDelta")]
pub struct DeltaPotential {
    positions: Vec<f64>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawDelta {
    positions: Vec<f64>,
    weights: Vec<f64>,
}

impl TryFrom<RawDelta> for DeltaPotential {
    type Error = Error;
    fn try_from(raw: RawDelta) -> Result<Self> {
        Self::new(raw.positions, raw.weights)
    }
}

impl From<DeltaPotential> for RawDelta {
    fn from(d: DeltaPotential) -> Self {
        Self {
            positions: d.positions,
            weights: d.weights,
        }
    }
}

impl DeltaPotential {
    pub fn new(positions: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if positions.len() != weights.len() {
            return Err(Error::LengthMismatch {
                what: "positions vs weights",
                left: positions.len(),
                right: weights.len(),
            });
        }
        for (j, &x) in positions.iter().enumerate() {
            if !x.is_finite() || (j > 0 && !(x > positions[j - 1])) {
                return Err(Error::InvalidPotential(format!(
                    "positions must be finite and strictly increasing (index {j})"
                )));
            }
        }
        if let Some(c) = weights.iter().find(|c| !(**c > 0.0 && c.is_finite())) {
            return Err(Error::InvalidPotential(format!(
                "weight {c} is not positive"
            )));
        }
        Ok(Self { positions, weights })
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `v(x) = (1/2) Σ c_i e^{-|x - x_i|}`.
    pub fn velocity_at(&self, x: f64) -> f64 {
        self.positions
            .iter()
            .zip(&self.weights)
            .map(|(&p, &c)| 0.5 * c * (-(x - p).abs()).exp())
            .sum()
    }

    /// One-sided slopes `(v'(x-), v'(x+))`; they differ only at a point mass.
    pub fn velocity_slopes_at(&self, x: f64) -> (f64, f64) {
        let mut left = 0.0;
        let mut right = 0.0;
        for (&p, &c) in self.positions.iter().zip(&self.weights) {
            let e = 0.5 * c * (-(x - p).abs()).exp();
            if x > p {
                left -= e;
                right -= e;
            } else if x < p {
                left += e;
                right += e;
            } else {
                left += e;
                right -= e;
            }
        }
        (left, right)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityField {
    pub x0: f64,
    pub h: f64,
    pub values: Vec<f64>,
}

impl VelocityField {
    /// `max |v - D²v - m|` over points with both neighbours.
    pub fn helmholtz_defect(&self, m: &LinePotential) -> f64 {
        let v = &self.values;
        let h2 = self.h * self.h;
        (1..v.len() - 1)
            .map(|i| (v[i] - (v[i + 1] - 2.0 * v[i] + v[i - 1]) / h2 - m.values[i]).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HelmholtzKernel {
    /// Green's function of the three-point operator `1 - δ²`: `(1 - δ²)v = m`
    /// holds to rounding at every point with two neighbours.
    #[default]
    Lattice,
    /// Trapezoidal convolution with `e^{-|x-y|}/2`; O(h²) accurate.
    Continuum,
}

/// `v_i = A Σ_k r^{|i-k|} u_k` by one forward and one backward sweep.
fn exponential_sweep(u: &[f64], r: f64, a: f64) -> Vec<f64> {
    let n = u.len();
    let mut forward = vec![0.0; n];
    let mut acc = 0.0;
    for i in 0..n {
        acc = u[i] + r * acc;
        forward[i] = acc;
    }
    let mut out = vec![0.0; n];
    acc = 0.0;
    for i in (0..n).rev() {
        acc = u[i] + r * acc;
        out[i] = a * (forward[i] + acc - u[i]);
    }
    out
}

/// Decay ratio `r < 1` of the lattice Green's function, `r + 1/r = 2 + h²`,
/// and `t = 1/r - 1`.
fn lattice_ratio(h: f64) -> (f64, f64) {
    let t = h * h / 2.0 + h * (1.0 + h * h / 4.0).sqrt();
    (1.0 / (1.0 + t), t)
}

fn helmholtz_slice(values: &[f64], h: f64, kernel: HelmholtzKernel) -> Vec<f64> {
    match kernel {
        HelmholtzKernel::Lattice => {
            let (r, t) = lattice_ratio(h);
            let a = h * h / (h * h + 2.0 * t * r);
            exponential_sweep(values, r, a)
        }
        HelmholtzKernel::Continuum => {
            let n = values.len();
            let weighted: Vec<f64> = values
                .iter()
                .enumerate()
                .map(|(i, &u)| {
                    if i == 0 || i == n - 1 {
                        0.5 * h * u
                    } else {
                        h * u
                    }
                })
                .collect();
            exponential_sweep(&weighted, (-h).exp(), 0.5)
        }
    }
}

pub fn helmholtz_inverse(m: &LinePotential) -> VelocityField {
    helmholtz_inverse_with(m, HelmholtzKernel::Lattice)
}

pub fn helmholtz_inverse_with(m: &LinePotential, kernel: HelmholtzKernel) -> VelocityField {
    if m.boundary_value() > BOUNDARY_FRACTION * m.peak() && !PERTURBING.with(|p| p.get()) {
        log::warn!(
            "potential is {:e} at the grid boundary; kernel truncation is significant",
            m.boundary_value()
        );
    }
    VelocityField {
        x0: m.x0,
        h: m.h,
        values: helmholtz_slice(&m.values, m.h, kernel),
    }
}

/// Exact `v = R[m]` sampled on a grid.
pub fn helmholtz_inverse_delta(d: &DeltaPotential, cfg: &GridConfig) -> Result<VelocityField> {
    cfg.validate()?;
    let x0 = -cfg.half_width;
    Ok(VelocityField {
        x0,
        h: cfg.h,
        values: (0..cfg.len())
            .map(|i| d.velocity_at(x0 + i as f64 * cfg.h))
            .collect(),
    })
}

/// Centred first difference.
pub fn d1(u: &[f64], h: f64) -> Vec<f64> {
    let n = u.len();
    let mut out = vec![0.0; n];
    for i in 1..n.saturating_sub(1) {
        out[i] = (u[i + 1] - u[i - 1]) / (2.0 * h);
    }
    out
}

/// Centred second difference.
pub fn d2(u: &[f64], h: f64) -> Vec<f64> {
    let n = u.len();
    let mut out = vec![0.0; n];
    for i in 1..n.saturating_sub(1) {
        out[i] = (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (h * h);
    }
    out
}

/// Centred five-point third difference, equal to `d1 ∘ d2` in the interior.
pub fn d3(u: &[f64], h: f64) -> Vec<f64> {
    let n = u.len();
    let mut out = vec![0.0; n];
    for i in 2..n.saturating_sub(2) {
        out[i] = (u[i + 2] - 2.0 * u[i + 1] + 2.0 * u[i - 1] - u[i - 2]) / (2.0 * h * h * h);
    }
    out
}

fn trapezoid(u: &[f64], h: f64) -> f64 {
    let n = u.len();
    if n == 0 {
        return 0.0;
    }
    h * (u.iter().sum::<f64>() - 0.5 * (u[0] + u[n - 1]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PdeOperator {
    J0,
    J1,
}

/// `mDg + D(mg)`.
pub fn apply_j0(m: &[f64], g: &[f64], h: f64) -> Vec<f64> {
    let dg = d1(g, h);
    let mg: Vec<f64> = m.iter().zip(g).map(|(a, b)| a * b).collect();
    let dmg = d1(&mg, h);
    (0..g.len()).map(|i| m[i] * dg[i] + dmg[i]).collect()
}

/// `Dg - D³g`.
pub fn apply_j1(g: &[f64], h: f64) -> Vec<f64> {
    let a = d1(g, h);
    let b = d3(g, h);
    a.iter().zip(&b).map(|(x, y)| x - y).collect()
}

pub fn apply_operator(op: PdeOperator, m: &LinePotential, g: &[f64]) -> Vec<f64> {
    match op {
        PdeOperator::J0 => apply_j0(&m.values, g, m.h),
        PdeOperator::J1 => apply_j1(g, m.h),
    }
}

fn check_len(m: &LinePotential, g: &[f64]) -> Result<()> {
    if g.len() != m.len() {
        return Err(Error::LengthMismatch {
            what: "gradient vs grid",
            left: g.len(),
            right: m.len(),
        });
    }
    Ok(())
}

/// `∫ a · J b dx` by the trapezoid rule.
pub fn pde_bracket(a: &[f64], b: &[f64], m: &LinePotential, op: PdeOperator) -> Result<f64> {
    pde_bracket_windowed(a, b, m, op, f64::INFINITY)
}

/// As [`pde_bracket`], integrating only over `|x| ≤ window`.
pub fn pde_bracket_windowed(
    a: &[f64],
    b: &[f64],
    m: &LinePotential,
    op: PdeOperator,
    window: f64,
) -> Result<f64> {
    check_len(m, a)?;
    check_len(m, b)?;
    let jb = apply_operator(op, m, b);
    let integrand: Vec<f64> = (0..m.len())
        .map(|i| {
            if m.x(i).abs() <= window {
                a[i] * jb[i]
            } else {
                0.0
            }
        })
        .collect();
    if window.is_infinite() {
        let n = m.len();
        let peak = integrand.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        let edge_values = [a[0], a[n - 1], b[0], b[n - 1]];
        let edge = edge_values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        let inner = a.iter().chain(b).fold(0.0_f64, |acc, v| acc.max(v.abs()));
        let leak = (0..3)
            .chain(n - 3..n)
            .fold(0.0_f64, |acc, i| acc.max(integrand[i].abs()));
        if leak > 1e-8 * peak || edge > 1e-3 * inner {
            log::warn!("{op:?} bracket: gradients do not decay at the grid boundary");
        }
    }
    Ok(trapezoid(&integrand, m.h))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hamiltonians {
    /// Undefined on point masses.
    pub h0: Option<f64>,
    pub h1: f64,
    pub h2: f64,
    pub h3: f64,
    /// With `G` read as `R`.
    pub h4: f64,
}

pub fn h0(m: &LinePotential) -> f64 {
    let root: Vec<f64> = m.values.iter().map(|v| v.max(0.0).sqrt()).collect();
    trapezoid(&root, m.h)
}

/// `h Σ v` plus the exact geometric continuation of the lattice solution past
/// both ends, so that `H₁ = h Σ m` up to rounding.
fn line_integral(v: &[f64], h: f64) -> f64 {
    let (r, t) = lattice_ratio(h);
    let tail = r / (t * r);
    h * (v.iter().sum::<f64>() + tail * (v[0] + v[v.len() - 1]))
}

pub fn h1(m: &LinePotential) -> f64 {
    line_integral(&helmholtz_inverse(m).values, m.h)
}

fn h2_of(v: &[f64], dv: &[f64], h: f64) -> f64 {
    let u: Vec<f64> = v.iter().zip(dv).map(|(a, b)| a * a + b * b).collect();
    0.5 * trapezoid(&u, h)
}

fn h3_of(v: &[f64], dv: &[f64], h: f64) -> f64 {
    let u: Vec<f64> = v.iter().zip(dv).map(|(a, b)| a * (a * a + b * b)).collect();
    2.0 * trapezoid(&u, h)
}

fn h4_of(v: &[f64], dv: &[f64], h: f64) -> f64 {
    let quartic: Vec<f64> = v
        .iter()
        .zip(dv)
        .map(|(a, b)| 0.5 * a.powi(4) + a * a * b * b)
        .collect();
    let w: Vec<f64> = v.iter().zip(dv).map(|(a, b)| a * a + 0.5 * b * b).collect();
    let rw = helmholtz_slice(&w, h, HelmholtzKernel::Lattice);
    let cross: Vec<f64> = w.iter().zip(&rw).map(|(a, b)| a * b).collect();
    trapezoid(&quartic, h) + 2.0 * trapezoid(&cross, h)
}

fn with_velocity<T>(m: &LinePotential, f: impl Fn(&[f64], &[f64], f64) -> T) -> T {
    let v = helmholtz_inverse(m).values;
    let dv = d1(&v, m.h);
    f(&v, &dv, m.h)
}

pub fn h2(m: &LinePotential) -> f64 {
    with_velocity(m, h2_of)
}

pub fn h3(m: &LinePotential) -> f64 {
    with_velocity(m, h3_of)
}

pub fn h4(m: &LinePotential) -> f64 {
    with_velocity(m, h4_of)
}

pub fn hamiltonians(m: &LinePotential) -> Hamiltonians {
    let v = helmholtz_inverse(m).values;
    let dv = d1(&v, m.h);
    Hamiltonians {
        h0: Some(h0(m)),
        h1: line_integral(&v, m.h),
        h2: h2_of(&v, &dv, m.h),
        h3: h3_of(&v, &dv, m.h),
        h4: h4_of(&v, &dv, m.h),
    }
}

/// `H₁ = Σ c_i` and `H₂ = (1/2) Σ c_i v(x_i)` exactly; `H₃`, `H₄` by quadrature
/// of the exact `v` on the grid.
pub fn hamiltonians_delta(d: &DeltaPotential, cfg: &GridConfig) -> Result<Hamiltonians> {
    let v = helmholtz_inverse_delta(d, cfg)?.values;
    let x0 = -cfg.half_width;
    // (Dv)² sampled as the mean of its one-sided limits.
    let dv: Vec<f64> = (0..v.len())
        .map(|i| {
            let (l, r) = d.velocity_slopes_at(x0 + i as f64 * cfg.h);
            (0.5 * (l * l + r * r)).sqrt()
        })
        .collect();
    Ok(Hamiltonians {
        h0: None,
        h1: d.weights.iter().sum(),
        h2: 0.5
            * d.positions
                .iter()
                .zip(&d.weights)
                .map(|(&x, &c)| c * d.velocity_at(x))
                .sum::<f64>(),
        h3: h3_of(&v, &dv, cfg.h),
        h4: h4_of(&v, &dv, cfg.h),
    })
}

/// How the Fréchet step `ε` is chosen at `x_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    Absolute(f64),
    /// `ε = fraction · m_i · h`.
    Relative(f64),
    /// `ε = base / cosh²(x_i/2)`, so the induced string mass change is `base`.
    StringMass(f64),
}

pub type GridEval = Arc<dyn Fn(&LinePotential) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct GridFunctional {
    label: String,
    eval: GridEval,
    requires_positive: bool,
    step: StepRule,
}

impl fmt::Debug for GridFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GridFunctional")
            .field("label", &self.label)
            .field("requires_positive", &self.requires_positive)
            .field("step", &self.step)
            .finish()
    }
}

const HAMILTONIAN_STEP: f64 = 1e-4;
const WEYL_STEP: f64 = 1e-6;

impl GridFunctional {
    pub fn new(
        label: impl Into<String>,
        eval: impl Fn(&LinePotential) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            eval: Arc::new(eval),
            requires_positive: false,
            step: StepRule::Absolute(HAMILTONIAN_STEP),
        }
    }

    pub fn requiring_positive(mut self) -> Self {
        self.requires_positive = true;
        self
    }

    pub fn with_step(mut self, step: StepRule) -> Self {
        self.step = step;
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eval(&self, m: &LinePotential) -> f64 {
        (self.eval)(m)
    }

    pub fn h0() -> Self {
        Self::new("H0", h0)
            .requiring_positive()
            .with_step(StepRule::Relative(1e-4))
    }

    pub fn h1() -> Self {
        Self::new("H1", h1)
    }

    pub fn h2() -> Self {
        Self::new("H2", h2)
    }

    pub fn h3() -> Self {
        Self::new("H3", h3)
    }

    pub fn h4() -> Self {
        Self::new("H4", h4)
    }

    /// `E₀(λ)` of the lumped string, by shooting.
    pub fn weyl(lambda: f64, n_masses: usize) -> Self {
        Self::new(
            format!("E0({lambda})"),
            move |m: &LinePotential| match lump_string(m, n_masses) {
                Ok((positions, masses)) => krein::shoot_weyl(&positions, &masses, lambda),
                Err(_) => f64::NAN,
            },
        )
        .with_step(StepRule::StringMass(WEYL_STEP))
    }
}

/// Central difference `[F(m + ε e_i/h) - F(m - ε e_i/h)] / (2ε)`.
pub fn variational_derivative_at(f: &GridFunctional, m: &LinePotential, i: usize) -> Result<f64> {
    if i >= m.len() {
        return Err(Error::InvalidInput(format!("grid index {i} out of range")));
    }
    let mi = m.values[i];
    let mut eps = match f.step {
        StepRule::Absolute(e) => e,
        StepRule::Relative(frac) => frac * mi * m.h,
        StepRule::StringMass(base) => base / (0.5 * m.x(i)).cosh().powi(2),
    };
    if f.requires_positive {
        if !(mi > 0.0) {
            return Err(Error::InvalidPotential(format!(
                "{} needs m > 0, but m({}) = {mi}",
                f.label,
                m.x(i)
            )));
        }
        eps = eps.min(0.5 * mi * m.h);
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidInput(format!(
            "Fréchet step {eps} at index {i}"
        )));
    }
    let mut values = m.values.clone();
    values[i] = mi + eps / m.h;
    let outer = PERTURBING.with(|p| p.replace(true));
    let plus = f.eval(&m.with_values_unchecked(values.clone()));
    values[i] = mi - eps / m.h;
    let minus = f.eval(&m.with_values_unchecked(values));
    PERTURBING.with(|p| p.set(outer));
    Ok((plus - minus) / (2.0 * eps))
}

/// The full gradient, in parallel over grid points.
pub fn variational_derivative(f: &GridFunctional, m: &LinePotential) -> Result<Vec<f64>> {
    (0..m.len())
        .into_par_iter()
        .map(|i| variational_derivative_at(f, m, i))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CasimirReport {
    /// `max |J₀[1/(2√m)]|`.
    pub j0_h0: f64,
    /// `max |J₁[1]|`.
    pub j1_h1: f64,
}

pub fn casimir_checks(m: &LinePotential) -> Result<CasimirReport> {
    if let Some(i) = m.values.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::InvalidPotential(format!(
            "Casimir check needs m > 0, but m({}) = {}",
            m.x(i),
            m.values[i]
        )));
    }
    let grad_h0: Vec<f64> = m.values.iter().map(|v| 0.5 / v.sqrt()).collect();
    let ones = vec![1.0; m.len()];
    let sup = |u: Vec<f64>| u.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    Ok(CasimirReport {
        j0_h0: sup(apply_j0(&m.values, &grad_h0, m.h)),
        j1_h1: sup(apply_j1(&ones, m.h)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiouvilleSamples {
    pub xi: Vec<f64>,
    /// `g(ξ_i) = m(x_i) cosh⁴(x_i/2)`.
    pub g: Vec<f64>,
    /// `dξ` quadrature weights `h · (1 - ξ_i²/4)` (trapezoid ends halved).
    pub weights: Vec<f64>,
}

impl LiouvilleSamples {
    pub fn total_mass(&self) -> f64 {
        self.g.iter().zip(&self.weights).map(|(g, w)| g * w).sum()
    }
}

pub fn liouville_map(m: &LinePotential) -> Result<LiouvilleSamples> {
    let n = m.len();
    let mut xi = Vec::with_capacity(n);
    let mut g = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        let x = m.x(i);
        let t = 2.0 * (0.5 * x).tanh();
        xi.push(t);
        g.push(m.values[i] * (0.5 * x).cosh().powi(4));
        let w = if i == 0 || i == n - 1 { 0.5 * m.h } else { m.h };
        weights.push(w * (1.0 - t * t / 4.0));
    }
    let out = LiouvilleSamples { xi, g, weights };
    let total = out.total_mass();
    if !total.is_finite() {
        return Err(Error::MassOverflow(format!("string mass {total}")));
    }
    Ok(out)
}

/// `∫ m cosh²(x/2) dx` by the trapezoid rule in `x`.
pub fn string_mass(m: &LinePotential) -> f64 {
    let u: Vec<f64> = (0..m.len())
        .map(|i| m.values[i] * (0.5 * m.x(i)).cosh().powi(2))
        .collect();
    trapezoid(&u, m.h)
}

/// Point masses `c_i cosh²(x_i/2)` at `ξ_i = 2 tanh(x_i/2)`.
pub fn liouville_map_points(d: &DeltaPotential) -> Result<DiscreteString> {
    let mut positions = Vec::with_capacity(d.positions.len());
    let mut masses = Vec::with_capacity(d.positions.len());
    for (&x, &c) in d.positions.iter().zip(&d.weights) {
        let xi = 2.0 * (0.5 * x).tanh();
        let mass = c * (0.5 * x).cosh().powi(2);
        if !(xi.abs() < HALF_LENGTH) || !mass.is_finite() {
            return Err(Error::MassOverflow(format!(
                "point mass at x = {x} leaves the string"
            )));
        }
        positions.push(xi);
        masses.push(mass);
    }
    DiscreteString::new(positions, masses).map_err(|e| Error::MassOverflow(e.to_string()))
}

/// Cloud-in-cell lumping of the string measure `m cosh²(x/2) dx` onto the
/// midpoints of `n_masses` equal ξ-intervals. Bins may carry zero mass.
pub fn lump_string(m: &LinePotential, n_masses: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n_masses == 0 {
        return Err(Error::InvalidInput("n_masses must be positive".into()));
    }
    let width = 2.0 * HALF_LENGTH / n_masses as f64;
    let mids: Vec<f64> = (0..n_masses)
        .map(|k| -HALF_LENGTH + width * (k as f64 + 0.5))
        .collect();
    let mut masses = vec![0.0; n_masses];
    let n = m.len();
    for i in 0..n {
        let mi = m.values[i];
        if mi == 0.0 {
            continue;
        }
        let x = m.x(i);
        let w = if i == 0 || i == n - 1 { 0.5 * m.h } else { m.h };
        let mass = mi * (0.5 * x).cosh().powi(2) * w;
        if !mass.is_finite() {
            return Err(Error::MassOverflow(format!("lumped mass at x = {x}")));
        }
        if n_masses == 1 {
            masses[0] += mass;
            continue;
        }
        let t = (2.0 * (0.5 * x).tanh() - mids[0]) / width;
        let j = (t.floor().max(0.0) as usize).min(n_masses - 2);
        let frac = (t - j as f64).clamp(0.0, 1.0);
        masses[j] += mass * (1.0 - frac);
        masses[j + 1] += mass * frac;
    }
    Ok((mids, masses))
}

/// Bins lighter than this fraction of the total are dropped from the lumped
/// string: their modes have residues below the representable range. The
/// induced change in `E₀` is far below the lumping error.
const NEGLIGIBLE_BIN: f64 = 1e-6;

pub fn lumped_string(m: &LinePotential, n_masses: usize) -> Result<DiscreteString> {
    let (mids, masses) = lump_string(m, n_masses)?;
    let cut = NEGLIGIBLE_BIN * masses.iter().sum::<f64>();
    let (positions, masses): (Vec<f64>, Vec<f64>) = mids
        .into_iter()
        .zip(masses)
        .filter(|(_, c)| *c > cut)
        .unzip();
    DiscreteString::new(positions, masses)
}

pub fn weyl_of_potential(m: &LinePotential, n_masses: usize) -> Result<WeylData> {
    krein::weyl_function(&lumped_string(m, n_masses)?)
}

/// The lowest `count` Dirichlet eigenvalues of the lumped string; available
/// even when high clustered modes make the full Weyl data unresolvable.
pub fn lowest_eigenvalues(m: &LinePotential, n_masses: usize, count: usize) -> Result<Vec<f64>> {
    let mut l = krein::dirichlet_eigenvalues(&lumped_string(m, n_masses)?)?;
    l.truncate(count);
    Ok(l)
}

pub fn weyl_of_delta(d: &DeltaPotential) -> Result<WeylData> {
    krein::weyl_function(&liouville_map_points(d)?)
}

/// A C∞ bump `0.3 e · exp(-1/(1 - (x/3)²))` on `|x| < 3`, peak 0.3.
pub fn bump_potential(x: f64) -> f64 {
    let s = x / 3.0;
    if s.abs() >= 1.0 {
        0.0
    } else {
        0.3 * std::f64::consts::E * (-1.0 / (1.0 - s * s)).exp()
    }
}

/// Sign relating the grid `J₀` bracket to `(λμ/(λ-μ))(E(λ) - E(μ))²`.
pub const ORIENTATION: f64 = -1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondBracketMode {
    /// Grid `∫ ∇E(λ) J₁ ∇E(μ)` over the whole grid.
    pub lhs: f64,
    /// The `f = z` closed form at `p = -1/λ`, `q = -1/μ`.
    pub rhs: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theorem31Result {
    pub lambda: f64,
    pub mu: f64,
    pub e_lambda: f64,
    pub e_mu: f64,
    /// Grid `∫ ∇E(λ) J₀ ∇E(μ)`.
    pub lhs: f64,
    /// `(λμ/(λ-μ))(E(λ) - E(μ))²`.
    pub rhs: f64,
    pub orientation: f64,
    /// `|orientation · lhs - rhs| / |rhs|`.
    pub rel_error: f64,
    pub j1: SecondBracketMode,
}

/// Grid `J₀` bracket of `E₀(λ)`, `E₀(μ)` against the closed formula, and the
/// `J₁` bracket against the `f = z` form. Only shooting values of the lumped
/// string enter, never its full spectral data.
pub fn verify_theorem_31(
    m: &LinePotential,
    lambda: f64,
    mu: f64,
    cfg: &GridConfig,
) -> Result<Theorem31Result> {
    if !(lambda.is_finite() && mu.is_finite()) || lambda == mu {
        return Err(Error::InvalidInput(format!(
            "need distinct finite λ, μ (got {lambda}, {mu})"
        )));
    }
    let (positions, masses) = lump_string(m, cfg.n_masses)?;
    let lumped = DiscreteString::new(
        positions
            .iter()
            .zip(&masses)
            .filter(|(_, c)| **c > 0.0)
            .map(|(x, _)| *x)
            .collect(),
        masses.iter().copied().filter(|c| *c > 0.0).collect(),
    )?;
    for &s in [lambda, mu].iter() {
        let (psi, dpsi) = lumped.psi_end(s);
        if psi.abs() <= 1e-8 * (s * dpsi).abs() {
            return Err(Error::AtPole {
                point: s.to_string(),
                pole: "Dirichlet spectrum".into(),
                tolerance: 1e-8,
            });
        }
    }
    let fl = GridFunctional::weyl(lambda, cfg.n_masses);
    let fm = GridFunctional::weyl(mu, cfg.n_masses);
    let (ga, gb) = rayon::join(
        || variational_derivative(&fl, m),
        || variational_derivative(&fm, m),
    );
    let (ga, gb) = (ga?, gb?);
    let (el, em) = (fl.eval(m), fm.eval(m));

    let lhs = pde_bracket(&ga, &gb, m, PdeOperator::J0)?;
    let rhs = lambda * mu / (lambda - mu) * (el - em).powi(2);

    let lhs1 = pde_bracket(&ga, &gb, m, PdeOperator::J1)?;
    let (p, q) = (-1.0 / lambda, -1.0 / mu);
    let rhs1 = (p * el - q * em) * (el - em) / (p - q);

    Ok(Theorem31Result {
        lambda,
        mu,
        e_lambda: el,
        e_mu: em,
        lhs,
        rhs,
        orientation: ORIENTATION,
        rel_error: relative(ORIENTATION * lhs, rhs),
        j1: SecondBracketMode {
            lhs: lhs1,
            rhs: rhs1,
            rel_error: relative(ORIENTATION * lhs1, rhs1),
        },
    })
}

fn relative(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefinementRow {
    pub level: usize,
    pub h: f64,
    pub n_masses: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub rel_error: f64,
    pub j1_rel_error: f64,
}

/// `(h, n_masses)` from coarse to the default resolution.
pub const REFINEMENT_LEVELS: [(f64, usize); 3] = [(4e-2, 25), (2e-2, 50), (1e-2, 100)];

/// Weyl-bracket check for `m` resampled at each `(h, n_masses)` level.
pub fn theorem_31_refinement(
    m: impl Fn(f64) -> f64,
    lambda: f64,
    mu: f64,
    half_width: f64,
    levels: &[(f64, usize)],
) -> Result<Vec<RefinementRow>> {
    let mut rows: Vec<RefinementRow> = Vec::with_capacity(levels.len());
    let mut previous: Option<Theorem31Result> = None;
    for (level, &(h, n_masses)) in levels.iter().enumerate() {
        let cfg = GridConfig {
            half_width,
            h,
            n_masses,
        };
        let pot = LinePotential::from_fn(&cfg, &m)?;
        let r = verify_theorem_31(&pot, lambda, mu, &cfg)?;
        if let Some(prev) = previous {
            let estimate = (r.lhs - prev.lhs).abs() / r.rhs.abs();
            if r.rel_error > 10.0 * estimate {
                log::warn!(
                    "level {level}: J0 mode error {:e} exceeds 10x the refinement estimate",
                    r.rel_error
                );
            }
            let estimate1 = (r.j1.lhs - prev.j1.lhs).abs() / r.j1.rhs.abs();
            if r.j1.rel_error > 10.0 * estimate1 {
                log::warn!(
                    "level {level}: J1 mode error {:e} exceeds 10x the refinement estimate",
                    r.j1.rel_error
                );
            }
        }
        rows.push(RefinementRow {
            level,
            h,
            n_masses,
            lhs: ORIENTATION * r.lhs,
            rhs: r.rhs,
            rel_error: r.rel_error,
            j1_rel_error: r.j1.rel_error,
        });
        previous = Some(r);
    }
    Ok(rows)
}

pub fn refinement_csv(rows: &[RefinementRow]) -> String {
    let mut out = String::from("level,h,n_masses,lhs,rhs,rel_error\n");
    for r in rows {
        out.push_str(&format!(
            "{},{:e},{},{:.17e},{:.17e},{:.6e}\n",
            r.level, r.h, r.n_masses, r.lhs, r.rhs, r.rel_error
        ));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecursionReport {
    pub n: usize,
    /// `n = 1`: `max |J₀[1] - J₁[v]|`. `n = 2`: `max |J₀[v] - J₁[δH₃/δm]|`
    /// relative to `max |J₀[v]|`.
    pub defect: f64,
    /// `n = 2` only: the same defect with `H₃` replaced by `H₃/4`.
    pub quarter_h3_defect: Option<f64>,
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0_f64, |acc, (x, y)| acc.max((x - y).abs()))
}

pub fn recursion_check(m: &LinePotential, n: usize) -> Result<RecursionReport> {
    let v = helmholtz_inverse(m).values;
    match n {
        1 => {
            let left = apply_j0(&m.values, &vec![1.0; m.len()], m.h);
            let right = apply_j1(&v, m.h);
            Ok(RecursionReport {
                n,
                defect: sup_diff(&left, &right),
                quarter_h3_defect: None,
            })
        }
        2 => {
            let left = apply_j0(&m.values, &v, m.h);
            let scale = left.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
            let grad = variational_derivative(&GridFunctional::h3(), m)?;
            let right = apply_j1(&grad, m.h);
            let quarter: Vec<f64> = right.iter().map(|x| 0.25 * x).collect();
            let rel = |d: f64| if scale > 0.0 { d / scale } else { d };
            Ok(RecursionReport {
                n,
                defect: rel(sup_diff(&left, &right)),
                quarter_h3_defect: Some(rel(sup_diff(&left, &quarter))),
            })
        }
        _ => Err(Error::InvalidInput(format!(
            "recursion check supports n = 1, 2 (got {n})"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> GridConfig {
        GridConfig::default()
    }

    fn gaussian(x: f64) -> f64 {
        (-x * x / 2.0).exp()
    }

    fn sup(u: &[f64]) -> f64 {
        u.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    #[test]
    fn grid_shape() {
        assert_eq!(cfg().len(), 4001);
        let m = LinePotential::zero(&cfg()).unwrap();
        assert!((m.x(4000) - 20.0).abs() < 1e-12);
        assert!(LinePotential::from_fn(&cfg(), |x| -gaussian(x)).is_err());
        assert!(LinePotential::new(0.0, 0.1, vec![1.0; 3]).is_err());
        assert!(GridConfig { h: 0.0, ..cfg() }.validate().is_err());
    }

    #[test]
    fn helmholtz_examples() {
        let d = DeltaPotential::new(vec![0.0], vec![1.0]).unwrap();
        let v = helmholtz_inverse_delta(&d, &cfg()).unwrap();
        for (i, vi) in v.values.iter().enumerate() {
            let x = v.x0 + i as f64 * v.h;
            assert!((vi - 0.5 * (-x.abs()).exp()).abs() < 1e-15);
        }

        let m = LinePotential::from_fn(&cfg(), |x| (-x.abs()).exp()).unwrap();
        for kernel in [HelmholtzKernel::Lattice, HelmholtzKernel::Continuum] {
            let v = helmholtz_inverse_with(&m, kernel);
            let worst = (0..m.len())
                .map(|i| {
                    let x = m.x(i).abs();
                    (v.values[i] - 0.5 * (1.0 + x) * (-x).exp()).abs()
                })
                .fold(0.0, f64::max);
            assert!(worst < 1e-4, "{kernel:?}: {worst}");
        }

        let zero = LinePotential::zero(&cfg()).unwrap();
        assert!(helmholtz_inverse(&zero).values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn helmholtz_defect_orders() {
        let lattice = LinePotential::from_fn(&cfg(), gaussian).unwrap();
        assert!(helmholtz_inverse(&lattice).helmholtz_defect(&lattice) < 1e-10);
        let mut defects = Vec::new();
        for h in [4e-2, 2e-2] {
            let m = LinePotential::from_fn(&GridConfig { h, ..cfg() }, gaussian).unwrap();
            defects
                .push(helmholtz_inverse_with(&m, HelmholtzKernel::Continuum).helmholtz_defect(&m));
        }
        let order = (defects[0] / defects[1]).log2();
        assert!((order - 2.0).abs() < 0.2, "{defects:?}");
    }

    #[test]
    fn total_integral_preserved() {
        let m = LinePotential::from_fn(&cfg(), gaussian).unwrap();
        let total_m = trapezoid(m.values(), m.h());
        assert!((h1(&m) - total_m).abs() < 1e-8);
        assert!((total_m - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-10);
    }

    #[test]
    fn hamiltonian_examples() {
        let peakon = DeltaPotential::new(vec![0.0], vec![2.0]).unwrap();
        let hd = hamiltonians_delta(&peakon, &cfg()).unwrap();
        assert_eq!(hd.h0, None);
        assert!((hd.h1 - 2.0).abs() < 1e-15 && (hd.h2 - 1.0).abs() < 1e-15);
        // v = e^{-|x|}: H₃ = 2∫2e^{-3|x|} = 8/3 up to the kink.
        assert!((hd.h3 - 8.0 / 3.0).abs() < 1e-3, "{}", hd.h3);

        let zero = hamiltonians(&LinePotential::zero(&cfg()).unwrap());
        assert_eq!(zero.h0, Some(0.0));
        assert!(zero.h1 == 0.0 && zero.h2 == 0.0 && zero.h3 == 0.0 && zero.h4 == 0.0);

        // The kink at 0 costs h²/6 in the rectangle sum.
        let m = LinePotential::from_fn(&cfg(), |x| (-x.abs()).exp()).unwrap();
        assert!((hamiltonians(&m).h1 - 2.0 - 1e-4 / 6.0).abs() < 1e-8);
    }

    #[test]
    fn gradients_of_hamiltonians() {
        let m = LinePotential::from_fn(&cfg(), gaussian).unwrap();
        let probe: Vec<usize> = (1600..2400).step_by(37).collect();
        let v = helmholtz_inverse(&m).values;
        for &i in &probe {
            let g1 = variational_derivative_at(&GridFunctional::h1(), &m, i).unwrap();
            assert!((g1 - 1.0).abs() < 1e-8, "{g1}");
            let g2 = variational_derivative_at(&GridFunctional::h2(), &m, i).unwrap();
            assert!((g2 - v[i]).abs() < 1e-4, "{g2} vs {}", v[i]);
            let g0 = variational_derivative_at(&GridFunctional::h0(), &m, i).unwrap();
            let exact = 0.5 / m.values()[i].sqrt();
            assert!((g0 - exact).abs() < 1e-6 * exact, "{g0} vs {exact}");
        }
        let bump = LinePotential::from_fn(&cfg(), bump_potential).unwrap();
        assert!(matches!(
            variational_derivative_at(&GridFunctional::h0(), &bump, 0),
            Err(Error::InvalidPotential(_))
        ));
    }

    #[test]
    fn h3_gradient_matches_analytic() {
        // δH₃/δm = R[2(3v² - v'² - 2vv'')].
        let m = LinePotential::from_fn(&GridConfig { h: 4e-2, ..cfg() }, bump_potential).unwrap();
        let v = helmholtz_inverse(&m).values;
        let (dv, ddv) = (d1(&v, m.h()), d2(&v, m.h()));
        let src: Vec<f64> = (0..v.len())
            .map(|i| 2.0 * (3.0 * v[i] * v[i] - dv[i] * dv[i] - 2.0 * v[i] * ddv[i]))
            .collect();
        let exact = helmholtz_slice(&src, m.h(), HelmholtzKernel::Lattice);
        let numeric = variational_derivative(&GridFunctional::h3(), &m).unwrap();
        let scale = sup(&exact);
        let err = (200..800)
            .map(|i| (numeric[i] - exact[i]).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-2 * scale, "{err} vs {scale}");
    }

    #[test]
    fn bracket_antisymmetry() {
        let m = LinePotential::from_fn(&cfg(), bump_potential).unwrap();
        let xs = m.xs();
        let a: Vec<f64> = xs.iter().map(|x| (-(x - 0.5).powi(2)).exp()).collect();
        let b: Vec<f64> = xs.iter().map(|x| x * (-x * x).exp()).collect();
        for op in [PdeOperator::J0, PdeOperator::J1] {
            let ab = pde_bracket(&a, &b, &m, op).unwrap();
            let ba = pde_bracket(&b, &a, &m, op).unwrap();
            assert!(
                (ab + ba).abs() <= 1e-10 * ab.abs().max(1.0),
                "{op:?}: {ab} {ba}"
            );
            assert!(pde_bracket(&a, &a, &m, op).unwrap().abs() < 1e-12);
        }
        assert!(pde_bracket(&a[1..], &b, &m, PdeOperator::J0).is_err());
    }

    #[test]
    fn casimirs() {
        let m = LinePotential::from_fn(&cfg(), |x| 0.2 + gaussian(x)).unwrap();
        let r = casimir_checks(&m).unwrap();
        assert!(r.j0_h0 <= 1e-4, "{}", r.j0_h0);
        assert_eq!(r.j1_h1, 0.0);
        let flat = LinePotential::from_fn(&cfg(), |_| 0.7).unwrap();
        assert_eq!(casimir_checks(&flat).unwrap().j0_h0, 0.0);
        let bump = LinePotential::from_fn(&cfg(), bump_potential).unwrap();
        assert!(casimir_checks(&bump).is_err());
    }

    #[test]
    fn liouville_points() {
        let d = DeltaPotential::new(vec![0.0, 2.0 * 0.5f64.atanh()], vec![1.5, 3.0]).unwrap();
        let s = liouville_map_points(&d).unwrap();
        assert!(s.positions()[0].abs() < 1e-15 && (s.positions()[1] - 1.0).abs() < 1e-15);
        assert!((s.masses()[0] - 1.5).abs() < 1e-15 && (s.masses()[1] - 4.0).abs() < 1e-13);
        let far = DeltaPotential::new(vec![80.0], vec![1.0]).unwrap();
        assert!(matches!(
            liouville_map_points(&far),
            Err(Error::MassOverflow(_))
        ));
        assert!(DeltaPotential::new(vec![0.0], vec![-1.0]).is_err());
    }

    #[test]
    fn liouville_total_mass() {
        let m = LinePotential::from_fn(&cfg(), bump_potential).unwrap();
        let samples = liouville_map(&m).unwrap();
        let direct = string_mass(&m);
        assert!((samples.total_mass() - direct).abs() < 1e-8 * direct);
        let (_, masses) = lump_string(&m, 100).unwrap();
        assert!((masses.iter().sum::<f64>() - direct).abs() < 1e-12 * direct);
    }

    #[test]
    fn weyl_examples() {
        let d = DeltaPotential::new(vec![0.0], vec![2.0]).unwrap();
        let w = weyl_of_delta(&d).unwrap();
        assert!((w.dirichlet[0] - 0.5).abs() < 1e-12);
        let zero = LinePotential::zero(&cfg()).unwrap();
        let w0 = weyl_of_potential(&zero, 100).unwrap();
        assert!(w0.dirichlet.is_empty() && w0.constant == -0.25);
    }

    #[test]
    fn lumping_refinement_converges() {
        let m = LinePotential::from_fn(&cfg(), bump_potential).unwrap();
        let l1: Vec<f64> = [50, 100, 200]
            .iter()
            .map(|&n| lowest_eigenvalues(&m, n, 1).unwrap()[0])
            .collect();
        let (d1, d2) = (l1[0] - l1[1], l1[1] - l1[2]);
        assert!(d1 * d2 > 0.0, "{l1:?}");
        assert!((d1 / d2).abs() >= 1.9, "{l1:?}");
        assert!(l1[2] > 0.7);
    }

    #[test]
    fn weyl_functional_matches_spectral_data() {
        let m = LinePotential::from_fn(&cfg(), |x| bump_potential(x - 0.5)).unwrap();
        let w = weyl_of_potential(&m, 100).unwrap();
        for lambda in [0.3, 0.7] {
            let direct = GridFunctional::weyl(lambda, 100).eval(&m);
            let pf = w
                .eval_lambda(num_complex::Complex64::new(lambda, 0.0))
                .unwrap()
                .re;
            assert!((direct - pf).abs() < 1e-7, "{direct} {pf}");
        }
    }

    #[test]
    fn recursion_n1() {
        let m = LinePotential::from_fn(&cfg(), bump_potential).unwrap();
        assert!(recursion_check(&m, 1).unwrap().defect <= 1e-6);
        let zero = LinePotential::zero(&cfg()).unwrap();
        assert_eq!(recursion_check(&zero, 1).unwrap().defect, 0.0);
        assert!(recursion_check(&m, 3).is_err());
    }

    #[test]
    fn recursion_n2_quarter_normalisation() {
        let m = LinePotential::from_fn(&GridConfig { h: 2e-2, ..cfg() }, bump_potential).unwrap();
        let r = recursion_check(&m, 2).unwrap();
        assert!((r.defect - 3.0).abs() < 0.05, "{}", r.defect);
        assert!(r.quarter_h3_defect.unwrap() < 1e-2);
    }

    #[test]
    fn theorem_31_coarse() {
        let cfg = GridConfig {
            h: 4e-2,
            n_masses: 25,
            ..cfg()
        };
        let m = LinePotential::from_fn(&cfg, bump_potential).unwrap();
        let r = verify_theorem_31(&m, 0.3, 0.7, &cfg).unwrap();
        assert!(r.rel_error < 1e-2, "{r:?}");
        let s = verify_theorem_31(&m, 0.7, 0.3, &cfg).unwrap();
        assert!((r.lhs + s.lhs).abs() <= 1e-12 * r.lhs.abs());
        assert!((r.rhs + s.rhs).abs() <= 1e-12 * r.rhs.abs());
        assert!(r.j1.rel_error > 1.0);
        assert!(verify_theorem_31(&m, 0.3, 0.3, &cfg).is_err());
    }

    #[test]
    fn refinement_csv_shape() {
        let rows =
            theorem_31_refinement(bump_potential, 0.3, 0.7, 20.0, &REFINEMENT_LEVELS[..2]).unwrap();
        let csv = refinement_csv(&rows);
        assert!(csv.starts_with("level,h,n_masses,lhs,rhs,rel_error\n"));
        assert_eq!(csv.lines().count(), 3);
        assert!(rows[1].rel_error < rows[0].rel_error);
    }
}
