//! Regular strings `f'' + λ g f = 0` on `[-2, 2]` carrying point masses:
//! boundary polynomials, Dirichlet and Neumann-left spectra, the Weyl function
//! in the `λ` and `z = -1/λ` charts, and Stieltjes reconstruction.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::real;
use crate::rational::RationalFunction;

pub const HALF_LENGTH: f64 = 2.0;
/// `E₀(0)`, the Weyl constant of the fixed-ends string.
pub const WEYL_CONSTANT: f64 = -0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawString", into = "RawString")]
pub struct DiscreteString {
    positions: Vec<f64>,
    masses: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawString {
    positions: Vec<f64>,
    masses: Vec<f64>,
}

impl TryFrom<RawString> for DiscreteString {
    type Error = Error;
    fn try_from(raw: RawString) -> Result<Self> {
        Self::new(raw.positions, raw.masses)
    }
}

impl From<DiscreteString> for RawString {
    fn from(s: DiscreteString) -> Self {
        Self {
            positions: s.positions,
            masses: s.masses,
        }
    }
}

impl DiscreteString {
    pub fn new(positions: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        if positions.len() != masses.len() {
            return Err(Error::LengthMismatch {
                what: "positions vs masses",
                left: positions.len(),
                right: masses.len(),
            });
        }
        for (j, &x) in positions.iter().enumerate() {
            if !(x > -HALF_LENGTH && x < HALF_LENGTH) {
                return Err(Error::InvalidString(format!(
                    "position {x} outside (-2, 2)"
                )));
            }
            if j > 0 && !(x > positions[j - 1]) {
                return Err(Error::InvalidString(format!(
                    "positions not strictly increasing at index {j}"
                )));
            }
        }
        for &m in &masses {
            if !(m > 0.0 && m.is_finite()) {
                return Err(Error::InvalidString(format!(
                    "mass {m} is not positive and finite"
                )));
            }
        }
        Ok(Self { positions, masses })
    }

    pub fn empty() -> Self {
        Self {
            positions: Vec::new(),
            masses: Vec::new(),
        }
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// Dry interval lengths `l_0 = ξ_1 + 2, ..., l_N = 2 - ξ_N`.
    pub fn gaps(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len() + 1);
        let mut left = -HALF_LENGTH;
        for &x in &self.positions {
            out.push(x - left);
            left = x;
        }
        out.push(HALF_LENGTH - left);
        out
    }

    /// Values `y(ξ_1), ..., y(ξ_N), y(2)` and the end state `(y, y', ∂_λ y, ∂_λ y')`
    /// of the solution started from `(y, y')` at `-2`.
    fn shoot(&self, lambda: f64, start: (f64, f64), nodes: Option<&mut Vec<f64>>) -> [f64; 4] {
        let (mut y, mut dy) = start;
        let (mut yl, mut dyl) = (0.0, 0.0);
        let gaps = self.gaps();
        let mut nodes = nodes;
        for (j, &m) in self.masses.iter().enumerate() {
            y += dy * gaps[j];
            yl += dyl * gaps[j];
            if let Some(v) = nodes.as_deref_mut() {
                v.push(y);
            }
            dyl -= m * y + lambda * m * yl;
            dy -= lambda * m * y;
        }
        y += dy * gaps[self.len()];
        yl += dyl * gaps[self.len()];
        if let Some(v) = nodes {
            v.push(y);
        }
        [y, dy, yl, dyl]
    }

    /// `(ψ(2,λ), ∂_λ ψ(2,λ))`.
    pub fn psi_end(&self, lambda: f64) -> (f64, f64) {
        let s = self.shoot(lambda, (0.0, 1.0), None);
        (s[0], s[2])
    }

    /// `(φ(2,λ), ∂_λ φ(2,λ))`.
    pub fn phi_end(&self, lambda: f64) -> (f64, f64) {
        let s = self.shoot(lambda, (1.0, 0.0), None);
        (s[0], s[2])
    }

    /// `Σ m_j ψ(ξ_j, λ)²` at an eigenvalue, with `ψ'(-2) = 1`.
    ///
    /// Shooting from one end amplifies eigenvalue error across the region where
    /// the mode decays, so the left solution is used up to the node where the
    /// product of the left and right solutions peaks, and the rescaled right
    /// solution beyond it.
    pub fn dirichlet_norm(&self, lambda: f64) -> f64 {
        let n = self.len();
        if n == 0 {
            return 0.0;
        }
        let mut left = Vec::with_capacity(n + 1);
        self.shoot(lambda, (0.0, 1.0), Some(&mut left));
        let right = self.reversed().right_shot(lambda);
        let peak = (0..n)
            .max_by(|&a, &b| {
                (left[a] * right[a])
                    .abs()
                    .total_cmp(&(left[b] * right[b]).abs())
            })
            .unwrap_or(0);
        let scale = left[peak] / right[peak];
        (0..n)
            .map(|j| {
                let y = if j <= peak { left[j] } else { scale * right[j] };
                self.masses[j] * y * y
            })
            .sum()
    }

    fn reversed(&self) -> Self {
        Self {
            positions: self.positions.iter().rev().map(|x| -x).collect(),
            masses: self.masses.iter().rev().copied().collect(),
        }
    }

    /// On a reversed string: the solution with `y = 0`, `y' = 1` at its left end,
    /// sampled at its masses and returned in the original mass order.
    fn right_shot(&self, lambda: f64) -> Vec<f64> {
        let mut values = Vec::with_capacity(self.len() + 1);
        self.shoot(lambda, (0.0, 1.0), Some(&mut values));
        values.pop();
        values.reverse();
        values
    }

    /// Sign changes of the solution sampled at the masses and the right end,
    /// i.e. the number of eigenvalues strictly below `λ`.
    fn oscillation_count(&self, lambda: f64, start: (f64, f64)) -> usize {
        let mut values = Vec::with_capacity(self.len() + 2);
        values.push(if start.0 != 0.0 { start.0 } else { start.1 });
        self.shoot(lambda, start, Some(&mut values));
        let mut count = 0;
        let mut last = values[0].signum();
        for &v in &values[1..] {
            if v == 0.0 {
                continue;
            }
            if v.signum() != last {
                count += 1;
                last = v.signum();
            }
        }
        count
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPolynomials {
    /// `φ(2, λ)`, ascending in `λ`.
    pub phi_coeffs: Vec<f64>,
    /// `ψ(2, λ)`, ascending in `λ`.
    pub psi_coeffs: Vec<f64>,
}

impl BoundaryPolynomials {
    pub fn phi(&self, lambda: f64) -> f64 {
        real::eval(&self.phi_coeffs, lambda)
    }

    pub fn psi(&self, lambda: f64) -> f64 {
        real::eval(&self.psi_coeffs, lambda)
    }
}

/// Exact polynomial transfer through the string: `y += y' l` on dry intervals,
/// `y' -= λ m y` across a mass.
pub fn boundary_polynomials(s: &DiscreteString) -> BoundaryPolynomials {
    let gaps = s.gaps();
    let run = |y0: f64, dy0: f64| {
        let (mut y, mut dy) = (vec![y0], vec![dy0]);
        for (j, &m) in s.masses().iter().enumerate() {
            y = real::add_scaled(&y, &dy, gaps[j]);
            dy = real::add_scaled(&dy, &real::shift(&y), -m);
        }
        real::trim(real::add_scaled(&y, &dy, gaps[s.len()]))
    };
    BoundaryPolynomials {
        phi_coeffs: run(1.0, 0.0),
        psi_coeffs: run(0.0, 1.0),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StringSpectrum {
    /// Roots `λ_k` of `ψ(2, ·)`.
    pub dirichlet: Vec<f64>,
    /// Roots `μ_k` of `φ(2, ·)`.
    pub neumann_left: Vec<f64>,
    /// `ρ_k` with `E₀(λ) = -1/4 + Σ (1/(λ_k - λ) - 1/λ_k) ρ_k`.
    pub residues: Vec<f64>,
}

const ROOT_RTOL: f64 = 1e-14;

fn eigenvalues(
    s: &DiscreteString,
    start: (f64, f64),
    end: impl Fn(f64) -> (f64, f64),
) -> Result<Vec<f64>> {
    let n = s.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut upper = 1.0;
    let mut guard = 0;
    while s.oscillation_count(upper, start) < n {
        upper *= 2.0;
        guard += 1;
        if guard > 2000 || !upper.is_finite() {
            return Err(Error::RootFinding(
                "no upper bracket for the string spectrum".into(),
            ));
        }
    }
    let mut out = Vec::with_capacity(n);
    for k in 1..=n {
        // λ_k = inf { λ : count(λ) ≥ k }
        let (mut lo, mut hi) = (out.last().copied().unwrap_or(0.0), upper);
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi || hi - lo <= ROOT_RTOL * hi {
                break;
            }
            if s.oscillation_count(mid, start) >= k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        // safeguarded Newton polish inside the bracket
        let mut x = 0.5 * (lo + hi);
        for _ in 0..4 {
            let (v, dv) = end(x);
            if dv == 0.0 || !v.is_finite() {
                break;
            }
            let next = x - v / dv;
            if next > lo && next < hi {
                x = next;
            } else {
                break;
            }
        }
        out.push(x);
    }
    Ok(out)
}

/// Relative resolution below which neighbouring eigenvalues count as touching.
/// The top `μ_k`, `λ_k` of strongly inhomogeneous strings can agree to every
/// representable digit because the mode barely sees the left end.
pub const INTERLACING_RTOL: f64 = 1e-12;

fn check_interlacing(mu: &[f64], lambda: &[f64]) -> Result<()> {
    let mut prev = 0.0;
    let below = |a: f64, b: f64| a < b || (a - b).abs() <= INTERLACING_RTOL * b.abs();
    for (k, (&m, &l)) in mu.iter().zip(lambda).enumerate() {
        if !(m > 0.0 && below(prev, m) && below(m, l)) {
            return Err(Error::Interlacing(format!(
                "expected {prev} < mu_{} = {m} < lambda_{} = {l}",
                k + 1,
                k + 1
            )));
        }
        prev = l;
    }
    Ok(())
}

/// Relative gap below which two Dirichlet eigenvalues are unresolved. Light
/// masses near both ends of a nearly symmetric string carry localised modes
/// whose splitting is far below rounding; their individual residues are then
/// meaningless.
pub const CLUSTER_RTOL: f64 = 1e-10;

/// Roots of `ψ(2, ·)` only.
pub fn dirichlet_eigenvalues(s: &DiscreteString) -> Result<Vec<f64>> {
    eigenvalues(s, (0.0, 1.0), |l| s.psi_end(l))
}

/// Both spectra and the residues, by bisection on the oscillation count of the
/// shooting solutions followed by Newton polishing.
pub fn spectrum(s: &DiscreteString) -> Result<StringSpectrum> {
    let dirichlet = dirichlet_eigenvalues(s)?;
    let neumann_left = eigenvalues(s, (1.0, 0.0), |l| s.phi_end(l))?;
    check_interlacing(&neumann_left, &dirichlet)?;
    if let Some(k) = (1..dirichlet.len())
        .find(|&k| dirichlet[k] - dirichlet[k - 1] <= CLUSTER_RTOL * dirichlet[k])
    {
        return Err(Error::InvalidString(format!(
            "eigenvalues {} and {} agree to {:e} relative; residues unresolvable",
            k,
            k + 1,
            (dirichlet[k] - dirichlet[k - 1]) / dirichlet[k]
        )));
    }
    // φ(2,λ_k) ψ_ξ(2,λ_k) = 1 (Wronskian) and ψ_ξ ∂_λψ = Σ m_j ψ(ξ_j)² at an
    // eigenvalue, so ρ_k = φ/∂_λψ is the reciprocal of a positive sum; this
    // avoids the cancellation in φ(2,λ_k) when μ_k and λ_k nearly touch.
    let residues: Vec<f64> = dirichlet
        .iter()
        .map(|&l| 1.0 / s.dirichlet_norm(l))
        .collect();
    if let Some((k, r)) = residues.iter().enumerate().find(|(_, r)| !(**r > 0.0)) {
        return Err(Error::InvalidString(format!(
            "residue {k} = {r} is not positive"
        )));
    }
    Ok(StringSpectrum {
        dirichlet,
        neumann_left,
        residues,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeylData {
    pub constant: f64,
    pub dirichlet: Vec<f64>,
    pub residues: Vec<f64>,
    /// `-1/4 + Σ ρ'_k / (z_k - z)` with `z_k = -1/λ_k`, `ρ'_k = ρ_k / λ_k²`.
    pub z_form: RationalFunction,
}

impl WeylData {
    pub fn from_lambda_form(dirichlet: Vec<f64>, residues: Vec<f64>) -> Result<Self> {
        if dirichlet.len() != residues.len() {
            return Err(Error::LengthMismatch {
                what: "eigenvalues vs residues",
                left: dirichlet.len(),
                right: residues.len(),
            });
        }
        if let Some(l) = dirichlet.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidWeylData(format!(
                "eigenvalue {l} is not positive"
            )));
        }
        let poles = dirichlet.iter().map(|&l| C64::new(-1.0 / l, 0.0)).collect();
        let res = dirichlet
            .iter()
            .zip(&residues)
            .map(|(&l, &r)| C64::new(r / (l * l), 0.0))
            .collect();
        let z_form = RationalFunction::new(C64::new(WEYL_CONSTANT, 0.0), poles, res)?;
        Ok(Self {
            constant: WEYL_CONSTANT,
            dirichlet,
            residues,
            z_form,
        })
    }

    /// `E₀(λ) = -1/4 + Σ (1/(λ_k - λ) - 1/λ_k) ρ_k`.
    pub fn eval_lambda(&self, lambda: C64) -> Result<C64> {
        if let Some(l) = self
            .dirichlet
            .iter()
            .find(|&&l| (lambda - l).norm() <= 1e-14 * l)
        {
            return Err(Error::AtPole {
                point: lambda.to_string(),
                pole: l.to_string(),
                tolerance: 1e-14 * l,
            });
        }
        Ok(self
            .dirichlet
            .iter()
            .zip(&self.residues)
            .map(|(&l, &r)| r * (1.0 / (l - lambda) - 1.0 / l))
            .sum::<C64>()
            + self.constant)
    }

    /// `E₀` in the `z = -1/λ` chart.
    pub fn eval_z(&self, z: C64) -> Result<C64> {
        self.z_form.eval(z)
    }
}

/// Both charts of the Weyl function `E₀ = -φ(2,·)/ψ(2,·)`.
pub fn weyl_function(s: &DiscreteString) -> Result<WeylData> {
    let spec = spectrum(s)?;
    let w = WeylData::from_lambda_form(spec.dirichlet, spec.residues)?;
    let at_zero = -s.phi_end(0.0).0 / s.psi_end(0.0).0;
    if (at_zero - WEYL_CONSTANT).abs() > 1e-12 {
        return Err(Error::InvalidString(format!(
            "E0(0) = {at_zero}, expected -1/4"
        )));
    }
    Ok(w)
}

/// `-φ(2,λ)/ψ(2,λ)` by direct shooting, with no validation: masses may take
/// any sign and positions need only be non-decreasing.
pub fn shoot_weyl(positions: &[f64], masses: &[f64], lambda: f64) -> f64 {
    let s = DiscreteString {
        positions: positions.to_vec(),
        masses: masses.to_vec(),
    };
    -s.phi_end(lambda).0 / s.psi_end(lambda).0
}

/// Largest relative gap between the partial-fraction Weyl function and direct
/// `-φ/ψ` shooting at the given `λ`.
pub fn partial_fraction_defect(s: &DiscreteString, w: &WeylData, lambdas: &[f64]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &l in lambdas {
        let direct = -s.phi_end(l).0 / s.psi_end(l).0;
        let pf = w.eval_lambda(C64::new(l, 0.0))?.re;
        worst = worst.max((direct - pf).abs() / direct.abs().max(1.0));
    }
    Ok(worst)
}

/// `Π (1 - λ/r_k)` scaled by `lead0`, ascending coefficients.
fn product_poly(roots: &[f64], lead0: f64) -> Vec<f64> {
    let mut p = vec![lead0];
    for &r in roots {
        let shifted = real::shift(&p);
        p = real::add_scaled(&p, &shifted, -1.0 / r);
    }
    p
}

/// Largest per-coefficient relative defect between the propagated boundary
/// polynomials and `Π(1 - λ/μ_k)`, `4 Π(1 - λ/λ_k)`.
pub fn product_form_check(bp: &BoundaryPolynomials, spec: &StringSpectrum) -> f64 {
    let phi = product_poly(&spec.neumann_left, 1.0);
    let psi = product_poly(&spec.dirichlet, 4.0);
    let defect = |a: &[f64], b: &[f64]| {
        let len = a.len().max(b.len());
        (0..len)
            .map(|i| {
                let (x, y) = (
                    a.get(i).copied().unwrap_or(0.0),
                    b.get(i).copied().unwrap_or(0.0),
                );
                if x == y {
                    0.0
                } else {
                    (x - y).abs() / x.abs().max(y.abs())
                }
            })
            .fold(0.0, f64::max)
    };
    defect(&bp.phi_coeffs, &phi).max(defect(&bp.psi_coeffs, &psi))
}

/// Jacobi matrix `(diagonal, |off-diagonal|)` with spectral measure
/// `Σ w_k δ_{λ_k}`, by Lanczos with full reorthogonalisation.
fn lanczos(nodes: &[f64], weights: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = nodes.len();
    let total: f64 = weights.iter().sum();
    let mut basis: Vec<Vec<f64>> = vec![weights.iter().map(|w| (w / total).sqrt()).collect()];
    let (mut alpha, mut beta) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for j in 0..n {
        let q = &basis[j];
        let mut r: Vec<f64> = q.iter().zip(nodes).map(|(x, l)| x * l).collect();
        alpha.push(r.iter().zip(q).map(|(a, b)| a * b).sum());
        if j + 1 == n {
            break;
        }
        for _ in 0..2 {
            for v in &basis {
                let dot: f64 = r.iter().zip(v).map(|(a, b)| a * b).sum();
                for (ri, vi) in r.iter_mut().zip(v) {
                    *ri -= dot * vi;
                }
            }
        }
        let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        beta.push(norm);
        basis.push(r.iter().map(|x| x / norm).collect());
    }
    (alpha, beta)
}

/// Reconstructs the string from `(λ_k, ρ_k)`.
///
/// The first Stieltjes coefficient is `l_0 = lim_{λ→∞} -1/E₀ = 1/(1/4 + Σ ρ_k/λ_k)`.
/// With `A = M^{-1/2} K M^{-1/2}` the symmetrised Dirichlet stiffness matrix
/// (`A_jj = (1/l_{j-1} + 1/l_j)/m_j`, `A_{j,j+1} = -1/(l_j √(m_j m_{j+1}))`), the
/// measure `Σ_k ρ_k δ_{λ_k}` is its first-component spectral measure scaled by
/// `1/(l_0² m_1)`. Lanczos on that measure gives `A`, from which the remaining
/// masses and lengths follow one at a time, the Jacobi-matrix form of the
/// same continued fraction.
pub fn inverse_string(w: &WeylData) -> Result<DiscreteString> {
    let n = w.dirichlet.len();
    if n != w.residues.len() {
        return Err(Error::LengthMismatch {
            what: "eigenvalues vs residues",
            left: n,
            right: w.residues.len(),
        });
    }
    if let Some(r) = w.residues.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
        return Err(Error::InvalidWeylData(format!(
            "residue {r} is not positive"
        )));
    }
    if let Some(l) = w.dirichlet.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
        return Err(Error::InvalidWeylData(format!(
            "eigenvalue {l} is not positive"
        )));
    }
    for k in 1..n {
        if !(w.dirichlet[k] > w.dirichlet[k - 1]) {
            return Err(Error::InvalidWeylData(
                "eigenvalues are not strictly increasing".into(),
            ));
        }
    }
    if (w.constant - WEYL_CONSTANT).abs() > 1e-14 {
        return Err(Error::InvalidWeylData(format!(
            "constant {} is not -1/4",
            w.constant
        )));
    }
    if n == 0 {
        return Ok(DiscreteString::empty());
    }
    let sigma: f64 = w.residues.iter().sum();
    let tail: f64 = w
        .dirichlet
        .iter()
        .zip(&w.residues)
        .map(|(l, r)| r / l)
        .sum();
    let l0 = 1.0 / (-WEYL_CONSTANT + tail);
    let (a, b) = lanczos(&w.dirichlet, &w.residues);

    let mut gaps = vec![l0];
    let mut masses = vec![1.0 / (sigma * l0 * l0)];
    for j in 0..n {
        let inv = masses[j] * a[j] - 1.0 / gaps[j];
        let l = 1.0 / inv;
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::InvalidWeylData(format!(
                "extracted length {l} is not positive"
            )));
        }
        gaps.push(l);
        if j + 1 < n {
            let root = 1.0 / (l * masses[j].sqrt() * b[j]);
            let m = root * root;
            if !(m > 0.0 && m.is_finite()) {
                return Err(Error::InvalidWeylData(format!(
                    "extracted mass {m} is not positive"
                )));
            }
            masses.push(m);
        }
    }
    let total: f64 = gaps.iter().sum();
    if (total - 2.0 * HALF_LENGTH).abs() > 1e-6 * 2.0 * HALF_LENGTH {
        return Err(Error::InvalidWeylData(format!(
            "reconstructed length {total} differs from 4"
        )));
    }
    let mut positions = Vec::with_capacity(n);
    let mut x = -HALF_LENGTH;
    for &l in &gaps[..n] {
        x += l;
        positions.push(x);
    }
    DiscreteString::new(positions, masses)
        .map_err(|e| Error::InvalidWeylData(format!("reconstruction is not a string: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn single() -> DiscreteString {
        DiscreteString::new(vec![0.0], vec![1.0]).unwrap()
    }

    #[test]
    fn boundary_polynomial_examples() {
        let bp = boundary_polynomials(&DiscreteString::empty());
        assert_eq!((bp.phi_coeffs, bp.psi_coeffs), (vec![1.0], vec![4.0]));
        let bp = boundary_polynomials(&single());
        assert_eq!(bp.phi_coeffs, vec![1.0, -2.0]);
        assert_eq!(bp.psi_coeffs, vec![4.0, -4.0]);
        // ψ(2,λ) = (ξ+2) + (2-ξ)(1 - λ m (ξ+2))
        let s = DiscreteString::new(vec![0.7], vec![2.5]).unwrap();
        let bp = boundary_polynomials(&s);
        let l = 0.37;
        assert_relative_eq!(
            bp.psi(l),
            2.7 + 1.3 * (1.0 - l * 2.5 * 2.7),
            epsilon = 1e-14
        );
        assert_relative_eq!(s.psi_end(l).0, bp.psi(l), epsilon = 1e-14);
    }

    #[test]
    fn single_mass_spectrum() {
        let spec = spectrum(&single()).unwrap();
        assert_relative_eq!(spec.dirichlet[0], 1.0, epsilon = 1e-13);
        assert_relative_eq!(spec.neumann_left[0], 0.5, epsilon = 1e-13);
        assert_relative_eq!(spec.residues[0], 0.25, epsilon = 1e-13);
        let s = DiscreteString::new(vec![-0.6], vec![3.0]).unwrap();
        let spec = spectrum(&s).unwrap();
        assert_relative_eq!(
            spec.dirichlet[0],
            4.0 / (3.0 * (4.0 - 0.36)),
            max_relative = 1e-13
        );
        assert!(spectrum(&DiscreteString::empty())
            .unwrap()
            .dirichlet
            .is_empty());
    }

    #[test]
    fn weyl_examples() {
        let w = weyl_function(&single()).unwrap();
        assert!((w.z_form.poles()[0] - C64::new(-1.0, 0.0)).norm() < 1e-13);
        assert_relative_eq!(w.z_form.residues()[0].re, 0.25, epsilon = 1e-13);
        assert_relative_eq!(
            w.eval_z(C64::new(0.0, 0.0)).unwrap().re,
            -0.5,
            epsilon = 1e-13
        );
        let w = weyl_function(&DiscreteString::empty()).unwrap();
        assert_eq!(w.eval_z(C64::new(3.0, 1.0)).unwrap(), C64::new(-0.25, 0.0));
        assert_eq!(
            w.eval_lambda(C64::new(0.0, 0.0)).unwrap(),
            C64::new(-0.25, 0.0)
        );
    }

    #[test]
    fn charts_agree() {
        let s = DiscreteString::new(vec![-1.2, 0.1, 1.5], vec![0.4, 2.0, 0.9]).unwrap();
        let w = weyl_function(&s).unwrap();
        for l in [0.05, 0.4, 1.7, 6.0, -2.0] {
            let a = w.eval_lambda(C64::new(l, 0.0)).unwrap();
            let b = w.eval_z(C64::new(-1.0 / l, 0.0)).unwrap();
            assert!((a - b).norm() <= 1e-12 * a.norm().max(1.0));
        }
        assert!(partial_fraction_defect(&s, &w, &[0.05, 0.4, 1.7, 6.0, 20.0]).unwrap() < 1e-11);
    }

    #[test]
    fn products_match() {
        let s = DiscreteString::new(vec![-1.9, -0.3, 0.2, 1.1], vec![0.05, 7.0, 0.3, 1.2]).unwrap();
        let bp = boundary_polynomials(&s);
        let spec = spectrum(&s).unwrap();
        assert!(product_form_check(&bp, &spec) < 1e-11);
        let empty = DiscreteString::empty();
        assert_eq!(
            product_form_check(&boundary_polynomials(&empty), &spectrum(&empty).unwrap()),
            0.0
        );
    }

    #[test]
    fn inverse_examples() {
        let s = inverse_string(&weyl_function(&single()).unwrap()).unwrap();
        assert!(s.positions()[0].abs() < 1e-10 && (s.masses()[0] - 1.0).abs() < 1e-10);
        let empty = inverse_string(&WeylData::from_lambda_form(vec![], vec![]).unwrap()).unwrap();
        assert!(empty.is_empty());
        let s = DiscreteString::new(vec![-1.1, -0.2, 0.6, 1.4], vec![0.8, 0.2, 3.0, 1.1]).unwrap();
        let back = inverse_string(&weyl_function(&s).unwrap()).unwrap();
        for (a, b) in s.positions().iter().zip(back.positions()) {
            assert!((a - b).abs() < 1e-9);
        }
        for (a, b) in s.masses().iter().zip(back.masses()) {
            assert!((a - b).abs() < 1e-9 * a);
        }
        let bad = WeylData::from_lambda_form(vec![1.0, 2.0], vec![0.3, -0.1]).unwrap();
        assert!(matches!(
            inverse_string(&bad),
            Err(Error::InvalidWeylData(_))
        ));
    }

    #[test]
    fn json_shapes() {
        let text = serde_json::to_string(&single()).unwrap();
        assert_eq!(text, r#"{"positions":[0.0],"masses":[1.0]}"#);
        assert!(
            serde_json::from_str::<DiscreteString>(r#"{"positions":[3.0],"masses":[1.0]}"#)
                .is_err()
        );
        let spec = spectrum(&single()).unwrap();
        let v: serde_json::Value = serde_json::to_value(&spec).unwrap();
        assert!(
            v.get("dirichlet").is_some()
                && v.get("neumann_left").is_some()
                && v.get("residues").is_some()
        );
    }

    fn random_string(n: usize, seed: u64) -> DiscreteString {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut positions: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.95..1.95)).collect();
        positions.sort_by(f64::total_cmp);
        let masses = (0..n)
            .map(|_| 10f64.powf(rng.gen_range(-2.0..2.0)))
            .collect();
        DiscreteString::new(positions, masses).unwrap()
    }

    #[test]
    fn random_strings_interlace_and_invert() {
        let mut worst: f64 = 0.0;
        for seed in 0..200 {
            let n = 1 + (seed as usize) % 10;
            let s = random_string(n, seed);
            let w = weyl_function(&s).unwrap();
            if n <= 6 {
                let back = inverse_string(&w).unwrap();
                for (a, b) in s.positions().iter().zip(back.positions()) {
                    worst = worst.max((a - b).abs());
                }
                for (a, b) in s.masses().iter().zip(back.masses()) {
                    worst = worst.max((a - b).abs() / a);
                }
            }
        }
        assert!(worst < 1e-7, "{worst}");
    }
}
