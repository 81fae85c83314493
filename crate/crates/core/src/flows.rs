//! Hamiltonian flows of the canonical brackets in `(z, ρ)` coordinates:
//! `ż_k = {z_k, H}`, `ρ̇_k = {ρ_k, H}`, integrated with classical RK4 and
//! checked against the exact isospectral solution for `H = Σ h(z_k)`.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::canonical::{structure_tensor, validate_point, Observable};
use crate::entire::EntireFunction;
use crate::error::{Error, Result};

/// Flows abort when two poles come closer than this.
pub const COLLISION_DISTANCE: f64 = 1e-6;
pub const DEFAULT_STEP: f64 = 1e-3;
const MAX_HALVINGS: usize = 8;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    #[default]
    Rk4,
}

#[derive(Debug, Clone)]
pub struct FlowSpec {
    pub f: EntireFunction,
    pub hamiltonian: Observable,
    pub t_span: (f64, f64),
    pub step: f64,
    pub integrator: Integrator,
    /// Emit every `sample_every`-th step; the final state is always emitted.
    pub sample_every: usize,
}

impl FlowSpec {
    pub fn new(f: EntireFunction, hamiltonian: Observable, t_span: (f64, f64)) -> Self {
        Self {
            f,
            hamiltonian,
            t_span,
            step: DEFAULT_STEP,
            integrator: Integrator::Rk4,
            sample_every: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "step {} must be positive",
                self.step
            )));
        }
        let (t0, t1) = self.t_span;
        if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
            return Err(Error::InvalidInput(format!(
                "time span ({t0}, {t1}) must have t1 > t0"
            )));
        }
        if self.sample_every == 0 {
            return Err(Error::InvalidInput("sample_every must be positive".into()));
        }
        Ok(())
    }
}

/// `(ż, ρ̇)` from the full structure tensor.
pub fn flow_rhs(z: &[C64], rho: &[C64], spec: &FlowSpec) -> Result<(Vec<C64>, Vec<C64>)> {
    validate_point(z, rho)?;
    let p = structure_tensor(&spec.f, z, rho)?;
    let g = spec.hamiltonian.gradient(z, rho);
    let n = z.len();
    let mut dz = vec![C64::new(0.0, 0.0); n];
    let mut drho = vec![C64::new(0.0, 0.0); n];
    for k in 0..n {
        for m in 0..n {
            dz[k] += p.zz[k][m] * g.dz[m] - p.rz[m][k] * g.drho[m];
            drho[k] += p.rr[k][m] * g.drho[m] + p.rz[k][m] * g.dz[m];
        }
    }
    Ok((dz, drho))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSample {
    pub t: f64,
    pub z: Vec<C64>,
    pub rho: Vec<C64>,
    pub h: C64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<FlowSample>,
    /// `max_k |z_k(t) - z_k(0)|` over all steps.
    pub z_drift: f64,
    /// `max |H(t) - H(0)|` per unit time.
    pub h_drift_rate: f64,
}

impl Trajectory {
    pub fn last(&self) -> &FlowSample {
        self.samples
            .last()
            .expect("trajectories hold at least the initial state")
    }

    /// Columns `t, z_k_re, z_k_im, ..., rho_k_re, rho_k_im, ..., H` (real part of `H`).
    pub fn to_csv(&self) -> String {
        let n = self.samples.first().map_or(0, |s| s.z.len());
        let mut header = vec!["t".to_string()];
        for name in ["z", "rho"] {
            for k in 1..=n {
                header.push(format!("{name}{k}_re"));
                header.push(format!("{name}{k}_im"));
            }
        }
        header.push("H".into());
        let mut out = header.join(",");
        out.push('\n');
        for s in &self.samples {
            let mut row = vec![format!("{:.12e}", s.t)];
            for c in s.z.iter().chain(&s.rho) {
                row.push(format!("{:.17e}", c.re));
                row.push(format!("{:.17e}", c.im));
            }
            row.push(format!("{:.17e}", s.h.re));
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

fn min_separation(z: &[C64]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..z.len() {
        for j in 0..i {
            best = best.min((z[i] - z[j]).norm());
        }
    }
    best
}

fn axpy(x: &[C64], a: f64, d: &[C64]) -> Vec<C64> {
    x.iter().zip(d).map(|(x, d)| x + a * d).collect()
}

fn rk4_step(z: &[C64], rho: &[C64], dt: f64, spec: &FlowSpec) -> Result<(Vec<C64>, Vec<C64>)> {
    let (k1z, k1r) = flow_rhs(z, rho, spec)?;
    let (k2z, k2r) = flow_rhs(&axpy(z, dt / 2.0, &k1z), &axpy(rho, dt / 2.0, &k1r), spec)?;
    let (k3z, k3r) = flow_rhs(&axpy(z, dt / 2.0, &k2z), &axpy(rho, dt / 2.0, &k2r), spec)?;
    let (k4z, k4r) = flow_rhs(&axpy(z, dt, &k3z), &axpy(rho, dt, &k3r), spec)?;
    let combine = |x: &[C64], a: &[C64], b: &[C64], c: &[C64], d: &[C64]| -> Vec<C64> {
        (0..x.len())
            .map(|i| x[i] + dt / 6.0 * (a[i] + 2.0 * b[i] + 2.0 * c[i] + d[i]))
            .collect()
    };
    Ok((
        combine(z, &k1z, &k2z, &k3z, &k4z),
        combine(rho, &k1r, &k2r, &k3r, &k4r),
    ))
}

fn finite(v: &[C64]) -> bool {
    v.iter().all(|c| c.is_finite())
}

/// Fixed-step RK4 over `spec.t_span`. A step that produces non-finite values
/// is retried with halved substeps; pole collisions abort.
pub fn integrate(z0: &[C64], rho0: &[C64], spec: &FlowSpec) -> Result<Trajectory> {
    spec.validate()?;
    validate_point(z0, rho0)?;
    let (t0, t1) = spec.t_span;
    let steps = ((t1 - t0) / spec.step).round().max(1.0) as usize;
    let dt = (t1 - t0) / steps as f64;
    let h0 = spec.hamiltonian.value(z0, rho0);
    let (mut z, mut rho) = (z0.to_vec(), rho0.to_vec());
    let mut samples = vec![FlowSample {
        t: t0,
        z: z.clone(),
        rho: rho.clone(),
        h: h0,
    }];
    let (mut z_drift, mut h_drift): (f64, f64) = (0.0, 0.0);
    for step in 1..=steps {
        let mut next = None;
        for halving in 0..=MAX_HALVINGS {
            let parts = 1usize << halving;
            let sub = dt / parts as f64;
            let (mut zs, mut rs) = (z.clone(), rho.clone());
            let mut ok = true;
            for _ in 0..parts {
                let (zn, rn) = rk4_step(&zs, &rs, sub, spec)?;
                if !finite(&zn) || !finite(&rn) {
                    ok = false;
                    break;
                }
                zs = zn;
                rs = rn;
            }
            if ok {
                next = Some((zs, rs));
                break;
            }
            log::debug!("rejected step {step} at {parts} substeps: non-finite state");
        }
        let Some((zn, rn)) = next else {
            return Err(Error::FlowAborted(format!(
                "non-finite state at step {step}"
            )));
        };
        z = zn;
        rho = rn;
        let t = t0 + step as f64 * dt;
        let sep = min_separation(&z);
        if sep < COLLISION_DISTANCE {
            return Err(Error::FlowAborted(format!(
                "poles within {sep:e} at t = {t}"
            )));
        }
        let h = spec.hamiltonian.value(&z, &rho);
        z_drift = z
            .iter()
            .zip(z0)
            .map(|(a, b)| (a - b).norm())
            .fold(z_drift, f64::max);
        h_drift = h_drift.max((h - h0).norm());
        if step % spec.sample_every == 0 || step == steps {
            samples.push(FlowSample {
                t,
                z: z.clone(),
                rho: rho.clone(),
                h,
            });
        }
    }
    Ok(Trajectory {
        samples,
        z_drift,
        h_drift_rate: h_drift / (t1 - t0),
    })
}

/// Exact flow of `H = Σ h(z_k)`: `z` frozen, `ρ_k(t) = ρ_k(0) exp(f(z_k) h'(z_k) t)`.
pub fn closed_form_isospectral(
    z0: &[C64],
    rho0: &[C64],
    f: &EntireFunction,
    h_prime: impl Fn(C64) -> C64,
    t: f64,
) -> (Vec<C64>, Vec<C64>) {
    let rho = z0
        .iter()
        .zip(rho0)
        .map(|(&zk, &rk)| rk * (f.eval(zk) * h_prime(zk) * t).exp())
        .collect();
    (z0.to_vec(), rho)
}

/// The N = 1 demonstration: `f = 1`, `H = z²/2`, `z = -1`, `ρ(0) = 1/4`.
pub fn demo_spec() -> (Vec<C64>, Vec<C64>, FlowSpec) {
    let h = Observable::pole_sum("z^2/2", |z| z * z / 2.0, |z| z);
    (
        vec![C64::new(-1.0, 0.0)],
        vec![C64::new(0.25, 0.0)],
        FlowSpec::new(EntireFunction::one(), h, (0.0, 1.0)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn quadratic() -> Observable {
        Observable::pole_sum("z^2/2", |z| z * z / 2.0, |z| z)
    }

    #[test]
    fn rhs_examples() {
        let z = [c(-1.0), c(0.5), c(2.0)];
        let rho = [c(0.3), c(0.7), c(1.1)];
        let spec = FlowSpec::new(EntireFunction::one(), quadratic(), (0.0, 1.0));
        let (dz, dr) = flow_rhs(&z, &rho, &spec).unwrap();
        for k in 0..3 {
            assert_eq!(dz[k], c(0.0));
            assert!((dr[k] - rho[k] * z[k]).norm() < 1e-15);
        }

        let constant = Observable::analytic(
            "1",
            |_, _| c(1.0),
            |z, _| crate::canonical::Gradient::zeros(z.len()),
        );
        let spec = FlowSpec::new(EntireFunction::one(), constant, (0.0, 1.0));
        let (dz, dr) = flow_rhs(&z, &rho, &spec).unwrap();
        assert!(dz.iter().chain(&dr).all(|v| *v == c(0.0)));

        let spec = FlowSpec::new(EntireFunction::one(), Observable::residue_sum(), (0.0, 1.0));
        let (dz, dr) = flow_rhs(&z, &rho, &spec).unwrap();
        for k in 0..3 {
            assert!((dz[k] + rho[k]).norm() < 1e-15);
            let expected: C64 = (0..3)
                .filter(|&n| n != k)
                .map(|n| 2.0 * rho[k] * rho[n] / (z[n] - z[k]))
                .sum();
            assert!((dr[k] - expected).norm() < 1e-14);
        }
        assert!(flow_rhs(&[c(1.0), c(1.0)], &[c(1.0), c(1.0)], &spec).is_err());
    }

    #[test]
    fn rhs_matches_oracle_tensor() {
        use crate::canonical::{oracle_tensor, OracleConfig};
        use crate::rational::RationalFunction;
        let z = [c(-1.2), c(0.4), c(1.5)];
        let rho = [c(0.6), c(0.9), c(0.35)];
        let chi = RationalFunction::new(c(0.0), z.to_vec(), rho.to_vec()).unwrap();
        let oracle = oracle_tensor(&chi, &EntireFunction::one(), &OracleConfig::default()).unwrap();
        let g = Observable::residue_sum().gradient(&z, &rho);
        let spec = FlowSpec::new(EntireFunction::one(), Observable::residue_sum(), (0.0, 1.0));
        let (dz, dr) = flow_rhs(&z, &rho, &spec).unwrap();
        for k in 0..3 {
            let mut ez = crate::canonical::Gradient::zeros(3);
            ez.dz[k] = c(1.0);
            let mut er = crate::canonical::Gradient::zeros(3);
            er.drho[k] = c(1.0);
            assert!((oracle.contract(&ez, &g) - dz[k]).norm() < 1e-9);
            assert!((oracle.contract(&er, &g) - dr[k]).norm() < 1e-9);
        }
    }

    #[test]
    fn demo_reaches_closed_form() {
        let (z, rho, spec) = demo_spec();
        let traj = integrate(&z, &rho, &spec).unwrap();
        let end = traj.last();
        assert!((end.t - 1.0).abs() < 1e-15);
        assert!((end.rho[0].re - 0.25 * (-1.0f64).exp()).abs() < 1e-9);
        assert_eq!(traj.z_drift, 0.0);
        assert!(traj.h_drift_rate <= 1e-10);
        let csv = traj.to_csv();
        assert!(csv.starts_with("t,z1_re,z1_im,rho1_re,rho1_im,H\n"));
        assert_eq!(csv.lines().count(), 1002);
    }

    #[test]
    fn closed_form_examples() {
        let z = [c(-1.0), c(0.5)];
        let rho = [c(0.2), c(0.4)];
        let (z1, r1) = closed_form_isospectral(&z, &rho, &EntireFunction::one(), |z| z, 0.0);
        assert_eq!((z1.as_slice(), r1.as_slice()), (&z[..], &rho[..]));
        let (_, r) =
            closed_form_isospectral(&[c(-1.0)], &[c(0.25)], &EntireFunction::one(), |z| z, 1.0);
        assert!((r[0].re - 0.0919699).abs() < 1e-7);
        let (_, frozen) = closed_form_isospectral(&z, &rho, &EntireFunction::zero(), |z| z, 5.0);
        assert_eq!(frozen.as_slice(), &rho[..]);
    }

    #[test]
    fn frozen_under_constant_hamiltonian() {
        let constant = Observable::analytic(
            "1",
            |_, _| c(1.0),
            |z, _| crate::canonical::Gradient::zeros(z.len()),
        );
        let spec = FlowSpec::new(EntireFunction::z(), constant, (0.0, 0.1));
        let z = [c(-1.0), c(0.5)];
        let rho = [c(0.2), c(0.4)];
        let traj = integrate(&z, &rho, &spec).unwrap();
        assert_eq!(traj.last().z, z.to_vec());
        assert_eq!(traj.last().rho, rho.to_vec());
    }

    #[test]
    fn random_isospectral_flows_match_closed_form() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let log_like = || {
            Observable::pole_sum(
                "ln(1+z^2)",
                |z| (1.0 + z * z).ln(),
                |z| 2.0 * z / (1.0 + z * z),
            )
        };
        for _ in 0..5 {
            let n = rng.gen_range(1..=5);
            let z: Vec<C64> = (0..n)
                .map(|k| c(-2.0 + k as f64 + rng.gen_range(0.0..0.8)))
                .collect();
            let rho: Vec<C64> = (0..n).map(|_| c(rng.gen_range(0.1..1.0))).collect();
            let mut spec = FlowSpec::new(EntireFunction::z(), log_like(), (0.0, 1.0));
            spec.sample_every = 250;
            let traj = integrate(&z, &rho, &spec).unwrap();
            let (_, exact) =
                closed_form_isospectral(&z, &rho, &spec.f, |z| 2.0 * z / (1.0 + z * z), 1.0);
            let err = traj
                .last()
                .rho
                .iter()
                .zip(&exact)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(err <= 1e-8, "{err}");
            assert!(traj.z_drift <= 1e-13);
            assert!(exact.iter().all(|r| r.re > 0.0));
        }
    }

    #[test]
    fn collisions_abort() {
        // H = Σρ with f = 1 moves poles at speed ρ_k; they meet.
        let spec = FlowSpec::new(
            EntireFunction::one(),
            Observable::residue_sum(),
            (0.0, 10.0),
        );
        let r = integrate(&[c(0.0), c(0.01)], &[c(-1.0), c(1.0)], &spec);
        assert!(
            matches!(r, Err(Error::FlowAborted(_)) | Err(Error::InvalidInput(_))),
            "{r:?}"
        );
        let bad = FlowSpec {
            step: 0.0,
            ..FlowSpec::new(EntireFunction::one(), quadratic(), (0.0, 1.0))
        };
        assert!(integrate(&[c(0.0)], &[c(1.0)], &bad).is_err());
    }
}
