//! Seeded verification suites. Each suite draws its random instances up front
//! from a `ChaCha8Rng`, evaluates trials in parallel and reduces the results in
//! trial order, so a fixed seed gives a byte-identical [`Report`].

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::canonical::{
    bracket_observables, compatibility_check, double_contour_oracle, jacobi_defect, oracle_tensor,
    s_coordinate_brackets, structure_tensor, Functional, Observable, OracleConfig,
};
use crate::contour::{
    bracket_contour, bracket_residues, closed_form_rational, closed_form_trigonometric,
    closed_form_zsquared, QuadratureConfig,
};
use crate::flows::{closed_form_isospectral, demo_spec, integrate, FlowSpec};
use crate::krein::{
    boundary_polynomials, inverse_string, partial_fraction_defect, product_form_check, shoot_weyl,
    spectrum, weyl_function, DiscreteString, WeylData, WEYL_CONSTANT,
};
use crate::liouville::{
    bump_potential, casimir_checks, recursion_check, theorem_31_refinement, GridConfig,
    LinePotential,
};
use crate::numdiff::DEFAULT_STEP;
use crate::report::{fold_max, Check, Report};
use crate::yang_baxter::{implication_check, verify_family, zsq_nonclosure, Family};
use crate::{EntireFunction, Error, RationalFunction, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Suite {
    Bracket,
    Theorem21,
    Jacobi,
    Yb,
    Zsq,
    Compat,
    String,
    Thm31,
    Recursion,
    Casimir,
    Flows,
}

impl Suite {
    pub const ALL: [Suite; 11] = [
        Suite::Bracket,
        Suite::Theorem21,
        Suite::Jacobi,
        Suite::Yb,
        Suite::Zsq,
        Suite::Compat,
        Suite::String,
        Suite::Thm31,
        Suite::Recursion,
        Suite::Casimir,
        Suite::Flows,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Bracket => "bracket",
            Suite::Theorem21 => "theorem21",
            Suite::Jacobi => "jacobi",
            Suite::Yb => "yb",
            Suite::Zsq => "zsq",
            Suite::Compat => "compat",
            Suite::String => "string",
            Suite::Thm31 => "thm31",
            Suite::Recursion => "recursion",
            Suite::Casimir => "casimir",
            Suite::Flows => "flows",
        }
    }

    pub fn default_trials(self) -> usize {
        match self {
            Suite::Bracket => 100,
            Suite::Theorem21 => 50,
            Suite::Jacobi => 50,
            Suite::Yb | Suite::Zsq | Suite::Compat => 20,
            Suite::String => 200,
            Suite::Casimir | Suite::Flows => 5,
            Suite::Thm31 | Suite::Recursion => 1,
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Suite::ALL.iter().map(|x| x.name()).collect();
                Error::InvalidInput(format!(
                    "unknown suite '{s}' (expected one of {})",
                    names.join(", ")
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteConfig {
    pub seed: u64,
    /// Defaults to [`Suite::default_trials`].
    pub trials: Option<usize>,
    /// Replaces every bound-above tolerance of the suite.
    pub tolerance: Option<f64>,
    /// Quadrature nodes per circle for contour paths.
    pub nodes: Option<usize>,
    pub grid: GridConfig,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            trials: None,
            tolerance: None,
            nodes: None,
            grid: GridConfig::default(),
        }
    }
}

impl SuiteConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == Some(0) {
            return Err(Error::InvalidInput("trials must be positive".into()));
        }
        if let Some(t) = self.tolerance {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "tolerance {t} must be finite and non-negative"
                )));
            }
        }
        if let Some(n) = self.nodes {
            if n < 8 {
                return Err(Error::InvalidInput(format!("nodes = {n}; need at least 8")));
            }
        }
        self.grid.validate()
    }

    fn tol(&self, default: f64) -> f64 {
        self.tolerance.unwrap_or(default)
    }

    fn quadrature(&self) -> QuadratureConfig {
        let mut q = QuadratureConfig::default();
        if let Some(n) = self.nodes {
            q.nodes = n;
        }
        q
    }

    /// Coarser than [`OracleConfig::default`].
    fn oracle(&self) -> OracleConfig {
        let mut o = OracleConfig {
            outer_nodes: 48,
            ..OracleConfig::default()
        };
        o.inner.nodes = self.nodes.unwrap_or(64);
        o
    }
}

pub fn run_suite(suite: Suite, cfg: &SuiteConfig) -> Result<Report> {
    cfg.validate()?;
    let trials = cfg.trials.unwrap_or(suite.default_trials());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let checks = match suite {
        Suite::Bracket => bracket_suite(cfg, &mut rng, trials),
        Suite::Theorem21 => theorem21_suite(cfg, &mut rng, trials),
        Suite::Jacobi => jacobi_suite(cfg, &mut rng, trials),
        Suite::Yb => yb_suite(cfg, &mut rng, trials),
        Suite::Zsq => zsq_suite(cfg, &mut rng, trials),
        Suite::Compat => compat_suite(cfg, &mut rng, trials),
        Suite::String => string_suite(cfg, &mut rng, trials),
        Suite::Thm31 => thm31_suite(cfg),
        Suite::Recursion => recursion_suite(cfg),
        Suite::Casimir => casimir_suite(cfg, &mut rng, trials),
        Suite::Flows => flows_suite(cfg, &mut rng, trials),
    };
    Ok(Report::new(suite.name(), cfg.seed, checks))
}

/// Running reduction of one named quantity over trials.
#[derive(Debug, Clone)]
struct Tally {
    name: String,
    worst: f64,
    bound: f64,
    samples: usize,
    floor: bool,
}

impl Tally {
    fn upper(name: impl Into<String>, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            worst: 0.0,
            bound: tolerance,
            samples: 0,
            floor: false,
        }
    }

    /// Passes when every sample is at least `threshold`.
    fn lower(name: impl Into<String>, threshold: f64) -> Self {
        Self {
            name: name.into(),
            worst: f64::INFINITY,
            bound: threshold,
            samples: 0,
            floor: true,
        }
    }

    fn add(&mut self, value: f64, samples: usize) {
        if samples == 0 {
            return;
        }
        self.samples += samples;
        self.worst = if self.floor {
            if self.worst.is_nan() || value.is_nan() {
                f64::NAN
            } else {
                self.worst.min(value)
            }
        } else {
            fold_max(self.worst, value)
        };
    }

    fn check(self) -> Check {
        if self.floor {
            let value = if self.samples == 0 { 0.0 } else { self.worst };
            Check::at_least(self.name, value, self.bound, self.samples)
        } else {
            Check::new(self.name, self.worst, self.bound, self.samples)
        }
    }
}

/// `(value, samples)` per tally, in tally order.
type Outcome = Vec<(f64, usize)>;

fn reduce(mut tallies: Vec<Tally>, outcomes: Vec<Result<Outcome>>) -> Vec<Check> {
    let mut errors = 0usize;
    for (trial, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(values) => {
                debug_assert_eq!(values.len(), tallies.len());
                for (t, (v, n)) in tallies.iter_mut().zip(values) {
                    t.add(v, n);
                }
            }
            Err(e) => {
                if errors == 0 {
                    log::warn!("trial {trial} failed: {e}");
                }
                errors += 1;
            }
        }
    }
    let mut checks: Vec<Check> = tallies.into_iter().map(Tally::check).collect();
    if errors > 0 {
        checks.push(Check::new("trial_errors", errors as f64, 0.0, errors));
    }
    checks
}

fn run_trials<T: Sync>(
    instances: &[T],
    trial: impl Fn(&T) -> Result<Outcome> + Sync + Send,
) -> Vec<Result<Outcome>> {
    instances.par_iter().map(trial).collect()
}

fn rel(a: C64, b: C64) -> f64 {
    let scale = a.norm().max(b.norm());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).norm() / scale
    }
}

// ---------------------------------------------------------------- generators

/// Poles in the disk of radius 2 with pairwise distance at least 0.3.
fn random_poles(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
    let mut poles: Vec<C64> = Vec::with_capacity(n);
    while poles.len() < n {
        let z = C64::from_polar(2.0 * rng.gen::<f64>().sqrt(), rng.gen_range(0.0..2.0 * PI));
        if poles.iter().all(|p| (p - z).norm() >= 0.3) {
            poles.push(z);
        }
    }
    poles
}

fn random_residues(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
    (0..n)
        .map(|_| C64::from_polar(rng.gen_range(0.2..1.5), rng.gen_range(0.0..2.0 * PI)))
        .collect()
}

/// A point in `|w| ≤ 3.5` at distance at least 0.5 from every pole.
fn random_point(rng: &mut ChaCha8Rng, poles: &[C64]) -> C64 {
    loop {
        let w = C64::from_polar(3.5 * rng.gen::<f64>().sqrt(), rng.gen_range(0.0..2.0 * PI));
        if poles.iter().all(|p| (p - w).norm() >= 0.5) {
            return w;
        }
    }
}

fn random_pair(rng: &mut ChaCha8Rng, poles: &[C64]) -> (C64, C64) {
    let p = random_point(rng, poles);
    loop {
        let q = random_point(rng, poles);
        if (p - q).norm() >= 0.5 {
            return (p, q);
        }
    }
}

fn nonpolynomial_sampler() -> EntireFunction {
    EntireFunction::sampler(|z| 1.0 + (0.5 * z).sin(), "1+sin(z/2)")
}

#[derive(Debug, Clone)]
struct PoleInstance {
    z: Vec<C64>,
    rho: Vec<C64>,
}

fn pole_instance(rng: &mut ChaCha8Rng, max_n: usize) -> PoleInstance {
    let n = rng.gen_range(1..=max_n);
    PoleInstance {
        z: random_poles(rng, n),
        rho: random_residues(rng, n),
    }
}

// ---------------------------------------------------------------- suites

fn bracket_suite(cfg: &SuiteConfig, rng: &mut ChaCha8Rng, trials: usize) -> Vec<Check> {
    let families = [
        EntireFunction::one(),
        EntireFunction::z(),
        EntireFunction::z_squared(),
    ];
    let instances: Vec<(usize, RationalFunction, C64, C64)> = (0..trials)
        .map(|t| {
            let which = t % families.len();
            let inst = pole_instance(rng, 6);
            // a nonzero constant only where the closed form is insensitive to it
            let c_inf = if which == 0 {
                C64::new(rng.gen_range(-1.0..1.0), 0.0)
            } else {
                C64::new(0.0, 0.0)
            };
            let (p, q) = random_pair(rng, &inst.z);
            let chi = RationalFunction::new(c_inf, inst.z, inst.rho)
                .expect("generated poles are separated");
            (which, chi, p, q)
        })
        .collect();
    let quad = cfg.quadrature();
    let outcomes = run_trials(&instances, |(which, chi, p, q)| {
        let (p, q) = (*p, *q);
        let f = &families[*which];
        let contour = bracket_contour(chi, f, p, q, &quad)?;
        let residues = bracket_residues(chi, f, p, q)?;
        let closed = match which {
            0 => closed_form_rational(chi, p, q)?.value,
            1 => closed_form_trigonometric(chi, p, q)?.value,
            _ => closed_form_zsquared(chi, p, q)?.0.value,
        };
        let coords = bracket_observables(
            &Observable::chi_at(p),
            &Observable::chi_at(q),
            chi.poles(),
            chi.residues(),
            f,
        )?;
        let values = [contour, residues, closed, coords];
        let mut worst: f64 = 0.0;
        for i in 0..values.len() {
            for j in i + 1..values.len() {
                worst = fold_max(worst, rel(values[i], values[j]));
            }
        }
        let mut out = vec![(0.0, 0); families.len()];
        out[*which] = (worst, 1);
        Ok(out)
    });
    let tallies = families
        .iter()
        .map(|f| Tally::upper(format!("agreement_f={}", f.label()), cfg.tol(1e-10)))
        .collect();
    reduce(tallies, outcomes)
}

fn theorem21_suite(cfg: &SuiteConfig, rng: &mut ChaCha8Rng, trials: usize) -> Vec<Check> {
    let families = [
        EntireFunction::one(),
        EntireFunction::z(),
        EntireFunction::z_squared(),
        EntireFunction::exp(),
    ];
    let instances: Vec<(usize, PoleInstance)> = (0..trials)
        .map(|t| (t % families.len(), pole_instance(rng, 4)))
        .collect();
    let oracle_cfg = cfg.oracle();
    let outcomes = run_trials(&instances, |(which, inst)| {
        let f = &families[*which];
        let chi = RationalFunction::new(C64::new(0.0, 0.0), inst.z.clone(), inst.rho.clone())?;
        let formula = structure_tensor(f, &inst.z, &inst.rho)?;
        let oracle = oracle_tensor(&chi, f, &oracle_cfg)?;
        let tensor = oracle.distance(&formula) / formula.max_abs_entry().max(1.0);
        let mut diagonal: f64 = 0.0;
        for n in 0..inst.z.len() {
            let v = double_contour_oracle(&chi, f, Functional::ZRho, n, n, &oracle_cfg)?;
            let want = -inst.rho[n] * inst.rho[n] * f.eval(inst.z[n]);
            diagonal = fold_max(diagonal, (v - want).norm() / want.norm().max(1.0));
        }
        let s = s_coordinate_brackets(&inst.z, &inst.rho, f)?;
        let n = inst.z.len();
        Ok(vec![
            (tensor, 1),
            (diagonal, n),
            (s.max_defect(), n * n),
            (formula.antisymmetry_defect(), 1),
        ])
    });
    reduce(
        vec![
            Tally::upper("structure_constants_vs_oracle", cfg.tol(1e-8)),
            Tally::upper("diagonal_zrho_rho", cfg.tol(1e-8)),
            Tally::upper("s_coordinates", cfg.tol(1e-8)),
            Tally::upper("antisymmetry", cfg.tol(1e-14)),
        ],
        outcomes,
    )
}

#[derive(Debug, Clone, Copy)]
enum ObsKind {
    Chi(C64),
    Delta(C64),
    S(C64),
    Rho(usize),
    Z(usize),
    ZRho(usize),
    Laurent(u32),
}

impl ObsKind {
    fn random(rng: &mut ChaCha8Rng, poles: &[C64]) -> Self {
        let n = poles.len();
        match rng.gen_range(0..7) {
            0 => ObsKind::Chi(random_point(rng, poles)),
            1 => ObsKind::Delta(random_point(rng, poles)),
            2 => ObsKind::S(random_point(rng, poles)),
            3 => ObsKind::Rho(rng.gen_range(0..n)),
            4 => ObsKind::Z(rng.gen_range(0..n)),
            5 => ObsKind::ZRho(rng.gen_range(0..n)),
            _ => ObsKind::Laurent(rng.gen_range(0..3)),
        }
    }

    fn observable(self) -> Observable {
        match self {
            ObsKind::Chi(p) => Observable::chi_at(p),
            ObsKind::Delta(p) => Observable::delta_at(p),
            ObsKind::S(p) => Observable::s_at(p),
            ObsKind::Rho(k) => Observable::rho(k),
            ObsKind::Z(k) => Observable::z(k),
            ObsKind::ZRho(k) => Observable::z_rho(k),
            ObsKind::Laurent(j) => Observable::laurent(j),
        }
    }
}

fn jacobi_suite(cfg: &SuiteConfig, rng: &mut ChaCha8Rng, trials: usize) -> Vec<Check> {
    let families = [
        EntireFunction::one(),
        EntireFunction::z(),
        EntireFunction::z_squared(),
        EntireFunction::exp(),
        nonpolynomial_sampler(),
    ];
    let instances: Vec<(usize, PoleInstance, [ObsKind; 3])> = (0..trials)
        .map(|t| {
            let inst = pole_instance(rng, 4);
            let triple = [0; 3].map(|_| ObsKind::random(rng, &inst.z));
            (t % families.len(), inst, triple)
        })
        .collect();
    let outcomes = run_trials(&instances, |(which, inst, triple)| {
        let [a, b, c] = triple.map(ObsKind::observable);
        let d = jacobi_defect(
            &a,
            &b,
            &c,
            &inst.z,
            &inst.rho,
            &families[*which],
            DEFAULT_STEP,
        )?;
        Ok(vec![(d.norm(), 1)])
    });
    reduce(vec![Tally::upper("cyclic_defect", cfg.tol(1e-6))], outcomes)
}

type Pairs = Vec<(C64, C64)>;

fn yb_suite(cfg: &SuiteConfig, rng: &mut ChaCha8Rng, trials: usize) -> Vec<Check> {
    let instances: Vec<(PoleInstance, Pairs, Pairs)> = (0..trials)
        .map(|_| {
            let inst = pole_instance(rng, 3);
            let fit = (0..30).map(|_| random_pair(rng, &inst.z)).collect();
            let test = (0..10).map(|_| random_pair(rng, &inst.z)).collect();
            (inst, fit, test)
        })
        .collect();
    let tol = cfg.tol(1e-9);
    let families = [
        Family::Rational,
        Family::TrigonometricHalf,
        Family::Trigonometric,
    ];
    let outcomes = run_trials(&instances, |(inst, fit, test)| {
        let mut out = Vec::new();
        for family in families {
            for c in verify_family(family, &inst.z, &inst.rho, fit, tol)? {
                out.push((c.max_defect, c.samples));
            }
            let c = implication_check(&inst.z, &inst.rho, family, fit, test, tol)?;
            out.push((c.max_defect, c.samples));
        }
        Ok(out)
    });
    let mut tallies = Vec::new();
    for name in ["rational", "trigonometric", "trigonometric_qp"] {
        for kind in ["commuting", "s_delta", "implication"] {
            tallies.push(Tally::upper(format!("{name}_{kind}"), tol));
        }
    }
    reduce(tallies, outcomes)
}

fn zsq_suite(cfg: &SuiteConfig, rng: &mut ChaCha8Rng, trials: usize) -> Vec<Check> {
    let instances: Vec<(PoleInstance, Vec<C64>)> = (0..trials)
        .map(|_| {
            let inst = pole_instance(rng, 4);
            let pts = (0..20).map(|_| random_point(rng, &inst.z)).collect();
            (inst, pts)
        })
        .collect();
    let tol = cfg.tol(1e-9);
    let outcomes = run_trials(&instances, |(inst, pts)| {
        let r = zsq_nonclosure(&inst.z, &inst.rho, pts, tol, 1e-2)?;
        Ok(vec![
            (r.identity.max_defect, r.identity.samples),
            (r.closure_violation.max_defect, r.closure_violation.samples),
        ])
    });
    reduce(
        vec![
            Tally::upper("extension_identity", tol),
            Tally::lower("nonclosure_witness", 1e-2),
        ],
        outcomes,
    )
}

fn compat_suite(cfg: &SuiteConfig, rng: &mut ChaCha8Rng, trials: usize) -> Vec<Check> {
    let families = [
        EntireFunction::one(),
        EntireFunction::z(),
        EntireFunction::z_squared(),
        EntireFunction::exp(),
    ];
    let instances: Vec<(usize, usize, PoleInstance, [C64; 3])> = (0..trials)
        .map(|_| {
            let i = rng.gen_range(0..families.len());
            let j = (i + rng.gen_range(1..families.len())) % families.len();
            let inst = pole_instance(rng, 4);
            let pts = [0; 3].map(|_| random_point(rng, &inst.z));
            (i, j, inst, pts)
        })
        .collect();
    let outcomes = run_trials(&instances, |(i, j, inst, pts)| {
        let r = compatibility_check(&families[*i], &families[*j], &inst.z, &inst.rho, *pts)?;
        Ok(vec![
            (r.linearity_defect, 1),
            (r.max_pencil_defect(), r.pencil_jacobi.len()),
        ])
    });
    reduce(
        vec![
            Tally::upper("tensor_linearity", cfg.tol(1e-14)),
            Tally::upper("pencil_jacobi", cfg.tol(1e-6)),
        ],
        outcomes,
    )
}

fn random_string(rng: &mut ChaCha8Rng, n: usize) -> Result<DiscreteString> {
    let mut positions: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.95..1.95)).collect();
    positions.sort_by(f64::total_cmp);
    let masses = (0..n)
        .map(|_| 10f64.powf(rng.gen_range(-2.0..2.0)))
        .collect();
    DiscreteString::new(positions, masses)
}

const CHART_LAMBDAS: [f64; 6] = [0.05, 0.4, 1.7, 6.0, 20.0, -2.0];

fn single_mass_checks(rng: &mut ChaCha8Rng, tol: f64) -> Vec<Check> {
    let mut closed: f64 = 0.0;
    let mut samples = 0;
    let mut unit: f64 = f64::NAN;
    for t in 0..20 {
        let (m, xi) = if t == 0 {
            (1.0, 0.0)
        } else {
            (
                10f64.powf(rng.gen_range(-1.0..1.0)),
                rng.gen_range(-1.9..1.9),
            )
        };
        let r = DiscreteString::new(vec![xi], vec![m]).and_then(|s| spectrum(&s));
        let (lambda, mu) = (4.0 / (m * (4.0 - xi * xi)), 1.0 / (m * (2.0 - xi)));
        let defect = match &r {
            Ok(s) => {
                ((s.dirichlet[0] - lambda).abs() / lambda).max((s.neumann_left[0] - mu).abs() / mu)
            }
            Err(_) => f64::NAN,
        };
        if t == 0 {
            unit = match &r {
                Ok(s) => (s.residues[0] - 0.25).abs(),
                Err(_) => f64::NAN,
            };
        }
        closed = fold_max(closed, defect);
        samples += 1;
    }
    vec![
        Check::new("single_mass_spectra", closed, tol, samples),
        Check::new("single_mass_unit_residue", unit, tol, 1),
    ]
}

fn string_suite(cfg: &SuiteConfig, rng: &mut ChaCha8Rng, trials: usize) -> Vec<Check> {
    let mut checks = single_mass_checks(rng, cfg.tol(1e-12));
    let instances: Vec<Result<DiscreteString>> = (0..trials)
        .map(|_| {
            let n = rng.gen_range(1..=10);
            random_string(rng, n)
        })
        .collect();
    let outcomes = run_trials(&instances, |s| {
        let s = s.as_ref().map_err(Clone::clone)?;
        let interlaced = match spectrum(s) {
            Err(Error::Interlacing(_)) => 1.0,
            Err(e) => return Err(e),
            Ok(_) => 0.0,
        };
        let spec = spectrum(s)?;
        let w = weyl_function(s)?;
        let e0 = (shoot_weyl(s.positions(), s.masses(), 0.0) - WEYL_CONSTANT)
            .abs()
            .max((w.eval_lambda(C64::new(0.0, 0.0))?.re - WEYL_CONSTANT).abs());
        let product = product_form_check(&boundary_polynomials(s), &spec);
        let chart = chart_defect(&w)?;
        let partial = partial_fraction_defect(s, &w, &CHART_LAMBDAS)?;
        let round_trip = if s.len() <= 6 {
            (round_trip_defect(s, &w)?, 1)
        } else {
            (0.0, 0)
        };
        Ok(vec![
            (interlaced, 1),
            (e0, 1),
            (product, 1),
            (chart, CHART_LAMBDAS.len()),
            (partial, CHART_LAMBDAS.len()),
            round_trip,
        ])
    });
    checks.extend(reduce(
        vec![
            Tally::upper("interlacing_violations", 0.0),
            Tally::upper("weyl_at_zero", cfg.tol(1e-14)),
            Tally::upper("product_formula", cfg.tol(1e-10)),
            Tally::upper("chart_consistency", cfg.tol(1e-10)),
            Tally::upper("partial_fractions_vs_shooting", cfg.tol(1e-10)),
            Tally::upper("round_trip", cfg.tol(1e-7)),
        ],
        outcomes,
    ));
    checks
}

/// `λ`-form against `z`-form at `z = -1/λ`, relative.
fn chart_defect(w: &WeylData) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &l in &CHART_LAMBDAS {
        let a = w.eval_lambda(C64::new(l, 0.0))?;
        let b = w.eval_z(C64::new(-1.0 / l, 0.0))?;
        worst = fold_max(worst, (a - b).norm() / a.norm().max(1.0));
    }
    Ok(worst)
}

fn round_trip_defect(s: &DiscreteString, w: &WeylData) -> Result<f64> {
    let back = inverse_string(w)?;
    if back.len() != s.len() {
        return Ok(f64::INFINITY);
    }
    let mut worst: f64 = 0.0;
    for (a, b) in s.positions().iter().zip(back.positions()) {
        worst = fold_max(worst, (a - b).abs());
    }
    for (a, b) in s.masses().iter().zip(back.masses()) {
        worst = fold_max(worst, (a - b).abs() / a);
    }
    Ok(worst)
}

/// Spectral parameters for the bracket check; both sit below the lowest
/// Dirichlet eigenvalue of the bump.
pub const THM31_LAMBDA: f64 = 0.3;
pub const THM31_MU: f64 = 0.7;

/// `(4h, n/4)`, `(2h, n/2)`, `(h, n)` around the configured grid.
pub fn refinement_levels(grid: &GridConfig) -> [(f64, usize); 3] {
    let n = grid.n_masses;
    [
        (4.0 * grid.h, (n / 4).max(1)),
        (2.0 * grid.h, (n / 2).max(1)),
        (grid.h, n),
    ]
}

fn thm31_suite(cfg: &SuiteConfig) -> Vec<Check> {
    let levels = refinement_levels(&cfg.grid);
    let tol = cfg.tol(1e-2);
    match theorem_31_refinement(
        bump_potential,
        THM31_LAMBDA,
        THM31_MU,
        cfg.grid.half_width,
        &levels,
    ) {
        Ok(rows) => {
            let last = rows.last().expect("three levels");
            let nonmonotone = rows
                .windows(2)
                .filter(|w| !(w[1].rel_error < w[0].rel_error))
                .count();
            vec![
                Check::new("j0_rel_error", last.rel_error, tol, 1),
                Check::new(
                    "j0_nonmonotone_steps",
                    nonmonotone as f64,
                    0.0,
                    rows.len() - 1,
                ),
                Check::new("j1_rel_error", last.j1_rel_error, tol, 1),
            ]
        }
        Err(e) => {
            log::warn!("Weyl-bracket check failed: {e}");
            vec![Check::new("j0_rel_error", f64::NAN, tol, 0)]
        }
    }
}

fn recursion_suite(cfg: &SuiteConfig) -> Vec<Check> {
    let m = match LinePotential::from_fn(&cfg.grid, bump_potential) {
        Ok(m) => m,
        Err(e) => {
            log::warn!("{e}");
            return vec![Check::new("n1", f64::NAN, cfg.tol(1e-6), 0)];
        }
    };
    let (one, two) = rayon::join(|| recursion_check(&m, 1), || recursion_check(&m, 2));
    let value = |r: &Result<_>, pick: fn(&crate::liouville::RecursionReport) -> f64| match r {
        Ok(r) => pick(r),
        Err(_) => f64::NAN,
    };
    vec![
        Check::new("n1", value(&one, |r| r.defect), cfg.tol(1e-6), 1),
        Check::new("n2", value(&two, |r| r.defect), cfg.tol(1e-2), 1),
        Check::new(
            "n2_quarter_h3",
            value(&two, |r| r.quarter_h3_defect.unwrap_or(f64::NAN)),
            cfg.tol(1e-2),
            1,
        ),
    ]
}

fn casimir_suite(cfg: &SuiteConfig, rng: &mut ChaCha8Rng, trials: usize) -> Vec<Check> {
    let params: Vec<(f64, f64, f64, f64)> = (0..trials)
        .map(|_| {
            (
                rng.gen_range(0.1..0.5),
                rng.gen_range(0.2..1.5),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(0.7..2.0),
            )
        })
        .collect();
    let grid = cfg.grid;
    let outcomes = run_trials(&params, |&(floor, height, centre, width)| {
        let m = LinePotential::from_fn(&grid, |x| {
            floor + height * (-((x - centre) / width).powi(2)).exp()
        })?;
        let r = casimir_checks(&m)?;
        Ok(vec![(r.j0_h0, 1), (r.j1_h1, 1)])
    });
    reduce(
        vec![
            Tally::upper("j0_grad_h0", cfg.tol(1e-4)),
            Tally::upper("j1_grad_h1", cfg.tolerance.unwrap_or(0.0)),
        ],
        outcomes,
    )
}

fn flows_suite(cfg: &SuiteConfig, rng: &mut ChaCha8Rng, trials: usize) -> Vec<Check> {
    let instances: Vec<(Vec<C64>, Vec<C64>)> = (0..trials)
        .map(|_| {
            let n = rng.gen_range(1..=5);
            let z = (0..n)
                .map(|k| C64::new(-2.0 + k as f64 + rng.gen_range(0.0..0.8), 0.0))
                .collect();
            let rho = (0..n)
                .map(|_| C64::new(rng.gen_range(0.1..1.0), 0.0))
                .collect();
            (z, rho)
        })
        .collect();
    let h_prime = |z: C64| 2.0 * z / (1.0 + z * z);
    let outcomes = run_trials(&instances, |(z, rho)| {
        let h = Observable::pole_sum("ln(1+z^2)", |z| (1.0 + z * z).ln(), h_prime);
        let mut spec = FlowSpec::new(EntireFunction::z(), h, (0.0, 1.0));
        spec.sample_every = 250;
        let traj = integrate(z, rho, &spec)?;
        let (_, exact) = closed_form_isospectral(z, rho, &spec.f, h_prime, 1.0);
        let err = traj
            .last()
            .rho
            .iter()
            .zip(&exact)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, fold_max);
        let negative = exact.iter().filter(|r| !(r.re > 0.0)).count();
        Ok(vec![
            (err, 1),
            (traj.z_drift, 1),
            (traj.h_drift_rate, 1),
            (negative as f64, exact.len()),
        ])
    });
    let mut checks = reduce(
        vec![
            Tally::upper("rk4_vs_closed_form", cfg.tol(1e-8)),
            Tally::upper("z_drift", cfg.tol(1e-13)),
            Tally::upper("h_drift_rate", cfg.tol(1e-10)),
            Tally::upper("residue_sign_changes", 0.0),
        ],
        outcomes,
    );
    let (z, rho, spec) = demo_spec();
    let demo = integrate(&z, &rho, &spec)
        .map(|t| (t.last().rho[0].re - 0.25 * (-1.0f64).exp()).abs())
        .unwrap_or(f64::NAN);
    checks.push(Check::new("demo_endpoint", demo, cfg.tol(1e-9), 1));
    checks
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(seed: u64, trials: usize) -> SuiteConfig {
        SuiteConfig {
            seed,
            trials: Some(trials),
            ..SuiteConfig::default()
        }
    }

    #[test]
    fn names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!(matches!(
            "nope".parse::<Suite>(),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn invalid_config_is_rejected() {
        let bad = SuiteConfig {
            trials: Some(0),
            ..SuiteConfig::default()
        };
        assert!(run_suite(Suite::Bracket, &bad).is_err());
        let bad = SuiteConfig {
            tolerance: Some(-1.0),
            ..SuiteConfig::default()
        };
        assert!(run_suite(Suite::Bracket, &bad).is_err());
    }

    #[test]
    fn tally_reduction() {
        let outcomes = vec![
            Ok(vec![(0.1, 1), (2.0, 1)]),
            Ok(vec![(0.3, 2), (0.5, 1)]),
            Err(Error::Undefined("x".into())),
        ];
        let checks = reduce(
            vec![Tally::upper("a", 1.0), Tally::lower("b", 1.0)],
            outcomes,
        );
        assert_eq!(checks[0].max_defect, 0.3);
        assert_eq!(checks[0].samples, 3);
        assert!(checks[0].passed);
        assert_eq!(checks[1].max_defect, 0.5);
        assert!(!checks[1].passed);
        assert_eq!(checks[2].name, "trial_errors");
        assert!(!checks[2].passed);
    }

    #[test]
    fn bracket_suite_small() {
        let r = run_suite(Suite::Bracket, &quick(3, 12)).unwrap();
        assert!(r.passed, "{}", r.to_json());
        assert_eq!(
            r.to_json(),
            run_suite(Suite::Bracket, &quick(3, 12)).unwrap().to_json()
        );
    }

    #[test]
    fn jacobi_override_fails() {
        let mut cfg = quick(5, 6);
        assert!(run_suite(Suite::Jacobi, &cfg).unwrap().passed);
        cfg.tolerance = Some(1e-15);
        let r = run_suite(Suite::Jacobi, &cfg).unwrap();
        assert!(!r.passed);
        assert!(r.checks[0].max_defect > 1e-15);
    }

    #[test]
    fn refinement_levels_scale() {
        assert_eq!(
            refinement_levels(&GridConfig::default()),
            [(4e-2, 25), (2e-2, 50), (1e-2, 100)]
        );
    }
}
