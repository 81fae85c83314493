//! `abl`: verification suites, bracket evaluation, string spectra, Liouville
//! maps, isospectral flows and the refinement study for the second bracket.
//!
//! Exit codes: 0 pass, 1 tolerance failure, 2 invalid input.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use abl_core::canonical::{bracket_observables, Observable};
use abl_core::contour::{
    bracket_contour, bracket_residues, closed_form_rational, closed_form_trigonometric,
    closed_form_zsquared, QuadratureConfig,
};
use abl_core::flows::{closed_form_isospectral, demo_spec, integrate, FlowSpec, DEFAULT_STEP};
use abl_core::krein::{
    dirichlet_eigenvalues, inverse_string, spectrum, weyl_function, DiscreteString, StringSpectrum,
    WeylData,
};
use abl_core::liouville::{
    bump_potential, hamiltonians, lumped_string, refinement_csv, string_mass,
    theorem_31_refinement, GridConfig, Hamiltonians, LinePotential,
};
use abl_core::report::Report;
use abl_core::suites::{refinement_levels, run_suite, Suite, SuiteConfig, THM31_LAMBDA, THM31_MU};
use abl_core::{EntireFunction, Error, RationalFunction, C64};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(name = "abl", version, about = "Analytic bracket laboratory")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// RNG seed for randomised suites.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Number of random trials (suite default when omitted).
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Quadrature nodes per contour circle.
    #[arg(long, global = true)]
    nodes: Option<usize>,
    #[arg(long, global = true)]
    grid_half_width: Option<f64>,
    #[arg(long, global = true)]
    grid_h: Option<f64>,
    #[arg(long, global = true)]
    n_masses: Option<usize>,
    /// Tolerance override.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

impl Common {
    fn grid(&self) -> GridConfig {
        let d = GridConfig::default();
        GridConfig {
            half_width: self.grid_half_width.unwrap_or(d.half_width),
            h: self.grid_h.unwrap_or(d.h),
            n_masses: self.n_masses.unwrap_or(d.n_masses),
        }
    }

    fn quadrature(&self) -> QuadratureConfig {
        let mut q = QuadratureConfig::default();
        if let Some(n) = self.nodes {
            q.nodes = n;
        }
        q
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate {χ(p), χ(q)} along several independent paths.
    Bracket {
        /// Rational function JSON: {"constant", "poles", "residues"}.
        #[arg(long)]
        chi: PathBuf,
        /// Entire function: 0, 1, z, z^n, exp, poly:c0,c1,...
        #[arg(long, default_value = "1")]
        f: String,
        /// `re` or `re,im`.
        #[arg(long, allow_hyphen_values = true, value_parser = parse_complex)]
        p: C64,
        #[arg(long, allow_hyphen_values = true, value_parser = parse_complex)]
        q: C64,
        #[arg(long, value_enum, default_value_t = Method::All)]
        method: Method,
    },
    /// Run a verification suite and emit its JSON report.
    Verify {
        /// bracket, theorem21, jacobi, yb, zsq, compat, string, thm31, recursion, casimir, flows
        suite: String,
    },
    /// Integrate an isospectral flow and emit the trajectory CSV.
    Flow {
        /// Initial rational function JSON; the one-pole demo when omitted.
        #[arg(long)]
        chi: Option<PathBuf>,
        #[arg(long, default_value = "1")]
        f: String,
        #[arg(long, value_enum, default_value_t = FlowHamiltonian::Quadratic)]
        hamiltonian: FlowHamiltonian,
        #[arg(long, default_value_t = 1.0)]
        t_end: f64,
        #[arg(long, default_value_t = DEFAULT_STEP)]
        step: f64,
        #[arg(long, default_value_t = 1)]
        sample_every: usize,
    },
    /// Forward spectral map or inverse reconstruction of a discrete string.
    String {
        #[arg(value_enum)]
        direction: Direction,
        /// Forward: {"positions", "masses"}. Inverse: {"dirichlet", "residues"}.
        input: PathBuf,
    },
    /// Liouville map of a line potential to a lumped string and its Weyl data.
    Liouville {
        /// Potential JSON {"x0", "h", "values"}; the smooth bump on the grid when omitted.
        #[arg(long)]
        potential: Option<PathBuf>,
    },
    /// Refinement study of the first bracket against its closed formula (CSV).
    Thm31 {
        #[arg(long, default_value_t = THM31_LAMBDA)]
        lambda: f64,
        #[arg(long, default_value_t = THM31_MU)]
        mu: f64,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Method {
    Contour,
    Residues,
    Closed,
    Coords,
    All,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum FlowHamiltonian {
    /// H = Σ z_k²/2
    Quadratic,
    /// H = Σ ln(1 + z_k²)
    Log,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Direction {
    Forward,
    Inverse,
}

/// Failure classes mapped onto exit codes.
enum Failure {
    Tolerance(String),
    Invalid(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Invalid(e.to_string())
    }
}

type Outcome = std::result::Result<(), Failure>;

fn parse_complex(s: &str) -> std::result::Result<C64, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |t: &str| t.parse::<f64>().map_err(|e| format!("'{t}': {e}"));
    let z = match parts.as_slice() {
        [re] => C64::new(num(re)?, 0.0),
        [re, im] => C64::new(num(re)?, num(im)?),
        _ => return Err(format!("expected `re` or `re,im`, got '{s}'")),
    };
    if z.re.is_finite() && z.im.is_finite() {
        Ok(z)
    } else {
        Err(format!("'{s}' is not finite"))
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> std::result::Result<T, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))
}

fn emit(out: &Option<PathBuf>, text: &str) -> Outcome {
    let result = match out {
        Some(path) => fs::write(path, text),
        None => std::io::stdout().lock().write_all(text.as_bytes()),
    };
    result.map_err(|e| Failure::Invalid(format!("cannot write output: {e}")))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serialisable");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct BracketOutput {
    f: String,
    p: C64,
    q: C64,
    /// `(method, value)` in evaluation order.
    values: Vec<(String, C64)>,
    /// Largest pairwise relative deviation.
    max_deviation: f64,
    tolerance: f64,
    passed: bool,
}

fn cmd_bracket(common: &Common, chi: &Path, f: &str, p: C64, q: C64, method: Method) -> Outcome {
    let chi: RationalFunction = read_json(chi)?;
    let f = EntireFunction::parse(f)?;
    chi.check_off_poles(p)?;
    chi.check_off_poles(q)?;
    let wants = |m: Method| method == Method::All || method == m;
    let mut values = Vec::new();
    if wants(Method::Contour) {
        values.push((
            "contour".to_string(),
            bracket_contour(&chi, &f, p, q, &common.quadrature())?,
        ));
    }
    if wants(Method::Residues) && f.is_polynomial() {
        values.push(("residues".to_string(), bracket_residues(&chi, &f, p, q)?));
    }
    if wants(Method::Closed) {
        let closed = match f.label() {
            "1" => Some(closed_form_rational(&chi, p, q)?.value),
            "z" => Some(closed_form_trigonometric(&chi, p, q)?.value),
            "z^2" => Some(closed_form_zsquared(&chi, p, q)?.0.value),
            _ => None,
        };
        match closed {
            Some(v) => values.push(("closed".to_string(), v)),
            None if method == Method::Closed => {
                return Err(Failure::Invalid(format!(
                    "no closed form for f = {}",
                    f.label()
                )))
            }
            None => {}
        }
    }
    if wants(Method::Coords) {
        let v = bracket_observables(
            &Observable::chi_at(p),
            &Observable::chi_at(q),
            chi.poles(),
            chi.residues(),
            &f,
        )?;
        values.push(("coords".to_string(), v));
    }
    if method == Method::Residues && values.is_empty() {
        return Err(Failure::Invalid(format!(
            "residue path needs a polynomial f, got {}",
            f.label()
        )));
    }
    let mut max_deviation: f64 = 0.0;
    for (i, (_, a)) in values.iter().enumerate() {
        for (_, b) in &values[i + 1..] {
            let scale = a.norm().max(b.norm());
            if scale > 0.0 {
                max_deviation = max_deviation.max((a - b).norm() / scale);
            }
        }
    }
    let tolerance = common.tol.unwrap_or(1e-10);
    let passed = max_deviation <= tolerance;
    let out = BracketOutput {
        f: f.label().to_string(),
        p,
        q,
        values,
        max_deviation,
        tolerance,
        passed,
    };
    emit(&common.out, &to_json(&out))?;
    if passed {
        Ok(())
    } else {
        Err(Failure::Tolerance(format!(
            "max deviation {max_deviation:e} > {tolerance:e}"
        )))
    }
}

fn report_outcome(report: &Report) -> Outcome {
    if report.passed {
        return Ok(());
    }
    let failed: Vec<&str> = report
        .checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name.as_str())
        .collect();
    Err(Failure::Tolerance(format!(
        "{}: failed {}",
        report.suite,
        failed.join(", ")
    )))
}

fn cmd_verify(common: &Common, suite: &str) -> Outcome {
    let suite: Suite = suite.parse()?;
    let cfg = SuiteConfig {
        seed: common.seed,
        trials: common.trials,
        tolerance: common.tol,
        nodes: common.nodes,
        grid: common.grid(),
    };
    let report = run_suite(suite, &cfg)?;
    let mut text = report.to_json();
    text.push('\n');
    emit(&common.out, &text)?;
    for c in &report.checks {
        eprintln!(
            "{} {}: {:e} (tol {:e})",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.max_defect,
            c.tolerance
        );
    }
    report_outcome(&report)
}

#[allow(clippy::too_many_arguments)]
fn cmd_flow(
    common: &Common,
    chi: &Option<PathBuf>,
    f: &str,
    hamiltonian: FlowHamiltonian,
    t_end: f64,
    step: f64,
    sample_every: usize,
) -> Outcome {
    let (z, rho, mut spec) = match chi {
        None => demo_spec(),
        Some(path) => {
            let chi: RationalFunction = read_json(path)?;
            let spec = FlowSpec::new(EntireFunction::one(), Observable::residue_sum(), (0.0, 1.0));
            (chi.poles().to_vec(), chi.residues().to_vec(), spec)
        }
    };
    if chi.is_some() || f != "1" || !matches!(hamiltonian, FlowHamiltonian::Quadratic) {
        spec.f = EntireFunction::parse(f)?;
        spec.hamiltonian = match hamiltonian {
            FlowHamiltonian::Quadratic => Observable::pole_sum("z^2/2", |z| z * z / 2.0, |z| z),
            FlowHamiltonian::Log => Observable::pole_sum(
                "ln(1+z^2)",
                |z| (1.0 + z * z).ln(),
                |z| 2.0 * z / (1.0 + z * z),
            ),
        };
    }
    spec.t_span = (0.0, t_end);
    spec.step = step;
    spec.sample_every = sample_every;
    let traj = integrate(&z, &rho, &spec)?;
    emit(&common.out, &traj.to_csv())?;

    let h_prime = match hamiltonian {
        FlowHamiltonian::Quadratic => |z: C64| z,
        FlowHamiltonian::Log => |z: C64| 2.0 * z / (1.0 + z * z),
    };
    let (_, exact) = closed_form_isospectral(&z, &rho, &spec.f, h_prime, t_end);
    let err = traj
        .last()
        .rho
        .iter()
        .zip(&exact)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    let tolerance = common.tol.unwrap_or(1e-8);
    eprintln!(
        "closed-form deviation {err:e}, z drift {:e}, H drift rate {:e}",
        traj.z_drift, traj.h_drift_rate
    );
    if err <= tolerance {
        Ok(())
    } else {
        Err(Failure::Tolerance(format!(
            "closed-form deviation {err:e} > {tolerance:e}"
        )))
    }
}

#[derive(Serialize)]
struct ForwardOutput {
    #[serde(flatten)]
    spectrum: StringSpectrum,
    weyl: WeylData,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InverseInput {
    dirichlet: Vec<f64>,
    residues: Vec<f64>,
    #[serde(default)]
    constant: Option<f64>,
}

fn cmd_string(common: &Common, direction: Direction, input: &Path) -> Outcome {
    match direction {
        Direction::Forward => {
            let s: DiscreteString = read_json(input)?;
            let out = ForwardOutput {
                spectrum: spectrum(&s)?,
                weyl: weyl_function(&s)?,
            };
            emit(&common.out, &to_json(&out))
        }
        Direction::Inverse => {
            let raw: InverseInput = read_json(input)?;
            let w = WeylData::from_lambda_form(raw.dirichlet, raw.residues)?;
            if let Some(c) = raw.constant {
                if c != w.constant {
                    return Err(Failure::Invalid(format!(
                        "Weyl constant {c} does not match the normalisation {}",
                        w.constant
                    )));
                }
            }
            emit(&common.out, &to_json(&inverse_string(&w)?))
        }
    }
}

#[derive(Serialize)]
struct LiouvilleOutput {
    grid: GridConfig,
    string_mass: f64,
    hamiltonians: Hamiltonians,
    string: DiscreteString,
    dirichlet: Vec<f64>,
    /// Absent when the lumped spectrum has unresolvable clusters.
    weyl: Option<WeylData>,
    weyl_error: Option<String>,
}

fn cmd_liouville(common: &Common, potential: &Option<PathBuf>) -> Outcome {
    let mut grid = common.grid();
    let m = match potential {
        Some(path) => {
            let m: LinePotential = read_json(path)?;
            grid.h = m.h();
            grid.half_width = m.len().saturating_sub(1) as f64 * m.h() / 2.0;
            m
        }
        None => LinePotential::from_fn(&grid, bump_potential)?,
    };
    grid.validate()?;
    let string = lumped_string(&m, grid.n_masses)?;
    let (weyl, weyl_error) = match weyl_function(&string) {
        Ok(w) => (Some(w), None),
        Err(e) => {
            log::warn!("Weyl data unavailable: {e}");
            (None, Some(e.to_string()))
        }
    };
    let out = LiouvilleOutput {
        grid,
        string_mass: string_mass(&m),
        hamiltonians: hamiltonians(&m),
        dirichlet: dirichlet_eigenvalues(&string)?,
        string,
        weyl,
        weyl_error,
    };
    emit(&common.out, &to_json(&out))
}

fn cmd_thm31(common: &Common, lambda: f64, mu: f64) -> Outcome {
    let grid = common.grid();
    grid.validate()?;
    let rows = theorem_31_refinement(
        bump_potential,
        lambda,
        mu,
        grid.half_width,
        &refinement_levels(&grid),
    )?;
    emit(&common.out, &refinement_csv(&rows))?;
    let tolerance = common.tol.unwrap_or(1e-2);
    let last = rows.last().expect("three levels");
    let decreasing = rows.windows(2).all(|w| w[1].rel_error < w[0].rel_error);
    eprintln!(
        "J0 relative error {:e}, J1 relative error {:e}",
        last.rel_error, last.j1_rel_error
    );
    if last.rel_error <= tolerance && decreasing {
        Ok(())
    } else {
        Err(Failure::Tolerance(format!(
            "relative error {:e} (tol {tolerance:e}), decreasing = {decreasing}",
            last.rel_error
        )))
    }
}

fn configure_threads() -> std::result::Result<(), Failure> {
    let Ok(raw) = std::env::var("ABL_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        Failure::Invalid(format!("ABL_THREADS = '{raw}' is not a positive integer"))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Invalid(format!("thread pool: {e}")))
}

fn run(cli: &Cli) -> Outcome {
    configure_threads()?;
    let common = &cli.common;
    match &cli.command {
        Command::Bracket {
            chi,
            f,
            p,
            q,
            method,
        } => cmd_bracket(common, chi, f, *p, *q, *method),
        Command::Verify { suite } => cmd_verify(common, suite),
        Command::Flow {
            chi,
            f,
            hamiltonian,
            t_end,
            step,
            sample_every,
        } => cmd_flow(common, chi, f, *hamiltonian, *t_end, *step, *sample_every),
        Command::String { direction, input } => cmd_string(common, *direction, input),
        Command::Liouville { potential } => cmd_liouville(common, potential),
        Command::Thm31 { lambda, mu } => cmd_thm31(common, *lambda, *mu),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Tolerance(msg)) => {
            eprintln!("tolerance failure: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Invalid(msg)) => {
            eprintln!("invalid input: {msg}");
            ExitCode::from(2)
        }
    }
}
