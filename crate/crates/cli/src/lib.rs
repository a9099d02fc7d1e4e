//! Command layer behind the `supergeo` binary.
//!
//! Exit codes: 0 pass, 1 check failed, 2 input error, 3 numeric domain
//! exceeded.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use supergeo::connection::ChristoffelField;
use supergeo::flows::{subset_label, GeodesicField, Integrator};
use supergeo::grassmann::subset_mask;
use supergeo::metric::{CotangentPoint, Hamiltonian};
use supergeo::model::Model;
use supergeo::projective::{self, shift_connection};
use supergeo::sampling::Sampler;
use supergeo::{Error, GrassmannNumber};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_DOMAIN: i32 = 3;

/// Residual tolerance for the symbolic checks when neither the model nor
/// the command line gives one.
pub const DEFAULT_CHECK_TOL: f64 = 1e-10;

#[derive(Parser, Debug)]
#[command(name = "supergeo", version, about = "Geodesics, connections and metrics on coordinate superdomains")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Integrate the geodesic flow from (x, v) and print the trajectory.
    Geodesic {
        #[arg(long)]
        model: PathBuf,
        /// Base point, one coordinate per ';'-separated field, each a
        /// comma-separated list of `c@subset` terms (e.g. `1@body,0.5@12`).
        #[arg(long, allow_hyphen_values = true)]
        x: String,
        #[arg(long, allow_hyphen_values = true)]
        v: String,
        #[command(flatten)]
        common: Common,
    },
    /// Run one residual check against the model.
    Check {
        #[arg(value_enum)]
        check: CheckKind,
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Decide whether two connections have the same geodesics up to
    /// reparametrization.
    Projective {
        #[arg(long)]
        model: PathBuf,
        /// Second model; defaults to the first shifted by its [oneform].
        #[arg(long)]
        model_b: Option<PathBuf>,
        /// File of initial conditions, one `<x> | <v>` per line.
        #[arg(long)]
        inits: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(clap::Args, Debug, Default)]
pub struct Common {
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CheckKind {
    Torsion,
    Compatibility,
    Intertwine,
    Transform,
}

impl CheckKind {
    pub fn name(self) -> &'static str {
        match self {
            CheckKind::Torsion => "torsion",
            CheckKind::Compatibility => "compatibility",
            CheckKind::Intertwine => "intertwine",
            CheckKind::Transform => "transform",
        }
    }

    pub fn all() -> [CheckKind; 4] {
        [
            CheckKind::Torsion,
            CheckKind::Compatibility,
            CheckKind::Intertwine,
            CheckKind::Transform,
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Report,
}

/// Result of a command: exit code plus what goes to stdout and stderr.
#[derive(Debug, Default)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn error(e: &Error) -> Self {
        let code = match e {
            Error::BlowUp { .. } | Error::Domain(_) | Error::SingularBody { .. } | Error::NonInvertible => EXIT_DOMAIN,
            _ => EXIT_INPUT,
        };
        let mut stderr = format!("error: {e}\n");
        if let Error::BlowUp { last_valid_time, .. } = e {
            let _ = writeln!(stderr, "last valid time: {last_valid_time}");
        }
        Outcome {
            code,
            stdout: String::new(),
            stderr,
        }
    }
}

/// Parses one coordinate value: comma-separated `c@subset` terms where the
/// subset is `body`, digits (`12` for θ₁θ₂) or dot-separated indices
/// (`1.10`); a bare number is a body term.
pub fn parse_value(text: &str, generators: usize) -> supergeo::Result<GrassmannNumber> {
    let mut out = GrassmannNumber::zero(generators);
    for term in text.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let bad = |reason: &str| Error::InvalidArgument(format!("bad coefficient literal {term:?}: {reason}"));
        let (coef, subset) = term.split_once('@').unwrap_or((term, "body"));
        let c: f64 = coef.trim().parse().map_err(|_| bad("coefficient is not a number"))?;
        let subset = subset.trim();
        let indices: Vec<usize> = if subset == "body" {
            Vec::new()
        } else if subset.contains('.') {
            subset
                .split('.')
                .map(|s| s.parse().map_err(|_| bad("bad generator index")))
                .collect::<supergeo::Result<_>>()?
        } else {
            subset
                .chars()
                .map(|ch| ch.to_digit(10).map(|d| d as usize).ok_or_else(|| bad("bad generator index")))
                .collect::<supergeo::Result<_>>()?
        };
        if indices.iter().any(|&i| i == 0 || i > generators) {
            return Err(bad(&format!("generator index outside 1..={generators}")));
        }
        let mut sorted = indices.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != indices.len() {
            return Err(bad("repeated generator"));
        }
        // reorder θ's into ascending order, tracking the sign
        let inversions = indices
            .iter()
            .enumerate()
            .flat_map(|(a, &i)| indices[a + 1..].iter().filter(move |&&j| j < i))
            .count();
        let sign = if inversions % 2 == 0 { 1.0 } else { -1.0 };
        out += GrassmannNumber::from_terms(generators, [(subset_mask(&sorted), sign * c)])?;
    }
    Ok(out)
}

/// Parses a `;`-separated point with one value per coordinate.
pub fn parse_point(text: &str, dim: usize, generators: usize) -> supergeo::Result<Vec<GrassmannNumber>> {
    let parts: Vec<&str> = if dim == 0 { Vec::new() } else { text.split(';').collect() };
    if parts.len() != dim {
        return Err(Error::Dimension(format!(
            "{:?} has {} components, the model has {dim} coordinates",
            text,
            parts.len()
        )));
    }
    parts.iter().map(|p| parse_value(p, generators)).collect()
}

/// Reads `<x> | <v>` lines; blank lines and `#` comments are skipped.
pub fn parse_inits(text: &str, dim: usize, generators: usize) -> supergeo::Result<Vec<(Vec<GrassmannNumber>, Vec<GrassmannNumber>)>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (x, v) = line.split_once('|').ok_or_else(|| Error::Model {
            line: idx + 1,
            reason: "expected `<x> | <v>`".into(),
        })?;
        let wrap = |e: Error| Error::Model {
            line: idx + 1,
            reason: e.to_string(),
        };
        out.push((
            parse_point(x.trim(), dim, generators).map_err(wrap)?,
            parse_point(v.trim(), dim, generators).map_err(wrap)?,
        ));
    }
    if out.is_empty() {
        return Err(Error::InvalidArgument("no initial conditions given".into()));
    }
    Ok(out)
}

fn load(path: &Path) -> supergeo::Result<Model> {
    Model::load(path).map_err(|e| match e {
        Error::Model { line, reason } => Error::Model {
            line,
            reason: format!("{}: {reason}", path.display()),
        },
        other => other,
    })
}

fn integrator(model: &Model, common: &Common) -> Integrator {
    let mut opts = model.settings.integrator();
    if let Some(h) = common.step {
        opts.h = h;
    }
    opts
}

fn finish(mut out: Outcome, common: &Common) -> Outcome {
    if let Some(path) = &common.out {
        if let Err(e) = std::fs::write(path, &out.stdout) {
            out.stderr.push_str(&format!("error: cannot write {}: {e}\n", path.display()));
            out.code = EXIT_INPUT;
        }
        out.stdout.clear();
    }
    out
}

pub fn run(cli: Cli) -> Outcome {
    let (result, common) = match &cli.command {
        Command::Geodesic { model, x, v, common } => (cmd_geodesic(model, x, v, common), common),
        Command::Check { check, model, common } => (cmd_check(model, *check, common), common),
        Command::Projective {
            model,
            model_b,
            inits,
            common,
        } => (cmd_projective(model, model_b.as_deref(), inits, common), common),
    };
    match result {
        Ok(out) => finish(out, common),
        Err(e) => Outcome::error(&e),
    }
}

pub fn cmd_geodesic(model: &Path, x: &str, v: &str, common: &Common) -> supergeo::Result<Outcome> {
    let m = load(model)?;
    let l = m.settings.generators;
    let n = m.coords.dim();
    let x = parse_point(x, n, l)?;
    let v = parse_point(v, n, l)?;
    let t_end = common.t_end.unwrap_or(m.settings.t_end);
    let field = GeodesicField::new(&m.christoffel)?;
    let traj = field.integrate(&x, &v, t_end, integrator(&m, common))?;
    let mut extra = Vec::new();
    let mut energies = Vec::new();
    if let Some(g) = m.metric() {
        for k in 0..traj.len() {
            energies.push(g.energy(traj.x(k), traj.v(k))?);
        }
        for mask in (0u32..(1 << l)).filter(|m| m.count_ones() % 2 == 0) {
            extra.push((
                format!("energy[{}]", subset_label(mask, l)),
                energies.iter().map(|e| e.coefficient(mask)).collect(),
            ));
        }
    }
    let stdout = match common.format.unwrap_or(Format::Csv) {
        Format::Csv => traj.to_csv(&field, &extra),
        Format::Report => {
            let mut s = String::new();
            let _ = writeln!(s, "geodesic flow, integrator {}, step {}, t_end {t_end}", traj.integrator(), traj.step());
            for i in 0..n {
                let _ = writeln!(s, "{}(t_end) = {}", m.coords.name(i), traj.final_x()[i]);
            }
            for i in 0..n {
                let _ = writeln!(s, "v_{}(t_end) = {}", m.coords.name(i), traj.final_v()[i]);
            }
            if let (Some(first), Some(last)) = (energies.first(), energies.last()) {
                let _ = writeln!(s, "energy drift = {:e}", last.distance(first));
            }
            s
        }
    };
    Ok(Outcome {
        code: EXIT_PASS,
        stdout,
        stderr: String::new(),
    })
}

/// Residual of one check on sample points drawn from `seed`.
pub fn check_residual(m: &Model, check: CheckKind, seed: u64) -> supergeo::Result<f64> {
    let l = m.settings.generators;
    let count = m.settings.samples;
    let mut sampler = Sampler::new(seed, l);
    let samples = sampler.points(&m.coords, count);
    match check {
        CheckKind::Torsion => Ok(m.christoffel.torsion().max_norm(&samples)?),
        CheckKind::Compatibility => {
            let g = m
                .metric()
                .ok_or_else(|| Error::InvalidArgument("compatibility check needs a [metric] model".into()))?;
            g.compatibility_check(&m.christoffel, &samples)
        }
        CheckKind::Intertwine => {
            let g = m
                .metric()
                .ok_or_else(|| Error::InvalidArgument("intertwine check needs a [metric] model".into()))?;
            let h = Hamiltonian::new(g)?;
            let points = samples
                .into_iter()
                .map(|x| {
                    let p = sampler.components(&m.coords, 0);
                    CotangentPoint::new(&m.coords, x, p)
                })
                .collect::<supergeo::Result<Vec<_>>>()?;
            h.intertwine_check(&m.christoffel, &points)
        }
        CheckKind::Transform => {
            let spec = m
                .change
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("transform check needs a [change] section".into()))?;
            m.christoffel.transform_christoffel(&spec.change, spec.target.as_ref(), &samples)
        }
    }
}

pub fn cmd_check(model: &Path, check: CheckKind, common: &Common) -> supergeo::Result<Outcome> {
    let m = load(model)?;
    let tol = common.tol.or(m.settings.tolerance).unwrap_or(DEFAULT_CHECK_TOL);
    let seed = common.seed.unwrap_or(m.settings.seed);
    let residual = check_residual(&m, check, seed)?;
    let pass = residual <= tol;
    let mut stdout = String::new();
    let _ = writeln!(stdout, "check: {}", check.name());
    let _ = writeln!(stdout, "model: {}", model.display());
    let _ = writeln!(stdout, "samples: {} (seed {seed}, generators {})", m.settings.samples, m.settings.generators);
    let _ = writeln!(stdout, "max residual: {residual:e}");
    let _ = writeln!(stdout, "tolerance: {tol:e}");
    let _ = writeln!(stdout, "{}", if pass { "PASS" } else { "FAIL" });
    Ok(Outcome {
        code: if pass { EXIT_PASS } else { EXIT_FAIL },
        stdout,
        stderr: String::new(),
    })
}

pub fn cmd_projective(model: &Path, model_b: Option<&Path>, inits: &Path, common: &Common) -> supergeo::Result<Outcome> {
    let a = load(model)?;
    let gamma_b: ChristoffelField = match model_b {
        Some(path) => {
            let b = load(path)?;
            if b.coords != a.coords {
                return Err(Error::InvalidArgument("models use different coordinates".into()));
            }
            b.christoffel
        }
        None => {
            let alpha = a
                .oneform
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("no --model-b and no [oneform] to shift by".into()))?;
            shift_connection(&a.christoffel, alpha)?
        }
    };
    let l = a.settings.generators;
    let text = std::fs::read_to_string(inits)
        .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", inits.display())))?;
    let inits = parse_inits(&text, a.coords.dim(), l)?;
    let tol = common.tol.or(a.settings.tolerance).unwrap_or(projective::FLOW_TOL);
    let t_end = common.t_end.unwrap_or(a.settings.t_end);
    let samples = projective::default_samples(&a.coords, l);
    let report = projective::same_geodesics_check(
        &a.christoffel,
        &gamma_b,
        &inits,
        t_end,
        integrator(&a, common),
        tol,
        &samples,
    )?;
    let code = if report.is_equivalent() {
        EXIT_PASS
    } else if report.blew_up() {
        EXIT_DOMAIN
    } else {
        EXIT_FAIL
    };
    Ok(Outcome {
        code,
        stdout: report.to_string(),
        stderr: String::new(),
    })
}
