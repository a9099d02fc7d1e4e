//! Model files: bracketed sections of `key = "value"` lines, `#` comments.
//!
//! ```text
//! [model]
//! even = "x1, x2"
//! odd = "xi1, xi2"
//!
//! [christoffel]            # or [metric] with g(i,j), i <= j
//! Gamma(1,1,1) = "xi1*xi2"
//!
//! [oneform]
//! alpha(1) = "0.5"
//!
//! [settings]
//! h = 1e-3
//! t_end = 1
//!
//! [change]                 # coordinate change for the transform check
//! target_even = "y1"
//! y(1) = "x1 + x1^2"
//!
//! [target_christoffel]     # symbols in the target coordinates
//!
//! [perturbation]           # added to the Levi-Civita symbols of [metric]
//!
//! [expect]
//! torsion = "pass"
//! ```
//!
//! Indices are 1-based. Values may be quoted or bare.

use std::collections::BTreeMap;
use std::path::Path;

use crate::connection::ChristoffelField;
use crate::error::{Error, Result};
use crate::flows::{Integrator, DEFAULT_BLOWUP, DEFAULT_STEP};
use crate::geometry::{CoordinateChange, OneForm};
use crate::metric::SuperMetric;
use crate::sampling::DEFAULT_SEED;
use crate::superexpr::{CoordinateSystem, SuperExpr};

#[derive(Clone, Debug, PartialEq)]
pub struct Settings {
    pub h: f64,
    pub t_end: f64,
    pub tolerance: Option<f64>,
    pub generators: usize,
    pub blowup: f64,
    pub samples: usize,
    pub seed: u64,
}

impl Settings {
    pub fn integrator(&self) -> Integrator {
        Integrator {
            h: self.h,
            blowup: self.blowup,
        }
    }
}

#[derive(Clone, Debug)]
pub enum Source {
    Christoffel(ChristoffelField),
    Metric(SuperMetric),
}

#[derive(Clone, Debug)]
pub struct ChangeSpec {
    pub change: CoordinateChange,
    pub target: Option<ChristoffelField>,
}

#[derive(Clone, Debug)]
pub struct Model {
    pub coords: CoordinateSystem,
    pub source: Source,
    pub christoffel: ChristoffelField,
    pub oneform: Option<OneForm>,
    pub settings: Settings,
    pub change: Option<ChangeSpec>,
    pub expect: BTreeMap<String, String>,
}

struct Entry {
    line: usize,
    key: String,
    value: String,
}

fn model_err(line: usize, reason: impl Into<String>) -> Error {
    Error::Model {
        line,
        reason: reason.into(),
    }
}

fn split_sections(text: &str) -> Result<Vec<(String, usize, Vec<Entry>)>> {
    let mut sections: Vec<(String, usize, Vec<Entry>)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = strip_comment(raw).trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| model_err(line, "unterminated section header"))?
                .trim();
            if sections.iter().any(|(n, _, _)| n == name) {
                return Err(model_err(line, format!("duplicate section [{name}]")));
            }
            sections.push((name.to_string(), line, Vec::new()));
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| model_err(line, format!("expected key = value, got {content:?}")))?;
        let value = value.trim();
        let value = match value.strip_prefix('"') {
            Some(rest) => rest
                .strip_suffix('"')
                .ok_or_else(|| model_err(line, "unterminated string"))?
                .to_string(),
            None => value.to_string(),
        };
        let Some(section) = sections.last_mut() else {
            return Err(model_err(line, "entry outside of any section"));
        };
        section.2.push(Entry {
            line,
            key: key.trim().to_string(),
            value,
        });
    }
    Ok(sections)
}

/// Drops a `#` comment unless it sits inside a quoted value.
fn strip_comment(line: &str) -> &str {
    let mut quoted = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => quoted = !quoted,
            '#' if !quoted => return &line[..i],
            _ => {}
        }
    }
    line
}

/// Parses `name(1,2,3)` into 0-based indices.
fn indexed_key(e: &Entry, name: &str, arity: usize) -> Result<Vec<usize>> {
    let inner = e
        .key
        .strip_prefix(name)
        .and_then(|r| r.trim().strip_prefix('('))
        .and_then(|r| r.strip_suffix(')'))
        .ok_or_else(|| model_err(e.line, format!("expected {name}(...), got {:?}", e.key)))?;
    let idx = inner
        .split(',')
        .map(|s| match s.trim().parse::<usize>() {
            Ok(k) if k >= 1 => Ok(k - 1),
            _ => Err(model_err(e.line, format!("bad index {s:?} (indices are 1-based)"))),
        })
        .collect::<Result<Vec<_>>>()?;
    if idx.len() != arity {
        return Err(model_err(e.line, format!("{name} takes {arity} indices")));
    }
    Ok(idx)
}

fn names(value: &str) -> Vec<String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

fn expr(e: &Entry, coords: &CoordinateSystem) -> Result<SuperExpr> {
    SuperExpr::parse(&e.value, coords).map_err(|err| model_err(e.line, format!("{}: {err}", e.key)))
}

fn number<T: std::str::FromStr>(e: &Entry) -> Result<T> {
    e.value
        .trim()
        .parse()
        .map_err(|_| model_err(e.line, format!("{} expects a number, got {:?}", e.key, e.value)))
}

fn coordinate_system(entries: &[Entry], even_key: &str, odd_key: &str, line: usize) -> Result<CoordinateSystem> {
    let mut even = Vec::new();
    let mut odd = Vec::new();
    for e in entries {
        if e.key == even_key {
            even = names(&e.value);
        } else if e.key == odd_key {
            odd = names(&e.value);
        }
    }
    CoordinateSystem::new(&even, &odd).map_err(|err| model_err(line, err.to_string()))
}

fn christoffel_section(entries: &[Entry], coords: &CoordinateSystem) -> Result<ChristoffelField> {
    let n = coords.dim();
    let mut gamma = ChristoffelField::zero(coords);
    for e in entries {
        let idx = indexed_key(e, "Gamma", 3)?;
        if idx.iter().any(|&k| k >= n) {
            return Err(model_err(e.line, format!("{} out of range for dimension {n}", e.key)));
        }
        gamma = gamma
            .with_entry((idx[0], idx[1], idx[2]), expr(e, coords)?)
            .map_err(|err| model_err(e.line, err.to_string()))?;
    }
    Ok(gamma)
}

impl Model {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let sections = split_sections(text)?;
        let find = |name: &str| sections.iter().find(|(n, _, _)| n == name);
        for (name, line, _) in &sections {
            const KNOWN: [&str; 9] = [
                "model",
                "perturbation",
                "christoffel",
                "metric",
                "oneform",
                "settings",
                "change",
                "target_christoffel",
                "expect",
            ];
            if !KNOWN.contains(&name.as_str()) {
                return Err(model_err(*line, format!("unknown section [{name}]")));
            }
        }
        let (_, model_line, model_entries) = find("model").ok_or_else(|| model_err(0, "missing [model] section"))?;
        for e in model_entries {
            if e.key != "even" && e.key != "odd" {
                return Err(model_err(e.line, format!("unknown key {:?} in [model]", e.key)));
            }
        }
        let coords = coordinate_system(model_entries, "even", "odd", *model_line)?;
        let n = coords.dim();

        let source = match (find("christoffel"), find("metric")) {
            (Some(_), Some((_, line, _))) => {
                return Err(model_err(*line, "both [christoffel] and [metric] given"));
            }
            (None, None) => return Err(model_err(0, "missing [christoffel] or [metric] section")),
            (Some((_, _, entries)), None) => Source::Christoffel(christoffel_section(entries, &coords)?),
            (None, Some((_, line, entries))) => {
                let mut parsed = Vec::new();
                for e in entries {
                    let idx = indexed_key(e, "g", 2)?;
                    if idx.iter().any(|&k| k >= n) || idx[0] > idx[1] {
                        return Err(model_err(e.line, format!("{} must satisfy i <= j <= {n}", e.key)));
                    }
                    parsed.push(((idx[0], idx[1]), expr(e, &coords)?));
                }
                Source::Metric(SuperMetric::from_upper(&coords, parsed).map_err(|err| model_err(*line, err.to_string()))?)
            }
        };
        let mut christoffel = match &source {
            Source::Christoffel(g) => g.clone(),
            Source::Metric(m) => m.levi_civita()?,
        };
        if let Some((_, line, entries)) = find("perturbation") {
            if matches!(source, Source::Christoffel(_)) {
                return Err(model_err(*line, "[perturbation] applies to the Levi-Civita symbols of a [metric]"));
            }
            let delta = christoffel_section(entries, &coords)?;
            christoffel = christoffel.add_tensor(delta.symbols())?;
        }

        let oneform = match find("oneform") {
            None => None,
            Some((_, line, entries)) => {
                let mut comps = vec![SuperExpr::zero(); n];
                for e in entries {
                    let idx = indexed_key(e, "alpha", 1)?;
                    if idx[0] >= n {
                        return Err(model_err(e.line, format!("{} out of range", e.key)));
                    }
                    comps[idx[0]] = expr(e, &coords)?;
                }
                Some(OneForm::new(&coords, comps).map_err(|err| model_err(*line, err.to_string()))?)
            }
        };

        let mut settings = Settings {
            h: DEFAULT_STEP,
            t_end: 1.0,
            tolerance: None,
            generators: coords.odd_dim() + 2,
            blowup: DEFAULT_BLOWUP,
            samples: 100,
            seed: DEFAULT_SEED,
        };
        if let Some((_, _, entries)) = find("settings") {
            for e in entries {
                match e.key.as_str() {
                    "h" => settings.h = number(e)?,
                    "t_end" => settings.t_end = number(e)?,
                    "tolerance" => settings.tolerance = Some(number(e)?),
                    "generators" => settings.generators = number(e)?,
                    "blowup" => settings.blowup = number(e)?,
                    "samples" => settings.samples = number(e)?,
                    "seed" => settings.seed = number(e)?,
                    other => return Err(model_err(e.line, format!("unknown setting {other:?}"))),
                }
            }
            if !(settings.h > 0.0) {
                return Err(model_err(0, "step h must be positive"));
            }
        }

        let change = match find("change") {
            None => None,
            Some((_, line, entries)) => {
                let target = coordinate_system(entries, "target_even", "target_odd", *line)?;
                let mut formulas = vec![None; target.dim()];
                for e in entries.iter().filter(|e| !e.key.starts_with("target_")) {
                    let idx = indexed_key(e, "y", 1)?;
                    if idx[0] >= target.dim() {
                        return Err(model_err(e.line, format!("{} out of range", e.key)));
                    }
                    formulas[idx[0]] = Some(expr(e, &coords)?);
                }
                let formulas = formulas
                    .into_iter()
                    .enumerate()
                    .map(|(p, f)| f.ok_or_else(|| model_err(*line, format!("missing y({})", p + 1))))
                    .collect::<Result<Vec<_>>>()?;
                let change =
                    CoordinateChange::new(&coords, &target, formulas).map_err(|err| model_err(*line, err.to_string()))?;
                let target_gamma = match find("target_christoffel") {
                    Some((_, _, entries)) => Some(christoffel_section(entries, &target)?),
                    None => None,
                };
                Some(ChangeSpec {
                    change,
                    target: target_gamma,
                })
            }
        };
        if change.is_none() {
            if let Some((_, line, _)) = find("target_christoffel") {
                return Err(model_err(*line, "[target_christoffel] requires [change]"));
            }
        }

        let mut expect = BTreeMap::new();
        if let Some((_, _, entries)) = find("expect") {
            for e in entries {
                if e.value != "pass" && e.value != "fail" {
                    return Err(model_err(e.line, "expected verdicts are \"pass\" or \"fail\""));
                }
                expect.insert(e.key.clone(), e.value.clone());
            }
        }

        Ok(Self {
            coords,
            source,
            christoffel,
            oneform,
            settings,
            change,
            expect,
        })
    }

    pub fn metric(&self) -> Option<&SuperMetric> {
        match &self.source {
            Source::Metric(m) => Some(m),
            Source::Christoffel(_) => None,
        }
    }
}
