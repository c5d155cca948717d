//! `key=value` experiment configuration with `block.key` sections.
//!
//! Blank lines and lines starting with `#` are ignored. Lists are
//! comma-separated, windows are written `ta:tb`. Every key may appear at
//! most once per file.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use flab_core::nonlinearity::Nonlinearity;
use flab_core::reference::BumpShape;
use flab_core::solver::RecordSchedule;
use flab_core::{BoxMesh, SolverConfig};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{origin} line {line}: {msg}")]
    Line { origin: String, line: usize, msg: String },
    #[error("key '{key}' on line {second} duplicates line {first}")]
    Duplicate { key: String, first: usize, second: usize },
    #[error("missing mandatory key '{0}'")]
    Missing(String),
    #[error("{0}")]
    Invalid(String),
}

/// Keys accepted anywhere in a file.
const KNOWN_KEYS: &[&str] = &[
    "preset",
    "seed",
    "mesh.dim",
    "mesh.extents",
    "mesh.origin",
    "mesh.cells",
    "nl.kind",
    "nl.m",
    "nl.m1",
    "nl.m2",
    "nl.a",
    "nl.b",
    "nl.scale",
    "datum.kind",
    "datum.value",
    "datum.mean",
    "datum.amplitude",
    "datum.mode",
    "datum.center",
    "datum.width",
    "datum.mass",
    "datum.shape",
    "datum.m",
    "datum.t",
    "datum.tau",
    "datum.ell",
    "datum.peak",
    "datum.offset",
    "datum.expr",
    "solver.t_end",
    "solver.dt0",
    "solver.dt_max",
    "solver.dt_growth",
    "solver.newton_tol",
    "solver.newton_max_iter",
    "solver.linear_tol",
    "solver.records",
    "solver.spacing",
    "analysis.q0",
    "analysis.p_set",
    "analysis.early_window",
    "analysis.late_window",
    "analysis.late_t_end",
    "analysis.zero_mean_mass",
    "analysis.seeds",
    "analysis.cells_2d",
    "output.dir",
    "output.series",
    "output.verdict",
];

const MANDATORY: &[&str] = &["mesh.extents", "mesh.cells", "nl.kind", "datum.kind", "solver.t_end"];

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    value: String,
    line: usize,
    origin: String,
}

/// Syntactically valid entries, before any typing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, Entry>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::parse_named(text, "config")
    }

    pub fn parse_named(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let mut entries: BTreeMap<String, Entry> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let err = |msg: String| ConfigError::Line {
                origin: origin.to_string(),
                line,
                msg,
            };
            let Some((k, v)) = trimmed.split_once('=') else {
                return Err(err(format!("expected key=value, found '{trimmed}'")));
            };
            let (key, value) = (k.trim(), v.trim());
            if !KNOWN_KEYS.contains(&key) {
                return Err(err(format!("unknown key '{key}'")));
            }
            if value.is_empty() {
                return Err(err(format!("key '{key}' has an empty value")));
            }
            if let Some(prev) = entries.get(key) {
                return Err(ConfigError::Duplicate {
                    key: key.to_string(),
                    first: prev.line,
                    second: line,
                });
            }
            entries.insert(
                key.to_string(),
                Entry {
                    value: value.to_string(),
                    line,
                    origin: origin.to_string(),
                },
            );
        }
        Ok(Self { entries })
    }

    /// Entries of `other` replace those of `self`.
    pub fn overlay(mut self, other: RawConfig) -> Self {
        self.entries.extend(other.entries);
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.value.as_str())
    }

    fn err(&self, key: &str, msg: impl Into<String>) -> ConfigError {
        match self.entries.get(key) {
            Some(e) => ConfigError::Line {
                origin: e.origin.clone(),
                line: e.line,
                msg: msg.into(),
            },
            None => ConfigError::Invalid(msg.into()),
        }
    }

    fn real(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.get(key)
            .map(|v| {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| self.err(key, format!("'{key}' expects a finite real, found '{v}'")))
            })
            .transpose()
    }

    fn real_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.real(key)?.unwrap_or(default))
    }

    fn required_real(&self, key: &str) -> Result<f64, ConfigError> {
        self.real(key)?.ok_or_else(|| ConfigError::Missing(key.to_string()))
    }

    fn count(&self, key: &str) -> Result<Option<usize>, ConfigError> {
        self.get(key)
            .map(|v| {
                v.parse::<usize>()
                    .map_err(|_| self.err(key, format!("'{key}' expects a non-negative integer, found '{v}'")))
            })
            .transpose()
    }

    fn reals(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        self.get(key)
            .map(|v| {
                v.split(',')
                    .map(|s| s.trim().parse::<f64>().ok().filter(|x| x.is_finite()))
                    .collect::<Option<Vec<f64>>>()
                    .ok_or_else(|| self.err(key, format!("'{key}' expects a list of reals, found '{v}'")))
            })
            .transpose()
    }

    fn counts(&self, key: &str) -> Result<Option<Vec<usize>>, ConfigError> {
        self.get(key)
            .map(|v| {
                v.split(',')
                    .map(|s| s.trim().parse::<usize>().ok())
                    .collect::<Option<Vec<usize>>>()
                    .ok_or_else(|| self.err(key, format!("'{key}' expects a list of integers, found '{v}'")))
            })
            .transpose()
    }

    fn window(&self, key: &str) -> Result<Option<(f64, f64)>, ConfigError> {
        self.get(key)
            .map(|v| {
                let bad = || self.err(key, format!("'{key}' expects ta:tb with 0 <= ta < tb, found '{v}'"));
                let (a, b) = v.split_once(':').ok_or_else(bad)?;
                let a: f64 = a.trim().parse().map_err(|_| bad())?;
                let b: f64 = b.trim().parse().map_err(|_| bad())?;
                if a >= 0.0 && b > a && b.is_finite() {
                    Ok((a, b))
                } else {
                    Err(bad())
                }
            })
            .transpose()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeshSpec {
    pub dim: usize,
    pub extents: Vec<f64>,
    pub origin: Vec<f64>,
    pub cells: Vec<usize>,
}

impl MeshSpec {
    pub fn build(&self) -> Result<BoxMesh, ConfigError> {
        BoxMesh::new(self.dim, &self.extents, &self.origin, &self.cells).map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NlSpec {
    PurePower { m: f64, scale: f64 },
    TwoPower { m1: f64, m2: f64, a: f64, b: f64, scale: f64 },
}

impl NlSpec {
    pub fn build(&self) -> Result<Nonlinearity, ConfigError> {
        let r = match *self {
            NlSpec::PurePower { m, scale } => Nonlinearity::pure_power(m, scale),
            NlSpec::TwoPower { m1, m2, a, b, scale } => Nonlinearity::two_power_on(m1, m2, a, b, scale),
        };
        r.map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    /// `(m1, m2)`; both equal `m` for a pure power.
    pub fn exponents(&self) -> (f64, f64) {
        match *self {
            NlSpec::PurePower { m, .. } => (m, m),
            NlSpec::TwoPower { m1, m2, .. } => (m1, m2),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatumSpec {
    Constant { value: f64 },
    /// `mean + amplitude·cos(mode·π·(x − origin)/L)` along the first axis.
    CosinePerturbation { mean: f64, amplitude: f64, mode: usize },
    DeltaLike { center: Vec<f64>, width: f64, mass: f64, shape: BumpShape },
    /// Barenblatt profile of exponent `m` evaluated at time `t`.
    Zkb { m: f64, mass: f64, center: Vec<f64>, t: f64 },
    /// `max{U*(τ), U_ℓ(τ + t0)}` with `‖U_ℓ(t0)‖∞ = peak`.
    Glued { tau: f64, ell: f64, peak: f64, center: Vec<f64> },
    /// Bumps of mass `±mass` at `center ± offset` along the first axis.
    OddBump { center: Vec<f64>, offset: f64, width: f64, mass: f64, shape: BumpShape },
    /// Expression in `x`, `y` and `pi`, evaluated at cell centres.
    CustomExpression { expr: String },
    /// Independent uniform values on `[−amplitude, amplitude)` per cell.
    Random { amplitude: f64 },
}

impl DatumSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            DatumSpec::Constant { .. } => "constant",
            DatumSpec::CosinePerturbation { .. } => "cosine-perturbation",
            DatumSpec::DeltaLike { .. } => "delta-like",
            DatumSpec::Zkb { .. } => "zkb",
            DatumSpec::Glued { .. } => "glued",
            DatumSpec::OddBump { .. } => "odd-bump",
            DatumSpec::CustomExpression { .. } => "custom-expression",
            DatumSpec::Random { .. } => "random",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spacing {
    Log,
    Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSpec {
    pub t_end: f64,
    pub dt0: f64,
    pub dt_max: f64,
    pub dt_growth: f64,
    pub newton_tol: Option<f64>,
    pub newton_max_iter: usize,
    pub linear_tol: f64,
    pub records: usize,
    pub spacing: Spacing,
}

impl SolverSpec {
    /// Solver settings for a run starting at `t_start`.
    pub fn build(&self, t_start: f64) -> SolverConfig {
        let mut cfg = SolverConfig::new(self.dt0, self.dt_max, self.t_end);
        cfg.dt_growth = self.dt_growth;
        cfg.newton_tol = self.newton_tol;
        cfg.newton_max_iter = self.newton_max_iter;
        cfg.linear_tol = self.linear_tol;
        cfg.records = match self.spacing {
            Spacing::Log => RecordSchedule::LogSpaced(self.records),
            Spacing::Linear => {
                let n = self.records as f64;
                RecordSchedule::Explicit(
                    (1..=self.records)
                        .map(|k| t_start + (self.t_end - t_start) * k as f64 / n)
                        .collect(),
                )
            }
        };
        cfg
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisSpec {
    pub q0: f64,
    pub p_set: Vec<f64>,
    pub early_window: Option<(f64, f64)>,
    pub late_window: Option<(f64, f64)>,
    pub late_t_end: f64,
    /// Mass of each bump of the zero-mean companion run.
    pub zero_mean_mass: f64,
    pub seeds: usize,
    pub cells_2d: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    pub dir: PathBuf,
    pub series: String,
    pub verdict: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub preset: Option<String>,
    pub seed: u64,
    pub mesh: MeshSpec,
    pub nl: NlSpec,
    pub datum: DatumSpec,
    pub solver: SolverSpec,
    pub analysis: AnalysisSpec,
    pub output: OutputSpec,
}

/// Keys each datum kind accepts besides `datum.kind`.
fn datum_keys(kind: &str) -> Option<&'static [&'static str]> {
    Some(match kind {
        "constant" => &["datum.value"],
        "cosine-perturbation" => &["datum.mean", "datum.amplitude", "datum.mode"],
        "delta-like" => &["datum.center", "datum.width", "datum.mass", "datum.shape"],
        "zkb" => &["datum.m", "datum.mass", "datum.center", "datum.t"],
        "glued" => &["datum.tau", "datum.ell", "datum.peak", "datum.center"],
        "odd-bump" => &["datum.center", "datum.offset", "datum.width", "datum.mass", "datum.shape"],
        "custom-expression" => &["datum.expr"],
        "random" => &["datum.amplitude"],
        _ => return None,
    })
}

fn shape_name(s: BumpShape) -> &'static str {
    match s {
        BumpShape::QuadraticCap => "quadratic-cap",
        BumpShape::CosineBell => "cosine-bell",
    }
}

fn fmt_list<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Parses a whole file.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::from_raw(&RawConfig::parse(text)?)
    }

    /// Parses `text` on top of `base`; keys in `text` win.
    pub fn parse_over(base: &str, text: &str) -> Result<Self, ConfigError> {
        let raw = RawConfig::parse_named(base, "preset defaults")?.overlay(RawConfig::parse(text)?);
        Self::from_raw(&raw)
    }

    pub fn from_raw(raw: &RawConfig) -> Result<Self, ConfigError> {
        for key in MANDATORY {
            if raw.get(key).is_none() {
                return Err(ConfigError::Missing(key.to_string()));
            }
        }
        let seed = match raw.get("seed") {
            None => 1,
            Some(v) => v
                .parse::<u64>()
                .map_err(|_| raw.err("seed", format!("'seed' expects an unsigned integer, found '{v}'")))?,
        };
        let mesh = Self::mesh_from(raw)?;
        let nl = Self::nl_from(raw)?;
        let datum = Self::datum_from(raw, &mesh, &nl)?;
        let solver = Self::solver_from(raw)?;
        let analysis = Self::analysis_from(raw, &solver)?;
        let output = OutputSpec {
            dir: PathBuf::from(raw.get("output.dir").unwrap_or(".")),
            series: raw.get("output.series").unwrap_or("series.csv").to_string(),
            verdict: raw.get("output.verdict").unwrap_or("verdict.txt").to_string(),
        };
        Ok(Self {
            preset: raw.get("preset").map(str::to_string),
            seed,
            mesh,
            nl,
            datum,
            solver,
            analysis,
            output,
        })
    }

    fn mesh_from(raw: &RawConfig) -> Result<MeshSpec, ConfigError> {
        let extents = raw.reals("mesh.extents")?.expect("mandatory");
        let dim = raw.count("mesh.dim")?.unwrap_or(extents.len());
        if !(1..=2).contains(&dim) {
            return Err(raw.err("mesh.dim", format!("mesh.dim must be 1 or 2 (got {dim})")));
        }
        if extents.len() != dim {
            return Err(raw.err("mesh.extents", format!("mesh.extents needs {dim} entries")));
        }
        let origin = raw.reals("mesh.origin")?.unwrap_or_else(|| vec![0.0; dim]);
        if origin.len() != dim {
            return Err(raw.err("mesh.origin", format!("mesh.origin needs {dim} entries")));
        }
        let mut cells = raw.counts("mesh.cells")?.expect("mandatory");
        if cells.len() == 1 {
            cells = vec![cells[0]; dim];
        }
        if cells.len() != dim {
            return Err(raw.err("mesh.cells", format!("mesh.cells needs 1 or {dim} entries")));
        }
        let spec = MeshSpec { dim, extents, origin, cells };
        spec.build().map_err(|e| raw.err("mesh.cells", e.to_string()))?;
        Ok(spec)
    }

    fn nl_from(raw: &RawConfig) -> Result<NlSpec, ConfigError> {
        let exponent = |key: &str, name: &str| -> Result<f64, ConfigError> {
            let m = raw.required_real(key)?;
            if m > 1.0 {
                Ok(m)
            } else {
                Err(raw.err(key, format!("{name} must exceed 1 (got {m})")))
            }
        };
        let scale = raw.real_or("nl.scale", 1.0)?;
        if scale <= 0.0 {
            return Err(raw.err("nl.scale", format!("nl.scale must be positive (got {scale})")));
        }
        let kind = raw.get("nl.kind").expect("mandatory");
        let spec = match kind {
            "pure-power" => {
                for k in ["nl.m1", "nl.m2", "nl.a", "nl.b"] {
                    if raw.get(k).is_some() {
                        return Err(raw.err(k, format!("'{k}' does not apply to nl.kind=pure-power")));
                    }
                }
                NlSpec::PurePower {
                    m: exponent("nl.m", "m")?,
                    scale,
                }
            }
            "two-power" => {
                if raw.get("nl.m").is_some() {
                    return Err(raw.err("nl.m", "'nl.m' does not apply to nl.kind=two-power; use nl.m1 and nl.m2"));
                }
                NlSpec::TwoPower {
                    m1: exponent("nl.m1", "m1")?,
                    m2: exponent("nl.m2", "m2")?,
                    a: raw.real_or("nl.a", 0.5)?,
                    b: raw.real_or("nl.b", 2.0)?,
                    scale,
                }
            }
            other => {
                return Err(raw.err(
                    "nl.kind",
                    format!("nl.kind must be pure-power or two-power (got '{other}')"),
                ))
            }
        };
        spec.build().map_err(|e| raw.err("nl.kind", e.to_string()))?;
        Ok(spec)
    }

    fn datum_from(raw: &RawConfig, mesh: &MeshSpec, nl: &NlSpec) -> Result<DatumSpec, ConfigError> {
        let kind = raw.get("datum.kind").expect("mandatory");
        let allowed = datum_keys(kind).ok_or_else(|| {
            raw.err(
                "datum.kind",
                format!(
                    "unknown datum.kind '{kind}' (expected constant, cosine-perturbation, delta-like, zkb, \
                     glued, odd-bump, custom-expression or random)"
                ),
            )
        })?;
        for key in KNOWN_KEYS.iter().filter(|k| k.starts_with("datum.") && **k != "datum.kind") {
            if raw.get(key).is_some() && !allowed.contains(key) {
                return Err(raw.err(key, format!("'{key}' does not apply to datum.kind={kind}")));
            }
        }
        let mid: Vec<f64> = mesh.origin.iter().zip(&mesh.extents).map(|(o, l)| o + 0.5 * l).collect();
        let center = || -> Result<Vec<f64>, ConfigError> {
            let c = raw.reals("datum.center")?.unwrap_or_else(|| mid.clone());
            if c.len() != mesh.dim {
                return Err(raw.err("datum.center", format!("datum.center needs {} entries", mesh.dim)));
            }
            Ok(c)
        };
        let positive = |key: &str, default: f64| -> Result<f64, ConfigError> {
            let v = raw.real_or(key, default)?;
            if v > 0.0 {
                Ok(v)
            } else {
                Err(raw.err(key, format!("{key} must be positive (got {v})")))
            }
        };
        let shape = || -> Result<BumpShape, ConfigError> {
            match raw.get("datum.shape").unwrap_or("quadratic-cap") {
                "quadratic-cap" => Ok(BumpShape::QuadraticCap),
                "cosine-bell" => Ok(BumpShape::CosineBell),
                other => Err(raw.err(
                    "datum.shape",
                    format!("datum.shape must be quadratic-cap or cosine-bell (got '{other}')"),
                )),
            }
        };
        let width_default = 8.0 * mesh.extents.iter().zip(&mesh.cells).map(|(l, n)| l / *n as f64).fold(0.0, f64::max);
        Ok(match kind {
            "constant" => DatumSpec::Constant {
                value: raw.real_or("datum.value", 1.0)?,
            },
            "cosine-perturbation" => DatumSpec::CosinePerturbation {
                mean: raw.real_or("datum.mean", 1.0)?,
                amplitude: raw.real_or("datum.amplitude", 0.1)?,
                mode: raw.count("datum.mode")?.unwrap_or(1),
            },
            "delta-like" => DatumSpec::DeltaLike {
                center: center()?,
                width: positive("datum.width", width_default)?,
                mass: positive("datum.mass", 1.0)?,
                shape: shape()?,
            },
            "zkb" => {
                let m = match raw.real("datum.m")? {
                    Some(m) if m > 1.0 => m,
                    Some(m) => return Err(raw.err("datum.m", format!("m must exceed 1 (got {m})"))),
                    None => nl.exponents().1,
                };
                DatumSpec::Zkb {
                    m,
                    mass: positive("datum.mass", 1.0)?,
                    center: center()?,
                    t: positive("datum.t", 0.01)?,
                }
            }
            "glued" => {
                let peak = positive("datum.peak", 0.25)?;
                DatumSpec::Glued {
                    tau: positive("datum.tau", 1e-3)?,
                    ell: positive("datum.ell", 0.5)?,
                    peak,
                    center: center()?,
                }
            }
            "odd-bump" => DatumSpec::OddBump {
                center: center()?,
                offset: positive("datum.offset", 0.25 * mesh.extents[0])?,
                width: positive("datum.width", width_default)?,
                mass: positive("datum.mass", 1.0)?,
                shape: shape()?,
            },
            "custom-expression" => {
                let expr = raw
                    .get("datum.expr")
                    .ok_or_else(|| ConfigError::Missing("datum.expr".into()))?
                    .to_string();
                crate::datum::compile_expression(&expr).map_err(|e| raw.err("datum.expr", e))?;
                DatumSpec::CustomExpression { expr }
            }
            "random" => DatumSpec::Random {
                amplitude: positive("datum.amplitude", 1.0)?,
            },
            _ => unreachable!("checked by datum_keys"),
        })
    }

    fn solver_from(raw: &RawConfig) -> Result<SolverSpec, ConfigError> {
        let t_end = raw.required_real("solver.t_end")?;
        if t_end <= 0.0 {
            return Err(raw.err("solver.t_end", format!("solver.t_end must be positive (got {t_end})")));
        }
        let spacing = match raw.get("solver.spacing").unwrap_or("log") {
            "log" => Spacing::Log,
            "linear" => Spacing::Linear,
            other => {
                return Err(raw.err(
                    "solver.spacing",
                    format!("solver.spacing must be log or linear (got '{other}')"),
                ))
            }
        };
        let spec = SolverSpec {
            t_end,
            dt0: raw.real_or("solver.dt0", 1e-5 * t_end)?,
            dt_max: raw.real_or("solver.dt_max", 1e-2 * t_end)?,
            dt_growth: raw.real_or("solver.dt_growth", 1.05)?,
            newton_tol: raw.real("solver.newton_tol")?,
            newton_max_iter: raw.count("solver.newton_max_iter")?.unwrap_or(50),
            linear_tol: raw.real_or("solver.linear_tol", 1e-12)?,
            records: raw.count("solver.records")?.unwrap_or(50),
            spacing,
        };
        if spec.records == 0 {
            return Err(raw.err("solver.records", "solver.records must be at least 1"));
        }
        spec.build(0.0).validate().map_err(|e| {
            let key = ["solver.dt0", "solver.dt_max", "solver.dt_growth", "solver.newton_tol", "solver.linear_tol"]
                .into_iter()
                .find(|k| raw.get(k).is_some())
                .unwrap_or("solver.t_end");
            raw.err(key, e.to_string())
        })?;
        Ok(spec)
    }

    fn analysis_from(raw: &RawConfig, solver: &SolverSpec) -> Result<AnalysisSpec, ConfigError> {
        let q0 = raw.real_or("analysis.q0", 1.0)?;
        if q0 < 1.0 {
            return Err(raw.err("analysis.q0", format!("analysis.q0 must be at least 1 (got {q0})")));
        }
        let p_set = raw.reals("analysis.p_set")?.unwrap_or_else(|| vec![1.0, 2.0, 4.0]);
        if p_set != [1.0, 2.0, 4.0] {
            return Err(raw.err(
                "analysis.p_set",
                "analysis.p_set is fixed to 1,2,4 (the series columns l1,l2,l4)",
            ));
        }
        Ok(AnalysisSpec {
            q0,
            p_set,
            early_window: raw.window("analysis.early_window")?,
            late_window: raw.window("analysis.late_window")?,
            late_t_end: raw.real_or("analysis.late_t_end", solver.t_end)?,
            zero_mean_mass: {
                let m = raw.real_or("analysis.zero_mean_mass", 2.0)?;
                if m <= 0.0 {
                    return Err(raw.err(
                        "analysis.zero_mean_mass",
                        format!("analysis.zero_mean_mass must be positive (got {m})"),
                    ));
                }
                m
            },
            seeds: raw.count("analysis.seeds")?.unwrap_or(20),
            cells_2d: raw.count("analysis.cells_2d")?.unwrap_or(16),
        })
    }

    /// Canonical text with every default made explicit. Parsing it yields
    /// the same configuration.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k}={v}");
        };
        if let Some(p) = &self.preset {
            kv("preset", p.clone());
        }
        kv("seed", self.seed.to_string());
        kv("mesh.dim", self.mesh.dim.to_string());
        kv("mesh.extents", fmt_list(&self.mesh.extents));
        kv("mesh.origin", fmt_list(&self.mesh.origin));
        kv("mesh.cells", fmt_list(&self.mesh.cells));
        match self.nl {
            NlSpec::PurePower { m, scale } => {
                kv("nl.kind", "pure-power".into());
                kv("nl.m", m.to_string());
                kv("nl.scale", scale.to_string());
            }
            NlSpec::TwoPower { m1, m2, a, b, scale } => {
                kv("nl.kind", "two-power".into());
                kv("nl.m1", m1.to_string());
                kv("nl.m2", m2.to_string());
                kv("nl.a", a.to_string());
                kv("nl.b", b.to_string());
                kv("nl.scale", scale.to_string());
            }
        }
        kv("datum.kind", self.datum.kind().into());
        match &self.datum {
            DatumSpec::Constant { value } => kv("datum.value", value.to_string()),
            DatumSpec::CosinePerturbation { mean, amplitude, mode } => {
                kv("datum.mean", mean.to_string());
                kv("datum.amplitude", amplitude.to_string());
                kv("datum.mode", mode.to_string());
            }
            DatumSpec::DeltaLike { center, width, mass, shape } => {
                kv("datum.center", fmt_list(center));
                kv("datum.width", width.to_string());
                kv("datum.mass", mass.to_string());
                kv("datum.shape", shape_name(*shape).into());
            }
            DatumSpec::Zkb { m, mass, center, t } => {
                kv("datum.m", m.to_string());
                kv("datum.mass", mass.to_string());
                kv("datum.center", fmt_list(center));
                kv("datum.t", t.to_string());
            }
            DatumSpec::Glued { tau, ell, peak, center } => {
                kv("datum.tau", tau.to_string());
                kv("datum.ell", ell.to_string());
                kv("datum.peak", peak.to_string());
                kv("datum.center", fmt_list(center));
            }
            DatumSpec::OddBump { center, offset, width, mass, shape } => {
                kv("datum.center", fmt_list(center));
                kv("datum.offset", offset.to_string());
                kv("datum.width", width.to_string());
                kv("datum.mass", mass.to_string());
                kv("datum.shape", shape_name(*shape).into());
            }
            DatumSpec::CustomExpression { expr } => kv("datum.expr", expr.clone()),
            DatumSpec::Random { amplitude } => kv("datum.amplitude", amplitude.to_string()),
        }
        let sv = &self.solver;
        kv("solver.t_end", sv.t_end.to_string());
        kv("solver.dt0", sv.dt0.to_string());
        kv("solver.dt_max", sv.dt_max.to_string());
        kv("solver.dt_growth", sv.dt_growth.to_string());
        if let Some(tol) = sv.newton_tol {
            kv("solver.newton_tol", tol.to_string());
        }
        kv("solver.newton_max_iter", sv.newton_max_iter.to_string());
        kv("solver.linear_tol", sv.linear_tol.to_string());
        kv("solver.records", sv.records.to_string());
        kv(
            "solver.spacing",
            match sv.spacing {
                Spacing::Log => "log".into(),
                Spacing::Linear => "linear".into(),
            },
        );
        let an = &self.analysis;
        kv("analysis.q0", an.q0.to_string());
        kv("analysis.p_set", fmt_list(&an.p_set));
        if let Some((a, b)) = an.early_window {
            kv("analysis.early_window", format!("{a}:{b}"));
        }
        if let Some((a, b)) = an.late_window {
            kv("analysis.late_window", format!("{a}:{b}"));
        }
        kv("analysis.late_t_end", an.late_t_end.to_string());
        kv("analysis.zero_mean_mass", an.zero_mean_mass.to_string());
        kv("analysis.seeds", an.seeds.to_string());
        kv("analysis.cells_2d", an.cells_2d.to_string());
        kv("output.dir", self.output.dir.display().to_string());
        kv("output.series", self.output.series.clone());
        kv("output.verdict", self.output.verdict.clone());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
mesh.extents=2
mesh.cells=64
nl.kind=pure-power
nl.m=2
datum.kind=constant
solver.t_end=1
";

    #[test]
    fn minimal_file_gets_defaults() {
        let c = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.mesh.dim, 1);
        assert_eq!(c.mesh.origin, vec![0.0]);
        assert_eq!(c.datum, DatumSpec::Constant { value: 1.0 });
        assert_eq!(c.solver.dt_growth, 1.05);
        assert_eq!(c.solver.records, 50);
        assert_eq!(c.analysis.p_set, vec![1.0, 2.0, 4.0]);
        assert_eq!(c.seed, 1);
        assert_eq!(c.output.series, "series.csv");
    }

    #[test]
    fn echo_round_trips() {
        let text = "\
mesh.extents=4,2
mesh.origin=-2,-1
mesh.cells=32,16
nl.kind=two-power
nl.m1=2.5
nl.m2=1.8
datum.kind=delta-like
datum.width=0.5
datum.shape=cosine-bell
solver.t_end=0.3
solver.newton_tol=1e-12
solver.spacing=linear
analysis.early_window=0.001:0.01
";
        let c = ExperimentConfig::parse(text).unwrap();
        let again = ExperimentConfig::parse(&c.echo()).unwrap();
        assert_eq!(c, again);
        assert_eq!(again.echo(), c.echo());
    }

    #[test]
    fn exponent_below_one_is_rejected() {
        let text = MINIMAL.replace("nl.kind=pure-power\nnl.m=2", "nl.kind=two-power\nnl.m1=0.5\nnl.m2=2");
        let err = ExperimentConfig::parse(&text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("m1 must exceed 1"), "{msg}");
        assert!(msg.contains("line 4"), "{msg}");
    }

    #[test]
    fn duplicate_names_both_lines() {
        let text = format!("{MINIMAL}mesh.cells=32\n");
        let err = ExperimentConfig::parse(&text).unwrap_err();
        assert_eq!(
            err,
            ConfigError::Duplicate {
                key: "mesh.cells".into(),
                first: 2,
                second: 7
            }
        );
        assert!(err.to_string().contains("line 7 duplicates line 2"));
    }

    #[test]
    fn unknown_key_and_type_mismatch_report_lines() {
        let err = ExperimentConfig::parse(&format!("# note\n{MINIMAL}mesh.colour=red\n")).unwrap_err();
        assert!(err.to_string().contains("line 8: unknown key 'mesh.colour'"), "{err}");
        let err = ExperimentConfig::parse(&MINIMAL.replace("mesh.cells=64", "mesh.cells=many")).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        assert!(err.to_string().contains("list of integers"), "{err}");
        let err = ExperimentConfig::parse(&MINIMAL.replace("solver.t_end=1", "solver.t_end=soon")).unwrap_err();
        assert!(err.to_string().contains("line 6"), "{err}");
    }

    #[test]
    fn missing_mandatory_key() {
        let err = ExperimentConfig::parse(&MINIMAL.replace("solver.t_end=1\n", "")).unwrap_err();
        assert_eq!(err, ConfigError::Missing("solver.t_end".into()));
    }

    #[test]
    fn datum_keys_must_match_kind() {
        let err = ExperimentConfig::parse(&format!("{MINIMAL}datum.width=0.1\n")).unwrap_err();
        assert!(err.to_string().contains("does not apply to datum.kind=constant"), "{err}");
    }

    #[test]
    fn bad_expression_is_rejected() {
        let text = MINIMAL.replace("datum.kind=constant", "datum.kind=custom-expression\ndatum.expr=x + (2");
        assert!(ExperimentConfig::parse(&text).is_err());
    }

    #[test]
    fn overlay_replaces_base_keys() {
        let c = ExperimentConfig::parse_over(MINIMAL, "mesh.cells=128\nsolver.t_end=2\n").unwrap();
        assert_eq!(c.mesh.cells, vec![128]);
        assert_eq!(c.solver.t_end, 2.0);
    }
}
