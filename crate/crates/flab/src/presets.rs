//! Verification experiments. Each preset has a default configuration that
//! a user file may override key by key.

use std::sync::Arc;

use flab_core::analysis::{
    detect_t_star, envelope_ratio, fit_exp_rate, fit_power_rate, lp_norm, poincare_constant_box,
    poincare_constant_numeric, predict_rates, Quantity, TimeSeries,
};
use flab_core::nonlinearity::Nonlinearity;
use flab_core::reference::ZkbProfile;
use flab_core::solver::{RunStats, SolverConfig};
use flab_core::{run_observed, BoxMesh, Field};
use rayon::prelude::*;

use crate::config::{DatumSpec, ExperimentConfig, MeshSpec, Spacing};
use crate::datum;
use crate::output::Verdict;
use crate::rng::SplitMix64;
use crate::HarnessError;

pub const PRESETS: [&str; 7] = [
    "barenblatt-validate",
    "smoothing",
    "zero-mean",
    "mean-convergence",
    "sharpness",
    "invariants",
    "poincare",
];

const BARENBLATT: &str = "\
mesh.extents=8
mesh.origin=-4
mesh.cells=512
nl.kind=pure-power
nl.m=2
datum.kind=zkb
datum.mass=1
datum.t=0.01
solver.t_end=0.5
solver.dt0=1e-5
solver.dt_max=1e-3
solver.records=30
";

const SMOOTHING: &str = "\
mesh.extents=4
mesh.origin=-2
mesh.cells=1024
nl.kind=two-power
nl.m1=3
nl.m2=2
datum.kind=delta-like
datum.width=0.02
datum.mass=1
solver.t_end=0.2
solver.dt0=1e-6
solver.dt_max=1e-3
solver.records=80
analysis.late_t_end=2000
";

const ZERO_MEAN: &str = "\
mesh.extents=2
mesh.origin=-1
mesh.cells=512
nl.kind=pure-power
nl.m=2
datum.kind=custom-expression
datum.expr=0.5 * math::sin(pi * x)
solver.t_end=200
solver.dt0=1e-4
solver.dt_max=0.5
solver.records=80
";

const MEAN_CONVERGENCE: &str = "\
mesh.extents=1
mesh.cells=256
nl.kind=pure-power
nl.m=2
datum.kind=cosine-perturbation
datum.mean=1
datum.amplitude=0.1
datum.mode=1
solver.t_end=1.2
solver.dt0=1e-4
solver.dt_max=1e-3
solver.newton_tol=1e-12
solver.records=240
solver.spacing=linear
";

const SHARPNESS: &str = "\
mesh.extents=4
mesh.origin=-2
mesh.cells=1024
nl.kind=two-power
nl.m1=3
nl.m2=2
datum.kind=glued
datum.tau=1e-3
datum.ell=0.5
datum.peak=0.25
solver.t_end=0.1
solver.dt0=1e-6
solver.dt_max=1e-3
solver.records=60
";

const INVARIANTS: &str = "\
mesh.extents=1
mesh.cells=64
nl.kind=two-power
nl.m1=2.5
nl.m2=1.8
datum.kind=random
datum.amplitude=2
solver.t_end=0.05
solver.dt0=1e-3
solver.dt_max=1e-3
solver.newton_tol=1e-12
solver.records=10
solver.spacing=linear
analysis.seeds=20
analysis.cells_2d=16
";

const POINCARE: &str = "\
mesh.extents=3.141592653589793
mesh.cells=256
nl.kind=pure-power
nl.m=2
datum.kind=constant
solver.t_end=1
";

/// Default configuration text of a preset.
pub fn default_config(name: &str) -> Option<&'static str> {
    Some(match name {
        "barenblatt-validate" => BARENBLATT,
        "smoothing" => SMOOTHING,
        "zero-mean" => ZERO_MEAN,
        "mean-convergence" => MEAN_CONVERGENCE,
        "sharpness" => SHARPNESS,
        "invariants" => INVARIANTS,
        "poincare" => POINCARE,
        _ => return None,
    })
}

/// The preset's defaults overlaid with `user` (which may be empty).
pub fn preset_config(name: &str, user: &str) -> Result<ExperimentConfig, HarnessError> {
    let base = default_config(name).ok_or_else(|| HarnessError::UnknownPreset(name.to_string()))?;
    let mut cfg = ExperimentConfig::parse_over(base, user)?;
    if cfg.output.series == "series.csv" {
        cfg.output.series = format!("{name}.csv");
    }
    if cfg.output.verdict == "verdict.txt" {
        cfg.output.verdict = format!("{name}.verdict");
    }
    Ok(cfg)
}

#[derive(Debug, Clone)]
pub struct PresetReport {
    pub preset: String,
    pub verdicts: Vec<Verdict>,
    /// Named series; the first is the main run.
    pub series: Vec<(String, TimeSeries)>,
}

impl PresetReport {
    pub fn passed(&self) -> bool {
        !self.verdicts.is_empty() && self.verdicts.iter().all(|v| v.pass)
    }
}

const THM_BARENBLATT: &str = "self-similar Barenblatt solution";
const THM_SHORT: &str = "smoothing estimate, short-time branch";
const THM_CROSSOVER: &str = "smoothing estimate, crossover to the small-amplitude exponent";
const THM_ZERO_MEAN: &str = "zero-mean absolute bound, long-time power";
const THM_NONZERO_MEAN: &str = "nonzero-mean exponential convergence to the mean";
const THM_SHARP: &str = "sharpness of the short-time smoothing exponent";
const THM_MASS: &str = "mass conservation";
const THM_CONTRACTION: &str = "L1 contraction and comparison";
const THM_NORMS: &str = "Lp non-expansivity and energy decay";
const THM_POINCARE: &str = "Neumann Poincare inequality";

/// Runs a preset with an already merged configuration.
pub fn run_preset(name: &str, cfg: &ExperimentConfig) -> Result<PresetReport, HarnessError> {
    let mut report = match name {
        "barenblatt-validate" => barenblatt(cfg)?,
        "smoothing" => smoothing(cfg)?,
        "zero-mean" => zero_mean(cfg)?,
        "mean-convergence" => mean_convergence(cfg)?,
        "sharpness" => sharpness(cfg)?,
        "invariants" => invariants(cfg)?,
        "poincare" => poincare(cfg)?,
        other => return Err(HarnessError::UnknownPreset(other.to_string())),
    };
    report.preset = name.to_string();
    for (_, s) in &mut report.series {
        s.provenance.q0 = cfg.analysis.q0;
    }
    Ok(report)
}

/// Result of one simulation.
pub struct Simulation {
    pub series: TimeSeries,
    pub last: Field,
    pub stats: RunStats,
}

pub fn simulate(u0: &Field, law: &Nonlinearity, solver: &SolverConfig) -> Result<Simulation, HarnessError> {
    let mut last = u0.clone();
    let (series, stats) = run_observed(u0, law, solver, |f| last = f.clone())?;
    Ok(Simulation { series, last, stats })
}

/// Runs a configuration as written.
pub fn run_config(cfg: &ExperimentConfig) -> Result<Simulation, HarnessError> {
    let mesh = Arc::new(cfg.mesh.build()?);
    let law = cfg.nl.build()?;
    let u0 = datum::build(&cfg.datum, mesh, &cfg.nl, cfg.seed)?;
    simulate(&u0, &law, &cfg.solver.build(u0.time))
}

fn sup_norm(f: &Field) -> f64 {
    f.values().iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Early window `[3·dt0, min(crossover, t_end/10)]` unless configured.
fn early_window(cfg: &ExperimentConfig, crossover: f64) -> (f64, f64) {
    cfg.analysis
        .early_window
        .unwrap_or((3.0 * cfg.solver.dt0, crossover.min(0.1 * cfg.solver.t_end)))
}

/// Last decade of the run unless configured.
fn late_window(cfg: &ExperimentConfig, t_end: f64) -> (f64, f64) {
    cfg.analysis.late_window.unwrap_or((0.1 * t_end, t_end))
}

fn barenblatt(cfg: &ExperimentConfig) -> Result<PresetReport, HarnessError> {
    const P: &str = "barenblatt-validate";
    let DatumSpec::Zkb { m, mass, center, .. } = &cfg.datum else {
        return Err(HarnessError::Usage(format!("{P} needs datum.kind=zkb")));
    };
    let zkb = ZkbProfile::new(*m, *mass, center)?;
    let sim = run_config(cfg)?;
    let t_end = cfg.solver.t_end;
    let mesh = sim.last.mesh().clone();
    let verdict = match zkb.project(mesh, t_end) {
        Ok(exact) => {
            let err = sim
                .last
                .values()
                .iter()
                .zip(exact.values())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
                / sup_norm(&exact);
            Verdict::at_most(P, "relative sup error at t_end", THM_BARENBLATT, 0.0, err, 0.02)
                .note("support_radius", zkb.support_radius(t_end)?)
        }
        Err(e) => Verdict::failed(P, "relative sup error at t_end", THM_BARENBLATT, &e.to_string()),
    };
    Ok(PresetReport {
        preset: P.into(),
        verdicts: vec![verdict.note("steps", sim.stats.steps)],
        series: vec![("main".into(), sim.series)],
    })
}

#[allow(clippy::too_many_arguments)]
fn power_fit_verdict(
    absolute: bool,
    preset: &str,
    check: &str,
    theorem: &str,
    series: &TimeSeries,
    window: (f64, f64),
    predicted: f64,
    tol: f64,
) -> (Verdict, Option<f64>) {
    match fit_power_rate(series, Quantity::Linf, window) {
        Ok(fit) => (
            if absolute {
                Verdict::absolute(preset, check, theorem, predicted, fit.slope, tol)
            } else {
                Verdict::relative(preset, check, theorem, predicted, fit.slope, tol)
            }
                .note("window", format!("{}:{}", window.0, window.1))
                .note("r2", fit.r2),
            Some(fit.slope),
        ),
        Err(e) => (Verdict::failed(preset, check, theorem, &e.to_string()), None),
    }
}

/// Records per decade of the configured schedule, carried over to a
/// longer run.
fn extended_solver(cfg: &ExperimentConfig, t_end: f64) -> SolverConfig {
    let mut s = cfg.solver.clone();
    let ratio = t_end / s.t_end;
    if s.spacing == Spacing::Log {
        let decades = |end: f64| (end / s.dt0).log10().max(1.0);
        s.records = (s.records as f64 * decades(t_end) / decades(s.t_end)).ceil() as usize;
    }
    s.dt_max *= ratio;
    s.t_end = t_end;
    s.build(0.0)
}

fn smoothing(cfg: &ExperimentConfig) -> Result<PresetReport, HarnessError> {
    const P: &str = "smoothing";
    let DatumSpec::DeltaLike {
        center, width, shape, ..
    } = &cfg.datum
    else {
        return Err(HarnessError::Usage(format!("{P} needs datum.kind=delta-like")));
    };
    let law = cfg.nl.build()?;
    let (m1, m2) = cfg.nl.exponents();
    let mesh = Arc::new(cfg.mesh.build()?);
    let u0 = datum::build(&cfg.datum, mesh.clone(), &cfg.nl, cfg.seed)?;
    let norm_q0 = lp_norm(&u0, cfg.analysis.q0)?;
    let pred = predict_rates(cfg.analysis.q0, cfg.mesh.dim, m1, m2, norm_q0, u0.mean(), &law, 1.0);
    let early = early_window(cfg, pred.crossover_t);

    // zero-mean companion: a bump and its negative centred in the two
    // halves of the box
    let odd = DatumSpec::OddBump {
        center: center.clone(),
        offset: 0.25 * cfg.mesh.extents[0],
        width: *width,
        mass: cfg.analysis.zero_mean_mass,
        shape: *shape,
    };
    let v0 = datum::build(&odd, mesh, &cfg.nl, cfg.seed)?;
    let late_t_end = cfg.analysis.late_t_end.max(cfg.solver.t_end);
    let (main, companion) = rayon::join(
        || simulate(&u0, &law, &cfg.solver.build(0.0)),
        || simulate(&v0, &law, &extended_solver(cfg, late_t_end)),
    );
    let (main, companion) = (main?, companion?);

    let mut verdicts = Vec::new();
    let (v, _) = power_fit_verdict(false, P, "short-time exponent", THM_SHORT, &main.series, early, -pred.short_exp, 0.15);
    verdicts.push(v.note("u0_sup", sup_norm(&u0)));

    let zs = &companion.series;
    let (v, early_slope) = power_fit_verdict(
        true,
        P,
        "zero-mean early exponent",
        THM_SHORT,
        zs,
        early,
        -pred.short_exp,
        0.05 / 0.33,
    );
    verdicts.push(v);

    let t_star = detect_t_star(zs);
    let late = cfg.analysis.late_window.or_else(|| {
        let after = t_star.unwrap_or(0.0);
        let inside: Vec<f64> = zs
            .records()
            .iter()
            .filter(|r| r.t > after && (0.05..=0.5).contains(&r.linf))
            .map(|r| r.t)
            .collect();
        Some((*inside.first()?, *inside.last()?))
    });
    let check = "zero-mean late exponent";
    let late_verdict = match (late, early_slope) {
        (Some(w), Some(es)) => match fit_power_rate(zs, Quantity::Linf, w) {
            Ok(fit) => Verdict::at_most(P, check, THM_CROSSOVER, -pred.zero_mean_long_exp, fit.slope, es - 0.1)
                .note("window", format!("{}:{}", w.0, w.1))
                .note("r2", fit.r2)
                .note("early_slope", es),
            Err(e) => Verdict::failed(P, check, THM_CROSSOVER, &e.to_string()),
        },
        (None, _) => Verdict::failed(P, check, THM_CROSSOVER, "no records with sup norm in [0.05, 0.5] after t*"),
        (_, None) => Verdict::failed(P, check, THM_CROSSOVER, "early exponent unavailable"),
    };
    verdicts.push(late_verdict.note("t_star", t_star.map_or("none".to_string(), |t| t.to_string())));

    Ok(PresetReport {
        preset: P.into(),
        verdicts,
        series: vec![("main".into(), main.series), ("zero-mean".into(), companion.series)],
    })
}

fn zero_mean(cfg: &ExperimentConfig) -> Result<PresetReport, HarnessError> {
    const P: &str = "zero-mean";
    let (m1, m2) = cfg.nl.exponents();
    let law = cfg.nl.build()?;
    let sim = run_config(cfg)?;
    let first = &sim.series.records()[0];
    let pred = predict_rates(cfg.analysis.q0, cfg.mesh.dim, m1, m2, first.l1, first.mean, &law, 1.0);
    let window = late_window(cfg, cfg.solver.t_end);
    let (v, _) = power_fit_verdict(
        false,
        P,
        "long-time exponent",
        THM_ZERO_MEAN,
        &sim.series,
        window,
        -pred.zero_mean_long_exp,
        0.15,
    );
    let drift = sim.series.records().iter().map(|r| (r.mean - first.mean).abs()).fold(0.0, f64::max);
    let mean_v = Verdict::at_most(P, "mean preservation", THM_MASS, 0.0, drift, 1e-10).note("mean0", first.mean);
    Ok(PresetReport {
        preset: P.into(),
        verdicts: vec![v, mean_v],
        series: vec![("main".into(), sim.series)],
    })
}

fn mean_convergence(cfg: &ExperimentConfig) -> Result<PresetReport, HarnessError> {
    const P: &str = "mean-convergence";
    let (m1, m2) = cfg.nl.exponents();
    let law = cfg.nl.build()?;
    let sim = run_config(cfg)?;
    let first = &sim.series.records()[0];
    let c_p = poincare_constant_box(&cfg.mesh.extents);
    let pred = predict_rates(cfg.analysis.q0, cfg.mesh.dim, m1, m2, first.l1, first.mean, &law, c_p);
    let check = "exponential rate";
    let Some(rate) = pred.nonzero_mean_rate else {
        return Ok(PresetReport {
            preset: P.into(),
            verdicts: vec![Verdict::failed(P, check, THM_NONZERO_MEAN, "datum has zero mean")],
            series: vec![("main".into(), sim.series)],
        });
    };
    let window = cfg
        .analysis
        .late_window
        .or_else(|| flab_core::analysis::window_where(&sim.series, Quantity::DeviationFromMean, 1e-8, 1e-3));
    let v = match window.map(|w| (w, fit_exp_rate(&sim.series, w))) {
        Some((w, Ok(fit))) => Verdict::relative(P, check, THM_NONZERO_MEAN, rate, fit.rate, 0.10)
            .note("window", format!("{}:{}", w.0, w.1))
            .note("r2", fit.r2)
            .note("c_p", c_p),
        Some((_, Err(e))) => Verdict::failed(P, check, THM_NONZERO_MEAN, &e.to_string()),
        None => Verdict::failed(P, check, THM_NONZERO_MEAN, "deviation never enters [1e-8, 1e-3]"),
    };
    Ok(PresetReport {
        preset: P.into(),
        verdicts: vec![v],
        series: vec![("main".into(), sim.series)],
    })
}

fn sharpness(cfg: &ExperimentConfig) -> Result<PresetReport, HarnessError> {
    const P: &str = "sharpness";
    let DatumSpec::Glued { tau, .. } = &cfg.datum else {
        return Err(HarnessError::Usage(format!("{P} needs datum.kind=glued")));
    };
    let (m1, m2) = cfg.nl.exponents();
    let law = cfg.nl.build()?;
    let mesh = Arc::new(cfg.mesh.build()?);
    let u0 = datum::build(&cfg.datum, mesh, &cfg.nl, cfg.seed)?;
    let norm_q0 = lp_norm(&u0, cfg.analysis.q0)?;
    let pred = predict_rates(cfg.analysis.q0, cfg.mesh.dim, m1, m2, norm_q0, u0.mean(), &law, 1.0);
    let sim = simulate(&u0, &law, &cfg.solver.build(0.0))?;
    let (lo, hi) = cfg.analysis.early_window.unwrap_or((2.0 * tau, cfg.solver.t_end));
    let ratios: Vec<f64> = envelope_ratio(&sim.series, &pred, norm_q0)
        .into_iter()
        .filter(|(t, _)| *t >= lo && *t <= hi)
        .map(|(_, r)| r)
        .collect();
    let check = "envelope ratio spread";
    let v = if ratios.len() < 2 {
        Verdict::failed(P, check, THM_SHARP, "fewer than two records in the window")
    } else {
        let max = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut v = Verdict::at_most(P, check, THM_SHARP, 1.0, max / min, 3.0)
            .note("window", format!("{lo}:{hi}"))
            .note("realized_k", max)
            .note("u0_norm_q0", norm_q0);
        if let Ok(fit) = fit_power_rate(&sim.series, Quantity::Linf, (lo, hi)) {
            v = v.note("slope", fit.slope).note("predicted_slope", -pred.short_exp);
        }
        v
    };
    Ok(PresetReport {
        preset: P.into(),
        verdicts: vec![v],
        series: vec![("main".into(), sim.series)],
    })
}

/// Worst violations of the structural properties over one ordered pair
/// `v0 ≤ u0`.
#[derive(Debug, Clone, Copy, Default)]
struct Violations {
    mass: f64,
    norm: f64,
    energy: f64,
    contraction: f64,
    comparison: f64,
}

impl Violations {
    fn max(self, o: Self) -> Self {
        Self {
            mass: self.mass.max(o.mass),
            norm: self.norm.max(o.norm),
            energy: self.energy.max(o.energy),
            contraction: self.contraction.max(o.contraction),
            comparison: self.comparison.max(o.comparison),
        }
    }
}

fn single_run_violations(series: &TimeSeries) -> Violations {
    let recs = series.records();
    let mut v = Violations::default();
    for w in recs.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        v.mass = v.mass.max((b.mass - recs[0].mass).abs());
        for q in [Quantity::L1, Quantity::L2, Quantity::L4, Quantity::Linf] {
            v.norm = v.norm.max(b.get(q) - a.get(q));
        }
        v.energy = v.energy.max(b.energy_psi - a.energy_psi);
    }
    v
}

fn pair_violations(
    mesh: &Arc<BoxMesh>,
    cfg: &ExperimentConfig,
    law: &Nonlinearity,
    seed: u64,
) -> Result<Violations, HarnessError> {
    let u0 = datum::build(&cfg.datum, mesh.clone(), &cfg.nl, seed)?;
    let amplitude = match cfg.datum {
        DatumSpec::Random { amplitude } => amplitude,
        _ => 1.0,
    };
    // the lower datum uses the complementary stream of the same seed
    let mut rng = SplitMix64::new(!seed);
    let lower: Vec<f64> = u0.values().iter().map(|u| u - rng.uniform(0.0, amplitude)).collect();
    let v0 = Field::new(mesh.clone(), lower, u0.time)?;
    let solver = cfg.solver.build(u0.time);
    let mut us = Vec::new();
    let mut vs = Vec::new();
    let (su, _) = run_observed(&u0, law, &solver, |f| us.push(f.clone()))?;
    let (sv, _) = run_observed(&v0, law, &solver, |f| vs.push(f.clone()))?;

    let mut out = single_run_violations(&su).max(single_run_violations(&sv));
    let vol = mesh.cell_volume();
    let dist = |a: &Field, b: &Field| a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).sum::<f64>() * vol;
    let mut prev = dist(&us[0], &vs[0]);
    for (a, b) in us.iter().zip(&vs) {
        let d = dist(a, b);
        out.contraction = out.contraction.max(d - prev);
        prev = d;
        let worst = b.values().iter().zip(a.values()).map(|(lo, hi)| lo - hi).fold(f64::NEG_INFINITY, f64::max);
        out.comparison = out.comparison.max(worst);
    }
    Ok(out)
}

fn invariants(cfg: &ExperimentConfig) -> Result<PresetReport, HarnessError> {
    const P: &str = "invariants";
    let law = cfg.nl.build()?;
    let mut meshes = vec![Arc::new(cfg.mesh.build()?)];
    if cfg.mesh.dim == 1 && cfg.analysis.cells_2d > 0 {
        let l = cfg.mesh.extents[0];
        let square = MeshSpec {
            dim: 2,
            extents: vec![l, l],
            origin: vec![cfg.mesh.origin[0]; 2],
            cells: vec![cfg.analysis.cells_2d; 2],
        };
        meshes.push(Arc::new(square.build()?));
    }
    let jobs: Vec<(usize, u64)> = (0..meshes.len())
        .flat_map(|m| (0..cfg.analysis.seeds as u64).map(move |s| (m, s)))
        .collect();
    let results: Vec<Result<Violations, HarnessError>> = jobs
        .par_iter()
        .map(|&(m, s)| pair_violations(&meshes[m], cfg, &law, cfg.seed.wrapping_add(s)))
        .collect();
    let mut worst = Violations {
        mass: 0.0,
        norm: f64::NEG_INFINITY,
        energy: f64::NEG_INFINITY,
        contraction: f64::NEG_INFINITY,
        comparison: f64::NEG_INFINITY,
    };
    for r in results {
        worst = worst.max(r?);
    }
    let runs = 2 * jobs.len();
    let verdicts = vec![
        Verdict::at_most(P, "mass drift", THM_MASS, 0.0, worst.mass, 1e-9),
        Verdict::at_most(P, "Lp norm increase, p in {1,2,4,inf}", THM_NORMS, 0.0, worst.norm, 1e-8),
        Verdict::at_most(P, "psi-energy increase", THM_NORMS, 0.0, worst.energy, 1e-8),
        Verdict::at_most(P, "L1 distance increase", THM_CONTRACTION, 0.0, worst.contraction, 1e-8),
        Verdict::at_most(P, "ordering violation", THM_CONTRACTION, 0.0, worst.comparison, 1e-8),
    ]
    .into_iter()
    .map(|v| v.note("runs", runs))
    .collect();
    Ok(PresetReport {
        preset: P.into(),
        verdicts,
        series: Vec::new(),
    })
}

fn poincare(cfg: &ExperimentConfig) -> Result<PresetReport, HarnessError> {
    const P: &str = "poincare";
    let mesh = cfg.mesh.build()?;
    let exact = poincare_constant_box(&cfg.mesh.extents);
    let check = "numeric constant";
    let v = match poincare_constant_numeric(&mesh) {
        Ok(num) => Verdict::relative(P, check, THM_POINCARE, exact, num, 0.005),
        Err(e) => Verdict::failed(P, check, THM_POINCARE, &e.to_string()),
    };
    Ok(PresetReport {
        preset: P.into(),
        verdicts: vec![v],
        series: Vec::new(),
    })
}
