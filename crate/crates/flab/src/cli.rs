//! The `flab` command line.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use flab_core::analysis::{fit_exp_rate, fit_power_rate, poincare_constant_box, poincare_constant_numeric, Quantity};
use flab_core::verify_growth_conditions;

use crate::config::ExperimentConfig;
use crate::output::{format_verdicts, parse_series, write_series, Verdict};
use crate::presets::{preset_config, run_config, run_preset};
use crate::{exit, thread_pool, HarnessError};

#[derive(Debug, Parser)]
#[command(name = "flab", version, about = "Filtration equation laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the simulation described by a config file and write its series.
    Run { config: PathBuf },
    /// Run a verification preset and write its verdict file.
    Verify {
        preset: String,
        /// Keys overriding the preset defaults.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Fit a decay rate to a series CSV.
    Rates {
        series: PathBuf,
        /// Fit window `ta:tb`.
        #[arg(long)]
        window: String,
        /// Exponential rate of the deviation from the mean instead of a power law.
        #[arg(long)]
        exp: bool,
        /// Column for the power-law fit.
        #[arg(long, default_value = "linf")]
        quantity: String,
    },
    /// Check the growth conditions of the configured nonlinearity.
    CheckPhi {
        config: PathBuf,
        /// Upper end of the large-amplitude sample.
        #[arg(long, default_value_t = 1e3)]
        u_max: f64,
    },
    /// Compare the numeric and closed-form Poincare constants of the mesh.
    Poincare { config: PathBuf },
}

/// Parses `args` (including the program name), runs the command and
/// returns the exit status.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::PASS };
            let _ = if e.use_stderr() {
                write!(err, "{e}")
            } else {
                write!(out, "{e}")
            };
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "flab: {e}");
            e.exit_code()
        }
    }
}

fn read(path: &Path) -> Result<String, HarnessError> {
    fs::read_to_string(path).map_err(|e| HarnessError::Usage(format!("cannot read {}: {e}", path.display())))
}

fn output_dir(cfg: &ExperimentConfig) -> Result<PathBuf, HarnessError> {
    let dir = cfg.output.dir.clone();
    fs::create_dir_all(&dir).map_err(|e| HarnessError::Usage(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<i32, HarnessError> {
    match command {
        Command::Run { config } => {
            let cfg = ExperimentConfig::parse(&read(&config)?)?;
            write!(out, "{}", cfg.echo())?;
            let dir = output_dir(&cfg)?;
            let sim = thread_pool()?.install(|| run_config(&cfg))?;
            let path = dir.join(&cfg.output.series);
            write_series(&sim.series, &path)?;
            writeln!(
                out,
                "# wrote {} ({} records, {} steps, {} rejected, {} Newton iterations)",
                path.display(),
                sim.series.len(),
                sim.stats.steps,
                sim.stats.rejected_steps,
                sim.stats.newton_iters
            )?;
            Ok(exit::PASS)
        }
        Command::Verify { preset, config } => {
            let user = match &config {
                Some(p) => read(p)?,
                None => String::new(),
            };
            let cfg = preset_config(&preset, &user)?;
            verify(&preset, &cfg, out)
        }
        Command::Rates {
            series,
            window,
            exp,
            quantity,
        } => {
            let s = parse_series(&read(&series)?)?;
            let w = parse_window(&window)?;
            if exp {
                let fit = fit_exp_rate(&s, w)?;
                writeln!(out, "rate={:.16e}\nr2={:.16e}", fit.rate, fit.r2)?;
            } else {
                let q = parse_quantity(&quantity)?;
                let fit = fit_power_rate(&s, q, w)?;
                writeln!(
                    out,
                    "slope={:.16e}\nintercept={:.16e}\nr2={:.16e}",
                    fit.slope, fit.intercept, fit.r2
                )?;
            }
            Ok(exit::PASS)
        }
        Command::CheckPhi { config, u_max } => {
            if !(u_max > 1.0 && u_max.is_finite()) {
                return Err(HarnessError::Usage(format!("--u-max must exceed 1 (got {u_max})")));
            }
            let cfg = ExperimentConfig::parse(&read(&config)?)?;
            let law = cfg.nl.build()?;
            let (m1, m2) = cfg.nl.exponents();
            let report = verify_growth_conditions(&law, m1, m2, u_max, 10_000);
            writeln!(out, "nonlinearity={law}")?;
            let knots: Vec<String> = law.knots().iter().map(|k| k.to_string()).collect();
            writeln!(out, "knots={}", knots.join(","))?;
            writeln!(out, "c1={:.16e}\nc2={:.16e}\nok={}", report.c1_best, report.c2_best, report.ok)?;
            Ok(if report.ok { exit::PASS } else { exit::VERDICT_FAILURE })
        }
        Command::Poincare { config } => {
            let cfg = ExperimentConfig::parse(&read(&config)?)?;
            let mesh = cfg.mesh.build()?;
            let exact = poincare_constant_box(&cfg.mesh.extents);
            let numeric = poincare_constant_numeric(&mesh)?;
            writeln!(
                out,
                "mesh={mesh}\nbox={exact:.16e}\nnumeric={numeric:.16e}\nrelative_difference={:.3e}",
                (numeric - exact).abs() / exact
            )?;
            Ok(exit::PASS)
        }
    }
}

/// Runs a preset, writes its series and verdict file, and prints one line
/// per verdict.
pub fn verify(preset: &str, cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<i32, HarnessError> {
    let dir = output_dir(cfg)?;
    let verdict_path = dir.join(&cfg.output.verdict);
    let result = thread_pool()?.install(|| run_preset(preset, cfg));
    let (verdicts, code) = match result {
        Ok(report) => {
            let stem = cfg.output.series.trim_end_matches(".csv");
            for (i, (name, series)) in report.series.iter().enumerate() {
                let file = if i == 0 {
                    cfg.output.series.clone()
                } else {
                    format!("{stem}-{name}.csv")
                };
                write_series(series, &dir.join(file))?;
            }
            let code = if report.passed() {
                exit::PASS
            } else {
                exit::VERDICT_FAILURE
            };
            (report.verdicts, code)
        }
        Err(e @ (HarnessError::Solver(_) | HarnessError::Analysis(_))) => {
            let v = Verdict::failed(preset, "run", "none", &e.to_string());
            (vec![v], e.exit_code())
        }
        Err(e) => return Err(e),
    };
    fs::write(&verdict_path, format_verdicts(&verdicts))?;
    for v in &verdicts {
        writeln!(out, "{}", v.summary())?;
    }
    writeln!(out, "# verdict written to {}", verdict_path.display())?;
    Ok(code)
}

fn parse_window(s: &str) -> Result<(f64, f64), HarnessError> {
    let bad = || HarnessError::Usage(format!("--window expects ta:tb with ta < tb (got '{s}')"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let a: f64 = a.trim().parse().map_err(|_| bad())?;
    let b: f64 = b.trim().parse().map_err(|_| bad())?;
    if a < b {
        Ok((a, b))
    } else {
        Err(bad())
    }
}

fn parse_quantity(s: &str) -> Result<Quantity, HarnessError> {
    Ok(match s {
        "mass" => Quantity::Mass,
        "mean" => Quantity::Mean,
        "l1" => Quantity::L1,
        "l2" => Quantity::L2,
        "l4" => Quantity::L4,
        "linf" => Quantity::Linf,
        "energy_psi" => Quantity::Energy,
        "deviation" => Quantity::DeviationFromMean,
        other => {
            return Err(HarnessError::Usage(format!(
                "unknown quantity '{other}' (expected mass, mean, l1, l2, l4, linf, energy_psi or deviation)"
            )))
        }
    })
}
