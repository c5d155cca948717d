//! Time-series CSV and verdict files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use flab_core::analysis::{Provenance, Record, TimeSeries};

use crate::HarnessError;

pub const CSV_HEADER: &str = "t,mass,mean,min,max,l1,l2,l4,linf,energy_psi";

/// 17 significant digits, which round-trip every `f64`.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn format_series(series: &TimeSeries) -> String {
    let mut s = String::with_capacity(64 * (series.len() + 1));
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in series.records() {
        let row = [r.t, r.mass, r.mean, r.min, r.max, r.l1, r.l2, r.l4, r.linf, r.energy_psi];
        let cells: Vec<String> = row.iter().map(|&x| num(x)).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

pub fn write_series(series: &TimeSeries, path: &Path) -> Result<(), HarnessError> {
    fs::write(path, format_series(series))?;
    Ok(())
}

pub fn parse_series(text: &str) -> Result<TimeSeries, HarnessError> {
    let bad = |line: usize, msg: &str| HarnessError::Usage(format!("series line {line}: {msg}"));
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        _ => return Err(bad(1, &format!("expected header '{CSV_HEADER}'"))),
    }
    let mut records = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let v: Vec<f64> = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad(idx + 1, "unparsable number"))?;
        if v.len() != 10 {
            return Err(bad(idx + 1, "expected 10 columns"));
        }
        records.push(Record {
            t: v[0],
            mass: v[1],
            mean: v[2],
            min: v[3],
            max: v[4],
            l1: v[5],
            l2: v[6],
            l4: v[7],
            linf: v[8],
            energy_psi: v[9],
        });
    }
    Ok(TimeSeries::from_records(records, Provenance::default())?)
}

/// One checked claim: a measured value against its prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub preset: String,
    pub check: String,
    pub theorem: String,
    pub predicted: f64,
    pub measured: f64,
    pub tolerance: f64,
    /// How `measured`, `predicted` and `tolerance` are compared.
    pub criterion: String,
    pub pass: bool,
    pub notes: Vec<(String, String)>,
}

impl Verdict {
    fn new(preset: &str, check: &str, theorem: &str, predicted: f64, measured: f64, tolerance: f64) -> Self {
        Self {
            preset: preset.into(),
            check: check.into(),
            theorem: theorem.into(),
            predicted,
            measured,
            tolerance,
            criterion: String::new(),
            pass: false,
            notes: Vec::new(),
        }
    }

    /// `|measured − predicted| ≤ tolerance·|predicted|`.
    pub fn relative(preset: &str, check: &str, theorem: &str, predicted: f64, measured: f64, tolerance: f64) -> Self {
        let mut v = Self::new(preset, check, theorem, predicted, measured, tolerance);
        v.criterion = "relative".into();
        v.pass = (measured - predicted).abs() <= tolerance * predicted.abs();
        v
    }

    /// `|measured − predicted| ≤ tolerance`.
    pub fn absolute(preset: &str, check: &str, theorem: &str, predicted: f64, measured: f64, tolerance: f64) -> Self {
        let mut v = Self::new(preset, check, theorem, predicted, measured, tolerance);
        v.criterion = "absolute".into();
        v.pass = (measured - predicted).abs() <= tolerance;
        v
    }

    /// `measured ≤ tolerance`; `predicted` is the ideal value.
    pub fn at_most(preset: &str, check: &str, theorem: &str, predicted: f64, measured: f64, tolerance: f64) -> Self {
        let mut v = Self::new(preset, check, theorem, predicted, measured, tolerance);
        v.criterion = "at-most".into();
        v.pass = measured <= tolerance;
        v
    }

    /// A check that could not be evaluated.
    pub fn failed(preset: &str, check: &str, theorem: &str, reason: &str) -> Self {
        let mut v = Self::new(preset, check, theorem, f64::NAN, f64::NAN, f64::NAN);
        v.criterion = "error".into();
        v.notes.push(("error".into(), reason.replace('\n', " ")));
        v
    }

    pub fn note(mut self, key: &str, value: impl ToString) -> Self {
        self.notes.push((key.into(), value.to_string()));
        self
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "preset={}", self.preset);
        let _ = writeln!(s, "check={}", self.check);
        let _ = writeln!(s, "theorem={}", self.theorem);
        let _ = writeln!(s, "predicted={}", num(self.predicted));
        let _ = writeln!(s, "measured={}", num(self.measured));
        let _ = writeln!(s, "tolerance={}", num(self.tolerance));
        let _ = writeln!(s, "criterion={}", self.criterion);
        for (k, v) in &self.notes {
            let _ = writeln!(s, "{k}={v}");
        }
        let _ = writeln!(s, "pass={}", self.pass);
        s
    }

    /// One human-readable line.
    pub fn summary(&self) -> String {
        format!(
            "{} {}/{}: measured {:.6e}, predicted {:.6e}, tolerance {:.3e} ({})",
            if self.pass { "PASS" } else { "FAIL" },
            self.preset,
            self.check,
            self.measured,
            self.predicted,
            self.tolerance,
            self.criterion
        )
    }
}

/// Verdict blocks separated by blank lines.
pub fn format_verdicts(verdicts: &[Verdict]) -> String {
    verdicts.iter().map(Verdict::to_text).collect::<Vec<_>>().join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(t: f64) -> Record {
        Record {
            t,
            mass: 1.0 / 3.0,
            mean: -0.1,
            min: -2.0,
            max: std::f64::consts::PI,
            l1: 1e-300,
            l2: 123456.789,
            l4: 0.1 + 0.2,
            linf: 5e-324,
            energy_psi: 2.0_f64.sqrt(),
        }
    }

    #[test]
    fn empty_series_is_header_only() {
        let s = TimeSeries::new(Provenance::default());
        assert_eq!(format_series(&s), format!("{CSV_HEADER}\n"));
        assert!(parse_series(&format_series(&s)).unwrap().is_empty());
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let s = TimeSeries::from_records(vec![rec(0.0), rec(1e-7), rec(0.3)], Provenance::default()).unwrap();
        let text = format_series(&s);
        assert!(!text.contains('\r'));
        let back = parse_series(&text).unwrap();
        for (a, b) in s.records().iter().zip(back.records()) {
            assert_eq!(a, b);
            assert_eq!(a.l4.to_bits(), b.l4.to_bits());
        }
    }

    #[test]
    fn verdict_keys() {
        let v = Verdict::relative("p", "c", "thm", -1.0 / 3.0, -0.32, 0.15);
        assert!(v.pass);
        let text = v.to_text();
        for key in ["preset=", "theorem=", "predicted=", "measured=", "tolerance=", "pass=true"] {
            assert!(text.contains(key), "{text}");
        }
        assert!(!Verdict::failed("p", "c", "thm", "boom").pass);
        assert!(!Verdict::at_most("p", "c", "thm", 0.0, f64::NAN, 1.0).pass);
    }
}
