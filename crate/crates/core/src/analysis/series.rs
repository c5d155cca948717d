use crate::mesh::Field;
use crate::nonlinearity::DiffusionLaw;

use super::AnalysisError;

/// `‖u‖_p` with cell-volume weights; `p = ∞` gives the cell maximum.
pub fn lp_norm(field: &Field, p: f64) -> Result<f64, AnalysisError> {
    if !(p > 0.0) {
        return Err(AnalysisError::InvalidExponent(p));
    }
    Ok(lp_norm_of(field.values(), field.mesh().cell_volume(), p))
}

pub(crate) fn lp_norm_of(values: &[f64], vol: f64, p: f64) -> f64 {
    if p.is_infinite() {
        return values.iter().fold(0.0, |m, v| m.max(v.abs()));
    }
    if p == 1.0 {
        return vol * values.iter().map(|v| v.abs()).sum::<f64>();
    }
    if p == 2.0 {
        return (vol * values.iter().map(|v| v * v).sum::<f64>()).sqrt();
    }
    // scale by the max to keep large p from overflowing
    let top = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if top == 0.0 {
        return 0.0;
    }
    let s: f64 = values.iter().map(|v| (v.abs() / top).powf(p)).sum();
    top * (vol * s).powf(1.0 / p)
}

/// Diagnostics of one snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Record {
    pub t: f64,
    pub mass: f64,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub l1: f64,
    pub l2: f64,
    pub l4: f64,
    pub linf: f64,
    pub energy_psi: f64,
}

impl Record {
    pub fn measure<L: DiffusionLaw + ?Sized>(field: &Field, law: &L) -> Self {
        let vals = field.values();
        let mesh = field.mesh();
        let vol = mesh.cell_volume();
        let mass = field.integral();
        let (min, max) = vals
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        Self {
            t: field.time,
            mass,
            mean: mass / mesh.measure(),
            min,
            max,
            l1: lp_norm_of(vals, vol, 1.0),
            l2: lp_norm_of(vals, vol, 2.0),
            l4: lp_norm_of(vals, vol, 4.0),
            linf: lp_norm_of(vals, vol, f64::INFINITY),
            energy_psi: vol * vals.iter().map(|&v| law.psi(v)).sum::<f64>(),
        }
    }

    pub fn get(&self, q: Quantity) -> f64 {
        match q {
            Quantity::Mass => self.mass,
            Quantity::Mean => self.mean,
            Quantity::L1 => self.l1,
            Quantity::L2 => self.l2,
            Quantity::L4 => self.l4,
            Quantity::Linf => self.linf,
            Quantity::Energy => self.energy_psi,
            Quantity::DeviationFromMean => (self.max - self.mean).max(self.mean - self.min),
        }
    }
}

/// Columns of a [`TimeSeries`] that the fits can select.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    Mass,
    Mean,
    L1,
    L2,
    L4,
    Linf,
    Energy,
    /// `‖u − ū‖∞`, recovered from the recorded extremes and mean.
    DeviationFromMean,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Provenance {
    pub mesh: String,
    pub nonlinearity: String,
    pub q0: f64,
}

/// Time-ordered records of one run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TimeSeries {
    records: Vec<Record>,
    pub provenance: Provenance,
}

impl TimeSeries {
    pub fn new(provenance: Provenance) -> Self {
        Self {
            records: Vec::new(),
            provenance,
        }
    }

    /// Builds a series, rejecting non-increasing times or non-finite entries.
    pub fn from_records(records: Vec<Record>, provenance: Provenance) -> Result<Self, AnalysisError> {
        let mut s = Self::new(provenance);
        for r in records {
            s.push(r)?;
        }
        Ok(s)
    }

    pub fn push(&mut self, r: Record) -> Result<(), AnalysisError> {
        let fields = [r.t, r.mass, r.mean, r.min, r.max, r.l1, r.l2, r.l4, r.linf, r.energy_psi];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(AnalysisError::NonFinite(r.t));
        }
        if let Some(last) = self.records.last() {
            if r.t <= last.t {
                return Err(AnalysisError::NonIncreasingTime { prev: last.t, next: r.t });
            }
        }
        self.records.push(r);
        Ok(())
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    pub fn column(&self, q: Quantity) -> Vec<f64> {
        self.records.iter().map(|r| r.get(q)).collect()
    }

    pub fn last(&self) -> Option<&Record> {
        self.records.last()
    }
}
