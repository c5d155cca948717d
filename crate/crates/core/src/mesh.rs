//! Cell-centred box meshes with zero-flux topology and fields on them.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("dimension must be 1 or 2 (got {0})")]
    Dimension(usize),
    #[error("expected {expected} entries per axis, got {got}")]
    AxisCount { expected: usize, got: usize },
    #[error("extent along axis {axis} must be positive and finite (got {value})")]
    Extent { axis: usize, value: f64 },
    #[error("origin along axis {axis} must be finite (got {value})")]
    Origin { axis: usize, value: f64 },
    #[error("axis {axis} needs at least 3 cells (got {cells})")]
    TooFewCells { axis: usize, cells: usize },
    #[error("non-finite sample {value} at cell {cell}")]
    NonFiniteSample { cell: usize, value: f64 },
    #[error("field has {got} values but the mesh has {expected} cells")]
    Length { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub origin: f64,
    /// Stored as `h * cells`, so the product identity is exact.
    pub length: f64,
    pub cells: usize,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxMesh {
    axes: Vec<Axis>,
    cell_volume: f64,
}

impl BoxMesh {
    pub fn new(dim: usize, extents: &[f64], origins: &[f64], n_cells: &[usize]) -> Result<Self, MeshError> {
        if !(1..=2).contains(&dim) {
            return Err(MeshError::Dimension(dim));
        }
        for got in [extents.len(), origins.len(), n_cells.len()] {
            if got != dim {
                return Err(MeshError::AxisCount { expected: dim, got });
            }
        }
        let mut axes = Vec::with_capacity(dim);
        for axis in 0..dim {
            let (len, origin, cells) = (extents[axis], origins[axis], n_cells[axis]);
            if !(len.is_finite() && len > 0.0) {
                return Err(MeshError::Extent { axis, value: len });
            }
            if !origin.is_finite() {
                return Err(MeshError::Origin { axis, value: origin });
            }
            if cells < 3 {
                return Err(MeshError::TooFewCells { axis, cells });
            }
            let h = len / cells as f64;
            axes.push(Axis {
                origin,
                length: h * cells as f64,
                cells,
                h,
            });
        }
        let cell_volume = axes.iter().map(|a| a.h).product();
        Ok(Self { axes, cell_volume })
    }

    /// Uniform 1D grid on `[lo, hi]`.
    pub fn interval(lo: f64, hi: f64, cells: usize) -> Result<Self, MeshError> {
        Self::new(1, &[hi - lo], &[lo], &[cells])
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, i: usize) -> &Axis {
        &self.axes[i]
    }

    pub fn h(&self) -> Vec<f64> {
        self.axes.iter().map(|a| a.h).collect()
    }

    pub fn max_h(&self) -> f64 {
        self.axes.iter().map(|a| a.h).fold(0.0, f64::max)
    }

    pub fn cell_volume(&self) -> f64 {
        self.cell_volume
    }

    pub fn cell_count(&self) -> usize {
        self.axes.iter().map(|a| a.cells).product()
    }

    /// Lebesgue measure of the box.
    pub fn measure(&self) -> f64 {
        self.axes.iter().map(|a| a.length).product()
    }

    pub fn extents(&self) -> Vec<f64> {
        self.axes.iter().map(|a| a.length).collect()
    }

    /// Linear index is `i + nx * j`.
    pub fn center(&self, cell: usize) -> [f64; 2] {
        let mut out = [0.0; 2];
        let mut rest = cell;
        for (k, a) in self.axes.iter().enumerate() {
            let i = rest % a.cells;
            rest /= a.cells;
            out[k] = a.origin + (i as f64 + 0.5) * a.h;
        }
        out
    }

    /// Distance from `x` to the nearest face of the box (negative outside).
    pub fn distance_to_boundary(&self, x: &[f64]) -> f64 {
        self.axes
            .iter()
            .zip(x)
            .map(|(a, &xi)| (xi - a.origin).min(a.origin + a.length - xi))
            .fold(f64::INFINITY, f64::min)
    }

    /// Same box with twice the cells along every axis.
    pub fn refined(&self) -> Self {
        let extents: Vec<f64> = self.axes.iter().map(|a| a.length).collect();
        let origins: Vec<f64> = self.axes.iter().map(|a| a.origin).collect();
        let cells: Vec<usize> = self.axes.iter().map(|a| 2 * a.cells).collect();
        Self::new(self.dim(), &extents, &origins, &cells).expect("refinement of a valid mesh")
    }
}

impl fmt::Display for BoxMesh {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .axes
            .iter()
            .map(|a| format!("[{},{}]x{}", a.origin, a.origin + a.length, a.cells))
            .collect();
        write!(f, "{}", parts.join("*"))
    }
}

/// Cell averages on a mesh at a given time.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    mesh: Arc<BoxMesh>,
    values: Vec<f64>,
    pub time: f64,
}

impl Field {
    pub fn new(mesh: Arc<BoxMesh>, values: Vec<f64>, time: f64) -> Result<Self, MeshError> {
        if values.len() != mesh.cell_count() {
            return Err(MeshError::Length {
                expected: mesh.cell_count(),
                got: values.len(),
            });
        }
        if let Some((cell, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(MeshError::NonFiniteSample { cell, value });
        }
        Ok(Self { mesh, values, time })
    }

    pub fn constant(mesh: Arc<BoxMesh>, c: f64) -> Self {
        let n = mesh.cell_count();
        Self {
            mesh,
            values: vec![c; n],
            time: 0.0,
        }
    }

    pub fn mesh(&self) -> &Arc<BoxMesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn with_time(mut self, t: f64) -> Self {
        self.time = t;
        self
    }

    /// Discrete mass `|cell| · Σ u_i`.
    pub fn integral(&self) -> f64 {
        self.mesh.cell_volume() * self.values.iter().sum::<f64>()
    }

    pub fn mean(&self) -> f64 {
        self.integral() / self.mesh.measure()
    }
}

/// Samples `f` at cell centres; the result carries time 0.
pub fn project_function<F>(mesh: Arc<BoxMesh>, f: F) -> Result<Field, MeshError>
where
    F: Fn(&[f64]) -> f64,
{
    let dim = mesh.dim();
    let mut values = Vec::with_capacity(mesh.cell_count());
    for cell in 0..mesh.cell_count() {
        let x = mesh.center(cell);
        let v = f(&x[..dim]);
        if !v.is_finite() {
            return Err(MeshError::NonFiniteSample { cell, value: v });
        }
        values.push(v);
    }
    Ok(Field {
        mesh,
        values,
        time: 0.0,
    })
}
