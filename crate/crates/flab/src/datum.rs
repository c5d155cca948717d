//! Initial data from their configuration.

use std::f64::consts::PI;
use std::sync::Arc;

use evalexpr::{build_operator_tree, ContextWithMutableVariables, DefaultNumericTypes, HashMapContext, Node, Value};
use flab_core::reference::{delta_like, glued_datum, ZkbProfile};
use flab_core::{project_function, BoxMesh, Field};

use crate::config::{DatumSpec, NlSpec};
use crate::rng::SplitMix64;
use crate::HarnessError;

pub fn compile_expression(expr: &str) -> Result<Node<DefaultNumericTypes>, String> {
    build_operator_tree::<DefaultNumericTypes>(expr).map_err(|e| format!("cannot parse datum.expr '{expr}': {e}"))
}

fn eval_expression(tree: &Node<DefaultNumericTypes>, x: &[f64]) -> Result<f64, String> {
    let mut ctx = HashMapContext::<DefaultNumericTypes>::new();
    let vars = [("x", x[0]), ("y", x.get(1).copied().unwrap_or(0.0)), ("pi", PI)];
    for (name, v) in vars {
        ctx.set_value(name.into(), Value::Float(v)).map_err(|e| e.to_string())?;
    }
    let v = tree.eval_number_with_context(&ctx).map_err(|e| format!("datum.expr at {x:?}: {e}"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("datum.expr is not finite at {x:?}"))
    }
}

/// The profiles `(U*, U_ℓ, t0)` of a glued datum.
pub fn glued_profiles(
    nl: &NlSpec,
    ell: f64,
    peak: f64,
    center: &[f64],
) -> Result<(ZkbProfile, ZkbProfile, f64), HarnessError> {
    let (m1, m2) = nl.exponents();
    let star = ZkbProfile::new(m2, 1.0, center)?;
    let small = ZkbProfile::new(m1, ell, center)?;
    let t0 = small.time_of_peak(peak);
    Ok((star, small, t0))
}

/// Builds the datum on `mesh`. `seed` only matters for random data.
pub fn build(spec: &DatumSpec, mesh: Arc<BoxMesh>, nl: &NlSpec, seed: u64) -> Result<Field, HarnessError> {
    let field = match spec {
        DatumSpec::Constant { value } => Field::constant(mesh, *value),
        DatumSpec::CosinePerturbation { mean, amplitude, mode } => {
            let ax = mesh.axis(0).clone();
            let k = *mode as f64 * PI / ax.length;
            project_function(mesh, |x| mean + amplitude * (k * (x[0] - ax.origin)).cos())?
        }
        DatumSpec::DeltaLike { center, width, mass, shape } => delta_like(mesh, center, *width, *mass, *shape)?,
        DatumSpec::Zkb { m, mass, center, t } => ZkbProfile::new(*m, *mass, center)?.project(mesh, *t)?,
        DatumSpec::Glued { tau, ell, peak, center } => {
            let (star, small, t0) = glued_profiles(nl, *ell, *peak, center)?;
            glued_datum(mesh, &star, &small, *tau, t0)?
        }
        DatumSpec::OddBump { center, offset, width, mass, shape } => {
            let mut right = center.clone();
            let mut left = center.clone();
            right[0] += offset;
            left[0] -= offset;
            let pos = delta_like(mesh.clone(), &right, *width, *mass, *shape)?;
            let neg = delta_like(mesh.clone(), &left, *width, -*mass, *shape)?;
            let values = pos.values().iter().zip(neg.values()).map(|(a, b)| a + b).collect();
            Field::new(mesh, values, 0.0).map_err(|e| HarnessError::Datum(e.to_string()))?
        }
        DatumSpec::CustomExpression { expr } => {
            let tree = compile_expression(expr).map_err(HarnessError::Datum)?;
            let values = (0..mesh.cell_count())
                .map(|c| eval_expression(&tree, &mesh.center(c)[..mesh.dim()]))
                .collect::<Result<Vec<f64>, String>>()
                .map_err(HarnessError::Datum)?;
            Field::new(mesh, values, 0.0).map_err(|e| HarnessError::Datum(e.to_string()))?
        }
        DatumSpec::Random { amplitude } => {
            let mut rng = SplitMix64::new(seed);
            let values = (0..mesh.cell_count()).map(|_| rng.uniform(-amplitude, *amplitude)).collect();
            Field::new(mesh, values, 0.0).map_err(|e| HarnessError::Datum(e.to_string()))?
        }
    };
    Ok(field)
}
