//! Initial data for flow runs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{solve_separable_profile, OperatorData};
use crate::norms::Field;

/// Shape of an initial datum. Every shape is multiplied by a scale factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Datum {
    /// Ground state normalized to unit maximum.
    Eigenfunction,
    /// Unit mass at the center node.
    PointMass,
    /// Separable profile `w`; scale `T^{1/(1−m)}` gives extinction at `T`.
    Separable,
    /// Smooth compactly supported bump of radius 1/4 around the center, unit maximum.
    Bump,
    /// Explicit nodal values.
    Values { values: Vec<f64> },
}

impl Datum {
    pub fn name(&self) -> &'static str {
        match self {
            Datum::Eigenfunction => "eigenfunction",
            Datum::PointMass => "point_mass",
            Datum::Separable => "separable",
            Datum::Bump => "bump",
            Datum::Values { .. } => "custom",
        }
    }

    pub fn build(&self, data: &OperatorData, m: f64, scale: f64) -> Result<Field> {
        if !scale.is_finite() {
            return Err(Error::InvalidArgument(format!("datum scale must be finite, got {scale}")));
        }
        let grid = data.op.grid.clone();
        let shape = match self {
            Datum::Eigenfunction => {
                let phi = data.phi1();
                phi.scaled(1.0 / phi.max_abs())
            }
            Datum::PointMass => {
                let mut v = vec![0.0; grid.len()];
                v[grid.center_index()] = 1.0 / grid.quad_weight();
                Field::new(grid, v)?
            }
            Datum::Separable => solve_separable_profile(data, m)?,
            Datum::Bump => {
                let dim = grid.dim();
                Field::from_fn(grid, move |x| {
                let r2 = x[..dim].iter().map(|c| (c - 0.5).powi(2)).sum::<f64>() * 16.0;
                if r2 < 1.0 {
                    (1.0 - 1.0 / (1.0 - r2)).exp()
                } else {
                    0.0
                }
            })?
            }
            Datum::Values { values } => Field::new(grid, values.clone())?,
        };
        Ok(shape.scaled(scale))
    }
}

/// Scale that places the extinction of the separable datum at `t_ext`.
pub fn separable_scale(t_ext: f64, m: f64) -> f64 {
    t_ext.powf(1.0 / (1.0 - m))
}
