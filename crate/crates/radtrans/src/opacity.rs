//! Opacity models.
//!
//! The temperature-dependent model sigma/T^3 never evaluates the division:
//! it exposes only the T-independent factor, and the transport/diffusion
//! solvers multiply by K = T^3 on the other side of their equations.

use crate::error::{Error, Result};
use crate::grid::Grid1D;

/// Closed set of opacity profiles used by the solvers.
#[derive(Debug, Clone, PartialEq)]
pub enum OpacityModel {
    /// sigma(x) = value.
    Constant(f64),
    /// Two low-opacity stripes on [0.2, 0.35] and [0.65, 0.8], value 1 elsewhere.
    Striped(f64),
    /// sigma(x) = 10 (x - 1)^4 + 1e-3.
    VanishingPoly,
    /// sigma(x, T) = base(x) / T^3; only `base` is ever evaluated.
    TemperatureDependent(Box<OpacityModel>),
    /// One value per cell center.
    TabulatedByCell(Vec<f64>),
}

impl OpacityModel {
    /// True for the sigma/T^3 family.
    pub fn is_temperature_dependent(&self) -> bool {
        matches!(self, OpacityModel::TemperatureDependent(_))
    }

    /// The T-independent factor: the nested base model for sigma/T^3,
    /// otherwise the model itself.
    pub fn base(&self) -> &OpacityModel {
        match self {
            OpacityModel::TemperatureDependent(b) => b,
            other => other,
        }
    }

    pub fn validate(&self, nx: usize) -> Result<()> {
        match self {
            OpacityModel::Constant(v) | OpacityModel::Striped(v) => {
                if !v.is_finite() || *v < 0.0 {
                    return Err(Error::InvalidArgument(format!("opacity value {v} must be >= 0")));
                }
            }
            OpacityModel::VanishingPoly => {}
            OpacityModel::TemperatureDependent(base) => {
                if base.is_temperature_dependent() {
                    return Err(Error::InvalidArgument(
                        "temperature-dependent opacity cannot nest itself".into(),
                    ));
                }
                base.validate(nx)?;
            }
            OpacityModel::TabulatedByCell(values) => {
                if values.len() != nx {
                    return Err(Error::InvalidArgument(format!(
                        "tabulated opacity has {} entries for {} cells",
                        values.len(),
                        nx
                    )));
                }
                if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(Error::InvalidArgument("tabulated opacity must be >= 0".into()));
                }
            }
        }
        Ok(())
    }

    fn eval(&self, x: f64, cell: usize) -> f64 {
        match self {
            OpacityModel::Constant(v) => *v,
            OpacityModel::Striped(sigma0) => {
                if (0.2..=0.35).contains(&x) || (0.65..=0.8).contains(&x) {
                    *sigma0
                } else {
                    1.0
                }
            }
            OpacityModel::VanishingPoly => {
                let d = x - 1.0;
                10.0 * d * d * d * d + 1e-3
            }
            OpacityModel::TemperatureDependent(base) => base.eval(x, cell),
            OpacityModel::TabulatedByCell(values) => values[cell],
        }
    }
}

/// sigma at cell centers. For the sigma/T^3 family this returns the
/// T-independent factor only; the `t` argument is ignored for every variant.
pub fn opacity_at_centers(model: &OpacityModel, grid: &Grid1D, _t: &[f64]) -> Vec<f64> {
    (0..grid.nx).map(|i| model.eval(grid.center(i), i)).collect()
}

/// sigma at nodes: interior nodes average the two adjacent centers, boundary
/// nodes copy the adjacent center.
pub fn opacity_at_nodes(center_values: &[f64]) -> Vec<f64> {
    let nx = center_values.len();
    assert!(nx >= 1, "need at least one cell");
    let mut out = Vec::with_capacity(nx + 1);
    out.push(center_values[0]);
    for i in 1..nx {
        out.push(0.5 * (center_values[i - 1] + center_values[i]));
    }
    out.push(center_values[nx - 1]);
    out
}
