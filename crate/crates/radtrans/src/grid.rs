//! Staggered 1D mesh and angular quadrature.
//!
//! Cell centers x_{i+1/2} carry the even parity, temperature and its fourth
//! power; nodes x_i carry the odd parity. Velocities live on (0,1) with a
//! midpoint quadrature so that the discrete bracket average of a constant is
//! exactly that constant.

use crate::error::{Error, Result};

/// Uniform staggered mesh on [x_min, x_max] with `nx` cells.
#[derive(Debug, Clone)]
pub struct Grid1D {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub dx: f64,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, nx: usize) -> Result<Self> {
        if nx == 0 {
            return Err(Error::InvalidArgument("grid needs at least one cell".into()));
        }
        if !(x_max > x_min) {
            return Err(Error::InvalidArgument(format!(
                "empty domain: x_min = {x_min}, x_max = {x_max}"
            )));
        }
        let dx = (x_max - x_min) / nx as f64;
        Ok(Self { x_min, x_max, nx, dx })
    }

    /// Unit domain [0, 1].
    pub fn unit(nx: usize) -> Result<Self> {
        Self::new(0.0, 1.0, nx)
    }

    /// Node coordinate x_i, i = 0..=nx.
    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    /// Cell center coordinate x_{i+1/2}, i = 0..nx.
    #[inline]
    pub fn center(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.dx
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.center(i)).collect()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.nx).map(|i| self.node(i)).collect()
    }
}

/// Velocity nodes and weights on (0, 1); the bracket average of an even
/// integrand is `sum_k w_k f(v_k)`.
#[derive(Debug, Clone)]
pub struct AngularQuadrature {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl AngularQuadrature {
    #[inline]
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Discrete average of an even-in-v integrand sampled on the nodes.
    #[inline]
    pub fn average(&self, values: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(values)
            .map(|(w, f)| w * f)
            .sum()
    }
}

/// Midpoint rule on (0, 1): v_k = (k - 1/2)/nv, w_k = 1/nv.
pub fn build_quadrature(nv: usize) -> Result<AngularQuadrature> {
    if nv == 0 {
        return Err(Error::InvalidArgument(
            "quadrature needs at least one velocity node".into(),
        ));
    }
    let w = 1.0 / nv as f64;
    let nodes = (0..nv).map(|k| (k as f64 + 0.5) * w).collect();
    let weights = vec![w; nv];
    Ok(AngularQuadrature { nodes, weights })
}
