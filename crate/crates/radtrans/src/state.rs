//! Physical constants, boundary data, initial data and solver states.

use crate::error::{Error, Result};
use crate::grid::{AngularQuadrature, Grid1D};

/// T^4 via two squarings; used everywhere so that the projection identity
/// U = T^4 is reproducible bit for bit.
#[inline]
pub fn pow4(t: f64) -> f64 {
    let s = t * t;
    s * s
}

/// T^3.
#[inline]
pub fn pow3(t: f64) -> f64 {
    t * t * t
}

/// Fourth root; exact inverse of `pow4` up to rounding for t >= 0.
#[inline]
pub fn quartic_root(u: f64) -> f64 {
    u.max(0.0).sqrt().sqrt()
}

/// Physical constants plus the two scheme parameters.
#[derive(Debug, Clone, Copy)]
pub struct PhysicalConstants {
    /// Radiation constant a.
    pub a: f64,
    /// Light speed c.
    pub c: f64,
    /// Heat capacity C_v.
    pub cv: f64,
    /// Scaled mean free path epsilon.
    pub epsilon: f64,
    /// Diffusion denominator; 3 in one dimension.
    pub dd: f64,
}

impl PhysicalConstants {
    pub fn new(a: f64, c: f64, cv: f64, epsilon: f64) -> Result<Self> {
        let k = Self { a, c, cv, epsilon, dd: 3.0 };
        k.validate()?;
        Ok(k)
    }

    /// a = c = C_v = 1 with the given epsilon.
    pub fn unit(epsilon: f64) -> Self {
        Self { a: 1.0, c: 1.0, cv: 1.0, epsilon, dd: 3.0 }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("a", self.a),
            ("c", self.c),
            ("cv", self.cv),
            ("epsilon", self.epsilon),
            ("dd", self.dd),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidArgument(format!("constant {name} = {v} must be > 0")));
            }
        }
        Ok(())
    }

    /// a*c, the factor in the Planckian a c T^4.
    #[inline]
    pub fn ac(&self) -> f64 {
        self.a * self.c
    }
}

/// Boundary condition for the diffusion-limit solvers, one per domain end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DiffusionBc {
    /// Pins the ghost-cell temperature.
    Dirichlet(f64),
    /// Zero boundary face flux.
    ZeroFlux,
}

/// Incoming intensities for transport solvers plus the diffusion-limit
/// counterpart for each end.
#[derive(Debug, Clone)]
pub struct BoundaryCondition {
    /// b_L(v_k) for v_k > 0.
    pub incoming_left: Vec<f64>,
    /// b_R(-v_k) for v_k > 0.
    pub incoming_right: Vec<f64>,
    pub diffusion_left: DiffusionBc,
    pub diffusion_right: DiffusionBc,
}

impl BoundaryCondition {
    /// Zero incoming intensity, zero-flux diffusion ends.
    pub fn vacuum(nv: usize) -> Self {
        Self {
            incoming_left: vec![0.0; nv],
            incoming_right: vec![0.0; nv],
            diffusion_left: DiffusionBc::ZeroFlux,
            diffusion_right: DiffusionBc::ZeroFlux,
        }
    }

    /// Isotropic Planckian incoming data a c T^4 on both ends, Dirichlet in
    /// the diffusion limit.
    pub fn planck(consts: &PhysicalConstants, t_left: f64, t_right: f64, nv: usize) -> Self {
        let ac = consts.ac();
        Self {
            incoming_left: vec![ac * pow4(t_left); nv],
            incoming_right: vec![ac * pow4(t_right); nv],
            diffusion_left: DiffusionBc::Dirichlet(t_left),
            diffusion_right: DiffusionBc::Dirichlet(t_right),
        }
    }

    pub fn validate(&self, nv: usize) -> Result<()> {
        if self.incoming_left.len() != nv || self.incoming_right.len() != nv {
            return Err(Error::InvalidArgument(format!(
                "boundary intensity arrays must have length {nv}"
            )));
        }
        for v in self.incoming_left.iter().chain(&self.incoming_right) {
            if !v.is_finite() || *v < 0.0 {
                return Err(Error::InvalidArgument("incoming intensities must be >= 0".into()));
            }
        }
        Ok(())
    }
}

/// Initial data for both the transport and the diffusion states.
#[derive(Debug, Clone)]
pub enum InitialCondition {
    /// T = max(1 - 40 (x - 1/2)^2, 0), isotropic I = a c T^4.
    CompactParabola,
    /// T = max(sin(2 pi (x - 1/4)), 0)^{1/4}, isotropic I = a c T^4.
    SineQuarterPower,
    /// I = value for all v; T = (value / (a c))^{1/4} unless overridden.
    FlatIntensity { value: f64, temperature: Option<f64> },
    /// T = 1/2 [1 - tanh((x - center) * steepness)], isotropic I = a c T^4.
    TanhTemperature { center: f64, steepness: f64 },
    /// Prescribed cell-center temperatures, isotropic I = a c T^4.
    Custom(Vec<f64>),
}

impl InitialCondition {
    /// Cell-center temperatures.
    pub fn temperatures(&self, grid: &Grid1D, consts: &PhysicalConstants) -> Result<Vec<f64>> {
        let t = match self {
            InitialCondition::CompactParabola => (0..grid.nx)
                .map(|i| {
                    let x = grid.center(i);
                    (1.0 - 40.0 * (x - 0.5) * (x - 0.5)).max(0.0)
                })
                .collect(),
            InitialCondition::SineQuarterPower => (0..grid.nx)
                .map(|i| {
                    let x = grid.center(i);
                    let s = (2.0 * std::f64::consts::PI * (x - 0.25)).sin().max(0.0);
                    s.powf(0.25)
                })
                .collect(),
            InitialCondition::FlatIntensity { value, temperature } => {
                let t0 = match temperature {
                    Some(t0) => *t0,
                    None => quartic_root(value / consts.ac()),
                };
                vec![t0; grid.nx]
            }
            InitialCondition::TanhTemperature { center, steepness } => (0..grid.nx)
                .map(|i| {
                    let x = grid.center(i);
                    0.5 * (1.0 - ((x - center) * steepness).tanh())
                })
                .collect(),
            InitialCondition::Custom(values) => {
                if values.len() != grid.nx {
                    return Err(Error::InvalidArgument(format!(
                        "custom temperature array has {} entries for {} cells",
                        values.len(),
                        grid.nx
                    )));
                }
                values.clone()
            }
        };
        if t.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidArgument("initial temperatures must be >= 0".into()));
        }
        Ok(t)
    }

    /// Temperature at an arbitrary coordinate; `None` for tabulated data.
    pub(crate) fn temperature_at(&self, x: f64, consts: &PhysicalConstants) -> Option<f64> {
        match self {
            InitialCondition::CompactParabola => {
                Some((1.0 - 40.0 * (x - 0.5) * (x - 0.5)).max(0.0))
            }
            InitialCondition::SineQuarterPower => {
                Some((2.0 * std::f64::consts::PI * (x - 0.25)).sin().max(0.0).powf(0.25))
            }
            InitialCondition::FlatIntensity { value, temperature } => Some(match temperature {
                Some(t0) => *t0,
                None => quartic_root(value / consts.ac()),
            }),
            InitialCondition::TanhTemperature { center, steepness } => {
                Some(0.5 * (1.0 - ((x - center) * steepness).tanh()))
            }
            InitialCondition::Custom(_) => None,
        }
    }

    /// Isotropic intensity at a cell given its temperature.
    pub(crate) fn intensity(&self, consts: &PhysicalConstants, t: f64) -> f64 {
        match self {
            InitialCondition::FlatIntensity { value, .. } => *value,
            _ => consts.ac() * pow4(t),
        }
    }
}

/// Even parity at cell centers, odd parity at nodes, temperature and
/// U = T^4 at cell centers.
///
/// Parity arrays are dense row-major: row = spatial index, column = velocity.
#[derive(Debug, Clone)]
pub struct TransportState {
    pub nx: usize,
    pub nv: usize,
    /// [nx][nv] at cell centers.
    pub e: Vec<f64>,
    /// [nx+1][nv] at nodes.
    pub o: Vec<f64>,
    /// [nx] at cell centers.
    pub temperature: Vec<f64>,
    /// [nx] at cell centers; U = T^4 after every full step.
    pub u: Vec<f64>,
    pub time: f64,
}

impl TransportState {
    #[inline]
    pub fn e_at(&self, cell: usize, k: usize) -> f64 {
        self.e[cell * self.nv + k]
    }

    #[inline]
    pub fn o_at(&self, node: usize, k: usize) -> f64 {
        self.o[node * self.nv + k]
    }

    #[inline]
    pub fn e_row(&self, cell: usize) -> &[f64] {
        &self.e[cell * self.nv..(cell + 1) * self.nv]
    }

    #[inline]
    pub fn o_row(&self, node: usize) -> &[f64] {
        &self.o[node * self.nv..(node + 1) * self.nv]
    }

    /// rho = <I> = sum_k w_k E(v_k), per cell.
    pub fn density(&self, quad: &AngularQuadrature) -> Vec<f64> {
        (0..self.nx).map(|i| quad.average(self.e_row(i))).collect()
    }

    /// Largest |entry| over all fields; handy for drift measurements.
    pub fn max_abs_difference(&self, other: &TransportState) -> f64 {
        let mut d: f64 = 0.0;
        for (a, b) in self.e.iter().zip(&other.e) {
            d = d.max((a - b).abs());
        }
        for (a, b) in self.o.iter().zip(&other.o) {
            d = d.max((a - b).abs());
        }
        for (a, b) in self.temperature.iter().zip(&other.temperature) {
            d = d.max((a - b).abs());
        }
        for (a, b) in self.u.iter().zip(&other.u) {
            d = d.max((a - b).abs());
        }
        d
    }

    pub fn all_finite(&self) -> bool {
        self.e.iter().all(|v| v.is_finite())
            && self.o.iter().all(|v| v.is_finite())
            && self.temperature.iter().all(|v| v.is_finite())
            && self.u.iter().all(|v| v.is_finite())
    }

    /// Builds a state from a general intensity I(x, v) sampled through the
    /// parity relations E = (I(v) + I(-v))/2 at centers and
    /// O = (I(v) - I(-v))/(2 eps) at nodes.
    pub fn from_intensity<F>(
        grid: &Grid1D,
        quad: &AngularQuadrature,
        consts: &PhysicalConstants,
        temperature: Vec<f64>,
        intensity: F,
    ) -> Result<Self>
    where
        F: Fn(f64, f64) -> f64,
    {
        if temperature.len() != grid.nx {
            return Err(Error::InvalidArgument("temperature length must match grid".into()));
        }
        if temperature.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidArgument("temperatures must be >= 0".into()));
        }
        let nv = quad.len();
        let mut e = vec![0.0; grid.nx * nv];
        let mut o = vec![0.0; (grid.nx + 1) * nv];
        for i in 0..grid.nx {
            let x = grid.center(i);
            for (k, &v) in quad.nodes.iter().enumerate() {
                e[i * nv + k] = 0.5 * (intensity(x, v) + intensity(x, -v));
            }
        }
        for i in 0..=grid.nx {
            let x = grid.node(i);
            for (k, &v) in quad.nodes.iter().enumerate() {
                o[i * nv + k] = (intensity(x, v) - intensity(x, -v)) / (2.0 * consts.epsilon);
            }
        }
        let u = temperature.iter().map(|&t| pow4(t)).collect();
        Ok(Self { nx: grid.nx, nv, e, o, temperature, u, time: 0.0 })
    }
}

/// Temperature and U = T^4 at cell centers for the diffusion-limit solvers.
#[derive(Debug, Clone)]
pub struct DiffusionState {
    pub temperature: Vec<f64>,
    pub u: Vec<f64>,
    pub time: f64,
}

impl DiffusionState {
    pub fn from_temperatures(temperature: Vec<f64>) -> Result<Self> {
        if temperature.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidArgument("temperatures must be >= 0".into()));
        }
        let u = temperature.iter().map(|&t| pow4(t)).collect();
        Ok(Self { temperature, u, time: 0.0 })
    }

    pub fn all_finite(&self) -> bool {
        self.temperature.iter().all(|v| v.is_finite()) && self.u.iter().all(|v| v.is_finite())
    }
}

/// Transport state from an initial-condition spec; the intensity is
/// isotropic for every built-in variant, so the odd parity starts at zero.
pub fn init_transport_state(
    ic: &InitialCondition,
    grid: &Grid1D,
    quad: &AngularQuadrature,
    consts: &PhysicalConstants,
) -> Result<TransportState> {
    let temperature = ic.temperatures(grid, consts)?;
    let nv = quad.len();
    let mut e = vec![0.0; grid.nx * nv];
    for i in 0..grid.nx {
        let intensity = ic.intensity(consts, temperature[i]);
        for k in 0..nv {
            e[i * nv + k] = intensity;
        }
    }
    let o = vec![0.0; (grid.nx + 1) * nv];
    let u = temperature.iter().map(|&t| pow4(t)).collect();
    Ok(TransportState { nx: grid.nx, nv, e, o, temperature, u, time: 0.0 })
}

/// Diffusion state from the same initial-condition spec.
pub fn init_diffusion_state(
    ic: &InitialCondition,
    grid: &Grid1D,
    consts: &PhysicalConstants,
) -> Result<DiffusionState> {
    DiffusionState::from_temperatures(ic.temperatures(grid, consts)?)
}
