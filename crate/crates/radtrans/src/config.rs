//! JSON run configuration.
//!
//! Unknown keys are rejected by name; absent constants default to
//! a = c = C_v = 1 and D_d = 3, tolerances to their documented defaults.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::opacity::OpacityModel;
use crate::params::SolverParams;
use crate::state::{
    pow4, quartic_root, BoundaryCondition, DiffusionBc, InitialCondition, PhysicalConstants,
};

/// Which step function drives the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Ap,
    ApNlopacity,
    Diffusion3,
    Diffusion3Nlopacity,
    Diffusion2stage,
    ImplicitDiffusion,
    ImplicitDiffusionT7,
    ExplicitTransport,
    IterativeImplicit,
}

impl SolverKind {
    pub fn is_transport(&self) -> bool {
        matches!(
            self,
            SolverKind::Ap
                | SolverKind::ApNlopacity
                | SolverKind::ExplicitTransport
                | SolverKind::IterativeImplicit
        )
    }

    pub fn name(&self) -> &'static str {
        match self {
            SolverKind::Ap => "ap",
            SolverKind::ApNlopacity => "ap_nlopacity",
            SolverKind::Diffusion3 => "diffusion3",
            SolverKind::Diffusion3Nlopacity => "diffusion3_nlopacity",
            SolverKind::Diffusion2stage => "diffusion2stage",
            SolverKind::ImplicitDiffusion => "implicit_diffusion",
            SolverKind::ImplicitDiffusionT7 => "implicit_diffusion_t7",
            SolverKind::ExplicitTransport => "explicit_transport",
            SolverKind::IterativeImplicit => "iterative_implicit",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawConstants {
    a: Option<f64>,
    c: Option<f64>,
    cv: Option<f64>,
    dd: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum RawOpacity {
    Constant { value: f64 },
    Striped { sigma0: f64 },
    VanishingPoly,
    TemperatureDependent { base: Box<RawOpacity> },
    Tabulated { values: Vec<f64> },
}

impl RawOpacity {
    fn build(&self) -> OpacityModel {
        match self {
            RawOpacity::Constant { value } => OpacityModel::Constant(*value),
            RawOpacity::Striped { sigma0 } => OpacityModel::Striped(*sigma0),
            RawOpacity::VanishingPoly => OpacityModel::VanishingPoly,
            RawOpacity::TemperatureDependent { base } => {
                OpacityModel::TemperatureDependent(Box::new(base.build()))
            }
            RawOpacity::Tabulated { values } => OpacityModel::TabulatedByCell(values.clone()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum RawIcSpec {
    CompactParabola,
    SineQuarterPower,
    FlatIntensity { value: f64, temperature: Option<f64> },
    Tanh {
        #[serde(default = "default_tanh_center")]
        center: f64,
        #[serde(default = "default_tanh_steepness")]
        steepness: f64,
    },
    Custom { temperatures: Vec<f64> },
}

fn default_tanh_center() -> f64 {
    0.0024
}

fn default_tanh_steepness() -> f64 {
    1000.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum RawIc {
    Name(String),
    Spec(RawIcSpec),
}

impl RawIc {
    fn build(&self) -> Result<InitialCondition> {
        let spec = match self {
            RawIc::Name(name) => match name.as_str() {
                "compact_parabola" => RawIcSpec::CompactParabola,
                "sine_quarter_power" => RawIcSpec::SineQuarterPower,
                "tanh" => RawIcSpec::Tanh {
                    center: default_tanh_center(),
                    steepness: default_tanh_steepness(),
                },
                other => {
                    return Err(Error::Config(format!("unknown initial condition \"{other}\"")))
                }
            },
            RawIc::Spec(spec) => spec.clone(),
        };
        Ok(match spec {
            RawIcSpec::CompactParabola => InitialCondition::CompactParabola,
            RawIcSpec::SineQuarterPower => InitialCondition::SineQuarterPower,
            RawIcSpec::FlatIntensity { value, temperature } => {
                InitialCondition::FlatIntensity { value, temperature }
            }
            RawIcSpec::Tanh { center, steepness } => {
                InitialCondition::TanhTemperature { center, steepness }
            }
            RawIcSpec::Custom { temperatures } => InitialCondition::Custom(temperatures),
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum RawBcSpec {
    Vacuum,
    Planck { t: f64 },
    Dirichlet { t: f64 },
    Intensity { value: f64 },
    ZeroFlux,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum RawBcSide {
    Name(String),
    Spec(RawBcSpec),
}

impl RawBcSide {
    fn spec(&self) -> Result<RawBcSpec> {
        match self {
            RawBcSide::Name(name) => match name.as_str() {
                "vacuum" => Ok(RawBcSpec::Vacuum),
                "zero_flux" => Ok(RawBcSpec::ZeroFlux),
                other => Err(Error::Config(format!("unknown boundary condition \"{other}\""))),
            },
            RawBcSide::Spec(spec) => Ok(spec.clone()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBc {
    left: Option<RawBcSide>,
    right: Option<RawBcSide>,
}

impl Default for RawBc {
    fn default() -> Self {
        Self { left: None, right: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawTolerances {
    newton: Option<f64>,
    linear: Option<f64>,
    fixedpoint: Option<f64>,
    sigma_floor: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    #[serde(default)]
    snapshots: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawDomain {
    x_min: Option<f64>,
    x_max: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    solver: SolverKind,
    nx: usize,
    nv: usize,
    epsilon: f64,
    cfl: f64,
    tmax: f64,
    #[serde(default)]
    constants: RawConstants,
    opacity: RawOpacity,
    ic: RawIc,
    #[serde(default)]
    bc: RawBc,
    #[serde(default)]
    tolerances: RawTolerances,
    #[serde(default)]
    output: RawOutput,
    #[serde(default)]
    domain: RawDomain,
}

/// Tolerance block with defaults applied.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Tolerances {
    pub newton: f64,
    pub linear: f64,
    pub fixedpoint: f64,
    pub sigma_floor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { newton: 1e-12, linear: 1e-12, fixedpoint: 1e-10, sigma_floor: 1e-14 }
    }
}

/// Fully validated run description.
#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub solver: SolverKind,
    pub nx: usize,
    pub nv: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub cfl: f64,
    pub t_max: f64,
    pub constants: PhysicalConstants,
    pub opacity: OpacityModel,
    pub ic: InitialCondition,
    pub snapshots: Vec<f64>,
    pub tolerances: Tolerances,
    bc_left: RawBcSpec,
    bc_right: RawBcSpec,
    /// Original JSON document, echoed into meta.json.
    pub echo: serde_json::Value,
}

impl SimulationConfig {
    /// Incoming intensities and diffusion-end variants sampled for `nv`
    /// velocity nodes.
    pub fn boundary_condition(&self) -> BoundaryCondition {
        let side = |spec: &RawBcSpec| -> (f64, DiffusionBc) {
            match spec {
                RawBcSpec::Vacuum => (0.0, DiffusionBc::ZeroFlux),
                RawBcSpec::ZeroFlux => (0.0, DiffusionBc::ZeroFlux),
                RawBcSpec::Planck { t } | RawBcSpec::Dirichlet { t } => {
                    (self.constants.ac() * pow4(*t), DiffusionBc::Dirichlet(*t))
                }
                RawBcSpec::Intensity { value } => (
                    *value,
                    DiffusionBc::Dirichlet(quartic_root(value / self.constants.ac())),
                ),
            }
        };
        let (bl, dl) = side(&self.bc_left);
        let (br, dr) = side(&self.bc_right);
        BoundaryCondition {
            incoming_left: vec![bl; self.nv],
            incoming_right: vec![br; self.nv],
            diffusion_left: dl,
            diffusion_right: dr,
        }
    }

    pub fn solver_params(&self) -> SolverParams {
        SolverParams {
            newton_tol: self.tolerances.newton,
            newton_max_iter: 50,
            fixedpoint_tol: self.tolerances.fixedpoint,
            fixedpoint_max_iter: 200,
            sigma_floor: self.tolerances.sigma_floor,
            blowup_temperature: f64::INFINITY,
        }
    }

    /// Largest temperature scale visible in boundary data, used by the
    /// driver for the blowup bound.
    pub fn boundary_temperature_scale(&self) -> f64 {
        let of = |spec: &RawBcSpec| -> f64 {
            match spec {
                RawBcSpec::Planck { t } | RawBcSpec::Dirichlet { t } => *t,
                RawBcSpec::Intensity { value } => quartic_root(value / self.constants.ac()),
                _ => 0.0,
            }
        };
        of(&self.bc_left).max(of(&self.bc_right))
    }
}

/// Parses and validates a JSON configuration document.
pub fn parse_config(text: &str) -> Result<SimulationConfig> {
    let echo: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let raw: RawConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;

    if raw.nx == 0 {
        return Err(Error::Config("nx must be >= 1".into()));
    }
    if raw.nv == 0 {
        return Err(Error::Config("nv must be >= 1".into()));
    }
    if !(raw.cfl > 0.0) {
        return Err(Error::Config(format!("cfl = {} must be > 0", raw.cfl)));
    }
    if !(raw.tmax > 0.0) {
        return Err(Error::Config(format!("tmax = {} must be > 0", raw.tmax)));
    }
    let constants = PhysicalConstants {
        a: raw.constants.a.unwrap_or(1.0),
        c: raw.constants.c.unwrap_or(1.0),
        cv: raw.constants.cv.unwrap_or(1.0),
        epsilon: raw.epsilon,
        dd: raw.constants.dd.unwrap_or(3.0),
    };
    constants.validate().map_err(|e| Error::Config(e.to_string()))?;

    let tolerances = {
        let d = Tolerances::default();
        let t = Tolerances {
            newton: raw.tolerances.newton.unwrap_or(d.newton),
            linear: raw.tolerances.linear.unwrap_or(d.linear),
            fixedpoint: raw.tolerances.fixedpoint.unwrap_or(d.fixedpoint),
            sigma_floor: raw.tolerances.sigma_floor.unwrap_or(d.sigma_floor),
        };
        for (name, v) in [
            ("newton", t.newton),
            ("linear", t.linear),
            ("fixedpoint", t.fixedpoint),
            ("sigma_floor", t.sigma_floor),
        ] {
            if !(v > 0.0) {
                return Err(Error::Config(format!("tolerance {name} = {v} must be > 0")));
            }
        }
        t
    };

    let opacity = raw.opacity.build();
    opacity.validate(raw.nx).map_err(|e| Error::Config(e.to_string()))?;
    let needs_nl = matches!(
        raw.solver,
        SolverKind::ApNlopacity
            | SolverKind::Diffusion3Nlopacity
            | SolverKind::ImplicitDiffusionT7
            | SolverKind::IterativeImplicit
    );
    if needs_nl && !opacity.is_temperature_dependent() {
        return Err(Error::Config(format!(
            "solver {} needs opacity of type temperature_dependent",
            raw.solver.name()
        )));
    }
    if matches!(raw.solver, SolverKind::Ap) && opacity.is_temperature_dependent() {
        return Err(Error::Config(
            "solver ap cannot use temperature_dependent opacity; use ap_nlopacity".into(),
        ));
    }

    let x_min = raw.domain.x_min.unwrap_or(0.0);
    let x_max = raw.domain.x_max.unwrap_or(1.0);
    if !(x_max > x_min) {
        return Err(Error::Config(format!("domain [{x_min}, {x_max}] is empty")));
    }

    let mut snapshots = raw.output.snapshots.clone();
    snapshots.sort_by(|a, b| a.partial_cmp(b).expect("finite snapshot times"));
    if snapshots.iter().any(|&t| !(t > 0.0) || t > raw.tmax) {
        return Err(Error::Config("snapshot times must lie in (0, tmax]".into()));
    }

    Ok(SimulationConfig {
        solver: raw.solver,
        nx: raw.nx,
        nv: raw.nv,
        x_min,
        x_max,
        cfl: raw.cfl,
        t_max: raw.tmax,
        constants,
        opacity,
        ic: raw.ic.build()?,
        snapshots,
        tolerances,
        bc_left: raw.bc.left.map(|s| s.spec()).transpose()?.unwrap_or(RawBcSpec::Vacuum),
        bc_right: raw.bc.right.map(|s| s.spec()).transpose()?.unwrap_or(RawBcSpec::Vacuum),
        echo,
    })
}
