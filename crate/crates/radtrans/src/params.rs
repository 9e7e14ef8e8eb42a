//! Shared solver tolerances and per-step diagnostics.

/// Tolerances and iteration limits threaded through every step function.
#[derive(Debug, Clone, Copy)]
pub struct SolverParams {
    /// Quartic/implicit Newton tolerance (relative to max(1, |gamma|) for the
    /// scalar quartic, absolute on the residual for coupled systems).
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Convergence threshold for the lagged-opacity fixed point iteration.
    pub fixedpoint_tol: f64,
    pub fixedpoint_max_iter: usize,
    /// Below this opacity the correction treats a cell as free-streaming.
    pub sigma_floor: f64,
    /// A step is flagged unstable when max T exceeds this bound; drivers set
    /// it to 1e3 times the initial temperature scale.
    pub blowup_temperature: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            newton_tol: 1e-12,
            newton_max_iter: 50,
            fixedpoint_tol: 1e-10,
            fixedpoint_max_iter: 200,
            sigma_floor: 1e-14,
            blowup_temperature: f64::INFINITY,
        }
    }
}

/// What a single step reports back to the driver.
#[derive(Debug, Clone, Copy)]
pub struct StepDiagnostics {
    pub newton_iterations_max: usize,
    /// Largest interior energy-balance residual for the transport scheme;
    /// largest nonlinear solve defect for the diffusion solvers.
    pub energy_residual_max: f64,
    pub min_temperature: f64,
    pub max_temperature: f64,
    /// Cells where a negative quartic right side clamped T to zero.
    pub clamped_cells: usize,
    /// False on non-finite fields or max T above the configured bound.
    pub stable: bool,
}

impl StepDiagnostics {
    pub fn from_temperatures(t: &[f64], params: &SolverParams) -> Self {
        let mut min_t = f64::INFINITY;
        let mut max_t = f64::NEG_INFINITY;
        let mut finite = true;
        for &v in t {
            finite &= v.is_finite();
            min_t = min_t.min(v);
            max_t = max_t.max(v);
        }
        Self {
            newton_iterations_max: 0,
            energy_residual_max: 0.0,
            min_temperature: min_t,
            max_temperature: max_t,
            clamped_cells: 0,
            stable: finite && max_t <= params.blowup_temperature,
        }
    }
}
