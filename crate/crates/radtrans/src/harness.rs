//! Time-integration driver plus the experiment harnesses: self-convergence
//! studies, stability sweeps and run comparison.

use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::config::{SimulationConfig, SolverKind};
use crate::diffusion::{
    diffusion2stage_step, diffusion3_nlopacity_step, diffusion3_step, implicit_diffusion_step,
    implicit_diffusion_t7_step,
};
use crate::error::{Error, Result};
use crate::grid::{build_quadrature, AngularQuadrature, Grid1D};
use crate::params::{SolverParams, StepDiagnostics};
use crate::reference::{
    explicit_transport_step, init_angular_state, iterative_implicit_step, AngularIntensityState,
};
use crate::state::{init_diffusion_state, init_transport_state, pow4, DiffusionState, TransportState};
use crate::transport::{ap_step, ap_step_nlopacity};

pub use crate::state::BoundaryCondition;

/// Snapshot of the cell-centered fields at one output time.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub time: f64,
    pub temperature: Vec<f64>,
    pub u: Vec<f64>,
    pub rho: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct DiagnosticsRow {
    pub step: usize,
    pub time: f64,
    pub diag: StepDiagnostics,
}

/// Everything a finished run reports.
#[derive(Debug, Clone)]
pub struct RunResult {
    /// Cell-center coordinates.
    pub x: Vec<f64>,
    pub temperature: Vec<f64>,
    pub u: Vec<f64>,
    /// <I> for transport runs; ac U for diffusion-limit runs.
    pub rho: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    pub diagnostics: Vec<DiagnosticsRow>,
    pub wall: Duration,
    /// True when every step kept the stability flag.
    pub stable: bool,
    pub config_echo: serde_json::Value,
}

/// Cell-centered fields extracted from a run or read back from disk.
#[derive(Debug, Clone)]
pub struct FieldData {
    pub x: Vec<f64>,
    pub temperature: Vec<f64>,
    pub u: Vec<f64>,
    pub rho: Vec<f64>,
}

impl RunResult {
    pub fn fields(&self) -> FieldData {
        FieldData {
            x: self.x.clone(),
            temperature: self.temperature.clone(),
            u: self.u.clone(),
            rho: self.rho.clone(),
        }
    }
}

enum RunnerState {
    Transport(TransportState),
    Angular(AngularIntensityState),
    Diffusion(DiffusionState),
}

impl RunnerState {
    fn fields(&self, quad: &AngularQuadrature, ac: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        match self {
            RunnerState::Transport(s) => {
                (s.temperature.clone(), s.u.clone(), s.density(quad))
            }
            RunnerState::Angular(s) => {
                let u: Vec<f64> = s.temperature.iter().map(|&t| pow4(t)).collect();
                (s.temperature.clone(), u, s.density_at_centers(quad))
            }
            RunnerState::Diffusion(s) => {
                let rho = s.u.iter().map(|&u| ac * u).collect();
                (s.temperature.clone(), s.u.clone(), rho)
            }
        }
    }

    fn temperatures(&self) -> &[f64] {
        match self {
            RunnerState::Transport(s) => &s.temperature,
            RunnerState::Angular(s) => &s.temperature,
            RunnerState::Diffusion(s) => &s.temperature,
        }
    }
}

/// Fixed-step drive to t_max with dt = cfl * dx; the final step (and any
/// step crossing a snapshot time) is shortened to land exactly.
pub fn run_simulation(config: &SimulationConfig) -> Result<RunResult> {
    let start = Instant::now();
    let grid = Grid1D::new(config.x_min, config.x_max, config.nx)?;
    let quad = build_quadrature(config.nv)?;
    let consts = config.constants;
    let bc = config.boundary_condition();
    bc.validate(config.nv)?;
    config.opacity.validate(config.nx)?;

    let mut state = match config.solver {
        SolverKind::ExplicitTransport => {
            RunnerState::Angular(init_angular_state(&config.ic, &grid, &quad, &consts)?)
        }
        s if s.is_transport() => {
            RunnerState::Transport(init_transport_state(&config.ic, &grid, &quad, &consts)?)
        }
        _ => RunnerState::Diffusion(init_diffusion_state(&config.ic, &grid, &consts)?),
    };

    let mut params = config.solver_params();
    let t_scale = state
        .temperatures()
        .iter()
        .fold(0.0_f64, |m, &t| m.max(t))
        .max(config.boundary_temperature_scale());
    params.blowup_temperature = if t_scale > 0.0 { 1e3 * t_scale } else { f64::INFINITY };

    let dt_nominal = config.cfl * grid.dx;
    let mut events: Vec<f64> = config.snapshots.clone();
    events.push(config.t_max);

    let mut snapshots = Vec::new();
    let mut diagnostics = Vec::new();
    let mut stable = true;
    let mut t = 0.0_f64;
    let mut step_index = 0usize;

    'events: for &event in &events {
        while t < event - 1e-12 * dt_nominal {
            let dt = dt_nominal.min(event - t);
            step_index += 1;
            let diag = advance(&mut state, dt, &grid, &quad, config, &bc, &params)
                .map_err(|e| wrap_step_error(e, step_index, t))?;
            t += dt;
            if (t - event).abs() < 1e-9 * dt_nominal {
                t = event;
            }
            diagnostics.push(DiagnosticsRow { step: step_index, time: t, diag });
            if !diag.stable {
                stable = false;
                break 'events;
            }
        }
        if config.snapshots.contains(&event) {
            let (temperature, u, rho) = state.fields(&quad, consts.ac());
            snapshots.push(Snapshot { time: event, temperature, u, rho });
        }
    }

    let (temperature, u, rho) = state.fields(&quad, consts.ac());
    Ok(RunResult {
        x: grid.centers(),
        temperature,
        u,
        rho,
        snapshots,
        diagnostics,
        wall: start.elapsed(),
        stable,
        config_echo: config.echo.clone(),
    })
}

fn wrap_step_error(e: Error, step: usize, time: f64) -> Error {
    match e {
        Error::NonFinite(_) => Error::Instability { step, time },
        Error::Nonconvergence { what, iterations, residual } => Error::Nonconvergence {
            what: format!("{what} (step {step}, t = {time:.6})"),
            iterations,
            residual,
        },
        other => other,
    }
}

fn advance(
    state: &mut RunnerState,
    dt: f64,
    grid: &Grid1D,
    quad: &AngularQuadrature,
    config: &SimulationConfig,
    bc: &BoundaryCondition,
    params: &SolverParams,
) -> Result<StepDiagnostics> {
    let consts = &config.constants;
    let opacity = &config.opacity;
    match (config.solver, &mut *state) {
        (SolverKind::Ap, RunnerState::Transport(s)) => {
            let (next, diag) = ap_step(s, dt, grid, quad, consts, opacity, bc, params)?;
            *s = next;
            Ok(diag)
        }
        (SolverKind::ApNlopacity, RunnerState::Transport(s)) => {
            let (next, diag) = ap_step_nlopacity(s, dt, grid, quad, consts, opacity, bc, params)?;
            *s = next;
            Ok(diag)
        }
        (SolverKind::IterativeImplicit, RunnerState::Transport(s)) => {
            let (next, increments) = iterative_implicit_step(
                s,
                dt,
                grid,
                quad,
                consts,
                opacity,
                bc,
                params.fixedpoint_tol,
                params.fixedpoint_max_iter,
            )?;
            *s = next;
            let mut diag = StepDiagnostics::from_temperatures(&s.temperature, params);
            diag.newton_iterations_max = increments.len();
            diag.stable = diag.stable && s.all_finite();
            Ok(diag)
        }
        (SolverKind::ExplicitTransport, RunnerState::Angular(s)) => {
            let next = explicit_transport_step(s, dt, grid, quad, consts, opacity, bc)?;
            *s = next;
            let mut diag = StepDiagnostics::from_temperatures(&s.temperature, params);
            diag.stable = diag.stable && s.all_finite();
            Ok(diag)
        }
        (SolverKind::Diffusion3, RunnerState::Diffusion(s)) => {
            let (next, diag) = diffusion3_step(s, dt, grid, consts, opacity, bc, params)?;
            *s = next;
            Ok(diag)
        }
        (SolverKind::Diffusion3Nlopacity, RunnerState::Diffusion(s)) => {
            let (next, diag) =
                diffusion3_nlopacity_step(s, dt, grid, consts, opacity, bc, params)?;
            *s = next;
            Ok(diag)
        }
        (SolverKind::Diffusion2stage, RunnerState::Diffusion(s)) => {
            let next = diffusion2stage_step(s, dt, grid, consts, opacity, bc)?;
            *s = next;
            Ok(StepDiagnostics::from_temperatures(&s.temperature, params))
        }
        (SolverKind::ImplicitDiffusion, RunnerState::Diffusion(s)) => {
            let next = implicit_diffusion_step(s, dt, grid, consts, opacity, bc, params)?;
            *s = next;
            Ok(StepDiagnostics::from_temperatures(&s.temperature, params))
        }
        (SolverKind::ImplicitDiffusionT7, RunnerState::Diffusion(s)) => {
            let next = implicit_diffusion_t7_step(s, dt, grid, consts, opacity, bc, params)?;
            *s = next;
            Ok(StepDiagnostics::from_temperatures(&s.temperature, params))
        }
        _ => Err(Error::InvalidArgument("solver/state mismatch".into())),
    }
}

/// One row of a self-convergence table: the l1 distance between the run at
/// `dx` and the run at `dx/2` restricted onto the coarse grid.
#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub dx: f64,
    pub error_rho: f64,
    pub error_t: f64,
}

#[derive(Debug, Clone)]
pub struct EpsilonConvergence {
    pub epsilon: f64,
    pub rows: Vec<ConvergenceRow>,
    pub order_rho: f64,
    pub order_t: f64,
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub per_epsilon: Vec<EpsilonConvergence>,
}

/// Averages each pair of fine cells onto the parent coarse cell.
pub fn restrict_pairwise(fine: &[f64]) -> Vec<f64> {
    assert!(fine.len() % 2 == 0, "restriction needs an even cell count");
    fine.chunks_exact(2).map(|p| 0.5 * (p[0] + p[1])).collect()
}

fn l1_weighted(a: &[f64], b: &[f64], dx: f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() * dx
}

/// Least-squares order fit of log error against log dx; drops the coarsest
/// point when its refinement ratio strays more than 50% from the median
/// ratio (pre-asymptotic pollution).
pub fn fit_order(points: &[(f64, f64)]) -> f64 {
    assert!(points.len() >= 2, "order fit needs at least two points");
    let mut pts: Vec<(f64, f64)> = points.to_vec();
    if pts.len() >= 3 {
        let mut ratios: Vec<f64> =
            pts.windows(2).map(|w| w[0].1 / w[1].1.max(1e-300)).collect();
        let first = ratios[0];
        ratios.sort_by(|a, b| a.partial_cmp(b).expect("finite ratios"));
        let median = ratios[ratios.len() / 2];
        if (first / median - 1.0).abs() > 0.5 {
            pts.remove(0);
        }
    }
    let logs: Vec<(f64, f64)> =
        pts.iter().map(|&(dx, e)| (dx.ln(), e.max(1e-300).ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// Runs the dx sweep for each epsilon and fits first-order slopes from the
/// pairwise-restriction errors.
pub fn convergence_study(
    base: &SimulationConfig,
    dx_list: &[f64],
    epsilons: &[f64],
) -> Result<ConvergenceReport> {
    if dx_list.len() < 2 {
        return Err(Error::InvalidArgument("convergence study needs at least two dx".into()));
    }
    for w in dx_list.windows(2) {
        if (w[0] / w[1] - 2.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "dx list must halve at each entry; got {} then {}",
                w[0], w[1]
            )));
        }
    }
    let length = base.x_max - base.x_min;
    let mut jobs = Vec::new();
    for (ei, &eps) in epsilons.iter().enumerate() {
        for (di, &dx) in dx_list.iter().enumerate() {
            let nx_f = length / dx;
            let nx = nx_f.round() as usize;
            if nx == 0 || (nx_f - nx as f64).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "dx = {dx} does not evenly divide the domain length {length}"
                )));
            }
            let mut cfg = base.clone();
            cfg.nx = nx;
            cfg.constants.epsilon = eps;
            jobs.push((ei, di, cfg));
        }
    }
    let mut runs: Vec<(usize, usize, FieldData)> = jobs
        .into_par_iter()
        .map(|(ei, di, cfg)| run_simulation(&cfg).map(|r| (ei, di, r.fields())))
        .collect::<Result<Vec<_>>>()?;
    runs.sort_by_key(|(ei, di, _)| (*ei, *di));

    let nd = dx_list.len();
    let per_epsilon = epsilons
        .iter()
        .enumerate()
        .map(|(ei, &eps)| {
            let fields: Vec<&FieldData> =
                runs[ei * nd..(ei + 1) * nd].iter().map(|(_, _, f)| f).collect();
            let mut rows = Vec::new();
            for di in 0..nd - 1 {
                let coarse = fields[di];
                let fine = fields[di + 1];
                let dx = dx_list[di];
                rows.push(ConvergenceRow {
                    dx,
                    error_rho: l1_weighted(&coarse.rho, &restrict_pairwise(&fine.rho), dx),
                    error_t: l1_weighted(
                        &coarse.temperature,
                        &restrict_pairwise(&fine.temperature),
                        dx,
                    ),
                });
            }
            let order_rho = fit_order(&rows.iter().map(|r| (r.dx, r.error_rho)).collect::<Vec<_>>());
            let order_t = fit_order(&rows.iter().map(|r| (r.dx, r.error_t)).collect::<Vec<_>>());
            EpsilonConvergence { epsilon: eps, rows, order_rho, order_t }
        })
        .collect();
    Ok(ConvergenceReport { per_epsilon })
}

/// Largest stable CFL constant per (epsilon, dx) cell.
#[derive(Debug, Clone)]
pub struct StabilityCell {
    pub epsilon: f64,
    pub dx: f64,
    /// None when even the smallest candidate went unstable.
    pub largest_stable_c: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct StabilityReport {
    pub cells: Vec<StabilityCell>,
    pub criterion: String,
}

/// The documented instability detector, stated here and echoed in meta.json.
pub const STABILITY_CRITERION: &str = "a run is unstable when any field becomes non-finite or \
     max T exceeds 1e3 x the larger of the initial and boundary temperature scales";

/// For each (epsilon, dx) runs the candidates from the largest down and
/// records the first stable one; instability (including solver blowup
/// errors) is data, not an error.
pub fn stability_sweep(
    base: &SimulationConfig,
    epsilons: &[f64],
    dx_list: &[f64],
    c_candidates: &[f64],
) -> Result<StabilityReport> {
    let mut sorted_c = c_candidates.to_vec();
    sorted_c.sort_by(|a, b| a.partial_cmp(b).expect("finite candidates"));
    if sorted_c.is_empty() || sorted_c[0] <= 0.0 {
        return Err(Error::InvalidArgument("need positive CFL candidates".into()));
    }
    let length = base.x_max - base.x_min;
    let mut jobs = Vec::new();
    for (ei, &eps) in epsilons.iter().enumerate() {
        for (di, &dx) in dx_list.iter().enumerate() {
            let nx = (length / dx).round() as usize;
            if nx == 0 {
                return Err(Error::InvalidArgument(format!("dx = {dx} too large")));
            }
            jobs.push((ei, di, eps, dx, nx));
        }
    }
    let mut cells: Vec<(usize, usize, StabilityCell)> = jobs
        .into_par_iter()
        .map(|(ei, di, eps, dx, nx)| {
            let mut largest = None;
            for &c in sorted_c.iter().rev() {
                let mut cfg = base.clone();
                cfg.nx = nx;
                cfg.constants.epsilon = eps;
                cfg.cfl = c;
                let stable = match run_simulation(&cfg) {
                    Ok(res) => res.stable,
                    Err(_) => false,
                };
                if stable {
                    largest = Some(c);
                    break;
                }
            }
            (ei, di, StabilityCell { epsilon: eps, dx, largest_stable_c: largest })
        })
        .collect();
    cells.sort_by_key(|(ei, di, _)| (*ei, *di));
    Ok(StabilityReport {
        cells: cells.into_iter().map(|(_, _, c)| c).collect(),
        criterion: STABILITY_CRITERION.into(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompareField {
    Temperature,
    U,
    Rho,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompareNorm {
    L1,
    LInf,
}

fn field_of<'a>(d: &'a FieldData, f: CompareField) -> &'a [f64] {
    match f {
        CompareField::Temperature => &d.temperature,
        CompareField::U => &d.u,
        CompareField::Rho => &d.rho,
    }
}

/// dx-weighted l1 or sup distance between two runs on equal or 2-nested
/// grids over the same domain; the finer run is restricted.
pub fn compare_fields(
    a: &FieldData,
    b: &FieldData,
    field: CompareField,
    norm: CompareNorm,
) -> Result<f64> {
    let (coarse, fine) = if a.x.len() <= b.x.len() { (a, b) } else { (b, a) };
    let (nc, nf) = (coarse.x.len(), fine.x.len());
    if nc == 0 || (nf != nc && nf != 2 * nc) {
        return Err(Error::InvalidArgument(format!(
            "incompatible grids: {nc} and {nf} cells"
        )));
    }
    let dxc = if nc > 1 { coarse.x[1] - coarse.x[0] } else { 1.0 };
    let dxf = if nf > 1 { fine.x[1] - fine.x[0] } else { 1.0 };
    let same_domain = ((coarse.x[0] - dxc * 0.5) - (fine.x[0] - dxf * 0.5)).abs() < 1e-9
        && ((coarse.x[nc - 1] + dxc * 0.5) - (fine.x[nf - 1] + dxf * 0.5)).abs() < 1e-9;
    if !same_domain {
        return Err(Error::InvalidArgument("runs cover different domains".into()));
    }
    let cv = field_of(coarse, field);
    let fv = field_of(fine, field);
    let fv = if nf == nc { fv.to_vec() } else { restrict_pairwise(fv) };
    Ok(match norm {
        CompareNorm::L1 => l1_weighted(cv, &fv, dxc),
        CompareNorm::LInf => cv.iter().zip(&fv).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs())),
    })
}

pub fn compare_runs(
    a: &RunResult,
    b: &RunResult,
    field: CompareField,
    norm: CompareNorm,
) -> Result<f64> {
    compare_fields(&a.fields(), &b.fields(), field, norm)
}
