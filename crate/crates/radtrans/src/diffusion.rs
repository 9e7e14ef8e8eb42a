//! Solvers for the degenerate nonlinear diffusion limit
//! a d_t T^4 + C_v d_t T = d_x (ac/(3 sigma) d_x T^4).
//!
//! The three-stage scheme advances an auxiliary U ~ T^4 with a frozen
//! mobility (prediction), recovers T from decoupled per-cell quartics in
//! divergence form (correction), then reimposes U = T^4 (projection). The
//! correction in divergence form is what moves fronts; the two-stage
//! variant (prediction + projection only) is kept as the negative control
//! whose compact supports never spread.
//!
//! Prediction systems are assembled in increments relative to the current
//! state, so spatially uniform profiles are fixed points to round-off.

use crate::error::{Error, Result};
use crate::grid::Grid1D;
use crate::linalg::{newton_quartic, newton_tridiag_system, thomas_solve, Tridiagonal};
use crate::opacity::{opacity_at_centers, opacity_at_nodes, OpacityModel};
use crate::params::{SolverParams, StepDiagnostics};
use crate::state::{pow3, pow4, quartic_root, BoundaryCondition, DiffusionBc, DiffusionState, PhysicalConstants};

#[inline]
fn pow7(t: f64) -> f64 {
    let t2 = t * t;
    let t4 = t2 * t2;
    t4 * t2 * t
}

/// Ghost values for a cell-centered field under the configured BCs.
fn ghosts(values: &[f64], bc: &BoundaryCondition, dirichlet_value: impl Fn(f64) -> f64) -> (f64, f64) {
    let left = match bc.diffusion_left {
        DiffusionBc::Dirichlet(t) => dirichlet_value(t),
        DiffusionBc::ZeroFlux => values[0],
    };
    let right = match bc.diffusion_right {
        DiffusionBc::Dirichlet(t) => dirichlet_value(t),
        DiffusionBc::ZeroFlux => values[values.len() - 1],
    };
    (left, right)
}

/// Per-node face coefficients from cell-centered values plus ghost copies;
/// zero-flux ends zero out the boundary face entirely.
fn face_coefficients(
    centers: &[f64],
    ghost_left: f64,
    ghost_right: f64,
    bc: &BoundaryCondition,
) -> Vec<f64> {
    let nx = centers.len();
    let mut faces = Vec::with_capacity(nx + 1);
    faces.push(match bc.diffusion_left {
        DiffusionBc::ZeroFlux => 0.0,
        DiffusionBc::Dirichlet(_) => 0.5 * (ghost_left + centers[0]),
    });
    for i in 1..nx {
        faces.push(0.5 * (centers[i - 1] + centers[i]));
    }
    faces.push(match bc.diffusion_right {
        DiffusionBc::ZeroFlux => 0.0,
        DiffusionBc::Dirichlet(_) => 0.5 * (centers[nx - 1] + ghost_right),
    });
    faces
}

/// Discrete divergence (1/dx^2) [ c_{i+1} (U_{i+1} - U_i) - c_i (U_i - U_{i-1}) ]
/// per cell, with ghost values closing the ends.
fn divergence(u: &[f64], faces: &[f64], ghost_left: f64, ghost_right: f64, dx: f64) -> Vec<f64> {
    let nx = u.len();
    let inv = 1.0 / (dx * dx);
    (0..nx)
        .map(|i| {
            let left = if i == 0 { ghost_left } else { u[i - 1] };
            let right = if i + 1 == nx { ghost_right } else { u[i + 1] };
            inv * (faces[i + 1] * (right - u[i]) - faces[i] * (u[i] - left))
        })
        .collect()
}

/// Prediction stage shared by the three-stage solvers: solves the linear
/// backward-Euler system for the increment of U with the given mobility and
/// face coefficients, returning the predicted U.
fn predict_u(
    u_old: &[f64],
    mobility: &[f64],
    faces: &[f64],
    u_ghost_left: f64,
    u_ghost_right: f64,
    dt: f64,
    dx: f64,
) -> Result<Vec<f64>> {
    let nx = u_old.len();
    let inv = 1.0 / (dx * dx);
    let mut sys = Tridiagonal::zeros(nx);
    for i in 0..nx {
        let m = mobility[i];
        sys.diag[i] = 1.0 / dt + m * inv * (faces[i] + faces[i + 1]);
        if i > 0 {
            sys.lower[i] = -m * inv * faces[i];
        }
        if i + 1 < nx {
            sys.upper[i] = -m * inv * faces[i + 1];
        }
    }
    // Increment form: rhs is the mobility-weighted divergence of the old U;
    // Dirichlet ghosts are fixed so their increment is zero.
    let div_old = divergence(u_old, faces, u_ghost_left, u_ghost_right, dx);
    let rhs: Vec<f64> = (0..nx).map(|i| mobility[i] * div_old[i]).collect();
    let incr = thomas_solve(&sys, &rhs)?;
    Ok(u_old.iter().zip(&incr).map(|(u, d)| u + d).collect())
}

fn mobility(t_old: &[f64], consts: &PhysicalConstants) -> Vec<f64> {
    t_old
        .iter()
        .map(|&t| {
            let t3 = pow3(t);
            4.0 * t3 / (4.0 * consts.a * t3 + consts.cv)
        })
        .collect()
}

fn positive_opacity(sigma: &[f64]) -> Result<()> {
    if sigma.iter().any(|&s| s <= 0.0) {
        return Err(Error::InvalidArgument(
            "diffusion-limit solvers need strictly positive opacity".into(),
        ));
    }
    Ok(())
}

/// One step of the three-stage scheme for opacity without T dependence.
pub fn diffusion3_step(
    state: &DiffusionState,
    dt: f64,
    grid: &Grid1D,
    consts: &PhysicalConstants,
    opacity: &OpacityModel,
    bc: &BoundaryCondition,
    params: &SolverParams,
) -> Result<(DiffusionState, StepDiagnostics)> {
    let sigma_c = opacity_at_centers(opacity, grid, &state.temperature);
    positive_opacity(&sigma_c)?;
    let sigma_n = opacity_at_nodes(&sigma_c);
    let coef: Vec<f64> = sigma_n.iter().map(|&s| consts.ac() / (3.0 * s)).collect();
    let faces = face_coefficients_from_nodes(&coef, bc);

    let (ug_l, ug_r) = ghosts(&state.u, bc, pow4);
    let mob = mobility(&state.temperature, consts);
    let u_star = predict_u(&state.u, &mob, &faces, ug_l, ug_r, dt, grid.dx)?;

    let div_star = divergence(&u_star, &faces, ug_l, ug_r, grid.dx);
    correction_and_projection(state, dt, &div_star, consts, params)
}

/// Takes node-valued coefficients directly (already averaged), zeroing
/// zero-flux ends.
fn face_coefficients_from_nodes(coef_nodes: &[f64], bc: &BoundaryCondition) -> Vec<f64> {
    let mut faces = coef_nodes.to_vec();
    if bc.diffusion_left == DiffusionBc::ZeroFlux {
        faces[0] = 0.0;
    }
    if bc.diffusion_right == DiffusionBc::ZeroFlux {
        let n = faces.len();
        faces[n - 1] = 0.0;
    }
    faces
}

fn correction_and_projection(
    state: &DiffusionState,
    dt: f64,
    div_star: &[f64],
    consts: &PhysicalConstants,
    params: &SolverParams,
) -> Result<(DiffusionState, StepDiagnostics)> {
    let nx = state.temperature.len();
    let alpha = consts.a / dt;
    let beta = consts.cv / dt;
    let mut t_new = vec![0.0; nx];
    let mut newton_max = 0usize;
    let mut clamped = 0usize;
    let mut defect_max = 0.0_f64;
    for i in 0..nx {
        let t_old = state.temperature[i];
        let gamma = alpha * pow4(t_old) + beta * t_old + div_star[i];
        let root = newton_quartic(alpha, beta, gamma, t_old, params.newton_tol)?;
        t_new[i] = root.value;
        newton_max = newton_max.max(root.iterations);
        clamped += root.clamped as usize;
        defect_max = defect_max.max((alpha * pow4(root.value) + beta * root.value - gamma).abs());
    }
    let u_new: Vec<f64> = t_new.iter().map(|&t| pow4(t)).collect();
    let mut diag = StepDiagnostics::from_temperatures(&t_new, params);
    diag.newton_iterations_max = newton_max;
    diag.clamped_cells = clamped;
    diag.energy_residual_max = defect_max;
    Ok((
        DiffusionState { temperature: t_new, u: u_new, time: state.time + dt },
        diag,
    ))
}

/// Three-stage scheme for sigma/T^3 opacity: the face diffusivity carries a
/// T^3 factor, rebuilt from the intermediate projection T* = (U*)^{1/4} for
/// the correction stage.
pub fn diffusion3_nlopacity_step(
    state: &DiffusionState,
    dt: f64,
    grid: &Grid1D,
    consts: &PhysicalConstants,
    opacity: &OpacityModel,
    bc: &BoundaryCondition,
    params: &SolverParams,
) -> Result<(DiffusionState, StepDiagnostics)> {
    if !opacity.is_temperature_dependent() {
        return Err(Error::InvalidArgument(
            "diffusion3_nlopacity_step needs a temperature-dependent opacity".into(),
        ));
    }
    let sigma_c = opacity_at_centers(opacity.base(), grid, &state.temperature);
    positive_opacity(&sigma_c)?;

    let coef_of = |t: &[f64], ghost_t: (f64, f64)| -> Vec<f64> {
        let centers: Vec<f64> = t
            .iter()
            .zip(&sigma_c)
            .map(|(&ti, &s)| consts.ac() * pow3(ti) / (3.0 * s))
            .collect();
        let gl = consts.ac() * pow3(ghost_t.0) / (3.0 * sigma_c[0]);
        let gr = consts.ac() * pow3(ghost_t.1) / (3.0 * sigma_c[sigma_c.len() - 1]);
        face_coefficients(&centers, gl, gr, bc)
    };
    let (tg_l, tg_r) = ghosts(&state.temperature, bc, |t| t);
    let (ug_l, ug_r) = ghosts(&state.u, bc, pow4);

    // Prediction with the time-n coefficient.
    let faces_n = coef_of(&state.temperature, (tg_l, tg_r));
    let mob = mobility(&state.temperature, consts);
    let u_star = predict_u(&state.u, &mob, &faces_n, ug_l, ug_r, dt, grid.dx)?;

    // Intermediate projection, then the correction flux uses (T*)^3.
    let t_star: Vec<f64> = u_star.iter().map(|&u| quartic_root(u)).collect();
    let (tsg_l, tsg_r) = ghosts(&t_star, bc, |t| t);
    let faces_star = coef_of(&t_star, (tsg_l, tsg_r));
    let div_star = divergence(&u_star, &faces_star, ug_l, ug_r, grid.dx);
    correction_and_projection(state, dt, &div_star, consts, params)
}

/// Prediction plus projection only; keeps compact supports frozen and is
/// retained purely as the negative control.
pub fn diffusion2stage_step(
    state: &DiffusionState,
    dt: f64,
    grid: &Grid1D,
    consts: &PhysicalConstants,
    opacity: &OpacityModel,
    bc: &BoundaryCondition,
) -> Result<DiffusionState> {
    let sigma_c = opacity_at_centers(opacity, grid, &state.temperature);
    positive_opacity(&sigma_c)?;
    let sigma_n = opacity_at_nodes(&sigma_c);
    let coef: Vec<f64> = sigma_n.iter().map(|&s| consts.ac() / (3.0 * s)).collect();
    let faces = face_coefficients_from_nodes(&coef, bc);
    let (ug_l, ug_r) = ghosts(&state.u, bc, pow4);
    let mob = mobility(&state.temperature, consts);
    let u_new = predict_u(&state.u, &mob, &faces, ug_l, ug_r, dt, grid.dx)?;
    let t_new: Vec<f64> = u_new.iter().map(|&u| quartic_root(u)).collect();
    Ok(DiffusionState { temperature: t_new, u: u_new, time: state.time + dt })
}

#[allow(clippy::too_many_arguments)]
fn implicit_residual(
    t: &[f64],
    t_old: &[f64],
    faces: &[f64],
    ghosts: (f64, f64),
    dt: f64,
    dx: f64,
    a: f64,
    cv: f64,
) -> Vec<f64> {
    let nx = t.len();
    let u: Vec<f64> = t.iter().map(|&ti| pow4(ti)).collect();
    let div = divergence(&u, faces, ghosts.0, ghosts.1, dx);
    (0..nx)
        .map(|i| a * (u[i] - pow4(t_old[i])) / dt + cv * (t[i] - t_old[i]) / dt - div[i])
        .collect()
}

fn implicit_jacobian(t: &[f64], faces: &[f64], dt: f64, dx: f64, a: f64, cv: f64) -> Tridiagonal {
    let nx = t.len();
    let inv = 1.0 / (dx * dx);
    let mut j = Tridiagonal::zeros(nx);
    for i in 0..nx {
        let dti = 4.0 * pow3(t[i]);
        j.diag[i] = a * dti / dt + cv / dt + inv * (faces[i] + faces[i + 1]) * dti;
        if i > 0 {
            j.lower[i] = -inv * faces[i] * 4.0 * pow3(t[i - 1]);
        }
        if i + 1 < nx {
            j.upper[i] = -inv * faces[i + 1] * 4.0 * pow3(t[i + 1]);
        }
    }
    j
}

#[allow(clippy::too_many_arguments)]
fn t7_residual(
    t: &[f64],
    t_old: &[f64],
    faces: &[f64],
    ghosts7: (f64, f64),
    dt: f64,
    dx: f64,
    k: f64,
    cv_over_a: f64,
) -> Vec<f64> {
    let nx = t.len();
    let w: Vec<f64> = t.iter().map(|&ti| pow7(ti)).collect();
    let div = divergence(&w, faces, ghosts7.0, ghosts7.1, dx);
    (0..nx)
        .map(|i| {
            (pow4(t[i]) - pow4(t_old[i])) / dt + cv_over_a * (t[i] - t_old[i]) / dt - k * div[i]
        })
        .collect()
}

fn t7_jacobian(t: &[f64], faces: &[f64], dt: f64, dx: f64, k: f64, cv_over_a: f64) -> Tridiagonal {
    let nx = t.len();
    let inv = 1.0 / (dx * dx);
    let mut j = Tridiagonal::zeros(nx);
    for i in 0..nx {
        let d7 = 7.0 * pow3(t[i]) * pow3(t[i]); // d/dT T^7 = 7 T^6
        j.diag[i] = 4.0 * pow3(t[i]) / dt + cv_over_a / dt + k * inv * (faces[i] + faces[i + 1]) * d7;
        if i > 0 {
            j.lower[i] = -k * inv * faces[i] * 7.0 * pow3(t[i - 1]) * pow3(t[i - 1]);
        }
        if i + 1 < nx {
            j.upper[i] = -k * inv * faces[i + 1] * 7.0 * pow3(t[i + 1]) * pow3(t[i + 1]);
        }
    }
    j
}

/// Fully implicit reference scheme, coupled across cells through the T^4
/// fluxes and solved by damped Newton.
pub fn implicit_diffusion_step(
    state: &DiffusionState,
    dt: f64,
    grid: &Grid1D,
    consts: &PhysicalConstants,
    opacity: &OpacityModel,
    bc: &BoundaryCondition,
    params: &SolverParams,
) -> Result<DiffusionState> {
    let sigma_c = opacity_at_centers(opacity, grid, &state.temperature);
    positive_opacity(&sigma_c)?;
    let sigma_n = opacity_at_nodes(&sigma_c);
    let coef: Vec<f64> = sigma_n.iter().map(|&s| consts.ac() / (3.0 * s)).collect();
    let faces = face_coefficients_from_nodes(&coef, bc);
    let (ug_l, ug_r) = ghosts(&state.u, bc, pow4);

    let t_old = state.temperature.clone();
    let a = consts.a;
    let cv = consts.cv;
    let faces_r = faces.clone();
    let dx = grid.dx;

    let residual =
        move |t: &[f64]| implicit_residual(t, &t_old, &faces_r, (ug_l, ug_r), dt, dx, a, cv);
    let jacobian = move |t: &[f64]| implicit_jacobian(t, &faces, dt, dx, a, cv);
    let t_new = newton_tridiag_system(
        residual,
        jacobian,
        &state.temperature,
        params.newton_tol,
        params.newton_max_iter,
    )?;
    let t_new: Vec<f64> = t_new.iter().map(|&t| t.max(0.0)).collect();
    let u_new = t_new.iter().map(|&t| pow4(t)).collect();
    Ok(DiffusionState { temperature: t_new, u: u_new, time: state.time + dt })
}

/// Fully implicit scheme for the sigma/T^3 limit written with T^7 fluxes:
/// d_t T^4 + (C_v/a) d_t T = (4c/21) d_x ((1/sigma) d_x T^7), with the face
/// 1/sigma averaged reciprocally.
pub fn implicit_diffusion_t7_step(
    state: &DiffusionState,
    dt: f64,
    grid: &Grid1D,
    consts: &PhysicalConstants,
    opacity: &OpacityModel,
    bc: &BoundaryCondition,
    params: &SolverParams,
) -> Result<DiffusionState> {
    let sigma_c = opacity_at_centers(opacity.base(), grid, &state.temperature);
    positive_opacity(&sigma_c)?;
    let nx = state.temperature.len();

    // (1/sigma)_{face} = 1/2 [ (1/sigma)_i + (1/sigma)_{i+1} ], ghost copies.
    let inv_sigma: Vec<f64> = sigma_c.iter().map(|&s| 1.0 / s).collect();
    let mut faces = Vec::with_capacity(nx + 1);
    faces.push(inv_sigma[0]);
    for i in 1..nx {
        faces.push(0.5 * (inv_sigma[i - 1] + inv_sigma[i]));
    }
    faces.push(inv_sigma[nx - 1]);
    let faces = face_coefficients_from_nodes(&faces, bc);

    let (tg_l, tg_r) = ghosts(&state.temperature, bc, |t| t);
    let (g7_l, g7_r) = (pow7(tg_l), pow7(tg_r));
    let k = 4.0 * consts.c / 21.0;
    let t_old = state.temperature.clone();
    let cv_over_a = consts.cv / consts.a;
    let faces_r = faces.clone();
    let dx = grid.dx;

    let residual =
        move |t: &[f64]| t7_residual(t, &t_old, &faces_r, (g7_l, g7_r), dt, dx, k, cv_over_a);
    let jacobian = move |t: &[f64]| t7_jacobian(t, &faces, dt, dx, k, cv_over_a);
    let t_new = newton_tridiag_system(
        residual,
        jacobian,
        &state.temperature,
        params.newton_tol,
        params.newton_max_iter,
    )?;
    let t_new: Vec<f64> = t_new.iter().map(|&t| t.max(0.0)).collect();
    let u_new = t_new.iter().map(|&t| pow4(t)).collect();
    Ok(DiffusionState { temperature: t_new, u: u_new, time: state.time + dt })
}
