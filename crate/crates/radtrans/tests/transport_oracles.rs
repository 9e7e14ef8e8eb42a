//! The structured prediction/correction solves against dense monolithic
//! assemblies of the same equations, plus the asymptotic consistency checks
//! against the diffusion-limit module.

mod common;

use common::{
    bisect_quartic, dense_fluctuation, dense_prediction, l1_distance, max_abs, max_abs_diff,
    random_instance,
};

use radtrans::grid::build_quadrature;
use radtrans::linalg::{thomas_solve, Tridiagonal};
use radtrans::opacity::{opacity_at_centers, opacity_at_nodes, OpacityModel};
use radtrans::params::SolverParams;
use radtrans::state::{
    init_diffusion_state, init_transport_state, pow3, pow4, BoundaryCondition, InitialCondition,
    PhysicalConstants,
};
use radtrans::transport::{
    ap_step, correct_fluctuation, correct_fluctuation_nlopacity, correct_temperature,
    correct_temperature_nlopacity, predict, predict_nlopacity,
};
use radtrans::Grid1D;

fn run_prediction_oracle(nl: bool, seeds: std::ops::Range<u64>) {
    for seed in seeds {
        let (state, grid, quad, consts, opacity, bc) = random_instance(seed, 8, 4, nl);
        let pred = if nl {
            predict_nlopacity(&state, 1e-3, &grid, &quad, &consts, &opacity, &bc).unwrap()
        } else {
            predict(&state, 1e-3, &grid, &quad, &consts, &opacity, &bc).unwrap()
        };
        let (e, o, u) = dense_prediction(&state, 1e-3, &grid, &quad, &consts, &opacity, &bc);
        let scale = max_abs(&e).max(max_abs(&o)).max(max_abs(&u)).max(1e-300);
        let err = max_abs_diff(&pred.e_star, &e)
            .max(max_abs_diff(&pred.o_star, &o))
            .max(max_abs_diff(&pred.u_star, &u));
        assert!(err / scale < 1e-10, "seed {seed} (nl={nl}): relative error {}", err / scale);
    }
}

#[test]
fn prediction_matches_dense_oracle() {
    run_prediction_oracle(false, 0..30);
    run_prediction_oracle(true, 0..30);
}

/// The returned prediction satisfies the original (unscaled) equations.
#[test]
fn prediction_satisfies_original_equations() {
    for seed in 0..12 {
        let (state, grid, quad, consts, opacity, bc) = random_instance(seed, 8, 4, false);
        let dt = 1e-3;
        let pred = predict(&state, dt, &grid, &quad, &consts, &opacity, &bc).unwrap();
        let (nx, nv) = (grid.nx, quad.len());
        let dx = grid.dx;
        let eps2 = consts.epsilon * consts.epsilon;
        let lam = 1.0 / (consts.c * dt);
        let ac = consts.a * consts.c;
        let sigma_c = opacity_at_centers(&opacity, &grid, &state.temperature);
        let sigma_n = opacity_at_nodes(&sigma_c);

        // Odd equations at interior nodes.
        for j in 1..nx {
            for (k, &v) in quad.nodes.iter().enumerate() {
                let lhs = lam * (pred.o_star[j * nv + k] - state.o_at(j, k))
                    + v / (eps2 * dx) * (pred.e_star[j * nv + k] - pred.e_star[(j - 1) * nv + k])
                    + sigma_n[j] / eps2 * pred.o_star[j * nv + k];
                let scale = (sigma_n[j] / eps2 * pred.o_star[j * nv + k]).abs().max(1.0 / eps2);
                assert!(lhs.abs() / scale < 1e-10, "seed {seed} node {j} k {k}: {lhs}");
            }
        }
        // Even equations at cells.
        for c in 0..nx {
            for (k, &v) in quad.nodes.iter().enumerate() {
                let lhs = lam * (pred.e_star[c * nv + k] - state.e_at(c, k))
                    + v / dx * (pred.o_star[(c + 1) * nv + k] - pred.o_star[c * nv + k])
                    - sigma_c[c] / eps2 * (ac * pred.u_star[c] - pred.e_star[c * nv + k]);
                assert!(lhs.abs() * eps2 < 1e-10, "seed {seed} cell {c} k {k}: {lhs}");
            }
        }
        // U relaxation equations.
        for c in 0..nx {
            let avg: f64 = (0..nv)
                .map(|k| quad.weights[k] * pred.e_star[c * nv + k])
                .sum();
            let q = 4.0 * sigma_c[c] * pow3(state.temperature[c]);
            let lhs = consts.cv * (pred.u_star[c] - state.u[c]) / dt
                - q / eps2 * (avg - ac * pred.u_star[c]);
            assert!(lhs.abs() * eps2 < 1e-9, "seed {seed} cell {c}: {lhs}");
        }
    }
}

fn run_fluctuation_oracle(nl: bool, seeds: std::ops::Range<u64>) {
    let params = SolverParams::default();
    for seed in seeds {
        let (state, grid, quad, consts, opacity, bc) = random_instance(seed, 8, 4, nl);
        let dt = 1e-3;
        let (pred, temp) = if nl {
            let p = predict_nlopacity(&state, dt, &grid, &quad, &consts, &opacity, &bc).unwrap();
            let t = correct_temperature_nlopacity(
                &state, &p, dt, &grid, &quad, &consts, &opacity, &bc, &params,
            )
            .unwrap();
            (p, t)
        } else {
            let p = predict(&state, dt, &grid, &quad, &consts, &opacity, &bc).unwrap();
            let t =
                correct_temperature(&state, &p, dt, &grid, &quad, &consts, &opacity, &bc, &params)
                    .unwrap();
            (p, t)
        };
        let _ = pred;
        let fluct = if nl {
            correct_fluctuation_nlopacity(
                &state,
                &temp.temperature,
                dt,
                &grid,
                &quad,
                &consts,
                &opacity,
                &bc,
            )
            .unwrap()
        } else {
            correct_fluctuation(
                &state,
                &temp.temperature,
                dt,
                &grid,
                &quad,
                &consts,
                &opacity,
                &bc,
            )
            .unwrap()
        };
        let (ej, oj) = dense_fluctuation(
            &state,
            &temp.temperature,
            dt,
            &grid,
            &quad,
            &consts,
            &opacity,
            &bc,
        );
        let scale = max_abs(&ej).max(max_abs(&oj)).max(1e-300);
        let err = max_abs_diff(&fluct.e_j, &ej).max(max_abs_diff(&fluct.o_j, &oj));
        assert!(err / scale < 1e-10, "seed {seed} (nl={nl}): relative error {}", err / scale);
    }
}

#[test]
fn fluctuation_matches_dense_oracle() {
    run_fluctuation_oracle(false, 0..30);
    run_fluctuation_oracle(true, 0..30);
}

/// Temperature correction on a single interior cell against bisection.
#[test]
fn temperature_quartic_matches_bisection_oracle() {
    let grid = Grid1D::unit(4).unwrap();
    let quad = build_quadrature(4).unwrap();
    let consts = PhysicalConstants::unit(0.7);
    let opacity = OpacityModel::Constant(1.3);
    let params = SolverParams::default();
    let ic = InitialCondition::Custom(vec![0.4, 0.9, 0.6, 0.3]);
    let state = init_transport_state(&ic, &grid, &quad, &consts).unwrap();
    let bc = BoundaryCondition::vacuum(4);
    let dt = 2e-3;
    let mut pred = predict(&state, dt, &grid, &quad, &consts, &opacity, &bc).unwrap();
    // Prescribe a nontrivial odd-parity jump around cell 1.
    for k in 0..4 {
        pred.o_star[quad.len() + k] = 0.05 * (k as f64 + 1.0);
        pred.o_star[2 * quad.len() + k] = -0.02 * (k as f64 + 1.0);
    }
    let temp =
        correct_temperature(&state, &pred, dt, &grid, &quad, &consts, &opacity, &bc, &params).unwrap();

    let c = 1;
    let eps2 = consts.epsilon * consts.epsilon;
    let alpha = consts.a / dt;
    let beta = consts.cv / dt + eps2 * consts.cv / (consts.c * 1.3 * dt * dt);
    let mut gamma = beta * state.temperature[c];
    for (k, &v) in quad.nodes.iter().enumerate() {
        gamma += quad.weights[k]
            * (state.e_at(c, k) / (consts.c * dt)
                - v * (pred.o_star[(c + 1) * 4 + k] - pred.o_star[c * 4 + k]) / grid.dx);
    }
    let oracle = bisect_quartic(alpha, beta, gamma, gamma / beta + 1.0);
    assert!(
        (temp.temperature[c] - oracle).abs() < 1e-12,
        "{} vs {oracle}",
        temp.temperature[c]
    );
}

/// In the optically thick regime the predicted U matches the prediction
/// stage of the three-stage diffusion solver.
#[test]
fn stiff_prediction_matches_diffusion_prediction_stage() {
    let nx = 100;
    let grid = Grid1D::unit(nx).unwrap();
    let quad = build_quadrature(16).unwrap();
    let consts = PhysicalConstants::unit(1e-5);
    let opacity = OpacityModel::Striped(1e-3);
    let state =
        init_transport_state(&InitialCondition::CompactParabola, &grid, &quad, &consts).unwrap();
    let bc = BoundaryCondition::vacuum(16);
    let dt = 0.1 * grid.dx;
    let pred = predict(&state, dt, &grid, &quad, &consts, &opacity, &bc).unwrap();

    // The prediction stage of (the diffusion limit's) three-stage scheme,
    // assembled directly: (I/dt - M div) U* = U^n/dt.
    let sigma_c = opacity_at_centers(&opacity, &grid, &state.temperature);
    let coef: Vec<f64> = opacity_at_nodes(&sigma_c)
        .iter()
        .map(|&s| consts.a * consts.c / (3.0 * s))
        .collect();
    let inv = 1.0 / (grid.dx * grid.dx);
    let mut sys = Tridiagonal::zeros(nx);
    let mut rhs = vec![0.0; nx];
    for i in 0..nx {
        let t3 = pow3(state.temperature[i]);
        let m = 4.0 * t3 / (4.0 * consts.a * t3 + consts.cv);
        let (cl, cr) = (
            if i == 0 { 0.0 } else { coef[i] },
            if i + 1 == nx { 0.0 } else { coef[i + 1] },
        );
        sys.diag[i] = 1.0 / dt + m * inv * (cl + cr);
        if i > 0 {
            sys.lower[i] = -m * inv * cl;
        }
        if i + 1 < nx {
            sys.upper[i] = -m * inv * cr;
        }
        rhs[i] = state.u[i] / dt;
    }
    let u_diffusion = thomas_solve(&sys, &rhs).unwrap();
    let err = l1_distance(&pred.u_star, &u_diffusion, grid.dx);
    assert!(err < 1e-3, "L1 distance {err}");
}

/// Leading-order Fick law of the corrected fluctuation in the stiff limit.
#[test]
fn stiff_fluctuation_obeys_fick_law() {
    let nx = 100;
    let grid = Grid1D::unit(nx).unwrap();
    let quad = build_quadrature(8).unwrap();
    let consts = PhysicalConstants::unit(1e-5);
    let opacity = OpacityModel::Constant(1.0);
    let params = SolverParams::default();
    let state =
        init_transport_state(&InitialCondition::CompactParabola, &grid, &quad, &consts).unwrap();
    let bc = BoundaryCondition::vacuum(8);
    let dt = 0.1 * grid.dx;
    let pred = predict(&state, dt, &grid, &quad, &consts, &opacity, &bc).unwrap();
    let temp =
        correct_temperature(&state, &pred, dt, &grid, &quad, &consts, &opacity, &bc, &params).unwrap();
    let fluct = correct_fluctuation(
        &state,
        &temp.temperature,
        dt,
        &grid,
        &quad,
        &consts,
        &opacity,
        &bc,
    )
    .unwrap();

    let ac = consts.a * consts.c;
    let u1: Vec<f64> = temp.temperature.iter().map(|&t| pow4(t)).collect();
    let sigma_n = opacity_at_nodes(&opacity_at_centers(&opacity, &grid, &state.temperature));
    let mut worst = 0.0_f64;
    for j in 1..nx {
        for (k, &v) in quad.nodes.iter().enumerate() {
            let fick = -ac * v / sigma_n[j] * (u1[j] - u1[j - 1]) / grid.dx;
            worst = worst.max((fluct.o_j[j * quad.len() + k] - fick).abs());
        }
    }
    assert!(worst < 1e-2, "max Fick-law deviation {worst}");
}

/// After one stiff step the density sits on the Planckian to leading order.
#[test]
fn stiff_step_reaches_planckian() {
    let nx = 100;
    let grid = Grid1D::unit(nx).unwrap();
    let quad = build_quadrature(8).unwrap();
    let consts = PhysicalConstants::unit(1e-5);
    let opacity = OpacityModel::Constant(1.0);
    let params = SolverParams::default();
    let ic = InitialCondition::Custom(
        (0..nx).map(|i| 0.5 + 0.3 * (grid.center(i) * 6.0).sin().abs()).collect(),
    );
    let state = init_transport_state(&ic, &grid, &quad, &consts).unwrap();
    let bc = BoundaryCondition::vacuum(8);
    let (next, _) = ap_step(
        &state,
        0.1 * grid.dx,
        &grid,
        &quad,
        &consts,
        &opacity,
        &bc,
        &params,
    )
    .unwrap();
    let ac = consts.a * consts.c;
    let rho = next.density(&quad);
    // Boundary cells poke into the ghost closure layer; check the interior.
    let mut worst = 0.0_f64;
    for c in 1..nx - 1 {
        worst = worst.max((rho[c] - ac * next.u[c]).abs() / (ac * next.u[c] + 1e-300));
    }
    assert!(worst < 5e-4, "max relative Planckian gap {worst}");
}
