//! Structural properties of the full transport step: equilibrium
//! preservation, mirror symmetry, free-streaming energy balance, the
//! discrete energy-balance identity and the stiff-limit agreement with the
//! three-stage diffusion solver.

mod common;

use common::l1_distance;

use radtrans::diffusion::diffusion3_step;
use radtrans::grid::build_quadrature;
use radtrans::opacity::OpacityModel;
use radtrans::params::SolverParams;
use radtrans::state::{
    init_diffusion_state, init_transport_state, pow4, BoundaryCondition, InitialCondition,
    PhysicalConstants, TransportState,
};
use radtrans::transport::{ap_step, ap_step_nlopacity, energy_balance_residual, predict};
use radtrans::Grid1D;

#[test]
fn equilibrium_drift_stays_at_roundoff_over_100_steps() {
    let params = SolverParams::default();
    let grid = Grid1D::unit(20).unwrap();
    let quad = build_quadrature(16).unwrap();
    for &eps in &[1.0, 1e-3, 1e-5] {
        let consts = PhysicalConstants::unit(eps);
        let ic = InitialCondition::Custom(vec![0.8; 20]);
        let initial = init_transport_state(&ic, &grid, &quad, &consts).unwrap();
        let bc = BoundaryCondition::planck(&consts, 0.8, 0.8, 16);

        let mut state = initial.clone();
        for _ in 0..100 {
            state = ap_step(&state, 1e-3, &grid, &quad, &consts, &OpacityModel::Constant(1.0), &bc, &params)
                .unwrap()
                .0;
        }
        let drift = state.max_abs_difference(&initial);
        assert!(drift <= 100.0 * 1e-13, "eps {eps}: drift {drift}");

        let mut state = initial.clone();
        let nl = OpacityModel::TemperatureDependent(Box::new(OpacityModel::Constant(1.0)));
        for _ in 0..100 {
            state = ap_step_nlopacity(&state, 1e-3, &grid, &quad, &consts, &nl, &bc, &params)
                .unwrap()
                .0;
        }
        let drift = state.max_abs_difference(&initial);
        assert!(drift <= 100.0 * 1e-13, "eps {eps} (nl): drift {drift}");
    }
}

fn reflect(state: &TransportState) -> TransportState {
    let (nx, nv) = (state.nx, state.nv);
    let mut out = state.clone();
    for c in 0..nx {
        for k in 0..nv {
            out.e[c * nv + k] = state.e[(nx - 1 - c) * nv + k];
        }
        out.temperature[c] = state.temperature[nx - 1 - c];
        out.u[c] = state.u[nx - 1 - c];
    }
    for j in 0..=nx {
        for k in 0..nv {
            // x -> -x flips the sign of the odd parity.
            out.o[j * nv + k] = -state.o[(nx - j) * nv + k];
        }
    }
    out
}

#[test]
fn mirror_symmetry_commutes_with_the_step() {
    // Striped opacity and the compact parabola are both symmetric about
    // x = 1/2, so reflection must commute with stepping.
    let params = SolverParams::default();
    let grid = Grid1D::unit(100).unwrap();
    let quad = build_quadrature(8).unwrap();
    for &eps in &[1.0, 1e-3] {
        let consts = PhysicalConstants::unit(eps);
        let opacity = OpacityModel::Striped(0.2);
        let bc = BoundaryCondition::vacuum(8);
        let mut state =
            init_transport_state(&InitialCondition::CompactParabola, &grid, &quad, &consts)
                .unwrap();
        // Break trivial symmetry of the zero odd parity with a few generic
        // steps first.
        let dt = 0.1 * grid.dx;
        for _ in 0..3 {
            state = ap_step(&state, dt, &grid, &quad, &consts, &opacity, &bc, &params)
                .unwrap()
                .0;
        }
        let stepped_then_reflected = reflect(
            &ap_step(&state, dt, &grid, &quad, &consts, &opacity, &bc, &params).unwrap().0,
        );
        let reflected_then_stepped =
            ap_step(&reflect(&state), dt, &grid, &quad, &consts, &opacity, &bc, &params)
                .unwrap()
                .0;
        let gap = stepped_then_reflected.max_abs_difference(&reflected_then_stepped);
        assert!(gap <= 1e-11, "eps {eps}: commutation gap {gap}");
    }
}

#[test]
fn symmetric_data_stays_symmetric_for_50_steps() {
    let params = SolverParams::default();
    let grid = Grid1D::unit(100).unwrap();
    let quad = build_quadrature(8).unwrap();
    let consts = PhysicalConstants::unit(1.0);
    let opacity = OpacityModel::Striped(0.2);
    let bc = BoundaryCondition::vacuum(8);
    let mut state =
        init_transport_state(&InitialCondition::CompactParabola, &grid, &quad, &consts).unwrap();
    for _ in 0..50 {
        state = ap_step(&state, 0.1 * grid.dx, &grid, &quad, &consts, &opacity, &bc, &params)
            .unwrap()
            .0;
    }
    let nx = state.nx;
    let rho = state.density(&quad);
    for c in 0..nx / 2 {
        let dt_sym = (state.temperature[c] - state.temperature[nx - 1 - c]).abs();
        let dr_sym = (rho[c] - rho[nx - 1 - c]).abs();
        assert!(dt_sym <= 1e-11 && dr_sym <= 1e-11, "cell {c}: {dt_sym} {dr_sym}");
    }
}

#[test]
fn free_streaming_energy_changes_only_through_boundaries() {
    // sigma = 0: radiative energy balances against the boundary odd-parity
    // flux exactly; the material temperature never moves.
    let params = SolverParams::default();
    let grid = Grid1D::unit(50).unwrap();
    let quad = build_quadrature(8).unwrap();
    let consts = PhysicalConstants::unit(1.0);
    let opacity = OpacityModel::Constant(0.0);
    let bc = BoundaryCondition::vacuum(8);
    let mut state =
        init_transport_state(&InitialCondition::CompactParabola, &grid, &quad, &consts).unwrap();
    let dt = 0.5 * grid.dx;
    let nv = quad.len();
    for _ in 0..40 {
        let t_before = state.temperature.clone();
        let e_total_before: f64 =
            (0..state.nx).map(|c| quad.average(state.e_row(c))).sum::<f64>() * grid.dx;
        let next = ap_step(&state, dt, &grid, &quad, &consts, &opacity, &bc, &params)
            .unwrap()
            .0;
        let e_total_after: f64 =
            (0..next.nx).map(|c| quad.average(next.e_row(c))).sum::<f64>() * grid.dx;
        let boundary_flux: f64 = (0..nv)
            .map(|k| {
                quad.weights[k]
                    * quad.nodes[k]
                    * (next.o[next.nx * nv + k] - next.o[k])
            })
            .sum();
        let balance = (e_total_after - e_total_before) / (consts.c * dt) + boundary_flux;
        assert!(balance.abs() <= 1e-10, "balance defect {balance}");
        for (a, b) in next.temperature.iter().zip(&t_before) {
            assert_eq!(a, b, "free streaming must not move T");
        }
        state = next;
    }
}

#[test]
fn energy_balance_residual_is_roundoff_on_interior_cells() {
    let params = SolverParams::default();
    let grid = Grid1D::unit(64).unwrap();
    let quad = build_quadrature(8).unwrap();
    for &eps in &[1.0, 1e-2, 1e-5] {
        let consts = PhysicalConstants::unit(eps);
        let opacity = OpacityModel::Striped(0.2);
        let bc = BoundaryCondition::vacuum(8);
        let mut state =
            init_transport_state(&InitialCondition::CompactParabola, &grid, &quad, &consts)
                .unwrap();
        let dt = 0.1 * grid.dx;
        // A generic (non-equilibrium) state after a couple of steps.
        for _ in 0..2 {
            state = ap_step(&state, dt, &grid, &quad, &consts, &opacity, &bc, &params)
                .unwrap()
                .0;
        }
        let pred = predict(&state, dt, &grid, &quad, &consts, &opacity, &bc).unwrap();
        let (next, _) =
            ap_step(&state, dt, &grid, &quad, &consts, &opacity, &bc, &params).unwrap();
        let res =
            energy_balance_residual(&state, &next, &pred, dt, &grid, &quad, &consts, &opacity);
        let scale = (consts.cv
            * state.temperature.iter().fold(0.0_f64, |m, &t| m.max(t))
            / dt)
            .max(1.0);
        let worst = res[1..grid.nx - 1].iter().fold(0.0_f64, |m, r| m.max(r.abs()));
        assert!(worst <= 1e-9 * scale, "eps {eps}: residual {worst}, scale {scale}");
    }
}

#[test]
fn stiff_step_matches_diffusion3_temperature_update() {
    // eps = 1e-5: one transport step and one three-stage diffusion step
    // from the same data produce nearly the same temperature.
    let params = SolverParams::default();
    let nx = 100;
    let grid = Grid1D::unit(nx).unwrap();
    let quad = build_quadrature(16).unwrap();
    let consts = PhysicalConstants::unit(1e-5);
    let opacity = OpacityModel::Striped(1e-3);
    let bc = BoundaryCondition::vacuum(16);
    let transport =
        init_transport_state(&InitialCondition::CompactParabola, &grid, &quad, &consts).unwrap();
    let diffusion = init_diffusion_state(&InitialCondition::CompactParabola, &grid, &consts).unwrap();
    let dt = 0.1 * grid.dx;
    let (t_next, _) =
        ap_step(&transport, dt, &grid, &quad, &consts, &opacity, &bc, &params).unwrap();
    let (d_next, _) =
        diffusion3_step(&diffusion, dt, &grid, &consts, &opacity, &bc, &params).unwrap();
    let err = l1_distance(&t_next.temperature, &d_next.temperature, grid.dx);
    assert!(err <= 1e-3, "per-step L1 gap {err}");
}

#[test]
fn projection_identity_u_equals_t4_bitwise() {
    let params = SolverParams::default();
    let grid = Grid1D::unit(40).unwrap();
    let quad = build_quadrature(8).unwrap();
    let consts = PhysicalConstants::unit(0.3);
    let nl = OpacityModel::TemperatureDependent(Box::new(OpacityModel::Constant(1.0)));
    let bc = BoundaryCondition::planck(&consts, 1.0, 0.0, 8);
    let ic = InitialCondition::FlatIntensity { value: 1e-16, temperature: None };
    let mut state = init_transport_state(&ic, &grid, &quad, &consts).unwrap();
    for _ in 0..20 {
        state = ap_step_nlopacity(&state, 0.1 * grid.dx, &grid, &quad, &consts, &nl, &bc, &params)
            .unwrap()
            .0;
        for c in 0..state.nx {
            assert_eq!(state.u[c], pow4(state.temperature[c]));
        }
    }
}
