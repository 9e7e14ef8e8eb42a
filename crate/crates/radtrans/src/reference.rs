//! Independent reference solvers used to validate the semi-implicit scheme:
//! an explicit upwind discretization of the transport system for the
//! optically thin regime, and a lagged-opacity implicit iteration for the
//! sigma/T^3 case.

use crate::error::{Error, Result};
use crate::grid::{AngularQuadrature, Grid1D};
use crate::opacity::{opacity_at_centers, opacity_at_nodes, OpacityModel};
use crate::state::{
    pow3, pow4, quartic_root, BoundaryCondition, InitialCondition, PhysicalConstants,
    TransportState,
};
use crate::transport::{k_nodes_from_cells, predict_generic, SchemeCoeffs};

/// Directional intensities at nodes plus the material temperature at cell
/// centers; deliberately not the parity variables, so this code path shares
/// nothing with the semi-implicit scheme.
#[derive(Debug, Clone)]
pub struct AngularIntensityState {
    pub nx: usize,
    pub nv: usize,
    /// I(+v_k) at nodes, [nx+1][nv].
    pub i_plus: Vec<f64>,
    /// I(-v_k) at nodes, [nx+1][nv].
    pub i_minus: Vec<f64>,
    /// [nx] at cell centers.
    pub temperature: Vec<f64>,
    pub time: f64,
}

impl AngularIntensityState {
    pub fn all_finite(&self) -> bool {
        self.i_plus.iter().all(|v| v.is_finite())
            && self.i_minus.iter().all(|v| v.is_finite())
            && self.temperature.iter().all(|v| v.is_finite())
    }

    /// rho = <I> per node.
    pub fn density_at_nodes(&self, quad: &AngularQuadrature) -> Vec<f64> {
        (0..=self.nx)
            .map(|j| {
                let mut s = 0.0;
                for k in 0..self.nv {
                    s += quad.weights[k]
                        * 0.5
                        * (self.i_plus[j * self.nv + k] + self.i_minus[j * self.nv + k]);
                }
                s
            })
            .collect()
    }

    /// rho averaged onto cell centers.
    pub fn density_at_centers(&self, quad: &AngularQuadrature) -> Vec<f64> {
        let nodes = self.density_at_nodes(quad);
        (0..self.nx).map(|c| 0.5 * (nodes[c] + nodes[c + 1])).collect()
    }
}

/// Builds the nodal-intensity state from an initial-condition spec;
/// tabulated temperatures are interpolated onto the nodes.
pub fn init_angular_state(
    ic: &InitialCondition,
    grid: &Grid1D,
    quad: &AngularQuadrature,
    consts: &PhysicalConstants,
) -> Result<AngularIntensityState> {
    let temperature = ic.temperatures(grid, consts)?;
    let nv = quad.len();
    let t_nodes: Vec<f64> = (0..=grid.nx)
        .map(|j| match ic.temperature_at(grid.node(j), consts) {
            Some(t) => t,
            None => {
                if j == 0 {
                    temperature[0]
                } else if j == grid.nx {
                    temperature[grid.nx - 1]
                } else {
                    0.5 * (temperature[j - 1] + temperature[j])
                }
            }
        })
        .collect();
    let mut i_plus = vec![0.0; (grid.nx + 1) * nv];
    for j in 0..=grid.nx {
        let intensity = ic.intensity(consts, t_nodes[j]);
        for k in 0..nv {
            i_plus[j * nv + k] = intensity;
        }
    }
    let i_minus = i_plus.clone();
    Ok(AngularIntensityState { nx: grid.nx, nv, i_plus, i_minus, temperature, time: 0.0 })
}

/// Effective opacity at cells; the sigma/T^3 family divides by K = T^3 with
/// a floor so that cold cells degenerate to a huge-but-finite rate instead
/// of dividing by zero.
fn effective_opacity(
    opacity: &OpacityModel,
    grid: &Grid1D,
    temperature: &[f64],
) -> Vec<f64> {
    const K_FLOOR: f64 = 1e-30;
    let base = opacity_at_centers(opacity.base(), grid, temperature);
    if opacity.is_temperature_dependent() {
        base.iter()
            .zip(temperature)
            .map(|(&s, &t)| s / pow3(t).max(K_FLOOR))
            .collect()
    } else {
        base
    }
}

/// First-order upwind step in each direction with explicit Euler for the
/// relaxation terms. Sub-steps internally when the caller's dt exceeds the
/// explicit stability bound, so drivers can use the same outer dt as for
/// the implicit schemes. The radiative source is collocated at cells and
/// averaged onto the nodes, which makes the radiation/material exchange
/// cancel exactly in the discrete energy balance.
pub fn explicit_transport_step(
    state: &AngularIntensityState,
    dt: f64,
    grid: &Grid1D,
    quad: &AngularQuadrature,
    consts: &PhysicalConstants,
    opacity: &OpacityModel,
    bc: &BoundaryCondition,
) -> Result<AngularIntensityState> {
    let (nx, nv) = (state.nx, state.nv);
    let dx = grid.dx;
    let eps = consts.epsilon;
    let eps2 = eps * eps;
    let ac = consts.ac();
    let v_max = *quad.nodes.last().expect("nonempty quadrature");

    let mut s = state.clone();
    let mut remaining = dt;
    let mut sub_steps = 0usize;
    while remaining > 0.0 {
        let sigma = effective_opacity(opacity, grid, &s.temperature);
        let sigma_max = sigma.iter().fold(0.0_f64, |m, &v| m.max(v)).max(1e-300);
        let t_max = s.temperature.iter().fold(0.0_f64, |m, &v| m.max(v));
        let dt_stab = 0.9
            * (eps * dx / (consts.c * v_max)).min(
                consts.cv * eps2 / (consts.c * sigma_max * (4.0 * consts.a * pow3(t_max)).max(1.0)),
            );
        let step = remaining.min(dt_stab);
        sub_steps += 1;
        if sub_steps > 2_000_000 {
            return Err(Error::Nonconvergence {
                what: "explicit transport sub-stepping".into(),
                iterations: sub_steps,
                residual: remaining,
            });
        }

        // Cell-collocated sources for each direction.
        let mut src_plus = vec![0.0; nx * nv];
        let mut src_minus = vec![0.0; nx * nv];
        for c in 0..nx {
            let emit = ac * pow4(s.temperature[c]);
            let rate = sigma[c] / eps2;
            for k in 0..nv {
                let bar_p = 0.5 * (s.i_plus[c * nv + k] + s.i_plus[(c + 1) * nv + k]);
                let bar_m = 0.5 * (s.i_minus[c * nv + k] + s.i_minus[(c + 1) * nv + k]);
                src_plus[c * nv + k] = rate * (emit - bar_p);
                src_minus[c * nv + k] = rate * (emit - bar_m);
            }
        }
        let node_src = |src: &[f64], j: usize, k: usize| -> f64 {
            if j == 0 {
                0.5 * src[k]
            } else if j == nx {
                0.5 * src[(nx - 1) * nv + k]
            } else {
                0.5 * (src[(j - 1) * nv + k] + src[j * nv + k])
            }
        };

        let rho_nodes = s.density_at_nodes(quad);
        let mut i_plus = s.i_plus.clone();
        let mut i_minus = s.i_minus.clone();
        for (k, &v) in quad.nodes.iter().enumerate() {
            i_plus[k] = bc.incoming_left[k];
            for j in 1..=nx {
                let adv = (s.i_plus[j * nv + k] - s.i_plus[(j - 1) * nv + k]) / dx;
                i_plus[j * nv + k] = s.i_plus[j * nv + k]
                    + consts.c * step * (-(v / eps) * adv + node_src(&src_plus, j, k));
            }
            i_minus[nx * nv + k] = bc.incoming_right[k];
            for j in 0..nx {
                let adv = (s.i_minus[(j + 1) * nv + k] - s.i_minus[j * nv + k]) / dx;
                i_minus[j * nv + k] = s.i_minus[j * nv + k]
                    + consts.c * step * ((v / eps) * adv + node_src(&src_minus, j, k));
            }
        }
        let mut temperature = s.temperature.clone();
        for c in 0..nx {
            let rho_bar = 0.5 * (rho_nodes[c] + rho_nodes[c + 1]);
            temperature[c] += step * sigma[c] / (consts.cv * eps2)
                * (rho_bar - ac * pow4(s.temperature[c]));
        }

        s = AngularIntensityState { nx, nv, i_plus, i_minus, temperature, time: s.time + step };
        if !s.all_finite() {
            return Err(Error::NonFinite("explicit transport state".into()));
        }
        remaining -= step;
    }
    s.time = state.time + dt;
    Ok(s)
}

/// Lagged-opacity implicit iteration for sigma/T^3: freeze K = (T^{(k)})^3,
/// solve the resulting linear implicit system from the time-n state, and
/// repeat until the U iterates settle. Returns the converged state together
/// with the history of sup-norm increments.
#[allow(clippy::too_many_arguments)]
pub fn iterative_implicit_step(
    state: &TransportState,
    dt: f64,
    grid: &Grid1D,
    quad: &AngularQuadrature,
    consts: &PhysicalConstants,
    opacity: &OpacityModel,
    bc: &BoundaryCondition,
    tol: f64,
    max_iter: usize,
) -> Result<(TransportState, Vec<f64>)> {
    if !opacity.is_temperature_dependent() {
        return Err(Error::InvalidArgument(
            "iterative_implicit_step needs a temperature-dependent opacity".into(),
        ));
    }
    if tol <= 0.0 {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let sigma_cell = opacity_at_centers(opacity.base(), grid, &state.temperature);
    let sigma_node = opacity_at_nodes(&sigma_cell);
    let q_cell: Vec<f64> = sigma_cell.iter().map(|&s| 4.0 * s).collect();

    let mut t_lag = state.temperature.clone();
    let mut u_prev = state.u.clone();
    let mut increments = Vec::new();
    for _ in 0..max_iter {
        let k_cell: Vec<f64> = t_lag.iter().map(|&t| pow3(t)).collect();
        let k_node = k_nodes_from_cells(&k_cell);
        let co = SchemeCoeffs {
            sigma_cell: sigma_cell.clone(),
            sigma_node: sigma_node.clone(),
            k_cell,
            k_node,
            q_cell: q_cell.clone(),
        };
        let pred = predict_generic(state, dt, grid, quad, consts, &co, bc)?;
        let incr = pred
            .u_star
            .iter()
            .zip(&u_prev)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        increments.push(incr);
        let scale = u_prev.iter().fold(0.0_f64, |m, &v| m.max(v.abs())).max(1.0);
        if incr <= tol * scale {
            let temperature: Vec<f64> = pred.u_star.iter().map(|&u| quartic_root(u)).collect();
            let next = TransportState {
                nx: state.nx,
                nv: state.nv,
                e: pred.e_star,
                o: pred.o_star,
                u: pred.u_star,
                temperature,
                time: state.time + dt,
            };
            return Ok((next, increments));
        }
        t_lag = pred.u_star.iter().map(|&u| quartic_root(u)).collect();
        u_prev = pred.u_star;
    }
    Err(Error::Nonconvergence {
        what: "lagged-opacity implicit iteration".into(),
        iterations: max_iter,
        residual: *increments.last().unwrap_or(&f64::NAN),
    })
}
