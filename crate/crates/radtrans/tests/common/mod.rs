//! Shared test oracles: a dense Gaussian-elimination solver and dense
//! monolithic assemblies of the prediction/correction linear systems,
//! built directly from the parity equations with no elimination tricks.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use radtrans::grid::{AngularQuadrature, Grid1D};
use radtrans::opacity::{opacity_at_centers, opacity_at_nodes, OpacityModel};
use radtrans::state::{pow3, pow4, BoundaryCondition, PhysicalConstants, TransportState};

/// Dense Gaussian elimination with partial pivoting.
pub fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().map(|row| row.clone()).collect();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let mut p = col;
        for r in col + 1..n {
            if m[r][col].abs() > m[p][col].abs() {
                p = r;
            }
        }
        assert!(m[p][col].abs() > 1e-300, "singular oracle matrix at column {col}");
        m.swap(col, p);
        rhs.swap(col, p);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                m[r][c] -= f * m[col][c];
            }
            rhs[r] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let mut s = rhs[r];
        for c in r + 1..n {
            s -= m[r][c] * x[c];
        }
        x[r] = s / m[r][r];
    }
    x
}

pub struct DenseSystemLayout {
    pub nx: usize,
    pub nv: usize,
}

impl DenseSystemLayout {
    pub fn ie(&self, c: usize, k: usize) -> usize {
        c * self.nv + k
    }
    pub fn io(&self, j: usize, k: usize) -> usize {
        self.nx * self.nv + j * self.nv + k
    }
    pub fn iu(&self, c: usize) -> usize {
        self.nx * self.nv + (self.nx + 1) * self.nv + c
    }
    pub fn total(&self) -> usize {
        self.nx * self.nv + (self.nx + 1) * self.nv + self.nx
    }
}

/// K multipliers and U-relaxation factors for either opacity family,
/// recomputed here from first principles.
pub struct OracleCoeffs {
    pub sigma_cell: Vec<f64>,
    pub sigma_node: Vec<f64>,
    pub k_cell: Vec<f64>,
    pub k_node: Vec<f64>,
    pub q_cell: Vec<f64>,
}

pub fn oracle_coeffs(
    state: &TransportState,
    grid: &Grid1D,
    opacity: &OpacityModel,
) -> OracleCoeffs {
    let sigma_cell = opacity_at_centers(opacity.base(), grid, &state.temperature);
    let sigma_node = opacity_at_nodes(&sigma_cell);
    if opacity.is_temperature_dependent() {
        let k_cell: Vec<f64> = state.temperature.iter().map(|&t| pow3(t)).collect();
        let k_node = opacity_at_nodes(&k_cell);
        let q_cell = sigma_cell.iter().map(|&s| 4.0 * s).collect();
        OracleCoeffs { sigma_cell, sigma_node, k_cell, k_node, q_cell }
    } else {
        let q_cell = sigma_cell
            .iter()
            .zip(&state.temperature)
            .map(|(&s, &t)| 4.0 * s * pow3(t))
            .collect();
        OracleCoeffs {
            sigma_cell,
            sigma_node,
            k_cell: vec![1.0; grid.nx],
            k_node: vec![1.0; grid.nx + 1],
            q_cell,
        }
    }
}

/// Assembles and solves the full prediction system in the unknowns
/// (E*, O*, U*) straight from the backward-Euler parity equations with the
/// incoming-intensity ghost closures. Returns (e_star, o_star, u_star).
pub fn dense_prediction(
    state: &TransportState,
    dt: f64,
    grid: &Grid1D,
    quad: &AngularQuadrature,
    consts: &PhysicalConstants,
    opacity: &OpacityModel,
    bc: &BoundaryCondition,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let co = oracle_coeffs(state, grid, opacity);
    let (nx, nv) = (grid.nx, quad.len());
    let lay = DenseSystemLayout { nx, nv };
    let n = lay.total();
    let dx = grid.dx;
    let eps = consts.epsilon;
    let eps2 = eps * eps;
    let ac = consts.a * consts.c;
    let lam = 1.0 / (consts.c * dt);

    let mut a = vec![vec![0.0; n]; n];
    let mut b = vec![0.0; n];

    // Odd-parity equations at interior nodes.
    for j in 1..nx {
        for (k, &v) in quad.nodes.iter().enumerate() {
            let row = lay.io(j, k);
            a[row][lay.io(j, k)] = co.k_node[j] * lam + co.sigma_node[j] / eps2;
            a[row][lay.ie(j, k)] += co.k_node[j] * v / (eps2 * dx);
            a[row][lay.ie(j - 1, k)] -= co.k_node[j] * v / (eps2 * dx);
            b[row] = co.k_node[j] * lam * state.o_at(j, k);
        }
    }
    // Ghost closures at the boundary nodes.
    for k in 0..nv {
        let row = lay.io(0, k);
        a[row][lay.io(0, k)] = 1.0;
        a[row][lay.io(1, k)] = 1.0;
        a[row][lay.ie(0, k)] = 2.0 / eps;
        b[row] = 2.0 / eps * bc.incoming_left[k];

        let row = lay.io(nx, k);
        a[row][lay.io(nx, k)] = 1.0;
        a[row][lay.io(nx - 1, k)] = 1.0;
        a[row][lay.ie(nx - 1, k)] = -2.0 / eps;
        b[row] = -2.0 / eps * bc.incoming_right[k];
    }
    // Even-parity equations at cells.
    for c in 0..nx {
        for (k, &v) in quad.nodes.iter().enumerate() {
            let row = lay.ie(c, k);
            a[row][lay.ie(c, k)] = co.k_cell[c] * lam + co.sigma_cell[c] / eps2;
            a[row][lay.io(c + 1, k)] += co.k_cell[c] * v / dx;
            a[row][lay.io(c, k)] -= co.k_cell[c] * v / dx;
            a[row][lay.iu(c)] = -co.sigma_cell[c] * ac / eps2;
            b[row] = co.k_cell[c] * lam * state.e_at(c, k);
        }
    }
    // U relaxation equations.
    for c in 0..nx {
        let row = lay.iu(c);
        a[row][lay.iu(c)] = consts.cv / dt + co.q_cell[c] * ac / eps2;
        for k in 0..nv {
            a[row][lay.ie(c, k)] = -co.q_cell[c] / eps2 * quad.weights[k];
        }
        b[row] = consts.cv / dt * state.u[c];
    }

    let x = dense_solve(&a, &b);
    let e = x[0..nx * nv].to_vec();
    let o = x[nx * nv..nx * nv + (nx + 1) * nv].to_vec();
    let u = x[nx * nv + (nx + 1) * nv..].to_vec();
    (e, o, u)
}

/// Assembles and solves the correction linear system in (E_J, O_J) with
/// every starred quantity replaced by its n+1 value, as the scheme
/// prescribes. Returns (e_j, o_j).
pub fn dense_fluctuation(
    state: &TransportState,
    t_new: &[f64],
    dt: f64,
    grid: &Grid1D,
    quad: &AngularQuadrature,
    consts: &PhysicalConstants,
    opacity: &OpacityModel,
    bc: &BoundaryCondition,
) -> (Vec<f64>, Vec<f64>) {
    let (nx, nv) = (grid.nx, quad.len());
    let lay = DenseSystemLayout { nx, nv };
    let n = nx * nv + (nx + 1) * nv;
    let dx = grid.dx;
    let eps = consts.epsilon;
    let eps2 = eps * eps;
    let ac = consts.a * consts.c;
    let lam = 1.0 / (consts.c * dt);

    let sigma_cell = opacity_at_centers(opacity.base(), grid, &state.temperature);
    let sigma_node = opacity_at_nodes(&sigma_cell);
    let (k_cell, k_node) = if opacity.is_temperature_dependent() {
        let kc: Vec<f64> = t_new.iter().map(|&t| pow3(t)).collect();
        let kn = opacity_at_nodes(&kc);
        (kc, kn)
    } else {
        (vec![1.0; nx], vec![1.0; nx + 1])
    };
    let u1: Vec<f64> = t_new.iter().map(|&t| pow4(t)).collect();

    let mut a = vec![vec![0.0; n]; n];
    let mut b = vec![0.0; n];

    for j in 1..nx {
        for (k, &v) in quad.nodes.iter().enumerate() {
            let row = lay.io(j, k);
            a[row][lay.io(j, k)] = k_node[j] * lam + sigma_node[j] / eps2;
            a[row][lay.ie(j, k)] += k_node[j] * v / (eps * dx);
            a[row][lay.ie(j - 1, k)] -= k_node[j] * v / (eps * dx);
            b[row] = k_node[j] * lam * state.o_at(j, k)
                - k_node[j] * ac * v / (eps2 * dx) * (u1[j] - u1[j - 1]);
        }
    }
    for k in 0..nv {
        let row = lay.io(0, k);
        a[row][lay.io(0, k)] = 1.0;
        a[row][lay.io(1, k)] = 1.0;
        a[row][lay.ie(0, k)] = 2.0;
        b[row] = 2.0 / eps * (bc.incoming_left[k] - ac * u1[0]);

        let row = lay.io(nx, k);
        a[row][lay.io(nx, k)] = 1.0;
        a[row][lay.io(nx - 1, k)] = 1.0;
        a[row][lay.ie(nx - 1, k)] = -2.0;
        b[row] = 2.0 / eps * (ac * u1[nx - 1] - bc.incoming_right[k]);
    }
    for c in 0..nx {
        for (k, &v) in quad.nodes.iter().enumerate() {
            let row = lay.ie(c, k);
            a[row][lay.ie(c, k)] = k_cell[c] * lam * eps + sigma_cell[c] / eps;
            a[row][lay.io(c + 1, k)] += k_cell[c] * v / dx;
            a[row][lay.io(c, k)] -= k_cell[c] * v / dx;
            b[row] = k_cell[c] * lam * (state.e_at(c, k) - ac * u1[c]);
        }
    }

    let x = dense_solve(&a, &b);
    (x[0..nx * nv].to_vec(), x[nx * nv..].to_vec())
}

/// Random positive state plus matching boundary data; epsilon cycles over
/// order-one and stiff values with the seed.
pub fn random_instance(
    seed: u64,
    nx: usize,
    nv: usize,
    nl: bool,
) -> (TransportState, Grid1D, AngularQuadrature, PhysicalConstants, OpacityModel, BoundaryCondition)
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = Grid1D::unit(nx).unwrap();
    let quad = radtrans::build_quadrature(nv).unwrap();
    let epsilons = [1.0, 0.2, 0.01];
    let consts = PhysicalConstants::unit(epsilons[(seed % 3) as usize]);
    let ac = consts.a * consts.c;

    let temperature: Vec<f64> = (0..nx).map(|_| rng.gen_range(0.1..1.2)).collect();
    let mut e = vec![0.0; nx * nv];
    for c in 0..nx {
        for k in 0..nv {
            e[c * nv + k] = ac * pow4(temperature[c]) * rng.gen_range(0.5..1.5);
        }
    }
    let o: Vec<f64> = (0..(nx + 1) * nv).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let u: Vec<f64> = temperature.iter().map(|&t| pow4(t)).collect();
    let state = TransportState { nx, nv, e, o, temperature, u, time: 0.0 };

    let sigma: Vec<f64> = (0..nx).map(|_| rng.gen_range(0.3..2.0)).collect();
    let base = OpacityModel::TabulatedByCell(sigma);
    let opacity = if nl { OpacityModel::TemperatureDependent(Box::new(base)) } else { base };

    let bc = BoundaryCondition {
        incoming_left: (0..nv).map(|_| rng.gen_range(0.0..1.0)).collect(),
        incoming_right: (0..nv).map(|_| rng.gen_range(0.0..1.0)).collect(),
        diffusion_left: radtrans::DiffusionBc::ZeroFlux,
        diffusion_right: radtrans::DiffusionBc::ZeroFlux,
    };
    (state, grid, quad, consts, opacity, bc)
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

/// dx-weighted l1 distance.
pub fn l1_distance(a: &[f64], b: &[f64], dx: f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() * dx
}

/// Bisection root of alpha T^4 + beta T = gamma on [0, hi].
pub fn bisect_quartic(alpha: f64, beta: f64, gamma: f64, hi: f64) -> f64 {
    let f = |t: f64| alpha * pow4(t) + beta * t - gamma;
    assert!(f(0.0) <= 0.0 && f(hi) >= 0.0, "bracket does not contain the root");
    let (mut lo, mut hi) = (0.0, hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}
