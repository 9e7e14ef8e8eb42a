//! Direct banded solvers and the Newton iterations shared by all schemes.
//!
//! - `thomas_solve`: tridiagonal elimination, one pass each way.
//! - `block_thomas_solve`: the same recurrence with dense m-by-m blocks and
//!   per-block LU factorization (partial pivoting inside a block only).
//! - `newton_quartic`: the scalar solve of alpha T^4 + beta T = gamma that
//!   the correction stage performs once per cell.
//! - `newton_tridiag_system`: damped Newton for the fully implicit
//!   reference solvers, whose Jacobians are tridiagonal.

use crate::error::{Error, Result};
use crate::state::pow4;

const PIVOT_FLOOR: f64 = 1e-300;
const BLOCK_RCOND_FLOOR: f64 = 1e-14;

/// Tridiagonal matrix; `lower[0]` and `upper[n-1]` are unused.
#[derive(Debug, Clone)]
pub struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Tridiagonal {
    pub fn zeros(n: usize) -> Self {
        Self { lower: vec![0.0; n], diag: vec![0.0; n], upper: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// A x for residual checks.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut y = self.diag[i] * x[i];
                if i > 0 {
                    y += self.lower[i] * x[i - 1];
                }
                if i + 1 < n {
                    y += self.upper[i] * x[i + 1];
                }
                y
            })
            .collect()
    }
}

/// Solves a tridiagonal system by forward elimination and back substitution.
pub fn thomas_solve(sys: &Tridiagonal, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = sys.len();
    assert_eq!(rhs.len(), n, "rhs length mismatch");
    assert!(n >= 1, "empty system");
    let mut diag = vec![0.0; n];
    let mut x = vec![0.0; n];
    diag[0] = sys.diag[0];
    x[0] = rhs[0];
    for i in 1..n {
        let p = diag[i - 1];
        if p.abs() < PIVOT_FLOOR {
            return Err(Error::SingularSystem { row: i - 1 });
        }
        let w = sys.lower[i] / p;
        diag[i] = sys.diag[i] - w * sys.upper[i - 1];
        x[i] = rhs[i] - w * x[i - 1];
    }
    let p = diag[n - 1];
    if p.abs() < PIVOT_FLOOR {
        return Err(Error::SingularSystem { row: n - 1 });
    }
    x[n - 1] /= p;
    for i in (0..n - 1).rev() {
        x[i] = (x[i] - sys.upper[i] * x[i + 1]) / diag[i];
    }
    Ok(x)
}

/// Dense m-by-m block stored row-major.
pub type Block = Vec<f64>;

/// Block tridiagonal matrix with dense blocks; `lower[0]` and
/// `upper[n-1]` are ignored.
#[derive(Debug, Clone)]
pub struct BlockTridiagonal {
    pub n: usize,
    pub m: usize,
    pub lower: Vec<Block>,
    pub diag: Vec<Block>,
    pub upper: Vec<Block>,
}

impl BlockTridiagonal {
    pub fn zeros(n: usize, m: usize) -> Self {
        let z = vec![0.0; m * m];
        Self { n, m, lower: vec![z.clone(); n], diag: vec![z.clone(); n], upper: vec![z; n] }
    }

    /// A x with x given as n contiguous m-vectors.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let (n, m) = (self.n, self.m);
        let mut y = vec![0.0; n * m];
        for i in 0..n {
            block_mul_add(&self.diag[i], &x[i * m..(i + 1) * m], &mut y[i * m..(i + 1) * m], m);
            if i > 0 {
                let (lo, hi) = (i * m, (i + 1) * m);
                let xs = &x[(i - 1) * m..i * m];
                let mut tmp = vec![0.0; m];
                block_mul_add(&self.lower[i], xs, &mut tmp, m);
                for (a, b) in y[lo..hi].iter_mut().zip(&tmp) {
                    *a += b;
                }
            }
            if i + 1 < n {
                let (lo, hi) = (i * m, (i + 1) * m);
                let xs = &x[(i + 1) * m..(i + 2) * m];
                let mut tmp = vec![0.0; m];
                block_mul_add(&self.upper[i], xs, &mut tmp, m);
                for (a, b) in y[lo..hi].iter_mut().zip(&tmp) {
                    *a += b;
                }
            }
        }
        y
    }
}

#[inline]
fn block_mul_add(a: &[f64], x: &[f64], y: &mut [f64], m: usize) {
    for r in 0..m {
        let row = &a[r * m..(r + 1) * m];
        let mut s = 0.0;
        for c in 0..m {
            s += row[c] * x[c];
        }
        y[r] += s;
    }
}

/// LU factorization with partial pivoting of an m-by-m block, in place.
struct BlockLu {
    m: usize,
    lu: Vec<f64>,
    piv: Vec<usize>,
}

impl BlockLu {
    fn factor(block: &[f64], m: usize, index: usize) -> Result<Self> {
        let mut lu = block.to_vec();
        let mut piv = vec![0usize; m];
        let norm = (0..m)
            .map(|r| lu[r * m..(r + 1) * m].iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0_f64, f64::max)
            .max(PIVOT_FLOOR);
        let mut min_pivot = f64::INFINITY;
        for col in 0..m {
            let mut p = col;
            let mut best = lu[col * m + col].abs();
            for r in col + 1..m {
                let v = lu[r * m + col].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            piv[col] = p;
            if p != col {
                for c in 0..m {
                    lu.swap(col * m + c, p * m + c);
                }
            }
            let pivot = lu[col * m + col];
            min_pivot = min_pivot.min(pivot.abs());
            if pivot.abs() / norm <= BLOCK_RCOND_FLOOR {
                return Err(Error::SingularBlock { index });
            }
            for r in col + 1..m {
                let f = lu[r * m + col] / pivot;
                lu[r * m + col] = f;
                for c in col + 1..m {
                    lu[r * m + c] -= f * lu[col * m + c];
                }
            }
        }
        Ok(Self { m, lu, piv })
    }

    fn solve_vec(&self, b: &mut [f64]) {
        let m = self.m;
        for col in 0..m {
            b.swap(col, self.piv[col]);
            for r in col + 1..m {
                b[r] -= self.lu[r * m + col] * b[col];
            }
        }
        for r in (0..m).rev() {
            for c in r + 1..m {
                b[r] -= self.lu[r * m + c] * b[c];
            }
            b[r] /= self.lu[r * m + r];
        }
    }

    /// X with A X = B for an m-by-m right-hand side, column by column.
    fn solve_mat(&self, b: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut out = vec![0.0; m * m];
        let mut col = vec![0.0; m];
        for c in 0..m {
            for r in 0..m {
                col[r] = b[r * m + c];
            }
            self.solve_vec(&mut col);
            for r in 0..m {
                out[r * m + c] = col[r];
            }
        }
        out
    }
}

fn block_matmul(a: &[f64], b: &[f64], m: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * m];
    for r in 0..m {
        for k in 0..m {
            let f = a[r * m + k];
            if f == 0.0 {
                continue;
            }
            let brow = &b[k * m..(k + 1) * m];
            let orow = &mut out[r * m..(r + 1) * m];
            for c in 0..m {
                orow[c] += f * brow[c];
            }
        }
    }
    out
}

/// Block forward elimination and back substitution; `rhs` holds n
/// contiguous m-vectors.
pub fn block_thomas_solve(sys: &BlockTridiagonal, rhs: &[f64]) -> Result<Vec<f64>> {
    let (n, m) = (sys.n, sys.m);
    assert_eq!(rhs.len(), n * m, "rhs length mismatch");
    assert!(n >= 1);

    // gain[i] = D~_i^{-1} R_i, y[i] = D~_i^{-1} (b_i - L_i y_{i-1}).
    let mut gain: Vec<Block> = Vec::with_capacity(n);
    let mut y = vec![0.0; n * m];

    let mut reduced = sys.diag[0].clone();
    let mut lu = BlockLu::factor(&reduced, m, 0)?;
    y[0..m].copy_from_slice(&rhs[0..m]);
    lu.solve_vec(&mut y[0..m]);
    gain.push(if n > 1 { lu.solve_mat(&sys.upper[0]) } else { vec![0.0; m * m] });

    for i in 1..n {
        // D~_i = D_i - L_i gain_{i-1}
        let correction = block_matmul(&sys.lower[i], &gain[i - 1], m);
        reduced = sys.diag[i].clone();
        for (d, c) in reduced.iter_mut().zip(&correction) {
            *d -= c;
        }
        lu = BlockLu::factor(&reduced, m, i)?;

        let mut b = rhs[i * m..(i + 1) * m].to_vec();
        let prev = y[(i - 1) * m..i * m].to_vec();
        let mut lv = vec![0.0; m];
        block_mul_add(&sys.lower[i], &prev, &mut lv, m);
        for (bi, l) in b.iter_mut().zip(&lv) {
            *bi -= l;
        }
        lu.solve_vec(&mut b);
        y[i * m..(i + 1) * m].copy_from_slice(&b);

        gain.push(if i + 1 < n { lu.solve_mat(&sys.upper[i]) } else { vec![0.0; m * m] });
    }

    let mut x = y;
    for i in (0..n - 1).rev() {
        let next = x[(i + 1) * m..(i + 2) * m].to_vec();
        let mut gv = vec![0.0; m];
        block_mul_add(&gain[i], &next, &mut gv, m);
        for (xi, g) in x[i * m..(i + 1) * m].iter_mut().zip(&gv) {
            *xi -= g;
        }
    }
    Ok(x)
}

/// Root of the correction-stage quartic.
#[derive(Debug, Clone, Copy)]
pub struct QuarticRoot {
    pub value: f64,
    pub iterations: usize,
    /// Set when gamma < 0 forced the nonnegative root T = 0.
    pub clamped: bool,
}

/// Solves alpha T^4 + beta T = gamma for the unique root T >= 0.
///
/// beta > 0 makes the left side strictly increasing on [0, inf); gamma < 0
/// has no nonnegative root and clamps to T = 0 with a flag, matching the
/// degenerate limit where fronts require exact zeros.
pub fn newton_quartic(
    alpha: f64,
    beta: f64,
    gamma: f64,
    t_init: f64,
    tol: f64,
) -> Result<QuarticRoot> {
    if !alpha.is_finite() || !beta.is_finite() || !gamma.is_finite() || !t_init.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "non-finite quartic coefficients: alpha={alpha}, beta={beta}, gamma={gamma}, t_init={t_init}"
        )));
    }
    if alpha < 0.0 || beta <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "quartic needs alpha >= 0 and beta > 0 (alpha={alpha}, beta={beta})"
        )));
    }
    if gamma < 0.0 {
        return Ok(QuarticRoot { value: 0.0, iterations: 0, clamped: true });
    }
    let scale = gamma.abs().max(1.0);
    let f = |t: f64| alpha * pow4(t) + beta * t - gamma;

    let mut x = t_init.max(0.0);
    if f(x).abs() <= tol * scale {
        return Ok(QuarticRoot { value: x, iterations: 0, clamped: false });
    }

    // f(0) = -gamma <= 0 and f(gamma/beta) >= 0 bracket the root.
    let mut lo = 0.0;
    let mut hi = gamma / beta;
    x = x.clamp(lo, hi);
    for iter in 1..=200 {
        let fx = f(x);
        if fx.abs() <= tol * scale {
            return Ok(QuarticRoot { value: x, iterations: iter, clamped: false });
        }
        if fx > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let df = 4.0 * alpha * x * x * x + beta;
        let mut next = x - fx / df;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= f64::EPSILON * x.abs() {
            return Ok(QuarticRoot { value: next, iterations: iter, clamped: false });
        }
        x = next;
    }
    Err(Error::Nonconvergence {
        what: "quartic Newton".into(),
        iterations: 200,
        residual: f(x).abs(),
    })
}

/// Damped Newton iteration for a nonlinear system with tridiagonal Jacobian.
///
/// Halves the step while the residual norm increases, with a 1e-4 floor on
/// the damping factor. Converges when the residual sup-norm drops below
/// `tol * max(1, initial residual norm)`: stiff time scalings put the
/// floating-point cancellation floor of the residual above any fixed
/// absolute threshold, so the tolerance is anchored to the starting point.
pub fn newton_tridiag_system<R, J>(
    residual: R,
    jacobian: J,
    x0: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>>
where
    R: Fn(&[f64]) -> Vec<f64>,
    J: Fn(&[f64]) -> Tridiagonal,
{
    let inf_norm = |v: &[f64]| v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let mut x = x0.to_vec();
    let mut r = residual(&x);
    let mut rnorm = inf_norm(&r);
    let tol = tol * rnorm.max(1.0);
    if rnorm <= tol {
        return Ok(x);
    }
    for _ in 0..max_iter {
        let jac = jacobian(&x);
        let step = thomas_solve(&jac, &r)?;
        let mut damping = 1.0;
        loop {
            let candidate: Vec<f64> =
                x.iter().zip(&step).map(|(xi, si)| xi - damping * si).collect();
            let rc = residual(&candidate);
            let rcnorm = inf_norm(&rc);
            if rcnorm < rnorm || damping <= 1e-4 {
                x = candidate;
                r = rc;
                rnorm = rcnorm;
                break;
            }
            damping *= 0.5;
        }
        if rnorm <= tol {
            return Ok(x);
        }
    }
    Err(Error::Nonconvergence {
        what: "tridiagonal Newton".into(),
        iterations: max_iter,
        residual: rnorm,
    })
}
