//! Fixed-step ODE integration, phase-portrait sampling, and a numerical
//! local-stability probe for training dynamics.
//!
//! The integrator is classical fourth-order Runge–Kutta with a fixed step:
//! trajectories here are short and smooth, and bitwise reproducibility
//! matters more than adaptive efficiency. A field callback fills `dx/dt`
//! for a given state; integration aborts with a divergence error (carrying
//! the partial trajectory) as soon as any coordinate leaves [−1e6, 1e6] or
//! becomes non-finite.
//!
//! The stability probe takes a vector field with an approximate equilibrium
//! x*, forms the central-difference Jacobian J, extracts the sub-block
//! belonging to the generator coordinates, symmetrizes it ((B + Bᵀ)/2), and
//! reports the eigenvalues of that symmetric part (cyclic Jacobi rotations).
//! A negative-definite symmetric part is sufficient for local exponential
//! stability, so `max_gg_eig ≤ 0` (up to finite-difference noise) is the
//! certificate of interest; the asymmetric spectrum is not examined.

use crate::error::{Error, Result};

/// Hard bound on state coordinates; beyond this the trajectory counts as
/// divergent.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

/// Finite-difference step used by `stability_check`.
pub const STABILITY_FD_STEP: f64 = 1e-5;

const MAX_JACOBI_SWEEPS: usize = 10_000;

/// Provenance carried alongside a trajectory (forwarded into CSV exports).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrajectoryMeta {
    pub seed: u64,
    pub config_hash: String,
    pub field_name: String,
}

/// Output of `rk4_integrate`: times (strictly increasing, starting at 0)
/// and the state recorded at every step.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn last_state(&self) -> &[f64] {
        self.states.last().expect("trajectory holds at least the initial state")
    }

    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }
}

/// Classical RK4 over [0, ceil(t_end/dt)·dt], recording every step
/// (including the initial state). `field(state, rate)` must fill `rate`.
pub fn rk4_integrate<F>(
    mut field: F,
    x0: &[f64],
    dt: f64,
    t_end: f64,
    meta: TrajectoryMeta,
) -> Result<Trajectory>
where
    F: FnMut(&[f64], &mut [f64]),
{
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::invalid(format!("dt must be positive and finite, got {dt}")));
    }
    if !(t_end >= dt) || !t_end.is_finite() {
        return Err(Error::invalid(format!("t_end must satisfy t_end >= dt, got {t_end}")));
    }
    if x0.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite { context: "rk4 initial state" });
    }
    // ceil(t_end/dt) with a guard against 200/0.01-style rounding noise
    let n_steps = ((t_end / dt) - 1e-9).ceil().max(1.0) as usize;
    let d = x0.len();

    let mut times = Vec::with_capacity(n_steps + 1);
    let mut states = Vec::with_capacity(n_steps + 1);
    times.push(0.0);
    states.push(x0.to_vec());

    let mut x = x0.to_vec();
    let mut k1 = vec![0.0; d];
    let mut k2 = vec![0.0; d];
    let mut k3 = vec![0.0; d];
    let mut k4 = vec![0.0; d];
    let mut tmp = vec![0.0; d];

    for step in 1..=n_steps {
        field(&x, &mut k1);
        for c in 0..d {
            tmp[c] = x[c] + 0.5 * dt * k1[c];
        }
        field(&tmp, &mut k2);
        for c in 0..d {
            tmp[c] = x[c] + 0.5 * dt * k2[c];
        }
        field(&tmp, &mut k3);
        for c in 0..d {
            tmp[c] = x[c] + dt * k3[c];
        }
        field(&tmp, &mut k4);
        for c in 0..d {
            x[c] += dt / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        }
        let t = step as f64 * dt;
        if let Some((coord, value)) = first_bad_coord(&x) {
            return Err(Error::Divergence {
                t,
                coord,
                value,
                limit: DIVERGENCE_LIMIT,
                partial: Box::new(Trajectory { times, states, meta }),
            });
        }
        times.push(t);
        states.push(x.clone());
    }
    Ok(Trajectory { times, states, meta })
}

fn first_bad_coord(x: &[f64]) -> Option<(usize, f64)> {
    x.iter()
        .enumerate()
        .find(|(_, c)| !c.is_finite() || c.abs() > DIVERGENCE_LIMIT)
        .map(|(i, c)| (i, *c))
}

// ───────────────────────── phase portraits ─────────────────────────

/// Rectangular lattice over a 2-state field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64, nx: usize, ny: usize) -> Result<Self> {
        let bounds = [x_min, x_max, y_min, y_max];
        if bounds.iter().any(|b| !b.is_finite()) {
            return Err(Error::invalid("grid bounds must be finite"));
        }
        if !(x_min < x_max) || !(y_min < y_max) {
            return Err(Error::invalid("grid bounds must satisfy min < max on each axis"));
        }
        if nx < 2 || ny < 2 {
            return Err(Error::invalid("grid resolution must be at least 2 per axis"));
        }
        Ok(GridSpec { x_min, x_max, y_min, y_max, nx, ny })
    }
}

/// One lattice node: the state probed and the rate vector there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PortraitNode {
    pub state: [f64; 2],
    pub rate: [f64; 2],
}

/// Evaluate a 2-state field on every lattice node (row-major: y outer,
/// x inner), for quiver/stream rendering.
pub fn phase_portrait<F>(mut field: F, grid: &GridSpec) -> Vec<PortraitNode>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let mut nodes = Vec::with_capacity(grid.nx * grid.ny);
    let mut rate = [0.0; 2];
    for iy in 0..grid.ny {
        let y = grid.y_min + (grid.y_max - grid.y_min) * iy as f64 / (grid.ny - 1) as f64;
        for ix in 0..grid.nx {
            let x = grid.x_min + (grid.x_max - grid.x_min) * ix as f64 / (grid.nx - 1) as f64;
            let state = [x, y];
            field(&state, &mut rate);
            nodes.push(PortraitNode { state, rate });
        }
    }
    nodes
}

// ───────────────────────── Jacobians and stability ─────────────────────────

/// Central-difference Jacobian: column i = (f(x*+h·e_i) − f(x*−h·e_i))/(2h).
/// Returned row-major: `j[r][i]` = ∂f_r/∂x_i.
pub fn fd_jacobian<F>(mut field: F, x_star: &[f64], h: f64) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(&[f64], &mut [f64]),
{
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::invalid(format!("finite-difference step must be positive, got {h}")));
    }
    let d = x_star.len();
    let mut j = vec![vec![0.0; d]; d];
    let mut plus = vec![0.0; d];
    let mut minus = vec![0.0; d];
    let mut probe = x_star.to_vec();
    for i in 0..d {
        let saved = probe[i];
        probe[i] = saved + h;
        field(&probe, &mut plus);
        probe[i] = saved - h;
        field(&probe, &mut minus);
        probe[i] = saved;
        for r in 0..d {
            let entry = (plus[r] - minus[r]) / (2.0 * h);
            if !entry.is_finite() {
                return Err(Error::NonFinite { context: "finite-difference Jacobian entry" });
            }
            j[r][i] = entry;
        }
    }
    Ok(j)
}

/// Local-stability certificate produced by `stability_check`.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    /// Full central-difference Jacobian at x*.
    pub jacobian: Vec<Vec<f64>>,
    /// Eigenvalues of the symmetrized generator block, sorted descending.
    pub gg_block_eigs: Vec<f64>,
    pub max_gg_eig: f64,
    /// ‖field(x*)‖₂ — how much of an equilibrium x* actually is.
    pub equilibrium_residual: f64,
}

/// Probe local stability of `field` at `x_star`: Jacobian by central
/// differences, generator sub-block selected by `generator_block_indices`,
/// symmetrized, and its eigenvalues computed. The equilibrium property is
/// reported (as the field-norm residual), not enforced.
pub fn stability_check<F>(
    mut field: F,
    x_star: &[f64],
    generator_block_indices: &[usize],
) -> Result<StabilityReport>
where
    F: FnMut(&[f64], &mut [f64]),
{
    if generator_block_indices.is_empty() {
        return Err(Error::invalid("generator block must contain at least one index"));
    }
    if let Some(&bad) = generator_block_indices.iter().find(|&&i| i >= x_star.len()) {
        return Err(Error::invalid(format!(
            "generator block index {bad} out of range for a {}-dimensional state",
            x_star.len()
        )));
    }
    let mut rate = vec![0.0; x_star.len()];
    field(x_star, &mut rate);
    let equilibrium_residual = rate.iter().map(|r| r * r).sum::<f64>().sqrt();

    let jacobian = fd_jacobian(&mut field, x_star, STABILITY_FD_STEP)?;

    let g = generator_block_indices;
    let b = g.len();
    let mut sym = vec![vec![0.0; b]; b];
    for (r, &gr) in g.iter().enumerate() {
        for (c, &gc) in g.iter().enumerate() {
            sym[r][c] = 0.5 * (jacobian[gr][gc] + jacobian[gc][gr]);
        }
    }
    let mut gg_block_eigs = jacobi_eigenvalues(&sym)?;
    gg_block_eigs.sort_by(|a, b| b.partial_cmp(a).expect("eigenvalues are finite"));
    let max_gg_eig = gg_block_eigs[0];
    Ok(StabilityReport { jacobian, gg_block_eigs, max_gg_eig, equilibrium_residual })
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations
/// (unordered; `stability_check` sorts). Errs if the off-diagonal mass has
/// not vanished after the sweep budget.
pub fn jacobi_eigenvalues(matrix: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = matrix.len();
    for row in matrix {
        if row.len() != n {
            return Err(Error::invalid("eigenvalue input must be square"));
        }
    }
    if n == 0 {
        return Err(Error::invalid("eigenvalue input must be non-empty"));
    }
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    let frob: f64 = a.iter().flatten().map(|e| e * e).sum::<f64>().sqrt();
    let tol = f64::EPSILON * frob * n as f64;

    for _sweep in 0..MAX_JACOBI_SWEEPS {
        let off: f64 = {
            let mut s = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    s += a[p][q] * a[p][q];
                }
            }
            (2.0 * s).sqrt()
        };
        if off <= tol {
            return Ok((0..n).map(|i| a[i][i]).collect());
        }
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let apq = a[p][q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                // stable tangent of the rotation angle; t → 0 as |theta| → ∞
                let t = if theta.abs() < 1e150 {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                } else {
                    0.5 / theta
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for r in 0..n {
                    if r == p || r == q {
                        continue;
                    }
                    let arp = a[r][p];
                    let arq = a[r][q];
                    a[r][p] = c * arp - s * arq;
                    a[p][r] = a[r][p];
                    a[r][q] = s * arp + c * arq;
                    a[q][r] = a[r][q];
                }
                a[p][p] -= t * apq;
                a[q][q] += t * apq;
                a[p][q] = 0.0;
                a[q][p] = 0.0;
            }
        }
    }
    let off: f64 = {
        let mut s = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                s += a[p][q] * a[p][q];
            }
        }
        (2.0 * s).sqrt()
    };
    Err(Error::EigenNoConvergence { sweeps: MAX_JACOBI_SWEEPS, off_norm: off })
}
