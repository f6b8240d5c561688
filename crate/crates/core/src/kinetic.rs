//! Phase-space density update: conservative upwind transport plus an
//! explicit turning (collision) step, combined by Lie or Strang splitting.
//!
//! The transport step is first-order upwind per velocity node, which is
//! exactly conservative under periodic boundaries and positivity preserving
//! under the CFL condition `dt * v_max / dx <= 1`. The collision step is an
//! explicit Euler update of the gain-loss turning integral with the signal
//! gradients frozen at the step's start; it conserves the per-cell velocity
//! integral to round-off because gain and loss integrate identically.

use crate::error::{Result, SimError};
use crate::fields::MacroState;
use crate::grid::{Boundary, PhaseGrid};
use crate::signal::TurningKernel;
use serde::{Deserialize, Serialize};

/// Phase-space density `f(t, x, v)` stored cell-major: `f[cell * nv + node]`.
#[derive(Debug, Clone, PartialEq)]
pub struct KineticState {
    pub f: Vec<f64>,
    pub t: f64,
}

impl KineticState {
    pub fn new(f: Vec<f64>, t: f64, grid: &PhaseGrid) -> Result<Self> {
        let expect = grid.space.n_cells * grid.velocity.len();
        if f.len() != expect {
            return Err(SimError::Contract(format!(
                "kinetic state needs {expect} entries (cells x velocity nodes), got {}",
                f.len()
            )));
        }
        Ok(Self { f, t })
    }

    /// Velocity-uniform state carrying the cell density profile `rho`:
    /// `f(x, v) = rho(x) / |V|`.
    pub fn from_density_profile(rho: &[f64], grid: &PhaseGrid) -> Result<Self> {
        if rho.len() != grid.space.n_cells {
            return Err(SimError::Contract(
                "density profile length does not match the spatial grid".into(),
            ));
        }
        let nv = grid.velocity.len();
        let measure = grid.velocity.measure();
        let mut f = Vec::with_capacity(rho.len() * nv);
        for &r in rho {
            for _ in 0..nv {
                f.push(r / measure);
            }
        }
        Ok(Self { f, t: 0.0 })
    }

    #[inline]
    pub fn value(&self, cell: usize, node: usize, nv: usize) -> f64 {
        self.f[cell * nv + node]
    }

    /// Total mass `integral over x and v of f`.
    pub fn total_mass(&self, grid: &PhaseGrid) -> f64 {
        let nv = grid.velocity.len();
        let w = grid.velocity.weights();
        let mut total = 0.0;
        for cell in 0..grid.space.n_cells {
            let row = &self.f[cell * nv..(cell + 1) * nv];
            total += row.iter().zip(w).map(|(f, w)| f * w).sum::<f64>();
        }
        total * grid.space.dx()
    }

    pub fn min_value(&self) -> f64 {
        self.f.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Cell density and flux extracted from a kinetic state.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub rho: Vec<f64>,
    pub flux: Vec<f64>,
}

/// `rho = integral of f dv`, `j = integral of v f dv` by quadrature.
pub fn compute_moments(state: &KineticState, grid: &PhaseGrid) -> Moments {
    let nv = grid.velocity.len();
    let nodes = grid.velocity.nodes();
    let w = grid.velocity.weights();
    let n = grid.space.n_cells;
    let mut rho = vec![0.0; n];
    let mut flux = vec![0.0; n];
    for cell in 0..n {
        let row = &state.f[cell * nv..(cell + 1) * nv];
        let mut r = 0.0;
        let mut j = 0.0;
        for i in 0..nv {
            let fw = row[i] * w[i];
            r += fw;
            j += nodes[i] * fw;
        }
        rho[cell] = r;
        flux[cell] = j;
    }
    Moments { rho, flux }
}

/// First-order upwind advection of every velocity node over `dt`.
pub fn transport_step(state: &KineticState, dt: f64, grid: &PhaseGrid) -> Result<KineticState> {
    if dt < 0.0 {
        return Err(SimError::Contract("transport needs dt >= 0".into()));
    }
    let dx = grid.space.dx();
    let v_max = grid.velocity.v_max();
    let cfl = dt * v_max / dx;
    if cfl > 1.0 + 1e-12 {
        return Err(SimError::StepRejected {
            step: "upwind transport",
            dt,
            dt_max: dx / v_max,
        });
    }
    let nv = grid.velocity.len();
    let n = grid.space.n_cells;
    let nodes = grid.velocity.nodes();
    let periodic = grid.space.boundary == Boundary::Periodic;
    let mut out = vec![0.0; state.f.len()];
    for (i, &v) in nodes.iter().enumerate() {
        let nu = dt * v / dx;
        if v > 0.0 {
            for cell in 0..n {
                let here = state.f[cell * nv + i];
                let upwind = if cell > 0 {
                    state.f[(cell - 1) * nv + i]
                } else if periodic {
                    state.f[(n - 1) * nv + i]
                } else {
                    0.0
                };
                out[cell * nv + i] = here - nu * (here - upwind);
            }
        } else {
            for cell in 0..n {
                let here = state.f[cell * nv + i];
                let upwind = if cell + 1 < n {
                    state.f[(cell + 1) * nv + i]
                } else if periodic {
                    state.f[i]
                } else {
                    0.0
                };
                out[cell * nv + i] = here - nu * (upwind - here);
            }
        }
    }
    Ok(KineticState {
        f: out,
        t: state.t + dt,
    })
}

/// Result of a collision (turning) update.
#[derive(Debug, Clone)]
pub struct CollisionOutcome {
    pub state: KineticState,
    /// Number of kernel evaluations whose raw rate was clamped to zero.
    pub clamp_events: u64,
}

/// Explicit gain-loss turning update with the kernel evaluated from the
/// per-cell signal gradients in `macro_state`.
///
/// The gain at node `v` is `T(v) * rho` because the kernel families evaluate
/// on the post-turn velocity, and the loss is `lambda * f(v)` with
/// `lambda = integral of T dv` -- the exact discrete counterparts of the
/// turning integral's two halves, so the per-cell velocity integral is
/// conserved identically.
pub fn collision_step(
    state: &KineticState,
    macro_state: &MacroState,
    kernel: &TurningKernel,
    dt: f64,
    grid: &PhaseGrid,
) -> Result<CollisionOutcome> {
    if dt < 0.0 {
        return Err(SimError::Contract("collision needs dt >= 0".into()));
    }
    let nv = grid.velocity.len();
    let n = grid.space.n_cells;
    if macro_state.s_x.len() != n || macro_state.s_t.len() != n {
        return Err(SimError::Contract(
            "macro state does not match the spatial grid".into(),
        ));
    }
    let nodes = grid.velocity.nodes();
    let w = grid.velocity.weights();

    // evaluate the destination rates once per cell, then check positivity
    let mut rates = vec![0.0; n * nv];
    let mut lambdas = vec![0.0; n];
    let mut clamp_events = 0u64;
    let mut lambda_max: f64 = 0.0;
    for cell in 0..n {
        let (st, sx) = (macro_state.s_t[cell], macro_state.s_x[cell]);
        let mut lambda = 0.0;
        for i in 0..nv {
            let (rate, clamped) = kernel.eval(st, sx, nodes[i]);
            if clamped {
                clamp_events += 1;
            }
            rates[cell * nv + i] = rate;
            lambda += rate * w[i];
        }
        lambdas[cell] = lambda;
        lambda_max = lambda_max.max(lambda);
    }
    if dt * lambda_max > 1.0 + 1e-12 {
        return Err(SimError::StepRejected {
            step: "explicit collision",
            dt,
            dt_max: 1.0 / lambda_max,
        });
    }

    let mut out = vec![0.0; state.f.len()];
    for cell in 0..n {
        let row = &state.f[cell * nv..(cell + 1) * nv];
        let rho: f64 = row.iter().zip(w).map(|(f, wi)| f * wi).sum();
        let lambda = lambdas[cell];
        for i in 0..nv {
            let gain = rates[cell * nv + i] * rho;
            let loss = lambda * row[i];
            out[cell * nv + i] = row[i] + dt * (gain - loss);
        }
    }
    Ok(CollisionOutcome {
        state: KineticState {
            f: out,
            t: state.t + dt,
        },
        clamp_events,
    })
}

/// Operator-splitting flavor for the combined kinetic step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Splitting {
    /// Transport then collision; first order in dt.
    Lie,
    /// Half transport, collision, half transport; second order in dt.
    Strang,
}

/// One full kinetic step of transport and collision.
pub fn step(
    state: &KineticState,
    macro_state: &MacroState,
    kernel: &TurningKernel,
    dt: f64,
    grid: &PhaseGrid,
    splitting: Splitting,
) -> Result<CollisionOutcome> {
    match splitting {
        Splitting::Lie => {
            let moved = transport_step(state, dt, grid)?;
            let mut out = collision_step(&moved, macro_state, kernel, dt, grid)?;
            // the sub-steps share one time window
            out.state.t = state.t + dt;
            Ok(out)
        }
        Splitting::Strang => {
            let half = transport_step(state, 0.5 * dt, grid)?;
            let collided = collision_step(&half, macro_state, kernel, dt, grid)?;
            let mut done = transport_step(&collided.state, 0.5 * dt, grid)?;
            done.t = state.t + dt;
            Ok(CollisionOutcome {
                state: done,
                clamp_events: collided.clamp_events,
            })
        }
    }
}
