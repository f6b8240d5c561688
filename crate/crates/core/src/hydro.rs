//! Turning-operator linear algebra and the drift-limit verification tools:
//! the discrete turning operator with its rate bounds, the normalized
//! equilibrium distribution and drift, solvability of `Q(f) = phi` on the
//! mean-zero class, a conservative solver for the limiting drift equation,
//! the stiff scaled kinetic run with an exact matrix-exponential collision,
//! and the epsilon convergence sweep.

use crate::error::{Result, SimError};
use crate::grid::{PhaseGrid, SpatialGrid, VelocityGrid};
use crate::kinetic::{transport_step, KineticState, Splitting};
use crate::linalg::{lu_solve, matexp, nullity, Mat};
use crate::signal::{SignalSample, TurningKernel};
use serde::{Deserialize, Serialize};

/// Discrete turning operator `(A f)(v) = -lambda(v) f(v) + sum T(v', v) f(v') w'`.
#[derive(Debug, Clone)]
pub struct TurningOperator {
    pub matrix: Mat,
    /// Per-node turning rate `lambda(v) = sum T(v, v') w'`.
    pub rates: Vec<f64>,
    pub grid: VelocityGrid,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

impl TurningOperator {
    /// Builds the operator from a kernel evaluated at one frozen signal
    /// point. The kernel families evaluate on the post-turn velocity, so the
    /// jump rate from any node into node `v` is `T(v)`.
    pub fn assemble(
        kernel: &TurningKernel,
        signal: SignalSample,
        grid: &VelocityGrid,
    ) -> Result<Self> {
        let nv = grid.len();
        let mut t_mat = Mat::zeros(nv);
        for i in 0..nv {
            for (j, &v) in grid.nodes().iter().enumerate() {
                let (rate, _) = kernel.eval(signal.s_t, signal.s_x, v);
                t_mat.set(i, j, rate);
            }
        }
        Self::from_rate_matrix(&t_mat, grid)
    }

    /// Builds the operator from a full jump-rate matrix with entry `(i, j)`
    /// holding the rate density of turning from node `i` to node `j`.
    pub fn from_rate_matrix(t_mat: &Mat, grid: &VelocityGrid) -> Result<Self> {
        let nv = grid.len();
        if t_mat.n != nv {
            return Err(SimError::Contract(
                "rate matrix size does not match the velocity grid".into(),
            ));
        }
        if t_mat.data.iter().any(|&r| r < 0.0) {
            return Err(SimError::Contract(
                "turning rates must be nonnegative".into(),
            ));
        }
        let w = grid.weights();
        let mut rates = vec![0.0; nv];
        for i in 0..nv {
            rates[i] = (0..nv).map(|j| t_mat.get(i, j) * w[j]).sum();
        }
        let lambda_min = rates.iter().copied().fold(f64::INFINITY, f64::min);
        let lambda_max = rates.iter().copied().fold(0.0, f64::max);
        if !(lambda_min > 0.0) {
            return Err(SimError::DegenerateOperator(format!(
                "turning rate lower bound is {lambda_min}; a positive lower bound is required"
            )));
        }
        let mut matrix = Mat::zeros(nv);
        for i in 0..nv {
            for j in 0..nv {
                let gain = t_mat.get(j, i) * w[j];
                matrix.set(i, j, gain - if i == j { rates[i] } else { 0.0 });
            }
        }
        Ok(Self {
            matrix,
            rates,
            grid: grid.clone(),
            lambda_min,
            lambda_max,
        })
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        self.matrix.matvec(f)
    }

    /// Weighted sum of `A f`, zero for every `f` by gain/loss cancellation.
    pub fn weighted_mass_of_apply(&self, f: &[f64]) -> f64 {
        self.apply(f)
            .iter()
            .zip(self.grid.weights())
            .map(|(a, w)| a * w)
            .sum()
    }

    /// Bordered matrix: the last (redundant) row replaced by the quadrature
    /// weights, pinning the weighted mean of the solution.
    fn bordered(&self) -> Mat {
        let nv = self.grid.len();
        let mut m = self.matrix.clone();
        for (j, &w) in self.grid.weights().iter().enumerate() {
            m.set(nv - 1, j, w);
        }
        m
    }
}

/// Normalized equilibrium of a turning operator and its drift.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Equilibrium {
    /// `F >= 0` with weighted mass one.
    pub distribution: Vec<f64>,
    /// `sigma = sum v F(v) w`.
    pub drift: f64,
}

/// Solves `A F = 0`, `sum F w = 1` through the bordered system, then
/// verifies the null space is one-dimensional, the residual is at machine
/// level, and the distribution is nonnegative.
pub fn compute_equilibrium(op: &TurningOperator) -> Result<Equilibrium> {
    let nv = op.grid.len();
    let dim = nullity(&op.matrix, 1e-10);
    if dim != 1 {
        return Err(SimError::AmbiguousEquilibrium(format!(
            "turning operator null space has dimension {dim}; the equilibrium dichotomy \
             requires exactly one normalized null direction"
        )));
    }
    let mut rhs = vec![0.0; nv];
    rhs[nv - 1] = 1.0;
    let f = lu_solve(&op.bordered(), &rhs)?;
    let residual = op.apply(&f).iter().map(|r| r.abs()).fold(0.0, f64::max);
    let f_scale = f.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if residual > 1e-10 * op.lambda_max * f_scale.max(1.0) {
        return Err(SimError::Contract(format!(
            "equilibrium residual {residual:.3e} exceeds the machine-level budget"
        )));
    }
    if f.iter().any(|&v| v < -1e-12) {
        return Err(SimError::Contract(
            "equilibrium positivity failure: the computed distribution has negative entries".into(),
        ));
    }
    let mass: f64 = f.iter().zip(op.grid.weights()).map(|(fi, w)| fi * w).sum();
    if (mass - 1.0).abs() > 1e-12 {
        return Err(SimError::Contract(format!(
            "equilibrium normalization drifted to {mass}"
        )));
    }
    let drift = f
        .iter()
        .zip(op.grid.nodes())
        .zip(op.grid.weights())
        .map(|((fi, v), w)| fi * v * w)
        .sum();
    Ok(Equilibrium {
        distribution: f,
        drift,
    })
}

/// Solves `Q(f) = phi` for the unique mean-zero solution; rejects
/// right-hand sides outside the solvable (mean-zero) class.
pub fn solve_with_zero_mean(op: &TurningOperator, phi: &[f64]) -> Result<Vec<f64>> {
    let nv = op.grid.len();
    if phi.len() != nv {
        return Err(SimError::Contract(
            "right-hand side does not match the velocity grid".into(),
        ));
    }
    let w = op.grid.weights();
    let mean: f64 = phi.iter().zip(w).map(|(p, wi)| p * wi).sum();
    let scale: f64 = phi.iter().zip(w).map(|(p, wi)| p.abs() * wi).sum();
    if mean.abs() > 1e-10 * scale.max(1.0) {
        return Err(SimError::NotSolvable(format!(
            "weighted mean of the right-hand side is {mean:.3e}; the problem is solvable only \
             on the mean-zero class"
        )));
    }
    let mut rhs = phi.to_vec();
    rhs[nv - 1] = 0.0;
    let f = lu_solve(&op.bordered(), &rhs)?;
    let residual = op
        .apply(&f)
        .iter()
        .zip(phi)
        .map(|(a, p)| (a - p).abs())
        .fold(0.0, f64::max);
    let budget = 1e-10
        * phi
            .iter()
            .map(|p| p.abs())
            .fold(1.0, f64::max)
            .max(op.lambda_max * f.iter().map(|v| v.abs()).fold(0.0, f64::max));
    if residual > budget {
        return Err(SimError::Contract(format!(
            "solve residual {residual:.3e} exceeds the machine-level budget {budget:.3e}"
        )));
    }
    Ok(f)
}

/// Conservative upwind solution of the drift equation
/// `d rho / dt + d(sigma rho) / dx = 0` up to `t_end`.
pub fn advect_density(
    rho0: &[f64],
    sigma: &[f64],
    t_end: f64,
    grid: &SpatialGrid,
    cfl: f64,
) -> Result<Vec<f64>> {
    let n = grid.n_cells;
    if rho0.len() != n || sigma.len() != n {
        return Err(SimError::Contract(
            "density or drift field does not match the spatial grid".into(),
        ));
    }
    if !(cfl > 0.0 && cfl <= 1.0) {
        return Err(SimError::Contract(format!(
            "CFL fraction must lie in (0, 1], got {cfl}"
        )));
    }
    if t_end < 0.0 {
        return Err(SimError::Contract("advection needs t_end >= 0".into()));
    }
    let periodic = grid.boundary == crate::grid::Boundary::Periodic;
    let dx = grid.dx();
    // face k sits between cells k and k+1; in the non-periodic mode the two
    // boundary faces carry outflow only (ghost density zero)
    let n_faces = if periodic { n } else { n + 1 };
    let face_speed: Vec<f64> = (0..n_faces)
        .map(|k| {
            if periodic {
                0.5 * (sigma[k] + sigma[(k + 1) % n])
            } else if k == 0 {
                sigma[0]
            } else if k == n {
                sigma[n - 1]
            } else {
                0.5 * (sigma[k - 1] + sigma[k])
            }
        })
        .collect();
    let s_max = face_speed
        .iter()
        .chain(sigma.iter())
        .map(|s| s.abs())
        .fold(0.0, f64::max);
    if s_max == 0.0 || t_end == 0.0 {
        return Ok(rho0.to_vec());
    }
    let n_steps = (t_end * s_max / (cfl * dx)).ceil().max(1.0) as usize;
    let dt = t_end / n_steps as f64;
    if dt * s_max / dx > 1.0 + 1e-12 {
        return Err(SimError::StepRejected {
            step: "drift advection",
            dt,
            dt_max: dx / s_max,
        });
    }
    let mut rho = rho0.to_vec();
    let mut flux = vec![0.0; n_faces];
    for _ in 0..n_steps {
        if periodic {
            for k in 0..n {
                let s = face_speed[k];
                flux[k] = if s >= 0.0 {
                    s * rho[k]
                } else {
                    s * rho[(k + 1) % n]
                };
            }
        } else {
            for k in 0..n_faces {
                let s = face_speed[k];
                let left = if k == 0 { 0.0 } else { rho[k - 1] };
                let right = if k == n { 0.0 } else { rho[k] };
                flux[k] = if s >= 0.0 { s * left } else { s * right };
            }
        }
        let prev = rho.clone();
        for j in 0..n {
            let (outgoing, incoming) = if periodic {
                (flux[j], flux[(j + n - 1) % n])
            } else {
                (flux[j + 1], flux[j])
            };
            rho[j] = prev[j] - dt / dx * (outgoing - incoming);
        }
    }
    Ok(rho)
}

/// Advances `df/dt + v df/dx = Q(f) / epsilon` with the collision sub-step
/// applied through the exact matrix exponential `exp((dt / epsilon) A)`,
/// precomputed once for the frozen operator, so the admissible step is set
/// by the transport CFL alone no matter how small `epsilon` is.
pub fn run_scaled(
    initial: &KineticState,
    op: &TurningOperator,
    epsilon: f64,
    t_end: f64,
    phase: &PhaseGrid,
    splitting: Splitting,
    cfl: f64,
) -> Result<KineticState> {
    if !(epsilon > 0.0) {
        return Err(SimError::Contract(format!(
            "scaling parameter must be positive, got {epsilon}"
        )));
    }
    if op.grid != phase.velocity {
        return Err(SimError::Contract(
            "operator and phase grid use different velocity grids".into(),
        ));
    }
    let nv = phase.velocity.len();
    let n = phase.space.n_cells;
    // well-preparedness: the initial data must be a pointwise equilibrium
    let f_scale = initial.f.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let mut worst = 0.0f64;
    for cell in 0..n {
        let local = op.apply(&initial.f[cell * nv..(cell + 1) * nv]);
        worst = worst.max(local.iter().map(|r| r.abs()).fold(0.0, f64::max));
    }
    if worst > 1e-10 * op.lambda_max * f_scale.max(1.0) {
        return Err(SimError::Contract(format!(
            "initial data is not well prepared: max cell residual of Q(f_I) is {worst:.3e}"
        )));
    }
    if t_end == 0.0 {
        return Ok(initial.clone());
    }
    let dx = phase.space.dx();
    let v_max = phase.velocity.v_max();
    let n_steps = (t_end * v_max / (cfl * dx)).ceil().max(1.0) as usize;
    let dt = t_end / n_steps as f64;
    let expo = matexp(&op.matrix.scale(dt / epsilon));

    let collide = |state: &mut KineticState| {
        for cell in 0..n {
            let row = expo.matvec(&state.f[cell * nv..(cell + 1) * nv]);
            state.f[cell * nv..(cell + 1) * nv].copy_from_slice(&row);
        }
    };

    let mut state = initial.clone();
    for _ in 0..n_steps {
        state = match splitting {
            Splitting::Lie => {
                let mut moved = transport_step(&state, dt, phase)?;
                collide(&mut moved);
                moved
            }
            Splitting::Strang => {
                let mut half = transport_step(&state, 0.5 * dt, phase)?;
                collide(&mut half);
                transport_step(&half, 0.5 * dt, phase)?
            }
        };
    }
    state.t = initial.t + t_end;
    Ok(state)
}

/// Sweep setup: a frozen operator, an initial density profile, and the
/// scaling parameters to compare against the drift limit.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub epsilons: Vec<f64>,
    pub kernel: TurningKernel,
    pub frozen_signal: SignalSample,
    pub t_end: f64,
    pub splitting: Splitting,
    pub cfl: f64,
}

/// Resolution pilot: the smallest epsilon rerun on a two-times-coarser grid.
/// A large gap between the two error readings means discretization error is
/// polluting the sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PilotCheck {
    pub epsilon: f64,
    pub error_fine: f64,
    pub error_coarse: f64,
    pub relative_gap: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepPoint {
    pub epsilon: f64,
    pub error_l1: f64,
}

/// Outcome of the epsilon sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    /// Log-log least-squares slope of error against epsilon; `None` when the
    /// errors are at machine level ("exact").
    pub slope: Option<f64>,
    pub exact: bool,
    pub monotone_nonincreasing: bool,
    pub pilot: PilotCheck,
    pub drift: f64,
}

/// Discrete L1(x, v) distance between a kinetic state and `rho F`.
fn limit_error(
    state: &KineticState,
    rho_limit: &[f64],
    eq: &Equilibrium,
    phase: &PhaseGrid,
) -> f64 {
    let nv = phase.velocity.len();
    let w = phase.velocity.weights();
    let mut acc = 0.0;
    for cell in 0..phase.space.n_cells {
        for i in 0..nv {
            acc += (state.f[cell * nv + i] - rho_limit[cell] * eq.distribution[i]).abs() * w[i];
        }
    }
    acc * phase.space.dx()
}

fn sweep_error(
    rho_profile: &[f64],
    eq: &Equilibrium,
    op: &TurningOperator,
    cfg: &SweepConfig,
    epsilon: f64,
    phase: &PhaseGrid,
) -> Result<f64> {
    let nv = phase.velocity.len();
    let mut f = vec![0.0; rho_profile.len() * nv];
    for (cell, &r) in rho_profile.iter().enumerate() {
        for i in 0..nv {
            f[cell * nv + i] = r * eq.distribution[i];
        }
    }
    let initial = KineticState::new(f, 0.0, phase)?;
    let final_state = run_scaled(
        &initial,
        op,
        epsilon,
        cfg.t_end,
        phase,
        cfg.splitting,
        cfg.cfl,
    )?;
    let sigma = vec![eq.drift; phase.space.n_cells];
    let rho_limit = advect_density(rho_profile, &sigma, cfg.t_end, &phase.space, cfg.cfl)?;
    Ok(limit_error(&final_state, &rho_limit, eq, phase))
}

/// Runs the epsilon sweep: for each epsilon the scaled kinetic solution is
/// compared in L1(x, v) against the drift-limit density times the
/// equilibrium profile. A resolution pilot on the smallest epsilon must pass
/// before the sweep runs.
pub fn convergence_sweep(
    cfg: &SweepConfig,
    rho_profile: &[f64],
    phase: &PhaseGrid,
) -> Result<SweepResult> {
    if cfg.epsilons.len() < 3 {
        return Err(SimError::Contract(
            "epsilon sweep needs at least three values".into(),
        ));
    }
    if cfg
        .epsilons
        .windows(2)
        .any(|pair| !(pair[1] < pair[0]) || !(pair[1] > 0.0))
    {
        return Err(SimError::Contract(
            "epsilon list must be strictly decreasing and positive".into(),
        ));
    }
    let op = TurningOperator::assemble(&cfg.kernel, cfg.frozen_signal, &phase.velocity)?;
    let eq = compute_equilibrium(&op)?;
    let mass_scale: f64 = rho_profile.iter().map(|r| r.abs()).sum::<f64>() * phase.space.dx();
    let exact_floor = 1e-12 * mass_scale.max(1.0);

    // resolution pilot at the smallest epsilon
    let eps_min = *cfg.epsilons.last().unwrap();
    let error_fine = sweep_error(rho_profile, &eq, &op, cfg, eps_min, phase)?;
    let n = phase.space.n_cells;
    if !n.is_multiple_of(2) || n < 8 {
        return Err(SimError::Contract(
            "sweep pilot needs an even cell count of at least 8".into(),
        ));
    }
    let coarse_space = SpatialGrid::new(
        phase.space.x_min,
        phase.space.x_max,
        n / 2,
        phase.space.boundary,
    )?;
    let coarse_phase = PhaseGrid::new(coarse_space, phase.velocity.clone());
    let coarse_rho: Vec<f64> = (0..n / 2)
        .map(|j| 0.5 * (rho_profile[2 * j] + rho_profile[2 * j + 1]))
        .collect();
    let error_coarse = sweep_error(&coarse_rho, &eq, &op, cfg, eps_min, &coarse_phase)?;
    let relative_gap = (error_coarse - error_fine).abs() / error_fine.max(exact_floor);
    let pilot_passed = error_fine < exact_floor || relative_gap <= 0.5;
    let pilot = PilotCheck {
        epsilon: eps_min,
        error_fine,
        error_coarse,
        relative_gap,
        passed: pilot_passed,
    };
    if !pilot_passed {
        return Err(SimError::Contract(format!(
            "sweep pilot failed: the error at epsilon = {eps_min} moves by {relative_gap:.2} \
             under grid coarsening, so discretization error dominates at this resolution"
        )));
    }

    let mut points = Vec::with_capacity(cfg.epsilons.len());
    for &eps in &cfg.epsilons {
        let error_l1 = if eps == eps_min {
            error_fine
        } else {
            sweep_error(rho_profile, &eq, &op, cfg, eps, phase)?
        };
        points.push(SweepPoint {
            epsilon: eps,
            error_l1,
        });
    }

    let exact = points.iter().all(|p| p.error_l1 < exact_floor);
    let slope = if exact {
        None
    } else {
        let xs: Vec<f64> = points.iter().map(|p| p.epsilon.ln()).collect();
        let ys: Vec<f64> = points.iter().map(|p| p.error_l1.max(1e-300).ln()).collect();
        let xm = xs.iter().sum::<f64>() / xs.len() as f64;
        let ym = ys.iter().sum::<f64>() / ys.len() as f64;
        let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
        let den: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
        Some(num / den)
    };
    let monotone_nonincreasing = points
        .windows(2)
        .all(|pair| pair[1].error_l1 <= pair[0].error_l1 * 1.05 + exact_floor);

    Ok(SweepResult {
        points,
        slope,
        exact,
        monotone_nonincreasing,
        pilot,
        drift: eq.drift,
    })
}
