//! Coupled-run orchestration: the fixed coupling order
//! (moments, then signal, then internal state, then the kinetic step with
//! the kernel reading the refreshed gradients), the automatic step-size
//! policy, snapshot artifacts, and the run summary.

use crate::config::{DtPolicy, KappaPolicy, SimConfig};
use crate::error::{Result, SimError};
use crate::fields::{
    central_gradient, duhamel_signal, norm_l1, norm_l2, norm_linf, signal_equation_rhs,
    step_internal_state, step_signal, MacroState, SignalHistory,
};
use crate::grid::{Boundary, PhaseGrid};
use crate::io;
use crate::kinetic::{compute_moments, step as kinetic_step, KineticState};
use crate::monitors::{GradientRecord, InvariantReport, MonitorBaseline, MonitorSet};
use crate::signal::production;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

/// A live coupled simulation: kinetic state plus macroscopic fields.
pub struct Simulation {
    pub config: SimConfig,
    pub phase: PhaseGrid,
    pub state: KineticState,
    pub macro_state: MacroState,
    pub t: f64,
    pub steps: u64,
    pub clamp_events: u64,
    pub rho_floor: f64,
    pub dt_max_used: f64,
    pub gradient_history: Vec<GradientRecord>,
    /// Per-step source history for the heat-kernel oracle; only recorded
    /// when enabled (needs a uniform step size).
    pub history: Option<SignalHistory>,
}

impl Simulation {
    pub fn new(config: &SimConfig) -> Result<Self> {
        config.validate()?;
        let phase = config.build_phase_grid()?;
        let rho0 = config.f0.sample(&phase.space);
        let state = KineticState::from_density_profile(&rho0, &phase)?;
        let moments = compute_moments(&state, &phase);
        let mut macro_state = MacroState::resting(phase.space.n_cells);
        macro_state.rho = moments.rho;
        macro_state.flux = moments.flux;
        macro_state.z = config.z0.sample(&phase.space);
        macro_state.s = config.s0.sample(&phase.space);
        macro_state.s_x = central_gradient(&macro_state.s, &phase.space);
        // before a backward difference exists, the stored time derivative is
        // the discrete equation right-hand side
        macro_state.s_t = signal_equation_rhs(
            &macro_state,
            config.production,
            &config.receptor,
            &phase.space,
        )?;
        let mean_rho = macro_state.rho.iter().sum::<f64>() / phase.space.n_cells as f64;
        Ok(Self {
            config: config.clone(),
            phase,
            state,
            macro_state,
            t: 0.0,
            steps: 0,
            clamp_events: 0,
            rho_floor: 1e-12 * mean_rho.max(f64::MIN_POSITIVE),
            dt_max_used: 0.0,
            gradient_history: Vec::new(),
            history: None,
        })
    }

    /// Starts recording the signal source history for the oracle. Must be
    /// called before the first step; the run must then use a uniform dt.
    pub fn enable_history(&mut self, dt: f64) -> Result<()> {
        if self.steps != 0 {
            return Err(SimError::Contract(
                "history recording must start before the first step".into(),
            ));
        }
        let mut history = SignalHistory::new(self.macro_state.s.clone(), dt)?;
        history.push_source(self.current_source()?);
        self.history = Some(history);
        Ok(())
    }

    fn current_source(&self) -> Result<Vec<f64>> {
        let m = &self.macro_state;
        let mut source = vec![0.0; m.n_cells()];
        for i in 0..source.len() {
            let prod = production(
                m.s[i],
                m.z[i],
                m.rho[i],
                self.config.production,
                &self.config.receptor,
            )?;
            source[i] = prod - m.s[i] * m.s[i];
        }
        Ok(source)
    }

    /// Largest admissible step under the transport CFL, the collision
    /// positivity bound at the current signal, and the signal positivity
    /// bound, each scaled by the configured CFL fraction.
    pub fn auto_dt(&self) -> f64 {
        let space = &self.phase.space;
        let transport = space.dx() / self.phase.velocity.v_max();

        let mut lambda_max: f64 = 0.0;
        for cell in 0..space.n_cells {
            let (st, sx) = (self.macro_state.s_t[cell], self.macro_state.s_x[cell]);
            let lambda: f64 = self
                .phase
                .velocity
                .nodes()
                .iter()
                .zip(self.phase.velocity.weights())
                .map(|(&v, &w)| self.config.kernel.eval(st, sx, v).0 * w)
                .sum();
            lambda_max = lambda_max.max(lambda);
        }
        let collision = if lambda_max > 0.0 {
            1.0 / lambda_max
        } else {
            f64::INFINITY
        };

        let mut signal_bound = f64::INFINITY;
        for i in 0..space.n_cells {
            let s = self.macro_state.s[i];
            let prod = production(
                s,
                self.macro_state.z[i],
                self.macro_state.rho[i],
                self.config.production,
                &self.config.receptor,
            )
            .unwrap_or(0.0);
            let src = prod - s * s;
            if src < 0.0 && s > 0.0 {
                signal_bound = signal_bound.min(s / (-src));
            }
        }

        self.config.cfl * transport.min(collision).min(signal_bound)
    }

    /// One coupled step in the fixed order: signal, internal state, kinetic
    /// step with the kernel at the refreshed gradients, then new moments.
    pub fn advance(&mut self, dt: f64) -> Result<()> {
        if !(dt > 0.0) {
            return Err(SimError::Contract(format!(
                "coupled step needs dt > 0, got {dt}"
            )));
        }
        let space = self.phase.space.clone();
        let update = step_signal(
            &self.macro_state,
            self.config.production,
            &self.config.receptor,
            dt,
            &space,
        )?;
        self.macro_state.s = update.s;
        self.macro_state.s_t = update.s_t;
        self.macro_state.s_x = central_gradient(&self.macro_state.s, &space);

        self.macro_state.z = step_internal_state(
            &self.macro_state,
            &self.config.receptor,
            dt,
            &space,
            self.rho_floor,
        )?;

        let outcome = kinetic_step(
            &self.state,
            &self.macro_state,
            &self.config.kernel,
            dt,
            &self.phase,
            self.config.splitting,
        )?;
        self.state = outcome.state;
        self.clamp_events += outcome.clamp_events;

        let moments = compute_moments(&self.state, &self.phase);
        self.macro_state.rho = moments.rho;
        self.macro_state.flux = moments.flux;

        self.t += dt;
        self.steps += 1;
        self.dt_max_used = self.dt_max_used.max(dt);
        if self.history.is_some() {
            let source = self.current_source()?;
            if let Some(history) = &mut self.history {
                history.push_source(source);
            }
        }
        Ok(())
    }

    pub fn total_mass(&self) -> f64 {
        self.state.total_mass(&self.phase)
    }

    pub fn record_gradients(&mut self) {
        self.gradient_history.push(GradientRecord {
            t: self.t,
            sx_linf: norm_linf(&self.macro_state.s_x),
            st_linf: norm_linf(&self.macro_state.s_t),
            rho_l2: norm_l2(&self.macro_state.rho, &self.phase.space),
        });
    }

    /// Initial-data anchors for the envelope monitors.
    pub fn baseline(&self) -> MonitorBaseline {
        let space = &self.phase.space;
        let n0: f64 = self
            .macro_state
            .z
            .iter()
            .zip(&self.macro_state.rho)
            .map(|(z, r)| (z * r).abs())
            .sum::<f64>()
            * space.dx();
        MonitorBaseline {
            mass0: self.total_mass(),
            z0_linf: norm_linf(&self.macro_state.z),
            n0_l1: n0,
            rho0_l1: norm_l1(&self.macro_state.rho, space),
            sup_g: self.config.receptor.sup(),
            periodic: space.boundary == Boundary::Periodic,
        }
    }
}

/// Final-time field norms recorded in the run summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FinalNorms {
    pub total_mass: f64,
    pub rho_l1: f64,
    pub flux_linf: f64,
    pub z_linf: f64,
    pub s_linf: f64,
    pub s_l1: f64,
    pub s_l2: f64,
    pub f_linf: f64,
}

/// Monitor anchors persisted for the replay subcommand.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonitorMeta {
    pub mass0: f64,
    pub z0_linf: f64,
    pub n0_l1: f64,
    pub rho0_l1: f64,
    pub sup_g: f64,
    pub periodic: bool,
    pub kappa: f64,
    pub dt_ref: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InvariantTally {
    pub entries: usize,
    pub passes: usize,
    pub hard_failures: usize,
    pub informational_failures: usize,
}

/// Deterministic run summary; identical configs and builds produce
/// byte-identical summaries (wall-clock timing goes to a side file).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub config_echo: BTreeMap<String, String>,
    pub final_time: f64,
    pub steps: u64,
    pub snapshot_count: usize,
    pub dt_max_used: f64,
    pub final_norms: FinalNorms,
    pub invariants: InvariantTally,
    pub clamp_events: u64,
    pub monitor: MonitorMeta,
    /// Observed convergence order of the signal scheme from the slack pilot
    /// (absent when the pilot was skipped or degenerate).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observed_order_s: Option<f64>,
}

/// Everything a finished run hands back to callers.
pub struct RunOutput {
    pub summary: RunSummary,
    pub reports: Vec<InvariantReport>,
}

/// Short step-refinement pilot estimating the envelope-overshoot slack
/// coefficient kappa and the observed order of the signal scheme.
///
/// Three monitor-free runs at dt, dt/2 and dt/4 over a quarter of the
/// horizon measure (a) the worst per-step overshoot of the decay envelopes,
/// whose ratio to dt gives kappa, and (b) the successive signal differences,
/// whose ratio gives the observed order.
pub fn slack_pilot(config: &SimConfig) -> Result<(f64, Option<f64>)> {
    let t_pilot = 0.25 * config.t_end;
    let probe = Simulation::new(config)?;
    let dt_base = match config.dt {
        DtPolicy::Fixed(dt) => dt,
        DtPolicy::Auto => probe.auto_dt(),
    };
    let steps_base = (t_pilot / dt_base).ceil().max(2.0) as u64;

    let mut kappa: f64 = 0.0;
    let mut finals: Vec<Vec<f64>> = Vec::new();
    for refine in 0..3u32 {
        let steps = steps_base * 2u64.pow(refine);
        let dt = t_pilot / steps as f64;
        let mut sim = Simulation::new(config)?;
        let baseline = sim.baseline();
        let monitors = MonitorSet::new(baseline, 0.0, 0.0);
        let mut overshoot: f64 = 0.0;
        for _ in 0..steps {
            sim.advance(dt)?;
            let z_entry = monitors.z_bound_entry(&sim.macro_state.z, sim.t);
            let n_entry = monitors.n_decay_entry(
                &sim.macro_state.z,
                &sim.macro_state.rho,
                &sim.phase.space,
                sim.t,
            );
            overshoot = overshoot.max(-z_entry.margin).max(-n_entry.margin);
        }
        kappa = kappa.max(overshoot.max(0.0) / dt);
        finals.push(sim.macro_state.s.clone());
    }
    let diff = |a: &[f64], b: &[f64]| -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    };
    let e1 = diff(&finals[0], &finals[1]);
    let e2 = diff(&finals[1], &finals[2]);
    let order = if e2 > 1e-14 && e1 > 1e-14 {
        Some((e1 / e2).log2())
    } else {
        None
    };
    Ok((kappa, order))
}

/// Runs the coupled system to `t_end`, monitoring every snapshot and
/// writing CSV/JSON artifacts when an output directory is given.
pub fn run_coupled(config: &SimConfig, out_dir: Option<&Path>) -> Result<RunOutput> {
    let started = std::time::Instant::now();
    let mut sim = Simulation::new(config)?;

    let (kappa, observed_order_s) = match config.kappa {
        KappaPolicy::Fixed(k) => (k, None),
        KappaPolicy::Auto => {
            if config.monitors {
                slack_pilot(config)?
            } else {
                (0.0, None)
            }
        }
    };
    let dt_ref = match config.dt {
        DtPolicy::Fixed(dt) => dt,
        DtPolicy::Auto => sim.auto_dt(),
    };
    let monitors = MonitorSet::new(sim.baseline(), kappa, dt_ref);

    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
    }

    let snapshot_times: Vec<f64> = (0..=config.snapshots)
        .map(|k| {
            if k == config.snapshots {
                config.t_end // exact, no rounding through the ratio
            } else {
                config.t_end * k as f64 / config.snapshots as f64
            }
        })
        .collect();
    let mut reports = Vec::new();

    let mut snapshot = |sim: &mut Simulation| -> Result<()> {
        sim.record_gradients();
        let report = if config.monitors {
            let report = monitors.report(
                sim.t,
                sim.total_mass(),
                &sim.macro_state,
                &sim.phase.space,
                sim.clamp_events,
                &sim.gradient_history,
            );
            reports.push(report.clone());
            Some(report)
        } else {
            None
        };
        if let Some(dir) = out_dir {
            let xs = sim.phase.space.centers();
            io::write_fields_csv(
                &dir.join(io::fields_file_name(sim.t)),
                &xs,
                &sim.macro_state,
            )?;
            io::write_kinetic_csv(
                &dir.join(io::kinetic_file_name(sim.t)),
                &sim.phase,
                &sim.state,
            )?;
        }
        let _ = report;
        Ok(())
    };

    snapshot(&mut sim)?;
    for &t_target in &snapshot_times[1..] {
        while sim.t < t_target - 1e-12 {
            let dt_policy = match config.dt {
                DtPolicy::Fixed(dt) => dt,
                DtPolicy::Auto => sim.auto_dt(),
            };
            let dt = dt_policy.min(t_target - sim.t);
            if !(dt > 0.0) {
                return Err(SimError::Contract(format!(
                    "step size collapsed to {dt} at t = {}",
                    sim.t
                )));
            }
            sim.advance(dt)?;
        }
        sim.t = t_target; // absorb accumulated round-off at the snapshot
        snapshot(&mut sim)?;
    }

    let entries: usize = reports.iter().map(|r| r.checks.len()).sum();
    let passes = reports
        .iter()
        .flat_map(|r| &r.checks)
        .filter(|c| c.pass)
        .count();
    let hard_failures = reports
        .iter()
        .flat_map(|r| &r.checks)
        .filter(|c| !c.pass && !c.informational)
        .count();
    let informational_failures = entries - passes - hard_failures;

    let m = &sim.macro_state;
    let space = &sim.phase.space;
    let summary = RunSummary {
        config_echo: config.to_key_values(),
        final_time: sim.t,
        steps: sim.steps,
        snapshot_count: snapshot_times.len(),
        dt_max_used: sim.dt_max_used,
        final_norms: FinalNorms {
            total_mass: sim.total_mass(),
            rho_l1: norm_l1(&m.rho, space),
            flux_linf: norm_linf(&m.flux),
            z_linf: norm_linf(&m.z),
            s_linf: norm_linf(&m.s),
            s_l1: norm_l1(&m.s, space),
            s_l2: norm_l2(&m.s, space),
            f_linf: norm_linf(&sim.state.f),
        },
        invariants: InvariantTally {
            entries,
            passes,
            hard_failures,
            informational_failures,
        },
        clamp_events: sim.clamp_events,
        monitor: MonitorMeta {
            mass0: monitors.baseline.mass0,
            z0_linf: monitors.baseline.z0_linf,
            n0_l1: monitors.baseline.n0_l1,
            rho0_l1: monitors.baseline.rho0_l1,
            sup_g: monitors.baseline.sup_g,
            periodic: monitors.baseline.periodic,
            kappa,
            dt_ref,
        },
        observed_order_s,
    };

    if let Some(dir) = out_dir {
        io::write_json(&dir.join("summary.json"), &summary)?;
        io::write_json(&dir.join("invariants.json"), &reports)?;
        std::fs::write(
            dir.join("timing.txt"),
            format!("wall_clock_s = {:.3}\n", started.elapsed().as_secs_f64()),
        )?;
    }

    Ok(RunOutput { summary, reports })
}

/// Runs the coupled system at a fixed uniform step and hands back the live
/// simulation, with the signal history recorded for oracle comparisons.
pub fn run_fixed_dt_with_history(config: &SimConfig, dt: f64) -> Result<Simulation> {
    let mut sim = Simulation::new(config)?;
    sim.enable_history(dt)?;
    let steps = (config.t_end / dt).round() as u64;
    if ((steps as f64) * dt - config.t_end).abs() > 1e-9 {
        return Err(SimError::Contract(format!(
            "t_end = {} is not a multiple of dt = {dt}",
            config.t_end
        )));
    }
    for _ in 0..steps {
        sim.advance(dt)?;
    }
    Ok(sim)
}

/// Convenience wrapper: runs the recorded-history simulation and compares
/// the finite-difference signal against the heat-kernel oracle at `t_end`.
pub fn oracle_gap(config: &SimConfig, dt: f64) -> Result<f64> {
    let sim = run_fixed_dt_with_history(config, dt)?;
    let history = sim
        .history
        .as_ref()
        .expect("history was enabled for the oracle run");
    let oracle = duhamel_signal(history, sim.t, &sim.phase.space)?;
    Ok(sim
        .macro_state
        .s
        .iter()
        .zip(&oracle)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}
