//! Subcommand dispatch for the `runtumble` binary.
//!
//! Exit codes: 0 on success, 1 when a run aborts or a non-informational
//! monitor fails, 2 on configuration or usage errors.

use crate::config::SimConfig;
use crate::error::SimError;
use crate::fields::MacroState;
use crate::fields::{norm_l2, norm_linf};
use crate::hydro::{convergence_sweep, SweepConfig};
use crate::io;
use crate::monitors::{GradientRecord, InvariantReport, MonitorBaseline, MonitorSet};
use crate::prng::SplitMix64;
use crate::signal::{check_growth_bounds, SignalSample};
use crate::sim::{run_coupled, RunSummary};
use std::path::PathBuf;

const USAGE: &str = "\
usage: runtumble <subcommand> [flags]

subcommands:
  simulate          run the coupled system        (--config PATH [--out DIR] [--snapshots N])
  limit-sweep       epsilon convergence sweep     (--config PATH [--out DIR])
  check-invariants  replay monitors on a run dir  (--run DIR)
  validate-config   dry-run configuration checks  (--config PATH [--seed N])

flags:
  --config PATH   configuration file (key = value lines)
  --out DIR       output directory (defaults to the config's out_dir)
  --snapshots N   override the snapshot count
  --seed N        seed for the sampled kernel audit (validate-config)
  --run DIR       run directory holding summary.json and fields_*.csv
";

struct Flags {
    config: Option<PathBuf>,
    out: Option<PathBuf>,
    snapshots: Option<usize>,
    seed: u64,
    run: Option<PathBuf>,
}

fn parse_flags(args: &[String]) -> Result<Flags, String> {
    let mut flags = Flags {
        config: None,
        out: None,
        snapshots: None,
        seed: 0,
        run: None,
    };
    let mut iter = args.iter();
    while let Some(flag) = iter.next() {
        let mut grab = || {
            iter.next()
                .cloned()
                .ok_or_else(|| format!("flag {flag} needs a value"))
        };
        match flag.as_str() {
            "--config" => flags.config = Some(PathBuf::from(grab()?)),
            "--out" => flags.out = Some(PathBuf::from(grab()?)),
            "--snapshots" => {
                flags.snapshots = Some(
                    grab()?
                        .parse()
                        .map_err(|_| "--snapshots needs a count".to_string())?,
                )
            }
            "--seed" => {
                flags.seed = grab()?
                    .parse()
                    .map_err(|_| "--seed needs an integer".to_string())?
            }
            "--run" => flags.run = Some(PathBuf::from(grab()?)),
            other => return Err(format!("unknown flag '{other}'")),
        }
    }
    Ok(flags)
}

fn load_config(flags: &Flags) -> Result<SimConfig, SimError> {
    let path = flags
        .config
        .as_ref()
        .ok_or_else(|| SimError::Config("--config PATH is required".into()))?;
    let mut cfg = SimConfig::from_file(path)?;
    if let Some(n) = flags.snapshots {
        cfg.snapshots = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn exit_code_for(err: &SimError) -> i32 {
    match err {
        SimError::Config(_) => 2,
        _ => 1,
    }
}

pub fn dispatch(args: &[String]) -> i32 {
    let Some(subcommand) = args.first() else {
        eprint!("{USAGE}");
        return 2;
    };
    let flags = match parse_flags(&args[1..]) {
        Ok(flags) => flags,
        Err(msg) => {
            eprintln!("error: {msg}");
            eprint!("{USAGE}");
            return 2;
        }
    };
    let result = match subcommand.as_str() {
        "simulate" => cmd_simulate(&flags),
        "limit-sweep" => cmd_limit_sweep(&flags),
        "check-invariants" => cmd_check_invariants(&flags),
        "validate-config" => cmd_validate_config(&flags),
        other => {
            eprintln!("error: unknown subcommand '{other}'");
            eprint!("{USAGE}");
            return 2;
        }
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code_for(&err)
        }
    }
}

fn cmd_simulate(flags: &Flags) -> Result<i32, SimError> {
    let cfg = load_config(flags)?;
    let out_dir = flags
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&cfg.out_dir));
    let output = run_coupled(&cfg, Some(&out_dir))?;
    let tally = &output.summary.invariants;
    println!(
        "simulate: t = {:.6}, {} steps, mass drift {:.3e}, {} / {} monitor entries passed \
         ({} informational), artifacts in {}",
        output.summary.final_time,
        output.summary.steps,
        (output.summary.final_norms.total_mass - output.summary.monitor.mass0).abs(),
        tally.passes,
        tally.entries,
        tally.informational_failures,
        out_dir.display()
    );
    if tally.hard_failures > 0 {
        eprintln!(
            "monitor hard failure: {} envelope entries out of tolerance",
            tally.hard_failures
        );
        return Ok(1);
    }
    Ok(0)
}

fn cmd_limit_sweep(flags: &Flags) -> Result<i32, SimError> {
    let cfg = load_config(flags)?;
    let out_dir = flags
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&cfg.out_dir));
    std::fs::create_dir_all(&out_dir)?;
    let phase = cfg.build_phase_grid()?;
    let rho_profile = cfg.f0.sample(&phase.space);
    let sweep_cfg = SweepConfig {
        epsilons: cfg.epsilons.clone(),
        kernel: cfg.kernel,
        frozen_signal: SignalSample {
            s: cfg.freeze_s,
            s_x: cfg.freeze_sx,
            s_t: cfg.freeze_st,
        },
        t_end: cfg.t_end,
        splitting: cfg.splitting,
        cfl: cfg.cfl,
    };
    let result = convergence_sweep(&sweep_cfg, &rho_profile, &phase)?;

    let mut csv = String::from("epsilon,error_l1\n");
    for point in &result.points {
        csv.push_str(&format!("{:.12e},{:.12e}\n", point.epsilon, point.error_l1));
    }
    std::fs::write(out_dir.join("sweep.csv"), csv)?;
    io::write_json(&out_dir.join("sweep.json"), &result)?;

    match result.slope {
        Some(slope) => println!(
            "limit-sweep: {} points, log-log slope {slope:.3}, drift {:.4}, verdict in {}",
            result.points.len(),
            result.drift,
            out_dir.display()
        ),
        None => println!(
            "limit-sweep: errors at machine level for all epsilons (exact equilibrium data); \
             verdict in {}",
            out_dir.display()
        ),
    }
    Ok(0)
}

fn cmd_check_invariants(flags: &Flags) -> Result<i32, SimError> {
    let run_dir = flags
        .run
        .as_ref()
        .ok_or_else(|| SimError::Config("--run DIR is required".into()))?;
    let summary: RunSummary = io::read_json(&run_dir.join("summary.json"))?;
    let echo_text: String = summary
        .config_echo
        .iter()
        .map(|(k, v)| format!("{k} = {v}\n"))
        .collect();
    let cfg = SimConfig::parse(&echo_text)?;
    let phase = cfg.build_phase_grid()?;

    let baseline = MonitorBaseline {
        mass0: summary.monitor.mass0,
        z0_linf: summary.monitor.z0_linf,
        n0_l1: summary.monitor.n0_l1,
        rho0_l1: summary.monitor.rho0_l1,
        sup_g: summary.monitor.sup_g,
        periodic: summary.monitor.periodic,
    };
    let monitors = MonitorSet::new(baseline, summary.monitor.kappa, summary.monitor.dt_ref);

    let snapshots = io::list_field_snapshots(run_dir)?;
    if snapshots.is_empty() {
        return Err(SimError::Config(format!(
            "no fields_<t>.csv snapshots found in {}",
            run_dir.display()
        )));
    }
    let mut reports: Vec<InvariantReport> = Vec::new();
    let mut gradient_history: Vec<GradientRecord> = Vec::new();
    let mut hard_fail = false;
    for (t, path) in &snapshots {
        let snap = io::read_fields_csv(path, *t)?;
        let macro_state: MacroState = snap.macro_state;
        gradient_history.push(GradientRecord {
            t: *t,
            sx_linf: norm_linf(&macro_state.s_x),
            st_linf: norm_linf(&macro_state.s_t),
            rho_l2: norm_l2(&macro_state.rho, &phase.space),
        });
        // total mass from the replayed density field
        let total_mass: f64 = macro_state.rho.iter().sum::<f64>() * phase.space.dx();
        let report = monitors.report(
            *t,
            total_mass,
            &macro_state,
            &phase.space,
            summary.clamp_events,
            &gradient_history,
        );
        let verdicts: Vec<String> = report
            .checks
            .iter()
            .map(|c| {
                format!(
                    "{} {} (margin {:+.3e})",
                    c.name,
                    if c.pass {
                        "PASS"
                    } else if c.informational {
                        "FAIL*"
                    } else {
                        "FAIL"
                    },
                    c.margin
                )
            })
            .collect();
        println!("t = {t:.6}: {}", verdicts.join(" | "));
        hard_fail |= report.hard_fail();
        reports.push(report);
    }
    io::write_json(&run_dir.join("invariants_replay.json"), &reports)?;
    Ok(if hard_fail { 1 } else { 0 })
}

fn cmd_validate_config(flags: &Flags) -> Result<i32, SimError> {
    let cfg = load_config(flags)?;
    let phase = cfg.build_phase_grid()?;

    // sampled kernel audit over signal magnitudes the initial data suggests
    let s0 = cfg.s0.sample(&phase.space);
    let s_scale = s0.iter().copied().fold(0.0, f64::max).max(0.1);
    let mut rng = SplitMix64::new(flags.seed);
    let samples: Vec<SignalSample> = (0..32)
        .map(|_| SignalSample {
            s: rng.range(0.0, 2.0 * s_scale + 1.0),
            s_x: rng.range(-2.0 * s_scale - 1.0, 2.0 * s_scale + 1.0),
            s_t: rng.range(-2.0 * s_scale - 1.0, 2.0 * s_scale + 1.0),
        })
        .collect();
    let report = check_growth_bounds(&cfg.kernel, &samples, phase.velocity.nodes())?;
    if !report.passed() {
        eprintln!(
            "validate-config: kernel growth bound violated on {} of {} sampled signals \
             (growth_c0 too small for this kernel)",
            report.violations.len(),
            report.samples_checked
        );
        return Ok(2);
    }
    println!(
        "validate-config: ok (kernel audit over {} samples, Lipschitz estimate {:.3})",
        report.samples_checked, report.lipschitz_estimate
    );
    Ok(0)
}
