//! Python bindings for the runtumble simulator: the grid and model types,
//! the envelope utilities, the turning-operator equilibrium, and one-call
//! wrappers around the coupled run and the epsilon sweep that hand back the
//! JSON artifacts as strings.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use runtumble::config::SimConfig;
use runtumble::error::SimError;
use runtumble::fields;
use runtumble::grid;
use runtumble::hydro;
use runtumble::kinetic::Splitting;
use runtumble::monitors;
use runtumble::signal;
use runtumble::sim;
use std::path::PathBuf;

fn err(e: SimError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Symmetric midpoint velocity grid on [-v_max, v_max].
#[pyclass]
#[derive(Clone)]
struct VelocityGrid {
    inner: grid::VelocityGrid,
}

#[pymethods]
impl VelocityGrid {
    #[new]
    fn new(nv: usize, v_max: f64) -> PyResult<Self> {
        Ok(Self {
            inner: grid::VelocityGrid::midpoint(nv, v_max).map_err(err)?,
        })
    }

    #[getter]
    fn nodes(&self) -> Vec<f64> {
        self.inner.nodes().to_vec()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inner.weights().to_vec()
    }

    #[getter]
    fn v_max(&self) -> f64 {
        self.inner.v_max()
    }

    /// Weighted sum realizing the velocity integral.
    fn integrate(&self, values: Vec<f64>) -> PyResult<f64> {
        self.inner.integrate(&values).map_err(err)
    }
}

/// Uniform cell-centered spatial grid.
#[pyclass]
#[derive(Clone)]
struct SpatialGrid {
    inner: grid::SpatialGrid,
}

#[pymethods]
impl SpatialGrid {
    #[new]
    #[pyo3(signature = (x_min, x_max, n_cells, boundary = "periodic"))]
    fn new(x_min: f64, x_max: f64, n_cells: usize, boundary: &str) -> PyResult<Self> {
        let boundary = match boundary {
            "periodic" => grid::Boundary::Periodic,
            "zero-inflow" => grid::Boundary::ZeroInflow,
            other => {
                return Err(PyValueError::new_err(format!(
                    "boundary must be periodic or zero-inflow, got '{other}'"
                )))
            }
        };
        Ok(Self {
            inner: grid::SpatialGrid::new(x_min, x_max, n_cells, boundary).map_err(err)?,
        })
    }

    #[getter]
    fn dx(&self) -> f64 {
        self.inner.dx()
    }

    #[getter]
    fn centers(&self) -> Vec<f64> {
        self.inner.centers()
    }

    fn integrate(&self, field: Vec<f64>) -> PyResult<f64> {
        self.inner.integrate(&field).map_err(err)
    }
}

/// Bounded monotone receptor response `saturation * S / (K_D + S)`.
#[pyclass]
#[derive(Clone)]
struct ReceptorLaw {
    inner: signal::ReceptorLaw,
}

#[pymethods]
impl ReceptorLaw {
    #[new]
    #[pyo3(signature = (kd, saturation = 1.0))]
    fn new(kd: f64, saturation: f64) -> PyResult<Self> {
        Ok(Self {
            inner: signal::ReceptorLaw::new(kd, saturation).map_err(err)?,
        })
    }

    fn eval(&self, s: f64) -> PyResult<f64> {
        self.inner.eval(s).map_err(err)
    }

    #[getter]
    fn sup(&self) -> f64 {
        self.inner.sup()
    }
}

/// Turning-rate kernel evaluated on the post-turn velocity.
#[pyclass]
#[derive(Clone)]
struct TurningKernel {
    inner: signal::TurningKernel,
}

#[pymethods]
impl TurningKernel {
    #[staticmethod]
    fn constant(rate: f64) -> PyResult<Self> {
        Ok(Self {
            inner: signal::TurningKernel::constant(rate).map_err(err)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (rate, sensitivity, growth_c0 = 4.0))]
    fn linear_temporal(rate: f64, sensitivity: f64, growth_c0: f64) -> PyResult<Self> {
        Ok(Self {
            inner: signal::TurningKernel::new(
                signal::KernelKind::LinearTemporal { rate, sensitivity },
                growth_c0,
            )
            .map_err(err)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (alpha, beta, steepness, growth_c0 = 4.0))]
    fn monotone_phi(alpha: f64, beta: f64, steepness: f64, growth_c0: f64) -> PyResult<Self> {
        Ok(Self {
            inner: signal::TurningKernel::new(
                signal::KernelKind::BoundedResponse {
                    alpha,
                    beta,
                    steepness,
                },
                growth_c0,
            )
            .map_err(err)?,
        })
    }

    /// Returns `(rate, clamped)`.
    fn eval(&self, s_t: f64, s_x: f64, v: f64) -> (f64, bool) {
        self.inner.eval(s_t, s_x, v)
    }
}

/// Signal degradation `S (1 + S)`.
#[pyfunction]
fn degradation(s: f64) -> PyResult<f64> {
    signal::degradation(s).map_err(err)
}

/// Generalized Gronwall envelope from uniformly sampled coefficients.
#[pyfunction]
fn gronwall_envelope(y0: f64, a: Vec<f64>, b: Vec<f64>, t: f64) -> PyResult<f64> {
    monitors::gronwall_envelope(&monitors::GronwallInputs { y0, a, b }, t).map_err(err)
}

/// Grid quadrature of the damped heat kernel; equals exp(-t) on wide grids.
#[pyfunction]
fn heat_kernel_l1(t: f64, grid: &SpatialGrid) -> PyResult<f64> {
    fields::heat_kernel_l1(t, &grid.inner).map_err(err)
}

/// Normalized equilibrium of the turning operator at a frozen signal.
/// Returns `(distribution, drift)`.
#[pyfunction]
#[pyo3(signature = (kernel, grid, s = 0.0, s_x = 0.0, s_t = 0.0))]
fn equilibrium(
    kernel: &TurningKernel,
    grid: &VelocityGrid,
    s: f64,
    s_x: f64,
    s_t: f64,
) -> PyResult<(Vec<f64>, f64)> {
    let op = hydro::TurningOperator::assemble(
        &kernel.inner,
        signal::SignalSample { s, s_x, s_t },
        &grid.inner,
    )
    .map_err(err)?;
    let eq = hydro::compute_equilibrium(&op).map_err(err)?;
    Ok((eq.distribution, eq.drift))
}

/// Parses a configuration (the `key = value` text format), runs the coupled
/// system, optionally writing the CSV/JSON artifacts, and returns the run
/// summary as a JSON string.
#[pyfunction]
#[pyo3(signature = (config_text, out_dir = None))]
fn run_simulation(config_text: &str, out_dir: Option<String>) -> PyResult<String> {
    let cfg = SimConfig::parse(config_text).map_err(err)?;
    let out = out_dir.map(PathBuf::from);
    let output = sim::run_coupled(&cfg, out.as_deref()).map_err(err)?;
    serde_json::to_string(&output.summary).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Runs the epsilon sweep described by a configuration and returns the
/// verdict (points, slope, pilot metadata) as a JSON string.
#[pyfunction]
fn limit_sweep(config_text: &str) -> PyResult<String> {
    let cfg = SimConfig::parse(config_text).map_err(err)?;
    cfg.validate().map_err(err)?;
    let phase = cfg.build_phase_grid().map_err(err)?;
    let rho_profile = cfg.f0.sample(&phase.space);
    let sweep_cfg = hydro::SweepConfig {
        epsilons: cfg.epsilons.clone(),
        kernel: cfg.kernel,
        frozen_signal: signal::SignalSample {
            s: cfg.freeze_s,
            s_x: cfg.freeze_sx,
            s_t: cfg.freeze_st,
        },
        t_end: cfg.t_end,
        splitting: cfg.splitting,
        cfl: cfg.cfl,
    };
    let result = hydro::convergence_sweep(&sweep_cfg, &rho_profile, &phase).map_err(err)?;
    serde_json::to_string(&result).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Scaled kinetic relaxation check: advances well-prepared data
/// `rho(x) F(v)` and returns the max deviation from it at `t_end`.
#[pyfunction]
fn equilibrium_deviation(
    kernel: &TurningKernel,
    space: &SpatialGrid,
    velocity: &VelocityGrid,
    rho: Vec<f64>,
    epsilon: f64,
    t_end: f64,
) -> PyResult<f64> {
    let phase = grid::PhaseGrid::new(space.inner.clone(), velocity.inner.clone());
    let op = hydro::TurningOperator::assemble(
        &kernel.inner,
        signal::SignalSample {
            s: 0.0,
            s_x: 0.0,
            s_t: 0.0,
        },
        &velocity.inner,
    )
    .map_err(err)?;
    let eq = hydro::compute_equilibrium(&op).map_err(err)?;
    let nv = velocity.inner.len();
    let mut f = vec![0.0; rho.len() * nv];
    for (cell, &r) in rho.iter().enumerate() {
        for i in 0..nv {
            f[cell * nv + i] = r * eq.distribution[i];
        }
    }
    let initial = runtumble::kinetic::KineticState::new(f, 0.0, &phase).map_err(err)?;
    let out = hydro::run_scaled(
        &initial,
        &op,
        epsilon,
        t_end,
        &phase,
        Splitting::Strang,
        0.9,
    )
    .map_err(err)?;
    Ok(out
        .f
        .iter()
        .zip(&initial.f)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

#[pymodule]
fn runtumble_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<VelocityGrid>()?;
    m.add_class::<SpatialGrid>()?;
    m.add_class::<ReceptorLaw>()?;
    m.add_class::<TurningKernel>()?;
    m.add_function(wrap_pyfunction!(degradation, m)?)?;
    m.add_function(wrap_pyfunction!(gronwall_envelope, m)?)?;
    m.add_function(wrap_pyfunction!(heat_kernel_l1, m)?)?;
    m.add_function(wrap_pyfunction!(equilibrium, m)?)?;
    m.add_function(wrap_pyfunction!(run_simulation, m)?)?;
    m.add_function(wrap_pyfunction!(limit_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(equilibrium_deviation, m)?)?;
    Ok(())
}
