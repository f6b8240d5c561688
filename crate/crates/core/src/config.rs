//! Run configuration: a flat, human-readable `key = value` format with
//! canonical serialization, so a run summary's config echo re-parses to an
//! equivalent configuration.

use crate::error::{Result, SimError};
use crate::grid::{Boundary, PhaseGrid, SpatialGrid, VelocityGrid};
use crate::kinetic::Splitting;
use crate::signal::{KernelKind, ProductionMode, ReceptorLaw, TurningKernel};
use std::collections::BTreeMap;
use std::path::Path;

/// Named analytic family for an initial profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProfileSpec {
    Constant {
        value: f64,
    },
    Gaussian {
        amplitude: f64,
        center: f64,
        width: f64,
    },
    Step {
        left: f64,
        right: f64,
        edge: f64,
    },
}

impl ProfileSpec {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            ProfileSpec::Constant { value } => value,
            ProfileSpec::Gaussian {
                amplitude,
                center,
                width,
            } => amplitude * (-(x - center) * (x - center) / (2.0 * width * width)).exp(),
            ProfileSpec::Step { left, right, edge } => {
                if x < edge {
                    left
                } else {
                    right
                }
            }
        }
    }

    pub fn sample(&self, grid: &SpatialGrid) -> Vec<f64> {
        grid.centers().iter().map(|&x| self.eval(x)).collect()
    }

    pub fn is_nonnegative(&self) -> bool {
        match *self {
            ProfileSpec::Constant { value } => value >= 0.0,
            ProfileSpec::Gaussian { amplitude, .. } => amplitude >= 0.0,
            ProfileSpec::Step { left, right, .. } => left >= 0.0 && right >= 0.0,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let (name, rest) = text.split_once(':').ok_or_else(|| {
            SimError::Config(format!("profile '{text}' needs the form name:params"))
        })?;
        let params: Vec<f64> = rest
            .split(',')
            .map(|p| {
                p.trim().parse::<f64>().map_err(|_| {
                    SimError::Config(format!("bad profile parameter '{p}' in '{text}'"))
                })
            })
            .collect::<Result<_>>()?;
        match (name.trim(), params.as_slice()) {
            ("constant", [value]) => Ok(ProfileSpec::Constant { value: *value }),
            ("gaussian", [amplitude, center, width]) => {
                if !(*width > 0.0) {
                    return Err(SimError::Config(format!(
                        "gaussian profile needs a positive width, got {width}"
                    )));
                }
                Ok(ProfileSpec::Gaussian {
                    amplitude: *amplitude,
                    center: *center,
                    width: *width,
                })
            }
            ("step", [left, right, edge]) => Ok(ProfileSpec::Step {
                left: *left,
                right: *right,
                edge: *edge,
            }),
            _ => Err(SimError::Config(format!(
                "unknown profile '{text}': expected constant:v, gaussian:amp,center,width \
                 or step:left,right,edge"
            ))),
        }
    }

    pub fn format(&self) -> String {
        match *self {
            ProfileSpec::Constant { value } => format!("constant:{value}"),
            ProfileSpec::Gaussian {
                amplitude,
                center,
                width,
            } => format!("gaussian:{amplitude},{center},{width}"),
            ProfileSpec::Step { left, right, edge } => format!("step:{left},{right},{edge}"),
        }
    }
}

/// Time-step selection: a fixed upper bound, or the per-step minimum of the
/// transport, collision-positivity and signal-positivity bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DtPolicy {
    Auto,
    Fixed(f64),
}

/// Slack coefficient for the envelope monitors: a number, or estimated from
/// a short step-refinement pilot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KappaPolicy {
    Auto,
    Fixed(f64),
}

/// Complete description of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub n_cells: usize,
    pub boundary: Boundary,
    pub nv: usize,
    pub v_max: f64,
    pub kernel: TurningKernel,
    pub receptor: ReceptorLaw,
    pub production: ProductionMode,
    pub f0: ProfileSpec,
    pub z0: ProfileSpec,
    pub s0: ProfileSpec,
    pub splitting: Splitting,
    pub dt: DtPolicy,
    pub t_end: f64,
    pub snapshots: usize,
    pub cfl: f64,
    pub monitors: bool,
    pub kappa: KappaPolicy,
    pub epsilons: Vec<f64>,
    pub freeze_s: f64,
    pub freeze_sx: f64,
    pub freeze_st: f64,
    pub out_dir: String,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            x_min: -4.0,
            x_max: 4.0,
            n_cells: 64,
            boundary: Boundary::Periodic,
            nv: 16,
            v_max: 1.0,
            kernel: TurningKernel::new(
                KernelKind::LinearTemporal {
                    rate: 1.0,
                    sensitivity: 0.25,
                },
                4.0,
            )
            .expect("default kernel is valid"),
            receptor: ReceptorLaw::new(1.0, 1.0).expect("default receptor is valid"),
            production: ProductionMode::PositivePart,
            f0: ProfileSpec::Gaussian {
                amplitude: 0.8,
                center: 0.0,
                width: 0.8,
            },
            z0: ProfileSpec::Constant { value: 0.0 },
            s0: ProfileSpec::Gaussian {
                amplitude: 0.2,
                center: 0.0,
                width: 1.0,
            },
            splitting: Splitting::Strang,
            dt: DtPolicy::Auto,
            t_end: 2.0,
            snapshots: 8,
            cfl: 0.9,
            monitors: true,
            kappa: KappaPolicy::Auto,
            epsilons: vec![0.2, 0.1, 0.05, 0.025],
            freeze_s: 0.0,
            freeze_sx: 0.0,
            freeze_st: 0.0,
            out_dir: "out".into(),
        }
    }
}

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    value
        .parse::<f64>()
        .map_err(|_| SimError::Config(format!("key '{key}': cannot parse '{value}' as a number")))
}

fn parse_usize(key: &str, value: &str) -> Result<usize> {
    value
        .parse::<usize>()
        .map_err(|_| SimError::Config(format!("key '{key}': cannot parse '{value}' as a count")))
}

impl SimConfig {
    /// Parses the flat key-value text format. Unknown keys are rejected so
    /// typos surface instead of silently using defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = SimConfig::default();
        // kernel parameters are gathered first, then assembled
        let mut kernel_kind = "linear-temporal".to_string();
        let mut lambda0 = 1.0;
        let mut sigma = 0.25;
        let mut growth_c0 = 4.0;
        let mut phi_alpha = 0.5;
        let mut phi_beta = 2.0;
        let mut phi_steepness = 1.0;
        let mut kd = 1.0;
        let mut saturation = 1.0;

        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                SimError::Config(format!("line {}: expected 'key = value'", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            match key {
                "x_min" => cfg.x_min = parse_f64(key, value)?,
                "x_max" => cfg.x_max = parse_f64(key, value)?,
                "n_cells" => cfg.n_cells = parse_usize(key, value)?,
                "boundary" => {
                    cfg.boundary = match value {
                        "periodic" => Boundary::Periodic,
                        "zero-inflow" => Boundary::ZeroInflow,
                        _ => {
                            return Err(SimError::Config(format!(
                                "boundary must be periodic or zero-inflow, got '{value}'"
                            )))
                        }
                    }
                }
                "nv" => cfg.nv = parse_usize(key, value)?,
                "v_max" => cfg.v_max = parse_f64(key, value)?,
                "kernel" => kernel_kind = value.to_string(),
                "lambda0" => lambda0 = parse_f64(key, value)?,
                "sigma" => sigma = parse_f64(key, value)?,
                "growth_c0" => growth_c0 = parse_f64(key, value)?,
                "phi_alpha" => phi_alpha = parse_f64(key, value)?,
                "phi_beta" => phi_beta = parse_f64(key, value)?,
                "phi_steepness" => phi_steepness = parse_f64(key, value)?,
                "k_d" => kd = parse_f64(key, value)?,
                "saturation" => saturation = parse_f64(key, value)?,
                "production" => {
                    cfg.production = match value {
                        "signed" => ProductionMode::Signed,
                        "positive-part" => ProductionMode::PositivePart,
                        _ => {
                            return Err(SimError::Config(format!(
                                "production must be signed or positive-part, got '{value}'"
                            )))
                        }
                    }
                }
                "f0" => cfg.f0 = ProfileSpec::parse(value)?,
                "z0" => cfg.z0 = ProfileSpec::parse(value)?,
                "s0" => cfg.s0 = ProfileSpec::parse(value)?,
                "splitting" => {
                    cfg.splitting = match value {
                        "lie" => Splitting::Lie,
                        "strang" => Splitting::Strang,
                        _ => {
                            return Err(SimError::Config(format!(
                                "splitting must be lie or strang, got '{value}'"
                            )))
                        }
                    }
                }
                "dt" => {
                    cfg.dt = if value == "auto" {
                        DtPolicy::Auto
                    } else {
                        DtPolicy::Fixed(parse_f64(key, value)?)
                    }
                }
                "t_end" => cfg.t_end = parse_f64(key, value)?,
                "snapshots" => cfg.snapshots = parse_usize(key, value)?,
                "cfl" => cfg.cfl = parse_f64(key, value)?,
                "monitors" => {
                    cfg.monitors = match value {
                        "on" => true,
                        "off" => false,
                        _ => {
                            return Err(SimError::Config(format!(
                                "monitors must be on or off, got '{value}'"
                            )))
                        }
                    }
                }
                "kappa" => {
                    cfg.kappa = if value == "auto" {
                        KappaPolicy::Auto
                    } else {
                        KappaPolicy::Fixed(parse_f64(key, value)?)
                    }
                }
                "epsilons" => {
                    cfg.epsilons = value
                        .split(',')
                        .map(|p| parse_f64(key, p.trim()))
                        .collect::<Result<_>>()?;
                }
                "freeze_s" => cfg.freeze_s = parse_f64(key, value)?,
                "freeze_sx" => cfg.freeze_sx = parse_f64(key, value)?,
                "freeze_st" => cfg.freeze_st = parse_f64(key, value)?,
                "out_dir" => cfg.out_dir = value.to_string(),
                _ => {
                    return Err(SimError::Config(format!(
                        "unknown configuration key '{key}'"
                    )))
                }
            }
        }

        let kind = match kernel_kind.as_str() {
            "constant" => KernelKind::Constant { rate: lambda0 },
            "linear-temporal" => KernelKind::LinearTemporal {
                rate: lambda0,
                sensitivity: sigma,
            },
            "monotone-phi" => KernelKind::BoundedResponse {
                alpha: phi_alpha,
                beta: phi_beta,
                steepness: phi_steepness,
            },
            _ => {
                return Err(SimError::Config(format!(
                    "kernel must be constant, linear-temporal or monotone-phi, got '{kernel_kind}'"
                )))
            }
        };
        cfg.kernel = TurningKernel::new(kind, growth_c0)?;
        cfg.receptor = ReceptorLaw::new(kd, saturation)?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            SimError::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::parse(&text)
    }

    /// Canonical key-value form; parsing it back yields an equal config.
    pub fn to_key_values(&self) -> BTreeMap<String, String> {
        let mut map = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            map.insert(k.to_string(), v);
        };
        put("x_min", format!("{}", self.x_min));
        put("x_max", format!("{}", self.x_max));
        put("n_cells", format!("{}", self.n_cells));
        put(
            "boundary",
            match self.boundary {
                Boundary::Periodic => "periodic".into(),
                Boundary::ZeroInflow => "zero-inflow".into(),
            },
        );
        put("nv", format!("{}", self.nv));
        put("v_max", format!("{}", self.v_max));
        match self.kernel.kind {
            KernelKind::Constant { rate } => {
                put("kernel", "constant".into());
                put("lambda0", format!("{rate}"));
            }
            KernelKind::LinearTemporal { rate, sensitivity } => {
                put("kernel", "linear-temporal".into());
                put("lambda0", format!("{rate}"));
                put("sigma", format!("{sensitivity}"));
            }
            KernelKind::BoundedResponse {
                alpha,
                beta,
                steepness,
            } => {
                put("kernel", "monotone-phi".into());
                put("phi_alpha", format!("{alpha}"));
                put("phi_beta", format!("{beta}"));
                put("phi_steepness", format!("{steepness}"));
            }
        }
        put("growth_c0", format!("{}", self.kernel.growth_c0));
        put("k_d", format!("{}", self.receptor.kd));
        put("saturation", format!("{}", self.receptor.saturation));
        put(
            "production",
            match self.production {
                ProductionMode::Signed => "signed".into(),
                ProductionMode::PositivePart => "positive-part".into(),
            },
        );
        put("f0", self.f0.format());
        put("z0", self.z0.format());
        put("s0", self.s0.format());
        put(
            "splitting",
            match self.splitting {
                Splitting::Lie => "lie".into(),
                Splitting::Strang => "strang".into(),
            },
        );
        put(
            "dt",
            match self.dt {
                DtPolicy::Auto => "auto".into(),
                DtPolicy::Fixed(v) => format!("{v}"),
            },
        );
        put("t_end", format!("{}", self.t_end));
        put("snapshots", format!("{}", self.snapshots));
        put("cfl", format!("{}", self.cfl));
        put("monitors", if self.monitors { "on" } else { "off" }.into());
        put(
            "kappa",
            match self.kappa {
                KappaPolicy::Auto => "auto".into(),
                KappaPolicy::Fixed(v) => format!("{v}"),
            },
        );
        put(
            "epsilons",
            self.epsilons
                .iter()
                .map(|e| format!("{e}"))
                .collect::<Vec<_>>()
                .join(","),
        );
        put("freeze_s", format!("{}", self.freeze_s));
        put("freeze_sx", format!("{}", self.freeze_sx));
        put("freeze_st", format!("{}", self.freeze_st));
        put("out_dir", self.out_dir.clone());
        map
    }

    /// Renders the canonical text form.
    pub fn to_text(&self) -> String {
        self.to_key_values()
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    /// Builds the grids, checking all structural invariants.
    pub fn build_phase_grid(&self) -> Result<PhaseGrid> {
        let space = SpatialGrid::new(self.x_min, self.x_max, self.n_cells, self.boundary)?;
        let velocity = VelocityGrid::midpoint(self.nv, self.v_max)?;
        Ok(PhaseGrid::new(space, velocity))
    }

    /// Full validation: grids, nonnegative data, and stepping parameters.
    pub fn validate(&self) -> Result<()> {
        self.build_phase_grid()?;
        if !self.f0.is_nonnegative() || !self.z0.is_nonnegative() || !self.s0.is_nonnegative() {
            return Err(SimError::Config(
                "initial profiles must be nonnegative".into(),
            ));
        }
        if !(self.t_end > 0.0) {
            return Err(SimError::Config(format!(
                "t_end must be positive, got {}",
                self.t_end
            )));
        }
        if self.snapshots == 0 {
            return Err(SimError::Config("snapshots must be at least 1".into()));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(SimError::Config(format!(
                "cfl must lie in (0, 1], got {}",
                self.cfl
            )));
        }
        if let DtPolicy::Fixed(dt) = self.dt {
            if !(dt > 0.0) {
                return Err(SimError::Config(format!(
                    "fixed dt must be positive, got {dt}"
                )));
            }
        }
        if let KappaPolicy::Fixed(k) = self.kappa {
            if k < 0.0 {
                return Err(SimError::Config(format!(
                    "kappa must be nonnegative, got {k}"
                )));
            }
        }
        if self.epsilons.windows(2).any(|p| !(p[1] < p[0]))
            || self.epsilons.iter().any(|&e| !(e > 0.0))
        {
            return Err(SimError::Config(
                "epsilons must be positive and strictly decreasing".into(),
            ));
        }
        Ok(())
    }
}
