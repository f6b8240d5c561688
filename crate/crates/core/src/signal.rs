//! Biochemical model functions and the turning-kernel plug-in layer.
//!
//! The receptor law `g(S) = saturation * S / (K_D + S)` models the occupied
//! receptor fraction, `psi(S) = S (1 + S)` the signal degradation, and the
//! production term couples the internal state `z` to the signal source.
//!
//! Turning kernels give the rate density of reorienting into a velocity `v`
//! given the local temporal and spatial signal gradients. Every kernel kind
//! evaluates to a nonnegative rate: the linear kind clamps negative raw
//! values to zero and reports the clamp so callers can count the events.

use crate::error::{Result, SimError};
use serde::{Deserialize, Serialize};

/// Bounded monotone receptor response `g(S) = saturation * S / (K_D + S)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReceptorLaw {
    /// Dissociation constant (half-saturation concentration).
    pub kd: f64,
    /// Value the response saturates toward; `g` stays in `[0, saturation)`.
    pub saturation: f64,
}

impl ReceptorLaw {
    pub fn new(kd: f64, saturation: f64) -> Result<Self> {
        if !(kd > 0.0) {
            return Err(SimError::Config(format!(
                "dissociation constant must be positive, got {kd}"
            )));
        }
        if !(saturation >= 0.0) {
            return Err(SimError::Config(format!(
                "receptor saturation must be nonnegative, got {saturation}"
            )));
        }
        Ok(Self { kd, saturation })
    }

    /// Receptor response at concentration `s >= 0`.
    pub fn eval(&self, s: f64) -> Result<f64> {
        if s < 0.0 {
            return Err(SimError::Domain(format!(
                "receptor law takes nonnegative concentrations, got S = {s}"
            )));
        }
        Ok(self.saturation * s / (self.kd + s))
    }

    /// Closed-form supremum of the response, used by the bound monitors.
    pub fn sup(&self) -> f64 {
        self.saturation
    }
}

/// Signal degradation `psi(S) = S (1 + S)` for `s >= 0`.
pub fn degradation(s: f64) -> Result<f64> {
    if s < 0.0 {
        return Err(SimError::Domain(format!(
            "degradation takes nonnegative concentrations, got S = {s}"
        )));
    }
    Ok(s * (1.0 + s))
}

/// Whether the signal production uses the signed difference or its positive
/// part.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProductionMode {
    /// `(g(S) - z) * rho`, the form used by the well-posedness estimates.
    Signed,
    /// `max(g(S) - z, 0) * rho`, the modeling form. Default.
    PositivePart,
}

/// Signal production by the cell population.
pub fn production(
    s: f64,
    z: f64,
    rho: f64,
    mode: ProductionMode,
    law: &ReceptorLaw,
) -> Result<f64> {
    let g = law.eval(s)?;
    Ok(match mode {
        ProductionMode::Signed => (g - z) * rho,
        ProductionMode::PositivePart => (g - z).max(0.0) * rho,
    })
}

/// The kernel families the simulator understands. All evaluate on the
/// post-turn velocity, so the induced jump density integrates to one over
/// the destination set by construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum KernelKind {
    /// Signal-blind constant rate.
    Constant { rate: f64 },
    /// `rate + sensitivity * (S_t + v S_x)`, clamped at zero.
    LinearTemporal { rate: f64, sensitivity: f64 },
    /// Smooth decreasing response bounded in `[alpha, beta]`:
    /// `alpha + (beta - alpha) / (1 + exp(steepness * (S_t + v S_x)))`.
    BoundedResponse {
        alpha: f64,
        beta: f64,
        steepness: f64,
    },
}

/// A turning-kernel description together with the growth constant used when
/// auditing the kernel against its structural bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurningKernel {
    pub kind: KernelKind,
    /// Constant `C0` of the growth bound
    /// `0 <= T <= C0 (1 + |S| + |S_x| + |S_t|)`.
    pub growth_c0: f64,
}

impl TurningKernel {
    pub fn new(kind: KernelKind, growth_c0: f64) -> Result<Self> {
        match kind {
            KernelKind::Constant { rate } => {
                if !(rate >= 0.0) {
                    return Err(SimError::Config(format!(
                        "constant kernel rate must be nonnegative, got {rate}"
                    )));
                }
            }
            KernelKind::LinearTemporal { rate, .. } => {
                if !(rate >= 0.0) {
                    return Err(SimError::Config(format!(
                        "linear kernel base rate must be nonnegative, got {rate}"
                    )));
                }
            }
            KernelKind::BoundedResponse { alpha, beta, .. } => {
                if !(alpha > 0.0 && alpha <= beta) {
                    return Err(SimError::Config(format!(
                        "bounded response needs 0 < alpha <= beta, got alpha = {alpha}, beta = {beta}"
                    )));
                }
            }
        }
        if !(growth_c0 > 0.0) {
            return Err(SimError::Config(format!(
                "growth constant must be positive, got {growth_c0}"
            )));
        }
        Ok(Self { kind, growth_c0 })
    }

    pub fn constant(rate: f64) -> Result<Self> {
        Self::new(KernelKind::Constant { rate }, rate.max(1.0))
    }

    /// Turning rate for reorienting into velocity `v` under the given signal
    /// gradients. The boolean reports whether the raw value was negative and
    /// had to be clamped to zero.
    pub fn eval(&self, s_t: f64, s_x: f64, v: f64) -> (f64, bool) {
        match self.kind {
            KernelKind::Constant { rate } => (rate, false),
            KernelKind::LinearTemporal { rate, sensitivity } => {
                let raw = rate + sensitivity * (s_t + v * s_x);
                if raw < 0.0 {
                    (0.0, true)
                } else {
                    (raw, false)
                }
            }
            KernelKind::BoundedResponse {
                alpha,
                beta,
                steepness,
            } => {
                let y = s_t + v * s_x;
                (
                    alpha + (beta - alpha) / (1.0 + (steepness * y).exp()),
                    false,
                )
            }
        }
    }
}

/// One signal sample at a point: value and its two gradients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalSample {
    pub s: f64,
    pub s_x: f64,
    pub s_t: f64,
}

/// What went wrong in a kernel bounds audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BoundsViolation {
    /// `T` exceeded `C0 (1 + |S| + |S_x| + |S_t|)` at a sample.
    UpperBound {
        sample: usize,
        v: f64,
        rate: f64,
        bound: f64,
    },
    /// Finite differencing suggests the kernel is not Lipschitz in the
    /// signal arguments.
    NotLipschitz {
        sample: usize,
        v: f64,
        quotient_coarse: f64,
        quotient_fine: f64,
    },
}

/// Result of auditing a kernel against its structural growth bound.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelBoundsReport {
    pub violations: Vec<BoundsViolation>,
    /// Largest finite-difference quotient observed over all samples,
    /// velocities and signal arguments; an empirical Lipschitz constant.
    pub lipschitz_estimate: f64,
    pub samples_checked: usize,
}

impl KernelBoundsReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Audits `0 <= T <= C0 (1 + max|S| + max|S_x| + max|S_t|)` over the sample
/// set and probes Lipschitz continuity by finite differencing each signal
/// argument at two step sizes. Failures become report entries, never errors.
pub fn check_growth_bounds(
    kernel: &TurningKernel,
    samples: &[SignalSample],
    velocities: &[f64],
) -> Result<KernelBoundsReport> {
    if samples.is_empty() {
        return Err(SimError::Contract(
            "kernel bounds audit needs at least one signal sample".into(),
        ));
    }
    let sup_s = samples.iter().map(|p| p.s.abs()).fold(0.0, f64::max);
    let sup_sx = samples.iter().map(|p| p.s_x.abs()).fold(0.0, f64::max);
    let sup_st = samples.iter().map(|p| p.s_t.abs()).fold(0.0, f64::max);
    let bound = kernel.growth_c0 * (1.0 + sup_s + sup_sx + sup_st);

    let mut violations = Vec::new();
    let mut lipschitz_estimate: f64 = 0.0;
    const H_COARSE: f64 = 1e-4;
    const H_FINE: f64 = 1e-6;

    for (k, p) in samples.iter().enumerate() {
        for &v in velocities {
            let (rate, _) = kernel.eval(p.s_t, p.s_x, v);
            if rate > bound + 1e-12 * bound.max(1.0) {
                violations.push(BoundsViolation::UpperBound {
                    sample: k,
                    v,
                    rate,
                    bound,
                });
            }
            // difference quotients in (s_t, s_x); the kernel kinds do not
            // read S itself, but a quotient of zero in that slot is checked
            // for free through s_x below when S_x shifts the argument.
            for arg in 0..2 {
                let quot = |h: f64| {
                    let (st, sx) = match arg {
                        0 => (p.s_t + h, p.s_x),
                        _ => (p.s_t, p.s_x + h),
                    };
                    let (shifted, _) = kernel.eval(st, sx, v);
                    (shifted - rate).abs() / h
                };
                let coarse = quot(H_COARSE);
                let fine = quot(H_FINE);
                lipschitz_estimate = lipschitz_estimate.max(coarse).max(fine);
                // a jump discontinuity makes the quotient scale like 1/h
                if fine > 10.0 * coarse.max(1.0) + 1.0 {
                    violations.push(BoundsViolation::NotLipschitz {
                        sample: k,
                        v,
                        quotient_coarse: coarse,
                        quotient_fine: fine,
                    });
                }
            }
        }
    }

    Ok(KernelBoundsReport {
        violations,
        lipschitz_estimate,
        samples_checked: samples.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::VelocityGrid;

    fn law(kd: f64, sat: f64) -> ReceptorLaw {
        ReceptorLaw::new(kd, sat).unwrap()
    }

    #[test]
    fn receptor_values() {
        let g = law(1.0, 1.0);
        assert_eq!(g.eval(0.0).unwrap(), 0.0);
        assert!((g.eval(1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((g.eval(9.0).unwrap() - 0.9).abs() < 1e-15);
    }

    #[test]
    fn receptor_rejects_negative_concentration() {
        assert!(matches!(law(1.0, 1.0).eval(-0.1), Err(SimError::Domain(_))));
    }

    #[test]
    fn receptor_is_monotone_and_bounded() {
        let g = law(0.7, 1.3);
        let mut prev = -1.0;
        for k in 0..200 {
            let s = 0.05 * k as f64;
            let gv = g.eval(s).unwrap();
            assert!(gv >= prev);
            assert!(gv < g.sup() + 1e-15);
            prev = gv;
        }
    }

    #[test]
    fn degradation_values() {
        assert_eq!(degradation(0.0).unwrap(), 0.0);
        assert!((degradation(1.0).unwrap() - 2.0).abs() < 1e-15);
        assert!((degradation(0.5).unwrap() - 0.75).abs() < 1e-15);
        assert!(degradation(-1.0).is_err());
    }

    #[test]
    fn production_modes() {
        let g = law(1.0, 1.0);
        // g(S) = z makes both modes vanish
        let p = production(1.0, 0.5, 2.0, ProductionMode::Signed, &g).unwrap();
        assert!(p.abs() < 1e-15);
        // clamped negative part
        let p = production(0.0, 1.0, 3.0, ProductionMode::PositivePart, &g).unwrap();
        assert_eq!(p, 0.0);
        // signed keeps the sign
        let p = production(0.0, 1.0, 3.0, ProductionMode::Signed, &g).unwrap();
        assert!((p + 3.0).abs() < 1e-15);
    }

    #[test]
    fn linear_kernel_example_value() {
        let k = TurningKernel::new(
            KernelKind::LinearTemporal {
                rate: 1.0,
                sensitivity: 0.5,
            },
            4.0,
        )
        .unwrap();
        let (rate, clamped) = k.eval(0.2, 0.1, 1.0);
        assert!((rate - 1.15).abs() < 1e-15);
        assert!(!clamped);
    }

    #[test]
    fn constant_kernel_ignores_signal() {
        let k = TurningKernel::constant(2.0).unwrap();
        for (st, sx, v) in [(0.0, 0.0, 0.5), (5.0, -3.0, -1.0), (-9.0, 2.0, 0.1)] {
            let (rate, clamped) = k.eval(st, sx, v);
            assert_eq!(rate, 2.0);
            assert!(!clamped);
        }
    }

    #[test]
    fn negative_raw_rate_is_clamped_and_flagged() {
        let k = TurningKernel::new(
            KernelKind::LinearTemporal {
                rate: 0.1,
                sensitivity: 1.0,
            },
            4.0,
        )
        .unwrap();
        // raw value 0.1 + (-1 + 0.25 * 0) = -0.9
        let (rate, clamped) = k.eval(-1.0, 0.0, 0.25);
        assert_eq!(rate, 0.0);
        assert!(clamped);
    }

    #[test]
    fn kernel_rate_is_never_negative() {
        let kernels = [
            TurningKernel::constant(1.5).unwrap(),
            TurningKernel::new(
                KernelKind::LinearTemporal {
                    rate: 0.2,
                    sensitivity: 2.0,
                },
                4.0,
            )
            .unwrap(),
            TurningKernel::new(
                KernelKind::BoundedResponse {
                    alpha: 0.5,
                    beta: 2.0,
                    steepness: 1.0,
                },
                2.0,
            )
            .unwrap(),
        ];
        for k in kernels {
            for st in [-10.0, -1.0, 0.0, 3.0] {
                for sx in [-5.0, 0.0, 5.0] {
                    for v in [-1.0, -0.2, 0.7] {
                        assert!(k.eval(st, sx, v).0 >= 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn bounded_response_respects_its_bounds() {
        let k = TurningKernel::new(
            KernelKind::BoundedResponse {
                alpha: 0.5,
                beta: 2.0,
                steepness: 1.0,
            },
            2.0,
        )
        .unwrap();
        let mut prev = f64::INFINITY;
        for i in -50..=50 {
            let y = i as f64 * 0.2;
            let (rate, _) = k.eval(y, 0.0, 1.0);
            assert!((0.5..=2.0).contains(&rate));
            assert!(rate <= prev + 1e-12, "response must decrease");
            prev = rate;
        }
    }

    #[test]
    fn induced_jump_density_is_normalized() {
        // K(v', v) = T(v', v) / lambda(v') integrates to one in v whenever
        // lambda(v') > 0; with destination-only kernels lambda is a single
        // weighted sum over destinations.
        let grid = VelocityGrid::midpoint(16, 1.0).unwrap();
        let kernels = [
            TurningKernel::constant(0.8).unwrap(),
            TurningKernel::new(
                KernelKind::LinearTemporal {
                    rate: 1.0,
                    sensitivity: 0.5,
                },
                4.0,
            )
            .unwrap(),
            TurningKernel::new(
                KernelKind::BoundedResponse {
                    alpha: 0.5,
                    beta: 2.0,
                    steepness: 0.7,
                },
                2.0,
            )
            .unwrap(),
        ];
        for k in kernels {
            for (st, sx) in [(0.0, 0.0), (0.3, -0.4), (-0.2, 0.6)] {
                let rates: Vec<f64> = grid.nodes().iter().map(|&v| k.eval(st, sx, v).0).collect();
                let lambda = grid.integrate(&rates).unwrap();
                if lambda > 0.0 {
                    let density: Vec<f64> = rates.iter().map(|t| t / lambda).collect();
                    assert!((grid.integrate(&density).unwrap() - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn bounds_audit_constant_kernel_passes() {
        let k = TurningKernel::new(KernelKind::Constant { rate: 1.0 }, 1.0).unwrap();
        let samples = vec![
            SignalSample {
                s: 0.0,
                s_x: 0.0,
                s_t: 0.0,
            },
            SignalSample {
                s: 2.0,
                s_x: -1.0,
                s_t: 0.5,
            },
        ];
        let report = check_growth_bounds(&k, &samples, &[-1.0, 0.5]).unwrap();
        assert!(report.passed());
    }

    #[test]
    fn bounds_audit_flags_small_growth_constant() {
        // T = rate = 2 > C0 * (1 + 0) = 0.5 at zero signal
        let k = TurningKernel::new(
            KernelKind::LinearTemporal {
                rate: 2.0,
                sensitivity: 1.0,
            },
            0.5,
        )
        .unwrap();
        let samples = vec![SignalSample {
            s: 0.0,
            s_x: 0.0,
            s_t: 0.0,
        }];
        let report = check_growth_bounds(&k, &samples, &[0.5]).unwrap();
        assert!(!report.passed());
        assert!(matches!(
            report.violations[0],
            BoundsViolation::UpperBound { .. }
        ));
    }

    #[test]
    fn bounds_audit_bounded_response_passes() {
        let k = TurningKernel::new(
            KernelKind::BoundedResponse {
                alpha: 0.5,
                beta: 2.0,
                steepness: 1.0,
            },
            2.0,
        )
        .unwrap();
        let samples = vec![
            SignalSample {
                s: 0.1,
                s_x: 3.0,
                s_t: -2.0,
            },
            SignalSample {
                s: 1.0,
                s_x: 0.0,
                s_t: 0.0,
            },
        ];
        let report = check_growth_bounds(&k, &samples, &[-0.9, 0.0, 0.9]).unwrap();
        assert!(report.passed());
        assert!(report.lipschitz_estimate.is_finite());
    }

    #[test]
    fn bounds_audit_needs_samples() {
        let k = TurningKernel::constant(1.0).unwrap();
        assert!(matches!(
            check_growth_bounds(&k, &[], &[1.0]),
            Err(SimError::Contract(_))
        ));
    }
}
