//! Floating-point reference model of the context-dependent LIF neuron
//! with exponential decay, plus the linear-vs-exponential leak
//! comparison used to justify the constant-subtraction approximation.

use crate::error::{Error, Result};

/// Time constants and threshold for the exponential-decay model.
///
/// `subtract_vth_mode` selects the literal update that drains `v_th`
/// from the somatic potential every step; the default keeps standard LIF
/// behavior where the threshold only gates spike generation.
#[derive(Debug, Clone, PartialEq)]
pub struct ClifParams {
    pub tau_apical: f64,
    pub tau_membrane: f64,
    pub r_membrane: f64,
    pub v_threshold: f64,
    pub dt: f64,
    pub subtract_vth_mode: bool,
}

impl ClifParams {
    pub fn new(tau_apical: f64, tau_membrane: f64, v_threshold: f64) -> Result<Self> {
        let p = Self {
            tau_apical,
            tau_membrane,
            r_membrane: 1.0,
            v_threshold,
            dt: 1.0,
            subtract_vth_mode: false,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("tau_apical", self.tau_apical),
            ("tau_membrane", self.tau_membrane),
            ("dt", self.dt),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if !self.r_membrane.is_finite() || !self.v_threshold.is_finite() {
            return Err(Error::NonFiniteInput { what: "clif params" });
        }
        Ok(())
    }

    /// Apical decay factor `exp(-dt / tau_apical)`, in (0, 1).
    pub fn alpha(&self) -> f64 {
        (-self.dt / self.tau_apical).exp()
    }

    /// Somatic decay factor `exp(-dt / tau_membrane)`, in (0, 1).
    pub fn beta(&self) -> f64 {
        (-self.dt / self.tau_membrane).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClifState {
    pub v_apical: f64,
    pub v_somatic: f64,
    pub last_spike: bool,
}

fn require_finite(value: f64, what: &'static str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFiniteInput { what })
    }
}

/// `v' = alpha v + (1 - alpha) R i`.
pub fn clif_apical_step(state: &ClifState, params: &ClifParams, i_apical: f64) -> Result<f64> {
    require_finite(i_apical, "apical input current")?;
    require_finite(state.v_apical, "apical potential")?;
    let a = params.alpha();
    Ok(a * state.v_apical + (1.0 - a) * params.r_membrane * i_apical)
}

/// `v' = beta v + (1 - beta) (R i · relu(v_apical'))`, minus `v_th` in
/// subtract mode; fires at `v' >= v_th` and resets to zero.
pub fn clif_somatic_step(
    state: &ClifState,
    params: &ClifParams,
    i_somatic: f64,
    v_apical_new: f64,
) -> Result<(f64, bool)> {
    require_finite(i_somatic, "somatic input current")?;
    require_finite(state.v_somatic, "somatic potential")?;
    require_finite(v_apical_new, "apical potential")?;
    let b = params.beta();
    let drive = params.r_membrane * i_somatic * v_apical_new.max(0.0);
    let mut v = b * state.v_somatic + (1.0 - b) * drive;
    if params.subtract_vth_mode {
        v -= params.v_threshold;
    }
    let spike = v >= params.v_threshold;
    if spike {
        v = 0.0;
    }
    Ok((v, spike))
}

/// Divergence between exponential decay and the quantized linear leak on
/// the same time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LeakDivergence {
    /// Absolute error at each step, index 0 being t = 0.
    pub abs_error: Vec<f64>,
    /// Relative error at each step (0 where both trajectories are 0).
    pub rel_error: Vec<f64>,
    pub max_abs: f64,
    pub max_rel: f64,
}

/// Simulates `v0 · exp(-t/tau)` against `max(0, v0 - t · leak · scale)`
/// for `t = 0..=steps` and reports per-step and maximum divergence.
pub fn compare_leak_models(v0: f64, tau: f64, leak: i64, steps: u32, scale: f64) -> LeakDivergence {
    let step_drop = leak as f64 * scale;
    let mut abs_error = Vec::with_capacity(steps as usize + 1);
    let mut rel_error = Vec::with_capacity(steps as usize + 1);
    let mut max_abs = 0.0f64;
    let mut max_rel = 0.0f64;
    for t in 0..=steps {
        let exponential = v0 * (-(t as f64) / tau).exp();
        let linear = (v0 - t as f64 * step_drop).max(0.0);
        let abs = (linear - exponential).abs();
        let rel = if exponential == 0.0 {
            if abs == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            abs / exponential.abs()
        };
        abs_error.push(abs);
        rel_error.push(rel);
        max_abs = max_abs.max(abs);
        max_rel = max_rel.max(rel);
    }
    LeakDivergence {
        abs_error,
        rel_error,
        max_abs,
        max_rel,
    }
}

/// Leak step (in real units) that makes the linear trajectory touch the
/// exponential one at t = 0 and t = 1.
pub fn tangent_matched_drop(v0: f64, tau: f64) -> f64 {
    v0 * (1.0 - (-1.0 / tau).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(tau_a: f64, tau_m: f64, vth: f64) -> ClifParams {
        ClifParams::new(tau_a, tau_m, vth).unwrap()
    }

    #[test]
    fn apical_rest_is_fixed_point() {
        let p = params(20.0, 200.0, 1.0);
        let s = ClifState::default();
        assert_eq!(clif_apical_step(&s, &p, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn apical_decay_matches_exp() {
        // One zero-input step from v = 1 is exactly alpha = exp(-1/20).
        let p = params(20.0, 200.0, 1.0);
        let s = ClifState {
            v_apical: 1.0,
            ..Default::default()
        };
        let v = clif_apical_step(&s, &p, 0.0).unwrap();
        assert!((v - 0.951229424500714).abs() < 1e-15);
    }

    #[test]
    fn apical_converges_to_rm_times_input() {
        let p = params(20.0, 200.0, 1.0);
        let c = 3.25;
        let mut s = ClifState::default();
        for _ in 0..(50.0 * p.tau_apical) as usize {
            s.v_apical = clif_apical_step(&s, &p, c).unwrap();
        }
        assert!((s.v_apical - p.r_membrane * c).abs() < 1e-9);
    }

    #[test]
    fn apical_contracts_with_zero_input() {
        let p = params(20.0, 200.0, 1.0);
        for v in [-3.0, -0.5, 0.25, 10.0] {
            let s = ClifState {
                v_apical: v,
                ..Default::default()
            };
            let next = clif_apical_step(&s, &p, 0.0).unwrap();
            assert_eq!(next, p.alpha() * v);
            assert!(next.abs() <= p.alpha() * v.abs() + f64::EPSILON);
        }
    }

    #[test]
    fn somatic_zero_state_stays_zero() {
        let p = params(20.0, 200.0, 1.0);
        let s = ClifState::default();
        let (v, spike) = clif_somatic_step(&s, &p, 0.0, 0.0).unwrap();
        assert_eq!((v, spike), (0.0, false));
    }

    #[test]
    fn negative_apical_gives_zero_drive() {
        let p = params(20.0, 200.0, 1.0);
        let s = ClifState::default();
        for i in [-100.0, -1.0, 0.0, 1.0, 100.0] {
            let (v, _) = clif_somatic_step(&s, &p, i, -2.5).unwrap();
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let p = params(20.0, 200.0, 1.0);
        let s = ClifState::default();
        assert!(matches!(
            clif_apical_step(&s, &p, f64::NAN),
            Err(Error::NonFiniteInput { .. })
        ));
        assert!(matches!(
            clif_somatic_step(&s, &p, f64::INFINITY, 0.0),
            Err(Error::NonFiniteInput { .. })
        ));
    }

    #[test]
    fn trajectory_matches_scalar_recurrence_oracle() {
        // Straight-line recurrence written independently of the step
        // functions, compared over 1,000 random-ish steps.
        let p = params(20.0, 200.0, 0.8);
        let mut s = ClifState::default();
        let (mut ov_a, mut ov_s) = (0.0f64, 0.0f64);
        let (alpha, beta) = (p.alpha(), p.beta());
        let mut x = 0.123f64;
        for _ in 0..1000 {
            // Deterministic pseudo-inputs.
            x = (x * 997.0 + 0.371).fract();
            let i_a = x * 2.0 - 0.5;
            let i_s = x * 3.0 - 1.0;

            let va = clif_apical_step(&s, &p, i_a).unwrap();
            let (vs, spike) = clif_somatic_step(&s, &p, i_s, va).unwrap();
            s = ClifState {
                v_apical: va,
                v_somatic: vs,
                last_spike: spike,
            };

            ov_a = alpha * ov_a + (1.0 - alpha) * i_a;
            let mut cand = beta * ov_s + (1.0 - beta) * (i_s * ov_a.max(0.0));
            if cand >= p.v_threshold {
                cand = 0.0;
            }
            ov_s = cand;

            let rel_a = (s.v_apical - ov_a).abs() / ov_a.abs().max(1e-30);
            let rel_s = (s.v_somatic - ov_s).abs() / ov_s.abs().max(1e-30);
            assert!(rel_a < 1e-12 && rel_s < 1e-12);
        }
    }

    #[test]
    fn subtract_mode_drains_potential() {
        let mut p = params(20.0, 200.0, 1.0);
        p.subtract_vth_mode = true;
        let s = ClifState {
            v_somatic: 0.5,
            ..Default::default()
        };
        let (v, spike) = clif_somatic_step(&s, &p, 0.0, 0.0).unwrap();
        assert!(!spike);
        assert!(v < 0.0);
    }

    #[test]
    fn zero_initial_value_never_diverges() {
        let d = compare_leak_models(0.0, 20.0, 3, 10, 0.01);
        assert!(d.abs_error.iter().all(|&e| e == 0.0));
        assert_eq!(d.max_rel, 0.0);
    }

    #[test]
    fn tangent_matched_divergence_grows_monotonically() {
        let v0 = 1.0;
        let tau = 20.0;
        let scale = tangent_matched_drop(v0, tau);
        let d = compare_leak_models(v0, tau, 1, 10, scale);
        assert_eq!(d.rel_error[0], 0.0);
        assert!(d.rel_error[1].abs() < 1e-15, "curves touch at t=1");
        for w in d.rel_error.windows(2) {
            assert!(w[1] >= w[0]);
        }
    }

    #[test]
    fn divergence_is_scale_invariant_in_relative_error() {
        let tau = 20.0;
        let base = compare_leak_models(1.0, tau, 1, 10, tangent_matched_drop(1.0, tau));
        for k in [0.5, 3.0, 1000.0] {
            let scaled = compare_leak_models(k, tau, 1, 10, tangent_matched_drop(k, tau));
            for (a, b) in base.rel_error.iter().zip(&scaled.rel_error) {
                assert!((a - b).abs() < 1e-12);
            }
            for (a, b) in base.abs_error.iter().zip(&scaled.abs_error) {
                assert!((a * k - b).abs() < 1e-9 * k);
            }
        }
    }
}
