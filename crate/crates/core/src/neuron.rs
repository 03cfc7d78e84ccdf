//! Functional model of the qCLIF neuron and a recurrent layer of them.
//!
//! Dynamics per cycle, all in raw integer units:
//!
//! ```text
//! v_ap'  = max(0, v_ap - alpha_leak + sum(AND(context_spikes, w_context)))
//! drive  = sum(AND(stimulus_spikes, w_soma)) + sum(AND(prev_spikes, w_recurrent))
//! v_som' = max(0, v_som - beta_leak + relu(v_ap') * drive)
//! spike  = v_som' >= v_threshold   (fires at equality; reset to zero)
//! ```
//!
//! Potentials are floored at zero, the somatic register resets to zero in
//! the cycle a spike fires, and recurrent spikes are consumed with exactly
//! one cycle of delay (`prev_spikes` is the previous cycle's output).

use crate::error::{Error, Result};
use crate::fixedpoint::{Signedness, MAX_WIDTH, MIN_WIDTH};
use crate::spike::{SpikeRaster, SpikeVector};

/// Per-neuron leak constants, threshold, and register widths.
///
/// Leaks and the threshold are non-negative integers in the raw units of
/// their register. `weight_width` is the synapse precision (M bits), and
/// the somatic register must hold the 2N-bit apical product, hence
/// `somatic_width >= 2 * apical_width`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeuronParams {
    pub alpha_leak: i64,
    pub beta_leak: i64,
    pub v_threshold: i64,
    pub apical_width: u32,
    pub somatic_width: u32,
    pub weight_width: u32,
}

impl NeuronParams {
    pub fn new(
        alpha_leak: i64,
        beta_leak: i64,
        v_threshold: i64,
        apical_width: u32,
        somatic_width: u32,
        weight_width: u32,
    ) -> Result<Self> {
        let p = Self {
            alpha_leak,
            beta_leak,
            v_threshold,
            apical_width,
            somatic_width,
            weight_width,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, w) in [
            ("apical_width", self.apical_width),
            ("somatic_width", self.somatic_width),
            ("weight_width", self.weight_width),
        ] {
            if !(MIN_WIDTH..=MAX_WIDTH).contains(&w) {
                return Err(Error::InvalidConfig(format!(
                    "{name} {w} outside {MIN_WIDTH}..={MAX_WIDTH}"
                )));
            }
        }
        if self.somatic_width < 2 * self.apical_width {
            return Err(Error::InvalidConfig(format!(
                "somatic_width {} must be at least twice apical_width {} to hold the product",
                self.somatic_width, self.apical_width
            )));
        }
        if self.alpha_leak < 0 || self.beta_leak < 0 || self.v_threshold < 0 {
            return Err(Error::InvalidConfig(
                "leaks and threshold must be non-negative".into(),
            ));
        }
        let (_, ap_hi) = Signedness::Signed.range(self.apical_width);
        if self.alpha_leak as i128 > ap_hi {
            return Err(Error::InvalidConfig(format!(
                "alpha_leak {} not representable in {} bits",
                self.alpha_leak, self.apical_width
            )));
        }
        let (_, som_hi) = Signedness::Signed.range(self.somatic_width);
        if self.beta_leak as i128 > som_hi || self.v_threshold as i128 > som_hi {
            return Err(Error::InvalidConfig(format!(
                "beta_leak {} / v_threshold {} not representable in {} bits",
                self.beta_leak, self.v_threshold, self.somatic_width
            )));
        }
        Ok(())
    }

    /// Same parameters for every neuron in a layer.
    pub fn broadcast(&self, neurons: usize) -> Vec<NeuronParams> {
        vec![self.clone(); neurons]
    }
}

/// Row-major integer matrix; one row per neuron.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightMatrix {
    rows: usize,
    cols: usize,
    data: Vec<i64>,
}

impl WeightMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<i64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                what: "weight matrix data",
                expected: rows * cols,
                actual: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<i64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    what: "weight matrix row",
                    expected: cols,
                    actual: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[i64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> i64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: i64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn values(&self) -> &[i64] {
        &self.data
    }

    pub fn max_abs(&self) -> u64 {
        self.data.iter().map(|v| v.unsigned_abs()).max().unwrap_or(0)
    }
}

/// Quantized context, somatic, and recurrent weights for one layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightSet {
    pub w_context: WeightMatrix,
    pub w_soma: WeightMatrix,
    pub w_recurrent: WeightMatrix,
    weight_width: u32,
}

impl WeightSet {
    pub fn new(
        w_context: WeightMatrix,
        w_soma: WeightMatrix,
        w_recurrent: WeightMatrix,
        weight_width: u32,
    ) -> Result<Self> {
        let neurons = w_context.rows();
        if w_soma.rows() != neurons {
            return Err(Error::DimensionMismatch {
                what: "w_soma rows",
                expected: neurons,
                actual: w_soma.rows(),
            });
        }
        if w_recurrent.rows() != neurons {
            return Err(Error::DimensionMismatch {
                what: "w_recurrent rows",
                expected: neurons,
                actual: w_recurrent.rows(),
            });
        }
        if w_recurrent.cols() != neurons {
            return Err(Error::DimensionMismatch {
                what: "w_recurrent cols",
                expected: neurons,
                actual: w_recurrent.cols(),
            });
        }
        let (lo, hi) = Signedness::Signed.range(weight_width);
        for m in [&w_context, &w_soma, &w_recurrent] {
            for &v in m.values() {
                let v = v as i128;
                if v < lo || v > hi {
                    return Err(Error::Overflow {
                        what: "weight entry",
                        value: v,
                        width: weight_width,
                    });
                }
            }
        }
        Ok(Self {
            w_context,
            w_soma,
            w_recurrent,
            weight_width,
        })
    }

    pub fn neurons(&self) -> usize {
        self.w_context.rows()
    }

    pub fn context_inputs(&self) -> usize {
        self.w_context.cols()
    }

    pub fn stimulus_inputs(&self) -> usize {
        self.w_soma.cols()
    }

    pub fn weight_width(&self) -> u32 {
        self.weight_width
    }

    /// Synapses per layer step: every weight is visited once per cycle.
    pub fn synapse_count(&self) -> u64 {
        (self.neurons() * (self.context_inputs() + self.stimulus_inputs() + self.neurons())) as u64
    }
}

/// Apical and somatic potentials plus the previous cycle's spikes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerState {
    pub v_apical: Vec<i64>,
    pub v_somatic: Vec<i64>,
    pub prev_spikes: SpikeVector,
    pub cycle: u64,
}

impl LayerState {
    pub fn zeroed(neurons: usize) -> Self {
        Self {
            v_apical: vec![0; neurons],
            v_somatic: vec![0; neurons],
            prev_spikes: SpikeVector::new(neurons),
            cycle: 0,
        }
    }

    pub fn neurons(&self) -> usize {
        self.v_apical.len()
    }

    fn check_invariants(&self) -> Result<()> {
        if self.v_somatic.len() != self.v_apical.len() || self.prev_spikes.len() != self.v_apical.len()
        {
            return Err(Error::DimensionMismatch {
                what: "layer state",
                expected: self.v_apical.len(),
                actual: self.v_somatic.len().min(self.prev_spikes.len()),
            });
        }
        if self.v_apical.iter().chain(self.v_somatic.iter()).any(|&v| v < 0) {
            return Err(Error::InvalidConfig(
                "layer state potentials must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// The AND-gate synapse: passes the full weight when the spike bit is set.
#[inline]
pub fn gate_weight(spike: bool, weight: i64) -> i64 {
    if spike {
        weight
    } else {
        0
    }
}

#[inline]
fn relu(x: i128) -> i128 {
    x.max(0)
}

/// Exact sum of gated weights for one neuron's input row.
pub fn synaptic_sum(spikes: &SpikeVector, weights: &[i64]) -> Result<i128> {
    if spikes.len() != weights.len() {
        return Err(Error::LengthMismatch {
            expected: weights.len(),
            actual: spikes.len(),
        });
    }
    let mut sum = 0i128;
    for i in spikes.iter_ones() {
        sum += weights[i] as i128;
    }
    Ok(sum)
}

/// Somatic drive: gated stimulus weights plus gated recurrent weights.
pub fn somatic_input(
    stimulus_spikes: &SpikeVector,
    w_soma_row: &[i64],
    prev_spikes: &SpikeVector,
    w_recurrent_row: &[i64],
) -> Result<i128> {
    Ok(synaptic_sum(stimulus_spikes, w_soma_row)? + synaptic_sum(prev_spikes, w_recurrent_row)?)
}

/// One apical update: leak, integrate, floor at zero.
///
/// The floored result must fit the apical register; a positive value
/// beyond `apical_width` bits means the accumulator is undersized for the
/// configured fan-in and raises `Overflow`.
pub fn apical_step(v_apical: i64, alpha_leak: i64, v_input_ap: i128, apical_width: u32) -> Result<i64> {
    debug_assert!(v_apical >= 0);
    let candidate = (v_apical as i128 - alpha_leak as i128 + v_input_ap).max(0);
    let (_, hi) = Signedness::Signed.range(apical_width);
    if candidate > hi {
        return Err(Error::Overflow {
            what: "apical potential",
            value: candidate,
            width: apical_width,
        });
    }
    Ok(candidate as i64)
}

/// One somatic update: leak, add the apical-gated drive, floor at zero,
/// compare against the threshold.
///
/// Fires at equality (`candidate >= v_threshold`) and resets to zero in the
/// same cycle, so a spike is never visible as a residual potential. The
/// ReLU on the apical term mirrors the update equation even though the
/// apical floor already guarantees a non-negative operand.
pub fn somatic_step(
    v_somatic: i64,
    beta_leak: i64,
    v_apical_new: i64,
    v_input_som: i128,
    v_threshold: i64,
    somatic_width: u32,
) -> Result<(i64, bool)> {
    debug_assert!(v_somatic >= 0);
    debug_assert!(v_apical_new >= 0);
    let drive = relu(v_apical_new as i128) * v_input_som;
    let candidate = (v_somatic as i128 - beta_leak as i128 + drive).max(0);
    let (_, hi) = Signedness::Signed.range(somatic_width);
    if candidate > hi {
        return Err(Error::Overflow {
            what: "somatic potential",
            value: candidate,
            width: somatic_width,
        });
    }
    if candidate >= v_threshold as i128 {
        Ok((0, true))
    } else {
        Ok((candidate as i64, false))
    }
}

fn check_layer_shapes(
    state: &LayerState,
    weights: &WeightSet,
    params: &[NeuronParams],
    context_spikes: &SpikeVector,
    stimulus_spikes: &SpikeVector,
) -> Result<()> {
    let neurons = weights.neurons();
    state.check_invariants()?;
    if state.neurons() != neurons {
        return Err(Error::DimensionMismatch {
            what: "state neurons",
            expected: neurons,
            actual: state.neurons(),
        });
    }
    if params.len() != neurons {
        return Err(Error::DimensionMismatch {
            what: "params",
            expected: neurons,
            actual: params.len(),
        });
    }
    if context_spikes.len() != weights.context_inputs() {
        return Err(Error::DimensionMismatch {
            what: "context spikes",
            expected: weights.context_inputs(),
            actual: context_spikes.len(),
        });
    }
    if stimulus_spikes.len() != weights.stimulus_inputs() {
        return Err(Error::DimensionMismatch {
            what: "stimulus spikes",
            expected: weights.stimulus_inputs(),
            actual: stimulus_spikes.len(),
        });
    }
    for p in params {
        if p.weight_width != weights.weight_width() {
            return Err(Error::DimensionMismatch {
                what: "weight_width",
                expected: weights.weight_width() as usize,
                actual: p.weight_width as usize,
            });
        }
    }
    Ok(())
}

fn neuron_update(
    v_apical: i64,
    v_somatic: i64,
    ctx_sum: i128,
    som_sum: i128,
    p: &NeuronParams,
) -> Result<(i64, i64, bool)> {
    let v_ap_new = apical_step(v_apical, p.alpha_leak, ctx_sum, p.apical_width)?;
    let (v_som_new, spike) = somatic_step(
        v_somatic,
        p.beta_leak,
        v_ap_new,
        som_sum,
        p.v_threshold,
        p.somatic_width,
    )?;
    Ok((v_ap_new, v_som_new, spike))
}

/// Advances every neuron one cycle and returns the new state along with
/// the output spikes.
///
/// Recurrent input is taken from `state.prev_spikes` (the previous
/// cycle's output); the returned state carries this cycle's output as its
/// `prev_spikes`, giving the recurrence exactly one cycle of delay.
pub fn layer_step(
    state: &LayerState,
    weights: &WeightSet,
    params: &[NeuronParams],
    context_spikes: &SpikeVector,
    stimulus_spikes: &SpikeVector,
) -> Result<(LayerState, SpikeVector)> {
    check_layer_shapes(state, weights, params, context_spikes, stimulus_spikes)?;
    let neurons = weights.neurons();
    let mut next = LayerState {
        v_apical: vec![0; neurons],
        v_somatic: vec![0; neurons],
        prev_spikes: SpikeVector::new(neurons),
        cycle: state.cycle + 1,
    };
    let mut out = SpikeVector::new(neurons);
    for j in 0..neurons {
        let ctx_sum = synaptic_sum(context_spikes, weights.w_context.row(j))?;
        let som_sum = somatic_input(
            stimulus_spikes,
            weights.w_soma.row(j),
            &state.prev_spikes,
            weights.w_recurrent.row(j),
        )?;
        let (v_ap, v_som, spike) =
            neuron_update(state.v_apical[j], state.v_somatic[j], ctx_sum, som_sum, &params[j])?;
        next.v_apical[j] = v_ap;
        next.v_somatic[j] = v_som;
        if spike {
            out.set(j, true);
        }
    }
    next.prev_spikes = out.clone();
    Ok((next, out))
}

/// Owning wrapper around [`layer_step`] for driving whole simulations.
#[derive(Debug, Clone)]
pub struct Layer {
    weights: WeightSet,
    params: Vec<NeuronParams>,
    state: LayerState,
}

impl Layer {
    pub fn new(weights: WeightSet, params: Vec<NeuronParams>) -> Result<Self> {
        let state = LayerState::zeroed(weights.neurons());
        check_layer_shapes(
            &state,
            &weights,
            &params,
            &SpikeVector::new(weights.context_inputs()),
            &SpikeVector::new(weights.stimulus_inputs()),
        )?;
        for p in &params {
            p.validate()?;
        }
        Ok(Self {
            weights,
            params,
            state,
        })
    }

    pub fn state(&self) -> &LayerState {
        &self.state
    }

    pub fn weights(&self) -> &WeightSet {
        &self.weights
    }

    pub fn reset(&mut self) {
        self.state = LayerState::zeroed(self.weights.neurons());
    }

    pub fn step(&mut self, context_spikes: &SpikeVector, stimulus_spikes: &SpikeVector) -> Result<SpikeVector> {
        let (next, out) = layer_step(
            &self.state,
            &self.weights,
            &self.params,
            context_spikes,
            stimulus_spikes,
        )?;
        self.state = next;
        Ok(out)
    }
}

/// Runs the functional layer over per-cycle spike inputs and collects the
/// raster.
pub fn run_layer(
    weights: &WeightSet,
    params: &[NeuronParams],
    mut context_at: impl FnMut(u64) -> SpikeVector,
    mut stimulus_at: impl FnMut(u64) -> SpikeVector,
    cycles: u64,
) -> Result<SpikeRaster> {
    let mut layer = Layer::new(weights.clone(), params.to_vec())?;
    let mut raster = SpikeRaster::new(weights.neurons());
    for t in 0..cycles {
        let out = layer.step(&context_at(t), &stimulus_at(t))?;
        raster.push(out);
    }
    Ok(raster)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(alpha: i64, beta: i64, vth: i64) -> NeuronParams {
        NeuronParams::new(alpha, beta, vth, 16, 32, 8).unwrap()
    }

    #[test]
    fn gate_passes_or_zeroes() {
        assert_eq!(gate_weight(true, -37), -37);
        assert_eq!(gate_weight(false, 125), 0);
        assert_eq!(gate_weight(true, 0), 0);
    }

    #[test]
    fn synaptic_sum_worst_case_fan_in() {
        // 500 simultaneous spikes against weight 255 total 127,500.
        let spikes = SpikeVector::from_bools(&vec![true; 500]);
        let weights = vec![255i64; 500];
        assert_eq!(synaptic_sum(&spikes, &weights).unwrap(), 127_500);
    }

    #[test]
    fn synaptic_sum_all_zero_spikes() {
        let spikes = SpikeVector::new(64);
        let weights: Vec<i64> = (0..64).map(|i| i * 3 - 50).collect();
        assert_eq!(synaptic_sum(&spikes, &weights).unwrap(), 0);
    }

    #[test]
    fn synaptic_sum_length_mismatch() {
        let spikes = SpikeVector::new(3);
        assert!(matches!(
            synaptic_sum(&spikes, &[1, 2]),
            Err(Error::LengthMismatch { expected: 2, actual: 3 })
        ));
    }

    #[test]
    fn somatic_input_adds_both_sources() {
        let stim = SpikeVector::from_indices(4, &[0, 1]);
        let prev = SpikeVector::from_indices(2, &[1]);
        let sum = somatic_input(&stim, &[25, 15, 9, 9], &prev, &[7, -15]).unwrap();
        assert_eq!(sum, 40 - 15);
    }

    #[test]
    fn apical_step_examples() {
        assert_eq!(apical_step(0, 7, 0, 16).unwrap(), 0);
        assert_eq!(apical_step(100, 7, 5, 16).unwrap(), 98);
        assert_eq!(apical_step(3, 7, 0, 16).unwrap(), 0);
    }

    #[test]
    fn apical_step_overflow() {
        let err = apical_step(0, 0, 200_000, 16).unwrap_err();
        assert!(matches!(err, Error::Overflow { width: 16, .. }));
    }

    #[test]
    fn somatic_step_examples() {
        // Zero apical potential gates the drive to zero.
        assert_eq!(somatic_step(0, 7, 0, 9_999, 100, 32).unwrap(), (0, false));
        // 50 + 2*30 = 110 >= 100 fires and resets.
        assert_eq!(somatic_step(50, 0, 2, 30, 100, 32).unwrap(), (0, true));
        // Leak exceeding the potential floors at zero.
        assert_eq!(somatic_step(50, 200, 1, 10, 100, 32).unwrap(), (0, false));
    }

    #[test]
    fn quiescent_layer_stays_quiescent() {
        let weights = WeightSet::new(
            WeightMatrix::from_rows(&[vec![3, -2], vec![1, 1]]).unwrap(),
            WeightMatrix::from_rows(&[vec![5], vec![-5]]).unwrap(),
            WeightMatrix::from_rows(&[vec![0, 2], vec![2, 0]]).unwrap(),
            8,
        )
        .unwrap();
        let p = params(1, 1, 10).broadcast(2);
        let state = LayerState::zeroed(2);
        let (next, out) = layer_step(
            &state,
            &weights,
            &p,
            &SpikeVector::new(2),
            &SpikeVector::new(1),
        )
        .unwrap();
        assert!(!out.any());
        assert_eq!(next.v_apical, vec![0, 0]);
        assert_eq!(next.v_somatic, vec![0, 0]);
        assert_eq!(next.cycle, 1);
    }

    #[test]
    fn unit_drive_neuron_fires_every_cycle() {
        // w_context = [1], w_soma = [v_threshold], both inputs spiking and
        // zero leaks: the apical potential is at least 1 from the first
        // cycle on, so the drive reaches the threshold every cycle.
        let vth = 64i64;
        let weights = WeightSet::new(
            WeightMatrix::from_rows(&[vec![1]]).unwrap(),
            WeightMatrix::from_rows(&[vec![vth]]).unwrap(),
            WeightMatrix::from_rows(&[vec![0]]).unwrap(),
            8,
        )
        .unwrap();
        let p = params(0, 0, vth).broadcast(1);
        let ones = SpikeVector::from_bools(&[true]);
        let mut state = LayerState::zeroed(1);
        for cycle in 0..20 {
            let (next, out) = layer_step(&state, &weights, &p, &ones, &ones).unwrap();
            assert!(out.get(0), "expected a spike at cycle {cycle}");
            assert_eq!(next.v_somatic[0], 0, "reset-to-zero after firing");
            state = next;
        }
    }

    #[test]
    fn recurrence_sees_previous_cycle_only() {
        // Neuron 0 fires when stimulated; neuron 1 fires only off neuron
        // 0's recurrent spike, one cycle later.
        let vth = 10i64;
        let weights = WeightSet::new(
            WeightMatrix::from_rows(&[vec![1], vec![1]]).unwrap(),
            WeightMatrix::from_rows(&[vec![vth], vec![0]]).unwrap(),
            WeightMatrix::from_rows(&[vec![0, 0], vec![vth, 0]]).unwrap(),
            8,
        )
        .unwrap();
        let p = params(0, 0, vth).broadcast(2);
        let ctx = SpikeVector::from_bools(&[true]);
        let mut state = LayerState::zeroed(2);

        // Cycle 0: stimulate neuron 0. It fires; neuron 1 does not.
        let stim = SpikeVector::from_bools(&[true]);
        let (next, out) = layer_step(&state, &weights, &p, &ctx, &stim).unwrap();
        assert!(out.get(0) && !out.get(1));
        state = next;

        // Cycle 1: no stimulus. Neuron 1 fires off the recurrent spike.
        let quiet = SpikeVector::new(1);
        let (_, out) = layer_step(&state, &weights, &p, &ctx, &quiet).unwrap();
        assert!(!out.get(0) && out.get(1));
    }

    #[test]
    fn weight_set_rejects_wide_entries() {
        let err = WeightSet::new(
            WeightMatrix::from_rows(&[vec![200]]).unwrap(),
            WeightMatrix::from_rows(&[vec![0]]).unwrap(),
            WeightMatrix::from_rows(&[vec![0]]).unwrap(),
            8,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Overflow { value: 200, width: 8, .. }));
    }

    #[test]
    fn params_reject_narrow_somatic_register() {
        assert!(NeuronParams::new(0, 0, 1, 16, 24, 8).is_err());
    }
}
