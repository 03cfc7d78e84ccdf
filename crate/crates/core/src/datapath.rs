//! Cycle- and bit-faithful model of the digital neuron datapath.
//!
//! Blocks modeled per neuron per cycle:
//!
//! * SWM — spike weighting (AND gates) followed by a carry-save adder
//!   tree; the reduction is value-preserving and the stage count follows
//!   the ceil(log3 N) pipeline rule.
//! * AC — leakage subtractor plus apical accumulator; the sign bit is
//!   checked each cycle and a negative register resets to zero.
//! * MU — array multiplier taking two N-bit operands to a 2N-bit product.
//! * SC — somatic leakage subtractor and accumulator over the 2N-bit data.
//! * TC — threshold comparator; the spike doubles as the somatic
//!   register's reset and as next cycle's recurrent input.
//!
//! Pipeline depth is bookkeeping in the trace: architecturally one cycle
//! of simulated time is one update of every register, so the spike raster
//! must match the functional layer cycle for cycle.

use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::fixedpoint::Signedness;
use crate::neuron::{gate_weight, NeuronParams, WeightSet};
use crate::spike::{SpikeRaster, SpikeVector};
use crate::stimgen::EventStream;

/// Pipeline-depth rule for the SWM adder tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SwmStagePolicy {
    /// ceil(log3(term count)) stages.
    #[default]
    Log3Ceil,
}

impl SwmStagePolicy {
    pub fn stages(self, terms: usize) -> u32 {
        match self {
            SwmStagePolicy::Log3Ceil => ceil_log3(terms),
        }
    }
}

/// Smallest `s` with `3^s >= n`; zero for `n <= 1`.
pub fn ceil_log3(n: usize) -> u32 {
    let mut stages = 0u32;
    let mut reach = 1u128;
    while reach < n as u128 {
        reach *= 3;
        stages += 1;
    }
    stages
}

/// Structural description of one datapath instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatapathConfig {
    pub fan_in_context: usize,
    pub fan_in_stimulus: usize,
    pub neuron_count: usize,
    /// Synapse weight precision (M bits).
    pub weight_width: u32,
    /// Apical register and MU operand width (N bits).
    pub apical_width: u32,
    /// MU output width; must equal `2 * apical_width`.
    pub product_width: u32,
    pub swm_stage_policy: SwmStagePolicy,
}

impl DatapathConfig {
    pub fn new(
        fan_in_context: usize,
        fan_in_stimulus: usize,
        neuron_count: usize,
        weight_width: u32,
        apical_width: u32,
    ) -> Result<Self> {
        let c = Self {
            fan_in_context,
            fan_in_stimulus,
            neuron_count,
            weight_width,
            apical_width,
            product_width: 2 * apical_width,
            swm_stage_policy: SwmStagePolicy::Log3Ceil,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.product_width != 2 * self.apical_width {
            return Err(Error::InvalidConfig(format!(
                "product_width {} must equal 2 x apical_width {}",
                self.product_width, self.apical_width
            )));
        }
        if self.neuron_count == 0 {
            return Err(Error::InvalidConfig("neuron_count must be at least 1".into()));
        }
        Ok(())
    }

    /// Largest list the SWM reduces: the somatic side weights stimulus
    /// and recurrent spikes together.
    pub fn max_fan_in(&self) -> usize {
        self.fan_in_context
            .max(self.fan_in_stimulus + self.neuron_count)
    }
}

/// One 3:2 carry-save compressor on two's-complement integers:
/// `a + b + c == sum + carry` bit-exactly.
#[inline]
fn csa_compress(a: i128, b: i128, c: i128) -> (i128, i128) {
    let sum = a ^ b ^ c;
    let carry = ((a & b) | (a & c) | (b & c)) << 1;
    (sum, carry)
}

/// Reduces a list of gated weights with carry-save compressor rounds.
///
/// Returns the exact sum (carry-save reduction changes structure, never
/// value) plus the pipeline stage count under the configured rule.
pub fn swm_reduce(gated_weights: &[i64], config: &DatapathConfig) -> Result<(i128, u32)> {
    if gated_weights.len() > config.max_fan_in() {
        return Err(Error::FanInExceeded {
            limit: config.max_fan_in(),
            actual: gated_weights.len(),
        });
    }
    let stages = config.swm_stage_policy.stages(gated_weights.len());
    let mut level: Vec<i128> = gated_weights.iter().map(|&w| w as i128).collect();
    let mut next = Vec::with_capacity(level.len());
    while level.len() > 2 {
        next.clear();
        let mut chunks = level.chunks_exact(3);
        for chunk in &mut chunks {
            let (s, c) = csa_compress(chunk[0], chunk[1], chunk[2]);
            next.push(s);
            next.push(c);
        }
        next.extend_from_slice(chunks.remainder());
        std::mem::swap(&mut level, &mut next);
    }
    let sum = level.iter().sum::<i128>();
    Ok((sum, stages))
}

/// N-bit by N-bit signed array multiply; the 2N-bit result always fits.
pub fn mu_multiply(apical_out: i64, somatic_drive: i64, apical_width: u32) -> i128 {
    let (lo, hi) = Signedness::Signed.range(apical_width);
    assert!(
        (lo..=hi).contains(&(apical_out as i128)) && (lo..=hi).contains(&(somatic_drive as i128)),
        "MU operands must fit {apical_width} bits"
    );
    let product = apical_out as i128 * somatic_drive as i128;
    let (plo, phi) = Signedness::Signed.range(2 * apical_width);
    debug_assert!(product >= plo && product <= phi);
    product
}

/// Register blocks observable in the per-cycle trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    /// Context-side SWM adder output.
    SwmContext,
    /// Somatic-side SWM adder output (stimulus + recurrent).
    SwmSomatic,
    /// Apical accumulator after leak, integrate, and sign-reset.
    ApicalAcc,
    /// MU product.
    MuProduct,
    /// Somatic accumulator after leak, integrate, floor, and spike reset.
    SomaticAcc,
    /// Threshold comparator output bit.
    ThresholdOut,
}

impl Block {
    pub fn as_str(self) -> &'static str {
        match self {
            Block::SwmContext => "swm_ctx",
            Block::SwmSomatic => "swm_som",
            Block::ApicalAcc => "aa",
            Block::MuProduct => "mu",
            Block::SomaticAcc => "sa",
            Block::ThresholdOut => "tc",
        }
    }
}

pub const TRACE_BLOCKS_PER_NEURON: usize = 6;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRow {
    pub cycle: u64,
    pub neuron: usize,
    pub block: Block,
    pub value: i128,
}

/// Per-cycle record of every block's register contents.
#[derive(Debug, Clone, Default)]
pub struct PipelineTrace {
    pub rows: Vec<TraceRow>,
    pub cycles: u64,
    pub neuron_count: usize,
    /// SWM pipeline depth on the context side, from the stage rule.
    pub stages_context: u32,
    /// SWM pipeline depth on the somatic side.
    pub stages_somatic: u32,
}

impl PipelineTrace {
    /// Trace bookkeeping: six block records per neuron per cycle.
    pub fn is_consistent(&self) -> bool {
        self.rows.len() == self.cycles as usize * self.neuron_count * TRACE_BLOCKS_PER_NEURON
    }

    /// One CSV row per (cycle, neuron, block, value).
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "cycle,neuron,block,value")?;
        for row in &self.rows {
            writeln!(w, "{},{},{},{}", row.cycle, row.neuron, row.block.as_str(), row.value)?;
        }
        Ok(())
    }
}

/// Stateful datapath instance; one `step` is one clock cycle.
#[derive(Debug, Clone)]
pub struct DatapathSim {
    config: DatapathConfig,
    weights: WeightSet,
    params: Vec<NeuronParams>,
    v_apical: Vec<i64>,
    v_somatic: Vec<i64>,
    prev_spikes: SpikeVector,
    cycle: u64,
    trace: Option<PipelineTrace>,
    gated: Vec<i64>,
}

impl DatapathSim {
    pub fn new(config: DatapathConfig, weights: WeightSet, params: Vec<NeuronParams>) -> Result<Self> {
        config.validate()?;
        let neurons = weights.neurons();
        if config.neuron_count != neurons {
            return Err(Error::DimensionMismatch {
                what: "neuron_count",
                expected: neurons,
                actual: config.neuron_count,
            });
        }
        if config.fan_in_context < weights.context_inputs() {
            return Err(Error::FanInExceeded {
                limit: config.fan_in_context,
                actual: weights.context_inputs(),
            });
        }
        if config.fan_in_stimulus < weights.stimulus_inputs() {
            return Err(Error::FanInExceeded {
                limit: config.fan_in_stimulus,
                actual: weights.stimulus_inputs(),
            });
        }
        if params.len() != neurons {
            return Err(Error::DimensionMismatch {
                what: "params",
                expected: neurons,
                actual: params.len(),
            });
        }
        for p in &params {
            p.validate()?;
            if p.apical_width != config.apical_width {
                return Err(Error::DimensionMismatch {
                    what: "apical_width",
                    expected: config.apical_width as usize,
                    actual: p.apical_width as usize,
                });
            }
            if p.weight_width != config.weight_width || p.weight_width != weights.weight_width() {
                return Err(Error::DimensionMismatch {
                    what: "weight_width",
                    expected: config.weight_width as usize,
                    actual: p.weight_width as usize,
                });
            }
        }
        let max_fan_in = config.max_fan_in();
        Ok(Self {
            config,
            weights,
            params,
            v_apical: vec![0; neurons],
            v_somatic: vec![0; neurons],
            prev_spikes: SpikeVector::new(neurons),
            cycle: 0,
            trace: None,
            gated: Vec::with_capacity(max_fan_in),
        })
    }

    pub fn enable_trace(&mut self) {
        let stages_context = self
            .config
            .swm_stage_policy
            .stages(self.weights.context_inputs());
        let stages_somatic = self
            .config
            .swm_stage_policy
            .stages(self.weights.stimulus_inputs() + self.weights.neurons());
        self.trace = Some(PipelineTrace {
            rows: Vec::new(),
            cycles: 0,
            neuron_count: self.weights.neurons(),
            stages_context,
            stages_somatic,
        });
    }

    pub fn take_trace(&mut self) -> Option<PipelineTrace> {
        self.trace.take()
    }

    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    pub fn potentials(&self) -> (&[i64], &[i64]) {
        (&self.v_apical, &self.v_somatic)
    }

    fn record(&mut self, neuron: usize, block: Block, value: i128) {
        if let Some(trace) = &mut self.trace {
            trace.rows.push(TraceRow {
                cycle: self.cycle,
                neuron,
                block,
                value,
            });
        }
    }

    pub fn step(&mut self, context_spikes: &SpikeVector, stimulus_spikes: &SpikeVector) -> Result<SpikeVector> {
        if context_spikes.len() != self.weights.context_inputs() {
            return Err(Error::DimensionMismatch {
                what: "context spikes",
                expected: self.weights.context_inputs(),
                actual: context_spikes.len(),
            });
        }
        if stimulus_spikes.len() != self.weights.stimulus_inputs() {
            return Err(Error::DimensionMismatch {
                what: "stimulus spikes",
                expected: self.weights.stimulus_inputs(),
                actual: stimulus_spikes.len(),
            });
        }
        let neurons = self.weights.neurons();
        let (_, apical_hi) = Signedness::Signed.range(self.config.apical_width);
        let mut out = SpikeVector::new(neurons);

        for j in 0..neurons {
            // SWM, context side: AND-gate every synapse, reduce with CSAs.
            let mut gated = std::mem::take(&mut self.gated);
            gated.clear();
            let ctx_row = self.weights.w_context.row(j);
            for (i, &w) in ctx_row.iter().enumerate() {
                gated.push(gate_weight(context_spikes.get(i), w));
            }
            let (ctx_sum, _) = swm_reduce(&gated, &self.config)?;

            // AC: leakage subtractor into the apical accumulator; the sign
            // bit resets a negative register to zero.
            let p = &self.params[j];
            let aa_raw = self.v_apical[j] as i128 - p.alpha_leak as i128 + ctx_sum;
            let aa = if aa_raw < 0 { 0 } else { aa_raw };
            if aa > apical_hi {
                return Err(Error::Overflow {
                    what: "apical accumulator",
                    value: aa,
                    width: self.config.apical_width,
                });
            }

            // SWM, somatic side: stimulus and recurrent spikes share the
            // weighting module.
            gated.clear();
            let soma_row = self.weights.w_soma.row(j);
            for (i, &w) in soma_row.iter().enumerate() {
                gated.push(gate_weight(stimulus_spikes.get(i), w));
            }
            let rec_row = self.weights.w_recurrent.row(j);
            for (i, &w) in rec_row.iter().enumerate() {
                gated.push(gate_weight(self.prev_spikes.get(i), w));
            }
            let (som_drive, _) = swm_reduce(&gated, &self.config)?;
            self.gated = gated;

            // MU operands are N-bit; a wider drive means the weighting
            // module output register is undersized.
            if som_drive < -(apical_hi + 1) || som_drive > apical_hi {
                return Err(Error::Overflow {
                    what: "somatic drive",
                    value: som_drive,
                    width: self.config.apical_width,
                });
            }
            let product = mu_multiply(aa as i64, som_drive as i64, self.config.apical_width);

            // SC: somatic leakage subtractor and accumulator, floored at
            // zero like the apical side.
            let (_, somatic_hi) = Signedness::Signed.range(p.somatic_width);
            let sa_raw = self.v_somatic[j] as i128 - p.beta_leak as i128 + product;
            let sa = if sa_raw < 0 { 0 } else { sa_raw };
            if sa > somatic_hi {
                return Err(Error::Overflow {
                    what: "somatic accumulator",
                    value: sa,
                    width: p.somatic_width,
                });
            }

            // TC: compare and, on a spike, drive the somatic register's
            // RESET in the same cycle.
            let spike = sa >= p.v_threshold as i128;
            let sa_after = if spike { 0 } else { sa };

            self.v_apical[j] = aa as i64;
            self.v_somatic[j] = sa_after as i64;
            if spike {
                out.set(j, true);
            }

            self.record(j, Block::SwmContext, ctx_sum);
            self.record(j, Block::SwmSomatic, som_drive);
            self.record(j, Block::ApicalAcc, aa);
            self.record(j, Block::MuProduct, product);
            self.record(j, Block::SomaticAcc, sa_after);
            self.record(j, Block::ThresholdOut, spike as i128);
        }

        self.prev_spikes = out.clone();
        self.cycle += 1;
        if let Some(trace) = &mut self.trace {
            trace.cycles = self.cycle;
        }
        Ok(out)
    }
}

/// Runs the datapath over event streams and returns the raster plus the
/// full pipeline trace.
pub fn run_datapath(
    config: DatapathConfig,
    weights: &WeightSet,
    params: &[NeuronParams],
    context: &EventStream,
    stimulus: &EventStream,
    cycles: u64,
) -> Result<(SpikeRaster, PipelineTrace)> {
    let mut sim = DatapathSim::new(config, weights.clone(), params.to_vec())?;
    sim.enable_trace();
    let mut ctx_cursor = context.cursor();
    let mut stim_cursor = stimulus.cursor();
    let mut raster = SpikeRaster::new(weights.neurons());
    for _ in 0..cycles {
        let ctx = ctx_cursor.next_cycle();
        let stim = stim_cursor.next_cycle();
        let out = sim.step(ctx, stim)?;
        raster.push(out);
    }
    let trace = sim.take_trace().expect("trace was enabled");
    Ok((raster, trace))
}
