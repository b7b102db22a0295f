//! Deadline-slot planning and per-block frequency selection.
//!
//! The deadline is cut into `n` equal slots, one per block, each ending in
//! a reserved error margin. Every block is sampled once; the planner bounds
//! its work by the estimate plus the 95% confidence half-width and picks
//! the cheapest frequency whose predicted time fits the usable part of the
//! slot. When nothing fits, the block runs at the top frequency and is
//! flagged at risk.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::power::{EnergyMode, FrequencyLevel, ServerModel};
use crate::seed::derive_seed;
use crate::workload::{true_cycles, DataBlock};

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.96;

/// Equal-slot layout of a deadline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotPlan {
    pub deadline: f64,
    pub n_slots: usize,
    pub slot_duration: f64,
    pub error_margin: f64,
    pub usable_budget: f64,
}

impl SlotPlan {
    pub fn slot_start(&self, slot: usize) -> f64 {
        slot as f64 * self.slot_duration
    }

    /// End of `slot`. The last slot ends exactly at the deadline.
    pub fn slot_end(&self, slot: usize) -> f64 {
        if slot + 1 == self.n_slots {
            self.deadline
        } else {
            (slot + 1) as f64 * self.slot_duration
        }
    }
}

pub fn plan_slots(deadline: f64, n_slots: usize, error_margin: f64) -> Result<SlotPlan> {
    if !(deadline > 0.0 && deadline.is_finite()) {
        return Err(Error::invalid("deadline", format!("must be positive, got {deadline}")));
    }
    if n_slots == 0 {
        return Err(Error::invalid("n_slots", "must be at least 1"));
    }
    if !(0.0..1.0).contains(&error_margin) {
        return Err(Error::invalid(
            "error_margin",
            format!("must lie in [0, 1), got {error_margin}"),
        ));
    }
    let slot_duration = deadline / n_slots as f64;
    Ok(SlotPlan {
        deadline,
        n_slots,
        slot_duration,
        error_margin,
        usable_budget: slot_duration * (1.0 - error_margin),
    })
}

/// Summary statistics of a uniform sample of a block's record costs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSample {
    pub block_id: usize,
    pub sampled_record_count: u64,
    pub sampled_cost_mean: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub sampled_cost_stddev: f64,
    pub sampled_cost_sum: f64,
    /// Fraction of the block actually read, `sampled / record_count`.
    pub sample_fraction: f64,
}

/// Draws `ceil(fraction * record_count)` records without replacement.
pub fn sample_block(block: &DataBlock, fraction: f64, seed: u64) -> Result<BlockSample> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid(
            "sampling_fraction",
            format!("must lie in (0, 1], got {fraction}"),
        ));
    }
    let population = block.record_count;
    let size = ((fraction * population as f64).ceil() as u64).min(population);
    if size == 0 {
        return Err(Error::invalid("sampling_fraction", "sample would hold no records"));
    }

    let costs: Vec<f64> = if size == population {
        (0..population).map(|i| block.record_cycles(i)).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picked = rand::seq::index::sample(&mut rng, population as usize, size as usize).into_vec();
        picked.sort_unstable();
        picked.into_iter().map(|i| block.record_cycles(i as u64)).collect()
    };

    let sum: f64 = costs.iter().sum();
    let mean = sum / size as f64;
    let stddev = if size > 1 {
        let ss: f64 = costs.iter().map(|c| (c - mean) * (c - mean)).sum();
        (ss / (size - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(BlockSample {
        block_id: block.id,
        sampled_record_count: size,
        sampled_cost_mean: mean,
        sampled_cost_stddev: stddev,
        sampled_cost_sum: sum,
        sample_fraction: size as f64 / population as f64,
    })
}

/// Estimated work of a block with its 95% confidence half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockEstimate {
    pub block_id: usize,
    pub cycles_hat: f64,
    pub ci95_half_width: f64,
    pub is_exact: bool,
}

impl BlockEstimate {
    /// Upper work bound used for frequency selection.
    pub fn conservative_cycles(&self) -> f64 {
        self.cycles_hat + self.ci95_half_width
    }
}

/// Scales a sample to a block total; the half-width carries the
/// finite-population correction `sqrt((N - n) / (N - 1))`.
pub fn estimate_block(sample: &BlockSample, record_count: u64) -> Result<BlockEstimate> {
    if record_count == 0 {
        return Err(Error::invalid("record_count", "must be at least 1"));
    }
    let n = sample.sampled_record_count;
    if n == 0 || n > record_count {
        return Err(Error::invalid(
            "sampled_record_count",
            format!("{n} is outside [1, {record_count}]"),
        ));
    }
    if n == record_count {
        return Ok(BlockEstimate {
            block_id: sample.block_id,
            cycles_hat: sample.sampled_cost_sum,
            ci95_half_width: 0.0,
            is_exact: true,
        });
    }
    let big_n = record_count as f64;
    let fpc = ((big_n - n as f64) / (big_n - 1.0)).sqrt();
    let std_err = sample.sampled_cost_stddev / (n as f64).sqrt();
    Ok(BlockEstimate {
        block_id: sample.block_id,
        cycles_hat: big_n * sample.sampled_cost_mean,
        ci95_half_width: Z_95 * std_err * big_n * fpc,
        is_exact: false,
    })
}

/// Seconds to retire `cycles` at `f`.
pub fn predicted_pt(cycles: f64, f: FrequencyLevel) -> f64 {
    cycles / f.hz()
}

/// Frequency chosen for one block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyAssignment {
    pub block_id: usize,
    pub frequency: FrequencyLevel,
    pub predicted_pt: f64,
    pub predicted_energy: f64,
    pub at_risk: bool,
}

/// Minimum-energy frequency whose predicted time for the conservative work
/// bound fits the usable budget. Ties go to the lower frequency.
pub fn select_frequency(
    estimate: &BlockEstimate,
    plan: &SlotPlan,
    server: &ServerModel,
    mode: EnergyMode,
) -> Result<FrequencyAssignment> {
    let work = estimate.conservative_cycles();
    let mut best: Option<(FrequencyLevel, f64, f64)> = None;
    for &f in &server.frequencies {
        let pt = predicted_pt(work, f);
        if pt > plan.usable_budget {
            continue;
        }
        let energy = server.slot_energy(f, pt, plan.slot_duration, mode)?;
        if best.is_none_or(|(_, _, e)| energy < e) {
            best = Some((f, pt, energy));
        }
    }
    let (frequency, predicted_pt, predicted_energy, at_risk) = match best {
        Some((f, pt, e)) => (f, pt, e, false),
        None => {
            let f = server.f_max();
            let pt = predicted_pt(work, f);
            (f, pt, server.slot_energy(f, pt, plan.slot_duration, mode)?, true)
        }
    };
    Ok(FrequencyAssignment {
        block_id: estimate.block_id,
        frequency,
        predicted_pt,
        predicted_energy,
        at_risk,
    })
}

/// Per-block frequency plan over a slot layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub plan: SlotPlan,
    /// One per block, in slot order.
    pub assignments: Vec<FrequencyAssignment>,
    pub total_predicted_pt: f64,
    pub total_predicted_energy: f64,
    pub feasible: bool,
}

impl Schedule {
    fn assemble(plan: SlotPlan, assignments: Vec<FrequencyAssignment>) -> Self {
        let total_predicted_pt = assignments.iter().map(|a| a.predicted_pt).sum();
        let total_predicted_energy = assignments.iter().map(|a| a.predicted_energy).sum();
        let feasible = assignments.iter().all(|a| !a.at_risk);
        Schedule {
            plan,
            assignments,
            total_predicted_pt,
            total_predicted_energy,
            feasible,
        }
    }

    pub fn at_risk_count(&self) -> usize {
        self.assignments.iter().filter(|a| a.at_risk).count()
    }
}

fn check_layout(blocks: &[DataBlock], plan: &SlotPlan, server: &ServerModel) -> Result<()> {
    if blocks.len() != plan.n_slots {
        return Err(Error::invalid(
            "blocks",
            format!("{} blocks for {} slots", blocks.len(), plan.n_slots),
        ));
    }
    server.validate()
}

/// Data-variety-aware plan: sample, estimate, then pick each block's
/// frequency. Block `i` runs in slot `i`.
///
/// Each block is sampled with a seed derived from `seed` and its id, so the
/// result does not depend on processing order.
pub fn schedule_dv_dvfs(
    blocks: &[DataBlock],
    plan: &SlotPlan,
    server: &ServerModel,
    sampling_fraction: f64,
    mode: EnergyMode,
    seed: u64,
) -> Result<Schedule> {
    check_layout(blocks, plan, server)?;
    let assignments = blocks
        .iter()
        .map(|block| {
            let sample = sample_block(block, sampling_fraction, derive_seed(seed, block.id as u64))?;
            let estimate = estimate_block(&sample, block.record_count)?;
            select_frequency(&estimate, plan, server, mode)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Schedule::assemble(*plan, assignments))
}

/// Data-variety-oblivious baseline: every block at the top frequency.
/// Predicted times use true work, so they match what the run will take.
pub fn schedule_dvo(
    blocks: &[DataBlock],
    plan: &SlotPlan,
    server: &ServerModel,
    mode: EnergyMode,
) -> Result<Schedule> {
    check_layout(blocks, plan, server)?;
    let f = server.f_max();
    let assignments = blocks
        .iter()
        .map(|block| {
            let pt = predicted_pt(true_cycles(block), f);
            Ok(FrequencyAssignment {
                block_id: block.id,
                frequency: f,
                predicted_pt: pt,
                predicted_energy: server.slot_energy(f, pt, plan.slot_duration, mode)?,
                at_risk: pt > plan.usable_budget,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Schedule::assemble(*plan, assignments))
}
