//! Slot-timeline execution of a schedule against true block work.
//!
//! One server runs the blocks in slot order. Block `i` starts at the later
//! of its slot start and the previous block's end, so an overrun delays
//! every successor until some slot's slack absorbs it.
//!
//! Each trace owns the wall-clock interval from its start to the later of
//! its slot end and its own end. Under slot-average accounting that
//! interval is charged at idle power plus the dynamic energy of the work,
//! so the traces partition `[0, max(deadline, finish))` with no double
//! counting, and an undisturbed slot is charged exactly what the planner
//! predicted.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::planner::{predicted_pt, Schedule};
use crate::power::{total_energy, EnergyMode, FrequencyLevel, ServerModel};
use crate::workload::{true_cycles, DataBlock};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockTrace {
    pub block_id: usize,
    pub frequency: FrequencyLevel,
    pub start_time: f64,
    pub actual_pt: f64,
    pub end_time: f64,
    /// Time past the scheduled slot end, zero when the block fit.
    pub slot_overrun: f64,
    pub actual_energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub traces: Vec<BlockTrace>,
    /// Busy finish time: end of the last block.
    pub finish_time: f64,
    pub total_energy: f64,
    pub deadline: f64,
    pub deadline_met: bool,
    pub mode: EnergyMode,
}

impl SimulationResult {
    /// Wall-clock span covered by the energy accounting.
    pub fn accounted_span(&self) -> f64 {
        match self.mode {
            EnergyMode::SlotAverage => self.deadline.max(self.finish_time),
            EnergyMode::BusyTimeLiteral => self.traces.iter().map(|t| t.actual_pt).sum(),
        }
    }

    /// Energy over a common observation window of `horizon` seconds.
    ///
    /// Slot-average runs are extended with idle power up to `horizon`, so
    /// runs planned against different deadlines can be compared on the same
    /// interval. Busy-literal runs never charge idle time and are returned
    /// unchanged.
    pub fn energy_over_horizon(&self, server: &ServerModel, horizon: f64) -> f64 {
        match self.mode {
            EnergyMode::SlotAverage => {
                self.total_energy + server.p_idle() * (horizon - self.accounted_span()).max(0.0)
            }
            EnergyMode::BusyTimeLiteral => self.total_energy,
        }
    }
}

/// Runs `schedule` over `blocks` (block `i` in slot `i`).
pub fn execute(
    schedule: &Schedule,
    blocks: &[DataBlock],
    server: &ServerModel,
    mode: EnergyMode,
) -> Result<SimulationResult> {
    let plan = &schedule.plan;
    if blocks.len() != schedule.assignments.len() || blocks.len() != plan.n_slots {
        return Err(Error::invalid(
            "blocks",
            format!(
                "{} blocks for {} assignments over {} slots",
                blocks.len(),
                schedule.assignments.len(),
                plan.n_slots
            ),
        ));
    }

    let mut traces = Vec::with_capacity(blocks.len());
    let mut prev_end = 0.0_f64;
    for (slot, (block, assignment)) in blocks.iter().zip(&schedule.assignments).enumerate() {
        if block.id != assignment.block_id {
            return Err(Error::invalid(
                "blocks",
                format!(
                    "slot {slot} holds block {} but is assigned to block {}",
                    block.id, assignment.block_id
                ),
            ));
        }
        let f = assignment.frequency;
        let slot_start = plan.slot_start(slot);
        let slot_end = plan.slot_end(slot);
        let start = prev_end.max(slot_start);
        let actual_pt = predicted_pt(true_cycles(block), f);
        let end = start + actual_pt;
        let slot_overrun = (end - slot_end).max(0.0);
        let window = if start == slot_start && slot_overrun == 0.0 {
            plan.slot_duration
        } else {
            slot_end.max(end) - start
        };
        let actual_energy = server.slot_energy(f, actual_pt, window, mode)?;
        traces.push(BlockTrace {
            block_id: block.id,
            frequency: f,
            start_time: start,
            actual_pt,
            end_time: end,
            slot_overrun,
            actual_energy,
        });
        prev_end = end;
    }

    let finish_time = traces.iter().map(|t| t.end_time).fold(0.0, f64::max);
    let energies: Vec<f64> = traces.iter().map(|t| t.actual_energy).collect();
    Ok(SimulationResult {
        finish_time,
        total_energy: total_energy(&energies),
        deadline: plan.deadline,
        deadline_met: finish_time <= plan.deadline,
        mode,
        traces,
    })
}

/// Relative savings of a data-variety-aware run against the baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub energy_savings_pct: f64,
    pub time_increase_pct: f64,
    pub both_met_deadline: bool,
}

pub fn compare(dvfs: &SimulationResult, dvo: &SimulationResult) -> Result<ComparisonReport> {
    if !(dvo.total_energy > 0.0) {
        return Err(Error::DegenerateBaseline(format!(
            "baseline energy is {} J",
            dvo.total_energy
        )));
    }
    if !(dvo.finish_time > 0.0) {
        return Err(Error::DegenerateBaseline(format!(
            "baseline finish time is {} s",
            dvo.finish_time
        )));
    }
    Ok(ComparisonReport {
        energy_savings_pct: 100.0 * (dvo.total_energy - dvfs.total_energy) / dvo.total_energy,
        time_increase_pct: 100.0 * (dvfs.finish_time - dvo.finish_time) / dvo.finish_time,
        both_met_deadline: dvfs.deadline_met && dvo.deadline_met,
    })
}
