//! Server power and slot energy.
//!
//! Busy power is affine in CPU utilization,
//! `P = (P_full(f) - P_idle) * u_cpu + P_idle`, where utilization is the
//! slot's busy fraction (the utilize factor `PT / TS`) scaled by the
//! application's full-load utilization. `P_full` depends on frequency
//! through a power law anchored at one measured point, or through an
//! explicit measured table.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A CPU frequency in GHz.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FrequencyLevel(pub f64);

impl FrequencyLevel {
    pub fn ghz(self) -> f64 {
        self.0
    }

    /// Cycles per second.
    pub fn hz(self) -> f64 {
        self.0 * 1e9
    }
}

impl std::fmt::Display for FrequencyLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} GHz", self.0)
    }
}

fn default_alpha() -> f64 {
    3.0
}

/// Full-load power as a function of frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerCurve {
    pub p_idle: f64,
    pub anchor_freq: FrequencyLevel,
    pub p_full_at_anchor: f64,
    #[serde(default = "default_alpha")]
    pub exponent_alpha: f64,
    /// Measured `(GHz, watts)` points; overrides the power law when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<(f64, f64)>>,
}

impl Default for PowerCurve {
    fn default() -> Self {
        Self {
            p_idle: 100.0,
            anchor_freq: FrequencyLevel(2.8),
            p_full_at_anchor: 200.0,
            exponent_alpha: 3.0,
            table: None,
        }
    }
}

impl PowerCurve {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_idle >= 0.0 && self.p_idle.is_finite()) {
            return Err(Error::invalid("p_idle", "must be finite and >= 0"));
        }
        if !(self.anchor_freq.0 > 0.0 && self.anchor_freq.0.is_finite()) {
            return Err(Error::invalid("anchor_freq", "must be positive"));
        }
        if !(self.p_full_at_anchor > self.p_idle && self.p_full_at_anchor.is_finite()) {
            return Err(Error::invalid("p_full_at_anchor", "must exceed p_idle"));
        }
        if !(self.exponent_alpha > 0.0 && self.exponent_alpha.is_finite()) {
            return Err(Error::invalid("exponent_alpha", "must be positive"));
        }
        if let Some(table) = &self.table {
            if table.is_empty() {
                return Err(Error::invalid("table", "must hold at least one point"));
            }
            for &(ghz, watts) in table {
                if !(ghz > 0.0 && ghz.is_finite()) {
                    return Err(Error::invalid("table", format!("frequency {ghz} is not positive")));
                }
                if !(watts >= self.p_idle && watts.is_finite()) {
                    return Err(Error::invalid(
                        "table",
                        format!("{watts} W at {ghz} GHz is below p_idle ({} W)", self.p_idle),
                    ));
                }
            }
            for pair in table.windows(2) {
                if pair[1].0 <= pair[0].0 {
                    return Err(Error::invalid("table", "frequencies must be strictly ascending"));
                }
                if pair[1].1 < pair[0].1 {
                    return Err(Error::invalid("table", "power must be non-decreasing in frequency"));
                }
            }
        }
        Ok(())
    }

    /// Full-load power at `f`, in watts.
    pub fn p_full_at(&self, f: FrequencyLevel) -> Result<f64> {
        if !(f.0 > 0.0) {
            return Err(Error::invalid("f", format!("frequency must be positive, got {}", f.0)));
        }
        match &self.table {
            None => {
                let ratio = f.0 / self.anchor_freq.0;
                Ok(self.p_idle + (self.p_full_at_anchor - self.p_idle) * ratio.powf(self.exponent_alpha))
            }
            Some(table) => interpolate(table, f.0),
        }
    }

    /// Reads a two-column `GHz,watts` CSV. A non-numeric first row is
    /// treated as a header.
    pub fn load_table_csv(path: &Path) -> Result<Vec<(f64, f64)>> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_path(path)
            .map_err(|e| Error::invalid("table_csv", format!("{}: {e}", path.display())))?;
        let mut points = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::invalid("table_csv", e.to_string()))?;
            if record.len() != 2 {
                return Err(Error::invalid(
                    "table_csv",
                    format!("row {} has {} columns, expected 2", line + 1, record.len()),
                ));
            }
            let parsed = (record[0].parse::<f64>(), record[1].parse::<f64>());
            match parsed {
                (Ok(ghz), Ok(watts)) => points.push((ghz, watts)),
                _ if line == 0 => continue,
                _ => {
                    return Err(Error::invalid(
                        "table_csv",
                        format!("row {} is not numeric", line + 1),
                    ))
                }
            }
        }
        Ok(points)
    }
}

fn interpolate(table: &[(f64, f64)], ghz: f64) -> Result<f64> {
    let (lo, hi) = (table[0], table[table.len() - 1]);
    if ghz < lo.0 || ghz > hi.0 {
        return Err(Error::OutOfRange { ghz, min: lo.0, max: hi.0 });
    }
    let upper = table.partition_point(|&(g, _)| g < ghz);
    if upper == 0 {
        return Ok(lo.1);
    }
    let (g0, p0) = table[upper - 1];
    let (g1, p1) = table[upper];
    if g1 == ghz {
        return Ok(p1);
    }
    Ok(p0 + (p1 - p0) * (ghz - g0) / (g1 - g0))
}

/// Energy accounting for one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnergyMode {
    /// Slot length times slot-average power; idle time inside the slot is
    /// charged at `p_idle`.
    SlotAverage,
    /// Busy time times busy power; idle time is free.
    #[serde(rename = "busy-literal")]
    BusyTimeLiteral,
}

impl std::str::FromStr for EnergyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "slot-average" => Ok(EnergyMode::SlotAverage),
            "busy-literal" => Ok(EnergyMode::BusyTimeLiteral),
            other => Err(Error::invalid(
                "mode",
                format!("expected slot-average or busy-literal, got {other:?}"),
            )),
        }
    }
}

fn default_frequencies() -> Vec<FrequencyLevel> {
    vec![FrequencyLevel(1.6), FrequencyLevel(2.8)]
}

fn default_u_full() -> f64 {
    0.68
}

/// One server: its frequency ladder, power curve and the application's
/// CPU utilization at full load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServerModel {
    #[serde(default = "default_frequencies")]
    pub frequencies: Vec<FrequencyLevel>,
    #[serde(default)]
    pub curve: PowerCurve,
    #[serde(default = "default_u_full")]
    pub u_full: f64,
}

impl Default for ServerModel {
    fn default() -> Self {
        Self {
            frequencies: default_frequencies(),
            curve: PowerCurve::default(),
            u_full: default_u_full(),
        }
    }
}

impl ServerModel {
    pub fn validate(&self) -> Result<()> {
        if self.frequencies.is_empty() {
            return Err(Error::invalid("frequencies", "at least one frequency is required"));
        }
        for f in &self.frequencies {
            if !(f.0 > 0.0 && f.0.is_finite()) {
                return Err(Error::invalid("frequencies", format!("{} is not positive", f.0)));
            }
        }
        if self.frequencies.windows(2).any(|p| p[1].0 <= p[0].0) {
            return Err(Error::invalid("frequencies", "must be strictly ascending"));
        }
        if !(self.u_full > 0.0 && self.u_full <= 1.0) {
            return Err(Error::invalid("u_full", format!("must lie in (0, 1], got {}", self.u_full)));
        }
        self.curve.validate()?;
        for &f in &self.frequencies {
            self.curve.p_full_at(f)?;
        }
        Ok(())
    }

    pub fn f_max(&self) -> FrequencyLevel {
        *self.frequencies.last().expect("validated non-empty")
    }

    pub fn p_idle(&self) -> f64 {
        self.curve.p_idle
    }

    /// Power drawn at frequency `f` and CPU utilization `u_cpu`.
    pub fn busy_power(&self, f: FrequencyLevel, u_cpu: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&u_cpu) {
            return Err(Error::invalid("u_cpu", format!("must lie in [0, 1], got {u_cpu}")));
        }
        let p_full = self.curve.p_full_at(f)?;
        Ok((p_full - self.curve.p_idle) * u_cpu + self.curve.p_idle)
    }

    /// Energy above idle for `pt` seconds of work at `f`.
    pub fn dynamic_energy(&self, f: FrequencyLevel, pt: f64) -> Result<f64> {
        let p_full = self.curve.p_full_at(f)?;
        Ok(pt * (p_full - self.curve.p_idle) * self.u_full)
    }

    /// Energy charged for a slot of length `ts` that is busy for `pt`.
    ///
    /// Slot-average: `dynamic + max(pt, ts) * p_idle`. Work running past the
    /// slot end keeps drawing full busy power for the overrun.
    /// Busy-literal: `pt * busy_power(f, u_full) = dynamic + pt * p_idle`.
    pub fn slot_energy(&self, f: FrequencyLevel, pt: f64, ts: f64, mode: EnergyMode) -> Result<f64> {
        if !(pt >= 0.0 && pt.is_finite()) {
            return Err(Error::invalid("pt", format!("must be finite and >= 0, got {pt}")));
        }
        if !(ts > 0.0) {
            return Err(Error::invalid("ts", format!("must be positive, got {ts}")));
        }
        let dynamic = self.dynamic_energy(f, pt)?;
        let idle_time = match mode {
            EnergyMode::SlotAverage => pt.max(ts),
            EnergyMode::BusyTimeLiteral => pt,
        };
        Ok(dynamic + idle_time * self.curve.p_idle)
    }
}

/// Utilize factor `pt / ts`. Values above one mean the slot overran.
pub fn utilize_factor(pt: f64, ts: f64) -> Result<f64> {
    if !(ts > 0.0) {
        return Err(Error::invalid("ts", format!("must be positive, got {ts}")));
    }
    if !(pt >= 0.0) {
        return Err(Error::invalid("pt", format!("must be >= 0, got {pt}")));
    }
    Ok(pt / ts)
}

pub fn cpu_utilization(uf: f64, u_full: f64) -> f64 {
    uf * u_full
}

pub fn total_energy(per_slot: &[f64]) -> f64 {
    per_slot.iter().sum()
}
