//! Synthetic block-partitioned workloads with Zipf-distributed skew.
//!
//! Every block holds the same number of records. A record is either a
//! "hit" (matches the workload predicate, expensive) or a "miss" (cheap).
//! Hits are spread over ranked blocks following a Zipf law, so the
//! exponent `z` controls how uneven per-block work is: `z = 0` gives
//! identical blocks, larger `z` concentrates hits in the first ranks.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::derive_seed;

/// Exponent and population size of a Zipf law over ranks `1..=n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZipfianParams {
    pub z: f64,
    pub n: usize,
}

impl ZipfianParams {
    pub fn new(z: f64, n: usize) -> Result<Self> {
        let params = Self { z, n };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("n", "Zipf population must hold at least one rank"));
        }
        if !(self.z >= 0.0 && self.z.is_finite()) {
            return Err(Error::invalid("z", format!("exponent must be finite and >= 0, got {}", self.z)));
        }
        Ok(())
    }
}

/// Normalized Zipf frequencies `f(k; z, n) = k^-z / sum_{m=1..n} m^-z`.
///
/// Index 0 holds rank 1. The normalizer is accumulated from the smallest
/// term upwards to keep the sum-to-one error at the rounding floor.
pub fn zipf_weights(params: &ZipfianParams) -> Result<Vec<f64>> {
    params.validate()?;
    let terms: Vec<f64> = (1..=params.n).map(|k| (k as f64).powf(-params.z)).collect();
    let norm: f64 = terms.iter().rev().sum();
    Ok(terms.into_iter().map(|t| t / norm).collect())
}

fn default_jitter_sigma() -> f64 {
    0.0
}

/// Parameters of a synthetic workload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadSpec {
    /// Number of blocks, one per time slot.
    pub n_blocks: usize,
    pub records_per_block: u64,
    /// Hit records across the whole input, apportioned to blocks by rank.
    pub total_hit_records: u64,
    pub cycles_per_hit: f64,
    pub cycles_per_miss: f64,
    pub zipf: ZipfianParams,
    #[serde(default)]
    pub rng_seed: u64,
    /// Shuffle block order with `rng_seed` so slot position is not rank.
    #[serde(default)]
    pub shuffle: bool,
    /// Sigma of the mean-one lognormal noise applied to every record's cost.
    #[serde(default = "default_jitter_sigma")]
    pub jitter_sigma: f64,
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_blocks == 0 {
            return Err(Error::invalid("n_blocks", "must be at least 1"));
        }
        if self.records_per_block == 0 {
            return Err(Error::invalid("records_per_block", "must be at least 1"));
        }
        self.zipf.validate()?;
        if self.zipf.n != self.n_blocks {
            return Err(Error::invalid(
                "zipf.n",
                format!("must equal n_blocks ({}), got {}", self.n_blocks, self.zipf.n),
            ));
        }
        if !(self.cycles_per_miss >= 0.0 && self.cycles_per_miss.is_finite()) {
            return Err(Error::invalid("cycles_per_miss", "must be finite and >= 0"));
        }
        if !(self.cycles_per_hit >= self.cycles_per_miss && self.cycles_per_hit.is_finite()) {
            return Err(Error::invalid("cycles_per_hit", "must be finite and >= cycles_per_miss"));
        }
        let capacity = self.records_per_block.saturating_mul(self.n_blocks as u64);
        if self.total_hit_records > capacity {
            return Err(Error::invalid(
                "total_hit_records",
                format!("{} exceeds the {} records available", self.total_hit_records, capacity),
            ));
        }
        if !(self.jitter_sigma >= 0.0 && self.jitter_sigma.is_finite()) {
            return Err(Error::invalid("jitter_sigma", "must be finite and >= 0"));
        }
        Ok(())
    }

    /// Total cycles implied by the spec totals alone (no jitter).
    pub fn nominal_total_cycles(&self) -> f64 {
        let records = self.records_per_block * self.n_blocks as u64;
        self.total_hit_records as f64 * self.cycles_per_hit
            + (records - self.total_hit_records) as f64 * self.cycles_per_miss
    }
}

/// Per-record multiplicative cost noise, reproducible from `seed`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecordJitter {
    pub sigma: f64,
    pub seed: u64,
}

/// One equal-size input partition.
///
/// Records `0..hit_count` are hits, the rest misses. Samplers draw indices
/// uniformly, so the layout does not bias anything.
#[derive(Debug, Clone, PartialEq)]
pub struct DataBlock {
    /// Zipf rank, 1-based.
    pub id: usize,
    pub record_count: u64,
    pub hit_count: u64,
    pub cycles_per_hit: f64,
    pub cycles_per_miss: f64,
    pub jitter: Option<RecordJitter>,
}

impl DataBlock {
    /// Cost in cycles of the record at `index`.
    pub fn record_cycles(&self, index: u64) -> f64 {
        let base = if index < self.hit_count {
            self.cycles_per_hit
        } else {
            self.cycles_per_miss
        };
        match self.jitter {
            Some(j) if j.sigma > 0.0 => {
                // mu = -sigma^2/2 gives the noise factor unit mean.
                let noise = LogNormal::new(-0.5 * j.sigma * j.sigma, j.sigma)
                    .expect("sigma validated finite and positive");
                let mut rng = SplitMix64::seed_from_u64(derive_seed(j.seed, index));
                base * noise.sample(&mut rng)
            }
            _ => base,
        }
    }
}

/// Ground-truth work of a block in cycles.
///
/// Without jitter this is the closed form `hits * c_hit + misses * c_miss`;
/// with jitter it is the sum of every record's noisy cost, in index order.
pub fn true_cycles(block: &DataBlock) -> f64 {
    match block.jitter {
        Some(j) if j.sigma > 0.0 => (0..block.record_count).map(|i| block.record_cycles(i)).sum(),
        _ => {
            block.hit_count as f64 * block.cycles_per_hit
                + (block.record_count - block.hit_count) as f64 * block.cycles_per_miss
        }
    }
}

/// Splits `total` into integer parts proportional to `weights` with the
/// largest-remainder rule. Ties go to the lower index.
fn apportion(total: u64, weights: &[f64]) -> Vec<u64> {
    let quotas: Vec<f64> = weights.iter().map(|w| w * total as f64).collect();
    let mut counts: Vec<u64> = quotas.iter().map(|q| q.floor() as u64).collect();
    let assigned: u64 = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - counts[a] as f64;
        let rb = quotas[b] - counts[b] as f64;
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    // leftover < weights.len() since every remainder is below one.
    let leftover = total.saturating_sub(assigned) as usize;
    for &i in order.iter().cycle().take(leftover) {
        counts[i] += 1;
    }
    counts
}

/// Generates the blocks of `spec`, in rank order unless `spec.shuffle`.
pub fn generate_blocks(spec: &WorkloadSpec) -> Result<Vec<DataBlock>> {
    spec.validate()?;
    let weights = zipf_weights(&spec.zipf)?;
    let hits = apportion(spec.total_hit_records, &weights);

    let mut blocks = Vec::with_capacity(spec.n_blocks);
    for (i, &hit_count) in hits.iter().enumerate() {
        let rank = i + 1;
        if hit_count > spec.records_per_block {
            return Err(Error::InfeasibleSkew {
                rank,
                hits: hit_count,
                records: spec.records_per_block,
            });
        }
        let jitter = (spec.jitter_sigma > 0.0).then(|| RecordJitter {
            sigma: spec.jitter_sigma,
            seed: derive_seed(spec.rng_seed, rank as u64),
        });
        blocks.push(DataBlock {
            id: rank,
            record_count: spec.records_per_block,
            hit_count,
            cycles_per_hit: spec.cycles_per_hit,
            cycles_per_miss: spec.cycles_per_miss,
            jitter,
        });
    }
    if spec.shuffle {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
        blocks.shuffle(&mut rng);
    }
    Ok(blocks)
}
