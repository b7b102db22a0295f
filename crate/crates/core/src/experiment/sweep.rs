//! Comparison and sensitivity sweeps over scenarios, exponents and seeds.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::{DeadlineScenario, ExperimentConfig};
use crate::planner::{plan_slots, schedule_dv_dvfs, schedule_dvo, Schedule};
use crate::seed::derive_seed;
use crate::sim::{compare, execute, SimulationResult};
use crate::workload::{generate_blocks, WorkloadSpec};

/// Stream id separating sampling seeds from workload seeds.
const SAMPLING_STREAM: u64 = 0x5A4D_504C;

#[derive(Debug, Error)]
#[error("run {scenario} z={z} seed={seed}: {source}")]
pub struct RunError {
    pub scenario: String,
    pub z: f64,
    pub seed: u64,
    #[source]
    pub source: crate::Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepKind {
    Compare,
    Variety,
    Deadline,
}

impl SweepKind {
    pub fn file_stem(self) -> &'static str {
        match self {
            SweepKind::Compare => "compare",
            SweepKind::Variety => "sweep_variety",
            SweepKind::Deadline => "sweep_deadline",
        }
    }
}

/// One (scenario, z, seed) run of both planners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub scenario: String,
    pub z: f64,
    pub seed: u64,
    pub ec_dvfs: f64,
    pub ec_dvo: f64,
    pub ft_dvfs: f64,
    pub ft_dvo: f64,
    pub savings_pct: f64,
    pub time_increase_pct: f64,
    pub deadline_met_dvfs: bool,
    pub deadline_met_dvo: bool,
    pub deadline: f64,
    /// Blocks the planner could not fit in any frequency.
    pub at_risk_blocks: usize,
    pub n_blocks: usize,
}

/// Per-(scenario, z) means, with both approaches normalized to the
/// baseline's mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub scenario: String,
    pub z: f64,
    pub runs: usize,
    pub mean_ec_dvfs: f64,
    pub mean_ec_dvo: f64,
    pub mean_ft_dvfs: f64,
    pub mean_ft_dvo: f64,
    pub norm_energy_dvfs: f64,
    pub norm_energy_dvo: f64,
    pub norm_time_dvfs: f64,
    pub norm_time_dvo: f64,
    pub mean_savings_pct: f64,
    pub mean_time_increase_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub kind: SweepKind,
    pub rows: Vec<RunRow>,
    pub aggregates: Vec<AggregateRow>,
    /// Scenarios where every block of every run was at risk.
    pub infeasible_scenarios: Vec<String>,
    /// Broken deadline-ordering checks, one message each.
    pub violations: Vec<String>,
}

impl SweepReport {
    /// True when the CLI should exit nonzero.
    pub fn has_failures(&self) -> bool {
        !self.infeasible_scenarios.is_empty() || !self.violations.is_empty()
    }
}

/// Everything produced by one run, before it is reduced to a row.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub row: RunRow,
    pub dvfs_schedule: Schedule,
    pub dvfs: SimulationResult,
    pub dvo: SimulationResult,
}

/// Workload of a scenario: costs scaled, exponent and seed substituted.
pub fn scenario_workload(base: &WorkloadSpec, scenario: &DeadlineScenario, z: f64, seed: u64) -> WorkloadSpec {
    let mut w = base.clone();
    w.zipf.z = z;
    w.rng_seed = seed;
    w.cycles_per_hit *= scenario.work_scale;
    w.cycles_per_miss *= scenario.work_scale;
    w
}

/// Plans and simulates both approaches for one scenario, exponent and seed.
pub fn run_single(
    config: &ExperimentConfig,
    scenario: &DeadlineScenario,
    z: f64,
    seed: u64,
) -> Result<RunOutcome, RunError> {
    let wrap = |source| RunError {
        scenario: scenario.label.clone(),
        z,
        seed,
        source,
    };
    let workload = scenario_workload(&config.workload, scenario, z, seed);
    let mut server = config.server.clone();
    if let Some(u) = scenario.u_full {
        server.u_full = u;
    }
    let mode = config.energy_mode;

    let blocks = generate_blocks(&workload).map_err(wrap)?;
    let plan = plan_slots(scenario.deadline, blocks.len(), config.error_margin).map_err(wrap)?;
    let sampling_seed = derive_seed(seed, SAMPLING_STREAM);
    let dvfs_schedule = schedule_dv_dvfs(&blocks, &plan, &server, config.sampling_fraction, mode, sampling_seed)
        .map_err(wrap)?;
    let dvo_schedule = schedule_dvo(&blocks, &plan, &server, mode).map_err(wrap)?;
    let dvfs = execute(&dvfs_schedule, &blocks, &server, mode).map_err(wrap)?;
    let dvo = execute(&dvo_schedule, &blocks, &server, mode).map_err(wrap)?;
    let cmp = compare(&dvfs, &dvo).map_err(wrap)?;

    let row = RunRow {
        scenario: scenario.label.clone(),
        z,
        seed,
        ec_dvfs: dvfs.total_energy,
        ec_dvo: dvo.total_energy,
        ft_dvfs: dvfs.finish_time,
        ft_dvo: dvo.finish_time,
        savings_pct: cmp.energy_savings_pct,
        time_increase_pct: cmp.time_increase_pct,
        deadline_met_dvfs: dvfs.deadline_met,
        deadline_met_dvo: dvo.deadline_met,
        deadline: scenario.deadline,
        at_risk_blocks: dvfs_schedule.at_risk_count(),
        n_blocks: blocks.len(),
    };
    Ok(RunOutcome {
        row,
        dvfs_schedule,
        dvfs,
        dvo,
    })
}

/// Runs every (scenario, z, seed) combination in parallel, returned in
/// scenario-major, then z, then seed order.
fn run_grid(config: &ExperimentConfig, zs: &[f64]) -> Result<Vec<RunOutcome>, RunError> {
    let jobs: Vec<(&DeadlineScenario, f64, u64)> = config
        .deadline_scenarios
        .iter()
        .flat_map(|s| zs.iter().flat_map(move |&z| config.seeds.iter().map(move |&seed| (s, z, seed))))
        .collect();
    jobs.into_par_iter()
        .map(|(s, z, seed)| run_single(config, s, z, seed))
        .collect()
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

/// Groups rows by (scenario, z) in first-appearance order.
pub fn aggregate(rows: &[RunRow]) -> Vec<AggregateRow> {
    let mut order: Vec<(String, u64)> = Vec::new();
    let mut groups: BTreeMap<(String, u64), Vec<&RunRow>> = BTreeMap::new();
    for row in rows {
        let key = (row.scenario.clone(), row.z.to_bits());
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(row);
    }
    order
        .into_iter()
        .map(|key| {
            let g = &groups[&key];
            let mean_ec_dvfs = mean(g.iter().map(|r| r.ec_dvfs));
            let mean_ec_dvo = mean(g.iter().map(|r| r.ec_dvo));
            let mean_ft_dvfs = mean(g.iter().map(|r| r.ft_dvfs));
            let mean_ft_dvo = mean(g.iter().map(|r| r.ft_dvo));
            AggregateRow {
                scenario: key.0,
                z: f64::from_bits(key.1),
                runs: g.len(),
                mean_ec_dvfs,
                mean_ec_dvo,
                mean_ft_dvfs,
                mean_ft_dvo,
                norm_energy_dvfs: mean_ec_dvfs / mean_ec_dvo,
                norm_energy_dvo: 1.0,
                norm_time_dvfs: mean_ft_dvfs / mean_ft_dvo,
                norm_time_dvo: 1.0,
                mean_savings_pct: mean(g.iter().map(|r| r.savings_pct)),
                mean_time_increase_pct: mean(g.iter().map(|r| r.time_increase_pct)),
            }
        })
        .collect()
}

/// Scenarios in which every run had every block at risk.
fn infeasible_scenarios(config: &ExperimentConfig, rows: &[RunRow]) -> Vec<String> {
    config
        .deadline_scenarios
        .iter()
        .filter(|s| {
            let mut runs = rows.iter().filter(|r| r.scenario == s.label).peekable();
            runs.peek().is_some() && runs.all(|r| r.at_risk_blocks == r.n_blocks)
        })
        .map(|s| s.label.clone())
        .collect()
}

fn build(kind: SweepKind, config: &ExperimentConfig, outcomes: &[RunOutcome], violations: Vec<String>) -> SweepReport {
    let rows: Vec<RunRow> = outcomes.iter().map(|o| o.row.clone()).collect();
    SweepReport {
        kind,
        aggregates: aggregate(&rows),
        infeasible_scenarios: infeasible_scenarios(config, &rows),
        violations,
        rows,
    }
}

/// Both approaches on every scenario and seed at the workload's own `z`.
pub fn run_comparison(config: &ExperimentConfig) -> Result<SweepReport, RunError> {
    let outcomes = run_grid(config, &[config.workload.zipf.z])?;
    Ok(build(SweepKind::Compare, config, &outcomes, Vec::new()))
}

/// The comparison repeated for every exponent in `z_sweep`.
pub fn run_variety_sweep(config: &ExperimentConfig) -> Result<SweepReport, RunError> {
    let outcomes = run_grid(config, &config.z_values())?;
    Ok(build(SweepKind::Variety, config, &outcomes, Vec::new()))
}

/// Deadline sensitivity. Within each scenario group, energy must not rise
/// as the deadline grows, for every (z, seed). Energies are compared over
/// the group's common horizon (see
/// [`SimulationResult::energy_over_horizon`]), so the longer deadline is not
/// penalized for idle time the shorter run also spends powered on.
pub fn run_deadline_sweep(config: &ExperimentConfig) -> Result<SweepReport, RunError> {
    let outcomes = run_grid(config, &[config.workload.zipf.z])?;
    let violations = deadline_violations(config, &outcomes);
    Ok(build(SweepKind::Deadline, config, &outcomes, violations))
}

/// Checks energy monotonicity in the deadline within scenario groups.
pub fn deadline_violations(config: &ExperimentConfig, outcomes: &[RunOutcome]) -> Vec<String> {
    let scenario_of = |label: &str| {
        config
            .deadline_scenarios
            .iter()
            .find(|s| s.label == label)
            .expect("rows come from configured scenarios")
    };
    let mut groups: BTreeMap<(String, u64, u64), Vec<&RunOutcome>> = BTreeMap::new();
    for o in outcomes {
        let s = scenario_of(&o.row.scenario);
        groups
            .entry((s.group_key().to_string(), o.row.z.to_bits(), o.row.seed))
            .or_default()
            .push(o);
    }
    let mut violations = Vec::new();
    for ((group, z_bits, seed), mut runs) in groups {
        runs.sort_by(|a, b| a.row.deadline.total_cmp(&b.row.deadline));
        let horizon = runs
            .iter()
            .map(|o| o.dvfs.accounted_span())
            .fold(0.0, f64::max);
        let energies: Vec<(f64, &str)> = runs
            .iter()
            .map(|o| {
                let s = scenario_of(&o.row.scenario);
                let mut server = config.server.clone();
                if let Some(u) = s.u_full {
                    server.u_full = u;
                }
                (o.dvfs.energy_over_horizon(&server, horizon), s.label.as_str())
            })
            .collect();
        for pair in energies.windows(2) {
            let ((shorter, a), (longer, b)) = (pair[0], pair[1]);
            if longer > shorter * (1.0 + 1e-12) {
                violations.push(format!(
                    "group {group:?} z={} seed={seed}: {b} uses {longer} J > {a} {shorter} J",
                    f64::from_bits(z_bits)
                ));
            }
        }
    }
    violations
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::config::parse_config;
    use std::path::Path;

    fn config(extra: &str) -> ExperimentConfig {
        parse_config(extra, Path::new(".")).unwrap()
    }

    #[test]
    fn uniform_tight_workload_saves_nothing() {
        let c = config(
            "seeds = [4]\n[workload]\nn_blocks = 5\nrecords_per_block = 1000\ntotal_hit_records = 500\n\
             cycles_per_hit = 5.0e6\ncycles_per_miss = 2.0e6\nzipf = { z = 0.0, n = 5 }\n\
             [[deadline_scenarios]]\nlabel = \"tight\"\ndeadline = 5.0\n",
        );
        let r = run_comparison(&c).unwrap();
        assert_eq!(r.rows.len(), 1);
        assert_eq!(r.rows[0].savings_pct, 0.0);
        assert_eq!(r.rows[0].time_increase_pct, 0.0);
    }

    #[test]
    fn row_count_is_grid_size() {
        let c = config("seeds = [1, 2, 3]\nz_sweep = [0.0, 1.0]\npresets = [\"benchmarks\"]\n");
        let r = run_variety_sweep(&c).unwrap();
        assert_eq!(r.rows.len(), 2 * 3 * 10);
        assert_eq!(r.aggregates.len(), 2 * 10);
        assert!(r.aggregates.iter().all(|a| a.norm_energy_dvo == 1.0 && a.norm_time_dvo == 1.0));
        let first: Vec<(&str, f64, u64)> = r.rows[..4].iter().map(|x| (x.scenario.as_str(), x.z, x.seed)).collect();
        assert_eq!(
            first,
            vec![
                ("wordcount-tight", 0.0, 1),
                ("wordcount-tight", 0.0, 2),
                ("wordcount-tight", 0.0, 3),
                ("wordcount-tight", 1.0, 1)
            ]
        );
    }

    #[test]
    fn normalization_matches_raw_means() {
        let c = config("seeds = [1, 2, 3, 4, 5]\npresets = [\"benchmarks\"]\n");
        let r = run_comparison(&c).unwrap();
        for a in &r.aggregates {
            let rows: Vec<&RunRow> = r.rows.iter().filter(|x| x.scenario == a.scenario).collect();
            let n = rows.len() as f64;
            let e_dv = rows.iter().map(|x| x.ec_dvfs).sum::<f64>() / n;
            let e_dvo = rows.iter().map(|x| x.ec_dvo).sum::<f64>() / n;
            assert!((a.norm_energy_dvfs - e_dv / e_dvo).abs() < 1e-12);
        }
    }

    #[test]
    fn equal_deadlines_give_equal_energy() {
        let c = config(
            "seeds = [1, 2]\n\
             [[deadline_scenarios]]\nlabel = \"a\"\ndeadline = 1000.0\ngroup = \"g\"\n\
             [[deadline_scenarios]]\nlabel = \"b\"\ndeadline = 1000.0\ngroup = \"g\"\n",
        );
        let r = run_deadline_sweep(&c).unwrap();
        assert!(r.violations.is_empty());
        for seed in [1, 2] {
            let e: Vec<f64> = r.rows.iter().filter(|x| x.seed == seed).map(|x| x.ec_dvfs).collect();
            assert_eq!(e[0], e[1]);
        }
    }

    #[test]
    fn hopeless_scenario_is_flagged() {
        let c = config(
            "seeds = [1]\n\
             [[deadline_scenarios]]\nlabel = \"ok\"\ndeadline = 1000.0\ngroup = \"g\"\n\
             [[deadline_scenarios]]\nlabel = \"hopeless\"\ndeadline = 10.0\ngroup = \"g\"\n",
        );
        let r = run_deadline_sweep(&c).unwrap();
        assert_eq!(r.infeasible_scenarios, vec!["hopeless".to_string()]);
        assert!(r.has_failures());
        let row = r.rows.iter().find(|x| x.scenario == "hopeless").unwrap();
        assert_eq!(row.at_risk_blocks, row.n_blocks);
        assert!(!row.deadline_met_dvfs);
    }

    #[test]
    fn wordcount_firm_saves_at_least_tight() {
        let c = config("seeds = [11]\npresets = [\"benchmarks\"]\n");
        let wc = |label: &str| c.deadline_scenarios.iter().find(|s| s.label == label).unwrap().clone();
        let tight = run_single(&c, &wc("wordcount-tight"), 2.0, 11).unwrap();
        let firm = run_single(&c, &wc("wordcount-firm"), 2.0, 11).unwrap();
        assert!(firm.row.savings_pct >= tight.row.savings_pct);
    }

    #[test]
    fn runs_are_deterministic() {
        let c = config("seeds = [1, 2, 3]\nz_sweep = [1.0, 2.0]\npresets = [\"benchmarks\"]\n");
        assert_eq!(run_variety_sweep(&c).unwrap(), run_variety_sweep(&c).unwrap());
    }
}
