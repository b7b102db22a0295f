//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.
//!
//! Tolerances are fixed here and printed with each line.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use dvscale::derive_seed;
use dvscale::experiment::sweep::RunOutcome;
use dvscale::experiment::{
    emit_report, load_config, run_comparison, run_deadline_sweep, run_single, run_variety_sweep, ExperimentConfig,
    ReportFormat,
};
use dvscale::planner::{estimate_block, plan_slots, sample_block, schedule_dv_dvfs, schedule_dvo, SlotPlan};
use dvscale::power::{EnergyMode, FrequencyLevel, PowerCurve, ServerModel};
use dvscale::sim::execute;
use dvscale::workload::{
    generate_blocks, true_cycles, zipf_weights, DataBlock, RecordJitter, WorkloadSpec, ZipfianParams,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ZIPF_TOL: f64 = 1e-12;
const ORACLE_ENERGY_REL_TOL: f64 = 1e-9;
const DOMINANCE_REL_TOL: f64 = 1e-12;
const CALIBRATION_SAVINGS: (f64, f64) = (5.0, 20.0);
const CALIBRATION_MAX_TIME_INCREASE: f64 = 10.0;
const CALIBRATION_DVO_FINISH: f64 = 0.93;
const CALIBRATION_DVO_FINISH_TOL: f64 = 0.02;
const COVERAGE_MIN: f64 = 0.93;
const SAMPLED_WORK_MAX: f64 = 0.015;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn default_config() -> ExperimentConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml");
    load_config(&path).expect("default config loads")
}

fn random_server(rng: &mut ChaCha8Rng, max_levels: usize, alpha: (f64, f64)) -> ServerModel {
    let levels = rng.gen_range(1..=max_levels);
    let mut freqs: Vec<f64> = (0..levels).map(|_| (rng.gen_range(1.0..3.6_f64) * 100.0).round() / 100.0).collect();
    freqs.sort_by(f64::total_cmp);
    freqs.dedup();
    let p_idle = rng.gen_range(40.0..150.0);
    ServerModel {
        frequencies: freqs.into_iter().map(FrequencyLevel).collect(),
        curve: PowerCurve {
            p_idle,
            anchor_freq: FrequencyLevel(rng.gen_range(1.5..3.5)),
            p_full_at_anchor: p_idle + rng.gen_range(20.0..250.0),
            exponent_alpha: rng.gen_range(alpha.0..=alpha.1),
            table: None,
        },
        u_full: rng.gen_range(0.1..=1.0),
    }
}

/// Workload whose hit split is feasible for any `z` drawn.
fn random_workload(rng: &mut ChaCha8Rng, max_blocks: usize, jitter: bool) -> WorkloadSpec {
    let n = rng.gen_range(1..=max_blocks);
    let z = rng.gen_range(0.0..3.0);
    let records = rng.gen_range(20..=400u64);
    let w1 = zipf_weights(&ZipfianParams { z, n }).unwrap()[0];
    let max_hits = ((records as f64 - 1.0) / w1).floor() as u64;
    WorkloadSpec {
        n_blocks: n,
        records_per_block: records,
        total_hit_records: rng.gen_range(0..=max_hits.min(records * n as u64)),
        cycles_per_hit: rng.gen_range(5e6..2e7),
        cycles_per_miss: rng.gen_range(1e5..5e6),
        zipf: ZipfianParams { z, n },
        rng_seed: rng.gen(),
        shuffle: rng.gen_bool(0.5),
        jitter_sigma: if jitter && rng.gen_bool(0.5) { rng.gen_range(0.05..0.5) } else { 0.0 },
    }
}

/// Deadline between 0.7x and 2.5x of the work at the top frequency.
fn random_deadline(rng: &mut ChaCha8Rng, blocks: &[DataBlock], server: &ServerModel) -> f64 {
    let work: f64 = blocks.iter().map(true_cycles).sum();
    work / server.f_max().hz() * rng.gen_range(0.7..2.5)
}

fn c1_zipf() -> Outcome {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    let mut uniform_exact = true;
    for &z in &[0.0, 0.5, 1.0, 2.0, 4.0] {
        for n in 1..=1000usize {
            let w = zipf_weights(&ZipfianParams { z, n }).unwrap();
            // Closed form with compensated summation in rank order.
            let (mut h, mut comp) = (0.0_f64, 0.0_f64);
            for j in 1..=n {
                let y = 1.0 / (j as f64).powf(z) - comp;
                let s = h + y;
                comp = (s - h) - y;
                h = s;
            }
            for (i, wi) in w.iter().enumerate() {
                let expected = 1.0 / ((i + 1) as f64).powf(z) / h;
                worst = worst.max((wi - expected).abs());
                if z == 0.0 && *wi != 1.0 / n as f64 {
                    uniform_exact = false;
                }
            }
        }
    }
    let elapsed = t.elapsed();
    outcome(
        worst <= ZIPF_TOL && uniform_exact && elapsed < Duration::from_secs(1),
        format!("max |w - closed form| = {worst:.2e} (tol {ZIPF_TOL:e}), z=0 exactly 1/n: {uniform_exact}, {elapsed:.2?} (< 1 s)"),
    )
}

fn oracle_p_full(curve: &PowerCurve, f: f64) -> f64 {
    curve.p_idle + (curve.p_full_at_anchor - curve.p_idle) * (f / curve.anchor_freq.0).powf(curve.exponent_alpha)
}

fn oracle_energy(server: &ServerModel, f: f64, cycles: f64, ts: f64, mode: EnergyMode) -> f64 {
    let pt = cycles / (f * 1e9);
    let busy = (oracle_p_full(&server.curve, f) - server.curve.p_idle) * server.u_full * pt;
    let idle = match mode {
        EnergyMode::SlotAverage => pt.max(ts),
        EnergyMode::BusyTimeLiteral => pt,
    };
    busy + idle * server.curve.p_idle
}

/// Joint exhaustive search over every per-block frequency combination.
fn oracle_schedule(work: &[f64], plan: &SlotPlan, server: &ServerModel, mode: EnergyMode) -> (Vec<usize>, f64) {
    let freqs: Vec<f64> = server.frequencies.iter().map(|f| f.0).collect();
    let k = freqs.len();
    let top = k - 1;
    let fits = |w: f64, i: usize| w / (freqs[i] * 1e9) <= plan.usable_budget;
    // Blocks that fit nowhere are pinned to the top frequency.
    let pinned: Vec<bool> = work.iter().map(|&w| !(0..k).any(|i| fits(w, i))).collect();
    let mut best: Option<(Vec<usize>, f64)> = None;
    let combos = k.pow(work.len() as u32);
    for mut code in 0..combos {
        let mut choice = Vec::with_capacity(work.len());
        for _ in 0..work.len() {
            choice.push(code % k);
            code /= k;
        }
        let ok = choice
            .iter()
            .zip(work)
            .zip(&pinned)
            .all(|((&c, &w), &p)| if p { c == top } else { fits(w, c) });
        if !ok {
            continue;
        }
        let e: f64 = choice
            .iter()
            .zip(work)
            .map(|(&c, &w)| oracle_energy(server, freqs[c], w, plan.slot_duration, mode))
            .sum();
        // Strict improvement, or equal energy with lexicographically lower frequencies.
        let better = match &best {
            None => true,
            Some((bc, be)) => e < *be || (e == *be && choice < *bc),
        };
        if better {
            best = Some((choice, e));
        }
    }
    best.expect("pinning leaves at least one combination")
}

fn c2_oracle() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC2);
    let mut mismatches = 0;
    let mut worst_rel: f64 = 0.0;
    for _ in 0..500 {
        let server = random_server(&mut rng, 4, (1.0, 4.0));
        let spec = random_workload(&mut rng, 6, true);
        let blocks = generate_blocks(&spec).unwrap();
        let mode = if rng.gen_bool(0.5) { EnergyMode::SlotAverage } else { EnergyMode::BusyTimeLiteral };
        let deadline = random_deadline(&mut rng, &blocks, &server);
        let plan = plan_slots(deadline, blocks.len(), rng.gen_range(0.0..0.2)).unwrap();
        let fraction = rng.gen_range(0.05..=1.0);
        let seed: u64 = rng.gen();

        let schedule = schedule_dv_dvfs(&blocks, &plan, &server, fraction, mode, seed).unwrap();
        let work: Vec<f64> = blocks
            .iter()
            .map(|b| {
                let s = sample_block(b, fraction, derive_seed(seed, b.id as u64)).unwrap();
                estimate_block(&s, b.record_count).unwrap().conservative_cycles()
            })
            .collect();
        let (choice, energy) = oracle_schedule(&work, &plan, &server, mode);
        let same = schedule
            .assignments
            .iter()
            .zip(&choice)
            .all(|(a, &c)| a.frequency == server.frequencies[c]);
        if !same {
            mismatches += 1;
        }
        let rel = (schedule.total_predicted_energy - energy).abs() / energy;
        worst_rel = worst_rel.max(rel);
    }
    let elapsed = t.elapsed();
    outcome(
        mismatches == 0 && worst_rel <= ORACLE_ENERGY_REL_TOL && elapsed < Duration::from_secs(10),
        format!(
            "500 instances: {mismatches} frequency mismatches, max energy rel err {worst_rel:.2e} (tol {ORACLE_ENERGY_REL_TOL:e}), {elapsed:.2?} (< 10 s)"
        ),
    )
}

fn c3_deadline_guarantee() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC3);
    let (mut feasible, mut violations) = (0, 0);
    for _ in 0..1000 {
        let server = random_server(&mut rng, 4, (1.0, 4.0));
        let blocks = generate_blocks(&random_workload(&mut rng, 10, true)).unwrap();
        let deadline = random_deadline(&mut rng, &blocks, &server);
        let plan = plan_slots(deadline, blocks.len(), rng.gen_range(0.01..0.2)).unwrap();
        let mode = if rng.gen_bool(0.5) { EnergyMode::SlotAverage } else { EnergyMode::BusyTimeLiteral };
        let schedule = schedule_dv_dvfs(&blocks, &plan, &server, 1.0, mode, rng.gen()).unwrap();
        if schedule.feasible {
            feasible += 1;
            if !execute(&schedule, &blocks, &server, mode).unwrap().deadline_met {
                violations += 1;
            }
        }
    }
    outcome(
        violations == 0,
        format!("1000 workloads, {feasible} feasible schedules, {violations} deadline misses (0 tolerated)"),
    )
}

fn c4_dominance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC4);
    let mode = EnergyMode::SlotAverage;
    let (mut runs, mut compared, mut violations) = (0, 0, 0);
    while runs < 1000 {
        let alpha = loop {
            let a = rng.gen_range(1.0..=4.0);
            if a > 1.0 {
                break a;
            }
        };
        let mut server = random_server(&mut rng, 4, (alpha, alpha));
        server.curve.exponent_alpha = alpha;
        let blocks = generate_blocks(&random_workload(&mut rng, 8, true)).unwrap();
        let deadline = random_deadline(&mut rng, &blocks, &server);
        let plan = plan_slots(deadline, blocks.len(), rng.gen_range(0.01..0.2)).unwrap();
        let dv = schedule_dv_dvfs(&blocks, &plan, &server, 1.0, mode, rng.gen()).unwrap();
        let dvo = schedule_dvo(&blocks, &plan, &server, mode).unwrap();
        runs += 1;
        if !dv.feasible {
            continue;
        }
        compared += 1;
        let e_dv = execute(&dv, &blocks, &server, mode).unwrap().total_energy;
        let e_dvo = execute(&dvo, &blocks, &server, mode).unwrap().total_energy;
        if e_dv > e_dvo * (1.0 + DOMINANCE_REL_TOL) {
            violations += 1;
        }
    }
    outcome(
        violations == 0 && compared > 0,
        format!(
            "{runs} runs, {compared} feasible compared, {violations} with EC_dvfs > EC_dvo (rel tol {DOMINANCE_REL_TOL:e})"
        ),
    )
}

/// Raw per-seed energies of each tight/firm pair in busy-literal mode.
fn raw_pair_violations(config: &ExperimentConfig) -> (usize, usize) {
    let (mut pairs, mut bad) = (0, 0);
    for z in config.z_values() {
        for &seed in &config.seeds {
            let runs: Vec<RunOutcome> = config
                .deadline_scenarios
                .iter()
                .map(|s| run_single(config, s, z, seed).unwrap())
                .collect();
            for tight in runs.iter().filter(|o| o.row.scenario.ends_with("-tight")) {
                let name = tight.row.scenario.trim_end_matches("-tight");
                let firm = runs.iter().find(|o| o.row.scenario == format!("{name}-firm")).unwrap();
                pairs += 1;
                if firm.row.ec_dvfs > tight.row.ec_dvfs {
                    bad += 1;
                }
            }
        }
    }
    (pairs, bad)
}

fn c5_deadline_monotonicity() -> Outcome {
    let base = default_config();
    let mut horizon_checks = 0;
    let mut violations = Vec::new();
    for z in base.z_values() {
        let mut config = base.clone();
        config.workload.zipf.z = z;
        let report = run_deadline_sweep(&config).unwrap();
        horizon_checks += report.rows.len() / 2;
        violations.extend(report.violations);
    }
    let mut literal = base.clone();
    literal.energy_mode = EnergyMode::BusyTimeLiteral;
    let (pairs, raw_bad) = raw_pair_violations(&literal);
    outcome(
        violations.is_empty() && raw_bad == 0,
        format!(
            "slot-average over a common horizon: {horizon_checks} pairs, {} violations; busy-literal raw EC: {pairs} pairs, {raw_bad} violations",
            violations.len()
        ),
    )
}

fn c6_variety_ordering() -> Outcome {
    let config = default_config();
    let report = run_variety_sweep(&config).unwrap();
    let mut bad = Vec::new();
    let mut firm_summary = Vec::new();
    for s in &config.deadline_scenarios {
        let savings = |z: f64| {
            report
                .aggregates
                .iter()
                .find(|a| a.scenario == s.label && a.z == z)
                .map(|a| a.mean_savings_pct)
                .unwrap()
        };
        let (s0, s1, s2) = (savings(0.0), savings(1.0), savings(2.0));
        if !(s2 >= s1 && s1 >= s0) {
            bad.push(s.label.clone());
        }
        if s.label.ends_with("-firm") {
            firm_summary.push(format!("{} {s0:.2}/{s1:.2}/{s2:.2}", s.label));
        }
    }
    outcome(
        bad.is_empty() && config.seeds.len() >= 20,
        format!(
            "{} seeds, {} scenarios, out of order: {bad:?}; firm savings % z=0/1/2: {}",
            config.seeds.len(),
            config.deadline_scenarios.len(),
            firm_summary.join(", ")
        ),
    )
}

fn c7_calibration() -> Outcome {
    let config = default_config();
    let report = run_comparison(&config).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for a in report.aggregates.iter().filter(|a| a.scenario.ends_with("-firm")) {
        let deadline = config.deadline_scenarios.iter().find(|s| s.label == a.scenario).unwrap().deadline;
        let dvo_finish = a.mean_ft_dvo / deadline;
        let ok = (CALIBRATION_SAVINGS.0..=CALIBRATION_SAVINGS.1).contains(&a.mean_savings_pct)
            && a.mean_time_increase_pct <= CALIBRATION_MAX_TIME_INCREASE
            && (dvo_finish - CALIBRATION_DVO_FINISH).abs() <= CALIBRATION_DVO_FINISH_TOL;
        pass &= ok;
        parts.push(format!(
            "{} savings {:.2}% time +{:.2}% FT_dvo/D {:.3}",
            a.scenario, a.mean_savings_pct, a.mean_time_increase_pct, dvo_finish
        ));
    }
    outcome(
        pass && !parts.is_empty(),
        format!(
            "band {:?}%, time <= {CALIBRATION_MAX_TIME_INCREASE}%, FT_dvo/D {CALIBRATION_DVO_FINISH}+-{CALIBRATION_DVO_FINISH_TOL}: {}",
            CALIBRATION_SAVINGS,
            parts.join("; ")
        ),
    )
}

fn c8_sampling() -> Outcome {
    let t = Instant::now();
    let (populations, trials_each) = (10u64, 100u64);
    let mut covered = 0;
    let mut worst_share: f64 = 0.0;
    for p in 0..populations {
        let block = DataBlock {
            id: 1,
            record_count: 1_000_000,
            hit_count: 250_000,
            cycles_per_hit: 5e6,
            cycles_per_miss: 1e6,
            jitter: Some(RecordJitter { sigma: 0.3, seed: 1000 + p }),
        };
        let total = true_cycles(&block);
        for trial in 0..trials_each {
            let sample = sample_block(&block, 0.01, derive_seed(p, trial)).unwrap();
            let est = estimate_block(&sample, block.record_count).unwrap();
            if (est.cycles_hat - total).abs() <= est.ci95_half_width {
                covered += 1;
            }
            worst_share = worst_share.max(sample.sampled_cost_sum / total);
        }
    }
    let trials = populations * trials_each;
    let coverage = covered as f64 / trials as f64;
    let elapsed = t.elapsed();
    outcome(
        coverage >= COVERAGE_MIN && worst_share < SAMPLED_WORK_MAX && elapsed < Duration::from_secs(60),
        format!(
            "{trials} trials: coverage {:.1}% (>= {}%), max sampled work {:.3}% (< {}%), {elapsed:.2?} (< 60 s)",
            100.0 * coverage,
            100.0 * COVERAGE_MIN,
            100.0 * worst_share,
            100.0 * SAMPLED_WORK_MAX
        ),
    )
}

fn emit_all(config: &ExperimentConfig, dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let report = run_variety_sweep(config).unwrap();
    let mut files = Vec::new();
    for format in [ReportFormat::Csv, ReportFormat::Json] {
        for path in emit_report(&report, format, dir).unwrap() {
            let name = PathBuf::from(path.file_name().unwrap());
            files.push((name, std::fs::read(&path).unwrap()));
        }
    }
    files
}

fn c9_determinism() -> Outcome {
    let config = default_config();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = emit_all(&config, a.path());
    let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let second = serial.install(|| emit_all(&config, b.path()));
    let bytes: usize = first.iter().map(|(_, d)| d.len()).sum();
    outcome(
        first == second && !first.is_empty(),
        format!(
            "{} files, {bytes} bytes, parallel run vs single-thread rerun byte-identical: {}",
            first.len(),
            first == second
        ),
    )
}

type Check = fn() -> Outcome;

fn main() {
    let start = Instant::now();
    let criteria: [(&str, Check); 9] = [
        ("zipf correctness", c1_zipf),
        ("oracle equivalence", c2_oracle),
        ("deadline guarantee", c3_deadline_guarantee),
        ("baseline dominance", c4_dominance),
        ("deadline monotonicity", c5_deadline_monotonicity),
        ("variety ordering", c6_variety_ordering),
        ("calibration band", c7_calibration),
        ("sampling estimator", c8_sampling),
        ("determinism", c9_determinism),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        failures += usize::from(!o.pass);
        println!("{} {:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    let elapsed = start.elapsed();
    let fast = elapsed < Duration::from_secs(180);
    failures += usize::from(!fast);
    println!("{} 10 end-to-end runtime: {elapsed:.2?} (< 180 s)", if fast { "PASS" } else { "FAIL" });
    if failures > 0 {
        eprintln!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
