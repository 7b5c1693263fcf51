//! Fault-injection campaigns: strategy/type/scenario matrices with paired
//! driver-present and driver-absent runs, start-by-duration sweeps, and
//! report emission.
//!
//! Every run's seed is derived from the master seed and the run's matrix
//! coordinates, so any single run can be reproduced in isolation. A run
//! pair (driver off, driver on) shares one seed; driver effects are the
//! only difference inside a pair. Runs execute in parallel but records are
//! kept in plan order, so repeated campaigns emit byte-identical reports.

use std::io::{self, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack::{AttackSpec, AttackType, Schedule, Strategy, ValuePolicy};
use crate::config::SimConfig;
use crate::hazard::{Hazard, RunResult};
use crate::rng::derive_seed;
use crate::runner::{run_scenario, RunError, RunSpec};
use crate::scenario::{Scenario, ScenarioId};

/// Which cells a campaign visits.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixSpec {
    pub strategies: Vec<Strategy>,
    pub types: Vec<AttackType>,
    pub scenarios: Vec<ScenarioId>,
    pub gaps: Vec<f64>,
    pub reps: u32,
    /// Forces one value policy across the matrix; None keeps each
    /// strategy's default binding.
    pub value_policy: Option<ValuePolicy>,
}

impl MatrixSpec {
    /// The full grid: every strategy, type, and scenario over the
    /// configured gaps and repetition count.
    pub fn full(cfg: &SimConfig) -> Self {
        MatrixSpec {
            strategies: Strategy::ALL.to_vec(),
            types: AttackType::ALL.to_vec(),
            scenarios: ScenarioId::ALL.to_vec(),
            gaps: cfg.gaps.clone(),
            reps: cfg.reps,
            value_policy: None,
        }
    }
}

/// One finished run with its matrix coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub strategy: Strategy,
    pub attack_type: AttackType,
    pub scenario: ScenarioId,
    pub gap: f64,
    pub rep: u32,
    pub policy: ValuePolicy,
    pub driver_on: bool,
    pub result: RunResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignResult {
    pub records: Vec<RunRecord>,
}

fn run_seed(cfg: &SimConfig, plan: (Strategy, AttackType, ScenarioId, f64, u32)) -> u64 {
    let (strategy, attack_type, scenario, gap, rep) = plan;
    derive_seed(
        cfg.master_seed,
        &[strategy.code(), attack_type.code(), scenario.code(), gap as u64, rep as u64],
    )
}

/// Runs the whole matrix, each cell `reps` times, each repetition once
/// without and once with the driver model, pairwise on the same seed.
pub fn run_matrix(cfg: &SimConfig, matrix: &MatrixSpec) -> Result<CampaignResult, RunError> {
    let mut plans: Vec<(RunSpec, RunRecord)> = Vec::new();
    for &strategy in &matrix.strategies {
        for &attack_type in &matrix.types {
            let policy = matrix.value_policy.unwrap_or_else(|| strategy.default_policy());
            let attack = AttackSpec { attack_type, strategy, value_policy: policy };
            for &scenario_id in &matrix.scenarios {
                for &gap in &matrix.gaps {
                    let scenario = Scenario::new(scenario_id, gap, cfg);
                    for rep in 0..matrix.reps {
                        let seed = run_seed(cfg, (strategy, attack_type, scenario_id, gap, rep));
                        for driver_on in [false, true] {
                            let spec = RunSpec::attacked(scenario, attack, driver_on, seed);
                            let template = RunRecord {
                                strategy,
                                attack_type,
                                scenario: scenario_id,
                                gap,
                                rep,
                                policy,
                                driver_on,
                                result: placeholder_result(seed),
                            };
                            plans.push((spec, template));
                        }
                    }
                }
            }
        }
    }

    let records: Result<Vec<RunRecord>, RunError> = plans
        .into_par_iter()
        .map(|(spec, mut record)| {
            record.result = run_scenario(cfg, &spec)?;
            Ok(record)
        })
        .collect();
    Ok(CampaignResult { records: records? })
}

fn placeholder_result(seed: u64) -> RunResult {
    RunResult {
        seed,
        steps_run: 0,
        dt: 0.0,
        hazards: Vec::new(),
        accident: None,
        alerts: Vec::new(),
        lane_invasions: 0,
        attack_activation: None,
        attack_stop: None,
        driver_engaged_step: None,
        driver_cause: None,
        final_speed: 0.0,
        final_offset: 0.0,
        time_to_hazard: None,
        spontaneous_hazard: false,
    }
}

/// Aggregate statistics for one (strategy, type, scenario) row.
///
/// Occurrence counts and rates cover the driver-absent runs; the prevented
/// and introduced hazard counts compare each driver pair's hazard kinds.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CellStats {
    pub runs: u32,
    pub alert_runs: u32,
    pub hazard_runs: u32,
    pub accident_runs: u32,
    pub hazard_without_alert_runs: u32,
    pub invasion_runs: u32,
    pub tth: Vec<f64>,
    pub prevented_hazards: u32,
    pub new_hazards: u32,
    pub spontaneous_runs: u32,
}

impl CellStats {
    pub fn invasion_rate(&self) -> f64 {
        if self.runs == 0 {
            0.0
        } else {
            self.invasion_runs as f64 / self.runs as f64
        }
    }

    pub fn tth_mean(&self) -> Option<f64> {
        if self.tth.is_empty() {
            None
        } else {
            Some(self.tth.iter().sum::<f64>() / self.tth.len() as f64)
        }
    }

    pub fn tth_std(&self) -> Option<f64> {
        let mean = self.tth_mean()?;
        if self.tth.len() < 2 {
            return Some(0.0);
        }
        let var = self.tth.iter().map(|t| (t - mean).powi(2)).sum::<f64>()
            / (self.tth.len() - 1) as f64;
        Some(var.sqrt())
    }
}

pub type CellKey = (Strategy, AttackType, ScenarioId);

/// Folds run records into per-cell statistics. Driver pairs are matched on
/// (cell, gap, rep); a pair contributes its kind-set difference to the
/// prevented and introduced counts.
pub fn aggregate(records: &[RunRecord]) -> Vec<(CellKey, CellStats)> {
    use std::collections::BTreeMap;

    let mut cells: BTreeMap<CellKey, CellStats> = BTreeMap::new();
    let mut pairs: BTreeMap<(CellKey, u64, u32), [Option<Vec<Hazard>>; 2]> = BTreeMap::new();

    for record in records {
        let key: CellKey = (record.strategy, record.attack_type, record.scenario);
        let stats = cells.entry(key).or_default();
        let r = &record.result;
        if !record.driver_on {
            stats.runs += 1;
            let alerted = !r.alerts.is_empty();
            let hazardous = r.has_hazard();
            stats.alert_runs += u32::from(alerted);
            stats.hazard_runs += u32::from(hazardous);
            stats.accident_runs += u32::from(r.accident.is_some());
            stats.hazard_without_alert_runs += u32::from(hazardous && !alerted);
            stats.invasion_runs += u32::from(r.lane_invasions > 0);
            stats.spontaneous_runs += u32::from(r.spontaneous_hazard);
            if let Some(tth) = r.time_to_hazard {
                stats.tth.push(tth);
            }
        }
        let slot = pairs.entry((key, record.gap.to_bits(), record.rep)).or_default();
        slot[usize::from(record.driver_on)] = Some(r.hazard_kinds());
    }

    for ((key, _, _), slot) in pairs {
        if let [Some(off), Some(on)] = slot {
            let stats = cells.entry(key).or_default();
            stats.prevented_hazards += off.iter().filter(|k| !on.contains(k)).count() as u32;
            stats.new_hazards += on.iter().filter(|k| !off.contains(k)).count() as u32;
        }
    }

    cells.into_iter().collect()
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.3}"),
        None => String::new(),
    }
}

pub const CSV_HEADER: &str = "strategy,type,scenario,runs,alerts,hazards,accidents,\
hazards_no_alerts,lane_inv_rate,tth_mean,tth_std,prevented_hazards,new_hazards";

pub fn write_csv(out: &mut impl Write, result: &CampaignResult) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for ((strategy, attack_type, scenario), stats) in aggregate(&result.records) {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{:.3},{},{},{},{}",
            strategy.label(),
            attack_type.label(),
            scenario.label(),
            stats.runs,
            stats.alert_runs,
            stats.hazard_runs,
            stats.accident_runs,
            stats.hazard_without_alert_runs,
            stats.invasion_rate(),
            fmt_opt(stats.tth_mean()),
            fmt_opt(stats.tth_std()),
            stats.prevented_hazards,
            stats.new_hazards,
        )?;
    }
    Ok(())
}

pub fn write_jsonl(out: &mut impl Write, result: &CampaignResult) -> io::Result<()> {
    for record in &result.records {
        let line = serde_json::to_string(record)?;
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn read_jsonl(text: &str) -> Result<CampaignResult, serde_json::Error> {
    let records = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect::<Result<Vec<RunRecord>, _>>()?;
    Ok(CampaignResult { records })
}

fn pct(part: u32, whole: u32) -> String {
    if whole == 0 {
        format!("{part} (0.0%)")
    } else {
        format!("{} ({:.1}%)", part, 100.0 * part as f64 / whole as f64)
    }
}

/// `master_seed` is None when the records were re-aggregated from a file:
/// the seed that produced them is not stored per record, so none is claimed.
pub fn write_summary(
    out: &mut impl Write,
    result: &CampaignResult,
    master_seed: Option<u64>,
) -> io::Result<()> {
    writeln!(out, "campaign summary")?;
    match master_seed {
        Some(seed) => {
            writeln!(out, "master seed: {seed:#x}")?;
            writeln!(
                out,
                "run seed = chained hash of (master seed, strategy code, attack code, \
scenario code, gap, rep); a driver-on/off pair shares its seed"
            )?;
        }
        None => writeln!(out, "re-aggregated from stored run records")?,
    }
    writeln!(out)?;

    let cells = aggregate(&result.records);
    for strategy in Strategy::ALL {
        let mine: Vec<&CellStats> =
            cells.iter().filter(|((s, _, _), _)| *s == strategy).map(|(_, c)| c).collect();
        if mine.is_empty() {
            continue;
        }
        let runs: u32 = mine.iter().map(|c| c.runs).sum();
        let alerts: u32 = mine.iter().map(|c| c.alert_runs).sum();
        let hazards: u32 = mine.iter().map(|c| c.hazard_runs).sum();
        let accidents: u32 = mine.iter().map(|c| c.accident_runs).sum();
        let unalerted: u32 = mine.iter().map(|c| c.hazard_without_alert_runs).sum();
        let prevented: u32 = mine.iter().map(|c| c.prevented_hazards).sum();
        let new: u32 = mine.iter().map(|c| c.new_hazards).sum();
        let spontaneous: u32 = mine.iter().map(|c| c.spontaneous_runs).sum();
        writeln!(out, "{} ({} runs per column):", strategy.label(), runs)?;
        writeln!(out, "  runs with alerts:            {}", pct(alerts, runs))?;
        writeln!(out, "  runs with hazards:           {}", pct(hazards, runs))?;
        writeln!(out, "  runs with accidents:         {}", pct(accidents, runs))?;
        writeln!(out, "  hazards with no prior alert: {}", pct(unalerted, runs))?;
        writeln!(out, "  hazards prevented by driver: {prevented}")?;
        writeln!(out, "  hazards added by driver:     {new}")?;
        if spontaneous > 0 {
            writeln!(out, "  SPONTANEOUS HAZARDS:         {spontaneous}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Writes report.csv, runs.jsonl, and summary.txt into `dir`.
pub fn emit_report(dir: &Path, result: &CampaignResult, cfg: &SimConfig) -> io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut csv = Vec::new();
    write_csv(&mut csv, result)?;
    std::fs::write(dir.join("report.csv"), csv)?;

    let mut jsonl = Vec::new();
    write_jsonl(&mut jsonl, result)?;
    std::fs::write(dir.join("runs.jsonl"), jsonl)?;

    let mut summary = Vec::new();
    write_summary(&mut summary, result, Some(cfg.master_seed))?;
    std::fs::write(dir.join("summary.txt"), summary)?;
    Ok(())
}

/// One cell of a start-by-duration sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub start: f64,
    pub duration: f64,
    pub hazardous: bool,
    pub kinds: Vec<Hazard>,
    pub tth: Option<f64>,
}

/// Runs one attack configuration over every (start, duration) pair with
/// the timing fixed explicitly, rather than drawn.
pub fn sweep_start_duration(
    cfg: &SimConfig,
    scenario: Scenario,
    attack: AttackSpec,
    starts: &[f64],
    durations: &[f64],
    driver_on: bool,
) -> Result<Vec<SweepCell>, RunError> {
    let mut plans = Vec::new();
    for &start in starts {
        for &duration in durations {
            let seed = derive_seed(
                cfg.master_seed,
                &[0x5EEB, (start * 1000.0) as u64, (duration * 1000.0) as u64],
            );
            let mut spec = RunSpec::attacked(scenario, attack, driver_on, seed);
            spec.schedule_override =
                Some(Schedule { start: Some(start), duration: Some(duration) });
            plans.push((start, duration, spec));
        }
    }
    plans
        .into_par_iter()
        .map(|(start, duration, spec)| {
            let result = run_scenario(cfg, &spec)?;
            Ok(SweepCell {
                start,
                duration,
                hazardous: result.has_hazard(),
                kinds: result.hazard_kinds(),
                tth: result.time_to_hazard,
            })
        })
        .collect()
}

pub fn write_sweep_csv(out: &mut impl Write, cells: &[SweepCell]) -> io::Result<()> {
    writeln!(out, "start,duration,hazard,kinds,tth")?;
    for cell in cells {
        let kinds =
            cell.kinds.iter().map(|k| k.label()).collect::<Vec<_>>().join("+");
        writeln!(
            out,
            "{},{},{},{},{}",
            cell.start,
            cell.duration,
            u8::from(cell.hazardous),
            kinds,
            fmt_opt(cell.tth),
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hazard::HazardEvent;

    /// Shortened horizon so matrix tests stay fast; windows shrink to fit.
    fn small_cfg() -> SimConfig {
        let mut cfg = SimConfig::default();
        cfg.steps = 800;
        cfg.timing =
            crate::attack::TimingWindows {
                start_min: 1.0,
                start_max: 2.0,
                duration_min: 0.5,
                duration_max: 1.0,
            };
        cfg.ramp_start = 2.0;
        cfg.ramp_end = 4.0;
        cfg.gaps = vec![50.0];
        cfg.reps = 2;
        cfg.validate().unwrap();
        cfg
    }

    fn tiny_matrix() -> MatrixSpec {
        MatrixSpec {
            strategies: vec![Strategy::RandomStartDuration],
            types: vec![AttackType::Deceleration],
            scenarios: vec![ScenarioId::SlowLead],
            gaps: vec![50.0],
            reps: 2,
            value_policy: None,
        }
    }

    #[test]
    fn pairs_share_seeds_and_order_is_off_then_on() {
        let cfg = small_cfg();
        let result = run_matrix(&cfg, &tiny_matrix()).unwrap();
        assert_eq!(result.records.len(), 4);
        let r = &result.records;
        assert!(!r[0].driver_on && r[1].driver_on);
        assert_eq!(r[0].result.seed, r[1].result.seed);
        assert!(!r[2].driver_on && r[3].driver_on);
        assert_eq!(r[2].result.seed, r[3].result.seed);
        // Different repetitions draw different seeds.
        assert_ne!(r[0].result.seed, r[2].result.seed);
    }

    #[test]
    fn matrix_reruns_are_byte_identical() {
        let cfg = small_cfg();
        let a = run_matrix(&cfg, &tiny_matrix()).unwrap();
        let b = run_matrix(&cfg, &tiny_matrix()).unwrap();
        let mut csv_a = Vec::new();
        let mut csv_b = Vec::new();
        write_csv(&mut csv_a, &a).unwrap();
        write_csv(&mut csv_b, &b).unwrap();
        assert_eq!(csv_a, csv_b);
        assert_eq!(a.records, b.records);
    }

    #[test]
    fn policy_override_rebinds_values() {
        let cfg = small_cfg();
        let mut matrix = tiny_matrix();
        matrix.strategies = vec![Strategy::ContextAware];
        matrix.value_policy = Some(ValuePolicy::Fixed);
        let result = run_matrix(&cfg, &matrix).unwrap();
        assert!(result.records.iter().all(|r| r.policy == ValuePolicy::Fixed));
    }

    fn record(
        driver_on: bool,
        rep: u32,
        hazards: &[Hazard],
        alerts: usize,
        tth: Option<f64>,
    ) -> RunRecord {
        let mut result = placeholder_result(1);
        result.hazards =
            hazards.iter().map(|&kind| HazardEvent { kind, step: 100 }).collect();
        result.alerts = std::iter::repeat(crate::control::AlertEvent {
            kind: crate::control::AlertKind::ForwardCollision,
            step: 5,
        })
        .take(alerts)
        .collect();
        result.time_to_hazard = tth;
        RunRecord {
            strategy: Strategy::ContextAware,
            attack_type: AttackType::Acceleration,
            scenario: ScenarioId::SlowLead,
            gap: 50.0,
            rep,
            policy: ValuePolicy::Strategic,
            driver_on,
            result,
        }
    }

    #[test]
    fn aggregation_counts_pairs_and_runs() {
        let records = vec![
            // Pair 0: hazard without driver, prevented with driver.
            record(false, 0, &[Hazard::UnsafeHeadway], 0, Some(1.5)),
            record(true, 0, &[], 1, None),
            // Pair 1: hazard in both, and the driver adds a second kind.
            record(false, 1, &[Hazard::UnsafeHeadway], 1, Some(2.5)),
            record(true, 1, &[Hazard::UnsafeHeadway, Hazard::OpenRoadStop], 1, Some(2.5)),
        ];
        let cells = aggregate(&records);
        assert_eq!(cells.len(), 1);
        let (_, stats) = &cells[0];
        assert_eq!(stats.runs, 2);
        assert_eq!(stats.alert_runs, 1);
        assert_eq!(stats.hazard_runs, 2);
        assert_eq!(stats.hazard_without_alert_runs, 1);
        assert_eq!(stats.prevented_hazards, 1);
        assert_eq!(stats.new_hazards, 1);
        assert_eq!(stats.tth, vec![1.5, 2.5]);
        assert_eq!(stats.tth_mean(), Some(2.0));
        assert!((stats.tth_std().unwrap() - (0.5f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn csv_format_is_stable() {
        let records = vec![
            record(false, 0, &[Hazard::UnsafeHeadway], 0, Some(1.5)),
            record(true, 0, &[], 1, None),
        ];
        let mut out = Vec::new();
        write_csv(&mut out, &CampaignResult { records }).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        assert_eq!(
            lines.next().unwrap(),
            "context-aware,acceleration,slow-lead,1,0,1,0,1,0.000,1.500,0.000,1,0"
        );
        assert!(lines.next().is_none());
    }

    #[test]
    fn jsonl_round_trips() {
        let cfg = small_cfg();
        let result = run_matrix(&cfg, &tiny_matrix()).unwrap();
        let mut out = Vec::new();
        write_jsonl(&mut out, &result).unwrap();
        let back = read_jsonl(std::str::from_utf8(&out).unwrap()).unwrap();
        assert_eq!(result, back);
    }

    #[test]
    fn summary_reports_percentages_per_strategy() {
        let records = vec![
            record(false, 0, &[Hazard::UnsafeHeadway], 0, Some(1.5)),
            record(true, 0, &[], 1, None),
            record(false, 1, &[], 1, None),
            record(true, 1, &[], 1, None),
        ];
        let mut out = Vec::new();
        let result = CampaignResult { records };
        write_summary(&mut out, &result, Some(0xBEEF)).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.contains("context-aware (2 runs per column):"));
        assert!(text.contains("runs with hazards:           1 (50.0%)"));
        assert!(text.contains("hazards prevented by driver: 1"));
        assert!(text.contains("master seed: 0xbeef"));
        assert!(text.contains("run seed = chained hash"));

        let mut out = Vec::new();
        write_summary(&mut out, &result, None).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.contains("re-aggregated from stored run records"));
        assert!(!text.contains("master seed"));
    }

    #[test]
    fn sweep_fixes_timing_explicitly() {
        let cfg = small_cfg();
        let scenario = Scenario::new(ScenarioId::SlowLead, 50.0, &cfg);
        let attack = AttackSpec {
            attack_type: AttackType::Deceleration,
            strategy: Strategy::RandomStartDuration,
            value_policy: ValuePolicy::Fixed,
        };
        let cells =
            sweep_start_duration(&cfg, scenario, attack, &[1.0, 2.0], &[0.5, 1.0], false)
                .unwrap();
        assert_eq!(cells.len(), 4);
        assert_eq!((cells[0].start, cells[0].duration), (1.0, 0.5));
        assert_eq!((cells[3].start, cells[3].duration), (2.0, 1.0));

        let mut out = Vec::new();
        write_sweep_csv(&mut out, &cells).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("start,duration,hazard,kinds,tth\n"));
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn emit_report_writes_all_three_files() {
        let cfg = small_cfg();
        let result = run_matrix(&cfg, &tiny_matrix()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        emit_report(dir.path(), &result, &cfg).unwrap();
        for name in ["report.csv", "runs.jsonl", "summary.txt"] {
            let path = dir.path().join(name);
            assert!(path.exists(), "{name} missing");
            assert!(std::fs::metadata(&path).unwrap().len() > 0, "{name} empty");
        }
    }
}
