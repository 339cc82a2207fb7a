//! Canned parameter sweeps and statistics pooled over replicate runs.

use serde::Serialize;

use crate::error::ConfigError;
use crate::quorum::QuorumRule;
use crate::scenario::{run_batch, DecisionMode, ScenarioConfig, ScenarioResult};
use crate::Micros;

/// Cycles starting with at least this many vehicles count as large.
pub const LARGE_CYCLE: usize = 5;

/// Statistics pooled over every cycle of several runs. Throughput is the
/// mean of the per-run throughputs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub runs: usize,
    pub cycles: usize,
    pub voting_cycles: usize,
    pub multi_vehicle_cycles: usize,
    pub timeouts: usize,
    pub timeout_rate: f64,
    /// Timeout rate among cycles of 3 or 4 vehicles.
    pub timeout_rate_small: f64,
    /// Timeout rate among cycles of `LARGE_CYCLE` or more vehicles.
    pub timeout_rate_large: f64,
    pub mean_consensus_time_ms: Option<f64>,
    pub p95_consensus_time_ms: Option<f64>,
    pub mean_decision_time_ms: f64,
    pub throughput_vpm: f64,
}

fn rate(hits: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        hits as f64 / total as f64
    }
}

pub fn summarize(results: &[ScenarioResult]) -> Summary {
    let cycles: Vec<_> = results.iter().flat_map(|r| r.cycles.iter()).collect();
    let timeouts_in = |lo: usize, hi: usize| {
        let group: Vec<_> = cycles
            .iter()
            .filter(|c| (lo..hi).contains(&c.batch_size))
            .collect();
        (group.iter().filter(|c| c.timed_out).count(), group.len())
    };
    let (timeouts, multi) = timeouts_in(3, usize::MAX);
    let (small_hits, small) = timeouts_in(3, LARGE_CYCLE);
    let (large_hits, large) = timeouts_in(LARGE_CYCLE, usize::MAX);
    let mut voting: Vec<Micros> = cycles
        .iter()
        .filter(|c| c.decision_mode == DecisionMode::Voting)
        .map(|c| c.consensus_time)
        .collect();
    voting.sort_unstable();
    let ms = |us: f64| us / 1000.0;
    Summary {
        runs: results.len(),
        cycles: cycles.len(),
        voting_cycles: voting.len(),
        multi_vehicle_cycles: multi,
        timeouts,
        timeout_rate: rate(timeouts, multi),
        timeout_rate_small: rate(small_hits, small),
        timeout_rate_large: rate(large_hits, large),
        mean_consensus_time_ms: (!voting.is_empty())
            .then(|| ms(voting.iter().sum::<Micros>() as f64 / voting.len() as f64)),
        p95_consensus_time_ms: (!voting.is_empty()).then(|| {
            let rank = (0.95 * voting.len() as f64).ceil() as usize;
            ms(voting[rank.clamp(1, voting.len()) - 1] as f64)
        }),
        mean_decision_time_ms: if cycles.is_empty() {
            0.0
        } else {
            ms(cycles.iter().map(|c| c.decision_time).sum::<Micros>() as f64 / cycles.len() as f64)
        },
        throughput_vpm: if results.is_empty() {
            0.0
        } else {
            results.iter().map(|r| r.aggregates.throughput_vpm).sum::<f64>() / results.len() as f64
        },
    }
}

/// One point of a sweep: the varied settings and the pooled outcome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub lanes: u32,
    pub cav_ratio: f64,
    pub t_vision_ms: f64,
    pub quorum: QuorumRule,
    pub summary: Summary,
}

/// Run each point `base.runs` times (seeds `base.seed..`), all in one
/// parallel batch.
pub fn sweep(points: &[ScenarioConfig]) -> Result<Vec<SweepRow>, ConfigError> {
    let mut cfgs = Vec::new();
    for p in points {
        p.validate()?;
        cfgs.extend((0..p.runs).map(|i| ScenarioConfig {
            seed: p.seed.wrapping_add(u64::from(i)),
            runs: 1,
            ..*p
        }));
    }
    let mut results = run_batch(&cfgs).into_iter();
    points
        .iter()
        .map(|p| {
            let runs = results
                .by_ref()
                .take(p.runs as usize)
                .collect::<Result<Vec<_>, _>>()?;
            Ok(SweepRow {
                lanes: p.total_lanes,
                cav_ratio: p.cav_ratio,
                t_vision_ms: p.t_vision as f64 / 1000.0,
                quorum: p.quorum_mode,
                summary: summarize(&runs),
            })
        })
        .collect()
}

/// CAV ratios 0.0, 0.1, ..., 1.0.
pub fn ratio_grid(step_tenths: u32) -> Vec<f64> {
    (0..=10)
        .step_by(step_tenths.max(1) as usize)
        .map(|i| f64::from(i) / 10.0)
        .collect()
}

/// Majority against full quorum across CAV ratios.
pub fn run_quorum_comparison(base: &ScenarioConfig) -> Result<Vec<SweepRow>, ConfigError> {
    let mut points = Vec::new();
    for quorum_mode in [QuorumRule::Majority, QuorumRule::Full] {
        for cav_ratio in ratio_grid(1) {
            points.push(ScenarioConfig {
                quorum_mode,
                cav_ratio,
                ..*base
            });
        }
    }
    sweep(&points)
}

pub const T_VISION_GRID_MS: [u64; 3] = [50, 300, 500];

pub fn run_tvision_sweep(base: &ScenarioConfig) -> Result<Vec<SweepRow>, ConfigError> {
    let points: Vec<ScenarioConfig> = T_VISION_GRID_MS
        .iter()
        .map(|&ms| ScenarioConfig {
            t_vision: ms * 1000,
            ..*base
        })
        .collect();
    sweep(&points)
}

pub const LANE_GRID: [u32; 4] = [2, 4, 6, 8];

pub fn run_lane_sweep(base: &ScenarioConfig) -> Result<Vec<SweepRow>, ConfigError> {
    let mut points = Vec::new();
    for total_lanes in LANE_GRID {
        for cav_ratio in ratio_grid(2) {
            points.push(ScenarioConfig {
                total_lanes,
                cav_ratio,
                ..*base
            });
        }
    }
    sweep(&points)
}
