//! CSV and JSON renderings of scenario results.
//!
//! Column sets and orders are part of the interface and covered by golden
//! tests.

use std::fmt::Write as _;

use serde::Serialize;

use crate::scenario::{Aggregates, ScenarioConfig, ScenarioResult};
use crate::suites::{summarize, Summary, SweepRow};

pub const CYCLE_CSV_HEADER: &str = "run,seed,cycle,batch,start_time_us,batch_size,n_cav,n_hv,decision_mode,\
consensus_time_us,decision_time_us,timed_out,leader,co_passers,re_consensus_rounds,messages,passed,end_time_us";

pub const SWEEP_CSV_HEADER: &str = "lanes,cav_ratio,t_vision_ms,quorum,runs,cycles,voting_cycles,\
multi_vehicle_cycles,timeouts,timeout_rate,timeout_rate_small,timeout_rate_large,mean_consensus_ms,\
p95_consensus_ms,mean_decision_ms,throughput_vpm";

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.3}"))
}

/// One row per cycle, runs concatenated in order.
pub fn cycles_csv(results: &[ScenarioResult]) -> String {
    let mut out = String::from(CYCLE_CSV_HEADER);
    out.push('\n');
    for (run, r) in results.iter().enumerate() {
        for c in &r.cycles {
            let passed: Vec<String> = c.passed.iter().map(|a| a.to_string()).collect();
            writeln!(
                out,
                "{run},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.config.seed,
                c.cycle,
                c.batch,
                c.start_time,
                c.batch_size,
                c.n_cav,
                c.n_hv,
                c.decision_mode.name(),
                c.consensus_time,
                c.decision_time,
                c.timed_out,
                c.leader.map_or_else(String::new, |a| a.to_string()),
                c.co_passers,
                c.re_consensus_rounds,
                c.messages,
                passed.join(";"),
                c.end_time,
            )
            .expect("writing to a String");
        }
    }
    out
}

#[derive(Serialize)]
struct RunAggregates<'a> {
    seed: u64,
    #[serde(flatten)]
    aggregates: &'a Aggregates,
}

#[derive(Serialize)]
struct ScenarioDocument<'a> {
    config: &'a ScenarioConfig,
    summary: Summary,
    runs: Vec<RunAggregates<'a>>,
}

/// Aggregate document: the base configuration, statistics pooled over all
/// runs, and each run's own aggregates.
pub fn scenario_json(base: &ScenarioConfig, results: &[ScenarioResult]) -> String {
    let doc = ScenarioDocument {
        config: base,
        summary: summarize(results),
        runs: results
            .iter()
            .map(|r| RunAggregates {
                seed: r.config.seed,
                aggregates: &r.aggregates,
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("plain data serializes");
    s.push('\n');
    s
}

fn quorum_name(q: crate::quorum::QuorumRule) -> &'static str {
    match q {
        crate::quorum::QuorumRule::Majority => "majority",
        crate::quorum::QuorumRule::Full => "full",
    }
}

/// Long-format sweep table, one row per point.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let s = &r.summary;
        writeln!(
            out,
            "{},{:.1},{},{},{},{},{},{},{},{:.4},{:.4},{:.4},{},{},{:.3},{:.3}",
            r.lanes,
            r.cav_ratio,
            r.t_vision_ms,
            quorum_name(r.quorum),
            s.runs,
            s.cycles,
            s.voting_cycles,
            s.multi_vehicle_cycles,
            s.timeouts,
            s.timeout_rate,
            s.timeout_rate_small,
            s.timeout_rate_large,
            opt(s.mean_consensus_time_ms),
            opt(s.p95_consensus_time_ms),
            s.mean_decision_time_ms,
            s.throughput_vpm,
        )
        .expect("writing to a String");
    }
    out
}

pub fn sweep_json(rows: &[SweepRow]) -> String {
    let mut s = serde_json::to_string_pretty(rows).expect("plain data serializes");
    s.push('\n');
    s
}
