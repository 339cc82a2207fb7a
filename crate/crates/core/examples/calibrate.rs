//! Prints the mean consensus time of the baseline scenario for a range of
//! per-message handling times.

use intersection_consensus::{run_replicates, ScenarioConfig};

fn main() {
    for handling_ms in [0.0, 1.0, 2.0, 2.5, 3.0, 3.5] {
        let cfg = ScenarioConfig {
            handling_time: (handling_ms * 1000.0) as u64,
            runs: 20,
            ..ScenarioConfig::default()
        };
        let results = run_replicates(&cfg).expect("valid config");
        let (sum, n) = results
            .iter()
            .flat_map(|r| r.cycles.iter())
            .filter(|c| c.leader.is_some())
            .fold((0u64, 0u64), |(s, n), c| (s + c.consensus_time, n + 1));
        println!("handling {handling_ms:>4} ms: mean consensus {:.1} ms over {n} votes", sum as f64 / n as f64 / 1000.0);
    }
}
