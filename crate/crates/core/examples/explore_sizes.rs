//! Runs the exhaustive interleaving explorer for `n` vehicles (first argument, default 3).

use intersection_consensus::explore::explore;
use intersection_consensus::QuorumRule;
use std::time::Instant;

fn main() {
    let n: usize = std::env::args().nth(1).map_or(3, |s| s.parse().unwrap());
    let t = Instant::now();
    let r = explore(n, QuorumRule::Majority).unwrap();
    println!("{r:?} in {:?}", t.elapsed());
}
