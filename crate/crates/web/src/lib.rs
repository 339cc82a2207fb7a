//! WebAssembly bindings for the browser demo. Every export takes plain
//! numbers or strings and returns a JSON document.

use intersection_consensus::engine::{run_voting, Participant, TraceEntry, VotingParams};
use intersection_consensus::net::{DelayKind, DelayModel, Transport};
use intersection_consensus::scenario::{DecisionMode, ScenarioConfig};
use intersection_consensus::suites::{summarize, Summary};
use intersection_consensus::{run_replicates, Address, Approach, IntersectionGeometry, Movement, PathDirection, QuorumRule};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn geometry(lanes: u32) -> Result<IntersectionGeometry, String> {
    IntersectionGeometry::new(lanes).map_err(|_| format!("lanes must be 2, 4, 6 or 8, not {lanes}"))
}

fn quorum_rule(name: &str) -> Result<QuorumRule, String> {
    match name {
        "majority" => Ok(QuorumRule::Majority),
        "full" => Ok(QuorumRule::Full),
        other => Err(format!("unknown quorum `{other}`")),
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("plain data serializes")
}

#[derive(Serialize)]
struct Matrix {
    lanes: u32,
    directions: Vec<String>,
    conflicts: Vec<Vec<bool>>,
}

pub fn conflict_matrix_json(lanes: u32) -> Result<String, String> {
    let g = geometry(lanes)?;
    let dirs = g.all_directions();
    let conflicts = dirs
        .iter()
        .map(|a| dirs.iter().map(|b| g.conflicts(a, b).map_err(|e| e.to_string())).collect())
        .collect::<Result<_, _>>()?;
    Ok(to_json(&Matrix {
        lanes,
        directions: dirs.iter().map(|d| d.to_string()).collect(),
        conflicts,
    }))
}

#[derive(Serialize)]
struct Vehicle {
    address: u32,
    plate: String,
    direction: String,
}

#[derive(Serialize)]
struct CycleTrace {
    vehicles: Vec<Vehicle>,
    leader: Option<u32>,
    co_passers: Vec<u32>,
    consensus_time_us: u64,
    timed_out: bool,
    rounds: u32,
    messages: u64,
    trace: Vec<TraceEntry>,
}

/// One voting cycle among `vehicles` CAVs on distinct entry lanes.
pub fn trace_cycle_json(vehicles: u32, lanes: u32, quorum: &str, loss: f64, seed: u64) -> Result<String, String> {
    let g = geometry(lanes)?;
    if vehicles < 3 || vehicles as usize > g.max_batch() {
        return Err(format!("vehicles must be between 3 and {}", g.max_batch()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per_approach = g.lanes_per_approach() as u8;
    let mut slots: Vec<(Approach, u8)> = Approach::ALL
        .iter()
        .flat_map(|&a| (0..per_approach).map(move |l| (a, l)))
        .collect();
    slots.shuffle(&mut rng);
    let participants: Vec<Participant> = slots
        .iter()
        .take(vehicles as usize)
        .enumerate()
        .map(|(i, &(a, lane))| Participant {
            address: Address(i as u32),
            plate: (0..7).map(|_| char::from(b"0123456789ABCDEFGHJKLMNPRSTUVWXYZ"[rng.random_range(0..33)])).collect(),
            direction: PathDirection::new(a, Movement::ALL[rng.random_range(0..3)], lane),
            responsive: true,
        })
        .collect();
    let defaults = ScenarioConfig::default();
    let params = VotingParams {
        geometry: g,
        quorum_rule: quorum_rule(quorum)?,
        t_vision: defaults.t_vision,
        jitter_bound: defaults.jitter_bound,
        handling_time: defaults.handling_time,
        drain_after_leader: false,
    };
    let model = DelayModel::new(DelayKind::default(), loss, seed).map_err(|e| e.to_string())?;
    let mut transport = Transport::new(model);
    let mut trace = Vec::new();
    let out = run_voting(&participants, &params, 0, &mut transport, &mut rng, Some(&mut trace)).map_err(|e| e.to_string())?;
    Ok(to_json(&CycleTrace {
        vehicles: participants
            .iter()
            .map(|p| Vehicle {
                address: p.address.0,
                plate: p.plate.clone(),
                direction: p.direction.to_string(),
            })
            .collect(),
        leader: out.leader.map(|a| a.0),
        co_passers: out.co_passers.iter().map(|a| a.0).collect(),
        consensus_time_us: out.consensus_time,
        timed_out: out.timed_out,
        rounds: out.rounds,
        messages: out.messages,
        trace,
    }))
}

#[derive(Serialize)]
struct ScenarioSummary {
    summary: Summary,
    voting_share: f64,
}

pub fn scenario_summary_json(
    lanes: u32,
    vehicles: u32,
    cav_ratio: f64,
    quorum: &str,
    loss: f64,
    seed: u64,
    runs: u32,
) -> Result<String, String> {
    let cfg = ScenarioConfig {
        total_lanes: lanes,
        n_vehicles: vehicles,
        cav_ratio,
        quorum_mode: quorum_rule(quorum)?,
        loss_prob: loss,
        seed,
        runs,
        ..ScenarioConfig::default()
    };
    let results = run_replicates(&cfg).map_err(|e| e.to_string())?;
    let cycles = results.iter().map(|r| r.cycles.len()).sum::<usize>();
    let voting = results
        .iter()
        .flat_map(|r| &r.cycles)
        .filter(|c| c.decision_mode == DecisionMode::Voting)
        .count();
    Ok(to_json(&ScenarioSummary {
        summary: summarize(&results),
        voting_share: if cycles == 0 { 0.0 } else { voting as f64 / cycles as f64 },
    }))
}

#[wasm_bindgen(js_name = conflictMatrix)]
pub fn conflict_matrix(lanes: u32) -> Result<String, JsError> {
    conflict_matrix_json(lanes).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = traceCycle)]
pub fn trace_cycle(vehicles: u32, lanes: u32, quorum: &str, loss: f64, seed: u32) -> Result<String, JsError> {
    trace_cycle_json(vehicles, lanes, quorum, loss, u64::from(seed)).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = scenarioSummary)]
pub fn scenario_summary(
    lanes: u32,
    vehicles: u32,
    cav_ratio: f64,
    quorum: &str,
    loss: f64,
    seed: u32,
    runs: u32,
) -> Result<String, JsError> {
    scenario_summary_json(lanes, vehicles, cav_ratio, quorum, loss, u64::from(seed), runs).map_err(|e| JsError::new(&e))
}
