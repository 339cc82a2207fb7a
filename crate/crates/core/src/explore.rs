//! Exhaustive exploration of message interleavings for one voting round.
//!
//! Every vehicle starts at once and every message may be delivered in any
//! order. Each delivery advances a logical clock by one tick. Message loss
//! needs no separate branch: a run that loses some messages passes through
//! the same vehicle states as a run in which those messages are still in
//! flight, so checking every reachable state covers it.
//!
//! States are deduplicated after renaming timestamps to their rank. The
//! handlers only ever compare timestamps and every new one exceeds all
//! existing ones, so two states with the same ranking behave identically.

use std::collections::{HashMap, HashSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::agents::{Agent, AgentEvent, AgentOutcome, CavContext};
use crate::error::AgentError;
use crate::geometry::{Approach, IntersectionGeometry, Movement, PathDirection};
use crate::protocol::{
    Address, CandidateVerdict, ElectionStatus, ProtocolMessage, VehicleInfo, Verdict,
};
use crate::quorum::QuorumRule;
use crate::Micros;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExploreReport {
    pub vehicles: usize,
    pub states: usize,
    /// States with no message left in flight.
    pub quiescent_states: usize,
    /// Quiescent states in which somebody was elected.
    pub elected_quiescent_states: usize,
    pub max_leaders: usize,
    /// A leader whose vote counts fall short of the quorum.
    pub illegitimate_leaders: usize,
}

#[derive(Clone)]
struct State {
    infos: Vec<VehicleInfo>,
    in_flight: Vec<(usize, ProtocolMessage)>,
    clock: Micros,
}

/// Explore every interleaving among `n` vehicles that all want the same
/// movement, so no permits are involved.
pub fn explore(n: usize, rule: QuorumRule) -> Result<ExploreReport, AgentError> {
    let geometry = IntersectionGeometry::new(2)?;
    let quorum = rule.threshold(n as u32)?;
    let direction = PathDirection::new(Approach::North, Movement::Straight, 0);
    let addresses: Vec<Address> = (0..n as u32).map(Address).collect();
    let mut agents = Vec::with_capacity(n);
    for &a in &addresses {
        let info = VehicleInfo::new(a, format!("P{}", a.0), direction);
        let peers = addresses.iter().copied().filter(|&p| p != a).collect();
        agents.push(Agent::cav(info, CavContext { peers, quorum, geometry })?);
    }
    let plate_index: HashMap<String, u64> = agents
        .iter()
        .enumerate()
        .map(|(i, a)| (a.info.plate.clone(), i as u64))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut start = State {
        infos: Vec::new(),
        in_flight: Vec::new(),
        clock: 1,
    };
    for agent in agents.iter_mut() {
        let out = agent.on_event(AgentEvent::StartRound { jitter_bound: 0 }, 0, &mut rng)?;
        start
            .in_flight
            .extend(out.outgoing.into_iter().map(|o| (o.dst.0 as usize, o.msg)));
        start.infos.push(agent.info.clone());
    }

    prune(&mut start);
    let mut report = ExploreReport {
        vehicles: n,
        states: 0,
        quiescent_states: 0,
        elected_quiescent_states: 0,
        max_leaders: 0,
        illegitimate_leaders: 0,
    };
    let mut seen = HashSet::new();
    let mut stack = vec![start];
    while let Some(state) = stack.pop() {
        if !seen.insert(canonical_key(&state, &plate_index)) {
            continue;
        }
        report.states += 1;
        let leaders: Vec<&VehicleInfo> = state
            .infos
            .iter()
            .filter(|v| v.election_status == ElectionStatus::Leader)
            .collect();
        report.max_leaders = report.max_leaders.max(leaders.len());
        report.illegitimate_leaders += leaders
            .iter()
            .filter(|v| !quorum.is_met(v.received_votes) || !quorum.is_met(1 + v.election_received_votes))
            .count();
        if state.in_flight.is_empty() {
            report.quiescent_states += 1;
            if !leaders.is_empty() {
                report.elected_quiescent_states += 1;
            }
            continue;
        }
        let mut tried: Vec<&(usize, ProtocolMessage)> = Vec::new();
        for i in 0..state.in_flight.len() {
            if tried.contains(&&state.in_flight[i]) {
                continue;
            }
            tried.push(&state.in_flight[i]);
            let mut next = state.clone();
            let (dst, msg) = next.in_flight.swap_remove(i);
            let agent = &mut agents[dst];
            agent.info = next.infos[dst].clone();
            let me = agent.address();
            let out = agent.on_event(AgentEvent::Deliver { dst: me, msg }, next.clock, &mut rng)?;
            next.infos[dst] = agent.info.clone();
            next.clock += 1;
            if !matches!(out.outcome, AgentOutcome::BecameLeader { .. }) {
                next.in_flight
                    .extend(out.outgoing.into_iter().map(|o| (o.dst.0 as usize, o.msg)));
            }
            prune(&mut next);
            stack.push(next);
        }
    }
    Ok(report)
}

/// Whether delivering `msg` to `to` can never change anything again. Such a
/// delivery is indistinguishable from losing the message, so it is dropped.
fn is_dead(to: &VehicleInfo, msg: &ProtocolMessage) -> bool {
    match msg {
        ProtocolMessage::CandidateVoteRequest(_) => to.sent_votes > 0,
        ProtocolMessage::CandidateVoteResponse(r) => {
            r.verdict == CandidateVerdict::Ignored || to.election_status != ElectionStatus::InitCandidate
        }
        ProtocolMessage::ElectionVoteRequest(_) => false,
        ProtocolMessage::ElectionVoteResponse(_) => to.election_status != ElectionStatus::FinCandidate,
        ProtocolMessage::PassPermit(_) | ProtocolMessage::PassageAnnouncement(_) => true,
    }
}

fn prune(state: &mut State) {
    let infos = &state.infos;
    state.in_flight.retain(|(dst, m)| !is_dead(&infos[*dst], m));
}

fn canonical_key(state: &State, plates: &HashMap<String, u64>) -> Vec<u64> {
    let mut times: Vec<Micros> = state.infos.iter().map(|v| v.election_time).collect();
    for (_, m) in &state.in_flight {
        if let Some(t) = message_time(m) {
            times.push(t);
        }
    }
    times.sort_unstable();
    times.dedup();
    let rank = |t: Micros| times.binary_search(&t).expect("collected above") as u64;

    let mut key = Vec::with_capacity(state.infos.len() * 7 + state.in_flight.len() * 6);
    for v in &state.infos {
        key.extend([
            u64::from(v.sent_votes),
            u64::from(v.received_votes),
            u64::from(v.election_received_votes),
            v.election_status as u64,
            rank(v.election_time),
            u64::from(v.election_ack_granted),
            plates[&v.ranking_plate],
        ]);
    }
    let mut msgs: Vec<[u64; 6]> = state
        .in_flight
        .iter()
        .map(|(dst, m)| {
            let (kind, verdict, votes, status) = match m {
                ProtocolMessage::CandidateVoteRequest(_) => (0, 0, 0, 0),
                // The receiver reads only the verdict.
                ProtocolMessage::CandidateVoteResponse(r) => (
                    1,
                    match r.verdict {
                        CandidateVerdict::Acknowledged { direction_status } => 1 + u64::from(direction_status),
                        CandidateVerdict::Ignored => 0,
                    },
                    0,
                    0,
                ),
                ProtocolMessage::ElectionVoteRequest(r) => (
                    2,
                    0,
                    u64::from(r.snapshot.received_votes),
                    r.snapshot.election_status as u64,
                ),
                ProtocolMessage::ElectionVoteResponse(r) if r.verdict == Verdict::Acknowledged => (3, 1, 0, 0),
                ProtocolMessage::ElectionVoteResponse(r) => (
                    3,
                    0,
                    u64::from(r.snapshot.received_votes),
                    r.snapshot.election_status as u64,
                ),
                ProtocolMessage::PassPermit(_) => (4, 0, 0, 0),
                ProtocolMessage::PassageAnnouncement(_) => (5, 0, 0, 0),
            };
            let time = message_time(m).map_or(u64::MAX, rank);
            let sender = u64::from(m.sender().0);
            [*dst as u64, kind, sender, verdict * 1_000 + votes, status, time]
        })
        .collect();
    msgs.sort_unstable();
    key.push(u64::MAX);
    key.extend(msgs.into_iter().flatten());
    key
}

/// Timestamp a message carries that its receiver may read.
fn message_time(m: &ProtocolMessage) -> Option<Micros> {
    match m {
        ProtocolMessage::ElectionVoteRequest(r) => Some(r.snapshot.election_time),
        ProtocolMessage::ElectionVoteResponse(r) if r.verdict == Verdict::Ignored => {
            Some(r.snapshot.election_time)
        }
        _ => None,
    }
}
