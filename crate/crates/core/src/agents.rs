//! Vehicle behaviour around the protocol: CAVs that vote, HVs that stay
//! silent, and the camera-based fallback that orders vehicles by plate.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{AgentError, ConfigError};
use crate::geometry::{IntersectionGeometry, PathDirection};
use crate::protocol::{Address, CandidatePhase, ElectionPhase, ElectionStatus, ProtocolMessage, VehicleInfo};
use crate::quorum::Quorum;
use crate::Micros;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AgentKind {
    Cav,
    /// Human driver: never talks, needs `decision_delay` before moving off.
    Hv { decision_delay: Micros },
}

impl AgentKind {
    pub fn is_cav(&self) -> bool {
        matches!(self, AgentKind::Cav)
    }
}

/// Plate recognition. All plates in view are read in parallel, so one
/// decision costs `t_vision` regardless of how many vehicles are waiting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisionModel {
    pub t_vision: Micros,
    pub parallel: bool,
}

impl VisionModel {
    pub fn new(t_vision: Micros) -> Result<Self, ConfigError> {
        if t_vision == 0 {
            return Err(ConfigError::new("t_vision", "must be positive"));
        }
        Ok(Self {
            t_vision,
            parallel: true,
        })
    }

    pub fn decision_latency(&self, vehicles: usize) -> Micros {
        if self.parallel {
            self.t_vision
        } else {
            self.t_vision * vehicles as Micros
        }
    }
}

/// Crossing order under the fallback: ascending byte order of the
/// upper-cased plates.
pub fn vision_rank<S: AsRef<str>>(plates: &[S]) -> Result<Vec<String>, AgentError> {
    if plates.is_empty() {
        return Err(AgentError::NoPlates);
    }
    let mut ranked: Vec<String> = plates.iter().map(|p| p.as_ref().to_ascii_uppercase()).collect();
    ranked.sort_unstable_by(|a, b| a.as_bytes().cmp(b.as_bytes()));
    if let Some(w) = ranked.windows(2).find(|w| w[0] == w[1]) {
        return Err(AgentError::DuplicatePlate(w[0].clone()));
    }
    Ok(ranked)
}

/// A message to put on the wire no earlier than `send_at`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outgoing {
    pub send_at: Micros,
    pub dst: Address,
    pub msg: ProtocolMessage,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AgentOutcome {
    Idle,
    RoundStarted,
    BecameFinCandidate,
    /// Elected; `permitted` received a pass permit.
    BecameLeader { permitted: Vec<Address> },
    BecameFollower,
    PermitReceived { from: Address },
    LeaderObserved { leader: Address },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentOutput {
    pub outgoing: Vec<Outgoing>,
    pub outcome: AgentOutcome,
}

impl AgentOutput {
    fn idle() -> Self {
        Self {
            outgoing: Vec::new(),
            outcome: AgentOutcome::Idle,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AgentEvent {
    /// Reset and open a new voting round.
    StartRound { jitter_bound: Micros },
    Deliver { dst: Address, msg: ProtocolMessage },
}

/// Static facts about the round a CAV votes in.
#[derive(Debug, Clone)]
pub struct CavContext {
    pub peers: Vec<Address>,
    pub quorum: Quorum,
    pub geometry: IntersectionGeometry,
}

#[derive(Debug, Clone)]
pub struct Agent {
    pub kind: AgentKind,
    pub info: VehicleInfo,
    ctx: Option<CavContext>,
    valid_directions: BTreeSet<PathDirection>,
}

impl Agent {
    pub fn cav(info: VehicleInfo, ctx: CavContext) -> Result<Self, AgentError> {
        let valid_directions = ctx.geometry.compatible_directions(&info.direction)?;
        Ok(Self {
            kind: AgentKind::Cav,
            info,
            ctx: Some(ctx),
            valid_directions,
        })
    }

    pub fn hv(info: VehicleInfo, decision_delay: Micros) -> Self {
        Self {
            kind: AgentKind::Hv { decision_delay },
            info,
            ctx: None,
            valid_directions: BTreeSet::new(),
        }
    }

    pub fn address(&self) -> Address {
        self.info.address
    }

    pub fn on_event<R: Rng + ?Sized>(
        &mut self,
        event: AgentEvent,
        now: Micros,
        rng: &mut R,
    ) -> Result<AgentOutput, AgentError> {
        match self.ctx.clone() {
            Some(ctx) => cav_on_event(self, &ctx, event, now, rng),
            None => {
                if let AgentEvent::Deliver { dst, .. } = event {
                    self.check_route(dst)?;
                }
                Ok(AgentOutput::idle())
            }
        }
    }

    fn check_route(&self, dst: Address) -> Result<(), AgentError> {
        if dst == self.info.address {
            Ok(())
        } else {
            Err(AgentError::Misrouted {
                addressed: dst.0,
                agent: self.info.address.0,
            })
        }
    }
}

fn now_out(now: Micros, dst: Address, msg: ProtocolMessage) -> Outgoing {
    Outgoing {
        send_at: now,
        dst,
        msg,
    }
}

/// Dispatch one event to a CAV's protocol handlers.
pub fn cav_on_event<R: Rng + ?Sized>(
    agent: &mut Agent,
    ctx: &CavContext,
    event: AgentEvent,
    now: Micros,
    rng: &mut R,
) -> Result<AgentOutput, AgentError> {
    let me = agent.info.address;
    let msg = match event {
        AgentEvent::StartRound { jitter_bound } => {
            agent.info.reset();
            let requests = agent.info.start_cycle(&ctx.peers, jitter_bound, now, rng)?;
            return Ok(AgentOutput {
                outgoing: requests
                    .into_iter()
                    .map(|(send_at, dst, req)| Outgoing {
                        send_at,
                        dst,
                        msg: ProtocolMessage::CandidateVoteRequest(req),
                    })
                    .collect(),
                outcome: AgentOutcome::RoundStarted,
            });
        }
        AgentEvent::Deliver { dst, msg } => {
            agent.check_route(dst)?;
            msg
        }
    };
    let info = &mut agent.info;
    let out = match msg {
        ProtocolMessage::CandidateVoteRequest(req) => {
            let resp = info.handle_candidate_vote_request(Some(&req), &agent.valid_directions)?;
            AgentOutput {
                outgoing: vec![now_out(now, req.sender, ProtocolMessage::CandidateVoteResponse(resp))],
                outcome: AgentOutcome::Idle,
            }
        }
        ProtocolMessage::CandidateVoteResponse(resp) => {
            match info.on_candidate_vote_response(&resp, now, ctx.quorum) {
                CandidatePhase::BecameFinCandidate => {
                    let req = info.election_request();
                    AgentOutput {
                        outgoing: ctx
                            .peers
                            .iter()
                            .map(|&p| now_out(now, p, ProtocolMessage::ElectionVoteRequest(req.clone())))
                            .collect(),
                        outcome: AgentOutcome::BecameFinCandidate,
                    }
                }
                CandidatePhase::StillCandidate | CandidatePhase::Stale => AgentOutput::idle(),
            }
        }
        ProtocolMessage::ElectionVoteRequest(req) => {
            let was_follower = info.election_status == ElectionStatus::Follower;
            let resp = info.handle_election_vote_request(&req);
            let became = !was_follower && info.election_status == ElectionStatus::Follower;
            AgentOutput {
                outgoing: vec![now_out(now, req.sender, ProtocolMessage::ElectionVoteResponse(resp))],
                outcome: if became { AgentOutcome::BecameFollower } else { AgentOutcome::Idle },
            }
        }
        ProtocolMessage::ElectionVoteResponse(resp) => {
            match info.on_election_vote_response(&resp, ctx.quorum) {
                ElectionPhase::BecameLeader => {
                    let geometry = ctx.geometry;
                    let permits = info.issue_pass_permits(|a, b| {
                        geometry.conflicts(a, b).unwrap_or(true)
                    })?;
                    let announcement = info.passage_announcement();
                    let permitted: Vec<Address> = permits.iter().map(|(a, _)| *a).collect();
                    let mut outgoing: Vec<Outgoing> = permits
                        .into_iter()
                        .map(|(a, p)| now_out(now, a, ProtocolMessage::PassPermit(p)))
                        .collect();
                    outgoing.extend(ctx.peers.iter().map(|&p| {
                        now_out(now, p, ProtocolMessage::PassageAnnouncement(announcement.clone()))
                    }));
                    AgentOutput {
                        outgoing,
                        outcome: AgentOutcome::BecameLeader { permitted },
                    }
                }
                ElectionPhase::Demoted => AgentOutput {
                    outgoing: Vec::new(),
                    outcome: AgentOutcome::BecameFollower,
                },
                ElectionPhase::StillFinCandidate | ElectionPhase::Stale => AgentOutput::idle(),
            }
        }
        ProtocolMessage::PassPermit(p) => AgentOutput {
            outgoing: Vec::new(),
            outcome: AgentOutcome::PermitReceived { from: p.sender },
        },
        ProtocolMessage::PassageAnnouncement(a) => AgentOutput {
            outgoing: Vec::new(),
            outcome: AgentOutcome::LeaderObserved { leader: a.sender },
        },
    };
    debug_assert!(out.outgoing.iter().all(|o| o.dst != me));
    Ok(out)
}

/// Something the roadside camera saw during a cycle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PassageEvent {
    /// The leader entered the box, possibly with permitted co-passers.
    LeaderCrossed { leader: Address, co_passers: Vec<Address> },
    /// The fallback released the first-ranked vehicle.
    VisionRelease { vehicle: Address },
    /// A voting round ended with nobody moving.
    RoundExpired,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CycleOutcome {
    CycleComplete,
    ReConsensus,
}

/// Vehicles seen clearing the intersection in the current cycle.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CycleObservation {
    pub passed: Vec<Address>,
}

/// A cycle is complete once at least one vehicle has crossed.
pub fn observe_passage(state: &mut CycleObservation, event: &PassageEvent) -> CycleOutcome {
    match event {
        PassageEvent::LeaderCrossed { leader, co_passers } => {
            state.passed.push(*leader);
            state.passed.extend(co_passers.iter().copied());
        }
        PassageEvent::VisionRelease { vehicle } => state.passed.push(*vehicle),
        PassageEvent::RoundExpired => {}
    }
    if state.passed.is_empty() {
        CycleOutcome::ReConsensus
    } else {
        CycleOutcome::CycleComplete
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Approach, Movement};
    use crate::protocol::{CandidateVerdict, CandidateVoteResponse, ElectionVoteResponse, Snapshot, Verdict};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dir(a: Approach, m: Movement) -> PathDirection {
        PathDirection::new(a, m, 0)
    }

    fn cav(addr: u32, n: u32, direction: PathDirection) -> Agent {
        let info = VehicleInfo::new(Address(addr), format!("P{addr}"), direction);
        let ctx = CavContext {
            peers: (0..n).filter(|&p| p != addr).map(Address).collect(),
            quorum: Quorum::majority(n).unwrap(),
            geometry: IntersectionGeometry::new(2).unwrap(),
        };
        Agent::cav(info, ctx).unwrap()
    }

    fn ack(from: u32, direction_status: bool) -> ProtocolMessage {
        ProtocolMessage::CandidateVoteResponse(CandidateVoteResponse {
            sender: Address(from),
            plate: format!("P{from}"),
            direction: dir(Approach::South, Movement::Straight),
            verdict: CandidateVerdict::Acknowledged { direction_status },
            snapshot: snap(),
        })
    }

    fn snap() -> Snapshot {
        Snapshot {
            received_votes: 1,
            election_time: 0,
            election_status: ElectionStatus::InitCandidate,
        }
    }

    fn deliver(agent: &mut Agent, msg: ProtocolMessage, now: Micros) -> AgentOutput {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let dst = agent.address();
        agent.on_event(AgentEvent::Deliver { dst, msg }, now, &mut rng).unwrap()
    }

    #[test]
    fn rank_examples() {
        assert_eq!(vision_rank(&["12A3456", "07B9999"]).unwrap(), ["07B9999", "12A3456"]);
        assert_eq!(vision_rank(&["XYZ"]).unwrap(), ["XYZ"]);
        assert_eq!(vision_rank(&["AA1", "A9"]).unwrap(), ["A9", "AA1"]);
        assert_eq!(vision_rank(&["ab1", "AA1"]).unwrap(), ["AA1", "AB1"]);
    }

    #[test]
    fn rank_rejects_bad_input() {
        assert!(matches!(vision_rank::<&str>(&[]), Err(AgentError::NoPlates)));
        assert!(matches!(vision_rank(&["abc", "ABC"]), Err(AgentError::DuplicatePlate(_))));
    }

    #[test]
    fn fin_candidate_asks_every_peer() {
        let mut a = cav(0, 3, dir(Approach::North, Movement::Straight));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        a.on_event(AgentEvent::StartRound { jitter_bound: 0 }, 0, &mut rng).unwrap();
        let out = deliver(&mut a, ack(1, true), 10);
        assert_eq!(out.outcome, AgentOutcome::BecameFinCandidate);
        assert_eq!(out.outgoing.len(), 2);
        assert!(out
            .outgoing
            .iter()
            .all(|o| matches!(o.msg, ProtocolMessage::ElectionVoteRequest(_))));
    }

    #[test]
    fn hv_never_answers() {
        let info = VehicleInfo::new(Address(7), "HV00001", dir(Approach::East, Movement::Left));
        let mut hv = Agent::hv(info, 3_000_000);
        let mut sender = cav(0, 3, dir(Approach::North, Movement::Straight));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let reqs = sender
            .on_event(AgentEvent::StartRound { jitter_bound: 0 }, 0, &mut rng)
            .unwrap();
        let msg = reqs.outgoing[0].msg.clone();
        let out = hv.on_event(AgentEvent::Deliver { dst: Address(7), msg }, 5, &mut rng).unwrap();
        assert!(out.outgoing.is_empty());
        assert_eq!(out.outcome, AgentOutcome::Idle);
    }

    #[test]
    fn misrouted_delivery_is_an_error() {
        let mut a = cav(0, 3, dir(Approach::North, Movement::Straight));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = a
            .on_event(AgentEvent::Deliver { dst: Address(2), msg: ack(1, true) }, 0, &mut rng)
            .unwrap_err();
        assert!(matches!(err, AgentError::Misrouted { addressed: 2, agent: 0 }));
    }

    #[test]
    fn leader_without_compatible_peers_only_announces() {
        let mut a = cav(0, 3, dir(Approach::North, Movement::Straight));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        a.on_event(AgentEvent::StartRound { jitter_bound: 0 }, 0, &mut rng).unwrap();
        deliver(&mut a, ack(1, false), 10);
        let out = deliver(
            &mut a,
            ProtocolMessage::ElectionVoteResponse(ElectionVoteResponse {
                sender: Address(1),
                plate: "P1".into(),
                verdict: Verdict::Acknowledged,
                snapshot: snap(),
            }),
            20,
        );
        assert_eq!(out.outcome, AgentOutcome::BecameLeader { permitted: vec![] });
        assert_eq!(out.outgoing.len(), 2);
        assert!(out
            .outgoing
            .iter()
            .all(|o| matches!(o.msg, ProtocolMessage::PassageAnnouncement(_))));
    }

    #[test]
    fn passage_outcomes() {
        let mut s = CycleObservation::default();
        assert_eq!(observe_passage(&mut s, &PassageEvent::RoundExpired), CycleOutcome::ReConsensus);
        let ev = PassageEvent::LeaderCrossed {
            leader: Address(3),
            co_passers: vec![Address(1)],
        };
        assert_eq!(observe_passage(&mut s, &ev), CycleOutcome::CycleComplete);
        assert_eq!(s.passed, [Address(3), Address(1)]);

        let mut v = CycleObservation::default();
        let ev = PassageEvent::VisionRelease { vehicle: Address(4) };
        assert_eq!(observe_passage(&mut v, &ev), CycleOutcome::CycleComplete);
    }

    #[test]
    fn vision_latency_is_flat() {
        let v = VisionModel::new(500_000).unwrap();
        assert_eq!(v.decision_latency(1), 500_000);
        assert_eq!(v.decision_latency(8), 500_000);
        assert!(VisionModel::new(0).is_err());
    }
}
