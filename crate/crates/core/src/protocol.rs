//! Per-vehicle voting state machine.
//!
//! A cycle has two phases. In the candidate phase every vehicle votes for
//! itself and asks each peer for its single outgoing vote; a vehicle that
//! collects a quorum becomes a `FinCandidate`. In the election phase each
//! `FinCandidate` asks its peers to acknowledge it as leader, and the first to
//! gather a quorum of acknowledgements (counting itself) becomes `Leader`.
//!
//! Handlers are plain functions of `(state, message)`. Nothing here blocks or
//! keeps a clock; callers pass the current simulated time in.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::ProtocolError;
use crate::geometry::PathDirection;
use crate::quorum::Quorum;
use crate::Micros;

/// Opaque network identity of a vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Address(pub u32);

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ElectionStatus {
    InitCandidate,
    FinCandidate,
    Follower,
    Leader,
}

impl ElectionStatus {
    pub fn can_transition_to(self, next: ElectionStatus) -> bool {
        use ElectionStatus::*;
        matches!(
            (self, next),
            (InitCandidate, FinCandidate)
                | (InitCandidate, Follower)
                | (FinCandidate, Leader)
                | (FinCandidate, Follower)
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            ElectionStatus::InitCandidate => "InitCandidate",
            ElectionStatus::FinCandidate => "FinCandidate",
            ElectionStatus::Follower => "Follower",
            ElectionStatus::Leader => "Leader",
        }
    }
}

impl fmt::Display for ElectionStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The part of a vehicle's state that travels inside responses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Snapshot {
    pub received_votes: u32,
    pub election_time: Micros,
    pub election_status: ElectionStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Acknowledged,
    Ignored,
}

/// Verdict on a candidate vote. Only an acknowledgement says whether the
/// requester's path is compatible with the responder's.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CandidateVerdict {
    Acknowledged { direction_status: bool },
    Ignored,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CandidateVoteRequest {
    pub sender: Address,
    pub plate: String,
    pub direction: PathDirection,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CandidateVoteResponse {
    pub sender: Address,
    pub plate: String,
    pub direction: PathDirection,
    pub verdict: CandidateVerdict,
    pub snapshot: Snapshot,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ElectionVoteRequest {
    pub sender: Address,
    pub plate: String,
    pub snapshot: Snapshot,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ElectionVoteResponse {
    pub sender: Address,
    pub plate: String,
    pub verdict: Verdict,
    pub snapshot: Snapshot,
}

/// Sent by the leader to a vehicle allowed to cross alongside it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PassPermit {
    pub sender: Address,
    pub plate: String,
}

/// Broadcast by the leader as it enters the intersection.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PassageAnnouncement {
    pub sender: Address,
    pub plate: String,
    pub direction: PathDirection,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProtocolMessage {
    CandidateVoteRequest(CandidateVoteRequest),
    CandidateVoteResponse(CandidateVoteResponse),
    ElectionVoteRequest(ElectionVoteRequest),
    ElectionVoteResponse(ElectionVoteResponse),
    PassPermit(PassPermit),
    PassageAnnouncement(PassageAnnouncement),
}

impl ProtocolMessage {
    pub fn sender(&self) -> Address {
        match self {
            ProtocolMessage::CandidateVoteRequest(m) => m.sender,
            ProtocolMessage::CandidateVoteResponse(m) => m.sender,
            ProtocolMessage::ElectionVoteRequest(m) => m.sender,
            ProtocolMessage::ElectionVoteResponse(m) => m.sender,
            ProtocolMessage::PassPermit(m) => m.sender,
            ProtocolMessage::PassageAnnouncement(m) => m.sender,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            ProtocolMessage::CandidateVoteRequest(_) => "CandidateVoteRequest",
            ProtocolMessage::CandidateVoteResponse(_) => "CandidateVoteResponse",
            ProtocolMessage::ElectionVoteRequest(_) => "ElectionVoteRequest",
            ProtocolMessage::ElectionVoteResponse(_) => "ElectionVoteResponse",
            ProtocolMessage::PassPermit(_) => "PassPermit",
            ProtocolMessage::PassageAnnouncement(_) => "PassageAnnouncement",
        }
    }
}

/// A peer that acknowledged our candidacy and whose path does not cross ours.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NoCollisionEntry {
    pub plate: String,
    pub direction: PathDirection,
    pub ack_time: Micros,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CandidatePhase {
    StillCandidate,
    BecameFinCandidate,
    /// The response arrived after this vehicle left `InitCandidate`.
    Stale,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ElectionPhase {
    StillFinCandidate,
    BecameLeader,
    Demoted,
    /// The response arrived after this vehicle left `FinCandidate`.
    Stale,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TimeoutDecision {
    ContinueConsensus,
    SwitchToVision,
}

/// Voting has run too long once it reaches the vision threshold.
pub fn on_timeout(t_consensus: Micros, t_vision: Micros) -> TimeoutDecision {
    if t_consensus >= t_vision {
        TimeoutDecision::SwitchToVision
    } else {
        TimeoutDecision::ContinueConsensus
    }
}

/// Protocol state held by one vehicle for one voting round.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VehicleInfo {
    pub address: Address,
    pub plate: String,
    pub direction: PathDirection,
    /// Candidate votes granted to other vehicles, 0 or 1.
    pub sent_votes: u8,
    pub received_votes: u32,
    pub election_received_votes: u32,
    pub no_collision_list: BTreeMap<Address, NoCollisionEntry>,
    pub election_status: ElectionStatus,
    pub election_time: Micros,
    /// Set once this vehicle acknowledges some leader candidate. A vehicle
    /// acknowledges at most one candidate per round.
    pub election_ack_granted: bool,
    /// Plate that ranks the current `(received_votes, election_time)` pair.
    /// Differs from `plate` after adopting another vehicle's snapshot.
    pub ranking_plate: String,
}

impl VehicleInfo {
    pub fn new(address: Address, plate: impl Into<String>, direction: PathDirection) -> Self {
        let plate = plate.into();
        Self {
            address,
            ranking_plate: plate.clone(),
            plate,
            direction,
            sent_votes: 0,
            received_votes: 0,
            election_received_votes: 0,
            no_collision_list: BTreeMap::new(),
            election_status: ElectionStatus::InitCandidate,
            election_time: 0,
            election_ack_granted: false,
        }
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            received_votes: self.received_votes,
            election_time: self.election_time,
            election_status: self.election_status,
        }
    }

    /// Forget everything from an earlier round.
    pub fn reset(&mut self) {
        *self = VehicleInfo::new(self.address, self.plate.clone(), self.direction);
    }

    fn transition(&mut self, next: ElectionStatus) {
        debug_assert!(
            self.election_status.can_transition_to(next) || self.election_status == next,
            "{} -> {next}",
            self.election_status
        );
        self.election_status = next;
    }

    /// Vote for ourselves and schedule one request per peer.
    ///
    /// All of a vehicle's requests leave at the same randomly drawn offset in
    /// `[0, jitter_bound]` after `now`.
    pub fn start_cycle<R: Rng + ?Sized>(
        &mut self,
        peers: &[Address],
        jitter_bound: Micros,
        now: Micros,
        rng: &mut R,
    ) -> Result<Vec<(Micros, Address, CandidateVoteRequest)>, ProtocolError> {
        if self.election_status != ElectionStatus::InitCandidate {
            return Err(ProtocolError::IllegalState {
                expected: ElectionStatus::InitCandidate,
                actual: self.election_status,
            });
        }
        if peers.is_empty() {
            return Err(ProtocolError::NotEnoughVehicles);
        }
        self.received_votes = 1;
        self.election_time = self.election_time.max(now);
        let send_at = now + rng.random_range(0..=jitter_bound);
        Ok(peers
            .iter()
            .map(|&peer| {
                let req = CandidateVoteRequest {
                    sender: self.address,
                    plate: self.plate.clone(),
                    direction: self.direction,
                };
                (send_at, peer, req)
            })
            .collect())
    }

    /// Grant our single outgoing candidate vote to the first requester.
    pub fn handle_candidate_vote_request(
        &mut self,
        req: Option<&CandidateVoteRequest>,
        valid_directions: &BTreeSet<PathDirection>,
    ) -> Result<CandidateVoteResponse, ProtocolError> {
        let req = req.ok_or(ProtocolError::NilRequest)?;
        let verdict = if self.sent_votes == 0 {
            self.sent_votes = 1;
            CandidateVerdict::Acknowledged {
                direction_status: valid_directions.contains(&req.direction),
            }
        } else {
            CandidateVerdict::Ignored
        };
        Ok(CandidateVoteResponse {
            sender: self.address,
            plate: self.plate.clone(),
            direction: self.direction,
            verdict,
            snapshot: self.snapshot(),
        })
    }

    pub fn on_candidate_vote_response(
        &mut self,
        resp: &CandidateVoteResponse,
        now: Micros,
        quorum: Quorum,
    ) -> CandidatePhase {
        if self.election_status != ElectionStatus::InitCandidate {
            return CandidatePhase::Stale;
        }
        let CandidateVerdict::Acknowledged { direction_status } = resp.verdict else {
            return CandidatePhase::StillCandidate;
        };
        self.received_votes += 1;
        self.election_time = self.election_time.max(now);
        if direction_status && resp.sender != self.address {
            self.no_collision_list.insert(
                resp.sender,
                NoCollisionEntry {
                    plate: resp.plate.clone(),
                    direction: resp.direction,
                    ack_time: now,
                },
            );
        }
        if quorum.is_met(self.received_votes) {
            self.transition(ElectionStatus::FinCandidate);
            CandidatePhase::BecameFinCandidate
        } else {
            CandidatePhase::StillCandidate
        }
    }

    /// Request sent to every peer right after reaching `FinCandidate`.
    pub fn election_request(&self) -> ElectionVoteRequest {
        ElectionVoteRequest {
            sender: self.address,
            plate: self.plate.clone(),
            snapshot: self.snapshot(),
        }
    }

    /// Acknowledge a leader candidate that outranks us, at most once.
    ///
    /// Candidates rank by more candidate votes, then earlier election time,
    /// then the smaller plate.
    pub fn handle_election_vote_request(&mut self, req: &ElectionVoteRequest) -> ElectionVoteResponse {
        let outranks = rank_order(
            (req.snapshot.received_votes, req.snapshot.election_time, &req.plate),
            (self.received_votes, self.election_time, &self.ranking_plate),
        ) == Ordering::Greater;
        let eligible = req.snapshot.election_status != ElectionStatus::Follower
            && self.election_status != ElectionStatus::Leader
            && !self.election_ack_granted
            && req.sender != self.address;
        if eligible && outranks {
            if self.election_status != ElectionStatus::Follower {
                self.transition(ElectionStatus::Follower);
            }
            self.received_votes = req.snapshot.received_votes;
            self.election_time = req.snapshot.election_time;
            self.ranking_plate = req.plate.clone();
            self.election_ack_granted = true;
            ElectionVoteResponse {
                sender: self.address,
                plate: self.plate.clone(),
                verdict: Verdict::Acknowledged,
                snapshot: self.snapshot(),
            }
        } else {
            ElectionVoteResponse {
                sender: self.address,
                plate: self.plate.clone(),
                verdict: Verdict::Ignored,
                snapshot: self.snapshot(),
            }
        }
    }

    pub fn on_election_vote_response(
        &mut self,
        resp: &ElectionVoteResponse,
        quorum: Quorum,
    ) -> ElectionPhase {
        if self.election_status != ElectionStatus::FinCandidate {
            return ElectionPhase::Stale;
        }
        match resp.verdict {
            Verdict::Acknowledged => {
                self.election_received_votes += 1;
                if quorum.is_met(1 + self.election_received_votes) {
                    self.transition(ElectionStatus::Leader);
                    ElectionPhase::BecameLeader
                } else {
                    ElectionPhase::StillFinCandidate
                }
            }
            Verdict::Ignored => {
                self.transition(ElectionStatus::Follower);
                self.received_votes = resp.snapshot.received_votes;
                self.election_time = resp.snapshot.election_time;
                self.ranking_plate = resp.plate.clone();
                ElectionPhase::Demoted
            }
        }
    }

    /// Permit no-collision peers to cross with the leader.
    ///
    /// Peers are taken greedily by acknowledgement time (ties by plate) and
    /// skipped if they conflict with the leader or with anyone already
    /// permitted.
    pub fn issue_pass_permits<F>(&self, conflict_fn: F) -> Result<Vec<(Address, PassPermit)>, ProtocolError>
    where
        F: Fn(&PathDirection, &PathDirection) -> bool,
    {
        if self.election_status != ElectionStatus::Leader {
            return Err(ProtocolError::IllegalState {
                expected: ElectionStatus::Leader,
                actual: self.election_status,
            });
        }
        let mut order: Vec<(&Address, &NoCollisionEntry)> = self.no_collision_list.iter().collect();
        order.sort_by(|a, b| {
            a.1.ack_time
                .cmp(&b.1.ack_time)
                .then_with(|| a.1.plate.as_bytes().cmp(b.1.plate.as_bytes()))
        });
        let mut crossing = vec![self.direction];
        let mut permits = Vec::new();
        for (addr, entry) in order {
            if crossing.iter().any(|d| conflict_fn(d, &entry.direction)) {
                continue;
            }
            crossing.push(entry.direction);
            permits.push((
                *addr,
                PassPermit {
                    sender: self.address,
                    plate: self.plate.clone(),
                },
            ));
        }
        Ok(permits)
    }

    pub fn passage_announcement(&self) -> PassageAnnouncement {
        PassageAnnouncement {
            sender: self.address,
            plate: self.plate.clone(),
            direction: self.direction,
        }
    }
}

/// Orders `(votes, election_time, plate)` so that the stronger candidate is
/// greater.
fn rank_order(a: (u32, Micros, &str), b: (u32, Micros, &str)) -> Ordering {
    a.0.cmp(&b.0)
        .then_with(|| b.1.cmp(&a.1))
        .then_with(|| b.2.as_bytes().cmp(a.2.as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Approach, IntersectionGeometry, Movement};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dir(a: Approach) -> PathDirection {
        PathDirection::new(a, Movement::Straight, 0)
    }

    fn vehicle(id: u32, plate: &str, a: Approach) -> VehicleInfo {
        VehicleInfo::new(Address(id), plate, dir(a))
    }

    fn q(n: u32) -> Quorum {
        Quorum::majority(n).unwrap()
    }

    fn ack(from: &VehicleInfo, compatible: bool) -> CandidateVoteResponse {
        CandidateVoteResponse {
            sender: from.address,
            plate: from.plate.clone(),
            direction: from.direction,
            verdict: CandidateVerdict::Acknowledged {
                direction_status: compatible,
            },
            snapshot: from.snapshot(),
        }
    }

    fn fin_candidate(id: u32, plate: &str, votes: u32, t: Micros) -> VehicleInfo {
        let mut v = vehicle(id, plate, Approach::North);
        v.received_votes = votes;
        v.election_time = t;
        v.election_status = ElectionStatus::FinCandidate;
        v
    }

    #[test]
    fn start_cycle_votes_for_self_without_spending_the_vote() {
        let mut a = vehicle(0, "AAA0001", Approach::North);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let reqs = a
            .start_cycle(&[Address(1), Address(2)], 5_000, 0, &mut rng)
            .unwrap();
        assert_eq!(a.received_votes, 1);
        assert_eq!(a.sent_votes, 0);
        assert_eq!(reqs.len(), 2);
        assert!(reqs.iter().all(|(t, _, _)| *t <= 5_000));
    }

    #[test]
    fn start_cycle_without_peers_fails() {
        let mut a = vehicle(0, "AAA0001", Approach::North);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(
            a.start_cycle(&[], 5_000, 0, &mut rng),
            Err(ProtocolError::NotEnoughVehicles)
        );
    }

    #[test]
    fn start_cycle_is_reproducible() {
        let run = || {
            let mut a = vehicle(0, "AAA0001", Approach::North);
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            a.start_cycle(&[Address(1), Address(2)], 5_000, 0, &mut rng)
                .unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn first_candidate_request_is_acknowledged_then_ignored() {
        let g = IntersectionGeometry::new(2).unwrap();
        let mut b = vehicle(1, "BBB0001", Approach::South);
        let valid = g.compatible_directions(&b.direction).unwrap();
        let req_a = CandidateVoteRequest {
            sender: Address(0),
            plate: "AAA0001".into(),
            direction: dir(Approach::North),
        };
        let resp = b.handle_candidate_vote_request(Some(&req_a), &valid).unwrap();
        assert_eq!(
            resp.verdict,
            CandidateVerdict::Acknowledged {
                direction_status: true
            }
        );
        assert_eq!(b.sent_votes, 1);

        let req_c = CandidateVoteRequest {
            sender: Address(2),
            plate: "CCC0001".into(),
            direction: dir(Approach::East),
        };
        let before = b.clone();
        let resp = b.handle_candidate_vote_request(Some(&req_c), &valid).unwrap();
        assert_eq!(resp.verdict, CandidateVerdict::Ignored);
        assert_eq!(b, before);
    }

    #[test]
    fn nil_candidate_request_is_an_error() {
        let mut b = vehicle(1, "BBB0001", Approach::South);
        let err = b.handle_candidate_vote_request(None, &BTreeSet::new());
        assert_eq!(err, Err(ProtocolError::NilRequest));
        assert_eq!(err.unwrap_err().to_string(), "received nil request");
        assert_eq!(b.sent_votes, 0);
    }

    #[test]
    fn majority_of_three_promotes_to_fin_candidate() {
        let mut a = vehicle(0, "AAA0001", Approach::North);
        a.received_votes = 1;
        let b = vehicle(1, "BBB0001", Approach::South);
        let out = a.on_candidate_vote_response(&ack(&b, true), 10, q(3));
        assert_eq!(out, CandidatePhase::BecameFinCandidate);
        assert_eq!(a.received_votes, 2);
        assert_eq!(a.election_time, 10);
        assert!(a.no_collision_list.contains_key(&Address(1)));
    }

    #[test]
    fn ignored_candidate_response_changes_nothing() {
        let mut a = vehicle(0, "AAA0001", Approach::North);
        a.received_votes = 1;
        let before = a.clone();
        let b = vehicle(1, "BBB0001", Approach::South);
        let mut resp = ack(&b, true);
        resp.verdict = CandidateVerdict::Ignored;
        assert_eq!(
            a.on_candidate_vote_response(&resp, 10, q(3)),
            CandidatePhase::StillCandidate
        );
        assert_eq!(a, before);
    }

    #[test]
    fn two_of_five_is_not_enough() {
        let mut a = vehicle(0, "AAA0001", Approach::North);
        a.received_votes = 1;
        let b = vehicle(1, "BBB0001", Approach::East);
        assert_eq!(
            a.on_candidate_vote_response(&ack(&b, false), 10, q(5)),
            CandidatePhase::StillCandidate
        );
        assert_eq!(a.received_votes, 2);
        assert!(a.no_collision_list.is_empty());
    }

    #[test]
    fn late_candidate_response_is_dropped() {
        let mut a = fin_candidate(0, "AAA0001", 2, 10);
        let before = a.clone();
        let b = vehicle(1, "BBB0001", Approach::South);
        assert_eq!(
            a.on_candidate_vote_response(&ack(&b, true), 20, q(3)),
            CandidatePhase::Stale
        );
        assert_eq!(a, before);
    }

    #[test]
    fn weaker_vehicle_follows_requester() {
        let a = fin_candidate(0, "AAA0001", 2, 10);
        let mut b = vehicle(1, "BBB0001", Approach::South);
        b.received_votes = 1;
        let resp = b.handle_election_vote_request(&a.election_request());
        assert_eq!(resp.verdict, Verdict::Acknowledged);
        assert_eq!(b.election_status, ElectionStatus::Follower);
        assert_eq!((b.received_votes, b.election_time), (2, 10));
    }

    #[test]
    fn follower_requests_are_ignored() {
        let mut a = fin_candidate(0, "AAA0001", 3, 10);
        a.election_status = ElectionStatus::Follower;
        let mut b = vehicle(1, "BBB0001", Approach::South);
        b.received_votes = 1;
        let resp = b.handle_election_vote_request(&a.election_request());
        assert_eq!(resp.verdict, Verdict::Ignored);
        assert_eq!(b.election_status, ElectionStatus::InitCandidate);
    }

    #[test]
    fn earlier_quorum_wins_a_vote_tie() {
        let a = fin_candidate(0, "AAA0001", 2, 10);
        let mut b = fin_candidate(1, "BBB0001", 2, 8);
        let resp = b.handle_election_vote_request(&a.election_request());
        assert_eq!(resp.verdict, Verdict::Ignored);
        assert_eq!(resp.snapshot.election_time, 8);
        assert_eq!(b.election_status, ElectionStatus::FinCandidate);
    }

    #[test]
    fn plate_breaks_exact_ties() {
        let a = fin_candidate(0, "AAA0001", 2, 10);
        let mut b = fin_candidate(1, "BBB0001", 2, 10);
        let resp = b.handle_election_vote_request(&a.election_request());
        assert_eq!(resp.verdict, Verdict::Acknowledged);
    }

    #[test]
    fn a_vehicle_acknowledges_only_one_leader_candidate() {
        let a = fin_candidate(0, "AAA0001", 2, 10);
        let c = fin_candidate(2, "CCC0001", 3, 12);
        let mut b = vehicle(1, "BBB0001", Approach::South);
        b.received_votes = 1;
        assert_eq!(
            b.handle_election_vote_request(&a.election_request()).verdict,
            Verdict::Acknowledged
        );
        assert_eq!(
            b.handle_election_vote_request(&c.election_request()).verdict,
            Verdict::Ignored
        );
    }

    #[test]
    fn leader_never_acknowledges() {
        let mut l = fin_candidate(0, "AAA0001", 2, 10);
        l.election_status = ElectionStatus::Leader;
        let c = fin_candidate(2, "CCC0001", 3, 5);
        assert_eq!(
            l.handle_election_vote_request(&c.election_request()).verdict,
            Verdict::Ignored
        );
        assert_eq!(l.election_status, ElectionStatus::Leader);
    }

    fn eresp(from: u32, verdict: Verdict, votes: u32, t: Micros) -> ElectionVoteResponse {
        ElectionVoteResponse {
            sender: Address(from),
            plate: format!("P{from}"),
            verdict,
            snapshot: Snapshot {
                received_votes: votes,
                election_time: t,
                election_status: ElectionStatus::FinCandidate,
            },
        }
    }

    #[test]
    fn one_acknowledgement_elects_among_three() {
        let mut a = fin_candidate(0, "AAA0001", 2, 10);
        assert_eq!(
            a.on_election_vote_response(&eresp(1, Verdict::Acknowledged, 2, 10), q(3)),
            ElectionPhase::BecameLeader
        );
        assert_eq!(
            a.on_election_vote_response(&eresp(2, Verdict::Acknowledged, 2, 10), q(3)),
            ElectionPhase::Stale
        );
        assert_eq!(a.election_received_votes, 1);
    }

    #[test]
    fn ignored_election_response_demotes_and_adopts() {
        let mut a = fin_candidate(0, "AAA0001", 2, 10);
        assert_eq!(
            a.on_election_vote_response(&eresp(1, Verdict::Ignored, 3, 7), q(5)),
            ElectionPhase::Demoted
        );
        assert_eq!(a.election_status, ElectionStatus::Follower);
        assert_eq!((a.received_votes, a.election_time), (3, 7));
    }

    #[test]
    fn full_quorum_needs_every_acknowledgement() {
        let full = crate::quorum::QuorumRule::Full.threshold(3).unwrap();
        let mut a = fin_candidate(0, "AAA0001", 3, 10);
        assert_eq!(
            a.on_election_vote_response(&eresp(1, Verdict::Acknowledged, 3, 10), full),
            ElectionPhase::StillFinCandidate
        );
        assert_eq!(
            a.on_election_vote_response(&eresp(2, Verdict::Acknowledged, 3, 10), full),
            ElectionPhase::BecameLeader
        );
    }

    fn leader_with(entries: &[(u32, &str, PathDirection, Micros)]) -> VehicleInfo {
        let mut l = vehicle(0, "AAA0001", Approach::North);
        l.election_status = ElectionStatus::Leader;
        for &(id, plate, direction, ack_time) in entries {
            l.no_collision_list.insert(
                Address(id),
                NoCollisionEntry {
                    plate: plate.into(),
                    direction,
                    ack_time,
                },
            );
        }
        l
    }

    #[test]
    fn permits_go_to_compatible_peers() {
        let g = IntersectionGeometry::new(2).unwrap();
        let cf = |a: &PathDirection, b: &PathDirection| g.conflicts(a, b).unwrap();
        let l = leader_with(&[(1, "BBB0001", dir(Approach::South), 5)]);
        let permits = l.issue_pass_permits(cf).unwrap();
        assert_eq!(permits.len(), 1);
        assert_eq!(permits[0].0, Address(1));
        assert!(leader_with(&[]).issue_pass_permits(cf).unwrap().is_empty());
    }

    #[test]
    fn mutually_conflicting_peers_get_one_permit_by_ack_time() {
        let g = IntersectionGeometry::new(2).unwrap();
        let cf = |a: &PathDirection, b: &PathDirection| g.conflicts(a, b).unwrap();
        // Both compatible with a northern straight, but not with each other.
        let b = PathDirection::new(Approach::South, Movement::Straight, 0);
        let c = PathDirection::new(Approach::East, Movement::Right, 0);
        assert!(!cf(&dir(Approach::North), &c));
        assert!(cf(&b, &c));
        let l = leader_with(&[(1, "BBB0001", b, 9), (2, "CCC0001", c, 4)]);
        let permits = l.issue_pass_permits(cf).unwrap();
        assert_eq!(permits.len(), 1);
        assert_eq!(permits[0].0, Address(2));
    }

    #[test]
    fn only_leaders_issue_permits() {
        let v = vehicle(0, "AAA0001", Approach::North);
        assert!(matches!(
            v.issue_pass_permits(|_, _| false),
            Err(ProtocolError::IllegalState { .. })
        ));
    }

    #[test]
    fn timeout_boundary_is_inclusive() {
        assert_eq!(on_timeout(500_000, 500_000), TimeoutDecision::SwitchToVision);
        assert_eq!(on_timeout(40_000, 500_000), TimeoutDecision::ContinueConsensus);
        assert_eq!(on_timeout(0, 1), TimeoutDecision::ContinueConsensus);
    }

    #[test]
    fn legal_transitions() {
        use ElectionStatus::*;
        let all = [InitCandidate, FinCandidate, Follower, Leader];
        let legal: Vec<_> = all
            .iter()
            .flat_map(|a| all.iter().map(move |b| (*a, *b)))
            .filter(|(a, b)| a.can_transition_to(*b))
            .collect();
        assert_eq!(
            legal,
            vec![
                (InitCandidate, FinCandidate),
                (InitCandidate, Follower),
                (FinCandidate, Follower),
                (FinCandidate, Leader),
            ]
        );
    }
}
