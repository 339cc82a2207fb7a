//! Discrete-event simulation of one voting cycle among CAVs.
//!
//! Each vehicle handles one message at a time and spends `handling_time` on
//! it, so messages queue up at busy receivers. A round that has not produced
//! a leader by its deadline is abandoned: every vehicle resets and votes
//! again, and anything still in flight from the old round is discarded. If
//! no leader emerges before `t_vision` has elapsed, the cycle times out.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::agents::{Agent, AgentEvent, AgentOutcome, CavContext, Outgoing};
use crate::error::AgentError;
use crate::geometry::{IntersectionGeometry, PathDirection};
use crate::net::{Delivery, Envelope, Transport};
use crate::protocol::{Address, ElectionStatus, ProtocolMessage, VehicleInfo};
use crate::quorum::QuorumRule;
use crate::Micros;

/// One CAV taking part in a vote. Unresponsive vehicles are counted in the
/// quorum but never send or answer anything.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Participant {
    pub address: Address,
    pub plate: String,
    pub direction: PathDirection,
    pub responsive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VotingParams {
    pub geometry: IntersectionGeometry,
    pub quorum_rule: QuorumRule,
    pub t_vision: Micros,
    pub jitter_bound: Micros,
    pub handling_time: Micros,
    /// Keep delivering the deciding round's messages after the first leader
    /// appears, to check that no second leader emerges.
    pub drain_after_leader: bool,
}

impl VotingParams {
    /// How long a round may run before everyone starts over: the request
    /// jitter, two request/response exchanges, and a receiver working
    /// through a full inbox in each of the four message waves.
    pub fn round_timeout(&self, n: usize, delay_upper_bound: Micros) -> Micros {
        let n = n.max(1) as Micros;
        self.jitter_bound + 4 * delay_upper_bound + 4 * (n - 1) * self.handling_time
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    RoundStart,
    Send,
    Lost,
    Deliver,
    /// Delivered to a vehicle that never answers.
    Dropped,
    BecameFinCandidate,
    BecameFollower,
    BecameLeader,
    RoundExpired,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceEntry {
    pub time_us: Micros,
    pub round: u32,
    pub kind: TraceKind,
    pub src: Option<u32>,
    pub dst: Option<u32>,
    pub message: Option<&'static str>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VotingOutcome {
    pub leader: Option<Address>,
    /// From cycle start to leader promotion, or `t_vision` on timeout.
    pub consensus_time: Micros,
    pub timed_out: bool,
    pub rounds: u32,
    /// Vehicles whose pass permit actually arrived.
    pub co_passers: Vec<Address>,
    /// Vehicles that reached `Leader` in the deciding round.
    pub leaders: Vec<Address>,
    pub messages: u64,
    /// Final protocol state per participant, in input order.
    pub states: Vec<VehicleInfo>,
}

enum Event {
    Send { round: u32, from: Address, out: Outgoing },
    Arrive { round: u32, env: Envelope },
    Process { round: u32, dst: usize, msg: ProtocolMessage },
    RoundDeadline { round: u32 },
}

impl Event {
    fn round(&self) -> u32 {
        match self {
            Event::Send { round, .. }
            | Event::Arrive { round, .. }
            | Event::Process { round, .. }
            | Event::RoundDeadline { round } => *round,
        }
    }
}

struct Queue {
    heap: BinaryHeap<Reverse<(Micros, u64, usize)>>,
    slots: Vec<Option<Event>>,
    seq: u64,
}

impl Queue {
    fn new() -> Self {
        Self {
            heap: BinaryHeap::new(),
            slots: Vec::new(),
            seq: 0,
        }
    }

    /// Equal times pop in push order.
    fn push(&mut self, at: Micros, ev: Event) {
        self.slots.push(Some(ev));
        self.heap.push(Reverse((at, self.seq, self.slots.len() - 1)));
        self.seq += 1;
    }

    fn pop(&mut self) -> Option<(Micros, Event)> {
        let Reverse((at, _, slot)) = self.heap.pop()?;
        Some((at, self.slots[slot].take().expect("each slot pops once")))
    }

    fn clear(&mut self) {
        self.heap.clear();
        self.slots.clear();
    }
}

struct Sim<'a> {
    agents: Vec<Agent>,
    responsive: Vec<bool>,
    params: &'a VotingParams,
    transport: &'a mut Transport,
    jitter: &'a mut ChaCha8Rng,
    queue: Queue,
    busy_until: Vec<Micros>,
    trace: Option<&'a mut Vec<TraceEntry>>,
}

impl Sim<'_> {
    fn index_of(&self, a: Address) -> Option<usize> {
        self.agents.iter().position(|ag| ag.address() == a)
    }

    fn log(&mut self, time: Micros, round: u32, kind: TraceKind, src: Option<Address>, dst: Option<Address>, msg: Option<&ProtocolMessage>) {
        if let Some(t) = self.trace.as_deref_mut() {
            t.push(TraceEntry {
                time_us: time,
                round,
                kind,
                src: src.map(|a| a.0),
                dst: dst.map(|a| a.0),
                message: msg.map(ProtocolMessage::kind_name),
            });
        }
    }

    fn transmit(&mut self, now: Micros, round: u32, from: Address, out: Outgoing) -> Envelope {
        let env = self
            .transport
            .send(out.msg, from, out.dst, now)
            .expect("agents never address themselves");
        match env.deliver_time {
            Delivery::At(t) => {
                self.log(now, round, TraceKind::Send, Some(from), Some(env.dst), Some(&env.msg));
                self.queue.push(t, Event::Arrive { round, env: env.clone() });
            }
            Delivery::Lost => {
                self.log(now, round, TraceKind::Lost, Some(from), Some(env.dst), Some(&env.msg));
            }
        }
        env
    }

    fn dispatch(&mut self, now: Micros, round: u32, from: Address, outgoing: Vec<Outgoing>) -> Vec<Envelope> {
        let mut sent = Vec::new();
        for out in outgoing {
            if out.send_at > now {
                self.queue.push(out.send_at, Event::Send { round, from, out });
            } else {
                sent.push(self.transmit(now, round, from, out));
            }
        }
        sent
    }

    fn start_round(&mut self, now: Micros, round: u32, deadline: Micros) -> Result<(), AgentError> {
        self.queue.clear();
        self.busy_until.iter_mut().for_each(|b| *b = now);
        self.log(now, round, TraceKind::RoundStart, None, None, None);
        for i in 0..self.agents.len() {
            if !self.responsive[i] {
                continue;
            }
            let from = self.agents[i].address();
            let jitter_bound = self.params.jitter_bound;
            let out = self.agents[i].on_event(AgentEvent::StartRound { jitter_bound }, now, &mut *self.jitter)?;
            self.dispatch(now, round, from, out.outgoing);
        }
        self.queue.push(deadline, Event::RoundDeadline { round });
        Ok(())
    }
}

/// Run one voting cycle starting at `start`. Random draws come from the
/// shared transport stream and the jitter stream, in event order.
pub fn run_voting(
    participants: &[Participant],
    params: &VotingParams,
    start: Micros,
    transport: &mut Transport,
    jitter: &mut ChaCha8Rng,
    trace: Option<&mut Vec<TraceEntry>>,
) -> Result<VotingOutcome, AgentError> {
    let n = participants.len();
    let quorum = params.quorum_rule.threshold(n as u32)?;
    let mut agents = Vec::with_capacity(n);
    for p in participants {
        let peers = participants
            .iter()
            .filter(|q| q.address != p.address)
            .map(|q| q.address)
            .collect();
        let info = VehicleInfo::new(p.address, p.plate.clone(), p.direction);
        agents.push(Agent::cav(
            info,
            CavContext {
                peers,
                quorum,
                geometry: params.geometry,
            },
        )?);
    }
    let round_len = params.round_timeout(n, transport.model().kind.upper_bound());
    let vision_deadline = start + params.t_vision;
    let messages_before = transport.sent();
    let mut sim = Sim {
        agents,
        responsive: participants.iter().map(|p| p.responsive).collect(),
        params,
        transport,
        jitter,
        queue: Queue::new(),
        busy_until: vec![start; n],
        trace,
    };

    let mut round = 1;
    sim.start_round(start, round, start + round_len)?;
    let mut leader: Option<(Address, Micros)> = None;
    let mut leaders = Vec::new();
    let mut co_passers = Vec::new();
    let mut timed_out = false;

    while let Some((now, ev)) = sim.queue.pop() {
        if ev.round() != round {
            continue;
        }
        if leader.is_none() && now >= vision_deadline {
            sim.log(vision_deadline, round, TraceKind::Timeout, None, None, None);
            timed_out = true;
            break;
        }
        match ev {
            Event::RoundDeadline { .. } => {
                if leader.is_some() {
                    continue;
                }
                sim.log(now, round, TraceKind::RoundExpired, None, None, None);
                round += 1;
                sim.start_round(now, round, now + round_len)?;
            }
            Event::Send { from, out, .. } => {
                sim.transmit(now, round, from, out);
            }
            Event::Arrive { env, .. } => {
                let Some(dst) = sim.index_of(env.dst) else { continue };
                if !sim.responsive[dst] {
                    sim.log(now, round, TraceKind::Dropped, Some(env.src), Some(env.dst), Some(&env.msg));
                    continue;
                }
                let done = sim.busy_until[dst].max(now) + params.handling_time;
                sim.busy_until[dst] = done;
                sim.queue.push(done, Event::Process { round, dst, msg: env.msg });
            }
            Event::Process { dst, msg, .. } => {
                let from = msg.sender();
                let me = sim.agents[dst].address();
                sim.log(now, round, TraceKind::Deliver, Some(from), Some(me), Some(&msg));
                let before = sim.agents[dst].info.election_status;
                let out = sim.agents[dst].on_event(AgentEvent::Deliver { dst: me, msg }, now, &mut *sim.jitter)?;
                match &out.outcome {
                    AgentOutcome::BecameFinCandidate => {
                        sim.log(now, round, TraceKind::BecameFinCandidate, Some(me), None, None)
                    }
                    AgentOutcome::BecameFollower if before != ElectionStatus::Follower => {
                        sim.log(now, round, TraceKind::BecameFollower, Some(me), None, None)
                    }
                    AgentOutcome::BecameLeader { .. } => {
                        sim.log(now, round, TraceKind::BecameLeader, Some(me), None, None)
                    }
                    _ => {}
                }
                let became_leader = matches!(out.outcome, AgentOutcome::BecameLeader { .. });
                if became_leader {
                    leaders.push(me);
                }
                let sent = sim.dispatch(now, round, me, out.outgoing);
                if became_leader && leader.is_none() {
                    leader = Some((me, now));
                    co_passers = sent
                        .iter()
                        .filter(|e| matches!(e.msg, ProtocolMessage::PassPermit(_)))
                        .filter(|e| e.deliver_time != Delivery::Lost)
                        .map(|e| e.dst)
                        .collect();
                    if !params.drain_after_leader {
                        break;
                    }
                }
            }
        }
    }

    let messages = sim.transport.sent() - messages_before;
    let states = sim.agents.into_iter().map(|a| a.info).collect();
    Ok(match leader {
        Some((addr, at)) => VotingOutcome {
            leader: Some(addr),
            consensus_time: at - start,
            timed_out: false,
            rounds: round,
            co_passers,
            leaders,
            messages,
            states,
        },
        None => {
            // The queue cannot run dry before the deadline: every round
            // schedules its own expiry.
            debug_assert!(timed_out);
            VotingOutcome {
                leader: None,
                consensus_time: params.t_vision,
                timed_out: true,
                rounds: round,
                co_passers: Vec::new(),
                leaders,
                messages,
                states,
            }
        }
    })
}
