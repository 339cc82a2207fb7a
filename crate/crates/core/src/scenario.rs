//! Whole-scenario simulation: batches of simultaneous arrivals, one
//! decision cycle after another, until every vehicle has crossed.
//!
//! Each cycle looks at the vehicles still waiting. Three or more CAVs vote
//! among themselves; a lone vehicle simply goes; anything else is settled by
//! plate order after one vision pass. A vote that runs into `t_vision` costs
//! the full threshold plus a vision pass. The leader and any permitted
//! vehicles then cross together, taking `passage_time`.

use std::collections::HashSet;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{vision_rank, AgentKind, VisionModel};
use crate::engine::{run_voting, Participant, VotingParams};
use crate::error::{AgentError, ConfigError};
use crate::geometry::{Approach, IntersectionGeometry, Movement, PathDirection};
use crate::net::{DelayKind, DelayModel, Transport};
use crate::protocol::Address;
use crate::quorum::QuorumRule;
use crate::Micros;

const BATCH_STREAM: u64 = 0;
const JITTER_STREAM: u64 = 1;

/// Sizes of simultaneous-arrival batches, drawn uniformly from
/// `[min_batch, max_batch]`. `max_batch = None` means the geometry's cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchModel {
    pub min_batch: usize,
    pub max_batch: Option<usize>,
}

impl Default for BatchModel {
    fn default() -> Self {
        Self {
            min_batch: 1,
            max_batch: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub total_lanes: u32,
    pub n_vehicles: u32,
    pub cav_ratio: f64,
    pub t_vision: Micros,
    pub hv_delay: Micros,
    pub quorum_mode: QuorumRule,
    pub delay: DelayKind,
    pub loss_prob: f64,
    /// Window for each vehicle's random first-request offset. It has to be
    /// wide compared with the spread of message delays, or several vehicles
    /// routinely split the candidate votes.
    pub jitter_bound: Micros,
    /// Time a vehicle spends processing one protocol message. This is the
    /// knob that sets the typical consensus time; see the README.
    pub handling_time: Micros,
    pub passage_time: Micros,
    pub batch_model: BatchModel,
    pub seed: u64,
    pub runs: u32,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            total_lanes: 2,
            n_vehicles: 300,
            cav_ratio: 1.0,
            t_vision: 500_000,
            hv_delay: 3_000_000,
            quorum_mode: QuorumRule::Majority,
            delay: DelayKind::default(),
            loss_prob: 0.0,
            jitter_bound: 40_000,
            handling_time: 2_500,
            passage_time: 2_000_000,
            batch_model: BatchModel::default(),
            seed: 0,
            runs: 1,
        }
    }
}

impl ScenarioConfig {
    /// Field names in errors match the configuration-file keys.
    pub fn validate(&self) -> Result<IntersectionGeometry, ConfigError> {
        let geometry = IntersectionGeometry::new(self.total_lanes)
            .map_err(|_| ConfigError::new("lanes", format!("{} is not one of 2, 4, 6, 8", self.total_lanes)))?;
        if self.n_vehicles == 0 {
            return Err(ConfigError::new("vehicles", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.cav_ratio) {
            return Err(ConfigError::new("cav_ratio", format!("{} is outside [0, 1]", self.cav_ratio)));
        }
        if self.t_vision == 0 {
            return Err(ConfigError::new("t_vision_ms", "must be positive"));
        }
        self.delay_model().validate()?;
        let cap = geometry.max_batch();
        let BatchModel { min_batch, max_batch } = self.batch_model;
        if min_batch == 0 || min_batch > cap {
            return Err(ConfigError::new("min_batch", format!("{min_batch} is outside [1, {cap}]")));
        }
        if let Some(max) = max_batch {
            if max < min_batch || max > cap {
                return Err(ConfigError::new("max_batch", format!("{max} is outside [{min_batch}, {cap}]")));
            }
        }
        if self.runs == 0 {
            return Err(ConfigError::new("runs", "must be at least 1"));
        }
        Ok(geometry)
    }

    /// The transport model. Its seed is the scenario seed; the transport
    /// draws from its own stream of that seed.
    pub fn delay_model(&self) -> DelayModel {
        DelayModel {
            kind: self.delay,
            loss_prob: self.loss_prob,
            seed: self.seed,
        }
    }

    fn max_batch(&self, geometry: &IntersectionGeometry) -> usize {
        self.batch_model.max_batch.unwrap_or(geometry.max_batch())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VehicleSpec {
    pub address: Address,
    pub kind: AgentKind,
    pub direction: PathDirection,
    pub plate: String,
}

/// Vehicles arriving together. A batch arrives as soon as the previous one
/// has completely cleared the intersection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Batch {
    pub vehicles: Vec<VehicleSpec>,
}

const PLATE_ALPHABET: &[u8] = b"0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ";

fn random_plate<R: Rng + ?Sized>(rng: &mut R) -> String {
    (0..7)
        .map(|_| PLATE_ALPHABET[rng.random_range(0..PLATE_ALPHABET.len())] as char)
        .collect()
}

pub fn generate_batches<R: Rng + ?Sized>(
    cfg: &ScenarioConfig,
    rng: &mut R,
) -> Result<Vec<Batch>, ConfigError> {
    let geometry = cfg.validate()?;
    let lanes = geometry.lanes_per_approach() as usize;
    let slots = 4 * lanes;
    let (lo, hi) = (cfg.batch_model.min_batch, cfg.max_batch(&geometry));
    let mut plates = HashSet::new();
    let mut batches = Vec::new();
    let mut next = 0u32;
    while next < cfg.n_vehicles {
        let left = (cfg.n_vehicles - next) as usize;
        let size = rng.random_range(lo..=hi).min(left);
        let mut vehicles = Vec::with_capacity(size);
        for slot in sample(rng, slots, size).into_vec() {
            let approach = Approach::ALL[slot / lanes];
            let lane = (slot % lanes) as u8;
            let movement = Movement::ALL[rng.random_range(0..3)];
            let kind = if rng.random_bool(cfg.cav_ratio) {
                AgentKind::Cav
            } else {
                AgentKind::Hv {
                    decision_delay: cfg.hv_delay,
                }
            };
            let plate = loop {
                let p = random_plate(rng);
                if plates.insert(p.clone()) {
                    break p;
                }
            };
            vehicles.push(VehicleSpec {
                address: Address(next),
                kind,
                direction: PathDirection::new(approach, movement, lane),
                plate,
            });
            next += 1;
        }
        batches.push(Batch { vehicles });
    }
    Ok(batches)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DecisionMode {
    Voting,
    VisionFallback,
    TrivialPass,
}

impl DecisionMode {
    pub fn name(self) -> &'static str {
        match self {
            DecisionMode::Voting => "Voting",
            DecisionMode::VisionFallback => "VisionFallback",
            DecisionMode::TrivialPass => "TrivialPass",
        }
    }
}

/// Outcome of one decision cycle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CycleMetrics {
    pub cycle: usize,
    pub batch: usize,
    pub start_time: Micros,
    /// Vehicles waiting when the cycle began.
    pub batch_size: usize,
    pub n_cav: usize,
    pub n_hv: usize,
    pub decision_mode: DecisionMode,
    /// Time spent voting: until leader promotion, `t_vision` on timeout,
    /// zero when no vote was held.
    pub consensus_time: Micros,
    /// Voting plus any vision processing, before anyone moves.
    pub decision_time: Micros,
    /// A vote was held and ran into `t_vision`.
    pub timed_out: bool,
    pub leader: Option<Address>,
    pub co_passers: usize,
    pub re_consensus_rounds: u32,
    pub messages: u64,
    pub passed: Vec<Address>,
    pub end_time: Micros,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregates {
    pub cycles: usize,
    pub voting_cycles: usize,
    pub vision_cycles: usize,
    pub trivial_cycles: usize,
    /// Cycles that began with three or more vehicles waiting.
    pub multi_vehicle_cycles: usize,
    pub timeouts: usize,
    pub timeout_rate: f64,
    pub mean_consensus_time_ms: Option<f64>,
    pub p95_consensus_time_ms: Option<f64>,
    pub mean_decision_time_ms: f64,
    pub total_time_s: f64,
    pub throughput_vpm: f64,
    pub messages: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioResult {
    pub config: ScenarioConfig,
    pub cycles: Vec<CycleMetrics>,
    pub aggregates: Aggregates,
}

fn ms(us: Micros) -> f64 {
    us as f64 / 1000.0
}

/// Nearest-rank percentile of an ascending slice.
fn percentile(sorted: &[Micros], p: f64) -> Micros {
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

pub fn aggregate(cycles: &[CycleMetrics], n_vehicles: u32) -> Aggregates {
    let count = |m: DecisionMode| cycles.iter().filter(|c| c.decision_mode == m).count();
    let mut voting: Vec<Micros> = cycles
        .iter()
        .filter(|c| c.decision_mode == DecisionMode::Voting)
        .map(|c| c.consensus_time)
        .collect();
    voting.sort_unstable();
    let multi = cycles.iter().filter(|c| c.batch_size >= 3).count();
    let timeouts = cycles.iter().filter(|c| c.batch_size >= 3 && c.timed_out).count();
    let total = cycles.last().map_or(0, |c| c.end_time) - cycles.first().map_or(0, |c| c.start_time);
    let decision_sum: Micros = cycles.iter().map(|c| c.decision_time).sum();
    Aggregates {
        cycles: cycles.len(),
        voting_cycles: voting.len(),
        vision_cycles: count(DecisionMode::VisionFallback),
        trivial_cycles: count(DecisionMode::TrivialPass),
        multi_vehicle_cycles: multi,
        timeouts,
        timeout_rate: if multi == 0 { 0.0 } else { timeouts as f64 / multi as f64 },
        mean_consensus_time_ms: (!voting.is_empty())
            .then(|| ms(voting.iter().sum::<Micros>()) / voting.len() as f64),
        p95_consensus_time_ms: (!voting.is_empty()).then(|| ms(percentile(&voting, 95.0))),
        mean_decision_time_ms: if cycles.is_empty() {
            0.0
        } else {
            ms(decision_sum) / cycles.len() as f64
        },
        total_time_s: total as f64 / 1e6,
        throughput_vpm: if total == 0 {
            0.0
        } else {
            n_vehicles as f64 / (total as f64 / 60e6)
        },
        messages: cycles.iter().map(|c| c.messages).sum(),
    }
}

struct Runner<'a> {
    cfg: &'a ScenarioConfig,
    voting: VotingParams,
    vision: VisionModel,
    transport: Transport,
    jitter: ChaCha8Rng,
    now: Micros,
    cycles: Vec<CycleMetrics>,
}

impl Runner<'_> {
    fn hv_extra(&self, passers: &[&VehicleSpec]) -> Micros {
        passers
            .iter()
            .filter_map(|v| match v.kind {
                AgentKind::Hv { decision_delay } => Some(decision_delay),
                AgentKind::Cav => None,
            })
            .max()
            .unwrap_or(0)
    }

    fn first_by_plate<'v>(waiting: &[&'v VehicleSpec]) -> Result<&'v VehicleSpec, AgentError> {
        let plates: Vec<&str> = waiting.iter().map(|v| v.plate.as_str()).collect();
        let first = vision_rank(&plates)?.swap_remove(0);
        Ok(waiting
            .iter()
            .find(|v| v.plate.eq_ignore_ascii_case(&first))
            .expect("ranked plate belongs to a waiting vehicle"))
    }

    /// Run one decision cycle and return the vehicles that crossed.
    fn cycle(&mut self, batch: usize, waiting: &[&VehicleSpec]) -> Result<Vec<Address>, AgentError> {
        let start = self.now;
        let n_cav = waiting.iter().filter(|v| v.kind.is_cav()).count();
        let mut consensus_time = 0;
        let mut timed_out = false;
        let mut leader = None;
        let mut rounds = 0;
        let mut messages = 0;
        let (mode, decision_time, passers): (DecisionMode, Micros, Vec<&VehicleSpec>) = if n_cav >= 3 {
            let cavs: Vec<Participant> = waiting
                .iter()
                .filter(|v| v.kind.is_cav())
                .map(|v| Participant {
                    address: v.address,
                    plate: v.plate.clone(),
                    direction: v.direction,
                    responsive: true,
                })
                .collect();
            let out = run_voting(&cavs, &self.voting, start, &mut self.transport, &mut self.jitter, None)?;
            consensus_time = out.consensus_time;
            rounds = out.rounds;
            messages = out.messages;
            match out.leader {
                Some(l) => {
                    leader = Some(l);
                    let mut passers: Vec<&VehicleSpec> =
                        waiting.iter().copied().filter(|v| v.address == l).collect();
                    passers.extend(waiting.iter().copied().filter(|v| out.co_passers.contains(&v.address)));
                    (DecisionMode::Voting, consensus_time, passers)
                }
                None => {
                    timed_out = true;
                    let first = Self::first_by_plate(waiting)?;
                    let decision = consensus_time + self.vision.decision_latency(waiting.len());
                    (DecisionMode::VisionFallback, decision, vec![first])
                }
            }
        } else if waiting.len() == 1 {
            (DecisionMode::TrivialPass, 0, vec![waiting[0]])
        } else {
            let first = Self::first_by_plate(waiting)?;
            (DecisionMode::VisionFallback, self.vision.decision_latency(waiting.len()), vec![first])
        };
        let end = start + decision_time + self.hv_extra(&passers) + self.cfg.passage_time;
        let passed: Vec<Address> = passers.iter().map(|v| v.address).collect();
        self.cycles.push(CycleMetrics {
            cycle: self.cycles.len(),
            batch,
            start_time: start,
            batch_size: waiting.len(),
            n_cav,
            n_hv: waiting.len() - n_cav,
            decision_mode: mode,
            consensus_time,
            decision_time,
            timed_out,
            leader,
            co_passers: if leader.is_some() { passed.len() - 1 } else { 0 },
            re_consensus_rounds: rounds.saturating_sub(1),
            messages,
            passed: passed.clone(),
            end_time: end,
        });
        self.now = end;
        Ok(passed)
    }
}

/// Simulate one scenario with `cfg.seed`. `cfg.runs` is ignored here; see
/// [`run_replicates`].
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioResult, ConfigError> {
    let geometry = cfg.validate()?;
    let mut batch_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    batch_rng.set_stream(BATCH_STREAM);
    let mut jitter = ChaCha8Rng::seed_from_u64(cfg.seed);
    jitter.set_stream(JITTER_STREAM);
    let batches = generate_batches(cfg, &mut batch_rng)?;
    let mut runner = Runner {
        cfg,
        voting: VotingParams {
            geometry,
            quorum_rule: cfg.quorum_mode,
            t_vision: cfg.t_vision,
            jitter_bound: cfg.jitter_bound,
            handling_time: cfg.handling_time,
            drain_after_leader: false,
        },
        vision: VisionModel::new(cfg.t_vision)?,
        transport: Transport::new(cfg.delay_model()),
        jitter,
        now: 0,
        cycles: Vec::new(),
    };
    for (b, batch) in batches.iter().enumerate() {
        let mut waiting: Vec<&VehicleSpec> = batch.vehicles.iter().collect();
        while !waiting.is_empty() {
            let passed = runner
                .cycle(b, &waiting)
                .expect("generated batches have unique plates and valid directions");
            waiting.retain(|v| !passed.contains(&v.address));
        }
    }
    let aggregates = aggregate(&runner.cycles, cfg.n_vehicles);
    Ok(ScenarioResult {
        config: *cfg,
        cycles: runner.cycles,
        aggregates,
    })
}

/// Run independent scenarios, in parallel when the `parallel` feature is on.
/// Results keep the input order.
pub fn run_batch(cfgs: &[ScenarioConfig]) -> Vec<Result<ScenarioResult, ConfigError>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        cfgs.par_iter().map(run_scenario).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        cfgs.iter().map(run_scenario).collect()
    }
}

/// `cfg.runs` replicates with seeds `seed, seed + 1, ...`.
pub fn run_replicates(cfg: &ScenarioConfig) -> Result<Vec<ScenarioResult>, ConfigError> {
    cfg.validate()?;
    let cfgs: Vec<ScenarioConfig> = (0..cfg.runs)
        .map(|i| ScenarioConfig {
            seed: cfg.seed.wrapping_add(u64::from(i)),
            runs: 1,
            ..*cfg
        })
        .collect();
    run_batch(&cfgs).into_iter().collect()
}
