//! Seeded asynchronous transport with per-message delay and loss.
//!
//! One random stream serves every send, so the sequence of delays and losses
//! is fixed by the seed and the order of `send` calls.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, NetError};
use crate::protocol::{Address, ProtocolMessage};
use crate::Micros;

/// Distribution of one-way message delay, in microseconds.
///
/// The log-normal parameters describe the natural log of the delay in
/// milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DelayKind {
    Uniform { min: Micros, max: Micros },
    LogNormal { mu: f64, sigma: f64 },
    Fixed { d: Micros },
}

impl Default for DelayKind {
    fn default() -> Self {
        DelayKind::Uniform {
            min: 1_000,
            max: 5_000,
        }
    }
}

impl DelayKind {
    pub fn validate(&self) -> Result<(), ConfigError> {
        match *self {
            DelayKind::Uniform { min, max } if min > max => {
                Err(ConfigError::new("delay", format!("min {min} exceeds max {max}")))
            }
            DelayKind::LogNormal { mu, sigma } if !mu.is_finite() || !sigma.is_finite() || sigma < 0.0 => {
                Err(ConfigError::new("delay", "log-normal needs finite mu and sigma >= 0"))
            }
            _ => Ok(()),
        }
    }

    /// Delay that practically bounds every draw. For the log-normal this is
    /// the three-sigma point.
    pub fn upper_bound(&self) -> Micros {
        match *self {
            DelayKind::Uniform { max, .. } => max,
            DelayKind::Fixed { d } => d,
            DelayKind::LogNormal { mu, sigma } => ms_to_micros((mu + 3.0 * sigma).exp()),
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Micros {
        match *self {
            DelayKind::Uniform { min, max } => rng.random_range(min..=max),
            DelayKind::Fixed { d } => d,
            DelayKind::LogNormal { mu, sigma } => {
                let dist = LogNormal::new(mu, sigma).expect("validated parameters");
                ms_to_micros(dist.sample(rng))
            }
        }
    }
}

fn ms_to_micros(ms: f64) -> Micros {
    (ms * 1000.0).round().max(0.0) as Micros
}

fn fmt_ms(us: Micros) -> String {
    let ms = us as f64 / 1000.0;
    format!("{ms}")
}

fn parse_ms(s: &str) -> Result<Micros, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("`{s}` is not a number"))?;
    if !v.is_finite() || v < 0.0 {
        return Err(format!("`{s}` must be a non-negative number of milliseconds"));
    }
    Ok(ms_to_micros(v))
}

/// Command-line form: `uniform:MIN,MAX`, `fixed:D` (milliseconds) or
/// `lognormal:MU,SIGMA`.
impl FromStr for DelayKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, args) = s.split_once(':').ok_or_else(|| format!("`{s}` has no `kind:` prefix"))?;
        let args: Vec<&str> = args.split(',').collect();
        let parsed = match (kind, args.as_slice()) {
            ("uniform", [a, b]) => DelayKind::Uniform {
                min: parse_ms(a)?,
                max: parse_ms(b)?,
            },
            ("fixed", [d]) => DelayKind::Fixed { d: parse_ms(d)? },
            ("lognormal", [mu, sigma]) => DelayKind::LogNormal {
                mu: mu.trim().parse().map_err(|_| format!("`{mu}` is not a number"))?,
                sigma: sigma.trim().parse().map_err(|_| format!("`{sigma}` is not a number"))?,
            },
            _ => return Err(format!("unrecognised delay model `{s}`")),
        };
        parsed.validate().map_err(|e| e.reason)?;
        Ok(parsed)
    }
}

impl fmt::Display for DelayKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            DelayKind::Uniform { min, max } => write!(f, "uniform:{},{}", fmt_ms(min), fmt_ms(max)),
            DelayKind::Fixed { d } => write!(f, "fixed:{}", fmt_ms(d)),
            DelayKind::LogNormal { mu, sigma } => write!(f, "lognormal:{mu},{sigma}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayModel {
    pub kind: DelayKind,
    pub loss_prob: f64,
    pub seed: u64,
}

impl DelayModel {
    pub fn new(kind: DelayKind, loss_prob: f64, seed: u64) -> Result<Self, ConfigError> {
        let model = Self {
            kind,
            loss_prob,
            seed,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.kind.validate()?;
        if !(0.0..=1.0).contains(&self.loss_prob) {
            return Err(ConfigError::new("loss", format!("{} is outside [0, 1]", self.loss_prob)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Delivery {
    At(Micros),
    Lost,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Envelope {
    pub msg: ProtocolMessage,
    pub src: Address,
    pub dst: Address,
    pub send_time: Micros,
    pub deliver_time: Delivery,
}

/// Stream reserved for the transport within a seed.
const TRANSPORT_STREAM: u64 = 2;

pub struct Transport {
    model: DelayModel,
    rng: ChaCha8Rng,
    sent: u64,
}

impl Transport {
    pub fn new(model: DelayModel) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
        rng.set_stream(TRANSPORT_STREAM);
        Self { model, rng, sent: 0 }
    }

    pub fn model(&self) -> &DelayModel {
        &self.model
    }

    /// Messages handed to the transport so far, lost ones included.
    pub fn sent(&self) -> u64 {
        self.sent
    }

    /// Every send draws a loss decision and then a delay, whether or not the
    /// message is lost, so one lost message never shifts later draws.
    pub fn send(
        &mut self,
        msg: ProtocolMessage,
        src: Address,
        dst: Address,
        now: Micros,
    ) -> Result<Envelope, NetError> {
        if src == dst {
            return Err(NetError::SelfSend);
        }
        let lost = self.rng.random_bool(self.model.loss_prob);
        let delay = self.model.kind.sample(&mut self.rng);
        self.sent += 1;
        Ok(Envelope {
            msg,
            src,
            dst,
            send_time: now,
            deliver_time: if lost { Delivery::Lost } else { Delivery::At(now + delay) },
        })
    }
}
