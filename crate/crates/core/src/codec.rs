//! Length-prefixed wire format for protocol messages.
//!
//! A frame is a 4-byte big-endian payload length followed by a UTF-8 record
//! of `key=value` lines, always with the same nine keys in the same order:
//!
//! ```text
//! kind, sender, plate, direction, received_votes, election_time,
//! election_status, verdict, directionStatus
//! ```
//!
//! Keys that do not apply to a message kind carry an empty value.

use crate::error::NetError;
use crate::geometry::PathDirection;
use crate::protocol::{
    Address, CandidateVerdict, CandidateVoteRequest, CandidateVoteResponse, ElectionStatus,
    ElectionVoteRequest, ElectionVoteResponse, PassPermit, PassageAnnouncement, ProtocolMessage,
    Snapshot, Verdict,
};

/// Largest payload accepted by [`decode_frame`].
pub const MAX_FRAME_LEN: usize = 64 * 1024;

const KEYS: [&str; 9] = [
    "kind",
    "sender",
    "plate",
    "direction",
    "received_votes",
    "election_time",
    "election_status",
    "verdict",
    "directionStatus",
];

#[derive(Default)]
struct Record {
    kind: &'static str,
    sender: String,
    plate: String,
    direction: String,
    received_votes: String,
    election_time: String,
    election_status: String,
    verdict: String,
    direction_status: String,
}

impl Record {
    fn snapshot(&mut self, s: &Snapshot) {
        self.received_votes = s.received_votes.to_string();
        self.election_time = s.election_time.to_string();
        self.election_status = s.election_status.name().to_string();
    }
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Acknowledged => "Acknowledged",
        Verdict::Ignored => "Ignored",
    }
}

pub fn encode_frame(msg: &ProtocolMessage) -> Result<Vec<u8>, NetError> {
    let mut r = Record {
        kind: msg.kind_name(),
        sender: msg.sender().0.to_string(),
        ..Record::default()
    };
    match msg {
        ProtocolMessage::CandidateVoteRequest(m) => {
            r.plate = m.plate.clone();
            r.direction = m.direction.to_string();
        }
        ProtocolMessage::CandidateVoteResponse(m) => {
            r.plate = m.plate.clone();
            r.direction = m.direction.to_string();
            r.snapshot(&m.snapshot);
            match m.verdict {
                CandidateVerdict::Acknowledged { direction_status } => {
                    r.verdict = "Acknowledged".into();
                    r.direction_status = direction_status.to_string();
                }
                CandidateVerdict::Ignored => r.verdict = "Ignored".into(),
            }
        }
        ProtocolMessage::ElectionVoteRequest(m) => {
            r.plate = m.plate.clone();
            r.snapshot(&m.snapshot);
        }
        ProtocolMessage::ElectionVoteResponse(m) => {
            r.plate = m.plate.clone();
            r.snapshot(&m.snapshot);
            r.verdict = verdict_name(m.verdict).into();
        }
        ProtocolMessage::PassPermit(m) => r.plate = m.plate.clone(),
        ProtocolMessage::PassageAnnouncement(m) => {
            r.plate = m.plate.clone();
            r.direction = m.direction.to_string();
        }
    }
    if r.plate.contains(['\n', '\r']) {
        return Err(NetError::Protocol("plate contains a line break".into()));
    }
    let values = [
        r.kind,
        &r.sender,
        &r.plate,
        &r.direction,
        &r.received_votes,
        &r.election_time,
        &r.election_status,
        &r.verdict,
        &r.direction_status,
    ];
    let mut body = String::new();
    for (key, value) in KEYS.iter().zip(values) {
        body.push_str(key);
        body.push('=');
        body.push_str(value);
        body.push('\n');
    }
    if body.len() > MAX_FRAME_LEN {
        return Err(NetError::Frame(format!("payload of {} bytes exceeds limit", body.len())));
    }
    let mut out = Vec::with_capacity(4 + body.len());
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(body.as_bytes());
    Ok(out)
}

/// Decode exactly one frame; trailing bytes are an error.
pub fn decode_frame(bytes: &[u8]) -> Result<ProtocolMessage, NetError> {
    if bytes.len() < 4 {
        return Err(NetError::Frame(format!("{} bytes is shorter than the length prefix", bytes.len())));
    }
    let len = u32::from_be_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]) as usize;
    if len > MAX_FRAME_LEN {
        return Err(NetError::Frame(format!("declared length {len} exceeds {MAX_FRAME_LEN}")));
    }
    let payload = &bytes[4..];
    if payload.len() != len {
        return Err(NetError::Frame(format!(
            "declared length {len} but {} payload bytes",
            payload.len()
        )));
    }
    let text = std::str::from_utf8(payload).map_err(|e| NetError::Frame(e.to_string()))?;
    let body = text
        .strip_suffix('\n')
        .ok_or_else(|| NetError::Frame("record does not end with a newline".into()))?;
    let lines: Vec<&str> = body.split('\n').collect();
    if lines.len() != KEYS.len() {
        return Err(NetError::Frame(format!("expected {} fields, found {}", KEYS.len(), lines.len())));
    }
    let mut values = [""; 9];
    for (i, (line, key)) in lines.iter().zip(KEYS).enumerate() {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| NetError::Frame(format!("line `{line}` has no `=`")))?;
        if k != key {
            return Err(NetError::Frame(format!("expected key `{key}`, found `{k}`")));
        }
        values[i] = v;
    }
    parse_record(values)
}

fn bad(field: &str, value: &str) -> NetError {
    NetError::Protocol(format!("bad {field} `{value}`"))
}

fn parse_record(v: [&str; 9]) -> Result<ProtocolMessage, NetError> {
    let [kind, sender, plate, direction, votes, time, status, verdict, dir_status] = v;
    let sender = Address(sender.parse().map_err(|_| bad("sender", sender))?);
    let plate = plate.to_string();
    let direction = || -> Result<PathDirection, NetError> {
        direction.parse().map_err(|_| bad("direction", direction))
    };
    let snapshot = || -> Result<Snapshot, NetError> {
        Ok(Snapshot {
            received_votes: votes.parse().map_err(|_| bad("received_votes", votes))?,
            election_time: time.parse().map_err(|_| bad("election_time", time))?,
            election_status: match status {
                "InitCandidate" => ElectionStatus::InitCandidate,
                "FinCandidate" => ElectionStatus::FinCandidate,
                "Follower" => ElectionStatus::Follower,
                "Leader" => ElectionStatus::Leader,
                _ => return Err(bad("election_status", status)),
            },
        })
    };
    let verdict_of = || match verdict {
        "Acknowledged" => Ok(Verdict::Acknowledged),
        "Ignored" => Ok(Verdict::Ignored),
        _ => Err(bad("verdict", verdict)),
    };
    let msg = match kind {
        "CandidateVoteRequest" => ProtocolMessage::CandidateVoteRequest(CandidateVoteRequest {
            sender,
            plate,
            direction: direction()?,
        }),
        "CandidateVoteResponse" => {
            let verdict = match (verdict_of()?, dir_status) {
                (Verdict::Acknowledged, "true") => CandidateVerdict::Acknowledged { direction_status: true },
                (Verdict::Acknowledged, "false") => CandidateVerdict::Acknowledged { direction_status: false },
                (Verdict::Ignored, "") => CandidateVerdict::Ignored,
                _ => return Err(bad("directionStatus", dir_status)),
            };
            ProtocolMessage::CandidateVoteResponse(CandidateVoteResponse {
                sender,
                plate,
                direction: direction()?,
                verdict,
                snapshot: snapshot()?,
            })
        }
        "ElectionVoteRequest" => ProtocolMessage::ElectionVoteRequest(ElectionVoteRequest {
            sender,
            plate,
            snapshot: snapshot()?,
        }),
        "ElectionVoteResponse" => ProtocolMessage::ElectionVoteResponse(ElectionVoteResponse {
            sender,
            plate,
            verdict: verdict_of()?,
            snapshot: snapshot()?,
        }),
        "PassPermit" => ProtocolMessage::PassPermit(PassPermit { sender, plate }),
        "PassageAnnouncement" => ProtocolMessage::PassageAnnouncement(PassageAnnouncement {
            sender,
            plate,
            direction: direction()?,
        }),
        other => return Err(NetError::Protocol(format!("unknown message kind `{other}`"))),
    };
    Ok(msg)
}
