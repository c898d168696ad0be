//! Line-oriented event log.
//!
//! One event per line: `seq<TAB>at_ms<TAB>type<TAB>payload`. The payload is a
//! form-urlencoded `key=value&key=value` list whose keys appear in a fixed
//! order per event type. Timestamps are milliseconds since the session was
//! created; the `create` event carries the wall-clock anchor.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

use crate::domain::{Event, EventKind, Millis, Phase, PhaseReason};

#[derive(Debug, Error)]
pub enum LogError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("event log io: {0}")]
    Io(#[from] io::Error),
}

fn parse_err(line: usize, message: impl Into<String>) -> LogError {
    LogError::Parse {
        line,
        message: message.into(),
    }
}

fn payload_fields(kind: &EventKind) -> Vec<(&'static str, String)> {
    match kind {
        EventKind::Create { group, epoch_ms } => vec![("group", group.to_string()), ("epoch_ms", epoch_ms.to_string())],
        EventKind::Join { member, nickname } => vec![("member", member.to_string()), ("nickname", nickname.clone())],
        EventKind::Phase { phase, reason } => vec![("phase", phase.as_str().to_owned()), ("reason", reason.encode())],
        EventKind::Rate {
            member,
            restaurant,
            value,
        }
        | EventKind::Negative {
            member,
            restaurant,
            value,
        } => vec![
            ("member", member.to_string()),
            ("restaurant", restaurant.to_string()),
            ("value", value.to_string()),
        ],
        EventKind::Save {
            saver,
            source,
            restaurant,
            value,
        } => vec![
            ("saver", saver.to_string()),
            ("source", source.to_string()),
            ("restaurant", restaurant.to_string()),
            ("value", value.to_string()),
        ],
        EventKind::Chat {
            sender,
            text,
            restaurant,
        } => {
            let mut f = vec![("sender", sender.to_string())];
            if let Some(r) = restaurant {
                f.push(("restaurant", r.to_string()));
            }
            f.push(("text", text.clone()));
            f
        }
        EventKind::Tick => Vec::new(),
    }
}

pub fn encode_payload(kind: &EventKind) -> String {
    let mut ser = form_urlencoded::Serializer::new(String::new());
    for (k, v) in payload_fields(kind) {
        ser.append_pair(k, &v);
    }
    ser.finish()
}

/// Encodes one event without the trailing newline.
pub fn encode_line(event: &Event) -> String {
    format!(
        "{}\t{}\t{}\t{}",
        event.seq,
        event.at,
        event.kind.type_tag(),
        encode_payload(&event.kind)
    )
}

struct Fields {
    pairs: Vec<(String, String)>,
    next: usize,
}

impl Fields {
    fn take(&mut self, key: &str) -> Result<String, String> {
        match self.pairs.get(self.next) {
            Some((k, v)) if k == key => {
                self.next += 1;
                Ok(v.clone())
            }
            Some((k, _)) => Err(format!("expected field `{key}`, found `{k}`")),
            None => Err(format!("missing field `{key}`")),
        }
    }

    fn take_optional(&mut self, key: &str) -> Option<String> {
        match self.pairs.get(self.next) {
            Some((k, v)) if k == key => {
                self.next += 1;
                Some(v.clone())
            }
            _ => None,
        }
    }

    fn finish(self) -> Result<(), String> {
        match self.pairs.get(self.next) {
            Some((k, _)) => Err(format!("unexpected field `{k}`")),
            None => Ok(()),
        }
    }
}

fn number<T: std::str::FromStr>(key: &str, raw: &str) -> Result<T, String> {
    raw.parse()
        .map_err(|_| format!("field `{key}`: `{raw}` is not a valid number"))
}

pub fn decode_payload(tag: &str, payload: &str) -> Result<EventKind, String> {
    let mut f = Fields {
        pairs: form_urlencoded::parse(payload.as_bytes()).into_owned().collect(),
        next: 0,
    };
    let kind = match tag {
        "create" => EventKind::Create {
            group: f.take("group")?.into(),
            epoch_ms: number("epoch_ms", &f.take("epoch_ms")?)?,
        },
        "join" => EventKind::Join {
            member: f.take("member")?.into(),
            nickname: f.take("nickname")?,
        },
        "phase" => {
            let phase = f.take("phase")?;
            let reason = f.take("reason")?;
            EventKind::Phase {
                phase: Phase::parse(&phase).ok_or_else(|| format!("unknown phase `{phase}`"))?,
                reason: PhaseReason::parse(&reason).ok_or_else(|| format!("unknown reason `{reason}`"))?,
            }
        }
        "rate" | "negative" => {
            let member = f.take("member")?.into();
            let restaurant = f.take("restaurant")?.into();
            let value = number("value", &f.take("value")?)?;
            if tag == "rate" {
                EventKind::Rate {
                    member,
                    restaurant,
                    value,
                }
            } else {
                EventKind::Negative {
                    member,
                    restaurant,
                    value,
                }
            }
        }
        "save" => EventKind::Save {
            saver: f.take("saver")?.into(),
            source: f.take("source")?.into(),
            restaurant: f.take("restaurant")?.into(),
            value: number("value", &f.take("value")?)?,
        },
        "chat" => EventKind::Chat {
            sender: f.take("sender")?.into(),
            restaurant: f.take_optional("restaurant").map(Into::into),
            text: f.take("text")?,
        },
        "tick" => EventKind::Tick,
        other => return Err(format!("unknown event type `{other}`")),
    };
    f.finish()?;
    Ok(kind)
}

/// Parses one line; `line_no` is 1-based and only used in errors.
pub fn decode_line(line: &str, line_no: usize) -> Result<Event, LogError> {
    let parts: Vec<&str> = line.splitn(4, '\t').collect();
    if parts.len() != 4 {
        return Err(parse_err(
            line_no,
            format!("expected 4 tab-separated columns, found {}", parts.len()),
        ));
    }
    let seq: u64 = number("seq", parts[0]).map_err(|m| parse_err(line_no, m))?;
    let at: Millis = number("at_ms", parts[1]).map_err(|m| parse_err(line_no, m))?;
    let kind = decode_payload(parts[2], parts[3]).map_err(|m| parse_err(line_no, m))?;
    Ok(Event { seq, at, kind })
}

/// Parses a whole log. Sequence numbers must count up from 0 and times must
/// not decrease. Blank lines are not allowed.
pub fn parse_log(text: &str) -> Result<Vec<Event>, LogError> {
    let mut events: Vec<Event> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let event = decode_line(line, line_no)?;
        if event.seq != events.len() as u64 {
            return Err(parse_err(
                line_no,
                format!("sequence number {} out of order, expected {}", event.seq, events.len()),
            ));
        }
        if let Some(prev) = events.last() {
            if event.at < prev.at {
                return Err(parse_err(
                    line_no,
                    format!("time {} precedes previous event at {}", event.at, prev.at),
                ));
            }
        }
        events.push(event);
    }
    Ok(events)
}

/// Parses a log that may end in a torn write. A final line without a
/// newline that fails to parse is dropped; the returned length is the byte
/// offset up to which the file is intact.
pub fn recover_log(text: &str) -> Result<(Vec<Event>, usize), LogError> {
    if text.is_empty() || text.ends_with('\n') {
        return parse_log(text).map(|e| (e, text.len()));
    }
    let cut = text.rfind('\n').map_or(0, |i| i + 1);
    match parse_log(text) {
        Ok(events) => Ok((events, text.len())),
        Err(LogError::Parse { line, .. }) if line == text[..cut].lines().count() + 1 => {
            parse_log(&text[..cut]).map(|e| (e, cut))
        }
        Err(e) => Err(e),
    }
}

pub fn read_log(path: &Path) -> Result<Vec<Event>, LogError> {
    parse_log(&fs::read_to_string(path)?)
}

pub fn write_log(path: &Path, events: &[Event]) -> Result<(), LogError> {
    let mut out = String::new();
    for e in events {
        out.push_str(&encode_line(e));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Appends encoded events to `writer`, one line each.
pub fn append_events(writer: &mut impl Write, events: &[Event]) -> io::Result<()> {
    let mut buf = String::new();
    for e in events {
        buf.push_str(&encode_line(e));
        buf.push('\n');
    }
    writer.write_all(buf.as_bytes())
}
