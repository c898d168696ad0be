//! Recipient resolution for chat messages.
//!
//! Directed chat trust needs to know whom each message was addressed to. The
//! default [`HeuristicResolver`] applies, in order:
//!
//! 1. explicit nickname mention: weight split evenly over the mentioned members;
//! 2. reply adjacency: the sender of the most recent message in the context
//!    window written by someone else;
//! 3. broadcast: uniform over every other member.
//!
//! [`ExternalResolver`] forwards each request to a child process speaking
//! line-delimited JSON, so a learned model can be wired in without touching
//! the rest of the pipeline.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::domain::{ChatMessage, MemberId, Millis, Roster};
use crate::sentiment::tokenize;

pub const DEFAULT_CONTEXT_WINDOW: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextMessage {
    pub sender: MemberId,
    pub text: String,
    pub at: Millis,
}

impl From<&ChatMessage> for ContextMessage {
    fn from(m: &ChatMessage) -> Self {
        Self {
            sender: m.sender.clone(),
            text: m.text.clone(),
            at: m.at,
        }
    }
}

/// The previous `capacity` messages, oldest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogueContext {
    capacity: usize,
    messages: VecDeque<ContextMessage>,
}

impl DialogueContext {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            messages: VecDeque::with_capacity(capacity),
        }
    }

    pub fn push(&mut self, message: ContextMessage) {
        if self.capacity == 0 {
            return;
        }
        if self.messages.len() == self.capacity {
            self.messages.pop_front();
        }
        self.messages.push_back(message);
    }

    pub fn messages(&self) -> impl DoubleEndedIterator<Item = &ContextMessage> {
        self.messages.iter()
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }
}

impl Default for DialogueContext {
    fn default() -> Self {
        Self::new(DEFAULT_CONTEXT_WINDOW)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecipientAssignment {
    pub message: u64,
    /// Non-negative, sums to 1, never contains the sender. Empty for a
    /// single-member group.
    pub weights: BTreeMap<MemberId, f64>,
}

impl RecipientAssignment {
    fn uniform(message: u64, targets: impl IntoIterator<Item = MemberId>) -> Self {
        let targets: Vec<MemberId> = targets.into_iter().collect();
        let w = 1.0 / targets.len().max(1) as f64;
        Self {
            message,
            weights: targets.into_iter().map(|m| (m, w)).collect(),
        }
    }

    pub fn total(&self) -> f64 {
        self.weights.values().sum()
    }
}

pub trait RecipientResolver: Send + Sync {
    fn name(&self) -> &str;
    fn resolve(&self, message: &ChatMessage, ctx: &DialogueContext, group: &Roster) -> RecipientAssignment;
}

fn others<'a>(group: &'a Roster, sender: &'a MemberId) -> impl Iterator<Item = MemberId> + 'a {
    group.members().filter(move |m| *m != sender).cloned()
}

fn contains_run(haystack: &[String], needle: &[String]) -> bool {
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w == needle)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct HeuristicResolver;

impl HeuristicResolver {
    /// Other members whose nickname appears as a whole-word run in the text.
    pub fn mentioned(&self, message: &ChatMessage, group: &Roster) -> BTreeSet<MemberId> {
        let tokens = tokenize(&message.text);
        group
            .iter()
            .filter(|(m, _)| **m != message.sender)
            .filter(|(_, nick)| contains_run(&tokens, &tokenize(nick)))
            .map(|(m, _)| m.clone())
            .collect()
    }
}

impl RecipientResolver for HeuristicResolver {
    fn name(&self) -> &str {
        "heuristic"
    }

    fn resolve(&self, message: &ChatMessage, ctx: &DialogueContext, group: &Roster) -> RecipientAssignment {
        let mentioned = self.mentioned(message, group);
        if !mentioned.is_empty() {
            return RecipientAssignment::uniform(message.id, mentioned);
        }
        let reply_to = ctx
            .messages()
            .rev()
            .find(|c| c.sender != message.sender && group.contains(&c.sender));
        if let Some(prev) = reply_to {
            return RecipientAssignment::uniform(message.id, [prev.sender.clone()]);
        }
        RecipientAssignment::uniform(message.id, others(group, &message.sender))
    }
}

/// Every message goes to everyone else in equal parts.
#[derive(Debug, Clone, Copy, Default)]
pub struct BroadcastResolver;

impl RecipientResolver for BroadcastResolver {
    fn name(&self) -> &str {
        "broadcast"
    }

    fn resolve(&self, message: &ChatMessage, _ctx: &DialogueContext, group: &Roster) -> RecipientAssignment {
        RecipientAssignment::uniform(message.id, others(group, &message.sender))
    }
}

/// Request line sent to an external resolver process.
#[derive(Debug, Serialize)]
pub struct ResolverRequest<'a> {
    pub message: &'a ChatMessage,
    pub context: Vec<&'a ContextMessage>,
    pub members: Vec<&'a MemberId>,
}

/// Response line expected back: same schema as [`RecipientAssignment::weights`].
#[derive(Debug, Serialize, Deserialize)]
pub struct ResolverResponse {
    pub weights: BTreeMap<MemberId, f64>,
}

struct ChildIo {
    _child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

/// Delegates to a child process; falls back to the heuristic when the
/// process fails or answers with an unusable weight map.
pub struct ExternalResolver {
    io: Mutex<Option<ChildIo>>,
    fallback: HeuristicResolver,
}

impl ExternalResolver {
    pub fn spawn(command: &[String]) -> std::io::Result<Self> {
        let (program, args) = command
            .split_first()
            .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidInput, "empty resolver command"))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(Self {
            io: Mutex::new(Some(ChildIo {
                _child: child,
                stdin,
                stdout,
            })),
            fallback: HeuristicResolver,
        })
    }

    fn ask(&self, message: &ChatMessage, ctx: &DialogueContext, group: &Roster) -> Option<BTreeMap<MemberId, f64>> {
        let mut guard = self.io.lock().unwrap_or_else(|e| e.into_inner());
        let io = guard.as_mut()?;
        let request = ResolverRequest {
            message,
            context: ctx.messages().collect(),
            members: group.members().collect(),
        };
        let mut line = serde_json::to_string(&request).ok()?;
        line.push('\n');
        let exchange = (|| {
            io.stdin.write_all(line.as_bytes())?;
            io.stdin.flush()?;
            let mut reply = String::new();
            if io.stdout.read_line(&mut reply)? == 0 {
                return Err(std::io::Error::new(
                    std::io::ErrorKind::UnexpectedEof,
                    "resolver exited",
                ));
            }
            Ok(reply)
        })();
        match exchange {
            Ok(reply) => serde_json::from_str::<ResolverResponse>(&reply).ok().map(|r| r.weights),
            Err(_) => {
                *guard = None;
                None
            }
        }
    }
}

impl RecipientResolver for ExternalResolver {
    fn name(&self) -> &str {
        "external"
    }

    fn resolve(&self, message: &ChatMessage, ctx: &DialogueContext, group: &Roster) -> RecipientAssignment {
        if let Some(weights) = self.ask(message, ctx, group) {
            if let Some(a) = sanitize(message, group, weights) {
                return a;
            }
        }
        self.fallback.resolve(message, ctx, group)
    }
}

fn sanitize(message: &ChatMessage, group: &Roster, weights: BTreeMap<MemberId, f64>) -> Option<RecipientAssignment> {
    let mut kept = BTreeMap::new();
    for (m, w) in weights {
        if m == message.sender || !group.contains(&m) || !w.is_finite() || w < 0.0 {
            return None;
        }
        if w > 0.0 {
            kept.insert(m, w);
        }
    }
    let total: f64 = kept.values().sum();
    if total <= 0.0 {
        return None;
    }
    kept.values_mut().for_each(|w| *w /= total);
    Some(RecipientAssignment {
        message: message.id,
        weights: kept,
    })
}
