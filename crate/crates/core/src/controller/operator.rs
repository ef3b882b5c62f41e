use std::fmt;
use std::io::{BufRead, Write};

use super::ControllerError;

/// Instruction shown to the person handling the devices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    TurnOn(String),
    TurnOff(String),
}

impl Action {
    pub fn device_id(&self) -> &str {
        match self {
            Action::TurnOn(id) | Action::TurnOff(id) => id,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::TurnOn(id) => write!(f, "turn ON device {id}"),
            Action::TurnOff(id) => write!(f, "turn OFF device {id}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reply {
    Confirmed,
    Skipped,
}

impl Reply {
    fn parse(word: &str) -> Option<Self> {
        match word.trim().to_ascii_lowercase().as_str() {
            "y" | "yes" | "ok" | "confirm" | "confirmed" => Some(Reply::Confirmed),
            "n" | "no" | "skip" | "skipped" => Some(Reply::Skipped),
            _ => None,
        }
    }

    fn word(self) -> &'static str {
        match self {
            Reply::Confirmed => "confirm",
            Reply::Skipped => "skip",
        }
    }
}

pub trait Operator {
    /// Exactly one reply per prompt.
    fn prompt(&mut self, action: &Action) -> Result<Reply, ControllerError>;
}

/// Confirms everything immediately.
#[derive(Debug, Default, Clone, Copy)]
pub struct AutoConfirm;

impl Operator for AutoConfirm {
    fn prompt(&mut self, _: &Action) -> Result<Reply, ControllerError> {
        Ok(Reply::Confirmed)
    }
}

/// Replays a reply transcript, one `confirm`/`skip` (or `y`/`n`) per line.
#[derive(Debug, Clone)]
pub struct ScriptedOperator {
    replies: std::vec::IntoIter<Reply>,
}

impl ScriptedOperator {
    pub fn new(replies: Vec<Reply>) -> Self {
        Self {
            replies: replies.into_iter(),
        }
    }

    pub fn parse(script: &str) -> Result<Self, ControllerError> {
        let mut replies = Vec::new();
        for (n, line) in script.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            // allow `<anything> confirm` so transcripts can carry the action
            let word = line.rsplit(char::is_whitespace).next().unwrap_or(line);
            let reply = Reply::parse(word)
                .ok_or_else(|| ControllerError::Operator(format!("script line {}: unknown reply {line:?}", n + 1)))?;
            replies.push(reply);
        }
        Ok(Self::new(replies))
    }
}

impl Operator for ScriptedOperator {
    fn prompt(&mut self, action: &Action) -> Result<Reply, ControllerError> {
        self.replies
            .next()
            .ok_or_else(|| ControllerError::Operator(format!("reply script exhausted at prompt: {action}")))
    }
}

/// Terminal prompt: shows the action, reads `y`/`n` until one parses.
pub struct InteractiveOperator<R, W> {
    input: R,
    output: W,
}

impl<R: BufRead, W: Write> InteractiveOperator<R, W> {
    pub fn new(input: R, output: W) -> Self {
        Self { input, output }
    }
}

impl<R: BufRead, W: Write> Operator for InteractiveOperator<R, W> {
    fn prompt(&mut self, action: &Action) -> Result<Reply, ControllerError> {
        loop {
            write!(self.output, "{action}, then confirm [y/n]: ")?;
            self.output.flush()?;
            let mut line = String::new();
            if self.input.read_line(&mut line)? == 0 {
                return Err(ControllerError::Operator("input closed while awaiting a reply".into()));
            }
            if let Some(reply) = Reply::parse(&line) {
                return Ok(reply);
            }
            writeln!(self.output, "please answer y or n")?;
        }
    }
}

/// Wraps another operator and keeps a replayable transcript of its replies.
pub struct Recording<O> {
    inner: O,
    transcript: Vec<(Action, Reply)>,
}

impl<O: Operator> Recording<O> {
    pub fn new(inner: O) -> Self {
        Self {
            inner,
            transcript: Vec::new(),
        }
    }

    pub fn transcript(&self) -> &[(Action, Reply)] {
        &self.transcript
    }

    /// Lines accepted by [`ScriptedOperator::parse`].
    pub fn transcript_text(&self) -> String {
        self.transcript
            .iter()
            .map(|(a, r)| format!("# {a}\n{}\n", r.word()))
            .collect()
    }
}

impl<O: Operator> Operator for Recording<O> {
    fn prompt(&mut self, action: &Action) -> Result<Reply, ControllerError> {
        let reply = self.inner.prompt(action)?;
        self.transcript.push((action.clone(), reply));
        Ok(reply)
    }
}

impl<O: Operator + ?Sized> Operator for &mut O {
    fn prompt(&mut self, action: &Action) -> Result<Reply, ControllerError> {
        (**self).prompt(action)
    }
}
