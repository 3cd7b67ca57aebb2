use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::sharing::PartyId;

/// One deviation from the honest protocol.
///
/// `TamperOpen`, `WrongEpsilon` and `AbortAt` are applied by the fabric to the
/// party's traffic. The rest change what the party itself computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Behavior {
    Honest,
    /// Add `offset` to opened shares; `at` selects one element by its index
    /// in the sender's stream of `open` and `mul-open` elements.
    TamperOpen { offset: i64, at: Option<u64> },
    /// Like `TamperOpen` but only on `epsilon`/`delta` shares.
    WrongEpsilon { offset: i64, at: Option<u64> },
    /// Add `offset` to the MAC-check value before committing to it.
    TamperMac { offset: i64 },
    /// Add `offset` to output shares before committing to them.
    TamperOutput { offset: i64, at: Option<u64> },
    /// Go silent from this round on.
    AbortAt { round: u64 },
    /// Add `offset` to the `c` share of triple `index`.
    CorruptTriple { index: usize, offset: i64 },
}

impl fmt::Display for Behavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let at = |a: &Option<u64>| a.map(|i| format!("@{i}")).unwrap_or_default();
        match self {
            Behavior::Honest => write!(f, "honest"),
            Behavior::TamperOpen { offset, at: a } => write!(f, "tamper-open:{offset:+}{}", at(a)),
            Behavior::WrongEpsilon { offset, at: a } => write!(f, "wrong-epsilon:{offset:+}{}", at(a)),
            Behavior::TamperMac { offset } => write!(f, "tamper-mac:{offset:+}"),
            Behavior::TamperOutput { offset, at: a } => write!(f, "tamper-output:{offset:+}{}", at(a)),
            Behavior::AbortAt { round } => write!(f, "abort-at:{round}"),
            Behavior::CorruptTriple { index, offset } => write!(f, "corrupt-triple:{index}:{offset:+}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("adversary spec item {item:?}: {reason}")]
pub struct AdversaryParseError {
    pub item: String,
    pub reason: String,
}

/// Corrupted parties and their behaviors. A party may carry several.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AdversarySpec {
    entries: Vec<(PartyId, Behavior)>,
}

impl AdversarySpec {
    pub fn honest() -> Self {
        Self::default()
    }

    pub fn single(party: PartyId, behavior: Behavior) -> Self {
        Self { entries: vec![(party, behavior)] }
    }

    pub fn with(mut self, party: PartyId, behavior: Behavior) -> Self {
        self.entries.push((party, behavior));
        self
    }

    pub fn entries(&self) -> &[(PartyId, Behavior)] {
        &self.entries
    }

    pub fn is_honest(&self) -> bool {
        self.entries.iter().all(|(_, b)| *b == Behavior::Honest)
    }

    pub fn behaviors_of(&self, party: PartyId) -> impl Iterator<Item = &Behavior> {
        self.entries.iter().filter(move |(p, _)| *p == party).map(|(_, b)| b)
    }

    /// Sorted, deduplicated ids of parties with a non-honest behavior.
    pub fn corrupted(&self) -> Vec<PartyId> {
        let mut ids: Vec<PartyId> = self
            .entries
            .iter()
            .filter(|(_, b)| *b != Behavior::Honest)
            .map(|(p, _)| *p)
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn abort_round(&self, party: PartyId) -> Option<u64> {
        self.behaviors_of(party)
            .filter_map(|b| match b {
                Behavior::AbortAt { round } => Some(*round),
                _ => None,
            })
            .min()
    }

    /// Checks party ids against `n` and that at least one party stays honest.
    pub fn validate(&self, n: usize) -> Result<(), String> {
        if let Some((p, _)) = self.entries.iter().find(|(p, _)| *p >= n) {
            return Err(format!("party {p} out of range for {n} parties"));
        }
        let corrupted = self.corrupted().len();
        if corrupted > n.saturating_sub(1) {
            return Err(format!("{corrupted} corrupted parties, at most {} allowed", n - 1));
        }
        Ok(())
    }
}

impl fmt::Display for AdversarySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.entries.iter().map(|(p, b)| format!("{p}:{b}")).collect();
        f.write_str(&parts.join(";"))
    }
}

fn parse_offset(s: &str) -> Result<i64, String> {
    let digits = s.strip_prefix('+').unwrap_or(s);
    digits.parse::<i64>().map_err(|_| format!("bad offset {s:?}"))
}

/// Splits `"+3@7"` into offset and optional element index.
fn parse_offset_at(s: &str) -> Result<(i64, Option<u64>), String> {
    match s.split_once('@') {
        Some((off, at)) => {
            let at = at.parse::<u64>().map_err(|_| format!("bad index {at:?}"))?;
            Ok((parse_offset(off)?, Some(at)))
        }
        None => Ok((parse_offset(s)?, None)),
    }
}

fn parse_behavior(s: &str) -> Result<Behavior, String> {
    let (name, arg) = match s.split_once(':') {
        Some((n, a)) => (n, Some(a)),
        None => (s, None),
    };
    let need = || arg.ok_or_else(|| format!("{name} needs an argument"));
    let b = match name {
        "honest" => Behavior::Honest,
        "tamper-open" => {
            let (offset, at) = parse_offset_at(arg.unwrap_or("+1"))?;
            Behavior::TamperOpen { offset, at }
        }
        "wrong-epsilon" => {
            let (offset, at) = parse_offset_at(arg.unwrap_or("+1"))?;
            Behavior::WrongEpsilon { offset, at }
        }
        "tamper-mac" => Behavior::TamperMac { offset: parse_offset(arg.unwrap_or("+1"))? },
        "tamper-output" => {
            let (offset, at) = parse_offset_at(arg.unwrap_or("+1"))?;
            Behavior::TamperOutput { offset, at }
        }
        "abort-at" => {
            let a = need()?;
            let round = a.parse::<u64>().map_err(|_| format!("bad round {a:?}"))?;
            if round == 0 {
                return Err("rounds are numbered from 1".into());
            }
            Behavior::AbortAt { round }
        }
        "corrupt-triple" => {
            let a = need()?;
            let (idx, off) = match a.split_once(':') {
                Some((i, o)) => (i, parse_offset(o)?),
                None => (a, 1),
            };
            let index = idx.parse::<usize>().map_err(|_| format!("bad triple index {idx:?}"))?;
            Behavior::CorruptTriple { index, offset: off }
        }
        other => return Err(format!("unknown behavior {other:?}")),
    };
    if matches!(b, Behavior::TamperOpen { offset: 0, .. }
        | Behavior::WrongEpsilon { offset: 0, .. }
        | Behavior::TamperMac { offset: 0 }
        | Behavior::TamperOutput { offset: 0, .. }
        | Behavior::CorruptTriple { offset: 0, .. })
    {
        return Err("offset must be nonzero".into());
    }
    Ok(b)
}

/// Syntax: `<party>:<behavior>[:<arg>]` items separated by `;`,
/// e.g. `2:tamper-open:+1;4:abort-at:10`.
impl FromStr for AdversarySpec {
    type Err = AdversaryParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut entries = Vec::new();
        for item in s.split(';').map(str::trim).filter(|i| !i.is_empty()) {
            let err = |reason: String| AdversaryParseError { item: item.to_string(), reason };
            let (party, rest) = item.split_once(':').ok_or_else(|| err("missing party id".into()))?;
            let party = party.trim().parse::<PartyId>().map_err(|_| err(format!("bad party id {party:?}")))?;
            entries.push((party, parse_behavior(rest.trim()).map_err(err)?));
        }
        Ok(Self { entries })
    }
}
