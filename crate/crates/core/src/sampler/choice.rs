use std::fmt;

use rand::Rng;
use serde::de::{self, Deserializer};
use serde::ser::{SerializeSeq, Serializer};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::Prng;

/// One recorded decision.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Choice {
    /// Index into the terminal-only (`leaf`) or nonterminal-bearing
    /// alternative list of `nonterminal`.
    Alt { nonterminal: String, index: u32, leaf: bool },
    /// Number of repetitions of a Kleene group.
    Rep(u32),
    /// Pool index for an identifier-class terminal.
    Ident { class: String, index: u32 },
    /// Whether a nonterminal with both kinds of alternatives took a leaf
    /// expansion.
    Coin(bool),
}

impl Choice {
    /// The numeric payload, used when a recorded value is replayed at a
    /// decision of a different kind.
    pub fn raw(&self) -> u32 {
        match self {
            Choice::Alt { index, .. } => *index,
            Choice::Rep(v) => *v,
            Choice::Ident { index, .. } => *index,
            Choice::Coin(b) => u32::from(*b),
        }
    }
}

/// The decisions made while sampling one input, in order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct ChoiceSequence(pub Vec<Choice>);

impl ChoiceSequence {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Choice> {
        self.0.iter()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("choice sequences always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

impl fmt::Display for ChoiceSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_json())
    }
}

impl Serialize for Choice {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Choice::Alt { nonterminal, index, leaf } => {
                let mut seq = s.serialize_seq(Some(4))?;
                seq.serialize_element("alt")?;
                seq.serialize_element(nonterminal)?;
                seq.serialize_element(index)?;
                seq.serialize_element(leaf)?;
                seq.end()
            }
            Choice::Rep(v) => {
                let mut seq = s.serialize_seq(Some(2))?;
                seq.serialize_element("rep")?;
                seq.serialize_element(v)?;
                seq.end()
            }
            Choice::Ident { class, index } => {
                let mut seq = s.serialize_seq(Some(3))?;
                seq.serialize_element("ident")?;
                seq.serialize_element(class)?;
                seq.serialize_element(index)?;
                seq.end()
            }
            Choice::Coin(b) => {
                let mut seq = s.serialize_seq(Some(2))?;
                seq.serialize_element("coin")?;
                seq.serialize_element(b)?;
                seq.end()
            }
        }
    }
}

impl<'de> Deserialize<'de> for Choice {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let parts = Vec::<Value>::deserialize(d)?;
        let tag = parts
            .first()
            .and_then(Value::as_str)
            .ok_or_else(|| de::Error::custom("choice must start with a tag string"))?;
        let uint = |i: usize| -> Result<u32, D::Error> {
            parts
                .get(i)
                .and_then(Value::as_u64)
                .and_then(|v| u32::try_from(v).ok())
                .ok_or_else(|| de::Error::custom(format!("`{tag}` field {i} must be a u32")))
        };
        let string = |i: usize| -> Result<String, D::Error> {
            parts
                .get(i)
                .and_then(Value::as_str)
                .map(str::to_owned)
                .ok_or_else(|| de::Error::custom(format!("`{tag}` field {i} must be a string")))
        };
        let boolean = |i: usize| -> Result<bool, D::Error> {
            parts
                .get(i)
                .and_then(Value::as_bool)
                .ok_or_else(|| de::Error::custom(format!("`{tag}` field {i} must be a bool")))
        };
        let arity = |n: usize| -> Result<(), D::Error> {
            if parts.len() == n {
                Ok(())
            } else {
                Err(de::Error::custom(format!("`{tag}` takes {} arguments", n - 1)))
            }
        };
        match tag {
            "alt" => {
                arity(4)?;
                Ok(Choice::Alt { nonterminal: string(1)?, index: uint(2)?, leaf: boolean(3)? })
            }
            "rep" => {
                arity(2)?;
                Ok(Choice::Rep(uint(1)?))
            }
            "ident" => {
                arity(3)?;
                Ok(Choice::Ident { class: string(1)?, index: uint(2)? })
            }
            "coin" => {
                arity(2)?;
                Ok(Choice::Coin(boolean(1)?))
            }
            other => Err(de::Error::custom(format!("unknown choice tag `{other}`"))),
        }
    }
}

impl Serialize for ChoiceSequence {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ChoiceSequence {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Vec::<Choice>::deserialize(d).map(ChoiceSequence)
    }
}

/// Where sampling decisions come from.
///
/// A replay source consumes recorded choices in order and falls through
/// to the PRNG once they run out.
pub enum ChoiceSource<'r> {
    Fresh(&'r mut Prng),
    Replay { choices: &'r [Choice], cursor: usize, rng: &'r mut Prng },
}

impl<'r> ChoiceSource<'r> {
    pub fn fresh(rng: &'r mut Prng) -> Self {
        ChoiceSource::Fresh(rng)
    }

    pub fn replay(choices: &'r ChoiceSequence, rng: &'r mut Prng) -> Self {
        ChoiceSource::Replay { choices: &choices.0, cursor: 0, rng }
    }

    fn recorded(&mut self) -> Option<&Choice> {
        match self {
            ChoiceSource::Fresh(_) => None,
            ChoiceSource::Replay { choices, cursor, .. } => {
                let c = choices.get(*cursor)?;
                *cursor += 1;
                Some(c)
            }
        }
    }

    fn rng(&mut self) -> &mut Prng {
        match self {
            ChoiceSource::Fresh(rng) => rng,
            ChoiceSource::Replay { rng, .. } => rng,
        }
    }

    /// A value in `0..range`. Recorded values are reduced modulo `range`.
    pub(crate) fn uniform(&mut self, range: u32) -> u32 {
        debug_assert!(range > 0);
        if let Some(c) = self.recorded() {
            return c.raw() % range;
        }
        self.rng().random_range(0..range)
    }

    /// A coin that lands `true` with probability `(c + 1) / (d + 1)`.
    pub(crate) fn leaf_coin(&mut self, c: u32, d: u32) -> bool {
        let forced = c >= d;
        if let Some(choice) = self.recorded() {
            let outcome = match choice {
                Choice::Coin(b) => *b,
                other => other.raw() % 2 == 1,
            };
            return outcome || forced;
        }
        // Exact integer form of the rational probability.
        self.rng().random_range(0..=d) <= c
    }
}
