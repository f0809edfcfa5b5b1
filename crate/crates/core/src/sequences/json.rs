//! JSON wire format `{"J": n, "levels": [{"j", "theta", "n", "start"}, ...]}`.
//!
//! Counts and starts are JSON integers while they fit in `u64` and decimal
//! strings beyond that (deep levels need up to `J` bits).

use std::str::FromStr;

use num_bigint::BigUint;
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{BlockSequence, Level};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BigCount(pub BigUint);

impl Serialize for BigCount {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match u64::try_from(&self.0) {
            Ok(v) => s.serialize_u64(v),
            Err(_) => s.serialize_str(&self.0.to_str_radix(10)),
        }
    }
}

impl<'de> Deserialize<'de> for BigCount {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct CountVisitor;
        impl Visitor<'_> for CountVisitor {
            type Value = BigCount;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a nonnegative integer or a decimal string")
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<BigCount, E> {
                Ok(BigCount(BigUint::from(v)))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<BigCount, E> {
                u64::try_from(v)
                    .map(|v| BigCount(BigUint::from(v)))
                    .map_err(|_| E::custom(format!("negative count {v}")))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<BigCount, E> {
                BigUint::from_str(v).map(BigCount).map_err(E::custom)
            }
        }
        d.deserialize_any(CountVisitor)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelJson {
    pub j: u64,
    pub theta: f64,
    pub n: BigCount,
    pub start: BigCount,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockSequenceJson {
    #[serde(rename = "J")]
    pub depth: u64,
    pub levels: Vec<LevelJson>,
}

impl From<&BlockSequence> for BlockSequenceJson {
    fn from(b: &BlockSequence) -> Self {
        Self {
            depth: b.depth(),
            levels: b
                .levels()
                .iter()
                .enumerate()
                .map(|(j, l)| LevelJson {
                    j: j as u64,
                    theta: l.theta,
                    n: BigCount(l.on_count.clone()),
                    start: BigCount(l.start.clone()),
                })
                .collect(),
        }
    }
}

impl TryFrom<BlockSequenceJson> for BlockSequence {
    type Error = Error;

    fn try_from(doc: BlockSequenceJson) -> Result<Self> {
        if doc.levels.len() as u64 != doc.depth + 1 {
            return Err(Error::MalformedBlocks(format!(
                "J = {} but {} levels present",
                doc.depth,
                doc.levels.len()
            )));
        }
        let mut levels = Vec::with_capacity(doc.levels.len());
        for (idx, l) in doc.levels.into_iter().enumerate() {
            if l.j != idx as u64 {
                return Err(Error::MalformedBlocks(format!(
                    "level entry {idx} is labelled j = {}",
                    l.j
                )));
            }
            levels.push(Level::new(l.theta, l.n.0, l.start.0));
        }
        BlockSequence::from_levels(levels)
    }
}

impl BlockSequence {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&BlockSequenceJson::from(
            self,
        ))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: BlockSequenceJson = serde_json::from_str(text)?;
        doc.try_into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Params;
    use crate::psi::PsiDescriptor;
    use crate::sequences::build_rearranged;

    #[test]
    fn deep_sequences_survive_a_round_trip() {
        let params = Params::new(2, 1, 1.0, 2.0, 1.5, 2, Some(0.25));
        let b = build_rearranged(&PsiDescriptor::log_power(0.4), &params, 150).unwrap();
        let text = b.to_json().unwrap();
        assert!(text.contains("\"J\": 150"));
        assert_eq!(BlockSequence::from_json(&text).unwrap(), b);
    }

    #[test]
    fn small_counts_are_numbers() {
        let v: serde_json::Value = serde_json::to_value(BigCount(BigUint::from(7u8))).unwrap();
        assert_eq!(v, serde_json::json!(7));
        let big = BigCount(BigUint::from(1u8) << 80u8);
        let v = serde_json::to_value(&big).unwrap();
        assert!(v.is_string());
        assert_eq!(serde_json::from_value::<BigCount>(v).unwrap(), big);
    }

    #[test]
    fn inconsistent_documents_rejected() {
        let text = r#"{"J": 1, "levels": [{"j": 0, "theta": 0.0, "n": 0, "start": 0}]}"#;
        assert!(BlockSequence::from_json(text).is_err());
        let text = r#"{"J": 1, "levels": [{"j": 0, "theta": 0.0, "n": 0, "start": 0},
                                          {"j": 1, "theta": 1.0, "n": 3, "start": 0}]}"#;
        assert!(BlockSequence::from_json(text).is_err());
        let text = r#"{"J": 0, "levels": [{"j": 0, "theta": 0.0, "n": -1, "start": 0}]}"#;
        assert!(BlockSequence::from_json(text).is_err());
    }
}
