//! Serializes `Vec<f64>` with infinities written as the strings `"inf"` / `"-inf"`,
//! since JSON has no literal for them.

use serde::de::{self, Deserializer, SeqAccess, Visitor};
use serde::ser::{SerializeSeq, Serializer};
use serde::Deserialize;

pub fn serialize<S: Serializer>(values: &[f64], serializer: S) -> Result<S::Ok, S::Error> {
    let mut seq = serializer.serialize_seq(Some(values.len()))?;
    for v in values {
        if *v == f64::INFINITY {
            seq.serialize_element("inf")?;
        } else if *v == f64::NEG_INFINITY {
            seq.serialize_element("-inf")?;
        } else if v.is_nan() {
            seq.serialize_element("nan")?;
        } else {
            seq.serialize_element(v)?;
        }
    }
    seq.end()
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Entry {
    Number(f64),
    Text(String),
}

pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Vec<f64>, D::Error> {
    struct EntriesVisitor;

    impl<'de> Visitor<'de> for EntriesVisitor {
        type Value = Vec<f64>;

        fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
            f.write_str("a list of numbers or \"inf\"")
        }

        fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Vec<f64>, A::Error> {
            let mut out = Vec::with_capacity(seq.size_hint().unwrap_or(0));
            while let Some(entry) = seq.next_element::<Entry>()? {
                out.push(match entry {
                    Entry::Number(x) => x,
                    Entry::Text(s) => match s.to_ascii_lowercase().as_str() {
                        "inf" | "infinity" | "+inf" => f64::INFINITY,
                        "-inf" | "-infinity" => f64::NEG_INFINITY,
                        "nan" => f64::NAN,
                        _ => return Err(de::Error::custom(format!("invalid number '{s}'"))),
                    },
                });
            }
            Ok(out)
        }
    }

    deserializer.deserialize_seq(EntriesVisitor)
}
