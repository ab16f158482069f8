//! Canonical JSON output helpers.
//!
//! Documents are pretty-printed with two-space indentation, LF line endings
//! and a trailing newline. Floating-point fields that feed numeric pipelines
//! go through [`f17`], which renders every value with 17 significant digits
//! so the text round-trips to the identical `f64`.

use serde::Serialize;
use serde_json::value::RawValue;

/// Renders `x` with 17 significant digits in scientific notation.
pub fn format_f17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Pretty JSON with a trailing newline.
pub fn to_canonical_string<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn raw(x: f64) -> Result<Box<RawValue>, String> {
    if !x.is_finite() {
        return Err(format!("cannot serialize non-finite value {x}"));
    }
    RawValue::from_string(format_f17(x)).map_err(|e| e.to_string())
}

/// `serialize_with` adapters for 17-significant-digit floats.
pub mod f17 {
    use super::raw;
    use serde::ser::{Error, SerializeSeq};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        serde::Serialize::serialize(&raw(*x).map_err(S::Error::custom)?, s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        f64::deserialize(d)
    }

    pub mod vec {
        use super::*;

        pub fn serialize<S: Serializer>(xs: &[f64], s: S) -> Result<S::Ok, S::Error> {
            let mut seq = s.serialize_seq(Some(xs.len()))?;
            for &x in xs {
                seq.serialize_element(&raw(x).map_err(S::Error::custom)?)?;
            }
            seq.end()
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
            Vec::<f64>::deserialize(d)
        }
    }

    pub mod matrix {
        use super::*;

        struct Row<'a>(&'a [f64]);

        impl serde::Serialize for Row<'_> {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                super::vec::serialize(self.0, s)
            }
        }

        pub fn serialize<S: Serializer>(rows: &[Vec<f64>], s: S) -> Result<S::Ok, S::Error> {
            let mut seq = s.serialize_seq(Some(rows.len()))?;
            for row in rows {
                seq.serialize_element(&Row(row))?;
            }
            seq.end()
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<f64>>, D::Error> {
            Vec::<Vec<f64>>::deserialize(d)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use serde::Deserialize;

    #[derive(Serialize, Deserialize, PartialEq, Debug)]
    struct Doc {
        #[serde(with = "f17")]
        x: f64,
        #[serde(with = "f17::vec")]
        xs: Vec<f64>,
    }

    #[test]
    fn renders_seventeen_digits() {
        assert_eq!(format_f17(1.0), "1.0000000000000000e0");
        assert_eq!(format_f17(-0.25), "-2.5000000000000000e-1");
        let doc = Doc { x: 0.1, xs: vec![2.0] };
        let text = serde_json::to_string(&doc).unwrap();
        assert_eq!(text, r#"{"x":1.0000000000000001e-1,"xs":[2.0000000000000000e0]}"#);
    }

    #[test]
    fn non_finite_is_an_error() {
        let doc = Doc { x: f64::NAN, xs: vec![] };
        assert!(serde_json::to_string(&doc).is_err());
    }

    proptest! {
        #[test]
        fn f17_round_trips(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            let doc = Doc { x, xs: vec![x, -x] };
            let back: Doc = serde_json::from_str(&to_canonical_string(&doc).unwrap()).unwrap();
            prop_assert_eq!(back.x.to_bits(), x.to_bits());
            prop_assert_eq!(back.xs[1].to_bits(), (-x).to_bits());
        }
    }
}
