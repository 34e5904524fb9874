//! JSON output documents.
//!
//! Fields are written in declaration order and every float with 17
//! significant digits, so equal runs give equal bytes and every document
//! reloads to an equal value.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{CliError, CliResult};

/// Pretty printing with floats in `{:.16e}`.
struct ExactFloats(PrettyFormatter<'static>);

impl Formatter for ExactFloats {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Serializes `value`; non-finite floats are rejected.
pub fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    // serde_json would silently write them as null
    value.serialize(finite::Check).map_err(|e| CliError::Output(e.0))?;
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, ExactFloats(PrettyFormatter::new()));
    value.serialize(&mut ser).map_err(|e| CliError::Output(e.to_string()))?;
    out.push(b'\n');
    Ok(String::from_utf8(out).expect("serde_json emits UTF-8"))
}

mod finite {
    //! A serializer that only walks a value looking for NaN or infinity.

    use std::fmt::Display;

    use serde::ser::{self, Serialize};

    #[derive(Debug)]
    pub struct NonFinite(pub String);

    impl Display for NonFinite {
        fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
            f.write_str(&self.0)
        }
    }

    impl std::error::Error for NonFinite {}

    impl ser::Error for NonFinite {
        fn custom<M: Display>(msg: M) -> Self {
            Self(msg.to_string())
        }
    }

    pub struct Check;

    type R = Result<(), NonFinite>;

    fn float(v: f64) -> R {
        if v.is_finite() {
            Ok(())
        } else {
            Err(NonFinite(format!("JSON cannot carry the non-finite number {v}")))
        }
    }

    macro_rules! accept {
        ($($name:ident: $ty:ty),*) => {
            $(fn $name(self, _: $ty) -> R { Ok(()) })*
        };
    }

    impl ser::Serializer for Check {
        type Ok = ();
        type Error = NonFinite;
        type SerializeSeq = Self;
        type SerializeTuple = Self;
        type SerializeTupleStruct = Self;
        type SerializeTupleVariant = Self;
        type SerializeMap = Self;
        type SerializeStruct = Self;
        type SerializeStructVariant = Self;

        accept!(serialize_bool: bool, serialize_i8: i8, serialize_i16: i16, serialize_i32: i32, serialize_i64: i64,
            serialize_u8: u8, serialize_u16: u16, serialize_u32: u32, serialize_u64: u64, serialize_char: char,
            serialize_str: &str, serialize_bytes: &[u8], serialize_unit_struct: &'static str);

        fn serialize_f32(self, v: f32) -> R {
            float(v.into())
        }
        fn serialize_f64(self, v: f64) -> R {
            float(v)
        }
        fn serialize_none(self) -> R {
            Ok(())
        }
        fn serialize_some<T: ?Sized + Serialize>(self, v: &T) -> R {
            v.serialize(self)
        }
        fn serialize_unit(self) -> R {
            Ok(())
        }
        fn serialize_unit_variant(self, _: &'static str, _: u32, _: &'static str) -> R {
            Ok(())
        }
        fn serialize_newtype_struct<T: ?Sized + Serialize>(self, _: &'static str, v: &T) -> R {
            v.serialize(self)
        }
        fn serialize_newtype_variant<T: ?Sized + Serialize>(self, _: &'static str, _: u32, _: &'static str, v: &T) -> R {
            v.serialize(self)
        }
        fn serialize_seq(self, _: Option<usize>) -> Result<Self, NonFinite> {
            Ok(self)
        }
        fn serialize_tuple(self, _: usize) -> Result<Self, NonFinite> {
            Ok(self)
        }
        fn serialize_tuple_struct(self, _: &'static str, _: usize) -> Result<Self, NonFinite> {
            Ok(self)
        }
        fn serialize_tuple_variant(self, _: &'static str, _: u32, _: &'static str, _: usize) -> Result<Self, NonFinite> {
            Ok(self)
        }
        fn serialize_map(self, _: Option<usize>) -> Result<Self, NonFinite> {
            Ok(self)
        }
        fn serialize_struct(self, _: &'static str, _: usize) -> Result<Self, NonFinite> {
            Ok(self)
        }
        fn serialize_struct_variant(self, _: &'static str, _: u32, _: &'static str, _: usize) -> Result<Self, NonFinite> {
            Ok(self)
        }
    }

    macro_rules! compound {
        ($($tr:ident :: $f:ident ($($key:ty),*)),*) => {
            $(impl ser::$tr for Check {
                type Ok = ();
                type Error = NonFinite;
                fn $f<T: ?Sized + Serialize>(&mut self, $(_: $key,)* v: &T) -> R {
                    v.serialize(Check)
                }
                fn end(self) -> R {
                    Ok(())
                }
            })*
        };
    }

    compound!(
        SerializeSeq::serialize_element(),
        SerializeTuple::serialize_element(),
        SerializeTupleStruct::serialize_field(),
        SerializeTupleVariant::serialize_field(),
        SerializeStruct::serialize_field(&'static str),
        SerializeStructVariant::serialize_field(&'static str)
    );

    impl ser::SerializeMap for Check {
        type Ok = ();
        type Error = NonFinite;
        fn serialize_key<T: ?Sized + Serialize>(&mut self, k: &T) -> R {
            k.serialize(Check)
        }
        fn serialize_value<T: ?Sized + Serialize>(&mut self, v: &T) -> R {
            v.serialize(Check)
        }
        fn end(self) -> R {
            Ok(())
        }
    }
}

pub fn save<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    fs::write(path, to_json(value)?).map_err(|e| CliError::io(path, e))
}

pub fn load<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::BadDocument {
        path: path.into(),
        detail: e.to_string(),
    })
}

/// Quantization of one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRecord {
    pub label: usize,
    /// `K` rows of dimension `d`.
    pub centroids: Vec<Vec<f64>>,
    /// Update counts `v_k`.
    pub counts: Vec<f64>,
    /// `v_k / sum_j v_j`.
    pub weights: Vec<f64>,
    /// `sqrt(K) sqrt(v_k / sum_j v_j)`.
    pub variance_reduced_weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistillSettings {
    pub ipc: usize,
    pub schedule: String,
    pub batch_size: usize,
    pub iterations: usize,
    /// Harmonic step parameters `gamma_i = a / (b + i)`; unused by the
    /// count-reciprocal schedule.
    pub harmonic_a: f64,
    pub harmonic_b: f64,
    pub init: String,
    /// Tolerance on the unit sum of the normalized weights.
    pub weight_sum_tolerance: f64,
    pub sub_seed: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistillationOutput {
    pub kind: String,
    pub version: u32,
    pub seed: u64,
    pub latents: String,
    pub labels: String,
    pub dim: usize,
    pub settings: DistillSettings,
    pub classes: Vec<ClassRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdeSettings {
    pub kind: String,
    pub horizon: f64,
    pub delta: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRecord {
    pub label: usize,
    pub lhs: f64,
    /// `C L W2`; absent when it overflows.
    pub rhs: Option<f64>,
    pub mc_stderr: f64,
    /// `lhs / rhs`; absent when `rhs = 0 < lhs`.
    pub ratio: Option<f64>,
    pub pass: bool,
    pub w2: f64,
    /// Absent when it overflows.
    pub constant: Option<f64>,
    pub lipschitz: f64,
    pub k: usize,
    pub n_mc: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionOutput {
    pub kind: String,
    pub version: u32,
    pub seed: u64,
    pub distilled: String,
    pub reference: String,
    pub labels: String,
    pub dim: usize,
    pub sde: SdeSettings,
    pub n_mc: usize,
    pub test_function: String,
    pub sub_seed: String,
    /// Transported atoms with the weights of the input quantization.
    pub classes: Vec<ClassRecord>,
    pub bounds: Vec<BoundRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutput {
    pub kind: String,
    pub version: u32,
    pub seed: u64,
    pub distilled: String,
    pub weights: String,
    pub architecture: String,
    pub hidden: usize,
    pub lr: f64,
    pub epochs: usize,
    pub loss_mode: String,
    pub n_samples: usize,
    pub final_loss: f64,
    pub stalled: bool,
    pub train_accuracy: f64,
    pub eval_accuracy: Option<f64>,
    pub parameters: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct W2Output {
    pub kind: String,
    pub version: u32,
    pub mu: String,
    pub nu: String,
    pub w2: f64,
    pub dual_bound: f64,
    pub pivots: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateScanOutput {
    pub kind: String,
    pub version: u32,
    pub seed: u64,
    pub dim: usize,
    pub samples: usize,
    pub restarts: usize,
    pub levels: Vec<usize>,
    pub errors: Vec<f64>,
    pub fitted_slope: f64,
    pub target_slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutput {
    pub claim: String,
    pub property: String,
    pub measured: f64,
    pub target: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOutput {
    pub kind: String,
    pub version: u32,
    pub suite: String,
    pub seed: u64,
    pub passed: usize,
    pub failed: usize,
    pub records: Vec<CheckOutput>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_reload_bit_for_bit() {
        let xs = vec![0.1, 1.0 / 3.0, -2.5e-300, f64::MAX, f64::MIN_POSITIVE, 5e-324, -0.0, 1e22];
        let back: Vec<f64> = serde_json::from_str(&to_json(&xs).unwrap()).unwrap();
        assert_eq!(xs.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), back.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn non_finite_floats_are_rejected() {
        for x in [f64::NAN, f64::INFINITY, f64::NEG_INFINITY] {
            assert!(matches!(to_json(&vec![1.0, x]), Err(CliError::Output(_))));
        }
    }

    #[test]
    fn malformed_documents_are_bad_documents() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.json");
        fs::write(&path, "{\"kind\": ").unwrap();
        assert!(matches!(load::<W2Output>(&path), Err(CliError::BadDocument { .. })));
    }
}
