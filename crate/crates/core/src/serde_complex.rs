//! `Complex64` as `[re, im]` pairs on the wire.

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serializer};

pub fn serialize_vec<S: Serializer>(zs: &[Complex64], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(zs.iter().map(|z| [z.re, z.im]))
}

pub fn deserialize_vec<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Complex64>, D::Error> {
    let pairs = Vec::<[f64; 2]>::deserialize(d)?;
    Ok(pairs.into_iter().map(|[re, im]| Complex64::new(re, im)).collect())
}

/// For `Vec<Complex64>` fields: `#[serde(with = "crate::serde_complex::vec")]`.
pub mod vec {
    pub use super::{deserialize_vec as deserialize, serialize_vec as serialize};
}
