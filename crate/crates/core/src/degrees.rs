//! Serde adapter: radians in memory, degrees on disk.

use serde::{Deserialize, Deserializer, Serializer};

pub fn serialize<S: Serializer>(rad: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(rad.to_degrees())
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    f64::deserialize(d).map(f64::to_radians)
}
