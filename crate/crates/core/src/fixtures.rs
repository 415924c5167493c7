//! Provenance-tagged reference records stored as JSON.
//!
//! Each record carries the parameters it was computed for, the argument
//! (`z` in the plane or `x` on the cut with a side), the value and a
//! provenance string naming the route that produced it.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use std::path::{Path, PathBuf};

use crate::error::{CrownError, Result};
use crate::hyp2f1::CutSide;
use crate::Complex64;

/// Environment variable overriding the fixture directory.
pub const FIXTURE_ENV: &str = "CROWNWAVE_FIXTURES";
/// File holding all records.
pub const FIXTURE_FILE: &str = "fixtures.json";
pub const SCHEMA_VERSION: u32 = 1;

/// Serde adapter writing complex numbers as `{"re": .., "im": ..}`.
pub mod reim {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::Complex64;

    #[derive(Serialize, Deserialize)]
    struct ReIm {
        re: f64,
        im: f64,
    }

    pub fn serialize<S: Serializer>(z: &Complex64, s: S) -> Result<S::Ok, S::Error> {
        ReIm { re: z.re, im: z.im }.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Complex64, D::Error> {
        let ReIm { re, im } = ReIm::deserialize(d)?;
        Ok(Complex64::new(re, im))
    }

    pub mod option {
        use super::*;

        pub fn serialize<S: Serializer>(z: &Option<Complex64>, s: S) -> Result<S::Ok, S::Error> {
            z.map(|z| ReIm { re: z.re, im: z.im }).serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Complex64>, D::Error> {
            Ok(Option::<ReIm>::deserialize(d)?.map(|ReIm { re, im }| Complex64::new(re, im)))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureRecord {
    pub id: String,
    pub kind: String,
    #[serde(default)]
    pub params: Map<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "reim::option")]
    pub z: Option<Complex64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side: Option<CutSide>,
    #[serde(with = "reim")]
    pub value: Complex64,
    #[serde(default)]
    pub provenance: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl FixtureRecord {
    pub fn new(id: impl Into<String>, kind: impl Into<String>, value: Complex64, provenance: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            kind: kind.into(),
            params: Map::new(),
            z: None,
            x: None,
            side: None,
            value,
            provenance: provenance.into(),
            note: None,
        }
    }

    pub fn param(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }

    pub fn at_z(mut self, z: Complex64) -> Self {
        self.z = Some(z);
        self
    }

    pub fn at_x(mut self, x: f64, side: Option<CutSide>) -> Self {
        self.x = Some(x);
        self.side = side;
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn value(&self) -> Complex64 {
        self.value
    }

    pub fn z(&self) -> Option<Complex64> {
        self.z
    }

    pub fn param_f64(&self, key: &str) -> Result<f64> {
        self.params
            .get(key)
            .and_then(Value::as_f64)
            .ok_or_else(|| CrownError::Fixture(format!("record {} lacks numeric parameter '{key}'", self.id)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureSet {
    pub schema: u32,
    pub records: Vec<FixtureRecord>,
}

impl Default for FixtureSet {
    fn default() -> Self {
        Self {
            schema: SCHEMA_VERSION,
            records: Vec::new(),
        }
    }
}

impl FixtureSet {
    pub fn push(&mut self, r: FixtureRecord) {
        self.records.push(r);
    }

    pub fn of_kind<'a>(&'a self, kind: &'a str) -> impl Iterator<Item = &'a FixtureRecord> + 'a {
        self.records.iter().filter(move |r| r.kind == kind)
    }

    pub fn get(&self, id: &str) -> Option<&FixtureRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    /// Ids of records with an empty provenance tag.
    pub fn missing_provenance(&self) -> Vec<String> {
        self.records
            .iter()
            .filter(|r| r.provenance.trim().is_empty())
            .map(|r| r.id.clone())
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| CrownError::Fixture(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let set: Self = serde_json::from_str(text).map_err(|e| CrownError::Fixture(e.to_string()))?;
        if set.schema != SCHEMA_VERSION {
            return Err(CrownError::Fixture(format!("unsupported schema {}", set.schema)));
        }
        Ok(set)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(FIXTURE_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| CrownError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir).map_err(|e| CrownError::Io(format!("{}: {e}", dir.display())))?;
        let path = dir.join(FIXTURE_FILE);
        std::fs::write(&path, self.to_json()? + "\n").map_err(|e| CrownError::Io(format!("{}: {e}", path.display())))?;
        Ok(path)
    }
}

/// `$CROWNWAVE_FIXTURES` if set, otherwise the directory shipped with the crate.
pub fn fixture_dir() -> PathBuf {
    match std::env::var_os(FIXTURE_ENV) {
        Some(d) if !d.is_empty() => PathBuf::from(d),
        _ => default_fixture_dir(),
    }
}

pub fn default_fixture_dir() -> PathBuf {
    PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut set = FixtureSet::default();
        set.push(
            FixtureRecord::new("a", "hyp2f1_oracle", Complex64::new(1.5, -0.25), "bigint series")
                .param("n", 3)
                .param("lambda_re", 0.5)
                .at_z(Complex64::new(0.1, 0.2)),
        );
        set.push(FixtureRecord::new("b", "boundary", Complex64::new(0.0, 1.0), "").at_x(1.5, Some(CutSide::Minus)));
        let text = set.to_json().unwrap();
        let back = FixtureSet::from_json(&text).unwrap();
        assert_eq!(back, set);
        assert_eq!(back.missing_provenance(), vec!["b".to_string()]);
        assert_eq!(back.get("a").unwrap().param_f64("lambda_re").unwrap(), 0.5);
        assert!(back.get("a").unwrap().param_f64("missing").is_err());
        assert_eq!(back.of_kind("boundary").count(), 1);
        assert!(text.contains(r#""re": 1.5"#));
    }

    #[test]
    fn rejects_other_schema() {
        assert!(FixtureSet::from_json(r#"{"schema": 99, "records": []}"#).is_err());
    }
}
