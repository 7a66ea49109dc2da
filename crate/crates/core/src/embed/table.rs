use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::de::Error as _;
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::types::{rng, Feature};

/// Row key: a pixel group, i.e. a segment (or object) id within a scene.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroupKey {
    pub scene: usize,
    pub id: usize,
}

impl GroupKey {
    pub fn new(scene: usize, id: usize) -> Self {
        Self { scene, id }
    }
}

impl fmt::Display for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.scene, self.id)
    }
}

impl FromStr for GroupKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse { line: 0, msg: format!("bad group key `{s}`") };
        let (a, b) = s.split_once(':').ok_or_else(bad)?;
        Ok(Self { scene: a.parse().map_err(|_| bad())?, id: b.parse().map_err(|_| bad())? })
    }
}

/// Learnable unit-norm rows keyed by pixel group.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    rows: BTreeMap<GroupKey, Feature>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        Self { dim, rows: BTreeMap::new() }
    }

    /// One random row per key, drawn in key order from `seed`.
    pub fn random(keys: impl IntoIterator<Item = GroupKey>, dim: usize, seed: u64) -> Self {
        let mut r = rng::seeded(seed);
        let mut keys: Vec<GroupKey> = keys.into_iter().collect();
        keys.sort_unstable();
        keys.dedup();
        let rows = keys.into_iter().map(|k| (k, Feature::random(dim, &mut r))).collect();
        Self { dim, rows }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn insert(&mut self, key: GroupKey, row: Feature) -> Result<()> {
        if row.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: row.dim() });
        }
        self.rows.insert(key, row);
        Ok(())
    }

    pub fn get(&self, key: &GroupKey) -> Option<&Feature> {
        self.rows.get(key)
    }

    pub fn require(&self, key: &GroupKey) -> Result<&Feature> {
        self.rows.get(key).ok_or(Error::MissingSegment { scene: key.scene, segment: key.id })
    }

    pub fn iter(&self) -> impl Iterator<Item = (&GroupKey, &Feature)> {
        self.rows.iter()
    }

    pub fn scene_rows(&self, scene: usize) -> impl Iterator<Item = (&GroupKey, &Feature)> {
        self.rows.range(GroupKey::new(scene, 0)..=GroupKey::new(scene, usize::MAX))
    }
}

impl Serialize for EmbeddingTable {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        struct Rows<'a>(&'a BTreeMap<GroupKey, Feature>);
        impl Serialize for Rows<'_> {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                let mut m = s.serialize_map(Some(self.0.len()))?;
                for (k, v) in self.0 {
                    m.serialize_entry(&k.to_string(), v.as_slice())?;
                }
                m.end()
            }
        }
        let mut m = s.serialize_map(Some(2))?;
        m.serialize_entry("dim", &self.dim)?;
        m.serialize_entry("rows", &Rows(&self.rows))?;
        m.end()
    }
}

impl<'de> Deserialize<'de> for EmbeddingTable {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Repr {
            dim: usize,
            rows: BTreeMap<String, Vec<f64>>,
        }
        let repr = Repr::deserialize(d)?;
        let mut table = EmbeddingTable::new(repr.dim);
        for (k, v) in repr.rows {
            let key: GroupKey = k.parse().map_err(D::Error::custom)?;
            let row = Feature::from_unit(v).map_err(D::Error::custom)?;
            table.insert(key, row).map_err(D::Error::custom)?;
        }
        Ok(table)
    }
}
