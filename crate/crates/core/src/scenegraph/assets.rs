use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::GraphError;
use crate::scene::OrientedBox;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetRef {
    pub asset_id: String,
    pub category: String,
    /// Length, width, height in cm.
    pub dims: [f64; 3],
    /// Identifier of the database the asset came from.
    pub source: String,
}

#[derive(Debug, Clone, Deserialize)]
struct AssetRecord {
    id: String,
    category: String,
    length: f64,
    width: f64,
    height: f64,
}

/// Meshes grouped by category.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AssetDatabase {
    pub name: String,
    entries: Vec<AssetRef>,
    by_category: BTreeMap<String, Vec<usize>>,
}

impl AssetDatabase {
    pub fn new(name: impl Into<String>, entries: Vec<AssetRef>) -> Result<Self, GraphError> {
        let mut ids = HashSet::new();
        let mut by_category: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, e) in entries.iter().enumerate() {
            if !ids.insert(e.asset_id.as_str()) {
                return Err(GraphError::AssetDatabase(format!("duplicate asset id `{}`", e.asset_id)));
            }
            if e.dims.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
                return Err(GraphError::AssetDatabase(format!("asset `{}` has non-positive dims", e.asset_id)));
            }
            by_category.entry(e.category.clone()).or_default().push(i);
        }
        Ok(AssetDatabase {
            name: name.into(),
            entries,
            by_category,
        })
    }

    /// JSON list of `{id, category, length, width, height}`.
    pub fn from_json(name: &str, text: &str) -> Result<Self, GraphError> {
        let recs: Vec<AssetRecord> = serde_json::from_str(text).map_err(|e| GraphError::AssetDatabase(e.to_string()))?;
        let entries = recs
            .into_iter()
            .map(|r| AssetRef {
                asset_id: r.id,
                category: r.category,
                dims: [r.length, r.width, r.height],
                source: name.to_string(),
            })
            .collect();
        Self::new(name, entries)
    }

    pub fn to_json(&self) -> String {
        let recs: Vec<_> = self
            .entries
            .iter()
            .map(|e| {
                serde_json::json!({
                    "id": e.asset_id,
                    "category": e.category,
                    "length": e.dims[0],
                    "width": e.dims[1],
                    "height": e.dims[2],
                })
            })
            .collect();
        serde_json::to_string_pretty(&recs).expect("assets serialize")
    }

    pub fn entries(&self) -> &[AssetRef] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn category(&self, name: &str) -> impl Iterator<Item = &AssetRef> {
        self.by_category
            .get(name)
            .into_iter()
            .flat_map(move |ix| ix.iter().map(move |&i| &self.entries[i]))
    }
}

/// Squared footprint-size difference between an object and an asset.
pub fn size_cost(o: &OrientedBox, a: &AssetRef) -> f64 {
    (o.length - a.dims[0]).powi(2) + (o.width - a.dims[1]).powi(2)
}

/// Same-category asset of least size cost, ties to the smallest id; `None`
/// when the category has no assets.
pub fn retrieve_asset<'a>(o: &OrientedBox, db: &'a AssetDatabase) -> Option<&'a AssetRef> {
    db.category(&o.category).min_by(|a, b| {
        size_cost(o, a)
            .total_cmp(&size_cost(o, b))
            .then_with(|| a.asset_id.cmp(&b.asset_id))
    })
}

/// Small built-in database covering the default house and fine palettes.
pub fn builtin_assets() -> AssetDatabase {
    AssetDatabase::from_json("builtin", include_str!("builtin_assets.json")).expect("builtin asset database is valid")
}
