use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    fit_scaler, train_forest, train_gnb, train_knn, train_mlp, train_tree, Algorithm, Classifier,
    ClassifyError, DecisionTree, Distribution, Forest, ForestParams, GaussianNb, Knn, Mlp, MlpParams,
    Scaler, DEFAULT_K,
};
use crate::features::{FEATURE_LAYOUT, N_FEATURES};
use crate::genre::Genre;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Models {
    pub knn: Knn,
    pub gnb: GaussianNb,
    pub tree: DecisionTree,
    pub forest: Forest,
    pub mlp: Mlp,
}

impl Models {
    pub fn get(&self, algorithm: Algorithm) -> &dyn Classifier {
        match algorithm {
            Algorithm::Knn => &self.knn,
            Algorithm::Gnb => &self.gnb,
            Algorithm::Tree => &self.tree,
            Algorithm::Forest => &self.forest,
            Algorithm::Mlp => &self.mlp,
        }
    }
}

/// The scaler and five trained models, plus what is needed to check that
/// a query vector matches the training layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub schema_version: u32,
    pub train_seed: u64,
    pub feature_layout: String,
    pub genres: Vec<String>,
    pub scaler: Scaler,
    pub models: Models,
}

#[derive(Debug, thiserror::Error)]
pub enum BundleError {
    #[error("bundle schema_version {found} is not supported (expected {SCHEMA_VERSION})")]
    SchemaVersionMismatch { found: u64 },
    #[error("corrupt bundle: {0}")]
    CorruptBundle(String),
    #[error("bundle i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Fits the scaler on every row, then trains the five models on the
/// standardized rows. The forest uses `seed` and the network `seed + 1`.
pub fn train_all(rows: &[Vec<f64>], labels: &[Genre], seed: u64) -> Result<ModelBundle, ClassifyError> {
    super::check_training_set(rows, labels)?;
    if let Some(r) = rows.iter().find(|r| r.len() != N_FEATURES) {
        return Err(ClassifyError::DimensionMismatch { expected: N_FEATURES, got: r.len() });
    }
    for g in Genre::ALL {
        let n = labels.iter().filter(|l| **l == g).count();
        if n == 1 {
            return Err(ClassifyError::InsufficientData(format!(
                "genre {g} has 1 example, need at least 2"
            )));
        }
    }
    let scaler = fit_scaler(rows)?;
    let z = scaler.apply_all(rows)?;
    let models = Models {
        knn: train_knn(&z, labels, DEFAULT_K)?,
        gnb: train_gnb(&z, labels)?,
        tree: train_tree(&z, labels)?,
        forest: train_forest(&z, labels, seed, ForestParams::default())?,
        mlp: train_mlp(&z, labels, seed.wrapping_add(1), MlpParams::default())?,
    };
    Ok(ModelBundle {
        schema_version: SCHEMA_VERSION,
        train_seed: seed,
        feature_layout: FEATURE_LAYOUT.to_string(),
        genres: Genre::names().into_iter().map(String::from).collect(),
        scaler,
        models,
    })
}

impl ModelBundle {
    /// Standardizes a raw feature vector and runs all five models, in
    /// [`Algorithm::ALL`] order.
    pub fn predict_all(&self, raw: &[f64]) -> Result<[Distribution; 5], ClassifyError> {
        let z = self.scaler.apply(raw)?;
        let mut out = [Distribution::uniform(); 5];
        for (slot, a) in out.iter_mut().zip(Algorithm::ALL) {
            *slot = self.models.get(a).predict_proba(&z)?;
        }
        Ok(out)
    }

    /// Per-algorithm top-1 labels, in [`Algorithm::ALL`] order.
    pub fn predict_top(&self, raw: &[f64]) -> Result<[Genre; 5], ClassifyError> {
        let z = self.scaler.apply(raw)?;
        let mut out = [Genre::Blues; 5];
        for (slot, a) in out.iter_mut().zip(Algorithm::ALL) {
            *slot = self.models.get(a).predict(&z)?;
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(format!("schema_version {}", self.schema_version));
        }
        if self.feature_layout != FEATURE_LAYOUT {
            return Err(format!("unknown feature layout {:?}", self.feature_layout));
        }
        if self.genres != Genre::names() {
            return Err("genre table differs from the canonical eleven".into());
        }
        self.scaler.validate()?;
        if self.scaler.dim() != N_FEATURES {
            return Err(format!("scaler has {} columns, expected {N_FEATURES}", self.scaler.dim()));
        }
        let m = &self.models;
        if m.knn.k == 0 || m.knn.rows.is_empty() || m.knn.rows.len() != m.knn.labels.len() {
            return Err("knn training set is inconsistent".into());
        }
        if m.gnb.classes.is_empty() {
            return Err("gnb has no classes".into());
        }
        m.tree.validate()?;
        if m.forest.trees.is_empty() {
            return Err("forest has no trees".into());
        }
        for t in &m.forest.trees {
            t.validate()?;
        }
        m.mlp.validate()?;
        for a in Algorithm::ALL {
            let n = m.get(a).n_features();
            if n != N_FEATURES {
                return Err(format!("{a} expects {n} features, expected {N_FEATURES}"));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("bundle serializes")
    }

    /// Parses and validates. The schema version is checked before the rest
    /// of the document so newer bundles report a version error, not a
    /// parse error.
    pub fn from_json(text: &str) -> Result<ModelBundle, BundleError> {
        let doc: serde_json::Value =
            serde_json::from_str(text).map_err(|e| BundleError::CorruptBundle(e.to_string()))?;
        match doc.get("schema_version").and_then(serde_json::Value::as_u64) {
            Some(v) if v == u64::from(SCHEMA_VERSION) => {}
            Some(found) => return Err(BundleError::SchemaVersionMismatch { found }),
            None => return Err(BundleError::CorruptBundle("missing schema_version".into())),
        }
        let bundle: ModelBundle =
            serde_json::from_value(doc).map_err(|e| BundleError::CorruptBundle(e.to_string()))?;
        bundle.validate().map_err(BundleError::CorruptBundle)?;
        Ok(bundle)
    }

    pub fn save(&self, path: &Path) -> Result<(), BundleError> {
        // write-then-rename so a crash never leaves half a bundle behind
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, self.to_json())?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<ModelBundle, BundleError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn clusters(per: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<Genre>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (c, g) in [Genre::Classical, Genre::Electronic, Genre::Folk].iter().enumerate() {
            for _ in 0..per {
                let row = (0..N_FEATURES)
                    .map(|j| if j % 3 == c { 20.0 } else { 0.0 } + rng.random_range(-1.0..1.0))
                    .collect();
                rows.push(row);
                labels.push(*g);
            }
        }
        (rows, labels)
    }

    #[test]
    fn separated_clusters_are_learned_by_every_model() {
        let (rows, labels) = clusters(20, 1);
        let bundle = train_all(&rows, &labels, 5).unwrap();
        bundle.validate().unwrap();
        for (k, a) in Algorithm::ALL.iter().enumerate() {
            let correct = rows
                .iter()
                .zip(&labels)
                .filter(|(r, l)| bundle.predict_top(r).unwrap()[k] == **l)
                .count();
            assert!(correct as f64 / rows.len() as f64 >= 0.95, "{a}: {correct}/{}", rows.len());
        }
    }

    #[test]
    fn singleton_genre_is_named() {
        let (mut rows, mut labels) = clusters(3, 2);
        rows.push(vec![0.0; N_FEATURES]);
        labels.push(Genre::Reggae);
        let err = train_all(&rows, &labels, 0).unwrap_err();
        assert!(matches!(&err, ClassifyError::InsufficientData(m) if m.contains("Reggae")), "{err}");
    }

    #[test]
    fn json_round_trip_and_version_check() {
        let (rows, labels) = clusters(4, 3);
        let bundle = train_all(&rows, &labels, 9).unwrap();
        let text = bundle.to_json();
        assert_eq!(ModelBundle::from_json(&text).unwrap(), bundle);

        let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
        doc["schema_version"] = 2.into();
        assert!(matches!(
            ModelBundle::from_json(&doc.to_string()),
            Err(BundleError::SchemaVersionMismatch { found: 2 })
        ));
        assert!(matches!(
            ModelBundle::from_json(&text[..text.len() / 2]),
            Err(BundleError::CorruptBundle(_))
        ));
    }
}
