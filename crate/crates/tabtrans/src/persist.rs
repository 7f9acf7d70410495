//! Versioned JSON persistence for fitted models: format version, model
//! kind, schema fingerprint, and a payload checksum verified on load.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::data::fnv1a64;
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub kind: String,
    /// Fingerprint of the schema / feature layout the model expects.
    pub fingerprint: String,
    pub checksum: String,
    pub payload: serde_json::Value,
}

fn checksum_of(payload: &serde_json::Value) -> String {
    // serde_json maps are ordered, so this string is canonical
    let canonical = serde_json::to_string(payload).expect("value serializes");
    format!("{:016x}", fnv1a64(canonical.as_bytes()))
}

pub fn save_model<T: Serialize>(
    path: &Path,
    kind: &str,
    fingerprint: &str,
    model: &T,
) -> Result<()> {
    let payload = serde_json::to_value(model)?;
    let file = ModelFile {
        format_version: FORMAT_VERSION,
        kind: kind.to_string(),
        fingerprint: fingerprint.to_string(),
        checksum: checksum_of(&payload),
        payload,
    };
    std::fs::write(path, serde_json::to_string(&file)?)?;
    Ok(())
}

/// Loads and verifies a model file: format version, kind, checksum, and
/// (when provided) the expected schema fingerprint must all match.
pub fn load_model<T: DeserializeOwned>(
    path: &Path,
    kind: &str,
    expected_fingerprint: Option<&str>,
) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Data(format!("cannot read model '{}': {e}", path.display())))?;
    let file: ModelFile = serde_json::from_str(&text)?;
    if file.format_version != FORMAT_VERSION {
        return Err(Error::Config(format!(
            "model '{}': format version {} unsupported (expected {FORMAT_VERSION})",
            path.display(),
            file.format_version
        )));
    }
    if file.kind != kind {
        return Err(Error::Config(format!(
            "model '{}': kind '{}' where '{kind}' was expected",
            path.display(),
            file.kind
        )));
    }
    if checksum_of(&file.payload) != file.checksum {
        return Err(Error::Data(format!(
            "model '{}': checksum mismatch (file corrupted or edited)",
            path.display()
        )));
    }
    if let Some(expected) = expected_fingerprint {
        if file.fingerprint != expected {
            return Err(Error::Config(format!(
                "model '{}': schema fingerprint {} does not match expected {expected}",
                path.display(),
                file.fingerprint
            )));
        }
    }
    Ok(serde_json::from_value(file.payload)?)
}

/// Reads just the stored fingerprint (for chained loads).
pub fn read_fingerprint(path: &Path) -> Result<String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Data(format!("cannot read model '{}': {e}", path.display())))?;
    let file: ModelFile = serde_json::from_str(&text)?;
    Ok(file.fingerprint)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::{ClassifierKind, ClassifierSpec, TrainedClassifier};
    use crate::numerics::{Matrix, Rng};
    use crate::tabtransformer::{TabTransformerModel, TrainConfig};

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("tabtrans-persist-tests");
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    fn blobs(n: usize, seed: u64) -> (Matrix, Vec<u8>) {
        let mut rng = Rng::from_seed(seed);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let label = rng.below(2) as u8;
            rows.push(vec![label as f64 + 0.3 * rng.normal(), rng.normal()]);
            y.push(label);
        }
        (Matrix::from_rows(&rows), y)
    }

    #[test]
    fn classifier_round_trip_preserves_predictions() {
        let (x, y) = blobs(50, 1);
        let model = ClassifierSpec::new(ClassifierKind::RandomForest, 2).fit(&x, &y).unwrap();
        let path = tmp("forest.json");
        save_model(&path, "classifier", "fp123", &model).unwrap();
        let loaded: TrainedClassifier = load_model(&path, "classifier", Some("fp123")).unwrap();
        let before = model.predict_proba(&x);
        let after = loaded.predict_proba(&x);
        assert!(before.max_abs_diff(&after) < 1e-12);
    }

    #[test]
    fn transformer_round_trip_preserves_features() {
        let ds = crate::fixture::generate_dataset(40, 5).unwrap();
        let config = TrainConfig {
            epochs: 2,
            blocks: 1,
            embed_dim: 4,
            heads: 2,
            shared_width: 2,
            batch_size: 16,
            dropout: 0.0,
            seed: 1,
            ..TrainConfig::default()
        };
        let mut model = TabTransformerModel::for_dataset(config, &ds).unwrap();
        crate::tabtransformer::train(&mut model, &ds, None).unwrap();
        let path = tmp("transformer.json");
        save_model(&path, "transformer", &model.schema_fingerprint.clone(), &model).unwrap();
        let mut loaded: TabTransformerModel =
            load_model(&path, "transformer", Some(&model.schema_fingerprint)).unwrap();
        loaded.restore_after_load();
        let before = model.extract_features(&ds).unwrap();
        let after = loaded.extract_features(&ds).unwrap();
        assert!(before.max_abs_diff(&after) < 1e-12);
    }

    #[test]
    fn tampered_file_fails_checksum() {
        let (x, y) = blobs(30, 3);
        let model = ClassifierSpec::new(ClassifierKind::Lda, 1).fit(&x, &y).unwrap();
        let path = tmp("tampered.json");
        save_model(&path, "classifier", "fp", &model).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        // flip one digit inside the payload
        let tampered = text.replacen("0.", "1.", 1);
        assert_ne!(text, tampered, "test needs a digit to flip");
        std::fs::write(&path, tampered).unwrap();
        let err = load_model::<TrainedClassifier>(&path, "classifier", None).unwrap_err();
        assert!(err.to_string().contains("checksum"), "{err}");
    }

    #[test]
    fn fingerprint_and_kind_mismatches_fail() {
        let (x, y) = blobs(30, 4);
        let model = ClassifierSpec::new(ClassifierKind::Lda, 1).fit(&x, &y).unwrap();
        let path = tmp("mismatch.json");
        save_model(&path, "classifier", "fp-a", &model).unwrap();
        assert!(load_model::<TrainedClassifier>(&path, "classifier", Some("fp-b")).is_err());
        assert!(load_model::<TrainedClassifier>(&path, "transformer", None).is_err());
        assert_eq!(read_fingerprint(&path).unwrap(), "fp-a");
    }
}
