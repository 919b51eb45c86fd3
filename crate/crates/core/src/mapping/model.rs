use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::pca::{pca_fit, PcaModel};
use super::regress::{fit_map, MapHyper, Regressor};
use super::MapKind;
use crate::error::{Error, Result};
use crate::store::{rank_by_vector, shared_vocab, EmbeddingTable, SimilarityRanking};

pub const MODEL_SCHEMA: &str = "scentspace.mapping/v1";

/// Which word vectors the PCA is fitted on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PcaDomain {
    /// Only words shared with the smell table.
    #[default]
    Shared,
    /// The whole word table.
    Full,
}

/// Aligned training matrices over the shared vocabulary.
#[derive(Debug, Clone)]
pub struct TrainingData {
    pub tokens: Vec<String>,
    pub pca: PcaModel,
    /// Reduced word vectors, one row per token.
    pub x: DMatrix<f64>,
    /// Smell vectors, one row per token.
    pub y: DMatrix<f64>,
}

fn table_matrix<S: AsRef<str>>(table: &EmbeddingTable, tokens: &[S]) -> Result<DMatrix<f64>> {
    let mut data = Vec::with_capacity(tokens.len() * table.dim());
    for t in tokens {
        let v = table
            .get(t.as_ref())
            .ok_or_else(|| Error::OutOfVocabulary(t.as_ref().to_owned()))?;
        data.extend_from_slice(v);
    }
    Ok(DMatrix::from_row_slice(tokens.len(), table.dim(), &data))
}

pub fn build_training_data(
    word_table: &EmbeddingTable,
    smell_table: &EmbeddingTable,
    n_components: usize,
    domain: PcaDomain,
) -> Result<TrainingData> {
    let tokens = shared_vocab(word_table, smell_table);
    if tokens.len() < 2 {
        return Err(Error::Insufficient(format!(
            "shared vocabulary has {} items, need at least 2",
            tokens.len()
        )));
    }
    let x_raw = table_matrix(word_table, &tokens)?;
    let pca = match domain {
        PcaDomain::Shared => pca_fit(&x_raw, n_components)?,
        PcaDomain::Full => pca_fit(
            &table_matrix(word_table, word_table.tokens())?,
            n_components,
        )?,
    };
    let x = pca.transform(&x_raw)?;
    let y = table_matrix(smell_table, &tokens)?;
    Ok(TrainingData { tokens, pca, x, y })
}

/// PCA followed by a fitted regressor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingModel {
    pub schema: String,
    pub pca: PcaModel,
    pub regressor: Regressor,
}

impl MappingModel {
    pub fn kind(&self) -> MapKind {
        self.regressor.kind()
    }

    /// Maps one raw word vector into smell space.
    pub fn predict_vector(&self, word_vector: &[f64]) -> Result<Vec<f64>> {
        let z = self.pca.transform_one(word_vector)?;
        let x = DMatrix::from_row_slice(1, z.len(), &z);
        Ok(self.regressor.predict(&x).row(0).iter().copied().collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: MappingModel = serde_json::from_str(text)?;
        if model.schema != MODEL_SCHEMA {
            return Err(Error::InvalidArgument(format!(
                "unsupported model schema {:?} (expected {MODEL_SCHEMA})",
                model.schema
            )));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| e.context(path.display().to_string()))
    }
}

pub fn fit_mapping(kind: MapKind, data: &TrainingData, hyper: &MapHyper) -> Result<MappingModel> {
    Ok(MappingModel {
        schema: MODEL_SCHEMA.into(),
        pca: data.pca.clone(),
        regressor: fit_map(kind, &data.x, &data.y, hyper)?,
    })
}

/// The smell notes closest to and furthest from a mapped word.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmellPrediction {
    pub top: SimilarityRanking,
    /// Least similar first.
    pub bottom: Vec<(String, f64)>,
}

pub fn predict_smell(
    word: &str,
    word_table: &EmbeddingTable,
    model: &MappingModel,
    smell_table: &EmbeddingTable,
    k: usize,
) -> Result<SmellPrediction> {
    let v = word_table
        .get(word)
        .ok_or_else(|| Error::OutOfVocabulary(word.to_owned()))?;
    let predicted = model.predict_vector(v)?;
    if predicted.len() != smell_table.dim() {
        return Err(Error::DimensionMismatch {
            expected: smell_table.dim(),
            actual: predicted.len(),
        });
    }
    let ranked = rank_by_vector(smell_table, &predicted, None)?;
    let bottom = ranked.iter().rev().take(k).cloned().collect();
    let top = ranked.into_iter().take(k).collect();
    Ok(SmellPrediction {
        top: SimilarityRanking {
            query: word.to_owned(),
            ranked: top,
        },
        bottom,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_table(prefix: &str, n: usize, dim: usize, seed: u64) -> EmbeddingTable {
        let mut rng = crate::seed::rng(seed);
        EmbeddingTable::from_entries(
            dim,
            (0..n).map(|i| {
                (
                    format!("{prefix}{i}"),
                    (0..dim).map(|_| rng.random::<f64>() - 0.5).collect(),
                )
            }),
        )
        .unwrap()
    }

    #[test]
    fn json_round_trip() {
        let word = random_table("w", 30, 6, 1);
        let smell = random_table("w", 30, 3, 2);
        let data = build_training_data(&word, &smell, 4, PcaDomain::Shared).unwrap();
        for kind in MapKind::ALL {
            let hyper = MapHyper {
                mlp: crate::mapping::MlpConfig {
                    max_epochs: 3,
                    hidden: 8,
                    ..Default::default()
                },
                ..MapHyper::default()
            };
            let model = fit_mapping(kind, &data, &hyper).unwrap();
            let back = MappingModel::from_json(&model.to_json().unwrap()).unwrap();
            assert_eq!(back.kind(), kind);
            let v = word.get("w3").unwrap();
            assert_eq!(
                back.predict_vector(v).unwrap(),
                model.predict_vector(v).unwrap()
            );
        }
    }

    #[test]
    fn rejects_unknown_schema() {
        let json = r#"{"schema":"other/v9","pca":{"mean":[],"components":[],"explained_variance":[]},"regressor":{"kind":"dummy","mean":[]}}"#;
        assert!(MappingModel::from_json(json).is_err());
    }

    #[test]
    fn dummy_predictions_ignore_the_word() {
        let word = random_table("w", 20, 5, 3);
        let smell = random_table("w", 20, 4, 4);
        let data = build_training_data(&word, &smell, 3, PcaDomain::Full).unwrap();
        let model = fit_mapping(MapKind::Dummy, &data, &MapHyper::default()).unwrap();
        let a = predict_smell("w1", &word, &model, &smell, 5).unwrap();
        let b = predict_smell("w7", &word, &model, &smell, 5).unwrap();
        assert_eq!(a.top.ranked, b.top.ranked);
        assert_eq!(a.bottom, b.bottom);
        assert_eq!(a.top.ranked.len(), 5);
        assert!(a.bottom[0].1 <= a.bottom[4].1);
        assert!(matches!(
            predict_smell("nope", &word, &model, &smell, 5),
            Err(Error::OutOfVocabulary(_))
        ));
    }
}
