//! Trained models and resumable training checkpoints, both JSON.

use std::path::Path;

use evontology_core::learn::{ClassifierHead, Objective, Trainer};
use serde::{Deserialize, Serialize};

use super::{read_text, write_text, DataError};

pub const MODEL_FORMAT: &str = "evontology/model-1";
pub const CHECKPOINT_FORMAT: &str = "evontology/checkpoint-1";

/// The head chosen by validation loss together with what it was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub ontology: String,
    pub objective: Objective,
    pub head: ClassifierHead,
    pub best_iter: u64,
    pub best_val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    ontology: String,
    trainer: Trainer,
}

fn parse<T: for<'de> Deserialize<'de>>(text: &str, path: &Path) -> Result<T, DataError> {
    serde_json::from_str(text).map_err(|e| DataError::Schema {
        path: path.to_path_buf(),
        location: format!("line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    })
}

fn check_format(found: &str, want: &str, path: &Path) -> Result<(), DataError> {
    if found == want {
        Ok(())
    } else {
        Err(DataError::Schema {
            path: path.to_path_buf(),
            location: "format".into(),
            message: format!("expected {want}, found {found}"),
        })
    }
}

pub fn write_model(path: &Path, model: &ModelFile) -> Result<(), DataError> {
    write_text(path, &(serde_json::to_string_pretty(model).expect("model serializes") + "\n"))
}

pub fn read_model(path: &Path) -> Result<ModelFile, DataError> {
    let m: ModelFile = parse(&read_text(path)?, path)?;
    check_format(&m.format, MODEL_FORMAT, path)?;
    Ok(m)
}

pub fn checkpoint_to_string(trainer: &Trainer) -> String {
    let file = CheckpointFile {
        format: CHECKPOINT_FORMAT.into(),
        ontology: trainer.ontology_hash().into(),
        trainer: trainer.clone(),
    };
    serde_json::to_string(&file).expect("checkpoint serializes") + "\n"
}

pub fn checkpoint_from_str(text: &str, path: &Path) -> Result<Trainer, DataError> {
    let c: CheckpointFile = parse(text, path)?;
    check_format(&c.format, CHECKPOINT_FORMAT, path)?;
    Ok(c.trainer)
}

pub fn write_checkpoint(path: &Path, trainer: &Trainer) -> Result<(), DataError> {
    write_text(path, &checkpoint_to_string(trainer))
}

pub fn read_checkpoint(path: &Path) -> Result<Trainer, DataError> {
    checkpoint_from_str(&read_text(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use evontology_core::encoding::distance_weights;
    use evontology_core::learn::{Dataset, LossKind, TrainConfig};
    use evontology_core::synthetic::{toy5, HierarchicalClusters};

    #[test]
    fn resumed_checkpoint_follows_the_same_trajectory() {
        let ont = toy5();
        let cfg = HierarchicalClusters {
            dim: 5,
            branch_scale: 2.0,
            leaf_scale: 1.0,
            noise: 0.7,
        };
        let data = Dataset::from_synthetic(&ont, &cfg.sample(&ont, 50, 1, 2)).unwrap();
        let obj = Objective::new(LossKind::CCel, &ont, distance_weights(&ont)).unwrap();
        let mut config = TrainConfig::desk(120, 5);
        config.sgd.batch_size = 16;
        let mut straight = Trainer::new(obj.clone(), 5, config).unwrap();
        let full = straight.run(&data, None).unwrap();

        let mut first = Trainer::new(obj, 5, config).unwrap();
        first.run_until(61, &data, None).unwrap();
        let text = checkpoint_to_string(&first);
        let mut resumed = checkpoint_from_str(&text, Path::new("c")).unwrap();
        assert_eq!(resumed, first);
        let out = resumed.run(&data, None).unwrap();
        assert_eq!(out, full);
    }
}
