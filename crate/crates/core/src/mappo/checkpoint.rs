//! Versioned JSON checkpoints: the full policy set, the critic, both configs,
//! and the epoch they were saved at. Floats survive the round trip bit-exact.

use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::market::MechanismKind;
use crate::simenv::WorldConfig;

use super::policy::{Critic, PolicySet};
use super::{MappoError, TrainConfig};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub epoch: usize,
    pub mechanism: MechanismKind,
    pub world_config: WorldConfig,
    pub train_config: TrainConfig,
    pub policies: PolicySet,
    pub critic: Critic,
    /// The trainer's minibatch-shuffle stream at save time.
    pub rng_state: ChaCha8Rng,
}

pub fn save_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<(), MappoError> {
    let io_err = |message: String| MappoError::Io {
        path: path.display().to_string(),
        message,
    };
    let mut body =
        serde_json::to_string_pretty(checkpoint).map_err(|e| io_err(e.to_string()))?;
    body.push('\n');
    std::fs::write(path, body).map_err(|e| io_err(e.to_string()))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, MappoError> {
    let shown = path.display().to_string();
    let body = std::fs::read_to_string(path).map_err(|e| MappoError::Io {
        path: shown.clone(),
        message: e.to_string(),
    })?;
    let value: serde_json::Value =
        serde_json::from_str(&body).map_err(|e| MappoError::CorruptCheckpoint {
            path: shown.clone(),
            message: e.to_string(),
        })?;
    let found = value
        .get("version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| MappoError::CorruptCheckpoint {
            path: shown.clone(),
            message: "missing version field".into(),
        })?;
    if found != u64::from(CHECKPOINT_VERSION) {
        return Err(MappoError::VersionMismatch {
            path: shown,
            expected: CHECKPOINT_VERSION,
            found: found as u32,
        });
    }
    serde_json::from_value(value).map_err(|e| MappoError::CorruptCheckpoint {
        path: shown,
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{child_seed, seeded};

    fn sample_checkpoint() -> Checkpoint {
        let world_config = WorldConfig::default();
        let train_config = TrainConfig::default();
        let policies = PolicySet::new(
            3,
            world_config.rsu_count + 2,
            &[8, 8],
            false,
            train_config.learning_rate,
            41,
        );
        let critic = Critic::new(
            3 * world_config.rsu_count,
            &[8, 8],
            train_config.learning_rate,
            child_seed(41, 9),
        );
        let mut rng_state = seeded(99);
        let _ = rand::Rng::gen::<u64>(&mut rng_state);
        Checkpoint {
            version: CHECKPOINT_VERSION,
            epoch: 17,
            mechanism: MechanismKind::McAfeeDouble,
            world_config,
            train_config,
            policies,
            critic,
            rng_state,
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.json");
        let original = sample_checkpoint();
        save_checkpoint(&path, &original).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(
            serde_json::to_string(&loaded).unwrap(),
            serde_json::to_string(&original).unwrap()
        );
        // The restored RNG continues the exact same stream.
        let mut a = original.rng_state.clone();
        let mut b = loaded.rng_state;
        assert_eq!(rand::Rng::gen::<u64>(&mut a), rand::Rng::gen::<u64>(&mut b));
        // Bit-exactness, not just value equality: compare raw parameter words.
        for (a, b) in original.policies.policies[0]
            .net
            .weights
            .iter()
            .flatten()
            .zip(loaded.policies.policies[0].net.weights.iter().flatten())
        {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn version_mismatch_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.json");
        let mut stale = sample_checkpoint();
        stale.version = CHECKPOINT_VERSION + 3;
        save_checkpoint(&path, &stale).unwrap();
        match load_checkpoint(&path) {
            Err(MappoError::VersionMismatch {
                expected, found, ..
            }) => {
                assert_eq!(expected, CHECKPOINT_VERSION);
                assert_eq!(found, CHECKPOINT_VERSION + 3);
            }
            other => panic!("expected version mismatch, got {other:?}"),
        }
    }

    #[test]
    fn corrupt_and_missing_files_are_distinguished() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.json");
        let original = sample_checkpoint();
        save_checkpoint(&path, &original).unwrap();
        let body = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, &body[..body.len() / 2]).unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(MappoError::CorruptCheckpoint { .. })
        ));
        std::fs::write(&path, "{\"epoch\": 3}").unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(MappoError::CorruptCheckpoint { .. })
        ));
        assert!(matches!(
            load_checkpoint(&dir.path().join("absent.json")),
            Err(MappoError::Io { .. })
        ));
    }
}
