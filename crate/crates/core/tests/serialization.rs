mod common;

use duet_core::coeffs::{load_sequence, save_sequence, CoeffSequence};
use duet_core::nn::{Checkpoint, ModelConfig, ModelParams};
use duet_core::FeatureSequence;

#[test]
fn random_payloads_round_trip_exactly() {
    common::serialization_round_trips(200, 17).unwrap();
}

#[test]
fn files_round_trip_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(3);
    let track = common::random_track(&mut rng, 9, 2.0);
    let seq = CoeffSequence::from_motion(&track, 25.0);
    let path = dir.path().join("seq.vcof");
    save_sequence(&path, &seq).unwrap();
    assert_eq!(load_sequence(&path, 25.0).unwrap(), seq);

    let feats = FeatureSequence::from_bytes(
        &FeatureSequence {
            frames: vec![Default::default(); 4],
        }
        .to_bytes(),
    )
    .unwrap();
    let path = dir.path().join("a.vcaf");
    feats.save(&path).unwrap();
    assert_eq!(FeatureSequence::load(&path).unwrap(), feats);

    let ck = Checkpoint::new(ModelParams::zeros(ModelConfig::tiny(1)));
    let path = dir.path().join("m.vckp");
    ck.save(&path).unwrap();
    assert_eq!(Checkpoint::load(&path).unwrap(), ck);
}

#[test]
fn wrong_container_is_rejected() {
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(4);
    let seq = CoeffSequence::from_motion(&common::random_track(&mut rng, 3, 1.0), 30.0);
    assert!(FeatureSequence::from_bytes(&seq.to_bytes()).is_err());
    let feats = FeatureSequence {
        frames: vec![Default::default(); 3],
    };
    assert!(CoeffSequence::from_bytes(&feats.to_bytes(), 30.0).is_err());
    assert!(Checkpoint::from_bytes(&seq.to_bytes()).is_err());
}
