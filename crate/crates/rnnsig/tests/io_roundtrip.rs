use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rnnsig::core::Activation;
use rnnsig::io;
use rnnsig::training::{init_params, make_spirals, predict};

#[test]
fn dataset_survives_a_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested").join("spirals.csv");
    let data = make_spirals(6, 12, 3);
    io::write_dataset(io::create(&path).unwrap(), &data).unwrap();
    let back = io::read_dataset(io::open(&path).unwrap(), data.seed).unwrap();
    assert_eq!(back, data);
}

#[test]
fn checkpoint_reproduces_predictions_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ckpt.csv");
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let params = init_params(5, 2, Activation::Tanh, &mut rng);
    io::write_checkpoint(io::create(&path).unwrap(), &params).unwrap();
    let back = io::read_checkpoint(io::open(&path).unwrap()).unwrap();
    assert_eq!(back, params);
    let seq = &make_spirals(1, 20, 1).sequences[0];
    assert_eq!(predict(&back, seq).unwrap().to_bits(), predict(&params, seq).unwrap().to_bits());
}

#[test]
fn malformed_samples_are_rejected() {
    let bad = "x1,x2\n0.1,0.2\n0.3\n";
    assert!(io::read_samples(bad.as_bytes()).is_err());
    let nan = "0.1,abc\n";
    assert!(io::read_samples(nan.as_bytes()).is_err());
}
