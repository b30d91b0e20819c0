mod common;

use rand::Rng;
use spikeguard::dataset::{synthetic_split, Binning, Split, SyntheticSpec};
use spikeguard::events::FrameTensor;
use spikeguard::seed;
use spikeguard::snn::{
    evaluate, load_checkpoint, read_checkpoint, save_checkpoint, train, write_checkpoint,
    Architecture, InputGeometry, Network, NeuronParams, TrainConfig,
};

#[test]
fn surrogate_gradients_match_finite_differences() {
    let mut rng = seed::rng(11);
    let mut convs = 0;
    for case in 0..60 {
        let c = common::gradcheck::random_case(&mut rng);
        convs += usize::from(c.conv);
        assert!(
            c.max_rel_err < 1e-4,
            "case {case}: relative error {}",
            c.max_rel_err
        );
    }
    assert!(convs > 0);
}

fn tiny_spec() -> (SyntheticSpec, Binning) {
    (
        SyntheticSpec {
            classes: 2,
            width: 12,
            height: 12,
            train_per_class: 12,
            test_per_class: 6,
            ..SyntheticSpec::default()
        },
        Binning {
            num_bins: 10,
            bin_width_us: 30_000,
        },
    )
}

fn tiny_net(seed_value: u64) -> Network {
    let geom = InputGeometry {
        bins: 10,
        height: 12,
        width: 12,
    };
    Network::build(
        &Architecture::Mlp { hidden: vec![24] },
        geom,
        2,
        NeuronParams::default(),
        1.0,
        seed_value,
    )
    .unwrap()
}

#[test]
fn training_is_deterministic_for_a_seed() {
    let (spec, binning) = tiny_spec();
    let data = synthetic_split(&spec, binning, Split::Train, 4).unwrap();
    let cfg = TrainConfig {
        epochs: 2,
        seed: 9,
        ..TrainConfig::default()
    };
    let (a, ha) = train(&tiny_net(1), &data, None, &cfg).unwrap();
    let (b, hb) = train(&tiny_net(1), &data, None, &cfg).unwrap();
    assert_eq!(write_checkpoint(&a), write_checkpoint(&b));
    assert_eq!(ha, hb);
    let (c, _) = train(&tiny_net(1), &data, None, &TrainConfig { seed: 10, ..cfg }).unwrap();
    assert_ne!(write_checkpoint(&a), write_checkpoint(&c));
}

#[test]
fn a_small_set_can_be_memorised() {
    let spec = SyntheticSpec {
        train_per_class: 3,
        ..SyntheticSpec::default()
    };
    let binning = Binning::default();
    let data = synthetic_split(&spec, binning, Split::Train, 4).unwrap();
    let geom = InputGeometry::of(&data[0].frames);
    let net = Network::build(
        &Architecture::Mlp { hidden: vec![64] },
        geom,
        4,
        NeuronParams::default(),
        1.0,
        3,
    )
    .unwrap();
    let cfg = TrainConfig {
        epochs: 15,
        seed: 2,
        ..TrainConfig::default()
    };
    let (net, hist) = train(&net, &data, None, &cfg).unwrap();
    let acc = evaluate(&net, &data, None, None).unwrap().accuracy;
    assert_eq!(
        acc,
        1.0,
        "{:?}",
        hist.epochs
            .iter()
            .map(|e| (e.loss, e.train_accuracy))
            .collect::<Vec<_>>()
    );
    assert!(hist.epochs.last().unwrap().loss < hist.epochs[0].loss);
}

#[test]
fn untrained_networks_are_near_chance() {
    // Random inputs carry no label information, so correct predictions are
    // Binomial(n, 1/k) over networks and inputs.
    let mut rng = seed::rng(5);
    let (n, k) = (400usize, 4usize);
    let geom = InputGeometry {
        bins: 4,
        height: 6,
        width: 6,
    };
    let mut correct = 0;
    for i in 0..n {
        let net = Network::build(
            &Architecture::Mlp { hidden: vec![8] },
            geom,
            k,
            NeuronParams::default(),
            2.0,
            i as u64,
        )
        .unwrap();
        let values = (0..4 * 2 * 36)
            .map(|_| f64::from(rng.random_range(0u8..3)))
            .collect();
        let frames = FrameTensor::from_values(4, 6, 6, 1000, values).unwrap();
        let label = rng.random_range(0..k as u32);
        correct += usize::from(net.predict(&frames).unwrap() == label);
    }
    let mean = n as f64 / k as f64;
    let sd = (n as f64 * 0.25 * 0.75).sqrt();
    assert!(
        (correct as f64 - mean).abs() < 4.0 * sd,
        "{correct} correct of {n}"
    );
}

#[test]
fn checkpoints_round_trip_losslessly() {
    let dir = tempfile::tempdir().unwrap();
    let mut net = tiny_net(8);
    net.layers_mut()[0].weights[0] = 0.1 + 0.2;
    net.layers_mut()[1].weights[0] = -1e-300;
    let path = dir.path().join("ckpt.json");
    save_checkpoint(&net, &path).unwrap();
    let back = load_checkpoint(&path).unwrap();
    assert_eq!(back, net);
    assert_eq!(write_checkpoint(&back), write_checkpoint(&net));
    assert!(
        read_checkpoint(b"{\"format\":\"spiking-network\",\"version\":99,\"network\":{}}").is_err()
    );
    assert!(read_checkpoint(b"not json").is_err());
}
