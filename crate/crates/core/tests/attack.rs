use proptest::prelude::*;
use spikeguard::attack::{
    attack_dataset, attack_loss, attack_sample, inject_random_noise, AttackConfig, ClipBound,
    FrameMask, NoiseKind, Placement,
};
use spikeguard::dataset::{synthetic_split, Binning, Sample, Split, SyntheticSpec};
use spikeguard::events::FrameTensor;
use spikeguard::filter::FilterParams;
use spikeguard::snn::{Architecture, InputGeometry, Network, NeuronParams};
use spikeguard::Error;

fn setup() -> (Network, Vec<Sample>) {
    let spec = SyntheticSpec {
        train_per_class: 1,
        test_per_class: 1,
        ..SyntheticSpec::default()
    };
    let binning = Binning {
        num_bins: 6,
        bin_width_us: 50_000,
    };
    let data = synthetic_split(&spec, binning, Split::Test, 3).unwrap();
    let net = Network::build(
        &Architecture::Mlp { hidden: vec![16] },
        InputGeometry::of(&data[0].frames),
        4,
        NeuronParams::default(),
        1.5,
        2,
    )
    .unwrap();
    (net, data)
}

#[test]
fn empty_mask_leaves_input_untouched() {
    let (net, data) = setup();
    let mut cfg = AttackConfig::with_defaults(6);
    cfg.mask = FrameMask::none(6);
    let out = attack_sample(&net, &data[0].frames, data[0].label, &cfg, None).unwrap();
    assert!(out.perturbation.delta.values().iter().all(|v| *v == 0.0));
    assert_eq!(out.perturbed, data[0].frames);
    assert_eq!(
        net.forward(&out.perturbed).unwrap().counts,
        net.forward(&data[0].frames).unwrap().counts
    );
}

#[test]
fn perturbation_stays_on_masked_bins_and_inside_the_clip_range() {
    let (net, data) = setup();
    for clip in [ClipBound::SampleMax, ClipBound::Fixed(1.0)] {
        for filter in [None, Some(FilterParams::new(2, 20.0).unwrap())] {
            let cfg = AttackConfig {
                mask: FrameMask::parse("1,4", 6).unwrap(),
                max_iterations: 4,
                step_size: 50.0,
                clip,
                ..AttackConfig::with_defaults(6)
            };
            for s in &data {
                let out = attack_sample(&net, &s.frames, s.label, &cfg, filter).unwrap();
                let c_max = clip.resolve(&s.frames);
                for b in 0..6 {
                    let delta = out.perturbation.delta.bin(b);
                    if b != 1 && b != 4 {
                        assert!(delta.iter().all(|v| *v == 0.0), "bin {b} touched");
                        assert_eq!(out.perturbed.bin(b), s.frames.bin(b));
                    } else {
                        assert!(out
                            .perturbed
                            .bin(b)
                            .iter()
                            .all(|v| (0.0..=c_max).contains(v)));
                    }
                }
                assert_eq!(out.loss_trace.len(), 4);
            }
        }
    }
}

#[test]
fn attack_is_deterministic() {
    let (net, data) = setup();
    let cfg = AttackConfig::with_defaults(6);
    let a = attack_dataset(&net, &data, &cfg, Placement::default()).unwrap();
    let b = attack_dataset(&net, &data, &cfg, Placement::default()).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.report.records.len(), data.len());
    let one = attack_dataset(&net, &data[..1], &cfg, Placement::default()).unwrap();
    assert_eq!(one.report.records.len(), 1);
}

#[test]
fn shape_errors() {
    let (net, data) = setup();
    let cfg = AttackConfig::with_defaults(5);
    assert!(matches!(
        attack_sample(&net, &data[0].frames, 0, &cfg, None),
        Err(Error::MaskLengthMismatch {
            expected: 6,
            found: 5
        })
    ));
    let wrong = FrameTensor::zeros(6, 3, 3, 50_000);
    assert!(matches!(
        attack_sample(&net, &wrong, 0, &AttackConfig::with_defaults(6), None),
        Err(Error::ShapeMismatch(_))
    ));
    assert!(matches!(
        attack_dataset(
            &net,
            &[],
            &AttackConfig::with_defaults(6),
            Placement::default()
        ),
        Err(Error::EmptyDataset)
    ));
}

#[test]
fn loss_examples() {
    assert_eq!(attack_loss(0.0), 0.0);
    assert!((attack_loss(0.5) - std::f64::consts::LN_2).abs() < 1e-12);
    assert!(attack_loss(1.0).is_finite());
}

proptest! {
    #[test]
    fn loss_is_increasing(a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(attack_loss(lo) <= attack_loss(hi));
        prop_assert_eq!(attack_loss(a), -(1.0 - a).ln());
    }

    #[test]
    fn noise_respects_range_and_seed(m in 0.0f64..2.0, seed in any::<u64>(), normal in any::<bool>()) {
        let kind = if normal { NoiseKind::Normal } else { NoiseKind::Uniform };
        let values: Vec<f64> = (0..2 * 2 * 3 * 3).map(|i| f64::from(i % 4)).collect();
        let f = FrameTensor::from_values(2, 3, 3, 10, values).unwrap();
        let a = inject_random_noise(&f, kind, m, seed).unwrap();
        prop_assert_eq!(&a, &inject_random_noise(&f, kind, m, seed).unwrap());
        prop_assert!(a.values().iter().all(|v| (0.0..=3.0).contains(v)));
        if kind == NoiseKind::Uniform {
            for (x, y) in a.values().iter().zip(f.values()) {
                prop_assert!((x - y).abs() <= m + 1e-12);
            }
        }
    }
}

#[test]
fn zero_noise_is_identity() {
    let f = FrameTensor::from_values(1, 2, 2, 10, vec![1.0, 0.0, 2.0, 3.0, 0.5, 0.0, 0.0, 1.0])
        .unwrap();
    for kind in [NoiseKind::Uniform, NoiseKind::Normal] {
        assert_eq!(inject_random_noise(&f, kind, 0.0, 1).unwrap(), f);
    }
    assert!(inject_random_noise(&f, NoiseKind::Normal, -1.0, 1).is_err());
}
