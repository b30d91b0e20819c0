#![allow(dead_code)]

use proptest::prelude::*;
use rand::Rng;
use spikeguard::events::{Event, EventStream, Polarity};

/// Streams up to `max_side` x `max_side` with up to `max_events` events
/// whose timestamps stay below `max_t`.
pub fn stream_strategy(
    max_side: u16,
    max_events: usize,
    max_t: u64,
) -> impl Strategy<Value = EventStream> {
    (1..=max_side, 1..=max_side)
        .prop_flat_map(move |(w, h)| {
            let ev = (0..w, 0..h, any::<bool>(), 0..max_t).prop_map(|(x, y, on, t)| Event {
                x,
                y,
                polarity: if on { Polarity::On } else { Polarity::Off },
                timestamp: t,
            });
            (
                Just(w),
                Just(h),
                prop::collection::vec(ev, 0..=max_events),
                prop::option::of(0u32..10),
            )
        })
        .prop_map(move |(w, h, events, label)| {
            EventStream::new(w, h, events, label, max_t).unwrap()
        })
}

/// Same shape as [`stream_strategy`] but driven by a plain RNG, for the
/// fixed-count acceptance loops.
pub fn random_stream(
    rng: &mut impl Rng,
    max_side: u16,
    max_events: usize,
    max_t: u64,
) -> EventStream {
    let w = rng.random_range(1..=max_side);
    let h = rng.random_range(1..=max_side);
    let n = rng.random_range(0..=max_events);
    // Mix of dense and sparse timings so the filter sees both outcomes.
    let span = if rng.random_bool(0.5) {
        max_t
    } else {
        max_t / 20 + 1
    };
    let events = (0..n)
        .map(|_| Event {
            x: rng.random_range(0..w),
            y: rng.random_range(0..h),
            polarity: if rng.random_bool(0.5) {
                Polarity::On
            } else {
                Polarity::Off
            },
            timestamp: rng.random_range(0..span),
        })
        .collect();
    let label = rng.random_bool(0.5).then(|| rng.random_range(0..10));
    EventStream::new(w, h, events, label, max_t).unwrap()
}

pub fn is_subsequence(small: &[Event], big: &[Event]) -> bool {
    let mut it = big.iter();
    small.iter().all(|e| it.any(|b| b == e))
}

pub mod gradcheck {
    use rand::Rng;
    use spikeguard::events::FrameTensor;
    use spikeguard::snn::{
        backward, Architecture, InputGeometry, Network, NeuronParams, SurrogateConfig,
    };

    pub struct Check {
        pub max_rel_err: f64,
        pub checked: usize,
        pub conv: bool,
    }

    fn loss(net: &Network, frames: &FrameTensor, c: &[f64], sg: SurrogateConfig) -> f64 {
        let pass = net.forward_smooth(frames, sg).unwrap();
        pass.counts.iter().zip(c).map(|(a, b)| a * b).sum()
    }

    fn rel(a: f64, n: f64) -> f64 {
        (a - n).abs() / a.abs().max(n.abs()).max(1e-3)
    }

    /// Builds a small random network (dense or convolutional), a random
    /// input and a random linear loss on the output counts, then compares
    /// the backward pass against central differences on a sample of input
    /// and weight coordinates.
    pub fn random_case(rng: &mut impl Rng) -> Check {
        let conv = rng.random_bool(0.4);
        let geom = InputGeometry {
            bins: rng.random_range(2..=5),
            height: rng.random_range(4..=7),
            width: rng.random_range(4..=7),
        };
        let classes = rng.random_range(2..=4);
        let arch = if conv {
            Architecture::Conv {
                channels: (rng.random_range(1..=3), rng.random_range(1..=3)),
                hidden: rng.random_range(2..=5),
            }
        } else {
            Architecture::Mlp {
                hidden: (0..rng.random_range(1..=2))
                    .map(|_| rng.random_range(2..=6))
                    .collect(),
            }
        };
        let neuron = NeuronParams {
            threshold: rng.random_range(0.5..1.5),
            leak: rng.random_range(0.5..0.95),
        };
        let sg = SurrogateConfig {
            slope: rng.random_range(1.0..10.0),
        };
        let mut net = Network::build(
            &arch,
            geom,
            classes,
            neuron,
            rng.random_range(1.0..3.0),
            rng.random(),
        )
        .unwrap();
        let values = (0..geom.bins * 2 * geom.height * geom.width)
            .map(|_| {
                if rng.random_bool(0.4) {
                    rng.random_range(0.0..3.0)
                } else {
                    0.0
                }
            })
            .collect();
        let mut frames =
            FrameTensor::from_values(geom.bins, geom.height, geom.width, 1000, values).unwrap();
        let c: Vec<f64> = (0..classes).map(|_| rng.random_range(-1.0..1.0)).collect();

        let pass = net.forward_smooth(&frames, sg).unwrap();
        let g = backward(&net, &pass, &c, sg, true, true);
        let gi = g.input.unwrap();
        let h = 1e-6;
        let mut worst = 0.0f64;
        let mut checked = 0;

        for _ in 0..12 {
            let i = rng.random_range(0..gi.len());
            let x = frames.values()[i];
            frames.values_mut()[i] = x + h;
            let up = loss(&net, &frames, &c, sg);
            frames.values_mut()[i] = x - h;
            let down = loss(&net, &frames, &c, sg);
            frames.values_mut()[i] = x;
            worst = worst.max(rel(gi[i], (up - down) / (2.0 * h)));
            checked += 1;
        }
        for li in 0..net.layers().len() {
            for _ in 0..6 {
                let k = rng.random_range(0..net.layers()[li].weights.len());
                let w = net.layers()[li].weights[k];
                net.layers_mut()[li].weights[k] = w + h;
                let up = loss(&net, &frames, &c, sg);
                net.layers_mut()[li].weights[k] = w - h;
                let down = loss(&net, &frames, &c, sg);
                net.layers_mut()[li].weights[k] = w;
                worst = worst.max(rel(g.weights[li][k], (up - down) / (2.0 * h)));
                checked += 1;
            }
        }
        Check {
            max_rel_err: worst,
            checked,
            conv,
        }
    }
}
