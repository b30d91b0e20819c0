mod common;

use common::{is_subsequence, stream_strategy};
use proptest::prelude::*;
use spikeguard::events::{accumulate, to_events, Event, EventStream, FrameTensor, Polarity};
use spikeguard::filter::{filter_events, filter_events_oracle, filter_frames, FilterParams};

fn params() -> impl Strategy<Value = FilterParams> {
    (
        0u32..5,
        prop::sample::select(vec![0.001, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 500.0]),
    )
        .prop_map(|(s, t_ms)| FilterParams::new(s, t_ms).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn optimised_filter_matches_oracle(s in stream_strategy(48, 300, 60_000), p in params()) {
        prop_assert_eq!(filter_events(&s, p), filter_events_oracle(&s, p));
    }

    #[test]
    fn output_is_a_subsequence_with_same_metadata(s in stream_strategy(32, 200, 50_000), p in params()) {
        let f = filter_events(&s, p);
        prop_assert!(is_subsequence(f.events(), s.events()));
        prop_assert_eq!((f.width(), f.height(), f.label(), f.duration_us()), (s.width(), s.height(), s.label(), s.duration_us()));
    }

    #[test]
    fn larger_threshold_keeps_more(s in stream_strategy(32, 200, 50_000), sp in 0u32..5, a in 0.01f64..100.0, b in 0.01f64..100.0) {
        let (t1, t2) = if a <= b { (a, b) } else { (b, a) };
        let lo = filter_events(&s, FilterParams::new(sp, t1).unwrap());
        let hi = filter_events(&s, FilterParams::new(sp, t2).unwrap());
        prop_assert!(is_subsequence(lo.events(), hi.events()));
    }

    #[test]
    fn larger_radius_keeps_more(s in stream_strategy(32, 200, 50_000), a in 0u32..6, b in 0u32..6, t in 0.01f64..100.0) {
        let (s1, s2) = (a.min(b), a.max(b));
        let lo = filter_events(&s, FilterParams::new(s1, t).unwrap());
        let hi = filter_events(&s, FilterParams::new(s2, t).unwrap());
        prop_assert!(is_subsequence(lo.events(), hi.events()));
    }

    #[test]
    fn frame_filter_only_removes_whole_counts(s in stream_strategy(16, 100, 20_000), p in params()) {
        let frames = accumulate(&s, 4, 5_000).unwrap();
        let f = filter_frames(&frames, p);
        prop_assert!(f.same_shape(&frames));
        for (a, b) in f.values().iter().zip(frames.values()) {
            prop_assert!(*a <= *b && *a >= 0.0 && a.fract() == 0.0);
        }
    }
}

#[test]
fn isolated_event_goes_but_supported_event_stays() {
    let ev = |x, y, t| Event::new(x, y, Polarity::On, t);
    let s = EventStream::new(
        10,
        10,
        vec![ev(1, 1, 10_000), ev(2, 1, 12_000), ev(8, 8, 40_000)],
        None,
        50_000,
    )
    .unwrap();
    let kept = filter_events(&s, FilterParams::new(1, 5.0).unwrap());
    assert_eq!(kept.events(), &[ev(2, 1, 12_000)]);
}

#[test]
fn frame_path_drops_sub_half_counts() {
    let mut f = FrameTensor::zeros(2, 4, 4, 1000);
    f.set(0, 1, 1, 1, 0.4);
    f.set(1, 0, 2, 2, 0.49);
    let out = filter_frames(&f, FilterParams::new(4, 500.0).unwrap());
    assert_eq!(out.sum(), 0.0);
    assert_eq!(to_events(&f.rounded()).len(), 0);
}
