//! Spatio-temporal background-activity filter.
//!
//! Events are processed oldest to newest against a per-pixel timestamp map
//! `M` (zero-initialised, sized to the sensor). Each event first stamps its
//! timestamp onto every in-bounds pixel of the `(2s+1)^2` square around it,
//! except its own pixel, and is then dropped when `t_e - M[x_e][y_e] > T`.
//! Stamping happens for dropped events too. Polarity is ignored.

use serde::{Deserialize, Serialize};

use crate::events::{accumulate, to_events, EventStream, FrameTensor};
use crate::{Error, Result};

/// Spatial radius `s` in pixels and temporal threshold in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterParams {
    pub s: u32,
    pub t_ms: f64,
}

impl FilterParams {
    pub fn new(s: u32, t_ms: f64) -> Result<Self> {
        if !(t_ms > 0.0 && t_ms.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "filter threshold t_ms must be positive, got {t_ms}"
            )));
        }
        Ok(Self { s, t_ms })
    }

    /// Largest integer age (in microseconds) that still passes the filter.
    fn max_age_us(&self) -> u64 {
        let t_us = self.t_ms * 1000.0;
        if t_us >= u64::MAX as f64 {
            u64::MAX
        } else {
            t_us.floor() as u64
        }
    }
}

/// Keep/drop decision per event of `stream`, in stream order.
///
/// Instead of stamping the neighbourhood on every event, this keeps the last
/// timestamp seen at each pixel. Because events arrive in timestamp order,
/// the value the stamping scheme would hold at `M[x_e][y_e]` is the maximum of
/// the last-seen times over the neighbourhood excluding the centre, so a
/// single read pass with early exit gives the same decisions.
pub fn filter_mask(stream: &EventStream, params: FilterParams) -> Vec<bool> {
    let w = usize::from(stream.width());
    let h = usize::from(stream.height());
    let s = params.s as usize;
    let max_age = params.max_age_us();
    let mut last_seen = vec![0u64; w * h];
    let mut keep = Vec::with_capacity(stream.len());

    for e in stream.events() {
        let (x, y, t) = (usize::from(e.x), usize::from(e.y), e.timestamp);
        // Zero-initialised map: an event younger than T passes on its own.
        let mut kept = t <= max_age;
        if !kept {
            let oldest_ok = t - max_age;
            let (x0, x1) = (x.saturating_sub(s), (x + s).min(w - 1));
            let (y0, y1) = (y.saturating_sub(s), (y + s).min(h - 1));
            'scan: for j in y0..=y1 {
                let row = &last_seen[j * w..(j + 1) * w];
                for (i, &seen) in row.iter().enumerate().take(x1 + 1).skip(x0) {
                    if seen >= oldest_ok && (i != x || j != y) {
                        kept = true;
                        break 'scan;
                    }
                }
            }
        }
        keep.push(kept);
        last_seen[y * w + x] = t;
    }
    keep
}

/// Runs the filter over an event stream. The result is a subsequence of the
/// input with the same geometry, label and duration.
pub fn filter_events(stream: &EventStream, params: FilterParams) -> EventStream {
    stream.retain_mask(&filter_mask(stream, params))
}

/// Direct, unoptimised form of the filter: stamps the full neighbourhood for
/// every event. Used as the reference for [`filter_events`].
pub fn filter_events_oracle(stream: &EventStream, params: FilterParams) -> EventStream {
    let w = i64::from(stream.width());
    let h = i64::from(stream.height());
    let s = i64::from(params.s);
    let threshold_us = params.t_ms * 1000.0;
    let mut m = vec![vec![0i64; h as usize]; w as usize];
    let mut keep = Vec::with_capacity(stream.len());
    for e in stream.events() {
        let (xe, ye, te) = (i64::from(e.x), i64::from(e.y), e.timestamp as i64);
        for i in xe - s..=xe + s {
            for j in ye - s..=ye + s {
                if i < 0 || j < 0 || i >= w || j >= h {
                    continue;
                }
                if !(i == xe && j == ye) {
                    m[i as usize][j as usize] = te;
                }
            }
        }
        let age = te - m[xe as usize][ye as usize];
        keep.push(age as f64 <= threshold_us);
    }
    stream.retain_mask(&keep)
}

/// Applies the filter to frames of events by converting them to events,
/// filtering and re-binning with the same bin parameters.
pub fn filter_frames(frames: &FrameTensor, params: FilterParams) -> FrameTensor {
    let filtered = filter_events(&to_events(frames), params);
    accumulate(&filtered, frames.num_bins(), frames.bin_width_us())
        .expect("re-binning covers the span produced by to_events")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::{Event, Polarity};

    fn stream(w: u16, h: u16, evs: &[(u16, u16, u64)]) -> EventStream {
        let evs = evs
            .iter()
            .map(|&(x, y, t)| Event::new(x, y, Polarity::On, t))
            .collect();
        EventStream::new(w, h, evs, None, 1_000_000).unwrap()
    }

    fn both(s: &EventStream, p: FilterParams) -> EventStream {
        let fast = filter_events(s, p);
        assert_eq!(fast, filter_events_oracle(s, p));
        fast
    }

    #[test]
    fn lone_event_is_removed() {
        for s in 0..4 {
            let out = both(
                &stream(16, 16, &[(5, 5, 10_000)]),
                FilterParams::new(s, 5.0).unwrap(),
            );
            assert!(out.is_empty());
        }
    }

    #[test]
    fn early_lone_event_passes_against_zero_map() {
        let out = both(
            &stream(16, 16, &[(5, 5, 3_000)]),
            FilterParams::new(1, 5.0).unwrap(),
        );
        assert_eq!(out.len(), 1);
    }

    #[test]
    fn neighbour_validates_the_later_event() {
        let s = stream(16, 16, &[(5, 5, 10_000), (6, 5, 12_000)]);
        let out = both(&s, FilterParams::new(1, 5.0).unwrap());
        assert_eq!(out.events(), &[Event::new(6, 5, Polarity::On, 12_000)]);
    }

    #[test]
    fn same_pixel_never_validates_itself() {
        let s = stream(16, 16, &[(5, 5, 10_000), (5, 5, 11_000)]);
        assert!(both(&s, FilterParams::new(1, 5.0).unwrap()).is_empty());
    }

    #[test]
    fn simultaneous_neighbours_validate_in_order() {
        let s = stream(16, 16, &[(5, 5, 10_000), (6, 6, 10_000)]);
        let out = both(&s, FilterParams::new(1, 1.0).unwrap());
        assert_eq!(out.events(), &[Event::new(6, 6, Polarity::On, 10_000)]);
    }

    #[test]
    fn radius_zero_keeps_only_early_events() {
        let s = stream(16, 16, &[(5, 5, 10_000), (5, 6, 10_500), (9, 9, 1_000)]);
        let out = both(&s, FilterParams::new(0, 5.0).unwrap());
        assert_eq!(out.len(), 1);
        assert_eq!(out.events()[0].timestamp, 1_000);
    }

    #[test]
    fn borders_are_skipped() {
        let s = stream(
            4,
            4,
            &[
                (0, 0, 10_000),
                (1, 1, 10_500),
                (3, 3, 20_000),
                (3, 2, 20_100),
            ],
        );
        let out = both(&s, FilterParams::new(2, 1.0).unwrap());
        let kept: Vec<(u16, u16)> = out.events().iter().map(|e| (e.x, e.y)).collect();
        assert_eq!(kept, vec![(1, 1), (3, 2)]);
    }

    #[test]
    fn fractional_threshold() {
        let s = stream(8, 8, &[(1, 1, 10_000), (2, 1, 11_500)]);
        assert_eq!(both(&s, FilterParams::new(1, 1.5).unwrap()).len(), 1);
        assert_eq!(both(&s, FilterParams::new(1, 1.499).unwrap()).len(), 0);
    }

    #[test]
    fn rejects_non_positive_threshold() {
        assert!(FilterParams::new(1, 0.0).is_err());
        assert!(FilterParams::new(1, f64::NAN).is_err());
    }

    #[test]
    fn frames_zero_in_zero_out() {
        let f = FrameTensor::zeros(5, 4, 4, 10_000);
        assert_eq!(filter_frames(&f, FilterParams::new(1, 5.0).unwrap()), f);
    }

    #[test]
    fn isolated_frame_cell_is_removed() {
        // Bin 3 centre is at 35 ms; t = 5 ms is smaller.
        let mut f = FrameTensor::zeros(5, 4, 4, 10_000);
        f.set(3, 1, 2, 2, 1.0);
        let out = filter_frames(&f, FilterParams::new(1, 5.0).unwrap());
        assert_eq!(out.sum(), 0.0);
    }
}
