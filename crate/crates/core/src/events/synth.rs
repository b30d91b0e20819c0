//! Synthetic gesture generator.
//!
//! A gesture is a bright bar or a rotating hand whose leading edge emits ON
//! events and whose trailing edge emits OFF events. Per-sample variation
//! (speed, extent, centre, start angle) is drawn from the seed, and
//! independent background activity is added as a homogeneous Poisson process.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use super::{Event, EventStream, Polarity};
use crate::{seed, Error, Result};

const TICK_US: u64 = 1000;
const FIRE_PROB: f64 = 0.3;
const ARC_LAG_RAD: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gesture {
    LeftSweep,
    RightSweep,
    ClockwiseArc,
    CounterClockwiseArc,
    UpSweep,
    DownSweep,
}

impl Gesture {
    pub const ALL: [Gesture; 6] = [
        Gesture::LeftSweep,
        Gesture::RightSweep,
        Gesture::ClockwiseArc,
        Gesture::CounterClockwiseArc,
        Gesture::UpSweep,
        Gesture::DownSweep,
    ];

    pub fn from_class(class: u32) -> Option<Self> {
        Self::ALL.get(class as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Gesture::LeftSweep => "left-sweep",
            Gesture::RightSweep => "right-sweep",
            Gesture::ClockwiseArc => "clockwise-arc",
            Gesture::CounterClockwiseArc => "counterclockwise-arc",
            Gesture::UpSweep => "up-sweep",
            Gesture::DownSweep => "down-sweep",
        }
    }
}

/// Analytic motion of a gesture's two edges.
#[derive(Debug, Clone, PartialEq)]
pub enum Trajectory {
    /// A bar moving along one axis. With `vertical_motion` false the edges
    /// are vertical lines moving along x; otherwise horizontal lines moving
    /// along y.
    Sweep {
        vertical_motion: bool,
        lead_start: f64,
        velocity: f64,
        bar_width: f64,
        span: (f64, f64),
    },
    /// A hand rotating about a centre. Positive angular velocity is clockwise
    /// on screen (y grows downwards).
    Arc {
        centre: (f64, f64),
        radius: (f64, f64),
        start_angle: f64,
        angular_velocity: f64,
    },
}

type Segment = ((f64, f64), (f64, f64));

impl Trajectory {
    /// Leading (ON) and trailing (OFF) edge segments at time `t_us`.
    pub fn edges_at(&self, t_us: f64) -> [(Segment, Polarity); 2] {
        match *self {
            Trajectory::Sweep {
                vertical_motion,
                lead_start,
                velocity,
                bar_width,
                span: (lo, hi),
            } => {
                let lead = lead_start + velocity * t_us;
                let trail = lead - velocity.signum() * bar_width;
                let seg = |pos: f64| {
                    if vertical_motion {
                        ((lo, pos), (hi, pos))
                    } else {
                        ((pos, lo), (pos, hi))
                    }
                };
                [(seg(lead), Polarity::On), (seg(trail), Polarity::Off)]
            }
            Trajectory::Arc {
                centre: (cx, cy),
                radius: (r0, r1),
                start_angle,
                angular_velocity,
            } => {
                let lead = start_angle + angular_velocity * t_us;
                let trail = lead - angular_velocity.signum() * ARC_LAG_RAD;
                let seg = |phi: f64| {
                    let (s, c) = phi.sin_cos();
                    ((cx + r0 * c, cy + r0 * s), (cx + r1 * c, cy + r1 * s))
                };
                [(seg(lead), Polarity::On), (seg(trail), Polarity::Off)]
            }
        }
    }

    /// Distance from pixel `(x, y)` to the nearest edge carrying `polarity`
    /// at time `t_us`.
    pub fn distance(&self, x: f64, y: f64, polarity: Polarity, t_us: f64) -> f64 {
        self.edges_at(t_us)
            .iter()
            .filter(|(_, p)| *p == polarity)
            .map(|(seg, _)| point_segment_distance((x, y), *seg))
            .fold(f64::INFINITY, f64::min)
    }

    /// Number of sample points along each edge.
    fn points_per_edge(&self) -> usize {
        match *self {
            Trajectory::Sweep { span: (lo, hi), .. } => (hi - lo).floor() as usize + 1,
            Trajectory::Arc {
                radius: (r0, r1), ..
            } => (r1 - r0).floor() as usize + 1,
        }
    }

    /// Position of point `i` along an edge segment.
    fn point_on(seg: Segment, i: usize, n: usize) -> (f64, f64) {
        let ((x0, y0), (x1, y1)) = seg;
        let len = ((x1 - x0).powi(2) + (y1 - y0).powi(2)).sqrt();
        let f = if n <= 1 || len == 0.0 {
            0.0
        } else {
            (i as f64 / len).min(1.0)
        };
        (x0 + f * (x1 - x0), y0 + f * (y1 - y0))
    }
}

fn point_segment_distance(p: (f64, f64), seg: Segment) -> f64 {
    let ((x0, y0), (x1, y1)) = seg;
    let (dx, dy) = (x1 - x0, y1 - y0);
    let len2 = dx * dx + dy * dy;
    let f = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - x0) * dx + (p.1 - y0) * dy) / len2).clamp(0.0, 1.0)
    };
    let (qx, qy) = (x0 + f * dx, y0 + f * dy);
    ((p.0 - qx).powi(2) + (p.1 - qy).powi(2)).sqrt()
}

/// The per-sample trajectory that [`synth_gesture`] draws for these
/// arguments.
pub fn gesture_trajectory(
    gesture: Gesture,
    width: u16,
    height: u16,
    duration_us: u64,
    seed_value: u64,
) -> Trajectory {
    let mut rng = seed::rng(seed::derive(seed_value, "gesture-trajectory"));
    let (w, h) = (f64::from(width), f64::from(height));
    let dur = duration_us.max(1) as f64;
    let sweep = |rng: &mut rand_chacha::ChaCha8Rng, vertical_motion: bool, forward: bool| {
        let (along, across) = if vertical_motion { (h, w) } else { (w, h) };
        let bar_width = (along / 10.0).round().max(2.0);
        let travel = (along + bar_width + 2.0) * rng.random_range(0.85..1.15);
        let lead_start = if forward {
            rng.random_range(-2.0..0.0)
        } else {
            along - 1.0 + rng.random_range(0.0..2.0)
        };
        let velocity = if forward { travel / dur } else { -travel / dur };
        let lo = (across * rng.random_range(0.1..0.3)).floor();
        let hi = (across * rng.random_range(0.7..0.9)).floor();
        Trajectory::Sweep {
            vertical_motion,
            lead_start,
            velocity,
            bar_width,
            span: (lo, hi),
        }
    };
    match gesture {
        Gesture::LeftSweep => sweep(&mut rng, false, false),
        Gesture::RightSweep => sweep(&mut rng, false, true),
        Gesture::UpSweep => sweep(&mut rng, true, false),
        Gesture::DownSweep => sweep(&mut rng, true, true),
        Gesture::ClockwiseArc | Gesture::CounterClockwiseArc => {
            let m = w.min(h);
            let jitter = (m / 16.0).max(0.5);
            let centre = (
                (w - 1.0) / 2.0 + rng.random_range(-jitter..jitter),
                (h - 1.0) / 2.0 + rng.random_range(-jitter..jitter),
            );
            let r1 = (m * rng.random_range(0.3..0.4)).max(2.0);
            let sign = if gesture == Gesture::ClockwiseArc {
                1.0
            } else {
                -1.0
            };
            Trajectory::Arc {
                centre,
                radius: (2.0, r1),
                start_angle: rng.random_range(0.0..TAU),
                angular_velocity: sign * 2.0 * PI * rng.random_range(0.8..1.2) / dur,
            }
        }
    }
}

/// Generates one labelled gesture sample. `noise_rate` is background
/// activity in events per second per pixel.
pub fn synth_gesture(
    class: u32,
    width: u16,
    height: u16,
    duration_us: u64,
    noise_rate: f64,
    seed_value: u64,
) -> Result<EventStream> {
    let gesture = Gesture::from_class(class).ok_or_else(|| {
        Error::InvalidParameter(format!(
            "gesture class {class} not in 0..{}",
            Gesture::ALL.len()
        ))
    })?;
    if width == 0 || height == 0 || duration_us == 0 {
        return Err(Error::InvalidParameter(
            "gesture geometry and duration must be positive".into(),
        ));
    }
    if !(noise_rate >= 0.0 && noise_rate.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "noise rate {noise_rate} must be a non-negative number"
        )));
    }

    let traj = gesture_trajectory(gesture, width, height, duration_us, seed_value);
    let mut rng = seed::rng(seed::derive(seed_value, "gesture-events"));
    let n = traj.points_per_edge();
    let mut events = Vec::new();
    let mut tick = 0;
    while tick < duration_us {
        let span = TICK_US.min(duration_us - tick);
        for i in 0..n {
            for edge in 0..2 {
                if !rng.random_bool(FIRE_PROB) {
                    continue;
                }
                let t = tick + rng.random_range(0..span);
                let (seg, polarity) = traj.edges_at(t as f64)[edge];
                let (px, py) = Trajectory::point_on(seg, i, n);
                let (x, y) = (px.round(), py.round());
                if x >= 0.0 && y >= 0.0 && x < f64::from(width) && y < f64::from(height) {
                    events.push(Event::new(x as u16, y as u16, polarity, t));
                }
            }
        }
        tick += span;
    }

    let expected = noise_rate * duration_us as f64 * 1e-6 * f64::from(width) * f64::from(height);
    if expected > 0.0 {
        let mut noise_rng = seed::rng(seed::derive(seed_value, "gesture-noise"));
        let count = Poisson::new(expected)
            .map_err(|e| Error::InvalidParameter(format!("noise rate: {e}")))?
            .sample(&mut noise_rng) as u64;
        for _ in 0..count {
            let polarity = if noise_rng.random_bool(0.5) {
                Polarity::On
            } else {
                Polarity::Off
            };
            events.push(Event::new(
                noise_rng.random_range(0..width),
                noise_rng.random_range(0..height),
                polarity,
                noise_rng.random_range(0..duration_us),
            ));
        }
    }
    EventStream::new(width, height, events, Some(class), duration_us)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        let a = synth_gesture(2, 32, 32, 300_000, 1.0, 11).unwrap();
        let b = synth_gesture(2, 32, 32, 300_000, 1.0, 11).unwrap();
        let c = synth_gesture(2, 32, 32, 300_000, 1.0, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn noiseless_events_follow_the_edges() {
        for class in 0..Gesture::ALL.len() as u32 {
            for s in 0..5 {
                let g = Gesture::from_class(class).unwrap();
                let traj = gesture_trajectory(g, 32, 24, 300_000, s);
                let stream = synth_gesture(class, 32, 24, 300_000, 0.0, s).unwrap();
                assert!(
                    stream.len() > 100,
                    "{} produced {} events",
                    g.name(),
                    stream.len()
                );
                for e in stream.events() {
                    let d = traj.distance(
                        f64::from(e.x),
                        f64::from(e.y),
                        e.polarity,
                        e.timestamp as f64,
                    );
                    assert!(
                        d <= 1.0,
                        "{} event {:?} is {d} px off its edge",
                        g.name(),
                        e
                    );
                }
            }
        }
    }

    #[test]
    fn background_rate_matches_poisson_expectation() {
        // Noise-only count = total minus the noiseless stream with the same seed.
        let mut total = 0.0;
        let runs = 8;
        for s in 0..runs {
            let noisy = synth_gesture(0, 32, 32, 1_000_000, 10.0, s).unwrap();
            let clean = synth_gesture(0, 32, 32, 1_000_000, 0.0, s).unwrap();
            let n = (noisy.len() - clean.len()) as f64;
            let mean = 10.0 * 32.0 * 32.0;
            assert!((n - mean).abs() <= 3.0 * mean.sqrt(), "count {n}");
            total += n;
        }
        let mean = 10.0 * 32.0 * 32.0 * runs as f64;
        assert!((total - mean).abs() <= 3.0 * mean.sqrt());
    }

    #[test]
    fn rejects_unknown_class_and_bad_rate() {
        assert!(synth_gesture(6, 8, 8, 1000, 0.0, 0).is_err());
        assert!(synth_gesture(0, 8, 8, 1000, -1.0, 0).is_err());
        assert!(synth_gesture(0, 0, 8, 1000, 0.0, 0).is_err());
    }
}
