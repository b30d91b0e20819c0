use serde::{Deserialize, Serialize};

use super::{Event, EventStream, Polarity};
use crate::{Error, Result};

/// Events accumulated into `[num_bins][2][height][width]` spike counts.
/// Channel 0 holds OFF events and channel 1 ON events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameTensor {
    num_bins: usize,
    height: usize,
    width: usize,
    bin_width_us: u64,
    values: Vec<f64>,
}

impl FrameTensor {
    pub fn zeros(num_bins: usize, height: usize, width: usize, bin_width_us: u64) -> Self {
        Self {
            num_bins,
            height,
            width,
            bin_width_us,
            values: vec![0.0; num_bins * 2 * height * width],
        }
    }

    pub fn from_values(
        num_bins: usize,
        height: usize,
        width: usize,
        bin_width_us: u64,
        values: Vec<f64>,
    ) -> Result<Self> {
        let expected = num_bins * 2 * height * width;
        if values.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {num_bins}x2x{height}x{width} tensor",
                values.len()
            )));
        }
        Ok(Self {
            num_bins,
            height,
            width,
            bin_width_us,
            values,
        })
    }

    pub fn num_bins(&self) -> usize {
        self.num_bins
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bin_width_us(&self) -> u64 {
        self.bin_width_us
    }

    /// Number of values in one time bin (both channels).
    pub fn bin_len(&self) -> usize {
        2 * self.height * self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn bin(&self, b: usize) -> &[f64] {
        let n = self.bin_len();
        &self.values[b * n..(b + 1) * n]
    }

    pub fn bin_mut(&mut self, b: usize) -> &mut [f64] {
        let n = self.bin_len();
        &mut self.values[b * n..(b + 1) * n]
    }

    pub fn index(&self, bin: usize, channel: usize, y: usize, x: usize) -> usize {
        ((bin * 2 + channel) * self.height + y) * self.width + x
    }

    pub fn get(&self, bin: usize, channel: usize, y: usize, x: usize) -> f64 {
        self.values[self.index(bin, channel, y, x)]
    }

    pub fn set(&mut self, bin: usize, channel: usize, y: usize, x: usize, v: f64) {
        let i = self.index(bin, channel, y, x);
        self.values[i] = v;
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn same_shape(&self, other: &FrameTensor) -> bool {
        self.num_bins == other.num_bins
            && self.height == other.height
            && self.width == other.width
            && self.bin_width_us == other.bin_width_us
    }

    /// Copy with every value rounded to the nearest integer (halves away
    /// from zero) and negatives clamped to zero.
    pub fn rounded(&self) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v = v.round().max(0.0);
        }
        out
    }
}

/// Bins a stream into a frame tensor. Bin `b` covers timestamps in
/// `[b * bin_width_us, (b + 1) * bin_width_us)`.
pub fn accumulate(stream: &EventStream, num_bins: usize, bin_width_us: u64) -> Result<FrameTensor> {
    let span = (num_bins as u64).saturating_mul(bin_width_us);
    let last = stream.events().last().map(|e| e.timestamp);
    if bin_width_us == 0 || span < stream.duration_us() || last.is_some_and(|t| t >= span) {
        let needed = stream.duration_us().max(last.map_or(0, |t| t + 1));
        return Err(Error::BinRangeTooSmall {
            num_bins,
            bin_width_us,
            needed_us: needed,
        });
    }
    let mut frames = FrameTensor::zeros(
        num_bins,
        usize::from(stream.height()),
        usize::from(stream.width()),
        bin_width_us,
    );
    for e in stream.events() {
        let b = (e.timestamp / bin_width_us) as usize;
        let i = frames.index(b, e.polarity.channel(), usize::from(e.y), usize::from(e.x));
        frames.values[i] += 1.0;
    }
    Ok(frames)
}

/// Turns frames back into events: a cell holding `v` emits `round(v)` events
/// at its bin-centre timestamp. Within a bin, events are emitted channel by
/// channel (OFF first), then row-major over pixels.
pub fn to_events(frames: &FrameTensor) -> EventStream {
    let mut events = Vec::new();
    let (h, w) = (frames.height, frames.width);
    for b in 0..frames.num_bins {
        let t = b as u64 * frames.bin_width_us + frames.bin_width_us / 2;
        for c in 0..2 {
            let polarity = Polarity::from_channel(c);
            for y in 0..h {
                for x in 0..w {
                    let n = frames.get(b, c, y, x).round();
                    if n >= 1.0 {
                        let ev = Event::new(x as u16, y as u16, polarity, t);
                        events.extend(std::iter::repeat_n(ev, n as usize));
                    }
                }
            }
        }
    }
    let duration = frames.num_bins as u64 * frames.bin_width_us;
    // Already time ordered and in bounds by construction.
    EventStream::new(w as u16, h as u16, events, None, duration)
        .expect("frame tensor geometry fits the event stream")
}
