//! Event-stream data model, codecs, the synthetic gesture generator and the
//! conversion between event streams and frames of events.

mod canonical;
mod frames;
mod nmnist;
mod synth;

pub use canonical::{
    read_canonical, read_canonical_binary, read_canonical_path, read_canonical_text,
    write_canonical_binary, write_canonical_text, CanonicalRead, BINARY_MAGIC, BINARY_VERSION,
    TEXT_TAG,
};
pub use frames::{accumulate, to_events, FrameTensor};
pub use nmnist::{decode_nmnist_bin, encode_nmnist_bin, NMNIST_SIZE};
pub use synth::{gesture_trajectory, synth_gesture, Gesture, Trajectory};

use crate::{Error, Result};

/// Largest representable timestamp (timestamps fit in 63 bits).
pub const MAX_TIMESTAMP_US: u64 = (1 << 63) - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Polarity {
    Off,
    On,
}

impl Polarity {
    /// Channel index in a frame tensor: OFF = 0, ON = 1.
    pub fn channel(self) -> usize {
        match self {
            Polarity::Off => 0,
            Polarity::On => 1,
        }
    }

    pub fn from_channel(c: usize) -> Self {
        if c == 0 {
            Polarity::Off
        } else {
            Polarity::On
        }
    }
}

/// A single DVS event. Timestamps are microseconds since stream start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Event {
    pub x: u16,
    pub y: u16,
    pub polarity: Polarity,
    pub timestamp: u64,
}

impl Event {
    pub fn new(x: u16, y: u16, polarity: Polarity, timestamp: u64) -> Self {
        Self {
            x,
            y,
            polarity,
            timestamp,
        }
    }
}

/// A time-ordered sequence of events together with its sensor geometry.
///
/// Construction validates coordinates and duration and sorts events by
/// timestamp with a stable sort, so equal timestamps keep insertion order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventStream {
    events: Vec<Event>,
    width: u16,
    height: u16,
    label: Option<u32>,
    duration_us: u64,
}

impl EventStream {
    pub fn new(
        width: u16,
        height: u16,
        mut events: Vec<Event>,
        label: Option<u32>,
        duration_us: u64,
    ) -> Result<Self> {
        validate(width, height, &events, duration_us)?;
        events.sort_by_key(|e| e.timestamp);
        Ok(Self {
            events,
            width,
            height,
            label,
            duration_us,
        })
    }

    /// Empty stream with the given geometry.
    pub fn empty(width: u16, height: u16, duration_us: u64) -> Self {
        Self {
            events: Vec::new(),
            width,
            height,
            label: None,
            duration_us,
        }
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn into_events(self) -> Vec<Event> {
        self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn width(&self) -> u16 {
        self.width
    }

    pub fn height(&self) -> u16 {
        self.height
    }

    pub fn label(&self) -> Option<u32> {
        self.label
    }

    pub fn duration_us(&self) -> u64 {
        self.duration_us
    }

    pub fn with_label(mut self, label: Option<u32>) -> Self {
        self.label = label;
        self
    }

    /// Builds a stream with the same geometry, label and duration from a
    /// subsequence of this stream's events, selected by `keep`.
    pub fn retain_mask(&self, keep: &[bool]) -> Self {
        debug_assert_eq!(keep.len(), self.events.len());
        Self {
            events: self
                .events
                .iter()
                .zip(keep)
                .filter(|(_, &k)| k)
                .map(|(e, _)| *e)
                .collect(),
            ..self.clone_meta()
        }
    }

    /// Drops every event at or after `window_us` and sets the duration to the
    /// window length.
    pub fn crop(&self, window_us: u64) -> Self {
        Self {
            events: self
                .events
                .iter()
                .take_while(|e| e.timestamp < window_us)
                .copied()
                .collect(),
            duration_us: window_us,
            ..self.clone_meta()
        }
    }

    fn clone_meta(&self) -> Self {
        Self {
            events: Vec::new(),
            width: self.width,
            height: self.height,
            label: self.label,
            duration_us: self.duration_us,
        }
    }
}

fn validate(width: u16, height: u16, events: &[Event], duration_us: u64) -> Result<()> {
    if duration_us > MAX_TIMESTAMP_US {
        return Err(Error::RangeOverflow(format!(
            "duration {duration_us} us exceeds 63 bits"
        )));
    }
    for (i, e) in events.iter().enumerate() {
        if e.x >= width || e.y >= height {
            return Err(Error::MalformedRecord(format!(
                "event {i} at ({}, {}) outside {width}x{height} sensor",
                e.x, e.y
            )));
        }
        if e.timestamp > duration_us {
            return Err(Error::MalformedRecord(format!(
                "event {i} timestamp {} exceeds stream duration {duration_us}",
                e.timestamp
            )));
        }
    }
    Ok(())
}
