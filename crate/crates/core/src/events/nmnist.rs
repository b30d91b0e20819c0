//! N-MNIST `.bin` codec.
//!
//! Each event is a 40-bit big-endian record:
//!
//! ```text
//! byte0      x
//! byte1      y
//! byte2      bit 7 polarity (1 = ON), bits 6..0 timestamp bits 22..16
//! byte3      timestamp bits 15..8
//! byte4      timestamp bits 7..0
//! ```

use super::{Event, EventStream, Polarity};
use crate::{Error, Result};

/// Sensor side length of the N-MNIST recordings.
pub const NMNIST_SIZE: u16 = 34;

const RECORD_LEN: usize = 5;
const MAX_COORD: u16 = 128;
const TIMESTAMP_BITS: u32 = 23;

/// Decodes an N-MNIST sample. The resulting stream is 34x34 and its duration
/// is one past the last timestamp (zero when empty).
pub fn decode_nmnist_bin(bytes: &[u8], label: Option<u32>) -> Result<EventStream> {
    if !bytes.len().is_multiple_of(RECORD_LEN) {
        return Err(Error::MalformedRecord(format!(
            "N-MNIST length {} is not a multiple of {RECORD_LEN}",
            bytes.len()
        )));
    }
    let mut events = Vec::with_capacity(bytes.len() / RECORD_LEN);
    let mut last = None::<u64>;
    for (i, rec) in bytes.chunks_exact(RECORD_LEN).enumerate() {
        let x = u16::from(rec[0]);
        let y = u16::from(rec[1]);
        if x >= NMNIST_SIZE || y >= NMNIST_SIZE {
            return Err(Error::MalformedRecord(format!(
                "record {i}: coordinate ({x}, {y}) outside the {NMNIST_SIZE}x{NMNIST_SIZE} sensor"
            )));
        }
        let polarity = if rec[2] & 0x80 != 0 {
            Polarity::On
        } else {
            Polarity::Off
        };
        let timestamp =
            (u64::from(rec[2] & 0x7f) << 16) | (u64::from(rec[3]) << 8) | u64::from(rec[4]);
        last = Some(last.map_or(timestamp, |l: u64| l.max(timestamp)));
        events.push(Event::new(x, y, polarity, timestamp));
    }
    let duration = last.map_or(0, |t| t + 1);
    EventStream::new(NMNIST_SIZE, NMNIST_SIZE, events, label, duration)
}

/// Encodes a stream in N-MNIST layout, in stream order.
pub fn encode_nmnist_bin(stream: &EventStream) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(stream.len() * RECORD_LEN);
    for (i, e) in stream.events().iter().enumerate() {
        if e.x >= MAX_COORD || e.y >= MAX_COORD {
            return Err(Error::RangeOverflow(format!(
                "event {i}: coordinate ({}, {}) does not fit in 7 bits",
                e.x, e.y
            )));
        }
        if e.timestamp >> TIMESTAMP_BITS != 0 {
            return Err(Error::RangeOverflow(format!(
                "event {i}: timestamp {} does not fit in {TIMESTAMP_BITS} bits",
                e.timestamp
            )));
        }
        let pol = if e.polarity == Polarity::On { 0x80 } else { 0 };
        out.extend_from_slice(&[
            e.x as u8,
            e.y as u8,
            pol | ((e.timestamp >> 16) as u8 & 0x7f),
            (e.timestamp >> 8) as u8,
            e.timestamp as u8,
        ]);
    }
    Ok(out)
}
