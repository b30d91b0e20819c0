//! The canonical stream format, in a text and a length-prefixed binary
//! flavour.
//!
//! Text:
//!
//! ```text
//! RSNN1 <width> <height> <duration_us> <label|->
//! <x> <y> <p> <t>
//! ...
//! ```
//!
//! with `p` = 1 for ON and 0 for OFF.
//!
//! Binary (little endian): magic `RSNB`, version byte, `u16` width, `u16`
//! height, `u64` duration, `u8` has-label flag, `u32` label, `u64` event
//! count, then per event `u16` x, `u16` y, `u8` polarity, `u64` timestamp.

use std::fmt::Write as _;
use std::path::Path;

use super::{Event, EventStream, Polarity};
use crate::{Error, Result};

pub const TEXT_TAG: &str = "RSNN1";
pub const BINARY_MAGIC: &[u8; 4] = b"RSNB";
pub const BINARY_VERSION: u8 = 1;

const TEXT_PREFIX: &str = "RSNN";
const BINARY_HEADER_LEN: usize = 4 + 1 + 2 + 2 + 8 + 1 + 4 + 8;
const BINARY_RECORD_LEN: usize = 2 + 2 + 1 + 8;

/// Result of reading a canonical file. `reordered` is set when the source
/// events were not in timestamp order and had to be re-sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalRead {
    pub stream: EventStream,
    pub reordered: bool,
}

/// Reads either flavour, dispatching on the leading magic.
pub fn read_canonical(bytes: &[u8]) -> Result<CanonicalRead> {
    if bytes.starts_with(BINARY_MAGIC) {
        read_canonical_binary(bytes)
    } else {
        let text = std::str::from_utf8(bytes)
            .map_err(|e| Error::MalformedRecord(format!("canonical text is not UTF-8: {e}")))?;
        read_canonical_text(text)
    }
}

pub fn read_canonical_path(path: impl AsRef<Path>) -> Result<CanonicalRead> {
    read_canonical(&std::fs::read(path)?)
}

pub fn write_canonical_text(stream: &EventStream) -> String {
    let mut out = String::with_capacity(32 + stream.len() * 16);
    let label = stream
        .label()
        .map_or_else(|| "-".to_string(), |l| l.to_string());
    let _ = writeln!(
        out,
        "{TEXT_TAG} {} {} {} {label}",
        stream.width(),
        stream.height(),
        stream.duration_us()
    );
    for e in stream.events() {
        let _ = writeln!(
            out,
            "{} {} {} {}",
            e.x,
            e.y,
            e.polarity.channel(),
            e.timestamp
        );
    }
    out
}

pub fn read_canonical_text(text: &str) -> Result<CanonicalRead> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::MalformedRecord("missing header line".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let tag = fields.first().copied().unwrap_or("");
    if !tag.starts_with(TEXT_PREFIX) {
        return Err(Error::MalformedRecord(format!(
            "unknown header tag {tag:?}"
        )));
    }
    if tag != TEXT_TAG {
        return Err(Error::VersionMismatch {
            found: tag[TEXT_PREFIX.len()..].to_string(),
        });
    }
    if fields.len() != 5 {
        return Err(Error::MalformedRecord(format!(
            "header has {} fields, expected 5",
            fields.len()
        )));
    }
    let width: u16 = parse_field(fields[1], "width", 0)?;
    let height: u16 = parse_field(fields[2], "height", 0)?;
    let duration: u64 = parse_field(fields[3], "duration", 0)?;
    let label = match fields[4] {
        "-" => None,
        l => Some(parse_field::<u32>(l, "label", 0)?),
    };

    let mut events = Vec::new();
    for (n, line) in lines {
        let line_no = n + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let mut next = |name| {
            it.next()
                .ok_or_else(|| Error::MalformedRecord(format!("line {line_no}: missing {name}")))
        };
        let x: u16 = parse_field(next("x")?, "x", line_no)?;
        let y: u16 = parse_field(next("y")?, "y", line_no)?;
        let polarity = match next("polarity")? {
            "0" => Polarity::Off,
            "1" => Polarity::On,
            p => {
                return Err(Error::MalformedRecord(format!(
                    "line {line_no}: polarity {p:?} is not 0 or 1"
                )))
            }
        };
        let t: u64 = parse_field(next("timestamp")?, "timestamp", line_no)?;
        if it.next().is_some() {
            return Err(Error::MalformedRecord(format!(
                "line {line_no}: trailing fields"
            )));
        }
        events.push(Event::new(x, y, polarity, t));
    }
    finish(width, height, events, label, duration)
}

pub fn write_canonical_binary(stream: &EventStream) -> Vec<u8> {
    let mut out = Vec::with_capacity(BINARY_HEADER_LEN + stream.len() * BINARY_RECORD_LEN);
    out.extend_from_slice(BINARY_MAGIC);
    out.push(BINARY_VERSION);
    out.extend_from_slice(&stream.width().to_le_bytes());
    out.extend_from_slice(&stream.height().to_le_bytes());
    out.extend_from_slice(&stream.duration_us().to_le_bytes());
    out.push(u8::from(stream.label().is_some()));
    out.extend_from_slice(&stream.label().unwrap_or(0).to_le_bytes());
    out.extend_from_slice(&(stream.len() as u64).to_le_bytes());
    for e in stream.events() {
        out.extend_from_slice(&e.x.to_le_bytes());
        out.extend_from_slice(&e.y.to_le_bytes());
        out.push(e.polarity.channel() as u8);
        out.extend_from_slice(&e.timestamp.to_le_bytes());
    }
    out
}

pub fn read_canonical_binary(bytes: &[u8]) -> Result<CanonicalRead> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != BINARY_MAGIC {
        return Err(Error::MalformedRecord("missing binary magic".into()));
    }
    let version = r.u8()?;
    if version != BINARY_VERSION {
        return Err(Error::VersionMismatch {
            found: version.to_string(),
        });
    }
    let width = r.u16()?;
    let height = r.u16()?;
    let duration = r.u64()?;
    let has_label = r.u8()?;
    let label = r.u32()?;
    let label = match has_label {
        0 => None,
        1 => Some(label),
        f => return Err(Error::MalformedRecord(format!("bad label flag {f}"))),
    };
    let count = r.u64()?;
    let remaining = bytes.len() - r.pos;
    if count.checked_mul(BINARY_RECORD_LEN as u64) != Some(remaining as u64) {
        return Err(Error::MalformedRecord(format!(
            "length prefix {count} does not match {remaining} payload bytes"
        )));
    }
    let mut events = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let x = r.u16()?;
        let y = r.u16()?;
        let polarity = match r.u8()? {
            0 => Polarity::Off,
            1 => Polarity::On,
            p => return Err(Error::MalformedRecord(format!("bad polarity byte {p}"))),
        };
        let t = r.u64()?;
        events.push(Event::new(x, y, polarity, t));
    }
    finish(width, height, events, label, duration)
}

fn finish(
    width: u16,
    height: u16,
    events: Vec<Event>,
    label: Option<u32>,
    duration: u64,
) -> Result<CanonicalRead> {
    let reordered = events.windows(2).any(|w| w[1].timestamp < w[0].timestamp);
    let stream = EventStream::new(width, height, events, label, duration)?;
    Ok(CanonicalRead { stream, reordered })
}

fn parse_field<T: std::str::FromStr>(s: &str, name: &str, line: usize) -> Result<T> {
    s.parse()
        .map_err(|_| Error::MalformedRecord(format!("line {line}: invalid {name} {s:?}")))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::MalformedRecord("unexpected end of binary stream".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
