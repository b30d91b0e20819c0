//! Labelled samples and the two dataset sources: the synthetic gesture
//! generator and N-MNIST directories laid out as
//! `<root>/<split>/<class>/<sample>.bin`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::events::{accumulate, decode_nmnist_bin, synth_gesture, EventStream, FrameTensor};
use crate::{seed, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub frames: FrameTensor,
    pub label: u32,
}

/// Time binning used to turn streams into frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Binning {
    pub num_bins: usize,
    pub bin_width_us: u64,
}

impl Binning {
    pub fn window_us(&self) -> u64 {
        self.num_bins as u64 * self.bin_width_us
    }
}

impl Default for Binning {
    /// 25 bins of 12 ms, a 300 ms window.
    fn default() -> Self {
        Self {
            num_bins: 25,
            bin_width_us: 12_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub classes: u32,
    pub width: u16,
    pub height: u16,
    pub duration_us: u64,
    /// Background activity, events per second per pixel.
    pub noise_rate: f64,
    pub train_per_class: usize,
    pub test_per_class: usize,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            classes: 4,
            width: 32,
            height: 32,
            duration_us: 300_000,
            noise_rate: 0.5,
            train_per_class: 40,
            test_per_class: 20,
        }
    }
}

impl SyntheticSpec {
    pub fn per_class(&self, split: Split) -> usize {
        match split {
            Split::Train => self.train_per_class,
            Split::Test => self.test_per_class,
        }
    }
}

/// Generates one split of the synthetic gesture set as event streams.
/// Classes are interleaved, so any prefix is close to balanced.
pub fn synthetic_streams(
    spec: &SyntheticSpec,
    split: Split,
    seed_value: u64,
) -> Result<Vec<EventStream>> {
    if spec.classes == 0 {
        return Err(Error::InvalidParameter(
            "synthetic set needs at least one class".into(),
        ));
    }
    let n = spec.per_class(split) * spec.classes as usize;
    let stage = seed::derive(seed_value, split.as_str());
    (0..n)
        .map(|i| {
            let class = (i % spec.classes as usize) as u32;
            synth_gesture(
                class,
                spec.width,
                spec.height,
                spec.duration_us,
                spec.noise_rate,
                seed::derive_indexed(stage, "sample", i as u64),
            )
        })
        .collect()
}

pub fn synthetic_split(
    spec: &SyntheticSpec,
    binning: Binning,
    split: Split,
    seed_value: u64,
) -> Result<Vec<Sample>> {
    frame_streams(&synthetic_streams(spec, split, seed_value)?, binning)
}

/// Frames every stream after cropping it to the binning window.
pub fn frame_streams(streams: &[EventStream], binning: Binning) -> Result<Vec<Sample>> {
    streams
        .iter()
        .map(|s| {
            let label = s
                .label()
                .ok_or_else(|| Error::MalformedRecord("stream has no label".into()))?;
            Ok(Sample {
                frames: accumulate(
                    &s.crop(binning.window_us()),
                    binning.num_bins,
                    binning.bin_width_us,
                )?,
                label,
            })
        })
        .collect()
}

/// Lists `<root>/<split>/<class>/*.bin` as (path, class), sorted by class
/// then file name. The split directory may be `Train`/`Test`, as in the
/// published archive, or lowercase.
pub fn list_nmnist(root: &Path, split: Split) -> Result<Vec<(PathBuf, u32)>> {
    let lower = split.as_str();
    let upper = format!("{}{}", lower[..1].to_ascii_uppercase(), &lower[1..]);
    let dir = [upper.as_str(), lower]
        .iter()
        .map(|d| root.join(d))
        .find(|d| d.is_dir())
        .ok_or_else(|| {
            std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("no {upper}/ or {lower}/ directory under {}", root.display()),
            )
        })?;
    let mut out = Vec::new();
    let mut classes: Vec<(u32, PathBuf)> = Vec::new();
    for entry in std::fs::read_dir(&dir)? {
        let path = entry?.path();
        if !path.is_dir() {
            continue;
        }
        let Some(class) = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.parse().ok())
        else {
            continue;
        };
        classes.push((class, path));
    }
    classes.sort();
    for (class, path) in classes {
        let mut files: Vec<PathBuf> = std::fs::read_dir(&path)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "bin"))
            .collect();
        files.sort();
        out.extend(files.into_iter().map(|f| (f, class)));
    }
    Ok(out)
}

/// Loads an N-MNIST split. With `subset`, a seeded shuffle picks that many
/// files.
pub fn nmnist_streams(
    root: &Path,
    split: Split,
    subset: Option<usize>,
    seed_value: u64,
) -> Result<Vec<EventStream>> {
    let mut files = list_nmnist(root, split)?;
    if let Some(n) = subset {
        let mut rng = seed::rng(seed::derive(
            seed_value,
            &format!("nmnist-subset-{}", split.as_str()),
        ));
        files.shuffle(&mut rng);
        files.truncate(n);
    }
    files
        .iter()
        .map(|(path, class)| {
            let bytes = std::fs::read(path)?;
            decode_nmnist_bin(&bytes, Some(*class)).map_err(|e| match e {
                Error::MalformedRecord(m) => {
                    Error::MalformedRecord(format!("{}: {m}", path.display()))
                }
                other => other,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
}

impl Stats {
    fn of(values: impl Iterator<Item = f64> + Clone) -> Option<Self> {
        let n = values.clone().count();
        if n == 0 {
            return None;
        }
        Some(Self {
            min: values.clone().fold(f64::INFINITY, f64::min),
            mean: values.clone().sum::<f64>() / n as f64,
            max: values.fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub samples: usize,
    pub per_class: BTreeMap<u32, usize>,
    pub events: Option<Stats>,
    pub duration_us: Option<Stats>,
}

pub fn summarize(streams: &[EventStream]) -> DatasetSummary {
    let mut per_class = BTreeMap::new();
    for s in streams {
        if let Some(l) = s.label() {
            *per_class.entry(l).or_insert(0) += 1;
        }
    }
    DatasetSummary {
        samples: streams.len(),
        per_class,
        events: Stats::of(streams.iter().map(|s| s.len() as f64)),
        duration_us: Stats::of(streams.iter().map(|s| s.duration_us() as f64)),
    }
}
