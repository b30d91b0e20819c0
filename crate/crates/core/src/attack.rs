//! Gradient attack on frames of events, random-noise injection and the
//! noise-robustness sweep.
//!
//! The attack perturbs the bins selected by a [`FrameMask`]. Each iteration
//! adds the current perturbation to the frames, classifies the result (after
//! the noise filter when the attacker knows about it), computes
//! `loss = -ln(1 - prob)` for the true class and moves the perturbation a
//! fixed step against the raw gradient of that loss, driving `prob` towards
//! zero. The filter is not differentiable and is treated as the identity in
//! the backward pass.

use rand_distr::{Distribution, Normal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Sample;
use crate::events::FrameTensor;
use crate::filter::{filter_frames, FilterParams};
use crate::snn::{backward, evaluate, Evaluation, ForwardPass, Network, SurrogateConfig};
use crate::{seed, Error, Result};

/// Upper bound on probabilities fed to the loss, keeping it finite.
pub const PROB_CLAMP_EPS: f64 = 1e-12;

/// Which time bins the attacker may touch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameMask(Vec<bool>);

impl FrameMask {
    pub fn all(num_bins: usize) -> Self {
        Self(vec![true; num_bins])
    }

    pub fn none(num_bins: usize) -> Self {
        Self(vec![false; num_bins])
    }

    pub fn from_bins(num_bins: usize, bins: &[usize]) -> Result<Self> {
        let mut m = vec![false; num_bins];
        for &b in bins {
            *m.get_mut(b).ok_or_else(|| {
                Error::InvalidParameter(format!("mask bin {b} outside 0..{num_bins}"))
            })? = true;
        }
        Ok(Self(m))
    }

    /// Parses `all` or a comma-separated list of bin indices.
    pub fn parse(spec: &str, num_bins: usize) -> Result<Self> {
        let spec = spec.trim();
        if spec.eq_ignore_ascii_case("all") {
            return Ok(Self::all(num_bins));
        }
        let bins = spec
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| Error::InvalidParameter(format!("bad mask entry {s:?}")))
            })
            .collect::<Result<Vec<usize>>>()?;
        Self::from_bins(num_bins, &bins)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_selected(&self, bin: usize) -> bool {
        self.0.get(bin).copied().unwrap_or(false)
    }

    pub fn selected(&self) -> impl Iterator<Item = usize> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &s)| s)
            .map(|(b, _)| b)
    }
}

/// Clipping range upper bound for perturbed inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClipBound {
    /// Largest count of the clean sample.
    SampleMax,
    Fixed(f64),
}

impl ClipBound {
    pub fn resolve(self, frames: &FrameTensor) -> f64 {
        match self {
            ClipBound::SampleMax => frames.max_value(),
            ClipBound::Fixed(c) => c,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub mask: FrameMask,
    pub max_iterations: usize,
    pub step_size: f64,
    pub clip: ClipBound,
    pub surrogate: SurrogateConfig,
}

impl AttackConfig {
    /// All bins, 10 iterations, step 0.5, clip at the sample maximum.
    pub fn with_defaults(num_bins: usize) -> Self {
        Self {
            mask: FrameMask::all(num_bins),
            max_iterations: 10,
            step_size: 0.5,
            clip: ClipBound::SampleMax,
            surrogate: SurrogateConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter(
                "max_iterations must be at least 1".into(),
            ));
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "step size must be positive, got {}",
                self.step_size
            )));
        }
        if let ClipBound::Fixed(c) = self.clip {
            if !(c >= 0.0 && c.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "clip bound {c} must be >= 0"
                )));
            }
        }
        self.surrogate.validate()
    }
}

/// Additive perturbation, zero outside the masked bins. Perturbed values in
/// masked bins are clamped to `[0, clip_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub delta: FrameTensor,
    pub mask: FrameMask,
    pub clip_max: f64,
}

impl Perturbation {
    pub fn zero(frames: &FrameTensor, mask: FrameMask, clip_max: f64) -> Self {
        Self {
            delta: FrameTensor::zeros(
                frames.num_bins(),
                frames.height(),
                frames.width(),
                frames.bin_width_us(),
            ),
            mask,
            clip_max,
        }
    }

    pub fn apply(&self, frames: &FrameTensor) -> Result<FrameTensor> {
        if !self.delta.same_shape(frames) {
            return Err(Error::ShapeMismatch(
                "perturbation and frames differ in shape".into(),
            ));
        }
        let mut out = frames.clone();
        for b in self.mask.selected() {
            for (o, d) in out.bin_mut(b).iter_mut().zip(self.delta.bin(b)) {
                *o = (*o + d).clamp(0.0, self.clip_max);
            }
        }
        Ok(out)
    }
}

/// `-ln(1 - prob)` with `prob` clamped to at most `1 - 1e-12`.
pub fn attack_loss(prob: f64) -> f64 {
    -(1.0 - prob.min(1.0 - PROB_CLAMP_EPS)).ln()
}

/// Gradient of `-ln(1 - p_target)` with respect to the class counts, where
/// `p` is the count softmax. Written as `p_t` for the target and
/// `-p_t * q_j` otherwise (`q` = softmax over the non-target counts), which
/// stays finite when `p_t` rounds to 1.
pub fn attack_loss_grad(pass: &ForwardPass, target: usize) -> Vec<f64> {
    let z = &pass.counts;
    let p_t = pass.probabilities[target];
    let others: Vec<f64> = z
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != target)
        .map(|(_, &v)| v)
        .collect();
    let mut q = crate::snn::softmax(&others).into_iter();
    z.iter()
        .enumerate()
        .map(|(j, _)| {
            if j == target {
                p_t
            } else {
                -p_t * q.next().unwrap_or(0.0)
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackOutcome {
    pub perturbation: Perturbation,
    pub perturbed: FrameTensor,
    /// Loss observed at each iteration, before that iteration's update.
    pub loss_trace: Vec<f64>,
}

/// Attacks one sample. With `filter_in_loop`, the forward pass sees the
/// filtered perturbed frames while the gradient passes straight through the
/// filter. The returned `perturbed` tensor is the clean frames plus the
/// perturbation after the last update.
pub fn attack_sample(
    net: &Network,
    frames: &FrameTensor,
    true_class: u32,
    cfg: &AttackConfig,
    filter_in_loop: Option<FilterParams>,
) -> Result<AttackOutcome> {
    cfg.validate()?;
    net.check_input(frames)?;
    if cfg.mask.len() != frames.num_bins() {
        return Err(Error::MaskLengthMismatch {
            expected: frames.num_bins(),
            found: cfg.mask.len(),
        });
    }
    let target = true_class as usize;
    if target >= net.num_classes() {
        return Err(Error::InvalidParameter(format!(
            "class {true_class} outside {} classes",
            net.num_classes()
        )));
    }
    let clip_max = cfg.clip.resolve(frames);
    let mut pert = Perturbation::zero(frames, cfg.mask.clone(), clip_max);
    let mut perturbed = pert.apply(frames)?;
    let mut trace = Vec::with_capacity(cfg.max_iterations);
    let selected: Vec<usize> = cfg.mask.selected().collect();

    for _ in 0..cfg.max_iterations {
        let pass = match filter_in_loop {
            Some(fp) => net.forward(&filter_frames(&perturbed, fp))?,
            None => net.forward(&perturbed)?,
        };
        trace.push(attack_loss(pass.probabilities[target]));
        if selected.is_empty() {
            continue;
        }
        let grad_counts = attack_loss_grad(&pass, target);
        let grads = backward(net, &pass, &grad_counts, cfg.surrogate, true, false);
        let g = grads.input.expect("input gradient requested");
        let n = frames.bin_len();
        for &b in &selected {
            let clean = frames.bin(b);
            let gb = &g[b * n..(b + 1) * n];
            for ((d, &x), &gv) in pert.delta.bin_mut(b).iter_mut().zip(clean).zip(gb) {
                // Projected descent: keep clean + delta inside [0, clip_max].
                *d = (x + *d - cfg.step_size * gv).clamp(0.0, clip_max) - x;
            }
        }
        perturbed = pert.apply(frames)?;
    }
    Ok(AttackOutcome {
        perturbation: pert,
        perturbed,
        loss_trace: trace,
    })
}

/// Where the attack is crafted and where the result is classified.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Placement {
    /// Filter inside the attacker's loop.
    pub craft_filter: Option<FilterParams>,
    /// Filter in front of the network at evaluation time.
    pub eval_filter: Option<FilterParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackRecord {
    pub label: u32,
    pub clean_prediction: u32,
    pub attacked_prediction: u32,
    pub loss_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub clean_accuracy: f64,
    pub attacked_accuracy: f64,
    pub mean_loss_trace: Vec<f64>,
    pub records: Vec<AttackRecord>,
    pub attacked: Evaluation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackedDataset {
    pub perturbations: Vec<Perturbation>,
    pub report: AttackReport,
}

/// Crafts perturbations for a dataset without evaluating them.
pub fn craft_perturbations(
    net: &Network,
    samples: &[Sample],
    cfg: &AttackConfig,
    craft_filter: Option<FilterParams>,
) -> Result<Vec<AttackOutcome>> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    samples
        .par_iter()
        .map(|s| attack_sample(net, &s.frames, s.label, cfg, craft_filter))
        .collect()
}

/// Attacks every sample and evaluates clean and attacked inputs through the
/// same evaluation pipeline.
pub fn attack_dataset(
    net: &Network,
    samples: &[Sample],
    cfg: &AttackConfig,
    placement: Placement,
) -> Result<AttackedDataset> {
    let outcomes = craft_perturbations(net, samples, cfg, placement.craft_filter)?;
    let mut perturbations = Vec::with_capacity(outcomes.len());
    let mut traces = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        perturbations.push(o.perturbation);
        traces.push(o.loss_trace);
    }
    let clean = evaluate(net, samples, placement.eval_filter, None)?;
    let attacked = evaluate(net, samples, placement.eval_filter, Some(&perturbations))?;
    let iters = cfg.max_iterations;
    let mean_loss_trace = (0..iters)
        .map(|i| traces.iter().map(|t| t[i]).sum::<f64>() / traces.len() as f64)
        .collect();
    let records = samples
        .iter()
        .zip(traces)
        .enumerate()
        .map(|(i, (s, loss_trace))| AttackRecord {
            label: s.label,
            clean_prediction: clean.predictions[i],
            attacked_prediction: attacked.predictions[i],
            loss_trace,
        })
        .collect();
    Ok(AttackedDataset {
        perturbations,
        report: AttackReport {
            clean_accuracy: clean.accuracy,
            attacked_accuracy: attacked.accuracy,
            mean_loss_trace,
            records,
            attacked,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    Uniform,
    Normal,
}

impl NoiseKind {
    pub fn name(self) -> &'static str {
        match self {
            NoiseKind::Uniform => "uniform",
            NoiseKind::Normal => "normal",
        }
    }
}

impl std::str::FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(NoiseKind::Uniform),
            "normal" => Ok(NoiseKind::Normal),
            _ => Err(Error::InvalidParameter(format!("unknown noise kind {s:?}"))),
        }
    }
}

/// Adds i.i.d. noise to every cell: `U(-m, m)` or `N(0, m^2)`. The result
/// is clipped to `[0, max]` where `max` is the largest clean count.
pub fn inject_random_noise(
    frames: &FrameTensor,
    kind: NoiseKind,
    magnitude: f64,
    seed_value: u64,
) -> Result<FrameTensor> {
    if !(magnitude >= 0.0 && magnitude.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "noise magnitude must be >= 0, got {magnitude}"
        )));
    }
    if magnitude == 0.0 {
        return Ok(frames.clone());
    }
    let c_max = frames.max_value();
    let mut rng = seed::rng(seed_value);
    let mut out = frames.clone();
    match kind {
        NoiseKind::Uniform => {
            let d = Uniform::new_inclusive(-magnitude, magnitude)
                .map_err(|e| Error::InvalidParameter(e.to_string()))?;
            for v in out.values_mut() {
                *v = (*v + d.sample(&mut rng)).clamp(0.0, c_max);
            }
        }
        NoiseKind::Normal => {
            let d =
                Normal::new(0.0, magnitude).map_err(|e| Error::InvalidParameter(e.to_string()))?;
            for v in out.values_mut() {
                *v = (*v + d.sample(&mut rng)).clamp(0.0, c_max);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisePoint {
    pub kind: NoiseKind,
    pub magnitude: f64,
    pub unfiltered_accuracy: f64,
    pub filtered_accuracy: Option<f64>,
}

/// Accuracy under random noise for each (kind, magnitude), with and without
/// the filter. Sample `i` always receives noise drawn from the same derived
/// seed for a given kind and magnitude index.
pub fn noise_study(
    net: &Network,
    samples: &[Sample],
    kinds: &[NoiseKind],
    magnitudes: &[f64],
    filter: Option<FilterParams>,
    seed_value: u64,
) -> Result<Vec<NoisePoint>> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut points = Vec::new();
    for &kind in kinds {
        for (mi, &m) in magnitudes.iter().enumerate() {
            let stage = seed::derive_indexed(seed_value, kind.name(), mi as u64);
            let noisy = samples
                .par_iter()
                .enumerate()
                .map(|(i, s)| {
                    Ok(Sample {
                        frames: inject_random_noise(
                            &s.frames,
                            kind,
                            m,
                            seed::splitmix64(stage ^ i as u64),
                        )?,
                        label: s.label,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let unfiltered_accuracy = evaluate(net, &noisy, None, None)?.accuracy;
            let filtered_accuracy = match filter {
                Some(f) => Some(evaluate(net, &noisy, Some(f), None)?.accuracy),
                None => None,
            };
            points.push(NoisePoint {
                kind,
                magnitude: m,
                unfiltered_accuracy,
                filtered_accuracy,
            });
        }
    }
    Ok(points)
}

pub const NOISE_CSV_HEADER: &str = "kind,magnitude,unfiltered,filtered";

/// One row per point; `filtered` is empty when the study ran without a filter.
pub fn noise_to_csv(points: &[NoisePoint]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(NOISE_CSV_HEADER.split(','))
        .expect("in-memory CSV write");
    for p in points {
        w.write_record([
            p.kind.name().to_string(),
            p.magnitude.to_string(),
            p.unfiltered_accuracy.to_string(),
            p.filtered_accuracy
                .map(|v| v.to_string())
                .unwrap_or_default(),
        ])
        .expect("in-memory CSV write");
    }
    String::from_utf8(w.into_inner().expect("in-memory CSV flush")).expect("CSV is UTF-8")
}

pub fn parse_noise_csv(text: &str) -> Result<Vec<NoisePoint>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| Error::MalformedRecord(format!("CSV header: {e}")))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if header != NOISE_CSV_HEADER {
        return Err(Error::MalformedRecord(format!(
            "expected CSV header {NOISE_CSV_HEADER:?}, found {header:?}"
        )));
    }
    let accuracy = |v: &str, n: u64| -> Result<f64> {
        match v.parse::<f64>() {
            Ok(a) if (0.0..=1.0).contains(&a) => Ok(a),
            _ => Err(Error::MalformedRecord(format!(
                "CSV line {n}: bad accuracy {v:?}"
            ))),
        }
    };
    let mut points = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::MalformedRecord(format!("CSV: {e}")))?;
        let n = record.position().map_or(0, |p| p.line());
        let kind = record[0].parse().map_err(|_| {
            Error::MalformedRecord(format!("CSV line {n}: bad kind {:?}", &record[0]))
        })?;
        let magnitude = match record[1].parse::<f64>() {
            Ok(m) if m >= 0.0 && m.is_finite() => m,
            _ => {
                return Err(Error::MalformedRecord(format!(
                    "CSV line {n}: bad magnitude"
                )))
            }
        };
        points.push(NoisePoint {
            kind,
            magnitude,
            unfiltered_accuracy: accuracy(&record[2], n)?,
            filtered_accuracy: match &record[3] {
                "" => None,
                v => Some(accuracy(v, n)?),
            },
        });
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_formula() {
        assert_eq!(attack_loss(0.0), 0.0);
        assert!((attack_loss(0.5) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(attack_loss(1.0).is_finite());
        assert!((attack_loss(1.0) - 27.631).abs() < 1e-3);
    }

    #[test]
    fn mask_parsing() {
        assert_eq!(FrameMask::parse("all", 3).unwrap(), FrameMask::all(3));
        let m = FrameMask::parse("0, 2", 4).unwrap();
        assert_eq!(m.selected().collect::<Vec<_>>(), vec![0, 2]);
        assert!(FrameMask::parse("4", 4).is_err());
        assert!(FrameMask::parse("x", 4).is_err());
    }

    #[test]
    fn zero_noise_is_identity_and_seeded() {
        let mut f = FrameTensor::zeros(2, 3, 3, 10);
        f.set(0, 1, 1, 1, 3.0);
        assert_eq!(
            inject_random_noise(&f, NoiseKind::Normal, 0.0, 1).unwrap(),
            f
        );
        let a = inject_random_noise(&f, NoiseKind::Uniform, 0.5, 1).unwrap();
        let b = inject_random_noise(&f, NoiseKind::Uniform, 0.5, 1).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, f);
        assert!(a.values().iter().all(|&v| (0.0..=3.0).contains(&v)));
        assert!(inject_random_noise(&f, NoiseKind::Uniform, -0.1, 1).is_err());
    }

    #[test]
    fn noise_csv_round_trip() {
        let pts = vec![
            NoisePoint {
                kind: NoiseKind::Uniform,
                magnitude: 0.55,
                unfiltered_accuracy: 0.7,
                filtered_accuracy: Some(0.95),
            },
            NoisePoint {
                kind: NoiseKind::Normal,
                magnitude: 0.0,
                unfiltered_accuracy: 1.0,
                filtered_accuracy: None,
            },
        ];
        assert_eq!(parse_noise_csv(&noise_to_csv(&pts)).unwrap(), pts);
        assert!(parse_noise_csv("kind,magnitude\n").is_err());
        assert!(parse_noise_csv("kind,magnitude,unfiltered,filtered\nuniform,0.1,1.5,\n").is_err());
    }
}
