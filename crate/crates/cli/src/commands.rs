use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use spikeguard::attack::{
    attack_dataset, noise_study, noise_to_csv, parse_noise_csv, NoisePoint, Placement,
};
use spikeguard::dataset::{
    frame_streams, nmnist_streams, summarize, synthetic_streams, DatasetSummary, Sample, Split,
};
use spikeguard::defense::{
    parse_report_csv, report_from_json, report_to_csv, report_to_json, search_params, ThreatModel,
    CSV_HEADER,
};
use spikeguard::events::{decode_nmnist_bin, read_canonical_path, EventStream};
use spikeguard::filter::FilterParams;
use spikeguard::snn::{evaluate, load_checkpoint, save_checkpoint, train, InputGeometry, Network};

use crate::config::{ExperimentConfig, Source};
use crate::error::CliError;
use crate::svg;

/// `(s, t_ms, accuracy)` cells per threat model, in search order.
type GridCells = BTreeMap<ThreatModel, Vec<(u32, f64, f64)>>;

pub const CHECKPOINT: &str = "checkpoint.json";
pub const DEFENSE_CSV: &str = "defense_grid.csv";
pub const NOISE_CSV: &str = "noise_report.csv";

/// Output directory plus the resolved configuration.
pub struct Run {
    pub cfg: ExperimentConfig,
    pub out: PathBuf,
}

impl Run {
    /// Creates the output directory and echoes the resolved configuration
    /// as `<command>.config.toml`.
    fn prepare(&self, command: &str) -> Result<(), CliError> {
        fs::create_dir_all(&self.out).map_err(spikeguard::Error::from)?;
        self.write(&format!("{command}.config.toml"), &self.cfg.to_toml())
    }

    fn write(&self, name: &str, contents: &str) -> Result<(), CliError> {
        fs::write(self.out.join(name), contents).map_err(spikeguard::Error::from)?;
        Ok(())
    }

    fn write_json(&self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("report serializes");
        text.push('\n');
        self.write(name, &text)
    }

    fn streams(&self, split: Split) -> Result<Vec<EventStream>, CliError> {
        let d = &self.cfg.dataset;
        Ok(match d.source {
            Source::Synthetic => {
                synthetic_streams(&d.synthetic, split, self.cfg.stage_seed("data"))?
            }
            Source::Nmnist => {
                let root = d
                    .path
                    .as_deref()
                    .ok_or_else(|| CliError::Config("missing dataset path".into()))?;
                let subset = match split {
                    Split::Train => d.train_subset,
                    Split::Test => d.test_subset,
                };
                nmnist_streams(root, split, subset, self.cfg.stage_seed("subset"))?
            }
        })
    }

    fn samples(&self, split: Split) -> Result<Vec<Sample>, CliError> {
        Ok(frame_streams(&self.streams(split)?, self.cfg.binning)?)
    }

    fn num_classes(&self) -> usize {
        match self.cfg.dataset.source {
            Source::Synthetic => self.cfg.dataset.synthetic.classes as usize,
            Source::Nmnist => 10,
        }
    }

    fn checkpoint(&self, explicit: Option<&Path>) -> Result<Network, CliError> {
        let path = explicit
            .map(Path::to_path_buf)
            .unwrap_or_else(|| self.out.join(CHECKPOINT));
        if !path.is_file() {
            return Err(CliError::Data(format!(
                "checkpoint {} not found",
                path.display()
            )));
        }
        Ok(load_checkpoint(&path)?)
    }
}

#[derive(Serialize)]
struct IngestSummary {
    train: DatasetSummary,
    test: DatasetSummary,
}

/// Summarises the configured dataset, or a single recording when the
/// dataset path names a file.
pub fn ingest(run: &Run) -> Result<String, CliError> {
    let summary = match &run.cfg.dataset.path {
        Some(p) if run.cfg.dataset.source == Source::Nmnist && p.is_file() => {
            let stream = read_recording(p)?;
            serde_json::to_value(summarize(std::slice::from_ref(&stream)))
        }
        _ => serde_json::to_value(IngestSummary {
            train: summarize(&run.streams(Split::Train)?),
            test: summarize(&run.streams(Split::Test)?),
        }),
    }
    .expect("summary serializes");
    run.prepare("ingest")?;
    run.write_json("ingest_summary.json", &summary)?;
    Ok(serde_json::to_string_pretty(&summary).expect("summary serializes"))
}

fn read_recording(path: &Path) -> Result<EventStream, CliError> {
    if path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("bin"))
    {
        let bytes = fs::read(path).map_err(spikeguard::Error::from)?;
        Ok(decode_nmnist_bin(&bytes, None)?)
    } else {
        Ok(read_canonical_path(path)?.stream)
    }
}

pub fn train_cmd(run: &Run) -> Result<String, CliError> {
    let train_set = run.samples(Split::Train)?;
    let test_set = run.samples(Split::Test)?;
    let first = train_set.first().ok_or(spikeguard::Error::EmptyDataset)?;
    let net = Network::build(
        &run.cfg.network.architecture,
        InputGeometry::of(&first.frames),
        run.num_classes(),
        run.cfg.neuron(),
        run.cfg.network.init_gain,
        run.cfg.stage_seed("init"),
    )?;
    let (net, history) = train(&net, &train_set, Some(&test_set), &run.cfg.train_config())?;
    run.prepare("train")?;
    save_checkpoint(&net, run.out.join(CHECKPOINT))?;
    run.write_json("train_history.json", &history)?;
    let last = history.epochs.last();
    Ok(format!(
        "trained {} epochs on {} samples: loss {:.4}, test accuracy {:.4}",
        history.epochs.len(),
        train_set.len(),
        last.map_or(f64::NAN, |e| e.loss),
        last.and_then(|e| e.test_accuracy).unwrap_or(f64::NAN)
    ))
}

#[derive(Serialize)]
struct AttackSummary {
    samples: usize,
    clean_accuracy: f64,
    attacked_accuracy: f64,
    filter: FilterParams,
    clean_filtered_accuracy: f64,
    attacked_filtered_accuracy: f64,
    mean_loss_trace: Vec<f64>,
    records: Vec<spikeguard::attack::AttackRecord>,
}

/// Gradient attack on the test split without a filter (threat model A),
/// the same perturbations through the configured filter, and the
/// random-noise study.
pub fn attack_cmd(run: &Run, checkpoint: Option<&Path>) -> Result<String, CliError> {
    let net = run.checkpoint(checkpoint)?;
    let samples = run.samples(Split::Test)?;
    let cfg = run.cfg.attack_config()?;
    let filter = run.cfg.filter_params()?;
    let attacked = attack_dataset(&net, &samples, &cfg, Placement::default())?;
    let filtered = evaluate(&net, &samples, Some(filter), Some(&attacked.perturbations))?;
    let clean_filtered = evaluate(&net, &samples, Some(filter), None)?;
    let report = attacked.report;
    let summary = AttackSummary {
        samples: samples.len(),
        clean_accuracy: report.clean_accuracy,
        attacked_accuracy: report.attacked_accuracy,
        filter,
        clean_filtered_accuracy: clean_filtered.accuracy,
        attacked_filtered_accuracy: filtered.accuracy,
        mean_loss_trace: report.mean_loss_trace,
        records: report.records,
    };
    let noise = if run.cfg.noise.kinds.is_empty() {
        Vec::new()
    } else {
        noise_study(
            &net,
            &samples,
            &run.cfg.noise.kinds,
            &run.cfg.noise.magnitudes,
            Some(filter),
            run.cfg.stage_seed("noise"),
        )?
    };
    run.prepare("attack")?;
    run.write_json("attack_report.json", &summary)?;
    if !noise.is_empty() {
        run.write(NOISE_CSV, &noise_to_csv(&noise))?;
        run.write_json("noise_report.json", &noise)?;
    }
    let mut msg = format!(
        "clean {:.4} -> attacked {:.4}; with filter s={} t={}ms: clean {:.4}, attacked {:.4}",
        summary.clean_accuracy,
        summary.attacked_accuracy,
        filter.s,
        filter.t_ms,
        summary.clean_filtered_accuracy,
        summary.attacked_filtered_accuracy
    );
    for p in &noise {
        msg.push_str(&format!(
            "\nnoise {} {}: unfiltered {:.4} filtered {:.4}",
            p.kind.name(),
            p.magnitude,
            p.unfiltered_accuracy,
            p.filtered_accuracy.unwrap_or(f64::NAN)
        ));
    }
    Ok(msg)
}

#[derive(Serialize)]
struct BestSummary {
    model: ThreatModel,
    s: Option<u32>,
    t_ms: Option<f64>,
    accuracy: f64,
}

#[derive(Serialize)]
struct DefenseSummary {
    clean_accuracy: f64,
    best: Vec<BestSummary>,
}

/// Filter-parameter search for each configured threat model.
pub fn defend_cmd(run: &Run, checkpoint: Option<&Path>) -> Result<String, CliError> {
    let net = run.checkpoint(checkpoint)?;
    let grid = run.cfg.search_grid();
    grid.validate()?;
    let samples = run.samples(Split::Test)?;
    let cfg = run.cfg.attack_config()?;
    let report = search_params(&run.cfg.search.models, &net, &samples, &cfg, &grid)?;
    let summary = DefenseSummary {
        clean_accuracy: report.clean_accuracy,
        best: report
            .models
            .iter()
            .map(|m| BestSummary {
                model: m.threat_model,
                s: m.best.map(|b| b.s),
                t_ms: m.best.map(|b| b.t_ms),
                accuracy: m.attacked_accuracy,
            })
            .collect(),
    };
    run.prepare("defend")?;
    run.write(DEFENSE_CSV, &report_to_csv(&report))?;
    run.write("defense_report.json", &(report_to_json(&report) + "\n"))?;
    run.write_json("defense_summary.json", &summary)?;
    let mut msg = format!("clean accuracy {:.4}", summary.clean_accuracy);
    for b in &summary.best {
        match (b.s, b.t_ms) {
            (Some(s), Some(t)) => msg.push_str(&format!(
                "\n{}: s'={s} t'={t}ms Acc'={:.4}",
                b.model, b.accuracy
            )),
            _ => msg.push_str(&format!(
                "\n{}: attacked accuracy {:.4}",
                b.model, b.accuracy
            )),
        }
    }
    Ok(msg)
}

/// Turns defense grids and noise curves into SVG charts. Inputs are
/// recognised by content: a defense grid CSV or JSON report, or a noise CSV.
pub fn report_cmd(out: &Path, inputs: &[PathBuf]) -> Result<String, CliError> {
    if inputs.is_empty() {
        return Err(CliError::Config(
            "report needs at least one input file".into(),
        ));
    }
    let mut charts: BTreeMap<String, String> = BTreeMap::new();
    for path in inputs {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
        let first = text.lines().next().unwrap_or("").trim();
        if path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"))
        {
            charts.extend(grid_charts(grid_cells_from_json(&text)?)?);
        } else if first == CSV_HEADER {
            let mut cells: GridCells = BTreeMap::new();
            for row in parse_report_csv(&text)? {
                if let Some((s, t)) = row.cell {
                    cells
                        .entry(row.model)
                        .or_default()
                        .push((s, t, row.accuracy));
                }
            }
            charts.extend(grid_charts(cells)?);
        } else {
            charts.extend(noise_charts(&parse_noise_csv(&text)?)?);
        }
    }
    fs::create_dir_all(out).map_err(spikeguard::Error::from)?;
    let mut names = Vec::new();
    for (name, body) in charts {
        fs::write(out.join(&name), body).map_err(spikeguard::Error::from)?;
        names.push(name);
    }
    Ok(format!("wrote {}", names.join(", ")))
}

fn grid_cells_from_json(text: &str) -> Result<GridCells, CliError> {
    let report = report_from_json(text)?;
    let mut cells = BTreeMap::new();
    for m in report.models {
        if let Some(g) = m.grid {
            let v: Vec<_> = g
                .spatial
                .iter()
                .enumerate()
                .flat_map(|(i, &s)| {
                    g.temporal_ms
                        .iter()
                        .enumerate()
                        .map(move |(j, &t)| (i, j, s, t))
                })
                .map(|(i, j, s, t)| {
                    let acc = g
                        .accuracy
                        .get(i)
                        .and_then(|r| r.get(j))
                        .copied()
                        .ok_or_else(|| {
                            CliError::Data(format!("grid for model {} is ragged", m.threat_model))
                        })?;
                    Ok((s, t, acc))
                })
                .collect::<Result<_, CliError>>()?;
            cells.insert(m.threat_model, v);
        }
    }
    Ok(cells)
}

fn grid_charts(cells: GridCells) -> Result<Vec<(String, String)>, CliError> {
    if cells.values().all(Vec::is_empty) {
        return Err(spikeguard::Error::EmptyGrid.into());
    }
    Ok(cells
        .into_iter()
        .filter(|(_, c)| !c.is_empty())
        .map(|(m, c)| (format!("grid_{m}.svg"), svg::grid_chart(&m.to_string(), &c)))
        .collect())
}

fn noise_charts(points: &[NoisePoint]) -> Result<Vec<(String, String)>, CliError> {
    if points.is_empty() {
        return Err(CliError::Data("noise report has no rows".into()));
    }
    let mut kinds: Vec<_> = points.iter().map(|p| p.kind).collect();
    kinds.dedup();
    kinds.sort_by_key(|k| k.name());
    kinds.dedup();
    Ok(kinds
        .into_iter()
        .map(|k| {
            let pts: Vec<&NoisePoint> = points.iter().filter(|p| p.kind == k).collect();
            (
                format!("noise_{}.svg", k.name()),
                svg::noise_chart(k.name(), &pts),
            )
        })
        .collect())
}
