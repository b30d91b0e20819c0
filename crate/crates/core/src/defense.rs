//! Filter-parameter search and the three threat models.
//!
//! * A: the attacker perturbs the network input directly; no filter.
//! * B: the filter sits in front of the network but the attacker does not
//!   know about it, so perturbations are crafted against the bare network.
//! * C: the attacker treats the filter as part of the network and crafts
//!   perturbations with the filter in the loop.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack::{craft_perturbations, AttackConfig, Perturbation};
use crate::dataset::Sample;
use crate::filter::FilterParams;
use crate::snn::{evaluate, Network};
use crate::{Error, Result};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ThreatModel {
    A,
    B,
    C,
}

impl ThreatModel {
    pub fn letter(self) -> char {
        match self {
            ThreatModel::A => 'A',
            ThreatModel::B => 'B',
            ThreatModel::C => 'C',
        }
    }

    pub fn uses_filter(self) -> bool {
        self != ThreatModel::A
    }
}

impl fmt::Display for ThreatModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

impl std::str::FromStr for ThreatModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" => Ok(ThreatModel::A),
            "B" | "b" => Ok(ThreatModel::B),
            "C" | "c" => Ok(ThreatModel::C),
            other => Err(Error::InvalidParameter(format!(
                "unknown threat model {other:?}"
            ))),
        }
    }
}

/// Candidate spatial radii and temporal thresholds (ms), searched with `s`
/// in the outer loop and `t` in the inner loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchGrid {
    pub spatial: Vec<u32>,
    pub temporal_ms: Vec<f64>,
}

impl Default for SearchGrid {
    fn default() -> Self {
        Self {
            spatial: vec![1, 2, 3, 4],
            temporal_ms: vec![1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0, 500.0],
        }
    }
}

impl SearchGrid {
    pub fn validate(&self) -> Result<()> {
        if self.spatial.is_empty() || self.temporal_ms.is_empty() {
            return Err(Error::EmptyGrid);
        }
        if let Some(t) = self
            .temporal_ms
            .iter()
            .find(|t| !(**t > 0.0 && t.is_finite()))
        {
            return Err(Error::InvalidParameter(format!(
                "grid threshold {t} must be positive"
            )));
        }
        Ok(())
    }

    pub fn cells(&self) -> Vec<FilterParams> {
        self.spatial
            .iter()
            .flat_map(|&s| {
                self.temporal_ms
                    .iter()
                    .map(move |&t_ms| FilterParams { s, t_ms })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BestCell {
    pub s: u32,
    pub t_ms: f64,
    pub accuracy: f64,
}

/// Accuracy per grid cell, `accuracy[i][j]` for `spatial[i]`, `temporal_ms[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyGrid {
    pub spatial: Vec<u32>,
    pub temporal_ms: Vec<f64>,
    pub accuracy: Vec<Vec<f64>>,
}

impl AccuracyGrid {
    /// Best cell under the update rule `acc >= best` applied in `s`-outer,
    /// `t`-inner order starting from zero: the last maximal cell wins.
    pub fn best(&self) -> Result<BestCell> {
        if self.spatial.is_empty() || self.temporal_ms.is_empty() {
            return Err(Error::EmptyGrid);
        }
        let mut best = BestCell {
            s: 0,
            t_ms: 0.0,
            accuracy: 0.0,
        };
        for (i, &s) in self.spatial.iter().enumerate() {
            for (j, &t_ms) in self.temporal_ms.iter().enumerate() {
                let acc = self.accuracy[i][j];
                if acc >= best.accuracy {
                    best = BestCell {
                        s,
                        t_ms,
                        accuracy: acc,
                    };
                }
            }
        }
        Ok(best)
    }

    pub fn max(&self) -> f64 {
        self.accuracy
            .iter()
            .flatten()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn get(&self, s: u32, t_ms: f64) -> Option<f64> {
        let i = self.spatial.iter().position(|&v| v == s)?;
        let j = self.temporal_ms.iter().position(|&v| v == t_ms)?;
        Some(self.accuracy[i][j])
    }
}

/// Evaluates every cell (possibly in parallel) and then picks the best one
/// with [`AccuracyGrid::best`].
pub fn search_grid<F>(grid: &SearchGrid, eval: F) -> Result<(BestCell, AccuracyGrid)>
where
    F: Fn(FilterParams) -> Result<f64> + Sync,
{
    grid.validate()?;
    let flat: Vec<f64> = grid
        .cells()
        .into_par_iter()
        .map(&eval)
        .collect::<Result<_>>()?;
    let accuracy = flat
        .chunks(grid.temporal_ms.len())
        .map(<[f64]>::to_vec)
        .collect();
    let acc = AccuracyGrid {
        spatial: grid.spatial.clone(),
        temporal_ms: grid.temporal_ms.clone(),
        accuracy,
    };
    Ok((acc.best()?, acc))
}

/// Outcome of one threat-model run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub threat_model: ThreatModel,
    pub filter: Option<FilterParams>,
    pub clean_accuracy: f64,
    /// Clean accuracy with the filter in front of the network.
    pub clean_filtered_accuracy: Option<f64>,
    pub attacked_accuracy: f64,
    /// `[true class][output class]` output spikes on the attacked inputs.
    pub spike_histogram: Vec<Vec<u64>>,
    pub grid: Option<AccuracyGrid>,
}

fn check_params(model: ThreatModel, params: Option<FilterParams>) -> Result<()> {
    match (model.uses_filter(), params) {
        (true, None) => Err(Error::MissingFilterParams(model.letter())),
        (false, Some(_)) => Err(Error::UnexpectedFilterParams(model.letter())),
        _ => Ok(()),
    }
}

pub fn run_threat_model(
    model: ThreatModel,
    net: &Network,
    samples: &[Sample],
    cfg: &AttackConfig,
    params: Option<FilterParams>,
) -> Result<EvalReport> {
    check_params(model, params)?;
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let craft_filter = if model == ThreatModel::C {
        params
    } else {
        None
    };
    let perturbations = perturbations_of(net, samples, cfg, craft_filter)?;
    let clean = evaluate(net, samples, None, None)?;
    let clean_filtered = match params {
        Some(p) => Some(evaluate(net, samples, Some(p), None)?.accuracy),
        None => None,
    };
    let attacked = evaluate(net, samples, params, Some(&perturbations))?;
    Ok(EvalReport {
        threat_model: model,
        filter: params,
        clean_accuracy: clean.accuracy,
        clean_filtered_accuracy: clean_filtered,
        attacked_accuracy: attacked.accuracy,
        spike_histogram: attacked.spike_histogram,
        grid: None,
    })
}

fn perturbations_of(
    net: &Network,
    samples: &[Sample],
    cfg: &AttackConfig,
    craft_filter: Option<FilterParams>,
) -> Result<Vec<Perturbation>> {
    Ok(craft_perturbations(net, samples, cfg, craft_filter)?
        .into_iter()
        .map(|o| o.perturbation)
        .collect())
}

/// Search result for one threat model. Model A has no filter, so it carries
/// only its attacked accuracy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSearch {
    pub threat_model: ThreatModel,
    pub best: Option<BestCell>,
    pub attacked_accuracy: f64,
    pub grid: Option<AccuracyGrid>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchReport {
    pub schema_version: u32,
    pub clean_accuracy: f64,
    pub models: Vec<ModelSearch>,
}

/// Searches the filter grid for each threat model.
///
/// Model B perturbations do not depend on the filter, so they are crafted
/// once and reused for every cell. Model C crafts new perturbations per cell.
/// The attack itself is deterministic, so cells may be evaluated in any
/// order.
pub fn search_params(
    models: &[ThreatModel],
    net: &Network,
    samples: &[Sample],
    cfg: &AttackConfig,
    grid: &SearchGrid,
) -> Result<SearchReport> {
    grid.validate()?;
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let clean_accuracy = evaluate(net, samples, None, None)?.accuracy;
    let mut bare: Option<Vec<Perturbation>> = None;
    let mut bare_perturbations = || -> Result<Vec<Perturbation>> {
        if bare.is_none() {
            bare = Some(perturbations_of(net, samples, cfg, None)?);
        }
        Ok(bare.clone().unwrap_or_default())
    };
    let mut out = Vec::with_capacity(models.len());
    for &model in models {
        let entry = match model {
            ThreatModel::A => {
                let p = bare_perturbations()?;
                ModelSearch {
                    threat_model: model,
                    best: None,
                    attacked_accuracy: evaluate(net, samples, None, Some(&p))?.accuracy,
                    grid: None,
                }
            }
            ThreatModel::B => {
                let p = bare_perturbations()?;
                let (best, acc) = search_grid(grid, |fp| {
                    Ok(evaluate(net, samples, Some(fp), Some(&p))?.accuracy)
                })?;
                ModelSearch {
                    threat_model: model,
                    best: Some(best),
                    attacked_accuracy: best.accuracy,
                    grid: Some(acc),
                }
            }
            ThreatModel::C => {
                let (best, acc) = search_grid(grid, |fp| {
                    let p = perturbations_of(net, samples, cfg, Some(fp))?;
                    Ok(evaluate(net, samples, Some(fp), Some(&p))?.accuracy)
                })?;
                ModelSearch {
                    threat_model: model,
                    best: Some(best),
                    attacked_accuracy: best.accuracy,
                    grid: Some(acc),
                }
            }
        };
        out.push(entry);
    }
    Ok(SearchReport {
        schema_version: REPORT_SCHEMA_VERSION,
        clean_accuracy,
        models: out,
    })
}

/// Pretty JSON with the nested grids.
pub fn report_to_json(report: &SearchReport) -> String {
    serde_json::to_string_pretty(report).expect("report serializes")
}

pub fn report_from_json(text: &str) -> Result<SearchReport> {
    let r: SearchReport = serde_json::from_str(text)
        .map_err(|e| Error::MalformedRecord(format!("report JSON: {e}")))?;
    if r.schema_version != REPORT_SCHEMA_VERSION {
        return Err(Error::VersionMismatch {
            found: r.schema_version.to_string(),
        });
    }
    Ok(r)
}

pub const CSV_HEADER: &str = "schema,model,s,t_ms,accuracy";

/// One row per (model, s, t); model A gets a single row with empty `s`, `t_ms`.
pub fn report_to_csv(report: &SearchReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let row = |w: &mut csv::Writer<Vec<u8>>, model: ThreatModel, s: String, t: String, acc: f64| {
        w.write_record([
            report.schema_version.to_string(),
            model.to_string(),
            s,
            t,
            acc.to_string(),
        ])
        .expect("in-memory CSV write");
    };
    w.write_record(CSV_HEADER.split(','))
        .expect("in-memory CSV write");
    for m in &report.models {
        match &m.grid {
            Some(g) => {
                for (i, s) in g.spatial.iter().enumerate() {
                    for (j, t) in g.temporal_ms.iter().enumerate() {
                        row(
                            &mut w,
                            m.threat_model,
                            s.to_string(),
                            t.to_string(),
                            g.accuracy[i][j],
                        );
                    }
                }
            }
            None => row(
                &mut w,
                m.threat_model,
                String::new(),
                String::new(),
                m.attacked_accuracy,
            ),
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory CSV flush")).expect("CSV is UTF-8")
}

/// A parsed CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub model: ThreatModel,
    pub cell: Option<(u32, f64)>,
    pub accuracy: f64,
}

pub fn parse_report_csv(text: &str) -> Result<Vec<GridRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| Error::MalformedRecord(format!("CSV header: {e}")))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if header != CSV_HEADER {
        return Err(Error::MalformedRecord(format!(
            "expected CSV header {CSV_HEADER:?}, found {header:?}"
        )));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::MalformedRecord(format!("CSV: {e}")))?;
        let n = record.position().map_or(0, |p| p.line());
        let bad = |what: &str| Error::MalformedRecord(format!("CSV line {n}: {what}"));
        let schema: u32 = record[0].parse().map_err(|_| bad("schema"))?;
        if schema != REPORT_SCHEMA_VERSION {
            return Err(Error::VersionMismatch {
                found: schema.to_string(),
            });
        }
        let model: ThreatModel = record[1].parse().map_err(|_| bad("model"))?;
        let cell = match (&record[2], &record[3]) {
            ("", "") => None,
            (s, t) => {
                let t: f64 = t.parse().map_err(|_| bad("t_ms"))?;
                if !(t.is_finite() && t > 0.0) {
                    return Err(bad("t_ms must be positive"));
                }
                Some((s.parse().map_err(|_| bad("s"))?, t))
            }
        };
        let accuracy: f64 = record[4].parse().map_err(|_| bad("accuracy"))?;
        if !(0.0..=1.0).contains(&accuracy) {
            return Err(bad("accuracy outside [0, 1]"));
        }
        rows.push(GridRow {
            model,
            cell,
            accuracy,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(s: &[u32], t: &[f64]) -> SearchGrid {
        SearchGrid {
            spatial: s.to_vec(),
            temporal_ms: t.to_vec(),
        }
    }

    #[test]
    fn last_maximal_cell_wins() {
        let g = grid(&[1, 2], &[1.0, 2.0]);
        let table = |fp: FilterParams| match (fp.s, fp.t_ms as u32) {
            (1, 1) => 0.6,
            (1, 2) => 0.9,
            (2, 1) => 0.9,
            _ => 0.8,
        };
        let (best, acc) = search_grid(&g, |fp| Ok(table(fp))).unwrap();
        assert_eq!((best.s, best.t_ms, best.accuracy), (2, 1.0, 0.9));
        assert_eq!(acc.accuracy, vec![vec![0.6, 0.9], vec![0.9, 0.8]]);
    }

    #[test]
    fn single_cell_and_all_zero() {
        let (best, _) = search_grid(&grid(&[3], &[10.0]), |_| Ok(0.4)).unwrap();
        assert_eq!((best.s, best.t_ms), (3, 10.0));
        // Zero accuracy everywhere still satisfies `>=` against the initial 0.
        let (best, _) = search_grid(&grid(&[1, 2], &[1.0, 5.0]), |_| Ok(0.0)).unwrap();
        assert_eq!((best.s, best.t_ms), (2, 5.0));
    }

    #[test]
    fn empty_grid() {
        assert!(matches!(
            search_grid(&grid(&[], &[1.0]), |_| Ok(1.0)),
            Err(Error::EmptyGrid)
        ));
        assert!(matches!(
            search_grid(&grid(&[1], &[]), |_| Ok(1.0)),
            Err(Error::EmptyGrid)
        ));
    }

    #[test]
    fn csv_roundtrip() {
        let report = SearchReport {
            schema_version: REPORT_SCHEMA_VERSION,
            clean_accuracy: 0.9,
            models: vec![
                ModelSearch {
                    threat_model: ThreatModel::A,
                    best: None,
                    attacked_accuracy: 0.25,
                    grid: None,
                },
                ModelSearch {
                    threat_model: ThreatModel::B,
                    best: Some(BestCell {
                        s: 2,
                        t_ms: 5.0,
                        accuracy: 0.875,
                    }),
                    attacked_accuracy: 0.875,
                    grid: Some(AccuracyGrid {
                        spatial: vec![1, 2],
                        temporal_ms: vec![5.0, 12.5],
                        accuracy: vec![vec![0.5, 0.625], vec![0.875, 0.75]],
                    }),
                },
            ],
        };
        let csv = report_to_csv(&report);
        assert!(csv.starts_with("schema,model,s,t_ms,accuracy\n1,A,,,0.25\n1,B,1,5,0.5\n"));
        let rows = parse_report_csv(&csv).unwrap();
        assert_eq!(rows.len(), 5);
        assert_eq!(rows[4].cell, Some((2, 12.5)));
        assert_eq!(rows[4].accuracy, 0.75);
        assert_eq!(report_from_json(&report_to_json(&report)).unwrap(), report);
    }

    #[test]
    fn csv_errors() {
        assert!(parse_report_csv("").is_err());
        assert!(parse_report_csv("schema,model,s,t_ms,accuracy\n1,D,1,1,0.5\n").is_err());
        assert!(parse_report_csv("schema,model,s,t_ms,accuracy\n1,B,1,1,1.5\n").is_err());
        assert!(matches!(
            parse_report_csv("schema,model,s,t_ms,accuracy\n2,B,1,1,0.5\n"),
            Err(Error::VersionMismatch { .. })
        ));
    }
}
