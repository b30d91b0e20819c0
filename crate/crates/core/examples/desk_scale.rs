//! Desk-scale run on the synthetic gesture set: train, attack without a
//! filter, search the filter grid under threat models A and B, attack the
//! best B cell under C, then sweep random noise.
//!
//! cargo run --release -p spikeguard --example desk_scale

use std::time::Instant;

use spikeguard::attack::{noise_study, AttackConfig, NoiseKind};
use spikeguard::dataset::{synthetic_split, Binning, Split, SyntheticSpec};
use spikeguard::defense::{run_threat_model, search_params, SearchGrid, ThreatModel};
use spikeguard::filter::FilterParams;
use spikeguard::snn::{train, Architecture, InputGeometry, Network, NeuronParams, TrainConfig};

fn main() -> spikeguard::Result<()> {
    let spec = SyntheticSpec {
        train_per_class: 100,
        test_per_class: 100,
        ..SyntheticSpec::default()
    };
    let binning = Binning::default();
    let train_set = synthetic_split(&spec, binning, Split::Train, 1)?;
    let test_set = synthetic_split(&spec, binning, Split::Test, 1)?;

    let geom = InputGeometry::of(&train_set[0].frames);
    let net = Network::build(
        &Architecture::default_mlp(),
        geom,
        spec.classes as usize,
        NeuronParams::default(),
        1.0,
        7,
    )?;
    let cfg = TrainConfig {
        seed: 3,
        ..TrainConfig::default()
    };
    let t0 = Instant::now();
    let (net, hist) = train(&net, &train_set, Some(&test_set), &cfg)?;
    for e in &hist.epochs {
        println!(
            "epoch {:>2}  loss {:.4}  train {:.3}  test {:.3}",
            e.epoch,
            e.loss,
            e.train_accuracy,
            e.test_accuracy.unwrap_or(f64::NAN)
        );
    }
    println!("trained in {:.1?}", t0.elapsed());

    let acfg = AttackConfig::with_defaults(binning.num_bins);
    let t0 = Instant::now();
    let rep = search_params(
        &[ThreatModel::A, ThreatModel::B],
        &net,
        &test_set,
        &acfg,
        &SearchGrid::default(),
    )?;
    println!(
        "clean {:.3}; search took {:.1?}",
        rep.clean_accuracy,
        t0.elapsed()
    );
    for m in &rep.models {
        println!(
            "model {}: accuracy {:.3}",
            m.threat_model, m.attacked_accuracy
        );
        if let Some(g) = &m.grid {
            for (s, row) in g.spatial.iter().zip(&g.accuracy) {
                let cells: Vec<String> = row.iter().map(|v| format!("{v:.2}")).collect();
                println!("  s={s}: {}", cells.join(" "));
            }
        }
    }
    if let Some(b) = rep
        .models
        .iter()
        .find_map(|m| m.best.filter(|_| m.threat_model == ThreatModel::B))
    {
        let fp = FilterParams::new(b.s, b.t_ms)?;
        let c = run_threat_model(ThreatModel::C, &net, &test_set, &acfg, Some(fp))?;
        println!(
            "model C at s={} t={} ms: {:.3} (B: {:.3})",
            b.s, b.t_ms, c.attacked_accuracy, b.accuracy
        );
    }

    let mags = [0.0, 0.15, 0.25, 0.4, 0.55, 0.7, 0.85, 1.0];
    let filter = FilterParams::new(1, 5.0)?;
    for p in noise_study(
        &net,
        &test_set,
        &[NoiseKind::Uniform, NoiseKind::Normal],
        &mags,
        Some(filter),
        11,
    )? {
        println!(
            "{:<7} m={:.2}  unfiltered {:.3}  filtered {:.3}",
            p.kind.name(),
            p.magnitude,
            p.unfiltered_accuracy,
            p.filtered_accuracy.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
