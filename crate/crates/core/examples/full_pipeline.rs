//! Everything end to end at a small scale: synthesize labeled
//! recordings, train the arrest network, build feature vectors with its
//! predictions, train and cross-validate the score classifier, and
//! compare predictions against the labels with the mixed-effects check.
//!
//! Run: `cargo run --example full_pipeline` (a couple of minutes)

use bradyscore::arrest::{predict_arrest, train, SeriesSample};
use bradyscore::boost::{fit, predict, severe_probability, stratified_kfold};
use bradyscore::config::PipelineConfig;
use bradyscore::pipeline::{extract_cycles, features_from_cycles};
use bradyscore::stats::{eval_report, fit_mixed};
use bradyscore::synth::generate_dataset;
use bradyscore::FeatureVector;

fn main() -> anyhow::Result<()> {
    let cfg = PipelineConfig::default();

    println!("1. synthesizing 160 recordings...");
    let recordings = generate_dataset(&[15, 45, 60, 40], 30.0, 12, 77)?;

    println!("2. extracting cycles...");
    let extractions: Vec<_> = recordings
        .iter()
        .map(|r| extract_cycles(&r.recording, &cfg).expect("extract"))
        .collect();

    println!("3. training the arrest network...");
    let samples: Vec<SeriesSample> = recordings
        .iter()
        .zip(&extractions)
        .map(|(r, e)| SeriesSample::from_cycles(&e.cycles, Some(r.arrest_category)).expect("sample"))
        .collect();
    let (net, report) = train(&samples, &cfg.net, &cfg.train)?;
    println!("   final training loss {:.4}", report.loss_history.last().unwrap());

    println!("4. building feature vectors with network arrest predictions...");
    let data: Vec<(FeatureVector, u8)> = recordings
        .iter()
        .zip(&extractions)
        .zip(&samples)
        .map(|((r, e), s)| {
            let arrest = predict_arrest(&net, s).expect("predict");
            let (fv, _) = features_from_cycles(&e.cycles, arrest, &cfg).expect("features");
            (fv, r.score)
        })
        .collect();

    println!("5. cross-validating the boosted classifier...");
    let folds = stratified_kfold(&data, 5, 3)?;
    let mut pred = vec![0u8; data.len()];
    let mut severe = vec![0.0; data.len()];
    for held in &folds {
        let held_set: std::collections::HashSet<usize> = held.iter().cloned().collect();
        let train_rows: Vec<(FeatureVector, u8)> = (0..data.len())
            .filter(|i| !held_set.contains(i))
            .map(|i| data[i])
            .collect();
        let model = fit(&train_rows, &cfg.boost)?;
        for &i in held {
            let (score, probs) = predict(&model, &data[i].0);
            pred[i] = score;
            severe[i] = severe_probability(&probs);
        }
    }
    let truth: Vec<u8> = data.iter().map(|(_, y)| *y).collect();
    let eval = eval_report(&truth, &pred, &severe)?;
    println!(
        "   exact {:.3}, within-one {:.3}, mild-vs-severe AUC {:.3}",
        eval.exact_accuracy, eval.within_one_accuracy, eval.auc
    );
    println!("   confusion (rows = label):");
    for row in eval.confusion {
        println!("     {row:?}");
    }

    println!("6. mixed-effects check of prediction vs label differences...");
    let diffs: Vec<(f64, _)> = recordings
        .iter()
        .enumerate()
        .map(|(i, r)| (pred[i] as f64 - truth[i] as f64, r.recording.movement))
        .collect();
    let mixed = fit_mixed(&diffs)?;
    println!(
        "   mean difference {:+.4} +- {:.4}, p = {:.3}",
        mixed.beta0, mixed.se_beta0, mixed.p_value
    );
    Ok(())
}
