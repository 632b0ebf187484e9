//! Train the boosted score classifier with stratified cross-validation
//! and compare the full feature set against the ablated one (summary
//! statistics only, no fatigue or arrest features).
//!
//! Run: `cargo run --example boosted_scoring`

use bradyscore::boost::{fit, predict, severe_probability, stratified_kfold, BoostConfig};
use bradyscore::config::PipelineConfig;
use bradyscore::pipeline::{extract_cycles, features_from_cycles};
use bradyscore::stats::eval_report;
use bradyscore::synth::generate_dataset;
use bradyscore::FeatureVector;

fn cross_validate(
    data: &[(FeatureVector, u8)],
    folds: &[Vec<usize>],
    cfg: &BoostConfig,
) -> (Vec<u8>, Vec<f64>) {
    let mut pred = vec![0u8; data.len()];
    let mut severe = vec![0.0; data.len()];
    for held in folds {
        let held_set: std::collections::HashSet<usize> = held.iter().cloned().collect();
        let train: Vec<(FeatureVector, u8)> = (0..data.len())
            .filter(|i| !held_set.contains(i))
            .map(|i| data[i])
            .collect();
        let model = fit(&train, cfg).expect("fit");
        for &i in held {
            let (score, probs) = predict(&model, &data[i].0);
            pred[i] = score;
            severe[i] = severe_probability(&probs);
        }
    }
    (pred, severe)
}

fn main() -> anyhow::Result<()> {
    let cfg = PipelineConfig::default();
    let recordings = generate_dataset(&[20, 60, 80, 50], 30.0, 12, 5)?;
    let data: Vec<(FeatureVector, u8)> = recordings
        .iter()
        .map(|r| {
            let e = extract_cycles(&r.recording, &cfg).expect("extract");
            let (fv, _) = features_from_cycles(&e.cycles, r.arrest_category, &cfg).expect("features");
            (fv, r.score)
        })
        .collect();
    let truth: Vec<u8> = data.iter().map(|(_, y)| *y).collect();

    let folds = stratified_kfold(&data, 5, 17)?;
    for (name, boost_cfg) in [
        ("full features", cfg.boost.clone()),
        ("ablated (no fatigue/arrest)", cfg.boost.clone().ablated()),
    ] {
        let (pred, severe) = cross_validate(&data, &folds, &boost_cfg);
        let report = eval_report(&truth, &pred, &severe)?;
        println!("== {name}");
        println!(
            "   exact {:.3}, within-one {:.3}, mild-vs-severe AUC {:.3}",
            report.exact_accuracy, report.within_one_accuracy, report.auc
        );
        println!("   confusion (rows = expert score):");
        for row in report.confusion {
            println!("     {row:?}");
        }
    }
    println!("\nremoving the fatigue and arrest features degrades both accuracy and AUC;");
    println!("interval/amplitude summaries alone cannot tell a lone freeze from a brief");
    println!("hesitation, nor early decrement from late");
    Ok(())
}
