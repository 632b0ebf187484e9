//! Train the LSTM-FCN arrest classifier on synthetic cycle sequences and
//! inspect its loss curve, confusion, and model-file round trip.
//!
//! Run: `cargo run --example train_arrest_net` (about a minute)

use bradyscore::arrest::{
    forward, load_model, predict_arrest, save_model, train, SeriesSample, TrainConfig,
};
use bradyscore::config::PipelineConfig;
use bradyscore::pipeline::extract_cycles;
use bradyscore::synth::generate_dataset;

fn main() -> anyhow::Result<()> {
    let cfg = PipelineConfig::default();
    let recordings = generate_dataset(&[15, 15, 15, 15], 30.0, 12, 11)?;

    let mut samples = Vec::new();
    for r in &recordings {
        let e = extract_cycles(&r.recording, &cfg)?;
        samples.push(SeriesSample::from_cycles(&e.cycles, Some(r.arrest_category))?);
    }

    let train_cfg = TrainConfig {
        epochs: 60,
        ..TrainConfig::default()
    };
    let (params, report) = train(&samples, &cfg.net, &train_cfg)?;
    println!(
        "loss: {:.4} (epoch 1) -> {:.4} (epoch {})",
        report.loss_history[0],
        report.loss_history.last().unwrap(),
        report.loss_history.len()
    );
    println!("training accuracy: {:.3}", report.train_accuracy);

    let mut confusion = [[0usize; 4]; 4];
    for (s, r) in samples.iter().zip(&recordings) {
        let pred = predict_arrest(&params, s)?;
        confusion[r.arrest_category as usize][pred as usize] += 1;
    }
    println!("\narrest confusion (rows = truth 0-3, columns = predicted):");
    for row in confusion {
        println!("  {row:?}");
    }

    // serialization round trip is bit-exact
    let mut buf = Vec::new();
    save_model(&params, &mut buf)?;
    let restored = load_model(&buf[..])?;
    let probs_a = forward(&params, &samples[0])?;
    let probs_b = forward(&restored, &samples[0])?;
    assert_eq!(probs_a, probs_b);
    println!(
        "\nmodel file: {} bytes, checksum verified, probabilities bit-identical after reload",
        buf.len()
    );
    Ok(())
}
