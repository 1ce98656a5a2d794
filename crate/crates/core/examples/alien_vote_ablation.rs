//! How much an AV estimator leans on votes for other attributes: τ
//! histograms with and without the alien input.
//!
//! ```text
//! cargo run --release --example alien_vote_ablation
//! ```

use yesrate::consensus::PredictorConfig;
use yesrate::estimators::{
    AlienEncoding, Architecture, Estimator, EstimatorSpec, TrainConfig, TrainingExample,
};
use yesrate::evaluation::{evaluate, tau_histogram, Mode, PredictorKind};
use yesrate::world::{generate, WorldConfig};

fn main() -> yesrate::Result<()> {
    let world = generate(&WorldConfig::default())?;
    let data = &world.data;
    let spec = EstimatorSpec::smoke(Architecture::Av, AlienEncoding::Raw, data.num_attributes());
    let mut est = Estimator::new(spec, data.attributes().to_vec(), 7)?;
    est.train(
        &TrainConfig::default(),
        &TrainingExample::from_dataset(&spec, data)?,
        |_| {},
    )?;

    let with = est.dataset_beliefs(data)?;
    est.set_zero_alien(true)?;
    let without = est.dataset_beliefs(data)?;

    let hw = tau_histogram(with.iter().map(|b| b.tau()));
    let hz = tau_histogram(without.iter().map(|b| b.tau()));
    println!("{:>10} {:>10} {:>10}", "τ up to", "AV", "zeroed");
    for i in 0..hw.counts.len() {
        if hw.counts[i] + hz.counts[i] > 0 {
            println!(
                "{:>10.3} {:>10} {:>10}",
                hw.edges[i + 1],
                hw.counts[i],
                hz.counts[i]
            );
        }
    }

    let cfg = PredictorConfig::default();
    for (name, beliefs) in [("av-raw", &with), ("av-zeroed", &without)] {
        let r = evaluate(
            name,
            data,
            Some(beliefs),
            Mode::Posterior,
            PredictorKind::Confidence,
            &cfg,
        )?;
        println!(
            "{name:<10} precision {:.3} recall {:.3} mean τ {:.3}",
            r.prf.precision,
            r.prf.recall,
            r.mean_tau.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
