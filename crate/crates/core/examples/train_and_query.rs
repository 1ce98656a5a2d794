//! Trains an AV estimator, saves a checkpoint, reloads it and queries pairs,
//! including a cold-start location.
//!
//! ```text
//! cargo run --release --example train_and_query
//! ```

use yesrate::consensus::{posterior, predict, PredictorConfig, VoteCount};
use yesrate::dataset::PairKey;
use yesrate::estimators::{
    encode_alien, AlienEncoding, Architecture, Estimator, EstimatorSpec, LocationRecord,
    TrainConfig, TrainingExample,
};
use yesrate::world::{generate, WorldConfig};

fn main() -> yesrate::Result<()> {
    let world = generate(&WorldConfig {
        locations: 3000,
        ..WorldConfig::default()
    })?;
    let data = &world.data;
    let spec = EstimatorSpec::smoke(Architecture::Av, AlienEncoding::Raw, data.num_attributes());
    let mut est = Estimator::new(spec, data.attributes().to_vec(), 0)?;
    let examples = TrainingExample::from_dataset(&spec, data)?;
    let cfg = TrainConfig {
        epochs: 8,
        ..TrainConfig::default()
    };
    let report = est.train(&cfg, &examples, |e| {
        println!(
            "epoch {:>2}: mean log evidence {:.5}",
            e.epoch, e.mean_log_evidence
        )
    })?;
    println!(
        "{} voted pairs, {:.5} -> {:.5}",
        examples.len(),
        report.initial,
        report.final_mean()
    );

    let path = std::env::temp_dir().join("yesrate-example.ck");
    est.save(&path)?;
    let est = Estimator::load(&path)?;
    println!(
        "checkpoint {} ({} optimizer steps)",
        path.display(),
        est.step()
    );

    let decide = PredictorConfig::default();
    let voted = (0..data.num_locations()).filter(|&l| !data.votes(PairKey::new(l, 0)).is_empty());
    for l in voted.take(3) {
        let key = PairKey::new(l, 0);
        let prior = est.pair_belief(data, key)?;
        let votes = data.votes(key);
        let post = posterior(&prior, votes);
        println!(
            "{} {}: prior μ {:.3} τ {:.2} | votes {}/{} | posterior μ {:.3} → {:?} (true θ {:.3})",
            data.locations()[l].id,
            data.attributes()[0],
            prior.mu(),
            prior.tau(),
            votes.yes,
            votes.no,
            post.mu(),
            predict(&post, &decide)?,
            data.true_theta(key).unwrap_or(f64::NAN)
        );
    }

    // A location never seen in training: no tokens, no votes on other attributes.
    let cold = LocationRecord::cold("new-place");
    let alien = encode_alien(
        &vec![VoteCount::default(); data.num_attributes()],
        0,
        spec.alien_encoding,
    )?;
    let b = est.forward(&est.tokens(&cold), Some(&alien), 0)?;
    println!("cold start {}: μ {:.3} τ {:.2}", cold.id, b.mu(), b.tau());
    Ok(())
}
