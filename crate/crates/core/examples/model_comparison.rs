//! Trains ML, AV and IAV on one synthetic world and prints the prior and
//! posterior scores of each, plus the zeroed-alien AV ablation.
//!
//! ```text
//! cargo run --release --example model_comparison -- [locations] [epochs] [tokens] [noise-rate] [seed]
//! ```

use std::time::Instant;

use yesrate::consensus::PredictorConfig;
use yesrate::estimators::{
    AlienEncoding, Architecture, Estimator, EstimatorSpec, TrainConfig, TrainingExample,
};
use yesrate::evaluation::{calibration, evaluate, Mode, PredictorKind};
use yesrate::world::{generate, WorldConfig};

fn main() -> yesrate::Result<()> {
    let mut args = std::env::args().skip(1);
    let locations = args.next().and_then(|s| s.parse().ok()).unwrap_or(10_000);
    let epochs = args
        .next()
        .and_then(|s| s.parse().ok())
        .unwrap_or(TrainConfig::default().epochs);
    let defaults = WorldConfig::default();
    let tokens_per_location = args
        .next()
        .and_then(|s| s.parse().ok())
        .unwrap_or(defaults.tokens_per_location);
    let noise_token_rate = args
        .next()
        .and_then(|s| s.parse().ok())
        .unwrap_or(defaults.noise_token_rate);
    let seed = args
        .next()
        .and_then(|s| s.parse().ok())
        .unwrap_or(defaults.seed);

    let world = generate(&WorldConfig {
        locations,
        tokens_per_location,
        noise_token_rate,
        seed,
        ..defaults
    })?;
    let data = &world.data;
    let s = data.sparsity();
    println!(
        "{} pairs, {:.3} voted, {:.3} of voted single-vote, {} gold",
        s.pairs,
        s.voted_fraction(),
        s.single_vote_fraction(),
        data.gold().len()
    );

    let cfg = PredictorConfig::default();
    let train = TrainConfig {
        epochs,
        ..TrainConfig::default()
    };
    let oracle = data.generating_prior().expect("synthetic world").to_vec();
    for mode in [Mode::Prior, Mode::Posterior] {
        let r = evaluate(
            "oracle",
            data,
            Some(&oracle),
            mode,
            PredictorKind::Confidence,
            &cfg,
        )?;
        println!("{}", serde_json::to_string(&r).expect("report"));
    }
    for kind in [PredictorKind::Empirical, PredictorKind::EmpiricalP] {
        let r = evaluate("votes", data, None, Mode::Posterior, kind, &cfg)?;
        println!("{}", serde_json::to_string(&r).expect("report"));
    }

    for (arch, enc) in [
        (Architecture::Ml, AlienEncoding::None),
        (Architecture::Av, AlienEncoding::Raw),
        (Architecture::Iav, AlienEncoding::Raw),
    ] {
        let spec = EstimatorSpec::smoke(arch, enc, data.num_attributes());
        let mut est = Estimator::new(spec, data.attributes().to_vec(), 7)?;
        let examples = TrainingExample::from_dataset(&spec, data)?;
        let t = Instant::now();
        let report = est.train(&train, &examples, |_| {})?;
        println!(
            "{}-{}: mean log evidence {:.4} -> {:.4} in {:.1?}",
            arch.as_str(),
            enc.as_str(),
            report.initial,
            report.final_mean(),
            t.elapsed()
        );
        let beliefs = est.dataset_beliefs(data)?;
        for (n, yes) in [(1, 1), (2, 2)] {
            let table = calibration(
                beliefs
                    .iter()
                    .copied()
                    .zip(data.vote_matrix().iter().copied()),
                n,
                yes,
                10,
            )?;
            let cells: Vec<String> = table
                .bins
                .iter()
                .map(|b| format!("{:.2}/{:.2}({})", b.mean_predicted, b.empirical, b.count))
                .collect();
            println!("  calibration n={n} yes={yes}: {}", cells.join(" "));
        }
        let mut variants = vec![(format!("{}-{}", arch.as_str(), enc.as_str()), beliefs)];
        if arch == Architecture::Av {
            est.set_zero_alien(true)?;
            variants.push(("av-zeroed".into(), est.dataset_beliefs(data)?));
        }
        for (name, beliefs) in &variants {
            for mode in [Mode::Prior, Mode::Posterior] {
                for kind in [PredictorKind::Confidence, PredictorKind::HighRecall] {
                    let r = evaluate(name, data, Some(beliefs), mode, kind, &cfg)?;
                    println!(
                        "  {name:10} {:9} {:11} p={:.3} r={:.3} f1={:.3} tau={:.2}",
                        format!("{:?}", mode),
                        format!("{:?}", kind),
                        r.prf.precision,
                        r.prf.recall,
                        r.prf.f1,
                        r.mean_tau.unwrap_or(f64::NAN)
                    );
                }
            }
        }
    }
    Ok(())
}
