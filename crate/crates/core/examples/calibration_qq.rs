//! Q-Q calibration of predicted vote outcomes for the (n = 1, Y = 1) and
//! (n = 2, Y = 2) cohorts, for the generating prior and a trained ML model.
//!
//! ```text
//! cargo run --release --example calibration_qq
//! ```

use yesrate::consensus::BetaBelief;
use yesrate::dataset::Dataset;
use yesrate::estimators::{
    AlienEncoding, Architecture, Estimator, EstimatorSpec, TrainConfig, TrainingExample,
};
use yesrate::evaluation::calibration;
use yesrate::world::{generate, WorldConfig};

fn print_tables(name: &str, data: &Dataset, beliefs: &[BetaBelief]) -> yesrate::Result<()> {
    for (n, yes) in [(1, 1), (2, 2)] {
        let t = calibration(
            beliefs
                .iter()
                .copied()
                .zip(data.vote_matrix().iter().copied()),
            n,
            yes,
            10,
        )?;
        println!("{name}, n = {n}, Y = {yes} ({} pairs)", t.cohort());
        println!("  {:>9} {:>9} {:>7}", "predicted", "observed", "pairs");
        for b in &t.bins {
            println!(
                "  {:>9.3} {:>9.3} {:>7}",
                b.mean_predicted, b.empirical, b.count
            );
        }
    }
    Ok(())
}

fn main() -> yesrate::Result<()> {
    let world = generate(&WorldConfig::default())?;
    let data = &world.data;
    print_tables(
        "generating prior",
        data,
        data.generating_prior().expect("synthetic"),
    )?;

    let spec = EstimatorSpec::smoke(Architecture::Ml, AlienEncoding::None, data.num_attributes());
    let mut est = Estimator::new(spec, data.attributes().to_vec(), 7)?;
    est.train(
        &TrainConfig::default(),
        &TrainingExample::from_dataset(&spec, data)?,
        |_| {},
    )?;
    print_tables("trained ML", data, &est.dataset_beliefs(data)?)?;

    let csv = std::env::temp_dir().join("yesrate-qq.csv");
    let table = calibration(
        est.dataset_beliefs(data)?
            .into_iter()
            .zip(data.vote_matrix().iter().copied()),
        1,
        1,
        10,
    )?;
    table.write_csv(std::fs::File::create(&csv).map_err(|e| yesrate::Error::Io {
        path: csv.clone(),
        source: e,
    })?)?;
    println!("wrote {}", csv.display());
    Ok(())
}
