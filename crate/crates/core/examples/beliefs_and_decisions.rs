//! Beta beliefs over a yes rate: evidence, conjugate updates, predictive
//! probabilities and the two decision rules.
//!
//! ```text
//! cargo run --example beliefs_and_decisions
//! ```

use yesrate::consensus::{
    log_evidence, posterior, predict, predict_high_recall, predictive_pmf, BetaBelief,
    PredictorConfig, VoteCount,
};

fn show(label: &str, b: &BetaBelief, cfg: &PredictorConfig) -> yesrate::Result<()> {
    println!(
        "{label:<28} μ = {:.4}  τ = {:>8.3}  Pr(θ ≥ {}) = {:.4}  confident: {:<12?} high-recall: {:?}",
        b.mu(),
        b.tau(),
        cfg.mu_min(),
        b.sf(cfg.mu_min())?,
        predict(b, cfg)?,
        predict_high_recall(b, cfg)
    );
    Ok(())
}

fn main() -> yesrate::Result<()> {
    let cfg = PredictorConfig::default();
    let prior = BetaBelief::new(0.7, 10.0)?;
    show("prior Beta(7, 3)", &prior, &cfg)?;

    for votes in [
        VoteCount::new(1, 0),
        VoteCount::new(3, 1),
        VoteCount::new(12, 1),
        VoteCount::new(0, 5),
    ] {
        let post = posterior(&prior, votes);
        println!(
            "  votes {}/{}: ln evidence = {:.5}",
            votes.yes,
            votes.no,
            log_evidence(&prior, votes)
        );
        show(
            &format!("  posterior after {}/{}", votes.yes, votes.no),
            &post,
            &cfg,
        )?;
    }

    let uniform = BetaBelief::uniform();
    show("uniform prior", &uniform, &cfg)?;
    show(
        "uniform after 8 yes",
        &posterior(&uniform, VoteCount::new(8, 0)),
        &cfg,
    )?;

    println!("predictive Pr(Y of 3 | Beta(7, 3)):");
    for y in 0..=3 {
        println!("  Y = {y}: {:.5}", predictive_pmf(&prior, 3, y)?);
    }

    // A sharper confidence requirement turns borderline Yes into abstentions.
    let b = posterior(&prior, VoteCount::new(4, 0));
    for delta in [0.2, 0.05, 0.01] {
        let cfg = PredictorConfig::new(0.66, delta)?;
        println!("δ = {delta:<5} → {:?}", predict(&b, &cfg)?);
    }
    Ok(())
}
