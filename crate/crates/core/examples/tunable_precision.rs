//! False-positive rate of confident Yes decisions as δ varies, audited
//! against the true yes rates of a synthetic world.
//!
//! ```text
//! cargo run --release --example tunable_precision
//! ```

use yesrate::consensus::{predict, PredictorConfig};
use yesrate::evaluation::{fpr_audit, mode_belief, Mode};
use yesrate::world::{generate, WorldConfig};

fn main() -> yesrate::Result<()> {
    let world = generate(&WorldConfig {
        locations: 5000,
        ..WorldConfig::default()
    })?;
    let data = &world.data;
    let prior = data.generating_prior().expect("synthetic");
    let theta = data.true_theta_matrix().expect("synthetic");
    println!(
        "{:>6} {:>10} {:>8} {:>8} {:>8}",
        "δ", "mode", "yes", "fpr", "bound"
    );
    for delta in [0.2, 0.1, 0.05, 0.01, 0.001] {
        let cfg = PredictorConfig::new(0.66, delta)?;
        for mode in [Mode::Prior, Mode::Posterior] {
            let preds = prior
                .iter()
                .zip(data.vote_matrix())
                .map(|(b, v)| predict(&mode_belief(b, *v, mode), &cfg))
                .collect::<yesrate::Result<Vec<_>>>()?;
            let audit = fpr_audit(preds.into_iter().zip(theta.iter().copied()), cfg.mu_min());
            println!(
                "{delta:>6} {:>10} {:>8} {:>8.4} {:>8.4}",
                format!("{mode:?}"),
                audit.yes_count,
                audit.rate,
                audit.bound(delta)
            );
        }
    }
    Ok(())
}
