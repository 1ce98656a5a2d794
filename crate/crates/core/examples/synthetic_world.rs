//! Generates a synthetic world, prints its shape and writes it to disk.
//!
//! ```text
//! cargo run --release --example synthetic_world -- [out-dir] [locations] [seed]
//! ```

use std::path::PathBuf;

use yesrate::numerics::RngStream;
use yesrate::world::{generate, simulate_gold, WorldConfig};

fn main() -> yesrate::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = args.next().map(PathBuf::from);
    let defaults = WorldConfig::default();
    let cfg = WorldConfig {
        locations: args
            .next()
            .and_then(|s| s.parse().ok())
            .unwrap_or(defaults.locations),
        seed: args
            .next()
            .and_then(|s| s.parse().ok())
            .unwrap_or(defaults.seed),
        ..defaults
    };
    let world = generate(&cfg)?;
    let data = &world.data;
    let s = data.sparsity();
    println!(
        "{} locations x {} attributes: {:.1}% of pairs voted, {:.1}% of those with one vote, {} gold labels",
        data.num_locations(),
        data.num_attributes(),
        100.0 * s.voted_fraction(),
        100.0 * s.single_vote_fraction(),
        data.gold().len()
    );
    for (id, a) in data.attributes().iter().zip(&world.attributes).take(4) {
        println!(
            "  {id}: {} τ* = {}, offset {:+.2}",
            if a.factual {
                "factual   "
            } else {
                "subjective"
            },
            a.tau,
            a.offset
        );
    }
    let first = &data.locations()[0];
    println!("  {} tokens: {}", first.id, first.tokens.join(" "));

    // Three vetted workers at θ = 0.66 disagree with the truth about a quarter of the time.
    let mut rng = RngStream::new(1, 0);
    let trials = 100_000;
    let zeros = (0..trials)
        .filter(|_| !simulate_gold(0.66, &mut rng).unwrap())
        .count();
    println!(
        "gold label 0 at θ = 0.66: {:.3}",
        zeros as f64 / trials as f64
    );

    if let Some(dir) = out {
        world.export(&dir, true)?;
        println!("wrote {}", dir.display());
    }
    Ok(())
}
