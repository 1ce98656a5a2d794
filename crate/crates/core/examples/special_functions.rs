//! Special functions behind the beta-binomial model.
//!
//! ```text
//! cargo run --example special_functions
//! ```

use yesrate::numerics::{
    beta_cdf, beta_sf, binomial_sample, digamma, log_beta, log_gamma, RngStream,
};

fn main() -> yesrate::Result<()> {
    for x in [0.5, 1.0, 2.0, 10.5, 1e6] {
        println!(
            "x = {x:>9}: lnΓ = {:>22.15}  ψ = {:>20.15}",
            log_gamma(x)?,
            digamma(x)?
        );
    }
    println!(
        "ln B(2, 3) = {:.12} (ln 1/12 = {:.12})",
        log_beta(2.0, 3.0)?,
        (1.0f64 / 12.0).ln()
    );

    // Pr(θ ≤ x) and Pr(θ ≥ x) for θ ~ Beta(3, 2)
    for x in [0.25, 0.5, 0.66, 0.9] {
        println!(
            "Beta(3,2): cdf({x}) = {:.10}  sf({x}) = {:.10}",
            beta_cdf(x, 3.0, 2.0)?,
            beta_sf(x, 3.0, 2.0)?
        );
    }

    let mut rng = RngStream::new(42, 0);
    let draws: Vec<u64> = (0..8)
        .map(|_| binomial_sample(&mut rng, 50, 0.3))
        .collect::<Result<_, _>>()?;
    println!("Binomial(50, 0.3) draws from stream (42, 0): {draws:?}");
    Ok(())
}
