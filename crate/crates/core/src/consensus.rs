//! The beta-binomial observation model.
//!
//! Each location-attribute pair has a latent yes rate `θ ~ Beta(μτ, τ(1−μ))`
//! and its votes are `Y ~ B(k, θ)`. `(μ, τ)` is the public parameterization of
//! a [`BetaBelief`]; `α = μτ` and `β = τ(1 − μ)` are derived from it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{beta_cdf, beta_sf, ln_beta, ln_gamma, psi};

pub const MU_FLOOR: f64 = 1e-6;
pub const MU_CEIL: f64 = 1.0 - 1e-6;
pub const TAU_FLOOR: f64 = 1e-3;
pub const TAU_CEIL: f64 = 1e4;

/// Observed yes/no tallies for one pair.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VoteCount {
    pub yes: u32,
    pub no: u32,
}

impl VoteCount {
    pub const fn new(yes: u32, no: u32) -> Self {
        Self { yes, no }
    }

    pub fn total(&self) -> u32 {
        self.yes + self.no
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }
}

impl std::ops::Add for VoteCount {
    type Output = VoteCount;

    fn add(self, rhs: Self) -> Self {
        VoteCount::new(self.yes + rhs.yes, self.no + rhs.no)
    }
}

impl std::ops::AddAssign for VoteCount {
    fn add_assign(&mut self, rhs: Self) {
        self.yes += rhs.yes;
        self.no += rhs.no;
    }
}

/// A beta distribution over a pair's yes rate.
///
/// Stored as a prior shape plus integer tallies of absorbed votes, so the
/// effective shape is `(α₀ + yes, β₀ + no)` and batched updates are exact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaBelief {
    alpha0: f64,
    beta0: f64,
    yes: u64,
    no: u64,
}

impl BetaBelief {
    /// Builds a belief from `(μ, τ)`, clamping μ to `[1e-6, 1 − 1e-6]` and τ to
    /// `[1e-3, 1e4]`. Non-finite inputs are rejected.
    pub fn new(mu: f64, tau: f64) -> Result<Self> {
        if !mu.is_finite() || !tau.is_finite() {
            return Err(Error::domain(
                "BetaBelief::new",
                format!("non-finite (mu, tau) = ({mu}, {tau})"),
            ));
        }
        Ok(Self::clamped(mu, tau))
    }

    pub(crate) fn clamped(mu: f64, tau: f64) -> Self {
        let mu = mu.clamp(MU_FLOOR, MU_CEIL);
        let tau = tau.clamp(TAU_FLOOR, TAU_CEIL);
        Self::shape(mu * tau, tau * (1.0 - mu))
    }

    fn shape(alpha0: f64, beta0: f64) -> Self {
        Self {
            alpha0,
            beta0,
            yes: 0,
            no: 0,
        }
    }

    /// Builds a belief directly from shape parameters, without clamping.
    pub fn from_shape(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
            return Err(Error::domain(
                "BetaBelief::from_shape",
                format!("(alpha, beta) = ({alpha}, {beta})"),
            ));
        }
        Ok(Self::shape(alpha, beta))
    }

    /// The uniform prior `Beta(1, 1)`, i.e. μ = 0.5, τ = 2.
    pub fn uniform() -> Self {
        Self::shape(1.0, 1.0)
    }

    pub fn mu(&self) -> f64 {
        self.alpha() / self.tau()
    }

    pub fn tau(&self) -> f64 {
        self.alpha() + self.beta()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha0 + self.yes as f64
    }

    pub fn beta(&self) -> f64 {
        self.beta0 + self.no as f64
    }

    /// Log density of the belief at `theta ∈ (0, 1)`.
    pub fn ln_pdf(&self, theta: f64) -> f64 {
        let (a, b) = (self.alpha(), self.beta());
        (a - 1.0) * theta.ln() + (b - 1.0) * (-theta).ln_1p() - ln_beta(a, b)
    }

    /// `Pr(θ ≤ x)`.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        beta_cdf(x, self.alpha(), self.beta())
    }

    /// `Pr(θ ≥ x)`.
    pub fn sf(&self, x: f64) -> Result<f64> {
        beta_sf(x, self.alpha(), self.beta())
    }
}

/// `ln C(k, y)` via log-gamma.
pub(crate) fn ln_choose(k: u32, y: u32) -> f64 {
    if y == 0 || y == k {
        return 0.0;
    }
    let (k, y) = (k as f64, y as f64);
    ln_gamma(k + 1.0) - ln_gamma(y + 1.0) - ln_gamma(k - y + 1.0)
}

/// Log marginal likelihood of `votes` under `belief`:
/// `ln[C(k, Y) · B(Y + α, N + β) / B(α, β)]`.
pub fn log_evidence(belief: &BetaBelief, votes: VoteCount) -> f64 {
    if votes.is_empty() {
        return 0.0;
    }
    let (a, b) = (belief.alpha(), belief.beta());
    let (y, n) = (votes.yes as f64, votes.no as f64);
    ln_choose(votes.total(), votes.yes) + ln_beta(y + a, n + b) - ln_beta(a, b)
}

/// Partial derivatives of the log evidence with respect to `(α, β)`.
pub(crate) fn log_evidence_shape_grad(alpha: f64, beta: f64, votes: VoteCount) -> (f64, f64) {
    if votes.is_empty() {
        return (0.0, 0.0);
    }
    let (y, n) = (votes.yes as f64, votes.no as f64);
    let total = alpha + beta;
    let common = psi(total) - psi(total + y + n);
    let d_alpha = if votes.yes == 0 {
        0.0
    } else {
        psi(alpha + y) - psi(alpha)
    };
    let d_beta = if votes.no == 0 {
        0.0
    } else {
        psi(beta + n) - psi(beta)
    };
    (d_alpha + common, d_beta + common)
}

/// Gradient of [`log_evidence`] with respect to `(μ, τ)`.
pub fn log_evidence_grad(belief: &BetaBelief, votes: VoteCount) -> (f64, f64) {
    let (da, db) = log_evidence_shape_grad(belief.alpha(), belief.beta(), votes);
    let (mu, tau) = (belief.mu(), belief.tau());
    // α = μτ, β = τ(1 − μ)
    (tau * (da - db), mu * da + (1.0 - mu) * db)
}

/// Conjugate update: `Beta(α + Y, β + N)`.
pub fn posterior(belief: &BetaBelief, votes: VoteCount) -> BetaBelief {
    BetaBelief {
        yes: belief.yes + votes.yes as u64,
        no: belief.no + votes.no as u64,
        ..*belief
    }
}

/// Beta-binomial probability of exactly `yes` successes in `total` votes.
pub fn predictive_pmf(belief: &BetaBelief, total: u32, yes: u32) -> Result<f64> {
    if yes > total {
        return Err(Error::domain(
            "predictive_pmf",
            format!("yes = {yes} exceeds total = {total}"),
        ));
    }
    Ok(log_evidence(belief, VoteCount::new(yes, total - yes)).exp())
}

/// Thresholds of the confidence-gated predictor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictorConfig {
    mu_min: f64,
    delta: f64,
}

impl PredictorConfig {
    pub const DEFAULT_MU_MIN: f64 = 0.66;
    pub const DEFAULT_DELTA: f64 = 0.05;

    /// `mu_min` must lie in `(0.5, 1)` and `delta` in `(0, 0.5)`; otherwise the
    /// Yes and No regions could overlap.
    pub fn new(mu_min: f64, delta: f64) -> Result<Self> {
        if !(mu_min > 0.5 && mu_min < 1.0) {
            return Err(Error::config("mu_min", format!("{mu_min} not in (0.5, 1)")));
        }
        if !(delta > 0.0 && delta < 0.5) {
            return Err(Error::config("delta", format!("{delta} not in (0, 0.5)")));
        }
        Ok(Self { mu_min, delta })
    }

    pub fn mu_min(&self) -> f64 {
        self.mu_min
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Required probability mass, `1 − δ`.
    pub fn confidence(&self) -> f64 {
        1.0 - self.delta
    }
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self {
            mu_min: Self::DEFAULT_MU_MIN,
            delta: Self::DEFAULT_DELTA,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Prediction {
    Yes,
    No,
    NoPrediction,
}

/// Confidence-gated attribute predictor.
///
/// Yes when `Pr(θ ≥ μ_min) ≥ 1 − δ`, No when `Pr(θ ≤ 1 − μ_min) ≥ 1 − δ`,
/// otherwise abstain.
pub fn predict(belief: &BetaBelief, cfg: &PredictorConfig) -> Result<Prediction> {
    let upper = belief.sf(cfg.mu_min)?;
    if upper >= cfg.confidence() {
        return Ok(Prediction::Yes);
    }
    let lower = belief.cdf(1.0 - cfg.mu_min)?;
    if lower >= cfg.confidence() {
        return Ok(Prediction::No);
    }
    Ok(Prediction::NoPrediction)
}

/// Thresholds μ alone: Yes iff `μ > μ_min`. Never abstains.
pub fn predict_high_recall(belief: &BetaBelief, cfg: &PredictorConfig) -> Prediction {
    if belief.mu() > cfg.mu_min {
        Prediction::Yes
    } else {
        Prediction::No
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn belief(mu: f64, tau: f64) -> BetaBelief {
        BetaBelief::new(mu, tau).unwrap()
    }

    /// Composite Gauss–Legendre quadrature (10 points per panel) on `[lo, hi]`.
    fn integrate(f: impl Fn(f64) -> f64, lo: f64, hi: f64, panels: usize) -> f64 {
        const NODES: [f64; 5] = [
            0.148_874_338_981_631_2,
            0.433_395_394_129_247_2,
            0.679_409_568_299_024_4,
            0.865_063_366_688_984_5,
            0.973_906_528_517_171_7,
        ];
        const WEIGHTS: [f64; 5] = [
            0.295_524_224_714_752_9,
            0.269_266_719_309_996_4,
            0.219_086_362_515_982_0,
            0.149_451_349_150_580_6,
            0.066_671_344_308_688_1,
        ];
        let width = (hi - lo) / panels as f64;
        let mut total = 0.0;
        for p in 0..panels {
            let mid = lo + (p as f64 + 0.5) * width;
            let half = 0.5 * width;
            for (x, w) in NODES.iter().zip(WEIGHTS) {
                total += w * half * (f(mid - half * x) + f(mid + half * x));
            }
        }
        total
    }

    fn beta_pdf(theta: f64, a: f64, b: f64) -> f64 {
        let lg = |x: f64| crate::numerics::log_gamma(x).unwrap();
        ((a - 1.0) * theta.ln() + (b - 1.0) * (1.0 - theta).ln() + lg(a + b) - lg(a) - lg(b)).exp()
    }

    #[test]
    fn clamps_apply_at_construction() {
        let b = belief(0.0, 1e9);
        assert_eq!(b.mu(), MU_FLOOR);
        assert!((b.tau() - TAU_CEIL).abs() < 1e-9);
        let b = belief(1.5, 0.0);
        assert!((b.mu() - MU_CEIL).abs() < 1e-15);
        assert!((b.tau() - TAU_FLOOR).abs() < 1e-15);
        assert!(BetaBelief::new(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn evidence_of_no_votes_is_zero() {
        assert_eq!(log_evidence(&belief(0.3, 17.0), VoteCount::new(0, 0)), 0.0);
    }

    #[test]
    fn uniform_prior_evidence() {
        let b = BetaBelief::uniform();
        for k in 1..20u32 {
            for y in 0..=k {
                let v = log_evidence(&b, VoteCount::new(y, k - y));
                assert!((v - (1.0 / (k as f64 + 1.0)).ln()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn evidence_matches_quadrature() {
        let b = belief(0.7, 10.0);
        let integral = integrate(
            |t| 4.0 * t.powi(3) * (1.0 - t) * beta_pdf(t, 7.0, 3.0),
            0.0,
            1.0,
            40,
        );
        let got = log_evidence(&b, VoteCount::new(3, 1));
        assert!(((got - integral.ln()) / integral.ln()).abs() < 1e-6);
    }

    #[test]
    fn gradient_zero_without_votes_and_symmetric() {
        assert_eq!(
            log_evidence_grad(&belief(0.2, 3.0), VoteCount::default()),
            (0.0, 0.0)
        );
        for m in 1..10 {
            let (dmu, _) = log_evidence_grad(&belief(0.5, 4.0), VoteCount::new(m, m));
            assert!(dmu.abs() < 1e-12);
        }
    }

    #[test]
    fn posterior_examples() {
        let b = belief(0.37, 5.5);
        assert_eq!(posterior(&b, VoteCount::default()), b);
        let p = posterior(&BetaBelief::uniform(), VoteCount::new(8, 0));
        assert_eq!(p.mu(), 0.9);
        assert_eq!(p.tau(), 10.0);
    }

    #[test]
    fn predictive_examples() {
        let u = BetaBelief::uniform();
        for y in 0..=2 {
            assert!((predictive_pmf(&u, 2, y).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        }
        let b = belief(0.7, 10.0);
        assert!((predictive_pmf(&b, 1, 1).unwrap() - 0.7).abs() < 1e-12);
        assert!((predictive_pmf(&b, 2, 2).unwrap() - 56.0 / 110.0).abs() < 1e-12);
        let quad = integrate(|t| t * t * beta_pdf(t, 7.0, 3.0), 0.0, 1.0, 40);
        assert!((quad - 56.0 / 110.0).abs() < 1e-10);
        assert!(predictive_pmf(&b, 2, 3).is_err());
    }

    #[test]
    fn predictor_examples() {
        let cfg = PredictorConfig::default();
        assert_eq!(predict(&belief(0.9, 100.0), &cfg).unwrap(), Prediction::Yes);
        assert_eq!(
            predict(&BetaBelief::uniform(), &cfg).unwrap(),
            Prediction::NoPrediction
        );
        assert_eq!(predict(&belief(0.05, 200.0), &cfg).unwrap(), Prediction::No);

        let upper = integrate(|t| beta_pdf(t, 90.0, 10.0), 0.66, 1.0, 40);
        assert!(upper > 0.9999);
        let lower = integrate(|t| beta_pdf(t, 10.0, 190.0), 0.0, 0.34, 40);
        assert!(lower > 0.95);
    }

    #[test]
    fn high_recall_examples() {
        let cfg = PredictorConfig::default();
        assert_eq!(
            predict_high_recall(&belief(0.67, 0.1), &cfg),
            Prediction::Yes
        );
        assert_eq!(
            predict_high_recall(&belief(0.66, 1000.0), &cfg),
            Prediction::No
        );
        assert_eq!(predict_high_recall(&belief(0.2, 1.0), &cfg), Prediction::No);
    }

    #[test]
    fn predictor_config_validation() {
        assert!(PredictorConfig::new(0.5, 0.05).is_err());
        assert!(PredictorConfig::new(1.0, 0.05).is_err());
        assert!(PredictorConfig::new(0.7, 0.5).is_err());
        assert!(PredictorConfig::new(0.7, 0.0).is_err());
        let cfg = PredictorConfig::default();
        assert_eq!(cfg.mu_min(), 0.66);
        assert!((cfg.confidence() - 0.95).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn posterior_batches_compose(
            mu in 0.01f64..0.99, tau in 0.01f64..500.0,
            y1 in 0u32..40, n1 in 0u32..40, y2 in 0u32..40, n2 in 0u32..40,
        ) {
            let b = belief(mu, tau);
            let two = posterior(&posterior(&b, VoteCount::new(y1, n1)), VoteCount::new(y2, n2));
            let one = posterior(&b, VoteCount::new(y1 + y2, n1 + n2));
            prop_assert_eq!(two.alpha(), one.alpha());
            prop_assert_eq!(two.beta(), one.beta());
        }

        #[test]
        fn yes_implies_high_recall_yes(mu in 0.001f64..0.999, tau in 0.001f64..10_000.0) {
            let b = belief(mu, tau);
            let cfg = PredictorConfig::default();
            if predict(&b, &cfg).unwrap() == Prediction::Yes {
                prop_assert_eq!(predict_high_recall(&b, &cfg), Prediction::Yes);
            }
        }

        #[test]
        fn predict_monotone_in_mu(mu in 0.01f64..0.98, bump in 0.0f64..0.5, tau in 0.01f64..2_000.0) {
            let cfg = PredictorConfig::default();
            let higher = (mu + bump).min(0.999);
            if predict(&belief(mu, tau), &cfg).unwrap() == Prediction::Yes {
                prop_assert_eq!(predict(&belief(higher, tau), &cfg).unwrap(), Prediction::Yes);
            }
        }
    }
}
