//! Synthetic ground-truth worlds.
//!
//! Each location draws a latent vector `z ~ N(0, I)`; each attribute draws
//! weights `w_a`, an offset `c_a` and a concentration `τ*_a`. The generating
//! prior of a pair is `μ* = logistic(w_a·z + c_a)` with `τ*_a`, and the true
//! yes rate is drawn from it: `θ ~ Beta(μ*τ*, (1 − μ*)τ*)`. Factual
//! attributes get large weights and a high concentration, so θ sits near 0
//! or 1; subjective ones stay mid-range.
//!
//! Vote counts follow a zero-inflated geometric law. With `p0 = Pr(k = 0)`
//! and a geometric on `{1, 2, ...}` of mean `m`, the fraction of voted pairs
//! is `1 − p0` and the fraction of voted pairs with one vote is `1/m`, so
//! `p0 = 0.87, m = 2` gives 13% voted and half of those single-vote.
//!
//! Side information is a bag of tokens: each draw is a noise word with
//! probability `noise_token_rate`, otherwise a uniformly chosen attribute's
//! `+` token with probability θ or its `−` token otherwise.
//!
//! Every location uses its own RNG stream (stream id = location index), so
//! the output does not depend on generation order.

use std::collections::BTreeMap;
use std::path::Path;

use rand_distr::{Beta, Distribution, Geometric, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::consensus::{BetaBelief, VoteCount};
use crate::dataset::{Dataset, PairKey};
use crate::error::{Error, Result};
use crate::estimators::LocationRecord;
use crate::numerics::{binomial_sample, logistic, RngStream};

/// Stream id reserved for attribute parameters.
const ATTRIBUTE_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VoteDistribution {
    ZeroInflatedGeometric {
        p0: f64,
        mean_votes: f64,
    },
    /// Exactly `votes` votes on every pair.
    Constant {
        votes: u32,
    },
}

impl VoteDistribution {
    fn validate(&self) -> Result<()> {
        match *self {
            VoteDistribution::ZeroInflatedGeometric { p0, mean_votes } => {
                if !(0.0..=1.0).contains(&p0) {
                    return Err(Error::config("votes.p0", "must lie in [0, 1]"));
                }
                if !(mean_votes >= 1.0 && mean_votes.is_finite()) {
                    return Err(Error::config("votes.mean_votes", "must be at least 1"));
                }
            }
            VoteDistribution::Constant { .. } => {}
        }
        Ok(())
    }

    fn sample(&self, rng: &mut RngStream) -> u32 {
        match *self {
            VoteDistribution::ZeroInflatedGeometric { p0, mean_votes } => {
                if rng.bernoulli(p0) {
                    return 0;
                }
                let g = Geometric::new(1.0 / mean_votes).expect("validated");
                (g.sample(rng) + 1).min(u32::MAX as u64) as u32
            }
            VoteDistribution::Constant { votes } => votes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    pub locations: usize,
    pub attributes: usize,
    pub latent_dim: usize,
    pub factual_fraction: f64,
    pub votes: VoteDistribution,
    pub tokens_per_location: usize,
    pub noise_token_rate: f64,
    pub noise_vocabulary: usize,
    /// Weight scale of subjective and factual attributes.
    pub subjective_scale: f64,
    pub factual_scale: f64,
    /// Concentration `τ*` of subjective and factual attributes.
    pub subjective_tau: f64,
    pub factual_tau: f64,
    /// Fraction of pairs, voted or not, that receive a gold label.
    pub gold_fraction: f64,
    pub seed: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            locations: 10_000,
            attributes: 20,
            latent_dim: 4,
            factual_fraction: 0.5,
            votes: VoteDistribution::ZeroInflatedGeometric {
                p0: 0.87,
                mean_votes: 2.0,
            },
            tokens_per_location: 4,
            noise_token_rate: 0.3,
            noise_vocabulary: 500,
            subjective_scale: 1.5,
            factual_scale: 3.0,
            subjective_tau: 6.0,
            factual_tau: 30.0,
            gold_fraction: 0.1,
            seed: 0,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("locations", self.locations),
            ("attributes", self.attributes),
            ("latent_dim", self.latent_dim),
            ("noise_vocabulary", self.noise_vocabulary),
        ] {
            if v == 0 {
                return Err(Error::config(field, "must be at least 1"));
            }
        }
        for (field, p) in [
            ("factual_fraction", self.factual_fraction),
            ("noise_token_rate", self.noise_token_rate),
            ("gold_fraction", self.gold_fraction),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::config(field, "must lie in [0, 1]"));
            }
        }
        for (field, v) in [
            ("subjective_scale", self.subjective_scale),
            ("factual_scale", self.factual_scale),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(field, "must be finite and non-negative"));
            }
        }
        for (field, v) in [
            ("subjective_tau", self.subjective_tau),
            ("factual_tau", self.factual_tau),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(field, "must be positive and finite"));
            }
        }
        self.votes.validate()
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self =
            toml::from_str(text).map_err(|e| Error::config("config", e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn location_id(&self, l: usize) -> String {
        format!("loc{l:0width$}", width = digits(self.locations))
    }

    pub fn attribute_id(&self, a: usize) -> String {
        format!("a{a:0width$}", width = digits(self.attributes))
    }
}

fn digits(n: usize) -> usize {
    (n.saturating_sub(1)).max(1).to_string().len()
}

/// Per-attribute generating parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeParams {
    pub weights: Vec<f64>,
    pub offset: f64,
    pub tau: f64,
    pub factual: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticWorld {
    pub config: WorldConfig,
    pub attributes: Vec<AttributeParams>,
    /// Dataset with true θ, generating prior and gold labels attached.
    pub data: Dataset,
}

impl SyntheticWorld {
    pub fn export(&self, dir: &Path, with_prior: bool) -> Result<()> {
        self.data.save(dir, with_prior)
    }
}

fn attribute_params(cfg: &WorldConfig) -> Vec<AttributeParams> {
    let mut rng = RngStream::new(cfg.seed, ATTRIBUTE_STREAM);
    let factual_count = (cfg.factual_fraction * cfg.attributes as f64).round() as usize;
    let norm = (cfg.latent_dim as f64).sqrt();
    (0..cfg.attributes)
        .map(|a| {
            let factual = a < factual_count;
            let scale = if factual {
                cfg.factual_scale
            } else {
                cfg.subjective_scale
            };
            let weights = (0..cfg.latent_dim)
                .map(|_| {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    scale * g / norm
                })
                .collect::<Vec<f64>>();
            let offset = rng.uniform_range(-0.5, 0.5) * scale;
            AttributeParams {
                weights,
                offset,
                tau: if factual {
                    cfg.factual_tau
                } else {
                    cfg.subjective_tau
                },
                factual,
            }
        })
        .collect()
}

/// Draws θ from `belief`, guarding the sampler against its degenerate edges.
fn sample_theta(belief: &BetaBelief, rng: &mut RngStream) -> f64 {
    let d = Beta::new(belief.alpha(), belief.beta()).expect("positive shape");
    let t: f64 = d.sample(rng);
    if t.is_nan() {
        if belief.mu() >= 0.5 {
            1.0
        } else {
            0.0
        }
    } else {
        t.clamp(0.0, 1.0)
    }
}

/// Majority of three independent Bernoulli(θ) vetted workers.
pub fn simulate_gold(theta: f64, rng: &mut RngStream) -> Result<bool> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::domain(
            "simulate_gold",
            format!("theta {theta} outside [0, 1]"),
        ));
    }
    let yes = (0..3).filter(|_| rng.bernoulli(theta)).count();
    Ok(yes >= 2)
}

pub fn generate(cfg: &WorldConfig) -> Result<SyntheticWorld> {
    cfg.validate()?;
    let attrs = attribute_params(cfg);
    let n_attr = cfg.attributes;
    let attribute_ids: Vec<String> = (0..n_attr).map(|a| cfg.attribute_id(a)).collect();

    let mut records = Vec::with_capacity(cfg.locations);
    let mut votes = Vec::with_capacity(cfg.locations * n_attr);
    let mut theta = Vec::with_capacity(cfg.locations * n_attr);
    let mut prior = Vec::with_capacity(cfg.locations * n_attr);
    let mut gold = BTreeMap::new();

    for l in 0..cfg.locations {
        let mut rng = RngStream::new(cfg.seed, l as u64);
        let z: Vec<f64> = (0..cfg.latent_dim)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let row_start = theta.len();
        for p in &attrs {
            let logit = p.offset + p.weights.iter().zip(&z).map(|(w, x)| w * x).sum::<f64>();
            let belief = BetaBelief::new(logistic(logit), p.tau)?;
            theta.push(sample_theta(&belief, &mut rng));
            prior.push(belief);
        }
        let row = &theta[row_start..];

        let mut tokens = Vec::with_capacity(cfg.tokens_per_location);
        for _ in 0..cfg.tokens_per_location {
            if rng.bernoulli(cfg.noise_token_rate) {
                tokens.push(format!("w{}", rng.below(cfg.noise_vocabulary)));
            } else {
                let a = rng.below(n_attr);
                let sign = if rng.bernoulli(row[a]) { '+' } else { '-' };
                tokens.push(format!("{}{sign}", attribute_ids[a]));
            }
        }
        records.push(LocationRecord::new(cfg.location_id(l), tokens));

        for &t in row {
            let k = cfg.votes.sample(&mut rng);
            let yes = binomial_sample(&mut rng, k as u64, t)? as u32;
            votes.push(VoteCount::new(yes, k - yes));
        }
        for (a, &t) in row.iter().enumerate() {
            if rng.bernoulli(cfg.gold_fraction) {
                gold.insert(PairKey::new(l, a), simulate_gold(t, &mut rng)?);
            }
        }
    }

    let data = Dataset::new(records, attribute_ids, votes)?
        .with_gold(gold)?
        .with_true_theta(theta)?
        .with_generating_prior(prior)?;
    Ok(SyntheticWorld {
        config: cfg.clone(),
        attributes: attrs,
        data,
    })
}
