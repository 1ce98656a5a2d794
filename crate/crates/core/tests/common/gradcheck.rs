//! Central-difference check of the total log evidence gradient on a toy set.

use yesrate::consensus::VoteCount;
use yesrate::estimators::{
    encode_alien, AlienEncoding, Architecture, Estimator, EstimatorSpec, TokenBag, TrainingExample,
};

pub const STEP: f64 = 1e-4;
pub const REL_TOL: f64 = 1e-3;

fn tiny(arch: Architecture, enc: AlienEncoding) -> EstimatorSpec {
    EstimatorSpec {
        architecture: arch,
        alien_encoding: enc,
        embedding_dim: 4,
        hidden_layers: 1,
        hidden_width: 8,
        vocab_buckets: 16,
        attribute_count: 3,
        alien_width: 3,
    }
}

fn toy_set(spec: &EstimatorSpec) -> Vec<TrainingExample> {
    let locations: [(&[&str], [VoteCount; 3]); 3] = [
        (
            &["quiet", "patio", "wine"],
            [
                VoteCount::new(3, 1),
                VoteCount::new(0, 2),
                VoteCount::new(1, 0),
            ],
        ),
        (
            &["loud", "tv", "tv"],
            [
                VoteCount::new(0, 4),
                VoteCount::new(2, 0),
                VoteCount::new(0, 0),
            ],
        ),
        (
            &["patio"],
            [
                VoteCount::new(1, 1),
                VoteCount::new(0, 0),
                VoteCount::new(5, 2),
            ],
        ),
    ];
    let mut out = Vec::new();
    for (tokens, votes) in locations {
        let bag = TokenBag::from_tokens(tokens, spec.vocab_buckets);
        for (a, v) in votes.iter().enumerate() {
            if v.is_empty() {
                continue;
            }
            let alien = spec
                .architecture
                .uses_alien_votes()
                .then(|| encode_alien(&votes, a, spec.alien_encoding).unwrap());
            out.push(TrainingExample {
                tokens: bag.clone(),
                alien,
                attribute: a,
                votes: *v,
            });
        }
    }
    out
}

fn total(est: &Estimator, set: &[TrainingExample]) -> f64 {
    est.objective_and_gradient(set).unwrap().0
}

/// Outcome of comparing analytic and central-difference gradients over every
/// parameter entry of a tiny estimator.
pub struct GradCheck {
    pub checked: usize,
    pub worst: f64,
    pub failures: Vec<String>,
}

pub fn check(arch: Architecture, enc: AlienEncoding) -> GradCheck {
    let spec = tiny(arch, enc);
    let set = toy_set(&spec);
    let mut est = Estimator::new(spec, vec!["a".into(), "b".into(), "c".into()], 2024).unwrap();
    let (_, grad) = est.objective_and_gradient(&set).unwrap();
    let mut checked = 0usize;
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for info in est.parameter_info() {
        let analytic = grad.tensor(&info.name).unwrap();
        for (i, &g) in analytic.iter().enumerate() {
            let orig = est.parameter(&info.name).unwrap()[i];
            est.parameter_mut(&info.name).unwrap()[i] = orig + STEP;
            let up = total(&est, &set);
            est.parameter_mut(&info.name).unwrap()[i] = orig - STEP;
            let down = total(&est, &set);
            est.parameter_mut(&info.name).unwrap()[i] = orig;
            let numeric = (up - down) / (2.0 * STEP);
            let scale = g.abs().max(numeric.abs());
            let err = if scale < 1e-7 {
                0.0
            } else {
                (g - numeric).abs() / scale
            };
            worst = worst.max(err);
            if !(err <= REL_TOL) {
                failures.push(format!(
                    "{}-{} {}[{i}]: analytic {g:e} vs numeric {numeric:e}",
                    arch.as_str(),
                    enc.as_str(),
                    info.name
                ));
            }
            checked += 1;
        }
    }
    GradCheck {
        checked,
        worst,
        failures,
    }
}
