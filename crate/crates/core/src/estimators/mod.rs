//! Neural estimators of per-pair beta priors.
//!
//! Three architectures share the same building blocks:
//!
//! - **ML**: one shared trunk maps side information to a location embedding
//!   `e_l`; each attribute owns a μ head and a τ head on top of it.
//! - **AV**: as ML, but the heads see `e_l ⊕ g(alien)` where `g` is a single
//!   affine layer over the location's votes on the other attributes.
//! - **IAV**: one complete network per attribute; the alien vector is
//!   concatenated to the trunk input instead of the embedding.
//!
//! μ is the logistic of the μ head, τ the softplus of the τ head; both are
//! then clamped to the ranges enforced by [`BetaBelief`]. Training maximizes
//! the total beta-binomial log evidence with Adagrad.

mod alien;
mod checkpoint;
mod features;
mod network;
mod train;

use serde::{Deserialize, Serialize};

use crate::consensus::{BetaBelief, MU_CEIL, MU_FLOOR, TAU_CEIL, TAU_FLOOR};
use crate::dataset::{Dataset, PairKey};
use crate::error::{Error, Result};
use crate::numerics::{logistic, RngStream};

pub use alien::{encode_alien, AlienEncoding, AlienVoteVector};
pub use features::{token_bucket, LocationRecord, TokenBag};
pub use train::{EpochStats, TrainConfig, TrainReport, TrainingExample};

use network::{Layout, Network, NetworkGrad};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Ml,
    Av,
    Iav,
}

impl Architecture {
    pub fn as_str(self) -> &'static str {
        match self {
            Architecture::Ml => "ml",
            Architecture::Av => "av",
            Architecture::Iav => "iav",
        }
    }

    pub fn uses_alien_votes(self) -> bool {
        self != Architecture::Ml
    }
}

impl std::str::FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ml" => Ok(Architecture::Ml),
            "av" => Ok(Architecture::Av),
            "iav" => Ok(Architecture::Iav),
            other => Err(Error::config(
                "arch",
                format!("unknown architecture `{other}`"),
            )),
        }
    }
}

/// Architecture choice and every shape needed to build its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EstimatorSpec {
    pub architecture: Architecture,
    pub alien_encoding: AlienEncoding,
    pub embedding_dim: usize,
    pub hidden_layers: usize,
    pub hidden_width: usize,
    pub vocab_buckets: usize,
    pub attribute_count: usize,
    /// Output width of the alien layer `g` (AV only).
    pub alien_width: usize,
}

impl EstimatorSpec {
    /// 285-d token embeddings and five 500-unit ReLU layers over 2^16 buckets.
    pub fn full(
        architecture: Architecture,
        alien_encoding: AlienEncoding,
        attribute_count: usize,
    ) -> Self {
        Self {
            architecture,
            alien_encoding,
            embedding_dim: 285,
            hidden_layers: 5,
            hidden_width: 500,
            vocab_buckets: 1 << 16,
            attribute_count,
            alien_width: attribute_count,
        }
    }

    /// Desk-scale shapes: 32-d embeddings, two 64-unit layers, 4096 buckets.
    pub fn smoke(
        architecture: Architecture,
        alien_encoding: AlienEncoding,
        attribute_count: usize,
    ) -> Self {
        Self {
            embedding_dim: 32,
            hidden_layers: 2,
            hidden_width: 64,
            vocab_buckets: 1 << 12,
            ..Self::full(architecture, alien_encoding, attribute_count)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let alien_ok = match self.architecture {
            Architecture::Ml => self.alien_encoding == AlienEncoding::None,
            _ => self.alien_encoding != AlienEncoding::None,
        };
        if !alien_ok {
            return Err(Error::config(
                "alien",
                format!(
                    "encoding `{}` is not valid for architecture `{}`",
                    self.alien_encoding.as_str(),
                    self.architecture.as_str()
                ),
            ));
        }
        for (field, value) in [
            ("embedding_dim", self.embedding_dim),
            ("hidden_layers", self.hidden_layers),
            ("hidden_width", self.hidden_width),
            ("vocab_buckets", self.vocab_buckets),
            ("attribute_count", self.attribute_count),
        ] {
            if value == 0 {
                return Err(Error::config(field, "must be at least 1"));
            }
        }
        if self.vocab_buckets > u32::MAX as usize {
            return Err(Error::config("vocab_buckets", "must fit in 32 bits"));
        }
        if self.architecture == Architecture::Av && self.alien_width == 0 {
            return Err(Error::config("alien_width", "must be at least 1"));
        }
        Ok(())
    }

    /// Length of the alien vector this spec consumes.
    pub fn alien_len(&self) -> usize {
        self.alien_encoding.width(self.attribute_count)
    }

    fn layout(&self) -> Layout {
        let alien_len = self.alien_len();
        let (trunk_alien, g_input, g_width, head_rows) = match self.architecture {
            Architecture::Ml => (0, 0, 0, self.attribute_count),
            Architecture::Av => (0, alien_len, self.alien_width, self.attribute_count),
            Architecture::Iav => (alien_len, 0, 0, 1),
        };
        Layout {
            buckets: self.vocab_buckets,
            embedding_dim: self.embedding_dim,
            hidden_layers: self.hidden_layers,
            hidden_width: self.hidden_width,
            trunk_alien,
            g_input,
            g_width,
            head_rows,
        }
    }
}

/// Shape and name of one parameter tensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParameterInfo {
    pub name: String,
    pub shape: Vec<usize>,
}

/// A trained (or freshly initialized) estimator with its optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimator {
    spec: EstimatorSpec,
    attributes: Vec<String>,
    networks: Vec<Network>,
    accumulators: Option<Vec<Network>>,
    step: u64,
    zero_alien: bool,
}

impl Estimator {
    /// Seeded initialization. `attributes` names the head rows in order.
    pub fn new(spec: EstimatorSpec, attributes: Vec<String>, seed: u64) -> Result<Self> {
        spec.validate()?;
        if attributes.len() != spec.attribute_count {
            return Err(Error::config(
                "attribute_count",
                format!(
                    "spec says {} but {} attribute ids were given",
                    spec.attribute_count,
                    attributes.len()
                ),
            ));
        }
        let layout = spec.layout();
        let mut rng = RngStream::new(seed, 0);
        let count = match spec.architecture {
            Architecture::Iav => spec.attribute_count,
            _ => 1,
        };
        let networks = (0..count)
            .map(|_| Network::init(layout, &mut rng))
            .collect();
        Ok(Self {
            spec,
            attributes,
            networks,
            accumulators: None,
            step: 0,
            zero_alien: false,
        })
    }

    /// An estimator whose every output is `belief`, regardless of input.
    pub fn with_constant_prior(
        spec: EstimatorSpec,
        attributes: Vec<String>,
        belief: BetaBelief,
    ) -> Result<Self> {
        let mut est = Self::new(spec, attributes, 0)?;
        let (mu, tau) = (belief.mu(), belief.tau());
        let z_mu = (mu / (1.0 - mu)).ln();
        // inverse softplus
        let z_tau = if tau > 30.0 {
            tau + (-(-tau).exp_m1()).ln()
        } else {
            tau.exp_m1().ln()
        };
        for net in est.networks.iter_mut() {
            let mut zero = net.filled(0.0);
            zero.mu_head.bias.iter_mut().for_each(|b| *b = z_mu);
            zero.tau_head.bias.iter_mut().for_each(|b| *b = z_tau);
            *net = zero;
        }
        Ok(est)
    }

    pub fn spec(&self) -> &EstimatorSpec {
        &self.spec
    }

    pub fn attributes(&self) -> &[String] {
        &self.attributes
    }

    pub fn attribute_index(&self, id: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a == id)
    }

    /// Optimizer steps taken so far.
    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn tokens(&self, record: &LocationRecord) -> TokenBag {
        TokenBag::from_tokens(&record.tokens, self.spec.vocab_buckets)
    }

    /// Replace every alien vector with zeros at inference time. Weights are
    /// untouched. Only meaningful for AV and IAV.
    pub fn set_zero_alien(&mut self, on: bool) -> Result<()> {
        if !self.spec.architecture.uses_alien_votes() {
            return Err(Error::Contract(
                "zero-alien mode requires an AV or IAV estimator".into(),
            ));
        }
        self.zero_alien = on;
        Ok(())
    }

    pub fn zero_alien(&self) -> bool {
        self.zero_alien
    }

    /// Location embedding `e_l` of a shared-trunk estimator.
    pub fn embed_location(&self, tokens: &TokenBag) -> Result<Vec<f64>> {
        if self.spec.architecture == Architecture::Iav {
            return Err(Error::Contract(
                "IAV has no shared location embedding; its trunk also consumes alien votes".into(),
            ));
        }
        self.check_tokens(tokens)?;
        Ok(self.networks[0].embed(tokens))
    }

    /// Prior belief for one location-attribute pair.
    pub fn forward(
        &self,
        tokens: &TokenBag,
        alien: Option<&AlienVoteVector>,
        attribute: usize,
    ) -> Result<BetaBelief> {
        let mut scratch = None;
        let alien = self.resolve_alien(alien, &mut scratch)?.unwrap_or(&[]);
        self.check_tokens(tokens)?;
        let (net, row) = self.route(attribute)?;
        let trace = self.networks[net].forward(tokens, alien, row);
        Ok(BetaBelief::clamped(trace.mu_raw(), trace.tau_raw()))
    }

    fn check_dataset(&self, data: &Dataset) -> Result<()> {
        if data.attributes() != self.attributes.as_slice() {
            return Err(Error::Contract(format!(
                "dataset attributes {:?} differ from the estimator's {:?}",
                data.attributes(),
                self.attributes
            )));
        }
        Ok(())
    }

    /// Prior belief for one pair of `data`, using the location's tokens and
    /// its votes on the other attributes.
    pub fn pair_belief(&self, data: &Dataset, key: PairKey) -> Result<BetaBelief> {
        self.check_dataset(data)?;
        let tokens = self.tokens(&data.locations()[key.location]);
        let alien = self.alien_for(data, key)?;
        self.forward(&tokens, alien.as_ref(), key.attribute)
    }

    /// Prior belief for every pair of `data`, in [`Dataset::pairs`] order.
    pub fn dataset_beliefs(&self, data: &Dataset) -> Result<Vec<BetaBelief>> {
        self.check_dataset(data)?;
        let mut out = Vec::with_capacity(data.num_pairs());
        for (l, record) in data.locations().iter().enumerate() {
            let tokens = self.tokens(record);
            for a in 0..data.num_attributes() {
                let alien = self.alien_for(data, PairKey::new(l, a))?;
                out.push(self.forward(&tokens, alien.as_ref(), a)?);
            }
        }
        Ok(out)
    }

    fn alien_for(&self, data: &Dataset, key: PairKey) -> Result<Option<AlienVoteVector>> {
        if !self.spec.architecture.uses_alien_votes() {
            return Ok(None);
        }
        encode_alien(
            data.location_votes(key.location),
            key.attribute,
            self.spec.alien_encoding,
        )
        .map(Some)
    }

    fn check_tokens(&self, tokens: &TokenBag) -> Result<()> {
        match tokens.buckets().last() {
            Some(&b) if b as usize >= self.spec.vocab_buckets => Err(Error::Contract(format!(
                "token bucket {b} out of range for {} buckets",
                self.spec.vocab_buckets
            ))),
            _ => Ok(()),
        }
    }

    /// Validates the alien input and applies zero-alien mode. Returns the
    /// slice to feed the network (empty for ML).
    fn resolve_alien<'a>(
        &self,
        alien: Option<&'a AlienVoteVector>,
        scratch: &'a mut Option<Vec<f64>>,
    ) -> Result<Option<&'a [f64]>> {
        if !self.spec.architecture.uses_alien_votes() {
            return Ok(None);
        }
        let alien = alien.ok_or_else(|| {
            Error::Contract(format!(
                "architecture `{}` requires an alien vote vector",
                self.spec.architecture.as_str()
            ))
        })?;
        let expected = self.spec.alien_len();
        if alien.len() != expected {
            return Err(Error::Contract(format!(
                "alien vector has length {} but the spec expects {expected}",
                alien.len()
            )));
        }
        if self.zero_alien {
            *scratch = Some(vec![0.0; expected]);
            return Ok(scratch.as_deref());
        }
        Ok(Some(alien.values()))
    }

    fn route(&self, attribute: usize) -> Result<(usize, usize)> {
        if attribute >= self.spec.attribute_count {
            return Err(Error::Contract(format!(
                "attribute index {attribute} out of range for {} attributes",
                self.spec.attribute_count
            )));
        }
        Ok(match self.spec.architecture {
            Architecture::Iav => (attribute, 0),
            _ => (0, attribute),
        })
    }

    fn network_prefix(&self, index: usize) -> String {
        match self.spec.architecture {
            Architecture::Iav => format!("attr{index}/"),
            _ => String::new(),
        }
    }

    /// Names and shapes of every trainable tensor.
    pub fn parameter_info(&self) -> Vec<ParameterInfo> {
        let mut out = Vec::new();
        for (i, net) in self.networks.iter().enumerate() {
            let prefix = self.network_prefix(i);
            out.push(ParameterInfo {
                name: format!("{prefix}embedding"),
                shape: vec![net.layout.buckets, net.layout.embedding_dim],
            });
            for (name, shape, _) in net.dense_tensors() {
                out.push(ParameterInfo {
                    name: format!("{prefix}{name}"),
                    shape,
                });
            }
        }
        out
    }

    fn locate(&self, name: &str) -> Option<(usize, Option<usize>)> {
        let (net, local) = match self.spec.architecture {
            Architecture::Iav => {
                let rest = name.strip_prefix("attr")?;
                let (idx, local) = rest.split_once('/')?;
                (idx.parse::<usize>().ok()?, local)
            }
            _ => (0, name),
        };
        let network = self.networks.get(net)?;
        if local == "embedding" {
            return Some((net, None));
        }
        let pos = network
            .dense_tensors()
            .iter()
            .position(|(n, _, _)| n == local)?;
        Some((net, Some(pos)))
    }

    pub fn parameter(&self, name: &str) -> Option<&[f64]> {
        let (net, slot) = self.locate(name)?;
        let network = &self.networks[net];
        Some(match slot {
            None => network.embedding.as_slice(),
            Some(i) => network.dense_tensors()[i].2,
        })
    }

    pub fn parameter_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let (net, slot) = self.locate(name)?;
        let network = &mut self.networks[net];
        Some(match slot {
            None => network.embedding.as_mut_slice(),
            Some(i) => network.dense_tensors_mut().swap_remove(i),
        })
    }

    /// Sum of log evidence over `batch` and its exact gradient with respect
    /// to every parameter.
    pub fn objective_and_gradient(&self, batch: &[TrainingExample]) -> Result<(f64, Gradient)> {
        let mut grads: Vec<NetworkGrad> =
            self.networks.iter().map(NetworkGrad::zeros_like).collect();
        let total = self.accumulate(batch, 1.0, &mut grads)?;
        let names = self.parameter_info();
        Ok((
            total,
            Gradient {
                slots: names
                    .iter()
                    .map(|p| self.locate(&p.name).expect("own parameter"))
                    .collect(),
                names,
                grads,
            },
        ))
    }

    /// Adds `scale ·` gradient of every example into `grads` and returns the
    /// unscaled objective sum.
    fn accumulate<'e>(
        &self,
        batch: impl IntoIterator<Item = &'e TrainingExample>,
        scale: f64,
        grads: &mut [NetworkGrad],
    ) -> Result<f64> {
        let mut total = 0.0;
        for ex in batch {
            let mut scratch = None;
            let alien = self
                .resolve_alien(ex.alien.as_ref(), &mut scratch)?
                .unwrap_or(&[]);
            let (net, row) = self.route(ex.attribute)?;
            let network = &self.networks[net];
            let trace = network.forward(&ex.tokens, alien, row);
            let (mu_raw, tau_raw) = (trace.mu_raw(), trace.tau_raw());
            let belief = BetaBelief::clamped(mu_raw, tau_raw);
            total += crate::consensus::log_evidence(&belief, ex.votes);
            let (d_mu, d_tau) = crate::consensus::log_evidence_grad(&belief, ex.votes);
            let dz_mu = if (MU_FLOOR..=MU_CEIL).contains(&mu_raw) {
                d_mu * mu_raw * (1.0 - mu_raw)
            } else {
                0.0
            };
            let dz_tau = if (TAU_FLOOR..=TAU_CEIL).contains(&tau_raw) {
                d_tau * logistic(trace.z_tau)
            } else {
                0.0
            };
            network.backward(
                &trace,
                &ex.tokens,
                alien,
                row,
                scale * dz_mu,
                scale * dz_tau,
                &mut grads[net],
            );
        }
        Ok(total)
    }

    fn parameter_norms(&self) -> String {
        self.parameter_info()
            .iter()
            .map(|p| {
                let norm = self
                    .parameter(&p.name)
                    .map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt())
                    .unwrap_or(f64::NAN);
                format!("{}={norm:.4e}", p.name)
            })
            .collect::<Vec<_>>()
            .join(", ")
    }
}

/// Gradient of the summed log evidence, addressable by parameter name.
#[derive(Debug, Clone)]
pub struct Gradient {
    names: Vec<ParameterInfo>,
    grads: Vec<NetworkGrad>,
    /// Per name: owning network and dense slot (`None` for the embedding).
    slots: Vec<(usize, Option<usize>)>,
}

impl Gradient {
    pub fn parameters(&self) -> &[ParameterInfo] {
        &self.names
    }

    /// Dense copy of the gradient for the tensor `name`.
    pub fn tensor(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.names.iter().position(|p| p.name == name)?;
        let (net, slot) = self.slots[i];
        let grad = &self.grads[net];
        match slot {
            Some(s) => Some(grad.dense[s].clone()),
            None => {
                let shape = &self.names[i].shape;
                let dim = shape[1];
                let mut out = vec![0.0; shape[0] * dim];
                for (&b, row) in &grad.embedding {
                    out[b as usize * dim..(b as usize + 1) * dim].copy_from_slice(row);
                }
                Some(out)
            }
        }
    }
}
