//! Feed-forward building blocks with hand-written backpropagation.
//!
//! A [`Network`] is: hashed token embeddings summed and passed through a
//! signed square root, a ReLU trunk, an optional alien-vote layer `g`, and
//! two affine heads producing the μ and τ pre-activations. Shared networks
//! (ML, AV) carry one head row per attribute; an IAV network serves a single
//! attribute and its trunk input is extended with the alien vector.

use std::collections::BTreeMap;

use crate::numerics::{logistic, softplus, RngStream};

use super::features::TokenBag;

/// Affine map `y = W x + b`, `W` stored row-major as `rows × cols`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Dense {
    pub rows: usize,
    pub cols: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    /// Glorot-uniform weights, zero bias. `fan_out` is passed explicitly because
    /// head matrices stack independent one-output maps.
    fn glorot(rows: usize, cols: usize, fan_out: usize, rng: &mut RngStream) -> Self {
        let limit = (6.0 / (cols + fan_out) as f64).sqrt();
        let weight = (0..rows * cols)
            .map(|_| rng.uniform_range(-limit, limit))
            .collect();
        Self {
            rows,
            cols,
            weight,
            bias: vec![0.0; rows],
        }
    }

    fn row(&self, r: usize) -> &[f64] {
        &self.weight[r * self.cols..(r + 1) * self.cols]
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|r| self.bias[r] + dot(self.row(r), x))
            .collect()
    }

    fn apply_row(&self, r: usize, x: &[f64]) -> f64 {
        self.bias[r] + dot(self.row(r), x)
    }

    fn fill(&mut self, value: f64) {
        self.weight.iter_mut().for_each(|w| *w = value);
        self.bias.iter_mut().for_each(|b| *b = value);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Signed square root `sign(x)·√|x|`.
pub(crate) fn signed_sqrt(x: f64) -> f64 {
    x.signum() * x.abs().sqrt()
}

/// Shapes of one network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Layout {
    pub buckets: usize,
    pub embedding_dim: usize,
    pub hidden_layers: usize,
    pub hidden_width: usize,
    /// Alien vector concatenated to the trunk input (IAV).
    pub trunk_alien: usize,
    /// Alien vector fed to `g` (AV), and `g`'s output width.
    pub g_input: usize,
    pub g_width: usize,
    pub head_rows: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Network {
    pub layout: Layout,
    pub embedding: Vec<f64>,
    pub trunk: Vec<Dense>,
    pub alien: Option<Dense>,
    pub mu_head: Dense,
    pub tau_head: Dense,
}

pub(crate) const EMBEDDING_INIT: f64 = 0.05;

impl Network {
    pub fn init(layout: Layout, rng: &mut RngStream) -> Self {
        let embedding = (0..layout.buckets * layout.embedding_dim)
            .map(|_| rng.uniform_range(-EMBEDDING_INIT, EMBEDDING_INIT))
            .collect();
        let mut trunk = Vec::with_capacity(layout.hidden_layers);
        let mut width_in = layout.embedding_dim + layout.trunk_alien;
        for _ in 0..layout.hidden_layers {
            trunk.push(Dense::glorot(
                layout.hidden_width,
                width_in,
                layout.hidden_width,
                rng,
            ));
            width_in = layout.hidden_width;
        }
        let alien = (layout.g_input > 0)
            .then(|| Dense::glorot(layout.g_width, layout.g_input, layout.g_width, rng));
        let head_in = layout.hidden_width
            + if layout.g_input > 0 {
                layout.g_width
            } else {
                0
            };
        let mu_head = Dense::glorot(layout.head_rows, head_in, 1, rng);
        let tau_head = Dense::glorot(layout.head_rows, head_in, 1, rng);
        Self {
            layout,
            embedding,
            trunk,
            alien,
            mu_head,
            tau_head,
        }
    }

    /// Same shapes as `self` with every entry set to `value`.
    pub fn filled(&self, value: f64) -> Self {
        let mut out = self.clone();
        out.embedding.iter_mut().for_each(|v| *v = value);
        out.trunk.iter_mut().for_each(|d| d.fill(value));
        if let Some(g) = out.alien.as_mut() {
            g.fill(value);
        }
        out.mu_head.fill(value);
        out.tau_head.fill(value);
        out
    }

    fn head_input_width(&self) -> usize {
        self.mu_head.cols
    }

    /// Dense tensors after the embedding, in serialization order.
    pub fn dense_tensors(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        let mut out = Vec::new();
        for (i, d) in self.trunk.iter().enumerate() {
            out.push((
                format!("trunk.{i}.weight"),
                vec![d.rows, d.cols],
                d.weight.as_slice(),
            ));
            out.push((format!("trunk.{i}.bias"), vec![d.rows], d.bias.as_slice()));
        }
        if let Some(g) = &self.alien {
            out.push((
                "alien.weight".into(),
                vec![g.rows, g.cols],
                g.weight.as_slice(),
            ));
            out.push(("alien.bias".into(), vec![g.rows], g.bias.as_slice()));
        }
        for (name, d) in [("mu_head", &self.mu_head), ("tau_head", &self.tau_head)] {
            out.push((
                format!("{name}.weight"),
                vec![d.rows, d.cols],
                d.weight.as_slice(),
            ));
            out.push((format!("{name}.bias"), vec![d.rows], d.bias.as_slice()));
        }
        out
    }

    pub fn dense_tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut all = self.tensors_mut();
        all.remove(0);
        all
    }

    /// The embedding table followed by [`Network::dense_tensors`] order.
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let Network {
            embedding,
            trunk,
            alien,
            mu_head,
            tau_head,
            ..
        } = self;
        let mut out: Vec<&mut [f64]> = vec![embedding.as_mut_slice()];
        for d in trunk
            .iter_mut()
            .chain(alien.as_mut())
            .chain([mu_head, tau_head])
        {
            out.push(d.weight.as_mut_slice());
            out.push(d.bias.as_mut_slice());
        }
        out
    }

    /// Sum of token embeddings, before the square root.
    fn token_sum(&self, tokens: &TokenBag) -> Vec<f64> {
        let dim = self.layout.embedding_dim;
        let mut sum = vec![0.0; dim];
        for &b in tokens.buckets() {
            let row = &self.embedding[b as usize * dim..(b as usize + 1) * dim];
            sum.iter_mut().zip(row).for_each(|(s, e)| *s += e);
        }
        sum
    }

    /// Trunk output `e_l` for the shared architectures.
    pub fn embed(&self, tokens: &TokenBag) -> Vec<f64> {
        let input: Vec<f64> = self
            .token_sum(tokens)
            .into_iter()
            .map(signed_sqrt)
            .collect();
        self.trunk
            .iter()
            .fold(input, |h, layer| relu(layer.apply(&h)))
    }

    pub fn forward(&self, tokens: &TokenBag, alien: &[f64], row: usize) -> Trace {
        let token_sum = self.token_sum(tokens);
        let mut input: Vec<f64> = token_sum.iter().copied().map(signed_sqrt).collect();
        if self.layout.trunk_alien > 0 {
            input.extend_from_slice(alien);
        }
        let mut activations = Vec::with_capacity(self.trunk.len() + 1);
        activations.push(input);
        for layer in &self.trunk {
            let next = relu(layer.apply(activations.last().expect("trunk input")));
            activations.push(next);
        }
        let mut head_input = activations.last().expect("trunk output").clone();
        if let Some(g) = &self.alien {
            head_input.extend(g.apply(alien));
        }
        debug_assert_eq!(head_input.len(), self.head_input_width());
        let z_mu = self.mu_head.apply_row(row, &head_input);
        let z_tau = self.tau_head.apply_row(row, &head_input);
        Trace {
            token_sum,
            activations,
            head_input,
            z_mu,
            z_tau,
        }
    }

    /// Accumulates parameter gradients given `∂/∂z_mu` and `∂/∂z_tau` of the
    /// objective for one pair.
    pub fn backward(
        &self,
        trace: &Trace,
        tokens: &TokenBag,
        alien: &[f64],
        row: usize,
        dz_mu: f64,
        dz_tau: f64,
        grad: &mut NetworkGrad,
    ) {
        let slots = GradSlots::for_layers(self.trunk.len(), self.alien.is_some());
        let u = &trace.head_input;
        let width = u.len();

        axpy(
            dz_mu,
            u,
            &mut grad.dense[slots.mu_weight][row * width..(row + 1) * width],
        );
        grad.dense[slots.mu_weight + 1][row] += dz_mu;
        axpy(
            dz_tau,
            u,
            &mut grad.dense[slots.tau_weight][row * width..(row + 1) * width],
        );
        grad.dense[slots.tau_weight + 1][row] += dz_tau;

        let mut du = vec![0.0; width];
        axpy(dz_mu, self.mu_head.row(row), &mut du);
        axpy(dz_tau, self.tau_head.row(row), &mut du);

        let trunk_width = self.layout.hidden_width;
        if let (Some(g), Some(slot)) = (&self.alien, slots.alien_weight) {
            let dg = &du[trunk_width..];
            for (r, d) in dg.iter().enumerate() {
                if *d != 0.0 {
                    axpy(
                        *d,
                        alien,
                        &mut grad.dense[slot][r * g.cols..(r + 1) * g.cols],
                    );
                }
                grad.dense[slot + 1][r] += d;
            }
        }

        let mut delta: Vec<f64> = du[..trunk_width].to_vec();
        for (l, layer) in self.trunk.iter().enumerate().rev() {
            let out = &trace.activations[l + 1];
            let inp = &trace.activations[l];
            let dz: Vec<f64> = delta
                .iter()
                .zip(out)
                .map(|(d, h)| if *h > 0.0 { *d } else { 0.0 })
                .collect();
            let (w_slot, b_slot) = (2 * l, 2 * l + 1);
            let mut back = vec![0.0; layer.cols];
            for (r, d) in dz.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                axpy(
                    *d,
                    inp,
                    &mut grad.dense[w_slot][r * layer.cols..(r + 1) * layer.cols],
                );
                grad.dense[b_slot][r] += d;
                axpy(*d, layer.row(r), &mut back);
            }
            delta = back;
        }

        if tokens.is_empty() {
            return;
        }
        let dim = self.layout.embedding_dim;
        let d_sum: Vec<f64> = delta[..dim]
            .iter()
            .zip(&trace.token_sum)
            .map(|(d, s)| d * signed_sqrt_slope(*s))
            .collect();
        for &b in tokens.buckets() {
            let entry = grad.embedding.entry(b).or_insert_with(|| vec![0.0; dim]);
            entry.iter_mut().zip(&d_sum).for_each(|(e, d)| *e += d);
        }
    }
}

/// `d/dx sign(x)√|x| = 1 / (2√|x|)`; zero at the origin where the slope is unbounded.
fn signed_sqrt_slope(x: f64) -> f64 {
    let m = x.abs();
    if m < 1e-300 {
        0.0
    } else {
        0.5 / m.sqrt()
    }
}

fn relu(mut v: Vec<f64>) -> Vec<f64> {
    v.iter_mut().for_each(|x| {
        if *x < 0.0 {
            *x = 0.0
        }
    });
    v
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub(crate) struct Trace {
    pub token_sum: Vec<f64>,
    pub activations: Vec<Vec<f64>>,
    pub head_input: Vec<f64>,
    pub z_mu: f64,
    pub z_tau: f64,
}

impl Trace {
    pub fn mu_raw(&self) -> f64 {
        logistic(self.z_mu)
    }

    pub fn tau_raw(&self) -> f64 {
        softplus(self.z_tau)
    }
}

/// Index of each dense tensor inside [`NetworkGrad::dense`].
struct GradSlots {
    alien_weight: Option<usize>,
    mu_weight: usize,
    tau_weight: usize,
}

impl GradSlots {
    fn for_layers(layers: usize, has_alien: bool) -> Self {
        let after_trunk = 2 * layers;
        let (alien_weight, heads) = if has_alien {
            (Some(after_trunk), after_trunk + 2)
        } else {
            (None, after_trunk)
        };
        Self {
            alien_weight,
            mu_weight: heads,
            tau_weight: heads + 2,
        }
    }
}

/// Gradient of one network: sparse embedding rows plus dense tensors in
/// [`Network::dense_tensors`] order.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct NetworkGrad {
    pub embedding: BTreeMap<u32, Vec<f64>>,
    pub dense: Vec<Vec<f64>>,
}

impl NetworkGrad {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            embedding: BTreeMap::new(),
            dense: net
                .dense_tensors()
                .into_iter()
                .map(|(_, _, t)| vec![0.0; t.len()])
                .collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.embedding.is_empty() && self.dense.iter().all(|t| t.iter().all(|v| *v == 0.0))
    }

    pub fn squared_norm(&self) -> f64 {
        let emb: f64 = self.embedding.values().flatten().map(|v| v * v).sum();
        let dense: f64 = self.dense.iter().flatten().map(|v| v * v).sum();
        emb + dense
    }
}

/// Adagrad ascent step: `acc += g²; θ += lr · g / √acc`.
pub(crate) fn adagrad_step(net: &mut Network, acc: &mut Network, grad: &NetworkGrad, lr: f64) {
    let dim = net.layout.embedding_dim;
    for (&b, g) in &grad.embedding {
        let lo = b as usize * dim;
        update(
            &mut net.embedding[lo..lo + dim],
            &mut acc.embedding[lo..lo + dim],
            g,
            lr,
        );
    }
    let params = net.dense_tensors_mut();
    let accs = acc.dense_tensors_mut();
    for ((p, a), g) in params.into_iter().zip(accs).zip(&grad.dense) {
        update(p, a, g, lr);
    }
}

fn update(param: &mut [f64], acc: &mut [f64], grad: &[f64], lr: f64) {
    for ((p, a), g) in param.iter_mut().zip(acc.iter_mut()).zip(grad) {
        if *g == 0.0 {
            continue;
        }
        *a += g * g;
        *p += lr * g / a.sqrt();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout() -> Layout {
        Layout {
            buckets: 16,
            embedding_dim: 3,
            hidden_layers: 2,
            hidden_width: 5,
            trunk_alien: 0,
            g_input: 0,
            g_width: 0,
            head_rows: 2,
        }
    }

    #[test]
    fn duplicated_token_takes_root_of_sum() {
        let mut rng = RngStream::new(3, 0);
        let net = Network::init(layout(), &mut rng);
        let once = TokenBag::from_tokens(&["t"], 16);
        let twice = TokenBag::from_tokens(&["t", "t"], 16);
        let t1 = net.forward(&once, &[], 0);
        let t2 = net.forward(&twice, &[], 0);
        for i in 0..3 {
            let e = t1.token_sum[i];
            assert_eq!(t2.activations[0][i], signed_sqrt(2.0 * e));
            assert_ne!(t2.activations[0][i], 2.0 * signed_sqrt(e));
        }
    }

    #[test]
    fn empty_tokens_feed_zero_vector() {
        let mut rng = RngStream::new(3, 0);
        let mut net = Network::init(layout(), &mut rng);
        net.trunk[0].bias = vec![0.5, -0.5, 1.0, 0.0, 2.0];
        let t = net.forward(&TokenBag::default(), &[], 1);
        assert_eq!(t.activations[0], vec![0.0; 3]);
        assert_eq!(t.activations[1], vec![0.5, 0.0, 1.0, 0.0, 2.0]);
        assert_eq!(net.embed(&TokenBag::default()), t.activations[2]);
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut rng = RngStream::new(5, 0);
        let mut net = Network::init(layout(), &mut rng);
        let before = net.clone();
        let mut acc = net.filled(0.1);
        let grad = NetworkGrad::zeros_like(&net);
        assert!(grad.is_zero());
        adagrad_step(&mut net, &mut acc, &grad, 0.1);
        assert_eq!(net, before);
    }

    #[test]
    fn adagrad_first_step_size() {
        let mut p = [1.0];
        let mut a = [0.1];
        update(&mut p, &mut a, &[0.3], 0.1);
        assert!((a[0] - 0.19).abs() < 1e-15);
        assert!((p[0] - (1.0 + 0.1 * 0.3 / 0.19f64.sqrt())).abs() < 1e-15);
    }
}
