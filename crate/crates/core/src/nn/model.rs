use std::borrow::Borrow;

use ndarray::ArrayView2;
use rand::distr::Uniform;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::loss::{contrastive_loss, contrastive_loss_grad};
use super::lstm::{LstmParams, LstmTrace};
use crate::dataset::SegmentPair;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::signal::FeatureSegment;

/// Pairs reduced together before the fixed-order sum across chunks.
const REDUCE_CHUNK: usize = 8;

/// Two stacked LSTM layers shared by both Siamese branches, plus the
/// contrastive margin. The embedding is layer 2's last hidden state.
#[derive(Debug, Clone, PartialEq)]
pub struct SiameseModel {
    pub layer1: LstmParams,
    pub layer2: LstmParams,
    pub margin: f64,
}

/// Gradient container congruent with [`SiameseModel`]'s parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layer1: LstmParams,
    pub layer2: LstmParams,
}

pub type Embedding = Vec<f64>;

impl SiameseModel {
    pub fn zeros(input_width: usize, embedding_width: usize, margin: f64) -> Self {
        SiameseModel {
            layer1: LstmParams::zeros(input_width, embedding_width),
            layer2: LstmParams::zeros(embedding_width, embedding_width),
            margin,
        }
    }

    pub fn input_width(&self) -> usize {
        self.layer1.input_width
    }

    pub fn embedding_width(&self) -> usize {
        self.layer2.hidden_width
    }

    pub fn param_count(&self) -> usize {
        self.layer1.len() + self.layer2.len()
    }

    /// Parameters in checkpoint order: layer 1 `w, u, b`, then layer 2.
    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.layer1.values().chain(self.layer2.values())
    }

    pub(crate) fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layer1.values_mut().chain(self.layer2.values_mut())
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer2.input_width != self.layer1.hidden_width {
            return Err(Error::Shape {
                context: "layer 2 input width",
                expected: self.layer1.hidden_width,
                actual: self.layer2.input_width,
            });
        }
        if !(self.margin > 0.0) || !self.margin.is_finite() {
            return Err(Error::Contract(format!("margin must be positive, got {}", self.margin)));
        }
        if self.layer1.input_width == 0 || self.layer1.hidden_width == 0 || self.layer2.hidden_width == 0 {
            return Err(Error::Contract("layer widths must be positive".into()));
        }
        if self.params().any(|v| !v.is_finite()) {
            return Err(Error::Contract("non-finite model parameter".into()));
        }
        Ok(())
    }

    fn check_input(&self, features: ArrayView2<'_, f64>) -> Result<()> {
        if features.ncols() != self.input_width() {
            return Err(Error::Shape {
                context: "feature width",
                expected: self.input_width(),
                actual: features.ncols(),
            });
        }
        if features.nrows() == 0 {
            return Err(Error::Contract("empty segment".into()));
        }
        Ok(())
    }

    fn forward(&self, x: &[f64], steps: usize) -> (LstmTrace, LstmTrace) {
        let t1 = self.layer1.forward(x, steps);
        let t2 = self.layer2.forward(&t1.hidden, steps);
        (t1, t2)
    }

    /// Backpropagates `d_embedding` (gradient w.r.t. the final hidden state)
    /// through both layers of one branch.
    fn backward(&self, x: &[f64], traces: &(LstmTrace, LstmTrace), d_embedding: &[f64], grads: &mut Gradients) {
        let steps = traces.0.steps;
        let c = self.embedding_width();
        let mut dh2 = vec![0.0; steps * c];
        dh2[(steps - 1) * c..].copy_from_slice(d_embedding);
        let mut dh1 = vec![0.0; steps * self.layer1.hidden_width];
        self.layer2.backward(&traces.0.hidden, &traces.1, &dh2, &mut grads.layer2, Some(&mut dh1));
        self.layer1.backward(x, &traces.0, &dh1, &mut grads.layer1, None);
    }
}

impl Gradients {
    pub fn zeros_like(model: &SiameseModel) -> Self {
        Gradients {
            layer1: LstmParams::zeros(model.layer1.input_width, model.layer1.hidden_width),
            layer2: LstmParams::zeros(model.layer2.input_width, model.layer2.hidden_width),
        }
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.layer1.values().chain(self.layer2.values())
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layer1.values_mut().chain(self.layer2.values_mut())
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.values_mut().zip(other.values()) {
            *a += b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for a in self.values_mut() {
            *a *= s;
        }
    }

    pub fn norm(&self) -> f64 {
        self.values().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Rescales `grads` to global L2 norm `max_norm` if it exceeds it.
pub fn clip_global_norm(grads: &mut Gradients, max_norm: f64) {
    let n = grads.norm();
    if n > max_norm && n.is_finite() {
        grads.scale(max_norm / n);
    }
}

/// Weights uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` per matrix,
/// forget-gate bias 1, other biases 0.
pub fn init_params(seed: u64, input_width: usize, embedding_width: usize, margin: f64) -> Result<SiameseModel> {
    if input_width == 0 || embedding_width == 0 {
        return Err(Error::Contract("layer widths must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = SiameseModel::zeros(input_width, embedding_width, margin);
    for layer in [&mut model.layer1, &mut model.layer2] {
        let (n_in, n_h) = (layer.input_width, layer.hidden_width);
        let sw = 1.0 / (n_in as f64).sqrt();
        let su = 1.0 / (n_h as f64).sqrt();
        let dw = Uniform::new_inclusive(-sw, sw).expect("finite bound");
        let du = Uniform::new_inclusive(-su, su).expect("finite bound");
        layer.w.iter_mut().for_each(|v| *v = rng.sample(dw));
        layer.u.iter_mut().for_each(|v| *v = rng.sample(du));
        layer.b[n_h..2 * n_h].fill(1.0);
    }
    model.validate()?;
    Ok(model)
}

fn flat(features: ArrayView2<'_, f64>) -> Vec<f64> {
    features.iter().copied().collect()
}

/// Embedding of a raw `T x D'` feature matrix.
pub fn embed_matrix(model: &SiameseModel, features: ArrayView2<'_, f64>) -> Result<Embedding> {
    model.check_input(features)?;
    let (_, t2) = model.forward(&flat(features), features.nrows());
    Ok(t2.last_hidden(model.embedding_width()).to_vec())
}

pub fn embed(model: &SiameseModel, segment: &FeatureSegment) -> Result<Embedding> {
    embed_matrix(model, segment.features.view())
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `||f(a) - f(b)||_2`.
pub fn pair_distance(model: &SiameseModel, a: &FeatureSegment, b: &FeatureSegment) -> Result<f64> {
    Ok(euclidean(&embed(model, a)?, &embed(model, b)?))
}

/// Loss of one pair and its parameter gradient (accumulated into `grads`).
pub fn pair_gradient(model: &SiameseModel, pair: &SegmentPair, grads: &mut Gradients) -> Result<f64> {
    let (fa, fb) = (pair.a.features.view(), pair.b.features.view());
    model.check_input(fa)?;
    model.check_input(fb)?;
    let (xa, xb) = (flat(fa), flat(fb));
    let ta = model.forward(&xa, fa.nrows());
    let tb = model.forward(&xb, fb.nrows());
    let c = model.embedding_width();
    let ea = ta.1.last_hidden(c);
    let eb = tb.1.last_hidden(c);
    let d = euclidean(ea, eb);
    if !d.is_finite() {
        // diverged parameters; the trainer turns this into NonFiniteLoss
        return Ok(f64::NAN);
    }
    let y = pair.label.y();
    let loss = contrastive_loss(d, y, model.margin)?;
    // dL/de_a = dL/dd * (e_a - e_b) / d; at d = 0 the direction is taken as 0.
    // For genuine pairs dL/dd / d = 1 exactly, so that case avoids the division.
    let coeff = if y == 0.0 {
        1.0
    } else if d > 0.0 {
        contrastive_loss_grad(d, y, model.margin)? / d
    } else {
        0.0
    };
    if coeff != 0.0 {
        let de_a: Vec<f64> = ea.iter().zip(eb).map(|(a, b)| coeff * (a - b)).collect();
        let de_b: Vec<f64> = de_a.iter().map(|v| -v).collect();
        model.backward(&xa, &ta, &de_a, grads);
        model.backward(&xb, &tb, &de_b, grads);
    }
    Ok(loss)
}

/// Mean contrastive loss over a batch (forward only).
pub fn batch_loss<P: Borrow<SegmentPair>>(model: &SiameseModel, pairs: &[P]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Contract("empty batch".into()));
    }
    let mut total = 0.0;
    for p in pairs {
        let p = p.borrow();
        let d = pair_distance(model, &p.a, &p.b)?;
        total += contrastive_loss(d, p.label.y(), model.margin)?;
    }
    Ok(total / pairs.len() as f64)
}

/// Mean contrastive loss and its gradient over a batch.
///
/// Both branches of every pair read the same parameters and their gradient
/// contributions are summed. Per-pair work may run in parallel; partial
/// sums are combined in batch order, so the result is bit-identical for
/// either [`Execution`] mode.
pub fn batch_gradient<P>(model: &SiameseModel, pairs: &[P], exec: Execution) -> Result<(f64, Gradients)>
where
    P: Borrow<SegmentPair> + Sync,
{
    if pairs.is_empty() {
        return Err(Error::Contract("empty batch".into()));
    }
    let partials = exec.map_chunks(pairs, REDUCE_CHUNK, |chunk| -> Result<(f64, Gradients)> {
        let mut g = Gradients::zeros_like(model);
        let mut loss = 0.0;
        for p in chunk {
            loss += pair_gradient(model, p.borrow(), &mut g)?;
        }
        Ok((loss, g))
    });
    let mut total = 0.0;
    let mut grads = Gradients::zeros_like(model);
    for part in partials {
        let (loss, g) = part?;
        total += loss;
        grads.add_assign(&g);
    }
    let n = pairs.len() as f64;
    grads.scale(1.0 / n);
    Ok((total / n, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Modality, PairLabel, UserId};
    use ndarray::Array2;
    use rand_distr::StandardNormal;

    fn seg(user: &str, x: Array2<f64>) -> FeatureSegment {
        FeatureSegment {
            user_id: UserId::new(user),
            modality: Modality::Gravity,
            start_index: 0,
            start_time: 0,
            features: x,
        }
    }

    fn random_seg(rng: &mut ChaCha8Rng, user: &str, t: usize, d: usize) -> FeatureSegment {
        seg(user, Array2::from_shape_fn((t, d), |_| rng.sample::<f64, _>(StandardNormal)))
    }

    #[test]
    fn zero_model_embeds_to_zero() {
        let m = SiameseModel::zeros(4, 5, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let e = embed(&m, &random_seg(&mut rng, "a", 7, 4)).unwrap();
        assert_eq!(e, vec![0.0; 5]);
    }

    #[test]
    fn embedding_is_deterministic_and_bounded() {
        let m = init_params(3, 6, 16, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = random_seg(&mut rng, "a", 20, 6);
        let e1 = embed(&m, &s).unwrap();
        let e2 = embed(&m, &s).unwrap();
        assert_eq!(e1, e2);
        assert!(e1.iter().all(|v| v.abs() < 1.0));
    }

    #[test]
    fn time_order_matters() {
        let m = init_params(5, 3, 8, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = random_seg(&mut rng, "a", 10, 3);
        let mut rev = s.clone();
        rev.features.invert_axis(ndarray::Axis(0));
        assert_ne!(embed(&m, &s).unwrap(), embed(&m, &rev).unwrap());
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = init_params(9, 16, 16, 1.0).unwrap();
        assert_eq!(a, init_params(9, 16, 16, 1.0).unwrap());
        assert_ne!(a, init_params(10, 16, 16, 1.0).unwrap());
        assert!(a.layer1.w.iter().chain(&a.layer1.u).all(|v| v.abs() <= 0.25));
        let h = a.layer1.hidden_width;
        assert!(a.layer1.b[h..2 * h].iter().all(|&v| v == 1.0));
        assert!(a.layer1.b[..h].iter().chain(&a.layer1.b[2 * h..]).all(|&v| v == 0.0));
    }

    #[test]
    fn distance_identity_and_symmetry() {
        let m = init_params(4, 2, 3, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (a, b) = (random_seg(&mut rng, "a", 5, 2), random_seg(&mut rng, "b", 5, 2));
        assert_eq!(pair_distance(&m, &a, &a).unwrap(), 0.0);
        assert_eq!(pair_distance(&m, &a, &b).unwrap(), pair_distance(&m, &b, &a).unwrap());
        let (ea, eb) = (embed(&m, &a).unwrap(), embed(&m, &b).unwrap());
        let want = ea.iter().zip(&eb).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        assert_eq!(pair_distance(&m, &a, &b).unwrap(), want);
        assert_eq!(euclidean(&[0.0, 0.0, 0.0], &[3.0, 4.0, 0.0]), 5.0);
    }

    #[test]
    fn identical_genuine_pair_has_zero_gradient() {
        let m = init_params(7, 2, 3, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_seg(&mut rng, "a", 4, 2);
        let pair = SegmentPair { a: a.clone(), b: a, label: PairLabel::Genuine };
        let (loss, g) = batch_gradient(&m, &[pair], Execution::Sequential).unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.values().all(|&v| v == 0.0));
    }

    #[test]
    fn satisfied_impostors_contribute_nothing() {
        // Impostor pairs already beyond the margin have zero loss and gradient.
        let m = init_params(8, 2, 3, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (a, b) = (random_seg(&mut rng, "a", 4, 2), random_seg(&mut rng, "b", 4, 2));
        let d = pair_distance(&m, &a, &b).unwrap();
        let far = SiameseModel { margin: d / 2.0, ..m.clone() };
        let pair = SegmentPair { a, b, label: PairLabel::Impostor };
        let (loss, g) = batch_gradient(&far, &[pair], Execution::Sequential).unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.values().all(|&v| v == 0.0));
    }

    #[test]
    fn execution_modes_bit_identical() {
        let m = init_params(1, 3, 4, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pairs: Vec<SegmentPair> = (0..37)
            .map(|i| SegmentPair {
                a: random_seg(&mut rng, "a", 6, 3),
                b: random_seg(&mut rng, if i % 2 == 0 { "a" } else { "b" }, 6, 3),
                label: if i % 2 == 0 { PairLabel::Genuine } else { PairLabel::Impostor },
            })
            .collect();
        let (l1, g1) = batch_gradient(&m, &pairs, Execution::Sequential).unwrap();
        let (l2, g2) = batch_gradient(&m, &pairs, Execution::Parallel).unwrap();
        assert_eq!(l1.to_bits(), l2.to_bits());
        assert_eq!(g1, g2);
        assert!((batch_loss(&m, &pairs).unwrap() - l1).abs() < 1e-12);
    }

    #[test]
    fn shape_errors() {
        let m = init_params(1, 3, 4, 1.0).unwrap();
        let bad = seg("a", Array2::zeros((5, 2)));
        assert!(matches!(embed(&m, &bad), Err(Error::Shape { expected: 3, actual: 2, .. })));
        let empty: Vec<SegmentPair> = vec![];
        assert!(matches!(batch_gradient(&m, &empty, Execution::Sequential), Err(Error::Contract(_))));
    }
}
