//! The decision function: a fully connected softmax network over
//! measurement vectors, trained by per-sample cost-weighted gradient
//! descent with the non-improving-epoch stopping rule, plus empirical
//! false-recognition-cost evaluation.
//!
//! Complex measurements enter as interleaved real features
//! `(Re y_1, Im y_1, ..., Re y_K, Im y_K)`, optionally standardized with
//! statistics frozen from the training split.

use ndarray::Array2;
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Misclassification costs and class priors.
#[derive(Debug, Clone, PartialEq)]
pub struct CostModel {
    /// costs[(i, i')] is the cost of deciding posture i'+1 when the truth
    /// is posture i+1.
    pub costs: Array2<f64>,
    pub priors: Vec<f64>,
}

impl CostModel {
    /// Uniform priors with cost 1 for every wrong decision.
    pub fn zero_one(classes: usize) -> Self {
        let costs =
            Array2::from_shape_fn((classes, classes), |(i, j)| if i == j { 0.0 } else { 1.0 });
        Self { costs, priors: vec![1.0 / classes as f64; classes] }
    }

    pub fn class_count(&self) -> usize {
        self.costs.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        if self.costs.nrows() != self.costs.ncols() {
            return Err(Error::ShapeMismatch("cost matrix must be square".into()));
        }
        if self.priors.len() != self.costs.nrows() {
            return Err(Error::ShapeMismatch("priors length must match cost matrix".into()));
        }
        if self.costs.iter().any(|&c| c < 0.0) {
            return Err(Error::InvalidParameter("costs must be non-negative".into()));
        }
        let sum: f64 = self.priors.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || self.priors.iter().any(|&p| p < 0.0) {
            return Err(Error::InvalidParameter("priors must be a distribution".into()));
        }
        Ok(())
    }
}

/// Hidden-layer activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    pub fn tag(&self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::InvalidParameter(format!("unknown activation '{other}'"))),
        }
    }

    fn apply(&self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    fn derivative(&self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - z.tanh() * z.tanh(),
        }
    }
}

/// Parameter initialization scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitScheme {
    /// Every weight and bias uniform in (0, 1).
    Uniform01,
    /// Symmetric uniform scaled by fan size; avoids the positive-bias
    /// stall of Uniform01 with rectifier activations.
    ScaledUniform,
}

/// Per-feature affine input normalization, frozen from the train split.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    fn apply(&self, features: &mut [f64]) {
        for ((x, m), s) in features.iter_mut().zip(&self.mean).zip(&self.scale) {
            *x = (*x - m) / s;
        }
    }
}

/// Feed-forward softmax classifier over measurement vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionNetwork {
    /// Layer widths: input (2K), hidden..., output (N_P).
    sizes: Vec<usize>,
    activation: Activation,
    /// weights[h] has shape (sizes[h+1], sizes[h]).
    weights: Vec<Array2<f64>>,
    biases: Vec<Vec<f64>>,
    standardizer: Option<Standardizer>,
}

impl DecisionNetwork {
    pub fn from_parts(
        sizes: Vec<usize>,
        activation: Activation,
        weights: Vec<Array2<f64>>,
        biases: Vec<Vec<f64>>,
        standardizer: Option<Standardizer>,
    ) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::InvalidParameter("network needs input and output layers".into()));
        }
        if weights.len() != sizes.len() - 1 || biases.len() != sizes.len() - 1 {
            return Err(Error::ShapeMismatch("one weight/bias set per layer transition".into()));
        }
        for h in 0..weights.len() {
            if weights[h].nrows() != sizes[h + 1] || weights[h].ncols() != sizes[h] {
                return Err(Error::ShapeMismatch(format!("weight matrix {h} has wrong shape")));
            }
            if biases[h].len() != sizes[h + 1] {
                return Err(Error::ShapeMismatch(format!("bias vector {h} has wrong length")));
            }
        }
        if let Some(s) = &standardizer {
            if s.mean.len() != sizes[0] || s.scale.len() != sizes[0] {
                return Err(Error::ShapeMismatch("standardizer length must match input".into()));
            }
        }
        Ok(Self { sizes, activation, weights, biases, standardizer })
    }

    pub fn random(
        sizes: Vec<usize>,
        activation: Activation,
        init: InitScheme,
        standardizer: Option<Standardizer>,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for h in 0..sizes.len() - 1 {
            let (rows, cols) = (sizes[h + 1], sizes[h]);
            let mut w = Array2::zeros((rows, cols));
            let mut b = vec![0.0; rows];
            match init {
                InitScheme::Uniform01 => {
                    for v in w.iter_mut() {
                        *v = rng.random::<f64>();
                    }
                    for v in &mut b {
                        *v = rng.random::<f64>();
                    }
                }
                InitScheme::ScaledUniform => {
                    let bound = (6.0 / (rows + cols) as f64).sqrt();
                    for v in w.iter_mut() {
                        *v = (rng.random::<f64>() * 2.0 - 1.0) * bound;
                    }
                }
            }
            weights.push(w);
            biases.push(b);
        }
        Self::from_parts(sizes, activation, weights, biases, standardizer)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn standardizer(&self) -> Option<&Standardizer> {
        self.standardizer.as_ref()
    }

    pub fn class_count(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn measurement_len(&self) -> usize {
        self.sizes[0] / 2
    }

    /// Flat parameter vector: per transition, weights row-major then biases.
    pub fn parameters(&self) -> Vec<f64> {
        let mut theta = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            theta.extend(w.iter());
            theta.extend(b.iter());
        }
        theta
    }

    pub fn set_parameters(&mut self, theta: &[f64]) -> Result<()> {
        let mut offset = 0;
        for (w, b) in self.weights.iter_mut().zip(&mut self.biases) {
            let need = w.len() + b.len();
            if offset + need > theta.len() {
                return Err(Error::ShapeMismatch("parameter vector too short".into()));
            }
            for v in w.iter_mut() {
                *v = theta[offset];
                offset += 1;
            }
            for v in b.iter_mut() {
                *v = theta[offset];
                offset += 1;
            }
        }
        if offset != theta.len() {
            return Err(Error::ShapeMismatch("parameter vector too long".into()));
        }
        Ok(())
    }

    fn features(&self, y: &[Complex64]) -> Vec<f64> {
        let mut features = Vec::with_capacity(2 * y.len());
        for v in y {
            features.push(v.re);
            features.push(v.im);
        }
        if let Some(s) = &self.standardizer {
            s.apply(&mut features);
        }
        features
    }

    /// Posture probabilities for one measurement vector.
    pub fn forward(&self, y: &[Complex64]) -> Result<Vec<f64>> {
        if 2 * y.len() != self.sizes[0] {
            return Err(Error::ShapeMismatch(format!(
                "measurement has {} entries but the network expects {}",
                y.len(),
                self.sizes[0] / 2
            )));
        }
        let (_, _, probs) = self.forward_trace(y);
        Ok(probs)
    }

    /// Activations and pre-activations per layer, plus the output
    /// probabilities; the shared path of forward and backprop.
    fn forward_trace(&self, y: &[Complex64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>) {
        let mut activations = vec![self.features(y)];
        let mut pre_activations = Vec::new();
        let last = self.weights.len() - 1;
        for h in 0..self.weights.len() {
            let input = activations.last().unwrap();
            let mut z = self.biases[h].clone();
            for (r, zr) in z.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (c, x) in input.iter().enumerate() {
                    acc += self.weights[h][(r, c)] * x;
                }
                *zr += acc;
            }
            let out = if h == last {
                softmax(&z)
            } else {
                z.iter().map(|&v| self.activation.apply(v)).collect()
            };
            pre_activations.push(z);
            activations.push(out);
        }
        let probs = activations.last().unwrap().clone();
        (activations, pre_activations, probs)
    }
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / sum).collect()
}

/// Recognition cost of one decision: `sum_i' cost[label][i'] * probs[i']`
/// (the one-hot indicator collapses the double sum of the loss).
pub fn sample_loss(probs: &[f64], label: usize, cost: &CostModel) -> f64 {
    let row = label - 1;
    probs
        .iter()
        .enumerate()
        .map(|(j, &p)| cost.costs[(row, j)] * p)
        .sum()
}

/// Gradient of the per-sample loss with respect to every parameter, in
/// the same layout as [`DecisionNetwork::parameters`].
#[derive(Debug, Clone)]
pub struct NetworkGradient {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl NetworkGradient {
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }
}

/// Exact cost-through-softmax gradient for one labeled measurement.
pub fn backprop_gradient(
    net: &DecisionNetwork,
    y: &[Complex64],
    label: usize,
    cost: &CostModel,
) -> Result<NetworkGradient> {
    if label == 0 || label > net.class_count() {
        return Err(Error::IndexOutOfRange {
            what: "posture label",
            index: label,
            size: net.class_count(),
        });
    }
    let (activations, pre_activations, probs) = net.forward_trace(y);
    let row = label - 1;
    let expected: f64 =
        probs.iter().enumerate().map(|(j, &p)| cost.costs[(row, j)] * p).sum();
    // dE/dz_j at the softmax layer
    let mut delta: Vec<f64> = probs
        .iter()
        .enumerate()
        .map(|(j, &p)| p * (cost.costs[(row, j)] - expected))
        .collect();

    let transitions = net.weights.len();
    let mut grad_w = vec![Array2::zeros((0, 0)); transitions];
    let mut grad_b = vec![Vec::new(); transitions];
    for h in (0..transitions).rev() {
        let input = &activations[h];
        let mut gw = Array2::zeros((net.sizes[h + 1], net.sizes[h]));
        for r in 0..net.sizes[h + 1] {
            for c in 0..net.sizes[h] {
                gw[(r, c)] = delta[r] * input[c];
            }
        }
        grad_b[h] = delta.clone();
        grad_w[h] = gw;
        if h > 0 {
            let mut next = vec![0.0; net.sizes[h]];
            for (c, n) in next.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (r, d) in delta.iter().enumerate() {
                    acc += net.weights[h][(r, c)] * d;
                }
                *n = acc * net.activation.derivative(pre_activations[h - 1][c]);
            }
            delta = next;
        }
    }
    Ok(NetworkGradient { weights: grad_w, biases: grad_b })
}

/// Train/test split tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitTag {
    Train,
    Test,
}

/// Labeled measurement vectors; labels are 1-based posture indices.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub samples: Vec<(Vec<Complex64>, usize)>,
    pub class_count: usize,
    pub split: SplitTag,
}

impl LabeledDataset {
    pub fn new(
        samples: Vec<(Vec<Complex64>, usize)>,
        class_count: usize,
        split: SplitTag,
    ) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let k = samples[0].0.len();
        for (y, label) in &samples {
            if y.len() != k {
                return Err(Error::ShapeMismatch("ragged measurement lengths".into()));
            }
            if *label == 0 || *label > class_count {
                return Err(Error::IndexOutOfRange {
                    what: "posture label",
                    index: *label,
                    size: class_count,
                });
            }
        }
        Ok(Self { samples, class_count, split })
    }

    pub fn measurement_len(&self) -> usize {
        self.samples[0].0.len()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Architecture and schedule options for [`train`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub init: InitScheme,
    /// Standardize inputs with train-split statistics.
    pub standardize: bool,
    pub max_epochs: usize,
    /// Consecutive non-improving epochs tolerated before stopping;
    /// 1 reproduces the stop-on-first-regression rule.
    pub patience: usize,
    /// Reshuffle the sample order each epoch (seeded); otherwise the
    /// dataset order is used as-is every epoch.
    pub shuffle: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            activation: Activation::Relu,
            init: InitScheme::Uniform01,
            standardize: true,
            max_epochs: 200,
            patience: 1,
            shuffle: false,
        }
    }
}

/// A trained network plus its training trace.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub network: DecisionNetwork,
    /// Total training-set cost per epoch; entry 0 is the pre-training
    /// cost, later entries follow each completed epoch.
    pub epoch_losses: Vec<f64>,
    /// Number of completed epochs whose updates were kept.
    pub accepted_epochs: usize,
}

/// Per-sample gradient descent with the epoch-level stopping rule: after
/// each epoch the total cost is re-evaluated and training stops once it
/// fails to improve (for `patience` consecutive epochs), returning the
/// parameters of the best epoch. Deterministic given the seed.
pub fn train(
    dataset: &LabeledDataset,
    cost: &CostModel,
    learning_rate: f64,
    seed: u64,
    options: &TrainOptions,
) -> Result<TrainedModel> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    cost.validate()?;
    if !(0.0..1.0).contains(&learning_rate) || learning_rate == 0.0 {
        return Err(Error::InvalidParameter(format!(
            "learning rate {learning_rate} outside (0, 1)"
        )));
    }
    if dataset.class_count != cost.class_count() {
        return Err(Error::ShapeMismatch("dataset and cost model class counts differ".into()));
    }

    let input = 2 * dataset.measurement_len();
    let mut sizes = vec![input];
    sizes.extend(&options.hidden);
    sizes.push(dataset.class_count);

    let standardizer = if options.standardize {
        Some(fit_standardizer(dataset))
    } else {
        None
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = DecisionNetwork::random(
        sizes,
        options.activation,
        options.init,
        standardizer,
        &mut rng,
    )?;

    let total_cost = |net: &DecisionNetwork| -> Result<f64> {
        let mut acc = 0.0;
        for (y, label) in &dataset.samples {
            acc += sample_loss(&net.forward(y)?, *label, cost);
        }
        Ok(acc)
    };

    let mut epoch_losses = vec![total_cost(&net)?];
    let mut best = net.clone();
    let mut best_loss = epoch_losses[0];
    let mut accepted = 0usize;
    let mut misses = 0usize;
    let mut order: Vec<usize> = (0..dataset.len()).collect();

    for epoch in 1..=options.max_epochs {
        if options.shuffle {
            order.shuffle(&mut rng);
        }
        for &j in &order {
            let (y, label) = &dataset.samples[j];
            let gradient = backprop_gradient(&net, y, *label, cost)?;
            for (w, gw) in net.weights.iter_mut().zip(&gradient.weights) {
                w.zip_mut_with(gw, |v, g| *v -= learning_rate * g);
            }
            for (b, gb) in net.biases.iter_mut().zip(&gradient.biases) {
                for (v, g) in b.iter_mut().zip(gb) {
                    *v -= learning_rate * g;
                }
            }
        }
        let loss = total_cost(&net)?;
        if !loss.is_finite() {
            return Err(Error::DivergentTraining { epoch });
        }
        epoch_losses.push(loss);
        if loss < best_loss {
            best_loss = loss;
            best = net.clone();
            accepted = epoch;
            misses = 0;
        } else {
            misses += 1;
            if misses >= options.patience {
                break;
            }
        }
    }

    Ok(TrainedModel { network: best, epoch_losses, accepted_epochs: accepted })
}

fn fit_standardizer(dataset: &LabeledDataset) -> Standardizer {
    let dims = 2 * dataset.measurement_len();
    let n = dataset.len() as f64;
    let mut mean = vec![0.0; dims];
    for (y, _) in &dataset.samples {
        for (i, v) in y.iter().enumerate() {
            mean[2 * i] += v.re;
            mean[2 * i + 1] += v.im;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut var = vec![0.0; dims];
    for (y, _) in &dataset.samples {
        for (i, v) in y.iter().enumerate() {
            var[2 * i] += (v.re - mean[2 * i]).powi(2);
            var[2 * i + 1] += (v.im - mean[2 * i + 1]).powi(2);
        }
    }
    let scale = var
        .iter()
        .map(|&v| {
            let s = (v / n).sqrt();
            if s > 1e-12 {
                s
            } else {
                1.0
            }
        })
        .collect();
    Standardizer { mean, scale }
}

/// Empirical evaluation of a frozen network on a labeled split.
#[derive(Debug, Clone)]
pub struct EvaluationReport {
    /// Mean over samples of the cost-weighted wrong-posture probability
    /// mass (the empirical average false recognition cost).
    pub empirical_cost: f64,
    /// confusion[(i, j)]: samples of true class i+1 decided as j+1
    /// (argmax, ties toward the lower index).
    pub confusion: Array2<usize>,
    pub accuracy: f64,
    pub per_class_accuracy: Vec<f64>,
    pub sample_count: usize,
}

pub fn evaluate(
    net: &DecisionNetwork,
    dataset: &LabeledDataset,
    cost: &CostModel,
) -> Result<EvaluationReport> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    cost.validate()?;
    let classes = dataset.class_count;
    let mut confusion = Array2::zeros((classes, classes));
    let mut cost_acc = 0.0;
    for (y, label) in &dataset.samples {
        let probs = net.forward(y)?;
        let row = label - 1;
        for (j, &p) in probs.iter().enumerate() {
            if j != row {
                cost_acc += cost.costs[(row, j)] * p;
            }
        }
        let decided = argmax_low_tie(&probs);
        confusion[(row, decided)] += 1;
    }
    let n = dataset.len();
    let correct: usize = (0..classes).map(|i| confusion[(i, i)]).sum();
    let per_class_accuracy = (0..classes)
        .map(|i| {
            let total: usize = (0..classes).map(|j| confusion[(i, j)]).sum();
            if total == 0 {
                0.0
            } else {
                confusion[(i, i)] as f64 / total as f64
            }
        })
        .collect();
    Ok(EvaluationReport {
        empirical_cost: cost_acc / n as f64,
        confusion,
        accuracy: correct as f64 / n as f64,
        per_class_accuracy,
        sample_count: n,
    })
}

fn argmax_low_tie(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn logits_net(biases: Vec<f64>) -> DecisionNetwork {
        // Zero-weight single-transition net: output logits are the biases.
        let classes = biases.len();
        DecisionNetwork::from_parts(
            vec![4, classes],
            Activation::Relu,
            vec![Array2::zeros((classes, 4))],
            vec![biases],
            None,
        )
        .unwrap()
    }

    fn y2() -> Vec<Complex64> {
        vec![Complex64::new(0.1, -0.2), Complex64::new(0.3, 0.4)]
    }

    #[test]
    fn softmax_outputs_are_probabilities() {
        let net = logits_net(vec![0.0, 0.0, 0.0]);
        let p = net.forward(&y2()).unwrap();
        for v in &p {
            assert_relative_eq!(*v, 1.0 / 3.0, epsilon = 1e-15);
        }

        let net = logits_net(vec![2.0f64.ln(), 0.0]);
        let p = net.forward(&y2()).unwrap();
        assert_relative_eq!(p[0], 2.0 / 3.0, epsilon = 1e-14);
        assert_relative_eq!(p[1], 1.0 / 3.0, epsilon = 1e-14);

        let shifted = logits_net(vec![2.0f64.ln() + 5.0, 5.0]);
        let q = shifted.forward(&y2()).unwrap();
        assert_relative_eq!(p[0], q[0], epsilon = 1e-14);
        assert_relative_eq!(p[1], q[1], epsilon = 1e-14);
    }

    #[test]
    fn forward_output_sums_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = DecisionNetwork::random(
            vec![4, 8, 3],
            Activation::Relu,
            InitScheme::ScaledUniform,
            None,
            &mut rng,
        )
        .unwrap();
        let p = net.forward(&y2()).unwrap();
        let sum: f64 = p.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn sample_loss_examples() {
        let cost = CostModel::zero_one(4);
        assert_relative_eq!(sample_loss(&[0.0, 1.0, 0.0, 0.0], 2, &cost), 0.0);
        assert_relative_eq!(sample_loss(&[0.25; 4], 1, &cost), 0.75, epsilon = 1e-15);

        let mut weighted = CostModel::zero_one(3);
        weighted.costs.fill(0.0);
        weighted.costs[(0, 2)] = 2.0;
        assert_relative_eq!(sample_loss(&[0.4, 0.1, 0.5], 1, &weighted), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn backprop_matches_finite_differences() {
        let cost = CostModel::zero_one(3);
        let h = 1e-6;
        for (seed, activation) in [(11u64, Activation::Tanh), (12, Activation::Relu)] {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut net = DecisionNetwork::random(
                vec![4, 6, 3],
                activation,
                InitScheme::ScaledUniform,
                None,
                &mut rng,
            )
            .unwrap();
            let y = y2();
            let label = 2;
            let analytic = backprop_gradient(&net, &y, label, &cost).unwrap().flat();
            let theta = net.parameters();
            let scale = analytic.iter().map(|g| g.abs()).fold(0.0f64, f64::max).max(1e-9);
            for d in 0..theta.len() {
                let mut plus = theta.clone();
                plus[d] += h;
                net.set_parameters(&plus).unwrap();
                let fp = sample_loss(&net.forward(&y).unwrap(), label, &cost);
                let mut minus = theta.clone();
                minus[d] -= h;
                net.set_parameters(&minus).unwrap();
                let fm = sample_loss(&net.forward(&y).unwrap(), label, &cost);
                let fd = (fp - fm) / (2.0 * h);
                assert!(
                    (analytic[d] - fd).abs() <= 1e-5 * scale.max(fd.abs()),
                    "{activation:?} coordinate {d}: analytic {} vs fd {fd}",
                    analytic[d]
                );
            }
            net.set_parameters(&theta).unwrap();
        }
    }

    #[test]
    fn zero_cost_row_gives_zero_gradient() {
        let mut cost = CostModel::zero_one(3);
        for j in 0..3 {
            cost.costs[(1, j)] = 0.0;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = DecisionNetwork::random(
            vec![4, 5, 3],
            Activation::Relu,
            InitScheme::ScaledUniform,
            None,
            &mut rng,
        )
        .unwrap();
        let gradient = backprop_gradient(&net, &y2(), 2, &cost).unwrap();
        assert!(gradient.flat().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn gradient_is_additive_over_duplicates() {
        let cost = CostModel::zero_one(3);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let net = DecisionNetwork::random(
            vec![4, 5, 3],
            Activation::Relu,
            InitScheme::ScaledUniform,
            None,
            &mut rng,
        )
        .unwrap();
        let single = backprop_gradient(&net, &y2(), 1, &cost).unwrap().flat();
        // a duplicated sample contributes exactly twice the gradient
        let double: Vec<f64> = single.iter().map(|g| 2.0 * g).collect();
        let sum: Vec<f64> = single.iter().zip(&single).map(|(a, b)| a + b).collect();
        for (a, b) in double.iter().zip(&sum) {
            assert_relative_eq!(a, b);
        }
    }

    /// Two linearly separable clusters at +/- offset with deterministic
    /// within-class spread.
    fn separable_toy() -> LabeledDataset {
        let mut samples = Vec::new();
        for j in 0..40 {
            let wiggle = 0.05 * (j % 5) as f64;
            let offset = 1.0 + wiggle;
            samples.push((
                vec![Complex64::new(offset, offset), Complex64::new(-offset, offset)],
                1,
            ));
            samples.push((
                vec![Complex64::new(-offset, -offset), Complex64::new(offset, -offset)],
                2,
            ));
        }
        LabeledDataset::new(samples, 2, SplitTag::Train).unwrap()
    }

    #[test]
    fn trainer_solves_separable_toy() {
        let dataset = separable_toy();
        let cost = CostModel::zero_one(2);
        let options = TrainOptions {
            hidden: vec![16],
            init: InitScheme::ScaledUniform,
            max_epochs: 100,
            ..TrainOptions::default()
        };
        let model = train(&dataset, &cost, 0.1, 3, &options).unwrap();
        let report = evaluate(&model.network, &dataset, &cost).unwrap();
        assert_eq!(report.accuracy, 1.0, "confusion {:?}", report.confusion);
    }

    #[test]
    fn epoch_losses_decrease_until_stop() {
        let dataset = separable_toy();
        let cost = CostModel::zero_one(2);
        for init in [InitScheme::Uniform01, InitScheme::ScaledUniform] {
            let options = TrainOptions {
                hidden: vec![8],
                init,
                max_epochs: 60,
                ..TrainOptions::default()
            };
            let model = train(&dataset, &cost, 0.05, 9, &options).unwrap();
            let losses = &model.epoch_losses;
            assert!(losses.len() >= 2);
            for i in 1..losses.len() - 1 {
                assert!(
                    losses[i] < losses[i - 1],
                    "{init:?}: loss rose mid-training at epoch {i}: {losses:?}"
                );
            }
            if losses.len() - 1 < options.max_epochs {
                let last = losses.len() - 1;
                assert!(losses[last] >= losses[last - 1], "{init:?}: final epoch was accepted");
            }
        }
    }

    #[test]
    fn training_is_deterministic() {
        let dataset = separable_toy();
        let cost = CostModel::zero_one(2);
        let options = TrainOptions {
            hidden: vec![8],
            init: InitScheme::ScaledUniform,
            shuffle: true,
            max_epochs: 20,
            ..TrainOptions::default()
        };
        let a = train(&dataset, &cost, 0.05, 77, &options).unwrap();
        let b = train(&dataset, &cost, 0.05, 77, &options).unwrap();
        assert_eq!(a.network.parameters(), b.network.parameters());
        assert_eq!(a.epoch_losses, b.epoch_losses);
    }

    #[test]
    fn rejects_bad_learning_rate_and_empty_data() {
        let dataset = separable_toy();
        let cost = CostModel::zero_one(2);
        let options = TrainOptions::default();
        assert!(train(&dataset, &cost, 1.5, 0, &options).is_err());
        assert!(train(&dataset, &cost, 0.0, 0, &options).is_err());
        assert!(LabeledDataset::new(vec![], 2, SplitTag::Train).is_err());
    }

    #[test]
    fn evaluate_perfect_and_uniform_classifiers() {
        let cost = CostModel::zero_one(4);
        // Balanced single-sample-per-class set.
        let samples: Vec<(Vec<Complex64>, usize)> = (0..4)
            .map(|c| (vec![Complex64::new(c as f64, 0.0); 2], c + 1))
            .collect();
        let dataset = LabeledDataset::new(samples, 4, SplitTag::Test).unwrap();

        // Uniform classifier: zero logits.
        let uniform = logits_net(vec![0.0; 4]);
        let report = evaluate(&uniform, &dataset, &cost).unwrap();
        assert_relative_eq!(report.empirical_cost, 0.75, epsilon = 1e-12);
        // ties break toward class 1, which is correct for exactly 1 of 4
        assert_relative_eq!(report.accuracy, 0.25);

        // A classifier that is one-hot up to softmax rounding: logits
        // 40*r*c - 20*r^2 peak at r = c with margins >= 20.
        let mut w = Array2::zeros((4, 4));
        let mut b = vec![0.0; 4];
        for r in 0..4 {
            w[(r, 0)] = 20.0 * r as f64;
            w[(r, 2)] = 20.0 * r as f64;
            b[r] = -20.0 * (r as f64) * (r as f64);
        }
        let sharp = DecisionNetwork::from_parts(
            vec![4, 4],
            Activation::Relu,
            vec![w],
            vec![b],
            None,
        )
        .unwrap();
        let report = evaluate(&sharp, &dataset, &cost).unwrap();
        assert!(report.empirical_cost < 1e-8);
        assert_relative_eq!(report.accuracy, 1.0);
        for i in 0..4 {
            assert_eq!(report.confusion[(i, i)], 1);
            assert_relative_eq!(report.per_class_accuracy[i], 1.0);
        }

        // Evaluation identity on a single sample with probability 0.7 on
        // the true class.
        let p = 0.7f64;
        let rest = ((1.0 - p) / 3.0f64).ln();
        let net = logits_net(vec![p.ln(), rest, rest, rest]);
        let one = LabeledDataset::new(
            vec![(vec![Complex64::default(); 2], 1)],
            4,
            SplitTag::Test,
        )
        .unwrap();
        let report = evaluate(&net, &one, &cost).unwrap();
        assert_relative_eq!(report.empirical_cost, 0.3, epsilon = 1e-12);
        assert_relative_eq!(report.accuracy, 1.0);
    }

    #[test]
    fn zero_one_cost_equals_one_minus_true_probability() {
        let cost = CostModel::zero_one(3);
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let net = DecisionNetwork::random(
            vec![4, 6, 3],
            Activation::Relu,
            InitScheme::ScaledUniform,
            None,
            &mut rng,
        )
        .unwrap();
        let samples: Vec<(Vec<Complex64>, usize)> = (0..30)
            .map(|j| {
                let y = vec![
                    Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5),
                    Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5),
                ];
                (y, j % 3 + 1)
            })
            .collect();
        let dataset = LabeledDataset::new(samples, 3, SplitTag::Test).unwrap();
        let report = evaluate(&net, &dataset, &cost).unwrap();
        let mut true_mass = 0.0;
        for (y, label) in &dataset.samples {
            true_mass += net.forward(y).unwrap()[label - 1];
        }
        let identity = 1.0 - true_mass / dataset.len() as f64;
        assert!((report.empirical_cost - identity).abs() < 1e-12);
    }
}
