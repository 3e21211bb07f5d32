//! Minimal neural kernel for the sentence CNN: dense tensors, embedding
//! lookup, same-padded 1-D convolution with max-pooling, inverted dropout,
//! class-weighted softmax cross-entropy, Adadelta and a finite-difference
//! gradient checker.
//!
//! The network in [`LayerStack`] has a fixed shape, so gradients are written
//! out by hand rather than derived by a tape.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense row-major tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![T::zero(); shape.iter().product()],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Result<Self> {
        let want: usize = shape.iter().product();
        if want != data.len() {
            return Err(Error::invalid(format!(
                "tensor of shape {shape:?} needs {want} values, got {}",
                data.len()
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    /// Fills with independent draws from `U(-scale, scale)`.
    pub fn uniform(shape: &[usize], scale: f64, rng: &mut impl Rng) -> Self {
        let n = shape.iter().product();
        let data = (0..n).map(|_| T::of(rng.gen_range(-scale..=scale))).collect();
        Tensor {
            shape: shape.to_vec(),
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn rows(&self) -> usize {
        self.shape.first().copied().unwrap_or(0)
    }

    pub fn row_len(&self) -> usize {
        self.shape[1..].iter().product()
    }

    pub fn row(&self, i: usize) -> &[T] {
        let w = self.row_len();
        &self.data[i * w..(i + 1) * w]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        let w = self.row_len();
        &mut self.data[i * w..(i + 1) * w]
    }

    pub fn fill(&mut self, value: T) {
        self.data.iter_mut().for_each(|x| *x = value);
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|x| U::of(x.to_f64_lossy())).collect(),
        }
    }
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Tanh,
    Relu,
    Identity,
}

impl Activation {
    pub fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(T::zero()),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation's output `y`.
    fn derivative<T: Scalar>(self, pre: T, y: T) -> T {
        match self {
            Activation::Tanh => T::one() - y * y,
            Activation::Relu => {
                if pre > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Identity => T::one(),
        }
    }
}

/// Max-pooled convolution output plus the winning position per filter.
#[derive(Debug, Clone, PartialEq)]
pub struct Pooled<T> {
    pub values: Vec<T>,
    pub pre_activation: Vec<T>,
    pub argmax: Vec<usize>,
}

/// Same-padded convolution over an `n × d_in` input followed by
/// `activation` and a max over positions.
///
/// `weights` has shape `[filters, width, d_in]`; `bias` has one entry per
/// filter. Rows outside the sequence are zero.
pub fn conv_max_pool<T: Scalar>(
    inputs: &Tensor<T>,
    weights: &Tensor<T>,
    bias: &[T],
    activation: Activation,
) -> Result<Pooled<T>> {
    let &[filters, width, d_in] = weights.shape() else {
        return Err(Error::invalid(format!(
            "filter tensor must be [filters, width, d_in], got {:?}",
            weights.shape()
        )));
    };
    let n = inputs.rows();
    if n == 0 {
        return Err(Error::invalid("convolution over an empty sequence"));
    }
    if inputs.row_len() != d_in {
        return Err(Error::invalid(format!(
            "input rows have width {} but filters expect {d_in}",
            inputs.row_len()
        )));
    }
    if bias.len() != filters {
        return Err(Error::invalid("one bias per filter required"));
    }
    let pad = width / 2;
    let mut values = Vec::with_capacity(filters);
    let mut pre_activation = Vec::with_capacity(filters);
    let mut argmax = Vec::with_capacity(filters);
    for k in 0..filters {
        let filter = weights.row(k);
        let mut best = T::neg_infinity();
        let mut best_pos = 0;
        for p in 0..n {
            let mut acc = bias[k];
            for o in 0..width {
                let r = p + o;
                if r < pad || r - pad >= n {
                    continue;
                }
                acc += dot(&filter[o * d_in..(o + 1) * d_in], inputs.row(r - pad));
            }
            if acc > best {
                best = acc;
                best_pos = p;
            }
        }
        // Every supported activation is monotone, so the best pre-activation wins.
        pre_activation.push(best);
        values.push(activation.apply(best));
        argmax.push(best_pos);
    }
    Ok(Pooled {
        values,
        pre_activation,
        argmax,
    })
}

/// Inverted dropout mask: each entry is 0 with probability `rate`,
/// otherwise `1 / (1 - rate)`.
pub fn dropout_mask<T: Scalar>(len: usize, rate: f64, rng: &mut impl Rng) -> Vec<T> {
    if rate <= 0.0 {
        return vec![T::one(); len];
    }
    let keep = T::of(1.0 / (1.0 - rate));
    (0..len)
        .map(|_| if rng.gen::<f64>() < rate { T::zero() } else { keep })
        .collect()
}

/// Numerically stable softmax (max-subtracted).
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&x| (x - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    exps.into_iter().map(|x| x / total).collect()
}

/// `weights[label] · −log softmax(logits)[label]` and its gradient with
/// respect to the logits.
pub fn weighted_softmax_loss<T: Scalar>(
    logits: &[T],
    label: usize,
    class_weights: &[T],
) -> Result<(T, Vec<T>)> {
    if label >= logits.len() {
        return Err(Error::invalid(format!("label {label} out of range for {} classes", logits.len())));
    }
    if class_weights.len() != logits.len() {
        return Err(Error::invalid("one class weight per logit required"));
    }
    if logits.iter().any(|x| !x.is_finite()) {
        return Err(Error::Runtime("non-finite logits".into()));
    }
    let weight = class_weights[label];
    if weight <= T::zero() {
        return Err(Error::invalid("class weights must be positive"));
    }
    let mut grad = softmax(logits);
    let loss = -grad[label].ln() * weight;
    grad[label] -= T::one();
    for g in &mut grad {
        *g *= weight;
    }
    Ok((loss, grad))
}

/// Adadelta optimizer state, one pair of accumulators per parameter tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct AdadeltaState<T> {
    pub rho: f64,
    pub eps: f64,
    sq_grad: Vec<Vec<T>>,
    sq_delta: Vec<Vec<T>>,
}

impl<T: Scalar> AdadeltaState<T> {
    pub const DEFAULT_RHO: f64 = 0.95;
    pub const DEFAULT_EPS: f64 = 1e-6;

    pub fn new(rho: f64, eps: f64, params: &[Tensor<T>]) -> Self {
        let zeros = || params.iter().map(|p| vec![T::zero(); p.len()]).collect();
        AdadeltaState {
            rho,
            eps,
            sq_grad: zeros(),
            sq_delta: zeros(),
        }
    }

    pub fn with_defaults(params: &[Tensor<T>]) -> Self {
        Self::new(Self::DEFAULT_RHO, Self::DEFAULT_EPS, params)
    }

    /// Accumulated squared gradients and squared updates for tensor `i`.
    pub fn accumulators(&self, i: usize) -> (&[T], &[T]) {
        (&self.sq_grad[i], &self.sq_delta[i])
    }

    pub fn step(&mut self, params: &mut [Tensor<T>], grads: &[Tensor<T>]) -> Result<()> {
        if params.len() != self.sq_grad.len() || grads.len() != params.len() {
            return Err(Error::invalid("parameter, gradient and state counts differ"));
        }
        let rho = T::of(self.rho);
        let one_minus = T::one() - rho;
        let eps = T::of(self.eps);
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            if p.len() != g.len() || p.len() != self.sq_grad[i].len() {
                return Err(Error::invalid(format!("shape mismatch in parameter tensor {i}")));
            }
            let eg = &mut self.sq_grad[i];
            let ed = &mut self.sq_delta[i];
            for j in 0..p.len() {
                let gj = g.data[j];
                eg[j] = rho * eg[j] + one_minus * gj * gj;
                let delta = -((ed[j] + eps).sqrt() / (eg[j] + eps).sqrt()) * gj;
                ed[j] = rho * ed[j] + one_minus * delta * delta;
                p.data[j] += delta;
            }
        }
        Ok(())
    }
}

/// Reference to a word-embedding row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WordRef {
    /// Outside the sentence; an all-zero row.
    Pad,
    /// Not in the vocabulary; the trainable UNK row.
    Unk,
    /// Row of the frozen pretrained table.
    Known(usize),
}

/// One featurized classification instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub words: Vec<WordRef>,
    /// Clamped signed distance of every token to the trigger.
    pub pf_trigger: Vec<i32>,
    /// Clamped signed distance of every token to the candidate argument.
    pub pf_arg: Option<Vec<i32>>,
    /// Anchor tokens with their neighbours, fed straight to the output layer.
    pub lexical: Vec<WordRef>,
}

impl Instance {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerConfig {
    pub word_dim: usize,
    pub pf_dim: usize,
    /// Distances are clamped to `[-pf_clamp, pf_clamp]`.
    pub pf_clamp: i32,
    pub arg_features: bool,
    /// Number of lexical slots (anchor plus neighbours, per anchor).
    pub lexical_slots: usize,
    pub filter_width: usize,
    pub filters: usize,
    pub labels: usize,
    pub activation: Activation,
    pub dropout: f64,
}

impl LayerConfig {
    pub fn pf_rows(&self) -> usize {
        2 * self.pf_clamp as usize + 1
    }

    /// Width of one convolution input row.
    pub fn input_dim(&self) -> usize {
        self.word_dim + self.pf_dim * if self.arg_features { 2 } else { 1 }
    }

    /// Width of the vector fed to the output layer.
    pub fn hidden_dim(&self) -> usize {
        self.filters + self.lexical_slots * self.word_dim
    }
}

/// Trainable parameter groups, in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamGroup {
    Unk = 0,
    PfTrigger = 1,
    PfArg = 2,
    ConvWeight = 3,
    ConvBias = 4,
    OutWeight = 5,
    OutBias = 6,
}

impl ParamGroup {
    pub const ALL: [ParamGroup; 7] = [
        ParamGroup::Unk,
        ParamGroup::PfTrigger,
        ParamGroup::PfArg,
        ParamGroup::ConvWeight,
        ParamGroup::ConvBias,
        ParamGroup::OutWeight,
        ParamGroup::OutBias,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ParamGroup::Unk => "word_unk",
            ParamGroup::PfTrigger => "pf_trigger",
            ParamGroup::PfArg => "pf_arg",
            ParamGroup::ConvWeight => "conv_weight",
            ParamGroup::ConvBias => "conv_bias",
            ParamGroup::OutWeight => "out_weight",
            ParamGroup::OutBias => "out_bias",
        }
    }
}

/// Cached activations from a forward pass, consumed by the backward pass.
#[derive(Debug, Clone)]
pub struct Trace<T> {
    inputs: Tensor<T>,
    pooled: Pooled<T>,
    hidden: Vec<T>,
    mask: Vec<T>,
    pub logits: Vec<T>,
}

/// The CNN: frozen word table, position embeddings, convolution filters
/// and an affine output layer over `[pooled ; lexical]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LayerStack<T> {
    pub config: LayerConfig,
    /// Frozen pretrained embeddings, `[vocab, word_dim]`.
    pub words: Tensor<T>,
    /// Trainable tensors indexed by [`ParamGroup`].
    pub params: Vec<Tensor<T>>,
}

impl<T: Scalar> LayerStack<T> {
    /// Shapes of every trainable group under `config`.
    pub fn param_shapes(config: &LayerConfig) -> Vec<Vec<usize>> {
        let pf_arg_rows = if config.arg_features { config.pf_rows() } else { 0 };
        vec![
            vec![1, config.word_dim],
            vec![config.pf_rows(), config.pf_dim],
            vec![pf_arg_rows, config.pf_dim],
            vec![config.filters, config.filter_width, config.input_dim()],
            vec![config.filters],
            vec![config.labels, config.hidden_dim()],
            vec![config.labels],
        ]
    }

    /// Random initialization: Glorot-uniform filters and output weights,
    /// small uniform embeddings, zero biases.
    pub fn init(config: LayerConfig, words: Tensor<T>, seed: u64) -> Result<Self> {
        if words.shape().len() != 2 || words.row_len() != config.word_dim {
            return Err(Error::invalid(format!(
                "word table shape {:?} does not match word_dim {}",
                words.shape(),
                config.word_dim
            )));
        }
        if config.filter_width == 0 || config.filters == 0 || config.labels < 2 {
            return Err(Error::invalid("need filter width >= 1, filters >= 1 and labels >= 2"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shapes = Self::param_shapes(&config);
        let conv_fan = config.filter_width * config.input_dim();
        let glorot = |fan_in: usize, fan_out: usize| (6.0 / (fan_in + fan_out) as f64).sqrt();
        let params = ParamGroup::ALL
            .iter()
            .zip(&shapes)
            .map(|(g, shape)| match g {
                ParamGroup::Unk | ParamGroup::PfTrigger | ParamGroup::PfArg => {
                    Tensor::uniform(shape, 0.1, &mut rng)
                }
                ParamGroup::ConvWeight => {
                    Tensor::uniform(shape, glorot(conv_fan, config.filters), &mut rng)
                }
                ParamGroup::OutWeight => {
                    Tensor::uniform(shape, glorot(config.hidden_dim(), config.labels), &mut rng)
                }
                ParamGroup::ConvBias | ParamGroup::OutBias => Tensor::zeros(shape),
            })
            .collect();
        Ok(LayerStack {
            config,
            words,
            params,
        })
    }

    pub fn param(&self, group: ParamGroup) -> &Tensor<T> {
        &self.params[group as usize]
    }

    pub fn param_mut(&mut self, group: ParamGroup) -> &mut Tensor<T> {
        &mut self.params[group as usize]
    }

    /// Zeroed tensors shaped like the trainable parameters.
    pub fn zero_grads(&self) -> Vec<Tensor<T>> {
        self.params.iter().map(|p| Tensor::zeros(p.shape())).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    fn word_row(&self, w: WordRef) -> Option<&[T]> {
        match w {
            WordRef::Pad => None,
            WordRef::Unk => Some(self.param(ParamGroup::Unk).row(0)),
            WordRef::Known(i) => Some(self.words.row(i)),
        }
    }

    fn pf_index(&self, d: i32) -> usize {
        let c = self.config.pf_clamp;
        (d.clamp(-c, c) + c) as usize
    }

    fn check(&self, x: &Instance) -> Result<()> {
        let cfg = &self.config;
        if x.is_empty() {
            return Err(Error::invalid("instance has no tokens"));
        }
        if x.pf_trigger.len() != x.len() {
            return Err(Error::invalid("trigger position features do not cover every token"));
        }
        match (&x.pf_arg, cfg.arg_features) {
            (Some(pf), true) if pf.len() == x.len() => {}
            (None, false) => {}
            _ => return Err(Error::invalid("argument position features do not match the model")),
        }
        if x.lexical.len() != cfg.lexical_slots {
            return Err(Error::invalid(format!(
                "expected {} lexical slots, got {}",
                cfg.lexical_slots,
                x.lexical.len()
            )));
        }
        let vocab = self.words.rows();
        if x.words
            .iter()
            .chain(&x.lexical)
            .any(|w| matches!(w, WordRef::Known(i) if *i >= vocab))
        {
            return Err(Error::invalid("word index outside the embedding table"));
        }
        Ok(())
    }

    fn input_matrix(&self, x: &Instance) -> Tensor<T> {
        let cfg = &self.config;
        let mut m = Tensor::zeros(&[x.len(), cfg.input_dim()]);
        for j in 0..x.len() {
            let row = m.row_mut(j);
            if let Some(w) = self.word_row(x.words[j]) {
                row[..cfg.word_dim].copy_from_slice(w);
            }
            let pf = self.param(ParamGroup::PfTrigger).row(self.pf_index(x.pf_trigger[j]));
            row[cfg.word_dim..cfg.word_dim + cfg.pf_dim].copy_from_slice(pf);
            if let Some(arg) = &x.pf_arg {
                let pf = self.param(ParamGroup::PfArg).row(self.pf_index(arg[j]));
                row[cfg.word_dim + cfg.pf_dim..].copy_from_slice(pf);
            }
        }
        m
    }

    /// Forward pass. Dropout is applied to the hidden vector only when an
    /// rng is supplied.
    pub fn forward(&self, x: &Instance, dropout_rng: Option<&mut ChaCha8Rng>) -> Result<Trace<T>> {
        self.check(x)?;
        let cfg = &self.config;
        let inputs = self.input_matrix(x);
        let pooled = conv_max_pool(
            &inputs,
            self.param(ParamGroup::ConvWeight),
            self.param(ParamGroup::ConvBias).data(),
            cfg.activation,
        )?;
        let mut hidden = Vec::with_capacity(cfg.hidden_dim());
        hidden.extend_from_slice(&pooled.values);
        for &w in &x.lexical {
            match self.word_row(w) {
                Some(row) => hidden.extend_from_slice(row),
                None => hidden.extend(std::iter::repeat(T::zero()).take(cfg.word_dim)),
            }
        }
        let mask = match dropout_rng {
            Some(rng) => dropout_mask(hidden.len(), cfg.dropout, rng),
            None => vec![T::one(); hidden.len()],
        };
        for (h, m) in hidden.iter_mut().zip(&mask) {
            *h *= *m;
        }
        let out_w = self.param(ParamGroup::OutWeight);
        let out_b = self.param(ParamGroup::OutBias).data();
        let logits = (0..cfg.labels)
            .map(|l| dot(out_w.row(l), &hidden) + out_b[l])
            .collect();
        Ok(Trace {
            inputs,
            pooled,
            hidden,
            mask,
            logits,
        })
    }

    /// Class probabilities without dropout.
    pub fn probabilities(&self, x: &Instance) -> Result<Vec<T>> {
        Ok(softmax(&self.forward(x, None)?.logits))
    }

    /// Loss of one labelled instance without dropout.
    pub fn loss(&self, x: &Instance, label: usize, class_weights: &[T]) -> Result<T> {
        let trace = self.forward(x, None)?;
        Ok(weighted_softmax_loss(&trace.logits, label, class_weights)?.0)
    }

    /// Runs forward and backward for one instance, adding `scale ·
    /// ∂loss/∂θ` into `grads`. Returns the unscaled loss.
    pub fn accumulate_gradients(
        &self,
        x: &Instance,
        label: usize,
        class_weights: &[T],
        dropout_rng: Option<&mut ChaCha8Rng>,
        scale: T,
        grads: &mut [Tensor<T>],
    ) -> Result<T> {
        let trace = self.forward(x, dropout_rng)?;
        let (loss, mut dlogits) = weighted_softmax_loss(&trace.logits, label, class_weights)?;
        dlogits.iter_mut().for_each(|g| *g *= scale);
        self.backward(x, &trace, &dlogits, grads);
        Ok(loss)
    }

    fn backward(&self, x: &Instance, trace: &Trace<T>, dlogits: &[T], grads: &mut [Tensor<T>]) {
        let cfg = &self.config;
        let d = cfg.word_dim;
        let out_w = self.param(ParamGroup::OutWeight);

        let mut dhidden = vec![T::zero(); cfg.hidden_dim()];
        for (l, &g) in dlogits.iter().enumerate() {
            grads[ParamGroup::OutBias as usize].data_mut()[l] += g;
            axpy(g, &trace.hidden, grads[ParamGroup::OutWeight as usize].row_mut(l));
            axpy(g, out_w.row(l), &mut dhidden);
        }
        for (h, m) in dhidden.iter_mut().zip(&trace.mask) {
            *h *= *m;
        }

        // Lexical slots: only the UNK row is trainable.
        for (slot, &w) in x.lexical.iter().enumerate() {
            if w == WordRef::Unk {
                let start = cfg.filters + slot * d;
                axpy(T::one(), &dhidden[start..start + d], grads[ParamGroup::Unk as usize].row_mut(0));
            }
        }

        let width = cfg.filter_width;
        let d_in = cfg.input_dim();
        let pad = width / 2;
        let n = x.len();
        let conv_w = self.param(ParamGroup::ConvWeight);
        let mut dinputs = Tensor::<T>::zeros(&[n, d_in]);
        for k in 0..cfg.filters {
            let y = trace.pooled.values[k];
            let pre = trace.pooled.pre_activation[k];
            let dpre = dhidden[k] * cfg.activation.derivative(pre, y);
            if dpre == T::zero() {
                continue;
            }
            grads[ParamGroup::ConvBias as usize].data_mut()[k] += dpre;
            let p = trace.pooled.argmax[k];
            for o in 0..width {
                let r = p + o;
                if r < pad || r - pad >= n {
                    continue;
                }
                let r = r - pad;
                let span = o * d_in..(o + 1) * d_in;
                axpy(
                    dpre,
                    trace.inputs.row(r),
                    &mut grads[ParamGroup::ConvWeight as usize].row_mut(k)[span.clone()],
                );
                axpy(dpre, &conv_w.row(k)[span], dinputs.row_mut(r));
            }
        }

        for j in 0..n {
            let row = dinputs.row(j);
            if x.words[j] == WordRef::Unk {
                axpy(T::one(), &row[..d], grads[ParamGroup::Unk as usize].row_mut(0));
            }
            let idx = self.pf_index(x.pf_trigger[j]);
            axpy(
                T::one(),
                &row[d..d + cfg.pf_dim],
                grads[ParamGroup::PfTrigger as usize].row_mut(idx),
            );
            if let Some(arg) = &x.pf_arg {
                let idx = self.pf_index(arg[j]);
                axpy(T::one(), &row[d + cfg.pf_dim..], grads[ParamGroup::PfArg as usize].row_mut(idx));
            }
        }
    }

    pub fn cast<U: Scalar>(&self) -> LayerStack<U> {
        LayerStack {
            config: self.config.clone(),
            words: self.words.cast(),
            params: self.params.iter().map(Tensor::cast).collect(),
        }
    }
}

/// Per-group and overall outcome of a finite-difference gradient check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub step: f64,
    pub tolerance: f64,
    pub groups: Vec<(String, f64)>,
    pub max_relative_error: f64,
    pub passed: bool,
}

/// Central-difference step used by [`gradient_check`].
pub const FD_STEP: f64 = 1e-5;

/// Relative error `|a − n| / max(|a|, |n|, floor)`; the floor keeps
/// near-zero gradients from inflating the ratio with rounding noise.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(1e-6);
    (analytic - numeric).abs() / denom
}

/// Compares analytic gradients (dropout off) with central finite
/// differences on every trainable parameter.
pub fn gradient_check<T: Scalar>(
    model: &LayerStack<T>,
    x: &Instance,
    label: usize,
    class_weights: &[T],
    tolerance: f64,
) -> Result<GradCheckReport> {
    gradient_check_with(model, x, label, class_weights, tolerance, |m| {
        let mut grads = m.zero_grads();
        m.accumulate_gradients(x, label, class_weights, None, T::one(), &mut grads)?;
        Ok(grads)
    })
}

/// [`gradient_check`] with a caller-supplied analytic gradient.
pub fn gradient_check_with<T: Scalar>(
    model: &LayerStack<T>,
    x: &Instance,
    label: usize,
    class_weights: &[T],
    tolerance: f64,
    analytic: impl Fn(&LayerStack<T>) -> Result<Vec<Tensor<T>>>,
) -> Result<GradCheckReport> {
    let grads = analytic(model)?;
    let mut probe = model.clone();
    let mut groups = Vec::new();
    let mut overall = 0.0f64;
    for g in ParamGroup::ALL {
        let gi = g as usize;
        let mut worst = 0.0f64;
        for j in 0..probe.params[gi].len() {
            let orig = probe.params[gi].data()[j];
            probe.params[gi].data_mut()[j] = orig + T::of(FD_STEP);
            let up = probe.loss(x, label, class_weights)?.to_f64_lossy();
            probe.params[gi].data_mut()[j] = orig - T::of(FD_STEP);
            let down = probe.loss(x, label, class_weights)?.to_f64_lossy();
            probe.params[gi].data_mut()[j] = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            worst = worst.max(relative_error(grads[gi].data()[j].to_f64_lossy(), numeric));
        }
        overall = overall.max(worst);
        groups.push((g.name().to_string(), worst));
    }
    Ok(GradCheckReport {
        step: FD_STEP,
        tolerance,
        groups,
        max_relative_error: overall,
        passed: overall < tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t2(rows: &[&[f64]]) -> Tensor<f64> {
        let cols = rows[0].len();
        Tensor::from_vec(&[rows.len(), cols], rows.concat()).unwrap()
    }

    #[test]
    fn width_one_filter_picks_max() {
        let x = t2(&[&[-2.0], &[3.0], &[1.0]]);
        let w = Tensor::from_vec(&[1, 1, 1], vec![1.0]).unwrap();
        let p = conv_max_pool(&x, &w, &[0.0], Activation::Tanh).unwrap();
        assert_eq!(p.values, vec![3.0f64.tanh()]);
        assert_eq!(p.argmax, vec![1]);
    }

    #[test]
    fn zero_inputs_pool_to_zero() {
        let x = Tensor::<f64>::zeros(&[4, 3]);
        let w = Tensor::uniform(&[2, 3, 3], 1.0, &mut ChaCha8Rng::seed_from_u64(1));
        let p = conv_max_pool(&x, &w, &[0.0, 0.0], Activation::Tanh).unwrap();
        assert_eq!(p.values, vec![0.0, 0.0]);
    }

    #[test]
    fn width_three_uses_zero_padding() {
        // Single row: only the centre tap sees data.
        let x = t2(&[&[2.0]]);
        let w = Tensor::from_vec(&[1, 3, 1], vec![10.0, 1.0, 10.0]).unwrap();
        let p = conv_max_pool(&x, &w, &[0.5], Activation::Identity).unwrap();
        assert_eq!(p.values, vec![2.5]);
    }

    #[test]
    fn conv_rejects_width_mismatch() {
        let x = Tensor::<f64>::zeros(&[2, 3]);
        let w = Tensor::<f64>::zeros(&[1, 1, 2]);
        assert!(conv_max_pool(&x, &w, &[0.0], Activation::Tanh).is_err());
    }

    #[test]
    fn softmax_loss_values() {
        let (l, g) = weighted_softmax_loss(&[0.3, 0.3], 0, &[1.0, 1.0]).unwrap();
        assert!((l - 2f64.ln()).abs() < 1e-15);
        assert!((g[0] + 0.5).abs() < 1e-15 && (g[1] - 0.5).abs() < 1e-15);
        let (l5, _) = weighted_softmax_loss(&[0.3, 0.3], 0, &[5.0, 1.0]).unwrap();
        assert!((l5 - 5.0 * 2f64.ln()).abs() < 1e-14);
        assert!(weighted_softmax_loss(&[f64::NAN, 0.0], 0, &[1.0, 1.0]).is_err());
        assert!(weighted_softmax_loss(&[0.0, 0.0], 2, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn softmax_survives_large_logits() {
        let p = softmax(&[1000.0f64, 1000.0, -1000.0]);
        assert!((p[0] - 0.5).abs() < 1e-12 && p[2] == 0.0);
    }

    #[test]
    fn adadelta_first_step() {
        let mut params = vec![Tensor::from_vec(&[1], vec![0.0f64]).unwrap()];
        let grads = vec![Tensor::from_vec(&[1], vec![1.0]).unwrap()];
        let mut state = AdadeltaState::with_defaults(&params);
        state.step(&mut params, &grads).unwrap();
        let expected = -(1e-6f64).sqrt() / (0.050001f64).sqrt();
        assert!((params[0].data()[0] - expected).abs() < 1e-15);
        assert!((params[0].data()[0] + 0.0044721).abs() < 1e-6);
        let (eg, ed) = state.accumulators(0);
        assert!((eg[0] - 0.05).abs() < 1e-15);
        assert!((ed[0] - 0.05 * expected * expected).abs() < 1e-18);
    }

    #[test]
    fn adadelta_zero_gradient_only_decays() {
        let mut params = vec![Tensor::from_vec(&[1], vec![1.0f64]).unwrap()];
        let mut state = AdadeltaState::with_defaults(&params);
        let one = vec![Tensor::from_vec(&[1], vec![1.0]).unwrap()];
        let zero = vec![Tensor::from_vec(&[1], vec![0.0]).unwrap()];
        state.step(&mut params, &one).unwrap();
        let before = params[0].data()[0];
        let (eg0, ed0) = (state.accumulators(0).0[0], state.accumulators(0).1[0]);
        state.step(&mut params, &zero).unwrap();
        assert_eq!(params[0].data()[0], before);
        assert!((state.accumulators(0).0[0] - 0.95 * eg0).abs() < 1e-18);
        assert!((state.accumulators(0).1[0] - 0.95 * ed0).abs() < 1e-18);
    }

    #[test]
    fn adadelta_is_odd_in_gradient() {
        let run = |g: f64| {
            let mut p = vec![Tensor::from_vec(&[1], vec![0.0f64]).unwrap()];
            let mut s = AdadeltaState::with_defaults(&p);
            for _ in 0..3 {
                s.step(&mut p, &[Tensor::from_vec(&[1], vec![g]).unwrap()]).unwrap();
            }
            p[0].data()[0]
        };
        assert_eq!(run(0.7), -run(-0.7));
    }

    #[test]
    fn adadelta_shape_mismatch() {
        let mut params = vec![Tensor::<f64>::zeros(&[2])];
        let mut state = AdadeltaState::with_defaults(&params);
        assert!(state.step(&mut params, &[Tensor::zeros(&[3])]).is_err());
    }

    #[test]
    fn dropout_rate_zero_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(dropout_mask::<f64>(10, 0.0, &mut rng).iter().all(|&m| m == 1.0));
    }

    #[test]
    fn inverted_dropout_preserves_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mask = dropout_mask::<f64>(100_000, 0.5, &mut rng);
        let mean = mask.iter().sum::<f64>() / mask.len() as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn f32_kernel_matches_f64() {
        let x = t2(&[&[0.1, -0.2], &[0.3, 0.4], &[-0.5, 0.6]]);
        let w = Tensor::uniform(&[3, 3, 2], 0.5, &mut ChaCha8Rng::seed_from_u64(9));
        let b = [0.01, -0.02, 0.03];
        let p64 = conv_max_pool(&x, &w, &b, Activation::Tanh).unwrap();
        let b32: Vec<f32> = b.iter().map(|&v| v as f32).collect();
        let p32 = conv_max_pool(&x.cast::<f32>(), &w.cast::<f32>(), &b32, Activation::Tanh).unwrap();
        for (a, c) in p64.values.iter().zip(&p32.values) {
            assert!((a - *c as f64).abs() < 1e-6);
        }
    }
}
