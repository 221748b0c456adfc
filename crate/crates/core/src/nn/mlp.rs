use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Matrix, ParamVector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    /// Derivative w.r.t. the pre-activation. The rectifier's subgradient at 0 is 0.
    #[inline]
    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }

    pub(crate) fn tag(self) -> u32 {
        match self {
            Activation::Relu => 0,
            Activation::Identity => 1,
        }
    }

    pub(crate) fn from_tag(tag: u32) -> Option<Self> {
        match tag {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Identity),
            _ => None,
        }
    }
}

/// Layer widths of an extractor/classifier network.
///
/// `hidden` lists the extractor's output widths; its last entry is the
/// embedding dimension. An empty `hidden` means the embedding is the input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub num_classes: usize,
    #[serde(default)]
    pub activation: Activation,
}

impl Architecture {
    /// `input_dim -> 64 -> embed_dim -> num_classes`
    pub fn desk(input_dim: usize, embed_dim: usize, num_classes: usize) -> Self {
        Architecture {
            input_dim,
            hidden: vec![64, embed_dim],
            num_classes,
            activation: Activation::Relu,
        }
    }

    pub fn embed_dim(&self) -> usize {
        self.hidden.last().copied().unwrap_or(self.input_dim)
    }

    pub fn num_params(&self) -> usize {
        let mut fan_in = self.input_dim;
        let mut n = 0;
        for &w in self.hidden.iter().chain(std::iter::once(&self.num_classes)) {
            n += w * fan_in + w;
            fan_in = w;
        }
        n
    }
}

/// Fully connected layer computing `y = W x + b`, with `W` stored `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Dense {
            weight: Matrix::zeros(fan_out, fan_in),
            bias: vec![0.0; fan_out],
        }
    }

    /// Uniform in ±1/sqrt(fan_in) for both weights and bias.
    pub fn init<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let mut layer = Dense::zeros(fan_in, fan_out);
        for w in layer.weight.as_mut_slice() {
            *w = rng.random_range(-bound..bound);
        }
        for b in &mut layer.bias {
            *b = rng.random_range(-bound..bound);
        }
        layer
    }

    pub fn fan_in(&self) -> usize {
        self.weight.cols()
    }

    pub fn fan_out(&self) -> usize {
        self.weight.rows()
    }

    fn num_params(&self) -> usize {
        self.weight.rows() * self.weight.cols() + self.bias.len()
    }

    fn forward(&self, input: &Matrix) -> Matrix {
        let (n, fan_in, fan_out) = (input.rows(), self.fan_in(), self.fan_out());
        let mut out = Matrix::zeros(n, fan_out);
        for i in 0..n {
            let x = input.row(i);
            let y = out.row_mut(i);
            for (o, yo) in y.iter_mut().enumerate() {
                let w = &self.weight.as_slice()[o * fan_in..(o + 1) * fan_in];
                let mut acc = self.bias[o];
                for (wi, xi) in w.iter().zip(x) {
                    acc += wi * xi;
                }
                *yo = acc;
            }
        }
        out
    }
}

/// Feature extractor followed by a linear classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub extractor: Vec<Dense>,
    pub classifier: Dense,
    pub activation: Activation,
}

/// Cached intermediate values of a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub input: Matrix,
    /// Pre-activation of each extractor layer.
    pub pre_activations: Vec<Matrix>,
    /// Post-activation of each extractor layer; the last one is the embedding.
    pub activations: Vec<Matrix>,
    pub logits: Matrix,
}

impl ForwardTrace {
    pub fn embeddings(&self) -> &Matrix {
        self.activations.last().unwrap_or(&self.input)
    }

    pub fn batch_size(&self) -> usize {
        self.input.rows()
    }
}

impl MlpModel {
    pub fn new<R: Rng + ?Sized>(arch: &Architecture, rng: &mut R) -> Self {
        let mut fan_in = arch.input_dim;
        let mut extractor = Vec::with_capacity(arch.hidden.len());
        for &w in &arch.hidden {
            extractor.push(Dense::init(fan_in, w, rng));
            fan_in = w;
        }
        MlpModel {
            extractor,
            classifier: Dense::init(fan_in, arch.num_classes, rng),
            activation: arch.activation,
        }
    }

    pub fn zeros(arch: &Architecture) -> Self {
        let mut fan_in = arch.input_dim;
        let mut extractor = Vec::with_capacity(arch.hidden.len());
        for &w in &arch.hidden {
            extractor.push(Dense::zeros(fan_in, w));
            fan_in = w;
        }
        MlpModel {
            extractor,
            classifier: Dense::zeros(fan_in, arch.num_classes),
            activation: arch.activation,
        }
    }

    pub fn architecture(&self) -> Architecture {
        Architecture {
            input_dim: self.input_dim(),
            hidden: self.extractor.iter().map(Dense::fan_out).collect(),
            num_classes: self.num_classes(),
            activation: self.activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.extractor
            .first()
            .unwrap_or(&self.classifier)
            .fan_in()
    }

    pub fn embed_dim(&self) -> usize {
        self.classifier.fan_in()
    }

    pub fn num_classes(&self) -> usize {
        self.classifier.fan_out()
    }

    pub fn num_params(&self) -> usize {
        self.layers().map(Dense::num_params).sum()
    }

    /// Extractor layers then the classifier, in flattening order.
    pub fn layers(&self) -> impl Iterator<Item = &Dense> {
        self.extractor.iter().chain(std::iter::once(&self.classifier))
    }

    fn layers_mut(&mut self) -> impl Iterator<Item = &mut Dense> {
        self.extractor
            .iter_mut()
            .chain(std::iter::once(&mut self.classifier))
    }

    /// Weights then bias of each layer, extractor first.
    pub fn flatten(&self) -> ParamVector {
        let mut out = Vec::with_capacity(self.num_params());
        for layer in self.layers() {
            out.extend_from_slice(layer.weight.as_slice());
            out.extend_from_slice(&layer.bias);
        }
        ParamVector::from_vec(out)
    }

    /// Overwrites every parameter from `params`; inverse of [`flatten`](Self::flatten).
    pub fn load_params(&mut self, params: &ParamVector) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::dims("MlpModel::load_params", self.num_params(), params.len()));
        }
        let mut offset = 0;
        let src = params.as_slice();
        for layer in self.layers_mut() {
            let nw = layer.weight.as_slice().len();
            layer
                .weight
                .as_mut_slice()
                .copy_from_slice(&src[offset..offset + nw]);
            offset += nw;
            let nb = layer.bias.len();
            layer.bias.copy_from_slice(&src[offset..offset + nb]);
            offset += nb;
        }
        Ok(())
    }

    pub fn from_params(arch: &Architecture, params: &ParamVector) -> Result<Self> {
        let mut m = MlpModel::zeros(arch);
        m.load_params(params)?;
        Ok(m)
    }

    pub fn forward(&self, batch: &Matrix) -> Result<ForwardTrace> {
        if batch.cols() != self.input_dim() {
            return Err(Error::dims("forward input columns", self.input_dim(), batch.cols()));
        }
        let mut pre_activations = Vec::with_capacity(self.extractor.len());
        let mut activations: Vec<Matrix> = Vec::with_capacity(self.extractor.len());
        for layer in &self.extractor {
            let pre = layer.forward(activations.last().unwrap_or(batch));
            let mut post = pre.clone();
            for v in post.as_mut_slice() {
                *v = self.activation.apply(*v);
            }
            pre_activations.push(pre);
            activations.push(post);
        }
        let logits = self.classifier.forward(activations.last().unwrap_or(batch));
        Ok(ForwardTrace {
            input: batch.clone(),
            pre_activations,
            activations,
            logits,
        })
    }

    /// Embeddings only, without keeping the trace.
    pub fn embed(&self, batch: &Matrix) -> Result<Matrix> {
        let mut trace = self.forward(batch)?;
        Ok(trace.activations.pop().unwrap_or(trace.input))
    }

    /// Gradient of a scalar loss w.r.t. all parameters, given its gradient
    /// w.r.t. the logits and, optionally, w.r.t. the embeddings. Embedding
    /// gradients only reach the extractor layers.
    pub fn backward(
        &self,
        trace: &ForwardTrace,
        d_logits: &Matrix,
        d_embeddings: Option<&Matrix>,
    ) -> Result<ParamVector> {
        let n = trace.batch_size();
        if d_logits.rows() != n || d_logits.cols() != self.num_classes() {
            return Err(Error::dims(
                "backward logit gradient",
                n * self.num_classes(),
                d_logits.rows() * d_logits.cols(),
            ));
        }
        if let Some(de) = d_embeddings {
            if de.rows() != n || de.cols() != self.embed_dim() {
                return Err(Error::dims(
                    "backward embedding gradient",
                    n * self.embed_dim(),
                    de.rows() * de.cols(),
                ));
            }
        }

        let mut grads: Vec<(Matrix, Vec<f64>)> = Vec::with_capacity(self.extractor.len() + 1);
        let emb = trace.embeddings();
        let (gw, gb, mut upstream) = dense_backward(&self.classifier, emb, d_logits);
        grads.push((gw, gb));
        if let Some(de) = d_embeddings {
            for (u, d) in upstream.as_mut_slice().iter_mut().zip(de.as_slice()) {
                *u += d;
            }
        }

        for (l, layer) in self.extractor.iter().enumerate().rev() {
            let pre = &trace.pre_activations[l];
            for (u, p) in upstream.as_mut_slice().iter_mut().zip(pre.as_slice()) {
                *u *= self.activation.derivative(*p);
            }
            let input = if l == 0 { &trace.input } else { &trace.activations[l - 1] };
            let (gw, gb, next) = dense_backward(layer, input, &upstream);
            grads.push((gw, gb));
            upstream = next;
        }

        let mut out = Vec::with_capacity(self.num_params());
        for (gw, gb) in grads.iter().rev() {
            out.extend_from_slice(gw.as_slice());
            out.extend_from_slice(gb);
        }
        Ok(ParamVector::from_vec(out))
    }
}

/// Returns (dW, db, dInput) for `y = W x + b` given `dY`.
fn dense_backward(layer: &Dense, input: &Matrix, d_out: &Matrix) -> (Matrix, Vec<f64>, Matrix) {
    let (n, fan_in, fan_out) = (input.rows(), layer.fan_in(), layer.fan_out());
    let mut gw = Matrix::zeros(fan_out, fan_in);
    let mut gb = vec![0.0; fan_out];
    let mut d_in = Matrix::zeros(n, fan_in);
    let w = layer.weight.as_slice();
    for i in 0..n {
        let x = input.row(i);
        let dy = d_out.row(i);
        for (o, &g) in dy.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            gb[o] += g;
            let gw_row = gw.row_mut(o);
            for (a, xi) in gw_row.iter_mut().zip(x) {
                *a += g * xi;
            }
        }
        let dx = d_in.row_mut(i);
        for (o, &g) in dy.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            let w_row = &w[o * fan_in..(o + 1) * fan_in];
            for (a, wi) in dx.iter_mut().zip(w_row) {
                *a += g * wi;
            }
        }
    }
    (gw, gb, d_in)
}
