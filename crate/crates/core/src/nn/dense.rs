use rand::Rng;

use super::{glorot_bound, output_loss, Loss, Network, NnError, Sample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Relu,
    Linear,
}

/// Fully connected feed-forward network. Layer `l` maps `dims[l]` inputs to
/// `dims[l + 1]` outputs; its weights are stored row-major (one row per
/// output) followed by its biases.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    dims: Vec<usize>,
    activations: Vec<Activation>,
    offsets: Vec<usize>,
    params: Vec<f64>,
}

impl DenseNet {
    /// All-zero network. `activations` has one entry per layer.
    pub fn zeros(dims: &[usize], activations: &[Activation]) -> Self {
        assert!(dims.len() >= 2, "need at least one layer");
        assert_eq!(activations.len(), dims.len() - 1);
        let mut offsets = Vec::with_capacity(dims.len());
        let mut total = 0;
        for w in dims.windows(2) {
            offsets.push(total);
            total += w[0] * w[1] + w[1];
        }
        offsets.push(total);
        DenseNet {
            dims: dims.to_vec(),
            activations: activations.to_vec(),
            offsets,
            params: vec![0.0; total],
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot<R: Rng + ?Sized>(dims: &[usize], activations: &[Activation], rng: &mut R) -> Self {
        let mut net = DenseNet::zeros(dims, activations);
        for l in 0..net.layers() {
            let (i, o) = (dims[l], dims[l + 1]);
            let b = glorot_bound(i, o);
            let start = net.offsets[l];
            for w in &mut net.params[start..start + i * o] {
                *w = rng.gen_range(-b..b);
            }
        }
        net
    }

    /// `input -> hidden x3 (ReLU) -> output (linear)`.
    pub fn q_network<R: Rng + ?Sized>(input: usize, hidden: usize, output: usize, rng: &mut R) -> Self {
        DenseNet::glorot(
            &[input, hidden, hidden, hidden, output],
            &[Activation::Relu, Activation::Relu, Activation::Relu, Activation::Linear],
            rng,
        )
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn layers(&self) -> usize {
        self.dims.len() - 1
    }

    /// Weights of layer `l`, row-major `[out][in]`.
    pub fn weights(&self, l: usize) -> &[f64] {
        let s = self.offsets[l];
        &self.params[s..s + self.dims[l] * self.dims[l + 1]]
    }

    pub fn weights_mut(&mut self, l: usize) -> &mut [f64] {
        let s = self.offsets[l];
        let n = self.dims[l] * self.dims[l + 1];
        &mut self.params[s..s + n]
    }

    pub fn bias(&self, l: usize) -> &[f64] {
        let s = self.offsets[l] + self.dims[l] * self.dims[l + 1];
        &self.params[s..self.offsets[l + 1]]
    }

    pub fn bias_mut(&mut self, l: usize) -> &mut [f64] {
        let s = self.offsets[l] + self.dims[l] * self.dims[l + 1];
        let e = self.offsets[l + 1];
        &mut self.params[s..e]
    }

    /// Rounds every parameter to the nearest `f32`, which makes the network
    /// survive a save/load round trip unchanged.
    pub fn round_to_f32(&mut self) {
        for p in &mut self.params {
            *p = *p as f32 as f64;
        }
    }

    fn layer_forward(&self, l: usize, x: &[f64], out: &mut Vec<f64>) {
        let (i, o) = (self.dims[l], self.dims[l + 1]);
        let w = self.weights(l);
        let b = self.bias(l);
        out.clear();
        out.extend((0..o).map(|r| {
            let row = &w[r * i..(r + 1) * i];
            let z = b[r] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
            match self.activations[l] {
                Activation::Relu => z.max(0.0),
                Activation::Linear => z,
            }
        }));
    }

    fn check_input(&self, input: &[f64]) -> Result<(), NnError> {
        if input.len() != self.dims[0] {
            return Err(NnError::DimMismatch {
                expected: self.dims[0],
                found: input.len(),
            });
        }
        Ok(())
    }
}

impl Network for DenseNet {
    fn input_dim(&self) -> usize {
        self.dims[0]
    }

    fn output_dim(&self) -> usize {
        *self.dims.last().expect("non-empty")
    }

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn forward(&self, input: &[f64]) -> Result<Vec<f64>, NnError> {
        self.check_input(input)?;
        let mut cur = input.to_vec();
        let mut next = Vec::new();
        for l in 0..self.layers() {
            self.layer_forward(l, &cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    fn accumulate_gradient(&self, sample: &Sample, loss: Loss, grad: &mut [f64]) -> Result<f64, NnError> {
        self.check_input(sample.input)?;
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(self.layers() + 1);
        acts.push(sample.input.to_vec());
        for l in 0..self.layers() {
            let mut out = Vec::new();
            self.layer_forward(l, &acts[l], &mut out);
            acts.push(out);
        }
        let scores = acts.last().expect("output layer");
        let mut delta = vec![0.0; scores.len()];
        let value = output_loss(scores, sample.target, loss, &mut delta)?;

        for l in (0..self.layers()).rev() {
            let (i, o) = (self.dims[l], self.dims[l + 1]);
            if self.activations[l] == Activation::Relu {
                for (d, &a) in delta.iter_mut().zip(&acts[l + 1]) {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            let x = &acts[l];
            let start = self.offsets[l];
            let (gw, gb) = grad[start..self.offsets[l + 1]].split_at_mut(i * o);
            for (r, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                gb[r] += d;
                for (g, &xv) in gw[r * i..(r + 1) * i].iter_mut().zip(x) {
                    *g += d * xv;
                }
            }
            if l > 0 {
                let w = self.weights(l);
                let mut prev = vec![0.0; i];
                for (r, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    for (p, &wv) in prev.iter_mut().zip(&w[r * i..(r + 1) * i]) {
                        *p += d * wv;
                    }
                }
                delta = prev;
            }
        }
        Ok(value)
    }
}
