use rand::Rng;

use super::{glorot_bound, output_loss, softmax, Loss, Network, NnError, Sample};

/// Geometry of the two-stage classifier:
/// `conv(k1, f1) -> ReLU -> maxpool(p1) -> conv(k2, f2) -> ReLU -> maxpool(p2) -> linear(classes)`.
/// Convolutions are unpadded with stride 1; pools use stride equal to size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ConvShape {
    pub size: usize,
    pub kernel1: usize,
    pub filters1: usize,
    pub pool1: usize,
    pub kernel2: usize,
    pub filters2: usize,
    pub pool2: usize,
    pub classes: usize,
}

impl Default for ConvShape {
    fn default() -> Self {
        ConvShape {
            size: 40,
            kernel1: 3,
            filters1: 8,
            pool1: 2,
            kernel2: 3,
            filters2: 16,
            pool2: 3,
            classes: 3,
        }
    }
}

impl ConvShape {
    pub fn conv1_side(&self) -> usize {
        self.size + 1 - self.kernel1
    }

    pub fn pool1_side(&self) -> usize {
        (self.conv1_side() - self.pool1) / self.pool1 + 1
    }

    pub fn conv2_side(&self) -> usize {
        self.pool1_side() + 1 - self.kernel2
    }

    pub fn pool2_side(&self) -> usize {
        (self.conv2_side() - self.pool2) / self.pool2 + 1
    }

    pub fn flat(&self) -> usize {
        self.filters2 * self.pool2_side() * self.pool2_side()
    }

    /// Whether every stage has a positive output size.
    pub fn is_valid(&self) -> bool {
        let ok = |a: usize, b: usize| a >= b && b > 0;
        ok(self.size, self.kernel1)
            && ok(self.conv1_side(), self.pool1)
            && ok(self.pool1_side(), self.kernel2)
            && ok(self.conv2_side(), self.pool2)
            && self.filters1 > 0
            && self.filters2 > 0
            && self.classes > 0
    }

    /// `[w1, b1, w2, b2, wl, bl]` boundaries in the flat parameter vector.
    fn offsets(&self) -> [usize; 7] {
        let w1 = self.filters1 * self.kernel1 * self.kernel1;
        let w2 = self.filters2 * self.filters1 * self.kernel2 * self.kernel2;
        let wl = self.classes * self.flat();
        let mut o = [0; 7];
        let sizes = [w1, self.filters1, w2, self.filters2, wl, self.classes];
        for (i, s) in sizes.iter().enumerate() {
            o[i + 1] = o[i] + s;
        }
        o
    }

    pub fn param_count(&self) -> usize {
        self.offsets()[6]
    }

    /// Stage sizes, e.g. `40x40x1 -> 38x38x8 -> 19x19x8 -> 17x17x16 -> 5x5x16 -> 3`.
    pub fn describe(&self) -> String {
        format!(
            "{s}x{s}x1 -> {a}x{a}x{f1} -> {b}x{b}x{f1} -> {c}x{c}x{f2} -> {d}x{d}x{f2} -> {k}",
            s = self.size,
            a = self.conv1_side(),
            b = self.pool1_side(),
            c = self.conv2_side(),
            d = self.pool2_side(),
            f1 = self.filters1,
            f2 = self.filters2,
            k = self.classes
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvNet {
    shape: ConvShape,
    params: Vec<f64>,
}

struct Cache {
    a1: Vec<f64>,
    p1: Vec<f64>,
    idx1: Vec<usize>,
    a2: Vec<f64>,
    p2: Vec<f64>,
    idx2: Vec<usize>,
    scores: Vec<f64>,
}

/// Unpadded stride-1 convolution of `c_in` square planes of side `h`.
fn conv_forward(input: &[f64], c_in: usize, h: usize, w: &[f64], b: &[f64], k: usize, out: &mut [f64]) {
    let oh = h + 1 - k;
    let f_out = b.len();
    for f in 0..f_out {
        let plane = &mut out[f * oh * oh..(f + 1) * oh * oh];
        plane.fill(b[f]);
        for c in 0..c_in {
            let src = &input[c * h * h..(c + 1) * h * h];
            for ky in 0..k {
                for kx in 0..k {
                    let wv = w[((f * c_in + c) * k + ky) * k + kx];
                    for y in 0..oh {
                        let row = &src[(y + ky) * h + kx..(y + ky) * h + kx + oh];
                        let dst = &mut plane[y * oh..(y + 1) * oh];
                        for (d, s) in dst.iter_mut().zip(row) {
                            *d += wv * s;
                        }
                    }
                }
            }
        }
    }
}

/// Accumulates weight and bias gradients, and input gradients if `din` is given.
#[allow(clippy::too_many_arguments)]
fn conv_backward(
    input: &[f64],
    c_in: usize,
    h: usize,
    w: &[f64],
    k: usize,
    f_out: usize,
    dout: &[f64],
    gw: &mut [f64],
    gb: &mut [f64],
    mut din: Option<&mut [f64]>,
) {
    let oh = h + 1 - k;
    for f in 0..f_out {
        let dplane = &dout[f * oh * oh..(f + 1) * oh * oh];
        gb[f] += dplane.iter().sum::<f64>();
        for c in 0..c_in {
            let src = &input[c * h * h..(c + 1) * h * h];
            for ky in 0..k {
                for kx in 0..k {
                    let wi = ((f * c_in + c) * k + ky) * k + kx;
                    let mut acc = 0.0;
                    for y in 0..oh {
                        let row = &src[(y + ky) * h + kx..(y + ky) * h + kx + oh];
                        let drow = &dplane[y * oh..(y + 1) * oh];
                        acc += row.iter().zip(drow).map(|(a, b)| a * b).sum::<f64>();
                    }
                    gw[wi] += acc;
                    if let Some(din) = din.as_deref_mut() {
                        let wv = w[wi];
                        let dsrc = &mut din[c * h * h..(c + 1) * h * h];
                        for y in 0..oh {
                            let drow = &dplane[y * oh..(y + 1) * oh];
                            let dst = &mut dsrc[(y + ky) * h + kx..(y + ky) * h + kx + oh];
                            for (d, g) in dst.iter_mut().zip(drow) {
                                *d += wv * g;
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Max pooling with window and stride `p`; records the argmax positions.
fn pool_forward(input: &[f64], channels: usize, h: usize, p: usize, out: &mut Vec<f64>, idx: &mut Vec<usize>) {
    let oh = (h - p) / p + 1;
    out.clear();
    idx.clear();
    for c in 0..channels {
        for y in 0..oh {
            for x in 0..oh {
                let mut best = f64::NEG_INFINITY;
                let mut at = 0;
                for dy in 0..p {
                    for dx in 0..p {
                        let i = c * h * h + (y * p + dy) * h + x * p + dx;
                        if input[i] > best {
                            best = input[i];
                            at = i;
                        }
                    }
                }
                out.push(best);
                idx.push(at);
            }
        }
    }
}

impl ConvNet {
    pub fn zeros(shape: ConvShape) -> Self {
        assert!(shape.is_valid(), "invalid conv shape {shape:?}");
        ConvNet {
            shape,
            params: vec![0.0; shape.param_count()],
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot<R: Rng + ?Sized>(shape: ConvShape, rng: &mut R) -> Self {
        let mut net = ConvNet::zeros(shape);
        let o = shape.offsets();
        let k1 = shape.kernel1 * shape.kernel1;
        let k2 = shape.kernel2 * shape.kernel2;
        let bounds = [
            (0, glorot_bound(k1, shape.filters1 * k1)),
            (2, glorot_bound(shape.filters1 * k2, shape.filters2 * k2)),
            (4, glorot_bound(shape.flat(), shape.classes)),
        ];
        for (seg, b) in bounds {
            for w in &mut net.params[o[seg]..o[seg + 1]] {
                *w = rng.gen_range(-b..b);
            }
        }
        net
    }

    pub fn shape(&self) -> ConvShape {
        self.shape
    }

    pub fn round_to_f32(&mut self) {
        for p in &mut self.params {
            *p = *p as f32 as f64;
        }
    }

    /// Softmax over the class scores.
    pub fn probabilities(&self, input: &[f64]) -> Result<Vec<f64>, NnError> {
        Ok(softmax(&self.forward(input)?))
    }

    /// Index of the highest score.
    pub fn predict(&self, input: &[f64]) -> Result<usize, NnError> {
        let s = self.forward(input)?;
        Ok(s
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .expect("at least one class"))
    }

    fn run(&self, input: &[f64]) -> Result<Cache, NnError> {
        let s = &self.shape;
        if input.len() != s.size * s.size {
            return Err(NnError::DimMismatch {
                expected: s.size * s.size,
                found: input.len(),
            });
        }
        let o = s.offsets();
        let p = &self.params;
        let h1 = s.conv1_side();
        let mut a1 = vec![0.0; s.filters1 * h1 * h1];
        conv_forward(input, 1, s.size, &p[o[0]..o[1]], &p[o[1]..o[2]], s.kernel1, &mut a1);
        a1.iter_mut().for_each(|v| *v = v.max(0.0));
        let (mut p1, mut idx1) = (Vec::new(), Vec::new());
        pool_forward(&a1, s.filters1, h1, s.pool1, &mut p1, &mut idx1);

        let h2 = s.conv2_side();
        let mut a2 = vec![0.0; s.filters2 * h2 * h2];
        conv_forward(&p1, s.filters1, s.pool1_side(), &p[o[2]..o[3]], &p[o[3]..o[4]], s.kernel2, &mut a2);
        a2.iter_mut().for_each(|v| *v = v.max(0.0));
        let (mut p2, mut idx2) = (Vec::new(), Vec::new());
        pool_forward(&a2, s.filters2, h2, s.pool2, &mut p2, &mut idx2);

        let flat = s.flat();
        let wl = &p[o[4]..o[5]];
        let bl = &p[o[5]..o[6]];
        let scores = (0..s.classes)
            .map(|c| bl[c] + wl[c * flat..(c + 1) * flat].iter().zip(&p2).map(|(a, b)| a * b).sum::<f64>())
            .collect();
        Ok(Cache { a1, p1, idx1, a2, p2, idx2, scores })
    }
}

impl Network for ConvNet {
    fn input_dim(&self) -> usize {
        self.shape.size * self.shape.size
    }

    fn output_dim(&self) -> usize {
        self.shape.classes
    }

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn forward(&self, input: &[f64]) -> Result<Vec<f64>, NnError> {
        Ok(self.run(input)?.scores)
    }

    fn accumulate_gradient(&self, sample: &Sample, loss: Loss, grad: &mut [f64]) -> Result<f64, NnError> {
        let s = &self.shape;
        let o = s.offsets();
        let c = self.run(sample.input)?;
        let mut dscores = vec![0.0; s.classes];
        let value = output_loss(&c.scores, sample.target, loss, &mut dscores)?;

        let flat = s.flat();
        let wl = &self.params[o[4]..o[5]];
        let mut dp2 = vec![0.0; flat];
        {
            let (gwl, gbl) = grad[o[4]..o[6]].split_at_mut(s.classes * flat);
            for (k, &d) in dscores.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                gbl[k] += d;
                let row = &wl[k * flat..(k + 1) * flat];
                for j in 0..flat {
                    gwl[k * flat + j] += d * c.p2[j];
                    dp2[j] += d * row[j];
                }
            }
        }
        if dp2.iter().all(|&d| d == 0.0) {
            return Ok(value);
        }

        let mut da2 = vec![0.0; c.a2.len()];
        for (j, &d) in dp2.iter().enumerate() {
            da2[c.idx2[j]] += d;
        }
        for (d, &a) in da2.iter_mut().zip(&c.a2) {
            if a <= 0.0 {
                *d = 0.0;
            }
        }
        let mut dp1 = vec![0.0; c.p1.len()];
        {
            let (head, tail) = grad.split_at_mut(o[3]);
            conv_backward(
                &c.p1,
                s.filters1,
                s.pool1_side(),
                &self.params[o[2]..o[3]],
                s.kernel2,
                s.filters2,
                &da2,
                &mut head[o[2]..o[3]],
                &mut tail[..o[4] - o[3]],
                Some(&mut dp1),
            );
        }

        let mut da1 = vec![0.0; c.a1.len()];
        for (j, &d) in dp1.iter().enumerate() {
            da1[c.idx1[j]] += d;
        }
        for (d, &a) in da1.iter_mut().zip(&c.a1) {
            if a <= 0.0 {
                *d = 0.0;
            }
        }
        let (head, tail) = grad.split_at_mut(o[1]);
        conv_backward(
            sample.input,
            1,
            s.size,
            &self.params[o[0]..o[1]],
            s.kernel1,
            s.filters1,
            &da1,
            &mut head[o[0]..o[1]],
            &mut tail[..o[2] - o[1]],
            None,
        );
        Ok(value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_shape_chains_to_three_scores() {
        let s = ConvShape::default();
        assert_eq!(s.describe(), "40x40x1 -> 38x38x8 -> 19x19x8 -> 17x17x16 -> 5x5x16 -> 3");
        assert_eq!(s.flat(), 400);
    }

    #[test]
    fn zero_net_scores_zero() {
        let n = ConvNet::zeros(ConvShape::default());
        assert_eq!(n.forward(&[0.5; 1600]).unwrap(), vec![0.0; 3]);
        let p = n.probabilities(&[0.5; 1600]).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn wrong_input_size_errors() {
        let n = ConvNet::zeros(ConvShape::default());
        assert!(matches!(n.forward(&[0.0; 10]), Err(NnError::DimMismatch { .. })));
    }
}
