use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Fully connected network over a flat parameter slice: tanh on every hidden
/// layer, identity on the output. Layer `l` stores its `out x in` weights
/// row-major, followed by `out` biases.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpShape {
    pub sizes: Vec<usize>,
}

/// Post-activation values of every layer, input first.
#[derive(Debug, Clone)]
pub struct MlpCache {
    pub acts: Vec<Vec<f64>>,
}

impl MlpCache {
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("cache has at least the input")
    }
}

impl MlpShape {
    pub fn new(sizes: Vec<usize>) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs input and output sizes");
        Self { sizes }
    }

    pub fn input_width(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_width(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn n_params(&self) -> usize {
        self.sizes.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
    }

    /// Gaussian weights with variance `1/fan_in`, the last layer scaled by
    /// `out_scale`; zero biases.
    pub fn init<R: Rng + ?Sized>(&self, rng: &mut R, out_scale: f64) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.n_params());
        let layers = self.sizes.len() - 1;
        for (l, w) in self.sizes.windows(2).enumerate() {
            let scale = (1.0 / w[0] as f64).sqrt() * if l + 1 == layers { out_scale } else { 1.0 };
            for _ in 0..w[0] * w[1] {
                let z: f64 = rng.sample(StandardNormal);
                p.push(scale * z);
            }
            p.extend(std::iter::repeat_n(0.0, w[1]));
        }
        p
    }

    pub fn forward(&self, params: &[f64], x: &[f64]) -> MlpCache {
        debug_assert_eq!(params.len(), self.n_params());
        debug_assert_eq!(x.len(), self.input_width());
        let layers = self.sizes.len() - 1;
        let mut acts = Vec::with_capacity(self.sizes.len());
        acts.push(x.to_vec());
        let mut off = 0;
        for (l, w) in self.sizes.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let weights = &params[off..off + n_in * n_out];
            let bias = &params[off + n_in * n_out..off + n_in * n_out + n_out];
            let input = &acts[l];
            let mut out: Vec<f64> = weights
                .chunks_exact(n_in)
                .zip(bias)
                .map(|(row, b)| b + row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>())
                .collect();
            if l + 1 < layers {
                out.iter_mut().for_each(|v| *v = v.tanh());
            }
            acts.push(out);
            off += n_in * n_out + n_out;
        }
        MlpCache { acts }
    }

    /// Accumulates `d(loss)/d(params)` into `grad` given `d(loss)/d(output)`.
    pub fn backward(&self, params: &[f64], cache: &MlpCache, d_out: &[f64], grad: &mut [f64]) {
        let layers = self.sizes.len() - 1;
        let mut offsets = Vec::with_capacity(layers);
        let mut off = 0;
        for w in self.sizes.windows(2) {
            offsets.push(off);
            off += w[0] * w[1] + w[1];
        }
        let mut delta = d_out.to_vec();
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let off = offsets[l];
            let input = &cache.acts[l];
            for (o, &d) in delta.iter().enumerate() {
                let row = &mut grad[off + o * n_in..off + (o + 1) * n_in];
                row.iter_mut().zip(input).for_each(|(g, x)| *g += d * x);
                grad[off + n_in * n_out + o] += d;
            }
            if l > 0 {
                let weights = &params[off..off + n_in * n_out];
                let mut prev = vec![0.0; n_in];
                for (row, &d) in weights.chunks_exact(n_in).zip(&delta) {
                    prev.iter_mut().zip(row).for_each(|(p, w)| *p += w * d);
                }
                for (p, a) in prev.iter_mut().zip(input) {
                    *p *= 1.0 - a * a;
                }
                delta = prev;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn param_count() {
        let s = MlpShape::new(vec![3, 5, 2]);
        assert_eq!(s.n_params(), 3 * 5 + 5 + 5 * 2 + 2);
    }

    #[test]
    fn zero_weights_give_bias() {
        let s = MlpShape::new(vec![2, 3, 1]);
        let mut p = vec![0.0; s.n_params()];
        *p.last_mut().unwrap() = 0.7;
        assert_eq!(s.forward(&p, &[1.0, -2.0]).output(), &[0.7]);
    }

    #[test]
    fn backward_matches_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = MlpShape::new(vec![3, 4, 4, 2]);
        let p = s.init(&mut rng, 1.0);
        let x = [0.3, -0.8, 0.5];
        let c = [0.7, -1.3];
        let loss = |p: &[f64]| {
            let out = s.forward(p, &x);
            out.output().iter().zip(&c).map(|(o, c)| o * c).sum::<f64>()
        };
        let mut grad = vec![0.0; p.len()];
        s.backward(&p, &s.forward(&p, &x), &c, &mut grad);
        let h = 1e-6;
        for i in 0..p.len() {
            let (mut up, mut dn) = (p.clone(), p.clone());
            up[i] += h;
            dn[i] -= h;
            let fd = (loss(&up) - loss(&dn)) / (2.0 * h);
            assert!((fd - grad[i]).abs() <= 1e-7 + 1e-5 * fd.abs(), "param {i}: {fd} vs {}", grad[i]);
        }
    }
}
