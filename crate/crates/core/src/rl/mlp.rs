use rand::Rng;

/// Fully connected network with `tanh` hidden layers and a linear output.
///
/// Parameters live in one flat vector; layer `l` stores its weights as an
/// `out × in` row-major block followed by `out` biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Activations recorded by [`Mlp::forward_cached`]; entry 0 is the input.
#[derive(Debug, Default, Clone)]
pub struct ForwardCache {
    acts: Vec<Vec<f64>>,
}

impl Mlp {
    pub fn param_count_for(sizes: &[usize]) -> usize {
        sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// Uniform `±1/√fan_in` initialization; the output layer is further
    /// scaled by `out_scale`.
    pub fn init<R: Rng + ?Sized>(sizes: &[usize], out_scale: f64, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs input and output sizes");
        let mut params = Vec::with_capacity(Self::param_count_for(sizes));
        let last = sizes.len() - 2;
        for (l, w) in sizes.windows(2).enumerate() {
            let bound = 1.0 / (w[0] as f64).sqrt();
            let scale = if l == last { out_scale } else { 1.0 };
            for _ in 0..w[0] * w[1] {
                params.push(scale * rng.gen_range(-bound..=bound));
            }
            for _ in 0..w[1] {
                params.push(scale * rng.gen_range(-bound..=bound));
            }
        }
        Self {
            sizes: sizes.to_vec(),
            params,
        }
    }

    pub fn from_parts(sizes: Vec<usize>, params: Vec<f64>) -> Option<Self> {
        (sizes.len() >= 2 && Self::param_count_for(&sizes) == params.len())
            .then_some(Self { sizes, params })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("non-empty sizes")
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut cache = ForwardCache::default();
        self.forward_cached(x, &mut cache).to_vec()
    }

    pub fn forward_cached<'c>(&self, x: &[f64], cache: &'c mut ForwardCache) -> &'c [f64] {
        debug_assert_eq!(x.len(), self.input_dim());
        let layers = self.sizes.len() - 1;
        cache.acts.resize(self.sizes.len(), Vec::new());
        cache.acts[0].clear();
        cache.acts[0].extend_from_slice(x);
        let mut offset = 0;
        for l in 0..layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[offset..offset + n_in * n_out];
            let b = &self.params[offset + n_in * n_out..offset + n_in * n_out + n_out];
            offset += n_in * n_out + n_out;
            let (prev, rest) = cache.acts.split_at_mut(l + 1);
            let input = &prev[l];
            let out = &mut rest[0];
            out.clear();
            for o in 0..n_out {
                let row = &w[o * n_in..(o + 1) * n_in];
                let z = b[o] + row.iter().zip(input).map(|(a, b)| a * b).sum::<f64>();
                out.push(if l + 1 < layers { z.tanh() } else { z });
            }
        }
        &cache.acts[layers]
    }

    /// Accumulates `∂L/∂θ` into `grad` given `∂L/∂output` for the cached pass.
    pub fn backward(&self, cache: &ForwardCache, d_out: &[f64], grad: &mut [f64]) {
        let layers = self.sizes.len() - 1;
        let mut delta = d_out.to_vec();
        let mut offset = self.params.len();
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            offset -= n_in * n_out + n_out;
            let input = &cache.acts[l];
            let (gw, gb) = grad[offset..offset + n_in * n_out + n_out].split_at_mut(n_in * n_out);
            for o in 0..n_out {
                let d = delta[o];
                gb[o] += d;
                for (g, x) in gw[o * n_in..(o + 1) * n_in].iter_mut().zip(input) {
                    *g += d * x;
                }
            }
            if l == 0 {
                break;
            }
            let w = &self.params[offset..offset + n_in * n_out];
            let mut prev = vec![0.0; n_in];
            for o in 0..n_out {
                let d = delta[o];
                for (p, wi) in prev.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                    *p += d * wi;
                }
            }
            // tanh'(z) = 1 − tanh(z)²
            for (p, a) in prev.iter_mut().zip(input) {
                *p *= 1.0 - a * a;
            }
            delta = prev;
        }
    }
}
