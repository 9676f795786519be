//! The noise-prediction network: a four-layer MLP whose first three hidden
//! pre-activations each receive an additive learned step embedding.
//!
//! ```text
//! h1  = relu(W1·x + b1 + E1[t])
//! h2  = relu(W2·h1 + b2 + E2[t])
//! h3  = relu(W3·h2 + b3 + E3[t])
//! out = W4·h3 + b4
//! ```
//!
//! All weights live in one flat buffer; [`ParamGroup`] names the slices.

use std::ops::Range;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    /// Sample dimension (6 for depth-3 QAOA angles).
    pub input: usize,
    pub hidden: usize,
    /// Number of diffusion steps; rows of each embedding table.
    pub steps: usize,
}

impl ModelDims {
    pub fn validate(&self) -> Result<()> {
        if self.input == 0 || self.hidden == 0 || self.steps < 2 {
            return Err(Error::Parameter(format!(
                "invalid model dimensions {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamGroup {
    W1,
    B1,
    W2,
    B2,
    W3,
    B3,
    W4,
    B4,
    Emb1,
    Emb2,
    Emb3,
}

impl ParamGroup {
    pub const ALL: [ParamGroup; 11] = [
        ParamGroup::W1,
        ParamGroup::B1,
        ParamGroup::W2,
        ParamGroup::B2,
        ParamGroup::W3,
        ParamGroup::B3,
        ParamGroup::W4,
        ParamGroup::B4,
        ParamGroup::Emb1,
        ParamGroup::Emb2,
        ParamGroup::Emb3,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ParamGroup::W1 => "encoder.0.weight",
            ParamGroup::B1 => "encoder.0.bias",
            ParamGroup::W2 => "encoder.1.weight",
            ParamGroup::B2 => "encoder.1.bias",
            ParamGroup::W3 => "encoder.2.weight",
            ParamGroup::B3 => "encoder.2.bias",
            ParamGroup::W4 => "encoder.3.weight",
            ParamGroup::B4 => "encoder.3.bias",
            ParamGroup::Emb1 => "step_embedding.0",
            ParamGroup::Emb2 => "step_embedding.1",
            ParamGroup::Emb3 => "step_embedding.2",
        }
    }

    /// `(rows, cols)`; biases are `(len, 1)`.
    pub fn shape(self, d: &ModelDims) -> (usize, usize) {
        match self {
            ParamGroup::W1 => (d.hidden, d.input),
            ParamGroup::W2 | ParamGroup::W3 => (d.hidden, d.hidden),
            ParamGroup::W4 => (d.input, d.hidden),
            ParamGroup::B1 | ParamGroup::B2 | ParamGroup::B3 => (d.hidden, 1),
            ParamGroup::B4 => (d.input, 1),
            ParamGroup::Emb1 | ParamGroup::Emb2 | ParamGroup::Emb3 => (d.steps, d.hidden),
        }
    }
}

/// Offsets of every group inside the flat buffer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    ranges: Vec<Range<usize>>,
}

impl Layout {
    pub fn new(d: &ModelDims) -> Self {
        let mut start = 0;
        let ranges = ParamGroup::ALL
            .iter()
            .map(|g| {
                let (r, c) = g.shape(d);
                let range = start..start + r * c;
                start = range.end;
                range
            })
            .collect();
        Layout { ranges }
    }

    pub fn range(&self, g: ParamGroup) -> Range<usize> {
        self.ranges[g as usize].clone()
    }

    pub fn len(&self) -> usize {
        self.ranges.last().map_or(0, |r| r.end)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Activations kept for backpropagation.
struct Tape {
    z: [Vec<f64>; 3],
    a: [Vec<f64>; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoisePredictor {
    dims: ModelDims,
    layout: Layout,
    params: Vec<f64>,
}

fn matvec_add(w: &[f64], x: &[f64], out: &mut [f64]) {
    let cols = x.len();
    for (o, row) in out.iter_mut().zip(w.chunks_exact(cols)) {
        *o += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

impl NoisePredictor {
    /// All weights zero.
    pub fn zeros(dims: ModelDims) -> Result<Self> {
        dims.validate()?;
        let layout = Layout::new(&dims);
        let params = vec![0.0; layout.len()];
        Ok(NoisePredictor {
            dims,
            layout,
            params,
        })
    }

    /// Linear layers uniform in `±1/sqrt(fan_in)`, embeddings `N(0, 0.02²)`.
    pub fn init(dims: ModelDims, seed: u64) -> Result<Self> {
        let mut model = Self::zeros(dims)?;
        let mut rng = rng_from_seed(seed);
        let emb = Normal::new(0.0, 0.02).expect("valid normal");
        for g in ParamGroup::ALL {
            let fan_in = match g {
                ParamGroup::W1 | ParamGroup::B1 => dims.input,
                ParamGroup::Emb1 | ParamGroup::Emb2 | ParamGroup::Emb3 => 0,
                _ => dims.hidden,
            };
            let range = model.layout.range(g);
            let slice = &mut model.params[range];
            if fan_in == 0 {
                slice.iter_mut().for_each(|p| *p = emb.sample(&mut rng));
            } else {
                let bound = (fan_in as f64).sqrt().recip();
                slice
                    .iter_mut()
                    .for_each(|p| *p = rng.random_range(-bound..bound));
            }
        }
        Ok(model)
    }

    /// Rebuild from a flat buffer laid out per [`Layout`].
    pub fn from_params(dims: ModelDims, params: Vec<f64>) -> Result<Self> {
        dims.validate()?;
        let layout = Layout::new(&dims);
        if params.len() != layout.len() {
            return Err(Error::Parameter(format!(
                "expected {} weights, got {}",
                layout.len(),
                params.len()
            )));
        }
        Ok(NoisePredictor {
            dims,
            layout,
            params,
        })
    }

    pub fn dims(&self) -> &ModelDims {
        &self.dims
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn group(&self, g: ParamGroup) -> &[f64] {
        &self.params[self.layout.range(g)]
    }

    fn embedding_row(&self, g: ParamGroup, t: usize) -> &[f64] {
        let h = self.dims.hidden;
        &self.group(g)[(t - 1) * h..t * h]
    }

    fn check(&self, x: &[f64], t: usize) -> Result<()> {
        if x.len() != self.dims.input {
            return Err(Error::Parameter(format!(
                "input has {} components, model expects {}",
                x.len(),
                self.dims.input
            )));
        }
        if t == 0 || t > self.dims.steps {
            return Err(Error::Parameter(format!(
                "diffusion step {t} outside 1..={}",
                self.dims.steps
            )));
        }
        Ok(())
    }

    fn forward_tape(&self, x: &[f64], t: usize) -> (Vec<f64>, Tape) {
        let layers = [
            (ParamGroup::W1, ParamGroup::B1, ParamGroup::Emb1),
            (ParamGroup::W2, ParamGroup::B2, ParamGroup::Emb2),
            (ParamGroup::W3, ParamGroup::B3, ParamGroup::Emb3),
        ];
        let mut z: [Vec<f64>; 3] = Default::default();
        let mut a: [Vec<f64>; 3] = Default::default();
        for (k, (w, b, e)) in layers.into_iter().enumerate() {
            let mut pre: Vec<f64> = self
                .group(b)
                .iter()
                .zip(self.embedding_row(e, t))
                .map(|(b, e)| b + e)
                .collect();
            let input = if k == 0 { x } else { &a[k - 1] };
            matvec_add(self.group(w), input, &mut pre);
            a[k] = pre.iter().map(|v| v.max(0.0)).collect();
            z[k] = pre;
        }
        let mut out = self.group(ParamGroup::B4).to_vec();
        matvec_add(self.group(ParamGroup::W4), &a[2], &mut out);
        (out, Tape { z, a })
    }

    /// Predicted noise `ε_θ(x_t, t)`.
    pub fn predict(&self, x: &[f64], t: usize) -> Result<Vec<f64>> {
        self.check(x, t)?;
        Ok(self.forward_tape(x, t).0)
    }

    /// Mean squared noise-prediction error over a batch of `(x_t, t, ε)`
    /// triples, averaged over samples and components. When `grad` is given,
    /// the gradient of that loss is accumulated into it.
    pub fn batch_loss(
        &self,
        batch: &[(Vec<f64>, usize, Vec<f64>)],
        mut grad: Option<&mut [f64]>,
    ) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::Parameter("empty batch".into()));
        }
        if let Some(g) = grad.as_deref() {
            if g.len() != self.params.len() {
                return Err(Error::Parameter("gradient buffer has wrong length".into()));
            }
        }
        let d = self.dims.input;
        let h = self.dims.hidden;
        let scale = 1.0 / (batch.len() * d) as f64;
        let mut loss = 0.0;
        for (x, t, eps) in batch {
            self.check(x, *t)?;
            if eps.len() != d {
                return Err(Error::Parameter("noise target has wrong length".into()));
            }
            let (out, tape) = self.forward_tape(x, *t);
            let mut dout = vec![0.0; d];
            for k in 0..d {
                let r = out[k] - eps[k];
                loss += r * r * scale;
                dout[k] = 2.0 * r * scale;
            }
            if let Some(g) = grad.as_deref_mut() {
                self.backward(x, *t, &tape, &dout, g, h);
            }
        }
        Ok(loss)
    }

    fn backward(&self, x: &[f64], t: usize, tape: &Tape, dout: &[f64], g: &mut [f64], h: usize) {
        let l = &self.layout;
        // Output layer.
        {
            let a3 = &tape.a[2];
            let gw = &mut g[l.range(ParamGroup::W4)];
            for (row, &dy) in gw.chunks_exact_mut(h).zip(dout) {
                row.iter_mut().zip(a3).for_each(|(w, a)| *w += dy * a);
            }
            g[l.range(ParamGroup::B4)]
                .iter_mut()
                .zip(dout)
                .for_each(|(b, dy)| *b += dy);
        }
        let mut upstream = vec![0.0; h];
        for (row, &dy) in self.group(ParamGroup::W4).chunks_exact(h).zip(dout) {
            upstream.iter_mut().zip(row).for_each(|(u, w)| *u += w * dy);
        }

        let layers = [
            (ParamGroup::W1, ParamGroup::B1, ParamGroup::Emb1),
            (ParamGroup::W2, ParamGroup::B2, ParamGroup::Emb2),
            (ParamGroup::W3, ParamGroup::B3, ParamGroup::Emb3),
        ];
        for k in (0..3).rev() {
            let (w, b, e) = layers[k];
            let dz: Vec<f64> = upstream
                .iter()
                .zip(&tape.z[k])
                .map(|(u, z)| if *z > 0.0 { *u } else { 0.0 })
                .collect();
            let input: &[f64] = if k == 0 { x } else { &tape.a[k - 1] };
            let cols = input.len();
            for (row, &dzo) in g[l.range(w)].chunks_exact_mut(cols).zip(&dz) {
                if dzo != 0.0 {
                    row.iter_mut().zip(input).for_each(|(gw, a)| *gw += dzo * a);
                }
            }
            g[l.range(b)]
                .iter_mut()
                .zip(&dz)
                .for_each(|(gb, d)| *gb += d);
            let er = l.range(e).start + (t - 1) * h;
            g[er..er + h]
                .iter_mut()
                .zip(&dz)
                .for_each(|(ge, d)| *ge += d);
            if k > 0 {
                upstream = vec![0.0; cols];
                for (row, &dzo) in self.group(w).chunks_exact(cols).zip(&dz) {
                    if dzo != 0.0 {
                        upstream
                            .iter_mut()
                            .zip(row)
                            .for_each(|(u, w)| *u += w * dzo);
                    }
                }
            }
        }
    }
}
