//! Gated recurrent sentence encoder.
//!
//! ```text
//! h_0 = 0
//! z = σ(W_z x_t + U_z h + b_z)
//! r = σ(W_r x_t + U_r h + b_r)
//! c = tanh(W_h x_t + U_h (r ⊙ h) + b_h)
//! h <- (1 - z) ⊙ h + z ⊙ c
//! ```
//!
//! The sentence embedding is `|h_T|`, unit-normalised when `normalize` is
//! set. Word vectors come from an [`EmbeddingTable`] and are therefore
//! nonnegative.

use crate::error::{check_dims, Error, Result};
use crate::numerics::{DenseMatrix, DenseVector, Parameters, Rng, TensorView};

use super::{head_backward, head_forward, init_glorot, prefixed, EmbeddingTable, HeadTrace};

#[derive(Clone, Debug, PartialEq)]
pub struct GruEncoder {
    pub words: EmbeddingTable,
    pub w_z: DenseMatrix,
    pub w_r: DenseMatrix,
    pub w_h: DenseMatrix,
    pub u_z: DenseMatrix,
    pub u_r: DenseMatrix,
    pub u_h: DenseMatrix,
    pub b_z: Vec<f64>,
    pub b_r: Vec<f64>,
    pub b_h: Vec<f64>,
    pub normalize: bool,
    pub absolute: bool,
}

struct Step {
    x: DenseVector,
    h_prev: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    cand: Vec<f64>,
}

/// Forward activations kept for backpropagation through time.
pub struct GruTrace {
    steps: Vec<Step>,
    head: HeadTrace,
}

impl GruTrace {
    pub fn output(&self) -> &DenseVector {
        self.head.output()
    }
}

fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

impl GruEncoder {
    /// All-zero parameters of the given shape.
    pub fn zeros(vocab: usize, word_dim: usize, hidden: usize, normalize: bool) -> Self {
        Self {
            words: EmbeddingTable::new(DenseMatrix::zeros(vocab, word_dim)),
            w_z: DenseMatrix::zeros(hidden, word_dim),
            w_r: DenseMatrix::zeros(hidden, word_dim),
            w_h: DenseMatrix::zeros(hidden, word_dim),
            u_z: DenseMatrix::zeros(hidden, hidden),
            u_r: DenseMatrix::zeros(hidden, hidden),
            u_h: DenseMatrix::zeros(hidden, hidden),
            b_z: vec![0.0; hidden],
            b_r: vec![0.0; hidden],
            b_h: vec![0.0; hidden],
            normalize,
            absolute: true,
        }
    }

    /// Word table ~ U(-0.1, 0.1), input/recurrent matrices Glorot-uniform,
    /// biases zero.
    pub fn init(
        vocab: usize,
        word_dim: usize,
        hidden: usize,
        normalize: bool,
        rng: &mut Rng,
    ) -> Result<Self> {
        if vocab == 0 || word_dim == 0 || hidden == 0 {
            return Err(Error::contract("GRU shapes must be positive"));
        }
        Ok(Self {
            words: EmbeddingTable::init(vocab, word_dim, rng)?,
            w_z: init_glorot(hidden, word_dim, rng)?,
            w_r: init_glorot(hidden, word_dim, rng)?,
            w_h: init_glorot(hidden, word_dim, rng)?,
            u_z: init_glorot(hidden, hidden, rng)?,
            u_r: init_glorot(hidden, hidden, rng)?,
            u_h: init_glorot(hidden, hidden, rng)?,
            b_z: vec![0.0; hidden],
            b_r: vec![0.0; hidden],
            b_h: vec![0.0; hidden],
            normalize,
            absolute: true,
        })
    }

    pub fn hidden(&self) -> usize {
        self.b_z.len()
    }

    pub fn word_dim(&self) -> usize {
        self.words.dim()
    }

    pub fn vocab_size(&self) -> usize {
        self.words.vocab_size()
    }

    pub fn forward(&self, tokens: &[usize]) -> Result<GruTrace> {
        if tokens.is_empty() {
            return Err(Error::contract("cannot encode an empty token sequence"));
        }
        let n = self.hidden();
        let mut h = vec![0.0; n];
        let mut steps = Vec::with_capacity(tokens.len());
        let mut a_z = vec![0.0; n];
        let mut a_r = vec![0.0; n];
        let mut a_h = vec![0.0; n];
        let mut tmp = vec![0.0; n];
        for &tok in tokens {
            let x = self.words.lookup(tok)?;

            self.w_z.matvec_into(&x, &mut a_z);
            self.u_z.matvec_into(&h, &mut tmp);
            let z: Vec<f64> = (0..n).map(|i| sigmoid(a_z[i] + tmp[i] + self.b_z[i])).collect();

            self.w_r.matvec_into(&x, &mut a_r);
            self.u_r.matvec_into(&h, &mut tmp);
            let r: Vec<f64> = (0..n).map(|i| sigmoid(a_r[i] + tmp[i] + self.b_r[i])).collect();

            let rh: Vec<f64> = r.iter().zip(&h).map(|(a, b)| a * b).collect();
            self.w_h.matvec_into(&x, &mut a_h);
            self.u_h.matvec_into(&rh, &mut tmp);
            let cand: Vec<f64> = (0..n).map(|i| (a_h[i] + tmp[i] + self.b_h[i]).tanh()).collect();

            let next: Vec<f64> = (0..n).map(|i| (1.0 - z[i]) * h[i] + z[i] * cand[i]).collect();
            steps.push(Step {
                x,
                h_prev: std::mem::replace(&mut h, next),
                z,
                r,
                cand,
            });
        }
        Ok(GruTrace {
            steps,
            head: head_forward(h, self.absolute, self.normalize)?,
        })
    }

    pub fn encode(&self, tokens: &[usize]) -> Result<DenseVector> {
        Ok(self.forward(tokens)?.head.out)
    }

    /// Backpropagation through time; accumulates into `grads`.
    pub fn backward(
        &self,
        tokens: &[usize],
        trace: &GruTrace,
        grad_out: &[f64],
        grads: &mut GruEncoder,
    ) -> Result<()> {
        let n = self.hidden();
        check_dims("gru backward", grad_out.len(), n)?;
        check_dims("gru backward trace", trace.steps.len(), tokens.len())?;
        let mut dh = head_backward(&trace.head, grad_out, self.absolute);
        let mut d_rh = vec![0.0; n];
        let mut dx = vec![0.0; self.word_dim()];

        for (step, &tok) in trace.steps.iter().zip(tokens).rev() {
            let Step {
                x,
                h_prev,
                z,
                r,
                cand,
            } = step;
            let mut dh_prev: Vec<f64> = (0..n).map(|i| dh[i] * (1.0 - z[i])).collect();

            let da_h: Vec<f64> = (0..n)
                .map(|i| dh[i] * z[i] * (1.0 - cand[i] * cand[i]))
                .collect();
            let da_z: Vec<f64> = (0..n)
                .map(|i| dh[i] * (cand[i] - h_prev[i]) * z[i] * (1.0 - z[i]))
                .collect();

            let rh: Vec<f64> = r.iter().zip(h_prev).map(|(a, b)| a * b).collect();
            grads.w_h.add_outer(&da_h, x);
            grads.u_h.add_outer(&da_h, &rh);
            d_rh.fill(0.0);
            self.u_h.matvec_t_acc(&da_h, &mut d_rh);
            let da_r: Vec<f64> = (0..n)
                .map(|i| d_rh[i] * h_prev[i] * r[i] * (1.0 - r[i]))
                .collect();
            for i in 0..n {
                dh_prev[i] += d_rh[i] * r[i];
            }

            grads.w_z.add_outer(&da_z, x);
            grads.u_z.add_outer(&da_z, h_prev);
            grads.w_r.add_outer(&da_r, x);
            grads.u_r.add_outer(&da_r, h_prev);
            self.u_z.matvec_t_acc(&da_z, &mut dh_prev);
            self.u_r.matvec_t_acc(&da_r, &mut dh_prev);
            for i in 0..n {
                grads.b_z[i] += da_z[i];
                grads.b_r[i] += da_r[i];
                grads.b_h[i] += da_h[i];
            }

            dx.fill(0.0);
            self.w_z.matvec_t_acc(&da_z, &mut dx);
            self.w_r.matvec_t_acc(&da_r, &mut dx);
            self.w_h.matvec_t_acc(&da_h, &mut dx);
            self.words.backward(tok, &dx, &mut grads.words)?;

            dh = dh_prev;
        }
        Ok(())
    }
}

impl Parameters for GruEncoder {
    fn tensors(&self) -> Vec<TensorView<'_>> {
        let mut out: Vec<TensorView<'_>> = self
            .words
            .tensors()
            .into_iter()
            .map(|t| TensorView {
                name: prefixed("words", &t.name),
                ..t
            })
            .collect();
        let mats = [
            ("w_z", &self.w_z),
            ("w_r", &self.w_r),
            ("w_h", &self.w_h),
            ("u_z", &self.u_z),
            ("u_r", &self.u_r),
            ("u_h", &self.u_h),
        ];
        for (name, m) in mats {
            out.push(TensorView {
                name: name.into(),
                shape: m.shape().to_vec(),
                data: m.as_slice(),
            });
        }
        for (name, b) in [("b_z", &self.b_z), ("b_r", &self.b_r), ("b_h", &self.b_h)] {
            out.push(TensorView {
                name: name.into(),
                shape: vec![b.len()],
                data: b,
            });
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out: Vec<(String, &mut [f64])> = self
            .words
            .tensors_mut()
            .into_iter()
            .map(|(n, t)| (prefixed("words", &n), t))
            .collect();
        out.push(("w_z".into(), self.w_z.as_mut_slice()));
        out.push(("w_r".into(), self.w_r.as_mut_slice()));
        out.push(("w_h".into(), self.w_h.as_mut_slice()));
        out.push(("u_z".into(), self.u_z.as_mut_slice()));
        out.push(("u_r".into(), self.u_r.as_mut_slice()));
        out.push(("u_h".into(), self.u_h.as_mut_slice()));
        out.push(("b_z".into(), &mut self.b_z));
        out.push(("b_r".into(), &mut self.b_r));
        out.push(("b_h".into(), &mut self.b_h));
        out
    }
}
