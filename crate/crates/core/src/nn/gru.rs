use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::layers::{sigmoid, xavier_matrix};
use super::matrix::{add_row_bias, matmul, matmul_acc, matmul_nt_acc, matmul_tn_acc, row_sums, Matrix};
use super::{Gradients, Parameterized};

/// Gated recurrent unit:
///
/// ```text
/// z_t = σ(W_z x_t + U_z h_{t−1} + b_z)
/// r_t = σ(W_r x_t + U_r h_{t−1} + b_r)
/// ĥ_t = tanh(W_h x_t + U_h (r_t ⊙ h_{t−1}) + b_h)
/// h_t = (1 − z_t) ⊙ h_{t−1} + z_t ⊙ ĥ_t
/// ```
///
/// Parameter order: `W_z, U_z, b_z, W_r, U_r, b_r, W_h, U_h, b_h`.
#[derive(Debug, Clone)]
pub struct GruCell {
    pub wz: Matrix,
    pub uz: Matrix,
    pub bz: Vec<f64>,
    pub wr: Matrix,
    pub ur: Matrix,
    pub br: Vec<f64>,
    pub wh: Matrix,
    pub uh: Matrix,
    pub bh: Vec<f64>,
    version: u64,
}

#[derive(Debug, Clone)]
struct StepCache {
    x: Matrix,
    h_prev: Matrix,
    z: Matrix,
    r: Matrix,
    rh: Matrix,
    h_cand: Matrix,
}

/// Per-step intermediates of an unrolled sequence.
#[derive(Debug, Clone)]
pub struct GruCache {
    version: u64,
    steps: Vec<StepCache>,
}

/// Gradients of the nine GRU tensors, in parameter order.
pub type GruGradients = Gradients;

impl PartialEq for GruCell {
    fn eq(&self, other: &Self) -> bool {
        self.params() == other.params()
            && (self.input_dim(), self.hidden()) == (other.input_dim(), other.hidden())
    }
}

impl GruCell {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        Self {
            wz: Matrix::zeros(hidden, input_dim),
            uz: Matrix::zeros(hidden, hidden),
            bz: vec![0.0; hidden],
            wr: Matrix::zeros(hidden, input_dim),
            ur: Matrix::zeros(hidden, hidden),
            br: vec![0.0; hidden],
            wh: Matrix::zeros(hidden, input_dim),
            uh: Matrix::zeros(hidden, hidden),
            bh: vec![0.0; hidden],
            version: 0,
        }
    }

    /// Xavier-uniform weights (fan-in of the input or hidden side), zero biases.
    pub fn new(input_dim: usize, hidden: usize, seed: u64) -> Self {
        Self::new_with(input_dim, hidden, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    pub(crate) fn new_with(input_dim: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let mut cell = Self::zeros(input_dim, hidden);
        cell.wz = xavier_matrix(hidden, input_dim, input_dim, rng);
        cell.uz = xavier_matrix(hidden, hidden, hidden, rng);
        cell.wr = xavier_matrix(hidden, input_dim, input_dim, rng);
        cell.ur = xavier_matrix(hidden, hidden, hidden, rng);
        cell.wh = xavier_matrix(hidden, input_dim, input_dim, rng);
        cell.uh = xavier_matrix(hidden, hidden, hidden, rng);
        cell
    }

    pub fn hidden(&self) -> usize {
        self.bz.len()
    }

    pub fn input_dim(&self) -> usize {
        self.wz.cols()
    }

    fn step_batch(&self, x: &Matrix, h_prev: &Matrix) -> StepCache {
        let gate = |w: &Matrix, u: &Matrix, b: &[f64], h: &Matrix| {
            let mut a = matmul(w, x);
            matmul_acc(u, h, &mut a);
            add_row_bias(&mut a, b);
            a
        };
        let z = gate(&self.wz, &self.uz, &self.bz, h_prev).map(sigmoid);
        let r = gate(&self.wr, &self.ur, &self.br, h_prev).map(sigmoid);
        let mut rh = r.clone();
        for (v, &h) in rh.data_mut().iter_mut().zip(h_prev.data()) {
            *v *= h;
        }
        let h_cand = gate(&self.wh, &self.uh, &self.bh, &rh).map(f64::tanh);
        StepCache {
            x: x.clone(),
            h_prev: h_prev.clone(),
            z,
            r,
            rh,
            h_cand,
        }
    }

    fn next_hidden(s: &StepCache) -> Matrix {
        let mut h = s.h_prev.clone();
        for ((v, &z), &c) in h.data_mut().iter_mut().zip(s.z.data()).zip(s.h_cand.data()) {
            *v = (1.0 - z) * *v + z * c;
        }
        h
    }

    /// One step for a single sample.
    pub fn step(&self, x: &[f64], h_prev: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() || h_prev.len() != self.hidden() {
            return Err(Error::Contract(format!(
                "gru step expects input {} and hidden {}, got {} and {}",
                self.input_dim(),
                self.hidden(),
                x.len(),
                h_prev.len()
            )));
        }
        let xm = Matrix::from_vec(x.len(), 1, x.to_vec())?;
        let hm = Matrix::from_vec(h_prev.len(), 1, h_prev.to_vec())?;
        Ok(Self::next_hidden(&self.step_batch(&xm, &hm)).into_vec())
    }

    /// Unrolls over `xs` (each input_dim×batch) from `h_0 = 0` and returns
    /// the final hidden state (hidden×batch).
    pub fn forward_sequence(&self, xs: &[Matrix]) -> Result<(Matrix, GruCache)> {
        let batch = xs.first().map_or(0, Matrix::cols);
        let mut h = Matrix::zeros(self.hidden(), batch);
        let mut steps = Vec::with_capacity(xs.len());
        for (t, x) in xs.iter().enumerate() {
            if x.rows() != self.input_dim() || x.cols() != batch {
                return Err(Error::Shape {
                    layer: t,
                    message: format!("gru input at step {t} is {}x{}", x.rows(), x.cols()),
                });
            }
            let s = self.step_batch(x, &h);
            h = Self::next_hidden(&s);
            steps.push(s);
        }
        Ok((
            h,
            GruCache {
                version: self.version,
                steps,
            },
        ))
    }

    /// Backpropagation through time from the gradient on the last hidden state.
    pub fn backward(&self, cache: &GruCache, dh_last: &Matrix) -> Result<GruGradients> {
        if cache.version != self.version {
            return Err(Error::Contract("stale gru cache: parameters changed since the forward pass".into()));
        }
        let hid = self.hidden();
        let inp = self.input_dim();
        let mut dwz = Matrix::zeros(hid, inp);
        let mut duz = Matrix::zeros(hid, hid);
        let mut dbz = vec![0.0; hid];
        let mut dwr = Matrix::zeros(hid, inp);
        let mut dur = Matrix::zeros(hid, hid);
        let mut dbr = vec![0.0; hid];
        let mut dwh = Matrix::zeros(hid, inp);
        let mut duh = Matrix::zeros(hid, hid);
        let mut dbh = vec![0.0; hid];

        let mut dh = dh_last.clone();
        for s in cache.steps.iter().rev() {
            let n = dh.data().len();
            let mut dh_prev = dh.clone();
            let mut da_z = dh.clone();
            let mut da_h = dh.clone();
            for k in 0..n {
                let (g, z, c, hp) = (dh.data()[k], s.z.data()[k], s.h_cand.data()[k], s.h_prev.data()[k]);
                dh_prev.data_mut()[k] = g * (1.0 - z);
                da_z.data_mut()[k] = g * (c - hp) * z * (1.0 - z);
                da_h.data_mut()[k] = g * z * (1.0 - c * c);
            }
            // candidate path
            matmul_nt_acc(&da_h, &s.x, &mut dwh);
            matmul_nt_acc(&da_h, &s.rh, &mut duh);
            add_into(&mut dbh, &row_sums(&da_h));
            let mut d_rh = Matrix::zeros(hid, dh.cols());
            matmul_tn_acc(&self.uh, &da_h, &mut d_rh);
            let mut da_r = d_rh.clone();
            for k in 0..n {
                let (g, r, hp) = (d_rh.data()[k], s.r.data()[k], s.h_prev.data()[k]);
                dh_prev.data_mut()[k] += g * r;
                da_r.data_mut()[k] = g * hp * r * (1.0 - r);
            }
            // reset gate
            matmul_nt_acc(&da_r, &s.x, &mut dwr);
            matmul_nt_acc(&da_r, &s.h_prev, &mut dur);
            add_into(&mut dbr, &row_sums(&da_r));
            matmul_tn_acc(&self.ur, &da_r, &mut dh_prev);
            // update gate
            matmul_nt_acc(&da_z, &s.x, &mut dwz);
            matmul_nt_acc(&da_z, &s.h_prev, &mut duz);
            add_into(&mut dbz, &row_sums(&da_z));
            matmul_tn_acc(&self.uz, &da_z, &mut dh_prev);
            dh = dh_prev;
        }
        Ok(Gradients::new(vec![
            dwz.into_vec(),
            duz.into_vec(),
            dbz,
            dwr.into_vec(),
            dur.into_vec(),
            dbr,
            dwh.into_vec(),
            duh.into_vec(),
            dbh,
        ]))
    }
}

fn add_into(acc: &mut [f64], v: &[f64]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}

impl Parameterized for GruCell {
    fn params(&self) -> Vec<&[f64]> {
        vec![
            self.wz.data(),
            self.uz.data(),
            &self.bz,
            self.wr.data(),
            self.ur.data(),
            &self.br,
            self.wh.data(),
            self.uh.data(),
            &self.bh,
        ]
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.version += 1;
        vec![
            self.wz.data_mut(),
            self.uz.data_mut(),
            &mut self.bz,
            self.wr.data_mut(),
            self.ur.data_mut(),
            &mut self.br,
            self.wh.data_mut(),
            self.uh.data_mut(),
            &mut self.bh,
        ]
    }
}
