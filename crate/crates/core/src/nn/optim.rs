use super::{Gradients, Parameterized};

/// Rescales all gradients by `max_norm/g` when their global L2 norm `g`
/// exceeds `max_norm`.
pub fn clip_gradients(mut grads: Gradients, max_norm: f64) -> Gradients {
    assert!(max_norm > 0.0, "max_norm must be positive");
    let norm = grads.global_norm();
    if norm > max_norm {
        grads.scale(max_norm / norm);
    }
    grads
}

/// Adam optimizer state with bias-corrected moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(shapes: &[usize], lr: f64) -> Self {
        Self {
            step: 0,
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn for_model(model: &impl Parameterized, lr: f64) -> Self {
        Self::new(&model.param_shapes(), lr)
    }

    /// One update of `params` (in the same order as `grads`).
    pub fn step(&mut self, params: Vec<&mut [f64]>, grads: &Gradients) {
        assert_eq!(params.len(), self.m.len(), "parameter tensor count");
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (k, p) in params.into_iter().enumerate() {
            let g = &grads.tensors()[k];
            assert_eq!(p.len(), g.len(), "tensor {k} shape");
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clip_below_threshold_unchanged() {
        let g = Gradients::new(vec![vec![3.0], vec![0.0]]);
        assert_eq!(clip_gradients(g.clone(), 5.0), g);
    }

    #[test]
    fn clip_halves() {
        let g = Gradients::new(vec![vec![6.0, 0.0], vec![8.0]]);
        let c = clip_gradients(g, 5.0);
        assert_eq!(c.tensors(), &[vec![3.0, 0.0], vec![4.0]]);
        assert!((c.global_norm() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn zero_gradient_keeps_params() {
        let mut adam = AdamState::new(&[3], 0.1);
        let mut p = vec![1.0, -2.0, 3.0];
        adam.step(vec![&mut p], &Gradients::new(vec![vec![0.0; 3]]));
        assert_eq!(p, vec![1.0, -2.0, 3.0]);
        assert_eq!(adam.step, 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let lr = 5e-4;
        let mut adam = AdamState::new(&[2], lr);
        let mut p = vec![0.0, 0.0];
        adam.step(vec![&mut p], &Gradients::new(vec![vec![0.3, -7.0]]));
        // m̂ = g, v̂ = g², update = lr·g/(|g| + eps)
        assert!((p[0] + lr * 0.3 / (0.3 + 1e-8)).abs() < 1e-18);
        assert!((p[1] - lr * 7.0 / (7.0 + 1e-8)).abs() < 1e-18);
        assert!((p[0] + lr).abs() < 1e-10);
    }

    #[test]
    fn deterministic() {
        let g = Gradients::new(vec![vec![0.1, 0.2]]);
        let run = || {
            let mut adam = AdamState::new(&[2], 0.01);
            let mut p = vec![1.0, 1.0];
            for _ in 0..5 {
                adam.step(vec![&mut p], &g);
            }
            (p, adam)
        };
        assert_eq!(run(), run());
    }
}
