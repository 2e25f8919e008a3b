//! Adamax: Adam with an infinity-norm second moment.

use crate::model::{Gradients, ModelWeights};

#[derive(Debug, Clone)]
pub struct Adamax {
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
    step: u32,
    m: Vec<Vec<f32>>,
    u: Vec<Vec<f32>>,
}

impl Adamax {
    pub fn new(lr: f32) -> Self {
        Adamax {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: Vec::new(),
            u: Vec::new(),
        }
    }

    pub fn steps_taken(&self) -> u32 {
        self.step
    }

    /// `m ← β1·m + (1−β1)·g`, `u ← max(β2·u, |g| + ε)`,
    /// `w ← w − lr/(1−β1^t) · m/u`. Non-trainable tensors are skipped.
    pub fn step(&mut self, weights: &mut ModelWeights, grads: &Gradients) {
        if self.m.is_empty() {
            self.m = grads.iter().map(|g| vec![0.0; g.len()]).collect();
            self.u = self.m.clone();
        }
        self.step += 1;
        let clr = self.lr / (1.0 - self.beta1.powi(self.step as i32));
        for (k, t) in weights.tensors.iter_mut().enumerate() {
            if !t.trainable {
                continue;
            }
            let g = &grads[k];
            let (m, u) = (&mut self.m[k], &mut self.u[k]);
            for i in 0..t.data.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                u[i] = (self.beta2 * u[i]).max(g[i].abs() + self.eps);
                t.data[i] -= clr * m[i] / u[i];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::NamedTensor;

    fn one_param(v: f32) -> ModelWeights {
        ModelWeights {
            fingerprint: "t".into(),
            tensors: vec![
                NamedTensor {
                    name: "w".into(),
                    shape: vec![1],
                    data: vec![v],
                    trainable: true,
                },
                NamedTensor {
                    name: "buf".into(),
                    shape: vec![1],
                    data: vec![7.0],
                    trainable: false,
                },
            ],
        }
    }

    #[test]
    fn first_step_moves_by_lr() {
        // m = 0.1g, u = |g|, clr = lr/0.1 → Δ = lr·sign(g)
        let mut w = one_param(1.0);
        let mut opt = Adamax::new(1e-3);
        opt.step(&mut w, &vec![vec![4.0], vec![]]);
        assert!((w.tensors[0].data[0] - (1.0 - 1e-3)).abs() < 1e-7);
        assert_eq!(w.tensors[1].data[0], 7.0);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut w = one_param(3.0);
        let mut opt = Adamax::new(0.05);
        for _ in 0..2000 {
            let g = 2.0 * (w.tensors[0].data[0] - 1.0);
            opt.step(&mut w, &vec![vec![g], vec![]]);
        }
        assert!((w.tensors[0].data[0] - 1.0).abs() < 1e-2);
    }
}
