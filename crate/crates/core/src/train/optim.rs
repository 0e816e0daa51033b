use serde::{Deserialize, Serialize};

use crate::tensor::Matrix;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    #[default]
    Adam,
}

/// First-order optimizer over a fixed list of parameter tensors.
#[derive(Clone, Debug)]
pub enum Optimizer {
    Sgd {
        lr: f64,
    },
    Adam {
        lr: f64,
        beta1: f64,
        beta2: f64,
        eps: f64,
        step: i32,
        m: Vec<Matrix>,
        v: Vec<Matrix>,
    },
}

impl Optimizer {
    pub fn sgd(lr: f64) -> Self {
        Optimizer::Sgd { lr }
    }

    pub fn adam(lr: f64, betas: (f64, f64), eps: f64, shapes: &[(usize, usize)]) -> Self {
        let zeros = || shapes.iter().map(|&(r, c)| Matrix::zeros(r, c)).collect();
        Optimizer::Adam {
            lr,
            beta1: betas.0,
            beta2: betas.1,
            eps,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    /// Applies one update in place. `params` and `grads` are index-aligned.
    pub fn step(&mut self, params: &mut [&mut Matrix], grads: &[Matrix]) {
        debug_assert_eq!(params.len(), grads.len());
        match self {
            Optimizer::Sgd { lr } => {
                for (p, g) in params.iter_mut().zip(grads) {
                    p.data_mut().iter_mut().zip(g.data()).for_each(|(w, d)| *w -= *lr * d);
                }
            }
            Optimizer::Adam {
                lr,
                beta1,
                beta2,
                eps,
                step,
                m,
                v,
            } => {
                *step += 1;
                let bc1 = 1.0 - beta1.powi(*step);
                let bc2 = 1.0 - beta2.powi(*step);
                for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
                    let (mk, vk) = (m[k].data_mut(), v[k].data_mut());
                    for (i, (w, &d)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
                        mk[i] = *beta1 * mk[i] + (1.0 - *beta1) * d;
                        vk[i] = *beta2 * vk[i] + (1.0 - *beta2) * d * d;
                        let m_hat = mk[i] / bc1;
                        let v_hat = vk[i] / bc2;
                        *w -= *lr * m_hat / (v_hat.sqrt() + *eps);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adam_zero_gradient_is_a_no_op() {
        let mut w = Matrix::from_vec(2, 2, vec![1.0, -2.0, 3.5, 0.25]);
        let before = w.clone();
        let mut opt = Optimizer::adam(1e-3, (0.9, 0.999), 1e-8, &[(2, 2)]);
        for _ in 0..5 {
            opt.step(&mut [&mut w], &[Matrix::zeros(2, 2)]);
        }
        assert_eq!(w, before);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        // Bias correction makes the first update lr * sign(g).
        let mut w = Matrix::from_vec(1, 3, vec![0.0, 0.0, 0.0]);
        let mut opt = Optimizer::adam(0.1, (0.9, 0.999), 1e-8, &[(1, 3)]);
        opt.step(&mut [&mut w], &[Matrix::from_vec(1, 3, vec![2.0, -0.5, 1e3])]);
        for (got, want) in w.data().iter().zip([-0.1, 0.1, -0.1]) {
            assert!((got - want).abs() < 1e-8);
        }
    }

    #[test]
    fn sgd_follows_gradient() {
        let mut w = Matrix::from_vec(1, 2, vec![1.0, 1.0]);
        Optimizer::sgd(0.5).step(&mut [&mut w], &[Matrix::from_vec(1, 2, vec![2.0, -2.0])]);
        assert_eq!(w.data(), &[0.0, 2.0]);
    }
}
