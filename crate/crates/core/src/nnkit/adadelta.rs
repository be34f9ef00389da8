use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdadeltaParams {
    pub rho: f64,
    pub epsilon: f64,
}

impl Default for AdadeltaParams {
    fn default() -> Self {
        Self {
            rho: 0.95,
            epsilon: 1e-6,
        }
    }
}

/// Running averages of squared gradients and squared updates.
#[derive(Clone, Debug)]
pub struct AdadeltaState {
    pub rho: f64,
    pub epsilon: f64,
    pub eg2: Vec<Tensor>,
    pub edx2: Vec<Tensor>,
}

impl AdadeltaState {
    pub fn new(params: &[Tensor], hyper: AdadeltaParams) -> Self {
        let zeros = || {
            params
                .iter()
                .map(|p| Tensor::zeros(p.shape()))
                .collect::<Vec<_>>()
        };
        Self {
            rho: hyper.rho,
            epsilon: hyper.epsilon,
            eg2: zeros(),
            edx2: zeros(),
        }
    }

    /// Applies one update in place and returns the largest update magnitude.
    pub fn step(&mut self, params: &mut [Tensor], grads: &[Tensor]) -> Result<f64> {
        let (rho, eps) = (self.rho, self.epsilon);
        let mut max_delta: f64 = 0.0;
        for (((p, g), eg2), edx2) in params
            .iter_mut()
            .zip(grads)
            .zip(self.eg2.iter_mut())
            .zip(self.edx2.iter_mut())
        {
            g.expect_shape("adadelta_step", p.shape())?;
            let (p, g) = (p.data_mut(), g.data());
            let (eg2, edx2) = (eg2.data_mut(), edx2.data_mut());
            for i in 0..p.len() {
                eg2[i] = rho * eg2[i] + (1.0 - rho) * g[i] * g[i];
                let delta = -((edx2[i] + eps).sqrt() / (eg2[i] + eps).sqrt()) * g[i];
                edx2[i] = rho * edx2[i] + (1.0 - rho) * delta * delta;
                p[i] += delta;
                max_delta = max_delta.max(delta.abs());
            }
        }
        Ok(max_delta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_no_update() {
        let mut params = vec![Tensor::filled(&[3], 0.5)];
        let mut st = AdadeltaState::new(&params, AdadeltaParams::default());
        let max = st.step(&mut params, &[Tensor::zeros(&[3])]).unwrap();
        assert_eq!(max, 0.0);
        assert!(params[0].data().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn first_step_matches_hand_evaluation() {
        let mut params = vec![Tensor::zeros(&[1])];
        let mut st = AdadeltaState::new(&params, AdadeltaParams::default());
        st.step(&mut params, &[Tensor::filled(&[1], 1.0)]).unwrap();
        let expected = -(1e-6f64).sqrt() / (0.05f64 + 1e-6).sqrt();
        assert!((params[0].data()[0] - expected).abs() < 1e-15);
        assert!((expected + 4.472e-3).abs() < 1e-6);
    }

    #[test]
    fn update_opposes_gradient() {
        let mut params = vec![Tensor::zeros(&[4])];
        let mut st = AdadeltaState::new(&params, AdadeltaParams::default());
        let g = Tensor::new(&[4], vec![2.0, -0.1, 1e-4, -30.0]).unwrap();
        for _ in 0..5 {
            let before = params[0].clone();
            st.step(&mut params, std::slice::from_ref(&g)).unwrap();
            for i in 0..4 {
                let moved = params[0].data()[i] - before.data()[i];
                assert!(moved * g.data()[i] < 0.0);
            }
        }
        assert!(st.eg2[0]
            .data()
            .iter()
            .chain(st.edx2[0].data())
            .all(|&v| v >= 0.0));
    }
}
