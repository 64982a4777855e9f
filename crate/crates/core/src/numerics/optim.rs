use super::{Scalar, Tensor};
use crate::{Error, Result};

/// Velocity buffers plus the SGD hyperparameters.
#[derive(Debug, Clone)]
pub struct OptimizerState<T = f32> {
    pub momentum: T,
    pub lr: T,
    velocities: Vec<Vec<T>>,
}

impl<T: Scalar> OptimizerState<T> {
    /// One zeroed velocity buffer per parameter tensor.
    pub fn new<'a>(params: impl IntoIterator<Item = &'a Tensor<T>>, momentum: T, lr: T) -> Self {
        Self {
            momentum,
            lr,
            velocities: params
                .into_iter()
                .map(|p| vec![T::zero(); p.len()])
                .collect(),
        }
    }

    pub fn velocities(&self) -> &[Vec<T>] {
        &self.velocities
    }
}

/// Nesterov momentum update, applied per parameter:
///
/// ```text
/// v     <- mu * v + g
/// theta <- theta - lr * (g + mu * v)
/// ```
pub fn sgd_nesterov_step<T: Scalar>(
    params: &mut [&mut Tensor<T>],
    grads: &[&Tensor<T>],
    state: &mut OptimizerState<T>,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.velocities.len() {
        return Err(Error::shape(format!(
            "{} parameters, {} gradients, {} velocity buffers",
            params.len(),
            grads.len(),
            state.velocities.len()
        )));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.dims() != g.dims() || state.velocities[i].len() != p.len() {
            return Err(Error::shape(format!(
                "parameter {i} has dims {:?}, gradient {:?}",
                p.dims(),
                g.dims()
            )));
        }
    }
    let (mu, lr) = (state.momentum, state.lr);
    for ((p, g), v) in params
        .iter_mut()
        .zip(grads)
        .zip(state.velocities.iter_mut())
    {
        for ((theta, &gi), vi) in p.data_mut().iter_mut().zip(g.data()).zip(v.iter_mut()) {
            *vi = mu * *vi + gi;
            *theta = *theta - lr * (gi + mu * *vi);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Tensor<f64> {
        Tensor::from_vec([1, 1, 1, 1], vec![v]).unwrap()
    }

    #[test]
    fn single_step_hand_value() {
        let mut theta = scalar(1.0);
        let g = scalar(1.0);
        let mut st = OptimizerState::new([&theta], 0.99, 0.01);
        sgd_nesterov_step(&mut [&mut theta], &[&g], &mut st).unwrap();
        assert_eq!(st.velocities()[0][0], 1.0);
        assert!((theta.data()[0] - 0.9801).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut theta = Tensor::<f64>::from_fn([2, 1, 2, 2], |[a, _, b, c]| (a + b + c) as f64);
        let before = theta.clone();
        let g = Tensor::zeros(theta.dims());
        let mut st = OptimizerState::new([&theta], 0.99, 0.01);
        sgd_nesterov_step(&mut [&mut theta], &[&g], &mut st).unwrap();
        assert_eq!(theta, before);
    }

    #[test]
    fn zero_lr_still_updates_velocity() {
        let mut theta = scalar(3.0);
        let g = scalar(-2.0);
        let mut st = OptimizerState::new([&theta], 0.9, 0.0);
        sgd_nesterov_step(&mut [&mut theta], &[&g], &mut st).unwrap();
        sgd_nesterov_step(&mut [&mut theta], &[&g], &mut st).unwrap();
        assert_eq!(theta.data()[0], 3.0);
        assert!((st.velocities()[0][0] - (-2.0 * 0.9 - 2.0)).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut theta = Tensor::<f64>::zeros([1, 1, 2, 2]);
        let g = Tensor::<f64>::zeros([1, 1, 1, 4]);
        let mut st = OptimizerState::new([&theta], 0.99, 0.01);
        assert!(sgd_nesterov_step(&mut [&mut theta], &[&g], &mut st).is_err());
    }
}
