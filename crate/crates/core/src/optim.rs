//! Adam, in the form used by common variational-circuit toolkits: the
//! bias correction is folded into the step size and `epsilon` is added to
//! the uncorrected second-moment root.

use serde::{Deserialize, Serialize};

pub const DEFAULT_BETA1: f64 = 0.9;
pub const DEFAULT_BETA2: f64 = 0.99;
pub const DEFAULT_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    step_size: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    t: u64,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
}

impl Adam {
    pub fn new(step_size: f64, beta1: f64, beta2: f64, epsilon: f64, num_params: usize) -> Self {
        Self {
            step_size,
            beta1,
            beta2,
            epsilon,
            t: 0,
            first_moment: vec![0.0; num_params],
            second_moment: vec![0.0; num_params],
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    /// One descent step on `params` along `grad`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        debug_assert_eq!(params.len(), grad.len());
        self.t += 1;
        let t = self.t as i32;
        let scaled = self.step_size * (1.0 - self.beta2.powi(t)).sqrt() / (1.0 - self.beta1.powi(t));
        for (((x, &g), m), v) in params
            .iter_mut()
            .zip(grad)
            .zip(self.first_moment.iter_mut())
            .zip(self.second_moment.iter_mut())
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *x -= scaled * *m / (v.sqrt() + self.epsilon);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_step_size_times_sign() {
        // m1 = 0.1 g, v1 = 0.01 g^2; scaled = a * sqrt(0.01) / 0.1 = a
        let mut adam = Adam::new(0.5, DEFAULT_BETA1, DEFAULT_BETA2, DEFAULT_EPSILON, 3);
        let mut x = vec![1.0, 1.0, 1.0];
        adam.step(&mut x, &[2.0, -3.0, 0.0]);
        assert!((x[0] - 0.5).abs() < 1e-6);
        assert!((x[1] - 1.5).abs() < 1e-6);
        assert_eq!(x[2], 1.0);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut adam = Adam::new(0.1, DEFAULT_BETA1, DEFAULT_BETA2, DEFAULT_EPSILON, 2);
        let mut x = vec![3.0, -2.0];
        for _ in 0..2000 {
            let g = vec![2.0 * (x[0] - 1.0), 4.0 * (x[1] + 0.5)];
            adam.step(&mut x, &g);
        }
        assert!((x[0] - 1.0).abs() < 1e-3 && (x[1] + 0.5).abs() < 1e-3);
        assert_eq!(adam.steps_taken(), 2000);
    }
}
