//! Bias-corrected adaptive-moment (Adam) updates.

use crate::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamParams<S> {
    pub step_size: S,
    pub beta1: S,
    pub beta2: S,
    pub eps: S,
}

impl<S: Scalar> AdamParams<S> {
    pub fn new(step_size: f64, betas: (f64, f64), eps: f64) -> Self {
        AdamParams { step_size: S::lit(step_size), beta1: S::lit(betas.0), beta2: S::lit(betas.1), eps: S::lit(eps) }
    }
}

/// First/second moment buffers and the step counter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<S> {
    pub m: Vec<S>,
    pub v: Vec<S>,
    pub t: u64,
}

impl<S: Scalar> AdamState<S> {
    pub fn new(len: usize) -> Self {
        AdamState { m: vec![S::zero(); len], v: vec![S::zero(); len], t: 0 }
    }

    /// Clears the moments of the listed coordinates (their meaning changed).
    pub fn reset(&mut self, indices: impl IntoIterator<Item = usize>) {
        for i in indices {
            self.m[i] = S::zero();
            self.v[i] = S::zero();
        }
    }
}

/// One Adam update of `params` in place.
pub fn adam_step<S: Scalar>(params: &mut [S], grad: &[S], state: &mut AdamState<S>, hp: &AdamParams<S>) {
    assert_eq!(params.len(), grad.len());
    assert_eq!(params.len(), state.m.len());
    state.t += 1;
    let one = S::one();
    let t = state.t as i32;
    let bc1 = one - hp.beta1.powi(t);
    let bc2 = one - hp.beta2.powi(t);
    for i in 0..params.len() {
        let g = grad[i];
        state.m[i] = hp.beta1 * state.m[i] + (one - hp.beta1) * g;
        state.v[i] = hp.beta2 * state.v[i] + (one - hp.beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] = params[i] - hp.step_size * m_hat / (v_hat.sqrt() + hp.eps);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = vec![0.3, -1.0];
        let mut st = AdamState::new(2);
        let hp = AdamParams::new(1e-2, (0.9, 0.999), 1e-8);
        for _ in 0..10 {
            adam_step(&mut p, &[0.0, 0.0], &mut st, &hp);
        }
        assert_eq!(p, vec![0.3, -1.0]);
    }

    #[test]
    fn constant_gradient_steps_by_step_size() {
        let mut p = vec![0.0f64, 0.0];
        let mut st = AdamState::new(2);
        let hp = AdamParams::new(1e-2, (0.9, 0.999), 1e-8);
        let mut prev = p.clone();
        for _ in 0..500 {
            adam_step(&mut p, &[3.0, -0.5], &mut st, &hp);
            let dx = p[0] - prev[0];
            let dy = p[1] - prev[1];
            assert!((dx + 1e-2).abs() < 1e-6 && (dy - 1e-2).abs() < 1e-6, "{dx} {dy}");
            prev = p.clone();
        }
    }

    #[test]
    fn quadratic_bowl_converges() {
        // f = sum_i c_i (x_i - x*_i)^2
        let target = [1.5, -0.7, 0.2];
        let curv = [1.0, 10.0, 0.1];
        let mut x = vec![0.0; 3];
        let mut st = AdamState::new(3);
        let hp = AdamParams::new(1e-2, (0.9, 0.999), 1e-8);
        let mut steps = 0;
        while steps < 5000 {
            let g: Vec<f64> = (0..3).map(|i| 2.0 * curv[i] * (x[i] - target[i])).collect();
            adam_step(&mut x, &g, &mut st, &hp);
            steps += 1;
            if (0..3).all(|i| (x[i] - target[i]).abs() < 1e-6) {
                break;
            }
        }
        assert!(steps < 5000, "did not converge: {x:?}");
    }
}
