//! SGD and Adam parameter updates, plus the Huber loss used for TD errors.

use crate::error::{Error, Result};

use super::{Gradients, Mlp};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptAlgo {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl OptAlgo {
    pub fn adam_default() -> OptAlgo {
        OptAlgo::Adam { beta1: ADAM_BETA1, beta2: ADAM_BETA2, eps: ADAM_EPS }
    }
}

/// Optimizer state bound to one network's shapes. Adam keeps first/second
/// moment estimates per parameter; SGD keeps nothing but the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub(super) algo: OptAlgo,
    pub(super) lr: f64,
    pub(super) step: u64,
    pub(super) m_w: Vec<Vec<f64>>,
    pub(super) v_w: Vec<Vec<f64>>,
    pub(super) m_b: Vec<Vec<f64>>,
    pub(super) v_b: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(algo: OptAlgo, lr: f64, net: &Mlp) -> Result<OptimizerState> {
        if !(lr.is_finite() && lr > 0.0) {
            return Err(Error::Config(format!("learning rate must be positive, got {lr}")));
        }
        if let OptAlgo::Adam { beta1, beta2, eps } = algo {
            if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || eps <= 0.0 {
                return Err(Error::Config("adam: betas must be in [0,1) and eps positive".into()));
            }
        }
        let zeros_w = || net.weights.iter().map(|w| vec![0.0; w.len()]).collect::<Vec<_>>();
        let zeros_b = || net.biases.iter().map(|b| vec![0.0; b.len()]).collect::<Vec<_>>();
        let (m_w, v_w, m_b, v_b) = match algo {
            OptAlgo::Sgd => (Vec::new(), Vec::new(), Vec::new(), Vec::new()),
            OptAlgo::Adam { .. } => (zeros_w(), zeros_w(), zeros_b(), zeros_b()),
        };
        Ok(OptimizerState { algo, lr, step: 0, m_w, v_w, m_b, v_b })
    }

    pub fn sgd(lr: f64, net: &Mlp) -> Result<OptimizerState> {
        Self::new(OptAlgo::Sgd, lr, net)
    }

    pub fn adam(lr: f64, net: &Mlp) -> Result<OptimizerState> {
        Self::new(OptAlgo::adam_default(), lr, net)
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn learning_rate(&self) -> f64 {
        self.lr
    }

    pub fn algo(&self) -> OptAlgo {
        self.algo
    }

    fn shape_matches(&self, net: &Mlp) -> bool {
        match self.algo {
            OptAlgo::Sgd => true,
            OptAlgo::Adam { .. } => {
                self.m_w.len() == net.weights.len()
                    && self.m_w.iter().zip(&net.weights).all(|(a, b)| a.len() == b.len())
                    && self.m_b.iter().zip(&net.biases).all(|(a, b)| a.len() == b.len())
            }
        }
    }
}

/// Applies one optimizer step of `grads` to `net`. A non-finite gradient
/// aborts before any state (parameters, moments, counter) changes.
pub fn apply_update(net: &mut Mlp, grads: &Gradients, opt: &mut OptimizerState) -> Result<()> {
    if !grads.shape_matches(net) {
        return Err(Error::State("apply_update: gradient shapes do not match the network".into()));
    }
    if !opt.shape_matches(net) {
        return Err(Error::State("apply_update: optimizer state shaped for a different network".into()));
    }
    if !grads.is_finite() {
        return Err(Error::Numeric("apply_update: non-finite gradient".into()));
    }
    opt.step += 1;
    match opt.algo {
        OptAlgo::Sgd => {
            let lr = opt.lr;
            for l in 0..net.weights.len() {
                sgd_slice(&mut net.weights[l], &grads.weights[l], lr);
                sgd_slice(&mut net.biases[l], &grads.biases[l], lr);
            }
        }
        OptAlgo::Adam { beta1, beta2, eps } => {
            let t = opt.step;
            let bc1 = 1.0 - beta1.powi(t as i32);
            let bc2 = 1.0 - beta2.powi(t as i32);
            for l in 0..net.weights.len() {
                adam_slice(
                    &mut net.weights[l],
                    &grads.weights[l],
                    &mut opt.m_w[l],
                    &mut opt.v_w[l],
                    (opt.lr, beta1, beta2, eps, bc1, bc2),
                );
                adam_slice(
                    &mut net.biases[l],
                    &grads.biases[l],
                    &mut opt.m_b[l],
                    &mut opt.v_b[l],
                    (opt.lr, beta1, beta2, eps, bc1, bc2),
                );
            }
        }
    }
    Ok(())
}

fn sgd_slice(theta: &mut [f64], g: &[f64], lr: f64) {
    for (t, gi) in theta.iter_mut().zip(g) {
        *t -= lr * gi;
    }
}

fn adam_slice(
    theta: &mut [f64],
    g: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    (lr, beta1, beta2, eps, bc1, bc2): (f64, f64, f64, f64, f64, f64),
) {
    for i in 0..theta.len() {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        theta[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

/// Huber loss with knee `delta`: quadratic inside, linear outside. Returns
/// (loss, dloss/derror).
pub fn huber(delta: f64, error: f64) -> (f64, f64) {
    debug_assert!(delta > 0.0);
    if error.abs() <= delta {
        (0.5 * error * error, error)
    } else {
        (delta * (error.abs() - 0.5 * delta), delta * error.signum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Scratch;

    fn one_param_net(w: f64) -> Mlp {
        let mut net = Mlp::zeros(&[1, 1]).unwrap();
        net.set_weight(0, 0, 0, w);
        net
    }

    fn grad_of(net: &Mlp, x: f64, upstream: f64) -> Gradients {
        net.backward(&[x], &[upstream]).unwrap()
    }

    #[test]
    fn sgd_step_arithmetic() {
        // theta = 1, g = 2, lr = 0.5 -> theta = 0
        let mut net = one_param_net(1.0);
        let mut opt = OptimizerState::sgd(0.5, &net).unwrap();
        let g = grad_of(&net, 2.0, 1.0); // dL/dw = x = 2
        apply_update(&mut net, &g, &mut opt).unwrap();
        assert_eq!(net.weight(0, 0, 0), 0.0);
        assert_eq!(opt.step_count(), 1);
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut net = Mlp::init(&[3, 4, 2], 5).unwrap();
        let snapshot = net.clone();
        let g = Gradients::zeros_like(&net);
        let mut opt = OptimizerState::sgd(0.1, &net).unwrap();
        apply_update(&mut net, &g, &mut opt).unwrap();
        assert_eq!(net, snapshot);

        // Adam with zero gradients: m, v stay zero so the step is 0/(0+eps)
        let mut opt = OptimizerState::adam(0.1, &net).unwrap();
        apply_update(&mut net, &g, &mut opt).unwrap();
        assert_eq!(net, snapshot);
    }

    #[test]
    fn non_finite_gradient_aborts_without_changes() {
        let mut net = one_param_net(1.0);
        let mut opt = OptimizerState::adam(0.1, &net).unwrap();
        let mut g = Gradients::zeros_like(&net);
        g.weights[0][0] = f64::NAN;
        let err = apply_update(&mut net, &g, &mut opt);
        assert!(matches!(err, Err(Error::Numeric(_))));
        assert_eq!(net.weight(0, 0, 0), 1.0);
        assert_eq!(opt.step_count(), 0);
        assert!(opt.m_w[0][0] == 0.0 && opt.v_w[0][0] == 0.0);
    }

    #[test]
    fn adam_first_step_matches_hand_arithmetic() {
        // w=1, g=0.5, lr=0.1: m_hat=0.5, v_hat=0.25, step = lr*0.5/(0.5+eps)
        let mut net = one_param_net(1.0);
        let mut opt = OptimizerState::adam(0.1, &net).unwrap();
        let g = grad_of(&net, 0.5, 1.0);
        apply_update(&mut net, &g, &mut opt).unwrap();
        assert!((net.weight(0, 0, 0) - 0.9).abs() < 1e-7);
    }

    #[test]
    fn sgd_step_decreases_a_smooth_squared_loss() {
        let net = Mlp::init(&[3, 8, 4], 13).unwrap();
        let x = [0.4, -0.7, 0.9];
        let j = 1;
        let target = {
            let y = net.forward(&x).unwrap();
            y[j] + 2.0
        };
        let loss_of = |n: &Mlp| {
            let y = n.forward(&x).unwrap();
            (y[j] - target) * (y[j] - target)
        };

        let mut net = net;
        let before = loss_of(&net);
        let mut scratch = Scratch::for_net(&net);
        net.forward_scratch(&x, &mut scratch).unwrap();
        let mut upstream = vec![0.0; net.out_dim()];
        upstream[j] = 2.0 * (scratch.output()[j] - target);
        let mut grads = Gradients::zeros_like(&net);
        net.backward_into(&mut scratch, &upstream, &mut grads).unwrap();
        let mut opt = OptimizerState::sgd(1e-3, &net).unwrap();
        apply_update(&mut net, &grads, &mut opt).unwrap();
        let after = loss_of(&net);
        assert!(after < before, "loss did not decrease: {before} -> {after}");
    }

    #[test]
    fn huber_matches_frozen_values() {
        let cases = [
            (0.5, 0.125, 0.5),
            (2.0, 1.5, 1.0),
            (-3.0, 2.5, -1.0),
            (1.0, 0.5, 1.0), // knee itself is still quadratic
            (0.0, 0.0, 0.0),
        ];
        for (e, want_loss, want_grad) in cases {
            let (loss, grad) = huber(1.0, e);
            assert!((loss - want_loss).abs() < 1e-12, "loss({e})");
            assert!((grad - want_grad).abs() < 1e-12, "grad({e})");
        }
    }

    #[test]
    fn bad_hyperparameters_are_config_errors() {
        let net = one_param_net(0.0);
        assert!(OptimizerState::sgd(0.0, &net).is_err());
        assert!(OptimizerState::sgd(f64::NAN, &net).is_err());
        assert!(OptimizerState::new(
            OptAlgo::Adam { beta1: 1.0, beta2: 0.999, eps: 1e-8 },
            0.1,
            &net
        )
        .is_err());
    }

    #[test]
    fn optimizer_state_rejects_foreign_network() {
        let net_a = Mlp::init(&[3, 4, 2], 1).unwrap();
        let mut net_b = Mlp::init(&[3, 5, 2], 1).unwrap();
        let mut opt = OptimizerState::adam(0.1, &net_a).unwrap();
        let g = Gradients::zeros_like(&net_b);
        assert!(matches!(
            apply_update(&mut net_b, &g, &mut opt),
            Err(Error::State(_))
        ));
    }
}
