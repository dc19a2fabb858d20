use ndarray::Zip;

use super::mlp::{Gradients, Mlp};
use crate::error::{Error, Result};

/// A first-order update rule. Gradients are for a loss to be minimised.
pub trait Optimizer {
    fn step(&mut self, net: &mut Mlp, grads: &Gradients) -> Result<()>;

    fn learning_rate(&self) -> f64;
}

fn validate(net: &Mlp, grads: &Gradients) -> Result<()> {
    if !grads.matches(net) {
        return Err(Error::ShapeMismatch(
            "gradient shapes do not match the network".into(),
        ));
    }
    if !grads.is_finite() {
        return Err(Error::NonFinite("gradients".into()));
    }
    Ok(())
}

/// Plain gradient descent, `θ ← θ − lr·g`.
#[derive(Debug, Clone)]
pub struct Sgd {
    pub lr: f64,
}

impl Optimizer for Sgd {
    fn step(&mut self, net: &mut Mlp, grads: &Gradients) -> Result<()> {
        validate(net, grads)?;
        let lr = self.lr;
        for (w, g) in net.weights_mut().iter_mut().zip(&grads.weights) {
            w.scaled_add(-lr, g);
        }
        for (b, g) in net.biases_mut().iter_mut().zip(&grads.biases) {
            b.scaled_add(-lr, g);
        }
        Ok(())
    }

    fn learning_rate(&self) -> f64 {
        self.lr
    }
}

/// Bias-corrected adaptive moment estimation.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Gradients,
    v: Gradients,
}

impl Adam {
    pub fn new(net: &Mlp, lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: Gradients::zeros_like(net),
            v: Gradients::zeros_like(net),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }
}

impl Optimizer for Adam {
    fn step(&mut self, net: &mut Mlp, grads: &Gradients) -> Result<()> {
        validate(net, grads)?;
        if !self.m.matches(net) {
            return Err(Error::ShapeMismatch(
                "optimizer state belongs to a different network".into(),
            ));
        }
        self.step += 1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let t = self.step as i32;
        let alpha = self.lr * (1.0 - b2.powi(t)).sqrt() / (1.0 - b1.powi(t));
        // Equivalent to lr · m̂ / (√v̂ + eps) with the corrections folded in.
        let eps_hat = eps * (1.0 - b2.powi(t)).sqrt();

        let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= alpha * *m / (v.sqrt() + eps_hat);
        };

        for ((w, g), (m, v)) in net
            .weights_mut()
            .iter_mut()
            .zip(&grads.weights)
            .zip(self.m.weights.iter_mut().zip(self.v.weights.iter_mut()))
        {
            Zip::from(w)
                .and(m)
                .and(v)
                .and(g)
                .for_each(|p, m, v, &g| update(p, m, v, g));
        }
        for ((b, g), (m, v)) in net
            .biases_mut()
            .iter_mut()
            .zip(&grads.biases)
            .zip(self.m.biases.iter_mut().zip(self.v.biases.iter_mut()))
        {
            Zip::from(b)
                .and(m)
                .and(v)
                .and(g)
                .for_each(|p, m, v, &g| update(p, m, v, g));
        }
        Ok(())
    }

    fn learning_rate(&self) -> f64 {
        self.lr
    }
}
