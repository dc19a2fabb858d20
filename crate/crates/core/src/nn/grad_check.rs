use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::mlp::{Activation, Gradients, Mlp};

/// Fixed, non-symmetric weighting of the outputs so the checked scalar is
/// `L = Σ output ⊙ W`.
fn output_weights(rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |(i, j)| {
        1.0 + 0.5 * ((7 * i + 3 * j + 1) as f64).sin()
    })
}

fn objective(net: &Mlp, input: &Array2<f64>, weights: &Array2<f64>) -> f64 {
    let y = net.predict(input).expect("grad check input already validated");
    (&y * weights).sum()
}

fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Largest relative disagreement between backprop and central differences,
/// over every weight, bias, and input entry.
pub fn grad_check(net: &Mlp, input: &Array2<f64>, eps: f64) -> f64 {
    check(net, input, eps, None)
}

/// Same as [`grad_check`] but with the analytic gradient of `flip_layer`
/// sign-flipped, to confirm the checker notices a broken backward pass.
pub fn grad_check_with_fault(net: &Mlp, input: &Array2<f64>, eps: f64, flip_layer: usize) -> f64 {
    check(net, input, eps, Some(flip_layer))
}

fn check(net: &Mlp, input: &Array2<f64>, eps: f64, flip_layer: Option<usize>) -> f64 {
    assert!(eps > 0.0, "finite-difference step must be positive");
    let (out, cache) = net.forward(input).expect("grad check input must match the network");
    let w = output_weights(out.nrows(), out.ncols());
    let (mut grads, input_grad): (Gradients, _) = net.backward(&cache, &w).unwrap();
    if let Some(l) = flip_layer {
        grads.weights[l].mapv_inplace(|g| -g);
        grads.biases[l].mapv_inplace(|g| -g);
    }

    let mut worst = 0.0f64;
    let mut probe = net.clone();
    for l in 0..net.num_layers() {
        let (rows, cols) = net.weights()[l].dim();
        for i in 0..rows {
            for j in 0..cols {
                let orig = probe.weights()[l][[i, j]];
                probe.weights_mut()[l][[i, j]] = orig + eps;
                let plus = objective(&probe, input, &w);
                probe.weights_mut()[l][[i, j]] = orig - eps;
                let minus = objective(&probe, input, &w);
                probe.weights_mut()[l][[i, j]] = orig;
                let numeric = (plus - minus) / (2.0 * eps);
                worst = worst.max(rel_error(grads.weights[l][[i, j]], numeric));
            }
        }
        for i in 0..net.biases()[l].len() {
            let orig = probe.biases()[l][i];
            probe.biases_mut()[l][i] = orig + eps;
            let plus = objective(&probe, input, &w);
            probe.biases_mut()[l][i] = orig - eps;
            let minus = objective(&probe, input, &w);
            probe.biases_mut()[l][i] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            worst = worst.max(rel_error(grads.biases[l][i], numeric));
        }
    }

    let mut x = input.clone();
    for r in 0..x.nrows() {
        for c in 0..x.ncols() {
            let orig = x[[r, c]];
            x[[r, c]] = orig + eps;
            let plus = objective(net, &x, &w);
            x[[r, c]] = orig - eps;
            let minus = objective(net, &x, &w);
            x[[r, c]] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            worst = worst.max(rel_error(input_grad[[r, c]], numeric));
        }
    }
    worst
}

/// Draw a random network of at most `(16, 16, 16, 4)` and a random input batch.
pub(crate) fn random_case(rng: &mut impl Rng) -> (Mlp, Array2<f64>) {
    let hidden = rng.random_range(0..=2);
    let mut sizes = vec![rng.random_range(1..=16)];
    for _ in 0..hidden {
        sizes.push(rng.random_range(1..=16));
    }
    sizes.push(rng.random_range(1..=4));
    let act = if rng.random_bool(0.5) {
        Activation::Tanh
    } else {
        Activation::Identity
    };
    let net = Mlp::new(&sizes, act, rng.random()).unwrap();
    let batch = rng.random_range(1..=4);
    let input = Array2::from_shape_simple_fn((batch, sizes[0]), || rng.random_range(-1.0..1.0));
    (net, input)
}

/// Run [`grad_check`] on `count` random networks and return the worst error.
///
/// With `corrupt`, every check flips the sign of the last layer's gradient.
pub fn random_grad_check_suite(seed: u64, count: usize, eps: f64, corrupt: bool) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let (net, input) = random_case(&mut rng);
            if corrupt {
                grad_check_with_fault(&net, &input, eps, net.num_layers() - 1)
            } else {
                grad_check(&net, &input, eps)
            }
        })
        .fold(0.0, f64::max)
}
