//! Multilayer perceptron regressor: tanh hidden layers, identity output.
//!
//! The objective is `(1/2n)·Σ(ŷ − y)² + (α/2n)·Σ‖W‖²` (biases unpenalised).
//! Two full-batch solvers are available: gradient descent with momentum and
//! step backoff (the default), and L-BFGS.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataio::FeatureMatrix;
use crate::rng::rng_from_seed;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Solver {
    /// Heavy-ball descent. A step that raises the loss is rejected, the
    /// velocity cleared and the rate halved; accepted steps grow it by 5%.
    Momentum { learning_rate: f64, momentum: f64 },
    Lbfgs { memory: usize },
}

impl Default for Solver {
    fn default() -> Self {
        Solver::Momentum { learning_rate: 0.1, momentum: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub hidden: Vec<usize>,
    pub alpha: f64,
    pub solver: Solver,
    pub max_iter: usize,
    /// Stop once an accepted step improves the loss by less than this.
    pub tol: f64,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self { hidden: vec![10], alpha: 0.0001, solver: Solver::default(), max_iter: 1000, tol: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub n_in: usize,
    pub n_out: usize,
    /// Row-major `n_out × n_in`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub layers: Vec<Layer>,
    pub iterations: usize,
    /// Training objective after each accepted step; entry 0 is the initial loss.
    pub loss_curve: Vec<f64>,
}

impl MlpModel {
    /// Glorot-uniform weights, zero hidden biases, output bias at `output_bias`.
    pub fn init(sizes: &[usize], output_bias: f64, seed: u64) -> Result<Self> {
        if sizes.len() < 2 || sizes.iter().any(|&s| s < 1) {
            return Err(Error::InvalidParameter(format!("layer sizes {sizes:?} must all be at least 1")));
        }
        let mut rng = rng_from_seed(seed);
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(k, w)| {
                let (n_in, n_out) = (w[0], w[1]);
                let bound = (6.0 / (n_in + n_out) as f64).sqrt();
                let weights = (0..n_in * n_out).map(|_| rng.random_range(-bound..bound)).collect();
                let b = if k == sizes.len() - 2 { output_bias } else { 0.0 };
                Layer { n_in, n_out, weights, bias: vec![b; n_out] }
            })
            .collect();
        Ok(Self { layers, iterations: 0, loss_curve: Vec::new() })
    }

    pub fn fit(x: &FeatureMatrix, y: &[f64], params: &MlpParams, seed: u64) -> Result<Self> {
        if params.hidden.is_empty() || params.hidden.iter().any(|&u| u < 1) {
            return Err(Error::InvalidParameter(format!("hidden units {:?} must all be at least 1", params.hidden)));
        }
        if !(params.alpha >= 0.0) {
            return Err(Error::InvalidParameter("alpha must be non-negative".into()));
        }
        if x.n_rows() == 0 || y.len() != x.n_rows() {
            return Err(Error::InsufficientData("MLP needs matching non-empty X and y".into()));
        }
        let mut sizes = vec![x.n_cols()];
        sizes.extend(&params.hidden);
        sizes.push(1);
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let mut model = Self::init(&sizes, mean, seed)?;
        let mut theta = model.params_flat();
        let f = |th: &[f64]| model.with_params(th).loss_and_gradient(x, y, params.alpha);
        let (theta_out, curve, iters) = match params.solver {
            Solver::Momentum { learning_rate, momentum } => {
                momentum_descent(&f, &mut theta, learning_rate, momentum, params.max_iter, params.tol)
            }
            Solver::Lbfgs { memory } => lbfgs(&f, &mut theta, memory.max(1), params.max_iter, params.tol),
        };
        model.set_params_flat(&theta_out);
        model.loss_curve = curve;
        model.iterations = iters;
        Ok(model)
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Parameters flattened layer by layer: weights then biases.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            v.extend(&l.weights);
            v.extend(&l.bias);
        }
        v
    }

    pub fn set_params_flat(&mut self, theta: &[f64]) {
        let mut k = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&theta[k..k + nw]);
            k += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&theta[k..k + nb]);
            k += nb;
        }
    }

    fn with_params(&self, theta: &[f64]) -> Self {
        let mut m = Self { layers: self.layers.clone(), iterations: 0, loss_curve: Vec::new() };
        m.set_params_flat(theta);
        m
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut a = row.to_vec();
        let last = self.layers.len() - 1;
        for (k, l) in self.layers.iter().enumerate() {
            let mut z: Vec<f64> = (0..l.n_out)
                .map(|o| l.bias[o] + dot(&l.weights[o * l.n_in..(o + 1) * l.n_in], &a))
                .collect();
            if k != last {
                z.iter_mut().for_each(|v| *v = v.tanh());
            }
            a = z;
        }
        a[0]
    }

    pub fn predict(&self, x: &FeatureMatrix) -> Vec<f64> {
        x.rows().map(|r| self.predict_row(r)).collect()
    }

    /// Objective and its gradient with respect to [`MlpModel::params_flat`].
    pub fn loss_and_gradient(&self, x: &FeatureMatrix, y: &[f64], alpha: f64) -> (f64, Vec<f64>) {
        let n = x.n_rows() as f64;
        let nl = self.layers.len();
        let mut grads: Vec<(Vec<f64>, Vec<f64>)> =
            self.layers.iter().map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.bias.len()])).collect();
        let mut sse = 0.0;
        let mut acts: Vec<Vec<f64>> = vec![Vec::new(); nl + 1];
        for (row, &target) in x.rows().zip(y) {
            acts[0].clear();
            acts[0].extend_from_slice(row);
            for (k, l) in self.layers.iter().enumerate() {
                let (prev, next) = acts.split_at_mut(k + 1);
                let a = &prev[k];
                let out = &mut next[0];
                out.clear();
                for o in 0..l.n_out {
                    let z = l.bias[o] + dot(&l.weights[o * l.n_in..(o + 1) * l.n_in], a);
                    out.push(if k + 1 < nl { z.tanh() } else { z });
                }
            }
            let err = acts[nl][0] - target;
            sse += err * err;
            let mut delta = vec![err];
            for k in (0..nl).rev() {
                let l = &self.layers[k];
                let a = &acts[k];
                let (gw, gb) = &mut grads[k];
                for o in 0..l.n_out {
                    gb[o] += delta[o];
                    let d = delta[o];
                    for (g, av) in gw[o * l.n_in..(o + 1) * l.n_in].iter_mut().zip(a) {
                        *g += d * av;
                    }
                }
                if k > 0 {
                    let mut next = vec![0.0; l.n_in];
                    for o in 0..l.n_out {
                        let d = delta[o];
                        for (nv, w) in next.iter_mut().zip(&l.weights[o * l.n_in..(o + 1) * l.n_in]) {
                            *nv += d * w;
                        }
                    }
                    for (nv, av) in next.iter_mut().zip(a) {
                        *nv *= 1.0 - av * av;
                    }
                    delta = next;
                }
            }
        }
        let mut penalty = 0.0;
        let mut g = Vec::with_capacity(self.n_params());
        for (l, (gw, gb)) in self.layers.iter().zip(grads) {
            penalty += l.weights.iter().map(|w| w * w).sum::<f64>();
            g.extend(gw.iter().zip(&l.weights).map(|(gv, w)| (gv + alpha * w) / n));
            g.extend(gb.iter().map(|v| v / n));
        }
        (sse / (2.0 * n) + alpha * penalty / (2.0 * n), g)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

type Objective<'a> = dyn Fn(&[f64]) -> (f64, Vec<f64>) + 'a;

fn momentum_descent(
    f: &Objective<'_>,
    theta: &mut [f64],
    mut lr: f64,
    mu: f64,
    max_iter: usize,
    tol: f64,
) -> (Vec<f64>, Vec<f64>, usize) {
    let (mut loss, mut grad) = f(theta);
    let mut curve = vec![loss];
    let mut velocity = vec![0.0; theta.len()];
    let mut trial = theta.to_vec();
    let mut iters = 0;
    while iters < max_iter && lr > 1e-14 {
        iters += 1;
        for ((v, g), (t, th)) in velocity.iter_mut().zip(&grad).zip(trial.iter_mut().zip(theta.iter())) {
            *v = mu * *v - lr * g;
            *t = th + *v;
        }
        let (l_new, g_new) = f(&trial);
        if l_new.is_finite() && l_new <= loss {
            let improvement = loss - l_new;
            theta.copy_from_slice(&trial);
            loss = l_new;
            grad = g_new;
            curve.push(loss);
            lr *= 1.05;
            if improvement < tol {
                break;
            }
        } else {
            velocity.iter_mut().for_each(|v| *v = 0.0);
            lr *= 0.5;
        }
    }
    (theta.to_vec(), curve, iters)
}

fn lbfgs(f: &Objective<'_>, theta: &mut [f64], memory: usize, max_iter: usize, tol: f64) -> (Vec<f64>, Vec<f64>, usize) {
    let (mut loss, mut grad) = f(theta);
    let mut curve = vec![loss];
    let mut hist_s: Vec<Vec<f64>> = Vec::new();
    let mut hist_y: Vec<Vec<f64>> = Vec::new();
    let mut iters = 0;
    while iters < max_iter {
        iters += 1;
        // Two-loop recursion for the search direction.
        let mut q = grad.clone();
        let mut alphas = Vec::with_capacity(hist_s.len());
        for (s, y) in hist_s.iter().zip(&hist_y).rev() {
            let rho = 1.0 / dot(y, s);
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qv, yv)| *qv -= a * yv);
            alphas.push((a, rho));
        }
        let gamma = match (hist_s.last(), hist_y.last()) {
            (Some(s), Some(y)) => dot(s, y) / dot(y, y),
            _ => 1.0 / dot(&grad, &grad).sqrt().max(1.0),
        };
        q.iter_mut().for_each(|v| *v *= gamma);
        for ((s, y), (a, rho)) in hist_s.iter().zip(&hist_y).zip(alphas.into_iter().rev()) {
            let b = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qv, sv)| *qv += (a - b) * sv);
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&grad, &dir);
        if !(slope < 0.0) {
            hist_s.clear();
            hist_y.clear();
            dir = grad.iter().map(|g| -g).collect();
            slope = -dot(&grad, &grad);
        }
        // Backtracking line search on the Armijo condition.
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<f64> = theta.iter().zip(&dir).map(|(t, d)| t + step * d).collect();
            let (l_new, g_new) = f(&trial);
            if l_new.is_finite() && l_new <= loss + 1e-4 * step * slope {
                accepted = Some((trial, l_new, g_new));
                break;
            }
            step *= 0.5;
        }
        let Some((trial, l_new, g_new)) = accepted else { break };
        let s: Vec<f64> = trial.iter().zip(theta.iter()).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let improvement = loss - l_new;
        theta.copy_from_slice(&trial);
        loss = l_new;
        grad = g_new;
        curve.push(loss);
        if dot(&s, &y) > 1e-12 {
            if hist_s.len() == memory {
                hist_s.remove(0);
                hist_y.remove(0);
            }
            hist_s.push(s);
            hist_y.push(y);
        }
        if improvement < tol * loss.abs().max(1.0) {
            break;
        }
    }
    (theta.to_vec(), curve, iters)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_network_predicts_zero() {
        let mut m = MlpModel::init(&[4, 3, 1], 0.0, 0).unwrap();
        let n = m.n_params();
        m.set_params_flat(&vec![0.0; n]);
        assert_eq!(m.predict_row(&[0.3, -1.0, 2.0, 5.0]), 0.0);
    }

    #[test]
    fn shapes_chain() {
        let m = MlpModel::init(&[4, 20, 5, 1], 1.0, 0).unwrap();
        for w in m.layers.windows(2) {
            assert_eq!(w[0].n_out, w[1].n_in);
        }
        assert_eq!(m.layers[0].weights.len(), 80);
        assert_eq!(m.n_params(), 4 * 20 + 20 + 20 * 5 + 5 + 5 + 1);
    }

    fn toy() -> (FeatureMatrix, Vec<f64>) {
        let rows: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64 / 49.0, ((i * 7) % 13) as f64 / 12.0]).collect();
        let y = rows.iter().map(|r| (3.0 * r[0]).sin() + 0.5 * r[1]).collect();
        (FeatureMatrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn accepted_steps_never_raise_the_loss() {
        let (x, y) = toy();
        for solver in [Solver::default(), Solver::Lbfgs { memory: 10 }] {
            let p = MlpParams { hidden: vec![5], alpha: 0.01, solver, max_iter: 200, tol: 0.0 };
            let m = MlpModel::fit(&x, &y, &p, 4).unwrap();
            assert!(m.loss_curve.windows(2).all(|w| w[1] <= w[0]));
            assert!(m.loss_curve.last() < m.loss_curve.first());
        }
    }

    #[test]
    fn zero_units_rejected() {
        let (x, y) = toy();
        assert!(MlpModel::fit(&x, &y, &MlpParams { hidden: vec![0], ..Default::default() }, 0).is_err());
    }
}
