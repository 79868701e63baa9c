//! Independent reference implementations shared by the oracle and
//! acceptance targets. Each check returns its worst discrepancy so callers
//! can either assert or report.

#![allow(dead_code)]

use pipeleak::dataio::FeatureMatrix;
use pipeleak::detect::{leak_index, DetectorConfig, DetectorState, Sample};
use pipeleak::models::{Gamma, KernelKind, MlpModel, SvrModel, SvrParams};
use pipeleak::rng::rng_from_seed;
use pipeleak::simulate::{leak_factor, leak_factor_exact};
use rand::Rng;

pub fn matrix(d: usize, data: Vec<f64>) -> FeatureMatrix {
    FeatureMatrix::new((0..d).map(|j| format!("x{j}")).collect(), data).unwrap()
}

fn kernel(kind: KernelKind, gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    match kind {
        KernelKind::Linear => a.iter().zip(b).map(|(u, v)| u * v).sum(),
        KernelKind::Rbf => (-gamma * a.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum::<f64>()).exp(),
    }
}

/// Solves the SVR dual in β = α − α* by bisection on the bias b, the
/// multiplier of Σβ = 0. For fixed b the problem
/// min ½βᵀKβ − (y − b)ᵀβ + ε‖β‖₁, |β| ≤ C is solved by FISTA, whose prox is
/// a soft threshold followed by a clip.
fn qp_oracle(k: &[Vec<f64>], y: &[f64], c: f64, eps: f64) -> (Vec<f64>, f64) {
    let n = y.len();
    let lipschitz = (0..n).map(|i| k[i].iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max).max(1e-12);
    let step = 1.0 / lipschitz;
    let inner = |b: f64| -> Vec<f64> {
        let mut beta = vec![0.0; n];
        let mut z = beta.clone();
        let mut t = 1.0f64;
        for _ in 0..200_000 {
            let grad: Vec<f64> = (0..n).map(|i| (0..n).map(|j| k[i][j] * z[j]).sum::<f64>() - (y[i] - b)).collect();
            let next: Vec<f64> = (0..n)
                .map(|i| {
                    let v = z[i] - step * grad[i];
                    let s = v.signum() * (v.abs() - step * eps).max(0.0);
                    s.clamp(-c, c)
                })
                .collect();
            let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
            let moved = next.iter().zip(&beta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            z = (0..n).map(|i| next[i] + (t - 1.0) / t_next * (next[i] - beta[i])).collect();
            beta = next;
            t = t_next;
            if moved < 1e-13 {
                break;
            }
        }
        beta
    };
    let span = y.iter().map(|v| v.abs()).fold(0.0, f64::max) + eps + n as f64 * c * lipschitz + 1.0;
    let (mut lo, mut hi) = (-span, span);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if inner(mid).iter().sum::<f64>() > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let b = 0.5 * (lo + hi);
    (inner(b), b)
}

/// Largest |library − oracle| prediction gap over 40 probes for one random
/// instance of `n` points.
pub fn svr_oracle_gap(kind: KernelKind, n: usize, seed: u64) -> f64 {
    let d = 3;
    let mut rng = rng_from_seed(seed);
    let x: Vec<f64> = (0..n * d).map(|_| rng.random_range(0.0..1.0)).collect();
    let y: Vec<f64> = (0..n)
        .map(|i| {
            let r = &x[i * d..(i + 1) * d];
            (3.0 * r[0]).sin() + r[1] * r[2] + 0.05 * rng.random_range(-1.0..1.0)
        })
        .collect();
    let (c, eps, gamma) = (5.0, 0.02, 1.5);
    let params = SvrParams { c, epsilon: eps, kernel: kind, gamma: Gamma::Value(gamma), tol: 1e-8, ..Default::default() };
    let model = SvrModel::fit(&matrix(d, x.clone()), &y, &params).unwrap();
    if !model.converged {
        return f64::INFINITY;
    }

    let rows: Vec<&[f64]> = x.chunks_exact(d).collect();
    let k: Vec<Vec<f64>> = rows.iter().map(|a| rows.iter().map(|b| kernel(kind, gamma, a, b)).collect()).collect();
    let (beta, b) = qp_oracle(&k, &y, c, eps);
    let oracle = |p: &[f64]| rows.iter().zip(&beta).map(|(r, bt)| bt * kernel(kind, gamma, r, p)).sum::<f64>() + b;

    let probes: Vec<f64> = (0..40 * d).map(|_| rng.random_range(-0.2..1.2)).collect();
    let probe_m = matrix(d, probes.clone());
    probes.chunks_exact(d).zip(model.predict(&probe_m)).map(|(p, got)| (got - oracle(p)).abs()).fold(0.0, f64::max)
}

pub const SVR_CASES: [(KernelKind, usize, u64); 5] = [
    (KernelKind::Rbf, 8, 1),
    (KernelKind::Rbf, 17, 2),
    (KernelKind::Rbf, 30, 3),
    (KernelKind::Linear, 10, 4),
    (KernelKind::Linear, 30, 5),
];

/// Largest relative gap between analytic and central-difference gradients
/// over every parameter of three small networks.
pub fn mlp_gradient_gap() -> f64 {
    let mut rng = rng_from_seed(9);
    let mut worst = 0.0f64;
    for (hidden, alpha) in [(vec![5], 0.0), (vec![7, 4], 0.1), (vec![20], 10.0)] {
        let (n, d) = (25, 4);
        let x = matrix(d, (0..n * d).map(|_| rng.random_range(0.0..1.0)).collect());
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(5.0..12.0)).collect();
        let mut sizes = vec![d];
        sizes.extend(&hidden);
        sizes.push(1);
        let model = MlpModel::init(&sizes, 8.0, 3).unwrap();
        let theta = model.params_flat();
        let (_, grad) = model.loss_and_gradient(&x, &y, alpha);
        assert_eq!(grad.len(), theta.len());
        let h = 1e-6;
        for i in 0..theta.len() {
            let mut m = model.clone();
            let mut t = theta.clone();
            t[i] += h;
            m.set_params_flat(&t);
            let up = m.loss_and_gradient(&x, &y, alpha).0;
            t[i] -= 2.0 * h;
            m.set_params_flat(&t);
            let down = m.loss_and_gradient(&x, &y, alpha).0;
            let fd = (up - down) / (2.0 * h);
            let scale = fd.abs().max(grad[i].abs()).max(1e-3);
            worst = worst.max((fd - grad[i]).abs() / scale);
        }
    }
    worst
}

/// Steps the detector through fuzzed residuals (about 2% missing) and counts
/// steps where the index, flag or window count disagree with a recount of
/// the flag history. Returns `(mismatches, steps)`.
pub fn window_recount_mismatches(total_steps: usize) -> (usize, usize) {
    let mut rng = rng_from_seed(21);
    let windows = [1usize, 7, 20, 30];
    let mut mismatches = 0;
    for window in windows {
        let cfg = DetectorConfig { window, ..DetectorConfig::for_mae(0.0) };
        let mut state = DetectorState::new();
        let mut flags: Vec<bool> = Vec::new();
        for i in 0..total_steps / windows.len() {
            let observed = if rng.random_bool(0.02) { f64::NAN } else { rng.random_range(-0.03..0.03) };
            let s = Sample { ordinal: i, observed, predicted: 0.0, inlet_pressure: 0.0, outlet_pressure: 0.0, inlet: None };
            let before = flags.iter().rev().take(window).filter(|&&f| f).count();
            match state.step(&s, &cfg) {
                None => mismatches += usize::from(!observed.is_nan()),
                Some((rec, _)) => {
                    flags.push(observed.abs() > cfg.threshold);
                    let ok = rec.index == leak_index(before as f64 + 1.0) && rec.flag == *flags.last().unwrap();
                    mismatches += usize::from(!ok);
                }
            }
            let recount = flags.iter().rev().take(window).filter(|&&f| f).count();
            mismatches += usize::from(state.exceedances() != recount);
        }
    }
    (mismatches, total_steps / windows.len() * windows.len())
}

/// Outlet pressure drop with a leak, from the two pipe segments: the upstream
/// fraction carries (1 + q)·Q, the rest carries Q. The factor is the ratio
/// of the no-leak to the leaking drop, square-rooted.
pub fn two_segment_factor(q: f64, l: f64) -> f64 {
    let upstream = l * (1.0 + q) * (1.0 + q);
    let downstream = 1.0 - l;
    (1.0 / (upstream + downstream)).sqrt()
}

/// Worst gaps over a 50×50 (q, l) grid: unrounded factor vs the two-segment
/// oracle, and rounded vs unrounded factor.
pub fn leak_factor_gaps() -> (f64, f64) {
    let (mut exact_gap, mut rounding_gap) = (0.0f64, 0.0f64);
    for i in 0..50 {
        for j in 0..50 {
            let q = 0.001 + i as f64 * (0.5 - 0.001) / 49.0;
            let l = j as f64 / 49.0;
            let exact = leak_factor_exact(q, l).unwrap();
            exact_gap = exact_gap.max((exact - two_segment_factor(q, l)).abs());
            rounding_gap = rounding_gap.max((leak_factor(q, l).unwrap() - exact).abs());
        }
    }
    (exact_gap, rounding_gap)
}
