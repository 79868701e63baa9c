//! Epsilon-insensitive support vector regression solved by sequential minimal
//! optimisation.
//!
//! The dual is posed over 2n variables (α then α*) with signs y = (+1.., −1..)
//! and solved with second-order working-set selection. Kernel rows are cached
//! with least-recently-used eviction.

use serde::{Deserialize, Serialize};

use crate::dataio::FeatureMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Linear,
    Rbf,
}

impl std::str::FromStr for KernelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Self::Linear),
            "rbf" => Ok(Self::Rbf),
            _ => Err(Error::InvalidParameter(format!("unknown kernel `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gamma {
    /// 1 / (n_features · var(X)), variance over every entry of X.
    Scale,
    Value(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvrParams {
    pub c: f64,
    pub epsilon: f64,
    pub kernel: KernelKind,
    pub gamma: Gamma,
    /// KKT violation tolerance.
    pub tol: f64,
    pub max_iter: usize,
    pub cache_mb: usize,
}

impl Default for SvrParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            epsilon: 0.1,
            kernel: KernelKind::Rbf,
            gamma: Gamma::Scale,
            tol: 1e-3,
            max_iter: 10_000_000,
            cache_mb: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Kernel {
    Linear,
    Rbf { gamma: f64 },
}

impl Kernel {
    fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Kernel::Linear => dot(a, b),
            Kernel::Rbf { gamma } => {
                let d2: f64 = a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum();
                (-gamma * d2).exp()
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrModel {
    pub kernel: Kernel,
    pub c: f64,
    pub epsilon: f64,
    pub n_features: usize,
    /// Support vectors, row-major.
    pub support_vectors: Vec<f64>,
    /// α_i − α_i* for each support vector.
    pub dual_coef: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    /// False when the iteration cap stopped the solver before the KKT
    /// tolerance was met; the model then holds the last iterate.
    pub converged: bool,
}

impl SvrModel {
    pub fn fit(x: &FeatureMatrix, y: &[f64], params: &SvrParams) -> Result<Self> {
        if !(params.c > 0.0 && params.c.is_finite()) {
            return Err(Error::InvalidParameter(format!("C = {} must be positive", params.c)));
        }
        if !(params.epsilon >= 0.0) {
            return Err(Error::InvalidParameter(format!("epsilon = {} must be non-negative", params.epsilon)));
        }
        if !(params.tol > 0.0) {
            return Err(Error::InvalidParameter("tolerance must be positive".into()));
        }
        let n = x.n_rows();
        if n == 0 || y.len() != n {
            return Err(Error::InsufficientData("SVR needs matching non-empty X and y".into()));
        }
        let kernel = match params.kernel {
            KernelKind::Linear => Kernel::Linear,
            KernelKind::Rbf => Kernel::Rbf { gamma: resolve_gamma(params.gamma, x)? },
        };
        let sol = Solver::new(x, y, kernel, params).solve();
        let mut support_vectors = Vec::new();
        let mut dual_coef = Vec::new();
        for i in 0..n {
            let beta = sol.alpha[i] - sol.alpha[i + n];
            if beta != 0.0 {
                support_vectors.extend_from_slice(x.row(i));
                dual_coef.push(beta);
            }
        }
        Ok(Self {
            kernel,
            c: params.c,
            epsilon: params.epsilon,
            n_features: x.n_cols(),
            support_vectors,
            dual_coef,
            bias: -sol.rho,
            iterations: sol.iterations,
            converged: sol.converged,
        })
    }

    pub fn n_support(&self) -> usize {
        self.dual_coef.len()
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let d = self.n_features;
        self.dual_coef
            .iter()
            .zip(self.support_vectors.chunks_exact(d))
            .map(|(b, sv)| b * self.kernel.eval(sv, row))
            .sum::<f64>()
            + self.bias
    }

    pub fn predict(&self, x: &FeatureMatrix) -> Vec<f64> {
        x.rows().map(|r| self.predict_row(r)).collect()
    }
}

fn resolve_gamma(g: Gamma, x: &FeatureMatrix) -> Result<f64> {
    match g {
        Gamma::Value(v) if v > 0.0 => Ok(v),
        Gamma::Value(v) => Err(Error::InvalidParameter(format!("gamma {v} must be positive"))),
        Gamma::Scale => {
            let v = x.as_slice();
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            let var = v.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / v.len() as f64;
            Ok(if var > 0.0 { 1.0 / (x.n_cols() as f64 * var) } else { 1.0 })
        }
    }
}

struct Solution {
    alpha: Vec<f64>,
    rho: f64,
    iterations: usize,
    converged: bool,
}

struct KernelCache {
    capacity: usize,
    slot_of: Vec<Option<usize>>,
    owner: Vec<usize>,
    rows: Vec<Vec<f64>>,
    last_used: Vec<u64>,
    clock: u64,
}

impl KernelCache {
    fn new(n: usize, budget_mb: usize) -> Self {
        let per_row = (n * 8).max(1);
        let capacity = ((budget_mb << 20) / per_row).clamp(2, n.max(2));
        Self { capacity, slot_of: vec![None; n], owner: Vec::new(), rows: Vec::new(), last_used: Vec::new(), clock: 0 }
    }

    /// Slot of kernel row `i`, computing it if needed. `pinned` is never evicted.
    fn fetch(&mut self, i: usize, pinned: Option<usize>, compute: impl FnOnce(&mut Vec<f64>)) -> usize {
        self.clock += 1;
        if let Some(s) = self.slot_of[i] {
            self.last_used[s] = self.clock;
            return s;
        }
        let s = if self.rows.len() < self.capacity {
            self.rows.push(Vec::new());
            self.owner.push(i);
            self.last_used.push(0);
            self.rows.len() - 1
        } else {
            let s = (0..self.rows.len())
                .filter(|&s| Some(s) != pinned)
                .min_by_key(|&s| self.last_used[s])
                .expect("cache holds at least two rows");
            self.slot_of[self.owner[s]] = None;
            self.owner[s] = i;
            s
        };
        compute(&mut self.rows[s]);
        self.slot_of[i] = Some(s);
        self.last_used[s] = self.clock;
        s
    }
}

struct Solver<'a> {
    x: &'a FeatureMatrix,
    kernel: Kernel,
    n: usize,
    c: f64,
    tol: f64,
    max_iter: usize,
    p: Vec<f64>,
    sq_norms: Vec<f64>,
    cache: KernelCache,
}

const TAU: f64 = 1e-12;

impl<'a> Solver<'a> {
    fn new(x: &'a FeatureMatrix, y: &[f64], kernel: Kernel, params: &SvrParams) -> Self {
        let n = x.n_rows();
        let mut p = Vec::with_capacity(2 * n);
        p.extend(y.iter().map(|v| params.epsilon - v));
        p.extend(y.iter().map(|v| params.epsilon + v));
        let sq_norms = x.rows().map(|r| dot(r, r)).collect();
        Self {
            x,
            kernel,
            n,
            c: params.c,
            tol: params.tol,
            max_iter: params.max_iter,
            p,
            sq_norms,
            cache: KernelCache::new(n, params.cache_mb),
        }
    }

    fn kernel_row(x: &FeatureMatrix, kernel: Kernel, sq: &[f64], i: usize, out: &mut Vec<f64>) {
        let xi = x.row(i);
        out.clear();
        match kernel {
            Kernel::Linear => out.extend(x.rows().map(|r| dot(xi, r))),
            Kernel::Rbf { gamma } => out.extend(
                x.rows().zip(sq).map(|(r, s)| (-gamma * (sq[i] + s - 2.0 * dot(xi, r)).max(0.0)).exp()),
            ),
        }
    }

    fn row(&mut self, i: usize, pinned: Option<usize>) -> usize {
        let (x, kernel, sq) = (self.x, self.kernel, &self.sq_norms);
        self.cache.fetch(i, pinned, |out| Self::kernel_row(x, kernel, sq, i, out))
    }

    fn solve(mut self) -> Solution {
        let n = self.n;
        let l = 2 * n;
        let c = self.c;
        let sign = |t: usize| if t < n { 1.0 } else { -1.0 };
        let qd: Vec<f64> = (0..n).map(|i| self.kernel.eval(self.x.row(i), self.x.row(i))).collect();
        let mut alpha = vec![0.0; l];
        let mut g = self.p.clone();
        let mut iterations = 0;
        let mut converged = false;
        while iterations < self.max_iter {
            // Maximal violating index from I_up.
            let mut gmax = f64::NEG_INFINITY;
            let mut i = usize::MAX;
            for t in 0..l {
                let up = if t < n { alpha[t] < c } else { alpha[t] > 0.0 };
                if up {
                    let v = -sign(t) * g[t];
                    if v >= gmax {
                        gmax = v;
                        i = t;
                    }
                }
            }
            if i == usize::MAX {
                converged = true;
                break;
            }
            let si = self.row(i % n, None);
            let yi = sign(i);
            let mut gmax2 = f64::NEG_INFINITY;
            let mut j = usize::MAX;
            let mut obj_min = f64::INFINITY;
            {
                let ki = &self.cache.rows[si];
                for t in 0..l {
                    let low = if t < n { alpha[t] > 0.0 } else { alpha[t] < c };
                    if !low {
                        continue;
                    }
                    let yg = sign(t) * g[t];
                    gmax2 = gmax2.max(yg);
                    let b = gmax + yg;
                    if b > 0.0 {
                        let a = qd[i % n] + qd[t % n] - 2.0 * ki[t % n];
                        let a = if a > 0.0 { a } else { TAU };
                        let obj = -(b * b) / a;
                        if obj <= obj_min {
                            obj_min = obj;
                            j = t;
                        }
                    }
                }
            }
            if gmax + gmax2 < self.tol || j == usize::MAX {
                converged = true;
                break;
            }
            iterations += 1;
            let sj = self.row(j % n, Some(si));
            let yj = sign(j);
            let kij = self.cache.rows[si][j % n];
            let (old_i, old_j) = (alpha[i], alpha[j]);
            if yi != yj {
                let quad = qd[i % n] + qd[j % n] + 2.0 * (yi * yj * kij);
                let quad = if quad > 0.0 { quad } else { TAU };
                let delta = (-g[i] - g[j]) / quad;
                let diff = alpha[i] - alpha[j];
                alpha[i] += delta;
                alpha[j] += delta;
                if diff > 0.0 {
                    if alpha[j] < 0.0 {
                        alpha[j] = 0.0;
                        alpha[i] = diff;
                    }
                } else if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = -diff;
                }
                if diff > 0.0 {
                    if alpha[i] > c {
                        alpha[i] = c;
                        alpha[j] = c - diff;
                    }
                } else if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = c + diff;
                }
            } else {
                let quad = qd[i % n] + qd[j % n] - 2.0 * (yi * yj * kij);
                let quad = if quad > 0.0 { quad } else { TAU };
                let delta = (g[i] - g[j]) / quad;
                let sum = alpha[i] + alpha[j];
                alpha[i] -= delta;
                alpha[j] += delta;
                if sum > c {
                    if alpha[i] > c {
                        alpha[i] = c;
                        alpha[j] = sum - c;
                    }
                } else if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = sum;
                }
                if sum > c {
                    if alpha[j] > c {
                        alpha[j] = c;
                        alpha[i] = sum - c;
                    }
                } else if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = sum;
                }
            }
            let di = (alpha[i] - old_i) * yi;
            let dj = (alpha[j] - old_j) * yj;
            let ki = &self.cache.rows[si];
            let kj = &self.cache.rows[sj];
            // Q_ts = y_t y_s K(t mod n, s mod n)
            for t in 0..n {
                let delta = ki[t] * di + kj[t] * dj;
                g[t] += delta;
                g[t + n] -= delta;
            }
        }

        // Offset from free variables, else the midpoint of the feasible interval.
        let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut sum_free, mut n_free) = (0.0, 0usize);
        for t in 0..l {
            let yt = sign(t);
            let yg = yt * g[t];
            if alpha[t] >= c {
                if yt < 0.0 { ub = ub.min(yg) } else { lb = lb.max(yg) }
            } else if alpha[t] <= 0.0 {
                if yt > 0.0 { ub = ub.min(yg) } else { lb = lb.max(yg) }
            } else {
                n_free += 1;
                sum_free += yg;
            }
        }
        let rho = if n_free > 0 { sum_free / n_free as f64 } else { (ub + lb) / 2.0 };
        Solution { alpha, rho, iterations, converged }
    }
}
