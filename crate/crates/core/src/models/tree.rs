//! CART regression trees grown by variance reduction.
//!
//! Rows are presorted once per feature; each node owns a contiguous segment of
//! every per-feature ordering, and splitting stably partitions those segments.
//! A split candidate sits between two distinct consecutive values and uses the
//! midpoint as threshold. Among equally good candidates the lowest feature
//! index wins, then the lowest threshold.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataio::FeatureMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    /// Every feature is a candidate at every split.
    All,
    Sqrt,
    Log2,
}

impl MaxFeatures {
    pub fn count(self, n_features: usize) -> usize {
        let k = match self {
            MaxFeatures::All => n_features,
            MaxFeatures::Sqrt => (n_features as f64).sqrt() as usize,
            MaxFeatures::Log2 => (n_features as f64).log2() as usize,
        };
        k.clamp(1, n_features.max(1))
    }
}

impl std::str::FromStr for MaxFeatures {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" | "none" | "auto" => Ok(Self::All),
            "sqrt" => Ok(Self::Sqrt),
            "log2" => Ok(Self::Log2),
            _ => Err(Error::InvalidParameter(format!("unknown max_features `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_features: MaxFeatures,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self { max_features: MaxFeatures::All, min_samples_split: 2, min_samples_leaf: 1, max_depth: None }
    }
}

impl TreeParams {
    fn validate(&self) -> Result<()> {
        if self.min_samples_split < 2 {
            return Err(Error::InvalidParameter("min_samples_split must be at least 2".into()));
        }
        if self.min_samples_leaf < 1 {
            return Err(Error::InvalidParameter("min_samples_leaf must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Leaf { value: f64, n_samples: usize },
    Split { feature: usize, threshold: f64, left: usize, right: usize, value: f64, n_samples: usize },
}

impl Node {
    pub fn value(&self) -> f64 {
        match *self {
            Node::Leaf { value, .. } | Node::Split { value, .. } => value,
        }
    }
    pub fn n_samples(&self) -> usize {
        match *self {
            Node::Leaf { n_samples, .. } | Node::Split { n_samples, .. } => n_samples,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub n_features: usize,
    pub nodes: Vec<Node>,
}

/// Row indices of a matrix sorted by each feature (ties by row index).
#[derive(Debug, Clone)]
pub struct Presorted {
    n_rows: usize,
    order: Vec<Vec<u32>>,
}

impl Presorted {
    pub fn new(x: &FeatureMatrix) -> Self {
        let n = x.n_rows();
        let order = (0..x.n_cols())
            .map(|f| {
                let mut idx: Vec<u32> = (0..n as u32).collect();
                idx.sort_by(|&a, &b| x.get(a as usize, f).total_cmp(&x.get(b as usize, f)).then(a.cmp(&b)));
                idx
            })
            .collect();
        Self { n_rows: n, order }
    }

    /// Orderings over a multiset of rows where row `r` appears `counts[r]` times.
    fn expand(&self, counts: Option<&[u32]>) -> Vec<Vec<u32>> {
        match counts {
            None => self.order.clone(),
            Some(c) => self
                .order
                .iter()
                .map(|o| {
                    let mut v = Vec::with_capacity(self.n_rows);
                    for &r in o {
                        for _ in 0..c[r as usize] {
                            v.push(r);
                        }
                    }
                    v
                })
                .collect(),
        }
    }
}

struct Candidate {
    feature: usize,
    pos: usize,
    threshold: f64,
    score: f64,
}

impl DecisionTree {
    /// Fits a tree on every row of `x`.
    pub fn fit<R: Rng + ?Sized>(x: &FeatureMatrix, y: &[f64], params: &TreeParams, rng: &mut R) -> Result<Self> {
        let pre = Presorted::new(x);
        Self::fit_presorted(x, y, &pre, None, params, rng)
    }

    /// Fits on a multiset of rows (`counts[r]` copies of row `r`, all rows
    /// once when `None`) reusing a presorted index of `x`.
    pub fn fit_presorted<R: Rng + ?Sized>(
        x: &FeatureMatrix,
        y: &[f64],
        pre: &Presorted,
        counts: Option<&[u32]>,
        params: &TreeParams,
        rng: &mut R,
    ) -> Result<Self> {
        params.validate()?;
        if x.n_rows() == 0 {
            return Err(Error::InsufficientData("cannot fit a tree on zero rows".into()));
        }
        if y.len() != x.n_rows() || pre.n_rows != x.n_rows() {
            return Err(Error::InvalidParameter(format!("{} rows but {} targets", x.n_rows(), y.len())));
        }
        let mut order = pre.expand(counts);
        let m = order[0].len();
        if m == 0 {
            return Err(Error::InsufficientData("empty sample".into()));
        }
        let mut builder = Builder {
            x,
            y,
            params,
            nodes: Vec::new(),
            goes_left: vec![false; x.n_rows()],
            scratch: Vec::with_capacity(m),
        };
        builder.build(&mut order, m, rng);
        Ok(DecisionTree { n_features: x.n_cols(), nodes: builder.nodes })
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value, .. } => return value,
                Node::Split { feature, threshold, left, right, .. } => {
                    i = if row[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn predict(&self, x: &FeatureMatrix) -> Vec<f64> {
        x.rows().map(|r| self.predict_row(r)).collect()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

struct Builder<'a> {
    x: &'a FeatureMatrix,
    y: &'a [f64],
    params: &'a TreeParams,
    nodes: Vec<Node>,
    goes_left: Vec<bool>,
    scratch: Vec<u32>,
}

impl Builder<'_> {
    fn build<R: Rng + ?Sized>(&mut self, order: &mut [Vec<u32>], m: usize, rng: &mut R) {
        // (node slot, lo, hi, depth)
        let mut stack = vec![(self.push_placeholder(), 0usize, m, 0usize)];
        while let Some((slot, lo, hi, depth)) = stack.pop() {
            let seg = &order[0][lo..hi];
            let n = hi - lo;
            let mean = seg.iter().map(|&r| self.y[r as usize]).sum::<f64>() / n as f64;
            let (ymin, ymax) = seg
                .iter()
                .map(|&r| self.y[r as usize])
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
            let can_split = n >= self.params.min_samples_split
                && n >= 2 * self.params.min_samples_leaf
                && self.params.max_depth.is_none_or(|d| depth < d)
                && ymax > ymin;
            let best = if can_split { self.best_split(order, lo, hi, mean, rng) } else { None };
            let Some(best) = best else {
                self.nodes[slot] = Node::Leaf { value: mean, n_samples: n };
                continue;
            };
            for &r in &order[best.feature][lo..lo + best.pos] {
                self.goes_left[r as usize] = true;
            }
            for o in order.iter_mut() {
                self.partition(&mut o[lo..hi]);
            }
            for &r in &order[best.feature][lo..lo + best.pos] {
                self.goes_left[r as usize] = false;
            }
            let left = self.push_placeholder();
            let right = self.push_placeholder();
            self.nodes[slot] = Node::Split {
                feature: best.feature,
                threshold: best.threshold,
                left,
                right,
                value: mean,
                n_samples: n,
            };
            stack.push((right, lo + best.pos, hi, depth + 1));
            stack.push((left, lo, lo + best.pos, depth + 1));
        }
    }

    fn push_placeholder(&mut self) -> usize {
        self.nodes.push(Node::Leaf { value: 0.0, n_samples: 0 });
        self.nodes.len() - 1
    }

    fn partition(&mut self, seg: &mut [u32]) {
        self.scratch.clear();
        let mut w = 0;
        for i in 0..seg.len() {
            let r = seg[i];
            if self.goes_left[r as usize] {
                seg[w] = r;
                w += 1;
            } else {
                self.scratch.push(r);
            }
        }
        seg[w..].copy_from_slice(&self.scratch);
    }

    fn is_constant(&self, order: &[Vec<u32>], f: usize, lo: usize, hi: usize) -> bool {
        let o = &order[f];
        self.x.get(o[lo] as usize, f) == self.x.get(o[hi - 1] as usize, f)
    }

    fn best_split<R: Rng + ?Sized>(
        &self,
        order: &[Vec<u32>],
        lo: usize,
        hi: usize,
        mean: f64,
        rng: &mut R,
    ) -> Option<Candidate> {
        let n_features = order.len();
        let k = self.params.max_features.count(n_features);
        let features: Vec<usize> = if k >= n_features {
            (0..n_features).collect()
        } else {
            // Draw features in random order until `k` non-constant ones are
            // found, then evaluate them in index order.
            let mut perm: Vec<usize> = (0..n_features).collect();
            perm.shuffle(rng);
            let mut chosen = Vec::with_capacity(k);
            for f in perm {
                if chosen.len() == k {
                    break;
                }
                if !self.is_constant(order, f, lo, hi) {
                    chosen.push(f);
                }
            }
            chosen.sort_unstable();
            chosen
        };
        let n = hi - lo;
        let min_leaf = self.params.min_samples_leaf;
        let mut best: Option<Candidate> = None;
        for f in features {
            let o = &order[f][lo..hi];
            let total: f64 = o.iter().map(|&r| self.y[r as usize] - mean).sum();
            let mut left_sum = 0.0;
            for i in 0..n - 1 {
                left_sum += self.y[o[i] as usize] - mean;
                let nl = i + 1;
                if nl < min_leaf || n - nl < min_leaf {
                    continue;
                }
                let a = self.x.get(o[i] as usize, f);
                let b = self.x.get(o[i + 1] as usize, f);
                if a >= b {
                    continue;
                }
                let right_sum = total - left_sum;
                let score = left_sum * left_sum / nl as f64 + right_sum * right_sum / (n - nl) as f64;
                if best.as_ref().is_none_or(|c| score > c.score) {
                    let mut threshold = a + (b - a) / 2.0;
                    if threshold >= b || !threshold.is_finite() {
                        threshold = a;
                    }
                    best = Some(Candidate { feature: f, pos: nl, threshold, score });
                }
            }
        }
        best
    }
}
