//! Gradient-boosted regression trees with squared-error loss and exact
//! greedy split search.
//!
//! Missing feature values are encoded as `NaN`. Rows route left when
//! `x < threshold`; missing values follow the split's default branch.

use std::path::Path;

use indexmap::IndexMap;
use ndarray::{Array2, ArrayView1};
use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::tabular::DesignMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbtParams {
    pub n_rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub min_child_weight: f64,
    /// `None` uses the mean of the training target.
    pub base_score: Option<f64>,
    /// Row fraction sampled without replacement per tree.
    pub subsample: f64,
    /// Column fraction sampled per tree.
    pub colsample_bytree: f64,
    pub seed: u64,
}

impl Default for GbtParams {
    fn default() -> Self {
        Self {
            n_rounds: 200,
            max_depth: 4,
            learning_rate: 0.1,
            lambda: 1.0,
            gamma: 0.0,
            min_child_weight: 1.0,
            base_score: None,
            subsample: 1.0,
            colsample_bytree: 1.0,
            seed: 0,
        }
    }
}

impl GbtParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if self.n_rounds == 0 {
            return bad("n_rounds must be at least 1");
        }
        if self.max_depth == 0 {
            return bad("max_depth must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learning_rate must lie in (0, 1]");
        }
        if !(self.lambda >= 0.0 && self.gamma >= 0.0 && self.min_child_weight >= 0.0) {
            return bad("lambda, gamma and min_child_weight must be non-negative");
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0)
            || !(self.colsample_bytree > 0.0 && self.colsample_bytree <= 1.0)
        {
            return bad("subsample and colsample_bytree must lie in (0, 1]");
        }
        if self.base_score.is_some_and(|b| !b.is_finite()) {
            return bad("base_score must be finite");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        default_left: bool,
        /// Split objective including the `-gamma` term.
        gain: f64,
        cover: f64,
        grad: f64,
    },
    Leaf {
        /// Unshrunk weight `-G / (H + lambda)`.
        weight: f64,
        cover: f64,
        grad: f64,
    },
}

impl Node {
    pub fn cover(&self) -> f64 {
        match self {
            Node::Split { cover, .. } | Node::Leaf { cover, .. } => *cover,
        }
    }

    pub fn grad(&self) -> f64 {
        match self {
            Node::Split { grad, .. } | Node::Leaf { grad, .. } => *grad,
        }
    }
}

/// Arena of nodes; index 0 is the root and children follow their parent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_index(&self, row: ArrayView1<f64>) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    default_left,
                    ..
                } => {
                    let v = row[*feature];
                    i = if v.is_nan() {
                        if *default_left {
                            *left
                        } else {
                            *right
                        }
                    } else if v < *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    pub fn leaf_weight(&self, row: ArrayView1<f64>) -> f64 {
        match self.nodes[self.leaf_index(row)] {
            Node::Leaf { weight, .. } => weight,
            Node::Split { .. } => unreachable!(),
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
            }
        }
        go(self, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub base_score: f64,
    pub trees: Vec<Tree>,
    pub n_features: usize,
    pub feature_names: Vec<String>,
    pub params: GbtParams,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    default_left: bool,
    gain: f64,
}

struct Builder<'a> {
    x: &'a Array2<f64>,
    grad: &'a [f64],
    presorted: &'a [Vec<usize>],
    features: Vec<usize>,
    params: &'a GbtParams,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn objective(&self, g: f64, h: f64) -> f64 {
        g * g / (h + self.params.lambda)
    }

    fn gain(&self, gl: f64, hl: f64, gr: f64, hr: f64, g: f64, h: f64) -> f64 {
        0.5 * (self.objective(gl, hl) + self.objective(gr, hr) - self.objective(g, h))
            - self.params.gamma
    }

    fn best_for_feature(&self, f: usize, in_node: &[bool], g: f64, h: f64) -> Option<Candidate> {
        let mcw = self.params.min_child_weight;
        let col = self.x.column(f);
        let present: Vec<usize> = self.presorted[f]
            .iter()
            .copied()
            .filter(|&r| in_node[r])
            .collect();
        let gp: f64 = present.iter().map(|&r| self.grad[r]).sum();
        let hp = present.len() as f64;
        let (gm, hm) = (g - gp, h - hp);
        let mut best: Option<Candidate> = None;
        let (mut gl, mut hl) = (0.0, 0.0);
        for w in 0..present.len().saturating_sub(1) {
            let r = present[w];
            gl += self.grad[r];
            hl += 1.0;
            let (a, b) = (col[r], col[present[w + 1]]);
            if a >= b {
                continue;
            }
            let mut threshold = a + (b - a) / 2.0;
            if threshold <= a {
                threshold = b;
            }
            let (gr, hr) = (gp - gl, hp - hl);
            let mut choice: Option<(bool, f64)> = None;
            let options: &[bool] = if hm > 0.0 { &[true, false] } else { &[true] };
            for &left in options {
                let (l_g, l_h, r_g, r_h) = if left {
                    (gl + gm, hl + hm, gr, hr)
                } else {
                    (gl, hl, gr + gm, hr + hm)
                };
                if l_h < mcw || r_h < mcw {
                    continue;
                }
                let gain = self.gain(l_g, l_h, r_g, r_h, g, h);
                if choice.is_none_or(|(_, c)| gain > c) {
                    choice = Some((left, gain));
                }
            }
            if let Some((default_left, gain)) = choice {
                if best.as_ref().is_none_or(|c| gain > c.gain) {
                    best = Some(Candidate {
                        feature: f,
                        threshold,
                        default_left,
                        gain,
                    });
                }
            }
        }
        best
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let g: f64 = rows.iter().map(|&r| self.grad[r]).sum();
        let h = rows.len() as f64;
        let idx = self.nodes.len();
        let weight = -g / (h + self.params.lambda) + 0.0;
        self.nodes.push(Node::Leaf {
            weight,
            cover: h,
            grad: g,
        });
        if depth >= self.params.max_depth || h < 2.0 * self.params.min_child_weight || h < 2.0 {
            return idx;
        }
        let mut in_node = vec![false; self.x.nrows()];
        for &r in &rows {
            in_node[r] = true;
        }
        let per_feature: Vec<Option<Candidate>> = self
            .features
            .par_iter()
            .map(|&f| self.best_for_feature(f, &in_node, g, h))
            .collect();
        // features are ascending, so a strict comparison keeps the lowest index on ties
        let mut best: Option<Candidate> = None;
        for c in per_feature.into_iter().flatten() {
            if best.as_ref().is_none_or(|b| c.gain > b.gain) {
                best = Some(c);
            }
        }
        let Some(best) = best.filter(|c| c.gain > 0.0) else {
            return idx;
        };
        let (mut lrows, mut rrows) = (Vec::new(), Vec::new());
        for &r in &rows {
            let v = self.x[[r, best.feature]];
            let go_left = if v.is_nan() {
                best.default_left
            } else {
                v < best.threshold
            };
            if go_left {
                lrows.push(r);
            } else {
                rrows.push(r);
            }
        }
        let left = self.grow(lrows, depth + 1);
        let right = self.grow(rrows, depth + 1);
        self.nodes[idx] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
            default_left: best.default_left,
            gain: best.gain,
            cover: h,
            grad: g,
        };
        idx
    }
}

fn check_inputs(x: &Array2<f64>, y: &[f64]) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            found: y.len(),
        });
    }
    if y.len() < 2 {
        return Err(Error::Empty("boosting needs at least 2 rows".into()));
    }
    if x.ncols() == 0 {
        return Err(Error::Empty("design matrix has no columns".into()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("target".into()));
    }
    if x.iter().any(|v| v.is_infinite()) {
        return Err(Error::NonFinite("design matrix".into()));
    }
    Ok(())
}

/// Fit on a raw matrix; features are named `f0, f1, ...`.
pub fn fit(x: &Array2<f64>, y: &[f64], params: &GbtParams) -> Result<GbtModel> {
    let names = (0..x.ncols()).map(|j| format!("f{j}")).collect();
    fit_named(x, y, names, params)
}

pub fn fit_design(x: &DesignMatrix, y: &[f64], params: &GbtParams) -> Result<GbtModel> {
    fit_named(&x.values, y, x.feature_names.clone(), params)
}

fn fit_named(
    x: &Array2<f64>,
    y: &[f64],
    feature_names: Vec<String>,
    params: &GbtParams,
) -> Result<GbtModel> {
    params.validate()?;
    check_inputs(x, y)?;
    let (n, d) = x.dim();
    let base_score = params
        .base_score
        .unwrap_or_else(|| y.iter().sum::<f64>() / n as f64);

    let presorted: Vec<Vec<usize>> = (0..d)
        .map(|f| {
            let col = x.column(f);
            let mut idx: Vec<usize> = (0..n).filter(|&r| !col[r].is_nan()).collect();
            idx.sort_by(|&a, &b| col[a].total_cmp(&col[b]).then(a.cmp(&b)));
            idx
        })
        .collect();

    let mut rng = seed::rng(params.seed);
    let mut pred = vec![base_score; n];
    let mut trees = Vec::with_capacity(params.n_rounds);
    for _ in 0..params.n_rounds {
        let grad: Vec<f64> = pred.iter().zip(y).map(|(p, t)| p - t).collect();
        let rows: Vec<usize> = if params.subsample < 1.0 {
            let m = ((n as f64 * params.subsample).round() as usize).clamp(1, n);
            let mut r = sample(&mut rng, n, m).into_vec();
            r.sort_unstable();
            r
        } else {
            (0..n).collect()
        };
        let features: Vec<usize> = if params.colsample_bytree < 1.0 {
            let m = ((d as f64 * params.colsample_bytree).ceil() as usize).clamp(1, d);
            let mut f = sample(&mut rng, d, m).into_vec();
            f.sort_unstable();
            f
        } else {
            (0..d).collect()
        };
        let mut builder = Builder {
            x,
            grad: &grad,
            presorted: &presorted,
            features,
            params,
            nodes: Vec::new(),
        };
        builder.grow(rows, 0);
        let tree = Tree {
            nodes: builder.nodes,
        };
        for (r, p) in pred.iter_mut().enumerate() {
            *p += params.learning_rate * tree.leaf_weight(x.row(r));
        }
        trees.push(tree);
    }
    Ok(GbtModel {
        base_score,
        trees,
        n_features: d,
        feature_names,
        params: params.clone(),
    })
}

impl GbtModel {
    pub fn predict(&self, x: &Array2<f64>) -> Result<Vec<f64>> {
        self.predict_with_trees(x, self.trees.len())
    }

    /// Prediction using only the first `t` trees.
    pub fn predict_with_trees(&self, x: &Array2<f64>, t: usize) -> Result<Vec<f64>> {
        if x.ncols() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                found: x.ncols(),
            });
        }
        let eta = self.params.learning_rate;
        Ok(x.rows()
            .into_iter()
            .map(|row| {
                self.trees[..t.min(self.trees.len())]
                    .iter()
                    .fold(self.base_score, |acc, tree| {
                        acc + eta * tree.leaf_weight(row)
                    })
            })
            .collect())
    }

    /// Sum of split gains per feature index.
    pub fn gain_by_index(&self) -> Vec<f64> {
        let mut scores = vec![0.0; self.n_features];
        for tree in &self.trees {
            for node in &tree.nodes {
                if let Node::Split { feature, gain, .. } = node {
                    scores[*feature] += gain;
                }
            }
        }
        scores
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub fn predict(model: &GbtModel, x: &Array2<f64>) -> Result<Vec<f64>> {
    model.predict(x)
}

/// Feature name to summed split gain; unused features score 0.
pub fn total_gain_importance(model: &GbtModel) -> IndexMap<String, f64> {
    model
        .feature_names
        .iter()
        .cloned()
        .zip(model.gain_by_index())
        .collect()
}

/// Sum per-feature scores into their groups. `group_of[i]` labels feature `i`.
pub fn grouped_importance(scores: &[f64], group_of: &[String]) -> Result<IndexMap<String, f64>> {
    let mut out = IndexMap::new();
    for (i, s) in scores.iter().enumerate() {
        let g = group_of
            .get(i)
            .filter(|g| !g.is_empty())
            .ok_or(Error::Ungrouped(i))?;
        *out.entry(g.clone()).or_insert(0.0) += s;
    }
    Ok(out)
}
