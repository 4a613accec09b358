//! Path-dependent TreeSHAP attributions and grouped reports.

use std::path::Path;

use indexmap::IndexMap;
use ndarray::{Array2, ArrayView1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boost::{GbtModel, Node, Tree};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapMatrix {
    /// `samples × features`
    pub values: Array2<f64>,
    pub base_value: f64,
    pub feature_names: Vec<String>,
}

#[derive(Debug, Clone, Copy)]
struct PathElement {
    feature: Option<usize>,
    zero_fraction: f64,
    one_fraction: f64,
    pweight: f64,
}

fn extend(
    path: &mut Vec<PathElement>,
    zero_fraction: f64,
    one_fraction: f64,
    feature: Option<usize>,
) {
    let d = path.len();
    path.push(PathElement {
        feature,
        zero_fraction,
        one_fraction,
        pweight: if d == 0 { 1.0 } else { 0.0 },
    });
    let df = (d + 1) as f64;
    for i in (0..d).rev() {
        path[i + 1].pweight += one_fraction * path[i].pweight * (i + 1) as f64 / df;
        path[i].pweight = zero_fraction * path[i].pweight * (d - i) as f64 / df;
    }
}

fn unwind(path: &mut Vec<PathElement>, index: usize) {
    let d = path.len() - 1;
    let one = path[index].one_fraction;
    let zero = path[index].zero_fraction;
    let df = (d + 1) as f64;
    let mut next_one = path[d].pweight;
    for i in (0..d).rev() {
        if one != 0.0 {
            let tmp = path[i].pweight;
            path[i].pweight = next_one * df / ((i + 1) as f64 * one);
            next_one = tmp - path[i].pweight * zero * (d - i) as f64 / df;
        } else {
            path[i].pweight = path[i].pweight * df / (zero * (d - i) as f64);
        }
    }
    for i in index..d {
        path[i].feature = path[i + 1].feature;
        path[i].zero_fraction = path[i + 1].zero_fraction;
        path[i].one_fraction = path[i + 1].one_fraction;
    }
    path.pop();
}

fn unwound_sum(path: &[PathElement], index: usize) -> f64 {
    let d = path.len() - 1;
    let one = path[index].one_fraction;
    let zero = path[index].zero_fraction;
    let df = (d + 1) as f64;
    let mut next_one = path[d].pweight;
    let mut total = 0.0;
    for i in (0..d).rev() {
        if one != 0.0 {
            let tmp = next_one * df / ((i + 1) as f64 * one);
            total += tmp;
            next_one = path[i].pweight - tmp * zero * (d - i) as f64 / df;
        } else if zero != 0.0 {
            total += path[i].pweight / zero / ((d - i) as f64 / df);
        }
    }
    total
}

struct Walk<'a> {
    tree: &'a Tree,
    row: ArrayView1<'a, f64>,
    scale: f64,
}

impl Walk<'_> {
    fn recurse(
        &self,
        node: usize,
        phi: &mut [f64],
        mut path: Vec<PathElement>,
        zero_fraction: f64,
        one_fraction: f64,
        feature: Option<usize>,
    ) {
        extend(&mut path, zero_fraction, one_fraction, feature);
        match &self.tree.nodes[node] {
            Node::Leaf { weight, .. } => {
                let value = self.scale * weight;
                for i in 1..path.len() {
                    let w = unwound_sum(&path, i);
                    let e = path[i];
                    phi[e.feature.expect("non-root path element")] +=
                        w * (e.one_fraction - e.zero_fraction) * value;
                }
            }
            Node::Split {
                feature: f,
                threshold,
                left,
                right,
                default_left,
                cover,
                ..
            } => {
                let v = self.row[*f];
                let go_left = if v.is_nan() {
                    *default_left
                } else {
                    v < *threshold
                };
                let (hot, cold) = if go_left {
                    (*left, *right)
                } else {
                    (*right, *left)
                };
                let hot_zero = self.tree.nodes[hot].cover() / cover;
                let cold_zero = self.tree.nodes[cold].cover() / cover;
                let (mut in_zero, mut in_one) = (1.0, 1.0);
                if let Some(k) = path.iter().position(|e| e.feature == Some(*f)) {
                    in_zero = path[k].zero_fraction;
                    in_one = path[k].one_fraction;
                    unwind(&mut path, k);
                }
                self.recurse(hot, phi, path.clone(), hot_zero * in_zero, in_one, Some(*f));
                self.recurse(cold, phi, path, cold_zero * in_zero, 0.0, Some(*f));
            }
        }
    }
}

/// Cover-weighted mean leaf weight of one tree.
pub fn expected_leaf_value(tree: &Tree) -> f64 {
    let root = tree.nodes[0].cover();
    tree.nodes
        .iter()
        .filter_map(|n| match n {
            Node::Leaf { weight, cover, .. } => Some(weight * cover / root),
            Node::Split { .. } => None,
        })
        .sum()
}

fn check_covers(model: &GbtModel) -> Result<()> {
    for tree in &model.trees {
        for node in &tree.nodes {
            let ok = match node {
                Node::Leaf { cover, .. } => *cover > 0.0,
                Node::Split {
                    cover, left, right, ..
                } => {
                    let sum = tree.nodes[*left].cover() + tree.nodes[*right].cover();
                    *cover > 0.0 && (cover - sum).abs() <= 1e-9 * cover
                }
            };
            if !ok {
                return Err(Error::Degenerate(
                    "model lacks consistent cover metadata".into(),
                ));
            }
        }
    }
    Ok(())
}

pub fn tree_shap(model: &GbtModel, x: &Array2<f64>) -> Result<ShapMatrix> {
    if x.ncols() != model.n_features {
        return Err(Error::DimensionMismatch {
            expected: model.n_features,
            found: x.ncols(),
        });
    }
    if x.iter().any(|v| v.is_infinite()) {
        return Err(Error::NonFinite("SHAP input".into()));
    }
    check_covers(model)?;
    let eta = model.params.learning_rate;
    let base_value = model.base_score
        + model
            .trees
            .iter()
            .map(|t| eta * expected_leaf_value(t))
            .sum::<f64>();

    let rows: Vec<Vec<f64>> = (0..x.nrows())
        .into_par_iter()
        .map(|r| {
            let mut phi = vec![0.0; model.n_features];
            for tree in &model.trees {
                let walk = Walk {
                    tree,
                    row: x.row(r),
                    scale: eta,
                };
                walk.recurse(0, &mut phi, Vec::new(), 1.0, 1.0, None);
            }
            phi
        })
        .collect();
    let mut values = Array2::zeros((x.nrows(), model.n_features));
    for (r, phi) in rows.into_iter().enumerate() {
        for (c, v) in phi.into_iter().enumerate() {
            values[[r, c]] = v;
        }
    }
    Ok(ShapMatrix {
        values,
        base_value,
        feature_names: model.feature_names.clone(),
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupAggregation {
    /// Per sample, sum the group's columns, take the absolute value, then average.
    #[default]
    SumThenAbs,
    /// Per column mean absolute attribution, averaged over the group's columns.
    ColumnMeanAbs,
}

pub fn grouped_shap(
    shap: &ShapMatrix,
    group_of: &[String],
    mode: GroupAggregation,
) -> Result<IndexMap<String, f64>> {
    let d = shap.values.ncols();
    let mut members: IndexMap<String, Vec<usize>> = IndexMap::new();
    for i in 0..d {
        let g = group_of
            .get(i)
            .filter(|g| !g.is_empty())
            .ok_or(Error::Ungrouped(i))?;
        members.entry(g.clone()).or_default().push(i);
    }
    let n = shap.values.nrows();
    if n == 0 {
        return Err(Error::Empty("no samples to aggregate".into()));
    }
    Ok(members
        .into_iter()
        .map(|(g, cols)| {
            let score = match mode {
                GroupAggregation::SumThenAbs => {
                    shap.values
                        .rows()
                        .into_iter()
                        .map(|row| cols.iter().map(|&c| row[c]).sum::<f64>().abs())
                        .sum::<f64>()
                        / n as f64
                }
                GroupAggregation::ColumnMeanAbs => {
                    cols.iter()
                        .map(|&c| {
                            shap.values.column(c).iter().map(|v| v.abs()).sum::<f64>() / n as f64
                        })
                        .sum::<f64>()
                        / cols.len() as f64
                }
            };
            (g, score)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedGroup {
    pub group: String,
    pub kind: String,
    pub score: f64,
}

/// Top `top_k` groups by descending score, ties broken by name.
/// Groups missing from `tags` get kind `unspecified`.
pub fn rank_report(
    scores: &IndexMap<String, f64>,
    tags: &IndexMap<String, String>,
    top_k: usize,
) -> Result<Vec<RankedGroup>> {
    if top_k == 0 {
        return Err(Error::InvalidParameter("top_k must be at least 1".into()));
    }
    let mut rows: Vec<RankedGroup> = scores
        .iter()
        .map(|(g, s)| RankedGroup {
            group: g.clone(),
            kind: tags.get(g).cloned().unwrap_or_else(|| "unspecified".into()),
            score: *s,
        })
        .collect();
    rows.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.group.cmp(&b.group))
    });
    rows.truncate(top_k);
    Ok(rows)
}

pub fn write_report<W: std::io::Write>(rows: &[RankedGroup], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["group", "kind", "score"])?;
    for r in rows {
        w.write_record([r.group.as_str(), r.kind.as_str(), &r.score.to_string()])?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn export_report(rows: &[RankedGroup], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_report(rows, file)
}
