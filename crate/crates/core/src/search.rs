//! Greedy coding-forest search.
//!
//! Starting from one single-leaf tree per attribute, every iteration scores
//! each permitted refinement of each leaf and applies the single one that
//! saves the most bits. Candidate scores are memoized per leaf; only the
//! leaves created by the last refinement are scored anew.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codelength::{
    cost_multiway_split, cost_single_split, encode_parameter, leaf_nominal, leaf_numeric, warm_nml,
    Bits, LeafStats, NumericStats, DEFAULT_PRECISION,
};
use crate::data::{Attribute, AttributeType, Dataset};
use crate::error::{CrackError, Result};
use crate::forest::{
    polynomial, route, CodingForest, CodingTree, Leaf, ModelClass, MultiwayKey, RegressionOrder,
    SplitCondition, TreeNode,
};

/// Refinements saving less than this are treated as no improvement.
const MIN_GAIN: Bits = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    /// Precision of encoded regression parameters (a power of ten below 1).
    pub precision: f64,
    /// Consider linear and quadratic regression nodes.
    pub regression: bool,
    /// Worker threads for candidate scoring. `None` uses the global pool,
    /// `Some(1)` scores serially.
    pub threads: Option<usize>,
    /// Upper bound on applied refinements.
    pub max_iterations: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            precision: DEFAULT_PRECISION,
            regression: true,
            threads: None,
            max_iterations: 100_000,
        }
    }
}

impl SearchOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.precision > 0.0 && self.precision < 1.0) {
            return Err(CrackError::Config(format!(
                "precision must lie in (0, 1), got {}",
                self.precision
            )));
        }
        if self.threads == Some(0) {
            return Err(CrackError::Config("threads must be at least 1".into()));
        }
        Ok(())
    }
}

/// What a refinement puts in place of a leaf.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RefinementKind {
    Split {
        condition: SplitCondition,
    },
    Multiway {
        key: MultiwayKey,
    },
    Regression {
        order: RegressionOrder,
        params: Vec<f64>,
    },
}

impl RefinementKind {
    pub fn label(&self) -> &'static str {
        match self {
            RefinementKind::Split { .. } => "split",
            RefinementKind::Multiway { .. } => "multiway",
            RefinementKind::Regression {
                order: RegressionOrder::Linear,
                ..
            } => "linear",
            RefinementKind::Regression {
                order: RegressionOrder::Quadratic,
                ..
            } => "quadratic",
        }
    }

    fn is_split(&self) -> bool {
        !matches!(self, RefinementKind::Regression { .. })
    }
}

/// A scored replacement for one leaf.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    pub target: usize,
    pub leaf: u64,
    pub source: usize,
    pub kind: RefinementKind,
    /// Bits of the leaf's contribution to `L(T)` before refining.
    pub old_cost: Bits,
    /// Bits of the replacement subtree's contribution.
    pub new_cost: Bits,
}

impl Refinement {
    pub fn gain(&self) -> Bits {
        self.old_cost - self.new_cost
    }
}

/// One accepted refinement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub iteration: usize,
    pub target: usize,
    pub source: usize,
    pub kind: String,
    pub gain: Bits,
    /// `L(D, M)` after the step.
    pub total_cost: Bits,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub forest: CodingForest,
    pub trace: Vec<TraceStep>,
    pub trivial_cost: Bits,
}

// ---------------------------------------------------------------------------
// Leaves and trivial trees
// ---------------------------------------------------------------------------

fn leaf_stats(attr: &Attribute, rows: &[u32], values: Option<&[f64]>) -> LeafStats {
    match (attr.codes(), values) {
        (Some(codes), _) => {
            let mut histogram = vec![0; attr.category_count];
            rows.iter()
                .for_each(|&r| histogram[codes[r as usize] as usize] += 1);
            LeafStats::Nominal { histogram }
        }
        (None, Some(v)) => LeafStats::Numeric(NumericStats::from_values(v)),
        (None, None) => {
            let col = attr.numeric_values().expect("numeric");
            LeafStats::Numeric(NumericStats::from_samples(
                rows.iter().map(|&r| col[r as usize]),
            ))
        }
    }
}

/// Builds a leaf over `rows` of `attr`. `residuals`, when given, replace
/// the attribute values (leaves below a regression).
pub fn make_leaf(attr: &Attribute, id: u64, rows: Vec<u32>, residuals: Option<&[f64]>) -> Leaf {
    let stats = leaf_stats(attr, &rows, residuals);
    let (cost, encoding) = match &stats {
        LeafStats::Nominal { histogram } => (leaf_nominal(histogram, attr.category_count), None),
        LeafStats::Numeric(s) => {
            let (bits, enc) = leaf_numeric(s, attr.resolution, attr.domain_size());
            (bits, Some(enc))
        }
    };
    Leaf {
        id,
        rows,
        stats,
        encoding,
        cost,
        residual: residuals.is_some(),
    }
}

/// Single leaf holding every row of attribute `i`.
pub fn trivial_tree(data: &Dataset, i: usize) -> CodingTree {
    let rows = (0..data.n() as u32).collect();
    CodingTree {
        attribute: i,
        root: TreeNode::Leaf(make_leaf(data.attribute(i), i as u64, rows, None)),
    }
}

pub fn trivial_forest(data: &Dataset) -> CodingForest {
    CodingForest {
        trees: (0..data.m()).map(|i| trivial_tree(data, i)).collect(),
        edges: Default::default(),
    }
}

// ---------------------------------------------------------------------------
// Regression fitting
// ---------------------------------------------------------------------------

/// Ordinary least squares for `y = alpha + beta x (+ gamma x^2)`. Returns
/// `None` for constant `x`, too few points or a singular system.
pub fn fit_regression(x: &[f64], y: &[f64], order: RegressionOrder) -> Option<Vec<f64>> {
    let n = x.len();
    if n != y.len() || n < order.parameter_count() + 1 {
        return None;
    }
    let nf = n as f64;
    let cx = x.iter().sum::<f64>() / nf;
    let sx = (x.iter().map(|v| (v - cx) * (v - cx)).sum::<f64>() / nf).sqrt();
    if !sx.is_finite() || sx <= 0.0 {
        return None;
    }
    let u: Vec<f64> = x.iter().map(|v| (v - cx) / sx).collect();
    let params = match order {
        RegressionOrder::Linear => {
            let ybar = y.iter().sum::<f64>() / nf;
            let suu: f64 = u.iter().map(|v| v * v).sum();
            let suy: f64 = u.iter().zip(y).map(|(a, b)| a * (b - ybar)).sum();
            let b = suy / suu;
            let beta = b / sx;
            vec![ybar - beta * cx, beta]
        }
        RegressionOrder::Quadratic => {
            let mut s = [0.0f64; 5];
            let mut t = [0.0f64; 3];
            for (&ui, &yi) in u.iter().zip(y) {
                let mut p = 1.0;
                for (k, sk) in s.iter_mut().enumerate() {
                    *sk += p;
                    if k < 3 {
                        t[k] += p * yi;
                    }
                    p *= ui;
                }
            }
            let mut a = [
                [s[0], s[1], s[2], t[0]],
                [s[1], s[2], s[3], t[1]],
                [s[2], s[3], s[4], t[2]],
            ];
            let [c0, c1, c2] = solve3(&mut a)?;
            let gamma = c2 / (sx * sx);
            let beta = c1 / sx - 2.0 * c2 * cx / (sx * sx);
            let alpha = c0 - c1 * cx / sx + c2 * cx * cx / (sx * sx);
            vec![alpha, beta, gamma]
        }
    };
    params.iter().all(|p| p.is_finite()).then_some(params)
}

/// Gaussian elimination with partial pivoting on an augmented 3x4 system.
fn solve3(a: &mut [[f64; 4]; 3]) -> Option<[f64; 3]> {
    let scale = a
        .iter()
        .flat_map(|r| r[..3].iter())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() <= 1e-10 * scale {
            return None;
        }
        a.swap(col, pivot);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            let pivot_row = a[col];
            for (cell, p) in a[row][col..].iter_mut().zip(&pivot_row[col..]) {
                *cell -= f * p;
            }
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let s: f64 = (row + 1..3).map(|k| a[row][k] * x[k]).sum();
        x[row] = (a[row][3] - s) / a[row][row];
    }
    Some(x)
}

// ---------------------------------------------------------------------------
// Candidate scoring
// ---------------------------------------------------------------------------

/// Target-side statistics that can be accumulated row by row and merged.
trait Coder: Sync {
    type Acc: Clone + Send;
    fn empty(&self) -> Self::Acc;
    fn push(&self, acc: &mut Self::Acc, row: u32);
    fn merge(&self, a: &Self::Acc, b: &Self::Acc) -> Self::Acc;
    fn count(&self, acc: &Self::Acc) -> usize;
    fn cost(&self, acc: &Self::Acc) -> Bits;
}

struct NominalCoder<'a> {
    codes: &'a [u32],
    k: usize,
}

impl Coder for NominalCoder<'_> {
    type Acc = Vec<usize>;

    fn empty(&self) -> Vec<usize> {
        vec![0; self.k]
    }

    fn push(&self, acc: &mut Vec<usize>, row: u32) {
        acc[self.codes[row as usize] as usize] += 1;
    }

    fn merge(&self, a: &Vec<usize>, b: &Vec<usize>) -> Vec<usize> {
        a.iter().zip(b).map(|(x, y)| x + y).collect()
    }

    fn count(&self, acc: &Vec<usize>) -> usize {
        acc.iter().sum()
    }

    fn cost(&self, acc: &Vec<usize>) -> Bits {
        leaf_nominal(acc, self.k)
    }
}

#[derive(Clone, Copy)]
struct Moments {
    n: usize,
    sum: f64,
    sumsq: f64,
    min: f64,
    max: f64,
}

struct NumericCoder<'a> {
    values: &'a [f64],
    /// Subtracted before accumulating squares.
    shift: f64,
    resolution: f64,
    domain: f64,
}

impl Coder for NumericCoder<'_> {
    type Acc = Moments;

    fn empty(&self) -> Moments {
        Moments {
            n: 0,
            sum: 0.0,
            sumsq: 0.0,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }
    }

    fn push(&self, acc: &mut Moments, row: u32) {
        let v = self.values[row as usize];
        let d = v - self.shift;
        acc.n += 1;
        acc.sum += d;
        acc.sumsq += d * d;
        acc.min = acc.min.min(v);
        acc.max = acc.max.max(v);
    }

    fn merge(&self, a: &Moments, b: &Moments) -> Moments {
        Moments {
            n: a.n + b.n,
            sum: a.sum + b.sum,
            sumsq: a.sumsq + b.sumsq,
            min: a.min.min(b.min),
            max: a.max.max(b.max),
        }
    }

    fn count(&self, acc: &Moments) -> usize {
        acc.n
    }

    fn cost(&self, acc: &Moments) -> Bits {
        if acc.n == 0 {
            return leaf_numeric(&NumericStats::EMPTY, self.resolution, self.domain).0;
        }
        let nf = acc.n as f64;
        let mean = acc.sum / nf;
        let mut variance = (acc.sumsq / nf - mean * mean).max(0.0);
        if acc.min == acc.max {
            variance = 0.0;
        }
        let stats = NumericStats {
            count: acc.n,
            mean: mean + self.shift,
            variance,
            min: acc.min,
            max: acc.max,
        };
        leaf_numeric(&stats, self.resolution, self.domain).0
    }
}

/// Best candidate found so far for a leaf; ties keep the earlier one.
struct Best {
    kind: Option<RefinementKind>,
    cost: Bits,
}

impl Best {
    fn offer(&mut self, cost: Bits, kind: impl FnOnce() -> RefinementKind) {
        if cost < self.cost {
            self.cost = cost;
            self.kind = Some(kind());
        }
    }
}

/// Per-search context: the data, model options and sort orders.
pub struct Refiner<'a> {
    data: &'a Dataset,
    opts: &'a SearchOptions,
    /// Rows sorted by value, per numeric attribute.
    order: Vec<Option<Vec<u32>>>,
}

impl<'a> Refiner<'a> {
    pub fn new(data: &'a Dataset, opts: &'a SearchOptions) -> Self {
        let order = data
            .attributes()
            .iter()
            .map(|a| {
                a.numeric_values().map(|v| {
                    let mut idx: Vec<u32> = (0..v.len() as u32).collect();
                    idx.sort_by(|&i, &j| v[i as usize].total_cmp(&v[j as usize]).then(i.cmp(&j)));
                    idx
                })
            })
            .collect();
        Refiner { data, opts, order }
    }

    /// Best replacement for `leaf` in the tree of `target` using `source`,
    /// if it beats the leaf. On an exact tie a split beats a regression.
    pub fn refine_leaf(&self, target: usize, leaf: &Leaf, source: usize) -> Option<Refinement> {
        if source == target || leaf.residual || leaf.rows.len() < 2 {
            return None;
        }
        let t = self.data.attribute(target);
        let old_cost = 1.0 + leaf.cost;
        let best = match &t.column {
            crate::data::Column::Nominal { codes, .. } => {
                let coder = NominalCoder {
                    codes,
                    k: t.category_count,
                };
                self.best_split(&coder, leaf, source, old_cost)
            }
            crate::data::Column::Numeric(values) => {
                let shift = match &leaf.stats {
                    LeafStats::Numeric(s) => s.mean,
                    LeafStats::Nominal { .. } => 0.0,
                };
                let coder = NumericCoder {
                    values,
                    shift,
                    resolution: t.resolution,
                    domain: t.domain_size(),
                };
                let mut best = self.best_split(&coder, leaf, source, old_cost);
                if self.opts.regression {
                    self.offer_regressions(&mut best, target, leaf, source);
                }
                best
            }
        };
        let kind = best.kind?;
        let r = Refinement {
            target,
            leaf: leaf.id,
            source,
            kind,
            old_cost,
            new_cost: best.cost,
        };
        (r.gain() > MIN_GAIN).then_some(r)
    }

    fn sorted_rows(&self, source: usize, leaf: &Leaf) -> Vec<u32> {
        let order = self.order[source].as_ref().expect("numeric source");
        if leaf.rows.len() == self.data.n() {
            return order.clone();
        }
        let mut member = vec![false; self.data.n()];
        leaf.rows.iter().for_each(|&r| member[r as usize] = true);
        order
            .iter()
            .copied()
            .filter(|&r| member[r as usize])
            .collect()
    }

    fn best_split<C: Coder>(&self, coder: &C, leaf: &Leaf, source: usize, old_cost: Bits) -> Best {
        let mut best = Best {
            kind: None,
            cost: old_cost,
        };
        let s = self.data.attribute(source);
        let m = self.data.m();
        match s.kind {
            AttributeType::Numeric => {
                let values = s.numeric_values().expect("numeric");
                let rows = self.sorted_rows(source, leaf);
                let keys: Vec<f64> = rows.iter().map(|&r| values[r as usize]).collect();
                if let Some(node) = cost_single_split(m, s) {
                    self.numeric_single_splits(coder, &rows, &keys, node, &mut best);
                }
                self.numeric_multiway(coder, &rows, &keys, s, &mut best);
            }
            AttributeType::Binary | AttributeType::Categorical => {
                let codes = s.codes().expect("nominal");
                let mut groups = vec![coder.empty(); s.category_count];
                for &r in &leaf.rows {
                    coder.push(&mut groups[codes[r as usize] as usize], r);
                }
                let present: Vec<usize> = (0..groups.len())
                    .filter(|&c| coder.count(&groups[c]) > 0)
                    .collect();
                if present.len() < 2 {
                    return best;
                }
                let costs: Vec<Bits> = groups.iter().map(|g| coder.cost(g)).collect();
                if let Some(node) = cost_single_split(m, s) {
                    let candidates = if s.kind == AttributeType::Binary {
                        &present[..1]
                    } else {
                        &present[..]
                    };
                    for &c in candidates {
                        let rest = present
                            .iter()
                            .filter(|&&o| o != c)
                            .fold(coder.empty(), |acc, &o| coder.merge(&acc, &groups[o]));
                        let total = 2.0 + node + 2.0 + costs[c] + coder.cost(&rest);
                        best.offer(total, || RefinementKind::Split {
                            condition: SplitCondition::Category(c as u32),
                        });
                    }
                }
                if let Some(node) = cost_multiway_split(m, s, None) {
                    let total = 2.0 + node + present.iter().map(|&c| 1.0 + costs[c]).sum::<f64>();
                    best.offer(total, || RefinementKind::Multiway {
                        key: MultiwayKey::Categories(present.iter().map(|&c| c as u32).collect()),
                    });
                }
            }
        }
        best
    }

    fn numeric_single_splits<C: Coder>(
        &self,
        coder: &C,
        rows: &[u32],
        keys: &[f64],
        node: Bits,
        best: &mut Best,
    ) {
        let len = rows.len();
        if len < 2 || keys[0] == keys[len - 1] {
            return;
        }
        let mut suffix = vec![coder.empty(); len + 1];
        for t in (0..len).rev() {
            let mut acc = suffix[t + 1].clone();
            coder.push(&mut acc, rows[t]);
            suffix[t] = acc;
        }
        let mut left = coder.empty();
        for t in 1..len {
            coder.push(&mut left, rows[t - 1]);
            if keys[t - 1] < keys[t] {
                let total = 2.0 + node + 2.0 + coder.cost(&left) + coder.cost(&suffix[t]);
                let threshold = keys[t - 1] + (keys[t] - keys[t - 1]) / 2.0;
                best.offer(total, || RefinementKind::Split {
                    condition: SplitCondition::Threshold(threshold),
                });
            }
        }
    }

    fn numeric_multiway<C: Coder>(
        &self,
        coder: &C,
        rows: &[u32],
        keys: &[f64],
        source: &Attribute,
        best: &mut Best,
    ) {
        // runs of equal source values
        let mut groups: Vec<(f64, C::Acc)> = Vec::new();
        for (t, &r) in rows.iter().enumerate() {
            if t == 0 || keys[t] != keys[t - 1] {
                groups.push((keys[t], coder.empty()));
            }
            coder.push(&mut groups.last_mut().expect("group").1, r);
        }
        let counts: Vec<usize> = groups.iter().map(|g| coder.count(&g.1)).collect();
        let mut ks: Vec<usize> = counts.iter().copied().filter(|&c| c >= 2).collect();
        ks.sort_unstable();
        ks.dedup();
        if ks.is_empty() {
            return;
        }
        let child_costs: Vec<Bits> = groups.iter().map(|g| 1.0 + coder.cost(&g.1)).collect();
        // groups by ascending count, so "count >= k" is a suffix
        let mut by_count: Vec<usize> = (0..groups.len()).collect();
        by_count.sort_by_key(|&g| (counts[g], g));
        let mut suffix_cost = vec![0.0; by_count.len() + 1];
        for p in (0..by_count.len()).rev() {
            suffix_cost[p] = suffix_cost[p + 1] + child_costs[by_count[p]];
        }
        let m = self.data.m();
        let mut residual = coder.empty();
        let mut p = 0;
        for &k in &ks {
            while p < by_count.len() && counts[by_count[p]] < k {
                residual = coder.merge(&residual, &groups[by_count[p]].1);
                p += 1;
            }
            let kept = by_count.len() - p;
            let has_residual = coder.count(&residual) > 0;
            if kept + usize::from(has_residual) < 2 {
                continue;
            }
            let Some(node) = cost_multiway_split(m, source, Some(k as u64)) else {
                continue;
            };
            let residual_cost = if has_residual {
                1.0 + coder.cost(&residual)
            } else {
                0.0
            };
            let total = 2.0 + node + suffix_cost[p] + residual_cost;
            best.offer(total, || {
                let mut values: Vec<f64> = by_count[p..].iter().map(|&g| groups[g].0).collect();
                values.sort_by(f64::total_cmp);
                RefinementKind::Multiway {
                    key: MultiwayKey::Values {
                        min_count: k as u64,
                        values,
                        residual: has_residual,
                    },
                }
            });
        }
    }

    fn offer_regressions(&self, best: &mut Best, target: usize, leaf: &Leaf, source: usize) {
        let t = self.data.attribute(target);
        let Some(x_col) = self.data.attribute(source).numeric_values() else {
            return;
        };
        let y_col = t.numeric_values().expect("numeric target");
        let x: Vec<f64> = leaf.rows.iter().map(|&r| x_col[r as usize]).collect();
        let y: Vec<f64> = leaf.rows.iter().map(|&r| y_col[r as usize]).collect();
        let split_cost = best.cost;
        let split_kind = best.kind.clone();
        let mut reg = Best {
            kind: None,
            cost: f64::INFINITY,
        };
        for order in [RegressionOrder::Linear, RegressionOrder::Quadratic] {
            if leaf.rows.len() < order.min_rows() {
                continue;
            }
            let Some((params, node)) = self.encoded_fit(&x, &y, order) else {
                continue;
            };
            let residuals: Vec<f64> = x
                .iter()
                .zip(&y)
                .map(|(&xi, &yi)| yi - polynomial(&params, xi))
                .collect();
            let stats = NumericStats::from_values(&residuals);
            let leaf_bits = leaf_numeric(&stats, t.resolution, t.domain_size()).0;
            let total = 2.0 + node + 1.0 + leaf_bits;
            reg.offer(total, || RefinementKind::Regression { order, params });
        }
        // split wins ties
        let split_beats =
            split_kind.as_ref().is_some_and(RefinementKind::is_split) && split_cost <= reg.cost;
        if !split_beats && reg.cost < best.cost {
            *best = reg;
        }
    }

    /// Fits and truncates parameters to the encoding precision.
    fn encoded_fit(
        &self,
        x: &[f64],
        y: &[f64],
        order: RegressionOrder,
    ) -> Option<(Vec<f64>, Bits)> {
        let raw = fit_regression(x, y, order)?;
        let mut bits = (self.data.m() as f64).log2();
        let mut params = Vec::with_capacity(raw.len());
        for phi in raw {
            let p = encode_parameter(phi, self.opts.precision)?;
            bits += p.bits;
            params.push(p.value);
        }
        Some((params, bits))
    }

    /// Builds the subtree a refinement describes. New leaves take ids from
    /// `next_id`.
    pub fn materialize(&self, r: &Refinement, leaf: &Leaf, next_id: &mut u64) -> TreeNode {
        let t = self.data.attribute(r.target);
        let mut fresh = |rows: Vec<u32>, residuals: Option<&[f64]>| {
            let id = *next_id;
            *next_id += 1;
            TreeNode::Leaf(make_leaf(t, id, rows, residuals))
        };
        let s = self.data.attribute(r.source);
        let m = self.data.m();
        let values: Vec<f64> = leaf.rows.iter().map(|&row| t.value(row as usize)).collect();
        match &r.kind {
            RefinementKind::Split { condition } => {
                let probe = TreeNode::Split {
                    source: r.source,
                    condition: condition.clone(),
                    cost: 0.0,
                    left: Box::new(TreeNode::Leaf(leaf.clone())),
                    right: Box::new(TreeNode::Leaf(leaf.clone())),
                };
                let routed = route(&probe, self.data, &leaf.rows, &values);
                let mut kids = routed.children.into_iter();
                let left = fresh(kids.next().unwrap_or_default(), None);
                let right = fresh(kids.next().unwrap_or_default(), None);
                TreeNode::Split {
                    source: r.source,
                    condition: condition.clone(),
                    cost: cost_single_split(m, s).unwrap_or(0.0),
                    left: Box::new(left),
                    right: Box::new(right),
                }
            }
            RefinementKind::Multiway { key } => {
                let probe = TreeNode::Multiway {
                    source: r.source,
                    key: key.clone(),
                    cost: 0.0,
                    children: Vec::new(),
                };
                let routed = route(&probe, self.data, &leaf.rows, &values);
                let min_count = match key {
                    MultiwayKey::Values { min_count, .. } => Some(*min_count),
                    MultiwayKey::Categories(_) => None,
                };
                TreeNode::Multiway {
                    source: r.source,
                    key: key.clone(),
                    cost: cost_multiway_split(m, s, min_count).unwrap_or(0.0),
                    children: routed
                        .children
                        .into_iter()
                        .map(|rows| fresh(rows, None))
                        .collect(),
                }
            }
            RefinementKind::Regression { order, params } => {
                let probe = TreeNode::Regression {
                    source: r.source,
                    order: *order,
                    params: params.clone(),
                    cost: 0.0,
                    child: Box::new(TreeNode::Leaf(leaf.clone())),
                };
                let routed = route(&probe, self.data, &leaf.rows, &values);
                let residuals = routed.residuals.unwrap_or_default();
                let bits = (m as f64).log2()
                    + params
                        .iter()
                        .map(|&p| encode_parameter(p, self.opts.precision).map_or(0.0, |e| e.bits))
                        .sum::<f64>();
                TreeNode::Regression {
                    source: r.source,
                    order: *order,
                    params: params.clone(),
                    cost: bits,
                    child: Box::new(fresh(leaf.rows.clone(), Some(&residuals))),
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// The search loop
// ---------------------------------------------------------------------------

type Candidates = Vec<(usize, Option<Refinement>)>;

/// Greedy minimisation of `L(D, M)` over forests permitted by `class`.
pub fn crack(data: &Dataset, class: &ModelClass, opts: &SearchOptions) -> Result<SearchResult> {
    opts.validate()?;
    match opts.threads {
        Some(n) if n > 1 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CrackError::Config(e.to_string()))?;
            pool.install(|| run(data, class, opts))
        }
        _ => run(data, class, opts),
    }
}

fn run(data: &Dataset, class: &ModelClass, opts: &SearchOptions) -> Result<SearchResult> {
    if class.m() != data.m() {
        return Err(CrackError::Config(format!(
            "model class covers {} attributes, dataset has {}",
            class.m(),
            data.m()
        )));
    }
    let refiner = Refiner::new(data, opts);
    let serial = opts.threads == Some(1);
    warm_nml(data.n());
    let mut forest = trivial_forest(data);
    let trivial_cost = forest.cost();
    let mut next_id = data.m() as u64;
    let mut cache: BTreeMap<(usize, u64), Candidates> = BTreeMap::new();
    let mut trace = Vec::new();
    let targets: Vec<usize> = (0..data.m())
        .filter(|&i| !class.sources_of(i).is_empty())
        .collect();

    for iteration in 1..=opts.max_iterations {
        // score leaves not seen before
        let mut work: Vec<(usize, &Leaf, usize)> = Vec::new();
        for &i in &targets {
            let sources = class.sources_of(i);
            for (path, leaf) in forest.trees[i].leaves() {
                if leaf.residual || cache.contains_key(&(i, leaf.id)) {
                    continue;
                }
                work.extend(
                    sources
                        .iter()
                        .filter(|j| !path.contains(j))
                        .map(|&j| (i, leaf, j)),
                );
            }
        }
        let eval = |&(i, leaf, j): &(usize, &Leaf, usize)| {
            (i, leaf.id, j, refiner.refine_leaf(i, leaf, j))
        };
        let scored: Vec<_> = if serial {
            work.iter().map(eval).collect()
        } else {
            work.par_iter().map(eval).collect()
        };
        let mut fresh: BTreeMap<(usize, u64), Candidates> = BTreeMap::new();
        for &(i, leaf, _) in &work {
            fresh.entry((i, leaf.id)).or_default();
        }
        for (i, id, j, r) in scored {
            fresh.entry((i, id)).or_default().push((j, r));
        }
        cache.extend(fresh);

        let Some((key, choice)) = select(&forest, &cache) else {
            break;
        };
        let (i, leaf_id) = key;
        let leaf = forest.trees[i]
            .leaves()
            .into_iter()
            .find(|(_, l)| l.id == leaf_id)
            .map(|(_, l)| l.clone())
            .ok_or_else(|| {
                CrackError::Invariant(format!("leaf {leaf_id} vanished from tree {i}"))
            })?;
        let subtree = refiner.materialize(&choice, &leaf, &mut next_id);
        let gain = 1.0 + leaf.cost - subtree.subtree_cost();
        if gain <= 0.0 {
            // accumulated and two-pass statistics disagree; drop the candidate
            if let Some(c) = cache.get_mut(&key) {
                for (j, r) in c.iter_mut() {
                    if *j == choice.source {
                        *r = None;
                    }
                }
            }
            continue;
        }
        let before = forest.cost();
        let mut slot = Some(subtree);
        forest.trees[i].root.replace_leaf(leaf_id, &mut slot);
        forest.edges.insert((i, choice.source));
        cache.remove(&key);
        let total_cost = forest.cost();
        if total_cost >= before {
            return Err(CrackError::Invariant(format!(
                "refinement did not decrease L(D,M): {before} -> {total_cost}"
            )));
        }
        trace.push(TraceStep {
            iteration,
            target: i,
            source: choice.source,
            kind: choice.kind.label().to_string(),
            gain,
            total_cost,
        });
        log::debug!(
            "iteration {iteration}: tree {i} {} on {} saves {gain:.3} bits (L = {total_cost:.3})",
            choice.kind.label(),
            choice.source
        );
    }
    Ok(SearchResult {
        forest,
        trace,
        trivial_cost,
    })
}

/// Gain, target, source, leaf position and cache key of a candidate.
type Ranked<'a> = (Bits, usize, usize, usize, (usize, u64), &'a Refinement);

/// Globally best cached refinement whose edge keeps the graph acyclic.
/// Ties go to the lowest target, then source, then leaf position.
fn select(
    forest: &CodingForest,
    cache: &BTreeMap<(usize, u64), Candidates>,
) -> Option<((usize, u64), Refinement)> {
    let mut positions: BTreeMap<(usize, u64), usize> = BTreeMap::new();
    let mut best: Option<Ranked> = None;
    for (&(i, id), candidates) in cache {
        let pos = *positions.entry((i, id)).or_insert_with(|| {
            forest.trees[i]
                .leaves()
                .iter()
                .position(|(_, l)| l.id == id)
                .unwrap_or(usize::MAX)
        });
        for (j, r) in candidates {
            let Some(r) = r else { continue };
            let gain = r.gain();
            if gain <= MIN_GAIN || !forest.edge_keeps_acyclic(i, *j) {
                continue;
            }
            let better = match &best {
                None => true,
                Some((g, bi, bj, bp, _, _)) => {
                    gain > *g || (gain == *g && (i, *j, pos) < (*bi, *bj, *bp))
                }
            };
            if better {
                best = Some((gain, i, *j, pos, (i, id), r));
            }
        }
    }
    best.map(|(_, _, _, _, key, r)| (key, r.clone()))
}
