//! Coding trees and forests, their dependency graph and how internal nodes
//! partition rows.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::codelength::{Bits, LeafStats, NumericEncoding};
use crate::data::{AttributeType, Dataset};

/// Condition of a binary split. Rows matching go to the left child.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitCondition {
    /// Numeric source: `value <= threshold`.
    Threshold(f64),
    /// Nominal source: `code == category`.
    Category(u32),
}

impl SplitCondition {
    #[inline]
    pub fn goes_left(&self, value: f64) -> bool {
        match *self {
            SplitCondition::Threshold(t) => value <= t,
            SplitCondition::Category(c) => value == f64::from(c),
        }
    }
}

/// Grouping of a multiway split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MultiwayKey {
    /// One child per listed category, in order.
    Categories(Vec<u32>),
    /// One child per listed value (each occurring at least `min_count`
    /// times in the leaf), plus a trailing residual child when
    /// `residual` is set.
    Values {
        min_count: u64,
        values: Vec<f64>,
        residual: bool,
    },
}

impl MultiwayKey {
    pub fn child_count(&self) -> usize {
        match self {
            MultiwayKey::Categories(c) => c.len(),
            MultiwayKey::Values {
                values, residual, ..
            } => values.len() + usize::from(*residual),
        }
    }

    /// Child index for a source value, or `None` if the value has no child.
    pub fn child_of(&self, value: f64) -> Option<usize> {
        match self {
            MultiwayKey::Categories(cats) => cats.iter().position(|&c| f64::from(c) == value),
            MultiwayKey::Values {
                values, residual, ..
            } => values
                .iter()
                .position(|&v| v == value)
                .or_else(|| residual.then_some(values.len())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegressionOrder {
    Linear,
    Quadratic,
}

impl RegressionOrder {
    pub fn parameter_count(self) -> usize {
        match self {
            RegressionOrder::Linear => 2,
            RegressionOrder::Quadratic => 3,
        }
    }

    /// Smallest leaf that may be regressed.
    pub fn min_rows(self) -> usize {
        match self {
            RegressionOrder::Linear => 4,
            RegressionOrder::Quadratic => 5,
        }
    }
}

/// Evaluates `alpha + beta x (+ gamma x^2)`.
#[inline]
pub fn polynomial(params: &[f64], x: f64) -> f64 {
    params.iter().rev().fold(0.0, |acc, &p| acc * x + p)
}

/// A leaf and the data it encodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Leaf {
    pub id: u64,
    pub rows: Vec<u32>,
    pub stats: LeafStats,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub encoding: Option<NumericEncoding>,
    pub cost: Bits,
    /// Holds regression residuals; such leaves are not refined further.
    #[serde(default)]
    pub residual: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf(Leaf),
    Split {
        source: usize,
        condition: SplitCondition,
        cost: Bits,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Multiway {
        source: usize,
        key: MultiwayKey,
        cost: Bits,
        children: Vec<TreeNode>,
    },
    Regression {
        source: usize,
        order: RegressionOrder,
        /// Parameters as encoded, lowest order first.
        params: Vec<f64>,
        cost: Bits,
        child: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn source(&self) -> Option<usize> {
        match self {
            TreeNode::Leaf(_) => None,
            TreeNode::Split { source, .. }
            | TreeNode::Multiway { source, .. }
            | TreeNode::Regression { source, .. } => Some(*source),
        }
    }

    pub fn children(&self) -> Vec<&TreeNode> {
        match self {
            TreeNode::Leaf(_) => Vec::new(),
            TreeNode::Split { left, right, .. } => vec![left, right],
            TreeNode::Multiway { children, .. } => children.iter().collect(),
            TreeNode::Regression { child, .. } => vec![child],
        }
    }

    fn children_mut(&mut self) -> Vec<&mut TreeNode> {
        match self {
            TreeNode::Leaf(_) => Vec::new(),
            TreeNode::Split { left, right, .. } => vec![left, right],
            TreeNode::Multiway { children, .. } => children.iter_mut().collect(),
            TreeNode::Regression { child, .. } => vec![child],
        }
    }

    /// Own cost: leaf data cost, or `L(v)` for internal nodes.
    pub fn own_cost(&self) -> Bits {
        match self {
            TreeNode::Leaf(l) => l.cost,
            TreeNode::Split { cost, .. }
            | TreeNode::Multiway { cost, .. }
            | TreeNode::Regression { cost, .. } => *cost,
        }
    }

    /// Contribution of this subtree to `L(T)`: one topology bit per node,
    /// one extra bit plus `L(v)` per internal node, and the leaf costs.
    pub fn subtree_cost(&self) -> Bits {
        match self {
            TreeNode::Leaf(l) => 1.0 + l.cost,
            node => {
                2.0 + node.own_cost()
                    + node
                        .children()
                        .iter()
                        .map(|c| c.subtree_cost())
                        .sum::<f64>()
            }
        }
    }

    pub fn node_count(&self) -> usize {
        1 + self
            .children()
            .iter()
            .map(|c| c.node_count())
            .sum::<usize>()
    }

    /// Visits leaves depth first with the source attributes on their path.
    pub fn visit_leaves<'a>(
        &'a self,
        path: &mut Vec<usize>,
        f: &mut impl FnMut(&[usize], &'a Leaf),
    ) {
        match self {
            TreeNode::Leaf(l) => f(path, l),
            node => {
                path.push(node.source().expect("internal node has a source"));
                for c in node.children() {
                    c.visit_leaves(path, f);
                }
                path.pop();
            }
        }
    }

    /// Replaces the leaf with the given id. Returns false if absent.
    pub fn replace_leaf(&mut self, id: u64, replacement: &mut Option<TreeNode>) -> bool {
        match self {
            TreeNode::Leaf(l) if l.id == id => {
                if let Some(node) = replacement.take() {
                    *self = node;
                }
                true
            }
            TreeNode::Leaf(_) => false,
            node => node
                .children_mut()
                .into_iter()
                .any(|c| c.replace_leaf(id, replacement)),
        }
    }
}

/// Row sets produced by routing through an internal node.
#[derive(Clone, Debug, PartialEq)]
pub struct Routed {
    pub children: Vec<Vec<u32>>,
    /// Regression only: target minus fitted value, aligned with the rows.
    pub residuals: Option<Vec<f64>>,
}

/// Routes `rows` through `node`.
/// `values` are the target values the node sees (original values, or
/// residuals below a regression) aligned with `rows`.
pub fn route(node: &TreeNode, data: &Dataset, rows: &[u32], values: &[f64]) -> Routed {
    match node {
        TreeNode::Leaf(_) => Routed {
            children: vec![rows.to_vec()],
            residuals: None,
        },
        TreeNode::Split {
            source, condition, ..
        } => {
            let a = data.attribute(*source);
            let (left, right): (Vec<u32>, Vec<u32>) = rows
                .iter()
                .partition(|&&r| condition.goes_left(a.value(r as usize)));
            Routed {
                children: vec![left, right],
                residuals: None,
            }
        }
        TreeNode::Multiway { source, key, .. } => {
            let a = data.attribute(*source);
            let mut children = vec![Vec::new(); key.child_count()];
            for &r in rows {
                if let Some(c) = key.child_of(a.value(r as usize)) {
                    children[c].push(r);
                }
            }
            Routed {
                children,
                residuals: None,
            }
        }
        TreeNode::Regression { source, params, .. } => {
            let a = data.attribute(*source);
            debug_assert_eq!(rows.len(), values.len());
            let residuals = rows
                .iter()
                .zip(values)
                .map(|(&r, &y)| y - polynomial(params, a.value(r as usize)))
                .collect();
            Routed {
                children: vec![rows.to_vec()],
                residuals: Some(residuals),
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodingTree {
    pub attribute: usize,
    pub root: TreeNode,
}

impl CodingTree {
    /// `L(T)` from the costs stored in the nodes.
    pub fn cost(&self) -> Bits {
        self.root.subtree_cost()
    }

    pub fn node_count(&self) -> usize {
        self.root.node_count()
    }

    pub fn is_trivial(&self) -> bool {
        matches!(self.root, TreeNode::Leaf(_))
    }

    /// Leaves in depth-first order with their path sources.
    pub fn leaves(&self) -> Vec<(Vec<usize>, &Leaf)> {
        let mut out = Vec::new();
        self.root
            .visit_leaves(&mut Vec::new(), &mut |p, l| out.push((p.to_vec(), l)));
        out
    }

    /// Distinct source attributes used anywhere in the tree.
    pub fn sources(&self) -> BTreeSet<usize> {
        fn walk(node: &TreeNode, out: &mut BTreeSet<usize>) {
            if let Some(s) = node.source() {
                out.insert(s);
            }
            node.children().into_iter().for_each(|c| walk(c, out));
        }
        let mut out = BTreeSet::new();
        walk(&self.root, &mut out);
        out
    }
}

/// One coding tree per attribute plus the dependency edges `(i, j)`,
/// meaning the tree of `i` splits or regresses on `j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodingForest {
    pub trees: Vec<CodingTree>,
    pub edges: BTreeSet<(usize, usize)>,
}

impl CodingForest {
    /// `L(D, M)`: the sum of the tree costs.
    pub fn cost(&self) -> Bits {
        self.trees.iter().map(CodingTree::cost).sum()
    }

    pub fn tree(&self, attribute: usize) -> &CodingTree {
        &self.trees[attribute]
    }

    /// Whether adding `(i, j)` keeps the dependency graph acyclic.
    pub fn edge_keeps_acyclic(&self, i: usize, j: usize) -> bool {
        if i == j {
            return false;
        }
        if self.edges.contains(&(i, j)) {
            return true;
        }
        // cycle iff j already (transitively) depends on i
        let mut stack = vec![j];
        let mut seen = BTreeSet::new();
        while let Some(v) = stack.pop() {
            if v == i {
                return false;
            }
            if seen.insert(v) {
                stack.extend(self.edges.range((v, 0)..=(v, usize::MAX)).map(|&(_, t)| t));
            }
        }
        true
    }
}

/// Permitted dependencies between attributes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelClass {
    m: usize,
    allowed: BTreeSet<(usize, usize)>,
}

impl ModelClass {
    /// No dependencies at all.
    pub fn independent(m: usize) -> Self {
        ModelClass {
            m,
            allowed: BTreeSet::new(),
        }
    }

    /// Each target may depend on any source, nothing else.
    pub fn conditioned(m: usize, targets: &[usize], sources: &[usize]) -> Self {
        let allowed = targets
            .iter()
            .flat_map(|&t| {
                sources
                    .iter()
                    .filter(move |&&s| s != t)
                    .map(move |&s| (t, s))
            })
            .collect();
        ModelClass { m, allowed }
    }

    /// The class for `Y | X` on a dataset.
    pub fn y_given_x(data: &Dataset) -> Self {
        Self::conditioned(data.m(), data.y_indices(), data.x_indices())
    }

    /// The class for `X | Y` on a dataset.
    pub fn x_given_y(data: &Dataset) -> Self {
        Self::conditioned(data.m(), data.x_indices(), data.y_indices())
    }

    /// Every pair of distinct attributes.
    pub fn unrestricted(m: usize) -> Self {
        let allowed = (0..m)
            .flat_map(|i| (0..m).filter(move |&j| j != i).map(move |j| (i, j)))
            .collect();
        ModelClass { m, allowed }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn allows(&self, i: usize, j: usize) -> bool {
        self.allowed.contains(&(i, j))
    }

    /// Sources attribute `i` may depend on, ascending.
    pub fn sources_of(&self, i: usize) -> Vec<usize> {
        self.allowed
            .range((i, 0)..=(i, usize::MAX))
            .map(|&(_, j)| j)
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.allowed.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    TreeCount { expected: usize, found: usize },
    TreeAttribute { position: usize, attribute: usize },
    Cycle { through: usize },
    Forbidden { target: usize, source: usize },
    MissingEdge { target: usize, source: usize },
    RepeatedSource { target: usize, source: usize },
    SelfDependency { target: usize },
    LeafType { target: usize, leaf: u64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TreeCount { expected, found } => {
                write!(f, "forest has {found} trees, expected {expected}")
            }
            Violation::TreeAttribute {
                position,
                attribute,
            } => {
                write!(
                    f,
                    "tree at position {position} encodes attribute {attribute}"
                )
            }
            Violation::Cycle { through } => {
                write!(
                    f,
                    "dependency graph has a cycle through attribute {through}"
                )
            }
            Violation::Forbidden { target, source } => {
                write!(
                    f,
                    "tree {target} depends on {source}, not permitted by the model class"
                )
            }
            Violation::MissingEdge { target, source } => {
                write!(f, "tree {target} uses {source} without a dependency edge")
            }
            Violation::RepeatedSource { target, source } => {
                write!(f, "tree {target} uses source {source} twice on one path")
            }
            Violation::SelfDependency { target } => write!(f, "tree {target} depends on itself"),
            Violation::LeafType { target, leaf } => {
                write!(
                    f,
                    "leaf {leaf} of tree {target} does not match the attribute type"
                )
            }
        }
    }
}

impl std::error::Error for Violation {}

/// Checks a forest against a model class: one tree per attribute, a DAG of
/// permitted edges, no source repeated along a root-to-leaf path, and leaf
/// statistics matching the attribute type.
pub fn validate(
    forest: &CodingForest,
    class: &ModelClass,
    data: &Dataset,
) -> Result<(), Violation> {
    if forest.trees.len() != data.m() {
        return Err(Violation::TreeCount {
            expected: data.m(),
            found: forest.trees.len(),
        });
    }
    for &(i, j) in &forest.edges {
        if i == j {
            return Err(Violation::SelfDependency { target: i });
        }
        if !class.allows(i, j) {
            return Err(Violation::Forbidden {
                target: i,
                source: j,
            });
        }
    }
    if let Some(v) = find_cycle(data.m(), &forest.edges) {
        return Err(Violation::Cycle { through: v });
    }
    for (pos, tree) in forest.trees.iter().enumerate() {
        if tree.attribute != pos {
            return Err(Violation::TreeAttribute {
                position: pos,
                attribute: tree.attribute,
            });
        }
        check_tree(tree, forest, data)?;
    }
    Ok(())
}

fn check_tree(tree: &CodingTree, forest: &CodingForest, data: &Dataset) -> Result<(), Violation> {
    let i = tree.attribute;
    let nominal = data.attribute(i).is_nominal();
    fn walk(
        node: &TreeNode,
        i: usize,
        nominal: bool,
        path: &mut Vec<usize>,
        edges: &BTreeSet<(usize, usize)>,
    ) -> Result<(), Violation> {
        match node {
            TreeNode::Leaf(l) => {
                let ok = matches!(
                    (&l.stats, nominal),
                    (LeafStats::Nominal { .. }, true) | (LeafStats::Numeric(_), false)
                );
                if ok {
                    Ok(())
                } else {
                    Err(Violation::LeafType {
                        target: i,
                        leaf: l.id,
                    })
                }
            }
            n => {
                let s = n.source().expect("internal");
                if s == i {
                    return Err(Violation::SelfDependency { target: i });
                }
                if path.contains(&s) {
                    return Err(Violation::RepeatedSource {
                        target: i,
                        source: s,
                    });
                }
                if !edges.contains(&(i, s)) {
                    return Err(Violation::MissingEdge {
                        target: i,
                        source: s,
                    });
                }
                path.push(s);
                for c in n.children() {
                    walk(c, i, nominal, path, edges)?;
                }
                path.pop();
                Ok(())
            }
        }
    }
    walk(&tree.root, i, nominal, &mut Vec::new(), &forest.edges)
}

/// Returns a vertex on a cycle, if any (Kahn's algorithm).
fn find_cycle(m: usize, edges: &BTreeSet<(usize, usize)>) -> Option<usize> {
    let mut indegree = vec![0usize; m];
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); m];
    for &(i, j) in edges {
        if i < m && j < m {
            out[j].push(i);
            indegree[i] += 1;
        }
    }
    let mut queue: Vec<usize> = (0..m).filter(|&v| indegree[v] == 0).collect();
    let mut removed = 0;
    while let Some(v) = queue.pop() {
        removed += 1;
        for &w in &out[v] {
            indegree[w] -= 1;
            if indegree[w] == 0 {
                queue.push(w);
            }
        }
    }
    (removed < m).then(|| (0..m).find(|&v| indegree[v] > 0).unwrap_or(0))
}

/// True when the leaves of every tree cover rows `0..n` exactly once.
pub fn leaves_partition_rows(forest: &CodingForest, n: usize) -> bool {
    forest.trees.iter().all(|t| {
        let mut seen = vec![false; n];
        let mut count = 0;
        for (_, leaf) in t.leaves() {
            for &r in &leaf.rows {
                let r = r as usize;
                if r >= n || seen[r] {
                    return false;
                }
                seen[r] = true;
                count += 1;
            }
        }
        count == n
    })
}

/// Dependency graph in Graphviz DOT. Edges point from the source attribute
/// to the attribute whose tree uses it.
pub fn export_dag(forest: &CodingForest, data: &Dataset) -> String {
    let mut side = BTreeMap::new();
    for &i in data.x_indices() {
        side.insert(i, "X");
    }
    for &i in data.y_indices() {
        side.insert(i, "Y");
    }
    let mut out = String::from("digraph crack {\n  rankdir=LR;\n");
    for (i, a) in data.attributes().iter().enumerate() {
        let group = side.get(&i).copied().unwrap_or("-");
        let shape = match a.kind {
            AttributeType::Numeric => "ellipse",
            _ => "box",
        };
        let _ = writeln!(
            out,
            "  a{i} [label=\"{}\", side=\"{group}\", shape={shape}];",
            a.name.replace('"', "\\\"")
        );
    }
    for &(i, j) in &forest.edges {
        let _ = writeln!(out, "  a{j} -> a{i};");
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Attribute;

    fn leaf(id: u64, rows: Vec<u32>) -> TreeNode {
        TreeNode::Leaf(Leaf {
            id,
            stats: LeafStats::Nominal {
                histogram: vec![rows.len(), 0],
            },
            rows,
            encoding: None,
            cost: 1.0,
            residual: false,
        })
    }

    fn dataset() -> Dataset {
        let attrs = vec![
            Attribute::nominal("x1", vec![0, 1, 2, 2], 3, vec![]).unwrap(),
            Attribute::nominal("x2", vec![0, 1, 0, 2], 3, vec![]).unwrap(),
            Attribute::nominal("y1", vec![0, 1, 1, 0], 2, vec![]).unwrap(),
            Attribute::nominal("y2", vec![1, 1, 0, 0], 2, vec![]).unwrap(),
        ];
        Dataset::new(attrs, vec![0, 1], vec![2, 3]).unwrap()
    }

    fn trivial_forest(d: &Dataset) -> CodingForest {
        CodingForest {
            trees: (0..d.m())
                .map(|i| CodingTree {
                    attribute: i,
                    root: leaf(i as u64, (0..d.n() as u32).collect()),
                })
                .collect(),
            edges: BTreeSet::new(),
        }
    }

    #[test]
    fn trivial_forest_valid_for_every_class() {
        let d = dataset();
        let f = trivial_forest(&d);
        for class in [
            ModelClass::independent(4),
            ModelClass::y_given_x(&d),
            ModelClass::x_given_y(&d),
            ModelClass::unrestricted(4),
        ] {
            assert_eq!(validate(&f, &class, &d), Ok(()));
        }
        assert!(leaves_partition_rows(&f, 4));
    }

    #[test]
    fn cycles_are_reported() {
        let d = dataset();
        let mut f = trivial_forest(&d);
        f.edges.insert((1, 2));
        f.edges.insert((2, 1));
        assert!(matches!(
            validate(&f, &ModelClass::unrestricted(4), &d),
            Err(Violation::Cycle { .. })
        ));
        f.edges.remove(&(2, 1));
        assert!(!f.edge_keeps_acyclic(2, 1));
        assert!(f.edge_keeps_acyclic(1, 2));
        assert!(f.edge_keeps_acyclic(3, 1));
    }

    #[test]
    fn y_on_y_is_forbidden() {
        let d = dataset();
        let mut f = trivial_forest(&d);
        f.trees[3].root = TreeNode::Split {
            source: 2,
            condition: SplitCondition::Category(0),
            cost: 1.0,
            left: Box::new(leaf(10, vec![0, 3])),
            right: Box::new(leaf(11, vec![1, 2])),
        };
        f.edges.insert((3, 2));
        assert_eq!(
            validate(&f, &ModelClass::y_given_x(&d), &d),
            Err(Violation::Forbidden {
                target: 3,
                source: 2
            })
        );
        assert_eq!(validate(&f, &ModelClass::unrestricted(4), &d), Ok(()));
    }

    #[test]
    fn repeated_path_source_and_missing_edge() {
        let d = dataset();
        let mut f = trivial_forest(&d);
        f.trees[2].root = TreeNode::Split {
            source: 0,
            condition: SplitCondition::Threshold(1.5),
            cost: 1.0,
            left: Box::new(leaf(10, vec![0])),
            right: Box::new(TreeNode::Split {
                source: 0,
                condition: SplitCondition::Threshold(3.5),
                cost: 1.0,
                left: Box::new(leaf(11, vec![1])),
                right: Box::new(leaf(12, vec![2, 3])),
            }),
        };
        let class = ModelClass::y_given_x(&d);
        assert_eq!(
            validate(&f, &class, &d),
            Err(Violation::MissingEdge {
                target: 2,
                source: 0
            })
        );
        f.edges.insert((2, 0));
        assert_eq!(
            validate(&f, &class, &d),
            Err(Violation::RepeatedSource {
                target: 2,
                source: 0
            })
        );
    }

    #[test]
    fn routing_single_split_midpoint() {
        let attrs = vec![
            Attribute::numeric_with_resolution("x", vec![1.0, 2.0], 1.0).unwrap(),
            Attribute::numeric_with_resolution("y", vec![0.0, 0.0], 1.0).unwrap(),
        ];
        let d = Dataset::new(attrs, vec![0], vec![1]).unwrap();
        let node = TreeNode::Split {
            source: 0,
            condition: SplitCondition::Threshold(1.5),
            cost: 0.0,
            left: Box::new(leaf(1, vec![])),
            right: Box::new(leaf(2, vec![])),
        };
        let r = route(&node, &d, &[0, 1], &[0.0, 0.0]);
        assert_eq!(r.children, vec![vec![0], vec![1]]);
        // ties go left
        assert!(SplitCondition::Threshold(2.0).goes_left(2.0));
    }

    #[test]
    fn routing_multiway_values() {
        let attrs = vec![
            Attribute::numeric_with_resolution("x", vec![5.0, 5.0, 7.0, 8.0], 1.0).unwrap(),
            Attribute::numeric_with_resolution("y", vec![0.0; 4], 1.0).unwrap(),
        ];
        let d = Dataset::new(attrs, vec![0], vec![1]).unwrap();
        let node = TreeNode::Multiway {
            source: 0,
            key: MultiwayKey::Values {
                min_count: 2,
                values: vec![5.0],
                residual: true,
            },
            cost: 0.0,
            children: vec![leaf(1, vec![]), leaf(2, vec![])],
        };
        let r = route(&node, &d, &[0, 1, 2, 3], &[0.0; 4]);
        assert_eq!(r.children, vec![vec![0, 1], vec![2, 3]]);
    }

    #[test]
    fn routing_regression_residuals() {
        let attrs = vec![
            Attribute::numeric_with_resolution("x", vec![1.0, 2.0], 1.0).unwrap(),
            Attribute::numeric_with_resolution("y", vec![2.0, 4.0], 1.0).unwrap(),
        ];
        let d = Dataset::new(attrs, vec![0], vec![1]).unwrap();
        let node = TreeNode::Regression {
            source: 0,
            order: RegressionOrder::Linear,
            params: vec![0.0, 2.0],
            cost: 0.0,
            child: Box::new(leaf(1, vec![])),
        };
        let r = route(&node, &d, &[0, 1], &[2.0, 4.0]);
        assert_eq!(r.residuals, Some(vec![0.0, 0.0]));
        assert_eq!(r.children, vec![vec![0, 1]]);
    }

    #[test]
    fn polynomial_eval() {
        assert_eq!(polynomial(&[1.0, 2.0, 3.0], 2.0), 1.0 + 4.0 + 12.0);
        assert_eq!(polynomial(&[0.5, -1.0], 3.0), -2.5);
    }

    #[test]
    fn dag_export_is_ordered() {
        let d = dataset();
        let mut f = trivial_forest(&d);
        let plain = export_dag(&f, &d);
        assert_eq!(plain.matches("->").count(), 0);
        assert_eq!(plain.matches("[label=").count(), 4);
        f.edges.insert((3, 1));
        f.edges.insert((2, 0));
        let dot = export_dag(&f, &d);
        let a = dot.find("a0 -> a2").unwrap();
        let b = dot.find("a1 -> a3").unwrap();
        assert!(a < b);
        assert_eq!(dot, export_dag(&f, &d));
    }

    #[test]
    fn multiway_cost_ignores_child_order() {
        let a = TreeNode::Multiway {
            source: 0,
            key: MultiwayKey::Categories(vec![0, 1]),
            cost: 2.5,
            children: vec![leaf(1, vec![0]), leaf(2, vec![1, 2])],
        };
        let b = TreeNode::Multiway {
            source: 0,
            key: MultiwayKey::Categories(vec![1, 0]),
            cost: 2.5,
            children: vec![leaf(2, vec![1, 2]), leaf(1, vec![0])],
        };
        assert_eq!(a.subtree_cost(), b.subtree_cost());
        assert_eq!(a.subtree_cost(), 2.0 + 2.5 + 2.0 * 2.0);
    }
}
