//! Synthetic cause-effect pairs with a known X -> Y ground truth.
//!
//! Each pair draws `k` source attributes for X. Every Y attribute then
//! flips one biased coin per X attribute; a success adds a dependency of a
//! kind compatible with the two attribute types. Y attributes without any
//! dependency are fresh, independent sources.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::causal::Direction;
use crate::data::{Attribute, Column, Dataset};
use crate::error::{CrackError, Result};

pub const MIN_CLASSES: u32 = 2;
pub const MAX_CLASSES: u32 = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TypeMode {
    Nominal,
    Numeric,
    Mixed,
}

impl FromStr for TypeMode {
    type Err = CrackError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "nominal" => Ok(TypeMode::Nominal),
            "numeric" => Ok(TypeMode::Numeric),
            "mixed" => Ok(TypeMode::Mixed),
            other => Err(CrackError::Config(format!(
                "unknown type mode `{other}` (expected nominal, numeric or mixed)"
            ))),
        }
    }
}

impl fmt::Display for TypeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TypeMode::Nominal => "nominal",
            TypeMode::Numeric => "numeric",
            TypeMode::Mixed => "mixed",
        })
    }
}

/// Generator configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    /// Number of X attributes.
    pub k: usize,
    /// Number of Y attributes.
    pub l: usize,
    pub n: usize,
    /// Probability of each X_i -> Y_j dependency.
    pub phi: f64,
    pub type_mode: TypeMode,
    pub seed: u64,
    /// Exponents for the sign-preserving power transform of numeric sources.
    pub q_values: Vec<f64>,
    /// Noise standard deviation relative to the standard deviation of f(X_i).
    pub noise_fraction: f64,
    /// Decimal places numeric values are recorded with; `None` keeps full
    /// precision.
    pub decimals: Option<u32>,
    /// Magnitude range of linear and quadratic coefficients; the sign is a
    /// fair coin.
    pub coef_range: (f64, f64),
    /// Leaf distributions of numeric targets are centred uniformly within
    /// `±group_location`.
    pub group_location: f64,
    /// Log-uniform range of the leaf distribution scales.
    pub group_scale: (f64, f64),
    /// Give the cause group `l` and the effect group `k` attributes on
    /// every other pair of indices (2, 3, 6, 7, ...).
    pub alternate_dimensions: bool,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            k: 3,
            l: 3,
            n: 5000,
            phi: 1.0,
            type_mode: TypeMode::Mixed,
            seed: 0,
            q_values: vec![0.5, 0.7, 1.5, 2.0],
            noise_fraction: 0.1,
            decimals: Some(1),
            coef_range: (0.5, 2.0),
            group_location: 0.2,
            group_scale: (0.05, 2.0),
            alternate_dimensions: true,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(CrackError::Config(msg));
        if self.k == 0 || self.l == 0 {
            return fail(format!(
                "k and l must be positive, got k={} l={}",
                self.k, self.l
            ));
        }
        if self.n == 0 {
            return fail("n must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.phi) {
            return fail(format!("phi must lie in [0, 1], got {}", self.phi));
        }
        if self.q_values.is_empty() || self.q_values.iter().any(|q| !(q.is_finite() && *q > 0.0)) {
            return fail("q values must be a non-empty list of positive numbers".into());
        }
        if !(self.noise_fraction.is_finite() && self.noise_fraction >= 0.0) {
            return fail(format!(
                "noise fraction must be non-negative, got {}",
                self.noise_fraction
            ));
        }
        let (lo, hi) = self.coef_range;
        if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
            return fail(format!(
                "coefficient range must satisfy 0 < lo <= hi, got ({lo}, {hi})"
            ));
        }
        if !(self.group_location.is_finite() && self.group_location >= 0.0) {
            return fail(format!(
                "group location must be non-negative, got {}",
                self.group_location
            ));
        }
        let (lo, hi) = self.group_scale;
        if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
            return fail(format!(
                "group scale range must satisfy 0 < lo <= hi, got ({lo}, {hi})"
            ));
        }
        if self.decimals.is_some_and(|d| d > 15) {
            return fail("at most 15 decimals can be recorded".into());
        }
        Ok(())
    }

    /// Rounds values to the recording precision.
    pub fn record(&self, mut values: Vec<f64>) -> Vec<f64> {
        if let Some(d) = self.decimals {
            let scale = 10f64.powi(d as i32);
            values
                .iter_mut()
                .for_each(|v| *v = (*v * scale).round() / scale);
        }
        values
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DependencyKind {
    Split,
    Multiway,
    Linear,
    Quadratic,
}

impl DependencyKind {
    /// Kinds that make sense for a source of type `source_nominal` feeding a
    /// target of type `target_nominal`.
    pub fn compatible(source_nominal: bool, target_nominal: bool) -> &'static [DependencyKind] {
        match (source_nominal, target_nominal) {
            (true, _) => &[DependencyKind::Split, DependencyKind::Multiway],
            (false, true) => &[DependencyKind::Split],
            (false, false) => &[
                DependencyKind::Split,
                DependencyKind::Linear,
                DependencyKind::Quadratic,
            ],
        }
    }
}

/// One generated edge, indexed within the cause and effect groups.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dependency {
    pub cause: usize,
    pub effect: usize,
    pub kind: DependencyKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Direction as presented in the dataset's X/Y partition.
    pub direction: Direction,
    /// Whether the effect group was presented as X.
    pub swapped: bool,
    pub dependencies: Vec<Dependency>,
}

#[derive(Clone, Debug)]
pub struct SyntheticPair {
    pub index: usize,
    pub dataset: Dataset,
    pub truth: GroundTruth,
}

/// Stream-separated RNG for one pair.
pub fn pair_rng(seed: u64, index: usize) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn draw_nominal_type(mode: TypeMode, rng: &mut impl Rng) -> bool {
    match mode {
        TypeMode::Nominal => true,
        TypeMode::Numeric => false,
        TypeMode::Mixed => rng.random_bool(0.5),
    }
}

fn make_nominal(name: String, codes: Vec<u32>, classes: u32) -> Result<Attribute> {
    let labels = (0..classes).map(|c| format!("v{c}")).collect();
    Attribute::nominal(name, codes, classes as usize, labels)
}

/// Draws one independent source attribute.
pub fn gen_source_attribute(
    spec: &SyntheticSpec,
    name: String,
    nominal: bool,
    rng: &mut impl Rng,
) -> Result<Attribute> {
    if nominal {
        let classes = rng.random_range(MIN_CLASSES..=MAX_CLASSES);
        let codes = (0..spec.n).map(|_| rng.random_range(0..classes)).collect();
        make_nominal(name, codes, classes)
    } else {
        let q = *spec.q_values.choose(rng).expect("validated non-empty");
        Attribute::numeric(name, spec.record(power_normal(spec.n, q, rng)))
    }
}

/// `sign(z)·|z|^q` for standard normal `z`.
pub fn power_normal(n: usize, q: f64, rng: &mut impl Rng) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            z.signum() * z.abs().powf(q)
        })
        .collect()
}

fn std_dev(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()
}

fn coefficient(spec: &SyntheticSpec, rng: &mut impl Rng) -> f64 {
    let (lo, hi) = spec.coef_range;
    let magnitude = if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    };
    if rng.random_bool(0.5) {
        magnitude
    } else {
        -magnitude
    }
}

/// Distribution of a numeric target within one leaf: a shifted and scaled
/// power-transformed normal.
#[derive(Clone, Copy, Debug)]
struct GroupLaw {
    location: f64,
    scale: f64,
    q: f64,
}

impl GroupLaw {
    fn draw(spec: &SyntheticSpec, rng: &mut impl Rng) -> Self {
        let m = spec.group_location;
        let (lo, hi) = spec.group_scale;
        GroupLaw {
            location: if m > 0.0 {
                rng.random_range(-m..m)
            } else {
                0.0
            },
            scale: rng.random_range(lo.ln()..=hi.ln()).exp(),
            q: *spec.q_values.choose(rng).expect("validated non-empty"),
        }
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        self.location + self.scale * z.signum() * z.abs().powf(self.q)
    }
}

/// Symmetric Dirichlet(1) draw as normalized unit exponentials.
fn flat_dirichlet(k: usize, rng: &mut impl Rng) -> Vec<f64> {
    let draws: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = draws.iter().sum();
    draws.into_iter().map(|d| d / total).collect()
}

/// One `a·x` or `a·x² + b·x` term of a regression leaf, over the leaf's rows.
#[derive(Clone, Debug)]
struct Term {
    x: Vec<f64>,
    a: f64,
    b: f64,
    quadratic: bool,
}

impl Term {
    fn draw(x: Vec<f64>, quadratic: bool, spec: &SyntheticSpec, rng: &mut impl Rng) -> Self {
        let a = coefficient(spec, rng);
        let b = if quadratic {
            coefficient(spec, rng)
        } else {
            0.0
        };
        Term { x, a, b, quadratic }
    }

    fn value(&self, k: usize) -> f64 {
        let x = self.x[k];
        if self.quadratic {
            self.a * x * x + self.b * x
        } else {
            self.a * x
        }
    }
}

#[derive(Clone, Debug)]
enum LeafLaw {
    Categorical(Vec<f64>),
    Numeric(GroupLaw),
    /// `offset + Σ terms + Gaussian noise`.
    Regression {
        offset: f64,
        terms: Vec<(usize, Term)>,
    },
}

#[derive(Clone, Debug)]
struct TargetLeaf {
    rows: Vec<usize>,
    law: LeafLaw,
}

fn regression_law(
    offset: f64,
    source_id: usize,
    source: &Attribute,
    rows: &[usize],
    quadratic: bool,
    spec: &SyntheticSpec,
    rng: &mut impl Rng,
) -> LeafLaw {
    let values = source.numeric_values().expect("numeric source");
    let x = rows.iter().map(|&r| values[r]).collect();
    LeafLaw::Regression {
        offset,
        terms: vec![(source_id, Term::draw(x, quadratic, spec, rng))],
    }
}

/// The regression of `leaf` restricted to `rows` (a subset of its rows),
/// with freshly drawn coefficients on the same sources.
fn redraw_regression(
    leaf: &TargetLeaf,
    rows: &[usize],
    spec: &SyntheticSpec,
    rng: &mut impl Rng,
) -> LeafLaw {
    let LeafLaw::Regression { terms, .. } = &leaf.law else {
        unreachable!("regression leaf");
    };
    LeafLaw::Regression {
        offset: coefficient(spec, rng),
        terms: terms
            .iter()
            .map(|(id, t)| {
                let x = rows
                    .iter()
                    .map(|r| t.x[leaf.rows.binary_search(r).expect("row of leaf")])
                    .collect();
                (*id, Term::draw(x, t.quadratic, spec, rng))
            })
            .collect(),
    }
}

/// Generative tree of one effect attribute. Dependencies are applied one at
/// a time to its largest leaf that is not yet a regression: a split or
/// multiway dependency partitions the leaf and gives every part a fresh,
/// independent distribution; a linear or quadratic dependency turns the leaf
/// into `f(X_i)` plus Gaussian noise. When every leaf already regresses, the
/// largest one is split on `X_i` and only one half regresses on it.
#[derive(Clone, Debug)]
pub struct TargetTree {
    classes: Option<u32>,
    leaves: Vec<TargetLeaf>,
}

impl TargetTree {
    /// A single leaf over `n` rows; `classes` is `Some` for nominal targets.
    pub fn new(n: usize, classes: Option<u32>, spec: &SyntheticSpec, rng: &mut impl Rng) -> Self {
        let mut tree = TargetTree {
            classes,
            leaves: Vec::new(),
        };
        let law = tree.fresh_law(spec, rng);
        tree.leaves.push(TargetLeaf {
            rows: (0..n).collect(),
            law,
        });
        tree
    }

    fn fresh_law(&self, spec: &SyntheticSpec, rng: &mut impl Rng) -> LeafLaw {
        match self.classes {
            Some(k) => LeafLaw::Categorical(flat_dirichlet(k as usize, rng)),
            None => LeafLaw::Numeric(GroupLaw::draw(spec, rng)),
        }
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves.len()
    }

    /// Largest leaf, preferring leaves that are not regressions.
    fn pick(&self) -> usize {
        let key = |l: &TargetLeaf| {
            let free = !matches!(l.law, LeafLaw::Regression { .. });
            (free, l.rows.len())
        };
        let mut best = 0;
        for (i, leaf) in self.leaves.iter().enumerate() {
            if key(leaf) > key(&self.leaves[best]) {
                best = i;
            }
        }
        best
    }

    /// Applies a dependency on `source` (whose index among the causes is
    /// `source_id`). Kinds incompatible with the types fall back to a split.
    pub fn apply(
        &mut self,
        source_id: usize,
        source: &Attribute,
        kind: DependencyKind,
        spec: &SyntheticSpec,
        rng: &mut impl Rng,
    ) {
        let kind = if DependencyKind::compatible(source.is_nominal(), self.classes.is_some())
            .contains(&kind)
        {
            kind
        } else {
            DependencyKind::Split
        };
        let index = self.pick();
        match kind {
            DependencyKind::Linear | DependencyKind::Quadratic => {
                let quadratic = kind == DependencyKind::Quadratic;
                if matches!(self.leaves[index].law, LeafLaw::Regression { .. }) {
                    self.split_regression(index, source_id, source, quadratic, spec, rng);
                    return;
                }
                let leaf = &mut self.leaves[index];
                let offset = match &leaf.law {
                    LeafLaw::Numeric(g) => g.location,
                    _ => 0.0,
                };
                leaf.law =
                    regression_law(offset, source_id, source, &leaf.rows, quadratic, spec, rng);
            }
            DependencyKind::Split | DependencyKind::Multiway => {
                let leaf = self.leaves.swap_remove(index);
                let parts = partition(&leaf.rows, source, kind, rng);
                if parts.len() < 2 {
                    self.leaves.push(leaf);
                    return;
                }
                for rows in parts {
                    let law = match &leaf.law {
                        LeafLaw::Regression { .. } => redraw_regression(&leaf, &rows, spec, rng),
                        _ => self.fresh_law(spec, rng),
                    };
                    self.leaves.push(TargetLeaf { rows, law });
                }
            }
        }
    }

    /// Splits regression leaf `index` on `source`: one part keeps a
    /// regression on the old sources, the other regresses on `source`.
    fn split_regression(
        &mut self,
        index: usize,
        source_id: usize,
        source: &Attribute,
        quadratic: bool,
        spec: &SyntheticSpec,
        rng: &mut impl Rng,
    ) {
        let mut parts = partition(&self.leaves[index].rows, source, DependencyKind::Split, rng);
        if parts.len() < 2 {
            return;
        }
        let leaf = self.leaves.swap_remove(index);
        let fresh = parts.swap_remove(rng.random_range(0..2));
        let kept = parts.pop().expect("two parts");
        let law = redraw_regression(&leaf, &kept, spec, rng);
        self.leaves.push(TargetLeaf { rows: kept, law });
        let law = regression_law(
            coefficient(spec, rng),
            source_id,
            source,
            &fresh,
            quadratic,
            spec,
            rng,
        );
        self.leaves.push(TargetLeaf { rows: fresh, law });
    }

    /// Samples the target column.
    pub fn realize(&self, n: usize, spec: &SyntheticSpec, rng: &mut impl Rng) -> Column {
        let mut codes = vec![0u32; n];
        let mut values = vec![0.0f64; n];
        for leaf in &self.leaves {
            match &leaf.law {
                LeafLaw::Categorical(probs) => {
                    for &r in &leaf.rows {
                        let u: f64 = rng.random();
                        let mut acc = 0.0;
                        let mut code = probs.len() as u32 - 1;
                        for (c, p) in probs.iter().enumerate() {
                            acc += p;
                            if u < acc {
                                code = c as u32;
                                break;
                            }
                        }
                        codes[r] = code;
                    }
                }
                LeafLaw::Numeric(law) => {
                    for &r in &leaf.rows {
                        values[r] = law.sample(rng);
                    }
                }
                LeafLaw::Regression { offset, terms } => {
                    let f: Vec<f64> = (0..leaf.rows.len())
                        .map(|k| terms.iter().map(|(_, t)| t.value(k)).sum())
                        .collect();
                    let sd = spec.noise_fraction * std_dev(&f);
                    for (&r, v) in leaf.rows.iter().zip(&f) {
                        let z: f64 = rng.sample(StandardNormal);
                        values[r] = offset + v + sd * z;
                    }
                }
            }
        }
        match self.classes {
            Some(k) => Column::Nominal {
                codes,
                labels: (0..k).map(|c| format!("v{c}")).collect(),
            },
            None => Column::Numeric(values),
        }
    }
}

/// Splits sorted `rows` by a category or split-point of `source`
/// (`Split`), or by every category present (`Multiway`).
fn partition(
    rows: &[usize],
    source: &Attribute,
    kind: DependencyKind,
    rng: &mut impl Rng,
) -> Vec<Vec<usize>> {
    match &source.column {
        Column::Nominal { codes, .. } => {
            let mut present: Vec<u32> = rows.iter().map(|&r| codes[r]).collect();
            present.sort_unstable();
            present.dedup();
            if kind == DependencyKind::Multiway {
                present
                    .iter()
                    .map(|&c| rows.iter().copied().filter(|&r| codes[r] == c).collect())
                    .collect()
            } else {
                let chosen = present[rng.random_range(0..present.len())];
                let (left, right): (Vec<usize>, Vec<usize>) =
                    rows.iter().partition(|&&r| codes[r] == chosen);
                vec![left, right]
                    .into_iter()
                    .filter(|p| !p.is_empty())
                    .collect()
            }
        }
        Column::Numeric(values) => {
            let mut sorted: Vec<f64> = rows.iter().map(|&r| values[r]).collect();
            sorted.sort_by(f64::total_cmp);
            let n = sorted.len();
            if n < 2 {
                return vec![rows.to_vec()];
            }
            let point = sorted[rng.random_range(n / 4..=(3 * n / 4).min(n - 2))];
            let (left, right): (Vec<usize>, Vec<usize>) =
                rows.iter().partition(|&&r| values[r] <= point);
            vec![left, right]
                .into_iter()
                .filter(|p| !p.is_empty())
                .collect()
        }
    }
}

/// Cause and effect group sizes of pair `index`.
pub fn group_sizes(spec: &SyntheticSpec, index: usize) -> (usize, usize) {
    if spec.alternate_dimensions && (index / 2) % 2 == 1 {
        (spec.l, spec.k)
    } else {
        (spec.k, spec.l)
    }
}

/// Generates pair `index` of a batch. Odd indices present the effect group
/// as X; see [`group_sizes`] for which group gets `k` attributes.
pub fn generate_pair(spec: &SyntheticSpec, index: usize) -> Result<SyntheticPair> {
    spec.validate()?;
    let mut rng = pair_rng(spec.seed, index);
    let (k, l) = group_sizes(spec, index);
    let mut causes = Vec::with_capacity(k);
    for i in 0..k {
        let nominal = draw_nominal_type(spec.type_mode, &mut rng);
        causes.push(gen_source_attribute(
            spec,
            format!("c{i}"),
            nominal,
            &mut rng,
        )?);
    }
    let mut effects = Vec::with_capacity(l);
    let mut dependencies = Vec::new();
    for j in 0..l {
        let nominal = draw_nominal_type(spec.type_mode, &mut rng);
        let mut parents = Vec::new();
        for (i, cause) in causes.iter().enumerate() {
            if rng.random_bool(spec.phi) {
                let kind = *DependencyKind::compatible(cause.is_nominal(), nominal)
                    .choose(&mut rng)
                    .expect("non-empty");
                let kind = if kind == DependencyKind::Multiway && cause.category_count <= 2 {
                    DependencyKind::Split
                } else {
                    kind
                };
                dependencies.push(Dependency {
                    cause: i,
                    effect: j,
                    kind,
                });
                parents.push((i, cause, kind));
            }
        }
        let name = format!("e{j}");
        let attr = if parents.is_empty() {
            gen_source_attribute(spec, name, nominal, &mut rng)?
        } else {
            let classes = nominal.then(|| rng.random_range(MIN_CLASSES..=MAX_CLASSES));
            let mut tree = TargetTree::new(spec.n, classes, spec, &mut rng);
            parents.sort_by_key(|&(_, _, kind)| {
                matches!(kind, DependencyKind::Linear | DependencyKind::Quadratic)
            });
            for (i, cause, kind) in parents {
                tree.apply(i, cause, kind, spec, &mut rng);
            }
            match (tree.realize(spec.n, spec, &mut rng), classes) {
                (Column::Nominal { codes, .. }, Some(k)) => make_nominal(name, codes, k)?,
                (Column::Numeric(values), _) => Attribute::numeric(name, spec.record(values))?,
                _ => unreachable!("realized column matches the target type"),
            }
        };
        effects.push(attr);
    }

    let swapped = index % 2 == 1;
    let (first, second, direction) = if swapped {
        (effects, causes, Direction::YtoX)
    } else {
        (causes, effects, Direction::XtoY)
    };
    let split = first.len();
    let attributes: Vec<Attribute> = first.into_iter().chain(second).collect();
    let dataset = Dataset::from_split(attributes, split)?;
    Ok(SyntheticPair {
        index,
        dataset,
        truth: GroundTruth {
            direction,
            swapped,
            dependencies,
        },
    })
}

/// Generates `count` pairs in parallel; the result is ordered by index and
/// does not depend on the number of worker threads.
pub fn generate_batch(spec: &SyntheticSpec, count: usize) -> Result<Vec<SyntheticPair>> {
    spec.validate()?;
    (0..count)
        .into_par_iter()
        .map(|i| generate_pair(spec, i))
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Sidecar {
    pub spec: SyntheticSpec,
    pub index: usize,
    pub seed: u64,
    pub x: Vec<usize>,
    pub y: Vec<usize>,
    pub types: String,
    pub ground_truth: GroundTruth,
}

/// Writes `pair_NNNN.csv` and `pair_NNNN.json` into `dir` and returns the
/// CSV path.
pub fn write_pair(dir: &Path, spec: &SyntheticSpec, pair: &SyntheticPair) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| CrackError::io(dir, e))?;
    let stem = format!("pair_{:04}", pair.index);
    let csv_path = dir.join(format!("{stem}.csv"));
    let data = &pair.dataset;
    let mut writer = csv::Writer::from_path(&csv_path)?;
    writer.write_record(data.attributes().iter().map(|a| a.name.as_str()))?;
    let mut record = Vec::with_capacity(data.m());
    for row in 0..data.n() {
        record.clear();
        for a in data.attributes() {
            record.push(match &a.column {
                Column::Nominal { codes, labels } => labels[codes[row] as usize].clone(),
                Column::Numeric(v) => v[row].to_string(),
            });
        }
        writer.write_record(&record)?;
    }
    writer.flush().map_err(|e| CrackError::io(&csv_path, e))?;

    let sidecar = Sidecar {
        spec: spec.clone(),
        index: pair.index,
        seed: spec.seed,
        x: data.x_indices().to_vec(),
        y: data.y_indices().to_vec(),
        types: data.attributes().iter().map(|a| a.kind.code()).collect(),
        ground_truth: pair.truth.clone(),
    };
    let json_path = dir.join(format!("{stem}.json"));
    let text = serde_json::to_string_pretty(&sidecar)?;
    fs::write(&json_path, text).map_err(|e| CrackError::io(&json_path, e))?;
    Ok(csv_path)
}
