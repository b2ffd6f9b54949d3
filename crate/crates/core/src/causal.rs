//! Causal indicators built on the coding-forest score.
//!
//! Both directions are searched: `Y | X` (the trees of Y may use X) and
//! `X | Y`. The total-compression indicator compares
//! `(L(X) + L(Y | X)) / (L(X) + L(Y))` against its mirror; the normalized
//! indicator averages per-attribute ratios `L(Y_i | X) / L(Y_i)` so that
//! attributes with large domains or many siblings do not dominate.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::codelength::{leaf_nominal, Bits};
use crate::data::{Attribute, Dataset, Side};
use crate::error::{CrackError, Result};
use crate::forest::{CodingForest, ModelClass};
use crate::search::{crack, make_leaf, trivial_tree, SearchOptions, TraceStep};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Indicator {
    /// Relative total compression.
    Delta,
    /// Normalized causal indicator (mean per-attribute ratio).
    Nci,
}

impl FromStr for Indicator {
    type Err = CrackError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "delta" => Ok(Indicator::Delta),
            "nci" => Ok(Indicator::Nci),
            other => Err(CrackError::Config(format!("unknown indicator `{other}`"))),
        }
    }
}

impl fmt::Display for Indicator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Indicator::Delta => "delta",
            Indicator::Nci => "nci",
        })
    }
}

/// How the unconditioned cost `L(a)` of an attribute is measured.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarginalMode {
    /// Numeric: uniform code over the resolution grid, `n log2 |D(a)|`.
    Domain,
    /// Numeric: `-n log2 res(a)`.
    Res,
    /// Every attribute: cost of its single-leaf coding tree.
    Tree,
}

impl FromStr for MarginalMode {
    type Err = CrackError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "domain" => Ok(MarginalMode::Domain),
            "res" => Ok(MarginalMode::Res),
            "tree" => Ok(MarginalMode::Tree),
            other => Err(CrackError::Config(format!("unknown marginal `{other}`"))),
        }
    }
}

impl fmt::Display for MarginalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MarginalMode::Domain => "domain",
            MarginalMode::Res => "res",
            MarginalMode::Tree => "tree",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "X->Y")]
    XtoY,
    #[serde(rename = "Y->X")]
    YtoX,
    #[serde(rename = "inconclusive")]
    Inconclusive,
}

impl Direction {
    pub fn flipped(self) -> Direction {
        match self {
            Direction::XtoY => Direction::YtoX,
            Direction::YtoX => Direction::XtoY,
            Direction::Inconclusive => Direction::Inconclusive,
        }
    }

    pub fn is_decided(self) -> bool {
        self != Direction::Inconclusive
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::XtoY => "X->Y",
            Direction::YtoX => "Y->X",
            Direction::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InferenceOptions {
    pub indicator: Indicator,
    /// Minimum score gap for a decision.
    pub epsilon: f64,
    pub marginal: MarginalMode,
    pub search: SearchOptions,
}

impl Default for InferenceOptions {
    fn default() -> Self {
        InferenceOptions {
            indicator: Indicator::Nci,
            epsilon: 0.0,
            marginal: MarginalMode::Tree,
            search: SearchOptions::default(),
        }
    }
}

impl InferenceOptions {
    pub fn validate(&self) -> Result<()> {
        if !self.epsilon.is_finite() || self.epsilon < 0.0 {
            return Err(CrackError::Config(format!(
                "epsilon must be finite and non-negative, got {}",
                self.epsilon
            )));
        }
        self.search.validate()
    }
}

/// Unconditioned cost of one attribute.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Marginal {
    pub bits: Bits,
    /// Constant attributes carry no information and are left out of the scores.
    pub excluded: bool,
}

pub fn marginal_cost(a: &Attribute, n: usize, mode: MarginalMode) -> Marginal {
    if a.constant {
        return Marginal {
            bits: 0.0,
            excluded: true,
        };
    }
    let nf = n as f64;
    let bits = if a.is_nominal() {
        1.0 + leaf_nominal(&a.histogram(), a.category_count)
    } else {
        match mode {
            MarginalMode::Domain => nf * a.domain_size().log2(),
            MarginalMode::Res => -nf * a.resolution.log2(),
            MarginalMode::Tree => 1.0 + make_leaf(a, 0, (0..n as u32).collect(), None).cost,
        }
    };
    Marginal {
        bits,
        excluded: false,
    }
}

/// Result of one directed search: the costs of the target side's trees.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Conditional {
    /// Side whose trees were allowed to depend on the other side.
    pub target: Side,
    pub total: Bits,
    pub per_attribute: Vec<(usize, Bits)>,
    pub forest: CodingForest,
    pub trace: Vec<TraceStep>,
}

/// Runs the search for `target | other side` and sums the target trees.
pub fn conditional_cost(
    data: &Dataset,
    target: Side,
    search: &SearchOptions,
) -> Result<Conditional> {
    let targets = data.project(target)?.indices().to_vec();
    let sources = data.project(target.other())?.indices().to_vec();
    let class = ModelClass::conditioned(data.m(), &targets, &sources);
    let result = crack(data, &class, search)?;
    let per_attribute: Vec<(usize, Bits)> = targets
        .iter()
        .map(|&i| (i, result.forest.tree(i).cost()))
        .collect();
    Ok(Conditional {
        target,
        total: per_attribute.iter().map(|(_, b)| b).sum(),
        per_attribute,
        forest: result.forest,
        trace: result.trace,
    })
}

/// Everything both indicators need.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub marginals: Vec<Marginal>,
    /// `Y | X`.
    pub y_given_x: Conditional,
    /// `X | Y`.
    pub x_given_y: Conditional,
    x: Vec<usize>,
    y: Vec<usize>,
}

impl Analysis {
    pub fn run(data: &Dataset, opts: &InferenceOptions) -> Result<Self> {
        opts.validate()?;
        data.project(Side::X)?;
        data.project(Side::Y)?;
        let marginals = data
            .attributes()
            .iter()
            .map(|a| marginal_cost(a, data.n(), opts.marginal))
            .collect();
        let (y_given_x, x_given_y) = if opts.search.threads == Some(1) {
            (
                conditional_cost(data, Side::Y, &opts.search)?,
                conditional_cost(data, Side::X, &opts.search)?,
            )
        } else {
            let (a, b) = rayon::join(
                || conditional_cost(data, Side::Y, &opts.search),
                || conditional_cost(data, Side::X, &opts.search),
            );
            (a?, b?)
        };
        let analysis = Analysis {
            marginals,
            y_given_x,
            x_given_y,
            x: data.x_indices().to_vec(),
            y: data.y_indices().to_vec(),
        };
        analysis.check_bounds(data);
        Ok(analysis)
    }

    fn conditional_of(&self, attribute: usize) -> Option<Bits> {
        self.y_given_x
            .per_attribute
            .iter()
            .chain(&self.x_given_y.per_attribute)
            .find(|(i, _)| *i == attribute)
            .map(|&(_, b)| b)
    }

    fn check_bounds(&self, data: &Dataset) {
        for (i, m) in self.marginals.iter().enumerate() {
            if m.excluded {
                continue;
            }
            let Some(c) = self.conditional_of(i) else {
                continue;
            };
            let trivial = trivial_tree(data, i).cost();
            if trivial <= m.bits + 1e-9 && c > m.bits + 1e-9 {
                log::warn!(
                    "attribute {i}: conditional cost {c:.3} exceeds marginal {:.3}",
                    m.bits
                );
            }
        }
    }

    fn side(&self, side: Side) -> &[usize] {
        match side {
            Side::X => &self.x,
            Side::Y => &self.y,
        }
    }

    fn marginal_sum(&self, side: Side) -> Bits {
        self.side(side)
            .iter()
            .filter(|&&i| !self.marginals[i].excluded)
            .map(|&i| self.marginals[i].bits)
            .sum()
    }

    fn conditional_sum(&self, side: Side) -> Bits {
        self.side(side)
            .iter()
            .filter(|&&i| !self.marginals[i].excluded)
            .filter_map(|&i| self.conditional_of(i))
            .sum()
    }

    /// `(Delta_{X->Y}, Delta_{Y->X})`.
    pub fn delta(&self) -> Result<(f64, f64)> {
        let (mx, my) = (self.marginal_sum(Side::X), self.marginal_sum(Side::Y));
        let denom = mx + my;
        if denom.is_nan() || denom <= 0.0 {
            return Err(CrackError::Degenerate(
                "all attributes are constant; the marginal total is zero".into(),
            ));
        }
        let xy = (mx + self.conditional_sum(Side::Y)) / denom;
        let yx = (my + self.conditional_sum(Side::X)) / denom;
        Ok((xy, yx))
    }

    fn mean_ratio(&self, side: Side) -> Result<f64> {
        let ratios: Vec<f64> = self
            .side(side)
            .iter()
            .filter(|&&i| !self.marginals[i].excluded && self.marginals[i].bits > 0.0)
            .filter_map(|&i| self.conditional_of(i).map(|c| c / self.marginals[i].bits))
            .collect();
        if ratios.is_empty() {
            return Err(CrackError::Degenerate(format!(
                "{} has no non-constant attribute",
                side.label()
            )));
        }
        Ok(ratios.iter().sum::<f64>() / ratios.len() as f64)
    }

    /// `(delta_{X->Y}, delta_{Y->X})`.
    pub fn nci(&self) -> Result<(f64, f64)> {
        Ok((self.mean_ratio(Side::Y)?, self.mean_ratio(Side::X)?))
    }

    pub fn scores(&self, indicator: Indicator) -> Result<(f64, f64)> {
        match indicator {
            Indicator::Delta => self.delta(),
            Indicator::Nci => self.nci(),
        }
    }

    pub fn breakdown(&self, data: &Dataset) -> Vec<AttributeCost> {
        let mut out = Vec::new();
        for side in [Side::X, Side::Y] {
            for &i in self.side(side) {
                out.push(AttributeCost {
                    attribute: i,
                    name: data.attribute(i).name.clone(),
                    side,
                    marginal: self.marginals[i].bits,
                    conditional: self.conditional_of(i).unwrap_or(0.0),
                    excluded: self.marginals[i].excluded,
                });
            }
        }
        out
    }
}

/// Convenience wrappers over [`Analysis`].
pub fn score_delta(data: &Dataset, opts: &InferenceOptions) -> Result<(f64, f64)> {
    Analysis::run(data, opts)?.delta()
}

pub fn score_nci(data: &Dataset, opts: &InferenceOptions) -> Result<(f64, f64)> {
    Analysis::run(data, opts)?.nci()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributeCost {
    pub attribute: usize,
    pub name: String,
    pub side: Side,
    pub marginal: Bits,
    pub conditional: Bits,
    pub excluded: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CausalVerdict {
    pub indicator: Indicator,
    pub score_xy: f64,
    pub score_yx: f64,
    pub direction: Direction,
    pub confidence: f64,
    pub breakdown: Vec<AttributeCost>,
    pub runtime_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

/// X->Y when `score_xy < score_yx - epsilon`, Y->X for the mirror case,
/// inconclusive otherwise. Confidence is the absolute score gap.
pub fn decide(score_xy: f64, score_yx: f64, epsilon: f64) -> (Direction, f64) {
    let confidence = (score_xy - score_yx).abs();
    let direction = if score_xy < score_yx - epsilon {
        Direction::XtoY
    } else if score_yx < score_xy - epsilon {
        Direction::YtoX
    } else {
        Direction::Inconclusive
    };
    (direction, confidence)
}

/// Builds a verdict from an analysis.
pub fn verdict(
    analysis: &Analysis,
    data: &Dataset,
    opts: &InferenceOptions,
    runtime_ms: f64,
) -> CausalVerdict {
    let breakdown = analysis.breakdown(data);
    match analysis.scores(opts.indicator) {
        Ok((xy, yx)) => {
            let (direction, confidence) = decide(xy, yx, opts.epsilon);
            CausalVerdict {
                indicator: opts.indicator,
                score_xy: xy,
                score_yx: yx,
                direction,
                confidence,
                breakdown,
                runtime_ms,
                diagnostic: None,
            }
        }
        Err(e) => CausalVerdict {
            indicator: opts.indicator,
            score_xy: 0.0,
            score_yx: 0.0,
            direction: Direction::Inconclusive,
            confidence: 0.0,
            breakdown,
            runtime_ms,
            diagnostic: Some(e.to_string()),
        },
    }
}

/// Infers the causal direction between the X and Y sides of `data`.
pub fn infer(data: &Dataset, opts: &InferenceOptions) -> Result<CausalVerdict> {
    let start = Instant::now();
    let analysis = Analysis::run(data, opts)?;
    let ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(verdict(&analysis, data, opts, ms))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decide_examples() {
        let (d, c) = decide(0.8, 0.9, 0.0);
        assert_eq!(d, Direction::XtoY);
        assert!((c - 0.1).abs() < 1e-12);
        assert_eq!(decide(0.85, 0.85, 0.0).0, Direction::Inconclusive);
        assert_eq!(decide(0.84, 0.86, 0.05).0, Direction::Inconclusive);
        assert_eq!(decide(0.9, 0.8, 0.0).0, Direction::YtoX);
    }

    #[test]
    fn marginal_examples() {
        let a = Attribute::numeric_with_resolution(
            "a",
            (0..100).map(|i| i as f64 / 99.0).collect(),
            0.01,
        )
        .unwrap();
        assert!((a.domain_size() - 101.0).abs() < 1e-9);
        let m = marginal_cost(&a, 100, MarginalMode::Domain);
        assert!((m.bits - 665.8).abs() < 0.1, "{}", m.bits);
        let m = marginal_cost(&a, 100, MarginalMode::Res);
        assert!((m.bits - 100.0 * 100f64.log2()).abs() < 1e-9);

        let codes: Vec<u32> = (0..100).map(|i| i % 2).collect();
        let b = Attribute::nominal("b", codes, 2, vec![]).unwrap();
        let m = marginal_cost(&b, 100, MarginalMode::Domain);
        let expected = 1.0 + 100.0 + crate::codelength::nml_regret(100, 2);
        assert!((m.bits - expected).abs() < 1e-9);

        let c = Attribute::numeric_with_resolution("c", vec![4.0; 10], 1.0).unwrap();
        let m = marginal_cost(&c, 10, MarginalMode::Domain);
        assert_eq!((m.bits, m.excluded), (0.0, true));
    }

    #[test]
    fn tree_marginal_matches_trivial_tree() {
        let a =
            Attribute::numeric_with_resolution("a", vec![0.0, 1.0, 1.0, 3.0, 7.0], 1.0).unwrap();
        let d = Dataset::new(vec![a.clone()], vec![0], vec![]).unwrap();
        let m = marginal_cost(&a, 5, MarginalMode::Tree);
        assert_eq!(m.bits, trivial_tree(&d, 0).cost());
    }

    #[test]
    fn indicator_parsing() {
        assert_eq!("NCI".parse::<Indicator>().unwrap(), Indicator::Nci);
        assert!("foo".parse::<Indicator>().is_err());
        assert_eq!("tree".parse::<MarginalMode>().unwrap(), MarginalMode::Tree);
    }
}
