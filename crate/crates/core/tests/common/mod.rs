//! Oracles and property checks shared by the integration test targets.
//! Every check returns `Err` with a description of the first violation.
#![allow(dead_code)]

use std::collections::BTreeSet;

use crack::bench::{decision_rate, evaluate, PairResult, UndecidedPolicy};
use crack::codelength::nml_regret;
use crack::forest::{leaves_partition_rows, validate, TreeNode};
use crack::search::trivial_tree;
use crack::synth::{generate_pair, SyntheticSpec, TypeMode};
use crack::{
    crack, CausalVerdict, Dataset, Direction, Indicator, InferenceOptions, ModelClass,
    SearchOptions,
};

pub type Check = Result<(), String>;

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// `log2 Σ_h n!/(h_1!…h_k!) Π (h_i/n)^h_i` over every histogram `h` of `n`
/// rows in `k` cells, summed term by term.
pub fn brute_force_regret(n: usize, k: usize) -> f64 {
    fn walk(n: usize, left: usize, cells: usize, coef: f64, prob: f64, acc: &mut f64) {
        if cells == 1 {
            let p = if left == 0 {
                1.0
            } else {
                (left as f64 / n as f64).powi(left as i32)
            };
            *acc += coef / factorial(left) * prob * p;
            return;
        }
        for h in 0..=left {
            let p = if h == 0 {
                1.0
            } else {
                (h as f64 / n as f64).powi(h as i32)
            };
            walk(n, left - h, cells - 1, coef / factorial(h), prob * p, acc);
        }
    }
    if k == 0 {
        return 0.0;
    }
    let mut sum = 0.0;
    walk(n, n, k, factorial(n), 1.0, &mut sum);
    sum.log2()
}

pub fn check_nml_oracle(max_n: usize, max_k: usize, tol: f64) -> Check {
    for n in 0..=max_n {
        for k in 1..=max_k {
            let (fast, slow) = (nml_regret(n, k), brute_force_regret(n, k));
            if (fast - slow).abs() > tol {
                return Err(format!(
                    "n={n} k={k}: recurrence {fast} vs enumeration {slow}"
                ));
            }
        }
    }
    Ok(())
}

fn walk_nodes<'a>(node: &'a TreeNode, f: &mut impl FnMut(&'a TreeNode)) {
    f(node);
    for c in node.children() {
        walk_nodes(c, f);
    }
}

/// Depth-first cycle search over `target -> source` edges.
pub fn has_cycle(m: usize, edges: &BTreeSet<(usize, usize)>) -> bool {
    fn visit(v: usize, edges: &BTreeSet<(usize, usize)>, state: &mut [u8]) -> bool {
        state[v] = 1;
        for &(_, s) in edges.range((v, 0)..=(v, usize::MAX)) {
            if state[s] == 1 || (state[s] == 0 && visit(s, edges, state)) {
                return true;
            }
        }
        state[v] = 2;
        false
    }
    let mut state = vec![0u8; m];
    (0..m).any(|v| state[v] == 0 && visit(v, edges, &mut state))
}

/// Runs the search and checks every accepted step lowers the total cost,
/// the graph is acyclic, leaves partition the rows, all stored costs are
/// finite and non-negative, and the result never exceeds the trivial forest.
pub fn check_greedy_contract(data: &Dataset, class: &ModelClass, opts: &SearchOptions) -> Check {
    let result = crack(data, class, opts).map_err(|e| e.to_string())?;
    let trivial: f64 = (0..data.m()).map(|i| trivial_tree(data, i).cost()).sum();
    let tol = 1e-7 * trivial.max(1.0);
    if (trivial - result.trivial_cost).abs() > tol {
        return Err(format!(
            "trivial cost {} reported as {}",
            trivial, result.trivial_cost
        ));
    }
    let mut previous = trivial;
    for step in &result.trace {
        if step.total_cost.is_nan()
            || step.total_cost >= previous
            || step.gain.is_nan()
            || step.gain <= 0.0
        {
            return Err(format!(
                "step {} ({} on {}) did not lower the cost: {} -> {}",
                step.iteration, step.kind, step.source, previous, step.total_cost
            ));
        }
        if (previous - step.gain - step.total_cost).abs() > tol {
            return Err(format!(
                "step {} gain {} is inconsistent with totals",
                step.iteration, step.gain
            ));
        }
        previous = step.total_cost;
    }
    let cost = result.forest.cost();
    if (cost - previous).abs() > tol {
        return Err(format!(
            "forest cost {cost} differs from last trace total {previous}"
        ));
    }
    if cost > trivial + tol {
        return Err(format!("forest cost {cost} exceeds trivial cost {trivial}"));
    }
    let edges: BTreeSet<(usize, usize)> = result
        .forest
        .trees
        .iter()
        .flat_map(|t| t.sources().into_iter().map(move |s| (t.attribute, s)))
        .collect();
    if has_cycle(data.m(), &edges) {
        return Err(format!("dependency graph has a cycle: {edges:?}"));
    }
    if let Some(&(t, s)) = edges.iter().find(|&&(t, s)| !class.allows(t, s)) {
        return Err(format!("edge {t} <- {s} is outside the model class"));
    }
    validate(&result.forest, class, data).map_err(|v| format!("{v:?}"))?;
    if !leaves_partition_rows(&result.forest, data.n()) {
        return Err("leaves do not partition the rows".into());
    }
    let mut bad = None;
    for tree in &result.forest.trees {
        walk_nodes(&tree.root, &mut |node| {
            let c = node.own_cost();
            if !(c.is_finite() && c >= 0.0) {
                bad = Some(c);
            }
        });
    }
    if let Some(c) = bad {
        return Err(format!("node cost {c} is negative or not finite"));
    }
    Ok(())
}

/// Synthetic dataset `i` of a varied family used by the contract checks.
pub fn contract_dataset(i: usize) -> Dataset {
    let modes = [TypeMode::Nominal, TypeMode::Numeric, TypeMode::Mixed];
    let spec = SyntheticSpec {
        k: 1 + i % 3,
        l: 1 + (i / 3) % 3,
        n: 150 + 50 * (i % 4),
        phi: [0.0, 0.5, 1.0][i % 3],
        type_mode: modes[(i / 9) % 3],
        seed: 1000 + i as u64,
        ..SyntheticSpec::default()
    };
    generate_pair(&spec, i).expect("valid spec").dataset
}

/// Scores `data` and its X/Y swap with both indicators and checks the
/// decisions flip while scores and confidence carry over.
pub fn check_antisymmetry(data: &Dataset, opts: &InferenceOptions, tol: f64) -> Check {
    let indicators = [Indicator::Delta, Indicator::Nci];
    let (a, _) = evaluate(data, opts, &indicators).map_err(|e| e.to_string())?;
    let (b, _) = evaluate(&data.swapped(), opts, &indicators).map_err(|e| e.to_string())?;
    for (va, vb) in a.iter().zip(&b) {
        if vb.direction != va.direction.flipped() {
            return Err(format!(
                "{}: {} became {} after the swap",
                va.indicator, va.direction, vb.direction
            ));
        }
        if (va.confidence - vb.confidence).abs() > tol
            || (va.score_xy - vb.score_yx).abs() > tol
            || (va.score_yx - vb.score_xy).abs() > tol
        {
            return Err(format!(
                "{}: scores ({}, {}) vs swapped ({}, {})",
                va.indicator, va.score_xy, va.score_yx, vb.score_xy, vb.score_yx
            ));
        }
    }
    Ok(())
}

pub fn pair_result(confidence: f64, correct: bool, weight: f64) -> PairResult {
    PairResult {
        id: format!("c{confidence}"),
        truth: Direction::XtoY,
        verdict: CausalVerdict {
            indicator: Indicator::Nci,
            score_xy: 0.0,
            score_yx: confidence,
            direction: if correct {
                Direction::XtoY
            } else {
                Direction::YtoX
            },
            confidence,
            breakdown: Vec::new(),
            runtime_ms: 0.0,
            diagnostic: None,
        },
        weight,
        runtime_ms: 0.0,
    }
}

/// The two hand-computed decision-rate curves.
pub fn check_decision_rate_examples() -> Check {
    let three = [
        pair_result(3.0, true, 1.0),
        pair_result(2.0, false, 1.0),
        pair_result(1.0, true, 1.0),
    ];
    let curve = decision_rate(&three, UndecidedPolicy::Half).map_err(|e| e.to_string())?;
    let acc: Vec<f64> = curve.iter().map(|p| p.accuracy).collect();
    if acc != [1.0, 0.5, 2.0 / 3.0] {
        return Err(format!("unit-weight curve {acc:?}"));
    }
    let rates: Vec<f64> = curve.iter().map(|p| p.rate).collect();
    if rates != [1.0 / 3.0, 2.0 / 3.0, 1.0] {
        return Err(format!("unit-weight rates {rates:?}"));
    }
    let weighted = [pair_result(2.0, true, 2.0), pair_result(1.0, false, 1.0)];
    let curve = decision_rate(&weighted, UndecidedPolicy::Half).map_err(|e| e.to_string())?;
    let acc: Vec<f64> = curve.iter().map(|p| p.accuracy).collect();
    if acc != [1.0, 2.0 / 3.0] {
        return Err(format!("weighted curve {acc:?}"));
    }
    Ok(())
}
