//! Code lengths, in bits, for every part of a coding forest: integers,
//! nominal leaves (NML), numeric leaves (Gaussian or uniform), and split or
//! regression nodes.

use std::cell::RefCell;
use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::data::{Attribute, AttributeType};

/// Code length in bits.
pub type Bits = f64;

/// Normalising constant of Rissanen's universal prior for integers.
pub const UNIVERSAL_C0: f64 = 2.865064;

/// Default precision used when encoding regression parameters.
pub const DEFAULT_PRECISION: f64 = 0.001;

/// Length of the universal code for an integer `z >= 1`:
/// `log2(c0) + log2 z + log2 log2 z + ...` over the positive terms.
pub fn universal_int(z: u64) -> Bits {
    assert!(z >= 1, "universal_int is defined for z >= 1, got {z}");
    universal_real(z as f64)
}

/// [`universal_int`] for integers that may not fit in a `u64`.
pub(crate) fn universal_real(z: f64) -> Bits {
    debug_assert!(z >= 1.0);
    let mut bits = UNIVERSAL_C0.log2();
    let mut term = z.log2();
    while term > 0.0 {
        bits += term;
        term = term.log2();
    }
    bits
}

// ---------------------------------------------------------------------------
// NML regret for multinomials
// ---------------------------------------------------------------------------

/// Natural-log tables for the binomial normaliser, grown on demand. One per
/// thread, so lookups never contend.
#[derive(Default)]
struct NmlTable {
    ln_fact: Vec<f64>,
    /// ln C(n, 2)
    ln_c2: Vec<f64>,
}

impl NmlTable {
    fn ensure(&mut self, n: usize) {
        if self.ln_fact.is_empty() {
            self.ln_fact.push(0.0);
        }
        while self.ln_fact.len() <= n {
            let i = self.ln_fact.len();
            let prev = self.ln_fact[i - 1];
            self.ln_fact.push(prev + (i as f64).ln());
        }
        while self.ln_c2.len() <= n {
            let m = self.ln_c2.len();
            let value = ln_binary_normalizer(m, &self.ln_fact);
            self.ln_c2.push(value);
        }
    }
}

/// ln of `sum_h binom(n,h) (h/n)^h ((n-h)/n)^(n-h)`.
fn ln_binary_normalizer(n: usize, ln_fact: &[f64]) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let nf = n as f64;
    let ln_n = nf.ln();
    let terms: Vec<f64> = (0..=n)
        .map(|h| {
            let (hf, rf) = (h as f64, (n - h) as f64);
            let mut t = ln_fact[n] - ln_fact[h] - ln_fact[n - h];
            if h > 0 {
                t += hf * (hf.ln() - ln_n);
            }
            if h < n {
                t += rf * (rf.ln() - ln_n);
            }
            t
        })
        .collect();
    log_sum_exp(&terms)
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

fn ln_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

thread_local! {
    static NML: RefCell<NmlTable> = RefCell::new(NmlTable::default());
}

/// log2 of the multinomial NML normaliser `C(n, k)`.
///
/// `C(n,2)` is summed directly; larger `k` use the linear recurrence
/// `C(n,k) = C(n,k-1) + n/(k-2) * C(n,k-2)`. Evaluated in log space so large
/// category counts do not overflow.
pub fn nml_regret(n: usize, k: usize) -> Bits {
    if n == 0 || k <= 1 {
        return 0.0;
    }
    let ln_c2 = NML.with(|t| {
        let mut t = t.borrow_mut();
        t.ensure(n);
        t.ln_c2[n]
    });
    if k == 2 {
        return ln_c2 / LN_2;
    }
    let ln_n = (n as f64).ln();
    let (mut prev, mut cur) = (0.0_f64, ln_c2);
    for j in 3..=k {
        let next = ln_add_exp(cur, ln_n - ((j - 2) as f64).ln() + prev);
        prev = cur;
        cur = next;
    }
    cur / LN_2
}

/// Pre-fills this thread's normaliser table up to `n` records.
pub fn warm_nml(n: usize) {
    NML.with(|t| t.borrow_mut().ensure(n));
}

// ---------------------------------------------------------------------------
// Leaves
// ---------------------------------------------------------------------------

/// Sufficient statistics of a numeric leaf.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NumericStats {
    pub count: usize,
    pub mean: f64,
    /// Maximum-likelihood variance (divides by `count`).
    pub variance: f64,
    pub min: f64,
    pub max: f64,
}

impl NumericStats {
    pub const EMPTY: NumericStats = NumericStats {
        count: 0,
        mean: 0.0,
        variance: 0.0,
        min: 0.0,
        max: 0.0,
    };

    pub fn from_values(values: &[f64]) -> Self {
        Self::from_samples(values.iter().copied())
    }

    pub fn from_samples<I: IntoIterator<Item = f64> + Clone>(values: I) -> Self {
        let mut count = 0usize;
        let mut sum = 0.0;
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for v in values.clone() {
            count += 1;
            sum += v;
            min = min.min(v);
            max = max.max(v);
        }
        if count == 0 {
            return Self::EMPTY;
        }
        let mean = sum / count as f64;
        let variance = values
            .into_iter()
            .map(|v| (v - mean) * (v - mean))
            .sum::<f64>()
            / count as f64;
        NumericStats {
            count,
            mean,
            variance,
            min,
            max,
        }
    }
}

/// Sufficient statistics of a leaf.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum LeafStats {
    Nominal { histogram: Vec<usize> },
    Numeric(NumericStats),
}

impl LeafStats {
    pub fn count(&self) -> usize {
        match self {
            LeafStats::Nominal { histogram } => histogram.iter().sum(),
            LeafStats::Numeric(s) => s.count,
        }
    }
}

/// Which noise model a numeric leaf uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NumericEncoding {
    Gaussian,
    Uniform,
}

/// `|l| H(h) + log2 C(|l|, k)` for a category histogram over `k` categories.
pub fn leaf_nominal(histogram: &[usize], k: usize) -> Bits {
    let n: usize = histogram.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let nf = n as f64;
    let data: f64 = histogram
        .iter()
        .filter(|&&h| h > 0)
        .map(|&h| {
            let hf = h as f64;
            hf * (nf / hf).log2()
        })
        .sum();
    data.max(0.0) + nml_regret(n, k.max(histogram.len()))
}

/// Gaussian data cost given the ML mean and variance, clamped at zero.
pub fn leaf_numeric_gaussian(count: usize, variance: f64, resolution: f64) -> Bits {
    if count == 0 {
        return 0.0;
    }
    let n = count as f64;
    let bits = n / 2.0 * (1.0 / LN_2 + (2.0 * PI * variance).log2()) - n * resolution.log2();
    if bits.is_nan() {
        0.0
    } else {
        bits.max(0.0)
    }
}

/// Uniform data cost over `[min, max]` at the given resolution.
pub fn leaf_numeric_uniform(count: usize, min: f64, max: f64, resolution: f64) -> Bits {
    if count == 0 {
        return 0.0;
    }
    count as f64 * ((max - min) / resolution + 1.0).log2()
}

/// Total numeric leaf cost: one bit for the noise model, two parameters in
/// the attribute's domain, then the cheaper of the Gaussian and uniform
/// data costs. Zero variance forces the uniform branch.
pub fn leaf_numeric(stats: &NumericStats, resolution: f64, domain: f64) -> (Bits, NumericEncoding) {
    let header = 1.0 + 2.0 * domain.max(1.0).log2();
    let uniform = leaf_numeric_uniform(stats.count, stats.min, stats.max, resolution);
    if stats.count == 0 || stats.variance <= 0.0 {
        return (header + uniform, NumericEncoding::Uniform);
    }
    let gaussian = leaf_numeric_gaussian(stats.count, stats.variance, resolution);
    if gaussian < uniform {
        (header + gaussian, NumericEncoding::Gaussian)
    } else {
        (header + uniform, NumericEncoding::Uniform)
    }
}

/// Leaf cost for either kind of statistics. Nominal leaves use the
/// attribute's category count; numeric leaves its resolution and domain.
pub fn leaf_cost(stats: &LeafStats, attribute: &Attribute) -> Bits {
    match stats {
        LeafStats::Nominal { histogram } => leaf_nominal(histogram, attribute.category_count),
        LeafStats::Numeric(s) => leaf_numeric(s, attribute.resolution, attribute.domain_size()).0,
    }
}

// ---------------------------------------------------------------------------
// Internal nodes
// ---------------------------------------------------------------------------

/// Cost of a binary split on `source` in a dataset of `m` attributes, or
/// `None` when the source has no encodable condition.
pub fn cost_single_split(m: usize, source: &Attribute) -> Option<Bits> {
    let base = 1.0 + (m as f64).log2();
    match source.kind {
        AttributeType::Binary => Some(base),
        AttributeType::Categorical => Some(base + (source.category_count as f64).log2()),
        AttributeType::Numeric => {
            let choices = source.domain_size() - 1.0;
            // domain sizes between 1 and 2 arise when the resolution exceeds
            // the range; one condition is still expressible
            (choices > 0.0).then(|| base + choices.log2().max(0.0))
        }
    }
}

/// Cost of a multiway split. Categorical sources split on every value;
/// numeric sources split on values occurring at least `min_count` times.
pub fn cost_multiway_split(m: usize, source: &Attribute, min_count: Option<u64>) -> Option<Bits> {
    let base = 1.0 + (m as f64).log2();
    match (source.kind, min_count) {
        (AttributeType::Categorical, _) => Some(base),
        (AttributeType::Numeric, Some(k)) if k >= 1 => Some(base + universal_int(k)),
        _ => None,
    }
}

/// A regression parameter truncated to a number of decimal digits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodedParameter {
    pub value: f64,
    pub digits: u32,
    pub bits: Bits,
}

fn max_digits(precision: f64) -> u32 {
    (-precision.log10()).ceil().max(1.0) as u32
}

/// Truncates `phi` to the fewest decimal digits (at least one) that bring
/// it within `precision`, and prices the result as sign bit, digit count
/// and shifted magnitude `floor(|phi| 10^s) + 1`.
pub fn encode_parameter(phi: f64, precision: f64) -> Option<EncodedParameter> {
    if !phi.is_finite() || !(precision > 0.0 && precision < 1.0) {
        return None;
    }
    let cap = max_digits(precision);
    let magnitude = phi.abs();
    let mut digits = 1;
    let (mut shifted, mut value);
    loop {
        let scale = 10f64.powi(digits as i32);
        shifted = (magnitude * scale * (1.0 + 1e-12)).floor();
        value = phi.signum() * shifted / scale;
        if (phi - value).abs() < precision || digits >= cap {
            break;
        }
        digits += 1;
    }
    if !shifted.is_finite() {
        return None;
    }
    let value = if value == 0.0 { 0.0 } else { value };
    let bits = 1.0 + universal_int(u64::from(digits)) + universal_real(shifted + 1.0);
    Some(EncodedParameter {
        value,
        digits,
        bits,
    })
}

/// Cost of a regression node: the source attribute plus each parameter.
pub fn cost_regression(m: usize, params: &[f64], precision: f64) -> Option<Bits> {
    params.iter().try_fold((m as f64).log2(), |acc, &phi| {
        encode_parameter(phi, precision).map(|p| acc + p.bits)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn universal_int_values() {
        assert!(close(universal_int(1), 1.5186, 1e-4));
        assert!(close(universal_int(2), 2.5186, 1e-4));
        assert!(close(universal_int(5), 5.3374, 1e-3));
        assert!(universal_int(1 << 40).is_finite());
    }

    #[test]
    #[should_panic]
    fn universal_int_rejects_zero() {
        universal_int(0);
    }

    #[test]
    fn nml_small_values() {
        assert_eq!(nml_regret(7, 1), 0.0);
        assert_eq!(nml_regret(0, 4), 0.0);
        assert!(close(nml_regret(2, 2), 2.5f64.log2(), 1e-12));
        assert!(close(nml_regret(5, 2), 1.8117, 1e-4));
    }

    #[test]
    fn nml_handles_many_categories() {
        let r = nml_regret(5000, 400);
        assert!(r.is_finite() && r > nml_regret(5000, 399));
    }

    #[test]
    fn nominal_leaf_examples() {
        assert!(close(leaf_nominal(&[1, 0], 2), 1.0, 1e-12));
        assert!(close(leaf_nominal(&[1, 1], 2), 2.0 + 2.5f64.log2(), 1e-12));
        assert!(close(leaf_nominal(&[5, 0], 2), 1.8117, 1e-4));
        assert_eq!(leaf_nominal(&[0, 0, 0], 3), 0.0);
    }

    #[test]
    fn gaussian_leaf_examples() {
        let bits = leaf_numeric_gaussian(100, 1.0, 0.01);
        assert!(close(bits, 869.10, 0.01), "{bits}");
        assert_eq!(leaf_numeric_gaussian(0, 1.0, 0.01), 0.0);
        assert_eq!(leaf_numeric_gaussian(10, 1e-12, 1.0), 0.0);
    }

    #[test]
    fn uniform_leaf_examples() {
        assert_eq!(leaf_numeric_uniform(10, 4.0, 4.0, 0.5), 0.0);
        assert!(close(leaf_numeric_uniform(10, 0.0, 9.0, 1.0), 33.219, 1e-3));
        assert_eq!(leaf_numeric_uniform(1, 2.0, 2.0, 1.0), 0.0);
    }

    #[test]
    fn numeric_leaf_picks_cheaper_branch() {
        let constant = NumericStats {
            count: 5,
            mean: 1.0,
            variance: 0.0,
            min: 1.0,
            max: 1.0,
        };
        let (bits, enc) = leaf_numeric(&constant, 0.01, 101.0);
        assert!(close(bits, 1.0 + 2.0 * 101f64.log2(), 1e-9));
        assert!(close(bits, 14.32, 0.01));
        assert_eq!(enc, NumericEncoding::Uniform);

        let s = NumericStats {
            count: 100,
            mean: 0.0,
            variance: 1.0,
            min: -40.0,
            max: 40.0,
        };
        let (bits, enc) = leaf_numeric(&s, 0.01, 1001.0);
        assert_eq!(enc, NumericEncoding::Gaussian);
        assert!(close(
            bits,
            1.0 + 2.0 * 1001f64.log2() + leaf_numeric_gaussian(100, 1.0, 0.01),
            1e-9
        ));

        let (bits, _) = leaf_numeric(&NumericStats::EMPTY, 1.0, 16.0);
        assert_eq!(bits, 9.0);
    }

    #[test]
    fn split_costs() {
        let binary = Attribute::nominal("b", vec![0, 1], 2, vec![]).unwrap();
        let cat = Attribute::nominal("c", vec![0, 1, 2, 3], 4, vec![]).unwrap();
        let num = Attribute::numeric_with_resolution("n", vec![0.0, 1.0], 0.01).unwrap();
        assert!(close(cost_single_split(6, &binary).unwrap(), 3.585, 1e-3));
        assert!(close(cost_single_split(6, &cat).unwrap(), 5.585, 1e-3));
        assert!(close(
            cost_single_split(6, &num).unwrap(),
            1.0 + 6f64.log2() + 100f64.log2(),
            1e-9
        ));

        let flat = Attribute::numeric_with_resolution("f", vec![2.0, 2.0], 1.0).unwrap();
        assert_eq!(cost_single_split(6, &flat), None);

        assert!(close(
            cost_multiway_split(6, &cat, None).unwrap(),
            3.585,
            1e-3
        ));
        assert!(close(
            cost_multiway_split(6, &num, Some(3)).unwrap(),
            1.0 + 6f64.log2() + universal_int(3),
            1e-12
        ));
        assert!(close(universal_int(3), 3.7680, 1e-3));
        assert_eq!(cost_multiway_split(6, &num, None), None);
        assert_eq!(cost_multiway_split(6, &binary, None), None);
    }

    #[test]
    fn parameter_encoding() {
        let p = encode_parameter(0.5, 0.001).unwrap();
        assert_eq!(p.digits, 1);
        assert_eq!(p.value, 0.5);
        assert!(close(
            p.bits,
            1.0 + universal_int(1) + universal_int(6),
            1e-12
        ));

        let p = encode_parameter(2.0, 0.001).unwrap();
        assert_eq!((p.digits, p.value), (1, 2.0));
        assert!(close(
            p.bits,
            1.0 + universal_int(1) + universal_int(21),
            1e-12
        ));

        let p = encode_parameter(0.0, 0.001).unwrap();
        assert!(close(
            p.bits,
            1.0 + universal_int(1) + universal_int(1),
            1e-12
        ));

        let p = encode_parameter(-1.23456, 0.001).unwrap();
        assert_eq!(p.digits, 3);
        assert!(close(p.value, -1.234, 1e-12));

        assert!(encode_parameter(f64::NAN, 0.001).is_none());
        assert!(encode_parameter(3.7e6, 0.001).unwrap().bits.is_finite());
    }

    #[test]
    fn regression_cost_sums_parameters() {
        let bits = cost_regression(6, &[0.0, 2.0], 0.001).unwrap();
        let expected = 6f64.log2()
            + (1.0 + universal_int(1) + universal_int(1))
            + (1.0 + universal_int(1) + universal_int(21));
        assert!(close(bits, expected, 1e-12));
        assert!(cost_regression(6, &[1.0, f64::INFINITY], 0.001).is_none());
    }
}
