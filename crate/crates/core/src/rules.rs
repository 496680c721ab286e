//! Distribution rules and the closed-form efficiency guarantees they induce.
//!
//! Everything here is exact: rules are sequences of [`Rational`]s and the
//! price-of-anarchy / price-of-stability formulas are evaluated without
//! rounding. Floating output happens only at reporting boundaries.

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::NumberRepr;
use crate::scalar::{factorial, int, ratio, Rational, Scalar};

/// Largest supported cardinality bound.
pub const MAX_K: usize = 64;

/// Non-increasing, non-negative shares `f(1), ..., f(k)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DistributionRule {
    values: Vec<Rational>,
}

impl DistributionRule {
    pub fn new(values: Vec<Rational>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidRule("a rule needs at least one value".into()));
        }
        if values.len() > MAX_K {
            return Err(Error::InvalidRule(format!(
                "k={} exceeds the supported maximum {MAX_K}",
                values.len()
            )));
        }
        if let Some(j) = values.iter().position(|v| v < &Rational::zero()) {
            return Err(Error::InvalidRule(format!("f({}) is negative", j + 1)));
        }
        if let Some(j) = values.windows(2).position(|w| w[1] > w[0]) {
            return Err(Error::InvalidRule(format!(
                "not non-increasing: f({}) < f({})",
                j + 1,
                j + 2
            )));
        }
        if !values[0].is_one() {
            log::warn!(
                "f(1) = {} != 1; closed-form bounds assume the normalization f(1) = 1",
                values[0]
            );
        }
        Ok(DistributionRule { values })
    }

    pub fn k(&self) -> usize {
        self.values.len()
    }

    /// `f(j)` for `1 <= j <= k`.
    pub fn get(&self, j: usize) -> Option<&Rational> {
        j.checked_sub(1).and_then(|idx| self.values.get(idx))
    }

    /// `f(j)`; panics outside `1..=k`.
    pub fn f(&self, j: usize) -> &Rational {
        self.get(j)
            .unwrap_or_else(|| panic!("f({j}) undefined for k={}", self.k()))
    }

    pub fn values(&self) -> &[Rational] {
        &self.values
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.to_f64()).collect()
    }

    pub fn shares<S: Scalar>(&self) -> Shares<S> {
        Shares(self.values.iter().map(S::from_rational).collect())
    }

    pub fn from_file(file: &RuleFile) -> Result<Self> {
        if file.f.len() != file.k {
            return Err(Error::InvalidRule(format!(
                "k={} but {} values given",
                file.k,
                file.f.len()
            )));
        }
        let values = file
            .f
            .iter()
            .map(NumberRepr::to_rational)
            .collect::<Result<Vec<_>>>()?;
        DistributionRule::new(values)
    }

    pub fn to_file(&self) -> RuleFile {
        RuleFile {
            k: self.k(),
            f: self.values.iter().map(NumberRepr::from_scalar).collect(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        DistributionRule::from_file(&serde_json::from_str(text)?)
    }
}

/// A rule's shares converted into a game's scalar type.
#[derive(Debug, Clone)]
pub struct Shares<S>(Vec<S>);

impl<S> Shares<S> {
    /// `f(j)`; callers guarantee `1 <= j <= k`.
    pub fn at(&self, j: usize) -> &S {
        &self.0[j - 1]
    }

    pub fn k(&self) -> usize {
        self.0.len()
    }
}

/// On-disk rule document: `{"k": 3, "f": [1, "1/3", 0]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleFile {
    pub k: usize,
    pub f: Vec<NumberRepr>,
}

/// `max(j·f(j) − f(j+1) for j < k, (k−1)·f(k))`, zero when `k = 1`.
pub fn chi(f: &DistributionRule) -> Rational {
    let k = f.k();
    let tail = int(k as i64 - 1) * f.f(k);
    (1..k)
        .map(|j| int(j as i64) * f.f(j) - f.f(j + 1))
        .fold(tail, |acc, x| if x > acc { x } else { acc })
}

/// Tight price-of-anarchy guarantee `1 / (1 + chi)`.
pub fn poa_bound(f: &DistributionRule) -> Rational {
    (Rational::one() + chi(f)).recip()
}

/// Tight price-of-stability guarantee `min_j 1 / (1 + (j−1)·f(j))`.
pub fn pos_bound(f: &DistributionRule) -> Rational {
    let worst = (1..=f.k())
        .map(|j| int(j as i64 - 1) * f.f(j))
        .fold(Rational::zero(), |acc, x| if x > acc { x } else { acc });
    (Rational::one() + worst).recip()
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 || k > MAX_K {
        return Err(Error::InvalidRule(format!("k={k} outside 1..={MAX_K}")));
    }
    Ok(())
}

fn inv_factorial(i: u32) -> Rational {
    Rational::new(BigInt::one(), factorial(i))
}

/// `Σ_{i=from}^{to} 1/i!` (empty sum is zero).
fn inv_factorial_sum(from: u32, to: u32) -> Rational {
    (from..=to).map(inv_factorial).fold(Rational::zero(), |a, b| a + b)
}

/// `1 / ((k−1)(k−1)!)`, for `k >= 2`.
fn tail_weight(k: u32) -> Rational {
    Rational::new(BigInt::one(), BigInt::from(k - 1) * factorial(k - 1))
}

/// The rule maximizing the price of anarchy over cardinality-`k` games.
pub fn gairing_rule(k: usize) -> Result<DistributionRule> {
    check_k(k)?;
    if k == 1 {
        return DistributionRule::new(vec![Rational::one()]);
    }
    let k32 = k as u32;
    let c = tail_weight(k32);
    let denominator = c.clone() + inv_factorial_sum(1, k32 - 1);
    let values = (1..=k32)
        .map(|j| {
            let numerator = c.clone() + inv_factorial_sum(j, k32 - 1);
            Rational::from_integer(factorial(j - 1)) * numerator / denominator.clone()
        })
        .collect();
    DistributionRule::new(values)
}

/// Full value to a lone agent, nothing to shared resources.
pub fn mc_rule(k: usize) -> Result<DistributionRule> {
    check_k(k)?;
    let values = (1..=k)
        .map(|j| if j == 1 { Rational::one() } else { Rational::zero() })
        .collect();
    DistributionRule::new(values)
}

/// Budget-balanced equal split `f(j) = 1/j`.
pub fn equal_share_rule(k: usize) -> Result<DistributionRule> {
    check_k(k)?;
    DistributionRule::new((1..=k).map(|j| ratio(1, j as i64)).collect())
}

/// Best achievable price of anarchy, computed as `poa_bound(gairing_rule(k))`.
pub fn optimal_poa(k: usize) -> Result<Rational> {
    Ok(poa_bound(&gairing_rule(k)?))
}

/// Closed form of the optimal price of anarchy,
/// `(c + Σ_{i=1}^{k−1} 1/i!) / (c + Σ_{i=0}^{k−1} 1/i!)` with
/// `c = 1/((k−1)(k−1)!)`; equal to 1 for `k = 1`.
pub fn optimal_poa_closed_form(k: usize) -> Result<Rational> {
    check_k(k)?;
    if k == 1 {
        return Ok(Rational::one());
    }
    let k32 = k as u32;
    let c = tail_weight(k32);
    Ok((c.clone() + inv_factorial_sum(1, k32 - 1)) / (c + inv_factorial_sum(0, k32 - 1)))
}

fn alpha_slack(alpha: &Rational) -> Rational {
    alpha.recip() - Rational::one()
}

fn check_open_unit(alpha: &Rational, k: usize) -> Result<()> {
    if alpha <= &Rational::zero() || alpha >= &Rational::one() {
        return Err(Error::AlphaOutOfRange {
            alpha: alpha.to_exact_string(),
            max: "1 (exclusive)".to_string(),
            k,
        });
    }
    Ok(())
}

/// True iff `f` meets all `k` linear constraints that characterize rules
/// with a price of anarchy of at least `alpha`.
pub fn satisfies_alpha_constraints(f: &DistributionRule, alpha: &Rational) -> bool {
    let slack = alpha_slack(alpha);
    let k = f.k();
    (1..k).all(|j| int(j as i64) * f.f(j) - f.f(j + 1) <= slack)
        && int(k as i64 - 1) * f.f(k) <= slack
}

/// Unclamped `(j−1)!·(1 − s·Σ_{i=1}^{j−1} 1/i!)` where `s = 1/α − 1`.
fn frontier_term(j: u32, slack: &Rational) -> Rational {
    Rational::from_integer(factorial(j - 1))
        * (Rational::one() - slack.clone() * inv_factorial_sum(1, j - 1))
}

/// The rule that makes every `j·f(j) − f(j+1) ≤ 1/α − 1` constraint bind,
/// clamped at zero. Lies on the anarchy/stability frontier.
pub fn frontier_rule(alpha: &Rational, k: usize) -> Result<DistributionRule> {
    check_k(k)?;
    check_open_unit(alpha, k)?;
    let slack = alpha_slack(alpha);
    let values: Vec<Rational> = (1..=k as u32)
        .map(|j| {
            let term = frontier_term(j, &slack);
            if term < Rational::zero() {
                Rational::zero()
            } else {
                term
            }
        })
        .collect();
    let infeasible = |reason: String| Error::Infeasible {
        alpha: alpha.to_exact_string(),
        k,
        reason,
    };
    if let Some(j) = values.windows(2).position(|w| w[1] > w[0]) {
        return Err(infeasible(format!("f({}) < f({})", j + 1, j + 2)));
    }
    let rule = DistributionRule::new(values)?;
    if !satisfies_alpha_constraints(&rule, alpha) {
        return Err(infeasible(format!(
            "(k-1)·f(k) = {} exceeds 1/alpha - 1 = {}",
            (int(k as i64 - 1) * rule.f(k)).to_exact_string(),
            slack.to_exact_string()
        )));
    }
    Ok(rule)
}

/// Best price of stability among rules whose price of anarchy is at least
/// `alpha`: 1 for `alpha <= 1/2`, otherwise
/// `1 / (1 + max_j (j−1)·(j−1)!·(1 − (1/α − 1)·Σ_{i=1}^{j−1} 1/i!))`.
pub fn frontier_value(alpha: &Rational, k: usize) -> Result<Rational> {
    let best = optimal_poa(k)?;
    if alpha <= &Rational::zero() || alpha > &best {
        return Err(Error::AlphaOutOfRange {
            alpha: alpha.to_exact_string(),
            max: best.to_exact_string(),
            k,
        });
    }
    if alpha <= &ratio(1, 2) {
        return Ok(Rational::one());
    }
    let slack = alpha_slack(alpha);
    let worst = (1..=k as u32)
        .map(|j| int(j as i64 - 1) * frontier_term(j, &slack))
        .fold(Rational::zero(), |acc, x| if x > acc { x } else { acc });
    Ok((Rational::one() + worst).recip())
}

/// A point on the frontier together with a rule attaining it.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontierPoint {
    pub alpha: Rational,
    pub z_value: Rational,
    pub rule: DistributionRule,
}

impl FrontierPoint {
    pub fn new(alpha: Rational, k: usize) -> Result<Self> {
        let z_value = frontier_value(&alpha, k)?;
        let rule = if alpha == optimal_poa(k)? {
            gairing_rule(k)?
        } else {
            frontier_rule(&alpha, k)?
        };
        Ok(FrontierPoint {
            alpha,
            z_value,
            rule,
        })
    }
}

/// `samples` frontier points with `alpha` evenly spaced on
/// `(0, optimal_poa(k)]`, ending exactly at the optimum.
pub fn frontier_sweep(k: usize, samples: usize) -> Result<Vec<FrontierPoint>> {
    if samples < 2 {
        return Err(Error::InvalidParameters("need at least 2 samples".into()));
    }
    let best = optimal_poa(k)?;
    (1..=samples)
        .map(|i| FrontierPoint::new(best.clone() * ratio(i as i64, samples as i64), k))
        .collect()
}

/// All non-increasing rules with `f(1) = 1` and `f(j) ∈ {0, 1/d, ..., 1}`.
pub fn grid_rules(k: usize, denominator: u32) -> Vec<DistributionRule> {
    fn extend(prefix: &mut Vec<u32>, k: usize, out: &mut Vec<Vec<u32>>) {
        if prefix.len() == k {
            out.push(prefix.clone());
            return;
        }
        let cap = *prefix.last().expect("prefix starts with f(1)");
        for v in 0..=cap {
            prefix.push(v);
            extend(prefix, k, out);
            prefix.pop();
        }
    }
    let mut numerators = Vec::new();
    extend(&mut vec![denominator], k, &mut numerators);
    numerators
        .into_iter()
        .map(|ns| DistributionRule {
            values: ns
                .into_iter()
                .map(|n| ratio(n as i64, denominator as i64))
                .collect(),
        })
        .collect()
}
