//! Pure Nash equilibria, the potential function, best-response dynamics
//! and realized price of anarchy / stability on concrete instances.


use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::{Allocation, Choice, Game};
use crate::profile::ProfileSpace;
use crate::rules::{pos_bound, poa_bound, DistributionRule, Shares};
use crate::scalar::{Rational, Scalar};

/// How an agent's payoff is computed from a joint profile.
pub trait PayoffModel<S: Scalar>: Sync {
    /// Payoff of `agent` at `choices`, where `counts` are the coverage counts
    /// of `choices`.
    fn payoff(&self, game: &Game<S>, agent: usize, choices: &[Choice], counts: &[usize]) -> S;
}

/// Utilities `v_r · f(|a|_r)` induced by a single distribution rule.
pub struct RuleModel<S> {
    shares: Shares<S>,
}

impl<S: Scalar> RuleModel<S> {
    /// Fails when the rule is not defined for the game's cardinality.
    pub fn new(game: &Game<S>, f: &DistributionRule) -> Result<Self> {
        let needed = game.cardinality();
        if needed > f.k() {
            return Err(Error::RuleUndefined {
                k: f.k(),
                count: needed,
            });
        }
        Ok(RuleModel { shares: f.shares() })
    }

    pub(crate) fn shares(&self) -> &Shares<S> {
        &self.shares
    }
}

impl<S: Scalar> PayoffModel<S> for RuleModel<S> {
    fn payoff(&self, game: &Game<S>, agent: usize, choices: &[Choice], counts: &[usize]) -> S {
        game.utility_from_counts(&self.shares, choices[agent], counts)
    }
}

/// Payoffs of every alternative of `agent`, in option order, with the others
/// fixed. `scratch`/`counts` hold the current profile and are restored.
fn deviation_payoffs<S: Scalar, M: PayoffModel<S> + ?Sized>(
    game: &Game<S>,
    model: &M,
    agent: usize,
    scratch: &mut [Choice],
    counts: &mut [usize],
) -> Vec<(Choice, S)> {
    let current = scratch[agent];
    let mut out = Vec::with_capacity(game.agents()[agent].option_count());
    for alt in game.agents()[agent].options() {
        if alt == current {
            continue;
        }
        set_choice(scratch, counts, agent, alt);
        out.push((alt, model.payoff(game, agent, scratch, counts)));
    }
    set_choice(scratch, counts, agent, current);
    out
}

fn set_choice(choices: &mut [Choice], counts: &mut [usize], agent: usize, next: Choice) {
    if let Some(r) = choices[agent] {
        counts[r] -= 1;
    }
    if let Some(r) = next {
        counts[r] += 1;
    }
    choices[agent] = next;
}

/// Whether no agent can gain more than `tol` by a unilateral deviation.
pub fn is_equilibrium_under<S: Scalar, M: PayoffModel<S> + ?Sized>(
    game: &Game<S>,
    model: &M,
    choices: &[Choice],
    tol: &S,
) -> bool {
    let mut scratch = choices.to_vec();
    let mut counts = game.counts(choices);
    (0..game.num_agents()).all(|agent| {
        let current = model.payoff(game, agent, &scratch, &counts);
        let threshold = current + tol.clone();
        deviation_payoffs(game, model, agent, &mut scratch, &mut counts)
            .into_iter()
            .all(|(_, u)| u <= threshold)
    })
}

/// Nash check under the rule `f`; ties count as stable.
pub fn is_equilibrium<S: Scalar>(
    game: &Game<S>,
    f: &DistributionRule,
    a: &Allocation,
    tol: &S,
) -> Result<bool> {
    let model = RuleModel::new(game, f)?;
    Ok(is_equilibrium_under(game, &model, a.choices(), tol))
}

/// All pure equilibria under `model`, in lexicographic profile order.
pub fn enumerate_equilibria_under<S: Scalar, M: PayoffModel<S>>(
    game: &Game<S>,
    model: &M,
    cap: u128,
    tol: &S,
) -> Result<Vec<Allocation>> {
    let space = ProfileSpace::new(game, cap)?;
    Ok(space.filter_map(|p| {
        is_equilibrium_under(game, model, p, tol).then(|| Allocation::from_choices_unchecked(p.to_vec()))
    }))
}

/// All pure equilibria under `f` with the default tolerance.
pub fn enumerate_equilibria<S: Scalar>(
    game: &Game<S>,
    f: &DistributionRule,
    cap: u128,
) -> Result<Vec<Allocation>> {
    let model = RuleModel::new(game, f)?;
    enumerate_equilibria_under(game, &model, cap, &S::default_tolerance())
}

/// Welfare-maximizing allocation; the lexicographically first on ties.
pub fn brute_force_optimum<S: Scalar>(game: &Game<S>, cap: u128) -> Result<(Allocation, S)> {
    let space = ProfileSpace::new(game, cap)?;
    let (choices, w) = space
        .argmax(|p| game.welfare_of(p))
        .ok_or_else(|| Error::Inconsistency("empty profile space".into()))?;
    Ok((Allocation::from_choices_unchecked(choices), w))
}

/// `Σ_r v_r · Σ_{j=1}^{|a|_r} f(j)`.
pub fn potential<S: Scalar>(game: &Game<S>, f: &DistributionRule, a: &Allocation) -> Result<S> {
    let model = RuleModel::new(game, f)?;
    Ok(potential_of(game, model.shares(), &game.counts(a.choices())))
}

pub(crate) fn potential_of<S: Scalar>(game: &Game<S>, shares: &Shares<S>, counts: &[usize]) -> S {
    counts
        .iter()
        .enumerate()
        .fold(S::zero(), |acc, (r, &c)| {
            let partial = (1..=c).fold(S::zero(), |s, j| s + shares.at(j).clone());
            acc + game.value(r).clone() * partial
        })
}

/// One improving move of best-response dynamics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Step<S> {
    pub agent: usize,
    pub from: Choice,
    pub to: Choice,
    pub gain: S,
    pub potential: S,
}

/// Repeatedly moves the first agent (in declaration order) that has a
/// deviation improving its utility by more than `tol` to its best deviation
/// (lowest option index among ties). Stops at an equilibrium.
pub fn best_response_dynamics<S: Scalar>(
    game: &Game<S>,
    f: &DistributionRule,
    start: &Allocation,
    max_steps: usize,
    tol: &S,
) -> Result<(Allocation, Vec<Step<S>>)> {
    let model = RuleModel::new(game, f)?;
    let mut choices = start.choices().to_vec();
    let mut counts = game.counts(&choices);
    let mut phi = potential_of(game, model.shares(), &counts);
    let mut trace = Vec::new();
    loop {
        let mover = (0..game.num_agents()).find_map(|agent| {
            let current = model.payoff(game, agent, &choices, &counts);
            let best = deviation_payoffs(game, &model, agent, &mut choices, &mut counts)
                .into_iter()
                .fold(None::<(Choice, S)>, |best, (alt, u)| match best {
                    Some((_, ref b)) if u <= *b => best,
                    _ => Some((alt, u)),
                })?;
            (best.1 > current.clone() + tol.clone()).then(|| (agent, best.0, best.1 - current))
        });
        let Some((agent, to, gain)) = mover else {
            return Ok((Allocation::from_choices_unchecked(choices), trace));
        };
        if trace.len() == max_steps {
            return Err(Error::MaxStepsExceeded(max_steps));
        }
        let from = choices[agent];
        set_choice(&mut choices, &mut counts, agent, to);
        let next_phi = potential_of(game, model.shares(), &counts);
        if next_phi <= phi {
            return Err(Error::Inconsistency(format!(
                "potential did not increase on step {} (agent {agent})",
                trace.len() + 1
            )));
        }
        phi = next_phi;
        trace.push(Step {
            agent,
            from,
            to,
            gain,
            potential: phi.clone(),
        });
    }
}

/// Realized efficiency of one instance under one payoff model.
#[derive(Debug, Clone, PartialEq)]
pub struct EfficiencyReport<S> {
    pub equilibria: Vec<Allocation>,
    pub w_opt: S,
    pub opt_allocation: Allocation,
    /// Worst equilibrium welfare over `w_opt` (1 when `w_opt` is zero).
    pub poa: S,
    /// Best equilibrium welfare over `w_opt` (1 when `w_opt` is zero).
    pub pos: S,
    pub bound_poa: Rational,
    pub bound_pos: Rational,
}

impl<S: Scalar> EfficiencyReport<S> {
    pub(crate) fn assemble(
        game: &Game<S>,
        equilibria: Vec<Allocation>,
        optimum: (Allocation, S),
        bound_poa: Rational,
        bound_pos: Rational,
    ) -> Result<Self> {
        if equilibria.is_empty() {
            return Err(Error::Inconsistency(
                "no pure equilibrium found; the payoff model guarantees one".into(),
            ));
        }
        let (opt_allocation, w_opt) = optimum;
        let ratio = |a: &Allocation| {
            if w_opt.is_zero() {
                S::one()
            } else {
                game.welfare(a) / w_opt.clone()
            }
        };
        let ratios: Vec<S> = equilibria.iter().map(ratio).collect();
        let poa = ratios
            .iter()
            .cloned()
            .reduce(|a, b| if b < a { b } else { a })
            .expect("non-empty");
        let pos = ratios
            .iter()
            .cloned()
            .reduce(|a, b| if b > a { b } else { a })
            .expect("non-empty");
        Ok(EfficiencyReport {
            equilibria,
            w_opt,
            opt_allocation,
            poa,
            pos,
            bound_poa,
            bound_pos,
        })
    }

    /// Whether realized values respect the guarantees within `tol`.
    pub fn respects_bounds(&self, tol: &S) -> bool {
        let poa_ok = self.poa.clone() + tol.clone() >= S::from_rational(&self.bound_poa);
        let pos_ok = self.pos.clone() + tol.clone() >= S::from_rational(&self.bound_pos);
        poa_ok && pos_ok
    }

    pub fn to_json(&self, game: &Game<S>) -> serde_json::Value {
        let render = |a: &Allocation| serde_json::to_value(a.to_file(game).choice).expect("map");
        serde_json::json!({
            "equilibria": self.equilibria.iter().map(render).collect::<Vec<_>>(),
            "w_opt": self.w_opt.to_f64(),
            "w_opt_exact": self.w_opt.to_exact_string(),
            "opt_allocation": render(&self.opt_allocation),
            "poa": self.poa.to_f64(),
            "poa_exact": self.poa.to_exact_string(),
            "pos": self.pos.to_f64(),
            "pos_exact": self.pos.to_exact_string(),
            "bound_poa": self.bound_poa.to_f64(),
            "bound_poa_exact": self.bound_poa.to_exact_string(),
            "bound_pos": self.bound_pos.to_f64(),
            "bound_pos_exact": self.bound_pos.to_exact_string(),
        })
    }
}

/// Exhaustive efficiency analysis under `f`.
pub fn efficiency<S: Scalar>(
    game: &Game<S>,
    f: &DistributionRule,
    cap: u128,
) -> Result<EfficiencyReport<S>> {
    let model = RuleModel::new(game, f)?;
    let equilibria = enumerate_equilibria_under(game, &model, cap, &S::default_tolerance())?;
    let optimum = brute_force_optimum(game, cap)?;
    EfficiencyReport::assemble(game, equilibria, optimum, poa_bound(f), pos_bound(f))
}

/// Same report as [`efficiency`], computed with pruned equilibrium search and
/// an assignment-based optimum so that long chains stay tractable.
pub fn efficiency_pruned<S: Scalar>(
    game: &Game<S>,
    f: &DistributionRule,
    node_budget: u64,
) -> Result<EfficiencyReport<S>> {
    let equilibria =
        crate::search::enumerate_equilibria_pruned(game, f, &S::default_tolerance(), node_budget)?;
    let optimum = crate::search::optimum_by_assignment(game);
    EfficiencyReport::assemble(game, equilibria, optimum, poa_bound(f), pos_bound(f))
}

/// Ratio of an allocation's welfare to the optimum (1 when the optimum is 0).
pub fn welfare_ratio<S: Scalar>(game: &Game<S>, a: &Allocation, w_opt: &S) -> S {
    if w_opt.is_zero() {
        S::one()
    } else {
        game.welfare(a) / w_opt.clone()
    }
}
