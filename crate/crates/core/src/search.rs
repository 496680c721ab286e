//! Exact analysis that scales past the exhaustive profile cap.
//!
//! Equilibria are found by depth-first assignment in declaration order. An
//! agent's payoff and all of its deviation payoffs only depend on agents whose
//! action sets intersect its own, so its stability can be decided as soon as
//! the last such agent is assigned; unstable branches are cut there. Leaves are
//! reached in the same lexicographic order as the exhaustive scan.
//!
//! The welfare optimum is a maximum-weight agent/resource assignment: every
//! agent covers at most one resource, so optimal welfare equals the heaviest
//! matching between agents and the resources in their action sets.

use crate::error::{Error, Result};
use crate::game::{Allocation, Choice, Game};
use crate::rules::{DistributionRule, Shares};
use crate::equilibrium::RuleModel;
use crate::scalar::Scalar;

/// Default node budget for [`enumerate_equilibria_pruned`].
pub const DEFAULT_NODE_BUDGET: u64 = 50_000_000;

struct Pruner<'a, S> {
    game: &'a Game<S>,
    shares: &'a Shares<S>,
    tol: &'a S,
    options: Vec<Vec<Choice>>,
    /// Agents whose stability is decidable once agent `d` is assigned.
    ready: Vec<Vec<usize>>,
    choices: Vec<Choice>,
    counts: Vec<usize>,
    nodes: u64,
    budget: u64,
    found: Vec<Allocation>,
}

impl<S: Scalar> Pruner<'_, S> {
    fn stable(&self, agent: usize) -> bool {
        let current = self.choices[agent];
        let threshold =
            self.game.utility_from_counts(self.shares, current, &self.counts) + self.tol.clone();
        self.options[agent]
            .iter()
            .filter(|&&alt| alt != current)
            .all(|&alt| {
                self.game
                    .deviation_utility(self.shares, current, alt, &self.counts)
                    <= threshold
            })
    }

    fn descend(&mut self, depth: usize) -> Result<()> {
        if depth == self.options.len() {
            self.found
                .push(Allocation::from_choices_unchecked(self.choices.clone()));
            return Ok(());
        }
        for idx in 0..self.options[depth].len() {
            self.nodes += 1;
            if self.nodes > self.budget {
                return Err(Error::SearchBudget(self.budget));
            }
            let choice = self.options[depth][idx];
            self.choices[depth] = choice;
            if let Some(r) = choice {
                self.counts[r] += 1;
            }
            let ok = self.ready[depth].iter().all(|&i| self.stable(i));
            if ok {
                self.descend(depth + 1)?;
            }
            if let Some(r) = choice {
                self.counts[r] -= 1;
            }
        }
        self.choices[depth] = None;
        Ok(())
    }
}

/// Same output as exhaustive enumeration, with infeasible branches cut early.
pub fn enumerate_equilibria_pruned<S: Scalar>(
    game: &Game<S>,
    f: &DistributionRule,
    tol: &S,
    node_budget: u64,
) -> Result<Vec<Allocation>> {
    let model = RuleModel::new(game, f)?;
    let n = game.num_agents();
    let mut holders: Vec<Vec<usize>> = vec![Vec::new(); game.num_resources()];
    for (i, agent) in game.agents().iter().enumerate() {
        for &r in &agent.actions {
            holders[r].push(i);
        }
    }
    let mut ready = vec![Vec::new(); n];
    for (i, agent) in game.agents().iter().enumerate() {
        let horizon = agent
            .actions
            .iter()
            .flat_map(|&r| holders[r].iter().copied())
            .fold(i, usize::max);
        ready[horizon].push(i);
    }
    let mut pruner = Pruner {
        game,
        shares: model.shares(),
        tol,
        options: game.agents().iter().map(|a| a.options().collect()).collect(),
        ready,
        choices: vec![None; n],
        counts: vec![0; game.num_resources()],
        nodes: 0,
        budget: node_budget,
        found: Vec::new(),
    };
    pruner.descend(0)?;
    Ok(pruner.found)
}

/// Welfare optimum via a minimum-cost assignment (Hungarian method with
/// potentials) of agents to resources or to a private zero-value slot.
/// Unmatched agents take their first option.
pub fn optimum_by_assignment<S: Scalar>(game: &Game<S>) -> (Allocation, S) {
    let n = game.num_agents();
    let m = game.num_resources();
    let cols = m + n;
    let cost = |row: usize, col: usize| -> Option<S> {
        if col < m {
            game.agents()[row]
                .actions
                .binary_search(&col)
                .ok()
                .map(|_| -game.value(col).clone())
        } else {
            (col - m == row).then(S::zero)
        }
    };

    // 1-based rows and columns; column 0 is the virtual root.
    let mut u = vec![S::zero(); n + 1];
    let mut v = vec![S::zero(); cols + 1];
    let mut owner = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0usize;
        let mut minv: Vec<Option<S>> = vec![None; cols + 1];
        let mut used = vec![false; cols + 1];
        loop {
            used[col0] = true;
            let r0 = owner[col0];
            let mut delta: Option<S> = None;
            let mut col1 = 0usize;
            for col in 1..=cols {
                if used[col] {
                    continue;
                }
                if let Some(c) = cost(r0 - 1, col - 1) {
                    let reduced = c - u[r0].clone() - v[col].clone();
                    if minv[col].as_ref().is_none_or(|mv| reduced < *mv) {
                        minv[col] = Some(reduced);
                        way[col] = col0;
                    }
                }
                if let Some(mv) = &minv[col] {
                    if delta.as_ref().is_none_or(|d| mv < d) {
                        delta = Some(mv.clone());
                        col1 = col;
                    }
                }
            }
            let delta = delta.expect("every row owns a private zero-cost column");
            for col in 0..=cols {
                if used[col] {
                    u[owner[col]] = u[owner[col]].clone() + delta.clone();
                    v[col] = v[col].clone() - delta.clone();
                } else if let Some(mv) = minv[col].as_mut() {
                    *mv = mv.clone() - delta.clone();
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let col1 = way[col0];
            owner[col0] = owner[col1];
            col0 = col1;
            if col0 == 0 {
                break;
            }
        }
    }

    let mut choices: Vec<Choice> = game
        .agents()
        .iter()
        .map(|a| a.options().next().flatten())
        .collect();
    for col in 1..=m {
        if owner[col] != 0 {
            choices[owner[col] - 1] = Some(col - 1);
        }
    }
    let allocation = Allocation::from_choices_unchecked(choices);
    let w = game.welfare(&allocation);
    (allocation, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::{brute_force_optimum, enumerate_equilibria};
    use crate::instances::{random_instance, ValueLaw};
    use crate::profile::DEFAULT_PROFILE_CAP;
    use crate::rules::{equal_share_rule, gairing_rule, mc_rule};
    use crate::scalar::Rational;
    use proptest::prelude::*;

    #[test]
    fn budget_is_enforced() {
        let g = crate::game::fixtures::e1();
        let f = mc_rule(2).unwrap();
        assert!(matches!(
            enumerate_equilibria_pruned(&g, &f, &1e-9, 1),
            Err(Error::SearchBudget(1))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        #[test]
        fn pruned_matches_exhaustive(
            seed in any::<u64>(), n in 1usize..=5, m in 1usize..=6, k in 1usize..=4, which in 0usize..3,
        ) {
            let g = random_instance::<Rational>(seed, n.min(k * m), m, k, ValueLaw::Integer).unwrap();
            let f = match which {
                0 => mc_rule(k).unwrap(),
                1 => gairing_rule(k).unwrap(),
                _ => equal_share_rule(k).unwrap(),
            };
            let exhaustive = enumerate_equilibria(&g, &f, DEFAULT_PROFILE_CAP).unwrap();
            let pruned = enumerate_equilibria_pruned(&g, &f, &Rational::from_integer(0.into()), DEFAULT_NODE_BUDGET).unwrap();
            prop_assert_eq!(exhaustive, pruned);
        }

        #[test]
        fn assignment_matches_brute_force(
            seed in any::<u64>(), n in 1usize..=5, m in 1usize..=6, k in 1usize..=4, integer in any::<bool>(),
        ) {
            let law = if integer { ValueLaw::Integer } else { ValueLaw::Uniform };
            let g = random_instance::<Rational>(seed, n.min(k * m), m, k, law).unwrap();
            let (_, brute) = brute_force_optimum(&g, DEFAULT_PROFILE_CAP).unwrap();
            let (a, w) = optimum_by_assignment(&g);
            prop_assert_eq!(&w, &brute);
            prop_assert_eq!(g.welfare(&a), brute);
        }
    }
}
