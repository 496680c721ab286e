//! The state-based rule: each agent looks at which resources are still
//! uncovered in the part of the system that can reach it, and pays itself
//! by marginal contribution or by the Gairing rule accordingly.
//!
//! Also hosts the reduction used to bound its worst equilibria: a derived
//! game with modified action sets played under the Gairing rule, and the
//! procedure that rebuilds an optimal allocation inside that game.

use std::collections::{BTreeSet, VecDeque};

use serde::Serialize;

use crate::equilibrium::{
    brute_force_optimum, enumerate_equilibria_under, EfficiencyReport, PayoffModel,
};
use crate::error::{Error, Result};
use crate::game::{Allocation, Choice, Game};
use crate::rules::{gairing_rule, mc_rule, optimal_poa, Shares};
use crate::scalar::{Rational, Scalar};

/// Which rule an agent applies at a given allocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Toggle {
    #[serde(rename = "MC")]
    Mc,
    #[serde(rename = "GAR")]
    Gar,
}

/// Directed graph with an edge `i → j` whenever agent `i`'s choice lies in
/// agent `j`'s action set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InfoGraph {
    edges: BTreeSet<(usize, usize)>,
    incoming: Vec<Vec<usize>>,
}

impl InfoGraph {
    pub fn from_edges(num_agents: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let edges: BTreeSet<(usize, usize)> = edges.into_iter().filter(|(i, j)| i != j).collect();
        let mut incoming = vec![Vec::new(); num_agents];
        for &(i, j) in &edges {
            incoming[j].push(i);
        }
        InfoGraph { edges, incoming }
    }

    fn from_choices<S: Scalar>(game: &Game<S>, choices: &[Choice]) -> Self {
        let agents = game.agents();
        let edges = choices.iter().enumerate().flat_map(|(i, c)| {
            c.iter().flat_map(move |&r| {
                agents
                    .iter()
                    .enumerate()
                    .filter(move |(j, agent)| *j != i && agent.actions.binary_search(&r).is_ok())
                    .map(move |(j, _)| (i, j))
            })
        });
        InfoGraph::from_edges(game.num_agents(), edges)
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.edges.contains(&(from, to))
    }

    /// Agents other than `i` with a directed path to `i`, ascending.
    pub fn reach_set(&self, i: usize) -> Vec<usize> {
        let mut seen = vec![false; self.incoming.len()];
        seen[i] = true;
        let mut queue = VecDeque::from([i]);
        while let Some(node) = queue.pop_front() {
            for &prev in &self.incoming[node] {
                if !seen[prev] {
                    seen[prev] = true;
                    queue.push_back(prev);
                }
            }
        }
        seen[i] = false;
        (0..seen.len()).filter(|&j| seen[j]).collect()
    }
}

pub fn info_graph<S: Scalar>(game: &Game<S>, a: &Allocation) -> InfoGraph {
    InfoGraph::from_choices(game, a.choices())
}

pub fn reach_set(graph: &InfoGraph, i: usize) -> Vec<usize> {
    graph.reach_set(i)
}

fn q_of<S: Scalar>(game: &Game<S>, reach: &[usize], i: usize) -> Vec<usize> {
    let agents = game.agents();
    let set: BTreeSet<usize> = std::iter::once(i)
        .chain(reach.iter().copied())
        .flat_map(|j| agents[j].actions.iter().copied())
        .collect();
    set.into_iter().collect()
}

fn max_value<S: Scalar>(game: &Game<S>, rs: impl Iterator<Item = usize>) -> S {
    rs.fold(S::zero(), |best, r| S::max_of(best, game.value(r).clone()))
}

/// Best value in `A_i` not chosen by any other agent (0 if none).
fn v_of<S: Scalar>(game: &Game<S>, choices: &[Choice], counts: &[usize], i: usize) -> S {
    let own = choices[i];
    let free = game.agents()[i]
        .actions
        .iter()
        .copied()
        .filter(|&r| counts[r] - usize::from(own == Some(r)) == 0);
    max_value(game, free)
}

/// Best value in `q` chosen by nobody (0 if none).
fn x_of<S: Scalar>(game: &Game<S>, q: &[usize], counts: &[usize]) -> S {
    max_value(game, q.iter().copied().filter(|&r| counts[r] == 0))
}

/// `A_i` together with the action sets of every agent that can reach `i`.
pub fn q_set<S: Scalar>(game: &Game<S>, a: &Allocation, i: usize) -> Vec<usize> {
    q_of(game, &info_graph(game, a).reach_set(i), i)
}

pub fn v_value<S: Scalar>(game: &Game<S>, a: &Allocation, i: usize) -> S {
    v_of(game, a.choices(), &game.counts(a.choices()), i)
}

pub fn x_value<S: Scalar>(game: &Game<S>, a: &Allocation, i: usize) -> S {
    x_of(game, &q_set(game, a, i), &game.counts(a.choices()))
}

fn toggle_of<S: Scalar>(game: &Game<S>, choices: &[Choice], counts: &[usize], i: usize) -> Toggle {
    let graph = InfoGraph::from_choices(game, choices);
    let q = q_of(game, &graph.reach_set(i), i);
    if v_of(game, choices, counts, i) >= x_of(game, &q, counts) {
        Toggle::Mc
    } else {
        Toggle::Gar
    }
}

pub fn toggle<S: Scalar>(game: &Game<S>, a: &Allocation, i: usize) -> Toggle {
    toggle_of(game, a.choices(), &game.counts(a.choices()), i)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentStats<S> {
    pub reach_set: Vec<usize>,
    pub q_set: Vec<usize>,
    pub v_value: S,
    pub x_value: S,
    pub toggle: Toggle,
}

pub fn state_stats<S: Scalar>(game: &Game<S>, a: &Allocation) -> Vec<AgentStats<S>> {
    let graph = info_graph(game, a);
    let counts = game.counts(a.choices());
    (0..game.num_agents())
        .map(|i| {
            let reach = graph.reach_set(i);
            let q = q_of(game, &reach, i);
            let v = v_of(game, a.choices(), &counts, i);
            let x = x_of(game, &q, &counts);
            let toggle = if v >= x { Toggle::Mc } else { Toggle::Gar };
            AgentStats {
                reach_set: reach,
                q_set: q,
                v_value: v,
                x_value: x,
                toggle,
            }
        })
        .collect()
}

pub fn stats_to_json<S: Scalar>(game: &Game<S>, stats: &[AgentStats<S>]) -> serde_json::Value {
    let agent_ids = |v: &[usize]| -> Vec<&str> {
        v.iter().map(|&j| game.agents()[j].id.as_str()).collect()
    };
    let resource_ids = |v: &[usize]| -> Vec<&str> {
        v.iter().map(|&r| game.resources()[r].id.as_str()).collect()
    };
    serde_json::Value::Array(
        stats
            .iter()
            .zip(game.agents())
            .map(|(s, agent)| {
                serde_json::json!({
                    "agent": agent.id,
                    "reach_set": agent_ids(&s.reach_set),
                    "q_set": resource_ids(&s.q_set),
                    "v_value": s.v_value.to_f64(),
                    "x_value": s.x_value.to_f64(),
                    "toggle": s.toggle,
                })
            })
            .collect(),
    )
}

/// Payoffs under the state-based rule for cardinality `k`.
pub struct StateBasedModel<S> {
    mc: Shares<S>,
    gar: Shares<S>,
}

impl<S: Scalar> StateBasedModel<S> {
    pub fn new(game: &Game<S>, k: usize) -> Result<Self> {
        let count = game.cardinality();
        if count > k {
            return Err(Error::RuleUndefined { k, count });
        }
        Ok(StateBasedModel {
            mc: mc_rule(k)?.shares(),
            gar: gairing_rule(k)?.shares(),
        })
    }

    fn shares(&self, t: Toggle) -> &Shares<S> {
        match t {
            Toggle::Mc => &self.mc,
            Toggle::Gar => &self.gar,
        }
    }
}

impl<S: Scalar> PayoffModel<S> for StateBasedModel<S> {
    fn payoff(&self, game: &Game<S>, agent: usize, choices: &[Choice], counts: &[usize]) -> S {
        let Some(r) = choices[agent] else {
            return S::zero();
        };
        let t = toggle_of(game, choices, counts, agent);
        game.value(r).clone() * self.shares(t).at(counts[r]).clone()
    }
}

/// `v_{a_i} · f_mc(|a|_{a_i})` when `V_i ≥ x_i`, else `v_{a_i} · f_gar(|a|_{a_i})`.
pub fn sb_utility<S: Scalar>(game: &Game<S>, k: usize, a: &Allocation, i: usize) -> Result<S> {
    let counts = game.counts(a.choices());
    if let Some(r) = a.choice(i) {
        if counts[r] > k {
            return Err(Error::RuleUndefined { k, count: counts[r] });
        }
    }
    let model = StateBasedModel::<S> {
        mc: mc_rule(k)?.shares(),
        gar: gairing_rule(k)?.shares(),
    };
    Ok(model.payoff(game, i, a.choices(), &counts))
}

pub fn is_sb_equilibrium<S: Scalar>(game: &Game<S>, k: usize, a: &Allocation, tol: &S) -> Result<bool> {
    let model = StateBasedModel::new(game, k)?;
    Ok(crate::equilibrium::is_equilibrium_under(game, &model, a.choices(), tol))
}

pub fn sb_equilibria<S: Scalar>(game: &Game<S>, k: usize, cap: u128) -> Result<Vec<Allocation>> {
    let model = StateBasedModel::new(game, k)?;
    enumerate_equilibria_under(game, &model, cap, &S::default_tolerance())
}

/// Exhaustive efficiency analysis under the state-based rule. The reported
/// guarantees are the optimal price of anarchy for `k` and a price of
/// stability of 1.
pub fn sb_equilibrium_analysis<S: Scalar>(
    game: &Game<S>,
    k: usize,
    cap: u128,
) -> Result<EfficiencyReport<S>> {
    let equilibria = sb_equilibria(game, k, cap)?;
    let optimum = brute_force_optimum(game, cap)?;
    EfficiencyReport::assemble(game, equilibria, optimum, optimal_poa(k)?, Rational::from_integer(1.into()))
}

/// Whether every agent's toggle at `a` is the same as at each of its
/// unilateral alternatives.
pub fn toggle_is_consistent<S: Scalar>(game: &Game<S>, a: &Allocation, i: usize) -> bool {
    let base = toggle(game, a, i);
    game.agents()[i]
        .options()
        .all(|alt| toggle(game, &a.with_choice(i, alt), i) == base)
}

/// The derived game played under the Gairing rule at a state-based equilibrium.
#[derive(Debug, Clone)]
pub struct Reduction<S> {
    /// Same agents, resources and values; agents that would strictly gain
    /// under the Gairing rule lose those resources and gain the uncovered
    /// resources in their enlarged set plus the null action. Its declared `k`
    /// is its actual cardinality, which may exceed the original `k`.
    pub game: Game<S>,
    /// The Gairing rule for the original cardinality.
    pub k: usize,
    pub equilibrium: Allocation,
    /// Resources removed from each agent's action set.
    pub removed: Vec<Vec<usize>>,
    /// Uncovered resources from each modified agent's enlarged set.
    pub uncovered: Vec<Vec<usize>>,
    /// Agents whose action sets were modified.
    pub modified: Vec<usize>,
}

/// Builds the derived game from `game` and its state-based equilibrium `a_ne`.
pub fn reduction_game<S: Scalar>(game: &Game<S>, k: usize, a_ne: &Allocation) -> Result<Reduction<S>> {
    let tol = S::default_tolerance();
    if !is_sb_equilibrium(game, k, a_ne, &tol)? {
        return Err(Error::InvalidAllocation(
            "reduction needs a state-based equilibrium".into(),
        ));
    }
    let gar = gairing_rule(k)?.shares::<S>();
    let choices = a_ne.choices();
    let counts = game.counts(choices);
    let graph = info_graph(game, a_ne);
    let n = game.num_agents();
    let mut removed = vec![Vec::new(); n];
    let mut uncovered = vec![Vec::new(); n];
    let mut modified = Vec::new();
    let mut actions = Vec::with_capacity(n);
    for (i, agent) in game.agents().iter().enumerate() {
        let current = game.utility_from_counts(&gar, choices[i], &counts);
        let better: Vec<usize> = agent
            .actions
            .iter()
            .copied()
            .filter(|&r| {
                current.clone() + tol.clone()
                    < game.deviation_utility(&gar, choices[i], Some(r), &counts)
            })
            .collect();
        if better.is_empty() {
            actions.push((agent.actions.clone(), agent.allow_null));
            continue;
        }
        let open: Vec<usize> = q_of(game, &graph.reach_set(i), i)
            .into_iter()
            .filter(|&r| counts[r] == 0)
            .collect();
        let mut set: Vec<usize> = agent
            .actions
            .iter()
            .copied()
            .filter(|r| !better.contains(r))
            .collect();
        set.extend(&open);
        actions.push((set, true));
        removed[i] = better;
        uncovered[i] = open;
        modified.push(i);
    }
    let mut reduced = game.with_action_sets(actions);
    reduced.set_k(k.max(reduced.cardinality()));
    Ok(Reduction {
        game: reduced,
        k,
        equilibrium: a_ne.clone(),
        removed,
        uncovered,
        modified,
    })
}

impl<S: Scalar> Reduction<S> {
    /// Whether the equilibrium survives in the derived game under the
    /// Gairing rule for the original `k`.
    pub fn equilibrium_is_stable(&self) -> Result<bool> {
        let gar = gairing_rule(self.k)?.shares::<S>();
        let choices = self.equilibrium.choices();
        let counts = self.game.counts(choices);
        let tol = S::default_tolerance();
        for (i, agent) in self.game.agents().iter().enumerate() {
            if let Some(r) = choices[i] {
                if counts[r] > self.k {
                    return Err(Error::RuleUndefined { k: self.k, count: counts[r] });
                }
            }
            let threshold = self.game.utility_from_counts(&gar, choices[i], &counts) + tol.clone();
            for alt in agent.options() {
                if let Some(r) = alt {
                    let after = counts[r] + usize::from(choices[i] != alt);
                    if after > self.k {
                        return Err(Error::RuleUndefined { k: self.k, count: after });
                    }
                }
                if self.game.deviation_utility(&gar, choices[i], alt, &counts) > threshold {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// Every removed resource is chosen at equilibrium by some other agent.
    pub fn removed_resources_are_contested(&self) -> bool {
        let choices = self.equilibrium.choices();
        self.removed.iter().enumerate().all(|(i, rs)| {
            rs.iter()
                .all(|&r| (0..choices.len()).any(|j| j != i && choices[j] == Some(r)))
        })
    }

    /// Every added resource is left uncovered at equilibrium.
    pub fn added_resources_are_uncovered(&self) -> bool {
        let counts = self.game.counts(self.equilibrium.choices());
        self.uncovered.iter().flatten().all(|&r| counts[r] == 0)
    }
}

/// Result of rebuilding an optimal allocation inside the derived game.
#[derive(Debug, Clone, PartialEq)]
pub struct Repair<S> {
    pub allocation: Allocation,
    pub welfare: S,
    /// Number of uncovered resources restored, one per round.
    pub rounds: usize,
}

/// Starting from `a_opt` (optimal in the original game) with unavailable
/// choices replaced by the null action, re-covers the lost resources one at
/// a time by shifting agents onto their equilibrium choices.
pub fn repair_allocation<S: Scalar>(reduction: &Reduction<S>, a_opt: &Allocation) -> Result<Repair<S>> {
    let game = &reduction.game;
    let ne = reduction.equilibrium.choices();
    let opt = a_opt.choices();
    let n = game.num_agents();
    if opt.len() != n {
        return Err(Error::InvalidAllocation("optimum has the wrong number of agents".into()));
    }
    let agents = game.agents();
    let fail = |msg: String| Error::Inconsistency(format!("repair: {msg}"));

    let mut a: Vec<Choice> = Vec::with_capacity(n);
    for (i, agent) in agents.iter().enumerate() {
        if agent.can_choose(opt[i]) {
            a.push(opt[i]);
        } else if agent.can_choose(None) {
            a.push(None);
        } else {
            return Err(fail(format!("agent {} lost its optimal choice and cannot idle", agent.id)));
        }
    }
    let targets: BTreeSet<usize> = opt.iter().flatten().copied().collect();
    let uncovered = |a: &[Choice]| -> Vec<usize> {
        let counts = game.counts(a);
        targets.iter().copied().filter(|&r| counts[r] == 0).collect()
    };

    let mut rounds = 0;
    loop {
        let before = uncovered(&a);
        let Some(&r0) = before.first() else { break };
        let i0 = (0..n)
            .find(|&i| opt[i] == Some(r0))
            .expect("targets come from the optimum");
        if !reduction.removed[i0].contains(&r0) {
            return Err(fail(format!("resource {r0} is uncovered but was not removed")));
        }
        let holders = |r: usize| (0..n).filter(move |&j| ne[j] == Some(r));
        let i1 = holders(r0)
            .filter(|&j| j != i0)
            .min_by_key(|&j| a[j].is_some())
            .ok_or_else(|| fail(format!("no other agent holds removed resource {r0} at equilibrium")))?;

        let mut moved = vec![false; n];
        let mut assign = |a: &mut Vec<Choice>, who: usize, r: usize| -> Result<Choice> {
            if moved[who] {
                return Err(fail(format!("agent {} reassigned twice in one round", agents[who].id)));
            }
            if !agents[who].can_choose(Some(r)) {
                return Err(fail(format!("agent {} cannot choose resource {r}", agents[who].id)));
            }
            moved[who] = true;
            Ok(a[who].replace(r))
        };

        let (mut mover, mut dest) = (i1, r0);
        while let Some(vacated) = assign(&mut a, mover, dest)? {
            if a.contains(&Some(vacated)) {
                break;
            }
            if ne.contains(&Some(vacated)) {
                let next = holders(vacated)
                    .filter(|&j| a[j] != Some(vacated) && j != mover)
                    .min_by_key(|&j| a[j].is_some())
                    .ok_or_else(|| fail(format!("no agent can re-cover resource {vacated}")))?;
                mover = next;
                dest = vacated;
            } else {
                assign(&mut a, i0, vacated)?;
                break;
            }
        }

        let after = uncovered(&a);
        let kept = before.iter().all(|r| r == &r0 || after.contains(r));
        if after.len() + 1 != before.len() || !kept {
            return Err(fail(format!(
                "round {} went from {} to {} uncovered resources",
                rounds + 1,
                before.len(),
                after.len()
            )));
        }
        rounds += 1;
    }

    let allocation = Allocation::new(game, a)?;
    let welfare = game.welfare(&allocation);
    let target = game.welfare(a_opt);
    if welfare != target {
        return Err(fail(format!(
            "repaired welfare {} differs from optimum {}",
            welfare.to_exact_string(),
            target.to_exact_string()
        )));
    }
    Ok(Repair {
        allocation,
        welfare,
        rounds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::fixtures::{alloc, e1, e2};
    use crate::instances::{random_instance_with_nulls, simple_tight_instance, ValueLaw};
    use crate::profile::DEFAULT_PROFILE_CAP;
    use proptest::prelude::*;

    fn ids(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    /// Agents 2, 3, 4 form a cycle that feeds agent 1; agent 5 is isolated.
    fn five_agent_example() -> (Game<f64>, Allocation) {
        let g = Game::new(
            4,
            ["t1", "s2", "s3", "s4", "t5"]
                .iter()
                .enumerate()
                .map(|(i, id)| (id.to_string(), 1.0 + i as f64)),
            vec![
                ("1".to_string(), ids(&["t1", "s2"]), false),
                ("2".to_string(), ids(&["s2", "s4"]), false),
                ("3".to_string(), ids(&["s3", "s2"]), false),
                ("4".to_string(), ids(&["s4", "s3"]), false),
                ("5".to_string(), ids(&["t5"]), false),
            ],
        )
        .unwrap();
        let a = alloc(&g, &[Some("t1"), Some("s2"), Some("s3"), Some("s4"), Some("t5")]);
        (g, a)
    }

    #[test]
    fn e1_graph_edges() {
        let g = e1();
        let both = info_graph(&g, &alloc(&g, &[Some("r0"), Some("r0")]));
        assert_eq!(both.edges().collect::<Vec<_>>(), vec![(0, 1), (1, 0)]);
        let apart = info_graph(&g, &alloc(&g, &[Some("r1"), Some("r2")]));
        assert_eq!(apart.edges().count(), 0);
    }

    #[test]
    fn idle_agents_send_no_edges() {
        let g = Game::<f64>::new(
            2,
            vec![("r".to_string(), 1.0)],
            vec![
                ("1".to_string(), ids(&["r"]), true),
                ("2".to_string(), ids(&["r"]), false),
            ],
        )
        .unwrap();
        let graph = info_graph(&g, &alloc(&g, &[None, Some("r")]));
        assert_eq!(graph.edges().collect::<Vec<_>>(), vec![(1, 0)]);
    }

    #[test]
    fn reach_sets_of_five_agent_example() {
        let (g, a) = five_agent_example();
        let graph = info_graph(&g, &a);
        let expected: [&[usize]; 5] = [&[1, 2, 3], &[2, 3], &[1, 3], &[1, 2], &[]];
        for (i, want) in expected.iter().enumerate() {
            assert_eq!(graph.reach_set(i), *want, "agent {}", i + 1);
        }
        let all: Vec<usize> = (0..4).collect();
        assert_eq!(q_set(&g, &a, 0), all);
        assert_eq!(q_set(&g, &a, 4), vec![4]);
        let empty = InfoGraph::from_edges(3, []);
        assert!((0..3).all(|i| empty.reach_set(i).is_empty()));
    }

    #[test]
    fn statistics_and_utilities_on_small_examples() {
        let g = e1();
        let a = alloc(&g, &[Some("r0"), Some("r0")]);
        assert_eq!(v_value(&g, &a, 0), 0.6);
        assert_eq!(x_value(&g, &a, 0), 0.6);
        assert_eq!(toggle(&g, &a, 0), Toggle::Mc);
        assert_eq!(sb_utility(&g, 2, &a, 0).unwrap(), 0.0);

        let g = e2();
        let a = alloc(&g, &[Some("r0"), Some("r0")]);
        assert_eq!(v_value(&g, &a, 0), 0.5);
        assert_eq!(x_value(&g, &a, 0), 2.0);
        assert_eq!(toggle(&g, &a, 0), Toggle::Gar);
        assert_eq!(sb_utility(&g, 2, &a, 0).unwrap(), 0.5);

        // everything covered: x is 0; alone under marginal contribution: full value
        let solo = Game::<f64>::new(1, vec![("r".to_string(), 3.0)], vec![("1".to_string(), ids(&["r"]), false)])
            .unwrap();
        let a = alloc(&solo, &[Some("r")]);
        assert_eq!(x_value(&solo, &a, 0), 0.0);
        assert_eq!(toggle(&solo, &a, 0), Toggle::Mc);
        assert_eq!(sb_utility(&solo, 1, &a, 0).unwrap(), 3.0);

        let stats = state_stats(&g, &alloc(&g, &[Some("r0"), Some("r0")]));
        let json = stats_to_json(&g, &stats);
        assert_eq!(json[0]["toggle"], "GAR");
        assert_eq!(json[0]["reach_set"], serde_json::json!(["2"]));
        assert_eq!(json[0]["q_set"], serde_json::json!(["r0", "r1", "r2"]));
    }

    #[test]
    fn e2_is_fully_efficient() {
        let report = sb_equilibrium_analysis(&e2(), 2, DEFAULT_PROFILE_CAP).unwrap();
        assert_eq!(report.pos, 1.0);
    }

    #[test]
    fn simple_tight_games_meet_the_optimal_bound() {
        for k in 2..=4 {
            let f = gairing_rule(k).unwrap();
            let inst = simple_tight_instance::<Rational>(&f, k).unwrap();
            let report = sb_equilibrium_analysis(&inst.game, k, DEFAULT_PROFILE_CAP).unwrap();
            assert!(report.poa >= optimal_poa(k).unwrap());
            assert_eq!(report.pos, Rational::from_integer(1.into()));
        }
    }

    #[test]
    fn gairing_never_pays_less_than_marginal_contribution() {
        for k in 1..=12 {
            let gar = gairing_rule(k).unwrap();
            let mc = mc_rule(k).unwrap();
            for j in 1..=k {
                assert!(gar.f(j) >= mc.f(j));
            }
        }
    }

    #[test]
    fn reduction_without_gairing_gains_keeps_action_sets() {
        let g = e1();
        let a = alloc(&g, &[Some("r1"), Some("r0")]);
        let red = reduction_game(&g, 2, &a).unwrap();
        assert!(red.modified.is_empty());
        assert_eq!(red.game.agents(), g.agents());
        assert!(red.equilibrium_is_stable().unwrap());
    }

    #[test]
    fn reduction_strips_gairing_improvements() {
        // Agent 1 sits alone on a under marginal contribution while agents 2
        // and 3 share b; under the Gairing rule agent 1 would strictly prefer
        // joining b. The worthless resource c is uncovered and reachable, so
        // it is added.
        let g = Game::<Rational>::new(
            3,
            vec![
                ("a".to_string(), Rational::from_integer(1.into())),
                ("b".to_string(), Rational::from_integer(6.into())),
                ("c".to_string(), Rational::from_integer(0.into())),
            ],
            vec![
                ("1".to_string(), ids(&["a", "b"]), false),
                ("2".to_string(), ids(&["b", "c"]), false),
                ("3".to_string(), ids(&["b"]), false),
            ],
        )
        .unwrap();
        let a = alloc(&g, &[Some("a"), Some("b"), Some("b")]);
        assert!(is_sb_equilibrium(&g, 3, &a, &Rational::from_integer(0.into())).unwrap());
        let red = reduction_game(&g, 3, &a).unwrap();
        assert_eq!(red.modified, vec![0]);
        assert_eq!(red.removed[0], vec![1]);
        assert_eq!(red.uncovered[0], vec![2]);
        assert_eq!(red.game.agents()[0].actions, vec![0, 2]);
        assert!(red.game.agents()[0].allow_null);
        assert!(red.equilibrium_is_stable().unwrap());
        assert!(red.removed_resources_are_contested());

        let (opt, _) = brute_force_optimum(&g, DEFAULT_PROFILE_CAP).unwrap();
        let repair = repair_allocation(&red, &opt).unwrap();
        assert_eq!(repair.welfare, g.welfare(&opt));
    }

    #[test]
    fn repair_single_swap() {
        // Agent 1's optimal resource b was removed; agent 2 holds b at
        // equilibrium and idles in the optimum, so one move restores it.
        let g = Game::<Rational>::new(
            2,
            vec![
                ("a".to_string(), Rational::from_integer(0.into())),
                ("b".to_string(), Rational::from_integer(4.into())),
            ],
            vec![
                ("1".to_string(), ids(&["a", "b"]), false),
                ("2".to_string(), ids(&["b"]), true),
            ],
        )
        .unwrap();
        let ne = alloc(&g, &[Some("a"), Some("b")]);
        let red = reduction_game(&g, 2, &ne).unwrap();
        assert_eq!(red.removed[0], vec![1]);
        let opt = alloc(&g, &[Some("b"), None]);
        assert_eq!(g.welfare(&opt), brute_force_optimum(&g, 100).unwrap().1);
        let repair = repair_allocation(&red, &opt).unwrap();
        assert_eq!(repair.rounds, 1);
        assert_eq!(repair.allocation.choices(), &[None, Some(1)]);
        assert_eq!(repair.welfare, Rational::from_integer(4.into()));
    }

    #[test]
    fn repair_is_identity_when_nothing_is_lost() {
        let g = e1();
        let ne = alloc(&g, &[Some("r1"), Some("r0")]);
        let red = reduction_game(&g, 2, &ne).unwrap();
        let opt = alloc(&g, &[Some("r1"), Some("r0")]);
        let repair = repair_allocation(&red, &opt).unwrap();
        assert_eq!(repair.rounds, 0);
        assert_eq!(repair.allocation, opt);
    }

    fn arb_game() -> impl Strategy<Value = (Game<Rational>, usize)> {
        (any::<u64>(), 1usize..=4, 1usize..=5, 1usize..=4, any::<bool>()).prop_map(
            |(seed, n, m, k, nulls)| {
                let p = if nulls { 0.3 } else { 0.0 };
                let inst = random_instance_with_nulls::<Rational>(
                    seed, n.min(k * m), m, k, ValueLaw::Integer, p,
                )
                .unwrap();
                (inst.game, k)
            },
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn optimum_is_a_state_based_equilibrium((g, k) in arb_game()) {
            let (opt, _) = brute_force_optimum(&g, DEFAULT_PROFILE_CAP).unwrap();
            prop_assert!(is_sb_equilibrium(&g, k, &opt, &Rational::from_integer(0.into())).unwrap());
            let report = sb_equilibrium_analysis(&g, k, DEFAULT_PROFILE_CAP).unwrap();
            prop_assert_eq!(report.pos.clone(), Rational::from_integer(1.into()));
            prop_assert!(report.poa >= optimal_poa(k).unwrap());
        }

        #[test]
        fn toggles_agree_across_own_alternatives((g, _k) in arb_game(), pick in any::<u64>()) {
            let space = crate::profile::ProfileSpace::new(&g, DEFAULT_PROFILE_CAP).unwrap();
            let all = space.filter_map(|p| Some(p.to_vec()));
            let a = Allocation::new(&g, all[(pick % all.len() as u64) as usize].clone()).unwrap();
            for i in 0..g.num_agents() {
                prop_assert!(toggle_is_consistent(&g, &a, i));
            }
        }

        #[test]
        fn reduction_and_repair((g, k) in arb_game()) {
            let (opt, w_opt) = brute_force_optimum(&g, DEFAULT_PROFILE_CAP).unwrap();
            for ne in sb_equilibria(&g, k, DEFAULT_PROFILE_CAP).unwrap() {
                let red = reduction_game(&g, k, &ne).unwrap();
                prop_assert!(red.equilibrium_is_stable().unwrap());
                prop_assert!(red.removed_resources_are_contested());
                prop_assert!(red.added_resources_are_uncovered());
                let (_, w_red) = brute_force_optimum(&red.game, DEFAULT_PROFILE_CAP).unwrap();
                prop_assert!(w_red >= w_opt.clone());
                let repair = repair_allocation(&red, &opt).unwrap();
                prop_assert_eq!(repair.welfare, w_opt.clone());
            }
        }
    }
}
