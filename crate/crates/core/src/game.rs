//! Covering-game instances, allocations, welfare and rule-driven utilities.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rules::{DistributionRule, Shares};
use crate::scalar::{parse_rational, Rational, Scalar};

/// A resource index, or `None` for the null action.
pub type Choice = Option<usize>;

#[derive(Debug, Clone, PartialEq)]
pub struct Resource<S> {
    pub id: String,
    pub value: S,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Agent {
    pub id: String,
    /// Resource indices, sorted ascending and deduplicated.
    pub actions: Vec<usize>,
    pub allow_null: bool,
}

impl Agent {
    pub fn can_choose(&self, choice: Choice) -> bool {
        match choice {
            None => self.allow_null,
            Some(r) => self.actions.binary_search(&r).is_ok(),
        }
    }

    /// Action set in enumeration order: resources by index, then null.
    pub fn options(&self) -> impl Iterator<Item = Choice> + '_ {
        self.actions
            .iter()
            .map(|&r| Some(r))
            .chain(self.allow_null.then_some(None))
    }

    pub fn option_count(&self) -> usize {
        self.actions.len() + usize::from(self.allow_null)
    }
}

/// A covering game: valued resources, agents with action sets, and the
/// cardinality bound `k` of the family it belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct Game<S> {
    resources: Vec<Resource<S>>,
    agents: Vec<Agent>,
    k: usize,
}

impl<S: Scalar> Game<S> {
    /// Builds a game from ids. Fails with the full violation list if the
    /// result would not pass [`validate`].
    pub fn new<R, A>(k: usize, resources: R, agents: A) -> Result<Self>
    where
        R: IntoIterator<Item = (String, S)>,
        A: IntoIterator<Item = (String, Vec<String>, bool)>,
    {
        let resources: Vec<Resource<S>> = resources
            .into_iter()
            .map(|(id, value)| Resource { id, value })
            .collect();
        let agents: Vec<(String, Vec<String>, bool)> = agents.into_iter().collect();

        let mut errors = Vec::new();
        let mut resource_index = HashMap::new();
        for (idx, r) in resources.iter().enumerate() {
            if resource_index.insert(r.id.clone(), idx).is_some() {
                errors.push(format!("duplicate resource id {:?}", r.id));
            }
            if r.value < S::zero() {
                errors.push(format!("resource {:?} has negative value {}", r.id, r.value));
            }
        }
        let mut agent_ids = HashSet::new();
        let mut built = Vec::with_capacity(agents.len());
        for (id, actions, allow_null) in agents {
            if !agent_ids.insert(id.clone()) {
                errors.push(format!("duplicate agent id {id:?}"));
            }
            if actions.is_empty() {
                errors.push(format!("agent {id:?} has an empty action set"));
            }
            let mut indices = Vec::with_capacity(actions.len());
            for a in &actions {
                match resource_index.get(a) {
                    Some(&idx) => indices.push(idx),
                    None => errors.push(format!("agent {id:?} references missing resource {a:?}")),
                }
            }
            indices.sort_unstable();
            indices.dedup();
            built.push(Agent {
                id,
                actions: indices,
                allow_null,
            });
        }
        if k == 0 {
            errors.push("k must be positive".to_string());
        }
        let game = Game {
            resources,
            agents: built,
            k,
        };
        let cardinality = game.cardinality();
        if errors.is_empty() && cardinality > k {
            errors.push(format!("cardinality {cardinality} > k={k}"));
        }
        if errors.is_empty() {
            Ok(game)
        } else {
            Err(Error::InvalidGame(errors))
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn resources(&self) -> &[Resource<S>] {
        &self.resources
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn num_resources(&self) -> usize {
        self.resources.len()
    }

    pub fn value(&self, r: usize) -> &S {
        &self.resources[r].value
    }

    pub fn resource_index(&self, id: &str) -> Result<usize> {
        self.resources
            .iter()
            .position(|r| r.id == id)
            .ok_or_else(|| Error::UnknownResource(id.to_string()))
    }

    pub fn agent_index(&self, id: &str) -> Result<usize> {
        self.agents
            .iter()
            .position(|a| a.id == id)
            .ok_or_else(|| Error::UnknownAgent(id.to_string()))
    }

    /// Largest number of agents that can ever select one resource.
    pub fn cardinality(&self) -> usize {
        let mut holders = vec![0usize; self.resources.len()];
        for agent in &self.agents {
            for &r in &agent.actions {
                holders[r] += 1;
            }
        }
        holders.into_iter().max().unwrap_or(0)
    }

    /// Number of joint profiles over the (null-extended) action sets.
    pub fn profile_count(&self) -> u128 {
        self.agents
            .iter()
            .map(|a| a.option_count() as u128)
            .try_fold(1u128, |acc, c| acc.checked_mul(c))
            .unwrap_or(u128::MAX)
    }

    /// Same agents and resources with new values.
    pub fn map_values<T: Scalar>(&self, f: impl Fn(&S) -> T) -> Game<T> {
        Game {
            resources: self
                .resources
                .iter()
                .map(|r| Resource {
                    id: r.id.clone(),
                    value: f(&r.value),
                })
                .collect(),
            agents: self.agents.clone(),
            k: self.k,
        }
    }

    /// Same resources and values, new action sets (indices). Used by the
    /// state-based reduction.
    pub(crate) fn with_action_sets(&self, actions: Vec<(Vec<usize>, bool)>) -> Self {
        debug_assert_eq!(actions.len(), self.agents.len());
        let agents = self
            .agents
            .iter()
            .zip(actions)
            .map(|(agent, (mut set, allow_null))| {
                set.sort_unstable();
                set.dedup();
                Agent {
                    id: agent.id.clone(),
                    actions: set,
                    allow_null,
                }
            })
            .collect();
        Game {
            resources: self.resources.clone(),
            agents,
            k: self.k,
        }
    }

    pub(crate) fn set_k(&mut self, k: usize) {
        debug_assert!(self.cardinality() <= k);
        self.k = k;
    }

    /// Number of agents whose choice is `r`.
    pub fn coverage_count(&self, a: &Allocation, r: usize) -> Result<usize> {
        if r >= self.resources.len() {
            return Err(Error::UnknownResource(format!("#{r}")));
        }
        Ok(a.choices().iter().filter(|&&c| c == Some(r)).count())
    }

    pub fn coverage_count_by_id(&self, a: &Allocation, id: &str) -> Result<usize> {
        self.coverage_count(a, self.resource_index(id)?)
    }

    /// Per-resource coverage counts.
    pub fn counts(&self, choices: &[Choice]) -> Vec<usize> {
        let mut counts = vec![0usize; self.resources.len()];
        for &r in choices.iter().flatten() {
            counts[r] += 1;
        }
        counts
    }

    /// Total value of resources covered by at least one agent.
    pub fn welfare(&self, a: &Allocation) -> S {
        self.welfare_of(a.choices())
    }

    pub(crate) fn welfare_of(&self, choices: &[Choice]) -> S {
        self.welfare_from_counts(&self.counts(choices))
    }

    pub(crate) fn welfare_from_counts(&self, counts: &[usize]) -> S {
        counts
            .iter()
            .zip(&self.resources)
            .filter(|(&c, _)| c > 0)
            .fold(S::zero(), |acc, (_, r)| acc + r.value.clone())
    }

    /// `v_{a_i} · f(|a|_{a_i})`, zero at the null action.
    pub fn utility(&self, f: &DistributionRule, agent: usize, a: &Allocation) -> Result<S> {
        let Some(r) = a.choices()[agent] else {
            return Ok(S::zero());
        };
        let count = self.coverage_count(a, r)?;
        let share = f.get(count).ok_or(Error::RuleUndefined { k: f.k(), count })?;
        Ok(self.resources[r].value.clone() * S::from_rational(share))
    }

    /// Unchecked utility given precomputed coverage counts.
    pub(crate) fn utility_from_counts(
        &self,
        shares: &Shares<S>,
        choice: Choice,
        counts: &[usize],
    ) -> S {
        match choice {
            None => S::zero(),
            Some(r) => self.resources[r].value.clone() * shares.at(counts[r]).clone(),
        }
    }

    /// Utility agent `i` would get by switching to `alt`, others fixed.
    /// `counts` are the counts of the current profile, where `i` plays `current`.
    pub(crate) fn deviation_utility(
        &self,
        shares: &Shares<S>,
        current: Choice,
        alt: Choice,
        counts: &[usize],
    ) -> S {
        match alt {
            None => S::zero(),
            Some(r) => {
                let others = counts[r] - usize::from(current == Some(r));
                self.resources[r].value.clone() * shares.at(others + 1).clone()
            }
        }
    }

    pub fn to_file(&self) -> GameFile {
        GameFile {
            k: self.k,
            resources: self
                .resources
                .iter()
                .map(|r| ResourceEntry {
                    id: r.id.clone(),
                    value: NumberRepr::from_scalar(&r.value),
                })
                .collect(),
            agents: self
                .agents
                .iter()
                .map(|a| AgentEntry {
                    id: a.id.clone(),
                    actions: a.actions.iter().map(|&r| self.resources[r].id.clone()).collect(),
                    allow_null: a.allow_null,
                })
                .collect(),
        }
    }

    pub fn from_file(file: &GameFile) -> Result<Self> {
        let report = validate(file);
        if !report.is_valid() {
            return Err(Error::InvalidGame(report.violations));
        }
        let resources = file
            .resources
            .iter()
            .map(|r| Ok((r.id.clone(), r.value.to_scalar::<S>()?)))
            .collect::<Result<Vec<_>>>()?;
        let agents = file
            .agents
            .iter()
            .map(|a| (a.id.clone(), a.actions.clone(), a.allow_null));
        Game::new(file.k, resources, agents)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: GameFile = serde_json::from_str(text)?;
        Game::from_file(&file)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("game file serializes")
    }
}

/// One action per agent, in agent declaration order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Allocation {
    choice: Vec<Choice>,
}

impl Allocation {
    /// Checks every choice against the agent's (null-extended) action set.
    pub fn new<S: Scalar>(game: &Game<S>, choice: Vec<Choice>) -> Result<Self> {
        if choice.len() != game.num_agents() {
            return Err(Error::InvalidAllocation(format!(
                "{} choices for {} agents",
                choice.len(),
                game.num_agents()
            )));
        }
        for (agent, &c) in game.agents().iter().zip(&choice) {
            if !agent.can_choose(c) {
                let what = match c {
                    Some(r) => game
                        .resources()
                        .get(r)
                        .map(|res| res.id.clone())
                        .unwrap_or_else(|| format!("#{r}")),
                    None => "null".to_string(),
                };
                return Err(Error::InvalidAllocation(format!(
                    "agent {:?} cannot choose {what}",
                    agent.id
                )));
            }
        }
        Ok(Allocation { choice })
    }

    pub(crate) fn from_choices_unchecked(choice: Vec<Choice>) -> Self {
        Allocation { choice }
    }

    /// Builds from resource ids (`None` = null), one per agent in order.
    pub fn from_ids<S: Scalar>(game: &Game<S>, ids: &[Option<&str>]) -> Result<Self> {
        let choice = ids
            .iter()
            .map(|id| id.map(|id| game.resource_index(id)).transpose())
            .collect::<Result<Vec<_>>>()?;
        Allocation::new(game, choice)
    }

    pub fn choices(&self) -> &[Choice] {
        &self.choice
    }

    pub fn choice(&self, agent: usize) -> Choice {
        self.choice[agent]
    }

    pub fn with_choice(&self, agent: usize, choice: Choice) -> Self {
        let mut next = self.clone();
        next.choice[agent] = choice;
        next
    }

    /// Resource ids per agent, for display and tests.
    pub fn ids<'g, S: Scalar>(&self, game: &'g Game<S>) -> Vec<Option<&'g str>> {
        self.choice
            .iter()
            .map(|c| c.map(|r| game.resources()[r].id.as_str()))
            .collect()
    }

    pub fn to_file<S: Scalar>(&self, game: &Game<S>) -> AllocationFile {
        let mut choice = serde_json::Map::new();
        for (agent, c) in game.agents().iter().zip(&self.choice) {
            let value = match c {
                Some(r) => serde_json::Value::String(game.resources()[*r].id.clone()),
                None => serde_json::Value::Null,
            };
            choice.insert(agent.id.clone(), value);
        }
        AllocationFile { choice }
    }

    pub fn from_file<S: Scalar>(game: &Game<S>, file: &AllocationFile) -> Result<Self> {
        for key in file.choice.keys() {
            game.agent_index(key)?;
        }
        let mut choice = Vec::with_capacity(game.num_agents());
        for agent in game.agents() {
            let entry = file.choice.get(&agent.id).ok_or_else(|| {
                Error::InvalidAllocation(format!("no choice for agent {:?}", agent.id))
            })?;
            let c = match entry {
                serde_json::Value::Null => None,
                serde_json::Value::String(id) => Some(game.resource_index(id)?),
                other => {
                    return Err(Error::InvalidAllocation(format!(
                        "choice for {:?} must be a resource id or null, got {other}",
                        agent.id
                    )))
                }
            };
            choice.push(c);
        }
        Allocation::new(game, choice)
    }
}

/// A number in a JSON document: either a JSON number or a `"p/q"` string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NumberRepr {
    Number(serde_json::Number),
    Text(String),
}

impl NumberRepr {
    /// Decimals are read as exact decimal fractions.
    pub fn to_rational(&self) -> Result<Rational> {
        match self {
            NumberRepr::Number(n) => parse_rational(&n.to_string()),
            NumberRepr::Text(s) => parse_rational(s),
        }
    }

    pub fn to_scalar<S: Scalar>(&self) -> Result<S> {
        Ok(S::from_rational(&self.to_rational()?))
    }

    /// JSON number when the value survives an `f64` round trip unchanged,
    /// otherwise an exact string.
    pub fn from_scalar<S: Scalar>(x: &S) -> Self {
        let f = x.to_f64();
        if !S::is_exact() {
            if let Some(n) = serde_json::Number::from_f64(f) {
                return NumberRepr::Number(n);
            }
        }
        let exact = x.to_exact_string();
        match (serde_json::Number::from_f64(f), parse_rational(&exact)) {
            (Some(n), Ok(r)) if parse_rational(&n.to_string()).ok() == Some(r.clone()) => {
                NumberRepr::Number(n)
            }
            _ => NumberRepr::Text(exact),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceEntry {
    pub id: String,
    pub value: NumberRepr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentEntry {
    pub id: String,
    pub actions: Vec<String>,
    #[serde(default)]
    pub allow_null: bool,
}

/// On-disk game document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameFile {
    pub k: usize,
    pub resources: Vec<ResourceEntry>,
    pub agents: Vec<AgentEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationFile {
    pub choice: serde_json::Map<String, serde_json::Value>,
}

/// Outcome of [`validate`]: the computed cardinality plus every violation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub cardinality: usize,
    pub k: usize,
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Lists dangling ids, empty action sets, duplicate ids, bad values and a
/// cardinality above `k`.
pub fn validate(file: &GameFile) -> ValidationReport {
    let mut violations = Vec::new();
    let mut holders: HashMap<&str, HashSet<&str>> = HashMap::new();
    for r in &file.resources {
        if holders.insert(r.id.as_str(), HashSet::new()).is_some() {
            violations.push(format!("duplicate resource id {:?}", r.id));
        }
        match r.value.to_rational() {
            Ok(v) if v < Rational::from_integer(0.into()) => {
                violations.push(format!("resource {:?} has negative value", r.id))
            }
            Ok(_) => {}
            Err(e) => violations.push(format!("resource {:?}: {e}", r.id)),
        }
    }
    let mut agent_ids = HashSet::new();
    for a in &file.agents {
        if !agent_ids.insert(a.id.as_str()) {
            violations.push(format!("duplicate agent id {:?}", a.id));
        }
        if a.actions.is_empty() {
            violations.push(format!("agent {:?} has an empty action set", a.id));
        }
        for action in &a.actions {
            match holders.get_mut(action.as_str()) {
                Some(set) => {
                    set.insert(a.id.as_str());
                }
                None => violations.push(format!(
                    "dangling id: agent {:?} references missing resource {action:?}",
                    a.id
                )),
            }
        }
    }
    let cardinality = holders.values().map(HashSet::len).max().unwrap_or(0);
    if file.k == 0 {
        violations.push("k must be positive".to_string());
    }
    if cardinality > file.k {
        violations.push(format!("cardinality {cardinality} > k={}", file.k));
    }
    ValidationReport {
        cardinality,
        k: file.k,
        violations,
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use crate::scalar::ratio;

    fn ids(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    /// r0=1, r1=0.6, r2=0.4; A_1={r0,r1}, A_2={r0,r2}.
    pub fn e1_exact() -> Game<Rational> {
        Game::new(
            2,
            vec![
                ("r0".to_string(), ratio(1, 1)),
                ("r1".to_string(), ratio(3, 5)),
                ("r2".to_string(), ratio(2, 5)),
            ],
            vec![
                ("1".to_string(), ids(&["r0", "r1"]), false),
                ("2".to_string(), ids(&["r0", "r2"]), false),
            ],
        )
        .unwrap()
    }

    pub fn e1() -> Game<f64> {
        e1_exact().map_values(|v| v.to_f64())
    }

    /// r0=1, r1=0.5, r2=2; A_1={r0,r1}, A_2={r0,r2}.
    pub fn e2() -> Game<f64> {
        Game::new(
            2,
            vec![
                ("r0".to_string(), 1.0),
                ("r1".to_string(), 0.5),
                ("r2".to_string(), 2.0),
            ],
            vec![
                ("1".to_string(), ids(&["r0", "r1"]), false),
                ("2".to_string(), ids(&["r0", "r2"]), false),
            ],
        )
        .unwrap()
    }

    pub fn alloc<S: Scalar>(game: &Game<S>, ids: &[Option<&str>]) -> Allocation {
        Allocation::from_ids(game, ids).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use crate::rules::DistributionRule;
    use crate::scalar::ratio;
    use proptest::prelude::*;

    #[test]
    fn coverage_counts() {
        let g = e1();
        let a = alloc(&g, &[Some("r0"), Some("r0")]);
        assert_eq!(g.coverage_count_by_id(&a, "r0").unwrap(), 2);
        assert!(g.coverage_count_by_id(&a, "zz").is_err());

        let three = Game::new(
            3,
            vec![("r0".to_string(), 1.0), ("r1".to_string(), 1.0)],
            (1..=3).map(|i| (i.to_string(), vec!["r0".to_string(), "r1".to_string()], true)),
        )
        .unwrap();
        let a = alloc(&three, &[Some("r1"), Some("r0"), Some("r1")]);
        assert_eq!(three.coverage_count_by_id(&a, "r1").unwrap(), 2);
        let a = alloc(&three, &[None, Some("r0"), Some("r0")]);
        assert_eq!(three.coverage_count_by_id(&a, "r1").unwrap(), 0);
    }

    #[test]
    fn welfare_examples() {
        let g = e1_exact();
        assert_eq!(g.welfare(&alloc(&g, &[Some("r0"), Some("r0")])), ratio(1, 1));
        assert_eq!(g.welfare(&alloc(&g, &[Some("r1"), Some("r0")])), ratio(8, 5));
        let nulls = g.with_action_sets(vec![(vec![0, 1], true), (vec![0, 2], true)]);
        assert_eq!(nulls.welfare(&alloc(&nulls, &[None, None])), ratio(0, 1));
    }

    #[test]
    fn utility_examples() {
        let g = e1_exact();
        let f = DistributionRule::new(vec![ratio(1, 1), ratio(1, 2)]).unwrap();
        let shared = alloc(&g, &[Some("r0"), Some("r0")]);
        assert_eq!(g.utility(&f, 0, &shared).unwrap(), ratio(1, 2));
        let split = alloc(&g, &[Some("r1"), Some("r0")]);
        assert_eq!(g.utility(&f, 1, &split).unwrap(), ratio(1, 1));

        let nulls = g.with_action_sets(vec![(vec![0, 1], true), (vec![0, 2], false)]);
        assert_eq!(
            nulls.utility(&f, 0, &alloc(&nulls, &[None, Some("r0")])).unwrap(),
            ratio(0, 1)
        );

        let narrow = DistributionRule::new(vec![ratio(1, 1)]).unwrap();
        assert!(matches!(
            g.utility(&narrow, 0, &shared),
            Err(Error::RuleUndefined { k: 1, count: 2 })
        ));
    }

    fn e1_file(k: usize) -> GameFile {
        serde_json::from_str(&format!(
            r#"{{"k": {k},
                "resources": [{{"id":"r0","value":1}},{{"id":"r1","value":0.6}},{{"id":"r2","value":0.4}}],
                "agents": [{{"id":"1","actions":["r0","r1"],"allow_null":false}},
                           {{"id":"2","actions":["r0","r2"],"allow_null":false}}]}}"#
        ))
        .unwrap()
    }

    #[test]
    fn validate_examples() {
        let report = validate(&e1_file(2));
        assert!(report.is_valid());
        assert_eq!(report.cardinality, 2);

        let report = validate(&e1_file(1));
        assert_eq!(report.violations, vec!["cardinality 2 > k=1".to_string()]);

        let mut dangling = e1_file(2);
        dangling.agents[0].actions.push("r9".to_string());
        let report = validate(&dangling);
        assert!(report.violations.iter().any(|v| v.starts_with("dangling id")));

        let mut empty = e1_file(2);
        empty.agents[1].actions.clear();
        assert!(!validate(&empty).is_valid());
        assert!(Game::<f64>::from_file(&empty).is_err());
    }

    #[test]
    fn decimal_values_parse_exactly() {
        let g = Game::<Rational>::from_file(&e1_file(2)).unwrap();
        assert_eq!(g, e1_exact());
        let back: Game<Rational> = Game::from_json(&g.to_json()).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn allocation_file_round_trip() {
        let g = e1();
        let a = alloc(&g, &[Some("r1"), Some("r0")]);
        let file = a.to_file(&g);
        let text = serde_json::to_string(&file).unwrap();
        assert_eq!(text, r#"{"choice":{"1":"r1","2":"r0"}}"#);
        let parsed: AllocationFile = serde_json::from_str(&text).unwrap();
        assert_eq!(Allocation::from_file(&g, &parsed).unwrap(), a);

        let bad: AllocationFile = serde_json::from_str(r#"{"choice":{"1":null,"2":"r0"}}"#).unwrap();
        assert!(Allocation::from_file(&g, &bad).is_err());
        let stray: AllocationFile =
            serde_json::from_str(r#"{"choice":{"1":"r0","2":"r0","3":"r0"}}"#).unwrap();
        assert!(Allocation::from_file(&g, &stray).is_err());
    }

    fn arb_game() -> impl Strategy<Value = Game<Rational>> {
        (1usize..=4, 1usize..=4).prop_flat_map(|(n, m)| {
            (
                proptest::collection::vec(0i64..10, m),
                proptest::collection::vec(
                    (proptest::collection::btree_set(0..m, 1..=m), any::<bool>()),
                    n,
                ),
            )
                .prop_map(move |(values, agents)| {
                    Game::new(
                        n.max(1),
                        values
                            .into_iter()
                            .enumerate()
                            .map(|(r, v)| (format!("r{r}"), ratio(v, 1))),
                        agents.into_iter().enumerate().map(|(i, (set, null))| {
                            (
                                format!("a{i}"),
                                set.into_iter().map(|r| format!("r{r}")).collect(),
                                null,
                            )
                        }),
                    )
                    .unwrap()
                })
        })
    }

    fn all_profiles(g: &Game<Rational>) -> Vec<Vec<Choice>> {
        let mut out = vec![vec![]];
        for agent in g.agents() {
            out = out
                .into_iter()
                .flat_map(|p| {
                    agent.options().map(move |c| {
                        let mut q = p.clone();
                        q.push(c);
                        q
                    })
                })
                .collect();
        }
        out
    }

    proptest! {
        #[test]
        fn welfare_matches_agentwise_dedup(g in arb_game()) {
            for p in all_profiles(&g) {
                let a = Allocation::new(&g, p.clone()).unwrap();
                let mut seen = HashSet::new();
                let mut by_agent = Rational::from_integer(0.into());
                for r in p.iter().flatten() {
                    if seen.insert(*r) {
                        by_agent += g.value(*r).clone();
                    }
                }
                prop_assert_eq!(g.welfare(&a), by_agent);
            }
        }

        #[test]
        fn max_coverage_equals_holder_count(g in arb_game()) {
            let profiles = all_profiles(&g);
            for r in 0..g.num_resources() {
                let holders = g.agents().iter().filter(|a| a.actions.contains(&r)).count();
                let max_cover = profiles.iter().map(|p| g.counts(p)[r]).max().unwrap();
                prop_assert_eq!(max_cover, holders);
            }
        }

        #[test]
        fn utility_is_anonymous(g in arb_game(), swap in any::<proptest::sample::Index>()) {
            let f = crate::rules::equal_share_rule(g.k()).unwrap();
            for p in all_profiles(&g).into_iter().take(50) {
                let a = Allocation::from_choices_unchecked(p.clone());
                let i = swap.index(p.len());
                for j in 0..p.len() {
                    if p[i] == p[j] {
                        prop_assert_eq!(g.utility(&f, i, &a).unwrap(), g.utility(&f, j, &a).unwrap());
                    }
                }
            }
        }
    }
}
