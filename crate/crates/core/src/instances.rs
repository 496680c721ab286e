//! Worst-case constructions behind the tightness results, plus seeded random
//! games for sweeps.
//!
//! Each structured generator builds its game in exact arithmetic and checks
//! its own claims (equilibrium at zero tolerance, welfare identities) before
//! handing the game out, converted to the requested scalar type.

use num_traits::{One, Zero};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::equilibrium::{brute_force_optimum, is_equilibrium};
use crate::error::{Error, Result};
use crate::game::{Allocation, Game};
use crate::profile::DEFAULT_PROFILE_CAP;
use crate::rules::DistributionRule;
use crate::scalar::{int, Rational, Scalar};
use crate::search::{enumerate_equilibria_pruned, optimum_by_assignment, DEFAULT_NODE_BUDGET};

/// Largest action set drawn by [`random_instance`].
pub const MAX_RANDOM_ACTIONS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Level,
    Simple,
    PosFamily,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueLaw {
    /// Six-decimal values drawn uniformly from `[0, 1)`.
    Uniform,
    /// Integers drawn uniformly from `1..=10`.
    Integer,
}

impl std::str::FromStr for ValueLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(ValueLaw::Uniform),
            "integer" => Ok(ValueLaw::Integer),
            other => Err(Error::Parse(format!("unknown value law {other:?}"))),
        }
    }
}

/// Sidecar record describing how a game was generated and what it claims.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub family: Family,
    pub parameters: serde_json::Value,
    pub rule: Option<Vec<String>>,
    pub claimed_equilibrium: Option<serde_json::Value>,
    pub claimed_w_ne: Option<String>,
    pub claimed_w_opt: Option<String>,
}

#[derive(Debug, Clone)]
pub struct GeneratedInstance<S> {
    pub game: Game<S>,
    /// The equilibrium the construction is built around.
    pub equilibrium: Option<Allocation>,
    pub w_ne: Option<Rational>,
    pub w_opt: Option<Rational>,
    pub provenance: Provenance,
}

fn convert<S: Scalar>(inst: GeneratedInstance<Rational>) -> GeneratedInstance<S> {
    GeneratedInstance {
        game: inst.game.map_values(S::from_rational),
        equilibrium: inst.equilibrium,
        w_ne: inst.w_ne,
        w_opt: inst.w_opt,
        provenance: inst.provenance,
    }
}

fn rule_strings(f: &DistributionRule) -> Vec<String> {
    f.values().iter().map(Scalar::to_exact_string).collect()
}

fn provenance(
    family: Family,
    parameters: serde_json::Value,
    f: &DistributionRule,
    game: &Game<Rational>,
    ne: &Allocation,
    w_ne: &Rational,
    w_opt: &Rational,
) -> Provenance {
    Provenance {
        family,
        parameters,
        rule: Some(rule_strings(f)),
        claimed_equilibrium: Some(serde_json::to_value(ne.to_file(game).choice).expect("map")),
        claimed_w_ne: Some(w_ne.to_exact_string()),
        claimed_w_opt: Some(w_opt.to_exact_string()),
    }
}

fn claim(ok: bool, what: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Inconsistency(what()))
    }
}

fn named(prefix: &str, parts: &[usize]) -> String {
    let tail: Vec<String> = parts.iter().map(usize::to_string).collect();
    format!("{prefix}{}", tail.join("_"))
}

/// Chain of `m + 1` levels with `j` agents each. Level 0 agents choose
/// between a private resource worth `f(j)` and the common resource `c0`
/// (worth 1); at level `l` there are `j − 1` agents choosing between a private
/// resource worth `γ^l f(j)` and `c_l` (worth `γ^l`), plus one linking agent
/// choosing between `c_{l−1}` and `c_l`, where `γ = f(j+1)/f(j)`.
///
/// Everyone on their own level's common resource is an equilibrium with
/// welfare `1 + γ + … + γ^m`; the optimum is
/// `W(ne)(1 + (j−1)f(j)) + f(j)(1 − γ^m)`.
pub fn level_instance<S: Scalar>(
    f: &DistributionRule,
    j: usize,
    m: usize,
) -> Result<GeneratedInstance<S>> {
    let k = f.k();
    if j == 0 || j + 1 > k {
        return Err(Error::InvalidParameters(format!(
            "level family needs 1 <= j <= k-1, got j={j}, k={k}"
        )));
    }
    if m == 0 {
        return Err(Error::InvalidParameters("level family needs m >= 1".into()));
    }
    let fj = f.f(j).clone();
    if fj <= *f.f(j + 1) {
        return Err(Error::InvalidParameters(format!(
            "f({j}) = f({}) (gamma = 1); use the simple family",
            j + 1
        )));
    }
    let gamma = f.f(j + 1).clone() / fj.clone();

    let mut resources: Vec<(String, Rational)> = Vec::new();
    let mut agents: Vec<(String, Vec<String>, bool)> = Vec::new();
    // (agent index, equilibrium resource, optimal resource)
    let mut ne_ids: Vec<String> = Vec::new();
    let mut opt_ids: Vec<String> = Vec::new();
    let mut scale = Rational::one();
    for level in 0..=m {
        let common = named("c", &[level]);
        let privates = if level == 0 { j } else { j - 1 };
        for p in 1..=privates {
            resources.push((named("p", &[level, p]), scale.clone() * fj.clone()));
        }
        resources.push((common.clone(), scale.clone()));
        for p in 1..=privates {
            let private = named("p", &[level, p]);
            agents.push((named("a", &[level, p]), vec![private.clone(), common.clone()], false));
            ne_ids.push(common.clone());
            // the last private agent of the top level keeps the common resource
            let keeps_common = level == m && level > 0 && p == privates;
            opt_ids.push(if keeps_common { common.clone() } else { private });
        }
        if level > 0 {
            let below = named("c", &[level - 1]);
            agents.push((named("link", &[level]), vec![below.clone(), common.clone()], false));
            ne_ids.push(common.clone());
            opt_ids.push(below);
        }
        scale *= gamma.clone();
    }
    let game = Game::new(k, resources, agents)?;
    let as_alloc = |ids: &[String]| {
        let refs: Vec<Option<&str>> = ids.iter().map(|s| Some(s.as_str())).collect();
        Allocation::from_ids(&game, &refs)
    };
    let ne = as_alloc(&ne_ids)?;
    let opt = as_alloc(&opt_ids)?;

    let gamma_pow = |e: usize| num_traits::pow(gamma.clone(), e);
    let w_ne_closed = (Rational::one() - gamma_pow(m + 1)) / (Rational::one() - gamma.clone());
    let w_opt_closed = w_ne_closed.clone() * (Rational::one() + int(j as i64 - 1) * fj.clone())
        + fj.clone() * (Rational::one() - gamma_pow(m));
    let w_ne = game.welfare(&ne);
    let w_opt = game.welfare(&opt);
    claim(w_ne == w_ne_closed, || {
        format!("level W(ne) = {w_ne} but closed form gives {w_ne_closed}")
    })?;
    claim(w_opt == w_opt_closed, || {
        format!("level W(opt) = {w_opt} but closed form gives {w_opt_closed}")
    })?;
    claim(is_equilibrium(&game, f, &ne, &Rational::zero())?, || {
        "level construction's claimed equilibrium is not stable".into()
    })?;
    let parameters = serde_json::json!({ "j": j, "m": m, "k": k });
    let provenance = provenance(Family::Level, parameters, f, &game, &ne, &w_ne, &w_opt);
    Ok(convert(GeneratedInstance {
        game,
        equilibrium: Some(ne),
        w_ne: Some(w_ne),
        w_opt: Some(w_opt),
        provenance,
    }))
}

/// `j` agents sharing a resource worth 1; agents `2..=j` also have a private
/// resource worth `f(j)` and agent 1 a private resource worth 0. All on the
/// shared resource is an equilibrium with welfare 1 against an optimum of
/// `1 + (j−1)f(j)`.
pub fn simple_tight_instance<S: Scalar>(
    f: &DistributionRule,
    j: usize,
) -> Result<GeneratedInstance<S>> {
    let k = f.k();
    if j == 0 || j > k {
        return Err(Error::InvalidParameters(format!(
            "simple family needs 1 <= j <= k, got j={j}, k={k}"
        )));
    }
    let fj = f.f(j).clone();
    let mut resources = vec![("c".to_string(), Rational::one())];
    let mut agents = Vec::new();
    for i in 1..=j {
        let value = if i == 1 { Rational::zero() } else { fj.clone() };
        resources.push((named("p", &[i]), value));
        agents.push((i.to_string(), vec!["c".to_string(), named("p", &[i])], false));
    }
    let game = Game::new(k, resources, agents)?;
    let ne = Allocation::new(&game, vec![Some(0); j])?;
    let opt = Allocation::new(
        &game,
        (1..=j).map(|i| Some(if i == 1 { 0 } else { i })).collect(),
    )?;
    let w_ne = game.welfare(&ne);
    let w_opt = game.welfare(&opt);
    let w_opt_closed = Rational::one() + int(j as i64 - 1) * fj;
    claim(w_ne.is_one(), || format!("simple W(ne) = {w_ne}, expected 1"))?;
    claim(w_opt == w_opt_closed, || {
        format!("simple W(opt) = {w_opt}, expected {w_opt_closed}")
    })?;
    claim(brute_force_optimum(&game, DEFAULT_PROFILE_CAP).map_or(true, |(_, w)| w == w_opt), || {
        "simple construction's listed optimum is not optimal".into()
    })?;
    claim(is_equilibrium(&game, f, &ne, &Rational::zero())?, || {
        "simple construction's claimed equilibrium is not stable".into()
    })?;
    let parameters = serde_json::json!({ "j": j, "k": k });
    let provenance = provenance(Family::Simple, parameters, f, &game, &ne, &w_ne, &w_opt);
    Ok(convert(GeneratedInstance {
        game,
        equilibrium: Some(ne),
        w_ne: Some(w_ne),
        w_opt: Some(w_opt),
        provenance,
    }))
}

/// `j` agents and `j + 1` resources: `r0` worth 1 and `r_i` worth
/// `f(j) − ε`, with `A_i = {r0, r_i}`. All on `r0` is the unique equilibrium,
/// so the best equilibrium ratio is `1 / (1 + (j−1)(f(j) − ε))`.
pub fn pos_family_instance<S: Scalar>(
    f: &DistributionRule,
    j: usize,
    epsilon: &Rational,
) -> Result<GeneratedInstance<S>> {
    let k = f.k();
    if j == 0 || j > k {
        return Err(Error::InvalidParameters(format!(
            "pos family needs 1 <= j <= k, got j={j}, k={k}"
        )));
    }
    let fj = f.f(j).clone();
    if epsilon <= &Rational::zero() || epsilon >= &fj {
        return Err(Error::InvalidParameters(format!(
            "pos family needs 0 < epsilon < f(j) = {}, got {}",
            fj.to_exact_string(),
            epsilon.to_exact_string()
        )));
    }
    let side = fj - epsilon.clone();
    let mut resources = vec![("r0".to_string(), Rational::one())];
    let mut agents = Vec::new();
    for i in 1..=j {
        resources.push((named("r", &[i]), side.clone()));
        agents.push((i.to_string(), vec!["r0".to_string(), named("r", &[i])], false));
    }
    let game = Game::new(k, resources, agents)?;
    let ne = Allocation::new(&game, vec![Some(0); j])?;
    let w_ne = game.welfare(&ne);

    let equilibria =
        enumerate_equilibria_pruned(&game, f, &Rational::zero(), DEFAULT_NODE_BUDGET)?;
    claim(equilibria == vec![ne.clone()], || {
        format!("pos family has {} equilibria, expected only all-on-r0", equilibria.len())
    })?;
    let (_, w_opt) = match brute_force_optimum(&game, DEFAULT_PROFILE_CAP) {
        Ok(best) => best,
        Err(Error::CapExceeded { .. }) => optimum_by_assignment(&game),
        Err(e) => return Err(e),
    };
    let w_opt_closed = Rational::one() + int(j as i64 - 1) * side;
    claim(w_opt == w_opt_closed, || {
        format!("pos family W(opt) = {w_opt}, expected {w_opt_closed}")
    })?;
    let parameters =
        serde_json::json!({ "j": j, "k": k, "epsilon": epsilon.to_exact_string() });
    let provenance = provenance(Family::PosFamily, parameters, f, &game, &ne, &w_ne, &w_opt);
    Ok(convert(GeneratedInstance {
        game,
        equilibrium: Some(ne),
        w_ne: Some(w_ne),
        w_opt: Some(w_opt),
        provenance,
    }))
}

/// Deterministic random game with cardinality at most `k`. Each agent draws
/// up to [`MAX_RANDOM_ACTIONS`] distinct resources; resources already held by
/// `k` agents are thinned out, and an agent left empty-handed gets a random
/// resource that still has room.
pub fn random_instance<S: Scalar>(
    seed: u64,
    n: usize,
    num_resources: usize,
    k: usize,
    law: ValueLaw,
) -> Result<Game<S>> {
    Ok(random_instance_with_nulls(seed, n, num_resources, k, law, 0.0)?.game)
}

/// [`random_instance`] where each agent may also stay idle with probability
/// `null_probability`.
pub fn random_instance_with_nulls<S: Scalar>(
    seed: u64,
    n: usize,
    num_resources: usize,
    k: usize,
    law: ValueLaw,
    null_probability: f64,
) -> Result<GeneratedInstance<S>> {
    if k == 0 {
        return Err(Error::InvalidParameters("k must be positive".into()));
    }
    if n == 0 || num_resources == 0 {
        return Err(Error::InvalidParameters(
            "need at least one agent and one resource".into(),
        ));
    }
    if n > k * num_resources {
        return Err(Error::InvalidParameters(format!(
            "{n} agents cannot fit on {num_resources} resources with k={k}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values: Vec<Rational> = (0..num_resources)
        .map(|_| match law {
            ValueLaw::Uniform => {
                Rational::new(rng.gen_range(0..1_000_000i64).into(), 1_000_000i64.into())
            }
            ValueLaw::Integer => int(rng.gen_range(1..=10)),
        })
        .collect();
    let mut holders = vec![0usize; num_resources];
    // open slots; kept at least as large as the number of agents still to place
    let mut free = k * num_resources;
    let mut agents = Vec::with_capacity(n);
    for i in 0..n {
        let later = n - i - 1;
        let size = rng.gen_range(1..=num_resources.min(MAX_RANDOM_ACTIONS));
        let mut picked = Vec::with_capacity(size);
        for r in sample(&mut rng, num_resources, size) {
            let reserve = if picked.is_empty() { later } else { later + 1 };
            if holders[r] < k && free > reserve {
                picked.push(r);
                holders[r] += 1;
                free -= 1;
            }
        }
        if picked.is_empty() {
            let open: Vec<usize> = (0..num_resources).filter(|&r| holders[r] < k).collect();
            let r = open[rng.gen_range(0..open.len())];
            picked.push(r);
            holders[r] += 1;
            free -= 1;
        }
        picked.sort_unstable();
        let allow_null = null_probability > 0.0 && rng.gen_bool(null_probability.min(1.0));
        agents.push((
            format!("a{i}"),
            picked.into_iter().map(|r| format!("r{r}")).collect(),
            allow_null,
        ));
    }
    let resources = values
        .into_iter()
        .enumerate()
        .map(|(r, v)| (format!("r{r}"), S::from_rational(&v)));
    let game = Game::new(k, resources, agents)?;
    let provenance = Provenance {
        family: Family::Random,
        parameters: serde_json::json!({
            "seed": seed, "n": n, "resources": num_resources, "k": k,
            "value_law": law, "null_probability": null_probability,
        }),
        rule: None,
        claimed_equilibrium: None,
        claimed_w_ne: None,
        claimed_w_opt: None,
    };
    Ok(GeneratedInstance {
        game,
        equilibrium: None,
        w_ne: None,
        w_opt: None,
        provenance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::{efficiency, efficiency_pruned};
    use crate::game::validate;
    use crate::rules::{gairing_rule, mc_rule, poa_bound, pos_bound};
    use crate::scalar::ratio;
    use num_traits::Signed;

    #[test]
    fn level_limits_for_half_rule() {
        let f = gairing_rule(2).unwrap();
        // W(ne) -> 1/(1-γ) = 2 and W(opt) -> 3 as m grows
        let inst = level_instance::<Rational>(&f, 1, 20).unwrap();
        let w_ne = inst.w_ne.clone().unwrap();
        let w_opt = inst.w_opt.clone().unwrap();
        let gap = ratio(1, 1 << 20);
        assert!(int(2) - w_ne.clone() <= gap);
        assert!(int(3) - w_opt.clone() <= gap * int(2));
        let r = w_ne / w_opt;
        assert!((r - ratio(2, 3)).abs() <= ratio(1, 1 << 20));
    }

    #[test]
    fn level_ratio_is_enumerated_worst_case() {
        let f = gairing_rule(2).unwrap();
        for m in [1usize, 4, 8] {
            let inst = level_instance::<Rational>(&f, 1, m).unwrap();
            let exhaustive = efficiency(&inst.game, &f, DEFAULT_PROFILE_CAP).unwrap();
            let pruned = efficiency_pruned(&inst.game, &f, DEFAULT_NODE_BUDGET).unwrap();
            assert_eq!(exhaustive, pruned);
            let claimed = inst.w_ne.unwrap() / inst.w_opt.unwrap();
            assert_eq!(exhaustive.poa, claimed, "m={m}");
        }
    }

    #[test]
    fn level_shape_and_validation() {
        let f = gairing_rule(4).unwrap();
        let inst = level_instance::<f64>(&f, 3, 2).unwrap();
        let g = &inst.game;
        // 3 agents per level, 3 + 1 + 2 * (2 + 1) resources
        assert_eq!(g.num_agents(), 9);
        assert_eq!(g.num_resources(), 10);
        assert_eq!(g.cardinality(), 4);
        assert!(validate(&g.to_file()).is_valid());
        assert!(level_instance::<f64>(&f, 4, 2).is_err());
        assert!(level_instance::<f64>(&f, 0, 2).is_err());
        assert!(level_instance::<f64>(&f, 1, 0).is_err());
        let flat = DistributionRule::new(vec![int(1), ratio(1, 2), ratio(1, 2)]).unwrap();
        assert!(level_instance::<f64>(&flat, 2, 3).is_err());
    }

    #[test]
    fn simple_family_examples() {
        let f = gairing_rule(2).unwrap();
        let inst = simple_tight_instance::<Rational>(&f, 2).unwrap();
        let report = efficiency(&inst.game, &f, DEFAULT_PROFILE_CAP).unwrap();
        assert_eq!(report.poa, ratio(2, 3));
        assert_eq!(report.poa, poa_bound(&f));

        let mut file = inst.game.to_file();
        file.k = 2;
        assert!(validate(&file).is_valid());

        let mc = mc_rule(2).unwrap();
        let inst = simple_tight_instance::<Rational>(&mc, 2).unwrap();
        assert_eq!(inst.w_opt.unwrap(), int(1));
        let report = efficiency(&inst.game, &mc, DEFAULT_PROFILE_CAP).unwrap();
        assert_eq!(report.poa, int(1));

        assert!(simple_tight_instance::<f64>(&f, 3).is_err());
        assert!(simple_tight_instance::<f64>(&f, 0).is_err());
    }

    #[test]
    fn pos_family_examples() {
        let f = gairing_rule(2).unwrap();
        let eps = ratio(1, 100);
        let inst = pos_family_instance::<Rational>(&f, 2, &eps).unwrap();
        assert_eq!(inst.w_opt.clone().unwrap(), ratio(149, 100));
        let report = efficiency(&inst.game, &f, DEFAULT_PROFILE_CAP).unwrap();
        assert_eq!(report.equilibria.len(), 1);
        assert_eq!(report.pos, ratio(100, 149));

        // shrinking epsilon approaches the guarantee term 1/(1+(j-1)f(j))
        let tiny = ratio(1, 1_000_000);
        let inst = pos_family_instance::<Rational>(&f, 2, &tiny).unwrap();
        let report = efficiency(&inst.game, &f, DEFAULT_PROFILE_CAP).unwrap();
        assert!((report.pos - pos_bound(&f)).abs() < ratio(1, 100_000));

        let mc = mc_rule(3).unwrap();
        assert!(pos_family_instance::<f64>(&mc, 2, &eps).is_err());
        assert!(pos_family_instance::<f64>(&f, 2, &int(0)).is_err());
    }

    #[test]
    fn random_games_are_deterministic_and_bounded() {
        for seed in 0..1000u64 {
            let n = 1 + (seed % 5) as usize;
            let m = 1 + (seed % 6) as usize;
            let k = 1 + (seed % 4) as usize;
            if n > k * m {
                assert!(random_instance::<f64>(seed, n, m, k, ValueLaw::Uniform).is_err());
                continue;
            }
            let a = random_instance::<f64>(seed, n, m, k, ValueLaw::Uniform).unwrap();
            let b = random_instance::<f64>(seed, n, m, k, ValueLaw::Uniform).unwrap();
            assert_eq!(a, b);
            assert!(a.cardinality() <= k);
            assert!(validate(&a.to_file()).is_valid());
        }
        assert!(random_instance::<f64>(1, 2, 2, 0, ValueLaw::Integer).is_err());
    }

    #[test]
    fn single_agent_random_game_is_efficient() {
        for seed in 0..50 {
            let g = random_instance::<Rational>(seed, 1, 4, 2, ValueLaw::Integer).unwrap();
            for f in [gairing_rule(2).unwrap(), mc_rule(2).unwrap()] {
                let report = efficiency(&g, &f, DEFAULT_PROFILE_CAP).unwrap();
                assert_eq!(report.poa, int(1));
                assert_eq!(report.pos, int(1));
            }
        }
    }
}
