//! Reproducible checks of every efficiency guarantee the crate implements:
//! closed forms, tight worst-case instances, randomized sweeps and the
//! state-based reduction. Each check reports a measured value next to its
//! expectation and tolerance.

use std::time::Instant;

use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::equilibrium::{
    best_response_dynamics, brute_force_optimum, efficiency, efficiency_pruned, potential,
};
use crate::error::Result;
use crate::game::{Allocation, Game};
use crate::instances::{
    level_instance, pos_family_instance, random_instance, simple_tight_instance, ValueLaw,
};
use crate::profile::DEFAULT_PROFILE_CAP;
use crate::rules::{
    equal_share_rule, frontier_rule, frontier_value, gairing_rule, grid_rules, mc_rule,
    optimal_poa, optimal_poa_closed_form, poa_bound, pos_bound, DistributionRule,
};
use crate::scalar::{ratio, Rational, Scalar};
use crate::search::DEFAULT_NODE_BUDGET;
use crate::state_based::{
    is_sb_equilibrium, reduction_game, repair_allocation, sb_equilibrium_analysis,
    toggle_is_consistent,
};

const SWEEP_TOL: f64 = 1e-9;

/// Printed values of the Gairing rule for k = 10, to three decimals.
const GAIRING_TABLE_K10: [f64; 10] = [
    1.0, 0.418, 0.254, 0.180, 0.139, 0.113, 0.095, 0.082, 0.072, 0.065,
];

#[derive(Debug, Clone)]
pub struct VerifyConfig {
    /// Largest cardinality used by the closed-form checks; sweeps use
    /// `min(k_max, 4)`.
    pub k_max: usize,
    pub sweep_size: usize,
    pub seed: u64,
    pub toggle_samples: usize,
    pub reduction_games: usize,
    pub deviation_samples: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            k_max: 12,
            sweep_size: 500,
            seed: 0,
            toggle_samples: 10_000,
            reduction_games: 100,
            deviation_samples: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub id: u32,
    pub name: &'static str,
    pub status: Status,
    pub measured: String,
    pub expected: String,
    pub tolerance: String,
    pub detail: String,
    #[serde(skip)]
    pub seconds: f64,
}

impl CheckResult {
    fn new(id: u32, name: &'static str) -> Self {
        CheckResult {
            id,
            name,
            status: Status::Pass,
            measured: String::new(),
            expected: String::new(),
            tolerance: String::new(),
            detail: String::new(),
            seconds: 0.0,
        }
    }

    fn fail(&mut self, why: impl Into<String>) {
        self.status = Status::Fail;
        if self.detail.is_empty() {
            self.detail = why.into();
        }
    }

    fn require(&mut self, ok: bool, why: impl FnOnce() -> String) {
        if !ok {
            self.fail(why());
        }
    }

    /// Single-line rendering used by the CLI and the acceptance runner.
    pub fn line(&self) -> String {
        let status = match self.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skipped => "SKIP",
        };
        let mut line = format!(
            "[{status}] {}. {}: measured {} expected {} tol {}",
            self.id, self.name, self.measured, self.expected, self.tolerance
        );
        if !self.detail.is_empty() {
            line.push_str(&format!(" ({})", self.detail));
        }
        line
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifySuiteResult {
    pub seed: u64,
    pub k_max: usize,
    pub sweep_size: usize,
    pub checks: Vec<CheckResult>,
}

impl VerifySuiteResult {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail)
    }
}

/// One randomly drawn game of the sweep, in exact and floating form.
#[derive(Debug, Clone)]
pub struct SweepGame {
    pub k: usize,
    pub exact: Game<Rational>,
    pub float: Game<f64>,
}

/// Games with at most 5 agents, 6 resources and cardinality at most
/// `min(k_max, 4)`, drawn deterministically from `seed`.
pub fn sweep_games(seed: u64, count: usize, k_max: usize) -> Result<Vec<SweepGame>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k_top = k_max.clamp(1, 4);
    (0..count)
        .map(|_| {
            let k = rng.gen_range(1..=k_top);
            let m = rng.gen_range(1..=6);
            let n = rng.gen_range(1..=5usize).min(k * m);
            let law = if rng.gen_bool(0.5) {
                ValueLaw::Uniform
            } else {
                ValueLaw::Integer
            };
            let exact = random_instance::<Rational>(rng.gen(), n, m, k, law)?;
            let float = exact.map_values(approx);
            Ok(SweepGame { k, exact, float })
        })
        .collect()
}

fn sweep_rules(k: usize) -> Result<Vec<(&'static str, DistributionRule)>> {
    Ok(vec![
        ("mc", mc_rule(k)?),
        ("gairing", gairing_rule(k)?),
        ("equal-share", equal_share_rule(k)?),
        ("frontier(0.55)", frontier_rule(&ratio(11, 20), k)?),
    ])
}

fn approx(x: &Rational) -> f64 {
    crate::scalar::rational_to_f64(x)
}

fn dec(x: &Rational) -> String {
    crate::scalar::to_significant(x, 12)
}

fn guarded(mut check: CheckResult, body: impl FnOnce(&mut CheckResult) -> Result<()>) -> CheckResult {
    let start = Instant::now();
    if let Err(e) = body(&mut check) {
        check.fail(format!("error: {e}"));
    }
    check.seconds = start.elapsed().as_secs_f64();
    check
}

fn gairing_table(cfg: &VerifyConfig) -> CheckResult {
    let mut check = CheckResult::new(1, "Gairing rule table for k=10");
    check.expected = "1, 0.418, 0.254, 0.180, 0.139, 0.113, 0.095, 0.082, 0.072, 0.065".into();
    check.tolerance = "3 decimals".into();
    if cfg.k_max < 10 {
        check.status = Status::Skipped;
        check.detail = "needs k_max >= 10".into();
        return check;
    }
    guarded(check, |c| {
        let f = gairing_rule(10)?;
        let values = f.to_f64();
        c.measured = values
            .iter()
            .map(|v| format!("{v:.3}"))
            .collect::<Vec<_>>()
            .join(", ");
        for (j, (got, want)) in values.iter().zip(GAIRING_TABLE_K10).enumerate() {
            c.require(format!("{got:.3}") == format!("{want:.3}"), || format!("f({}) = {got}", j + 1));
        }
        Ok(())
    })
}

fn optimal_poa_consistency(cfg: &VerifyConfig) -> CheckResult {
    let mut check = CheckResult::new(2, "optimal price of anarchy closed form and limit");
    let top = cfg.k_max.max(12);
    let limit = 1.0 - (-1.0f64).exp();
    check.expected = format!("exact match k=2..{top}; k=12 near 1-1/e = {limit:.12}");
    check.tolerance = "exact; 2e-3".into();
    guarded(check, |c| {
        for k in 2..=top {
            let bound = poa_bound(&gairing_rule(k)?);
            let closed = optimal_poa_closed_form(k)?;
            c.require(bound == closed, || {
                format!("k={k}: {} != {}", bound.to_exact_string(), closed.to_exact_string())
            });
        }
        let at12 = approx(&optimal_poa(12)?);
        c.measured = format!("{at12:.12}");
        c.require((at12 - limit).abs() < 2e-3, || format!("k=12 gives {at12}"));
        Ok(())
    })
}

fn anarchy_tightness(cfg: &VerifyConfig) -> CheckResult {
    let mut check = CheckResult::new(3, "worst-case instances attain the anarchy bound");
    check.expected = "2/3 for the 31-level chain; bound exactly for the simple family".into();
    check.tolerance = "1e-8; exact".into();
    guarded(check, |c| {
        let f2 = gairing_rule(2)?;
        let chain = level_instance::<Rational>(&f2, 1, 30)?;
        let report = efficiency_pruned(&chain.game, &f2, DEFAULT_NODE_BUDGET)?;
        let gap = (report.poa.clone() - ratio(2, 3)).abs();
        c.measured = format!("chain {}", dec(&report.poa));
        c.require(gap < ratio(1, 100_000_000), || {
            format!("chain ratio off by {}", dec(&gap))
        });
        for k in 2..=cfg.k_max.min(4) {
            let f = gairing_rule(k)?;
            let inst = simple_tight_instance::<Rational>(&f, k)?;
            let report = efficiency(&inst.game, &f, DEFAULT_PROFILE_CAP)?;
            c.measured.push_str(&format!("; k={k} {}", report.poa.to_exact_string()));
            c.require(report.poa == poa_bound(&f), || {
                format!("k={k}: simple ratio {} vs bound", report.poa.to_exact_string())
            });
        }
        Ok(())
    })
}

/// Index `j` attaining the stability guarantee `min_j 1/(1+(j−1)f(j))`.
fn binding_index(f: &DistributionRule) -> usize {
    (1..=f.k())
        .max_by(|&a, &b| {
            let term = |j: usize| Rational::from_integer((j as i64 - 1).into()) * f.f(j).clone();
            term(a).cmp(&term(b)).then(b.cmp(&a))
        })
        .unwrap_or(1)
}

fn stability_tightness(cfg: &VerifyConfig) -> CheckResult {
    let mut check = CheckResult::new(4, "worst-case instances attain the stability bound");
    check.expected = "pos_bound(gairing) for k=2..4".into();
    check.tolerance = "2e-4".into();
    guarded(check, |c| {
        let eps = ratio(1, 10_000);
        let mut parts = Vec::new();
        for k in 2..=cfg.k_max.min(4) {
            let f = gairing_rule(k)?;
            let j = binding_index(&f);
            let inst = pos_family_instance::<Rational>(&f, j, &eps)?;
            let report = efficiency(&inst.game, &f, DEFAULT_PROFILE_CAP)?;
            let gap = (report.pos.clone() - pos_bound(&f)).abs();
            parts.push(format!("k={k} j={j} {}", dec(&report.pos)));
            c.require(gap < ratio(2, 10_000), || format!("k={k}: off by {}", dec(&gap)));
        }
        c.measured = parts.join("; ");
        Ok(())
    })
}

fn lower_bound_sweep(games: &[SweepGame]) -> CheckResult {
    let mut check = CheckResult::new(5, "random sweep respects anarchy and stability bounds");
    check.expected = format!(
        "{} games x 4 rules: no violations; marginal contribution always optimal at best",
        games.len()
    );
    check.tolerance = format!("{SWEEP_TOL:e}");
    guarded(check, |c| {
        let mut violations = 0usize;
        let mut worst_margin = f64::INFINITY;
        for (t, sg) in games.iter().enumerate() {
            for (name, f) in sweep_rules(sg.k)? {
                let report = efficiency(&sg.float, &f, DEFAULT_PROFILE_CAP)?;
                let poa_margin = report.poa - approx(&poa_bound(&f));
                let pos_margin = report.pos - approx(&pos_bound(&f));
                worst_margin = worst_margin.min(poa_margin).min(pos_margin);
                let bad = poa_margin < -SWEEP_TOL
                    || pos_margin < -SWEEP_TOL
                    || (name == "mc" && (report.pos - 1.0).abs() > SWEEP_TOL);
                if bad {
                    violations += 1;
                    c.fail(format!("game {t} rule {name}: poa {} pos {}", report.poa, report.pos));
                }
            }
        }
        c.measured = format!("{violations} violations, smallest margin {worst_margin:.3e}");
        Ok(())
    })
}

fn frontier_grid(cfg: &VerifyConfig) -> CheckResult {
    let mut check = CheckResult::new(6, "grid search never beats the trade-off frontier (k=3)");
    check.expected = "max PoA bound <= optimal; PoS <= Z(alpha) for alpha in {0.52, 0.55, 0.6, optimal}".into();
    check.tolerance = "1/50".into();
    let _ = cfg;
    guarded(check, |c| {
        let k = 3;
        let best = optimal_poa(k)?;
        let rules = grid_rules(k, 50);
        let bounds: Vec<(Rational, Rational)> =
            rules.iter().map(|f| (poa_bound(f), pos_bound(f))).collect();
        let max_poa = bounds
            .iter()
            .map(|(p, _)| p.clone())
            .max()
            .unwrap_or_else(Rational::zero);
        c.require(max_poa <= best, || format!("grid rule reaches {}", dec(&max_poa)));
        let mut parts = vec![format!("{} rules, max PoA bound {}", rules.len(), dec(&max_poa))];
        let step = ratio(1, 50);
        for alpha in [ratio(13, 25), ratio(11, 20), ratio(3, 5), best.clone()] {
            let z = frontier_value(&alpha, k)?;
            let top = bounds
                .iter()
                .filter(|(p, _)| *p >= alpha)
                .map(|(_, s)| s.clone())
                .max();
            if let Some(top) = &top {
                c.require(*top <= z.clone() + step.clone(), || {
                    format!("alpha={}: grid PoS {} above Z={}", dec(&alpha), dec(top), dec(&z))
                });
            }
            parts.push(format!(
                "alpha={} Z={} grid={}",
                dec(&alpha),
                dec(&z),
                top.as_ref().map_or("none".into(), dec)
            ));
        }
        let at_best = frontier_value(&best, k)?;
        c.require(at_best == best, || {
            format!("Z(optimal) = {} != {}", at_best.to_exact_string(), best.to_exact_string())
        });
        c.measured = parts.join("; ");
        Ok(())
    })
}

fn random_profile<S: Scalar>(game: &Game<S>, rng: &mut ChaCha8Rng) -> Allocation {
    let choices = game
        .agents()
        .iter()
        .map(|a| {
            let options: Vec<_> = a.options().collect();
            options[rng.gen_range(0..options.len())]
        })
        .collect();
    Allocation::new(game, choices).expect("options are legal")
}

fn state_based_sweep(cfg: &VerifyConfig, games: &[SweepGame]) -> CheckResult {
    let mut check = CheckResult::new(7, "state-based rule: optimum stable, optimal anarchy bound");
    check.expected = format!(
        "{} games: optimum is an equilibrium, ratios >= optimal PoA; {} toggle triples consistent",
        games.len(),
        cfg.toggle_samples
    );
    check.tolerance = format!("{SWEEP_TOL:e}");
    guarded(check, |c| {
        let mut worst_margin = f64::INFINITY;
        for (t, sg) in games.iter().enumerate() {
            let (opt, _) = brute_force_optimum(&sg.float, DEFAULT_PROFILE_CAP)?;
            c.require(is_sb_equilibrium(&sg.float, sg.k, &opt, &SWEEP_TOL)?, || {
                format!("game {t}: optimum is not a state-based equilibrium")
            });
            let report = sb_equilibrium_analysis(&sg.float, sg.k, DEFAULT_PROFILE_CAP)?;
            let margin = report.poa - approx(&report.bound_poa);
            worst_margin = worst_margin.min(margin);
            c.require(margin >= -SWEEP_TOL, || format!("game {t}: ratio {}", report.poa));
            c.require((report.pos - 1.0).abs() <= SWEEP_TOL, || {
                format!("game {t}: best ratio {}", report.pos)
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x7067_6c65);
        let mut inconsistent = 0usize;
        if !games.is_empty() {
            for _ in 0..cfg.toggle_samples {
                let sg = &games[rng.gen_range(0..games.len())];
                let a = random_profile(&sg.float, &mut rng);
                let i = rng.gen_range(0..sg.float.num_agents());
                if !toggle_is_consistent(&sg.float, &a, i) {
                    inconsistent += 1;
                }
            }
        }
        c.require(inconsistent == 0, || format!("{inconsistent} inconsistent toggle triples"));
        c.measured = format!(
            "smallest ratio margin {worst_margin:.3e}; {inconsistent} inconsistent toggles"
        );
        Ok(())
    })
}

fn reduction_checks(cfg: &VerifyConfig, games: &[SweepGame]) -> CheckResult {
    let count = cfg.reduction_games.min(games.len());
    let mut check = CheckResult::new(8, "reduction to the Gairing game and optimum repair");
    check.expected = format!(
        "{count} games, every state-based equilibrium: stable in derived game, derived optimum >= optimum, repair exact, removed resources contested"
    );
    check.tolerance = "exact".into();
    guarded(check, |c| {
        let mut equilibria = 0usize;
        let mut modified = 0usize;
        let mut repair_rounds = 0usize;
        for (t, sg) in games.iter().take(count).enumerate() {
            let g = &sg.exact;
            let (opt, w_opt) = brute_force_optimum(g, DEFAULT_PROFILE_CAP)?;
            for ne in crate::state_based::sb_equilibria(g, sg.k, DEFAULT_PROFILE_CAP)? {
                equilibria += 1;
                let red = reduction_game(g, sg.k, &ne)?;
                modified += red.modified.len();
                c.require(red.equilibrium_is_stable()?, || {
                    format!("game {t}: equilibrium unstable in derived game")
                });
                c.require(red.removed_resources_are_contested(), || {
                    format!("game {t}: removed resource held by nobody else")
                });
                c.require(red.added_resources_are_uncovered(), || {
                    format!("game {t}: added resource covered at equilibrium")
                });
                let (_, w_red) = brute_force_optimum(&red.game, DEFAULT_PROFILE_CAP)?;
                c.require(w_red >= w_opt, || format!("game {t}: derived optimum smaller"));
                let repair = repair_allocation(&red, &opt)?;
                repair_rounds += repair.rounds;
                c.require(repair.welfare == w_opt, || format!("game {t}: repair welfare differs"));
            }
        }
        c.measured = format!(
            "{equilibria} equilibria, {modified} modified agents, {repair_rounds} repair rounds"
        );
        Ok(())
    })
}

fn potential_checks(cfg: &VerifyConfig, games: &[SweepGame]) -> CheckResult {
    let mut check = CheckResult::new(9, "potential tracks deviations; best responses climb it");
    check.expected = format!(
        "{} exact deviations; dynamics converge on {} games x 4 rules",
        cfg.deviation_samples,
        games.len()
    );
    check.tolerance = "exact".into();
    guarded(check, |c| {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x7068_6921);
        let mut mismatches = 0usize;
        if !games.is_empty() {
            for _ in 0..cfg.deviation_samples {
                let sg = &games[rng.gen_range(0..games.len())];
                let g = &sg.exact;
                let rules = sweep_rules(sg.k)?;
                let (_, f) = &rules[rng.gen_range(0..rules.len())];
                let a = random_profile(g, &mut rng);
                let i = rng.gen_range(0..g.num_agents());
                let options: Vec<_> = g.agents()[i].options().collect();
                let b = a.with_choice(i, options[rng.gen_range(0..options.len())]);
                let dphi = potential(g, f, &b)? - potential(g, f, &a)?;
                let du = g.utility(f, i, &b)? - g.utility(f, i, &a)?;
                if dphi != du {
                    mismatches += 1;
                }
            }
        }
        c.require(mismatches == 0, || format!("{mismatches} deviations break the identity"));
        let mut steps = 0usize;
        for (t, sg) in games.iter().enumerate() {
            let g = &sg.exact;
            let start = Allocation::new(
                g,
                g.agents().iter().map(|a| a.options().next().flatten()).collect(),
            )?;
            for (name, f) in sweep_rules(sg.k)? {
                let bound = g.profile_count() as usize + 1;
                match best_response_dynamics(g, &f, &start, bound, &Rational::zero()) {
                    Ok((_, trace)) => steps += trace.len(),
                    Err(e) => c.fail(format!("game {t} rule {name}: {e}")),
                }
            }
        }
        c.measured = format!("{mismatches} mismatches; {steps} improving steps");
        Ok(())
    })
}

/// Runs every check. Results are deterministic given the configuration.
pub fn run_verify(cfg: &VerifyConfig) -> Result<VerifySuiteResult> {
    let games = sweep_games(cfg.seed, cfg.sweep_size, cfg.k_max)?;
    let checks = vec![
        gairing_table(cfg),
        optimal_poa_consistency(cfg),
        anarchy_tightness(cfg),
        stability_tightness(cfg),
        lower_bound_sweep(&games),
        frontier_grid(cfg),
        state_based_sweep(cfg, &games),
        reduction_checks(cfg, &games),
        potential_checks(cfg, &games),
    ];
    Ok(VerifySuiteResult {
        seed: cfg.seed,
        k_max: cfg.k_max,
        sweep_size: cfg.sweep_size,
        checks,
    })
}
