use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use covgame::equilibrium::{efficiency, efficiency_pruned, EfficiencyReport};
use covgame::instances::{
    level_instance, pos_family_instance, random_instance_with_nulls, simple_tight_instance,
    GeneratedInstance, ValueLaw,
};
use covgame::profile::DEFAULT_PROFILE_CAP;
use covgame::rules::{
    equal_share_rule, frontier_rule, frontier_sweep, gairing_rule, mc_rule, DistributionRule,
};
use covgame::scalar::{parse_rational, to_significant};
use covgame::search::DEFAULT_NODE_BUDGET;
use covgame::state_based::sb_equilibrium_analysis;
use covgame::verify::{run_verify, VerifyConfig};
use covgame::{Error, Game, Rational, Scalar};

const EXIT_INPUT: u8 = 1;
const EXIT_VIOLATION: u8 = 2;
const EXIT_CAP: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "covgame", version, about = "Distribution-rule analysis for set-covering games")]
struct Cli {
    /// Worker threads for exhaustive scans (results do not depend on it)
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Enumerate equilibria of a game file and report realized efficiency
    Analyze {
        game: PathBuf,
        /// gairing | mc | equal-share | frontier | frontier:<alpha> | file:<path> | state-based
        #[arg(long, default_value = "gairing")]
        rule: String,
        /// Alpha for `--rule frontier`
        #[arg(long)]
        alpha: Option<String>,
        /// Maximum number of joint profiles to enumerate
        #[arg(long, default_value_t = DEFAULT_PROFILE_CAP)]
        cap: u128,
        /// Use pruned search and an assignment optimum instead of a full scan
        #[arg(long)]
        pruned: bool,
        /// Compute in f64 instead of exact rationals
        #[arg(long)]
        float: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample the anarchy/stability trade-off frontier as CSV
    Frontier {
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 50)]
        samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate an instance file (and a provenance sidecar next to it)
    Generate {
        family: Kind,
        #[arg(long, default_value = "gairing")]
        rule: String,
        #[arg(long)]
        alpha: Option<String>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        j: Option<usize>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        eps: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of agents (random family)
        #[arg(long, default_value_t = 4)]
        agents: usize,
        /// Number of resources (random family)
        #[arg(long, default_value_t = 5)]
        resources: usize,
        /// Value law (random family)
        #[arg(long, default_value = "uniform")]
        values: String,
        /// Probability that an agent may idle (random family)
        #[arg(long, default_value_t = 0.0)]
        null_probability: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the verification suite and print one line per check
    Verify {
        /// Largest cardinality for the closed-form checks
        #[arg(long, default_value_t = 12)]
        k: usize,
        /// Number of random games in the sweeps
        #[arg(long, default_value_t = 500)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the full result as JSON
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Kind {
    Level,
    Simple,
    PosFamily,
    Random,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn exit_code_for(e: &anyhow::Error) -> u8 {
    match e.chain().find_map(|c| c.downcast_ref::<Error>()) {
        Some(Error::CapExceeded { .. } | Error::SearchBudget(_) | Error::MaxStepsExceeded(_)) => {
            EXIT_CAP
        }
        Some(Error::Inconsistency(_)) => EXIT_VIOLATION,
        _ => EXIT_INPUT,
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .context("configuring worker threads")?;
    }
    match cli.command {
        Command::Analyze {
            game,
            rule,
            alpha,
            cap,
            pruned,
            float,
            out,
        } => {
            let text = fs::read_to_string(&game)
                .with_context(|| format!("reading {}", game.display()))?;
            let selector = Selector::parse(&rule, alpha.as_deref())?;
            if float {
                analyze::<f64>(&text, &selector, cap, pruned, out.as_deref())
            } else {
                analyze::<Rational>(&text, &selector, cap, pruned, out.as_deref())
            }
        }
        Command::Frontier { k, samples, out } => {
            frontier(k, samples, out.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Generate {
            family,
            rule,
            alpha,
            k,
            j,
            m,
            eps,
            seed,
            agents,
            resources,
            values,
            null_probability,
            out,
        } => {
            let inst = match family {
                Kind::Random => {
                    let law: ValueLaw = values.parse()?;
                    let k = k.unwrap_or(2);
                    random_instance_with_nulls::<Rational>(
                        seed,
                        agents,
                        resources,
                        k,
                        law,
                        null_probability,
                    )?
                }
                _ => {
                    let k = k.context("--k is required for this family")?;
                    let f = Selector::parse(&rule, alpha.as_deref())?.rule(k)?;
                    let j = j.context("--j is required for this family")?;
                    match family {
                        Kind::Level => {
                            level_instance(&f, j, m.context("--m is required for level")?)?
                        }
                        Kind::Simple => simple_tight_instance(&f, j)?,
                        Kind::PosFamily => {
                            let eps = parse_rational(
                                eps.as_deref().context("--eps is required for pos-family")?,
                            )?;
                            pos_family_instance(&f, j, &eps)?
                        }
                        Kind::Random => unreachable!(),
                    }
                }
            };
            generate(&inst, out.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify {
            k,
            samples,
            seed,
            out,
        } => {
            if k < 2 {
                bail!(Error::InvalidParameters("--k must be at least 2".into()));
            }
            let cfg = VerifyConfig {
                k_max: k,
                sweep_size: samples,
                seed,
                ..VerifyConfig::default()
            };
            let result = run_verify(&cfg)?;
            let mut stdout = std::io::stdout().lock();
            for check in &result.checks {
                writeln!(stdout, "{}", check.line())?;
                info!("check {} took {:.2}s", check.id, check.seconds);
            }
            if let Some(path) = out {
                write_output(Some(&path), &serde_json::to_string_pretty(&result)?)?;
            }
            Ok(if result.all_passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_VIOLATION)
            })
        }
    }
}

/// Which payoff model to analyze a game under.
#[derive(Debug, Clone)]
enum Selector {
    Gairing,
    Mc,
    EqualShare,
    Frontier(Rational),
    File(PathBuf),
    StateBased,
}

impl Selector {
    fn parse(text: &str, alpha: Option<&str>) -> Result<Self> {
        Ok(match text {
            "gairing" => Selector::Gairing,
            "mc" => Selector::Mc,
            "equal-share" => Selector::EqualShare,
            "state-based" => Selector::StateBased,
            "frontier" => {
                let alpha = alpha.context("--rule frontier needs --alpha")?;
                Selector::Frontier(parse_rational(alpha)?)
            }
            other => {
                if let Some(a) = other.strip_prefix("frontier:") {
                    Selector::Frontier(parse_rational(a)?)
                } else if let Some(p) = other.strip_prefix("file:") {
                    Selector::File(PathBuf::from(p))
                } else {
                    bail!(Error::Parse(format!("unknown rule selector {other:?}")));
                }
            }
        })
    }

    fn rule(&self, k: usize) -> Result<DistributionRule> {
        Ok(match self {
            Selector::Gairing => gairing_rule(k)?,
            Selector::Mc => mc_rule(k)?,
            Selector::EqualShare => equal_share_rule(k)?,
            Selector::Frontier(alpha) => frontier_rule(alpha, k)?,
            Selector::File(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                DistributionRule::from_json(&text)?
            }
            Selector::StateBased => {
                bail!(Error::InvalidRule("state-based is not a single distribution rule".into()))
            }
        })
    }
}

fn analyze<S: Scalar>(
    text: &str,
    selector: &Selector,
    cap: u128,
    pruned: bool,
    out: Option<&Path>,
) -> Result<ExitCode> {
    let game = Game::<S>::from_json(text)?;
    let k = game.k();
    let (report, rule): (EfficiencyReport<S>, Option<DistributionRule>) = match selector {
        Selector::StateBased => (sb_equilibrium_analysis(&game, k, cap)?, None),
        _ => {
            let f = selector.rule(k)?;
            let report = if pruned {
                efficiency_pruned(&game, &f, DEFAULT_NODE_BUDGET)?
            } else {
                efficiency(&game, &f, cap)?
            };
            (report, Some(f))
        }
    };
    let ok = report.respects_bounds(&S::default_tolerance());
    let mut json = serde_json::json!({
        "k": k,
        "rule": rule.map(|f| f.values().iter().map(|v| v.to_exact_string()).collect::<Vec<_>>()),
        "state_based": matches!(selector, Selector::StateBased),
        "respects_bounds": ok,
    });
    json["report"] = report.to_json(&game);
    write_output(out, &serde_json::to_string_pretty(&json)?)?;
    Ok(if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_VIOLATION)
    })
}

fn frontier(k: usize, samples: usize, out: Option<&Path>) -> Result<()> {
    let points = frontier_sweep(k, samples)?;
    let mut csv = String::from("alpha,z");
    for j in 1..=k {
        csv.push_str(&format!(",f{j}"));
    }
    csv.push('\n');
    for p in &points {
        let mut row = vec![to_significant(&p.alpha, 12), to_significant(&p.z_value, 12)];
        row.extend(p.rule.values().iter().map(|v| to_significant(v, 12)));
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    write_output(out, &csv)
}

fn generate(inst: &GeneratedInstance<Rational>, out: Option<&Path>) -> Result<()> {
    let game = inst.game.to_json();
    match out {
        Some(path) => {
            write_output(Some(path), &game)?;
            let mut sidecar = path.as_os_str().to_owned();
            sidecar.push(".provenance.json");
            write_output(
                Some(Path::new(&sidecar)),
                &serde_json::to_string_pretty(&inst.provenance)?,
            )
        }
        None => write_output(None, &game),
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    let mut text = text.to_string();
    if !text.ends_with('\n') {
        text.push('\n');
    }
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().lock().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}
