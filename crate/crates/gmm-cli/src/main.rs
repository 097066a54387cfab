use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use gmm::experiments::{run_to_dir, ExperimentConfig};
use gmm::potentials::{Potential, Prior};
use gmm::summary::{LinkFunction, LinkTag};
use gmm::theory::{delta_star, solve_specialized, ModelSpec, TheoryReport};
use gmm::Error;

#[derive(Parser)]
#[command(name = "gmm", version, about = "General max-margin classifiers: theory and simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Asymptotic predictions.
    #[command(subcommand)]
    Theory(TheoryCmd),
    /// Monte Carlo experiments.
    #[command(subcommand)]
    Experiment(ExperimentCmd),
    /// Run a property suite.
    Check {
        suite: Suite,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum TheoryCmd {
    /// Separability threshold δ*(κ).
    DeltaStar {
        #[arg(long)]
        kappa: f64,
        #[arg(long, value_enum, default_value_t = LinkArg::Std)]
        link: LinkArg,
    },
    /// Solve the fixed-point system and report the predicted performance.
    Solve {
        #[arg(long, value_enum)]
        potential: PotentialArg,
        #[arg(long)]
        kappa: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        sparsity: Option<f64>,
        #[arg(long, value_enum)]
        prior: Option<PriorArg>,
        #[arg(long, value_enum, default_value_t = LinkArg::Std)]
        link: LinkArg,
    },
}

#[derive(Subcommand)]
enum ExperimentCmd {
    /// Run an experiment and write <out>/<experiment>.csv and .meta.json.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_parser = ["fig1", "fig2", "fig3", "fig4"])]
        preset: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for trials (0 = all cores).
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    Prox,
    Moreau,
    CFunctional,
}

#[derive(Clone, Copy, ValueEnum)]
enum LinkArg {
    Std,
    Fig1,
    Sign,
}

#[derive(Clone, Copy, ValueEnum)]
enum PotentialArg {
    L1,
    L2,
    Linf,
}

#[derive(Clone, Copy, ValueEnum)]
enum PriorArg {
    Gaussian,
    Sparse,
    Binary,
}

impl From<LinkArg> for LinkTag {
    fn from(l: LinkArg) -> Self {
        match l {
            LinkArg::Std => LinkTag::Std,
            LinkArg::Fig1 => LinkTag::Fig1,
            LinkArg::Sign => LinkTag::Sign,
        }
    }
}

impl From<PotentialArg> for Potential {
    fn from(p: PotentialArg) -> Self {
        match p {
            PotentialArg::L1 => Potential::L1,
            PotentialArg::L2 => Potential::L2Squared,
            PotentialArg::Linf => Potential::LinfScaled,
        }
    }
}

const EXIT_ARGUMENT: u8 = 1;
const EXIT_NONCONVERGENCE: u8 = 2;
const EXIT_CHECK_FAILED: u8 = 3;

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        Error::NonConvergence { .. } => ExitCode::from(EXIT_NONCONVERGENCE),
        _ => ExitCode::from(EXIT_ARGUMENT),
    }
}

fn print_json(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("json"));
}

fn build_prior(prior: Option<PriorArg>, sparsity: Option<f64>, kappa: f64) -> Result<Prior, Error> {
    let prior = match (prior, sparsity) {
        (None, None) | (Some(PriorArg::Gaussian), None) => Prior::Gaussian { kappa },
        (None, Some(s)) | (Some(PriorArg::Sparse), Some(s)) => Prior::SparseGaussian { sparsity: s, kappa },
        (Some(PriorArg::Sparse), None) => return Err(Error::Argument("--prior sparse needs --sparsity".into())),
        (Some(PriorArg::Binary), None) => Prior::Binary { kappa },
        (Some(_), Some(_)) => {
            return Err(Error::Argument("--sparsity only applies to --prior sparse".into()))
        }
    };
    prior.validate()?;
    Ok(prior)
}

fn theory(cmd: TheoryCmd) -> Result<(), Error> {
    match cmd {
        TheoryCmd::DeltaStar { kappa, link } => {
            let tag = LinkTag::from(link);
            let ds = delta_star(kappa, &LinkFunction::from(tag))?;
            print_json(&json!({"kappa": kappa, "link": tag.as_str(), "delta_star": ds}));
        }
        TheoryCmd::Solve {
            potential,
            kappa,
            delta,
            sparsity,
            prior,
            link,
        } => {
            let prior = build_prior(prior, sparsity, kappa)?;
            let potential = Potential::from(potential);
            let tag = LinkTag::from(link);
            let spec = ModelSpec::new(kappa, delta, LinkFunction::from(tag))?;
            let sol = solve_specialized(&prior, potential, &spec)?;
            let support = matches!(prior, Prior::SparseGaussian { .. }).then(|| prior.sparsity());
            let report = TheoryReport::new(sol.vars, &spec, support)?;
            print_json(&json!({
                "potential": potential.as_str(),
                "prior": prior.tag(),
                "sparsity": prior.sparsity(),
                "link": tag.as_str(),
                "kappa": kappa,
                "delta": delta,
                "delta_star": sol.delta_star,
                "near_boundary": sol.near_boundary,
                "max_residual": sol.max_residual,
                "vars": sol.vars,
                "gen_error": report.gen_error,
                "correlation": report.correlation,
                "norm": report.norm,
                "support": report.support.map(|(p1, p2)| json!({"p1": p1, "p2": p2})),
            }));
        }
    }
    Ok(())
}

fn experiment(cmd: ExperimentCmd) -> Result<(), Error> {
    let ExperimentCmd::Run {
        config,
        preset,
        out,
        threads,
    } = cmd;
    if config.is_none() && preset.is_none() {
        return Err(Error::Config("give --config, --preset or both".into()));
    }
    let text = match &config {
        Some(path) => Some(std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read config {}: {e}", path.display()))
        })?),
        None => None,
    };
    let cfg = ExperimentConfig::from_sources(preset.as_deref(), text.as_deref())?;
    let dir = out
        .or_else(|| cfg.out.clone())
        .ok_or_else(|| Error::Config("no output directory: pass --out or set \"out\"".into()))?;
    let res = run_to_dir(&cfg, &dir, threads)?;
    eprintln!(
        "{} rows in {:.1} s",
        res.rows.len(),
        res.meta.wall_time_s
    );
    println!("{}", res.csv_path.display());
    println!("{}", res.meta_path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::try_parse().unwrap_or_else(|e| {
        let code = if e.use_stderr() { EXIT_ARGUMENT as i32 } else { 0 };
        let _ = e.print();
        std::process::exit(code);
    });
    let result = match cli.command {
        Command::Theory(cmd) => theory(cmd),
        Command::Experiment(cmd) => experiment(cmd),
        Command::Check { suite, seed } => {
            let name = match suite {
                Suite::Prox => "prox",
                Suite::Moreau => "moreau",
                Suite::CFunctional => "c-functional",
            };
            match gmm::checks::run_suite(name, seed) {
                Ok(reports) => {
                    let mut ok = true;
                    for r in &reports {
                        ok &= r.passed;
                        println!(
                            "{} {} (cases {}, worst {:.3e}, tolerance {:.1e})",
                            if r.passed { "PASS" } else { "FAIL" },
                            r.name,
                            r.cases,
                            r.worst,
                            r.tolerance
                        );
                    }
                    if !ok {
                        return ExitCode::from(EXIT_CHECK_FAILED);
                    }
                    Ok(())
                }
                Err(e) => Err(e),
            }
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}
