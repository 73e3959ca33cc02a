use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rnnsig::config::Config;
use rnnsig::core::ode::Tolerance;
use rnnsig::core::rkhs::{bound_binary, bound_sequential, BinaryClass, BoundSetting, SequentialClass};
use rnnsig::core::signature::signature;
use rnnsig::core::{Activation, PathConfig, PiecewiseLinearPath};
use rnnsig::experiments::{self, EulerConfig, TaylorConfig, TrainAttackConfig};
use rnnsig::training::TrainConfig;
use rnnsig::verify::{self, Scale};
use rnnsig::{io, Error, Result};

/// Recurrent networks, their continuous-time limits and signature kernels.
#[derive(Parser, Debug)]
#[command(name = "rnnsig", version)]
struct Cli {
    /// Base seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory for CSV files.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// File of `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Extra `key=value` settings, applied after the config file.
    #[arg(long = "set", global = true)]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Error of the step-N Taylor expansion against the ODE solution.
    TaylorConvergence(TaylorArgs),
    /// Distance between the discrete network and its ODE limit.
    EulerGap(EulerArgs),
    /// Train with and without RKHS penalty, then attack with PGD.
    TrainAttack(TrainArgs),
    /// Run every property suite and print a pass/fail report.
    Verify(VerifyArgs),
    /// Print the signature of a path read from CSV.
    SigCheck(SigArgs),
    /// Evaluate a generalisation bound.
    Bounds(BoundArgs),
}

#[derive(Args, Debug)]
struct TaylorArgs {
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    max_depth: Option<usize>,
}

#[derive(Args, Debug)]
struct EulerArgs {
    #[arg(long)]
    runs: Option<usize>,
    /// Comma-separated list of T.
    #[arg(long)]
    steps: Option<String>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Comma-separated seeds.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    n_test: Option<usize>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Run the suites at acceptance scale instead of the quick default.
    #[arg(long)]
    full: bool,
}

#[derive(Args, Debug)]
struct SigArgs {
    /// CSV with one row per time step.
    input: PathBuf,
    #[arg(long, default_value_t = 3)]
    depth: usize,
    /// Time-augment with this L before taking the signature.
    #[arg(long)]
    augment: Option<f64>,
}

#[derive(Args, Debug)]
struct BoundArgs {
    /// `binary` or `sequential`.
    #[arg(long, default_value = "binary")]
    kind: String,
}

fn activation(cfg: &Config, key: &str, default: Activation) -> Result<Activation> {
    let name: String = cfg.get(key, default.name().to_string())?;
    Activation::parse(&name).ok_or_else(|| Error::Config(format!("{key}: unknown activation `{name}`")))
}

fn path_config(cfg: &Config, default_l: f64) -> Result<PathConfig> {
    PathConfig::new(cfg.get("l", default_l)?).map_err(|_| Error::Config("l must lie in (0, 1)".into()))
}

fn tolerance(cfg: &Config, atol: f64, rtol: f64) -> Result<Tolerance> {
    let atol = cfg.positive("atol", atol)?;
    let rtol = cfg.positive("rtol", rtol)?;
    Ok(Tolerance::new(atol, rtol)?)
}

fn taylor(cfg: &Config, seed: u64, out: &Path) -> Result<()> {
    let d = TaylorConfig::default();
    let names: Vec<String> = cfg.get_list("activations", vec!["logistic".into(), "tanh".into()])?;
    let activations = names
        .iter()
        .map(|n| Activation::parse(n).ok_or_else(|| Error::Config(format!("unknown activation `{n}`"))))
        .collect::<Result<_>>()?;
    let tc = TaylorConfig {
        runs: cfg.at_least("runs", d.runs, 1)?,
        hidden: cfg.at_least("hidden", d.hidden, 1)?,
        max_depth: cfg.at_least("max_depth", d.max_depth, 1)?,
        activations,
        log_scale: (cfg.get("log_scale_min", d.log_scale.0)?, cfg.get("log_scale_max", d.log_scale.1)?),
        path_segments: cfg.at_least("path_segments", d.path_segments, 1)?,
        path: path_config(cfg, 0.5)?,
        tol: tolerance(cfg, 1e-14, 1e-13)?,
        seed,
    };
    if tc.log_scale.0 > tc.log_scale.1 {
        return Err(Error::Config("log_scale_min exceeds log_scale_max".into()));
    }
    let rows = experiments::taylor_convergence(&tc)?;
    experiments::taylor_table(&rows).save(&out.join("taylor_convergence.csv"))?;
    println!("activation,N,median_log10_error");
    for act in &tc.activations {
        for (n, m) in experiments::median_log_errors(&rows, *act, tc.max_depth).iter().enumerate() {
            println!("{},{},{m:.3}", act.name(), n + 1);
        }
    }
    Ok(())
}

fn euler(cfg: &Config, seed: u64, out: &Path) -> Result<()> {
    let d = EulerConfig::default();
    let ec = EulerConfig {
        runs: cfg.at_least("runs", d.runs, 1)?,
        hidden: cfg.at_least("hidden", d.hidden, 1)?,
        input: cfg.at_least("input", d.input, 1)?,
        steps: cfg.get_list("steps", d.steps.clone())?,
        path_segments: cfg.at_least("path_segments", d.path_segments, 1)?,
        activation: activation(cfg, "activation", d.activation)?,
        path: path_config(cfg, 0.5)?,
        tol: tolerance(cfg, 1e-13, 1e-12)?,
        seed,
    };
    if ec.steps.contains(&0) {
        return Err(Error::Config("steps must be positive".into()));
    }
    let rows = experiments::euler_sweep(&ec)?;
    experiments::euler_table(&rows).save(&out.join("euler_gap.csv"))?;
    println!("T,max_gap,max_bound");
    for t in &ec.steps {
        let sel = rows.iter().filter(|r| r.steps == *t);
        let (g, b) = sel.fold((0.0f64, 0.0f64), |(g, b), r| (g.max(r.gap), b.max(r.bound)));
        println!("{t},{g:.3e},{b:.3e}");
    }
    Ok(())
}

fn train_attack(cfg: &Config, seed: u64, out: &Path) -> Result<()> {
    let d = TrainAttackConfig::default();
    let dt = d.train.clone();
    let seeds: Vec<u64> = match cfg.contains("seeds") {
        true => cfg.get_list("seeds", vec![])?,
        false => (0..cfg.at_least("n_seeds", d.seeds.len(), 1)? as u64).map(|i| seed + i).collect(),
    };
    let train = TrainConfig {
        epochs: cfg.get("epochs", dt.epochs)?,
        lr: cfg.positive("lr", dt.lr)?,
        halve_every: cfg.at_least("halve_every", dt.halve_every, 1)?,
        depth: cfg.get("depth", dt.depth)?,
        fd_step: cfg.positive("fd_step", dt.fd_step)?,
        learn_h0: cfg.get("learn_h0", dt.learn_h0)?,
        path: path_config(cfg, d.train.path.l())?,
        ..dt
    };
    let tc = TrainAttackConfig {
        seeds,
        hidden: cfg.at_least("hidden", d.hidden, 1)?,
        activation: activation(cfg, "activation", d.activation)?,
        n_train: cfg.at_least("n_train", d.n_train, 1)?,
        n_test: cfg.at_least("n_test", d.n_test, 1)?,
        steps: cfg.at_least("steps", d.steps, 1)?,
        lambda: cfg.non_negative("lambda", d.lambda)?,
        train,
        eps_grid: cfg.get_list("eps_grid", d.eps_grid.clone())?,
        pgd_steps: cfg.get("pgd_steps", d.pgd_steps)?,
        normalize: cfg.get("normalize", d.normalize)?,
    };
    tc.train.validate()?;
    let runs = experiments::train_attack(&tc)?;
    experiments::trace_table(&runs).save(&out.join("train_trace.csv"))?;
    experiments::attack_table(&runs).save(&out.join("attack.csv"))?;
    for r in &runs {
        let cp = out.join(format!("checkpoint_seed{}_lambda{}.csv", r.seed, r.lambda));
        io::write_checkpoint(io::create(&cp)?, &r.params)?;
    }
    println!("epsilon_rel,acc_lambda0,acc_lambda{}", tc.lambda);
    for (i, e) in tc.eps_grid.iter().enumerate() {
        let a = experiments::mean_accuracy_at(&runs, 0.0, i);
        let b = experiments::mean_accuracy_at(&runs, tc.lambda, i);
        println!("{e},{a:.4},{b:.4}");
    }
    Ok(())
}

fn sig_check(args: &SigArgs) -> Result<()> {
    let samples = io::read_samples(io::open(&args.input)?)?;
    let mut path = PiecewiseLinearPath::from_samples(&samples)?;
    if let Some(l) = args.augment {
        let cfg = PathConfig::new(l).map_err(|_| Error::Config("augment must lie in (0, 1)".into()))?;
        path = path.normalize(cfg).0.time_augment(cfg);
    }
    let sig = signature(&path, args.depth, 0.0, 1.0)?;
    println!("level,index,value");
    for k in 0..=args.depth {
        for (i, v) in sig.level(k).data().iter().enumerate() {
            println!("{k},{i},{v:?}");
        }
    }
    println!("# norm {:?}", sig.norm());
    Ok(())
}

fn bounds(args: &BoundArgs, cfg: &Config, out: &Path) -> Result<()> {
    let setting = BoundSetting {
        l: path_config(cfg, 0.5)?.l(),
        n: cfg.at_least("n", 50, 1)?,
        delta: cfg.positive("delta", 0.05)?,
        steps: cfg.at_least("T", 100, 1)?,
        empirical_risk: cfg.non_negative("risk", 0.0)?,
    };
    let report = match args.kind.as_str() {
        "binary" => {
            let class = match cfg.get("class", "logistic".to_string())?.as_str() {
                "logistic" => BinaryClass::Logistic {
                    k_w: cfg.non_negative("k_w", 1e-3)?,
                    k_b: cfg.non_negative("k_b", 1.0)?,
                    k_psi: cfg.non_negative("k_psi", 1.0)?,
                    d: cfg.at_least("d", 2, 1)?,
                },
                "raw" => BinaryClass::Raw {
                    b: cfg.non_negative("b", 1.0)?,
                    k_psi: cfg.non_negative("k_psi", 1.0)?,
                    k_f: cfg.non_negative("k_f", 1.0)?,
                    f_sup: cfg.non_negative("f_sup", 1.0)?,
                },
                other => return Err(Error::Config(format!("unknown class `{other}`"))),
            };
            bound_binary(class, cfg.non_negative("k_loss", 1.0)?, setting)?
        }
        "sequential" => bound_sequential(
            SequentialClass {
                p: cfg.at_least("p", 1, 1)?,
                k_y: cfg.non_negative("k_y", 1.0)?,
                b: cfg.non_negative("b", 1.0)?,
                theta_sup: cfg.non_negative("theta_sup", 1.0)?,
            },
            setting,
        )?,
        other => return Err(Error::Config(format!("unknown bound kind `{other}`"))),
    };
    io::write_report(io::create(&out.join(format!("bounds_{}.csv", args.kind)))?, &report)?;
    print!("{}", report.to_key_values());
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::new(),
    };
    for pair in &cli.set {
        cfg.set_pair(pair)?;
    }
    let out = &cli.out;
    match &cli.command {
        Command::TaylorConvergence(a) => {
            if let Some(v) = a.runs { cfg.set("runs", v) }
            if let Some(v) = a.max_depth { cfg.set("max_depth", v) }
            taylor(&cfg, cli.seed, out)?;
        }
        Command::EulerGap(a) => {
            if let Some(v) = a.runs { cfg.set("runs", v) }
            if let Some(v) = a.steps.as_ref() { cfg.set("steps", v) }
            euler(&cfg, cli.seed, out)?;
        }
        Command::TrainAttack(a) => {
            if let Some(v) = a.seeds.as_ref() { cfg.set("seeds", v) }
            if let Some(v) = a.hidden { cfg.set("hidden", v) }
            if let Some(v) = a.lambda { cfg.set("lambda", v) }
            if let Some(v) = a.epochs { cfg.set("epochs", v) }
            if let Some(v) = a.n_test { cfg.set("n_test", v) }
            train_attack(&cfg, cli.seed, out)?;
        }
        Command::Verify(a) => {
            let scale = if a.full { Scale::Full } else { Scale::Quick };
            let checks = verify::run_all(scale, cli.seed, &cfg)?;
            let mut report = String::new();
            for c in &checks {
                report.push_str(&c.line());
                report.push('\n');
            }
            print!("{report}");
            let path = out.join("verify.txt");
            std::io::Write::write_all(&mut io::create(&path)?, report.as_bytes()).map_err(|e| Error::io(&path, e))?;
            return Ok(checks.iter().all(|c| c.passed));
        }
        Command::SigCheck(a) => sig_check(a)?,
        Command::Bounds(a) => bounds(a, &cfg, out)?,
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
