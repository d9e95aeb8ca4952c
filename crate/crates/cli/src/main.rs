//! `perfodyn`: run coupled peer-platform opinion experiments from JSON
//! configs and emit CSV/JSON tables for plotting.

mod checks;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use perfodyn::equilibrium::spectral_decomposition;
use perfodyn::experiment::{
    build_world, run_experiment, run_sweep, solve_equilibrium, steering_sweep, write_bundle,
    write_json, ExperimentConfig, NetworkSource, OutputFormat, ValueSpec,
};
use perfodyn::{generate_network, NetworkSpec};

#[derive(Parser)]
#[command(name = "perfodyn", version, about = "Peer-platform opinion dynamics experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; results go to `<out>/seed-<seed>/`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps.
    #[arg(long, global = true, env = "PERFODYN_THREADS")]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the retraining loop and write trajectories and summaries.
    Simulate,
    /// Closed-form performatively stable point for an affine policy.
    Equilibrium,
    /// Eigen-decomposition on a regular graph with uniform susceptibilities.
    Spectrum,
    /// Variance sweep over the grid in the config's `sweep` block.
    Sweep,
    /// Steering closed form over the `steer` block's gammas, checked against the loop.
    Steer,
    /// Generate a synthetic network and write it as an edge list.
    GenNetwork {
        /// Generator spec as JSON, e.g. `{"kind":"cycle","n":8}`; defaults to
        /// the config's generator.
        #[arg(long)]
        spec: Option<String>,
    },
    /// Run the invariant suite on small instances (and on the config, if given).
    Validate,
}

enum Failure {
    Usage(String),
    Numerical(String),
    Validation(usize),
}

impl From<perfodyn::Error> for Failure {
    fn from(e: perfodyn::Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = set_threads(cli.common.threads).and_then(|()| dispatch(&cli));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Validation(n)) => {
            eprintln!("{n} check(s) failed");
            ExitCode::from(3)
        }
    }
}

fn set_threads(threads: Option<usize>) -> Outcome {
    match threads {
        None => Ok(()),
        Some(0) => Err(Failure::Usage("--threads must be at least 1".into())),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| Failure::Usage(e.to_string())),
    }
}

fn dispatch(cli: &Cli) -> Outcome {
    let c = &cli.common;
    match &cli.command {
        Command::Simulate => simulate(c),
        Command::Equilibrium => equilibrium(c),
        Command::Spectrum => spectrum(c),
        Command::Sweep => sweep(c),
        Command::Steer => steer(c),
        Command::GenNetwork { spec } => gen_network(c, spec.as_deref()),
        Command::Validate => validate(c),
    }
}

fn load_config(c: &Common) -> Result<ExperimentConfig, Failure> {
    let path = c
        .config
        .as_ref()
        .ok_or_else(|| Failure::Usage("this subcommand needs --config <path>".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn seed_dir(out: &Path, seed: u64) -> Result<PathBuf, Failure> {
    let dir = out.join(format!("seed-{seed}"));
    fs::create_dir_all(&dir).map_err(|e| Failure::Usage(format!("{}: {e}", dir.display())))?;
    Ok(dir)
}

fn write_file(path: &Path, text: &str) -> Outcome {
    fs::write(path, text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn number(v: f64) -> String {
    let r = (v * 1e12).round() / 1e12;
    if r == 0.0 {
        "0".into()
    } else {
        r.to_string()
    }
}

fn vector(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|&x| number(x)).collect();
    format!("[{}]", parts.join(","))
}

fn simulate(c: &Common) -> Outcome {
    let cfg = load_config(c)?;
    let bundle = run_experiment(&cfg)?;
    for rep in &bundle.replications {
        match (&rep.summary, &rep.error) {
            (Some(s), err) => {
                let first = s.var.first().copied().unwrap_or(f64::NAN);
                let last = s.var.last().copied().unwrap_or(f64::NAN);
                println!(
                    "seed-{}: converged={} t_stop={} var_first={} var_last={}{}",
                    rep.seed,
                    s.converged,
                    s.t_stop,
                    number(first),
                    number(last),
                    err.as_ref().map(|e| format!(" error={e}")).unwrap_or_default()
                );
            }
            (None, Some(e)) => println!("seed-{}: error={e}", rep.seed),
            (None, None) => println!("seed-{}: no rounds", rep.seed),
        }
    }
    if let Some(out) = &c.out {
        for dir in write_bundle(&bundle, out, c.format.into())? {
            println!("wrote {}", dir.display());
        }
    }
    match bundle.first_error() {
        Some(e) if bundle.has_numerical_error() => Err(Failure::Numerical(e.to_string())),
        _ => Ok(()),
    }
}

fn equilibrium(c: &Common) -> Outcome {
    let cfg = load_config(c)?;
    let world = build_world(&cfg, cfg.seed)?;
    let rep = solve_equilibrium(&cfg, &world)?;
    println!("x_PS={}", vector(rep.x_ps.as_slice()));
    println!(
        "mean={} variance={} spread={} method={:?} residual={:.2e}",
        number(rep.mean),
        number(rep.variance),
        number(rep.spread),
        rep.method,
        rep.residual
    );
    if let Some(v) = rep.consensus_value {
        println!("consensus={}", number(v));
    }
    if let Some(out) = &c.out {
        write_json(&seed_dir(out, cfg.seed)?.join("equilibrium.json"), &rep)?;
    }
    Ok(())
}

fn uniform_value(spec: &ValueSpec, name: &str) -> Result<f64, Failure> {
    match spec {
        ValueSpec::Uniform { value } => Ok(*value),
        _ => Err(Failure::Usage(format!("spectrum needs a uniform {name}"))),
    }
}

fn spectrum(c: &Common) -> Outcome {
    let cfg = load_config(c)?;
    let alpha = uniform_value(&cfg.alpha, "alpha")?;
    let beta = uniform_value(&cfg.beta, "beta")?;
    let world = build_world(&cfg, cfg.seed)?;
    let rep = spectral_decomposition(&world.graph, alpha, beta, cfg.k)?;
    let mut csv = String::from("index,mu,lambda,coefficient\n");
    for i in 0..rep.mu.len() {
        csv.push_str(&format!(
            "{i},{:?},{:?},{:?}\n",
            rep.mu[i], rep.lambda[i], rep.coefficients[i]
        ));
    }
    match (&c.out, c.format) {
        (None, _) => print!("{csv}"),
        (Some(out), Format::Csv) => write_file(&seed_dir(out, cfg.seed)?.join("spectrum.csv"), &csv)?,
        (Some(out), Format::Json) => write_json(&seed_dir(out, cfg.seed)?.join("spectrum.json"), &rep)?,
    }
    Ok(())
}

fn sweep(c: &Common) -> Outcome {
    let cfg = load_config(c)?;
    let spec = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Failure::Usage("config has no sweep block".into()))?;
    let world = build_world(&cfg, cfg.seed)?;
    let table = run_sweep(cfg.k, spec, &world)?;
    println!("{},mean,variance", table.parameter);
    for r in &table.rows {
        println!("{:?},{:?},{:?}", r.value, r.mean, r.variance);
    }
    if table.monotone_guaranteed && !table.strictly_decreasing_variance() {
        return Err(Failure::Numerical(
            "variance failed to decrease on a regular graph with homogeneous parameters".into(),
        ));
    }
    if let Some(out) = &c.out {
        let dir = seed_dir(out, cfg.seed)?;
        match c.format {
            Format::Csv => table.write_csv(&dir.join("sweep.csv"))?,
            Format::Json => write_json(&dir.join("sweep.json"), &table)?,
        }
    }
    Ok(())
}

fn steer(c: &Common) -> Outcome {
    let cfg = load_config(c)?;
    let spec = cfg
        .steer
        .as_ref()
        .ok_or_else(|| Failure::Usage("config has no steer block".into()))?;
    let table = steering_sweep(spec)?;
    println!("gamma,delta_l,mean,simulated_delta_l,simulated_mean");
    for r in &table.rows {
        println!(
            "{:?},{:?},{:?},{:?},{:?}",
            r.gamma, r.delta_l, r.mean, r.simulated_delta_l, r.simulated_mean
        );
    }
    println!("max_gap={:.2e}", table.max_gap);
    if table.max_gap > 1e-8 {
        return Err(Failure::Numerical(format!(
            "closed form and loop disagree by {:.2e}",
            table.max_gap
        )));
    }
    if let Some(out) = &c.out {
        let dir = seed_dir(out, cfg.seed)?;
        match c.format {
            Format::Csv => table.write_csv(&dir.join("steering.csv"))?,
            Format::Json => write_json(&dir.join("steering.json"), &table)?,
        }
    }
    Ok(())
}

fn gen_network(c: &Common, spec: Option<&str>) -> Outcome {
    let (spec, seed) = match spec {
        Some(text) => {
            let spec: NetworkSpec = serde_json::from_str(text)
                .map_err(|e| Failure::Usage(format!("--spec: {e}")))?;
            (spec, c.seed.unwrap_or(0))
        }
        None => {
            let cfg = load_config(c)?;
            match cfg.network {
                NetworkSource::Generator(spec) => (spec, cfg.seed),
                NetworkSource::EdgeList { .. } => {
                    return Err(Failure::Usage(
                        "config network is an edge list; pass --spec or a generator config".into(),
                    ))
                }
            }
        }
    };
    let g = generate_network(&spec, seed)?;
    match &c.out {
        Some(out) => {
            let dir = seed_dir(out, seed)?;
            g.write_edge_list(&dir.join("network.txt"))?;
            g.write_label_map(&dir.join("labels.csv"))?;
            println!("wrote {} ({} nodes, {} edges)", dir.display(), g.n(), g.edge_count());
        }
        None => {
            for (i, j) in g.edges() {
                println!("{} {}", g.label(i), g.label(j));
            }
        }
    }
    Ok(())
}

fn validate(c: &Common) -> Outcome {
    let cfg = match &c.config {
        Some(_) => Some(load_config(c)?),
        None => None,
    };
    let results = checks::run_all(cfg.as_ref());
    let mut failed = 0;
    for r in &results {
        match &r.outcome {
            Ok(detail) => println!("PASS {}: {detail}", r.name),
            Err(detail) => {
                failed += 1;
                println!("FAIL {}: {detail}", r.name);
            }
        }
    }
    if failed > 0 {
        Err(Failure::Validation(failed))
    } else {
        Ok(())
    }
}
