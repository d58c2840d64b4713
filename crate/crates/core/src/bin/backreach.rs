use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use backreach::geom::{Hyperrectangle, Region, TimedSetSequence};
use backreach::oracle::{approx_error, sample_point, simulate, true_bp_hull, write_samples_csv};
use backreach::policy::{build_policy, smoke_test, PolicySpec};
use backreach::render::{render_svg, RenderOptions};
use backreach::scenario::{build_benchmark, certify, run_pipeline, Scenario, BENCHMARKS};
use backreach::sweep::{sweep_partitions, sweep_periods, to_csv};
use backreach::{Error, Result};

#[derive(Parser)]
#[command(name = "backreach", version, about = "Backward reachability for neural feedback loops")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ScenarioArg {
    /// Scenario JSON file or shipped benchmark name.
    scenario: String,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Certify that X_0 cannot reach X_T within the horizon.
    Certify {
        #[command(flatten)]
        sc: ScenarioArg,
        /// Write the certificate JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute BP sets and write them as JSON.
    Bp {
        #[command(flatten)]
        sc: ScenarioArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Final-step error against partition budget or symbolic period, as CSV.
    Sweep {
        #[command(flatten)]
        sc: ScenarioArg,
        /// Comma-separated guided partition budgets.
        #[arg(long, value_delimiter = ',', conflicts_with = "period", required_unless_present = "period")]
        partitions: Option<Vec<usize>>,
        /// Comma-separated symbolic periods.
        #[arg(long, value_delimiter = ',')]
        period: Option<Vec<usize>>,
        /// Monte-Carlo samples for the reference hull.
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte-Carlo check of computed BP sets and of collisions from X_0.
    Oracle {
        #[command(flatten)]
        sc: ScenarioArg,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        /// Sample the whole state space instead of each backreachable set.
        #[arg(long)]
        state_space: bool,
        /// Write the reaching samples of the deepest step as CSV.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Draw a sets.json file as SVG.
    Render {
        sets: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Coordinate pair for states that are not 2-D, e.g. `0,1`.
        #[arg(long, value_delimiter = ',')]
        axes: Option<Vec<usize>>,
        /// Also draw partition elements.
        #[arg(long)]
        partitions: bool,
    },
    /// Policy networks.
    Policy {
        #[command(subcommand)]
        command: PolicyCommand,
    },
    /// List shipped benchmark names.
    Benchmarks {
        /// Write each benchmark as `<name>.json` into this directory.
        #[arg(long)]
        write: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum PolicyCommand {
    /// Build a network from a policy spec JSON.
    Build {
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Roll the policy out from this scenario's X_0 and reject it if it hits X_T.
        #[arg(long)]
        smoke: Option<String>,
    },
}

fn load_scenario(arg: &ScenarioArg) -> Result<Scenario> {
    let path = Path::new(&arg.scenario);
    let sc = if !path.exists() && BENCHMARKS.contains(&arg.scenario.as_str()) {
        build_benchmark(&arg.scenario)?
    } else {
        Scenario::load(path)?
    };
    Ok(match arg.seed {
        Some(s) => sc.with_seed(s),
        None => sc,
    })
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Config(format!("writing {}: {e}", path.display())))
}

fn to_pretty(v: &impl serde::Serialize) -> Result<String> {
    serde_json::to_string_pretty(v).map_err(|e| Error::Config(format!("serializing output: {e}")))
}

fn cmd_certify(arg: &ScenarioArg, out: Option<&Path>) -> Result<ExitCode> {
    let sc = load_scenario(arg)?;
    let cert = certify(&sc);
    println!("scenario: {}", cert.scenario);
    println!("verdict: {:?}", cert.verdict);
    println!("horizon: {}", cert.horizon);
    println!("invariance: {}", cert.invariance);
    if !cert.intersecting.is_empty() {
        println!("sets meeting X_0: {:?}", cert.intersecting);
    }
    for d in &cert.diagnostics {
        println!("note: {d}");
    }
    println!("wall_ms: {}", cert.wall_ms);
    if let Some(p) = out {
        write(p, &to_pretty(&cert)?)?;
    }
    Ok(ExitCode::from(cert.verdict.exit_code() as u8))
}

fn sets_json(seq: &TimedSetSequence, initial: &Hyperrectangle) -> serde_json::Value {
    let mut v = seq.to_json();
    if let Some(obj) = v.as_object_mut() {
        obj.insert("X_0".into(), serde_json::json!({ "lo": initial.lo(), "hi": initial.hi() }));
    }
    v
}

fn cmd_bp(arg: &ScenarioArg, out: &Path) -> Result<ExitCode> {
    let sc = load_scenario(arg)?;
    let net = sc.policy()?;
    let (seq, stats) = run_pipeline(&sc, &net)?;
    write(out, &to_pretty(&sets_json(&seq, &sc.initial))?)?;
    for (t, r) in seq.sets.iter().rev() {
        match r {
            Region::Box(b) => println!("t={t}: lo={:?} hi={:?}", b.lo(), b.hi()),
            Region::Empty => println!("t={t}: empty"),
        }
    }
    println!("stats: {}", serde_json::to_string(&stats).unwrap_or_default());
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(arg: &ScenarioArg, partitions: Option<&[usize]>, period: Option<&[usize]>, samples: usize, out: Option<&Path>) -> Result<ExitCode> {
    let sc = load_scenario(arg)?;
    let csv = match (partitions, period) {
        (Some(rs), _) => to_csv("r", &sweep_partitions(&sc, rs, samples)?),
        (None, Some(ps)) => to_csv("period", &sweep_periods(&sc, ps, samples)?),
        (None, None) => return Err(Error::Config("give --partitions or --period".into())),
    };
    match out {
        Some(p) => write(p, &csv)?,
        None => print!("{csv}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_oracle(arg: &ScenarioArg, samples: usize, state_space: bool, dump: Option<&Path>) -> Result<ExitCode> {
    let sc = load_scenario(arg)?;
    let net = sc.policy()?;
    let plant = sc.system.plant();
    let tau = sc.config.tau();
    let (seq, _) = run_pipeline(&sc, &net)?;
    let mut violations = 0usize;
    println!("t,domain,reaching,outside,error");
    for s in 1..=tau {
        let t = -(s as i32);
        let domain = if state_space {
            Some(plant.state_space().clone())
        } else {
            seq.backreachable.get(&t).and_then(Region::as_box).cloned()
        };
        let Some(domain) = domain else {
            println!("{t},empty,0,0,");
            continue;
        };
        let est = true_bp_hull(&plant, &net, &sc.target, s, &domain, samples, sc.seed)?;
        let set = seq.get(t).cloned().unwrap_or(Region::Empty);
        let outside = est.reaching.iter().filter(|x| !set.contains(x).unwrap_or(false)).count();
        violations += outside;
        let err = approx_error(&set, &est.hull).map_or(String::new(), |e| e.to_string());
        println!("{t},{},{},{outside},{err}", if state_space { "X" } else { "R" }, est.reaching.len());
        if s == tau {
            if let Some(p) = dump {
                write_samples_csv(p, &est.reaching)?;
            }
        }
    }
    let mut collisions = 0usize;
    for i in 0..samples as u64 {
        let x0 = sample_point(&sc.initial, sc.seed ^ 0x5eed, i);
        let tr = simulate(&plant, &net, &x0, tau)?;
        if tr.states[1..].iter().any(|x| sc.target.contains(x).unwrap_or(false)) {
            collisions += 1;
        }
    }
    println!("rollouts from X_0 reaching X_T: {collisions}/{samples}");
    println!("samples outside their BP set: {violations}");
    Ok(if violations == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn cmd_render(sets: &Path, out: &Path, axes: Option<&[usize]>, partitions: bool) -> Result<ExitCode> {
    let text = std::fs::read_to_string(sets).map_err(|e| Error::Config(format!("reading {}: {e}", sets.display())))?;
    let v: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{} line {} column {}: {e}", sets.display(), e.line(), e.column())))?;
    let seq = TimedSetSequence::from_json(&v)?;
    let initial = match v.get("X_0") {
        Some(b) => Some(
            serde_json::from_value::<Hyperrectangle>(b.clone()).map_err(|e| Error::Config(format!("X_0: {e}")))?,
        ),
        None => None,
    };
    let axes = match axes {
        None => None,
        Some(&[i, j]) => Some((i, j)),
        Some(a) => return Err(Error::Config(format!("--axes takes two coordinates, got {}", a.len()))),
    };
    let opts = RenderOptions {
        axes,
        initial,
        show_partitions: partitions,
    };
    write(out, &render_svg(&seq, &opts)?)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_policy_build(spec: &Path, out: Option<&Path>, smoke: Option<&str>) -> Result<ExitCode> {
    let text = std::fs::read_to_string(spec).map_err(|e| Error::Config(format!("reading {}: {e}", spec.display())))?;
    let spec: PolicySpec = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("policy spec line {} column {}: {e}", e.line(), e.column())))?;
    let net = build_policy(&spec)?;
    if let Some(name) = smoke {
        let sc = load_scenario(&ScenarioArg {
            scenario: name.to_string(),
            seed: None,
        })?;
        let starts: Vec<Vec<f64>> = (0..1000).map(|i| sample_point(&sc.initial, sc.seed, i)).collect();
        smoke_test(&sc.system.plant(), &net, &starts, &sc.target, sc.config.tau())?;
    }
    let json = net.to_json_string();
    match out {
        Some(p) => write(p, &json)?,
        None => println!("{json}"),
    }
    eprintln!("{} relu neurons in {} layers", net.relu_count(), net.layers().len());
    Ok(ExitCode::SUCCESS)
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("BACKREACH_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| Error::Config(format!("BACKREACH_THREADS must be a positive integer, got {v:?}")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    init_threads()?;
    match cli.command {
        Command::Certify { sc, out } => cmd_certify(&sc, out.as_deref()),
        Command::Bp { sc, out } => cmd_bp(&sc, &out),
        Command::Sweep {
            sc,
            partitions,
            period,
            samples,
            out,
        } => cmd_sweep(&sc, partitions.as_deref(), period.as_deref(), samples, out.as_deref()),
        Command::Oracle {
            sc,
            samples,
            state_space,
            dump,
        } => cmd_oracle(&sc, samples, state_space, dump.as_deref()),
        Command::Render {
            sets,
            out,
            axes,
            partitions,
        } => cmd_render(&sets, &out, axes.as_deref(), partitions),
        Command::Policy {
            command: PolicyCommand::Build { spec, out, smoke },
        } => cmd_policy_build(&spec, out.as_deref(), smoke.as_deref()),
        Command::Benchmarks { write: dir } => {
            for b in BENCHMARKS {
                match &dir {
                    Some(dir) => {
                        let path = dir.join(format!("{b}.json"));
                        write(&path, &(build_benchmark(b)?.to_json_string()? + "\n"))?;
                        println!("{}", path.display());
                    }
                    None => println!("{b}"),
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
