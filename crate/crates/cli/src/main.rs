use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use mrfmotion::ct::{measure_ct, CtConfig, Procedure};
use mrfmotion::io::config::RunConfig;
use mrfmotion::io::pgm::{read_frames, write_frames};
use mrfmotion::io::records::append_record;
use mrfmotion::io::rundir::RunDir;
use mrfmotion::io::svg::write_quiver_svg;
use mrfmotion::io::table::{read_field_csv, write_ct_csv, write_field_csv, write_sweep_csv, write_trace_csv};
use mrfmotion::io::{read_file, IoError};
use mrfmotion::learning::{Learner, LearningError, LearningFailure};
use mrfmotion::mcmc::{batch_means, gibbs_sweep_full};
use mrfmotion::meanfield::{self, EstimateMode, MeanFieldState};
use mrfmotion::oracle::{exact_gradient, finite_difference_gradient, kl_between, Enumeration, OracleError, DEFAULT_BUDGET};
use mrfmotion::scaling::{grid, select_mu, sweep_mu, SweepRow};
use mrfmotion::{generate, metrics, FieldState, HyperParams, ModelError, Observation};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const EXIT_DIVERGED: u8 = 2;
const EXIT_CHECK_FAILED: u8 = 3;
const EXIT_BUDGET: u8 = 4;
const EXIT_USAGE: u8 = 64;
const EXIT_DATA: u8 = 65;
const EXIT_NO_INPUT: u8 = 66;
const EXIT_SOFTWARE: u8 = 70;

const SEED_ENV: &str = "MRFMOTION_SEED";

#[derive(Parser)]
#[command(
    name = "mrfmotion",
    version,
    about = "Motion estimation with a spatio-temporal MRF and hyper-parameter learning",
    after_help = "Exit codes:\n  0   success\n  2   mean-field iteration diverged\n  3   oracle check failed\n  4   enumeration over its state budget\n  64  usage error\n  65  malformed input data or config\n  66  input file missing or unreadable\n  70  internal error\n\nMRFMOTION_SEED overrides the `seed` key of any config file."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesise a frame pair with ground truth.
    Generate {
        /// Run config; scene keys and `seed` are used.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mean-field estimate of the hidden fields.
    Estimate {
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score the estimate over a grid of variance scales.
    SweepMu {
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// `a:b:step`, inclusive.
        #[arg(long, default_value = "1:60:1")]
        grid: String,
        #[arg(long)]
        params: Option<PathBuf>,
        /// Worker threads over grid points.
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Learn the hyper-parameters.
    Learn {
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Exact-enumeration checks on a tiny frame pair.
    Oracle {
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long, value_enum)]
        check: Check,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u64,
        /// Sampler sweeps for the marginal check.
        #[arg(long, default_value_t = 100_000)]
        sweeps: usize,
    },
    /// Compare an estimated field table with the truth.
    Metrics {
        #[arg(long)]
        est: PathBuf,
        #[arg(long)]
        truth: PathBuf,
    },
    /// Time the procedures over square lattices.
    Bench {
        /// Comma-separated lattice sides.
        #[arg(long, value_delimiter = ',', default_value = "10,20,30")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        repetitions: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Mpm,
    Map,
}

#[derive(Clone, Copy, ValueEnum)]
enum Check {
    Gradients,
    Marginals,
    Kl,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            e.print().ok();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(io) = cause.downcast_ref::<IoError>() {
            return match io {
                IoError::File { .. } | IoError::Io(_) => EXIT_NO_INPUT,
                _ => EXIT_DATA,
            };
        }
        if let Some(OracleError::Budget { .. }) = cause.downcast_ref::<OracleError>() {
            return EXIT_BUDGET;
        }
        if cause.is::<ModelError>() || cause.is::<std::num::ParseFloatError>() {
            return EXIT_DATA;
        }
        if let Some(le) = cause.downcast_ref::<LearningError>() {
            return match le.cause {
                LearningFailure::Divergence(_) => EXIT_DIVERGED,
                LearningFailure::Config(_) | LearningFailure::Model(_) => EXIT_DATA,
                LearningFailure::Sampler(_) => EXIT_SOFTWARE,
            };
        }
        if cause.is::<std::io::Error>() {
            return EXIT_NO_INPUT;
        }
    }
    EXIT_SOFTWARE
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Generate { spec, out } => generate_cmd(spec.as_deref(), &out),
        Command::Estimate { frames, params, mode, mu, out } => estimate_cmd(&frames, params.as_deref(), mode, mu, &out),
        Command::SweepMu { frames, truth, grid, params, workers, out } => {
            sweep_cmd(&frames, &truth, &grid, params.as_deref(), workers, &out)
        }
        Command::Learn { frames, config, truth, out } => learn_cmd(&frames, config.as_deref(), truth.as_deref(), &out),
        Command::Oracle { frames, params, check, budget, sweeps } => oracle_cmd(&frames, params.as_deref(), check, budget, sweeps),
        Command::Metrics { est, truth } => metrics_cmd(&est, &truth),
        Command::Bench { sizes, repetitions, out } => bench_cmd(&sizes, repetitions, &out),
    }
}

/// Config from `path` (defaults when absent) with the seed override applied.
fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => {
            let bytes = read_file(p)?;
            let text = String::from_utf8(bytes).map_err(|_| IoError::Config(format!("{} is not UTF-8", p.display())))?;
            RunConfig::from_toml(&text).with_context(|| format!("reading {}", p.display()))?
        }
        None => RunConfig::default(),
    };
    if let Ok(seed) = std::env::var(SEED_ENV) {
        cfg.seed = seed.trim().parse().map_err(|_| IoError::Config(format!("{SEED_ENV}={seed} is not an unsigned integer")))?;
    }
    Ok(cfg)
}

fn check_model(cfg: &RunConfig) -> Result<()> {
    cfg.hyper_params().validate()?;
    cfg.schedule().validate().map_err(IoError::Config)?;
    Ok(())
}

fn load_observation(dir: &Path, cfg: &RunConfig) -> Result<Observation> {
    let frames = read_frames(dir)?;
    Ok(Observation::new(frames, cfg.max_speed)?)
}

fn load_fields(path: &Path, obs: &Observation) -> Result<FieldState> {
    let text = String::from_utf8(read_file(path)?).map_err(|_| IoError::Config(format!("{} is not UTF-8", path.display())))?;
    let table = read_field_csv(&text).with_context(|| format!("reading {}", path.display()))?;
    let lat = obs.lattice();
    if (table.width, table.height) != (lat.width(), lat.height()) {
        return Err(ModelError::Shape {
            expected: format!("{}x{} field", lat.width(), lat.height()),
            actual: format!("{}x{}", table.width, table.height),
        }
        .into());
    }
    table.fields.validate(lat)?;
    Ok(table.fields)
}

fn generate_cmd(spec: Option<&Path>, out: &Path) -> Result<u8> {
    let cfg = load_config(spec)?;
    cfg.scene_spec().validate()?;
    let scene = generate(&cfg.scene_spec())?;
    let run = RunDir::create(out, "generate", &cfg)?;
    write_frames(run.root(), &scene.frames)?;
    run.write("truth.csv", write_field_csv(&scene.lattice, &scene.truth)?.as_bytes())?;
    println!("wrote {}", out.display());
    Ok(0)
}

fn estimate_cmd(frames: &Path, params: Option<&Path>, mode: Option<Mode>, mu: Option<f64>, out: &Path) -> Result<u8> {
    let mut cfg = load_config(params)?;
    if let Some(m) = mode {
        cfg.estimate_mode = match m {
            Mode::Mpm => EstimateMode::Mpm,
            Mode::Map => EstimateMode::Map,
        };
    }
    if let Some(mu) = mu {
        cfg.mu = mu;
    }
    check_model(&cfg)?;
    let obs = load_observation(frames, &cfg)?;
    let run = RunDir::create(out, "estimate", &cfg)?;
    let lat = obs.lattice();
    match meanfield::solve(&obs, &cfg.hyper_params(), &cfg.schedule(), MeanFieldState::max_entropy(lat)) {
        Ok(sol) => {
            let est = meanfield::quantize(lat, &sol.state);
            run.write("field.csv", write_field_csv(lat, &est)?.as_bytes())?;
            run.write("quiver.svg", write_quiver_svg(lat, &est, None)?.as_bytes())?;
            run.write("trace.csv", write_trace_csv(&sol.eps_trace, &sol.beta_trace).as_bytes())?;
            let status = serde_json::json!({
                "converged": sol.converged,
                "diverged": false,
                "iterations": sol.iterations,
                "final_epsilon": sol.eps_trace.last(),
            });
            run.write("status.json", format!("{status:#}\n").as_bytes())?;
            println!("converged={} iterations={}", sol.converged, sol.iterations);
            Ok(0)
        }
        Err(report) => {
            let est = meanfield::quantize(lat, &report.last_state);
            run.write("field.csv", write_field_csv(lat, &est)?.as_bytes())?;
            let beta: Vec<f64> = (0..report.eps_trace.len()).map(|t| cfg.schedule().beta_at(t)).collect();
            run.write("trace.csv", write_trace_csv(&report.eps_trace, &beta).as_bytes())?;
            let status = serde_json::json!({
                "converged": false,
                "diverged": true,
                "iterations": report.iteration,
                "cause": report.cause.to_string(),
            });
            run.write("status.json", format!("{status:#}\n").as_bytes())?;
            eprintln!("{report}");
            Ok(EXIT_DIVERGED)
        }
    }
}

fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [a, b, step] = parts[..] else {
        bail!(IoError::Config(format!("grid `{spec}` is not of the form a:b:step")));
    };
    let g = grid(a.trim().parse()?, b.trim().parse()?, step.trim().parse()?);
    if g.is_empty() || g.iter().any(|&mu| mu <= 0.0) {
        bail!(IoError::Config(format!("grid `{spec}` is empty or not positive")));
    }
    Ok(g)
}

fn sweep_cmd(frames: &Path, truth: &Path, grid_spec: &str, params: Option<&Path>, workers: usize, out: &Path) -> Result<u8> {
    let cfg = load_config(params)?;
    check_model(&cfg)?;
    let obs = load_observation(frames, &cfg)?;
    let truth = load_fields(truth, &obs)?;
    let grid = parse_grid(grid_spec)?;
    let (p, schedule) = (cfg.hyper_params(), cfg.schedule());
    let workers = workers.clamp(1, grid.len());
    let chunk = grid.len().div_ceil(workers);
    let rows: Vec<SweepRow> = std::thread::scope(|s| {
        let handles: Vec<_> = grid
            .chunks(chunk)
            .map(|part| s.spawn(|| sweep_mu(&obs, &truth, &p, part, &schedule)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().map_err(|_| anyhow!("sweep worker panicked")).and_then(|r| Ok(r?)))
            .collect::<Result<Vec<_>>>()
    })?
    .into_iter()
    .flatten()
    .collect();
    let run = RunDir::create(out, "sweep-mu", &cfg)?;
    run.write("sweep.csv", write_sweep_csv(&rows).as_bytes())?;
    match select_mu(&rows) {
        Ok(mu) => {
            run.write("mu_star.txt", format!("{mu}\n").as_bytes())?;
            println!("mu* = {mu}");
        }
        Err(e) => {
            run.write("mu_star.txt", b"none\n")?;
            println!("mu* = none ({e})");
        }
    }
    Ok(0)
}

fn learn_cmd(frames: &Path, config: Option<&Path>, truth: Option<&Path>, out: &Path) -> Result<u8> {
    let cfg = load_config(config)?;
    cfg.learning_config().validate()?;
    let obs = load_observation(frames, &cfg)?;
    let truth = truth.map(|t| load_fields(t, &obs)).transpose()?;
    let lat = obs.lattice();
    let run = RunDir::create(out, "learn", &cfg)?;
    let path = run.path("records.jsonl");
    let file = File::create(&path).map_err(|source| IoError::File { path: path.display().to_string(), source })?;
    let mut sink = BufWriter::new(file);

    let snapshot = |step: usize, est: &FieldState| -> Result<()> {
        if cfg.snapshot_every > 0 && step.is_multiple_of(cfg.snapshot_every) {
            run.write(&format!("quiver_{step:04}.svg"), write_quiver_svg(lat, est, truth.as_ref())?.as_bytes())?;
        }
        Ok(())
    };

    let start = Instant::now();
    let mut learner = Learner::new(&obs, cfg.learning_config())?;
    append_record(&mut sink, &learner.initial_record(truth.as_ref())?)?;
    snapshot(0, &learner.estimate())?;
    for step in 1..=cfg.steps {
        let record = learner.step(truth.as_ref())?;
        append_record(&mut sink, &record)?;
        snapshot(step, &learner.estimate())?;
    }
    let total = start.elapsed().as_secs_f64();

    let est = learner.estimate();
    run.write("field.csv", write_field_csv(lat, &est)?.as_bytes())?;
    run.write("params.json", format!("{:#}\n", serde_json::to_value(learner.params())?).as_bytes())?;
    run.write("ct.txt", format!("{total}\n").as_bytes())?;
    println!("learned {}", describe(learner.params()));
    Ok(0)
}

fn describe(p: &HyperParams) -> String {
    format!(
        "B={:.4} lambda_d={:.4} lambda_s={:.4} alpha_l={:.4} beta_d={:.4} T_s={:.4}",
        p.b, p.lambda_d, p.lambda_s, p.alpha_l, p.beta_d, p.t_s
    )
}

fn oracle_cmd(frames: &Path, params: Option<&Path>, check: Check, budget: u64, sweeps: usize) -> Result<u8> {
    let cfg = load_config(params)?;
    cfg.hyper_params().validate()?;
    let obs = load_observation(frames, &cfg)?;
    let p = cfg.hyper_params();
    let pass = match check {
        Check::Gradients => {
            let c = exact_gradient(&obs, &p, budget)?.to_array();
            let fd = finite_difference_gradient(obs.frames(), cfg.max_speed, &p, 1e-4, budget)?.to_array();
            let mut worst: f64 = 0.0;
            for (k, param) in mrfmotion::learning::Param::ALL.into_iter().enumerate() {
                let analytic = -p.beta * c[k];
                let rel = (analytic - fd[k]).abs() / analytic.abs().max(fd[k].abs()).max(1e-12);
                worst = worst.max(rel);
                println!("{:<9} analytic {analytic:>14.8e} finite-difference {:>14.8e} relative {rel:.2e}", param.name(), fd[k]);
            }
            worst < 1e-4
        }
        Check::Marginals => {
            let exact = Enumeration::new(obs.frames(), cfg.max_speed, &p, budget)?.marginals();
            let lat = obs.lattice();
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let mut f = FieldState::zeros(lat);
            let mut traces = vec![Vec::with_capacity(sweeps); lat.num_sites() + lat.num_edges()];
            for _ in 0..sweeps {
                gibbs_sweep_full(&obs, &p, p.beta, &mut f, &mut rng)?;
                for (t, &b) in traces.iter_mut().zip(f.s.iter().chain(&f.l)) {
                    t.push(f64::from(b));
                }
            }
            let mut worst: f64 = 0.0;
            for (k, (t, &want)) in traces.iter().zip(exact.s.iter().chain(&exact.l)).enumerate() {
                let (mean, se) = batch_means(t);
                let label = if k < lat.num_sites() { format!("s[{k}]") } else { format!("l[{}]", k - lat.num_sites()) };
                println!("{label:<6} sampled {mean:.4} (se {se:.4}) exact {want:.4}");
                worst = worst.max((mean - want).abs());
            }
            println!("max deviation {worst:.4}");
            worst < 0.02
        }
        Check::Kl => {
            let self_kl = kl_between(obs.frames(), cfg.max_speed, &p, &p, budget)?;
            println!("KL(P || P) = {self_kl:.3e}");
            let mut ok = self_kl.abs() < 1e-9;
            for param in mrfmotion::learning::Param::ALL {
                let mut q = p;
                param.set(&mut q, param.get(&p) * 1.1 + 0.01);
                let kl = kl_between(obs.frames(), cfg.max_speed, &p, &q, budget)?;
                println!("KL(P || P[{} perturbed]) = {kl:.6e}", param.name());
                ok &= kl >= -1e-12;
            }
            ok
        }
    };
    println!("{}", if pass { "PASS" } else { "FAIL" });
    Ok(if pass { 0 } else { EXIT_CHECK_FAILED })
}

fn metrics_cmd(est: &Path, truth: &Path) -> Result<u8> {
    let read = |p: &Path| -> Result<_> {
        let text = String::from_utf8(read_file(p)?).map_err(|_| IoError::Config(format!("{} is not UTF-8", p.display())))?;
        read_field_csv(&text).with_context(|| format!("reading {}", p.display()))
    };
    let (e, t) = (read(est)?, read(truth)?);
    if (e.width, e.height) != (t.width, t.height) {
        return Err(ModelError::Shape {
            expected: format!("{}x{}", t.width, t.height),
            actual: format!("{}x{}", e.width, e.height),
        }
        .into());
    }
    let m = metrics::report(&e.fields, &t.fields)?;
    let show = |x: Option<f64>| x.map_or("n/a".to_string(), |v| format!("{v:.6}"));
    println!("D1 {}", show(m.mse.d1));
    println!("D2 {}", show(m.mse.d2));
    println!("delta1_match {}", show(m.bits.match1));
    println!("delta2_match {}", show(m.bits.match2));
    println!("delta1_error {}", show(m.bits.error1));
    println!("delta2_error {}", show(m.bits.error2));
    println!("K {}", show(m.angular.k));
    println!("L {}", show(m.angular.l));
    Ok(0)
}

fn bench_cmd(sizes: &[usize], repetitions: usize, out: &Path) -> Result<u8> {
    if sizes.is_empty() || sizes.contains(&0) {
        bail!(IoError::Config("sizes must be positive".into()));
    }
    let cfg = RunConfig::default();
    let ct = CtConfig { repetitions, seed: cfg.seed, ..CtConfig::default() };
    let mut rows = Vec::new();
    for procedure in Procedure::ALL {
        let measured = measure_ct(sizes, procedure, &ct)?;
        for r in &measured {
            println!("{:<12} N={:<6} {:.4}s", procedure.name(), r.n, r.seconds);
        }
        rows.extend(measured);
    }
    let run = RunDir::create(out, "bench", &cfg)?;
    run.write("ct.csv", write_ct_csv(&rows).as_bytes())?;
    Ok(0)
}
