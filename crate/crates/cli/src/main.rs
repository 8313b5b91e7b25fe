//! `imitate`: batch entry points that write reproducible CSV/JSON artifacts.
//!
//! Exit codes: 0 success, 1 property or acceptance failure, 2 usage or input error.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use imitate_core::bench::{dmp_properties, Method, ReachingBench, ScoreRow};
use imitate_core::config::RunConfig;
use imitate_core::dmp::DmpConfig;
use imitate_core::mdp::{run_pipeline, Env, OptionRecord};
use imitate_core::rl::trial_rng;
use imitate_core::segmentation::map_segment;
use imitate_core::segmentation::oracle::{brute_force, MAX_FRAMES};
use imitate_core::sim::{generate_demo, jitter_blocks, WorldState};
use imitate_core::state::abstract_state;
use imitate_core::{Demonstration, Error};

#[derive(Parser)]
#[command(name = "imitate", version, about = "Learn multi-step manipulation skills from one demonstration")]
struct Cli {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides `seed` from the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the scripted stacking demonstration.
    Demo,
    /// Segment a demonstration and select an abstraction per segment.
    Segment {
        demo: PathBuf,
        /// Also run exhaustive enumeration and compare (short demos only).
        #[arg(long)]
        oracle: bool,
    },
    /// Run the full pipeline: segment, formulate, learn, reformulate.
    Learn { demo: PathBuf },
    /// Replay learned options from jittered start states.
    Imitate {
        options: PathBuf,
        /// Number of jittered trials; defaults to the pipeline's evaluation count.
        #[arg(long)]
        trials: Option<usize>,
    },
    /// PI² against PoWER on the reaching benchmark.
    BenchPs {
        #[arg(long, default_value_t = 10)]
        seeds: u64,
    },
    /// Goal-scaling and goal-mirroring properties of both DMP variants.
    BenchDmp,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Demo => "demo",
            Command::Segment { .. } => "segment",
            Command::Learn { .. } => "learn",
            Command::Imitate { .. } => "imitate",
            Command::BenchPs { .. } => "bench-ps",
            Command::BenchDmp => "bench-dmp",
        }
    }
}

enum Failure {
    Property(String),
    Input(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::PipelineFailure(_) | Error::Divergence { .. } => Failure::Property(e.to_string()),
            other => Failure::Input(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

struct Ctx {
    cfg: RunConfig,
    config_path: Option<PathBuf>,
    out: PathBuf,
    seed: u64,
}

impl Ctx {
    fn write(&self, name: &str, text: &str) -> CmdResult {
        std::fs::write(self.out.join(name), text)?;
        Ok(())
    }

    fn manifest(&self, subcommand: &str) -> CmdResult {
        let wall = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let config = self.config_path.as_ref().map_or("<defaults>".to_string(), |p| p.display().to_string());
        let text = format!(
            "subcommand={subcommand}\nconfig={config}\nseed={}\nout={}\nversion={}\nwall_clock_unix={wall}\n",
            self.seed,
            self.out.display(),
            env!("CARGO_PKG_VERSION"),
        );
        self.write("manifest.txt", &text)
    }
}

fn read_demo(path: &Path) -> Result<Demonstration, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    Ok(Demonstration::from_csv(&text)?)
}

fn cmd_demo(ctx: &Ctx) -> CmdResult {
    let g = generate_demo(&ctx.cfg.world, &ctx.cfg.demo)?;
    ctx.write("demo.csv", &format!("# seed={}\n{}", ctx.seed, g.demo.to_csv()))?;
    println!("wrote {} frames ({:.2} s) to demo.csv", g.demo.len(), (g.demo.len() - 1) as f64 * g.demo.dt);
    Ok(())
}

fn cmd_segment(ctx: &Ctx, demo: &Path, oracle: bool) -> CmdResult {
    let demo = read_demo(demo)?;
    let prior = &ctx.cfg.pipeline.seg_prior;
    if oracle && demo.len() > MAX_FRAMES {
        return Err(Failure::Input(format!("--oracle supports at most {MAX_FRAMES} frames, demo has {}", demo.len())));
    }
    let result = map_segment(&demo, prior)?;
    ctx.write("segmentation.json", &result.to_json()?)?;
    for s in &result.segments {
        println!("{:>5} {:>5}  {}", s.start, s.end, s.abstraction);
    }
    if oracle {
        let bf = brute_force(&demo, prior)?;
        let same_parts = bf.segments.len() == result.segments.len()
            && bf.segments.iter().zip(&result.segments).all(|((j, t, q), s)| *j == s.start && *t == s.end && *q == s.abstraction);
        let diff = (bf.log_score - result.total_log_map).abs();
        println!("dp log-score {:.12}, enumeration {:.12}, |diff| {diff:.3e}", result.total_log_map, bf.log_score);
        if !(same_parts && diff <= 1e-9) {
            return Err(Failure::Property("DP and exhaustive enumeration disagree".into()));
        }
        println!("oracle: equal");
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct OptionsFile {
    seed: u64,
    hand_id: String,
    dmp: DmpConfig,
    start: WorldState,
    options: Vec<OptionRecord>,
}

fn curve_csv(seed: u64, a: &imitate_core::mdp::Attempt) -> String {
    let mut s = format!(
        "# seed={seed} attempt_seed={} segment={} abstraction={} gripper={} success_prob={}\n",
        a.seed, a.segment + 1, a.formulation.abstraction, a.formulation.include_gripper_action, a.success_prob
    );
    s.push_str("trial,update,total_cost,c_imm_sum,c_ter\n");
    for p in &a.curve {
        let _ = writeln!(s, "{},{},{},{},{}", p.trial, p.update, p.total_cost, p.c_imm_sum, p.c_ter);
    }
    s
}

fn cmd_learn(ctx: &Ctx, demo: &Path) -> CmdResult {
    let demo = read_demo(demo)?;
    let mut pcfg = ctx.cfg.pipeline.clone();
    pcfg.seed = ctx.seed;
    let env = ctx.cfg.env();
    let report = run_pipeline(&demo, &env, &pcfg)?;
    let mut per_segment = vec![0usize; report.segmentation.segments.len()];
    for a in &report.attempts {
        let k = per_segment[a.segment];
        per_segment[a.segment] += 1;
        ctx.write(&format!("curve_seg{}_form{}.csv", a.segment + 1, k + 1), &curve_csv(ctx.seed, a))?;
        println!(
            "segment {} formulation {}: {} gripper={} trials={} cost={:.3} success={:.2}",
            a.segment + 1,
            k + 1,
            a.formulation.abstraction,
            a.formulation.include_gripper_action,
            a.curve.len(),
            a.final_cost,
            a.success_prob
        );
    }
    let options = OptionsFile {
        seed: ctx.seed,
        hand_id: env.world.hand_id.clone(),
        dmp: env.dmp.clone(),
        start: report.start.clone(),
        options: report.options.clone(),
    };
    ctx.write("options.json", &serde_json::to_string_pretty(&options)?)?;
    let wrapped = serde_json::json!({ "seed": ctx.seed, "report": report });
    ctx.write("report.json", &serde_json::to_string_pretty(&wrapped)?)?;
    Ok(())
}

fn cmd_imitate(ctx: &Ctx, path: &Path, trials: Option<usize>) -> CmdResult {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    let file: OptionsFile = serde_json::from_str(&text)?;
    if file.options.is_empty() {
        return Err(Failure::Input("options file holds no options".into()));
    }
    let env = Env { world: ctx.cfg.world.clone(), dmp: file.dmp.clone() };
    let eval = &ctx.cfg.pipeline.eval;
    let n = trials.unwrap_or(eval.n_eval);
    if n == 0 {
        return Err(Failure::Input("--trials must be >= 1".into()));
    }
    let mut successes = vec![0usize; file.options.len()];
    let mut all = 0usize;
    for i in 0..n {
        let mut rng = trial_rng(ctx.seed, i as u64);
        let mut state = jitter_blocks(&file.start, &mut rng, eval.jitter_position, eval.jitter_yaw);
        let mut ok_all = true;
        for (k, o) in file.options.iter().enumerate() {
            match env.rollout(&state, &o.policy, &o.spec) {
                Ok((r, ev)) => {
                    if ev.terminal_cost < o.termination_threshold {
                        successes[k] += 1;
                    } else {
                        ok_all = false;
                    }
                    state = r.final_state().clone();
                }
                Err(_) => {
                    ok_all = false;
                    break;
                }
            }
        }
        all += ok_all as usize;
    }
    let mut nominal = file.start.clone();
    let mut nominal_terminal = Vec::new();
    for o in &file.options {
        let (r, ev) = env.rollout(&nominal, &o.policy, &o.spec)?;
        nominal = r.final_state().clone();
        nominal_terminal.push(serde_json::json!({
            "terminal_cost": ev.terminal_cost,
            "success": ev.terminal_cost < o.termination_threshold,
            "abstract_state": abstract_state(&nominal.public_state(&file.hand_id), &o.spec.abstraction)?,
        }));
    }
    let probs: Vec<f64> = successes.iter().map(|s| *s as f64 / n as f64).collect();
    let report = serde_json::json!({
        "seed": ctx.seed,
        "trials": n,
        "success_prob_per_segment": probs,
        "success_prob_all": all as f64 / n as f64,
        "nominal": nominal_terminal,
        "final_state": nominal,
    });
    ctx.write("report.json", &serde_json::to_string_pretty(&report)?)?;
    for (k, p) in probs.iter().enumerate() {
        println!("segment {}: success {:.2}", k + 1, p);
    }
    let alpha = ctx.cfg.pipeline.alpha;
    if probs.iter().any(|p| *p < alpha) {
        return Err(Failure::Property(format!("a segment fell below success probability {alpha}")));
    }
    Ok(())
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn cmd_bench_ps(ctx: &Ctx, seeds: u64) -> CmdResult {
    if seeds == 0 {
        return Err(Failure::Input("--seeds must be >= 1".into()));
    }
    let bench: &ReachingBench = &ctx.cfg.bench;
    let mut csv = format!("# seed={} seeds={seeds}\nmethod,seed,update,rollouts,score\n", ctx.seed);
    let mut finals = [Vec::new(), Vec::new()];
    let mut initial = 0.0;
    for (m, method) in [Method::Pi2, Method::Power].into_iter().enumerate() {
        for s in 0..seeds {
            let rows: Vec<ScoreRow> = bench.run(method, ctx.seed.wrapping_add(s))?;
            for r in &rows {
                let _ = writeln!(csv, "{},{},{},{},{}", method.tag(), r.seed, r.update, r.update * bench.rollouts_per_update, r.score);
            }
            initial = rows[0].score;
            finals[m].push(rows.last().map_or(initial, |r| r.score));
        }
    }
    ctx.write("scores.csv", &csv)?;
    let wins = (0..seeds as usize).filter(|&s| finals[0][s] > finals[1][s] && finals[1][s] > initial).count();
    let (pi2, power) = (median(finals[0].clone()), median(finals[1].clone()));
    println!("initial {initial:.4}  median final PI2 {pi2:.4}  PoWER {power:.4}  ordered seeds {wins}/{seeds}");
    if !(pi2 > power && power > initial) {
        return Err(Failure::Property("median scores are not ordered PI2 > PoWER > initial".into()));
    }
    Ok(())
}

fn cmd_bench_dmp(ctx: &Ctx) -> CmdResult {
    let rows = dmp_properties()?;
    let mut csv = format!("# seed={}\nvariant,property,value,pass\n", ctx.seed);
    for r in &rows {
        let variant = match r.variant {
            imitate_core::dmp::Variant::Original => "original",
            imitate_core::dmp::Variant::Bio => "bio",
        };
        let _ = writeln!(csv, "{variant},{},{},{}", r.property, r.value, if r.pass { "PASS" } else { "FAIL" });
        println!("{variant:<9} {:<32} {:>12.6e} {}", r.property, r.value, if r.pass { "PASS" } else { "FAIL" });
    }
    ctx.write("dmp_properties.csv", &csv)?;
    let expected = rows.iter().all(|r| r.pass == (r.variant == imitate_core::dmp::Variant::Bio));
    if !expected {
        return Err(Failure::Property("property flags differ from the documented shortcomings".into()));
    }
    Ok(())
}

fn run(cli: Cli) -> CmdResult {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p).map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?,
        None => RunConfig::parse("")?,
    };
    let seed = cli.seed.unwrap_or(cfg.pipeline.seed);
    std::fs::create_dir_all(&cli.out)?;
    let ctx = Ctx { cfg, config_path: cli.config.clone(), out: cli.out.clone(), seed };
    let result = match &cli.command {
        Command::Demo => cmd_demo(&ctx),
        Command::Segment { demo, oracle } => cmd_segment(&ctx, demo, *oracle),
        Command::Learn { demo } => cmd_learn(&ctx, demo),
        Command::Imitate { options, trials } => cmd_imitate(&ctx, options, *trials),
        Command::BenchPs { seeds } => cmd_bench_ps(&ctx, *seeds),
        Command::BenchDmp => cmd_bench_dmp(&ctx),
    };
    ctx.manifest(cli.command.name())?;
    result
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Property(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
