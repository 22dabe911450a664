use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use splitgame::adversary::{no_shortcut_sequence, AdversaryConfig, AdversaryKind};
use splitgame::composer::{BranchReport, Session};
use splitgame::decomposition::{boundedness_check, split, FiniteMartingale};
use splitgame::game::{Label, Verdict};
use splitgame::play::play_finite;
use splitgame::rational::Rational;
use splitgame::trace::{verify, write_jsonl};
use splitgame::tree::{NodeId, ParityRole};

#[derive(Parser)]
#[command(name = "splitgame", version, about = "Exact simulations of the split-betting game on binary trees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Play one game on a finite tree and print the referee's verdict.
    PlayFinite(PlayArgs),
    /// Nest finite games along a branch and report growth and bounds.
    Compose(ComposeArgs),
    /// Split a random positive martingale into even- and odd-step factors.
    Decompose(DecomposeArgs),
    /// Print the first terms of the no-shortcut sequence.
    PatternSeq {
        #[arg(long, default_value_t = 16)]
        n: u64,
    },
    /// Replay a JSONL trace and check every move.
    Verify { trace: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Passive,
    CaseA,
    CaseB,
    Random,
    Pattern,
}

#[derive(Clone, Copy, ValueEnum)]
enum Role {
    T0,
    T1,
}

#[derive(Args)]
struct AdversaryArgs {
    #[arg(long, value_enum, default_value = "passive")]
    adversary: Kind,
    /// Depth of the spine node the case-a adversary attacks.
    #[arg(long, default_value_t = 1)]
    target: u32,
    #[arg(long, value_enum, default_value = "t1")]
    role: Role,
    /// Excess over 1 used by the case-b and pattern adversaries, as p/q.
    #[arg(long, default_value = "1/8")]
    delta: Rational,
    /// Grid step of the random adversary, as p/q.
    #[arg(long, default_value = "1/4")]
    step: Rational,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Maximum number of adversary moves.
    #[arg(long)]
    budget: Option<usize>,
    /// Number of runs with consecutive seeds.
    #[arg(long, default_value_t = 1)]
    runs: u64,
    /// Worker threads for multiple runs.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Write the JSONL trace here (single runs only).
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Also show values as decimals.
    #[arg(long)]
    decimal: bool,
}

impl AdversaryArgs {
    fn config(&self, seed: u64) -> Result<AdversaryConfig> {
        if self.delta.is_zero() {
            bail!("--delta must be positive");
        }
        let role = match self.role {
            Role::T0 => ParityRole::EvenBettor,
            Role::T1 => ParityRole::OddBettor,
        };
        let mut cfg = match self.adversary {
            Kind::Passive => AdversaryConfig::passive(),
            Kind::CaseA => AdversaryConfig::case_a(self.target, role),
            Kind::CaseB => AdversaryConfig::case_b(self.delta.clone()),
            Kind::Random => AdversaryConfig {
                kind: AdversaryKind::Random { seed, step: self.step.clone() },
                budget: 50,
            },
            Kind::Pattern => AdversaryConfig::pattern(self.delta.clone(), usize::MAX),
        };
        if let Some(b) = self.budget {
            cfg.budget = b;
        }
        Ok(cfg)
    }

    fn seeds(&self) -> Result<Vec<u64>> {
        if self.runs == 0 {
            bail!("--runs must be at least 1");
        }
        if self.runs > 1 && self.trace.is_some() {
            bail!("--trace needs a single run");
        }
        Ok((0..self.runs).map(|i| self.seed.wrapping_add(i)).collect())
    }

    fn show(&self, x: &Rational) -> String {
        if self.decimal {
            format!("{x} (~{})", x.to_decimal(6))
        } else {
            x.to_string()
        }
    }
}

#[derive(Args)]
struct PlayArgs {
    #[arg(long)]
    h: u32,
    #[command(flatten)]
    adversary: AdversaryArgs,
}

#[derive(Args)]
struct ComposeArgs {
    #[arg(long, default_value_t = 3)]
    initial_h: u32,
    #[arg(long, default_value_t = 3)]
    stages: usize,
    /// Upper bound on adversary moves per session.
    #[arg(long, default_value_t = 1000)]
    max_steps: usize,
    #[command(flatten)]
    adversary: AdversaryArgs,
}

#[derive(Args)]
struct DecomposeArgs {
    #[arg(long, default_value_t = 4)]
    depth: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    runs: u64,
    /// Use the depth-2 example with t(0) = 3/2 instead of a random martingale.
    #[arg(long)]
    example: bool,
    /// Print every node of a single run.
    #[arg(long)]
    verbose: bool,
}

fn write_trace<T: serde::Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut out = BufWriter::new(file);
    write_jsonl(&mut out, records)?;
    out.flush()?;
    Ok(())
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build()?)
}

fn play(args: &PlayArgs) -> Result<u8> {
    let a = &args.adversary;
    let seeds = a.seeds()?;
    a.config(a.seed)?;
    splitgame::game::check_height(args.h)?;
    let runs: Vec<(u64, Result<Verdict, String>)> = pool(a.jobs)?.install(|| {
        seeds
            .par_iter()
            .map(|&seed| {
                let run = a.config(seed).map_err(|e| e.to_string()).and_then(|cfg| {
                    let run = play_finite(args.h, 0, &cfg).map_err(|e| e.to_string())?;
                    if let Some(path) = &a.trace {
                        write_trace(path, &run.records).map_err(|e| e.to_string())?;
                    }
                    Ok(run.verdict)
                });
                (seed, run)
            })
            .collect()
    });
    let mut all_won = true;
    for (seed, res) in runs {
        let prefix = if seeds.len() > 1 { format!("seed {seed}: ") } else { String::new() };
        match res {
            Ok(Verdict::MWins { leaf, label }) => println!("{prefix}M wins at leaf {leaf} (label {})", label.index()),
            Ok(Verdict::AWins) => {
                all_won = false;
                println!("{prefix}A wins");
            }
            Err(e) => {
                all_won = false;
                println!("{prefix}error: {e}");
            }
        }
    }
    Ok(if all_won { 0 } else { 1 })
}

fn print_report(a: &AdversaryArgs, r: &BranchReport) {
    let labels: Vec<String> = r.labels.iter().map(|l: &Label| l.index().to_string()).collect();
    let heights: Vec<String> = r.heights.iter().map(u32::to_string).collect();
    println!("omega prefix: {}", if r.omega_prefix.is_root() { "(empty)".to_string() } else { r.omega_prefix.to_string() });
    println!("stage heights: [{}]", heights.join(", "));
    println!("labels: [{}]", labels.join(", "));
    println!("t at end: {}", a.show(r.t_along.last().expect("nonempty")));
    println!("growth product: {}", a.show(&r.growth_product));
    println!("A path max: {}", a.show(&r.a_max_along));
    println!("allowance product: {}", a.show(&r.allowance_product));
    println!("checks: {}", if r.ok { "ok" } else { "FAILED" });
}

fn compose(args: &ComposeArgs) -> Result<u8> {
    let a = &args.adversary;
    let seeds = a.seeds()?;
    a.config(a.seed)?;
    splitgame::game::check_height(args.initial_h)?;
    let runs: Vec<(u64, Result<BranchReport, String>)> = pool(a.jobs)?.install(|| {
        seeds
            .par_iter()
            .map(|&seed| {
                let res = a.config(seed).map_err(|e| e.to_string()).and_then(|cfg| {
                    let mut s = Session::new(args.initial_h, cfg, args.stages).map_err(|e| e.to_string())?;
                    let report = s.run(args.max_steps).map_err(|e| e.to_string())?;
                    if let Some(path) = &a.trace {
                        write_trace(path, s.records()).map_err(|e| e.to_string())?;
                    }
                    Ok(report)
                });
                (seed, res)
            })
            .collect()
    });
    let mut ok = true;
    for (seed, res) in runs {
        if seeds.len() > 1 {
            println!("seed {seed}:");
        }
        match res {
            Ok(r) => {
                ok &= r.ok;
                print_report(a, &r);
            }
            Err(e) => {
                ok = false;
                println!("error: {e}");
            }
        }
    }
    Ok(if ok { 0 } else { 1 })
}

fn decompose(args: &DecomposeArgs) -> Result<u8> {
    if args.depth == 0 || args.depth > 16 {
        bail!("--depth must be between 1 and 16");
    }
    let inputs: Vec<FiniteMartingale> = if args.example {
        let values = [("", "1"), ("0", "3/2"), ("1", "1/2"), ("00", "2"), ("01", "1"), ("10", "1/2"), ("11", "1/2")]
            .into_iter()
            .map(|(x, v)| Ok((x.parse::<NodeId>()?, v.parse::<Rational>()?)))
            .collect::<Result<_>>()?;
        vec![FiniteMartingale::new(2, values)?]
    } else {
        (0..args.runs)
            .map(|i| FiniteMartingale::random_positive(&mut ChaCha8Rng::seed_from_u64(args.seed.wrapping_add(i)), args.depth))
            .collect()
    };
    let mut ok = true;
    for (i, t) in inputs.iter().enumerate() {
        let parts = split(t)?;
        let product_ok = t.values().iter().all(|(x, v)| &(parts.even.value(x) * parts.odd.value(x)) == v);
        let parity_ok = parts.even.as_valuation(ParityRole::EvenBettor).validate_martingale().is_empty()
            && parts.odd.as_valuation(ParityRole::OddBettor).validate_martingale().is_empty();
        let leftmost = NodeId::zeros(t.depth());
        let bounded = boundedness_check(t, &parts, &leftmost);
        ok &= product_ok && parity_ok && bounded.holds;
        if args.verbose || args.example {
            println!("node\tt\tt0\tt1");
            for (x, v) in t.values() {
                let name = if x.is_root() { "(root)".to_string() } else { x.to_string() };
                println!("{name}\t{v}\t{}\t{}", parts.even.value(x), parts.odd.value(x));
            }
        }
        println!(
            "run {i}: depth {}, product identity {}, parity martingales {}, max on {}: t {} <= t0 {} * t1 {}",
            t.depth(),
            if product_ok { "ok" } else { "FAILED" },
            if parity_ok { "ok" } else { "FAILED" },
            leftmost,
            bounded.max_t,
            bounded.max_even,
            bounded.max_odd
        );
    }
    Ok(if ok { 0 } else { 1 })
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::PlayFinite(args) => play(&args),
        Command::Compose(args) => compose(&args),
        Command::Decompose(args) => decompose(&args),
        Command::PatternSeq { n } => {
            if n == 0 {
                bail!("--n must be at least 1");
            }
            let s: String = (1..=n).map(|k| char::from(b'0' + no_shortcut_sequence(k))).collect();
            println!("{s}");
            Ok(0)
        }
        Command::Verify { trace } => {
            let file = File::open(&trace).with_context(|| format!("cannot open {}", trace.display()))?;
            match verify(BufReader::new(file)) {
                Ok(summary) => {
                    println!("ok: {} records, {} moves", summary.records, summary.moves);
                    Ok(0)
                }
                Err(e) => {
                    println!("{e}");
                    Ok(e.exit_code() as u8)
                }
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
