use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use planfuzz_core::fuzzer::{fuzz_loop, load_bench_dir, load_seed_dir, validity_bench, FuzzConfig};
use planfuzz_core::instantiator::{collect_constraints, explain, instantiate};
use planfuzz_core::minidb::{
    enumerate_plans, execute_update, load_script, parse_defects, static_check, CostParams, Database, DefectSet,
    PlannerConfig, Switches,
};
use planfuzz_core::oracle::{
    force_optimal, minimize, run_case, still_fails, BugReport, MpeOutcome, PlanResult, StatementResult,
};
use planfuzz_core::semtree::{parse_script, symbolize, SemType};

#[derive(Parser)]
#[command(name = "planfuzz", version, about = "Grammar-driven SQL fuzzer with a multi-plan oracle")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the fuzzing loop over a seed corpus.
    Fuzz(FuzzArgs),
    /// Execute one case and compare all plans of every SELECT.
    Run {
        file: PathBuf,
        #[arg(long)]
        dump_plans: bool,
        /// Print each outcome as JSON.
        #[arg(long)]
        json: bool,
        /// Write a report per discrepancy into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "")]
        defect: String,
        #[command(flatten)]
        planner: PlannerArgs,
    },
    /// Reduce the case of a report.
    Minimize {
        report: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Search for a hint, switch set or cost setting that makes a buggy
    /// plan the optimizer's choice.
    Poc {
        report: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Instantiate symbolic statements against a catalog fixture.
    Solve {
        file: PathBuf,
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long)]
        explain: bool,
        #[arg(long, default_value_t = 0)]
        rng_seed: u64,
    },
    /// Parse a script and print the normalized statements.
    Parse {
        file: PathBuf,
        #[arg(long)]
        dump_sem: bool,
    },
    /// Instantiation validity over `corpus.sql` and the catalog fixtures
    /// of a directory.
    BenchValidity {
        dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        rng_seed: u64,
    },
}

#[derive(Args)]
struct PlannerArgs {
    /// Comma-separated optimizer switches to turn off.
    #[arg(long, default_value = "")]
    disable_opt: String,
    #[arg(long)]
    max_plans: Option<usize>,
    /// key=value cost parameter file.
    #[arg(long)]
    cost_params: Option<PathBuf>,
}

impl PlannerArgs {
    fn config(&self) -> Result<PlannerConfig> {
        let mut cfg = PlannerConfig {
            switches: Switches::with_disabled(&self.disable_opt).map_err(anyhow::Error::msg)?,
            ..Default::default()
        };
        if let Some(n) = self.max_plans {
            if n == 0 {
                bail!("--max-plans must be at least 1");
            }
            cfg.limits.max_plans = n;
        }
        if let Some(p) = &self.cost_params {
            let text = read(p)?;
            cfg.params = CostParams::parse(&text).with_context(|| p.display().to_string())?;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("budget").required(true).args(["duration", "max_cases"]))]
struct FuzzArgs {
    #[arg(long)]
    seed_dir: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    rng_seed: u64,
    /// Wall-clock budget in seconds.
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    max_cases: Option<u64>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, default_value = "")]
    defect: String,
    #[command(flatten)]
    planner: PlannerArgs,
    /// Also write the stats as JSON.
    #[arg(long)]
    stats_json: Option<PathBuf>,
}

/// Failure that maps to exit code 2.
struct Usage(anyhow::Error);

impl<E: Into<anyhow::Error>> From<E> for Usage {
    fn from(e: E) -> Self {
        Usage(e.into())
    }
}

fn read(p: &Path) -> Result<String> {
    fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))
}

fn defects(list: &str) -> Result<DefectSet> {
    parse_defects(list).map_err(anyhow::Error::msg)
}

fn write_report(dir: &Path, r: &BugReport) -> Result<PathBuf> {
    let path = dir.join(r.file_name());
    fs::write(&path, serde_json::to_string_pretty(r)? + "\n").with_context(|| path.display().to_string())?;
    Ok(path)
}

fn load_report(p: &Path) -> Result<BugReport> {
    serde_json::from_str(&read(p)?).with_context(|| format!("{} is not a bug report", p.display()))
}

fn fuzz(a: FuzzArgs) -> Result<ExitCode, Usage> {
    let seeds = load_seed_dir(&a.seed_dir).with_context(|| a.seed_dir.display().to_string())?;
    let mut cfg = FuzzConfig::new(seeds, a.rng_seed);
    cfg.max_cases = a.max_cases;
    if let Some(s) = a.duration {
        if !(s.is_finite() && s > 0.0) {
            return Err(anyhow::anyhow!("--duration must be a positive number of seconds").into());
        }
        cfg.duration = Some(Duration::from_secs_f64(s));
    }
    cfg.workers = a.workers;
    cfg.defects = defects(&a.defect)?;
    cfg.planner = a.planner.config()?;
    fs::create_dir_all(&a.out).with_context(|| a.out.display().to_string())?;

    let out = a.out.clone();
    let sink = move |r: &BugReport| match write_report(&out, r) {
        Ok(p) => log::info!("report {}", p.display()),
        Err(e) => log::error!("{e:#}"),
    };
    let outcome = fuzz_loop(&cfg, &sink)?;
    print!("{}", outcome.stats.to_text());
    if let Some(p) = &a.stats_json {
        fs::write(p, serde_json::to_string_pretty(&outcome.stats)? + "\n").with_context(|| p.display().to_string())?;
    }
    Ok(if outcome.reports.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn describe(o: &MpeOutcome) -> String {
    let mut s = format!("outcome={:?}", o.kind);
    if let Some(c) = o.category {
        s.push_str(&format!(" category={c:?}"));
    }
    s.push_str(&format!(" plans={}", o.per_plan.len()));
    if !o.minority.is_empty() {
        s.push_str(&format!(" minority={}", o.minority.join(",")));
    }
    s.push('\n');
    for p in &o.per_plan {
        let res = match &p.result {
            PlanResult::Rows { digest, rows } => format!("rows={rows} digest={}", &digest[..16]),
            PlanResult::Error { error } => format!("error={error}"),
            PlanResult::Crash { message } => format!("crash={message}"),
        };
        let mark = if p.optimal { " optimal" } else { "" };
        s.push_str(&format!(
            "  sig={} cost={}{mark} {res}\n",
            p.signature,
            planfuzz_core::minidb::cost::fmt_g(p.cost)
        ));
    }
    s
}

fn run(
    file: &Path,
    dump_plans: bool,
    json: bool,
    out: Option<&Path>,
    defect: &str,
    planner: &PlannerArgs,
) -> Result<ExitCode, Usage> {
    let stmts = parse_script(&read(file)?)?;
    let defects = defects(defect)?;
    let cfg = planner.config()?;
    if let Some(d) = out {
        fs::create_dir_all(d).with_context(|| d.display().to_string())?;
    }
    let run = run_case(&stmts, &defects, &cfg);
    let mut db = Database::new();
    let mut bugs = 0;
    for (i, (s, r)) in stmts.iter().zip(&run.results).enumerate() {
        if s.sem_type != SemType::SelectStmt {
            if let StatementResult::UpdateFailed(e) = r {
                println!("[{i}] {}\n  update failed: {e}", s.render());
            }
            let _ = execute_update(&mut db, s);
            continue;
        }
        println!("[{i}] {}", s.render());
        match r {
            StatementResult::Mpe(o) => {
                if json {
                    println!("{}", serde_json::to_string(o)?);
                } else {
                    print!("{}", describe(o));
                }
                if o.is_bug() {
                    bugs += 1;
                    if let Some(d) = out {
                        let report = BugReport::new(&stmts, i, o, &defects, &cfg, 0);
                        println!("  report {}", write_report(d, &report)?.display());
                    }
                }
                if dump_plans {
                    for (n, p) in enumerate_plans(s, &db, &cfg)?.iter().enumerate() {
                        println!("{}", p.dump(n));
                    }
                }
            }
            StatementResult::Invalid(e) => println!("  invalid: {e}"),
            _ => {}
        }
    }
    Ok(if bugs > 0 { ExitCode::from(1) } else { ExitCode::SUCCESS })
}

fn minimize_cmd(report: &Path, out: &Path) -> Result<ExitCode, Usage> {
    let mut r = load_report(report)?;
    let trees = r.trees()?;
    let defects = r.defect_set().map_err(anyhow::Error::msg)?;
    let cfg = r.config.to_planner().map_err(anyhow::Error::msg)?;
    let fails = |c: &[_]| still_fails(c, &defects, &cfg, r.category);
    if !fails(&trees) {
        return Err(anyhow::anyhow!("the report's case no longer shows a {:?} bug", r.category).into());
    }
    let reduced = minimize(&trees, &fails);
    let sql: Vec<String> = reduced.iter().map(|t| t.render()).collect();
    println!("statements {} -> {}", trees.len(), sql.len());
    for s in &sql {
        println!("{s}");
    }
    r.minimized = Some(sql);
    fs::write(out, serde_json::to_string_pretty(&r)? + "\n").with_context(|| out.display().to_string())?;
    Ok(ExitCode::SUCCESS)
}

fn poc_cmd(report: &Path, out: &Path) -> Result<ExitCode, Usage> {
    let mut r = load_report(report)?;
    let trees = r.trees()?;
    let defects = r.defect_set().map_err(anyhow::Error::msg)?;
    let cfg = r.config.to_planner().map_err(anyhow::Error::msg)?;
    if r.select_index >= trees.len() || trees[r.select_index].sem_type != SemType::SelectStmt {
        return Err(anyhow::anyhow!("select_index {} is not a SELECT", r.select_index).into());
    }
    let mut tried = 0;
    for sig in &r.minority {
        match force_optimal(&trees, r.select_index, sig, &defects, &cfg) {
            Ok(recipe) => {
                println!(
                    "poc mechanism={:?} verified={} plan={sig}\n{}",
                    recipe.mechanism, recipe.verified, recipe.details
                );
                r.poc = Some(recipe);
                break;
            }
            Err(e) => tried += e.tried,
        }
    }
    if r.poc.is_none() {
        println!("poc=not-found tried={tried}");
    }
    fs::write(out, serde_json::to_string_pretty(&r)? + "\n").with_context(|| out.display().to_string())?;
    Ok(ExitCode::SUCCESS)
}

fn solve_cmd(file: &Path, catalog: &Path, show: bool, seed: u64) -> Result<ExitCode, Usage> {
    let mut db = load_script(&read(catalog)?).with_context(|| catalog.display().to_string())?;
    let stmts = parse_script(&read(file)?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for s in &stmts {
        let sym = symbolize(s);
        println!("-- {}", sym.render());
        if show {
            match collect_constraints(&sym, &db.catalog) {
                Ok(cs) => print!("{}", explain(&cs)),
                Err(e) => println!("constraints: {e}"),
            }
        }
        match instantiate(&sym, &db.catalog, &mut rng) {
            Ok(inst) => {
                if show && !inst.patches.is_empty() {
                    println!("patches: {:?}", inst.patches);
                }
                println!("{}", inst.sql);
                if inst.tree.sem_type != SemType::SelectStmt {
                    if let Err(e) = execute_update(&mut db, &inst.tree) {
                        println!("update failed: {e}");
                    }
                }
            }
            Err(e) => println!("rejected: {e}"),
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn parse_cmd(file: &Path, dump_sem: bool) -> Result<ExitCode, Usage> {
    for s in parse_script(&read(file)?)? {
        if dump_sem {
            print!("{}", s.dump());
        } else {
            println!("{}", s.render());
            if let Err(e) = static_check(&s, &Database::new().catalog) {
                log::debug!("{e}");
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn bench_cmd(dir: &Path, seed: u64) -> Result<ExitCode, Usage> {
    let (corpus, catalogs) = load_bench_dir(dir)?;
    let started = std::time::Instant::now();
    let report = validity_bench(&corpus, &catalogs, &mut ChaCha8Rng::seed_from_u64(seed));
    print!("{}", report.to_text());
    println!("catalogs={}", catalogs.len());
    println!("elapsed-ms={}", started.elapsed().as_millis());
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fuzz(a) => fuzz(a),
        Command::Run {
            file,
            dump_plans,
            json,
            out,
            defect,
            planner,
        } => run(&file, dump_plans, json, out.as_deref(), &defect, &planner),
        Command::Minimize { report, out } => minimize_cmd(&report, &out),
        Command::Poc { report, out } => poc_cmd(&report, &out),
        Command::Solve {
            file,
            catalog,
            explain,
            rng_seed,
        } => solve_cmd(&file, &catalog, explain, rng_seed),
        Command::Parse { file, dump_sem } => parse_cmd(&file, dump_sem),
        Command::BenchValidity { dir, rng_seed } => bench_cmd(&dir, rng_seed),
    };
    match result {
        Ok(code) => code,
        Err(Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
