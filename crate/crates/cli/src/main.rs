use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};

use tilecast::allocator::{AllocationStatus, AllocatorKind};
use tilecast::bench::{run_bench, BenchConfig};
use tilecast::io::{
    generate_trace, parse_scenario, parse_trace, result_rows, write_results, write_trace_string, ResultRow,
    TraceGenConfig,
};
use tilecast::simulator::{fairness, goodput, run_grid, run_simulation, solve, EpochReport, Scenario};

/// Exit code for a run that completed but found the instance infeasible or
/// hit a domain error.
const EXIT_DOMAIN: u8 = 1;
/// Exit code for bad arguments and unreadable or malformed inputs.
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "tilecast", version, about = "Multicast slot allocation for tiled zoomable video")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Allocate once on the time-0 snapshot and print the objective and plan.
    Solve(ScenarioArgs),
    /// Run the epoch loop and write per-epoch results.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Results CSV; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run several allocators over several seeds and print a summary table.
    Compare {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Seeds as a list (`1,2,5`) or an inclusive range (`1-20`).
        #[arg(long, default_value = "1")]
        seeds: String,
        /// Joined results CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic RoI trace with a target similarity.
    GenTrace(GenTraceArgs),
    /// Time the chained and the naive DP over a sweep of slot budgets.
    Bench(BenchArgs),
}

#[derive(Args)]
struct ScenarioArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Allocator name; `compare` accepts a comma list and defaults to all.
    #[arg(long)]
    allocator: Option<String>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Slots per frame, overriding the value derived from the frame period.
    #[arg(long)]
    budget_slots: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct GenTraceArgs {
    /// Grid as COLSxROWS.
    #[arg(long, default_value = "16x9")]
    grid: String,
    #[arg(long, default_value_t = 8)]
    users: u32,
    /// RoI size as WxH in tiles.
    #[arg(long, default_value = "4x3")]
    roi: String,
    #[arg(long)]
    similarity: f64,
    #[arg(long, default_value_t = 60.0)]
    duration: f64,
    /// Shift all RoIs together every this many seconds.
    #[arg(long)]
    interval: Option<f64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Slot budgets to sweep.
    #[arg(long, value_delimiter = ',', default_values_t = [500u64, 1000, 2000, 4000])]
    budgets: Vec<u64>,
    #[arg(long, default_value_t = 3)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Skip the naive DP.
    #[arg(long)]
    no_naive: bool,
}

enum Failure {
    Usage(anyhow::Error),
    Domain(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Usage(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Solve(args) => cmd_solve(&args),
        Command::Simulate { scenario, out } => cmd_simulate(&scenario, out.as_deref()),
        Command::Compare { scenario, seeds, out } => cmd_compare(&scenario, &seeds, out.as_deref()),
        Command::GenTrace(args) => cmd_gen_trace(&args),
        Command::Bench(args) => cmd_bench(&args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Domain(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_DOMAIN)
        }
    }
}

fn load(args: &ScenarioArgs, allocator: Option<AllocatorKind>) -> anyhow::Result<Scenario> {
    let mut file = parse_scenario(&args.scenario)?;
    if let Some(a) = allocator {
        file.allocator = a;
    }
    if args.epsilon.is_some() {
        file.epsilon = args.epsilon;
    }
    if args.budget_slots.is_some() {
        file.budget_slots = args.budget_slots;
    }
    if let Some(s) = args.seed {
        file.seed = s;
    }
    let trace = match &args.trace {
        Some(p) => parse_trace(p)?,
        None => Vec::new(),
    };
    let scenario = file.to_scenario(&trace).map_err(|e| anyhow!("{}: {e}", args.scenario.display()))?;
    Ok(scenario)
}

fn single_allocator(args: &ScenarioArgs) -> anyhow::Result<Option<AllocatorKind>> {
    args.allocator.as_deref().map(|a| a.parse::<AllocatorKind>().map_err(anyhow::Error::from)).transpose()
}

fn allocator_list(args: &ScenarioArgs) -> anyhow::Result<Vec<AllocatorKind>> {
    match args.allocator.as_deref() {
        None => Ok(AllocatorKind::ALL.to_vec()),
        Some(list) => list.split(',').map(|a| a.trim().parse().map_err(anyhow::Error::from)).collect(),
    }
}

fn cmd_solve(args: &ScenarioArgs) -> Result<(), Failure> {
    let scenario = load(args, single_allocator(args)?)?;
    let a = solve(&scenario).map_err(|e| Failure::Domain(e.into()))?;
    let budget = scenario.slot.slots_per_frame;
    let mut out = io::stdout().lock();
    let mut emit = || -> io::Result<()> {
        writeln!(out, "allocator  {}", a.allocator)?;
        writeln!(out, "status     {}", status_name(a.status))?;
        writeln!(out, "objective  {}", a.objective_units() as f64 / tilecast::model::UTILITY_SCALE as f64)?;
        writeln!(out, "slots      {} / {budget}", a.result.plan.total_slots)?;
        let bounds: Vec<String> = a.bounds.0.iter().map(|(u, l)| format!("{u}:{l}")).collect();
        writeln!(out, "bounds     {}", bounds.join(" "))?;
        for e in &a.result.plan.entries {
            let to = e.recipient.map(|u| format!("  user {u}")).unwrap_or_default();
            writeln!(
                out,
                "tile {:>4}  level {}  rate {:>5} Mb/s  slots {:>5}{to}",
                e.tile,
                e.level,
                e.link_rate.0 as f64 / 1e6,
                e.slot_cost
            )?;
        }
        Ok(())
    };
    emit().context("writing to stdout")?;
    if a.status == AllocationStatus::Infeasible {
        return Err(Failure::Domain(anyhow!("no allocation meets the lowest level within {budget} slots")));
    }
    Ok(())
}

fn cmd_simulate(args: &ScenarioArgs, out: Option<&Path>) -> Result<(), Failure> {
    let scenario = load(args, single_allocator(args)?)?;
    let reports = run_simulation(&scenario).map_err(|e| Failure::Domain(e.into()))?;
    emit_results(out, &result_rows(&reports))?;
    let flagged = reports.iter().filter(|r| r.status != AllocationStatus::Feasible).count();
    eprintln!(
        "{} epochs, mean utility {:.3}, mean goodput {:.0} b/s, {flagged} degraded or infeasible",
        reports.len(),
        mean(reports.iter().map(EpochReport::realized_utility)),
        goodput(&reports).average_bps
    );
    Ok(())
}

fn cmd_compare(args: &ScenarioArgs, seeds: &str, out: Option<&Path>) -> Result<(), Failure> {
    let allocators = allocator_list(args)?;
    let seeds = parse_seeds(seeds)?;
    let scenario = load(args, None)?;
    let runs = run_grid(&scenario, &allocators, &seeds).map_err(|e| Failure::Domain(e.into()))?;
    let rows: Vec<ResultRow> = runs.iter().flat_map(|(_, _, r)| result_rows(r)).collect();
    if let Some(path) = out {
        emit_results(Some(path), &rows)?;
    }
    let mut stdout = io::stdout().lock();
    let mut table = || -> io::Result<()> {
        writeln!(stdout, "{:<14} {:>12} {:>14} {:>10} {:>10}", "allocator", "utility", "goodput_bps", "fairness", "flagged")?;
        for kind in &allocators {
            let reports: Vec<&EpochReport> =
                runs.iter().filter(|(a, _, _)| a == kind).flat_map(|(_, _, r)| r.iter()).collect();
            let per_run: Vec<f64> =
                runs.iter().filter(|(a, _, _)| a == kind).map(|(_, _, r)| goodput(r).average_bps).collect();
            writeln!(
                stdout,
                "{:<14} {:>12.3} {:>14.0} {:>10.4} {:>10}",
                kind.name(),
                mean(reports.iter().map(|r| r.realized_utility())),
                mean(per_run.into_iter()),
                mean(reports.iter().map(|r| fairness(r))),
                reports.iter().filter(|r| r.status != AllocationStatus::Feasible).count()
            )?;
        }
        Ok(())
    };
    table().context("writing to stdout")?;
    Ok(())
}

fn cmd_gen_trace(args: &GenTraceArgs) -> Result<(), Failure> {
    let cfg = TraceGenConfig {
        grid: parse_pair(&args.grid, "--grid")?,
        users: args.users,
        roi_w: parse_pair(&args.roi, "--roi")?.0,
        roi_h: parse_pair(&args.roi, "--roi")?.1,
        similarity_target: args.similarity,
        duration_s: args.duration,
        interval_s: args.interval,
        seed: args.seed,
    };
    let trace = generate_trace(&cfg).map_err(|e| Failure::Domain(e.into()))?;
    let text = write_trace_string(&trace.events);
    match &args.out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    eprintln!("measured similarity {:.4}", trace.similarity);
    Ok(())
}

fn cmd_bench(args: &BenchArgs) -> Result<(), Failure> {
    if args.budgets.is_empty() {
        return Err(Failure::Usage(anyhow!("--budgets needs at least one value")));
    }
    let cfg = BenchConfig { budgets: args.budgets.clone(), repetitions: args.reps, seed: args.seed, naive: !args.no_naive };
    let report = run_bench(&cfg).map_err(|e| Failure::Domain(e.into()))?;
    println!("{:>8} {:>12} {:>12} {:>12}", "T", "optimal_ms", "naive_ms", "objective");
    for p in &report.points {
        let naive = p.naive_ms.map(|t| format!("{t:.2}")).unwrap_or_else(|| "-".into());
        println!("{:>8} {:>12.2} {:>12} {:>12.3}", p.budget, p.optimal_ms, naive, p.objective);
    }
    if report.points.len() > 1 {
        println!("optimal linear fit R^2 {:.4}", report.optimal_linear_r2());
        let (lo, hi) = (report.points[0].budget, report.points[report.points.len() - 1].budget);
        if let Some(r) = report.naive_ratio(lo, hi) {
            println!("naive t({hi})/t({lo}) {r:.2}");
        }
    }
    Ok(())
}

fn emit_results(out: Option<&Path>, rows: &[ResultRow]) -> anyhow::Result<()> {
    match out {
        Some(p) => {
            let f = File::create(p).with_context(|| format!("creating {}", p.display()))?;
            write_results(f, rows)?;
        }
        None => write_results(io::stdout().lock(), rows)?,
    }
    Ok(())
}

fn parse_seeds(spec: &str) -> anyhow::Result<Vec<u64>> {
    let num = |s: &str| s.trim().parse::<u64>().map_err(|_| anyhow!("--seeds: `{s}` is not a seed"));
    let seeds: Vec<u64> = if let Some((a, b)) = spec.split_once('-') {
        let (a, b) = (num(a)?, num(b)?);
        if a > b {
            bail!("--seeds: empty range {spec}");
        }
        (a..=b).collect()
    } else {
        spec.split(',').map(num).collect::<anyhow::Result<_>>()?
    };
    Ok(seeds)
}

fn parse_pair(spec: &str, flag: &str) -> anyhow::Result<(u32, u32)> {
    let (a, b) = spec.split_once('x').ok_or_else(|| anyhow!("{flag}: expected AxB, got `{spec}`"))?;
    let num = |s: &str| s.trim().parse::<u32>().map_err(|_| anyhow!("{flag}: `{s}` is not a count"));
    Ok((num(a)?, num(b)?))
}

fn status_name(s: AllocationStatus) -> &'static str {
    match s {
        AllocationStatus::Feasible => "feasible",
        AllocationStatus::Degraded => "degraded",
        AllocationStatus::Infeasible => "infeasible",
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_accept_lists_and_ranges() {
        assert_eq!(parse_seeds("3").unwrap(), vec![3]);
        assert_eq!(parse_seeds("1,4, 9").unwrap(), vec![1, 4, 9]);
        assert_eq!(parse_seeds("2-5").unwrap(), vec![2, 3, 4, 5]);
        assert!(parse_seeds("5-2").is_err());
        assert!(parse_seeds("x").is_err());
    }

    #[test]
    fn pairs_parse() {
        assert_eq!(parse_pair("16x9", "--grid").unwrap(), (16, 9));
        assert!(parse_pair("16", "--grid").is_err());
    }
}
