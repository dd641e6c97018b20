use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use railtac::appraisal::{
    bcr, benefit_report, npv, BenefitParams, ExternalityBounds, InvestmentPlan,
};
use railtac::evaluation::{objective, Kpis, Policy, RevenueBasis};
use railtac::optimizer::{grid_points, optimize_scheme, Algorithm, OptimizeConfig, SchemeChoice};
use railtac::pricing::{Bounds, TacScheme};
use railtac::scenario::{load_scenario, Scenario};
use railtac::simulator::{Engine, SimOptions};

#[derive(Parser)]
#[command(
    name = "railtac",
    version,
    about = "Track-access charge simulation and optimization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one charge scheme and write KPIs and the event trace.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        /// Scheme JSON file; defaults to no charge.
        #[arg(long, conflicts_with = "p")]
        scheme: Option<PathBuf>,
        /// Uniform proportional charge instead of a scheme file.
        #[arg(long)]
        p: Option<f64>,
        #[arg(long, default_value = "policy1")]
        policy: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Search for the charges maximizing revenue net of externalities.
    Optimize {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_enum, default_value = "proportional")]
        scheme_kind: SchemeKindArg,
        #[arg(long, value_enum, default_value = "pattern-search")]
        algo: AlgoArg,
        #[arg(long, default_value = "policy1")]
        policy: String,
        /// Points of the proportional grid that seeds every run.
        #[arg(long, default_value_t = 26)]
        steps: usize,
        /// Pattern-search evaluation budget.
        #[arg(long, default_value_t = 2000)]
        max_evals: usize,
        #[arg(long, default_value_t = 1e-4)]
        mesh_tol: f64,
        #[arg(long, default_value_t = 0.25)]
        p_max: f64,
        /// Evaluate poll sets concurrently; results do not change.
        #[arg(long)]
        parallel: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tabulate revenue, externality and objective over a grid of uniform charges.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "policy1")]
        policy: String,
        #[arg(long, default_value_t = 26)]
        steps: usize,
        #[arg(long, default_value_t = 0.25)]
        p_max: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Benefits and benefit-cost ratio of a simulated policy against a baseline.
    Appraise {
        /// `kpis.json` of the appraised policy.
        #[arg(long)]
        kpis: PathBuf,
        /// `kpis.json` of the no-intervention run.
        #[arg(long)]
        baseline: PathBuf,
        /// Externality rates JSON; defaults to the built-in averages.
        #[arg(long)]
        bounds: Option<PathBuf>,
        /// Road/rail cost and tax parameters JSON.
        #[arg(long)]
        params: Option<PathBuf>,
        /// Investment plan JSON; defaults to the corridor programme.
        #[arg(long, conflicts_with = "annual_cost")]
        plan: Option<PathBuf>,
        /// Annual cost in M€/yr, bypassing the plan.
        #[arg(long)]
        annual_cost: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeKindArg {
    Proportional,
    PathBased,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoArg {
    PatternSearch,
    Grid,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate {
            scenario,
            scheme,
            p,
            policy,
            out,
        } => simulate(&scenario, scheme.as_deref(), p, &policy, &out),
        Command::Optimize {
            scenario,
            scheme_kind,
            algo,
            policy,
            steps,
            max_evals,
            mesh_tol,
            p_max,
            parallel,
            out,
        } => {
            let mut cfg = OptimizeConfig::new(
                match scheme_kind {
                    SchemeKindArg::Proportional => SchemeChoice::Proportional,
                    SchemeKindArg::PathBased => SchemeChoice::PathBased,
                },
                match algo {
                    AlgoArg::PatternSearch => Algorithm::PatternSearch,
                    AlgoArg::Grid => Algorithm::Grid,
                },
            );
            cfg.grid_steps = steps;
            cfg.max_evaluations = max_evals;
            cfg.mesh_tolerance = mesh_tol;
            cfg.bounds = bounds(p_max)?;
            cfg.parallel = parallel;
            optimize(&scenario, &policy, &cfg, &out)
        }
        Command::Sweep {
            scenario,
            policy,
            steps,
            p_max,
            out,
        } => sweep(&scenario, &policy, steps, bounds(p_max)?, &out),
        Command::Appraise {
            kpis,
            baseline,
            bounds,
            params,
            plan,
            annual_cost,
            out,
        } => appraise(
            &kpis,
            &baseline,
            bounds.as_deref(),
            params.as_deref(),
            plan.as_deref(),
            annual_cost,
            &out,
        ),
    }
}

fn bounds(p_max: f64) -> Result<Bounds> {
    if !(p_max > 0.0 && p_max.is_finite()) {
        bail!("--p-max must be positive, got {p_max}");
    }
    Ok(Bounds {
        lower: 0.0,
        upper: p_max,
    })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn open_scenario(path: &Path, policy: &str) -> Result<(Scenario, Policy)> {
    let scenario = load_scenario(path)?;
    let policy = scenario.policy(policy)?.clone();
    Ok((scenario, policy))
}

/// Writes `bytes` to `dir/name` through a temporary file and a rename, so a
/// failed run never leaves a truncated output behind.
fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let tmp = dir.join(format!(".{name}.tmp"));
    let dest = dir.join(name);
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, &dest).with_context(|| format!("renaming to {}", dest.display()))?;
    Ok(())
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(dir, name, text.as_bytes())
}

fn csv_bytes<I, R>(header: &[&str], rows: I) -> Result<Vec<u8>>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    Ok(w.into_inner()?)
}

fn simulate(
    scenario_path: &Path,
    scheme_path: Option<&Path>,
    p: Option<f64>,
    policy: &str,
    out: &Path,
) -> Result<()> {
    let (scenario, policy) = open_scenario(scenario_path, policy)?;
    let scheme = match (scheme_path, p) {
        (Some(path), _) => read_json::<TacScheme>(path)?,
        (None, Some(p)) => TacScheme::proportional(p),
        (None, None) => TacScheme::free(),
    };
    let options = SimOptions {
        record_trace: true,
        ..SimOptions::default()
    };
    let result = Engine::new(&scenario, &scheme, options)?.run()?;
    let breakdown = objective(&result, &policy, &scenario.costs, RevenueBasis::Realized)?;

    write_atomic(
        out,
        "kpis.csv",
        &csv_bytes(&Kpis::HEADER, [breakdown.kpis.row()])?,
    )?;
    write_json(out, "kpis.json", &breakdown.kpis)?;
    write_json(out, "objective.json", &breakdown)?;

    let mut trace = Vec::new();
    result.write_trace_csv(&mut trace)?;
    write_atomic(out, "trace.csv", &trace)?;

    let trips = result.trips.iter().map(|t| {
        vec![
            t.packet_id.to_string(),
            result.paths[t.path].id.clone(),
            t.departure_h.to_string(),
            t.arrival_h.map(|a| a.to_string()).unwrap_or_default(),
            t.lambda.to_string(),
        ]
    });
    write_atomic(
        out,
        "trips.csv",
        &csv_bytes(
            &[
                "packet_id",
                "path",
                "departure_h",
                "arrival_h",
                "lambda_eur_per_tkm_h",
            ],
            trips,
        )?,
    )?;
    let throughput = result
        .daily_throughput()
        .into_iter()
        .flat_map(|(arc, days)| {
            days.into_iter()
                .enumerate()
                .map(move |(d, n)| vec![arc.clone(), d.to_string(), n.to_string()])
        });
    write_atomic(
        out,
        "throughput.csv",
        &csv_bytes(&["arc", "day", "entries"], throughput)?,
    )?;

    println!(
        "Z = {:.2} € (revenue {:.2} €, externality {:.2} €), {} trains completed",
        breakdown.z_eur,
        breakdown.revenue_eur,
        breakdown.externality_eur,
        breakdown.kpis.completed_trains
    );
    Ok(())
}

#[derive(Serialize)]
struct Timing {
    wall_time_s: f64,
    evaluations: usize,
}

fn optimize(scenario_path: &Path, policy: &str, cfg: &OptimizeConfig, out: &Path) -> Result<()> {
    let (scenario, policy) = open_scenario(scenario_path, policy)?;
    let report = optimize_scheme(&scenario, &policy, cfg)?;

    let log = report.log.iter().map(|e| {
        let vector: Vec<String> = e.vector.iter().map(f64::to_string).collect();
        vec![
            e.index.to_string(),
            e.stage.clone(),
            vector.join(";"),
            e.z.to_string(),
        ]
    });
    write_atomic(
        out,
        "optimize_log.csv",
        &csv_bytes(&["evaluation", "stage", "vector", "z_eur"], log)?,
    )?;
    let history = report.history.iter().map(|h| {
        vec![
            h.iteration.to_string(),
            h.mesh.to_string(),
            h.best_z.to_string(),
        ]
    });
    write_atomic(
        out,
        "history.csv",
        &csv_bytes(&["iteration", "mesh", "best_z_eur"], history)?,
    )?;
    write_json(out, "best_scheme.json", &report.best_scheme)?;
    write_json(out, "report.json", &report)?;
    write_json(
        out,
        "timing.json",
        &Timing {
            wall_time_s: report.wall_time.as_secs_f64(),
            evaluations: report.log.len(),
        },
    )?;
    println!(
        "best Z = {:.2} € at {:?} after {} evaluations",
        report.best_z,
        report.best_vector,
        report.log.len()
    );
    Ok(())
}

fn sweep(
    scenario_path: &Path,
    policy: &str,
    steps: usize,
    bounds: Bounds,
    out: &Path,
) -> Result<()> {
    if steps == 0 {
        bail!("--steps must be at least 1");
    }
    let (scenario, policy) = open_scenario(scenario_path, policy)?;
    let mut rows = Vec::with_capacity(steps);
    for p in grid_points(bounds, steps) {
        let scheme = TacScheme {
            bounds,
            ..TacScheme::proportional(p)
        };
        let b = railtac::optimizer::evaluate_scheme(
            &scenario,
            &scheme,
            &policy,
            RevenueBasis::Realized,
        )?;
        rows.push(vec![
            p.to_string(),
            b.revenue_eur.to_string(),
            b.externality_eur.to_string(),
            b.z_eur.to_string(),
        ]);
    }
    write_atomic(
        out,
        "sweep.csv",
        &csv_bytes(&["p", "revenue_eur", "externality_eur", "z_eur"], rows)?,
    )?;
    Ok(())
}

#[derive(Serialize)]
struct AppraisalOutput {
    report: railtac::appraisal::BenefitReport,
    annual_cost_meur: f64,
    npv: Option<railtac::appraisal::NetPresentValue>,
    bcr_pct: railtac::appraisal::Interval,
}

fn appraise(
    kpis: &Path,
    baseline: &Path,
    bounds: Option<&Path>,
    params: Option<&Path>,
    plan: Option<&Path>,
    annual_cost: Option<f64>,
    out: &Path,
) -> Result<()> {
    let sim: Kpis = read_json(kpis)?;
    let base: Kpis = read_json(baseline)?;
    let bounds = match bounds {
        Some(p) => read_json(p)?,
        None => ExternalityBounds::default(),
    };
    let params = match params {
        Some(p) => read_json(p)?,
        None => BenefitParams::default(),
    };
    let report = benefit_report(&sim, &base, &bounds, &params)?;
    let (annual_cost_meur, npv) = match annual_cost {
        Some(c) => (c, None),
        None => {
            let plan = match plan {
                Some(p) => read_json(p)?,
                None => InvestmentPlan::corridor_programme(),
            };
            let v = npv(&plan)?;
            (v.annualized_meur, Some(v))
        }
    };
    let ratio = bcr(report.total, annual_cost_meur)?;

    write_atomic(
        out,
        "bcr.csv",
        &csv_bytes(
            &[
                "tac_meur",
                "externality_lower_meur",
                "externality_upper_meur",
                "foc_benefit_meur",
                "social_benefit_meur",
                "total_lower_meur",
                "total_upper_meur",
                "annual_cost_meur",
                "bcr_lower_pct",
                "bcr_upper_pct",
            ],
            [[
                report.tac_revenue,
                report.externality_saving.lower,
                report.externality_saving.upper,
                report.foc_benefit,
                report.social_benefit,
                report.total.lower,
                report.total.upper,
                annual_cost_meur,
                ratio.lower,
                ratio.upper,
            ]
            .map(|v| v.to_string())],
        )?,
    )?;
    write_json(
        out,
        "benefit.json",
        &AppraisalOutput {
            report,
            annual_cost_meur,
            npv,
            bcr_pct: ratio,
        },
    )?;
    println!("BCR = [{:.2}%, {:.2}%]", ratio.lower, ratio.upper);
    Ok(())
}
