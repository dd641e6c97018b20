//! Derivative-free maximization over box-bounded decision vectors.
//!
//! [`pattern_search`] is a compass search: it polls `x ± mesh·e_i` for every
//! coordinate, moves to the best strictly improving point and widens the mesh,
//! or shrinks the mesh when nothing improves. [`grid_scan`] evaluates a scalar
//! objective on a uniform grid. [`optimize_scheme`] wires both to the
//! simulator.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluation::{objective, ObjectiveBreakdown, Policy, RevenueBasis};
use crate::pricing::{from_vector, Bounds, TacScheme, VectorLayout};
use crate::scenario::Scenario;
use crate::simulator;

#[derive(Debug, Error, PartialEq)]
pub enum OptimizeError {
    #[error("bounds have {lower} lower and {upper} upper entries")]
    BoundsLength { lower: usize, upper: usize },
    #[error("coordinate {coordinate}: lower bound {lower} exceeds upper bound {upper}")]
    InvalidBounds {
        coordinate: usize,
        lower: f64,
        upper: f64,
    },
    #[error("initial point has {got} coordinates, problem has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("initial point coordinate {coordinate} = {value} lies outside [{lower}, {upper}]")]
    Infeasible {
        coordinate: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },
    #[error("invalid optimizer configuration: {0}")]
    InvalidConfig(String),
    #[error("scheme has no paths to price")]
    NoPaths,
    #[error("grid scan only handles the proportional scheme")]
    GridNeedsScalar,
}

/// Box constraints of a maximization problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundedProblem {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoundedProblem {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, OptimizeError> {
        if lower.len() != upper.len() {
            return Err(OptimizeError::BoundsLength {
                lower: lower.len(),
                upper: upper.len(),
            });
        }
        for (i, (&l, &u)) in lower.iter().zip(&upper).enumerate() {
            if !(l <= u) {
                return Err(OptimizeError::InvalidBounds {
                    coordinate: i,
                    lower: l,
                    upper: u,
                });
            }
        }
        Ok(Self { lower, upper })
    }

    /// The same interval on every coordinate.
    pub fn uniform(dimension: usize, bounds: Bounds) -> Result<Self, OptimizeError> {
        Self::new(vec![bounds.lower; dimension], vec![bounds.upper; dimension])
    }

    pub fn dimension(&self) -> usize {
        self.lower.len()
    }

    fn check_feasible(&self, x: &[f64]) -> Result<(), OptimizeError> {
        if x.len() != self.dimension() {
            return Err(OptimizeError::DimensionMismatch {
                expected: self.dimension(),
                got: x.len(),
            });
        }
        for (i, &v) in x.iter().enumerate() {
            if !(v >= self.lower[i] && v <= self.upper[i]) {
                return Err(OptimizeError::Infeasible {
                    coordinate: i,
                    value: v,
                    lower: self.lower[i],
                    upper: self.upper[i],
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternSearchConfig {
    pub initial_point: Vec<f64>,
    pub initial_mesh: f64,
    pub contraction_factor: f64,
    pub expansion_factor: f64,
    pub mesh_tolerance: f64,
    /// Total objective evaluations, the initial point included.
    pub max_evaluations: usize,
    /// Evaluate each poll set concurrently. Results are identical either way.
    pub parallel_poll: bool,
}

impl PatternSearchConfig {
    pub fn new(initial_point: Vec<f64>, initial_mesh: f64) -> Self {
        Self {
            initial_point,
            initial_mesh,
            contraction_factor: 0.5,
            expansion_factor: 2.0,
            mesh_tolerance: 1e-4,
            max_evaluations: 10_000,
            parallel_poll: false,
        }
    }

    fn validate(&self) -> Result<(), OptimizeError> {
        let bad = |m: &str| Err(OptimizeError::InvalidConfig(m.to_string()));
        if !(self.contraction_factor > 0.0 && self.contraction_factor < 1.0) {
            return bad("contraction factor must lie in (0, 1)");
        }
        if !(self.expansion_factor >= 1.0 && self.expansion_factor.is_finite()) {
            return bad("expansion factor must be at least 1");
        }
        if !(self.mesh_tolerance > 0.0) {
            return bad("mesh tolerance must be positive");
        }
        if !(self.initial_mesh > 0.0 && self.initial_mesh.is_finite()) {
            return bad("initial mesh must be positive");
        }
        if self.max_evaluations == 0 {
            return bad("evaluation budget must be at least 1");
        }
        Ok(())
    }
}

/// Mesh and incumbent after each pattern-search iteration; iteration 0 is the
/// initial point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub iteration: usize,
    pub mesh: f64,
    pub best_z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub index: usize,
    pub point: Vec<f64>,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternSearchResult {
    pub best_point: Vec<f64>,
    pub best_z: f64,
    pub history: Vec<HistoryEntry>,
    pub evaluations: Vec<EvaluationRecord>,
}

fn evaluate_all<F, E>(f: &F, points: &[Vec<f64>], parallel: bool) -> Result<Vec<f64>, E>
where
    F: Fn(&[f64]) -> Result<f64, E> + Sync,
    E: Send,
{
    if parallel {
        points.par_iter().map(|p| f(p)).collect()
    } else {
        points.iter().map(|p| f(p)).collect()
    }
}

/// Maximizes `f` over the box of `problem`.
///
/// The whole poll set is evaluated before choosing; the winner is the largest
/// strict improvement, earliest in poll order on ties, so parallel and
/// sequential runs agree. Polls that clip back onto the incumbent are skipped.
///
/// ```
/// use railtac::optimizer::{pattern_search, BoundedProblem, PatternSearchConfig};
///
/// let problem = BoundedProblem::new(vec![0.0], vec![0.25]).unwrap();
/// let cfg = PatternSearchConfig::new(vec![0.125], 0.05);
/// let f = |x: &[f64]| Ok::<_, ()>(-(x[0] - 0.1).powi(2));
/// let out = pattern_search(&problem, f, &cfg).unwrap().unwrap();
/// assert!((out.best_point[0] - 0.1).abs() < 1e-3);
/// ```
///
/// The outer `Result` reports setup errors, the inner one the first failing
/// objective evaluation.
pub fn pattern_search<F, E>(
    problem: &BoundedProblem,
    f: F,
    cfg: &PatternSearchConfig,
) -> Result<Result<PatternSearchResult, E>, OptimizeError>
where
    F: Fn(&[f64]) -> Result<f64, E> + Sync,
    E: Send,
{
    cfg.validate()?;
    problem.check_feasible(&cfg.initial_point)?;
    Ok(run_pattern_search(problem, &f, cfg))
}

fn run_pattern_search<F, E>(
    problem: &BoundedProblem,
    f: &F,
    cfg: &PatternSearchConfig,
) -> Result<PatternSearchResult, E>
where
    F: Fn(&[f64]) -> Result<f64, E> + Sync,
    E: Send,
{
    let mut x = cfg.initial_point.clone();
    let mut z = f(&x)?;
    let mut mesh = cfg.initial_mesh;
    let mut evaluations = vec![EvaluationRecord {
        index: 0,
        point: x.clone(),
        z,
    }];
    let mut history = vec![HistoryEntry {
        iteration: 0,
        mesh,
        best_z: z,
    }];

    let mut iteration = 0;
    while mesh >= cfg.mesh_tolerance && evaluations.len() < cfg.max_evaluations {
        iteration += 1;
        let mut poll = Vec::with_capacity(2 * x.len());
        for i in 0..x.len() {
            for step in [mesh, -mesh] {
                let v = (x[i] + step).clamp(problem.lower[i], problem.upper[i]);
                if v != x[i] {
                    let mut y = x.clone();
                    y[i] = v;
                    poll.push(y);
                }
            }
        }
        poll.truncate(cfg.max_evaluations - evaluations.len());

        let values = evaluate_all(f, &poll, cfg.parallel_poll)?;
        let mut winner: Option<usize> = None;
        let mut winner_z = z;
        for (k, &v) in values.iter().enumerate() {
            if v > winner_z {
                winner = Some(k);
                winner_z = v;
            }
        }
        for (point, v) in poll.iter().zip(&values) {
            evaluations.push(EvaluationRecord {
                index: evaluations.len(),
                point: point.clone(),
                z: *v,
            });
        }

        match winner {
            Some(k) => {
                x = poll.swap_remove(k);
                z = winner_z;
                mesh *= cfg.expansion_factor;
            }
            None => mesh *= cfg.contraction_factor,
        }
        history.push(HistoryEntry {
            iteration,
            mesh,
            best_z: z,
        });
    }

    Ok(PatternSearchResult {
        best_point: x,
        best_z: z,
        history,
        evaluations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridScanConfig {
    /// Number of grid points, both bounds included.
    pub steps: usize,
    pub parallel: bool,
}

impl Default for GridScanConfig {
    /// 26 points on `[0, 0.25]` is a 0.01 resolution.
    fn default() -> Self {
        Self {
            steps: 26,
            parallel: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridScanResult {
    pub best_p: f64,
    pub best_z: f64,
    /// `(p, z)` for every grid point in increasing `p`.
    pub curve: Vec<(f64, f64)>,
}

/// Grid points `lower + i·(upper − lower)/(steps − 1)`.
pub fn grid_points(bounds: Bounds, steps: usize) -> Vec<f64> {
    match steps {
        0 => vec![],
        1 => vec![bounds.lower],
        n => {
            let h = (bounds.upper - bounds.lower) / (n - 1) as f64;
            (0..n)
                .map(|i| {
                    if i == n - 1 {
                        bounds.upper
                    } else {
                        bounds.lower + i as f64 * h
                    }
                })
                .collect()
        }
    }
}

/// Evaluates `f` on every grid point and keeps the first maximizer.
pub fn grid_scan<F, E>(
    bounds: Bounds,
    f: F,
    cfg: &GridScanConfig,
) -> Result<Result<GridScanResult, E>, OptimizeError>
where
    F: Fn(f64) -> Result<f64, E> + Sync,
    E: Send,
{
    if cfg.steps == 0 {
        return Err(OptimizeError::InvalidConfig(
            "grid needs at least one point".into(),
        ));
    }
    BoundedProblem::new(vec![bounds.lower], vec![bounds.upper])?;
    let points: Vec<Vec<f64>> = grid_points(bounds, cfg.steps)
        .into_iter()
        .map(|p| vec![p])
        .collect();
    Ok(
        evaluate_all(&|x: &[f64]| f(x[0]), &points, cfg.parallel).map(|values| {
            let curve: Vec<(f64, f64)> = points.iter().map(|p| p[0]).zip(values).collect();
            let (best_p, best_z) =
                curve
                    .iter()
                    .copied()
                    .fold(curve[0], |best, c| if c.1 > best.1 { c } else { best });
            GridScanResult {
                best_p,
                best_z,
                curve,
            }
        }),
    )
}

// ---- scenario pipeline -----------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeChoice {
    Proportional,
    PathBased,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    PatternSearch,
    Grid,
}

/// Settings of [`optimize_scheme`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeConfig {
    pub scheme: SchemeChoice,
    pub algorithm: Algorithm,
    pub bounds: Bounds,
    /// Resolution of the proportional grid that seeds every run.
    pub grid_steps: usize,
    /// Starting mesh of the pattern search; defaults to the grid spacing.
    pub initial_mesh: Option<f64>,
    pub contraction_factor: f64,
    pub expansion_factor: f64,
    pub mesh_tolerance: f64,
    /// Pattern-search budget, the seed evaluation included.
    pub max_evaluations: usize,
    pub parallel: bool,
    pub revenue_basis: RevenueBasis,
}

impl OptimizeConfig {
    pub fn new(scheme: SchemeChoice, algorithm: Algorithm) -> Self {
        Self {
            scheme,
            algorithm,
            bounds: Bounds::default(),
            grid_steps: 26,
            initial_mesh: None,
            contraction_factor: 0.5,
            expansion_factor: 2.0,
            mesh_tolerance: 1e-4,
            max_evaluations: 2_000,
            parallel: false,
            revenue_basis: RevenueBasis::Realized,
        }
    }
}

/// One stage's answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub vector: Vec<f64>,
    pub z: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub index: usize,
    /// `grid` or `pattern_search`.
    pub stage: String,
    pub vector: Vec<f64>,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeReport {
    pub policy: String,
    pub config: OptimizeConfig,
    pub layout: VectorLayout,
    /// Best uniform charge found by the grid.
    pub proportional: Solution,
    /// Pattern-search refinement, absent for grid-only runs.
    pub refined: Option<Solution>,
    /// Coordinates of `best_scheme` in `layout`.
    pub best_vector: Vec<f64>,
    pub best_scheme: TacScheme,
    pub best_z: f64,
    /// Objective of a fresh simulation of `best_scheme`.
    pub breakdown: ObjectiveBreakdown,
    pub grid_curve: Vec<(f64, f64)>,
    pub history: Vec<HistoryEntry>,
    pub log: Vec<LogEntry>,
    /// Excluded from serialization so reports of identical runs compare equal.
    #[serde(skip)]
    pub wall_time: Duration,
}

/// Objective of one scheme on a scenario.
pub fn evaluate_scheme(
    scenario: &Scenario,
    scheme: &TacScheme,
    policy: &Policy,
    basis: RevenueBasis,
) -> Result<ObjectiveBreakdown, crate::Error> {
    let result = simulator::run(scenario, scheme)?;
    Ok(objective(&result, policy, &scenario.costs, basis)?)
}

/// Finds the charges maximizing revenue net of externalities.
///
/// Every run starts with a grid scan of the uniform charge. Pattern search
/// then refines from the grid optimum, in one dimension for the proportional
/// scheme and with one coordinate per path (seeded with the uniform vector)
/// for the path-based scheme.
pub fn optimize_scheme(
    scenario: &Scenario,
    policy: &Policy,
    cfg: &OptimizeConfig,
) -> Result<OptimizeReport, crate::Error> {
    let started = Instant::now();
    let bounds = cfg.bounds;
    let layout = match cfg.scheme {
        SchemeChoice::Proportional => VectorLayout::Proportional,
        SchemeChoice::PathBased => {
            let paths = scenario.path_ids();
            if paths.is_empty() {
                return Err(OptimizeError::NoPaths.into());
            }
            VectorLayout::PathBased { paths }
        }
    };
    if cfg.algorithm == Algorithm::Grid && cfg.scheme != SchemeChoice::Proportional {
        return Err(OptimizeError::GridNeedsScalar.into());
    }

    let eval = |layout: &VectorLayout, v: &[f64]| -> Result<f64, crate::Error> {
        let scheme = from_vector(layout, bounds, v)?;
        Ok(evaluate_scheme(scenario, &scheme, policy, cfg.revenue_basis)?.z_eur)
    };

    let grid = grid_scan(
        bounds,
        |p| eval(&VectorLayout::Proportional, &[p]),
        &GridScanConfig {
            steps: cfg.grid_steps,
            parallel: cfg.parallel,
        },
    )??;
    let mut log: Vec<LogEntry> = grid
        .curve
        .iter()
        .enumerate()
        .map(|(i, &(p, z))| LogEntry {
            index: i,
            stage: "grid".into(),
            vector: vec![p],
            z,
        })
        .collect();
    let proportional = Solution {
        vector: vec![grid.best_p],
        z: grid.best_z,
        evaluations: grid.curve.len(),
    };

    let mut history = Vec::new();
    let refined = match cfg.algorithm {
        Algorithm::Grid => None,
        Algorithm::PatternSearch => {
            let dim = layout.dimension();
            let problem = BoundedProblem::uniform(dim, bounds)?;
            let spacing = if cfg.grid_steps > 1 {
                (bounds.upper - bounds.lower) / (cfg.grid_steps - 1) as f64
            } else {
                bounds.upper - bounds.lower
            };
            let ps_cfg = PatternSearchConfig {
                initial_point: vec![grid.best_p; dim],
                initial_mesh: cfg.initial_mesh.unwrap_or(spacing.max(cfg.mesh_tolerance)),
                contraction_factor: cfg.contraction_factor,
                expansion_factor: cfg.expansion_factor,
                mesh_tolerance: cfg.mesh_tolerance,
                max_evaluations: cfg.max_evaluations,
                parallel_poll: cfg.parallel,
            };
            let ps = pattern_search(&problem, |v: &[f64]| eval(&layout, v), &ps_cfg)??;
            let offset = log.len();
            log.extend(ps.evaluations.iter().map(|e| LogEntry {
                index: offset + e.index,
                stage: "pattern_search".into(),
                vector: e.point.clone(),
                z: e.z,
            }));
            history = ps.history;
            Some(Solution {
                vector: ps.best_point,
                z: ps.best_z,
                evaluations: ps.evaluations.len(),
            })
        }
    };

    let (best_layout, best_vector) = match &refined {
        Some(s) => (layout.clone(), s.vector.clone()),
        None => (VectorLayout::Proportional, proportional.vector.clone()),
    };
    let best_scheme = from_vector(&best_layout, bounds, &best_vector)?;
    let breakdown = evaluate_scheme(scenario, &best_scheme, policy, cfg.revenue_basis)?;
    Ok(OptimizeReport {
        policy: policy.name.clone(),
        config: cfg.clone(),
        layout: best_layout,
        best_z: breakdown.z_eur,
        best_vector,
        proportional,
        refined,
        best_scheme,
        breakdown,
        grid_curve: grid.curve,
        history,
        log,
        wall_time: started.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_box(d: usize) -> BoundedProblem {
        BoundedProblem::uniform(d, Bounds::default()).unwrap()
    }

    #[test]
    fn recovers_interior_maximum() {
        let cfg = PatternSearchConfig::new(vec![0.125], 0.05);
        let out = pattern_search(
            &unit_box(1),
            |x: &[f64]| Ok::<_, ()>(-(x[0] - 0.1).powi(2)),
            &cfg,
        )
        .unwrap()
        .unwrap();
        assert!((out.best_point[0] - 0.1).abs() < 1e-3);
        assert!(out.history.windows(2).all(|w| w[1].best_z >= w[0].best_z));
        assert!(out.history.last().unwrap().mesh < cfg.mesh_tolerance);
    }

    #[test]
    fn constant_objective_stays_put() {
        let cfg = PatternSearchConfig::new(vec![0.07, 0.2], 0.05);
        let out = pattern_search(&unit_box(2), |_: &[f64]| Ok::<_, ()>(3.0), &cfg)
            .unwrap()
            .unwrap();
        assert_eq!(out.best_point, vec![0.07, 0.2]);
        assert!(out.history.last().unwrap().mesh < 1e-4);
    }

    #[test]
    fn separable_quadratic_in_three_dimensions() {
        let target = [0.03, 0.17, 0.25];
        let f = |x: &[f64]| {
            Ok::<_, ()>(
                -x.iter()
                    .zip(&target)
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>(),
            )
        };
        let mut cfg = PatternSearchConfig::new(vec![0.125; 3], 0.05);
        cfg.parallel_poll = true;
        let out = pattern_search(&unit_box(3), f, &cfg).unwrap().unwrap();
        for (x, t) in out.best_point.iter().zip(&target) {
            assert!((x - t).abs() < 1e-3, "{x} vs {t}");
        }
        cfg.parallel_poll = false;
        let seq = pattern_search(&unit_box(3), f, &cfg).unwrap().unwrap();
        assert_eq!(seq, out);
    }

    #[test]
    fn budget_of_one_returns_seed() {
        let mut cfg = PatternSearchConfig::new(vec![0.2], 0.05);
        cfg.max_evaluations = 1;
        let out = pattern_search(&unit_box(1), |x: &[f64]| Ok::<_, ()>(-x[0]), &cfg)
            .unwrap()
            .unwrap();
        assert_eq!(out.best_point, vec![0.2]);
        assert_eq!(out.evaluations.len(), 1);
    }

    #[test]
    fn infeasible_start_is_rejected() {
        let cfg = PatternSearchConfig::new(vec![0.3], 0.05);
        let err = pattern_search(&unit_box(1), |_: &[f64]| Ok::<_, ()>(0.0), &cfg).unwrap_err();
        assert!(matches!(
            err,
            OptimizeError::Infeasible { coordinate: 0, .. }
        ));
    }

    #[test]
    fn objective_errors_propagate() {
        let cfg = PatternSearchConfig::new(vec![0.1], 0.05);
        let out = pattern_search(
            &unit_box(1),
            |x: &[f64]| if x[0] > 0.12 { Err("boom") } else { Ok(x[0]) },
            &cfg,
        )
        .unwrap();
        assert_eq!(out.unwrap_err(), "boom");
    }

    #[test]
    fn grid_scan_examples() {
        let cfg = GridScanConfig::default();
        let out = grid_scan(Bounds::default(), |p| Ok::<_, ()>(p * (1.0 - p)), &cfg)
            .unwrap()
            .unwrap();
        assert_eq!(out.curve.len(), 26);
        assert_eq!(out.best_p, 0.25);

        let flat = grid_scan(Bounds::default(), |_| Ok::<_, ()>(1.0), &cfg)
            .unwrap()
            .unwrap();
        assert_eq!(flat.best_p, 0.0);
    }

    #[test]
    fn grid_points_hit_both_bounds() {
        let pts = grid_points(Bounds::default(), 26);
        assert_eq!(pts[0], 0.0);
        assert_eq!(pts[25], 0.25);
        assert!((pts[10] - 0.1).abs() < 1e-15);
    }
}
