//! Track-access charge schemes and their flat decision-vector encoding.
//!
//! A scheme fixes the fraction `p` of the rail fixed cost that is charged on
//! each path. The hourly intensity on path `r` is `p · c_ell / tau_ref(r)`, so
//! at the reference travel time every ton-km pays `p · c_ell` regardless of the
//! route.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::Path;

/// Regulatory cap on the charged fraction of fixed costs.
pub const DEFAULT_P_MAX: f64 = 0.25;

#[derive(Debug, Error, PartialEq)]
pub enum PricingError {
    #[error("time {t} h outside the horizon [0, {horizon}]")]
    OutsideHorizon { t: f64, horizon: f64 },
    #[error("value {value} for {coordinate} outside bounds [{lower}, {upper}]")]
    OutOfBounds {
        coordinate: String,
        value: f64,
        lower: f64,
        upper: f64,
    },
    #[error("no charge defined for path `{0}`")]
    UnknownPath(String),
    #[error("decision vector has {got} values, layout expects {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("time grid is invalid: {0}")]
    InvalidGrid(String),
    #[error("invalid bounds [{0}, {1}]")]
    InvalidBounds(f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
}

impl Default for Bounds {
    fn default() -> Self {
        Self {
            lower: 0.0,
            upper: DEFAULT_P_MAX,
        }
    }
}

impl Bounds {
    fn check(&self, coordinate: impl FnOnce() -> String, value: f64) -> Result<(), PricingError> {
        if value >= self.lower && value <= self.upper {
            Ok(())
        } else {
            Err(PricingError::OutOfBounds {
                coordinate: coordinate(),
                value,
                lower: self.lower,
                upper: self.upper,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SchemeKind {
    /// One fraction for every path and every hour.
    Proportional { p: f64 },
    /// One fraction per path, keyed by path id.
    PathBased { p: BTreeMap<String, f64> },
    /// Per-path fractions on a shared grid `0 = d_0 < ... < d_k = T_max`;
    /// `p[path][j]` applies on `[d_j, d_{j+1})`, the last interval closed.
    TimeVarying {
        grid: Vec<f64>,
        p: BTreeMap<String, Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TacScheme {
    #[serde(flatten)]
    pub kind: SchemeKind,
    #[serde(default)]
    pub bounds: Bounds,
}

impl TacScheme {
    pub fn proportional(p: f64) -> Self {
        Self {
            kind: SchemeKind::Proportional { p },
            bounds: Bounds::default(),
        }
    }

    pub fn path_based<I, S>(values: I) -> Self
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        Self {
            kind: SchemeKind::PathBased {
                p: values.into_iter().map(|(k, v)| (k.into(), v)).collect(),
            },
            bounds: Bounds::default(),
        }
    }

    /// Zero charge on every path.
    pub fn free() -> Self {
        Self::proportional(0.0)
    }

    /// Checks bounds, grid shape and per-path vector lengths.
    pub fn validate(&self) -> Result<(), PricingError> {
        let b = self.bounds;
        if !(b.lower <= b.upper) {
            return Err(PricingError::InvalidBounds(b.lower, b.upper));
        }
        match &self.kind {
            SchemeKind::Proportional { p } => b.check(|| "p".into(), *p),
            SchemeKind::PathBased { p } => {
                p.iter().try_for_each(|(k, v)| b.check(|| k.clone(), *v))
            }
            SchemeKind::TimeVarying { grid, p } => {
                validate_grid(grid)?;
                for (k, vals) in p {
                    if vals.len() != grid.len() - 1 {
                        return Err(PricingError::InvalidGrid(format!(
                            "path `{k}` has {} values for {} intervals",
                            vals.len(),
                            grid.len() - 1
                        )));
                    }
                    for (j, v) in vals.iter().enumerate() {
                        b.check(|| format!("{k}[{j}]"), *v)?;
                    }
                }
                Ok(())
            }
        }
    }

    /// Fraction of fixed cost charged on `path_id` at time `t`.
    pub fn p_at(&self, path_id: &str, t: f64, horizon: f64) -> Result<f64, PricingError> {
        if !(t >= 0.0 && t <= horizon) {
            return Err(PricingError::OutsideHorizon { t, horizon });
        }
        match &self.kind {
            SchemeKind::Proportional { p } => Ok(*p),
            SchemeKind::PathBased { p } => p
                .get(path_id)
                .copied()
                .ok_or_else(|| PricingError::UnknownPath(path_id.to_string())),
            SchemeKind::TimeVarying { grid, p } => {
                let vals = p
                    .get(path_id)
                    .ok_or_else(|| PricingError::UnknownPath(path_id.to_string()))?;
                if t > *grid.last().unwrap() {
                    return Err(PricingError::OutsideHorizon {
                        t,
                        horizon: *grid.last().unwrap(),
                    });
                }
                Ok(vals[interval_index(grid, t)])
            }
        }
    }

    /// Access-charge intensity on `path` at time `t`, in €/(t·km·h).
    pub fn lambda_at(
        &self,
        path: &Path,
        t: f64,
        fixed_cost_per_tkm: f64,
        horizon: f64,
    ) -> Result<f64, PricingError> {
        let p = self.p_at(&path.id, t, horizon)?;
        Ok(p * fixed_cost_per_tkm / path.reference_time_h)
    }
}

fn validate_grid(grid: &[f64]) -> Result<(), PricingError> {
    if grid.len() < 2 {
        return Err(PricingError::InvalidGrid(
            "needs at least two points".into(),
        ));
    }
    if grid[0] != 0.0 {
        return Err(PricingError::InvalidGrid(format!(
            "grid starts at {}, expected 0",
            grid[0]
        )));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(PricingError::InvalidGrid(
            "grid must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Index `j` with `grid[j] <= t < grid[j+1]`, clamped to the last interval.
fn interval_index(grid: &[f64], t: f64) -> usize {
    let k = grid.len() - 1;
    grid[1..k].partition_point(|&d| d <= t)
}

/// How decision-vector coordinates map back onto a scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VectorLayout {
    Proportional,
    /// One coordinate per path, in the listed order.
    PathBased {
        paths: Vec<String>,
    },
    /// Path-major: coordinate `i * (grid.len() - 1) + j` is path `i`, interval `j`.
    TimeVarying {
        paths: Vec<String>,
        grid: Vec<f64>,
    },
}

impl VectorLayout {
    pub fn dimension(&self) -> usize {
        match self {
            Self::Proportional => 1,
            Self::PathBased { paths } => paths.len(),
            Self::TimeVarying { paths, grid } => paths.len() * (grid.len().saturating_sub(1)),
        }
    }

    /// Human-readable name of each coordinate, for optimizer logs.
    pub fn coordinate_names(&self) -> Vec<String> {
        match self {
            Self::Proportional => vec!["p".into()],
            Self::PathBased { paths } => paths.iter().map(|p| format!("p[{p}]")).collect(),
            Self::TimeVarying { paths, grid } => paths
                .iter()
                .flat_map(|p| (0..grid.len() - 1).map(move |j| format!("p[{p}][{j}]")))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionVector {
    pub values: Vec<f64>,
    pub layout: VectorLayout,
    pub bounds: Bounds,
}

/// Flattens a scheme; path order is the sorted path-id order.
pub fn to_vector(scheme: &TacScheme) -> DecisionVector {
    let (values, layout) = match &scheme.kind {
        SchemeKind::Proportional { p } => (vec![*p], VectorLayout::Proportional),
        SchemeKind::PathBased { p } => (
            p.values().copied().collect(),
            VectorLayout::PathBased {
                paths: p.keys().cloned().collect(),
            },
        ),
        SchemeKind::TimeVarying { grid, p } => (
            p.values().flatten().copied().collect(),
            VectorLayout::TimeVarying {
                paths: p.keys().cloned().collect(),
                grid: grid.clone(),
            },
        ),
    };
    DecisionVector {
        values,
        layout,
        bounds: scheme.bounds,
    }
}

/// Rebuilds a scheme from coordinates laid out as `layout`.
pub fn from_vector(
    layout: &VectorLayout,
    bounds: Bounds,
    values: &[f64],
) -> Result<TacScheme, PricingError> {
    if values.len() != layout.dimension() {
        return Err(PricingError::LengthMismatch {
            expected: layout.dimension(),
            got: values.len(),
        });
    }
    let kind = match layout {
        VectorLayout::Proportional => SchemeKind::Proportional { p: values[0] },
        VectorLayout::PathBased { paths } => SchemeKind::PathBased {
            p: paths.iter().cloned().zip(values.iter().copied()).collect(),
        },
        VectorLayout::TimeVarying { paths, grid } => {
            let k = grid.len() - 1;
            SchemeKind::TimeVarying {
                grid: grid.clone(),
                p: paths
                    .iter()
                    .cloned()
                    .zip(values.chunks(k).map(<[f64]>::to_vec))
                    .collect(),
            }
        }
    };
    let scheme = TacScheme { kind, bounds };
    scheme.validate()?;
    Ok(scheme)
}
