//! JSON system configuration.
//!
//! ```json
//! {"type": "fixture", "name": "E1", "m": 2}
//! {"type": "fixture", "name": "E2", "sample_points": [0.2, 0.5, 1.0]}
//! {"type": "finite", "p": 2, "maps": [[1,1],[1,1]], "kernel": [[1,1],[1,1]],
//!  "sample_points": [0, 1]}
//! ```
//!
//! Numbers are IEEE-754 doubles. For finite systems `maps[i][x]` is the
//! image of point `x` under the `i`-th branch (0-based indices in
//! `[0, p)`), and `sample_points` are point indices.

use super::{AnyPoint, AnySystem, FiniteSystem, FixtureE1, FixtureE2};
use crate::error::{Error, Result};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub enum FixtureConfig {
    E1,
    E2,
}

/// On-disk system document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum SystemConfig {
    Fixture {
        name: FixtureConfig,
        #[serde(skip_serializing_if = "Option::is_none")]
        m: Option<usize>,
        #[serde(skip_serializing_if = "Option::is_none")]
        sample_points: Option<Vec<f64>>,
    },
    Finite {
        p: usize,
        maps: Vec<Vec<usize>>,
        kernel: Vec<Vec<f64>>,
        #[serde(skip_serializing_if = "Option::is_none")]
        sample_points: Option<Vec<f64>>,
    },
}

/// A validated system plus its sample points and any loader warnings.
#[derive(Debug, Clone)]
pub struct LoadedSystem {
    pub system: AnySystem,
    pub sample: Vec<AnyPoint>,
    pub warnings: Vec<String>,
}

fn coord_sample(raw: Option<Vec<f64>>, default: &[f64]) -> Result<Vec<AnyPoint>> {
    let values = raw.unwrap_or_else(|| default.to_vec());
    values
        .into_iter()
        .map(|x| {
            if (0.0..=1.0).contains(&x) {
                Ok(AnyPoint::Coord(x))
            } else {
                Err(Error::Config(format!("sample point {x} outside [0,1]")))
            }
        })
        .collect()
}

fn index_sample(raw: Option<Vec<f64>>, p: usize) -> Result<Vec<AnyPoint>> {
    match raw {
        None => Ok((0..p).map(AnyPoint::Index).collect()),
        Some(values) => values
            .into_iter()
            .map(|x| {
                let i = x as usize;
                if x.fract() != 0.0 || x < 0.0 || i >= p {
                    Err(Error::Config(format!(
                        "sample point {x} is not a point index in [0, {p})"
                    )))
                } else {
                    Ok(AnyPoint::Index(i))
                }
            })
            .collect(),
    }
}

/// Builds a validated system from its configuration document.
pub fn load_system(config: SystemConfig) -> Result<LoadedSystem> {
    match config {
        SystemConfig::Fixture {
            name: FixtureConfig::E1,
            m,
            sample_points,
        } => {
            let system = FixtureE1::new(m.unwrap_or(2))?;
            let mut warnings = Vec::new();
            if sample_points.map_or(false, |s| s.len() > 1) {
                warnings.push("fixture E1 has a single point; sample collapsed".into());
            }
            Ok(LoadedSystem {
                system: AnySystem::E1(system),
                sample: vec![AnyPoint::Index(0)],
                warnings,
            })
        }
        SystemConfig::Fixture {
            name: FixtureConfig::E2,
            m,
            sample_points,
        } => {
            if let Some(m) = m {
                if m != 2 {
                    return Err(Error::Config(format!("fixture E2 has m = 2, got {m}")));
                }
            }
            Ok(LoadedSystem {
                system: AnySystem::E2(FixtureE2::new()),
                sample: coord_sample(sample_points, &[0.2, 0.5, 0.8])?,
                warnings: Vec::new(),
            })
        }
        SystemConfig::Finite {
            p,
            maps,
            kernel,
            sample_points,
        } => {
            if kernel.len() != p || kernel.iter().any(|row| row.len() != p) {
                return Err(Error::Config(format!("kernel must be {p}x{p}")));
            }
            let entries = DMatrix::from_fn(p, p, |i, j| Complex64::new(kernel[i][j], 0.0));
            let system = FiniteSystem::new(p, maps, entries)?;
            let sample = index_sample(sample_points, p)?;
            Ok(LoadedSystem {
                system: AnySystem::Finite(system),
                sample,
                warnings: vec![
                    "finite reachable orbits force trivial completions wherever the diagonal \
                     tower stays bounded; completion-style commands are mainly informative on \
                     analytic fixtures"
                        .into(),
                ],
            })
        }
    }
}
