//! JSON run configuration.
//!
//! Everything except `n` has a default, so `{"n": 1}` is a complete config.

use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use clifford_l2::convergence::DEFAULT_BASE_COUNT;
use clifford_l2::field::{CliffordField, GridSpec};
use clifford_l2::solver::BoundVariant;
use clifford_l2::weight::WeightSpec;
use clifford_l2::Blade;
use serde::{Deserialize, Serialize};

/// Largest `n` accepted by any command.
pub const MAX_N: usize = 8;
/// Coarsest ladder grid on which the convergence bump clears the margin.
pub const MIN_BASE_COUNT: usize = 15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub n: usize,
    #[serde(default)]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub weight: WeightConfig,
    #[serde(default)]
    pub source: SourceConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Random draws per randomized check.
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Defaults to the `n = 1` corollary for `n = 1` and the general bound
    /// otherwise.
    #[serde(default)]
    pub bound_variant: Option<BoundVariant>,
    #[serde(default)]
    pub ladder: LadderConfig,
}

fn default_seed() -> u64 {
    7
}

fn default_trials() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub counts: Vec<usize>,
    #[serde(default = "default_margin")]
    pub margin: usize,
}

fn default_margin() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
#[derive(Default)]
pub enum WeightConfig {
    #[default]
    X0Squared,
    Anisotropic,
    Zero,
    /// `φ = x_1²`, which breaks the sign hypotheses.
    X1Squared,
    /// `φ = ½ xᵀ H x`.
    Quadratic {
        hessian: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceConfig {
    /// `amplitude · e_B` on every interior node.
    ConstantBlade {
        #[serde(default)]
        blade: Vec<usize>,
        #[serde(default = "default_amplitude")]
        amplitude: f64,
    },
    /// `amplitude · exp(−|x − c|² / 2σ²) · e_B` on interior nodes.
    GaussianBump {
        #[serde(default)]
        blade: Vec<usize>,
        #[serde(default = "default_amplitude")]
        amplitude: f64,
        /// Defaults to the centre of the box.
        #[serde(default)]
        center: Option<Vec<f64>>,
        #[serde(default = "default_width")]
        width: f64,
    },
}

fn default_amplitude() -> f64 {
    1.0
}

fn default_width() -> f64 {
    0.15
}

impl Default for SourceConfig {
    fn default() -> Self {
        SourceConfig::ConstantBlade {
            blade: Vec::new(),
            amplitude: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_solver_tol")]
    pub solver: f64,
    #[serde(default = "default_slack")]
    pub certificate_slack: f64,
}

fn default_solver_tol() -> f64 {
    1e-12
}

fn default_slack() -> f64 {
    1e-9
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            solver: default_solver_tol(),
            certificate_slack: default_slack(),
        }
    }
}

/// Refinement ladder: `base_count` points per axis on the coarsest rung,
/// spacing halved on each of the `rungs` rungs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderConfig {
    #[serde(default = "default_base_count")]
    pub base_count: usize,
    /// Defaults to [`RunConfig::ladder_rungs`].
    #[serde(default)]
    pub rungs: Option<usize>,
}

fn default_base_count() -> usize {
    DEFAULT_BASE_COUNT
}

impl Default for LadderConfig {
    fn default() -> Self {
        LadderConfig {
            base_count: default_base_count(),
            rungs: None,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: RunConfig = serde_json::from_str(text).context("malformed config")?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            (1..=MAX_N).contains(&self.n),
            "n = {} outside 1..={MAX_N}",
            self.n
        );
        if let Some(g) = &self.grid {
            let dim = self.n + 1;
            ensure!(
                g.lower.len() == dim && g.upper.len() == dim && g.counts.len() == dim,
                "grid needs {dim} entries in lower, upper and counts"
            );
        }
        let rungs = self.ladder_rungs();
        ensure!(rungs >= 2, "ladder needs at least 2 rungs, got {rungs}");
        ensure!(
            self.ladder.base_count >= MIN_BASE_COUNT,
            "ladder base_count must be at least {MIN_BASE_COUNT} so the test bump fits the interior"
        );
        ensure!(
            self.tolerances.solver > 0.0,
            "solver tolerance must be positive"
        );
        ensure!(
            self.tolerances.certificate_slack >= 0.0,
            "certificate slack must be nonnegative"
        );
        ensure!(self.trials > 0, "trials must be positive");
        self.weight_spec()?;
        self.source_blade()?;
        if let SourceConfig::GaussianBump { width, center, .. } = &self.source {
            ensure!(*width > 0.0, "gaussian width must be positive");
            if let Some(c) = center {
                ensure!(
                    c.len() == self.n + 1,
                    "gaussian center needs {} coordinates",
                    self.n + 1
                );
            }
        }
        Ok(())
    }

    /// Configured rung count. The default is 5 for `n = 1` and 4 above: at
    /// `n = 1` the fourth rung sits just short of the 1e-4 Weitzenböck
    /// tolerance, and at `n ≥ 2` a fifth rung exceeds the memory budget.
    pub fn ladder_rungs(&self) -> usize {
        self.ladder.rungs.unwrap_or(if self.n == 1 { 5 } else { 4 })
    }

    /// Configured grid, or `[0, 1]^{n+1}` with 17 points and margin 1.
    pub fn grid_spec(&self) -> Result<GridSpec> {
        let dim = self.n + 1;
        let spec = match &self.grid {
            Some(g) => GridSpec::new(g.lower.clone(), g.upper.clone(), g.counts.clone(), g.margin)?,
            None => GridSpec::new(vec![0.0; dim], vec![1.0; dim], vec![17; dim], 1)?,
        };
        Ok(spec)
    }

    pub fn weight_spec(&self) -> Result<WeightSpec> {
        let n = self.n;
        Ok(match &self.weight {
            WeightConfig::X0Squared => WeightSpec::x0_squared(n),
            WeightConfig::Anisotropic => WeightSpec::anisotropic(n),
            WeightConfig::Zero => WeightSpec::zero(n),
            WeightConfig::X1Squared => {
                let mut h = vec![vec![0.0; n + 1]; n + 1];
                h[1][1] = 2.0;
                WeightSpec::quadratic("x1_squared", h)
            }
            WeightConfig::Quadratic { hessian } => {
                let dim = n + 1;
                ensure!(
                    hessian.len() == dim && hessian.iter().all(|r| r.len() == dim),
                    "quadratic weight needs a {dim}x{dim} hessian"
                );
                for r in 0..dim {
                    for c in 0..dim {
                        ensure!(
                            hessian[r][c] == hessian[c][r],
                            "quadratic weight hessian must be symmetric"
                        );
                    }
                }
                WeightSpec::quadratic("quadratic", hessian.clone())
            }
        })
    }

    fn source_blade(&self) -> Result<Blade> {
        let gens = match &self.source {
            SourceConfig::ConstantBlade { blade, .. }
            | SourceConfig::GaussianBump { blade, .. } => blade,
        };
        if gens.windows(2).any(|w| w[0] >= w[1]) {
            bail!("source blade generators must be strictly ascending");
        }
        Ok(Blade::from_generators(gens, self.n)?)
    }

    /// The source field `f`, zeroed off the interior.
    pub fn source_field(&self, grid: &GridSpec) -> Result<CliffordField> {
        let blade = self.source_blade()?;
        let field = match &self.source {
            SourceConfig::ConstantBlade { amplitude, .. } => {
                let a = *amplitude;
                CliffordField::scalar_times_blade(grid, self.n, blade, |_| a)?
            }
            SourceConfig::GaussianBump {
                amplitude,
                center,
                width,
                ..
            } => {
                let c: Vec<f64> = match center {
                    Some(c) => c.clone(),
                    None => (0..grid.dim())
                        .map(|k| 0.5 * (grid.lower()[k] + grid.upper()[k]))
                        .collect(),
                };
                let (a, s2) = (*amplitude, 2.0 * width * width);
                CliffordField::scalar_times_blade(grid, self.n, blade, |x| {
                    let r2: f64 = x.iter().zip(&c).map(|(p, q)| (p - q) * (p - q)).sum();
                    a * (-r2 / s2).exp()
                })?
            }
        };
        Ok(field.restrict_to_interior())
    }

    pub fn bound_variant(&self) -> BoundVariant {
        self.bound_variant.unwrap_or(if self.n == 1 {
            BoundVariant::N1Corollary
        } else {
            BoundVariant::Theorem2
        })
    }
}
