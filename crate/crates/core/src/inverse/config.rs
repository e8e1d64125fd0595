use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mesh::BoxRegion;

use super::problem::{example, Problem, Truth};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    /// Homogeneous Dirichlet state, no regularization.
    #[serde(rename = "lip", alias = "lipschitz")]
    Lipschitz,
    /// Unconstrained state with gradient data and penalties.
    #[serde(rename = "hol", alias = "holder")]
    Holder,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Lipschitz => "lip",
            Mode::Holder => "hol",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lip" | "lipschitz" => Ok(Mode::Lipschitz),
            "hol" | "holder" => Ok(Mode::Holder),
            _ => Err(invalid(format!("unknown mode `{s}`; expected lip or hol"))),
        }
    }
}

/// One experiment. Mesh parameters are denominators: `h = 20` means a
/// spatial mesh size of 1/20, `tau = 30` a time step of 1/30.
///
/// Config file keys (TOML) match the field names; all are optional.
/// `omega`, `omega0` list `[x0, x1]` in 1D and `[x0, x1, y0, y1]` in 2D.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemConfig {
    pub example: u8,
    pub h: usize,
    pub tau: usize,
    pub mode: Mode,
    pub gamma_f: f64,
    pub gamma_u: f64,
    pub delta: f64,
    pub seed: u64,
    /// Error region in the mode without boundary data (default `ω`).
    pub omega0: Option<Vec<f64>>,
    /// Observation region override.
    pub omega: Option<Vec<f64>>,
    pub t0: Option<f64>,
    pub zeta: Option<f64>,
    /// Refinement of the forward solve used to synthesize data.
    pub fine_factor: usize,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self {
            example: 1,
            h: 10,
            tau: 10,
            mode: Mode::Lipschitz,
            gamma_f: 0.0,
            gamma_u: 0.0,
            delta: 0.0,
            seed: 0,
            omega0: None,
            omega: None,
            t0: None,
            zeta: None,
            fine_factor: 16,
        }
    }
}

pub fn parse_region(values: &[f64], dim: usize) -> Result<BoxRegion> {
    let r = match (dim, values) {
        (1, [a, b]) => BoxRegion::interval(*a, *b),
        (2, [x0, x1, y0, y1]) => BoxRegion::new([*x0, *y0], [*x1, *y1]),
        _ => {
            return Err(invalid(format!(
                "a region in {dim}D needs {} numbers, got {}",
                2 * dim,
                values.len()
            )))
        }
    };
    if (0..dim).any(|k| !(r.lo[k] < r.hi[k])) {
        return Err(invalid(format!("empty region {values:?}")));
    }
    Ok(r)
}

fn inside(inner: &BoxRegion, outer: &BoxRegion, dim: usize) -> bool {
    (0..dim).all(|k| inner.lo[k] >= outer.lo[k] && inner.hi[k] <= outer.hi[k])
}

impl ProblemConfig {
    pub fn for_example(example: u8) -> Self {
        Self { example, ..Self::default() }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&s)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.h == 0 || self.tau == 0 {
            return Err(invalid("h and tau denominators must be positive"));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(invalid(format!("delta must be nonnegative, got {}", self.delta)));
        }
        if !(self.gamma_f >= 0.0 && self.gamma_u >= 0.0) {
            return Err(invalid("regularization parameters must be nonnegative"));
        }
        if self.fine_factor < 4 {
            return Err(invalid(format!("fine_factor must be at least 4, got {}", self.fine_factor)));
        }
        if self.mode == Mode::Lipschitz && (self.gamma_f != 0.0 || self.gamma_u != 0.0) {
            return Err(invalid("regularization parameters apply only in hol mode"));
        }
        let problem = self.problem()?;
        self.n_intervals(&problem)?;
        self.error_region(&problem)?;
        Ok(())
    }

    pub fn h_size(&self) -> f64 {
        1.0 / self.h as f64
    }

    pub fn tau_size(&self) -> f64 {
        1.0 / self.tau as f64
    }

    /// The example with the geometric overrides applied.
    pub fn problem(&self) -> Result<Problem> {
        let mut p = example(self.example)?;
        if let Some(t0) = self.t0 {
            p.t0 = t0;
        }
        if let Some(z) = self.zeta {
            if !(z > 0.0) {
                return Err(invalid("zeta must be positive"));
            }
            p.zeta = z;
        }
        if let Some(o) = &self.omega {
            let r = parse_region(o, p.dim)?;
            if !inside(&r, &p.domain, p.dim) {
                return Err(invalid("omega must lie inside the domain"));
            }
            p.omega = r;
        }
        if let Truth::Forward { fine_factor, start, .. } = &mut p.truth {
            *fine_factor = self.fine_factor;
            if p.t0 - p.zeta < *start {
                return Err(invalid("the observation window starts before the forward solve"));
            }
        }
        Ok(p)
    }

    /// Number of time steps: `|I| / τ`, which must be an integer.
    pub fn n_intervals(&self, problem: &Problem) -> Result<usize> {
        let n = 2.0 * problem.zeta * self.tau as f64;
        let k = n.round();
        if k < 1.0 || (n - k).abs() > 1e-9 * n.max(1.0) {
            return Err(invalid(format!(
                "tau = 1/{} does not divide the window of length {}",
                self.tau,
                2.0 * problem.zeta
            )));
        }
        Ok(k as usize)
    }

    /// Region on which the source error is measured.
    pub fn error_region(&self, problem: &Problem) -> Result<Option<BoxRegion>> {
        match self.mode {
            Mode::Lipschitz => Ok(None),
            Mode::Holder => match &self.omega0 {
                None => Ok(Some(problem.omega)),
                Some(v) => {
                    let r = parse_region(v, problem.dim)?;
                    let strict = (0..problem.dim)
                        .all(|k| r.lo[k] > problem.domain.lo[k] && r.hi[k] < problem.domain.hi[k]);
                    if !strict {
                        return Err(invalid("omega0 must be compactly contained in the domain"));
                    }
                    Ok(Some(r))
                }
            },
        }
    }
}
