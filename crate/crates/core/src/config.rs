//! Problem configuration files: TOML with `[nfunction]`, `[coefficient]`,
//! `[domain]`, `[solver]` (and an optional `[sigma]`) section.

use std::path::Path;
use std::sync::Arc;

use serde::Deserialize;

use crate::coeff::{builtin_problem, Coefficient};
use crate::error::{Error, Result};
use crate::fields::{CellFactor, MultiscaleField, XFactor};
use crate::mesh::{Field, Mesh};
use crate::nfunc::NFunction;
use crate::scalar::Real;
use crate::trig::TrigPoly;

/// Mesh-size caps of the desk-scale envelope, enforced at config validation.
pub const MAX_N_1D: usize = 16384;
pub const MAX_N_2D: usize = 512;

#[derive(Debug, Clone, Deserialize)]
pub struct NFunctionSpec {
    pub kind: String,
    #[serde(default)]
    pub p: Option<f64>,
    #[serde(default)]
    pub coeff: Option<f64>,
}

impl NFunctionSpec {
    pub fn build<R: Real>(&self) -> Result<NFunction<R>> {
        match self.kind.as_str() {
            "power" => {
                let p = self
                    .p
                    .ok_or_else(|| Error::Config("power kind needs p".into()))?;
                if p <= 1.0 {
                    return Err(Error::Config("power kind needs p > 1".into()));
                }
                Ok(match self.coeff {
                    Some(c) if c > 0.0 => NFunction::power_with_coeff(R::of(p), R::of(c)),
                    Some(_) => return Err(Error::Config("power coeff must be positive".into())),
                    None => NFunction::power(R::of(p)),
                })
            }
            "power_log" => {
                let p = self.p.unwrap_or(1.0);
                if p < 1.0 {
                    return Err(Error::Config("power_log kind needs p >= 1".into()));
                }
                Ok(NFunction::power_log(R::of(p)))
            }
            "exp_minus_one" => Ok(NFunction::exp_minus_one()),
            other => Err(Error::Config(format!("unknown nfunction kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct CoefficientSpec {
    pub name: String,
    #[serde(default)]
    pub p: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct DomainSpec {
    pub dim: usize,
    #[serde(default)]
    pub lo: Option<Vec<f64>>,
    #[serde(default)]
    pub hi: Option<Vec<f64>>,
    /// macro mesh cells per axis
    pub n: usize,
    /// cell mesh cells per axis
    pub cell_n: usize,
}

#[derive(Debug, Clone, Deserialize)]
pub struct SolverSpec {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_eps_list")]
    pub eps_list: Vec<f64>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_rhs")]
    pub rhs: String,
    /// state grid of the flux table
    #[serde(default)]
    pub r_grid: Option<Vec<f64>>,
    #[serde(default = "default_xi_max")]
    pub xi_max: f64,
    #[serde(default = "default_xi_nodes")]
    pub xi_nodes: usize,
}

fn default_tol() -> f64 {
    1e-10
}
fn default_eps_list() -> Vec<f64> {
    vec![0.25, 0.125, 0.0625, 0.03125]
}
fn default_seed() -> u64 {
    42
}
fn default_samples() -> usize {
    10_000
}
fn default_rhs() -> String {
    "one".into()
}
fn default_xi_max() -> f64 {
    1.0
}
fn default_xi_nodes() -> usize {
    9
}

#[derive(Debug, Clone, Deserialize)]
pub struct SigmaSpec {
    #[serde(default = "default_sigma_fn")]
    pub u0: String,
    #[serde(default = "default_sigma_fn")]
    pub f: String,
}

fn default_sigma_fn() -> String {
    "sin_y".into()
}

impl Default for SigmaSpec {
    fn default() -> Self {
        SigmaSpec {
            u0: default_sigma_fn(),
            f: default_sigma_fn(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct ProblemConfig {
    pub nfunction: Option<NFunctionSpec>,
    pub coefficient: CoefficientSpec,
    pub domain: DomainSpec,
    #[serde(default = "default_solver_spec")]
    pub solver: SolverSpec,
    #[serde(default)]
    pub sigma: SigmaSpec,
}

fn default_solver_spec() -> SolverSpec {
    SolverSpec {
        tol: default_tol(),
        eps_list: default_eps_list(),
        seed: default_seed(),
        samples: default_samples(),
        rhs: default_rhs(),
        r_grid: None,
        xi_max: default_xi_max(),
        xi_nodes: default_xi_nodes(),
    }
}

impl ProblemConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ProblemConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("toml parse: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.domain;
        if d.dim != 1 && d.dim != 2 {
            return Err(Error::Config("domain dim must be 1 or 2".into()));
        }
        let cap = if d.dim == 1 { MAX_N_1D } else { MAX_N_2D };
        if d.n < 2 || d.n > cap {
            return Err(Error::Config(format!(
                "macro mesh n = {} outside [2, {cap}]",
                d.n
            )));
        }
        if d.cell_n < 2 || d.cell_n > cap {
            return Err(Error::Config(format!(
                "cell mesh n = {} outside [2, {cap}]",
                d.cell_n
            )));
        }
        let eps = &self.solver.eps_list;
        if eps.is_empty() {
            return Err(Error::Config("eps_list must be nonempty".into()));
        }
        for w in eps.windows(2) {
            if w[1] >= w[0] {
                return Err(Error::Config("eps_list must be strictly decreasing".into()));
            }
        }
        for &e in eps {
            if !(e > 0.0 && e < 1.0) {
                return Err(Error::Config("eps values must lie in (0,1)".into()));
            }
            // the direct-mode resolution rule must be satisfiable
            let need = (4.0 / (e * e)).ceil() as usize;
            if need > cap {
                return Err(Error::Config(format!(
                    "eps = {e} needs {need} cells > envelope cap {cap}"
                )));
            }
            if d.dim == 2 && e < 0.125 - 1e-12 {
                return Err(Error::Config(format!(
                    "2-D studies are limited to eps >= 1/8, got {e}"
                )));
            }
        }
        if self.solver.xi_nodes < 1 {
            return Err(Error::Config("xi_nodes must be >= 1".into()));
        }
        Ok(())
    }

    pub fn build_coefficient<R: Real>(&self) -> Result<Coefficient<R>> {
        let mut coeff =
            builtin_problem::<R>(&self.coefficient.name, self.coefficient.p.map(R::of))?;
        if coeff.dim != self.domain.dim {
            return Err(Error::Config(format!(
                "problem `{}` is {}-dimensional but domain dim = {}",
                self.coefficient.name, coeff.dim, self.domain.dim
            )));
        }
        if let Some(spec) = &self.nfunction {
            let phi = spec.build::<R>()?;
            coeff.theta = phi.coercivity_constant(coeff.h_min)?;
            coeff.psi = phi.clone();
            coeff.phi = phi;
        }
        Ok(coeff)
    }

    pub fn macro_mesh<R: Real>(&self) -> Result<Arc<Mesh<R>>> {
        let d = &self.domain;
        let lo = coords_or(&d.lo, 0.0, d.dim)?;
        let hi = coords_or(&d.hi, 1.0, d.dim)?;
        Mesh::new(d.dim, lo, hi, [d.n, if d.dim == 2 { d.n } else { 1 }], false)
    }

    pub fn cell_mesh<R: Real>(&self) -> Result<Arc<Mesh<R>>> {
        Mesh::unit_cell(self.domain.dim, self.domain.cell_n)
    }

    pub fn fine_mesh<R: Real>(&self, eps: f64) -> Result<Arc<Mesh<R>>> {
        let d = &self.domain;
        let lo = coords_or(&d.lo, 0.0, d.dim)?;
        let hi = coords_or(&d.hi, 1.0, d.dim)?;
        let n = self.fine_cells(eps);
        Mesh::new(d.dim, lo, hi, [n, if d.dim == 2 { n } else { 1 }], false)
    }

    /// Fine-mesh cells for a direct solve at `eps`: well past the spacing
    /// rule in 1-D so the oscillating gradient is faithfully resolved, the
    /// minimum admissible resolution in 2-D, both inside the envelope caps.
    pub fn fine_cells(&self, eps: f64) -> usize {
        if self.domain.dim == 1 {
            let need = (16.0 / (eps * eps)).ceil() as usize;
            need.clamp(2048, MAX_N_1D)
        } else {
            let need = (4.0 / (eps * eps)).ceil() as usize;
            need.clamp(2, MAX_N_2D)
        }
    }

    pub fn rhs_field<R: Real>(&self, mesh: &Arc<Mesh<R>>) -> Result<Field<R>> {
        build_rhs(&self.solver.rhs, mesh)
    }

    pub fn sigma_field<R: Real>(&self, which: &str) -> Result<MultiscaleField<R>> {
        named_multiscale(which, self.domain.dim)
    }
}

fn coords_or<R: Real>(v: &Option<Vec<f64>>, default: f64, dim: usize) -> Result<[R; 2]> {
    let mut out = [R::of(default), R::of(default)];
    if let Some(v) = v {
        if v.len() != dim {
            return Err(Error::Config("lo/hi must have one entry per axis".into()));
        }
        for (a, &x) in v.iter().enumerate() {
            out[a] = R::of(x);
        }
    }
    Ok(out)
}

/// Right-hand sides declared by name: `one`, `zero`, `cos3x`, or a numeric
/// constant.
pub fn build_rhs<R: Real>(name: &str, mesh: &Arc<Mesh<R>>) -> Result<Field<R>> {
    match name {
        "one" => Ok(Field::constant(mesh.clone(), R::one())),
        "zero" => Ok(Field::zeros(mesh.clone())),
        "cos3x" => Ok(Field::from_fn(mesh.clone(), |x| (R::of(3.0) * x[0]).cos())),
        other => match other.parse::<f64>() {
            Ok(v) => Ok(Field::constant(mesh.clone(), R::of(v))),
            Err(_) => Err(Error::Config(format!("unknown rhs `{other}`"))),
        },
    }
}

/// The built-in multiscale test dictionary for the convergence tester.
pub fn named_multiscale<R: Real>(name: &str, dim: usize) -> Result<MultiscaleField<R>> {
    let tau = crate::scalar::two_pi::<R>();
    let sin_axis0 = || TrigPoly::<R>::line(R::zero(), &[], &[(tau, R::one())]);
    match name {
        "one" => Ok(MultiscaleField::constant(dim, R::one())),
        "sin_y" => Ok(MultiscaleField::separable(
            dim,
            XFactor::One,
            CellFactor::Trig(sin_axis0()),
            CellFactor::One,
        )),
        "sin_z" => Ok(MultiscaleField::separable(
            dim,
            XFactor::One,
            CellFactor::One,
            CellFactor::Trig(sin_axis0()),
        )),
        "sin_y_sin_z" => Ok(MultiscaleField::separable(
            dim,
            XFactor::Trig(TrigPoly::constant(dim, R::one())),
            CellFactor::Trig(sin_axis0()),
            CellFactor::Trig(sin_axis0()),
        )),
        "x_sin_y" => Ok(MultiscaleField::separable(
            dim,
            XFactor::Linear {
                grad: [R::one(), R::zero()],
                offset: R::zero(),
            },
            CellFactor::Trig(sin_axis0()),
            CellFactor::One,
        )),
        other => Err(Error::Config(format!("unknown sigma function `{other}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LIN1D: &str = r#"
nfunction = { kind = "power", p = 2.0 }

[coefficient]
name = "lin1d"

[domain]
dim = 1
n = 1024
cell_n = 256

[solver]
eps_list = [0.25, 0.125]
"#;

    #[test]
    fn parses_inline_nfunction_table() {
        let cfg = ProblemConfig::parse(LIN1D).unwrap();
        assert_eq!(cfg.coefficient.name, "lin1d");
        let coeff = cfg.build_coefficient::<f64>().unwrap();
        assert_eq!(coeff.dim, 1);
        assert!((coeff.theta - 0.5).abs() < 1e-12);
        let mesh = cfg.macro_mesh::<f64>().unwrap();
        assert_eq!(mesh.cells[0], 1024);
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = LIN1D.replace("n = 1024", "n = 100000");
        assert!(ProblemConfig::parse(&bad).is_err());
        let bad = LIN1D.replace("[0.25, 0.125]", "[0.125, 0.25]");
        assert!(ProblemConfig::parse(&bad).is_err());
        let bad = LIN1D.replace("\"lin1d\"", "\"nope\"");
        let cfg = ProblemConfig::parse(&bad).unwrap();
        assert!(matches!(
            cfg.build_coefficient::<f64>(),
            Err(Error::Catalog(_))
        ));
        // 2-D envelope: eps below 1/8 would need more than 512 cells
        let bad2d = r#"
[coefficient]
name = "plap2d"

[domain]
dim = 2
n = 64
cell_n = 64

[solver]
eps_list = [0.0625]
"#;
        assert!(ProblemConfig::parse(bad2d).is_err());
    }

    #[test]
    fn named_rhs_and_sigma_functions() {
        let mesh = Mesh::<f64>::interval(0.0, 1.0, 8).unwrap();
        assert!(build_rhs("one", &mesh).is_ok());
        assert!(build_rhs("0.5", &mesh).is_ok());
        assert!(build_rhs("nope", &mesh).is_err());
        assert!(named_multiscale::<f64>("sin_y", 1).is_ok());
        assert!(named_multiscale::<f64>("bad", 1).is_err());
    }
}
