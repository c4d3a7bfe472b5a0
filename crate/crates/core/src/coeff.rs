//! Problem definitions: the flux `a(y, z, zeta, lambda)`, its structure
//! class, the built-in catalog, and the seeded numeric validator for the
//! solver preconditions.

use crate::error::{Error, Result};
use crate::halton::HaltonStream;
use crate::nfunc::{dyadic_grid, NFunction};
use crate::scalar::Real;
use crate::trig::{Mode, TrigPoly};

/// Scalar profile of a cell variable.
#[derive(Debug, Clone)]
pub enum Profile<R: Real> {
    One,
    Const(R),
    Trig(TrigPoly<R>),
    /// `limit + amp * exp(-|x|^2)`: oscillation dying at infinity. The cell
    /// representative (what the nested cell problems see) is the limit value,
    /// since the mean structure of this class lives at infinity; the decaying
    /// core is felt only through finite-scale trace sampling.
    BInf { limit: R, amp: R },
}

impl<R: Real> Profile<R> {
    pub fn eval(&self, p: [R; 2], dim: usize) -> R {
        match self {
            Profile::One => R::one(),
            Profile::Const(c) => *c,
            Profile::Trig(t) => t.eval(p),
            Profile::BInf { limit, amp } => {
                let mut r2 = R::zero();
                for a in 0..dim {
                    r2 += p[a] * p[a];
                }
                *limit + *amp * (-r2).exp()
            }
        }
    }

    /// Value seen by the cell problems.
    pub fn cell_eval(&self, p: [R; 2], dim: usize) -> R {
        match self {
            Profile::BInf { limit, .. } => *limit,
            other => other.eval(p, dim),
        }
    }

    fn two_plus_sin_2pi(dim_axis: usize) -> Profile<R> {
        let tau = crate::scalar::two_pi::<R>();
        let mut omega = [R::zero(); 2];
        omega[dim_axis] = tau;
        Profile::Trig(TrigPoly::new(
            2,
            vec![
                Mode {
                    omega: [R::zero(); 2],
                    amp_cos: R::of(2.0),
                    amp_sin: R::zero(),
                },
                Mode {
                    omega,
                    amp_cos: R::zero(),
                    amp_sin: R::one(),
                },
            ],
        ))
    }
}

/// Monotone decreasing degeneracy map `h: [0, inf) -> (0, 1)`.
#[derive(Debug, Clone)]
pub enum HFn<R: Real> {
    Const(R),
    /// `base + amp / (1 + t)`
    RationalDecay { base: R, amp: R },
}

impl<R: Real> HFn<R> {
    pub fn eval(&self, t: R) -> R {
        match self {
            HFn::Const(v) => *v,
            HFn::RationalDecay { base, amp } => *base + *amp / (R::one() + t),
        }
    }

    /// Infimum over `[0, inf)` (the declared minimum).
    pub fn min_value(&self) -> R {
        match self {
            HFn::Const(v) => *v,
            HFn::RationalDecay { base, .. } => *base,
        }
    }
}

/// Declared expression family of the flux.
#[derive(Debug, Clone)]
pub enum FluxFamily<R: Real> {
    /// `a = cy(y) cz(z) lambda`
    Linear { cy: Profile<R>, cz: Profile<R> },
    /// `a = cy(y) cz(z) |lambda|^(p-2) lambda`
    PLap {
        cy: Profile<R>,
        cz: Profile<R>,
        p: R,
    },
    /// `a = Fc^{-1}(F(h(|zeta|))) phi(|lambda|) lambda/|lambda|`
    Degenerate,
    /// `a = c0 lambda`
    Scaled { c0: R },
    /// `a = -lambda`: planted counterexample violating monotonicity.
    Negated,
}

/// Structure class of the coefficient in the two cell variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StructureClass {
    PeriodicPeriodic,
    ApPeriodic,
    ApBinf,
    PeriodicBinf,
}

impl StructureClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            StructureClass::PeriodicPeriodic => "periodic_periodic",
            StructureClass::ApPeriodic => "ap_periodic",
            StructureClass::ApBinf => "ap_binf",
            StructureClass::PeriodicBinf => "periodic_binf",
        }
    }
}

/// A flux map with its growth data and declared constants.
#[derive(Debug, Clone)]
pub struct Coefficient<R: Real> {
    pub name: String,
    pub dim: usize,
    pub family: FluxFamily<R>,
    pub structure_class: StructureClass,
    pub phi: NFunction<R>,
    pub psi: NFunction<R>,
    /// `[c1, c2, c3, c4, c5]`
    pub constants: [R; 5],
    pub h_fn: HFn<R>,
    pub h_min: R,
    pub theta: R,
}

/// Below this gradient magnitude, fluxes involving `lambda/|lambda|` are zero.
pub const DEGENERATE_EPS: f64 = 1e-14;

/// Gradient magnitude at which degenerate Jacobians are floored.
const JACOBIAN_FLOOR: f64 = 1e-8;

impl<R: Real> Coefficient<R> {
    fn build(
        name: &str,
        dim: usize,
        family: FluxFamily<R>,
        structure_class: StructureClass,
        phi: NFunction<R>,
        constants: [R; 5],
        h_fn: HFn<R>,
    ) -> Result<Self> {
        let h_min = h_fn.min_value();
        if !(h_min > R::zero() && h_min < R::one()) {
            return Err(Error::Domain("h must map into (0,1)".into()));
        }
        let theta = phi.coercivity_constant(h_min)?;
        Ok(Coefficient {
            name: name.to_string(),
            dim,
            family,
            structure_class,
            psi: phi.clone(),
            phi,
            constants,
            h_fn,
            h_min,
            theta,
        })
    }

    /// Degeneracy prefactor `Fc^{-1}(F(h(|zeta|)))`.
    pub fn degeneracy_scale(&self, zeta: R) -> R {
        let h = self.h_fn.eval(zeta.abs());
        self.phi
            .complementary()
            .invert(self.phi.evaluate(h).expect("h in domain"))
            .expect("monotone inverse")
    }

    fn profile_vals(&self, y: [R; 2], z: [R; 2], cell: bool) -> (R, R) {
        match &self.family {
            FluxFamily::Linear { cy, cz } | FluxFamily::PLap { cy, cz, .. } => {
                if cell {
                    (self.cell_y(cy, y), cz.cell_eval(z, self.dim))
                } else {
                    (cy.eval(y, self.dim), cz.eval(z, self.dim))
                }
            }
            _ => (R::one(), R::one()),
        }
    }

    fn cell_y(&self, cy: &Profile<R>, y: [R; 2]) -> R {
        cy.cell_eval(y, self.dim)
    }

    fn eval_impl(&self, y: [R; 2], z: [R; 2], zeta: R, lambda: [R; 2], cell: bool) -> [R; 2] {
        let d = self.dim;
        let mut out = [R::zero(); 2];
        match &self.family {
            FluxFamily::Linear { .. } => {
                let (a, b) = self.profile_vals(y, z, cell);
                for i in 0..d {
                    out[i] = a * b * lambda[i];
                }
            }
            FluxFamily::PLap { p, .. } => {
                let (a, b) = self.profile_vals(y, z, cell);
                let mag = norm(lambda, d);
                let s = if mag > R::of(DEGENERATE_EPS) {
                    mag.powf(*p - R::of(2.0))
                } else {
                    R::zero()
                };
                for i in 0..d {
                    out[i] = a * b * s * lambda[i];
                }
            }
            FluxFamily::Degenerate => {
                let mag = norm(lambda, d);
                if mag > R::of(DEGENERATE_EPS) {
                    let s = self.degeneracy_scale(zeta)
                        * self.phi.density(mag).expect("density domain")
                        / mag;
                    for i in 0..d {
                        out[i] = s * lambda[i];
                    }
                }
            }
            FluxFamily::Scaled { c0 } => {
                for i in 0..d {
                    out[i] = *c0 * lambda[i];
                }
            }
            FluxFamily::Negated => {
                for i in 0..d {
                    out[i] = -lambda[i];
                }
            }
        }
        out
    }

    /// Flux on the full representative (trace sampling, validation, the
    /// fine-scale problem).
    pub fn flux(&self, y: [R; 2], z: [R; 2], zeta: R, lambda: [R; 2]) -> [R; 2] {
        self.eval_impl(y, z, zeta, lambda, false)
    }

    /// Flux as seen by the nested cell problems.
    pub fn cell_flux(&self, y: [R; 2], z: [R; 2], zeta: R, lambda: [R; 2]) -> [R; 2] {
        self.eval_impl(y, z, zeta, lambda, true)
    }

    /// d(flux)/d(lambda) for the cell representative; `d x d` row-major.
    pub fn cell_flux_jacobian(&self, y: [R; 2], z: [R; 2], zeta: R, lambda: [R; 2]) -> [[R; 2]; 2] {
        self.jacobian_impl(y, z, zeta, lambda, true)
    }

    /// d(flux)/d(lambda) on the full representative (fine-scale solves).
    pub fn flux_jacobian(&self, y: [R; 2], z: [R; 2], zeta: R, lambda: [R; 2]) -> [[R; 2]; 2] {
        self.jacobian_impl(y, z, zeta, lambda, false)
    }

    fn jacobian_impl(
        &self,
        y: [R; 2],
        z: [R; 2],
        zeta: R,
        lambda: [R; 2],
        cell: bool,
    ) -> [[R; 2]; 2] {
        let d = self.dim;
        let mut j = [[R::zero(); 2]; 2];
        match &self.family {
            FluxFamily::Linear { .. } => {
                let (a, b) = self.profile_vals(y, z, cell);
                for i in 0..d {
                    j[i][i] = a * b;
                }
            }
            FluxFamily::PLap { p, .. } => {
                let (a, b) = self.profile_vals(y, z, cell);
                let c = a * b;
                let mag = norm(lambda, d);
                if mag > R::of(DEGENERATE_EPS) {
                    let s = mag.powf(*p - R::of(2.0));
                    let t = (*p - R::of(2.0)) * mag.powf(*p - R::of(4.0));
                    for i in 0..d {
                        for k in 0..d {
                            j[i][k] = c * t * lambda[i] * lambda[k];
                        }
                        j[i][i] += c * s;
                    }
                } else {
                    // the flux is zero at the origin but Newton needs a
                    // nonsingular slope there; a tiny radial floor keeps the
                    // linearization positive without touching the residual
                    let s = R::of(JACOBIAN_FLOOR).powf(*p - R::of(2.0));
                    for i in 0..d {
                        j[i][i] = c * s;
                    }
                }
            }
            FluxFamily::Degenerate => {
                let s0 = self.degeneracy_scale(zeta);
                let mag = norm(lambda, d);
                if mag <= R::of(DEGENERATE_EPS) {
                    let m0 = R::of(JACOBIAN_FLOOR);
                    let radial = self.phi.density(m0).expect("density domain") / m0;
                    for i in 0..d {
                        j[i][i] = s0 * radial;
                    }
                } else if mag > R::of(DEGENERATE_EPS) {
                    let phi = self.phi.density(mag).expect("density domain");
                    // derivative of the density by a centered difference: the
                    // tabulated kind has no closed-form slope
                    let dh = R::of(1e-6) * (R::one() + mag);
                    let phi_p = (self.phi.density(mag + dh).expect("density")
                        - self
                            .phi
                            .density((mag - dh).max(R::zero()))
                            .expect("density"))
                        / (dh + dh.min(mag));
                    let radial = phi / mag;
                    for i in 0..d {
                        for k in 0..d {
                            let unit = lambda[i] * lambda[k] / (mag * mag);
                            j[i][k] = s0 * ((phi_p - radial) * unit);
                        }
                        j[i][i] += s0 * radial;
                    }
                }
            }
            FluxFamily::Scaled { c0 } => {
                for i in 0..d {
                    j[i][i] = *c0;
                }
            }
            FluxFamily::Negated => {
                for i in 0..d {
                    j[i][i] = -R::one();
                }
            }
        }
        j
    }

    /// Multiplicative split `a(y, z, r, lambda) = sigma(y, r) * g(z, lambda)`
    /// when the family factorizes exactly; the nested solvers then share one
    /// base z-corrector across the whole intermediate cell.
    pub fn z_slice_scale(&self, y: [R; 2], r: R) -> Option<R> {
        match &self.family {
            FluxFamily::Linear { cy, .. } | FluxFamily::PLap { cy, .. } => {
                Some(self.cell_y(cy, y))
            }
            FluxFamily::Degenerate => Some(self.degeneracy_scale(r)),
            FluxFamily::Scaled { c0 } => Some(*c0),
            FluxFamily::Negated => None,
        }
    }

    /// The base flux `g(z, lambda)` of the multiplicative split.
    pub fn base_z_flux(&self, z: [R; 2], lambda: [R; 2]) -> [R; 2] {
        let d = self.dim;
        let mut out = [R::zero(); 2];
        match &self.family {
            FluxFamily::Linear { cz, .. } => {
                let b = cz.cell_eval(z, d);
                for i in 0..d {
                    out[i] = b * lambda[i];
                }
            }
            FluxFamily::PLap { cz, p, .. } => {
                let b = cz.cell_eval(z, d);
                let mag = norm(lambda, d);
                let s = if mag > R::of(DEGENERATE_EPS) {
                    mag.powf(*p - R::of(2.0))
                } else {
                    R::zero()
                };
                for i in 0..d {
                    out[i] = b * s * lambda[i];
                }
            }
            FluxFamily::Degenerate => {
                let mag = norm(lambda, d);
                if mag > R::of(DEGENERATE_EPS) {
                    let s = self.phi.density(mag).expect("density") / mag;
                    for i in 0..d {
                        out[i] = s * lambda[i];
                    }
                }
            }
            FluxFamily::Scaled { .. } | FluxFamily::Negated => {
                for i in 0..d {
                    out[i] = lambda[i];
                }
            }
        }
        out
    }

    pub fn base_z_jacobian(&self, z: [R; 2], lambda: [R; 2]) -> [[R; 2]; 2] {
        // reuse the cell jacobian machinery on a unit-scale copy
        let probe = Coefficient {
            family: match &self.family {
                FluxFamily::Linear { cz, .. } => FluxFamily::Linear {
                    cy: Profile::One,
                    cz: cz.clone(),
                },
                FluxFamily::PLap { cz, p, .. } => FluxFamily::PLap {
                    cy: Profile::One,
                    cz: cz.clone(),
                    p: *p,
                },
                FluxFamily::Degenerate => FluxFamily::Degenerate,
                FluxFamily::Scaled { .. } => FluxFamily::Scaled { c0: R::one() },
                FluxFamily::Negated => FluxFamily::Negated,
            },
            ..self.clone()
        };
        let mut j = probe.cell_flux_jacobian([R::zero(); 2], z, R::zero(), lambda);
        if matches!(self.family, FluxFamily::Degenerate) {
            // strip the zeta prefactor the probe applied at zeta = 0
            let s0 = self.degeneracy_scale(R::zero());
            for row in j.iter_mut() {
                for v in row.iter_mut() {
                    *v /= s0;
                }
            }
        }
        j
    }

    /// Positive homogeneity degree of `lambda -> g(z, lambda)`, when exact.
    pub fn lambda_homogeneity(&self) -> Option<R> {
        match &self.family {
            FluxFamily::Linear { .. } | FluxFamily::Scaled { .. } => Some(R::one()),
            FluxFamily::PLap { p, .. } => Some(*p - R::one()),
            FluxFamily::Degenerate => match &self.phi {
                NFunction::Power { p, .. } => Some(*p - R::one()),
                _ => None,
            },
            FluxFamily::Negated => None,
        }
    }

    /// Is the base flux linear in lambda?
    pub fn linear_in_lambda(&self) -> bool {
        match &self.family {
            FluxFamily::Linear { .. } | FluxFamily::Scaled { .. } => true,
            FluxFamily::PLap { p, .. } => (*p - R::of(2.0)).abs() < R::of(1e-14),
            FluxFamily::Degenerate => matches!(
                &self.phi,
                NFunction::Power { p, .. } if (*p - R::of(2.0)).abs() < R::of(1e-14)
            ),
            FluxFamily::Negated => false,
        }
    }

    pub fn zeta_independent(&self) -> bool {
        !matches!(self.family, FluxFamily::Degenerate)
    }

    /// The integrand used inside the cell problems. For every concrete
    /// structure class this is the representative flux itself.
    pub fn effective_integrand(&self) -> EffectiveIntegrand<'_, R> {
        EffectiveIntegrand { coeff: self }
    }
}

fn norm<R: Real>(v: [R; 2], d: usize) -> R {
    let mut s = R::zero();
    for x in v.iter().take(d) {
        s += *x * *x;
    }
    s.sqrt()
}

/// The flux used inside cell problems (identity on representatives).
pub struct EffectiveIntegrand<'a, R: Real> {
    coeff: &'a Coefficient<R>,
}

impl<R: Real> EffectiveIntegrand<'_, R> {
    pub fn eval(&self, y: [R; 2], z: [R; 2], zeta: R, lambda: [R; 2]) -> [R; 2] {
        self.coeff.flux(y, z, zeta, lambda)
    }
}

/// Names of the certified catalog problems (the planted counterexample
/// `neg1d` is available through `builtin_problem` but is not certified).
pub fn catalog_names() -> &'static [&'static str] {
    &["lin1d", "plap2d", "deg1d", "ap1d", "binf1d", "const1d"]
}

/// Construct a catalog coefficient; `p_override` adjusts the p-Laplacian
/// exponent where it applies.
pub fn builtin_problem<R: Real>(name: &str, p_override: Option<R>) -> Result<Coefficient<R>> {
    let two_sin = |axis: usize| Profile::two_plus_sin_2pi(axis);
    match name {
        "lin1d" => Coefficient::build(
            name,
            1,
            FluxFamily::Linear {
                cy: two_sin(0),
                cz: two_sin(0),
            },
            StructureClass::PeriodicPeriodic,
            NFunction::power(R::of(2.0)),
            [R::of(1.0), R::of(1.0), R::of(3.0), R::of(3.5), R::of(1.0)],
            HFn::Const(R::of(0.5)),
        ),
        "plap2d" => {
            let p = p_override.unwrap_or(R::of(3.0));
            if p <= R::one() {
                return Err(Error::Config("plap2d needs p > 1".into()));
            }
            let tau = crate::scalar::two_pi::<R>();
            let half = R::of(0.5);
            // 2 + sin(2 pi a) sin(2 pi b) = 2 + cos(2pi(a-b))/2 - cos(2pi(a+b))/2
            let osc = |_| {
                Profile::Trig(TrigPoly::new(
                    2,
                    vec![
                        Mode {
                            omega: [R::zero(); 2],
                            amp_cos: R::of(2.0),
                            amp_sin: R::zero(),
                        },
                        Mode {
                            omega: [tau, -tau],
                            amp_cos: half,
                            amp_sin: R::zero(),
                        },
                        Mode {
                            omega: [tau, tau],
                            amp_cos: -half,
                            amp_sin: R::zero(),
                        },
                    ],
                ))
            };
            Coefficient::build(
                name,
                2,
                FluxFamily::PLap {
                    cy: osc(0),
                    cz: osc(0),
                    p,
                },
                StructureClass::PeriodicPeriodic,
                NFunction::power(p),
                [R::of(1.0), R::of(1.0), R::of(4.0), R::of(40.0), R::of(0.5)],
                HFn::Const(R::of(0.5)),
            )
        }
        "deg1d" => Coefficient::build(
            name,
            1,
            FluxFamily::Degenerate,
            StructureClass::PeriodicPeriodic,
            NFunction::power(R::of(2.0)),
            [R::of(5.0), R::of(1.0), R::of(1.0), R::of(1.5), R::of(0.05)],
            HFn::RationalDecay {
                base: R::of(0.5),
                amp: R::of(0.4),
            },
        ),
        "ap1d" => {
            let cy = Profile::Trig(TrigPoly::line(
                R::of(2.0),
                &[(R::one(), R::one()), (R::of(2.0).sqrt(), R::one())],
                &[],
            ));
            Coefficient::build(
                name,
                1,
                FluxFamily::Linear {
                    cy,
                    cz: two_sin(0),
                },
                StructureClass::ApPeriodic,
                NFunction::power(R::of(2.0)),
                [R::of(1.0), R::of(1.0), R::of(3.0), R::of(4.5), R::of(1.0)],
                HFn::Const(R::of(0.5)),
            )
        }
        "binf1d" => Coefficient::build(
            name,
            1,
            FluxFamily::Linear {
                cy: two_sin(0),
                cz: Profile::BInf {
                    limit: R::of(2.0),
                    amp: R::one(),
                },
            },
            StructureClass::PeriodicBinf,
            NFunction::power(R::of(2.0)),
            [R::of(1.0), R::of(1.0), R::of(3.0), R::of(3.5), R::of(1.0)],
            HFn::Const(R::of(0.5)),
        ),
        "apbinf1d" => {
            let cy = Profile::Trig(TrigPoly::line(
                R::of(2.0),
                &[(R::one(), R::one()), (R::of(2.0).sqrt(), R::one())],
                &[],
            ));
            Coefficient::build(
                name,
                1,
                FluxFamily::Linear {
                    cy,
                    cz: Profile::BInf {
                        limit: R::of(2.0),
                        amp: R::one(),
                    },
                },
                StructureClass::ApBinf,
                NFunction::power(R::of(2.0)),
                [R::of(1.0), R::of(1.0), R::of(3.0), R::of(4.5), R::of(1.0)],
                HFn::Const(R::of(0.5)),
            )
        }
        "const1d" => Coefficient::build(
            name,
            1,
            FluxFamily::Scaled { c0: R::of(3.0) },
            StructureClass::PeriodicPeriodic,
            NFunction::power(R::of(2.0)),
            [R::of(1.0), R::of(1.0), R::of(2.0), R::of(2.0), R::of(1.0)],
            HFn::Const(R::of(0.5)),
        ),
        "neg1d" => Coefficient::build(
            name,
            1,
            FluxFamily::Negated,
            StructureClass::PeriodicPeriodic,
            NFunction::power(R::of(2.0)),
            [R::of(1.0), R::of(1.0), R::of(2.0), R::of(2.0), R::of(1.0)],
            HFn::Const(R::of(0.5)),
        ),
        other => Err(Error::Catalog(other.to_string())),
    }
}

/// A concrete sample tuple; carried as the witness of a failed hypothesis.
#[derive(Debug, Clone)]
pub struct Witness<R: Real> {
    pub y: [R; 2],
    pub z: [R; 2],
    pub zeta: R,
    pub lambda: [R; 2],
    pub zeta2: Option<R>,
    pub lambda2: Option<[R; 2]>,
}

#[derive(Debug, Clone)]
pub struct HypothesisEntry<R: Real> {
    pub name: &'static str,
    pub pass: bool,
    /// Worst-case margin observed (positive = satisfied with room).
    pub margin: R,
    pub witness: Option<Witness<R>>,
}

#[derive(Debug, Clone)]
pub struct HypothesisReport<R: Real> {
    pub entries: Vec<HypothesisEntry<R>>,
    pub samples: usize,
    pub seed: u64,
}

impl<R: Real> HypothesisReport<R> {
    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }

    pub fn entry(&self, name: &str) -> Option<&HypothesisEntry<R>> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn text_block(&self) -> String {
        let mut s = format!("samples = {}\nseed    = {}\n", self.samples, self.seed);
        for e in &self.entries {
            s.push_str(&format!(
                "{:<14} pass={} margin={:.6e}\n",
                e.name,
                e.pass,
                e.margin.to_f64_lossy()
            ));
            if let Some(w) = &e.witness {
                s.push_str(&format!(
                    "  witness: y=({:.4},{:.4}) z=({:.4},{:.4}) zeta={:.4} lambda=({:.4},{:.4})",
                    w.y[0].to_f64_lossy(),
                    w.y[1].to_f64_lossy(),
                    w.z[0].to_f64_lossy(),
                    w.z[1].to_f64_lossy(),
                    w.zeta.to_f64_lossy(),
                    w.lambda[0].to_f64_lossy(),
                    w.lambda[1].to_f64_lossy()
                ));
                if let (Some(z2), Some(l2)) = (&w.zeta2, &w.lambda2) {
                    s.push_str(&format!(
                        " zeta'={:.4} lambda'=({:.4},{:.4})",
                        z2.to_f64_lossy(),
                        l2[0].to_f64_lossy(),
                        l2[1].to_f64_lossy()
                    ));
                }
                s.push('\n');
            }
        }
        s
    }
}

/// Sampling box half-width for `(zeta, lambda)`.
pub const SAMPLE_BOX: f64 = 10.0;

/// Seeded quasi-random check of the structural hypotheses. Failures are data
/// (reported with witnesses), not errors.
pub fn validate<R: Real>(
    coeff: &Coefficient<R>,
    samples: usize,
    seed: u64,
) -> Result<HypothesisReport<R>> {
    if samples < 1000 {
        return Err(Error::Domain(format!(
            "validator needs >= 1000 samples, got {samples}"
        )));
    }
    let d = coeff.dim;
    let qdim = 3 * d + 1;
    let mut stream = HaltonStream::new(seed, qdim);
    let mut buf = vec![0.0f64; qdim];
    let box_r = R::of(SAMPLE_BOX);

    let draw = |buf: &[f64]| -> ([R; 2], [R; 2], R, [R; 2]) {
        let mut y = [R::zero(); 2];
        let mut z = [R::zero(); 2];
        let mut l = [R::zero(); 2];
        for a in 0..d {
            y[a] = R::of(buf[a]);
            z[a] = R::of(buf[d + a]);
        }
        let zeta = (R::of(buf[2 * d]) * R::of(2.0) - R::one()) * box_r;
        for a in 0..d {
            l[a] = (R::of(buf[2 * d + 1 + a]) * R::of(2.0) - R::one()) * box_r;
        }
        (y, z, zeta, l)
    };

    let [c1, c2, c3, c4, c5] = coeff.constants;
    let phi = &coeff.phi;
    let phic = phi.complementary();
    let psic = coeff.psi.complementary();

    let mut h1_ok = true;
    let mut h1_zero_sup = R::zero();
    let mut h2_margin = R::infinity();
    let mut h2_witness = None;
    let mut h3_margin = R::infinity();
    let mut h3_witness = None;
    let mut h4_margin = R::infinity();
    let mut h4_witness = None;
    let mut h6_margin = R::infinity();
    let mut h6_witness = None;
    let mut translation_pool = Vec::new();

    for i in 0..samples {
        stream.next_point(&mut buf);
        let (y, z, zeta_a, l_a) = draw(&buf);
        stream.next_point(&mut buf);
        let (_, _, zeta_b, l_b) = draw(&buf);

        let a_a = coeff.flux(y, z, zeta_a, l_a);
        let a_b = coeff.flux(y, z, zeta_b, l_b);
        let a_zero = coeff.flux(y, z, R::zero(), [R::zero(); 2]);

        // H1: finiteness on samples and boundedness at the origin state
        for v in a_a.iter().chain(a_b.iter()).chain(a_zero.iter()).take(6) {
            if !v.is_finite() {
                h1_ok = false;
            }
        }
        h1_zero_sup = h1_zero_sup.max(norm(a_zero, d));

        // H2 continuity (1.3)
        let dz = (zeta_a - zeta_b).abs();
        let dl = norm(sub(l_a, l_b), d);
        let lhs = norm(sub(a_a, a_b), d);
        let rhs = c1 * psic.invert(phi.evaluate(c2 * dz)?)?
            + c3 * phic.invert(phi.evaluate(c4 * dl)?)?;
        let m = rhs - lhs;
        if m < h2_margin {
            h2_margin = m;
            if m <= R::zero() {
                h2_witness = Some(Witness {
                    y,
                    z,
                    zeta: zeta_a,
                    lambda: l_a,
                    zeta2: Some(zeta_b),
                    lambda2: Some(l_b),
                });
            }
        }

        // H3 coercivity (1.4)
        let coercive_lhs = dot(a_a, l_a, d);
        let coercive_rhs = coeff.degeneracy_scale(zeta_a) * phi.evaluate(norm(l_a, d))?;
        let m = coercive_lhs - coercive_rhs;
        if m < h3_margin {
            h3_margin = m;
            if m <= R::zero() {
                h3_witness = Some(Witness {
                    y,
                    z,
                    zeta: zeta_a,
                    lambda: l_a,
                    zeta2: None,
                    lambda2: None,
                });
            }
        }

        // H4 monotonicity at fixed zeta
        let a_same = coeff.flux(y, z, zeta_a, l_b);
        let m = dot(sub(a_a, a_same), sub(l_a, l_b), d);
        if m < h4_margin {
            h4_margin = m;
            if m <= R::zero() {
                h4_witness = Some(Witness {
                    y,
                    z,
                    zeta: zeta_a,
                    lambda: l_a,
                    zeta2: Some(zeta_a),
                    lambda2: Some(l_b),
                });
            }
        }

        // H6 strict monotonicity: the H4 product with the modulus subtracted
        let m = dot(sub(a_a, a_same), sub(l_a, l_b), d) - c5 * phi.evaluate(dl)?;
        if m < h6_margin {
            h6_margin = m;
            if m <= R::zero() {
                h6_witness = Some(Witness {
                    y,
                    z,
                    zeta: zeta_a,
                    lambda: l_a,
                    zeta2: Some(zeta_a),
                    lambda2: Some(l_b),
                });
            }
        }

        if i % mersenne_gap(samples) == 0 {
            translation_pool.push((y, z, zeta_a, l_a));
        }
    }

    // H5: translation modulus in the first cell variable
    let radii = [0.1, 0.01, 0.001];
    let mut moduli = [R::zero(); 3];
    for (ri, &rho) in radii.iter().enumerate() {
        let rho = R::of(rho);
        let mut worst = R::zero();
        for &(y, z, zeta, l) in &translation_pool {
            let base = coeff.flux(y, z, zeta, l);
            for axis in 0..d {
                for &s in &[rho, -rho, rho * R::of(0.5)] {
                    let mut ys = y;
                    ys[axis] -= s;
                    let shifted = coeff.flux(ys, z, zeta, l);
                    worst = worst.max(norm(sub(shifted, base), d));
                }
            }
        }
        moduli[ri] = worst;
    }
    let h5_pass = moduli[2] <= (moduli[0] / R::of(10.0)).max(R::of(1e-12));
    let h5_margin = (moduli[0] / R::of(10.0)).max(R::of(1e-12)) - moduli[2];

    // H2 index chain on the dyadic grid
    let grid = dyadic_grid(R::of(1e-3), R::of(1e3), 128);
    let (mut lo_phi, mut hi_phi) = (R::infinity(), R::neg_infinity());
    let (mut lo_psi, mut hi_psi) = (R::infinity(), R::neg_infinity());
    for &t in &grid {
        let vp = t * phi.density(t)? / phi.evaluate(t)?;
        let vs = t * coeff.psi.density(t)? / coeff.psi.evaluate(t)?;
        if vp.is_finite() {
            lo_phi = lo_phi.min(vp);
            hi_phi = hi_phi.max(vp);
        }
        if vs.is_finite() {
            lo_psi = lo_psi.min(vs);
            hi_psi = hi_psi.max(vs);
        }
    }
    let slack = R::of(1e-9);
    let chain_pass = lo_psi > R::one() && hi_psi <= lo_phi + slack && hi_phi.is_finite();

    // H3 shape checks on h itself
    let mut h_shape_ok = coeff.h_min > R::zero();
    let mut grid_inf = R::infinity();
    let mut prev = R::infinity();
    for &t in &grid {
        let v = coeff.h_fn.eval(t);
        if v <= R::zero() || v >= R::one() || v > prev + slack {
            h_shape_ok = false;
        }
        grid_inf = grid_inf.min(v);
        prev = v;
    }
    if coeff.h_min > grid_inf + slack {
        h_shape_ok = false;
    }

    let entries = vec![
        HypothesisEntry {
            name: "H1_caratheodory",
            pass: h1_ok && h1_zero_sup.is_finite(),
            margin: if h1_ok { R::one() } else { -R::one() },
            witness: None,
        },
        HypothesisEntry {
            name: "H2_continuity",
            pass: h2_margin > R::zero(),
            margin: h2_margin,
            witness: h2_witness,
        },
        HypothesisEntry {
            name: "H2_indices",
            pass: chain_pass,
            margin: lo_psi - R::one(),
            witness: None,
        },
        HypothesisEntry {
            name: "H3_coercivity",
            pass: h3_margin > R::zero() && h_shape_ok,
            margin: h3_margin,
            witness: h3_witness,
        },
        HypothesisEntry {
            name: "H4_monotone",
            pass: h4_margin > R::zero(),
            margin: h4_margin,
            witness: h4_witness,
        },
        HypothesisEntry {
            name: "H5_translation",
            pass: h5_pass,
            margin: h5_margin,
            witness: None,
        },
        HypothesisEntry {
            name: "H6_strict",
            pass: h6_margin > R::zero(),
            margin: h6_margin,
            witness: h6_witness,
        },
    ];

    Ok(HypothesisReport {
        entries,
        samples,
        seed,
    })
}

fn mersenne_gap(samples: usize) -> usize {
    (samples / 512).max(1)
}

fn sub<R: Real>(a: [R; 2], b: [R; 2]) -> [R; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn dot<R: Real>(a: [R; 2], b: [R; 2], d: usize) -> R {
    let mut s = R::zero();
    for i in 0..d {
        s += a[i] * b[i];
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    type C = Coefficient<f64>;

    fn lin1d() -> C {
        builtin_problem("lin1d", None).unwrap()
    }

    #[test]
    fn lin1d_flux_hand_value() {
        // (2 + sin(pi/2)) (2 + sin(pi/2)) * 1 = 9
        let c = lin1d();
        let v = c.flux([0.25, 0.0], [0.25, 0.0], 0.0, [1.0, 0.0]);
        assert!((v[0] - 9.0).abs() < 1e-12);
    }

    #[test]
    fn identity_like_flux_passes() {
        let c = builtin_problem::<f64>("const1d", None).unwrap();
        let rep = validate(&c, 2000, 1).unwrap();
        assert!(rep.all_pass(), "{}", rep.text_block());
    }

    #[test]
    fn catalog_passes_hypotheses() {
        for name in catalog_names() {
            let c = builtin_problem::<f64>(name, None).unwrap();
            let rep = validate(&c, 2000, 42).unwrap();
            assert!(rep.all_pass(), "{name}:\n{}", rep.text_block());
            for e in &rep.entries {
                assert!(e.margin > 0.0 || e.name == "H5_translation", "{name} {e:?}");
            }
        }
    }

    #[test]
    fn planted_counterexample_fails_h4() {
        let c = builtin_problem::<f64>("neg1d", None).unwrap();
        let rep = validate(&c, 2000, 42).unwrap();
        let h4 = rep.entry("H4_monotone").unwrap();
        assert!(!h4.pass);
        assert!(h4.witness.is_some());
        assert!(h4.margin < 0.0);
    }

    #[test]
    fn unknown_name_is_catalog_error() {
        assert!(matches!(
            builtin_problem::<f64>("nope", None),
            Err(Error::Catalog(_))
        ));
    }

    #[test]
    fn validate_is_deterministic() {
        let c = lin1d();
        let a = validate(&c, 1500, 9).unwrap();
        let b = validate(&c, 1500, 9).unwrap();
        for (ea, eb) in a.entries.iter().zip(&b.entries) {
            assert_eq!(ea.pass, eb.pass);
            assert_eq!(ea.margin, eb.margin);
        }
        let c2 = validate(&c, 1500, 10).unwrap();
        // a different seed samples different tuples
        assert!(a
            .entries
            .iter()
            .zip(&c2.entries)
            .any(|(x, y)| x.margin != y.margin));
    }

    #[test]
    fn validate_rejects_small_sample_count() {
        assert!(validate(&lin1d(), 10, 0).is_err());
    }

    #[test]
    fn effective_integrand_matches_flux() {
        for name in ["lin1d", "ap1d", "deg1d"] {
            let c = builtin_problem::<f64>(name, None).unwrap();
            let b = c.effective_integrand();
            let mut stream = HaltonStream::new(3, 4);
            let mut buf = [0.0; 4];
            for _ in 0..1000 {
                stream.next_point(&mut buf);
                let y = [buf[0], 0.0];
                let z = [buf[1], 0.0];
                let zeta = 20.0 * buf[2] - 10.0;
                let l = [20.0 * buf[3] - 10.0, 0.0];
                let lhs = b.eval(y, z, zeta, l);
                let rhs = c.flux(y, z, zeta, l);
                assert_eq!(lhs, rhs);
            }
        }
    }

    #[test]
    fn degenerate_flux_vanishes_at_zero_gradient() {
        let c = builtin_problem::<f64>("deg1d", None).unwrap();
        let v = c.flux([0.0; 2], [0.0; 2], 1.0, [0.0, 0.0]);
        assert_eq!(v, [0.0, 0.0]);
        // matches the spec formula: h(t) = 0.5 + 0.4/(1+t); phi(t) = t
        let v = c.flux([0.0; 2], [0.0; 2], 0.0, [2.0, 0.0]);
        assert!((v[0] - 0.9 * 2.0).abs() < 1e-12);
    }

    #[test]
    fn theta_matches_defining_identity() {
        let c = lin1d();
        // phi = t^2/2 is self-conjugate so theta = h_min
        assert!((c.theta - 0.5).abs() < 1e-12);
        let d = builtin_problem::<f64>("plap2d", None).unwrap();
        let lhs = d.phi.complementary().evaluate(d.theta).unwrap();
        let rhs = d.phi.evaluate(d.h_min).unwrap();
        assert!((lhs - rhs).abs() < 1e-10);
    }
}
