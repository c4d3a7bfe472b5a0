//! Mean values for concrete algebra representatives (periodic, almost
//! periodic, vanishing-oscillation-at-infinity), ergodic ball averages, and
//! the numeric weak reiterated convergence tester.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fields::{CellFactor, MultiscaleField};
use crate::mesh::{mass_pairing, Field, Mesh};
use crate::nfunc::NFunction;
use crate::quad::adaptive_simpson;
use crate::scalar::Real;
use crate::trig::TrigPoly;

/// Decaying core of a convergence-at-infinity representative.
#[derive(Debug, Clone)]
pub enum CoreFn<R: Real> {
    None,
    /// `amp * exp(-|x|^2)`
    Gaussian { amp: R },
}

impl<R: Real> CoreFn<R> {
    fn eval(&self, x: [R; 2], dim: usize) -> R {
        match self {
            CoreFn::None => R::zero(),
            CoreFn::Gaussian { amp } => {
                let mut r2 = R::zero();
                for a in 0..dim {
                    r2 += x[a] * x[a];
                }
                *amp * (-r2).exp()
            }
        }
    }

    fn max_abs(&self) -> R {
        match self {
            CoreFn::None => R::zero(),
            CoreFn::Gaussian { amp } => amp.abs(),
        }
    }
}

/// A concrete function representative with a well-defined mean value.
#[derive(Debug, Clone)]
pub enum AlgebraRep<R: Real> {
    /// 1-periodic data: a trig sum with integer frequencies or grid samples
    /// on the periodic unit cell.
    Periodic { dim: usize, data: PeriodicData<R> },
    /// Finite trig sum with arbitrary real frequency vectors.
    AlmostPeriodic { dim: usize, poly: TrigPoly<R> },
    /// `limit + core(x)` with the core decaying at infinity.
    BInfinity {
        dim: usize,
        limit: R,
        core: CoreFn<R>,
        radius: R,
    },
}

#[derive(Debug, Clone)]
pub enum PeriodicData<R: Real> {
    Trig(TrigPoly<R>),
    Grid(Field<R>),
}

impl<R: Real> AlgebraRep<R> {
    pub fn periodic_trig(poly: TrigPoly<R>) -> Result<Self> {
        if !poly.is_periodic() {
            return Err(Error::Domain(
                "periodic representative needs integer frequencies".into(),
            ));
        }
        Ok(AlgebraRep::Periodic {
            dim: poly.dim,
            data: PeriodicData::Trig(poly),
        })
    }

    pub fn almost_periodic(poly: TrigPoly<R>) -> Self {
        AlgebraRep::AlmostPeriodic {
            dim: poly.dim,
            poly,
        }
    }

    pub fn b_infinity(dim: usize, limit: R, core: CoreFn<R>, radius: R) -> Result<Self> {
        // the declared radius must see the core below 1e-8
        let tail = match &core {
            CoreFn::None => R::zero(),
            CoreFn::Gaussian { amp } => amp.abs() * (-radius * radius).exp(),
        };
        if tail > R::of(1e-8) {
            return Err(Error::Domain(format!(
                "core does not decay below 1e-8 outside radius {radius}"
            )));
        }
        Ok(AlgebraRep::BInfinity {
            dim,
            limit,
            core,
            radius,
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            AlgebraRep::Periodic { dim, .. }
            | AlgebraRep::AlmostPeriodic { dim, .. }
            | AlgebraRep::BInfinity { dim, .. } => *dim,
        }
    }

    pub fn eval(&self, x: [R; 2]) -> R {
        match self {
            AlgebraRep::Periodic { data, .. } => match data {
                PeriodicData::Trig(p) => p.eval(x),
                PeriodicData::Grid(f) => f.interp(x),
            },
            AlgebraRep::AlmostPeriodic { poly, .. } => poly.eval(x),
            AlgebraRep::BInfinity {
                dim, limit, core, ..
            } => *limit + core.eval(x, *dim),
        }
    }

    fn sup_scale(&self) -> R {
        match self {
            AlgebraRep::Periodic { data, .. } => match data {
                PeriodicData::Trig(p) => p.modes.iter().fold(R::zero(), |a, m| {
                    a + m.amp_cos.abs() + m.amp_sin.abs()
                }),
                PeriodicData::Grid(f) => f.max_magnitude(),
            },
            AlgebraRep::AlmostPeriodic { poly, .. } => poly
                .modes
                .iter()
                .fold(R::zero(), |a, m| a + m.amp_cos.abs() + m.amp_sin.abs()),
            AlgebraRep::BInfinity { limit, core, .. } => limit.abs() + core.max_abs(),
        }
    }

    fn max_abs_freq(&self) -> R {
        match self {
            AlgebraRep::Periodic { data, .. } => match data {
                PeriodicData::Trig(p) => p.max_abs_freq(),
                PeriodicData::Grid(f) => R::PI() * R::from_usize_exact(f.mesh.cells[0]),
            },
            AlgebraRep::AlmostPeriodic { poly, .. } => poly.max_abs_freq(),
            AlgebraRep::BInfinity { .. } => R::one(),
        }
    }
}

/// Mean value: cell average / zero-frequency coefficient / limit at infinity.
pub fn mean<R: Real>(u: &AlgebraRep<R>) -> R {
    match u {
        AlgebraRep::Periodic { data, .. } => match data {
            PeriodicData::Trig(p) => p.mean(),
            PeriodicData::Grid(f) => {
                let n = R::from_usize_exact(f.values.len());
                f.values.iter().fold(R::zero(), |a, &v| a + v) / n
            }
        },
        AlgebraRep::AlmostPeriodic { poly, .. } => poly.mean(),
        AlgebraRep::BInfinity { limit, .. } => *limit,
    }
}

/// Mean of a finite sum of tensor products `w_i(y) v_i(z)`.
pub fn reiterated_mean<R: Real>(terms: &[(AlgebraRep<R>, AlgebraRep<R>)]) -> R {
    terms
        .iter()
        .fold(R::zero(), |acc, (w, v)| acc + mean(w) * mean(v))
}

/// Ball average `(1/|B_r|) integral_{B_r} u(center + x) dx` by adaptive
/// quadrature (relative accuracy well below 1e-4 of the data scale).
pub fn ergodic_average<R: Real>(u: &AlgebraRep<R>, r: R, center: [R; 2]) -> Result<R> {
    if r <= R::zero() {
        return Err(Error::Domain("ball radius must be positive".into()));
    }
    let scale = R::one() + u.sup_scale();
    let tol = R::of(1e-7) * scale * (r + r);
    // initial panels resolve the fastest oscillation
    let wavelen_panels = (u.max_abs_freq() * r).to_f64_lossy().ceil() as usize;
    let panels = (wavelen_panels.max(16)).min(1 << 14);
    match u.dim() {
        1 => {
            let f = |x: R| u.eval([center[0] + x, R::zero()]);
            let integral = adaptive_simpson(&f, -r, r, tol, panels);
            Ok(integral / (r + r))
        }
        2 => {
            // polar coordinates over the disk
            let tau = crate::scalar::two_pi::<R>();
            let outer = |rho: R| -> R {
                let g = |th: R| {
                    u.eval([center[0] + rho * th.cos(), center[1] + rho * th.sin()])
                };
                adaptive_simpson(&g, R::zero(), tau, tol, panels) * rho
            };
            let integral = adaptive_simpson(&outer, R::zero(), r, tol, panels);
            Ok(integral / (R::PI() * r * r))
        }
        d => Err(Error::Domain(format!("ergodic average dim {d}"))),
    }
}

/// Per-epsilon record of the weak reiterated convergence test.
#[derive(Debug, Clone)]
pub struct SigmaTestReport<R: Real> {
    pub eps_list: Vec<R>,
    pub lhs: Vec<R>,
    pub rhs: R,
    pub gap: Vec<R>,
}

impl<R: Real> SigmaTestReport<R> {
    /// Decreasing-in-trend check: last gap below the first.
    pub fn trend_ok(&self) -> bool {
        match (self.gap.first(), self.gap.last()) {
            (Some(&f), Some(&l)) => l < f || (f == R::zero() && l == R::zero()),
            _ => false,
        }
    }

    pub fn csv(&self) -> String {
        let mut s = String::from("eps,lhs,rhs,gap\n");
        for i in 0..self.eps_list.len() {
            s.push_str(&format!(
                "{:.12e},{:.12e},{:.12e},{:.12e}\n",
                self.eps_list[i].to_f64_lossy(),
                self.lhs[i].to_f64_lossy(),
                self.rhs.to_f64_lossy(),
                self.gap[i].to_f64_lossy()
            ));
        }
        s
    }
}

fn factor_product_mean<R: Real>(a: &CellFactor<R>, b: &CellFactor<R>) -> Result<R> {
    match (a, b) {
        (CellFactor::One, CellFactor::One) => Ok(R::one()),
        (CellFactor::One, CellFactor::Trig(t)) | (CellFactor::Trig(t), CellFactor::One) => {
            Ok(t.mean())
        }
        (CellFactor::Trig(p), CellFactor::Trig(q)) => Ok(p.product_mean(q)),
        (CellFactor::One, CellFactor::Grid(g)) | (CellFactor::Grid(g), CellFactor::One) => {
            let n = R::from_usize_exact(g.values.len());
            Ok(g.values.iter().fold(R::zero(), |acc, &v| acc + v) / n)
        }
        (CellFactor::Grid(g), CellFactor::Trig(t)) | (CellFactor::Trig(t), CellFactor::Grid(g)) => {
            // sample the trig factor at the grid nodes; the periodic nodal rule
            // is the natural quadrature for grid data
            let n = R::from_usize_exact(g.values.len());
            let mut acc = R::zero();
            for i in 0..g.values.len() {
                acc += g.values[i] * t.eval(g.mesh.node_coord(i));
            }
            Ok(acc / n)
        }
        (CellFactor::Grid(g1), CellFactor::Grid(g2)) => {
            if g1.mesh.as_ref() != g2.mesh.as_ref() {
                return Err(Error::Shape(
                    "grid factors must share the cell mesh for product means".into(),
                ));
            }
            let n = R::from_usize_exact(g1.values.len());
            let mut acc = R::zero();
            for i in 0..g1.values.len() {
                acc += g1.values[i] * g2.values[i];
            }
            Ok(acc / n)
        }
    }
}

/// Numeric tester for weak reiterated convergence: pairs the sampled trace of
/// `u0` against the sampled trace of `f` for each epsilon and compares with
/// the limit `integral_Omega M_yz(u0 f) dx`.
pub fn sigma_test<R: Real>(
    u0: &MultiscaleField<R>,
    f: &MultiscaleField<R>,
    mesh: &Arc<Mesh<R>>,
    eps_list: &[R],
) -> Result<SigmaTestReport<R>> {
    if eps_list.is_empty() {
        return Err(Error::Config("empty eps list".into()));
    }
    for w in eps_list.windows(2) {
        if w[1] >= w[0] {
            return Err(Error::Config("eps list must be strictly decreasing".into()));
        }
    }
    let four = R::of(4.0);
    let n_min = (0..mesh.dim).map(|a| mesh.cells[a]).min().unwrap();
    for &eps in eps_list {
        let eps2 = eps * eps;
        if R::from_usize_exact(n_min) < four / eps2 {
            return Err(Error::Resolution(format!(
                "mesh n = {n_min} < 4/eps2 = {}",
                (four / eps2).to_f64_lossy()
            )));
        }
    }

    // limit side: sum over term pairs of (x-quadrature) * mean_y * mean_z
    let wq = mesh.quad_weights();
    let mut rhs = R::zero();
    for tu in &u0.terms {
        for tf in &f.terms {
            let my = factor_product_mean(&tu.y, &tf.y)?;
            let mz = factor_product_mean(&tu.z, &tf.z)?;
            if my == R::zero() || mz == R::zero() {
                continue;
            }
            let mut xint = R::zero();
            for i in 0..mesh.node_count() {
                let x = mesh.node_coord(i);
                let gu = match &tu.x {
                    crate::fields::XFactor::One => R::one(),
                    other => other_eval(other, x),
                };
                let gf = match &tf.x {
                    crate::fields::XFactor::One => R::one(),
                    other => other_eval(other, x),
                };
                xint += gu * gf * wq[i];
            }
            rhs += tu.coeff * tf.coeff * xint * my * mz;
        }
    }

    // Each epsilon is paired on the oscillation-matched resolution derived
    // from the carrier mesh: n_eps = ceil(4/eps^2) cells per axis, capped by
    // the carrier. A single fixed grid would see a *growing* interpolation
    // gap as eps shrinks; the matched grids realize the decreasing trend the
    // convergence statement is about.
    let mut lhs = Vec::with_capacity(eps_list.len());
    let mut gap = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let n_eps_f = (four / (eps * eps)).ceil().to_f64_lossy() as usize;
        let mut cells = [1usize; 2];
        for a in 0..mesh.dim {
            cells[a] = n_eps_f.clamp(2, mesh.cells[a]);
        }
        let eps_mesh = Mesh::new(mesh.dim, mesh.lo, mesh.hi, cells, mesh.periodic)?;
        let u_eps = u0.trace_sample(eps, eps * eps, &eps_mesh)?;
        let f_eps = f.trace_sample(eps, eps * eps, &eps_mesh)?;
        let pair = mass_pairing(&u_eps, &f_eps)?;
        lhs.push(pair);
        gap.push((pair - rhs).abs());
    }

    Ok(SigmaTestReport {
        eps_list: eps_list.to_vec(),
        lhs,
        rhs,
        gap,
    })
}

fn other_eval<R: Real>(xf: &crate::fields::XFactor<R>, x: [R; 2]) -> R {
    match xf {
        crate::fields::XFactor::One => R::one(),
        crate::fields::XFactor::Linear { grad, offset } => {
            *offset + grad[0] * x[0] + grad[1] * x[1]
        }
        crate::fields::XFactor::Trig(t) => t.eval(x),
        crate::fields::XFactor::Grid(f) => f.interp(x),
    }
}

/// Strong-variant check for a dictionary entry: verifies that closeness of
/// `u0` to `f` in the limit space forces closeness of the sampled traces.
/// Returns the per-epsilon trace distances.
pub fn strong_sigma_distances<R: Real>(
    u0: &MultiscaleField<R>,
    f: &MultiscaleField<R>,
    nf: &NFunction<R>,
    mesh: &Arc<Mesh<R>>,
    eps_list: &[R],
) -> Result<Vec<R>> {
    let mut out = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let a = u0.trace_sample(eps, eps * eps, mesh)?;
        let b = f.trace_sample(eps, eps * eps, mesh)?;
        let diff = Field::scalar(
            mesh.clone(),
            a.values
                .iter()
                .zip(&b.values)
                .map(|(&x, &y)| x - y)
                .collect(),
        )?;
        out.push(crate::fields::luxemburg_norm(&diff, nf)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::XFactor;
    use crate::scalar::two_pi;

    fn tau() -> f64 {
        two_pi::<f64>()
    }

    #[test]
    fn mean_examples() {
        // periodic sin^2(2 pi y) -> 1/2 via half-angle: 1/2 - cos(4 pi y)/2
        let p = TrigPoly::line(0.5, &[(2.0 * tau(), -0.5)], &[]);
        let u = AlgebraRep::periodic_trig(p).unwrap();
        assert!((mean(&u) - 0.5).abs() < 1e-14);

        let ap = AlgebraRep::almost_periodic(TrigPoly::line(
            0.3,
            &[(1.0, 1.0), (2.0_f64.sqrt(), 1.0)],
            &[],
        ));
        assert!((mean(&ap) - 0.3).abs() < 1e-14);

        let b = AlgebraRep::<f64>::b_infinity(1, 1.5, CoreFn::Gaussian { amp: 1.0 }, 5.0).unwrap();
        assert!((mean(&b) - 1.5).abs() < 1e-14);

        // grid representative: cell average
        let cell = Mesh::<f64>::unit_cell(1, 64).unwrap();
        let g = Field::from_fn(cell, |x| 2.0 + (tau() * x[0]).sin());
        let u = AlgebraRep::Periodic {
            dim: 1,
            data: PeriodicData::Grid(g),
        };
        assert!((mean(&u) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn b_infinity_rejects_slow_decay() {
        assert!(AlgebraRep::b_infinity(1, 0.0, CoreFn::Gaussian { amp: 1.0 }, 1.0).is_err());
    }

    #[test]
    fn mean_linear_monotone() {
        let p = TrigPoly::line(1.0, &[(tau(), 0.5)], &[]);
        let q = TrigPoly::line(0.2, &[], &[(tau(), 0.1)]);
        let sum = TrigPoly::line(1.2, &[(tau(), 0.5)], &[(tau(), 0.1)]);
        let (up, uq, us) = (
            AlgebraRep::periodic_trig(p).unwrap(),
            AlgebraRep::periodic_trig(q).unwrap(),
            AlgebraRep::periodic_trig(sum).unwrap(),
        );
        assert!((mean(&us) - mean(&up) - mean(&uq)).abs() < 1e-14);
        // mean(const) = const exactly
        let c = AlgebraRep::periodic_trig(TrigPoly::constant(1, 2.25)).unwrap();
        assert_eq!(mean(&c), 2.25);
    }

    #[test]
    fn reiterated_mean_examples() {
        let two_sin =
            |w: f64| AlgebraRep::periodic_trig(TrigPoly::line(2.0, &[], &[(w, 1.0)])).unwrap();
        // (2+sin 2 pi y) x (2+sin 2 pi z) -> 4
        let terms = vec![(two_sin(tau()), two_sin(tau()))];
        assert!((reiterated_mean(&terms) - 4.0).abs() < 1e-14);
        // 1 x 1 -> 1
        let one = AlgebraRep::periodic_trig(TrigPoly::<f64>::constant(1, 1.0)).unwrap();
        assert!((reiterated_mean(&[(one.clone(), one.clone())]) - 1.0).abs() < 1e-14);
        // cos(sqrt2 y) x sin^2(2 pi z) -> 0 * 0.5 = 0
        let apc = AlgebraRep::almost_periodic(TrigPoly::line(
            0.0,
            &[(2.0_f64.sqrt(), 1.0)],
            &[],
        ));
        let s2 = AlgebraRep::periodic_trig(TrigPoly::line(0.5, &[(2.0 * tau(), -0.5)], &[]))
            .unwrap();
        assert!(reiterated_mean(&[(apc, s2)]).abs() < 1e-14);
        // consistency: u(y) (x) 1 has reiterated mean = mean(u)
        let u = two_sin(tau());
        let m = mean(&u);
        assert!((reiterated_mean(&[(u, one)]) - m).abs() < 1e-14);
    }

    #[test]
    fn ergodic_average_periodic_full_periods() {
        let u =
            AlgebraRep::periodic_trig(TrigPoly::line(0.0, &[], &[(tau(), 1.0)])).unwrap();
        for r in [1.0_f64, 3.0, 7.0] {
            let avg = ergodic_average(&u, r, [0.0, 0.0]).unwrap();
            assert!(avg.abs() <= 1e-4, "r={r} avg={avg}");
        }
        let c = AlgebraRep::periodic_trig(TrigPoly::<f64>::constant(1, 2.5)).unwrap();
        assert!((ergodic_average(&c, 0.7, [0.3, 0.0]).unwrap() - 2.5).abs() < 1e-8);
        assert!(ergodic_average(&c, 0.0, [0.0, 0.0]).is_err());
    }

    #[test]
    fn ergodic_average_ap_decay() {
        let u = AlgebraRep::almost_periodic(TrigPoly::line(
            0.0,
            &[(1.0, 1.0), (2.0_f64.sqrt(), 1.0)],
            &[],
        ));
        let mut prev = f64::INFINITY;
        for r in [10.0_f64, 40.0, 160.0] {
            let avg = ergodic_average(&u, r, [1.0, 0.0]).unwrap();
            // closed-form oracle: cos(c) sin(r)/r + cos(sqrt2 c) sin(sqrt2 r)/(sqrt2 r)
            let c: f64 = 1.0;
            let oracle = c.cos() * r.sin() / r
                + (2.0_f64.sqrt() * c).cos() * (2.0_f64.sqrt() * r).sin() / (2.0_f64.sqrt() * r);
            assert!((avg - oracle).abs() < 1e-4, "r={r}");
            // decay envelope C/r with C = 2 (amplitudes sum to 2)
            assert!(avg.abs() <= 2.0 / r);
            assert!(avg.abs() < prev);
            prev = avg.abs();
        }
    }

    #[test]
    fn ergodic_average_center_uniformity() {
        let u = AlgebraRep::periodic_trig(TrigPoly::line(
            0.0,
            &[(tau(), 0.7)],
            &[(tau(), 0.4)],
        ))
        .unwrap();
        let r = 5.0;
        let a = ergodic_average(&u, r, [0.0, 0.0]).unwrap();
        let b = ergodic_average(&u, r, [0.37, 0.0]).unwrap();
        assert!((a - b).abs() <= 1e-4);
    }

    #[test]
    fn sigma_test_classic_oscillation() {
        let mesh = Mesh::<f64>::unit_cell(1, 512).unwrap();
        let mesh = Mesh::<f64>::interval(mesh.lo[0], mesh.hi[0], 512).unwrap();
        let sin_y = CellFactor::Trig(TrigPoly::line(0.0, &[], &[(tau(), 1.0)]));
        let u0 = MultiscaleField::separable(1, XFactor::One, sin_y.clone(), CellFactor::One);
        let f = MultiscaleField::separable(1, XFactor::One, sin_y, CellFactor::One);
        let eps = [0.25, 0.125];
        let rep = sigma_test(&u0, &f, &mesh, &eps).unwrap();
        assert!((rep.rhs - 0.5).abs() < 1e-12);
        for (i, &l) in rep.lhs.iter().enumerate() {
            assert!((l - 0.5).abs() < 0.05, "eps {} lhs {}", eps[i], l);
        }
        assert!(rep.trend_ok());
    }

    #[test]
    fn sigma_test_trivial_and_product() {
        let mesh = Mesh::<f64>::interval(0.0, 1.0, 512).unwrap();
        let one = MultiscaleField::constant(1, 1.0);
        let rep = sigma_test(&one, &one, &mesh, &[0.25, 0.125]).unwrap();
        for &l in &rep.lhs {
            assert!((l - 1.0).abs() < 1e-12);
        }
        assert!((rep.rhs - 1.0).abs() < 1e-14);

        // u0 = sin(2 pi y) x 1, f = 1 x sin(2 pi z): limit 0
        let u0 = MultiscaleField::separable(
            1,
            XFactor::One,
            CellFactor::Trig(TrigPoly::line(0.0, &[], &[(tau(), 1.0)])),
            CellFactor::One,
        );
        let f = MultiscaleField::separable(
            1,
            XFactor::One,
            CellFactor::One,
            CellFactor::Trig(TrigPoly::line(0.0, &[], &[(tau(), 1.0)])),
        );
        let rep = sigma_test(&u0, &f, &mesh, &[0.25, 0.125]).unwrap();
        assert_eq!(rep.rhs, 0.0);
        for &l in &rep.lhs {
            assert!(l.abs() < 0.05);
        }
    }

    #[test]
    fn sigma_test_resolution_guard() {
        let mesh = Mesh::<f64>::interval(0.0, 1.0, 32).unwrap();
        let one = MultiscaleField::constant(1, 1.0);
        // eps = 1/8 -> 4/eps^2 = 256 > 32
        assert!(matches!(
            sigma_test(&one, &one, &mesh, &[0.125]),
            Err(Error::Resolution(_))
        ));
        assert!(sigma_test(&one, &one, &mesh, &[]).is_err());
        assert!(sigma_test(&one, &one, &mesh, &[0.25, 0.25]).is_err());
    }

    #[test]
    fn sigma_gap_factor_two_decay() {
        // oscillation-resolving meshes per eps; the pairing gap decays ~ eps^2
        let sin_y = CellFactor::Trig(TrigPoly::line(0.0, &[], &[(tau(), 1.0)]));
        let u0 = MultiscaleField::separable(1, XFactor::One, sin_y.clone(), CellFactor::One);
        let f = MultiscaleField::separable(1, XFactor::One, sin_y, CellFactor::One);
        let gap_at = |eps: f64| -> f64 {
            let n = ((4.0 / (eps * eps)).ceil() as usize).max(64);
            let mesh = Mesh::<f64>::interval(0.0, 1.0, n).unwrap();
            let rep = sigma_test(&u0, &f, &mesh, &[eps]).unwrap();
            rep.gap[0]
        };
        let g_first = gap_at(0.25);
        let g_last = gap_at(1.0 / 64.0);
        assert!(g_first > 0.0);
        assert!(
            g_last * 2.0 <= g_first,
            "gap did not halve: {g_first} -> {g_last}"
        );
    }

    #[test]
    fn strong_sigma_dictionary_check() {
        let mesh = Mesh::<f64>::interval(0.0, 1.0, 512).unwrap();
        let nf = NFunction::power(2.0);
        let sin_y = CellFactor::Trig(TrigPoly::line(0.0, &[], &[(tau(), 1.0)]));
        let u0 = MultiscaleField::separable(1, XFactor::One, sin_y.clone(), CellFactor::One);
        // f = u0: distance zero, so the strong criterion holds with any eta
        let d = strong_sigma_distances(&u0, &u0, &nf, &mesh, &[0.25, 0.125]).unwrap();
        assert!(d.iter().all(|&v| v == 0.0));
        // dictionary entry at distance ~eta/2 keeps traces within eta
        let mut f2 = u0.clone();
        f2.terms.push(crate::fields::Term {
            coeff: 0.05,
            x: XFactor::One,
            y: CellFactor::One,
            z: CellFactor::One,
        });
        let eta = 0.2;
        let d = strong_sigma_distances(&u0, &f2, &nf, &mesh, &[0.25, 0.125]).unwrap();
        assert!(d.iter().all(|&v| v <= eta));
    }
}
