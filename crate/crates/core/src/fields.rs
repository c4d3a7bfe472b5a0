//! Multiscale test functions, the trace map `x -> f(x, x/e1, x/e2)`, and
//! Orlicz-norm evaluation on discrete fields.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{Field, FieldKind, Mesh};
use crate::nfunc::NFunction;
use crate::scalar::Real;
use crate::trig::TrigPoly;

/// Slow-variable factor of a separable term.
#[derive(Debug, Clone)]
pub enum XFactor<R: Real> {
    One,
    /// `offset + grad . x`
    Linear { grad: [R; 2], offset: R },
    Trig(TrigPoly<R>),
    /// Nodal samples on a box mesh; evaluation by multilinear interpolation.
    Grid(Field<R>),
}

impl<R: Real> XFactor<R> {
    fn eval(&self, x: [R; 2]) -> R {
        match self {
            XFactor::One => R::one(),
            XFactor::Linear { grad, offset } => *offset + grad[0] * x[0] + grad[1] * x[1],
            XFactor::Trig(t) => t.eval(x),
            XFactor::Grid(f) => f.interp(x),
        }
    }

    fn covers(&self, mesh: &Mesh<R>) -> bool {
        match self {
            XFactor::Grid(f) => {
                let eps = R::of(1e-12);
                (0..mesh.dim).all(|a| {
                    f.mesh.lo[a] <= mesh.lo[a] + eps && f.mesh.hi[a] >= mesh.hi[a] - eps
                })
            }
            _ => true,
        }
    }
}

/// Cell-variable factor (1-periodic grid data or a trigonometric sum).
#[derive(Debug, Clone)]
pub enum CellFactor<R: Real> {
    One,
    Trig(TrigPoly<R>),
    /// Values on a periodic unit-cell mesh.
    Grid(Field<R>),
}

impl<R: Real> CellFactor<R> {
    fn eval(&self, p: [R; 2]) -> R {
        match self {
            CellFactor::One => R::one(),
            CellFactor::Trig(t) => t.eval(p),
            CellFactor::Grid(f) => f.interp(p),
        }
    }

    pub fn is_one(&self) -> bool {
        matches!(self, CellFactor::One)
    }

    pub fn max_abs_freq(&self) -> R {
        match self {
            CellFactor::One => R::zero(),
            CellFactor::Trig(t) => t.max_abs_freq(),
            CellFactor::Grid(f) => {
                // grid data resolves frequencies up to ~ pi n
                R::PI() * R::from_usize_exact(f.mesh.cells[0])
            }
        }
    }
}

/// Separable term `coeff * g(x) * w(y) * v(z)`.
#[derive(Debug, Clone)]
pub struct Term<R: Real> {
    pub coeff: R,
    pub x: XFactor<R>,
    pub y: CellFactor<R>,
    pub z: CellFactor<R>,
}

/// A function of `(x, y, z)` represented as a finite sum of separable terms.
#[derive(Debug, Clone)]
pub struct MultiscaleField<R: Real> {
    pub dim: usize,
    pub terms: Vec<Term<R>>,
}

impl<R: Real> MultiscaleField<R> {
    pub fn new(dim: usize, terms: Vec<Term<R>>) -> Self {
        MultiscaleField { dim, terms }
    }

    pub fn constant(dim: usize, c: R) -> Self {
        MultiscaleField {
            dim,
            terms: vec![Term {
                coeff: c,
                x: XFactor::One,
                y: CellFactor::One,
                z: CellFactor::One,
            }],
        }
    }

    /// Single separable term.
    pub fn separable(dim: usize, x: XFactor<R>, y: CellFactor<R>, z: CellFactor<R>) -> Self {
        MultiscaleField {
            dim,
            terms: vec![Term {
                coeff: R::one(),
                x,
                y,
                z,
            }],
        }
    }

    pub fn eval(&self, x: [R; 2], y: [R; 2], z: [R; 2]) -> R {
        self.terms
            .iter()
            .fold(R::zero(), |acc, t| {
                acc + t.coeff * t.x.eval(x) * t.y.eval(y) * t.z.eval(z)
            })
    }

    pub fn has_y_block(&self) -> bool {
        self.terms.iter().any(|t| !t.y.is_one())
    }

    pub fn has_z_block(&self) -> bool {
        self.terms.iter().any(|t| !t.z.is_one())
    }

    /// Sample the trace `x -> f(x, x/eps1, x/eps2)` at the mesh nodes.
    pub fn trace_sample(&self, eps1: R, eps2: R, mesh: &Arc<Mesh<R>>) -> Result<Field<R>> {
        if !(eps2 < eps1 && eps1 <= R::one() && eps2 > R::zero()) {
            return Err(Error::Domain(format!(
                "trace scales need 0 < eps2 < eps1 <= 1, got ({eps1}, {eps2})"
            )));
        }
        for t in &self.terms {
            if !t.x.covers(mesh) {
                return Err(Error::Domain(
                    "mesh lies outside the x-domain of a grid factor".into(),
                ));
            }
        }
        let values = (0..mesh.node_count())
            .map(|i| {
                let x = mesh.node_coord(i);
                let y = [x[0] / eps1, x[1] / eps1];
                let z = [x[0] / eps2, x[1] / eps2];
                self.eval(x, y, z)
            })
            .collect();
        Field::scalar(mesh.clone(), values)
    }
}

/// Luxemburg norm `inf { d > 0 : integral F(|u|/d) <= 1 }` by bisection over
/// the documented bracket; nodal quadrature tied to the mesh.
pub fn luxemburg_norm<R: Real>(u: &Field<R>, nf: &NFunction<R>) -> Result<R> {
    if u.mesh.node_count() == 0 {
        return Err(Error::Domain("empty mesh".into()));
    }
    let max_u = u.max_magnitude();
    if max_u == R::zero() {
        return Ok(R::zero());
    }
    let w = u.mesh.quad_weights();
    let modular = |delta: R| -> Result<R> {
        let mut acc = R::zero();
        for i in 0..u.mesh.node_count() {
            let v = u.magnitude_at(i) / delta;
            let f = nf.evaluate(v)?;
            acc += f * w[i];
            if !acc.is_finite() {
                return Ok(R::infinity());
            }
        }
        Ok(acc)
    };
    let mut lo = max_u * R::of(1e-12);
    let mut hi = max_u * u.mesh.volume() * R::of(2.0);
    // widen if the documented bracket does not straddle the unit modular
    let mut guard = 0;
    while modular(hi)? > R::one() {
        hi = hi + hi;
        guard += 1;
        if guard > 60 {
            return Err(Error::Domain("luxemburg bracket widening failed".into()));
        }
    }
    if modular(lo)? <= R::one() {
        return Ok(lo);
    }
    for _ in 0..60 {
        let mid = (lo + hi) * R::of(0.5);
        if modular(mid)? > R::one() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo + hi) * R::of(0.5))
}

/// Generalized Holder pairing: returns `(|integral u v|, 2 ||u||_F ||v||_Fc)`.
pub fn holder_pairing<R: Real>(
    u: &Field<R>,
    v: &Field<R>,
    nf: &NFunction<R>,
) -> Result<(R, R)> {
    if u.mesh.as_ref() != v.mesh.as_ref() {
        return Err(Error::Shape("holder pairing needs a shared mesh".into()));
    }
    if u.kind != FieldKind::Scalar || v.kind != FieldKind::Scalar {
        return Err(Error::Kind("holder pairing expects scalar fields".into()));
    }
    let w = u.mesh.quad_weights();
    let mut lhs = R::zero();
    for i in 0..u.mesh.node_count() {
        lhs += u.values[i] * v.values[i] * w[i];
    }
    let conj = nf.complementary();
    let bound = R::of(2.0) * luxemburg_norm(u, nf)? * luxemburg_norm(v, &conj)?;
    Ok((lhs.abs(), bound))
}
