//! Structured meshes and nodal fields on boxes and periodic unit cells.

use std::io::Write;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Uniform tensor mesh, 1-D or 2-D, either on an axis-aligned box (with
/// boundary nodes) or on the periodic unit cell (opposite faces identified).
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh<R: Real> {
    pub dim: usize,
    pub lo: [R; 2],
    pub hi: [R; 2],
    pub cells: [usize; 2],
    pub periodic: bool,
}

impl<R: Real> Mesh<R> {
    pub fn interval(lo: R, hi: R, n: usize) -> Result<Arc<Self>> {
        Self::new(1, [lo, R::zero()], [hi, R::one()], [n, 1], false)
    }

    pub fn rectangle(lo: [R; 2], hi: [R; 2], n: [usize; 2]) -> Result<Arc<Self>> {
        Self::new(2, lo, hi, n, false)
    }

    /// Periodic unit cell `(0,1)^dim`.
    pub fn unit_cell(dim: usize, n: usize) -> Result<Arc<Self>> {
        Self::new(
            dim,
            [R::zero(), R::zero()],
            [R::one(), R::one()],
            [n, if dim == 2 { n } else { 1 }],
            true,
        )
    }

    pub fn new(
        dim: usize,
        lo: [R; 2],
        hi: [R; 2],
        cells: [usize; 2],
        periodic: bool,
    ) -> Result<Arc<Self>> {
        if dim != 1 && dim != 2 {
            return Err(Error::Domain(format!("mesh dim {dim} not in {{1,2}}")));
        }
        for a in 0..dim {
            if cells[a] < 2 {
                return Err(Error::Domain("mesh needs n >= 2 cells per axis".into()));
            }
            if hi[a] <= lo[a] {
                return Err(Error::Domain("mesh box must have positive extent".into()));
            }
        }
        Ok(Arc::new(Mesh {
            dim,
            lo,
            hi,
            cells,
            periodic,
        }))
    }

    pub fn spacing(&self, axis: usize) -> R {
        (self.hi[axis] - self.lo[axis]) / R::from_usize_exact(self.cells[axis])
    }

    /// Nodes along an axis: `n` when periodic (the wrap node is identified),
    /// `n + 1` otherwise.
    pub fn nodes_axis(&self, axis: usize) -> usize {
        if self.periodic {
            self.cells[axis]
        } else {
            self.cells[axis] + 1
        }
    }

    pub fn node_count(&self) -> usize {
        (0..self.dim).map(|a| self.nodes_axis(a)).product()
    }

    pub fn volume(&self) -> R {
        (0..self.dim)
            .map(|a| self.hi[a] - self.lo[a])
            .fold(R::one(), |p, e| p * e)
    }

    pub fn node_index(&self, idx: [usize; 2]) -> usize {
        idx[0] + idx[1] * self.nodes_axis(0)
    }

    pub fn node_multi_index(&self, node: usize) -> [usize; 2] {
        let n0 = self.nodes_axis(0);
        [node % n0, node / n0]
    }

    pub fn node_coord(&self, node: usize) -> [R; 2] {
        let mi = self.node_multi_index(node);
        let mut x = [R::zero(); 2];
        for a in 0..self.dim {
            x[a] = self.lo[a] + self.spacing(a) * R::from_usize_exact(mi[a]);
        }
        x
    }

    pub fn is_boundary_node(&self, node: usize) -> bool {
        if self.periodic {
            return false;
        }
        let mi = self.node_multi_index(node);
        (0..self.dim).any(|a| mi[a] == 0 || mi[a] == self.cells[a])
    }

    /// Nodal quadrature weights: trapezoid on boxes, equal weights on the
    /// periodic cell (where the rule is the full-accuracy rectangle rule).
    pub fn quad_weights(&self) -> Vec<R> {
        let n = self.node_count();
        let mut w = vec![R::one(); n];
        for node in 0..n {
            let mi = self.node_multi_index(node);
            for a in 0..self.dim {
                let h = self.spacing(a);
                let wa = if self.periodic {
                    h
                } else if mi[a] == 0 || mi[a] == self.cells[a] {
                    h * R::of(0.5)
                } else {
                    h
                };
                w[node] *= wa;
            }
        }
        w
    }

    /// Sum of cell volumes (equals the box volume for the uniform mesh up to
    /// rounding; exposed for the mesh invariant check).
    pub fn cell_volume_sum(&self) -> R {
        let per_cell = (0..self.dim).map(|a| self.spacing(a)).fold(R::one(), |p, h| p * h);
        let n_cells: usize = (0..self.dim).map(|a| self.cells[a]).product();
        per_cell * R::from_usize_exact(n_cells)
    }

    /// Multilinear interpolation weights of a point, periodic wrap or clamped
    /// to the box. Returns (corner node ids, weights).
    pub fn interp_stencil(&self, x: [R; 2]) -> ([usize; 4], [R; 4]) {
        let mut base = [0usize; 2];
        let mut frac = [R::zero(); 2];
        for a in 0..self.dim {
            let h = self.spacing(a);
            let mut t = (x[a] - self.lo[a]) / h;
            let n = R::from_usize_exact(self.cells[a]);
            if self.periodic {
                t = t - (t / n).floor() * n;
            } else {
                t = t.max(R::zero()).min(n);
            }
            let mut i = t.floor().to_f64_lossy() as usize;
            if i >= self.cells[a] {
                i = self.cells[a] - 1;
            }
            base[a] = i;
            frac[a] = t - R::from_usize_exact(i);
        }
        let next = |a: usize, i: usize| -> usize {
            if self.periodic {
                (i + 1) % self.cells[a]
            } else {
                i + 1
            }
        };
        if self.dim == 1 {
            let i0 = base[0];
            let i1 = next(0, i0);
            (
                [i0, i1, 0, 0],
                [R::one() - frac[0], frac[0], R::zero(), R::zero()],
            )
        } else {
            let (i0, j0) = (base[0], base[1]);
            let (i1, j1) = (next(0, i0), next(1, j0));
            let (fx, fy) = (frac[0], frac[1]);
            let one = R::one();
            (
                [
                    self.node_index([i0, j0]),
                    self.node_index([i1, j0]),
                    self.node_index([i0, j1]),
                    self.node_index([i1, j1]),
                ],
                [
                    (one - fx) * (one - fy),
                    fx * (one - fy),
                    (one - fx) * fy,
                    fx * fy,
                ],
            )
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Scalar,
    Vector,
}

/// Nodal field: scalar values or per-node vectors (interleaved components).
#[derive(Debug, Clone)]
pub struct Field<R: Real> {
    pub mesh: Arc<Mesh<R>>,
    pub kind: FieldKind,
    pub values: Vec<R>,
}

impl<R: Real> Field<R> {
    pub fn scalar(mesh: Arc<Mesh<R>>, values: Vec<R>) -> Result<Self> {
        if values.len() != mesh.node_count() {
            return Err(Error::Shape(format!(
                "field length {} != node count {}",
                values.len(),
                mesh.node_count()
            )));
        }
        Ok(Field {
            mesh,
            kind: FieldKind::Scalar,
            values,
        })
    }

    pub fn vector(mesh: Arc<Mesh<R>>, values: Vec<R>) -> Result<Self> {
        if values.len() != mesh.node_count() * mesh.dim {
            return Err(Error::Shape("vector field length mismatch".into()));
        }
        Ok(Field {
            mesh,
            kind: FieldKind::Vector,
            values,
        })
    }

    pub fn zeros(mesh: Arc<Mesh<R>>) -> Self {
        let n = mesh.node_count();
        Field {
            mesh,
            kind: FieldKind::Scalar,
            values: vec![R::zero(); n],
        }
    }

    pub fn constant(mesh: Arc<Mesh<R>>, c: R) -> Self {
        let n = mesh.node_count();
        Field {
            mesh,
            kind: FieldKind::Scalar,
            values: vec![c; n],
        }
    }

    pub fn from_fn(mesh: Arc<Mesh<R>>, f: impl Fn([R; 2]) -> R) -> Self {
        let values = (0..mesh.node_count())
            .map(|i| f(mesh.node_coord(i)))
            .collect();
        Field {
            mesh,
            kind: FieldKind::Scalar,
            values,
        }
    }

    /// Pointwise magnitude: |value| for scalars, Euclidean norm for vectors.
    pub fn magnitude_at(&self, node: usize) -> R {
        match self.kind {
            FieldKind::Scalar => self.values[node].abs(),
            FieldKind::Vector => {
                let d = self.mesh.dim;
                let mut s = R::zero();
                for a in 0..d {
                    let v = self.values[node * d + a];
                    s += v * v;
                }
                s.sqrt()
            }
        }
    }

    pub fn max_magnitude(&self) -> R {
        (0..self.mesh.node_count())
            .map(|i| self.magnitude_at(i))
            .fold(R::zero(), |m, v| m.max(v))
    }

    /// Nodal quadrature of the field (scalar only).
    pub fn integrate(&self) -> Result<R> {
        if self.kind != FieldKind::Scalar {
            return Err(Error::Kind("integrate expects a scalar field".into()));
        }
        let w = self.mesh.quad_weights();
        Ok(self
            .values
            .iter()
            .zip(&w)
            .fold(R::zero(), |acc, (&v, &wi)| acc + v * wi))
    }

    pub fn mean(&self) -> Result<R> {
        Ok(self.integrate()? / self.mesh.volume())
    }

    /// Multilinear interpolation (scalar field).
    pub fn interp(&self, x: [R; 2]) -> R {
        let (ids, w) = self.mesh.interp_stencil(x);
        let k = if self.mesh.dim == 1 { 2 } else { 4 };
        let mut acc = R::zero();
        for c in 0..k {
            acc += self.values[ids[c]] * w[c];
        }
        acc
    }

    /// Interpolate one component of a vector field.
    pub fn interp_component(&self, x: [R; 2], comp: usize) -> R {
        let d = self.mesh.dim;
        let (ids, w) = self.mesh.interp_stencil(x);
        let k = if d == 1 { 2 } else { 4 };
        let mut acc = R::zero();
        for c in 0..k {
            acc += self.values[ids[c] * d + comp] * w[c];
        }
        acc
    }

    /// Central-difference gradient; periodic wrap on cells, second-order
    /// one-sided stencils at box boundaries.
    pub fn gradient(&self) -> Result<Field<R>> {
        if self.kind != FieldKind::Scalar {
            return Err(Error::Kind("gradient expects a scalar field".into()));
        }
        let mesh = &self.mesh;
        let d = mesh.dim;
        let n = mesh.node_count();
        let mut out = vec![R::zero(); n * d];
        let half = R::of(0.5);
        for node in 0..n {
            let mi = mesh.node_multi_index(node);
            for a in 0..d {
                let h = mesh.spacing(a);
                let na = mesh.nodes_axis(a);
                let at = |i: usize| -> R {
                    let mut mj = mi;
                    mj[a] = i;
                    self.values[mesh.node_index(mj)]
                };
                let i = mi[a];
                let g = if mesh.periodic {
                    let ip = (i + 1) % na;
                    let im = (i + na - 1) % na;
                    (at(ip) - at(im)) * half / h
                } else if i == 0 {
                    (-R::of(3.0) * at(0) + R::of(4.0) * at(1) - at(2)) * half / h
                } else if i == na - 1 {
                    (R::of(3.0) * at(i) - R::of(4.0) * at(i - 1) + at(i - 2)) * half / h
                } else {
                    (at(i + 1) - at(i - 1)) * half / h
                };
                out[node * d + a] = g;
            }
        }
        Field::vector(self.mesh.clone(), out)
    }

    /// Extract one component of a vector field as a scalar field.
    pub fn component(&self, comp: usize) -> Result<Field<R>> {
        if self.kind != FieldKind::Vector {
            return Err(Error::Kind("component expects a vector field".into()));
        }
        let d = self.mesh.dim;
        let vals = (0..self.mesh.node_count())
            .map(|i| self.values[i * d + comp])
            .collect();
        Field::scalar(self.mesh.clone(), vals)
    }

    /// Serialize to CSV: `# reiterhom field v1 dim=<d> n=<n> periodic=<0|1>`
    /// then `x[,y],value` rows (value columns per component for vectors).
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        let m = &self.mesh;
        writeln!(
            out,
            "# reiterhom field v1 dim={} n={} periodic={}",
            m.dim,
            m.cells[0],
            if m.periodic { 1 } else { 0 }
        )?;
        let comps = match self.kind {
            FieldKind::Scalar => 1,
            FieldKind::Vector => m.dim,
        };
        for node in 0..m.node_count() {
            let x = m.node_coord(node);
            for a in 0..m.dim {
                write!(out, "{:.12e},", x[a].to_f64_lossy())?;
            }
            for c in 0..comps {
                if c > 0 {
                    write!(out, ",")?;
                }
                write!(out, "{:.12e}", self.values[node * comps + c].to_f64_lossy())?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Exact integral of the product of the two fields' multilinear interpolants
/// (the consistent mass pairing). This is the quadrature used by the weak
/// reiterated convergence tester: unlike the nodal rule it is not blind to
/// sub-cell oscillation, so its gap against the limit decays with resolution
/// instead of collapsing to rounding noise.
pub fn mass_pairing<R: Real>(u: &Field<R>, v: &Field<R>) -> Result<R> {
    if u.mesh.as_ref() != v.mesh.as_ref() {
        return Err(Error::Shape("mass pairing needs a shared mesh".into()));
    }
    if u.kind != FieldKind::Scalar || v.kind != FieldKind::Scalar {
        return Err(Error::Kind("mass pairing expects scalar fields".into()));
    }
    let mesh = &u.mesh;
    let wrap = |i: usize, n_nodes: usize| -> usize {
        if mesh.periodic {
            i % n_nodes
        } else {
            i
        }
    };
    let mut acc = R::zero();
    match mesh.dim {
        1 => {
            let h = mesh.spacing(0);
            let n0 = mesh.nodes_axis(0);
            let sixth = h / R::of(6.0);
            for c in 0..mesh.cells[0] {
                let i0 = c;
                let i1 = wrap(c + 1, n0);
                let (u0, u1) = (u.values[i0], u.values[i1]);
                let (v0, v1) = (v.values[i0], v.values[i1]);
                acc += sixth * (R::of(2.0) * (u0 * v0 + u1 * v1) + u0 * v1 + u1 * v0);
            }
        }
        2 => {
            let (hx, hy) = (mesh.spacing(0), mesh.spacing(1));
            let scale = hx * hy / R::of(36.0);
            let n0 = mesh.nodes_axis(0);
            let n1 = mesh.nodes_axis(1);
            // bilinear element mass matrix (corner order 00,10,01,11)
            let mrow: [[f64; 4]; 4] = [
                [4.0, 2.0, 2.0, 1.0],
                [2.0, 4.0, 1.0, 2.0],
                [2.0, 1.0, 4.0, 2.0],
                [1.0, 2.0, 2.0, 4.0],
            ];
            for cy in 0..mesh.cells[1] {
                for cx in 0..mesh.cells[0] {
                    let ids = [
                        mesh.node_index([cx, cy]),
                        mesh.node_index([wrap(cx + 1, n0), cy]),
                        mesh.node_index([cx, wrap(cy + 1, n1)]),
                        mesh.node_index([wrap(cx + 1, n0), wrap(cy + 1, n1)]),
                    ];
                    for r in 0..4 {
                        for c in 0..4 {
                            acc += scale * R::of(mrow[r][c]) * u.values[ids[r]] * v.values[ids[c]];
                        }
                    }
                }
            }
        }
        _ => unreachable!(),
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mesh_invariants() {
        let m = Mesh::<f64>::interval(0.0, 1.0, 64).unwrap();
        assert_eq!(m.node_count(), 65);
        assert!((m.cell_volume_sum() - 1.0).abs() < 1e-12);
        let c = Mesh::<f64>::unit_cell(2, 8).unwrap();
        assert_eq!(c.node_count(), 64);
        assert!((c.cell_volume_sum() - 1.0).abs() < 1e-12);
        assert!(Mesh::<f64>::interval(0.0, 1.0, 1).is_err());
    }

    #[test]
    fn gradient_linear_exact() {
        let m = Mesh::<f64>::interval(0.0, 1.0, 32).unwrap();
        let u = Field::from_fn(m.clone(), |x| x[0]);
        let g = u.gradient().unwrap();
        for i in 0..m.node_count() {
            assert!((g.values[i] - 1.0).abs() < 1e-10, "node {i}");
        }
        let c = Field::constant(m, 3.5);
        let g = c.gradient().unwrap();
        assert!(g.values.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn gradient_periodic_second_order() {
        let m = Mesh::<f64>::unit_cell(1, 256).unwrap();
        let tau = std::f64::consts::TAU;
        let u = Field::from_fn(m.clone(), |x| (tau * x[0]).sin());
        let g = u.gradient().unwrap();
        let mut max_err = 0.0_f64;
        for i in 0..m.node_count() {
            let x = m.node_coord(i)[0];
            max_err = max_err.max((g.values[i] - tau * (tau * x).cos()).abs());
        }
        assert!(max_err <= 1e-3, "max err {max_err}");
    }

    #[test]
    fn gradient_rejects_vector_input() {
        let m = Mesh::<f64>::interval(0.0, 1.0, 4).unwrap();
        let v = Field::vector(m.clone(), vec![0.0; 5]).unwrap();
        assert!(matches!(v.gradient(), Err(Error::Kind(_))));
    }

    #[test]
    fn mass_pairing_constant_and_linear() {
        let m = Mesh::<f64>::interval(0.0, 1.0, 16).unwrap();
        let one = Field::constant(m.clone(), 1.0);
        assert!((mass_pairing(&one, &one).unwrap() - 1.0).abs() < 1e-14);
        let x = Field::from_fn(m.clone(), |x| x[0]);
        // integral of x^2 on (0,1) is 1/3; P1 interpolant of x is exact
        assert!((mass_pairing(&x, &x).unwrap() - 1.0 / 3.0).abs() < 1e-3);
        let m2 = Mesh::<f64>::interval(0.0, 1.0, 17).unwrap();
        let other = Field::constant(m2, 1.0);
        assert!(mass_pairing(&one, &other).is_err());
    }

    #[test]
    fn csv_header_and_rows() {
        let m = Mesh::<f64>::interval(0.0, 1.0, 2).unwrap();
        let u = Field::from_fn(m, |x| x[0]);
        let mut buf = Vec::new();
        u.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "# reiterhom field v1 dim=1 n=2 periodic=0"
        );
        assert_eq!(lines.count(), 3);
    }
}
