//! Nested periodic cell problems and effective-flux upscaling: the fast-cell
//! corrector, the per-point effective flux `h`, the intermediate-cell
//! corrector driven by `h`, the macroscopic flux `q`, and its tabulation.

use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};

use rayon::prelude::*;

use crate::coeff::Coefficient;
use crate::error::{Error, Result};
use crate::linalg::{cg_jacobi, Csr};
use crate::mesh::{Field, Mesh};
use crate::scalar::Real;

/// Default residual tolerances (2-norm of the assembled residual).
pub const TOL_LINEAR: f64 = 1e-10;
pub const TOL_NONLINEAR: f64 = 1e-8;

/// Cache key quantization of states and gradients.
const KEY_QUANTUM: f64 = 1e-8;

/// Entry budget for the h-evaluation caches.
pub const H_CACHE_BUDGET: usize = 1_000_000;

/// Angles resolving the unit sphere for positively homogeneous base fluxes.
const SPHERE_ANGLES: usize = 64;

/// A solved periodic cell problem.
#[derive(Debug, Clone)]
pub struct CellSolution<R: Real> {
    /// Zero-mean corrector on the cell mesh.
    pub corrector: Field<R>,
    /// 2-norm of the discrete variational residual at the solution.
    pub residual: R,
    /// Cell average of the corrected flux (the effective flux at this state).
    pub flux_sample: [R; 2],
    pub newton_iters: usize,
}

type FluxFn<'a, R> = dyn Fn([R; 2], [R; 2]) -> [R; 2] + Sync + 'a;
type JacFn<'a, R> = dyn Fn([R; 2], [R; 2]) -> [[R; 2]; 2] + Sync + 'a;

/// Quadrature data of a periodic cell mesh: flux evaluation points and the
/// gradient stencil of each point.
pub(crate) struct CellQuad<R: Real> {
    pub points: Vec<[R; 2]>,
    pub nodes: Vec<[usize; 4]>,
    pub grads: Vec<[[R; 2]; 4]>,
    pub weight: R,
    pub nodes_per_point: usize,
    pub dim: usize,
}

impl<R: Real> CellQuad<R> {
    pub(crate) fn build(mesh: &Mesh<R>) -> Result<Self> {
        if !mesh.periodic {
            return Err(Error::Domain("cell problems need a periodic mesh".into()));
        }
        let h = mesh.spacing(0);
        match mesh.dim {
            1 => {
                let n = mesh.cells[0];
                let mut points = Vec::with_capacity(n);
                let mut nodes = Vec::with_capacity(n);
                let mut grads = Vec::with_capacity(n);
                let inv_h = R::one() / h;
                for j in 0..n {
                    let mid = (R::from_usize_exact(j) + R::of(0.5)) * h;
                    points.push([mid, R::zero()]);
                    nodes.push([j, (j + 1) % n, 0, 0]);
                    grads.push([
                        [-inv_h, R::zero()],
                        [inv_h, R::zero()],
                        [R::zero(); 2],
                        [R::zero(); 2],
                    ]);
                }
                Ok(CellQuad {
                    points,
                    nodes,
                    grads,
                    weight: h,
                    nodes_per_point: 2,
                    dim: 1,
                })
            }
            2 => {
                let n = mesh.cells[0];
                let g = (R::one() - R::one() / R::of(3.0).sqrt()) * R::of(0.5);
                let gauss = [
                    (g, g),
                    (R::one() - g, g),
                    (g, R::one() - g),
                    (R::one() - g, R::one() - g),
                ];
                let count = n * n * 4;
                let mut points = Vec::with_capacity(count);
                let mut nodes = Vec::with_capacity(count);
                let mut grads = Vec::with_capacity(count);
                let inv_h = R::one() / h;
                for cy in 0..n {
                    for cx in 0..n {
                        let ids = [
                            mesh.node_index([cx, cy]),
                            mesh.node_index([(cx + 1) % n, cy]),
                            mesh.node_index([cx, (cy + 1) % n]),
                            mesh.node_index([(cx + 1) % n, (cy + 1) % n]),
                        ];
                        for &(gx, gy) in &gauss {
                            let px = (R::from_usize_exact(cx) + gx) * h;
                            let py = (R::from_usize_exact(cy) + gy) * h;
                            points.push([px, py]);
                            nodes.push(ids);
                            let one = R::one();
                            grads.push([
                                [-(one - gy) * inv_h, -(one - gx) * inv_h],
                                [(one - gy) * inv_h, -gx * inv_h],
                                [-gy * inv_h, (one - gx) * inv_h],
                                [gy * inv_h, gx * inv_h],
                            ]);
                        }
                    }
                }
                Ok(CellQuad {
                    points,
                    nodes,
                    grads,
                    weight: h * h / R::of(4.0),
                    nodes_per_point: 4,
                    dim: 2,
                })
            }
            d => Err(Error::Domain(format!("cell dim {d}"))),
        }
    }

    pub(crate) fn gradients(&self, values: &[R]) -> Vec<[R; 2]> {
        let mut out = vec![[R::zero(); 2]; self.points.len()];
        for (q, grad) in out.iter_mut().enumerate() {
            for c in 0..self.nodes_per_point {
                let v = values[self.nodes[q][c]];
                for a in 0..self.dim {
                    grad[a] += self.grads[q][c][a] * v;
                }
            }
        }
        out
    }
}

fn l2_norm<R: Real>(v: &[R]) -> R {
    v.iter().fold(R::zero(), |s, &x| s + x * x).sqrt()
}

fn project_zero_mean<R: Real>(v: &mut [R]) {
    let m = v.iter().fold(R::zero(), |s, &x| s + x) / R::from_usize_exact(v.len());
    for x in v.iter_mut() {
        *x -= m;
    }
}

enum JacMode {
    Full,
    /// Picard: frozen positive scalar per quadrature point.
    FrozenScalar,
}

/// Damped Newton on the discrete variational cell problem
/// `sum_q w b(z_q, xi + grad pi_q) . grad theta = 0` with zero-mean iterates.
fn newton_periodic_cell<R: Real>(
    mesh: &Arc<Mesh<R>>,
    xi: [R; 2],
    flux: &FluxFn<'_, R>,
    jac: &JacFn<'_, R>,
    tol: R,
    initial: Option<&[R]>,
    context: &str,
) -> Result<CellSolution<R>> {
    let quad = CellQuad::build(mesh)?;
    let n = mesh.node_count();
    let dim = mesh.dim;
    let max_newton = 30;

    let residual = |values: &[R]| -> Vec<R> {
        let grads = quad.gradients(values);
        let mut r = vec![R::zero(); n];
        for q in 0..quad.points.len() {
            let mut total = [R::zero(); 2];
            for a in 0..dim {
                total[a] = xi[a] + grads[q][a];
            }
            let f = flux(quad.points[q], total);
            for c in 0..quad.nodes_per_point {
                let mut acc = R::zero();
                for a in 0..dim {
                    acc += f[a] * quad.grads[q][c][a];
                }
                r[quad.nodes[q][c]] += acc * quad.weight;
            }
        }
        r
    };

    // returns the operator and, in Picard mode, how many quadrature points
    // exposed a negative flux-gradient pairing (a non-coercive state)
    let assemble = |values: &[R], mode: &JacMode| -> (Csr<R>, usize) {
        let grads = quad.gradients(values);
        let mut negative = 0usize;
        let mut trip: Vec<(usize, usize, R)> =
            Vec::with_capacity(quad.points.len() * quad.nodes_per_point * quad.nodes_per_point);
        for q in 0..quad.points.len() {
            let mut total = [R::zero(); 2];
            for a in 0..dim {
                total[a] = xi[a] + grads[q][a];
            }
            let j = match mode {
                JacMode::Full => jac(quad.points[q], total),
                JacMode::FrozenScalar => {
                    let f = flux(quad.points[q], total);
                    let mut num = R::zero();
                    let mut den = R::zero();
                    for a in 0..dim {
                        num += f[a] * total[a];
                        den += total[a] * total[a];
                    }
                    let s = if den > R::of(1e-28) {
                        let quot = num / den;
                        if quot < R::zero() {
                            negative += 1;
                        }
                        quot.max(R::of(1e-12))
                    } else {
                        R::one()
                    };
                    let mut m = [[R::zero(); 2]; 2];
                    for a in 0..dim {
                        m[a][a] = s;
                    }
                    m
                }
            };
            for row in 0..quad.nodes_per_point {
                for col in 0..quad.nodes_per_point {
                    let mut acc = R::zero();
                    for a in 0..dim {
                        for b in 0..dim {
                            acc += quad.grads[q][row][a] * j[a][b] * quad.grads[q][col][b];
                        }
                    }
                    trip.push((quad.nodes[q][row], quad.nodes[q][col], acc * quad.weight));
                }
            }
        }
        (Csr::from_triplets(n, &mut trip), negative)
    };

    let flux_average = |values: &[R]| -> [R; 2] {
        let grads = quad.gradients(values);
        let mut acc = [R::zero(); 2];
        for q in 0..quad.points.len() {
            let mut total = [R::zero(); 2];
            for a in 0..dim {
                total[a] = xi[a] + grads[q][a];
            }
            let f = flux(quad.points[q], total);
            for a in 0..dim {
                acc[a] += f[a] * quad.weight;
            }
        }
        acc
    };

    let mut values = match initial {
        Some(v) if v.len() == n => {
            let mut v = v.to_vec();
            project_zero_mean(&mut v);
            v
        }
        _ => vec![R::zero(); n],
    };
    let mut r = residual(&values);
    let mut r_norm = l2_norm(&r);
    if !r_norm.is_finite() {
        return Err(Error::Solver {
            context: format!("{context}: non-finite residual at start"),
            residual: f64::NAN,
        });
    }
    let mut iters = 0usize;
    let mut picard = false;

    while r_norm > tol {
        if iters >= max_newton {
            return Err(Error::Solver {
                context: format!("{context}: newton stalled"),
                residual: r_norm.to_f64_lossy(),
            });
        }
        let (a, negative) = assemble(
            &values,
            if picard {
                &JacMode::FrozenScalar
            } else {
                &JacMode::Full
            },
        );
        if picard && 2 * negative > quad.points.len() {
            return Err(Error::Coercivity(context.to_string()));
        }
        let rhs: Vec<R> = r.iter().map(|&x| -x).collect();
        let mut delta = vec![R::zero(); n];
        let out = cg_jacobi(&a, &rhs, &mut delta, R::of(1e-12), 10 * n, true);
        if out.indefinite {
            if picard {
                return Err(Error::Coercivity(context.to_string()));
            }
            picard = true;
            continue;
        }
        // Armijo backtracking on the residual norm
        let mut alpha = R::one();
        let mut accepted = false;
        for _ in 0..=30 {
            let mut trial = values.clone();
            for i in 0..n {
                trial[i] += alpha * delta[i];
            }
            project_zero_mean(&mut trial);
            let r_trial = residual(&trial);
            let t_norm = l2_norm(&r_trial);
            if t_norm.is_finite() && t_norm <= (R::one() - R::of(1e-4) * alpha) * r_norm {
                values = trial;
                r = r_trial;
                r_norm = t_norm;
                accepted = true;
                break;
            }
            alpha *= R::of(0.5);
        }
        if !accepted {
            if !picard {
                picard = true;
                continue;
            }
            return Err(Error::Solver {
                context: format!("{context}: line search exhausted"),
                residual: r_norm.to_f64_lossy(),
            });
        }
        iters += 1;
    }

    project_zero_mean(&mut values);
    let flux_sample = flux_average(&values);
    Ok(CellSolution {
        corrector: Field::scalar(mesh.clone(), values)?,
        residual: r_norm,
        flux_sample,
        newton_iters: iters,
    })
}

fn cell_tol<R: Real>(coeff: &Coefficient<R>) -> R {
    if coeff.linear_in_lambda() {
        R::of(TOL_LINEAR)
    } else {
        R::of(TOL_NONLINEAR)
    }
}

/// Fast-cell corrector at intermediate point `y`, state `(r, xi)`:
/// zero-mean `pi` solving the discrete form of the fast cell problem; the
/// flux sample is the effective flux `h(y, r, xi)`.
pub fn solve_cell_z<R: Real>(
    coeff: &Coefficient<R>,
    y: [R; 2],
    r: R,
    xi: [R; 2],
    mesh_z: &Arc<Mesh<R>>,
) -> Result<CellSolution<R>> {
    let flux = |z: [R; 2], grad: [R; 2]| coeff.cell_flux(y, z, r, grad);
    let jac = |z: [R; 2], grad: [R; 2]| coeff.cell_flux_jacobian(y, z, r, grad);
    newton_periodic_cell(
        mesh_z,
        xi,
        &flux,
        &jac,
        cell_tol(coeff),
        None,
        &format!("cell_z[{}]", coeff.name),
    )
}

/// Effective flux `h(y, r, xi)`: the flux sample of the fast-cell solve.
pub fn effective_h<R: Real>(
    coeff: &Coefficient<R>,
    y: [R; 2],
    r: R,
    xi: [R; 2],
    mesh_z: &Arc<Mesh<R>>,
) -> Result<[R; 2]> {
    Ok(solve_cell_z(coeff, y, r, xi, mesh_z)?.flux_sample)
}

fn quantize<R: Real>(v: R) -> i64 {
    (v.to_f64_lossy() / KEY_QUANTUM).round() as i64
}

type EtaKey = (i64, i64);
type FullKey = (i64, i64, i64, i64, i64);

#[derive(Clone)]
pub(crate) struct BaseSolve<R: Real> {
    pub h: [R; 2],
    pub corrector: Vec<R>,
}

struct SphereTable<R: Real> {
    entries: Vec<BaseSolve<R>>,
}

/// Evaluator of `h(y, r, eta)` backed by fast-cell solves with memoization.
///
/// When the flux factorizes as `sigma(y, r) g(z, lambda)` the base corrector
/// is independent of `(y, r)` and one cache serves the whole intermediate
/// cell; positive homogeneity of `g` further reduces the cache to the unit
/// sphere. Both reductions are exact identities of the variational problem
/// (sphere entries are interpolated in angle only). Caches are safe for
/// concurrent insert-or-read.
pub struct HEvaluator<R: Real> {
    pub coeff: Coefficient<R>,
    pub mesh_z: Arc<Mesh<R>>,
    tol: R,
    base_cache: Mutex<HashMap<EtaKey, BaseSolve<R>>>,
    linear_basis: Mutex<Option<Vec<BaseSolve<R>>>>,
    sphere: Mutex<Option<Arc<SphereTable<R>>>>,
    full_cache: Mutex<HashMap<FullKey, BaseSolve<R>>>,
}

impl<R: Real> HEvaluator<R> {
    pub fn new(coeff: &Coefficient<R>, mesh_z: &Arc<Mesh<R>>) -> Self {
        HEvaluator {
            tol: cell_tol(coeff),
            coeff: coeff.clone(),
            mesh_z: mesh_z.clone(),
            base_cache: Mutex::new(HashMap::new()),
            linear_basis: Mutex::new(None),
            sphere: Mutex::new(None),
            full_cache: Mutex::new(HashMap::new()),
        }
    }

    fn solve_base(&self, eta: [R; 2]) -> Result<BaseSolve<R>> {
        self.solve_base_from(eta, None)
    }

    fn solve_base_from(&self, eta: [R; 2], initial: Option<&[R]>) -> Result<BaseSolve<R>> {
        let coeff = &self.coeff;
        let flux = |z: [R; 2], grad: [R; 2]| coeff.base_z_flux(z, grad);
        let jac = |z: [R; 2], grad: [R; 2]| coeff.base_z_jacobian(z, grad);
        let sol = newton_periodic_cell(
            &self.mesh_z,
            eta,
            &flux,
            &jac,
            self.tol,
            initial,
            &format!("cell_z_base[{}]", coeff.name),
        )?;
        Ok(BaseSolve {
            h: sol.flux_sample,
            corrector: sol.corrector.values,
        })
    }

    fn linear_basis_solves(&self) -> Result<Vec<BaseSolve<R>>> {
        let mut guard = self.linear_basis.lock().unwrap();
        if guard.is_none() {
            let d = self.coeff.dim;
            let mut basis = Vec::with_capacity(d);
            for a in 0..d {
                let mut e = [R::zero(); 2];
                e[a] = R::one();
                basis.push(self.solve_base(e)?);
            }
            *guard = Some(basis);
        }
        Ok(guard.as_ref().unwrap().clone())
    }

    fn sphere_table(&self) -> Result<Arc<SphereTable<R>>> {
        {
            let guard = self.sphere.lock().unwrap();
            if let Some(t) = guard.as_ref() {
                return Ok(t.clone());
            }
        }
        // built outside the lock: a racing builder produces the same table
        // (warm starts walk the sphere sequentially in a fixed order)
        let d = self.coeff.dim;
        let entries: Result<Vec<BaseSolve<R>>> = if d == 1 {
            [R::one(), -R::one()]
                .iter()
                .map(|&s| self.solve_base([s, R::zero()]))
                .collect()
        } else {
            let tau = crate::scalar::two_pi::<R>();
            let mut out: Vec<BaseSolve<R>> = Vec::with_capacity(SPHERE_ANGLES);
            for k in 0..SPHERE_ANGLES {
                let th = tau * R::from_usize_exact(k) / R::from_usize_exact(SPHERE_ANGLES);
                let warm = out.last().map(|e: &BaseSolve<R>| e.corrector.as_slice());
                out.push(self.solve_base_from([th.cos(), th.sin()], warm)?);
            }
            Ok(out)
        };
        let table = Arc::new(SphereTable { entries: entries? });
        let mut guard = self.sphere.lock().unwrap();
        if guard.is_none() {
            *guard = Some(table);
        }
        Ok(guard.as_ref().unwrap().clone())
    }

    /// Base effective flux only (no corrector assembly): the hot path of the
    /// intermediate-cell Newton loop.
    fn base_h(&self, eta: [R; 2]) -> Result<[R; 2]> {
        let d = self.coeff.dim;
        let mut mag2 = R::zero();
        for a in 0..d {
            mag2 += eta[a] * eta[a];
        }
        let mag = mag2.sqrt();
        if mag < R::of(1e-13) {
            return Ok([R::zero(); 2]);
        }
        if self.coeff.linear_in_lambda() {
            let basis = self.linear_basis_solves()?;
            let mut h = [R::zero(); 2];
            for (a, base) in basis.iter().enumerate().take(d) {
                for b in 0..d {
                    h[b] += base.h[b] * eta[a];
                }
            }
            return Ok(h);
        }
        if let Some(m) = self.coeff.lambda_homogeneity() {
            let table = self.sphere_table()?;
            let scale_h = mag.powf(m);
            let mut h = [R::zero(); 2];
            if d == 1 {
                let e = if eta[0] >= R::zero() {
                    &table.entries[0]
                } else {
                    &table.entries[1]
                };
                h = e.h;
            } else {
                let tau = crate::scalar::two_pi::<R>();
                let mut th = eta[1].atan2(eta[0]);
                if th < R::zero() {
                    th += tau;
                }
                let pos = th / tau * R::from_usize_exact(SPHERE_ANGLES);
                let k0 = (pos.floor().to_f64_lossy() as usize) % SPHERE_ANGLES;
                let k1 = (k0 + 1) % SPHERE_ANGLES;
                let w = pos - pos.floor();
                let (e0, e1) = (&table.entries[k0], &table.entries[k1]);
                for a in 0..d {
                    h[a] = e0.h[a] * (R::one() - w) + e1.h[a] * w;
                }
            }
            for v in h.iter_mut().take(d) {
                *v *= scale_h;
            }
            return Ok(h);
        }
        Ok(self.base(eta)?.h)
    }

    /// Base effective flux and corrector at gradient state `eta`.
    pub(crate) fn base(&self, eta: [R; 2]) -> Result<BaseSolve<R>> {
        let d = self.coeff.dim;
        let mut mag2 = R::zero();
        for a in 0..d {
            mag2 += eta[a] * eta[a];
        }
        let mag = mag2.sqrt();
        if mag < R::of(1e-13) {
            return Ok(BaseSolve {
                h: [R::zero(); 2],
                corrector: vec![R::zero(); self.mesh_z.node_count()],
            });
        }
        if self.coeff.linear_in_lambda() {
            let basis = self.linear_basis_solves()?;
            let n = self.mesh_z.node_count();
            let mut h = [R::zero(); 2];
            let mut corr = vec![R::zero(); n];
            for (a, base) in basis.iter().enumerate().take(d) {
                for b in 0..d {
                    h[b] += base.h[b] * eta[a];
                }
                for i in 0..n {
                    corr[i] += base.corrector[i] * eta[a];
                }
            }
            return Ok(BaseSolve { h, corrector: corr });
        }
        if let Some(m) = self.coeff.lambda_homogeneity() {
            let table = self.sphere_table()?;
            let scale_h = mag.powf(m);
            let mut h;
            let mut corr;
            if d == 1 {
                let e = if eta[0] >= R::zero() {
                    &table.entries[0]
                } else {
                    &table.entries[1]
                };
                h = e.h;
                corr = e.corrector.clone();
            } else {
                let tau = crate::scalar::two_pi::<R>();
                let mut th = eta[1].atan2(eta[0]);
                if th < R::zero() {
                    th += tau;
                }
                let pos = th / tau * R::from_usize_exact(SPHERE_ANGLES);
                let k0 = (pos.floor().to_f64_lossy() as usize) % SPHERE_ANGLES;
                let k1 = (k0 + 1) % SPHERE_ANGLES;
                let w = pos - pos.floor();
                let (e0, e1) = (&table.entries[k0], &table.entries[k1]);
                h = [R::zero(); 2];
                let n = self.mesh_z.node_count();
                corr = vec![R::zero(); n];
                for a in 0..d {
                    h[a] = e0.h[a] * (R::one() - w) + e1.h[a] * w;
                }
                for i in 0..n {
                    corr[i] = e0.corrector[i] * (R::one() - w) + e1.corrector[i] * w;
                }
            }
            for v in h.iter_mut().take(d) {
                *v *= scale_h;
            }
            for v in corr.iter_mut() {
                *v *= mag;
            }
            return Ok(BaseSolve { h, corrector: corr });
        }
        let key = (quantize(eta[0]), quantize(eta[1]));
        {
            let cache = self.base_cache.lock().unwrap();
            if let Some(v) = cache.get(&key) {
                return Ok(v.clone());
            }
        }
        let solved = self.solve_base(eta)?;
        let mut cache = self.base_cache.lock().unwrap();
        if cache.len() >= H_CACHE_BUDGET {
            return Err(Error::Resource("h-cache budget exceeded".into()));
        }
        cache.insert(key, solved.clone());
        Ok(solved)
    }

    /// Effective flux `h(y, r, eta)`.
    pub fn h_value(&self, y: [R; 2], r: R, eta: [R; 2]) -> Result<[R; 2]> {
        if let Some(sigma) = self.coeff.z_slice_scale(y, r) {
            let mut h = self.base_h(eta)?;
            for v in h.iter_mut().take(self.coeff.dim) {
                *v *= sigma;
            }
            return Ok(h);
        }
        Ok(self.full_solve(y, r, eta)?.h)
    }

    /// Fast-cell corrector values behind `h(y, r, eta)`.
    pub fn corrector_values(&self, y: [R; 2], r: R, eta: [R; 2]) -> Result<Vec<R>> {
        if self.coeff.z_slice_scale(y, r).is_some() {
            return Ok(self.base(eta)?.corrector);
        }
        Ok(self.full_solve(y, r, eta)?.corrector)
    }

    fn full_solve(&self, y: [R; 2], r: R, eta: [R; 2]) -> Result<BaseSolve<R>> {
        let key = (
            quantize(y[0]),
            quantize(y[1]),
            quantize(r),
            quantize(eta[0]),
            quantize(eta[1]),
        );
        {
            let cache = self.full_cache.lock().unwrap();
            if let Some(v) = cache.get(&key) {
                return Ok(v.clone());
            }
        }
        let sol = solve_cell_z(&self.coeff, y, r, eta, &self.mesh_z)?;
        let out = BaseSolve {
            h: sol.flux_sample,
            corrector: sol.corrector.values,
        };
        let mut cache = self.full_cache.lock().unwrap();
        if cache.len() >= H_CACHE_BUDGET {
            return Err(Error::Resource("h-cache budget exceeded".into()));
        }
        cache.insert(key, out.clone());
        Ok(out)
    }

    /// Secant Jacobian of `eta -> h(y, r, eta)` (exact for linear families).
    pub fn h_jacobian(&self, y: [R; 2], r: R, eta: [R; 2]) -> Result<[[R; 2]; 2]> {
        let d = self.coeff.dim;
        if self.coeff.linear_in_lambda() {
            if let Some(sigma) = self.coeff.z_slice_scale(y, r) {
                let basis = self.linear_basis_solves()?;
                let mut j = [[R::zero(); 2]; 2];
                for (a, base) in basis.iter().enumerate().take(d) {
                    for b in 0..d {
                        j[b][a] = sigma * base.h[b];
                    }
                }
                return Ok(j);
            }
        }
        let mut mag2 = R::zero();
        for a in 0..d {
            mag2 += eta[a] * eta[a];
        }
        let step = R::of(1e-5) * (R::one() + mag2.sqrt());
        let mut j = [[R::zero(); 2]; 2];
        for a in 0..d {
            let mut plus = eta;
            plus[a] += step;
            let mut minus = eta;
            minus[a] -= step;
            let hp = self.h_value(y, r, plus)?;
            let hm = self.h_value(y, r, minus)?;
            for b in 0..d {
                j[b][a] = (hp[b] - hm[b]) / (step + step);
            }
        }
        Ok(j)
    }
}

/// Intermediate-cell corrector at state `(r, xi)`: zero-mean `pi` with the
/// discrete form driven by `h`; the flux sample is `q(r, xi)`. Every `h`
/// evaluation triggers (or looks up) a fast-cell solve.
pub fn solve_cell_y_with<R: Real>(
    heval: &HEvaluator<R>,
    r: R,
    xi: [R; 2],
    mesh_y: &Arc<Mesh<R>>,
) -> Result<CellSolution<R>> {
    let nested_err: Mutex<Option<Error>> = Mutex::new(None);
    let record = |e: Error| {
        let mut g = nested_err.lock().unwrap();
        if g.is_none() {
            *g = Some(e);
        }
    };
    let flux = |y: [R; 2], grad: [R; 2]| -> [R; 2] {
        match heval.h_value(y, r, grad) {
            Ok(v) => v,
            Err(e) => {
                record(e);
                [R::nan(), R::nan()]
            }
        }
    };
    let jac = |y: [R; 2], grad: [R; 2]| -> [[R; 2]; 2] {
        match heval.h_jacobian(y, r, grad) {
            Ok(v) => v,
            Err(e) => {
                record(e);
                [[R::nan(); 2]; 2]
            }
        }
    };
    let out = newton_periodic_cell(
        mesh_y,
        xi,
        &flux,
        &jac,
        cell_tol(&heval.coeff),
        None,
        &format!("cell_y[{}]", heval.coeff.name),
    );
    if let Some(e) = nested_err.into_inner().unwrap() {
        return Err(e);
    }
    out
}

pub fn solve_cell_y<R: Real>(
    coeff: &Coefficient<R>,
    r: R,
    xi: [R; 2],
    mesh_y: &Arc<Mesh<R>>,
    mesh_z: &Arc<Mesh<R>>,
) -> Result<CellSolution<R>> {
    let heval = HEvaluator::new(coeff, mesh_z);
    solve_cell_y_with(&heval, r, xi, mesh_y)
}

/// Tabulated macroscopic flux `q` on a tensor `(r, xi)` grid with multilinear
/// interpolation; out-of-range queries clamp and raise a run flag.
#[derive(Debug)]
pub struct FluxTable<R: Real> {
    pub dim: usize,
    pub r_grid: Vec<R>,
    pub xi_grids: Vec<Vec<R>>,
    /// layout: `(ir * n0 + i0) * n1 + i1` with `n1 = 1` in 1-D
    pub values: Vec<[R; 2]>,
    /// state-independent coefficients skip the clamp flag on r queries
    pub r_independent: bool,
    clamped: AtomicBool,
}

impl<R: Real> FluxTable<R> {
    pub fn clamp_hit(&self) -> bool {
        self.clamped.load(Ordering::Relaxed)
    }

    pub fn xi_spacing(&self, axis: usize) -> R {
        let g = &self.xi_grids[axis];
        if g.len() < 2 {
            R::one()
        } else {
            g[1] - g[0]
        }
    }

    fn locate(grid: &[R], v: R, flag: &AtomicBool, watch: bool) -> (usize, R) {
        let n = grid.len();
        if n == 1 {
            return (0, R::zero());
        }
        if v <= grid[0] {
            if watch && v < grid[0] {
                flag.store(true, Ordering::Relaxed);
            }
            return (0, R::zero());
        }
        if v >= grid[n - 1] {
            if watch && v > grid[n - 1] {
                flag.store(true, Ordering::Relaxed);
            }
            return (n - 2, R::one());
        }
        let mut i = 0;
        while i + 2 < n && grid[i + 1] <= v {
            i += 1;
        }
        (i, (v - grid[i]) / (grid[i + 1] - grid[i]))
    }

    pub fn query(&self, r: R, xi: [R; 2]) -> [R; 2] {
        let (ir, wr) = Self::locate(&self.r_grid, r, &self.clamped, !self.r_independent);
        let (i0, w0) = Self::locate(&self.xi_grids[0], xi[0], &self.clamped, true);
        let (i1, w1) = if self.dim == 2 {
            Self::locate(&self.xi_grids[1], xi[1], &self.clamped, true)
        } else {
            (0, R::zero())
        };
        let n0 = self.xi_grids[0].len();
        let n1 = if self.dim == 2 {
            self.xi_grids[1].len()
        } else {
            1
        };
        let one = R::one();
        let r_corners: &[(usize, R)] = if self.r_grid.len() > 1 {
            &[(0, one - wr), (1, wr)]
        } else {
            &[(0, one)]
        };
        let c0: &[(usize, R)] = if n0 > 1 {
            &[(0, one - w0), (1, w0)]
        } else {
            &[(0, one)]
        };
        let c1: &[(usize, R)] = if n1 > 1 {
            &[(0, one - w1), (1, w1)]
        } else {
            &[(0, one)]
        };
        let mut out = [R::zero(); 2];
        for &(jr, fr) in r_corners {
            for &(j0, f0) in c0 {
                for &(j1, f1) in c1 {
                    let w = fr * f0 * f1;
                    if w == R::zero() {
                        continue;
                    }
                    let v = self.values[((ir + jr) * n0 + (i0 + j0)) * n1 + (i1 + j1)];
                    for a in 0..self.dim {
                        out[a] += w * v[a];
                    }
                }
            }
        }
        out
    }

    pub fn csv(&self) -> String {
        let mut s = String::new();
        if self.dim == 1 {
            s.push_str("r,xi_1,q_1\n");
        } else {
            s.push_str("r,xi_1,xi_2,q_1,q_2\n");
        }
        let n0 = self.xi_grids[0].len();
        let n1 = if self.dim == 2 {
            self.xi_grids[1].len()
        } else {
            1
        };
        for (ir, &r) in self.r_grid.iter().enumerate() {
            for i0 in 0..n0 {
                for i1 in 0..n1 {
                    let v = self.values[(ir * n0 + i0) * n1 + i1];
                    if self.dim == 1 {
                        s.push_str(&format!(
                            "{:.12e},{:.12e},{:.12e}\n",
                            r.to_f64_lossy(),
                            self.xi_grids[0][i0].to_f64_lossy(),
                            v[0].to_f64_lossy()
                        ));
                    } else {
                        s.push_str(&format!(
                            "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}\n",
                            r.to_f64_lossy(),
                            self.xi_grids[0][i0].to_f64_lossy(),
                            self.xi_grids[1][i1].to_f64_lossy(),
                            v[0].to_f64_lossy(),
                            v[1].to_f64_lossy()
                        ));
                    }
                }
            }
        }
        s
    }

    pub fn metadata_block(&self) -> String {
        format!(
            "{{\n  \"dim\": {},\n  \"r_nodes\": {},\n  \"xi_nodes\": {},\n  \"r_independent\": {},\n  \"clamped\": {}\n}}\n",
            self.dim,
            self.r_grid.len(),
            self.xi_grids[0].len(),
            self.r_independent,
            self.clamp_hit()
        )
    }
}

/// Solve `q` at every `(r, xi)` grid node. Independent nodes run in parallel;
/// a node failure aborts with the failing state.
pub fn tabulate_flux<R: Real>(
    coeff: &Coefficient<R>,
    r_grid: &[R],
    xi_grids: &[Vec<R>],
    mesh_y: &Arc<Mesh<R>>,
    mesh_z: &Arc<Mesh<R>>,
) -> Result<FluxTable<R>> {
    if r_grid.is_empty() || xi_grids.is_empty() || xi_grids.iter().any(|g| g.is_empty()) {
        return Err(Error::Config("flux table grids must be nonempty".into()));
    }
    for g in std::iter::once(&r_grid.to_vec()).chain(xi_grids.iter()) {
        for w in g.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Config("flux table grids must increase".into()));
            }
        }
    }
    let dim = coeff.dim;
    if xi_grids.len() != dim {
        return Err(Error::Config("one xi grid per dimension".into()));
    }
    let heval = HEvaluator::new(coeff, mesh_z);
    let n0 = xi_grids[0].len();
    let n1 = if dim == 2 { xi_grids[1].len() } else { 1 };
    let total = r_grid.len() * n0 * n1;
    let values: Result<Vec<[R; 2]>> = (0..total)
        .into_par_iter()
        .map(|flat| {
            let i1 = flat % n1;
            let i0 = (flat / n1) % n0;
            let ir = flat / (n0 * n1);
            let r = r_grid[ir];
            let mut xi = [xi_grids[0][i0], R::zero()];
            if dim == 2 {
                xi[1] = xi_grids[1][i1];
            }
            solve_cell_y_with(&heval, r, xi, mesh_y)
                .map(|s| s.flux_sample)
                .map_err(|e| Error::Solver {
                    context: format!(
                        "flux table node r={:.6e} xi=({:.6e},{:.6e}): {e}",
                        r.to_f64_lossy(),
                        xi[0].to_f64_lossy(),
                        xi[1].to_f64_lossy()
                    ),
                    residual: f64::NAN,
                })
        })
        .collect();
    Ok(FluxTable {
        dim,
        r_grid: r_grid.to_vec(),
        xi_grids: xi_grids.to_vec(),
        values: values?,
        r_independent: coeff.zeta_independent(),
        clamped: AtomicBool::new(false),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::builtin_problem;

    type C = Coefficient<f64>;

    fn lin1d() -> C {
        builtin_problem("lin1d", None).unwrap()
    }

    /// Independent oracle: Richardson-extrapolated trapezoid integration.
    fn oracle_integral(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        let trap = |n: usize| -> f64 {
            let h = (b - a) / n as f64;
            let mut s = 0.5 * (f(a) + f(b));
            for i in 1..n {
                s += f(a + i as f64 * h);
            }
            s * h
        };
        let coarse = trap(1 << 14);
        let fine = trap(1 << 15);
        fine + (fine - coarse) / 3.0
    }

    #[test]
    fn harmonic_mean_flux_1d() {
        // h(y=1/4, xi=1) = (2 + sin(pi/2)) / integral dz/(2 + sin 2 pi z)
        let c = lin1d();
        let mesh = Mesh::<f64>::unit_cell(1, 256).unwrap();
        let sol = solve_cell_z(&c, [0.25, 0.0], 0.0, [1.0, 0.0], &mesh).unwrap();
        let inv_mean =
            oracle_integral(|t| 1.0 / (2.0 + (std::f64::consts::TAU * t).sin()), 0.0, 1.0);
        assert!((inv_mean - 1.0 / 3.0_f64.sqrt()).abs() < 1e-10);
        let expected = 3.0 / inv_mean;
        assert!(
            (sol.flux_sample[0] - expected).abs() < 1e-6,
            "h = {} vs {expected}",
            sol.flux_sample[0]
        );
        assert!(sol.residual <= TOL_LINEAR);
        let mean: f64 = sol.corrector.values.iter().sum::<f64>() / 256.0;
        assert!(mean.abs() <= 1e-10);
    }

    #[test]
    fn zero_state_and_constant_coefficient() {
        let c = lin1d();
        let mesh = Mesh::<f64>::unit_cell(1, 64).unwrap();
        let sol = solve_cell_z(&c, [0.1, 0.0], 0.0, [0.0, 0.0], &mesh).unwrap();
        assert!(sol.flux_sample[0].abs() < 1e-14);
        assert!(sol.corrector.max_magnitude() < 1e-14);
        assert_eq!(sol.newton_iters, 0);

        let cc = builtin_problem::<f64>("const1d", None).unwrap();
        let sol = solve_cell_z(&cc, [0.0; 2], 0.0, [0.7, 0.0], &mesh).unwrap();
        assert!(sol.corrector.max_magnitude() < 1e-12);
        assert!((sol.flux_sample[0] - 3.0 * 0.7).abs() < 1e-12);
    }

    #[test]
    fn double_harmonic_mean_q() {
        let c = lin1d();
        let mesh_y = Mesh::<f64>::unit_cell(1, 256).unwrap();
        let mesh_z = Mesh::<f64>::unit_cell(1, 256).unwrap();
        let sol = solve_cell_y(&c, 0.0, [1.0, 0.0], &mesh_y, &mesh_z).unwrap();
        assert!(
            (sol.flux_sample[0] - 3.0).abs() < 1e-5,
            "q = {}",
            sol.flux_sample[0]
        );
        assert!(sol.residual <= TOL_LINEAR);
    }

    #[test]
    fn separable_oracle_other_profiles() {
        use crate::coeff::{FluxFamily, HFn, Profile, StructureClass};
        use crate::nfunc::NFunction;
        use crate::trig::TrigPoly;
        let tau = std::f64::consts::TAU;
        let cy = Profile::Trig(TrigPoly::line(1.5, &[(tau, 0.5)], &[]));
        let cz = Profile::Trig(TrigPoly::line(2.0, &[], &[(2.0 * tau, -0.8)]));
        let c = Coefficient {
            name: "sep_test".into(),
            dim: 1,
            family: FluxFamily::Linear { cy, cz },
            structure_class: StructureClass::PeriodicPeriodic,
            phi: NFunction::power(2.0),
            psi: NFunction::power(2.0),
            constants: [1.0, 1.0, 3.0, 3.0, 0.5],
            h_fn: HFn::Const(0.5),
            h_min: 0.5,
            theta: 0.5,
        };
        let mesh = Mesh::<f64>::unit_cell(1, 256).unwrap();
        let sol = solve_cell_y(&c, 0.0, [1.0, 0.0], &mesh, &mesh).unwrap();
        let iy = oracle_integral(|t| 1.0 / (1.5 + 0.5 * (tau * t).cos()), 0.0, 1.0);
        let iz = oracle_integral(|t| 1.0 / (2.0 - 0.8 * (2.0 * tau * t).sin()), 0.0, 1.0);
        let expected = 1.0 / (iy * iz);
        assert!(
            (sol.flux_sample[0] - expected).abs() < 1e-5,
            "q = {} vs {expected}",
            sol.flux_sample[0]
        );
    }

    #[test]
    fn q_linear_in_xi_for_linear_flux() {
        let c = lin1d();
        let mesh = Mesh::<f64>::unit_cell(1, 128).unwrap();
        let heval = HEvaluator::new(&c, &mesh);
        let q1 = solve_cell_y_with(&heval, 0.0, [0.5, 0.0], &mesh)
            .unwrap()
            .flux_sample[0];
        let q2 = solve_cell_y_with(&heval, 0.0, [2.0, 0.0], &mesh)
            .unwrap()
            .flux_sample[0];
        assert!((q2 / q1 - 4.0).abs() < 1e-9);
    }

    #[test]
    fn effective_flux_monotone_lin1d() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let c = lin1d();
        let mesh = Mesh::<f64>::unit_cell(1, 64).unwrap();
        let heval = HEvaluator::new(&c, &mesh);
        let q = |xi: f64| -> f64 {
            solve_cell_y_with(&heval, 0.0, [xi, 0.0], &mesh)
                .unwrap()
                .flux_sample[0]
        };
        for _ in 0..100 {
            let x1: f64 = rng.gen_range(-3.0..3.0);
            let mut x2: f64 = rng.gen_range(-3.0..3.0);
            if (x1 - x2).abs() < 1e-6 {
                x2 += 0.5;
            }
            let prod = (q(x1) - q(x2)) * (x1 - x2);
            assert!(prod > 0.0, "xi1={x1} xi2={x2} prod={prod}");
        }
    }

    #[test]
    fn refinement_consistency() {
        // the periodic midpoint discretization converges spectrally on this
        // analytic coefficient: genuine refinement signal lives at small n,
        // and at the larger pinned sizes the differences sit at the rounding
        // floor
        let c = lin1d();
        let q_at = |n: usize| -> f64 {
            let mesh = Mesh::<f64>::unit_cell(1, n).unwrap();
            solve_cell_y(&c, 0.0, [1.0, 0.0], &mesh, &mesh)
                .unwrap()
                .flux_sample[0]
        };
        let (q4, q8, q16) = (q_at(4), q_at(8), q_at(16));
        let d1 = (q4 - q8).abs();
        let d2 = (q8 - q16).abs();
        assert!(d2 * 2.0 <= d1, "{d1} vs {d2}");
        let (q32, q64, q128) = (q_at(32), q_at(64), q_at(128));
        let d3 = (q32 - q64).abs();
        let d4 = (q64 - q128).abs();
        let floor = 5e-15 * q64.abs();
        assert!(d4 <= (d3 / 2.0).max(floor), "{d3} vs {d4}");
    }

    #[test]
    fn energy_identity_at_solution() {
        let c = lin1d();
        let mesh = Mesh::<f64>::unit_cell(1, 128).unwrap();
        let sol = solve_cell_z(&c, [0.3, 0.0], 0.0, [1.0, 0.0], &mesh).unwrap();
        let quad = CellQuad::build(&mesh).unwrap();
        let grads = quad.gradients(&sol.corrector.values);
        let mut pairing = 0.0;
        for q in 0..quad.points.len() {
            let total = [1.0 + grads[q][0], 0.0];
            let f = c.cell_flux([0.3, 0.0], quad.points[q], 0.0, total);
            pairing += f[0] * grads[q][0] * quad.weight;
        }
        assert!(pairing.abs() <= 10.0 * sol.residual.max(1e-12), "{pairing}");
    }

    #[test]
    fn plap2d_cell_solve_and_oddness() {
        let c = builtin_problem::<f64>("plap2d", None).unwrap();
        let mesh = Mesh::<f64>::unit_cell(2, 16).unwrap();
        let sol = solve_cell_z(&c, [0.2, 0.7], 0.0, [1.0, 0.5], &mesh).unwrap();
        assert!(sol.residual <= TOL_NONLINEAR);
        let neg = solve_cell_z(&c, [0.2, 0.7], 0.0, [-1.0, -0.5], &mesh).unwrap();
        for a in 0..2 {
            assert!(
                (sol.flux_sample[a] + neg.flux_sample[a]).abs() < 1e-7,
                "odd symmetry"
            );
        }
    }

    #[test]
    fn deg1d_effective_flux_matches_direct_formula() {
        // no cell-variable dependence: correctors vanish and q = a
        let c = builtin_problem::<f64>("deg1d", None).unwrap();
        let mesh = Mesh::<f64>::unit_cell(1, 32).unwrap();
        let r = 1.3;
        let xi = [0.8, 0.0];
        let sol = solve_cell_y(&c, r, xi, &mesh, &mesh).unwrap();
        assert!(sol.corrector.max_magnitude() < 1e-10);
        let direct = c.flux([0.0; 2], [0.0; 2], r, xi);
        assert!((sol.flux_sample[0] - direct[0]).abs() < 1e-9);
    }

    #[test]
    fn flux_table_lin1d_slope() {
        let c = lin1d();
        let mesh = Mesh::<f64>::unit_cell(1, 256).unwrap();
        let xi0: Vec<f64> = (0..9).map(|i| -2.0 + 0.5 * i as f64).collect();
        let table = tabulate_flux(&c, &[0.0], &[xi0.clone()], &mesh, &mesh).unwrap();
        for (i, &xi) in xi0.iter().enumerate() {
            if xi.abs() < 1e-12 {
                continue;
            }
            let q = table.values[i][0];
            assert!((q / xi - 3.0).abs() < 1e-4, "xi={xi} q={q}");
        }
        let q = table.query(0.0, [0.3, 0.0]);
        assert!((q[0] - 0.9).abs() < 1e-4);
        assert!(!table.clamp_hit());
        let _ = table.query(0.0, [5.0, 0.0]);
        assert!(table.clamp_hit());
    }

    #[test]
    fn flux_table_single_node() {
        let c = builtin_problem::<f64>("const1d", None).unwrap();
        let mesh = Mesh::<f64>::unit_cell(1, 32).unwrap();
        let table = tabulate_flux(&c, &[0.0], &[vec![1.0]], &mesh, &mesh).unwrap();
        assert_eq!(table.values.len(), 1);
        assert!((table.values[0][0] - 3.0).abs() < 1e-10);
    }

    #[test]
    fn nonpositive_flux_is_rejected() {
        // a = -lambda has the trivial zero corrector (constant flux), so the
        // detection is probed with an oscillating negative-definite flux
        use crate::coeff::{FluxFamily, HFn, Profile, StructureClass};
        use crate::nfunc::NFunction;
        use crate::trig::TrigPoly;
        let tau = std::f64::consts::TAU;
        let c = Coefficient {
            name: "anti".into(),
            dim: 1,
            family: FluxFamily::Linear {
                cy: Profile::Const(-1.0),
                cz: Profile::Trig(TrigPoly::line(2.0, &[], &[(tau, 1.0)])),
            },
            structure_class: StructureClass::PeriodicPeriodic,
            phi: NFunction::power(2.0),
            psi: NFunction::power(2.0),
            constants: [1.0, 1.0, 3.0, 3.0, 0.5],
            h_fn: HFn::Const(0.5),
            h_min: 0.5,
            theta: 0.5,
        };
        let mesh = Mesh::<f64>::unit_cell(1, 32).unwrap();
        let out = solve_cell_z(&c, [0.0; 2], 0.0, [1.0, 0.0], &mesh);
        assert!(matches!(out, Err(Error::Coercivity(_))), "{out:?}");
    }
}
