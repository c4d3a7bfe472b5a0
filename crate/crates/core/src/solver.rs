//! Monotone elliptic solvers on the macroscopic domain: the fine-scale
//! problem with oscillating coefficients and the homogenized problem driven
//! by the tabulated effective flux, both with homogeneous Dirichlet data.

use std::sync::Arc;

use crate::cell::{FluxTable, HEvaluator};
use crate::coeff::Coefficient;
use crate::error::{Error, Result};
use crate::linalg::{cg_jacobi, solve_tridiagonal, Csr};
use crate::mesh::{Field, FieldKind, Mesh};
use crate::scalar::Real;

/// Where the solver takes its constitutive law from.
pub enum FluxSource<R: Real> {
    /// `a(x/eps, x/eps^2, u, Du)` evaluated on the full representative.
    /// `clamp` restricts state lookups to the validated box when set.
    Direct {
        coeff: Arc<Coefficient<R>>,
        eps: R,
        clamp: Option<R>,
    },
    /// `q(u, Du)` interpolated from an upscaled flux table.
    Effective { table: Arc<FluxTable<R>> },
}

pub struct EllipticProblem<R: Real> {
    pub mesh: Arc<Mesh<R>>,
    pub flux_source: FluxSource<R>,
    pub rhs: Field<R>,
}

#[derive(Debug, Clone)]
pub struct SolveReport<R: Real> {
    pub solution: Field<R>,
    pub residual: R,
    pub newton_iters: usize,
    /// `integral flux . Du - f u` at the solution.
    pub energy: R,
    /// Residual norm after each accepted damped step (non-increasing).
    pub residual_history: Vec<R>,
}

/// Quadrature of the box mesh: evaluation points, participating nodes, shape
/// values and shape gradients (midpoint rule in 1-D, 2x2 Gauss in 2-D).
struct OmegaQuad<R: Real> {
    points: Vec<[R; 2]>,
    nodes: Vec<[usize; 4]>,
    shapes: Vec<[R; 4]>,
    grads: Vec<[[R; 2]; 4]>,
    weight: R,
    nodes_per_point: usize,
    dim: usize,
}

impl<R: Real> OmegaQuad<R> {
    fn build(mesh: &Mesh<R>) -> Result<Self> {
        if mesh.periodic {
            return Err(Error::Domain("domain solver expects a box mesh".into()));
        }
        let h = mesh.spacing(0);
        match mesh.dim {
            1 => {
                let n = mesh.cells[0];
                let mut points = Vec::with_capacity(n);
                let mut nodes = Vec::with_capacity(n);
                let mut shapes = Vec::with_capacity(n);
                let mut grads = Vec::with_capacity(n);
                let inv_h = R::one() / h;
                let half = R::of(0.5);
                for j in 0..n {
                    let mid = mesh.lo[0] + (R::from_usize_exact(j) + half) * h;
                    points.push([mid, R::zero()]);
                    nodes.push([j, j + 1, 0, 0]);
                    shapes.push([half, half, R::zero(), R::zero()]);
                    grads.push([
                        [-inv_h, R::zero()],
                        [inv_h, R::zero()],
                        [R::zero(); 2],
                        [R::zero(); 2],
                    ]);
                }
                Ok(OmegaQuad {
                    points,
                    nodes,
                    shapes,
                    grads,
                    weight: h,
                    nodes_per_point: 2,
                    dim: 1,
                })
            }
            2 => {
                let hx = mesh.spacing(0);
                let hy = mesh.spacing(1);
                let g = (R::one() - R::one() / R::of(3.0).sqrt()) * R::of(0.5);
                let gauss = [
                    (g, g),
                    (R::one() - g, g),
                    (g, R::one() - g),
                    (R::one() - g, R::one() - g),
                ];
                let (nx, ny) = (mesh.cells[0], mesh.cells[1]);
                let count = nx * ny * 4;
                let mut points = Vec::with_capacity(count);
                let mut nodes = Vec::with_capacity(count);
                let mut shapes = Vec::with_capacity(count);
                let mut grads = Vec::with_capacity(count);
                for cy in 0..ny {
                    for cx in 0..nx {
                        let ids = [
                            mesh.node_index([cx, cy]),
                            mesh.node_index([cx + 1, cy]),
                            mesh.node_index([cx, cy + 1]),
                            mesh.node_index([cx + 1, cy + 1]),
                        ];
                        for &(gx, gy) in &gauss {
                            let px = mesh.lo[0] + (R::from_usize_exact(cx) + gx) * hx;
                            let py = mesh.lo[1] + (R::from_usize_exact(cy) + gy) * hy;
                            let one = R::one();
                            points.push([px, py]);
                            nodes.push(ids);
                            shapes.push([
                                (one - gx) * (one - gy),
                                gx * (one - gy),
                                (one - gx) * gy,
                                gx * gy,
                            ]);
                            grads.push([
                                [-(one - gy) / hx, -(one - gx) / hy],
                                [(one - gy) / hx, -gx / hy],
                                [-gy / hx, (one - gx) / hy],
                                [gy / hx, gx / hy],
                            ]);
                        }
                    }
                }
                Ok(OmegaQuad {
                    points,
                    nodes,
                    shapes,
                    grads,
                    weight: hx * hy / R::of(4.0),
                    nodes_per_point: 4,
                    dim: 2,
                })
            }
            d => Err(Error::Domain(format!("domain dim {d}"))),
        }
    }

    fn state(&self, q: usize, values: &[R]) -> (R, [R; 2]) {
        let mut u = R::zero();
        let mut g = [R::zero(); 2];
        for c in 0..self.nodes_per_point {
            let v = values[self.nodes[q][c]];
            u += self.shapes[q][c] * v;
            for a in 0..self.dim {
                g[a] += self.grads[q][c][a] * v;
            }
        }
        (u, g)
    }
}

impl<R: Real> FluxSource<R> {
    fn eval(&self, x: [R; 2], zeta: R, lambda: [R; 2]) -> [R; 2] {
        match self {
            FluxSource::Direct { coeff, eps, clamp } => {
                let (mut zeta, mut lambda) = (zeta, lambda);
                if let Some(r) = clamp {
                    zeta = zeta.max(-*r).min(*r);
                    for v in lambda.iter_mut() {
                        *v = (*v).max(-*r).min(*r);
                    }
                }
                let e2 = *eps * *eps;
                let y = [x[0] / *eps, x[1] / *eps];
                let z = [x[0] / e2, x[1] / e2];
                coeff.flux(y, z, zeta, lambda)
            }
            FluxSource::Effective { table } => table.query(zeta, lambda),
        }
    }

    /// d(flux)/d(lambda): analytic for the direct source, secant differences
    /// at the table grid spacing for the effective one.
    fn jacobian(&self, x: [R; 2], zeta: R, lambda: [R; 2], dim: usize) -> [[R; 2]; 2] {
        match self {
            FluxSource::Direct { coeff, eps, .. } => {
                let e2 = *eps * *eps;
                let y = [x[0] / *eps, x[1] / *eps];
                let z = [x[0] / e2, x[1] / e2];
                coeff.flux_jacobian(y, z, zeta, lambda)
            }
            FluxSource::Effective { table } => {
                let mut j = [[R::zero(); 2]; 2];
                for a in 0..dim {
                    let step = table.xi_spacing(a);
                    let mut plus = lambda;
                    plus[a] += step;
                    let mut minus = lambda;
                    minus[a] -= step;
                    let fp = table.query(zeta, plus);
                    let fm = table.query(zeta, minus);
                    for b in 0..dim {
                        j[b][a] = (fp[b] - fm[b]) / (step + step);
                    }
                }
                j
            }
        }
    }
}

/// Discrete weak residual at state `values` (boundary rows zero).
fn weak_residual<R: Real>(
    quad: &OmegaQuad<R>,
    src: &FluxSource<R>,
    load: &[R],
    boundary: &[bool],
    values: &[R],
) -> Vec<R> {
    let n = load.len();
    let mut r = vec![R::zero(); n];
    for q in 0..quad.points.len() {
        let (u, g) = quad.state(q, values);
        let f = src.eval(quad.points[q], u, g);
        for c in 0..quad.nodes_per_point {
            let node = quad.nodes[q][c];
            if boundary[node] {
                continue;
            }
            let mut acc = R::zero();
            for a in 0..quad.dim {
                acc += f[a] * quad.grads[q][c][a];
            }
            r[node] += acc * quad.weight;
        }
    }
    for i in 0..n {
        if !boundary[i] {
            r[i] -= load[i];
        }
    }
    r
}

fn l2<R: Real>(v: &[R]) -> R {
    v.iter().fold(R::zero(), |s, &x| s + x * x).sqrt()
}

/// Solve the discrete problem by damped Newton with Dirichlet elimination.
pub fn solve<R: Real>(problem: &EllipticProblem<R>, tol: R) -> Result<SolveReport<R>> {
    if tol <= R::zero() {
        return Err(Error::Domain("solver tolerance must be positive".into()));
    }
    let mesh = &problem.mesh;
    if problem.rhs.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("rhs must be finite".into()));
    }
    if let FluxSource::Direct { eps, .. } = &problem.flux_source {
        let e2 = *eps * *eps;
        for a in 0..mesh.dim {
            if mesh.spacing(a) > e2 / R::of(4.0) {
                return Err(Error::Resolution(format!(
                    "direct mode needs spacing <= eps^2/4 = {:.3e}, got {:.3e}",
                    (e2 / R::of(4.0)).to_f64_lossy(),
                    mesh.spacing(a).to_f64_lossy()
                )));
            }
        }
    }
    let quad = OmegaQuad::build(mesh)?;
    let n = mesh.node_count();
    let boundary: Vec<bool> = (0..n).map(|i| mesh.is_boundary_node(i)).collect();
    let interior: Vec<usize> = (0..n).filter(|&i| !boundary[i]).collect();
    let reduced_of: Vec<Option<usize>> = {
        let mut m = vec![None; n];
        for (k, &i) in interior.iter().enumerate() {
            m[i] = Some(k);
        }
        m
    };

    // lumped load vector from the nodal rhs
    let wq = mesh.quad_weights();
    let load: Vec<R> = (0..n).map(|i| problem.rhs.values[i] * wq[i]).collect();

    let src = &problem.flux_source;
    let mut values = vec![R::zero(); n];
    let mut r = weak_residual(&quad, src, &load, &boundary, &values);
    let mut r_norm = l2(&r);
    let mut history = vec![r_norm];
    let mut iters = 0usize;
    let max_newton = 40;

    while r_norm > tol {
        if iters >= max_newton {
            return Err(Error::Solver {
                context: "domain solve: newton stalled".into(),
                residual: r_norm.to_f64_lossy(),
            });
        }
        let m = interior.len();
        let mut trip: Vec<(usize, usize, R)> = Vec::new();
        for q in 0..quad.points.len() {
            let (u, g) = quad.state(q, &values);
            let j = src.jacobian(quad.points[q], u, g, quad.dim);
            for row in 0..quad.nodes_per_point {
                let Some(ri) = reduced_of[quad.nodes[q][row]] else {
                    continue;
                };
                for col in 0..quad.nodes_per_point {
                    let Some(ci) = reduced_of[quad.nodes[q][col]] else {
                        continue;
                    };
                    let mut acc = R::zero();
                    for a in 0..quad.dim {
                        for b in 0..quad.dim {
                            acc += quad.grads[q][row][a] * j[a][b] * quad.grads[q][col][b];
                        }
                    }
                    trip.push((ri, ci, acc * quad.weight));
                }
            }
        }
        let a = Csr::from_triplets(m, &mut trip);
        let rhs_red: Vec<R> = interior.iter().map(|&i| -r[i]).collect();
        let delta_red = if mesh.dim == 1 {
            // the reduced 1-D operator is tridiagonal: direct elimination
            let mut lower = vec![R::zero(); m];
            let mut diag = vec![R::zero(); m];
            let mut upper = vec![R::zero(); m];
            for row in 0..m {
                for k in a.row_ptr[row]..a.row_ptr[row + 1] {
                    let col = a.cols[k];
                    if col + 1 == row {
                        lower[row] = a.vals[k];
                    } else if col == row {
                        diag[row] = a.vals[k];
                    } else if col == row + 1 {
                        upper[row] = a.vals[k];
                    }
                }
            }
            solve_tridiagonal(&lower, &diag, &upper, &rhs_red)?
        } else {
            let mut x = vec![R::zero(); m];
            let out = cg_jacobi(&a, &rhs_red, &mut x, R::of(1e-12), 10 * m, false);
            if out.indefinite {
                return Err(Error::Coercivity("domain solve".into()));
            }
            x
        };

        let mut alpha = R::one();
        let mut accepted = false;
        for _ in 0..=30 {
            let mut trial = values.clone();
            for (k, &i) in interior.iter().enumerate() {
                trial[i] += alpha * delta_red[k];
            }
            let r_trial = weak_residual(&quad, src, &load, &boundary, &trial);
            let t_norm = l2(&r_trial);
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
            return Err(Error::Solver {
                context: "domain solve: line search exhausted".into(),
                residual: r_norm.to_f64_lossy(),
            });
        }
        history.push(r_norm);
        iters += 1;
    }

    // energy at the solution
    let mut energy = R::zero();
    for q in 0..quad.points.len() {
        let (u, g) = quad.state(q, &values);
        let f = src.eval(quad.points[q], u, g);
        let mut acc = R::zero();
        for a in 0..quad.dim {
            acc += f[a] * g[a];
        }
        energy += acc * quad.weight;
    }
    for i in 0..n {
        energy -= load[i] * values[i];
    }

    Ok(SolveReport {
        solution: Field::scalar(mesh.clone(), values)?,
        residual: r_norm,
        newton_iters: iters,
        energy,
        residual_history: history,
    })
}

/// `integral flux(u) . Dv - integral f v` for a discrete test field `v`
/// vanishing on the boundary (the weak-form probe used by the tests).
pub fn weak_form_pairing<R: Real>(
    problem: &EllipticProblem<R>,
    u: &Field<R>,
    v: &Field<R>,
) -> Result<R> {
    let quad = OmegaQuad::build(&problem.mesh)?;
    let n = problem.mesh.node_count();
    let boundary: Vec<bool> = (0..n).map(|i| problem.mesh.is_boundary_node(i)).collect();
    let wq = problem.mesh.quad_weights();
    let load: Vec<R> = (0..n).map(|i| problem.rhs.values[i] * wq[i]).collect();
    let r = weak_residual(&quad, &problem.flux_source, &load, &boundary, &u.values);
    let mut acc = R::zero();
    for i in 0..n {
        acc += r[i] * v.values[i];
    }
    Ok(acc)
}

/// First-order two-scale reconstruction of the fine solution from the macro
/// state: the corrected gradient and the corrected field.
pub struct CorrectorReconstruction<R: Real> {
    /// `Du0 + Dy pi1 + Dz pi2` sampled on the fine mesh (vector field).
    pub grad_recon: Field<R>,
    /// `u0 + eps pi1 + eps^2 pi2` sampled on the fine mesh.
    pub u_recon: Field<R>,
    /// Macro gradient interpolated on the fine mesh (vector field).
    pub du0_fine: Field<R>,
}

const RECON_CACHE_CAP: usize = 100_000;

fn quant8<R: Real>(v: R) -> i64 {
    (v.to_f64_lossy() / 1e-8).round() as i64
}

/// Reconstruct the corrected gradient and field on the fine mesh.
///
/// For every fine node the macro state `(u0, Du0)` is interpolated, the
/// intermediate-cell corrector is solved (superposed from unit solves for
/// linear families), and the fast-cell corrector is looked up through the
/// shared evaluator caches.
pub fn corrector_reconstruct<R: Real>(
    u0: &Field<R>,
    coeff: &Coefficient<R>,
    eps: R,
    fine_mesh: &Arc<Mesh<R>>,
    mesh_y: &Arc<Mesh<R>>,
    mesh_z: &Arc<Mesh<R>>,
) -> Result<CorrectorReconstruction<R>> {
    let d = coeff.dim;
    let heval = HEvaluator::new(coeff, mesh_z);
    let du0_macro = u0.gradient()?;
    let linear = coeff.linear_in_lambda();

    // intermediate-cell corrector basis for linear families
    let slow_basis: Option<Vec<(Field<R>, Field<R>)>> = if linear {
        let mut b = Vec::new();
        for a in 0..d {
            let mut e = [R::zero(); 2];
            e[a] = R::one();
            let corr = crate::cell::solve_cell_y_with(&heval, R::zero(), e, mesh_y)?.corrector;
            let grad = corr.gradient()?;
            b.push((corr, grad));
        }
        Some(b)
    } else {
        None
    };
    let mut slow_cache: std::collections::HashMap<(i64, i64, i64), Arc<(Field<R>, Field<R>)>> =
        std::collections::HashMap::new();

    // fast-cell corrector basis for linear families
    let fast_basis: Option<Vec<(Field<R>, Field<R>)>> = if linear {
        let mut b = Vec::new();
        for a in 0..d {
            let mut e = [R::zero(); 2];
            e[a] = R::one();
            let vals = heval.corrector_values([R::zero(); 2], R::zero(), e)?;
            let f = Field::scalar(mesh_z.clone(), vals)?;
            let g = f.gradient()?;
            b.push((f, g));
        }
        Some(b)
    } else {
        None
    };

    let n = fine_mesh.node_count();
    let mut grad_vals = vec![R::zero(); n * d];
    let mut u_vals = vec![R::zero(); n];
    let mut du0_vals = vec![R::zero(); n * d];
    let e2 = eps * eps;

    for node in 0..n {
        let x = fine_mesh.node_coord(node);
        let r = u0.interp(x);
        let mut xi = [R::zero(); 2];
        for a in 0..d {
            xi[a] = du0_macro.interp_component(x, a);
            du0_vals[node * d + a] = xi[a];
        }
        let y = [x[0] / eps, x[1] / eps];
        let z = [x[0] / e2, x[1] / e2];

        // slow corrector value and gradient at y
        let (p1, g1) = if let Some(basis) = &slow_basis {
            let mut val = R::zero();
            let mut grad = [R::zero(); 2];
            for a in 0..d {
                val += xi[a] * basis[a].0.interp(y);
                for b in 0..d {
                    grad[b] += xi[a] * basis[a].1.interp_component(y, b);
                }
            }
            (val, grad)
        } else {
            let key = (quant8(r), quant8(xi[0]), quant8(xi[1]));
            let entry = match slow_cache.get(&key) {
                Some(e) => e.clone(),
                None => {
                    let corr = crate::cell::solve_cell_y_with(&heval, r, xi, mesh_y)?.corrector;
                    let grad = corr.gradient()?;
                    let e = Arc::new((corr, grad));
                    if slow_cache.len() >= RECON_CACHE_CAP {
                        return Err(Error::Resource(
                            "reconstruction corrector cache exceeded".into(),
                        ));
                    }
                    slow_cache.insert(key, e.clone());
                    e
                }
            };
            let val = entry.0.interp(y);
            let mut grad = [R::zero(); 2];
            for b in 0..d {
                grad[b] = entry.1.interp_component(y, b);
            }
            (val, grad)
        };

        // inner state seen by the fast cell
        let mut eta = [R::zero(); 2];
        for a in 0..d {
            eta[a] = xi[a] + g1[a];
        }

        let (p2, g2) = if let Some(basis) = &fast_basis {
            let mut val = R::zero();
            let mut grad = [R::zero(); 2];
            for a in 0..d {
                val += eta[a] * basis[a].0.interp(z);
                for b in 0..d {
                    grad[b] += eta[a] * basis[a].1.interp_component(z, b);
                }
            }
            (val, grad)
        } else {
            let vals = heval.corrector_values(y, r, eta)?;
            let f = Field {
                mesh: mesh_z.clone(),
                kind: FieldKind::Scalar,
                values: vals,
            };
            let g = f.gradient()?;
            let mut grad = [R::zero(); 2];
            for b in 0..d {
                grad[b] = g.interp_component(z, b);
            }
            (f.interp(z), grad)
        };

        for a in 0..d {
            grad_vals[node * d + a] = xi[a] + g1[a] + g2[a];
        }
        u_vals[node] = r + eps * p1 + e2 * p2;
    }

    Ok(CorrectorReconstruction {
        grad_recon: Field::vector(fine_mesh.clone(), grad_vals)?,
        u_recon: Field::scalar(fine_mesh.clone(), u_vals)?,
        du0_fine: Field::vector(fine_mesh.clone(), du0_vals)?,
    })
}
