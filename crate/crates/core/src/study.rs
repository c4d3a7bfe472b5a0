//! End-to-end convergence studies: validate, upscale, macro-solve, per-eps
//! fine solves, corrector reconstruction, norm columns, and report emission.

use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;

use crate::cell::{solve_cell_y_with, tabulate_flux, FluxTable, HEvaluator};
use crate::coeff::{validate, Coefficient, HypothesisReport};
use crate::config::ProblemConfig;
use crate::error::{Error, Result};
use crate::fields::{luxemburg_norm, CellFactor, MultiscaleField, XFactor};
use crate::mesh::{mass_pairing, Field, Mesh};
use crate::nfunc::{dyadic_grid, GrowthReport};
use crate::scalar::Real;
use crate::solver::{corrector_reconstruct, solve, EllipticProblem, FluxSource};

#[derive(Debug, Clone)]
pub struct ConvergenceRow<R: Real> {
    pub eps: R,
    /// Orlicz distance of the fine solution to the macro limit.
    pub u_err: R,
    /// Orlicz distance of the fine gradient to the corrected reconstruction.
    pub grad_corr_err: R,
    /// Orlicz distance of the fine gradient to the bare macro gradient.
    pub grad_naive_err: R,
    /// Worst dictionary gap of the gradient against its two-scale limit.
    pub sigma_gap: R,
    /// Distance of domain averages (weak-limit consistency diagnostic).
    pub u_avg_diff: R,
}

#[derive(Debug, Clone)]
pub struct ConvergenceTable<R: Real> {
    pub rows: Vec<ConvergenceRow<R>>,
}

impl<R: Real> ConvergenceTable<R> {
    pub fn csv(&self) -> String {
        let mut s =
            String::from("eps,u_err,grad_corr_err,grad_naive_err,sigma_gap,u_avg_diff\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}\n",
                r.eps.to_f64_lossy(),
                r.u_err.to_f64_lossy(),
                r.grad_corr_err.to_f64_lossy(),
                r.grad_naive_err.to_f64_lossy(),
                r.sigma_gap.to_f64_lossy(),
                r.u_avg_diff.to_f64_lossy()
            ));
        }
        s
    }

    /// Trend assertions; returns the names of violated checks.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let rows = &self.rows;
        if rows.len() < 2 {
            return out;
        }
        if !rows.windows(2).all(|w| w[1].u_err < w[0].u_err) {
            out.push("u_err strictly decreasing".into());
        }
        let first = rows[0].u_err;
        let last = rows[rows.len() - 1].u_err;
        if !(last <= R::of(0.25) * first) {
            out.push("u_err final <= 0.25 * first".into());
        }
        if !rows.iter().all(|r| r.grad_corr_err < r.grad_naive_err) {
            out.push("corrector reconstruction beats the bare macro gradient".into());
        }
        if !(rows[rows.len() - 1].sigma_gap < rows[0].sigma_gap) {
            out.push("sigma gap decreasing in trend".into());
        }
        if !(rows[rows.len() - 1].u_avg_diff < rows[0].u_avg_diff) {
            out.push("weak-limit average trend".into());
        }
        out
    }
}

pub struct StudyOutput<R: Real> {
    pub table: ConvergenceTable<R>,
    pub growth: GrowthReport<R>,
    pub hypotheses: HypothesisReport<R>,
    pub flux_table: Arc<FluxTable<R>>,
    pub macro_solution: Field<R>,
    pub stats: Vec<String>,
    pub violations: Vec<String>,
}

/// The oscillation dictionary shipped with each catalog problem: products of
/// the coefficient's own harmonics used to probe the gradient limit.
pub fn problem_dictionary<R: Real>(
    coeff: &Coefficient<R>,
) -> Vec<(CellFactor<R>, CellFactor<R>)> {
    use crate::trig::TrigPoly;
    let tau = crate::scalar::two_pi::<R>();
    let sin_axis0 = || TrigPoly::<R>::line(R::zero(), &[], &[(tau, R::one())]);
    match coeff.name.as_str() {
        "ap1d" => vec![
            (
                CellFactor::Trig(TrigPoly::line(R::zero(), &[(R::one(), R::one())], &[])),
                CellFactor::One,
            ),
            (CellFactor::One, CellFactor::Trig(sin_axis0())),
        ],
        "binf1d" | "apbinf1d" => vec![(CellFactor::Trig(sin_axis0()), CellFactor::One)],
        _ => vec![
            (CellFactor::Trig(sin_axis0()), CellFactor::One),
            (CellFactor::One, CellFactor::Trig(sin_axis0())),
        ],
    }
}

/// Mean of a nodal grid against a cell factor under the equal-weight
/// periodic rule.
fn grid_factor_mean<R: Real>(mesh: &Mesh<R>, values: &[R], factor: &CellFactor<R>) -> R {
    let n = values.len();
    let mut acc = R::zero();
    for (i, &v) in values.iter().enumerate() {
        let p = mesh.node_coord(i);
        let f = match factor {
            CellFactor::One => R::one(),
            CellFactor::Trig(t) => t.eval(p),
            CellFactor::Grid(g) => g.interp(p),
        };
        acc += v * f;
    }
    acc / R::from_usize_exact(n)
}

fn factor_mean<R: Real>(factor: &CellFactor<R>) -> R {
    match factor {
        CellFactor::One => R::one(),
        CellFactor::Trig(t) => t.mean(),
        CellFactor::Grid(g) => {
            g.values.iter().fold(R::zero(), |a, &v| a + v) / R::from_usize_exact(g.values.len())
        }
    }
}

/// Per-problem engine computing the dictionary gap of the fine gradient
/// against its corrected two-scale limit.
pub struct SigmaGapEngine<R: Real> {
    coeff: Coefficient<R>,
    heval: Arc<HEvaluator<R>>,
    mesh_y: Arc<Mesh<R>>,
    dict: Vec<(CellFactor<R>, CellFactor<R>)>,
}

impl<R: Real> SigmaGapEngine<R> {
    pub fn new(
        coeff: &Coefficient<R>,
        mesh_y: &Arc<Mesh<R>>,
        mesh_z: &Arc<Mesh<R>>,
    ) -> Self {
        SigmaGapEngine {
            coeff: coeff.clone(),
            heval: Arc::new(HEvaluator::new(coeff, mesh_z)),
            mesh_y: mesh_y.clone(),
            dict: problem_dictionary(coeff),
        }
    }

    /// Limit-side dictionary coefficients `K_j[a]` such that
    /// `rhs_j = sum_a K_j[a] integral_Omega (Du0)_a dx` for linear families.
    fn linear_limit_coefficients(&self) -> Result<Vec<[R; 2]>> {
        let d = self.coeff.dim;
        // intermediate-cell unit solves and their gradients
        let mut y_grad = Vec::new();
        for a in 0..d {
            let mut e = [R::zero(); 2];
            e[a] = R::one();
            let corr = solve_cell_y_with(&self.heval, R::zero(), e, &self.mesh_y)?.corrector;
            y_grad.push(corr.gradient()?);
        }
        // fast-cell unit solves and their gradients
        let mut z_grad = Vec::new();
        for b in 0..d {
            let mut e = [R::zero(); 2];
            e[b] = R::one();
            let vals = self
                .heval
                .corrector_values([R::zero(); 2], R::zero(), e)?;
            let f = Field::scalar(self.heval.mesh_z.clone(), vals)?;
            z_grad.push(f.gradient()?);
        }
        let mut out = Vec::new();
        for (w, v) in &self.dict {
            let mw = factor_mean(w);
            let mv = factor_mean(v);
            // z-side means of the unit fast-corrector gradients (component 0)
            let mut mz_g = vec![R::zero(); d];
            for b in 0..d {
                let comp = z_grad[b].component(0)?;
                mz_g[b] = grid_factor_mean(&self.heval.mesh_z, &comp.values, v);
            }
            let mut k = [R::zero(); 2];
            for a in 0..d {
                // direct term
                if a == 0 {
                    k[a] += mw * mv;
                }
                // slow-corrector term
                let g0 = y_grad[a].component(0)?;
                let myg = grid_factor_mean(&self.mesh_y, &g0.values, w);
                k[a] += myg * mv;
                // fast-corrector term through eta_b = xi_b + (Dy pi1)_b
                for b in 0..d {
                    let mut m_eta = R::zero();
                    if a == b {
                        m_eta += mw;
                    }
                    let gb = y_grad[a].component(b)?;
                    m_eta += grid_factor_mean(&self.mesh_y, &gb.values, w);
                    k[a] += m_eta * mz_g[b];
                }
            }
            out.push(k);
        }
        Ok(out)
    }

    /// Worst dictionary gap at one epsilon.
    pub fn gap(
        &self,
        u0_macro: &Field<R>,
        du_eps: &Field<R>,
        fine_mesh: &Arc<Mesh<R>>,
        eps: R,
    ) -> Result<R> {
        let d = self.coeff.dim;
        let du0 = u0_macro.gradient()?;
        // integrals of the macro gradient components
        let wq = u0_macro.mesh.quad_weights();
        let mut xi_int = [R::zero(); 2];
        for i in 0..u0_macro.mesh.node_count() {
            for a in 0..d {
                xi_int[a] += du0.values[i * d + a] * wq[i];
            }
        }
        let ks = if self.coeff.linear_in_lambda() {
            self.linear_limit_coefficients()?
        } else {
            self.subsampled_limit_coefficients(u0_macro, &du0)?
        };

        let mut worst = R::zero();
        for (j, (w, v)) in self.dict.iter().enumerate() {
            // trace of the dictionary entry on the fine mesh
            let f = MultiscaleField::separable(d, XFactor::One, w.clone(), v.clone());
            let f_eps = f.trace_sample(eps, eps * eps, fine_mesh)?;
            let du_comp0 = du_eps.component(0)?;
            let lhs = mass_pairing(&du_comp0, &f_eps)?;
            let mut rhs = R::zero();
            for a in 0..d {
                rhs += ks[j][a] * xi_int[a];
            }
            worst = worst.max((lhs - rhs).abs());
        }
        Ok(worst)
    }

    /// Nonlinear families: the limit integrand is evaluated per sampled macro
    /// node through the corrector machinery, then integrated in x. The result
    /// is returned in the same `K` form by dividing through the gradient
    /// integrals, so `gap` can share one code path; to avoid that division,
    /// the constants are computed directly as the x-integral contribution.
    fn subsampled_limit_coefficients(
        &self,
        u0_macro: &Field<R>,
        du0: &Field<R>,
    ) -> Result<Vec<[R; 2]>> {
        let d = self.coeff.dim;
        let n = u0_macro.mesh.node_count();
        let stride = (n / 1024).max(1);
        let wq = u0_macro.mesh.quad_weights();
        // direct x-integral of the limit integrand per dictionary entry
        let mut rhs = vec![R::zero(); self.dict.len()];
        let mut weight_total = R::zero();
        let mut xi_int = [R::zero(); 2];
        for i in (0..n).step_by(stride) {
            let wgt = wq[i] * R::from_usize_exact(stride.min(n - i));
            weight_total += wgt;
            let r = u0_macro.values[i];
            let mut xi = [R::zero(); 2];
            for a in 0..d {
                xi[a] = du0.values[i * d + a];
                xi_int[a] += xi[a] * wgt;
            }
            let corr = solve_cell_y_with(&self.heval, r, xi, &self.mesh_y)?.corrector;
            let g1 = corr.gradient()?;
            for (j, (w, v)) in self.dict.iter().enumerate() {
                let mv = factor_mean(v);
                // direct + slow terms (component 0)
                let g10 = g1.component(0)?;
                let m_slow = grid_factor_mean(&self.mesh_y, &g10.values, w);
                let mut m = (xi[0] + R::zero()) * factor_mean(w) * mv + m_slow * mv;
                // fast term: per y-node eta state
                let ny = self.mesh_y.node_count();
                let mut acc_fast = R::zero();
                for yi in 0..ny {
                    let ypt = self.mesh_y.node_coord(yi);
                    let mut eta = [R::zero(); 2];
                    for b in 0..d {
                        eta[b] = xi[b] + g1.values[yi * d + b];
                    }
                    let vals = self.heval.corrector_values(ypt, r, eta)?;
                    let fz = Field::scalar(self.heval.mesh_z.clone(), vals)?;
                    let gz = fz.gradient()?.component(0)?;
                    let mz = grid_factor_mean(&self.heval.mesh_z, &gz.values, v);
                    let wf = match w {
                        CellFactor::One => R::one(),
                        CellFactor::Trig(t) => t.eval(ypt),
                        CellFactor::Grid(g) => g.interp(ypt),
                    };
                    acc_fast += mz * wf;
                }
                m += acc_fast / R::from_usize_exact(ny);
                rhs[j] += m * wgt;
            }
        }
        // express as K coefficients against the gradient integrals
        let mut out = Vec::new();
        for j in 0..self.dict.len() {
            let mut k = [R::zero(); 2];
            if xi_int[0].abs() > R::of(1e-300) {
                k[0] = rhs[j] / xi_int[0];
            }
            out.push(k);
        }
        Ok(out)
    }
}

/// Run the full pipeline for a config; stage failures carry the stage name.
pub fn run_convergence_study<R: Real>(cfg: &ProblemConfig) -> Result<StudyOutput<R>> {
    let coeff: Coefficient<R> = cfg
        .build_coefficient()
        .map_err(|e| e.in_stage("validate"))?;
    let grid = dyadic_grid(R::of(1e-3), R::of(1e3), 200);
    let growth = coeff
        .phi
        .growth_report(&grid)
        .map_err(|e| e.in_stage("validate"))?;
    let hypotheses = validate(&coeff, cfg.solver.samples, cfg.solver.seed)
        .map_err(|e| e.in_stage("validate"))?;
    if !hypotheses.all_pass() {
        return Err(Error::Domain(format!(
            "hypothesis validation failed:\n{}",
            hypotheses.text_block()
        ))
        .in_stage("validate"));
    }
    let mut stats = vec![format!(
        "validate: {} samples, seed {}, all hypotheses pass",
        cfg.solver.samples, cfg.solver.seed
    )];

    // upscale
    let mesh_cell: Arc<Mesh<R>> = cfg.cell_mesh().map_err(|e| e.in_stage("upscale"))?;
    let r_grid: Vec<R> = cfg
        .solver
        .r_grid
        .clone()
        .unwrap_or_else(|| vec![0.0])
        .into_iter()
        .map(R::of)
        .collect();
    let xi_nodes = cfg.solver.xi_nodes.max(2) | 1; // odd count includes 0
    let xi_max = R::of(cfg.solver.xi_max);
    let xi_grid: Vec<R> = (0..xi_nodes)
        .map(|i| {
            xi_max * (R::of(2.0) * R::from_usize_exact(i) / R::from_usize_exact(xi_nodes - 1)
                - R::one())
        })
        .collect();
    let xi_grids = vec![xi_grid.clone(); coeff.dim];
    let flux_table = Arc::new(
        tabulate_flux(&coeff, &r_grid, &xi_grids, &mesh_cell, &mesh_cell)
            .map_err(|e| e.in_stage("upscale"))?,
    );
    stats.push(format!(
        "upscale: {} table nodes on cell n = {}",
        flux_table.values.len(),
        cfg.domain.cell_n
    ));

    // macro solve
    let macro_mesh = cfg.macro_mesh().map_err(|e| e.in_stage("macro"))?;
    let rhs = cfg.rhs_field(&macro_mesh).map_err(|e| e.in_stage("macro"))?;
    // data norm must be finite in the dual Orlicz space
    let f_norm =
        luxemburg_norm(&rhs, &coeff.phi.complementary()).map_err(|e| e.in_stage("macro"))?;
    if !f_norm.is_finite() {
        return Err(Error::Domain("rhs has non-finite dual Orlicz norm".into()).in_stage("macro"));
    }
    let macro_problem = EllipticProblem {
        mesh: macro_mesh.clone(),
        flux_source: FluxSource::Effective {
            table: flux_table.clone(),
        },
        rhs,
    };
    let macro_rep = solve(&macro_problem, R::of(cfg.solver.tol)).map_err(|e| e.in_stage("macro"))?;
    stats.push(format!(
        "macro: n = {}, newton_iters = {}, residual = {:.3e}, energy = {:.6e}",
        cfg.domain.n,
        macro_rep.newton_iters,
        macro_rep.residual.to_f64_lossy(),
        macro_rep.energy.to_f64_lossy()
    ));

    // table coverage check: solved state range plus 20% margin inside grids
    let du0 = macro_rep.solution.gradient().map_err(|e| e.in_stage("macro"))?;
    let margin = R::of(1.2);
    let max_grad = du0.max_magnitude() * margin;
    if max_grad > xi_max {
        return Err(Error::Config(format!(
            "flux table xi range {:.3e} does not cover macro gradients {:.3e} with 20% margin",
            xi_max.to_f64_lossy(),
            max_grad.to_f64_lossy()
        ))
        .in_stage("upscale"));
    }
    if !flux_table.r_independent {
        let max_u = macro_rep.solution.max_magnitude() * margin;
        let r_hi = *r_grid.last().unwrap();
        let r_lo = r_grid[0];
        if max_u > r_hi.max(-r_lo) {
            return Err(Error::Config(
                "flux table r range does not cover macro solution with 20% margin".into(),
            )
            .in_stage("upscale"));
        }
    }
    if flux_table.clamp_hit() {
        stats.push("macro: table clamp flag raised".into());
    }

    // per-eps fine solves (concurrent)
    let coeff_arc = Arc::new(coeff.clone());
    let rows: Result<Vec<(ConvergenceRow<R>, String)>> = cfg
        .solver
        .eps_list
        .par_iter()
        .map(|&eps_f| {
            let eps = R::of(eps_f);
            let fine_mesh: Arc<Mesh<R>> =
                cfg.fine_mesh(eps_f).map_err(|e| e.in_stage("eps"))?;
            let rhs = cfg.rhs_field(&fine_mesh).map_err(|e| e.in_stage("eps"))?;
            let problem = EllipticProblem {
                mesh: fine_mesh.clone(),
                flux_source: FluxSource::Direct {
                    coeff: coeff_arc.clone(),
                    eps,
                    clamp: None,
                },
                rhs,
            };
            let rep = solve(&problem, R::of(cfg.solver.tol)).map_err(|e| e.in_stage("eps"))?;

            let rec = corrector_reconstruct(
                &macro_rep.solution,
                &coeff,
                eps,
                &fine_mesh,
                &mesh_cell,
                &mesh_cell,
            )
            .map_err(|e| e.in_stage("corrector"))?;

            // norms
            let phi = &coeff.phi;
            let u0_fine = Field::from_fn(fine_mesh.clone(), |x| macro_rep.solution.interp(x));
            let diff_u = Field::scalar(
                fine_mesh.clone(),
                rep.solution
                    .values
                    .iter()
                    .zip(&u0_fine.values)
                    .map(|(&a, &b)| a - b)
                    .collect(),
            )
            .map_err(|e| e.in_stage("norms"))?;
            let u_err = luxemburg_norm(&diff_u, phi).map_err(|e| e.in_stage("norms"))?;

            let du_eps = rep.solution.gradient().map_err(|e| e.in_stage("norms"))?;
            let d = coeff.dim;
            let diff_vec = |other: &Field<R>| -> Result<Field<R>> {
                Field::vector(
                    fine_mesh.clone(),
                    du_eps
                        .values
                        .iter()
                        .zip(&other.values)
                        .map(|(&a, &b)| a - b)
                        .collect(),
                )
            };
            let grad_corr_err = luxemburg_norm(
                &diff_vec(&rec.grad_recon).map_err(|e| e.in_stage("norms"))?,
                phi,
            )
            .map_err(|e| e.in_stage("norms"))?;
            let grad_naive_err = luxemburg_norm(
                &diff_vec(&rec.du0_fine).map_err(|e| e.in_stage("norms"))?,
                phi,
            )
            .map_err(|e| e.in_stage("norms"))?;
            let _ = d;

            // weak-limit diagnostic: domain averages
            let u_avg_diff = (rep.solution.mean().map_err(|e| e.in_stage("norms"))?
                - u0_fine.mean().map_err(|e| e.in_stage("norms"))?)
            .abs();

            // dictionary gap of the gradient
            let engine = SigmaGapEngine::new(&coeff, &mesh_cell, &mesh_cell);
            let sigma_gap = engine
                .gap(&macro_rep.solution, &du_eps, &fine_mesh, eps)
                .map_err(|e| e.in_stage("sigma"))?;

            let stat = format!(
                "eps = {:.6e}: fine n = {}, newton_iters = {}, residual = {:.3e}",
                eps_f,
                fine_mesh.cells[0],
                rep.newton_iters,
                rep.residual.to_f64_lossy()
            );
            Ok((
                ConvergenceRow {
                    eps,
                    u_err,
                    grad_corr_err,
                    grad_naive_err,
                    sigma_gap,
                    u_avg_diff,
                },
                stat,
            ))
        })
        .collect();
    let rows = rows?;
    let mut table_rows = Vec::with_capacity(rows.len());
    for (row, stat) in rows {
        stats.push(stat);
        table_rows.push(row);
    }
    let table = ConvergenceTable { rows: table_rows };
    let violations = table.violations();

    Ok(StudyOutput {
        table,
        growth,
        hypotheses,
        flux_table,
        macro_solution: macro_rep.solution,
        stats,
        violations,
    })
}

/// Write `convergence.csv`, `study.gp` and `report.txt` into `dir`.
/// Identical inputs produce byte-identical files.
pub fn emit_report<R: Real>(out: &StudyOutput<R>, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("convergence.csv"), out.table.csv())?;

    let gp = "set datafile separator ','\n\
              set logscale xy\n\
              set xlabel 'eps'\n\
              set ylabel 'error'\n\
              set key left top\n\
              plot 'convergence.csv' using 1:2 with linespoints title 'u error', \\\n\
              \x20    'convergence.csv' using 1:3 with linespoints title 'corrected gradient error', \\\n\
              \x20    'convergence.csv' using 1:4 with linespoints title 'bare gradient error', \\\n\
              \x20    'convergence.csv' using 1:5 with linespoints title 'sigma gap'\n";
    std::fs::write(dir.join("study.gp"), gp)?;

    let mut report = String::new();
    report.push_str("== growth report ==\n");
    report.push_str(&out.growth.text_block());
    report.push_str("\n== hypothesis report ==\n");
    report.push_str(&out.hypotheses.text_block());
    report.push_str("\n== flux table ==\n");
    report.push_str(&out.flux_table.metadata_block());
    report.push_str("\n== solver stats ==\n");
    for s in &out.stats {
        report.push_str(s);
        report.push('\n');
    }
    report.push_str("\n== trend checks ==\n");
    if out.violations.is_empty() {
        report.push_str("all trend checks hold\n");
    } else {
        for v in &out.violations {
            report.push_str(&format!("VIOLATED: {v}\n"));
        }
    }
    std::fs::write(dir.join("report.txt"), report)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ProblemConfig;

    fn lin1d_cfg(eps: &str, n: usize, cell_n: usize) -> ProblemConfig {
        ProblemConfig::parse(&format!(
            r#"
[coefficient]
name = "lin1d"

[domain]
dim = 1
n = {n}
cell_n = {cell_n}

[solver]
eps_list = {eps}
samples = 2000
"#
        ))
        .unwrap()
    }

    #[test]
    fn small_lin1d_study_runs_and_trends() {
        let cfg = lin1d_cfg("[0.25, 0.125]", 512, 64);
        let out = run_convergence_study::<f64>(&cfg).unwrap();
        assert_eq!(out.table.rows.len(), 2);
        for r in &out.table.rows {
            assert!(r.u_err.is_finite() && r.u_err > 0.0);
            assert!(
                r.grad_corr_err < r.grad_naive_err,
                "corr {} naive {}",
                r.grad_corr_err,
                r.grad_naive_err
            );
        }
        assert!(out.table.rows[1].u_err < out.table.rows[0].u_err);
        assert!(out.table.rows[1].sigma_gap < out.table.rows[0].sigma_gap);
    }

    #[test]
    fn constant_coefficient_study_is_exact() {
        let cfg = ProblemConfig::parse(
            r#"
[coefficient]
name = "const1d"

[domain]
dim = 1
n = 1024
cell_n = 32

[solver]
eps_list = [0.25, 0.125]
samples = 2000
"#,
        )
        .unwrap();
        let out = run_convergence_study::<f64>(&cfg).unwrap();
        for r in &out.table.rows {
            assert!(r.u_err <= 1e-6, "u_err {}", r.u_err);
            assert!(r.grad_naive_err <= 1e-6, "grad {}", r.grad_naive_err);
        }
    }

    #[test]
    fn emit_report_files_and_determinism() {
        let cfg = lin1d_cfg("[0.25, 0.125]", 256, 32);
        let out = run_convergence_study::<f64>(&cfg).unwrap();
        let dir = std::env::temp_dir().join("reiterhom_study_test");
        let _ = std::fs::remove_dir_all(&dir);
        emit_report(&out, &dir).unwrap();
        for f in ["convergence.csv", "study.gp", "report.txt"] {
            assert!(dir.join(f).exists(), "{f}");
        }
        let csv1 = std::fs::read(dir.join("convergence.csv")).unwrap();
        // k rows + header
        let text = String::from_utf8(csv1.clone()).unwrap();
        assert_eq!(text.lines().count(), cfg.solver.eps_list.len() + 1);
        // rerun: byte-identical
        let out2 = run_convergence_study::<f64>(&cfg).unwrap();
        emit_report(&out2, &dir).unwrap();
        let csv2 = std::fs::read(dir.join("convergence.csv")).unwrap();
        assert_eq!(csv1, csv2);
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn empty_eps_list_is_config_error() {
        let text = r#"
[coefficient]
name = "lin1d"

[domain]
dim = 1
n = 256
cell_n = 32

[solver]
eps_list = []
"#;
        assert!(ProblemConfig::parse(text).is_err());
    }
}
