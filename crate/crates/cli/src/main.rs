//! `reiterhom`: validate structural hypotheses, run the reiterated
//! convergence tester, solve nested cell problems, upscale the effective
//! flux, solve the macroscopic and fine-scale problems, and drive full
//! convergence studies.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use reiterhom_core::cell::{solve_cell_z, tabulate_flux};
use reiterhom_core::coeff::validate;
use reiterhom_core::config::ProblemConfig;
use reiterhom_core::fields::luxemburg_norm;
use reiterhom_core::meanvalue::sigma_test;
use reiterhom_core::mesh::Mesh;
use reiterhom_core::nfunc::dyadic_grid;
use reiterhom_core::solver::{solve, EllipticProblem, FluxSource};
use reiterhom_core::study::{emit_report, run_convergence_study};

#[derive(Parser)]
#[command(name = "reiterhom", about, version)]
struct Cli {
    /// Seed override for sampled checks.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory for generated files.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the growth report of the N-function and the hypothesis report
    /// of the coefficient.
    Validate { config: PathBuf },
    /// Run the weak reiterated convergence tester and emit its CSV.
    Sigma {
        config: PathBuf,
        /// Comma-separated decreasing scales, e.g. `0.25,0.125`.
        #[arg(long)]
        eps: Option<String>,
    },
    /// Solve one fast-cell problem and print the effective flux sample.
    Cell {
        config: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        y: f64,
        #[arg(long, default_value_t = 0.0)]
        r: f64,
        /// Comma-separated gradient state, e.g. `1.0` or `1.0,0.5`.
        #[arg(long, default_value = "1.0")]
        xi: String,
    },
    /// Tabulate the macroscopic flux and write it as CSV plus metadata.
    Upscale { config: PathBuf },
    /// Solve the homogenized problem and write the solution field.
    Macro { config: PathBuf },
    /// Solve the fine-scale problem at one epsilon and write the solution.
    Eps {
        config: PathBuf,
        #[arg(long)]
        eps: f64,
    },
    /// Run the full convergence study; exit nonzero if a trend check fails.
    Converge { config: PathBuf },
}

fn main() {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .ok();
    }
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(2);
        }
    }
}

fn load(path: &Path, seed: Option<u64>) -> Result<ProblemConfig> {
    let mut cfg = ProblemConfig::from_file(path)
        .with_context(|| format!("loading config {}", path.display()))?;
    if let Some(s) = seed {
        cfg.solver.seed = s;
    }
    Ok(cfg)
}

fn parse_vec2(text: &str) -> Result<[f64; 2]> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .context("parsing comma-separated reals")?;
    match parts.len() {
        1 => Ok([parts[0], 0.0]),
        2 => Ok([parts[0], parts[1]]),
        n => bail!("expected 1 or 2 components, got {n}"),
    }
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Validate { config } => {
            let cfg = load(&config, cli.seed)?;
            let coeff = cfg.build_coefficient::<f64>()?;
            let grid = dyadic_grid(1e-3, 1e3, 200);
            let growth = coeff.phi.growth_report(&grid)?;
            println!("== growth report ==");
            print!("{}", growth.text_block());
            println!("csv: delta2,delta_prime,simonenko_lo,simonenko_hi");
            println!("csv: {}", growth.csv_row());
            let report = validate(&coeff, cfg.solver.samples, cfg.solver.seed)?;
            println!("\n== hypothesis report ==");
            print!("{}", report.text_block());
            Ok(if report.all_pass() { 0 } else { 1 })
        }
        Command::Sigma { config, eps } => {
            let cfg = load(&config, cli.seed)?;
            let eps_list: Vec<f64> = match eps {
                Some(s) => s
                    .split(',')
                    .map(|t| t.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .context("parsing --eps")?,
                None => cfg.solver.eps_list.clone(),
            };
            let u0 = cfg.sigma_field::<f64>(&cfg.sigma.u0)?;
            let f = cfg.sigma_field::<f64>(&cfg.sigma.f)?;
            let finest = eps_list.last().copied().unwrap_or(0.25);
            let n = ((4.0 / (finest * finest)).ceil() as usize).clamp(cfg.domain.n, 16384);
            let mesh = Mesh::<f64>::new(
                cfg.domain.dim,
                [0.0; 2],
                [1.0; 2],
                [n, if cfg.domain.dim == 2 { n } else { 1 }],
                false,
            )?;
            let report = sigma_test(&u0, &f, &mesh, &eps_list)?;
            print!("{}", report.csv());
            std::fs::create_dir_all(&cli.out)?;
            std::fs::write(cli.out.join("sigma.csv"), report.csv())?;
            Ok(if report.trend_ok() { 0 } else { 1 })
        }
        Command::Cell { config, y, r, xi } => {
            let cfg = load(&config, cli.seed)?;
            let coeff = cfg.build_coefficient::<f64>()?;
            let mesh = cfg.cell_mesh::<f64>()?;
            let xi = parse_vec2(&xi)?;
            let sol = solve_cell_z(&coeff, [y, 0.0], r, xi, &mesh)?;
            if coeff.dim == 1 {
                println!("h = {:.12e}", sol.flux_sample[0]);
            } else {
                println!(
                    "h = ({:.12e}, {:.12e})",
                    sol.flux_sample[0], sol.flux_sample[1]
                );
            }
            println!("residual = {:.3e}", sol.residual);
            println!("newton_iters = {}", sol.newton_iters);
            Ok(0)
        }
        Command::Upscale { config } => {
            let cfg = load(&config, cli.seed)?;
            let coeff = cfg.build_coefficient::<f64>()?;
            let mesh = cfg.cell_mesh::<f64>()?;
            let r_grid = cfg.solver.r_grid.clone().unwrap_or_else(|| vec![0.0]);
            let nodes = cfg.solver.xi_nodes.max(2) | 1;
            let xi_grid: Vec<f64> = (0..nodes)
                .map(|i| cfg.solver.xi_max * (2.0 * i as f64 / (nodes - 1) as f64 - 1.0))
                .collect();
            let grids = vec![xi_grid; coeff.dim];
            let table = tabulate_flux(&coeff, &r_grid, &grids, &mesh, &mesh)?;
            std::fs::create_dir_all(&cli.out)?;
            std::fs::write(cli.out.join("flux_table.csv"), table.csv())?;
            std::fs::write(cli.out.join("flux_table.meta"), table.metadata_block())?;
            println!(
                "wrote {} nodes to {}",
                table.values.len(),
                cli.out.join("flux_table.csv").display()
            );
            Ok(0)
        }
        Command::Macro { config } => {
            let cfg = load(&config, cli.seed)?;
            let coeff = cfg.build_coefficient::<f64>()?;
            let cell = cfg.cell_mesh::<f64>()?;
            let r_grid = cfg.solver.r_grid.clone().unwrap_or_else(|| vec![0.0]);
            let nodes = cfg.solver.xi_nodes.max(2) | 1;
            let xi_grid: Vec<f64> = (0..nodes)
                .map(|i| cfg.solver.xi_max * (2.0 * i as f64 / (nodes - 1) as f64 - 1.0))
                .collect();
            let grids = vec![xi_grid; coeff.dim];
            let table = Arc::new(tabulate_flux(&coeff, &r_grid, &grids, &cell, &cell)?);
            let mesh = cfg.macro_mesh::<f64>()?;
            let rhs = cfg.rhs_field(&mesh)?;
            let problem = EllipticProblem {
                mesh: mesh.clone(),
                flux_source: FluxSource::Effective { table },
                rhs,
            };
            let rep = solve(&problem, cfg.solver.tol)?;
            write_solution(&cli.out, "macro", &rep, &coeff.phi)?;
            Ok(0)
        }
        Command::Eps { config, eps } => {
            let cfg = load(&config, cli.seed)?;
            let coeff = Arc::new(cfg.build_coefficient::<f64>()?);
            let mesh = cfg.fine_mesh::<f64>(eps)?;
            let rhs = cfg.rhs_field(&mesh)?;
            let problem = EllipticProblem {
                mesh: mesh.clone(),
                flux_source: FluxSource::Direct {
                    coeff: coeff.clone(),
                    eps,
                    clamp: None,
                },
                rhs,
            };
            let rep = solve(&problem, cfg.solver.tol)?;
            write_solution(&cli.out, &format!("eps_{eps}"), &rep, &coeff.phi)?;
            Ok(0)
        }
        Command::Converge { config } => {
            let cfg = load(&config, cli.seed)?;
            let out = run_convergence_study::<f64>(&cfg)?;
            emit_report(&out, &cli.out)?;
            println!("{}", out.table.csv());
            for s in &out.stats {
                println!("{s}");
            }
            if out.violations.is_empty() {
                println!("all trend checks hold");
                Ok(0)
            } else {
                for v in &out.violations {
                    eprintln!("trend violated: {v}");
                }
                Ok(1)
            }
        }
    }
}

fn write_solution(
    out: &Path,
    tag: &str,
    rep: &reiterhom_core::SolveReport64,
    phi: &reiterhom_core::NFunction64,
) -> Result<()> {
    std::fs::create_dir_all(out)?;
    let path = out.join(format!("{tag}.csv"));
    let mut buf = Vec::new();
    rep.solution.write_csv(&mut buf)?;
    std::fs::write(&path, buf)?;
    let grad = rep.solution.gradient()?;
    let norm_u = luxemburg_norm(&rep.solution, phi)?;
    let norm_du = luxemburg_norm(&grad, phi)?;
    let report = format!(
        "residual = {:.3e}\nnewton_iters = {}\nenergy = {:.6e}\nluxemburg_u = {:.6e}\nluxemburg_du = {:.6e}\n",
        rep.residual, rep.newton_iters, rep.energy, norm_u, norm_du
    );
    std::fs::write(out.join(format!("{tag}.report.txt")), &report)?;
    println!("wrote {}", path.display());
    print!("{report}");
    Ok(())
}
