use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use curved_hho::geometry::io::{read_mesh, write_mesh};
use curved_hho::geometry::validate_mesh;
use curved_hho::harness::{
    compute_reference, dat_string, ellipse_case, emit_dat, format_table, hetero_case, mesh_table, metadata_json,
    run_convergence, sample_solution, samples_to_csv, solve_case, Convergence, MeshMode, Reference, SolveOptions,
    Sweep,
};
use curved_hho::{Error, Result};

#[derive(Parser)]
#[command(name = "curved-hho", about = "HHO solver on meshes with curved faces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum TestArg {
    Ellipse,
    Hetero,
}

#[derive(Clone, Copy, ValueEnum)]
enum MeshArg {
    Curved,
    Straight,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepArg {
    H,
    K,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReferenceArg {
    /// Solve on a fine curved mesh (see --ref-mesh, --ref-k).
    Compute,
    /// Use the printed values 0.46006947 and 0.80699766.
    Published,
}

#[derive(Subcommand)]
enum Command {
    /// Run a convergence study and write .dat tables.
    Run {
        #[arg(long, value_enum, default_value = "ellipse")]
        test: TestArg,
        /// Face degree for h-sweeps, largest degree for k-sweeps.
        #[arg(long, default_value_t = 1)]
        k: usize,
        /// Number of meshes in an h-sweep.
        #[arg(long, default_value_t = 4)]
        levels: usize,
        /// First mesh number (defaults: 2 for the ellipse, 1 for the disc).
        #[arg(long)]
        first_mesh: Option<usize>,
        #[arg(long, value_enum, default_value = "curved")]
        mesh: MeshArg,
        #[arg(long, value_enum, default_value = "h")]
        sweep: SweepArg,
        #[arg(long, default_value_t = 30)]
        quad_points: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Write every mesh of the sweep in the text mesh format.
        #[arg(long)]
        dump_mesh: bool,
        /// Solve the uncondensed system instead of the condensed one.
        #[arg(long)]
        debug_uncondensed: bool,
        /// Write a CSV of the reconstructed solution on an N x N grid for the last run.
        #[arg(long)]
        sample: Option<usize>,
        #[arg(long, value_enum, default_value = "compute")]
        reference: ReferenceArg,
        #[arg(long, default_value_t = 4)]
        ref_mesh: usize,
        #[arg(long, default_value_t = 7)]
        ref_k: usize,
        /// Exit with status 2 when the study misses its expected rates.
        #[arg(long)]
        check: bool,
    },
    /// Check a mesh file for structural problems.
    Validate { file: PathBuf },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Validate { file } => {
            let mesh = read_mesh(&file)?;
            let violations = validate_mesh(&mesh);
            println!(
                "{}: {} elements, {} faces, h = {:.6}",
                file.display(),
                mesh.num_elements(),
                mesh.faces.len(),
                mesh.h
            );
            for v in &violations {
                println!("  {v}");
            }
            Ok(if violations.is_empty() {
                println!("valid");
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
        Command::Run {
            test,
            k,
            levels,
            first_mesh,
            mesh,
            sweep,
            quad_points,
            out,
            dump_mesh,
            debug_uncondensed,
            sample,
            reference,
            ref_mesh,
            ref_k,
            check,
        } => {
            let case = match test {
                TestArg::Ellipse => ellipse_case(),
                TestArg::Hetero => hetero_case(),
            };
            let mode = match mesh {
                MeshArg::Curved => MeshMode::Curved,
                MeshArg::Straight => MeshMode::Straight,
            };
            let sweep = match sweep {
                SweepArg::H => Sweep::H,
                SweepArg::K => Sweep::K,
            };
            let first = first_mesh.unwrap_or(match test {
                TestArg::Ellipse => 2,
                TestArg::Hetero => 1,
            });
            let opts = SolveOptions {
                quad_points,
                uncondensed: debug_uncondensed,
            };
            std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            let reference = match (test, reference) {
                (TestArg::Ellipse, _) => None,
                (TestArg::Hetero, ReferenceArg::Published) => Some(Reference::published()),
                (TestArg::Hetero, ReferenceArg::Compute) => {
                    let r = compute_reference(ref_mesh, ref_k, &opts)?;
                    println!(
                        "reference (mesh {ref_mesh}, k = {ref_k}): integral = {:.10}, seminorm = {:.10}",
                        r.integral, r.seminorm
                    );
                    Some(r)
                }
            };
            let conv = run_convergence(&case, sweep, mode, k, first, levels, reference.as_ref(), &opts);
            let stem = format!(
                "{}_{}_{}_k{k}",
                case.name,
                match mode {
                    MeshMode::Curved => "curved",
                    MeshMode::Straight => "straight",
                },
                match sweep {
                    Sweep::H => "h",
                    Sweep::K => "k",
                }
            );
            print!("{}", format_table(&conv));
            if !conv.rows.is_empty() {
                emit_dat(&conv, &out.join(format!("{stem}.dat")))?;
                let path = out.join(format!("{stem}_meshes.dat"));
                std::fs::write(&path, mesh_table(&conv)).map_err(|e| Error::io(&path, e))?;
            }
            let path = out.join(format!("{stem}.json"));
            std::fs::write(&path, metadata_json(&conv, k, &opts, 0, reference.as_ref()))
                .map_err(|e| Error::io(&path, e))?;
            if dump_mesh {
                let mut seen = Vec::new();
                for r in &conv.rows {
                    if !seen.contains(&r.mesh) {
                        seen.push(r.mesh);
                        let m = case.mesh(r.mesh, mode)?;
                        write_mesh(&m, &out.join(format!("{stem}_mesh{}.msh", r.mesh)))?;
                    }
                }
            }
            if let (Some(n), Some(last)) = (sample, conv.rows.last()) {
                let run = solve_case(&case, case.mesh(last.mesh, mode)?, last.k, &opts)?;
                let path = out.join(format!("{stem}_samples.csv"));
                std::fs::write(&path, samples_to_csv(&sample_solution(&run, n))).map_err(|e| Error::io(&path, e))?;
            }
            debug_assert!(!dat_string(&conv).is_empty());
            if let Some(e) = &conv.failure {
                eprintln!("sweep stopped early: {e}");
                return Ok(ExitCode::FAILURE);
            }
            if check && !passes(&conv) {
                eprintln!("check failed");
                return Ok(ExitCode::from(2));
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

/// Expected behaviour of a study: rates near `k+2`, `k+1`, `k+1` on curved
/// h-sweeps, geometric decrease on curved k-sweeps, and decreasing errors otherwise.
fn passes(conv: &Convergence) -> bool {
    let Some(last) = conv.rows.last() else {
        return false;
    };
    let k = last.k as f64;
    match (conv.case, conv.sweep, conv.mode) {
        ("ellipse", Sweep::H, MeshMode::Curved) => conv
            .final_rates()
            .is_some_and(|r| r[0] >= k + 2.0 - 0.6 && r[1] >= k + 1.0 - 0.5 && r[2] >= k + 1.0 - 0.5),
        ("ellipse", Sweep::K, MeshMode::Curved) => (0..3).all(|i| {
            let c = conv.column(i);
            c.windows(2).all(|w| w[1] <= 0.5 * w[0] || w[1] < 1e-10)
        }),
        _ => (0..conv.rows[0].errors.len()).all(|i| {
            let c = conv.column(i);
            c.first() >= c.last()
        }),
    }
}
