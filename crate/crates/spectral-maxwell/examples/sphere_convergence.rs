//! Far-field error against the Mie series for a unit sphere.
//!
//! Usage: `sphere_convergence <size in wavelengths> <n> [n']`
//!
//! The operator degree defaults to the frequency-aware choice used for
//! accuracy studies. Prints the error, the constraint residual and timings.

use std::time::Instant;

use num_complex::Complex64;
use spectral_maxwell::assembly::accurate_operator_degree;
use spectral_maxwell::driver::{err_mie, theta_grid, IncidentWave, Polarization, ScatteringSolver, MIE_THETA_POINTS};
use spectral_maxwell::geometry::SurfaceParametrization;
use spectral_maxwell::kernels::Medium;
use spectral_maxwell::mie::mie_solve;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.len() < 2 {
        return Err("usage: sphere_convergence <size> <n> [n']".into());
    }
    let size: f64 = args[0].parse()?;
    let n: usize = args[1].parse()?;
    let geom = SurfaceParametrization::sphere(1.0)?;
    let omega = Medium::omega_for_size(1.0, 1.0, size, geom.diameter());
    let medium = Medium::from_refractive_index(Complex64::new(1.584, 0.0), omega)?;
    let n_prime = match args.get(2) {
        Some(v) => v.parse()?,
        None => accurate_operator_degree(n, medium.k_plus(), geom.diameter()),
    };

    let start = Instant::now();
    let solver = ScatteringSolver::new(&medium, &geom, n, n_prime)?;
    let assembled = start.elapsed().as_secs_f64();
    let wave = IncidentWave::scattering_plane(0.0, Polarization::H);
    let solution = solver.solve(&wave)?;
    let err = err_mie(&solution, &mie_solve(&medium, 1.0)?, &theta_grid(MIE_THETA_POINTS))?;
    println!(
        "size {size} n {n} n' {n_prime}: ERR_Mie {err:.3e}, constraint {:.3e}, assembly {assembled:.1} s, total {:.1} s",
        solution.constraint_residual,
        start.elapsed().as_secs_f64()
    );
    Ok(())
}
