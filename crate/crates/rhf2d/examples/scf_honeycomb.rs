//! Reduced Hartree-Fock on the honeycomb lattice at one scale, with energy and phase.
use rhf2d::scf::{analyze_phase, rhf_energy, scf_loop, PhaseOptions, ScfConfig};

fn main() -> rhf2d::Result<()> {
    let l = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(3.0);
    let cfg = ScfConfig { l, ecut: 120.0, kgrid: 9, ..Default::default() };
    let s = scf_loop(&cfg)?;
    println!("L = {l}: converged {} in {} iterations, Fermi level {:.8}", s.converged, s.iterations, s.fermi_level);
    let e = rhf_energy(&s)?;
    println!("energy {:.10} (routes differ by {:.2e})", e.total, e.discrepancy);
    let p = analyze_phase(&s, &PhaseOptions::default())?;
    println!("phase {:?}, cone {:.8}, overlap {:.6}", p.phase, p.cone_energy, p.overlap);
    Ok(())
}
