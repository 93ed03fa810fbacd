//! Self-consistent Hartree atom without pseudo-potential: binding energy, decay and far field.
use rhf2d::atom::{decay_check, vmf_far_field, AtomProblem, AtomScfOptions, PseudoPotential, RadialGrid};

fn main() -> rhf2d::Result<()> {
    let grid = RadialGrid::graded(4000, 40.0, 8.0)?;
    let atom = AtomProblem::new(grid, PseudoPotential::zero())?.solve(&AtomScfOptions::default())?;
    println!("mu = {:.10}, gap = {:.10}, energy = {:.10}", atom.mu, atom.gap, atom.energy);
    let d = decay_check(&atom);
    println!("decay slope {:.5} vs sqrt(mu) {:.5}", d.slope, d.sqrt_mu);
    let f = vmf_far_field(&atom);
    println!("4 r^3 V(r) / m1 = {:.5} at r = {:.2}", f.ratio, f.r);
    Ok(())
}
