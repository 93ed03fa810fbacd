//! Interaction coefficient from superposed atoms and its exponential decay in L.
use rhf2d::atom::{AtomProblem, AtomScfOptions, PseudoPotential, RadialGrid};
use rhf2d::dissociation::{make_cutoff, theta_fast, theta_scaling, ThetaQuadrature};
use rhf2d::lattice::{honeycomb, neighbor_shells};

fn main() -> rhf2d::Result<()> {
    let atom = AtomProblem::new(RadialGrid::graded(4000, 40.0, 8.0)?, PseudoPotential::zero())?.solve(&AtomScfOptions::default())?;
    let m = honeycomb();
    let d0 = neighbor_shells(&m).d0;
    let cut = make_cutoff(0.2, d0)?;
    let mut est = Vec::new();
    for l in [4.0, 6.0, 8.0, 10.0] {
        let e = theta_fast(&atom, &m, l, &cut, &ThetaQuadrature::default())?;
        println!("L = {l:4}: theta = {:+.8e} (+- {:.1e})", e.thetas[0], e.errors[0]);
        est.push(e);
    }
    let s = theta_scaling(&est, 0, d0, 0.1)?;
    println!("slope {:.5} vs -sqrt(mu) d0 = {:.5}, envelope holds: {}", s.slope, s.expected, s.envelope_holds);
    Ok(())
}
