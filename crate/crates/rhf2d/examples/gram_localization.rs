//! Gram matrix of atomic orbitals at L = 6: expansion residual and localization of Q^{-1/2}.
use rhf2d::atom::{AtomProblem, AtomScfOptions, PseudoPotential, RadialGrid};
use rhf2d::dissociation::{gram_matrix, SiteOrbital, GRAM_RADIUS};
use rhf2d::lattice::honeycomb;

fn main() -> rhf2d::Result<()> {
    let atom = AtomProblem::new(RadialGrid::graded(4000, 40.0, 8.0)?, PseudoPotential::zero())?.solve(&AtomScfOptions::default())?;
    let m = honeycomb();
    let orb = SiteOrbital::from_atom(&atom)?;
    for l in [4.0, 6.0, 8.0] {
        let g = gram_matrix(&orb, &m, l, GRAM_RADIUS)?;
        let t = (-atom.mu.sqrt() * l).exp();
        println!(
            "L = {l}: {} vertices, zeta = {:.5}, |Q - I - zeta J| / zeta = {:.4}, localization ratio = {:.4}",
            g.vertices.len(),
            g.zeta,
            g.expansion_residual()? / g.zeta,
            g.localization_ratio(t, 0.2, 2.0)
        );
    }
    Ok(())
}
