//! Tight-binding model from a converged state and its band error against plane waves.
use rhf2d::atom::{AtomProblem, AtomScfOptions, PseudoPotential, RadialGrid};
use rhf2d::dissociation::{ratios_decrease, tb_from_first_principles, theorem_check, ExtractionOptions};
use rhf2d::lattice::k_path;
use rhf2d::scf::{scf_loop, ScfConfig};

fn main() -> rhf2d::Result<()> {
    let atom = AtomProblem::new(RadialGrid::graded(4000, 40.0, 8.0)?, PseudoPotential::zero())?.solve(&AtomScfOptions::default())?;
    let mut reports = Vec::new();
    for l in [4.0, 6.0, 8.0] {
        let state = scf_loop(&ScfConfig { l, ..Default::default() })?;
        let fp = tb_from_first_principles(&atom, &state, &ExtractionOptions::default())?;
        let path = k_path(&state.lattice, &["G", "K", "M", "G"], 16)?;
        let pw = state.bands_at(&path.points, 2)?;
        let r = theorem_check(&fp.model, &pw, &path)?;
        println!("L = {l}: mu_L = {:+.6}, theta = {:+.6e}, sup error / |theta| = {:.4}", fp.model.mu_l, fp.theta.thetas[0], r.ratio);
        reports.push(r);
    }
    println!("ratios decrease: {}", ratios_decrease(&reports));
    Ok(())
}
