//! Phase scan over the lattice scale and the first metal to semi-metal window.
use rhf2d::scf::{phase_scan, transition_bracket, PhaseOptions, ScfConfig};

fn main() {
    let template = ScfConfig { ecut: 120.0, kgrid: 9, ..Default::default() };
    let reports = phase_scan(&[0.5, 1.0, 2.0, 3.0, 6.0], &template, &PhaseOptions::default());
    for r in &reports {
        println!("L = {:4}: {:?} (eps - lambda = {:+.3e})", r.l, r.phase, r.fermi_level - r.cone_energy);
    }
    println!("transition bracket: {:?}", transition_bracket(&reports));
}
