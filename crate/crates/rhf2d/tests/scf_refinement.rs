use rhf2d::scf::{analyze_phase, scf_loop, Phase, PhaseOptions, ScfConfig};

// In the semi-metal phase the Fermi level is pinned at the cone, so it should not move
// by more than a few smearing widths when the k grid is refined.
#[test]
fn fermi_level_is_stable_under_kgrid_refinement_at_l6() {
    let base = ScfConfig { l: 6.0, ecut: 200.0, kgrid: 6, ..ScfConfig::default() };
    let fine = ScfConfig { kgrid: 12, ..base.clone() };
    let coarse = scf_loop(&base).unwrap();
    let refined = scf_loop(&fine).unwrap();
    assert!(coarse.converged && refined.converged);
    let opts = PhaseOptions::default();
    assert_eq!(analyze_phase(&refined, &opts).unwrap().phase, Some(Phase::DiracSemiMetal));
    let shift = (coarse.fermi_level - refined.fermi_level).abs();
    assert!(shift <= 5.0 * base.smearing, "Fermi level moved by {shift:.3e}");
}
