//! Wallace model: closed-form bands at the special points and the Dirac cone slope.
use rhf2d::lattice::{special_point, BravaisLattice};
use rhf2d::tightbinding::{dirac_report, tb_pair, wallace_dispersion, TBModel};

fn main() -> rhf2d::Result<()> {
    let b = BravaisLattice::triangular();
    for label in ["G", "K", "K'", "M"] {
        let (lo, hi) = wallace_dispersion(special_point(&b, label)?);
        println!("{label:>2}: {lo:+.12} {hi:+.12}");
    }
    let model = TBModel::wallace(-1.0);
    let k = special_point(&b, "K")?;
    let r = dirac_report(tb_pair(&model, 0), k, 1e-2, 16, 4)?;
    println!("cone slope {:.6} (sqrt(3)/2 = {:.6})", r.slope, 3f64.sqrt() / 2.0);
    Ok(())
}
