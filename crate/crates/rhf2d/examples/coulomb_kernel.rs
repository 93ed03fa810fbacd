//! Periodic Coulomb kernel: constants and the Fourier, Ewald and Madelung cross-checks.
use rhf2d::coulomb::PeriodicKernel;
use rhf2d::lattice::{BravaisLattice, Vec2};

fn main() -> rhf2d::Result<()> {
    let k = PeriodicKernel::new(&BravaisLattice::triangular(), 1.0);
    let pts = [Vec2::new(0.21, 0.05), Vec2::new(-0.1, 0.33), Vec2::new(0.4, -0.2)];
    let r = k.self_test(&pts, 2000.0, 8)?;
    println!("{}", serde_json::to_string_pretty(&r).unwrap());
    for x in [1e-2, 5e-3, 2.5e-3] {
        println!("W(x) - 1/|x| at |x| = {x:e}: {:.9}", k.evaluate(Vec2::new(x, 0.0)) - 1.0 / x);
    }
    Ok(())
}
