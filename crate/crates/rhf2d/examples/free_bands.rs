//! Free plane-wave bands (V = 0) on the honeycomb Bravais lattice and their degeneracies.
use rhf2d::fourier::FourierField;
use rhf2d::lattice::{honeycomb, k_path, special_point};
use rhf2d::planewave::{band_structure, SolverKind};

fn main() -> rhf2d::Result<()> {
    let lat = honeycomb().bravais.scaled(1.0);
    let v = FourierField::zeros(&lat, [4, 4]);
    let k = special_point(&lat, "K")?;
    let at_k = band_structure(&v, &[k], 60.0, 4, SolverKind::Dense)?;
    println!("K: {:?}", at_k[0].values);
    let path = k_path(&lat, &["G", "K", "M", "G"], 12)?;
    for s in band_structure(&v, &path.points, 60.0, 3, SolverKind::Auto)? {
        println!("({:7.4}, {:7.4})  {:10.6} {:10.6} {:10.6}", s.k.x, s.k.y, s.values[0], s.values[1], s.values[2]);
    }
    Ok(())
}
