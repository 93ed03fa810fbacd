//! Honeycomb geometry: neighbor shells, edge orbits, symmetry group and a k-path.
use rhf2d::lattice::{edge_orbits, honeycomb, k_path, neighbor_shells};

fn main() -> rhf2d::Result<()> {
    let m = honeycomb();
    let shells = neighbor_shells(&m);
    println!("d0 = {:.6}, d1 = {:.6}", shells.d0, shells.d1);
    println!("nearest edges touching the home cell: {}", shells.nearest.len());
    let orbits = edge_orbits(&m)?;
    println!("edge orbits: {}, group order: {}", orbits.len(), m.group.len());
    let path = k_path(&m.bravais, &["G", "K", "M", "G"], 8)?;
    for (k, s) in path.points.iter().zip(&path.arc_length) {
        println!("{s:8.4}  ({:8.4}, {:8.4})", k.x, k.y);
    }
    Ok(())
}
