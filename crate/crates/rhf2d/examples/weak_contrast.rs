//! Weak-contrast regime: the sign of the first Fourier coefficient decides which bands meet at K.
//! The cutoff scales like `L^-2`, so 3200 at L = 0.25 matches 200 at L = 1.
use rhf2d::scf::{scf_loop, weak_contrast, weak_contrast_check, ScfConfig};

fn main() -> rhf2d::Result<()> {
    let s = scf_loop(&ScfConfig { l: 0.25, ecut: 3200.0, ..Default::default() })?;
    let w = weak_contrast_check(&s)?;
    println!("converged field: c11 = {:+.6}, {:?}, K values {:?}", w.c11, w.placement, w.k_values);
    let mut flipped = s.mean_field.clone();
    for c in flipped.coeffs.iter_mut() {
        *c = -*c;
    }
    let w = weak_contrast(&flipped, 0.25, s.config.ecut, 1e-9)?;
    println!("negated field:   c11 = {:+.6}, {:?}, K values {:?}", w.c11, w.placement, w.k_values);
    Ok(())
}
