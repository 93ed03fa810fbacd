//! Nearest-neighbor tight-binding models on motif lattices, the Wallace
//! dispersion of graphene, and Dirac-cone fits.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{edge_orbits, honeycomb, EdgeOrbitSet, KPath, MotifLattice, Vec2};
use crate::linalg::{eigvalsh, CMatrix, C64};

/// `B_k(k)_{r,r'} = sum over u with (r, u + r') in orbit k of exp(i k.u)`,
/// on the unit (unscaled) lattice of `m`.
pub fn bloch_matrix(m: &MotifLattice, orbits: &EdgeOrbitSet, orbit_index: usize, k: Vec2) -> CMatrix {
    assert!(orbit_index < orbits.len(), "orbit index out of range");
    let n = m.n_sites();
    let mut b = CMatrix::zeros(n, n);
    for e in &orbits.members[orbit_index] {
        let u = m.bravais.point(e.shift);
        b[(e.from, e.to)] += C64::from_polar(1.0, k.dot(&u));
    }
    b
}

#[derive(Clone, Debug)]
pub struct TBModel {
    /// The on-site level is `-mu_l`.
    pub mu_l: f64,
    pub thetas: Vec<f64>,
    pub orbits: EdgeOrbitSet,
    /// Unit-scale motif lattice.
    pub motif: MotifLattice,
    /// Lattice scale: quasi-momenta `k` of the scaled lattice enter as `L k`.
    pub l: f64,
    /// Tunneling coefficient `exp(-sqrt(mu) L)` of the reference atom, if known.
    pub tunneling: Option<f64>,
}

impl TBModel {
    pub fn new(motif: MotifLattice, l: f64, mu_l: f64, thetas: Vec<f64>) -> Result<Self> {
        let orbits = edge_orbits(&motif)?;
        if thetas.len() != orbits.len() {
            return Err(Error::Mismatch(format!(
                "{} hopping values for {} orbits",
                thetas.len(),
                orbits.len()
            )));
        }
        Ok(Self { mu_l, thetas, orbits, motif, l, tunneling: None })
    }

    /// Wallace model `theta * B_HC` at unit scale with zero on-site energy.
    pub fn wallace(theta: f64) -> Self {
        Self::new(honeycomb(), 1.0, 0.0, vec![theta]).expect("honeycomb has one orbit")
    }

    /// `-mu_L I + sum_k theta_k B_k(L k)`.
    pub fn matrix(&self, k: Vec2) -> CMatrix {
        let n = self.motif.n_sites();
        let mut h = CMatrix::identity(n, n) * C64::new(-self.mu_l, 0.0);
        for (i, t) in self.thetas.iter().enumerate() {
            h += bloch_matrix(&self.motif, &self.orbits, i, k * self.l) * C64::new(*t, 0.0);
        }
        h
    }

    pub fn eigenvalues(&self, k: Vec2) -> Vec<f64> {
        eigvalsh(&self.matrix(k)).expect("small Hermitian matrix")
    }
}

#[derive(Clone, Debug)]
pub struct TBBands {
    pub path: KPath,
    /// Ascending eigenvalues per path point.
    pub values: Vec<Vec<f64>>,
}

pub fn tb_bands(model: &TBModel, path: &KPath) -> TBBands {
    let values = path.points.iter().map(|k| model.eigenvalues(*k)).collect();
    TBBands { path: path.clone(), values }
}

/// `(-|f(k)|, |f(k)|)` with `f(k) = 1 + exp(i k.u1) + exp(i k.u2)` on the unit honeycomb.
pub fn wallace_dispersion(k: Vec2) -> (f64, f64) {
    let s = 3f64.sqrt() / 2.0;
    let u1 = Vec2::new(s, 0.5);
    let u2 = Vec2::new(s, -0.5);
    let f = C64::new(1.0, 0.0) + C64::from_polar(1.0, k.dot(&u1)) + C64::from_polar(1.0, k.dot(&u2));
    (-f.norm(), f.norm())
}

/// Dirac point of the unit honeycomb lattice.
pub fn honeycomb_k() -> Vec2 {
    Vec2::new(0.0, 4.0 * PI / 3.0)
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DiracReport {
    pub vertex: [f64; 2],
    pub slope: f64,
    pub cone_energy: f64,
    pub residual: f64,
    pub gap: f64,
    pub samples: usize,
}

/// One observation of the two bands forming a cone, at offset `kappa` from the vertex.
#[derive(Clone, Copy, Debug)]
pub struct ConeSample {
    pub kappa: Vec2,
    pub minus: f64,
    pub plus: f64,
}

/// Least-squares fit through the origin of the half-splitting (minus the vertex half-gap)
/// against `|kappa|`.
pub fn fit_cone(vertex: Vec2, at_vertex: (f64, f64), samples: &[ConeSample]) -> Result<DiracReport> {
    let mut directions: Vec<f64> = Vec::new();
    let mut radii: Vec<f64> = Vec::new();
    for s in samples {
        let r = s.kappa.norm();
        if r == 0.0 {
            continue;
        }
        let a = s.kappa.y.atan2(s.kappa.x);
        if !directions.iter().any(|d| ((d - a + PI).rem_euclid(2.0 * PI) - PI).abs() < 1e-9) {
            directions.push(a);
        }
        if !radii.iter().any(|x| (x - r).abs() < 1e-12 * r) {
            radii.push(r);
        }
    }
    if directions.len() < 8 || radii.len() < 2 {
        return Err(Error::InsufficientSamples(format!(
            "{} directions and {} radii (need 8 and 2)",
            directions.len(),
            radii.len()
        )));
    }
    let gap = (at_vertex.1 - at_vertex.0).max(0.0);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|s| s.kappa.norm() > 0.0)
        .map(|s| (s.kappa.norm(), 0.5 * (s.plus - s.minus) - 0.5 * gap))
        .collect();
    for (x, y) in &pts {
        sxy += x * y;
        sxx += x * x;
    }
    let slope = sxy / sxx;
    let rss: f64 = pts.iter().map(|(x, y)| (y - slope * x).powi(2)).sum();
    let residual = (rss / pts.len() as f64).sqrt();
    Ok(DiracReport {
        vertex: [vertex.x, vertex.y],
        slope,
        cone_energy: 0.5 * (at_vertex.0 + at_vertex.1),
        residual,
        gap,
        samples: pts.len(),
    })
}

/// Samples a band pair `bands(k) -> (minus, plus)` on `directions` rays at
/// `radii` equally spaced radii up to `radius` and fits the cone.
pub fn dirac_report<F>(bands: F, vertex: Vec2, radius: f64, directions: usize, radii: usize) -> Result<DiracReport>
where
    F: Fn(Vec2) -> (f64, f64),
{
    let mut samples = Vec::with_capacity(directions * radii);
    for i in 0..directions {
        let a = 2.0 * PI * (i as f64 + 0.5) / directions as f64;
        for j in 1..=radii {
            let kappa = Vec2::new(a.cos(), a.sin()) * radius * j as f64 / radii as f64;
            let (minus, plus) = bands(vertex + kappa);
            samples.push(ConeSample { kappa, minus, plus });
        }
    }
    fit_cone(vertex, bands(vertex), &samples)
}

/// Default cone-fit radius: 5% of |K|.
pub fn default_cone_radius(k: Vec2) -> f64 {
    0.05 * k.norm()
}

/// Band pair `(band_lo, band_lo + 1)` (0-based) of a TB model as a closure input for [`dirac_report`].
pub fn tb_pair(model: &TBModel, band_lo: usize) -> impl Fn(Vec2) -> (f64, f64) + '_ {
    move |k| {
        let e = model.eigenvalues(k);
        (e[band_lo], e[band_lo + 1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{k_path, special_point};
    use approx::assert_abs_diff_eq;

    fn direct_f(k: Vec2) -> C64 {
        // Independent oracle: phases from explicit bond vectors a - b shifted.
        let s = 3f64.sqrt();
        let bonds = [Vec2::new(1.0 / s, 0.0), Vec2::new(-0.5 / s, 0.5), Vec2::new(-0.5 / s, -0.5)];
        // f(k) e^{-i k.(a-b)} = sum over bonds of e^{i k.(bond - (a-b))}
        let ab = Vec2::new(1.0 / s, 0.0);
        bonds.iter().map(|d| C64::from_polar(1.0, -k.dot(&(d - ab)))).sum()
    }

    #[test]
    fn honeycomb_bloch_entries() {
        let h = honeycomb();
        let o = edge_orbits(&h).unwrap();
        let k = Vec2::new(0.37, -1.21);
        let b = bloch_matrix(&h, &o, 0, k);
        let s = 3f64.sqrt() / 2.0;
        let f = C64::new(1.0, 0.0)
            + C64::from_polar(1.0, k.dot(&Vec2::new(s, 0.5)))
            + C64::from_polar(1.0, k.dot(&Vec2::new(s, -0.5)));
        assert_abs_diff_eq!((b[(0, 1)] - f).norm(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!((b[(1, 0)] - f.conj()).norm(), 0.0, epsilon = 1e-14);
        assert_eq!(b[(0, 0)], C64::new(0.0, 0.0));
        assert_abs_diff_eq!(direct_f(k).norm(), f.norm(), epsilon = 1e-13);
        let b0 = bloch_matrix(&h, &o, 0, Vec2::zeros());
        assert_abs_diff_eq!(b0[(0, 1)].re, 3.0, epsilon = 1e-14);
        let bk = bloch_matrix(&h, &o, 0, honeycomb_k());
        assert!(bk[(0, 1)].norm() < 1e-14);
    }

    #[test]
    fn wallace_values() {
        let b = honeycomb().bravais;
        let m = special_point(&b, "M").unwrap();
        let model = TBModel::wallace(1.0);
        let g = model.eigenvalues(Vec2::zeros());
        assert_abs_diff_eq!(g[0], -3.0, epsilon = 1e-13);
        assert_abs_diff_eq!(g[1], 3.0, epsilon = 1e-13);
        let e = model.eigenvalues(m);
        assert_abs_diff_eq!(e[0], -1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(e[1], 1.0, epsilon = 1e-13);
        let e = model.eigenvalues(honeycomb_k());
        assert!(e[0].abs() < 1e-13 && e[1].abs() < 1e-13);
        let kp = special_point(&b, "K'").unwrap();
        let (lo, hi) = wallace_dispersion(kp);
        assert!(lo.abs() < 1e-13 && hi.abs() < 1e-13);
        let kappa = Vec2::new(0.6, 0.8) * 1e-3;
        let (_, plus) = wallace_dispersion(honeycomb_k() + kappa);
        assert!((plus - 3f64.sqrt() / 2.0 * 1e-3).abs() < 1e-6);
    }

    #[test]
    fn cone_fits() {
        let r = dirac_report(wallace_dispersion, honeycomb_k(), 1e-2, 12, 3).unwrap();
        assert!((r.slope / (3f64.sqrt() / 2.0) - 1.0).abs() < 0.01);
        assert!(r.gap < 1e-12);
        let gapped = |k: Vec2| {
            let d = (k - Vec2::new(1.0, 1.0)).norm();
            (-(0.1 + 2.0 * d), 0.1 + 2.0 * d)
        };
        let r = dirac_report(gapped, Vec2::new(1.0, 1.0), 0.01, 8, 2).unwrap();
        assert_abs_diff_eq!(r.gap, 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(r.slope, 2.0, epsilon = 1e-10);
        assert!(dirac_report(gapped, Vec2::zeros(), 0.01, 4, 2).is_err());
        let t = TBModel::new(honeycomb(), 1.0, 0.3, vec![-0.02]).unwrap();
        let r = dirac_report(tb_pair(&t, 0), honeycomb_k(), 1e-2, 8, 2).unwrap();
        assert!((r.slope - 0.02 * 3f64.sqrt() / 2.0).abs() < 1e-2 * 0.02 + r.residual);
        assert_abs_diff_eq!(r.cone_energy, -0.3, epsilon = 1e-12);
    }

    #[test]
    fn vertices_are_the_only_zeros_on_the_path() {
        let b = honeycomb().bravais;
        let p = k_path(&b, &["Γ", "K", "M", "Γ"], 200).unwrap();
        let k = special_point(&b, "K").unwrap();
        let t = tb_bands(&TBModel::wallace(1.0), &p);
        for (q, e) in p.points.iter().zip(&t.values) {
            if (q - k).norm() > 1e-6 {
                assert!(e[1] - e[0] > 1e-9);
            }
        }
    }
}
