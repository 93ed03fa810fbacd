//! Plane-wave discretization of the Bloch fibers `H(k) = -Δ + V` on a
//! periodicity cell, with dense and iterative (LOBPCG) eigensolvers and
//! density synthesis by FFT.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{good_size, wrap, Fft2, FourierField, C64};
use crate::lattice::{BravaisLattice, Vec2};
use crate::linalg::{eigh, CMatrix};

/// Plane waves `e_{G+k}` with `|G + k|^2 <= 2 Ecut`, ordered by kinetic energy then index.
#[derive(Clone, Debug, PartialEq)]
pub struct PWBasis {
    pub lattice: BravaisLattice,
    pub k: Vec2,
    pub ecut: f64,
    pub g: Vec<[i64; 2]>,
    /// `|G + k|^2`.
    pub kinetic: Vec<f64>,
}

impl PWBasis {
    pub fn len(&self) -> usize {
        self.g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g.is_empty()
    }

    /// Largest `|m_0|`, `|m_1|` over the basis.
    pub fn extent(&self) -> [i64; 2] {
        self.g.iter().fold([0, 0], |a, m| [a[0].max(m[0].abs()), a[1].max(m[1].abs())])
    }

    pub fn vector(&self, i: usize) -> Vec2 {
        self.lattice.reciprocal_point(self.g[i])
    }
}

pub fn build_basis(lattice: &BravaisLattice, k: Vec2, ecut: f64) -> Result<PWBasis> {
    if !(ecut > 0.0) {
        return Err(Error::InvalidArgument(format!("Ecut must be positive, got {ecut}")));
    }
    let rad = (2.0 * ecut).sqrt();
    // |m_i| = |(G).u_i| / 2pi <= (rad + |k|) |u_i| / 2pi.
    let span = rad + k.norm();
    let r0 = (span * lattice.u1.norm() / (2.0 * std::f64::consts::PI)).ceil() as i64 + 1;
    let r1 = (span * lattice.u2.norm() / (2.0 * std::f64::consts::PI)).ceil() as i64 + 1;
    let mut items = Vec::new();
    for i in -r0..=r0 {
        for j in -r1..=r1 {
            let q = lattice.reciprocal_point([i, j]) + k;
            let e = q.norm_squared();
            if e <= 2.0 * ecut {
                items.push((e, [i, j]));
            }
        }
    }
    if items.is_empty() {
        return Err(Error::EmptyBasis);
    }
    items.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    Ok(PWBasis {
        lattice: lattice.clone(),
        k,
        ecut,
        g: items.iter().map(|x| x.1).collect(),
        kinetic: items.iter().map(|x| x.0).collect(),
    })
}

/// Even FFT grid holding every difference and pair sum of basis frequencies without aliasing.
pub fn fft_grid_for(extent: [i64; 2]) -> [usize; 2] {
    [good_size(4 * extent[0] as usize + 2), good_size(4 * extent[1] as usize + 2)]
}

/// Dense `H_{G,G'} = |G + k|^2 delta + V(G - G') / sqrt|Γ|`; coefficients outside the
/// stored grid of `v` count as zero.
pub fn assemble_fiber(basis: &PWBasis, v: &FourierField) -> CMatrix {
    let n = basis.len();
    let s = 1.0 / v.lattice.cell_area.sqrt();
    let mut h = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let d = [basis.g[i][0] - basis.g[j][0], basis.g[i][1] - basis.g[j][1]];
            h[(i, j)] = v.get(d) * s;
        }
        h[(i, i)] += C64::new(basis.kinetic[i], 0.0);
    }
    h
}

/// Eigenvalues (ascending) of one fiber and optionally the eigenvectors over its basis.
#[derive(Clone, Debug)]
pub struct FiberSpectrum {
    pub k: Vec2,
    pub values: Vec<f64>,
    pub vectors: Option<CMatrix>,
}

pub fn diagonalize(h: &CMatrix, n_bands: usize) -> Result<(Vec<f64>, CMatrix)> {
    if n_bands > h.nrows() {
        return Err(Error::InvalidArgument(format!("{} bands requested from a {}-dimensional fiber", n_bands, h.nrows())));
    }
    let (w, v) = eigh(h)?;
    Ok((w[..n_bands].to_vec(), v.columns(0, n_bands).into_owned()))
}

/// Hermitian operator applied to blocks of column vectors.
pub trait HermitianOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &CMatrix) -> CMatrix;
    /// Diagonal used by the preconditioner.
    fn diagonal(&self) -> Vec<f64>;
}

impl HermitianOperator for CMatrix {
    fn dim(&self) -> usize {
        self.nrows()
    }
    fn apply(&self, x: &CMatrix) -> CMatrix {
        self * x
    }
    fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows()).map(|i| self[(i, i)].re).collect()
    }
}

/// Real-space samples of a potential on its own FFT grid.
#[derive(Clone, Debug)]
pub struct PreparedPotential {
    pub field: FourierField,
    fft: Arc<Fft2>,
    real: Vec<C64>,
}

impl PreparedPotential {
    pub fn new(field: &FourierField) -> Self {
        let fft = Arc::new(Fft2::new(field.n));
        let real = field.to_real(&fft);
        Self { field: field.clone(), fft, real }
    }
}

/// `-Δ + V` on one fiber with `V` applied through the FFT grid of the potential.
pub struct FiberOperator<'a> {
    basis: &'a PWBasis,
    pot: &'a PreparedPotential,
    index: Vec<usize>,
}

impl<'a> FiberOperator<'a> {
    pub fn new(basis: &'a PWBasis, pot: &'a PreparedPotential) -> Result<Self> {
        let e = basis.extent();
        let n = pot.field.n;
        if (n[0] as i64) <= 4 * e[0] || (n[1] as i64) <= 4 * e[1] {
            return Err(Error::Mismatch(format!(
                "FFT grid {}x{} too small for basis extent {:?}",
                n[0], n[1], e
            )));
        }
        let index = basis.g.iter().map(|m| wrap(m[0], n[0]) * n[1] + wrap(m[1], n[1])).collect();
        Ok(Self { basis, pot, index })
    }
}

impl HermitianOperator for FiberOperator<'_> {
    fn dim(&self) -> usize {
        self.basis.len()
    }

    fn apply(&self, x: &CMatrix) -> CMatrix {
        let ntot = self.pot.fft.len();
        let scale = 1.0 / ntot as f64;
        let mut out = CMatrix::zeros(x.nrows(), x.ncols());
        let mut buf = vec![C64::new(0.0, 0.0); ntot];
        for c in 0..x.ncols() {
            buf.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
            for (i, &p) in self.index.iter().enumerate() {
                buf[p] = x[(i, c)];
            }
            self.pot.fft.inverse(&mut buf);
            for (z, v) in buf.iter_mut().zip(&self.pot.real) {
                *z *= v;
            }
            self.pot.fft.forward(&mut buf);
            for (i, &p) in self.index.iter().enumerate() {
                out[(i, c)] = buf[p] * scale + x[(i, c)] * self.basis.kinetic[i];
            }
        }
        out
    }

    fn diagonal(&self) -> Vec<f64> {
        let v0 = self.pot.field.coeffs[0].re / self.pot.field.lattice.cell_area.sqrt();
        self.basis.kinetic.iter().map(|k| k + v0).collect()
    }
}

/// Controls of the block eigensolver.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct LobpcgOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub extra: usize,
}

impl Default for LobpcgOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 400, extra: 3 }
    }
}

fn seed_block(n: usize, b: usize) -> CMatrix {
    // Lowest-diagonal unit vectors plus a small deterministic perturbation.
    CMatrix::from_fn(n, b, |i, j| {
        let t = ((i * 7919 + j * 104_729) as f64 * 0.618_033_988_749_895).fract() - 0.5;
        let base = if i == j { 1.0 } else { 0.0 };
        C64::new(base + 1e-3 * t, 1e-3 * (t * 3.7).sin())
    })
}

/// Modified Gram-Schmidt on the columns of `z` (two passes), applying the same
/// transformation to `hz`; nearly dependent columns are dropped.
fn orthonormalize(z: CMatrix, hz: CMatrix, keep_first: usize) -> (CMatrix, CMatrix) {
    let n = z.nrows();
    let mut cols: Vec<DVector<C64>> = Vec::new();
    let mut hcols: Vec<DVector<C64>> = Vec::new();
    for c in 0..z.ncols() {
        let mut v = z.column(c).into_owned();
        let mut hv = hz.column(c).into_owned();
        let n0 = v.norm();
        if n0 == 0.0 {
            continue;
        }
        for _ in 0..2 {
            for (q, hq) in cols.iter().zip(&hcols) {
                let p = q.dotc(&v);
                v.axpy(-p, q, C64::new(1.0, 0.0));
                hv.axpy(-p, hq, C64::new(1.0, 0.0));
            }
        }
        let nv = v.norm();
        if c >= keep_first && nv < 1e-10 * n0 {
            continue;
        }
        let s = C64::new(1.0 / nv, 0.0);
        cols.push(v * s);
        hcols.push(hv * s);
    }
    let m = cols.len();
    let mut zq = CMatrix::zeros(n, m);
    let mut hq = CMatrix::zeros(n, m);
    for c in 0..m {
        zq.set_column(c, &cols[c]);
        hq.set_column(c, &hcols[c]);
    }
    (zq, hq)
}

fn hstack(blocks: &[&CMatrix]) -> CMatrix {
    let n = blocks[0].nrows();
    let m: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMatrix::zeros(n, m);
    let mut c0 = 0;
    for b in blocks {
        out.columns_mut(c0, b.ncols()).copy_from(b);
        c0 += b.ncols();
    }
    out
}

/// Lowest `nb` eigenpairs by locally optimal block preconditioned conjugate gradients.
/// Returns eigenvalues, eigenvectors and the iteration count.
pub fn lobpcg(
    op: &dyn HermitianOperator,
    nb: usize,
    start: Option<&CMatrix>,
    opts: &LobpcgOptions,
) -> Result<(Vec<f64>, CMatrix, usize)> {
    let n = op.dim();
    let b = (nb + opts.extra).min(n);
    if nb > n {
        return Err(Error::InvalidArgument(format!("{nb} bands requested from a {n}-dimensional fiber")));
    }
    if 3 * b >= n {
        // Small problems go to the dense solver.
        let (w, v) = eigh(&op.apply(&CMatrix::identity(n, n)))?;
        return Ok((w[..nb].to_vec(), v.columns(0, nb).into_owned(), 0));
    }
    let diag = op.diagonal();
    let x0 = match start {
        Some(s) if s.nrows() == n && s.ncols() >= nb => {
            let mut x = seed_block(n, b);
            x.columns_mut(0, s.ncols().min(b)).copy_from(&s.columns(0, s.ncols().min(b)));
            x
        }
        _ => seed_block(n, b),
    };
    let hx0 = op.apply(&x0);
    let (mut x, mut hx) = orthonormalize(x0, hx0, 0);
    let mut p: Option<(CMatrix, CMatrix)> = None;
    let mut lambda = vec![0.0; b];
    let mut worst = f64::INFINITY;
    for it in 0..opts.max_iter {
        // Rayleigh-Ritz on the current block.
        let a = x.adjoint() * &hx;
        let a = (&a + a.adjoint()) * C64::new(0.5, 0.0);
        let (w, c) = eigh(&a)?;
        let k = x.ncols().min(b);
        lambda = w[..k].to_vec();
        x = &x * c.columns(0, k);
        hx = &hx * c.columns(0, k);
        let mut r = hx.clone();
        for j in 0..k {
            let col = x.column(j) * C64::new(lambda[j], 0.0);
            let mut rc = r.column_mut(j);
            rc -= col;
        }
        worst = (0..nb.min(k)).map(|j| r.column(j).norm()).fold(0.0, f64::max);
        if worst < opts.tol {
            return Ok((lambda[..nb].to_vec(), x.columns(0, nb).into_owned(), it));
        }
        let mut wmat = r;
        for j in 0..k {
            for i in 0..n {
                let d = (diag[i] - lambda[j]).max(0.0) + 1.0;
                wmat[(i, j)] /= d;
            }
        }
        let hw = op.apply(&wmat);
        let (z, hz) = match &p {
            Some((pp, hp)) => (hstack(&[&x, &wmat, pp]), hstack(&[&hx, &hw, hp])),
            None => (hstack(&[&x, &wmat]), hstack(&[&hx, &hw])),
        };
        let (z, hz) = orthonormalize(z, hz, k);
        let a = z.adjoint() * &hz;
        let a = (&a + a.adjoint()) * C64::new(0.5, 0.0);
        let (_, c) = eigh(&a)?;
        let ck = c.columns(0, k).into_owned();
        let xn = &z * &ck;
        let hxn = &hz * &ck;
        // Search directions: the part of the update outside the old block.
        let zr = z.columns(k, z.ncols() - k).into_owned();
        let hzr = hz.columns(k, z.ncols() - k).into_owned();
        let cr = ck.rows(k, z.ncols() - k).into_owned();
        p = Some((&zr * &cr, &hzr * &cr));
        x = xn;
        hx = hxn;
        if it % 25 == 24 {
            // Refresh the tracked images against accumulated drift.
            hx = op.apply(&x);
            if let Some((pp, _)) = &p {
                let hp = op.apply(pp);
                p = Some((pp.clone(), hp));
            }
        }
    }
    let _ = lambda;
    Err(Error::Eigensolver(format!("LOBPCG residual {worst:.3e} after {} iterations", opts.max_iter)))
}

/// Backend choice for fiber solves.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    #[default]
    Auto,
    Dense,
    Iterative,
}

/// Basis size above which `Auto` switches to the iterative solver.
pub const DENSE_LIMIT: usize = 120;

/// Lowest `n_bands` eigenpairs of `-Δ + V` on the fiber of `basis`.
pub fn solve_fiber(
    basis: &PWBasis,
    pot: &PreparedPotential,
    n_bands: usize,
    solver: SolverKind,
    start: Option<&CMatrix>,
    opts: &LobpcgOptions,
) -> Result<(Vec<f64>, CMatrix)> {
    let dense = match solver {
        SolverKind::Dense => true,
        SolverKind::Iterative => false,
        SolverKind::Auto => basis.len() <= DENSE_LIMIT,
    };
    if dense {
        diagonalize(&assemble_fiber(basis, &pot.field), n_bands)
    } else {
        let op = FiberOperator::new(basis, pot)?;
        let (w, v, _) = lobpcg(&op, n_bands, start, opts)?;
        Ok((w, v))
    }
}

/// Independent fiber solves at the points of `ks`.
pub fn band_structure(
    v: &FourierField,
    ks: &[Vec2],
    ecut: f64,
    n_bands: usize,
    solver: SolverKind,
) -> Result<Vec<FiberSpectrum>> {
    let bases = ks.iter().map(|k| build_basis(&v.lattice, *k, ecut)).collect::<Result<Vec<_>>>()?;
    let g = grid_for_bases(&bases);
    let n = [g[0].max(v.n[0]), g[1].max(v.n[1])];
    let pot = PreparedPotential::new(&v.resized(n));
    let opts = LobpcgOptions::default();
    ks.par_iter()
        .zip(&bases)
        .map(|(k, basis)| {
            let (w, _) = solve_fiber(basis, &pot, n_bands, solver, None, &opts)?;
            Ok(FiberSpectrum { k: *k, values: w, vectors: None })
        })
        .collect()
}

/// FFT grid covering twice the extent of every basis in the list.
pub fn grid_for_bases(bases: &[PWBasis]) -> [usize; 2] {
    let e = bases.iter().fold([0, 0], |a, b| {
        let x = b.extent();
        [a[0].max(x[0]), a[1].max(x[1])]
    });
    fft_grid_for(e)
}

/// Grid for all fibers on the k-points `ks` at cutoff `ecut`.
pub fn grid_for_cutoff(lattice: &BravaisLattice, ks: &[Vec2], ecut: f64) -> Result<[usize; 2]> {
    let bases = ks.iter().map(|k| build_basis(lattice, *k, ecut)).collect::<Result<Vec<_>>>()?;
    Ok(grid_for_bases(&bases))
}

/// `rho(x) = sum_k w_k sum_n f_nk |psi_nk(x)|^2` on the grid `n`, returned as coefficients.
///
/// `states[k]` holds the basis, the coefficient columns and the occupations of fiber `k`.
pub fn density_from_states(
    lattice: &BravaisLattice,
    states: &[(&PWBasis, &CMatrix, &[f64])],
    weights: &[f64],
    n: [usize; 2],
) -> Result<FourierField> {
    if states.len() != weights.len() {
        return Err(Error::Mismatch("one weight per k-point".into()));
    }
    for (b, _, _) in states {
        let e = b.extent();
        if (n[0] as i64) <= 4 * e[0] || (n[1] as i64) <= 4 * e[1] {
            return Err(Error::Mismatch(format!("density grid {:?} aliases basis extent {:?}", n, e)));
        }
    }
    let fft = Fft2::new(n);
    let ntot = n[0] * n[1];
    let acc = states
        .par_iter()
        .zip(weights.par_iter())
        .map(|((basis, vecs, occ), w)| {
            let mut rho = vec![0.0; ntot];
            let mut buf = vec![C64::new(0.0, 0.0); ntot];
            for (j, f) in occ.iter().enumerate() {
                let c = w * f;
                if c == 0.0 {
                    continue;
                }
                buf.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
                for (i, m) in basis.g.iter().enumerate() {
                    buf[wrap(m[0], n[0]) * n[1] + wrap(m[1], n[1])] = vecs[(i, j)];
                }
                fft.inverse(&mut buf);
                for (r, z) in rho.iter_mut().zip(&buf) {
                    *r += c * z.norm_sqr();
                }
            }
            rho
        })
        .reduce(|| vec![0.0; ntot], |mut a, b| {
            a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
            a
        });
    let s = 1.0 / lattice.cell_area;
    let samples: Vec<C64> = acc.iter().map(|r| C64::new(r * s, 0.0)).collect();
    Ok(FourierField::from_real(lattice, &fft, &samples))
}

/// `int_Γ rho = rho^(0) sqrt|Γ|`.
pub fn cell_integral(rho: &FourierField) -> f64 {
    rho.coeffs[0].re * rho.lattice.cell_area.sqrt()
}

/// Hermitian matrix norm helper for tests and reports.
pub fn max_abs(h: &CMatrix) -> f64 {
    h.iter().fold(0.0, |a, z| a.max(z.norm()))
}

/// Real symmetric copy of a Hermitian matrix with vanishing imaginary part.
pub fn real_part(h: &CMatrix) -> DMatrix<f64> {
    h.map(|z| z.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{k_path, special_point};
    use crate::linalg::hermiticity_defect;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn basis_counting() {
        let sq = BravaisLattice::square();
        let b = build_basis(&sq, Vec2::zeros(), 0.5 * (4.0 * PI * PI) + 1e-9).unwrap();
        assert_eq!(b.len(), 5);
        assert_eq!(b.g[0], [0, 0]);
        assert!(matches!(build_basis(&sq, Vec2::new(3.0, 0.0), 1.0), Err(Error::EmptyBasis)));
        // Area law: count ~ pi 2Ecut |Γ| / (2pi)^2.
        let tri = BravaisLattice::triangular().scaled(3.0);
        let e = 400.0;
        let b = build_basis(&tri, Vec2::new(0.1, 0.2), e).unwrap();
        let expect = PI * 2.0 * e * tri.cell_area / (4.0 * PI * PI);
        assert!((b.len() as f64 / expect - 1.0).abs() < 0.1);
        // Brute-force enumeration oracle.
        let k = Vec2::new(0.3, -0.2);
        let b = build_basis(&tri, k, 60.0).unwrap();
        let mut brute = Vec::new();
        for i in -60..=60 {
            for j in -60..=60 {
                if (tri.reciprocal_point([i, j]) + k).norm_squared() <= 120.0 {
                    brute.push([i, j]);
                }
            }
        }
        let mut got = b.g.clone();
        got.sort();
        brute.sort();
        assert_eq!(got, brute);
    }

    fn cosine_potential(b: &BravaisLattice, n: [usize; 2], amp: f64) -> FourierField {
        // V = 2 amp cos(v1.x): plain coefficient amp at ±v1.
        let mut v = FourierField::zeros(b, n);
        let c = C64::new(amp * b.cell_area.sqrt(), 0.0);
        v.set([1, 0], c);
        v.set([-1, 0], c);
        v
    }

    #[test]
    fn constant_shift_and_hermiticity() {
        let b = BravaisLattice::triangular().scaled(1.5);
        let basis = build_basis(&b, Vec2::new(0.2, 0.1), 60.0).unwrap();
        let n = fft_grid_for(basis.extent());
        let mut v = cosine_potential(&b, n, 0.7);
        v.set([1, 1], C64::new(0.2, 0.3));
        v.set([-1, -1], C64::new(0.2, -0.3));
        let h = assemble_fiber(&basis, &v);
        assert!(hermiticity_defect(&h) <= 1e-12 * max_abs(&h));
        let (w0, _) = diagonalize(&h, 6).unwrap();
        v.coeffs[0] += C64::new(0.37 * b.cell_area.sqrt(), 0.0);
        let (w1, _) = diagonalize(&assemble_fiber(&basis, &v), 6).unwrap();
        for (a, c) in w0.iter().zip(&w1) {
            assert_abs_diff_eq!(c - a, 0.37, epsilon = 1e-12);
        }
        let zero = FourierField::zeros(&b, n);
        let h0 = assemble_fiber(&basis, &zero);
        let (w, _) = diagonalize(&h0, 4).unwrap();
        assert_eq!(w, basis.kinetic[..4].to_vec());
    }

    #[test]
    fn mathieu_splitting_matches_one_dimensional_reference() {
        // On the square lattice at k = (pi, 0) the cosine couples e_{k} and e_{k - v1}.
        let b = BravaisLattice::square();
        let k = Vec2::new(PI, 0.0);
        let amp = 0.3;
        let basis = build_basis(&b, k, 200.0).unwrap();
        let v = cosine_potential(&b, fft_grid_for(basis.extent()), amp);
        let (w, _) = diagonalize(&assemble_fiber(&basis, &v), 2).unwrap();
        // 1D reference: Hill matrix in x-momentum at triple cutoff.
        let n = 61;
        let mut h = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            let q = PI + 2.0 * PI * (i as f64 - 30.0);
            h[(i, i)] = q * q;
            if i + 1 < n {
                h[(i, i + 1)] = amp;
                h[(i + 1, i)] = amp;
            }
        }
        let (r, _) = crate::linalg::eigh_real(&h).unwrap();
        assert_abs_diff_eq!(w[0], r[0], epsilon = 1e-9);
        assert_abs_diff_eq!(w[1], r[1], epsilon = 1e-9);
        assert!((w[1] - w[0] - 2.0 * amp).abs() < 1e-3);
    }

    #[test]
    fn small_dense_cases() {
        let h = CMatrix::from_diagonal(&DVector::from_vec(vec![C64::new(3.0, 0.0), C64::new(-1.0, 0.0), C64::new(2.0, 0.0)]));
        let (w, _) = diagonalize(&h, 3).unwrap();
        assert_eq!(w, vec![-1.0, 2.0, 3.0]);
        let h = CMatrix::from_row_slice(2, 2, &[C64::new(1.0, 0.0), C64::new(0.0, 2.0), C64::new(0.0, -2.0), C64::new(-1.0, 0.0)]);
        let (w, _) = diagonalize(&h, 2).unwrap();
        assert_abs_diff_eq!(w[0], -5f64.sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(w[1], 5f64.sqrt(), epsilon = 1e-14);
        assert!(diagonalize(&h, 3).is_err());
    }

    #[test]
    fn fft_operator_matches_dense_and_lobpcg_converges() {
        let b = BravaisLattice::triangular().scaled(4.0);
        let k = Vec2::new(0.11, -0.07);
        let basis = build_basis(&b, k, 40.0).unwrap();
        let n = fft_grid_for(basis.extent());
        let mut v = FourierField::zeros(&b, n);
        for m in [[1, 0], [0, 1], [1, 1], [2, -1]] {
            let c = C64::new(-0.8, 0.3 * m[0] as f64) * b.cell_area.sqrt();
            v.set(m, c);
            v.set([-m[0], -m[1]], c.conj());
        }
        let pot = PreparedPotential::new(&v);
        let op = FiberOperator::new(&basis, &pot).unwrap();
        let h = assemble_fiber(&basis, &v);
        let x = seed_block(basis.len(), 3);
        let d = (op.apply(&x) - &h * &x).norm();
        assert!(d < 1e-10 * h.norm(), "{d}");
        let (wd, _) = diagonalize(&h, 5).unwrap();
        let (wl, xl, _) = lobpcg(&op, 5, None, &LobpcgOptions::default()).unwrap();
        for (a, c) in wd.iter().zip(&wl) {
            assert_abs_diff_eq!(a, c, epsilon = 1e-9);
        }
        let g = xl.adjoint() * &xl;
        assert!((g - CMatrix::identity(5, 5)).norm() < 1e-8);
    }

    #[test]
    fn random_hermitian_residual() {
        let n = 50;
        let mut h = CMatrix::from_fn(n, n, |i, j| {
            let t = ((i * 31 + j * 17) as f64 * 0.754_877_666).fract() - 0.5;
            C64::new(t, ((i * 13 + j * 7) as f64 * 0.569_840_29).fract() - 0.5)
        });
        h = (&h + h.adjoint()) * C64::new(0.5, 0.0);
        let (w, x) = diagonalize(&h, 50).unwrap();
        for j in 0..n {
            let r = &h * x.column(j) - x.column(j) * C64::new(w[j], 0.0);
            assert!(r.norm() <= 1e-10 * h.norm());
        }
    }

    #[test]
    fn free_electron_degeneracies() {
        let b = BravaisLattice::triangular();
        let zero = FourierField::zeros(&b, [16, 16]);
        let kk = special_point(&b, "K").unwrap();
        let sp = band_structure(&zero, &[kk], 200.0, 4, SolverKind::Dense).unwrap();
        assert_abs_diff_eq!(sp[0].values[0], sp[0].values[2], epsilon = 1e-9);
        assert!(sp[0].values[3] > sp[0].values[2] + 1.0);
        let path = k_path(&b, &["K", "M"], 10).unwrap();
        let sp = band_structure(&zero, &path.points[1..], 200.0, 3, SolverKind::Dense).unwrap();
        for s in &sp {
            assert_abs_diff_eq!(s.values[0], s.values[1], epsilon = 1e-9);
        }
    }

    #[test]
    fn density_of_single_plane_wave_is_uniform() {
        let b = BravaisLattice::triangular().scaled(2.0);
        let basis = build_basis(&b, Vec2::zeros(), 20.0).unwrap();
        let n = fft_grid_for(basis.extent());
        let mut c = CMatrix::zeros(basis.len(), 2);
        c[(0, 0)] = C64::new(1.0, 0.0);
        c[(3, 1)] = C64::new(0.0, 1.0);
        let occ = [1.0, 0.0];
        let rho = density_from_states(&b, &[(&basis, &c, &occ)], &[1.0], n).unwrap();
        let fft = Fft2::new(n);
        for z in rho.to_real(&fft) {
            assert_abs_diff_eq!(z.re, 1.0 / b.cell_area, epsilon = 1e-12);
        }
        // Linearity: both states with equal weights.
        let occ2 = [0.5, 0.5];
        let rho2 = density_from_states(&b, &[(&basis, &c, &occ2)], &[1.0], n).unwrap();
        assert_abs_diff_eq!(cell_integral(&rho2), 1.0, epsilon = 1e-12);
        assert!(density_from_states(&b, &[(&basis, &c, &occ)], &[1.0], [8, 8]).is_err());
    }
}
