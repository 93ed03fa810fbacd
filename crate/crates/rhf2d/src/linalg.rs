//! Small dense Hermitian helpers.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

/// Eigen-decomposition of a Hermitian matrix with ascending eigenvalues.
///
/// The complex QR result is accepted only when its residual is small; otherwise
/// the decomposition is recomputed through the real symmetric embedding
/// `[[A, -B], [B, A]]` of `A + iB`.
pub fn eigh(h: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let n = h.nrows();
    if n == 0 {
        return Ok((Vec::new(), CMatrix::zeros(0, 0)));
    }
    if !h.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::Eigensolver("non-finite matrix entry".into()));
    }
    if let Some(e) = nalgebra::SymmetricEigen::try_new(h.clone(), 1e-15, 10_000) {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| e.eigenvalues[a].partial_cmp(&e.eigenvalues[b]).unwrap());
        let values: Vec<f64> = order.iter().map(|&i| e.eigenvalues[i]).collect();
        let mut vectors = CMatrix::zeros(n, n);
        for (c, &i) in order.iter().enumerate() {
            vectors.set_column(c, &e.eigenvectors.column(i));
        }
        if eigen_residual(h, &values, &vectors) <= 1e-9 * (1.0 + h.norm()) {
            return Ok((values, vectors));
        }
    }
    eigh_embedded(h)
}

fn eigen_residual(h: &CMatrix, values: &[f64], vectors: &CMatrix) -> f64 {
    let mut r = h * vectors;
    for (j, l) in values.iter().enumerate() {
        let mut c = r.column_mut(j);
        c -= vectors.column(j) * C64::new(*l, 0.0);
    }
    r.norm()
}

fn eigh_embedded(h: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let n = h.nrows();
    let mut m = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = 0.5 * (h[(i, j)] + h[(j, i)].conj());
            m[(i, j)] = z.re;
            m[(i + n, j + n)] = z.re;
            m[(i, j + n)] = -z.im;
            m[(i + n, j)] = z.im;
        }
    }
    let (w, v) = eigh_real(&m)?;
    let scale = 1.0 + w.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let mut values = Vec::with_capacity(n);
    let mut vectors = CMatrix::zeros(n, n);
    let mut filled = 0;
    // Every eigenvalue appears twice; x + iy and its partner span one complex line,
    // so each cluster of 2m real vectors yields m complex ones.
    let mut a = 0;
    while a < 2 * n {
        let mut b = a + 1;
        while b < 2 * n && w[b] - w[b - 1] <= 1e-9 * scale {
            b += 1;
        }
        let mut cand: Vec<nalgebra::DVector<C64>> = (a..b)
            .map(|j| nalgebra::DVector::from_fn(n, |i, _| C64::new(v[(i, j)], v[(i + n, j)])))
            .collect();
        let take = ((b - a) / 2).max(1).min(n - filled);
        for _ in 0..take {
            // Pivoted Gram-Schmidt: the candidate with the largest remainder goes next.
            let (p, nrm) = cand
                .iter()
                .enumerate()
                .map(|(i, c)| (i, c.norm()))
                .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if nrm <= 1e-6 {
                break;
            }
            let q = cand.swap_remove(p) / C64::new(nrm, 0.0);
            for c in cand.iter_mut() {
                let d = q.dotc(c);
                *c -= &q * d;
            }
            let lam = (q.dotc(&(h * &q))).re;
            values.push(lam);
            vectors.set_column(filled, &q);
            filled += 1;
        }
        a = b;
    }
    if filled != n {
        return Err(Error::Eigensolver("embedded spectrum lost multiplicity".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| values[x].partial_cmp(&values[y]).unwrap());
    let sorted: Vec<f64> = order.iter().map(|&i| values[i]).collect();
    let mut out = CMatrix::zeros(n, n);
    for (c, &i) in order.iter().enumerate() {
        out.set_column(c, &vectors.column(i));
    }
    Ok((sorted, out))
}

pub fn eigvalsh(h: &CMatrix) -> Result<Vec<f64>> {
    Ok(eigh(h)?.0)
}

/// Eigen-decomposition of a real symmetric matrix with ascending eigenvalues.
pub fn eigh_real(h: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = h.nrows();
    let e = nalgebra::SymmetricEigen::try_new(h.clone(), 1e-15, 10_000)
        .ok_or_else(|| Error::Eigensolver("symmetric QR did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| e.eigenvalues[a].partial_cmp(&e.eigenvalues[b]).unwrap());
    let values = order.iter().map(|&i| e.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (c, &i) in order.iter().enumerate() {
        vectors.set_column(c, &e.eigenvectors.column(i));
    }
    Ok((values, vectors))
}

/// Largest absolute entry of `h - h^dagger`.
pub fn hermiticity_defect(h: &CMatrix) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..h.nrows() {
        for j in 0..h.ncols() {
            m = m.max((h[(i, j)] - h[(j, i)].conj()).norm());
        }
    }
    m
}

/// Spectral norm of a symmetric matrix.
pub fn sym_norm2(h: &DMatrix<f64>) -> Result<f64> {
    let (w, _) = eigh_real(h)?;
    Ok(w.iter().fold(0.0f64, |a, x| a.max(x.abs())))
}
