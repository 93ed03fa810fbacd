//! Periodic fields stored as coefficients on a product grid of reciprocal
//! lattice vectors, with FFT transforms to real-space samples.
//!
//! Coefficients are taken with respect to the orthonormal plane waves
//! `e_v(x) = |Γ|^{-1/2} exp(i v.x)` of the periodicity cell `Γ`.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::lattice::{BravaisLattice, Vec2};

pub type C64 = Complex64;

/// Forward and inverse 2D FFT plans for an `n0 x n1` row-major grid.
#[derive(Clone)]
pub struct Fft2 {
    pub n: [usize; 2],
    f0: Arc<dyn Fft<f64>>,
    f1: Arc<dyn Fft<f64>>,
    i0: Arc<dyn Fft<f64>>,
    i1: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Fft2({}x{})", self.n[0], self.n[1])
    }
}

impl Fft2 {
    pub fn new(n: [usize; 2]) -> Self {
        let mut p = FftPlanner::new();
        Self {
            n,
            f0: p.plan_fft_forward(n[0]),
            f1: p.plan_fft_forward(n[1]),
            i0: p.plan_fft_inverse(n[0]),
            i1: p.plan_fft_inverse(n[1]),
        }
    }

    fn run(&self, data: &mut [C64], a0: &Arc<dyn Fft<f64>>, a1: &Arc<dyn Fft<f64>>) {
        let [n0, n1] = self.n;
        debug_assert_eq!(data.len(), n0 * n1);
        // Rows are contiguous along axis 1.
        a1.process(data);
        let mut col = vec![C64::new(0.0, 0.0); n0];
        for j in 0..n1 {
            for i in 0..n0 {
                col[i] = data[i * n1 + j];
            }
            a0.process(&mut col);
            for i in 0..n0 {
                data[i * n1 + j] = col[i];
            }
        }
    }

    /// Unnormalized `sum_x f(x) exp(-2 pi i m.x/n)`.
    pub fn forward(&self, data: &mut [C64]) {
        self.run(data, &self.f0, &self.f1);
    }

    /// Unnormalized `sum_m c(m) exp(+2 pi i m.x/n)`.
    pub fn inverse(&self, data: &mut [C64]) {
        self.run(data, &self.i0, &self.i1);
    }

    pub fn len(&self) -> usize {
        self.n[0] * self.n[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Wrapped index in `0..n` of a signed frequency.
pub fn wrap(m: i64, n: usize) -> usize {
    m.rem_euclid(n as i64) as usize
}

/// Signed frequency of a wrapped index, in `[-n/2, n/2)`.
pub fn unwrap(i: usize, n: usize) -> i64 {
    let i = i as i64;
    let n = n as i64;
    if i >= (n + 1) / 2 {
        i - n
    } else {
        i
    }
}

/// Smallest FFT-friendly size (factors 2, 3, 5, 7) that is even and at least `n`.
pub fn good_size(n: usize) -> usize {
    let mut m = n.max(2);
    loop {
        if m.is_multiple_of(2) {
            let mut r = m;
            for p in [2, 3, 5, 7] {
                while r.is_multiple_of(p) {
                    r /= p;
                }
            }
            if r == 1 {
                return m;
            }
        }
        m += 1;
    }
}

/// Lattice-periodic field on an `n0 x n1` grid of coefficients `c(m)`, `m = (m0, m1)`,
/// for the reciprocal vector `m0 v1 + m1 v2`.
#[derive(Clone, Debug)]
pub struct FourierField {
    pub lattice: BravaisLattice,
    pub n: [usize; 2],
    pub coeffs: Vec<C64>,
}

impl FourierField {
    pub fn zeros(lattice: &BravaisLattice, n: [usize; 2]) -> Self {
        Self { lattice: lattice.clone(), n, coeffs: vec![C64::new(0.0, 0.0); n[0] * n[1]] }
    }

    pub fn index(&self, m: [i64; 2]) -> usize {
        wrap(m[0], self.n[0]) * self.n[1] + wrap(m[1], self.n[1])
    }

    /// Whether `m` is representable without wrapping onto another frequency.
    pub fn holds(&self, m: [i64; 2]) -> bool {
        let ok = |mi: i64, n: usize| {
            let n = n as i64;
            mi >= -(n / 2) && mi < (n + 1) / 2
        };
        ok(m[0], self.n[0]) && ok(m[1], self.n[1])
    }

    pub fn get(&self, m: [i64; 2]) -> C64 {
        if self.holds(m) {
            self.coeffs[self.index(m)]
        } else {
            C64::new(0.0, 0.0)
        }
    }

    pub fn set(&mut self, m: [i64; 2], c: C64) {
        assert!(self.holds(m), "frequency outside the stored grid");
        let i = self.index(m);
        self.coeffs[i] = c;
    }

    /// Signed frequency of flat index `i`.
    pub fn frequency(&self, i: usize) -> [i64; 2] {
        [unwrap(i / self.n[1], self.n[0]), unwrap(i % self.n[1], self.n[1])]
    }

    pub fn vector(&self, i: usize) -> Vec2 {
        self.lattice.reciprocal_point(self.frequency(i))
    }

    /// Samples `f(x_ij)` at `x_ij = (i/n0) u1 + (j/n1) u2`.
    pub fn to_real(&self, fft: &Fft2) -> Vec<C64> {
        assert_eq!(fft.n, self.n);
        let mut d = self.coeffs.clone();
        fft.inverse(&mut d);
        let s = 1.0 / self.lattice.cell_area.sqrt();
        d.iter_mut().for_each(|z| *z *= s);
        d
    }

    pub fn from_real(lattice: &BravaisLattice, fft: &Fft2, samples: &[C64]) -> Self {
        let mut d = samples.to_vec();
        fft.forward(&mut d);
        let s = lattice.cell_area.sqrt() / (fft.n[0] * fft.n[1]) as f64;
        d.iter_mut().for_each(|z| *z *= s);
        Self { lattice: lattice.clone(), n: fft.n, coeffs: d }
    }

    /// Point evaluation by direct summation.
    pub fn eval(&self, x: Vec2) -> C64 {
        let s = 1.0 / self.lattice.cell_area.sqrt();
        (0..self.coeffs.len())
            .map(|i| self.coeffs[i] * C64::from_polar(s, self.vector(i).dot(&x)))
            .sum()
    }

    /// `max |c(-m) - conj c(m)|`.
    pub fn hermitian_defect(&self) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..self.coeffs.len() {
            let m = self.frequency(i);
            let mm = [-m[0], -m[1]];
            if self.holds(mm) {
                d = d.max((self.coeffs[self.index(mm)] - self.coeffs[i].conj()).norm());
            }
        }
        d
    }

    /// L2 norm of the coefficient vector.
    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Copy onto another grid size, dropping frequencies that do not fit.
    pub fn resized(&self, n: [usize; 2]) -> Self {
        let mut out = Self::zeros(&self.lattice, n);
        for i in 0..self.coeffs.len() {
            let m = self.frequency(i);
            if out.holds(m) {
                out.set(m, self.coeffs[i]);
            }
        }
        out
    }

    pub fn real_positions(&self) -> Vec<Vec2> {
        let mut out = Vec::with_capacity(self.coeffs.len());
        for i in 0..self.n[0] {
            for j in 0..self.n[1] {
                out.push(
                    self.lattice.u1 * (i as f64 / self.n[0] as f64)
                        + self.lattice.u2 * (j as f64 / self.n[1] as f64),
                );
            }
        }
        out
    }
}
