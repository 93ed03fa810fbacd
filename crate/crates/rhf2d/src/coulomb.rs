//! The lattice-periodized interaction kernel `W_L`: solution of the periodic
//! Poisson-type problem whose Fourier coefficients are `2 pi / (sqrt|Γ_L| |v|)`,
//! normalized so that its minimum is zero.
//!
//! Three evaluators are provided: a truncated Fourier sum, the Madelung form
//! `sum_u f_L(x - u) + M'/L` with `f_L = 1/|x| - (cell average of 1/|x - y|)`,
//! and an Ewald split used internally wherever real-space values are needed
//! at many points.

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{FourierField, C64};
use crate::lattice::{BravaisLattice, Vec2};
use crate::quad::{gauss_legendre, richardson_doubling};
use crate::special::{bessel_k, erfc};

/// Default Riesz order of the Fourier-sum window `(1 - |v|^2/K^2)^s`.
pub const RIESZ_ORDER: u32 = 3;

/// Shell count defaults for the Madelung evaluator.
pub const DEFAULT_SHELLS: usize = 8;

/// Number of shell doublings `n, 2n, ..., 2^(levels-1) n` fed to the extrapolation.
pub const MADELUNG_LEVELS: usize = 5;

/// Unit-scale constants of the kernel of a Bravais lattice.
#[derive(Debug)]
struct UnitKernel {
    lattice: BravaisLattice,
    alpha: f64,
    real_cells: Vec<[i64; 2]>,
    recip: Vec<(Vec2, f64)>,
    /// `-min` of the zero-mean kernel; equals the cell mean of `W_1`.
    m: f64,
    /// Location of the minimum.
    min_at: Vec2,
    /// `lim W_1(x) - 1/|x|`.
    a: f64,
    madelung_offset: OnceLock<f64>,
}

impl UnitKernel {
    fn new(lattice: &BravaisLattice) -> Self {
        let ell = lattice.cell_area.sqrt();
        let alpha = 3.0 / ell;
        let rc = 6.3 / alpha;
        let real_cells = lattice.points_within(rc + lattice.lattice_constant());
        let vc = 12.6 * alpha;
        let mut recip = Vec::new();
        for m in lattice_indices(&lattice.v1, &lattice.v2, vc) {
            if m == [0, 0] {
                continue;
            }
            let v = lattice.reciprocal_point(m);
            let g = v.norm();
            if g <= vc {
                recip.push((v, 2.0 * PI / lattice.cell_area * erfc(g / (2.0 * alpha)) / g));
            }
        }
        let mut k = Self {
            lattice: lattice.clone(),
            alpha,
            real_cells,
            recip,
            m: 0.0,
            min_at: Vec2::zeros(),
            a: 0.0,
            madelung_offset: OnceLock::new(),
        };
        let (xmin, wmin) = k.minimize();
        k.m = -wmin;
        k.min_at = xmin;
        let mut a = -2.0 * alpha / PI.sqrt() - 2.0 * PI.sqrt() / (alpha * lattice.cell_area);
        for n in &k.real_cells {
            if *n != [0, 0] {
                let r = lattice.point(*n).norm();
                a += erfc(alpha * r) / r;
            }
        }
        a += k.recip.iter().map(|(_, c)| c).sum::<f64>();
        k.a = a + k.m;
        k
    }

    /// Zero-mean kernel minus the `1/|y|` term of the nearest lattice point `y = x - u0`.
    fn zero_mean_regular(&self, x: Vec2) -> (f64, Vec2) {
        let (y, _) = self.lattice.reduce_wigner_seitz(x);
        let mut s = -2.0 * PI.sqrt() / (self.alpha * self.lattice.cell_area);
        for n in &self.real_cells {
            let d = y - self.lattice.point(*n);
            let r = d.norm();
            if *n == [0, 0] {
                s += if r < 1e-8 {
                    -2.0 * self.alpha / PI.sqrt() * (1.0 - (self.alpha * r).powi(2) / 3.0)
                } else {
                    (erfc(self.alpha * r) - 1.0) / r
                };
            } else {
                s += erfc(self.alpha * r) / r;
            }
        }
        for (v, c) in &self.recip {
            s += c * v.dot(&y).cos();
        }
        (s, y)
    }

    fn zero_mean(&self, x: Vec2) -> f64 {
        let (s, y) = self.zero_mean_regular(x);
        s + 1.0 / y.norm()
    }

    fn minimize(&self) -> (Vec2, f64) {
        let b = &self.lattice;
        let n = 36;
        let mut cands: Vec<(f64, Vec2)> = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let x = b.u1 * (i as f64 / n as f64) + b.u2 * (j as f64 / n as f64);
                let (y, _) = b.reduce_wigner_seitz(x);
                if y.norm() < 0.05 * b.lattice_constant() {
                    continue;
                }
                cands.push((self.zero_mean(x), x));
            }
        }
        cands.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap());
        let mut best = (Vec2::zeros(), f64::INFINITY);
        for (w0, x0) in cands.into_iter().take(4) {
            let (mut x, mut w) = (x0, w0);
            let mut h = b.lattice_constant() / n as f64;
            while h > 1e-11 {
                let mut moved = false;
                for d in [Vec2::new(1.0, 0.0), Vec2::new(-1.0, 0.0), Vec2::new(0.0, 1.0), Vec2::new(0.0, -1.0)] {
                    let xn = x + d * h;
                    let wn = self.zero_mean(xn);
                    if wn < w {
                        x = xn;
                        w = wn;
                        moved = true;
                    }
                }
                if !moved {
                    h *= 0.5;
                }
            }
            if w < best.1 {
                best = (x, w);
            }
        }
        best
    }
}

fn lattice_indices(v1: &Vec2, v2: &Vec2, radius: f64) -> Vec<[i64; 2]> {
    // Bound on integer coordinates of points inside the ball.
    let det = (v1.x * v2.y - v1.y * v2.x).abs();
    let r0 = (radius * v2.norm() / det).ceil() as i64 + 1;
    let r1 = (radius * v1.norm() / det).ceil() as i64 + 1;
    let mut out = Vec::new();
    for i in -r0..=r0 {
        for j in -r1..=r1 {
            if (v1 * i as f64 + v2 * j as f64).norm() <= radius {
                out.push([i, j]);
            }
        }
    }
    out
}

/// `W_L` on the lattice `L x (unit lattice)`.
#[derive(Clone, Debug)]
pub struct PeriodicKernel {
    /// Scaled lattice `L . unit`.
    pub lattice: BravaisLattice,
    pub l: f64,
    unit: Arc<UnitKernel>,
}

/// Constants of the kernel and the cross-check residuals of its evaluators.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct KernelReport {
    pub l: f64,
    /// Cell mean `M` of `W_1`.
    pub m: f64,
    /// Madelung offset `M'` of `W_1`.
    pub m_prime: f64,
    /// `lim W_1(x) - 1/|x|`.
    pub a: f64,
    pub fourier_vs_madelung: f64,
    pub ewald_vs_madelung: f64,
    pub min_on_grid: f64,
    pub dilation_residual: f64,
}

impl PeriodicKernel {
    /// Kernel for the lattice `l * unit`.
    pub fn new(unit: &BravaisLattice, l: f64) -> Self {
        let u = Arc::new(UnitKernel::new(unit));
        Self { lattice: unit.scaled(l), l, unit: u }
    }

    /// Same unit lattice at another scale, reusing the unit constants.
    pub fn rescaled(&self, l: f64) -> Self {
        Self { lattice: self.unit.lattice.scaled(l), l, unit: self.unit.clone() }
    }

    pub fn unit_lattice(&self) -> &BravaisLattice {
        &self.unit.lattice
    }

    /// Cell mean `M / L`.
    pub fn mean(&self) -> f64 {
        self.unit.m / self.l
    }

    /// `lim (W_L(x) - 1/|x|) = a / L`.
    pub fn near_origin_constant(&self) -> f64 {
        self.unit.a / self.l
    }

    /// Coefficient of `W_L` on the normalized plane wave `e_v`: `2 pi/(sqrt|Γ_L| |v|)`,
    /// and `M sqrt|Γ_L| / L` at `v = 0`, so that the cell mean is `M/L`.
    pub fn coefficient(&self, v: Vec2) -> Result<f64> {
        let m = self.lattice.reciprocal_index(v, 1e-9).ok_or(Error::NotReciprocal)?;
        Ok(self.coefficient_index(m))
    }

    pub fn coefficient_index(&self, m: [i64; 2]) -> f64 {
        let s = self.lattice.cell_area.sqrt();
        if m == [0, 0] {
            return self.mean() * s;
        }
        2.0 * PI / (s * self.lattice.reciprocal_point(m).norm())
    }

    /// Fast real-space evaluation (Ewald split), offset included.
    pub fn evaluate(&self, x: Vec2) -> f64 {
        let (s, y) = self.unit.zero_mean_regular(x / self.l);
        (s + 1.0 / y.norm()) / self.l + self.mean()
    }

    /// `W_L(x) - 1/|x - u0|` with `u0` the lattice point nearest to `x`; bounded.
    pub fn evaluate_regular(&self, x: Vec2) -> f64 {
        let (s, _) = self.unit.zero_mean_regular(x / self.l);
        s / self.l + self.mean()
    }

    /// Fourier sum over `0 < |v| <= cutoff` with the Riesz window of order [`RIESZ_ORDER`].
    ///
    /// For `x` away from the lattice the truncation error behaves like
    /// `RIESZ_ORDER |ΔW(x)| / cutoff^2` (see [`Self::fourier_error_estimate`]).
    pub fn evaluate_fourier(&self, x: Vec2, cutoff: f64) -> f64 {
        self.evaluate_fourier_order(x, cutoff, RIESZ_ORDER)
    }

    /// Fourier sum with window `(1 - |v|^2/cutoff^2)^order`; order 0 is the sharp truncation.
    pub fn evaluate_fourier_order(&self, x: Vec2, cutoff: f64, order: u32) -> f64 {
        let b = &self.lattice;
        let mut s = 0.0;
        for m in lattice_indices(&b.v1, &b.v2, cutoff) {
            if m[0] < 0 || (m[0] == 0 && m[1] <= 0) {
                continue;
            }
            let v = b.reciprocal_point(m);
            let g = v.norm();
            let w = (1.0 - (g / cutoff).powi(2)).powi(order as i32);
            s += 2.0 * w * v.dot(&x).cos() / g;
        }
        s * 2.0 * PI / b.cell_area + self.mean()
    }

    /// Estimated truncation error of [`Self::evaluate_fourier`].
    pub fn fourier_error_estimate(&self, x: Vec2, cutoff: f64) -> f64 {
        let h = 1e-3 * self.l;
        let c = self.evaluate(x);
        let lap = (self.evaluate(x + Vec2::new(h, 0.0))
            + self.evaluate(x - Vec2::new(h, 0.0))
            + self.evaluate(x + Vec2::new(0.0, h))
            + self.evaluate(x - Vec2::new(0.0, h))
            - 4.0 * c)
            / (h * h);
        RIESZ_ORDER as f64 * lap.abs() / (cutoff * cutoff)
    }

    fn madelung_partial(&self, x: Vec2, shells: usize) -> Result<f64> {
        let b = &self.lattice;
        let (y, _) = b.reduce_wigner_seitz(x);
        if y.norm() < 1e-9 * self.l {
            return Err(Error::KernelSingularity);
        }
        let verts = b.wigner_seitz_vertices();
        let area = b.cell_area;
        let f = |z: Vec2| 1.0 / z.norm() - polygon_potential(&verts, z) / area;
        let n = shells as i64;
        let mut sums = Vec::with_capacity(MADELUNG_LEVELS);
        let mut next = n;
        let mut acc = 0.0;
        for shell in 0..=(n << (MADELUNG_LEVELS - 1)) {
            for i in -shell..=shell {
                for j in -shell..=shell {
                    if i.abs().max(j.abs()) != shell {
                        continue;
                    }
                    acc += f(y - b.point([i, j]));
                }
            }
            if shell == next {
                sums.push(acc);
                next *= 2;
            }
        }
        Ok(richardson_doubling(&sums))
    }

    /// Madelung evaluation with shell counts `n, 2n, ..., 16n` and repeated Richardson extrapolation,
    /// offset `M'/L` included.
    pub fn evaluate_madelung(&self, x: Vec2, shells: usize) -> Result<f64> {
        if shells < 2 {
            return Err(Error::InvalidArgument("Madelung evaluation needs at least 2 shells".into()));
        }
        Ok(self.madelung_partial(x, shells)? + self.madelung_offset())
    }

    /// `M'/L`: minus the minimum of the Madelung sum without offset.
    pub fn madelung_offset(&self) -> f64 {
        let m = *self.unit.madelung_offset.get_or_init(|| {
            let unit = self.rescaled(1.0);
            let x = self.unit.min_at;
            // The Ewald minimum seeds a small pattern search on the Madelung sum.
            let eval = |p: Vec2| unit.madelung_partial(p, DEFAULT_SHELLS).expect("off-lattice point");
            let (mut best_x, mut best) = (x, eval(x));
            let mut h = 1e-3;
            while h > 1e-7 {
                let mut moved = false;
                for d in [Vec2::new(1.0, 0.0), Vec2::new(-1.0, 0.0), Vec2::new(0.0, 1.0), Vec2::new(0.0, -1.0)] {
                    let w = eval(best_x + d * h);
                    if w < best {
                        best = w;
                        best_x += d * h;
                        moved = true;
                    }
                }
                if !moved {
                    h *= 0.5;
                }
            }
            -best
        });
        m / self.l
    }

    /// Hartree potential coefficients `(rho *_L W)^(v) = rho^(v) w^(v) sqrt|Γ_L|`.
    pub fn hartree(&self, rho: &FourierField) -> FourierField {
        let s = self.lattice.cell_area.sqrt();
        let mut out = FourierField::zeros(&rho.lattice, rho.n);
        for i in 0..rho.coeffs.len() {
            let m = rho.frequency(i);
            out.coeffs[i] = rho.coeffs[i] * (self.coefficient_index(m) * s);
        }
        out
    }

    /// Cross-checks of the evaluators at the given points.
    pub fn self_test(&self, points: &[Vec2], cutoff: f64, shells: usize) -> Result<KernelReport> {
        let unit = self.rescaled(1.0);
        let mut fm: f64 = 0.0;
        let mut em: f64 = 0.0;
        let mut dil: f64 = 0.0;
        for p in points {
            let w = self.evaluate_madelung(*p, shells)?;
            fm = fm.max((self.evaluate_fourier(*p, cutoff) - w).abs());
            em = em.max((self.evaluate(*p) - w).abs());
            let w1 = unit.evaluate_madelung(*p / self.l, shells)?;
            dil = dil.max(((w - w1 / self.l) / w).abs());
        }
        let b = &self.lattice;
        let mut min_on_grid = f64::INFINITY;
        for i in 0..64 {
            for j in 0..64 {
                let x = b.u1 * (i as f64 / 64.0) + b.u2 * (j as f64 / 64.0);
                if b.reduce_wigner_seitz(x).0.norm() > 1e-9 {
                    min_on_grid = min_on_grid.min(self.evaluate(x));
                }
            }
        }
        Ok(KernelReport {
            l: self.l,
            m: self.unit.m,
            m_prime: self.madelung_offset() * self.l,
            a: self.unit.a,
            fourier_vs_madelung: fm,
            ewald_vs_madelung: em,
            min_on_grid,
            dilation_residual: dil,
        })
    }
}

/// `int over polygon of dz / |z - y|` for a counter-clockwise convex polygon in the plane.
pub fn polygon_potential(vertices: &[Vec2], y: Vec2) -> f64 {
    let n = vertices.len();
    let mut s = 0.0;
    for k in 0..n {
        let a = vertices[k] - y;
        let b = vertices[(k + 1) % n] - y;
        let e = b - a;
        let len = e.norm();
        let d = e / len;
        // Signed distance from y to the edge line, positive when y lies on the inner side.
        let h = a.x * d.y - a.y * d.x;
        if h.abs() < 1e-15 * len {
            continue;
        }
        let (ta, tb) = (a.dot(&d), b.dot(&d));
        s += h * ((tb / h.abs()).asinh() - (ta / h.abs()).asinh());
    }
    s
}

/// Both sides of `(2 pi/|Γ|) sum_v g^(v) exp(i x.v) = sum_u g(u + x)` for the Gaussian
/// `g(x) = exp(-|x|^2/(2 s^2))`, `g^(k) = s^2 exp(-s^2 |k|^2/2)` (unitary transform).
pub fn poisson_check(sigma: f64, lattice: &BravaisLattice, x: Vec2) -> (f64, f64) {
    let rr = sigma * 40f64.sqrt() + 2.0 * lattice.lattice_constant();
    let mut rhs = 0.0;
    for n in lattice.points_within(rr + x.norm()) {
        let y = lattice.point(n) + x;
        rhs += (-y.norm_squared() / (2.0 * sigma * sigma)).exp();
    }
    let kr = 40f64.sqrt() / sigma + lattice.v1.norm().max(lattice.v2.norm());
    let mut lhs = 0.0;
    for m in lattice_indices(&lattice.v1, &lattice.v2, kr) {
        let v = lattice.reciprocal_point(m);
        lhs += sigma * sigma * (-sigma * sigma * v.norm_squared() / 2.0).exp() * v.dot(&x).cos();
    }
    (lhs * 2.0 * PI / lattice.cell_area, rhs)
}

/// `(exp(-nu|.|) * exp(-nu|.|))(x)` in the plane at `|x| = r`.
///
/// In elliptic coordinates the convolution reduces to `(pi r^2/4) K_2(nu r)`.
pub fn exp_self_convolution(nu: f64, r: f64) -> f64 {
    if r * nu < 1e-8 {
        return PI / (2.0 * nu * nu);
    }
    PI * r * r / 4.0 * bessel_k(2, nu * r)
}

/// The two-sided envelope `[nu^-2 (1 + nu r) e^{-nu r}, (pi/2) nu^-2 (1 + nu r) e^{-nu r}]`.
pub fn convolution_bracket(nu: f64, r: f64) -> (f64, f64) {
    let lo = (1.0 + nu * r) * (-nu * r).exp() / (nu * nu);
    (lo, lo * PI / 2.0)
}

/// `int_r^inf a e^{-nu a} E(r/a) da`: the same envelope's integral form with the
/// ellipse perimeter `4 a E(.)` as the level-set weight.
pub fn perimeter_weighted_integral(nu: f64, r: f64) -> f64 {
    if r == 0.0 {
        return PI / (2.0 * nu * nu);
    }
    // Substitute a = r (1 + t), then Gauss-Laguerre-like cut at 60/nu.
    let (x, w) = gauss_legendre(200);
    let tmax = 60.0 / (nu * r);
    let mut s = 0.0;
    for (xi, wi) in x.iter().zip(&w) {
        // Quadratic map clusters nodes near the lower limit.
        let u = 0.5 * (xi + 1.0);
        let t = tmax * u * u;
        let dt = tmax * u * wi;
        let a = r * (1.0 + t);
        s += a * (-nu * a).exp() * crate::special::ellip_e(1.0 / (1.0 + t)) * r * dt;
    }
    s
}

/// Coefficient helper for the periodic density of a motif: `sum_r exp(-i v.(L r))`.
pub fn structure_factor(v: Vec2, sites: &[Vec2]) -> C64 {
    sites.iter().map(|r| C64::from_polar(1.0, -v.dot(r))).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn polar_polygon_integral(verts: &[Vec2], y: Vec2) -> f64 {
        // Oracle: polar coordinates around an interior y, 1/r cancels the Jacobian.
        let n = 20000;
        let mut s = 0.0;
        for k in 0..n {
            let t = 2.0 * PI * (k as f64 + 0.5) / n as f64;
            let d = Vec2::new(t.cos(), t.sin());
            // Distance to the boundary along d.
            let mut rho = f64::INFINITY;
            for i in 0..verts.len() {
                let a = verts[i] - y;
                let b = verts[(i + 1) % verts.len()] - y;
                let e = b - a;
                let den = d.x * e.y - d.y * e.x;
                if den.abs() < 1e-15 {
                    continue;
                }
                let tt = (a.x * e.y - a.y * e.x) / den;
                let ss = (a.x * d.y - a.y * d.x) / den;
                if tt > 0.0 && (-1e-12..=1.0 + 1e-12).contains(&ss) {
                    rho = rho.min(tt);
                }
            }
            s += rho;
        }
        s * 2.0 * PI / n as f64
    }

    #[test]
    fn polygon_potential_matches_polar_quadrature() {
        let verts = BravaisLattice::triangular().wigner_seitz_vertices();
        for y in [Vec2::new(0.0, 0.0), Vec2::new(0.2, -0.1), Vec2::new(-0.3, 0.25)] {
            assert_abs_diff_eq!(polygon_potential(&verts, y), polar_polygon_integral(&verts, y), epsilon = 1e-6);
        }
        // Exterior point: compare against the far-field monopole plus quadrupole-free hexagon.
        let far = Vec2::new(40.0, 13.0);
        let area = BravaisLattice::triangular().cell_area;
        let p = polygon_potential(&verts, far);
        // Second moment of the hexagon: area * 5 R^2 / 12 with circumradius R.
        let r2 = 5.0 / 12.0 / 3.0;
        let expect = area / far.norm() + area * r2 / (4.0 * far.norm().powi(3));
        assert_abs_diff_eq!(p, expect, epsilon = 1e-9);
    }

    #[test]
    fn coefficient_values() {
        let k = PeriodicKernel::new(&BravaisLattice::triangular(), 1.0);
        let v1 = k.lattice.v1;
        let expect = 2.0 * PI / ((3f64.sqrt() / 2.0).sqrt() * 4.0 * PI / 3f64.sqrt());
        assert_abs_diff_eq!(k.coefficient(v1).unwrap(), expect, epsilon = 1e-13);
        assert!(matches!(k.coefficient(v1 * 0.5), Err(Error::NotReciprocal)));
        let k2 = k.rescaled(2.5);
        let c2 = k2.coefficient(v1 / 2.5).unwrap();
        // w_L(v) in e_v normalization: (1/L) w_1(L v) under the dilation of e_v.
        assert_abs_diff_eq!(c2, expect, epsilon = 1e-12);
        assert!(k.mean() > 0.0);
    }

    #[test]
    fn ewald_and_madelung_agree_and_offset_is_consistent() {
        let k = PeriodicKernel::new(&BravaisLattice::triangular(), 1.0);
        for x in [Vec2::new(0.21, 0.05), Vec2::new(-0.1, 0.33), Vec2::new(0.4, -0.2)] {
            let m = k.evaluate_madelung(x, 8).unwrap();
            assert_abs_diff_eq!(k.evaluate(x), m, epsilon = 1e-7);
        }
        assert_abs_diff_eq!(k.madelung_offset(), k.mean(), epsilon = 1e-7);
        assert!(matches!(k.evaluate_madelung(k.lattice.u1, 4), Err(Error::KernelSingularity)));
        // Minimum at the Wigner-Seitz vertex of the triangular lattice.
        let v = Vec2::new(1.0 / 3f64.sqrt(), 0.0);
        assert_abs_diff_eq!(k.evaluate(v), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn square_lattice_kernel() {
        let k = PeriodicKernel::new(&BravaisLattice::square(), 1.0);
        let x = Vec2::new(0.3, 0.1);
        assert_abs_diff_eq!(k.evaluate(x), k.evaluate_madelung(x, 8).unwrap(), epsilon = 1e-7);
        assert_abs_diff_eq!(k.evaluate(Vec2::new(0.5, 0.5)), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn fourier_sweep_is_cauchy() {
        let k = PeriodicKernel::new(&BravaisLattice::triangular(), 1.0);
        let x = Vec2::new(0.25, 0.1);
        let s: Vec<f64> = [100.0, 200.0, 400.0, 800.0].iter().map(|c| k.evaluate_fourier(x, *c)).collect();
        let d: Vec<f64> = s.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        assert!(d[1] < d[0] && d[2] < d[1]);
        assert!((s[3] - k.evaluate(x)).abs() < 10.0 * k.fourier_error_estimate(x, 800.0));
        // Point-group symmetry of the coefficients.
        let r = crate::lattice::rotation(PI / 3.0);
        assert_abs_diff_eq!(k.evaluate_fourier(x, 300.0), k.evaluate_fourier(r * x, 300.0), epsilon = 1e-10);
    }

    #[test]
    fn poisson_summation() {
        let (l, r) = poisson_check(0.4, &BravaisLattice::square(), Vec2::zeros());
        assert_abs_diff_eq!(l, r, epsilon = 1e-10);
        let (l, r) = poisson_check(0.3, &BravaisLattice::triangular(), Vec2::new(0.17, -0.29));
        assert_abs_diff_eq!(l, r, epsilon = 1e-8);
        let (_, r) = poisson_check(0.02, &BravaisLattice::square(), Vec2::new(0.01, 0.0));
        assert_abs_diff_eq!(r, (-0.125f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn self_convolution_matches_cartesian_quadrature() {
        for (nu, r) in [(1.0, 0.0), (1.0, 2.0), (0.5, 3.0), (2.0, 0.7)] {
            let h = 0.02 / nu;
            let lim = 18.0 / nu;
            let n = (2.0 * lim / h) as i64;
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let y = Vec2::new(-lim + (i as f64 + 0.5) * h, -lim + (j as f64 + 0.5) * h);
                    s += (-nu * y.norm()).exp() * (-nu * (y - Vec2::new(r, 0.0)).norm()).exp();
                }
            }
            s *= h * h;
            assert_abs_diff_eq!(exp_self_convolution(nu, r) / s, 1.0, epsilon = 2e-4);
        }
        assert_abs_diff_eq!(perimeter_weighted_integral(1.0, 0.0), PI / 2.0, epsilon = 1e-14);
        let (lo, hi) = convolution_bracket(1.0, 2.0);
        let p = perimeter_weighted_integral(1.0, 2.0);
        assert!(lo <= p && p <= hi);
    }

    #[test]
    fn gaussian_hartree_matches_real_space_quadrature() {
        let k = PeriodicKernel::new(&BravaisLattice::triangular(), 1.0);
        let b = k.lattice.clone();
        let sigma: f64 = 0.15;
        let mut rho = FourierField::zeros(&b, [32, 32]);
        for i in 0..rho.coeffs.len() {
            let v = rho.vector(i);
            rho.coeffs[i] = C64::new((-sigma * sigma * v.norm_squared() / 2.0).exp() / b.cell_area.sqrt(), 0.0);
        }
        let vh = k.hartree(&rho);
        let dens = |y: Vec2| -> f64 {
            b.points_within(2.5)
                .iter()
                .map(|n| (-(y - b.point(*n)).norm_squared() / (2.0 * sigma * sigma)).exp())
                .sum::<f64>()
                / (2.0 * PI * sigma * sigma)
        };
        let verts = b.wigner_seitz_vertices();
        let (gx, gw) = gauss_legendre(48);
        for x0 in [Vec2::new(0.1, 0.05), Vec2::new(0.45, -0.2)] {
            // Polar coordinates about x0 over the Wigner-Seitz cell, one triangle per edge.
            let mut q = 0.0;
            for e in 0..verts.len() {
                let (a, c) = (verts[e], verts[(e + 1) % verts.len()]);
                let (t0, mut t1) = (a.y.atan2(a.x), c.y.atan2(c.x));
                if t1 < t0 {
                    t1 += 2.0 * PI;
                }
                let nrm = {
                    let m = 0.5 * (a + c);
                    m / m.norm()
                };
                let h = (0.5 * (a + c)).norm();
                for (xi, wi) in gx.iter().zip(&gw) {
                    let t = 0.5 * (t0 + t1) + 0.5 * (t1 - t0) * xi;
                    let d = Vec2::new(t.cos(), t.sin());
                    let smax = h / d.dot(&nrm);
                    for (xj, wj) in gx.iter().zip(&gw) {
                        let sr = 0.5 * smax * (1.0 + xj);
                        let z = d * sr;
                        q += wi * wj * 0.25 * (t1 - t0) * smax * dens(x0 + z) * sr * k.evaluate(-z);
                    }
                }
            }
            assert_abs_diff_eq!(vh.eval(x0).re, q, epsilon = 1e-5);
        }
    }
}
