//! Radial single-orbital Hartree atom in the plane with the three-dimensional
//! Coulomb interaction: ground state of `-Δ - 1/r + Vpp + |v|^2 * 1/|x|`.
//!
//! The radial operator `-u'' - u'/r` is discretized by finite volumes on a
//! graded grid whose first node sits at the origin; the last node carries a
//! Dirichlet condition.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{gauss_legendre, linear_fit, trapezoid_weights};
use crate::special::{bessel_jn, ellip_k_complementary};

/// Nodes `r_i = r_max (e^{beta t_i} - 1)/(e^beta - 1)` with uniform `t_i`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RadialGrid {
    pub r: Vec<f64>,
    pub r_max: f64,
    pub beta: f64,
    /// Control-volume boundaries, `edges[i]..edges[i+1]` around node `i`.
    pub edges: Vec<f64>,
    /// `int r dr` over each control volume.
    pub area: Vec<f64>,
    /// `r_{i+1/2} / (r_{i+1} - r_i)`.
    pub flux: Vec<f64>,
}

impl RadialGrid {
    pub fn graded(n: usize, r_max: f64, beta: f64) -> Result<Self> {
        if n < 8 || r_max <= 0.0 || beta < 0.0 {
            return Err(Error::InvalidArgument(format!("radial grid n={n}, r_max={r_max}, beta={beta}")));
        }
        let r: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 / (n - 1) as f64;
                if beta == 0.0 {
                    r_max * t
                } else {
                    r_max * (beta * t).exp_m1() / beta.exp_m1()
                }
            })
            .collect();
        Self::from_nodes(r)
    }

    pub fn from_nodes(r: Vec<f64>) -> Result<Self> {
        if r.len() < 3 || r[0] != 0.0 || r.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("radial nodes must start at 0 and increase".into()));
        }
        let n = r.len();
        let mut edges = Vec::with_capacity(n + 1);
        edges.push(0.0);
        for i in 0..n - 1 {
            edges.push(0.5 * (r[i] + r[i + 1]));
        }
        edges.push(r[n - 1]);
        let area = (0..n).map(|i| 0.5 * (edges[i + 1].powi(2) - edges[i].powi(2))).collect();
        let flux = (0..n - 1).map(|i| edges[i + 1] / (r[i + 1] - r[i])).collect();
        let r_max = r[n - 1];
        Ok(Self { r, r_max, beta: f64::NAN, edges, area, flux }.with_beta())
    }

    fn with_beta(mut self) -> Self {
        // Recover the grading parameter from the first spacing when it fits the scheme.
        let n = self.r.len();
        let h0 = self.r[1] / self.r_max;
        let t = 1.0 / (n - 1) as f64;
        if (h0 - t).abs() < 1e-12 {
            self.beta = 0.0;
        } else {
            let (mut lo, mut hi) = (1e-8, 100.0);
            for _ in 0..200 {
                let b = 0.5 * (lo + hi);
                let v = (b * t).exp_m1() / b.exp_m1();
                if v > h0 {
                    lo = b;
                } else {
                    hi = b;
                }
            }
            self.beta = 0.5 * (lo + hi);
        }
        self
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    /// Whether the box is wide enough for the tail of a state bound by `mu`.
    pub fn resolves(&self, mu: f64) -> bool {
        mu > 0.0 && self.r_max >= 30.0 / mu.sqrt()
    }

    /// `int f(r) r dr` over each control volume (4-point Gauss per volume).
    pub fn cell_integral(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        let (x, w) = gauss_legendre(4);
        (0..self.len())
            .map(|i| {
                let (a, b) = (self.edges[i], self.edges[i + 1]);
                let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
                x.iter().zip(&w).map(|(x, w)| {
                    let s = m + h * x;
                    w * f(s) * s
                }).sum::<f64>() * h
            })
            .collect()
    }

    /// Exact control-volume integrals of `-charge / r`.
    pub fn coulomb_cells(&self, charge: f64) -> Vec<f64> {
        (0..self.len()).map(|i| -charge * (self.edges[i + 1] - self.edges[i])).collect()
    }

    /// Lumped control-volume integrals of nodal samples.
    pub fn lumped(&self, samples: &[f64]) -> Vec<f64> {
        samples.iter().zip(&self.area).map(|(v, a)| v * a).collect()
    }

    /// `int 2 pi r f g dr` in the lumped inner product.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        2.0 * PI * f.iter().zip(g).zip(&self.area).map(|((a, b), w)| a * b * w).sum::<f64>()
    }

    /// `int 2 pi r f dr` in the lumped rule.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        2.0 * PI * f.iter().zip(&self.area).map(|(a, w)| a * w).sum::<f64>()
    }

    /// Discrete Dirichlet form `int 2 pi r |u'|^2 dr`.
    pub fn kinetic(&self, u: &[f64]) -> f64 {
        2.0 * PI * (0..self.len() - 1).map(|i| self.flux[i] * (u[i + 1] - u[i]).powi(2)).sum::<f64>()
    }

    /// Index of the node nearest to `r`.
    pub fn nearest(&self, r: f64) -> usize {
        let j = self.r.partition_point(|x| *x < r).min(self.len() - 1);
        if j > 0 && (self.r[j - 1] - r).abs() < (self.r[j] - r).abs() {
            j - 1
        } else {
            j
        }
    }
}

/// Piecewise-cubic Hermite interpolant of nodal samples.
#[derive(Clone, Debug)]
pub struct RadialInterp {
    r: Vec<f64>,
    f: Vec<f64>,
    d: Vec<f64>,
}

impl RadialInterp {
    pub fn new(r: &[f64], f: &[f64]) -> Self {
        let n = r.len();
        let mut d = vec![0.0; n];
        for i in 0..n {
            d[i] = if i == 0 {
                (f[1] - f[0]) / (r[1] - r[0])
            } else if i == n - 1 {
                (f[n - 1] - f[n - 2]) / (r[n - 1] - r[n - 2])
            } else {
                let (h0, h1) = (r[i] - r[i - 1], r[i + 1] - r[i]);
                let (s0, s1) = ((f[i] - f[i - 1]) / h0, (f[i + 1] - f[i]) / h1);
                (h1 * s0 + h0 * s1) / (h0 + h1)
            };
        }
        Self { r: r.to_vec(), f: f.to_vec(), d }
    }

    /// Value at `x`, clamped to the end values outside the node range.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.r.len();
        if x <= self.r[0] {
            return self.f[0];
        }
        if x >= self.r[n - 1] {
            return self.f[n - 1];
        }
        let j = self.r.partition_point(|v| *v <= x) - 1;
        let h = self.r[j + 1] - self.r[j];
        let t = (x - self.r[j]) / h;
        let (t2, t3) = (t * t, t * t * t);
        (2.0 * t3 - 3.0 * t2 + 1.0) * self.f[j]
            + (t3 - 2.0 * t2 + t) * h * self.d[j]
            + (-2.0 * t3 + 3.0 * t2) * self.f[j + 1]
            + (t3 - t2) * h * self.d[j + 1]
    }
}

/// Radial Hartree operator `rho -> int rho(r') kappa(r, r') r' dr'` with
/// `kappa = 4/(r + r') K(2 sqrt(r r')/(r + r'))`, assembled as a dense matrix.
#[derive(Clone, Debug)]
pub struct RadialCoulomb {
    n: usize,
    m: Vec<f64>,
}

fn log_antiderivatives(y: f64) -> (f64, f64) {
    if y == 0.0 {
        (0.0, 0.0)
    } else {
        let l = y.abs().ln();
        (y * l - y, 0.5 * y * y * l - 0.25 * y * y)
    }
}

impl RadialCoulomb {
    pub fn new(grid: &RadialGrid) -> Self {
        let r = &grid.r;
        let n = r.len();
        let w = trapezoid_weights(r);
        let mut m = vec![0.0; n * n];
        m.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            let ri = r[i];
            if i == 0 {
                // kappa(0, r') r' = 2 pi.
                for j in 0..n {
                    row[j] = 2.0 * PI * w[j];
                }
                return;
            }
            // Smooth remainder kappa + 4 ln|r - r'|/(r + r') by the trapezoid rule.
            for j in 0..n {
                let s = ri + r[j];
                let g = if j == i {
                    2.0 / ri * (8.0 * ri).ln()
                } else {
                    let kp = (ri - r[j]).abs() / s;
                    4.0 / s * (ellip_k_complementary(kp) + (ri - r[j]).abs().ln())
                };
                row[j] = w[j] * g * r[j];
            }
            // Logarithmic part integrated exactly against piecewise-linear 4 r' rho/(r + r').
            for j in 0..n - 1 {
                let (a, b) = (r[j], r[j + 1]);
                let h = b - a;
                let (fa0, fa1) = log_antiderivatives(a - ri);
                let (fb0, fb1) = log_antiderivatives(b - ri);
                let i0 = fb0 - fa0;
                let i1 = fb1 - fa1;
                let pb = (i1 + (ri - a) * i0) / h;
                let pa = i0 - pb;
                row[j] -= pa * 4.0 * a / (ri + a);
                row[j + 1] -= pb * 4.0 * b / (ri + b);
            }
        });
        Self { n, m }
    }

    pub fn apply(&self, rho: &[f64]) -> Result<Vec<f64>> {
        let scale = rho.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if rho.iter().any(|x| *x < -1e-13 * scale.max(1e-300)) {
            return Err(Error::NegativeDensity);
        }
        Ok(self.m.chunks(self.n).map(|row| row.iter().zip(rho).map(|(a, b)| a * b).sum()).collect())
    }
}

/// Radial Hartree potential of a nonnegative density on `grid`.
pub fn radial_coulomb(rho: &[f64], grid: &RadialGrid) -> Result<Vec<f64>> {
    RadialCoulomb::new(grid).apply(rho)
}

/// Lowest two eigenvalues and the normalized, positive ground vector.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialEigenpair {
    pub lambda: f64,
    pub second: f64,
    pub u: Vec<f64>,
}

/// Outcome of the radial ground state search.
#[derive(Clone, Debug, PartialEq)]
pub enum RadialGround {
    Bound(RadialEigenpair),
    /// The lowest discrete eigenvalue is nonnegative; the state is kept for iteration.
    Unbound(RadialEigenpair),
}

impl RadialGround {
    pub fn pair(&self) -> &RadialEigenpair {
        match self {
            RadialGround::Bound(p) | RadialGround::Unbound(p) => p,
        }
    }

    pub fn is_bound(&self) -> bool {
        matches!(self, RadialGround::Bound(_))
    }
}

fn sturm_count(diag: &[f64], off: &[f64], b: &[f64], lam: f64) -> usize {
    let mut count = 0;
    let mut d = diag[0] - lam * b[0];
    if d < 0.0 {
        count += 1;
    }
    for i in 1..diag.len() {
        let dd = if d == 0.0 { 1e-300 } else { d };
        d = diag[i] - lam * b[i] - off[i - 1] * off[i - 1] / dd;
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

fn pencil_eigenvalue(diag: &[f64], off: &[f64], b: &[f64], k: usize) -> f64 {
    let m = diag.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..m {
        let rad = if i > 0 { off[i - 1].abs() } else { 0.0 } + if i + 1 < m { off[i].abs() } else { 0.0 };
        lo = lo.min((diag[i] - rad) / b[i]);
        hi = hi.max((diag[i] + rad) / b[i]);
    }
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(diag, off, b, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Ground state of `-u'' - u'/r + V u` given the control-volume integrals of `V r`.
pub fn lowest_radial_eigenpair(grid: &RadialGrid, v_cells: &[f64]) -> Result<RadialGround> {
    let n = grid.len();
    if v_cells.len() != n {
        return Err(Error::Mismatch(format!("potential has {} cells, grid {}", v_cells.len(), n)));
    }
    let m = n - 1;
    let mut diag = vec![0.0; m];
    let mut off = vec![0.0; m - 1];
    for i in 0..m {
        diag[i] = v_cells[i] + grid.flux[i] + if i > 0 { grid.flux[i - 1] } else { 0.0 };
        if i + 1 < m {
            off[i] = -grid.flux[i];
        }
    }
    let b = &grid.area[..m];
    if diag.iter().any(|x| !x.is_finite()) {
        return Err(Error::Eigensolver("non-finite potential".into()));
    }
    let l1 = pencil_eigenvalue(&diag, &off, b, 0);
    let l2 = pencil_eigenvalue(&diag, &off, b, 1);
    // Inverse iteration just below l1, where the shifted pencil is positive definite.
    let shift = l1 - 1e-9 * (l2 - l1).abs().max(1e-12);
    let mut u = vec![1.0; m];
    let mut c = vec![0.0; m];
    let mut rhs = vec![0.0; m];
    for _ in 0..4 {
        for i in 0..m {
            rhs[i] = b[i] * u[i];
        }
        // Thomas elimination on the symmetric positive-definite shifted pencil.
        let mut d0 = diag[0] - shift * b[0];
        c[0] = if m > 1 { off[0] / d0 } else { 0.0 };
        rhs[0] /= d0;
        for i in 1..m {
            d0 = diag[i] - shift * b[i] - off[i - 1] * c[i - 1];
            if i + 1 < m {
                c[i] = off[i] / d0;
            }
            rhs[i] = (rhs[i] - off[i - 1] * rhs[i - 1]) / d0;
        }
        for i in (0..m - 1).rev() {
            rhs[i] -= c[i] * rhs[i + 1];
        }
        let nrm = (2.0 * PI * rhs.iter().zip(b).map(|(x, w)| x * x * w).sum::<f64>()).sqrt();
        for i in 0..m {
            u[i] = rhs[i] / nrm;
        }
    }
    if u[0] < 0.0 {
        u.iter_mut().for_each(|x| *x = -*x);
    }
    u.push(0.0);
    let pair = RadialEigenpair { lambda: l1, second: l2, u };
    Ok(if l1 < 0.0 { RadialGround::Bound(pair) } else { RadialGround::Unbound(pair) })
}

/// One compactly supported radial well `-strength (1 - r^2/R^2)^3` on `r < R`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Bump {
    pub strength: f64,
    pub radius: f64,
}

/// Pseudo-potential as a sum of [`Bump`]s; empty means `Vpp = 0`.
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PseudoPotential {
    pub terms: Vec<Bump>,
}

impl PseudoPotential {
    pub fn zero() -> Self {
        Self::default()
    }

    /// `-eta (1 - r^2/R^2)^3`.
    pub fn bump(eta: f64, radius: f64) -> Self {
        Self { terms: vec![Bump { strength: eta, radius }] }
    }

    pub fn plus(mut self, other: &PseudoPotential) -> Self {
        self.terms.extend(other.terms.iter().cloned());
        self
    }

    pub fn value(&self, r: f64) -> f64 {
        self.terms
            .iter()
            .filter(|t| r < t.radius)
            .map(|t| -t.strength * (1.0 - (r / t.radius).powi(2)).powi(3))
            .sum()
    }

    pub fn support_radius(&self) -> f64 {
        self.terms.iter().map(|t| t.radius).fold(0.0, f64::max)
    }

    /// `int_0^inf Vpp(r) J0(q r) r dr`, using `int_0^1 (1-t^2)^3 J0(a t) t dt = 48 J4(a)/a^4`.
    pub fn hankel(&self, q: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let a = q * t.radius;
                let f = if a < 1e-3 {
                    1.0 / 8.0 - a * a / 80.0
                } else {
                    48.0 * bessel_jn(4, a) / a.powi(4)
                };
                -t.strength * t.radius * t.radius * f
            })
            .sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.terms.iter().any(|t| !(t.radius > 0.0) || !t.strength.is_finite()) {
            return Err(Error::InvalidArgument("bump radius must be positive".into()));
        }
        Ok(())
    }
}

/// Iteration controls of the atomic fixed point.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct AtomScfOptions {
    pub mixing: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for AtomScfOptions {
    fn default() -> Self {
        Self { mixing: 0.5, tol: 1e-9, max_iter: 1000 }
    }
}

/// Converged atom.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AtomSolution {
    pub grid: RadialGrid,
    pub pp: PseudoPotential,
    /// `-mu` is the lowest eigenvalue of the mean-field operator.
    pub mu: f64,
    /// Second eigenvalue of the mean-field operator in the box.
    pub lambda2: f64,
    /// `min(lambda2, 0) + mu`.
    pub gap: f64,
    pub v: Vec<f64>,
    /// Hartree part `|v|^2 * 1/|x|` of the mean field.
    pub hartree: Vec<f64>,
    /// Energy `I(1)` of the converged orbital.
    pub energy: f64,
    pub iterations: usize,
    pub residual: f64,
    pub energy_trace: Vec<f64>,
}

impl AtomSolution {
    /// Mean field `-1/r + Vpp + V_H` at node `i` (infinite at the origin).
    pub fn vmf(&self, i: usize) -> f64 {
        let r = self.grid.r[i];
        -1.0 / r + self.pp.value(r) + self.hartree[i]
    }

    /// `m1 = int |x|^2 |v|^2`.
    pub fn second_moment(&self) -> f64 {
        let r2: Vec<f64> = self.grid.r.iter().zip(&self.v).map(|(r, v)| r * r * v * v).collect();
        self.grid.integrate(&r2)
    }

    pub fn orbital(&self) -> RadialInterp {
        RadialInterp::new(&self.grid.r, &self.v)
    }

    /// Interpolant of `V_H - 1/r + Vpp` beyond the origin.
    pub fn hartree_interp(&self) -> RadialInterp {
        RadialInterp::new(&self.grid.r, &self.hartree)
    }

    /// Mean field at arbitrary `r > 0`; past the box the far-field expansion is used.
    pub fn vmf_at(&self, r: f64) -> f64 {
        if r >= self.grid.r_max {
            return self.second_moment() / (4.0 * r.powi(3));
        }
        -1.0 / r + self.pp.value(r) + self.hartree_interp().eval(r)
    }
}

/// Atom setup on a fixed grid; the Hartree matrix is shared between pseudo-potentials.
#[derive(Clone, Debug)]
pub struct AtomProblem {
    pub grid: RadialGrid,
    pub pp: PseudoPotential,
    coulomb: Arc<RadialCoulomb>,
    ext_cells: Vec<f64>,
}

impl AtomProblem {
    pub fn new(grid: RadialGrid, pp: PseudoPotential) -> Result<Self> {
        let c = Arc::new(RadialCoulomb::new(&grid));
        Self::with_coulomb(grid, pp, c)
    }

    pub fn with_coulomb(grid: RadialGrid, pp: PseudoPotential, coulomb: Arc<RadialCoulomb>) -> Result<Self> {
        pp.validate()?;
        let c = grid.coulomb_cells(1.0);
        let p = grid.cell_integral(|r| pp.value(r));
        let ext_cells = c.iter().zip(&p).map(|(a, b)| a + b).collect();
        Ok(Self { grid, pp, coulomb, ext_cells })
    }

    pub fn coulomb(&self) -> Arc<RadialCoulomb> {
        self.coulomb.clone()
    }

    /// Another pseudo-potential on the same grid.
    pub fn with_pp(&self, pp: PseudoPotential) -> Result<Self> {
        Self::with_coulomb(self.grid.clone(), pp, self.coulomb.clone())
    }

    /// Energy `int |u'|^2 + (-1/r + Vpp)|u|^2 + (1/2) int |u|^2 (|u|^2 * 1/|x|)` of `u / ||u||`.
    pub fn energy(&self, u: &[f64]) -> Result<f64> {
        let nrm2 = self.grid.inner(u, u);
        if !(nrm2 > 0.0) {
            return Err(Error::InvalidArgument("zero trial function".into()));
        }
        let u: Vec<f64> = u.iter().map(|x| x / nrm2.sqrt()).collect();
        let rho: Vec<f64> = u.iter().map(|x| x * x).collect();
        let vh = self.coulomb.apply(&rho)?;
        Ok(self.energy_parts(&u, &rho, &vh))
    }

    fn energy_parts(&self, u: &[f64], rho: &[f64], vh: &[f64]) -> f64 {
        let ext: f64 = 2.0 * PI * self.ext_cells.iter().zip(rho).map(|(c, p)| c * p).sum::<f64>();
        self.grid.kinetic(u) + ext + 0.5 * self.grid.inner(rho, vh)
    }

    fn mean_field(&self, vh: &[f64]) -> Vec<f64> {
        self.ext_cells.iter().zip(self.grid.lumped(vh)).map(|(a, b)| a + b).collect()
    }

    /// Fixed-point iteration with linear density mixing; returns the last state
    /// and whether the residual dropped below the tolerance.
    pub fn iterate(&self, opts: &AtomScfOptions) -> Result<(AtomSolution, RadialGround, bool)> {
        if !(opts.mixing > 0.0 && opts.mixing <= 1.0) {
            return Err(Error::InvalidArgument(format!("mixing {} outside (0, 1]", opts.mixing)));
        }
        let g = &self.grid;
        let mut rho: Vec<f64> = g.r.iter().map(|r| 2.0 / PI * (-2.0 * r).exp()).collect();
        let mut alpha = opts.mixing;
        let mut trace = Vec::new();
        let mut last_res = f64::INFINITY;
        let mut rises = 0;
        let mut vh = self.coulomb.apply(&rho)?;
        for it in 1..=opts.max_iter {
            let ground = lowest_radial_eigenpair(g, &self.mean_field(&vh))?;
            let u = &ground.pair().u;
            let rho_new: Vec<f64> = u.iter().map(|x| x * x).collect();
            let diff: Vec<f64> = rho_new.iter().zip(&rho).map(|(a, b)| a - b).collect();
            let res = g.inner(&diff, &diff).sqrt();
            let vh_new = self.coulomb.apply(&rho_new)?;
            trace.push(self.energy_parts(u, &rho_new, &vh_new));
            if res < opts.tol || it == opts.max_iter {
                let p = ground.pair();
                let sol = AtomSolution {
                    grid: g.clone(),
                    pp: self.pp.clone(),
                    mu: -p.lambda,
                    lambda2: p.second,
                    gap: p.second.min(0.0) - p.lambda,
                    v: p.u.clone(),
                    hartree: vh_new,
                    energy: *trace.last().unwrap(),
                    iterations: it,
                    residual: res,
                    energy_trace: trace,
                };
                return Ok((sol, ground, res < opts.tol));
            }
            // Halve the step when the residual keeps growing.
            if res > last_res {
                rises += 1;
                if rises >= 3 {
                    alpha *= 0.5;
                    rises = 0;
                }
            } else {
                rises = 0;
            }
            last_res = res;
            for i in 0..rho.len() {
                rho[i] = (1.0 - alpha) * rho[i] + alpha * rho_new[i];
            }
            vh = self.coulomb.apply(&rho)?;
        }
        unreachable!("max_iter is at least one iteration")
    }

    pub fn solve(&self, opts: &AtomScfOptions) -> Result<AtomSolution> {
        let (sol, ground, converged) = self.iterate(opts)?;
        if !ground.is_bound() {
            return Err(Error::NoBoundState);
        }
        if !converged {
            return Err(Error::NoConvergence { iterations: sol.iterations, residual: sol.residual });
        }
        Ok(sol)
    }
}

/// Self-consistent atom for `Vpp` on `grid`.
pub fn scf_atom(pp: &PseudoPotential, grid: &RadialGrid, mixing: f64, tol: f64) -> Result<AtomSolution> {
    let opts = AtomScfOptions { mixing, tol, ..Default::default() };
    AtomProblem::new(grid.clone(), pp.clone())?.solve(&opts)
}

/// Two-sided envelope check of `v (1 + sqrt r) e^{sqrt(mu) r}` and the tail slope.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DecayReport {
    pub window: (f64, f64),
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub passes: bool,
    /// Slope of `-log(v (1 + sqrt r))` against `r` over the window.
    pub slope: f64,
    pub slope_stderr: f64,
    pub sqrt_mu: f64,
    pub slope_relative_error: f64,
}

pub const DECAY_ENVELOPE_LIMIT: f64 = 50.0;

pub fn decay_check(sol: &AtomSolution) -> DecayReport {
    let (a, b) = (2.0, 0.7 * sol.grid.r_max);
    let s = sol.mu.max(0.0).sqrt();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (r, v) in sol.grid.r.iter().zip(&sol.v) {
        if *r < a || *r > b {
            continue;
        }
        let w = v * (1.0 + r.sqrt());
        let q = w * (s * r).exp();
        lo = lo.min(q);
        hi = hi.max(q);
        if w > 0.0 {
            xs.push(*r);
            ys.push(-w.ln());
        }
    }
    let (slope, se) = if xs.len() >= 3 {
        let (_, b, se) = linear_fit(&xs, &ys);
        (b, se)
    } else {
        (f64::NAN, f64::NAN)
    };
    let passes = lo > 0.0 && hi / lo <= DECAY_ENVELOPE_LIMIT;
    DecayReport {
        window: (a, b),
        ratio_min: lo,
        ratio_max: hi,
        passes,
        slope,
        slope_stderr: se,
        sqrt_mu: s,
        slope_relative_error: ((slope - s) / s).abs(),
    }
}

/// Far-field behavior of the mean field against `m1/(4 r^3)`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct FarFieldReport {
    pub m1: f64,
    pub r: f64,
    /// `4 r^3 V^MF(r) / m1`.
    pub ratio: f64,
    pub passes: bool,
}

pub fn vmf_far_field(sol: &AtomSolution) -> FarFieldReport {
    let i = sol.grid.nearest(0.5 * sol.grid.r_max);
    let r = sol.grid.r[i];
    let m1 = sol.second_moment();
    let ratio = 4.0 * r.powi(3) * sol.vmf(i) / m1;
    FarFieldReport { m1, r, ratio, passes: (0.9..=1.1).contains(&ratio) }
}

/// Bisection result for the onset of binding in a one-parameter family.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct IonizationReport {
    pub threshold: f64,
    pub bracket: (f64, f64),
    pub evaluations: usize,
}

/// Whether the self-consistent mean field of `pp` has a negative eigenvalue.
pub fn binds(base: &AtomProblem, pp: PseudoPotential, opts: &AtomScfOptions) -> Result<bool> {
    let p = base.with_pp(pp)?;
    let (_, ground, _) = p.iterate(opts)?;
    Ok(ground.is_bound())
}

/// Bisection on `eta` in `[lo, hi]` (unbound at `lo`, bound at `hi`) down to width `width`.
pub fn ionization_check(
    base: &AtomProblem,
    family: impl Fn(f64) -> PseudoPotential,
    lo: f64,
    hi: f64,
    width: f64,
    opts: &AtomScfOptions,
) -> Result<IonizationReport> {
    let (mut lo, mut hi) = (lo, hi);
    let mut evals = 2;
    if binds(base, family(lo), opts)? || !binds(base, family(hi), opts)? {
        return Err(Error::InvalidArgument("bracket does not straddle the binding threshold".into()));
    }
    while hi - lo > width {
        let mid = 0.5 * (lo + hi);
        evals += 1;
        if binds(base, family(mid), opts)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(IonizationReport { threshold: 0.5 * (lo + hi), bracket: (lo, hi), evaluations: evals })
}

/// Well `-eta b_1` inside a fixed repulsive shell, a family with a binding threshold in `eta`.
pub fn barrier_family(eta: f64, barrier_height: f64, barrier_radius: f64) -> PseudoPotential {
    PseudoPotential::bump(eta, 1.0).plus(&PseudoPotential::bump(-barrier_height, barrier_radius))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grid(n: usize) -> RadialGrid {
        RadialGrid::graded(n, 40.0, 8.0).unwrap()
    }

    #[test]
    fn grid_is_graded_and_recovers_beta() {
        let g = grid(500);
        assert!(g.r.windows(2).all(|w| w[1] > w[0]));
        assert_abs_diff_eq!(g.beta, 8.0, epsilon = 1e-9);
        let total: f64 = g.area.iter().sum();
        assert_abs_diff_eq!(total, 800.0, epsilon = 1e-9);
        let i = g.nearest(20.0);
        assert!(g.r.iter().all(|r| (r - 20.0).abs() >= (g.r[i] - 20.0).abs()));
    }

    #[test]
    fn hydrogen_levels() {
        let g = grid(2000);
        let RadialGround::Bound(p) = lowest_radial_eigenpair(&g, &g.coulomb_cells(1.0)).unwrap() else {
            panic!("hydrogen must bind")
        };
        assert_abs_diff_eq!(p.lambda, -1.0, epsilon = 1e-5);
        assert_abs_diff_eq!(p.second, -1.0 / 9.0, epsilon = 1e-5);
        assert_abs_diff_eq!(g.inner(&p.u, &p.u), 1.0, epsilon = 1e-12);
        assert!(p.u[..g.len() - 1].iter().all(|x| *x > 0.0));
        // Exact ground state e^{-r} up to normalization.
        let i = g.nearest(1.0);
        assert_abs_diff_eq!(p.u[i] / p.u[0], (-g.r[i]).exp(), epsilon = 1e-4);
    }

    #[test]
    fn free_and_deep_well() {
        let g = grid(800);
        let free = lowest_radial_eigenpair(&g, &vec![0.0; g.len()]).unwrap();
        assert!(!free.is_bound());
        let well = g.cell_integral(|r| if r < 1.0 { -50.0 } else { 0.0 });
        let p = lowest_radial_eigenpair(&g, &well).unwrap();
        // Variational bound with the trial (1 - r^2)_+: energy 8/3 ... computed on the grid.
        let trial: Vec<f64> = g.r.iter().map(|r| (1.0 - r * r).max(0.0)).collect();
        let e = (g.kinetic(&trial) + 2.0 * PI * well.iter().zip(&trial).map(|(w, t)| w * t * t).sum::<f64>())
            / g.inner(&trial, &trial);
        assert!(e < -25.0);
        assert!(p.pair().lambda <= e + 1e-9);
    }

    #[test]
    fn ring_and_point_charges() {
        let g = grid(2000);
        let s: f64 = 0.01;
        let mut rho: Vec<f64> = g.r.iter().map(|r| (-(r - 1.0).powi(2) / (2.0 * s * s)).exp()).collect();
        let q = g.integrate(&rho);
        rho.iter_mut().for_each(|x| *x /= q);
        let v = radial_coulomb(&rho, &g).unwrap();
        assert_abs_diff_eq!(v[0], 1.0, epsilon = 1e-4);
        let mut pt: Vec<f64> = g.r.iter().map(|r| (-r * r / (2.0 * 0.05f64.powi(2))).exp()).collect();
        let q = g.integrate(&pt);
        pt.iter_mut().for_each(|x| *x /= q);
        let v = radial_coulomb(&pt, &g).unwrap();
        let i = g.nearest(10.0);
        assert_abs_diff_eq!(v[i] * g.r[i], 1.0, epsilon = 1e-5);
        rho[3] = -1.0;
        assert!(matches!(radial_coulomb(&rho, &g), Err(Error::NegativeDensity)));
    }

    #[test]
    fn hartree_matches_planar_quadrature() {
        let g = grid(3000);
        // Unit total charge: int 2 pi r (1 + r^2) e^{-r} dr = 14 pi.
        let f = |r: f64| (1.0 + r * r) * (-r).exp() / (14.0 * PI);
        let rho: Vec<f64> = g.r.iter().map(|r| f(*r)).collect();
        let v = radial_coulomb(&rho, &g).unwrap();
        let (gx, gw) = gauss_legendre(64);
        for x in [0.0, 0.7, 2.5, 6.0] {
            // Polar coordinates about x absorb the 1/|x - y| singularity.
            let mut q = 0.0;
            let smax = 40.0;
            for (xi, wi) in gx.iter().zip(&gw) {
                let t = PI * (0.5 * (1.0 + xi));
                // Split the radial integral to follow the density peak.
                for (a, b) in [(0.0, 2.0 * x + 2.0), (2.0 * x + 2.0, smax)] {
                    for (xj, wj) in gx.iter().zip(&gw) {
                        let sr = 0.5 * (a + b) + 0.5 * (b - a) * xj;
                        let d = (x * x + sr * sr + 2.0 * x * sr * t.cos()).sqrt();
                        q += wi * wj * 0.5 * PI * 0.5 * (b - a) * f(d);
                    }
                }
            }
            let interp = RadialInterp::new(&g.r, &v);
            assert_abs_diff_eq!(interp.eval(x), 2.0 * q, epsilon = 1e-5);
        }
    }

    #[test]
    fn bump_hankel_transform() {
        let pp = PseudoPotential::bump(3.0, 1.5);
        for q in [0.0, 0.5, 2.0, 7.0] {
            let (x, w) = crate::quad::gauss_legendre_on(200, 0.0, 1.5);
            let direct: f64 = x.iter().zip(&w).map(|(r, w)| w * pp.value(*r) * crate::special::bessel_j0(q * r) * r).sum();
            assert_abs_diff_eq!(pp.hankel(q), direct, epsilon = 1e-12);
        }
    }

    #[test]
    fn deep_atom_converges() {
        let g = RadialGrid::graded(1500, 40.0, 8.0).unwrap();
        let sol = scf_atom(&PseudoPotential::bump(9.0, 1.0), &g, 0.5, 1e-9).unwrap();
        assert!(sol.mu > 2.0 && sol.mu < 3.0, "mu = {}", sol.mu);
        assert!(sol.energy < 0.0);
        assert!(sol.gap > 0.0);
        assert!(sol.hartree.iter().all(|x| *x > 0.0));
        assert_abs_diff_eq!(sol.grid.inner(&sol.v, &sol.v), 1.0, epsilon = 1e-8);
        let p = AtomProblem::new(g.clone(), sol.pp.clone()).unwrap();
        for s in [0.3, 0.6, 1.2] {
            let trial: Vec<f64> = g.r.iter().map(|r| (-r * r / (2.0 * s * s)).exp()).collect();
            assert!(sol.energy <= p.energy(&trial).unwrap());
        }
    }
}
