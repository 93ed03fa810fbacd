//! Tight-binding reduction at large lattice scale: cutoff profiles, interaction
//! coefficients, Gram matrices of atomic orbitals and comparison of the
//! resulting model with plane-wave bands.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atom::{lowest_radial_eigenpair, AtomSolution, RadialGrid, RadialGround, RadialInterp};
use crate::coulomb::PeriodicKernel;
use crate::error::{Error, Result};
use crate::fourier::{Fft2, FourierField};
use crate::lattice::{edge_orbits, neighbor_shells, BravaisLattice, KPath, MotifLattice, SymOp, Vec2};
use crate::linalg::eigh_real;
use crate::planewave::FiberSpectrum;
use crate::quad::{gauss_legendre, linear_fit};
use crate::scf::{structure_factor, ScfState};
use crate::tightbinding::TBModel;

fn smoothstep5(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
}

/// Radial cutoff `chi = 1 - p^2`, with `p` a quintic ramp from 0 at `inner`
/// to 1 at `outer`. Then `sqrt(1 - chi) = p` is C^2.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CutoffProfile {
    pub delta: f64,
    pub d0: f64,
    /// `(1 + delta) d0 / 2`.
    pub inner: f64,
    /// `(1/2 + delta) d0`.
    pub outer: f64,
}

pub fn make_cutoff(delta: f64, d0: f64) -> Result<CutoffProfile> {
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::InvalidArgument(format!("cutoff delta {delta} outside (0, 1/2)")));
    }
    if !(d0 > 0.0 && d0.is_finite()) {
        return Err(Error::InvalidArgument("nearest-neighbor distance must be positive".into()));
    }
    Ok(CutoffProfile { delta, d0, inner: 0.5 * (1.0 + delta) * d0, outer: (0.5 + delta) * d0 })
}

impl CutoffProfile {
    /// `sqrt(1 - chi(s))`.
    pub fn root(&self, s: f64) -> f64 {
        smoothstep5((s - self.inner) / (self.outer - self.inner))
    }

    pub fn value(&self, s: f64) -> f64 {
        let p = self.root(s);
        1.0 - p * p
    }

    /// `chi_L(x) = chi(|x| / L)` at distance `dist`.
    pub fn scaled(&self, dist: f64, l: f64) -> f64 {
        self.value(dist / l)
    }
}

/// Radial orbital centered at a vertex, zero past its reach.
#[derive(Clone, Debug)]
pub struct SiteOrbital {
    r: Vec<f64>,
    interp: RadialInterp,
    reach: f64,
}

impl SiteOrbital {
    pub fn from_samples(r: &[f64], v: &[f64]) -> Result<Self> {
        if r.len() != v.len() || r.len() < 4 {
            return Err(Error::Mismatch("orbital nodes and samples differ".into()));
        }
        Ok(Self { r: r.to_vec(), interp: RadialInterp::new(r, v), reach: *r.last().unwrap() })
    }

    pub fn from_atom(atom: &AtomSolution) -> Result<Self> {
        Self::from_samples(&atom.grid.r, &atom.v)
    }

    pub fn eval(&self, r: f64) -> f64 {
        if r >= self.reach {
            0.0
        } else {
            self.interp.eval(r)
        }
    }

    pub fn reach(&self) -> f64 {
        self.reach
    }

    /// `int |v|^2` over the plane, exact for the piecewise-cubic interpolant.
    pub fn norm_sqr(&self) -> f64 {
        let (x, w) = gauss_legendre(5);
        let mut s = 0.0;
        for p in self.r.windows(2) {
            let (m, h) = (0.5 * (p[0] + p[1]), 0.5 * (p[1] - p[0]));
            for (t, wt) in x.iter().zip(&w) {
                let r = m + h * t;
                s += wt * h * r * self.interp.eval(r).powi(2);
            }
        }
        2.0 * PI * s
    }
}

/// Lattice potential with `-c/|x - y|` singularities at the nuclei `y`.
pub trait LatticeField: Sync {
    fn charge(&self) -> f64;
    fn value(&self, x: Vec2) -> f64;
    /// `V(x) + c/|x - y|` for the nucleus `y`, valid for `x` within half a lattice constant of `y`.
    fn regular(&self, x: Vec2, nucleus: Vec2) -> f64;
}

/// Isolated-atom mean field `-1/r + Vpp + V_H` with its far-field tail `m1/(4 r^3)`.
#[derive(Clone, Debug)]
pub struct RadialMeanField {
    regular: RadialInterp,
    pp: crate::atom::PseudoPotential,
    r_max: f64,
    m1: f64,
}

impl RadialMeanField {
    pub fn new(atom: &AtomSolution) -> Self {
        Self { regular: atom.hartree_interp(), pp: atom.pp.clone(), r_max: atom.grid.r_max, m1: atom.second_moment() }
    }

    /// `V^MF(r) + 1/r`.
    pub fn regular(&self, r: f64) -> f64 {
        if r >= self.r_max {
            1.0 / r + self.tail(r)
        } else {
            self.regular.eval(r) + self.pp.value(r)
        }
    }

    pub fn value(&self, r: f64) -> f64 {
        if r >= self.r_max {
            self.tail(r)
        } else {
            self.regular(r) - 1.0 / r
        }
    }

    fn tail(&self, r: f64) -> f64 {
        self.m1 / (4.0 * r.powi(3))
    }

    pub fn second_moment(&self) -> f64 {
        self.m1
    }
}

/// Superposition `sum_s V^MF(x - L s)` over the vertices within `radius` of a center,
/// with the mean of the omitted far-field tails added as a constant.
#[derive(Clone, Debug)]
pub struct SuperpositionField {
    pub atom: RadialMeanField,
    pub nuclei: Vec<Vec2>,
    pub tail: f64,
}

impl SuperpositionField {
    pub fn new(atom: &AtomSolution, motif: &MotifLattice, l: f64, center: Vec2, radius: f64) -> Self {
        let atom = RadialMeanField::new(atom);
        let lat = motif.bravais.scaled(l);
        let nuclei: Vec<Vec2> = vertices_within(motif, l, center, radius);
        let density = motif.n_sites() as f64 / lat.cell_area;
        let tail = density * PI * atom.second_moment() / (2.0 * radius);
        Self { atom, nuclei, tail }
    }
}

/// Scaled vertices `L(u + r)` within `radius` of `center`.
pub fn vertices_within(motif: &MotifLattice, l: f64, center: Vec2, radius: f64) -> Vec<Vec2> {
    let lat = motif.bravais.scaled(l);
    let reach = radius + center.norm() + 2.0 * lat.lattice_constant();
    let mut out = Vec::new();
    for n in lat.points_within(reach) {
        for s in &motif.shifts {
            let y = lat.point(n) + s * l;
            if (y - center).norm() <= radius {
                out.push(y);
            }
        }
    }
    out
}

impl LatticeField for SuperpositionField {
    fn charge(&self) -> f64 {
        1.0
    }

    fn value(&self, x: Vec2) -> f64 {
        self.tail + self.nuclei.iter().map(|y| self.atom.value((x - y).norm())).sum::<f64>()
    }

    fn regular(&self, x: Vec2, nucleus: Vec2) -> f64 {
        let mut s = self.tail;
        for y in &self.nuclei {
            let d = (x - y).norm();
            if (y - nucleus).norm() < 1e-9 {
                s += self.atom.regular(d);
            } else {
                s += self.atom.value(d);
            }
        }
        s
    }
}

/// Periodic samples with cubic-convolution interpolation in lattice coordinates.
#[derive(Clone, Debug)]
pub struct PeriodicSampler {
    lattice: BravaisLattice,
    n: [usize; 2],
    data: Vec<f64>,
}

fn keys(t: f64) -> [f64; 4] {
    // Catmull-Rom weights for offsets -1, 0, 1, 2.
    let (t2, t3) = (t * t, t * t * t);
    [
        -0.5 * t3 + t2 - 0.5 * t,
        1.5 * t3 - 2.5 * t2 + 1.0,
        -1.5 * t3 + 2.0 * t2 + 0.5 * t,
        0.5 * t3 - 0.5 * t2,
    ]
}

impl PeriodicSampler {
    /// Real part of `field` sampled on a grid refined by `refine` per axis.
    pub fn new(field: &FourierField, refine: usize) -> Self {
        let n = [field.n[0] * refine, field.n[1] * refine];
        let f = field.resized(n);
        let fft = Fft2::new(n);
        let data = f.to_real(&fft).iter().map(|z| z.re).collect();
        Self { lattice: field.lattice.clone(), n, data }
    }

    pub fn eval(&self, x: Vec2) -> f64 {
        let f = self.lattice.fractional(x);
        let mut idx = [0i64; 2];
        let mut w = [[0.0; 4]; 2];
        for a in 0..2 {
            let y = f[a] * self.n[a] as f64;
            let i = y.floor();
            idx[a] = i as i64;
            w[a] = keys(y - i);
        }
        let mut s = 0.0;
        for (p, wp) in w[0].iter().enumerate() {
            let i = (idx[0] + p as i64 - 1).rem_euclid(self.n[0] as i64) as usize;
            for (q, wq) in w[1].iter().enumerate() {
                let j = (idx[1] + q as i64 - 1).rem_euclid(self.n[1] as i64) as usize;
                s += wp * wq * self.data[i * self.n[1] + j];
            }
        }
        s
    }
}

/// Converged periodic mean field: the nuclear part is evaluated exactly through the
/// kernel, the remainder is interpolated from its Fourier synthesis.
#[derive(Clone, Debug)]
pub struct PeriodicField {
    pub smooth: PeriodicSampler,
    pub kernel: PeriodicKernel,
    pub lattice: BravaisLattice,
    /// Nuclei of the home cell.
    pub nuclei: Vec<Vec2>,
    pub scale: f64,
}

impl PeriodicField {
    pub fn from_state(state: &ScfState) -> Self {
        let l = state.config.l;
        let scale = state.config.potential_scale;
        let mut smooth = state.mean_field.clone();
        for i in 0..smooth.coeffs.len() {
            let m = smooth.frequency(i);
            let g = smooth.vector(i);
            smooth.coeffs[i] += structure_factor(&state.motif, l, g) * (scale * state.kernel.coefficient_index(m));
        }
        Self {
            smooth: PeriodicSampler::new(&smooth, 2),
            kernel: state.kernel.clone(),
            lattice: state.lattice.clone(),
            nuclei: state.motif.shifts.iter().map(|s| s * l).collect(),
            scale,
        }
    }

    fn same_site(&self, a: Vec2, b: Vec2) -> bool {
        self.lattice.lattice_index(a - b, 1e-6).is_some()
    }
}

impl LatticeField for PeriodicField {
    fn charge(&self) -> f64 {
        self.scale
    }

    fn value(&self, x: Vec2) -> f64 {
        self.smooth.eval(x) - self.scale * self.nuclei.iter().map(|y| self.kernel.evaluate(x - y)).sum::<f64>()
    }

    fn regular(&self, x: Vec2, nucleus: Vec2) -> f64 {
        let mut w = 0.0;
        for y in &self.nuclei {
            if self.same_site(*y, nucleus) {
                w += self.kernel.evaluate_regular(x - nucleus);
            } else {
                w += self.kernel.evaluate(x - y);
            }
        }
        self.smooth.eval(x) - self.scale * w
    }
}

/// Quadrature resolution of the interaction coefficient.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ThetaQuadrature {
    /// Gauss panels on the plateau and on the ramp of the cutoff.
    pub panels: usize,
    pub angles: usize,
}

impl Default for ThetaQuadrature {
    fn default() -> Self {
        Self { panels: 12, angles: 96 }
    }
}

fn polar_nodes(inner: f64, outer: f64, panels: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(8);
    let mut out = Vec::new();
    // Geometric refinement toward the nucleus on the plateau.
    let mut edges = vec![0.0];
    for i in 0..panels {
        edges.push(inner * ((i + 1) as f64 / panels as f64).powi(2));
    }
    for i in 1..=panels {
        edges.push(inner + (outer - inner) * i as f64 / panels as f64);
    }
    for p in edges.windows(2) {
        let (m, h) = (0.5 * (p[0] + p[1]), 0.5 * (p[1] - p[0]));
        for (t, wt) in x.iter().zip(&w) {
            out.push((m + h * t, wt * h));
        }
    }
    out
}

fn theta_once(
    orb_r: &SiteOrbital,
    orb_rp: &SiteOrbital,
    field: &dyn LatticeField,
    cut: &CutoffProfile,
    l: f64,
    y: Vec2,
    yp: Vec2,
    q: &ThetaQuadrature,
) -> f64 {
    let nodes = polar_nodes(cut.inner * l, cut.outer * l, q.panels);
    let c = field.charge();
    let dphi = 2.0 * PI / q.angles as f64;
    nodes
        .par_iter()
        .map(|&(rho, w)| {
            let radial = orb_r.eval(rho) * cut.scaled(rho, l);
            if radial == 0.0 {
                return 0.0;
            }
            let mut s = 0.0;
            for j in 0..q.angles {
                let phi = j as f64 * dphi;
                let x = y + Vec2::new(phi.cos(), phi.sin()) * rho;
                let dp = (x - yp).norm();
                let far = 1.0 - cut.scaled(dp, l);
                if far == 0.0 {
                    continue;
                }
                // rho (-c/rho + regular) with the Jacobian folded in.
                let v = -c + rho * field.regular(x, y);
                s += v * far * orb_rp.eval(dp);
            }
            w * radial * s * dphi
        })
        .sum()
}

/// `<v_r, chi_r V (1 - chi_r') v_r'>` and a doubling error estimate.
pub fn interaction_coefficient(
    orb_r: &SiteOrbital,
    orb_rp: &SiteOrbital,
    field: &dyn LatticeField,
    cut: &CutoffProfile,
    l: f64,
    y: Vec2,
    yp: Vec2,
    q: &ThetaQuadrature,
) -> (f64, f64) {
    let fine = ThetaQuadrature { panels: 2 * q.panels, angles: 2 * q.angles };
    let a = theta_once(orb_r, orb_rp, field, cut, l, y, yp, q);
    let b = theta_once(orb_r, orb_rp, field, cut, l, y, yp, &fine);
    (b, (b - a).abs())
}

/// Interaction coefficients per edge orbit at one scale.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ThetaEstimate {
    pub l: f64,
    pub thetas: Vec<f64>,
    pub errors: Vec<f64>,
    /// Reference binding energy `mu`.
    pub mu: f64,
    /// `exp(-sqrt(mu) L)`.
    pub tunneling: f64,
}

fn orbit_endpoints(motif: &MotifLattice, l: f64) -> Result<Vec<(Vec2, Vec2)>> {
    let orbits = edge_orbits(motif)?;
    Ok(orbits.representatives.iter().map(|e| (motif.shifts[e.from] * l, motif.vertex(e.shift, e.to) * l)).collect())
}

/// Radius of the superposition used around a bond, in units of `L`.
pub const SUPERPOSITION_RADIUS: f64 = 12.0;

/// Interaction coefficients from the superposition of isolated atoms (fast mode).
pub fn theta_fast(atom: &AtomSolution, motif: &MotifLattice, l: f64, cut: &CutoffProfile, q: &ThetaQuadrature) -> Result<ThetaEstimate> {
    let orb = SiteOrbital::from_atom(atom)?;
    let mut thetas = Vec::new();
    let mut errors = Vec::new();
    for (y, yp) in orbit_endpoints(motif, l)? {
        let field = SuperpositionField::new(atom, motif, l, 0.5 * (y + yp), SUPERPOSITION_RADIUS * l);
        let (t, e) = interaction_coefficient(&orb, &orb, &field, cut, l, y, yp, q);
        thetas.push(t);
        errors.push(e);
    }
    Ok(ThetaEstimate { l, thetas, errors, mu: atom.mu, tunneling: (-atom.mu.sqrt() * l).exp() })
}

/// Effective mono-atomic ground state in `chi_{L,r} V_L`, with `V_L` averaged over angles.
#[derive(Clone, Debug)]
pub struct MonoAtomic {
    pub mu_l: f64,
    pub orbital: SiteOrbital,
    pub grid: RadialGrid,
}

pub fn effective_mono_atomic(
    field: &dyn LatticeField,
    nucleus: Vec2,
    cut: &CutoffProfile,
    l: f64,
    grid: &RadialGrid,
    angles: usize,
) -> Result<MonoAtomic> {
    let c = field.charge();
    let reach = cut.outer * l;
    let avg: Vec<f64> = grid
        .r
        .par_iter()
        .map(|&r| {
            if r >= reach {
                return 0.0;
            }
            let s: f64 = (0..angles)
                .map(|j| {
                    let phi = 2.0 * PI * (j as f64 + 0.5) / angles as f64;
                    field.regular(nucleus + Vec2::new(phi.cos(), phi.sin()) * r, nucleus)
                })
                .sum();
            s / angles as f64 * cut.scaled(r, l)
        })
        .collect();
    let singular = grid.cell_integral(|s| -c * cut.scaled(s, l) / s);
    let cells: Vec<f64> = grid.lumped(&avg).iter().zip(&singular).map(|(a, b)| a + b).collect();
    match lowest_radial_eigenpair(grid, &cells)? {
        RadialGround::Bound(p) => Ok(MonoAtomic {
            mu_l: -p.lambda,
            orbital: SiteOrbital::from_samples(&grid.r, &p.u)?,
            grid: grid.clone(),
        }),
        RadialGround::Unbound(_) => Err(Error::NoBoundState),
    }
}

/// Orbital used in the interaction coefficient.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum OrbitalSource {
    /// Ground state of the isolated atom.
    #[default]
    Atomic,
    /// Ground state of the cut-off lattice field around one vertex.
    MonoAtomic,
}

/// Reference for the on-site energy `-mu_L`.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum OnSite {
    /// Mean of the two plane-wave bands at K.
    #[default]
    Cone,
    MonoAtomic,
}

/// Tight-binding model extracted from a converged periodic state.
#[derive(Clone, Debug)]
pub struct FirstPrinciplesTB {
    pub model: TBModel,
    pub theta: ThetaEstimate,
    /// `None` when the cut-off field binds no state.
    pub mono: Option<MonoAtomic>,
    pub cone_energy: f64,
}

/// Defaults of the first-principles extraction.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ExtractionOptions {
    pub delta: f64,
    pub quadrature: ThetaQuadrature,
    pub radial_points: usize,
    pub radial_extent: f64,
    pub angles: usize,
    pub orbital: OrbitalSource,
    pub on_site: OnSite,
}

impl Default for ExtractionOptions {
    fn default() -> Self {
        Self {
            delta: 0.2,
            quadrature: ThetaQuadrature::default(),
            radial_points: 2000,
            radial_extent: 40.0,
            angles: 48,
            orbital: OrbitalSource::Atomic,
            on_site: OnSite::Cone,
        }
    }
}

/// `mu_L` and `theta_L` from the converged mean field of `state`.
pub fn tb_from_first_principles(atom: &AtomSolution, state: &ScfState, opts: &ExtractionOptions) -> Result<FirstPrinciplesTB> {
    if !state.converged {
        return Err(Error::NoConvergence { iterations: state.iterations, residual: state.last_residual() });
    }
    let motif = &state.motif;
    let l = state.config.l;
    let d0 = neighbor_shells(motif).d0;
    let cut = make_cutoff(opts.delta, d0)?;
    let field = PeriodicField::from_state(state);
    let grid = RadialGrid::graded(opts.radial_points, opts.radial_extent, 8.0)?;
    let mono = match effective_mono_atomic(&field, motif.shifts[0] * l, &cut, l, &grid, opts.angles) {
        Ok(m) => Some(m),
        Err(Error::NoBoundState) => None,
        Err(e) => return Err(e),
    };
    let orbital = match opts.orbital {
        OrbitalSource::Atomic => SiteOrbital::from_atom(atom)?,
        OrbitalSource::MonoAtomic => mono.as_ref().ok_or(Error::NoBoundState)?.orbital.clone(),
    };
    let kk = crate::lattice::special_point(&state.lattice, "K")?;
    let at_k = state.bands_at(&[kk], 2)?;
    let cone_energy = 0.5 * (at_k[0].values[0] + at_k[0].values[1]);
    let mu_l = match opts.on_site {
        OnSite::Cone => -cone_energy,
        OnSite::MonoAtomic => mono.as_ref().ok_or(Error::NoBoundState)?.mu_l,
    };
    let mut thetas = Vec::new();
    let mut errors = Vec::new();
    for (y, yp) in orbit_endpoints(motif, l)? {
        let (t, e) = interaction_coefficient(&orbital, &orbital, &field, &cut, l, y, yp, &opts.quadrature);
        thetas.push(t);
        errors.push(e);
    }
    let mut model = TBModel::new(motif.clone(), l, mu_l, thetas.clone())?;
    let tunneling = (-atom.mu.sqrt() * l).exp();
    model.tunneling = Some(tunneling);
    Ok(FirstPrinciplesTB { model, theta: ThetaEstimate { l, thetas, errors, mu: atom.mu, tunneling }, mono, cone_energy })
}

/// Regression of `log|theta_L|` on `L` against the rate `sqrt(mu) d0`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ThetaScaling {
    pub slope: f64,
    pub slope_error: f64,
    pub expected: f64,
    pub relative_error: f64,
    /// `C_eps` fitted on the smaller half of the scales.
    pub c_eps: f64,
    pub eps: f64,
    /// Whether every larger scale lies below `C_eps exp(-(1 - eps) sqrt(mu) d0 L)`.
    pub envelope_holds: bool,
}

pub fn theta_scaling(estimates: &[ThetaEstimate], orbit: usize, d0: f64, eps: f64) -> Result<ThetaScaling> {
    if estimates.len() < 2 {
        return Err(Error::InsufficientSamples("at least two scales are needed".into()));
    }
    let mu = estimates[0].mu;
    let ls: Vec<f64> = estimates.iter().map(|e| e.l).collect();
    let logs: Vec<f64> = estimates.iter().map(|e| e.thetas[orbit].abs().ln()).collect();
    let (_, slope, se) = linear_fit(&ls, &logs);
    let expected = -mu.sqrt() * d0;
    let rate = (1.0 - eps) * mu.sqrt() * d0;
    let mut order: Vec<usize> = (0..ls.len()).collect();
    order.sort_by(|a, b| ls[*a].partial_cmp(&ls[*b]).unwrap());
    let c_eps = order[..ls.len().div_ceil(2)]
        .iter()
        .map(|&i| estimates[i].thetas[orbit].abs() * (rate * ls[i]).exp())
        .fold(0.0, f64::max);
    let envelope_holds = estimates
        .iter()
        .all(|e| e.thetas[orbit].abs() <= c_eps * (-rate * e.l).exp() * (1.0 + 1e-12));
    Ok(ThetaScaling {
        slope,
        slope_error: se,
        expected,
        relative_error: ((slope - expected) / expected).abs(),
        c_eps,
        eps,
        envelope_holds,
    })
}

/// Overlap `<v, v(. - D e)>` in elliptic coordinates with foci at the two centers.
pub fn pair_overlap(orb: &SiteOrbital, d: f64) -> f64 {
    if d <= 0.0 {
        return orb.norm_sqr();
    }
    let reach = orb.reach();
    let mu_max = (2.0 * reach / d + 1.0).acosh();
    let (x, w) = gauss_legendre(8);
    let mu_panels = 160;
    let nu_panels = 24;
    let mut s = 0.0;
    for a in 0..mu_panels {
        let (m0, m1) = (mu_max * a as f64 / mu_panels as f64, mu_max * (a + 1) as f64 / mu_panels as f64);
        let (mm, hm) = (0.5 * (m0 + m1), 0.5 * (m1 - m0));
        for (tm, wm) in x.iter().zip(&w) {
            let ch = (mm + hm * tm).cosh();
            let mut inner = 0.0;
            for b in 0..nu_panels {
                let (n0, n1) = (PI * b as f64 / nu_panels as f64, PI * (b + 1) as f64 / nu_panels as f64);
                let (nm, hn) = (0.5 * (n0 + n1), 0.5 * (n1 - n0));
                for (tn, wn) in x.iter().zip(&w) {
                    let cn = (nm + hn * tn).cos();
                    let r1 = 0.5 * d * (ch + cn);
                    let r2 = 0.5 * d * (ch - cn);
                    inner += wn * hn * orb.eval(r1) * orb.eval(r2) * r1 * r2;
                }
            }
            s += wm * hm * inner;
        }
    }
    2.0 * s
}

/// Gram matrix of normalized atomic orbitals on the vertices of a ball.
#[derive(Clone, Debug)]
pub struct GramData {
    pub l: f64,
    pub d0: f64,
    /// Truncation radius in units of `L d0`, centered at the origin.
    pub radius: f64,
    pub vertices: Vec<Vec2>,
    pub q: DMatrix<f64>,
    pub q_inv_sqrt: DMatrix<f64>,
    /// Nearest-neighbor overlap.
    pub zeta: f64,
}

/// Default Gram truncation radius in units of `L d0`.
pub const GRAM_RADIUS: f64 = 4.0;

pub fn gram_matrix(orb: &SiteOrbital, motif: &MotifLattice, l: f64, radius: f64) -> Result<GramData> {
    if radius < 2.0 {
        return Err(Error::InvalidArgument("Gram truncation radius must be at least 2 d0".into()));
    }
    let d0 = neighbor_shells(motif).d0;
    let vertices: Vec<Vec2> = vertices_within(motif, 1.0, Vec2::zeros(), radius * d0 + 1e-9);
    let n = vertices.len();
    // Distinct distances, rounded to absorb floating noise.
    let mut keys: Vec<i64> = Vec::new();
    for i in 0..n {
        for j in 0..n {
            keys.push(((vertices[i] - vertices[j]).norm() * 1e9).round() as i64);
        }
    }
    keys.sort_unstable();
    keys.dedup();
    let values: Vec<f64> = keys.par_iter().map(|k| pair_overlap(orb, *k as f64 * 1e-9 * l)).collect();
    let g0 = values[0];
    let lookup = |d: f64| -> f64 {
        let k = (d * 1e9).round() as i64;
        values[keys.binary_search(&k).expect("distance tabulated")] / g0
    };
    let q = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { lookup((vertices[i] - vertices[j]).norm()) });
    let (w, u) = eigh_real(&q)?;
    if w[0] <= 0.0 {
        return Err(Error::NotPositiveDefinite);
    }
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(n, w.iter().map(|x| x.powf(-0.5))));
    let q_inv_sqrt = &u * d * u.transpose();
    let zeta = lookup(d0);
    Ok(GramData { l, d0, radius, vertices, q, q_inv_sqrt, zeta })
}

impl GramData {
    /// Nearest-neighbor adjacency of the truncated vertex set.
    pub fn adjacency(&self) -> DMatrix<f64> {
        let n = self.vertices.len();
        DMatrix::from_fn(n, n, |i, j| {
            let d = (self.vertices[i] - self.vertices[j]).norm();
            if (d - self.d0).abs() < 1e-9 {
                1.0
            } else {
                0.0
            }
        })
    }

    /// `||Q - I - zeta J||_2`.
    pub fn expansion_residual(&self) -> Result<f64> {
        let n = self.vertices.len();
        let r = &self.q - DMatrix::identity(n, n) - self.adjacency() * self.zeta;
        crate::linalg::sym_norm2(&r)
    }

    /// `max |Q^{-1/2}(r, r')| / (factor T^{(1-eps)|r - r'|})` over all pairs.
    pub fn localization_ratio(&self, tunneling: f64, eps: f64, factor: f64) -> f64 {
        let n = self.vertices.len();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let d = (self.vertices[i] - self.vertices[j]).norm();
                let bound = factor * tunneling.powf((1.0 - eps) * d);
                worst = worst.max(self.q_inv_sqrt[(i, j)].abs() / bound);
            }
        }
        worst
    }

    /// Vertex permutation induced by `g` when it maps the truncated set onto itself.
    pub fn permutation(&self, g: &SymOp) -> Option<Vec<usize>> {
        self.vertices
            .iter()
            .map(|x| {
                let y = g.apply(*x);
                self.vertices.iter().position(|z| (z - y).norm() < 1e-9)
            })
            .collect()
    }

    /// Largest `|Q^{-1/2}(g r, g r') - Q^{-1/2}(r, r')|` over the elements that preserve the ball.
    pub fn symmetry_defect(&self, group: &[SymOp]) -> (f64, usize) {
        let mut worst: f64 = 0.0;
        let mut used = 0;
        for g in group {
            if let Some(p) = self.permutation(g) {
                used += 1;
                let n = p.len();
                for i in 0..n {
                    for j in 0..n {
                        worst = worst.max((self.q_inv_sqrt[(p[i], p[j])] - self.q_inv_sqrt[(i, j)]).abs());
                    }
                }
            }
        }
        (worst, used)
    }
}

/// Sup-norm comparison of plane-wave and tight-binding bands along a path.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TheoremReport {
    pub l: f64,
    pub mu_l: f64,
    pub theta: f64,
    /// `sup_k |pw_j(k) - tb_j(k)|` for each compared band.
    pub sup_error: Vec<f64>,
    /// Sup error over all compared bands divided by `|theta|`.
    pub ratio: f64,
    /// Max over median of the per-k error.
    pub uniformity: f64,
}

pub fn theorem_check(tb: &TBModel, pw: &[FiberSpectrum], path: &KPath) -> Result<TheoremReport> {
    if pw.len() != path.points.len() {
        return Err(Error::Mismatch(format!("{} spectra for {} path points", pw.len(), path.points.len())));
    }
    let nb = tb.motif.n_sites();
    let mut sup = vec![0.0f64; nb];
    let mut per_k = Vec::with_capacity(pw.len());
    for (s, k) in pw.iter().zip(&path.points) {
        if (s.k - k).norm() > 1e-9 * (1.0 + k.norm()) {
            return Err(Error::Mismatch("plane-wave spectra are on a different path".into()));
        }
        if s.values.len() < nb {
            return Err(Error::Mismatch("too few plane-wave bands".into()));
        }
        let t = tb.eigenvalues(*k);
        let mut worst: f64 = 0.0;
        for j in 0..nb {
            let e = (s.values[j] - t[j]).abs();
            sup[j] = sup[j].max(e);
            worst = worst.max(e);
        }
        per_k.push(worst);
    }
    let theta = tb.thetas.iter().fold(0.0f64, |a, t| a.max(t.abs()));
    let mut sorted = per_k.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = sorted[sorted.len() / 2];
    let max = *sorted.last().unwrap();
    Ok(TheoremReport {
        l: tb.l,
        mu_l: tb.mu_l,
        theta,
        ratio: max / theta,
        uniformity: if median > 0.0 { max / median } else { f64::INFINITY },
        sup_error: sup,
    })
}

/// Whether the error ratios decrease strictly with `L`.
pub fn ratios_decrease(reports: &[TheoremReport]) -> bool {
    let mut r: Vec<&TheoremReport> = reports.iter().collect();
    r.sort_by(|a, b| a.l.partial_cmp(&b.l).unwrap());
    r.windows(2).all(|w| w[1].ratio < w[0].ratio)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atom::{AtomProblem, AtomScfOptions, PseudoPotential};
    use crate::lattice::honeycomb;
    use approx::assert_abs_diff_eq;
    use std::sync::OnceLock;

    fn atom() -> &'static AtomSolution {
        static A: OnceLock<AtomSolution> = OnceLock::new();
        A.get_or_init(|| {
            let g = RadialGrid::graded(1500, 40.0, 8.0).unwrap();
            AtomProblem::new(g, PseudoPotential::zero()).unwrap().solve(&AtomScfOptions::default()).unwrap()
        })
    }

    #[test]
    fn cutoff_radii_and_regularity() {
        let c = make_cutoff(0.2, 1.0 / 3f64.sqrt()).unwrap();
        assert_abs_diff_eq!(c.inner, 0.6 / 3f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(c.outer, 0.7 / 3f64.sqrt(), epsilon = 1e-15);
        assert_eq!(c.value(0.3), 1.0);
        assert_eq!(c.value(0.45), 0.0);
        // Difference quotients of sqrt(1 - chi) converge at the seams; chi is monotone.
        for s0 in [c.inner, c.outer] {
            let d: Vec<f64> = [1e-3, 1e-4, 1e-5].iter().map(|h| (c.root(s0 + h) - c.root(s0 - h)) / (2.0 * h)).collect();
            assert!(d[1].abs() < d[0].abs() / 50.0 && d[2].abs() < d[1].abs() / 50.0, "{d:?}");
        }
        let mut prev = 1.0;
        for i in 0..=400 {
            let v = c.value(i as f64 * 1e-3);
            assert!(v <= prev + 1e-15 && (0.0..=1.0).contains(&v));
            prev = v;
        }
        assert!(make_cutoff(0.5, 1.0).is_err());
    }

    #[test]
    fn overlap_matches_cartesian_sum() {
        let orb = SiteOrbital::from_atom(atom()).unwrap();
        for d in [0.0, 2.0, 4.5] {
            let ell = pair_overlap(&orb, d);
            let h = 0.05;
            let n = (30.0 / h) as i64;
            let mut s = 0.0;
            for i in -n..=n {
                for j in -n..=n {
                    let x = Vec2::new(i as f64 * h + 0.5 * d, j as f64 * h);
                    s += orb.eval(x.norm()) * orb.eval((x - Vec2::new(d, 0.0)).norm());
                }
            }
            s *= h * h;
            assert!((ell - s).abs() < 2e-4 * s.abs().max(0.05), "d {d}: {ell} vs {s}");
        }
        assert_abs_diff_eq!(orb.norm_sqr(), 1.0, epsilon = 1e-3);
    }

    #[test]
    fn gram_invariants() {
        let orb = SiteOrbital::from_atom(atom()).unwrap();
        let m = honeycomb();
        let g = gram_matrix(&orb, &m, 6.0, 2.5).unwrap();
        let n = g.vertices.len();
        for i in 0..n {
            assert_abs_diff_eq!(g.q[(i, i)], 1.0, epsilon = 1e-10);
        }
        let id = &g.q_inv_sqrt * &g.q * &g.q_inv_sqrt - DMatrix::identity(n, n);
        assert!(id.abs().max() < 1e-8);
        let (defect, used) = g.symmetry_defect(&m.group);
        assert!(used >= 4, "{used}");
        assert!(defect < 1e-8, "{defect}");
        assert!(g.zeta > 0.0 && g.zeta < 1.0);
        assert!(gram_matrix(&orb, &m, 6.0, 1.0).is_err());
    }

    #[test]
    fn theta_does_not_depend_on_the_bond() {
        let a = atom();
        let m = honeycomb();
        let l = 5.0;
        let cut = make_cutoff(0.2, neighbor_shells(&m).d0).unwrap();
        let orb = SiteOrbital::from_atom(a).unwrap();
        let q = ThetaQuadrature::default();
        let orbits = edge_orbits(&m).unwrap();
        assert_eq!(orbits.len(), 1);
        let mut vals = Vec::new();
        for e in orbits.members[0].iter().take(3) {
            let y = m.shifts[e.from] * l;
            let yp = m.vertex(e.shift, e.to) * l;
            let f = SuperpositionField::new(a, &m, l, 0.5 * (y + yp), SUPERPOSITION_RADIUS * l);
            vals.push(interaction_coefficient(&orb, &orb, &f, &cut, l, y, yp, &q));
        }
        for (t, e) in &vals {
            assert!(*t < 0.0);
            assert!((t - vals[0].0).abs() <= 2.0 * (e + vals[0].1) + 1e-10, "{vals:?}");
        }
    }

    #[test]
    fn tb_matrix_closed_form() {
        let model = TBModel::new(honeycomb(), 6.0, 0.2, vec![-0.03]).unwrap();
        let k = Vec2::new(0.13, -0.07);
        let h = model.matrix(k);
        assert!(crate::linalg::hermiticity_defect(&h) < 1e-15);
        let m = honeycomb();
        let f = crate::linalg::C64::new(1.0, 0.0)
            + crate::linalg::C64::from_polar(1.0, 6.0 * k.dot(&m.bravais.u1))
            + crate::linalg::C64::from_polar(1.0, 6.0 * k.dot(&m.bravais.u2));
        let e = model.eigenvalues(k);
        assert_abs_diff_eq!(e[0], -0.2 - 0.03 * f.norm(), epsilon = 1e-14);
        assert_abs_diff_eq!(e[1], -0.2 + 0.03 * f.norm(), epsilon = 1e-14);
    }

    #[test]
    fn sampler_reproduces_smooth_fields() {
        let lat = BravaisLattice::triangular().scaled(2.0);
        let mut f = FourierField::zeros(&lat, [16, 16]);
        let s = lat.cell_area.sqrt();
        f.set([1, 0], crate::fourier::C64::new(0.5 * s, 0.0));
        f.set([-1, 0], crate::fourier::C64::new(0.5 * s, 0.0));
        let p = PeriodicSampler::new(&f, 2);
        for x in [Vec2::new(0.3, 0.1), Vec2::new(-1.7, 0.9)] {
            assert_abs_diff_eq!(p.eval(x), lat.v1.dot(&x).cos(), epsilon = 1e-4);
        }
    }
}
