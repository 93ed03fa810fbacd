//! Periodic reduced Hartree-Fock self-consistent field on a motif lattice
//! scaled by `L`, with Gaussian smearing and plane-wave fibers.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::atom::{AtomProblem, AtomScfOptions, PseudoPotential, RadialGrid, RadialInterp};
use crate::coulomb::PeriodicKernel;
use crate::error::{Error, Result};
use crate::fourier::{Fft2, FourierField, C64};
use crate::lattice::{k_path, kgrid, reduce_kgrid, special_point, BravaisLattice, KPath, LatticeSpec, MotifLattice, SymOp, Vec2};
use crate::linalg::CMatrix;
use crate::planewave::{
    band_structure, build_basis, cell_integral, density_from_states, grid_for_bases, solve_fiber, FiberSpectrum,
    LobpcgOptions, PWBasis, PreparedPotential, SolverKind,
};
use crate::special::erfc;

/// Starting density of the field iteration.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum InitialGuess {
    /// Superposition of self-consistent atomic densities.
    #[default]
    Atomic,
    Uniform,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ScfConfig {
    pub lattice: LatticeSpec,
    /// Lattice scale `L`.
    pub l: f64,
    /// Plane waves with `|G + k|^2 <= 2 ecut`.
    pub ecut: f64,
    /// Γ-centered `kgrid x kgrid` sampling.
    pub kgrid: usize,
    pub smearing: f64,
    /// Number of spin states `q`.
    pub spin: f64,
    /// Electrons per cell `N`; each spin state holds `N/q`.
    pub electrons: f64,
    pub mixing: f64,
    /// Anderson history depth; 0 is plain linear mixing.
    pub anderson: usize,
    /// Tolerance on the coefficient L2 density change relative to `N/q`.
    pub tol: f64,
    pub max_iter: usize,
    pub pseudo_potential: PseudoPotential,
    /// Multiplies the whole mean field; 0 gives the free Laplacian.
    pub potential_scale: f64,
    /// Constant added to the external potential.
    pub potential_shift: f64,
    pub n_bands: Option<usize>,
    pub symmetrize: bool,
    pub initial: InitialGuess,
    pub solver: SolverKind,
}

impl Default for ScfConfig {
    fn default() -> Self {
        Self {
            lattice: LatticeSpec::preset("honeycomb"),
            l: 2.0,
            ecut: 200.0,
            kgrid: 12,
            smearing: 1e-2,
            spin: 2.0,
            electrons: 2.0,
            mixing: 0.5,
            anderson: 0,
            tol: 1e-8,
            max_iter: 100,
            pseudo_potential: PseudoPotential::zero(),
            potential_scale: 1.0,
            potential_shift: 0.0,
            n_bands: None,
            symmetrize: true,
            initial: InitialGuess::Atomic,
            solver: SolverKind::Auto,
        }
    }
}

impl ScfConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.l > 0.0) {
            return bad("l must be positive");
        }
        if !(self.ecut > 0.0) {
            return bad("ecut must be positive");
        }
        if self.kgrid < 3 {
            return bad("kgrid must be at least 3");
        }
        if !(self.smearing > 0.0) {
            return bad("smearing must be positive");
        }
        if !(self.tol > 0.0) {
            return bad("tol must be positive");
        }
        if !(self.spin > 0.0) || !(self.electrons > 0.0) {
            return bad("spin and electrons must be positive");
        }
        if !self.potential_scale.is_finite() || !self.potential_shift.is_finite() {
            return bad("potential_scale and potential_shift must be finite");
        }
        if !(self.mixing > 0.0 && self.mixing <= 1.0) {
            return bad("mixing must lie in (0, 1]");
        }
        self.pseudo_potential.validate().map_err(|e| Error::Config(e.to_string()))
    }

    /// Occupied states per spin and k-point, `N/q`.
    pub fn filling(&self) -> f64 {
        self.electrons / self.spin
    }

    pub fn bands(&self) -> usize {
        self.n_bands.unwrap_or_else(|| (self.filling().ceil() as usize + 3).max(4))
    }
}

/// Gaussian-smeared occupation `erfc((lambda - eps)/sigma)/2`.
pub fn occupation(lambda: f64, eps: f64, sigma: f64) -> f64 {
    0.5 * erfc((lambda - eps) / sigma)
}

pub fn occupations(values: &[f64], eps: f64, sigma: f64) -> Vec<f64> {
    values.iter().map(|l| occupation(*l, eps, sigma)).collect()
}

fn count(bands: &[Vec<f64>], weights: &[f64], eps: f64, sigma: f64) -> f64 {
    bands
        .iter()
        .zip(weights)
        .map(|(b, w)| w * b.iter().map(|l| occupation(*l, eps, sigma)).sum::<f64>())
        .sum()
}

/// Fermi level fixing `sum_k w_k sum_n f_nk = target` by bisection.
pub fn fermi_level(bands: &[Vec<f64>], weights: &[f64], target: f64, sigma: f64) -> Result<f64> {
    if bands.is_empty() || bands.len() != weights.len() {
        return Err(Error::Mismatch("one band list per weight".into()));
    }
    let lo0 = bands.iter().flat_map(|b| b.iter()).fold(f64::INFINITY, |a, x| a.min(*x));
    let hi0 = bands.iter().flat_map(|b| b.iter()).fold(f64::NEG_INFINITY, |a, x| a.max(*x));
    let (mut lo, mut hi) = (lo0 - 20.0 * sigma, hi0 + 20.0 * sigma);
    let total: f64 = weights.iter().zip(bands).map(|(w, b)| w * b.len() as f64).sum();
    if !(target > 0.0 && target < total) {
        return Err(Error::FermiBracket);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let c = count(bands, weights, mid, sigma);
        if (c - target).abs() < 1e-12 {
            lo = mid;
            hi = mid;
            break;
        }
        if c < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let eps = 0.5 * (lo + hi);
    if (count(bands, weights, eps, sigma) - target).abs() >= 1e-10 {
        return Err(Error::FermiBracket);
    }
    let top = bands
        .iter()
        .map(|b| occupation(*b.last().unwrap(), eps, sigma))
        .fold(0.0, f64::max);
    if top >= 1e-8 {
        return Err(Error::InsufficientBands(top));
    }
    Ok(eps)
}

/// `S(v) = sum_r exp(-i v . L r)` over the motif sites.
pub fn structure_factor(m: &MotifLattice, l: f64, v: Vec2) -> C64 {
    m.shifts.iter().map(|r| C64::from_polar(1.0, -v.dot(&(r * l)))).sum()
}

/// Coefficients of `-sum_r W_L(. - L r) + sum_r sum_u Vpp(. - L(u + r))` on the grid `n`.
pub fn external_potential(
    m: &MotifLattice,
    l: f64,
    kern: &PeriodicKernel,
    pp: &PseudoPotential,
    n: [usize; 2],
) -> Result<FourierField> {
    let lat = m.bravais.scaled(l);
    if (kern.l - l).abs() > 1e-12 * l || (kern.lattice.cell_area - lat.cell_area).abs() > 1e-9 * lat.cell_area {
        return Err(Error::Mismatch("kernel and motif lattice differ".into()));
    }
    let mut v = FourierField::zeros(&lat, n);
    let s = lat.cell_area.sqrt();
    for i in 0..v.coeffs.len() {
        let idx = v.frequency(i);
        let g = lat.reciprocal_point(idx);
        let sf = structure_factor(m, l, g);
        let pp_hat = 2.0 * PI * pp.hankel(g.norm()) / s;
        v.coeffs[i] = sf * (pp_hat - kern.coefficient_index(idx));
    }
    Ok(v)
}

/// Group average `(1/|G|) sum_g rho(g^{-1} x)`, with `(rho o g^{-1})^(v) = e^{-i v.t} rho^(S^T v)`.
pub fn symmetrize(rho: &FourierField, group: &[SymOp], l: f64) -> FourierField {
    let lat = &rho.lattice;
    let mut out = FourierField::zeros(lat, rho.n);
    for i in 0..rho.coeffs.len() {
        let v = rho.vector(i);
        let mut acc = C64::new(0.0, 0.0);
        let mut cnt = 0.0_f64;
        for g in group {
            let sv = g.matrix().transpose() * v;
            if let Some(m) = lat.reciprocal_index(sv, 1e-6) {
                let t = g.shift() * l;
                acc += C64::from_polar(1.0, -v.dot(&t)) * rho.get(m);
                cnt += 1.0;
            }
        }
        out.coeffs[i] = acc / cnt.max(1.0);
    }
    // Hermitian part.
    let mut h = out.clone();
    for i in 0..out.coeffs.len() {
        let m = out.frequency(i);
        let mm = [-m[0], -m[1]];
        if out.holds(mm) {
            h.coeffs[i] = 0.5 * (out.coeffs[i] + out.get(mm).conj());
        }
    }
    h
}

/// Converged (or last) state of the field iteration.
#[derive(Clone, Debug)]
pub struct ScfState {
    pub config: ScfConfig,
    pub motif: MotifLattice,
    pub lattice: BravaisLattice,
    pub kernel: PeriodicKernel,
    /// Input density of the last step (per spin state).
    pub density: FourierField,
    /// Output density of the last step.
    pub density_out: FourierField,
    /// Mean field built from `density`.
    pub mean_field: FourierField,
    pub external: FourierField,
    pub fermi_level: f64,
    pub kpoints: Vec<Vec2>,
    pub weights: Vec<f64>,
    pub bases: Vec<PWBasis>,
    pub bands: Vec<Vec<f64>>,
    pub vectors: Vec<CMatrix>,
    pub residuals: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

/// Total energy per spin state by two routes.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct EnergyReport {
    pub kinetic: f64,
    pub external: f64,
    pub hartree: f64,
    pub total: f64,
    /// `sum f lambda - q D(rho_in, rho_out) + (q/2) D(rho_out, rho_out)`.
    pub band_route: f64,
    pub discrepancy: f64,
}

/// `D(f, g) = int_Γ conj(f) (g * W)` through kernel coefficients.
pub fn coulomb_pairing(kern: &PeriodicKernel, f: &FourierField, g: &FourierField) -> f64 {
    let s = f.lattice.cell_area.sqrt();
    let mut d = 0.0;
    for i in 0..f.coeffs.len() {
        let m = f.frequency(i);
        d += (f.coeffs[i].conj() * g.get(m)).re * kern.coefficient_index(m) * s;
    }
    d
}

fn real_pairing(f: &FourierField, g: &FourierField) -> f64 {
    f.coeffs.iter().zip(&g.coeffs).map(|(a, b)| (a.conj() * b).re).sum()
}

pub fn rhf_energy(state: &ScfState) -> Result<EnergyReport> {
    if !state.converged {
        return Err(Error::NoConvergence { iterations: state.iterations, residual: *state.residuals.last().unwrap_or(&f64::NAN) });
    }
    let c = &state.config;
    let q = c.spin;
    let mut kin = 0.0;
    let mut band = 0.0;
    for (((b, x), vals), w) in state.bases.iter().zip(&state.vectors).zip(&state.bands).zip(&state.weights) {
        let f = occupations(vals, state.fermi_level, c.smearing);
        for j in 0..f.len() {
            let t: f64 = (0..b.len()).map(|i| x[(i, j)].norm_sqr() * b.kinetic[i]).sum();
            kin += w * f[j] * t;
            band += w * f[j] * vals[j];
        }
    }
    let scale = c.potential_scale;
    let rho = &state.density_out;
    let ext = scale * real_pairing(&state.external, rho);
    let d_oo = scale * coulomb_pairing(&state.kernel, rho, rho);
    let d_io = scale * coulomb_pairing(&state.kernel, &state.density, rho);
    let total = kin + ext + 0.5 * q * d_oo;
    let band_route = band - q * d_io + 0.5 * q * d_oo;
    Ok(EnergyReport {
        kinetic: kin,
        external: ext,
        hartree: 0.5 * q * d_oo,
        total,
        band_route,
        discrepancy: (total - band_route).abs(),
    })
}

/// Atomic density superposition `sum_r sum_u |v|^2(x - L(u + r))`, normalized to `filling`.
fn atomic_guess(
    m: &MotifLattice,
    l: f64,
    lat: &BravaisLattice,
    n: [usize; 2],
    pp: &PseudoPotential,
    filling: f64,
) -> Result<FourierField> {
    let grid = RadialGrid::graded(1200, 40.0, 8.0)?;
    let atom = AtomProblem::new(grid, pp.clone())?.solve(&AtomScfOptions::default())?;
    let rho_r: Vec<f64> = atom.v.iter().map(|x| x * x).collect();
    let interp = RadialInterp::new(&atom.grid.r, &rho_r);
    let reach = atom.grid.r_max;
    let zero = FourierField::zeros(lat, n);
    let pts = zero.real_positions();
    let cells = lat.points_within(reach + lat.lattice_constant() * 2.0);
    let samples: Vec<C64> = pts
        .iter()
        .map(|x| {
            let mut s = 0.0;
            for r in &m.shifts {
                for u in &cells {
                    let d = (x - lat.point(*u) - r * l).norm();
                    if d < reach {
                        s += interp.eval(d).max(0.0);
                    }
                }
            }
            C64::new(s, 0.0)
        })
        .collect();
    let fft = Fft2::new(n);
    let mut rho = FourierField::from_real(lat, &fft, &samples);
    let q = cell_integral(&rho);
    rho.coeffs.iter_mut().for_each(|z| *z *= filling / q);
    Ok(rho)
}

fn uniform_density(lat: &BravaisLattice, n: [usize; 2], filling: f64) -> FourierField {
    let mut rho = FourierField::zeros(lat, n);
    rho.coeffs[0] = C64::new(filling / lat.cell_area.sqrt(), 0.0);
    rho
}

/// Anderson mixing on the residual `F = rho_out - rho_in` with history.
struct Mixer {
    alpha: f64,
    depth: usize,
    inputs: Vec<Vec<C64>>,
    residuals: Vec<Vec<C64>>,
}

impl Mixer {
    fn next(&mut self, rho_in: &[C64], rho_out: &[C64]) -> Vec<C64> {
        let f: Vec<C64> = rho_out.iter().zip(rho_in).map(|(a, b)| a - b).collect();
        if self.depth == 0 {
            return rho_in.iter().zip(&f).map(|(x, d)| x + d * self.alpha).collect();
        }
        self.inputs.push(rho_in.to_vec());
        self.residuals.push(f);
        if self.inputs.len() > self.depth + 1 {
            self.inputs.remove(0);
            self.residuals.remove(0);
        }
        let m = self.inputs.len();
        // Minimize |sum c_i F_i| with sum c_i = 1 through the bordered normal equations.
        let mut a = nalgebra::DMatrix::<f64>::zeros(m + 1, m + 1);
        for i in 0..m {
            for j in 0..m {
                a[(i, j)] = self.residuals[i].iter().zip(&self.residuals[j]).map(|(x, y)| (x.conj() * y).re).sum();
            }
            a[(i, m)] = 1.0;
            a[(m, i)] = 1.0;
        }
        let tr = (0..m).map(|i| a[(i, i)]).sum::<f64>() / m as f64;
        for i in 0..m {
            a[(i, i)] += 1e-10 * tr;
        }
        let mut b = nalgebra::DVector::<f64>::zeros(m + 1);
        b[m] = 1.0;
        let c = match a.lu().solve(&b) {
            Some(c) => c,
            None => {
                return rho_in.iter().zip(&self.residuals[m - 1]).map(|(x, d)| x + d * self.alpha).collect();
            }
        };
        let n = rho_in.len();
        let mut out = vec![C64::new(0.0, 0.0); n];
        for i in 0..m {
            for j in 0..n {
                out[j] += (self.inputs[i][j] + self.residuals[i][j] * self.alpha) * c[i];
            }
        }
        out
    }
}

/// Runs the field iteration; a state with `converged = false` is returned when the
/// iteration budget runs out.
pub fn scf_loop(config: &ScfConfig) -> Result<ScfState> {
    scf_loop_with(config, None)
}

/// Same as [`scf_loop`] with an optional starting density.
pub fn scf_loop_with(config: &ScfConfig, start: Option<&FourierField>) -> Result<ScfState> {
    config.validate()?;
    let motif = config.lattice.build()?;
    let l = config.l;
    let lat = motif.bravais.scaled(l);
    let kernel = PeriodicKernel::new(&motif.bravais, l);
    let (kpoints, weights) = if config.symmetrize {
        reduce_kgrid(&lat, config.kgrid, &motif.point_group())
            .ok_or_else(|| Error::Config("k-grid is not invariant under the point group".into()))?
    } else {
        let k = kgrid(&lat, config.kgrid);
        let w = vec![1.0 / k.len() as f64; k.len()];
        (k, w)
    };
    let nk = kpoints.len();
    let bases = kpoints.iter().map(|k| build_basis(&lat, *k, config.ecut)).collect::<Result<Vec<_>>>()?;
    let n = grid_for_bases(&bases);
    let nb = config.bands();
    if bases.iter().any(|b| b.len() < nb) {
        return Err(Error::Config(format!("ecut too small for {nb} bands")));
    }
    let mut external = external_potential(&motif, l, &kernel, &config.pseudo_potential, n)?;
    external.coeffs[0] += C64::new(config.potential_shift * lat.cell_area.sqrt(), 0.0);
    let filling = config.filling();
    let mut rho = match start {
        Some(s) => s.resized(n),
        None => match config.initial {
            InitialGuess::Atomic => atomic_guess(&motif, l, &lat, n, &config.pseudo_potential, filling)
                .unwrap_or_else(|_| uniform_density(&lat, n, filling)),
            InitialGuess::Uniform => uniform_density(&lat, n, filling),
        },
    };
    if config.symmetrize {
        rho = symmetrize(&rho, &motif.group, l);
    }
    let mut mixer = Mixer { alpha: config.mixing, depth: config.anderson, inputs: Vec::new(), residuals: Vec::new() };
    let mut vectors: Vec<Option<CMatrix>> = vec![None; nk];
    let mut residuals = Vec::new();
    let opts = LobpcgOptions { tol: 1e-8, ..Default::default() };
    let mut it = 0;
    loop {
        it += 1;
        let mean_field = mean_field(&external, &kernel, &rho, config);
        let pot = PreparedPotential::new(&mean_field);
        let solved: Vec<(Vec<f64>, CMatrix)> = {
            use rayon::prelude::*;
            bases
                .par_iter()
                .zip(vectors.par_iter())
                .map(|(b, x0)| solve_fiber(b, &pot, nb, config.solver, x0.as_ref(), &opts))
                .collect::<Result<Vec<_>>>()?
        };
        let bands: Vec<Vec<f64>> = solved.iter().map(|s| s.0.clone()).collect();
        let eps = fermi_level(&bands, &weights, filling, config.smearing)?;
        let occ: Vec<Vec<f64>> = bands.iter().map(|b| occupations(b, eps, config.smearing)).collect();
        let states: Vec<(&PWBasis, &CMatrix, &[f64])> =
            bases.iter().zip(&solved).zip(&occ).map(|((b, s), o)| (b, &s.1, o.as_slice())).collect();
        let mut rho_out = density_from_states(&lat, &states, &weights, n)?;
        if config.symmetrize {
            rho_out = symmetrize(&rho_out, &motif.group, l);
        }
        let diff: f64 = rho_out.coeffs.iter().zip(&rho.coeffs).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        let res = diff / filling;
        residuals.push(res);
        let free = config.potential_scale == 0.0;
        let done = res < config.tol || free;
        if done || it >= config.max_iter {
            let vecs: Vec<CMatrix> = solved.into_iter().map(|s| s.1).collect();
            return Ok(ScfState {
                config: config.clone(),
                motif,
                lattice: lat,
                kernel,
                density: if free { rho_out.clone() } else { rho },
                density_out: rho_out,
                mean_field,
                external,
                fermi_level: eps,
                kpoints,
                weights,
                bases,
                bands,
                vectors: vecs,
                residuals,
                converged: done,
                iterations: it,
            });
        }
        let next = mixer.next(&rho.coeffs, &rho_out.coeffs);
        rho.coeffs = next;
        for (slot, s) in vectors.iter_mut().zip(solved) {
            *slot = Some(s.1);
        }
    }
}

/// `scale (V_ext + q rho * W)`.
pub fn mean_field(external: &FourierField, kern: &PeriodicKernel, rho: &FourierField, config: &ScfConfig) -> FourierField {
    let mut h = kern.hartree(rho);
    for (a, e) in h.coeffs.iter_mut().zip(&external.coeffs) {
        *a = (*e + *a * config.spin) * config.potential_scale;
    }
    h
}

impl ScfState {
    /// Bands of the converged mean field on arbitrary k-points.
    pub fn bands_at(&self, ks: &[Vec2], n_bands: usize) -> Result<Vec<FiberSpectrum>> {
        band_structure(&self.mean_field, ks, self.config.ecut, n_bands, self.config.solver)
    }

    /// Mean field shifted by a constant `c`.
    pub fn shifted_mean_field(&self, c: f64) -> FourierField {
        let mut v = self.mean_field.clone();
        v.coeffs[0] += C64::new(c * self.lattice.cell_area.sqrt(), 0.0);
        v
    }

    pub fn last_residual(&self) -> f64 {
        *self.residuals.last().unwrap_or(&f64::NAN)
    }
}

/// Phase label of one scan point.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Metal,
    DiracSemiMetal,
    InsulatorLike,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PhaseReport {
    pub l: f64,
    pub phase: Option<Phase>,
    pub error: Option<String>,
    /// Cone energy: mean of bands 1 and 2 at K.
    pub cone_energy: f64,
    pub fermi_level: f64,
    /// `band2(K) - band1(K)`.
    pub vertex_gap: f64,
    /// Smallest `band2 - band1` along the path.
    pub min_direct_gap: f64,
    /// `min band2 - max band1` along the path; negative when the bands overlap.
    pub overlap: f64,
    pub scf_iterations: usize,
    pub scf_residual: f64,
}

/// Tolerances of the phase classification.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct PhaseOptions {
    pub samples_per_segment: usize,
    /// Fermi-level pinning tolerance in units of the smearing.
    pub pinning: f64,
    /// Largest vertex splitting counted as a touching; also the overlap noise floor.
    pub touch_tol: f64,
}

impl Default for PhaseOptions {
    fn default() -> Self {
        Self { samples_per_segment: 24, pinning: 3.0, touch_tol: 1e-6 }
    }
}

/// Classification from the recorded numbers.
pub fn classify(r: &PhaseReport, sigma: f64, opts: &PhaseOptions) -> Phase {
    let touching = r.vertex_gap.abs() <= opts.touch_tol;
    if r.overlap < -opts.touch_tol && r.fermi_level < r.cone_energy {
        Phase::Metal
    } else if touching && r.overlap >= -opts.touch_tol && (r.fermi_level - r.cone_energy).abs() <= opts.pinning * sigma {
        Phase::DiracSemiMetal
    } else {
        Phase::InsulatorLike
    }
}

/// Band analysis of a converged state along (Γ, K, M, Γ).
pub fn analyze_phase(state: &ScfState, opts: &PhaseOptions) -> Result<PhaseReport> {
    let lat = &state.lattice;
    let path = k_path(lat, &["Γ", "K", "M", "Γ"], opts.samples_per_segment)?;
    let kk = special_point(lat, "K")?;
    let sp = state.bands_at(&path.points, 3)?;
    let at_k = state.bands_at(&[kk], 3)?;
    let (b1k, b2k) = (at_k[0].values[0], at_k[0].values[1]);
    let mut max1 = f64::NEG_INFINITY;
    let mut min2 = f64::INFINITY;
    let mut gap = f64::INFINITY;
    for s in sp.iter().chain(&at_k) {
        gap = gap.min(s.values[1] - s.values[0]);
        max1 = max1.max(s.values[0]);
        min2 = min2.min(s.values[1]);
    }
    let mut r = PhaseReport {
        l: state.config.l,
        phase: None,
        error: None,
        cone_energy: 0.5 * (b1k + b2k),
        fermi_level: state.fermi_level,
        vertex_gap: b2k - b1k,
        min_direct_gap: gap,
        overlap: min2 - max1,
        scf_iterations: state.iterations,
        scf_residual: state.last_residual(),
    };
    r.phase = Some(classify(&r, state.config.smearing, opts));
    Ok(r)
}

/// SCF plus band analysis at each `L`; failures are recorded and the scan continues.
pub fn phase_scan(ls: &[f64], template: &ScfConfig, opts: &PhaseOptions) -> Vec<PhaseReport> {
    ls.iter()
        .map(|&l| {
            let cfg = ScfConfig { l, ..template.clone() };
            let run = scf_loop(&cfg).and_then(|s| {
                if !s.converged {
                    return Err(Error::NoConvergence { iterations: s.iterations, residual: s.last_residual() });
                }
                analyze_phase(&s, opts)
            });
            run.unwrap_or_else(|e| PhaseReport {
                l,
                phase: None,
                error: Some(e.to_string()),
                cone_energy: f64::NAN,
                fermi_level: f64::NAN,
                vertex_gap: f64::NAN,
                min_direct_gap: f64::NAN,
                overlap: f64::NAN,
                scf_iterations: 0,
                scf_residual: f64::NAN,
            })
        })
        .collect()
}

/// Consecutive scan points whose phases go from metal to Dirac semi-metal.
pub fn transition_bracket(reports: &[PhaseReport]) -> Option<(f64, f64)> {
    reports.windows(2).find_map(|w| match (w[0].phase, w[1].phase) {
        (Some(Phase::Metal), Some(Phase::DiracSemiMetal)) => Some((w[0].l, w[1].l)),
        _ => None,
    })
}

/// Bisection of a window whose ends are a metal (`lo`) and a Dirac semi-metal (`hi`).
///
/// Stops early when a midpoint fails or is classified otherwise; returns the final
/// window and the midpoint reports.
pub fn refine_transition(
    lo: f64,
    hi: f64,
    steps: usize,
    template: &ScfConfig,
    opts: &PhaseOptions,
) -> ((f64, f64), Vec<PhaseReport>) {
    let (mut lo, mut hi) = (lo, hi);
    let mut seen = Vec::new();
    for _ in 0..steps {
        let mid = 0.5 * (lo + hi);
        let r = phase_scan(&[mid], template, opts).remove(0);
        let phase = r.phase;
        seen.push(r);
        match phase {
            Some(Phase::Metal) => lo = mid,
            Some(Phase::DiracSemiMetal) => hi = mid,
            _ => break,
        }
    }
    ((lo, hi), seen)
}

/// Which pair of bands meets at K.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Placement {
    Bands12,
    Bands23,
    Triple,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct WeakContrast {
    /// `L` times the plain coefficient of the potential at `(v1 + v2)/L`.
    pub c11: f64,
    pub placement: Placement,
    pub k_values: [f64; 3],
}

/// Sign of the `(v1 + v2)` coefficient and the placement of the K-point touching for a potential.
pub fn weak_contrast(v: &FourierField, l: f64, ecut: f64, tol: f64) -> Result<WeakContrast> {
    let lat = &v.lattice;
    let c11 = l * v.get([1, 1]).re / lat.cell_area.sqrt();
    let kk = special_point(lat, "K")?;
    let s = band_structure(v, &[kk], ecut, 3, SolverKind::Dense)?;
    let e = &s[0].values;
    let (d12, d23) = (e[1] - e[0], e[2] - e[1]);
    let placement = if d12 <= tol && d23 <= tol {
        Placement::Triple
    } else if d12 < d23 {
        Placement::Bands12
    } else {
        Placement::Bands23
    };
    Ok(WeakContrast { c11, placement, k_values: [e[0], e[1], e[2]] })
}

/// Weak-contrast check on the converged mean field.
pub fn weak_contrast_check(state: &ScfState) -> Result<WeakContrast> {
    weak_contrast(&state.mean_field, state.config.l, state.config.ecut, 1e-9)
}

/// Bands of `path` for a converged state, as a CSV-ready table.
pub fn state_bands(state: &ScfState, path: &KPath, n_bands: usize) -> Result<Vec<FiberSpectrum>> {
    state.bands_at(&path.points, n_bands)
}
