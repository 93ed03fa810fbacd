//! Batch commands behind the `rhf2d` binary. Each returns the files it would write.

use serde::Serialize;

use crate::atom::{decay_check, vmf_far_field, AtomProblem, AtomSolution, DecayReport, FarFieldReport, RadialGrid};
use crate::coulomb::{KernelReport, PeriodicKernel};
use crate::dissociation::{ratios_decrease, tb_from_first_principles, TheoremReport};
use crate::error::{Error, Result};
use crate::fourier::FourierField;
use crate::io::{Artifacts, BandSource, Cell, DiracSource, RunConfig, Stamp, Table};
use crate::lattice::{k_path, special_point, KPath, Vec2};
use crate::planewave::{band_structure, FiberSpectrum};
use crate::scf::{analyze_phase, phase_scan, rhf_energy, scf_loop, transition_bracket, EnergyReport, PhaseOptions, PhaseReport};
use crate::tightbinding::{dirac_report, tb_pair, DiracReport, TBModel};

/// Subcommands of the binary.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Atom,
    Kernel,
    Bands,
    Scf,
    Tb,
    Dirac,
    PhaseScan,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Atom => "atom",
            Command::Kernel => "kernel",
            Command::Bands => "bands",
            Command::Scf => "scf",
            Command::Tb => "tb",
            Command::Dirac => "dirac",
            Command::PhaseScan => "phase-scan",
        }
    }
}

/// Process exit code for an error: 2 for configuration problems, 3 for solver failures.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::UnknownLabel(_) => 2,
        _ => 3,
    }
}

pub fn run(cmd: Command, config: &RunConfig) -> Result<Artifacts> {
    let stamp = Stamp::new(cmd.name(), config);
    match cmd {
        Command::Atom => cmd_atom(config, &stamp),
        Command::Kernel => cmd_kernel(config, &stamp),
        Command::Bands => cmd_bands(config, &stamp),
        Command::Scf => cmd_scf(config, &stamp),
        Command::Tb => cmd_tb(config, &stamp),
        Command::Dirac => cmd_dirac(config, &stamp),
        Command::PhaseScan => cmd_phase_scan(config, &stamp),
    }
}

pub fn solve_atom(config: &RunConfig) -> Result<AtomSolution> {
    let a = &config.atom;
    let grid = RadialGrid::graded(a.points, a.r_max, a.beta)?;
    AtomProblem::new(grid, a.pseudo_potential.clone())?.solve(&a.options())
}

#[derive(Serialize)]
struct AtomSummary {
    mu: f64,
    lambda2: f64,
    gap: f64,
    energy: f64,
    second_moment: f64,
    decay: DecayReport,
    far_field: FarFieldReport,
}

fn cmd_atom(config: &RunConfig, stamp: &Stamp) -> Result<Artifacts> {
    let sol = solve_atom(config)?;
    let summary = AtomSummary {
        mu: sol.mu,
        lambda2: sol.lambda2,
        gap: sol.gap,
        energy: sol.energy,
        second_moment: sol.second_moment(),
        decay: decay_check(&sol),
        far_field: vmf_far_field(&sol),
    };
    let mut t = Table::new(&["r", "v", "vmf"]);
    for i in 0..sol.grid.len() {
        t.push(vec![sol.grid.r[i].into(), sol.v[i].into(), sol.vmf(i).into()]);
    }
    let mut out = Artifacts::default();
    out.json("atom.json", stamp, &summary)?;
    out.csv("atom.csv", stamp, &t);
    Ok(out)
}

/// Deterministic points spread over the unit cell (additive recurrence).
fn cell_points(lat: &crate::lattice::BravaisLattice, n: usize) -> Vec<Vec2> {
    let (a1, a2) = (0.754_877_666_246_692_7, 0.569_840_290_998_053_3);
    (1..=n)
        .map(|i| {
            let (s, t) = ((i as f64 * a1).fract(), (i as f64 * a2).fract());
            lat.reduce_wigner_seitz(lat.u1 * s + lat.u2 * t).0
        })
        .collect()
}

fn cmd_kernel(config: &RunConfig, stamp: &Stamp) -> Result<Artifacts> {
    let k = &config.kernel;
    let motif = k.lattice.build()?;
    let kern = PeriodicKernel::new(&motif.bravais, k.l);
    let pts = cell_points(&kern.lattice, k.points);
    let report: KernelReport = kern.self_test(&pts, k.fourier_cutoff, k.shells)?;
    let mut t = Table::new(&["x", "y", "w", "w_regular"]);
    for p in &pts {
        t.push(vec![p.x.into(), p.y.into(), kern.evaluate(*p).into(), kern.evaluate_regular(*p).into()]);
    }
    let mut out = Artifacts::default();
    out.json("kernel.json", stamp, &report)?;
    out.csv("kernel.csv", stamp, &t);
    Ok(out)
}

fn path_of(lat: &crate::lattice::BravaisLattice, labels: &[String], samples: usize) -> Result<KPath> {
    let labels: Vec<&str> = labels.iter().map(|s| s.as_str()).collect();
    k_path(lat, &labels, samples).map_err(|e| match e {
        Error::InvalidArgument(m) => Error::Config(m),
        other => other,
    })
}

fn band_table(path: &KPath, spectra: &[FiberSpectrum], n_bands: usize, extra: &[(String, Vec<f64>)]) -> Table {
    let mut header: Vec<String> = ["index", "segment", "arc", "kx", "ky"].iter().map(|s| s.to_string()).collect();
    header.extend((1..=n_bands).map(|j| format!("band{j}")));
    header.extend(extra.iter().map(|(n, _)| n.clone()));
    let mut t = Table { header, rows: Vec::new() };
    for (i, s) in spectra.iter().enumerate() {
        let mut row: Vec<Cell> = vec![i.into(), path.segment[i].into(), path.arc_length[i].into(), s.k.x.into(), s.k.y.into()];
        row.extend(s.values.iter().take(n_bands).map(|x| Cell::from(*x)));
        row.extend(extra.iter().map(|(_, v)| Cell::from(v[i])));
        t.push(row);
    }
    t
}

fn cmd_bands(config: &RunConfig, stamp: &Stamp) -> Result<Artifacts> {
    let b = &config.bands;
    let scf = &config.scf;
    let motif = scf.lattice.build()?;
    let lat = motif.bravais.scaled(scf.l);
    let path = path_of(&lat, &b.path, b.samples_per_segment)?;
    let spectra = match b.source {
        BandSource::Free => band_structure(&FourierField::zeros(&lat, [4, 4]), &path.points, scf.ecut, b.n_bands, scf.solver)?,
        BandSource::Scf => {
            let state = scf_loop(scf)?;
            if !state.converged {
                return Err(Error::NoConvergence { iterations: state.iterations, residual: state.last_residual() });
            }
            state.bands_at(&path.points, b.n_bands)?
        }
    };
    let mut extra = Vec::new();
    if b.wallace {
        let model = TBModel::new(motif.clone(), scf.l, b.wallace_mu, vec![b.wallace_theta])?;
        let e: Vec<Vec<f64>> = path.points.iter().map(|k| model.eigenvalues(*k)).collect();
        for j in 0..motif.n_sites() {
            extra.push((format!("tb{}", j + 1), e.iter().map(|v| v[j]).collect()));
        }
    }
    let mut out = Artifacts::default();
    out.csv("bands.csv", stamp, &band_table(&path, &spectra, b.n_bands, &extra));
    Ok(out)
}

#[derive(Serialize)]
struct ScfSummary {
    l: f64,
    converged: bool,
    iterations: usize,
    fermi_level: f64,
    energy: Option<EnergyReport>,
    phase: Option<PhaseReport>,
}

fn cmd_scf(config: &RunConfig, stamp: &Stamp) -> Result<Artifacts> {
    let state = scf_loop(&config.scf)?;
    if !state.converged {
        return Err(Error::NoConvergence { iterations: state.iterations, residual: state.last_residual() });
    }
    let energy = rhf_energy(&state)?;
    let phase = analyze_phase(&state, &config.phase_scan.options).ok();
    let summary = ScfSummary {
        l: config.scf.l,
        converged: state.converged,
        iterations: state.iterations,
        fermi_level: state.fermi_level,
        energy: Some(energy),
        phase,
    };
    let mut t = Table::new(&["iteration", "residual"]);
    for (i, r) in state.residuals.iter().enumerate() {
        t.push(vec![(i + 1).into(), (*r).into()]);
    }
    let mut out = Artifacts::default();
    out.json("scf.json", stamp, &summary)?;
    out.csv("scf.csv", stamp, &t);
    Ok(out)
}

#[derive(Serialize)]
struct TbEntry {
    l: f64,
    mu_l: f64,
    thetas: Vec<f64>,
    theta_errors: Vec<f64>,
    tunneling: f64,
    cone_energy: f64,
    mono_atomic_mu_l: Option<f64>,
    report: TheoremReport,
}

#[derive(Serialize)]
struct TbSummary {
    atom_mu: f64,
    entries: Vec<TbEntry>,
    ratios_decrease: bool,
}

fn cmd_tb(config: &RunConfig, stamp: &Stamp) -> Result<Artifacts> {
    let tb = &config.tb;
    if tb.ls.is_empty() {
        return Err(Error::Config("`tb.ls` is empty".into()));
    }
    let atom = solve_atom(config)?;
    let mut entries = Vec::new();
    for &l in &tb.ls {
        let scf = crate::scf::ScfConfig { l, ..config.scf.clone() };
        let state = scf_loop(&scf)?;
        let fp = tb_from_first_principles(&atom, &state, &tb.extraction)?;
        let path = path_of(&state.lattice, &tb.path, tb.samples_per_segment)?;
        let pw = state.bands_at(&path.points, state.motif.n_sites())?;
        let report = crate::dissociation::theorem_check(&fp.model, &pw, &path)?;
        entries.push(TbEntry {
            l,
            mu_l: fp.model.mu_l,
            thetas: fp.theta.thetas.clone(),
            theta_errors: fp.theta.errors.clone(),
            tunneling: fp.theta.tunneling,
            cone_energy: fp.cone_energy,
            mono_atomic_mu_l: fp.mono.as_ref().map(|m| m.mu_l),
            report,
        });
    }
    let reports: Vec<TheoremReport> = entries.iter().map(|e| e.report.clone()).collect();
    let mut t = Table::new(&["l", "mu_l", "theta", "tunneling", "sup_error", "ratio"]);
    for e in &entries {
        let sup = e.report.sup_error.iter().fold(0.0f64, |a, x| a.max(*x));
        t.push(vec![e.l.into(), e.mu_l.into(), e.thetas[0].into(), e.tunneling.into(), sup.into(), e.report.ratio.into()]);
    }
    let summary = TbSummary { atom_mu: atom.mu, ratios_decrease: ratios_decrease(&reports), entries };
    let mut out = Artifacts::default();
    out.json("tb.json", stamp, &summary)?;
    out.csv("tb.csv", stamp, &t);
    Ok(out)
}

fn cmd_dirac(config: &RunConfig, stamp: &Stamp) -> Result<Artifacts> {
    let d = &config.dirac;
    let report: DiracReport = match d.source {
        DiracSource::Tb => {
            let model = TBModel::wallace(d.theta);
            let k = special_point(&model.motif.bravais, "K")?;
            dirac_report(tb_pair(&model, 0), k, d.radius * k.norm(), d.directions, d.radii)?
        }
        DiracSource::Pw => {
            let state = scf_loop(&config.scf)?;
            if !state.converged {
                return Err(Error::NoConvergence { iterations: state.iterations, residual: state.last_residual() });
            }
            let k = special_point(&state.lattice, "K")?;
            let failure = std::sync::Mutex::new(None);
            let bands = |q: Vec2| match state.bands_at(&[q], 2) {
                Ok(s) => (s[0].values[0], s[0].values[1]),
                Err(e) => {
                    failure.lock().unwrap().get_or_insert(e);
                    (f64::NAN, f64::NAN)
                }
            };
            let r = dirac_report(bands, k, d.radius * k.norm(), d.directions, d.radii)?;
            if let Some(e) = failure.into_inner().unwrap() {
                return Err(e);
            }
            r
        }
    };
    let mut out = Artifacts::default();
    out.json("dirac.json", stamp, &report)?;
    Ok(out)
}

#[derive(Serialize)]
struct PhaseScanSummary {
    reports: Vec<PhaseReport>,
    transition_bracket: Option<(f64, f64)>,
    options: PhaseOptions,
}

fn cmd_phase_scan(config: &RunConfig, stamp: &Stamp) -> Result<Artifacts> {
    let p = &config.phase_scan;
    if p.ls.is_empty() {
        return Err(Error::Config("`phase_scan.ls` is empty".into()));
    }
    let reports = phase_scan(&p.ls, &config.scf, &p.options);
    if reports.iter().all(|r| r.phase.is_none()) {
        let why = reports.iter().filter_map(|r| r.error.clone()).collect::<Vec<_>>().join("; ");
        return Err(Error::ScanFailed(why));
    }
    let mut t = Table::new(&["l", "phase", "cone_energy", "fermi_level", "vertex_gap", "overlap", "iterations", "error"]);
    for r in &reports {
        let phase = r.phase.map(|p| serde_json::to_value(p).unwrap().as_str().unwrap().to_string()).unwrap_or_default();
        t.push(vec![
            r.l.into(),
            phase.into(),
            r.cone_energy.into(),
            r.fermi_level.into(),
            r.vertex_gap.into(),
            r.overlap.into(),
            r.scf_iterations.into(),
            r.error.clone().unwrap_or_default().into(),
        ]);
    }
    let summary = PhaseScanSummary { transition_bracket: transition_bracket(&reports), reports, options: p.options.clone() };
    let mut out = Artifacts::default();
    out.json("phase_scan.json", stamp, &summary)?;
    out.csv("phase_scan.csv", stamp, &t);
    Ok(out)
}
