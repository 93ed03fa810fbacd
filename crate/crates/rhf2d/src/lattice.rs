//! Bravais lattices with motifs, neighbor shells, nearest-neighbor edge
//! orbits and Brillouin-zone paths.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec2 = Vector2<f64>;
pub type Mat2 = Matrix2<f64>;

const REL_TOL: f64 = 1e-9;

/// Primitive basis of a 2D Bravais lattice together with its reciprocal basis.
#[derive(Clone, Debug, PartialEq)]
pub struct BravaisLattice {
    pub u1: Vec2,
    pub u2: Vec2,
    pub v1: Vec2,
    pub v2: Vec2,
    pub cell_area: f64,
}

/// Reciprocal basis with `v_i . u_j = 2 pi delta_ij`.
pub fn reciprocal_basis(u1: Vec2, u2: Vec2) -> Result<(Vec2, Vec2)> {
    let det = u1.x * u2.y - u1.y * u2.x;
    if !(det.abs() > 1e-12 * u1.norm() * u2.norm()) {
        return Err(Error::SingularBasis);
    }
    let s = 2.0 * PI / det;
    let v1 = Vec2::new(u2.y, -u2.x) * s;
    let v2 = Vec2::new(-u1.y, u1.x) * s;
    Ok((v1, v2))
}

impl BravaisLattice {
    pub fn new(u1: Vec2, u2: Vec2) -> Result<Self> {
        let (v1, v2) = reciprocal_basis(u1, u2)?;
        let cell_area = (u1.x * u2.y - u1.y * u2.x).abs();
        Ok(Self { u1, u2, v1, v2, cell_area })
    }

    /// Triangular lattice with unit lattice constant, u1 = (sqrt3/2, 1/2), u2 = (sqrt3/2, -1/2).
    pub fn triangular() -> Self {
        let s = 3f64.sqrt() / 2.0;
        Self::new(Vec2::new(s, 0.5), Vec2::new(s, -0.5)).expect("regular basis")
    }

    pub fn square() -> Self {
        Self::new(Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)).expect("regular basis")
    }

    pub fn scaled(&self, l: f64) -> Self {
        Self {
            u1: self.u1 * l,
            u2: self.u2 * l,
            v1: self.v1 / l,
            v2: self.v2 / l,
            cell_area: self.cell_area * l * l,
        }
    }

    pub fn point(&self, n: [i64; 2]) -> Vec2 {
        self.u1 * n[0] as f64 + self.u2 * n[1] as f64
    }

    pub fn reciprocal_point(&self, m: [i64; 2]) -> Vec2 {
        self.v1 * m[0] as f64 + self.v2 * m[1] as f64
    }

    /// Coordinates `(s, t)` with `x = s u1 + t u2`.
    pub fn fractional(&self, x: Vec2) -> [f64; 2] {
        [x.dot(&self.v1) / (2.0 * PI), x.dot(&self.v2) / (2.0 * PI)]
    }

    /// Coordinates `(s, t)` with `k = s v1 + t v2`.
    pub fn reciprocal_fractional(&self, k: Vec2) -> [f64; 2] {
        [k.dot(&self.u1) / (2.0 * PI), k.dot(&self.u2) / (2.0 * PI)]
    }

    pub fn lattice_constant(&self) -> f64 {
        self.u1.norm().max(self.u2.norm())
    }

    /// Integer index of `x` if it lies on the lattice within `tol` (fractional units).
    pub fn lattice_index(&self, x: Vec2, tol: f64) -> Option<[i64; 2]> {
        let f = self.fractional(x);
        let n = [f[0].round(), f[1].round()];
        if (f[0] - n[0]).abs() < tol && (f[1] - n[1]).abs() < tol {
            Some([n[0] as i64, n[1] as i64])
        } else {
            None
        }
    }

    pub fn reciprocal_index(&self, k: Vec2, tol: f64) -> Option<[i64; 2]> {
        let f = self.reciprocal_fractional(k);
        let n = [f[0].round(), f[1].round()];
        if (f[0] - n[0]).abs() < tol && (f[1] - n[1]).abs() < tol {
            Some([n[0] as i64, n[1] as i64])
        } else {
            None
        }
    }

    /// Lattice points within Euclidean radius `radius` of the origin.
    pub fn points_within(&self, radius: f64) -> Vec<[i64; 2]> {
        let range = index_range(self.u1, self.u2, radius);
        let mut out = Vec::new();
        for i in -range[0]..=range[0] {
            for j in -range[1]..=range[1] {
                if self.point([i, j]).norm() <= radius * (1.0 + 1e-12) {
                    out.push([i, j]);
                }
            }
        }
        out
    }

    /// Vector `x - u` with `u` the lattice point closest to `x`.
    pub fn reduce_wigner_seitz(&self, x: Vec2) -> (Vec2, [i64; 2]) {
        let f = self.fractional(x);
        let base = [f[0].floor() as i64, f[1].floor() as i64];
        let mut best = (f64::INFINITY, Vec2::zeros(), base);
        for di in -1..=2 {
            for dj in -1..=2 {
                let n = [base[0] + di, base[1] + dj];
                let y = x - self.point(n);
                let d = y.norm_squared();
                if d < best.0 {
                    best = (d, y, n);
                }
            }
        }
        (best.1, best.2)
    }

    /// Vertices of the Wigner-Seitz cell, ordered counter-clockwise.
    pub fn wigner_seitz_vertices(&self) -> Vec<Vec2> {
        // Voronoi cell from the bisector half-planes of the nearest neighbors.
        let neighbors: Vec<Vec2> = self
            .points_within(3.0 * self.lattice_constant())
            .into_iter()
            .filter(|n| *n != [0, 0])
            .map(|n| self.point(n))
            .collect();
        let mut verts: Vec<Vec2> = Vec::new();
        for (a, p) in neighbors.iter().enumerate() {
            for q in neighbors.iter().skip(a + 1) {
                // Solve x.p = |p|^2/2, x.q = |q|^2/2.
                let m = Mat2::new(p.x, p.y, q.x, q.y);
                let Some(inv) = m.try_inverse() else { continue };
                let x = inv * Vec2::new(p.norm_squared() / 2.0, q.norm_squared() / 2.0);
                let inside = neighbors
                    .iter()
                    .all(|w| x.dot(w) <= w.norm_squared() / 2.0 * (1.0 + 1e-10) + 1e-14);
                if inside && !verts.iter().any(|v| (v - x).norm() < 1e-10) {
                    verts.push(x);
                }
            }
        }
        verts.sort_by(|a, b| a.y.atan2(a.x).partial_cmp(&b.y.atan2(b.x)).unwrap());
        verts
    }
}

fn index_range(u1: Vec2, u2: Vec2, radius: f64) -> [i64; 2] {
    // |s| <= radius |v1| / 2pi bounds the fractional coordinate inside the ball.
    let (v1, v2) = reciprocal_basis(u1, u2).expect("valid basis");
    [
        (radius * v1.norm() / (2.0 * PI)).ceil() as i64 + 1,
        (radius * v2.norm() / (2.0 * PI)).ceil() as i64 + 1,
    ]
}

/// Affine isometry `x -> linear x + translation`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymOp {
    pub linear: [[f64; 2]; 2],
    pub translation: [f64; 2],
}

impl SymOp {
    pub fn new(linear: Mat2, translation: Vec2) -> Self {
        Self {
            linear: [[linear[(0, 0)], linear[(0, 1)]], [linear[(1, 0)], linear[(1, 1)]]],
            translation: [translation.x, translation.y],
        }
    }

    pub fn identity() -> Self {
        Self::new(Mat2::identity(), Vec2::zeros())
    }

    pub fn matrix(&self) -> Mat2 {
        Mat2::new(self.linear[0][0], self.linear[0][1], self.linear[1][0], self.linear[1][1])
    }

    pub fn shift(&self) -> Vec2 {
        Vec2::new(self.translation[0], self.translation[1])
    }

    pub fn apply(&self, x: Vec2) -> Vec2 {
        self.matrix() * x + self.shift()
    }

    /// `self` after `other`.
    pub fn compose(&self, other: &SymOp) -> SymOp {
        SymOp::new(self.matrix() * other.matrix(), self.matrix() * other.shift() + self.shift())
    }

    pub fn is_orthogonal(&self) -> bool {
        let m = self.matrix();
        (m.transpose() * m - Mat2::identity()).abs().max() < 1e-9
    }
}

/// Bravais lattice decorated with sublattice shifts and a symmetry group.
#[derive(Clone, Debug)]
pub struct MotifLattice {
    pub bravais: BravaisLattice,
    pub shifts: Vec<Vec2>,
    /// Group elements, closed under composition modulo lattice translations.
    pub group: Vec<SymOp>,
}

/// Default maximal word length used to close a generator list.
pub const DEFAULT_WORD_LENGTH: usize = 12;

impl MotifLattice {
    /// Builds the lattice and closes `generators` into a group (modulo translations).
    pub fn new(bravais: BravaisLattice, shifts: Vec<Vec2>, generators: Vec<SymOp>) -> Result<Self> {
        Self::with_word_length(bravais, shifts, generators, DEFAULT_WORD_LENGTH)
    }

    pub fn with_word_length(
        bravais: BravaisLattice,
        shifts: Vec<Vec2>,
        generators: Vec<SymOp>,
        word_length: usize,
    ) -> Result<Self> {
        if shifts.is_empty() {
            return Err(Error::InvalidArgument("motif needs at least one site".into()));
        }
        for (i, a) in shifts.iter().enumerate() {
            for b in shifts.iter().skip(i + 1) {
                if (a - b).norm() < 1e-10 * bravais.lattice_constant() {
                    return Err(Error::InvalidArgument("motif shifts must be distinct".into()));
                }
            }
        }
        let mut m = Self { bravais, shifts, group: Vec::new() };
        for g in &generators {
            if !g.is_orthogonal() {
                return Err(Error::InvalidGroup("linear part is not orthogonal".into()));
            }
            m.site_permutation(g)?;
        }
        m.group = m.close_group(&generators, word_length);
        Ok(m)
    }

    pub fn n_sites(&self) -> usize {
        self.shifts.len()
    }

    pub fn scaled(&self, l: f64) -> Self {
        Self {
            bravais: self.bravais.scaled(l),
            shifts: self.shifts.iter().map(|s| s * l).collect(),
            group: self
                .group
                .iter()
                .map(|g| SymOp::new(g.matrix(), g.shift() * l))
                .collect(),
        }
    }

    /// Position of vertex `(u, site)`.
    pub fn vertex(&self, cell: [i64; 2], site: usize) -> Vec2 {
        self.bravais.point(cell) + self.shifts[site]
    }

    /// Locates `x` on the vertex set: returns `(cell, site)`.
    pub fn locate(&self, x: Vec2) -> Option<([i64; 2], usize)> {
        let tol = 1e-7;
        self.shifts
            .iter()
            .enumerate()
            .find_map(|(j, r)| self.bravais.lattice_index(x - r, tol).map(|n| (n, j)))
    }

    /// For a group element, the image `(cell, site)` of each home-cell site.
    /// Also validates that the element maps the vertex set onto itself on a
    /// ball of three lattice constants.
    pub fn site_permutation(&self, g: &SymOp) -> Result<Vec<([i64; 2], usize)>> {
        let ball = self.bravais.points_within(3.0 * self.bravais.lattice_constant());
        let mut images = Vec::with_capacity(self.n_sites());
        for (i, r) in self.shifts.iter().enumerate() {
            for n in &ball {
                let x = self.vertex(*n, i);
                if self.locate(g.apply(x)).is_none() {
                    return Err(Error::InvalidGroup(format!(
                        "image of vertex ({}, {}) + site {} is not a vertex",
                        n[0], n[1], i
                    )));
                }
            }
            images.push(self.locate(g.apply(*r)).expect("validated above"));
        }
        Ok(images)
    }

    fn group_key(&self, g: &SymOp) -> [i64; 6] {
        let m = g.matrix();
        let f = self.bravais.fractional(g.shift());
        let q = |x: f64| (x * 1e7).round() as i64;
        let w = |x: f64| {
            let r = x - x.floor();
            let r = if (1.0 - r) < 1e-8 { 0.0 } else { r };
            q(r)
        };
        [q(m[(0, 0)]), q(m[(0, 1)]), q(m[(1, 0)]), q(m[(1, 1)]), w(f[0]), w(f[1])]
    }

    fn reduce_translation(&self, g: &SymOp) -> SymOp {
        let f = self.bravais.fractional(g.shift());
        let mut r = [f[0] - f[0].floor(), f[1] - f[1].floor()];
        for x in r.iter_mut() {
            if 1.0 - *x < 1e-9 {
                *x = 0.0;
            }
        }
        SymOp::new(g.matrix(), self.bravais.u1 * r[0] + self.bravais.u2 * r[1])
    }

    fn close_group(&self, generators: &[SymOp], word_length: usize) -> Vec<SymOp> {
        let mut elems: BTreeMap<[i64; 6], SymOp> = BTreeMap::new();
        let id = SymOp::identity();
        elems.insert(self.group_key(&id), id.clone());
        let mut frontier = vec![id];
        for _ in 0..word_length {
            let mut next = Vec::new();
            for e in &frontier {
                for g in generators {
                    let h = self.reduce_translation(&g.compose(e));
                    let key = self.group_key(&h);
                    if let std::collections::btree_map::Entry::Vacant(v) = elems.entry(key) {
                        v.insert(h.clone());
                        next.push(h);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            frontier = next;
        }
        elems.into_values().collect()
    }

    /// Distinct point-group matrices of the group.
    pub fn point_group(&self) -> Vec<Mat2> {
        let mut out: Vec<Mat2> = Vec::new();
        for g in &self.group {
            let m = g.matrix();
            if !out.iter().any(|o| (o - m).abs().max() < 1e-9) {
                out.push(m);
            }
        }
        out
    }
}

/// Honeycomb lattice: triangular Bravais lattice, sites a = (1/(2 sqrt3), 0) and b = -a,
/// generated by parity, the horizontal reflection and the rotation by 2pi/3 about a.
pub fn honeycomb() -> MotifLattice {
    let bravais = BravaisLattice::triangular();
    let a = Vec2::new(1.0 / (2.0 * 3f64.sqrt()), 0.0);
    let rot = rotation(2.0 * PI / 3.0);
    let generators = vec![
        SymOp::new(-Mat2::identity(), Vec2::zeros()),
        SymOp::new(Mat2::new(1.0, 0.0, 0.0, -1.0), Vec2::zeros()),
        SymOp::new(rot, a - rot * a),
    ];
    MotifLattice::new(bravais, vec![a, -a], generators).expect("honeycomb preset is valid")
}

/// Single-site triangular lattice with the full hexagonal point group.
pub fn triangular() -> MotifLattice {
    let generators = vec![
        SymOp::new(rotation(PI / 3.0), Vec2::zeros()),
        SymOp::new(Mat2::new(1.0, 0.0, 0.0, -1.0), Vec2::zeros()),
    ];
    MotifLattice::new(BravaisLattice::triangular(), vec![Vec2::zeros()], generators)
        .expect("triangular preset is valid")
}

/// Single-site square lattice with the square point group.
pub fn square() -> MotifLattice {
    let generators = vec![
        SymOp::new(rotation(PI / 2.0), Vec2::zeros()),
        SymOp::new(Mat2::new(1.0, 0.0, 0.0, -1.0), Vec2::zeros()),
    ];
    MotifLattice::new(BravaisLattice::square(), vec![Vec2::zeros()], generators)
        .expect("square preset is valid")
}

/// Square-octagon lattice: four sites per square cell at (+-c, 0), (0, +-c) with
/// c = 1/(2 + sqrt2), so that square edges and links between squares have equal length.
pub fn square_octagon() -> MotifLattice {
    let c = 1.0 / (2.0 + 2f64.sqrt());
    let shifts = vec![Vec2::new(c, 0.0), Vec2::new(0.0, c), Vec2::new(-c, 0.0), Vec2::new(0.0, -c)];
    let generators = vec![
        SymOp::new(rotation(PI / 2.0), Vec2::zeros()),
        SymOp::new(Mat2::new(1.0, 0.0, 0.0, -1.0), Vec2::zeros()),
    ];
    MotifLattice::new(BravaisLattice::square(), shifts, generators).expect("square-octagon preset")
}

/// Kagome lattice: three sites at the bond midpoints of the triangular lattice.
pub fn kagome() -> MotifLattice {
    let b = BravaisLattice::triangular();
    let shifts = vec![b.u1 / 2.0, b.u2 / 2.0, (b.u1 - b.u2) / 2.0];
    let generators = vec![
        SymOp::new(rotation(PI / 3.0), Vec2::zeros()),
        SymOp::new(Mat2::new(1.0, 0.0, 0.0, -1.0), Vec2::zeros()),
    ];
    MotifLattice::new(b, shifts, generators).expect("kagome preset")
}

pub fn rotation(angle: f64) -> Mat2 {
    let (s, c) = angle.sin_cos();
    Mat2::new(c, -s, s, c)
}

/// Builds one of the named presets.
pub fn preset(name: &str) -> Result<MotifLattice> {
    match name {
        "honeycomb" => Ok(honeycomb()),
        "triangular" => Ok(triangular()),
        "square" => Ok(square()),
        "square-octagon" => Ok(square_octagon()),
        "kagome" => Ok(kagome()),
        other => Err(Error::Config(format!("unknown lattice preset `{other}`"))),
    }
}

/// Lattice vertex pair `(r, u + r')` written as `(site, shift, site')`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub from: usize,
    pub shift: [i64; 2],
    pub to: usize,
}

impl Edge {
    pub fn reversed(&self) -> Edge {
        Edge { from: self.to, shift: [-self.shift[0], -self.shift[1]], to: self.from }
    }

    /// Orientation-independent representative of the translation class.
    pub fn canonical(&self) -> Edge {
        (*self).min(self.reversed())
    }

    pub fn vector(&self, m: &MotifLattice) -> Vec2 {
        m.vertex(self.shift, self.to) - m.shifts[self.from]
    }
}

#[derive(Clone, Debug)]
pub struct NeighborShells {
    pub d0: f64,
    pub d1: f64,
    /// Edges touching the home cell at distance d0 (both orientations).
    pub nearest: Vec<Edge>,
    /// Edges touching the home cell at distance d1 (both orientations).
    pub second: Vec<Edge>,
}

/// Default search radius for neighbor shells, in lattice constants.
pub const SHELL_RADIUS: f64 = 3.0;

pub fn neighbor_shells(m: &MotifLattice) -> NeighborShells {
    neighbor_shells_within(m, SHELL_RADIUS)
}

pub fn neighbor_shells_within(m: &MotifLattice, radius_in_constants: f64) -> NeighborShells {
    let radius = radius_in_constants * m.bravais.lattice_constant();
    let cells = m.bravais.points_within(radius + 2.0 * m.bravais.lattice_constant());
    let mut edges: Vec<(f64, Edge)> = Vec::new();
    for i in 0..m.n_sites() {
        for j in 0..m.n_sites() {
            for n in &cells {
                let e = Edge { from: i, shift: *n, to: j };
                let d = e.vector(m).norm();
                if d > 1e-12 && d <= radius {
                    edges.push((d, e));
                }
            }
        }
    }
    edges.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let d0 = edges[0].0;
    let d1 = edges
        .iter()
        .map(|e| e.0)
        .find(|d| *d > d0 * (1.0 + REL_TOL))
        .unwrap_or(f64::INFINITY);
    let pick = |d: f64| -> Vec<Edge> {
        let mut v: Vec<Edge> = edges
            .iter()
            .filter(|e| (e.0 - d).abs() <= d * REL_TOL)
            .map(|e| e.1)
            .collect();
        v.sort();
        v
    };
    NeighborShells { d0, d1, nearest: pick(d0), second: pick(d1) }
}

/// Partition of the nearest-neighbor edges into orbits of the symmetry group.
#[derive(Clone, Debug)]
pub struct EdgeOrbitSet {
    /// Canonical representative of each orbit.
    pub representatives: Vec<Edge>,
    /// Members of each orbit touching the home cell, both orientations.
    pub members: Vec<Vec<Edge>>,
}

impl EdgeOrbitSet {
    pub fn len(&self) -> usize {
        self.representatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.representatives.is_empty()
    }

    pub fn orbit_of(&self, e: &Edge) -> Option<usize> {
        self.members.iter().position(|o| o.contains(e))
    }
}

fn image_edge(m: &MotifLattice, g: &SymOp, e: &Edge) -> Result<Edge> {
    let x = g.apply(m.shifts[e.from]);
    let y = g.apply(m.vertex(e.shift, e.to));
    let (cx, sx) = m
        .locate(x)
        .ok_or_else(|| Error::InvalidGroup("edge endpoint mapped off the lattice".into()))?;
    let (cy, sy) = m
        .locate(y)
        .ok_or_else(|| Error::InvalidGroup("edge endpoint mapped off the lattice".into()))?;
    Ok(Edge { from: sx, shift: [cy[0] - cx[0], cy[1] - cx[1]], to: sy })
}

pub fn edge_orbits(m: &MotifLattice) -> Result<EdgeOrbitSet> {
    for g in &m.group {
        m.site_permutation(g)?;
    }
    let shells = neighbor_shells(m);
    let keys: Vec<Edge> = {
        let mut k: Vec<Edge> = shells.nearest.iter().map(|e| e.canonical()).collect();
        k.sort();
        k.dedup();
        k
    };
    let index: HashMap<Edge, usize> = keys.iter().enumerate().map(|(i, e)| (*e, i)).collect();
    let mut parent: Vec<usize> = (0..keys.len()).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        let mut j = i;
        while p[j] != r {
            let n = p[j];
            p[j] = r;
            j = n;
        }
        r
    }
    for (i, e) in keys.iter().enumerate() {
        for g in &m.group {
            let img = image_edge(m, g, e)?.canonical();
            let j = *index.get(&img).ok_or_else(|| {
                Error::InvalidGroup("image of a nearest-neighbor edge is not an edge".into())
            })?;
            let (a, b) = (find(&mut parent, i), find(&mut parent, j));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut classes: BTreeMap<usize, Vec<Edge>> = BTreeMap::new();
    for (i, e) in keys.iter().enumerate() {
        let r = find(&mut parent, i);
        classes.entry(r).or_default().push(*e);
    }
    let mut representatives = Vec::new();
    let mut members = Vec::new();
    for (_, canon) in classes {
        representatives.push(canon[0]);
        let mut all: Vec<Edge> = shells
            .nearest
            .iter()
            .filter(|e| canon.contains(&e.canonical()))
            .copied()
            .collect();
        all.sort();
        members.push(all);
    }
    Ok(EdgeOrbitSet { representatives, members })
}

/// A labeled waypoint of a Brillouin-zone path.
#[derive(Clone, Debug, PartialEq)]
pub struct Waypoint {
    pub label: String,
    pub k: Vec2,
}

#[derive(Clone, Debug)]
pub struct KPath {
    pub waypoints: Vec<Waypoint>,
    pub samples_per_segment: usize,
    pub points: Vec<Vec2>,
    pub arc_length: Vec<f64>,
    /// Segment index of each sample (the final point belongs to the last segment).
    pub segment: Vec<usize>,
}

impl KPath {
    pub fn segment_label(&self, i: usize) -> String {
        let s = self.segment[i];
        format!("{}-{}", self.waypoints[s].label, self.waypoints[s + 1].label)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Special point of the Brillouin zone by label: Γ (or G), K, K', M, or "(kx, ky)".
pub fn special_point(b: &BravaisLattice, label: &str) -> Result<Vec2> {
    match label.trim() {
        "Γ" | "G" | "Gamma" => Ok(Vec2::zeros()),
        "K" => Ok((b.v1 - b.v2) / 3.0),
        "K'" | "Kp" => Ok(-(b.v1 - b.v2) / 3.0),
        "M" => Ok(edge_midpoint(b)),
        raw => parse_coordinates(raw).ok_or_else(|| Error::UnknownLabel(raw.to_string())),
    }
}

/// Zone-edge midpoint adjacent to `K`: `v1/2` for hexagonal reciprocal bases
/// (`|v1| = |v2| = |v1 + v2|`), else `(v1 + v2)/2`.
fn edge_midpoint(b: &BravaisLattice) -> Vec2 {
    let (a, c, s) = (b.v1.norm(), b.v2.norm(), (b.v1 + b.v2).norm());
    if (a - c).abs() < 1e-9 * a && (a - s).abs() < 1e-9 * a {
        b.v1 / 2.0
    } else {
        (b.v1 + b.v2) / 2.0
    }
}

fn parse_coordinates(s: &str) -> Option<Vec2> {
    let inner = s.strip_prefix('(')?.strip_suffix(')')?;
    let mut it = inner.split(',').map(|t| t.trim().parse::<f64>());
    let x = it.next()?.ok()?;
    let y = it.next()?.ok()?;
    if it.next().is_some() {
        return None;
    }
    Some(Vec2::new(x, y))
}

/// Piecewise-linear path through the labeled points; every segment carries
/// `samples_per_segment` samples starting at its first endpoint, and the final
/// waypoint closes the path.
pub fn k_path(b: &BravaisLattice, labels: &[&str], samples_per_segment: usize) -> Result<KPath> {
    if labels.len() < 2 || samples_per_segment == 0 {
        return Err(Error::InvalidArgument(
            "a path needs two waypoints and one sample per segment".into(),
        ));
    }
    let waypoints = labels
        .iter()
        .map(|l| Ok(Waypoint { label: l.to_string(), k: special_point(b, l)? }))
        .collect::<Result<Vec<_>>>()?;
    let mut points = Vec::new();
    let mut arc_length = Vec::new();
    let mut segment = Vec::new();
    let mut s0 = 0.0;
    for (si, w) in waypoints.windows(2).enumerate() {
        let (a, c) = (w[0].k, w[1].k);
        let len = (c - a).norm();
        for j in 0..samples_per_segment {
            let t = j as f64 / samples_per_segment as f64;
            points.push(if j == 0 { a } else { a + (c - a) * t });
            arc_length.push(s0 + len * t);
            segment.push(si);
        }
        s0 += len;
    }
    let last = waypoints.last().unwrap().k;
    points.push(last);
    arc_length.push(s0);
    segment.push(waypoints.len() - 2);
    Ok(KPath { waypoints, samples_per_segment, points, arc_length, segment })
}

/// Uniform Gamma-centered `n x n` grid `k = (i v1 + j v2)/n`.
pub fn kgrid(b: &BravaisLattice, n: usize) -> Vec<Vec2> {
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            out.push((b.v1 * i as f64 + b.v2 * j as f64) / n as f64);
        }
    }
    out
}

/// Orbits of the `n x n` grid under `ops` and `k -> -k`: one representative per
/// orbit with weight `|orbit| / n^2`. Returns `None` when an operation does not map
/// the grid onto itself.
pub fn reduce_kgrid(b: &BravaisLattice, n: usize, ops: &[Mat2]) -> Option<(Vec<Vec2>, Vec<f64>)> {
    let key = |k: Vec2| -> Option<[i64; 2]> {
        let f = b.reciprocal_fractional(k);
        let mut out = [0i64; 2];
        for (o, x) in out.iter_mut().zip(f) {
            let y = x * n as f64;
            if (y - y.round()).abs() > 1e-6 {
                return None;
            }
            *o = (y.round() as i64).rem_euclid(n as i64);
        }
        Some(out)
    };
    let mut seen = vec![false; n * n];
    let mut reps = Vec::new();
    let mut weights = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if seen[i * n + j] {
                continue;
            }
            let k = (b.v1 * i as f64 + b.v2 * j as f64) / n as f64;
            let mut count = 0usize;
            for s in ops {
                for sign in [1.0, -1.0] {
                    let [a, c] = key(s * k * sign)?;
                    let idx = a as usize * n + c as usize;
                    if !seen[idx] {
                        seen[idx] = true;
                        count += 1;
                    }
                }
            }
            reps.push(k);
            weights.push(count as f64 / (n * n) as f64);
        }
    }
    Some((reps, weights))
}

/// Lattice description read from a configuration file.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub u1: Option<[f64; 2]>,
    #[serde(default)]
    pub u2: Option<[f64; 2]>,
    #[serde(default)]
    pub shifts: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub generators: Vec<SymOp>,
    #[serde(default)]
    pub word_length: Option<usize>,
}

impl LatticeSpec {
    pub fn preset(name: &str) -> Self {
        Self {
            preset: Some(name.to_string()),
            u1: None,
            u2: None,
            shifts: None,
            generators: Vec::new(),
            word_length: None,
        }
    }

    pub fn build(&self) -> Result<MotifLattice> {
        if let Some(p) = &self.preset {
            if self.u1.is_some() || self.u2.is_some() || self.shifts.is_some() {
                return Err(Error::Config("`preset` excludes explicit basis vectors".into()));
            }
            return preset(p);
        }
        let (Some(u1), Some(u2)) = (self.u1, self.u2) else {
            return Err(Error::Config("lattice needs `preset` or `u1` and `u2`".into()));
        };
        let b = BravaisLattice::new(Vec2::new(u1[0], u1[1]), Vec2::new(u2[0], u2[1]))?;
        let shifts = self
            .shifts
            .clone()
            .unwrap_or_else(|| vec![[0.0, 0.0]])
            .into_iter()
            .map(|s| Vec2::new(s[0], s[1]))
            .collect();
        MotifLattice::with_word_length(
            b,
            shifts,
            self.generators.clone(),
            self.word_length.unwrap_or(DEFAULT_WORD_LENGTH),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn reduced_grid_weights() {
        let m = honeycomb();
        let (k, w) = reduce_kgrid(&m.bravais, 12, &m.point_group()).unwrap();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!(k.len() < 25, "{}", k.len());
        // Γ and K are fixed by the whole group.
        assert!((w[0] - 1.0 / 144.0).abs() < 1e-15);
        let (k1, w1) = reduce_kgrid(&m.bravais, 12, &[Mat2::identity()]).unwrap();
        assert_eq!(k1.len(), 74);
        assert_eq!(w1.len(), 74);
    }

    #[test]
    fn reciprocal_examples() {
        let s = 3f64.sqrt();
        let (v1, v2) = reciprocal_basis(Vec2::new(s / 2.0, 0.5), Vec2::new(s / 2.0, -0.5)).unwrap();
        assert_abs_diff_eq!(v1.x, 2.0 * PI / s, epsilon = 1e-12);
        assert_abs_diff_eq!(v1.y, 2.0 * PI, epsilon = 1e-12);
        assert_abs_diff_eq!(v2.x, 2.0 * PI / s, epsilon = 1e-12);
        assert_abs_diff_eq!(v2.y, -2.0 * PI, epsilon = 1e-12);
        let (v1, v2) = reciprocal_basis(Vec2::new(2.0, 0.0), Vec2::new(0.0, 1.0)).unwrap();
        assert_abs_diff_eq!(v1.x, PI, epsilon = 1e-14);
        assert_abs_diff_eq!(v2.y, 2.0 * PI, epsilon = 1e-14);
        assert_eq!(
            reciprocal_basis(Vec2::new(1.0, 1.0), Vec2::new(2.0, 2.0)),
            Err(Error::SingularBasis)
        );
        assert_eq!(Error::SingularBasis.to_string(), "singular lattice basis");
    }

    #[test]
    fn honeycomb_geometry() {
        let h = honeycomb();
        assert_eq!(h.n_sites(), 2);
        let sh = neighbor_shells(&h);
        assert_abs_diff_eq!(sh.d0, 1.0 / 3f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(sh.d1, 1.0, epsilon = 1e-12);
        let k = special_point(&h.bravais, "K").unwrap();
        assert_abs_diff_eq!(k.x, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(k.y, 4.0 * PI / 3.0, epsilon = 1e-12);
        let sh6 = neighbor_shells(&h.scaled(6.0));
        assert_abs_diff_eq!(sh6.d0, 6.0 / 3f64.sqrt(), epsilon = 1e-11);
        assert_abs_diff_eq!(h.bravais.cell_area, 3f64.sqrt() / 2.0, epsilon = 1e-14);
        // p6m modulo translations has 12 elements.
        assert_eq!(h.group.len(), 12);
    }

    #[test]
    fn shells_of_simple_lattices() {
        let sq = neighbor_shells(&square());
        assert_abs_diff_eq!(sq.d0, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sq.d1, 2f64.sqrt(), epsilon = 1e-12);
        let kg = neighbor_shells(&kagome());
        assert_abs_diff_eq!(kg.d0, 0.5, epsilon = 1e-12);
        assert!(kg.d0 < kg.d1);
        assert_abs_diff_eq!(kg.d1, 3f64.sqrt() / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn orbit_counts() {
        assert_eq!(edge_orbits(&honeycomb()).unwrap().len(), 1);
        assert_eq!(edge_orbits(&square_octagon()).unwrap().len(), 2);
        let h = honeycomb();
        let trivial = MotifLattice::new(h.bravais.clone(), h.shifts.clone(), vec![]).unwrap();
        assert_eq!(trivial.group.len(), 1);
        assert_eq!(edge_orbits(&trivial).unwrap().len(), 3);
    }

    #[test]
    fn invalid_group_is_rejected() {
        let h = honeycomb();
        let bad = SymOp::new(rotation(PI / 4.0), Vec2::zeros());
        assert!(matches!(
            MotifLattice::new(h.bravais.clone(), h.shifts.clone(), vec![bad]),
            Err(Error::InvalidGroup(_))
        ));
    }

    #[test]
    fn path_construction() {
        let h = honeycomb();
        let p = k_path(&h.bravais, &["Γ", "K", "M", "Γ"], 2).unwrap();
        assert_eq!(p.len(), 7);
        assert_eq!(p.points[0], Vec2::zeros());
        assert_eq!(p.points[2], special_point(&h.bravais, "K").unwrap());
        assert_eq!(p.points[4], special_point(&h.bravais, "M").unwrap());
        assert_eq!(p.points[6], Vec2::zeros());
        assert_abs_diff_eq!(p.arc_length[2], 4.0 * PI / 3.0, epsilon = 1e-12);
        assert!(matches!(k_path(&h.bravais, &["Γ", "X"], 2), Err(Error::UnknownLabel(_))));
        let raw = k_path(&h.bravais, &["(0.5, -1)", "Γ"], 3).unwrap();
        assert_eq!(raw.points[0], Vec2::new(0.5, -1.0));
    }

    #[test]
    fn wigner_seitz_hexagon() {
        let v = BravaisLattice::triangular().wigner_seitz_vertices();
        assert_eq!(v.len(), 6);
        for p in &v {
            assert_abs_diff_eq!(p.norm(), 1.0 / 3f64.sqrt(), epsilon = 1e-12);
        }
        assert_eq!(BravaisLattice::square().wigner_seitz_vertices().len(), 4);
    }

    #[test]
    fn spec_from_toml() {
        let s: LatticeSpec = toml::from_str("preset = \"honeycomb\"").unwrap();
        assert_eq!(s.build().unwrap().n_sites(), 2);
        let custom = r#"
            u1 = [1.0, 0.0]
            u2 = [0.0, 1.0]
            shifts = [[0.0, 0.0]]
            [[generators]]
            linear = [[0.0, -1.0], [1.0, 0.0]]
            translation = [0.0, 0.0]
        "#;
        let s: LatticeSpec = toml::from_str(custom).unwrap();
        assert_eq!(s.build().unwrap().group.len(), 4);
        assert!(toml::from_str::<LatticeSpec>("preset = \"square\"\ncolor = 1").is_err());
    }
}
