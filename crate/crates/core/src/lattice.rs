//! Square-lattice geometry for the CV surface code.
//!
//! Modes live on the edges of a `width × height` square lattice. Vertex `(x, y)`
//! has id `y * width + x`, and the same rule numbers faces (a face is named by
//! its lower-left corner). Horizontal edges come first in the mode order, then
//! vertical ones:
//!
//! - horizontal edge `(x, y)` joins vertex `(x, y)` to `(x + 1, y)`,
//! - vertical edge `(x, y)` joins vertex `(x, y)` to `(x, y + 1)`.
//!
//! The boundary of every face is listed counterclockwise starting from the top
//! edge: `[top, left, bottom, right]`, with nullifier signs `[+1, -1, +1, -1]`.
//! Under this ordering a horizontal edge always carries sign `+1` and a vertical
//! edge `-1`, whichever of its two faces is considered.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("a {boundary} lattice needs width and height of at least 2, got {width}x{height}")]
    TooSmall {
        width: usize,
        height: usize,
        boundary: Boundary,
    },
    #[error("squeezing map names mode {0}, which is not an edge mode of the lattice")]
    UnknownMode(usize),
    #[error("squeezing parameter must be finite and positive, or infinite; got {0}")]
    BadSqueezing(f64),
    #[error("malformed lattice file: {0}")]
    File(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Toroidal,
    /// Open boundary; boundary stars carry fewer than four edges. Experimental.
    Planar,
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Boundary::Toroidal => f.write_str("toroidal"),
            Boundary::Planar => f.write_str("planar"),
        }
    }
}

impl std::str::FromStr for Boundary {
    type Err = LatticeError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "toroidal" | "torus" => Ok(Boundary::Toroidal),
            "planar" => Ok(Boundary::Planar),
            other => Err(LatticeError::File(format!("unknown boundary `{other}`"))),
        }
    }
}

/// Edge orientation, numbered the way the anyon sign convention `(-1)^d` uses it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Orientation {
    Vertical,
    Horizontal,
}

impl Orientation {
    /// `1` for vertical edges, `2` for horizontal ones.
    pub fn d(self) -> u8 {
        match self {
            Orientation::Vertical => 1,
            Orientation::Horizontal => 2,
        }
    }

    /// Sign carried by an edge of this orientation in every plaquette nullifier.
    pub fn face_sign(self) -> f64 {
        match self {
            Orientation::Horizontal => 1.0,
            Orientation::Vertical => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Quadrature {
    Position,
    Momentum,
}

impl fmt::Display for Quadrature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Quadrature::Position => f.write_str("X"),
            Quadrature::Momentum => f.write_str("P"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeMode {
    pub index: usize,
    pub orientation: Orientation,
    pub x: usize,
    pub y: usize,
    /// Endpoints, lower/left first.
    pub vertices: [usize; 2],
    /// Adjacent faces (two on a torus, one or two on a planar patch).
    pub faces: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    pub id: usize,
    pub x: usize,
    pub y: usize,
    /// `[top, left, bottom, right]`.
    pub boundary: [usize; 4],
}

pub const FACE_SIGNS: [f64; 4] = [1.0, -1.0, 1.0, -1.0];

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeSpec {
    pub width: usize,
    pub height: usize,
    pub boundary: Boundary,
    pub edges: Vec<EdgeMode>,
    /// Incident edges of every vertex.
    pub stars: Vec<Vec<usize>>,
    pub faces: Vec<Face>,
}

/// Builds the lattice. Mode indexing is deterministic (see module docs).
pub fn build_lattice(
    width: usize,
    height: usize,
    boundary: Boundary,
) -> Result<LatticeSpec, LatticeError> {
    if width < 2 || height < 2 {
        return Err(LatticeError::TooSmall {
            width,
            height,
            boundary,
        });
    }
    let (w, h) = (width, height);
    let torus = boundary == Boundary::Toroidal;
    let (hx, vy) = if torus { (w, h) } else { (w - 1, h - 1) };
    let (fw, fh) = if torus { (w, h) } else { (w - 1, h - 1) };
    let n_h = hx * h;
    let face_id = |x: usize, y: usize| y * fw + x;
    let mut edges = Vec::with_capacity(n_h + w * vy);

    for y in 0..h {
        for x in 0..hx {
            let mut faces = Vec::with_capacity(2);
            // face above has this edge at the bottom, face below at the top
            if torus {
                faces.push(face_id(x, y));
                faces.push(face_id(x, (y + h - 1) % h));
            } else {
                if y < fh {
                    faces.push(face_id(x, y));
                }
                if y > 0 {
                    faces.push(face_id(x, y - 1));
                }
            }
            edges.push(EdgeMode {
                index: edges.len(),
                orientation: Orientation::Horizontal,
                x,
                y,
                vertices: [y * w + x, y * w + (x + 1) % w],
                faces,
            });
        }
    }
    for y in 0..vy {
        for x in 0..w {
            let mut faces = Vec::with_capacity(2);
            if torus {
                faces.push(face_id(x, y));
                faces.push(face_id((x + w - 1) % w, y));
            } else {
                if x < fw {
                    faces.push(face_id(x, y));
                }
                if x > 0 {
                    faces.push(face_id(x - 1, y));
                }
            }
            edges.push(EdgeMode {
                index: edges.len(),
                orientation: Orientation::Vertical,
                x,
                y,
                vertices: [y * w + x, ((y + 1) % h) * w + x],
                faces,
            });
        }
    }

    let h_edge = |x: usize, y: usize| y * hx + x;
    let v_edge = |x: usize, y: usize| n_h + y * w + x;

    let mut faces = Vec::with_capacity(fw * fh);
    for y in 0..fh {
        for x in 0..fw {
            faces.push(Face {
                id: face_id(x, y),
                x,
                y,
                boundary: [
                    h_edge(x, (y + 1) % h),
                    v_edge(x, y),
                    h_edge(x, y),
                    v_edge((x + 1) % w, y),
                ],
            });
        }
    }

    let mut stars = vec![Vec::with_capacity(4); w * h];
    for e in &edges {
        for &v in &e.vertices {
            stars[v].push(e.index);
        }
    }

    Ok(LatticeSpec {
        width,
        height,
        boundary,
        edges,
        stars,
        faces,
    })
}

impl LatticeSpec {
    pub fn num_modes(&self) -> usize {
        self.edges.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.stars.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn vertex_coords(&self, v: usize) -> (usize, usize) {
        (v % self.width, v / self.width)
    }

    pub fn face_coords(&self, f: usize) -> (usize, usize) {
        (self.faces[f].x, self.faces[f].y)
    }

    /// Sign of `edge` inside any plaquette nullifier that contains it.
    pub fn edge_sign(&self, edge: usize) -> f64 {
        self.edges[edge].orientation.face_sign()
    }

    /// Sublattice sign used to turn raw nullifier violations into anyon labels.
    /// Even sites (`x + y` even) carry `+1`.
    pub fn vertex_parity(&self, v: usize) -> f64 {
        let (x, y) = self.vertex_coords(v);
        if (x + y) % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    pub fn face_parity(&self, f: usize) -> f64 {
        let (x, y) = self.face_coords(f);
        if (x + y) % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// The staggered labelling is only consistent when the vertex and face
    /// graphs are bipartite; on a torus this needs even dimensions.
    pub fn is_bipartite(&self) -> bool {
        match self.boundary {
            Boundary::Planar => true,
            Boundary::Toroidal => self.width.is_multiple_of(2) && self.height.is_multiple_of(2),
        }
    }

    pub fn edge_between_vertices(&self, a: usize, b: usize) -> Option<usize> {
        self.stars[a]
            .iter()
            .copied()
            .find(|&e| {
                let [u, v] = self.edges[e].vertices;
                (u == a && v == b) || (u == b && v == a)
            })
    }

    pub fn edge_between_faces(&self, f: usize, g: usize) -> Option<usize> {
        self.faces[f]
            .boundary
            .iter()
            .copied()
            .find(|&e| self.edges[e].faces.contains(&g) && f != g)
    }

    fn wrap(&self, x: isize, y: isize, nx: usize, ny: usize) -> Option<(usize, usize)> {
        match self.boundary {
            Boundary::Toroidal => Some((
                x.rem_euclid(self.width as isize) as usize,
                y.rem_euclid(self.height as isize) as usize,
            )),
            Boundary::Planar => {
                if x < 0 || y < 0 || x as usize >= nx || y as usize >= ny {
                    None
                } else {
                    Some((x as usize, y as usize))
                }
            }
        }
    }

    pub fn vertex_at(&self, x: isize, y: isize) -> Option<usize> {
        self.wrap(x, y, self.width, self.height)
            .map(|(x, y)| y * self.width + x)
    }

    pub fn face_at(&self, x: isize, y: isize) -> Option<usize> {
        let (fw, fh) = self.face_dims();
        self.wrap(x, y, fw, fh).map(|(x, y)| y * fw + x)
    }

    pub fn face_dims(&self) -> (usize, usize) {
        match self.boundary {
            Boundary::Toroidal => (self.width, self.height),
            Boundary::Planar => (self.width - 1, self.height - 1),
        }
    }

    /// Edge from vertex `(x, y)` to `(x + 1, y)`.
    pub fn horizontal_edge(&self, x: isize, y: isize) -> Option<usize> {
        let hx = match self.boundary {
            Boundary::Toroidal => self.width,
            Boundary::Planar => self.width - 1,
        };
        self.wrap(x, y, hx, self.height).map(|(x, y)| y * hx + x)
    }

    /// Edge from vertex `(x, y)` to `(x, y + 1)`.
    pub fn vertical_edge(&self, x: isize, y: isize) -> Option<usize> {
        let (hx, vy) = match self.boundary {
            Boundary::Toroidal => (self.width, self.height),
            Boundary::Planar => (self.width - 1, self.height - 1),
        };
        let n_h = hx * self.height;
        self.wrap(x, y, self.width, vy)
            .map(|(x, y)| n_h + y * self.width + x)
    }

    /// Edge path of a rectangle of `w × h` faces with lower-left vertex
    /// `(x0, y0)`, starting and ending at that vertex.
    pub fn vertex_loop(
        &self,
        x0: isize,
        y0: isize,
        w: usize,
        h: usize,
        counterclockwise: bool,
    ) -> Option<Vec<usize>> {
        let (w, h) = (w as isize, h as isize);
        let mut path = Vec::new();
        for i in 0..w {
            path.push(self.horizontal_edge(x0 + i, y0)?);
        }
        for j in 0..h {
            path.push(self.vertical_edge(x0 + w, y0 + j)?);
        }
        for i in (0..w).rev() {
            path.push(self.horizontal_edge(x0 + i, y0 + h)?);
        }
        for j in (0..h).rev() {
            path.push(self.vertical_edge(x0, y0 + j)?);
        }
        if !counterclockwise {
            path.reverse();
        }
        Some(path)
    }

    /// Edges crossed by a face walk around the `w × h` block of vertices whose
    /// lower-left vertex is `(vx, vy)`. The walk starts and ends on face
    /// `(vx − 1, vy − 1)`.
    pub fn face_loop(
        &self,
        vx: isize,
        vy: isize,
        w: usize,
        h: usize,
        counterclockwise: bool,
    ) -> Option<Vec<usize>> {
        let (w, h) = (w as isize, h as isize);
        let mut path = Vec::new();
        for i in 0..w {
            path.push(self.vertical_edge(vx + i, vy - 1)?);
        }
        for j in 0..h {
            path.push(self.horizontal_edge(vx + w - 1, vy + j)?);
        }
        for i in (0..w).rev() {
            path.push(self.vertical_edge(vx + i, vy + h - 1)?);
        }
        for j in (0..h).rev() {
            path.push(self.horizontal_edge(vx - 1, vy + j)?);
        }
        if !counterclockwise {
            path.reverse();
        }
        Some(path)
    }

    /// The vertex across `edge` from `v`.
    pub fn other_vertex(&self, edge: usize, v: usize) -> Option<usize> {
        let [a, b] = self.edges[edge].vertices;
        if a == v {
            Some(b)
        } else if b == v {
            Some(a)
        } else {
            None
        }
    }

    pub fn other_face(&self, edge: usize, f: usize) -> Option<usize> {
        let faces = &self.edges[edge].faces;
        if faces.len() != 2 {
            return None;
        }
        if faces[0] == f {
            Some(faces[1])
        } else if faces[1] == f {
            Some(faces[0])
        } else {
            None
        }
    }

    /// Position of `edge` in the ordered boundary of `f`, if present.
    pub fn boundary_position(&self, f: usize, edge: usize) -> Option<usize> {
        self.faces[f].boundary.iter().position(|&e| e == edge)
    }

    /// Human-readable table of the mode numbering.
    pub fn mode_index_doc(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# {}x{} {} lattice: {} modes, {} stars, {} plaquettes",
            self.width,
            self.height,
            self.boundary,
            self.num_modes(),
            self.num_vertices(),
            self.num_faces()
        );
        let _ = writeln!(out, "mode,orientation,d,x,y,vertices,faces,plaquette_sign");
        for e in &self.edges {
            let faces: Vec<String> = e.faces.iter().map(|f| f.to_string()).collect();
            let _ = writeln!(
                out,
                "{},{:?},{},{},{},{} {},{},{:+}",
                e.index,
                e.orientation,
                e.orientation.d(),
                e.x,
                e.y,
                e.vertices[0],
                e.vertices[1],
                faces.join(" "),
                e.orientation.face_sign()
            );
        }
        out
    }
}

/// Squeezing of a single mode. `Infinite` is the ideal code.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Squeezing {
    Finite(f64),
    Infinite,
}

impl Squeezing {
    /// `e^{-2r}`, zero in the ideal limit.
    pub fn epsilon(self) -> f64 {
        match self {
            Squeezing::Finite(r) => (-2.0 * r).exp(),
            Squeezing::Infinite => 0.0,
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Squeezing::Finite(r) => Some(r),
            Squeezing::Infinite => None,
        }
    }

    fn check(self) -> Result<Self, LatticeError> {
        match self {
            Squeezing::Finite(r) if !(r.is_finite() && r >= 0.0) => {
                Err(LatticeError::BadSqueezing(r))
            }
            s => Ok(s),
        }
    }
}

impl Serialize for Squeezing {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Squeezing::Finite(r) => s.serialize_f64(*r),
            Squeezing::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Squeezing {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Int(i64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(r) => Ok(Squeezing::Finite(r)),
            Raw::Int(r) => Ok(Squeezing::Finite(r as f64)),
            Raw::Text(t) if matches!(t.as_str(), "inf" | "infinite" | "ideal") => {
                Ok(Squeezing::Infinite)
            }
            Raw::Text(t) => Err(serde::de::Error::custom(format!(
                "expected a number or \"inf\", got `{t}`"
            ))),
        }
    }
}

/// Per-mode squeezing with a default for modes not listed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SqueezingMap {
    pub default: Squeezing,
    #[serde(default, with = "mode_keys")]
    pub modes: BTreeMap<usize, Squeezing>,
}

impl SqueezingMap {
    pub fn uniform(default: Squeezing) -> Self {
        SqueezingMap {
            default,
            modes: BTreeMap::new(),
        }
    }

    pub fn ideal() -> Self {
        Self::uniform(Squeezing::Infinite)
    }

    pub fn with_mode(mut self, mode: usize, r: Squeezing) -> Self {
        self.modes.insert(mode, r);
        self
    }

    pub fn get(&self, mode: usize) -> Squeezing {
        self.modes.get(&mode).copied().unwrap_or(self.default)
    }

    pub fn epsilon(&self, mode: usize) -> f64 {
        self.get(mode).epsilon()
    }

    pub fn is_all_finite(&self) -> bool {
        self.default.finite().is_some() && self.modes.values().all(|s| s.finite().is_some())
    }

    pub fn is_ideal(&self) -> bool {
        self.default == Squeezing::Infinite && self.modes.values().all(|s| *s == Squeezing::Infinite)
    }

    pub fn validate(&self, spec: &LatticeSpec) -> Result<(), LatticeError> {
        self.default.check()?;
        for (&m, &r) in &self.modes {
            if m >= spec.num_modes() {
                return Err(LatticeError::UnknownMode(m));
            }
            r.check()?;
        }
        Ok(())
    }
}

// TOML tables only have string keys.
mod mode_keys {
    use super::Squeezing;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use std::collections::BTreeMap;

    pub fn serialize<S: Serializer>(
        map: &BTreeMap<usize, Squeezing>,
        s: S,
    ) -> Result<S::Ok, S::Error> {
        let as_str: BTreeMap<String, Squeezing> =
            map.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        as_str.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> Result<BTreeMap<usize, Squeezing>, D::Error> {
        let raw = BTreeMap::<String, Squeezing>::deserialize(d)?;
        raw.into_iter()
            .map(|(k, v)| {
                k.trim()
                    .parse::<usize>()
                    .map(|k| (k, v))
                    .map_err(|_| serde::de::Error::custom(format!("bad mode index `{k}`")))
            })
            .collect()
    }
}

/// On-disk lattice description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeFile {
    pub width: usize,
    pub height: usize,
    pub boundary: Boundary,
    pub squeezing: SqueezingMap,
}

impl LatticeFile {
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("lattice file serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self, LatticeError> {
        toml::from_str(text).map_err(|e| LatticeError::File(e.to_string()))
    }

    pub fn build(&self) -> Result<(LatticeSpec, SqueezingMap), LatticeError> {
        let spec = build_lattice(self.width, self.height, self.boundary)?;
        self.squeezing.validate(&spec)?;
        Ok((spec, self.squeezing.clone()))
    }
}

/// Symmetric 0/1 adjacency of a cluster graph (unit edge weight, no self loops).
#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencyMatrix(DMatrix<f64>);

impl AdjacencyMatrix {
    pub fn new(m: DMatrix<f64>) -> Option<Self> {
        let n = m.nrows();
        if m.ncols() != n {
            return None;
        }
        for i in 0..n {
            if m[(i, i)] != 0.0 {
                return None;
            }
            for j in 0..i {
                if m[(i, j)] != m[(j, i)] || !(m[(i, j)] == 0.0 || m[(i, j)] == 1.0) {
                    return None;
                }
            }
        }
        Some(AdjacencyMatrix(m))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.0.nrows() == 0
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&j| self.0[(i, j)] != 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementPattern {
    pub measurements: Vec<(usize, Quadrature)>,
    pub surviving: Vec<usize>,
    /// Apply a Fourier transform to every surviving mode afterwards.
    pub fourier_on_survivors: bool,
}

/// Role of a node in the precursor cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClusterNode {
    Edge(usize),
    Vertex(usize),
    Face(usize),
}

/// Node `i < E` is edge mode `i`; vertex ancillas follow, then face ancillas.
pub fn cluster_node(spec: &LatticeSpec, i: usize) -> ClusterNode {
    let e = spec.num_modes();
    let v = spec.num_vertices();
    if i < e {
        ClusterNode::Edge(i)
    } else if i < e + v {
        ClusterNode::Vertex(i - e)
    } else {
        ClusterNode::Face(i - e - v)
    }
}

/// The precursor square cluster: the lattice refined by a factor of two, so
/// every edge mode is linked to its two end vertices and its adjacent faces.
/// Vertex ancillas are measured in momentum (leaving `Σ x` over each star) and
/// face ancillas in position (which simply detaches them). The closing Fourier
/// transform turns these into star `Σ p` and plaquette `Σ ±x` nullifiers.
pub fn cluster_graph(spec: &LatticeSpec) -> (AdjacencyMatrix, MeasurementPattern) {
    let e = spec.num_modes();
    let v = spec.num_vertices();
    let n = e + v + spec.num_faces();
    let mut a = DMatrix::<f64>::zeros(n, n);
    for edge in &spec.edges {
        for &vert in &edge.vertices {
            a[(edge.index, e + vert)] = 1.0;
            a[(e + vert, edge.index)] = 1.0;
        }
        for &f in &edge.faces {
            a[(edge.index, e + v + f)] = 1.0;
            a[(e + v + f, edge.index)] = 1.0;
        }
    }
    let mut measurements = Vec::with_capacity(n - e);
    measurements.extend((0..v).map(|i| (e + i, Quadrature::Momentum)));
    measurements.extend((0..spec.num_faces()).map(|i| (e + v + i, Quadrature::Position)));
    (
        AdjacencyMatrix(a),
        MeasurementPattern {
            measurements,
            surviving: (0..e).collect(),
            fourier_on_survivors: true,
        },
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StabKind {
    Star,
    Plaquette,
}

/// A linear nullifier `offset + Σ_j (α_j x_j + β_j p_j)`; its stabilizer is
/// `exp(-i θ g)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilizerGen {
    pub kind: StabKind,
    pub site: usize,
    pub offset: Complex64,
    /// mode → (α, β)
    pub coeffs: BTreeMap<usize, (Complex64, Complex64)>,
}

impl StabilizerGen {
    pub fn alpha(&self, mode: usize) -> Complex64 {
        self.coeffs.get(&mode).map_or(Complex64::new(0.0, 0.0), |c| c.0)
    }

    pub fn beta(&self, mode: usize) -> Complex64 {
        self.coeffs.get(&mode).map_or(Complex64::new(0.0, 0.0), |c| c.1)
    }

    /// Canonical pairing `Σ_j (α_j β'_j − β_j α'_j)`; `[g, g'] = i · pairing`.
    pub fn pairing(&self, other: &StabilizerGen) -> Complex64 {
        self.coeffs
            .iter()
            .filter_map(|(m, &(a, b))| {
                other.coeffs.get(m).map(|&(a2, b2)| a * b2 - b * a2)
            })
            .sum()
    }
}

/// One star generator per vertex followed by one plaquette generator per face.
pub fn code_generators(
    spec: &LatticeSpec,
    squeezing: &SqueezingMap,
) -> Result<Vec<StabilizerGen>, LatticeError> {
    squeezing.validate(spec)?;
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let mut gens = Vec::with_capacity(spec.num_vertices() + spec.num_faces());
    for (v, star) in spec.stars.iter().enumerate() {
        let mut coeffs = BTreeMap::new();
        for &e in star {
            // doubled edges on a 2-wide torus hit the same star twice
            coeffs
                .entry(e)
                .and_modify(|c: &mut (Complex64, Complex64)| c.1 += one)
                .or_insert((zero, one));
        }
        gens.push(StabilizerGen {
            kind: StabKind::Star,
            site: v,
            offset: zero,
            coeffs,
        });
    }
    for face in &spec.faces {
        let mut coeffs = BTreeMap::new();
        for (j, &e) in face.boundary.iter().enumerate() {
            let sign = FACE_SIGNS[j];
            let alpha = Complex64::new(sign, 0.0);
            let beta = Complex64::new(0.0, -squeezing.epsilon(e) * sign);
            coeffs
                .entry(e)
                .and_modify(|c: &mut (Complex64, Complex64)| {
                    c.0 += alpha;
                    c.1 += beta;
                })
                .or_insert((alpha, beta));
        }
        gens.push(StabilizerGen {
            kind: StabKind::Plaquette,
            site: face.id,
            offset: zero,
            coeffs,
        });
    }
    Ok(gens)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommutationReport {
    /// `(i, j, pairing)` for every generator pair `i < j`.
    pub pairs: Vec<(usize, usize, Complex64)>,
}

impl CommutationReport {
    pub fn max_abs(&self) -> f64 {
        self.pairs.iter().map(|p| p.2.norm()).fold(0.0, f64::max)
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        self.max_abs() <= tol
    }

    pub fn offending(&self, tol: f64) -> impl Iterator<Item = &(usize, usize, Complex64)> {
        self.pairs.iter().filter(move |p| p.2.norm() > tol)
    }
}

pub fn validate_code(_spec: &LatticeSpec, gens: &[StabilizerGen]) -> CommutationReport {
    let mut pairs = Vec::with_capacity(gens.len() * gens.len().saturating_sub(1) / 2);
    for i in 0..gens.len() {
        for j in i + 1..gens.len() {
            pairs.push((i, j, gens[i].pairing(&gens[j])));
        }
    }
    CommutationReport { pairs }
}
