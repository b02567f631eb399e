//! Anyon bookkeeping on top of the code state.
//!
//! Labels are staggered: an anyon's label is the raw nullifier violation at its
//! site times the sublattice sign of the site. With that convention a `Z(s)`
//! on an edge produces `e(+s)` on the even vertex and `e(−s)` on the odd one,
//! labels are conserved when anyons move, and fusion adds labels.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::gaussian::{prepare_code_ground_state, EngineError, GaussianGraphState};
use crate::lattice::{
    code_generators, Boundary, LatticeError, LatticeSpec, Orientation, Squeezing, SqueezingMap,
    StabKind, StabilizerGen,
};
use crate::wh::{
    commutation_scalar, commute_through_quadratic, stabilizer_word, Factor, QuadraticGate, Scalar,
    WHWord,
};

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum AnyonKind {
    /// Vertex excitation, created by `Z(s)`.
    E,
    /// Face excitation, created by `X(t)`.
    M,
}

impl AnyonKind {
    fn stab(self) -> StabKind {
        match self {
            AnyonKind::E => StabKind::Star,
            AnyonKind::M => StabKind::Plaquette,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnyonRecord {
    pub id: usize,
    pub kind: AnyonKind,
    /// Vertex id for `E`, face id for `M`.
    pub site: usize,
    pub label: Complex64,
    pub edge: usize,
    pub orientation: Orientation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BraidResult {
    pub phase: Complex64,
    /// `ln |scalar|`.
    pub log_modulus: f64,
    #[serde(serialize_with = "ser_scalar")]
    pub scalar: Scalar,
    /// Displacements left over after removing stabilizers from the loop,
    /// as `(mode, t, s)` of `Z(t) X(s)`.
    pub residual_displacements: Vec<(usize, Complex64, Complex64)>,
    pub moved: AnyonRecord,
    pub enclosed: Vec<AnyonRecord>,
}

fn ser_scalar<S: serde::Serializer>(s: &Scalar, ser: S) -> Result<S::Ok, S::Error> {
    let v = s.value();
    (v.re, v.im).serialize(ser)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnyonError {
    #[error("edge {0} does not exist")]
    UnknownEdge(usize),
    #[error("no anyon with id {0}")]
    UnknownRecord(usize),
    #[error("mode {0} carries an unresolved cubic residue")]
    CubicResidue(usize),
    #[error("the numeric engine only takes real displacements")]
    ComplexAmount,
    #[error("path is disconnected at step {step} (edge {edge})")]
    DisconnectedPath { step: usize, edge: usize },
    #[error("path step {step} leaves the lattice through boundary edge {edge}")]
    OffLattice { step: usize, edge: usize },
    #[error("loop does not return to its start")]
    OpenPath,
    #[error("loop is not a product of stabilizers (residual {0:.3e})")]
    NonContractible(f64),
    #[error("cannot fuse {0:?} with {1:?}")]
    KindMismatch(AnyonKind, AnyonKind),
    #[error("staggered labels need even width and height on a torus")]
    NonBipartite,
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Which engines a context drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
pub enum EngineMode {
    #[default]
    Symbolic,
    Numeric,
    Both,
}

/// Violation of every generator, stars first.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViolationTable {
    pub stars: Vec<Complex64>,
    pub plaquettes: Vec<Complex64>,
}

impl ViolationTable {
    pub fn get(&self, kind: StabKind, site: usize) -> Complex64 {
        match kind {
            StabKind::Star => self.stars[site],
            StabKind::Plaquette => self.plaquettes[site],
        }
    }

    pub fn max_abs_diff(&self, other: &ViolationTable) -> f64 {
        self.stars
            .iter()
            .zip(&other.stars)
            .chain(self.plaquettes.iter().zip(&other.plaquettes))
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn nonzero(&self, tol: f64) -> Vec<(StabKind, usize, Complex64)> {
        let mut out = Vec::new();
        for (i, v) in self.stars.iter().enumerate() {
            if v.norm() > tol {
                out.push((StabKind::Star, i, *v));
            }
        }
        for (i, v) in self.plaquettes.iter().enumerate() {
            if v.norm() > tol {
                out.push((StabKind::Plaquette, i, *v));
            }
        }
        out
    }

    /// `kind,site,re,im`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,site,re,im\n");
        for (k, v) in self.stars.iter().enumerate() {
            out.push_str(&format!("star,{k},{},{}\n", v.re, v.im));
        }
        for (k, v) in self.plaquettes.iter().enumerate() {
            out.push_str(&format!("plaquette,{k},{},{}\n", v.re, v.im));
        }
        out
    }
}

/// A code state with its anyon ledger.
#[derive(Debug, Clone)]
pub struct Context {
    pub spec: LatticeSpec,
    pub squeezing: SqueezingMap,
    pub generators: Vec<StabilizerGen>,
    /// Product of every displacement applied to the ground state.
    pub applied: WHWord,
    pub numeric: Option<GaussianGraphState>,
    pub records: Vec<AnyonRecord>,
    pub braids: Vec<BraidResult>,
    /// Modes holding a cubic residue; anyon operations refuse to touch them.
    pub cubic_modes: BTreeSet<usize>,
    /// Squeezers `P(η)` applied to the code state, kept to the left of
    /// `applied`: the state is `Π P · applied |ψ⟩`.
    pub front: BTreeMap<usize, f64>,
    /// Conjugated form of the last displacement that passed a squeezer.
    pub last_extra: Option<WHWord>,
    next_id: usize,
}

impl Context {
    /// Prepares the ground state. The numeric engine needs finite squeezing
    /// everywhere; the symbolic engine always runs.
    pub fn new(
        spec: LatticeSpec,
        squeezing: SqueezingMap,
        mode: EngineMode,
    ) -> Result<Self, AnyonError> {
        if !spec.is_bipartite() {
            return Err(AnyonError::NonBipartite);
        }
        squeezing.validate(&spec)?;
        let generators = code_generators(&spec, &squeezing)?;
        let numeric = match mode {
            EngineMode::Symbolic => None,
            EngineMode::Numeric | EngineMode::Both => {
                Some(prepare_code_ground_state(&spec, &squeezing)?)
            }
        };
        Ok(Context {
            spec,
            squeezing,
            generators,
            applied: WHWord::identity(),
            numeric,
            records: Vec::new(),
            braids: Vec::new(),
            cubic_modes: BTreeSet::new(),
            front: BTreeMap::new(),
            last_extra: None,
            next_id: 0,
        })
    }

    pub fn record(&self, id: usize) -> Result<&AnyonRecord, AnyonError> {
        self.records
            .iter()
            .find(|r| r.id == id)
            .ok_or(AnyonError::UnknownRecord(id))
    }

    fn record_mut(&mut self, id: usize) -> Result<&mut AnyonRecord, AnyonError> {
        self.records
            .iter_mut()
            .find(|r| r.id == id)
            .ok_or(AnyonError::UnknownRecord(id))
    }

    fn parity(&self, kind: AnyonKind, site: usize) -> f64 {
        match kind {
            AnyonKind::E => self.spec.vertex_parity(site),
            AnyonKind::M => self.spec.face_parity(site),
        }
    }

    /// Applies one displacement to both engines.
    pub fn apply(&mut self, f: Factor) -> Result<(), AnyonError> {
        let mode = f.mode();
        if mode >= self.spec.num_modes() {
            return Err(AnyonError::UnknownEdge(mode));
        }
        if let Some(st) = self.numeric.as_mut() {
            match f {
                Factor::Z { t, .. } if t.im != 0.0 => return Err(AnyonError::ComplexAmount),
                Factor::X { s, .. } if s.im != 0.0 => return Err(AnyonError::ComplexAmount),
                Factor::Z { t, .. } => st.displace_z(mode, t.re)?,
                Factor::X { s, .. } => st.displace_x(mode, s.re)?,
            }
        }
        let mut word = WHWord::single(f);
        if let Some(&eta) = self.front.get(&mode) {
            // D P = P (P† D P)
            word = commute_through_quadratic(&word, QuadraticGate::Squeeze { mode, eta }).word();
            self.last_extra = Some(word.clone());
        }
        self.applied = word.compose(&self.applied);
        Ok(())
    }

    /// Applies `P(η)` to `mode` of the code state. Later displacements on the
    /// mode are rewritten as `P† D P` in the symbolic word.
    pub fn squeeze_mode(&mut self, mode: usize, eta: f64) -> Result<(), AnyonError> {
        if mode >= self.spec.num_modes() {
            return Err(AnyonError::UnknownEdge(mode));
        }
        if !eta.is_finite() {
            return Err(AnyonError::Engine(EngineError::NonFinite("squeezing")));
        }
        if eta == 0.0 {
            return Ok(());
        }
        if let Some(st) = self.numeric.as_mut() {
            st.apply_gate(QuadraticGate::Squeeze { mode, eta })?;
        }
        // P W = (P W P†) P: keep the word in the frame left of the squeezers.
        self.applied = commute_through_quadratic(
            &self.applied,
            QuadraticGate::Squeeze { mode, eta: -eta },
        )
        .word();
        *self.front.entry(mode).or_insert(0.0) += eta;
        Ok(())
    }

    /// Generators as seen by the physical state: `P g P†` for every front
    /// squeezer, i.e. `α_k → α_k − η β_k`.
    pub fn physical_generators(&self) -> Vec<StabilizerGen> {
        let mut gens = self.generators.clone();
        for g in &mut gens {
            for (m, (alpha, beta)) in g.coeffs.iter_mut() {
                if let Some(&eta) = self.front.get(m) {
                    *alpha -= *beta * eta;
                }
            }
        }
        gens
    }

    /// First moments `(mean_x, mean_p)` of every edge mode predicted by the
    /// symbolic word, after the front squeezers.
    pub fn predicted_moments(&self) -> Vec<(f64, f64)> {
        let mut out = vec![(0.0, 0.0); self.spec.num_modes()];
        for (&m, &(t, s)) in &self.applied.modes {
            out[m] = (s.re, t.re);
        }
        for (&m, &eta) in &self.front {
            out[m].1 += eta * out[m].0;
        }
        out
    }

    /// Largest difference between predicted and numeric first moments.
    pub fn moment_mismatch(&self) -> Option<f64> {
        let st = self.numeric.as_ref()?;
        let pred = self.predicted_moments();
        let mut worst = 0.0f64;
        for (m, (px, pp)) in pred.iter().enumerate() {
            let (x, p) = st.mean(m).ok()?;
            worst = worst.max((x - px).abs()).max((p - pp).abs());
        }
        Some(worst)
    }

    /// Applies `Z(s)` (e-pair) or `X(t)` (m-pair) on `edge` and returns the two
    /// records, even site first.
    pub fn create_pair(
        &mut self,
        kind: AnyonKind,
        edge: usize,
        amount: Complex64,
    ) -> Result<[AnyonRecord; 2], AnyonError> {
        let e = self
            .spec
            .edges
            .get(edge)
            .ok_or(AnyonError::UnknownEdge(edge))?
            .clone();
        if self.cubic_modes.contains(&edge) {
            return Err(AnyonError::CubicResidue(edge));
        }
        if self.numeric.is_some() && amount.im != 0.0 {
            return Err(AnyonError::ComplexAmount);
        }
        let (sites, raw): (Vec<usize>, Complex64) = match kind {
            AnyonKind::E => {
                self.apply(Factor::Z { mode: edge, t: amount })?;
                (e.vertices.to_vec(), amount)
            }
            AnyonKind::M => {
                self.apply(Factor::X { mode: edge, s: amount })?;
                (e.faces.clone(), amount * e.orientation.face_sign())
            }
        };
        let mut sites = sites;
        sites.sort_by(|a, b| {
            self.parity(kind, *b)
                .partial_cmp(&self.parity(kind, *a))
                .unwrap()
        });
        let mut out = Vec::with_capacity(2);
        for &site in &sites {
            let rec = AnyonRecord {
                id: self.next_id,
                kind,
                site,
                label: raw * self.parity(kind, site),
                edge,
                orientation: e.orientation,
            };
            self.next_id += 1;
            out.push(rec);
        }
        // A boundary edge of a planar patch touches a single face.
        while out.len() < 2 {
            out.push(AnyonRecord {
                id: self.next_id,
                kind,
                site: usize::MAX,
                label: ZERO,
                edge,
                orientation: e.orientation,
            });
            self.next_id += 1;
        }
        for r in &out {
            if r.site != usize::MAX {
                self.records.push(r.clone());
            }
        }
        Ok([out[0].clone(), out[1].clone()])
    }

    /// Violation table from the symbolic word, via the stabilizer factor
    /// `e^{-iθv}` at `θ = 1`.
    pub fn detect_symbolic(&self) -> ViolationTable {
        let mut stars = vec![ZERO; self.spec.num_vertices()];
        let mut plaquettes = vec![ZERO; self.spec.num_faces()];
        for g in &self.generators {
            let c = crate::wh::conjugate_by_stabilizer(&self.applied, g, 1.0);
            let v = I * c.log;
            match g.kind {
                StabKind::Star => stars[g.site] = v,
                StabKind::Plaquette => plaquettes[g.site] = v,
            }
        }
        ViolationTable { stars, plaquettes }
    }

    /// Violation table from nullifier expectations of the numeric state.
    pub fn detect_numeric(&self) -> Option<Result<ViolationTable, AnyonError>> {
        let st = self.numeric.as_ref()?;
        let mut stars = vec![ZERO; self.spec.num_vertices()];
        let mut plaquettes = vec![ZERO; self.spec.num_faces()];
        for g in &self.physical_generators() {
            let v = match st.nullifier_stats(g) {
                Ok((e, _)) => e,
                Err(err) => return Some(Err(err.into())),
            };
            match g.kind {
                StabKind::Star => stars[g.site] = v,
                StabKind::Plaquette => plaquettes[g.site] = v,
            }
        }
        Some(Ok(ViolationTable { stars, plaquettes }))
    }

    /// Table predicted by the ledger: staggered record labels, plus the
    /// finite-squeezing imaginary terms `β_j t_j` that `Z` displacements leave
    /// on plaquettes.
    pub fn ledger_table(&self) -> ViolationTable {
        let mut stars = vec![ZERO; self.spec.num_vertices()];
        let mut plaquettes = vec![ZERO; self.spec.num_faces()];
        for r in &self.records {
            let raw = r.label * self.parity(r.kind, r.site);
            match r.kind {
                AnyonKind::E => stars[r.site] += raw,
                AnyonKind::M => plaquettes[r.site] += raw,
            }
        }
        for g in self.generators.iter().filter(|g| g.kind == StabKind::Plaquette) {
            for (&m, &(_, beta)) in &g.coeffs {
                plaquettes[g.site] += beta * self.applied.t(m);
            }
        }
        ViolationTable { stars, plaquettes }
    }

    /// Largest mismatch between the ledger and the symbolic and numeric tables.
    pub fn ledger_mismatch(&self) -> Result<(f64, Option<f64>), AnyonError> {
        let ledger = self.ledger_table();
        let sym = self.detect_symbolic().max_abs_diff(&ledger);
        let num = match self.detect_numeric() {
            Some(t) => Some(t?.max_abs_diff(&ledger)),
            None => None,
        };
        Ok((sym, num))
    }

    /// Displacements that move anyon `id` along `path` (without applying them)
    /// and the site it ends on.
    fn path_factors(
        &self,
        id: usize,
        path: &[usize],
    ) -> Result<(Vec<Factor>, usize), AnyonError> {
        let rec = self.record(id)?.clone();
        let mut site = rec.site;
        let mut out = Vec::with_capacity(path.len());
        for (step, &edge) in path.iter().enumerate() {
            let e = self
                .spec
                .edges
                .get(edge)
                .ok_or(AnyonError::UnknownEdge(edge))?;
            if self.cubic_modes.contains(&edge) {
                return Err(AnyonError::CubicResidue(edge));
            }
            let par = self.parity(rec.kind, site);
            match rec.kind {
                AnyonKind::E => {
                    let next = self
                        .spec
                        .other_vertex(edge, site)
                        .ok_or(AnyonError::DisconnectedPath { step, edge })?;
                    out.push(Factor::Z {
                        mode: edge,
                        t: -par * rec.label,
                    });
                    site = next;
                }
                AnyonKind::M => {
                    if !e.faces.contains(&site) {
                        return Err(AnyonError::DisconnectedPath { step, edge });
                    }
                    let next = self
                        .spec
                        .other_face(edge, site)
                        .ok_or(AnyonError::OffLattice { step, edge })?;
                    out.push(Factor::X {
                        mode: edge,
                        s: -e.orientation.face_sign() * par * rec.label,
                    });
                    site = next;
                }
            }
        }
        Ok((out, site))
    }

    /// Moves a record along `path`, applying its displacement string.
    pub fn move_anyon(&mut self, id: usize, path: &[usize]) -> Result<AnyonRecord, AnyonError> {
        let (factors, end) = self.path_factors(id, path)?;
        for f in factors {
            self.apply(f)?;
        }
        let rec = self.record_mut(id)?;
        rec.site = end;
        Ok(rec.clone())
    }

    /// Default path between two sites: the x leg first, then the y leg, each
    /// going the short way round (ties go in the positive direction).
    pub fn default_path(&self, kind: AnyonKind, from: usize, to: usize) -> Vec<usize> {
        let ((fx, fy), (tx, ty)) = match kind {
            AnyonKind::E => (self.spec.vertex_coords(from), self.spec.vertex_coords(to)),
            AnyonKind::M => (self.spec.face_coords(from), self.spec.face_coords(to)),
        };
        let (nx, ny) = match kind {
            AnyonKind::E => (self.spec.width, self.spec.height),
            AnyonKind::M => self.spec.face_dims(),
        };
        let torus = self.spec.boundary == Boundary::Toroidal;
        let steps = |a: usize, b: usize, n: usize| -> isize {
            let d = b as isize - a as isize;
            if !torus {
                return d;
            }
            let fwd = d.rem_euclid(n as isize);
            if fwd <= n as isize - fwd {
                fwd
            } else {
                fwd - n as isize
            }
        };
        let (dx, dy) = (steps(fx, tx, nx), steps(fy, ty, ny));
        let (mut x, mut y) = (fx as isize, fy as isize);
        let mut path = Vec::new();
        for _ in 0..dx.abs() {
            let edge = match (kind, dx > 0) {
                (AnyonKind::E, true) => self.spec.horizontal_edge(x, y),
                (AnyonKind::E, false) => self.spec.horizontal_edge(x - 1, y),
                (AnyonKind::M, true) => self.spec.vertical_edge(x + 1, y),
                (AnyonKind::M, false) => self.spec.vertical_edge(x, y),
            };
            path.push(edge.expect("step stays on the lattice"));
            x += dx.signum();
        }
        for _ in 0..dy.abs() {
            let edge = match (kind, dy > 0) {
                (AnyonKind::E, true) => self.spec.vertical_edge(x, y),
                (AnyonKind::E, false) => self.spec.vertical_edge(x, y - 1),
                (AnyonKind::M, true) => self.spec.horizontal_edge(x, y + 1),
                (AnyonKind::M, false) => self.spec.horizontal_edge(x, y),
            };
            path.push(edge.expect("step stays on the lattice"));
            y += dy.signum();
        }
        path
    }

    /// Moves `b` onto `a` along the default path and merges the labels. A
    /// vanishing sum leaves the vacuum, which is dropped from the ledger.
    pub fn fuse(&mut self, a: usize, b: usize) -> Result<AnyonRecord, AnyonError> {
        self.fuse_with(a, b, true)
    }

    /// [`fuse`](Self::fuse), optionally keeping a vacuum result in the ledger.
    pub fn fuse_with(
        &mut self,
        a: usize,
        b: usize,
        drop_vacuum: bool,
    ) -> Result<AnyonRecord, AnyonError> {
        let ra = self.record(a)?.clone();
        let rb = self.record(b)?.clone();
        if ra.kind != rb.kind {
            return Err(AnyonError::KindMismatch(ra.kind, rb.kind));
        }
        let path = self.default_path(rb.kind, rb.site, ra.site);
        self.move_anyon(b, &path)?;
        self.records.retain(|r| r.id != b);
        let rec = self.record_mut(a)?;
        rec.label += rb.label;
        let out = rec.clone();
        if drop_vacuum && out.label.norm() < 1e-12 {
            self.records.retain(|r| r.id != a);
        }
        Ok(out)
    }

    /// Carries anyon `id` around the closed `path` and returns the scalar the
    /// state picks up.
    ///
    /// With `H` the displacements applied so far and `L` the loop string,
    /// `L H|ψ⟩ = c H L|ψ⟩`. The loop is split as `L = R · Π_g S_g` with `S_g`
    /// stabilizer words fitted by least squares, so `L|ψ⟩ = R|ψ⟩`. Finally
    /// `H R = e^κ R H` puts the residual displacement `R` in front:
    /// `L H|ψ⟩ = c e^κ scalar(R) R₀ H|ψ⟩`.
    pub fn braid(&mut self, id: usize, path: &[usize]) -> Result<BraidResult, AnyonError> {
        let rec = self.record(id)?.clone();
        let (factors, end) = self.path_factors(id, path)?;
        if end != rec.site {
            return Err(AnyonError::OpenPath);
        }
        let mut l = WHWord::identity();
        for f in &factors {
            l = WHWord::single(*f).compose(&l);
        }
        let h = self.applied.clone();
        let c_comm = commutation_scalar(&l, &h);
        let (coeffs, residual_norm) = self.decompose(&l, rec.kind);
        let scale = l
            .modes
            .values()
            .map(|(t, s)| t.norm().max(s.norm()))
            .fold(1.0, f64::max);
        if residual_norm > 1e-9 * scale {
            return Err(AnyonError::NonContractible(residual_norm));
        }
        let mut stab = WHWord::identity();
        for (g, eta) in &coeffs {
            stab = stab.compose(&stabilizer_word(&self.generators[*g], *eta));
        }
        let mut r = l.compose(&stab.inverse());
        // Fitted parameters reproduce L only to rounding; drop that dust.
        for (t, s) in r.modes.values_mut() {
            if t.norm() <= 1e-12 * scale {
                *t = ZERO;
            }
            if s.norm() <= 1e-12 * scale {
                *s = ZERO;
            }
        }
        r.modes.retain(|_, (t, s)| *t != ZERO || *s != ZERO);
        let r_scalar = r.scalar;
        let r0 = WHWord {
            scalar: Scalar::ONE,
            modes: r.modes.clone(),
        };
        let kappa = commutation_scalar(&h, &r0);
        let total = c_comm * kappa * r_scalar;

        for f in factors {
            self.apply(f)?;
        }
        let other = match rec.kind {
            AnyonKind::E => AnyonKind::M,
            AnyonKind::M => AnyonKind::E,
        };
        // On a torus the fit is unique only up to the staggered combination
        // of all generators; staggering and removing the median picks the
        // smaller side of the loop.
        let staggered: Vec<(usize, f64)> = coeffs
            .iter()
            .filter(|(g, _)| self.generators[*g].kind == other.stab())
            .map(|(g, eta)| {
                let site = self.generators[*g].site;
                (site, eta * self.parity(other, site))
            })
            .collect();
        let mut values: Vec<f64> = staggered.iter().map(|v| v.1).collect();
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let background = values.get(values.len() / 2).copied().unwrap_or(0.0);
        let enclosed_sites: BTreeSet<usize> = staggered
            .iter()
            .filter(|(_, v)| (v - background).abs() > 1e-9 * scale)
            .map(|(site, _)| *site)
            .collect();
        let enclosed = self
            .records
            .iter()
            .filter(|r| r.kind == other && enclosed_sites.contains(&r.site))
            .cloned()
            .collect();
        let result = BraidResult {
            phase: total.phase(),
            log_modulus: total.log_modulus(),
            scalar: total,
            residual_displacements: r0.modes.iter().map(|(m, (t, s))| (*m, *t, *s)).collect(),
            moved: rec,
            enclosed,
        };
        self.braids.push(result.clone());
        Ok(result)
    }

    /// Least-squares stabilizer parameters `θ_g` whose ideal parts reproduce
    /// the displacement `l`, and the residual norm of the fit. X content is
    /// matched by stars (`s_j = Σ_v θ_v`), Z content by plaquettes
    /// (`t_j = −Σ_f σ_j θ_f`).
    fn decompose(&self, l: &WHWord, kind: AnyonKind) -> (Vec<(usize, f64)>, f64) {
        let n = self.spec.num_modes();
        let stab = kind.stab();
        let gens: Vec<usize> = (0..self.generators.len())
            .filter(|&g| self.generators[g].kind != stab)
            .collect();
        // An e loop (Z string) is matched by plaquettes; an m loop by stars.
        let mut a = DMatrix::<f64>::zeros(n, gens.len());
        let mut b = DVector::<f64>::zeros(n);
        let mut imag = 0.0f64;
        for (col, &g) in gens.iter().enumerate() {
            for (&m, &(alpha, beta)) in &self.generators[g].coeffs {
                a[(m, col)] = match kind {
                    AnyonKind::E => -alpha.re,
                    AnyonKind::M => beta.re,
                };
            }
        }
        let mut other = 0.0f64;
        for (&m, &(t, s)) in &l.modes {
            let (want, stray) = match kind {
                AnyonKind::E => (t, s),
                AnyonKind::M => (s, t),
            };
            b[m] = want.re;
            imag = imag.max(want.im.abs());
            other = other.max(stray.norm());
        }
        if gens.is_empty() {
            return (Vec::new(), b.norm());
        }
        let svd = a.clone().svd(true, true);
        let theta = svd
            .solve(&b, 1e-10)
            .unwrap_or_else(|_| DVector::zeros(gens.len()));
        let resid = (&a * &theta - &b).norm() + imag + other;
        let coeffs = gens
            .iter()
            .zip(theta.iter())
            .map(|(&g, &t)| (g, t))
            .collect();
        (coeffs, resid)
    }

    /// Sum of labels per kind.
    pub fn total_charge(&self) -> BTreeMap<AnyonKind, Complex64> {
        let mut out = BTreeMap::new();
        for r in &self.records {
            *out.entry(r.kind).or_insert(ZERO) += r.label;
        }
        out
    }
}

/// `exp[i(s + itΣ_j (−1)^{j+1} e^{−2r_j}) t]` for the four edges of a
/// plaquette loop. Infinite entries contribute nothing.
pub fn topological_factor(s: Complex64, t: f64, r: [Squeezing; 4]) -> Scalar {
    let alt: f64 = r
        .iter()
        .enumerate()
        .map(|(j, rj)| if j % 2 == 0 { 1.0 } else { -1.0 } * rj.epsilon())
        .sum();
    Scalar::from_log(I * (s + I * t * alt) * t)
}

/// The factor this crate's loop algebra produces for the same loop: the loop
/// string `Π Z_j(τ_j)` with `|τ_j| = t` equals `e^{Σ_j ε_j τ_j²/2} Π X_j(−iε_j τ_j)`
/// on the code state, so the modulus is `exp(t² Σ_j e^{−2r_j} / 2)`.
pub fn loop_factor(s: Complex64, t: f64, r: [Squeezing; 4]) -> Scalar {
    let sum: f64 = r.iter().map(|rj| rj.epsilon()).sum();
    Scalar::from_log(I * s * t + t * t * sum / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_lattice;

    fn ctx(w: usize, h: usize) -> Context {
        Context::new(
            build_lattice(w, h, Boundary::Toroidal).unwrap(),
            SqueezingMap::ideal(),
            EngineMode::Symbolic,
        )
        .unwrap()
    }

    #[test]
    fn odd_torus_rejected() {
        let r = Context::new(
            build_lattice(3, 4, Boundary::Toroidal).unwrap(),
            SqueezingMap::ideal(),
            EngineMode::Symbolic,
        );
        assert!(matches!(r, Err(AnyonError::NonBipartite)));
    }

    #[test]
    fn e_pair_labels() {
        let mut c = ctx(4, 4);
        let [a, b] = c.create_pair(AnyonKind::E, 0, Complex64::new(1.5, 0.0)).unwrap();
        assert_eq!(a.label, Complex64::new(1.5, 0.0));
        assert_eq!(b.label, Complex64::new(-1.5, 0.0));
        assert_eq!(c.spec.vertex_parity(a.site), 1.0);
    }

    #[test]
    fn m_pair_labels_follow_orientation() {
        let mut c = ctx(4, 4);
        let t = Complex64::new(2.0, 0.0);
        let v = c.spec.vertical_edge(1, 1).unwrap();
        let [a, b] = c.create_pair(AnyonKind::M, v, t).unwrap();
        assert_eq!((a.label, b.label), (-t, t));
        let h = c.spec.horizontal_edge(1, 1).unwrap();
        let [a, b] = c.create_pair(AnyonKind::M, h, t).unwrap();
        assert_eq!((a.label, b.label), (t, -t));
    }

    #[test]
    fn zero_amount_is_vacuum() {
        let mut c = ctx(4, 4);
        let [a, b] = c.create_pair(AnyonKind::E, 3, ZERO).unwrap();
        assert_eq!((a.label, b.label), (ZERO, ZERO));
        assert!(c.records.iter().all(|r| r.label == ZERO));
        assert!(c.applied.is_identity());
    }

    #[test]
    fn fusion_adds_labels() {
        let mut c = ctx(4, 4);
        let [a, _] = c.create_pair(AnyonKind::M, 0, Complex64::new(1.5, 0.0)).unwrap();
        let far = c.spec.horizontal_edge(2, 2).unwrap();
        let [b, _] = c.create_pair(AnyonKind::M, far, Complex64::new(2.5, 0.0)).unwrap();
        let fused = c.fuse(a.id, b.id).unwrap();
        assert_eq!(fused.label, Complex64::new(4.0, 0.0));
        assert_eq!(c.ledger_mismatch().unwrap().0, 0.0);
    }

    #[test]
    fn fusing_e_with_m_fails() {
        let mut c = ctx(4, 4);
        let [a, _] = c.create_pair(AnyonKind::E, 0, Complex64::new(1.0, 0.0)).unwrap();
        let [b, _] = c.create_pair(AnyonKind::M, 5, Complex64::new(1.0, 0.0)).unwrap();
        assert!(matches!(c.fuse(a.id, b.id), Err(AnyonError::KindMismatch(..))));
    }

    #[test]
    fn non_contractible_loop_rejected() {
        let mut c = ctx(4, 4);
        let [a, _] = c.create_pair(AnyonKind::E, 0, Complex64::new(1.0, 0.0)).unwrap();
        let (x, y) = c.spec.vertex_coords(a.site);
        let around: Vec<usize> = (0..4)
            .map(|k| c.spec.vertical_edge(x as isize, y as isize + k).unwrap())
            .collect();
        assert!(matches!(c.braid(a.id, &around), Err(AnyonError::NonContractible(_))));
    }
}
