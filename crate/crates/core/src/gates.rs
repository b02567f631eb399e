//! Logical registers on anyon pairs and the gates acting on them.
//!
//! A register's value is the label of its primary anyon. A fresh register
//! holds the pair `(r, −r)` created on its home edge.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::anyons::{AnyonError, AnyonKind, Context, EngineMode};
use crate::gaussian::{EngineError, GaussianGraphState, MeasurementRecord, Outcome};
use crate::lattice::{Quadrature, StabKind};
use crate::wh::{
    commute_through_cubic, commute_through_quadratic, normal_order, Conjugation, Factor,
    GeneratorPoly, Monomial, Quad, QuadraticGate, WHWord,
};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GateError {
    #[error("unknown register `{0}`")]
    UnknownRegister(String),
    #[error("register `{0}` already exists")]
    DuplicateRegister(String),
    #[error("register `{0}` was already decoded")]
    Decoded(String),
    #[error("{op} needs registers of different kinds")]
    SameKind { op: &'static str },
    #[error("{op} needs registers of the same kind")]
    KindMismatch { op: &'static str },
    #[error("{op} needs two distinct registers")]
    SameRegister { op: &'static str },
    #[error("register `{0}` holds no anyon")]
    Vacuum(String),
    #[error("register `{0}` lives in a measured logical mode; topological gates no longer apply")]
    NotTopological(String),
    #[error("site {0} is already occupied")]
    Occupied(usize),
    #[error("edge {0} cannot host a pair")]
    BadEdge(usize),
    #[error("no free edge left for a new register")]
    NoFreeEdge,
    #[error("the cubic phase gate has no numeric model")]
    CubicNumeric,
    #[error("squeezing parameter must be finite")]
    NonFinite,
    #[error(transparent)]
    Anyon(#[from] AnyonError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// A logical mode carried by a pair of anyons.
#[derive(Debug, Clone)]
pub struct LogicalRegister {
    pub name: String,
    pub kind: AnyonKind,
    pub home_edge: usize,
    /// Record id of the anyon whose label is the logical value.
    pub primary: Option<usize>,
    pub partner: Option<usize>,
    /// Records left behind by SUM.
    pub spectators: Vec<usize>,
    /// Single-mode numeric state used once FOURIER or MEASURE is applied.
    pub logical: Option<LogicalMode>,
    pub decoded: bool,
}

/// Gaussian stand-in for `|r⟩` plus the displacement still to be undone:
/// the mode holds `correction · U |ψ⟩`.
#[derive(Debug, Clone)]
pub struct LogicalMode {
    pub state: GaussianGraphState,
    pub correction: WHWord,
    pub measured: bool,
}

impl LogicalMode {
    /// Coherent state centred on `x = value`.
    fn new(value: f64) -> Result<Self, EngineError> {
        let mut state = GaussianGraphState::empty();
        state.append_mode(0, Complex64::new(0.0, 1.0))?;
        state.displace_x(0, value)?;
        Ok(LogicalMode {
            state,
            correction: WHWord::identity(),
            measured: false,
        })
    }
}

/// Residue class of a symbolic trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TraceClass {
    /// Displacements only.
    Topological,
    Quadratic,
    Cubic,
}

/// Everything the symbolic engine knows after a run: the displacement word
/// and the generators of the non-displacement gates.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolicTrace {
    pub word: WHWord,
    pub residue: GeneratorPoly,
}

impl SymbolicTrace {
    pub fn class(&self) -> TraceClass {
        match self.residue.degree() {
            0 | 1 => TraceClass::Topological,
            2 => TraceClass::Quadratic,
            _ => TraceClass::Cubic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CzRecord {
    pub e_value: Complex64,
    pub m_value: Complex64,
    pub phase: Complex64,
    pub log_modulus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FourierRecord {
    pub measurement: MeasurementRecord,
    /// Displacement `(t, s)` of `Z(t) X(s)` still applied to the logical mode.
    pub pending: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureRecord {
    pub basis: Quadrature,
    pub raw: f64,
    /// Outcome with the pending Fourier corrections removed.
    pub corrected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecodeRecord {
    pub ledger: Complex64,
    /// Estimate from nullifier expectations when the numeric engine runs.
    pub numeric: Option<Complex64>,
}

/// Couples `mode` to a fresh momentum-squeezed ancilla with `C_Z`, measures
/// `p` on `mode` and moves the ancilla into its place. The mode then holds
/// `X(m) F` applied to its previous state, up to finite-squeezing blur.
pub fn fourier_via_measurement(
    state: &mut GaussianGraphState,
    mode: usize,
    ancilla_r: f64,
    outcome: Outcome<'_, ChaCha8Rng>,
) -> Result<MeasurementRecord, EngineError> {
    if !(ancilla_r.is_finite() && ancilla_r > 0.0) {
        return Err(EngineError::BadSqueezing(ancilla_r));
    }
    state.index_of(mode)?;
    let anc = state.labels.iter().max().map_or(0, |m| m + 1);
    state.append_mode(anc, Complex64::new(0.0, (-2.0 * ancilla_r).exp()))?;
    state.apply_gate(QuadraticGate::ControlledZ { a: mode, b: anc })?;
    let rec = state.measure_homodyne(mode, Quadrature::Momentum, outcome)?;
    state.relabel(anc, mode)?;
    Ok(rec)
}

/// `V(γ)† Z(t) X(s) V(γ)` on a single mode.
pub fn gate_cubic_symbolic(s: f64, t: f64, gamma: f64) -> Conjugation {
    let w = normal_order(&[Factor::z(0, t), Factor::x(0, s)]);
    commute_through_cubic(&w, gamma, 0)
}

/// Registers over an anyon context.
pub struct Processor {
    pub ctx: Context,
    pub engine: EngineMode,
    pub registers: Vec<LogicalRegister>,
    /// Generators of the non-displacement gates applied so far.
    pub residue: GeneratorPoly,
    /// Squeezing of Fourier ancillas.
    pub ancilla_r: f64,
    /// Set once CUBIC runs next to a numeric engine that cannot follow it.
    pub numeric_stale: bool,
    rng: ChaCha8Rng,
}

impl Processor {
    pub fn new(ctx: Context, engine: EngineMode, ancilla_r: f64, seed: u64) -> Self {
        Processor {
            ctx,
            engine,
            registers: Vec::new(),
            residue: GeneratorPoly::zero(),
            ancilla_r,
            numeric_stale: false,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn register(&self, name: &str) -> Result<&LogicalRegister, GateError> {
        self.registers
            .iter()
            .find(|r| r.name == name)
            .ok_or_else(|| GateError::UnknownRegister(name.to_string()))
    }

    fn index(&self, name: &str) -> Result<usize, GateError> {
        let i = self
            .registers
            .iter()
            .position(|r| r.name == name)
            .ok_or_else(|| GateError::UnknownRegister(name.to_string()))?;
        if self.registers[i].decoded {
            return Err(GateError::Decoded(name.to_string()));
        }
        Ok(i)
    }

    fn topological(&self, name: &str) -> Result<usize, GateError> {
        let i = self.index(name)?;
        if self.registers[i].logical.is_some() {
            return Err(GateError::NotTopological(name.to_string()));
        }
        Ok(i)
    }

    pub fn value(&self, name: &str) -> Result<Complex64, GateError> {
        let reg = self.register(name)?;
        Ok(match reg.primary {
            Some(id) => self.ctx.record(id)?.label,
            None => ZERO,
        })
    }

    pub fn trace(&self) -> SymbolicTrace {
        SymbolicTrace {
            word: self.ctx.applied.clone(),
            residue: self.residue.clone(),
        }
    }

    fn sites(&self, kind: AnyonKind, edge: usize) -> Option<Vec<usize>> {
        let e = self.ctx.spec.edges.get(edge)?;
        let sites = match kind {
            AnyonKind::E => e.vertices.to_vec(),
            AnyonKind::M => e.faces.clone(),
        };
        (sites.len() == 2 && sites[0] != sites[1]).then_some(sites)
    }

    fn occupied(&self, kind: AnyonKind, site: usize) -> bool {
        self.ctx
            .records
            .iter()
            .any(|r| r.kind == kind && r.site == site)
            || self.registers.iter().any(|r| {
                r.kind == kind
                    && self
                        .sites(kind, r.home_edge)
                        .is_some_and(|s| s.contains(&site))
            })
    }

    fn free_edge(&self, kind: AnyonKind, edge: usize) -> bool {
        !self.ctx.cubic_modes.contains(&edge)
            && self
                .sites(kind, edge)
                .is_some_and(|s| s.iter().all(|&v| !self.occupied(kind, v)))
    }

    /// First free edge on a stride-2 grid: horizontal edges at even vertex
    /// coordinates for e-pairs, at odd face coordinates for m-pairs.
    fn allocate(&self, kind: AnyonKind) -> Result<usize, GateError> {
        let (nx, ny, x0, y0) = match kind {
            AnyonKind::E => (self.ctx.spec.width, self.ctx.spec.height, 0, 0),
            AnyonKind::M => {
                let (fx, fy) = self.ctx.spec.face_dims();
                (fx, fy, 1, 1)
            }
        };
        for y in (y0..ny).step_by(2) {
            for x in (x0..nx).step_by(2) {
                if let Some(e) = self.ctx.spec.horizontal_edge(x as isize, y as isize) {
                    if self.free_edge(kind, e) {
                        return Ok(e);
                    }
                }
            }
        }
        Err(GateError::NoFreeEdge)
    }

    /// Creates the pair `(r, −r)` on `edge` (or a free edge).
    pub fn encode(
        &mut self,
        name: &str,
        kind: AnyonKind,
        value: Complex64,
        edge: Option<usize>,
    ) -> Result<&LogicalRegister, GateError> {
        if self.registers.iter().any(|r| r.name == name) {
            return Err(GateError::DuplicateRegister(name.to_string()));
        }
        let edge = match edge {
            Some(e) => {
                let sites = self.sites(kind, e).ok_or(GateError::BadEdge(e))?;
                if let Some(&s) = sites.iter().find(|&&s| self.occupied(kind, s)) {
                    return Err(GateError::Occupied(s));
                }
                e
            }
            None => self.allocate(kind)?,
        };
        let [a, b] = self.ctx.create_pair(kind, edge, value)?;
        self.registers.push(LogicalRegister {
            name: name.to_string(),
            kind,
            home_edge: edge,
            primary: Some(a.id),
            partner: Some(b.id),
            spectators: Vec::new(),
            logical: None,
            decoded: false,
        });
        Ok(self.registers.last().expect("just pushed"))
    }

    /// Creates `(s, −s)` on the home edge and fuses each half into the
    /// register's pair.
    pub fn displace(&mut self, name: &str, s: Complex64) -> Result<Complex64, GateError> {
        let i = self.index(name)?;
        if let Some(lm) = self.registers[i].logical.as_mut() {
            if s.im != 0.0 {
                return Err(AnyonError::ComplexAmount.into());
            }
            lm.state.displace_x(0, s.re)?;
            return self.value(name);
        }
        let (kind, edge) = (self.registers[i].kind, self.registers[i].home_edge);
        let [plus, minus] = self.ctx.create_pair(kind, edge, s)?;
        let reg = &self.registers[i];
        let (primary, partner) = (reg.primary, reg.partner);
        match primary {
            Some(p) => {
                self.ctx.fuse_with(p, plus.id, false)?;
            }
            None => self.registers[i].primary = Some(plus.id),
        }
        match partner {
            Some(p) => {
                self.ctx.fuse_with(p, minus.id, false)?;
            }
            None => self.registers[i].partner = Some(minus.id),
        }
        self.value(name)
    }

    /// Moves the control's primary anyon onto the target's and fuses them.
    /// The control keeps its other anyon, so `(s, t) → (−s, s + t)`; the
    /// target's old partner becomes a spectator.
    pub fn sum(&mut self, control: &str, target: &str) -> Result<(Complex64, Complex64), GateError> {
        let c = self.topological(control)?;
        let t = self.topological(target)?;
        if c == t {
            return Err(GateError::SameRegister { op: "SUM" });
        }
        let kind = self.registers[c].kind;
        if kind != self.registers[t].kind {
            return Err(GateError::KindMismatch { op: "SUM" });
        }
        if let Some(cp) = self.registers[c].primary {
            match self.registers[t].primary {
                Some(tp) => {
                    self.ctx.fuse_with(tp, cp, false)?;
                }
                None => {
                    let home = self
                        .sites(kind, self.registers[t].home_edge)
                        .expect("home edge hosts a pair");
                    let dest = self.even_site(kind, &home);
                    let from = self.ctx.record(cp)?.site;
                    let path = self.ctx.default_path(kind, from, dest);
                    self.ctx.move_anyon(cp, &path)?;
                    self.registers[t].primary = Some(cp);
                }
            }
            if let Some(p) = self.registers[t].partner.take() {
                self.registers[t].spectators.push(p);
            }
            self.registers[c].primary = self.registers[c].partner.take();
        }
        Ok((self.value(control)?, self.value(target)?))
    }

    fn even_site(&self, kind: AnyonKind, sites: &[usize]) -> usize {
        let par = |s: usize| match kind {
            AnyonKind::E => self.ctx.spec.vertex_parity(s),
            AnyonKind::M => self.ctx.spec.face_parity(s),
        };
        *sites.iter().find(|&&s| par(s) > 0.0).unwrap_or(&sites[0])
    }

    /// Carries the e-register's primary anyon once counterclockwise around the
    /// m-register's primary anyon and back to where it started.
    pub fn cz(&mut self, a: &str, b: &str) -> Result<CzRecord, GateError> {
        let ia = self.topological(a)?;
        let ib = self.topological(b)?;
        if ia == ib {
            return Err(GateError::SameRegister { op: "CZ" });
        }
        let (ie, im) = match (self.registers[ia].kind, self.registers[ib].kind) {
            (AnyonKind::E, AnyonKind::M) => (ia, ib),
            (AnyonKind::M, AnyonKind::E) => (ib, ia),
            _ => return Err(GateError::SameKind { op: "CZ" }),
        };
        let e_id = self.registers[ie]
            .primary
            .ok_or_else(|| GateError::Vacuum(self.registers[ie].name.clone()))?;
        let m_id = self.registers[im]
            .primary
            .ok_or_else(|| GateError::Vacuum(self.registers[im].name.clone()))?;
        let e_rec = self.ctx.record(e_id)?.clone();
        let m_rec = self.ctx.record(m_id)?.clone();
        let (fx, fy) = self.ctx.spec.face_coords(m_rec.site);
        let corner = self
            .ctx
            .spec
            .vertex_at(fx as isize, fy as isize)
            .expect("face corner is a vertex");
        let there = self.ctx.default_path(AnyonKind::E, e_rec.site, corner);
        let lp = self
            .ctx
            .spec
            .vertex_loop(fx as isize, fy as isize, 1, 1, true)
            .ok_or(AnyonError::OffLattice { step: 0, edge: 0 })?;
        self.ctx.move_anyon(e_id, &there)?;
        let braid = self.ctx.braid(e_id, &lp)?;
        let back: Vec<usize> = there.iter().rev().copied().collect();
        self.ctx.move_anyon(e_id, &back)?;
        Ok(CzRecord {
            e_value: e_rec.label,
            m_value: m_rec.label,
            phase: braid.phase,
            log_modulus: braid.log_modulus,
        })
    }

    /// `P(η)` on the register's home edge of the code state. Returns the
    /// generator added to the residue.
    pub fn squeeze(&mut self, name: &str, eta: f64) -> Result<GeneratorPoly, GateError> {
        if !eta.is_finite() {
            return Err(GateError::NonFinite);
        }
        let i = self.index(name)?;
        let mode = self.registers[i].home_edge;
        self.ctx.squeeze_mode(mode, eta)?;
        let g = QuadraticGate::Squeeze { mode, eta }.generator();
        if eta != 0.0 {
            self.residue.add(&g);
        }
        Ok(g)
    }

    fn logical_mode(&mut self, i: usize) -> Result<&mut LogicalMode, GateError> {
        if self.registers[i].logical.is_none() {
            let name = self.registers[i].name.clone();
            let v = self.value(&name)?;
            self.registers[i].logical = Some(LogicalMode::new(v.re)?);
        }
        Ok(self.registers[i].logical.as_mut().expect("just set"))
    }

    /// Fourier transform by measurement. The correction is returned and kept
    /// with the register; it is never applied.
    pub fn fourier(&mut self, name: &str, forced: Option<f64>) -> Result<FourierRecord, GateError> {
        let i = self.index(name)?;
        let r = self.ancilla_r;
        let home = self.registers[i].home_edge;
        let mut rng = std::mem::replace(&mut self.rng, ChaCha8Rng::seed_from_u64(0));
        let result = (|| {
            let lm = self.logical_mode(i)?;
            if lm.measured {
                return Err(GateError::Decoded(name.to_string()));
            }
            let outcome = match forced {
                Some(m) => Outcome::Forced(m),
                None => Outcome::Sample(&mut rng),
            };
            let rec = fourier_via_measurement(&mut lm.state, 0, r, outcome)?;
            // X(m) F C = X(m) (F C F†) F
            let mut c = lm.correction.clone();
            for _ in 0..3 {
                c = commute_through_quadratic(&c, QuadraticGate::Fourier { mode: 0 }).word();
            }
            lm.correction = WHWord::single(Factor::x(0, rec.outcome)).compose(&c);
            let pending = (lm.correction.t(0).re, lm.correction.s(0).re);
            Ok(FourierRecord {
                measurement: MeasurementRecord { mode: home, ..rec },
                pending,
            })
        })();
        self.rng = rng;
        if result.is_ok() {
            self.residue
                .add(&QuadraticGate::Fourier { mode: home }.generator());
        }
        result
    }

    /// Cubic phase `V(γ)` on the register's home edge, symbolic only. The
    /// mode is frozen afterwards.
    pub fn cubic(&mut self, name: &str, gamma: f64) -> Result<Conjugation, GateError> {
        if self.engine == EngineMode::Numeric {
            return Err(GateError::CubicNumeric);
        }
        if !gamma.is_finite() {
            return Err(GateError::NonFinite);
        }
        let i = self.topological(name)?;
        let mode = self.registers[i].home_edge;
        if self.ctx.cubic_modes.contains(&mode) {
            return Err(AnyonError::CubicResidue(mode).into());
        }
        let local = self.ctx.applied.restrict(|m| m == mode);
        let out = commute_through_cubic(&local, gamma, mode);
        if gamma != 0.0 {
            self.residue.add(&out.poly);
            self.residue.add_term(Monomial::new(vec![(mode, Quad::X); 3]), gamma);
            self.ctx.cubic_modes.insert(mode);
            if self.ctx.numeric.is_some() {
                self.numeric_stale = true;
            }
        }
        Ok(out)
    }

    /// Homodyne measurement of the logical mode.
    pub fn measure(
        &mut self,
        name: &str,
        basis: Quadrature,
        forced: Option<f64>,
    ) -> Result<MeasureRecord, GateError> {
        let i = self.index(name)?;
        let mut rng = std::mem::replace(&mut self.rng, ChaCha8Rng::seed_from_u64(0));
        let result = (|| {
            let lm = self.logical_mode(i)?;
            if lm.measured {
                return Err(GateError::Decoded(name.to_string()));
            }
            let outcome = match forced {
                Some(m) => Outcome::Forced(m),
                None => Outcome::Sample(&mut rng),
            };
            let rec = lm.state.measure_homodyne(0, basis, outcome)?;
            lm.measured = true;
            let shift = match basis {
                Quadrature::Position => lm.correction.s(0).re,
                Quadrature::Momentum => lm.correction.t(0).re,
            };
            Ok(MeasureRecord {
                basis,
                raw: rec.outcome,
                corrected: rec.outcome - shift,
            })
        })();
        self.rng = rng;
        result
    }

    /// Reads the value from the ledger and, with a numeric engine, from the
    /// nullifier expectation at the primary site.
    pub fn decode(&mut self, name: &str) -> Result<DecodeRecord, GateError> {
        let i = self.index(name)?;
        let ledger = self.value(name)?;
        let numeric = match (self.registers[i].primary, self.numeric_stale) {
            (Some(id), false) => match self.ctx.detect_numeric() {
                Some(table) => {
                    let rec = self.ctx.record(id)?;
                    let (stab, par) = match rec.kind {
                        AnyonKind::E => (StabKind::Star, self.ctx.spec.vertex_parity(rec.site)),
                        AnyonKind::M => (StabKind::Plaquette, self.ctx.spec.face_parity(rec.site)),
                    };
                    Some(table?.get(stab, rec.site) * par)
                }
                None => None,
            },
            _ => None,
        };
        self.registers[i].decoded = true;
        Ok(DecodeRecord { ledger, numeric })
    }
}
