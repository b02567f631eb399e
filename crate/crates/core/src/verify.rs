//! Property suites behind `cvanyon verify`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::anyons::{topological_factor, loop_factor, AnyonKind, Context, EngineMode};
use crate::circuit::{run_circuit, Circuit, RunConfig, StepDetail};
use crate::gates::{fourier_via_measurement, TraceClass};
use crate::gaussian::{GaussianGraphState, Outcome};
use crate::lattice::{build_lattice, Boundary, Squeezing, SqueezingMap, StabKind};
use crate::wh::{normal_order, Factor};

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Suite {
    WhIdentity,
    Braiding,
    Violations,
    FiniteSqueezing,
    Gates,
}

impl Suite {
    pub const ALL: [Suite; 5] = [
        Suite::WhIdentity,
        Suite::Braiding,
        Suite::Violations,
        Suite::FiniteSqueezing,
        Suite::Gates,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::WhIdentity => "wh-identity",
            Suite::Braiding => "braiding",
            Suite::Violations => "violations",
            Suite::FiniteSqueezing => "finite-squeezing",
            Suite::Gates => "gates",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Suite::ALL.iter().map(|x| x.name()).collect();
                format!("unknown suite `{s}` (expected one of {})", names.join(", "))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Worst deviation seen.
    pub error: f64,
    pub tolerance: f64,
}

impl Check {
    fn new(name: &str, error: f64, tolerance: f64) -> Self {
        Check {
            name: name.to_string(),
            passed: error <= tolerance,
            error,
            tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("suite,check,result,error,tolerance\n");
        for c in &self.checks {
            out += &format!(
                "{},\"{}\",{},{:e},{:e}\n",
                self.suite,
                c.name,
                if c.passed { "PASS" } else { "FAIL" },
                c.error,
                c.tolerance
            );
        }
        out
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{} {}: {} (error {:.3e}, tolerance {:.1e})",
                if c.passed { "PASS" } else { "FAIL" },
                self.suite,
                c.name,
                c.error,
                c.tolerance
            )?;
        }
        Ok(())
    }
}

pub fn run_suite(suite: Suite, seed: u64) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let checks = match suite {
        Suite::WhIdentity => wh_identity(&mut rng),
        Suite::Braiding => braiding(&mut rng),
        Suite::Violations => violations(&mut rng),
        Suite::FiniteSqueezing => finite_squeezing(&mut rng),
        Suite::Gates => gates(),
    };
    SuiteReport { suite, checks }
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn torus(n: usize, sq: SqueezingMap, mode: EngineMode) -> Context {
    Context::new(
        build_lattice(n, n, Boundary::Toroidal).expect("valid size"),
        sq,
        mode,
    )
    .expect("valid context")
}

fn wh_identity(rng: &mut ChaCha8Rng) -> Vec<Check> {
    let (mut order, mut inverse) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let s: f64 = rng.random_range(-5.0..5.0);
        let t: f64 = rng.random_range(-5.0..5.0);
        let w = normal_order(&[Factor::x(0, s), Factor::z(0, t)]);
        order = order.max((w.scalar.value() - (-I * s * t).exp()).norm());
        let back = w.compose(&w.inverse());
        inverse = inverse.max(back.scalar.log.norm() + back.modes.len() as f64);
    }
    vec![
        Check::new("X(s)Z(t) = e^{-ist} Z(t)X(s), 1000 draws", order, 1e-12),
        Check::new("W W^-1 = 1", inverse, 1e-12),
    ]
}

/// Braids a fresh `m(t)` once counterclockwise around `e(s)` on a 4×4 torus.
fn m_around_e(cx: &mut Context, s: f64, t: f64) -> Complex64 {
    let e_edge = cx.spec.horizontal_edge(1, 1).expect("on lattice");
    cx.create_pair(AnyonKind::E, e_edge, c(s)).expect("pair");
    let m_edge = cx.spec.horizontal_edge(0, 0).expect("on lattice");
    let [m, _] = cx.create_pair(AnyonKind::M, m_edge, c(t)).expect("pair");
    // m sits on face (0,0); loop around vertex (1,1).
    debug_assert_eq!(cx.spec.face_coords(m.site), (0, 0));
    let lp = cx.spec.face_loop(1, 1, 1, 1, true).expect("loop");
    let label = m.label;
    let out = cx.braid(m.id, &lp).expect("braid");
    debug_assert_eq!(label, c(t));
    out.scalar.value()
}

fn braiding(rng: &mut ChaCha8Rng) -> Vec<Check> {
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let s: f64 = rng.random_range(-3.0..3.0);
        let t: f64 = rng.random_range(-3.0..3.0);
        let mut cx = torus(4, SqueezingMap::ideal(), EngineMode::Symbolic);
        let v = m_around_e(&mut cx, s, t);
        worst = worst.max((v - (-I * s * t).exp()).norm());
    }
    let mut homotopy = 0.0f64;
    let mut trivial = 0.0f64;
    for _ in 0..10 {
        let s: f64 = rng.random_range(-3.0..3.0);
        let t: f64 = rng.random_range(-3.0..3.0);
        let mut values = Vec::new();
        for &(vx, vy, w, h) in &[(2isize, 2isize, 1usize, 1usize), (1, 1, 2, 2), (0, 1, 3, 2)] {
            let mut cx = torus(6, SqueezingMap::ideal(), EngineMode::Symbolic);
            cx.create_pair(AnyonKind::E, cx.spec.horizontal_edge(2, 2).unwrap(), c(s))
                .unwrap();
            let [m, _] = cx
                .create_pair(AnyonKind::M, cx.spec.horizontal_edge(4, 5).unwrap(), c(t))
                .unwrap();
            let start = cx.spec.face_at(vx - 1, vy - 1).unwrap();
            let path = cx.default_path(AnyonKind::M, m.site, start);
            cx.move_anyon(m.id, &path).unwrap();
            let lp = cx.spec.face_loop(vx, vy, w, h, true).unwrap();
            values.push(cx.braid(m.id, &lp).unwrap().scalar.value());
            // A loop far from the e pair.
            let lp = cx.spec.face_loop(vx - 1 + 5, vy - 1 + 5, 1, 1, true);
            if let Some(lp) = lp {
                let start = cx.spec.face_at(vx - 2 + 5, vy - 2 + 5).unwrap();
                let site = cx.record(m.id).unwrap().site;
                let path = cx.default_path(AnyonKind::M, site, start);
                cx.move_anyon(m.id, &path).unwrap();
                let v = cx.braid(m.id, &lp).unwrap().scalar.value();
                trivial = trivial.max((v - c(1.0)).norm());
            }
        }
        for v in &values[1..] {
            homotopy = homotopy.max((v - values[0]).norm());
        }
    }
    let mut numeric = 0.0f64;
    for _ in 0..3 {
        let s: f64 = rng.random_range(-2.0..2.0);
        let t: f64 = rng.random_range(-2.0..2.0);
        let mut cx = torus(4, SqueezingMap::uniform(Squeezing::Finite(3.0)), EngineMode::Both);
        m_around_e(&mut cx, s, t);
        numeric = numeric.max(cx.moment_mismatch().unwrap_or(f64::INFINITY));
    }
    vec![
        Check::new("m(t) around e(s) gives e^{-ist}, 100 draws", worst, 1e-12),
        Check::new("homotopic loops give equal scalars", homotopy, 1e-12),
        Check::new("loop enclosing nothing gives 1", trivial, 1e-12),
        Check::new("numeric first moments follow the symbolic word at r=3", numeric, 1e-6),
    ]
}

/// Worst deviation of the four single-edge cases from their expected
/// violations, for one draw of `(r, t)` and one edge.
pub fn violation_cases(r: f64, t: f64, edge: usize, numeric: bool) -> [f64; 4] {
    let sq = SqueezingMap::uniform(Squeezing::Finite(r));
    let eps = (-2.0 * r).exp();
    let mode = if numeric {
        EngineMode::Both
    } else {
        EngineMode::Symbolic
    };
    let mut out = [0.0f64; 4];
    for z_kind in [true, false] {
        let mut cx = torus(4, sq.clone(), mode);
        let sign = cx.spec.edge_sign(edge);
        let f = if z_kind {
            Factor::z(edge, t)
        } else {
            Factor::x(edge, t)
        };
        cx.apply(f).unwrap();
        let table = if numeric {
            cx.detect_numeric().unwrap().unwrap()
        } else {
            cx.detect_symbolic()
        };
        let (star_col, plaq_col) = if z_kind { (0, 1) } else { (2, 3) };
        for g in &cx.generators {
            let touches = g.coeffs.contains_key(&edge);
            let got = table.get(g.kind, g.site);
            let (col, expected) = match (g.kind, z_kind, touches) {
                (StabKind::Star, true, true) => (star_col, c(t)),
                (StabKind::Plaquette, true, true) => (plaq_col, -I * sign * eps * t),
                (StabKind::Plaquette, false, true) => (plaq_col, c(sign * t)),
                (StabKind::Star, _, _) => (star_col, c(0.0)),
                (StabKind::Plaquette, _, _) => (plaq_col, c(0.0)),
            };
            out[col] = out[col].max((got - expected).norm());
        }
    }
    out
}

fn violations(rng: &mut ChaCha8Rng) -> Vec<Check> {
    let mut sym = [0.0f64; 4];
    let mut num = [0.0f64; 4];
    for k in 0..20 {
        let r: f64 = rng.random_range(0.1..2.0);
        let t: f64 = rng.random_range(-5.0..5.0);
        let edge = rng.random_range(0..32);
        for (a, b) in sym.iter_mut().zip(violation_cases(r, t, edge, false)) {
            *a = a.max(b);
        }
        if k < 4 {
            for (a, b) in num.iter_mut().zip(violation_cases(r, t, edge, true)) {
                *a = a.max(b);
            }
        }
    }
    let names = [
        "Z excitation, star = t",
        "Z excitation, plaquette = -i sigma t e^{-2r}",
        "X excitation, star = 0",
        "X excitation, plaquette = sigma t",
    ];
    let mut out = Vec::new();
    for (i, n) in names.iter().enumerate() {
        out.push(Check::new(&format!("{n} (symbolic)"), sym[i], 1e-12));
        out.push(Check::new(&format!("{n} (numeric)"), num[i], 1e-6));
    }
    out
}

/// Outcome of [`e_around_m`].
#[derive(Debug, Clone, PartialEq)]
pub struct LoopRun {
    pub scalar: Complex64,
    /// Labels of the enclosed m and the moving e.
    pub m_label: f64,
    pub e_label: f64,
    pub residual: Vec<(usize, Complex64, Complex64)>,
}

/// Carries an e clockwise around an m on face (1,1) of a 4×4 torus whose four
/// boundary edges (top, left, bottom, right) have squeezing `r`. The pairs
/// are created with amounts `s` (m) and `t` (e).
pub fn e_around_m(s: f64, t: f64, r: [Squeezing; 4]) -> LoopRun {
    let spec = build_lattice(4, 4, Boundary::Toroidal).expect("valid size");
    let face = spec.face_at(1, 1).expect("face");
    let mut sq = SqueezingMap::ideal();
    for (j, rj) in r.iter().enumerate() {
        sq = sq.with_mode(spec.faces[face].boundary[j], *rj);
    }
    let mut cx = Context::new(spec, sq, EngineMode::Symbolic).expect("context");
    let m_edge = cx.spec.horizontal_edge(1, 1).expect("edge");
    let [a, b] = cx.create_pair(AnyonKind::M, m_edge, c(s)).expect("pair");
    let m = if a.site == face { a } else { b };
    // The e starts on the lower-left corner of the face.
    let corner = cx.spec.vertex_at(1, 1).expect("vertex");
    let e_edge = cx.spec.vertical_edge(1, 0).expect("edge");
    let [a, b] = cx.create_pair(AnyonKind::E, e_edge, c(t)).expect("pair");
    let e = if a.site == corner { a } else { b };
    let lp = cx.spec.vertex_loop(1, 1, 1, 1, false).expect("loop");
    let out = cx.braid(e.id, &lp).expect("braid");
    LoopRun {
        scalar: out.scalar.value(),
        m_label: m.label.re,
        e_label: e.label.re,
        residual: out.residual_displacements,
    }
}

fn finite_squeezing(rng: &mut ChaCha8Rng) -> Vec<Check> {
    let (mut closed_one, mut derived_one, mut residue) = (0.0f64, 0.0f64, 0.0f64);
    let (mut closed_uniform, mut phase_uniform) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let s: f64 = rng.random_range(-2.0..2.0);
        let t: f64 = rng.random_range(-2.0..2.0);
        let r1: f64 = rng.random_range(0.1..2.0);
        let one = [
            Squeezing::Finite(r1),
            Squeezing::Infinite,
            Squeezing::Infinite,
            Squeezing::Infinite,
        ];
        let run = e_around_m(s, t, one);
        let (ls, lt) = (run.m_label, run.e_label);
        closed_one = closed_one.max((run.scalar - topological_factor(c(ls), lt, one).value()).norm());
        derived_one = derived_one.max((run.scalar - loop_factor(c(ls), lt, one).value()).norm());
        // One imaginary X on the squeezed edge and nothing else.
        let bad: f64 = run
            .residual
            .iter()
            .map(|(_, tt, ss)| tt.norm() + ss.re.abs())
            .sum::<f64>()
            + if run.residual.len() == 1 { 0.0 } else { 1.0 };
        residue = residue.max(bad);
        let run = e_around_m(s, t, [Squeezing::Finite(r1); 4]);
        let ideal = (I * run.m_label * run.e_label).exp();
        closed_uniform = closed_uniform.max((run.scalar - ideal).norm());
        phase_uniform = phase_uniform.max((run.scalar / run.scalar.norm() - ideal).norm());
    }
    vec![
        Check::new("one squeezed edge: scalar = exp[ist - t^2 e^{-2r}]", closed_one, 1e-12),
        Check::new("one squeezed edge: scalar = exp[ist + t^2 e^{-2r}/2]", derived_one, 1e-12),
        Check::new("one squeezed edge: residue is a single imaginary X", residue, 1e-12),
        Check::new("uniform squeezing: scalar = e^{ist}", closed_uniform, 1e-12),
        Check::new("uniform squeezing: phase = e^{ist}", phase_uniform, 1e-12),
    ]
}

fn gates() -> Vec<Check> {
    let mut out = Vec::new();
    let cfg = RunConfig {
        squeezing: SqueezingMap::uniform(Squeezing::Finite(3.0)),
        engine: EngineMode::Both,
        ..RunConfig::default()
    };
    let run = |text: &str, cfg: &RunConfig| {
        run_circuit(&Circuit::parse(text).expect("valid circuit"), cfg).expect("run")
    };
    let rep = run("ENCODE a VERTEX 1\nENCODE b VERTEX 2\nSUM a b\n", &cfg);
    let vals = &rep.steps.last().unwrap().values;
    let ledger = (vals["a"] - c(-1.0)).norm() + (vals["b"] - c(3.0)).norm();
    out.push(Check::new("SUM (1,2) -> (-1,3) on the ledger", ledger, 0.0));
    let numeric = rep
        .steps
        .iter()
        .map(|s| s.numeric_mismatch.unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max)
        .max(
            rep.steps
                .iter()
                .map(|s| s.moment_mismatch.unwrap_or(f64::INFINITY))
                .fold(0.0, f64::max),
        );
    out.push(Check::new("SUM numeric table and moments at r=3", numeric, 1e-6));

    let rep = run("ENCODE a VERTEX 1\nENCODE b FACE 1\nCZ a b\n", &cfg);
    let phase = match &rep.steps[2].detail {
        StepDetail::Cz(cz) => (cz.phase - (-I).exp()).norm(),
        _ => f64::INFINITY,
    };
    out.push(Check::new("CZ with (1,1) gives e^{-i}", phase, 1e-12));

    let mut fourier = 0.0f64;
    let mut bound = 0.0f64;
    for &r in &[2.0, 3.0, 4.0] {
        let err = fourier_mean_error(1.0, 0.0, 1.5, r);
        fourier = fourier.max(err / (5.0 * (-2.0 * r).exp()));
        bound = bound.max(err);
    }
    out.push(Check::new(
        "Fourier by measurement: (x,p) -> (-p,x) within 5e^{-2r}, r in {2,3,4} (error / bound)",
        fourier,
        1.0,
    ));

    let sym = RunConfig::default();
    let classes = [
        ("ENCODE a VERTEX 1\nENCODE b VERTEX 2\nDISPLACE a 1\nSUM a b\nENCODE c FACE 1\nCZ a c\n", TraceClass::Topological),
        ("ENCODE a FACE 1\nSQUEEZE a 0.3\nDISPLACE a 1\n", TraceClass::Quadratic),
        ("ENCODE a VERTEX 1\nFOURIER a 0\n", TraceClass::Quadratic),
        ("ENCODE a VERTEX 1\nCUBIC a 0.2\n", TraceClass::Cubic),
    ];
    let wrong = classes
        .iter()
        .filter(|(text, class)| run(text, &sym).trace.class != *class)
        .count();
    out.push(Check::new("trace classification", wrong as f64, 0.0));
    out
}

/// Runs the measurement-based Fourier transform on a vacuum displaced to
/// `(x, p)` with forced outcome `p + offset`, undoes `X(m)` and returns the
/// distance of the means from `(−p, x)`.
pub fn fourier_mean_error(x: f64, p: f64, offset: f64, r: f64) -> f64 {
    let mut st = GaussianGraphState::empty();
    st.append_mode(0, I).expect("fresh mode");
    st.displace_x(0, x).expect("mode exists");
    st.displace_z(0, p).expect("mode exists");
    let rec = fourier_via_measurement(&mut st, 0, r, Outcome::<ChaCha8Rng>::Forced(p + offset))
        .expect("protocol");
    st.displace_x(0, -rec.outcome).expect("mode exists");
    let (mx, mp) = st.mean(0).expect("mode exists");
    ((mx + p).powi(2) + (mp - x).powi(2)).sqrt()
}
