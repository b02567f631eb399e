//! Text circuits and the runner that executes them.
//!
//! One instruction per line, `#` starts a comment:
//!
//! ```text
//! ENCODE q0 VERTEX 1.5        # optional: @ <edge>
//! ENCODE q1 FACE 2
//! DISPLACE q0 0.5
//! SUM q0 q2
//! CZ q0 q1                    # BRAID is a synonym
//! SQUEEZE q0 0.3
//! FOURIER q0                  # optional forced outcome
//! CUBIC q0 0.1
//! MEASURE q0 P                # X or P, optional forced outcome
//! DECODE q0
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::anyons::{AnyonKind, Context, EngineMode, ViolationTable};
use crate::gates::{
    CzRecord, DecodeRecord, FourierRecord, GateError, MeasureRecord, Processor, TraceClass,
};
use crate::lattice::{build_lattice, Boundary, Quadrature, SqueezingMap, StabKind};
use crate::wh::{fmt_complex as fmt_exact, parse_complex};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Op {
    Encode {
        reg: String,
        kind: AnyonKind,
        value: Complex64,
        edge: Option<usize>,
    },
    Displace { reg: String, amount: Complex64 },
    Sum { control: String, target: String },
    Cz { a: String, b: String },
    Squeeze { reg: String, eta: f64 },
    Fourier { reg: String, outcome: Option<f64> },
    Cubic { reg: String, gamma: f64 },
    Measure {
        reg: String,
        basis: Quadrature,
        outcome: Option<f64>,
    },
    Decode { reg: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instruction {
    pub line: usize,
    pub text: String,
    pub op: Op,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Circuit {
    pub instructions: Vec<Instruction>,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

struct Tokens<'a> {
    line: usize,
    items: Vec<(usize, &'a str)>,
    pos: usize,
    end: usize,
}

impl<'a> Tokens<'a> {
    fn new(line: usize, text: &'a str) -> Self {
        let mut items = Vec::new();
        let mut start = None;
        for (i, ch) in text.char_indices() {
            match (ch.is_whitespace(), start) {
                (false, None) => start = Some(i),
                (true, Some(s)) => {
                    items.push((s, &text[s..i]));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            items.push((s, &text[s..]));
        }
        Tokens {
            line,
            items,
            pos: 0,
            end: text.chars().count() + 1,
        }
    }

    fn err(&self, column: usize, message: impl Into<String>) -> ParseError {
        ParseError {
            line: self.line,
            column,
            message: message.into(),
        }
    }

    fn next(&mut self, what: &str) -> Result<(usize, &'a str), ParseError> {
        let t = self
            .items
            .get(self.pos)
            .map(|&(c, s)| (c + 1, s))
            .ok_or_else(|| self.err(self.end, format!("expected {what}")))?;
        self.pos += 1;
        Ok(t)
    }

    fn peek(&self) -> Option<&'a str> {
        self.items.get(self.pos).map(|t| t.1)
    }

    fn real(&mut self, what: &str) -> Result<f64, ParseError> {
        let (c, s) = self.next(what)?;
        s.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| self.err(c, format!("expected {what}, found `{s}`")))
    }

    fn complex(&mut self, what: &str) -> Result<Complex64, ParseError> {
        let (c, s) = self.next(what)?;
        parse_complex(s)
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| self.err(c, format!("expected {what}, found `{s}`")))
    }

    fn optional_real(&mut self, what: &str) -> Result<Option<f64>, ParseError> {
        if self.peek().is_some() {
            self.real(what).map(Some)
        } else {
            Ok(None)
        }
    }

    fn finish(&self) -> Result<(), ParseError> {
        match self.items.get(self.pos) {
            Some(&(c, s)) => Err(self.err(c + 1, format!("unexpected `{s}`"))),
            None => Ok(()),
        }
    }
}

fn is_name(s: &str) -> bool {
    let mut chars = s.chars();
    chars
        .next()
        .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl Circuit {
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut instructions = Vec::new();
        let mut known: BTreeSet<String> = BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let code = raw.split('#').next().unwrap_or("");
            if code.trim().is_empty() {
                continue;
            }
            let mut tk = Tokens::new(line, code);
            let (col, opcode) = tk.next("an instruction")?;
            let mut reg = |tk: &mut Tokens, new: bool| -> Result<String, ParseError> {
                let (c, s) = tk.next("a register name")?;
                if !is_name(s) {
                    return Err(tk.err(c, format!("`{s}` is not a register name")));
                }
                if new {
                    if !known.insert(s.to_string()) {
                        return Err(tk.err(c, format!("register `{s}` is already encoded")));
                    }
                } else if !known.contains(s) {
                    return Err(tk.err(c, format!("register `{s}` is used before ENCODE")));
                }
                Ok(s.to_string())
            };
            let op = match opcode.to_ascii_uppercase().as_str() {
                "ENCODE" => {
                    let r = reg(&mut tk, true)?;
                    let (c, k) = tk.next("VERTEX or FACE")?;
                    let kind = match k.to_ascii_uppercase().as_str() {
                        "VERTEX" | "E" => AnyonKind::E,
                        "FACE" | "M" => AnyonKind::M,
                        _ => return Err(tk.err(c, format!("expected VERTEX or FACE, found `{k}`"))),
                    };
                    let value = tk.complex("a value")?;
                    let edge = if tk.peek() == Some("@") {
                        tk.next("@")?;
                        let (c, e) = tk.next("an edge index")?;
                        Some(e.parse::<usize>().map_err(|_| {
                            tk.err(c, format!("expected an edge index, found `{e}`"))
                        })?)
                    } else {
                        None
                    };
                    Op::Encode {
                        reg: r,
                        kind,
                        value,
                        edge,
                    }
                }
                "DISPLACE" => Op::Displace {
                    reg: reg(&mut tk, false)?,
                    amount: tk.complex("an amount")?,
                },
                "SUM" => Op::Sum {
                    control: reg(&mut tk, false)?,
                    target: reg(&mut tk, false)?,
                },
                "CZ" | "BRAID" => Op::Cz {
                    a: reg(&mut tk, false)?,
                    b: reg(&mut tk, false)?,
                },
                "SQUEEZE" => Op::Squeeze {
                    reg: reg(&mut tk, false)?,
                    eta: tk.real("a squeezing parameter")?,
                },
                "FOURIER" => Op::Fourier {
                    reg: reg(&mut tk, false)?,
                    outcome: tk.optional_real("a forced outcome")?,
                },
                "CUBIC" => Op::Cubic {
                    reg: reg(&mut tk, false)?,
                    gamma: tk.real("a cubic strength")?,
                },
                "MEASURE" => {
                    let r = reg(&mut tk, false)?;
                    let (c, b) = tk.next("X or P")?;
                    let basis = match b.to_ascii_uppercase().as_str() {
                        "X" => Quadrature::Position,
                        "P" => Quadrature::Momentum,
                        _ => return Err(tk.err(c, format!("expected X or P, found `{b}`"))),
                    };
                    Op::Measure {
                        reg: r,
                        basis,
                        outcome: tk.optional_real("a forced outcome")?,
                    }
                }
                "DECODE" => Op::Decode {
                    reg: reg(&mut tk, false)?,
                },
                _ => return Err(tk.err(col, format!("unknown instruction `{opcode}`"))),
            };
            tk.finish()?;
            instructions.push(Instruction {
                line,
                text: code.trim().to_string(),
                op,
            });
        }
        Ok(Circuit { instructions })
    }

    pub fn contains_cubic(&self) -> bool {
        self.instructions
            .iter()
            .any(|i| matches!(i.op, Op::Cubic { .. }))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub width: usize,
    pub height: usize,
    pub boundary: Boundary,
    pub squeezing: SqueezingMap,
    pub engine: EngineMode,
    pub seed: u64,
    /// Squeezing of Fourier ancillas; defaults to the lattice default, or 3
    /// when that is infinite.
    pub ancilla_r: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            width: 4,
            height: 4,
            boundary: Boundary::Toroidal,
            squeezing: SqueezingMap::ideal(),
            engine: EngineMode::Symbolic,
            seed: 0,
            ancilla_r: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("setup: {0}")]
    Setup(String),
    #[error("line {line}: `{text}`: {source}")]
    Gate {
        line: usize,
        text: String,
        source: GateError,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub kind: StabKind,
    pub site: usize,
    pub value: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "op")]
pub enum StepDetail {
    Encode { edge: usize },
    Displace,
    Sum,
    Cz(CzRecord),
    Squeeze { generator: String },
    Fourier(FourierRecord),
    Cubic { residual: String, residue: String },
    Measure(MeasureRecord),
    Decode(DecodeRecord),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepReport {
    pub line: usize,
    pub instruction: String,
    pub detail: StepDetail,
    /// Nonzero entries of the symbolic violation table.
    pub violations: Vec<Violation>,
    /// Symbolic table vs the record ledger.
    pub ledger_mismatch: f64,
    /// Numeric table vs the record ledger.
    pub numeric_mismatch: Option<f64>,
    /// Numeric first moments vs the symbolic word.
    pub moment_mismatch: Option<f64>,
    /// Conjugated displacement produced when an excitation passed a squeezer.
    pub extra_factor: Option<String>,
    pub values: BTreeMap<String, Complex64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegisterReport {
    pub name: String,
    pub kind: AnyonKind,
    pub edge: usize,
    pub value: Complex64,
    pub spectators: usize,
    pub decoded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceReport {
    pub class: TraceClass,
    pub word: String,
    pub residue: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub steps: Vec<StepReport>,
    pub registers: Vec<RegisterReport>,
    pub total_charge: BTreeMap<AnyonKind, Complex64>,
    pub final_violations: Vec<Violation>,
    pub trace: TraceReport,
    /// The numeric engine stopped tracking the state (after CUBIC).
    pub numeric_stale: bool,
}

const TOL: f64 = 1e-12;

fn nonzero(table: &ViolationTable) -> Vec<Violation> {
    table
        .nonzero(TOL)
        .into_iter()
        .map(|(kind, site, value)| Violation { kind, site, value })
        .collect()
}

fn values(p: &Processor) -> BTreeMap<String, Complex64> {
    p.registers
        .iter()
        .map(|r| (r.name.clone(), p.value(&r.name).unwrap_or_default()))
        .collect()
}

fn step(p: &mut Processor, op: &Op) -> Result<StepDetail, GateError> {
    Ok(match op {
        Op::Encode {
            reg,
            kind,
            value,
            edge,
        } => StepDetail::Encode {
            edge: p.encode(reg, *kind, *value, *edge)?.home_edge,
        },
        Op::Displace { reg, amount } => {
            p.displace(reg, *amount)?;
            StepDetail::Displace
        }
        Op::Sum { control, target } => {
            p.sum(control, target)?;
            StepDetail::Sum
        }
        Op::Cz { a, b } => StepDetail::Cz(p.cz(a, b)?),
        Op::Squeeze { reg, eta } => StepDetail::Squeeze {
            generator: p.squeeze(reg, *eta)?.to_string(),
        },
        Op::Fourier { reg, outcome } => StepDetail::Fourier(p.fourier(reg, *outcome)?),
        Op::Cubic { reg, gamma } => {
            let out = p.cubic(reg, *gamma)?;
            StepDetail::Cubic {
                residual: out.word().to_string(),
                residue: out.poly.to_string(),
            }
        }
        Op::Measure {
            reg,
            basis,
            outcome,
        } => StepDetail::Measure(p.measure(reg, *basis, *outcome)?),
        Op::Decode { reg } => StepDetail::Decode(p.decode(reg)?),
    })
}

/// Executes `circuit` under `config`. Runs are deterministic for a fixed seed.
pub fn run_circuit(circuit: &Circuit, config: &RunConfig) -> Result<RunReport, RunError> {
    if config.engine == EngineMode::Numeric && circuit.contains_cubic() {
        let ins = circuit
            .instructions
            .iter()
            .find(|i| matches!(i.op, Op::Cubic { .. }))
            .expect("checked above");
        return Err(RunError::Gate {
            line: ins.line,
            text: ins.text.clone(),
            source: GateError::CubicNumeric,
        });
    }
    let spec = build_lattice(config.width, config.height, config.boundary)
        .map_err(|e| RunError::Setup(e.to_string()))?;
    let ctx = Context::new(spec, config.squeezing.clone(), config.engine)
        .map_err(|e| RunError::Setup(e.to_string()))?;
    let ancilla_r = config
        .ancilla_r
        .or(config.squeezing.default.finite())
        .unwrap_or(3.0);
    let mut p = Processor::new(ctx, config.engine, ancilla_r, config.seed);
    let mut steps = Vec::with_capacity(circuit.instructions.len());
    for ins in &circuit.instructions {
        let wrap = |source: GateError| RunError::Gate {
            line: ins.line,
            text: ins.text.clone(),
            source,
        };
        p.ctx.last_extra = None;
        let detail = step(&mut p, &ins.op).map_err(wrap)?;
        let (ledger_mismatch, numeric) = p
            .ctx
            .ledger_mismatch()
            .map_err(|e| wrap(GateError::Anyon(e)))?;
        let live = !p.numeric_stale;
        steps.push(StepReport {
            line: ins.line,
            instruction: ins.text.clone(),
            detail,
            violations: nonzero(&p.ctx.detect_symbolic()),
            ledger_mismatch,
            numeric_mismatch: numeric.filter(|_| live),
            moment_mismatch: p.ctx.moment_mismatch().filter(|_| live),
            extra_factor: p.ctx.last_extra.take().map(|w| w.to_string()),
            values: values(&p),
        });
    }
    let registers = p
        .registers
        .iter()
        .map(|r| RegisterReport {
            name: r.name.clone(),
            kind: r.kind,
            edge: r.home_edge,
            value: p.value(&r.name).unwrap_or_default(),
            spectators: r.spectators.len(),
            decoded: r.decoded,
        })
        .collect();
    let trace = p.trace();
    Ok(RunReport {
        config: config.clone(),
        steps,
        registers,
        total_charge: p.ctx.total_charge(),
        final_violations: nonzero(&p.ctx.detect_symbolic()),
        trace: TraceReport {
            class: trace.class(),
            word: trace.word.to_string(),
            residue: trace.residue.to_string(),
        },
        numeric_stale: p.numeric_stale,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |v| format!("{v:e}"))
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is serializable")
    }

    /// `line,instruction,ledger_mismatch,numeric_mismatch,moment_mismatch`
    pub fn steps_csv(&self) -> String {
        let mut out = String::from("line,instruction,ledger_mismatch,numeric_mismatch,moment_mismatch\n");
        for s in &self.steps {
            out += &format!(
                "{},\"{}\",{:e},{},{}\n",
                s.line,
                s.instruction.replace('"', "\"\""),
                s.ledger_mismatch,
                opt(s.numeric_mismatch),
                opt(s.moment_mismatch)
            );
        }
        out
    }

    /// `name,kind,edge,value_re,value_im,spectators,decoded`
    pub fn registers_csv(&self) -> String {
        let mut out = String::from("name,kind,edge,value_re,value_im,spectators,decoded\n");
        for r in &self.registers {
            out += &format!(
                "{},{:?},{},{},{},{},{}\n",
                r.name, r.kind, r.edge, r.value.re, r.value.im, r.spectators, r.decoded
            );
        }
        out
    }

    /// `kind,site,re,im` for every nonzero entry of the final table.
    pub fn violations_csv(&self) -> String {
        let mut out = String::from("kind,site,re,im\n");
        for v in &self.final_violations {
            out += &format!("{:?},{},{},{}\n", v.kind, v.site, v.value.re, v.value.im);
        }
        out
    }
}

/// Like the exact formatter, with signed zeros folded to `+0`.
fn fmt_complex(c: Complex64) -> String {
    fmt_exact(Complex64::new(c.re + 0.0, c.im + 0.0))
}

impl fmt::Display for RunReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{}x{} {:?}, engine {:?}, seed {}",
            self.config.width,
            self.config.height,
            self.config.boundary,
            self.config.engine,
            self.config.seed
        )?;
        for s in &self.steps {
            write!(f, "{:>4}  {}", s.line, s.instruction)?;
            match &s.detail {
                StepDetail::Cz(c) => write!(f, "  phase {}", fmt_complex(c.phase))?,
                StepDetail::Fourier(r) => write!(f, "  m = {}", r.measurement.outcome)?,
                StepDetail::Measure(m) => write!(f, "  raw {} corrected {}", m.raw, m.corrected)?,
                StepDetail::Decode(d) => write!(f, "  -> {}", fmt_complex(d.ledger))?,
                _ => {}
            }
            writeln!(f)?;
        }
        for r in &self.registers {
            writeln!(f, "{} = {}", r.name, fmt_complex(r.value))?;
        }
        write!(f, "trace: {:?}", self.trace.class)
    }
}
