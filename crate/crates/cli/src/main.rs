//! `cvanyon`: build lattices, run circuit files and check the closed-form suites.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context as _, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use cv_anyon::anyons::EngineMode;
use cv_anyon::circuit::{run_circuit, Circuit, RunConfig, RunError};
use cv_anyon::lattice::{code_generators, Boundary, LatticeFile, Squeezing, SqueezingMap};
use cv_anyon::verify::{run_suite, Suite, SuiteReport};

#[derive(Parser)]
#[command(name = "cvanyon", version, about = "CV surface-code anyon simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the mode-index table of a lattice.
    Lattice {
        #[command(flatten)]
        lattice: LatticeArgs,
        /// Write the table here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a circuit file and write its report.
    Run {
        circuit: PathBuf,
        #[command(flatten)]
        lattice: LatticeArgs,
        #[arg(long, value_enum, default_value_t = Engine::Symbolic)]
        engine: Engine,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Squeezing of the Fourier ancillas.
        #[arg(long)]
        ancilla_r: Option<f64>,
        /// Report directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run verification suites (all of them when none is named).
    Verify {
        suites: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for the pass/fail tables.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the lattice file, mode table and stabilizer generators.
    Export {
        #[command(flatten)]
        lattice: LatticeArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct LatticeArgs {
    /// Lattice size as WxH.
    #[arg(long, default_value = "4x4", value_parser = parse_size)]
    size: (usize, usize),
    #[arg(long, default_value = "toroidal")]
    boundary: Boundary,
    /// Default squeezing; `inf` for the ideal code.
    #[arg(long, default_value = "inf", value_parser = parse_r)]
    r: Squeezing,
    /// Lattice file; overrides --size, --boundary and --r.
    #[arg(long)]
    lattice: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Engine {
    Symbolic,
    Numeric,
    Both,
}

impl From<Engine> for EngineMode {
    fn from(e: Engine) -> Self {
        match e {
            Engine::Symbolic => EngineMode::Symbolic,
            Engine::Numeric => EngineMode::Numeric,
            Engine::Both => EngineMode::Both,
        }
    }
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WxH, got `{s}`"))?;
    let n = |v: &str| v.trim().parse::<usize>().map_err(|_| format!("bad size `{s}`"));
    Ok((n(w)?, n(h)?))
}

fn parse_r(s: &str) -> Result<Squeezing, String> {
    if matches!(s, "inf" | "infinite" | "ideal") {
        return Ok(Squeezing::Infinite);
    }
    match s.parse::<f64>() {
        Ok(r) if r.is_finite() && r >= 0.0 => Ok(Squeezing::Finite(r)),
        _ => Err(format!("bad squeezing `{s}` (a non-negative number or `inf`)")),
    }
}

impl LatticeArgs {
    fn file(&self) -> Result<LatticeFile> {
        if let Some(path) = &self.lattice {
            let text = fs::read_to_string(path)
                .with_context(|| format!("{}: cannot read lattice file", path.display()))?;
            return LatticeFile::from_toml(&text).with_context(|| format!("{}", path.display()));
        }
        Ok(LatticeFile {
            width: self.size.0,
            height: self.size.1,
            boundary: self.boundary,
            squeezing: SqueezingMap::uniform(self.r),
        })
    }
}

fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, text).with_context(|| format!("{}: cannot write", path.display()))
}

fn cmd_lattice(args: &LatticeArgs, out: Option<&Path>) -> Result<()> {
    let (spec, _) = args.file()?.build()?;
    let doc = spec.mode_index_doc();
    match out {
        Some(path) => {
            fs::write(path, doc).with_context(|| format!("{}: cannot write", path.display()))?
        }
        None => print!("{doc}"),
    }
    Ok(())
}

fn cmd_export(args: &LatticeArgs, out: &Path) -> Result<()> {
    let file = args.file()?;
    let (spec, sq) = file.build()?;
    fs::create_dir_all(out).with_context(|| format!("{}: cannot create", out.display()))?;
    write(out, "lattice.toml", &file.to_toml())?;
    write(out, "modes.csv", &spec.mode_index_doc())?;
    let mut gens = String::from("kind,site,mode,alpha_re,alpha_im,beta_re,beta_im\n");
    for g in code_generators(&spec, &sq)? {
        for (m, (a, b)) in &g.coeffs {
            gens += &format!(
                "{:?},{},{},{},{},{},{}\n",
                g.kind, g.site, m, a.re, a.im, b.re, b.im
            );
        }
    }
    write(out, "generators.csv", &gens)?;
    Ok(())
}

fn cmd_run(
    path: &Path,
    args: &LatticeArgs,
    engine: EngineMode,
    seed: u64,
    ancilla_r: Option<f64>,
    out: Option<&Path>,
) -> Result<()> {
    let name = path.display();
    let text = fs::read_to_string(path).with_context(|| format!("{name}: cannot read"))?;
    let circuit = Circuit::parse(&text).map_err(|e| {
        let line = text.lines().nth(e.line.saturating_sub(1)).unwrap_or("").trim();
        anyhow::anyhow!("{name}:{}:{}: `{line}`: {}", e.line, e.column, e.message)
    })?;
    let file = args.file()?;
    if engine != EngineMode::Symbolic && !file.squeezing.is_all_finite() {
        bail!("{name}: the numeric engine needs finite squeezing; pass --r");
    }
    let cfg = RunConfig {
        width: file.width,
        height: file.height,
        boundary: file.boundary,
        squeezing: file.squeezing,
        engine,
        seed,
        ancilla_r,
    };
    let report = run_circuit(&circuit, &cfg).map_err(|e| match e {
        RunError::Gate { line, text, source } => {
            anyhow::anyhow!("{name}:{line}: `{text}`: {source}")
        }
        RunError::Setup(msg) => anyhow::anyhow!("{name}: {msg}"),
    })?;
    println!("{report}");
    if let Some(dir) = out {
        fs::create_dir_all(dir).with_context(|| format!("{}: cannot create", dir.display()))?;
        write(dir, "report.json", &report.to_json())?;
        write(dir, "steps.csv", &report.steps_csv())?;
        write(dir, "registers.csv", &report.registers_csv())?;
        write(dir, "violations.csv", &report.violations_csv())?;
    }
    Ok(())
}

fn cmd_verify(names: &[String], seed: u64, out: Option<&Path>) -> Result<bool> {
    let suites: Vec<Suite> = if names.is_empty() {
        Suite::ALL.to_vec()
    } else {
        names
            .iter()
            .map(|n| n.parse::<Suite>().map_err(anyhow::Error::msg))
            .collect::<Result<_>>()?
    };
    // Suites are independent; run them side by side and report in order.
    let reports: Vec<SuiteReport> = std::thread::scope(|s| {
        let handles: Vec<_> = suites
            .iter()
            .map(|&suite| s.spawn(move || run_suite(suite, seed)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("suite thread")).collect()
    });
    if let Some(dir) = out {
        fs::create_dir_all(dir).with_context(|| format!("{}: cannot create", dir.display()))?;
    }
    let mut ok = true;
    for rep in &reports {
        print!("{rep}");
        ok &= rep.passed();
        if let Some(dir) = out {
            write(dir, &format!("verify-{}.csv", rep.suite), &rep.to_csv())?;
        }
    }
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Lattice { lattice, out } => cmd_lattice(lattice, out.as_deref()).map(|_| true),
        Cmd::Export { lattice, out } => cmd_export(lattice, out).map(|_| true),
        Cmd::Run {
            circuit,
            lattice,
            engine,
            seed,
            ancilla_r,
            out,
        } => cmd_run(circuit, lattice, (*engine).into(), *seed, *ancilla_r, out.as_deref())
            .map(|_| true),
        Cmd::Verify { suites, seed, out } => cmd_verify(suites, *seed, out.as_deref()),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
