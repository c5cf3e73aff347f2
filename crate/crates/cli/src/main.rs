//! `lie-spectrum`: joint spectra of solvable matrix Lie algebras from the
//! command line.
//!
//! Exit codes: 0 success, 1 property-check failure, 2 invalid input,
//! 3 size limit.

mod report;

use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use lie_spectrum::{
    check_product_theorem, compute_spectrum, contains, run_verify, Character, Error, OperatorLieAlgebra, ProblemFile,
    TolerancePolicy, C64,
};
use sha2::{Digest, Sha256};

use report::{InputDigest, MemberPayload, Payload, RunReport, SpectrumPayload};

#[derive(Parser)]
#[command(name = "lie-spectrum", version)]
#[command(about = "Joint spectra of solvable Lie algebras of matrices via twisted Koszul homology")]
struct Cli {
    /// Relative singular-value threshold for numerical rank.
    #[arg(long, global = true, default_value_t = 1e-10)]
    tol_rank: f64,

    /// Normalized sigma_min(T) at or below which a character is a spectral point.
    #[arg(long, global = true, default_value_t = 1e-8)]
    tol_sing: f64,

    /// Distance under which two characters are the same point.
    #[arg(long, global = true, default_value_t = 1e-6)]
    tol_match: f64,

    /// Largest allowed Koszul complex dimension d * 2^n.
    #[arg(long, global = true, default_value_t = lie_spectrum::numeric::DEFAULT_SIZE_CAP)]
    cap: usize,

    /// Output format: text or json for computations, json or csv for export.
    #[arg(long, global = true)]
    format: Option<Format>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Compute Sp(L, H) for the algebra in a problem file.
    Spectrum { file: PathBuf },
    /// Decide whether a character is a spectral point.
    Member {
        file: PathBuf,
        /// Flat list "re,im,re,im,..." in basis order.
        #[arg(allow_hyphen_values = true)]
        character: String,
    },
    /// Check Sp(L1 x L2, H1 (x) H2) = Sp(L1, H1) x Sp(L2, H2).
    Product { first: PathBuf, second: PathBuf },
    /// Run the seeded randomized harness.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 3)]
        dmax: usize,
        #[arg(long, default_value_t = 3)]
        nmax: usize,
        /// Write the problem files of failing trials into this directory.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Re-emit a JSON report (from a file, or stdin when omitted) as json or csv.
    Export { report: Option<PathBuf> },
}

enum Failure {
    Invalid(String),
    Size(String),
    Check(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Check(_) => 1,
            Failure::Invalid(_) => 2,
            Failure::Size(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Invalid(m) | Failure::Size(m) | Failure::Check(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidInput(_)
            | Error::NotClosed { .. }
            | Error::NotSolvable { .. }
            | Error::NotACharacter { .. } => Failure::Invalid(e.to_string()),
            Error::SizeLimit { .. } => Failure::Size(e.to_string()),
            Error::Triangularization { .. }
            | Error::ToleranceInconsistency(_)
            | Error::EmptySpectrum { .. }
            | Error::BoundaryNotNilpotent { .. } => Failure::Check(e.to_string()),
        }
    }
}

struct Loaded {
    file: ProblemFile,
    algebra: OperatorLieAlgebra,
    digest: InputDigest,
}

fn load(path: &Path, pol: &TolerancePolicy) -> Result<Loaded, Failure> {
    let bytes = std::fs::read(path).map_err(|e| Failure::Invalid(format!("cannot read {}: {e}", path.display())))?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| Failure::Invalid(format!("{} is not valid UTF-8", path.display())))?;
    let prefix = |e: Error| Failure::Invalid(format!("{}: {e}", path.display()));
    let file = ProblemFile::from_json(&text).map_err(prefix)?;
    let algebra = file.to_algebra(pol).map_err(|e| match e {
        Error::SizeLimit { .. } => Failure::from(e),
        e => prefix(e),
    })?;
    if algebra.dimension() != file.basis.len() {
        return Err(Failure::Invalid(format!(
            "{}: basis matrices are linearly dependent ({} given, {} independent)",
            path.display(),
            file.basis.len(),
            algebra.dimension()
        )));
    }
    Ok(Loaded {
        file,
        algebra,
        digest: InputDigest {
            path: path.display().to_string(),
            sha256: format!("{:x}", Sha256::digest(&bytes)),
        },
    })
}

fn parse_character(text: &str, n: usize) -> Result<Character, Failure> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| Failure::Invalid(format!("character {text:?}: {e}")))?;
    if parts.len() != 2 * n {
        return Err(Failure::Invalid(format!(
            "character needs {} numbers (re,im for each of {n} basis elements), got {}",
            2 * n,
            parts.len()
        )));
    }
    if parts.iter().any(|v| !v.is_finite()) {
        return Err(Failure::Invalid("character entries must be finite".into()));
    }
    Ok(Character::new(parts.chunks(2).map(|p| C64::new(p[0], p[1])).collect()))
}

fn run(cli: &Cli, pol: &TolerancePolicy) -> Result<(Vec<InputDigest>, Payload), Failure> {
    match &cli.command {
        Command::Spectrum { file } => {
            let input = load(file, pol)?;
            let result = compute_spectrum(&input.algebra, pol)?;
            Ok((
                vec![input.digest],
                Payload::Spectrum(SpectrumPayload {
                    label: input.file.label,
                    ambient_dim: input.algebra.ambient_dim(),
                    algebra_dim: input.algebra.dimension(),
                    candidates_tested: result.candidates_tested,
                    points: result.points,
                }),
            ))
        }
        Command::Member { file, character } => {
            let input = load(file, pol)?;
            let f = parse_character(character, input.algebra.dimension())?;
            let (member, diagnostics) = contains(&input.algebra, &f, pol)?;
            Ok((
                vec![input.digest],
                Payload::Member(MemberPayload {
                    character: f,
                    member,
                    diagnostics,
                }),
            ))
        }
        Command::Product { first, second } => {
            let a = load(first, pol)?;
            let b = load(second, pol)?;
            let report = check_product_theorem(&a.algebra, &b.algebra, pol)?;
            Ok((vec![a.digest, b.digest], Payload::Product(report)))
        }
        Command::Verify {
            seed,
            trials,
            dmax,
            nmax,
            dump,
        } => {
            let summary = run_verify(*seed, *trials, *dmax, *nmax, pol)?;
            if let Some(dir) = dump {
                std::fs::create_dir_all(dir)
                    .map_err(|e| Failure::Invalid(format!("cannot create {}: {e}", dir.display())))?;
                for f in &summary.failures {
                    for (which, problem) in [("algebra", &f.algebra), ("partner", &f.partner)] {
                        let path = dir.join(format!("trial-{}-{which}.json", f.trial));
                        std::fs::write(&path, problem.to_json())
                            .map_err(|e| Failure::Invalid(format!("cannot write {}: {e}", path.display())))?;
                    }
                }
            }
            Ok((Vec::new(), Payload::Verify(summary)))
        }
        Command::Export { .. } => unreachable!("export is handled before computing"),
    }
}

fn export(source: Option<&Path>, format: Format) -> Result<String, Failure> {
    let text = match source {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| Failure::Invalid(format!("cannot read {}: {e}", path.display())))?,
        None => {
            let mut buf = String::new();
            std::io::stdin()
                .read_to_string(&mut buf)
                .map_err(|e| Failure::Invalid(format!("cannot read stdin: {e}")))?;
            buf
        }
    };
    let report: RunReport =
        serde_json::from_str(&text).map_err(|e| Failure::Invalid(format!("malformed report: {e}")))?;
    match format {
        Format::Json => Ok(report.to_json() + "\n"),
        Format::Csv => report.to_csv().map_err(Failure::Invalid),
        Format::Text => Err(Failure::Invalid("export formats are json and csv".into())),
    }
}

fn main() -> ExitCode {
    let start = Instant::now();
    let cli = Cli::parse();
    let pol = TolerancePolicy {
        rank_tol_rel: cli.tol_rank,
        singularity_tol: cli.tol_sing,
        match_tol: cli.tol_match,
        size_cap: cli.cap,
    };

    let outcome = if let Command::Export { report } = &cli.command {
        export(report.as_deref(), cli.format.unwrap_or(Format::Json)).map(|out| (out, false))
    } else {
        pol.validate()
            .map_err(Failure::from)
            .and_then(|()| run(&cli, &pol))
            .and_then(|(inputs, result)| {
                let report = RunReport {
                    wall_time_s: start.elapsed().as_secs_f64(),
                    command: std::iter::once("lie-spectrum".to_string())
                        .chain(std::env::args().skip(1))
                        .collect(),
                    policy: pol,
                    inputs,
                    result,
                };
                let text = match cli.format.unwrap_or(Format::Text) {
                    Format::Text => report.to_text(),
                    Format::Json => report.to_json() + "\n",
                    Format::Csv => report.to_csv().map_err(Failure::Invalid)?,
                };
                Ok((text, report.check_failed()))
            })
    };

    match outcome {
        Ok((text, failed)) => {
            print!("{text}");
            if failed {
                eprintln!("lie-spectrum: property check failed");
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(f) => {
            eprintln!("lie-spectrum: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
