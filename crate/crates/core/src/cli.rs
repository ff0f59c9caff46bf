//! The `fell` command-line tool: representation files, verification
//! reports, convergence tables and fiber reports.
//!
//! Exit codes: 0 all checks pass, 1 a check failed, 2 unreadable or
//! malformed input, 3 resource limit exceeded.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::approx::{
    check_projection_relations, check_sum_a, check_sum_b, convergence_csv, convergence_study, ProjectionFamily,
};
use crate::bundle::{check_bundle_axioms, check_bundle_orthogonal, fiber, fiber_auto};
use crate::error::Error;
use crate::fixtures::{self, dim_cap, Fixture, FixtureKind, FixtureSpec, WordTable};
use crate::freegroup::{GeneratorSet, Word};
use crate::linop::{projection_residual, Operator, Tolerance, C64};
use crate::prep::{
    all_pairs, check_axioms, check_posneg_vanishing, check_positive_orthogonality, orthogonality, semisaturation,
    validate_family, GeneratorFamily, PartialRep,
};
use crate::report::CheckSummary;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_RESOURCE: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum EnvelopeMode {
    #[default]
    Generators,
    FullTable,
}

/// Row-major `[re, im]` pairs.
pub type MatrixData = Vec<[f64; 2]>;

/// On-disk representation file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepEnvelope {
    pub dim: usize,
    pub generators: Vec<String>,
    #[serde(default)]
    pub matrices: BTreeMap<String, MatrixData>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<Tolerance>,
    #[serde(default)]
    pub mode: EnvelopeMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<BTreeMap<String, MatrixData>>,
}

fn encode(op: &Operator) -> MatrixData {
    op.to_row_major().into_iter().map(|z| [z.re, z.im]).collect()
}

fn decode(dim: usize, data: &MatrixData, what: &str) -> Result<Operator, Error> {
    if data.len() != dim * dim {
        return Err(Error::Parse(format!(
            "{what}: expected {} entries for a {dim}x{dim} matrix, found {}",
            dim * dim,
            data.len()
        )));
    }
    let values: Vec<C64> = data.iter().map(|&[re, im]| C64::new(re, im)).collect();
    Operator::from_row_major(dim, &values).map_err(|e| Error::Parse(format!("{what}: {e}")))
}

impl RepEnvelope {
    pub fn from_family(family: &GeneratorFamily, tolerance: Option<Tolerance>) -> Self {
        let gens = family.generators();
        let matrices = gens
            .labels()
            .iter()
            .zip(family.images())
            .map(|(label, op)| (label.clone(), encode(op)))
            .collect();
        Self {
            dim: family.dim(),
            generators: gens.labels().to_vec(),
            matrices,
            tolerance,
            mode: EnvelopeMode::Generators,
            table: None,
        }
    }

    pub fn from_table(table: &WordTable, tolerance: Option<Tolerance>) -> Self {
        let gens = &table.gens;
        let matrices = (0..gens.len())
            .map(|g| (gens.labels()[g].clone(), encode(&table.table[&Word::generator(g)])))
            .collect();
        let entries = table.table.iter().map(|(w, op)| (gens.format(w), encode(op))).collect();
        Self {
            dim: table.dim,
            generators: gens.labels().to_vec(),
            matrices,
            tolerance,
            mode: EnvelopeMode::FullTable,
            table: Some(entries),
        }
    }

    pub fn from_fixture(fixture: &Fixture) -> Self {
        match fixture {
            Fixture::Family(f) => Self::from_family(f, None),
            Fixture::Table(t) => Self::from_table(t, None),
        }
    }

    /// Builds the partial representation described by the envelope.
    pub fn to_rep(&self) -> Result<PartialRep, Error> {
        if self.dim == 0 {
            return Err(Error::Parse("dim must be at least 1".into()));
        }
        let gens = GeneratorSet::new(self.generators.iter().cloned()).map_err(|e| Error::Parse(e.to_string()))?;
        for label in self.matrices.keys() {
            if gens.index_of(label).is_none() {
                return Err(Error::Parse(format!("matrix for unknown generator {label:?}")));
            }
        }
        match self.mode {
            EnvelopeMode::Generators => {
                let images = gens
                    .labels()
                    .iter()
                    .map(|label| {
                        let data = self
                            .matrices
                            .get(label)
                            .ok_or_else(|| Error::Parse(format!("missing matrix for generator {label:?}")))?;
                        decode(self.dim, data, label)
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(PartialRep::from_family(GeneratorFamily::new(gens, images)?))
            }
            EnvelopeMode::FullTable => {
                let raw = self
                    .table
                    .as_ref()
                    .ok_or_else(|| Error::Parse("full-table mode requires a table".into()))?;
                let mut table = BTreeMap::new();
                for (key, data) in raw {
                    let word = gens.parse(key)?;
                    let op = decode(self.dim, data, &format!("table entry {key:?}"))?;
                    table.insert(word, op);
                }
                for (label, data) in &self.matrices {
                    let g = gens.index_of(label).expect("checked above");
                    let op = decode(self.dim, data, label)?;
                    match table.get(&Word::generator(g)) {
                        Some(existing) if *existing != op => {
                            return Err(Error::Parse(format!("matrix for {label:?} disagrees with its table entry")))
                        }
                        Some(_) => {}
                        None => {
                            table.insert(Word::generator(g), op);
                        }
                    }
                }
                PartialRep::from_table(gens, self.dim, table).map_err(|e| Error::Parse(e.to_string()))
            }
        }
    }

    pub fn load(path: &Path) -> Result<(Self, Vec<u8>), Error> {
        let bytes = std::fs::read(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        let env = serde_json::from_slice(&bytes).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        Ok((env, bytes))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string(self).expect("envelope serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckEntry {
    pub name: String,
    pub passed: bool,
    pub residual: f64,
    pub tolerance: f64,
    pub checked: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl From<&CheckSummary> for CheckEntry {
    fn from(c: &CheckSummary) -> Self {
        Self {
            name: c.name.clone(),
            passed: c.passed(),
            residual: c.residual,
            tolerance: if c.tolerance.is_finite() { c.tolerance } else { 0.0 },
            checked: c.checked,
            witness: c.witness_summary(8),
            note: c.note.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub passed: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub input_sha256: String,
    pub tool_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub checks: Vec<CheckEntry>,
    pub summary: Summary,
    pub provenance: Provenance,
}

impl CheckReport {
    pub fn new(checks: Vec<CheckEntry>, input: &[u8]) -> Self {
        let passed = checks.iter().filter(|c| c.passed).count();
        let failed = checks.len() - passed;
        let digest = Sha256::digest(input);
        let input_sha256 = digest.iter().map(|b| format!("{b:02x}")).collect();
        Self {
            checks,
            summary: Summary { passed, failed },
            provenance: Provenance { input_sha256, tool_version: env!("CARGO_PKG_VERSION").to_string() },
        }
    }

    pub fn all_passed(&self) -> bool {
        self.summary.failed == 0
    }
}

#[derive(Debug, Parser)]
#[command(name = "fell", version, about = "Partial representations of free groups: verification and approximation studies")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the full verification suite on a representation file.
    Verify(VerifyArgs),
    /// Tabulate ‖σ(t) − Σ_r a_n(tr)* σ(t) a_n(r)‖ for n = 1..nmax as CSV.
    Converge(ConvergeArgs),
    /// Emit a canonical fixture as a representation file.
    Fixture(FixtureArgs),
    /// Report the rank and stabilization of a fiber B_t.
    Fiber(FiberArgs),
    /// Emit a seeded random family of partial isometries.
    Random(RandomArgs),
}

#[derive(Debug, Args)]
pub struct ToleranceArgs {
    #[arg(long)]
    pub atol: Option<f64>,
    #[arg(long)]
    pub rtol: Option<f64>,
}

impl ToleranceArgs {
    fn resolve(&self, from_file: Option<Tolerance>) -> Result<Tolerance, Error> {
        let base = from_file.unwrap_or_default();
        Tolerance::new(self.atol.unwrap_or(base.atol), self.rtol.unwrap_or(base.rtol))
    }
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub rep: PathBuf,
    /// Longest word used by the checks.
    #[arg(long, default_value_t = 2)]
    pub depth: usize,
    #[command(flatten)]
    pub tol: ToleranceArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConvergeArgs {
    #[arg(long)]
    pub rep: PathBuf,
    #[arg(long, default_value = "")]
    pub word: String,
    #[arg(long)]
    pub nmax: usize,
    /// Projection depth; defaults to nmax + max(|μ|, |ν|).
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KindArg {
    Tree,
    Ck,
    Parity,
    Delta,
    Random,
}

#[derive(Debug, Args)]
pub struct FixtureArgs {
    pub kind: KindArg,
    #[arg(long, default_value_t = 2)]
    pub gens: usize,
    /// Truncation depth (longest tabulated word for parity/delta).
    #[arg(long)]
    pub depth: Option<usize>,
    /// Transition matrix for ck: a JSON file, `I<n>`, `J<n>`, or rows like `01;10`.
    #[arg(long)]
    pub matrix: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 4)]
    pub dim: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FiberArgs {
    #[arg(long)]
    pub rep: PathBuf,
    #[arg(long, default_value = "")]
    pub word: String,
    /// Longest word r in the range projections e(r); by default starts at
    /// 2|t| + 2 and deepens until the fiber stabilizes.
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RandomArgs {
    #[arg(long, default_value_t = 4)]
    pub dim: usize,
    #[arg(long, default_value_t = 2)]
    pub gens: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// A command failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Resource(_) => EXIT_RESOURCE,
            _ => EXIT_PARSE,
        };
        Self { code, message: e.to_string() }
    }
}

fn emit(out: Option<&Path>, text: &str, stdout: &mut dyn Write) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure {
            code: EXIT_PARSE,
            message: format!("{}: {e}", path.display()),
        }),
        None => stdout.write_all(text.as_bytes()).map_err(|e| Failure { code: EXIT_PARSE, message: e.to_string() }),
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{e}");
            return if e.use_stderr() { EXIT_PARSE } else { EXIT_PASS };
        }
    };
    match dispatch(cli.command, stdout) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}

fn dispatch(command: Command, stdout: &mut dyn Write) -> Result<i32, Failure> {
    match command {
        Command::Verify(args) => cmd_verify(&args, stdout),
        Command::Converge(args) => cmd_converge(&args, stdout),
        Command::Fixture(args) => cmd_fixture(&args, stdout),
        Command::Fiber(args) => cmd_fiber(&args, stdout),
        Command::Random(args) => cmd_random(&args, stdout),
    }
}

/// Runs every check in order and builds the report.
pub fn verify_rep(rep: &PartialRep, depth: usize, tol: Tolerance) -> Result<Vec<CheckSummary>, Error> {
    if depth == 0 {
        return Err(Error::Input("depth must be at least 1".into()));
    }
    // Table reps only know the words they tabulate; the checks reach |ts| ≤ 2·word_len.
    let word_len = match rep.table_max_len() {
        Some(max) => depth.min(max / 2),
        None => depth,
    };
    if word_len == 0 {
        return Err(Error::Input("table too short to verify: need words of length 2".into()));
    }
    let gens = rep.generators().clone();
    let words = gens.reduced_words_up_to(word_len);
    let mut checks = Vec::new();

    let validation = validate_family(&rep.family(), 2 * depth, tol)?;
    let truncation = validation.truncated.then(|| "product cap reached".to_string());
    let mut pi = validation.partial_isometries.clone();
    let mut cr = validation.commuting_ranges.clone();
    if let Some(note) = &truncation {
        pi.note = Some(format!("{}; {note}", pi.note.clone().unwrap_or_default()));
        cr.note = pi.note.clone();
    }
    pi.name = "validate: partial isometries".into();
    cr.name = "validate: commuting range projections".into();
    checks.push(pi);
    checks.push(cr);

    let axioms = check_axioms(rep, &words, tol)?;
    for (prefix, mut c) in [
        ("axioms", axioms.multiplicativity),
        ("axioms", axioms.adjoint),
        ("axioms", axioms.commutation),
    ] {
        c.name = format!("{prefix}: {}", c.name);
        checks.push(c);
    }
    let mut ranges = CheckSummary::new("range projections e(t)");
    for t in &words {
        let e = rep.range_projection(t)?;
        ranges.record(projection_residual(&e), tol.bound(1.0), || rep.word_label(t));
    }
    checks.push(ranges);
    checks.push(orthogonality(rep, tol)?);
    checks.push(semisaturation(rep, &all_pairs(&words), tol)?);
    checks.push(check_posneg_vanishing(rep, &words, tol)?);
    let mut pos = CheckSummary::new("positive orthogonality");
    for k in 1..=word_len {
        pos.absorb(check_positive_orthogonality(rep, k, tol)?);
    }
    checks.push(pos);

    let pf = ProjectionFamily::new(rep, word_len)?;
    checks.extend(check_projection_relations(&pf, &words, tol)?.clauses);
    checks.push(check_sum_b(&pf, word_len, tol)?);
    checks.push(check_sum_a(&pf, word_len, tol)?);

    if rep.is_generated() {
        let bundle_words = gens.reduced_words_up_to(word_len.min(2));
        let axioms = check_bundle_axioms(rep, &bundle_words, None, tol)?;
        checks.push(axioms.products);
        checks.push(axioms.adjoints);
        checks.push(check_bundle_orthogonal(rep, None, tol)?);
    }
    Ok(checks)
}

pub fn cmd_verify(args: &VerifyArgs, stdout: &mut dyn Write) -> Result<i32, Failure> {
    let (env, bytes) = RepEnvelope::load(&args.rep)?;
    let rep = env.to_rep()?;
    let tol = args.tol.resolve(env.tolerance)?;
    let checks = verify_rep(&rep, args.depth, tol)?;
    let report = CheckReport::new(checks.iter().map(CheckEntry::from).collect(), &bytes);
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    emit(args.out.as_deref(), &text, stdout)?;
    Ok(if report.all_passed() { EXIT_PASS } else { EXIT_CHECK_FAILED })
}

pub const INDECOMPOSABLE_MESSAGE: &str = "σ(t) = 0: t is not of the form μν⁻¹";

pub fn cmd_converge(args: &ConvergeArgs, stdout: &mut dyn Write) -> Result<i32, Failure> {
    let (env, _) = RepEnvelope::load(&args.rep)?;
    let rep = env.to_rep()?;
    let t = rep.generators().parse(&args.word)?;
    let Some((mu, nu)) = t.pos_neg_decompose() else {
        return Err(Failure {
            code: EXIT_CHECK_FAILED,
            message: format!(
                "{INDECOMPOSABLE_MESSAGE} with μ, ν positive (word {:?}); σ vanishes on such words in an orthogonal semi-saturated representation, so there is nothing to approximate",
                args.word
            ),
        });
    };
    if args.nmax == 0 {
        return Err(Error::Input("nmax must be at least 1".into()).into());
    }
    let depth = args.depth.unwrap_or(args.nmax + mu.len().max(nu.len()));
    let pf = ProjectionFamily::new(&rep, depth)?;
    let ns: Vec<usize> = (1..=args.nmax).collect();
    let points = convergence_study(&pf, &t, &ns)?;
    emit(args.out.as_deref(), &convergence_csv(&points), stdout)?;
    Ok(EXIT_PASS)
}

fn resolve_matrix(text: &str) -> Result<Vec<Vec<u8>>, Error> {
    let path = Path::new(text);
    if path.is_file() {
        let content = std::fs::read_to_string(path)?;
        fixtures::parse_transition_matrix(&content)
    } else {
        fixtures::parse_transition_matrix(text)
    }
}

pub fn cmd_fixture(args: &FixtureArgs, stdout: &mut dyn Write) -> Result<i32, Failure> {
    let kind = match args.kind {
        KindArg::Tree => FixtureKind::Tree,
        KindArg::Ck => FixtureKind::Ck,
        KindArg::Parity => FixtureKind::Parity,
        KindArg::Delta => FixtureKind::Delta,
        KindArg::Random => FixtureKind::Random,
    };
    let default_depth = if matches!(kind, FixtureKind::Parity | FixtureKind::Delta) { 4 } else { 2 };
    let spec = FixtureSpec {
        kind,
        m: args.gens,
        depth: args.depth.unwrap_or(default_depth),
        matrix: args.matrix.as_deref().map(resolve_matrix).transpose()?,
        seed: args.seed,
        dim: args.dim,
    };
    let fixture = spec.build(dim_cap())?;
    emit(args.out.as_deref(), &RepEnvelope::from_fixture(&fixture).to_json(), stdout)?;
    Ok(EXIT_PASS)
}

pub fn cmd_fiber(args: &FiberArgs, stdout: &mut dyn Write) -> Result<i32, Failure> {
    let (env, _) = RepEnvelope::load(&args.rep)?;
    let rep = env.to_rep()?;
    let t = rep.generators().parse(&args.word)?;
    let basis = match args.depth {
        Some(r_depth) => fiber(&rep, &t, r_depth)?,
        None => fiber_auto(&rep, &t)?,
    };
    let report = basis.report(&rep);
    let mut text = serde_json::to_string(&report).expect("fiber report serializes");
    text.push('\n');
    emit(args.out.as_deref(), &text, stdout)?;
    Ok(EXIT_PASS)
}

pub fn cmd_random(args: &RandomArgs, stdout: &mut dyn Write) -> Result<i32, Failure> {
    let spec = FixtureSpec {
        kind: FixtureKind::Random,
        m: args.gens,
        depth: 1,
        matrix: None,
        seed: args.seed,
        dim: args.dim,
    };
    let fixture = spec.build(dim_cap())?;
    emit(args.out.as_deref(), &RepEnvelope::from_fixture(&fixture).to_json(), stdout)?;
    Ok(EXIT_PASS)
}
