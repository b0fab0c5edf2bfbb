//! Command-line front end. Every run is described by one TOML file; the
//! only arguments are the subcommand and that file's path.
//!
//! Exit codes: 0 success, 2 bad config or input, 3 failed invariant,
//! 4 solver failure.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::bl_metric::{d_bl, BLProblem};
use crate::bootstrap::{bootstrap_law_exact, bootstrap_law_mc, summarize, Atoms, Estimator, EstimatorConfig};
use crate::error::{Error, ErrorCategory, Result};
use crate::loss_kernel::{KernelSpec, LossSpec};
use crate::measures::DiscreteMeasure;
use crate::metric_space::{build_euclidean_space, check_metric, DistanceMatrix, Point};
use crate::output::{fmt_f64, sha256_hex, to_json, to_json_pretty};
use crate::robustness::{bootstrap_qr_probe, gc_decay_probe, uqr_probe, Probe, RobustnessConfig, RobustnessRow};
use crate::selftest;
use crate::svm::{check_bounds, solve, training_risk, SolverConfig, SvmProblem};

/// Config format version understood by this binary.
pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "dudley", version, about = "Bounded-Lipschitz metrics, SVMs and bootstrap robustness probes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Subcommand)]
enum Command {
    /// d_BL between two measures on a finite metric space.
    Blmetric { config: PathBuf },
    /// Train a shifted-loss SVM on a weighted dataset.
    SvmTrain { config: PathBuf },
    /// Bootstrap law of the SVM operator or risk on one dataset.
    Bootstrap { config: PathBuf },
    /// Inner and outer robustness probes over an (eps, n) grid.
    Robustness { config: PathBuf },
    /// Glivenko-Cantelli exceedance table.
    GcDecay { config: PathBuf },
    /// Invariant and oracle checks.
    Selftest { config: PathBuf },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Blmetric { .. } => "blmetric",
            Command::SvmTrain { .. } => "svm-train",
            Command::Bootstrap { .. } => "bootstrap",
            Command::Robustness { .. } => "robustness",
            Command::GcDecay { .. } => "gc-decay",
            Command::Selftest { .. } => "selftest",
        }
    }

    fn config(&self) -> &Path {
        match self {
            Command::Blmetric { config }
            | Command::SvmTrain { config }
            | Command::Bootstrap { config }
            | Command::Robustness { config }
            | Command::GcDecay { config }
            | Command::Selftest { config } => config,
        }
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    #[serde(default)]
    pub master_seed: u64,
    pub workers: Option<usize>,
    pub output_path: Option<PathBuf>,
    pub blmetric: Option<BlMetricSection>,
    pub svm: Option<SvmSection>,
    pub bootstrap: Option<BootstrapSection>,
    pub robustness: Option<RobustnessSection>,
    pub gc_decay: Option<GcSection>,
    pub selftest: Option<SelftestSection>,
}

/// Either a dataset (Euclidean metric on `(x, y_weight·y)`) or an explicit
/// distance matrix.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlMetricSection {
    pub dataset: Option<PathBuf>,
    pub distance: Option<Vec<Vec<f64>>>,
    #[serde(default = "one")]
    pub y_weight: f64,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    #[serde(default = "one")]
    pub radius: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvmSection {
    pub dataset: PathBuf,
    /// Defaults to uniform weights on the rows.
    pub weights: Option<Vec<f64>>,
    pub loss: LossSpec,
    pub kernel: KernelSpec,
    pub lambda: f64,
    #[serde(default)]
    pub solver: SolverConfig,
    /// Extra points where the sup norm is evaluated.
    #[serde(default)]
    pub test_points: Vec<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BootstrapSection {
    pub dataset: PathBuf,
    /// Rows forming the observed sample; defaults to every row once.
    pub data_indices: Option<Vec<usize>>,
    pub estimator: Estimator,
    /// Monte-Carlo replicates; ignored when `exact` is set.
    pub replicates: Option<usize>,
    #[serde(default)]
    pub exact: bool,
    pub loss: LossSpec,
    pub kernel: KernelSpec,
    pub lambda: f64,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub dump_atoms: bool,
}

/// Overrides on the default scenario. A `dataset` replaces its points and
/// then requires `base` and `directions`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobustnessSection {
    pub dataset: Option<PathBuf>,
    pub base: Option<Vec<f64>>,
    pub directions: Option<Vec<Vec<f64>>>,
    pub eps_grid: Option<Vec<f64>>,
    pub n_grid: Option<Vec<usize>>,
    pub m: Option<usize>,
    pub inner_b: Option<usize>,
    pub estimator: Option<Estimator>,
    pub loss: Option<LossSpec>,
    pub kernel: Option<KernelSpec>,
    pub lambda: Option<f64>,
    pub solver: Option<SolverConfig>,
    pub y_weight: Option<f64>,
    /// Which probes to run; defaults to both.
    pub probes: Option<Vec<ProbeName>>,
    /// CSV summary path; defaults to `output_path` with extension `csv`.
    pub summary_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeName {
    Inner,
    Outer,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GcSection {
    /// Defaults to four points three units apart on a line.
    pub dataset: Option<PathBuf>,
    #[serde(default = "one")]
    pub y_weight: f64,
    pub measures: Vec<Vec<f64>>,
    pub n_grid: Vec<usize>,
    pub reps: usize,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelftestSection {
    pub criteria: Option<Vec<u8>>,
}

/// Provenance-stamped output document.
#[derive(Debug, Serialize)]
struct Document<T: Serialize> {
    command: &'static str,
    version: u32,
    config_sha256: String,
    master_seed: u64,
    /// SHA-256 of every input file read, by path as written in the config.
    inputs: BTreeMap<String, String>,
    result: T,
}

struct Context {
    command: &'static str,
    base_dir: PathBuf,
    config_sha256: String,
    master_seed: u64,
    output_path: Option<PathBuf>,
    inputs: BTreeMap<String, String>,
}

impl Context {
    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn dataset(&mut self, p: &Path) -> Result<Vec<Point>> {
        let full = self.resolve(p);
        let bytes = fs::read(&full).map_err(|e| Error::Config(format!("cannot read dataset {}: {e}", full.display())))?;
        self.inputs.insert(p.display().to_string(), sha256_hex(&bytes));
        read_dataset(&bytes, &p.display().to_string())
    }

    fn document<T: Serialize>(&self, result: T) -> Document<T> {
        Document {
            command: self.command,
            version: CONFIG_VERSION,
            config_sha256: self.config_sha256.clone(),
            master_seed: self.master_seed,
            inputs: self.inputs.clone(),
            result,
        }
    }

    /// Prints the document and writes it to `output_path` if one is set.
    fn emit<T: Serialize>(&self, result: T) -> Result<()> {
        let doc = self.document(result);
        let text = to_json_pretty(&doc) + "\n";
        print!("{text}");
        if let Some(p) = &self.output_path {
            fs::write(self.resolve(p), text)?;
        }
        Ok(())
    }
}

/// Reads a CSV with header `x0, …, x{d−1}, y`.
pub fn read_dataset(bytes: &[u8], name: &str) -> Result<Vec<Point>> {
    let csv_err = |row: usize, column: &str, reason: String| Error::Csv {
        path: name.to_string(),
        row,
        column: column.to_string(),
        reason,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_err(1, "header", e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let d = header.len().saturating_sub(1);
    let expected: Vec<String> = (0..d).map(|i| format!("x{i}")).chain(["y".to_string()]).collect();
    if d == 0 || header != expected {
        return Err(csv_err(1, "header", format!("expected columns {}, found {}", expected.join(","), header.join(","))));
    }
    let mut points = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let row = e.position().map_or(0, |p| p.line() as usize);
            csv_err(row, "?", e.to_string())
        })?;
        let row = rec.position().map_or(points.len() + 2, |p| p.line() as usize);
        if rec.len() != header.len() {
            return Err(csv_err(row, "*", format!("expected {} fields, found {}", header.len(), rec.len())));
        }
        let mut vals = Vec::with_capacity(header.len());
        for (field, col) in rec.iter().zip(&header) {
            let v: f64 = field
                .parse()
                .map_err(|_| csv_err(row, col, format!("`{field}` is not a number")))?;
            if !v.is_finite() {
                return Err(csv_err(row, col, format!("`{field}` is not finite")));
            }
            vals.push(v);
        }
        let y = vals.pop().expect("header has a y column");
        points.push(Point::new(vals, y));
    }
    if points.is_empty() {
        return Err(csv_err(2, "*", "no data rows".into()));
    }
    Ok(points)
}

fn parse_config(text: &str, path: &Path) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig =
        toml::from_str(text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    if cfg.version != CONFIG_VERSION {
        return Err(Error::Config(format!(
            "{}: version {} is not supported (expected {CONFIG_VERSION})",
            path.display(),
            cfg.version
        )));
    }
    if cfg.workers == Some(0) {
        return Err(Error::Config("workers must be at least 1".into()));
    }
    Ok(cfg)
}

fn section<T>(s: Option<T>, name: &str) -> Result<T> {
    s.ok_or_else(|| Error::Config(format!("missing [{name}] section")))
}

fn exit_code(e: &Error) -> i32 {
    match e.category() {
        ErrorCategory::Input => 2,
        ErrorCategory::Invariant => 3,
        ErrorCategory::Solver => 4,
    }
}

/// Parses `argv`, runs the subcommand and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn execute(cmd: &Command) -> Result<()> {
    let path = cmd.config();
    let raw = fs::read(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let text = std::str::from_utf8(&raw).map_err(|_| Error::Config(format!("{} is not UTF-8", path.display())))?;
    let cfg = parse_config(text, path)?;
    if let Some(w) = cfg.workers {
        // a pool may already exist when called more than once in-process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(w).build_global();
    }
    let mut ctx = Context {
        command: cmd.name(),
        base_dir: path.parent().map(Path::to_path_buf).unwrap_or_default(),
        config_sha256: sha256_hex(&raw),
        master_seed: cfg.master_seed,
        output_path: cfg.output_path.clone(),
        inputs: BTreeMap::new(),
    };
    match cmd {
        Command::Blmetric { .. } => blmetric(&mut ctx, section(cfg.blmetric, "blmetric")?),
        Command::SvmTrain { .. } => svm_train(&mut ctx, section(cfg.svm, "svm")?),
        Command::Bootstrap { .. } => bootstrap(&mut ctx, section(cfg.bootstrap, "bootstrap")?),
        Command::Robustness { .. } => robustness(&mut ctx, cfg.robustness.unwrap_or_default()),
        Command::GcDecay { .. } => gc_decay(&mut ctx, section(cfg.gc_decay, "gc_decay")?),
        Command::Selftest { .. } => run_selftest(&ctx, cfg.selftest.unwrap_or_default()),
    }
}

fn blmetric(ctx: &mut Context, s: BlMetricSection) -> Result<()> {
    let d = match (&s.dataset, &s.distance) {
        (Some(p), None) => build_euclidean_space(&ctx.dataset(p)?, s.y_weight)?,
        (None, Some(rows)) => DistanceMatrix::from_rows(rows)?,
        _ => return Err(Error::Config("[blmetric] needs exactly one of `dataset` or `distance`".into())),
    };
    if let Some(v) = check_metric(&d).violation {
        return Err(Error::Config(format!("[blmetric] distance is not a metric: {v}")));
    }
    let p = DiscreteMeasure::new(s.p)?;
    let q = DiscreteMeasure::new(s.q)?;
    let prob = BLProblem::new(&d, &p, &q).with_radius(s.radius);
    let r = d_bl(&prob)?;
    r.check_witness(&prob).map_err(Error::Invariant)?;
    ctx.emit(r)
}

#[derive(Serialize)]
struct SvmOutput {
    alpha: Vec<f64>,
    f_values: Vec<f64>,
    objective: f64,
    rkhs_norm: f64,
    duality_gap: f64,
    sweeps: usize,
    risk: f64,
    bounds: crate::svm::BoundCheck,
}

fn svm_train(ctx: &mut Context, s: SvmSection) -> Result<()> {
    let points = ctx.dataset(&s.dataset)?;
    let w = match s.weights {
        Some(w) => DiscreteMeasure::new(w)?,
        None => DiscreteMeasure::uniform(points.len())?,
    };
    let prob = SvmProblem::new(points, w, s.loss, s.kernel, s.lambda)?;
    let sol = solve(&prob, &s.solver)?;
    let risk = training_risk(&prob, &sol)?;
    let bounds = check_bounds(&prob, &sol, &s.test_points)?;
    if !(bounds.sup_ok && bounds.risk_ok) {
        return Err(Error::Invariant(format!(
            "a-priori bound violated: sup {} vs {}, risk {} vs {}",
            bounds.sup_norm, bounds.sup_bound, bounds.risk, bounds.risk_bound
        )));
    }
    ctx.emit(SvmOutput {
        alpha: sol.alpha.clone(),
        f_values: sol.f_values.clone(),
        objective: sol.objective,
        rkhs_norm: sol.rkhs_norm,
        duality_gap: sol.duality_gap,
        sweeps: sol.sweeps,
        risk,
        bounds,
    })
}

#[derive(Serialize)]
struct BootstrapOutput {
    summary: crate::bootstrap::LawSummary,
    /// Coefficient vectors (S) or risk values (R), present when requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    atoms: Option<serde_json::Value>,
}

fn bootstrap(ctx: &mut Context, s: BootstrapSection) -> Result<()> {
    let points = ctx.dataset(&s.dataset)?;
    let n = points.len();
    let set = crate::svm::TrainingSet::new(points, s.kernel)?;
    let data = s.data_indices.unwrap_or_else(|| (0..n).collect());
    let cfg = EstimatorConfig {
        loss: s.loss,
        lambda: s.lambda,
        solver: s.solver,
    };
    let law = if s.exact {
        bootstrap_law_exact(&set, &data, s.estimator, &cfg)?
    } else {
        let b = s
            .replicates
            .ok_or_else(|| Error::Config("[bootstrap] needs `replicates` unless `exact = true`".into()))?;
        bootstrap_law_mc(&set, &data, b, s.estimator, &cfg, ctx.master_seed)?
    };
    let summary = summarize(&law)?;
    let atoms = s.dump_atoms.then(|| match &law.atoms {
        Atoms::Functions(v) => serde_json::json!(v.iter().map(|a| a.alpha.clone()).collect::<Vec<_>>()),
        Atoms::Scalars(v) => serde_json::json!(v),
    });
    ctx.emit(BootstrapOutput { summary, atoms })
}

fn robustness_config(ctx: &mut Context, s: &RobustnessSection) -> Result<RobustnessConfig> {
    let mut c = RobustnessConfig::default_scenario(ctx.master_seed);
    if let Some(p) = &s.dataset {
        c.points = ctx.dataset(p)?;
        let need = |v: &Option<_>, k: &str| {
            if v.is_none() {
                Err(Error::Config(format!("[robustness] `{k}` is required with `dataset`")))
            } else {
                Ok(())
            }
        };
        need(&s.base.as_ref().map(|_| ()), "base")?;
        need(&s.directions.as_ref().map(|_| ()), "directions")?;
    }
    if let Some(b) = &s.base {
        c.base = DiscreteMeasure::new(b.clone())?;
    }
    if let Some(ds) = &s.directions {
        c.directions = ds.iter().map(|d| DiscreteMeasure::new(d.clone())).collect::<Result<_>>()?;
    }
    macro_rules! take {
        ($($f:ident),*) => { $( if let Some(v) = &s.$f { c.$f = v.clone(); } )* };
    }
    take!(eps_grid, n_grid, m, inner_b, estimator, loss, kernel, lambda, solver, y_weight);
    c.validate()?;
    Ok(c)
}

fn robustness(ctx: &mut Context, s: RobustnessSection) -> Result<()> {
    let cfg = robustness_config(ctx, &s)?;
    let probes = s.probes.clone().unwrap_or_else(|| vec![ProbeName::Inner, ProbeName::Outer]);
    let mut rows: Vec<RobustnessRow> = Vec::new();
    for p in &probes {
        let t = std::time::Instant::now();
        let r = match p {
            ProbeName::Inner => uqr_probe(&cfg)?,
            ProbeName::Outer => bootstrap_qr_probe(&cfg)?,
        };
        eprintln!("{p:?} probe: {} cells in {:.1} s", r.len(), t.elapsed().as_secs_f64());
        rows.extend(r);
    }
    for r in &rows {
        r.check()?;
    }

    let header = ctx.document(serde_json::json!({ "rows": rows.len() }));
    let mut lines = to_json(&header) + "\n";
    for r in &rows {
        lines.push_str(&to_json(r));
        lines.push('\n');
    }
    print!("{lines}");

    let mut csv_out = csv::Writer::from_writer(Vec::new());
    let csv_io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    csv_out
        .write_record(["probe", "estimator", "eps", "n", "data_distance", "value", "config_sha256", "master_seed"])
        .map_err(csv_io)?;
    for r in &rows {
        csv_out
            .write_record([
                match r.probe {
                    Probe::Inner => "inner",
                    Probe::Outer => "outer",
                },
                match r.estimator {
                    Estimator::Operator => "S",
                    Estimator::Risk => "R",
                },
                &fmt_f64(r.eps),
                &r.n.to_string(),
                &fmt_f64(r.data_distance),
                &fmt_f64(r.value),
                &ctx.config_sha256,
                &ctx.master_seed.to_string(),
            ])
            .map_err(csv_io)?;
    }
    let csv_bytes = csv_out.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;

    if let Some(p) = &ctx.output_path {
        let out = ctx.resolve(p);
        fs::write(&out, &lines)?;
        let csv_path = s.summary_csv.as_ref().map(|c| ctx.resolve(c)).unwrap_or_else(|| out.with_extension("csv"));
        fs::write(csv_path, csv_bytes)?;
    } else if let Some(c) = &s.summary_csv {
        fs::write(ctx.resolve(c), csv_bytes)?;
    }
    Ok(())
}

fn gc_decay(ctx: &mut Context, s: GcSection) -> Result<()> {
    let points = match &s.dataset {
        Some(p) => ctx.dataset(p)?,
        None => (0..4).map(|i| Point::new(vec![3.0 * i as f64], 1.0)).collect(),
    };
    let metric = build_euclidean_space(&points, s.y_weight)?;
    let measures: Vec<DiscreteMeasure> = s.measures.into_iter().map(DiscreteMeasure::new).collect::<Result<_>>()?;
    let rows = gc_decay_probe(&measures, &metric, &s.n_grid, s.reps, ctx.master_seed)?;
    for r in &rows {
        if !r.fractions.windows(2).all(|w| w[0] >= w[1]) {
            return Err(Error::Invariant(format!("exceedance fractions at n={} increase with eps", r.n)));
        }
    }
    ctx.emit(rows)
}

fn run_selftest(ctx: &Context, s: SelftestSection) -> Result<()> {
    let ids = s.criteria.unwrap_or_else(|| selftest::CRITERIA.to_vec());
    let mut outcomes = Vec::new();
    for id in ids {
        let o = selftest::run(id, ctx.master_seed)?;
        eprintln!("criterion {id:>2}: {} | {}: {}", if o.passed { "PASS" } else { "FAIL" }, o.title, o.detail);
        outcomes.push(o);
    }
    let failed: Vec<u8> = outcomes.iter().filter(|o| !o.passed).map(|o| o.id).collect();
    ctx.emit(&outcomes)?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::Invariant(format!("selftest criteria failed: {failed:?}")))
    }
}
