//! Command-line front end. The `rmra` binary only parses arguments and calls
//! [`main_with_args`].
//!
//! Commands chain through files:
//!
//! ```text
//! rmra gen gyre --n 400 --t 64 --seed 7 --out run/gen
//! rmra kernel run/gen/frames --bandwidth-scale 0.5 --out run/kernels
//! rmra tree run/kernels --m 4 --out run/tree
//! rmra cluster run/tree/embeddings/S_L6_t1.csv --k 2 --out run/labels
//! ```

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::cluster::{self, KMeansConfig};
use crate::composite::{self, ComposeOptions, Embedding, Routing, Selection};
use crate::datagen::{self, GyreConfig, Integrator, TorusConfig, TorusVariant};
use crate::diffusion::{self, Dataset, KernelConfig};
use crate::error::{Error, Result};
use crate::io;
use crate::linalg::{sym_eig, EigenOrdering, SymmetricMatrix};
use crate::spd::GeodesicParam;
use crate::tree::{self, TreeManifest};
use crate::verify::{self, Report};

#[derive(Debug, Parser)]
#[command(name = "rmra", version, about = "Riemannian multi-resolution analysis of diffusion operators")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Seed for every random draw.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; 1 is the determinism reference.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, env = "RMRA_OUT")]
    pub out: Option<PathBuf>,
    /// SPD / SPSD routing.
    #[arg(long, global = true, value_enum)]
    pub routing: Option<RoutingArg>,
    /// Kernel scale as a multiple of the median pairwise distance.
    #[arg(long, global = true)]
    pub bandwidth_scale: Option<f64>,
    /// Fixed kernel scale; bypasses the median rule.
    #[arg(long, global = true)]
    pub sigma: Option<f64>,
    /// JSON run configuration; explicit flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RoutingArg {
    Auto,
    Spd,
    Spsd,
}

impl From<RoutingArg> for Routing {
    fn from(r: RoutingArg) -> Self {
        match r {
            RoutingArg::Auto => Routing::Auto,
            RoutingArg::Spd => Routing::Spd,
            RoutingArg::Spsd => Routing::Spsd,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset.
    Gen(GenArgs),
    /// Build diffusion operators from a dataset file or a directory of frames.
    Kernel(KernelArgs),
    /// Compose two operators into S and F.
    Compose(ComposeArgs),
    /// Build the multi-resolution operator tree over a sequence of operators.
    Tree(TreeArgs),
    /// k-means on selected embedding columns.
    Cluster(ClusterArgs),
    /// Run the oracle suites and emit a JSON report.
    Verify(VerifyArgs),
    /// Per-point CSV of coordinates and one eigenvector, for plotting.
    Plotdata(PlotArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GenKind {
    ToySpd,
    ToySpsd,
    Gyre,
    ToriCommon,
    ToriUnique,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntegratorArg {
    Rk4,
    Euler,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(value_enum)]
    pub kind: GenKind,
    /// Number of points / trajectories.
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of frames (gyre).
    #[arg(long)]
    pub t: Option<usize>,
    /// Time between frames (gyre); defaults to 1/t.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Integration steps per frame (gyre).
    #[arg(long)]
    pub substeps: Option<usize>,
    #[arg(long, value_enum)]
    pub integrator: Option<IntegratorArg>,
    /// Also write per-frame `id,x,y,color_key` CSVs for animation.
    #[arg(long)]
    pub gif_frames: bool,
}

#[derive(Debug, Args)]
pub struct KernelArgs {
    /// A dataset file (`.csv` or `.rmra`) or a directory of frame files.
    pub input: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Baseline {
    DynamicLaplacian,
    HatS,
    HatA,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FView {
    Abs,
    Signed,
}

#[derive(Debug, Args)]
pub struct ComposeArgs {
    pub w1: PathBuf,
    pub w2: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub p: f64,
    /// Embedding dimension.
    #[arg(long, default_value_t = 4)]
    pub m: usize,
    /// Eigenvector selection for F.
    #[arg(long, value_enum, default_value_t = FView::Abs)]
    pub f_view: FView,
    /// With `--f-view signed`: number of positive eigenvalues (the rest are negative).
    #[arg(long)]
    pub positive: Option<usize>,
    /// Also compute a product-based baseline operator.
    #[arg(long, value_enum)]
    pub baseline: Option<Baseline>,
}

#[derive(Debug, Args)]
pub struct TreeArgs {
    /// Directory of operator files (`.rmra`), ordered by file name.
    pub input: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub p: f64,
    /// Embedding dimension per node; 0 skips embeddings.
    #[arg(long, default_value_t = 0)]
    pub m: usize,
    /// Write nodes level by level instead of holding the whole tree.
    #[arg(long)]
    pub streaming: bool,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    /// Embedding CSV (header of eigenvalues).
    pub embedding: PathBuf,
    #[arg(long)]
    pub k: usize,
    /// 1-based embedding columns to cluster on.
    #[arg(long, value_delimiter = ',', default_value = "2")]
    pub columns: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Theorems,
    Toy,
    All,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value_t = Suite::All)]
    pub suite: Suite,
    /// Seeded instances per oracle.
    #[arg(long, default_value_t = 100)]
    pub seeds: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OperatorKind {
    S,
    F,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Tree directory written by `tree`.
    #[arg(long, conflicts_with = "embedding")]
    pub tree: Option<PathBuf>,
    /// Node level (default: the root).
    #[arg(long)]
    pub level: Option<usize>,
    /// Node index within the level.
    #[arg(long, default_value_t = 1)]
    pub node: usize,
    #[arg(long, value_enum, default_value_t = OperatorKind::S)]
    pub operator: OperatorKind,
    /// Embedding CSV instead of a tree node.
    #[arg(long)]
    pub embedding: Option<PathBuf>,
    /// 1-based eigenvector index.
    #[arg(long, default_value_t = 2)]
    pub vector: usize,
    /// Point coordinates: a dataset file or a directory of frames.
    #[arg(long)]
    pub points: PathBuf,
    /// Number of equispaced frames to emit when `--points` is a directory.
    #[arg(long, default_value_t = 8)]
    pub count: usize,
}

/// JSON run configuration. Unknown keys are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub routing: Option<RoutingArg>,
    pub bandwidth_scale: Option<f64>,
    pub sigma: Option<f64>,
    pub gyre: Option<GyreConfig>,
    pub tori: Option<TorusConfig>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        io::read_json(path)
    }

    pub fn validate(&self) -> Result<()> {
        if self.threads == Some(0) {
            return Err(Error::InvalidParameter("threads must be at least 1".into()));
        }
        self.kernel().validate()?;
        if let Some(g) = &self.gyre {
            g.validate()?;
        }
        if let Some(t) = &self.tori {
            t.validate()?;
        }
        Ok(())
    }

    fn merge_flags(mut self, g: &GlobalArgs) -> Self {
        self.seed = g.seed.or(self.seed);
        self.threads = g.threads.or(self.threads);
        self.out = g.out.clone().or(self.out);
        self.routing = g.routing.or(self.routing);
        self.bandwidth_scale = g.bandwidth_scale.or(self.bandwidth_scale);
        self.sigma = g.sigma.or(self.sigma);
        self
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn out(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("rmra-out"))
    }

    pub fn routing(&self) -> Routing {
        self.routing.map(Routing::from).unwrap_or_default()
    }

    pub fn kernel(&self) -> KernelConfig {
        match self.sigma {
            Some(s) => KernelConfig::fixed(s),
            None => KernelConfig::median_times(self.bandwidth_scale.unwrap_or(1.0)),
        }
    }
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let base = match &cli.global.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let cfg = base.merge_flags(&cli.global);
    cfg.validate()?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cfg.threads {
        pool = pool.num_threads(t);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot build thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Gen(a) => cmd_gen(&cfg, &a),
        Command::Kernel(a) => cmd_kernel(&cfg, &a),
        Command::Compose(a) => cmd_compose(&cfg, &a),
        Command::Tree(a) => cmd_tree(&cfg, &a),
        Command::Cluster(a) => cmd_cluster(&cfg, &a),
        Command::Verify(a) => cmd_verify(&cfg, &a),
        Command::Plotdata(a) => cmd_plotdata(&cfg, &a),
    })
}

fn manifest(out: &Path, command: &str, body: serde_json::Value) -> Result<()> {
    let mut v = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
    });
    if let (Some(m), serde_json::Value::Object(b)) = (v.as_object_mut(), body) {
        m.extend(b);
    }
    io::write_json(&out.join("manifest.json"), &v)
}

fn frame_name(k: usize) -> String {
    format!("frame_{k:04}.csv")
}

pub fn cmd_gen(cfg: &RunConfig, a: &GenArgs) -> Result<()> {
    let out = cfg.out();
    std::fs::create_dir_all(&out)?;
    let seed = cfg.seed();
    match a.kind {
        GenKind::ToySpd | GenKind::ToySpsd => {
            let toy = if a.kind == GenKind::ToySpd {
                datagen::toy_spd_pair()
            } else {
                datagen::toy_spsd_pair()
            };
            io::write_matrix(&out.join("M1.rmra"), toy.m1.as_matrix())?;
            io::write_matrix(&out.join("M2.rmra"), toy.m2.as_matrix())?;
            io::write_matrix(&out.join("Psi.rmra"), &toy.psi)?;
            manifest(
                &out,
                "gen",
                json!({
                    "kind": format!("{:?}", a.kind),
                    "lambda1": toy.lambda1,
                    "lambda2": toy.lambda2,
                    "files": ["M1.rmra", "M2.rmra", "Psi.rmra"],
                }),
            )
        }
        GenKind::Gyre => {
            let mut g = cfg.gyre.clone().unwrap_or_else(|| GyreConfig::desk(2500, 256, seed));
            if let Some(n) = a.n {
                g.n = n;
            }
            if let Some(t) = a.t {
                g.t = t;
                g.dt = 1.0 / t as f64;
                g.substeps = GyreConfig::substeps_for(g.dt);
            }
            if let Some(dt) = a.dt {
                g.dt = dt;
                g.substeps = GyreConfig::substeps_for(dt);
            }
            if let Some(s) = a.substeps {
                g.substeps = s;
            }
            if let Some(i) = a.integrator {
                g.integrator = match i {
                    IntegratorArg::Rk4 => Integrator::Rk4,
                    IntegratorArg::Euler => Integrator::Euler,
                };
            }
            if cfg.seed.is_some() || cfg.gyre.is_none() {
                g.seed = seed;
            }
            let traj = datagen::double_gyre(&g)?;
            let frames = out.join("frames");
            let mut files = Vec::new();
            for (k, f) in traj.frames.iter().enumerate() {
                let name = frame_name(k + 1);
                io::write_csv(&frames.join(&name), f.points())?;
                files.push(format!("frames/{name}"));
            }
            if a.gif_frames {
                let x0 = traj.frames[0].points().column(0).into_owned();
                let gif = out.join("gif");
                std::fs::create_dir_all(&gif)?;
                for (k, f) in traj.frames.iter().enumerate() {
                    let mut w = csv::Writer::from_path(gif.join(frame_name(k + 1)))?;
                    w.write_record(["id", "x", "y", "color_key"])?;
                    for i in 0..f.n_points() {
                        w.write_record([
                            i.to_string(),
                            io::format_f64(f.points()[(i, 0)]),
                            io::format_f64(f.points()[(i, 1)]),
                            io::format_f64(x0[i]),
                        ])?;
                    }
                    w.flush()?;
                }
            }
            manifest(
                &out,
                "gen",
                json!({ "kind": "gyre", "config": g, "times": traj.times, "files": files }),
            )
        }
        GenKind::ToriCommon | GenKind::ToriUnique => {
            let mut t = cfg.tori.clone().unwrap_or_default();
            t.variant = if a.kind == GenKind::ToriCommon {
                TorusVariant::Common
            } else {
                TorusVariant::Unique
            };
            if let Some(n) = a.n {
                t.n = n;
            }
            if cfg.seed.is_some() || cfg.tori.is_none() {
                t.seed = seed;
            }
            let s = datagen::tori(&t)?;
            io::write_csv(&out.join("X1.csv"), s.x1.points())?;
            io::write_csv(&out.join("X2.csv"), s.x2.points())?;
            io::write_csv(&out.join("angles.csv"), &s.angles)?;
            manifest(
                &out,
                "gen",
                json!({ "kind": "tori", "config": t, "files": ["X1.csv", "X2.csv", "angles.csv"] }),
            )
        }
    }
}

/// Data files of a directory (`.csv` / `.rmra`), sorted by name.
pub fn list_frames(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && matches!(p.extension().and_then(|e| e.to_str()), Some("csv" | "rmra")))
        .collect();
    v.sort();
    if v.is_empty() {
        return Err(Error::InvalidParameter(format!("no .csv or .rmra files in {}", dir.display())));
    }
    Ok(v)
}

pub fn cmd_kernel(cfg: &RunConfig, a: &KernelArgs) -> Result<()> {
    let out = cfg.out();
    std::fs::create_dir_all(&out)?;
    let kc = cfg.kernel();
    let inputs = if a.input.is_dir() {
        list_frames(&a.input)?
    } else {
        vec![a.input.clone()]
    };
    let single = !a.input.is_dir();
    let mut entries = Vec::new();
    for (k, p) in inputs.iter().enumerate() {
        let ds = Dataset::load(p)?;
        let op = diffusion::diffusion_operator(&ds, &kc)?;
        let name = if single {
            "W.rmra".to_string()
        } else {
            format!("W_{:04}.rmra", k + 1)
        };
        io::write_matrix(&out.join(&name), op.w.as_matrix())?;
        entries.push(json!({ "input": p, "output": name, "sigma": op.sigma }));
    }
    manifest(&out, "kernel", json!({ "kernel": kc, "operators": entries }))
}

fn read_operator(p: &Path) -> Result<SymmetricMatrix> {
    SymmetricMatrix::new(io::read_any(p)?)
}

fn write_spectrum(path: &Path, values: &nalgebra::DVector<f64>) -> Result<()> {
    io::write_csv(path, &DMatrix::from_column_slice(values.len(), 1, values.as_slice()))
}

pub fn cmd_compose(cfg: &RunConfig, a: &ComposeArgs) -> Result<()> {
    let out = cfg.out();
    std::fs::create_dir_all(&out)?;
    let w1 = read_operator(&a.w1)?;
    let w2 = read_operator(&a.w2)?;
    let opts = ComposeOptions {
        p: GeodesicParam::new(a.p)?,
        routing: cfg.routing(),
    };
    let mut pair = composite::compose(&w1, &w2, &opts)?;
    pair.provenance = composite::Provenance {
        first: a.w1.display().to_string(),
        second: a.w2.display().to_string(),
    };
    let s = pair.s.to_dense()?;
    let f = pair.f.to_dense()?;
    io::write_matrix(&out.join("S.rmra"), s.as_matrix())?;
    io::write_matrix(&out.join("F.rmra"), f.as_matrix())?;
    write_spectrum(&out.join("S_eigenvalues.csv"), &sym_eig(&s, EigenOrdering::ByValueDesc)?.values)?;
    write_spectrum(&out.join("F_eigenvalues.csv"), &sym_eig(&f, EigenOrdering::ByAbsValueDesc)?.values)?;
    let f_sel = match a.f_view {
        FView::Abs => Selection::TopByAbsValue,
        FView::Signed => {
            let pos = a.positive.unwrap_or(a.m / 2).min(a.m);
            Selection::Signed {
                positive: pos,
                negative: a.m - pos,
            }
        }
    };
    composite::embed(&s, a.m, Selection::TopByValue)?.write_csv(&out.join("S_embedding.csv"))?;
    composite::embed(&f, a.m, f_sel)?.write_csv(&out.join("F_embedding.csv"))?;
    let mut extra = json!(null);
    if let Some(b) = a.baseline {
        let (name, emb) = match b {
            Baseline::DynamicLaplacian => {
                let m = composite::baseline_dynamic_laplacian(&w1, &w2)?;
                io::write_matrix(&out.join("dynamic_laplacian.rmra"), m.as_matrix())?;
                ("dynamic_laplacian", composite::embed(&m, a.m, Selection::TopByValue)?)
            }
            Baseline::HatS => {
                let m = composite::baseline_hat_s(&w1, &w2)?;
                io::write_matrix(&out.join("hat_s.rmra"), m.as_matrix())?;
                ("hat_s", composite::embed(&m, a.m, Selection::TopByValue)?)
            }
            Baseline::HatA => {
                let m = composite::baseline_hat_a(&w1, &w2)?;
                io::write_matrix(&out.join("hat_a.rmra"), &m)?;
                ("hat_a", composite::embed_singular(&m, a.m)?)
            }
        };
        emb.write_csv(&out.join(format!("{name}_embedding.csv")))?;
        extra = json!(name);
    }
    manifest(
        &out,
        "compose",
        json!({
            "inputs": [pair.provenance.first, pair.provenance.second],
            "p": a.p,
            "route": pair.route,
            "m": a.m,
            "baseline": extra,
        }),
    )
}

pub fn cmd_tree(cfg: &RunConfig, a: &TreeArgs) -> Result<()> {
    let out = cfg.out();
    let files: Vec<PathBuf> = list_frames(&a.input)?
        .into_iter()
        .filter(|p| p.extension().and_then(|e| e.to_str()) == Some("rmra"))
        .collect();
    let ops = files.iter().map(|p| read_operator(p)).collect::<Result<Vec<_>>>()?;
    let opts = ComposeOptions {
        p: GeodesicParam::new(a.p)?,
        routing: cfg.routing(),
    };
    let tree_dir = out.join("tree");
    let m: TreeManifest = if a.streaming {
        tree::build_tree_streaming(&ops, &opts, &tree_dir)?
    } else {
        let t = tree::build_tree(&ops, &opts)?;
        let m = t.save(&tree_dir)?;
        if a.m > 0 {
            let emb_dir = out.join("embeddings");
            std::fs::create_dir_all(&emb_dir)?;
            for e in tree::tree_embeddings(&t, a.m, Selection::TopByValue, Selection::TopByAbsValue)? {
                e.s.write_csv(&emb_dir.join(format!("S_L{}_t{}.csv", e.level, e.t)))?;
                e.f.write_csv(&emb_dir.join(format!("F_L{}_t{}.csv", e.level, e.t)))?;
            }
        }
        m
    };
    manifest(
        &out,
        "tree",
        json!({
            "inputs": files,
            "p": a.p,
            "route": m.routing,
            "levels": m.levels,
            "nodes": m.nodes.len(),
            "streaming": a.streaming,
        }),
    )
}

pub fn cmd_cluster(cfg: &RunConfig, a: &ClusterArgs) -> Result<()> {
    let out = cfg.out();
    std::fs::create_dir_all(&out)?;
    let emb = Embedding::read_csv(&a.embedding)?;
    for &c in &a.columns {
        if c == 0 || c > emb.dim() {
            return Err(Error::OutOfBounds(format!("column {c} outside 1..={}", emb.dim())));
        }
    }
    let data = DMatrix::from_fn(emb.vectors.nrows(), a.columns.len(), |i, j| emb.vectors[(i, a.columns[j] - 1)]);
    let r = cluster::kmeans(&data, &KMeansConfig::new(a.k, cfg.seed()))?;
    let mut w = csv::Writer::from_path(out.join("labels.csv"))?;
    w.write_record(["id", "label"])?;
    for (i, l) in r.labels.iter().enumerate() {
        w.write_record([i.to_string(), l.to_string()])?;
    }
    w.flush()?;
    manifest(
        &out,
        "cluster",
        json!({
            "input": a.embedding,
            "k": a.k,
            "columns": a.columns,
            "sizes": r.sizes(),
            "inertia": r.inertia,
            "iterations": r.iterations,
        }),
    )
}

/// The reports of one verification suite.
pub fn verify_reports(suite: Suite, seeds: u64, seed0: u64) -> Result<Vec<Report>> {
    let mut reports = Vec::new();
    if matches!(suite, Suite::Toy | Suite::All) {
        reports.push(verify::check_spd_toy()?);
        reports.push(verify::check_spsd_toy()?);
    }
    if matches!(suite, Suite::Theorems | Suite::All) {
        let (t1, t2) = verify::common_spectrum_suite(20, seeds, seed0)?;
        reports.push(t1);
        reports.push(t2);
        for eps in verify::THEOREM4_EPS {
            reports.push(verify::theorem3_suite(20, eps, seeds, seed0)?);
        }
        reports.push(verify::theorem4_suite(10, 0.1, seeds.clamp(1, 20), seed0)?);
        let (eq, rec) = verify::random_pair_suite(seeds, seed0)?;
        reports.push(eq);
        reports.push(rec);
    }
    Ok(reports)
}

pub fn cmd_verify(cfg: &RunConfig, a: &VerifyArgs) -> Result<()> {
    let out = cfg.out();
    std::fs::create_dir_all(&out)?;
    let reports = verify_reports(a.suite, a.seeds, cfg.seed())?;
    io::write_json(&out.join("report.json"), &reports)?;
    println!("{}", serde_json::to_string_pretty(&reports)?);
    let failed: Vec<&str> = reports.iter().filter(|r| !r.pass).map(|r| r.oracle.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::Verification(format!("failed oracles: {}", failed.join(", "))))
    }
}

fn plot_vector(a: &PlotArgs) -> Result<(nalgebra::DVector<f64>, serde_json::Value)> {
    if let Some(p) = &a.embedding {
        let emb = Embedding::read_csv(p)?;
        if a.vector == 0 || a.vector > emb.dim() {
            return Err(Error::OutOfBounds(format!("vector {} outside 1..={}", a.vector, emb.dim())));
        }
        return Ok((emb.vectors.column(a.vector - 1).into_owned(), json!({ "embedding": p })));
    }
    let Some(dir) = &a.tree else {
        return Err(Error::InvalidParameter("one of --tree or --embedding is required".into()));
    };
    let m = TreeManifest::load(dir)?;
    let level = a.level.unwrap_or(m.levels);
    let (op, ordering) = match a.operator {
        OperatorKind::S => (m.read_s(dir, level, a.node)?, EigenOrdering::ByValueDesc),
        OperatorKind::F => (m.read_f(dir, level, a.node)?, EigenOrdering::ByAbsValueDesc),
    };
    if a.vector == 0 || a.vector > op.dim() {
        return Err(Error::OutOfBounds(format!("vector {} outside 1..={}", a.vector, op.dim())));
    }
    let e = sym_eig(&op, ordering)?;
    Ok((
        e.vectors.column(a.vector - 1).into_owned(),
        json!({ "tree": dir, "level": level, "node": a.node, "eigenvalue": e.values[a.vector - 1] }),
    ))
}

pub fn cmd_plotdata(cfg: &RunConfig, a: &PlotArgs) -> Result<()> {
    let out = cfg.out();
    std::fs::create_dir_all(&out)?;
    let (v, source) = plot_vector(a)?;
    let frames: Vec<PathBuf> = if a.points.is_dir() {
        let all = list_frames(&a.points)?;
        let count = a.count.clamp(1, all.len());
        let picks: Vec<usize> = if count == 1 {
            vec![0]
        } else {
            (0..count).map(|k| k * (all.len() - 1) / (count - 1)).collect()
        };
        picks.into_iter().map(|k| all[k].clone()).collect()
    } else {
        vec![a.points.clone()]
    };
    let mut written = Vec::new();
    for p in &frames {
        let ds = Dataset::load(p)?;
        if ds.n_points() != v.len() {
            return Err(Error::DimensionMismatch {
                expected: v.len(),
                found: ds.n_points(),
            });
        }
        let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or("points");
        let name = format!("plot_{stem}.csv");
        let mut w = csv::Writer::from_path(out.join(&name))?;
        let mut header = vec!["id".to_string()];
        header.extend(["x", "y", "z", "w"].iter().take(ds.dim()).map(|s| s.to_string()));
        for c in 4..ds.dim() {
            header.push(format!("c{}", c + 1));
        }
        header.push("value".into());
        w.write_record(&header)?;
        for i in 0..ds.n_points() {
            let mut rec = vec![i.to_string()];
            rec.extend(ds.points().row(i).iter().map(|x| io::format_f64(*x)));
            rec.push(io::format_f64(v[i]));
            w.write_record(&rec)?;
        }
        w.flush()?;
        written.push(name);
    }
    manifest(
        &out,
        "plotdata",
        json!({ "source": source, "vector": a.vector, "points": a.points, "files": written }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_global_flags_after_subcommand() {
        let cli = Cli::try_parse_from(["rmra", "gen", "gyre", "--n", "10", "--seed", "3", "--threads", "1"]).unwrap();
        assert_eq!(cli.global.seed, Some(3));
        assert_eq!(cli.global.threads, Some(1));
        assert!(matches!(cli.command, Command::Gen(GenArgs { kind: GenKind::Gyre, n: Some(10), .. })));
    }

    #[test]
    fn run_config_rejects_unknown_keys() {
        let err = serde_json::from_str::<RunConfig>(r#"{"seed": 1, "bogus": 2}"#);
        assert!(err.is_err());
        let ok: RunConfig = serde_json::from_str(r#"{"seed": 1, "routing": "spsd"}"#).unwrap();
        assert_eq!(ok.routing(), Routing::Spsd);
    }

    #[test]
    fn flags_override_config() {
        let cfg = RunConfig {
            seed: Some(1),
            bandwidth_scale: Some(2.0),
            ..Default::default()
        };
        let g = GlobalArgs {
            seed: Some(9),
            threads: None,
            out: None,
            routing: None,
            bandwidth_scale: None,
            sigma: Some(0.3),
            config: None,
        };
        let m = cfg.merge_flags(&g);
        assert_eq!(m.seed(), 9);
        assert_eq!(m.kernel(), KernelConfig::fixed(0.3));
    }

    #[test]
    fn invalid_bandwidth_is_a_validation_error() {
        let cfg = RunConfig {
            bandwidth_scale: Some(-1.0),
            ..Default::default()
        };
        assert_eq!(cfg.validate().unwrap_err().exit_code(), 1);
    }
}
