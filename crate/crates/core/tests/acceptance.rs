//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line.
//!
//! Run with `cargo test --test acceptance -- --nocapture --test-threads 1`
//! to see the lines in order.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rmra::cluster::{kmeans, KMeansConfig};
use rmra::composite::{self, ComposeOptions, Route, Selection};
use rmra::datagen::{self, GyreConfig, TorusConfig, TorusVariant};
use rmra::diffusion::{diffusion_operator, KernelConfig};
use rmra::linalg::{sym_eig, EigenOrdering, SymmetricMatrix};
use rmra::tree::build_tree;
use rmra::verify;

fn report(id: u32, name: &str, pass: bool, detail: impl AsRef<str>) {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("criterion {id:>2} [{tag}] {name}: {}", detail.as_ref());
}

#[test]
fn criterion_01_02_common_spectrum() {
    let start = Instant::now();
    let (t1, t2) = verify::common_spectrum_suite(20, 100, 0).unwrap();
    let elapsed = start.elapsed();
    let angle = t1.extra.get("vector_angle").copied().unwrap_or(f64::NAN);
    let ok1 = t1.pass && t1.instances == 100 && t1.max_residual <= 1e-9 && angle < 1e-7 && elapsed < Duration::from_secs(10);
    report(
        1,
        "S eigenpairs on shared eigenbases",
        ok1,
        format!("100 instances, max value error {:.2e}, max angle {angle:.2e} rad, {elapsed:.2?}", t1.max_residual),
    );
    let signs = t2.extra.get("sign_mismatch").copied().unwrap_or(f64::NAN);
    let ok2 = t2.pass && t2.instances == 100 && t2.max_residual <= 1e-9 && signs == 0.0;
    report(
        2,
        "F eigenvalues and signs on shared eigenbases",
        ok2,
        format!("max value error {:.2e}, sign mismatches {signs}", t2.max_residual),
    );
    assert!(ok1, "{t1:?}");
    assert!(ok2, "{t2:?}");
}

#[test]
fn criterion_03_toy_pair() {
    let start = Instant::now();
    let toy = datagen::toy_spd_pair();
    let pair = composite::compose_spd(&toy.m1, &toy.m2).unwrap();
    let s = sym_eig(&pair.s.to_dense().unwrap(), EigenOrdering::ByValueDesc).unwrap();
    let f = sym_eig(&pair.f.to_dense().unwrap(), EigenOrdering::ByValueDesc).unwrap();
    let elapsed = start.elapsed();

    let root = 0.005f64.sqrt();
    let f_top = 0.5 * root * 50f64.ln();
    let want_s = [1.0, 0.2, root, root];
    let want_f = [f_top, 0.0, 0.0, -f_top];
    let s_err = (0..4).map(|i| (s.values[i] - want_s[i]).abs()).fold(0.0, f64::max);
    let f_err = (0..4).map(|i| (f.values[i] - want_f[i]).abs()).fold(0.0, f64::max);

    // S: 1 on ψ₂, 0.2 on ψ₄, the degenerate pair spans {ψ₁, ψ₃}
    let psi = &toy.psi;
    let align = |v: nalgebra::DVectorView<f64>, k: usize| 1.0 - v.dot(&psi.column(k)).abs();
    let mut vec_err = align(s.vectors.column(0), 1).max(align(s.vectors.column(1), 3));
    let pair_basis = DMatrix::from_columns(&[psi.column(0), psi.column(2)]);
    for k in 2..4 {
        let v = s.vectors.column(k);
        vec_err = vec_err.max((v - &pair_basis * (pair_basis.transpose() * v)).norm());
    }
    vec_err = vec_err.max(align(f.vectors.column(0), 0)).max(align(f.vectors.column(3), 2));

    let oracle = verify::check_spd_toy().unwrap();
    let ok = s_err <= 1e-9 && f_err <= 1e-9 && vec_err < 1e-10 && oracle.pass && elapsed < Duration::from_secs(1);
    report(
        3,
        "toy pair spectra",
        ok,
        format!(
            "S {:?}, F {:?}, value error {:.1e}/{:.1e}, vector error {vec_err:.1e}, {elapsed:.2?}",
            s.values.as_slice().iter().map(|v| format!("{v:.7}")).collect::<Vec<_>>(),
            f.values.as_slice().iter().map(|v| format!("{v:+.7}")).collect::<Vec<_>>(),
            s_err,
            f_err
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_04_rank_deficient_toy() {
    let start = Instant::now();
    let r = verify::check_spsd_toy().unwrap();
    let elapsed = start.elapsed();
    let null = r.extra["psi4_magnitude"];
    let ok = r.pass && r.max_residual <= 1e-8 && null < 1e-10 && elapsed < Duration::from_secs(1);
    report(
        4,
        "rank-3 toy pair through the low-rank path",
        ok,
        format!("max deviation from full-rank values {:.2e}, ψ₄ magnitude {null:.2e}, {elapsed:.2?}", r.max_residual),
    );
    assert!(ok, "{r:?}");
}

#[test]
fn criterion_05_06_random_pairs() {
    let (eq, rec) = verify::random_pair_suite(100, 0).unwrap();
    let ok5 = eq.pass && eq.instances == 100 && eq.max_residual <= 1e-9;
    report(
        5,
        "product forms of S and F",
        ok5,
        format!("100 pairs (N <= 50, cond <= 1e6), max relative discrepancy {:.2e}", eq.max_residual),
    );
    let ok6 = rec.pass && rec.instances == 100 && rec.max_residual <= 1e-8;
    report(
        6,
        "reconstruction Exp_S(±F)",
        ok6,
        format!("max relative error {:.2e}", rec.max_residual),
    );
    assert!(ok5, "{eq:?}");
    assert!(ok6, "{rec:?}");
}

#[test]
fn criterion_07_weakly_common_s() {
    let mut ok = true;
    let mut parts = Vec::new();
    for eps in [1e-2, 1e-3, 1e-4] {
        let r = verify::theorem3_suite(20, eps, 100, 0).unwrap();
        let good = r.pass && r.instances == 100 && r.max_residual <= eps + 10.0 * eps * eps;
        ok &= good;
        parts.push(format!(
            "eps {eps:.0e}: max residual {:.3e} (budget {:.3e})",
            r.max_residual,
            eps + 10.0 * eps * eps
        ));
    }
    report(7, "pseudo-eigenvector bound for S", ok, parts.join("; "));
    assert!(ok);
}

#[test]
fn criterion_08_weakly_common_f() {
    let mut ok = true;
    let mut spreads = Vec::new();
    for seed in 0..20 {
        let spec = verify::PerturbationSpec::random(10, 0.1, seed).unwrap();
        assert_eq!(spec.c, 2.0);
        assert!(spec.gamma_min() >= 0.1 - 1e-12);
        let r = verify::check_theorem4(&spec, 0).unwrap();
        ok &= r.pass && r.max_residual < 4.0;
        spreads.push(r.max_residual);
    }
    let worst = spreads.iter().copied().fold(0.0, f64::max);
    report(
        8,
        "O(eps) pseudo-eigenvector residual for F",
        ok,
        format!("20 specs (c = 2, gamma_min = 0.1), worst residual/eps spread {worst:.4} over eps in {{1e-2, 1e-3, 1e-4}}"),
    );
    assert!(ok);
}

fn gyre_operators(cfg: &GyreConfig, scale: f64) -> Vec<SymmetricMatrix> {
    let traj = datagen::double_gyre(cfg).unwrap();
    let kc = KernelConfig::median_times(scale);
    traj.frames.iter().map(|f| diffusion_operator(f, &kc).unwrap().w).collect()
}

#[test]
fn criterion_09_double_gyre() {
    let ops = gyre_operators(&GyreConfig::desk(400, 64, 7), 0.5);
    let start = Instant::now();
    let tree = build_tree(&ops, &ComposeOptions::default()).unwrap();
    let elapsed = start.elapsed();
    let timing_ok = tree.node_count() == 63 && elapsed < Duration::from_secs(120);

    let constant = vec![ops[0].clone(); 64];
    let ctree = build_tree(&constant, &ComposeOptions::default()).unwrap();
    let max_f = ctree
        .nodes()
        .map(|n| n.f.eig().unwrap().max_abs())
        .fold(0.0, f64::max);
    let control_ok = ctree.node_count() == 63 && max_f < 1e-8;

    let eig = tree.root().s.eig();
    let psi2 = DMatrix::from_column_slice(400, 1, eig.vectors.column(1).as_slice());
    let sizes = kmeans(&psi2, &KMeansConfig::new(2, 7)).unwrap().sizes();
    let cluster_ok = sizes.iter().all(|&s| s * 5 >= 400);

    let ok = timing_ok && control_ok && cluster_ok;
    report(
        9,
        "double gyre tree",
        ok,
        format!(
            "{} nodes via {:?} in {elapsed:.2?}; constant control max |F eig| {max_f:.1e}; root psi2 clusters {sizes:?}",
            tree.node_count(),
            tree.route()
        ),
    );
    assert!(ok);
}

fn pearson(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.sum() / n, b.sum() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for i in 0..a.len() {
        let (x, y) = (a[i] - ma, b[i] - mb);
        sab += x * y;
        saa += x * x;
        sbb += y * y;
    }
    sab / (saa * sbb).sqrt()
}

#[test]
fn criterion_10_tori() {
    let sample = datagen::tori(&TorusConfig {
        n: 500,
        seed: 1,
        variant: TorusVariant::Common,
        ..Default::default()
    })
    .unwrap();
    let kc = KernelConfig::median_times(1.0);
    let w1 = diffusion_operator(&sample.x1, &kc).unwrap().w;
    let w2 = diffusion_operator(&sample.x2, &kc).unwrap().w;
    let pair = composite::compose(&w1, &w2, &ComposeOptions::default()).unwrap();
    let emb = composite::embed_eigen(&pair.f.eig().unwrap(), 4, Selection::Signed { positive: 2, negative: 2 }).unwrap();

    let th = |c: usize, f: fn(f64) -> f64| sample.angles.column(c).map(f);
    let features = [th(0, f64::cos), th(0, f64::sin), th(1, f64::cos), th(1, f64::sin)];
    // corr[v][f]
    let corr: Vec<[f64; 4]> = (0..4)
        .map(|v| {
            let col = emb.vectors.column(v).into_owned();
            std::array::from_fn(|f| pearson(&col, &features[f]).abs())
        })
        .collect();
    let best_per_feature: Vec<f64> = (0..4).map(|f| corr.iter().map(|c| c[f]).fold(0.0, f64::max)).collect();
    let coverage_ok = best_per_feature.iter().all(|&c| c >= 0.7);

    // strongest vector on each side of zero, and which angle it tracks
    let side = |range: std::ops::Range<usize>| {
        let (v, f) = range
            .flat_map(|v| (0..4).map(move |f| (v, f)))
            .max_by(|a, b| corr[a.0][a.1].total_cmp(&corr[b.0][b.1]))
            .unwrap();
        (v, if f < 2 { 1 } else { 2 })
    };
    let (pv, p_angle) = side(0..2);
    let (nv, n_angle) = side(2..4);
    let sign_ok = emb.values[pv] > 0.0 && emb.values[nv] < 0.0 && p_angle == 1 && n_angle == 2;

    let ok = pair.route == Route::Spsd && coverage_ok && sign_ok;
    report(
        10,
        "tori signed F eigenvectors",
        ok,
        format!(
            "route {:?}; best |corr| with cos/sin theta1, cos/sin theta2: {:?}; top positive vector -> theta{p_angle}, top negative -> theta{n_angle}",
            pair.route,
            best_per_feature.iter().map(|c| format!("{c:.3}")).collect::<Vec<_>>()
        ),
    );
    assert!(ok, "{corr:?} {:?}", emb.values);
}

fn snapshot(dir: &Path, into: &mut BTreeMap<PathBuf, Vec<u8>>) {
    for entry in std::fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.is_dir() {
            snapshot(&p, into);
        } else {
            into.insert(p.clone(), std::fs::read(&p).unwrap());
        }
    }
}

fn pipeline(base: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let _ = std::fs::remove_dir_all(base);
    std::fs::create_dir_all(base).unwrap();
    let d = |s: &str| base.join(s).display().to_string();
    let runs: Vec<Vec<String>> = vec![
        vec!["gen".into(), "toy-spd".into(), "--out".into(), d("toy")],
        vec!["gen".into(), "toy-spsd".into(), "--out".into(), d("toy3")],
        vec![
            "gen".into(),
            "gyre".into(),
            "--n".into(),
            "60".into(),
            "--t".into(),
            "8".into(),
            "--seed".into(),
            "7".into(),
            "--gif-frames".into(),
            "--out".into(),
            d("gyre"),
        ],
        vec!["gen".into(), "tori-common".into(), "--n".into(), "80".into(), "--out".into(), d("tori")],
        vec!["kernel".into(), d("gyre/frames"), "--bandwidth-scale".into(), "0.5".into(), "--out".into(), d("kernels")],
        vec!["kernel".into(), d("tori/X1.csv"), "--out".into(), d("k1")],
        vec!["kernel".into(), d("tori/X2.csv"), "--sigma".into(), "3.0".into(), "--out".into(), d("k2")],
        vec![
            "compose".into(),
            d("toy/M1.rmra"),
            d("toy/M2.rmra"),
            "--m".into(),
            "2".into(),
            "--f-view".into(),
            "signed".into(),
            "--baseline".into(),
            "hat-a".into(),
            "--out".into(),
            d("compose_toy"),
        ],
        vec!["compose".into(), d("toy3/M1.rmra"), d("toy3/M2.rmra"), "--out".into(), d("compose_toy3")],
        vec![
            "compose".into(),
            d("k1/W.rmra"),
            d("k2/W.rmra"),
            "--baseline".into(),
            "dynamic-laplacian".into(),
            "--out".into(),
            d("compose_tori"),
        ],
        vec!["tree".into(), d("kernels"), "--m".into(), "3".into(), "--out".into(), d("tree")],
        vec!["tree".into(), d("kernels"), "--streaming".into(), "--out".into(), d("tree_stream")],
        vec![
            "cluster".into(),
            d("tree/embeddings/S_L3_t1.csv"),
            "--k".into(),
            "2".into(),
            "--out".into(),
            d("labels"),
        ],
        vec![
            "plotdata".into(),
            "--tree".into(),
            d("tree/tree"),
            "--points".into(),
            d("gyre/frames"),
            "--count".into(),
            "4".into(),
            "--out".into(),
            d("plot"),
        ],
        vec!["verify".into(), "--suite".into(), "all".into(), "--seeds".into(), "3".into(), "--out".into(), d("verify")],
    ];
    for args in &runs {
        let out = Command::new(env!("CARGO_BIN_EXE_rmra"))
            .args(args)
            .arg("--threads")
            .arg("1")
            .env_remove("RMRA_OUT")
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let mut files = BTreeMap::new();
    snapshot(base, &mut files);
    files
}

#[test]
fn criterion_11_cli_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let base = tmp.path().join("run");
    let first = pipeline(&base);
    let second = pipeline(&base);
    let differing: Vec<_> = first
        .iter()
        .filter(|(k, v)| second.get(*k) != Some(*v))
        .map(|(k, _)| k.strip_prefix(&base).unwrap().display().to_string())
        .collect();
    let ok = first.len() == second.len() && differing.is_empty() && first.len() > 20;
    report(
        11,
        "bitwise-identical CLI reruns with --threads 1",
        ok,
        format!("15 commands, {} output files, {} differ", first.len(), differing.len()),
    );
    assert!(ok, "{differing:?}");
}
