//! Double-gyre trajectories, one diffusion operator per frame, and the full
//! operator tree. The root S splits the particles into the two gyres.
//!
//! `cargo run --release --example double_gyre_tree -- [N] [T] [out_dir]`

use std::time::Instant;

use nalgebra::DMatrix;
use rmra::cluster::{kmeans, KMeansConfig};
use rmra::composite::{ComposeOptions, Selection};
use rmra::datagen::{double_gyre, GyreConfig};
use rmra::diffusion::{diffusion_operator, KernelConfig};
use rmra::tree::{build_tree, node_embeddings};

fn main() -> rmra::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let n = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(400);
    let t = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(64);

    let traj = double_gyre(&GyreConfig::desk(n, t, 7))?;
    let kc = KernelConfig::median_times(0.5);
    let ops = traj
        .frames
        .iter()
        .map(|f| diffusion_operator(f, &kc).map(|d| d.w))
        .collect::<rmra::Result<Vec<_>>>()?;

    let start = Instant::now();
    let tree = build_tree(&ops, &ComposeOptions::default())?;
    println!(
        "{} frames -> {} nodes over {} levels via {:?} in {:.2?}",
        tree.len(),
        tree.node_count(),
        tree.depth(),
        tree.route(),
        start.elapsed()
    );

    for level in 1..=tree.depth() {
        let node = tree.node(level, 1)?;
        let e = node_embeddings(node, 3, Selection::TopByValue, Selection::TopByAbsValue)?;
        println!(
            "L{level} t1 covers {:?}: S {:.4?}  F {:+.4?}",
            node.covered_range(),
            e.s.values.as_slice(),
            e.f.values.as_slice()
        );
    }

    let eig = tree.root().s.eig();
    let psi2 = DMatrix::from_column_slice(n, 1, eig.vectors.column(1).as_slice());
    let km = kmeans(&psi2, &KMeansConfig::new(2, 7))?;
    println!("coherent sets from root psi_2: sizes {:?}", km.sizes());

    if let Some(dir) = args.get(3) {
        let manifest = tree.save(std::path::Path::new(dir))?;
        println!("wrote {} nodes to {dir}", manifest.nodes.len());
    }
    Ok(())
}
