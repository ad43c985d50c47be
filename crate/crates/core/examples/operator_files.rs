//! Builds a small tree level by level straight to disk, then reads a node
//! back through the manifest and compares it with the in-memory build.

use rmra::composite::ComposeOptions;
use rmra::sampling::{random_spd, rng};
use rmra::tree::{build_tree, build_tree_streaming, TreeManifest};

fn main() -> rmra::Result<()> {
    let mut r = rng(3);
    let ops: Vec<_> = (0..8).map(|_| random_spd(12, 1e-2, &mut r).into_symmetric()).collect();
    let dir = std::env::temp_dir().join("rmra-operator-files");
    let _ = std::fs::remove_dir_all(&dir);

    let written = build_tree_streaming(&ops, &ComposeOptions::default(), &dir)?;
    println!("{} nodes, {} levels, routing {:?}", written.nodes.len(), written.levels, written.routing);
    for e in &written.nodes {
        println!("  L{} t{} covers {:?}: {} {}", e.level, e.t, e.covered, e.s_file, e.f_file);
    }

    let manifest = TreeManifest::load(&dir)?;
    let s = manifest.read_s(&dir, 2, 2)?;
    let tree = build_tree(&ops, &ComposeOptions::default())?;
    let same = tree.node(2, 2)?.s.to_dense()?;
    println!("L2 t2 from disk vs memory: {:.1e}", s.rel_diff(&same));
    Ok(())
}
