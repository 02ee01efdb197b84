//! Build the baseline mesh, deform it and write both in the text format.

use std::path::PathBuf;

use thermofatigue::config::LoadedConfig;
use thermofatigue::geometry::Mesh;
use thermofatigue::optimize::solve_state;

fn main() -> thermofatigue::Result<()> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/demo.toml");
    let cfg = LoadedConfig::load(&path)?;
    let problem = cfg.problem()?;
    let mut theta = vec![0.0; problem.dimension()];
    theta[1] = 0.04;
    let deformed = solve_state(&problem, &theta)?.shape.mesh;

    let dir = std::env::temp_dir().join("thermofatigue-mesh-export");
    std::fs::create_dir_all(&dir)?;
    for (name, mesh) in [("baseline.txt", &*problem.baseline_mesh), ("deformed.txt", &*deformed)] {
        let text = mesh.to_text();
        assert_eq!(&Mesh::from_text(&text)?, mesh);
        std::fs::write(dir.join(name), text)?;
        println!(
            "{name}: {} nodes, {} cells, {} boundary facets, area {:.6}",
            mesh.num_nodes(),
            mesh.num_cells(),
            mesh.facets.len(),
            mesh.total_volume()
        );
    }
    println!("written to {}", dir.display());
    Ok(())
}
