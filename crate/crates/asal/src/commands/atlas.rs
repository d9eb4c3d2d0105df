//! Simulation atlas: a mosaic of archive members placed by a 2-D
//! projection of their final embeddings.

use std::fmt::Write as _;

use asal_core::atlas::{grid_sample, project_2d, render_atlas, tile_of, AtlasLayout};
use asal_core::search::Archive;
use asal_core::{AnySubstrate, Frame, RolloutSpec};
use serde::{Deserialize, Serialize};

use super::illuminate::ARCHIVE_FILE;
use super::RunOptions;
use crate::checkpoint;
use crate::config::{CommandKind, RunConfig};
use crate::error::{AppError, Result};
use crate::imageio::write_png;
use crate::rundir::{write_text, RunDir};

/// `genome_id,x,y,tile_row,tile_col` for every point, after a comment line
/// naming the projector. Coordinates written by another projector in the
/// same format can replace these.
pub fn layout_csv(layout: &AtlasLayout, ids: &[u64]) -> String {
    let mut out = format!("# projector: {}\ngenome_id,x,y,tile_row,tile_col\n", layout.projector);
    for (id, p) in ids.iter().zip(&layout.projection) {
        let (col, row) = tile_of(*p, layout.grid_w, layout.grid_h);
        let _ = writeln!(out, "{id},{:?},{:?},{row},{col}", p[0], p[1]);
    }
    out
}

/// Projects, grid-samples and renders `archive`, writing `layout.csv` and
/// `report/atlas.png`. Only tile representatives are re-simulated.
pub fn write_atlas(
    run: &RunDir,
    archive: &Archive,
    substrate: &AnySubstrate,
    steps: usize,
    seed: u64,
    grid: [usize; 2],
    tile: usize,
) -> Result<AtlasLayout> {
    let embs = archive.final_embeddings();
    let coords = project_2d(&embs)?;
    let layout = grid_sample(&coords, grid[0], grid[1])?;
    let spec = RolloutSpec::final_only(steps, seed);
    let mut frames: Vec<Option<Frame>> = vec![None; archive.len()];
    for i in layout.tiles.iter().flatten() {
        let traj = substrate.rollout(&archive.members()[*i].theta, &spec)?;
        frames[*i] = Some(traj.final_frame().clone());
    }
    let mosaic = render_atlas(&layout, &frames, tile)?;
    let ids: Vec<u64> = archive.members().iter().map(|m| m.id).collect();
    write_text(&run.root().join("layout.csv"), &layout_csv(&layout, &ids))?;
    write_png(&run.report("atlas.png"), &mosaic)?;
    Ok(layout)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtlasSummary {
    pub members: usize,
    pub occupied_tiles: usize,
}

pub fn run(config: &RunConfig, opts: &RunOptions) -> Result<AtlasSummary> {
    config.validate(CommandKind::Atlas)?;
    let source = config.atlas.run_dir.as_ref().expect("validated");
    let source_run = RunDir::open(source);
    let text = std::fs::read_to_string(source_run.config())
        .map_err(|e| AppError::io(&source_run.config(), e))?;
    let source_config = RunConfig::from_json_str(CommandKind::Illuminate, None, &text)?;
    let archive: Archive = checkpoint::load(&source.join(ARCHIVE_FILE))?;
    let substrate = AnySubstrate::from_config(&source_config.substrate)?;

    let run = RunDir::create(&config.output_dir)?;
    run.write_config(config)?;
    opts.progress(format!("projecting {} members", archive.len()));
    let a = &config.atlas;
    let layout = write_atlas(
        &run,
        &archive,
        &substrate,
        source_config.illuminate.steps,
        source_config.seed,
        [a.grid_w, a.grid_h],
        a.tile,
    )?;
    let summary = AtlasSummary {
        members: archive.len(),
        occupied_tiles: layout.tiles.iter().filter(|t| t.is_some()).count(),
    };
    run.write_summary(&summary)?;
    Ok(summary)
}
