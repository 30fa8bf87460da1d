//! Run artifact directories.
//!
//! A run leaves behind everything its audit needs: the resolved scenario,
//! the tree, the move log, the register dump, the extracted instance, and
//! a one-line summary. Identical scenarios produce byte-identical
//! artifacts.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use cotex_core::lgt::LgtInstance;
use cotex_core::scenario::{RunArtifacts, Scenario};
use cotex_core::sim::{log_from_csv, MoveRecord};
use cotex_core::tree::ExplorationTree;

pub const TOOL_TAG: &str = concat!("# cotex ", env!("CARGO_PKG_VERSION"), "\n");

pub fn write_artifact(
    dir: &Path,
    scenario: &Scenario,
    tree: &ExplorationTree,
    run: &RunArtifacts,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("scenario.txt"), &run.scenario_text)?;
    fs::write(dir.join("tree.txt"), tree.to_text())?;
    fs::write(
        dir.join("move_log.csv"),
        format!("{}{}", TOOL_TAG, run.log_csv),
    )?;
    if let Some(regs) = &run.registers_dump {
        fs::write(dir.join("registers.txt"), regs)?;
    }
    if let Some(instance) = run.instance_text() {
        fs::write(dir.join("instance.txt"), instance)?;
    }
    fs::write(dir.join("summary.txt"), format!("{}\n", run.summary_line()))?;
    let _ = scenario;
    Ok(())
}

pub struct LoadedArtifact {
    pub scenario: Scenario,
    pub tree: ExplorationTree,
    pub log: Vec<MoveRecord>,
    pub instance: Option<LgtInstance>,
}

pub fn load_artifact(dir: &Path) -> Result<LoadedArtifact> {
    let scenario_text = fs::read_to_string(dir.join("scenario.txt"))
        .with_context(|| format!("reading {}", dir.join("scenario.txt").display()))?;
    let scenario = Scenario::parse(&scenario_text)?;
    let tree_text = fs::read_to_string(dir.join("tree.txt"))?;
    let tree = ExplorationTree::parse(&tree_text)?;
    let log_text = fs::read_to_string(dir.join("move_log.csv"))?;
    let log = log_from_csv(&log_text)?;
    let instance = match fs::read_to_string(dir.join("instance.txt")) {
        Ok(text) => Some(LgtInstance::parse(&text)?),
        Err(_) => None,
    };
    Ok(LoadedArtifact {
        scenario,
        tree,
        log,
        instance,
    })
}
