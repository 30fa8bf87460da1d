//! Scenario configuration and execution: a scenario fully determines a run
//! byte for byte.
//!
//! Config is plain `key=value` text, one pair per line (or whitespace
//! separated); command lines pass the same tokens. A tree comes either
//! from an inline generator spec (`family=comb D=40`) or from a file
//! (`tree=<path>` resolved by the caller).

use std::collections::BTreeMap;

use thiserror::Error;

use crate::dacte::{exploration_bound, extract_instance, DacteAgent, Extraction};
use crate::baselines::{AsyncDfsFollower, GreedySplit};
use crate::generators::{GenError, GeneratorSpec};
use crate::lgt::LgtInstance;
use crate::num::Q;
use crate::sim::{
    default_budget, log_to_csv, run, AdversaryKind, MoveRecord, SimError,
};
use crate::traverse::TraverserKind;
use crate::tree::ExplorationTree;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("bad scenario: {0}")]
    Bad(String),
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TreeSource {
    Generator(GeneratorSpec),
    File(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AgentSpec {
    Dacte {
        traverser: TraverserKind,
        /// Team size for the split variant.
        team_size: Option<usize>,
    },
    DfsFollower,
    GreedySplit,
}

impl AgentSpec {
    pub fn name(&self) -> &'static str {
        match self {
            AgentSpec::Dacte {
                team_size: None, ..
            } => "dacte",
            AgentSpec::Dacte {
                team_size: Some(_), ..
            } => "dacte-split",
            AgentSpec::DfsFollower => "dfs-follower",
            AgentSpec::GreedySplit => "greedy-split",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Scenario {
    pub tree: TreeSource,
    pub agent: AgentSpec,
    pub adversary: AdversaryKind,
    pub seed: u64,
    pub k: usize,
    pub budget: Option<u64>,
}

const GENERATOR_KEYS: &[&str] = &["family", "n", "D", "arms", "len", "weights"];

impl Scenario {
    /// Parse whitespace- or newline-separated `key=value` tokens.
    pub fn parse(text: &str) -> Result<Scenario, ScenarioError> {
        let mut pairs: BTreeMap<String, String> = BTreeMap::new();
        let mut gen_pairs: Vec<String> = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            for token in line.split_whitespace() {
                let (key, value) = token
                    .split_once('=')
                    .ok_or_else(|| ScenarioError::Bad(format!("expected key=value: {token:?}")))?;
                if GENERATOR_KEYS.contains(&key) {
                    gen_pairs.push(token.to_string());
                } else {
                    pairs.insert(key.to_string(), value.to_string());
                }
            }
        }
        let tree = match pairs.get("tree") {
            Some(path) => TreeSource::File(path.clone()),
            None => {
                // The generator reuses the run seed unless it has its own.
                let mut spec_text = gen_pairs.join(" ");
                if let Some(seed) = pairs.get("seed") {
                    if !spec_text.contains("seed=") {
                        spec_text.push_str(&format!(" seed={}", seed));
                    }
                }
                TreeSource::Generator(GeneratorSpec::parse(&spec_text)?)
            }
        };
        let get_usize = |key: &str, default: usize| -> Result<usize, ScenarioError> {
            match pairs.get(key) {
                None => Ok(default),
                Some(v) => v
                    .parse()
                    .map_err(|_| ScenarioError::Bad(format!("bad {key}"))),
            }
        };
        let k = get_usize("k", 1)?;
        let seed: u64 = pairs
            .get("seed")
            .map(|v| v.parse().map_err(|_| ScenarioError::Bad("bad seed".into())))
            .transpose()?
            .unwrap_or(0);
        let budget = pairs
            .get("budget")
            .map(|v| v.parse().map_err(|_| ScenarioError::Bad("bad budget".into())))
            .transpose()?;
        let gamma = pairs
            .get("gamma")
            .map(|v| {
                parse_q(v).ok_or_else(|| ScenarioError::Bad("bad gamma".into()))
            })
            .transpose()?;
        let traverser = {
            let name = pairs.get("traverser").map(String::as_str).unwrap_or("wfa");
            TraverserKind::parse(name, gamma)
                .ok_or_else(|| ScenarioError::Bad(format!("unknown traverser {name:?}")))?
        };
        let agent = match pairs
            .get("algorithm")
            .map(String::as_str)
            .unwrap_or("dacte")
        {
            "dacte" => AgentSpec::Dacte {
                traverser,
                team_size: None,
            },
            "dacte-split" => AgentSpec::Dacte {
                traverser,
                team_size: Some(get_usize("kprime", 1)?.max(1)),
            },
            "dfs-follower" => AgentSpec::DfsFollower,
            "greedy-split" => AgentSpec::GreedySplit,
            other => return Err(ScenarioError::Bad(format!("unknown algorithm {other:?}"))),
        };
        let adversary = {
            let name = pairs
                .get("adversary")
                .map(String::as_str)
                .unwrap_or("round_robin");
            AdversaryKind::parse(name)
                .ok_or_else(|| ScenarioError::Bad(format!("unknown adversary {name:?}")))?
        };
        Ok(Scenario {
            tree,
            agent,
            adversary,
            seed,
            k,
            budget,
        })
    }

    /// Canonical text form (used for artifact determinism).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        match &self.tree {
            TreeSource::Generator(g) => out.push_str(&format!("{}\n", g.to_text())),
            TreeSource::File(p) => out.push_str(&format!("tree={}\n", p)),
        }
        match &self.agent {
            AgentSpec::Dacte {
                traverser,
                team_size,
            } => {
                out.push_str(&format!(
                    "algorithm={}\n",
                    if team_size.is_some() {
                        "dacte-split"
                    } else {
                        "dacte"
                    }
                ));
                out.push_str(&format!("traverser={}\n", traverser.name()));
                if let TraverserKind::WorkFunction { gamma } = traverser {
                    out.push_str(&format!("gamma={}\n", crate::num::q_str(gamma)));
                }
                if let Some(s) = team_size {
                    out.push_str(&format!("kprime={}\n", s));
                }
            }
            AgentSpec::DfsFollower => out.push_str("algorithm=dfs-follower\n"),
            AgentSpec::GreedySplit => out.push_str("algorithm=greedy-split\n"),
        }
        out.push_str(&format!("adversary={}\n", self.adversary.name()));
        out.push_str(&format!("seed={}\n", self.seed));
        out.push_str(&format!("k={}\n", self.k));
        if let Some(b) = self.budget {
            out.push_str(&format!("budget={}\n", b));
        }
        out
    }

    /// Build the tree (file sources are resolved by the caller beforehand).
    pub fn build_tree(&self) -> Result<ExplorationTree, ScenarioError> {
        match &self.tree {
            TreeSource::Generator(g) => Ok(g.build()?),
            TreeSource::File(p) => Err(ScenarioError::Bad(format!(
                "tree file {p:?} must be resolved by the caller"
            ))),
        }
    }
}

fn parse_q(text: &str) -> Option<Q> {
    match text.split_once('/') {
        None => text.parse::<i64>().ok().map(crate::num::q),
        Some((n, d)) => {
            let n: i64 = n.parse().ok()?;
            let d: i64 = d.parse().ok()?;
            (d != 0).then(|| Q::new(n as i128, d as i128))
        }
    }
}

/// Everything a run leaves behind.
pub struct RunArtifacts {
    pub scenario_text: String,
    pub n: usize,
    pub depth: u64,
    pub k: usize,
    pub completed: bool,
    pub moves: u64,
    pub rounds: u64,
    pub log: Vec<MoveRecord>,
    pub log_csv: String,
    /// Extraction and register dump for the exploration algorithm.
    pub extraction: Option<Extraction>,
    pub per_team_extractions: Vec<Extraction>,
    pub registers_dump: Option<String>,
    /// The moves-vs-targets bound when the run has one.
    pub bound: Option<u64>,
    pub makespan: Option<u64>,
}

impl RunArtifacts {
    pub fn summary_line(&self) -> String {
        format!(
            "n={} D={} k={} moves={} rounds={} bound={} completed={}",
            self.n,
            self.depth,
            self.k,
            self.moves,
            self.rounds,
            self.bound.map(|b| b.to_string()).unwrap_or_else(|| "-".into()),
            self.completed
        )
    }

    pub fn instance_text(&self) -> Option<String> {
        self.extraction.as_ref().map(|e| e.instance.to_text())
    }

    pub fn instance(&self) -> Option<&LgtInstance> {
        self.extraction.as_ref().map(|e| &e.instance)
    }
}

/// Execute a scenario on an already-built tree.
pub fn execute_on(
    scenario: &Scenario,
    tree: ExplorationTree,
) -> Result<RunArtifacts, ScenarioError> {
    let n = tree.len();
    let depth = tree.depth();
    let k = scenario.k.max(1);
    let budget = scenario.budget.unwrap_or_else(|| default_budget(n, k));
    let mut adversary = scenario.adversary.build(scenario.seed);

    match &scenario.agent {
        AgentSpec::Dacte {
            traverser,
            team_size,
        } => {
            let agent = match team_size {
                None => DacteAgent::new(traverser.clone()),
                Some(s) => DacteAgent::split(traverser.clone(), *s),
            };
            let outcome = run(tree, &agent, adversary.as_mut(), k, budget)?;
            let teams = agent.num_teams(k);
            let mut per_team = Vec::new();
            for team in 0..teams {
                per_team.push(
                    extract_instance(&outcome.state, team)
                        .map_err(|e| ScenarioError::Bad(e.to_string()))?,
                );
            }
            let bound = match team_size {
                None => Some(exploration_bound(n, k, per_team[0].target_movement)),
                Some(s) => {
                    let worst = per_team
                        .iter()
                        .map(|e| exploration_bound(n, *s, e.target_movement))
                        .max()
                        .unwrap_or(0);
                    Some(k.div_ceil(*s) as u64 * worst)
                }
            };
            let registers = dump_registers(&outcome.state, teams);
            let makespan = outcome
                .completed
                .then(|| outcome.state.moves.div_ceil(k as u64));
            Ok(RunArtifacts {
                scenario_text: scenario.to_text(),
                n,
                depth,
                k,
                completed: outcome.completed,
                moves: outcome.state.moves,
                rounds: outcome.state.rounds,
                log_csv: log_to_csv(&outcome.state.log),
                log: outcome.state.log,
                extraction: Some(per_team[0].clone()),
                per_team_extractions: per_team,
                registers_dump: Some(registers),
                bound,
                makespan,
            })
        }
        AgentSpec::DfsFollower => {
            let outcome = run(tree, &AsyncDfsFollower, adversary.as_mut(), k, budget)?;
            let makespan = outcome
                .completed
                .then(|| outcome.state.moves.div_ceil(k as u64));
            Ok(RunArtifacts {
                scenario_text: scenario.to_text(),
                n,
                depth,
                k,
                completed: outcome.completed,
                moves: outcome.state.moves,
                rounds: outcome.state.rounds,
                log_csv: log_to_csv(&outcome.state.log),
                log: outcome.state.log,
                extraction: None,
                per_team_extractions: Vec::new(),
                registers_dump: None,
                bound: Some(2 * k as u64 * (n as u64 - 1)),
                makespan,
            })
        }
        AgentSpec::GreedySplit => {
            let outcome = run(tree, &GreedySplit, adversary.as_mut(), k, budget)?;
            let makespan = outcome
                .completed
                .then(|| outcome.state.moves.div_ceil(k as u64));
            Ok(RunArtifacts {
                scenario_text: scenario.to_text(),
                n,
                depth,
                k,
                completed: outcome.completed,
                moves: outcome.state.moves,
                rounds: outcome.state.rounds,
                log_csv: log_to_csv(&outcome.state.log),
                log: outcome.state.log,
                extraction: None,
                per_team_extractions: Vec::new(),
                registers_dump: None,
                bound: None,
                makespan,
            })
        }
    }
}

/// Execute a scenario whose tree source is a generator.
pub fn execute(scenario: &Scenario) -> Result<RunArtifacts, ScenarioError> {
    let tree = scenario.build_tree()?;
    execute_on(scenario, tree)
}

fn dump_registers(
    state: &crate::sim::SimState<DacteAgent>,
    teams: usize,
) -> String {
    let mut out = String::new();
    for (node, board) in &state.boards {
        for team in 0..teams {
            let Some(tb) = board.get(&team) else { continue };
            out.push_str(&format!("node {} team {}\n", node, team));
            out.push_str(&format!("  h={:?}\n", tb.h()));
            if let Some(chain) = &tb.chain {
                out.push_str(&format!("  layers={:?}\n", chain.head()));
            }
            out.push_str(&format!("  c_plus={:?}\n", tb.c_plus));
            out.push_str(&format!("  f_unexplored={:?}\n", tb.unexplored_incident));
            out.push_str(&format!("  v_next={:?}\n", tb.v_next));
            out.push_str(&format!("  l_next={:?}\n", tb.l_next));
            out.push_str(&format!("  synced={:?}\n", tb.synced));
            out.push_str(&format!(
                "  explorers={:?}\n",
                tb.explored_children
            ));
        }
    }
    for (i, mem) in state.memories.iter().enumerate() {
        out.push_str(&format!(
            "robot {} pos={} target={} h={} c_last={:?}\n",
            i,
            mem.position,
            mem.target,
            mem.chain.len(),
            mem.c_last
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_round_trip() {
        let s = Scenario::parse(
            "family=comb D=10\nalgorithm=dacte traverser=wfa gamma=2\nadversary=starver seed=5 k=3",
        )
        .unwrap();
        assert_eq!(s.k, 3);
        assert_eq!(s.adversary, AdversaryKind::Starver);
        let again = Scenario::parse(&s.to_text()).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn identical_scenarios_give_identical_artifacts() {
        let s = Scenario::parse("family=random n=40 seed=9 k=3 adversary=seeded_random").unwrap();
        let a = execute(&s).unwrap();
        let b = execute(&s).unwrap();
        assert_eq!(a.log_csv, b.log_csv);
        assert_eq!(a.registers_dump, b.registers_dump);
        assert_eq!(a.summary_line(), b.summary_line());
        assert!(a.completed);
        assert!(a.moves <= a.bound.unwrap());
    }

    #[test]
    fn budget_exhaustion_reports_incomplete() {
        let s = Scenario::parse("family=path n=2 k=1 budget=0").unwrap();
        let art = execute(&s).unwrap();
        assert!(!art.completed);
        assert_eq!(art.moves, 0);
    }
}
