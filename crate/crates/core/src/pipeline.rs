// SPDX-License-Identifier: Apache-2.0

//! The four clustering modes and the end-to-end run.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::eval::{PhaseSeconds, RunStats};
use crate::graph::canonicalize;
use crate::graph_io::GraphFile;
use crate::memetic::{evolve, Budget, EvoConfig};
use crate::modularity::{stream_pass_assign, ClusteringState, PassReport};
use crate::quotient::QuotientEdgeAccumulator;
use crate::restream::{restream_local_search, LsConfig, LsReport};
use crate::ClusterId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// One streaming pass.
    Light,
    /// Streaming pass, then re-streaming local search.
    LightPlus,
    /// Streaming pass, then memetic refinement of the quotient graph.
    Evo,
    /// Memetic refinement followed by re-streaming local search.
    Strong,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Light, Mode::LightPlus, Mode::Evo, Mode::Strong];

    pub fn refines_quotient(self) -> bool {
        matches!(self, Mode::Evo | Mode::Strong)
    }

    pub fn restreams(self) -> bool {
        matches!(self, Mode::LightPlus | Mode::Strong)
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Light => "light",
            Mode::LightPlus => "light-plus",
            Mode::Evo => "evo",
            Mode::Strong => "strong",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown mode `{s}`")))
    }
}

#[derive(Debug, Clone)]
pub struct ModeConfig {
    pub mode: Mode,
    pub evo_time: Duration,
    /// Generation cap for the memetic loop. With a cap set, runs with the
    /// same seed are reproducible as long as the time limit is not hit.
    pub evo_iterations: Option<u64>,
    pub population: usize,
    pub ls_time: Duration,
    pub ls_floor: f64,
    pub seed: u64,
    pub sanitize: bool,
}

impl Default for ModeConfig {
    fn default() -> Self {
        ModeConfig {
            mode: Mode::Light,
            evo_time: Duration::from_secs(15),
            evo_iterations: None,
            population: 10,
            ls_time: Duration::from_secs(600),
            ls_floor: 0.05,
            seed: 0,
            sanitize: false,
        }
    }
}

impl ModeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.evo_time.is_zero() && self.evo_iterations.is_none() {
            return Err(Error::Config("evolution time must be positive".into()));
        }
        if self.population < 2 {
            return Err(Error::Config(
                "population needs at least two individuals".into(),
            ));
        }
        self.ls_config().validate()
    }

    fn ls_config(&self) -> LsConfig {
        LsConfig {
            floor: self.ls_floor,
            cutoff: self.ls_time,
        }
    }

    fn evo_config(&self) -> EvoConfig {
        EvoConfig {
            population: self.population,
            budget: Budget {
                time: (!self.evo_time.is_zero()).then_some(self.evo_time),
                iterations: self.evo_iterations,
            },
            seed: self.seed,
            ..EvoConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvoSummary {
    pub supernodes: usize,
    pub quotient_edges: usize,
    pub generations: u64,
    pub accepted: u64,
    pub initial_modularity: f64,
    pub best_modularity: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    /// Final cluster of every node, relabelled densely in order of first
    /// occurrence.
    pub assignments: Vec<ClusterId>,
    pub pass: PassReport,
    pub stream_modularity: f64,
    pub evo: Option<EvoSummary>,
    pub ls: Option<LsReport>,
    pub stats: RunStats,
}

/// Runs `cfg.mode` on the METIS file at `path`.
pub fn run(cfg: &ModeConfig, path: impl AsRef<Path>) -> Result<RunOutput> {
    cfg.validate()?;
    let start = Instant::now();
    let mut phases = PhaseSeconds::default();

    let file = GraphFile::scan(path, cfg.sanitize)?;
    let mut state = ClusteringState::singletons(file.degrees(), file.total_weight());
    let mut acc = cfg
        .mode
        .refines_quotient()
        .then(QuotientEdgeAccumulator::new);
    let pass = stream_pass_assign(file.stream()?, &mut state, acc.as_mut())?;
    phases.stream = Some(start.elapsed().as_secs_f64());
    log::info!(
        "stream pass: {} nodes, {} moves, {} clusters",
        pass.nodes,
        pass.moves,
        state.num_clusters()
    );

    let mut stream_modularity = None;
    let mut evo = None;
    if let Some(acc) = acc {
        let t = Instant::now();
        let quotient = acc.finalize(&state);
        let g = quotient.graph();
        // The streamed clustering is the singleton partition of its quotient.
        let streamed: Vec<ClusterId> = (0..g.n() as ClusterId).collect();
        let initial = g.modularity(&streamed);
        stream_modularity = Some(initial);
        let outcome = evolve(g, &cfg.evo_config(), Some(&streamed));
        quotient.project(outcome.best.partition(), &mut state);
        log::info!(
            "memetic: {} supernodes, {} generations, Q {:.6} -> {:.6}",
            g.n(),
            outcome.generations,
            initial,
            outcome.best.fitness()
        );
        evo = Some(EvoSummary {
            supernodes: g.n(),
            quotient_edges: g.edge_count(),
            generations: outcome.generations,
            accepted: outcome.accepted,
            initial_modularity: initial,
            best_modularity: outcome.best.fitness(),
        });
        phases.evo = Some(t.elapsed().as_secs_f64());
    }

    let mut ls = None;
    let modularity = if cfg.mode.restreams() {
        let t = Instant::now();
        let report = restream_local_search(&mut state, &file, &cfg.ls_config())?;
        stream_modularity.get_or_insert(report.initial_modularity);
        phases.ls = Some(t.elapsed().as_secs_f64());
        let q = state.modularity(file.stream()?)?;
        ls = Some(report);
        q
    } else {
        state.modularity(file.stream()?)?
    };
    let stream_modularity = stream_modularity.unwrap_or(modularity);

    let clusters = state.num_clusters();
    let (assignments, _) = canonicalize(state.assignments());
    let stats = RunStats {
        mode: cfg.mode.name().to_string(),
        n: file.n(),
        m: file.header().m,
        modularity,
        clusters,
        phase_seconds: phases,
        total_seconds: start.elapsed().as_secs_f64(),
        peak_memory_bytes: crate::eval::peak_resident_bytes(),
        ls_rounds: ls.as_ref().map_or(0, |r| r.rounds.len()),
        nmi: None,
        nmi_normalization: None,
        audit_modularity: None,
    };
    Ok(RunOutput {
        assignments,
        pass,
        stream_modularity,
        evo,
        ls,
        stats,
    })
}
