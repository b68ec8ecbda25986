// SPDX-License-Identifier: Apache-2.0

//! Memetic refinement of a quotient-graph clustering.
//!
//! A population of Louvain solutions evolves by recombination (overlay the
//! two parents, contract the overlay, re-optimise, expand) and mutation
//! (split every cluster of two tournament winners in half, then recombine
//! the halves). An offspring enters the population by replacing the most
//! similar member among those it is at least as good as, where similarity
//! is the symmetric difference of the two sets of cut edges.

use std::collections::VecDeque;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustc_hash::FxHashMap;

use crate::graph::{canonicalize, Graph};
use crate::louvain::{label_propagation, louvain, LouvainConfig};
use crate::{ClusterId, NodeId};

/// A clustering of the quotient graph with its cached fitness.
#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    partition: Vec<ClusterId>,
    fitness: f64,
    /// Packed `(u, v)`, `u < v`, of every edge cut by the partition; sorted.
    cut: Vec<u64>,
}

impl Individual {
    pub fn new(g: &Graph, partition: Vec<ClusterId>) -> Self {
        let (partition, _) = canonicalize(&partition);
        let fitness = g.modularity(&partition);
        let cut = g
            .edges()
            .filter(|&(u, v, _)| partition[u as usize] != partition[v as usize])
            .map(|(u, v, _)| (u64::from(u) << 32) | u64::from(v))
            .collect();
        Individual {
            partition,
            fitness,
            cut,
        }
    }

    pub fn partition(&self) -> &[ClusterId] {
        &self.partition
    }

    pub fn into_partition(self) -> Vec<ClusterId> {
        self.partition
    }

    pub fn fitness(&self) -> f64 {
        self.fitness
    }

    pub fn cut_signature(&self) -> &[u64] {
        &self.cut
    }

    pub fn num_clusters(&self) -> usize {
        self.partition.iter().max().map_or(0, |&c| c as usize + 1)
    }

    /// Size of the symmetric difference of the two cut-edge sets.
    pub fn distance(&self, other: &Individual) -> usize {
        let (a, b) = (&self.cut, &other.cut);
        let (mut i, mut j, mut common) = (0, 0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    common += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        a.len() + b.len() - 2 * common
    }
}

/// Stopping rule for [`evolve`]. Whichever limit is hit first ends the run;
/// an iteration-only budget makes runs reproducible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Budget {
    pub time: Option<Duration>,
    pub iterations: Option<u64>,
}

impl Budget {
    pub fn time(limit: Duration) -> Self {
        Budget {
            time: Some(limit),
            iterations: None,
        }
    }

    pub fn iterations(limit: u64) -> Self {
        Budget {
            time: None,
            iterations: Some(limit),
        }
    }

    fn exhausted(&self, start: Instant, done: u64) -> bool {
        self.iterations.is_some_and(|max| done >= max)
            || self.time.is_some_and(|t| start.elapsed() >= t)
    }
}

#[derive(Debug, Clone)]
pub struct EvoConfig {
    pub population: usize,
    pub budget: Budget,
    pub seed: u64,
    /// Probability of recombination versus mutation per generation.
    pub recombine_probability: f64,
    pub louvain: LouvainConfig,
}

impl Default for EvoConfig {
    fn default() -> Self {
        EvoConfig {
            population: 10,
            budget: Budget::time(Duration::from_secs(15)),
            seed: 0,
            recombine_probability: 0.9,
            louvain: LouvainConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Population {
    individuals: Vec<Individual>,
    capacity: usize,
    rng: ChaCha8Rng,
    generation: u64,
}

impl Population {
    pub fn individuals(&self) -> &[Individual] {
        &self.individuals
    }

    pub fn len(&self) -> usize {
        self.individuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.individuals.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    /// Index of the fittest individual; ties go to the lower index.
    pub fn best_index(&self) -> usize {
        let mut best = 0;
        for (i, ind) in self.individuals.iter().enumerate() {
            if ind.fitness > self.individuals[best].fitness {
                best = i;
            }
        }
        best
    }

    pub fn best(&self) -> &Individual {
        &self.individuals[self.best_index()]
    }

    /// Puts `ind` in place of the weakest member, unconditionally.
    pub fn insert_replacing_worst(&mut self, ind: Individual) {
        let worst = (0..self.individuals.len())
            .min_by(|&a, &b| {
                self.individuals[a]
                    .fitness
                    .total_cmp(&self.individuals[b].fitness)
                    .then(b.cmp(&a))
            })
            .expect("population is never empty");
        self.individuals[worst] = ind;
    }

    #[cfg(test)]
    fn from_individuals(individuals: Vec<Individual>, seed: u64) -> Self {
        Population {
            capacity: individuals.len(),
            individuals,
            rng: ChaCha8Rng::seed_from_u64(seed),
            generation: 0,
        }
    }
}

/// `size` individuals, each Louvain run from a label-propagation start with
/// its own seed. A start that ends below the singleton partition is redone
/// from singletons, so every member is at least as good as the quotient's
/// own clustering.
pub fn init_population(g: &Graph, size: usize, seed: u64, lcfg: &LouvainConfig) -> Population {
    assert!(size >= 2, "population needs at least two individuals");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let singletons: Vec<ClusterId> = (0..g.n() as ClusterId).collect();
    let floor = g.modularity(&singletons);
    let individuals = (0..size)
        .map(|i| {
            let s: u64 = rng.random();
            let start = label_propagation(g, 1 + i % 5, s);
            let mut ind = Individual::new(g, louvain(g, &start, s, lcfg));
            if ind.fitness < floor {
                ind = Individual::new(g, louvain(g, &singletons, s, lcfg));
            }
            ind
        })
        .collect();
    Population {
        individuals,
        capacity: size,
        rng,
        generation: 0,
    }
}

/// Binary tournament over two distinct uniformly drawn members.
pub fn tournament_select(pop: &mut Population) -> usize {
    let n = pop.individuals.len();
    assert!(n >= 2);
    let a = pop.rng.random_range(0..n);
    let mut b = pop.rng.random_range(0..n - 1);
    if b >= a {
        b += 1;
    }
    let (lo, hi) = (a.min(b), a.max(b));
    if pop.individuals[hi].fitness > pop.individuals[lo].fitness {
        hi
    } else {
        lo
    }
}

/// Intersection of two partitions: nodes share a cluster iff they do in
/// both inputs. Labels are dense in order of first occurrence.
pub fn overlay(p1: &[ClusterId], p2: &[ClusterId]) -> Vec<ClusterId> {
    assert_eq!(p1.len(), p2.len());
    let mut ids: FxHashMap<(ClusterId, ClusterId), ClusterId> = FxHashMap::default();
    p1.iter()
        .zip(p2)
        .map(|(&a, &b)| {
            let next = ids.len() as ClusterId;
            *ids.entry((a, b)).or_insert(next)
        })
        .collect()
}

/// Contract the overlay of two partitions, run Louvain on the contracted
/// graph from singletons, and expand.
fn combine(
    g: &Graph,
    p1: &[ClusterId],
    p2: &[ClusterId],
    seed: u64,
    lcfg: &LouvainConfig,
) -> Individual {
    let over = overlay(p1, p2);
    let (coarse, map) = g.contract(&over);
    let singletons: Vec<ClusterId> = (0..coarse.n() as ClusterId).collect();
    let coarse_partition = louvain(&coarse, &singletons, seed, lcfg);
    let expanded = map.iter().map(|&c| coarse_partition[c as usize]).collect();
    Individual::new(g, expanded)
}

fn pick_parents(pop: &mut Population) -> (usize, usize) {
    let a = tournament_select(pop);
    let mut b = tournament_select(pop);
    for _ in 0..4 {
        if b != a {
            break;
        }
        b = tournament_select(pop);
    }
    (a, b)
}

/// Flat recombination of two tournament winners. Never worse than the
/// better parent: if Louvain ends below it, that parent is returned.
pub fn recombine(pop: &mut Population, g: &Graph, lcfg: &LouvainConfig) -> Individual {
    let (a, b) = pick_parents(pop);
    let seed = pop.rng.random();
    let child = combine(
        g,
        &pop.individuals[a].partition,
        &pop.individuals[b].partition,
        seed,
        lcfg,
    );
    let better = if pop.individuals[b].fitness > pop.individuals[a].fitness {
        b
    } else {
        a
    };
    if child.fitness < pop.individuals[better].fitness {
        pop.individuals[better].clone()
    } else {
        child
    }
}

/// Splits every cluster of two or more nodes into blocks of `⌈s/2⌉` and
/// `⌊s/2⌋` nodes. The first block grows breadth-first from a random member
/// inside the cluster, restarting from another member when a component of
/// the cluster runs out.
pub fn split_clusters(g: &Graph, partition: &[ClusterId], rng: &mut impl Rng) -> Vec<ClusterId> {
    let (labels, k) = canonicalize(partition);
    let mut members: Vec<Vec<NodeId>> = vec![Vec::new(); k];
    for (v, &c) in labels.iter().enumerate() {
        members[c as usize].push(v as NodeId);
    }
    let mut out = labels.clone();
    let mut next = k as ClusterId;
    let mut taken = vec![false; g.n()];
    let mut queue = VecDeque::new();
    for (c, nodes) in members.iter_mut().enumerate() {
        let s = nodes.len();
        if s < 2 {
            continue;
        }
        let target = s.div_ceil(2);
        nodes.shuffle(rng);
        let mut grown = 0;
        let mut seeds = nodes.iter();
        while grown < target {
            if queue.is_empty() {
                let &start = seeds
                    .find(|&&u| !taken[u as usize])
                    .expect("cluster has untaken members");
                taken[start as usize] = true;
                queue.push_back(start);
                grown += 1;
                continue;
            }
            let v = queue.pop_front().unwrap();
            for (u, _) in g.neighbors(v) {
                if grown == target {
                    break;
                }
                if labels[u as usize] as usize == c && !taken[u as usize] {
                    taken[u as usize] = true;
                    queue.push_back(u);
                    grown += 1;
                }
            }
        }
        queue.clear();
        for &v in nodes.iter() {
            if !taken[v as usize] {
                out[v as usize] = next;
            }
            taken[v as usize] = false;
        }
        next += 1;
    }
    out
}

/// Splits the clusters of two tournament winners and recombines the split
/// versions. No fitness floor applies.
pub fn mutate(pop: &mut Population, g: &Graph, lcfg: &LouvainConfig) -> Individual {
    let (a, b) = pick_parents(pop);
    let s1 = split_clusters(g, &pop.individuals[a].partition, &mut pop.rng);
    let s2 = split_clusters(g, &pop.individuals[b].partition, &mut pop.rng);
    let seed = pop.rng.random();
    combine(g, &s1, &s2, seed, lcfg)
}

/// Replaces the member closest to `offspring` among those with fitness no
/// greater than the offspring's. Returns whether it was accepted.
pub fn replace_most_similar(pop: &mut Population, offspring: Individual) -> bool {
    let mut target: Option<(usize, usize)> = None;
    for (i, ind) in pop.individuals.iter().enumerate() {
        if ind.fitness > offspring.fitness {
            continue;
        }
        let d = ind.distance(&offspring);
        if target.is_none_or(|(_, best)| d < best) {
            target = Some((i, d));
        }
    }
    match target {
        Some((i, _)) => {
            pop.individuals[i] = offspring;
            true
        }
        None => false,
    }
}

#[derive(Debug, Clone)]
pub struct EvolveOutcome {
    pub best: Individual,
    pub generations: u64,
    pub accepted: u64,
    /// Best fitness after initialisation and after every generation.
    pub best_history: Vec<f64>,
}

/// Runs the memetic loop on `g` until the budget is spent. `seed_partition`,
/// when given, joins the initial population in place of its weakest member.
pub fn evolve(g: &Graph, cfg: &EvoConfig, seed_partition: Option<&[ClusterId]>) -> EvolveOutcome {
    let start = Instant::now();
    let mut pop = init_population(g, cfg.population, cfg.seed, &cfg.louvain);
    if let Some(p) = seed_partition {
        pop.insert_replacing_worst(Individual::new(g, p.to_vec()));
    }
    let mut history = vec![pop.best().fitness];
    let mut accepted = 0;
    while !cfg.budget.exhausted(start, pop.generation) {
        let offspring = if pop.rng.random_bool(cfg.recombine_probability) {
            recombine(&mut pop, g, &cfg.louvain)
        } else {
            mutate(&mut pop, g, &cfg.louvain)
        };
        if replace_most_similar(&mut pop, offspring) {
            accepted += 1;
        }
        pop.generation += 1;
        history.push(pop.best().fitness);
    }
    EvolveOutcome {
        best: pop.best().clone(),
        generations: pop.generation,
        accepted,
        best_history: history,
    }
}
