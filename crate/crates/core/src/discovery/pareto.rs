//! Term-subset Pareto search over (residual, complexity).
//!
//! A genome picks a left-hand term and a subset of the remaining pool terms;
//! coefficients come from least squares. Fronts are ranked with a tolerant
//! dominance relation:
//! * residuals within `tau = 1e-10 * mean(lhs^2)` count as equal, so exact
//!   models with extra zero-weight terms don't survive beside the sparse one;
//! * a simpler model also dominates when it is at most
//!   `1 + min_relative_gain` times worse, so an added term has to buy a real
//!   improvement to earn a place on the front.

use std::collections::HashMap;

use log::warn;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::stlsq::fit_subset;
use super::{CandidateLibrary, EquationModel, TermSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolutionParams {
    pub population: usize,
    pub generations: usize,
    /// Per-bit flip probability.
    pub mutation_rate: f64,
    pub seed: u64,
    pub min_relative_gain: f64,
}

impl Default for EvolutionParams {
    fn default() -> Self {
        Self { population: 30, generations: 100, mutation_rate: 0.2, seed: 0, min_relative_gain: 0.05 }
    }
}

impl EvolutionParams {
    pub fn validate(&self) -> Result<()> {
        if self.population < 10 {
            return Err(Error::InvalidConfig(format!("population must be >= 10, got {}", self.population)));
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) {
            return Err(Error::InvalidConfig(format!(
                "mutation_rate must lie in [0, 1], got {}",
                self.mutation_rate
            )));
        }
        if !(self.min_relative_gain >= 0.0 && self.min_relative_gain.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "min_relative_gain must be finite and >= 0, got {}",
                self.min_relative_gain
            )));
        }
        Ok(())
    }
}

/// Evaluated pool columns on common valid rows. `lhs_candidates` index the
/// terms allowed on the left-hand side.
#[derive(Debug, Clone)]
pub struct TermPool {
    terms: Vec<TermSpec>,
    columns: DMatrix<f64>,
    lhs_candidates: Vec<usize>,
    tie_tol: Vec<f64>,
}

const MAX_POOL: usize = 63;

impl TermPool {
    pub fn new(terms: Vec<TermSpec>, columns: DMatrix<f64>, lhs_candidates: Vec<usize>) -> Result<Self> {
        if terms.len() < 2 {
            return Err(Error::Library(format!("pool needs at least 2 terms, got {}", terms.len())));
        }
        if terms.len() > MAX_POOL {
            return Err(Error::Library(format!("pool is limited to {MAX_POOL} terms")));
        }
        if columns.ncols() != terms.len() || columns.nrows() == 0 {
            return Err(Error::Library("pool columns do not match its terms".into()));
        }
        if columns.iter().any(|v| !v.is_finite()) {
            return Err(Error::Library("pool columns contain non-finite values".into()));
        }
        if lhs_candidates.is_empty() || lhs_candidates.iter().any(|&i| i >= terms.len()) {
            return Err(Error::Library("invalid left-hand candidates".into()));
        }
        for (i, a) in terms.iter().enumerate() {
            if terms[..i].contains(a) {
                return Err(Error::Library(format!("duplicate pool term `{a}`")));
            }
        }
        let rows = columns.nrows() as f64;
        let tie_tol = columns.column_iter().map(|c| 1e-10 * c.norm_squared() / rows).collect();
        Ok(Self { terms, columns, lhs_candidates, tie_tol })
    }

    /// Library columns plus its target, with the target as the only
    /// admissible left-hand side.
    pub fn from_library(lib: &CandidateLibrary) -> Result<Self> {
        let mut terms = lib.terms.clone();
        terms.push(lib.target_term.clone());
        let columns = lib.matrix.clone().insert_column(lib.ncols(), 0.0);
        let mut columns = columns;
        columns.set_column(lib.ncols(), &lib.target);
        let lhs = terms.len() - 1;
        Self::new(terms, columns, vec![lhs])
    }

    pub fn terms(&self) -> &[TermSpec] {
        &self.terms
    }

    fn evaluate(&self, g: Genome) -> Scored {
        let active: Vec<usize> = (0..self.terms.len()).filter(|&j| g.mask >> j & 1 == 1).collect();
        let target = self.columns.column(g.lhs).into_owned();
        let fit = fit_subset(&self.columns, &target, &active);
        let (coefs, error) = match fit {
            Ok((c, e)) if e.is_finite() && c.iter().all(|v| v.is_finite()) => (c, e),
            Ok(_) | Err(_) => {
                warn!("excluding structure {} with non-finite fitness", self.describe(g));
                (vec![0.0; self.terms.len()], f64::INFINITY)
            }
        };
        Scored {
            genome: g,
            objective: Objective { error, complexity: active.len(), tie_tol: self.tie_tol[g.lhs] },
            coefs,
        }
    }

    fn describe(&self, g: Genome) -> String {
        let rhs: Vec<String> = (0..self.terms.len())
            .filter(|&j| g.mask >> j & 1 == 1)
            .map(|j| self.terms[j].id())
            .collect();
        format!("{} <- {{{}}}", self.terms[g.lhs], rhs.join(", "))
    }

    fn model(&self, s: &Scored) -> EquationModel {
        let (terms, coefs) = (0..self.terms.len())
            .filter(|&j| j != s.genome.lhs)
            .map(|j| (self.terms[j].clone(), s.coefs[j]))
            .unzip();
        let mut m = EquationModel::new(self.terms[s.genome.lhs].clone(), terms, coefs, s.objective.error);
        // Complexity follows the genome even if a fitted weight is exactly zero.
        m.complexity = s.objective.complexity;
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct Genome {
    lhs: usize,
    mask: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub error: f64,
    pub complexity: usize,
    /// Residual differences below this are ties.
    pub tie_tol: f64,
}

#[derive(Debug, Clone)]
struct Scored {
    genome: Genome,
    objective: Objective,
    coefs: Vec<f64>,
}

/// Whether `a` dominates `b`; see the module notes for the tolerances.
pub fn dominates(a: &Objective, b: &Objective, min_relative_gain: f64) -> bool {
    if !a.error.is_finite() {
        return false;
    }
    if !b.error.is_finite() {
        return a.complexity <= b.complexity;
    }
    let tau = a.tie_tol.max(b.tie_tol);
    let standard = a.complexity <= b.complexity
        && a.error <= b.error + tau
        && (a.complexity < b.complexity || a.error < b.error - tau);
    let significant = a.complexity < b.complexity && a.error <= (1.0 + min_relative_gain) * b.error + tau;
    standard || significant
}

/// Mutually non-dominated equation models.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParetoFront {
    pub individuals: Vec<EquationModel>,
}

impl ParetoFront {
    /// `(lhs, sorted active term ids)` for each member, sorted.
    pub fn structures(&self) -> Vec<(String, Vec<String>)> {
        let mut s: Vec<_> = self
            .individuals
            .iter()
            .map(|m| {
                let mut active: Vec<String> = m.active_terms().iter().map(|t| t.id()).collect();
                active.sort();
                (m.lhs.id(), active)
            })
            .collect();
        s.sort();
        s
    }

    pub fn len(&self) -> usize {
        self.individuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.individuals.is_empty()
    }

    /// Lowest-residual member.
    pub fn best(&self) -> Option<&EquationModel> {
        self.individuals.iter().min_by(|a, b| a.residual_mse.total_cmp(&b.residual_mse))
    }
}

fn front_from(pool: &TermPool, mut members: Vec<&Scored>) -> ParetoFront {
    members.sort_by(|a, b| {
        (a.objective.complexity, a.genome.lhs, a.genome.mask).cmp(&(
            b.objective.complexity,
            b.genome.lhs,
            b.genome.mask,
        ))
    });
    ParetoFront { individuals: members.into_iter().map(|s| pool.model(s)).collect() }
}

/// Exact Pareto front by enumerating every admissible structure.
pub fn brute_force_front(pool: &TermPool, min_relative_gain: f64) -> Result<ParetoFront> {
    if pool.terms.len() > 20 {
        return Err(Error::Library("exhaustive enumeration is limited to 20 terms".into()));
    }
    let n = pool.terms.len();
    let mut all = Vec::new();
    for &lhs in &pool.lhs_candidates {
        for mask in 1u64..(1 << n) {
            if mask >> lhs & 1 == 0 {
                all.push(pool.evaluate(Genome { lhs, mask }));
            }
        }
    }
    let front: Vec<&Scored> = all
        .iter()
        .filter(|s| s.objective.error.is_finite())
        .filter(|s| !all.iter().any(|o| dominates(&o.objective, &s.objective, min_relative_gain)))
        .collect();
    Ok(front_from(pool, front))
}

struct Search<'a> {
    pool: &'a TermPool,
    params: EvolutionParams,
    rng: ChaCha8Rng,
    cache: HashMap<Genome, Scored>,
    /// Number of admissible structures, capped to avoid overflow.
    space: u64,
}

impl Search<'_> {
    fn score(&mut self, g: Genome) -> Scored {
        if let Some(s) = self.cache.get(&g) {
            return s.clone();
        }
        let s = self.pool.evaluate(g);
        self.cache.insert(g, s.clone());
        s
    }

    fn repair(&mut self, mut g: Genome) -> Genome {
        g.mask &= !(1u64 << g.lhs);
        if g.mask == 0 {
            let n = self.pool.terms.len();
            let mut j = self.rng.random_range(0..n - 1);
            if j >= g.lhs {
                j += 1;
            }
            g.mask = 1 << j;
        }
        g
    }

    fn random_genome(&mut self) -> Genome {
        let cands = &self.pool.lhs_candidates;
        let lhs = cands[self.rng.random_range(0..cands.len())];
        let mut mask = 0u64;
        for j in 0..self.pool.terms.len() {
            if self.rng.random_bool(0.5) {
                mask |= 1 << j;
            }
        }
        self.repair(Genome { lhs, mask })
    }

    fn tournament(&mut self, pop: &[Scored], rank: &[usize], crowd: &[f64]) -> usize {
        let a = self.rng.random_range(0..pop.len());
        let b = self.rng.random_range(0..pop.len());
        if rank[a] != rank[b] {
            return if rank[a] < rank[b] { a } else { b };
        }
        if crowd[b] > crowd[a] { b } else { a }
    }

    fn offspring(&mut self, p1: Genome, p2: Genome) -> Genome {
        let n = self.pool.terms.len();
        let rate = self.params.mutation_rate;
        let mut lhs = if self.rng.random_bool(0.5) { p1.lhs } else { p2.lhs };
        let mut mask = 0u64;
        for j in 0..n {
            let from = if self.rng.random_bool(0.5) { p1.mask } else { p2.mask };
            let mut bit = from >> j & 1;
            if self.rng.random_bool(rate) {
                bit ^= 1;
            }
            mask |= bit << j;
        }
        let cands = &self.pool.lhs_candidates;
        if cands.len() > 1 && self.rng.random_bool(rate) {
            lhs = cands[self.rng.random_range(0..cands.len())];
        }
        self.repair(Genome { lhs, mask })
    }
}

/// Non-dominated sorting: front index of every member.
fn nondominated_ranks(pop: &[Scored], eps: f64) -> Vec<usize> {
    let n = pop.len();
    let mut dominated_by = vec![0usize; n];
    let mut dominates_list: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in 0..n {
            if i != j && dominates(&pop[i].objective, &pop[j].objective, eps) {
                dominates_list[i].push(j);
                dominated_by[j] += 1;
            }
        }
    }
    let mut rank = vec![usize::MAX; n];
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by[i] == 0).collect();
    let mut r = 0;
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            rank[i] = r;
            for &j in &dominates_list[i] {
                dominated_by[j] -= 1;
                if dominated_by[j] == 0 {
                    next.push(j);
                }
            }
        }
        current = next;
        r += 1;
    }
    // The relation is acyclic, but guard against leftovers all the same.
    for v in rank.iter_mut() {
        if *v == usize::MAX {
            *v = r;
        }
    }
    rank
}

fn crowding(pop: &[Scored], rank: &[usize]) -> Vec<f64> {
    let mut out = vec![0.0; pop.len()];
    let max_rank = rank.iter().copied().max().unwrap_or(0);
    for r in 0..=max_rank {
        let members: Vec<usize> = (0..pop.len()).filter(|&i| rank[i] == r).collect();
        if members.len() <= 2 {
            for &i in &members {
                out[i] = f64::INFINITY;
            }
            continue;
        }
        let objectives: [fn(&Objective) -> f64; 2] = [|o| o.error, |o| o.complexity as f64];
        for obj in objectives {
            let mut sorted = members.clone();
            sorted.sort_by(|&a, &b| obj(&pop[a].objective).total_cmp(&obj(&pop[b].objective)));
            let lo = obj(&pop[sorted[0]].objective);
            let hi = obj(&pop[*sorted.last().unwrap()].objective);
            out[sorted[0]] = f64::INFINITY;
            out[*sorted.last().unwrap()] = f64::INFINITY;
            let span = hi - lo;
            if !(span > 0.0 && span.is_finite()) {
                continue;
            }
            for k in 1..sorted.len() - 1 {
                let gap = obj(&pop[sorted[k + 1]].objective) - obj(&pop[sorted[k - 1]].objective);
                out[sorted[k]] += gap / span;
            }
        }
    }
    out
}

/// NSGA-II style search: binary tournaments on (rank, crowding), uniform
/// crossover, per-bit mutation and elitist survival over parents plus
/// offspring. Duplicate structures are dropped at survival and the gap is
/// filled with random newcomers. Returns the first front of the final
/// population; deterministic for a fixed seed.
pub fn evolutionary_discover(pool: &TermPool, params: &EvolutionParams) -> Result<ParetoFront> {
    params.validate()?;
    let n = pool.terms.len();
    let space = (pool.lhs_candidates.len() as u64).saturating_mul((1u64 << (n - 1)) - 1);
    let mut s = Search {
        pool,
        params: *params,
        rng: ChaCha8Rng::seed_from_u64(params.seed),
        cache: HashMap::new(),
        space,
    };
    let target = (params.population as u64).min(s.space) as usize;

    let mut pop: Vec<Scored> = Vec::new();
    fill_unique(&mut s, &mut pop, target);
    for _ in 0..params.generations {
        let rank = nondominated_ranks(&pop, params.min_relative_gain);
        let crowd = crowding(&pop, &rank);
        let mut combined = pop.clone();
        for _ in 0..params.population {
            let a = s.tournament(&pop, &rank, &crowd);
            let b = s.tournament(&pop, &rank, &crowd);
            let child = s.offspring(pop[a].genome, pop[b].genome);
            if !combined.iter().any(|c| c.genome == child) {
                let scored = s.score(child);
                combined.push(scored);
            }
        }
        fill_unique(&mut s, &mut combined, target);
        pop = survivors(combined, target, params.min_relative_gain);
    }
    let rank = nondominated_ranks(&pop, params.min_relative_gain);
    let front: Vec<&Scored> = pop
        .iter()
        .zip(&rank)
        .filter(|(p, &r)| r == 0 && p.objective.error.is_finite())
        .map(|(p, _)| p)
        .collect();
    Ok(front_from(pool, front))
}

fn fill_unique(s: &mut Search<'_>, pop: &mut Vec<Scored>, target: usize) {
    // Bounded attempts: random draws may keep hitting known structures.
    let mut attempts = 0;
    while pop.len() < target && attempts < 50 * target {
        attempts += 1;
        let g = s.random_genome();
        if !pop.iter().any(|p| p.genome == g) {
            let scored = s.score(g);
            pop.push(scored);
        }
    }
}

fn survivors(combined: Vec<Scored>, target: usize, eps: f64) -> Vec<Scored> {
    let rank = nondominated_ranks(&combined, eps);
    let crowd = crowding(&combined, &rank);
    let mut order: Vec<usize> = (0..combined.len()).collect();
    // Stable sort keeps insertion order among exact ties.
    order.sort_by(|&a, &b| rank[a].cmp(&rank[b]).then(crowd[b].total_cmp(&crowd[a])));
    let mut keep: Vec<bool> = vec![false; combined.len()];
    for &i in order.iter().take(target) {
        keep[i] = true;
    }
    combined.into_iter().zip(keep).filter(|(_, k)| *k).map(|(s, _)| s).collect()
}
