//! Discrete rotation angles: a genetic algorithm over grid indices and the
//! nearest-grid-point projection of a continuous solution.
//!
//! A chromosome holds one index into the `alpha` grid per rotation row followed
//! by one index into the `beta` grid per rotation column, so it always decodes
//! to a cross-linked [`RotationState`].

use std::collections::HashMap;

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beamforming::RateReport;
use crate::error::{Error, Result};
use crate::geometry::{self, wrap_angle, ArrayLayout, Coupling, RotationState, DEFAULT_TOL};
use crate::rng::{self, tag};
use crate::rotation_opt::{ConstraintSet, RotationProblem};

/// Candidate values for the row angles `alpha` and the column angles `beta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleGrid {
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

impl AngleGrid {
    /// Sorts both lists; every value must lie in `(-pi, pi]`.
    pub fn new(mut alpha: Vec<f64>, mut beta: Vec<f64>) -> Result<Self> {
        for (name, values) in [("alpha", &alpha), ("beta", &beta)] {
            if values.is_empty() {
                return Err(Error::InvalidParameter(format!("{name} grid is empty")));
            }
            if let Some(v) = values
                .iter()
                .find(|v| !(v.is_finite() && **v > -std::f64::consts::PI && **v <= std::f64::consts::PI))
            {
                return Err(Error::InvalidParameter(format!(
                    "{name} grid value {v} is outside (-pi, pi]"
                )));
            }
        }
        alpha.sort_by(f64::total_cmp);
        beta.sort_by(f64::total_cmp);
        Ok(Self { alpha, beta })
    }

    /// `points` evenly spaced values on `[-theta_max, theta_max]` for both angles.
    ///
    /// One point, or a zero bound, gives the single value 0.
    pub fn uniform(theta_max: f64, points: usize) -> Result<Self> {
        if points == 0 {
            return Err(Error::InvalidParameter("grid needs at least one point".into()));
        }
        if !(theta_max.is_finite() && (0.0..std::f64::consts::PI).contains(&theta_max)) {
            return Err(Error::InvalidParameter(format!(
                "grid half-width {theta_max} must be in [0, pi)"
            )));
        }
        let values: Vec<f64> = if points == 1 || theta_max == 0.0 {
            vec![0.0]
        } else {
            let step = 2.0 * theta_max / (points - 1) as f64;
            (0..points)
                .map(|i| if 2 * i + 1 == points { 0.0 } else { -theta_max + step * i as f64 })
                .collect()
        };
        Self::new(values.clone(), values)
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    /// Index of the grid value closest to `x` on the circle; ties go to the lower index.
    pub fn nearest(values: &[f64], x: f64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, &v) in values.iter().enumerate() {
            let d = wrap_angle(x - v).abs();
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        best
    }
}

/// Row-angle indices followed by column-angle indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Chromosome {
    genes: Vec<usize>,
    rows: usize,
}

impl Chromosome {
    pub fn new(genes: Vec<usize>, rows: usize, grid: &AngleGrid) -> Result<Self> {
        if rows > genes.len() {
            return Err(Error::InvalidParameter(format!(
                "{rows} row genes requested from a chromosome of length {}",
                genes.len()
            )));
        }
        let c = Self { genes, rows };
        for (i, &g) in c.genes.iter().enumerate() {
            let len = c.grid_len(i, grid);
            if g >= len {
                return Err(Error::IndexOutOfRange { index: g, len });
            }
        }
        Ok(c)
    }

    /// All genes pointing at the grid value nearest zero.
    pub fn nearest_zero(rows: usize, cols: usize, grid: &AngleGrid) -> Self {
        let a = AngleGrid::nearest(&grid.alpha, 0.0);
        let b = AngleGrid::nearest(&grid.beta, 0.0);
        let mut genes = vec![a; rows];
        genes.extend(std::iter::repeat_n(b, cols));
        Self { genes, rows }
    }

    pub fn random<R: Rng + ?Sized>(rows: usize, cols: usize, grid: &AngleGrid, rng: &mut R) -> Self {
        let genes = (0..rows + cols)
            .map(|i| rng.random_range(0..if i < rows { grid.alpha.len() } else { grid.beta.len() }))
            .collect();
        Self { genes, rows }
    }

    pub fn genes(&self) -> &[usize] {
        &self.genes
    }

    pub fn len(&self) -> usize {
        self.genes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.genes.is_empty()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.genes.len() - self.rows
    }

    fn grid_len(&self, gene: usize, grid: &AngleGrid) -> usize {
        if gene < self.rows {
            grid.alpha.len()
        } else {
            grid.beta.len()
        }
    }

    pub fn decode(&self, grid: &AngleGrid) -> RotationState {
        let alpha = self.genes[..self.rows].iter().map(|&i| grid.alpha[i]).collect();
        let beta = self.genes[self.rows..].iter().map(|&i| grid.beta[i]).collect();
        RotationState::cross_linked(alpha, beta)
    }
}

/// Genetic algorithm settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaParams {
    pub population: usize,
    pub generations: usize,
    pub crossover: f64,
    pub mutation: f64,
    /// Tournament size.
    pub tournament: usize,
    /// Fitness per violated constraint; must be negative.
    pub penalty: f64,
    /// Individuals copied unchanged into the next generation.
    pub elites: usize,
}

impl Default for GaParams {
    fn default() -> Self {
        Self {
            population: 200,
            generations: 100,
            crossover: 0.8,
            mutation: 0.1,
            tournament: 2,
            penalty: -10.0,
            elites: 1,
        }
    }
}

impl GaParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.population < 2 {
            return bad(format!("population {} must be at least 2", self.population));
        }
        if !(0.0..=1.0).contains(&self.crossover) || !(0.0..=1.0).contains(&self.mutation) {
            return bad(format!(
                "crossover {} and mutation {} must be probabilities",
                self.crossover, self.mutation
            ));
        }
        if self.tournament == 0 {
            return bad("tournament size must be at least 1".into());
        }
        if !(self.penalty < 0.0 && self.penalty.is_finite()) {
            return bad(format!("penalty {} must be negative", self.penalty));
        }
        if self.elites > self.population {
            return bad(format!(
                "{} elites exceed the population of {}",
                self.elites, self.population
            ));
        }
        Ok(())
    }
}

/// Number of violated constraints at `state`.
///
/// Each unit over the eccentric bound counts once, and in panel mode each
/// violated anti-reflection or center-facing row counts once more.
pub fn violation_count(
    state: &RotationState,
    layout: &ArrayLayout,
    constraints: ConstraintSet,
    tol: f64,
) -> Result<usize> {
    state.check_layout(layout)?;
    let mut count = match constraints.theta_max {
        Some(t) => geometry::element_bound_satisfied(state, t, tol)
            .iter()
            .filter(|ok| !**ok)
            .count(),
        None => 0,
    };
    if constraints.panel_geometry {
        count += geometry::panel_constraints_satisfied(state, layout, tol)?
            .violations
            .len();
    }
    Ok(count)
}

/// Sum rate under MMSE combining when every constraint holds, otherwise
/// `penalty` times the number of violations.
pub fn fitness(
    problem: &RotationProblem<'_>,
    grid: &AngleGrid,
    chromosome: &Chromosome,
    penalty: f64,
) -> Result<f64> {
    let state = chromosome.decode(grid);
    let violations = violation_count(&state, problem.layout(), problem.constraints(), DEFAULT_TOL)?;
    if violations > 0 {
        return Ok(penalty * violations as f64);
    }
    Ok(problem.mmse(&state)?.1.sum)
}

/// Index of the winner of a tournament among `size` distinct individuals.
///
/// Ties between the fittest sampled individuals are broken uniformly.
pub fn tournament_select<R: Rng + ?Sized>(fitnesses: &[f64], size: usize, rng: &mut R) -> Result<usize> {
    if fitnesses.is_empty() {
        return Err(Error::InvalidParameter("tournament over an empty population".into()));
    }
    if size == 0 {
        return Err(Error::InvalidParameter("tournament size must be at least 1".into()));
    }
    let entrants = index::sample(rng, fitnesses.len(), size.min(fitnesses.len()));
    let best = entrants
        .iter()
        .map(|i| fitnesses[i])
        .fold(f64::NEG_INFINITY, f64::max);
    let tied: Vec<usize> = entrants.iter().filter(|&i| fitnesses[i] == best).collect();
    Ok(tied[rng.random_range(0..tied.len())])
}

/// Swaps the genes in positions `first..second` between the two parents.
pub fn crossover_at(a: &Chromosome, b: &Chromosome, first: usize, second: usize) -> (Chromosome, Chromosome) {
    let mut x = a.clone();
    let mut y = b.clone();
    x.genes[first..second].swap_with_slice(&mut y.genes[first..second]);
    (x, y)
}

/// With probability `p_c`, swaps the segment between two random cut points;
/// otherwise returns copies of the parents.
pub fn two_point_crossover<R: Rng + ?Sized>(
    a: &Chromosome,
    b: &Chromosome,
    p_c: f64,
    rng: &mut R,
) -> Result<(Chromosome, Chromosome)> {
    if a.len() != b.len() || a.rows != b.rows {
        return Err(Error::InvalidParameter(format!(
            "crossover between chromosomes of lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() || !rng.random_bool(p_c) {
        return Ok((a.clone(), b.clone()));
    }
    let cuts = index::sample(rng, a.len() + 1, 2);
    let (i, j) = (cuts.index(0), cuts.index(1));
    Ok(crossover_at(a, b, i.min(j), i.max(j)))
}

/// Resamples each gene with probability `p_m` to a different index of its grid.
pub fn mutate<R: Rng + ?Sized>(c: &Chromosome, p_m: f64, grid: &AngleGrid, rng: &mut R) -> Chromosome {
    let mut out = c.clone();
    for i in 0..out.genes.len() {
        let len = c.grid_len(i, grid);
        if len < 2 || !rng.random_bool(p_m) {
            continue;
        }
        let pick = rng.random_range(0..len - 1);
        out.genes[i] = if pick >= out.genes[i] { pick + 1 } else { pick };
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaOutcome {
    pub chromosome: Chromosome,
    pub state: RotationState,
    /// MMSE rates at `state`, reported even when it is infeasible.
    pub report: RateReport,
    pub fitness: f64,
    pub feasible: bool,
    /// Best fitness in each population, from the initial one onwards.
    pub best_per_generation: Vec<f64>,
    /// Distinct chromosomes whose fitness was computed.
    pub evaluations: usize,
}

fn check_problem(problem: &RotationProblem<'_>) -> Result<()> {
    if problem.coupling() != Coupling::CrossLinked {
        return Err(Error::InvalidParameter(
            "discrete search needs a cross-linked problem".into(),
        ));
    }
    Ok(())
}

/// Evolves `params.population` chromosomes for `params.generations` generations.
///
/// Every random draw comes from a stream keyed by `seed`, the generation and
/// the offspring pair, so a run is reproducible regardless of thread count.
pub fn run_ga(
    problem: &RotationProblem<'_>,
    grid: &AngleGrid,
    params: &GaParams,
    seed: u64,
) -> Result<GaOutcome> {
    params.validate()?;
    check_problem(problem)?;
    let (rows, cols) = (problem.layout().rows(), problem.layout().cols());
    let mut cache: HashMap<Chromosome, f64> = HashMap::new();

    let mut init = rng::substream(seed, &[tag::GA, 0]);
    let mut population: Vec<Chromosome> = (0..params.population)
        .map(|_| Chromosome::random(rows, cols, grid, &mut init))
        .collect();
    let mut best_per_generation = Vec::with_capacity(params.generations + 1);

    let mut generation = 0;
    loop {
        let fitnesses = evaluate(problem, grid, params.penalty, &population, &mut cache)?;
        let mut order: Vec<usize> = (0..population.len()).collect();
        order.sort_by(|&i, &j| fitnesses[j].total_cmp(&fitnesses[i]));
        best_per_generation.push(fitnesses[order[0]]);
        if generation == params.generations {
            let chromosome = population.swap_remove(order[0]);
            return finish(problem, grid, chromosome, fitnesses[order[0]], best_per_generation, cache.len());
        }
        generation += 1;

        let mut next: Vec<Chromosome> = order[..params.elites].iter().map(|&i| population[i].clone()).collect();
        let mut pair = 0u64;
        while next.len() < params.population {
            let mut r = rng::substream(seed, &[tag::GA, generation as u64, pair]);
            pair += 1;
            let a = &population[tournament_select(&fitnesses, params.tournament, &mut r)?];
            let b = &population[tournament_select(&fitnesses, params.tournament, &mut r)?];
            let (x, y) = two_point_crossover(a, b, params.crossover, &mut r)?;
            next.push(mutate(&x, params.mutation, grid, &mut r));
            if next.len() < params.population {
                next.push(mutate(&y, params.mutation, grid, &mut r));
            }
        }
        population = next;
    }
}

fn evaluate(
    problem: &RotationProblem<'_>,
    grid: &AngleGrid,
    penalty: f64,
    population: &[Chromosome],
    cache: &mut HashMap<Chromosome, f64>,
) -> Result<Vec<f64>> {
    let mut missing: Vec<&Chromosome> = population.iter().filter(|c| !cache.contains_key(*c)).collect();
    missing.sort_by(|a, b| a.genes.cmp(&b.genes));
    missing.dedup();
    let values: Vec<f64> = missing
        .par_iter()
        .map(|c| fitness(problem, grid, c, penalty))
        .collect::<Result<_>>()?;
    for (c, v) in missing.into_iter().zip(values) {
        cache.insert(c.clone(), v);
    }
    Ok(population.iter().map(|c| cache[c]).collect())
}

fn finish(
    problem: &RotationProblem<'_>,
    grid: &AngleGrid,
    chromosome: Chromosome,
    fitness: f64,
    best_per_generation: Vec<f64>,
    evaluations: usize,
) -> Result<GaOutcome> {
    let state = chromosome.decode(grid);
    let feasible = violation_count(&state, problem.layout(), problem.constraints(), DEFAULT_TOL)? == 0;
    let report = problem.mmse(&state)?.1;
    Ok(GaOutcome {
        chromosome,
        state,
        report,
        fitness,
        feasible,
        best_per_generation,
        evaluations,
    })
}

/// Best chromosome by enumerating the whole grid. Meant for small instances.
pub fn exhaustive_search(
    problem: &RotationProblem<'_>,
    grid: &AngleGrid,
    penalty: f64,
) -> Result<(Chromosome, f64)> {
    check_problem(problem)?;
    let (rows, cols) = (problem.layout().rows(), problem.layout().cols());
    let sizes: Vec<usize> = std::iter::repeat_n(grid.alpha.len(), rows)
        .chain(std::iter::repeat_n(grid.beta.len(), cols))
        .collect();
    let mut genes = vec![0; sizes.len()];
    let mut best: Option<(Chromosome, f64)> = None;
    loop {
        let c = Chromosome { genes: genes.clone(), rows };
        let f = fitness(problem, grid, &c, penalty)?;
        if best.as_ref().is_none_or(|(_, b)| f > *b) {
            best = Some((c, f));
        }
        let mut i = 0;
        loop {
            if i == genes.len() {
                return Ok(best.expect("the grid has at least one point"));
            }
            genes[i] += 1;
            if genes[i] < sizes[i] {
                break;
            }
            genes[i] = 0;
            i += 1;
        }
    }
}

/// Result of snapping a continuous state onto the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub state: RotationState,
    /// `None` when no feasible grid point was reached and `state` is the
    /// reference orientation instead.
    pub chromosome: Option<Chromosome>,
    /// Genes changed away from their nearest value to restore feasibility.
    pub repairs: usize,
}

impl Projection {
    pub fn fell_back(&self) -> bool {
        self.chromosome.is_none()
    }
}

/// Snaps every angle of `continuous` to its nearest grid value, then repairs
/// violations greedily.
///
/// Each repair step tries every other grid value for every gene that touches
/// a violated unit and keeps the change that leaves the fewest violations,
/// preferring values close to the continuous angle. If no change reduces the
/// count, the reference orientation is returned.
pub fn nearest_projection(
    continuous: &RotationState,
    grid: &AngleGrid,
    layout: &ArrayLayout,
    constraints: ConstraintSet,
) -> Result<Projection> {
    if continuous.coupling() != Coupling::CrossLinked {
        return Err(Error::InvalidParameter(
            "projection needs a cross-linked state".into(),
        ));
    }
    continuous.check_layout(layout)?;
    let rows = continuous.rows();
    let targets: Vec<f64> = continuous.to_vector();
    let values = |gene: usize| if gene < rows { &grid.alpha } else { &grid.beta };
    let distance = |c: &Chromosome| -> f64 {
        c.genes
            .iter()
            .enumerate()
            .map(|(i, &g)| wrap_angle(values(i)[g] - targets[i]).abs())
            .sum()
    };
    let genes = targets
        .iter()
        .enumerate()
        .map(|(i, &x)| AngleGrid::nearest(values(i), x))
        .collect();
    let mut current = Chromosome { genes, rows };
    let mut violations = violation_count(&current.decode(grid), layout, constraints, DEFAULT_TOL)?;
    let mut repairs = 0;
    while violations > 0 {
        let offending = offending_genes(&current.decode(grid), layout, constraints)?;
        let mut best: Option<(usize, f64, Chromosome)> = None;
        for gene in offending {
            for g in 0..values(gene).len() {
                if g == current.genes[gene] {
                    continue;
                }
                let mut candidate = current.clone();
                candidate.genes[gene] = g;
                let v = violation_count(&candidate.decode(grid), layout, constraints, DEFAULT_TOL)?;
                let d = distance(&candidate);
                if best.as_ref().is_none_or(|(bv, bd, _)| v < *bv || (v == *bv && d < *bd)) {
                    best = Some((v, d, candidate));
                }
            }
        }
        match best {
            Some((v, _, candidate)) if v < violations => {
                current = candidate;
                violations = v;
                repairs += 1;
            }
            _ => {
                return Ok(Projection {
                    state: RotationState::zeros(rows, continuous.cols(), Coupling::CrossLinked),
                    chromosome: None,
                    repairs,
                })
            }
        }
    }
    Ok(Projection {
        state: current.decode(grid),
        chromosome: Some(current),
        repairs,
    })
}

/// Genes whose row or column contains a violating unit.
fn offending_genes(
    state: &RotationState,
    layout: &ArrayLayout,
    constraints: ConstraintSet,
) -> Result<Vec<usize>> {
    let (rows, cols) = (state.rows(), state.cols());
    let mut bad = vec![false; rows * cols];
    if let Some(t) = constraints.theta_max {
        for (u, ok) in geometry::element_bound_satisfied(state, t, DEFAULT_TOL).iter().enumerate() {
            bad[u] |= !ok;
        }
    }
    if constraints.panel_geometry {
        for v in geometry::panel_constraints_satisfied(state, layout, DEFAULT_TOL)?.violations {
            let unit = match v {
                geometry::PanelViolation::Reflection { panel, .. } => panel,
                geometry::PanelViolation::CpuBlockage { panel, .. } => panel,
            };
            bad[unit] = true;
        }
    }
    let mut genes: Vec<usize> = Vec::new();
    for (u, _) in bad.iter().enumerate().filter(|(_, b)| **b) {
        genes.push(u / cols);
        genes.push(rows + u % cols);
    }
    genes.sort_unstable();
    genes.dedup();
    Ok(genes)
}
