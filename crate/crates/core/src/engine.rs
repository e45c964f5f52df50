//! Mussels wandering optimization with activation-gated centers.
//!
//! Each mussel holds `k_max` candidate centers plus one activation per
//! center. Every iteration the population is evaluated, sorted by RF
//! fitness, and every non-elite mussel takes a levy-scaled step toward the
//! mean position of the elite.

use std::borrow::Cow;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{db_index, DbParams};
use crate::fitness::{rf_fitness, WORST_FITNESS};
use crate::model::{
    assign_to_centers, clamp_position, compute_bounds, FeatureDataset, Matrix, Partition,
    SearchBounds,
};
use crate::rng::{Purpose, Stream};

/// Run parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MwoConfig {
    pub population: usize,
    pub k_max: usize,
    pub top_count: usize,
    pub gamma: f64,
    pub mu: f64,
    pub activation_threshold: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub subsample_cap: usize,
    pub levy_cap: f64,
    pub levy_resample: bool,
    /// Stop after this many iterations without improvement; 0 disables.
    pub stagnation_window: usize,
}

impl Default for MwoConfig {
    fn default() -> Self {
        MwoConfig {
            population: 50,
            k_max: 15,
            top_count: default_top_count(50),
            gamma: 1.0,
            mu: 2.0,
            activation_threshold: 0.5,
            max_iter: 200,
            seed: 0,
            subsample_cap: 16384,
            levy_cap: 2.0,
            levy_resample: true,
            stagnation_window: 0,
        }
    }
}

/// Ten percent of the population, at least one.
pub fn default_top_count(population: usize) -> usize {
    population.div_ceil(10).max(1)
}

impl MwoConfig {
    /// Sets the population and resets the elite count to its default for
    /// that size.
    pub fn with_population(mut self, population: usize) -> Self {
        self.population = population;
        self.top_count = default_top_count(population);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.population < 3 {
            return fail(format!("population must be >= 3, got {}", self.population));
        }
        if self.top_count < 1 || self.top_count >= self.population {
            return fail(format!(
                "top count must be in [1, {}), got {}",
                self.population, self.top_count
            ));
        }
        if self.k_max < 2 {
            return fail(format!("k_max must be >= 2, got {}", self.k_max));
        }
        if !(self.mu > 1.0) || !self.mu.is_finite() {
            return fail(format!("mu must be > 1, got {}", self.mu));
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return fail(format!("gamma must be > 0, got {}", self.gamma));
        }
        if self.max_iter < 1 {
            return fail("max_iter must be >= 1".to_string());
        }
        if !(self.levy_cap >= self.gamma) || !self.levy_cap.is_finite() {
            return fail(format!(
                "levy cap {} must be finite and >= gamma {}",
                self.levy_cap, self.gamma
            ));
        }
        if !(0.0..=1.0).contains(&self.activation_threshold) {
            return fail(format!(
                "activation threshold must lie in [0, 1], got {}",
                self.activation_threshold
            ));
        }
        if self.subsample_cap < 2 {
            return fail(format!("subsample cap must be >= 2, got {}", self.subsample_cap));
        }
        Ok(())
    }
}

/// Levy step length `gamma * (1 - u)^(-1 / (mu - 1))`, capped at `cap`.
pub fn draw_levy(u: f64, gamma: f64, mu: f64, cap: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&u) {
        return Err(Error::invalid(format!("levy draw {u} outside [0, 1)")));
    }
    if !(mu > 1.0) || !(gamma > 0.0) {
        return Err(Error::invalid("levy walk needs mu > 1 and gamma > 0"));
    }
    let raw = gamma * (1.0 - u).powf(-1.0 / (mu - 1.0));
    Ok(raw.min(cap))
}

fn activation_column(position: &Matrix) -> usize {
    position.cols() - 1
}

/// Guarantees at least two activations at or above `threshold`. When the
/// floor is violated the two largest activations (ties to the lower row) are
/// redrawn uniformly from `[threshold, 1]`.
pub fn enforce_activation_floor(position: &mut Matrix, threshold: f64, stream: &mut Stream) {
    let a = activation_column(position);
    let active = (0..position.rows())
        .filter(|&r| position.get(r, a) >= threshold)
        .count();
    if active >= 2 {
        return;
    }
    let mut rows: Vec<usize> = (0..position.rows()).collect();
    rows.sort_by(|&x, &y| position.get(y, a).total_cmp(&position.get(x, a)));
    for &r in rows.iter().take(2) {
        let v = stream.uniform(threshold, 1.0);
        position.set(r, a, v);
    }
}

/// Feature rows whose activation is at or above `threshold`, in row order.
pub fn active_centers(position: &Matrix, threshold: f64) -> Matrix {
    let a = activation_column(position);
    let mut data = Vec::new();
    let mut rows = 0;
    for r in 0..position.rows() {
        let row = position.row(r);
        if row[a] >= threshold {
            data.extend_from_slice(&row[..a]);
            rows += 1;
        }
    }
    Matrix::from_vec(rows, a, data).expect("consistent shape")
}

/// One candidate solution.
#[derive(Debug, Clone)]
pub struct Mussel {
    /// `k_max` rows of `d` center coordinates followed by one activation.
    pub position: Matrix,
    /// RF fitness, `None` until evaluated after the last move.
    pub fitness: Option<f64>,
    pub levy: f64,
    /// Partition of the evaluation set under the active centers.
    pub partition: Option<Partition>,
}

impl Mussel {
    pub fn fitness_or_worst(&self) -> f64 {
        self.fitness.unwrap_or(WORST_FITNESS)
    }

    pub fn active_count(&self, threshold: f64) -> usize {
        let a = activation_column(&self.position);
        (0..self.position.rows())
            .filter(|&r| self.position.get(r, a) >= threshold)
            .count()
    }
}

pub fn init_population(config: &MwoConfig, bounds: &SearchBounds) -> Vec<Mussel> {
    let d = bounds.dim();
    (0..config.population)
        .map(|idx| {
            let idx = idx as u64;
            let mut stream = Stream::new(config.seed, Purpose::Init, 0, idx);
            let mut position = Matrix::zeros(config.k_max, d + 1);
            for r in 0..config.k_max {
                let row = position.row_mut(r);
                for m in 0..d {
                    row[m] = stream.uniform(bounds.lo[m], bounds.hi[m]);
                }
                row[d] = stream.next_f64();
            }
            let mut floor = Stream::new(config.seed, Purpose::Floor, 0, idx);
            enforce_activation_floor(&mut position, config.activation_threshold, &mut floor);
            let u = Stream::new(config.seed, Purpose::InitLevy, 0, idx).next_f64();
            let levy = draw_levy(u, config.gamma, config.mu, config.levy_cap)
                .expect("validated configuration");
            Mussel {
                position,
                fitness: None,
                levy,
                partition: None,
            }
        })
        .collect()
}

/// Clusters `dataset` with the mussel's active centers and stores the RF
/// fitness and partition on the mussel.
pub fn evaluate(mussel: &mut Mussel, dataset: &FeatureDataset, threshold: f64) -> f64 {
    let centers = active_centers(&mussel.position, threshold);
    let partition = assign_to_centers(dataset, &centers);
    let fitness = rf_fitness(dataset, &partition);
    mussel.fitness = Some(fitness);
    mussel.partition = Some(partition);
    fitness
}

/// Element-wise mean of the first `t_top` positions of an already sorted
/// population.
pub fn top_mean(sorted: &[&Mussel], t_top: usize) -> Matrix {
    assert!(t_top >= 1 && t_top <= sorted.len(), "t_top out of range");
    let first = &sorted[0].position;
    let mut mean = Matrix::zeros(first.rows(), first.cols());
    for m in &sorted[..t_top] {
        for (acc, v) in mean.as_mut_slice().iter_mut().zip(m.position.as_slice()) {
            *acc += v;
        }
    }
    let scale = 1.0 / t_top as f64;
    mean.as_mut_slice().iter_mut().for_each(|v| *v *= scale);
    mean
}

/// Moves `mussel` to `P + levy * (elite_mean - P)`, then clamps and restores
/// the activation floor. Invalidates the cached fitness.
pub fn update_step(
    mussel: &mut Mussel,
    elite_mean: &Matrix,
    levy: f64,
    bounds: &SearchBounds,
    threshold: f64,
    stream: &mut Stream,
) {
    assert_eq!(mussel.position.rows(), elite_mean.rows());
    assert_eq!(mussel.position.cols(), elite_mean.cols());
    for (p, t) in mussel
        .position
        .as_mut_slice()
        .iter_mut()
        .zip(elite_mean.as_slice())
    {
        *p += levy * (t - *p);
    }
    clamp_position(&mut mussel.position, bounds);
    enforce_activation_floor(&mut mussel.position, threshold, stream);
    mussel.levy = levy;
    mussel.fitness = None;
    mussel.partition = None;
}

/// Population order by `(fitness, index)`.
pub fn rank_population(population: &[Mussel]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..population.len()).collect();
    order.sort_by(|&a, &b| {
        population[a]
            .fitness_or_worst()
            .total_cmp(&population[b].fitness_or_worst())
            .then(a.cmp(&b))
    });
    order
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    /// 1-based iteration number.
    pub iteration: usize,
    pub best_rf: f64,
    /// Infinite when the best solution has fewer than two clusters.
    pub best_db: f64,
    pub best_k: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    pub records: Vec<TraceRecord>,
}

impl ConvergenceTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn is_monotone(&self) -> bool {
        self.records.windows(2).all(|w| w[1].best_rf <= w[0].best_rf)
    }
}

/// Outcome of a full run.
#[derive(Debug, Clone)]
pub struct ClusteringResult {
    /// Cluster label of every point of the full dataset.
    pub labels: Vec<usize>,
    /// Active centers that attracted at least one point; row `i` is the
    /// center of label `i`.
    pub centers: Matrix,
    pub k_eff: usize,
    pub rf: f64,
    /// Infinite when undefined (fewer than two clusters or coincident means).
    pub db: f64,
    pub db_params: DbParams,
    pub iterations: usize,
    pub seed: u64,
    pub wall_ms: u64,
    /// Number of points used for fitness evaluation.
    pub eval_points: usize,
    pub partition: Partition,
}

impl ClusteringResult {
    /// True when the best solution is degenerate and carries the worst
    /// fitness sentinel.
    pub fn is_degenerate(&self) -> bool {
        self.rf == WORST_FITNESS
    }
}

/// Read-only view handed to observers after every iteration.
pub struct IterationState<'a> {
    pub iteration: usize,
    pub population: &'a [Mussel],
    pub order: &'a [usize],
    pub bounds: &'a SearchBounds,
    pub threshold: f64,
}

pub fn run(dataset: &FeatureDataset, config: &MwoConfig) -> Result<(ClusteringResult, ConvergenceTrace)> {
    run_observed(dataset, config, DbParams::default(), |_| {})
}

/// Full optimization loop. `observer` sees the population once per
/// iteration, after the move step.
pub fn run_observed<F>(
    dataset: &FeatureDataset,
    config: &MwoConfig,
    db_params: DbParams,
    mut observer: F,
) -> Result<(ClusteringResult, ConvergenceTrace)>
where
    F: FnMut(&IterationState<'_>),
{
    config.validate()?;
    let started = Instant::now();
    let bounds = compute_bounds(dataset);
    let threshold = config.activation_threshold;

    let eval_set: Cow<'_, FeatureDataset> = if dataset.n() > config.subsample_cap {
        let idx = Stream::new(config.seed, Purpose::Subsample, 0, 0)
            .sample_indices(dataset.n(), config.subsample_cap);
        Cow::Owned(dataset.select(&idx)?)
    } else {
        Cow::Borrowed(dataset)
    };

    let mut population = init_population(config, &bounds);
    let mut trace = ConvergenceTrace::default();
    let mut best_so_far = f64::INFINITY;
    let mut stale = 0usize;
    let mut order = Vec::new();

    for iter in 0..config.max_iter {
        population
            .par_iter_mut()
            .filter(|m| m.fitness.is_none())
            .for_each(|m| {
                evaluate(m, &eval_set, threshold);
            });

        order = rank_population(&population);
        let best = &population[order[0]];
        let best_rf = best.fitness_or_worst();
        let part = best.partition.as_ref().expect("evaluated");
        let best_db = if part.k_eff() >= 2 {
            db_index(&eval_set, part, db_params)?
        } else {
            WORST_FITNESS
        };
        trace.records.push(TraceRecord {
            iteration: iter + 1,
            best_rf,
            best_db,
            best_k: part.k_eff(),
        });

        if best_rf < best_so_far {
            best_so_far = best_rf;
            stale = 0;
        } else {
            stale += 1;
        }
        let stop = iter + 1 == config.max_iter
            || (config.stagnation_window > 0 && stale >= config.stagnation_window);

        if !stop {
            let elite_mean = {
                let sorted: Vec<&Mussel> = order.iter().map(|&i| &population[i]).collect();
                top_mean(&sorted, config.top_count)
            };
            for &idx in &order[config.top_count..] {
                let mussel = &mut population[idx];
                let levy = if config.levy_resample {
                    let u = Stream::new(config.seed, Purpose::Levy, iter as u64 + 1, idx as u64)
                        .next_f64();
                    draw_levy(u, config.gamma, config.mu, config.levy_cap)?
                } else {
                    mussel.levy
                };
                let mut floor = Stream::new(config.seed, Purpose::Floor, iter as u64 + 1, idx as u64);
                update_step(mussel, &elite_mean, levy, &bounds, threshold, &mut floor);
            }
        }

        observer(&IterationState {
            iteration: iter + 1,
            population: &population,
            order: &order,
            bounds: &bounds,
            threshold,
        });

        if stop {
            break;
        }
    }

    let best = &population[order[0]];
    let active = active_centers(&best.position, threshold);
    let partition = match &eval_set {
        Cow::Borrowed(_) => best.partition.clone().expect("evaluated"),
        Cow::Owned(_) => assign_to_centers(dataset, &active),
    };
    let rf = rf_fitness(dataset, &partition);
    let db = if partition.k_eff() >= 2 {
        db_index(dataset, &partition, db_params)?
    } else {
        WORST_FITNESS
    };
    let mut centers = Matrix::zeros(partition.k_eff(), dataset.d());
    for (c, &src) in partition.sources().iter().enumerate() {
        centers.row_mut(c).copy_from_slice(active.row(src));
    }

    let result = ClusteringResult {
        labels: partition.labels().to_vec(),
        centers,
        k_eff: partition.k_eff(),
        rf,
        db,
        db_params,
        iterations: trace.len(),
        seed: config.seed,
        wall_ms: started.elapsed().as_millis() as u64,
        eval_points: eval_set.n(),
        partition,
    };
    Ok((result, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn activations(values: &[f64]) -> Matrix {
        let rows: Vec<Vec<f64>> = values.iter().map(|&a| vec![0.0, a]).collect();
        Matrix::from_rows(&rows).unwrap()
    }

    fn column(m: &Matrix) -> Vec<f64> {
        (0..m.rows()).map(|r| m.get(r, m.cols() - 1)).collect()
    }

    #[test]
    fn levy_formula_and_cap() {
        assert_eq!(draw_levy(0.0, 1.0, 2.0, 2.0).unwrap(), 1.0);
        assert_eq!(draw_levy(0.5, 1.0, 2.0, 2.0).unwrap(), 2.0);
        assert_eq!(draw_levy(0.9, 1.0, 2.0, 2.0).unwrap(), 2.0);
        assert!((draw_levy(0.9, 1.0, 2.0, 100.0).unwrap() - 10.0).abs() < 1e-12);
        assert!((draw_levy(0.75, 1.0, 3.0, 100.0).unwrap() - 2.0).abs() < 1e-12);
        assert!(draw_levy(1.0, 1.0, 2.0, 2.0).is_err());
        assert!(draw_levy(-0.1, 1.0, 2.0, 2.0).is_err());
    }

    #[test]
    fn floor_leaves_valid_positions_alone() {
        let mut s = Stream::new(0, Purpose::Floor, 0, 0);
        let mut p = activations(&[0.9, 0.7, 0.1]);
        enforce_activation_floor(&mut p, 0.5, &mut s);
        assert_eq!(column(&p), vec![0.9, 0.7, 0.1]);

        let mut p = activations(&[0.5, 0.5, 0.2]);
        enforce_activation_floor(&mut p, 0.5, &mut s);
        assert_eq!(column(&p), vec![0.5, 0.5, 0.2]);
    }

    #[test]
    fn floor_redraws_two_largest() {
        let mut s = Stream::new(0, Purpose::Floor, 0, 0);
        let mut p = activations(&[0.4, 0.3, 0.1]);
        enforce_activation_floor(&mut p, 0.5, &mut s);
        let a = column(&p);
        assert!((0.5..=1.0).contains(&a[0]));
        assert!((0.5..=1.0).contains(&a[1]));
        assert_eq!(a[2], 0.1);

        // Ties go to the lower row.
        let mut p = activations(&[0.1, 0.3, 0.3, 0.3]);
        enforce_activation_floor(&mut p, 0.5, &mut s);
        let a = column(&p);
        assert!(a[1] >= 0.5 && a[2] >= 0.5);
        assert_eq!((a[0], a[3]), (0.1, 0.3));
    }

    #[test]
    fn active_centers_use_inclusive_threshold() {
        let p = Matrix::from_rows(&[vec![1.0, 0.9], vec![2.0, 0.3], vec![3.0, 0.6]]).unwrap();
        assert_eq!(active_centers(&p, 0.5).as_slice(), &[1.0, 3.0]);
        let p = Matrix::from_rows(&[vec![1.0, 0.5], vec![2.0, 0.5], vec![3.0, 0.49]]).unwrap();
        assert_eq!(active_centers(&p, 0.5).as_slice(), &[1.0, 2.0]);
        let p = Matrix::from_rows(&[vec![1.0, 1.0], vec![2.0, 1.0]]).unwrap();
        assert_eq!(active_centers(&p, 0.5).rows(), 2);
    }

    fn mussel(position: Matrix) -> Mussel {
        Mussel {
            position,
            fitness: None,
            levy: 1.0,
            partition: None,
        }
    }

    #[test]
    fn top_mean_examples() {
        let a = mussel(Matrix::filled(2, 3, 0.0));
        let b = mussel(Matrix::filled(2, 3, 2.0));
        let c = mussel(Matrix::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap());
        assert_eq!(top_mean(&[&c, &a], 1), c.position);
        assert_eq!(top_mean(&[&a, &b, &c], 2), Matrix::filled(2, 3, 1.0));
        let m = top_mean(&[&a, &b, &c], 3);
        let expected = [1.0, 4.0 / 3.0, 5.0 / 3.0, 2.0, 7.0 / 3.0, 8.0 / 3.0];
        for (got, want) in m.as_slice().iter().zip(expected) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn update_step_examples() {
        let bounds = SearchBounds::new(vec![0.0], vec![255.0]).unwrap();
        let mut s = Stream::new(0, Purpose::Floor, 0, 0);
        let target = Matrix::from_rows(&[vec![10.0, 0.8], vec![200.0, 0.9]]).unwrap();

        let mut m = mussel(Matrix::from_rows(&[vec![0.0, 0.6], vec![0.0, 0.7]]).unwrap());
        m.fitness = Some(0.3);
        update_step(&mut m, &target, 1.0, &bounds, 0.5, &mut s);
        assert_eq!(m.position, target);
        assert!(m.fitness.is_none());

        let mut m = mussel(Matrix::from_rows(&[vec![0.0, 0.6], vec![0.0, 0.7]]).unwrap());
        update_step(&mut m, &target, 0.5, &bounds, 0.5, &mut s);
        assert_eq!(m.position.get(0, 0), 5.0);

        let mut m = mussel(Matrix::from_rows(&[vec![0.0, 0.6], vec![0.0, 0.7]]).unwrap());
        update_step(&mut m, &target, 2.0, &bounds, 0.5, &mut s);
        assert_eq!(m.position.get(1, 0), 255.0);
        assert_eq!(m.position.get(1, 1), 1.0);
    }

    #[test]
    fn config_validation() {
        assert!(MwoConfig::default().validate().is_ok());
        let bad = [
            MwoConfig { population: 2, top_count: 1, ..Default::default() },
            MwoConfig { top_count: 0, ..Default::default() },
            MwoConfig { top_count: 50, ..Default::default() },
            MwoConfig { k_max: 1, ..Default::default() },
            MwoConfig { mu: 1.0, ..Default::default() },
            MwoConfig { gamma: 0.0, ..Default::default() },
            MwoConfig { max_iter: 0, ..Default::default() },
            MwoConfig { levy_cap: 0.5, ..Default::default() },
        ];
        for cfg in bad {
            assert!(matches!(cfg.validate(), Err(Error::Config(_))), "{cfg:?}");
        }
        assert_eq!(default_top_count(50), 5);
        assert_eq!(default_top_count(3), 1);
        assert_eq!(default_top_count(11), 2);
    }

    #[test]
    fn init_population_respects_invariants() {
        let bounds = SearchBounds::new(vec![5.0], vec![6.0]).unwrap();
        let config = MwoConfig {
            population: 3,
            top_count: 1,
            k_max: 2,
            ..Default::default()
        };
        let pop = init_population(&config, &bounds);
        assert_eq!(pop.len(), 3);
        for m in &pop {
            assert_eq!((m.position.rows(), m.position.cols()), (2, 2));
            assert!(m.active_count(0.5) >= 2);
            assert!((5.0..=6.0).contains(&m.position.get(0, 0)));
            assert!((1.0..=2.0).contains(&m.levy));
            assert!(m.fitness.is_none());
        }
        let again = init_population(&config, &bounds);
        for (a, b) in pop.iter().zip(&again) {
            assert_eq!(a.position, b.position);
            assert_eq!(a.levy, b.levy);
        }
    }

    #[test]
    fn evaluate_scores_blob_means_near_zero() {
        let rows = vec![vec![0.0, 0.0], vec![0.1, 0.0], vec![10.0, 10.0], vec![10.1, 10.0]];
        let data = FeatureDataset::from_rows(&rows).unwrap();
        let mut m = mussel(
            Matrix::from_rows(&[vec![0.05, 0.0, 0.9], vec![10.05, 10.0, 0.9], vec![3.0, 3.0, 0.1]])
                .unwrap(),
        );
        let f = evaluate(&mut m, &data, 0.5);
        assert!(f < 1e-4, "{f}");
        assert_eq!(m.partition.as_ref().unwrap().k_eff(), 2);

        let mut m = mussel(Matrix::from_rows(&[vec![5.0, 5.0, 0.9], vec![5.0, 5.0, 0.9]]).unwrap());
        assert_eq!(evaluate(&mut m, &data, 0.5), WORST_FITNESS);
    }

    #[test]
    fn rank_breaks_ties_by_index() {
        let mut pop: Vec<Mussel> = (0..4).map(|_| mussel(Matrix::zeros(2, 2))).collect();
        pop[0].fitness = Some(0.5);
        pop[1].fitness = Some(0.1);
        pop[2].fitness = Some(0.5);
        pop[3].fitness = Some(WORST_FITNESS);
        assert_eq!(rank_population(&pop), vec![1, 0, 2, 3]);
    }
}
