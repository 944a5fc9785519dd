//! Semi-supervised refinement experiment: a small labeled split trains weak
//! classifiers, the unlabeled remainder gets a k-means cluster ensemble, and
//! the combination model refines the ensemble votes.

use super::{accuracy, kmeans, train_weak_classifiers, weak::DEFAULT_KINDS, Dataset2D};
use crate::error::{Error, Result};
use crate::inference::{fit, FitConfig};
use crate::scalar::Real;
use crate::types::{argmax_row, LabelObservations, ProblemShape};
use ndarray::Array2;
use rand::{seq::SliceRandom, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Worker-count cap honored by the trial loop.
pub const THREADS_ENV_VAR: &str = "CONSENSUS_VEM_THREADS";

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    /// Fraction of objects used as the labeled training split.
    pub pct_labeled: f64,
    pub n_trials: usize,
    pub master_seed: u64,
    /// Cluster counts of the k-means ensemble; `None` uses
    /// {k, k+2, 2k, 2k+4} for k classes.
    pub cluster_counts: Option<Vec<usize>>,
    pub fit: FitConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            pct_labeled: 0.02,
            n_trials: 20,
            master_seed: 0,
            cluster_counts: None,
            fit: FitConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TrialOutcome {
    pub trial: usize,
    /// Majority vote over the weak classifier columns.
    pub vote_accuracy: f64,
    /// Refined hard labels from the combination model.
    pub model_accuracy: f64,
}

pub fn default_cluster_counts(k: usize) -> Vec<usize> {
    vec![k, k + 2, 2 * k, 2 * k + 4]
}

/// Run `n_trials` independent trials; each draws a stratified labeled split,
/// trains the weak ensemble, clusters the target set, fits the combination
/// model, and scores majority vote and refined labels against ground truth.
/// Trials run in parallel (capped by `CONSENSUS_VEM_THREADS`) with per-trial
/// seeds derived from the master seed, so results are reproducible for any
/// worker count.
pub fn run_semi_supervised_experiment<F: Real>(
    data: &Dataset2D<F>,
    cfg: &ExperimentConfig,
) -> Result<Vec<TrialOutcome>> {
    let n = data.len();
    let k = data.n_classes;
    if !(cfg.pct_labeled > 0.0 && cfg.pct_labeled < 1.0) {
        return Err(Error::invalid_argument(
            "pct_labeled must lie strictly between 0 and 1",
        ));
    }
    let n_labeled = ((n as f64) * cfg.pct_labeled).round() as usize;
    if n_labeled < k || n - n_labeled < 2 * k {
        return Err(Error::invalid_argument(
            "split leaves too few labeled or target objects",
        ));
    }
    let counts = cfg
        .cluster_counts
        .clone()
        .unwrap_or_else(|| default_cluster_counts(k));
    if counts.iter().any(|&c| c == 0 || c > n - n_labeled) {
        return Err(Error::invalid_argument("cluster count out of range"));
    }

    let mut seeder = ChaCha8Rng::seed_from_u64(cfg.master_seed);
    let trial_seeds: Vec<u64> = (0..cfg.n_trials).map(|_| seeder.gen()).collect();

    let pool = thread_pool()?;
    pool.install(|| {
        trial_seeds
            .par_iter()
            .enumerate()
            .map(|(trial, &seed)| run_trial(data, cfg, &counts, trial, seed, n_labeled))
            .collect()
    })
}

fn run_trial<F: Real>(
    data: &Dataset2D<F>,
    cfg: &ExperimentConfig,
    counts: &[usize],
    trial: usize,
    seed: u64,
    n_labeled: usize,
) -> Result<TrialOutcome> {
    let k = data.n_classes;
    let (train_idx, target_idx) = stratified_split(data, n_labeled, seed)?;

    let gather = |idx: &[usize]| -> Dataset2D<F> {
        let mut points = Array2::zeros((idx.len(), 2));
        let mut labels = Vec::with_capacity(idx.len());
        for (row, &i) in idx.iter().enumerate() {
            points[[row, 0]] = data.points[[i, 0]];
            points[[row, 1]] = data.points[[i, 1]];
            labels.push(data.labels[i]);
        }
        Dataset2D {
            points,
            labels,
            n_classes: k,
        }
    };
    let train = gather(&train_idx);
    let target = gather(&target_idx);
    let nt = target.len();

    let classifiers = train_weak_classifiers(&train, &DEFAULT_KINDS, seed)?;
    let r1 = classifiers.len();
    let mut class_labels = Array2::zeros((nt, r1));
    for obj in 0..nt {
        let p = [target.points[[obj, 0]], target.points[[obj, 1]]];
        for (l, clf) in classifiers.iter().enumerate() {
            class_labels[[obj, l]] = clf.predict(&p);
        }
    }

    let r2 = counts.len();
    let mut cluster_labels = Array2::zeros((nt, r2));
    for (m, &c) in counts.iter().enumerate() {
        let km = kmeans(&target.points, c, seed.wrapping_add(1 + m as u64))?;
        for obj in 0..nt {
            cluster_labels[[obj, m]] = km.labels[obj];
        }
    }

    let w = LabelObservations {
        class_labels,
        cluster_labels,
    };
    let shape = ProblemShape {
        n_objects: nt,
        n_classes: k,
        n_classifiers: r1,
        n_clusterings: r2,
        clusters_per_clustering: counts.to_vec(),
    };
    let mut fit_cfg = cfg.fit.clone();
    fit_cfg.seed = seed;
    let fitres = fit::<F>(&w, &shape, &fit_cfg)?;

    let votes: Vec<usize> = (0..nt)
        .map(|obj| {
            let mut tally = vec![0usize; k];
            for l in 0..r1 {
                tally[w.class_labels[[obj, l]]] += 1;
            }
            argmax_row(tally.iter().map(|&c| c as f64))
        })
        .collect();

    Ok(TrialOutcome {
        trial,
        vote_accuracy: accuracy(&votes, &target.labels),
        model_accuracy: accuracy(&fitres.posterior.hard_labels, &target.labels),
    })
}

/// Proportional per-class split (largest remainder), shuffled per seed.
fn stratified_split<F: Real>(
    data: &Dataset2D<F>,
    n_labeled: usize,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let k = data.n_classes;
    let n = data.len();
    let mut by_class: Vec<Vec<usize>> = vec![vec![]; k];
    for (i, &l) in data.labels.iter().enumerate() {
        by_class[l].push(i);
    }
    if by_class.iter().any(|g| g.is_empty()) {
        return Err(Error::invalid_argument("a class has no objects"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for g in by_class.iter_mut() {
        g.shuffle(&mut rng);
    }
    // At least one per class, the rest by largest remainder.
    let mut take = vec![1usize; k];
    let mut remaining = n_labeled.saturating_sub(k);
    let mut fractions: Vec<(f64, usize)> = vec![];
    for (c, g) in by_class.iter().enumerate() {
        let ideal = (g.len() as f64 / n as f64) * remaining as f64;
        take[c] += ideal.floor() as usize;
        fractions.push((ideal - ideal.floor(), c));
    }
    remaining -= fractions
        .iter()
        .map(|&(_, c)| take[c] - 1)
        .sum::<usize>()
        .min(remaining);
    fractions.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    for &(_, c) in fractions.iter().take(remaining) {
        take[c] += 1;
    }

    let mut train = vec![];
    let mut target = vec![];
    for (c, g) in by_class.iter().enumerate() {
        let t = take[c].min(g.len().saturating_sub(1));
        train.extend_from_slice(&g[..t]);
        target.extend_from_slice(&g[t..]);
    }
    train.sort_unstable();
    target.sort_unstable();
    Ok((train, target))
}

/// Build the trial pool, honoring the worker-count cap.
fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV_VAR) {
        let n: usize = v
            .parse()
            .map_err(|_| Error::invalid_argument(format!("{THREADS_ENV_VAR} must be a number")))?;
        builder = builder.num_threads(n.max(1));
    }
    builder
        .build()
        .map_err(|e| Error::invalid_argument(format!("thread pool: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::make_half_moons;

    #[test]
    fn degenerate_split_rejected() {
        let d = make_half_moons::<f64>(100, 0.1, 0).unwrap();
        let mut cfg = ExperimentConfig::default();
        cfg.pct_labeled = 1.0;
        assert!(run_semi_supervised_experiment(&d, &cfg).is_err());
        cfg.pct_labeled = 0.0;
        assert!(run_semi_supervised_experiment(&d, &cfg).is_err());
    }

    #[test]
    fn reproducible_across_runs_and_worker_counts() {
        let d = make_half_moons::<f64>(120, 0.1, 3).unwrap();
        let mut cfg = ExperimentConfig::default();
        cfg.pct_labeled = 0.1;
        cfg.n_trials = 3;
        cfg.master_seed = 42;
        let a = run_semi_supervised_experiment(&d, &cfg).unwrap();
        std::env::set_var(THREADS_ENV_VAR, "1");
        let b = run_semi_supervised_experiment(&d, &cfg).unwrap();
        std::env::remove_var(THREADS_ENV_VAR);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.trial, y.trial);
            assert_eq!(x.vote_accuracy.to_bits(), y.vote_accuracy.to_bits());
            assert_eq!(x.model_accuracy.to_bits(), y.model_accuracy.to_bits());
        }
    }

    #[test]
    fn stratified_split_is_proportional() {
        let d = make_half_moons::<f64>(200, 0.1, 5).unwrap();
        let (train, target) = stratified_split(&d, 10, 7).unwrap();
        assert_eq!(train.len(), 10);
        assert_eq!(target.len(), 190);
        let c0 = train.iter().filter(|&&i| d.labels[i] == 0).count();
        assert_eq!(c0, 5);
        // Disjoint cover.
        let mut all: Vec<usize> = train.iter().chain(&target).copied().collect();
        all.sort_unstable();
        all.dedup();
        assert_eq!(all.len(), 200);
    }
}
