//! Model-free inverse reinforcement learning by Q-averaging.
//!
//! The reward is linear in 25 state-indicator features, so the empirical
//! Q-value of every demonstrated (state, action) pair is linear in the
//! weights: `Q(s, a) = F(s, a) . w`, where `F(s, a)` is the average
//! discounted feature count of the reward-to-go following each occurrence
//! of `(s, a)`. Weights are fitted by maximising the likelihood of the
//! demonstrated actions under a Boltzmann policy over those Q-values.

use serde::{Deserialize, Serialize};

use crate::data::{DiscreteStep, StateIndex, N_ACTIONS, N_STATES};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demonstration {
    pub steps: Vec<DiscreteStep>,
}

impl Demonstration {
    pub fn new(steps: Vec<DiscreteStep>) -> Self {
        Self { steps }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RewardWeights(pub [f64; N_STATES]);

impl RewardWeights {
    pub fn zeros() -> Self {
        Self([0.0; N_STATES])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// 0-based index of the largest weight (first one on ties).
    pub fn argmax(&self) -> StateIndex {
        let mut best = 0;
        for (i, &w) in self.0.iter().enumerate() {
            if w > self.0[best] {
                best = i;
            }
        }
        StateIndex::new(best).unwrap()
    }
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self::zeros()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IrlConfig {
    pub discount: f64,
    pub temperature: f64,
    pub learning_rate: f64,
    pub max_iterations: usize,
    pub convergence_tol: f64,
    /// Step-size factor after an accepted step. Values above 1 run much
    /// closer to the maximum-likelihood weights, which overfits rarely
    /// visited cells when a driver has few events.
    pub step_growth: f64,
    pub seed: u64,
}

impl Default for IrlConfig {
    fn default() -> Self {
        Self {
            discount: 0.9,
            temperature: 1.0,
            learning_rate: 0.05,
            max_iterations: 500,
            convergence_tol: 1e-6,
            step_growth: 1.0,
            seed: 0,
        }
    }
}

impl IrlConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.discount) {
            return Err(Error::invalid("IRL discount must lie in [0, 1)"));
        }
        if !(self.temperature > 0.0 && self.learning_rate > 0.0 && self.convergence_tol > 0.0) {
            return Err(Error::invalid("IRL temperature, learning rate and tolerance must be positive"));
        }
        if !(self.step_growth >= 1.0 && self.step_growth.is_finite()) {
            return Err(Error::invalid("IRL step growth must be at least 1"));
        }
        Ok(())
    }
}

/// Reward of a state: the weight of its indicator feature.
pub fn reward_of(state: StateIndex, weights: &RewardWeights) -> f64 {
    weights.0[state.index()]
}

/// Average discounted feature counts per visited (state, action).
#[derive(Debug, Clone)]
pub struct QFeatures {
    features: Vec<[f64; N_STATES]>,
    counts: [[usize; N_ACTIONS]; N_STATES],
    total_steps: usize,
}

impl QFeatures {
    pub fn from_demos(demos: &[Demonstration], discount: f64) -> Result<Self> {
        let total_steps: usize = demos.iter().map(|d| d.steps.len()).sum();
        if total_steps == 0 {
            return Err(Error::invalid("demonstrations contain no steps"));
        }
        let mut features = vec![[0.0; N_STATES]; N_STATES * N_ACTIONS];
        let mut counts = [[0usize; N_ACTIONS]; N_STATES];
        for demo in demos {
            // Reward-to-go features, accumulated backwards; each episode ends
            // at the end of its demonstration.
            let mut tail = [0.0; N_STATES];
            for step in demo.steps.iter().rev() {
                for x in tail.iter_mut() {
                    *x *= discount;
                }
                tail[step.state.index()] += 1.0;
                let (s, a) = (step.state.index(), step.action.index());
                counts[s][a] += 1;
                let acc = &mut features[s * N_ACTIONS + a];
                for (f, t) in acc.iter_mut().zip(&tail) {
                    *f += t;
                }
            }
        }
        for s in 0..N_STATES {
            for a in 0..N_ACTIONS {
                let n = counts[s][a];
                if n > 0 {
                    for f in features[s * N_ACTIONS + a].iter_mut() {
                        *f /= n as f64;
                    }
                }
            }
        }
        Ok(Self { features, counts, total_steps })
    }

    pub fn counts(&self) -> &[[usize; N_ACTIONS]; N_STATES] {
        &self.counts
    }

    fn feature(&self, s: usize, a: usize) -> &[f64; N_STATES] {
        &self.features[s * N_ACTIONS + a]
    }

    fn visited_q(&self, s: usize, a: usize, w: &RewardWeights) -> f64 {
        self.feature(s, a).iter().zip(&w.0).map(|(f, w)| f * w).sum()
    }

    /// Q-table plus, for every entry, the (state, action) whose feature
    /// vector it is built from (itself when visited, otherwise the minimum
    /// visited entry it is pinned below).
    fn table(&self, w: &RewardWeights) -> ([[f64; N_ACTIONS]; N_STATES], [[Option<(usize, usize)>; N_ACTIONS]; N_STATES]) {
        let mut q = [[0.0; N_ACTIONS]; N_STATES];
        let mut source = [[None; N_ACTIONS]; N_STATES];
        let mut global_min: Option<(f64, (usize, usize))> = None;
        for s in 0..N_STATES {
            for a in 0..N_ACTIONS {
                if self.counts[s][a] > 0 {
                    let v = self.visited_q(s, a, w);
                    q[s][a] = v;
                    source[s][a] = Some((s, a));
                    if global_min.is_none_or(|(m, _)| v < m) {
                        global_min = Some((v, (s, a)));
                    }
                }
            }
        }
        let (gmin, gsrc) = global_min.expect("at least one visited pair");
        for s in 0..N_STATES {
            let local = (0..N_ACTIONS)
                .filter(|&a| self.counts[s][a] > 0)
                .map(|a| (q[s][a], (s, a)))
                .min_by(|x, y| x.0.total_cmp(&y.0));
            let (min, src) = local.unwrap_or((gmin, gsrc));
            for a in 0..N_ACTIONS {
                if self.counts[s][a] == 0 {
                    q[s][a] = min - 1.0;
                    source[s][a] = Some(src);
                }
            }
        }
        (q, source)
    }

    pub fn q_table(&self, w: &RewardWeights) -> QTable {
        QTable { values: self.table(w).0, counts: self.counts }
    }

    /// Log-likelihood of the demonstrated actions and its gradient.
    fn likelihood_and_gradient(
        &self,
        w: &RewardWeights,
        temperature: f64,
    ) -> (f64, [f64; N_STATES]) {
        let (q, source) = self.table(w);
        // Every occurrence of (s, a) contributes identically, so sum by counts.
        let mut ll = 0.0;
        let mut grad = [0.0; N_STATES];
        for s in 0..N_STATES {
            let visits: usize = self.counts[s].iter().sum();
            if visits == 0 {
                continue;
            }
            let max = q[s].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = q[s].iter().map(|v| (temperature * (v - max)).exp()).collect();
            let z: f64 = exps.iter().sum();
            let log_z = temperature * max + z.ln();
            let probs: Vec<f64> = exps.iter().map(|e| e / z).collect();

            let mut expected = [0.0; N_STATES];
            for a in 0..N_ACTIONS {
                let (ss, aa) = source[s][a].unwrap();
                for (e, f) in expected.iter_mut().zip(self.feature(ss, aa)) {
                    *e += probs[a] * f;
                }
            }
            for a in 0..N_ACTIONS {
                let n = self.counts[s][a];
                if n == 0 {
                    continue;
                }
                let n = n as f64;
                ll += n * (temperature * q[s][a] - log_z);
                for ((g, f), e) in grad.iter_mut().zip(self.feature(s, a)).zip(&expected) {
                    *g += n * temperature * (f - e);
                }
            }
        }
        (ll, grad)
    }

    pub fn total_steps(&self) -> usize {
        self.total_steps
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    pub values: [[f64; N_ACTIONS]; N_STATES],
    pub counts: [[usize; N_ACTIONS]; N_STATES],
}

impl QTable {
    pub fn q(&self, state: StateIndex, action: usize) -> f64 {
        self.values[state.index()][action]
    }

    pub fn visits(&self, state: StateIndex, action: usize) -> usize {
        self.counts[state.index()][action]
    }
}

/// Empirical Q-values: for each visited (s, a), the mean over its
/// occurrences of the discounted reward-to-go to the end of the episode.
/// Unvisited actions sit one unit below the worst visited action of the
/// same state (or of the whole table if the state was never visited).
pub fn estimate_q(demos: &[Demonstration], weights: &RewardWeights, discount: f64) -> Result<QTable> {
    Ok(QFeatures::from_demos(demos, discount)?.q_table(weights))
}

pub fn log_likelihood(demos: &[Demonstration], weights: &RewardWeights, config: &IrlConfig) -> Result<f64> {
    let features = QFeatures::from_demos(demos, config.discount)?;
    Ok(features.likelihood_and_gradient(weights, config.temperature).0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrlFit {
    pub weights: RewardWeights,
    pub log_likelihood: f64,
    pub iterations: usize,
    /// Log-likelihood after every accepted step, starting with the zero weights.
    #[serde(skip)]
    pub history: Vec<f64>,
}

/// Gradient ascent on the demonstration log-likelihood from zero weights.
///
/// Steps follow the per-step mean gradient. An accepted step multiplies the
/// step size by `step_growth` (1 keeps it fixed); a step that lowers the
/// likelihood is rejected and halves it. The run stops when an accepted
/// step gains less than `convergence_tol` in mean log-likelihood or after
/// `max_iterations` iterations.
pub fn learn_reward(demos: &[Demonstration], config: &IrlConfig) -> Result<IrlFit> {
    config.validate()?;
    let features = QFeatures::from_demos(demos, config.discount)?;
    let t = features.total_steps() as f64;

    let mut weights = RewardWeights::zeros();
    let (mut ll, mut grad) = features.likelihood_and_gradient(&weights, config.temperature);
    if !ll.is_finite() {
        return Err(Error::NonFiniteLikelihood { iteration: 0 });
    }
    let mut history = vec![ll];
    let mut lr = config.learning_rate;
    let mut iterations = 0;
    while iterations < config.max_iterations {
        iterations += 1;
        if grad.iter().all(|g| *g == 0.0) {
            break;
        }
        let mut candidate = weights;
        for (w, g) in candidate.0.iter_mut().zip(&grad) {
            *w += lr * g / t;
        }
        let (new_ll, new_grad) = features.likelihood_and_gradient(&candidate, config.temperature);
        if !new_ll.is_finite() || candidate.0.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFiniteLikelihood { iteration: iterations });
        }
        if new_ll < ll {
            lr *= 0.5;
            if lr < 1e-12 {
                break;
            }
            continue;
        }
        let gain = (new_ll - ll) / t;
        lr *= config.step_growth;
        weights = candidate;
        ll = new_ll;
        grad = new_grad;
        history.push(ll);
        if gain < config.convergence_tol {
            break;
        }
    }
    Ok(IrlFit { weights, log_likelihood: ll, iterations, history })
}

/// Affine min-max map onto [-1, 1].
pub fn normalize_weights(weights: &RewardWeights) -> Result<RewardWeights> {
    let min = weights.0.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = weights.0.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(max > min) || !min.is_finite() || !max.is_finite() {
        return Err(Error::invalid("cannot normalize a constant weight vector"));
    }
    let mut out = [0.0; N_STATES];
    for (o, w) in out.iter_mut().zip(&weights.0) {
        *o = if *w == min {
            -1.0
        } else if *w == max {
            1.0
        } else {
            2.0 * (w - min) / (max - min) - 1.0
        };
    }
    Ok(RewardWeights(out))
}
