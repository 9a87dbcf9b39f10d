//! Oracles and toy problems shared by the test suites.
#![allow(dead_code)]

use std::collections::HashMap;

use pacc::planner::{ActionStats, PlannerConfig, Simulator, Transition};
use pacc::prediction::{Gmm, GmmComponent, Point};
use pacc::rng::{seeded, TaskRng};
use rand::Rng;
use rand_distr::{Distribution, Normal};

pub fn config(n: usize, cost_limit: f64) -> PlannerConfig {
    PlannerConfig { n_simulations: n, cost_limit, time_budget: f64::INFINITY, ..PlannerConfig::default() }
}

/// A single decision with fixed rewards and costs.
pub struct OneStep {
    pub rewards: Vec<f64>,
    pub costs: Vec<f64>,
}

impl Simulator for OneStep {
    type State = ();

    fn num_actions(&self) -> usize {
        self.rewards.len()
    }

    fn step(&self, _: &(), a: usize, _: &mut TaskRng) -> Transition<()> {
        Transition { next: (), observation: 0, reward: self.rewards[a], cost: self.costs[a], terminal: true }
    }
}

/// Two deterministic decisions; the state is (depth, first action).
pub struct TwoStep {
    pub r1: [f64; 2],
    pub c1: [f64; 2],
    pub r2: [[f64; 2]; 2],
    pub c2: [[f64; 2]; 2],
}

impl Simulator for TwoStep {
    type State = (u8, usize);

    fn num_actions(&self) -> usize {
        2
    }

    fn step(&self, s: &(u8, usize), a: usize, _: &mut TaskRng) -> Transition<(u8, usize)> {
        match s.0 {
            0 => Transition { next: (1, a), observation: 0, reward: self.r1[a], cost: self.c1[a], terminal: false },
            _ => Transition { next: (2, s.1), observation: 0, reward: self.r2[s.1][a], cost: self.c2[s.1][a], terminal: true },
        }
    }
}

/// Noisy walk on the integers with observations equal to the position.
pub struct Walk;

impl Simulator for Walk {
    type State = i64;

    fn num_actions(&self) -> usize {
        3
    }

    fn step(&self, s: &i64, a: usize, rng: &mut TaskRng) -> Transition<i64> {
        let mut next = s + a as i64 - 1;
        if rng.random::<f64>() < 0.3 {
            next += if rng.random::<bool>() { 1 } else { -1 };
        }
        Transition {
            next,
            observation: next as u64,
            reward: -((next - 3).abs() as f64),
            cost: if next < 0 { 1.0 } else { 0.0 },
            terminal: next.abs() > 6,
        }
    }
}

/// Best deterministic action of max r(a) subject to c(a) <= limit.
pub fn constrained_oracle(rewards: &[f64], costs: &[f64], limit: f64) -> Option<usize> {
    (0..rewards.len())
        .filter(|&a| costs[a] <= limit)
        .max_by(|&a, &b| rewards[a].total_cmp(&rewards[b]).then(b.cmp(&a)))
}

/// Plain POMCP over `Walk`, keyed by action-observation history.
pub struct Reference {
    pub c: f64,
    pub discount: f64,
    pub max_depth: usize,
    pub nodes: HashMap<Vec<(usize, u64)>, (u64, Vec<ActionStats>)>,
}

impl Reference {
    pub fn new(config: &PlannerConfig) -> Self {
        Self { c: config.uct_c, discount: config.discount, max_depth: config.max_depth, nodes: HashMap::new() }
    }

    fn rollout(&self, mut s: i64, depth: usize, rng: &mut TaskRng) -> f64 {
        let (mut total, mut disc) = (0.0, 1.0);
        for _ in depth..self.max_depth {
            let a = rng.random_range(0..3);
            let t = Walk.step(&s, a, rng);
            total += disc * t.reward;
            if t.terminal {
                break;
            }
            disc *= self.discount;
            s = t.next;
        }
        total
    }

    fn simulate(&mut self, s: i64, history: Vec<(usize, u64)>, rng: &mut TaskRng) -> f64 {
        let depth = history.len();
        if depth >= self.max_depth {
            return 0.0;
        }
        let (n, stats) = self.nodes[&history].clone();
        let a = match stats.iter().position(|s| s.visits == 0) {
            Some(a) => a,
            None => {
                let score = |x: &ActionStats| x.q_reward + self.c * ((n as f64).ln() / x.visits as f64).sqrt();
                let mut best = 0;
                for i in 1..stats.len() {
                    if score(&stats[i]) > score(&stats[best]) {
                        best = i;
                    }
                }
                best
            }
        };
        let t = Walk.step(&s, a, rng);
        let future = if t.terminal {
            0.0
        } else {
            let mut child = history.clone();
            child.push((a, t.observation));
            if self.nodes.contains_key(&child) {
                self.simulate(t.next, child, rng)
            } else {
                self.nodes.insert(child, (0, vec![ActionStats::default(); 3]));
                self.rollout(t.next, depth + 1, rng)
            }
        };
        let r = t.reward + self.discount * future;
        let node = self.nodes.get_mut(&history).unwrap();
        node.0 += 1;
        let st = &mut node.1[a];
        st.visits += 1;
        st.q_reward += (r - st.q_reward) / st.visits as f64;
        r
    }

    pub fn plan(&mut self, belief: &[i64], n: usize, rng: &mut TaskRng) -> (usize, Vec<ActionStats>) {
        self.nodes.insert(Vec::new(), (0, vec![ActionStats::default(); 3]));
        for _ in 0..n {
            let s = belief[rng.random_range(0..belief.len())];
            self.simulate(s, Vec::new(), rng);
        }
        let root = self.nodes[&Vec::new()].1.clone();
        let mut best = 0;
        for i in 1..3 {
            if root[i].visits > 0 && (root[best].visits == 0 || root[i].q_reward > root[best].q_reward) {
                best = i;
            }
        }
        (best, root)
    }
}

pub fn gaussian(mean: [f64; 2], cov: [[f64; 2]; 2]) -> Gmm {
    Gmm { components: vec![GmmComponent { weight: 1.0, mean, cov }] }
}

/// Closed-form KL between two bivariate normals.
pub fn gaussian_kl(f: &GmmComponent, g: &GmmComponent) -> f64 {
    let det = |c: &[[f64; 2]; 2]| c[0][0] * c[1][1] - c[0][1] * c[1][0];
    let dg = det(&g.cov);
    let inv = [[g.cov[1][1] / dg, -g.cov[0][1] / dg], [-g.cov[1][0] / dg, g.cov[0][0] / dg]];
    let mut trace = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            trace += inv[i][j] * f.cov[j][i];
        }
    }
    let d = [g.mean[0] - f.mean[0], g.mean[1] - f.mean[1]];
    let mut quad = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            quad += d[i] * inv[i][j] * d[j];
        }
    }
    0.5 * (trace + quad - 2.0 + (dg / det(&f.cov)).ln())
}

pub fn two_blobs(n: usize, seed: u64) -> Vec<Point> {
    let mut rng = seeded(seed);
    let noise = Normal::new(0.0, 1.0).unwrap();
    (0..n)
        .map(|i| {
            let c = if i % 2 == 0 { [20.0, 30.0] } else { [35.0, 90.0] };
            [c[0] + noise.sample(&mut rng), c[1] + 2.0 * noise.sample(&mut rng)]
        })
        .collect()
}

pub fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Smallest within-cluster sum of squares over every labelling that uses
/// all k clusters.
pub fn brute_force_inertia(points: &[Vec<f64>], k: usize) -> f64 {
    let n = points.len();
    let dim = points[0].len();
    let mut labels = vec![0usize; n];
    let mut best = f64::INFINITY;
    loop {
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, x) in sums[l].iter_mut().zip(p) {
                *s += x;
            }
        }
        if counts.iter().all(|&c| c > 0) {
            let inertia: f64 = points
                .iter()
                .zip(&labels)
                .map(|(p, &l)| {
                    let mean: Vec<f64> = sums[l].iter().map(|s| s / counts[l] as f64).collect();
                    sq(p, &mean)
                })
                .sum();
            best = best.min(inertia);
        }
        let mut i = 0;
        while i < n {
            labels[i] += 1;
            if labels[i] < k {
                break;
            }
            labels[i] = 0;
            i += 1;
        }
        if i == n {
            return best;
        }
    }
}

pub fn random_points(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = seeded(seed);
    (0..n).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
}

/// x' = A x + B u for one vehicle, x = (position, speed).
pub fn matrix_step(y: f64, v: f64, a: f64, dt: f64) -> (f64, f64) {
    let am = [[1.0, dt], [0.0, 1.0]];
    let bm = [0.5 * dt * dt, dt];
    (am[0][0] * y + am[0][1] * v + bm[0] * a, am[1][0] * y + am[1][1] * v + bm[1] * a)
}

