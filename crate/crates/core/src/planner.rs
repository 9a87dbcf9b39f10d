//! Cost-constrained POMCP: Monte-Carlo tree search over a particle belief
//! that maximizes discounted reward while a dual variable prices the
//! discounted cost against a limit.

use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pomdp::{observe, random_intention, Intention, KinObservation, PaccModel, PaccState};
use crate::rng::{task_rng, TaskRng};

/// Outcome of one simulated step.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition<S> {
    pub next: S,
    /// Key of the child node the step leads to.
    pub observation: u64,
    pub reward: f64,
    pub cost: f64,
    pub terminal: bool,
}

/// Generative model the search samples from.
pub trait Simulator {
    type State: Clone;

    fn num_actions(&self) -> usize;
    fn step(&self, state: &Self::State, action: usize, rng: &mut TaskRng) -> Transition<Self::State>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    pub n_simulations: usize,
    pub uct_c: f64,
    /// Expected discounted cost limit; `inf` turns the constraint off.
    pub cost_limit: f64,
    pub discount: f64,
    pub max_depth: usize,
    pub lambda_init: f64,
    pub lambda_step: f64,
    pub lambda_max: f64,
    /// Wall-clock limit per decision, seconds; `inf` removes it.
    pub time_budget: f64,
    pub particles: usize,
    /// Start each decision from the subtree reached by the last action and
    /// observation instead of a fresh tree.
    pub reuse_tree: bool,
    pub seed: u64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            n_simulations: 50_000,
            uct_c: 2.0,
            cost_limit: 0.5,
            discount: 0.95,
            max_depth: 30,
            lambda_init: 1.0,
            lambda_step: 0.1,
            lambda_max: 100.0,
            time_budget: 1.0,
            particles: 500,
            reuse_tree: false,
            seed: 0,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.n_simulations >= 1
            && self.uct_c > 0.0
            && self.cost_limit >= 0.0
            && (0.0..1.0).contains(&self.discount)
            && self.max_depth >= 1
            && self.lambda_init >= 0.0
            && self.lambda_step > 0.0
            && self.lambda_max > 0.0
            && self.time_budget > 0.0
            && self.particles >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid planner config {self:?}")))
        }
    }

    fn constrained(&self) -> bool {
        self.cost_limit.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ActionStats {
    pub visits: u64,
    pub q_reward: f64,
    pub q_cost: f64,
}

#[derive(Debug, Clone, Default)]
struct Node {
    visits: u64,
    actions: Vec<ActionStats>,
    children: Vec<Vec<(u64, usize)>>,
}

impl Node {
    fn new(n_actions: usize) -> Self {
        Self { visits: 0, actions: vec![ActionStats::default(); n_actions], children: vec![Vec::new(); n_actions] }
    }
}

/// Search tree carried from one decision to the next.
#[derive(Debug, Clone, Default)]
pub struct SearchTree {
    nodes: Vec<Node>,
}

impl SearchTree {
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    /// Visit count and per-action statistics at the root.
    pub fn root(&self) -> Option<(u64, &[ActionStats])> {
        self.nodes.first().map(|n| (n.visits, n.actions.as_slice()))
    }

    /// The part of the tree below `action` and `observation`, re-rooted.
    /// Empty when that branch was never expanded.
    pub fn subtree(&self, action: usize, observation: u64) -> SearchTree {
        let Some(start) = self
            .nodes
            .first()
            .and_then(|n| n.children.get(action))
            .and_then(|c| c.iter().find(|(k, _)| *k == observation))
            .map(|(_, id)| *id)
        else {
            return SearchTree::default();
        };
        let mut remap = std::collections::HashMap::from([(start, 0)]);
        let mut order = vec![start];
        let mut i = 0;
        while i < order.len() {
            for children in &self.nodes[order[i]].children {
                for &(_, id) in children {
                    remap.insert(id, order.len());
                    order.push(id);
                }
            }
            i += 1;
        }
        let nodes = order
            .iter()
            .map(|&old| {
                let mut node = self.nodes[old].clone();
                for children in &mut node.children {
                    for (_, id) in children.iter_mut() {
                        *id = remap[id];
                    }
                }
                node
            })
            .collect();
        SearchTree { nodes }
    }
}

/// Root statistics of one decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanDiagnostics {
    pub root: Vec<ActionStats>,
    pub lambda: f64,
    pub simulations: usize,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    pub action: usize,
    pub diagnostics: PlanDiagnostics,
}

struct Search<'a, S: Simulator> {
    sim: &'a S,
    config: &'a PlannerConfig,
    nodes: Vec<Node>,
    lambda: f64,
}

/// Index of the largest value; ties go to the lowest index.
fn argmax(values: impl IntoIterator<Item = f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.into_iter().enumerate() {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

impl<S: Simulator> Search<'_, S> {
    fn scalarized(&self, a: &ActionStats) -> f64 {
        a.q_reward - self.lambda * a.q_cost
    }

    fn select(&self, node: usize) -> usize {
        let n = &self.nodes[node];
        // Untried actions first, lowest index first.
        if let Some(a) = n.actions.iter().position(|s| s.visits == 0) {
            return a;
        }
        let ln_n = (n.visits as f64).ln();
        let c = self.config.uct_c;
        argmax(n.actions.iter().map(|s| self.scalarized(s) + c * (ln_n / s.visits as f64).sqrt())).unwrap()
    }

    /// Greedy root action among tried ones.
    fn greedy(&self) -> Option<usize> {
        let root = &self.nodes[0];
        argmax(root.actions.iter().map(|s| if s.visits == 0 { f64::NEG_INFINITY } else { self.scalarized(s) }))
            .filter(|&a| root.actions[a].visits > 0)
    }

    fn rollout(&self, state: &S::State, depth: usize, rng: &mut TaskRng) -> (f64, f64) {
        let (mut r, mut c, mut discount) = (0.0, 0.0, 1.0);
        let mut state = state.clone();
        for _ in depth..self.config.max_depth {
            let a = rng.random_range(0..self.sim.num_actions());
            let t = self.sim.step(&state, a, rng);
            r += discount * t.reward;
            c += discount * t.cost;
            if t.terminal {
                break;
            }
            discount *= self.config.discount;
            state = t.next;
        }
        (r, c)
    }

    fn simulate(&mut self, state: &S::State, node: usize, depth: usize, rng: &mut TaskRng) -> (f64, f64) {
        if depth >= self.config.max_depth {
            return (0.0, 0.0);
        }
        let a = self.select(node);
        let t = self.sim.step(state, a, rng);
        let (future_r, future_c) = if t.terminal {
            (0.0, 0.0)
        } else {
            let existing = self.nodes[node].children[a].iter().find(|(k, _)| *k == t.observation).map(|(_, id)| *id);
            match existing {
                Some(child) => self.simulate(&t.next, child, depth + 1, rng),
                None => {
                    let id = self.nodes.len();
                    self.nodes.push(Node::new(self.sim.num_actions()));
                    self.nodes[node].children[a].push((t.observation, id));
                    self.rollout(&t.next, depth + 1, rng)
                }
            }
        };
        let r = t.reward + self.config.discount * future_r;
        let c = t.cost + self.config.discount * future_c;
        let n = &mut self.nodes[node];
        n.visits += 1;
        let s = &mut n.actions[a];
        s.visits += 1;
        s.q_reward += (r - s.q_reward) / s.visits as f64;
        s.q_cost += (c - s.q_cost) / s.visits as f64;
        (r, c)
    }
}

/// Run the search from `belief` and return the greedy root action under
/// the final dual price. Stops after `n_simulations` or the time budget.
pub fn plan<S: Simulator>(belief: &[S::State], sim: &S, config: &PlannerConfig, rng: &mut TaskRng) -> Result<PlanResult> {
    plan_from(belief, sim, config, rng, SearchTree::default()).map(|(result, _)| result)
}

/// `plan` continuing from an existing tree; also returns the grown tree.
/// The dual price restarts at its initial value.
pub fn plan_from<S: Simulator>(
    belief: &[S::State],
    sim: &S,
    config: &PlannerConfig,
    rng: &mut TaskRng,
    tree: SearchTree,
) -> Result<(PlanResult, SearchTree)> {
    config.validate()?;
    if belief.is_empty() {
        return Err(Error::invalid("belief has no particles"));
    }
    if sim.num_actions() == 0 {
        return Err(Error::invalid("simulator has no actions"));
    }
    let start = Instant::now();
    let budget = Duration::try_from_secs_f64(config.time_budget).ok();
    let mut search = Search {
        sim,
        config,
        nodes: match tree.nodes.first() {
            Some(root) if root.actions.len() == sim.num_actions() => tree.nodes,
            _ => vec![Node::new(sim.num_actions())],
        },
        lambda: if config.constrained() { config.lambda_init.min(config.lambda_max) } else { 0.0 },
    };
    let mut simulations = 0;
    while simulations < config.n_simulations {
        if budget.is_some_and(|b| start.elapsed() >= b) {
            break;
        }
        let particle = &belief[rng.random_range(0..belief.len())];
        search.simulate(particle, 0, 0, rng);
        simulations += 1;
        if config.constrained() {
            if let Some(a) = search.greedy() {
                let q_c = search.nodes[0].actions[a].q_cost;
                search.lambda = (search.lambda + config.lambda_step * (q_c - config.cost_limit)).clamp(0.0, config.lambda_max);
            }
        }
    }
    if simulations == 0 {
        return Err(Error::BudgetExhausted);
    }
    let action = search.greedy().expect("at least one simulation ran");
    let result = PlanResult {
        action,
        diagnostics: PlanDiagnostics {
            root: search.nodes[0].actions.clone(),
            lambda: search.lambda,
            simulations,
            elapsed_s: start.elapsed().as_secs_f64(),
        },
    };
    Ok((result, SearchTree { nodes: search.nodes }))
}

impl Simulator for PaccModel {
    type State = PaccState;

    fn num_actions(&self) -> usize {
        PaccModel::num_actions(self)
    }

    /// Reward and cost are those of the state reached; a collision ends the
    /// simulation. The observation key is the index of the lead
    /// acceleration drawn, which together with the action determines the
    /// next kinematics exactly.
    fn step(&self, state: &PaccState, action: usize, rng: &mut TaskRng) -> Transition<PaccState> {
        let (next, lead) = self.transition(state, action, rng);
        Transition {
            reward: self.reward_of_state(&next),
            cost: self.cost_of_state(&next),
            terminal: self.is_collision(&next),
            observation: lead as u64,
            next,
        }
    }
}

/// Unweighted particles sharing the observed kinematics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Belief {
    pub particles: Vec<PaccState>,
}

/// Tolerance on the inferred lead acceleration before snapping with a warning.
const LEAD_ACCEL_TOL: f64 = 1e-6;

impl Belief {
    /// `n` particles at `obs` with intentions drawn uniformly.
    pub fn uniform(obs: &KinObservation, n: usize, rng: &mut TaskRng) -> Self {
        let particles = (0..n)
            .map(|_| with_kinematics(obs, random_intention(rng)))
            .collect();
        Self { particles }
    }

    /// Share of particles with each intention.
    pub fn intention_frequencies(&self) -> [f64; 3] {
        let mut f = [0.0; 3];
        for p in &self.particles {
            f[p.intention.index()] += 1.0;
        }
        let n = self.particles.len().max(1) as f64;
        f.map(|x| x / n)
    }
}

fn with_kinematics(obs: &KinObservation, intention: Intention) -> PaccState {
    PaccState { v_ego: obs.v_ego, y_ego: obs.y_ego, v_lead: obs.v_lead, y_lead: obs.y_lead, intention }
}

/// Posterior over intentions after seeing the lead acceleration implied by
/// `obs`. Particles are reweighted by the intention table, resampled to the
/// same count and moved onto the observed kinematics.
pub fn belief_update(belief: &Belief, obs: &KinObservation, model: &PaccModel, rng: &mut TaskRng) -> Result<Belief> {
    let Some(prior) = belief.particles.first() else {
        return Err(Error::invalid("belief has no particles"));
    };
    let inferred = (obs.v_lead - prior.v_lead) / model.config.dt;
    let lead = model.nearest_lead_accel(inferred);
    let snapped = model.config.lead_accels[lead];
    // A lead that stopped during the step shows a smaller speed change.
    let stopped = obs.v_lead == 0.0 && inferred > snapped - LEAD_ACCEL_TOL;
    if (inferred - snapped).abs() > LEAD_ACCEL_TOL && !stopped {
        log::warn!("inferred lead acceleration {inferred:.4} is not in the model; using {snapped}");
    }
    let weights: Vec<f64> = belief
        .particles
        .iter()
        .map(|p| model.config.intention_table[p.intention.index()][lead])
        .collect();
    let total: f64 = weights.iter().sum();
    let n = belief.particles.len();
    if !(total > 0.0) {
        return Ok(Belief::uniform(obs, n, rng));
    }
    let mut cumulative = Vec::with_capacity(n);
    let mut acc = 0.0;
    for w in &weights {
        acc += w / total;
        cumulative.push(acc);
    }
    let particles = (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            let i = cumulative.partition_point(|&c| c <= u).min(n - 1);
            with_kinematics(obs, belief.particles[i].intention)
        })
        .collect();
    Ok(Belief { particles })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStep {
    pub t: usize,
    pub state: PaccState,
    pub action: usize,
    pub accel: f64,
    pub observation: KinObservation,
    pub reward: f64,
    pub cost: f64,
    pub planning_time_s: f64,
    pub diagnostics: PlanDiagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub intention: Intention,
    pub steps: Vec<EpisodeStep>,
    pub collision: bool,
}

impl Episode {
    /// Undiscounted totals over the episode.
    pub fn cumulative_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    pub fn cumulative_cost(&self) -> f64 {
        self.steps.iter().map(|s| s.cost).sum()
    }
}

/// Closed-loop episode: plan, act on the true state, observe, update the
/// belief. `state` in each step is the state the action was chosen in;
/// reward and cost are those of the state reached.
pub fn run_episode(model: &PaccModel, config: &PlannerConfig, seed: u64) -> Result<Episode> {
    config.validate()?;
    let mut env_rng = task_rng(seed, 0);
    let mut plan_rng = task_rng(seed, 1);
    let mut belief_rng = task_rng(seed, 2);
    let intention = random_intention(&mut env_rng);
    let mut state = model.initial_state(intention);
    let mut belief = Belief::uniform(&observe(&state), config.particles, &mut belief_rng);
    let mut steps = Vec::with_capacity(model.config.horizon);
    let mut collision = false;
    let mut tree = SearchTree::default();
    for t in 0..model.config.horizon {
        let started = Instant::now();
        let (plan, grown) = plan_from(&belief.particles, model, config, &mut plan_rng, tree)?;
        let planning_time_s = started.elapsed().as_secs_f64();
        let (next, lead) = model.transition(&state, plan.action, &mut env_rng);
        tree = if config.reuse_tree { grown.subtree(plan.action, lead as u64) } else { SearchTree::default() };
        let observation = observe(&next);
        steps.push(EpisodeStep {
            t,
            state,
            action: plan.action,
            accel: model.config.ego_accels[plan.action],
            observation,
            reward: model.reward_of_state(&next),
            cost: model.cost_of_state(&next),
            planning_time_s,
            diagnostics: plan.diagnostics,
        });
        belief = belief_update(&belief, &observation, model, &mut belief_rng)?;
        state = next;
        if model.is_collision(&state) {
            collision = true;
            break;
        }
    }
    Ok(Episode { intention, steps, collision })
}
