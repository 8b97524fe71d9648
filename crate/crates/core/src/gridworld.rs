//! Noisy-observation gridworld, offline state abstraction from a random
//! walk, and tabular Q-learning on abstract versus ground-truth states.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::abstraction::{AbstractionMap, AbstractionResult};
use crate::encoding_tree::EncodingTree;
use crate::error::{Error, Result};
use crate::filtration::EmbeddingMatrix;
use crate::optimizer::DEFAULT_MAX_HEIGHT;
use crate::pipeline::abstract_embeddings;
use crate::skills::{Step, TrajectoryLog};

/// Training episodes per reported epoch.
pub const EPISODES_PER_EPOCH: usize = 100;
/// Episodes in the greedy evaluation that yields the final mean reward.
pub const EVALUATION_EPISODES: usize = 1000;
/// Depth of the abstract states used by the harness.
pub const DEFAULT_ABSTRACTION_DEPTH: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::Up, Action::Down, Action::Left, Action::Right];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridworldConfig {
    pub width: usize,
    pub height: usize,
    pub goal: (usize, usize),
    pub noise_dim: usize,
    pub sigma: f64,
    pub episode_cap: usize,
}

impl Default for GridworldConfig {
    fn default() -> Self {
        Self {
            width: 6,
            height: 6,
            goal: (5, 5),
            noise_dim: 20,
            sigma: 0.1,
            episode_cap: 50,
        }
    }
}

impl GridworldConfig {
    pub fn cells(&self) -> usize {
        self.width * self.height
    }

    pub fn cell_id(&self, (x, y): (usize, usize)) -> usize {
        y * self.width + x
    }

    /// Length of an observation vector.
    pub fn observation_dim(&self) -> usize {
        self.width + self.height + self.noise_dim
    }

    fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 || self.width * self.height < 2 {
            return Err(Error::InvalidParameter("grid needs at least two cells".into()));
        }
        if self.goal.0 >= self.width || self.goal.1 >= self.height {
            return Err(Error::InvalidParameter("goal outside the grid".into()));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise scale {} must be finite and >= 0",
                self.sigma
            )));
        }
        if self.episode_cap == 0 {
            return Err(Error::InvalidParameter("episode cap must be positive".into()));
        }
        Ok(())
    }
}

/// Result of one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

/// Seeded gridworld emitting `one-hot(x) ⊕ one-hot(y) ⊕ N(0, σ²)^d_n`.
#[derive(Debug, Clone)]
pub struct GridworldEnv {
    config: GridworldConfig,
    rng: ChaCha8Rng,
    noise: Normal<f64>,
    position: (usize, usize),
    steps: usize,
}

impl GridworldEnv {
    pub fn new(config: GridworldConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let noise = Normal::new(0.0, config.sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        Ok(Self {
            position: (0, 0),
            config,
            rng: ChaCha8Rng::seed_from_u64(seed),
            noise,
            steps: 0,
        })
    }

    pub fn config(&self) -> &GridworldConfig {
        &self.config
    }

    pub fn position(&self) -> (usize, usize) {
        self.position
    }

    pub fn cell(&self) -> usize {
        self.config.cell_id(self.position)
    }

    /// Starts an episode in a uniformly random non-goal cell.
    pub fn reset(&mut self) -> Vec<f64> {
        loop {
            let p = (
                self.rng.random_range(0..self.config.width),
                self.rng.random_range(0..self.config.height),
            );
            if p != self.config.goal {
                self.position = p;
                break;
            }
        }
        self.steps = 0;
        self.observe()
    }

    /// Moves one cell (clipped at walls); −1 per step, 0 on entering the
    /// goal. The episode ends at the goal or at the step cap.
    pub fn step(&mut self, action: Action) -> Transition {
        let (x, y) = self.position;
        self.position = match action {
            Action::Up => (x, (y + 1).min(self.config.height - 1)),
            Action::Down => (x, y.saturating_sub(1)),
            Action::Left => (x.saturating_sub(1), y),
            Action::Right => ((x + 1).min(self.config.width - 1), y),
        };
        self.steps += 1;
        let at_goal = self.position == self.config.goal;
        Transition {
            observation: self.observe(),
            reward: if at_goal { 0.0 } else { -1.0 },
            done: at_goal || self.steps >= self.config.episode_cap,
        }
    }

    fn observe(&mut self) -> Vec<f64> {
        let (w, h) = (self.config.width, self.config.height);
        let mut obs = vec![0.0; self.config.observation_dim()];
        obs[self.position.0] = 1.0;
        obs[w + self.position.1] = 1.0;
        for x in &mut obs[w + h..] {
            *x = self.noise.sample(&mut self.rng);
        }
        obs
    }
}

/// Random-walk data: log rows index observation vertices.
#[derive(Debug, Clone)]
pub struct OfflineData {
    pub log: TrajectoryLog,
    pub embeddings: EmbeddingMatrix,
    /// Ground-truth cell of every observation row.
    pub cells: Vec<usize>,
}

impl OfflineData {
    pub fn distinct_cells(&self) -> usize {
        self.cells.iter().collect::<std::collections::BTreeSet<_>>().len()
    }
}

/// One uninterrupted uniform-random walk of `steps` moves (goal and cap do
/// not stop it): `steps + 1` observation rows, step `t` goes from row `t`
/// to row `t + 1`.
pub fn collect_offline(config: &GridworldConfig, steps: usize, seed: u64) -> Result<OfflineData> {
    if steps == 0 {
        return Err(Error::EmptyLog);
    }
    let mut env = GridworldEnv::new(config.clone(), seed)?;
    let mut walk_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut rows = vec![env.reset()];
    let mut cells = vec![env.cell()];
    let mut log = Vec::with_capacity(steps);
    for t in 0..steps {
        let action = Action::ALL[walk_rng.random_range(0..4)];
        env.steps = 0;
        let tr = env.step(action);
        rows.push(tr.observation);
        cells.push(env.cell());
        log.push(Step {
            state: t,
            action: action.index(),
            reward: tr.reward,
            next_state: t + 1,
        });
    }
    Ok(OfflineData {
        log: TrajectoryLog::new(vec![log])?,
        embeddings: EmbeddingMatrix::from_rows(&rows)?,
        cells,
    })
}

/// Abstraction learned from offline observations.
#[derive(Debug, Clone)]
pub struct OfflineAbstraction {
    pub result: AbstractionResult,
    pub map: AbstractionMap,
    pub k_star: usize,
    pub filtered_entropy: f64,
    /// Embedding of every abstract state, indexed like the map.
    pub centers: Vec<Vec<f64>>,
    /// Centered unit-norm centers (`None` for a constant center).
    standardized: Vec<Option<Vec<f64>>>,
}

impl OfflineAbstraction {
    pub fn n_states(&self) -> usize {
        self.map.len()
    }

    pub fn tree(&self) -> &EncodingTree {
        self.result.tree()
    }

    /// Abstract state of an unseen observation: the center with the highest
    /// Pearson correlation (lowest index on ties).
    pub fn classify(&self, observation: &[f64]) -> usize {
        let Some(z) = standardized(observation) else {
            return 0;
        };
        let mut best = (0, f64::NEG_INFINITY);
        for (j, c) in self.standardized.iter().enumerate() {
            if let Some(c) = c {
                let r: f64 = z.iter().zip(c).map(|(x, y)| x * y).sum();
                if r > best.1 {
                    best = (j, r);
                }
            }
        }
        best.0
    }
}

fn standardized(x: &[f64]) -> Option<Vec<f64>> {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let centered: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let norm = centered.iter().map(|v| v * v).sum::<f64>().sqrt();
    (norm > 0.0).then(|| centered.into_iter().map(|v| v / norm).collect())
}

/// Similarity graph, edge filtration, tree optimization up to height `k`,
/// aggregation and the abstraction map at `depth`.
pub fn run_offline_abstraction(
    log: &TrajectoryLog,
    embeddings: &EmbeddingMatrix,
    k: usize,
    depth: usize,
) -> Result<OfflineAbstraction> {
    if log.transitions() + 1 > embeddings.n() {
        return Err(Error::DimensionMismatch {
            expected: log.transitions() + 1,
            found: embeddings.n(),
        });
    }
    let out = abstract_embeddings(embeddings, k, depth)?;
    Ok(OfflineAbstraction {
        result: out.result,
        map: out.map,
        k_star: out.filter.k_star,
        filtered_entropy: out.filter.entropy,
        standardized: out.centers.iter().map(|c| standardized(c)).collect(),
        centers: out.centers,
    })
}

/// Fraction of vertices whose community's majority label is their own
/// label (lowest label wins a tied majority).
pub fn purity(assignment: &[usize], labels: &[usize]) -> Result<f64> {
    if assignment.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            found: assignment.len(),
        });
    }
    if labels.is_empty() {
        return Ok(1.0);
    }
    let mut counts: std::collections::BTreeMap<usize, std::collections::BTreeMap<usize, usize>> = Default::default();
    for (&a, &l) in assignment.iter().zip(labels) {
        *counts.entry(a).or_default().entry(l).or_insert(0) += 1;
    }
    let majority: std::collections::BTreeMap<usize, usize> = counts
        .iter()
        .map(|(&a, c)| {
            let (&label, _) = c
                .iter()
                .max_by(|x, y| x.1.cmp(y.1).then(y.0.cmp(x.0)))
                .expect("nonempty community");
            (a, label)
        })
        .collect();
    let hits = assignment
        .iter()
        .zip(labels)
        .filter(|(a, l)| majority[a] == **l)
        .count();
    Ok(hits as f64 / labels.len() as f64)
}

/// Q-learning hyperparameters; ε decays linearly over the training run.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            alpha: 0.2,
            gamma: 0.95,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
        }
    }
}

/// Q-table over `(state, action)` with ε-greedy exploration.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularAgent {
    q: Vec<[f64; 4]>,
    config: AgentConfig,
}

impl TabularAgent {
    pub fn new(n_states: usize, config: AgentConfig) -> Result<Self> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !(unit(config.alpha) && unit(config.gamma) && unit(config.epsilon_start) && unit(config.epsilon_end)) {
            return Err(Error::InvalidParameter(
                "alpha, gamma and epsilon must lie in [0, 1]".into(),
            ));
        }
        Ok(Self {
            q: vec![[0.0; 4]; n_states],
            config,
        })
    }

    pub fn q(&self, state: usize) -> &[f64; 4] {
        &self.q[state]
    }

    pub fn n_states(&self) -> usize {
        self.q.len()
    }

    /// Highest-valued action, lowest index on ties.
    pub fn greedy(&self, state: usize) -> Action {
        let row = &self.q[state];
        let mut best = 0;
        for a in 1..4 {
            if row[a] > row[best] {
                best = a;
            }
        }
        Action::ALL[best]
    }

    fn act(&self, state: usize, epsilon: f64, rng: &mut ChaCha8Rng) -> Action {
        if rng.random::<f64>() < epsilon {
            Action::ALL[rng.random_range(0..4)]
        } else {
            self.greedy(state)
        }
    }

    fn update(&mut self, s: usize, a: Action, r: f64, next: Option<usize>) {
        let target = r + next.map_or(0.0, |n| {
            self.config.gamma * self.q[n].iter().copied().fold(f64::NEG_INFINITY, f64::max)
        });
        let q = &mut self.q[s][a.index()];
        *q += self.config.alpha * (target - *q);
    }

    fn epsilon(&self, episode: usize, total: usize) -> f64 {
        let frac = if total > 1 {
            episode as f64 / (total - 1) as f64
        } else {
            1.0
        };
        self.config.epsilon_start + (self.config.epsilon_end - self.config.epsilon_start) * frac
    }
}

/// Mean and population standard deviation of episode rewards per epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_reward: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingRun {
    pub curve: Vec<EpochStats>,
    pub final_mean_reward: f64,
    pub agent: TabularAgent,
}

/// Trains on `episodes` episodes in an env seeded with `seed`, mapping each
/// observation (and its true cell) to a state with `encode`, then runs a
/// greedy evaluation on a separately seeded env.
pub fn train_agent(
    config: &GridworldConfig,
    n_states: usize,
    encode: &dyn Fn(&[f64], usize) -> usize,
    agent_config: &AgentConfig,
    episodes: usize,
    seed: u64,
) -> Result<TrainingRun> {
    let mut agent = TabularAgent::new(n_states, agent_config.clone())?;
    let mut env = GridworldEnv::new(config.clone(), seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let mut rewards = Vec::with_capacity(episodes);
    for episode in 0..episodes {
        let epsilon = agent.epsilon(episode, episodes);
        let obs = env.reset();
        let mut s = encode(&obs, env.cell());
        let mut total = 0.0;
        loop {
            let a = agent.act(s, epsilon, &mut rng);
            let tr = env.step(a);
            let next = encode(&tr.observation, env.cell());
            let at_goal = env.position() == config.goal;
            agent.update(s, a, tr.reward, (!at_goal).then_some(next));
            total += tr.reward;
            s = next;
            if tr.done {
                break;
            }
        }
        rewards.push(total);
    }
    let curve = rewards
        .chunks(EPISODES_PER_EPOCH)
        .enumerate()
        .map(|(epoch, chunk)| {
            let mean = chunk.iter().sum::<f64>() / chunk.len() as f64;
            let var = chunk.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / chunk.len() as f64;
            EpochStats {
                epoch: epoch + 1,
                mean_reward: mean,
                std: var.sqrt(),
            }
        })
        .collect();
    let final_mean_reward = greedy_evaluation(config, &agent, encode, seed.wrapping_add(2))?;
    Ok(TrainingRun {
        curve,
        final_mean_reward,
        agent,
    })
}

fn greedy_evaluation(
    config: &GridworldConfig,
    agent: &TabularAgent,
    encode: &dyn Fn(&[f64], usize) -> usize,
    seed: u64,
) -> Result<f64> {
    let mut env = GridworldEnv::new(config.clone(), seed)?;
    let mut sum = 0.0;
    for _ in 0..EVALUATION_EPISODES {
        let mut obs = env.reset();
        loop {
            let tr = env.step(agent.greedy(encode(&obs, env.cell())));
            sum += tr.reward;
            obs = tr.observation;
            if tr.done {
                break;
            }
        }
    }
    Ok(sum / EVALUATION_EPISODES as f64)
}

/// Abstract-state and ground-truth training runs on identical seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub abstract_run: TrainingRun,
    pub baseline_run: TrainingRun,
}

impl Evaluation {
    /// `|abstract − baseline| / |baseline|` of the final mean rewards.
    pub fn relative_gap(&self) -> f64 {
        let b = self.baseline_run.final_mean_reward;
        (self.abstract_run.final_mean_reward - b).abs() / b.abs()
    }
}

/// Trains one agent on abstract states (nearest center of each fresh
/// observation) and one on true cells.
pub fn evaluate(
    config: &GridworldConfig,
    abstraction: &OfflineAbstraction,
    agent_config: &AgentConfig,
    episodes: usize,
    seed: u64,
) -> Result<Evaluation> {
    if episodes == 0 {
        return Err(Error::InvalidParameter(
            "at least one training episode is required".into(),
        ));
    }
    let abstract_run = train_agent(
        config,
        abstraction.n_states(),
        &|obs, _| abstraction.classify(obs),
        agent_config,
        episodes,
        seed,
    )?;
    let baseline_run = train_agent(config, config.cells(), &|_, cell| cell, agent_config, episodes, seed)?;
    Ok(Evaluation {
        abstract_run,
        baseline_run,
    })
}

/// Harness settings; defaults reproduce the reference experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct HarnessConfig {
    pub env: GridworldConfig,
    pub offline_steps: usize,
    pub episodes: usize,
    pub max_height: usize,
    pub depth: usize,
    pub agent: AgentConfig,
    pub seed: u64,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            env: GridworldConfig::default(),
            offline_steps: 4000,
            episodes: 10_000,
            max_height: DEFAULT_MAX_HEIGHT,
            depth: DEFAULT_ABSTRACTION_DEPTH,
            agent: AgentConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct HarnessReport {
    pub offline: OfflineData,
    pub abstraction: OfflineAbstraction,
    pub purity: f64,
    pub evaluation: Evaluation,
}

/// Offline collection, abstraction and both training runs.
pub fn run_harness(config: &HarnessConfig) -> Result<HarnessReport> {
    let offline = collect_offline(&config.env, config.offline_steps, config.seed)?;
    let abstraction = run_offline_abstraction(&offline.log, &offline.embeddings, config.max_height, config.depth)?;
    let purity = purity(&abstraction.map.assignment, &offline.cells)?;
    let evaluation = evaluate(
        &config.env,
        &abstraction,
        &config.agent,
        config.episodes,
        config.seed.wrapping_add(1000),
    )?;
    Ok(HarnessReport {
        offline,
        abstraction,
        purity,
        evaluation,
    })
}
