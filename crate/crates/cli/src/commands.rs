//! Argument definitions and command implementations. Each command returns
//! the report it prints on stdout.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use serde::Serialize;
use structent::abstraction::shape_abstraction_map;
use structent::directed::{augment_strongly_connected, default_epsilon, directed_flat_tree, directed_one_dim_entropy};
use structent::gridworld::{run_harness, HarnessConfig, EPISODES_PER_EPOCH};
use structent::skills::{build_transition_graph_with, extract_skills};
use structent::{
    filter_edges, flat_tree, one_dim_entropy, optimize, optimize_directed, similarity_graph, EncodingTree, FlowMeasure,
    GridworldConfig, WeightedGraph,
};

use crate::error::CliError;
use crate::formats::{
    parse_embeddings, parse_graph, parse_trajectories, parse_tree, round9, write_graph, write_skills, write_tree,
    FormatError, SkillRecord, TreeFile,
};
use crate::plot::{svg_plot, Series};

/// Structural entropy, encoding-tree optimization and skill discovery.
#[derive(Debug, Parser)]
#[command(name = "structent", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the one-dimensional entropy of a graph, and the entropy of an
    /// encoding tree over it when one is given.
    Entropy {
        graph: PathBuf,
        #[arg(long)]
        tree: Option<PathBuf>,
    },
    /// Build the similarity graph of an embedding file, filter its edges and
    /// write the sparse graph.
    Filter {
        embeddings: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Optimize an encoding tree of bounded height for a graph.
    Optimize {
        graph: PathBuf,
        /// Use the directed optimizer (the graph file must be directed).
        #[arg(long)]
        directed: bool,
        /// Maximum tree height.
        #[arg(short = 'K', long = "K", default_value_t = 3)]
        k: usize,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Extract skills from trajectories given state and action hierarchies.
    Skills {
        trajectories: PathBuf,
        /// Tree file whose leaves are state ids.
        #[arg(long)]
        state_tree: PathBuf,
        /// Tree file whose leaves are action ids.
        #[arg(long)]
        action_tree: PathBuf,
        /// Depth of the abstract states in the state tree.
        #[arg(long, default_value_t = 1)]
        depth: usize,
        /// Maximum height of the transition-graph tree.
        #[arg(short = 'K', long = "K", default_value_t = 3)]
        k: usize,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Run the noisy gridworld abstraction experiment.
    Gridworld {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Standard deviation of the observation noise.
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
        /// Offline random-walk steps.
        #[arg(long, default_value_t = 4000)]
        steps: usize,
        /// Training episodes per agent.
        #[arg(long, default_value_t = 10_000)]
        episodes: usize,
        #[arg(short = 'K', long = "K", default_value_t = 3)]
        k: usize,
        #[arg(long, default_value_t = 1)]
        depth: usize,
        /// Learning-curve CSV output.
        #[arg(long)]
        curves: PathBuf,
        /// Summary JSON output.
        #[arg(long)]
        summary: PathBuf,
        /// Optional SVG plot of the learning curves.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
}

pub fn run(command: &Command) -> Result<String, CliError> {
    match command {
        Command::Entropy { graph, tree } => entropy(graph, tree.as_deref()),
        Command::Filter { embeddings, output } => filter(embeddings, output),
        Command::Optimize {
            graph,
            directed,
            k,
            output,
        } => optimize_cmd(graph, *directed, *k, output),
        Command::Skills {
            trajectories,
            state_tree,
            action_tree,
            depth,
            k,
            output,
        } => skills(trajectories, state_tree, action_tree, *depth, *k, output),
        Command::Gridworld {
            seed,
            noise,
            steps,
            episodes,
            k,
            depth,
            curves,
            summary,
            plot,
        } => gridworld(
            &GridworldArgs {
                seed: *seed,
                noise: *noise,
                steps: *steps,
                episodes: *episodes,
                k: *k,
                depth: *depth,
            },
            curves,
            summary,
            plot.as_deref(),
        ),
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_with<T>(path: &Path, parser: impl Fn(&str) -> Result<T, FormatError>) -> Result<T, CliError> {
    parser(&read(path)?).map_err(|source| CliError::Format {
        path: path.to_path_buf(),
        source,
    })
}

fn check_k(k: usize) -> Result<(), CliError> {
    if k < 2 {
        return Err(CliError::Usage(format!("--K must be at least 2, got {k}")));
    }
    Ok(())
}

fn fmt9(x: f64) -> String {
    format!("{x:.9}")
}

/// Flat tree of a graph: undirected degrees, or augmented directed flows.
fn flat_for(g: &WeightedGraph) -> Result<EncodingTree, CliError> {
    if g.is_directed() {
        Ok(directed_flat_tree(&augment_strongly_connected(g, default_epsilon(g))?)?)
    } else {
        Ok(EncodingTree::flat(Arc::new(FlowMeasure::undirected(g)?)))
    }
}

fn entropy(graph: &Path, tree: Option<&Path>) -> Result<String, CliError> {
    let g = parse_with(graph, parse_graph)?;
    let h1 = if g.is_directed() {
        directed_one_dim_entropy(&augment_strongly_connected(&g, default_epsilon(&g))?)?
    } else {
        one_dim_entropy(&g)?
    };
    let mut out = format!("H1 = {}\n", fmt9(h1));
    if let Some(path) = tree {
        let file = parse_with(path, parse_tree)?;
        let shape = file.shape().map_err(|source| CliError::Format {
            path: path.to_path_buf(),
            source,
        })?;
        let encoded = EncodingTree::from_shape(shape, flat_for(&g)?.measure().clone())?;
        out.push_str(&format!("HT = {}\n", fmt9(encoded.tree_entropy())));
    }
    Ok(out)
}

fn filter(embeddings: &Path, output: &Path) -> Result<String, CliError> {
    let emb = parse_with(embeddings, parse_embeddings)?;
    let result = filter_edges(&similarity_graph(&emb)?)?;
    write(output, &write_graph(&result.graph))?;
    Ok(format!(
        "k* = {}\nedges = {}\nH1 = {}\n",
        result.k_star,
        result.graph.m(),
        fmt9(result.entropy)
    ))
}

fn optimize_cmd(graph: &Path, directed: bool, k: usize, output: &Path) -> Result<String, CliError> {
    check_k(k)?;
    let g = parse_with(graph, parse_graph)?;
    match (directed, g.is_directed()) {
        (true, false) => return Err(CliError::Usage("--directed requires a directed graph file".into())),
        (false, true) => return Err(CliError::Usage("a directed graph file requires --directed".into())),
        _ => {}
    }
    let initial = flat_for(&g)?;
    let tree = if directed {
        optimize_directed(&augment_strongly_connected(&g, default_epsilon(&g))?, k)?
    } else {
        optimize(&flat_tree(&g)?, k)
    };
    tree.validate()
        .map_err(|e| CliError::Internal(format!("optimized tree is invalid: {e}")))?;
    if tree.height() > k {
        return Err(CliError::Internal(format!(
            "tree height {} exceeds K = {k}",
            tree.height()
        )));
    }
    let (before, after) = (initial.tree_entropy(), tree.tree_entropy());
    if after > before + 1e-9 * before.abs().max(1.0) {
        return Err(CliError::Internal(format!("entropy rose from {before} to {after}")));
    }
    write(output, &write_tree(&TreeFile::from_tree(&tree, directed)))?;
    Ok(format!(
        "initial entropy = {}\nfinal entropy = {}\nheight = {}\n",
        fmt9(before),
        fmt9(after),
        tree.height()
    ))
}

fn skills(
    trajectories: &Path,
    state_tree: &Path,
    action_tree: &Path,
    depth: usize,
    k: usize,
    output: &Path,
) -> Result<String, CliError> {
    check_k(k)?;
    let log = parse_with(trajectories, parse_trajectories)?;
    let shape_of = |path: &Path| {
        parse_with(path, parse_tree)?
            .shape()
            .map_err(|source| CliError::Format {
                path: path.to_path_buf(),
                source,
            })
    };
    let states = shape_abstraction_map(&shape_of(state_tree)?, depth)?;
    let actions = shape_of(action_tree)?;
    let tg = build_transition_graph_with(&log, &states, &actions, k)?;
    let found = extract_skills(&tg, &log)?;
    let records: Vec<SkillRecord> = found.iter().map(SkillRecord::from).collect();
    write(output, &write_skills(&records))?;
    Ok(format!(
        "abstract states = {}\nskills = {}\n",
        tg.n_states(),
        records.len()
    ))
}

#[derive(Debug, Clone, Copy)]
struct GridworldArgs {
    seed: u64,
    noise: f64,
    steps: usize,
    episodes: usize,
    k: usize,
    depth: usize,
}

/// Gridworld summary file.
#[derive(Debug, Serialize)]
pub struct GridworldSummary {
    pub seed: u64,
    pub noise: f64,
    pub steps: usize,
    pub episodes: usize,
    pub episodes_per_epoch: usize,
    pub max_height: usize,
    pub depth: usize,
    pub distinct_cells: usize,
    pub k_star: usize,
    pub abstract_states: usize,
    pub purity: f64,
    pub abstract_final_reward: f64,
    pub baseline_final_reward: f64,
    pub relative_gap: f64,
}

fn gridworld(args: &GridworldArgs, curves: &Path, summary: &Path, plot: Option<&Path>) -> Result<String, CliError> {
    check_k(args.k)?;
    if args.episodes == 0 {
        return Err(CliError::Usage("--episodes must be positive".into()));
    }
    let config = HarnessConfig {
        env: GridworldConfig {
            sigma: args.noise,
            ..Default::default()
        },
        offline_steps: args.steps,
        episodes: args.episodes,
        max_height: args.k,
        depth: args.depth,
        seed: args.seed,
        ..Default::default()
    };
    let report = run_harness(&config)?;
    let eval = &report.evaluation;
    let mut csv = String::from("epoch,abstract_mean_reward,abstract_std,baseline_mean_reward,baseline_std\n");
    for (a, b) in eval.abstract_run.curve.iter().zip(&eval.baseline_run.curve) {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            a.epoch,
            fmt9(a.mean_reward),
            fmt9(a.std),
            fmt9(b.mean_reward),
            fmt9(b.std)
        ));
    }
    let s = GridworldSummary {
        seed: args.seed,
        noise: args.noise,
        steps: args.steps,
        episodes: args.episodes,
        episodes_per_epoch: EPISODES_PER_EPOCH,
        max_height: args.k,
        depth: args.depth,
        distinct_cells: report.offline.distinct_cells(),
        k_star: report.abstraction.k_star,
        abstract_states: report.abstraction.n_states(),
        purity: round9(report.purity),
        abstract_final_reward: round9(eval.abstract_run.final_mean_reward),
        baseline_final_reward: round9(eval.baseline_run.final_mean_reward),
        relative_gap: round9(eval.relative_gap()),
    };
    write(curves, &csv)?;
    let mut json = serde_json::to_string_pretty(&s).expect("summary serializes");
    json.push('\n');
    write(summary, &json)?;
    if let Some(path) = plot {
        let series = |label, color, run: &structent::gridworld::TrainingRun| Series {
            label,
            color,
            points: run.curve.iter().map(|c| (c.epoch as f64, c.mean_reward)).collect(),
        };
        let svg = svg_plot(
            "Mean episode reward per epoch",
            "epoch",
            "mean reward",
            &[
                series("abstract", "#d62728", &eval.abstract_run),
                series("ground truth", "#1f77b4", &eval.baseline_run),
            ],
        );
        write(path, &svg)?;
    }
    Ok(format!(
        "purity = {}\nabstract states = {}\nabstract final reward = {}\nbaseline final reward = {}\nrelative gap = {}\n",
        fmt9(report.purity),
        s.abstract_states,
        fmt9(eval.abstract_run.final_mean_reward),
        fmt9(eval.baseline_run.final_mean_reward),
        fmt9(eval.relative_gap())
    ))
}
