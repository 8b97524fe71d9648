//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Runs without the libtest harness so the lines always
//! reach stdout.

use std::collections::BTreeSet;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use structent::directed::default_epsilon;
use structent::gridworld::{run_harness, HarnessConfig};
use structent::shape::NodeLink;
use structent::skills::common_path_probability;
use structent::synthetic::{clustered_knn_graph, random_connected_graph, random_digraph};
use structent::{
    augment_strongly_connected, brute_force_optimal, directed_flat_tree, filter_edges, flat_tree, knn_graph,
    one_dim_entropy, optimize, optimize_directed, optimize_directed_with_trace, optimize_with_trace, reweight,
    similarity_graph, stationary_distribution, strongly_connected_components, EmbeddingMatrix, EncodingTree, TreeShape,
    WeightedGraph,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn timed(f: impl FnOnce() -> Outcome, limit: Duration) -> Outcome {
    let start = Instant::now();
    let mut o = f();
    let elapsed = start.elapsed();
    if elapsed >= limit {
        o.pass = false;
    }
    o.detail = format!(
        "{}; {:.2}s (limit {}s)",
        o.detail,
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    o
}

fn entropy_exactness() -> Outcome {
    let cycle = WeightedGraph::undirected(4, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (0, 3, 1.0)]).unwrap();
    let h_cycle = format!("{:.9}", one_dim_entropy(&cycle).unwrap());
    let bridged = WeightedGraph::undirected(
        6,
        &[
            (0, 1, 1.0),
            (0, 2, 1.0),
            (1, 2, 1.0),
            (2, 3, 1.0),
            (3, 4, 1.0),
            (3, 5, 1.0),
            (4, 5, 1.0),
        ],
    )
    .unwrap();
    let h_bridged = one_dim_entropy(&bridged).unwrap();
    let mut worst: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for seed in 0..100 {
        let n = rng.random_range(2..=50);
        let g = random_connected_graph(n, rng.random_range(0..2 * n), seed % 3 == 0, seed);
        let diff = (flat_tree(&g).unwrap().tree_entropy() - one_dim_entropy(&g).unwrap()).abs();
        worst = worst.max(diff);
    }
    let pass = h_cycle == "2.000000000" && (h_bridged - 2.556657).abs() <= 1e-6 && worst <= 1e-12;
    outcome(
        pass,
        format!("4-cycle {h_cycle}, bridged triangles {h_bridged:.9}, max |flat - H1| over 100 graphs {worst:.1e}"),
    )
}

/// Connected graphs on `n` vertices up to isomorphism, as edge lists.
fn connected_graphs(n: usize) -> Vec<Vec<(usize, usize)>> {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let perms = permutations(n);
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for mask in 0u32..(1 << pairs.len()) {
        let edges: Vec<(usize, usize)> = (0..pairs.len())
            .filter(|b| mask >> b & 1 == 1)
            .map(|b| pairs[b])
            .collect();
        if !connected(n, &edges) {
            continue;
        }
        let canon = perms
            .iter()
            .map(|p| {
                edges.iter().fold(0u32, |acc, &(u, v)| {
                    let (a, b) = (p[u].min(p[v]), p[u].max(p[v]));
                    acc | 1 << pairs.iter().position(|&x| x == (a, b)).unwrap()
                })
            })
            .min()
            .unwrap();
        if seen.insert(canon) {
            out.push(edges);
        }
    }
    out
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

fn connected(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        if p[x] != x {
            p[x] = find(p, p[x]);
        }
        p[x]
    }
    for &(u, v) in edges {
        let (a, b) = (find(&mut parent, u), find(&mut parent, v));
        parent[a] = b;
    }
    (0..n).all(|v| find(&mut parent, v) == find(&mut parent, 0))
}

fn oracle_equivalence() -> Outcome {
    let mut counts = Vec::new();
    let mut violations = 0;
    let mut below_oracle = 0;
    let mut max_gap: f64 = 0.0;
    for n in 2..=6 {
        let graphs = connected_graphs(n);
        counts.push(graphs.len());
        for edges in graphs {
            let weighted: Vec<_> = edges.iter().map(|&(u, v)| (u, v, 1.0)).collect();
            let g = WeightedGraph::undirected(n, &weighted).unwrap();
            let flat = flat_tree(&g).unwrap();
            let h = optimize(&flat, 2).tree_entropy();
            if h > flat.tree_entropy() + 1e-12 {
                violations += 1;
            }
            let best = brute_force_optimal(&g, 2).unwrap().entropy;
            if h < best - 1e-9 {
                below_oracle += 1;
            }
            max_gap = max_gap.max(h - best);
        }
    }
    let (g, a, b) = two_cliques();
    let tree = optimize(&flat_tree(&g).unwrap(), 2);
    let oracle = brute_force_optimal(&g, 2).unwrap();
    let blocks = depth_one_blocks(&tree);
    let pass = counts == [1, 2, 6, 21, 112]
        && violations == 0
        && below_oracle == 0
        && (tree.tree_entropy() - oracle.entropy).abs() <= 1e-9
        && (oracle.entropy - 1.699514).abs() <= 1e-6
        && blocks == vec![a, b];
    outcome(
        pass,
        format!(
            "graphs per n=2..6 {counts:?}, entropy above flat {violations}, below oracle {below_oracle}, max greedy gap {max_gap:.6}; two cliques {:.9} vs oracle {:.9}, blocks {blocks:?}",
            tree.tree_entropy(),
            oracle.entropy
        ),
    )
}

fn two_cliques() -> (WeightedGraph, Vec<usize>, Vec<usize>) {
    let edges = [
        (0, 1, 1.0),
        (0, 2, 1.0),
        (1, 2, 1.0),
        (2, 3, 1.0),
        (3, 4, 1.0),
        (3, 5, 1.0),
        (4, 5, 1.0),
    ];
    (
        WeightedGraph::undirected(6, &edges).unwrap(),
        vec![0, 1, 2],
        vec![3, 4, 5],
    )
}

fn depth_one_blocks(tree: &EncodingTree) -> Vec<Vec<usize>> {
    let shape = tree.shape();
    let mut blocks: Vec<Vec<usize>> = shape
        .children(shape.root())
        .iter()
        .map(|&c| shape.vertices(c))
        .collect();
    blocks.sort();
    blocks
}

fn monotonicity() -> Outcome {
    let mut undirected_steps = 0;
    let mut directed_steps = 0;
    let mut violations = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for seed in 0..200u64 {
        let n = rng.random_range(2..=40);
        let k = rng.random_range(2..=4);
        let g = random_connected_graph(n, rng.random_range(0..3 * n), seed % 4 == 0, seed);
        let flat = flat_tree(&g).unwrap();
        let (tree, trace) = optimize_with_trace(&flat, k);
        let mut previous = flat.tree_entropy();
        for r in &trace {
            undirected_steps += 1;
            if r.entropy_after > r.entropy_before || (r.entropy_before - previous).abs() > 1e-9 {
                violations += 1;
            }
            previous = r.entropy_after;
        }
        if (tree.entropy_from_scratch() - previous).abs() > 1e-9 * previous.max(1.0) {
            violations += 1;
        }

        let d = random_digraph(n, rng.random_range(0..3 * n), seed % 2 == 0, seed);
        let aug = augment_strongly_connected(&d, default_epsilon(&d)).unwrap();
        let flat = directed_flat_tree(&aug).unwrap();
        let (tree, steps) = optimize_directed_with_trace(&flat, k);
        let mut previous = flat.tree_entropy();
        for s in &steps {
            directed_steps += 1;
            if s.entropy_after > s.entropy_before || (s.entropy_before - previous).abs() > 1e-9 {
                violations += 1;
            }
            previous = s.entropy_after;
        }
        if (tree.entropy_from_scratch() - previous).abs() > 1e-9 * previous.max(1.0) {
            violations += 1;
        }
    }
    outcome(
        violations == 0,
        format!("200 graphs and 200 digraphs, {undirected_steps} stretch-compress cycles, {directed_steps} merge/combine steps, {violations} violations"),
    )
}

fn similarity_fixture(seed: u64) -> EmbeddingMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=40);
    let d = rng.random_range(3..=12);
    let clusters = rng.random_range(1..=4);
    let centers: Vec<Vec<f64>> = (0..clusters)
        .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let noise = rng.random_range(0.05..1.0);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            centers[i % clusters]
                .iter()
                .map(|c| c + noise * rng.random_range(-1.0..1.0))
                .collect()
        })
        .collect();
    EmbeddingMatrix::from_rows(&rows).unwrap()
}

fn filtration_optimality() -> Outcome {
    let mut mismatches = Vec::new();
    for seed in 0..50 {
        let raw = similarity_graph(&similarity_fixture(seed)).unwrap();
        let module = filter_edges(&raw).unwrap();
        let reweighted = reweight(&raw).unwrap();
        let mut best: Option<(usize, f64)> = None;
        for k in 1..raw.n() {
            let h = one_dim_entropy(&knn_graph(&reweighted, k).unwrap()).unwrap();
            if best.is_none_or(|(_, b)| h < b) {
                best = Some((k, h));
            }
        }
        let (k, h) = best.unwrap();
        if k != module.k_star || h != module.entropy {
            mismatches.push(seed);
        }
    }
    outcome(
        mismatches.is_empty(),
        format!("50 fixtures, mismatched seeds {mismatches:?}"),
    )
}

fn directed_stationarity() -> Outcome {
    let mut worst_residual: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for seed in 0..100 {
        let n = rng.random_range(2..=40);
        let g = random_digraph(n, rng.random_range(0..3 * n), true, seed);
        let aug = augment_strongly_connected(&g, default_epsilon(&g)).unwrap();
        worst_residual = worst_residual.max(stationary_distribution(&aug).unwrap().residual());
    }
    let mut worst_uniform: f64 = 0.0;
    for n in 3..=20 {
        let edges: Vec<_> = (0..n)
            .flat_map(|i| [(i, (i + 1) % n, 1.0), ((i + 1) % n, i, 1.0)])
            .collect();
        let g = WeightedGraph::directed(n, &edges).unwrap();
        let sd = stationary_distribution(&augment_strongly_connected(&g, default_epsilon(&g)).unwrap()).unwrap();
        for &p in sd.values() {
            worst_uniform = worst_uniform.max((p - 1.0 / n as f64).abs());
        }
    }
    let mut wrong_counts = 0;
    for seed in 0..100 {
        let n = rng.random_range(1..=30);
        let g = random_digraph(n, rng.random_range(0..2 * n), false, 1000 + seed);
        let sccs = strongly_connected_components(&g).unwrap().len();
        if g.m() == 0 {
            continue;
        }
        let aug = augment_strongly_connected(&g, default_epsilon(&g)).unwrap();
        let expected = if sccs > 1 { sccs } else { 0 };
        if aug.injected().len() != expected {
            wrong_counts += 1;
        }
    }
    let pass = worst_residual < 1e-9 && worst_uniform <= 1e-12 && wrong_counts == 0;
    outcome(
        pass,
        format!("max residual {worst_residual:.1e}, max deviation from uniform {worst_uniform:.1e}, wrong injection counts {wrong_counts}"),
    )
}

fn common_path_properties() -> Outcome {
    let mut diagonal_failures = 0;
    let mut out_of_range = 0;
    let mut pairs = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for seed in 0..100 {
        let n = rng.random_range(2..=25);
        let g = random_digraph(n, rng.random_range(0..3 * n), seed % 2 == 0, 2000 + seed);
        let aug = augment_strongly_connected(&g, default_epsilon(&g)).unwrap();
        let tree = optimize_directed(&aug, rng.random_range(2..=4)).unwrap();
        let shape = tree.shape();
        let mut entropy = vec![0.0; shape.capacity()];
        for id in shape.node_ids() {
            entropy[id] = tree.node_entropy(id).unwrap_or(0.0);
        }
        for i in 0..n {
            for j in 0..n {
                let p = common_path_probability(shape, &entropy, i, j);
                pairs += 1;
                if i == j && p != 1.0 {
                    diagonal_failures += 1;
                }
                if !(0.0..=1.0).contains(&p) {
                    out_of_range += 1;
                }
            }
        }
    }
    // root -> {A, B}; A -> {leaf 0, C}; C -> {leaf 1, leaf 2}; B -> {leaf 3}
    let link = |id, parent: Option<usize>, children: Vec<usize>, vertex| NodeLink {
        id,
        parent,
        children,
        vertex,
    };
    let shape = TreeShape::from_links(&[
        link(0, None, vec![1, 2], None),
        link(1, Some(0), vec![3, 4], None),
        link(2, Some(0), vec![7], None),
        link(3, Some(1), vec![], Some(0)),
        link(4, Some(1), vec![5, 6], None),
        link(5, Some(4), vec![], Some(1)),
        link(6, Some(4), vec![], Some(2)),
        link(7, Some(2), vec![], Some(3)),
    ])
    .unwrap();
    let a = shape.lca(shape.leaf(0), shape.leaf(1));
    let c = shape.parent(shape.leaf(1)).unwrap();
    let mut entropy = vec![0.0; shape.capacity()];
    entropy[a] = 0.2;
    entropy[c] = 0.3;
    entropy[shape.leaf(1)] = 0.1;
    let hand = common_path_probability(&shape, &entropy, 0, 1);
    let expected = 0.2 / (0.2 + 0.3 + 0.1);
    let pass = diagonal_failures == 0 && out_of_range == 0 && (hand - expected).abs() <= 1e-12;
    outcome(
        pass,
        format!("100 directed trees, {pairs} pairs, diagonal failures {diagonal_failures}, out of [0,1] {out_of_range}; hand fixture {hand:.12} vs {expected:.12}"),
    )
}

fn gridworld() -> Outcome {
    let report = run_harness(&HarnessConfig::default()).unwrap();
    let gap = report.evaluation.relative_gap();
    let pass = report.purity >= 0.9 && gap <= 0.10;
    outcome(
        pass,
        format!(
            "purity {:.4} over {} abstract states, final reward abstract {:.3} vs ground truth {:.3}, relative gap {:.4}",
            report.purity,
            report.abstraction.n_states(),
            report.evaluation.abstract_run.final_mean_reward,
            report.evaluation.baseline_run.final_mean_reward,
            gap
        ),
    )
}

fn optimize_seconds(g: &WeightedGraph) -> f64 {
    let flat = flat_tree(g).unwrap();
    (0..3)
        .map(|_| {
            let start = Instant::now();
            let tree = optimize(&flat, 3);
            std::hint::black_box(tree.tree_entropy());
            start.elapsed().as_secs_f64()
        })
        .fold(f64::INFINITY, f64::min)
}

fn performance() -> Outcome {
    let mut normalized = Vec::new();
    let mut largest = 0.0;
    for n in [1_000usize, 4_000, 10_000] {
        let g = clustered_knn_graph(n, 10 * n, 7);
        let t = optimize_seconds(&g);
        let log_n = (n as f64).log2();
        normalized.push(t / (g.m() as f64 * log_n * log_n));
        largest = t;
    }
    let lo = normalized.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = normalized.iter().copied().fold(0.0, f64::max);
    let pass = largest < 60.0 && hi / lo <= 2.0;
    outcome(
        pass,
        format!(
            "10k/100k optimize {largest:.3}s; time/(m log2^2 n) = {:?}, spread {:.2}x",
            normalized.iter().map(|x| format!("{x:.2e}")).collect::<Vec<_>>(),
            hi / lo
        ),
    )
}

fn run_cli(args: &[String]) -> (Option<i32>, Vec<u8>, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_structent"))
        .args(args)
        .output()
        .expect("binary runs");
    (out.status.code(), out.stdout, out.stderr)
}

fn determinism() -> Outcome {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let f = |name: &str| fixtures.join(name).display().to_string();
    let commands: Vec<(&str, Vec<String>, Vec<&str>)> = vec![
        ("entropy", vec!["entropy".into(), f("two_cliques.tsv")], vec![]),
        (
            "filter",
            vec!["filter".into(), f("two_clusters.tsv"), "-o".into(), "{}/g.tsv".into()],
            vec!["g.tsv"],
        ),
        (
            "optimize",
            vec!["optimize".into(), f("two_cliques.tsv"), "-o".into(), "{}/t.json".into()],
            vec!["t.json"],
        ),
        (
            "optimize --directed",
            vec![
                "optimize".into(),
                f("directed_cycle.tsv"),
                "--directed".into(),
                "-o".into(),
                "{}/d.json".into(),
            ],
            vec!["d.json"],
        ),
        (
            "skills",
            vec![
                "skills".into(),
                f("two_hop.tsv"),
                "--state-tree".into(),
                f("states_flat6.json"),
                "--action-tree".into(),
                f("actions_flat2.json"),
                "-o".into(),
                "{}/s.json".into(),
            ],
            vec!["s.json"],
        ),
        (
            "gridworld",
            vec![
                "gridworld".into(),
                "--seed".into(),
                "3".into(),
                "--curves".into(),
                "{}/c.csv".into(),
                "--summary".into(),
                "{}/s.json".into(),
                "--plot".into(),
                "{}/p.svg".into(),
            ],
            vec!["c.csv", "s.json", "p.svg"],
        ),
    ];
    let mut differing = Vec::new();
    let mut failed = Vec::new();
    for (name, args, files) in &commands {
        let runs: Vec<_> = (0..2)
            .map(|_| {
                let dir = tempfile::tempdir().unwrap();
                let d = dir.path().display().to_string();
                let args: Vec<String> = args.iter().map(|a| a.replace("{}", &d)).collect();
                let (code, out, err) = run_cli(&args);
                let contents: Vec<Vec<u8>> = files
                    .iter()
                    .map(|f| std::fs::read(dir.path().join(f)).unwrap_or_default())
                    .collect();
                (code, out, err, contents)
            })
            .collect();
        if runs[0].0 != Some(0) {
            failed.push(*name);
        }
        if runs[0] != runs[1] {
            differing.push(*name);
        }
    }
    outcome(
        differing.is_empty() && failed.is_empty(),
        format!(
            "{} commands run twice; differing {differing:?}, nonzero exits {failed:?}",
            commands.len()
        ),
    )
}

type Criterion = (&'static str, Box<dyn Fn() -> Outcome>);

fn main() {
    let criteria: Vec<Criterion> = vec![
        (
            "entropy exactness",
            Box::new(|| timed(entropy_exactness, Duration::from_secs(1))),
        ),
        (
            "oracle equivalence",
            Box::new(|| timed(oracle_equivalence, Duration::from_secs(30))),
        ),
        ("monotonicity", Box::new(monotonicity)),
        ("filtration optimality", Box::new(filtration_optimality)),
        ("directed stationarity", Box::new(directed_stationarity)),
        ("common-path probability", Box::new(common_path_properties)),
        ("gridworld", Box::new(|| timed(gridworld, Duration::from_secs(300)))),
        ("performance envelope", Box::new(performance)),
        ("determinism", Box::new(determinism)),
    ];
    let mut failures = 0;
    for (name, check) in &criteria {
        let o = check();
        if !o.pass {
            failures += 1;
        }
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
