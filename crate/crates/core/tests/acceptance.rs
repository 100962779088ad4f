//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::collections::HashSet;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use elixir_core::densify::{make_pseudo_item, propagate_labels, CosineAffinity, PropagationParams};
use elixir_core::evalsim::{
    generate_population, run_phase2, run_phase3, Configuration, ExperimentConfig, PopulationConfig,
};
use elixir_core::lsh::{ProjectionIndex, Query};
use elixir_core::metrics::{average_precision_at_k, ndcg_at_k, precision_at_k};
use elixir_core::model::{FeedbackMatrix, ItemVector, ItemVectors, UserProfile};
use elixir_core::prefopt::{gradient, learn_preference, objective, similarity_shift, OptimizerConfig};
use elixir_core::recwalk::{
    ppr, transition_matrix, user_similarity_matrix, InteractionGraph, Recommender, SimilarityParams, WalkConfig,
};

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn random_vectors(rng: &mut ChaCha8Rng, n: usize, d: usize) -> ItemVectors {
    let rows = (0..n)
        .map(|_| ItemVector((0..d).map(|_| rng.random_range(0.0..1.0)).collect()))
        .collect();
    ItemVectors::new(d, rows).unwrap()
}

fn cos(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

// dense transition matrix rebuilt from the graph definition, not from the library's builder
fn dense_transition(graph: &InteractionGraph, beta: f64) -> DMatrix<f64> {
    let (u, i) = (graph.users(), graph.items());
    let n = u + i;
    let mut h = DMatrix::<f64>::zeros(n, n);
    for user in 0..u {
        for &v in graph.likes(user) {
            h[(user, u + v)] = 1.0;
            h[(u + v, user)] = 1.0;
        }
    }
    for r in 0..n {
        let s: f64 = h.row(r).sum();
        if s == 0.0 {
            h[(r, r)] = 1.0;
        } else {
            h.row_mut(r).scale_mut(1.0 / s);
        }
    }
    let mut s = DMatrix::<f64>::zeros(i, i);
    for (a, b, w) in graph.similarity().edges() {
        s[(a, b)] = w;
        s[(b, a)] = w;
    }
    let nu = (0..i).map(|r| s.row(r).sum()).fold(0.0, f64::max);
    let mut m = DMatrix::<f64>::identity(n, n);
    if nu > 0.0 {
        for a in 0..i {
            let row_sum: f64 = s.row(a).sum();
            for b in 0..i {
                m[(u + a, u + b)] = s[(a, b)] / nu;
            }
            m[(u + a, u + a)] = 1.0 - row_sum / nu;
        }
    }
    h * beta + m * (1.0 - beta)
}

fn random_graph(rng: &mut ChaCha8Rng) -> InteractionGraph {
    let users = rng.random_range(1..=10);
    let items = rng.random_range(2..=(50 - users).min(40));
    let vectors = random_vectors(rng, items, 4);
    let profiles: Vec<UserProfile> = (0..users)
        .map(|_| {
            let n = rng.random_range(0..=items.min(6));
            UserProfile::from_history((0..n).map(|_| rng.random_range(0..items)).collect::<HashSet<_>>())
        })
        .collect();
    let params = SimilarityParams {
        threshold: rng.random_range(0.5..0.95),
        planes: rng.random_range(1..=3),
        seed: rng.random(),
    };
    InteractionGraph::build(&profiles, vectors, params).unwrap()
}

fn ppr_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let walk = WalkConfig::default();
    let mut worst = 0.0f64;
    let mut largest = 0;
    for _ in 0..20 {
        let graph = random_graph(&mut rng);
        largest = largest.max(graph.nodes());
        let p = transition_matrix(&graph, walk.beta, None).unwrap();
        let dense = dense_transition(&graph, walk.beta);
        let n = graph.nodes();
        // π (I - (1-α) P) = α e_s  ⇔  (I - (1-α) Pᵀ) πᵀ = α e_s
        let system = DMatrix::<f64>::identity(n, n) - dense.transpose() * (1.0 - walk.alpha);
        let lu = system.lu();
        for source in [0, rng.random_range(0..n), n - 1] {
            let mut e = DVector::<f64>::zeros(n);
            e[source] = walk.alpha;
            let exact = lu.solve(&e).unwrap();
            let run = ppr(&p, source, walk.alpha, walk.max_iters, walk.tol).unwrap();
            for (a, b) in run.scores.iter().zip(exact.iter()) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-8 && secs < 5.0,
        format!("20 graphs (≤{largest} nodes), max |Δ| = {worst:.2e}, {secs:.2} s"),
    )
}

// objective reimplemented from its definition
fn objective_ref(w: &[f64], pairs: &[(usize, usize, f64)], vectors: &ItemVectors, gamma: f64) -> f64 {
    let shift = |v: &[f64]| -> Vec<f64> { v.iter().zip(w).map(|(a, b)| a + b).collect() };
    let m = pairs.len() as f64;
    let data: f64 = pairs
        .iter()
        .map(|&(i, j, f)| {
            let (a, b) = (vectors.get(i), vectors.get(j));
            f * (cos(a, b) - cos(&shift(a), &shift(b)))
        })
        .sum();
    data / m + gamma * w.iter().map(|x| x * x).sum::<f64>()
}

fn random_feedback(rng: &mut ChaCha8Rng, items: usize, m: usize) -> (FeedbackMatrix, Vec<(usize, usize, f64)>) {
    let mut f = FeedbackMatrix::new();
    let mut pairs = Vec::new();
    while pairs.len() < m {
        let (a, b) = (rng.random_range(0..items), rng.random_range(0..items));
        if a == b || f.get_unordered(a, b).is_some() {
            continue;
        }
        let label: f64 = if rng.random::<bool>() {
            if rng.random::<bool>() {
                1.0
            } else {
                -1.0
            }
        } else {
            rng.random_range(-1.0..1.0)
        };
        if label == 0.0 {
            continue;
        }
        if label.abs() == 1.0 {
            f.insert_explicit(a, b, label).unwrap();
        } else {
            f.insert_propagated(a, b, label).unwrap();
        }
        pairs.push((a, b, label));
    }
    (f, pairs)
}

fn gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for case in 0..50 {
        let d = if case % 2 == 0 { 4 } else { 20 };
        let gamma = if case % 4 < 2 { 0.0 } else { 3.0 };
        let m = rng.random_range(1..=40);
        let vectors = random_vectors(&mut rng, 30, d);
        let (f, pairs) = random_feedback(&mut rng, 30, m);
        let w: Vec<f64> = (0..d).map(|_| 0.1 * rng.sample::<f64, _>(StandardNormal)).collect();
        let g = gradient(&w, &f, &vectors, gamma).unwrap();
        let fd: Vec<f64> = (0..d)
            .map(|t| {
                let mut up = w.clone();
                let mut down = w.clone();
                up[t] += h;
                down[t] -= h;
                (objective_ref(&up, &pairs, &vectors, gamma) - objective_ref(&down, &pairs, &vectors, gamma))
                    / (2.0 * h)
            })
            .collect();
        let diff = g.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale = g
            .iter()
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
            .max(fd.iter().map(|x| x * x).sum::<f64>().sqrt());
        worst = worst.max(if scale > 0.0 { diff / scale } else { diff });
    }
    outcome(worst <= 1e-4, format!("50 instances, max relative error {worst:.2e}"))
}

fn optimizer_soundness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    let mut violations = 0;
    let mut worst_obj = f64::NEG_INFINITY;
    for case in 0..100u64 {
        let d = if case % 2 == 0 { 4 } else { 20 };
        let gamma = [0.0, 0.5, 3.0][case as usize % 3];
        let m = rng.random_range(1..=40);
        let vectors = random_vectors(&mut rng, 30, d);
        let (f, pairs) = random_feedback(&mut rng, 30, m);
        let config = OptimizerConfig {
            gamma,
            seed: case,
            ..OptimizerConfig::default()
        };
        let pref = learn_preference(&f, &vectors, &config).unwrap();
        let obj = objective_ref(&pref.w, &pairs, &vectors, gamma);
        let shift = similarity_shift(&pref.w, &f, &vectors).unwrap();
        let norm2: f64 = pref.w.iter().map(|x| x * x).sum();
        worst_obj = worst_obj.max(obj);
        if obj > 1e-12 || shift < gamma * norm2 - 1e-12 {
            violations += 1;
        }
        // the returned objective agrees with the reference definition
        if (objective(&pref.w, &f, &vectors, gamma).unwrap() - obj).abs() > 1e-12 {
            violations += 1;
        }
    }
    outcome(
        violations == 0,
        format!("100 instances, {violations} violations, max objective {worst_obj:.3e}"),
    )
}

fn harmonic_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut worst = 0.0f64;
    let mut moved = 0;
    let mut out_of_range = 0;
    let params = PropagationParams {
        max_iters: 100_000,
        tol: 1e-13,
    };
    for _ in 0..30 {
        let n = rng.random_range(3..=50);
        let vectors: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..5).map(|_| rng.random_range(0.0..1.0)).collect())
            .collect();
        let mut clamped: Vec<Option<f64>> = (0..n)
            .map(|_| rng.random_bool(0.3).then(|| rng.random_range(-1.0..=1.0)))
            .collect();
        clamped[0] = Some(1.0);
        let result = propagate_labels(&CosineAffinity::new(&vectors), &clamped, params).unwrap();

        let w = |i: usize, j: usize| {
            if i == j {
                0.0
            } else {
                cos(&vectors[i], &vectors[j]).max(0.0)
            }
        };
        let unl: Vec<usize> = (0..n).filter(|&i| clamped[i].is_none()).collect();
        let lab: Vec<usize> = (0..n).filter(|&i| clamped[i].is_some()).collect();
        let deg: Vec<f64> = (0..n).map(|i| (0..n).map(|j| w(i, j)).sum()).collect();
        let k = unl.len();
        let mut a = DMatrix::<f64>::identity(k, k);
        let mut rhs = DVector::<f64>::zeros(k);
        for (r, &i) in unl.iter().enumerate() {
            for (c, &j) in unl.iter().enumerate() {
                a[(r, c)] -= w(i, j) / deg[i];
            }
            rhs[r] = lab.iter().map(|&j| w(i, j) / deg[i] * clamped[j].unwrap()).sum();
        }
        let exact = a.lu().solve(&rhs).unwrap();
        for (r, &i) in unl.iter().enumerate() {
            worst = worst.max((result.labels[i] - exact[r]).abs());
        }
        for &i in &lab {
            if result.labels[i] != clamped[i].unwrap() {
                moved += 1;
            }
        }
        out_of_range += result.labels.iter().filter(|y| y.abs() > 1.0).count();
    }
    outcome(
        worst <= 1e-6 && moved == 0 && out_of_range == 0,
        format!("30 problems ≤50 nodes, max |Δ| = {worst:.2e}, clamped moved {moved}, out of range {out_of_range}"),
    )
}

fn pseudo_item_algebra() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut ok = true;
    for _ in 0..100 {
        let v: Vec<f64> = (0..8).map(|_| rng.random_range(0.0..10.0)).collect();
        ok &= make_pseudo_item(&v, &v).unwrap() == v;
        let mut z = v.clone();
        z[3] = 0.0;
        ok &= make_pseudo_item(&v, &z).unwrap()[3] == 0.0;
    }
    ok &= make_pseudo_item(&[4.0, 1.0], &[1.0, 9.0]).unwrap() == vec![2.0, 3.0];
    ok &= make_pseudo_item(&[1.0, 0.0], &[0.0, 1.0]).unwrap() == vec![0.0, 0.0];
    outcome(ok, "gm(v,v)=v, zero annihilation, (4,1)⊗(1,9)=(2,3)".into())
}

fn metric_hand_case() -> Outcome {
    let ranked = ["a", "b", "c", "d", "e"];
    let relevant: HashSet<&str> = ["a", "c"].into();
    let p = precision_at_k(&ranked, &relevant, 5);
    let ap = average_precision_at_k(&ranked, &relevant, 5);
    let nd = ndcg_at_k(&ranked, &relevant, 5);
    // hits at ranks 1 and 3: AP = (1/1 + 2/3)/2, nDCG = (1 + 1/log2 4) / (1 + 1/log2 3)
    let nd_expected = (1.0 + 1.0 / 4f64.log2()) / (1.0 + 1.0 / 3f64.log2());
    outcome(
        p == 0.4 && (ap - 0.8333).abs() <= 1e-4 && (nd - 0.9197).abs() <= 1e-4 && (nd - nd_expected).abs() < 1e-12,
        format!("P@5 {p:.4}, MAP@5 {ap:.4}, nDCG@5 {nd:.4}"),
    )
}

fn directional() -> Outcome {
    use Configuration::*;
    let config = ExperimentConfig {
        configurations: vec![ItemLevel, PairExp5, ItemPairExp5, PairRand5],
        ..ExperimentConfig::default()
    };
    let (mut exp_wins, mut combined_wins, mut exp_vs_rand) = (0, 0, 0);
    let mut lines = Vec::new();
    for seed in 0..10 {
        let population = generate_population(
            &PopulationConfig {
                seed,
                ..Default::default()
            },
            &config.elixir,
        )
        .unwrap();
        let graph = population.graph(&config.elixir).unwrap();
        let logs = run_phase2(&population, &graph, &config).unwrap();
        let table = run_phase3(&population, &graph, &logs, &config).unwrap();
        let p5 = |c| table.get(c).unwrap().metric("P@5").unwrap();
        let n5 = |c| table.get(c).unwrap().metric("nDCG@5").unwrap();
        exp_wins += (p5(PairExp5) > p5(ItemLevel) && n5(PairExp5) > n5(ItemLevel)) as usize;
        combined_wins += (p5(ItemPairExp5) > p5(ItemLevel) && n5(ItemPairExp5) > n5(ItemLevel)) as usize;
        exp_vs_rand += (p5(PairExp5) > p5(PairRand5)) as usize;
        lines.push(format!(
            "      seed {seed}: P@5 item {:.3} exp5 {:.3} item+exp5 {:.3} rand5 {:.3}",
            p5(ItemLevel),
            p5(PairExp5),
            p5(ItemPairExp5),
            p5(PairRand5)
        ));
    }
    for l in &lines {
        println!("{l}");
    }
    outcome(
        exp_wins >= 7 && combined_wins >= 7 && exp_vs_rand >= 6,
        format!(
            "PairExp5>ItemLevel {exp_wins}/10 (need 7), ItemPairExp5>ItemLevel {combined_wins}/10 (need 7), PairExp5>PairRand5 {exp_vs_rand}/10 (need 6)"
        ),
    )
}

fn no_op_identities() -> Outcome {
    let config = ExperimentConfig::default();
    let population = generate_population(
        &PopulationConfig {
            seed: 3,
            ..Default::default()
        },
        &config.elixir,
    )
    .unwrap();
    let graph = population.graph(&config.elixir).unwrap();
    let walk = config.elixir.walk();
    let mut failures = Vec::new();

    let zero = vec![0.0; population.vectors.dim()];
    let s_zero = user_similarity_matrix(&population.vectors, &zero, graph.similarity_params()).unwrap();
    if &s_zero != graph.similarity() {
        failures.push("S_u(w=0) != S");
    }
    let base = Recommender::new(&graph, walk, None).unwrap();
    let translated = Recommender::new(&graph, walk, Some(&s_zero)).unwrap();
    for u in 0..population.users.len() {
        if base.recommend(u, 30).unwrap() != translated.recommend(u, 30).unwrap() {
            failures.push("w=0 slate differs");
            break;
        }
    }

    let logs = run_phase2(&population, &graph, &config).unwrap();
    let no_pairs = run_phase3(&population, &graph, &logs.without_pair_feedback(), &config).unwrap();
    let item_level = &no_pairs.get(Configuration::ItemLevel).unwrap().rankings;
    for c in [Configuration::ItemPairExp5, Configuration::ItemPairRand5] {
        if &no_pairs.get(c).unwrap().rankings != item_level {
            failures.push("item+pair config differs from ItemLevel without pair feedback");
        }
    }
    let nothing = logs.without_pair_feedback().without_item_feedback();
    let silent = run_phase3(&population, &graph, &nothing, &config).unwrap();
    let phase2: Vec<Vec<usize>> = logs.users.iter().map(|l| l.slate.items()).collect();
    for row in &silent.rows {
        if row.rankings != phase2 {
            failures.push("configuration differs from phase 2 without any feedback");
        }
    }
    for c in [
        Configuration::PairExp1,
        Configuration::PairExp5,
        Configuration::PairRand5,
    ] {
        if silent.get(c).unwrap().rankings != silent.get(Configuration::ItemLevel).unwrap().rankings {
            failures.push("pair config differs from ItemLevel without any feedback");
        }
    }
    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            "w=0 slates, S_u(0)=S, zero pair feedback collapses item+pair configs to ItemLevel and all configs to phase 2 without feedback".into()
        } else {
            failures.join("; ")
        },
    )
}

fn lsh_recall(half_normal: bool) -> (f64, f64) {
    let mut recalls = Vec::new();
    let mut failures = Vec::new();
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let vectors: Vec<Vec<f64>> = (0..500)
            .map(|_| {
                let v: Vec<f64> = (0..20)
                    .map(|_| {
                        let x: f64 = rng.sample(StandardNormal);
                        if half_normal {
                            x.abs()
                        } else {
                            x
                        }
                    })
                    .collect();
                let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                v.into_iter().map(|x| x / n).collect()
            })
            .collect();
        let index = ProjectionIndex::build(&vectors, 3, seed).unwrap();
        let mut total = 0.0;
        for q in 0..vectors.len() {
            let mut exact: Vec<(usize, f64)> = (0..vectors.len())
                .filter(|&j| j != q)
                .map(|j| (j, cos(&vectors[q], &vectors[j])))
                .collect();
            exact.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            let truth: HashSet<usize> = exact[..10].iter().map(|e| e.0).collect();
            let found = index.knn(Query::Item(q), 10).unwrap();
            total += found.iter().filter(|e| truth.contains(&e.0)).count() as f64 / 10.0;
        }
        recalls.push(total / vectors.len() as f64);
        let queries: Vec<Query> = (0..vectors.len()).map(Query::Item).collect();
        failures.push(index.failure_rate(&queries, 10).unwrap());
    }
    (
        recalls.iter().sum::<f64>() / recalls.len() as f64,
        failures.iter().sum::<f64>() / failures.len() as f64,
    )
}

fn lsh_sanity() -> Outcome {
    let (recall, failure) = lsh_recall(false);
    let (nn_recall, nn_failure) = lsh_recall(true);
    println!("      non-negative unit vectors: recall@10 {nn_recall:.3}, failure rate {nn_failure:.3}");
    outcome(
        recall >= 0.5,
        format!("Gaussian unit vectors, 10 seeds: mean recall@10 {recall:.3} (need 0.5), failure rate {failure:.3}"),
    )
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("ppr-oracle", ppr_oracle),
        ("gradient-finite-differences", gradient_check),
        ("optimizer-soundness", optimizer_soundness),
        ("label-propagation-oracle", harmonic_oracle),
        ("pseudo-item-algebra", pseudo_item_algebra),
        ("metric-hand-case", metric_hand_case),
        ("end-to-end-directional", directional),
        ("no-op-identities", no_op_identities),
        ("lsh-recall", lsh_sanity),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let result = check();
        failed += (!result.pass) as usize;
        println!(
            "{} {name}: {} [{:.1}s]",
            if result.pass { "PASS" } else { "FAIL" },
            result.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
