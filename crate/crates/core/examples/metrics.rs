//! Ranking metrics on a hand-checkable case and a paired significance test.
//!
//! `cargo run --example metrics`

use std::collections::HashSet;

use elixir_core::metrics::{average_precision_at_k, ndcg_at_k, precision_at_k};
use elixir_core::stats::wilcoxon_signed_rank;

fn main() {
    let ranked = ["a", "b", "c", "d", "e"];
    let relevant: HashSet<&str> = ["a", "c"].into_iter().collect();
    println!("ranked {ranked:?}, relevant a and c");
    println!("P@5    {:.4}", precision_at_k(&ranked, &relevant, 5));
    println!("MAP@5  {:.4}", average_precision_at_k(&ranked, &relevant, 5));
    println!("nDCG@5 {:.4}", ndcg_at_k(&ranked, &relevant, 5));

    let baseline = [0.2, 0.4, 0.4, 0.6, 0.2, 0.0, 0.4, 0.2, 0.6, 0.4];
    let improved = [0.4, 0.4, 0.6, 0.8, 0.4, 0.2, 0.4, 0.6, 0.6, 0.6];
    let test = wilcoxon_signed_rank(&improved, &baseline);
    println!(
        "Wilcoxon: W+ = {}, n = {}, p = {:.4} ({})",
        test.w_plus,
        test.n,
        test.p_value,
        if test.exact { "exact" } else { "normal approximation" }
    );
}
