//! Factorizes a small item/tag catalog into non-negative item vectors and
//! prints each item's dominant factors.
//!
//! `cargo run --example embed`

use elixir_core::embed::{nmf_factorize, NmfConfig, TagMatrix};
use elixir_core::model::{Catalog, ItemId};

fn main() -> elixir_core::Result<()> {
    let catalog = Catalog::register(vec![
        (ItemId::new("alien"), vec!["space", "horror", "ship"]),
        (ItemId::new("solaris"), vec!["space", "drama", "ship"]),
        (ItemId::new("the_shining"), vec!["horror", "hotel", "winter"]),
        (ItemId::new("fargo"), vec!["crime", "winter", "comedy"]),
        (ItemId::new("heat"), vec!["crime", "city", "drama"]),
        (ItemId::new("moon"), vec!["space", "drama"]),
    ])?;
    let m = TagMatrix::from_catalog(&catalog)?;
    let out = nmf_factorize(
        &m,
        NmfConfig {
            dim: 3,
            ..Default::default()
        },
    )?;
    println!(
        "{} items x {} tags -> d=3 in {} iterations, squared error {:.4}",
        m.rows(),
        m.cols(),
        out.iterations,
        out.final_objective()
    );
    for (ix, row) in out.vectors.rows().iter().enumerate() {
        let cells: Vec<String> = row.as_slice().iter().map(|x| format!("{x:.3}")).collect();
        println!(
            "{:<12} [{}]  tags: {}",
            catalog.id(ix).to_string(),
            cells.join(", "),
            catalog.tag_names(ix).join(",")
        );
    }
    Ok(())
}
