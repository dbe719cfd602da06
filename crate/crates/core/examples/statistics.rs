//! The analysis toolbox on synthetic data: exact Wilcoxon, PCA, factor
//! analysis with varimax and a pruned tag co-occurrence graph.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use robovoice::analysis::{
    cooccurrence_graph, factor_analysis, pca, wilcoxon_signed_rank, FaOptions, Standardize, WilcoxonMode,
};

fn main() -> robovoice::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let z = Normal::new(0.0, 1.0).unwrap();

    let before: Vec<f64> = (0..15).map(|_| rng.random_range(1..=5) as f64).collect();
    let after: Vec<f64> = before.iter().map(|b| (b + rng.random_range(0..=2) as f64).min(5.0)).collect();
    let w = wilcoxon_signed_rank(&after, &before, WilcoxonMode::Auto)?;
    println!("wilcoxon: {w:?}");

    // six ratings driven by two latent traits
    let labels: Vec<String> = ["loud", "harsh", "aggressive", "cute", "soft", "friendly"].map(String::from).to_vec();
    let rows: Vec<Vec<f64>> = (0..500)
        .map(|_| {
            let (a, b): (f64, f64) = (z.sample(&mut rng), z.sample(&mut rng));
            (0..6).map(|v| if v < 3 { a } else { b } * 0.85 + 0.5 * z.sample(&mut rng)).collect()
        })
        .collect();
    let p = pca(&rows, Some(3), Standardize::ZScore)?;
    println!("pca explained variance ratio {:.3?}", p.explained_variance_ratio);

    let fa = factor_analysis(&rows, &labels, &FaOptions::default())?;
    println!("factor analysis kept {} factors", fa.k);
    for (i, l) in labels.iter().enumerate() {
        let row: Vec<String> = (0..fa.k).map(|j| format!("{:+.2}", fa.loadings.get(i, j).unwrap_or(0.0))).collect();
        println!("  {l:<11} {}", row.join(" "));
    }

    let sets: Vec<BTreeSet<String>> = [
        &["metallic", "cold"][..],
        &["metallic", "cold", "buzzy"],
        &["metallic", "cold"],
        &["metallic", "cold", "cute"],
        &["cute", "soft"],
    ]
    .iter()
    .map(|s| s.iter().map(|t| t.to_string()).collect())
    .collect();
    print!("co-occurrence edges (threshold 4):\n{}", cooccurrence_graph(&sets, 4).edges_csv());
    Ok(())
}
