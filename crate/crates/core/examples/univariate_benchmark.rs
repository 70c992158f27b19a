//! CDE-split vs MSE-split forests on the univariate mixture simulation.
//!
//! Usage: `cargo run --release -p cdeforest --example univariate_benchmark -- [n_train] [n_trees] [seed] [sigma]`

use std::time::Instant;

use cdeforest::simgen::{gen_univariate, UnivariateSimConfig};
use cdeforest::{cde_loss, Node, BandwidthSpec, Criterion, Forest, ForestDensity, ForestParams, Lattice, TrainingSet};

fn main() -> cdeforest::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).map(|a| a.parse().expect("numeric argument")).collect();
    let n_train = args.first().copied().unwrap_or(1000.0) as usize;
    let n_trees = args.get(1).copied().unwrap_or(100.0) as usize;
    let seed = args.get(2).copied().unwrap_or(0.0) as u64;
    let sigma = args.get(3).copied().unwrap_or(1.0);

    let (x, z) = gen_univariate::<f64>(&UnivariateSimConfig { n: n_train, sigma, seed });
    let (xt, zt) = gen_univariate::<f64>(&UnivariateSimConfig { n: 1000, sigma, seed: seed + 1_000_000 });
    let data = TrainingSet::new(x, z)?;
    let grid = Lattice::uniform(&[(-12.0, 12.0, 1000)])?.points();

    for criterion in [Criterion::Cde, Criterion::Mse] {
        let params = ForestParams { n_trees, node_size: 5, mtry: 4, n_basis: 15, criterion, bootstrap: true, seed };
        let t0 = Instant::now();
        let forest = Forest::fit(&data, &params)?;
        let train = t0.elapsed().as_secs_f64();
        let t1 = Instant::now();
        let est = ForestDensity { forest: &forest, bandwidth: BandwidthSpec::fixed(0.2) };
        let report = cde_loss(&est, xt.view(), zt.view(), grid.view())?;
        let predict = t1.elapsed().as_secs_f64();
        let root_relevant = forest
            .trees()
            .iter()
            .filter(|t| t.root_rule().is_some_and(|r| r.feature < cdeforest::simgen::N_RELEVANT))
            .count();
        let (mut relevant, mut splits) = (0usize, 0usize);
        for tree in forest.trees() {
            for node in tree.nodes() {
                if let Node::Split { rule, .. } = node {
                    splits += 1;
                    relevant += usize::from(rule.feature < cdeforest::simgen::N_RELEVANT);
                }
            }
        }
        println!(
            "{criterion}: loss={:.4} se={:.4} relevant_splits={:.3} relevant_roots={root_relevant}/{n_trees} train_s={train:.2} predict_s={predict:.2}",
            report.loss,
            report.se,
            relevant as f64 / splits as f64
        );
    }
    Ok(())
}
