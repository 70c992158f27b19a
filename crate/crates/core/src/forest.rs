//! Forest training, query weights, and conditional density prediction.

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{rescale_response, BasisSpec, MAX_DIM};
use crate::density::{weighted_kde, BandwidthSpec, DensityEstimate, WeightVector};
use crate::error::{Error, Result};
use crate::scalar::{compensated_sum, Scalar};
use crate::tree::{build_tree, Criterion, Tree, TreeParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub node_size: usize,
    pub mtry: usize,
    pub n_basis: usize,
    pub criterion: Criterion,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            node_size: 5,
            mtry: 1,
            n_basis: 15,
            criterion: Criterion::Cde,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestParams {
    pub fn tree_params(&self) -> TreeParams {
        TreeParams {
            node_size: self.node_size,
            mtry: self.mtry,
            criterion: self.criterion,
            n_basis: self.n_basis,
        }
    }

    /// Checks the parameters against a problem with `p` covariates and `d` response columns.
    pub fn validate(&self, p: usize, d: usize) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::arg("n_trees", "need at least one tree"));
        }
        if self.node_size == 0 {
            return Err(Error::arg("node_size", "must be positive"));
        }
        if self.mtry == 0 || self.mtry > p {
            return Err(Error::arg(
                "mtry",
                format!("must be in 1..={p} for {p} covariates, got {}", self.mtry),
            ));
        }
        if self.n_basis < 2 {
            return Err(Error::arg(
                "n_basis",
                format!("need at least 2 basis functions, got {}", self.n_basis),
            ));
        }
        if d == 0 || d > MAX_DIM {
            return Err(Error::input(
                "z",
                format!("response dimension must be in 1..={MAX_DIM}, got {d}"),
            ));
        }
        if self.criterion == Criterion::Mse && d != 1 {
            return Err(Error::UnsupportedCriterion { dim: d });
        }
        Ok(())
    }
}

/// Covariates, responses, and their column names.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet<T> {
    x: Array2<T>,
    z: Array2<T>,
    covariate_names: Vec<String>,
    response_names: Vec<String>,
}

fn default_names(prefix: &str, count: usize) -> Vec<String> {
    if count == 1 && prefix == "z" {
        return vec!["z".to_string()];
    }
    (1..=count).map(|i| format!("{prefix}{i}")).collect()
}

impl<T: Scalar> TrainingSet<T> {
    /// Columns are named `x1..xp` and `z` (or `z1..zd`).
    pub fn new(x: Array2<T>, z: Array2<T>) -> Result<Self> {
        let cov = default_names("x", x.ncols());
        let resp = default_names("z", z.ncols());
        Self::with_names(x, z, cov, resp)
    }

    pub fn with_names(
        x: Array2<T>,
        z: Array2<T>,
        covariate_names: Vec<String>,
        response_names: Vec<String>,
    ) -> Result<Self> {
        if x.nrows() != z.nrows() {
            return Err(Error::input(
                "z",
                format!("{} response rows for {} covariate rows", z.nrows(), x.nrows()),
            ));
        }
        if x.ncols() == 0 {
            return Err(Error::input("x", "no covariate columns"));
        }
        if covariate_names.len() != x.ncols() {
            return Err(Error::input("covariate_names", "one name per covariate column required"));
        }
        if response_names.len() != z.ncols() {
            return Err(Error::input("response_names", "one name per response column required"));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("x", "covariates must be finite"));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("z", "responses must be finite"));
        }
        Ok(TrainingSet {
            x,
            z,
            covariate_names,
            response_names,
        })
    }

    pub fn x(&self) -> ArrayView2<'_, T> {
        self.x.view()
    }

    pub fn z(&self) -> ArrayView2<'_, T> {
        self.z.view()
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forest<T> {
    pub(crate) params: ForestParams,
    pub(crate) covariate_names: Vec<String>,
    pub(crate) response_names: Vec<String>,
    pub(crate) bounds: Vec<(T, T)>,
    pub(crate) z_train: Array2<T>,
    pub(crate) trees: Vec<Tree<T>>,
}

/// Random stream for tree `index`; independent of how trees are scheduled.
fn tree_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

impl<T: Scalar> Forest<T> {
    /// Trains the forest. Trees are built in parallel on the current rayon pool;
    /// the result does not depend on the number of threads.
    pub fn fit(data: &TrainingSet<T>, params: &ForestParams) -> Result<Self> {
        let n = data.n();
        let (p, d) = (data.x.ncols(), data.z.ncols());
        params.validate(p, d)?;
        if n < 2 {
            return Err(Error::input("x", format!("need at least 2 rows, got {n}")));
        }
        let (z_scaled, bounds) = rescale_response(data.z.view(), None)?;
        let targets = match params.criterion {
            Criterion::Cde => BasisSpec::new(params.n_basis, d)?.split_matrix(z_scaled.view())?,
            Criterion::Mse => z_scaled,
        };
        let tree_params = params.tree_params();
        let x = data.x.view();
        let trees = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = tree_rng(params.seed, t);
                let bootstrap: Vec<usize> = if params.bootstrap {
                    (0..n).map(|_| rng.random_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                build_tree(x, targets.view(), &tree_params, bootstrap, &mut rng)
            })
            .collect();
        Ok(Forest {
            params: *params,
            covariate_names: data.covariate_names.clone(),
            response_names: data.response_names.clone(),
            bounds,
            z_train: data.z.clone(),
            trees,
        })
    }

    pub fn params(&self) -> &ForestParams {
        &self.params
    }

    pub fn trees(&self) -> &[Tree<T>] {
        &self.trees
    }

    pub fn n_covariates(&self) -> usize {
        self.covariate_names.len()
    }

    pub fn n_train(&self) -> usize {
        self.z_train.nrows()
    }

    /// Response dimension.
    pub fn dim(&self) -> usize {
        self.z_train.ncols()
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn response_names(&self) -> &[String] {
        &self.response_names
    }

    /// Training responses in their original units.
    pub fn z_train(&self) -> ArrayView2<'_, T> {
        self.z_train.view()
    }

    /// Per-dimension `(min, max)` used to map responses onto the unit cube.
    pub fn rescale_bounds(&self) -> &[(T, T)] {
        &self.bounds
    }

    fn check_query(&self, x: &[T]) -> Result<()> {
        if x.len() != self.n_covariates() {
            return Err(Error::arg(
                "x",
                format!("expected {} covariates, got {}", self.n_covariates(), x.len()),
            ));
        }
        Ok(())
    }

    /// Forest weights of every training row for the query `x`.
    ///
    /// Each tree gives the rows in the query's leaf weight
    /// `multiplicity / leaf size`; the per-tree vectors are averaged and then
    /// renormalized to sum to one.
    pub fn weights(&self, x: &[T]) -> Result<WeightVector<T>> {
        self.check_query(x)?;
        let mut acc = vec![T::zero(); self.n_train()];
        for tree in &self.trees {
            let members = tree.leaf_members(tree.leaf_of(x));
            if members.is_empty() {
                continue;
            }
            let share = T::one() / T::of_usize(members.len());
            for &i in members {
                acc[i] += share;
            }
        }
        let n_trees = T::of_usize(self.trees.len());
        acc.iter_mut().for_each(|w| *w /= n_trees);
        let total = compensated_sum(acc.iter().copied());
        if !(total > T::zero()) {
            return Err(Error::arg("x", "query reached only empty leaves"));
        }
        Ok(WeightVector::from_normalized_unchecked(
            acc.into_iter().map(|w| w / total).collect(),
        ))
    }

    /// Weighted kernel density estimate of the response at each grid row, given `x`.
    pub fn predict_density(
        &self,
        x: &[T],
        grid: ArrayView2<T>,
        bandwidth: &BandwidthSpec<T>,
    ) -> Result<DensityEstimate<T>> {
        if grid.nrows() == 0 {
            return Err(Error::arg("grid", "grid is empty"));
        }
        let w = self.weights(x)?;
        let bw = bandwidth.resolve(self.z_train.view(), &w)?;
        let mut est = weighted_kde(self.z_train.view(), &w, grid, &bw.h)?;
        est.bandwidth_fallback = bw.fallback;
        Ok(est)
    }
}
