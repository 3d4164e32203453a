//! Canonical vine (C-vine) copulas: a d-dimensional dependence structure
//! factored into d(d−1)/2 bivariate copulas, each selected by AIC from the
//! five candidate families. The root variable of tree 1 is the one with the
//! largest sum of absolute pairwise Kendall τ (ties: lowest column index);
//! deeper trees condition through h-function pseudo-observations.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::copula::{fit_bivariate_by_aic, h_function, h_inverse, BivariateCopula};
use super::rank::kendall_tau;
use crate::{Error, Result};

/// One fitted pair-copula edge.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct VineEdge {
    /// Original column indices of the conditioned pair (root, other).
    pub conditioned: (usize, usize),
    /// Original column indices of the conditioning set.
    pub conditioning: Vec<usize>,
    pub copula: BivariateCopula,
}

/// A fitted canonical vine.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CVine {
    /// Vine position -> original column index (position k is the root of
    /// tree k+1).
    pub order: Vec<usize>,
    /// `trees[k]` holds the edges of tree k+1, pairing the root at vine
    /// position k with vine positions k+1..d.
    pub trees: Vec<Vec<VineEdge>>,
}

impl CVine {
    pub fn dim(&self) -> usize {
        self.order.len()
    }

    pub fn n_edges(&self) -> usize {
        self.trees.iter().map(|t| t.len()).sum()
    }

    fn edge(&self, tree: usize, position: usize) -> &VineEdge {
        &self.trees[tree][position - tree - 1]
    }
}

/// Fits a C-vine to pseudo-uniform columns.
pub fn fit_cvine(u_columns: &[Vec<f64>]) -> Result<CVine> {
    let d = u_columns.len();
    if d < 2 {
        return Err(Error::invalid("need at least 2 assets"));
    }
    let n = u_columns[0].len();
    if u_columns.iter().any(|c| c.len() != n) {
        return Err(Error::invalid("columns must have equal length"));
    }
    if n < 30 {
        return Err(Error::invalid("need at least 30 rows"));
    }

    // Root ordering by descending sum of |tau|; ties to the lowest index.
    let mut tau = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in i + 1..d {
            let t = kendall_tau(&u_columns[i], &u_columns[j])?;
            tau[i][j] = t;
            tau[j][i] = t;
        }
    }
    let mut order: Vec<usize> = (0..d).collect();
    let score = |i: usize| -> f64 { (0..d).filter(|&j| j != i).map(|j| tau[i][j].abs()).sum() };
    order.sort_by(|&a, &b| score(b).total_cmp(&score(a)).then(a.cmp(&b)));

    // Pseudo-observations in vine order, conditioned as trees deepen.
    let mut v: Vec<Vec<f64>> = order.iter().map(|&i| u_columns[i].clone()).collect();
    let mut trees = Vec::with_capacity(d - 1);
    for k in 0..d - 1 {
        let mut edges = Vec::with_capacity(d - 1 - k);
        for j in k + 1..d {
            let copula = fit_bivariate_by_aic(&v[k], &v[j])?;
            // Propagate u_{j | 1..k+1} = h(u_{j|1..k} | u_{k|1..k}).
            let propagated: Result<Vec<f64>> = v[j]
                .iter()
                .zip(&v[k])
                .map(|(&uj, &uk)| {
                    h_function(
                        &copula,
                        uj.clamp(1e-10, 1.0 - 1e-10),
                        uk.clamp(1e-10, 1.0 - 1e-10),
                    )
                })
                .collect();
            edges.push(VineEdge {
                conditioned: (order[k], order[j]),
                conditioning: order[..k].to_vec(),
                copula,
            });
            v[j] = propagated?;
        }
        trees.push(edges);
    }
    Ok(CVine { order, trees })
}

/// Draws `t` rows from the vine by sequential inversion of h-functions,
/// returned column-major in the original column order.
pub fn sample_cvine(vine: &CVine, t: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let d = vine.dim();
    let mut out = vec![vec![0.0; t]; d];
    let mut vv = vec![vec![0.0; d]; d];
    for row in 0..t {
        let w: Vec<f64> = (0..d)
            .map(|_| rng.gen::<f64>().clamp(1e-12, 1.0 - 1e-12))
            .collect();
        vv[0][0] = w[0];
        out[vine.order[0]][row] = w[0];
        for i in 1..d {
            let mut acc = w[i];
            for k in (0..i).rev() {
                acc = h_inverse(&vine.edge(k, i).copula, acc, vv[k][k])
                    .expect("interior arguments by construction");
            }
            out[vine.order[i]][row] = acc;
            vv[i][0] = acc;
            if i < d - 1 {
                for j in 0..i {
                    vv[i][j + 1] = h_function(&vine.edge(j, i).copula, vv[i][j], vv[j][j])
                        .expect("interior arguments by construction");
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dependence::copula::{BivariateCopula, CopulaFamily};
    use crate::dependence::rank::pit_transform;
    use crate::special::norm_cdf;
    use rand::Rng;
    use rand_distr::StandardNormal;

    /// Trivariate Gaussian copula sampler with a known correlation matrix.
    fn gaussian_data(n: usize, seed: u64) -> (Vec<Vec<f64>>, [[f64; 3]; 3]) {
        let sigma = [[1.0, 0.7, 0.5], [0.7, 1.0, 0.4], [0.5, 0.4, 1.0]];
        let m = nalgebra::DMatrix::from_fn(3, 3, |i, j| sigma[i][j]);
        let l = m.cholesky().unwrap().l();
        let mut rng = crate::rng::stream(seed, &[0]);
        let mut cols = vec![Vec::with_capacity(n); 3];
        for _ in 0..n {
            let z: Vec<f64> = (0..3).map(|_| rng.sample(StandardNormal)).collect();
            for (j, col) in cols.iter_mut().enumerate() {
                let x: f64 = (0..=j).map(|k| l[(j, k)] * z[k]).sum();
                col.push(norm_cdf(x));
            }
        }
        (cols, sigma)
    }

    #[test]
    fn two_asset_vine_is_a_single_edge() {
        let (cols, _) = gaussian_data(2000, 1);
        let u = pit_transform(&cols[..2].to_vec()).unwrap();
        let vine = fit_cvine(&u).unwrap();
        assert_eq!(vine.dim(), 2);
        assert_eq!(vine.n_edges(), 1);
        let direct = fit_bivariate_by_aic(&u[vine.order[0]], &u[vine.order[1]]).unwrap();
        assert_eq!(vine.trees[0][0].copula, direct);
    }

    #[test]
    fn three_asset_tree_one_recovers_pairwise_dependence() {
        let (cols, sigma) = gaussian_data(10_000, 2);
        let u = pit_transform(&cols).unwrap();
        let vine = fit_cvine(&u).unwrap();
        // Column 0 has the largest |tau| sum, so it roots tree 1.
        assert_eq!(vine.order[0], 0);
        assert_eq!(vine.n_edges(), 3);
        for edge in &vine.trees[0] {
            let (root, other) = edge.conditioned;
            let want = sigma[root][other];
            assert!(
                (edge.copula.theta - want).abs() < 0.05,
                "edge ({root},{other}): rho {} vs {want}",
                edge.copula.theta
            );
        }
        assert!(vine.trees[1][0].conditioning == vec![vine.order[0]]);
    }

    #[test]
    fn vine_sampling_reproduces_dependence() {
        let (cols, _) = gaussian_data(8_000, 3);
        let u = pit_transform(&cols).unwrap();
        let vine = fit_cvine(&u).unwrap();
        let mut rng = crate::rng::stream(9, &[0]);
        let sampled = sample_cvine(&vine, 8_000, &mut rng);
        for i in 0..3 {
            for j in i + 1..3 {
                let tau_data = kendall_tau(&u[i], &u[j]).unwrap();
                let tau_sim = kendall_tau(&sampled[i], &sampled[j]).unwrap();
                assert!(
                    (tau_data - tau_sim).abs() < 0.04,
                    "pair ({i},{j}): tau {tau_data} vs {tau_sim}"
                );
            }
        }
    }

    #[test]
    fn independence_vine_samples_independently() {
        let edges = |conditioned: (usize, usize), conditioning: Vec<usize>| VineEdge {
            conditioned,
            conditioning,
            copula: BivariateCopula::new(CopulaFamily::Gaussian, 0.0, None).unwrap(),
        };
        let vine = CVine {
            order: vec![0, 1, 2],
            trees: vec![
                vec![edges((0, 1), vec![]), edges((0, 2), vec![])],
                vec![edges((1, 2), vec![0])],
            ],
        };
        let mut rng = crate::rng::stream(10, &[0]);
        let cols = sample_cvine(&vine, 10_000, &mut rng);
        let se = (2.0f64 * (2.0 * 10_000.0 + 5.0) / (9.0 * 10_000.0 * 9_999.0)).sqrt();
        for i in 0..3 {
            for j in i + 1..3 {
                let tau = kendall_tau(&cols[i], &cols[j]).unwrap();
                assert!(tau.abs() < 3.0 * se, "pair ({i},{j}): tau {tau}");
            }
        }
    }

    #[test]
    fn sampled_marginals_are_uniform() {
        let (cols, _) = gaussian_data(1_000, 4);
        let u = pit_transform(&cols).unwrap();
        let vine = fit_cvine(&u).unwrap();
        let mut rng = crate::rng::stream(11, &[0]);
        let sampled = sample_cvine(&vine, 5_000, &mut rng);
        let grid: Vec<f64> = (1..5_000).map(|i| i as f64 / 5_000.0).collect();
        for col in &sampled {
            let r = crate::validate::ks_two_sample(col, &grid).unwrap();
            assert!(r.p_value > 0.01, "marginal not uniform: p = {}", r.p_value);
        }
    }
}
