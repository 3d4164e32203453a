//! Rank machinery: probability integral transform, Kendall's τ_b, and the
//! rank-reordering coupling step.

use crate::simulate::PathEnsemble;
use crate::stats::argsort;
use crate::{Error, Result};

/// Column-major data matrix: `d` columns of equal length.
pub type Columns = Vec<Vec<f64>>;

/// Converts each column to pseudo-uniforms `rank/(n+1)`, with average ranks
/// for ties. Outputs stay strictly inside (0,1).
pub fn pit_transform(columns: &[Vec<f64>]) -> Result<Columns> {
    columns
        .iter()
        .map(|col| {
            if col.len() < 2 {
                return Err(Error::invalid("PIT needs at least 2 rows per column"));
            }
            Ok(average_ranks(col)
                .into_iter()
                .map(|r| r / (col.len() as f64 + 1.0))
                .collect())
        })
        .collect()
}

/// 1-based ranks with ties replaced by the group average.
fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let order = argsort(xs);
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        // positions i..=j (0-based) hold equal values; average of 1-based ranks
        let avg = (i + j + 2) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Tie-adjusted Kendall rank correlation τ_b, computed in O(n log n) by
/// inversion counting.
pub fn kendall_tau(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::invalid("kendall_tau needs equal-length inputs"));
    }
    let n = u.len();
    if n < 2 {
        return Err(Error::invalid("kendall_tau needs at least 2 points"));
    }
    // Sort pairs by (u, v).
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| u[a].total_cmp(&u[b]).then(v[a].total_cmp(&v[b])));
    let y: Vec<f64> = idx.iter().map(|&i| v[i]).collect();

    let tie_pairs = |xs: &[f64]| -> f64 {
        let mut sorted = xs.to_vec();
        sorted.sort_unstable_by(f64::total_cmp);
        let mut total = 0.0;
        let mut run = 1.0;
        for w in sorted.windows(2) {
            if w[0] == w[1] {
                run += 1.0;
            } else {
                total += run * (run - 1.0) / 2.0;
                run = 1.0;
            }
        }
        total + run * (run - 1.0) / 2.0
    };

    let n0 = n as f64 * (n as f64 - 1.0) / 2.0;
    let xtie = tie_pairs(u);
    let ytie = tie_pairs(v);
    if xtie == n0 || ytie == n0 {
        return Err(Error::numeric("kendall_tau undefined for a constant column"));
    }
    // Joint ties within the (u, v)-sorted order.
    let mut ntie = 0.0;
    {
        let mut run = 1.0;
        for w in idx.windows(2) {
            if u[w[0]] == u[w[1]] && v[w[0]] == v[w[1]] {
                run += 1.0;
            } else {
                ntie += run * (run - 1.0) / 2.0;
                run = 1.0;
            }
        }
        ntie += run * (run - 1.0) / 2.0;
    }
    let discordant = count_inversions(&y);
    let con_minus_dis = n0 - xtie - ytie + ntie - 2.0 * discordant;
    Ok(con_minus_dis / ((n0 - xtie) * (n0 - ytie)).sqrt())
}

/// Counts strict inversions (`y_i > y_j` for `i < j`) by merge sort.
fn count_inversions(y: &[f64]) -> f64 {
    fn merge(buf: &mut Vec<f64>, xs: &mut [f64]) -> f64 {
        let n = xs.len();
        if n < 2 {
            return 0.0;
        }
        let mid = n / 2;
        let mut inv = merge(buf, &mut xs[..mid]) + merge(buf, &mut xs[mid..]);
        buf.clear();
        let (mut i, mut j) = (0, mid);
        while i < mid && j < n {
            if xs[i] <= xs[j] {
                buf.push(xs[i]);
                i += 1;
            } else {
                // xs[i] > xs[j]: everything left in the first half inverts.
                inv += (mid - i) as f64;
                buf.push(xs[j]);
                j += 1;
            }
        }
        buf.extend_from_slice(&xs[i..mid]);
        let merged = buf.len();
        xs[..merged].copy_from_slice(buf);
        inv
    }
    let mut work = y.to_vec();
    let mut buf = Vec::with_capacity(work.len());
    merge(&mut buf, &mut work)
}

/// Permutes `(value, tag)` pairs so the output ranks match the ranks of the
/// uniform column: the position holding the r-th smallest `u` receives the
/// r-th smallest value. Ties keep original time order (stable argsort).
fn reorder_to_ranks(values: &[f64], tags: &[usize], u: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let by_value = argsort(values);
    let by_u = argsort(u);
    let mut out_v = vec![0.0; values.len()];
    let mut out_t = vec![0usize; values.len()];
    for (r, &pos) in by_u.iter().enumerate() {
        out_v[pos] = values[by_value[r]];
        out_t[pos] = tags[by_value[r]];
    }
    (out_v, out_t)
}

/// Rank-reorders every path of every asset ensemble against the same uniform
/// matrix (one column per asset). The multiset of growth values per path is
/// unchanged; states travel with their growth value; episode indices keep
/// referring to the generation-order time axis.
pub fn rank_reorder(ensembles: &[PathEnsemble], u_columns: &[Vec<f64>]) -> Result<Vec<PathEnsemble>> {
    if ensembles.len() != u_columns.len() {
        return Err(Error::invalid(format!(
            "{} ensembles but {} uniform columns",
            ensembles.len(),
            u_columns.len()
        )));
    }
    ensembles
        .iter()
        .zip(u_columns)
        .map(|(ens, col)| {
            if ens.horizon != col.len() {
                return Err(Error::invalid(format!(
                    "path length {} does not match u rows {}",
                    ens.horizon,
                    col.len()
                )));
            }
            let mut out = ens.clone();
            for path in &mut out.paths {
                let (g, s) = reorder_to_ranks(&path.growth, &path.states, col);
                path.growth = g;
                path.states = s;
            }
            Ok(out)
        })
        .collect()
}

/// Reorders a single path per asset in place (used by the per-path coupling
/// loop, where each path gets its own copula sample).
pub(crate) fn reorder_path(growth: &mut Vec<f64>, states: &mut Vec<usize>, u: &[f64]) {
    let (g, s) = reorder_to_ranks(growth, states, u);
    *growth = g;
    *states = s;
}
