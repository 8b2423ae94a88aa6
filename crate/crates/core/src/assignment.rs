//! Exact minimum-cost assignment for small square cost matrices.

/// Solves the linear assignment problem on a row-major `k x k` cost matrix.
///
/// Returns `perm` with row `i` assigned to column `perm[i]`, minimizing
/// `Σ cost[i][perm[i]]`. Shortest augmenting path with potentials, `O(k³)`.
pub fn min_cost_assignment(cost: &[f64], k: usize) -> Vec<usize> {
    assert_eq!(cost.len(), k * k, "cost matrix must be k x k");
    if k == 0 {
        return Vec::new();
    }
    // 1-based arrays; index 0 is the virtual root.
    let mut u = vec![0.0; k + 1];
    let mut v = vec![0.0; k + 1];
    let mut col_owner = vec![0usize; k + 1];
    let mut way = vec![0usize; k + 1];
    for row in 1..=k {
        col_owner[0] = row;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; k + 1];
        let mut used = vec![false; k + 1];
        loop {
            used[j0] = true;
            let i0 = col_owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=k {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1) * k + (j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=k {
                if used[j] {
                    u[col_owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if col_owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            col_owner[j0] = col_owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0; k];
    for j in 1..=k {
        perm[col_owner[j] - 1] = j - 1;
    }
    perm
}
