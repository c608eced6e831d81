//! Total variation and Wasserstein distances at desk scale.
//!
//! Three exact routes: quantile coupling for distributions on the line,
//! a transportation-simplex LP for small finite supports, and the
//! mean-difference formula for equal-covariance Gaussians.

use crate::error::Error;
use crate::markov::{DiscreteDistribution, GaussianDistribution};
use crate::Result;

/// Total variation `sup_A |μ(A) - ν(A)| = ½ Σ|μ - ν|`.
pub fn tv_distance(mu: &[f64], nu: &[f64]) -> Result<f64> {
    if mu.len() != nu.len() {
        return Err(Error::DimensionMismatch("TV lengths differ".into()));
    }
    Ok(0.5 * mu.iter().zip(nu).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// A point on the real line with mass, for quantile couplings.
fn sorted_atoms(probs: &[f64], coords: &[f64]) -> Vec<(f64, f64)> {
    let mut atoms: Vec<(f64, f64)> = coords
        .iter()
        .zip(probs)
        .filter(|(_, p)| **p > 0.0)
        .map(|(x, p)| (*x, *p))
        .collect();
    atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite coords"));
    atoms
}

/// `W_p^p` of two distributions on the line via the quantile coupling,
/// which is optimal in one dimension for every `p ≥ 1`.
fn wp_pow_1d(mu: &[(f64, f64)], nu: &[(f64, f64)], p: u32) -> f64 {
    let mut i = 0;
    let mut j = 0;
    let mut mass_i = mu[0].1;
    let mut mass_j = nu[0].1;
    let mut total = 0.0;
    loop {
        let m = mass_i.min(mass_j);
        let gap = (mu[i].0 - nu[j].0).abs();
        total += m * gap.powi(p as i32);
        mass_i -= m;
        mass_j -= m;
        if mass_i <= 1e-15 {
            i += 1;
            if i == mu.len() {
                break;
            }
            mass_i = mu[i].1;
        }
        if mass_j <= 1e-15 {
            j += 1;
            if j == nu.len() {
                break;
            }
            mass_j = nu[j].1;
        }
    }
    total
}

/// 1-Wasserstein distance of two finite distributions with 1-d coords.
pub fn w1_discrete_1d(
    mu: &DiscreteDistribution,
    nu: &DiscreteDistribution,
    coords: &[Vec<f64>],
) -> Result<f64> {
    check_coords_1d(mu, nu, coords)?;
    let xs: Vec<f64> = coords.iter().map(|c| c[0]).collect();
    let a = sorted_atoms(mu.probs(), &xs);
    let b = sorted_atoms(nu.probs(), &xs);
    Ok(wp_pow_1d(&a, &b, 1))
}

/// 2-Wasserstein distance (not squared) of two finite distributions with
/// 1-d coords, via the quantile coupling.
pub fn w2_discrete_1d(
    mu: &DiscreteDistribution,
    nu: &DiscreteDistribution,
    coords: &[Vec<f64>],
) -> Result<f64> {
    check_coords_1d(mu, nu, coords)?;
    let xs: Vec<f64> = coords.iter().map(|c| c[0]).collect();
    let a = sorted_atoms(mu.probs(), &xs);
    let b = sorted_atoms(nu.probs(), &xs);
    Ok(wp_pow_1d(&a, &b, 2).sqrt())
}

fn check_coords_1d(
    mu: &DiscreteDistribution,
    nu: &DiscreteDistribution,
    coords: &[Vec<f64>],
) -> Result<()> {
    if mu.len() != nu.len() || coords.len() != mu.len() {
        return Err(Error::DimensionMismatch("distribution/coords lengths differ".into()));
    }
    if coords.iter().any(|c| c.len() != 1) {
        return Err(Error::UnsupportedTransport("quantile coupling needs 1-d coords".into()));
    }
    Ok(())
}

/// `W_2` of two equal-covariance Gaussians: `‖m₁ - m₂‖` (the Bures term
/// vanishes).
pub fn w2_gaussian_equal_cov(a: &GaussianDistribution, b: &GaussianDistribution) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch("Gaussian dims differ".into()));
    }
    let d = a.dim();
    for i in 0..d {
        for j in 0..d {
            if (a.cov()[i][j] - b.cov()[i][j]).abs() > 1e-10 {
                return Err(Error::UnsupportedTransport(
                    "Gaussian W2 shortcut needs equal covariances".into(),
                ));
            }
        }
    }
    let sq: f64 = (0..d).map(|i| (a.mean()[i] - b.mean()[i]).powi(2)).sum();
    Ok(sq.sqrt())
}

/// Exact optimal-transport cost for small finite supports by the
/// transportation simplex (MODI method). `cost[i][j]` is the unit cost of
/// moving mass from source atom `i` to sink atom `j`.
pub fn transport_lp(supply: &[f64], demand: &[f64], cost: &[Vec<f64>]) -> Result<f64> {
    let n = supply.len();
    let m = demand.len();
    if cost.len() != n || cost.iter().any(|row| row.len() != m) {
        return Err(Error::DimensionMismatch("cost matrix shape".into()));
    }
    let total_supply: f64 = supply.iter().sum();
    let total_demand: f64 = demand.iter().sum();
    if (total_supply - total_demand).abs() > 1e-9 {
        return Err(Error::UnsupportedTransport(format!(
            "unbalanced problem: supply {total_supply} vs demand {total_demand}"
        )));
    }
    if n * m > 10_000 {
        return Err(Error::UnsupportedTransport("LP route is for small supports".into()));
    }

    // North-west corner start; keep n+m-1 basic cells, zero-flow allowed.
    let mut flow = vec![vec![0.0f64; m]; n];
    let mut basis = vec![vec![false; m]; n];
    {
        let mut s: Vec<f64> = supply.to_vec();
        let mut d: Vec<f64> = demand.to_vec();
        let (mut i, mut j) = (0usize, 0usize);
        let mut placed = 0usize;
        while placed < n + m - 1 {
            let q = s[i].min(d[j]);
            flow[i][j] = q;
            basis[i][j] = true;
            placed += 1;
            s[i] -= q;
            d[j] -= q;
            if i + 1 == n && j + 1 == m {
                break;
            }
            // Tie-break deterministically toward rows to keep a tree basis.
            if s[i] <= d[j] + 0.0 && i + 1 < n {
                i += 1;
            } else {
                j += 1;
            }
        }
    }

    for _round in 0..10_000 {
        // Duals from u_i + v_j = c_ij on the basis tree.
        let mut u = vec![f64::NAN; n];
        let mut v = vec![f64::NAN; m];
        u[0] = 0.0;
        let mut changed = true;
        while changed {
            changed = false;
            for i in 0..n {
                for j in 0..m {
                    if !basis[i][j] {
                        continue;
                    }
                    if !u[i].is_nan() && v[j].is_nan() {
                        v[j] = cost[i][j] - u[i];
                        changed = true;
                    } else if u[i].is_nan() && !v[j].is_nan() {
                        u[i] = cost[i][j] - v[j];
                        changed = true;
                    }
                }
            }
        }
        if u.iter().any(|x| x.is_nan()) || v.iter().any(|x| x.is_nan()) {
            return Err(Error::UnsupportedTransport("degenerate basis lost connectivity".into()));
        }

        // Most negative reduced cost enters the basis.
        let mut best = (0usize, 0usize);
        let mut best_red = -1e-12;
        for i in 0..n {
            for j in 0..m {
                if basis[i][j] {
                    continue;
                }
                let red = cost[i][j] - u[i] - v[j];
                if red < best_red {
                    best_red = red;
                    best = (i, j);
                }
            }
        }
        if best_red >= -1e-12 {
            let mut total = 0.0;
            for i in 0..n {
                for j in 0..m {
                    total += flow[i][j] * cost[i][j];
                }
            }
            return Ok(total);
        }

        // Unique cycle created by the entering cell within the basis tree.
        let cycle = find_cycle(&basis, best, n, m).ok_or_else(|| {
            Error::UnsupportedTransport("no pivot cycle found; numerically degenerate".into())
        })?;
        let mut theta = f64::INFINITY;
        let mut leave = None;
        for (idx, &(i, j)) in cycle.iter().enumerate() {
            if idx % 2 == 1 && flow[i][j] < theta {
                theta = flow[i][j];
                leave = Some((i, j));
            }
        }
        let (li, lj) = leave.expect("odd cycle positions exist");
        for (idx, &(i, j)) in cycle.iter().enumerate() {
            if idx % 2 == 0 {
                flow[i][j] += theta;
            } else {
                flow[i][j] -= theta;
            }
        }
        basis[best.0][best.1] = true;
        basis[li][lj] = false;
        flow[li][lj] = 0.0;
    }
    Err(Error::UnsupportedTransport("transportation simplex did not converge".into()))
}

/// Alternating row/column path from the entering cell back to itself through
/// basic cells. Returns the cycle as cell coordinates starting with the
/// entering cell.
fn find_cycle(
    basis: &[Vec<bool>],
    enter: (usize, usize),
    n: usize,
    m: usize,
) -> Option<Vec<(usize, usize)>> {
    // DFS over states (cell, direction), alternating between moves along a
    // row and moves along a column.
    fn dfs(
        basis: &[Vec<bool>],
        enter: (usize, usize),
        cur: (usize, usize),
        row_move: bool,
        path: &mut Vec<(usize, usize)>,
        n: usize,
        m: usize,
    ) -> bool {
        if row_move {
            for j in 0..m {
                if j == cur.1 {
                    continue;
                }
                if (cur.0, j) == enter && path.len() >= 3 {
                    return (path.len() % 2) == 0;
                }
                if basis[cur.0][j] && !path.contains(&(cur.0, j)) {
                    path.push((cur.0, j));
                    if dfs(basis, enter, (cur.0, j), false, path, n, m) {
                        return true;
                    }
                    path.pop();
                }
            }
        } else {
            for i in 0..n {
                if i == cur.0 {
                    continue;
                }
                if (i, cur.1) == enter && path.len() >= 3 {
                    return (path.len() % 2) == 0;
                }
                if basis[i][cur.1] && !path.contains(&(i, cur.1)) {
                    path.push((i, cur.1));
                    if dfs(basis, enter, (i, cur.1), true, path, n, m) {
                        return true;
                    }
                    path.pop();
                }
            }
        }
        false
    }
    let mut path = vec![enter];
    if dfs(basis, enter, enter, true, &mut path, n, m) {
        return Some(path);
    }
    let mut path = vec![enter];
    if dfs(basis, enter, enter, false, &mut path, n, m) {
        return Some(path);
    }
    None
}

/// `W_2` of two finite distributions embedded in `R^m`, by the exact LP.
pub fn w2_discrete_lp(
    mu: &DiscreteDistribution,
    nu: &DiscreteDistribution,
    coords_mu: &[Vec<f64>],
    coords_nu: &[Vec<f64>],
) -> Result<f64> {
    if coords_mu.len() != mu.len() || coords_nu.len() != nu.len() {
        return Err(Error::DimensionMismatch("coords vs distributions".into()));
    }
    let cost: Vec<Vec<f64>> = coords_mu
        .iter()
        .map(|a| {
            coords_nu
                .iter()
                .map(|b| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
                .collect()
        })
        .collect();
    Ok(transport_lp(mu.probs(), nu.probs(), &cost)?.max(0.0).sqrt())
}
