//! Exact balanced transportation problem via the transportation simplex
//! (network simplex specialised to a complete bipartite graph).

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct TransportSolution {
    pub value: f64,
    /// Basic cells `(row, col, flow)`; zero flows may appear (degenerate basis).
    pub flows: Vec<(usize, usize, f64)>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub pivots: usize,
}

const RC_TOL: f64 = 1e-13;

/// Solves `min Σ c_ij x_ij` with row sums `supply` and column sums `demand`.
/// `cost` is row-major `m × n`. Total masses must agree within 1e-9.
pub fn solve(supply: &[f64], demand: &[f64], cost: &[f64]) -> Result<TransportSolution> {
    let m = supply.len();
    let n = demand.len();
    if m == 0 || n == 0 || cost.len() != m * n {
        return Err(Error::InvalidArgument("transport dimensions".into()));
    }
    let ts: f64 = supply.iter().sum();
    let td: f64 = demand.iter().sum();
    if (ts - td).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("unbalanced masses {ts} vs {td}")));
    }
    // rescale demand so the masses agree to rounding
    let scale = if td > 0.0 { ts / td } else { 1.0 };
    let mut rb: Vec<f64> = demand.iter().map(|d| d * scale).collect();
    let mut ra = supply.to_vec();

    let nodes = m + n;
    // basic cells: row, col, flow
    let mut cells: Vec<(usize, usize, f64)> = Vec::with_capacity(nodes);
    let (mut i, mut j) = (0, 0);
    loop {
        let x = ra[i].min(rb[j]);
        cells.push((i, j, x));
        ra[i] -= x;
        rb[j] -= x;
        if i == m - 1 && j == n - 1 {
            break;
        }
        if i == m - 1 {
            j += 1;
        } else if j == n - 1 || ra[i] <= rb[j] {
            i += 1;
        } else {
            j += 1;
        }
    }
    debug_assert_eq!(cells.len(), nodes - 1);

    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nodes];
    for (e, &(r, c, _)) in cells.iter().enumerate() {
        adj[r].push(e);
        adj[m + c].push(e);
    }

    let mut pot = vec![0.0f64; nodes];
    let mut parent_edge = vec![usize::MAX; nodes];
    let mut depth = vec![0usize; nodes];
    let mut queue = Vec::with_capacity(nodes);
    let mut seen = vec![false; nodes];

    let total = m * n;
    let block = ((total as f64).sqrt() as usize).max(64).min(total);
    let mut start = 0usize;
    let mut pivots = 0usize;
    let max_pivots = 200 * total.max(nodes * nodes).min(50_000_000) + 1000;

    loop {
        // potentials from the tree; node 0 is the root
        seen.iter_mut().for_each(|s| *s = false);
        queue.clear();
        queue.push(0);
        seen[0] = true;
        pot[0] = 0.0;
        parent_edge[0] = usize::MAX;
        depth[0] = 0;
        let mut h = 0;
        while h < queue.len() {
            let a = queue[h];
            h += 1;
            for &e in &adj[a] {
                let (r, c, _) = cells[e];
                let (other, val) = if a < m {
                    (m + c, cost[r * n + c] - pot[a])
                } else {
                    (r, cost[r * n + c] - pot[a])
                };
                if !seen[other] {
                    seen[other] = true;
                    pot[other] = val;
                    parent_edge[other] = e;
                    depth[other] = depth[a] + 1;
                    queue.push(other);
                }
            }
        }
        debug_assert_eq!(queue.len(), nodes);

        // block pricing
        let mut best: Option<(usize, f64)> = None;
        let mut scanned = 0;
        let mut k = start;
        while scanned < total {
            let end = (scanned + block).min(total);
            while scanned < end {
                let r = k / n;
                let c = k % n;
                let rc = cost[k] - pot[r] - pot[m + c];
                let tol = RC_TOL * (1.0 + cost[k].abs());
                if rc < -tol && best.is_none_or(|(_, b)| rc < b) {
                    best = Some((k, rc));
                }
                k += 1;
                if k == total {
                    k = 0;
                }
                scanned += 1;
            }
            if best.is_some() {
                break;
            }
        }
        start = k;
        let Some((enter, _)) = best else { break };
        pivots += 1;
        if pivots > max_pivots {
            return Err(Error::Experiment("transport simplex did not converge".into()));
        }

        let er = enter / n;
        let ec = enter % n;
        // path in the tree between column node and row node
        let mut a = m + ec;
        let mut b = er;
        let mut from_col: Vec<usize> = Vec::new();
        let mut from_row: Vec<usize> = Vec::new();
        while depth[a] > depth[b] {
            let e = parent_edge[a];
            from_col.push(e);
            a = other_end(&cells, e, a, m);
        }
        while depth[b] > depth[a] {
            let e = parent_edge[b];
            from_row.push(e);
            b = other_end(&cells, e, b, m);
        }
        while a != b {
            let e = parent_edge[a];
            from_col.push(e);
            a = other_end(&cells, e, a, m);
            let e = parent_edge[b];
            from_row.push(e);
            b = other_end(&cells, e, b, m);
        }
        // cycle: enter(+), then path from the column node back to the row node
        from_row.reverse();
        let path: Vec<usize> = from_col.into_iter().chain(from_row).collect();
        let mut theta = f64::INFINITY;
        let mut leave_pos = usize::MAX;
        for (pos, &e) in path.iter().enumerate() {
            if pos % 2 == 0 && cells[e].2 < theta {
                theta = cells[e].2;
                leave_pos = pos;
            }
        }
        for (pos, &e) in path.iter().enumerate() {
            if pos % 2 == 0 {
                cells[e].2 -= theta;
            } else {
                cells[e].2 += theta;
            }
        }
        let leave = path[leave_pos];
        let (lr, lc, _) = cells[leave];
        remove_edge(&mut adj[lr], leave);
        remove_edge(&mut adj[m + lc], leave);
        cells[leave] = (er, ec, theta);
        adj[er].push(leave);
        adj[m + ec].push(leave);
    }

    let value = cells.iter().map(|&(r, c, x)| x * cost[r * n + c]).sum::<f64>();
    Ok(TransportSolution {
        value,
        flows: cells,
        u: pot[..m].to_vec(),
        v: pot[m..].to_vec(),
        pivots,
    })
}

fn other_end(cells: &[(usize, usize, f64)], e: usize, node: usize, m: usize) -> usize {
    let (r, c, _) = cells[e];
    if node < m {
        m + c
    } else {
        r
    }
}

fn remove_edge(list: &mut Vec<usize>, e: usize) {
    let pos = list.iter().position(|&x| x == e).expect("edge in adjacency");
    list.swap_remove(pos);
}
