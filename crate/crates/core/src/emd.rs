//! Earth Mover's Distance as a transportation problem.
//!
//! The solver sends the maximum transportable mass from supply bins to demand
//! bins at minimum total cost, using successive shortest augmenting paths on
//! the bipartite network source → supply → demand → sink. Edge costs are kept
//! non-negative with node potentials, so each shortest path is a dense
//! Dijkstra over at most `m + n + 2` nodes.

use crate::descriptors::Histogram;
use crate::error::{Error, Result};

/// Per-unit cost of moving mass from supply bin `i` to demand bin `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundDistanceMatrix {
    rows: usize,
    cols: usize,
    d: Vec<f64>,
}

impl GroundDistanceMatrix {
    pub fn new(rows: usize, cols: usize, d: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || d.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "ground distance has {} entries for {rows}×{cols}",
                d.len()
            )));
        }
        if d.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidArgument(
                "ground distances must be finite and non-negative".into(),
            ));
        }
        Ok(Self { rows, cols, d })
    }

    /// `d[i][j] = |i - j|` over bin indices.
    pub fn l1(rows: usize, cols: usize) -> Self {
        let d = (0..rows)
            .flat_map(|i| (0..cols).map(move |j| i.abs_diff(j) as f64))
            .collect();
        Self { rows, cols, d }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.cols + j]
    }
}

/// An optimal transportation plan.
#[derive(Debug, Clone, PartialEq)]
pub struct Flow {
    pub rows: usize,
    pub cols: usize,
    /// Row-major `rows × cols` amounts.
    pub f: Vec<f64>,
    /// Total mass moved.
    pub total: f64,
    /// Σ d_ij f_ij.
    pub cost: f64,
}

impl Flow {
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.f[i * self.cols + j]
    }
}

fn validate_weights(name: &str, w: &[f64]) -> Result<f64> {
    if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidArgument(format!(
            "{name} weights must be finite and non-negative"
        )));
    }
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidArgument(format!("{name} has no positive weight")));
    }
    Ok(total)
}

/// Minimum-cost flow moving `min(Σsupply, Σdemand)` from supply to demand bins.
pub fn solve_transportation(supply: &[f64], demand: &[f64], d: &GroundDistanceMatrix) -> Result<Flow> {
    let (m, n) = (supply.len(), demand.len());
    if d.rows != m || d.cols != n {
        return Err(Error::DimensionMismatch(format!(
            "supply {m} × demand {n} vs ground distance {}×{}",
            d.rows, d.cols
        )));
    }
    let total_p = validate_weights("supply", supply)?;
    let total_q = validate_weights("demand", demand)?;
    // Residual amounts at or below this are treated as exhausted.
    let eps = 1e-15 * total_p.max(total_q);

    // Node layout: supply 0..m, demand m..m+n, sink m+n, source m+n+1.
    let sink = m + n;
    let source = m + n + 1;
    let nodes = m + n + 2;

    let mut rem_p = supply.to_vec();
    let mut rem_q = demand.to_vec();
    let mut f = vec![0.0; m * n];
    let mut pot = vec![0.0f64; nodes];

    // Zero-weight bins stay in the network but can never carry flow:
    // an empty supply bin is unreachable and an empty demand bin is a dead end.
    let live_supply: Vec<usize> = (0..m).filter(|&i| supply[i] > 0.0).collect();
    let live_demand: Vec<usize> = (0..n).filter(|&j| demand[j] > 0.0).collect();

    let mut dist = vec![f64::INFINITY; nodes];
    let mut parent = vec![usize::MAX; nodes];
    let mut done = vec![false; nodes];

    loop {
        dist.fill(f64::INFINITY);
        parent.fill(usize::MAX);
        done.fill(false);
        dist[source] = 0.0;
        done[source] = true;
        for &i in &live_supply {
            if rem_p[i] > eps {
                dist[i] = pot[source] - pot[i];
                parent[i] = source;
            }
        }

        loop {
            // pick the closest unsettled live node
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for &i in &live_supply {
                if !done[i] && dist[i] < best {
                    best = dist[i];
                    u = i;
                }
            }
            for &j in &live_demand {
                let v = m + j;
                if !done[v] && dist[v] < best {
                    best = dist[v];
                    u = v;
                }
            }
            if !done[sink] && dist[sink] < best {
                u = sink;
            }
            if u == usize::MAX || u == sink {
                if u == sink {
                    done[sink] = true;
                }
                break;
            }
            done[u] = true;
            let du = dist[u];
            if u < m {
                let row = &d.d[u * n..(u + 1) * n];
                for &j in &live_demand {
                    let v = m + j;
                    if done[v] {
                        continue;
                    }
                    let nd = du + row[j] + pot[u] - pot[v];
                    if nd < dist[v] {
                        dist[v] = nd;
                        parent[v] = u;
                    }
                }
            } else {
                let j = u - m;
                for &i in &live_supply {
                    if done[i] || f[i * n + j] <= eps {
                        continue;
                    }
                    let nd = du - d.d[i * n + j] + pot[u] - pot[i];
                    if nd < dist[i] {
                        dist[i] = nd;
                        parent[i] = u;
                    }
                }
                if rem_q[j] > eps {
                    let nd = du + pot[u] - pot[sink];
                    if nd < dist[sink] {
                        dist[sink] = nd;
                        parent[sink] = u;
                    }
                }
            }
        }

        if !done[sink] {
            break;
        }

        let dt = dist[sink];
        for v in 0..nodes {
            pot[v] += dist[v].min(dt);
        }

        // bottleneck along sink ← demand ← supply ← … ← source
        let last = parent[sink] - m;
        let mut delta = rem_q[last];
        let mut v = parent[sink];
        loop {
            let u = parent[v];
            if u == source {
                delta = delta.min(rem_p[v]);
                break;
            }
            if v >= m {
                // forward supply u → demand v: uncapacitated
            } else {
                // reverse edge demand u → supply v cancels flow f[v][u-m]
                delta = delta.min(f[v * n + (u - m)]);
            }
            v = u;
        }

        rem_q[last] -= delta;
        let mut v = parent[sink];
        loop {
            let u = parent[v];
            if u == source {
                rem_p[v] -= delta;
                break;
            }
            if v >= m {
                f[u * n + (v - m)] += delta;
            } else {
                f[v * n + (u - m)] -= delta;
            }
            v = u;
        }
    }

    let total: f64 = f.iter().sum();
    let cost: f64 = f.iter().zip(&d.d).map(|(x, c)| x * c).sum();
    Ok(Flow {
        rows: m,
        cols: n,
        f,
        total,
        cost,
    })
}

/// Earth Mover's Distance: optimal work divided by the mass moved.
pub fn emd(p: &Histogram, q: &Histogram, d: &GroundDistanceMatrix) -> Result<f64> {
    if p.kind() != q.kind() {
        return Err(Error::KindMismatch(p.kind(), q.kind()));
    }
    emd_weights(p.bins(), q.bins(), d)
}

/// [`emd`] on raw weight vectors.
pub fn emd_weights(p: &[f64], q: &[f64], d: &GroundDistanceMatrix) -> Result<f64> {
    let flow = solve_transportation(p, q, d)?;
    Ok(flow.cost / flow.total)
}

/// Closed-form 1-D Wasserstein-1 between equal-length unit-mass weight
/// vectors under `|i - j|` ground distance: the L1 norm of the running CDF
/// difference.
pub fn emd_1d_l1(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} bins vs {} bins",
            p.len(),
            q.len()
        )));
    }
    let mut running = 0.0;
    let mut total = 0.0;
    for (a, b) in p.iter().zip(q) {
        running += a - b;
        total += running.abs();
    }
    Ok(total)
}

/// Validation oracle for [`emd`] with the L1 bin-index ground distance.
pub fn emd_1d_oracle(p: &Histogram, q: &Histogram) -> Result<f64> {
    emd_1d_l1(p.bins(), q.bins())
}

/// Checks that `flow` is optimal for its flow value: the residual network
/// (source/sink edges included) must contain no cycle of negative cost
/// beyond `tol`. Bellman-Ford from a virtual root over all nodes.
pub fn certify_optimal(flow: &Flow, supply: &[f64], demand: &[f64], d: &GroundDistanceMatrix, tol: f64) -> bool {
    let (m, n) = (flow.rows, flow.cols);
    let eps = 1e-15 * supply.iter().sum::<f64>().max(demand.iter().sum::<f64>());
    let sink = m + n;
    let source = m + n + 1;
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    for i in 0..m {
        let out: f64 = (0..n).map(|j| flow.get(i, j)).sum();
        if supply[i] - out > eps {
            edges.push((source, i, 0.0));
        }
        if out > eps {
            edges.push((i, source, 0.0));
        }
        for j in 0..n {
            edges.push((i, m + j, d.get(i, j)));
            if flow.get(i, j) > eps {
                edges.push((m + j, i, -d.get(i, j)));
            }
        }
    }
    for j in 0..n {
        let inflow: f64 = (0..m).map(|i| flow.get(i, j)).sum();
        if demand[j] - inflow > eps {
            edges.push((m + j, sink, 0.0));
        }
        if inflow > eps {
            edges.push((sink, m + j, 0.0));
        }
    }
    let nodes = m + n + 2;
    let mut dist = vec![0.0f64; nodes];
    for _ in 0..nodes {
        let mut changed = false;
        for &(u, v, c) in &edges {
            if dist[u] + c < dist[v] - tol {
                dist[v] = dist[u] + c;
                changed = true;
            }
        }
        if !changed {
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn l1_ground_distance_examples() {
        assert_eq!(GroundDistanceMatrix::l1(1, 1).d, vec![0.0]);
        assert_eq!(
            GroundDistanceMatrix::l1(3, 3).d,
            vec![0.0, 1.0, 2.0, 1.0, 0.0, 1.0, 2.0, 1.0, 0.0]
        );
        let g = GroundDistanceMatrix::l1(2, 4);
        assert_eq!(&g.d[..4], &[0.0, 1.0, 2.0, 3.0]);
        assert_eq!(&g.d[4..], &[1.0, 0.0, 1.0, 2.0]);
    }

    #[test]
    fn identity_flow_for_equal_marginals() {
        let w = [0.25, 0.5, 0.25];
        let flow = solve_transportation(&w, &w, &GroundDistanceMatrix::l1(3, 3)).unwrap();
        assert_eq!(flow.cost, 0.0);
        for i in 0..3 {
            assert_eq!(flow.get(i, i), w[i]);
        }
    }

    #[test]
    fn single_feasible_optimum() {
        let flow = solve_transportation(&[1.0, 0.0], &[0.0, 1.0], &GroundDistanceMatrix::l1(2, 2)).unwrap();
        assert_eq!(flow.get(0, 1), 1.0);
        assert_eq!(flow.cost, 1.0);
        assert_eq!(flow.total, 1.0);
    }

    #[test]
    fn unequal_masses_move_the_smaller_total() {
        let d = GroundDistanceMatrix::new(2, 3, vec![1.0, 5.0, 2.0, 3.0, 1.0, 4.0]).unwrap();
        let flow = solve_transportation(&[2.0, 1.0], &[1.0, 0.5, 0.5], &d).unwrap();
        assert!((flow.total - 2.0).abs() < 1e-12);
        // cheapest: 1 unit 0→0 (1), 0.5 unit 1→1 (1·0.5), 0.5 unit 0→2 (2·0.5)
        assert!((flow.cost - 2.5).abs() < 1e-12, "{}", flow.cost);
        assert!(certify_optimal(&flow, &[2.0, 1.0], &[1.0, 0.5, 0.5], &d, 1e-9));
    }

    #[test]
    fn delta_to_delta() {
        let mut p = vec![0.0; 10];
        let mut q = vec![0.0; 10];
        p[0] = 1.0;
        q[9] = 1.0;
        let g = GroundDistanceMatrix::l1(10, 10);
        assert_eq!(emd_weights(&p, &q, &g).unwrap(), 9.0);
        assert_eq!(emd_1d_l1(&p, &q).unwrap(), 9.0);
    }

    #[test]
    fn oracle_examples() {
        assert_eq!(emd_1d_l1(&[0.5, 0.5], &[0.0, 1.0]).unwrap(), 0.5);
        assert_eq!(emd_1d_l1(&[0.2, 0.8], &[0.2, 0.8]).unwrap(), 0.0);
        assert!(emd_1d_l1(&[1.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn input_errors() {
        let g = GroundDistanceMatrix::l1(2, 2);
        assert!(matches!(
            solve_transportation(&[1.0], &[0.5, 0.5], &g),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(solve_transportation(&[0.0, 0.0], &[0.5, 0.5], &g).is_err());
        assert!(solve_transportation(&[1.0, 0.0], &[0.0, 0.0], &g).is_err());
        assert!(solve_transportation(&[1.0, -0.5], &[0.0, 0.5], &g).is_err());
        assert!(GroundDistanceMatrix::new(2, 2, vec![0.0; 3]).is_err());
        assert!(GroundDistanceMatrix::new(1, 1, vec![-1.0]).is_err());
    }

    #[test]
    fn kind_mismatch_is_rejected() {
        use crate::descriptors::HistogramKind;
        let mut b = vec![0.0; 10];
        b[0] = 1.0;
        let s = Histogram::new(HistogramKind::Sps, b.clone()).unwrap();
        let c = Histogram::new(HistogramKind::Cps, b).unwrap();
        assert!(matches!(
            emd(&s, &c, &GroundDistanceMatrix::l1(10, 10)),
            Err(Error::KindMismatch(..))
        ));
        assert_eq!(emd(&s, &s, &GroundDistanceMatrix::l1(10, 10)).unwrap(), 0.0);
    }
}
