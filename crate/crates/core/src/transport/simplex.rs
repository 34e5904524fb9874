//! Primal network simplex for the dense transportation problem.
//!
//! Nodes are the source atoms `0..n`, the target atoms `n..n+m` and an
//! artificial root. The initial basis routes every supply and demand
//! through the root; targets pay `2 (max_cost + 1)` per unit for that
//! route, which exceeds the cost of any real reassignment of the same mass,
//! so a feasible problem ends with no mass on artificial arcs. The spanning
//! tree is kept strongly feasible (leaving arc is the last blocking arc of
//! the cycle oriented from its apex), which rules out cycling on degenerate
//! pivots. Entering arcs are chosen by block search in a fixed cyclic
//! order, so a solve is a deterministic function of its input.

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone)]
pub(crate) struct Solution<T> {
    pub flows: Vec<(usize, usize, T)>,
    pub cost: T,
    pub dual_bound: T,
    pub pivots: usize,
}

struct Tree<T> {
    parent: Vec<usize>,
    depth: Vec<usize>,
    /// Slot in `arcs`/`flows` of the arc joining a node to its parent.
    slot: Vec<usize>,
    /// Whether that arc points from the node to its parent.
    up: Vec<bool>,
    pot: Vec<T>,
}

struct Network<'a, T, C> {
    n: usize,
    m: usize,
    root: usize,
    art_cost: T,
    cost: &'a C,
}

impl<T: Real, C: Fn(usize, usize) -> T> Network<'_, T, C> {
    fn real_arcs(&self) -> usize {
        self.n * self.m
    }

    fn endpoints(&self, arc: usize, supply: &[T]) -> (usize, usize) {
        if arc < self.real_arcs() {
            (arc / self.m, self.n + arc % self.m)
        } else {
            let v = arc - self.real_arcs();
            if supply[v] >= T::zero() {
                (v, self.root)
            } else {
                (self.root, v)
            }
        }
    }

    fn arc_cost(&self, arc: usize, supply: &[T]) -> T {
        if arc < self.real_arcs() {
            (self.cost)(arc / self.m, arc % self.m)
        } else if supply[arc - self.real_arcs()] >= T::zero() {
            T::zero()
        } else {
            self.art_cost
        }
    }

    fn rebuild(&self, arcs: &[usize], supply: &[T], tree: &mut Tree<T>, adj: &mut Vec<(usize, usize)>, offsets: &mut Vec<usize>) {
        let nodes = self.root + 1;
        offsets.clear();
        offsets.resize(nodes + 1, 0);
        for &a in arcs {
            let (s, t) = self.endpoints(a, supply);
            offsets[s + 1] += 1;
            offsets[t + 1] += 1;
        }
        for v in 0..nodes {
            offsets[v + 1] += offsets[v];
        }
        adj.clear();
        adj.resize(offsets[nodes], (0, 0));
        let mut fill = offsets[..nodes].to_vec();
        for (sl, &a) in arcs.iter().enumerate() {
            let (s, t) = self.endpoints(a, supply);
            adj[fill[s]] = (t, sl);
            fill[s] += 1;
            adj[fill[t]] = (s, sl);
            fill[t] += 1;
        }
        let mut stack = vec![self.root];
        tree.parent[self.root] = usize::MAX;
        tree.depth[self.root] = 0;
        tree.pot[self.root] = T::zero();
        while let Some(v) = stack.pop() {
            for &(w, sl) in &adj[offsets[v]..offsets[v + 1]] {
                if w == tree.parent[v] && sl == tree.slot[v] {
                    continue;
                }
                let a = arcs[sl];
                let c = self.arc_cost(a, supply);
                let up = self.endpoints(a, supply).0 == w;
                tree.parent[w] = v;
                tree.slot[w] = sl;
                tree.up[w] = up;
                tree.depth[w] = tree.depth[v] + 1;
                tree.pot[w] = if up { tree.pot[v] - c } else { tree.pot[v] + c };
                stack.push(w);
            }
        }
    }
}

/// Minimizes `sum f_ij cost(i, j)` over nonnegative `f` with row sums
/// `supply` and column sums `demand`.
pub(crate) fn solve<T: Real, C: Fn(usize, usize) -> T>(supply: &[T], demand: &[T], cost: &C) -> Result<Solution<T>> {
    let n = supply.len();
    let m = demand.len();
    if n == 0 || m == 0 {
        return Err(Error::SolverFailure("empty marginal".into()));
    }
    let mut max_cost = T::zero();
    for i in 0..n {
        for j in 0..m {
            let c = cost(i, j);
            if !(c >= T::zero()) || !c.is_finite() {
                return Err(Error::SolverFailure(format!("cost ({i}, {j}) = {c} is not a finite nonnegative value")));
            }
            max_cost = max_cost.max(c);
        }
    }
    let root = n + m;
    let nodes = root + 1;
    let net = Network {
        n,
        m,
        root,
        art_cost: T::of(2.0) * (max_cost + T::one()),
        cost,
    };
    let node_supply: Vec<T> = supply.iter().copied().chain(demand.iter().map(|&b| -b)).collect();

    let mut arcs: Vec<usize> = (0..root).map(|v| net.real_arcs() + v).collect();
    let mut flows: Vec<T> = node_supply.iter().map(|s| s.abs()).collect();
    let mut tree = Tree {
        parent: vec![usize::MAX; nodes],
        depth: vec![0; nodes],
        slot: vec![usize::MAX; nodes],
        up: vec![false; nodes],
        pot: vec![T::zero(); nodes],
    };
    let (mut adj, mut offsets) = (Vec::new(), Vec::new());
    net.rebuild(&arcs, &node_supply, &mut tree, &mut adj, &mut offsets);

    let total_arcs = net.real_arcs();
    let block = ((total_arcs as f64).sqrt().ceil() as usize).max(10).min(total_arcs);
    let tol = T::epsilon() * T::of(1e3) * (T::one() + max_cost);
    let max_pivots = 1000 + 50 * nodes * nodes.max(64);
    let mut cursor = 0usize;
    let mut pivots = 0usize;

    loop {
        // Block search for the entering arc.
        let mut entering = None;
        let mut best = -tol;
        let mut in_block = 0;
        for step in 0..total_arcs {
            let a = (cursor + step) % total_arcs;
            let (i, j) = (a / m, a % m);
            let rc = cost(i, j) + tree.pot[i] - tree.pot[n + j];
            if rc < best {
                best = rc;
                entering = Some(a);
            }
            in_block += 1;
            if in_block == block {
                if entering.is_some() {
                    cursor = (a + 1) % total_arcs;
                    break;
                }
                in_block = 0;
            }
        }
        let Some(enter) = entering else { break };
        pivots += 1;
        if pivots > max_pivots {
            return Err(Error::SolverFailure(format!("no optimum after {max_pivots} pivots")));
        }

        let (s, t) = net.endpoints(enter, &node_supply);
        let (mut a, mut b) = (s, t);
        while a != b {
            if tree.depth[a] >= tree.depth[b] {
                a = tree.parent[a];
            } else {
                b = tree.parent[b];
            }
        }
        let join = a;

        let mut delta = T::infinity();
        let mut out = usize::MAX;
        let mut u = s;
        while u != join {
            if tree.up[u] && flows[tree.slot[u]] < delta {
                delta = flows[tree.slot[u]];
                out = u;
            }
            u = tree.parent[u];
        }
        let mut u = t;
        while u != join {
            if !tree.up[u] && flows[tree.slot[u]] <= delta {
                delta = flows[tree.slot[u]];
                out = u;
            }
            u = tree.parent[u];
        }
        if out == usize::MAX {
            return Err(Error::SolverFailure("unbounded pivot cycle".into()));
        }

        if delta > T::zero() {
            let mut u = s;
            while u != join {
                let f = &mut flows[tree.slot[u]];
                *f = if tree.up[u] { *f - delta } else { *f + delta };
                u = tree.parent[u];
            }
            let mut u = t;
            while u != join {
                let f = &mut flows[tree.slot[u]];
                *f = if tree.up[u] { *f + delta } else { *f - delta };
                u = tree.parent[u];
            }
        }
        let sl = tree.slot[out];
        arcs[sl] = enter;
        flows[sl] = delta;
        net.rebuild(&arcs, &node_supply, &mut tree, &mut adj, &mut offsets);
    }

    let mass_tol = T::of(1e-9);
    let mut out_flows = Vec::new();
    for (&a, &f) in arcs.iter().zip(&flows) {
        if a >= total_arcs {
            if f > mass_tol {
                return Err(Error::SolverFailure(format!(
                    "mass {f} left on an artificial arc; marginals do not balance"
                )));
            }
        } else if f > T::zero() {
            out_flows.push((a / m, a % m, f));
        }
    }
    out_flows.sort_by_key(|&(i, j, _)| (i, j));
    let mut total = T::zero();
    for &(i, j, f) in &out_flows {
        total += f * cost(i, j);
    }

    // Exactly feasible dual: target potentials from the tree, source
    // potentials by c-transform.
    let beta: Vec<T> = (0..m).map(|j| tree.pot[n + j]).collect();
    let mut dual = T::zero();
    for (i, &a) in supply.iter().enumerate() {
        let alpha = (0..m).map(|j| cost(i, j) - beta[j]).fold(T::infinity(), T::min);
        dual += a * alpha;
    }
    for (&b, &v) in demand.iter().zip(&beta) {
        dual += b * v;
    }

    Ok(Solution {
        flows: out_flows,
        cost: total,
        dual_bound: dual,
        pivots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_instance() {
        // Vertices of this polytope are multiples of 5, so the grid search
        // below visits all of them.
        let c = [[2.0, 3.0, 1.0], [5.0, 4.0, 8.0], [5.0, 6.0, 8.0]];
        let cost = |i: usize, j: usize| c[i][j];
        let sol = solve(&[20.0, 30.0, 25.0], &[10.0, 35.0, 30.0], &cost).unwrap();
        let brute = brute_force_3x3(&[20.0, 30.0, 25.0], &[10.0, 35.0, 30.0], &c);
        assert!((sol.cost - brute).abs() < 1e-9, "{} vs {brute}", sol.cost);
        assert!((sol.cost - sol.dual_bound).abs() < 1e-9);
    }

    /// Grid search over the two free rows of a 3x3 transportation plan.
    fn brute_force_3x3(a: &[f64; 3], b: &[f64; 3], c: &[[f64; 3]; 3]) -> f64 {
        let mut best = f64::INFINITY;
        let step = 5.0;
        let cap = |x: f64| (x / step) as usize;
        for f00 in 0..=cap(a[0]) {
            for f01 in 0..=cap(a[0]) {
                for f10 in 0..=cap(a[1]) {
                    for f11 in 0..=cap(a[1]) {
                        let (f00, f01, f10, f11) = (f00 as f64 * step, f01 as f64 * step, f10 as f64 * step, f11 as f64 * step);
                        let f02 = a[0] - f00 - f01;
                        let f12 = a[1] - f10 - f11;
                        let f20 = b[0] - f00 - f10;
                        let f21 = b[1] - f01 - f11;
                        let f22 = a[2] - f20 - f21;
                        let f = [[f00, f01, f02], [f10, f11, f12], [f20, f21, f22]];
                        if f.iter().flatten().any(|&x| x < -1e-12) || (f02 + f12 + f22 - b[2]).abs() > 1e-9 {
                            continue;
                        }
                        let cost: f64 = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| f[i][j] * c[i][j]).sum();
                        best = best.min(cost);
                    }
                }
            }
        }
        best
    }

    #[test]
    fn degenerate_and_zero_marginals() {
        let cost = |i: usize, j: usize| ((i as f64) - (j as f64)).powi(2);
        let sol = solve(&[0.5, 0.0, 0.5], &[0.5, 0.5, 0.0], &cost).unwrap();
        assert!((sol.cost - 0.5).abs() < 1e-15, "{}", sol.cost);
        let sol = solve(&[0.25; 4], &[0.25; 4], &cost).unwrap();
        assert_eq!(sol.cost, 0.0);
        assert_eq!(sol.flows.len(), 4);
    }

    #[test]
    fn unbalanced_marginals_fail() {
        let cost = |_: usize, _: usize| 1.0;
        assert!(matches!(solve(&[1.0], &[0.5], &cost), Err(Error::SolverFailure(_))));
    }
}
