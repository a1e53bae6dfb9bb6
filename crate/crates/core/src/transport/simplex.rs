//! Primal network simplex for uncapacitated min-cost flow with integer
//! supplies and real arc costs. Spanning-tree bookkeeping follows the usual
//! thread/successor-count layout with block-search pivoting.

use crate::error::{Error, Result};

const TREE: i8 = 0;
const LOWER: i8 = 1;
const UP: i8 = 1;
const DOWN: i8 = -1;

#[derive(Debug, Clone)]
pub struct FlowSolution {
    /// Flow on each input arc.
    pub flows: Vec<i64>,
    /// Node potentials `π` with `c(u,v) + π(u) − π(v) ≥ 0` on every arc.
    pub potentials: Vec<f64>,
    pub cost: f64,
    pub pivots: usize,
}

struct Simplex {
    source: Vec<usize>,
    target: Vec<usize>,
    cost: Vec<f64>,
    flow: Vec<i64>,
    state: Vec<i8>,
    parent: Vec<usize>,
    pred: Vec<usize>,
    pred_dir: Vec<i8>,
    thread: Vec<usize>,
    rev_thread: Vec<usize>,
    succ_num: Vec<usize>,
    last_succ: Vec<usize>,
    pi: Vec<f64>,
    dirty_revs: Vec<usize>,
    search_arcs: usize,
    block: usize,
    next_arc: usize,
    eps: f64,
    // pivot scratch
    in_arc: usize,
    join: usize,
    u_in: usize,
    v_in: usize,
    u_out: usize,
    delta: i64,
}

const NONE: usize = usize::MAX;

impl Simplex {
    fn new(n: usize, arcs: &[(usize, usize, f64)], supply: &[i64]) -> Self {
        let m = arcs.len();
        let all = m + n;
        let root = n;
        let max_cost = arcs.iter().fold(0.0f64, |a, e| a.max(e.2.abs()));
        let art = (max_cost + 1.0) * (n as f64 + 1.0);
        let mut s = Simplex {
            source: Vec::with_capacity(all),
            target: Vec::with_capacity(all),
            cost: Vec::with_capacity(all),
            flow: vec![0; all],
            state: vec![LOWER; all],
            parent: vec![NONE; n + 1],
            pred: vec![NONE; n + 1],
            pred_dir: vec![UP; n + 1],
            thread: vec![0; n + 1],
            rev_thread: vec![0; n + 1],
            succ_num: vec![1; n + 1],
            last_succ: vec![0; n + 1],
            pi: vec![0.0; n + 1],
            dirty_revs: Vec::new(),
            search_arcs: m,
            block: ((m as f64).sqrt() as usize).max(10),
            next_arc: 0,
            eps: 1e-12 * (max_cost + 1.0),
            in_arc: 0,
            join: 0,
            u_in: 0,
            v_in: 0,
            u_out: 0,
            delta: 0,
        };
        for &(u, v, c) in arcs {
            s.source.push(u);
            s.target.push(v);
            s.cost.push(c);
        }
        s.thread[root] = 0;
        s.rev_thread[0] = root;
        s.succ_num[root] = n + 1;
        s.last_succ[root] = root - 1;
        for u in 0..n {
            let e = m + u;
            s.parent[u] = root;
            s.pred[u] = e;
            s.thread[u] = u + 1;
            s.rev_thread[u + 1] = u;
            s.last_succ[u] = u;
            s.state[e] = TREE;
            if supply[u] >= 0 {
                s.pred_dir[u] = UP;
                s.source.push(u);
                s.target.push(root);
                s.flow[e] = supply[u];
                s.cost.push(0.0);
            } else {
                s.pred_dir[u] = DOWN;
                s.pi[u] = art;
                s.source.push(root);
                s.target.push(u);
                s.flow[e] = -supply[u];
                s.cost.push(art);
            }
        }
        s
    }

    fn reduced(&self, e: usize) -> f64 {
        self.state[e] as f64 * (self.cost[e] + self.pi[self.source[e]] - self.pi[self.target[e]])
    }

    fn find_entering(&mut self) -> bool {
        let mut min = -self.eps;
        let mut found = false;
        let mut cnt = self.block;
        let m = self.search_arcs;
        let start = self.next_arc;
        let mut e = start;
        for _ in 0..m {
            let c = self.reduced(e);
            if c < min {
                min = c;
                self.in_arc = e;
                found = true;
            }
            e += 1;
            if e == m {
                e = 0;
            }
            cnt -= 1;
            if cnt == 0 {
                if found {
                    self.next_arc = e;
                    return true;
                }
                cnt = self.block;
            }
        }
        self.next_arc = e;
        found
    }

    fn find_join(&mut self) {
        let (mut u, mut v) = (self.source[self.in_arc], self.target[self.in_arc]);
        while u != v {
            if self.succ_num[u] < self.succ_num[v] {
                u = self.parent[u];
            } else {
                v = self.parent[v];
            }
        }
        self.join = u;
    }

    /// Every arc is uncapacitated, so only tree arcs whose flow would drop
    /// can block the cycle.
    fn find_leaving(&mut self) -> Result<()> {
        let first = self.source[self.in_arc];
        let second = self.target[self.in_arc];
        let mut delta = i64::MAX;
        let mut result = 0;
        let mut u = first;
        while u != self.join {
            if self.pred_dir[u] == UP {
                let d = self.flow[self.pred[u]];
                if d < delta {
                    delta = d;
                    self.u_out = u;
                    result = 1;
                }
            }
            u = self.parent[u];
        }
        let mut u = second;
        while u != self.join {
            if self.pred_dir[u] == DOWN {
                let d = self.flow[self.pred[u]];
                if d <= delta {
                    delta = d;
                    self.u_out = u;
                    result = 2;
                }
            }
            u = self.parent[u];
        }
        if result == 0 {
            return Err(Error::InvalidArgument("negative-cost cycle of unbounded capacity".into()));
        }
        (self.u_in, self.v_in) = if result == 1 { (first, second) } else { (second, first) };
        self.delta = delta;
        Ok(())
    }

    fn change_flow(&mut self) {
        let val = self.delta;
        if val > 0 {
            self.flow[self.in_arc] += val;
            let mut u = self.source[self.in_arc];
            while u != self.join {
                self.flow[self.pred[u]] -= self.pred_dir[u] as i64 * val;
                u = self.parent[u];
            }
            let mut u = self.target[self.in_arc];
            while u != self.join {
                self.flow[self.pred[u]] += self.pred_dir[u] as i64 * val;
                u = self.parent[u];
            }
        }
        self.state[self.in_arc] = TREE;
        self.state[self.pred[self.u_out]] = LOWER;
    }

    fn update_tree(&mut self) {
        let (u_in, v_in, u_out, join, in_arc) =
            (self.u_in, self.v_in, self.u_out, self.join, self.in_arc);
        let old_rev_thread = self.rev_thread[u_out];
        let old_succ_num = self.succ_num[u_out];
        let old_last_succ = self.last_succ[u_out];
        let v_out = self.parent[u_out];

        if u_in == u_out {
            self.parent[u_in] = v_in;
            self.pred[u_in] = in_arc;
            self.pred_dir[u_in] = if u_in == self.source[in_arc] { UP } else { DOWN };
            if self.thread[v_in] != u_out {
                let mut after = self.thread[old_last_succ];
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
                after = self.thread[v_in];
                self.thread[v_in] = u_out;
                self.rev_thread[u_out] = v_in;
                self.thread[old_last_succ] = after;
                self.rev_thread[after] = old_last_succ;
            }
        } else {
            let thread_continue = if old_rev_thread == v_in {
                self.thread[old_last_succ]
            } else {
                self.thread[v_in]
            };
            // re-hang the stem u_in .. u_out under v_in
            let mut stem = u_in;
            let mut par_stem = v_in;
            let mut last = self.last_succ[u_in];
            let mut after = self.thread[last];
            self.thread[v_in] = u_in;
            self.dirty_revs.clear();
            self.dirty_revs.push(v_in);
            while stem != u_out {
                let next_stem = self.parent[stem];
                self.thread[last] = next_stem;
                self.dirty_revs.push(last);
                let before = self.rev_thread[stem];
                self.thread[before] = after;
                self.rev_thread[after] = before;
                self.parent[stem] = par_stem;
                par_stem = stem;
                stem = next_stem;
                last = if self.last_succ[stem] == self.last_succ[par_stem] {
                    self.rev_thread[par_stem]
                } else {
                    self.last_succ[stem]
                };
                after = self.thread[last];
            }
            self.parent[u_out] = par_stem;
            self.thread[last] = thread_continue;
            self.rev_thread[thread_continue] = last;
            self.last_succ[u_out] = last;
            if old_rev_thread != v_in {
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
            }
            for k in 0..self.dirty_revs.len() {
                let u = self.dirty_revs[k];
                self.rev_thread[self.thread[u]] = u;
            }
            let mut tmp_sc = 0usize;
            let tmp_ls = self.last_succ[u_out];
            let mut u = u_out;
            while u != u_in {
                let p = self.parent[u];
                self.pred[u] = self.pred[p];
                self.pred_dir[u] = -self.pred_dir[p];
                tmp_sc = tmp_sc + self.succ_num[u] - self.succ_num[p];
                self.succ_num[u] = tmp_sc;
                self.last_succ[p] = tmp_ls;
                u = p;
            }
            self.pred[u_in] = in_arc;
            self.pred_dir[u_in] = if u_in == self.source[in_arc] { UP } else { DOWN };
            self.succ_num[u_in] = old_succ_num;
        }

        let up_limit_out = if self.last_succ[join] == v_in { join } else { NONE };
        let last_succ_out = self.last_succ[u_out];
        let mut u = v_in;
        while u != NONE && self.last_succ[u] == v_in {
            self.last_succ[u] = last_succ_out;
            u = self.parent[u];
        }
        if join != old_rev_thread && v_in != old_rev_thread {
            let mut u = v_out;
            while u != up_limit_out && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = old_rev_thread;
                u = self.parent[u];
            }
        } else if last_succ_out != old_last_succ {
            let mut u = v_out;
            while u != up_limit_out && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = last_succ_out;
                u = self.parent[u];
            }
        }
        let mut u = v_in;
        while u != join {
            self.succ_num[u] += old_succ_num;
            u = self.parent[u];
        }
        let mut u = v_out;
        while u != join {
            self.succ_num[u] -= old_succ_num;
            u = self.parent[u];
        }
    }

    fn update_potential(&mut self) {
        let u_in = self.u_in;
        let sigma = self.pi[self.v_in] - self.pi[u_in]
            - self.pred_dir[u_in] as f64 * self.cost[self.in_arc];
        let end = self.thread[self.last_succ[u_in]];
        let mut u = u_in;
        while u != end {
            self.pi[u] += sigma;
            u = self.thread[u];
        }
    }
}

/// Minimum-cost flow on `n` nodes with uncapacitated arcs `(from, to, cost)`
/// and integer supplies summing to zero (positive = source).
pub fn min_cost_flow(n: usize, arcs: &[(usize, usize, f64)], supply: &[i64]) -> Result<FlowSolution> {
    if supply.len() != n || n == 0 {
        return Err(Error::InvalidArgument("supply length must equal node count".into()));
    }
    let (pos, neg) = supply.iter().fold((0i64, 0i64), |(p, q), &s| {
        if s >= 0 {
            (p + s, q)
        } else {
            (p, q - s)
        }
    });
    if pos != neg {
        return Err(Error::InfeasibleFlow { mu: pos as f64, nu: neg as f64 });
    }
    if arcs.iter().any(|&(u, v, c)| u >= n || v >= n || !c.is_finite() || c < 0.0) {
        return Err(Error::InvalidArgument("arcs need valid endpoints and finite costs >= 0".into()));
    }
    let mut s = Simplex::new(n, arcs, supply);
    let mut pivots = 0;
    while s.find_entering() {
        s.find_join();
        s.find_leaving()?;
        s.change_flow();
        s.update_tree();
        s.update_potential();
        pivots += 1;
    }
    let m = arcs.len();
    if s.flow[m..].iter().any(|&f| f != 0) {
        // disconnected supply and demand
        return Err(Error::InfeasibleFlow { mu: pos as f64, nu: neg as f64 });
    }
    let flows = s.flow[..m].to_vec();
    let cost = flows.iter().zip(&s.cost).map(|(&f, &c)| f as f64 * c).sum();
    let root_pi = s.pi[n];
    let potentials = s.pi[..n].iter().map(|p| p - root_pi).collect();
    Ok(FlowSolution { flows, potentials, cost, pivots })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn path_flow() {
        let arcs = [(0, 1, 1.0), (1, 2, 2.0), (0, 2, 5.0)];
        let s = min_cost_flow(3, &arcs, &[4, 0, -4]).unwrap();
        assert_eq!(s.flows, vec![4, 4, 0]);
        assert_eq!(s.cost, 12.0);
    }

    #[test]
    fn unbalanced_supply_is_infeasible() {
        assert!(matches!(
            min_cost_flow(2, &[(0, 1, 1.0)], &[2, -1]),
            Err(Error::InfeasibleFlow { .. })
        ));
        // balanced but disconnected
        assert!(matches!(
            min_cost_flow(2, &[(1, 0, 1.0)], &[1, -1]),
            Err(Error::InfeasibleFlow { .. })
        ));
    }

    /// Brute force over every assignment of a small balanced transport
    /// problem with unit masses.
    fn brute_assignment(cost: &[Vec<f64>]) -> f64 {
        fn rec(cost: &[Vec<f64>], row: usize, used: &mut Vec<bool>) -> f64 {
            if row == cost.len() {
                return 0.0;
            }
            let mut best = f64::INFINITY;
            for j in 0..cost.len() {
                if !used[j] {
                    used[j] = true;
                    best = best.min(cost[row][j] + rec(cost, row + 1, used));
                    used[j] = false;
                }
            }
            best
        }
        rec(cost, 0, &mut vec![false; cost.len()])
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn assignment_matches_brute_force(c in proptest::collection::vec(0.0..10.0f64, 36)) {
            let k = 6;
            let cost: Vec<Vec<f64>> = (0..k).map(|i| c[i * k..(i + 1) * k].to_vec()).collect();
            let mut arcs = Vec::new();
            for i in 0..k {
                for j in 0..k {
                    arcs.push((i, k + j, cost[i][j]));
                }
            }
            let mut supply = vec![1i64; k];
            supply.extend(vec![-1i64; k]);
            let s = min_cost_flow(2 * k, &arcs, &supply).unwrap();
            prop_assert!((s.cost - brute_assignment(&cost)).abs() < 1e-9);
            // dual feasibility and complementary slackness
            for (a, &(u, v, c)) in arcs.iter().enumerate() {
                let r = c + s.potentials[u] - s.potentials[v];
                prop_assert!(r > -1e-9);
                if s.flows[a] > 0 {
                    prop_assert!(r.abs() < 1e-9);
                }
            }
        }

        #[test]
        fn grid_flow_conserves(seed in 0u64..1000) {
            // random supplies on a 7x7 four-neighbour grid
            let n = 7;
            let mut arcs = Vec::new();
            for r in 0..n {
                for c in 0..n {
                    let i = r * n + c;
                    if c + 1 < n { arcs.push((i, i + 1, 1.0)); arcs.push((i + 1, i, 1.0)); }
                    if r + 1 < n { arcs.push((i, i + n, 1.5)); arcs.push((i + n, i, 1.5)); }
                }
            }
            let mut supply: Vec<i64> = (0..n * n).map(|i| ((i as u64 * 2654435761 + seed) % 21) as i64 - 10).collect();
            let total: i64 = supply.iter().sum();
            supply[0] -= total;
            let s = min_cost_flow(n * n, &arcs, &supply).unwrap();
            let mut div = supply.clone();
            for (a, &(u, v, _)) in arcs.iter().enumerate() {
                div[u] -= s.flows[a];
                div[v] += s.flows[a];
                prop_assert!(s.flows[a] >= 0);
            }
            prop_assert!(div.iter().all(|&d| d == 0));
            let dual: f64 = supply.iter().zip(&s.potentials).map(|(&b, &p)| -(b as f64) * p).sum();
            prop_assert!((dual - s.cost).abs() < 1e-6 * s.cost.max(1.0));
        }
    }
}
