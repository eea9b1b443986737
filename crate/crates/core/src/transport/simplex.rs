//! Primal network simplex for the dense transportation problem with integer
//! supplies and integer costs.
//!
//! The spanning tree is kept strongly feasible (artificial root, Cunningham's
//! choice of the leaving arc), so degenerate pivots cannot cycle. Pricing is
//! block search. After each pivot the tree order and node potentials are
//! rebuilt from the adjacency lists, which keeps the bookkeeping simple at
//! the desk-scale sizes this is meant for.

/// Result of a solve: positive flows and node potentials, with reduced costs
/// `cost(i, j) + pi_src[i] - pi_dst[j] >= 0` on every arc and `= 0` on arcs
/// that carry flow.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexSolution {
    /// `(source, sink, flow)` sorted by source then sink.
    pub flows: Vec<(usize, usize, i64)>,
    pub pi_src: Vec<i128>,
    pub pi_dst: Vec<i128>,
    pub pivots: usize,
}

const UP: i8 = 1;
const DOWN: i8 = -1;
const LOWER: i8 = 1;
const TREE: i8 = 0;

struct Solver<F: Fn(usize, usize) -> i128> {
    n: usize,
    m: usize,
    real: usize,
    root: usize,
    cost: F,
    art_cost: i128,
    /// Artificial arc of node `u` points `u -> root` when true.
    art_up: Vec<bool>,
    state: Vec<i8>,
    flow: Vec<i64>,
    adj: Vec<Vec<usize>>,
    parent: Vec<usize>,
    pred: Vec<usize>,
    dir: Vec<i8>,
    depth: Vec<usize>,
    pi: Vec<i128>,
    next_arc: usize,
    block: usize,
}

impl<F: Fn(usize, usize) -> i128> Solver<F> {
    #[inline]
    fn ends(&self, e: usize) -> (usize, usize) {
        if e < self.real {
            (e / self.m, self.n + e % self.m)
        } else {
            let u = e - self.real;
            if self.art_up[u] {
                (u, self.root)
            } else {
                (self.root, u)
            }
        }
    }

    #[inline]
    fn arc_cost(&self, e: usize) -> i128 {
        if e < self.real {
            (self.cost)(e / self.m, e % self.m)
        } else if self.art_up[e - self.real] {
            0
        } else {
            self.art_cost
        }
    }

    fn rebuild(&mut self) {
        let none = usize::MAX;
        self.parent.iter_mut().for_each(|p| *p = none);
        self.parent[self.root] = self.root;
        self.depth[self.root] = 0;
        self.pi[self.root] = 0;
        let mut stack = vec![self.root];
        while let Some(u) = stack.pop() {
            for k in 0..self.adj[u].len() {
                let e = self.adj[u][k];
                let (s, t) = self.ends(e);
                let v = if s == u { t } else { s };
                if self.parent[v] != none {
                    continue;
                }
                self.parent[v] = u;
                self.pred[v] = e;
                self.depth[v] = self.depth[u] + 1;
                let c = self.arc_cost(e);
                if s == u {
                    self.dir[v] = DOWN;
                    self.pi[v] = self.pi[u] + c;
                } else {
                    self.dir[v] = UP;
                    self.pi[v] = self.pi[u] - c;
                }
                stack.push(v);
            }
        }
    }

    fn entering(&mut self) -> Option<usize> {
        let total = self.real;
        let mut best = 0i128;
        let mut best_arc = None;
        let mut cnt = self.block;
        let mut e = self.next_arc;
        for _ in 0..total {
            if self.state[e] == LOWER {
                let (i, j) = (e / self.m, e % self.m);
                let rc = (self.cost)(i, j) + self.pi[i] - self.pi[self.n + j];
                if rc < best {
                    best = rc;
                    best_arc = Some(e);
                }
            }
            e += 1;
            if e == total {
                e = 0;
            }
            cnt -= 1;
            if cnt == 0 {
                if best_arc.is_some() {
                    break;
                }
                cnt = self.block;
            }
        }
        self.next_arc = e;
        best_arc
    }

    fn pivot(&mut self, in_arc: usize) {
        let (first, second) = self.ends(in_arc);
        let (mut u, mut v) = (first, second);
        while u != v {
            if self.depth[u] >= self.depth[v] {
                u = self.parent[u];
            } else {
                v = self.parent[v];
            }
        }
        let join = u;

        let mut delta = i64::MAX;
        let mut u_out = usize::MAX;
        let mut u = first;
        while u != join {
            if self.dir[u] == UP {
                let f = self.flow[self.pred[u]];
                if f < delta {
                    delta = f;
                    u_out = u;
                }
            }
            u = self.parent[u];
        }
        let mut u = second;
        while u != join {
            if self.dir[u] == DOWN {
                let f = self.flow[self.pred[u]];
                if f <= delta {
                    delta = f;
                    u_out = u;
                }
            }
            u = self.parent[u];
        }
        assert!(u_out != usize::MAX, "uncapacitated cycle in a bounded problem");

        if delta > 0 {
            self.flow[in_arc] += delta;
            let mut u = first;
            while u != join {
                let e = self.pred[u];
                self.flow[e] -= self.dir[u] as i64 * delta;
                u = self.parent[u];
            }
            let mut u = second;
            while u != join {
                let e = self.pred[u];
                self.flow[e] += self.dir[u] as i64 * delta;
                u = self.parent[u];
            }
        }

        let out_arc = self.pred[u_out];
        let (a, b) = self.ends(out_arc);
        for w in [a, b] {
            let pos = self.adj[w].iter().position(|&x| x == out_arc).expect("tree arc");
            self.adj[w].swap_remove(pos);
        }
        self.adj[first].push(in_arc);
        self.adj[second].push(in_arc);
        self.state[in_arc] = TREE;
        self.state[out_arc] = LOWER;
        self.rebuild();
    }
}

/// Solves `min sum cost(i, j) x_ij` over `x >= 0` with row sums `supply` and
/// column sums `demand`. Both must be positive and sum to the same total.
pub fn solve<F: Fn(usize, usize) -> i128>(supply: &[i64], demand: &[i64], cost: F) -> SimplexSolution {
    let (n, m) = (supply.len(), demand.len());
    assert!(n > 0 && m > 0, "empty transportation problem");
    assert!(supply.iter().chain(demand).all(|&s| s > 0), "supplies must be positive");
    assert_eq!(supply.iter().sum::<i64>(), demand.iter().sum::<i64>(), "unbalanced problem");
    let real = n * m;
    let nodes = n + m;
    let root = nodes;
    let mut max_cost = 0i128;
    for i in 0..n {
        for j in 0..m {
            max_cost = max_cost.max(cost(i, j).abs());
        }
    }
    let art_cost = (max_cost + 1) * (nodes as i128 + 1);

    let mut s = Solver {
        n,
        m,
        real,
        root,
        cost,
        art_cost,
        art_up: (0..nodes).map(|u| u < n).collect(),
        state: vec![LOWER; real + nodes],
        flow: vec![0; real + nodes],
        adj: vec![Vec::new(); nodes + 1],
        parent: vec![0; nodes + 1],
        pred: vec![usize::MAX; nodes + 1],
        dir: vec![0; nodes + 1],
        depth: vec![0; nodes + 1],
        pi: vec![0; nodes + 1],
        next_arc: 0,
        block: ((real as f64).sqrt().ceil() as usize).max(10).min(real),
    };
    for u in 0..nodes {
        let e = real + u;
        s.state[e] = TREE;
        s.flow[e] = if u < n { supply[u] } else { demand[u - n] };
        s.adj[u].push(e);
        s.adj[root].push(e);
    }
    s.rebuild();

    let mut pivots = 0;
    while let Some(e) = s.entering() {
        s.pivot(e);
        pivots += 1;
    }
    assert!(
        s.flow[real..].iter().all(|&f| f == 0),
        "artificial flow left in a balanced problem"
    );

    let mut flows = Vec::new();
    for i in 0..n {
        for j in 0..m {
            let f = s.flow[i * m + j];
            if f > 0 {
                flows.push((i, j, f));
            }
        }
    }
    SimplexSolution {
        flows,
        pi_src: s.pi[..n].to_vec(),
        pi_dst: s.pi[n..nodes].to_vec(),
        pivots,
    }
}
