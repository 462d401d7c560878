//! Plaintext graphs and matchings: the Pape–Conradt tree-growing algorithm,
//! an exact brute-force oracle, and a mirror of the oblivious protocol that
//! runs the same fixed loop schedule in the clear.
//!
//! Nodes are numbered `1..=n`; 0 is the dummy node and doubles as the
//! "exposed" marker in mate arrays.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MatchingError {
    #[error("node {0} outside 1..={1}")]
    NodeOutOfRange(usize, usize),
    #[error("self loop at node {0}")]
    SelfLoop(usize),
    #[error("mate array has length {0}, graph has {1} nodes")]
    SizeMismatch(usize, usize),
    #[error("mate({0}) = {1} but mate({1}) = {2}")]
    Asymmetric(usize, usize, usize),
    #[error("({0}, {1}) is matched but not an edge")]
    NotAnEdge(usize, usize),
    #[error("brute force limited to {max} nodes, got {got}")]
    TooLarge { got: usize, max: usize },
    #[error("graph text line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Simple undirected graph as a dense symmetric adjacency matrix.
#[derive(Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    adj: Vec<bool>,
}

impl fmt::Debug for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Graph({}; {:?})", self.n, self.edges())
    }
}

impl Graph {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            adj: vec![false; n * n],
        }
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self, MatchingError> {
        let mut g = Self::new(n);
        for &(u, v) in edges {
            g.add_edge(u, v)?;
        }
        Ok(g)
    }

    /// Builds from a row-major 0/1 matrix, which must be symmetric with a zero diagonal.
    pub fn from_matrix(n: usize, m: &[bool]) -> Result<Self, MatchingError> {
        if m.len() != n * n {
            return Err(MatchingError::SizeMismatch(m.len(), n * n));
        }
        let mut g = Self::new(n);
        for u in 1..=n {
            for v in 1..=n {
                if m[(u - 1) * n + v - 1] {
                    if u == v {
                        return Err(MatchingError::SelfLoop(u));
                    }
                    if !m[(v - 1) * n + u - 1] {
                        return Err(MatchingError::NotAnEdge(v, u));
                    }
                    g.adj[(u - 1) * n + v - 1] = true;
                }
            }
        }
        Ok(g)
    }

    /// Erdős–Rényi `G(n, p)`.
    pub fn random<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Self {
        let mut g = Self::new(n);
        for u in 1..=n {
            for v in u + 1..=n {
                if rng.gen_bool(p) {
                    g.add_edge(u, v).expect("in range");
                }
            }
        }
        g
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn add_edge(&mut self, u: usize, v: usize) -> Result<(), MatchingError> {
        for w in [u, v] {
            if w == 0 || w > self.n {
                return Err(MatchingError::NodeOutOfRange(w, self.n));
            }
        }
        if u == v {
            return Err(MatchingError::SelfLoop(u));
        }
        self.adj[(u - 1) * self.n + v - 1] = true;
        self.adj[(v - 1) * self.n + u - 1] = true;
        Ok(())
    }

    /// False for the dummy node and out-of-range nodes.
    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u >= 1 && v >= 1 && u <= self.n && v <= self.n && self.adj[(u - 1) * self.n + v - 1]
    }

    /// Neighbours of `v` in ascending order.
    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        (1..=self.n).filter(|&u| self.has_edge(v, u)).collect()
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for u in 1..=self.n {
            for v in u + 1..=self.n {
                if self.has_edge(u, v) {
                    out.push((u, v));
                }
            }
        }
        out
    }

    /// Row-major 0/1 matrix.
    pub fn matrix(&self) -> &[bool] {
        &self.adj
    }

    /// Relabeled graph with `result(i, j) = self(perm[i], perm[j])` (0-based `perm`).
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.n;
        let mut g = Self::new(n);
        for i in 0..n {
            for j in 0..n {
                g.adj[i * n + j] = self.adj[perm[i] * n + perm[j]];
            }
        }
        g
    }

    /// First line `n`, then one `u v` edge per line. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, MatchingError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let (line, first) = lines.next().ok_or(MatchingError::Parse {
            line: 1,
            msg: "missing node count".into(),
        })?;
        let n: usize = first.parse().map_err(|_| MatchingError::Parse {
            line,
            msg: format!("bad node count {first:?}"),
        })?;
        let mut g = Self::new(n);
        for (line, l) in lines {
            let parts: Vec<&str> = l.split_whitespace().collect();
            let parsed: Vec<usize> = parts.iter().filter_map(|p| p.parse().ok()).collect();
            if parts.len() != 2 || parsed.len() != 2 {
                return Err(MatchingError::Parse {
                    line,
                    msg: format!("expected \"u v\", got {l:?}"),
                });
            }
            g.add_edge(parsed[0], parsed[1])
                .map_err(|e| MatchingError::Parse { line, msg: e.to_string() })?;
        }
        Ok(g)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{}\n", self.n);
        for (u, v) in self.edges() {
            s.push_str(&format!("{u} {v}\n"));
        }
        s
    }
}

/// `mate[v - 1]` is the partner of node `v`, or 0 when `v` is exposed.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Matching {
    mate: Vec<usize>,
}

impl Matching {
    pub fn empty(n: usize) -> Self {
        Self { mate: vec![0; n] }
    }

    pub fn from_mates(mate: Vec<usize>) -> Self {
        Self { mate }
    }

    pub fn mates(&self) -> &[usize] {
        &self.mate
    }

    pub fn mate(&self, v: usize) -> usize {
        self.mate[v - 1]
    }

    pub fn cardinality(&self) -> usize {
        self.mate.iter().filter(|&&m| m != 0).count() / 2
    }

    pub fn exposed(&self) -> usize {
        self.mate.iter().filter(|&&m| m == 0).count()
    }

    pub fn pairs(&self) -> Vec<(usize, usize)> {
        (1..=self.mate.len())
            .filter(|&v| self.mate(v) > v)
            .map(|v| (v, self.mate(v)))
            .collect()
    }

    /// Symmetric, in range, and every matched pair is an edge of `g`.
    pub fn validate(&self, g: &Graph) -> Result<(), MatchingError> {
        let n = g.node_count();
        if self.mate.len() != n {
            return Err(MatchingError::SizeMismatch(self.mate.len(), n));
        }
        for v in 1..=n {
            let u = self.mate(v);
            if u == 0 {
                continue;
            }
            if u > n {
                return Err(MatchingError::NodeOutOfRange(u, n));
            }
            if self.mate(u) != v {
                return Err(MatchingError::Asymmetric(v, u, self.mate(u)));
            }
            if !g.has_edge(u, v) {
                return Err(MatchingError::NotAnEdge(u, v));
            }
        }
        Ok(())
    }

    /// Maps a matching on `g.permuted(perm)` back to labels of `g`.
    pub fn unpermuted(&self, perm: &[usize]) -> Self {
        let mut mate = vec![0; self.mate.len()];
        for (i, &m) in self.mate.iter().enumerate() {
            mate[perm[i]] = if m == 0 { 0 } else { perm[m - 1] + 1 };
        }
        Self { mate }
    }
}

/// Flips the alternating path ending in the edge `(x, y)`, `y` exposed,
/// following grandfather links back to the root. The oblivious version
/// keeps walking on the dummy node for `n` steps, which changes nothing.
fn augment(mate: &mut [usize], grandfather: &[usize], mut x: usize, mut y: usize) {
    let n = mate.len();
    let get = |m: &[usize], v: usize| if v == 0 { 0 } else { m[v - 1] };
    if x != 0 {
        mate[y - 1] = x;
    }
    for _ in 0..n {
        let next = get(mate, x);
        if x != 0 {
            mate[x - 1] = y;
        }
        x = if x == 0 { 0 } else { grandfather[x - 1] };
        if next != 0 {
            mate[next - 1] = x;
        }
        y = next;
        if x == 0 && y == 0 {
            break;
        }
    }
}

/// Whether `y` lies on the grandfather chain starting at `x` (inclusive).
fn is_ancestor(grandfather: &[usize], y: usize, mut x: usize) -> bool {
    for _ in 0..grandfather.len() {
        if x == 0 {
            return false;
        }
        if x == y {
            return true;
        }
        x = grandfather[x - 1];
    }
    false
}

/// Maximum matching by growing an alternating tree from every exposed node;
/// blossoms are not shrunk, edges closing an odd cycle onto an ancestor are
/// skipped instead.
pub fn pape_conradt(g: &Graph, initial: &Matching) -> Result<Matching, MatchingError> {
    initial.validate(g)?;
    let lists: Vec<Vec<usize>> = (1..=g.node_count()).map(|v| g.neighbors(v)).collect();
    let mut mate = initial.mate.clone();
    pape_conradt_lists(&lists, &mut mate);
    Ok(Matching { mate })
}

/// [`pape_conradt`] on adjacency lists, for large sparse graphs.
///
/// `neighbors[v - 1]` must be sorted ascending (the scan order of the dense
/// version) and symmetric; `mate` must be a valid matching. Per-root state
/// is reset only where it was touched, so a run costs time proportional to
/// the explored part of the graph rather than `n^2`.
pub fn pape_conradt_lists(neighbors: &[Vec<usize>], mate: &mut [usize]) {
    let n = neighbors.len();
    let mut expo = mate.iter().filter(|&&m| m == 0).count();
    let mut in_tree = vec![false; n];
    let mut grandfather = vec![0; n];
    let mut touched: Vec<usize> = Vec::new();
    let mut queue = VecDeque::new();
    for r in 1..=n {
        if expo < 2 {
            break;
        }
        if mate[r - 1] != 0 {
            continue;
        }
        for &v in &touched {
            in_tree[v - 1] = false;
            grandfather[v - 1] = 0;
        }
        touched.clear();
        in_tree[r - 1] = true;
        touched.push(r);
        queue.clear();
        queue.push_back(r);
        'tree: while let Some(x) = queue.pop_front() {
            for &y in &neighbors[x - 1] {
                if in_tree[y - 1] {
                    continue;
                }
                if mate[y - 1] == 0 {
                    augment(mate, &grandfather, x, y);
                    expo -= 2;
                    break 'tree;
                }
                if mate[y - 1] != x && !is_ancestor(&grandfather, y, x) {
                    let z = mate[y - 1];
                    queue.push_back(z);
                    grandfather[z - 1] = x;
                    in_tree[y - 1] = true;
                    touched.push(y);
                    touched.push(z);
                }
            }
        }
    }
}

/// Largest graph accepted by [`brute_force_max_matching`].
pub const BRUTE_FORCE_MAX_NODES: usize = 16;

/// Exact maximum matching by memoized search over subsets of nodes.
pub fn brute_force_max_matching(g: &Graph) -> Result<(usize, Matching), MatchingError> {
    let n = g.node_count();
    if n > BRUTE_FORCE_MAX_NODES {
        return Err(MatchingError::TooLarge {
            got: n,
            max: BRUTE_FORCE_MAX_NODES,
        });
    }
    let mut memo: HashMap<u32, usize> = HashMap::new();
    let full = if n == 0 { 0 } else { (1u32 << n) - 1 };
    let size = best(g, full, &mut memo);
    // walk the memo to recover a witness
    let mut mate = vec![0; n];
    let mut mask = full;
    while mask != 0 {
        let v = mask.trailing_zeros() as usize;
        let rest = mask & !(1 << v);
        let target = best(g, mask, &mut memo);
        if best(g, rest, &mut memo) == target {
            mask = rest;
            continue;
        }
        let u = (0..n)
            .find(|&u| rest & (1 << u) != 0 && g.has_edge(v + 1, u + 1) && 1 + best(g, rest & !(1 << u), &mut memo) == target)
            .expect("memo is consistent");
        mate[v] = u + 1;
        mate[u] = v + 1;
        mask = rest & !(1 << u);
    }
    Ok((size, Matching { mate }))
}

fn best(g: &Graph, mask: u32, memo: &mut HashMap<u32, usize>) -> usize {
    if mask == 0 {
        return 0;
    }
    if let Some(&v) = memo.get(&mask) {
        return v;
    }
    let v = mask.trailing_zeros() as usize;
    let rest = mask & !(1 << v);
    let mut b = best(g, rest, memo);
    let mut others = rest;
    while others != 0 {
        let u = others.trailing_zeros() as usize;
        others &= others - 1;
        if g.has_edge(v + 1, u + 1) {
            b = b.max(1 + best(g, rest & !(1 << u), memo));
        }
    }
    memo.insert(mask, b);
    b
}

/// True iff `m` is a valid maximum matching of `g` (no augmenting path exists).
pub fn berge_check(g: &Graph, m: &Matching) -> Result<bool, MatchingError> {
    m.validate(g)?;
    Ok(m.cardinality() == brute_force_max_matching(g)?.0)
}

/// Tree state at the end of one root iteration of the fixed schedule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeSnapshot {
    pub root: usize,
    pub mate: Vec<usize>,
    pub non_tree: Vec<usize>,
    pub grandfather: Vec<usize>,
}

/// The oblivious protocol's control flow in the clear: every root, `n` queue
/// pops and `n` neighbour candidates per pop, with dummy work where the
/// conditional algorithm would skip. Returns the matching and a snapshot per root.
pub fn fixed_schedule(g: &Graph) -> (Matching, Vec<TreeSnapshot>) {
    let n = g.node_count();
    let mut mate = vec![0usize; n];
    let mut snapshots = Vec::with_capacity(n);
    let at = |v: &[usize], i: usize| if i == 0 { 0 } else { v[i - 1] };
    for r in 1..=n {
        let root_exposed = mate[r - 1] == 0;
        let root = if root_exposed { r } else { 0 };
        let mut non_tree = vec![1usize; n];
        non_tree[r - 1] = if root_exposed { 0 } else { 1 };
        let mut grandfather = vec![0usize; n];
        let mut queue = vec![0usize; n + 1];
        queue[0] = root;
        let mut tail = 1;
        let mut found = false;
        for q in 0..n {
            let mut x = queue[q];
            if found {
                x = 0;
            }
            for y in 1..=n {
                let a = g.has_edge(x, y);
                let aug_path = non_tree[y - 1] == 1 && a && mate[y - 1] == 0 && at(&mate, r) == 0;
                found |= aug_path;
                augment(&mut mate, &grandfather, if aug_path { x } else { 0 }, y);
                let y_anc_x = is_ancestor(&grandfather, y, x);
                let cond = non_tree[y - 1] == 1 && mate[y - 1] != x && !found && a && !y_anc_x;
                if cond {
                    let z = mate[y - 1];
                    non_tree[y - 1] = 0;
                    if z != 0 {
                        grandfather[z - 1] = x;
                    }
                    if tail < queue.len() {
                        queue[tail] = z;
                    }
                    tail += 1;
                }
            }
        }
        snapshots.push(TreeSnapshot {
            root: r,
            mate: mate.clone(),
            non_tree,
            grandfather,
        });
    }
    (Matching { mate }, snapshots)
}
