//! The oblivious crossover matching protocol.
//!
//! Every loop runs its worst-case number of iterations and every branch of
//! the plaintext tree-growing algorithm is replaced by arithmetic on shared
//! condition bits. Node 0 is a dummy: reads at index 0 return 0 and writes
//! to it are dropped, so work done on it leaves the state unchanged.

use crate::compat::{build_adjacency, SharedRecord};
use crate::field::FieldElement;
use crate::matching::TreeSnapshot;
use crate::mpc::{
    and_all, eq_batch, eqz_batch, index_vector, index_vectors, index_vectors_sized, inner_product, or,
    shuffle_matrix, unshuffle_matrix, verify_permutation, MpcError, ObliviousQueue, PermutationHandle, Session,
    SharedMatrix, SharedValue, SharedVector,
};
use crate::shamir::{reconstruct, Share, SharingParams};

/// How the adjacency matrix is relabeled before tree growing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Shuffle {
    /// Each contributor draws a uniform permutation.
    Random,
    /// Contributors input the given permutations (0-based, `P(i, perm[i]) = 1`),
    /// one per contributor in peer order. For reproducible tests.
    Fixed(Vec<Vec<usize>>),
    /// No relabeling.
    Identity,
}

#[derive(Debug, Clone)]
pub struct ProtocolOptions {
    pub shuffle: Shuffle,
    /// Open the permutation-matrix checks for every contribution.
    pub verify_permutations: bool,
    /// Keep this peer's shares of the tree state after every root.
    pub trace: bool,
}

impl Default for ProtocolOptions {
    fn default() -> Self {
        Self {
            shuffle: Shuffle::Random,
            verify_permutations: cfg!(debug_assertions),
            trace: false,
        }
    }
}

/// One peer's shares of the state at the end of a root iteration, in
/// shuffled labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateShares {
    pub root: usize,
    pub mate: Vec<FieldElement>,
    pub non_tree: Vec<FieldElement>,
    pub grandfather: Vec<FieldElement>,
}

#[derive(Debug, Clone)]
pub struct CrossoverOutput {
    /// `mate(v)` in original labels; 0 for unmatched pairs.
    pub mate: SharedVector,
    pub snapshots: Vec<StateShares>,
}

/// Full protocol from shared medical records.
pub fn crossover_ke(s: &mut Session, records: &[SharedRecord], opts: &ProtocolOptions) -> Result<CrossoverOutput, MpcError> {
    let adjacency = build_adjacency(s, records)?;
    crossover_ke_on_adjacency(s, &adjacency, opts)
}

/// Protocol from an already shared adjacency matrix.
pub fn crossover_ke_on_adjacency(
    s: &mut Session,
    adjacency: &SharedMatrix,
    opts: &ProtocolOptions,
) -> Result<CrossoverOutput, MpcError> {
    let n = adjacency.rows();
    if adjacency.cols() != n {
        return Err(MpcError::LengthMismatch(adjacency.rows(), adjacency.cols()));
    }
    let handle = match &opts.shuffle {
        Shuffle::Identity => None,
        Shuffle::Random => Some(PermutationHandle::random(s, n)?),
        Shuffle::Fixed(perms) => {
            let contributors = PermutationHandle::contributors(s);
            if perms.len() != contributors.len() {
                return Err(MpcError::Config(format!(
                    "{} fixed permutations for {} contributors",
                    perms.len(),
                    contributors.len()
                )));
            }
            let mine = match contributors.iter().position(|&c| c == s.me()) {
                Some(k) => Some(fixed_matrix(s, &perms[k], n)?),
                None => None,
            };
            Some(PermutationHandle::from_inputs(s, mine.as_deref(), n)?)
        }
    };
    let shuffled = match &handle {
        Some(h) => {
            if opts.verify_permutations {
                for p in h.matrices() {
                    verify_permutation(s, p)?;
                }
            }
            shuffle_matrix(s, h, adjacency)?
        }
        None => adjacency.clone(),
    };
    let (mate, snapshots) = grow_trees(s, &shuffled, opts.trace)?;
    let mate = match &handle {
        Some(h) => unshuffle_matrix(s, h, &mate)?,
        None => mate,
    };
    Ok(CrossoverOutput { mate, snapshots })
}

fn fixed_matrix(s: &Session, perm: &[usize], n: usize) -> Result<Vec<FieldElement>, MpcError> {
    let mut seen = vec![false; n];
    if perm.len() != n || perm.iter().any(|&j| j >= n || std::mem::replace(&mut seen[j], true)) {
        return Err(MpcError::InvalidPermutation);
    }
    let mut m = vec![s.element(0); n * n];
    for (i, &j) in perm.iter().enumerate() {
        m[i * n + j] = s.element(1);
    }
    Ok(m)
}

/// Tree growing from every potential root, on shuffled labels.
fn grow_trees(s: &mut Session, a: &SharedMatrix, trace: bool) -> Result<(SharedVector, Vec<StateShares>), MpcError> {
    let n = a.rows();
    let one = s.constant(1);
    let mut mate = s.zeros(n);
    let mut snapshots = Vec::new();
    // columns, so that A(x, y) for public y is an inner product with I_x
    let columns: Vec<Vec<SharedValue>> = (0..n).map(|y| (0..n).map(|x| a.get(x, y)).collect()).collect();

    for r in 1..=n {
        let root_exposed = eqz_batch(s, &[mate[r - 1]])?[0];
        let root = root_exposed * s.element(r as u64);
        let mut non_tree = SharedVector::new(vec![one; n]);
        non_tree[r - 1] = one - root_exposed;
        let mut grandfather = s.zeros(n);
        // every node enters a tree at most once, plus the root
        let mut queue = ObliviousQueue::new(s, n + 1);
        queue.push(s, root)?;
        let mut found = s.zero();

        for _ in 0..n {
            let popped = queue.pop(s);
            let x = s.mul(one - found, popped)?;
            let ix = index_vector(s, x, n)?;
            let pairs: Vec<(&[SharedValue], &[SharedValue])> =
                columns.iter().map(|c| (ix.as_slice(), c.as_slice())).collect();
            let adjacent = inner_product(s, &pairs)?;

            for y in 1..=n {
                let a_xy = adjacent[y - 1];
                let exposed = eqz_batch(s, &[mate[y - 1], mate[r - 1]])?;
                let aug_path = and_all(s, vec![vec![non_tree[y - 1], a_xy, exposed[0], exposed[1]]])?[0];
                found = or(s, found, aug_path)?;
                update_m(s, &mut mate, &grandfather, x, y, aug_path)?;

                let y_anc_x = anc_check(s, &grandfather, x, y)?;
                let mate_is_x = eq_batch(s, &[mate[y - 1]], &[x])?[0];
                let cond = and_all(
                    s,
                    vec![vec![non_tree[y - 1], one - mate_is_x, one - found, a_xy, one - y_anc_x]],
                )?[0];
                let z = s.mul(cond, mate[y - 1])?;
                // cond implies nonTree(y) = 1, so clearing it is linear
                non_tree[y - 1] -= cond;

                // grandfather(z) <- x and the queue write share one batch
                let tail = queue.tail_position(s);
                let inds = index_vectors_sized(s, &[(z, n), (tail, n + 1)])?;
                let mut bs = inds[0].clone().into_inner();
                bs.extend_from_slice(&inds[1]);
                let mut targets = std::iter::repeat(x).take(n).collect::<Vec<_>>();
                targets.extend(std::iter::repeat(z).take(n + 1));
                let mut current = grandfather.clone().into_inner();
                current.extend_from_slice(queue.slots());
                let diff: Vec<SharedValue> = targets.iter().zip(&current).map(|(&t, &c)| t - c).collect();
                let prod = s.mul_batch(&bs, &diff)?;
                let written: Vec<SharedValue> = prod.iter().zip(&current).map(|(&p, &c)| p + c).collect();
                grandfather = SharedVector::new(written[..n].to_vec());
                queue.commit_push(s, SharedVector::new(written[n..].to_vec()), cond);
            }
        }
        if trace {
            snapshots.push(StateShares {
                root: r,
                mate: mate.shares(),
                non_tree: non_tree.shares(),
                grandfather: grandfather.shares(),
            });
        }
    }
    Ok((mate, snapshots))
}

/// Augments along the path ending in `(x, y)` when `aug_path` is 1.
///
/// Walks `|V|` steps up the grandfather chain, flipping matched and
/// unmatched edges. With `aug_path = 0` the walk starts at the dummy node
/// and nothing changes.
pub fn update_m(
    s: &mut Session,
    mate: &mut SharedVector,
    grandfather: &[SharedValue],
    x: SharedValue,
    y: usize,
    aug_path: SharedValue,
) -> Result<(), MpcError> {
    let n = mate.len();
    // x <- augPath * x and mate(y) <- augPath ? x : mate(y), in one round
    let prod = s.mul_batch(&[aug_path, aug_path], &[x, x - mate[y - 1]])?;
    mate[y - 1] += prod[1];
    let mut y = s.constant(y as u64);
    let mut ix = index_vector(s, prod[0], n)?;
    for step in 0..n {
        // next = mate(x), x' = grandfather(x)
        let read = inner_product(s, &[(&ix, mate), (&ix, grandfather)])?;
        let (next, gx) = (read[0], read[1]);
        let last = step + 1 == n;
        let inds = if last {
            index_vectors(s, &[next], n)?
        } else {
            index_vectors(s, &[next, gx], n)?
        };
        // mate(x) <- y and mate(next) <- x'; x and next are distinct or both 0
        let mut bs = ix.clone().into_inner();
        bs.extend_from_slice(&inds[0]);
        let mut diff: Vec<SharedValue> = mate.iter().map(|&m| y - m).collect();
        diff.extend(mate.iter().map(|&m| gx - m));
        let prod = s.mul_batch(&bs, &diff)?;
        for j in 0..n {
            mate[j] += prod[j] + prod[n + j];
        }
        y = next;
        if !last {
            ix = inds[1].clone();
        }
    }
    Ok(())
}

/// `[y is on the grandfather chain starting at x]`, walking `|V|` steps.
pub fn anc_check(s: &mut Session, grandfather: &[SharedValue], x: SharedValue, y: usize) -> Result<SharedValue, MpcError> {
    let n = grandfather.len();
    let one = s.constant(1);
    let mut y_anc_x = s.zero();
    let mut ix = index_vector(s, x, n)?;
    for step in 0..n {
        let hit = ix[y - 1];
        // y_anc_x <- hit ? 1 : y_anc_x, batched with x <- grandfather(x)
        let mut lhs = vec![hit];
        lhs.extend_from_slice(&ix);
        let mut rhs = vec![one - y_anc_x];
        rhs.extend_from_slice(grandfather);
        let prod = s.mul_batch(&lhs, &rhs)?;
        y_anc_x += prod[0];
        if step + 1 < n {
            let next = prod[1..].iter().fold(s.zero(), |acc, &p| acc + p);
            ix = index_vector(s, next, n)?;
        }
    }
    Ok(y_anc_x)
}

/// Replaces each 1-based node index in `mate` by the public id of that node;
/// 0 stays 0.
pub fn mates_to_ids(s: &mut Session, mate: &[SharedValue], ids: &[u64]) -> Result<SharedVector, MpcError> {
    let ind = index_vectors(s, mate, ids.len())?;
    let ids: Vec<FieldElement> = ids.iter().map(|&id| s.element(id)).collect();
    Ok(ind
        .iter()
        .map(|row| row.iter().zip(&ids).fold(s.zero(), |acc, (&b, &id)| acc + b * id))
        .collect())
}

/// Reconstructs the per-root snapshots collected by all peers.
pub fn reconstruct_snapshots(
    per_peer: &[Vec<StateShares>],
    params: &SharingParams,
) -> Result<Vec<TreeSnapshot>, MpcError> {
    let first = per_peer.first().map(Vec::len).unwrap_or(0);
    if per_peer.iter().any(|p| p.len() != first) {
        return Err(MpcError::Config("peers recorded different numbers of snapshots".into()));
    }
    let open = |pick: &dyn Fn(&StateShares) -> &Vec<FieldElement>, k: usize| -> Result<Vec<usize>, MpcError> {
        let len = pick(&per_peer[0][k]).len();
        (0..len)
            .map(|j| {
                let shares: Vec<Share> = per_peer
                    .iter()
                    .enumerate()
                    .map(|(p, snaps)| Share::new(p + 1, pick(&snaps[k])[j]))
                    .collect();
                Ok(reconstruct(&shares, params)?.value() as usize)
            })
            .collect()
    };
    (0..first)
        .map(|k| {
            Ok(TreeSnapshot {
                root: per_peer[0][k].root,
                mate: open(&|s| &s.mate, k)?,
                non_tree: open(&|s| &s.non_tree, k)?,
                grandfather: open(&|s| &s.grandfather, k)?,
            })
        })
        .collect()
}
