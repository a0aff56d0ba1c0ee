//! Agglomerative clustering with Ward's minimum-variance criterion.
//!
//! Lance-Williams recursion over the pairwise cost matrix with per-row
//! nearest-neighbor caching. Merge costs are the Ward variance increase
//! `|A||B| / (|A|+|B|) * ||mean(A) - mean(B)||^2`; ties break on the
//! smaller cluster-id pair, so the merge sequence is fully deterministic
//! and comparable against a from-scratch recomputation.

/// One agglomeration step. Cluster ids follow the usual linkage convention:
/// points are 0..n, the cluster created by step `s` is `n + s`.
#[derive(Debug, Clone, PartialEq)]
pub struct Merge {
    pub cluster_a: usize,
    pub cluster_b: usize,
    /// Ward variance increase of this merge.
    pub cost: f64,
    /// Size of the merged cluster.
    pub size: usize,
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// (cost, cid_lo, cid_hi) lexicographic candidate comparison.
fn better(
    cost: f64,
    lo: usize,
    hi: usize,
    best_cost: f64,
    best_lo: usize,
    best_hi: usize,
) -> bool {
    cost < best_cost
        || (cost == best_cost && (lo, hi) < (best_lo, best_hi))
}

/// Full Ward linkage of `points`; returns `n - 1` merges in order.
#[allow(clippy::needless_range_loop)]
pub fn ward_linkage(points: &[Vec<f64>]) -> Vec<Merge> {
    let n = points.len();
    if n <= 1 {
        return Vec::new();
    }
    // Condensed upper-triangle cost matrix over slots.
    let idx = |i: usize, j: usize| -> usize {
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        lo * n - lo * (lo + 1) / 2 + (hi - lo - 1)
    };
    let mut cost = vec![0.0f64; n * (n - 1) / 2];
    for i in 0..n {
        for j in i + 1..n {
            cost[idx(i, j)] = 0.5 * squared_distance(&points[i], &points[j]);
        }
    }
    let mut active: Vec<bool> = vec![true; n];
    let mut size: Vec<usize> = vec![1; n];
    let mut cid: Vec<usize> = (0..n).collect();

    // Per-slot nearest neighbor (cost, slot), under the tie-break order.
    let mut nn: Vec<Option<(f64, usize)>> = vec![None; n];
    #[allow(clippy::needless_range_loop)]
    let scan_row = |slot: usize,
                    active: &[bool],
                    cid: &[usize],
                    cost: &[f64]|
     -> Option<(f64, usize)> {
        let mut best: Option<(f64, usize)> = None;
        for other in 0..n {
            if other == slot || !active[other] {
                continue;
            }
            let c = cost[idx(slot, other)];
            let (lo, hi) = ordered(cid[slot], cid[other]);
            let replace = match best {
                None => true,
                Some((bc, bslot)) => {
                    let (blo, bhi) = ordered(cid[slot], cid[bslot]);
                    better(c, lo, hi, bc, blo, bhi)
                }
            };
            if replace {
                best = Some((c, other));
            }
        }
        best
    };
    for slot in 0..n {
        nn[slot] = scan_row(slot, &active, &cid, &cost);
    }

    let mut merges = Vec::with_capacity(n - 1);
    for step in 0..n - 1 {
        // Global best pair among row champions.
        let mut pick: Option<(f64, usize, usize)> = None; // (cost, slot_i, slot_j)
        for slot in 0..n {
            if !active[slot] {
                continue;
            }
            let Some((c, other)) = nn[slot] else { continue };
            let (lo, hi) = ordered(cid[slot], cid[other]);
            let replace = match pick {
                None => true,
                Some((bc, bi, bj)) => {
                    let (blo, bhi) = ordered(cid[bi], cid[bj]);
                    better(c, lo, hi, bc, blo, bhi)
                }
            };
            if replace {
                pick = Some((c, slot, other));
            }
        }
        let (merge_cost, slot_i, slot_j) = pick.expect("active pair exists");
        let (keep, drop) = if slot_i < slot_j {
            (slot_i, slot_j)
        } else {
            (slot_j, slot_i)
        };
        let (cid_lo, cid_hi) = ordered(cid[keep], cid[drop]);
        let (size_keep, size_drop) = (size[keep], size[drop]);
        let merged_size = size_keep + size_drop;
        merges.push(Merge {
            cluster_a: cid_lo,
            cluster_b: cid_hi,
            cost: merge_cost,
            size: merged_size,
        });

        // Lance-Williams update of the kept slot's row.
        active[drop] = false;
        for other in 0..n {
            if other == keep || other == drop || !active[other] {
                continue;
            }
            let c_ik = cost[idx(keep, other)];
            let c_jk = cost[idx(drop, other)];
            let nk = size[other] as f64;
            let ni = size_keep as f64;
            let nj = size_drop as f64;
            cost[idx(keep, other)] =
                ((ni + nk) * c_ik + (nj + nk) * c_jk - nk * merge_cost) / (ni + nj + nk);
        }
        size[keep] = merged_size;
        cid[keep] = n + step;

        // Refresh neighbor caches invalidated by the merge.
        nn[drop] = None;
        nn[keep] = scan_row(keep, &active, &cid, &cost);
        for slot in 0..n {
            if !active[slot] || slot == keep {
                continue;
            }
            let needs_rescan = matches!(nn[slot], Some((_, o)) if o == keep || o == drop)
                || nn[slot].is_none();
            if needs_rescan {
                nn[slot] = scan_row(slot, &active, &cid, &cost);
            } else if let Some((bc, bslot)) = nn[slot] {
                // The kept slot's refreshed cost may now beat the cache.
                let c = cost[idx(slot, keep)];
                let (lo, hi) = ordered(cid[slot], cid[keep]);
                let (blo, bhi) = ordered(cid[slot], cid[bslot]);
                if better(c, lo, hi, bc, blo, bhi) {
                    nn[slot] = Some((c, keep));
                }
            }
        }
    }
    merges
}

fn ordered(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Cut the dendrogram at `k` clusters: apply the first `n - k` merges and
/// label the resulting groups canonically (sorted by the smallest original
/// point index they contain).
#[allow(clippy::needless_range_loop)]
pub fn cut_to_labels(merges: &[Merge], n: usize, k: usize) -> Vec<usize> {
    assert!(k >= 1 && k <= n, "cut must satisfy 1 <= k <= n");
    let mut parent: Vec<usize> = (0..2 * n - 1).collect();
    fn root(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (step, merge) in merges.iter().take(n - k).enumerate() {
        let new_id = n + step;
        let a = root(&mut parent, merge.cluster_a);
        let b = root(&mut parent, merge.cluster_b);
        parent[a] = new_id;
        parent[b] = new_id;
    }
    // Map roots to canonical labels by first-member order.
    let mut label_of_root: std::collections::BTreeMap<usize, usize> =
        std::collections::BTreeMap::new();
    let mut labels = vec![0usize; n];
    for point in 0..n {
        let r = root(&mut parent, point);
        let next = label_of_root.len();
        let label = *label_of_root.entry(r).or_insert(next);
        labels[point] = label;
    }
    labels
}
