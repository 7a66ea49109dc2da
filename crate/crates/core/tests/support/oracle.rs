use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use segmatch::matching::MatchProblem;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Multiple of 2^-10 in `[0, max]`; sums of such values are exact.
pub fn dyadic<R: Rng>(r: &mut R, max: f64) -> f64 {
    let steps = (max * 1024.0) as u32;
    r.random_range(0..=steps) as f64 / 1024.0
}

pub fn random_edges<R: Rng>(r: &mut R, n: usize, p: f64) -> Vec<(usize, usize)> {
    let mut e = Vec::new();
    for a in 0..n {
        for b in (a + 1)..n {
            if r.random_bool(p) {
                e.push((a, b));
            }
        }
    }
    e
}

/// Random instance with `|V1|, |V2| <= max_nodes` and dyadic costs. With
/// `coarse`, costs come from a grid of eighths so that ties are common.
pub fn random_problem(seed: u64, max_nodes: usize, coarse: bool) -> MatchProblem {
    let mut r = rng(seed);
    let n1 = r.random_range(1..=max_nodes);
    let n2 = r.random_range(1..=max_nodes);
    let cost = |r: &mut ChaCha8Rng, max: f64| {
        if coarse {
            (r.random_range(0..=(max * 8.0) as u32)) as f64 / 8.0
        } else {
            dyadic(r, max)
        }
    };
    let node_cost: Vec<Vec<f64>> = (0..n1).map(|_| (0..n2).map(|_| cost(&mut r, 0.5)).collect()).collect();
    let node_delete: Vec<f64> = (0..n1).map(|_| cost(&mut r, 0.25)).collect();
    let src_edges = random_edges(&mut r, n1, 0.5);
    let edge_delete: Vec<f64> = src_edges.iter().map(|_| cost(&mut r, 0.25)).collect();
    let dst_edges = random_edges(&mut r, n2, 0.5);
    MatchProblem::new(node_cost, node_delete, src_edges, edge_delete, n2, dst_edges).unwrap()
}

/// Every injective partial map from `0..n1` into `0..n2`.
pub fn partial_injections(n1: usize, n2: usize) -> Vec<Vec<Option<usize>>> {
    fn go(i: usize, n1: usize, n2: usize, cur: &mut Vec<Option<usize>>, used: &mut Vec<bool>, out: &mut Vec<Vec<Option<usize>>>) {
        if i == n1 {
            out.push(cur.clone());
            return;
        }
        cur.push(None);
        go(i + 1, n1, n2, cur, used, out);
        cur.pop();
        for k in 0..n2 {
            if !used[k] {
                used[k] = true;
                cur.push(Some(k));
                go(i + 1, n1, n2, cur, used, out);
                cur.pop();
                used[k] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(0, n1, n2, &mut Vec::new(), &mut vec![false; n2], &mut out);
    out
}

/// Brute-force optimum of the full program: for each node map, each source
/// edge independently picks the cheapest subset of target edges allowed by
/// the combined constraint and binary deletion variables. Returns the optimal
/// value and the lexicographically smallest optimal node map (deletion
/// sorting after every target).
pub fn brute_force(p: &MatchProblem) -> (f64, Vec<Option<usize>>) {
    let dst: Vec<(usize, usize)> = p.dst_edges().to_vec();
    let mut best = (f64::INFINITY, Vec::new());
    for x in partial_injections(p.n1(), p.n2()) {
        let xv = |i: usize, k: usize| if x[i] == Some(k) { 1 } else { 0 };
        let mut j = 0.0;
        for (i, a) in x.iter().enumerate() {
            j += match a {
                Some(k) => p.node_cost(i, *k),
                None => p.node_delete(i),
            };
        }
        for (e, &(a, b)) in p.src_edges().iter().enumerate() {
            let mut cheapest = f64::INFINITY;
            for mask in 0u32..(1 << dst.len()) {
                let chosen: Vec<(usize, usize)> =
                    (0..dst.len()).filter(|t| mask & (1 << t) != 0).map(|t| dst[t]).collect();
                if chosen.len() > 1 {
                    continue; // beta would be negative
                }
                let ok = (0..p.n2()).all(|k| {
                    let lhs = chosen.iter().filter(|&&(u, v)| u == k || v == k).count();
                    lhs <= xv(a, k) + xv(b, k)
                });
                if !ok {
                    continue;
                }
                let beta = 1.0 - chosen.len() as f64;
                let c = chosen.len() as f64 * p.edge_subst() + beta * p.edge_delete(e);
                cheapest = cheapest.min(c);
            }
            j += cheapest;
        }
        let key = |v: &Vec<Option<usize>>| v.iter().map(|o| o.unwrap_or(usize::MAX)).collect::<Vec<_>>();
        if j < best.0 || (j == best.0 && key(&x) < key(&best.1)) {
            best = (j, x);
        }
    }
    best
}

/// Minimum over all permutations, for square or rectangular matrices
/// (assigning `min(n, m)` pairs).
pub fn assignment_brute_force(cost: &[Vec<f64>]) -> f64 {
    let n = cost.len();
    let m = if n == 0 { 0 } else { cost[0].len() };
    fn go(i: usize, cost: &[Vec<f64>], used: &mut Vec<bool>, acc: f64, left: usize, best: &mut f64) {
        if left == 0 || i == cost.len() {
            if left == 0 {
                *best = best.min(acc);
            }
            return;
        }
        // Rows may be skipped only when there are more rows than columns.
        if cost.len() - i > left {
            go(i + 1, cost, used, acc, left, best);
        }
        for k in 0..used.len() {
            if !used[k] {
                used[k] = true;
                go(i + 1, cost, used, acc + cost[i][k], left - 1, best);
                used[k] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    go(0, cost, &mut vec![false; m], 0.0, n.min(m), &mut best);
    if n.min(m) == 0 {
        0.0
    } else {
        best
    }
}

/// Softmax cross-entropy written out directly as
/// `log(1 + Σ_{j≠y} exp(s_j - s_y))` with `s_j = z·m_j / tau`.
pub fn naive_contrastive_loss(z: &[f64], label: usize, means: &[Vec<f64>], tau: f64) -> f64 {
    let s: Vec<f64> = means.iter().map(|m| z.iter().zip(m).map(|(a, b)| a * b).sum::<f64>() / tau).collect();
    let rest: f64 = (0..s.len()).filter(|&j| j != label).map(|j| (s[j] - s[label]).exp()).sum();
    rest.ln_1p()
}

/// Rand index adjusted for chance, counted over all unordered pairs.
pub fn pair_counting_ari(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len();
    let (mut both, mut in_a, mut in_b) = (0.0, 0.0, 0.0);
    for i in 0..n {
        for j in (i + 1)..n {
            let sa = a[i] == a[j];
            let sb = b[i] == b[j];
            in_a += f64::from(u8::from(sa));
            in_b += f64::from(u8::from(sb));
            both += f64::from(u8::from(sa && sb));
        }
    }
    let pairs = (n * n.saturating_sub(1) / 2) as f64;
    let expected = in_a * in_b / pairs;
    let max = (in_a + in_b) / 2.0;
    if max == expected {
        return 1.0;
    }
    (both - expected) / (max - expected)
}

/// Mean silhouette with cosine distance `1 - a·b`.
pub fn cosine_silhouette(points: &[Vec<f64>], labels: &[usize]) -> f64 {
    let dist = |i: usize, j: usize| 1.0 - points[i].iter().zip(&points[j]).map(|(a, b)| a * b).sum::<f64>();
    let mut clusters: Vec<usize> = labels.to_vec();
    clusters.sort_unstable();
    clusters.dedup();
    let mut total = 0.0;
    for i in 0..points.len() {
        let mean_to = |c: usize| {
            let members: Vec<usize> = (0..points.len()).filter(|&j| j != i && labels[j] == c).collect();
            if members.is_empty() {
                None
            } else {
                Some(members.iter().map(|&j| dist(i, j)).sum::<f64>() / members.len() as f64)
            }
        };
        let Some(a) = mean_to(labels[i]) else { continue };
        let b = clusters.iter().filter(|&&c| c != labels[i]).filter_map(|&c| mean_to(c)).fold(f64::INFINITY, f64::min);
        total += (b - a) / a.max(b);
    }
    total / points.len() as f64
}

/// Intersection over union of two index sets.
pub fn set_iou(a: &[usize], b: &[usize]) -> f64 {
    let a: std::collections::BTreeSet<_> = a.iter().collect();
    let b: std::collections::BTreeSet<_> = b.iter().collect();
    let union = a.union(&b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(&b).count() as f64 / union as f64
}
