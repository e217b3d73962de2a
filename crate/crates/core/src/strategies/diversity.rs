//! Geometry-driven strategies: greedy k-center coverage, gradient-embedding
//! D² sampling, and cluster typicality. All operate on either the
//! classifier's penultimate activations or the raw feature rows.

use super::{EmbeddingSource, QueryContext, QueryResult};
use crate::error::{Error, Result};
use crate::seeding::Stream;
use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;

/// Greedy k-center: each pick maximizes the minimum distance to the labeled
/// set plus everything already chosen. Ties go to the lowest dataset index.
pub(super) fn coreset_query(
    ctx: &mut QueryContext,
    candidates: &[usize],
    q: usize,
    source: EmbeddingSource,
) -> Result<QueryResult> {
    let cand_emb = embeddings_for(ctx, candidates, source)?;
    let labeled = ctx.pool.labeled_indices();
    let lab_emb = embeddings_for(ctx, &labeled, source)?;
    let n = candidates.len();
    // Squared distances rank identically to Euclidean ones.
    let mut min_d: Vec<f64> = (0..n)
        .map(|c| {
            lab_emb
                .rows()
                .into_iter()
                .map(|l| sq_dist(cand_emb.row(c), l))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let mut used = vec![false; n];
    let mut chosen = Vec::with_capacity(q);
    for _ in 0..q {
        let mut best = None;
        for c in 0..n {
            if !used[c] && best.is_none_or(|b: usize| min_d[c] > min_d[b]) {
                best = Some(c);
            }
        }
        let best = best.expect("q_eff <= candidate count");
        used[best] = true;
        chosen.push(candidates[best]);
        for c in 0..n {
            if !used[c] {
                min_d[c] = min_d[c].min(sq_dist(cand_emb.row(c), cand_emb.row(best)));
            }
        }
    }
    Ok(QueryResult {
        chosen,
        scores: None,
    })
}

/// First pick is the largest gradient embedding; the rest follow the
/// k-means++ rule — probability proportional to squared distance from the
/// nearest chosen embedding, drawn from the omega stream.
pub(super) fn badge_query(
    ctx: &mut QueryContext,
    candidates: &[usize],
    q: usize,
) -> Result<QueryResult> {
    let x = ctx.data.x.select(Axis(0), candidates);
    let emb = ctx.classifier.gradient_embedding(x.view())?;
    let n = candidates.len();
    let norms: Vec<f64> = (0..n)
        .map(|c| emb.row(c).iter().map(|v| v * v).sum::<f64>())
        .collect();
    if let Some(bad) = norms.iter().find(|v| !v.is_finite()) {
        return Err(Error::protocol(format!(
            "non-finite gradient embedding norm {bad}"
        )));
    }
    let mut first = 0;
    for c in 1..n {
        if norms[c] > norms[first] {
            first = c;
        }
    }
    let mut used = vec![false; n];
    used[first] = true;
    let mut chosen = vec![candidates[first]];
    let mut d2: Vec<f64> = (0..n).map(|c| sq_dist(emb.row(c), emb.row(first))).collect();
    while chosen.len() < q {
        let pick = weighted_pick(&d2, &used, ctx.rng_omega);
        used[pick] = true;
        chosen.push(candidates[pick]);
        for c in 0..n {
            if !used[c] {
                d2[c] = d2[c].min(sq_dist(emb.row(c), emb.row(pick)));
            }
        }
    }
    Ok(QueryResult {
        chosen,
        scores: None,
    })
}

/// Draw an unused index with probability proportional to its weight. When
/// every weight is zero the lowest unused index wins.
fn weighted_pick(weights: &[f64], used: &[bool], rng: &mut Stream) -> usize {
    let total: f64 = weights
        .iter()
        .zip(used)
        .filter(|(_, &u)| !u)
        .map(|(&w, _)| w)
        .sum();
    if total > 0.0 {
        let u = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut last = None;
        for (c, (&w, &is_used)) in weights.iter().zip(used).enumerate() {
            if is_used {
                continue;
            }
            if w > 0.0 {
                acc += w;
                last = Some(c);
                if u < acc {
                    return c;
                }
            }
        }
        // Float rounding can leave u a hair past the final accumulator.
        if let Some(c) = last {
            return c;
        }
    }
    used.iter().position(|&u| !u).expect("an unused candidate remains")
}

/// Clusters the labeled set plus the candidates, orders clusters by labeled
/// coverage (ascending) then size (descending), and takes each cluster's
/// most typical unchosen candidate, wrapping around when picks outnumber
/// clusters. Clusters under `min_cluster_size` are skipped while a larger
/// alternative still has candidates.
pub(super) fn typiclust_query(
    ctx: &mut QueryContext,
    candidates: &[usize],
    q: usize,
    source: EmbeddingSource,
) -> Result<QueryResult> {
    let labeled = ctx.pool.labeled_indices();
    let n_lab = labeled.len();
    let rows: Vec<usize> = labeled.iter().chain(candidates).cloned().collect();
    let emb = embeddings_for(ctx, &rows, source)?;
    let n_points = emb.nrows();
    let k = (n_lab + q)
        .min(ctx.params.max_clusters)
        .min(n_points)
        .max(1);
    let assign = kmeans(emb.view(), k, ctx.rng_omega);

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (row, &cl) in assign.iter().enumerate() {
        members[cl].push(row);
    }
    let mut order: Vec<usize> = (0..k)
        .filter(|&cl| members[cl].iter().any(|&r| r >= n_lab))
        .collect();
    order.sort_by_key(|&cl| {
        let labeled_count = members[cl].iter().filter(|&&r| r < n_lab).count();
        (labeled_count, std::cmp::Reverse(members[cl].len()), cl)
    });

    let min_size = ctx.params.min_cluster_size;
    let mut taken = vec![false; n_points];
    let mut candidates_left: Vec<usize> = order
        .iter()
        .map(|&cl| members[cl].iter().filter(|&&r| r >= n_lab).count())
        .collect();
    let mut chosen = Vec::with_capacity(q);
    let mut cursor = 0usize;
    while chosen.len() < q {
        let big_available = order
            .iter()
            .enumerate()
            .any(|(pos, &cl)| candidates_left[pos] > 0 && members[cl].len() >= min_size);
        let mut scanned = 0;
        let pos = loop {
            let pos = cursor % order.len();
            cursor += 1;
            scanned += 1;
            assert!(scanned <= 2 * order.len(), "cluster scan failed to settle");
            if candidates_left[pos] == 0 {
                continue;
            }
            if members[order[pos]].len() >= min_size || !big_available {
                break pos;
            }
        };
        let cl = order[pos];
        let row = most_typical(&emb, &members[cl], &taken, n_lab);
        taken[row] = true;
        candidates_left[pos] -= 1;
        chosen.push(candidates[row - n_lab]);
    }
    Ok(QueryResult {
        chosen,
        scores: None,
    })
}

/// The untaken candidate row with maximum typicality: the inverse mean
/// distance to its `min(20, size - 1)` nearest neighbors inside the
/// cluster. Singleton clusters score infinite; ties take the lowest row.
fn most_typical(emb: &Array2<f64>, member_rows: &[usize], taken: &[bool], n_lab: usize) -> usize {
    let mut best: Option<(usize, f64)> = None;
    for &r in member_rows {
        if r < n_lab || taken[r] {
            continue;
        }
        let t = typicality(emb, member_rows, r);
        if best.is_none_or(|(_, bt)| t > bt) {
            best = Some((r, t));
        }
    }
    best.expect("cluster had an untaken candidate").0
}

pub(crate) fn typicality(emb: &Array2<f64>, member_rows: &[usize], row: usize) -> f64 {
    let k = 20.min(member_rows.len().saturating_sub(1));
    if k == 0 {
        return f64::INFINITY;
    }
    let mut dists: Vec<f64> = member_rows
        .iter()
        .filter(|&&m| m != row)
        .map(|&m| sq_dist(emb.row(row), emb.row(m)).sqrt())
        .collect();
    dists.sort_unstable_by(f64::total_cmp);
    let mean = dists[..k].iter().sum::<f64>() / k as f64;
    1.0 / mean
}

/// Lloyd's algorithm with k-means++ seeding from the given stream, capped at
/// 100 iterations or a relative inertia improvement under 1e-4. Empty
/// clusters keep their previous centroid.
pub(crate) fn kmeans(points: ArrayView2<f64>, k: usize, rng: &mut Stream) -> Vec<usize> {
    let n = points.nrows();
    let d = points.ncols();
    assert!(k >= 1 && k <= n, "need 1 <= k <= n");
    let mut centroids = Array2::zeros((k, d));
    let first = rng.random_range(0..n);
    centroids.row_mut(0).assign(&points.row(first));
    let mut is_centroid = vec![false; n];
    is_centroid[first] = true;
    let mut d2: Vec<f64> = (0..n)
        .map(|p| sq_dist(points.row(p), centroids.row(0)))
        .collect();
    for c in 1..k {
        let pick = weighted_pick(&d2, &is_centroid, rng);
        is_centroid[pick] = true;
        centroids.row_mut(c).assign(&points.row(pick));
        for p in 0..n {
            d2[p] = d2[p].min(sq_dist(points.row(p), centroids.row(c)));
        }
    }

    let mut assign = vec![0usize; n];
    let mut prev_inertia = f64::INFINITY;
    for _ in 0..100 {
        let mut inertia = 0.0;
        for p in 0..n {
            let mut best = 0;
            let mut best_d = sq_dist(points.row(p), centroids.row(0));
            for c in 1..k {
                let dist = sq_dist(points.row(p), centroids.row(c));
                if dist < best_d {
                    best = c;
                    best_d = dist;
                }
            }
            assign[p] = best;
            inertia += best_d;
        }
        if prev_inertia.is_finite() && (prev_inertia - inertia).abs() <= 1e-4 * prev_inertia {
            break;
        }
        prev_inertia = inertia;
        let mut sums = Array2::<f64>::zeros((k, d));
        let mut counts = vec![0usize; k];
        for p in 0..n {
            let mut row = sums.row_mut(assign[p]);
            row += &points.row(p);
            counts[assign[p]] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                let mut row = centroids.row_mut(c);
                row.assign(&sums.row(c));
                row /= counts[c] as f64;
            }
        }
    }
    assign
}

fn embeddings_for(
    ctx: &QueryContext,
    rows: &[usize],
    source: EmbeddingSource,
) -> Result<Array2<f64>> {
    let x = ctx.data.x.select(Axis(0), rows);
    match source {
        EmbeddingSource::Raw => Ok(x),
        EmbeddingSource::Classifier => ctx.classifier.embed(x.view()),
    }
}

pub(crate) fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum()
}
