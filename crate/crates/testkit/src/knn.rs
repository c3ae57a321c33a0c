//! Brute-force cosine ranking over raw (unnormalised) vectors.

fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| f64::from(*x) * f64::from(*y)).sum();
    let na: f64 = a.iter().map(|x| f64::from(*x).powi(2)).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| f64::from(*x).powi(2)).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Indices of the `k` most similar vectors; equal scores keep insertion order.
pub fn brute_force_topk(vectors: &[Vec<f32>], query: &[f32], k: usize) -> Vec<usize> {
    let mut scored: Vec<(usize, f64)> = vectors.iter().map(|v| cosine(v, query)).enumerate().collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.into_iter().take(k).map(|(i, _)| i).collect()
}

/// Scores in the same order as [`brute_force_topk`].
pub fn brute_force_scores(vectors: &[Vec<f32>], query: &[f32], k: usize) -> Vec<f64> {
    brute_force_topk(vectors, query, k)
        .into_iter()
        .map(|i| cosine(&vectors[i], query))
        .collect()
}
