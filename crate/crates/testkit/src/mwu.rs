//! Exact Mann-Whitney p by enumerating every assignment of ranks to group A.

/// All k-subsets of 0..n, in lexicographic order.
fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// U for group A given which ranks (1-based positions in the pooled order) it holds.
fn u_of(ranks: &[usize], na: usize) -> f64 {
    let r: usize = ranks.iter().map(|i| i + 1).sum();
    r as f64 - (na * (na + 1)) as f64 / 2.0
}

/// U_a for tie-free samples, by counting pairs directly.
pub fn u_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut u = 0.0;
    for x in a {
        for y in b {
            if x > y {
                u += 1.0;
            } else if x == y {
                u += 0.5;
            }
        }
    }
    u
}

/// Two-sided exact p: twice the smaller tail, capped at 1.
pub fn exact_p(na: usize, nb: usize, u: f64) -> f64 {
    let all = subsets(na + nb, na);
    let total = all.len() as f64;
    let us: Vec<f64> = all.iter().map(|s| u_of(s, na)).collect();
    let lower = us.iter().filter(|&&x| x <= u).count() as f64 / total;
    let upper = us.iter().filter(|&&x| x >= u).count() as f64 / total;
    (2.0 * lower.min(upper)).min(1.0)
}
