//! Small dense-vector helpers shared across modules.

/// Pairwise (cascade) summation; error grows as O(log n) instead of O(n).
pub fn pairwise_sum(v: &[f64]) -> f64 {
    const BLOCK: usize = 16;
    if v.len() <= BLOCK {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

pub fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `Σ weights[i] * vectors[i]`, summed pairwise over `i` per coordinate.
pub fn weighted_sum<V: AsRef<[f64]>>(vectors: &[V], weights: &[f64], dim: usize) -> Vec<f64> {
    debug_assert_eq!(vectors.len(), weights.len());
    fn rec<V: AsRef<[f64]>>(vs: &[V], ws: &[f64], out: &mut [f64]) {
        const BLOCK: usize = 16;
        if vs.len() <= BLOCK {
            for (v, &w) in vs.iter().zip(ws) {
                if w != 0.0 {
                    axpy(out, w, v.as_ref());
                }
            }
            return;
        }
        let mid = vs.len() / 2;
        let mut right = vec![0.0; out.len()];
        rec(&vs[..mid], &ws[..mid], out);
        rec(&vs[mid..], &ws[mid..], &mut right);
        for (o, r) in out.iter_mut().zip(&right) {
            *o += r;
        }
    }
    let mut out = vec![0.0; dim];
    rec(vectors, weights, &mut out);
    out
}

/// Row-major dense matrix-vector helpers over `Vec<Vec<f64>>`-free storage.
pub fn mat_vec(data: &[f64], rows: usize, cols: usize, x: &[f64]) -> Vec<f64> {
    (0..rows)
        .map(|i| dot(&data[i * cols..(i + 1) * cols], x))
        .collect()
}

pub fn mat_t_vec(data: &[f64], rows: usize, cols: usize, y: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; cols];
    for i in 0..rows {
        axpy(&mut out, y[i], &data[i * cols..(i + 1) * cols]);
    }
    out
}
