use crate::error::{Error, Result};
use crate::geom::Vec3;

/// Greedy farthest point sampling.
///
/// Starts at `seed mod n`; every following pick maximizes the distance to
/// the already selected set, ties going to the lowest index. Returns `k`
/// distinct indices in selection order.
pub fn fps(points: &[Vec3], k: usize, seed: u64) -> Result<Vec<usize>> {
    let n = points.len();
    if n == 0 {
        return Err(Error::EmptyPointSet);
    }
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "fps needs 1 <= k <= {n}, got k = {k}"
        )));
    }
    let first = (seed % n as u64) as usize;
    let mut selected = Vec::with_capacity(k);
    selected.push(first);
    let mut min_d2: Vec<f64> = points
        .iter()
        .map(|p| (p - points[first]).norm_squared())
        .collect();
    min_d2[first] = f64::NEG_INFINITY;
    while selected.len() < k {
        let mut best = usize::MAX;
        let mut best_d = f64::NEG_INFINITY;
        for (i, &d) in min_d2.iter().enumerate() {
            if d > best_d {
                best_d = d;
                best = i;
            }
        }
        selected.push(best);
        let p = points[best];
        min_d2[best] = f64::NEG_INFINITY;
        for (i, d) in min_d2.iter_mut().enumerate() {
            if *d > f64::NEG_INFINITY {
                let nd = (points[i] - p).norm_squared();
                if nd < *d {
                    *d = nd;
                }
            }
        }
    }
    Ok(selected)
}
