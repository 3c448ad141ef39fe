use std::cmp::Reverse;
use std::collections::BinaryHeap;

use ordered::Key;

use crate::geom::Vec3;
use crate::spatial::KdTree;

const NEIGHBOURS: usize = 16;

mod ordered {
    use std::cmp::Ordering;

    /// Heap key `(nearest distance, index)` with a total order.
    #[derive(Debug, Clone, Copy, PartialEq)]
    pub struct Key(pub f64, pub usize);

    impl Eq for Key {}

    impl Ord for Key {
        fn cmp(&self, other: &Self) -> Ordering {
            self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
        }
    }

    impl PartialOrd for Key {
        fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
            Some(self.cmp(other))
        }
    }
}

/// Greedy sample elimination: repeatedly drops the point whose nearest
/// surviving neighbour is closest (lowest index on ties) until `target`
/// points remain. Returns the surviving indices in ascending order.
pub fn eliminate_samples(points: &[Vec3], target: usize) -> Vec<usize> {
    let n = points.len();
    if target >= n {
        return (0..n).collect();
    }
    let tree = KdTree::new(points);
    let neighbours: Vec<Vec<usize>> = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            tree.k_nearest(p, NEIGHBOURS + 1)
                .into_iter()
                .map(|(j, _)| j)
                .filter(|&j| j != i)
                .take(NEIGHBOURS)
                .collect()
        })
        .collect();

    let mut alive = vec![true; n];
    let nearest_alive = |i: usize, alive: &[bool]| -> f64 {
        if let Some(&j) = neighbours[i].iter().find(|&&j| alive[j]) {
            return (points[i] - points[j]).norm_squared();
        }
        // Every cached neighbour is gone; fall back to a full scan.
        (0..n)
            .filter(|&j| j != i && alive[j])
            .map(|j| (points[i] - points[j]).norm_squared())
            .fold(f64::INFINITY, f64::min)
    };

    // Nearest-neighbour distances only grow as points are removed, so stale
    // heap keys are lower bounds and can be refreshed lazily on pop.
    let mut heap: BinaryHeap<Reverse<Key>> = (0..n).map(|i| Reverse(Key(nearest_alive(i, &alive), i))).collect();
    let mut remaining = n;
    while remaining > target {
        let Reverse(Key(d, i)) = heap.pop().expect("heap holds every live point");
        let fresh = nearest_alive(i, &alive);
        if fresh != d {
            heap.push(Reverse(Key(fresh, i)));
            continue;
        }
        alive[i] = false;
        remaining -= 1;
    }
    (0..n).filter(|&i| alive[i]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keeps_everything_when_target_is_large() {
        let pts = vec![Vec3::zeros(), Vec3::x()];
        assert_eq!(eliminate_samples(&pts, 5), vec![0, 1]);
    }

    #[test]
    fn removes_the_crowded_point() {
        let pts = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(0.01, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(2.0, 0.0, 0.0),
        ];
        // 0 and 1 tie on nearest distance; the lower index goes first.
        assert_eq!(eliminate_samples(&pts, 3), vec![1, 2, 3]);
    }
}
