//! Communication clusters among delivering drones.

/// Connected components, of size at least two, of the graph linking drones
/// within `radius` meters of each other. Input is `(drone id, x, y)`; each
/// cluster lists drone ids ascending and clusters are ordered by their
/// smallest id.
pub fn detect_clusters(positions: &[(usize, f64, f64)], radius: f64) -> Vec<Vec<usize>> {
    let n = positions.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for a in 0..n {
        for b in a + 1..n {
            let (_, xa, ya) = positions[a];
            let (_, xb, yb) = positions[b];
            if (xa - xb).hypot(ya - yb) <= radius {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(positions[i].0);
    }
    let mut clusters: Vec<Vec<usize>> = groups
        .into_values()
        .filter(|g| g.len() >= 2)
        .map(|mut g| {
            g.sort_unstable();
            g
        })
        .collect();
    clusters.sort();
    clusters
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_is_one_cluster() {
        let pos = [(0, 0.0, 0.0), (1, 250.0, 0.0), (2, 500.0, 0.0)];
        assert_eq!(detect_clusters(&pos, 300.0), vec![vec![0, 1, 2]]);
    }

    #[test]
    fn just_outside_radius() {
        let pos = [(0, 0.0, 0.0), (1, 301.0, 0.0)];
        assert!(detect_clusters(&pos, 300.0).is_empty());
        let pos = [(0, 0.0, 0.0), (1, 300.0, 0.0)];
        assert_eq!(detect_clusters(&pos, 300.0), vec![vec![0, 1]]);
    }

    #[test]
    fn separate_groups_are_ordered() {
        let pos = [
            (5, 1000.0, 0.0),
            (3, 0.0, 0.0),
            (4, 1100.0, 0.0),
            (1, 50.0, 0.0),
            (9, 5000.0, 0.0),
        ];
        assert_eq!(detect_clusters(&pos, 300.0), vec![vec![1, 3], vec![4, 5]]);
    }

    #[test]
    fn no_drones() {
        assert!(detect_clusters(&[], 300.0).is_empty());
    }
}
