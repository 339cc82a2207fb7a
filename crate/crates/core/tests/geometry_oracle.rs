//! Compares the conflict relation against an independent sampled model.

mod common;

use common::{oracle_conflict, oracle_path, V};
use intersection_consensus::geometry::IntersectionGeometry;

#[test]
fn conflict_relation_matches_sampled_paths() {
    for lanes in [2, 4, 6, 8] {
        let g = IntersectionGeometry::new(lanes).unwrap();
        let half = f64::from(lanes / 2);
        let dirs = g.all_directions();
        assert_eq!(dirs.len(), 12 * lanes as usize / 2);
        let mut disagreements = Vec::new();
        let mut closest_clear = f64::INFINITY;
        for (i, a) in dirs.iter().enumerate() {
            for b in dirs.iter().skip(i) {
                let (oracle, dist) = oracle_conflict(a, b, half);
                if !oracle {
                    closest_clear = closest_clear.min(dist);
                }
                if g.conflicts(a, b).unwrap() != oracle {
                    disagreements.push(format!("{a} vs {b}: distance {dist:.3}"));
                }
            }
        }
        assert!(disagreements.is_empty(), "{lanes} lanes: {disagreements:?}");
        // Clear pairs are clear by a wide margin, so the threshold is not doing the work.
        assert!(closest_clear >= 0.5, "{lanes} lanes: {closest_clear}");
    }
}

#[test]
fn doubled_integer_paths_agree_with_the_oracle_points() {
    for lanes in [2, 4, 6, 8] {
        let g = IntersectionGeometry::new(lanes).unwrap();
        for d in g.all_directions() {
            let ours: Vec<V> = g
                .path(&d)
                .unwrap()
                .into_iter()
                .map(|(x, y)| (f64::from(x) / 2.0, f64::from(y) / 2.0))
                .collect();
            assert_eq!(ours, oracle_path(&d, f64::from(lanes / 2)), "{d}");
        }
    }
}

#[test]
fn matrix_is_symmetric_with_conflicting_diagonal() {
    for lanes in [2, 4, 6, 8] {
        let g = IntersectionGeometry::new(lanes).unwrap();
        let csv = g.conflict_matrix_csv();
        let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').skip(1).collect()).collect();
        let n = rows.len();
        assert_eq!(n, 6 * lanes as usize);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row[i], "1");
            for (j, cell) in row.iter().enumerate() {
                assert_eq!(*cell, rows[j][i]);
            }
        }
    }
}
