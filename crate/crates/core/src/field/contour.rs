use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use super::FieldGrid;
use crate::Vec2;

/// A piecewise-linear curve. Closed curves repeat their first point at the
/// end.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Polyline {
    pub points: Vec<Vec2>,
    pub closed: bool,
}

impl Polyline {
    /// Absolute shoelace area; zero for open curves.
    pub fn enclosed_area(&self) -> f64 {
        if !self.closed {
            return 0.0;
        }
        let twice: f64 = self
            .points
            .windows(2)
            .map(|w| w[0].x * w[1].y - w[1].x * w[0].y)
            .sum();
        libm::fabs(0.5 * twice)
    }
}

// Edges of the cell-center lattice. Horizontal edge (i, j) joins lattice
// points (i, j) and (i + 1, j); vertical edge (i, j) joins (i, j) and
// (i, j + 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Edge {
    H(usize, usize),
    V(usize, usize),
}

/// Marching-squares contour of `value = rho` over the cell-center lattice.
///
/// Crossings are placed by linear interpolation along lattice edges.
/// Saddle squares are disambiguated by the mean of their four corners.
/// Returns an empty list when `rho` is outside the range of the grid.
pub fn level_set(grid: &FieldGrid, rho: f64) -> Vec<Polyline> {
    let (nx, ny) = grid.resolution();
    let above = |i: usize, j: usize| grid.get(i, j) > rho;

    let mut segments: Vec<[Edge; 2]> = Vec::new();
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let bl = above(i, j);
            let br = above(i + 1, j);
            let tr = above(i + 1, j + 1);
            let tl = above(i, j + 1);
            let bottom = Edge::H(i, j);
            let right = Edge::V(i + 1, j);
            let top = Edge::H(i, j + 1);
            let left = Edge::V(i, j);
            match (bl, br, tr, tl) {
                (true, false, true, false) | (false, true, false, true) => {
                    let center = 0.25 * (grid.get(i, j) + grid.get(i + 1, j) + grid.get(i + 1, j + 1) + grid.get(i, j + 1));
                    // Corners on the same side as the centre are joined
                    // through it, so the two opposite corners get cut off.
                    let cut_bl_tr = (center > rho) != bl;
                    if cut_bl_tr {
                        segments.push([left, bottom]);
                        segments.push([top, right]);
                    } else {
                        segments.push([bottom, right]);
                        segments.push([left, top]);
                    }
                }
                _ => {
                    let mut crossing = [bottom; 2];
                    let mut n = 0;
                    for (edge, a, b) in [(bottom, bl, br), (right, br, tr), (top, tr, tl), (left, tl, bl)] {
                        if a != b {
                            crossing[n] = edge;
                            n += 1;
                        }
                    }
                    if n == 2 {
                        segments.push(crossing);
                    }
                }
            }
        }
    }

    let point = |edge: Edge| -> Vec2 {
        let ((i0, j0), (i1, j1)) = match edge {
            Edge::H(i, j) => ((i, j), (i + 1, j)),
            Edge::V(i, j) => ((i, j), (i, j + 1)),
        };
        let (v0, v1) = (grid.get(i0, j0), grid.get(i1, j1));
        let t = (rho - v0) / (v1 - v0);
        let (p0, p1) = (grid.cell_center(i0, j0), grid.cell_center(i1, j1));
        p0 + (p1 - p0) * t
    };

    // Each lattice edge is shared by at most two squares.
    let mut incidence: BTreeMap<Edge, Vec<usize>> = BTreeMap::new();
    for (s, seg) in segments.iter().enumerate() {
        for edge in seg {
            incidence.entry(*edge).or_default().push(s);
        }
    }

    let mut used = alloc::vec![false; segments.len()];
    let mut lines = Vec::new();
    let walk = |start_seg: usize, start_edge: Edge, used: &mut Vec<bool>| -> (Vec<Vec2>, bool) {
        let mut points = alloc::vec![point(start_edge)];
        let mut seg = start_seg;
        let mut from = start_edge;
        loop {
            used[seg] = true;
            let next = if segments[seg][0] == from {
                segments[seg][1]
            } else {
                segments[seg][0]
            };
            points.push(point(next));
            if next == start_edge {
                return (points, true);
            }
            match incidence[&next].iter().find(|s| !used[**s]) {
                Some(s) => {
                    seg = *s;
                    from = next;
                }
                None => return (points, false),
            }
        }
    };

    // Open chains start at edges on the lattice boundary (one incident
    // segment); what remains afterwards are closed loops.
    for (edge, segs) in &incidence {
        if segs.len() == 1 && !used[segs[0]] {
            let (points, closed) = walk(segs[0], *edge, &mut used);
            lines.push(Polyline { points, closed });
        }
    }
    for s in 0..segments.len() {
        if !used[s] {
            let (points, closed) = walk(s, segments[s][0], &mut used);
            lines.push(Polyline { points, closed });
        }
    }
    lines
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Bounds;

    fn cone() -> FieldGrid {
        FieldGrid::from_fn(Bounds::square(-5.0, 5.0), 101, 101, |p| 10.0 - p.norm()).unwrap()
    }

    #[test]
    fn symmetric_field_gives_one_circle() {
        let lines = level_set(&cone(), 7.0);
        assert_eq!(lines.len(), 1);
        let line = &lines[0];
        assert!(line.closed);
        for p in &line.points {
            assert!((p.norm() - 3.0).abs() < 0.05, "{p:?}");
        }
        let circle = core::f64::consts::PI * 9.0;
        assert!((line.enclosed_area() - circle).abs() / circle < 0.01);
    }

    #[test]
    fn vertices_lie_on_the_level() {
        let grid = cone();
        let dx = grid.cell_size().x;
        for line in level_set(&grid, 6.2) {
            for p in &line.points {
                assert!((grid.interpolate(*p) - 6.2).abs() < 1e-9);
                // Re-evaluating the underlying field stays within one cell's
                // value range.
                assert!(((10.0 - p.norm()) - 6.2).abs() <= dx * core::f64::consts::SQRT_2);
            }
        }
    }

    #[test]
    fn out_of_range_level_is_empty() {
        let grid = cone();
        assert!(level_set(&grid, 11.0).is_empty());
        assert!(level_set(&grid, grid.min() - 1.0).is_empty());
    }

    #[test]
    fn boundary_crossing_contour_is_open() {
        let grid = FieldGrid::from_fn(Bounds::square(0.0, 1.0), 20, 20, |p| p.x + p.y).unwrap();
        let lines = level_set(&grid, 1.0);
        assert_eq!(lines.len(), 1);
        assert!(!lines[0].closed);
        assert_eq!(lines[0].enclosed_area(), 0.0);
    }

    #[test]
    fn saddle_is_resolved_deterministically() {
        // Two bumps on a diagonal produce saddle squares between them.
        let bumps = |p: Vec2| {
            libm::exp(-((p - Vec2::new(-0.5, -0.5)).norm_squared()) * 4.0)
                + libm::exp(-((p - Vec2::new(0.5, 0.5)).norm_squared()) * 4.0)
        };
        let grid = FieldGrid::from_fn(Bounds::square(-1.5, 1.5), 2, 2, bumps).unwrap();
        let a = level_set(&grid, 0.2);
        let b = level_set(&grid, 0.2);
        assert_eq!(a, b);
        let fine = FieldGrid::from_fn(Bounds::square(-1.5, 1.5), 61, 61, bumps).unwrap();
        // Low level: one loop around both bumps; high level: two loops.
        assert_eq!(level_set(&fine, 0.15).len(), 1);
        assert_eq!(level_set(&fine, 0.6).len(), 2);
    }
}
