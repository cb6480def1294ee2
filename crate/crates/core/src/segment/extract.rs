use super::BitMask;
use crate::graph::{NodeFlags, Provenance, SegmentGraph};
use crate::Vec3;

/// Keep every third skeleton voxel (about one neurite width).
pub const DEFAULT_SAMPLING_INTERVAL: usize = 3;

fn neighbours(mask: &BitMask, i: usize, out: &mut Vec<usize>) {
    let [nx, ny, nz] = mask.dims();
    let (x, y, z) = (i % nx, (i / nx) % ny, i / (nx * ny));
    out.clear();
    for dz in -1i64..=1 {
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                if dx == 0 && dy == 0 && dz == 0 {
                    continue;
                }
                let (a, b, c) = (x as i64 + dx, y as i64 + dy, z as i64 + dz);
                if a < 0 || b < 0 || c < 0 || a >= nx as i64 || b >= ny as i64 || c >= nz as i64 {
                    continue;
                }
                let j = a as usize + nx * (b as usize + ny * c as usize);
                if mask.bits()[j] != 0 {
                    out.push(j);
                }
            }
        }
    }
}

/// Cuts the skeleton at junction voxels (more than two 26-neighbours) and
/// turns each remaining path into a fragment, keeping every `interval`-th
/// voxel plus both ends. Fragments with fewer than 2 nodes are dropped.
pub fn extract_graph(skel: &BitMask, interval: usize) -> SegmentGraph {
    let interval = interval.max(1);
    let mut graph = SegmentGraph::new(skel.pitch(), interval);
    let [nx, ny, _] = skel.dims();
    let origin = skel.origin();

    let fg: Vec<usize> = skel
        .bits()
        .iter()
        .enumerate()
        .filter(|(_, &b)| b != 0)
        .map(|(i, _)| i)
        .collect();
    let mut nb = Vec::with_capacity(26);
    // 0 = background, 1 = path voxel, 2 = junction.
    let mut class = vec![0u8; skel.bits().len()];
    for &i in &fg {
        neighbours(skel, i, &mut nb);
        class[i] = if nb.len() > 2 { 2 } else { 1 };
    }
    let path_neighbours = |i: usize, nb: &mut Vec<usize>| {
        neighbours(skel, i, nb);
        nb.retain(|&j| class[j] == 1);
    };
    let touches_junction = |i: usize, nb: &mut Vec<usize>| {
        neighbours(skel, i, nb);
        nb.iter().any(|&j| class[j] == 2)
    };

    let mut visited = vec![false; class.len()];
    let mut comp = Vec::new();
    let mut stack = Vec::new();
    for &seed in &fg {
        if class[seed] != 1 || visited[seed] {
            continue;
        }
        // Collect the component, then walk it from its smallest terminal.
        comp.clear();
        visited[seed] = true;
        stack.push(seed);
        while let Some(i) = stack.pop() {
            comp.push(i);
            path_neighbours(i, &mut nb);
            for &j in &nb {
                if !visited[j] {
                    visited[j] = true;
                    stack.push(j);
                }
            }
        }
        comp.sort_unstable();
        let start = comp
            .iter()
            .copied()
            .find(|&i| {
                path_neighbours(i, &mut nb);
                nb.len() <= 1
            })
            .unwrap_or(comp[0]);

        let mut path = vec![start];
        let mut prev = usize::MAX;
        let mut cur = start;
        loop {
            path_neighbours(cur, &mut nb);
            let next = nb.iter().copied().filter(|&j| j != prev && j != start).min();
            match next {
                Some(j) if path.len() < comp.len() => {
                    prev = cur;
                    cur = j;
                    path.push(j);
                }
                _ => break,
            }
        }

        let mut keep: Vec<usize> = (0..path.len()).step_by(interval).collect();
        if *keep.last().unwrap() != path.len() - 1 {
            keep.push(path.len() - 1);
        }
        if keep.len() < 2 {
            continue;
        }
        let fid = graph.new_fragment();
        let last = keep.len() - 1;
        let mut prev_id = None;
        for (k, &pi) in keep.iter().enumerate() {
            let v = path[pi];
            let (x, y, z) = (v % nx, (v / nx) % ny, v / (nx * ny));
            let terminal = k == 0 || k == last;
            let flags = NodeFlags {
                endpoint: terminal,
                junction: terminal && touches_junction(v, &mut nb),
                soma: false,
            };
            let pos = Vec3::new(
                (x as i64 + origin[0]) as f64,
                (y as i64 + origin[1]) as f64,
                (z as i64 + origin[2]) as f64,
            );
            let id = graph.add_node(pos, fid, flags);
            if let Some(p) = prev_id {
                graph
                    .add_edge(p, id, Provenance::Skeleton)
                    .expect("fresh nodes");
            }
            prev_id = Some(id);
        }
    }
    graph
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segment::thinning::label_components;
    use proptest::prelude::*;

    fn mask_from(dims: [usize; 3], voxels: &[(usize, usize, usize)]) -> BitMask {
        let mut m = BitMask::empty(dims, [0; 3], 1.0);
        for &(x, y, z) in voxels {
            m.set(x, y, z, true);
        }
        m
    }

    #[test]
    fn empty_skeleton_gives_empty_graph() {
        let g = extract_graph(&BitMask::empty([5, 5, 5], [0; 3], 1.0), 3);
        assert!(g.is_empty());
    }

    #[test]
    fn straight_path_resampling() {
        let voxels: Vec<_> = (0..10).map(|x| (x, 1, 1)).collect();
        let mut m = mask_from([12, 3, 3], &voxels);
        m = BitMask::from_bits(m.dims(), [100, 0, -5], 0.5, m.bits().to_vec());
        let g = extract_graph(&m, 3);
        let frags = g.fragments();
        assert_eq!(frags.len(), 1);
        let path = g.fragment_path(*frags.keys().next().unwrap()).unwrap();
        let xs: Vec<f64> = path.iter().map(|&id| g.node(id).unwrap().position.x).collect();
        assert_eq!(xs, vec![100.0, 103.0, 106.0, 109.0]);
        assert_eq!(g.node(path[0]).unwrap().position.z, -4.0);
        assert!(g.node(path[0]).unwrap().flags.endpoint);
        assert!(!g.node(path[1]).unwrap().flags.endpoint);
        assert_eq!(g.pitch, 0.5);
    }

    #[test]
    fn y_shape_gives_three_fragments() {
        let mut voxels = Vec::new();
        for i in 0..8 {
            voxels.push((10, 10 + i, 5)); // stem
            voxels.push((10 - 1 - i, 10 - 1 - i, 5)); // left arm
            voxels.push((10 + 1 + i, 10 - 1 - i, 5)); // right arm
        }
        let m = mask_from([21, 21, 11], &voxels);
        let g = extract_graph(&m, 3);
        assert_eq!(g.fragments().len(), 3);
        let ends = g.nodes().filter(|n| n.flags.endpoint).count();
        assert_eq!(ends, 6);
        let at_junction = g.nodes().filter(|n| n.flags.junction).count();
        assert_eq!(at_junction, 3);
        for n in g.nodes() {
            assert!(g.degree(n.id) <= 2);
        }
    }

    #[test]
    fn single_voxel_fragment_is_dropped() {
        let g = extract_graph(&mask_from([3, 3, 3], &[(1, 1, 1)]), 3);
        assert!(g.is_empty());
    }

    #[test]
    fn loop_is_cut_into_one_fragment() {
        let ring = [
            (2, 1, 1),
            (3, 1, 1),
            (4, 2, 1),
            (4, 3, 1),
            (3, 4, 1),
            (2, 4, 1),
            (1, 3, 1),
            (1, 2, 1),
        ];
        let g = extract_graph(&mask_from([6, 6, 3], &ring), 1);
        assert_eq!(g.fragments().len(), 1);
        assert_eq!(g.node_count(), 8);
        assert_eq!(g.edge_count(), 7);
    }

    /// Brute force: remove voxels with > 2 neighbours and count the
    /// remaining components of at least 2 voxels.
    fn brute_path_count(m: &BitMask) -> usize {
        let [nx, ny, nz] = m.dims();
        let count = |x: usize, y: usize, z: usize| {
            let mut c = 0;
            for dz in -1i64..=1 {
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let (a, b, cc) = (x as i64 + dx, y as i64 + dy, z as i64 + dz);
                        if (dx, dy, dz) != (0, 0, 0)
                            && a >= 0
                            && b >= 0
                            && cc >= 0
                            && (a as usize) < nx
                            && (b as usize) < ny
                            && (cc as usize) < nz
                            && m.get(a as usize, b as usize, cc as usize)
                        {
                            c += 1;
                        }
                    }
                }
            }
            c
        };
        let mut pruned = BitMask::empty(m.dims(), [0; 3], 1.0);
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    if m.get(x, y, z) && count(x, y, z) <= 2 {
                        pruned.set(x, y, z, true);
                    }
                }
            }
        }
        let (labels, n) = label_components(&pruned);
        (1..=n)
            .filter(|&l| {
                let size = labels.iter().filter(|&&v| v == l as u32).count();
                size >= 2
            })
            .count()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn fragments_match_brute_force(
            walks in prop::collection::vec(
                ((1usize..15, 1usize..15, 1usize..15), prop::collection::vec(0usize..26, 1..20)),
                1..5
            ),
            interval in 1usize..5,
        ) {
            // Random 26-connected walks give skeleton-like masks with
            // occasional junction clusters.
            let dirs: Vec<(i64, i64, i64)> = (-1..=1)
                .flat_map(|z| (-1..=1).flat_map(move |y| (-1..=1).map(move |x| (x, y, z))))
                .filter(|&d| d != (0, 0, 0))
                .collect();
            let mut m = BitMask::empty([16, 16, 16], [0; 3], 1.0);
            for ((x, y, z), steps) in &walks {
                let (mut x, mut y, mut z) = (*x as i64, *y as i64, *z as i64);
                m.set(x as usize, y as usize, z as usize, true);
                for &s in steps {
                    let d = dirs[s];
                    x = (x + d.0).clamp(0, 15);
                    y = (y + d.1).clamp(0, 15);
                    z = (z + d.2).clamp(0, 15);
                    m.set(x as usize, y as usize, z as usize, true);
                }
            }
            let g = extract_graph(&m, interval);
            prop_assert_eq!(g.fragments().len(), brute_path_count(&m));
            for n in g.nodes() {
                prop_assert!(g.degree(n.id) <= 2);
            }
            for (fid, _) in g.fragments() {
                prop_assert!(g.fragment_path(fid).is_ok());
            }
        }
    }
}
