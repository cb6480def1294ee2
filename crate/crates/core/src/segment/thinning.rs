//! Topology-preserving 3D thinning to one-voxel-wide centerlines.
//!
//! Border voxels are peeled in six directional sub-iterations. A voxel is
//! removed when it is not a line end, its removal keeps the Euler
//! characteristic (26-connected foreground, closed unit cubes), and its
//! foreground neighbourhood stays a single 26-connected component.

use super::BitMask;

/// Position of `(dx, dy, dz)` in a 3×3×3 neighbourhood; the centre is 13.
const fn nb(dx: i32, dy: i32, dz: i32) -> usize {
    ((dz + 1) * 9 + (dy + 1) * 3 + (dx + 1)) as usize
}

const CENTER: usize = 13;

/// Sub-iteration order: −y, +y, +x, −x, +z, −z.
const DIRECTIONS: [(i32, i32, i32); 6] = [
    (0, -1, 0),
    (0, 1, 0),
    (1, 0, 0),
    (-1, 0, 0),
    (0, 0, 1),
    (0, 0, -1),
];

struct Tables {
    /// For each of the centre cube's 8 vertices, 12 edges, 6 faces: the
    /// neighbour cubes that also contain that cell.
    vertices: Vec<Vec<usize>>,
    edges: Vec<Vec<usize>>,
    faces: Vec<Vec<usize>>,
    /// 26-adjacency among the 26 neighbour positions.
    adjacency: Vec<Vec<usize>>,
}

fn offsets() -> impl Iterator<Item = (i32, i32, i32)> {
    (-1..=1).flat_map(|dz| (-1..=1).flat_map(move |dy| (-1..=1).map(move |dx| (dx, dy, dz))))
}

impl Tables {
    fn build() -> Self {
        // A cell of the centre cube is described by, per axis, either a fixed
        // side (−1 or +1) or the full extent (0). Neighbour cube (dx, dy, dz)
        // contains it iff for every fixed axis the offset is 0 or matches the
        // side, and every free axis has offset 0.
        let cells = |free: usize| -> Vec<Vec<usize>> {
            let mut out = Vec::new();
            for c in offsets() {
                let c = [c.0, c.1, c.2];
                if c.iter().filter(|&&v| v == 0).count() != free {
                    continue;
                }
                let mut shared = Vec::new();
                for o in offsets() {
                    let o = [o.0, o.1, o.2];
                    if o == [0, 0, 0] {
                        continue;
                    }
                    let contains = (0..3).all(|a| {
                        if c[a] == 0 {
                            o[a] == 0
                        } else {
                            o[a] == 0 || o[a] == c[a]
                        }
                    });
                    if contains {
                        shared.push(nb(o[0], o[1], o[2]));
                    }
                }
                out.push(shared);
            }
            out
        };
        let mut adjacency = vec![Vec::new(); 27];
        for a in offsets() {
            for b in offsets() {
                if a == b || a == (0, 0, 0) || b == (0, 0, 0) {
                    continue;
                }
                if (a.0 - b.0).abs() <= 1 && (a.1 - b.1).abs() <= 1 && (a.2 - b.2).abs() <= 1 {
                    adjacency[nb(a.0, a.1, a.2)].push(nb(b.0, b.1, b.2));
                }
            }
        }
        Tables {
            vertices: cells(0),
            edges: cells(1),
            faces: cells(2),
            adjacency,
        }
    }

    /// Removing the centre leaves χ unchanged iff `V − E + F − 1 = 0` over
    /// the cells that belong to no other foreground cube.
    fn euler_invariant(&self, n: &[bool; 27]) -> bool {
        let unique = |cells: &[Vec<usize>]| {
            cells
                .iter()
                .filter(|shared| shared.iter().all(|&i| !n[i]))
                .count() as i32
        };
        unique(&self.vertices) - unique(&self.edges) + unique(&self.faces) - 1 == 0
    }

    fn single_component(&self, n: &[bool; 27]) -> bool {
        let mut seen = [false; 27];
        let mut stack = Vec::with_capacity(26);
        let mut components = 0;
        for start in 0..27 {
            if start == CENTER || !n[start] || seen[start] {
                continue;
            }
            components += 1;
            if components > 1 {
                return false;
            }
            seen[start] = true;
            stack.push(start);
            while let Some(i) = stack.pop() {
                for &j in &self.adjacency[i] {
                    if n[j] && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        components == 1
    }
}

struct Padded {
    dims: [usize; 3],
    data: Vec<u8>,
    offsets: [isize; 27],
}

impl Padded {
    fn new(mask: &BitMask) -> Self {
        let [nx, ny, nz] = mask.dims();
        let dims = [nx + 2, ny + 2, nz + 2];
        let mut data = vec![0u8; dims.iter().product()];
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    if mask.get(x, y, z) {
                        data[(x + 1) + dims[0] * ((y + 1) + dims[1] * (z + 1))] = 1;
                    }
                }
            }
        }
        let mut table = [0isize; 27];
        for (dx, dy, dz) in offsets() {
            table[nb(dx, dy, dz)] =
                dx as isize + dims[0] as isize * (dy as isize + dims[1] as isize * dz as isize);
        }
        Padded {
            dims,
            data,
            offsets: table,
        }
    }

    #[inline]
    fn neighbourhood(&self, i: usize) -> [bool; 27] {
        let mut n = [false; 27];
        for (k, &o) in self.offsets.iter().enumerate() {
            n[k] = self.data[(i as isize + o) as usize] != 0;
        }
        n
    }
}

fn removable(t: &Tables, n: &[bool; 27]) -> bool {
    let count = n.iter().enumerate().filter(|&(k, &b)| b && k != CENTER).count();
    if count <= 1 {
        // Line ends and isolated voxels are kept.
        return false;
    }
    t.euler_invariant(n) && t.single_component(n)
}

/// Thins `mask` to a one-voxel-wide skeleton. Deterministic; preserves the
/// number of 26-connected components.
pub fn skeletonize(mask: &BitMask) -> BitMask {
    let tables = Tables::build();
    let mut p = Padded::new(mask);
    let mut fg: Vec<usize> = p
        .data
        .iter()
        .enumerate()
        .filter(|(_, &b)| b != 0)
        .map(|(i, _)| i)
        .collect();

    loop {
        let mut changed = false;
        for &(dx, dy, dz) in &DIRECTIONS {
            let dir = p.offsets[nb(dx, dy, dz)];
            let candidates: Vec<usize> = fg
                .iter()
                .copied()
                .filter(|&i| {
                    p.data[(i as isize + dir) as usize] == 0 && removable(&tables, &p.neighbourhood(i))
                })
                .collect();
            for i in candidates {
                if removable(&tables, &p.neighbourhood(i)) {
                    p.data[i] = 0;
                    changed = true;
                }
            }
            fg.retain(|&i| p.data[i] != 0);
        }
        if !changed {
            break;
        }
    }

    let [nx, ny, nz] = mask.dims();
    let mut out = BitMask::empty(mask.dims(), mask.origin(), mask.pitch());
    for &i in &fg {
        let x = i % p.dims[0];
        let y = (i / p.dims[0]) % p.dims[1];
        let z = i / (p.dims[0] * p.dims[1]);
        debug_assert!(x >= 1 && x <= nx && y >= 1 && y <= ny && z >= 1 && z <= nz);
        out.set(x - 1, y - 1, z - 1, true);
    }
    out
}

/// 26-connected component labels (1-based; 0 is background) and their count.
pub fn label_components(mask: &BitMask) -> (Vec<u32>, usize) {
    let [nx, ny, nz] = mask.dims();
    let mut labels = vec![0u32; mask.bits().len()];
    let mut count = 0;
    let mut stack = Vec::new();
    for start in 0..labels.len() {
        if mask.bits()[start] == 0 || labels[start] != 0 {
            continue;
        }
        count += 1;
        labels[start] = count as u32;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (x, y, z) = (i % nx, (i / nx) % ny, i / (nx * ny));
            for (dx, dy, dz) in offsets() {
                let (xx, yy, zz) = (x as i64 + dx as i64, y as i64 + dy as i64, z as i64 + dz as i64);
                if xx < 0 || yy < 0 || zz < 0 || xx >= nx as i64 || yy >= ny as i64 || zz >= nz as i64 {
                    continue;
                }
                let j = xx as usize + nx * (yy as usize + ny * zz as usize);
                if mask.bits()[j] != 0 && labels[j] == 0 {
                    labels[j] = count as u32;
                    stack.push(j);
                }
            }
        }
    }
    (labels, count)
}
