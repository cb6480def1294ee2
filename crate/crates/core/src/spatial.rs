//! Uniform-grid point index for radius queries.

use std::collections::HashMap;

use crate::Vec3;

#[derive(Debug, Clone)]
pub struct PointGrid<T> {
    cell: f64,
    cells: HashMap<[i64; 3], Vec<(Vec3, T)>>,
    len: usize,
}

impl<T: Copy + Ord> PointGrid<T> {
    pub fn new(cell: f64) -> Self {
        assert!(cell > 0.0);
        Self {
            cell,
            cells: HashMap::new(),
            len: 0,
        }
    }

    fn key(&self, p: &Vec3) -> [i64; 3] {
        [
            (p.x / self.cell).floor() as i64,
            (p.y / self.cell).floor() as i64,
            (p.z / self.cell).floor() as i64,
        ]
    }

    pub fn insert(&mut self, p: Vec3, item: T) {
        let k = self.key(&p);
        self.cells.entry(k).or_default().push((p, item));
        self.len += 1;
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Items within `r` of `p` as `(distance, item)`, sorted by distance then
    /// item.
    pub fn within(&self, p: &Vec3, r: f64) -> Vec<(f64, T)> {
        let lo = self.key(&(p - Vec3::repeat(r)));
        let hi = self.key(&(p + Vec3::repeat(r)));
        let mut out = Vec::new();
        for x in lo[0]..=hi[0] {
            for y in lo[1]..=hi[1] {
                for z in lo[2]..=hi[2] {
                    if let Some(v) = self.cells.get(&[x, y, z]) {
                        for (q, item) in v {
                            let d = (q - p).norm();
                            if d <= r {
                                out.push((d, *item));
                            }
                        }
                    }
                }
            }
        }
        out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        out
    }

    pub fn any_within(&self, p: &Vec3, r: f64) -> bool {
        let lo = self.key(&(p - Vec3::repeat(r)));
        let hi = self.key(&(p + Vec3::repeat(r)));
        for x in lo[0]..=hi[0] {
            for y in lo[1]..=hi[1] {
                for z in lo[2]..=hi[2] {
                    if let Some(v) = self.cells.get(&[x, y, z]) {
                        if v.iter().any(|(q, _)| (q - p).norm() <= r) {
                            return true;
                        }
                    }
                }
            }
        }
        false
    }
}
