use std::sync::{Arc, RwLock};

const EMPTY: u32 = u32::MAX;

/// Regular lattice backing a grid space: point `i` sits at `origin + cell[i] * h`.
///
/// Distances between lattice points are computed from integer offsets so that
/// equal offsets give bitwise-equal distances.
#[derive(Debug)]
pub struct Lattice {
    pub origin: [f64; 3],
    pub h: f64,
    pub counts: [usize; 3],
    dim: usize,
    cells: Vec<u32>,
    point_cell: Vec<[i32; 3]>,
    full: bool,
    table: RwLock<Arc<OffsetTable>>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Offset {
    pub n2: i64,
    pub d: [i32; 3],
}

#[derive(Debug, Default)]
pub(crate) struct OffsetTable {
    reach2: i64,
    pub entries: Vec<Offset>,
}

impl Lattice {
    /// Builds the lattice index for points given by integer cell coordinates.
    pub fn new(
        dim: usize,
        origin: [f64; 3],
        h: f64,
        counts: [usize; 3],
        point_cell: Vec<[i32; 3]>,
    ) -> Option<Self> {
        let total = counts.iter().product::<usize>();
        let mut cells = vec![EMPTY; total];
        for (i, c) in point_cell.iter().enumerate() {
            for k in 0..3 {
                if c[k] < 0 || c[k] as usize >= counts[k] {
                    return None;
                }
            }
            let idx = c[0] as usize + counts[0] * (c[1] as usize + counts[1] * c[2] as usize);
            if cells[idx] != EMPTY {
                return None;
            }
            cells[idx] = i as u32;
        }
        let full = point_cell.len() == total;
        Some(Lattice {
            origin,
            h,
            counts,
            dim,
            cells,
            point_cell,
            full,
            table: RwLock::new(Arc::new(OffsetTable::default())),
        })
    }

    /// Recovers lattice cells from coordinates; `None` if they are not on the lattice.
    pub fn from_coords(
        dim: usize,
        origin: [f64; 3],
        h: f64,
        counts: [usize; 3],
        coords: &[[f64; 3]],
    ) -> Option<Self> {
        let mut cells = Vec::with_capacity(coords.len());
        for p in coords {
            let mut c = [0i32; 3];
            for k in 0..dim {
                let t = (p[k] - origin[k]) / h;
                let r = t.round();
                if (t - r).abs() > 1e-6 {
                    return None;
                }
                c[k] = r as i32;
            }
            cells.push(c);
        }
        Lattice::new(dim, origin, h, counts, cells)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// True when every cell of the box holds a point.
    pub fn is_full(&self) -> bool {
        self.full
    }

    pub fn cell(&self, i: usize) -> [i32; 3] {
        self.point_cell[i]
    }

    pub fn point_at(&self, c: [i64; 3]) -> Option<usize> {
        for k in 0..3 {
            if c[k] < 0 || c[k] as usize >= self.counts[k] {
                return None;
            }
        }
        let idx = c[0] as usize + self.counts[0] * (c[1] as usize + self.counts[1] * c[2] as usize);
        let v = self.cells[idx];
        (v != EMPTY).then_some(v as usize)
    }

    #[inline]
    pub fn dist_n2(n2: i64, h: f64) -> f64 {
        h * (n2 as f64).sqrt()
    }

    pub fn dist(&self, i: usize, j: usize) -> f64 {
        let a = self.point_cell[i];
        let b = self.point_cell[j];
        let mut n2 = 0i64;
        for k in 0..3 {
            let t = (a[k] - b[k]) as i64;
            n2 += t * t;
        }
        Self::dist_n2(n2, self.h)
    }

    fn max_n2(&self) -> i64 {
        (0..3)
            .map(|k| {
                let t = self.counts[k].saturating_sub(1) as i64;
                t * t
            })
            .sum()
    }

    /// Offset table covering every offset with distance below `r` (all offsets for infinite `r`).
    pub(crate) fn table(&self, r: f64) -> Arc<OffsetTable> {
        let max_n2 = self.max_n2();
        let need = if r.is_finite() {
            let t = (r / self.h).powi(2);
            if t >= max_n2 as f64 {
                max_n2
            } else {
                (t.floor() as i64 + 1).min(max_n2)
            }
        } else {
            max_n2
        };
        {
            let t = self.table.read().expect("offset table lock");
            if t.reach2 >= need && !t.entries.is_empty() {
                return t.clone();
            }
        }
        let mut w = self.table.write().expect("offset table lock");
        if w.reach2 >= need && !w.entries.is_empty() {
            return w.clone();
        }
        let reach2 = need.max(2 * w.reach2).min(max_n2);
        let table = Arc::new(self.build_table(reach2));
        *w = table.clone();
        table
    }

    fn build_table(&self, reach2: i64) -> OffsetTable {
        let reach = (reach2 as f64).sqrt().floor() as i64 + 1;
        let lim: Vec<i64> = (0..3)
            .map(|k| {
                if k < self.dim {
                    reach.min(self.counts[k].saturating_sub(1) as i64)
                } else {
                    0
                }
            })
            .collect();
        let mut entries = Vec::new();
        for dz in -lim[2]..=lim[2] {
            for dy in -lim[1]..=lim[1] {
                for dx in -lim[0]..=lim[0] {
                    let n2 = dx * dx + dy * dy + dz * dz;
                    if n2 <= reach2 {
                        entries.push(Offset {
                            n2,
                            d: [dx as i32, dy as i32, dz as i32],
                        });
                    }
                }
            }
        }
        entries.sort_by(|a, b| a.n2.cmp(&b.n2).then(a.d.cmp(&b.d)));
        OffsetTable { reach2, entries }
    }

    /// Calls `f(j, d)` for lattice points with `d(i, j) < r`, in nondecreasing distance.
    #[inline]
    pub fn for_each_sorted<F: FnMut(usize, f64)>(&self, i: usize, r: f64, mut f: F) {
        let table = self.table(r);
        let c = self.point_cell[i];
        let h = self.h;
        let (cx, cy, cz) = (c[0] as i64, c[1] as i64, c[2] as i64);
        let (nx, ny, nz) = (
            self.counts[0] as i64,
            self.counts[1] as i64,
            self.counts[2] as i64,
        );
        for e in &table.entries {
            let d = Self::dist_n2(e.n2, h);
            if !(d < r) {
                break;
            }
            let x = cx + e.d[0] as i64;
            let y = cy + e.d[1] as i64;
            let z = cz + e.d[2] as i64;
            if x < 0 || y < 0 || z < 0 || x >= nx || y >= ny || z >= nz {
                continue;
            }
            let v = self.cells[(x + nx * (y + ny * z)) as usize];
            if v != EMPTY {
                f(v as usize, d);
            }
        }
    }

    /// Axis neighbours present in the lattice, as index pairs `(i, j)` with `i < j`.
    pub fn axis_edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, c) in self.point_cell.iter().enumerate() {
            for k in 0..self.dim {
                let mut n = [c[0] as i64, c[1] as i64, c[2] as i64];
                n[k] += 1;
                if let Some(j) = self.point_at(n) {
                    out.push((i.min(j), i.max(j)));
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Distance in cell units from point `i` to the lattice box boundary.
    pub fn cells_to_boundary(&self, i: usize) -> i64 {
        let c = self.point_cell[i];
        (0..self.dim)
            .map(|k| (c[k] as i64).min(self.counts[k] as i64 - 1 - c[k] as i64))
            .min()
            .unwrap_or(0)
    }

    /// Restricts the lattice to a subset of points given in new order.
    pub fn restrict(&self, keep: &[usize]) -> Lattice {
        let cells = keep.iter().map(|&i| self.point_cell[i]).collect();
        Lattice::new(self.dim, self.origin, self.h, self.counts, cells)
            .expect("subset of a valid lattice is valid")
    }
}
