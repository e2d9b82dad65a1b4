//! Connected components, length gating and slice-based counting.

use crate::error::Result;
use crate::volume::{Axis, Grid, Mask3D};

struct UnionFind {
    parent: Vec<u32>,
}

impl UnionFind {
    fn new() -> Self {
        UnionFind { parent: Vec::new() }
    }

    fn make(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        id
    }

    fn find(&mut self, mut a: u32) -> u32 {
        while self.parent[a as usize] != a {
            let grand = self.parent[self.parent[a as usize] as usize];
            self.parent[a as usize] = grand;
            a = grand;
        }
        a
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi as usize] = lo;
        }
    }
}

/// One connected component of a label map.
#[derive(Clone, Debug, PartialEq)]
pub struct Component {
    /// Label in the owning [`ComponentSet`], 1-based.
    pub id: u32,
    pub voxel_count: usize,
    /// Inclusive index range per axis.
    pub bbox: [[usize; 2]; 3],
    /// Largest physical bounding-box extent, in mm.
    pub length_mm: f64,
    /// Voxel count per z slice.
    pub slice_counts: Vec<usize>,
}

/// Label map (0 = background) with per-component statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct ComponentSet {
    grid: Grid,
    labels: Vec<u32>,
    components: Vec<Component>,
}

impl ComponentSet {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Total labelled voxels.
    pub fn voxel_count(&self) -> usize {
        self.components.iter().map(|c| c.voxel_count).sum()
    }

    pub fn to_mask(&self) -> Mask3D {
        Mask3D::from_parts(self.grid, self.labels.iter().map(|&l| u8::from(l != 0)).collect())
    }

    /// Builds statistics for an already contiguous label map.
    fn from_labels(grid: Grid, labels: Vec<u32>, count: usize) -> Self {
        let [_, _, nz] = grid.dims();
        let sp = grid.spacing();
        let mut comps: Vec<Component> = (1..=count as u32)
            .map(|id| Component {
                id,
                voxel_count: 0,
                bbox: [[usize::MAX, 0]; 3],
                length_mm: 0.0,
                slice_counts: vec![0; nz],
            })
            .collect();
        for (i, &l) in labels.iter().enumerate() {
            if l == 0 {
                continue;
            }
            let c = &mut comps[l as usize - 1];
            let xyz = grid.coords(i);
            c.voxel_count += 1;
            c.slice_counts[xyz[2]] += 1;
            for a in 0..3 {
                c.bbox[a][0] = c.bbox[a][0].min(xyz[a]);
                c.bbox[a][1] = c.bbox[a][1].max(xyz[a]);
            }
        }
        for c in &mut comps {
            c.length_mm = (0..3)
                .map(|a| (c.bbox[a][1] - c.bbox[a][0] + 1) as f64 * sp[a])
                .fold(0.0, f64::max);
        }
        ComponentSet {
            grid,
            labels,
            components: comps,
        }
    }
}

/// 26-connected components of `mask`, numbered by first voxel in x-fastest
/// scan order.
pub fn label_components_3d(mask: &Mask3D) -> ComponentSet {
    let grid = *mask.grid();
    let [nx, ny, nz] = grid.dims();
    let mut provisional = vec![u32::MAX; grid.len()];
    let mut uf = UnionFind::new();

    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let i = grid.index(x, y, z);
                if !mask.is_set(i) {
                    continue;
                }
                let mut label = u32::MAX;
                // the 13 neighbours already visited in scan order
                for dz in -1i64..=0 {
                    for dy in -1i64..=1 {
                        for dx in -1i64..=1 {
                            if dz == 0 && (dy > 0 || (dy == 0 && dx >= 0)) {
                                continue;
                            }
                            let (qx, qy, qz) = (x as i64 + dx, y as i64 + dy, z as i64 + dz);
                            if qx < 0 || qy < 0 || qz < 0 || qx >= nx as i64 || qy >= ny as i64 {
                                continue;
                            }
                            let j = grid.index(qx as usize, qy as usize, qz as usize);
                            let lj = provisional[j];
                            if lj == u32::MAX {
                                continue;
                            }
                            if label == u32::MAX {
                                label = lj;
                            } else {
                                uf.union(label, lj);
                            }
                        }
                    }
                }
                provisional[i] = if label == u32::MAX { uf.make() } else { label };
            }
        }
    }

    let mut final_of_root = vec![0u32; uf.parent.len()];
    let mut next = 0u32;
    let labels = provisional
        .iter()
        .map(|&p| {
            if p == u32::MAX {
                return 0;
            }
            let r = uf.find(p) as usize;
            if final_of_root[r] == 0 {
                next += 1;
                final_of_root[r] = next;
            }
            final_of_root[r]
        })
        .collect();
    ComponentSet::from_labels(grid, labels, next as usize)
}

/// Keeps components with `min_mm <= length_mm <= max_mm` and relabels them
/// contiguously in their original order.
pub fn filter_by_length(cs: &ComponentSet, min_mm: f64, max_mm: f64) -> ComponentSet {
    let mut remap = vec![0u32; cs.components.len() + 1];
    let mut next = 0u32;
    for c in &cs.components {
        if c.length_mm >= min_mm && c.length_mm <= max_mm {
            next += 1;
            remap[c.id as usize] = next;
        }
    }
    let labels = cs.labels.iter().map(|&l| remap[l as usize]).collect();
    let components = cs
        .components
        .iter()
        .filter(|c| remap[c.id as usize] != 0)
        .map(|c| Component {
            id: remap[c.id as usize],
            ..c.clone()
        })
        .collect();
    ComponentSet {
        grid: cs.grid,
        labels,
        components,
    }
}

/// Iterates voxel indices of slice `k` along `axis`, row-major in the two
/// remaining axes. Returns the slice width and height too.
fn slice_shape(grid: &Grid, axis: Axis) -> (usize, usize, usize) {
    let [nx, ny, nz] = grid.dims();
    match axis {
        Axis::X => (ny, nz, nx),
        Axis::Y => (nx, nz, ny),
        Axis::Z => (nx, ny, nz),
    }
}

fn slice_index(grid: &Grid, axis: Axis, k: usize, u: usize, v: usize) -> usize {
    match axis {
        Axis::X => grid.index(k, u, v),
        Axis::Y => grid.index(u, k, v),
        Axis::Z => grid.index(u, v, k),
    }
}

/// Per-slice ratio of labelled voxels to ROI voxels; 0 where the ROI is
/// empty.
pub fn slice_density(cs: &ComponentSet, roi: &Mask3D, axis: Axis) -> Result<Vec<f64>> {
    cs.grid.ensure_same(roi.grid())?;
    let (w, h, n) = slice_shape(&cs.grid, axis);
    Ok((0..n)
        .map(|k| {
            let (mut lab, mut area) = (0usize, 0usize);
            for v in 0..h {
                for u in 0..w {
                    let i = slice_index(&cs.grid, axis, k, u, v);
                    lab += usize::from(cs.labels[i] != 0);
                    area += usize::from(roi.is_set(i));
                }
            }
            if area == 0 {
                0.0
            } else {
                lab as f64 / area as f64
            }
        })
        .collect())
}

/// 8-connected components in a `w × h` row-major binary image.
pub fn count_components_2d(bits: &[bool], w: usize, h: usize) -> usize {
    debug_assert_eq!(bits.len(), w * h);
    let mut prov = vec![u32::MAX; bits.len()];
    let mut uf = UnionFind::new();
    for v in 0..h {
        for u in 0..w {
            let i = u + w * v;
            if !bits[i] {
                continue;
            }
            let mut label = u32::MAX;
            let neighbours = [(-1i64, -1i64), (0, -1), (1, -1), (-1, 0)];
            for (du, dv) in neighbours {
                let (qu, qv) = (u as i64 + du, v as i64 + dv);
                if qu < 0 || qv < 0 || qu >= w as i64 {
                    continue;
                }
                let lj = prov[qu as usize + w * qv as usize];
                if lj == u32::MAX {
                    continue;
                }
                if label == u32::MAX {
                    label = lj;
                } else {
                    uf.union(label, lj);
                }
            }
            prov[i] = if label == u32::MAX { uf.make() } else { label };
        }
    }
    (0..uf.parent.len() as u32).filter(|&a| uf.find(a) == a).count()
}

/// Counts extracted from a segmentation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PvsCounts {
    /// 2-D components in the densest slice.
    pub slice_count: usize,
    /// 3-D components overall.
    pub total_count: usize,
    pub total_volume_mm3: f64,
    /// Index of the densest slice along the counting axis.
    pub selected_slice: usize,
}

/// Picks the densest slice (lowest index on ties) and counts.
pub fn count_pvs(cs: &ComponentSet, roi: &Mask3D, axis: Axis) -> Result<PvsCounts> {
    let density = slice_density(cs, roi, axis)?;
    let mut selected = 0usize;
    for (k, &d) in density.iter().enumerate() {
        if d > density[selected] {
            selected = k;
        }
    }
    let (w, h, _) = slice_shape(&cs.grid, axis);
    let bits: Vec<bool> = (0..h)
        .flat_map(|v| (0..w).map(move |u| (u, v)))
        .map(|(u, v)| cs.labels[slice_index(&cs.grid, axis, selected, u, v)] != 0)
        .collect();
    Ok(PvsCounts {
        slice_count: count_components_2d(&bits, w, h),
        total_count: cs.len(),
        total_volume_mm3: cs.voxel_count() as f64 * cs.grid.voxel_volume(),
        selected_slice: selected,
    })
}
