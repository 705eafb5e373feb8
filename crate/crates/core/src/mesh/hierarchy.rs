use serde::{Deserialize, Serialize};

use super::flux::{FaceLayout, RefluxSchedule};
use super::ghost::GhostSchedule;
use super::index_box::IndexBox;
use super::transfer::{ProlongSchedule, RestrictSchedule};
use crate::error::{Error, Result};

/// Width of the ghost frame around every patch.
pub const GHOST_WIDTH: i32 = 1;
/// Refinement ratio between every pair of adjacent levels.
pub const REFINE_RATIO: i32 = 2;

const NO_CELL: u32 = u32::MAX;

/// Physical extent of the computational box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

impl Default for Domain {
    fn default() -> Self {
        Self::unit_cube()
    }
}

impl Domain {
    pub fn unit_cube() -> Self {
        Self {
            lo: [0.0; 3],
            hi: [1.0; 3],
        }
    }

    pub fn length(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    pub fn volume(&self) -> f64 {
        (0..3).map(|a| self.length(a)).product()
    }
}

/// A rectangular block of cells on one level, with a one-cell ghost frame.
#[derive(Clone, Debug, PartialEq)]
pub struct Patch {
    pub bx: IndexBox,
    pub level: usize,
    /// Offset of the first interior cell in the flat composite layout.
    pub offset: usize,
    /// Offset of the first ghosted cell in the flat padded layout.
    pub padded_offset: usize,
}

impl Patch {
    pub fn ncells(&self) -> usize {
        self.bx.volume()
    }

    pub fn padded_box(&self) -> IndexBox {
        self.bx.grow(GHOST_WIDTH)
    }

    pub fn padded_extent(&self) -> [usize; 3] {
        let n = self.bx.extent();
        [
            (n[0] + 2 * GHOST_WIDTH) as usize,
            (n[1] + 2 * GHOST_WIDTH) as usize,
            (n[2] + 2 * GHOST_WIDTH) as usize,
        ]
    }

    pub fn npadded(&self) -> usize {
        let p = self.padded_extent();
        p[0] * p[1] * p[2]
    }

    /// Flat composite index of an interior cell.
    #[inline]
    pub fn flat(&self, c: [i32; 3]) -> usize {
        self.offset + self.bx.offset(c)
    }

    /// Index of a cell (interior or ghost) within this patch's padded block.
    #[inline]
    pub fn padded_local(&self, c: [i32; 3]) -> usize {
        let p = self.padded_extent();
        let g = GHOST_WIDTH;
        ((c[2] - self.bx.lo[2] + g) as usize * p[1] + (c[1] - self.bx.lo[1] + g) as usize) * p[0]
            + (c[0] - self.bx.lo[0] + g) as usize
    }

    /// Strides of the padded block along x, y, z.
    pub fn padded_strides(&self) -> [usize; 3] {
        let p = self.padded_extent();
        [1, p[0], p[0] * p[1]]
    }
}

/// Dense cell-to-flat-index lookup over a level's domain box.
#[derive(Clone, Debug)]
struct CellMap {
    domain: IndexBox,
    flat: Vec<u32>,
}

impl CellMap {
    fn new(domain: IndexBox, patches: &[Patch]) -> Self {
        let mut flat = vec![NO_CELL; domain.volume()];
        for p in patches {
            for c in p.bx.cells() {
                flat[domain.offset(c)] = p.flat(c) as u32;
            }
        }
        Self { domain, flat }
    }

    fn get(&self, c: [i32; 3]) -> Option<usize> {
        if !self.domain.contains(c) {
            return None;
        }
        match self.flat[self.domain.offset(c)] {
            NO_CELL => None,
            v => Some(v as usize),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Level {
    pub patches: Vec<Patch>,
    pub spacing: [f64; 3],
    /// 1 for the base level.
    pub ratio_to_coarser: i32,
    /// The whole physical domain in this level's index space.
    pub domain_box: IndexBox,
    /// First flat index belonging to this level.
    pub offset: usize,
    pub ncells: usize,
    cells: CellMap,
}

impl Level {
    pub fn boxes(&self) -> Vec<IndexBox> {
        self.patches.iter().map(|p| p.bx).collect()
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    /// Flat index of the level cell `c`, if some patch on this level owns it.
    pub fn flat(&self, c: [i32; 3]) -> Option<usize> {
        self.cells.get(c)
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.ncells
    }
}

/// Nested levels of non-overlapping patches, coarsest first.
///
/// Level 0 covers the domain. Every finer level is aligned to the refinement
/// ratio and, grown by one coarse cell (clipped to the domain), lies inside
/// the union of the next coarser level. Cell data for all levels lives in one
/// flat vector ordered level by level, patch by patch, x fastest.
#[derive(Clone, Debug)]
pub struct PatchHierarchy {
    pub domain: Domain,
    pub max_levels: usize,
    levels: Vec<Level>,
    ncells: usize,
    npadded: usize,
    valid: Vec<bool>,
    pub(crate) restrict: Vec<RestrictSchedule>,
    pub(crate) prolong: Vec<ProlongSchedule>,
    pub(crate) ghosts: Vec<GhostSchedule>,
    pub(crate) reflux: Vec<RefluxSchedule>,
    pub(crate) faces: FaceLayout,
}

impl PatchHierarchy {
    /// Builds a hierarchy from a base resolution and, for each level below the
    /// finest, the boxes of that level to refine (in that level's index space).
    pub fn build(
        domain: Domain,
        base_resolution: [i32; 3],
        refine_boxes: &[Vec<IndexBox>],
    ) -> Result<Self> {
        let mut level_boxes = vec![vec![IndexBox::from_extent(base_resolution)]];
        for boxes in refine_boxes {
            if boxes.is_empty() {
                break;
            }
            level_boxes.push(boxes.iter().map(|b| b.refine(REFINE_RATIO)).collect());
        }
        Self::from_level_boxes(domain, base_resolution, level_boxes)
    }

    /// Builds a hierarchy from explicit per-level patch boxes, each in its own
    /// level's index space. `level_boxes[0]` must tile the base domain.
    pub fn from_level_boxes(
        domain: Domain,
        base_resolution: [i32; 3],
        level_boxes: Vec<Vec<IndexBox>>,
    ) -> Result<Self> {
        if base_resolution.iter().any(|&n| n < 1) {
            return Err(Error::Config(format!(
                "base resolution must be positive, got {base_resolution:?}"
            )));
        }
        if level_boxes.is_empty() {
            return Err(Error::Config("hierarchy needs at least one level".into()));
        }
        let mut levels: Vec<Level> = Vec::with_capacity(level_boxes.len());
        let mut offset = 0usize;
        let mut padded_offset = 0usize;
        let mut resolution = base_resolution;
        for (l, boxes) in level_boxes.into_iter().enumerate() {
            if l > 0 {
                resolution = resolution.map(|n| n * REFINE_RATIO);
            }
            let domain_box = IndexBox::from_extent(resolution);
            let spacing = [
                domain.length(0) / resolution[0] as f64,
                domain.length(1) / resolution[1] as f64,
                domain.length(2) / resolution[2] as f64,
            ];
            let level_offset = offset;
            let mut patches = Vec::with_capacity(boxes.len());
            for bx in boxes {
                if !domain_box.contains_box(&bx) {
                    return Err(Error::NotNested { level: l, bx });
                }
                if l > 0 && !bx.is_aligned(REFINE_RATIO) {
                    return Err(Error::Misaligned { level: l, bx });
                }
                let patch = Patch {
                    bx,
                    level: l,
                    offset,
                    padded_offset,
                };
                offset += patch.ncells();
                padded_offset += patch.npadded();
                patches.push(patch);
            }
            for (i, a) in patches.iter().enumerate() {
                for b in &patches[i + 1..] {
                    if a.bx.intersects(&b.bx) {
                        return Err(Error::Overlap {
                            level: l,
                            a: a.bx,
                            b: b.bx,
                        });
                    }
                }
            }
            let cells = CellMap::new(domain_box, &patches);
            let level = Level {
                ncells: offset - level_offset,
                offset: level_offset,
                patches,
                spacing,
                ratio_to_coarser: if l == 0 { 1 } else { REFINE_RATIO },
                domain_box,
                cells,
            };
            if l == 0 {
                if level.ncells != domain_box.volume() {
                    return Err(Error::Config("base level must cover the domain".into()));
                }
            } else {
                check_nesting(&levels[l - 1], &level, l)?;
            }
            levels.push(level);
        }

        let ncells = offset;
        let mut hierarchy = PatchHierarchy {
            domain,
            max_levels: levels.len(),
            levels,
            ncells,
            npadded: padded_offset,
            valid: vec![true; ncells],
            restrict: Vec::new(),
            prolong: Vec::new(),
            ghosts: Vec::new(),
            reflux: Vec::new(),
            faces: FaceLayout::default(),
        };
        hierarchy.faces = FaceLayout::build(&hierarchy);
        hierarchy.restrict = (0..hierarchy.nlevels())
            .map(|l| RestrictSchedule::build(&hierarchy, l))
            .collect();
        for sched in &hierarchy.restrict {
            for entry in &sched.entries {
                hierarchy.valid[entry.coarse as usize] = false;
            }
        }
        hierarchy.prolong = (0..hierarchy.nlevels())
            .map(|l| ProlongSchedule::build(&hierarchy, l))
            .collect::<Result<_>>()?;
        hierarchy.ghosts = (0..hierarchy.nlevels())
            .map(|l| GhostSchedule::build(&hierarchy, l))
            .collect::<Result<_>>()?;
        hierarchy.reflux = (0..hierarchy.nlevels())
            .map(|l| RefluxSchedule::build(&hierarchy, l))
            .collect();
        Ok(hierarchy)
    }

    /// Single-level hierarchy with one patch covering the domain.
    pub fn uniform(domain: Domain, resolution: [i32; 3]) -> Result<Self> {
        Self::build(domain, resolution, &[])
    }

    pub fn with_max_levels(mut self, max_levels: usize) -> Self {
        self.max_levels = max_levels.max(self.nlevels());
        self
    }

    pub fn nlevels(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn level(&self, l: usize) -> &Level {
        &self.levels[l]
    }

    pub fn base_resolution(&self) -> [i32; 3] {
        self.levels[0].domain_box.extent()
    }

    /// Resolution of a uniform grid matching the finest level's spacing.
    pub fn finest_equivalent(&self) -> [i32; 3] {
        self.levels[self.nlevels() - 1].domain_box.extent()
    }

    /// Total number of cells on all levels, covered cells included.
    pub fn ncells(&self) -> usize {
        self.ncells
    }

    pub fn npadded(&self) -> usize {
        self.npadded
    }

    /// `true` for cells not covered by a finer level.
    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    pub fn patches(&self) -> impl Iterator<Item = &Patch> {
        self.levels.iter().flat_map(|l| l.patches.iter())
    }

    pub fn cell_center(&self, level: usize, c: [i32; 3]) -> [f64; 3] {
        let h = self.levels[level].spacing;
        [
            self.domain.lo[0] + (c[0] as f64 + 0.5) * h[0],
            self.domain.lo[1] + (c[1] as f64 + 0.5) * h[1],
            self.domain.lo[2] + (c[2] as f64 + 0.5) * h[2],
        ]
    }

    /// Per-flat-cell volume.
    pub fn cell_volumes(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.ncells];
        for level in &self.levels {
            v[level.range()].fill(level.cell_volume());
        }
        v
    }

    /// Samples `f` at every cell center (covered cells included).
    pub fn sample(&self, f: impl Fn([f64; 3]) -> f64) -> Vec<f64> {
        let mut out = vec![0.0; self.ncells];
        for p in self.patches() {
            for c in p.bx.cells() {
                out[p.flat(c)] = f(self.cell_center(p.level, c));
            }
        }
        out
    }

    /// Level index and cell index of every flat cell.
    pub fn cell_indices(&self) -> Vec<(usize, [i32; 3])> {
        let mut out = vec![(0, [0; 3]); self.ncells];
        for p in self.patches() {
            for c in p.bx.cells() {
                out[p.flat(c)] = (p.level, c);
            }
        }
        out
    }

    /// Patch boxes per level, in each level's own index space.
    pub fn level_boxes(&self) -> Vec<Vec<IndexBox>> {
        self.levels.iter().map(|l| l.boxes()).collect()
    }

    /// Volume-weighted sum of `u` over valid cells.
    pub fn integrate(&self, u: &[f64]) -> f64 {
        let mut total = 0.0;
        for level in &self.levels {
            let vol = level.cell_volume();
            let mut s = 0.0;
            for i in level.range() {
                if self.valid[i] {
                    s += u[i];
                }
            }
            total += s * vol;
        }
        total
    }
}

/// Checks that `fine`, coarsened and grown by one cell, lies in `coarse`.
fn check_nesting(coarse: &Level, fine: &Level, l: usize) -> Result<()> {
    for p in &fine.patches {
        let grown = p.bx.coarsen(REFINE_RATIO).grow(1);
        let Some(region) = grown.intersect(&coarse.domain_box) else {
            return Err(Error::NotNested { level: l, bx: p.bx });
        };
        if region.cells().any(|c| coarse.flat(c).is_none()) {
            return Err(Error::NotNested { level: l, bx: p.bx });
        }
    }
    Ok(())
}
