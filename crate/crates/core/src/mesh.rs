//! Nested Cartesian mesh hierarchy.
//!
//! Level 0 is a single voxel covering the whole cubic domain. Every further
//! level halves the voxel width, so level `l` has `2^l` voxels per dimension
//! and every level-`l` voxel sits inside exactly one level-`(l-1)` voxel.
//! Parent and child maps are plain bit shifts on the integer coordinates.

use arrayvec::ArrayVec;
use rand::Rng;
use thiserror::Error;

/// Deepest level the integer voxel keys can address.
pub const MAX_LEVEL: u8 = 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeshError {
    #[error("voxel at level 0 has no parent")]
    NoParent,
    #[error("voxel at level {0} is on the finest level and has no children")]
    NoChildren(u8),
    #[error("level {requested} is outside the valid range 0..={max}")]
    LevelOutOfRange { requested: u8, max: u8 },
    #[error("voxel coordinates {ijk:?} out of range for level {level}")]
    CoordinatesOutOfRange { level: u8, ijk: [u32; 3] },
    #[error("domain side must be positive and finite, got {0}")]
    BadSide(f64),
}

/// Boundary treatment of the cubic domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Boundary {
    /// Zero-flux walls: boundary voxels simply have fewer neighbours.
    #[default]
    Reflecting,
    Periodic,
}

/// One voxel of one mesh level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VoxelRef {
    pub level: u8,
    pub ijk: [u32; 3],
}

impl VoxelRef {
    pub const ROOT: VoxelRef = VoxelRef { level: 0, ijk: [0, 0, 0] };

    pub fn new(level: u8, ijk: [u32; 3]) -> Result<Self, MeshError> {
        if level > MAX_LEVEL {
            return Err(MeshError::LevelOutOfRange { requested: level, max: MAX_LEVEL });
        }
        let n = 1u32 << level;
        if ijk.iter().any(|&c| c >= n) {
            return Err(MeshError::CoordinatesOutOfRange { level, ijk });
        }
        Ok(VoxelRef { level, ijk })
    }

    /// Voxel one level coarser that contains this one.
    pub fn parent(&self) -> Result<VoxelRef, MeshError> {
        if self.level == 0 {
            return Err(MeshError::NoParent);
        }
        Ok(self.shifted_up(1))
    }

    /// Containing voxel on `level` (which must not be finer than `self`).
    pub fn ancestor_at(&self, level: u8) -> Result<VoxelRef, MeshError> {
        if level > self.level {
            return Err(MeshError::LevelOutOfRange { requested: level, max: self.level });
        }
        Ok(self.shifted_up(self.level - level))
    }

    #[inline]
    pub(crate) fn shifted_up(&self, by: u8) -> VoxelRef {
        VoxelRef {
            level: self.level - by,
            ijk: [self.ijk[0] >> by, self.ijk[1] >> by, self.ijk[2] >> by],
        }
    }

    /// True when `fine` lies geometrically inside `self` (a voxel contains itself).
    #[inline]
    pub fn contains(&self, fine: &VoxelRef) -> bool {
        self.level <= fine.level && fine.shifted_up(fine.level - self.level) == *self
    }

    /// The eight voxels one level finer, without checking against a hierarchy depth.
    pub fn children_unchecked(&self) -> [VoxelRef; 8] {
        let [i, j, k] = self.ijk;
        let level = self.level + 1;
        std::array::from_fn(|c| {
            let c = c as u32;
            VoxelRef {
                level,
                ijk: [2 * i + (c & 1), 2 * j + ((c >> 1) & 1), 2 * k + ((c >> 2) & 1)],
            }
        })
    }

    /// Dense integer key, unique across all levels.
    #[inline]
    pub fn key(&self) -> u64 {
        let l = self.level as u64;
        let [i, j, k] = self.ijk.map(u64::from);
        (l << 58) | (((k << l) | j) << l) | i
    }
}

/// Geometry and topology of the levels `0..=lmax` over a cube of edge `side`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshHierarchy {
    side: f64,
    lmax: u8,
    boundary: Boundary,
}

impl MeshHierarchy {
    pub fn new(side: f64, lmax: u8, boundary: Boundary) -> Result<Self, MeshError> {
        if !(side > 0.0 && side.is_finite()) {
            return Err(MeshError::BadSide(side));
        }
        if lmax > MAX_LEVEL {
            return Err(MeshError::LevelOutOfRange { requested: lmax, max: MAX_LEVEL });
        }
        Ok(MeshHierarchy { side, lmax, boundary })
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn lmax(&self) -> u8 {
        self.lmax
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// Voxel width on `level`.
    pub fn h(&self, level: u8) -> f64 {
        self.side / (1u64 << level) as f64
    }

    /// Voxels per dimension on `level`.
    pub fn extent(&self, level: u8) -> u32 {
        1u32 << level
    }

    pub fn levels(&self) -> impl Iterator<Item = u8> {
        0..=self.lmax
    }

    fn check_level(&self, level: u8) -> Result<(), MeshError> {
        if level > self.lmax {
            Err(MeshError::LevelOutOfRange { requested: level, max: self.lmax })
        } else {
            Ok(())
        }
    }

    pub fn parent(&self, v: &VoxelRef) -> Result<VoxelRef, MeshError> {
        v.parent()
    }

    pub fn children(&self, v: &VoxelRef) -> Result<[VoxelRef; 8], MeshError> {
        if v.level >= self.lmax {
            return Err(MeshError::NoChildren(v.level));
        }
        Ok(v.children_unchecked())
    }

    /// Face-adjacent voxels on the same level.
    ///
    /// Reflecting walls drop out-of-domain neighbours. Periodic wrapping keeps
    /// all six (on level 1 the two directions along an axis coincide, which is
    /// the correct jump multiplicity on a two-cell ring). Level 0 never has
    /// neighbours.
    pub fn neighbors(&self, v: &VoxelRef) -> ArrayVec<VoxelRef, 6> {
        let mut out = ArrayVec::new();
        if v.level == 0 {
            return out;
        }
        let n = 1u32 << v.level;
        for axis in 0..3 {
            let c = v.ijk[axis];
            let mut push = |c2: u32| {
                let mut ijk = v.ijk;
                ijk[axis] = c2;
                out.push(VoxelRef { level: v.level, ijk });
            };
            match self.boundary {
                Boundary::Reflecting => {
                    if c > 0 {
                        push(c - 1);
                    }
                    if c + 1 < n {
                        push(c + 1);
                    }
                }
                Boundary::Periodic => {
                    push((c + n - 1) % n);
                    push((c + 1) % n);
                }
            }
        }
        out
    }

    /// Number of neighbours without materialising them.
    #[inline]
    pub fn neighbor_count(&self, v: &VoxelRef) -> usize {
        if v.level == 0 {
            return 0;
        }
        match self.boundary {
            Boundary::Periodic => 6,
            Boundary::Reflecting => {
                let n = 1u32 << v.level;
                v.ijk
                    .iter()
                    .map(|&c| usize::from(c > 0) + usize::from(c + 1 < n))
                    .sum()
            }
        }
    }

    /// Uniformly sampled voxel on `level`.
    pub fn uniform_voxel<R: Rng + ?Sized>(&self, level: u8, rng: &mut R) -> Result<VoxelRef, MeshError> {
        self.uniform_descendant(&VoxelRef::ROOT, level, rng)
    }

    /// Uniformly sampled voxel on `level` inside `v`; each of the `8^(level - v.level)`
    /// candidates is equally likely.
    pub fn uniform_descendant<R: Rng + ?Sized>(
        &self,
        v: &VoxelRef,
        level: u8,
        rng: &mut R,
    ) -> Result<VoxelRef, MeshError> {
        self.check_level(level)?;
        if level < v.level {
            return Err(MeshError::LevelOutOfRange { requested: level, max: v.level });
        }
        let d = level - v.level;
        if d == 0 {
            return Ok(*v);
        }
        let span = 1u32 << d;
        let ijk = v.ijk.map(|c| (c << d) + rng.random_range(0..span));
        Ok(VoxelRef { level, ijk })
    }
}
