//! Occupancy index: residents per (voxel, species) and subtree counters.

use rustc_hash::FxHashMap;

use crate::mesh::VoxelRef;

pub(crate) type CellKey = (u64, u32);

#[derive(Debug, Clone, Default)]
pub(crate) struct Occupancy {
    /// Slots resident in each (voxel, species) cell.
    pub residents: FxHashMap<CellKey, Vec<u32>>,
    /// Number of molecules of a species at or below each voxel.
    pub subtree: FxHashMap<CellKey, u32>,
}

impl Occupancy {
    /// Appends `slot` to its cell and returns its position there.
    pub fn insert_resident(&mut self, v: &VoxelRef, species: u32, slot: u32) -> u32 {
        let list = self.residents.entry((v.key(), species)).or_default();
        list.push(slot);
        (list.len() - 1) as u32
    }

    /// Removes the entry at `at`. Returns the slot that was moved into its
    /// place, if any, so the caller can fix that slot's stored position.
    pub fn remove_resident(&mut self, v: &VoxelRef, species: u32, at: u32) -> Option<u32> {
        let key = (v.key(), species);
        let list = self.residents.get_mut(&key).expect("resident cell exists");
        list.swap_remove(at as usize);
        let moved = list.get(at as usize).copied();
        if list.is_empty() {
            // Keep the map proportional to the population, not to the voxels visited.
            self.residents.remove(&key);
        }
        moved
    }

    pub fn residents(&self, v: &VoxelRef, species: u32) -> &[u32] {
        self.residents
            .get(&(v.key(), species))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn subtree_count(&self, v: &VoxelRef, species: u32) -> u32 {
        self.subtree.get(&(v.key(), species)).copied().unwrap_or(0)
    }

    /// Adjusts subtree counters along the path from `v` up to the root.
    pub fn add_path(&mut self, v: &VoxelRef, species: u32, delta: i32) {
        for up in 0..=v.level {
            self.bump(&v.shifted_up(up), species, delta);
        }
    }

    /// Moves one count from the root path of `from` to that of `to`,
    /// leaving the shared ancestors untouched.
    pub fn move_path(&mut self, from: &VoxelRef, to: &VoxelRef, species: u32) {
        let top = from.level.max(to.level);
        for level in (0..=top).rev() {
            let a = (level <= from.level).then(|| from.shifted_up(from.level - level));
            let b = (level <= to.level).then(|| to.shifted_up(to.level - level));
            if a == b {
                // Shared from here to the root.
                break;
            }
            if let Some(a) = a {
                self.bump(&a, species, -1);
            }
            if let Some(b) = b {
                self.bump(&b, species, 1);
            }
        }
    }

    fn bump(&mut self, v: &VoxelRef, species: u32, delta: i32) {
        let key = (v.key(), species);
        let c = self.subtree.entry(key).or_insert(0);
        *c = c.checked_add_signed(delta).expect("subtree counter underflow");
        if *c == 0 {
            self.subtree.remove(&key);
        }
    }
}
