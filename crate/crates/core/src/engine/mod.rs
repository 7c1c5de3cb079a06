//! Hierarchical next-particle event loop.
//!
//! Every molecule carries its own tentative events on one global time-ordered
//! queue: a diffusion jump, at most one first-order reaction, and one
//! association event per reactive partner whose voxel contains (or is
//! contained in) its own. Pairs on different levels react at the mesoscopic
//! rate of the coarser voxel. Molecules are promoted to the parent voxel right
//! after a diffusion jump once they have spent `C h^2 / (6 D)` on their
//! current level.
//!
//! Events are never deleted from the queue. Each molecule slot carries a
//! serial (fixed for its lifetime) and a stamp (renewed on every move); an
//! event whose captured values no longer match is discarded when popped.

mod index;
mod kinetics;
mod queue;

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use thiserror::Error;

use crate::mesh::{MeshHierarchy, VoxelRef};
use crate::model::{ModelDiagnostic, ModelError};

use index::Occupancy;
pub use kinetics::Kinetics;
pub use queue::{EventKind, EventQueue, TentativeEvent};

/// Random number generator driving a trajectory.
pub type SimRng = ChaCha8Rng;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("invalid model: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidModel(Vec<ModelDiagnostic>),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("index audit failed at t = {time}: {message}")]
    Audit { time: f64, message: String },
    #[error("unknown species index {0}")]
    UnknownSpecies(usize),
    #[error("voxel {0:?} is not on a level this species can occupy")]
    BadVoxel(VoxelRef),
}

/// Identity of a molecule, unique over the whole trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MoleculeId {
    slot: u32,
    serial: u64,
}

impl MoleculeId {
    pub fn serial(&self) -> u64 {
        self.serial
    }
}

/// Read-only view of a live molecule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Molecule {
    pub id: MoleculeId,
    pub species: usize,
    pub pos: VoxelRef,
    /// Time at which the molecule arrived on its current level.
    pub level_entry_time: f64,
}

#[derive(Debug, Clone)]
struct Slot {
    alive: bool,
    serial: u64,
    stamp: u64,
    species: u32,
    pos: VoxelRef,
    level_entry: f64,
    /// Position inside the resident list of its cell.
    list_at: u32,
}

/// Executed-event tallies of one trajectory.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventCounts {
    pub diffusion: u64,
    pub unimolecular: u64,
    pub bimolecular: u64,
    pub creation: u64,
    /// Stale entries popped and dropped.
    pub discarded: u64,
    /// Promotions out of each level (index = level left).
    pub transfers: Vec<u64>,
}

impl EventCounts {
    /// Total executed events (stale pops excluded).
    pub fn total(&self) -> u64 {
        self.diffusion + self.unimolecular + self.bimolecular + self.creation
    }

    pub fn merge(&mut self, other: &EventCounts) {
        self.diffusion += other.diffusion;
        self.unimolecular += other.unimolecular;
        self.bimolecular += other.bimolecular;
        self.creation += other.creation;
        self.discarded += other.discarded;
        if self.transfers.len() < other.transfers.len() {
            self.transfers.resize(other.transfers.len(), 0);
        }
        for (a, b) in self.transfers.iter_mut().zip(&other.transfers) {
            *a += b;
        }
    }
}

/// A reaction that has just fired.
#[derive(Debug, Clone, Copy)]
pub struct ReactionRecord<'a> {
    pub time: f64,
    /// Index into the model's channels.
    pub channel: usize,
    pub reactants: &'a [MoleculeId],
    pub products: &'a [MoleculeId],
}

/// Callbacks invoked by [`Simulation::run`].
///
/// Samples are requested in nondecreasing time order and receive the species
/// counts in effect at that time.
pub trait Observer {
    fn next_sample_time(&self) -> Option<f64> {
        None
    }

    fn sample(&mut self, _time: f64, _counts: &[u64]) {}

    fn reaction(&mut self, _record: &ReactionRecord<'_>) {}
}

/// Outcome of one executed event.
#[derive(Debug, Clone, PartialEq)]
pub enum Executed {
    Diffusion { molecule: MoleculeId, from: VoxelRef, to: VoxelRef },
    Reaction { channel: usize, reactants: Vec<MoleculeId>, products: Vec<MoleculeId> },
}

/// Mutable state of a single trajectory.
#[derive(Debug, Clone)]
pub struct Simulation {
    kin: Arc<Kinetics>,
    time: f64,
    slots: Vec<Slot>,
    free: Vec<u32>,
    next_stamp: u64,
    counts: Vec<u64>,
    occ: Occupancy,
    queue: EventQueue,
    rng: SimRng,
    metrics: EventCounts,
    audit: bool,
    // Scratch buffers reused across events.
    partner_buf: Vec<(u32, u8)>,
}

impl Simulation {
    /// Empty state at time 0: no molecules and no zeroth-order sources queued.
    pub fn new(kin: Arc<Kinetics>, rng: SimRng) -> Simulation {
        let nspecies = kin.species.len();
        let nlev = kin.hierarchy.lmax() as usize + 1;
        Simulation {
            kin,
            time: 0.0,
            slots: Vec::new(),
            free: Vec::new(),
            next_stamp: 0,
            counts: vec![0; nspecies],
            occ: Occupancy::default(),
            queue: EventQueue::new(),
            rng,
            metrics: EventCounts { transfers: vec![0; nlev], ..Default::default() },
            audit: false,
            partner_buf: Vec::new(),
        }
    }

    /// Initial state: each species' initial copies placed uniformly on its
    /// target level with all tentative events queued, plus one tentative
    /// event per zeroth-order channel.
    pub fn initialized(kin: Arc<Kinetics>, rng: SimRng) -> Simulation {
        let mut sim = Simulation::new(kin, rng);
        let kin = Arc::clone(&sim.kin);
        for (s, spec) in kin.model.species.iter().enumerate() {
            let level = kin.species[s].target;
            for _ in 0..spec.initial_count {
                let v = kin
                    .hierarchy
                    .uniform_voxel(level, &mut sim.rng)
                    .expect("target level within hierarchy");
                sim.spawn(s as u32, v);
            }
        }
        for &c in &kin.sources {
            sim.schedule_creation(c);
        }
        sim
    }

    /// Checks index coherence after every event; slow.
    pub fn set_audit(&mut self, on: bool) {
        self.audit = on;
    }

    pub fn kinetics(&self) -> &Kinetics {
        &self.kin
    }

    pub fn hierarchy(&self) -> &MeshHierarchy {
        &self.kin.hierarchy
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn metrics(&self) -> &EventCounts {
        &self.metrics
    }

    pub fn queue(&self) -> &EventQueue {
        &self.queue
    }

    pub fn rng_mut(&mut self) -> &mut SimRng {
        &mut self.rng
    }

    pub fn molecule(&self, id: MoleculeId) -> Option<Molecule> {
        let s = self.slots.get(id.slot as usize)?;
        (s.alive && s.serial == id.serial).then(|| self.view(id.slot))
    }

    pub fn molecules(&self) -> impl Iterator<Item = Molecule> + '_ {
        (0..self.slots.len() as u32)
            .filter(|&i| self.slots[i as usize].alive)
            .map(|i| self.view(i))
    }

    fn view(&self, slot: u32) -> Molecule {
        let s = &self.slots[slot as usize];
        Molecule {
            id: MoleculeId { slot, serial: s.serial },
            species: s.species as usize,
            pos: s.pos,
            level_entry_time: s.level_entry,
        }
    }

    /// True when the event's participants are unchanged since it was sampled.
    pub fn is_live(&self, e: &TentativeEvent) -> bool {
        live_in(&self.slots, e)
    }

    /// Adds a molecule at `v` and samples all of its tentative events. The
    /// voxel may not be finer than the species' target level (nor coarser when
    /// transfers are disabled).
    pub fn insert_molecule(&mut self, species: usize, v: VoxelRef) -> Result<MoleculeId, EngineError> {
        if species >= self.kin.species.len() {
            return Err(EngineError::UnknownSpecies(species));
        }
        let sk = &self.kin.species[species];
        if v.level < sk.min_level || v.level > sk.target || VoxelRef::new(v.level, v.ijk).is_err() {
            return Err(EngineError::BadVoxel(v));
        }
        Ok(self.spawn(species as u32, v))
    }

    /// Reactive partners of `id` with the level on which each pair reacts.
    pub fn pair_partners(&mut self, id: MoleculeId) -> Vec<(MoleculeId, u8)> {
        if self.molecule(id).is_none() {
            return Vec::new();
        }
        let species = self.slots[id.slot as usize].species;
        let mut out = Vec::new();
        let kin = Arc::clone(&self.kin);
        for (p, _) in &kin.species[species as usize].partners {
            self.collect_partners(id.slot, *p);
            out.extend(
                self.partner_buf
                    .iter()
                    .map(|&(s, l)| (MoleculeId { slot: s, serial: self.slots[s as usize].serial }, l)),
            );
        }
        out
    }

    fn fresh_stamp(&mut self) -> u64 {
        self.next_stamp += 1;
        self.next_stamp
    }

    fn exp(&mut self, rate: f64) -> f64 {
        let e: f64 = self.rng.sample(Exp1);
        e / rate
    }

    fn spawn(&mut self, species: u32, v: VoxelRef) -> MoleculeId {
        let serial = self.fresh_stamp();
        let stamp = self.fresh_stamp();
        let slot = Slot {
            alive: true,
            serial,
            stamp,
            species,
            pos: v,
            level_entry: self.time,
            list_at: 0,
        };
        let idx = match self.free.pop() {
            Some(i) => {
                self.slots[i as usize] = slot;
                i
            }
            None => {
                self.slots.push(slot);
                (self.slots.len() - 1) as u32
            }
        };
        self.counts[species as usize] += 1;
        self.index_insert(idx);
        self.schedule_diffusion(idx);
        self.schedule_unimolecular(idx);
        self.schedule_pairs(idx);
        MoleculeId { slot: idx, serial }
    }

    fn kill(&mut self, slot: u32) {
        self.index_remove(slot);
        let stamp = self.fresh_stamp();
        let s = &mut self.slots[slot as usize];
        s.alive = false;
        s.stamp = stamp;
        self.counts[s.species as usize] -= 1;
        self.free.push(slot);
    }

    fn index_insert(&mut self, slot: u32) {
        let (species, pos) = {
            let s = &self.slots[slot as usize];
            (s.species, s.pos)
        };
        let sk = &self.kin.species[species as usize];
        if !sk.indexed {
            return;
        }
        let at = self.occ.insert_resident(&pos, species, slot);
        self.slots[slot as usize].list_at = at;
        if sk.track_subtree {
            self.occ.add_path(&pos, species, 1);
        }
    }

    fn index_remove(&mut self, slot: u32) {
        let (species, pos, at) = {
            let s = &self.slots[slot as usize];
            (s.species, s.pos, s.list_at)
        };
        let sk = &self.kin.species[species as usize];
        if !sk.indexed {
            return;
        }
        if let Some(moved) = self.occ.remove_resident(&pos, species, at) {
            self.slots[moved as usize].list_at = at;
        }
        if sk.track_subtree {
            self.occ.add_path(&pos, species, -1);
        }
    }

    fn relocate(&mut self, slot: u32, to: VoxelRef) {
        let (species, from, at) = {
            let s = &self.slots[slot as usize];
            (s.species, s.pos, s.list_at)
        };
        let sk = &self.kin.species[species as usize];
        if sk.indexed {
            if let Some(moved) = self.occ.remove_resident(&from, species, at) {
                self.slots[moved as usize].list_at = at;
            }
            let at = self.occ.insert_resident(&to, species, slot);
            self.slots[slot as usize].list_at = at;
            if sk.track_subtree {
                self.occ.move_path(&from, &to, species);
            }
        }
        let stamp = self.fresh_stamp();
        let s = &mut self.slots[slot as usize];
        s.pos = to;
        s.stamp = stamp;
    }

    fn schedule_diffusion(&mut self, slot: u32) {
        let s = &self.slots[slot as usize];
        let n = self.kin.hierarchy.neighbor_count(&s.pos);
        if n == 0 {
            return;
        }
        let rate = n as f64 * self.kin.species[s.species as usize].jump_rate[s.pos.level as usize];
        let stamp = s.stamp;
        let t = self.time + self.exp(rate);
        self.queue.push(t, EventKind::Diffusion { slot, stamp });
    }

    fn schedule_unimolecular(&mut self, slot: u32) {
        let (species, serial) = {
            let s = &self.slots[slot as usize];
            (s.species as usize, s.serial)
        };
        let total = self.kin.species[species].uni_total;
        if total <= 0.0 {
            return;
        }
        let t = self.time + self.exp(total);
        let uni = &self.kin.species[species].uni;
        let channel = if uni.len() == 1 {
            uni[0].1
        } else {
            let u = self.rng.random::<f64>() * total;
            uni.iter().find(|(cum, _)| u < *cum).unwrap_or(uni.last().expect("nonempty")).1
        };
        self.queue.push(t, EventKind::Unimolecular { slot, serial, channel });
    }

    fn schedule_creation(&mut self, channel: u32) {
        let k = self.kin.channels[channel as usize].k;
        let t = self.time + self.exp(k);
        self.queue.push(t, EventKind::Creation { channel });
    }

    /// Fills `partner_buf` with (slot, effective level) for every molecule of
    /// species `p` whose voxel contains, or is contained in, that of `slot`.
    fn collect_partners(&mut self, slot: u32, p: u32) {
        self.partner_buf.clear();
        let kin = &self.kin;
        let occ = &self.occ;
        let pos = self.slots[slot as usize].pos;
        let pk = &kin.species[p as usize];
        let top = pos.level.min(pk.target);
        for level in pk.min_level..=top {
            let anc = pos.shifted_up(pos.level - level);
            for &s in occ.residents(&anc, p) {
                if s != slot {
                    self.partner_buf.push((s, level));
                }
            }
        }
        if pos.level < pk.target && pk.track_subtree {
            let here = occ.subtree_count(&pos, p) as usize;
            if here > occ.residents(&pos, p).len() {
                let mut stack = vec![pos];
                while let Some(u) = stack.pop() {
                    for c in u.children_unchecked() {
                        let n = occ.subtree_count(&c, p) as usize;
                        if n == 0 {
                            continue;
                        }
                        let res = occ.residents(&c, p);
                        self.partner_buf.extend(res.iter().map(|&s| (s, pos.level)));
                        if n > res.len() && c.level < pk.target {
                            stack.push(c);
                        }
                    }
                }
            }
        }
    }

    fn schedule_pairs(&mut self, slot: u32) {
        let species = self.slots[slot as usize].species;
        let kin = Arc::clone(&self.kin);
        let stamp_a = self.slots[slot as usize].stamp;
        for (p, chans) in &kin.species[species as usize].partners {
            self.collect_partners(slot, *p);
            for i in 0..self.partner_buf.len() {
                let (b, level) = self.partner_buf[i];
                let stamp_b = self.slots[b as usize].stamp;
                for &c in chans {
                    let rate = kin.channels[c as usize].pair_rate[level as usize];
                    debug_assert!(!rate.is_nan(), "pair rate undefined on level {level}");
                    if rate > 0.0 {
                        let t = self.time + self.exp(rate);
                        self.queue.push(
                            t,
                            EventKind::Bimolecular { a: slot, stamp_a, b, stamp_b, channel: c },
                        );
                    }
                }
            }
        }
    }

    /// Pops stale entries until a live event is on top; returns its time.
    pub fn next_event_time(&mut self) -> Option<f64> {
        loop {
            let top = *self.queue.peek()?;
            if self.is_live(&top) {
                return Some(top.fire_time);
            }
            self.queue.pop();
            self.metrics.discarded += 1;
        }
    }

    /// Executes the next live event if it fires no later than `horizon`.
    pub fn step(&mut self, horizon: f64) -> Result<Option<Executed>, EngineError> {
        loop {
            let Some(t) = self.next_event_time() else {
                return Ok(None);
            };
            if t > horizon {
                return Ok(None);
            }
            let ev = self.queue.pop().expect("peeked");
            if self.audit && ev.fire_time < self.time {
                return Err(self.audit_error(format!("event at {} precedes current time", ev.fire_time)));
            }
            let out = match ev.kind {
                EventKind::Diffusion { slot, .. } => {
                    self.time = ev.fire_time;
                    self.execute_diffusion(slot)
                }
                EventKind::Unimolecular { slot, channel, .. } => {
                    self.time = ev.fire_time;
                    self.execute_reaction(channel, &[slot], None)
                }
                EventKind::Bimolecular { a, b, channel, .. } => {
                    let (pa, pb) = (self.slots[a as usize].pos, self.slots[b as usize].pos);
                    let (coarse, fine) = if pa.level <= pb.level { (pa, pb) } else { (pb, pa) };
                    if !coarse.contains(&fine) {
                        // Containment lost without a stamp change would be an index bug.
                        if self.audit {
                            return Err(self.audit_error("pair event with non-nested voxels".into()));
                        }
                        self.metrics.discarded += 1;
                        continue;
                    }
                    self.time = ev.fire_time;
                    self.execute_reaction(channel, &[a, b], Some(fine))
                }
                EventKind::Creation { channel } => {
                    self.time = ev.fire_time;
                    self.schedule_creation(channel);
                    self.execute_reaction(channel, &[], None)
                }
            };
            if self.queue.wants_compaction() {
                let slots = &self.slots;
                self.queue.compact(|e| live_in(slots, e));
            }
            if self.audit {
                self.audit()?;
            }
            return Ok(Some(out));
        }
    }

    /// Runs until no live event fires at or before `t_final`, then advances
    /// the clock to `t_final`.
    pub fn run(&mut self, t_final: f64, observers: &mut [&mut dyn Observer]) -> Result<(), EngineError> {
        loop {
            let next = self.next_event_time().unwrap_or(f64::INFINITY);
            for obs in observers.iter_mut() {
                while let Some(ts) = obs.next_sample_time() {
                    if ts < next && ts <= t_final {
                        obs.sample(ts, &self.counts);
                    } else {
                        break;
                    }
                }
            }
            if next > t_final {
                break;
            }
            let Some(ex) = self.step(t_final)? else { break };
            if let Executed::Reaction { channel, reactants, products } = &ex {
                let rec = ReactionRecord { time: self.time, channel: *channel, reactants, products };
                for obs in observers.iter_mut() {
                    obs.reaction(&rec);
                }
            }
        }
        if t_final.is_finite() && t_final > self.time {
            self.time = t_final;
        }
        Ok(())
    }

    fn execute_diffusion(&mut self, slot: u32) -> Executed {
        self.metrics.diffusion += 1;
        let (from, species, entry, serial) = {
            let s = &self.slots[slot as usize];
            (s.pos, s.species as usize, s.level_entry, s.serial)
        };
        let hier = &self.kin.hierarchy;
        let nb = hier.neighbors(&from);
        let mut to = nb[self.rng.random_range(0..nb.len())];
        // Promotion happens only here, straight after a jump.
        let tt = &self.kin.species[species].transfer_time;
        let mut entry_new = entry;
        while to.level > 0 && self.time - entry_new >= tt[to.level as usize] {
            self.metrics.transfers[to.level as usize] += 1;
            to = to.shifted_up(1);
            entry_new = self.time;
        }
        self.relocate(slot, to);
        self.slots[slot as usize].level_entry = entry_new;
        self.schedule_diffusion(slot);
        self.schedule_pairs(slot);
        Executed::Diffusion { molecule: MoleculeId { slot, serial }, from, to }
    }

    fn execute_reaction(&mut self, channel: u32, reactants: &[u32], fine: Option<VoxelRef>) -> Executed {
        let kin = Arc::clone(&self.kin);
        let ch = &kin.channels[channel as usize];
        let source = match reactants {
            [] => {
                self.metrics.creation += 1;
                VoxelRef::ROOT
            }
            [r] => {
                self.metrics.unimolecular += 1;
                self.slots[*r as usize].pos
            }
            _ => {
                self.metrics.bimolecular += 1;
                fine.expect("bimolecular source voxel")
            }
        };
        let reactant_ids: Vec<MoleculeId> = reactants
            .iter()
            .map(|&r| MoleculeId { slot: r, serial: self.slots[r as usize].serial })
            .collect();
        for &r in reactants {
            self.kill(r);
        }
        let places = place_products(&kin.hierarchy, &source, &ch.product_levels, &mut self.rng);
        let products = ch
            .products
            .iter()
            .zip(places)
            .map(|(&p, v)| self.spawn(p, v))
            .collect();
        Executed::Reaction { channel: channel as usize, reactants: reactant_ids, products }
    }

    fn audit_error(&self, message: String) -> EngineError {
        EngineError::Audit { time: self.time, message }
    }

    /// Rebuilds the occupancy index from scratch and compares it with the
    /// incrementally maintained one.
    pub fn audit(&self) -> Result<(), EngineError> {
        let mut fresh = Occupancy::default();
        let mut counts = vec![0u64; self.counts.len()];
        let lmax = self.kin.hierarchy.lmax();
        for (i, s) in self.slots.iter().enumerate() {
            if !s.alive {
                continue;
            }
            counts[s.species as usize] += 1;
            if s.pos.level > lmax || s.pos.level > self.kin.species[s.species as usize].target {
                return Err(self.audit_error(format!("slot {i} on level {} above its ceiling", s.pos.level)));
            }
            if s.level_entry > self.time {
                return Err(self.audit_error(format!("slot {i} entered its level in the future")));
            }
            let sk = &self.kin.species[s.species as usize];
            if sk.indexed {
                let res = self.occ.residents(&s.pos, s.species);
                if res.get(s.list_at as usize) != Some(&(i as u32)) {
                    return Err(self.audit_error(format!("slot {i} missing from its resident list")));
                }
                fresh.insert_resident(&s.pos, s.species, i as u32);
                if sk.track_subtree {
                    fresh.add_path(&s.pos, s.species, 1);
                }
            }
        }
        if counts != self.counts {
            return Err(self.audit_error(format!("counts {:?} != recount {:?}", self.counts, counts)));
        }
        for (key, list) in &self.occ.residents {
            let n = fresh.residents.get(key).map_or(0, Vec::len);
            if n != list.len() {
                return Err(self.audit_error(format!("resident cell {key:?}: {} vs {n}", list.len())));
            }
        }
        for (key, &c) in &self.occ.subtree {
            let n = fresh.subtree.get(key).copied().unwrap_or(0);
            if n != c {
                return Err(self.audit_error(format!("subtree cell {key:?}: {c} vs {n}")));
            }
        }
        for (key, &n) in &fresh.subtree {
            if self.occ.subtree.get(key).copied().unwrap_or(0) != n {
                return Err(self.audit_error(format!("subtree cell {key:?} untracked")));
            }
        }
        Ok(())
    }
}

fn live_in(slots: &[Slot], e: &TentativeEvent) -> bool {
    let ok = |slot: u32, stamp: u64| {
        let s = &slots[slot as usize];
        s.alive && s.stamp == stamp
    };
    match e.kind {
        EventKind::Diffusion { slot, stamp } => ok(slot, stamp),
        EventKind::Unimolecular { slot, serial, .. } => {
            let s = &slots[slot as usize];
            s.alive && s.serial == serial
        }
        EventKind::Bimolecular { a, stamp_a, b, stamp_b, .. } => ok(a, stamp_a) && ok(b, stamp_b),
        EventKind::Creation { .. } => true,
    }
}

/// Voxel for one product of target level `target` born from `source`.
///
/// Finer targets get a uniformly sampled descendant, coarser ones the
/// containing ancestor, equal levels the source itself.
pub fn place_product<R: Rng + ?Sized>(
    hierarchy: &MeshHierarchy,
    target: u8,
    source: &VoxelRef,
    rng: &mut R,
) -> VoxelRef {
    if target > source.level {
        hierarchy
            .uniform_descendant(source, target, rng)
            .expect("target level within hierarchy")
    } else {
        source.shifted_up(source.level - target)
    }
}

/// Voxels for all products of one firing.
///
/// Products finer than the source share a single sampled descendant on the
/// finest requested level, so co-produced molecules start co-located (or on
/// one voxel lineage when their levels differ).
pub fn place_products<R: Rng + ?Sized>(
    hierarchy: &MeshHierarchy,
    source: &VoxelRef,
    targets: &[u8],
    rng: &mut R,
) -> Vec<VoxelRef> {
    let finest = targets.iter().copied().max().unwrap_or(0);
    let anchor = place_product(hierarchy, finest.max(source.level), source, rng);
    targets
        .iter()
        .map(|&t| {
            if t > source.level {
                anchor.shifted_up(anchor.level - t)
            } else {
                source.shifted_up(source.level - t)
            }
        })
        .collect()
}

/// Generator for trajectory `index` of an ensemble seeded with `seed`.
///
/// Streams depend only on `(seed, index)`, so results do not change with the
/// number of workers.
pub fn trajectory_rng(seed: u64, index: u64) -> SimRng {
    use rand::SeedableRng;
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
