//! End-to-end simulation of a storage plan over in-memory databases.
//!
//! Each segment of the plan is cut into blocks, one per partition part. A
//! block of weight `η` carries `fraction * η * L` parameters of every
//! submodel, coded with the segment's `(K, R)` code over the part's `R`
//! databases. Public constants of a block are derived from the plan seed of
//! its segment, so every run of the same plan uses the same code.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::field::{gen_eval_constants, FieldElement, PrimeField, SIM_PRIME};
use crate::frame::{Frame, FrameHeader};
use crate::plan::StoragePlan;
use crate::protocol::{CodedSegment, PlainSubpacket, QueryBundle, ShardState};
use crate::ratio::{frac, int, lcm_denominators, to_fraction_string, Rational};

type Fe = FieldElement;

/// Refuse to materialise systems with more stored symbols than this.
pub const MAX_STORED_SYMBOLS: u64 = 1 << 27;

/// Public constant seed of part `part` of a segment seeded with `seed`.
pub fn block_seed(seed: u64, part: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(part as u64 + 1)
}

/// Smallest `L` for which every block holds a whole number of subpackets.
pub fn minimal_l(plan: &StoragePlan) -> BigInt {
    let mut per_param = Vec::new();
    for seg in &plan.segments {
        let unit = int((seg.code.y * seg.code.k) as i64);
        for part in &seg.partition.parts {
            per_param.push(&seg.fraction * &part.eta / &unit);
        }
    }
    lcm_denominators(per_param.iter())
}

/// [`minimal_l`] as a `u64`, or an error when it does not fit.
pub fn minimal_l_u64(plan: &StoragePlan) -> Result<u64> {
    let l = minimal_l(plan);
    l.to_u64().ok_or_else(|| Error::Plan(format!("the smallest valid L is {l}, too large to simulate")))
}

struct Block {
    segment: usize,
    coded: CodedSegment,
    /// Global database ids, position order.
    members: Vec<usize>,
    subpackets: usize,
    /// First parameter of the block inside every submodel.
    offset: usize,
}

impl Block {
    fn unit(&self) -> usize {
        self.coded.spec().subpacket_params()
    }
}

/// Symbols moved in one or more rounds.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Counts {
    pub downloaded: u64,
    pub uploaded: u64,
    pub useful_read: u64,
    pub useful_write: u64,
}

impl Counts {
    fn add(&mut self, other: &Counts) {
        self.downloaded += other.downloaded;
        self.uploaded += other.uploaded;
        self.useful_read += other.useful_read;
        self.useful_write += other.useful_write;
    }

    pub fn read_cost(&self) -> Option<Rational> {
        ratio(self.downloaded, self.useful_read)
    }

    pub fn write_cost(&self) -> Option<Rational> {
        ratio(self.uploaded, self.useful_write)
    }

    /// `C_R + C_W`; `None` until both a read and a write were counted.
    pub fn total_cost(&self) -> Option<Rational> {
        Some(self.read_cost()? + self.write_cost()?)
    }
}

fn ratio(num: u64, den: u64) -> Option<Rational> {
    (den > 0).then(|| frac(num as i64, den as i64))
}

/// Cumulative and per-segment symbol counts.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CostLedger {
    pub total: Counts,
    pub segments: Vec<Counts>,
}

impl CostLedger {
    fn new(segments: usize) -> Self {
        Self { total: Counts::default(), segments: vec![Counts::default(); segments] }
    }

    fn record(&mut self, segment: usize, c: &Counts) {
        self.total.add(c);
        self.segments[segment].add(c);
    }

    pub fn absorb(&mut self, other: &CostLedger) {
        self.total.add(&other.total);
        if self.segments.len() < other.segments.len() {
            self.segments.resize(other.segments.len(), Counts::default());
        }
        for (a, b) in self.segments.iter_mut().zip(&other.segments) {
            a.add(b);
        }
    }
}

/// Binary frames plus a JSON round log written under one directory.
pub struct Transcript {
    dir: PathBuf,
    frames: BufWriter<File>,
    salt: [u8; 16],
    debug: bool,
    rounds: Vec<RoundLog>,
    pending_frames: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RoundLog {
    pub round: u64,
    pub theta_hash: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<usize>,
    pub frames: u64,
    pub downloaded: u64,
    pub uploaded: u64,
    pub read_cost: Option<String>,
    pub write_cost: Option<String>,
}

impl Transcript {
    /// Creates `dir/messages.bin`. With `debug` the plain (1-based) index is
    /// logged next to its hash.
    pub fn create(dir: &Path, salt_seed: u64, debug: bool) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let frames = BufWriter::new(File::create(dir.join("messages.bin"))?);
        let mut salt = [0u8; 16];
        ChaCha8Rng::seed_from_u64(salt_seed ^ 0x5A17_5A17_5A17_5A17).fill(&mut salt);
        Ok(Self { dir: dir.to_path_buf(), frames, salt, debug, rounds: Vec::new(), pending_frames: 0 })
    }

    fn frame(&mut self, header: FrameHeader, values: Vec<Fe>) -> Result<()> {
        Frame { header, values }.write_to(&mut self.frames)?;
        self.pending_frames += 1;
        Ok(())
    }

    fn theta_hash(&self, round: u64, theta: usize) -> String {
        let mut h = Sha256::new();
        h.update(self.salt);
        h.update(round.to_le_bytes());
        h.update((theta as u64).to_le_bytes());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    fn close_round(&mut self, round: u64, theta: usize, counts: &Counts) {
        let log = RoundLog {
            round,
            theta_hash: self.theta_hash(round, theta),
            theta: self.debug.then_some(theta + 1),
            frames: std::mem::take(&mut self.pending_frames),
            downloaded: counts.downloaded,
            uploaded: counts.uploaded,
            read_cost: counts.read_cost().map(|v| to_fraction_string(&v)),
            write_cost: counts.write_cost().map(|v| to_fraction_string(&v)),
        };
        self.rounds.push(log);
    }

    pub fn rounds(&self) -> &[RoundLog] {
        &self.rounds
    }

    /// Flushes the frames and writes `rounds.json`.
    pub fn finish(mut self) -> Result<PathBuf> {
        self.frames.flush()?;
        let path = self.dir.join("rounds.json");
        let text = serde_json::to_string_pretty(&self.rounds).map_err(|e| Error::Io(e.to_string()))?;
        fs::write(&path, text + "\n")?;
        Ok(path)
    }
}

/// `N` databases holding a coded model, plus the client's oracle copy.
pub struct SystemState {
    plan: StoragePlan,
    field: PrimeField,
    m: usize,
    l: usize,
    blocks: Vec<Block>,
    /// `shards[db]` lists `(block, shard)` pairs.
    shards: Vec<Vec<(usize, ShardState)>>,
    model: Vec<Vec<Fe>>,
    rng: ChaCha8Rng,
    cached: Option<(usize, Vec<QueryBundle>)>,
    round: u64,
    transcript: Option<Transcript>,
}

pub fn init_system(plan: &StoragePlan, m: usize, l: u64, seed: u64) -> Result<SystemState> {
    init_system_in(plan, PrimeField::new(SIM_PRIME)?, m, l, seed)
}

pub fn init_system_in(plan: &StoragePlan, field: PrimeField, m: usize, l: u64, seed: u64) -> Result<SystemState> {
    plan.verify()?;
    if m < 2 {
        return Err(Error::InvalidConstraints(format!("need at least 2 submodels, got {m}")));
    }
    let minimal = minimal_l(plan);
    if l == 0 || !(BigInt::from(l) % &minimal).is_zero() {
        let minimal = minimal.to_u64().unwrap_or(u64::MAX);
        return Err(Error::IndivisibleL { given: l, minimal });
    }
    let stored: Rational = plan.constraints.iter().sum::<Rational>() * int(m as i64) * int(l as i64);
    if stored > Rational::from_integer(BigInt::from(MAX_STORED_SYMBOLS)) {
        return Err(Error::Plan(format!(
            "{} stored symbols exceed the simulation limit {MAX_STORED_SYMBOLS}",
            to_fraction_string(&stored)
        )));
    }
    let n = plan.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model: Vec<Vec<Fe>> = (0..m).map(|_| (0..l).map(|_| field.random(&mut rng)).collect()).collect();

    let mut blocks = Vec::new();
    let mut offset = 0usize;
    for (s, seg) in plan.segments.iter().enumerate() {
        let code = seg.code;
        let unit = code.subpacket_params();
        for (pi, part) in seg.partition.parts.iter().enumerate() {
            let params = &seg.fraction * &part.eta * int(l as i64);
            let subpackets = (params / int(unit as i64))
                .to_integer()
                .to_usize()
                .ok_or_else(|| Error::Plan("block too large".into()))?;
            let consts = gen_eval_constants(&field, code.r, code.y, code.k, block_seed(plan.seeds[s], pi))?;
            let coded = CodedSegment::new(field, code, consts, m)?;
            blocks.push(Block { segment: s, coded, members: part.subset.clone(), subpackets, offset });
            offset += subpackets * unit;
        }
    }
    if offset as u64 != l {
        return Err(Error::Invariant(format!("blocks cover {offset} of {l} parameters")));
    }

    let mut shards: Vec<Vec<(usize, ShardState)>> = vec![Vec::new(); n];
    for (b, block) in blocks.iter().enumerate() {
        let spec = *block.coded.spec();
        let mut local: Vec<ShardState> = block.members.iter().map(|&db| ShardState::new(db, m, spec.y)).collect();
        for sp in 0..block.subpackets {
            let base = block.offset + sp * block.unit();
            let mut plain = PlainSubpacket::zeros(m, spec.y, spec.k);
            for (mm, row) in model.iter().enumerate() {
                for j in 0..spec.y {
                    for i in 0..spec.k {
                        plain.set(mm, j, i, row[base + j * spec.k + i]);
                    }
                }
            }
            let columns = block.coded.encode_subpacket(&plain, &mut rng)?;
            for (shard, col) in local.iter_mut().zip(&columns) {
                shard.push_subpacket(col)?;
            }
        }
        for (shard, &db) in local.into_iter().zip(&block.members) {
            shards[db].push((b, shard));
        }
    }

    Ok(SystemState {
        plan: plan.clone(),
        field,
        m,
        l: l as usize,
        blocks,
        shards,
        model,
        rng,
        cached: None,
        round: 0,
        transcript: None,
    })
}

impl SystemState {
    pub fn plan(&self) -> &StoragePlan {
        &self.plan
    }

    pub fn field(&self) -> &PrimeField {
        &self.field
    }

    pub fn submodels(&self) -> usize {
        self.m
    }

    pub fn params(&self) -> usize {
        self.l
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    /// Oracle copy of submodel `theta`.
    pub fn oracle(&self, theta: usize) -> &[Fe] {
        &self.model[theta]
    }

    pub fn attach_transcript(&mut self, t: Transcript) {
        self.transcript = Some(t);
    }

    pub fn take_transcript(&mut self) -> Option<Transcript> {
        self.transcript.take()
    }

    /// Stored symbols per database.
    pub fn occupancy(&self) -> Vec<u64> {
        self.shards.iter().map(|list| list.iter().map(|(_, s)| s.symbol_count() as u64).sum()).collect()
    }

    /// `μ(n) M L` for every database.
    pub fn expected_occupancy(&self) -> Vec<Rational> {
        let scale = int(self.m as i64) * int(self.l as i64);
        self.plan.constraints.iter().map(|mu| mu * &scale).collect()
    }

    pub fn occupancy_exact(&self) -> bool {
        self.occupancy()
            .iter()
            .zip(self.expected_occupancy())
            .all(|(got, want)| Rational::from_integer(BigInt::from(*got)) == want)
    }

    /// Every stored symbol of database `db`, block order.
    pub fn database_symbols(&self, db: usize) -> Vec<Fe> {
        self.shards[db].iter().flat_map(|(_, s)| s.rows().iter().copied()).collect()
    }

    fn shard(&self, db: usize, block: usize) -> Result<&ShardState> {
        self.shards[db]
            .iter()
            .find(|(b, _)| *b == block)
            .map(|(_, s)| s)
            .ok_or_else(|| Error::Invariant(format!("database {db} holds no shard of block {block}")))
    }

    fn shard_mut(&mut self, db: usize, block: usize) -> Result<&mut ShardState> {
        self.shards[db]
            .iter_mut()
            .find(|(b, _)| *b == block)
            .map(|(_, s)| s)
            .ok_or_else(|| Error::Invariant(format!("database {db} holds no shard of block {block}")))
    }

    fn check_theta(&self, theta: usize) -> Result<()> {
        if theta >= self.m {
            return Err(Error::BadIndex { index: theta, bound: self.m });
        }
        Ok(())
    }

    fn record_frame(&mut self, block: usize, values: Vec<Fe>) -> Result<()> {
        if self.transcript.is_none() {
            return Ok(());
        }
        let header = FrameHeader::new(&self.field, self.m, self.blocks[block].coded.spec());
        self.transcript.as_mut().expect("checked above").frame(header, values)
    }

    /// Privately reads submodel `theta` (0-based). The queries are kept for
    /// the write that follows.
    pub fn run_read(&mut self, theta: usize) -> Result<(Vec<Fe>, CostLedger)> {
        self.check_theta(theta)?;
        let mut out = vec![Fe::ZERO; self.l];
        let mut ledger = CostLedger::new(self.plan.segments.len());
        let mut bundles = Vec::with_capacity(self.blocks.len());
        for b in 0..self.blocks.len() {
            let bundle = self.blocks[b].coded.build_queries(theta, &mut self.rng)?;
            let block = &self.blocks[b];
            let spec = *block.coded.spec();
            let mut answer_log: Vec<Vec<Fe>> = vec![Vec::new(); spec.r];
            for sp in 0..block.subpackets {
                let answers = block
                    .members
                    .iter()
                    .enumerate()
                    .map(|(pos, &db)| block.coded.answer_query(self.shard(db, b)?, sp, bundle.for_database(pos)))
                    .collect::<Result<Vec<_>>>()?;
                let values = block.coded.decode_read(&answers)?;
                let base = block.offset + sp * block.unit();
                out[base..base + values.len()].copy_from_slice(&values);
                if self.transcript.is_some() {
                    for (log, a) in answer_log.iter_mut().zip(&answers) {
                        log.extend_from_slice(a);
                    }
                }
            }
            let counts = Counts {
                downloaded: (block.subpackets * spec.download_per_subpacket()) as u64,
                useful_read: (block.subpackets * spec.subpacket_params()) as u64,
                ..Counts::default()
            };
            ledger.record(block.segment, &counts);
            if self.transcript.is_some() {
                for pos in 0..spec.r {
                    let q: Vec<Fe> = bundle.for_database(pos).vectors.concat();
                    self.record_frame(b, q)?;
                }
                for a in answer_log {
                    self.record_frame(b, a)?;
                }
            }
            bundles.push(bundle);
        }
        self.cached = Some((theta, bundles));
        Ok((out, ledger))
    }

    /// Privately adds `delta` to submodel `theta`, reusing the queries of the
    /// preceding read of the same index when there is one.
    pub fn run_write(&mut self, theta: usize, delta: &[Fe]) -> Result<CostLedger> {
        self.check_theta(theta)?;
        if delta.len() != self.l {
            return Err(Error::DimensionMismatch(format!("update of length {}, expected {}", delta.len(), self.l)));
        }
        let bundles = match self.cached.take() {
            Some((t, bundles)) if t == theta => bundles,
            _ => (0..self.blocks.len())
                .map(|b| self.blocks[b].coded.build_queries(theta, &mut self.rng))
                .collect::<Result<Vec<_>>>()?,
        };
        let mut ledger = CostLedger::new(self.plan.segments.len());
        for (b, bundle) in bundles.iter().enumerate() {
            let spec = *self.blocks[b].coded.spec();
            let null_set = self.blocks[b].coded.null_set();
            let mut upload_log: Vec<Vec<Fe>> = vec![Vec::new(); spec.r];
            for sp in 0..self.blocks[b].subpackets {
                let base = self.blocks[b].offset + sp * spec.subpacket_params();
                let chunk = &delta[base..base + spec.subpacket_params()];
                let updates = self.blocks[b].coded.build_updates(chunk, &null_set, &mut self.rng)?;
                for (pos, log) in upload_log.iter_mut().enumerate() {
                    let Some(update) = &updates.payloads[pos] else { continue };
                    let db = self.blocks[b].members[pos];
                    let coded = self.blocks[b].coded.clone();
                    let shard = self.shard_mut(db, b)?;
                    coded.apply_update(shard, sp, pos, bundle.for_database(pos), update, &null_set)?;
                    if self.transcript.is_some() {
                        log.extend_from_slice(&update.values);
                    }
                }
            }
            let block = &self.blocks[b];
            let counts = Counts {
                uploaded: (block.subpackets * spec.upload_per_subpacket()) as u64,
                useful_write: (block.subpackets * spec.subpacket_params()) as u64,
                ..Counts::default()
            };
            ledger.record(block.segment, &counts);
            if self.transcript.is_some() {
                for (pos, log) in upload_log.into_iter().enumerate() {
                    if !null_set.contains(&pos) {
                        self.record_frame(b, log)?;
                    }
                }
            }
        }
        let f = self.field;
        for (w, d) in self.model[theta].iter_mut().zip(delta) {
            *w = f.add(*w, *d);
        }
        Ok(ledger)
    }

    /// One read of `theta` followed by a write of `delta`. Returns whether
    /// the read matched the oracle.
    pub fn run_round(&mut self, theta: usize, delta: &[Fe]) -> Result<(bool, CostLedger)> {
        let (read, mut ledger) = self.run_read(theta)?;
        let matched = read == self.model[theta];
        ledger.absorb(&self.run_write(theta, delta)?);
        if let Some(t) = self.transcript.as_mut() {
            t.close_round(self.round, theta, &ledger.total);
        }
        self.round += 1;
        Ok((matched, ledger))
    }

    /// Reads every submodel and compares with the oracle.
    pub fn check_all(&mut self) -> Result<bool> {
        let saved = self.cached.take();
        let mut ok = true;
        for theta in 0..self.m {
            let (read, _) = self.run_read(theta)?;
            ok &= read == self.model[theta];
        }
        self.cached = saved;
        Ok(ok)
    }
}

/// Seeded source of per-round indices and updates.
pub struct Scenario {
    rng: ChaCha8Rng,
}

impl Scenario {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed ^ 0xC0FF_EE00_D15E_A5E5) }
    }

    /// A uniformly random index and update vector.
    pub fn next_round(&mut self, field: &PrimeField, m: usize, l: usize) -> (usize, Vec<Fe>) {
        let theta = self.rng.random_range(0..m);
        let delta = (0..l).map(|_| field.random(&mut self.rng)).collect();
        (theta, delta)
    }
}

/// Measured and predicted costs of one segment, or of the whole plan.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CostRow {
    pub label: String,
    pub measured_read: String,
    pub measured_write: String,
    pub measured_total: String,
    pub predicted_read: String,
    pub predicted_write: String,
    pub predicted_total: String,
    pub equal: bool,
}

impl CostRow {
    fn new(label: String, measured: &Counts, scale: &Rational, predicted: [Rational; 3]) -> Result<Self> {
        let missing = || Error::Invariant(format!("{label}: no traffic counted"));
        let r = measured.read_cost().ok_or_else(missing)? * scale;
        let w = measured.write_cost().ok_or_else(missing)? * scale;
        let t = &r + &w;
        let equal = r == predicted[0] && w == predicted[1] && t == predicted[2];
        let s = to_fraction_string;
        Ok(Self {
            label,
            measured_read: s(&r),
            measured_write: s(&w),
            measured_total: s(&t),
            predicted_read: s(&predicted[0]),
            predicted_write: s(&predicted[1]),
            predicted_total: s(&predicted[2]),
            equal,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CostComparison {
    pub rounds: usize,
    pub read_mismatches: usize,
    pub segments: Vec<CostRow>,
    pub blended: CostRow,
    pub ledger: CostLedger,
}

impl CostComparison {
    pub fn all_equal(&self) -> bool {
        self.read_mismatches == 0 && self.blended.equal && self.segments.iter().all(|s| s.equal)
    }
}

/// Runs `rounds` read/write rounds from `scenario` and compares the measured
/// costs with the closed forms, per segment and blended.
pub fn measure_vs_theory(sys: &mut SystemState, rounds: usize, scenario: &mut Scenario) -> Result<CostComparison> {
    if rounds == 0 {
        return Err(Error::InvalidConstraints("need at least one round".into()));
    }
    let mut ledger = CostLedger::new(sys.plan.segments.len());
    let mut read_mismatches = 0;
    for _ in 0..rounds {
        let (theta, delta) = scenario.next_round(&sys.field, sys.m, sys.l);
        let (ok, d) = sys.run_round(theta, &delta)?;
        if !ok {
            read_mismatches += 1;
        }
        ledger.absorb(&d);
    }
    let plan = &sys.plan;
    let mut segments = Vec::new();
    let mut blended_pred = [Rational::zero(), Rational::zero(), Rational::zero()];
    for (seg, counts) in plan.segments.iter().zip(&ledger.segments) {
        let (r, w, t) = seg.code.costs();
        blended_pred[0] += &seg.fraction * &r;
        blended_pred[1] += &seg.fraction * &w;
        blended_pred[2] += &seg.fraction * &t;
        segments.push(CostRow::new(format!("{}", seg.code), counts, &int(1), [r, w, t])?);
    }
    if blended_pred[2] != plan.predicted_cost {
        return Err(Error::Invariant("segment costs disagree with the plan's prediction".into()));
    }
    let blended = CostRow::new("blended".into(), &ledger.total, &int(1), blended_pred)?;
    Ok(CostComparison { rounds, read_mismatches, segments, blended, ledger })
}
