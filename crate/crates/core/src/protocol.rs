//! Private read-update-write over one `(K, R)` coded segment.
//!
//! Databases are addressed by their position `0..R` inside the segment; the
//! caller maps positions to global database ids. Submodel indices are 0-based.
//!
//! Layouts (all row-major):
//! - plain subpacket `W[m][j][i]`, `m < M`, `j < y`, `i < K`
//! - shard column per subpacket `S[j][m]`, length `M * y`
//! - query vector `Q[j][m]`, length `M * y`, one per `ℓ < K`
//! - storage noise `Z[j][t][m]`, `t <= x`
//! - query noise `Z~[j][ℓ][m]`
//! - update noise `z^[ℓ]`
//! - decoded / delta values `[j][ℓ]`

use rand::Rng;

use crate::code::CodeSpec;
use crate::error::{Error, Result};
use crate::field::{EvalConstants, FieldElement, PrimeField};
use crate::linalg::Matrix;

type Fe = FieldElement;

/// Plain contents of one subpacket of all `M` submodels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlainSubpacket {
    m: usize,
    y: usize,
    k: usize,
    w: Vec<Fe>,
}

impl PlainSubpacket {
    pub fn new(m: usize, y: usize, k: usize, w: Vec<Fe>) -> Result<Self> {
        if w.len() != m * y * k {
            return Err(Error::DimensionMismatch(format!("subpacket has {} values, expected {m}x{y}x{k}", w.len())));
        }
        Ok(Self { m, y, k, w })
    }

    pub fn zeros(m: usize, y: usize, k: usize) -> Self {
        Self { m, y, k, w: vec![Fe::ZERO; m * y * k] }
    }

    pub fn random<R: Rng + ?Sized>(field: &PrimeField, m: usize, y: usize, k: usize, rng: &mut R) -> Self {
        let w = (0..m * y * k).map(|_| field.random(rng)).collect();
        Self { m, y, k, w }
    }

    pub fn get(&self, m: usize, j: usize, i: usize) -> Fe {
        self.w[(m * self.y + j) * self.k + i]
    }

    pub fn set(&mut self, m: usize, j: usize, i: usize, v: Fe) {
        self.w[(m * self.y + j) * self.k + i] = v;
    }

    /// The `y * K` values of submodel `theta`, laid out `[j][i]`.
    pub fn submodel(&self, theta: usize) -> Vec<Fe> {
        self.w[theta * self.y * self.k..(theta + 1) * self.y * self.k].to_vec()
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.m, self.y, self.k)
    }
}

/// One database's stored symbols for one segment, subpacket-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShardState {
    pub db_index: usize,
    m: usize,
    y: usize,
    rows: Vec<Fe>,
}

impl ShardState {
    pub fn new(db_index: usize, m: usize, y: usize) -> Self {
        Self { db_index, m, y, rows: Vec::new() }
    }

    pub fn from_rows(db_index: usize, m: usize, y: usize, rows: Vec<Fe>) -> Result<Self> {
        if m * y == 0 || !rows.len().is_multiple_of(m * y) {
            return Err(Error::DimensionMismatch(format!("{} rows is not a multiple of M*y = {}", rows.len(), m * y)));
        }
        Ok(Self { db_index, m, y, rows })
    }

    pub fn push_subpacket(&mut self, column: &[Fe]) -> Result<()> {
        if column.len() != self.column_len() {
            return Err(Error::DimensionMismatch(format!(
                "column of length {}, expected {}",
                column.len(),
                self.column_len()
            )));
        }
        self.rows.extend_from_slice(column);
        Ok(())
    }

    pub fn column_len(&self) -> usize {
        self.m * self.y
    }

    pub fn subpackets(&self) -> usize {
        self.rows.len() / self.column_len()
    }

    pub fn column(&self, sp: usize) -> &[Fe] {
        let w = self.column_len();
        &self.rows[sp * w..(sp + 1) * w]
    }

    fn column_mut(&mut self, sp: usize) -> &mut [Fe] {
        let w = self.column_len();
        &mut self.rows[sp * w..(sp + 1) * w]
    }

    pub fn rows(&self) -> &[Fe] {
        &self.rows
    }

    /// Number of stored field symbols.
    pub fn symbol_count(&self) -> usize {
        self.rows.len()
    }
}

/// What one database receives in a reading round: `K` vectors of length `M * y`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatabaseQuery {
    pub vectors: Vec<Vec<Fe>>,
}

impl DatabaseQuery {
    pub fn symbol_count(&self) -> usize {
        self.vectors.iter().map(Vec::len).sum()
    }
}

/// Client-side query state. The index is kept private; databases only ever
/// get a [`DatabaseQuery`] through [`QueryBundle::for_database`].
#[derive(Clone, Debug)]
pub struct QueryBundle {
    theta: usize,
    queries: Vec<DatabaseQuery>,
}

impl QueryBundle {
    pub fn theta(&self) -> usize {
        self.theta
    }

    pub fn for_database(&self, n: usize) -> &DatabaseQuery {
        &self.queries[n]
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }
}

/// `K` combined update symbols for one database and one subpacket.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatabaseUpdate {
    pub values: Vec<Fe>,
}

/// Updates for one subpacket. Databases in the null set get `None`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UpdateBundle {
    pub null_set: Vec<usize>,
    pub payloads: Vec<Option<DatabaseUpdate>>,
}

impl UpdateBundle {
    pub fn uploaded_symbols(&self) -> usize {
        self.payloads.iter().flatten().map(|u| u.values.len()).sum()
    }
}

/// A coded segment: field, code, public constants and submodel count, with
/// the per-`ℓ` decoding inverses precomputed.
#[derive(Clone, Debug)]
pub struct CodedSegment {
    field: PrimeField,
    spec: CodeSpec,
    consts: EvalConstants,
    m: usize,
    cauchy: Vec<Fe>,
    decoders: Vec<Matrix>,
}

impl CodedSegment {
    pub fn new(field: PrimeField, spec: CodeSpec, consts: EvalConstants, m: usize) -> Result<Self> {
        spec.validate()?;
        if consts.n() != spec.r || consts.y() != spec.y || consts.k() != spec.k {
            return Err(Error::DimensionMismatch(format!(
                "constants for N={}, y={}, K={} do not fit {spec}",
                consts.n(),
                consts.y(),
                consts.k()
            )));
        }
        if m == 0 {
            return Err(Error::DimensionMismatch("M must be positive".into()));
        }
        let needed = (spec.r + spec.y * spec.k) as u64;
        if field.modulus() <= needed {
            return Err(Error::FieldTooSmall { q: field.modulus(), needed });
        }
        let mut cauchy = Vec::with_capacity(spec.r * spec.y * spec.k);
        for n in 0..spec.r {
            for j in 0..spec.y {
                for i in 0..spec.k {
                    cauchy.push(field.inv(field.sub(consts.f(j, i), consts.alpha(n)))?);
                }
            }
        }
        let mut seg = Self { field, spec, consts, m, cauchy, decoders: Vec::new() };
        seg.decoders = (0..spec.k).map(|l| seg.decoding_matrix(l)?.inverse(&field)).collect::<Result<_>>()?;
        Ok(seg)
    }

    pub fn field(&self) -> &PrimeField {
        &self.field
    }

    pub fn spec(&self) -> &CodeSpec {
        &self.spec
    }

    pub fn consts(&self) -> &EvalConstants {
        &self.consts
    }

    pub fn submodels(&self) -> usize {
        self.m
    }

    pub fn storage_noise_len(&self) -> usize {
        self.spec.y * (self.spec.x + 1) * self.m
    }

    pub fn query_noise_len(&self) -> usize {
        self.spec.y * self.spec.k * self.m
    }

    pub fn update_noise_len(&self) -> usize {
        self.spec.k
    }

    /// Deterministic null-shaper set: the `x - y` lowest positions.
    pub fn null_set(&self) -> Vec<usize> {
        (0..self.spec.null_set_size()).collect()
    }

    fn inv_diff(&self, n: usize, j: usize, i: usize) -> Fe {
        self.cauchy[(n * self.spec.y + j) * self.spec.k + i]
    }

    /// Row `n`: `1/(f_{j,ℓ} - α_n)` for `j < y`, then `α_n^t` for `t <= K + x`.
    pub fn decoding_matrix(&self, l: usize) -> Result<Matrix> {
        let f = &self.field;
        let rows = (0..self.spec.r)
            .map(|n| {
                let a = self.consts.alpha(n);
                let mut row = Vec::with_capacity(self.spec.r);
                for j in 0..self.spec.y {
                    row.push(f.inv(f.sub(self.consts.f(j, l), a))?);
                }
                let mut pw = Fe::ONE;
                for _ in 0..=self.spec.k + self.spec.x {
                    row.push(pw);
                    pw = f.mul(pw, a);
                }
                Ok(row)
            })
            .collect::<Result<Vec<_>>>()?;
        Matrix::from_rows(rows)
    }

    pub fn random_noise<R: Rng + ?Sized>(&self, len: usize, rng: &mut R) -> Vec<Fe> {
        (0..len).map(|_| self.field.random(rng)).collect()
    }

    pub fn encode_subpacket<R: Rng + ?Sized>(&self, plain: &PlainSubpacket, rng: &mut R) -> Result<Vec<Vec<Fe>>> {
        let noise = self.random_noise(self.storage_noise_len(), rng);
        self.encode_subpacket_with_noise(plain, &noise)
    }

    /// One column per database position, with the given storage noise.
    pub fn encode_subpacket_with_noise(&self, plain: &PlainSubpacket, noise: &[Fe]) -> Result<Vec<Vec<Fe>>> {
        let (m, y, k) = plain.dims();
        if (m, y, k) != (self.m, self.spec.y, self.spec.k) {
            return Err(Error::DimensionMismatch(format!(
                "subpacket is {m}x{y}x{k}, segment expects {}x{}x{}",
                self.m, self.spec.y, self.spec.k
            )));
        }
        check_len("storage noise", noise.len(), self.storage_noise_len())?;
        let f = &self.field;
        let x = self.spec.x;
        Ok((0..self.spec.r)
            .map(|n| {
                let a = self.consts.alpha(n);
                let powers = powers(f, a, x + 1);
                let mut col = vec![Fe::ZERO; m * y];
                for j in 0..y {
                    for mm in 0..m {
                        let mut v = Fe::ZERO;
                        for i in 0..k {
                            v = f.add(v, f.mul(plain.get(mm, j, i), self.inv_diff(n, j, i)));
                        }
                        for (t, pw) in powers.iter().enumerate() {
                            let z = noise[(j * (x + 1) + t) * m + mm];
                            v = f.add(v, f.mul(*pw, z));
                        }
                        col[j * m + mm] = v;
                    }
                }
                col
            })
            .collect())
    }

    pub fn build_queries<R: Rng + ?Sized>(&self, theta: usize, rng: &mut R) -> Result<QueryBundle> {
        let noise = self.random_noise(self.query_noise_len(), rng);
        self.build_queries_with_noise(theta, &noise)
    }

    pub fn build_queries_with_noise(&self, theta: usize, noise: &[Fe]) -> Result<QueryBundle> {
        if theta >= self.m {
            return Err(Error::BadIndex { index: theta, bound: self.m });
        }
        check_len("query noise", noise.len(), self.query_noise_len())?;
        let f = &self.field;
        let (y, k, m) = (self.spec.y, self.spec.k, self.m);
        let mut queries = Vec::with_capacity(self.spec.r);
        for n in 0..self.spec.r {
            let a = self.consts.alpha(n);
            let mut vectors = Vec::with_capacity(k);
            for l in 0..k {
                let mut q = vec![Fe::ZERO; m * y];
                for j in 0..y {
                    let fl = self.consts.f(j, l);
                    let others = (0..k).filter(|&i| i != l);
                    let num = f.product(others.clone().map(|i| f.sub(self.consts.f(j, i), a)));
                    let den = f.product(others.map(|i| f.sub(self.consts.f(j, i), fl)));
                    let coef = f.div(num, den)?;
                    let mask = f.product((0..k).map(|i| f.sub(self.consts.f(j, i), a)));
                    for mm in 0..m {
                        let z = noise[(j * k + l) * m + mm];
                        let mut v = f.mul(mask, z);
                        if mm == theta {
                            v = f.add(v, coef);
                        }
                        q[j * m + mm] = v;
                    }
                }
                vectors.push(q);
            }
            queries.push(DatabaseQuery { vectors });
        }
        Ok(QueryBundle { theta, queries })
    }

    /// `K` answers for subpacket `sp` of the shard: `A_ℓ = S^T Q_ℓ`.
    pub fn answer_query(&self, shard: &ShardState, sp: usize, query: &DatabaseQuery) -> Result<Vec<Fe>> {
        if sp >= shard.subpackets() {
            return Err(Error::BadIndex { index: sp, bound: shard.subpackets() });
        }
        if query.vectors.len() != self.spec.k {
            return Err(Error::DimensionMismatch(format!(
                "{} query vectors, expected K = {}",
                query.vectors.len(),
                self.spec.k
            )));
        }
        let col = shard.column(sp);
        query
            .vectors
            .iter()
            .map(|q| {
                check_len("query vector", q.len(), col.len())?;
                Ok(self.field.dot(col, q))
            })
            .collect()
    }

    /// Recovers the `y * K` symbols of the requested submodel in one subpacket
    /// from the `R` answer vectors, indexed by position.
    pub fn decode_read(&self, answers: &[Vec<Fe>]) -> Result<Vec<Fe>> {
        check_len("answer set", answers.len(), self.spec.r)?;
        let (y, k) = (self.spec.y, self.spec.k);
        let mut out = vec![Fe::ZERO; y * k];
        for l in 0..k {
            let b = answers
                .iter()
                .map(|a| {
                    check_len("answer", a.len(), k)?;
                    Ok(a[l])
                })
                .collect::<Result<Vec<_>>>()?;
            let sol = self.decoders[l].mul_vec(&self.field, &b);
            for j in 0..y {
                out[j * k + l] = sol[j];
            }
        }
        Ok(out)
    }

    fn check_null_set(&self, null_set: &[usize]) -> Result<()> {
        let expected = self.spec.null_set_size();
        if null_set.len() != expected {
            return Err(Error::BadNullSet { expected, got: null_set.len() });
        }
        for (idx, &n) in null_set.iter().enumerate() {
            if n >= self.spec.r {
                return Err(Error::BadIndex { index: n, bound: self.spec.r });
            }
            if null_set[..idx].contains(&n) {
                return Err(Error::BadNullSet { expected, got: null_set.len() - 1 });
            }
        }
        Ok(())
    }

    pub fn build_updates<R: Rng + ?Sized>(
        &self,
        delta: &[Fe],
        null_set: &[usize],
        rng: &mut R,
    ) -> Result<UpdateBundle> {
        let noise = self.random_noise(self.update_noise_len(), rng);
        self.build_updates_with_noise(delta, null_set, &noise)
    }

    /// Combined update symbols `U_{n,ℓ}` for every position outside the null set.
    pub fn build_updates_with_noise(&self, delta: &[Fe], null_set: &[usize], noise: &[Fe]) -> Result<UpdateBundle> {
        self.check_null_set(null_set)?;
        let (y, k) = (self.spec.y, self.spec.k);
        check_len("delta", delta.len(), y * k)?;
        check_len("update noise", noise.len(), k)?;
        let f = &self.field;
        let c = &self.consts;
        // scaled deltas, [j][ℓ]
        let mut scaled = vec![Fe::ZERO; y * k];
        for j in 0..y {
            for l in 0..k {
                let fl = c.f(j, l);
                let num = f.product((0..k).filter(|&i| i != l).map(|i| f.sub(c.f(j, i), fl)));
                let den = f.product((0..y).filter(|&i| i != j).map(|i| f.sub(c.f(i, l), fl)));
                scaled[j * k + l] = f.mul(f.div(num, den)?, delta[j * k + l]);
            }
        }
        let payloads = (0..self.spec.r)
            .map(|n| {
                if null_set.contains(&n) {
                    return None;
                }
                let a = c.alpha(n);
                let values = (0..k)
                    .map(|l| {
                        let diffs: Vec<Fe> = (0..y).map(|i| f.sub(c.f(i, l), a)).collect();
                        let mut u = f.mul(f.product(diffs.iter().copied()), noise[l]);
                        for j in 0..y {
                            let lead = f.product(diffs.iter().enumerate().filter(|(i, _)| *i != j).map(|(_, d)| *d));
                            u = f.add(u, f.mul(lead, scaled[j * k + l]));
                        }
                        u
                    })
                    .collect();
                Some(DatabaseUpdate { values })
            })
            .collect();
        Ok(UpdateBundle { null_set: null_set.to_vec(), payloads })
    }

    /// The incremental update `Σ_ℓ Ω_j U_ℓ D~_j Q_ℓ[j]` for position `n`, using
    /// only public constants, the database's query and its update symbols.
    pub fn incremental_update(
        &self,
        n: usize,
        query: &DatabaseQuery,
        update: &DatabaseUpdate,
        null_set: &[usize],
    ) -> Result<Vec<Fe>> {
        self.check_null_set(null_set)?;
        let (y, k, m) = (self.spec.y, self.spec.k, self.m);
        if n >= self.spec.r {
            return Err(Error::BadIndex { index: n, bound: self.spec.r });
        }
        check_len("update", update.values.len(), k)?;
        check_len("query", query.vectors.len(), k)?;
        let f = &self.field;
        let c = &self.consts;
        let a = c.alpha(n);
        let mut out = vec![Fe::ZERO; m * y];
        for l in 0..k {
            let q = &query.vectors[l];
            check_len("query vector", q.len(), m * y)?;
            for j in 0..y {
                let fl = c.f(j, l);
                let num = f.product(null_set.iter().map(|&r| f.sub(c.alpha(r), a)));
                let den = f.product(null_set.iter().map(|&r| f.sub(c.alpha(r), fl)));
                let shaper = f.div(num, den)?;
                let scale = f.inv(f.product((0..k).map(|i| f.sub(c.f(j, i), a))))?;
                let coef = f.mul(f.mul(shaper, update.values[l]), scale);
                for mm in 0..m {
                    let idx = j * m + mm;
                    out[idx] = f.add(out[idx], f.mul(coef, q[idx]));
                }
            }
        }
        Ok(out)
    }

    /// Adds the incremental update to subpacket `sp` of the shard.
    pub fn apply_update(
        &self,
        shard: &mut ShardState,
        sp: usize,
        n: usize,
        query: &DatabaseQuery,
        update: &DatabaseUpdate,
        null_set: &[usize],
    ) -> Result<()> {
        if null_set.contains(&n) {
            return Err(Error::Invariant(format!("position {n} is in the null set and receives no update")));
        }
        if sp >= shard.subpackets() {
            return Err(Error::BadIndex { index: sp, bound: shard.subpackets() });
        }
        let inc = self.incremental_update(n, query, update, null_set)?;
        check_len("shard column", shard.column_len(), inc.len())?;
        let f = self.field;
        for (s, d) in shard.column_mut(sp).iter_mut().zip(inc) {
            *s = f.add(*s, d);
        }
        Ok(())
    }
}

fn powers(f: &PrimeField, a: Fe, count: usize) -> Vec<Fe> {
    let mut out = Vec::with_capacity(count);
    let mut pw = Fe::ONE;
    for _ in 0..count {
        out.push(pw);
        pw = f.mul(pw, a);
    }
    out
}

fn check_len(what: &str, got: usize, expected: usize) -> Result<()> {
    if got != expected {
        return Err(Error::DimensionMismatch(format!("{what} has length {got}, expected {expected}")));
    }
    Ok(())
}
