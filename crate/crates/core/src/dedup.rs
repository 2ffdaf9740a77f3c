// SPDX-License-Identifier: Apache-2.0

//! Near-duplicate detection with MinHash signatures and LSH banding, plus the
//! temporal policy that keeps only the oldest member of each duplicate group.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::ShuttleId;

pub const DEFAULT_SHINGLE_WORDS: usize = 5;
pub const DEFAULT_NUM_PERMS: usize = 128;
pub const DEFAULT_THRESHOLD: f64 = 0.70;
pub const MIN_NUM_PERMS: usize = 16;

#[derive(Debug, Error, PartialEq)]
pub enum DedupError {
    #[error("design `{0}` has no shingles")]
    EmptyDesign(String),
    #[error("num_perms must be at least {MIN_NUM_PERMS}, got {0}")]
    TooFewPerms(usize),
    #[error("signatures disagree on parameters ({0} vs {1})")]
    ParamMismatch(String, String),
    #[error("threshold must lie strictly between 0 and 1, got {0}")]
    BadThreshold(f64),
    #[error("band layout {bands}x{rows} does not fit {num_perms} permutations")]
    BadBands {
        bands: usize,
        rows: usize,
        num_perms: usize,
    },
}

/// Hashed word k-grams of one design.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShingleSet {
    pub design_id: String,
    pub hashes: BTreeSet<u64>,
}

/// FNV-1a followed by the splitmix64 finalizer. Stable across platforms.
pub fn hash_bytes(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    mix64(h)
}

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Whitespace-tokenizes `source` and hashes every window of `k` words.
/// Texts shorter than `k` words yield a single shingle over all of them.
pub fn shingle(design_id: &str, source: &str, k: usize) -> ShingleSet {
    assert!(k >= 1, "shingle size must be positive");
    let words: Vec<&str> = source.split_whitespace().collect();
    let mut hashes = BTreeSet::new();
    if words.is_empty() {
        // empty design: no shingles
    } else if words.len() < k {
        hashes.insert(hash_bytes(words.join(" ").as_bytes()));
    } else {
        for w in words.windows(k) {
            hashes.insert(hash_bytes(w.join(" ").as_bytes()));
        }
    }
    ShingleSet {
        design_id: design_id.to_string(),
        hashes,
    }
}

pub fn exact_jaccard(a: &ShingleSet, b: &ShingleSet) -> f64 {
    let inter = a.hashes.intersection(&b.hashes).count();
    let union = a.hashes.len() + b.hashes.len() - inter;
    if union == 0 {
        return 1.0;
    }
    inter as f64 / union as f64
}

/// Multiply-add-shift hash family: `((a * x + b) mod 2^128) >> 64` with odd `a`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PermutationFamily {
    seed: u64,
    params: Vec<(u128, u128)>,
}

impl PermutationFamily {
    pub fn new(num_perms: usize, seed: u64) -> Result<Self, DedupError> {
        if num_perms < MIN_NUM_PERMS {
            return Err(DedupError::TooFewPerms(num_perms));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = (0..num_perms)
            .map(|_| (rng.gen::<u128>() | 1, rng.gen::<u128>()))
            .collect();
        Ok(Self { seed, params })
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    #[inline]
    fn apply(&self, i: usize, x: u64) -> u64 {
        let (a, b) = self.params[i];
        (a.wrapping_mul(u128::from(x)).wrapping_add(b) >> 64) as u64
    }

    pub fn signature(&self, s: &ShingleSet) -> Result<MinHashSignature, DedupError> {
        if s.hashes.is_empty() {
            return Err(DedupError::EmptyDesign(s.design_id.clone()));
        }
        let mut values = vec![u64::MAX; self.params.len()];
        for &x in &s.hashes {
            for (i, v) in values.iter_mut().enumerate() {
                let h = self.apply(i, x);
                if h < *v {
                    *v = h;
                }
            }
        }
        Ok(MinHashSignature {
            design_id: s.design_id.clone(),
            values,
            seed: self.seed,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinHashSignature {
    pub design_id: String,
    pub values: Vec<u64>,
    pub seed: u64,
}

impl MinHashSignature {
    pub fn num_perms(&self) -> usize {
        self.values.len()
    }
}

pub fn minhash(s: &ShingleSet, num_perms: usize, seed: u64) -> Result<MinHashSignature, DedupError> {
    PermutationFamily::new(num_perms, seed)?.signature(s)
}

pub fn estimate_jaccard(a: &MinHashSignature, b: &MinHashSignature) -> Result<f64, DedupError> {
    if a.seed != b.seed || a.values.len() != b.values.len() {
        return Err(DedupError::ParamMismatch(
            format!("perms={} seed={}", a.values.len(), a.seed),
            format!("perms={} seed={}", b.values.len(), b.seed),
        ));
    }
    let agree = a.values.iter().zip(&b.values).filter(|(x, y)| x == y).count();
    Ok(agree as f64 / a.values.len() as f64)
}

/// Probability that a pair with similarity `s` shares at least one band.
pub fn collision_probability(s: f64, bands: usize, rows: usize) -> f64 {
    1.0 - (1.0 - s.powi(rows as i32)).powi(bands as i32)
}

fn simpson<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, intervals: usize) -> f64 {
    let n = intervals + intervals % 2;
    let h = (hi - lo) / n as f64;
    let mut acc = f(lo) + f(hi);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(lo + i as f64 * h);
    }
    acc * h / 3.0
}

/// Band layout minimizing the false-positive area below `threshold` plus the
/// false-negative area above it, over all `bands * rows <= num_perms`.
pub fn choose_bands(num_perms: usize, threshold: f64) -> Result<(usize, usize), DedupError> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(DedupError::BadThreshold(threshold));
    }
    let mut best: Option<(f64, usize, usize)> = None;
    for bands in 1..=num_perms {
        for rows in 1..=num_perms / bands {
            let fp = simpson(|s| collision_probability(s, bands, rows), 0.0, threshold, 512);
            let fn_ = simpson(|s| 1.0 - collision_probability(s, bands, rows), threshold, 1.0, 512);
            let err = fp + fn_;
            if best.map_or(true, |(e, _, _)| err < e) {
                best = Some((err, bands, rows));
            }
        }
    }
    let (_, b, r) = best.expect("num_perms >= 1");
    Ok((b, r))
}

/// Banded bucket index over MinHash signatures.
#[derive(Debug, Clone)]
pub struct LshIndex {
    bands: usize,
    rows: usize,
    num_perms: usize,
    seed: u64,
    buckets: HashMap<(usize, u64), BTreeSet<String>>,
}

impl LshIndex {
    pub fn new(bands: usize, rows: usize, num_perms: usize, seed: u64) -> Result<Self, DedupError> {
        if bands == 0 || rows == 0 || bands * rows > num_perms {
            return Err(DedupError::BadBands {
                bands,
                rows,
                num_perms,
            });
        }
        Ok(Self {
            bands,
            rows,
            num_perms,
            seed,
            buckets: HashMap::new(),
        })
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    fn band_hash(&self, sig: &MinHashSignature, band: usize) -> u64 {
        let mut bytes = Vec::with_capacity(self.rows * 8);
        for v in &sig.values[band * self.rows..(band + 1) * self.rows] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        hash_bytes(&bytes)
    }

    pub fn insert(&mut self, sig: &MinHashSignature) -> Result<(), DedupError> {
        if sig.values.len() != self.num_perms || sig.seed != self.seed {
            return Err(DedupError::ParamMismatch(
                format!("perms={} seed={}", self.num_perms, self.seed),
                format!("perms={} seed={}", sig.values.len(), sig.seed),
            ));
        }
        for band in 0..self.bands {
            let h = self.band_hash(sig, band);
            self.buckets.entry((band, h)).or_default().insert(sig.design_id.clone());
        }
        Ok(())
    }

    /// Every unordered pair sharing at least one bucket, as `(smaller, larger)`.
    pub fn candidate_pairs(&self) -> BTreeSet<(String, String)> {
        let mut out = BTreeSet::new();
        for members in self.buckets.values() {
            let members: Vec<&String> = members.iter().collect();
            for i in 0..members.len() {
                for j in i + 1..members.len() {
                    out.insert((members[i].clone(), members[j].clone()));
                }
            }
        }
        out
    }
}

/// Builds an index over `signatures` and returns its candidate pairs.
pub fn candidate_pairs(
    bands: usize,
    rows: usize,
    signatures: &[MinHashSignature],
) -> Result<BTreeSet<(String, String)>, DedupError> {
    let Some(first) = signatures.first() else {
        return Ok(BTreeSet::new());
    };
    let mut index = LshIndex::new(bands, rows, first.num_perms(), first.seed)?;
    for sig in signatures {
        index.insert(sig)?;
    }
    Ok(index.candidate_pairs())
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// A connected group of verified duplicates and the member that survives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DuplicateGroup {
    pub survivor: String,
    /// All members including the survivor, sorted by id.
    pub members: Vec<String>,
}

fn survivor_key<'a>(id: &'a str, shuttle: &ShuttleId) -> (u32, &'a str) {
    (shuttle.ordinal, id)
}

/// Connected components of the duplicate relation with at least two members.
/// Pairs naming unknown designs are ignored.
pub fn duplicate_groups(
    designs: &[(String, ShuttleId)],
    duplicate_pairs: &BTreeSet<(String, String)>,
) -> Vec<DuplicateGroup> {
    let mut sorted: Vec<&(String, ShuttleId)> = designs.iter().collect();
    sorted.sort_by(|a, b| a.0.cmp(&b.0));
    sorted.dedup_by(|a, b| a.0 == b.0);
    let pos: HashMap<&str, usize> = sorted.iter().enumerate().map(|(i, d)| (d.0.as_str(), i)).collect();
    let mut uf = UnionFind::new(sorted.len());
    for (a, b) in duplicate_pairs {
        if let (Some(&i), Some(&j)) = (pos.get(a.as_str()), pos.get(b.as_str())) {
            uf.union(i, j);
        }
    }
    let mut comps: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..sorted.len() {
        let r = uf.find(i);
        comps.entry(r).or_default().push(i);
    }
    comps
        .into_values()
        .filter(|m| m.len() > 1)
        .map(|m| {
            let survivor = m
                .iter()
                .min_by(|&&x, &&y| {
                    survivor_key(&sorted[x].0, &sorted[x].1).cmp(&survivor_key(&sorted[y].0, &sorted[y].1))
                })
                .map(|&i| sorted[i].0.clone())
                .expect("non-empty component");
            DuplicateGroup {
                survivor,
                members: m.iter().map(|&i| sorted[i].0.clone()).collect(),
            }
        })
        .collect()
}

/// Keeps one design per duplicate component (lowest shuttle ordinal, then
/// smallest id) and every design that has no duplicate.
pub fn temporal_dedup(
    designs: &[(String, ShuttleId)],
    duplicate_pairs: &BTreeSet<(String, String)>,
) -> BTreeSet<String> {
    let mut retained: BTreeSet<String> = designs.iter().map(|(id, _)| id.clone()).collect();
    for group in duplicate_groups(designs, duplicate_pairs) {
        for m in group.members {
            if m != group.survivor {
                retained.remove(&m);
            }
        }
    }
    retained
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DedupConfig {
    pub shingle_words: usize,
    pub num_perms: usize,
    pub threshold: f64,
    pub seed: u64,
}

impl Default for DedupConfig {
    fn default() -> Self {
        Self {
            shingle_words: DEFAULT_SHINGLE_WORDS,
            num_perms: DEFAULT_NUM_PERMS,
            threshold: DEFAULT_THRESHOLD,
            seed: 0,
        }
    }
}

/// A design (or module) text entering deduplication.
#[derive(Debug, Clone)]
pub struct DedupItem {
    pub id: String,
    pub shuttle: ShuttleId,
    /// Items sharing a non-empty group never count as duplicates of each other.
    pub group: Option<String>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberReport {
    pub id: String,
    pub shuttle: String,
    pub jaccard_to_survivor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentReport {
    pub survivor: String,
    pub survivor_shuttle: String,
    pub members: Vec<MemberReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DedupOutcome {
    pub bands: usize,
    pub rows: usize,
    pub candidates: usize,
    pub verified_pairs: BTreeSet<(String, String)>,
    pub retained: BTreeSet<String>,
    pub components: Vec<ComponentReport>,
    /// Items with no shingles; they are retained and never paired.
    pub empty: Vec<String>,
}

/// Shingle, sign, band, verify candidates by exact Jaccard, and apply the
/// temporal policy.
pub fn deduplicate(items: &[DedupItem], cfg: &DedupConfig) -> Result<DedupOutcome, DedupError> {
    if !(cfg.threshold > 0.0 && cfg.threshold < 1.0) {
        return Err(DedupError::BadThreshold(cfg.threshold));
    }
    let family = PermutationFamily::new(cfg.num_perms, cfg.seed)?;
    let (bands, rows) = choose_bands(cfg.num_perms, cfg.threshold)?;
    let shingles: BTreeMap<&str, ShingleSet> = items
        .iter()
        .map(|it| (it.id.as_str(), shingle(&it.id, &it.text, cfg.shingle_words)))
        .collect();
    let mut index = LshIndex::new(bands, rows, cfg.num_perms, cfg.seed)?;
    let mut empty = Vec::new();
    for (id, set) in &shingles {
        if set.hashes.is_empty() {
            empty.push(id.to_string());
            continue;
        }
        index.insert(&family.signature(set)?)?;
    }
    let groups: HashMap<&str, Option<&str>> =
        items.iter().map(|it| (it.id.as_str(), it.group.as_deref())).collect();
    let candidates = index.candidate_pairs();
    let verified_pairs: BTreeSet<(String, String)> = candidates
        .iter()
        .filter(|(a, b)| match (groups[a.as_str()], groups[b.as_str()]) {
            (Some(ga), Some(gb)) => ga != gb,
            _ => true,
        })
        .filter(|(a, b)| exact_jaccard(&shingles[a.as_str()], &shingles[b.as_str()]) >= cfg.threshold)
        .cloned()
        .collect();
    let designs: Vec<(String, ShuttleId)> = items.iter().map(|it| (it.id.clone(), it.shuttle.clone())).collect();
    let shuttle_of: HashMap<&str, &ShuttleId> = items.iter().map(|it| (it.id.as_str(), &it.shuttle)).collect();
    let retained = temporal_dedup(&designs, &verified_pairs);
    let components = duplicate_groups(&designs, &verified_pairs)
        .into_iter()
        .map(|g| {
            let surv = &shingles[g.survivor.as_str()];
            ComponentReport {
                survivor_shuttle: shuttle_of[g.survivor.as_str()].name.clone(),
                members: g
                    .members
                    .iter()
                    .map(|m| MemberReport {
                        id: m.clone(),
                        shuttle: shuttle_of[m.as_str()].name.clone(),
                        jaccard_to_survivor: exact_jaccard(surv, &shingles[m.as_str()]),
                    })
                    .collect(),
                survivor: g.survivor,
            }
        })
        .collect();
    Ok(DedupOutcome {
        bands,
        rows,
        candidates: candidates.len(),
        verified_pairs,
        retained,
        components,
        empty,
    })
}
