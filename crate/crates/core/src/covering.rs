//! t-way covering arrays over mixed-level discrete domains.
//!
//! Generation is AETG-style greedy: rows are added one at a time, each the
//! best of a batch of randomized candidates. A candidate orders the
//! parameters by how many uncovered combinations they still take part in,
//! then fixes them one by one at the level that completes the most uncovered
//! combinations with the parameters already fixed.
//!
//! Coverage is tracked in a dense bitset indexed by (t-subset rank,
//! mixed-radix assignment rank).

use std::fmt;
use std::io::{Read, Write};

use fixedbitset::FixedBitSet;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::par::Execution;

const MAX_ROWS: usize = 1_000_000;
const MAX_COMBINATIONS: u128 = 1 << 31;

#[derive(Debug, Error)]
pub enum CoveringError {
    #[error("strength {t} out of range for {k} parameters")]
    Strength { t: usize, k: usize },
    #[error("parameter p{index} has domain size {size}; at least 2 levels required")]
    Domain { index: usize, size: usize },
    #[error("{0} t-way combinations is too many to track")]
    TooLarge(u128),
    #[error("row cap of {MAX_ROWS} reached with {0} combinations uncovered")]
    RowCap(usize),
    #[error("row {row} has {len} entries, expected {k}")]
    RowWidth { row: usize, len: usize, k: usize },
    #[error("row {row}: level {level} of p{param} outside domain of size {size}")]
    Level { row: usize, param: usize, level: usize, size: usize },
    #[error("covering array csv: {0}")]
    Format(String),
    #[error("covering array csv: {0}")]
    Csv(#[from] csv::Error),
}

/// A list of test rows with guaranteed t-way coverage.
#[derive(Debug, Clone, PartialEq)]
pub struct CoveringArray {
    strength: usize,
    domains: Vec<usize>,
    rows: Vec<Vec<usize>>,
}

impl CoveringArray {
    /// Wraps existing rows; coverage is not checked here (see [`verify_coverage`]).
    pub fn new(strength: usize, domains: Vec<usize>, rows: Vec<Vec<usize>>) -> Result<Self, CoveringError> {
        let k = domains.len();
        if strength == 0 || strength > k {
            return Err(CoveringError::Strength { t: strength, k });
        }
        for (r, row) in rows.iter().enumerate() {
            if row.len() != k {
                return Err(CoveringError::RowWidth { row: r, len: row.len(), k });
            }
            for (p, (&l, &v)) in row.iter().zip(&domains).enumerate() {
                if l >= v {
                    return Err(CoveringError::Level { row: r, param: p, level: l, size: v });
                }
            }
        }
        Ok(Self { strength, domains, rows })
    }

    pub fn strength(&self) -> usize {
        self.strength
    }

    pub fn domains(&self) -> &[usize] {
        &self.domains
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// CSV with header `p1,...,pk` and 0-based level indices.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), CoveringError> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record((1..=self.domains.len()).map(|i| format!("p{i}")))?;
        for row in &self.rows {
            wr.write_record(row.iter().map(ToString::to_string))?;
        }
        wr.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Reads rows from CSV. Domain sizes default to `max level + 1` per
    /// column unless given explicitly.
    pub fn read_csv<R: Read>(r: R, strength: usize, domains: Option<Vec<usize>>) -> Result<Self, CoveringError> {
        let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let k = rd.headers()?.len();
        let mut rows = Vec::new();
        for (i, rec) in rd.records().enumerate() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|f| f.parse::<usize>().map_err(|_| CoveringError::Format(format!("row {}: bad level '{f}'", i + 1))))
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(row);
        }
        let domains = match domains {
            Some(d) => d,
            None => (0..k)
                .map(|p| rows.iter().filter_map(|r: &Vec<usize>| r.get(p)).max().map_or(1, |m| m + 1))
                .collect(),
        };
        Self::new(strength, domains, rows)
    }
}

/// A t-way combination not present in any row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MissingCombination {
    pub params: Vec<usize>,
    pub levels: Vec<usize>,
}

impl fmt::Display for MissingCombination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> =
            self.params.iter().zip(&self.levels).map(|(p, l)| format!("p{}={l}", p + 1)).collect();
        write!(f, "{}", parts.join(","))
    }
}

fn check_strength(t: usize, k: usize) -> Result<(), CoveringError> {
    if t == 0 || t > k {
        Err(CoveringError::Strength { t, k })
    } else {
        Ok(())
    }
}

/// Number of distinct t-way combinations: the sum over all t-subsets of
/// parameters of the product of their domain sizes.
pub fn count_t_way_combinations(t: usize, domains: &[usize]) -> Result<u128, CoveringError> {
    check_strength(t, domains.len())?;
    // elementary symmetric polynomial e_t(v_1..v_k)
    let mut e = vec![0u128; t + 1];
    e[0] = 1;
    for &v in domains {
        for j in (1..=t).rev() {
            e[j] = e[j - 1]
                .checked_mul(v as u128)
                .and_then(|x| x.checked_add(e[j]))
                .ok_or(CoveringError::TooLarge(u128::MAX))?;
        }
    }
    Ok(e[t])
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Every t-subset of `0..k` in lexicographic order.
fn subsets(k: usize, t: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..t).collect();
    loop {
        out.push(cur.clone());
        let mut i = t;
        while i > 0 && cur[i - 1] == k - t + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        cur[i - 1] += 1;
        for j in i..t {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

/// Bitset over all (t-subset, assignment) pairs.
///
/// Subset blocks are laid out in lexicographic order; `position` maps a
/// subset's colex rank to its block so lookups need no hashing.
struct CoverageMap {
    t: usize,
    domains: Vec<usize>,
    subsets: Vec<Vec<usize>>,
    /// start of each subset's block, in lexicographic order (increasing)
    offsets: Vec<usize>,
    /// colex rank -> lexicographic position
    position: Vec<usize>,
    bits: FixedBitSet,
    uncovered: usize,
}

impl CoverageMap {
    fn new(t: usize, domains: &[usize]) -> Result<Self, CoveringError> {
        let total = count_t_way_combinations(t, domains)?;
        if total > MAX_COMBINATIONS {
            return Err(CoveringError::TooLarge(total));
        }
        let subsets = subsets(domains.len(), t);
        let mut offsets = Vec::with_capacity(subsets.len());
        let mut position = vec![0; subsets.len()];
        let mut acc = 0;
        for (pos, s) in subsets.iter().enumerate() {
            position[colex_rank(s)] = pos;
            offsets.push(acc);
            acc += s.iter().map(|&p| domains[p]).product::<usize>();
        }
        Ok(Self {
            t,
            domains: domains.to_vec(),
            subsets,
            offsets,
            position,
            bits: FixedBitSet::with_capacity(acc),
            uncovered: acc,
        })
    }

    /// Bit index of the combination of `subset` with levels taken from `row`.
    fn index(&self, subset: &[usize], row: &[usize]) -> usize {
        let mut r = 0;
        for &p in subset {
            r = r * self.domains[p] + row[p];
        }
        self.offsets[self.position[colex_rank(subset)]] + r
    }

    fn is_covered(&self, subset: &[usize], row: &[usize]) -> bool {
        self.bits.contains(self.index(subset, row))
    }

    /// Marks all combinations of `row`; returns how many were new.
    fn cover_row(&mut self, row: &[usize]) -> usize {
        let mut fresh = 0;
        for s in 0..self.subsets.len() {
            let idx = self.index(&self.subsets[s], row);
            if !self.bits.put(idx) {
                fresh += 1;
            }
        }
        self.uncovered -= fresh;
        fresh
    }

    fn count_new(&self, row: &[usize]) -> usize {
        self.subsets.iter().filter(|s| !self.is_covered(s, row)).count()
    }

    /// Decodes a bit index back into (subset, levels).
    fn decode(&self, idx: usize) -> MissingCombination {
        let pos = match self.offsets.binary_search(&idx) {
            Ok(p) => p,
            Err(p) => p - 1,
        };
        let params = self.subsets[pos].clone();
        let mut r = idx - self.offsets[pos];
        let mut levels = vec![0; params.len()];
        for (slot, &p) in params.iter().enumerate().rev() {
            levels[slot] = r % self.domains[p];
            r /= self.domains[p];
        }
        MissingCombination { params, levels }
    }

    fn missing(&self) -> Vec<MissingCombination> {
        self.bits.zeroes().map(|i| self.decode(i)).collect()
    }

    /// Per-(parameter, level) count of uncovered combinations.
    fn uncovered_by_level(&self) -> Vec<Vec<usize>> {
        let mut cnt: Vec<Vec<usize>> = self.domains.iter().map(|&v| vec![0; v]).collect();
        for i in self.bits.zeroes() {
            let m = self.decode(i);
            for (p, l) in m.params.iter().zip(&m.levels) {
                cnt[*p][*l] += 1;
            }
        }
        cnt
    }
}

/// Colex rank of a sorted subset: sum of C(c_i, i + 1).
fn colex_rank(s: &[usize]) -> usize {
    s.iter().enumerate().map(|(i, &c)| binomial(c, i + 1)).sum()
}

/// Checks every t-way combination; returns the uncovered ones.
pub fn verify_coverage(ca: &CoveringArray) -> Result<(), Vec<MissingCombination>> {
    let mut map = match CoverageMap::new(ca.strength, &ca.domains) {
        Ok(m) => m,
        Err(_) => return Err(Vec::new()),
    };
    for row in &ca.rows {
        map.cover_row(row);
    }
    if map.uncovered == 0 {
        Ok(())
    } else {
        Err(map.missing())
    }
}

/// Tuning knobs for [`generate_with`].
#[derive(Debug, Clone, Copy)]
pub struct GenerateOptions {
    /// Randomized candidates scored per accepted row.
    pub candidates: usize,
    pub execution: Execution,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        Self { candidates: 50, execution: Execution::Parallel }
    }
}

/// Generates a strength-`t` covering array with default options.
pub fn generate(t: usize, domains: &[usize], seed: u64) -> Result<CoveringArray, CoveringError> {
    generate_with(t, domains, seed, GenerateOptions::default())
}

pub fn generate_with(
    t: usize,
    domains: &[usize],
    seed: u64,
    opts: GenerateOptions,
) -> Result<CoveringArray, CoveringError> {
    let k = domains.len();
    check_strength(t, k)?;
    if let Some((index, &size)) = domains.iter().enumerate().find(|(_, &v)| v < 2) {
        return Err(CoveringError::Domain { index: index + 1, size });
    }
    if t == k {
        return CoveringArray::new(t, domains.to_vec(), cartesian(domains));
    }
    let mut map = CoverageMap::new(t, domains)?;
    let mut rows = Vec::new();
    while map.uncovered > 0 {
        if rows.len() >= MAX_ROWS {
            return Err(CoveringError::RowCap(map.uncovered));
        }
        let by_level = map.uncovered_by_level();
        let by_param: Vec<usize> = by_level.iter().map(|l| l.iter().sum()).collect();
        let row_index = rows.len() as u64;
        let scored = opts.execution.map_indexed(opts.candidates.max(1), |c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream((row_index << 20) | c as u64);
            let row = candidate(&map, &by_level, &by_param, &mut rng);
            let score = map.count_new(&row);
            (score, row)
        });
        let (mut score, mut best) = (0, None);
        for (s, row) in scored {
            if best.is_none() || s > score {
                score = s;
                best = Some(row);
            }
        }
        let mut row = best.expect("at least one candidate");
        if score == 0 {
            // complete the first uncovered combination directly
            let miss = map.decode(map.bits.zeroes().next().expect("uncovered > 0"));
            for (p, l) in miss.params.iter().zip(&miss.levels) {
                row[*p] = *l;
            }
        }
        map.cover_row(&row);
        rows.push(row);
    }
    CoveringArray::new(t, domains.to_vec(), rows)
}

fn candidate(map: &CoverageMap, by_level: &[Vec<usize>], by_param: &[usize], rng: &mut ChaCha8Rng) -> Vec<usize> {
    let k = map.domains.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.shuffle(rng);
    order.sort_by(|a, b| by_param[*b].cmp(&by_param[*a]));

    let mut row = vec![usize::MAX; k];
    let mut fixed: Vec<usize> = Vec::with_capacity(k);
    for (n, &p) in order.iter().enumerate() {
        let gains: Vec<usize> = if n == 0 {
            by_level[p].clone()
        } else {
            (0..map.domains[p]).map(|l| gain(map, &mut row, &fixed, p, l)).collect()
        };
        let top = *gains.iter().max().expect("non-empty domain");
        let ties: Vec<usize> = (0..gains.len()).filter(|&l| gains[l] == top).collect();
        row[p] = ties[rng.random_range(0..ties.len())];
        fixed.push(p);
    }
    row
}

/// Uncovered combinations completed by setting `p = level` given the
/// parameters in `fixed`.
fn gain(map: &CoverageMap, row: &mut [usize], fixed: &[usize], p: usize, level: usize) -> usize {
    let need = map.t - 1;
    if fixed.len() < need {
        return 0;
    }
    row[p] = level;
    let mut count = 0;
    let mut pick: Vec<usize> = (0..need).collect();
    let mut subset = Vec::with_capacity(map.t);
    loop {
        subset.clear();
        subset.extend(pick.iter().map(|&i| fixed[i]));
        subset.push(p);
        subset.sort_unstable();
        if !map.is_covered(&subset, row) {
            count += 1;
        }
        // next (t-1)-combination of fixed indices
        let mut i = need;
        while i > 0 && pick[i - 1] == fixed.len() - need + i - 1 {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        pick[i - 1] += 1;
        for j in i..need {
            pick[j] = pick[j - 1] + 1;
        }
    }
    row[p] = usize::MAX;
    count
}

fn cartesian(domains: &[usize]) -> Vec<Vec<usize>> {
    let mut rows = vec![Vec::new()];
    for &v in domains {
        rows = rows
            .into_iter()
            .flat_map(|r| {
                (0..v).map(move |l| {
                    let mut r = r.clone();
                    r.push(l);
                    r
                })
            })
            .collect();
    }
    rows
}
