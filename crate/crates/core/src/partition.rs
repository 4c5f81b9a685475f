//! Random partitions of the covariate indices and block-wise distance
//! correlation screening.
//!
//! Indices are 0-based throughout.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;

use crate::data::Dataset;
use crate::dcor::ResponseDistances;
use crate::error::{Result, SdrError};
use crate::rng::Substream;

/// A split of `{0, .., p-1}` into disjoint blocks.
///
/// There are `p / r` blocks of size `r`; when `r` does not divide `p` a final
/// remainder block of size `p % r` follows them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub r: usize,
    pub blocks: Vec<Vec<usize>>,
    pub seed_tag: u64,
}

impl Partition {
    pub fn p(&self) -> usize {
        self.blocks.iter().map(Vec::len).sum()
    }

    /// Number of blocks of full size `r`.
    pub fn full_blocks(&self) -> usize {
        self.blocks.iter().filter(|b| b.len() == self.r).count()
    }
}

/// Uniform random partition: a shuffled `0..p` chopped into runs of `r`.
pub fn random_partition(p: usize, r: usize, stream: &mut Substream) -> Result<Partition> {
    if r == 0 || r > p {
        return Err(SdrError::Parameter(format!(
            "block size r={r} must satisfy 1 <= r <= p={p}"
        )));
    }
    let mut perm: Vec<usize> = (0..p).collect();
    perm.shuffle(stream.rng());
    let blocks = perm.chunks(r).map(<[usize]>::to_vec).collect();
    Ok(Partition {
        r,
        blocks,
        seed_tag: stream.tag(),
    })
}

/// Unique values of `⌊u/s⌋` for `s = 1..=u`, ascending.
pub fn candidate_sizes(u: usize) -> Vec<usize> {
    (1..=u).map(|s| u / s).collect::<BTreeSet<_>>().into_iter().collect()
}

/// Screened covariate indices for one partition.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeSelection {
    /// Selected covariates, ascending.
    pub indices: Vec<usize>,
    pub u_target: usize,
    /// dcor² of the response with each block, in partition order.
    pub block_scores: Vec<f64>,
    /// Partition block numbers that were kept, best first.
    pub selected_blocks: Vec<usize>,
}

impl EnvelopeSelection {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Scores every block of `part` against the response and keeps the
/// `⌊u/r⌋` best full-size blocks.
pub fn screen(d: &Dataset, part: &Partition, u: usize) -> Result<EnvelopeSelection> {
    let resp = ResponseDistances::new(d.y().as_slice());
    let mut scratch = resp.scratch();
    screen_with(&resp, d, part, u, &mut scratch)
}

/// As [`screen`], reusing a cached response distance structure.
pub fn screen_with(
    resp: &ResponseDistances,
    d: &Dataset,
    part: &Partition,
    u: usize,
    scratch: &mut [f64],
) -> Result<EnvelopeSelection> {
    let p = d.p();
    if u == 0 || u > p {
        return Err(SdrError::Parameter(format!(
            "envelope size u={u} must satisfy 1 <= u <= p={p}"
        )));
    }
    if part.p() != p {
        return Err(SdrError::Dimension(format!(
            "partition covers {} indices, dataset has {p}",
            part.p()
        )));
    }
    let block_scores: Vec<f64> = part
        .blocks
        .iter()
        .map(|b| {
            let v = resp.score_block(d.x(), b, scratch);
            if v.degenerate || !v.dcor2.is_finite() {
                0.0
            } else {
                v.dcor2
            }
        })
        .collect();
    Ok(select_top_blocks(part, &block_scores, u))
}

/// Ranks blocks by score (ties: smaller minimum index first) and keeps the
/// top `⌊u/r⌋` blocks of full size `r`. A short remainder block is scored
/// but never kept, so the selection size is exactly `r·⌊u/r⌋`.
pub fn select_top_blocks(part: &Partition, block_scores: &[f64], u: usize) -> EnvelopeSelection {
    let quota = u / part.r;
    let mut order: Vec<usize> = (0..part.blocks.len())
        .filter(|&k| part.blocks[k].len() == part.r)
        .collect();
    let min_index = |k: usize| part.blocks[k].iter().copied().min().unwrap_or(usize::MAX);
    order.sort_by(|&a, &b| {
        block_scores[b]
            .total_cmp(&block_scores[a])
            .then_with(|| min_index(a).cmp(&min_index(b)))
    });
    order.truncate(quota);
    let mut indices: Vec<usize> = order
        .iter()
        .flat_map(|&k| part.blocks[k].iter().copied())
        .collect();
    indices.sort_unstable();
    EnvelopeSelection {
        indices,
        u_target: u,
        block_scores: block_scores.to_vec(),
        selected_blocks: order,
    }
}
