//! Cover-file coding: publish XOR combinations instead of content.
//!
//! A publisher splits content into `alpha` equally-sized blocks, generates
//! `beta` cover blocks from a seed, and publishes one codeword per
//! `k`-subset of the combined pool — each codeword the XOR of its subset,
//! under a pseudo-random name that reveals nothing about which blocks went
//! in. An observer sees only uniformly-named codewords; a requester holding
//! the out-of-band meta record (hash, shape, seed) re-derives every name,
//! fetches codewords until the legitimate blocks are determined, cancels the
//! known cover blocks, and solves the remaining GF(2) system by Gaussian
//! elimination.
//!
//! Block-pool indexing everywhere: indices `0..beta` are the cover blocks
//! (c₁..c_β), indices `beta..beta+alpha` are the legitimate blocks
//! (l₁..l_α).

use std::collections::BTreeSet;
use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::names::Name;

/// Smallest supported block size for content splitting.
pub const MIN_BLOCK_SIZE: usize = 16;

/// Most blocks (cover + legitimate) one encoding can hold; masks are u64.
pub const MAX_POOL: usize = 64;

#[derive(thiserror::Error, Debug)]
pub enum CoverMixError {
    #[error("block size {got} is below the minimum of {MIN_BLOCK_SIZE}")]
    BlockTooSmall { got: usize },
    #[error("invalid shape: {detail}")]
    InvalidParams { detail: String },
    #[error("block length {got} does not match expected {expected}")]
    MismatchedBlocks { expected: usize, got: usize },
    #[error("codeword set has rank {rank}, need {alpha} to reconstruct")]
    Unsolvable { rank: usize, alpha: usize },
    #[error("reassembled content does not match the recorded digest")]
    DigestMismatch,
    #[error("block stream too short for a length header")]
    TruncatedHeader,
    #[error("length header declares {declared} bytes but only {available} are present")]
    BadLength { declared: u64, available: u64 },
    #[error("malformed codeword: {detail}")]
    MalformedCodeword { detail: String },
    #[error("meta record line {line}: {detail}")]
    MetaParse { line: usize, detail: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Shape of one encoding.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CoverParams {
    /// Legitimate block count.
    pub alpha: usize,
    /// Cover block count.
    pub beta: usize,
    /// Blocks XORed per codeword.
    pub k: usize,
    /// Bytes per block.
    pub block_size: usize,
    /// Seed for cover generation and codeword naming.
    pub seed: u64,
}

impl CoverParams {
    pub fn pool(&self) -> usize {
        self.alpha + self.beta
    }

    pub fn validate(&self) -> Result<(), CoverMixError> {
        let fail = |detail: String| Err(CoverMixError::InvalidParams { detail });
        if self.alpha < 1 {
            return fail("need at least one legitimate block".into());
        }
        if self.beta < 1 {
            return fail("need at least one cover block".into());
        }
        if self.k < 2 || self.k > self.pool() {
            return fail(format!(
                "subset size {} outside 2..={} (cover + legitimate blocks)",
                self.k,
                self.pool()
            ));
        }
        if self.pool() > MAX_POOL {
            return fail(format!("block pool {} exceeds the limit of {MAX_POOL}", self.pool()));
        }
        Ok(())
    }
}

/// Everything a requester needs (over a secure side channel) to fetch and
/// reconstruct: content digest and length, block shape, and the seed that
/// re-derives cover blocks and every codeword name.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoverMeta {
    pub alpha: usize,
    pub beta: usize,
    pub k: usize,
    pub block_size: usize,
    pub seed: u64,
    pub content_len: u64,
    pub content_sha256: [u8; 32],
}

impl CoverMeta {
    pub fn params(&self) -> CoverParams {
        CoverParams {
            alpha: self.alpha,
            beta: self.beta,
            k: self.k,
            block_size: self.block_size,
            seed: self.seed,
        }
    }
}

/// One published unit: the XOR of the blocks at `subset`, under a name that
/// only the seed holder can tie back to the subset.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Codeword {
    /// Sorted, distinct indices into the block pool.
    pub subset: Vec<u32>,
    pub payload: Vec<u8>,
    pub name: Name,
}

/// Splits content for encoding: an 8-byte big-endian length header, the
/// content, then zero padding up to a multiple of `block_size`. Empty
/// content still yields one block.
pub fn split_blocks(content: &[u8], block_size: usize) -> Result<Vec<Vec<u8>>, CoverMixError> {
    if block_size < MIN_BLOCK_SIZE {
        return Err(CoverMixError::BlockTooSmall { got: block_size });
    }
    let mut stream = Vec::with_capacity(8 + content.len() + block_size);
    stream.extend((content.len() as u64).to_be_bytes());
    stream.extend(content);
    let rem = stream.len() % block_size;
    if rem != 0 {
        stream.extend(std::iter::repeat_n(0u8, block_size - rem));
    }
    Ok(stream.chunks(block_size).map(<[u8]>::to_vec).collect())
}

/// Inverse of [`split_blocks`]: concatenates, reads the length header, and
/// strips the padding.
pub fn join_blocks(blocks: &[Vec<u8>]) -> Result<Vec<u8>, CoverMixError> {
    let stream: Vec<u8> = blocks.concat();
    if stream.len() < 8 {
        return Err(CoverMixError::TruncatedHeader);
    }
    let declared = u64::from_be_bytes(stream[0..8].try_into().expect("8 bytes"));
    let available = (stream.len() - 8) as u64;
    if declared > available {
        return Err(CoverMixError::BadLength { declared, available });
    }
    Ok(stream[8..8 + declared as usize].to_vec())
}

/// Deterministic cover block `index` (0-based) for a seed. Covers are
/// public: both the requester and any observer can regenerate them.
pub fn cover_block(seed: u64, index: u32, block_size: usize) -> Vec<u8> {
    let stream_seed = seed.wrapping_add((index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed);
    let mut block = vec![0u8; block_size];
    rng.fill_bytes(&mut block);
    block
}

/// All size-`k` subsets of `0..n`, in lexicographic order.
pub fn k_subsets(n: usize, k: usize) -> Vec<Vec<u32>> {
    assert!(k >= 1 && k <= n, "subset size out of range");
    let mut out = Vec::new();
    let mut cur: Vec<u32> = (0..k as u32).collect();
    loop {
        out.push(cur.clone());
        // advance: bump the rightmost index that still has room
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] < (n - k + i) as u32 {
                cur[i] += 1;
                for j in i + 1..k {
                    cur[j] = cur[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// `C(n, k)` — how many codewords an encoding publishes.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Publication cost of a shape: exact codeword count and the coarse
/// `(α+β)^k` ceiling it always stays under.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EncodeCost {
    pub codewords: u128,
    pub bound: u128,
}

pub fn encode_cost(alpha: usize, beta: usize, k: usize) -> EncodeCost {
    let codewords = binomial(alpha + beta, k);
    let bound = ((alpha + beta) as u128).pow(k as u32);
    assert!(codewords <= bound, "C(n,k) exceeded n^k — impossible");
    EncodeCost { codewords, bound }
}

/// The published name for a subset: `/cover/<16 hex>` from SHA-256 over the
/// seed and the sorted indices, each big-endian. Without the seed, names
/// carry no subset structure.
pub fn name_codeword(seed: u64, subset: &[u32]) -> Name {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_be_bytes());
    for idx in subset {
        hasher.update(idx.to_be_bytes());
    }
    let digest = hasher.finalize();
    let hex: String = digest[0..8].iter().map(|b| format!("{b:02x}")).collect();
    Name::from_strs(&["cover", &hex])
}

/// XORs one codeword per `k`-subset of `covers ++ legit`, in lexicographic
/// subset order. All blocks must share one length.
pub fn encode(legit: &[Vec<u8>], covers: &[Vec<u8>], k: usize, seed: u64) -> Vec<Codeword> {
    let pool: Vec<&Vec<u8>> = covers.iter().chain(legit.iter()).collect();
    assert!(!pool.is_empty(), "empty block pool");
    let block_size = pool[0].len();
    assert!(
        pool.iter().all(|b| b.len() == block_size),
        "blocks must be equally sized"
    );
    k_subsets(pool.len(), k)
        .into_iter()
        .map(|subset| {
            let mut payload = vec![0u8; block_size];
            for &idx in &subset {
                for (p, b) in payload.iter_mut().zip(pool[idx as usize]) {
                    *p ^= b;
                }
            }
            let name = name_codeword(seed, &subset);
            Codeword { subset, payload, name }
        })
        .collect()
}

/// A full encoding, ready to publish.
#[derive(Clone, Debug)]
pub struct CoverEncoding {
    pub params: CoverParams,
    pub covers: Vec<Vec<u8>>,
    pub codewords: Vec<Codeword>,
    pub meta: CoverMeta,
}

/// Splits `content`, generates `beta` covers, and publishes every
/// `k`-subset codeword. `alpha` falls out of the content length.
pub fn encode_content(content: &[u8], beta: usize, k: usize, block_size: usize, seed: u64)
    -> Result<CoverEncoding, CoverMixError>
{
    let legit = split_blocks(content, block_size)?;
    let params = CoverParams { alpha: legit.len(), beta, k, block_size, seed };
    params.validate()?;
    let covers: Vec<Vec<u8>> =
        (0..beta as u32).map(|i| cover_block(seed, i, block_size)).collect();
    let codewords = encode(&legit, &covers, k, seed);
    let meta = CoverMeta {
        alpha: params.alpha,
        beta,
        k,
        block_size,
        seed,
        content_len: content.len() as u64,
        content_sha256: Sha256::digest(content).into(),
    };
    Ok(CoverEncoding { params, covers, codewords, meta })
}

/// Indicator mask of a subset's legitimate blocks: bit `j` set means l_{j+1}
/// participates. Cover indices contribute nothing to the mask (they are
/// known constants on the right-hand side).
pub fn legit_mask(subset: &[u32], beta: usize, alpha: usize) -> Result<u64, CoverMixError> {
    let mut mask = 0u64;
    let mut seen = BTreeSet::new();
    for &idx in subset {
        if idx as usize >= alpha + beta {
            return Err(CoverMixError::MalformedCodeword {
                detail: format!("index {idx} outside a pool of {}", alpha + beta),
            });
        }
        if !seen.insert(idx) {
            return Err(CoverMixError::MalformedCodeword {
                detail: format!("repeated index {idx}"),
            });
        }
        if idx as usize >= beta {
            mask |= 1 << (idx as usize - beta);
        }
    }
    Ok(mask)
}

fn gf2_rank(masks: &[u64]) -> usize {
    let mut basis: Vec<u64> = Vec::new();
    for &m in masks {
        let mut v = m;
        for &b in &basis {
            v = v.min(v ^ b);
        }
        if v != 0 {
            basis.push(v);
            // keep the basis reduced so min(v, v^b) keeps working
            basis.sort_unstable_by(|a, b| b.cmp(a));
        }
    }
    basis.len()
}

/// Whether these subsets pin down all `alpha` legitimate blocks: their
/// indicator vectors must span GF(2)^alpha.
pub fn solvable(subsets: &[Vec<u32>], beta: usize, alpha: usize) -> bool {
    let masks: Vec<u64> = subsets
        .iter()
        .filter_map(|s| legit_mask(s, beta, alpha).ok())
        .collect();
    masks.len() == subsets.len() && gf2_rank(&masks) == alpha
}

/// A requester's fetch plan: walk the published codewords in order and take
/// each one whose indicator vector grows the span, stopping once all
/// `alpha` unknowns are pinned. Returns indices into `codewords`, or `None`
/// if even the full set cannot reconstruct.
pub fn greedy_select(codewords: &[Codeword], beta: usize, alpha: usize) -> Option<Vec<usize>> {
    let mut basis: Vec<u64> = Vec::new();
    let mut picked = Vec::new();
    for (i, cw) in codewords.iter().enumerate() {
        let Ok(mask) = legit_mask(&cw.subset, beta, alpha) else { continue };
        let mut v = mask;
        for &b in &basis {
            v = v.min(v ^ b);
        }
        if v != 0 {
            basis.push(v);
            basis.sort_unstable_by(|a, b| b.cmp(a));
            picked.push(i);
            if basis.len() == alpha {
                return Some(picked);
            }
        }
    }
    None
}

/// Solves the reduced system: each row is (legitimate-indicator mask, RHS
/// block with covers already cancelled). Returns the `alpha` legitimate
/// blocks in order.
pub fn solve_blocks(mut rows: Vec<(u64, Vec<u8>)>, alpha: usize, block_size: usize)
    -> Result<Vec<Vec<u8>>, CoverMixError>
{
    let mut solved: Vec<Option<Vec<u8>>> = vec![None; alpha];
    let mut rank = 0;
    for col in 0..alpha {
        let Some(pivot) = (rank..rows.len()).find(|&r| rows[r].0 & (1 << col) != 0) else {
            continue;
        };
        rows.swap(rank, pivot);
        let (pivot_mask, pivot_block) = rows[rank].clone();
        for (r, row) in rows.iter_mut().enumerate() {
            if r != rank && row.0 & (1 << col) != 0 {
                row.0 ^= pivot_mask;
                for (a, b) in row.1.iter_mut().zip(&pivot_block) {
                    *a ^= b;
                }
            }
        }
        rank += 1;
    }
    if rank < alpha {
        return Err(CoverMixError::Unsolvable { rank, alpha });
    }
    for (mask, block) in rows.into_iter().take(rank) {
        debug_assert_eq!(mask.count_ones(), 1, "full elimination leaves singletons");
        debug_assert_eq!(block.len(), block_size);
        solved[mask.trailing_zeros() as usize] = Some(block);
    }
    Ok(solved.into_iter().map(|b| b.expect("rank == alpha pins every block")).collect())
}

/// Reconstructs content from any solvable codeword subset plus the public
/// cover blocks and the meta record. Verifies length and digest.
pub fn decode(codewords: &[Codeword], covers: &[Vec<u8>], meta: &CoverMeta)
    -> Result<Vec<u8>, CoverMixError>
{
    if covers.len() != meta.beta {
        return Err(CoverMixError::InvalidParams {
            detail: format!("{} cover blocks, meta declares {}", covers.len(), meta.beta),
        });
    }
    for b in covers.iter() {
        if b.len() != meta.block_size {
            return Err(CoverMixError::MismatchedBlocks {
                expected: meta.block_size,
                got: b.len(),
            });
        }
    }
    let mut rows = Vec::with_capacity(codewords.len());
    for cw in codewords {
        if cw.payload.len() != meta.block_size {
            return Err(CoverMixError::MismatchedBlocks {
                expected: meta.block_size,
                got: cw.payload.len(),
            });
        }
        if cw.subset.len() != meta.k {
            return Err(CoverMixError::MalformedCodeword {
                detail: format!("subset size {} where k = {}", cw.subset.len(), meta.k),
            });
        }
        let mask = legit_mask(&cw.subset, meta.beta, meta.alpha)?;
        let mut rhs = cw.payload.clone();
        for &idx in &cw.subset {
            if (idx as usize) < meta.beta {
                for (a, b) in rhs.iter_mut().zip(&covers[idx as usize]) {
                    *a ^= b;
                }
            }
        }
        rows.push((mask, rhs));
    }
    let legit = solve_blocks(rows, meta.alpha, meta.block_size)?;
    // a wrong input block can garble the length header itself; any
    // reassembly inconsistency is corruption, same as a digest mismatch
    let content = match join_blocks(&legit) {
        Ok(c) => c,
        Err(CoverMixError::TruncatedHeader | CoverMixError::BadLength { .. }) => {
            return Err(CoverMixError::DigestMismatch)
        }
        Err(e) => return Err(e),
    };
    if content.len() as u64 != meta.content_len
        || <[u8; 32]>::from(Sha256::digest(&content)) != meta.content_sha256
    {
        return Err(CoverMixError::DigestMismatch);
    }
    Ok(content)
}

// ---- on-disk forms ----------------------------------------------------
//
// Codeword file (named `<16 hex>.cw` after the codeword's published name):
// one byte subset size, each index as big-endian u32, then the payload.
//
// Meta record (`meta.txt`): `key=value` lines, LF-terminated, exactly the
// keys below in this order; the digest is lowercase hex.

const META_FILE: &str = "meta.txt";
const COVER_DIR: &str = "covers";

pub fn write_codeword(path: &Path, cw: &Codeword) -> io::Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&[cw.subset.len() as u8])?;
    for idx in &cw.subset {
        f.write_all(&idx.to_be_bytes())?;
    }
    f.write_all(&cw.payload)
}

pub fn read_codeword(path: &Path, seed: u64) -> Result<Codeword, CoverMixError> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.is_empty() {
        return Err(CoverMixError::MalformedCodeword { detail: "empty file".into() });
    }
    let count = bytes[0] as usize;
    let header = 1 + 4 * count;
    if bytes.len() < header {
        return Err(CoverMixError::MalformedCodeword {
            detail: format!("{} bytes cannot hold {count} indices", bytes.len()),
        });
    }
    let subset: Vec<u32> = (0..count)
        .map(|i| u32::from_be_bytes(bytes[1 + 4 * i..5 + 4 * i].try_into().expect("4 bytes")))
        .collect();
    if subset.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CoverMixError::MalformedCodeword {
            detail: "indices must be strictly ascending".into(),
        });
    }
    let payload = bytes[header..].to_vec();
    let name = name_codeword(seed, &subset);
    Ok(Codeword { subset, payload, name })
}

pub fn write_meta(path: &Path, meta: &CoverMeta) -> io::Result<()> {
    let hex: String = meta.content_sha256.iter().map(|b| format!("{b:02x}")).collect();
    let text = format!(
        "alpha={}\nbeta={}\nk={}\nblock_size={}\nseed={}\ncontent_len={}\ncontent_sha256={}\n",
        meta.alpha, meta.beta, meta.k, meta.block_size, meta.seed, meta.content_len, hex
    );
    fs::write(path, text)
}

pub fn read_meta(path: &Path) -> Result<CoverMeta, CoverMixError> {
    let text = fs::read_to_string(path)?;
    let mut fields = std::collections::BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CoverMixError::MetaParse {
                line: i + 1,
                detail: "expected key=value".into(),
            });
        };
        fields.insert(key.to_string(), (i + 1, value.to_string()));
    }
    let take = |key: &str| {
        fields
            .get(key)
            .cloned()
            .ok_or_else(|| CoverMixError::MetaParse { line: 0, detail: format!("missing {key}") })
    };
    let num = |key: &str| -> Result<u64, CoverMixError> {
        let (line, value) = take(key)?;
        value.parse().map_err(|_| CoverMixError::MetaParse {
            line,
            detail: format!("{key} is not a number: {value}"),
        })
    };
    let alpha = num("alpha")? as usize;
    let beta = num("beta")? as usize;
    let k = num("k")? as usize;
    let block_size = num("block_size")? as usize;
    let seed = num("seed")?;
    let content_len = num("content_len")?;
    let (digest_line, digest_hex) = take("content_sha256")?;
    if digest_hex.len() != 64 || !digest_hex.bytes().all(|b| b.is_ascii_hexdigit()) {
        return Err(CoverMixError::MetaParse {
            line: digest_line,
            detail: "digest must be 64 hex characters".into(),
        });
    }
    let mut content_sha256 = [0u8; 32];
    for (i, chunk) in digest_hex.as_bytes().chunks(2).enumerate() {
        let s = std::str::from_utf8(chunk).expect("hex is ascii");
        content_sha256[i] = u8::from_str_radix(s, 16).expect("checked hexdigit");
    }
    Ok(CoverMeta { alpha, beta, k, block_size, seed, content_len, content_sha256 })
}

/// Writes the full encoding: `<out>/<16 hex>.cw` per codeword,
/// `<out>/meta.txt`, and the public covers as `<out>/covers/cover_<i>.bin`.
pub fn write_encoding(out_dir: &Path, enc: &CoverEncoding) -> io::Result<()> {
    fs::create_dir_all(out_dir)?;
    for cw in &enc.codewords {
        let label = String::from_utf8_lossy(cw.name.components().last().expect("named")).into_owned();
        write_codeword(&out_dir.join(format!("{label}.cw")), cw)?;
    }
    write_meta(&out_dir.join(META_FILE), &enc.meta)?;
    let cover_dir = out_dir.join(COVER_DIR);
    fs::create_dir_all(&cover_dir)?;
    for (i, block) in enc.covers.iter().enumerate() {
        fs::write(cover_dir.join(format!("cover_{i}.bin")), block)?;
    }
    Ok(())
}

/// Reads codewords + meta from an encoding directory and cover blocks from
/// `covers_dir` (pass `<out>/covers` for an encoding written by
/// [`write_encoding`]). Codewords come back in filename order.
pub fn read_encoding(out_dir: &Path, covers_dir: &Path)
    -> Result<(Vec<Codeword>, Vec<Vec<u8>>, CoverMeta), CoverMixError>
{
    let meta = read_meta(&out_dir.join(META_FILE))?;
    let mut cw_paths: Vec<_> = fs::read_dir(out_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "cw"))
        .collect();
    cw_paths.sort();
    let codewords = cw_paths
        .iter()
        .map(|p| read_codeword(p, meta.seed))
        .collect::<Result<Vec<_>, _>>()?;
    let mut covers = Vec::with_capacity(meta.beta);
    for i in 0..meta.beta {
        let path = covers_dir.join(format!("cover_{i}.bin"));
        covers.push(fs::read(&path)?);
    }
    Ok((codewords, covers, meta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitting_layout_and_round_trip() {
        let blocks = split_blocks(&[7u8; 100], 64).unwrap();
        assert_eq!(blocks.len(), 2, "8 + 100 pads to 128");
        assert!(blocks.iter().all(|b| b.len() == 64));
        assert_eq!(&blocks[0][0..8], &100u64.to_be_bytes());
        assert_eq!(join_blocks(&blocks).unwrap(), vec![7u8; 100]);

        let empty = split_blocks(&[], 32).unwrap();
        assert_eq!(empty.len(), 1);
        assert_eq!(join_blocks(&empty).unwrap(), Vec::<u8>::new());

        // exact fit still round-trips (8 + 56 = 64)
        let exact = split_blocks(&[1u8; 56], 64).unwrap();
        assert_eq!(exact.len(), 1);
        assert_eq!(join_blocks(&exact).unwrap(), vec![1u8; 56]);

        assert!(matches!(
            split_blocks(&[0u8; 10], 15),
            Err(CoverMixError::BlockTooSmall { got: 15 })
        ));
        assert!(matches!(join_blocks(&[vec![3u8; 4]]), Err(CoverMixError::TruncatedHeader)));
        let mut lying = split_blocks(&[9u8; 20], 16).unwrap();
        lying[0][0..8].copy_from_slice(&10_000u64.to_be_bytes());
        assert!(matches!(join_blocks(&lying), Err(CoverMixError::BadLength { .. })));
    }

    #[test]
    fn six_codewords_in_pair_order() {
        let c1 = vec![0x11u8; 16];
        let c2 = vec![0x22u8; 16];
        let l1 = vec![0x33u8; 16];
        let l2 = vec![0x44u8; 16];
        let cws = encode(&[l1, l2], &[c1, c2], 2, 99);
        let subsets: Vec<Vec<u32>> = cws.iter().map(|c| c.subset.clone()).collect();
        assert_eq!(
            subsets,
            vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]
        );
        let firsts: Vec<u8> = cws.iter().map(|c| c.payload[0]).collect();
        assert_eq!(
            firsts,
            vec![
                0x11 ^ 0x22, // c1+c2
                0x11 ^ 0x33, // c1+l1
                0x11 ^ 0x44, // c1+l2
                0x22 ^ 0x33, // c2+l1
                0x22 ^ 0x44, // c2+l2
                0x33 ^ 0x44, // l1+l2
            ]
        );
        assert!(cws.iter().all(|c| c.payload.len() == 16));
        // every name derives from the same seed and is distinct
        let names: BTreeSet<_> = cws.iter().map(|c| c.name.clone()).collect();
        assert_eq!(names.len(), 6);
        assert_eq!(cws[0].name, name_codeword(99, &[0, 1]));
    }

    #[test]
    fn subset_counts_match_the_formula() {
        assert_eq!(k_subsets(4, 4).len(), 1, "k = pool size leaves one subset");
        assert_eq!(k_subsets(6, 3).len(), 20);
        assert_eq!(binomial(6, 3), 20);
        assert_eq!(encode_cost(2, 2, 2), EncodeCost { codewords: 6, bound: 16 });
        assert_eq!(encode_cost(3, 3, 3), EncodeCost { codewords: 20, bound: 216 });
        assert_eq!(encode_cost(3, 2, 1), EncodeCost { codewords: 5, bound: 5 });
    }

    #[test]
    fn naming_is_deterministic_and_collision_free_at_scale() {
        assert_eq!(name_codeword(5, &[0, 3]), name_codeword(5, &[0, 3]));
        assert_ne!(name_codeword(5, &[0, 3]), name_codeword(6, &[0, 3]));
        let names: BTreeSet<Name> =
            k_subsets(150, 2).iter().map(|s| name_codeword(42, s)).collect();
        assert_eq!(names.len(), k_subsets(150, 2).len(), "11175 subsets, no collisions");
        let n = name_codeword(7, &[1, 2]);
        assert_eq!(n.len(), 2);
        assert_eq!(n.components()[0], b"cover");
        assert_eq!(n.components()[1].len(), 16);
    }

    #[test]
    fn solvability_is_a_rank_test() {
        // pool [c1, c2, l1, l2]: indices 2 and 3 are the unknowns
        assert!(solvable(&[vec![0, 2], vec![1, 3]], 2, 2), "l1 and l2 independently");
        assert!(solvable(&[vec![0, 2], vec![2, 3]], 2, 2), "l1, then l1+l2");
        assert!(!solvable(&[vec![0, 2], vec![1, 2]], 2, 2), "l1 twice never yields l2");
        assert!(!solvable(&[vec![0, 1]], 2, 2), "covers alone say nothing");
        assert!(!solvable(&[], 2, 1), "no codewords, no content");
        // both-l1-and-l2 subsets all reduce to the same vector: rank 1
        assert!(!solvable(&[vec![0, 2, 3], vec![1, 2, 3]], 2, 2));
        assert!(!solvable(&[vec![0, 9]], 2, 2), "out-of-pool index");
    }

    #[test]
    fn round_trip_with_a_greedy_fetch_plan() {
        use rand::RngCore;
        let mut content = vec![0u8; 1024];
        rand::rngs::mock::StepRng::new(0x1234_5678_9abc_def0, 0x9E37_79B9).fill_bytes(&mut content);
        let enc = encode_content(&content, 4, 2, 64, 7).unwrap();
        assert_eq!(enc.params.alpha, 17, "8 + 1024 bytes pad to 17 blocks of 64");
        assert_eq!(enc.codewords.len() as u128, binomial(21, 2));

        let picks = greedy_select(&enc.codewords, enc.meta.beta, enc.meta.alpha)
            .expect("full pair set is solvable");
        assert_eq!(picks.len(), enc.meta.alpha, "each pick adds exactly one rank");
        let chosen: Vec<Codeword> = picks.iter().map(|&i| enc.codewords[i].clone()).collect();
        assert_eq!(decode(&chosen, &enc.covers, &enc.meta).unwrap(), content);

        // decoding from everything published works too
        assert_eq!(decode(&enc.codewords, &enc.covers, &enc.meta).unwrap(), content);

        // a rank-deficient subset refuses
        let thin = &enc.codewords[0..1];
        assert!(matches!(
            decode(thin, &enc.covers, &enc.meta),
            Err(CoverMixError::Unsolvable { .. })
        ));

        // one wrong cover block corrupts silently until the digest check
        // (cover 0 participates in every greedily-chosen pair)
        let mut bad_covers = enc.covers.clone();
        bad_covers[0][5] ^= 0xFF;
        assert!(matches!(
            decode(&chosen, &bad_covers, &enc.meta),
            Err(CoverMixError::DigestMismatch)
        ));
    }

    #[test]
    fn single_block_content_needs_one_codeword() {
        let content = b"tiny".to_vec();
        let enc = encode_content(&content, 1, 2, 16, 3).unwrap();
        assert_eq!(enc.params.alpha, 1);
        // the only pair is {c1, l1}; it alone determines l1
        let one = &enc.codewords[0..1];
        assert_eq!(one[0].subset, vec![0, 1]);
        assert_eq!(decode(one, &enc.covers, &enc.meta).unwrap(), content);
    }

    /// Per-bit exhaustive solver: for every bit position, try all 2^alpha
    /// assignments against the reduced equations. Agreement check for the
    /// elimination path.
    fn brute_force(rows: &[(u64, Vec<u8>)], alpha: usize) -> Option<Vec<Vec<u8>>> {
        let block_size = rows.first().map_or(1, |r| r.1.len());
        let mut blocks = vec![vec![0u8; block_size]; alpha];
        for byte in 0..block_size {
            for bit in 0..8u8 {
                let mut found = None;
                for assign in 0u64..(1 << alpha) {
                    let ok = rows.iter().all(|(mask, rhs)| {
                        let lhs = (assign & mask).count_ones() & 1;
                        let r = (rhs[byte] >> bit) & 1;
                        lhs as u8 == r
                    });
                    if ok {
                        if found.is_some() {
                            return None; // underdetermined
                        }
                        found = Some(assign);
                    }
                }
                let assign = found?;
                for (j, block) in blocks.iter_mut().enumerate() {
                    block[byte] |= (((assign >> j) & 1) as u8) << bit;
                }
            }
        }
        Some(blocks)
    }

    #[test]
    fn elimination_agrees_with_exhaustive_search() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        for alpha in 1..=4usize {
            for trial in 0..40 {
                let beta = 2;
                let legit: Vec<Vec<u8>> = (0..alpha).map(|_| vec![rng.gen::<u8>()]).collect();
                let covers: Vec<Vec<u8>> = (0..beta).map(|_| vec![rng.gen::<u8>()]).collect();
                let all = encode(&legit, &covers, 2, 11);
                let take = rng.gen_range(1..=all.len());
                let chosen: Vec<&Codeword> =
                    all.choose_multiple(&mut rng, take).collect();
                let rows: Vec<(u64, Vec<u8>)> = chosen
                    .iter()
                    .map(|cw| {
                        let mask = legit_mask(&cw.subset, beta, alpha).unwrap();
                        let mut rhs = cw.payload.clone();
                        for &idx in &cw.subset {
                            if (idx as usize) < beta {
                                rhs[0] ^= covers[idx as usize][0];
                            }
                        }
                        (mask, rhs)
                    })
                    .collect();
                let eliminated = solve_blocks(rows.clone(), alpha, 1);
                let brute = brute_force(&rows, alpha);
                match (eliminated, brute) {
                    (Ok(a), Some(b)) => {
                        assert_eq!(a, b, "alpha {alpha} trial {trial}");
                        assert_eq!(a, legit, "solution is the real content");
                    }
                    (Err(CoverMixError::Unsolvable { .. }), None) => {}
                    (e, b) => panic!(
                        "alpha {alpha} trial {trial}: elimination {e:?} vs brute {}",
                        if b.is_some() { "solved" } else { "unsolved" }
                    ),
                }
            }
        }
    }

    #[test]
    fn even_overlap_cancels_to_zero() {
        let c1 = vec![0xA5u8; 16];
        let c2 = vec![0x5Au8; 16];
        let l1 = vec![0xF0u8; 16];
        let l2 = vec![0x0Fu8; 16];
        let cws = encode(&[l1, l2], &[c1, c2], 2, 1);
        // every sub-collection whose combined indices all appear an even
        // number of times XORs to the zero block
        for pick in 0u32..(1 << cws.len()) {
            let mut parity = [0u32; 4];
            let mut acc = vec![0u8; 16];
            for (i, cw) in cws.iter().enumerate() {
                if pick & (1 << i) != 0 {
                    for &idx in &cw.subset {
                        parity[idx as usize] ^= 1;
                    }
                    for (a, b) in acc.iter_mut().zip(&cw.payload) {
                        *a ^= b;
                    }
                }
            }
            if parity.iter().all(|&p| p == 0) {
                assert_eq!(acc, vec![0u8; 16], "pick {pick:06b}");
            }
        }
    }

    #[test]
    fn shape_validation_rejects_bad_parameters() {
        assert!(matches!(
            encode_content(b"x", 0, 2, 16, 1),
            Err(CoverMixError::InvalidParams { .. })
        ));
        assert!(matches!(
            encode_content(b"x", 1, 1, 16, 1),
            Err(CoverMixError::InvalidParams { .. })
        ));
        assert!(matches!(
            encode_content(b"x", 1, 5, 16, 1),
            Err(CoverMixError::InvalidParams { .. })
        ));
        // 8 + 2000 bytes at the minimum block size overflows a u64 mask pool
        assert!(matches!(
            encode_content(&[0u8; 2000], 8, 2, 16, 1),
            Err(CoverMixError::InvalidParams { .. })
        ));
    }

    #[test]
    fn disk_round_trip_including_covers() {
        let dir = tempfile::tempdir().unwrap();
        let content = b"the quick brown fox jumps over the lazy dog".to_vec();
        let enc = encode_content(&content, 3, 2, 16, 2024).unwrap();
        write_encoding(dir.path(), &enc).unwrap();

        let (codewords, covers, meta) =
            read_encoding(dir.path(), &dir.path().join("covers")).unwrap();
        assert_eq!(meta, enc.meta);
        assert_eq!(covers, enc.covers);
        assert_eq!(codewords.len(), enc.codewords.len());
        // filename order differs from publication order; content agrees
        let published: BTreeSet<_> = enc.codewords.iter().cloned().collect();
        let loaded: BTreeSet<_> = codewords.iter().cloned().collect();
        assert_eq!(published, loaded);
        assert_eq!(decode(&codewords, &covers, &meta).unwrap(), content);
    }

    #[test]
    fn meta_parsing_rejects_damage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("meta.txt");
        let enc = encode_content(b"abc", 1, 2, 16, 5).unwrap();
        write_meta(&path, &enc.meta).unwrap();
        assert_eq!(read_meta(&path).unwrap(), enc.meta);

        std::fs::write(&path, "alpha=1\nbeta=oops\n").unwrap();
        assert!(matches!(read_meta(&path), Err(CoverMixError::MetaParse { line: 2, .. })));
        std::fs::write(&path, "no equals sign\n").unwrap();
        assert!(matches!(read_meta(&path), Err(CoverMixError::MetaParse { line: 1, .. })));
        std::fs::write(&path, "alpha=1\nbeta=1\nk=2\nblock_size=16\nseed=5\ncontent_len=3\ncontent_sha256=zz\n").unwrap();
        assert!(matches!(read_meta(&path), Err(CoverMixError::MetaParse { .. })));
    }
}
