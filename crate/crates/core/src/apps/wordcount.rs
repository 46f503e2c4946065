//! Word counting over blocks of text slots.

use std::collections::BTreeMap;

use super::mapreduce::{compact_output, map_phase, mr_run, reduce_sweep, Mapper, MrConfig};
use super::AppError;
use crate::blocks::{
    block_bitonic_sort, Block, BlockRecord, BlockSortStats, BlockStore, KVRecord, TextSlot,
    KEY_BYTES, TEXT_SLOT_BYTES,
};
use crate::oalg::Sortable;
use crate::oprim::{o_greater, o_less, CondSelect, Mask};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum WordCountImpl {
    Unprotected,
    Manual,
    Framework,
}

#[derive(Debug)]
pub struct WordCountOutput {
    /// `(word, count)` records sorted by word.
    pub store: BlockStore,
    pub records: u64,
    /// Zero for the unprotected variant.
    pub sort: BlockSortStats,
}

impl WordCountOutput {
    pub fn counts(&self) -> Result<Vec<(String, u32)>, AppError> {
        Ok(self
            .store
            .records::<KVRecord>()?
            .iter()
            .map(|r| (r.key_str(), r.value()))
            .collect())
    }
}

/// Packs the whitespace-separated words of `text` into text blocks, one word
/// per slot. Words longer than a slot are cut.
pub fn pack_text(text: &str) -> Result<BlockStore, AppError> {
    let slots: Vec<TextSlot> = text
        .split_ascii_whitespace()
        .map(|w| TextSlot::from_bytes(w.as_bytes()))
        .collect();
    Ok(BlockStore::from_records(&slots)?)
}

/// The `(word, 1)` record for a slot, or a sentinel when the slot holds no
/// word or a non-ASCII byte. The word ends at the first byte `<= b' '`; it is
/// lowercased and cut to 12 bytes. Every byte is visited.
pub fn normalize_word(slot: &TextSlot) -> KVRecord {
    let raw = slot.bytes();
    let mut key = [0u8; KEY_BYTES];
    let mut ended = Mask::FALSE;
    let mut bad = Mask::FALSE;
    for (i, &b) in raw.iter().enumerate() {
        let b = u64::from(b);
        ended |= o_less(b, 33);
        if i == 0 {
            bad |= ended;
        }
        bad |= o_greater(b, 127) & !ended;
        let upper = !o_less(b, u64::from(b'A')) & !o_greater(b, u64::from(b'Z'));
        let lower = b | (upper.word() & 0x20);
        if i < KEY_BYTES {
            key[i] = (lower & !ended.word()) as u8;
        }
    }
    KVRecord::cond_select(bad, &KVRecord::sentinel(), &KVRecord::from_key(key, 1))
}

/// Branching counterpart of [`normalize_word`].
pub fn normalize_word_plain(slot: &TextSlot) -> Option<[u8; KEY_BYTES]> {
    let raw = slot.bytes();
    let end = raw.iter().position(|&b| b <= b' ').unwrap_or(TEXT_SLOT_BYTES);
    if end == 0 || raw[..end].iter().any(|&b| b > 127) {
        return None;
    }
    let mut key = [0u8; KEY_BYTES];
    for (k, b) in key.iter_mut().zip(&raw[..end]) {
        *k = b.to_ascii_lowercase();
    }
    Some(key)
}

fn map_text_block(input: &Block, out: &mut Vec<KVRecord>) {
    let n = input.record_count();
    for i in 0..TextSlot::PER_BLOCK {
        let rec = normalize_word(&input.get::<TextSlot>(i));
        let live = o_less(i as u64, n);
        out.push(KVRecord::cond_select(live, &rec, &KVRecord::sentinel()));
    }
}

fn add_counts(a: &KVRecord, b: &KVRecord) -> KVRecord {
    a.with_value(a.value().wrapping_add(b.value()))
}

/// Mapper for the framework path: one record per text slot.
pub struct WordCountMapper;

impl Mapper for WordCountMapper {
    type Out = KVRecord;

    fn emissions_per_block(&self) -> usize {
        TextSlot::PER_BLOCK
    }

    fn map_block(&mut self, input: &Block, out: &mut Vec<KVRecord>) {
        map_text_block(input, out);
    }
}

pub fn wordcount(input: &BlockStore, imp: WordCountImpl) -> Result<WordCountOutput, AppError> {
    match imp {
        WordCountImpl::Unprotected => wordcount_plain(input),
        WordCountImpl::Manual => wordcount_manual(input),
        WordCountImpl::Framework => {
            let out = mr_run(input, &mut WordCountMapper, &add_counts, &MrConfig::default())?;
            Ok(WordCountOutput {
                store: out.store,
                records: out.records,
                sort: out.sort,
            })
        }
    }
}

fn wordcount_manual(input: &BlockStore) -> Result<WordCountOutput, AppError> {
    let mut pairs = map_phase(input, TextSlot::PER_BLOCK, &MrConfig::default(), map_text_block)?;
    let first = block_bitonic_sort::<KVRecord>(&mut pairs, true)?;
    let reduced = reduce_sweep(&pairs, &add_counts)?;
    drop(pairs);
    let (store, records, second) = compact_output::<KVRecord>(reduced)?;
    Ok(WordCountOutput {
        store,
        records,
        sort: BlockSortStats {
            block_comparators: first.block_comparators + second.block_comparators,
            record_comparators: first.record_comparators + second.record_comparators,
        },
    })
}

fn wordcount_plain(input: &BlockStore) -> Result<WordCountOutput, AppError> {
    let mut counts: BTreeMap<[u8; KEY_BYTES], u32> = BTreeMap::new();
    for i in 0..input.len() {
        for slot in input.read_block(i)?.records::<TextSlot>() {
            if let Some(k) = normalize_word_plain(&slot) {
                *counts.entry(k).or_default() += 1;
            }
        }
    }
    let recs: Vec<KVRecord> = counts
        .into_iter()
        .map(|(k, v)| KVRecord::from_key(k, v))
        .collect();
    Ok(WordCountOutput {
        records: recs.len() as u64,
        store: BlockStore::from_records(&recs)?,
        sort: BlockSortStats::default(),
    })
}
