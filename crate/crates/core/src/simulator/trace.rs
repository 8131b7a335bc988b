//! Per-slot schedule dumps.
//!
//! Layout: one row per slot, `ceil(|E| / 8)` bytes per row, no header.
//! Link `e` is bit `e % 8` (least significant first) of byte `e / 8`.

pub fn row_bytes(num_links: usize) -> usize {
    num_links.div_ceil(8)
}

pub fn encode_row(schedule: &[bool], out: &mut Vec<u8>) {
    let start = out.len();
    out.resize(start + row_bytes(schedule.len()), 0);
    for (e, _) in schedule.iter().enumerate().filter(|(_, &on)| on) {
        out[start + e / 8] |= 1 << (e % 8);
    }
}

pub fn decode_trace(bytes: &[u8], num_links: usize) -> Vec<Vec<bool>> {
    let width = row_bytes(num_links);
    if width == 0 {
        return Vec::new();
    }
    bytes
        .chunks(width)
        .map(|row| (0..num_links).map(|e| row[e / 8] >> (e % 8) & 1 == 1).collect())
        .collect()
}
