//! Column-major run-length encoding.
//!
//! Runs alternate background/foreground starting with background (a leading
//! zero-length run marks a foreground first pixel). The byte form is the run
//! lengths as unsigned LEB128 varints, back to back.

use super::BinaryMask;
use crate::error::{Error, Result};

pub fn rle_runs(m: &BinaryMask) -> Vec<u64> {
    let mut runs = Vec::new();
    let mut current = false;
    let mut len = 0u64;
    for x in 0..m.width() {
        for y in 0..m.height() {
            let v = m.get(x, y);
            if v != current {
                runs.push(len);
                len = 0;
                current = v;
            }
            len += 1;
        }
    }
    runs.push(len);
    runs
}

pub fn rle_from_runs(runs: &[u64], width: usize, height: usize) -> Result<BinaryMask> {
    let mut m = BinaryMask::new(width, height)?;
    let total: u128 = runs.iter().map(|&r| r as u128).sum();
    if total != (width * height) as u128 {
        return Err(Error::Rle(format!(
            "runs sum to {total}, expected {} for {width}x{height}",
            width * height
        )));
    }
    let mut idx = 0usize;
    for (i, &run) in runs.iter().enumerate() {
        let run = run as usize;
        if i % 2 == 1 {
            for k in idx..idx + run {
                m.set(k / height, k % height, true);
            }
        }
        idx += run;
    }
    Ok(m)
}

pub fn rle_encode(m: &BinaryMask) -> Vec<u8> {
    let mut out = Vec::new();
    for run in rle_runs(m) {
        write_varint(&mut out, run);
    }
    out
}

pub fn rle_decode(bytes: &[u8], width: usize, height: usize) -> Result<BinaryMask> {
    let mut runs = Vec::new();
    let mut pos = 0;
    while pos < bytes.len() {
        let (v, used) = read_varint(&bytes[pos..])?;
        runs.push(v);
        pos += used;
    }
    if runs.is_empty() {
        return Err(Error::Rle("no runs".into()));
    }
    rle_from_runs(&runs, width, height)
}

fn write_varint(out: &mut Vec<u8>, mut v: u64) {
    loop {
        let byte = (v & 0x7f) as u8;
        v >>= 7;
        if v == 0 {
            out.push(byte);
            return;
        }
        out.push(byte | 0x80);
    }
}

fn read_varint(bytes: &[u8]) -> Result<(u64, usize)> {
    let mut v = 0u64;
    for (i, &b) in bytes.iter().enumerate() {
        if i == 10 || (i == 9 && b > 1) {
            return Err(Error::Rle("varint overflows u64".into()));
        }
        v |= u64::from(b & 0x7f) << (7 * i);
        if b & 0x80 == 0 {
            return Ok((v, i + 1));
        }
    }
    Err(Error::Rle("truncated varint".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn empty_and_full() {
        let e = BinaryMask::new(4, 4).unwrap();
        assert_eq!(rle_runs(&e), vec![16]);
        let f = BinaryMask::full(4, 4).unwrap();
        assert_eq!(rle_runs(&f), vec![0, 16]);
        assert_eq!(rle_encode(&f), vec![0, 16]);
    }

    #[test]
    fn column_major_order() {
        // column 0 = [0, 1], column 1 = [1, 1]
        let m = BinaryMask::from_ascii(&[".#", "##"]).unwrap();
        assert_eq!(rle_runs(&m), vec![1, 3]);
    }

    #[test]
    fn multi_byte_varints() {
        let m = BinaryMask::rect(300, 300, 100, 100, 50, 50).unwrap();
        let bytes = rle_encode(&m);
        assert_eq!(rle_decode(&bytes, 300, 300).unwrap(), m);
    }

    #[test]
    fn random_masks_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let density: f64 = rng.random();
            let m = BinaryMask::from_fn(16, 16, |_, _| rng.random::<f64>() < density).unwrap();
            let bytes = rle_encode(&m);
            assert_eq!(rle_decode(&bytes, 16, 16).unwrap(), m);
        }
    }

    #[test]
    fn decode_rejects_bad_sums_and_bytes() {
        assert!(matches!(rle_from_runs(&[15], 4, 4), Err(Error::Rle(_))));
        assert!(matches!(rle_decode(&[0x80], 4, 4), Err(Error::Rle(_))));
        assert!(matches!(rle_decode(&[], 4, 4), Err(Error::Rle(_))));
        assert!(matches!(rle_decode(&[0xff; 11], 4, 4), Err(Error::Rle(_))));
    }
}
