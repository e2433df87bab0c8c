//! Plain-text S-box and family files.
//!
//! An S-box file is 16 lines of 16 two-digit lowercase hex bytes separated
//! by single spaces, row-major, each line newline-terminated. A family file
//! is a sequence of such blocks, each preceded by a `seed-rank: <n>` header,
//! with a `---` line between consecutive blocks.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{SBox, SBoxError};

pub fn render_sbox(s: &SBox) -> String {
    let mut out = String::with_capacity(16 * 48);
    for row in s.table().chunks(16) {
        let line: Vec<String> = row.iter().map(|b| format!("{b:02x}")).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

/// Parses the body of an S-box file. Tokens may be separated by any
/// whitespace; each must be exactly two hex digits, there must be 256 of
/// them, and no value may repeat.
pub fn parse_sbox(text: &str) -> Result<SBox, SBoxError> {
    let mut table = [0u8; 256];
    let mut n = 0usize;
    for tok in text.split_whitespace() {
        if tok.len() != 2 || !tok.bytes().all(|c| c.is_ascii_hexdigit()) {
            return Err(SBoxError::MalformedFile(format!("bad token {tok:?}")));
        }
        if n == 256 {
            return Err(SBoxError::MalformedFile("more than 256 entries".into()));
        }
        table[n] = u8::from_str_radix(tok, 16).expect("validated hex");
        n += 1;
    }
    if n != 256 {
        return Err(SBoxError::MalformedFile(format!("expected 256 entries, found {n}")));
    }
    SBox::new(table).map_err(|e| match e {
        SBoxError::NotBijective { duplicated, .. } => {
            let names: Vec<String> = duplicated.iter().map(|d| format!("{d:02x}")).collect();
            SBoxError::MalformedFile(format!("duplicate value(s) {}", names.join(", ")))
        }
        other => other,
    })
}

pub fn read_sbox_file(path: impl AsRef<Path>) -> Result<SBox, SBoxError> {
    parse_sbox(&fs::read_to_string(path)?)
}

pub fn write_sbox_file(s: &SBox, path: impl AsRef<Path>) -> Result<(), SBoxError> {
    fs::write(path, render_sbox(s))?;
    Ok(())
}

pub fn render_family<'a>(members: impl IntoIterator<Item = (u32, &'a SBox)>) -> String {
    let mut out = String::new();
    for (i, (rank, s)) in members.into_iter().enumerate() {
        if i > 0 {
            out.push_str("---\n");
        }
        let _ = writeln!(out, "seed-rank: {rank}");
        out.push_str(&render_sbox(s));
    }
    out
}

/// Parses a family file into `(rank, box)` members in file order.
pub fn parse_family(text: &str) -> Result<Vec<(u32, SBox)>, SBoxError> {
    let mut members = Vec::new();
    let mut rank: Option<u32> = None;
    let mut body = String::new();
    let mut flush = |rank: &mut Option<u32>, body: &mut String| -> Result<(), SBoxError> {
        let r = rank.take().ok_or_else(|| SBoxError::MalformedFile("block without header".into()))?;
        members.push((r, parse_sbox(body)?));
        body.clear();
        Ok(())
    };
    for line in text.lines() {
        let trimmed = line.trim();
        if trimmed == "---" {
            flush(&mut rank, &mut body)?;
        } else if let Some(v) = trimmed.strip_prefix("seed-rank:") {
            if rank.is_some() {
                return Err(SBoxError::MalformedFile("header repeated within a block".into()));
            }
            let r = v
                .trim()
                .parse::<u32>()
                .map_err(|_| SBoxError::MalformedFile(format!("bad seed-rank {:?}", v.trim())))?;
            rank = Some(r);
        } else if !trimmed.is_empty() {
            if rank.is_none() {
                return Err(SBoxError::MalformedFile("table rows before header".into()));
            }
            body.push_str(line);
            body.push('\n');
        }
    }
    if rank.is_some() {
        flush(&mut rank, &mut body)?;
    }
    if members.is_empty() {
        return Err(SBoxError::MalformedFile("empty family".into()));
    }
    Ok(members)
}

pub fn read_family_file(path: impl AsRef<Path>) -> Result<Vec<(u32, SBox)>, SBoxError> {
    parse_family(&fs::read_to_string(path)?)
}

pub fn write_family_file<'a>(
    members: impl IntoIterator<Item = (u32, &'a SBox)>,
    path: impl AsRef<Path>,
) -> Result<(), SBoxError> {
    fs::write(path, render_family(members))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sbox::{generate_family, load_fixture_sbox};

    #[test]
    fn render_is_bit_exact() {
        let text = render_sbox(&load_fixture_sbox().unwrap());
        let first = text.lines().next().unwrap();
        assert_eq!(first, "3f 20 9a f9 5c 43 d8 a4 bb 7d 1e 85 c7 62 e6 01");
        assert_eq!(text.lines().count(), 16);
        assert!(text.ends_with("fe\n"));
    }

    #[test]
    fn roundtrip_fixture() {
        let s = load_fixture_sbox().unwrap();
        assert_eq!(parse_sbox(&render_sbox(&s)).unwrap(), s);
    }

    #[test]
    fn short_file_rejected() {
        let text = render_sbox(&SBox::identity());
        let short = text.rsplit_once(' ').unwrap().0;
        assert!(matches!(parse_sbox(short), Err(SBoxError::MalformedFile(m)) if m.contains("255")));
    }

    #[test]
    fn duplicate_named() {
        let text = render_sbox(&SBox::identity()).replacen("01", "00", 1);
        match parse_sbox(&text) {
            Err(SBoxError::MalformedFile(m)) => assert!(m.contains("duplicate value(s) 00"), "{m}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_hex_rejected() {
        let text = render_sbox(&SBox::identity()).replacen("01", "0g", 1);
        assert!(parse_sbox(&text).is_err());
    }

    #[test]
    fn family_roundtrip() {
        let fam = generate_family(&SBox::aes(), 3).unwrap();
        let boxes = fam.materialize();
        let text = render_family(fam.ranks().iter().copied().zip(boxes.iter()));
        assert!(text.starts_with("seed-rank: 0\n"));
        assert_eq!(text.matches("---\n").count(), 2);
        let parsed = parse_family(&text).unwrap();
        assert_eq!(parsed.len(), 3);
        assert_eq!(parsed[2], (2, boxes[2].clone()));
    }

    #[test]
    fn family_errors() {
        assert!(parse_family("").is_err());
        assert!(parse_family("seed-rank: x\n").is_err());
        let body = render_sbox(&SBox::identity());
        assert!(parse_family(&body).is_err());
    }
}
