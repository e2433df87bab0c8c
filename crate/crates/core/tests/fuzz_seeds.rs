//! Replays the checked-in fuzz corpus through the same checks the fuzz
//! targets make, so the seeds stay meaningful on stable toolchains.

use std::fs;
use std::path::PathBuf;

use sfspn::cipher::{CipherKeyBundle, CiphertextContainer};
use sfspn::image::GrayImage;
use sfspn::sbox::{parse_family, parse_sbox, render_family, render_sbox};

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

fn count_ok(target: &str, check: impl Fn(&[u8]) -> bool) -> usize {
    seeds(target).iter().filter(|(_, data)| check(data)).count()
}

#[test]
fn sbox_seeds() {
    let ok = count_ok("parse_sbox", |data| {
        let Ok(s) = parse_sbox(std::str::from_utf8(data).unwrap()) else { return false };
        assert_eq!(parse_sbox(&render_sbox(&s)).unwrap(), s);
        true
    });
    assert_eq!(ok, 1);
}

#[test]
fn family_seeds() {
    let ok = count_ok("parse_family", |data| {
        let Ok(m) = parse_family(std::str::from_utf8(data).unwrap()) else { return false };
        assert_eq!(parse_family(&render_family(m.iter().map(|(r, s)| (*r, s)))).unwrap(), m);
        true
    });
    assert_eq!(ok, 1);
}

#[test]
fn key_file_seeds() {
    let ok = count_ok("parse_key_file", |data| {
        let Ok(k) = CipherKeyBundle::parse(std::str::from_utf8(data).unwrap()) else { return false };
        assert_eq!(CipherKeyBundle::parse(&k.render()).unwrap(), k);
        true
    });
    assert_eq!(ok, 1);
}

#[test]
fn container_seeds() {
    let ok = count_ok("decode_container", |data| {
        let Ok(c) = CiphertextContainer::decode(data) else { return false };
        assert_eq!(c.encode(), data);
        true
    });
    assert_eq!(ok, 1);
}

#[test]
fn pgm_seeds() {
    let ok = count_ok("parse_pgm", |data| {
        let Ok(img) = GrayImage::from_pgm(data) else { return false };
        assert_eq!(GrayImage::from_pgm(&img.to_pgm()).unwrap(), img);
        true
    });
    assert_eq!(ok, 1);
}
