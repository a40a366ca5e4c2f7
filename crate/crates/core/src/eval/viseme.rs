//! Jeffers phoneme-to-viseme mapping over ARPAbet tokens.

use crate::error::{Error, Result};

/// Silence token.
pub const SILENCE: &str = "sil";
/// The one phoneme without a viseme.
pub const UNMAPPED: &str = "HH";

const TABLE: &[(&str, &[&str])] = &[
    ("/A", &["F", "V"]),
    ("/B", &["OW", "R", "W", "UH", "UW", "ER"]),
    ("/C", &["B", "P", "M"]),
    ("/D", &["AW"]),
    ("/E", &["DH", "TH"]),
    ("/F", &["CH", "JH", "SH", "ZH"]),
    ("/G", &["OY", "AO"]),
    ("/H", &["S", "Z"]),
    ("/I", &["AA", "AE", "AH", "AY", "EH", "EY", "IH", "IY", "Y"]),
    ("/J", &["D", "L", "N", "T"]),
    ("/K", &["G", "K", "NG"]),
    ("/L", &[SILENCE]),
];

/// Viseme of a phoneme: `Ok(None)` for HH, an error for unknown tokens.
pub fn viseme_of(phoneme: &str) -> Result<Option<&'static str>> {
    if phoneme == UNMAPPED {
        return Ok(None);
    }
    TABLE
        .iter()
        .find(|(_, phones)| phones.contains(&phoneme))
        .map(|(v, _)| Some(*v))
        .ok_or_else(|| Error::UnknownLabel(phoneme.to_string()))
}

pub fn is_viseme(token: &str) -> bool {
    TABLE.iter().any(|(v, _)| *v == token)
}

/// Maps a phoneme sequence to visemes, dropping HH. Repeated visemes are
/// kept as separate tokens.
pub fn map_to_visemes<S: AsRef<str>>(seq: &[S]) -> Result<Vec<String>> {
    let mut out = Vec::with_capacity(seq.len());
    for tok in seq {
        if let Some(v) = viseme_of(tok.as_ref())? {
            out.push(v.to_string());
        }
    }
    Ok(out)
}

/// Every phoneme token of the inventory, in table order, HH last.
pub fn phoneme_inventory() -> Vec<&'static str> {
    let mut all: Vec<&str> = TABLE.iter().flat_map(|(_, p)| p.iter().copied()).collect();
    all.push(UNMAPPED);
    all
}

pub fn viseme_inventory() -> Vec<&'static str> {
    TABLE.iter().map(|(v, _)| *v).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_examples() {
        assert_eq!(map_to_visemes(&["F", "V"]).unwrap(), vec!["/A", "/A"]);
        assert!(map_to_visemes(&["HH"]).unwrap().is_empty());
        assert_eq!(map_to_visemes(&["sil"]).unwrap(), vec!["/L"]);
    }

    #[test]
    fn unknown_token_is_named() {
        match map_to_visemes(&["AE", "QQ"]) {
            Err(Error::UnknownLabel(l)) => assert_eq!(l, "QQ"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn inventory_is_total() {
        let inv = phoneme_inventory();
        assert_eq!(inv.len(), 40);
        let mapped = inv.iter().filter(|p| viseme_of(p).unwrap().is_some()).count();
        assert_eq!(mapped, 39);
        let mut sorted = inv.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 40);
    }
}
