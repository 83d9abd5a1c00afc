//! EOSIO account/table name encoding: up to 12 characters from
//! `.12345a-z` packed 5 bits each, plus a 13th character of 4 bits.

const CHARSET: &[u8; 32] = b".12345abcdefghijklmnopqrstuvwxyz";

fn char_value(c: u8) -> Option<u64> {
    match c {
        b'.' => Some(0),
        b'1'..=b'5' => Some(u64::from(c - b'1') + 1),
        b'a'..=b'z' => Some(u64::from(c - b'a') + 6),
        _ => None,
    }
}

/// Encodes a name, or `None` if it has invalid characters or is too long.
pub fn name_from_str(s: &str) -> Option<u64> {
    let bytes = s.as_bytes();
    if bytes.len() > 13 {
        return None;
    }
    let mut value = 0u64;
    for (i, &c) in bytes.iter().enumerate() {
        let v = char_value(c)?;
        if i < 12 {
            value |= (v & 0x1F) << (64 - 5 * (i + 1));
        } else {
            if v > 0x0F {
                return None;
            }
            value |= v;
        }
    }
    Some(value)
}

/// Name encoding that panics on invalid input; for literals.
pub fn name(s: &str) -> u64 {
    name_from_str(s).unwrap_or_else(|| panic!("invalid name {s:?}"))
}

pub fn name_to_string(value: u64) -> String {
    let mut out = [b'.'; 13];
    let mut v = value;
    for i in (0..13).rev() {
        let (mask, shift) = if i == 12 { (0x0F, 4) } else { (0x1F, 5) };
        out[i] = CHARSET[(v & mask) as usize];
        v >>= shift;
    }
    let s = String::from_utf8(out.to_vec()).unwrap();
    s.trim_end_matches('.').to_string()
}
