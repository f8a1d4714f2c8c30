/// Start sequence shared by all devices, 128 bits.
pub const START_HEX: &str = "1C71B91BA9BA8457B4BC5054BFD05540";
/// Tail sequence shared by all devices, 128 bits.
pub const TAIL_HEX: &str = "AA6CCB0CC243AC5F39DC7AF4640B5D95";

/// Unpacks a hex string into bits, most significant bit of each digit first.
/// Panics on a non-hex character.
pub fn hex_to_bits(hex: &str) -> Vec<u8> {
    hex.chars()
        .filter(|c| !c.is_whitespace())
        .flat_map(|c| {
            let v = c.to_digit(16).unwrap_or_else(|| panic!("invalid hex digit {c:?}")) as u8;
            (0..4).rev().map(move |i| (v >> i) & 1)
        })
        .collect()
}

/// BPSK map, bit 0 to +1 and bit 1 to -1.
pub fn bpsk(bits: &[u8]) -> Vec<f64> {
    bits.iter().map(|&b| 1.0 - 2.0 * f64::from(b & 1)).collect()
}

pub fn start_sequence() -> Vec<f64> {
    bpsk(&hex_to_bits(START_HEX))
}

pub fn tail_sequence() -> Vec<f64> {
    bpsk(&hex_to_bits(TAIL_HEX))
}
