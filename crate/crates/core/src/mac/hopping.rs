use serde::{Deserialize, Serialize};

use crate::error::SimError;

/// Physical channels of the 2.4 GHz O-QPSK PHY.
pub const VALID_CHANNELS: std::ops::RangeInclusive<u8> = 11..=26;

/// The 16-channel sequence used by the reference worked example.
pub const DEFAULT_SEQUENCE: [u8; 16] = [
    16, 17, 23, 18, 26, 15, 25, 22, 19, 11, 12, 13, 24, 14, 20, 21,
];

/// Ordered list of physical channels indexed by `(ASN + channel offset) mod len`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<u8>", into = "Vec<u8>")]
pub struct HoppingSequence(Vec<u8>);

impl HoppingSequence {
    pub fn new(channels: Vec<u8>) -> Result<Self, String> {
        if channels.is_empty() {
            return Err("hopping sequence is empty".into());
        }
        if let Some(c) = channels.iter().find(|c| !VALID_CHANNELS.contains(c)) {
            return Err(format!("channel {c} is outside 11..=26"));
        }
        let mut sorted = channels.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != channels.len() {
            return Err("hopping sequence contains duplicate channels".into());
        }
        Ok(HoppingSequence(channels))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn channels(&self) -> &[u8] {
        &self.0
    }

    /// Physical channel for a cell: `V[(asn + channel_offset) mod N_ch]`, zero-based.
    pub fn channel_for(&self, asn: u64, channel_offset: u16) -> Result<u8, SimError> {
        let n = self.0.len();
        if channel_offset as usize >= n {
            return Err(SimError::ChannelOffset {
                offset: channel_offset,
                len: n,
            });
        }
        let idx = (asn % n as u64 + channel_offset as u64) % n as u64;
        Ok(self.0[idx as usize])
    }

    /// Channel a scanning node listens on. The scanner stays on one entry of
    /// the sequence for `dwell_slots` slots, then moves to the next.
    pub fn scan_channel(&self, asn: u64, dwell_slots: u64, start_index: usize) -> u8 {
        let n = self.0.len() as u64;
        let idx = (asn / dwell_slots.max(1) + start_index as u64) % n;
        self.0[idx as usize]
    }
}

impl Default for HoppingSequence {
    fn default() -> Self {
        HoppingSequence(DEFAULT_SEQUENCE.to_vec())
    }
}

impl TryFrom<Vec<u8>> for HoppingSequence {
    type Error = String;
    fn try_from(v: Vec<u8>) -> Result<Self, String> {
        HoppingSequence::new(v)
    }
}

impl From<HoppingSequence> for Vec<u8> {
    fn from(h: HoppingSequence) -> Vec<u8> {
        h.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_example() {
        let v = HoppingSequence::default();
        assert_eq!(v.channel_for(4, 1).unwrap(), 15);
        assert_eq!(v.channel_for(0, 0).unwrap(), 16);
        // (11 + 1) mod 16 = 12
        assert_eq!(v.channel_for(11, 1).unwrap(), 24);
    }

    #[test]
    fn offset_out_of_range() {
        let v = HoppingSequence::default();
        assert_eq!(
            v.channel_for(0, 16),
            Err(SimError::ChannelOffset {
                offset: 16,
                len: 16
            })
        );
    }

    #[test]
    fn rejects_bad_sequences() {
        assert!(HoppingSequence::new(vec![]).is_err());
        assert!(HoppingSequence::new(vec![11, 11]).is_err());
        assert!(HoppingSequence::new(vec![10]).is_err());
        assert!(serde_json::from_str::<HoppingSequence>("[15, 27]").is_err());
    }

    #[test]
    fn huge_asn_does_not_overflow() {
        let v = HoppingSequence::default();
        let asn = u64::MAX;
        let expected = v.channels()[((asn % 16 + 3) % 16) as usize];
        assert_eq!(v.channel_for(asn, 3).unwrap(), expected);
    }
}
