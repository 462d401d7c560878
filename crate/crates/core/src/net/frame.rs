//! Length-prefixed binary frames.
//!
//! ```text
//! u32 frame length (bytes after this field, little-endian)
//! u16 session id
//! u32 round number
//! u8  sender peer id
//! u8  message kind
//! ... payload: packed 8-byte little-endian field elements
//! ```

use crate::field::{FieldElement, ELEMENT_BYTES};

use super::{NetError, PeerId};

pub const LENGTH_BYTES: usize = 4;
pub const HEADER_BYTES: usize = 2 + 4 + 1 + 1;
/// Upper bound on a single frame body; anything larger is treated as corruption.
pub const MAX_FRAME_BYTES: usize = 1 << 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum MessageKind {
    Hello = 1,
    Input = 2,
    Multiply = 3,
    Open = 4,
    Reveal = 5,
    Output = 6,
    Config = 7,
    Abort = 8,
}

impl TryFrom<u8> for MessageKind {
    type Error = NetError;

    fn try_from(v: u8) -> Result<Self, NetError> {
        Ok(match v {
            1 => Self::Hello,
            2 => Self::Input,
            3 => Self::Multiply,
            4 => Self::Open,
            5 => Self::Reveal,
            6 => Self::Output,
            7 => Self::Config,
            8 => Self::Abort,
            other => return Err(NetError::Malformed(format!("unknown message kind {other}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub session: u16,
    pub round: u32,
    pub sender: PeerId,
    pub kind: MessageKind,
    pub payload: Vec<FieldElement>,
}

impl Frame {
    pub fn encoded_len(&self) -> usize {
        LENGTH_BYTES + HEADER_BYTES + self.payload.len() * ELEMENT_BYTES
    }

    pub fn encode(&self) -> Vec<u8> {
        let body = HEADER_BYTES + self.payload.len() * ELEMENT_BYTES;
        let mut out = Vec::with_capacity(LENGTH_BYTES + body);
        out.extend_from_slice(&(body as u32).to_le_bytes());
        out.extend_from_slice(&self.session.to_le_bytes());
        out.extend_from_slice(&self.round.to_le_bytes());
        out.push(self.sender);
        out.push(self.kind as u8);
        for e in &self.payload {
            out.extend_from_slice(&e.to_le_bytes());
        }
        out
    }

    /// Decodes one complete frame (length prefix included).
    pub fn decode(bytes: &[u8], modulus: u64) -> Result<Self, NetError> {
        if bytes.len() < LENGTH_BYTES + HEADER_BYTES {
            return Err(NetError::Malformed(format!("short frame: {} bytes", bytes.len())));
        }
        let body = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
        if body + LENGTH_BYTES != bytes.len() {
            return Err(NetError::Malformed(format!(
                "length prefix {body} disagrees with {} body bytes",
                bytes.len() - LENGTH_BYTES
            )));
        }
        let payload_bytes = &bytes[LENGTH_BYTES + HEADER_BYTES..];
        if payload_bytes.len() % ELEMENT_BYTES != 0 {
            return Err(NetError::Malformed("payload is not a whole number of elements".into()));
        }
        let payload = payload_bytes
            .chunks_exact(ELEMENT_BYTES)
            .map(|c| FieldElement::from_le_bytes(c, modulus))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| NetError::Malformed(e.to_string()))?;
        Ok(Self {
            session: u16::from_le_bytes(bytes[4..6].try_into().unwrap()),
            round: u32::from_le_bytes(bytes[6..10].try_into().unwrap()),
            sender: bytes[10],
            kind: MessageKind::try_from(bytes[11])?,
            payload,
        })
    }
}

/// Reads one length-prefixed frame from a stream, returning the raw bytes.
pub fn read_frame_bytes<R: std::io::Read>(reader: &mut R) -> Result<Vec<u8>, NetError> {
    let mut len = [0u8; LENGTH_BYTES];
    reader.read_exact(&mut len)?;
    let body = u32::from_le_bytes(len) as usize;
    if !(HEADER_BYTES..=MAX_FRAME_BYTES).contains(&body) {
        return Err(NetError::Malformed(format!("frame body of {body} bytes")));
    }
    let mut out = vec![0u8; LENGTH_BYTES + body];
    out[..LENGTH_BYTES].copy_from_slice(&len);
    reader.read_exact(&mut out[LENGTH_BYTES..])?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::DEFAULT_PRIME;
    use proptest::prelude::*;

    #[test]
    fn layout_is_bit_exact() {
        let p = DEFAULT_PRIME;
        let f = Frame {
            session: 0x0102,
            round: 0x0a0b0c0d,
            sender: 3,
            kind: MessageKind::Open,
            payload: vec![FieldElement::new(0x1122, p)],
        };
        let bytes = f.encode();
        assert_eq!(
            bytes,
            vec![
                16, 0, 0, 0, // length = 8 header + 8 payload
                0x02, 0x01, // session
                0x0d, 0x0c, 0x0b, 0x0a, // round
                3,    // sender
                4,    // kind
                0x22, 0x11, 0, 0, 0, 0, 0, 0,
            ]
        );
        assert_eq!(f.encoded_len(), bytes.len());
    }

    #[test]
    fn rejects_garbage() {
        let p = DEFAULT_PRIME;
        assert!(Frame::decode(&[1, 2, 3], p).is_err());
        let mut bytes = Frame {
            session: 1,
            round: 1,
            sender: 1,
            kind: MessageKind::Multiply,
            payload: vec![],
        }
        .encode();
        bytes[11] = 99;
        assert!(Frame::decode(&bytes, p).is_err());
        bytes[11] = 3;
        bytes.push(0);
        assert!(Frame::decode(&bytes, p).is_err());
    }

    proptest! {
        #[test]
        fn encode_decode_roundtrip(session: u16, round: u32, sender: u8, vals in proptest::collection::vec(0u64..DEFAULT_PRIME, 0..40)) {
            let f = Frame {
                session, round, sender,
                kind: MessageKind::Reveal,
                payload: vals.iter().map(|&v| FieldElement::new(v, DEFAULT_PRIME)).collect(),
            };
            let bytes = f.encode();
            prop_assert_eq!(Frame::decode(&bytes, DEFAULT_PRIME).unwrap(), f.clone());
            let mut cursor = std::io::Cursor::new(bytes.clone());
            prop_assert_eq!(read_frame_bytes(&mut cursor).unwrap(), bytes);
        }
    }
}
