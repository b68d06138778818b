//! Length-prefixed binary framing for the model bridge.
//!
//! ```text
//! frame   = length:u32be  type:u8  payload[length - 1]
//! grid    = H:u16be W:u16be C:u16be  f32le[H*W*C]   (planar, channel-major)
//! hello   = version:u16be H:u16be W:u16be C:u16be steps:u32be flags:u8
//! denoise = t:u32be  has_scale:u8 scale:f32le  cond_kind:u8 cond_len:u32be cond[cond_len]  grid
//! resp    = count:u8 grid[count]            (1 = combined ε, 2 = unconditional then conditional)
//! error   = utf-8 message
//! ```
//!
//! `length` counts the type byte and the payload. Every payload must be
//! consumed exactly; trailing bytes are a protocol error.

use std::io::{Read, Write};

use crate::denoiser::Condition;
use crate::error::{Error, Result};
use crate::grid::{ImageGrid, Shape};

pub const PROTOCOL_VERSION: u16 = 1;
/// Frames larger than this are rejected before allocation.
pub const MAX_FRAME_LEN: usize = 1 << 30;

pub mod msg {
    pub const HELLO: u8 = 0x01;
    pub const DENOISE_REQ: u8 = 0x10;
    pub const DENOISE_RESP: u8 = 0x11;
    pub const ENCODE_REQ: u8 = 0x20;
    pub const ENCODE_RESP: u8 = 0x21;
    pub const DECODE_REQ: u8 = 0x30;
    pub const DECODE_RESP: u8 = 0x31;
    pub const ECHO: u8 = 0x40;
    pub const ERROR: u8 = 0x7f;
}

pub mod caps {
    pub const CONDITION: u8 = 1 << 0;
    pub const ENCODE_DECODE: u8 = 1 << 1;
    pub const INPAINT_VARIANT: u8 = 1 << 2;
}

const COND_NONE: u8 = 0;
const COND_TEXT: u8 = 1;
const COND_LABEL: u8 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Hello {
    pub version: u16,
    pub shape: Shape,
    pub steps: u32,
    pub flags: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Hello(Hello),
    DenoiseRequest {
        t: u32,
        guidance_scale: Option<f32>,
        condition: Option<Condition>,
        x_t: ImageGrid<f32>,
    },
    DenoiseResponse(Vec<ImageGrid<f32>>),
    EncodeRequest(ImageGrid<f32>),
    EncodeResponse(ImageGrid<f32>),
    DecodeRequest(ImageGrid<f32>),
    DecodeResponse(ImageGrid<f32>),
    Echo(ImageGrid<f32>),
    Error(String),
}

impl Message {
    pub fn kind(&self) -> u8 {
        match self {
            Message::Hello(_) => msg::HELLO,
            Message::DenoiseRequest { .. } => msg::DENOISE_REQ,
            Message::DenoiseResponse(_) => msg::DENOISE_RESP,
            Message::EncodeRequest(_) => msg::ENCODE_REQ,
            Message::EncodeResponse(_) => msg::ENCODE_RESP,
            Message::DecodeRequest(_) => msg::DECODE_REQ,
            Message::DecodeResponse(_) => msg::DECODE_RESP,
            Message::Echo(_) => msg::ECHO,
            Message::Error(_) => msg::ERROR,
        }
    }
}

fn put_grid(out: &mut Vec<u8>, g: &ImageGrid<f32>) -> Result<()> {
    for d in [g.height(), g.width(), g.channels()] {
        let d = u16::try_from(d).map_err(|_| Error::Protocol(format!("grid dimension {d} exceeds u16")))?;
        out.extend_from_slice(&d.to_be_bytes());
    }
    out.reserve(g.data().len() * 4);
    for v in g.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(())
}

/// Serialises a message into one complete frame.
pub fn encode(message: &Message) -> Result<Vec<u8>> {
    let mut body = vec![message.kind()];
    match message {
        Message::Hello(h) => {
            body.extend_from_slice(&h.version.to_be_bytes());
            for d in [h.shape.height, h.shape.width, h.shape.channels] {
                let d = u16::try_from(d).map_err(|_| Error::Protocol(format!("dimension {d} exceeds u16")))?;
                body.extend_from_slice(&d.to_be_bytes());
            }
            body.extend_from_slice(&h.steps.to_be_bytes());
            body.push(h.flags);
        }
        Message::DenoiseRequest { t, guidance_scale, condition, x_t } => {
            body.extend_from_slice(&t.to_be_bytes());
            body.push(guidance_scale.is_some() as u8);
            body.extend_from_slice(&guidance_scale.unwrap_or(0.0).to_le_bytes());
            let (kind, bytes) = match condition {
                None => (COND_NONE, Vec::new()),
                Some(Condition::Text(s)) => (COND_TEXT, s.as_bytes().to_vec()),
                Some(Condition::Label(l)) => (COND_LABEL, l.to_be_bytes().to_vec()),
            };
            body.push(kind);
            body.extend_from_slice(&(bytes.len() as u32).to_be_bytes());
            body.extend_from_slice(&bytes);
            put_grid(&mut body, x_t)?;
        }
        Message::DenoiseResponse(grids) => {
            if grids.is_empty() || grids.len() > 2 {
                return Err(Error::Protocol(format!("denoise response carries {} grids", grids.len())));
            }
            body.push(grids.len() as u8);
            for g in grids {
                put_grid(&mut body, g)?;
            }
        }
        Message::EncodeRequest(g)
        | Message::EncodeResponse(g)
        | Message::DecodeRequest(g)
        | Message::DecodeResponse(g)
        | Message::Echo(g) => put_grid(&mut body, g)?,
        Message::Error(text) => body.extend_from_slice(text.as_bytes()),
    }
    if body.len() > MAX_FRAME_LEN {
        return Err(Error::Protocol(format!("frame of {} bytes exceeds limit", body.len())));
    }
    let mut frame = Vec::with_capacity(4 + body.len());
    frame.extend_from_slice(&(body.len() as u32).to_be_bytes());
    frame.extend_from_slice(&body);
    Ok(frame)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Protocol(format!(
                "payload truncated: needed {n} bytes at offset {}, have {}",
                self.pos,
                self.buf.len() - self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_be_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn grid(&mut self) -> Result<ImageGrid<f32>> {
        let (h, w, c) = (self.u16()? as usize, self.u16()? as usize, self.u16()? as usize);
        let n = h * w * c;
        let raw = self.take(n * 4)?;
        let data = raw.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect();
        ImageGrid::new(h, w, c, data).map_err(|e| Error::Protocol(format!("bad grid: {e}")))
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Protocol(format!("{} trailing payload bytes", self.buf.len() - self.pos)));
        }
        Ok(())
    }
}

fn utf8(bytes: &[u8]) -> Result<String> {
    String::from_utf8(bytes.to_vec()).map_err(|_| Error::Protocol("invalid UTF-8".into()))
}

/// Decodes a frame body (type byte and payload, without the length prefix).
pub fn decode_body(body: &[u8]) -> Result<Message> {
    let (&kind, payload) = body.split_first().ok_or_else(|| Error::Protocol("empty frame".into()))?;
    let mut cur = Cursor { buf: payload, pos: 0 };
    let message = match kind {
        msg::HELLO => {
            let version = cur.u16()?;
            let shape = Shape::new(cur.u16()? as usize, cur.u16()? as usize, cur.u16()? as usize);
            if shape.is_empty() {
                return Err(Error::Protocol(format!("hello declares empty shape {shape}")));
            }
            Message::Hello(Hello { version, shape, steps: cur.u32()?, flags: cur.u8()? })
        }
        msg::DENOISE_REQ => {
            let t = cur.u32()?;
            let has_scale = cur.u8()?;
            let scale = cur.f32()?;
            let guidance_scale = match has_scale {
                0 => None,
                1 => Some(scale),
                v => return Err(Error::Protocol(format!("bad guidance flag {v}"))),
            };
            let cond_kind = cur.u8()?;
            let len = cur.u32()? as usize;
            let bytes = cur.take(len)?;
            let condition = match cond_kind {
                COND_NONE if len == 0 => None,
                COND_TEXT => Some(Condition::Text(utf8(bytes)?)),
                COND_LABEL if len == 4 => Some(Condition::Label(u32::from_be_bytes(bytes.try_into().unwrap()))),
                v => return Err(Error::Protocol(format!("bad condition kind {v} with length {len}"))),
            };
            Message::DenoiseRequest { t, guidance_scale, condition, x_t: cur.grid()? }
        }
        msg::DENOISE_RESP => {
            let count = cur.u8()?;
            if count == 0 || count > 2 {
                return Err(Error::Protocol(format!("denoise response carries {count} grids")));
            }
            let grids = (0..count).map(|_| cur.grid()).collect::<Result<Vec<_>>>()?;
            Message::DenoiseResponse(grids)
        }
        msg::ENCODE_REQ => Message::EncodeRequest(cur.grid()?),
        msg::ENCODE_RESP => Message::EncodeResponse(cur.grid()?),
        msg::DECODE_REQ => Message::DecodeRequest(cur.grid()?),
        msg::DECODE_RESP => Message::DecodeResponse(cur.grid()?),
        msg::ECHO => Message::Echo(cur.grid()?),
        msg::ERROR => {
            let text = utf8(cur.take(payload.len())?)?;
            Message::Error(text)
        }
        other => return Err(Error::Protocol(format!("unknown message type 0x{other:02x}"))),
    };
    cur.finish()?;
    Ok(message)
}

/// Parses one frame from the front of `buf`.
///
/// Returns `Ok(None)` while `buf` holds only a prefix of a frame, and the
/// message plus bytes consumed once it is complete.
pub fn parse_frame(buf: &[u8]) -> Result<Option<(Message, usize)>> {
    if buf.len() < 4 {
        return Ok(None);
    }
    let len = u32::from_be_bytes(buf[..4].try_into().unwrap()) as usize;
    if len == 0 || len > MAX_FRAME_LEN {
        return Err(Error::Protocol(format!("frame length {len} out of range")));
    }
    if buf.len() < 4 + len {
        return Ok(None);
    }
    let message = decode_body(&buf[4..4 + len])?;
    Ok(Some((message, 4 + len)))
}

pub fn write_message(w: &mut impl Write, message: &Message) -> Result<()> {
    w.write_all(&encode(message)?)?;
    w.flush()?;
    Ok(())
}

pub fn read_message(r: &mut impl Read) -> Result<Message> {
    let mut len = [0u8; 4];
    r.read_exact(&mut len)?;
    let len = u32::from_be_bytes(len) as usize;
    if len == 0 || len > MAX_FRAME_LEN {
        return Err(Error::Protocol(format!("frame length {len} out of range")));
    }
    // Grow with the data actually received rather than trusting the prefix.
    let mut body = Vec::with_capacity(len.min(1 << 16));
    r.take(len as u64).read_to_end(&mut body)?;
    if body.len() != len {
        return Err(Error::Transport(std::io::Error::new(
            std::io::ErrorKind::UnexpectedEof,
            format!("frame truncated after {} of {len} bytes", body.len()),
        )));
    }
    decode_body(&body)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(h: usize, w: usize, c: usize, seed: u32) -> ImageGrid<f32> {
        let mut state = seed.wrapping_mul(747_796_405).wrapping_add(1);
        ImageGrid::from_fn(h, w, c, |_, _, _| {
            state = state.wrapping_mul(1_664_525).wrapping_add(1_013_904_223);
            (state >> 8) as f32 / (1u32 << 23) as f32 - 1.0
        })
    }

    fn samples() -> Vec<Message> {
        vec![
            Message::Hello(Hello { version: 1, shape: Shape::new(64, 64, 4), steps: 50, flags: caps::CONDITION }),
            Message::DenoiseRequest {
                t: 17,
                guidance_scale: None,
                condition: Some(Condition::Text("a painting, oil on canvas".into())),
                x_t: grid(3, 4, 2, 1),
            },
            Message::DenoiseRequest { t: 1, guidance_scale: Some(7.5), condition: Some(Condition::Label(9)), x_t: grid(1, 1, 1, 2) },
            Message::DenoiseRequest { t: 50, guidance_scale: None, condition: None, x_t: grid(2, 2, 4, 3) },
            Message::DenoiseResponse(vec![grid(2, 2, 1, 4), grid(2, 2, 1, 5)]),
            Message::EncodeRequest(grid(4, 4, 3, 6)),
            Message::DecodeResponse(grid(2, 2, 4, 7)),
            Message::Echo(grid(5, 1, 1, 8)),
            Message::Error("model exploded".into()),
        ]
    }

    #[test]
    fn round_trip_samples() {
        for m in samples() {
            let frame = encode(&m).unwrap();
            let (back, used) = parse_frame(&frame).unwrap().unwrap();
            assert_eq!(used, frame.len());
            // compare bit patterns, NaN payloads included
            assert_eq!(encode(&back).unwrap(), frame);
            let mut r = frame.as_slice();
            assert_eq!(encode(&read_message(&mut r).unwrap()).unwrap(), frame);
        }
    }

    #[test]
    fn grid_header_layout() {
        let frame = encode(&Message::Echo(ImageGrid::new(1, 2, 1, vec![1.0, -2.0]).unwrap())).unwrap();
        assert_eq!(
            frame,
            vec![0, 0, 0, 15, msg::ECHO, 0, 1, 0, 2, 0, 1, 0, 0, 0x80, 0x3f, 0, 0, 0, 0xc0]
        );
    }

    #[test]
    fn prefixes_never_complete() {
        for m in samples() {
            let frame = encode(&m).unwrap();
            for cut in 0..frame.len() {
                assert!(matches!(parse_frame(&frame[..cut]), Ok(None)), "cut {cut} of {:?}", m.kind());
            }
        }
    }

    #[test]
    fn trailing_and_unknown_rejected() {
        let mut frame = encode(&Message::Echo(grid(1, 1, 1, 0))).unwrap();
        frame.push(0);
        frame[3] += 1;
        assert!(matches!(parse_frame(&frame), Err(Error::Protocol(_))));
        assert!(matches!(decode_body(&[0x55]), Err(Error::Protocol(_))));
        assert!(matches!(parse_frame(&[0, 0, 0, 0]), Err(Error::Protocol(_))));
    }

    #[test]
    fn oversized_grid_rejected() {
        let g = ImageGrid::<f32>::zeros(70_000, 1, 1);
        assert!(matches!(encode(&Message::Echo(g)), Err(Error::Protocol(_))));
    }

    proptest! {
        #[test]
        fn random_bytes_never_panic(bytes in proptest::collection::vec(any::<u8>(), 0..256)) {
            let _ = parse_frame(&bytes);
            let _ = decode_body(&bytes);
        }

        #[test]
        fn corrupted_frames_never_panic(idx in 0usize..9, flips in proptest::collection::vec((any::<prop::sample::Index>(), any::<u8>()), 1..6)) {
            let mut frame = encode(&samples()[idx]).unwrap();
            for (i, v) in flips {
                let at = i.index(frame.len());
                frame[at] ^= v;
            }
            let _ = parse_frame(&frame);
        }
    }
}
