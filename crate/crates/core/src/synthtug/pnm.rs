//! Binary netpbm codecs: 16-bit big-endian P5 and 8-bit P6.

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PnmError {
    #[error("bad header: {0}")]
    Header(String),
    #[error("pixel data truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
}

pub struct PnmImage<T> {
    pub width: usize,
    pub height: usize,
    pub maxval: u32,
    pub data: Vec<T>,
}

pub fn encode_pgm16(width: usize, height: usize, data: &[u16]) -> Vec<u8> {
    assert_eq!(data.len(), width * height);
    let mut out = format!("P5\n{width} {height}\n65535\n").into_bytes();
    out.reserve(data.len() * 2);
    for v in data {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out
}

pub fn encode_ppm8(width: usize, height: usize, data: &[u8]) -> Vec<u8> {
    assert_eq!(data.len(), width * height * 3);
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(data);
    out
}

struct Header {
    magic: [u8; 2],
    width: usize,
    height: usize,
    maxval: u32,
    offset: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header, PnmError> {
    if bytes.len() < 2 {
        return Err(PnmError::Header("file shorter than magic number".into()));
    }
    let magic = [bytes[0], bytes[1]];
    let mut pos = 2;
    let mut fields = [0u64; 3];
    for (k, field) in fields.iter_mut().enumerate() {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(PnmError::Header(format!("missing header field {}", k + 1)));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .unwrap()
            .parse()
            .map_err(|_| PnmError::Header("header value out of range".into()))?;
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(PnmError::Header("no whitespace after maxval".into())),
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 || maxval == 0 || maxval > 65535 {
        return Err(PnmError::Header(format!("invalid dimensions {width}x{height} or maxval {maxval}")));
    }
    Ok(Header {
        magic,
        width: width as usize,
        height: height as usize,
        maxval: maxval as u32,
        offset: pos,
    })
}

pub fn decode_pgm16(bytes: &[u8]) -> Result<PnmImage<u16>, PnmError> {
    let h = parse_header(bytes)?;
    if &h.magic != b"P5" {
        return Err(PnmError::Header("expected P5 magic".into()));
    }
    if h.maxval < 256 {
        return Err(PnmError::Header(format!("expected 16-bit samples, maxval is {}", h.maxval)));
    }
    let expected = h.width * h.height * 2;
    let body = &bytes[h.offset..];
    if body.len() < expected {
        return Err(PnmError::Truncated { expected, found: body.len() });
    }
    let data = body[..expected].chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect();
    Ok(PnmImage { width: h.width, height: h.height, maxval: h.maxval, data })
}

pub fn decode_ppm8(bytes: &[u8]) -> Result<PnmImage<u8>, PnmError> {
    let h = parse_header(bytes)?;
    if &h.magic != b"P6" {
        return Err(PnmError::Header("expected P6 magic".into()));
    }
    if h.maxval > 255 {
        return Err(PnmError::Header(format!("expected 8-bit samples, maxval is {}", h.maxval)));
    }
    let expected = h.width * h.height * 3;
    let body = &bytes[h.offset..];
    if body.len() < expected {
        return Err(PnmError::Truncated { expected, found: body.len() });
    }
    Ok(PnmImage { width: h.width, height: h.height, maxval: h.maxval, data: body[..expected].to_vec() })
}
