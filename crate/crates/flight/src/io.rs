// SPDX-License-Identifier: Apache-2.0

//! Blocking frame IO and the connection preamble.

use std::io::{self, Read, Write};

use flitelite_core::ipc::{parse_frame_header, BatchLayout, MessageType, WireMessage, FRAME_HEADER_LEN};
use flitelite_core::wire::PREAMBLE;
use flitelite_core::RecordBatch;

pub use flitelite_core::ipc::DEFAULT_FRAME_CAP;

#[derive(Debug, thiserror::Error)]
pub enum FrameError {
    #[error("connection closed")]
    ConnectionClosed,
    #[error("stream ended mid-frame")]
    Truncated,
    #[error("frame payload of {len} bytes exceeds cap of {cap}")]
    FrameTooLarge { len: usize, cap: usize },
    #[error("unknown message type 0x{0:02x}")]
    UnknownType(u8),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Reads exactly one frame.
///
/// A clean EOF before the first header byte is [`FrameError::ConnectionClosed`];
/// EOF anywhere later is [`FrameError::Truncated`].
pub fn read_message<R: Read>(r: &mut R, cap: usize) -> Result<WireMessage, FrameError> {
    let mut header = [0u8; FRAME_HEADER_LEN];
    let mut filled = 0;
    while filled < header.len() {
        match r.read(&mut header[filled..]) {
            Ok(0) if filled == 0 => return Err(FrameError::ConnectionClosed),
            Ok(0) => return Err(FrameError::Truncated),
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    let (len, code) = parse_frame_header(&header);
    if len > cap {
        return Err(FrameError::FrameTooLarge { len, cap });
    }
    let msg_type = MessageType::try_from(code).map_err(|_| FrameError::UnknownType(code))?;
    let mut payload = Vec::with_capacity(len);
    advise_huge(&payload);
    let got = r.take(len as u64).read_to_end(&mut payload)?;
    if got < len {
        return Err(FrameError::Truncated);
    }
    Ok(WireMessage::new(msg_type, payload))
}

/// Large receive buffers are faulted in once and kept; huge pages make
/// that several times cheaper.
#[cfg(target_os = "linux")]
fn advise_huge(v: &Vec<u8>) {
    const HUGE: usize = 2 << 20;
    if v.capacity() < 2 * HUGE {
        return;
    }
    let start = (v.as_ptr() as usize).next_multiple_of(HUGE);
    let end = (v.as_ptr() as usize + v.capacity()) / HUGE * HUGE;
    // SAFETY: [start, end) lies inside the vector's own allocation; madvise
    // only changes paging policy, never contents.
    unsafe {
        libc::madvise(start as *mut libc::c_void, end - start, libc::MADV_HUGEPAGE);
    }
}

#[cfg(not(target_os = "linux"))]
fn advise_huge(_: &Vec<u8>) {}

pub fn write_message<W: Write>(w: &mut W, m: &WireMessage) -> io::Result<()> {
    w.write_all(&m.frame_header())?;
    w.write_all(&m.payload)
}

/// Writes a BATCH frame straight from the batch's buffers. The bytes are
/// identical to `write_message(w, &encode_batch(b))`.
pub fn write_batch<W: Write>(w: &mut W, b: &RecordBatch) -> io::Result<usize> {
    let layout = BatchLayout::new(b);
    w.write_all(&layout.frame_header())?;
    for chunk in layout.chunks() {
        w.write_all(chunk)?;
    }
    Ok(FRAME_HEADER_LEN + layout.payload_len())
}

#[derive(Debug, thiserror::Error)]
pub enum PreambleError {
    #[error("peer sent preamble {0:02x?}")]
    Mismatch([u8; 5]),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Client side: send the preamble and expect it echoed.
pub fn client_preamble<S: Read + Write>(s: &mut S) -> Result<(), PreambleError> {
    s.write_all(&PREAMBLE)?;
    s.flush()?;
    expect_preamble(s)
}

/// Server side: expect the preamble, then echo it.
pub fn server_preamble<S: Read + Write>(s: &mut S) -> Result<(), PreambleError> {
    expect_preamble(s)?;
    s.write_all(&PREAMBLE)?;
    s.flush()?;
    Ok(())
}

fn expect_preamble<R: Read>(r: &mut R) -> Result<(), PreambleError> {
    let mut got = [0u8; 5];
    r.read_exact(&mut got)?;
    if got != PREAMBLE {
        return Err(PreambleError::Mismatch(got));
    }
    Ok(())
}
