//! Little-endian database file layout; see `docs/database-format.md`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::database::{Level, RouteDatabase, RouteRef, Storage};
use crate::error::RouteError;
use crate::hamming_index::words_for;

pub const DB_MAGIC: [u8; 8] = *b"BSDROUTE";
pub const DB_VERSION: u32 = 1;

/// magic, version, map hash, location count, max length, turn threshold, section count
pub(super) const HEADER_BYTES: u64 = 8 + 4 + 8 + 4 + 4 + 8 + 4;
/// route length, route count
pub(super) const SECTION_HEADER_BYTES: u64 = 4 + 8;

fn descriptor_bytes(length: usize) -> usize {
    (4 * length).div_ceil(8)
}

fn turn_bytes(length: usize) -> usize {
    (length - 1).div_ceil(8)
}

fn write_words<W: Write>(w: &mut W, words: &[u64], nbytes: usize) -> std::io::Result<()> {
    let bytes: Vec<u8> = words
        .iter()
        .flat_map(|x| x.to_le_bytes())
        .take(nbytes)
        .collect();
    w.write_all(&bytes)
}

fn read_words(bytes: &[u8], nwords: usize) -> Vec<u64> {
    let mut out = vec![0u64; nwords];
    for (i, b) in bytes.iter().enumerate() {
        out[i / 8] |= (*b as u64) << (8 * (i % 8));
    }
    out
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self, what: &str) -> Result<[u8; N], RouteError> {
        let mut buf = [0u8; N];
        self.inner
            .read_exact(&mut buf)
            .map_err(|e| RouteError::io(format!("reading {what}"), e))?;
        Ok(buf)
    }

    fn u32(&mut self, what: &str) -> Result<u32, RouteError> {
        Ok(u32::from_le_bytes(self.bytes(what)?))
    }

    fn u64(&mut self, what: &str) -> Result<u64, RouteError> {
        Ok(u64::from_le_bytes(self.bytes(what)?))
    }

    fn vec(&mut self, n: usize, what: &str) -> Result<Vec<u8>, RouteError> {
        let mut buf = vec![0u8; n];
        self.inner
            .read_exact(&mut buf)
            .map_err(|e| RouteError::io(format!("reading {what}"), e))?;
        Ok(buf)
    }
}

impl RouteDatabase {
    /// Writes the given lengths (all present lengths if `None`).
    pub fn save_to<W: Write>(&self, out: W, lengths: Option<&[usize]>) -> Result<(), RouteError> {
        let lengths: Vec<usize> = match lengths {
            Some(ls) => {
                for &l in ls {
                    self.level(l)?;
                }
                ls.to_vec()
            }
            None => self.lengths(),
        };
        let mut w = BufWriter::new(out);
        let ctx = |e| RouteError::io("writing route database", e);
        let mut header = Vec::with_capacity(HEADER_BYTES as usize);
        header.extend_from_slice(&DB_MAGIC);
        header.extend_from_slice(&DB_VERSION.to_le_bytes());
        header.extend_from_slice(&self.map_hash.to_le_bytes());
        header.extend_from_slice(&self.location_count.to_le_bytes());
        header.extend_from_slice(&(self.max_length as u32).to_le_bytes());
        header.extend_from_slice(&self.turn_threshold.to_le_bytes());
        header.extend_from_slice(&(lengths.len() as u32).to_le_bytes());
        w.write_all(&header).map_err(ctx)?;

        for length in lengths {
            let level = self.level(length)?;
            w.write_all(&(length as u32).to_le_bytes()).map_err(ctx)?;
            w.write_all(&(level.count as u64).to_le_bytes())
                .map_err(ctx)?;
            let mut record = Vec::with_capacity(4 * length + 16);
            for i in 0..level.count {
                record.clear();
                let route = self.route(RouteRef {
                    length,
                    index: i as u32,
                })?;
                for l in route.locations() {
                    record.extend_from_slice(&l.0.to_le_bytes());
                }
                write_words(&mut record, level.route_words(i), descriptor_bytes(length))
                    .map_err(ctx)?;
                write_words(&mut record, &[level.turns[i]], turn_bytes(length)).map_err(ctx)?;
                w.write_all(&record).map_err(ctx)?;
            }
        }
        w.flush().map_err(ctx)?;
        Ok(())
    }

    pub fn save(&self, path: &Path, lengths: Option<&[usize]>) -> Result<(), RouteError> {
        let f = File::create(path)
            .map_err(|e| RouteError::io(format!("creating {}", path.display()), e))?;
        self.save_to(f, lengths)
    }

    pub fn load_from<R: Read>(input: R) -> Result<Self, RouteError> {
        let mut r = Reader {
            inner: BufReader::new(input),
        };
        let magic: [u8; 8] = r.bytes("magic")?;
        if magic != DB_MAGIC {
            return Err(RouteError::Format(
                "not a route database (bad magic)".into(),
            ));
        }
        let version = r.u32("version")?;
        if version != DB_VERSION {
            return Err(RouteError::Format(format!(
                "version {version}, expected {DB_VERSION}"
            )));
        }
        let map_hash = r.u64("map hash")?;
        let location_count = r.u32("location count")?;
        let max_length = r.u32("max length")? as usize;
        if max_length == 0 || max_length > 64 {
            return Err(RouteError::Format(format!(
                "max length {max_length} outside 1..=64"
            )));
        }
        let turn_threshold = f64::from_le_bytes(r.bytes("turn threshold")?);
        let sections = r.u32("section count")?;
        let mut levels: Vec<Option<Level>> = (0..max_length).map(|_| None).collect();
        for _ in 0..sections {
            let length = r.u32("section length")? as usize;
            if length == 0 || length > max_length || levels[length - 1].is_some() {
                return Err(RouteError::Format(format!(
                    "bad or repeated section length {length}"
                )));
            }
            let count = r.u64("section count")? as usize;
            let (db, tb) = (descriptor_bytes(length), turn_bytes(length));
            let stride = words_for(4 * length);
            let record = 4 * length + db + tb;
            let mut ids = Vec::with_capacity(count * length);
            let mut words = Vec::with_capacity(count * stride);
            let mut turns = Vec::with_capacity(count);
            for i in 0..count {
                let buf = r.vec(record, "route record")?;
                for k in 0..length {
                    let id = u32::from_le_bytes(buf[4 * k..4 * k + 4].try_into().expect("4 bytes"));
                    if id >= location_count {
                        return Err(RouteError::Format(format!(
                            "route {i} of length {length} references location {id} of {location_count}"
                        )));
                    }
                    ids.push(id);
                }
                let w = read_words(&buf[4 * length..4 * length + db], stride);
                let turn = read_words(&buf[4 * length + db..], 1)[0];
                if !(4 * length).is_multiple_of(64) && w[stride - 1] >> ((4 * length) % 64) != 0
                    || turn >> (length - 1) != 0
                {
                    return Err(RouteError::Format(format!(
                        "route {i} of length {length} has stray padding bits"
                    )));
                }
                words.extend_from_slice(&w);
                turns.push(turn);
            }
            levels[length - 1] = Some(Level::new(
                length,
                Storage::Flat { ids },
                words,
                turns,
                false,
            ));
        }
        Ok(Self {
            map_hash,
            location_count,
            turn_threshold,
            max_length,
            levels,
        })
    }

    pub fn load(path: &Path) -> Result<Self, RouteError> {
        let f = File::open(path)
            .map_err(|e| RouteError::io(format!("opening {}", path.display()), e))?;
        Self::load_from(f)
    }
}
