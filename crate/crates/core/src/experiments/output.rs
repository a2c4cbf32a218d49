use std::io::{Read, Write};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::ExperimentError;

/// Writes `# config_hash=<hash>` followed by a header row and one row per item.
pub fn write_csv<W: Write, T: Serialize>(
    mut out: W,
    config_hash: &str,
    rows: &[T],
) -> Result<(), ExperimentError> {
    writeln!(out, "# config_hash={config_hash}")?;
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads rows written by [`write_csv`], skipping comment lines.
pub fn read_csv<R: Read, T: DeserializeOwned>(input: R) -> Result<Vec<T>, ExperimentError> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(input);
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}
