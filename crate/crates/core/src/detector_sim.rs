//! Simulated semantic detectors: a per-bit noisy channel over ground-truth
//! descriptors, and a loader for descriptor estimates computed elsewhere.

use std::collections::BTreeMap;
use std::io::Read;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::DetectorError;
use crate::map_model::{Bsd, LocationId};

/// Probability of reporting a bit correctly, split by the true bit value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BitAccuracy {
    /// P(report 1 | feature present).
    pub present: f64,
    /// P(report 0 | feature absent).
    pub absent: f64,
}

impl BitAccuracy {
    pub fn symmetric(q: f64) -> Self {
        Self {
            present: q,
            absent: q,
        }
    }

    fn validate(&self) -> Result<(), DetectorError> {
        for p in [self.present, self.absent] {
            if !(0.0..=1.0).contains(&p) {
                return Err(DetectorError::InvalidProbability(p));
            }
        }
        Ok(())
    }

    fn keep_probability(&self, truth: bool) -> f64 {
        if truth {
            self.present
        } else {
            self.absent
        }
    }
}

/// Independent bit-flip channel. Junction bits use `junction`, gap bits `gap`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    pub junction: BitAccuracy,
    pub gap: BitAccuracy,
    pub seed: u64,
}

impl DetectorModel {
    /// Same accuracy `q` for every bit and both truth values.
    pub fn symmetric(q: f64, seed: u64) -> Result<Self, DetectorError> {
        Self::new(q, q, seed)
    }

    pub fn new(q_junction: f64, q_gap: f64, seed: u64) -> Result<Self, DetectorError> {
        let m = Self {
            junction: BitAccuracy::symmetric(q_junction),
            gap: BitAccuracy::symmetric(q_gap),
            seed,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), DetectorError> {
        self.junction.validate()?;
        self.gap.validate()
    }

    fn accuracy(&self, bit: usize) -> &BitAccuracy {
        if bit < 2 {
            &self.junction
        } else {
            &self.gap
        }
    }

    /// Passes `truth` through the channel using four uniform draws from `rng`.
    pub fn estimate_bsd<R: Rng + ?Sized>(&self, truth: Bsd, rng: &mut R) -> Bsd {
        let mut out = truth;
        for bit in 0..4 {
            let t = truth.bit(bit);
            let u: f64 = rng.random();
            if u >= self.accuracy(bit).keep_probability(t) {
                out = out.with_bit(bit, !t);
            }
        }
        out
    }

    /// Deterministic estimate for one step of one route: draws are indexed by
    /// (seed, route, step, bit), so any step can be replayed on its own.
    pub fn estimate_indexed(&self, truth: Bsd, route: u64, step: u64) -> Bsd {
        self.estimate_bsd(truth, &mut self.stream(route, step))
    }

    /// The random stream positioned at `(route, step)`.
    pub fn stream(&self, route: u64, step: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(route);
        // four f64 draws use eight 32-bit words
        rng.set_word_pos(step as u128 * 8);
        rng
    }

    /// Estimates for a whole observation sequence.
    pub fn estimate_sequence(&self, truth: &[Bsd], route: u64) -> Vec<Bsd> {
        let mut rng = self.stream(route, 0);
        truth
            .iter()
            .map(|&d| self.estimate_bsd(d, &mut rng))
            .collect()
    }
}

/// Descriptor estimates read from a CSV file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EstimateTable {
    pub estimates: BTreeMap<LocationId, Bsd>,
    /// Known locations with no row in the file.
    pub missing: Vec<LocationId>,
    /// Rows naming a location id outside the map.
    pub unknown: Vec<u32>,
}

impl EstimateTable {
    pub fn is_complete(&self) -> bool {
        self.missing.is_empty()
    }

    /// The estimates as a dense per-location table, if complete.
    pub fn to_table(&self) -> Option<Vec<Bsd>> {
        self.is_complete()
            .then(|| self.estimates.values().copied().collect())
    }
}

#[derive(Deserialize)]
struct EstimateRow {
    location_id: u32,
    junction_front: u8,
    junction_back: u8,
    gap_left: u8,
    gap_right: u8,
}

/// Reads `location_id,junction_front,junction_back,gap_left,gap_right` rows
/// with bits in {0, 1} for a map of `location_count` locations. Lines starting
/// with `#` and extra columns are ignored.
pub fn load_estimates<R: Read>(
    input: R,
    location_count: usize,
) -> Result<EstimateTable, DetectorError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input);
    let headers = reader.headers()?.clone();
    let mut table = EstimateTable::default();
    let mut record = csv::StringRecord::new();
    loop {
        let more = reader
            .read_record(&mut record)
            .map_err(|e| DetectorError::MalformedRow {
                row: e.position().map_or(0, |p| p.line() as usize),
                message: e.to_string(),
            })?;
        if !more {
            break;
        }
        let line = record.position().map_or(0, |p| p.line() as usize);
        let row: EstimateRow =
            record
                .deserialize(Some(&headers))
                .map_err(|e| DetectorError::MalformedRow {
                    row: line,
                    message: e.to_string(),
                })?;
        let raw = [
            row.junction_front,
            row.junction_back,
            row.gap_left,
            row.gap_right,
        ];
        if let Some(b) = raw.iter().find(|&&b| b > 1) {
            return Err(DetectorError::MalformedRow {
                row: line,
                message: format!("bit value {b} is not 0 or 1"),
            });
        }
        if row.location_id as usize >= location_count {
            table.unknown.push(row.location_id);
            continue;
        }
        table.estimates.insert(
            LocationId(row.location_id),
            Bsd::from_bits(raw.map(|b| b == 1)),
        );
    }
    table.missing = (0..location_count as u32)
        .map(LocationId)
        .filter(|l| !table.estimates.contains_key(l))
        .collect();
    if table.estimates.is_empty() {
        log::warn!("estimate file contains no usable rows");
    }
    if !table.unknown.is_empty() {
        log::warn!(
            "{} estimate rows name unknown locations",
            table.unknown.len()
        );
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_and_inverted_channels() {
        let perfect = DetectorModel::symmetric(1.0, 3).unwrap();
        let inverted = DetectorModel::symmetric(0.0, 3).unwrap();
        for (i, d) in Bsd::all().enumerate() {
            assert_eq!(perfect.estimate_indexed(d, 0, i as u64), d);
            let flipped = inverted.estimate_indexed(d, 0, i as u64);
            assert_eq!(flipped.pack(), !d.pack() & 0xf);
        }
    }

    #[test]
    fn invalid_probability() {
        assert!(matches!(
            DetectorModel::symmetric(1.5, 0),
            Err(DetectorError::InvalidProbability(_))
        ));
        assert!(DetectorModel::new(0.5, -0.1, 0).is_err());
    }

    #[test]
    fn indexed_draws_replay() {
        let m = DetectorModel::symmetric(0.6, 42).unwrap();
        let truth: Vec<Bsd> = (0..50).map(|i| Bsd::unpack(i % 16).unwrap()).collect();
        let seq = m.estimate_sequence(&truth, 9);
        for (step, d) in truth.iter().enumerate() {
            assert_eq!(m.estimate_indexed(*d, 9, step as u64), seq[step]);
        }
        assert_ne!(m.estimate_sequence(&truth, 10), seq);
    }

    #[test]
    fn estimates_csv() {
        let text =
            "location_id,junction_front,junction_back,gap_left,gap_right\n0,1,0,1,0\n1,0,0,0,1\n";
        let t = load_estimates(text.as_bytes(), 2).unwrap();
        assert!(t.is_complete());
        assert_eq!(
            t.to_table().unwrap(),
            vec!["1010".parse().unwrap(), "0001".parse().unwrap()]
        );
    }

    #[test]
    fn estimates_csv_errors_and_gaps() {
        let bad =
            "location_id,junction_front,junction_back,gap_left,gap_right\n0,1,0,1,0\n1,0,2,0,1\n";
        assert!(matches!(
            load_estimates(bad.as_bytes(), 2),
            Err(DetectorError::MalformedRow { row: 3, .. })
        ));
        let garbled = "location_id,junction_front,junction_back,gap_left,gap_right\nx,1,0,1,0\n";
        assert!(matches!(
            load_estimates(garbled.as_bytes(), 2),
            Err(DetectorError::MalformedRow { row: 2, .. })
        ));
        let partial =
            "location_id,junction_front,junction_back,gap_left,gap_right\n1,0,0,0,1\n7,0,0,0,0\n";
        let t = load_estimates(partial.as_bytes(), 2).unwrap();
        assert_eq!(t.missing, vec![LocationId(0)]);
        assert_eq!(t.unknown, vec![7]);
        assert!(t.to_table().is_none());
        let empty = "location_id,junction_front,junction_back,gap_left,gap_right\n";
        assert!(load_estimates(empty.as_bytes(), 0)
            .unwrap()
            .estimates
            .is_empty());
    }
}
