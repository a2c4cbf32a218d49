use serde::{Deserialize, Serialize};

use crate::detector_sim::DetectorModel;
use crate::error::ExperimentError;
use crate::map_model::Bsd;

/// Counts of one 4-bit pattern among ground-truth and estimated descriptors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionRow {
    pub pattern: String,
    pub ground_truth: usize,
    pub estimated: usize,
    /// Mean estimated count under the flip channel.
    pub expected: f64,
}

/// `k[i][j]`: probability that pattern `i` is reported as pattern `j` when every
/// bit is kept with probability `q`.
pub fn flip_kernel(q: f64) -> [[f64; 16]; 16] {
    let mut k = [[0.0; 16]; 16];
    for (i, row) in k.iter_mut().enumerate() {
        for (j, p) in row.iter_mut().enumerate() {
            let h = (i ^ j).count_ones() as i32;
            *p = q.powi(4 - h) * (1.0 - q).powi(h);
        }
    }
    k
}

/// Histogram of `truth` and of one noisy pass over it. Location `i` uses step
/// `i` of detector stream 0.
pub fn bsd_distribution(
    truth: &[Bsd],
    q: f64,
    seed: u64,
) -> Result<Vec<DistributionRow>, ExperimentError> {
    let detector = DetectorModel::symmetric(q, seed)?;
    let mut gt = [0usize; 16];
    let mut est = [0usize; 16];
    for (i, &d) in truth.iter().enumerate() {
        gt[d.pack() as usize] += 1;
        est[detector.estimate_indexed(d, 0, i as u64).pack() as usize] += 1;
    }
    let kernel = flip_kernel(q);
    Ok((0..16u8)
        .map(|j| {
            let expected = (0..16).map(|i| gt[i] as f64 * kernel[i][j as usize]).sum();
            DistributionRow {
                pattern: Bsd::unpack(j).expect("4-bit pattern").to_string(),
                ground_truth: gt[j as usize],
                estimated: est[j as usize],
                expected,
            }
        })
        .collect())
}
