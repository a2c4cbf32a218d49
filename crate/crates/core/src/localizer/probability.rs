use crate::error::DetectorError;
use crate::map_model::Bsd;

/// Detector accuracy `q` used to score descriptor distances.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LikelihoodModel {
    q: f64,
}

impl LikelihoodModel {
    /// `q` must lie strictly between 0 and 1.
    pub fn new(q: f64) -> Result<Self, DetectorError> {
        if !(q > 0.0 && q < 1.0) {
            return Err(DetectorError::InvalidProbability(q));
        }
        Ok(Self { q })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// ln(q / (1 - q)): log-odds of a correct bit; one unit of Hamming
    /// distance costs this much log-likelihood.
    pub fn log_odds(&self) -> f64 {
        (self.q / (1.0 - self.q)).ln()
    }
}

/// ln of `q^(4n - h) (1 - q)^h`.
pub fn log_posterior_weight(h: u32, n: usize, model: &LikelihoodModel) -> f64 {
    let bits = 4 * n as u32;
    debug_assert!(h <= bits, "distance {h} exceeds {bits} bits");
    (bits - h) as f64 * model.q.ln() + h as f64 * (1.0 - model.q).ln()
}

/// Unnormalized probability that a route of `n` locations at Hamming distance
/// `h` from the observations is the true one.
pub fn posterior_weight(h: u32, n: usize, model: &LikelihoodModel) -> f64 {
    log_posterior_weight(h, n, model).exp()
}

/// ln of `((1 - q) / q)^(h_i - h_j)`.
pub fn log_likelihood_ratio(h_i: u32, h_j: u32, model: &LikelihoodModel) -> f64 {
    let delta = h_i as f64 - h_j as f64;
    if delta == 0.0 {
        return 0.0;
    }
    -delta * model.log_odds()
}

/// How much more likely route i is than route j.
pub fn likelihood_ratio(h_i: u32, h_j: u32, model: &LikelihoodModel) -> f64 {
    log_likelihood_ratio(h_i, h_j, model).exp()
}

/// Normalizes log weights with the log-sum-exp trick.
pub fn normalize_log_weights(log_w: &[f64]) -> Vec<f64> {
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return vec![0.0; log_w.len()];
    }
    let sum: f64 = log_w.iter().map(|w| (w - max).exp()).sum();
    log_w.iter().map(|w| (w - max).exp() / sum).collect()
}

/// Posterior over candidate routes of `n` locations given their distances,
/// assuming a uniform prior over candidates.
pub fn route_posterior(distances: &[u32], n: usize, model: &LikelihoodModel) -> Vec<f64> {
    let log_w: Vec<f64> = distances
        .iter()
        .map(|&h| log_posterior_weight(h, n, model))
        .collect();
    normalize_log_weights(&log_w)
}

/// Posterior over locations given one observed descriptor, with every location
/// equally likely a priori.
pub fn single_location_posterior(d_hat: Bsd, table: &[Bsd], model: &LikelihoodModel) -> Vec<f64> {
    let log_w: Vec<f64> = table
        .iter()
        .map(|d| log_posterior_weight(d.hamming(d_hat), 1, model))
        .collect();
    normalize_log_weights(&log_w)
}
