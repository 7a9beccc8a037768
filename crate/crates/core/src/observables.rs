//! Statistics of price and spin configurations.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::Spin;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("no samples")]
    Empty,
    #[error("bin width must be positive")]
    ZeroBinWidth,
    #[error("smoothing window must be odd and positive, got {0}")]
    BadWindow(usize),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("variance is zero")]
    ZeroVariance,
    #[error("xs and ys differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("log-log fit needs strictly positive values, found {0}")]
    NonPositive(f64),
    #[error("all abscissae are equal")]
    DegenerateAbscissa,
}

/// Integer-price histogram. Bin `k` holds prices
/// `origin + k*bin_width ..= origin + (k+1)*bin_width - 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: u64,
    pub origin: i64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn bin_center(&self, k: usize) -> f64 {
        self.origin as f64 + (k as u64 * self.bin_width) as f64 + (self.bin_width - 1) as f64 / 2.0
    }

    pub fn centers(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.counts.len()).map(|k| self.bin_center(k))
    }

    fn as_real(&self) -> SmoothedHistogram {
        SmoothedHistogram {
            bin_width: self.bin_width,
            origin: self.origin,
            values: self.counts.iter().map(|&c| c as f64).collect(),
        }
    }
}

/// Histogram with real-valued heights, produced by [`smooth`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothedHistogram {
    pub bin_width: u64,
    pub origin: i64,
    pub values: Vec<f64>,
}

impl SmoothedHistogram {
    pub fn bin_center(&self, k: usize) -> f64 {
        self.origin as f64 + (k as u64 * self.bin_width) as f64 + (self.bin_width - 1) as f64 / 2.0
    }
}

/// Bins `prices` on a grid anchored at multiples of `bin_width`, covering
/// `[min, max]`.
pub fn price_histogram(prices: &[i64], bin_width: u64) -> Result<Histogram, StatsError> {
    if bin_width == 0 {
        return Err(StatsError::ZeroBinWidth);
    }
    let (&min, &max) = match (prices.iter().min(), prices.iter().max()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(StatsError::Empty),
    };
    let w = bin_width as i64;
    let origin = min.div_euclid(w) * w;
    let bins = ((max - origin) / w + 1) as usize;
    let mut counts = vec![0u64; bins];
    for &p in prices {
        counts[((p - origin) / w) as usize] += 1;
    }
    Ok(Histogram {
        bin_width,
        origin,
        counts,
    })
}

/// Centered moving average over `window` bins. Bins beyond either end count
/// as zero and every output is divided by the full window, so the result has
/// the same length as the input.
pub fn smooth(h: &Histogram, window: usize) -> Result<SmoothedHistogram, StatsError> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(StatsError::BadWindow(window));
    }
    let real = h.as_real();
    if window == 1 {
        return Ok(real);
    }
    let half = window / 2;
    let n = real.values.len();
    let values = (0..n)
        .map(|k| {
            let lo = k.saturating_sub(half);
            let hi = (k + half).min(n - 1);
            real.values[lo..=hi].iter().sum::<f64>() / window as f64
        })
        .collect();
    Ok(SmoothedHistogram { values, ..real })
}

/// First and last index of each local-maximum plateau of `values` above `floor`.
fn local_maxima(values: &[f64], floor: f64) -> Vec<(usize, usize)> {
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
    let mut out = Vec::new();
    let mut k = 0;
    while k < values.len() {
        let mut end = k;
        while end + 1 < values.len() && close(values[end + 1], values[k]) {
            end += 1;
        }
        let rises = k == 0 || values[k - 1] < values[k];
        let falls = end + 1 == values.len() || values[end + 1] < values[k];
        if rises && falls && values[k] > floor {
            out.push((k, end));
        }
        k = end + 1;
    }
    out
}

/// Bin centers of the smoothed histogram's local maxima taller than
/// `prominence_fraction` of its global maximum, left to right. A plateau
/// reports the midpoint of its first and last bin centers.
pub fn find_modes(h: &Histogram, window: usize, prominence_fraction: f64) -> Result<Vec<f64>, StatsError> {
    if h.counts.is_empty() {
        return Err(StatsError::Empty);
    }
    let s = smooth(h, window)?;
    let top = s.values.iter().copied().fold(0.0, f64::max);
    Ok(local_maxima(&s.values, prominence_fraction * top)
        .into_iter()
        .map(|(a, b)| (s.bin_center(a) + s.bin_center(b)) / 2.0)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Modality {
    Unimodal,
    Bimodal,
    Multimodal(usize),
}

impl Modality {
    pub fn from_mode_count(modes: usize) -> Self {
        match modes {
            0 | 1 => Modality::Unimodal,
            2 => Modality::Bimodal,
            k => Modality::Multimodal(k),
        }
    }
}

/// Price at the global maximum of the smoothed histogram.
///
/// Ties go to the bin farther from zero (then to the positive side). Centers of
/// even-width bins fall on half units and are rounded away from zero.
pub fn peak_price(h: &Histogram, window: usize) -> Result<i64, StatsError> {
    if h.counts.is_empty() {
        return Err(StatsError::Empty);
    }
    let s = smooth(h, window)?;
    let top = s.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let center = (0..s.values.len())
        .filter(|&k| s.values[k] == top)
        .map(|k| s.bin_center(k))
        .max_by(|a, b| a.abs().total_cmp(&b.abs()).then(a.total_cmp(b)))
        .expect("nonempty histogram");
    Ok(center.round() as i64)
}

fn mean(prices: &[i64]) -> f64 {
    prices.iter().map(|&p| p as f64).sum::<f64>() / prices.len() as f64
}

fn central_moment(prices: &[i64], mu: f64, order: i32) -> f64 {
    prices.iter().map(|&p| (p as f64 - mu).powi(order)).sum::<f64>() / prices.len() as f64
}

/// Population variance, the model's risk measure.
pub fn variance(prices: &[i64]) -> Result<f64, StatsError> {
    if prices.is_empty() {
        return Err(StatsError::Empty);
    }
    Ok(central_moment(prices, mean(prices), 2))
}

/// `m4 / m2^2 - 3` from population moments.
pub fn excess_kurtosis(prices: &[i64]) -> Result<f64, StatsError> {
    if prices.len() < 4 {
        return Err(StatsError::TooFewSamples {
            needed: 4,
            got: prices.len(),
        });
    }
    let mu = mean(prices);
    let m2 = central_moment(prices, mu, 2);
    if m2 == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    Ok(central_moment(prices, mu, 4) / (m2 * m2) - 3.0)
}

/// Number of unequal neighbor pairs around the ring, i.e. the number of
/// domains (always even).
pub fn count_domain_walls(spins: &[Spin]) -> Result<usize, StatsError> {
    if spins.len() < 2 {
        return Err(StatsError::TooFewSamples {
            needed: 2,
            got: spins.len(),
        });
    }
    let inner = spins.windows(2).filter(|w| w[0] != w[1]).count();
    Ok(inner + usize::from(spins[0] != spins[spins.len() - 1]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

impl PowerLawFit {
    pub fn predict(&self, x: f64) -> f64 {
        (self.intercept + self.slope * x.ln()).exp()
    }
}

/// Least-squares line through `(ln x, ln y)`.
pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> Result<PowerLawFit, StatsError> {
    if xs.len() != ys.len() {
        return Err(StatsError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 3 {
        return Err(StatsError::TooFewSamples {
            needed: 3,
            got: xs.len(),
        });
    }
    if let Some(&bad) = xs
        .iter()
        .chain(ys)
        .find(|&&v| v.is_nan() || v <= 0.0 || v.is_infinite())
    {
        return Err(StatsError::NonPositive(bad));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(StatsError::DegenerateAbscissa);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    // a constant response is fit perfectly by the flat line
    let r_squared = if syy <= f64::EPSILON * n {
        1.0
    } else {
        (1.0 - sse / syy).clamp(0.0, 1.0)
    };
    Ok(PowerLawFit {
        slope,
        intercept,
        r_squared,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("exp({price}) is not representable as a positive finite number")]
pub struct PriceOutOfRange {
    pub price: i64,
}

/// Positive prices `exp(p)` for log-prices `p`. Elements whose exponential
/// overflows or underflows to zero are reported individually.
pub fn exp_transform(prices: &[i64]) -> Vec<Result<f64, PriceOutOfRange>> {
    prices
        .iter()
        .map(|&price| {
            let v = (price as f64).exp();
            if v.is_finite() && v > 0.0 {
                Ok(v)
            } else {
                Err(PriceOutOfRange { price })
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use Spin::{Buyer as B, Seller as S};

    fn hist(origin: i64, counts: &[u64]) -> Histogram {
        Histogram {
            bin_width: 1,
            origin,
            counts: counts.to_vec(),
        }
    }

    #[test]
    fn histogram_examples() {
        let h = price_histogram(&[0, 0, 0], 1).unwrap();
        assert_eq!((h.origin, h.counts.clone()), (0, vec![3]));

        let h = price_histogram(&[-1, 0, 1], 1).unwrap();
        assert_eq!((h.origin, h.counts.clone()), (-1, vec![1, 1, 1]));
        assert_eq!(h.centers().collect::<Vec<_>>(), vec![-1.0, 0.0, 1.0]);

        let h = price_histogram(&[-2, -2, 3], 2).unwrap();
        assert_eq!((h.origin, h.counts.clone()), (-2, vec![2, 0, 1]));
        assert_eq!(h.bin_center(0), -1.5);
        assert_eq!(h.bin_center(2), 2.5);

        assert_eq!(price_histogram(&[], 1), Err(StatsError::Empty));
        assert_eq!(price_histogram(&[1], 0), Err(StatsError::ZeroBinWidth));
    }

    #[test]
    fn smoothing_examples() {
        let h = hist(0, &[4, 0, 7, 1]);
        assert_eq!(smooth(&h, 1).unwrap().values, vec![4.0, 0.0, 7.0, 1.0]);
        assert_eq!(smooth(&hist(0, &[0, 3, 0]), 3).unwrap().values, vec![1.0, 1.0, 1.0]);
        let s = smooth(&hist(0, &[1, 2, 3, 2, 1]), 3).unwrap().values;
        let expected = [1.0, 2.0, 7.0 / 3.0, 2.0, 1.0];
        for (a, b) in s.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15, "{s:?}");
        }
        assert_eq!(smooth(&h, 4), Err(StatsError::BadWindow(4)));
        assert_eq!(smooth(&h, 0), Err(StatsError::BadWindow(0)));
    }

    #[test]
    fn mode_examples() {
        let spike = price_histogram(&[5; 40], 1).unwrap();
        assert_eq!(find_modes(&spike, 5, 0.1).unwrap(), vec![5.0]);

        let flat = hist(10, &[4; 9]);
        assert_eq!(find_modes(&flat, 1, 0.1).unwrap(), vec![14.0]);

        // two equal Gaussian bumps centred at 20 and 60
        let counts: Vec<u64> = (0..80)
            .map(|k| {
                let g = |c: f64| 1000.0 * (-((k as f64 - c).powi(2)) / (2.0 * 25.0)).exp();
                (g(20.0) + g(60.0)).round() as u64
            })
            .collect();
        let modes = find_modes(&hist(0, &counts), 5, 0.1).unwrap();
        assert_eq!(modes.len(), 2, "{modes:?}");
        assert!((10.0..30.0).contains(&modes[0]) && (50.0..70.0).contains(&modes[1]));
        assert_eq!(Modality::from_mode_count(modes.len()), Modality::Bimodal);
    }

    #[test]
    fn small_bumps_fall_under_the_prominence_floor() {
        let h = hist(0, &[0, 100, 0, 0, 5, 0, 0]);
        assert_eq!(find_modes(&h, 1, 0.1).unwrap(), vec![1.0]);
        assert_eq!(find_modes(&h, 1, 0.01).unwrap(), vec![1.0, 4.0]);
    }

    #[test]
    fn peak_examples() {
        assert_eq!(peak_price(&price_histogram(&[0; 7], 1).unwrap(), 5).unwrap(), 0);
        assert_eq!(peak_price(&hist(-1, &[1, 5, 1]), 1).unwrap(), 0);
        assert_eq!(peak_price(&hist(-1, &[3, 1, 3]), 1).unwrap(), 1);
        assert_eq!(peak_price(&hist(-3, &[3, 1, 1, 1, 2]), 1).unwrap(), -3);
    }

    #[test]
    fn variance_examples() {
        assert_eq!(variance(&[0, 0, 0]).unwrap(), 0.0);
        assert_eq!(variance(&[-1, 1]).unwrap(), 1.0);
        assert_eq!(variance(&[0, 0, 2, 2]).unwrap(), 1.0);
        assert_eq!(variance(&[]), Err(StatsError::Empty));
    }

    #[test]
    fn kurtosis_examples() {
        assert_eq!(excess_kurtosis(&[-1, -1, 1, 1]).unwrap(), -2.0);
        let mut peaked = vec![-1, 1, -1, 1];
        peaked.extend([0; 20]);
        // m2 = 4/24, m4 = 4/24, so m4/m2^2 - 3 = 3
        assert!((excess_kurtosis(&peaked).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(excess_kurtosis(&[2; 8]), Err(StatsError::ZeroVariance));
        assert!(matches!(
            excess_kurtosis(&[1, 2, 3]),
            Err(StatsError::TooFewSamples { .. })
        ));
    }

    #[test]
    fn kurtosis_of_normal_sample_is_near_zero() {
        use crate::rng::{RandomSource, SimRng};
        // Box-Muller normals scaled to integer prices
        let mut rng = SimRng::from_seed(8);
        let n = 200_000;
        let prices: Vec<i64> = (0..n)
            .map(|_| {
                let u1 = 1.0 - rng.unit();
                let u2 = rng.unit();
                let z = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
                (1000.0 * z).round() as i64
            })
            .collect();
        // sd of the excess-kurtosis estimator is about sqrt(24/n)
        let k = excess_kurtosis(&prices).unwrap();
        assert!(k.abs() < 3.0 * (24.0 / n as f64).sqrt(), "{k}");
    }

    #[test]
    fn domain_wall_examples() {
        assert_eq!(count_domain_walls(&[B; 6]).unwrap(), 0);
        assert_eq!(count_domain_walls(&[B, S, B, S, B, S]).unwrap(), 6);
        assert_eq!(count_domain_walls(&[B, B, S, S, B, B]).unwrap(), 2);
        assert_eq!(count_domain_walls(&[S, B, B, B]).unwrap(), 2);
        assert!(count_domain_walls(&[B]).is_err());
    }

    #[test]
    fn loglog_examples() {
        let xs: Vec<f64> = (1..=100).map(f64::from).collect();
        let inv: Vec<f64> = xs.iter().map(|x| 1.0 / x).collect();
        let fit = fit_loglog(&xs, &inv).unwrap();
        assert!((fit.slope + 1.0).abs() < 1e-9);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);

        let flat = vec![7.0; 100];
        let fit = fit_loglog(&xs, &flat).unwrap();
        assert!(fit.slope.abs() < 1e-9);
        assert_eq!(fit.r_squared, 1.0);

        assert!(matches!(
            fit_loglog(&[1.0, 2.0, 0.0], &[1.0; 3]),
            Err(StatsError::NonPositive(_))
        ));
        assert!(matches!(
            fit_loglog(&[1.0, 2.0], &[1.0; 2]),
            Err(StatsError::TooFewSamples { .. })
        ));
        assert!(matches!(
            fit_loglog(&[2.0; 3], &[1.0, 2.0, 3.0]),
            Err(StatsError::DegenerateAbscissa)
        ));
    }

    #[test]
    fn loglog_with_multiplicative_noise() {
        use crate::rng::{RandomSource, SimRng};
        let mut rng = SimRng::from_seed(21);
        let xs: Vec<f64> = (1..=100).map(f64::from).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|x| 3.0 * x.powf(-0.5) * (1.0 + 0.01 * (2.0 * rng.unit() - 1.0)))
            .collect();
        let fit = fit_loglog(&xs, &ys).unwrap();
        assert!((fit.slope + 0.5).abs() < 0.05, "{fit:?}");
        assert!((fit.intercept - 3f64.ln()).abs() < 0.05);
    }

    #[test]
    fn exp_examples() {
        assert_eq!(exp_transform(&[0]), vec![Ok(1.0)]);
        let v = exp_transform(&[1, -1]);
        assert_eq!(v[0], Ok(std::f64::consts::E));
        assert!((v[1].unwrap() - 1.0 / std::f64::consts::E).abs() < 1e-16);
        let v = exp_transform(&[800, 3, -800]);
        assert_eq!(v[0], Err(PriceOutOfRange { price: 800 }));
        assert!(v[1].is_ok());
        assert_eq!(v[2], Err(PriceOutOfRange { price: -800 }));
    }

    proptest! {
        #[test]
        fn histogram_conserves_mass(prices in prop::collection::vec(-500i64..500, 1..300), w in 1u64..20) {
            let h = price_histogram(&prices, w).unwrap();
            prop_assert_eq!(h.total(), prices.len() as u64);
            prop_assert!(h.counts[0] > 0 && *h.counts.last().unwrap() > 0);
        }

        #[test]
        fn smoothing_conserves_interior_mass(inner in prop::collection::vec(0u64..50, 1..60), half in 0usize..4) {
            // zero-padded edges keep all mass inside the support
            let mut counts = vec![0; half];
            counts.extend(inner);
            counts.extend(vec![0; half]);
            let h = hist(0, &counts);
            let s = smooth(&h, 2 * half + 1).unwrap();
            let total: f64 = s.values.iter().sum();
            prop_assert!((total - h.total() as f64).abs() < 1e-9 * (1.0 + total));
        }

        #[test]
        fn mirroring_mirrors_modes(prices in prop::collection::vec(-60i64..60, 1..400)) {
            let mirrored: Vec<i64> = prices.iter().map(|p| -p).collect();
            let a = find_modes(&price_histogram(&prices, 1).unwrap(), 5, 0.1).unwrap();
            let b = find_modes(&price_histogram(&mirrored, 1).unwrap(), 5, 0.1).unwrap();
            prop_assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(b.iter().rev()) {
                prop_assert!((x + y).abs() < 1e-9, "{:?} vs {:?}", a, b);
            }
        }

        #[test]
        fn domain_walls_are_even(bits in prop::collection::vec(any::<bool>(), 2..200)) {
            let spins: Vec<Spin> = bits.into_iter().map(Spin::from_coin).collect();
            prop_assert_eq!(count_domain_walls(&spins).unwrap() % 2, 0);
        }

        #[test]
        fn variance_ignores_shifts(prices in prop::collection::vec(-1000i64..1000, 1..200), c in -100_000i64..100_000) {
            let shifted: Vec<i64> = prices.iter().map(|p| p + c).collect();
            let a = variance(&prices).unwrap();
            let b = variance(&shifted).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a));
        }

        #[test]
        fn exact_power_laws_are_recovered(exponent in -3.0f64..3.0, scale in 0.01f64..100.0) {
            let xs: Vec<f64> = (1..=40).map(|k| f64::from(k) * 1.7).collect();
            let ys: Vec<f64> = xs.iter().map(|x| scale * x.powf(exponent)).collect();
            let fit = fit_loglog(&xs, &ys).unwrap();
            prop_assert!((fit.slope - exponent).abs() < 1e-9);
            prop_assert!((fit.r_squared - 1.0).abs() < 1e-9);
        }
    }
}
