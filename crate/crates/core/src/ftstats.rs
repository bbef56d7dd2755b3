//! Track densities, the GQR efficiency factor, a Kolmogorov-Smirnov test of
//! per-image counts against a Poisson law, and the standardless age
//! equation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// IUPAC spontaneous fission decay constant of 238U, per year.
pub const LAMBDA_F_DEFAULT: f64 = 8.5e-17;

/// Induced fissions per uranium atom for the reference irradiation.
pub const R_U_DEFAULT: f64 = 3.2e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackDensity {
    /// total tracks
    pub n: u64,
    pub images: usize,
    /// cm^2
    pub area_per_image: f64,
    /// tracks / cm^2
    pub rho: f64,
    /// one Poisson standard deviation of `rho`; 0 when `n == 0`
    pub sigma: f64,
    pub per_image_mean: f64,
    pub per_image_sigma: f64,
}

impl TrackDensity {
    /// Density from a pooled count.
    pub fn from_total(n: u64, images: usize, area_per_image: f64) -> Result<Self> {
        if images == 0 {
            return Err(Error::InvalidParameter("at least one image is required".into()));
        }
        if !(area_per_image.is_finite() && area_per_image > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "area per image must be positive, got {area_per_image}"
            )));
        }
        let nf = n as f64;
        let rho = nf / (images as f64 * area_per_image);
        let (sigma, per_image_sigma) = if n == 0 {
            (0.0, 0.0)
        } else {
            (rho / nf.sqrt(), nf.sqrt() / images as f64)
        };
        Ok(Self {
            n,
            images,
            area_per_image,
            rho,
            sigma,
            per_image_mean: nf / images as f64,
            per_image_sigma,
        })
    }
}

pub fn track_density(counts: &[u64], area_per_image: f64) -> Result<TrackDensity> {
    TrackDensity::from_total(counts.iter().sum(), counts.len(), area_per_image)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GqrResult {
    pub gqr: f64,
    pub sigma: f64,
    pub n_ed: u64,
    pub n_is: u64,
}

/// `GQR = rho_ED / rho_IS` with `sigma / GQR = sqrt(1/N_ED + 1/N_IS)`.
///
/// Both densities must share the per-image area, so the ratio reduces to
/// the ratio of per-image means.
pub fn compute_gqr(ed: &TrackDensity, is: &TrackDensity) -> Result<GqrResult> {
    let rel = (ed.area_per_image - is.area_per_image).abs() / ed.area_per_image.max(is.area_per_image);
    if rel > 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "external detector and internal surface areas differ ({} vs {} cm^2)",
            ed.area_per_image, is.area_per_image
        )));
    }
    if ed.n == 0 || is.n == 0 {
        return Err(Error::UndefinedRatio(format!(
            "GQR needs tracks on both surfaces (N_ED = {}, N_IS = {})",
            ed.n, is.n
        )));
    }
    let gqr = ed.rho / is.rho;
    let sigma = gqr * (1.0 / ed.n as f64 + 1.0 / is.n as f64).sqrt();
    Ok(GqrResult {
        gqr,
        sigma,
        n_ed: ed.n,
        n_is: is.n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub d: f64,
    pub p_value: f64,
    /// sample mean used as the Poisson rate
    pub rate: f64,
    pub n: usize,
}

/// `P(X <= k)` for `k = 0..=max` under Poisson(`rate`).
pub fn poisson_cdf_table(rate: f64, max: u64) -> Vec<f64> {
    let ln_rate = rate.ln();
    let mut ln_fact = 0.0;
    let mut acc = 0.0;
    (0..=max)
        .map(|k| {
            if k > 0 {
                ln_fact += (k as f64).ln();
            }
            acc += (k as f64 * ln_rate - rate - ln_fact).exp();
            acc.min(1.0)
        })
        .collect()
}

/// Asymptotic Kolmogorov survival function `P(K > x)`.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.18 {
        // Jacobi theta form converges quickly for small x
        let c = std::f64::consts::PI * std::f64::consts::PI / (8.0 * x * x);
        let mut cdf = 0.0;
        for k in 1..=100 {
            let m = (2 * k - 1) as f64;
            let term = (-m * m * c).exp();
            cdf += term;
            if term <= 1e-8 * cdf {
                break;
            }
        }
        let cdf = (2.0 * std::f64::consts::PI).sqrt() / x * cdf;
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    let mut sf = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = 2.0 * (-2.0 * kf * kf * x * x).exp();
        sf += if k % 2 == 1 { term } else { -term };
        if term <= 1e-8 * sf.abs() {
            break;
        }
    }
    sf.clamp(0.0, 1.0)
}

/// One-sample two-sided KS test of `counts` against Poisson(sample mean).
///
/// `d` is taken over the integer support, where both CDFs jump; the
/// p-value uses the asymptotic Kolmogorov law at `sqrt(n) * d`, which is
/// conservative for discrete data.
pub fn poisson_ks(counts: &[u64]) -> Result<KsResult> {
    let n = counts.len();
    if n < 5 {
        return Err(Error::InvalidParameter(format!(
            "the KS test needs at least 5 counts, got {n}"
        )));
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::DegenerateSample("every count is zero, the Poisson rate is 0".into()));
    }
    let rate = total as f64 / n as f64;
    let max = *counts.iter().max().expect("n >= 5");

    let mut freq = vec![0u64; max as usize + 1];
    for &c in counts {
        freq[c as usize] += 1;
    }
    let cdf = poisson_cdf_table(rate, max);
    let mut below = 0u64;
    let mut d = 0.0f64;
    for k in 0..=max as usize {
        below += freq[k];
        d = d.max((below as f64 / n as f64 - cdf[k]).abs());
    }
    let p_value = kolmogorov_sf((n as f64).sqrt() * d);
    Ok(KsResult { d, p_value, rate, n })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgeParams {
    /// total decay constant of 238U, 1/a
    pub lambda_total: f64,
    /// spontaneous fission decay constant, 1/a
    pub lambda_f: f64,
    /// isotopic abundance of 238U
    pub c238: f64,
    /// induced fissions per uranium atom
    pub r_u: f64,
    pub gqr: f64,
    /// spontaneous track density, tracks/cm^2
    pub rho_s: f64,
    /// induced track density, tracks/cm^2
    pub rho_i: f64,
}

impl AgeParams {
    /// Parameters with the default `lambda_f` and `r_u`.
    pub fn with_defaults(lambda_total: f64, c238: f64, gqr: f64, rho_s: f64, rho_i: f64) -> Self {
        Self {
            lambda_total,
            lambda_f: LAMBDA_F_DEFAULT,
            c238,
            r_u: R_U_DEFAULT,
            gqr,
            rho_s,
            rho_i,
        }
    }

    fn validate(&self) -> Result<()> {
        let positive = [
            ("lambda", self.lambda_total),
            ("lambda_f", self.lambda_f),
            ("c238", self.c238),
            ("r_u", self.r_u),
            ("gqr", self.gqr),
            ("rho_i", self.rho_i),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.rho_s.is_finite() && self.rho_s >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "rho_s must be non-negative, got {}",
                self.rho_s
            )));
        }
        Ok(())
    }

    /// Argument `x` of `ln(1 + x)` in the age equation.
    pub fn log_argument(&self) -> f64 {
        self.gqr * (self.rho_s / self.rho_i) * (self.lambda_total * self.r_u) / (self.lambda_f * self.c238)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgeResult {
    pub years: f64,
    pub ma: f64,
    pub params: AgeParams,
}

/// `t = ln(1 + GQR (rho_s / rho_i) lambda R_U / (lambda_f C238)) / lambda`.
pub fn ft_age(params: &AgeParams) -> Result<AgeResult> {
    params.validate()?;
    let x = params.log_argument();
    if x.is_nan() || x <= -1.0 {
        return Err(Error::InvalidParameter(format!("age equation argument {x} is out of range")));
    }
    let years = x.ln_1p() / params.lambda_total;
    Ok(AgeResult {
        years,
        ma: years / 1e6,
        params: *params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poisson_sqrt_n() {
        let d = TrackDensity::from_total(100, 1, 1.0).unwrap();
        assert_eq!((d.rho, d.sigma), (100.0, 10.0));
    }

    #[test]
    fn per_image_table_values() {
        // ISODATA mica and manual apatite rows
        let mica = TrackDensity::from_total(2136, 49, 1.0).unwrap();
        assert_eq!(format!("{:.1} {:.1}", mica.per_image_mean, mica.per_image_sigma), "43.6 0.9");
        let apatite = TrackDensity::from_total(3114, 30, 1.0).unwrap();
        assert_eq!(format!("{:.1} {:.1}", apatite.per_image_mean, apatite.per_image_sigma), "103.8 1.9");
    }

    #[test]
    fn density_from_counts() {
        let d = track_density(&[3, 4, 5], 0.5).unwrap();
        assert_eq!((d.n, d.images), (12, 3));
        assert_eq!(d.rho, 8.0);
        assert!(matches!(track_density(&[1], 0.0), Err(Error::InvalidParameter(_))));
        assert!(matches!(track_density(&[], 1.0), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn gqr_identity_and_errors() {
        let a = TrackDensity::from_total(500, 10, 2e-3).unwrap();
        let g = compute_gqr(&a, &a).unwrap();
        assert_eq!(g.gqr, 1.0);
        let other_area = TrackDensity::from_total(500, 10, 3e-3).unwrap();
        assert!(matches!(compute_gqr(&a, &other_area), Err(Error::InvalidParameter(_))));
        let none = TrackDensity::from_total(0, 10, 2e-3).unwrap();
        assert!(matches!(compute_gqr(&a, &none), Err(Error::UndefinedRatio(_))));
    }

    #[test]
    fn ks_constant_sample() {
        let r = poisson_ks(&[5, 5, 5, 5, 5]).unwrap();
        let cdf = poisson_cdf_table(5.0, 5);
        let expected = cdf[4].max(1.0 - cdf[5]);
        assert!((r.d - expected).abs() < 1e-15);
        assert_eq!(r.rate, 5.0);
    }

    #[test]
    fn ks_rejects_bad_input() {
        assert!(matches!(poisson_ks(&[1, 2, 3]), Err(Error::InvalidParameter(_))));
        assert!(matches!(poisson_ks(&[0; 8]), Err(Error::DegenerateSample(_))));
    }

    #[test]
    fn kolmogorov_reference_points() {
        // P(K > x) at the usual critical values
        assert!((kolmogorov_sf(1.3581) - 0.05).abs() < 1e-4);
        assert!((kolmogorov_sf(1.6276) - 0.01).abs() < 1e-4);
        assert!((kolmogorov_sf(1.2238) - 0.10).abs() < 1e-4);
        assert_eq!(kolmogorov_sf(0.0), 1.0);
        // both series agree where they meet
        let below = kolmogorov_sf(1.18 - 1e-12);
        let above = kolmogorov_sf(1.18);
        assert!((below - above).abs() < 1e-7);
    }

    #[test]
    fn cdf_table_sums_to_one() {
        let t = poisson_cdf_table(44.0, 400);
        assert!((t[400] - 1.0).abs() < 1e-12);
        assert!(t.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn zero_spontaneous_density_gives_zero_age() {
        let p = AgeParams::with_defaults(1.55125e-10, 0.992745, 0.57, 0.0, 3.7e5);
        assert_eq!(ft_age(&p).unwrap().years, 0.0);
    }

    #[test]
    fn age_rejects_nonpositive_parameters() {
        let p = AgeParams::with_defaults(0.0, 0.99, 0.57, 1e5, 3.7e5);
        assert!(matches!(ft_age(&p), Err(Error::InvalidParameter(_))));
        let p = AgeParams::with_defaults(1.55e-10, 0.99, 0.57, -1.0, 3.7e5);
        assert!(matches!(ft_age(&p), Err(Error::InvalidParameter(_))));
    }
}
