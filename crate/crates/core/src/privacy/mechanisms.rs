use super::curve::RdpCurve;
use crate::error::{invalid, Result};

/// Gaussian mechanism with L2 sensitivity `sensitivity` and noise standard
/// deviation `sigma`: `ε(α) = α·c²/(2σ²)`.
pub fn rdp_gaussian(sensitivity: f64, sigma: f64, orders: &[f64]) -> Result<RdpCurve> {
    if !(sigma > 0.0) {
        return Err(invalid(format!("sigma must be positive, got {sigma}")));
    }
    if !(sensitivity >= 0.0) {
        return Err(invalid(format!("sensitivity must be non-negative, got {sensitivity}")));
    }
    let k = sensitivity * sensitivity / (2.0 * sigma * sigma);
    RdpCurve::new(orders.to_vec(), orders.iter().map(|a| a * k).collect())
}

/// One Poisson-subsampled Gaussian step with sampling rate `q` and noise
/// multiplier `z`, evaluated exactly at integer orders:
///
/// `ε(α) = ln( Σ_k C(α,k) (1−q)^{α−k} q^k exp(k(k−1)/(2z²)) ) / (α−1)`
///
/// The sum is accumulated in log space.
pub fn rdp_subsampled_gaussian(q: f64, z: f64, orders: &[f64]) -> Result<RdpCurve> {
    if !(0.0..=1.0).contains(&q) {
        return Err(invalid(format!("sampling rate must lie in [0, 1], got {q}")));
    }
    if !(z > 0.0) {
        return Err(invalid(format!("noise multiplier must be positive, got {z}")));
    }
    let mut eps = Vec::with_capacity(orders.len());
    for &alpha in orders {
        if alpha < 2.0 || alpha.fract() != 0.0 {
            return Err(invalid(format!(
                "subsampled Gaussian accounting needs integer orders >= 2, got {alpha}"
            )));
        }
        eps.push(if q == 0.0 {
            0.0
        } else {
            log_binomial_moment(q, z, alpha as u64) / (alpha - 1.0)
        });
    }
    RdpCurve::new(orders.to_vec(), eps)
}

fn log_binomial_moment(q: f64, z: f64, alpha: u64) -> f64 {
    let ln_q = q.ln();
    let ln_1mq = (-q).ln_1p();
    let inv_two_z2 = 1.0 / (2.0 * z * z);
    let mut terms = Vec::with_capacity(alpha as usize + 1);
    let mut ln_binom = 0.0f64;
    for k in 0..=alpha {
        if k > 0 {
            ln_binom += ((alpha - k + 1) as f64).ln() - (k as f64).ln();
        }
        let rest = alpha - k;
        // 0·ln(0) terms vanish; a zero-probability factor removes the term.
        let tail = if rest == 0 { 0.0 } else { rest as f64 * ln_1mq };
        let head = if k == 0 { 0.0 } else { k as f64 * ln_q };
        if tail == f64::NEG_INFINITY || head == f64::NEG_INFINITY {
            continue;
        }
        let kf = k as f64;
        terms.push(ln_binom + tail + head + kf * (kf - 1.0) * inv_two_z2);
    }
    log_sum_exp(&terms)
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Exponential mechanism with selection budget `ε_select`: it is
/// `ε²/8`-zCDP, i.e. `ε(α) = α·ε²/8` at every order.
pub fn rdp_exponential_mechanism(epsilon_select: f64, orders: &[f64]) -> Result<RdpCurve> {
    if !(epsilon_select > 0.0) {
        return Err(invalid(format!(
            "selection budget must be positive, got {epsilon_select}"
        )));
    }
    let rho = epsilon_select * epsilon_select / 8.0;
    RdpCurve::new(orders.to_vec(), orders.iter().map(|a| a * rho).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::privacy::default_orders;

    fn at(curve: &RdpCurve, alpha: f64) -> f64 {
        let i = curve.orders().iter().position(|&a| a == alpha).unwrap();
        curve.epsilons()[i]
    }

    #[test]
    fn gaussian_formula() {
        assert_eq!(at(&rdp_gaussian(1.0, 1.0, &[2.0]).unwrap(), 2.0), 1.0);
        assert_eq!(at(&rdp_gaussian(2.0, 2.0, &[4.0]).unwrap(), 4.0), 2.0);
        assert!(rdp_gaussian(0.0, 1.0, &default_orders())
            .unwrap()
            .epsilons()
            .iter()
            .all(|&e| e == 0.0));
        assert!(rdp_gaussian(1.0, 0.0, &[2.0]).is_err());
    }

    #[test]
    fn subsampled_edge_rates() {
        assert_eq!(at(&rdp_subsampled_gaussian(1.0, 1.0, &[2.0]).unwrap(), 2.0), 1.0);
        let zero = rdp_subsampled_gaussian(0.0, 0.7, &default_orders()).unwrap();
        assert!(zero.epsilons().iter().all(|&e| e == 0.0));
        let q = 0.01f64;
        let expected = (q * q * (std::f64::consts::E - 1.0)).ln_1p();
        let got = at(&rdp_subsampled_gaussian(q, 1.0, &[2.0]).unwrap(), 2.0);
        assert!((got - expected).abs() < 1e-15);
        assert!((got - 1.7181e-4).abs() < 1e-8);
    }

    #[test]
    fn subsampled_matches_high_precision_oracle() {
        // Frozen from a 50-digit evaluation of the binomial sum.
        let cases = [
            (0.05, 0.8, 3.0, 0.019_761_366_108_984_083),
            (0.05, 0.8, 10.0, 4.483_925_079_896_886_8),
            (0.05, 0.8, 64.0, 46.956_716_420_516_575),
            (0.02, 1.5, 256.0, 52.961_524_616_772_789),
            (0.3, 2.0, 128.0, 14.786_547_094_852_638),
        ];
        for (q, z, a, want) in cases {
            let got = at(&rdp_subsampled_gaussian(q, z, &[a]).unwrap(), a);
            assert!(((got - want) / want).abs() < 1e-10, "q={q} z={z} a={a}: {got} vs {want}");
        }
    }

    #[test]
    fn full_rate_equals_plain_gaussian() {
        let orders = default_orders();
        for z in [0.3, 1.0, 4.0] {
            let sub = rdp_subsampled_gaussian(1.0, z, &orders).unwrap();
            let plain = rdp_gaussian(1.0, z, &orders).unwrap();
            for (a, b) in sub.epsilons().iter().zip(plain.epsilons()) {
                assert!((a - b).abs() <= 1e-12 * b.max(1.0), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn subsampled_rejects_bad_input() {
        assert!(rdp_subsampled_gaussian(1.5, 1.0, &[2.0]).is_err());
        assert!(rdp_subsampled_gaussian(-0.1, 1.0, &[2.0]).is_err());
        assert!(rdp_subsampled_gaussian(0.1, 0.0, &[2.0]).is_err());
        assert!(rdp_subsampled_gaussian(0.1, 1.0, &[2.5]).is_err());
    }

    #[test]
    fn exponential_mechanism_formula() {
        assert_eq!(at(&rdp_exponential_mechanism(1.0, &[2.0]).unwrap(), 2.0), 0.25);
        let v = at(&rdp_exponential_mechanism(0.3, &[8.0]).unwrap(), 8.0);
        assert!((v - 0.09).abs() < 1e-15);
        let tiny = rdp_exponential_mechanism(1e-9, &default_orders()).unwrap();
        assert!(tiny.epsilons().iter().all(|&e| e < 1e-15));
        assert!(rdp_exponential_mechanism(0.0, &[2.0]).is_err());
    }
}
