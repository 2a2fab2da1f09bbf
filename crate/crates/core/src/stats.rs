//! Small numeric-statistics helpers for goodness-of-fit checks.
//!
//! The chi-square survival function is computed through the regularized
//! incomplete gamma function (series expansion for `x < a + 1`, continued
//! fraction otherwise). Pulling in a distributions crate for two functions
//! was not worth the dependency tree.

/// ln Γ(x) via the Lanczos approximation (g = 7, n = 9).
#[allow(clippy::excessive_precision)] // canonical published coefficients
pub fn ln_gamma(x: f64) -> f64 {
    const COEFFS: [f64; 8] = [
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    if x < 0.5 {
        // Reflection for small arguments.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = 0.99999999999980993;
    for (i, &c) in COEFFS.iter().enumerate() {
        acc += c / (x + i as f64 + 1.0);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized lower incomplete gamma P(a, x).
pub fn gamma_p(a: f64, x: f64) -> f64 {
    assert!(a > 0.0 && x >= 0.0, "gamma_p domain");
    if x == 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        // Series representation.
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut n = a;
        for _ in 0..500 {
            n += 1.0;
            term *= x / n;
            sum += term;
            if term.abs() < sum.abs() * 1e-16 {
                break;
            }
        }
        (sum.ln() + a * x.ln() - x - ln_gamma(a)).exp()
    } else {
        1.0 - gamma_q_cf(a, x)
    }
}

/// Regularized upper incomplete gamma Q(a, x) by Lentz's continued fraction.
fn gamma_q_cf(a: f64, x: f64) -> f64 {
    let tiny = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (a * x.ln() - x - ln_gamma(a)).exp() * h
}

/// Survival function of the chi-square distribution with `dof` degrees of freedom.
pub fn chi_square_sf(stat: f64, dof: usize) -> f64 {
    assert!(dof > 0, "chi_square_sf needs dof > 0");
    if stat <= 0.0 {
        return 1.0;
    }
    1.0 - gamma_p(dof as f64 / 2.0, stat / 2.0)
}

/// Pearson chi-square statistic and p-value for observed vs expected counts.
/// Cells with zero expectation are skipped.
pub fn chi_square_gof(observed: &[f64], expected: &[f64]) -> (f64, f64) {
    assert_eq!(observed.len(), expected.len());
    let mut stat = 0.0;
    let mut cells = 0usize;
    for (&o, &e) in observed.iter().zip(expected) {
        if e > 0.0 {
            stat += (o - e) * (o - e) / e;
            cells += 1;
        }
    }
    let dof = cells.saturating_sub(1).max(1);
    (stat, chi_square_sf(stat, dof))
}

/// Independence test over an r x c contingency table of counts.
pub fn chi_square_independence(table: &[Vec<f64>]) -> (f64, f64) {
    let rows = table.len();
    let cols = table[0].len();
    let row_tot: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
    let col_tot: Vec<f64> = (0..cols).map(|c| table.iter().map(|r| r[c]).sum()).collect();
    let total: f64 = row_tot.iter().sum();
    let mut stat = 0.0;
    let mut dropped_rows = 0usize;
    let mut dropped_cols = 0usize;
    for (i, row) in table.iter().enumerate() {
        if row_tot[i] == 0.0 {
            dropped_rows += 1;
            continue;
        }
        for (&o, &ct) in row.iter().zip(&col_tot) {
            if ct == 0.0 {
                continue;
            }
            let e = row_tot[i] * ct / total;
            stat += (o - e) * (o - e) / e;
        }
    }
    dropped_cols += col_tot.iter().filter(|&&ct| ct == 0.0).count();
    let dof = (rows - dropped_rows - 1).max(1) * (cols - dropped_cols - 1).max(1);
    (stat, chi_square_sf(stat, dof))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_gamma_known() {
        assert!((ln_gamma(1.0)).abs() < 1e-12);
        assert!((ln_gamma(2.0)).abs() < 1e-12);
        assert!((ln_gamma(5.0) - 24.0f64.ln()).abs() < 1e-10);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-10);
    }

    #[test]
    fn chi_square_sf_dof2_is_exponential() {
        // With two degrees of freedom the survival function is exp(-x/2).
        for &x in &[0.1, 1.0, 3.0, 10.0] {
            let want = (-x / 2.0f64).exp();
            assert!((chi_square_sf(x, 2) - want).abs() < 1e-10, "x={x}");
        }
    }

    #[test]
    fn chi_square_sf_quantiles() {
        // Standard table values.
        assert!((chi_square_sf(3.841458820694124, 1) - 0.05).abs() < 1e-9);
        assert!((chi_square_sf(16.918977604620448, 9) - 0.05).abs() < 1e-9);
    }
}
