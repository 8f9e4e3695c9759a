//! Two-sample t-tests, Pearson chi-square, and the special functions they
//! need (log-gamma, regularized incomplete beta and gamma).

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math::{exp, fabs, log, mean, sample_sd, sqrt};
use crate::{Error, Result};

const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = core::f64::consts::PI;
        return log(pi / libm::sin(pi * x)) - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    let t = x + 7.5;
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * log(2.0 * core::f64::consts::PI) + (x + 0.5) * log(t) - t + log(a)
}

const EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;
const MAX_ITER: usize = 10_000;

/// Continued fraction for the incomplete beta function (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if fabs(d) < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if fabs(d) < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if fabs(c) < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if fabs(d) < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if fabs(c) < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if fabs(del - 1.0) < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta function `I_x(a, b)`.
pub fn incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * log(x) + b * log(1.0 - x);
    let front = exp(ln_front);
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Regularized upper incomplete gamma `Q(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let ln_front = -x + a * log(x) - ln_gamma(a);
    if x < a + 1.0 {
        // series for P
        let mut sum = 1.0 / a;
        let mut term = sum;
        let mut ap = a;
        for _ in 0..MAX_ITER {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if fabs(term) < fabs(sum) * EPS {
                break;
            }
        }
        1.0 - sum * exp(ln_front)
    } else {
        // continued fraction for Q
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..=MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if fabs(d) < TINY {
                d = TINY;
            }
            c = b + an / c;
            if fabs(c) < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if fabs(del - 1.0) < EPS {
                break;
            }
        }
        exp(ln_front) * h
    }
}

/// Two-sided p-value of a Student t statistic.
pub fn t_two_sided_p(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    incomplete_beta(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
}

/// Upper-tail p-value of a chi-square statistic.
pub fn chi_square_p(stat: f64, df: f64) -> f64 {
    gamma_q(df / 2.0, stat / 2.0).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    Student,
    Welch,
    ChiSquare,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatTestResult {
    pub feature: String,
    pub kind: TestKind,
    pub mean1: Option<f64>,
    pub mean2: Option<f64>,
    pub sd1: Option<f64>,
    pub sd2: Option<f64>,
    pub n1: usize,
    pub n2: usize,
    pub statistic: f64,
    pub df: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TVariant {
    Student,
    Welch,
}

/// t-test from summary statistics (sample SDs). The statistic is
/// `(mean1 - mean2) / se`.
pub fn t_test_from_moments(m1: f64, s1: f64, n1: usize, m2: f64, s2: f64, n2: usize, variant: TVariant) -> Result<StatTestResult> {
    if n1 < 2 || n2 < 2 {
        return Err(Error::Degenerate("each group needs at least two values".into()));
    }
    let (v1, v2) = (s1 * s1, s2 * s2);
    if v1 == 0.0 && v2 == 0.0 {
        return Err(Error::Degenerate("both groups have zero variance".into()));
    }
    let (a, b) = (n1 as f64, n2 as f64);
    let (se, df, kind) = match variant {
        TVariant::Student => {
            let sp2 = ((a - 1.0) * v1 + (b - 1.0) * v2) / (a + b - 2.0);
            (sqrt(sp2 * (1.0 / a + 1.0 / b)), a + b - 2.0, TestKind::Student)
        }
        TVariant::Welch => {
            let (q1, q2) = (v1 / a, v2 / b);
            let df = (q1 + q2) * (q1 + q2) / (q1 * q1 / (a - 1.0) + q2 * q2 / (b - 1.0));
            (sqrt(q1 + q2), df, TestKind::Welch)
        }
    };
    let t = (m1 - m2) / se;
    Ok(StatTestResult {
        feature: String::new(),
        kind,
        mean1: Some(m1),
        mean2: Some(m2),
        sd1: Some(s1),
        sd2: Some(s2),
        n1,
        n2,
        statistic: t,
        df,
        p_value: t_two_sided_p(t, df),
    })
}

pub fn t_test(group1: &[f64], group2: &[f64], variant: TVariant) -> Result<StatTestResult> {
    if group1.iter().chain(group2).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    t_test_from_moments(mean(group1), sample_sd(group1), group1.len(), mean(group2), sample_sd(group2), group2.len(), variant)
}

/// Pearson chi-square on a 2 x k table given as two rows of counts.
pub fn chi_square(rows: [&[u64]; 2]) -> Result<StatTestResult> {
    let k = rows[0].len();
    if rows[1].len() != k {
        return Err(Error::LengthMismatch(rows[0].len(), rows[1].len()));
    }
    if k < 2 {
        return Err(Error::Degenerate("chi-square needs at least two columns".into()));
    }
    let r: [f64; 2] = [rows[0].iter().sum::<u64>() as f64, rows[1].iter().sum::<u64>() as f64];
    let total = r[0] + r[1];
    let mut stat = 0.0;
    for j in 0..k {
        let c = (rows[0][j] + rows[1][j]) as f64;
        for i in 0..2 {
            let e = r[i] * c / total;
            if !(e > 0.0) {
                return Err(Error::ZeroExpected);
            }
            let d = rows[i][j] as f64 - e;
            stat += d * d / e;
        }
    }
    let df = (k - 1) as f64;
    Ok(StatTestResult {
        feature: String::new(),
        kind: TestKind::ChiSquare,
        mean1: None,
        mean2: None,
        sd1: None,
        sd2: None,
        n1: r[0] as usize,
        n2: r[1] as usize,
        statistic: stat,
        df,
        p_value: chi_square_p(stat, df),
    })
}

/// One feature's comparison between two groups. Numeric features carry both
/// t-test variants; categorical features carry the chi-square test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub feature: String,
    pub student: Option<StatTestResult>,
    pub welch: Option<StatTestResult>,
    pub chi_square: Option<StatTestResult>,
    /// Student and Welch disagree about significance at 0.05.
    pub variants_disagree: bool,
    /// Reason the row has no test, if any.
    pub skipped: Option<String>,
}

impl ComparisonRow {
    /// Welch p for numeric rows, chi-square p for categorical rows.
    pub fn p_value(&self) -> Option<f64> {
        self.welch.as_ref().or(self.chi_square.as_ref()).map(|t| t.p_value)
    }
}

pub fn compare_numeric(feature: &str, g1: &[f64], g2: &[f64]) -> ComparisonRow {
    let name = String::from(feature);
    match (t_test(g1, g2, TVariant::Student), t_test(g1, g2, TVariant::Welch)) {
        (Ok(mut s), Ok(mut w)) => {
            s.feature = name.clone();
            w.feature = name.clone();
            let disagree = (s.p_value < 0.05) != (w.p_value < 0.05);
            ComparisonRow { feature: name, student: Some(s), welch: Some(w), chi_square: None, variants_disagree: disagree, skipped: None }
        }
        (Err(e), _) | (_, Err(e)) => {
            use alloc::string::ToString;
            ComparisonRow { feature: name, student: None, welch: None, chi_square: None, variants_disagree: false, skipped: Some(e.to_string()) }
        }
    }
}

pub fn compare_categorical(feature: &str, g1: &[&str], g2: &[&str]) -> ComparisonRow {
    use alloc::string::ToString;
    let mut levels: Vec<&str> = g1.iter().chain(g2).copied().collect();
    levels.sort_unstable();
    levels.dedup();
    let count = |g: &[&str]| -> Vec<u64> { levels.iter().map(|l| g.iter().filter(|v| *v == l).count() as u64).collect() };
    let (a, b) = (count(g1), count(g2));
    let name = String::from(feature);
    match chi_square([&a, &b]) {
        Ok(mut c) => {
            c.feature = name.clone();
            ComparisonRow { feature: name, student: None, welch: None, chi_square: Some(c), variants_disagree: false, skipped: None }
        }
        Err(e) => ComparisonRow { feature: name, student: None, welch: None, chi_square: None, variants_disagree: false, skipped: Some(e.to_string()) },
    }
}

/// Sort rows by p-value descending; rows without a test go last.
pub fn sort_by_p_descending(rows: &mut [ComparisonRow]) {
    rows.sort_by(|a, b| match (a.p_value(), b.p_value()) {
        (Some(x), Some(y)) => y.total_cmp(&x).then_with(|| a.feature.cmp(&b.feature)),
        (Some(_), None) => core::cmp::Ordering::Less,
        (None, Some(_)) => core::cmp::Ordering::Greater,
        (None, None) => a.feature.cmp(&b.feature),
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_t_value() {
        assert!((t_two_sided_p(2.0, 10.0) - 0.073_388_034_770_740_03).abs() < 1e-10);
    }

    #[test]
    fn gamma_and_beta_identities() {
        assert!((ln_gamma(5.0) - log(24.0)).abs() < 1e-13);
        assert!((ln_gamma(0.5) - 0.5 * log(core::f64::consts::PI)).abs() < 1e-13);
        assert!((incomplete_beta(1.0, 1.0, 0.3) - 0.3).abs() < 1e-14);
        assert!((gamma_q(1.0, 2.0) - exp(-2.0)).abs() < 1e-14);
        // chi-square with 2 df has survival exp(-x/2)
        assert!((chi_square_p(3.0, 2.0) - exp(-1.5)).abs() < 1e-14);
    }

    #[test]
    fn identical_groups() {
        let r = t_test(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], TVariant::Student).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn antisymmetry() {
        let a = [1.0, 2.5, 3.0, 4.2];
        let b = [2.0, 3.5, 5.0, 6.1, 7.0];
        for v in [TVariant::Student, TVariant::Welch] {
            let x = t_test(&a, &b, v).unwrap();
            let y = t_test(&b, &a, v).unwrap();
            assert_eq!(x.statistic, -y.statistic);
            assert_eq!(x.p_value, y.p_value);
        }
    }

    #[test]
    fn degenerate_inputs() {
        assert!(t_test(&[1.0], &[1.0, 2.0], TVariant::Welch).is_err());
        assert!(t_test(&[1.0, 1.0], &[2.0, 2.0], TVariant::Student).is_err());
    }

    #[test]
    fn chi_square_examples() {
        let r = chi_square([&[10, 10], &[10, 10]]).unwrap();
        assert_eq!((r.statistic, r.p_value), (0.0, 1.0));
        let r = chi_square([&[20, 0], &[0, 20]]).unwrap();
        assert!((r.statistic - 40.0).abs() < 1e-12);
        assert!(r.p_value < 1e-9);
        let r = chi_square([&[5, 5, 5], &[5, 5, 5]]).unwrap();
        assert_eq!((r.statistic, r.df), (0.0, 2.0));
        assert_eq!(chi_square([&[0, 5], &[0, 5]]), Err(Error::ZeroExpected));
    }
}
