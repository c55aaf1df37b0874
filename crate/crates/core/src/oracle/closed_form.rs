//! Closed-form constants for the three reference kernels.
//!
//! The one-parameter family uses `Q = √((8 - 7q) q)`. Two of its
//! expressions carry corrections: `σ²_F` has an extra factor `q` in its
//! numerator, and `R₁''` reads `... - (26 + 31Q) q³ ...` over `4 (1-q)² q Q²`.
//! Both agree with the numeric pipeline to rounding.

use serde::{Deserialize, Serialize};

use super::dp::OracleError;
use crate::groupoid::{Generator, MetricKind};
use crate::kernel::KernelFamily;

/// Which reference kernel to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Symmetric {
        #[serde(rename = "N")]
        n: usize,
    },
    OneParameter {
        q: f64,
    },
    Asymmetric,
}

impl Family {
    /// The matching family for a kernel built by one of the named constructors.
    pub fn of_kernel(family: KernelFamily) -> Option<Family> {
        match family {
            KernelFamily::Symmetric { n } => Some(Family::Symmetric { n }),
            KernelFamily::OneParameter { q } => Some(Family::OneParameter { q }),
            KernelFamily::Asymmetric => Some(Family::Asymmetric),
            KernelFamily::Explicit => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricConstants {
    pub gamma: f64,
    pub sigma2: f64,
}

/// `R(1)`, `R'(1)`, `R''(1)` shared by a set of generators.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RGroup {
    pub name: String,
    #[serde(serialize_with = "as_text")]
    pub generators: Vec<Generator>,
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

fn as_text<S: serde::Serializer>(gs: &[Generator], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(gs.iter().map(|g| g.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosedFormCase {
    #[serde(flatten)]
    pub family: Family,
    pub word: MetricConstants,
    pub fenced: MetricConstants,
    pub r_values: Vec<RGroup>,
    #[serde(rename = "Q", skip_serializing_if = "Option::is_none")]
    pub big_q: Option<f64>,
}

/// Closed-form constants in the limits JSON layout plus a family tag.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosedFormLimits {
    #[serde(flatten)]
    pub family: Family,
    pub gamma: f64,
    pub sigma2: f64,
    pub metric: MetricKind,
}

impl ClosedFormCase {
    pub fn constants(&self, metric: MetricKind) -> Option<MetricConstants> {
        match metric {
            MetricKind::Word => Some(self.word),
            MetricKind::Fenced => Some(self.fenced),
            MetricKind::Custom => None,
        }
    }

    pub fn limits(&self, metric: MetricKind) -> Option<ClosedFormLimits> {
        self.constants(metric).map(|c| ClosedFormLimits {
            family: self.family,
            gamma: c.gamma,
            sigma2: c.sigma2,
            metric,
        })
    }

    /// `(R, R', R'')` at `λ = 1` for one generator.
    pub fn r_of(&self, g: &Generator) -> Option<(f64, f64, f64)> {
        self.r_values
            .iter()
            .find(|grp| grp.generators.contains(g))
            .map(|grp| (grp.value, grp.d1, grp.d2))
    }
}

pub fn closed_form(family: Family) -> Result<ClosedFormCase, OracleError> {
    match family {
        Family::Symmetric { n } => symmetric(n),
        Family::OneParameter { q } => one_parameter(q),
        Family::Asymmetric => Ok(asymmetric()),
    }
}

pub fn symmetric_gamma(n: f64) -> f64 {
    (n - 2.0) / (2.0 * (n - 1.0))
}

pub fn symmetric_gamma_fenced(n: f64) -> f64 {
    (n + 1.0) * (n - 2.0) / (6.0 * (n - 1.0))
}

pub fn symmetric_sigma2(n: f64) -> f64 {
    (n * n + 2.0 * n - 4.0) / (4.0 * (n - 1.0).powi(2))
}

pub fn symmetric_sigma2_fenced(n: f64) -> f64 {
    (11.0 * n.powi(5) - 2.0 * n.powi(4) + 15.0 * n.powi(3) - 36.0 * n - 8.0)
        / (180.0 * n * (n - 1.0).powi(2))
}

fn symmetric(n: usize) -> Result<ClosedFormCase, OracleError> {
    if n < 3 {
        return Err(OracleError::OutOfRange(format!(
            "symmetric family needs N >= 3, got {n}"
        )));
    }
    let x = n as f64;
    Ok(ClosedFormCase {
        family: Family::Symmetric { n },
        word: MetricConstants {
            gamma: symmetric_gamma(x),
            sigma2: symmetric_sigma2(x),
        },
        fenced: MetricConstants {
            gamma: symmetric_gamma_fenced(x),
            sigma2: symmetric_sigma2_fenced(x),
        },
        r_values: vec![RGroup {
            name: "R".into(),
            generators: Generator::all(n).collect(),
            value: 1.0 / (x - 1.0),
            d1: 2.0 / (x - 2.0),
            d2: 4.0 * (x * x - 2.0) / (x - 2.0).powi(3),
        }],
        big_q: None,
    })
}

pub fn big_q(q: f64) -> f64 {
    ((8.0 - 7.0 * q) * q).sqrt()
}

pub fn gamma3(q: f64) -> f64 {
    let qq = big_q(q);
    (3.0 * q + (1.0 - 4.0 * q) * qq) / (4.0 * (1.0 - 4.0 * q * q))
}

pub fn gamma3_fenced(q: f64) -> f64 {
    (big_q(q) - q) / (2.0 * (2.0 * q + 1.0))
}

pub fn sigma2_3(q: f64) -> f64 {
    let qq = big_q(q);
    let num = 4.0 * (8.0 + 5.0 * qq) + (68.0 - 56.0 * qq) * q + (500.0 - 101.0 * qq) * q.powi(2)
        - (1471.0 + 64.0 * qq) * q.powi(3)
        + 8.0 * (1.0 + 42.0 * qq) * q.powi(4)
        + 728.0 * q.powi(5);
    num / (8.0 * (1.0 + 2.0 * q).powi(3) * (8.0 - 23.0 * q + 14.0 * q * q))
}

/// `σ²_F` without the correcting factor `q`.
pub fn sigma2_3_fenced_uncorrected(q: f64) -> f64 {
    let qq = big_q(q);
    let num = (32.0 + 4.0 * qq) + (36.0 + 28.0 * qq) * q + (80.0 - 21.0 * qq) * q.powi(2)
        - (199.0 + 30.0 * qq) * q.powi(3)
        + 70.0 * q.powi(4);
    num / (2.0 * (1.0 + 2.0 * q).powi(3) * qq * qq)
}

pub fn sigma2_3_fenced(q: f64) -> f64 {
    q * sigma2_3_fenced_uncorrected(q)
}

/// `[(R₁, R₁', R₁''), (R₂, ...), (R₃, ...)]` at `λ = 1`.
pub fn one_parameter_r_values(q: f64) -> [(f64, f64, f64); 3] {
    let qq = big_q(q);
    let r1 = 0.5;
    let r2 = (3.0 * q - qq) / (2.0 * (2.0 * q - 1.0));
    let r3 = (q - 2.0 + qq) / (2.0 * (2.0 * q - 1.0));
    let r1p = (3.0 * q + 2.0 + qq) / (2.0 * (qq - q));
    let r2p = 2.0 * (q + 1.0) / qq;
    let r3p = (2.0 * qq + q * (qq - 6.0 + q * (5.0 - 4.0 * q - 4.0 * qq)))
        / (q * (2.0 * q - 1.0) * (qq + 7.0 * q - 8.0));
    let r1pp = (4.0 * qq + 16.0 * (2.0 + qq) * q + 2.0 * (42.0 + 19.0 * qq) * q.powi(2)
        - (26.0 + 31.0 * qq) * q.powi(3)
        - 3.0 * (53.0 + 4.0 * qq) * q.powi(4)
        + 84.0 * q.powi(5))
        / (4.0 * (1.0 - q).powi(2) * q * qq * qq);
    let r2pp = (8.0 * (3.0 + qq) + (25.0 * qq - 12.0) * q + (49.0 + 4.0 * qq) * q.powi(2)
        - 4.0 * (9.0 + 7.0 * qq) * q.powi(3)
        - 16.0 * q.powi(4))
        / ((1.0 - q) * qq.powi(3));
    let r3pp = (-16.0 * (1.0 + qq)
        + (48.0 - 34.0 * qq) * q
        + 6.0 * (23.0 * qq - 43.0) * q.powi(2)
        + 2.0 * (329.0 + 18.0 * qq) * q.powi(3)
        - (176.0 + 137.0 * qq) * q.powi(4)
        + (28.0 * qq - 541.0) * q.powi(5)
        + 300.0 * q.powi(6))
        / (2.0 * (1.0 - q).powi(2) * (2.0 * q - 1.0) * qq.powi(3));
    [(r1, r1p, r1pp), (r2, r2p, r2pp), (r3, r3p, r3pp)]
}

fn pairs(list: &[(usize, usize)]) -> Vec<Generator> {
    list.iter()
        .flat_map(|&(i, j)| [Generator::arc(i, j, 1), Generator::arc(i, j, -1)])
        .collect()
}

fn one_parameter(q: f64) -> Result<ClosedFormCase, OracleError> {
    if !(q > 0.0 && q < 0.5) {
        return Err(OracleError::OutOfRange(format!(
            "q = {q} must lie in (0, 1/2)"
        )));
    }
    let members = [
        pairs(&[(2, 1), (2, 3)]),
        pairs(&[(1, 2), (3, 2)]),
        pairs(&[(1, 3), (3, 1)]),
    ];
    let r_values = one_parameter_r_values(q)
        .into_iter()
        .zip(members)
        .enumerate()
        .map(|(idx, ((value, d1, d2), generators))| RGroup {
            name: format!("R{}", idx + 1),
            generators,
            value,
            d1,
            d2,
        })
        .collect();
    Ok(ClosedFormCase {
        family: Family::OneParameter { q },
        word: MetricConstants {
            gamma: gamma3(q),
            sigma2: sigma2_3(q),
        },
        fenced: MetricConstants {
            gamma: gamma3_fenced(q),
            sigma2: sigma2_3_fenced(q),
        },
        r_values,
        big_q: Some(big_q(q)),
    })
}

/// Reference values for the asymmetric kernel, truncated to six significant
/// digits: `(i, j, k, r, d, v)` with `d = R'(1)` and `v = R''(1)`.
pub const ASYMMETRIC_TABLE: [(usize, usize, i64, f64, f64, f64); 12] = [
    (2, 1, 1, 0.591572, 1.36978, 10.3365),
    (2, 3, 1, 0.404666, 1.37284, 12.8916),
    (2, 1, -1, 0.388890, 2.05937, 26.2278),
    (2, 3, -1, 0.579542, 2.69097, 32.1490),
    (1, 2, 1, 0.769190, 1.44102, 9.45100),
    (3, 2, 1, 0.791039, 1.71828, 13.7182),
    (1, 2, -1, 0.305398, 1.31219, 15.3088),
    (3, 2, -1, 0.245890, 0.991008, 11.6415),
    (1, 3, 1, 0.386687, 1.56411, 15.5010),
    (3, 1, 1, 0.538119, 1.99059, 18.8416),
    (1, 3, -1, 0.387184, 2.01524, 26.1337),
    (3, 1, -1, 0.300936, 1.19855, 14.3857),
];

pub const ASYMMETRIC_WORD: MetricConstants = MetricConstants {
    gamma: 0.272913,
    sigma2: 0.587598,
};
pub const ASYMMETRIC_FENCED: MetricConstants = MetricConstants {
    gamma: 0.334211,
    sigma2: 0.916276,
};

fn asymmetric() -> ClosedFormCase {
    ClosedFormCase {
        family: Family::Asymmetric,
        word: ASYMMETRIC_WORD,
        fenced: ASYMMETRIC_FENCED,
        r_values: ASYMMETRIC_TABLE
            .iter()
            .map(|&(i, j, k, r, d, v)| {
                let g = Generator::arc(i, j, k);
                RGroup {
                    name: g.to_string(),
                    generators: vec![g],
                    value: r,
                    d1: d,
                    d2: v,
                }
            })
            .collect(),
        big_q: None,
    }
}

/// Location and value of a stated maximum over `q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StatedMaximum {
    pub q: f64,
    pub value: f64,
}

pub fn gamma3_max() -> StatedMaximum {
    StatedMaximum {
        q: 0.25,
        value: 0.25,
    }
}

pub fn gamma3_fenced_max() -> StatedMaximum {
    let s6 = 6f64.sqrt();
    StatedMaximum {
        q: (8.0 - s6) / 29.0,
        value: 2.0 / 23.0 * (2.0 * s6 - 1.0),
    }
}

pub fn sigma2_3_max() -> StatedMaximum {
    StatedMaximum {
        q: 0.25,
        value: 11.0 / 16.0,
    }
}

/// Stated to six digits only.
pub fn sigma2_3_fenced_max() -> StatedMaximum {
    StatedMaximum {
        q: 0.00205319,
        value: 2.01584,
    }
}

/// Golden-section search for a maximum of a unimodal `f` on `[a, b]`.
pub fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> StatedMaximum {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    let q = 0.5 * (a + b);
    StatedMaximum { q, value: f(q) }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_three() {
        let c = closed_form(Family::Symmetric { n: 3 }).unwrap();
        assert_eq!(c.word.gamma, 0.25);
        assert_eq!(c.word.sigma2, 11.0 / 16.0);
        assert!((c.fenced.gamma - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(c.r_of(&Generator::arc(3, 1, -1)), Some((0.5, 2.0, 28.0)));
        assert!(closed_form(Family::Symmetric { n: 2 }).is_err());
    }

    #[test]
    fn one_parameter_quarter_is_symmetric() {
        let c = closed_form(Family::OneParameter { q: 0.25 }).unwrap();
        let s = closed_form(Family::Symmetric { n: 3 }).unwrap();
        assert!((c.word.gamma - s.word.gamma).abs() < 1e-15);
        assert!((c.word.sigma2 - s.word.sigma2).abs() < 1e-14);
        assert!((c.fenced.gamma - s.fenced.gamma).abs() < 1e-15);
        assert!(
            (c.fenced.sigma2 - s.fenced.sigma2).abs() < 1e-14,
            "{} vs {}",
            c.fenced.sigma2,
            s.fenced.sigma2
        );
        for grp in &c.r_values {
            assert!((grp.value - 0.5).abs() < 1e-15);
            assert!((grp.d1 - 2.0).abs() < 1e-13);
            assert!((grp.d2 - 28.0).abs() < 1e-11, "{} {}", grp.name, grp.d2);
        }
        assert!(closed_form(Family::OneParameter { q: 0.6 }).is_err());
    }

    #[test]
    fn stated_maxima_are_local_maxima() {
        for (f, m) in [
            (gamma3 as fn(f64) -> f64, gamma3_max()),
            (gamma3_fenced, gamma3_fenced_max()),
            (sigma2_3, sigma2_3_max()),
        ] {
            assert!((f(m.q) - m.value).abs() < 1e-14);
            let found = golden_max(f, 0.01, 0.49, 1e-10);
            assert!((found.q - m.q).abs() < 1e-6, "{} vs {}", found.q, m.q);
        }
    }

    #[test]
    fn json_has_family_tag() {
        let c = closed_form(Family::OneParameter { q: 0.1 }).unwrap();
        let v = serde_json::to_value(&c).unwrap();
        assert_eq!(v["family"], "one_parameter");
        assert!(v["Q"].as_f64().is_some());
        let lim = serde_json::to_value(c.limits(MetricKind::Word).unwrap()).unwrap();
        assert_eq!(lim["metric"], "word");
        assert_eq!(lim["family"], "one_parameter");
        let fam: Family = serde_json::from_str(r#"{"family":"symmetric","N":4}"#).unwrap();
        assert_eq!(fam, Family::Symmetric { n: 4 });
    }
}
