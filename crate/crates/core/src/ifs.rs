//! Homogeneous planar IFS `f_i(w) = λ w + a_i` with probability weights,
//! cylinder algebra, and closed-form dimensions under strong separation.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Complex numbers, identified with the plane via `<z, w> = Re(z conj(w))`.
pub type ComplexVal = Complex64;

/// Tolerance for algebraic identities.
pub const ALGEBRAIC_TOL: f64 = 1e-12;

/// The inner product `<z, w> = Re(z conj(w))`.
#[inline]
pub fn inner(z: ComplexVal, w: ComplexVal) -> f64 {
    z.re * w.re + z.im * w.im
}

/// A closed disk in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disk {
    pub center: ComplexVal,
    pub radius: f64,
}

impl Disk {
    pub fn contains(&self, w: ComplexVal, tol: f64) -> bool {
        (w - self.center).norm() <= self.radius + tol
    }

    /// Signed gap between two disks (negative when they overlap).
    pub fn gap(&self, other: &Disk) -> f64 {
        (self.center - other.center).norm() - self.radius - other.radius
    }
}

/// A validated homogeneous IFS together with its probability vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IfsSystem {
    lambda: ComplexVal,
    r: f64,
    alpha: ComplexVal,
    translations: Vec<ComplexVal>,
    probs: Vec<f64>,
    barycenter: ComplexVal,
    disk: Disk,
}

impl IfsSystem {
    pub fn lambda(&self) -> ComplexVal {
        self.lambda
    }

    /// Contraction modulus `|λ|`.
    pub fn r(&self) -> f64 {
        self.r
    }

    /// Rotation part `λ / |λ|`.
    pub fn alpha(&self) -> ComplexVal {
        self.alpha
    }

    pub fn translations(&self) -> &[ComplexVal] {
        &self.translations
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Alphabet size `|Λ|`.
    pub fn len(&self) -> usize {
        self.translations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.translations.is_empty()
    }

    /// Mean of the self-similar measure, `(Σ p_i a_i) / (1 - λ)`.
    pub fn barycenter(&self) -> ComplexVal {
        self.barycenter
    }

    /// Invariant disk: `f_i(D) ⊆ D` for every map, hence the attractor lies in `D`.
    pub fn bounding_disk(&self) -> Disk {
        self.disk
    }

    /// Apply the single map `f_i`.
    #[inline]
    pub fn apply(&self, i: usize, w: ComplexVal) -> ComplexVal {
        self.lambda * w + self.translations[i]
    }

    /// Inverse of `f_i`.
    #[inline]
    pub fn apply_inverse(&self, i: usize, w: ComplexVal) -> ComplexVal {
        (w - self.translations[i]) / self.lambda
    }

    /// Fixed point of `f_i`.
    pub fn fixed_point(&self, i: usize) -> ComplexVal {
        self.translations[i] / (ComplexVal::new(1.0, 0.0) - self.lambda)
    }

    /// Same maps with a different probability vector.
    pub fn with_probs(&self, probs: &[f64]) -> Result<IfsSystem> {
        validate_system(self.lambda, &self.translations, probs)
    }

    /// Same translations and weights with a different contraction.
    pub fn with_lambda(&self, lambda: ComplexVal) -> Result<IfsSystem> {
        validate_system(lambda, &self.translations, &self.probs)
    }

    /// Disk of the cylinder `f_word(D)`.
    pub fn cylinder_disk(&self, map: &CylinderMap) -> Disk {
        Disk {
            center: map.apply(self.disk.center),
            radius: map.scale.norm() * self.disk.radius,
        }
    }

    /// Shannon entropy `-Σ p_i log p_i`.
    pub fn entropy(&self) -> f64 {
        -self.probs.iter().map(|p| p * p.ln()).sum::<f64>()
    }

    /// Whether `arg λ` is 0 or π.
    pub fn is_real_contraction(&self) -> bool {
        self.alpha.im.abs() <= ALGEBRAIC_TOL
    }
}

/// Validate raw parameters and split `λ = r α`.
pub fn validate_system(
    lambda: ComplexVal,
    translations: &[ComplexVal],
    probs: &[f64],
) -> Result<IfsSystem> {
    let r = lambda.norm();
    if !(r.is_finite() && r > 0.0 && r < 1.0) {
        return Err(Error::ModulusOutOfRange(r));
    }
    if translations.iter().any(|a| !(a.re.is_finite() && a.im.is_finite())) {
        return Err(Error::InvalidParameter("non-finite translation".into()));
    }
    if translations.len() < 2 {
        return Err(Error::InvalidParameter(
            "at least two maps are required".into(),
        ));
    }
    if probs.len() != translations.len() {
        return Err(Error::BadProbabilityVector(format!(
            "{} weights for {} maps",
            probs.len(),
            translations.len()
        )));
    }
    if let Some(p) = probs.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
        return Err(Error::BadProbabilityVector(format!(
            "entry {p} is not positive"
        )));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > ALGEBRAIC_TOL {
        return Err(Error::BadProbabilityVector(format!("sum is {total}")));
    }
    if translations.iter().all(|a| *a == translations[0]) {
        return Err(Error::DegenerateTranslations);
    }

    let alpha = lambda / r;
    let one = ComplexVal::new(1.0, 0.0);
    let mean: ComplexVal = translations
        .iter()
        .zip(probs)
        .map(|(a, p)| a * p)
        .sum();
    let barycenter = mean / (one - lambda);

    // f_i(B(C, R)) ⊆ B(C, R) iff |a_i - (1 - λ) C| <= (1 - r) R, so the
    // translations' enclosing circle center c gives C = c / (1 - λ).
    let (c, rho) = smallest_enclosing_circle(translations);
    let disk = Disk {
        center: c / (one - lambda),
        radius: rho / (1.0 - r),
    };

    Ok(IfsSystem {
        lambda,
        r,
        alpha,
        translations: translations.to_vec(),
        probs: probs.to_vec(),
        barycenter,
        disk,
    })
}

/// Smallest circle enclosing a small point set (incremental Welzl).
pub fn smallest_enclosing_circle(points: &[ComplexVal]) -> (ComplexVal, f64) {
    const EPS: f64 = 1e-12;
    let inside = |c: ComplexVal, rad: f64, p: ComplexVal| (p - c).norm() <= rad * (1.0 + EPS) + EPS;
    let mut c = points[0];
    let mut rad = 0.0;
    for i in 1..points.len() {
        if inside(c, rad, points[i]) {
            continue;
        }
        c = points[i];
        rad = 0.0;
        for j in 0..i {
            if inside(c, rad, points[j]) {
                continue;
            }
            c = (points[i] + points[j]) * 0.5;
            rad = (points[i] - c).norm();
            for k in 0..j {
                if inside(c, rad, points[k]) {
                    continue;
                }
                match circumcircle(points[i], points[j], points[k]) {
                    Some((cc, rr)) => {
                        c = cc;
                        rad = rr;
                    }
                    None => {
                        // Collinear: the farthest pair spans the circle.
                        let pairs = [
                            (points[i], points[j]),
                            (points[i], points[k]),
                            (points[j], points[k]),
                        ];
                        let (a, b) = pairs
                            .into_iter()
                            .max_by(|x, y| (x.0 - x.1).norm().total_cmp(&(y.0 - y.1).norm()))
                            .unwrap();
                        c = (a + b) * 0.5;
                        rad = (a - c).norm();
                    }
                }
            }
        }
    }
    // Exact radius about the final center.
    let rad = points.iter().map(|p| (p - c).norm()).fold(0.0, f64::max);
    (c, rad)
}

fn circumcircle(a: ComplexVal, b: ComplexVal, c: ComplexVal) -> Option<(ComplexVal, f64)> {
    let d = 2.0 * (a.re * (b.im - c.im) + b.re * (c.im - a.im) + c.re * (a.im - b.im));
    if d.abs() < 1e-300 {
        return None;
    }
    let a2 = a.norm_sqr();
    let b2 = b.norm_sqr();
    let c2 = c.norm_sqr();
    let ux = (a2 * (b.im - c.im) + b2 * (c.im - a.im) + c2 * (a.im - b.im)) / d;
    let uy = (a2 * (c.re - b.re) + b2 * (a.re - c.re) + c2 * (b.re - a.re)) / d;
    let center = ComplexVal::new(ux, uy);
    Some((center, (a - center).norm()))
}

/// A finite word over the alphabet `{0, .., |Λ| - 1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Word(pub Vec<usize>);

impl Word {
    pub fn new(indices: Vec<usize>) -> Self {
        Word(indices)
    }

    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }

    /// Prefix of length `k` (the whole word when shorter).
    pub fn prefix(&self, k: usize) -> Word {
        Word(self.0[..k.min(self.0.len())].to_vec())
    }

    /// Drop the first `k` symbols.
    pub fn shifted(&self, k: usize) -> Word {
        Word(self.0[k.min(self.0.len())..].to_vec())
    }

    pub fn starts_with(&self, prefix: &Word) -> bool {
        self.0.starts_with(&prefix.0)
    }

    /// Rank in lexicographic order among words of the same length, first
    /// symbol most significant.
    pub fn rank(&self, alphabet: usize) -> usize {
        self.0.iter().fold(0, |acc, &i| acc * alphabet + i)
    }

    /// Inverse of [`Word::rank`].
    pub fn from_rank(mut rank: usize, alphabet: usize, len: usize) -> Word {
        let mut v = vec![0; len];
        for slot in v.iter_mut().rev() {
            *slot = rank % alphabet;
            rank /= alphabet;
        }
        Word(v)
    }

    pub fn validate(&self, alphabet: usize) -> Result<()> {
        match self.0.iter().find(|&&i| i >= alphabet) {
            Some(&index) => Err(Error::IndexOutOfRange { index, alphabet }),
            None => Ok(()),
        }
    }
}

impl std::fmt::Display for Word {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s: Vec<String> = self.0.iter().map(|i| i.to_string()).collect();
        write!(f, "({})", s.join(","))
    }
}

/// The composed map `f_word(w) = scale * w + offset` and its weight `p_word`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CylinderMap {
    pub scale: ComplexVal,
    pub offset: ComplexVal,
    pub weight: f64,
    pub word: Word,
}

impl CylinderMap {
    pub fn identity() -> Self {
        CylinderMap {
            scale: ComplexVal::new(1.0, 0.0),
            offset: ComplexVal::new(0.0, 0.0),
            weight: 1.0,
            word: Word::empty(),
        }
    }

    #[inline]
    pub fn apply(&self, w: ComplexVal) -> ComplexVal {
        self.scale * w + self.offset
    }

    /// `self ∘ other`, the cylinder of the concatenated word.
    pub fn compose(&self, other: &CylinderMap) -> CylinderMap {
        CylinderMap {
            scale: self.scale * other.scale,
            offset: self.scale * other.offset + self.offset,
            weight: self.weight * other.weight,
            word: self.word.concat(&other.word),
        }
    }
}

/// `f_{i_1} ∘ ... ∘ f_{i_k}` for the given word.
pub fn cylinder_map(system: &IfsSystem, word: &Word) -> Result<CylinderMap> {
    word.validate(system.len())?;
    let mut scale = ComplexVal::new(1.0, 0.0);
    let mut offset = ComplexVal::new(0.0, 0.0);
    let mut weight = 1.0;
    for &i in word.indices() {
        // offset = Σ_j λ^{j-1} a_{i_j}
        offset += scale * system.translations[i];
        scale *= system.lambda;
        weight *= system.probs[i];
    }
    Ok(CylinderMap {
        scale,
        offset,
        weight,
        word: word.clone(),
    })
}

/// Closed-form dimensions of the measure and the attractor.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DimReport {
    pub q: f64,
    pub dq_closed: f64,
    pub dim_h_measure_closed: f64,
    pub dim_h_set_closed: f64,
    /// The formulas hold under strong separation; `false` unless the caller
    /// attached a proven separation verdict.
    pub ssc_proven: bool,
}

/// `D_q`, `dim_H ν` and `dim_H K` from the weights and the contraction ratio.
pub fn closed_form_dims(system: &IfsSystem, q: f64) -> Result<DimReport> {
    if !(q > 1.0) || !q.is_finite() {
        return Err(Error::QOutOfRange(q));
    }
    let log_r = system.r.ln();
    let moment: f64 = system.probs.iter().map(|p| p.powf(q)).sum();
    Ok(DimReport {
        q,
        dq_closed: moment.ln() / ((q - 1.0) * log_r),
        dim_h_measure_closed: -system.entropy() / log_r,
        dim_h_set_closed: (system.len() as f64).ln() / -log_r,
        ssc_proven: false,
    })
}

/// Outcome of the rotation heuristic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict")]
pub enum RotationCheck {
    /// No convergent `p/q` with `q <= denominator_bound` matches `arg λ / π`.
    PlausiblyIrrational { denominator_bound: u64 },
    /// `arg λ = π p / q` up to floating-point resolution.
    RationalMultiple { p: i64, q: u64 },
}

/// Continued-fraction search for `arg λ / π = p / q` with `q <= denominator_bound`.
///
/// A convergent matches when it is within `max(1e-12 / q, 1e-15)` of `arg λ / π`.
pub fn check_irrational_rotation(system: &IfsSystem, denominator_bound: u64) -> RotationCheck {
    rational_approximation(system.lambda.arg() / std::f64::consts::PI, denominator_bound)
}

pub(crate) fn rational_approximation(theta: f64, denominator_bound: u64) -> RotationCheck {
    // Every θ has convergents with |θ - p/q| < 1/q², so a flat 1e-12 window
    // flags generic angles once q nears 10^6. Scale by 1/q, floored at the
    // resolution of θ itself.
    let match_tol = |q: f64| (1e-12 / q).max(1e-15);
    let bound = denominator_bound.max(1);
    // Convergents h_n / k_n via the standard recurrence.
    let (mut h_prev, mut h) = (1i128, theta.floor() as i128);
    let (mut k_prev, mut k) = (0i128, 1i128);
    let mut frac = theta - theta.floor();
    loop {
        if (k as u128) > bound as u128 {
            break;
        }
        if (theta - h as f64 / k as f64).abs() <= match_tol(k as f64) {
            return RotationCheck::RationalMultiple {
                p: h as i64,
                q: k as u64,
            };
        }
        if frac < 1e-15 {
            break;
        }
        let x = 1.0 / frac;
        let a = x.floor();
        frac = x - a;
        if a > 1e15 {
            break;
        }
        let a = a as i128;
        let h_next = a * h + h_prev;
        let k_next = a * k + k_prev;
        h_prev = h;
        h = h_next;
        k_prev = k;
        k = k_next;
    }
    RotationCheck::PlausiblyIrrational {
        denominator_bound: bound,
    }
}

/// On-disk system definition. `name` is optional and informational.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub lambda_re: f64,
    pub lambda_im: f64,
    pub translations: Vec<[f64; 2]>,
    pub probs: Vec<f64>,
}

impl SystemFile {
    pub fn from_system(system: &IfsSystem, name: Option<&str>) -> Self {
        SystemFile {
            name: name.map(str::to_owned),
            lambda_re: system.lambda.re,
            lambda_im: system.lambda.im,
            translations: system.translations.iter().map(|a| [a.re, a.im]).collect(),
            probs: system.probs.clone(),
        }
    }

    pub fn to_system(&self) -> Result<IfsSystem> {
        let translations: Vec<ComplexVal> = self
            .translations
            .iter()
            .map(|[re, im]| ComplexVal::new(*re, *im))
            .collect();
        validate_system(
            ComplexVal::new(self.lambda_re, self.lambda_im),
            &translations,
            &self.probs,
        )
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Reference systems used throughout the tests and the verification suite.
pub mod presets {
    use super::*;

    fn corners() -> Vec<ComplexVal> {
        vec![
            ComplexVal::new(1.0, 1.0),
            ComplexVal::new(1.0, -1.0),
            ComplexVal::new(-1.0, 1.0),
            ComplexVal::new(-1.0, -1.0),
        ]
    }

    /// `λ = 0.35 e^{i}`, translations `±1 ± i`, uniform weights.
    pub fn sys_a() -> IfsSystem {
        validate_system(ComplexVal::from_polar(0.35, 1.0), &corners(), &[0.25; 4])
            .expect("SYS-A is valid")
    }

    /// SYS-A with weights `(0.4, 0.3, 0.2, 0.1)`.
    pub fn sys_b() -> IfsSystem {
        validate_system(
            ComplexVal::from_polar(0.35, 1.0),
            &corners(),
            &[0.4, 0.3, 0.2, 0.1],
        )
        .expect("SYS-B is valid")
    }

    /// SYS-A with `r = 0.2`; dimension below one.
    pub fn sys_a_thin() -> IfsSystem {
        validate_system(ComplexVal::from_polar(0.2, 1.0), &corners(), &[0.25; 4])
            .expect("thin system is valid")
    }

    pub fn by_name(name: &str) -> Option<IfsSystem> {
        match name.to_ascii_uppercase().as_str() {
            "SYS-A" | "A" => Some(sys_a()),
            "SYS-B" | "B" => Some(sys_b()),
            "SYS-A-THIN" => Some(sys_a_thin()),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::presets::*;
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> ComplexVal {
        ComplexVal::new(re, im)
    }

    #[test]
    fn sys_a_validates() {
        let s = sys_a();
        assert!((s.r() - 0.35).abs() < 1e-15);
        assert!((s.alpha().norm() - 1.0).abs() < 1e-12);
        assert!((s.alpha().arg() - 1.0).abs() < 1e-12);
        assert!((s.r() * s.alpha() - s.lambda()).norm() < 1e-12);
        assert!((s.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(s.barycenter().norm() < 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        let a = [c(0.0, 0.0), c(1.0, 0.0)];
        assert!(matches!(
            validate_system(c(1.1, 0.0), &a, &[0.5, 0.5]),
            Err(Error::ModulusOutOfRange(_))
        ));
        assert!(matches!(
            validate_system(c(0.5, 0.0), &a, &[0.5, 0.6]),
            Err(Error::BadProbabilityVector(_))
        ));
        assert!(matches!(
            validate_system(c(0.5, 0.0), &a, &[1.0, 0.0]),
            Err(Error::BadProbabilityVector(_))
        ));
        assert!(matches!(
            validate_system(c(0.5, 0.0), &[c(1.0, 1.0), c(1.0, 1.0)], &[0.5, 0.5]),
            Err(Error::DegenerateTranslations)
        ));
        assert!(matches!(
            validate_system(c(0.0, 0.0), &a, &[0.5, 0.5]),
            Err(Error::ModulusOutOfRange(_))
        ));
    }

    #[test]
    fn bounding_disk_is_invariant() {
        let s = validate_system(
            ComplexVal::from_polar(0.4, 2.0),
            &[c(3.0, 1.0), c(5.0, 2.0), c(4.0, -1.0)],
            &[0.2, 0.3, 0.5],
        )
        .unwrap();
        let d = s.bounding_disk();
        for i in 0..s.len() {
            let img = Disk {
                center: s.apply(i, d.center),
                radius: s.r() * d.radius,
            };
            assert!((img.center - d.center).norm() + img.radius <= d.radius + 1e-12);
        }
        assert!(d.contains(s.barycenter(), 1e-12));
    }

    #[test]
    fn sys_a_disk() {
        let d = sys_a().bounding_disk();
        assert!(d.center.norm() < 1e-15);
        assert!((d.radius - 2f64.sqrt() / 0.65).abs() < 1e-12);
    }

    #[test]
    fn enclosing_circle_cases() {
        let (cc, rr) = smallest_enclosing_circle(&[c(0.0, 0.0), c(2.0, 0.0), c(1.0, 0.1)]);
        assert!((cc - c(1.0, 0.0)).norm() < 1e-12);
        assert!((rr - 1.0).abs() < 1e-12);
        let (_, rr) = smallest_enclosing_circle(&[c(0.0, 0.0), c(1.0, 0.0), c(2.0, 0.0)]);
        assert!((rr - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cylinder_examples() {
        let s = sys_a();
        let id = cylinder_map(&s, &Word::empty()).unwrap();
        assert_eq!(id.scale, c(1.0, 0.0));
        assert_eq!(id.offset, c(0.0, 0.0));
        assert_eq!(id.weight, 1.0);

        let one = cylinder_map(&s, &Word::new(vec![0])).unwrap();
        assert!((one.scale - s.lambda()).norm() < 1e-15);
        assert!((one.offset - c(1.0, 1.0)).norm() < 1e-15);
        assert_eq!(one.weight, 0.25);

        // f_0(f_1(w)) = λ(λw + a_1) + a_0
        let two = cylinder_map(&s, &Word::new(vec![0, 1])).unwrap();
        let expected = c(1.0, 1.0) + s.lambda() * c(1.0, -1.0);
        assert!((two.offset - expected).norm() < 1e-15);
        assert!((two.scale.norm() - 0.35f64.powi(2)).abs() < 1e-15);

        assert!(matches!(
            cylinder_map(&s, &Word::new(vec![4])),
            Err(Error::IndexOutOfRange { index: 4, alphabet: 4 })
        ));
    }

    #[test]
    fn composition_exhaustive_binary() {
        let s = validate_system(
            ComplexVal::from_polar(0.6, 0.7),
            &[c(0.0, 0.0), c(1.0, 0.3)],
            &[0.3, 0.7],
        )
        .unwrap();
        for len in 0..=8usize {
            for rank in 0..(1usize << len) {
                let w = Word::from_rank(rank, 2, len);
                for split in 0..=len {
                    let (w1, w2) = (w.prefix(split), w.shifted(split));
                    let m = cylinder_map(&s, &w).unwrap();
                    let m1 = cylinder_map(&s, &w1).unwrap();
                    let m2 = cylinder_map(&s, &w2).unwrap();
                    let comp = m1.compose(&m2);
                    assert!((comp.scale - m.scale).norm() < 1e-12);
                    assert!((comp.offset - m.offset).norm() < 1e-12);
                    assert!((comp.weight - m.weight).abs() < 1e-15);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn composition_random_words(
            w1 in prop::collection::vec(0usize..4, 0..8),
            w2 in prop::collection::vec(0usize..4, 0..8),
        ) {
            let s = sys_b();
            let (w1, w2) = (Word::new(w1), Word::new(w2));
            let m = cylinder_map(&s, &w1.concat(&w2)).unwrap();
            let comp = cylinder_map(&s, &w1).unwrap().compose(&cylinder_map(&s, &w2).unwrap());
            prop_assert!((comp.scale - m.scale).norm() < 1e-12);
            prop_assert!((comp.offset - m.offset).norm() < 1e-12);
            prop_assert!((m.scale.norm() - s.r().powi(m.word.len() as i32)).abs() < 1e-12);
            let p: f64 = m.word.indices().iter().map(|&i| s.probs()[i]).product();
            prop_assert!((m.weight - p).abs() < 1e-15);
        }

        #[test]
        fn rank_roundtrip(v in prop::collection::vec(0usize..5, 0..10)) {
            let w = Word::new(v);
            prop_assert_eq!(Word::from_rank(w.rank(5), 5, w.len()), w);
        }
    }

    #[test]
    fn closed_forms_sys_a() {
        let d = closed_form_dims(&sys_a(), 2.0).unwrap();
        let s = 4f64.ln() / -(0.35f64.ln());
        assert!((d.dq_closed - s).abs() < 1e-12);
        assert!((d.dim_h_measure_closed - s).abs() < 1e-12);
        assert!((d.dim_h_set_closed - s).abs() < 1e-12);
        assert!((s - 1.32051).abs() < 1e-5);
    }

    #[test]
    fn closed_forms_sys_b() {
        let d = closed_form_dims(&sys_b(), 2.0).unwrap();
        assert!((d.dq_closed - 1.14683).abs() < 1e-5);
        assert!((d.dim_h_measure_closed - 1.21911).abs() < 1e-5);
        assert!((d.dim_h_set_closed - 1.32051).abs() < 1e-5);
        let near_one = closed_form_dims(&sys_b(), 1.001).unwrap();
        assert!((near_one.dq_closed - near_one.dim_h_measure_closed).abs() < 1e-3);
        assert!(matches!(closed_form_dims(&sys_b(), 1.0), Err(Error::QOutOfRange(_))));
    }

    #[test]
    fn dq_monotone_and_bounded() {
        for s in [sys_a(), sys_b()] {
            let qs = [1.1, 1.5, 2.0, 3.0, 5.0];
            let d: Vec<DimReport> = qs.iter().map(|&q| closed_form_dims(&s, q).unwrap()).collect();
            for w in d.windows(2) {
                assert!(w[1].dq_closed <= w[0].dq_closed + 1e-12);
            }
            for r in &d {
                assert!(r.dq_closed <= r.dim_h_measure_closed + 1e-12);
                assert!(r.dim_h_measure_closed <= r.dim_h_set_closed + 1e-12);
            }
        }
        // Uniform weights: all equal for every q.
        for q in [1.1, 3.0, 7.5] {
            let d = closed_form_dims(&sys_a(), q).unwrap();
            assert!((d.dq_closed - d.dim_h_set_closed).abs() < 1e-12);
            assert!((d.dim_h_measure_closed - d.dim_h_set_closed).abs() < 1e-12);
        }
    }

    #[test]
    fn rotation_heuristic() {
        let a = [c(0.0, 0.0), c(1.0, 0.0)];
        let third = validate_system(
            ComplexVal::from_polar(0.5, std::f64::consts::PI / 3.0),
            &a,
            &[0.5, 0.5],
        )
        .unwrap();
        assert_eq!(
            check_irrational_rotation(&third, 1000),
            RotationCheck::RationalMultiple { p: 1, q: 3 }
        );
        assert_eq!(
            check_irrational_rotation(&sys_a(), 1_000_000),
            RotationCheck::PlausiblyIrrational {
                denominator_bound: 1_000_000
            }
        );
        let real = validate_system(c(0.5, 0.0), &a, &[0.5, 0.5]).unwrap();
        assert_eq!(
            check_irrational_rotation(&real, 10),
            RotationCheck::RationalMultiple { p: 0, q: 1 }
        );
        assert!(real.is_real_contraction());
        let neg = validate_system(
            ComplexVal::from_polar(0.5, -2.0 * std::f64::consts::PI / 5.0),
            &a,
            &[0.5, 0.5],
        )
        .unwrap();
        assert_eq!(
            check_irrational_rotation(&neg, 10),
            RotationCheck::RationalMultiple { p: -2, q: 5 }
        );
    }

    #[test]
    fn continued_fraction_oracle_for_one_radian() {
        // Independent check: brute-force every denominator up to 10^5.
        let theta = 1.0 / std::f64::consts::PI;
        let best = (1..=100_000u64)
            .map(|q| ((theta * q as f64).round() / q as f64 - theta).abs())
            .fold(f64::INFINITY, f64::min);
        assert!(best > 1e-12);
        assert!(matches!(
            rational_approximation(theta, 100_000),
            RotationCheck::PlausiblyIrrational { .. }
        ));
    }

    #[test]
    fn system_file_roundtrip() {
        let s = sys_b();
        let f = SystemFile::from_system(&s, Some("SYS-B"));
        let text = serde_json::to_string(&f).unwrap();
        let back = SystemFile::from_json(&text).unwrap().to_system().unwrap();
        assert_eq!(back, s);
    }
}
