//! Finite-dimensional Hilbert spaces, the (projective) unitary
//! representations acting on them, and the voice transform
//! `V_g f(x) = <f, pi(x) g>`.
//!
//! Inner products are linear in the first slot: `<f, g> = sum_i f_i conj(g_i)`.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::GroupModel;

/// Vectors with norm below this are treated as zero.
pub const ZERO_NORM: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct HilbertVector(DVector<Complex64>);

impl HilbertVector {
    pub fn new(coords: Vec<Complex64>) -> Self {
        Self(DVector::from_vec(coords))
    }

    pub fn from_real(coords: &[f64]) -> Self {
        Self::new(coords.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn from_dvector(v: DVector<Complex64>) -> Self {
        Self(v)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(DVector::zeros(dim))
    }

    pub fn dirac(dim: usize, at: usize) -> Self {
        let mut v = DVector::zeros(dim);
        v[at] = Complex64::new(1.0, 0.0);
        Self(v)
    }

    /// Constant vector of unit norm.
    pub fn flat(dim: usize) -> Self {
        let c = 1.0 / (dim as f64).sqrt();
        Self(DVector::from_element(dim, Complex64::new(c, 0.0)))
    }

    /// Unit-norm periodization of `exp(-pi t^2 / n)` sampled on `Z_n`. This
    /// width makes the vector invariant under the unitary DFT.
    pub fn gauss(n: usize) -> Self {
        let nf = n as f64;
        let coords: Vec<f64> = (0..n)
            .map(|t| {
                (-8i64..=8)
                    .map(|m| {
                        let s = t as f64 + m as f64 * nf;
                        (-PI * s * s / nf).exp()
                    })
                    .sum()
            })
            .collect();
        Self::from_real(&coords).normalized().expect("gaussian is nonzero")
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &DVector<Complex64> {
        &self.0
    }

    pub fn into_inner(self) -> DVector<Complex64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn norm_squared(&self) -> f64 {
        self.0.norm_squared()
    }

    /// `<self, other>`, conjugate-linear in `other`.
    pub fn inner(&self, other: &HilbertVector) -> Complex64 {
        other.0.dotc(&self.0)
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n < ZERO_NORM {
            return Err(Error::ZeroWindow);
        }
        Ok(self.scaled(Complex64::new(1.0 / n, 0.0)))
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        Self(&self.0 * s)
    }

    pub fn add(&self, other: &HilbertVector) -> Self {
        Self(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &HilbertVector) -> Self {
        Self(&self.0 - &other.0)
    }

    /// Kronecker product, first factor slowest.
    pub fn tensor(&self, other: &HilbertVector) -> Self {
        let mut out = Vec::with_capacity(self.dim() * other.dim());
        for a in self.0.iter() {
            for b in other.0.iter() {
                out.push(a * b);
            }
        }
        Self::new(out)
    }
}

/// One tensor factor of a representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RepFactor {
    /// `Z_n` acting on `C^n` by cyclic shifts.
    Translation { n: u32 },
    /// `Z_n x Z_n` acting on `C^n` by `pi(k, l) = M_l T_k`.
    Gabor { n: u32 },
}

impl RepFactor {
    fn moduli(&self) -> Vec<u32> {
        match *self {
            RepFactor::Translation { n } => vec![n],
            RepFactor::Gabor { n } => vec![n, n],
        }
    }

    fn dim(&self) -> usize {
        match *self {
            RepFactor::Translation { n } | RepFactor::Gabor { n } => n as usize,
        }
    }

    /// Image of basis vector `t` under the element with coordinates `coords`.
    fn action(&self, coords: &[i64], t: usize) -> (usize, Complex64) {
        match *self {
            RepFactor::Translation { n } => {
                let n = n as i64;
                (((t as i64 + coords[0]).rem_euclid(n)) as usize, Complex64::new(1.0, 0.0))
            }
            RepFactor::Gabor { n } => {
                let n = n as i64;
                let target = (t as i64 + coords[0]).rem_euclid(n);
                let m = (coords[1] * target).rem_euclid(n);
                let phase = Complex64::from_polar(1.0, 2.0 * PI * m as f64 / n as f64);
                (target as usize, phase)
            }
        }
    }
}

/// `pi(x)` as a monomial matrix: `e_t -> phase[t] e_{target[t]}`.
#[derive(Debug, Clone)]
struct MonomialOp {
    target: Vec<usize>,
    phase: Vec<Complex64>,
}

/// A unitary, possibly projective, representation of a cyclic product group.
///
/// Every shipped representation is monomial, so each `pi(x)` is stored as a
/// permutation with phases and applied in `O(d)`.
#[derive(Debug, Clone)]
pub struct Representation {
    factors: Vec<RepFactor>,
    group: Arc<GroupModel>,
    dim: usize,
    ops: Vec<MonomialOp>,
}

impl Representation {
    pub fn translation(n: u32) -> Result<Self> {
        Self::new(vec![RepFactor::Translation { n }])
    }

    pub fn gabor(n: u32) -> Result<Self> {
        Self::new(vec![RepFactor::Gabor { n }])
    }

    /// Tensor product of the given factors acting on the product group.
    pub fn new(factors: Vec<RepFactor>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidGroup("representation needs at least one factor".into()));
        }
        let moduli: Vec<u32> = factors.iter().flat_map(|f| f.moduli()).collect();
        let group = GroupModel::cyclic(&moduli)?;
        let dim = factors.iter().map(|f| f.dim()).product::<usize>();
        if group.order().saturating_mul(dim) > 1 << 24 {
            return Err(Error::InvalidGroup("representation too large to tabulate".into()));
        }
        let ops = (0..group.order())
            .map(|x| Self::build_op(&factors, group.element(x).0.as_slice(), dim))
            .collect();
        Ok(Self { factors, group: Arc::new(group), dim, ops })
    }

    fn build_op(factors: &[RepFactor], coords: &[i64], dim: usize) -> MonomialOp {
        let mut target = vec![0usize; dim];
        let mut phase = vec![Complex64::new(0.0, 0.0); dim];
        let dims: Vec<usize> = factors.iter().map(|f| f.dim()).collect();
        for t in 0..dim {
            let mut rem = t;
            let mut digits = vec![0usize; factors.len()];
            for i in (0..factors.len()).rev() {
                digits[i] = rem % dims[i];
                rem /= dims[i];
            }
            let mut offset = 0;
            let mut out = 0usize;
            let mut ph = Complex64::new(1.0, 0.0);
            for (i, f) in factors.iter().enumerate() {
                let width = f.moduli().len();
                let (d, p) = f.action(&coords[offset..offset + width], digits[i]);
                offset += width;
                out = out * dims[i] + d;
                ph *= p;
            }
            target[t] = out;
            phase[t] = ph;
        }
        MonomialOp { target, phase }
    }

    pub fn factors(&self) -> &[RepFactor] {
        &self.factors
    }

    pub fn group(&self) -> &Arc<GroupModel> {
        &self.group
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Named window presets: `dirac0`, `flat`, `gauss`. Gaussians of tensor
    /// representations are tensor products of per-factor Gaussians.
    pub fn preset(&self, name: &str) -> Result<HilbertVector> {
        match name {
            "dirac0" => Ok(HilbertVector::dirac(self.dim, 0)),
            "flat" => Ok(HilbertVector::flat(self.dim)),
            "gauss" => {
                let mut it = self.factors.iter().map(|f| HilbertVector::gauss(f.dim()));
                let first = it.next().expect("at least one factor");
                Ok(it.fold(first, |acc, v| acc.tensor(&v)))
            }
            other => Err(Error::InvalidScenario(format!("unknown vector preset {other:?}"))),
        }
    }

    fn check_dim(&self, v: &HilbertVector) -> Result<()> {
        if v.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: v.dim() });
        }
        Ok(())
    }

    /// `pi(x) v`.
    pub fn apply(&self, x: usize, v: &HilbertVector) -> Result<HilbertVector> {
        self.check_dim(v)?;
        let op = &self.ops[x];
        let mut out = DVector::zeros(self.dim);
        for t in 0..self.dim {
            out[op.target[t]] = op.phase[t] * v.0[t];
        }
        Ok(HilbertVector(out))
    }

    /// `V_g f(x) = <f, pi(x) g>` on every carrier element.
    pub fn voice_transform(&self, g: &HilbertVector, f: &HilbertVector) -> Result<VoiceTransform> {
        self.check_dim(g)?;
        self.check_dim(f)?;
        if g.norm() < ZERO_NORM {
            return Err(Error::ZeroWindow);
        }
        let values = (0..self.group.order())
            .map(|x| Ok(f.inner(&self.apply(x, g)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(VoiceTransform { values, f_norm: f.norm(), g_norm: g.norm() })
    }

    /// `sum_x kernel(x) pi(x) g0 |x|`, a Haar-weighted smoothing of `g0`.
    pub fn mollify_window(&self, g0: &HilbertVector, kernel: &[(usize, Complex64)]) -> Result<HilbertVector> {
        self.check_dim(g0)?;
        let mut acc = HilbertVector::zeros(self.dim);
        for &(x, w) in kernel {
            if x >= self.group.order() {
                return Err(Error::NotInCarrier(format!("index {x}")));
            }
            let weight = w * self.group.haar_weight(x);
            acc = acc.add(&self.apply(x, g0)?.scaled(weight));
        }
        let n = acc.norm();
        if n < ZERO_NORM {
            return Err(Error::ZeroResult(n));
        }
        Ok(acc)
    }
}

/// Samples of `x -> <f, pi(x) g>` over the whole carrier.
#[derive(Debug, Clone)]
pub struct VoiceTransform {
    values: Vec<Complex64>,
    f_norm: f64,
    g_norm: f64,
}

impl VoiceTransform {
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn at(&self, x: usize) -> Complex64 {
        self.values[x]
    }

    /// `|V_g f|` as a nonnegative function on the carrier.
    pub fn moduli(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    /// `||f|| ||g||`, the Cauchy-Schwarz ceiling.
    pub fn ceiling(&self) -> f64 {
        self.f_norm * self.g_norm
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::Element;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vector(rng: &mut impl Rng, d: usize) -> HilbertVector {
        HilbertVector::new(
            (0..d)
                .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect(),
        )
    }

    fn at(rep: &Representation, c: &[i64]) -> usize {
        rep.group().index_of(&Element(c.to_vec())).unwrap()
    }

    fn reps() -> Vec<Representation> {
        vec![
            Representation::translation(4).unwrap(),
            Representation::translation(9).unwrap(),
            Representation::gabor(4).unwrap(),
            Representation::gabor(8).unwrap(),
            Representation::new(vec![RepFactor::Gabor { n: 3 }, RepFactor::Translation { n: 2 }]).unwrap(),
        ]
    }

    #[test]
    fn apply_examples() {
        let tr = Representation::translation(4).unwrap();
        let d0 = HilbertVector::dirac(4, 0);
        assert_eq!(tr.apply(at(&tr, &[1]), &d0).unwrap(), HilbertVector::dirac(4, 1));

        let gb = Representation::gabor(4).unwrap();
        assert_eq!(gb.apply(at(&gb, &[0, 1]), &d0).unwrap(), d0);

        let v = HilbertVector::from_real(&[1.0, -2.0, 0.5, 3.0]);
        assert_eq!(gb.apply(gb.group().identity(), &v).unwrap(), v);
        assert_eq!(
            tr.apply(0, &HilbertVector::zeros(3)),
            Err(Error::DimensionMismatch { expected: 4, found: 3 })
        );
    }

    #[test]
    fn gabor_matches_modulated_translate() {
        let n = 5;
        let gb = Representation::gabor(n).unwrap();
        let f = HilbertVector::from_real(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        for k in 0..n as i64 {
            for l in 0..n as i64 {
                let got = gb.apply(at(&gb, &[k, l]), &f).unwrap();
                for t in 0..n as i64 {
                    let src = (t - k).rem_euclid(n as i64) as usize;
                    let ph = Complex64::from_polar(1.0, 2.0 * PI * (l * t) as f64 / n as f64);
                    let want = ph * f.coords()[src];
                    assert!((got.coords()[t as usize] - want).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn representations_are_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for rep in reps() {
            for _ in 0..20 {
                let v = random_vector(&mut rng, rep.dim());
                for x in 0..rep.group().order() {
                    let w = rep.apply(x, &v).unwrap();
                    assert!((w.norm() - v.norm()).abs() <= 1e-12 * v.norm());
                }
            }
        }
    }

    #[test]
    fn gabor_cocycle_is_unimodular() {
        let gb = Representation::gabor(6).unwrap();
        let g = gb.group().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v = random_vector(&mut rng, 6);
        for _ in 0..30 {
            let x = rng.random_range(0..g.order());
            let y = rng.random_range(0..g.order());
            let lhs = gb.apply(x, &gb.apply(y, &v).unwrap()).unwrap();
            let rhs = gb.apply(g.compose(x, y).unwrap(), &v).unwrap();
            // lhs = c rhs with |c| = 1
            let c = lhs.inner(&rhs) / rhs.norm_squared();
            assert!((c.norm() - 1.0).abs() < 1e-12);
            assert!(lhs.sub(&rhs.scaled(c)).norm() < 1e-12);
        }
    }

    #[test]
    fn voice_transform_examples() {
        let gb = Representation::gabor(4).unwrap();
        let d0 = HilbertVector::dirac(4, 0);
        let vt = gb.voice_transform(&d0, &d0).unwrap();
        for x in 0..16 {
            let k = gb.group().element(x).0[0];
            let want = if k == 0 { 1.0 } else { 0.0 };
            assert!((vt.at(x).norm() - want).abs() < 1e-12);
        }

        let flat = HilbertVector::flat(4);
        let vt = gb.voice_transform(&flat, &d0).unwrap();
        for x in 0..16 {
            assert!((vt.at(x).norm() - 0.5).abs() < 1e-12);
        }

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for rep in reps() {
            let g = random_vector(&mut rng, rep.dim());
            let vt = rep.voice_transform(&g, &g).unwrap();
            assert!((vt.at(rep.group().identity()) - Complex64::new(g.norm_squared(), 0.0)).norm() < 1e-12);
        }
        assert_eq!(gb.voice_transform(&HilbertVector::zeros(4), &d0).unwrap_err(), Error::ZeroWindow);
    }

    #[test]
    fn voice_transform_obeys_cauchy_schwarz_and_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for rep in reps() {
            let group = rep.group().clone();
            for _ in 0..5 {
                let f = random_vector(&mut rng, rep.dim());
                let g = random_vector(&mut rng, rep.dim());
                let vt = rep.voice_transform(&g, &f).unwrap();
                let peak = vt.moduli().into_iter().fold(0.0, f64::max);
                assert!(peak <= vt.ceiling() + 1e-12);

                let x = rng.random_range(0..group.order());
                let shifted = rep.voice_transform(&g, &rep.apply(x, &f).unwrap()).unwrap();
                let xinv = group.inverse(x).unwrap();
                for xj in 0..group.order() {
                    let moved = group.compose(xinv, xj).unwrap();
                    assert!((shifted.at(xj).norm() - vt.at(moved).norm()).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn mollify_examples() {
        let tr = Representation::translation(4).unwrap();
        let d0 = HilbertVector::dirac(4, 0);
        let one = Complex64::new(1.0, 0.0);
        assert_eq!(tr.mollify_window(&d0, &[(0, one)]).unwrap(), d0);

        let half = Complex64::new(0.5, 0.0);
        let m = tr.mollify_window(&d0, &[(at(&tr, &[0]), half), (at(&tr, &[1]), half)]).unwrap();
        assert!(m.sub(&HilbertVector::from_real(&[0.5, 0.5, 0.0, 0.0])).norm() < 1e-15);

        let cancel = tr.mollify_window(&d0, &[(0, one), (0, -one)]);
        assert!(matches!(cancel, Err(Error::ZeroResult(_))));
    }

    #[test]
    fn presets() {
        let g = HilbertVector::gauss(16);
        assert!((g.norm() - 1.0).abs() < 1e-14);
        // symmetric about 0 on Z_16
        for t in 1..16 {
            assert!((g.coords()[t] - g.coords()[16 - t]).norm() < 1e-15);
        }
        let rep = Representation::new(vec![RepFactor::Translation { n: 2 }, RepFactor::Translation { n: 3 }]).unwrap();
        assert_eq!(rep.dim(), 6);
        assert!((rep.preset("gauss").unwrap().norm() - 1.0).abs() < 1e-14);
        assert!(rep.preset("nope").is_err());
    }
}
