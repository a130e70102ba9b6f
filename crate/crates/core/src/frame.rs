//! Coherent frame systems `{pi(x_j) g}`: analysis coefficients, frame
//! operator and optimal bounds, canonical duals, reconstruction checks, and
//! orthogonal projectors onto finite spans.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::PointSet;
use crate::hilbert::{HilbertVector, Representation, ZERO_NORM};
use crate::linalg::{self, CMatrix, RANK_TOLERANCE};

/// Reconstruction through a dual must be exact to this tolerance.
pub const DUAL_TOLERANCE: f64 = 1e-9;

/// The system `{pi(x_j) g : j in J}`.
#[derive(Debug, Clone)]
pub struct FrameSystem {
    rep: Arc<Representation>,
    window: HilbertVector,
    points: PointSet,
    atoms: Vec<HilbertVector>,
    separation: usize,
}

impl FrameSystem {
    pub fn new(rep: Arc<Representation>, window: HilbertVector, points: PointSet) -> Result<Self> {
        if window.dim() != rep.dim() {
            return Err(Error::DimensionMismatch { expected: rep.dim(), found: window.dim() });
        }
        if window.norm() < ZERO_NORM {
            return Err(Error::ZeroWindow);
        }
        let atoms = points.iter().map(|&x| rep.apply(x, &window)).collect::<Result<Vec<_>>>()?;
        let group = rep.group();
        let separation = group.separation_constant(&points, &group.ball(1))?;
        Ok(Self { rep, window, points, atoms, separation })
    }

    pub fn rep(&self) -> &Arc<Representation> {
        &self.rep
    }

    pub fn window(&self) -> &HilbertVector {
        &self.window
    }

    pub fn points(&self) -> &PointSet {
        &self.points
    }

    pub fn atoms(&self) -> &[HilbertVector] {
        &self.atoms
    }

    pub fn dim(&self) -> usize {
        self.rep.dim()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Separation constant of the point set for the unit ball.
    pub fn separation(&self) -> usize {
        self.separation
    }

    /// `c_j = <f, pi(x_j) g> = V_g f(x_j)`.
    pub fn analysis_coefficients(&self, f: &HilbertVector) -> Result<Vec<Complex64>> {
        if f.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: f.dim() });
        }
        Ok(self.atoms.iter().map(|a| f.inner(a)).collect())
    }

    /// `S = sum_j pi(x_j) g (pi(x_j) g)^*`.
    pub fn frame_operator(&self) -> CMatrix {
        linalg::outer_sum(self.dim(), &self.atoms)
    }

    /// Optimal bounds `(A, B)`: extreme eigenvalues of the frame operator.
    pub fn frame_bounds(&self) -> Result<(f64, f64)> {
        system_bounds(self.dim(), &self.atoms)
    }

    pub fn analyze(&self) -> Result<FrameAnalysis> {
        let operator = self.frame_operator();
        let (lower, upper) = spectral_bounds(&operator)?;
        let canonical_dual = solve_all(&operator, &self.atoms)?;
        Ok(FrameAnalysis { lower, upper, operator, canonical_dual })
    }

    /// `h_j = S^-1 pi(x_j) g`.
    pub fn canonical_dual(&self) -> Result<Vec<HilbertVector>> {
        Ok(self.analyze()?.canonical_dual)
    }

    /// Largest reconstruction error `||e_i - sum_j <e_i, pi(x_j) g> h_j||`
    /// over the standard basis.
    pub fn verify_dual(&self, duals: &[HilbertVector]) -> Result<DualCheck> {
        if duals.len() != self.len() {
            return Err(Error::LengthMismatch { expected: self.len(), found: duals.len() });
        }
        let d = self.dim();
        if let Some(bad) = duals.iter().find(|h| h.dim() != d) {
            return Err(Error::DimensionMismatch { expected: d, found: bad.dim() });
        }
        // column i of H Phi^* is the reconstruction of e_i
        let synth = linalg::columns(d, duals);
        let analysis = linalg::columns(d, &self.atoms).adjoint();
        let residual = CMatrix::identity(d, d) - synth * analysis;
        let max_error = residual.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
        Ok(DualCheck { max_error, ok: max_error <= DUAL_TOLERANCE })
    }
}

/// Frame operator, optimal bounds and canonical dual of one frame.
#[derive(Debug, Clone)]
pub struct FrameAnalysis {
    pub lower: f64,
    pub upper: f64,
    pub operator: CMatrix,
    pub canonical_dual: Vec<HilbertVector>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualCheck {
    pub max_error: f64,
    pub ok: bool,
}

/// Bessel bound of a dual system against `1/A` of the primary frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BesselCheck {
    pub empirical_b_dual: f64,
    pub bound: f64,
    /// `None` for non-canonical duals, where `1/A` is not a valid claim.
    pub ok: Option<bool>,
}

/// Extreme eigenvalues of `sum_j v_j v_j^*`, failing with `NotAFrame` when
/// the system does not span.
pub fn system_bounds(dim: usize, vectors: &[HilbertVector]) -> Result<(f64, f64)> {
    spectral_bounds(&linalg::outer_sum(dim, vectors))
}

/// Largest eigenvalue of `sum_j v_j v_j^*`; no spanning requirement.
pub fn upper_bound(dim: usize, vectors: &[HilbertVector]) -> f64 {
    linalg::hermitian_eigenvalues(&linalg::outer_sum(dim, vectors)).last().copied().unwrap_or(0.0)
}

fn spectral_bounds(operator: &CMatrix) -> Result<(f64, f64)> {
    let eig = linalg::hermitian_eigenvalues(operator);
    let (lower, upper) = match (eig.first(), eig.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => (0.0, 0.0),
    };
    if !(upper > 0.0) || lower <= RANK_TOLERANCE * upper {
        return Err(Error::NotAFrame { lower, upper });
    }
    Ok((lower, upper))
}

fn solve_all(operator: &CMatrix, atoms: &[HilbertVector]) -> Result<Vec<HilbertVector>> {
    let chol = linalg::hermitian_part(operator)
        .cholesky()
        .ok_or(Error::NotAFrame { lower: 0.0, upper: 0.0 })?;
    Ok(atoms.iter().map(|a| HilbertVector::from_dvector(chol.solve(a.coords()))).collect())
}

pub fn bessel_bound_check(duals: &[HilbertVector], lower_primary: f64, canonical: bool) -> BesselCheck {
    let dim = duals.first().map_or(0, |h| h.dim());
    let empirical_b_dual = upper_bound(dim, duals);
    let bound = 1.0 / lower_primary;
    let ok = canonical.then_some(empirical_b_dual <= bound * (1.0 + DUAL_TOLERANCE));
    BesselCheck { empirical_b_dual, bound, ok }
}

/// Orthogonal projector onto the span of a list of generators.
#[derive(Debug, Clone)]
pub struct SpanProjector {
    generators: Vec<HilbertVector>,
    /// Orthonormal basis of the range, as columns.
    basis: CMatrix,
    dim: usize,
    tolerance: f64,
}

impl SpanProjector {
    /// Builds the projector from an SVD of the generator matrix; singular
    /// values at or below `RANK_TOLERANCE * sigma_max` are discarded.
    pub fn new(dim: usize, generators: Vec<HilbertVector>) -> Result<Self> {
        if let Some(bad) = generators.iter().find(|v| v.dim() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, found: bad.dim() });
        }
        let basis = range_basis(dim, &generators);
        Ok(Self { generators, basis, dim, tolerance: RANK_TOLERANCE })
    }

    pub fn zero(dim: usize) -> Self {
        Self { generators: Vec::new(), basis: CMatrix::zeros(dim, 0), dim, tolerance: RANK_TOLERANCE }
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn generators(&self) -> &[HilbertVector] {
        &self.generators
    }

    pub fn apply(&self, v: &HilbertVector) -> HilbertVector {
        if self.rank() == 0 {
            return HilbertVector::zeros(self.dim);
        }
        let coeffs = self.basis.ad_mul(v.coords());
        HilbertVector::from_dvector(&self.basis * coeffs)
    }

    /// `||v - P v||`.
    pub fn residual_norm(&self, v: &HilbertVector) -> f64 {
        v.sub(&self.apply(v)).norm()
    }

    /// `P` as a dense `d x d` matrix.
    pub fn matrix(&self) -> CMatrix {
        &self.basis * self.basis.adjoint()
    }
}

fn range_basis(dim: usize, generators: &[HilbertVector]) -> CMatrix {
    if generators.is_empty() {
        return CMatrix::zeros(dim, 0);
    }
    let m = linalg::columns(dim, generators);
    let svd = m.svd(true, false);
    let sigma_max = svd.singular_values.iter().copied().fold(0.0, f64::max);
    if !(sigma_max > 0.0) {
        return CMatrix::zeros(dim, 0);
    }
    let u = svd.u.expect("left singular vectors requested");
    let keep: Vec<_> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > RANK_TOLERANCE * sigma_max)
        .map(|(i, _)| u.column(i).into_owned())
        .collect();
    if keep.is_empty() {
        return CMatrix::zeros(dim, 0);
    }
    DMatrix::from_columns(&keep)
}

pub fn span_projector(dim: usize, vectors: &[HilbertVector]) -> Result<SpanProjector> {
    SpanProjector::new(dim, vectors.to_vec())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BestApprox {
    pub proj_error: f64,
    pub min_trial_error: f64,
    pub ok: bool,
}

/// Compares `||h - P h||` against `||h - sum_j d_j v_j||` for random complex
/// Gaussian coefficients `d` over the projector's generators.
pub fn best_approx_check(p: &SpanProjector, h: &HilbertVector, trials: usize, rng: &mut impl Rng) -> BestApprox {
    let proj_error = p.residual_norm(h);
    let gens = linalg::columns(p.dim(), p.generators());
    let mut min_trial_error = f64::INFINITY;
    for _ in 0..trials {
        let d = nalgebra::DVector::from_fn(gens.ncols(), |_, _| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex64::new(re, im)
        });
        let approx = HilbertVector::from_dvector(&gens * d);
        min_trial_error = min_trial_error.min(h.sub(&approx).norm());
    }
    BestApprox { proj_error, min_trial_error, ok: proj_error <= min_trial_error + 1e-12 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::Element;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn dirac_onb(n: u32) -> FrameSystem {
        let rep = Arc::new(Representation::translation(n).unwrap());
        let pts = PointSet::full(rep.group());
        FrameSystem::new(rep.clone(), HilbertVector::dirac(n as usize, 0), pts).unwrap()
    }

    fn full_gabor(n: u32, window: &str) -> FrameSystem {
        let rep = Arc::new(Representation::gabor(n).unwrap());
        let g = rep.preset(window).unwrap();
        FrameSystem::new(rep.clone(), g, PointSet::full(rep.group())).unwrap()
    }

    fn random_vector(rng: &mut impl Rng, d: usize) -> HilbertVector {
        HilbertVector::new(
            (0..d)
                .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect(),
        )
    }

    fn e(d: usize, i: usize) -> HilbertVector {
        HilbertVector::dirac(d, i)
    }

    fn max_entry_diff(a: &CMatrix, b: &CMatrix) -> f64 {
        (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn analysis_coefficient_examples() {
        let onb = dirac_onb(8);
        let coeffs = onb.analysis_coefficients(&e(8, 2)).unwrap();
        for (j, cj) in coeffs.iter().enumerate() {
            assert_eq!(*cj, c(if j == 2 { 1.0 } else { 0.0 }));
        }
        assert!(onb.analysis_coefficients(&HilbertVector::zeros(8)).unwrap().iter().all(|z| z.norm() == 0.0));

        let gb = full_gabor(4, "dirac0");
        let coeffs = gb.analysis_coefficients(&e(4, 0)).unwrap();
        for (j, &x) in gb.points().iter().enumerate() {
            let k = gb.rep().group().element(x).0[0];
            assert!((coeffs[j].norm() - if k == 0 { 1.0 } else { 0.0 }).abs() < 1e-12);
        }
    }

    #[test]
    fn frame_operator_examples() {
        assert!(max_entry_diff(&dirac_onb(6).frame_operator(), &CMatrix::identity(6, 6)) < 1e-15);

        let dup = [e(2, 0), e(2, 0), e(2, 1)];
        let s = linalg::outer_sum(2, &dup);
        assert!(max_entry_diff(&s, &CMatrix::from_diagonal(&nalgebra::dvector![c(2.0), c(1.0)])) < 1e-15);
        assert_eq!(system_bounds(2, &dup).unwrap(), (1.0, 2.0));

        let gb = full_gabor(4, "gauss");
        let s = gb.frame_operator();
        assert!(max_entry_diff(&s, &(CMatrix::identity(4, 4) * c(4.0))) < 1e-12);
    }

    #[test]
    fn frame_bounds_examples() {
        let (a, b) = dirac_onb(5).frame_bounds().unwrap();
        assert!((a - 1.0).abs() < 1e-12 && (b - 1.0).abs() < 1e-12);

        let rep = Arc::new(Representation::gabor(4).unwrap());
        let g = rep.group().clone();
        let translates: Vec<usize> =
            (0..4).map(|k| g.index_of(&Element(vec![k, 0])).unwrap()).collect();
        // translates of a Dirac are the standard basis
        let dirac = FrameSystem::new(rep.clone(), HilbertVector::dirac(4, 0), PointSet::new(translates.clone())).unwrap();
        assert!(dirac.frame_bounds().is_ok());
        // translates of the flat window coincide: rank one, no modulations to fill the rest
        let flat = FrameSystem::new(rep, HilbertVector::flat(4), PointSet::new(translates)).unwrap();
        assert!(matches!(flat.frame_bounds(), Err(Error::NotAFrame { .. })));
        assert!(matches!(flat.analyze(), Err(Error::NotAFrame { .. })));
    }

    #[test]
    fn canonical_dual_examples() {
        let onb = dirac_onb(4);
        let dual = onb.canonical_dual().unwrap();
        for (h, a) in dual.iter().zip(onb.atoms()) {
            assert!(h.sub(a).norm() < 1e-15);
        }

        let dup = [e(2, 0), e(2, 0), e(2, 1)];
        let s = linalg::outer_sum(2, &dup);
        let h = solve_all(&s, &dup).unwrap();
        assert!(h[0].sub(&e(2, 0).scaled(c(0.5))).norm() < 1e-15);
        assert!(h[1].sub(&e(2, 0).scaled(c(0.5))).norm() < 1e-15);
        assert!(h[2].sub(&e(2, 1)).norm() < 1e-15);

        let gb = full_gabor(4, "gauss");
        for (h, a) in gb.canonical_dual().unwrap().iter().zip(gb.atoms()) {
            assert!(h.sub(&a.scaled(c(0.25))).norm() < 1e-12);
        }
    }

    #[test]
    fn verify_dual_examples() {
        let gb = full_gabor(8, "gauss");
        assert!(gb.verify_dual(&gb.canonical_dual().unwrap()).unwrap().ok);

        let onb = dirac_onb(8);
        assert!(onb.verify_dual(onb.atoms()).unwrap().ok);
        assert_eq!(
            onb.verify_dual(&onb.atoms()[..3]).unwrap_err(),
            Error::LengthMismatch { expected: 8, found: 3 }
        );
    }

    #[test]
    fn non_tight_atoms_are_not_self_dual() {
        // {e1, e1, e2} reconstructs 2 e1 from e1
        let rep = Arc::new(Representation::translation(2).unwrap());
        let fs = FrameSystem::new(rep, e(2, 0), PointSet::new(vec![0, 0, 1])).unwrap();
        let check = fs.verify_dual(fs.atoms()).unwrap();
        assert!((check.max_error - 1.0).abs() < 1e-15);
        assert!(!check.ok);
        let (a, b) = fs.frame_bounds().unwrap();
        assert_eq!((a, b), (1.0, 2.0));

        let dual = fs.canonical_dual().unwrap();
        let bessel = bessel_bound_check(&dual, a, true);
        assert!((bessel.empirical_b_dual - 1.0).abs() < 1e-15);
        assert_eq!(bessel.ok, Some(true));
        assert_eq!(bessel_bound_check(fs.atoms(), a, false).ok, None);
    }

    #[test]
    fn bessel_examples() {
        let onb = dirac_onb(4);
        let b = bessel_bound_check(&onb.canonical_dual().unwrap(), 1.0, true);
        assert!((b.empirical_b_dual - 1.0).abs() < 1e-12 && b.ok == Some(true));

        let gb = full_gabor(4, "gauss");
        let an = gb.analyze().unwrap();
        let b = bessel_bound_check(&an.canonical_dual, an.lower, true);
        assert!((b.empirical_b_dual - 0.25).abs() < 1e-12);
        assert!((b.bound - 0.25).abs() < 1e-12);
        assert_eq!(b.ok, Some(true));
    }

    #[test]
    fn frame_inequality_and_attained_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rep = Arc::new(Representation::gabor(6).unwrap());
        let group = rep.group().clone();
        let pts = PointSet::new((0..20).map(|_| rng.random_range(0..group.order())).collect());
        let fs = FrameSystem::new(rep, random_vector(&mut rng, 6), pts).unwrap();
        let (a, b) = fs.frame_bounds().unwrap();
        let energy = |f: &HilbertVector| fs.analysis_coefficients(f).unwrap().iter().map(|c| c.norm_sqr()).sum::<f64>();
        for _ in 0..50 {
            let f = random_vector(&mut rng, 6);
            let n2 = f.norm_squared();
            let s = energy(&f);
            assert!(a * n2 <= s * (1.0 + 1e-9));
            assert!(s <= b * n2 * (1.0 + 1e-9));
        }
        let eig = linalg::hermitian_eigen(&fs.frame_operator());
        let (lo, lo_vec) = &eig[0];
        let (hi, hi_vec) = &eig[eig.len() - 1];
        assert!((energy(lo_vec) - lo).abs() < 1e-6);
        assert!((energy(hi_vec) - hi).abs() < 1e-6);
    }

    #[test]
    fn scaling_window_scales_bounds_quadratically() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let rep = Arc::new(Representation::gabor(5).unwrap());
        let g = random_vector(&mut rng, 5);
        let pts = PointSet::full(rep.group());
        let base = FrameSystem::new(rep.clone(), g.clone(), pts.clone()).unwrap().frame_bounds().unwrap();
        let s = 2.5;
        let scaled = FrameSystem::new(rep, g.scaled(c(s)), pts).unwrap().frame_bounds().unwrap();
        assert!((scaled.0 - s * s * base.0).abs() < 1e-9 * scaled.0);
        assert!((scaled.1 - s * s * base.1).abs() < 1e-9 * scaled.1);
    }

    #[test]
    fn span_projector_examples() {
        let p = span_projector(3, &[e(3, 0), e(3, 0), e(3, 1)]).unwrap();
        assert_eq!(p.rank(), 2);
        let want = CMatrix::from_diagonal(&nalgebra::dvector![c(1.0), c(1.0), c(0.0)]);
        assert!(max_entry_diff(&p.matrix(), &want) < 1e-15);

        let zero = span_projector(3, &[]).unwrap();
        assert_eq!(zero.rank(), 0);
        assert_eq!(zero.matrix(), CMatrix::zeros(3, 3));
        assert_eq!(span_projector(3, &[HilbertVector::zeros(3)]).unwrap().rank(), 0);

        let s = 0.5f64.sqrt();
        let p = span_projector(2, &[HilbertVector::from_real(&[s, s])]).unwrap();
        assert_eq!(p.rank(), 1);
        assert!(max_entry_diff(&p.matrix(), &CMatrix::from_element(2, 2, c(0.5))) < 1e-15);
    }

    #[test]
    fn projector_laws_on_random_spans() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for m in [1usize, 3, 5, 9, 12] {
            let gens: Vec<_> = (0..m).map(|_| random_vector(&mut rng, 8)).collect();
            let p = span_projector(8, &gens).unwrap();
            assert_eq!(p.rank(), m.min(8));
            for _ in 0..10 {
                let v = random_vector(&mut rng, 8);
                let w = random_vector(&mut rng, 8);
                let pv = p.apply(&v);
                assert!(p.apply(&pv).sub(&pv).norm() <= 1e-10 * v.norm());
                assert!((pv.inner(&w) - v.inner(&p.apply(&w))).norm() <= 1e-10);
            }
            for g in &gens {
                assert!(p.residual_norm(g) <= 1e-9);
            }
        }
    }

    #[test]
    fn best_approx_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let p = span_projector(4, &[e(4, 0), e(4, 1)]).unwrap();
        let inside = HilbertVector::from_real(&[1.0, -2.0, 0.0, 0.0]);
        let r = best_approx_check(&p, &inside, 50, &mut rng);
        assert!(r.proj_error < 1e-15 && r.ok);

        let outside = HilbertVector::from_real(&[0.0, 0.0, 3.0, 4.0]);
        let r = best_approx_check(&p, &outside, 50, &mut rng);
        assert!((r.proj_error - 5.0).abs() < 1e-15);
        assert!(r.min_trial_error >= 5.0 - 1e-12 && r.ok);

        let gens: Vec<_> = (0..3).map(|_| random_vector(&mut rng, 8)).collect();
        let p = span_projector(8, &gens).unwrap();
        let h = random_vector(&mut rng, 8);
        assert!(best_approx_check(&p, &h, 1000, &mut rng).ok);
    }
}
