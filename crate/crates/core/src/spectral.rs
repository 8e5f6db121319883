//! Symmetric eigenstructure: cyclic Jacobi eigensolver, tolerance-based
//! eigenvalue grouping, eigenprojections via Frobenius covariants,
//! spectral pseudo-inverses and the Cartan sum.
//!
//! Every symmetric `A` has the unique representation `A = Σ κ_i P_i` with
//! distinct eigenvalues `κ_1 < … < κ_s` and symmetric projections `P_i`
//! that are mutually orthogonal and sum to the identity. [`sym_eig`] builds
//! it from eigenvectors; [`frobenius_covariant`] builds each `P_i` from the
//! polynomial `Π_{l≠i} (A − κ_l I)/(κ_i − κ_l)` instead. The two routes are
//! independent and are cross-checked in the tests.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default relative grouping tolerance for [`sym_eig`].
pub const DEFAULT_GROUP_TOL: f64 = 1e-6;
/// Sweep cap for the Jacobi eigensolver.
pub const MAX_SWEEPS: usize = 64;

/// Dense real symmetric matrix. The upper triangle is authoritative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Build from a square matrix, mirroring its upper triangle.
    pub fn from_upper(mut m: DMatrix<f64>) -> Result<Self> {
        let n = m.nrows();
        if n == 0 || m.ncols() != n {
            return Err(Error::InvalidInput(format!("expected a non-empty square matrix, got {}x{}", m.nrows(), m.ncols())));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        for c in 0..n {
            for r in (c + 1)..n {
                m[(r, c)] = m[(c, r)];
            }
        }
        Ok(SymMatrix(m))
    }

    /// Build from a nearly symmetric matrix by averaging with its transpose.
    pub fn symmetrized(m: &DMatrix<f64>) -> Result<Self> {
        let avg = (m + m.transpose()) * 0.5;
        Self::from_upper(avg)
    }

    pub fn from_fn<F: FnMut(usize, usize) -> f64>(n: usize, f: F) -> Result<Self> {
        Self::from_upper(DMatrix::from_fn(n, n, f))
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix(DMatrix::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        SymMatrix(DMatrix::zeros(n, n))
    }

    pub fn from_diagonal(d: &[f64]) -> Result<Self> {
        Self::from_upper(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
    }

    /// `v vᵀ`.
    pub fn outer(v: &DVector<f64>) -> Self {
        SymMatrix(v * v.transpose())
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    /// Scale every entry.
    pub fn scaled(&self, s: f64) -> Self {
        SymMatrix(&self.0 * s)
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim()).map(|r| self.0.row(r).iter().copied().collect()).collect()
    }
}

impl TryFrom<Vec<Vec<f64>>> for SymMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidInput("matrix rows must all have length n".into()));
        }
        let mut m = DMatrix::zeros(n, n);
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        let asym = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| (m[(i, j)] - m[(j, i)]).abs())
            .fold(0.0, f64::max);
        let scale = m.norm().max(1.0);
        if asym > 1e-9 * scale {
            return Err(Error::InvalidInput(format!("matrix is not symmetric (asymmetry {asym:e})")));
        }
        Self::from_upper(m)
    }
}

impl From<SymMatrix> for Vec<Vec<f64>> {
    fn from(m: SymMatrix) -> Self {
        m.rows()
    }
}

/// Symmetric projection matrix of known rank.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    rank: usize,
    matrix: SymMatrix,
}

impl Projection {
    /// Wrap `matrix`, checking `RR = R` and `tr R = k` to within `tol`.
    pub fn new(matrix: SymMatrix, tol: f64) -> Result<Self> {
        let tr = matrix.trace();
        let rank = tr.round();
        let n = matrix.dim();
        if rank < 0.0 || rank as usize > n {
            return Err(Error::RankOutOfRange { n, k: rank.max(0.0) as usize });
        }
        let p = Projection { rank: rank as usize, matrix };
        let (idem, trace_err) = p.defects();
        if idem > tol || trace_err > tol {
            return Err(Error::InvalidInput(format!(
                "not a projection: |RR - R|_F = {idem:e}, |tr R - k| = {trace_err:e}"
            )));
        }
        Ok(p)
    }

    /// Projection onto the span of the orthonormal columns of `frame`.
    pub fn from_frame(frame: &DMatrix<f64>) -> Result<Self> {
        let m = frame * frame.transpose();
        Ok(Projection { rank: frame.ncols(), matrix: SymMatrix::symmetrized(&m)? })
    }

    pub(crate) fn from_parts(rank: usize, matrix: SymMatrix) -> Self {
        Projection { rank, matrix }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &SymMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> SymMatrix {
        self.matrix
    }

    /// `(‖RR − R‖_F, |tr R − k|)`.
    pub fn defects(&self) -> (f64, f64) {
        let r = self.matrix.as_matrix();
        ((r * r - r).norm(), (r.trace() - self.rank as f64).abs())
    }
}

/// Eigendecomposition with eigenvalues grouped into distinct clusters.
#[derive(Debug, Clone)]
pub struct SpectralDecomp {
    /// Strictly increasing distinct eigenvalues (cluster means).
    pub kappas: Vec<f64>,
    /// Multiplicities; sums to `n`.
    pub mults: Vec<usize>,
    /// Eigenprojections, one per cluster.
    pub projections: Vec<SymMatrix>,
    /// All `n` eigenvalues, ascending, before grouping.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors as columns, matching `eigenvalues`.
    pub eigenvectors: DMatrix<f64>,
    pub group_tol: f64,
    /// `max(1, ρ(A))`; gaps are compared against `group_tol * scale`.
    pub scale: f64,
    pub sweeps: usize,
}

impl SpectralDecomp {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Number of distinct eigenvalues `s`.
    pub fn len(&self) -> usize {
        self.kappas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kappas.is_empty()
    }

    /// Tolerance used for projection invariants: `100·ε·n + group_tol`.
    pub fn tol_proj(&self) -> f64 {
        100.0 * f64::EPSILON * self.n() as f64 + self.group_tol
    }

    /// Absolute merge threshold `group_tol · max(1, ρ)`.
    pub fn merge_threshold(&self) -> f64 {
        self.group_tol * self.scale
    }

    /// Gaps between consecutive raw eigenvalues.
    pub fn gaps(&self) -> Vec<f64> {
        self.eigenvalues.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// `Σ κ_i P_i`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let n = self.n();
        self.kappas
            .iter()
            .zip(&self.projections)
            .fold(DMatrix::zeros(n, n), |acc, (k, p)| acc + p.as_matrix() * *k)
    }

    pub fn projection(&self, i: usize) -> Projection {
        Projection::from_parts(self.mults[i], self.projections[i].clone())
    }
}

/// Cyclic Jacobi eigensolver. Returns ascending eigenvalues, the matching
/// eigenvector columns and the number of sweeps used.
///
/// Sweeps visit `(p, q)` pairs in row-major order, so results are bitwise
/// reproducible for a given input.
pub fn jacobi_eigen(a: &SymMatrix) -> Result<(Vec<f64>, DMatrix<f64>, usize)> {
    let n = a.dim();
    let mut m = a.as_matrix().clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let norm = m.norm();
    let mut sweeps = 0;
    if norm > 0.0 {
        loop {
            let off: f64 = (0..n).flat_map(|p| ((p + 1)..n).map(move |q| (p, q))).map(|(p, q)| m[(p, q)].powi(2)).sum();
            if off.sqrt() <= f64::EPSILON * 1e-2 * norm {
                break;
            }
            if sweeps == MAX_SWEEPS {
                return Err(Error::NoConvergence { iterations: sweeps });
            }
            sweeps += 1;
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = m[(p, q)];
                    if apq == 0.0 {
                        continue;
                    }
                    let app = m[(p, p)];
                    let aqq = m[(q, q)];
                    // skip rotations that cannot change the diagonal after the warm-up sweeps
                    if sweeps > 4 && apq.abs() * 1e18 < app.abs().min(aqq.abs()) {
                        m[(p, q)] = 0.0;
                        m[(q, p)] = 0.0;
                        continue;
                    }
                    let theta = (aqq - app) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    rotate(&mut m, &mut v, p, q, c, s, t);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]));
    let vals = order.iter().map(|&i| m[(i, i)]).collect();
    let vecs = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok((vals, vecs, sweeps))
}

fn rotate(m: &mut DMatrix<f64>, v: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64, t: f64) {
    let n = m.nrows();
    let apq = m[(p, q)];
    m[(p, p)] -= t * apq;
    m[(q, q)] += t * apq;
    m[(p, q)] = 0.0;
    m[(q, p)] = 0.0;
    for r in 0..n {
        if r != p && r != q {
            let arp = m[(r, p)];
            let arq = m[(r, q)];
            let np = c * arp - s * arq;
            let nq = s * arp + c * arq;
            m[(r, p)] = np;
            m[(p, r)] = np;
            m[(r, q)] = nq;
            m[(q, r)] = nq;
        }
    }
    for r in 0..n {
        let vrp = v[(r, p)];
        let vrq = v[(r, q)];
        v[(r, p)] = c * vrp - s * vrq;
        v[(r, q)] = s * vrp + c * vrq;
    }
}

/// Eigendecomposition of `a` with eigenvalues grouped into clusters.
///
/// Consecutive eigenvalues whose gap is at most `group_tol · max(1, ρ(A))`
/// are merged (transitively). Each cluster reports the mean of its members
/// and the symmetrized sum of its eigenvector outer products.
pub fn sym_eig(a: &SymMatrix, group_tol: f64) -> Result<SpectralDecomp> {
    if !(group_tol > 0.0) {
        return Err(Error::InvalidInput("group_tol must be positive".into()));
    }
    let (vals, vecs, sweeps) = jacobi_eigen(a)?;
    let n = vals.len();
    let rho = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = rho.max(1.0);
    let threshold = group_tol * scale;

    let mut kappas = Vec::new();
    let mut mults = Vec::new();
    let mut projections = Vec::new();
    let mut start = 0;
    for end in 1..=n {
        if end < n && vals[end] - vals[end - 1] <= threshold {
            continue;
        }
        let members = start..end;
        let mean = vals[members.clone()].iter().sum::<f64>() / (end - start) as f64;
        let mut p = DMatrix::<f64>::zeros(n, n);
        for c in members {
            let col = vecs.column(c);
            p += col * col.transpose();
        }
        kappas.push(mean);
        mults.push(end - start);
        projections.push(SymMatrix::symmetrized(&p)?);
        start = end;
    }
    Ok(SpectralDecomp { kappas, mults, projections, eigenvalues: vals, eigenvectors: vecs, group_tol, scale, sweeps })
}

/// Eigenprojection `P_i = Π_{l≠i} (A − κ_l I)/(κ_i − κ_l)` for the full
/// distinct spectrum `kappas` of `a`. With a single eigenvalue the empty
/// product is the identity.
pub fn frobenius_covariant(a: &SymMatrix, kappas: &[f64], i: usize, group_tol: f64) -> Result<Projection> {
    let n = a.dim();
    if i >= kappas.len() {
        return Err(Error::InvalidInput(format!("index {i} out of range for {} eigenvalues", kappas.len())));
    }
    let rho = kappas.iter().fold(0.0f64, |m, k| m.max(k.abs()));
    let tol = group_tol * rho.max(1.0);
    let eye = DMatrix::<f64>::identity(n, n);
    let mut prod = eye.clone();
    for (l, &kl) in kappas.iter().enumerate() {
        if l == i {
            continue;
        }
        let gap = kappas[i] - kl;
        if gap.abs() < tol {
            return Err(Error::DegenerateSpectrum { gap: gap.abs(), tol });
        }
        prod = prod * (a.as_matrix() - &eye * kl) / gap;
    }
    let matrix = SymMatrix::symmetrized(&prod)?;
    let rank = matrix.trace().round().clamp(0.0, n as f64) as usize;
    Ok(Projection::from_parts(rank, matrix))
}

/// Pseudo-inverse `H_i† = Σ_{k≠i} P_k/(κ_i − κ_k)`, which satisfies
/// `(κ_i I − A) H_i† = I − P_i`.
pub fn pseudo_inverse(dec: &SpectralDecomp, i: usize) -> Result<SymMatrix> {
    if i >= dec.len() {
        return Err(Error::InvalidInput(format!("index {i} out of range for {} eigenvalues", dec.len())));
    }
    let n = dec.n();
    let tol = dec.merge_threshold();
    let mut acc = DMatrix::<f64>::zeros(n, n);
    for (k, (&kk, p)) in dec.kappas.iter().zip(&dec.projections).enumerate() {
        if k == i {
            continue;
        }
        let gap = dec.kappas[i] - kk;
        if gap.abs() < tol {
            return Err(Error::DegenerateSpectrum { gap: gap.abs(), tol });
        }
        acc += p.as_matrix() / gap;
    }
    SymMatrix::symmetrized(&acc)
}

/// Cartan sum `Σ_{j≠i} d_j κ_i κ_j/(κ_i − κ_j)`. Terms with `κ_j = 0`
/// contribute exactly zero.
pub fn cartan_sum(kappas: &[f64], mults: &[usize], i: usize) -> Result<f64> {
    check_cartan_args(kappas, mults, i)?;
    let ki = kappas[i];
    Ok(kappas
        .iter()
        .zip(mults)
        .enumerate()
        .filter(|&(j, (&kj, _))| j != i && kj != 0.0)
        .map(|(_, (&kj, &d))| d as f64 * ki * kj / (ki - kj))
        .sum())
}

/// The factors `κ_j/(κ_i − κ_j)` over nonzero `κ_j`, `j ≠ i`.
///
/// When `κ_i` is the nonzero eigenvalue of smallest modulus every factor is
/// strictly negative, which is why the Cartan sum cannot vanish for two or
/// more distinct nonzero eigenvalues.
pub fn cartan_terms(kappas: &[f64], i: usize) -> Result<Vec<f64>> {
    let ones = vec![1; kappas.len()];
    check_cartan_args(kappas, &ones, i)?;
    let ki = kappas[i];
    Ok(kappas
        .iter()
        .enumerate()
        .filter(|&(j, &kj)| j != i && kj != 0.0)
        .map(|(_, &kj)| kj / (ki - kj))
        .collect())
}

fn check_cartan_args(kappas: &[f64], mults: &[usize], i: usize) -> Result<()> {
    if kappas.len() != mults.len() {
        return Err(Error::DimensionMismatch { expected: kappas.len(), found: mults.len() });
    }
    if i >= kappas.len() {
        return Err(Error::InvalidInput(format!("index {i} out of range for {} eigenvalues", kappas.len())));
    }
    for (j, &kj) in kappas.iter().enumerate() {
        if j != i && kj == kappas[i] {
            return Err(Error::DegenerateSpectrum { gap: 0.0, tol: 0.0 });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_orthogonal(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
        g.qr().q()
    }

    fn frob(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).norm()
    }

    fn assert_invariants(a: &SymMatrix, dec: &SpectralDecomp) {
        let tol = dec.tol_proj();
        let n = a.dim();
        let eye = DMatrix::<f64>::identity(n, n);
        let mut sum = DMatrix::zeros(n, n);
        for (i, pi) in dec.projections.iter().enumerate() {
            sum += pi.as_matrix();
            assert!((pi.trace() - dec.mults[i] as f64).abs() <= tol);
            let res = a.as_matrix() * pi.as_matrix() - pi.as_matrix() * dec.kappas[i];
            assert!(res.norm() <= 1e-10 * (1.0 + a.frobenius_norm()), "residual {}", res.norm());
            for (j, pj) in dec.projections.iter().enumerate() {
                let expect = if i == j { pi.as_matrix().clone() } else { DMatrix::zeros(n, n) };
                assert!(frob(&(pi.as_matrix() * pj.as_matrix()), &expect) <= tol);
            }
        }
        assert!(frob(&sum, &eye) <= tol);
        assert_eq!(dec.mults.iter().sum::<usize>(), n);
        assert!(dec.kappas.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn diagonal_with_repeated_eigenvalue() {
        let a = SymMatrix::from_diagonal(&[2.0, 2.0, 5.0]).unwrap();
        let dec = sym_eig(&a, 1e-8).unwrap();
        assert_eq!(dec.kappas, vec![2.0, 5.0]);
        assert_eq!(dec.mults, vec![2, 1]);
        let p1 = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, 0.0]));
        let p2 = DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 0.0, 1.0]));
        assert!(frob(dec.projections[0].as_matrix(), &p1) < 1e-15);
        assert!(frob(dec.projections[1].as_matrix(), &p2) < 1e-15);
        assert_invariants(&a, &dec);
    }

    #[test]
    fn identity_is_one_cluster() {
        let a = SymMatrix::identity(4);
        let dec = sym_eig(&a, 1e-8).unwrap();
        assert_eq!(dec.kappas, vec![1.0]);
        assert_eq!(dec.mults, vec![4]);
        assert!(frob(dec.projections[0].as_matrix(), &DMatrix::identity(4, 4)) < 1e-15);
    }

    #[test]
    fn rotated_spectrum_recovers_projections() {
        let q = random_orthogonal(3, 11);
        let lam = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -1.0, 3.0]));
        let a = SymMatrix::symmetrized(&(&q * lam * q.transpose())).unwrap();
        let dec = sym_eig(&a, 1e-8).unwrap();
        assert_eq!(dec.mults, vec![2, 1]);
        assert!((dec.kappas[0] + 1.0).abs() < 1e-12 && (dec.kappas[1] - 3.0).abs() < 1e-12);
        let p1 = &q * DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, 0.0])) * q.transpose();
        assert!(frob(dec.projections[0].as_matrix(), &p1) < 1e-12);
        assert_invariants(&a, &dec);

        let cov = frobenius_covariant(&a, &dec.kappas, 1, 1e-8).unwrap();
        assert!(frob(cov.matrix().as_matrix(), dec.projections[1].as_matrix()) < 1e-10);
        assert_eq!(cov.rank(), 1);
    }

    #[test]
    fn covariant_of_diagonal() {
        let a = SymMatrix::from_diagonal(&[2.0, 2.0, 5.0]).unwrap();
        let p = frobenius_covariant(&a, &[2.0, 5.0], 0, 1e-8).unwrap();
        let expect = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, 0.0]));
        assert!(frob(p.matrix().as_matrix(), &expect) < 1e-15);
        assert_eq!(p.rank(), 2);
    }

    #[test]
    fn covariant_empty_product_is_identity() {
        let a = SymMatrix::identity(3).scaled(7.5);
        let p = frobenius_covariant(&a, &[7.5], 0, 1e-8).unwrap();
        assert_eq!(p.matrix().as_matrix(), &DMatrix::identity(3, 3));
    }

    #[test]
    fn covariant_rejects_close_eigenvalues() {
        let a = SymMatrix::from_diagonal(&[1.0, 1.0 + 1e-10]).unwrap();
        let err = frobenius_covariant(&a, &[1.0, 1.0 + 1e-10], 0, 1e-6).unwrap_err();
        assert!(matches!(err, Error::DegenerateSpectrum { .. }));
    }

    #[test]
    fn pseudo_inverse_examples() {
        let a = SymMatrix::from_diagonal(&[2.0, 5.0]).unwrap();
        let dec = sym_eig(&a, 1e-8).unwrap();
        let h = pseudo_inverse(&dec, 0).unwrap();
        let expect = DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, -1.0 / 3.0]));
        assert!(frob(h.as_matrix(), &expect) < 1e-15);
        let lhs = (DMatrix::identity(2, 2) * 2.0 - a.as_matrix()) * h.as_matrix();
        let rhs = DMatrix::identity(2, 2) - dec.projections[0].as_matrix();
        assert!(frob(&lhs, &rhs) < 1e-15);

        let a = SymMatrix::from_diagonal(&[0.0, 1.0, 3.0]).unwrap();
        let dec = sym_eig(&a, 1e-8).unwrap();
        let h = pseudo_inverse(&dec, 1).unwrap();
        let expect = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0, -0.5]));
        assert!(frob(h.as_matrix(), &expect) < 1e-15);

        let dec = sym_eig(&SymMatrix::identity(3), 1e-8).unwrap();
        assert_eq!(pseudo_inverse(&dec, 0).unwrap().frobenius_norm(), 0.0);
    }

    #[test]
    fn cartan_examples() {
        assert_eq!(cartan_sum(&[0.0, 1.7], &[4, 1], 1).unwrap(), 0.0);
        assert_eq!(cartan_sum(&[0.0, 1.0, 2.0], &[1, 1, 1], 1).unwrap(), -2.0);
        let s = cartan_sum(&[0.0, -1.0, 3.0], &[2, 1, 1], 1).unwrap();
        assert!((s - 0.75).abs() < 1e-15);
        let terms = cartan_terms(&[0.0, -1.0, 3.0], 1).unwrap();
        assert_eq!(terms, vec![3.0 / -4.0]);
    }

    #[test]
    fn non_finite_entries_are_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, f64::NAN, 0.0, 1.0]);
        assert_eq!(SymMatrix::from_upper(m), Err(Error::NonFinite));
    }

    #[test]
    fn upper_triangle_is_authoritative() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 99.0, 3.0]);
        let s = SymMatrix::from_upper(m).unwrap();
        assert_eq!(s.get(1, 0), 2.0);
    }

    #[test]
    fn projection_validation() {
        let p = Projection::new(SymMatrix::from_diagonal(&[1.0, 0.0, 1.0]).unwrap(), 1e-12).unwrap();
        assert_eq!(p.rank(), 2);
        assert!(Projection::new(SymMatrix::from_diagonal(&[0.5, 0.5]).unwrap(), 1e-12).is_err());
    }

    #[test]
    fn jacobi_is_deterministic() {
        let q = random_orthogonal(6, 3);
        let lam = DMatrix::from_diagonal(&DVector::from_vec(vec![-2.0, 0.5, 0.5, 1.0, 4.0, 9.0]));
        let a = SymMatrix::symmetrized(&(&q * lam * q.transpose())).unwrap();
        let (v1, e1, _) = jacobi_eigen(&a).unwrap();
        let (v2, e2, _) = jacobi_eigen(&a).unwrap();
        assert_eq!(v1, v2);
        assert_eq!(e1, e2);
    }
}
