//! Small dense complex linear algebra for one- and two-qubit Hilbert spaces.
//!
//! The two-qubit basis is ordered `|ee⟩, |eℓ⟩, |ℓe⟩, |ℓℓ⟩` with the 794 nm
//! qubit as the first tensor factor and the 1535 nm qubit as the second.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, TAU};
use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};
use std::str::FromStr;

pub use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when checking that an input is Hermitian before diagonalizing.
pub const HERMITIAN_INPUT_TOL: f64 = 1e-8;
/// Eigenvalues in `[-PSD_CLAMP, 0)` are treated as zero; anything more negative is an error.
pub const PSD_CLAMP: f64 = 1e-9;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Dense square complex matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    n: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![ZERO; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(d, 0.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("matrix rows must form a square array"));
        }
        Ok(Self {
            n,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let rows: Vec<Vec<C64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| C64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    /// `|v⟩⟨w|`
    pub fn outer(v: &[C64], w: &[C64]) -> Self {
        assert_eq!(v.len(), w.len());
        let n = v.len();
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = v[i] * w[j].conj();
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                m[(j, i)] = self[(i, j)].conj();
            }
        }
        m
    }

    /// Elementwise complex conjugate in the computational basis.
    pub fn conj(&self) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn trace(&self) -> C64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    /// `Re Tr(self · other)` without forming the product.
    pub fn trace_product_re(&self, other: &CMatrix) -> f64 {
        debug_assert_eq!(self.n, other.n);
        let n = self.n;
        let mut acc = 0.0;
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                let b = other.data[k * n + i];
                acc += a.re * b.re - a.im * b.im;
            }
        }
        acc
    }

    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        assert_eq!(self.n, other.n);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `‖M − M†‖_max`
    pub fn hermiticity_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in i..self.n {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// `(M + M†)/2`
    pub fn hermitian_part(&self) -> Self {
        let mut m = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                m[(i, j)] = (self[(i, j)] + self[(j, i)].conj()) * 0.5;
            }
        }
        m
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.n);
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.n + c]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.n + c]
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.n, rhs.n, "dimension mismatch in matrix product");
        let n = self.n;
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == ZERO {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * rhs.data[k * n + j];
                }
            }
        }
        out
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.n, rhs.n);
        CMatrix {
            n: self.n,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.n, rhs.n);
        CMatrix {
            n: self.n,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

/// Kronecker product of two 2×2 matrices. The first factor indexes the 794 nm qubit.
pub fn tensor_product(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if a.n != 2 || b.n != 2 {
        return Err(Error::invalid(format!(
            "tensor_product expects two 2x2 factors, got {}x{} and {}x{}",
            a.n, a.n, b.n, b.n
        )));
    }
    let mut out = CMatrix::zeros(4);
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    out[(2 * i + k, 2 * j + l)] = a[(i, j)] * b[(k, l)];
                }
            }
        }
    }
    Ok(out)
}

pub fn kron_vec(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter()
        .flat_map(|&x| b.iter().map(move |&y| x * y))
        .collect()
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues sorted descending.
#[derive(Clone, Debug)]
pub struct Eigensystem {
    pub values: Vec<f64>,
    /// `vectors[i]` belongs to `values[i]`.
    pub vectors: Vec<Vec<C64>>,
}

impl Eigensystem {
    /// `Σ f(λᵢ) vᵢvᵢ†`
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let n = self.values.len();
        let mut m = CMatrix::zeros(n);
        for (&lambda, v) in self.values.iter().zip(&self.vectors) {
            let w = f(lambda);
            if w == 0.0 {
                continue;
            }
            for i in 0..n {
                for j in 0..n {
                    m[(i, j)] += v[i] * v[j].conj() * w;
                }
            }
        }
        m
    }
}

pub fn hermitian_eigensystem(m: &CMatrix) -> Result<Eigensystem> {
    let scale = m.data.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let herr = m.hermiticity_error();
    if herr > HERMITIAN_INPUT_TOL * scale {
        return Err(Error::invalid(format!(
            "matrix is not Hermitian (‖M − M†‖_max = {herr:.3e})"
        )));
    }
    let h = m.hermitian_part();
    let mut pairs = match h.n {
        0 => Vec::new(),
        1 => vec![(h[(0, 0)].re, vec![ONE])],
        2 => eig2(&h),
        _ => jacobi(h),
    };
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (values, vectors) = pairs.into_iter().unzip();
    Ok(Eigensystem { values, vectors })
}

fn eig2(h: &CMatrix) -> Vec<(f64, Vec<C64>)> {
    let a = h[(0, 0)].re;
    let d = h[(1, 1)].re;
    let b = h[(0, 1)];
    let mean = 0.5 * (a + d);
    let radius = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
    let (hi, lo) = (mean + radius, mean - radius);
    if b.norm() <= 1e-300 || b.norm() < 1e-15 * radius.max(f64::MIN_POSITIVE) {
        let e0 = vec![ONE, ZERO];
        let e1 = vec![ZERO, ONE];
        return if a >= d {
            vec![(a, e0), (d, e1)]
        } else {
            vec![(d, e1), (a, e0)]
        };
    }
    let vec_for = |lambda: f64| {
        // Choose the better-conditioned of the two row equations.
        let v = if (lambda - a).abs() >= (lambda - d).abs() {
            vec![b, C64::new(lambda - a, 0.0)]
        } else {
            vec![C64::new(lambda - d, 0.0), b.conj()]
        };
        normalize(v)
    };
    vec![(hi, vec_for(hi)), (lo, vec_for(lo))]
}

/// Cyclic complex Jacobi rotations.
fn jacobi(mut a: CMatrix) -> Vec<(f64, Vec<C64>)> {
    let n = a.n;
    let mut v = CMatrix::identity(n);
    let norm: f64 = a.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * norm.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let mag = apq.norm();
                if mag == 0.0 {
                    continue;
                }
                // Phase rotation on column/row q makes a[p][q] real and positive.
                let phase = apq / mag;
                let tau = (a[(q, q)].re - a[(p, p)].re) / (2.0 * mag);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let t = if tau == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // J = U·R with U = diag(1, .., conj(phase) at q, ..), R the real rotation.
                // Columns of J: col p = c·e_p − s·conj(phase)·e_q ; col q = s·e_p + c·conj(phase)·e_q
                let jpp = C64::new(c, 0.0);
                let jqp = -phase.conj() * s;
                let jpq = C64::new(s, 0.0);
                let jqq = phase.conj() * c;
                // A ← A·J (columns p, q)
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * jpp + akq * jqp;
                    a[(k, q)] = akp * jpq + akq * jqq;
                }
                // A ← J†·A (rows p, q)
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = jpp.conj() * apk + jqp.conj() * aqk;
                    a[(q, k)] = jpq.conj() * apk + jqq.conj() * aqk;
                }
                a[(p, q)] = ZERO;
                a[(q, p)] = ZERO;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * jpp + vkq * jqp;
                    v[(k, q)] = vkp * jpq + vkq * jqq;
                }
            }
        }
    }
    (0..n)
        .map(|i| (a[(i, i)].re, (0..n).map(|k| v[(k, i)]).collect()))
        .collect()
}

fn normalize(v: Vec<C64>) -> Vec<C64> {
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / norm).collect()
}

/// Principal square root of a positive semidefinite Hermitian matrix.
pub fn matrix_sqrt_psd(m: &CMatrix) -> Result<CMatrix> {
    let eig = hermitian_eigensystem(m)?;
    check_psd(&eig)?;
    Ok(eig.reconstruct_with(|l| l.max(0.0).sqrt()))
}

/// Singular values in descending order (one-sided Jacobi on the columns).
///
/// Small singular values are obtained to absolute accuracy `~ε‖M‖` without squaring
/// the matrix.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    let n = m.dim();
    let mut cols: Vec<Vec<C64>> = (0..n).map(|j| (0..n).map(|i| m[(i, j)]).collect()).collect();
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha: f64 = cols[p].iter().map(|z| z.norm_sqr()).sum();
                let beta: f64 = cols[q].iter().map(|z| z.norm_sqr()).sum();
                let gamma: C64 = cols[p].iter().zip(&cols[q]).map(|(a, b)| a.conj() * b).sum();
                let g = gamma.norm();
                if g <= 1e-15 * (alpha * beta).sqrt() || g == 0.0 {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..n {
                    let a = cols[p][i];
                    let b = cols[q][i] * phase.conj();
                    cols[p][i] = a * c - b * s;
                    cols[q][i] = a * s + b * c;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut values: Vec<f64> = cols
        .iter()
        .map(|c| c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
        .collect();
    values.sort_by(|a, b| b.total_cmp(a));
    values
}

fn check_psd(eig: &Eigensystem) -> Result<()> {
    match eig.values.last() {
        Some(&min) if min < -PSD_CLAMP => Err(Error::invalid(format!(
            "matrix is not positive semidefinite (smallest eigenvalue {min:.3e})"
        ))),
        _ => Ok(()),
    }
}

/// A normalized pure state of one or two time-bin qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct Ket {
    amplitudes: Vec<C64>,
    labels: Vec<String>,
}

impl Ket {
    /// Normalizes `amplitudes`; labels default to the time-bin basis names.
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        let labels = match amplitudes.len() {
            2 => vec!["e", "ℓ"],
            4 => vec!["ee", "eℓ", "ℓe", "ℓℓ"],
            d => return Err(Error::invalid(format!("ket dimension must be 2 or 4, got {d}"))),
        };
        let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 1e-300) {
            return Err(Error::invalid("ket has zero norm"));
        }
        Ok(Self {
            amplitudes: amplitudes.into_iter().map(|z| z / norm).collect(),
            labels: labels.into_iter().map(String::from).collect(),
        })
    }

    /// `(|ee⟩ + e^{iφ}|ℓℓ⟩)/√2`
    pub fn phi_plus_with_phase(phase: f64) -> Self {
        let a = C64::new(FRAC_1_SQRT_2, 0.0);
        Self::new(vec![a, ZERO, ZERO, C64::from_polar(FRAC_1_SQRT_2, phase)]).unwrap()
    }

    pub fn phi_plus() -> Self {
        Self::phi_plus_with_phase(0.0)
    }

    /// Two-qubit computational basis state, index in `|ee⟩, |eℓ⟩, |ℓe⟩, |ℓℓ⟩` order.
    pub fn basis(index: usize) -> Self {
        let mut amps = vec![ZERO; 4];
        amps[index] = ONE;
        Self::new(amps).unwrap()
    }

    pub fn product(a: &Ket, b: &Ket) -> Result<Self> {
        if a.dim() != 2 || b.dim() != 2 {
            return Err(Error::invalid("product ket needs two single-qubit factors"));
        }
        Self::new(kron_vec(&a.amplitudes, &b.amplitudes))
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn inner(&self, other: &Ket) -> C64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn projector(&self) -> CMatrix {
        CMatrix::outer(&self.amplitudes, &self.amplitudes)
    }
}

/// Hermitian, unit-trace, positive semidefinite 2×2 or 4×4 matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    pub const HERMITIAN_TOL: f64 = 1e-10;
    pub const TRACE_TOL: f64 = 1e-10;

    pub fn new(m: CMatrix) -> Result<Self> {
        if m.n != 2 && m.n != 4 {
            return Err(Error::invalid(format!(
                "density matrix dimension must be 2 or 4, got {}",
                m.n
            )));
        }
        let herr = m.hermiticity_error();
        if herr >= Self::HERMITIAN_TOL {
            return Err(Error::invalid(format!(
                "density matrix is not Hermitian (error {herr:.3e})"
            )));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() >= Self::TRACE_TOL || tr.im.abs() >= Self::TRACE_TOL {
            return Err(Error::invalid(format!(
                "density matrix trace is {tr}, expected 1"
            )));
        }
        let eig = hermitian_eigensystem(&m)?;
        check_psd(&eig)?;
        Ok(Self(m))
    }

    /// Skips validation; caller guarantees the invariants by construction.
    pub(crate) fn from_valid(m: CMatrix) -> Self {
        Self(m)
    }

    pub fn pure(ket: &Ket) -> Self {
        Self(ket.projector())
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self(CMatrix::identity(dim).scale_re(1.0 / dim as f64))
    }

    /// `p·|φ⁺⟩⟨φ⁺| + (1−p)·I/4`
    pub fn werner(p: f64) -> Result<Self> {
        if !(-1.0 / 3.0..=1.0).contains(&p) {
            return Err(Error::invalid(format!("Werner weight {p} outside [-1/3, 1]")));
        }
        Ok(Self::pure(&Ket::phi_plus()).mix_with_white(1.0 - p))
    }

    /// `(1−w)·ρ + w·I/d`
    pub fn mix_with_white(&self, w: f64) -> Self {
        let d = self.dim();
        let noise = CMatrix::identity(d).scale_re(w / d as f64);
        Self(&self.0.scale_re(1.0 - w) + &noise)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.n
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigensystem(&self.0)
            .map(|e| e.values)
            .unwrap_or_default()
    }

    /// `Re Tr(ρ·op)`
    pub fn expectation(&self, op: &CMatrix) -> f64 {
        self.0.trace_product_re(op)
    }

    /// Reduced state of one qubit (`keep = 0` for the 794 nm qubit, `1` for 1535 nm).
    pub fn partial_trace(&self, keep: usize) -> Result<DensityMatrix> {
        if self.dim() != 4 || keep > 1 {
            return Err(Error::invalid("partial trace needs a two-qubit state and keep ∈ {0,1}"));
        }
        let mut out = CMatrix::zeros(2);
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = ZERO;
                for k in 0..2 {
                    let (r, c) = if keep == 0 {
                        (2 * i + k, 2 * j + k)
                    } else {
                        (2 * k + i, 2 * k + j)
                    };
                    acc += self.0[(r, c)];
                }
                out[(i, j)] = acc;
            }
        }
        Ok(Self(out))
    }

    /// `½ Σ|λᵢ(ρ − σ)|`
    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::invalid("trace distance of states with different dimensions"));
        }
        let diff = &self.0 - &other.0;
        let eig = hermitian_eigensystem(&diff)?;
        Ok(0.5 * eig.values.iter().map(|l| l.abs()).sum::<f64>())
    }
}

/// Output port of an analyzing interferometer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Port {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Port {
    pub fn sign(self) -> f64 {
        match self {
            Port::Plus => 1.0,
            Port::Minus => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Port::Plus => Port::Minus,
            Port::Minus => Port::Plus,
        }
    }
}

impl fmt::Display for Port {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Port::Plus => "+",
            Port::Minus => "-",
        })
    }
}

/// Single-qubit projective measurement setting.
///
/// `Phase { theta, port }` projects onto `(|e⟩ + port·e^{iθ}|ℓ⟩)/√2`; the X and Y
/// variants are shorthands for `θ = 0` and `θ = π/2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ProjectorSetting {
    Z,
    ZMinus,
    X,
    XMinus,
    Y,
    YMinus,
    Phase { theta: f64, port: Port },
}

impl ProjectorSetting {
    /// Normalizes `theta` into `[0, 2π)`.
    pub fn phase(theta: f64, port: Port) -> Self {
        let mut t = theta.rem_euclid(TAU);
        if t >= TAU {
            t = 0.0;
        }
        ProjectorSetting::Phase { theta: t, port }
    }

    /// `(σ_x + σ_y)/√2` eigenstate.
    pub fn x_plus_y(port: Port) -> Self {
        Self::phase(FRAC_PI_4, port)
    }

    /// `(σ_x − σ_y)/√2` eigenstate.
    pub fn x_minus_y(port: Port) -> Self {
        Self::phase(-FRAC_PI_4, port)
    }

    /// The interferometer phase and port realizing this setting, `None` for Z-type settings.
    pub fn as_phase(&self) -> Option<(f64, Port)> {
        match *self {
            ProjectorSetting::Z | ProjectorSetting::ZMinus => None,
            ProjectorSetting::X => Some((0.0, Port::Plus)),
            ProjectorSetting::XMinus => Some((0.0, Port::Minus)),
            ProjectorSetting::Y => Some((FRAC_PI_2, Port::Plus)),
            ProjectorSetting::YMinus => Some((FRAC_PI_2, Port::Minus)),
            ProjectorSetting::Phase { theta, port } => Some((theta, port)),
        }
    }

    /// The orthogonal outcome of the same measurement.
    pub fn negated(&self) -> Self {
        match *self {
            ProjectorSetting::Z => ProjectorSetting::ZMinus,
            ProjectorSetting::ZMinus => ProjectorSetting::Z,
            ProjectorSetting::X => ProjectorSetting::XMinus,
            ProjectorSetting::XMinus => ProjectorSetting::X,
            ProjectorSetting::Y => ProjectorSetting::YMinus,
            ProjectorSetting::YMinus => ProjectorSetting::Y,
            ProjectorSetting::Phase { theta, port } => ProjectorSetting::Phase {
                theta,
                port: port.flipped(),
            },
        }
    }
}

fn close_angle(a: f64, b: f64) -> bool {
    let d = (a - b).rem_euclid(TAU);
    d < 1e-12 || TAU - d < 1e-12
}

impl fmt::Display for ProjectorSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ProjectorSetting::Z => f.write_str("Z"),
            ProjectorSetting::ZMinus => f.write_str("Z-"),
            ProjectorSetting::X => f.write_str("X"),
            ProjectorSetting::XMinus => f.write_str("X-"),
            ProjectorSetting::Y => f.write_str("Y"),
            ProjectorSetting::YMinus => f.write_str("Y-"),
            ProjectorSetting::Phase { theta, port } => {
                let suffix = if port == Port::Minus { "-" } else { "" };
                if close_angle(theta, FRAC_PI_4) {
                    write!(f, "XpY{suffix}")
                } else if close_angle(theta, -FRAC_PI_4) {
                    write!(f, "XmY{suffix}")
                } else {
                    write!(f, "PHASE:{theta}:{port}")
                }
            }
        }
    }
}

impl FromStr for ProjectorSetting {
    type Err = Error;

    /// Tokens: `Z, Z-, X, X-, Y, Y-, XpY, XpY-, XmY, XmY-` or `PHASE:<radians>:<+|->`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Ok(match s {
            "Z" => ProjectorSetting::Z,
            "Z-" => ProjectorSetting::ZMinus,
            "X" => ProjectorSetting::X,
            "X-" => ProjectorSetting::XMinus,
            "Y" => ProjectorSetting::Y,
            "Y-" => ProjectorSetting::YMinus,
            "XpY" => Self::x_plus_y(Port::Plus),
            "XpY-" => Self::x_plus_y(Port::Minus),
            "XmY" => Self::x_minus_y(Port::Plus),
            "XmY-" => Self::x_minus_y(Port::Minus),
            _ => {
                let parts: Vec<&str> = s.split(':').collect();
                match parts.as_slice() {
                    ["PHASE", theta, port] => {
                        let theta: f64 = theta
                            .parse()
                            .map_err(|_| Error::invalid(format!("bad phase in setting `{s}`")))?;
                        let port = match *port {
                            "+" | "+1" => Port::Plus,
                            "-" | "-1" => Port::Minus,
                            _ => return Err(Error::invalid(format!("bad port in setting `{s}`"))),
                        };
                        Self::phase(theta, port)
                    }
                    _ => return Err(Error::invalid(format!("unknown projector setting `{s}`"))),
                }
            }
        })
    }
}

/// Rank-one projector for a single-qubit setting.
pub fn projector(setting: ProjectorSetting) -> CMatrix {
    match setting.as_phase() {
        None => {
            if setting == ProjectorSetting::Z {
                CMatrix::from_diag(&[1.0, 0.0])
            } else {
                CMatrix::from_diag(&[0.0, 1.0])
            }
        }
        Some((theta, port)) => {
            let v = [
                C64::new(FRAC_1_SQRT_2, 0.0),
                C64::from_polar(FRAC_1_SQRT_2 * port.sign(), theta),
            ];
            CMatrix::outer(&v, &v)
        }
    }
}

/// `projector(a) ⊗ projector(b)`
pub fn joint_projector(a: ProjectorSetting, b: ProjectorSetting) -> CMatrix {
    tensor_product(&projector(a), &projector(b)).expect("2x2 factors")
}

/// Number of real parameters of the lower-triangular 4×4 parameterization.
pub const DENSITY_PARAMS: usize = 16;

/// Builds the lower-triangular factor T: `t[0..4]` on the diagonal, then
/// `(re, im)` pairs for entries (1,0), (2,0), (2,1), (3,0), (3,1), (3,2).
pub fn lower_triangular_factor(t: &[f64; DENSITY_PARAMS]) -> CMatrix {
    let mut m = CMatrix::zeros(4);
    for i in 0..4 {
        m[(i, i)] = C64::new(t[i], 0.0);
    }
    let mut k = 4;
    for i in 1..4 {
        for j in 0..i {
            m[(i, j)] = C64::new(t[k], t[k + 1]);
            k += 2;
        }
    }
    m
}

/// `T†T` unnormalized, computed directly for the lower-triangular T.
pub(crate) fn gram_of_factor(t: &[f64; DENSITY_PARAMS]) -> CMatrix {
    let f = lower_triangular_factor(t);
    let mut g = CMatrix::zeros(4);
    for i in 0..4 {
        for j in i..4 {
            // (T†T)_ij = Σ_k conj(T_ki) T_kj, non-zero only for k ≥ max(i, j) = j
            let mut acc = ZERO;
            for k in j..4 {
                acc += f[(k, i)].conj() * f[(k, j)];
            }
            g[(i, j)] = acc;
            g[(j, i)] = acc.conj();
        }
    }
    g
}

/// `ρ = T†T / Tr(T†T)`; positive semidefinite and Hermitian by construction.
pub fn density_from_params(t: &[f64; DENSITY_PARAMS]) -> Result<DensityMatrix> {
    let g = gram_of_factor(t);
    let tr = g.trace().re;
    if !(tr >= 1e-300) || !tr.is_finite() {
        return Err(Error::invalid(format!(
            "parameter vector gives Tr(T†T) = {tr:e}; cannot normalize"
        )));
    }
    Ok(DensityMatrix::from_valid(g.scale_re(1.0 / tr)))
}

/// Inverse of [`density_from_params`] up to normalization: Cholesky-type factor of ρ.
///
/// Uses a slightly regularized ρ so that rank-deficient states still give finite parameters.
pub fn params_from_density(rho: &DensityMatrix) -> [f64; DENSITY_PARAMS] {
    assert_eq!(rho.dim(), 4);
    let reg = rho.mix_with_white(1e-6);
    let m = reg.matrix();
    // With J the index reversal, a Cholesky factorization conj(JρJ) = C C† (C lower)
    // yields T_ij = C_{rev j, rev i}, which is lower triangular with T†T = ρ.
    let rev = |i: usize| 3 - i;
    let mut a = CMatrix::zeros(4);
    for i in 0..4 {
        for j in 0..4 {
            a[(i, j)] = m[(rev(i), rev(j))].conj();
        }
    }
    // a = C C† with C lower triangular
    let mut c = CMatrix::zeros(4);
    for j in 0..4 {
        let mut d = a[(j, j)].re;
        for k in 0..j {
            d -= c[(j, k)].norm_sqr();
        }
        let djj = d.max(1e-300).sqrt();
        c[(j, j)] = C64::new(djj, 0.0);
        for i in (j + 1)..4 {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= c[(i, k)] * c[(j, k)].conj();
            }
            c[(i, j)] = s / djj;
        }
    }
    let mut t = [0.0; DENSITY_PARAMS];
    let tm = |i: usize, j: usize| c[(rev(j), rev(i))];
    for i in 0..4 {
        t[i] = tm(i, i).re;
    }
    let mut k = 4;
    for i in 1..4 {
        for j in 0..i {
            let z = tm(i, j);
            t[k] = z.re;
            t[k + 1] = z.im;
            k += 2;
        }
    }
    t
}

/// Pauli matrices in the `(|e⟩, |ℓ⟩)` basis.
pub fn pauli_x() -> CMatrix {
    CMatrix::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()
}

pub fn pauli_y() -> CMatrix {
    CMatrix::from_rows(&[
        vec![ZERO, C64::new(0.0, -1.0)],
        vec![C64::new(0.0, 1.0), ZERO],
    ])
    .unwrap()
}

pub fn pauli_z() -> CMatrix {
    CMatrix::from_diag(&[1.0, -1.0])
}
