//! Two-qubit entanglement and state-quality figures of merit.

use crate::error::{Error, Result};
use crate::linalg::{
    hermitian_eigensystem, matrix_sqrt_psd, pauli_y, singular_values, tensor_product, CMatrix, DensityMatrix, Ket,
};

/// Wootters concurrence `max{0, λ₁−λ₂−λ₃−λ₄}`.
///
/// The λᵢ are the square roots of the eigenvalues of `ρ·ρ̃`, with
/// `ρ̃ = (σ_y⊗σ_y) ρ* (σ_y⊗σ_y)`. They are obtained from the Hermitian matrix
/// `√ρ·ρ̃·√ρ`, which has the same spectrum.
pub fn concurrence(rho: &DensityMatrix) -> Result<f64> {
    if rho.dim() != 4 {
        return Err(Error::invalid("concurrence needs a two-qubit (4x4) state"));
    }
    let yy = tensor_product(&pauli_y(), &pauli_y())?;
    let tilde = &(&yy * &rho.matrix().conj()) * &yy;
    let sqrt_rho = matrix_sqrt_psd(rho.matrix())?;
    let r = &(&sqrt_rho * &tilde) * &sqrt_rho;
    let eig = hermitian_eigensystem(&r.hermitian_part())?;
    let l: Vec<f64> = eig.values.iter().map(|&v| v.max(0.0).sqrt()).collect();
    Ok((l[0] - l[1] - l[2] - l[3]).max(0.0))
}

/// Binary entropy in bits, with `H(0) = H(1) = 0`.
pub fn binary_entropy(x: f64) -> f64 {
    let term = |p: f64| if p <= 0.0 { 0.0 } else { -p * p.log2() };
    term(x) + term(1.0 - x)
}

pub fn entanglement_of_formation_from_concurrence(c: f64) -> f64 {
    let c = c.clamp(0.0, 1.0);
    binary_entropy(0.5 + 0.5 * (1.0 - c * c).sqrt())
}

pub fn entanglement_of_formation(rho: &DensityMatrix) -> Result<f64> {
    Ok(entanglement_of_formation_from_concurrence(concurrence(rho)?))
}

/// Uhlmann fidelity `(Tr √(√ρ σ √ρ))²`.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::invalid(format!(
            "fidelity of states with dimensions {} and {}",
            rho.dim(),
            sigma.dim()
        )));
    }
    // tr√(√ρσ√ρ) = ‖√ρ√σ‖₁
    let a = matrix_sqrt_psd(rho.matrix())?;
    let b = matrix_sqrt_psd(sigma.matrix())?;
    let norm: f64 = singular_values(&(&a * &b)).iter().sum();
    Ok(norm.powi(2).clamp(0.0, 1.0))
}

/// `⟨ψ|ρ|ψ⟩`
pub fn fidelity_with_pure(rho: &DensityMatrix, psi: &Ket) -> f64 {
    rho.expectation(&psi.projector())
}

pub fn purity(rho: &DensityMatrix) -> f64 {
    let m: &CMatrix = rho.matrix();
    m.trace_product_re(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{density_from_params, C64, DENSITY_PARAMS};
    use proptest::prelude::*;

    /// Eigenvalues of an arbitrary (non-Hermitian) 4x4 matrix through its characteristic
    /// polynomial and Durand–Kerner iteration. Independent of the Hermitian eigen-solver.
    fn general_eigenvalues(m: &CMatrix) -> Vec<C64> {
        let n = m.dim();
        let mut coeffs = vec![C64::new(0.0, 0.0); n + 1];
        coeffs[n] = C64::new(1.0, 0.0);
        let mut mk = CMatrix::zeros(n);
        for k in 1..=n {
            let shifted = &mk + &CMatrix::identity(n).scale(coeffs[n - k + 1]);
            mk = m * &shifted;
            coeffs[n - k] = -mk.trace() / k as f64;
        }
        let eval = |z: C64| coeffs.iter().rev().fold(C64::new(0.0, 0.0), |acc, &c| acc * z + c);
        let mut roots: Vec<C64> = (0..n).map(|k| C64::new(0.4, 0.9).powu(k as u32)).collect();
        for _ in 0..2000 {
            for i in 0..n {
                let denom: C64 = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| roots[i] - roots[j])
                    .product();
                let step = eval(roots[i]) / denom;
                roots[i] -= step;
            }
        }
        roots
    }

    fn concurrence_oracle(rho: &DensityMatrix) -> f64 {
        let yy = tensor_product(&pauli_y(), &pauli_y()).unwrap();
        let prod = &(&(rho.matrix() * &yy) * &rho.matrix().conj()) * &yy;
        let mut l: Vec<f64> = general_eigenvalues(&prod)
            .iter()
            .map(|z| z.re.max(0.0).sqrt())
            .collect();
        l.sort_by(|a, b| b.total_cmp(a));
        (l[0] - l[1] - l[2] - l[3]).max(0.0)
    }

    #[test]
    fn concurrence_examples() {
        let bell = DensityMatrix::pure(&Ket::phi_plus());
        assert!((concurrence(&bell).unwrap() - 1.0).abs() < 1e-7);
        assert!(concurrence(&DensityMatrix::maximally_mixed(4)).unwrap().abs() < 1e-12);
        let w = DensityMatrix::werner(0.75).unwrap();
        let c = concurrence(&w).unwrap();
        assert!((c - 0.625).abs() < 1e-9, "{c}");
        assert!((concurrence_oracle(&w) - 0.625).abs() < 1e-6);
        assert!(concurrence(&DensityMatrix::maximally_mixed(2)).is_err());
    }

    #[test]
    fn eof_examples() {
        assert!((entanglement_of_formation_from_concurrence(1.0) - 1.0).abs() < 1e-15);
        assert_eq!(entanglement_of_formation_from_concurrence(0.0), 0.0);
        let bell = DensityMatrix::pure(&Ket::phi_plus());
        assert!((entanglement_of_formation(&bell).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn eof_monotone_in_concurrence() {
        let grid: Vec<f64> = (0..=10)
            .map(|k| entanglement_of_formation_from_concurrence(k as f64 / 10.0))
            .collect();
        assert!(grid.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn fidelity_examples() {
        let ee = DensityMatrix::pure(&Ket::basis(0));
        let ll = DensityMatrix::pure(&Ket::basis(3));
        assert!(fidelity(&ee, &ll).unwrap().abs() < 1e-12);
        let w = DensityMatrix::werner(0.3).unwrap();
        assert!((fidelity(&w, &w).unwrap() - 1.0).abs() < 1e-9);
        assert!(fidelity(&w, &DensityMatrix::maximally_mixed(2)).is_err());
    }

    #[test]
    fn purity_examples() {
        assert!((purity(&DensityMatrix::pure(&Ket::phi_plus())) - 1.0).abs() < 1e-15);
        assert!((purity(&DensityMatrix::maximally_mixed(4)) - 0.25).abs() < 1e-15);
    }

    fn arb_state() -> impl Strategy<Value = DensityMatrix> {
        proptest::array::uniform16(-1.0..1.0f64)
            .prop_filter("non-zero", |t| t.iter().map(|x| x * x).sum::<f64>() > 1e-3)
            .prop_map(|t: [f64; DENSITY_PARAMS]| density_from_params(&t).unwrap())
    }

    fn arb_ket() -> impl Strategy<Value = Ket> {
        proptest::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 4)
            .prop_filter("non-zero", |v| v.iter().map(|(a, b)| a * a + b * b).sum::<f64>() > 1e-3)
            .prop_map(|v| Ket::new(v.into_iter().map(|(a, b)| C64::new(a, b)).collect()).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn concurrence_matches_non_hermitian_oracle(rho in arb_state()) {
            // Repeated zero roots limit the polynomial oracle to ~√ε accuracy, and square
            // roots amplify that further, so the spectra of
            // ρρ̃ are compared directly and the concurrence more loosely.
            let yy = tensor_product(&pauli_y(), &pauli_y()).unwrap();
            let prod = &(&(rho.matrix() * &yy) * &rho.matrix().conj()) * &yy;
            let mut oracle: Vec<f64> = general_eigenvalues(&prod).iter().map(|z| z.re).collect();
            oracle.sort_by(|a, b| b.total_cmp(a));
            let s = matrix_sqrt_psd(rho.matrix()).unwrap();
            let tilde = &(&yy * &rho.matrix().conj()) * &yy;
            let herm = &(&s * &tilde) * &s;
            let values = hermitian_eigensystem(&herm.hermitian_part()).unwrap().values;
            for (a, b) in values.iter().zip(&oracle) {
                prop_assert!((a - b).abs() < 1e-6, "{values:?} vs {oracle:?}");
            }
            let c = concurrence(&rho).unwrap();
            prop_assert!((c - concurrence_oracle(&rho)).abs() < 1e-3);
            prop_assert!((0.0..=1.0 + 1e-9).contains(&c));
            let e = entanglement_of_formation(&rho).unwrap();
            prop_assert!(c > 0.0 || e == 0.0);
        }

        #[test]
        fn fidelity_symmetric(a in arb_state(), b in arb_state()) {
            let f1 = fidelity(&a, &b).unwrap();
            let f2 = fidelity(&b, &a).unwrap();
            prop_assert!((f1 - f2).abs() < 1e-9, "{f1} {f2} {}", f1 - f2);
        }

        #[test]
        fn fidelity_pure_is_overlap(a in arb_ket(), b in arb_ket()) {
            let f = fidelity(&DensityMatrix::pure(&a), &DensityMatrix::pure(&b)).unwrap();
            prop_assert!((f - a.inner(&b).norm_sqr()).abs() < 1e-7);
        }

        #[test]
        fn purity_bounds(rho in arb_state()) {
            let p = purity(&rho);
            prop_assert!(p >= 0.25 - 1e-12 && p <= 1.0 + 1e-12);
            let nonzero = rho.eigenvalues().iter().filter(|&&l| l > 1e-9).count();
            prop_assert_eq!((p - 1.0).abs() < 1e-9, nonzero == 1);
        }
    }
}
