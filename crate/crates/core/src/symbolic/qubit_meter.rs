//! Stored form of the coupled qubit-meter equation in logarithmic variables
//! `z = e^η`, `α = e^φ`. The spin algebra is not compiled symbolically; the
//! identities behind it are checked numerically in
//! [`crate::fock_oracle::verify_log_identities`].

/// `∂_τ Q = [∂_η″ n + ∂_φ″ m + i(∂_φ∂_η − ∂_φ*∂_η*)] Q`.
pub const QUBIT_METER_FPE: &str = "∂τQ = [∂η″·n(φ) + ∂φ″·m(η) + i(∂φ∂η − ∂φ*∂η*)] Q";

/// `m(η) = (3/2) tanh η′`.
pub fn m_eta(eta_re: f64) -> f64 {
    1.5 * eta_re.tanh()
}

/// `n(φ) = e^{2φ′} − 1`.
pub fn n_phi(phi_re: f64) -> f64 {
    (2.0 * phi_re).exp() - 1.0
}

/// Diffusion entries of the cross term in the real coordinates
/// `(η′, η″, φ′, φ″)`; constant, symmetric and trace-free.
pub fn cross_diffusion() -> [[f64; 4]; 4] {
    // i(∂φ∂η − ∂φ*∂η*) = ½(∂φ′∂η″ + ∂φ″∂η′)
    let mut d = [[0.0; 4]; 4];
    d[0][3] = 0.5;
    d[3][0] = 0.5;
    d[1][2] = 0.5;
    d[2][1] = 0.5;
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn helper_functions() {
        assert_eq!(m_eta(0.0), 0.0);
        assert!((m_eta(50.0) - 1.5).abs() < 1e-12);
        assert_eq!(n_phi(0.0), 0.0);
        assert!((n_phi(0.5) - (1f64.exp() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn cross_term_is_trace_free() {
        let d = cross_diffusion();
        assert_eq!((0..4).map(|i| d[i][i]).sum::<f64>(), 0.0);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(d[i][j], d[j][i]);
            }
        }
    }
}
