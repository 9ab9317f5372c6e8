//! Gain synthesis and feasibility certification.
//!
//! The controller gain comes from a shifted algebraic Riccati equation
//!
//! ```text
//! A'P + PA' - gamma P B B'P + epsilon I = 0,   A' = A + (kappa_eff/2) I
//! ```
//!
//! solved by integrating the matching differential equation forward
//! from `P(0) = I` and polishing the fixed point with Kleinman-Newton
//! steps, with `gamma = (c/s) lambda2` the weakest coupling the
//! switching graphs guarantee and `kappa_eff = kappa / pi_bar` absorbing
//! the least-likely mode's dwell fraction. `K = B'P` and
//! `Gamma = P B B'P` follow, and the first certified inequality then
//! holds with margin exactly `-pi_bar * epsilon`.
//!
//! The observer side runs the dual equation for a family of grid
//! parameters `(w, v)`, forming `G = w S C'`, `Q = scale * S^-1`,
//! `X = Q G`, and keeps the candidate whose certified block margin is
//! the most negative. Certification rebuilds each matrix inequality
//! verbatim and reports signed eigenvalue margins plus the scalar
//! conditions on the trigger and coupling constants.

use crate::matrix::{block2x2, Matrix, MatrixError};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GainError {
    #[error("riccati solve failed: {detail}")]
    NoConvergence { detail: String },
    #[error(
        "observer grid search found no feasible design; best margin {best_margin:.3e} at w = {w:.0e}, v = {v:.0e}, scale = {scale:.0e}"
    )]
    Infeasible {
        best_margin: f64,
        w: f64,
        v: f64,
        scale: f64,
    },
    #[error("invalid synthesis input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

/// Constants fixed by the topology family, the Markov chain, and the
/// attack probabilities.
#[derive(Debug, Clone, Copy)]
pub struct SpectralConstants {
    /// Number of graphs in the switching family.
    pub graph_count: usize,
    /// Algebraic connectivity of the union graph's summed Laplacian.
    pub lambda2: f64,
    /// Largest eigenvalue of the summed Laplacian.
    pub lambda_max: f64,
    /// Smallest stationary probability of the switching chain.
    pub pi_bar: f64,
    /// Largest stationary probability.
    pub pi_breve: f64,
    /// Largest eigenvalue of F F' for the attack-probability matrix F.
    pub lambda_max_fft: f64,
    pub n_agents: usize,
}

/// Free scalars of the protocol, as supplied by a scenario.
#[derive(Debug, Clone, Copy)]
pub struct ScalarParams {
    pub c: f64,
    pub kappa: f64,
    /// Decay floor of the deviation bound; derived from P and Q when absent.
    pub chi: Option<f64>,
    /// Riccati constant-term weight; defaults to `1e-4 * ||A||_F`.
    pub epsilon: Option<f64>,
    pub dbar: f64,
    pub o: f64,
    pub upsilon: f64,
    pub iota: f64,
    pub eta: f64,
    pub varsigma: f64,
    pub beta: f64,
    pub varpi0: f64,
    pub tau: f64,
}

/// Complete synthesized gain set plus every scalar the closed loop and
/// its certificates need. Serializes to the `gains.json` layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GainSet {
    pub p: Matrix,
    pub q: Matrix,
    pub x: Matrix,
    pub k: Matrix,
    pub g: Matrix,
    pub gamma: Matrix,
    pub c: f64,
    pub kappa: f64,
    pub chi: f64,
    pub dbar: f64,
    pub o: f64,
    pub upsilon: f64,
    pub iota: f64,
    pub eta: f64,
    pub varsigma: f64,
    pub beta: f64,
    pub varpi0: f64,
    pub tau: f64,
    pub s: f64,
    pub n_agents: usize,
    pub lambda2: f64,
    pub lambda_max: f64,
    pub lambda_max_fft: f64,
    pub pi_bar: f64,
    pub pi_breve: f64,
    pub ctilde: f64,
    pub rho: f64,
    pub bound: f64,
}

/// Signed eigenvalue margins and scalar checks for every synthesis
/// condition. A margin is `None` when a prerequisite (positive
/// definiteness of the matrix it depends on) already failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub p_positive_definite: bool,
    pub q_positive_definite: bool,
    pub cond_p: Option<f64>,
    pub cond_observer: Option<f64>,
    pub cond_chi_p: Option<f64>,
    pub cond_chi_q: Option<f64>,
    pub rho_minus_varsigma_positive: bool,
    pub eta_rate_positive: bool,
    pub dbar_exceeds_threshold: bool,
    pub upsilon_at_least_inv_rho: bool,
    /// The value `4c + o + 1` that `dbar` must exceed.
    pub dbar_threshold: f64,
    pub chi: f64,
    pub feasible: bool,
}

/// Constants derived from the scalar parameters alone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolConstants {
    pub ctilde: f64,
    pub rho: f64,
    pub dbar_threshold: f64,
    pub bound: f64,
}

/// Observer design returned by the grid search.
#[derive(Debug, Clone)]
pub struct ObserverDesign {
    pub q: Matrix,
    pub x: Matrix,
    pub g: Matrix,
    pub margin: f64,
    pub w: f64,
    pub v: f64,
    pub scale: f64,
}

fn riccati_residual(
    a_shift: &Matrix,
    bbt: &Matrix,
    gamma: f64,
    epsilon: f64,
    p: &Matrix,
) -> Matrix {
    let n = p.rows();
    &(&(&a_shift.transpose() * p) + &(p * a_shift))
        - &(&(&(p * bbt) * p).scale(gamma) - &Matrix::identity(n).scale(epsilon))
}

/// Solves `A'X + XA = C` for `X` by vectorization.
pub fn solve_lyapunov(a: &Matrix, c: &Matrix) -> Result<Matrix, GainError> {
    let n = a.rows();
    if a.cols() != n || c.rows() != n || c.cols() != n {
        return Err(GainError::InvalidInput(
            "lyapunov solve needs square matrices of one size".into(),
        ));
    }
    let at = a.transpose();
    let eye = Matrix::identity(n);
    let op = &at.kron(&eye) + &eye.kron(&at);
    let sol = op.solve_vec(c.row_major_data())?;
    let mut x = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            x[(i, j)] = sol[i * n + j];
        }
    }
    Ok(x)
}

/// Stabilizing solution of
/// `(A + (kappa_eff/2) I)'P + P (A + (kappa_eff/2) I) - gamma P B B'P + epsilon I = 0`
/// by forward integration of the differential equation from `P(0) = I`,
/// then Kleinman-Newton refinement. `epsilon` defaults to
/// `1e-4 * ||A||_F` when not supplied.
pub fn solve_control_riccati(
    a: &Matrix,
    b: &Matrix,
    gamma: f64,
    kappa_eff: f64,
    epsilon: Option<f64>,
) -> Result<Matrix, GainError> {
    let n = a.rows();
    if a.cols() != n {
        return Err(GainError::InvalidInput("state matrix must be square".into()));
    }
    if b.rows() != n {
        return Err(GainError::InvalidInput(format!(
            "input matrix has {} rows for a {n}-state plant",
            b.rows()
        )));
    }
    if !(gamma >= 0.0 && gamma.is_finite() && kappa_eff.is_finite()) {
        return Err(GainError::InvalidInput(
            "gamma must be finite and nonnegative, kappa_eff finite".into(),
        ));
    }
    let epsilon = epsilon.unwrap_or(1e-4 * a.frobenius_norm());
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(GainError::InvalidInput(format!(
            "riccati constant term must be positive, got {epsilon}; supply one explicitly for a zero state matrix"
        )));
    }

    let a_shift = a + &Matrix::identity(n).scale(kappa_eff / 2.0);
    let bbt = &(b * &b.transpose()).symmetrized();
    let shift_norm = a_shift.frobenius_norm();
    let bbt_norm = bbt.frobenius_norm();

    let mut p = Matrix::identity(n);
    let mut converged = false;
    for _ in 0..2_000_000u64 {
        let k1 = riccati_residual(&a_shift, bbt, gamma, epsilon, &p);
        let p_norm = p.frobenius_norm();
        if k1.frobenius_norm() < 1e-10 * p_norm {
            converged = true;
            break;
        }
        let lipschitz = 2.0 * shift_norm + 2.0 * gamma * bbt_norm * p_norm + 1e-9;
        let h = (0.5 / lipschitz).min(0.5);
        let k2 = riccati_residual(&a_shift, bbt, gamma, epsilon, &(&p + &k1.scale(h / 2.0)));
        let k3 = riccati_residual(&a_shift, bbt, gamma, epsilon, &(&p + &k2.scale(h / 2.0)));
        let k4 = riccati_residual(&a_shift, bbt, gamma, epsilon, &(&p + &k3.scale(h)));
        let increment = &(&k1 + &k4) + &(&k2 + &k3).scale(2.0);
        p = (&p + &increment.scale(h / 6.0)).symmetrized();
        if !p.is_finite() || p.frobenius_norm() > 1e12 {
            return Err(GainError::NoConvergence {
                detail: "trajectory diverged; the shifted pair is likely not stabilizable".into(),
            });
        }
    }
    if !converged {
        return Err(GainError::NoConvergence {
            detail: "step budget exhausted before the derivative settled".into(),
        });
    }

    // Newton refinement: relinearize around the current iterate and solve
    // the resulting Lyapunov equation, keeping whichever iterate has the
    // smaller residual.
    let mut best_residual = riccati_residual(&a_shift, bbt, gamma, epsilon, &p).frobenius_norm();
    for _ in 0..40 {
        if best_residual <= 1e-13 * p.frobenius_norm().max(1.0) {
            break;
        }
        let a_cl = &a_shift - &(&(bbt * &p)).scale(gamma);
        let rhs = &(&(&(&p * bbt) * &p)).scale(-gamma) - &Matrix::identity(n).scale(epsilon);
        let candidate = match solve_lyapunov(&a_cl, &rhs) {
            Ok(x) => x.symmetrized(),
            Err(_) => break,
        };
        if !candidate.is_finite() {
            break;
        }
        let res = riccati_residual(&a_shift, bbt, gamma, epsilon, &candidate).frobenius_norm();
        if res < best_residual {
            best_residual = res;
            p = candidate;
        } else {
            break;
        }
    }

    if best_residual > 1e-8 * p.frobenius_norm() {
        return Err(GainError::NoConvergence {
            detail: format!(
                "residual {best_residual:.3e} exceeds 1e-8 * ||P|| after refinement"
            ),
        });
    }
    if p.definiteness_margin()? <= 0.0 {
        return Err(GainError::NoConvergence {
            detail: "converged matrix is not positive definite".into(),
        });
    }
    Ok(p)
}

/// Coefficient of the relative-state penalty in the observer block:
/// `s (2c + dbar^2) pi_breve lambda_max^2`.
fn observer_penalty(c: f64, dbar: f64, spectral: &SpectralConstants) -> f64 {
    spectral.graph_count as f64
        * (2.0 * c + dbar * dbar)
        * spectral.pi_breve
        * spectral.lambda_max
        * spectral.lambda_max
}

fn observer_block_margin(
    a: &Matrix,
    c_out: &Matrix,
    q: &Matrix,
    x: &Matrix,
    penalty: &Matrix,
    kappa: f64,
    lambda_max_fft: f64,
) -> Result<f64, MatrixError> {
    let xc = x * c_out;
    let psi = &(&(&(&a.transpose() * q) + &(q * a)) - &(&xc + &xc.transpose()))
        + &(penalty + &q.scale(kappa));
    let p_dim = c_out.rows();
    let coupling = x.scale(lambda_max_fft.sqrt());
    let block = block2x2(
        &psi.symmetrized(),
        &coupling,
        &coupling.transpose(),
        &Matrix::identity(p_dim).scale(-1.0),
    );
    block.definiteness_margin()
}

/// Grid search over the dual-equation family. Every candidate is scored
/// by the signed eigenvalue margin of the full observer block; the most
/// negative margin wins, and a nonnegative best margin is reported as
/// infeasibility.
pub fn synthesize_observer(
    a: &Matrix,
    c_out: &Matrix,
    gamma_mat: &Matrix,
    c: f64,
    kappa: f64,
    dbar: f64,
    spectral: &SpectralConstants,
) -> Result<ObserverDesign, GainError> {
    let n = a.rows();
    if c_out.cols() != n {
        return Err(GainError::InvalidInput(format!(
            "output matrix has {} columns for a {n}-state plant",
            c_out.cols()
        )));
    }
    let penalty = gamma_mat.scale(observer_penalty(c, dbar, spectral));
    let ct = c_out.transpose();
    let grid: Vec<f64> = (-3..=3).map(|k| 10f64.powi(k)).collect();
    let mut best: Option<ObserverDesign> = None;
    for &w in &grid {
        for &v in &grid {
            let s_mat = match solve_control_riccati(&a.transpose(), &ct, w, 0.0, Some(v)) {
                Ok(s) => s,
                Err(_) => continue,
            };
            let g = (&s_mat * &ct).scale(w);
            let s_inv = match s_mat.inverse() {
                Ok(inv) => inv,
                Err(_) => continue,
            };
            for &scale in &grid {
                let q = s_inv.scale(scale).symmetrized();
                // Q G collapses to w * scale * C' exactly, because Q is
                // scale * S^-1 and G is w * S * C'.
                let x = ct.scale(w * scale);
                let margin = match observer_block_margin(
                    a,
                    c_out,
                    &q,
                    &x,
                    &penalty,
                    kappa,
                    spectral.lambda_max_fft,
                ) {
                    Ok(m) => m,
                    Err(_) => continue,
                };
                if best.as_ref().map_or(true, |b| margin < b.margin) {
                    best = Some(ObserverDesign {
                        q,
                        x,
                        g: g.clone(),
                        margin,
                        w,
                        v,
                        scale,
                    });
                }
            }
        }
    }
    match best {
        Some(design) if design.margin < 0.0 => Ok(design),
        Some(design) => Err(GainError::Infeasible {
            best_margin: design.margin,
            w: design.w,
            v: design.v,
            scale: design.scale,
        }),
        None => Err(GainError::NoConvergence {
            detail: "no grid point produced a solvable dual equation".into(),
        }),
    }
}

/// `ctilde`, `rho`, the coupling-ceiling threshold, and the deviation
/// bound `sqrt(tau / (chi kappa))`.
pub fn compute_protocol_constants(
    c: f64,
    dbar: f64,
    o: f64,
    tau: f64,
    kappa: f64,
    chi: f64,
    n_agents: usize,
    pi_breve: f64,
) -> ProtocolConstants {
    let n = n_agents as f64;
    let ctilde = dbar + 4.0 * c;
    let rho = ctilde * pi_breve * n * (n * n + n);
    let dbar_threshold = 4.0 * c + o + 1.0;
    let bound = if chi > 0.0 && kappa > 0.0 && tau >= 0.0 {
        (tau / (chi * kappa)).sqrt()
    } else {
        f64::MAX
    };
    ProtocolConstants {
        ctilde,
        rho,
        dbar_threshold,
        bound,
    }
}

/// Runs the full pipeline: controller equation, observer grid, decay
/// floor `chi`, and the derived scalar constants.
pub fn synthesize_gains(
    a: &Matrix,
    b: &Matrix,
    c_out: &Matrix,
    spectral: &SpectralConstants,
    params: &ScalarParams,
) -> Result<GainSet, GainError> {
    if spectral.graph_count == 0 || spectral.n_agents == 0 {
        return Err(GainError::InvalidInput(
            "need at least one graph and one agent".into(),
        ));
    }
    if !(spectral.lambda2 > 0.0) {
        return Err(GainError::InvalidInput(
            "union graph must be connected (lambda2 > 0)".into(),
        ));
    }
    if !(spectral.pi_bar > 0.0 && spectral.pi_breve >= spectral.pi_bar) {
        return Err(GainError::InvalidInput(
            "stationary probabilities must be positive with pi_bar <= pi_breve".into(),
        ));
    }
    for (name, value) in [
        ("c", params.c),
        ("kappa", params.kappa),
        ("dbar", params.dbar),
        ("upsilon", params.upsilon),
        ("iota", params.iota),
        ("eta", params.eta),
        ("varpi0", params.varpi0),
    ] {
        if !(value > 0.0 && value.is_finite()) {
            return Err(GainError::InvalidInput(format!(
                "{name} must be positive and finite, got {value}"
            )));
        }
    }
    for (name, value) in [
        ("o", params.o),
        ("varsigma", params.varsigma),
        ("beta", params.beta),
        ("tau", params.tau),
    ] {
        if !(value >= 0.0 && value.is_finite()) {
            return Err(GainError::InvalidInput(format!(
                "{name} must be nonnegative and finite, got {value}"
            )));
        }
    }

    let s = spectral.graph_count as f64;
    let gamma_scalar = params.c / s * spectral.lambda2;
    let kappa_eff = params.kappa / spectral.pi_bar;
    let p = solve_control_riccati(a, b, gamma_scalar, kappa_eff, params.epsilon)?;
    let k = &b.transpose() * &p;
    let gamma_mat = (&k.transpose() * &k).symmetrized();
    let observer = synthesize_observer(
        a,
        c_out,
        &gamma_mat,
        params.c,
        params.kappa,
        params.dbar,
        spectral,
    )?;

    let chi = match params.chi {
        Some(chi) if chi > 0.0 && chi.is_finite() => chi,
        Some(chi) => {
            return Err(GainError::InvalidInput(format!(
                "chi must be positive and finite, got {chi}"
            )))
        }
        None => {
            let p_min = p.sym_eigenvalues()?[0];
            let q_min = observer.q.sym_eigenvalues()?[0];
            0.99 * (spectral.lambda2 * p_min).min(q_min)
        }
    };
    let constants = compute_protocol_constants(
        params.c,
        params.dbar,
        params.o,
        params.tau,
        params.kappa,
        chi,
        spectral.n_agents,
        spectral.pi_breve,
    );

    Ok(GainSet {
        p,
        q: observer.q,
        x: observer.x,
        k,
        g: observer.g,
        gamma: gamma_mat,
        c: params.c,
        kappa: params.kappa,
        chi,
        dbar: params.dbar,
        o: params.o,
        upsilon: params.upsilon,
        iota: params.iota,
        eta: params.eta,
        varsigma: params.varsigma,
        beta: params.beta,
        varpi0: params.varpi0,
        tau: params.tau,
        s,
        n_agents: spectral.n_agents,
        lambda2: spectral.lambda2,
        lambda_max: spectral.lambda_max,
        lambda_max_fft: spectral.lambda_max_fft,
        pi_bar: spectral.pi_bar,
        pi_breve: spectral.pi_breve,
        ctilde: constants.ctilde,
        rho: constants.rho,
        bound: constants.bound,
    })
}

/// Rebuilds every synthesis inequality for a stored gain set and
/// reports signed margins; negative means satisfied. Margins that
/// depend on a matrix that failed its positive-definiteness check are
/// withheld rather than reported against a meaningless certificate.
pub fn verify_theorem_conditions(
    gains: &GainSet,
    a: &Matrix,
    c_out: &Matrix,
) -> Result<VerificationReport, GainError> {
    let p_pd = gains.p.scale(-1.0).definiteness_margin()? < 0.0;
    let q_pd = gains.q.scale(-1.0).definiteness_margin()? < 0.0;

    let gamma_scalar = gains.c / gains.s * gains.lambda2;
    let cond_p = if p_pd {
        let m = &(&(&(&a.transpose() * &gains.p) + &(&gains.p * a))
            - &gains.gamma.scale(gamma_scalar))
            .scale(gains.pi_bar)
            + &gains.p.scale(gains.kappa);
        Some(m.definiteness_margin()?)
    } else {
        None
    };

    let cond_observer = if p_pd && q_pd {
        let spectral = SpectralConstants {
            graph_count: gains.s as usize,
            lambda2: gains.lambda2,
            lambda_max: gains.lambda_max,
            pi_bar: gains.pi_bar,
            pi_breve: gains.pi_breve,
            lambda_max_fft: gains.lambda_max_fft,
            n_agents: gains.n_agents,
        };
        let penalty = gains
            .gamma
            .scale(observer_penalty(gains.c, gains.dbar, &spectral));
        Some(observer_block_margin(
            a,
            c_out,
            &gains.q,
            &gains.x,
            &penalty,
            gains.kappa,
            gains.lambda_max_fft,
        )?)
    } else {
        None
    };

    let n = a.rows();
    let cond_chi_p = if p_pd {
        let m = &Matrix::identity(n).scale(gains.chi) - &gains.p.scale(gains.lambda2);
        Some(m.definiteness_margin()?)
    } else {
        None
    };
    let cond_chi_q = if q_pd {
        let m = &Matrix::identity(n).scale(gains.chi) - &gains.q;
        Some(m.definiteness_margin()?)
    } else {
        None
    };

    let rho_minus_varsigma_positive = gains.rho - gains.varsigma > 0.0;
    let eta_rate_positive = gains.eta - (gains.rho - gains.varsigma) / gains.iota > 0.0;
    let dbar_threshold = 4.0 * gains.c + gains.o + 1.0;
    let dbar_exceeds_threshold = gains.dbar > dbar_threshold;
    let upsilon_at_least_inv_rho = gains.upsilon >= 1.0 / gains.rho;

    let matrix_ok = [cond_p, cond_observer, cond_chi_p, cond_chi_q]
        .iter()
        .all(|m| matches!(m, Some(v) if *v < 0.0));
    let feasible = p_pd
        && q_pd
        && matrix_ok
        && rho_minus_varsigma_positive
        && eta_rate_positive
        && dbar_exceeds_threshold
        && upsilon_at_least_inv_rho;

    Ok(VerificationReport {
        p_positive_definite: p_pd,
        q_positive_definite: q_pd,
        cond_p,
        cond_observer,
        cond_chi_p,
        cond_chi_q,
        rho_minus_varsigma_positive,
        eta_rate_positive,
        dbar_exceeds_threshold,
        upsilon_at_least_inv_rho,
        dbar_threshold,
        chi: gains.chi,
        feasible,
    })
}
