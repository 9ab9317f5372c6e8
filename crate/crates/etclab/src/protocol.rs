//! Per-agent closed-loop machinery: plant and observer dynamics, held
//! broadcasts, the event trigger with its auxiliary threshold, the
//! adaptive coupling law, and the control input.
//!
//! Every agent runs the same linear plant. A Luenberger observer feeds
//! on the (possibly corrupted) measured output. Agents broadcast their
//! observer state only at trigger instants; between triggers the last
//! broadcast is held, and the relative state each agent reacts to is
//! assembled from held values over the currently active graph. The
//! trigger compares the deviation between held and current observer
//! states against a decaying auxiliary threshold `varpi`, and the
//! coupling strength `d` grows with the relative disagreement until it
//! hits its ceiling.

use crate::graph::Graph;
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProtocolError {
    #[error("{context}: expected length {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("inconsistent plant dimensions: A is {a_rows}x{a_cols}, B has {b_rows} rows, C has {c_cols} columns")]
    InconsistentModel {
        a_rows: usize,
        a_cols: usize,
        b_rows: usize,
        c_cols: usize,
    },
}

/// Linear plant shared by all agents: state dimension `n`, input
/// dimension `m`, output dimension `p`.
#[derive(Debug, Clone)]
pub struct PlantModel {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
    pub n: usize,
    pub m: usize,
    pub p: usize,
}

impl PlantModel {
    pub fn new(a: Matrix, b: Matrix, c: Matrix) -> Result<PlantModel, ProtocolError> {
        if a.rows() != a.cols() || b.rows() != a.rows() || c.cols() != a.cols() {
            return Err(ProtocolError::InconsistentModel {
                a_rows: a.rows(),
                a_cols: a.cols(),
                b_rows: b.rows(),
                c_cols: c.cols(),
            });
        }
        let (n, m, p) = (a.rows(), b.cols(), c.rows());
        Ok(PlantModel { a, b, c, n, m, p })
    }
}

/// Relative translational dynamics of a spacecraft near a circular
/// reference orbit, state `[x, y, z, vx, vy, vz]` in meters and meters
/// per second, acceleration inputs on all three axes, position
/// measurements only.
///
/// `omega` is the orbital rate in rad/s, `omega_dot` its drift in
/// rad/s², `mu` the gravitational parameter in m³/s², `r` the orbit
/// radius in m.
pub fn build_spacecraft_model(omega: f64, omega_dot: f64, mu: f64, r: f64) -> PlantModel {
    assert!(r > 0.0, "orbit radius must be positive");
    let mu_r3 = mu / (r * r * r);
    let w2 = omega * omega;
    let mut a = Matrix::zeros(6, 6);
    a.set_block(0, 3, &Matrix::identity(3));
    a[(3, 0)] = w2 + 2.0 * mu_r3;
    a[(3, 1)] = omega_dot;
    a[(3, 4)] = 2.0 * omega;
    a[(4, 0)] = -omega_dot;
    a[(4, 1)] = w2 - mu_r3;
    a[(4, 3)] = -2.0 * omega;
    a[(5, 2)] = -2.0 * mu_r3;
    let mut b = Matrix::zeros(6, 3);
    b.set_block(3, 0, &Matrix::identity(3));
    let mut c = Matrix::zeros(3, 6);
    c.set_block(0, 0, &Matrix::identity(3));
    PlantModel::new(a, b, c).expect("spacecraft dimensions are consistent by construction")
}

/// Everything one agent carries between steps.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    /// True plant state.
    pub x: Vec<f64>,
    /// Observer state.
    pub xhat: Vec<f64>,
    /// Observer state at this agent's last trigger, as seen by neighbors.
    pub held: Vec<f64>,
    /// Adaptive coupling strength.
    pub d: f64,
    /// Auxiliary trigger threshold, positive for all time.
    pub varpi: f64,
    /// Time of the last trigger (s).
    pub last_trigger: f64,
    pub trigger_count: u64,
}

impl AgentState {
    /// Fresh agent with `held` initialized to the observer state, as if
    /// everyone broadcast once at the start of the run.
    pub fn new(x: Vec<f64>, xhat: Vec<f64>, d0: f64, varpi0: f64) -> AgentState {
        AgentState {
            held: xhat.clone(),
            x,
            xhat,
            d: d0,
            varpi: varpi0,
            last_trigger: 0.0,
            trigger_count: 0,
        }
    }
}

/// Snapshot of what the network exposes at one instant: the active
/// graph and every agent's held broadcast.
#[derive(Debug, Clone, Copy)]
pub struct NetworkView<'a> {
    pub graph: &'a Graph,
    pub held: &'a [Vec<f64>],
}

/// Constants of the trigger rule and its threshold dynamics.
#[derive(Debug, Clone, Copy)]
pub struct TriggerParams {
    pub iota: f64,
    pub eta: f64,
    pub varsigma: f64,
    pub o: f64,
    pub upsilon: f64,
}

/// Constants of the adaptive coupling law.
#[derive(Debug, Clone, Copy)]
pub struct CouplingParams {
    pub beta: f64,
    pub dbar: f64,
}

fn check_len(
    context: &'static str,
    expected: usize,
    got: usize,
) -> Result<(), ProtocolError> {
    if expected == got {
        Ok(())
    } else {
        Err(ProtocolError::DimensionMismatch {
            context,
            expected,
            got,
        })
    }
}

/// `x_dot = A x + B u`.
pub fn plant_derivative(
    model: &PlantModel,
    x: &[f64],
    u: &[f64],
) -> Result<Vec<f64>, ProtocolError> {
    check_len("plant state", model.n, x.len())?;
    check_len("plant input", model.m, u.len())?;
    let mut dx = model.a.matvec(x);
    let bu = model.b.matvec(u);
    for (d, v) in dx.iter_mut().zip(&bu) {
        *d += v;
    }
    Ok(dx)
}

/// `xhat_dot = A xhat + B u + G (y_corrupted - C xhat)`.
pub fn observer_derivative(
    model: &PlantModel,
    g: &Matrix,
    xhat: &[f64],
    u: &[f64],
    y_corrupted: &[f64],
) -> Result<Vec<f64>, ProtocolError> {
    check_len("observer state", model.n, xhat.len())?;
    check_len("observer input", model.m, u.len())?;
    check_len("measured output", model.p, y_corrupted.len())?;
    if g.rows() != model.n || g.cols() != model.p {
        return Err(ProtocolError::DimensionMismatch {
            context: "observer gain rows x cols",
            expected: model.n * model.p,
            got: g.rows() * g.cols(),
        });
    }
    let mut dxhat = model.a.matvec(xhat);
    let bu = model.b.matvec(u);
    let mut innovation = model.c.matvec(xhat);
    for (inn, y) in innovation.iter_mut().zip(y_corrupted) {
        *inn = y - *inn;
    }
    let correction = g.matvec(&innovation);
    for ((d, v), w) in dxhat.iter_mut().zip(&bu).zip(&correction) {
        *d += v + w;
    }
    Ok(dxhat)
}

/// Relative state of agent `i` assembled from held broadcasts over the
/// active graph: `sum_j a_ij (held_j - held_i)`.
pub fn broadcast_relative_state(view: NetworkView<'_>, i: usize) -> Vec<f64> {
    let own = &view.held[i];
    let mut xi = vec![0.0; own.len()];
    for j in view.graph.neighbors(i) {
        for (acc, (hj, hi)) in xi.iter_mut().zip(view.held[j].iter().zip(own)) {
            *acc += hj - hi;
        }
    }
    xi
}

/// Deviation between the held broadcast and the live observer state,
/// `m_i = held_i - xhat_i`. Zero immediately after each trigger.
pub fn estimation_deviation(agent: &AgentState) -> Vec<f64> {
    agent
        .held
        .iter()
        .zip(&agent.xhat)
        .map(|(h, e)| h - e)
        .collect()
}

/// Trigger test on precomputed quadratic forms `m' Gamma m` and
/// `xi' Gamma xi`.
pub fn trigger_fires(m_quad: f64, xi_quad: f64, varpi: f64, params: &TriggerParams) -> bool {
    params.iota * (m_quad - params.o * params.upsilon * xi_quad) >= varpi
}

/// True iff agent `i` must broadcast now:
/// `iota (m' Gamma m - o upsilon xi' Gamma xi) >= varpi`.
pub fn trigger_predicate(
    agent: &AgentState,
    xi_tilde: &[f64],
    gamma: &Matrix,
    params: &TriggerParams,
) -> bool {
    let m = estimation_deviation(agent);
    trigger_fires(
        gamma.quad_form(&m),
        gamma.quad_form(xi_tilde),
        agent.varpi,
        params,
    )
}

/// Threshold rate on precomputed quadratic forms.
pub fn varpi_rate(varpi: f64, m_quad: f64, xi_quad: f64, params: &TriggerParams) -> f64 {
    -params.eta * varpi + params.varsigma * (params.o * params.upsilon * xi_quad - m_quad)
}

/// `varpi_dot = -eta varpi + varsigma (o upsilon xi' Gamma xi - m' Gamma m)`.
pub fn varpi_derivative(
    agent: &AgentState,
    xi_tilde: &[f64],
    gamma: &Matrix,
    params: &TriggerParams,
) -> f64 {
    let m = estimation_deviation(agent);
    varpi_rate(
        agent.varpi,
        gamma.quad_form(&m),
        gamma.quad_form(xi_tilde),
        params,
    )
}

/// Coupling rate on a precomputed quadratic form: `beta xi' Gamma xi`
/// while `d` is below its ceiling, zero at or above it.
pub fn coupling_rate(d: f64, xi_quad: f64, params: &CouplingParams) -> f64 {
    if d >= params.dbar {
        0.0
    } else {
        params.beta * xi_quad
    }
}

/// `d_dot` for one agent.
pub fn coupling_derivative(
    agent: &AgentState,
    xi_tilde: &[f64],
    gamma: &Matrix,
    params: &CouplingParams,
) -> f64 {
    coupling_rate(agent.d, gamma.quad_form(xi_tilde), params)
}

/// `u_i = d_i K xi_tilde_i`.
pub fn control_input(
    agent: &AgentState,
    xi_tilde: &[f64],
    k: &Matrix,
) -> Result<Vec<f64>, ProtocolError> {
    check_len("relative state", k.cols(), xi_tilde.len())?;
    let mut u = k.matvec(xi_tilde);
    for v in &mut u {
        *v *= agent.d;
    }
    Ok(u)
}
