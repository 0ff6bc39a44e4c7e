//! Disjoint physics-informed surrogates for impact identification.
//!
//! A displacement network `w(x, t)` and a mass network `m(x)` are trained in
//! alternation. Velocity is never a network output: it is `dw/dt` at `t = 0`.
//! Energy is never fitted: it is `m v0^2 / 2` of the two predictions.
//!
//! Displacement phase (mass fixed at `m_bar`):
//!   L_v0 = mean (v0_obs - v0(x))^2
//!   L_IC = mean w(x, 0)^2
//!   L_KE = mean (E - m_bar v0(x)^2 / 2)^2
//! Mass phase (velocity fixed at `v_bar`):
//!   L_m    = mean (m_obs - m(x))^2
//!   L_KE_m = mean (E - m(x) v_bar^2 / 2)^2

use std::fmt;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{adam_step, Activation, AdamState, Network, OutputTransform};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_v0: f64,
    pub lambda_ic: f64,
    pub lambda_ke: f64,
    pub lambda_m: f64,
    pub lambda_ke_m: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_v0: 1e-4,
            lambda_ic: 1e-6,
            lambda_ke: 1e-4,
            lambda_m: 1e-6,
            lambda_ke_m: 1e-4,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.lambda_v0, self.lambda_ic, self.lambda_ke, self.lambda_m, self.lambda_ke_m];
        if all.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(Error::InvalidArgument(format!("loss weights must be finite and >= 0: {self:?}")));
        }
        Ok(())
    }
}

/// Hidden-layer layout of one surrogate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetSpec {
    pub hidden_width: usize,
    pub hidden_layers: usize,
    pub activation: Activation,
}

impl NetSpec {
    pub fn layer_sizes(&self, input_dim: usize) -> Vec<usize> {
        let mut sizes = vec![input_dim];
        sizes.extend(std::iter::repeat(self.hidden_width).take(self.hidden_layers));
        sizes.push(1);
        sizes
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub max_epochs_per_phase: usize,
    pub max_cycles: usize,
    pub patience: usize,
    pub lr_disp: f64,
    pub lr_mass: f64,
    pub seed: u64,
    pub disp_net: NetSpec,
    pub mass_net: NetSpec,
    /// Outer loop stops once both phase-end totals improve by less than this (relative).
    pub cycle_rel_tol: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_epochs_per_phase: 10_000,
            max_cycles: 10,
            patience: 500,
            lr_disp: 1e-2,
            lr_mass: 1e-3,
            seed: 0,
            disp_net: NetSpec {
                hidden_width: 256,
                hidden_layers: 3,
                activation: Activation::Tanh,
            },
            mass_net: NetSpec {
                hidden_width: 64,
                hidden_layers: 3,
                activation: Activation::Softplus,
            },
            cycle_rel_tol: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.max_epochs_per_phase == 0 || self.max_cycles == 0 || self.patience == 0 {
            return bad(format!(
                "epochs ({}), cycles ({}) and patience ({}) must be positive",
                self.max_epochs_per_phase, self.max_cycles, self.patience
            ));
        }
        if !(self.lr_disp > 0.0 && self.lr_mass > 0.0 && self.lr_disp.is_finite() && self.lr_mass.is_finite()) {
            return bad(format!("learning rates must be positive: {} / {}", self.lr_disp, self.lr_mass));
        }
        for spec in [self.disp_net, self.mass_net] {
            if spec.hidden_width == 0 || spec.hidden_layers == 0 {
                return bad(format!("network layout must have positive width and depth: {spec:?}"));
            }
        }
        if !(self.cycle_rel_tol >= 0.0) {
            return bad(format!("cycle tolerance must be >= 0, got {}", self.cycle_rel_tol));
        }
        Ok(())
    }
}

/// Normalized features with the physical labels of each row.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSet {
    pub features: Array2<f64>,
    pub mass_obs: Vec<f64>,
    pub v0_obs: Vec<f64>,
    pub energy: Vec<f64>,
}

impl TrainingSet {
    pub fn new(features: Array2<f64>, mass_obs: Vec<f64>, v0_obs: Vec<f64>, energy: Vec<f64>) -> Result<Self> {
        let n = features.nrows();
        for (what, len) in [("mass labels", mass_obs.len()), ("velocity labels", v0_obs.len()), ("energy labels", energy.len())] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: n,
                    actual: len,
                });
            }
        }
        if n == 0 {
            return Err(Error::Empty("training set"));
        }
        if features.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("non-finite feature value".into()));
        }
        if mass_obs.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
            return Err(Error::InvalidArgument("observed masses must be > 0".into()));
        }
        if energy.iter().chain(&v0_obs).any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("non-finite label".into()));
        }
        Ok(TrainingSet {
            features,
            mass_obs,
            v0_obs,
            energy,
        })
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }
}

/// Kinetic energy of a rigid impactor.
pub fn kinetic_energy(mass_kg: f64, v0_mps: f64) -> Result<f64> {
    if !(mass_kg.is_finite() && mass_kg > 0.0) {
        return Err(Error::InvalidArgument(format!("mass must be > 0, got {mass_kg}")));
    }
    Ok(0.5 * mass_kg * v0_mps * v0_mps)
}

/// Appends the time coordinate as the last column.
pub fn with_time(features: ArrayView2<f64>, t: f64) -> Array2<f64> {
    let (n, f) = features.dim();
    let mut out = Array2::from_elem((n, f + 1), t);
    out.slice_mut(ndarray::s![.., ..f]).assign(&features);
    out
}

fn time_index(disp_net: &Network) -> usize {
    disp_net.input_dim() - 1
}

fn check_disp_net(disp_net: &Network, n_features: usize) -> Result<()> {
    if disp_net.input_dim() != n_features + 1 || disp_net.output_dim() != 1 {
        return Err(Error::DimensionMismatch {
            what: "displacement network input (features + time)",
            expected: n_features + 1,
            actual: disp_net.input_dim(),
        });
    }
    Ok(())
}

fn check_mass_net(mass_net: &Network, n_features: usize) -> Result<()> {
    if mass_net.input_dim() != n_features || mass_net.output_dim() != 1 {
        return Err(Error::DimensionMismatch {
            what: "mass network input",
            expected: n_features,
            actual: mass_net.input_dim(),
        });
    }
    Ok(())
}

/// Impact velocity `dw/dt` at `t = 0`. Sign is unconstrained.
pub fn predict_velocity(disp_net: &Network, features: &[f64]) -> Result<f64> {
    check_disp_net(disp_net, features.len())?;
    let mut input = features.to_vec();
    input.push(0.0);
    disp_net.dvalue_dtime(&input, time_index(disp_net))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispLoss {
    pub total: f64,
    pub v0: f64,
    pub ic: f64,
    pub ke: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassLoss {
    pub total: f64,
    pub m: f64,
    pub ke_m: f64,
}

fn check_batch(n: usize, columns: &[(&'static str, usize)]) -> Result<()> {
    for &(what, len) in columns {
        if len != n {
            return Err(Error::DimensionMismatch {
                what,
                expected: n,
                actual: len,
            });
        }
    }
    if n == 0 {
        return Err(Error::Empty("loss batch"));
    }
    Ok(())
}

/// Displacement-phase loss on a batch, with its parameter gradient.
pub fn loss_disp_with_grad(
    disp_net: &Network,
    features: ArrayView2<f64>,
    v0_obs: &[f64],
    e_meas: &[f64],
    m_bar: &[f64],
    weights: &LossWeights,
) -> Result<(DispLoss, Vec<f64>)> {
    let n = features.nrows();
    check_batch(n, &[("v0_obs", v0_obs.len()), ("e_meas", e_meas.len()), ("m_bar", m_bar.len())])?;
    if m_bar.iter().any(|m| !(*m > 0.0)) {
        return Err(Error::InvalidArgument("fixed masses must be > 0".into()));
    }
    check_disp_net(disp_net, features.ncols())?;
    let input = with_time(features, 0.0);
    let eval = disp_net.eval_batch(input.view(), Some(time_index(disp_net)))?;
    let w0 = &eval.values;
    let v = eval.tangents.as_ref().expect("time tracked");

    let inv_n = 1.0 / n as f64;
    let mut parts = DispLoss {
        total: 0.0,
        v0: 0.0,
        ic: 0.0,
        ke: 0.0,
    };
    let mut g_value = Array2::zeros((n, 1));
    let mut g_tangent = Array2::zeros((n, 1));
    for i in 0..n {
        let (wi, vi) = (w0[[i, 0]], v[[i, 0]]);
        let dv = v0_obs[i] - vi;
        let r = e_meas[i] - 0.5 * m_bar[i] * vi * vi;
        parts.v0 += dv * dv * inv_n;
        parts.ic += wi * wi * inv_n;
        parts.ke += r * r * inv_n;
        g_value[[i, 0]] = weights.lambda_ic * 2.0 * wi * inv_n;
        g_tangent[[i, 0]] =
            weights.lambda_v0 * (-2.0 * dv * inv_n) + weights.lambda_ke * (-2.0 * r * m_bar[i] * vi * inv_n);
    }
    parts.total = weights.lambda_v0 * parts.v0 + weights.lambda_ic * parts.ic + weights.lambda_ke * parts.ke;
    let grads = disp_net.backward(&eval, g_value.view(), Some(g_tangent.view()))?;
    Ok((parts, grads))
}

pub fn loss_disp(
    disp_net: &Network,
    features: ArrayView2<f64>,
    v0_obs: &[f64],
    e_meas: &[f64],
    m_bar: &[f64],
    weights: &LossWeights,
) -> Result<DispLoss> {
    Ok(loss_disp_with_grad(disp_net, features, v0_obs, e_meas, m_bar, weights)?.0)
}

/// Mass-phase loss on a batch, with its parameter gradient.
pub fn loss_mass_with_grad(
    mass_net: &Network,
    features: ArrayView2<f64>,
    m_obs: &[f64],
    e_meas: &[f64],
    v_bar: &[f64],
    weights: &LossWeights,
) -> Result<(MassLoss, Vec<f64>)> {
    let n = features.nrows();
    check_batch(n, &[("m_obs", m_obs.len()), ("e_meas", e_meas.len()), ("v_bar", v_bar.len())])?;
    check_mass_net(mass_net, features.ncols())?;
    let eval = mass_net.eval_batch(features, None)?;
    let m = &eval.values;

    let inv_n = 1.0 / n as f64;
    let mut parts = MassLoss {
        total: 0.0,
        m: 0.0,
        ke_m: 0.0,
    };
    let mut g_value = Array2::zeros((n, 1));
    for i in 0..n {
        let mi = m[[i, 0]];
        let dm = m_obs[i] - mi;
        let half_v2 = 0.5 * v_bar[i] * v_bar[i];
        let r = e_meas[i] - mi * half_v2;
        parts.m += dm * dm * inv_n;
        parts.ke_m += r * r * inv_n;
        g_value[[i, 0]] = weights.lambda_m * (-2.0 * dm * inv_n) + weights.lambda_ke_m * (-2.0 * r * half_v2 * inv_n);
    }
    parts.total = weights.lambda_m * parts.m + weights.lambda_ke_m * parts.ke_m;
    let grads = mass_net.backward(&eval, g_value.view(), None)?;
    Ok((parts, grads))
}

pub fn loss_mass(
    mass_net: &Network,
    features: ArrayView2<f64>,
    m_obs: &[f64],
    e_meas: &[f64],
    v_bar: &[f64],
    weights: &LossWeights,
) -> Result<MassLoss> {
    Ok(loss_mass_with_grad(mass_net, features, m_obs, e_meas, v_bar, weights)?.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Displacement,
    Mass,
    Baseline,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Displacement => "disp",
            Phase::Mass => "mass",
            Phase::Baseline => "baseline",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One epoch of one phase; `parts` are unweighted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub cycle: usize,
    pub phase: Phase,
    pub epoch: usize,
    pub total: f64,
    pub parts: Vec<f64>,
}

/// Loss history as CSV: `cycle,phase,epoch,total,part1,part2[,part3]`.
pub fn history_csv(history: &[HistoryRecord]) -> String {
    let width = history.iter().map(|r| r.parts.len()).max().unwrap_or(2).max(2);
    let mut out = String::from("cycle,phase,epoch,total");
    for k in 1..=width {
        out.push_str(&format!(",part{k}"));
    }
    out.push('\n');
    for r in history {
        out.push_str(&format!("{},{},{},{:.16e}", r.cycle, r.phase, r.epoch, r.total));
        for p in &r.parts {
            out.push_str(&format!(",{p:.16e}"));
        }
        out.push('\n');
    }
    out
}

/// Best (weighted) totals at the end of each cycle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleTotals {
    pub cycle: usize,
    pub disp: f64,
    pub mass: f64,
}

#[derive(Clone, Debug)]
pub struct TrainState {
    pub disp_net: Network,
    pub mass_net: Network,
    pub disp_adam: AdamState,
    pub mass_adam: AdamState,
    /// Mass held fixed during the displacement phase, per training row.
    pub fixed_mass: Vec<f64>,
    /// Velocity held fixed during the mass phase, per training row.
    pub fixed_velocity: Vec<f64>,
    /// Number of completed cycles.
    pub cycle: usize,
    pub history: Vec<HistoryRecord>,
    pub cycle_totals: Vec<CycleTotals>,
}

impl TrainState {
    /// Fresh networks sized for `data`, seeded from `config.seed`.
    pub fn new(data: &TrainingSet, config: &TrainConfig, weights: &LossWeights) -> Result<Self> {
        config.validate()?;
        let f = data.n_features();
        let disp_net = Network::init(
            &config.disp_net.layer_sizes(f + 1),
            config.disp_net.activation,
            OutputTransform::Identity,
            rng::derive_seed(config.seed, "disp_net"),
        )?;
        let mass_net = Network::init(
            &config.mass_net.layer_sizes(f),
            config.mass_net.activation,
            OutputTransform::SoftplusPlusEpsilon,
            rng::derive_seed(config.seed, "mass_net"),
        )?;
        let disp_net = align_sign(disp_net, data, weights)?;
        Ok(TrainState {
            disp_adam: AdamState::new(disp_net.num_params(), config.lr_disp),
            mass_adam: AdamState::new(mass_net.num_params(), config.lr_mass),
            disp_net,
            mass_net,
            fixed_mass: data.mass_obs.clone(),
            fixed_velocity: vec![0.0; data.len()],
            cycle: 0,
            history: Vec::new(),
            cycle_totals: Vec::new(),
        })
    }

    pub fn predictor(&self) -> Predictor {
        Predictor {
            disp_net: self.disp_net.clone(),
            mass_net: self.mass_net.clone(),
        }
    }
}

/// `w -> -w` leaves the initial-condition and kinetic-energy terms unchanged
/// and flips the sign of every velocity; only the velocity term tells the two
/// apart. The energy term repels velocities from zero, so a network that starts
/// on the wrong side stays there. Of the two mirror images of the initial draw
/// (equally likely under a symmetric initializer), keep the one with the lower
/// displacement loss.
fn align_sign(disp_net: Network, data: &TrainingSet, weights: &LossWeights) -> Result<Network> {
    let mut mirrored = disp_net.clone();
    let sizes = disp_net.layer_sizes();
    let (fan_in, fan_out) = (sizes[sizes.len() - 2], sizes[sizes.len() - 1]);
    let n = disp_net.num_params();
    mirrored.params_mut()[n - fan_in * fan_out - fan_out..]
        .iter_mut()
        .for_each(|p| *p = -*p);
    let loss = |net: &Network| {
        loss_disp(net, data.features.view(), &data.v0_obs, &data.energy, &data.mass_obs, weights).map(|l| l.total)
    };
    Ok(if loss(&mirrored)? < loss(&disp_net)? { mirrored } else { disp_net })
}

/// Full-batch Adam with patience-based early stopping. The parameters with the
/// best total are restored at the end; returns that best total.
fn optimize_phase<F>(
    net: &mut Network,
    adam: &mut AdamState,
    config: &TrainConfig,
    phase: Phase,
    cycle: usize,
    history: &mut Vec<HistoryRecord>,
    mut objective: F,
) -> Result<f64>
where
    F: FnMut(&Network) -> Result<(f64, Vec<f64>, Vec<f64>)>,
{
    let mut best = f64::INFINITY;
    let mut best_params = net.params().to_vec();
    let mut since_best = 0usize;
    for epoch in 0..config.max_epochs_per_phase {
        let (total, parts, grads) = objective(net)?;
        if !total.is_finite() || grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteLoss {
                phase: phase.name(),
                cycle,
                epoch,
            });
        }
        history.push(HistoryRecord {
            cycle,
            phase,
            epoch,
            total,
            parts,
        });
        if total < best {
            best = total;
            best_params.copy_from_slice(net.params());
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                break;
            }
        }
        adam_step(net.params_mut(), &grads, adam)?;
    }
    net.set_params(&best_params)?;
    Ok(best)
}

/// Phase A: fit the displacement network with the mass fixed at `state.fixed_mass`.
/// The mass network is not touched.
pub fn run_displacement_phase(
    state: &mut TrainState,
    data: &TrainingSet,
    config: &TrainConfig,
    weights: &LossWeights,
    cycle: usize,
) -> Result<f64> {
    let TrainState {
        disp_net,
        disp_adam,
        fixed_mass,
        history,
        ..
    } = state;
    let features = data.features.view();
    optimize_phase(disp_net, disp_adam, config, Phase::Displacement, cycle, history, |net| {
        let (l, g) = loss_disp_with_grad(net, features, &data.v0_obs, &data.energy, fixed_mass, weights)?;
        Ok((l.total, vec![l.v0, l.ic, l.ke], g))
    })
}

/// Phase B: freeze the displacement network, compute `v_bar` once, and fit the
/// mass network.
pub fn run_mass_phase(
    state: &mut TrainState,
    data: &TrainingSet,
    config: &TrainConfig,
    weights: &LossWeights,
    cycle: usize,
) -> Result<f64> {
    let input = with_time(data.features.view(), 0.0);
    let eval = state.disp_net.eval_batch(input.view(), Some(time_index(&state.disp_net)))?;
    state.fixed_velocity = eval.tangents.expect("time tracked").column(0).to_vec();
    let TrainState {
        mass_net,
        mass_adam,
        fixed_velocity,
        history,
        ..
    } = state;
    let features = data.features.view();
    optimize_phase(mass_net, mass_adam, config, Phase::Mass, cycle, history, |net| {
        let (l, g) = loss_mass_with_grad(net, features, &data.mass_obs, &data.energy, fixed_velocity, weights)?;
        Ok((l.total, vec![l.m, l.ke_m], g))
    })
}

fn relative_improvement(prev: f64, cur: f64) -> f64 {
    if prev == 0.0 {
        0.0
    } else {
        (prev - cur) / prev.abs()
    }
}

/// Alternating sequential training of both surrogates.
pub fn train(data: &TrainingSet, config: &TrainConfig, weights: &LossWeights) -> Result<TrainState> {
    weights.validate()?;
    let mut state = TrainState::new(data, config, weights)?;
    for cycle in 0..config.max_cycles {
        if cycle > 0 {
            state.fixed_mass = state.mass_net.forward_batch(data.features.view())?.column(0).to_vec();
        }
        let disp = run_displacement_phase(&mut state, data, config, weights, cycle)?;
        let mass = run_mass_phase(&mut state, data, config, weights, cycle)?;
        state.cycle = cycle + 1;
        let converged = state.cycle_totals.last().is_some_and(|prev| {
            relative_improvement(prev.disp, disp) < config.cycle_rel_tol
                && relative_improvement(prev.mass, mass) < config.cycle_rel_tol
        });
        state.cycle_totals.push(CycleTotals { cycle, disp, mass });
        if converged {
            break;
        }
    }
    Ok(state)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub mass_kg: f64,
    pub v0_mps: f64,
    pub energy_j: f64,
}

impl Prediction {
    fn from_parts(mass_kg: f64, v0_mps: f64) -> Result<Self> {
        Ok(Prediction {
            mass_kg,
            v0_mps,
            energy_j: kinetic_energy(mass_kg, v0_mps)?,
        })
    }
}

/// Frozen pair of surrogates used for inference.
#[derive(Clone, Debug, PartialEq)]
pub struct Predictor {
    pub disp_net: Network,
    pub mass_net: Network,
}

impl Predictor {
    pub fn new(disp_net: Network, mass_net: Network) -> Result<Self> {
        let f = mass_net.input_dim();
        check_disp_net(&disp_net, f)?;
        check_mass_net(&mass_net, f)?;
        Ok(Predictor { disp_net, mass_net })
    }

    pub fn n_features(&self) -> usize {
        self.mass_net.input_dim()
    }

    pub fn predict(&self, features: &[f64]) -> Result<Prediction> {
        check_mass_net(&self.mass_net, features.len())?;
        if features.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("non-finite feature value".into()));
        }
        let mass = self.mass_net.forward(features)?[0];
        let v0 = predict_velocity(&self.disp_net, features)?;
        Prediction::from_parts(mass, v0)
    }

    pub fn predict_batch(&self, features: ArrayView2<f64>) -> Result<Vec<Prediction>> {
        check_mass_net(&self.mass_net, features.ncols())?;
        let masses = self.mass_net.forward_batch(features)?;
        let input = with_time(features, 0.0);
        let eval = self.disp_net.eval_batch(input.view(), Some(time_index(&self.disp_net)))?;
        let v = eval.tangents.expect("time tracked");
        (0..features.nrows())
            .map(|i| Prediction::from_parts(masses[[i, 0]], v[[i, 0]]))
            .collect()
    }
}

pub fn predict(state: &TrainState, features: &[f64]) -> Result<Prediction> {
    state.predictor().predict(features)
}

/// Physics-ablated comparator: one network with the displacement layout,
/// identity output, plain MSE on energy.
#[derive(Clone, Debug)]
pub struct BaselineModel {
    pub net: Network,
    pub history: Vec<HistoryRecord>,
    pub best_loss: f64,
}

impl BaselineModel {
    pub fn predict_batch(&self, features: ArrayView2<f64>) -> Result<Vec<f64>> {
        Ok(self.net.forward_batch(features)?.column(0).to_vec())
    }
}

pub fn train_baseline(features: ArrayView2<f64>, energies: &[f64], config: &TrainConfig) -> Result<BaselineModel> {
    config.validate()?;
    check_batch(features.nrows(), &[("energy labels", energies.len())])?;
    let mut net = Network::init(
        &config.disp_net.layer_sizes(features.ncols()),
        config.disp_net.activation,
        OutputTransform::Identity,
        rng::derive_seed(config.seed, "baseline_net"),
    )?;
    let mut adam = AdamState::new(net.num_params(), config.lr_disp);
    let mut history = Vec::new();
    let n = features.nrows();
    let inv_n = 1.0 / n as f64;
    let best_loss = optimize_phase(&mut net, &mut adam, config, Phase::Baseline, 0, &mut history, |net| {
        let eval = net.eval_batch(features, None)?;
        let mut g = Array2::zeros((n, 1));
        let mut mse = 0.0;
        for i in 0..n {
            let r = eval.values[[i, 0]] - energies[i];
            mse += r * r * inv_n;
            g[[i, 0]] = 2.0 * r * inv_n;
        }
        let grads = net.backward(&eval, g.view(), None)?;
        Ok((mse, vec![mse], grads))
    })?;
    Ok(BaselineModel {
        net,
        history,
        best_loss,
    })
}
