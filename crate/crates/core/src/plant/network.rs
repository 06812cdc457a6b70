//! Grid-side electrical network in a synchronous dq frame rotating at the
//! nominal grid frequency.
//!
//! ```text
//!   e ──R_f+jX_f──┬── PCC (v_c) ──R_g+jX_g── v_g   (grid, when connected)
//!                 │
//!               jB_c   r_fault (when faulted)   R_l+jX_l (load, when connected)
//! ```
//!
//! Everything is linear for a fixed topology, so each topology is discretised
//! once per run: exactly (matrix exponential, zero-order-hold converter
//! voltage) or with the trapezoidal rule. Both stay stable with the stiff
//! fault shunt across the filter capacitor.
//!
//! A cleared fault does not vanish in a single step: its conductance decays
//! geometrically over [`EXTINCTION_TIME`], as an arc does, so the grid
//! inductor current it carried is not forced into the filter capacitor.

use nalgebra::{DMatrix, SMatrix, SVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const N_STATES: usize = 8;
pub const N_INPUTS: usize = 4;

/// Duration of the fault-conductance decay after clearing, s.
pub const EXTINCTION_TIME: f64 = 5.0e-3;
/// Number of constant-conductance stages in the decay.
pub const EXTINCTION_STAGES: usize = 20;
/// Conductance left in the final stage relative to the fault conductance.
const EXTINCTION_FLOOR: f64 = 1.0e-3;

type StateMat = SMatrix<f64, N_STATES, N_STATES>;
type InputMat = SMatrix<f64, N_STATES, N_INPUTS>;
pub type StateVec = SVector<f64, N_STATES>;
type InputVec = SVector<f64, N_INPUTS>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterParams {
    pub r_f: f64,
    pub l_f: f64,
    pub c_f: f64,
}

impl Default for FilterParams {
    fn default() -> Self {
        Self {
            r_f: 0.002,
            l_f: 0.15,
            c_f: 0.05,
        }
    }
}

/// Location of an applied fault. Only the point of common coupling is modelled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FaultLocation {
    #[default]
    Pcc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridParams {
    pub scr: f64,
    pub x_r_ratio: f64,
    pub f0: f64,
    pub v_grid: f64,
    /// Shunt resistance of the three-phase fault, pu.
    pub r_fault: f64,
    pub fault_location: FaultLocation,
}

impl Default for GridParams {
    fn default() -> Self {
        Self {
            scr: 10.0,
            x_r_ratio: 10.0,
            f0: 60.0,
            v_grid: 1.0,
            r_fault: 0.1,
            fault_location: FaultLocation::Pcc,
        }
    }
}

impl GridParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.scr.is_finite() && self.scr > 0.0) {
            return Err(Error::config("grid.scr", format!("must be > 0, got {}", self.scr)));
        }
        if !(self.x_r_ratio.is_finite() && self.x_r_ratio > 0.0) {
            return Err(Error::config("grid.x_r_ratio", "must be > 0"));
        }
        if self.f0.is_nan() || self.f0 <= 0.0 {
            return Err(Error::config("grid.f0", "must be > 0"));
        }
        if !(self.v_grid > 0.0 && self.v_grid < 2.0) {
            return Err(Error::config("grid.v_grid", "must lie in (0, 2) pu"));
        }
        if self.r_fault.is_nan() || self.r_fault < 0.0 {
            return Err(Error::config("grid.r_fault", "must be >= 0"));
        }
        Ok(())
    }

    /// Grid impedance on the turbine base, |z| = 1/scr.
    pub fn impedance(&self) -> Complex64 {
        let z = 1.0 / self.scr;
        let r = z / (1.0 + self.x_r_ratio * self.x_r_ratio).sqrt();
        Complex64::new(r, r * self.x_r_ratio)
    }

    pub fn omega_base(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.f0
    }
}

impl FilterParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("filter.r_f", self.r_f),
            ("filter.l_f", self.l_f),
            ("filter.c_f", self.c_f),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(name, format!("must be > 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn impedance(&self) -> Complex64 {
        Complex64::new(self.r_f, self.l_f)
    }
}

/// Constant-impedance series R-L load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoadParams {
    /// Active power at 1 pu voltage.
    pub p: f64,
    pub power_factor: f64,
}

impl Default for LoadParams {
    fn default() -> Self {
        Self {
            p: 0.5,
            power_factor: 0.95,
        }
    }
}

impl LoadParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p.is_finite()) {
            return Err(Error::config("load.p", "must be > 0"));
        }
        if !(self.power_factor > 0.0 && self.power_factor < 1.0) {
            return Err(Error::config(
                "load.power_factor",
                "must lie in (0, 1) for an R-L load",
            ));
        }
        Ok(())
    }

    pub fn impedance(&self) -> Complex64 {
        let q = self.p * (1.0 / (self.power_factor * self.power_factor) - 1.0).sqrt();
        1.0 / Complex64::new(self.p, -q)
    }
}

/// Switchable elements of the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Topology {
    pub grid: bool,
    pub fault: bool,
    pub load: bool,
    /// Grid-side converter switching; when blocked the filter branch is open.
    pub converter: bool,
}

impl Topology {
    pub const GRID: Topology = Topology {
        grid: true,
        fault: false,
        load: false,
        converter: true,
    };

    pub const COUNT: usize = 16;

    fn index(self) -> usize {
        (self.grid as usize)
            | (self.fault as usize) << 1
            | (self.load as usize) << 2
            | (self.converter as usize) << 3
    }

    fn from_index(k: usize) -> Self {
        Topology {
            grid: k & 1 != 0,
            fault: k & 2 != 0,
            load: k & 4 != 0,
            converter: k & 8 != 0,
        }
    }
}

/// Network state: filter current, PCC voltage, grid and load branch currents.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NetworkState {
    pub i_f: Complex64,
    pub v_c: Complex64,
    pub i_g: Complex64,
    pub i_l: Complex64,
}

impl NetworkState {
    pub fn to_vec(self) -> StateVec {
        StateVec::from([
            self.i_f.re,
            self.i_f.im,
            self.v_c.re,
            self.v_c.im,
            self.i_g.re,
            self.i_g.im,
            self.i_l.re,
            self.i_l.im,
        ])
    }

    pub fn from_vec(x: &StateVec) -> Self {
        Self {
            i_f: Complex64::new(x[0], x[1]),
            v_c: Complex64::new(x[2], x[3]),
            i_g: Complex64::new(x[4], x[5]),
            i_l: Complex64::new(x[6], x[7]),
        }
    }

    /// Current leaving the PCC into the grid, load and a shunt of
    /// conductance `g_shunt`.
    pub fn outgoing_current(&self, topo: Topology, g_shunt: f64) -> Complex64 {
        let mut i = self.v_c * g_shunt;
        if topo.grid {
            i += self.i_g;
        }
        if topo.load {
            i += self.i_l;
        }
        i
    }

    /// Active and reactive power delivered into the PCC node.
    pub fn pcc_power(&self) -> Complex64 {
        self.v_c * self.i_f.conj()
    }
}

/// Discretisation rule for the linear network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NetworkDiscretization {
    #[default]
    Exact,
    Trapezoidal,
}

#[derive(Debug, Clone)]
struct Discrete {
    phi: StateMat,
    gamma: InputMat,
    psi_x: StateMat,
    psi_u: InputMat,
}

/// Result of one network step.
#[derive(Debug, Clone, Copy)]
pub struct NetworkStep {
    pub state: NetworkState,
    /// Time integral of the filter current over the step.
    pub i_f_integral: Complex64,
}

#[derive(Debug, Clone)]
pub struct LinearNetwork {
    pub filter: FilterParams,
    pub grid: GridParams,
    pub load: LoadParams,
    dt: f64,
    disc: Vec<Discrete>,
    cont: Vec<(StateMat, InputMat)>,
    /// Discretisations during fault extinction, by stage then topology.
    extinction: Vec<Vec<Discrete>>,
}

impl LinearNetwork {
    pub fn new(
        filter: &FilterParams,
        grid: &GridParams,
        load: &LoadParams,
        dt: f64,
        method: NetworkDiscretization,
    ) -> Result<Self> {
        filter.validate()?;
        grid.validate()?;
        load.validate()?;
        let discretize = |a: &StateMat, b: &InputMat| match method {
            NetworkDiscretization::Exact => Ok(discretize_exact(a, b, dt)),
            NetworkDiscretization::Trapezoidal => discretize_trapezoidal(a, b, dt),
        };
        let mut cont = Vec::with_capacity(Topology::COUNT);
        let mut disc = Vec::with_capacity(Topology::COUNT);
        for k in 0..Topology::COUNT {
            let topo = Topology::from_index(k);
            let g = if topo.fault { fault_conductance(grid) } else { 0.0 };
            let (a, b) = continuous_model(filter, grid, load, topo, g);
            disc.push(discretize(&a, &b)?);
            cont.push((a, b));
        }
        let mut extinction = Vec::with_capacity(EXTINCTION_STAGES);
        for stage in 0..EXTINCTION_STAGES {
            let g = extinction_conductance(grid, stage);
            let mut row = Vec::with_capacity(Topology::COUNT);
            for k in 0..Topology::COUNT {
                let topo = Topology::from_index(k);
                let (a, b) = continuous_model(filter, grid, load, topo, g);
                row.push(discretize(&a, &b)?);
            }
            extinction.push(row);
        }
        Ok(Self {
            filter: filter.clone(),
            grid: grid.clone(),
            load: load.clone(),
            dt,
            disc,
            cont,
            extinction,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Conductance of the fault shunt: the full fault while it is applied,
    /// the decaying remnant during extinction, zero otherwise.
    pub fn shunt_conductance(&self, topo: Topology, extinction: Option<usize>) -> f64 {
        match (topo.fault, extinction) {
            (true, _) => fault_conductance(&self.grid),
            (false, Some(stage)) => extinction_conductance(&self.grid, stage),
            (false, None) => 0.0,
        }
    }

    /// Extinction stage reached `elapsed` seconds after the fault cleared,
    /// or `None` once the remnant is gone.
    pub fn extinction_stage(elapsed: f64) -> Option<usize> {
        let k = (elapsed / EXTINCTION_TIME * EXTINCTION_STAGES as f64).floor();
        (k >= 0.0 && k < EXTINCTION_STAGES as f64).then_some(k as usize)
    }

    /// Advance by one step with the converter voltage `e` held constant.
    pub fn step(&self, x: &NetworkState, e: Complex64, topo: Topology) -> NetworkStep {
        self.step_extinguishing(x, e, topo, None)
    }

    /// As [`step`](Self::step), with a cleared fault still extinguishing at
    /// `stage` when `topo.fault` is false.
    pub fn step_extinguishing(
        &self,
        x: &NetworkState,
        e: Complex64,
        topo: Topology,
        stage: Option<usize>,
    ) -> NetworkStep {
        let d = match stage {
            Some(k) if !topo.fault => &self.extinction[k][topo.index()],
            _ => &self.disc[topo.index()],
        };
        let xv = x.to_vec();
        let u = InputVec::from([e.re, e.im, self.grid.v_grid, 0.0]);
        let x1 = d.phi * xv + d.gamma * u;
        let z = d.psi_x * xv + d.psi_u * u;
        NetworkStep {
            state: NetworkState::from_vec(&x1),
            i_f_integral: Complex64::new(z[0], z[1]),
        }
    }

    /// Continuous-time derivative, used by tests and diagnostics.
    pub fn derivative(&self, x: &NetworkState, e: Complex64, topo: Topology) -> NetworkState {
        let (a, b) = &self.cont[topo.index()];
        let u = InputVec::from([e.re, e.im, self.grid.v_grid, 0.0]);
        NetworkState::from_vec(&(a * x.to_vec() + b * u))
    }

    /// Steady-state phasors for a constant converter voltage.
    pub fn steady_state(&self, e: Complex64, topo: Topology) -> Result<NetworkState> {
        let yf = if topo.converter {
            1.0 / self.filter.impedance()
        } else {
            Complex64::new(0.0, 0.0)
        };
        let yc = Complex64::new(0.0, self.filter.c_f);
        let mut y = yf + yc;
        let mut inj = yf * e;
        let zg = self.grid.impedance();
        if topo.grid {
            y += 1.0 / zg;
            inj += self.grid.v_grid / zg;
        }
        let zl = self.load.impedance();
        if topo.load {
            y += 1.0 / zl;
        }
        if topo.fault {
            if self.grid.r_fault == 0.0 {
                return Ok(NetworkState {
                    i_f: e * yf,
                    v_c: Complex64::new(0.0, 0.0),
                    i_g: if topo.grid {
                        -self.grid.v_grid / zg
                    } else {
                        Complex64::new(0.0, 0.0)
                    },
                    i_l: Complex64::new(0.0, 0.0),
                });
            }
            y += 1.0 / self.grid.r_fault;
        }
        if y.norm() < 1e-14 {
            return Err(Error::SingularNetwork("zero nodal admittance at PCC".into()));
        }
        let v_c = inj / y;
        Ok(NetworkState {
            i_f: (e - v_c) * yf,
            v_c,
            i_g: if topo.grid {
                (v_c - self.grid.v_grid) / zg
            } else {
                Complex64::new(0.0, 0.0)
            },
            i_l: if topo.load {
                v_c / zl
            } else {
                Complex64::new(0.0, 0.0)
            },
        })
    }
}

/// Phasor currents and PCC voltage for a converter terminal voltage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkPhasors {
    pub i_conv: Complex64,
    pub v_pcc: Complex64,
    pub i_grid: Complex64,
    pub i_fault: Complex64,
}

/// Quasi-static solve of converter terminal voltage `v_t` behind the filter
/// into the Thevenin grid, optionally with the fault shunt at the PCC.
///
/// The filter capacitor is included when `filter.c_f > 0`; pass `c_f = 0`
/// for the pure R-L filter.
pub fn grid_interface(
    v_t: Complex64,
    filter: &FilterParams,
    grid: &GridParams,
    fault_active: bool,
) -> Result<NetworkPhasors> {
    let zf = filter.impedance();
    let zg = grid.impedance();
    let yc = Complex64::new(0.0, filter.c_f);
    let vg = Complex64::new(grid.v_grid, 0.0);
    if fault_active && grid.r_fault == 0.0 {
        if zf.norm() == 0.0 {
            return Err(Error::SingularNetwork(
                "bolted fault directly at an ideal converter terminal".into(),
            ));
        }
        return Ok(NetworkPhasors {
            i_conv: v_t / zf,
            v_pcc: Complex64::new(0.0, 0.0),
            i_grid: -vg / zg,
            i_fault: v_t / zf + vg / zg,
        });
    }
    if zf.norm() == 0.0 {
        let i_grid = (v_t - vg) / zg;
        let i_fault = if fault_active {
            v_t / grid.r_fault
        } else {
            Complex64::new(0.0, 0.0)
        };
        return Ok(NetworkPhasors {
            i_conv: i_grid + i_fault + yc * v_t,
            v_pcc: v_t,
            i_grid,
            i_fault,
        });
    }
    let y_fault = if fault_active {
        Complex64::new(1.0 / grid.r_fault, 0.0)
    } else {
        Complex64::new(0.0, 0.0)
    };
    let y = 1.0 / zf + yc + 1.0 / zg + y_fault;
    if y.norm() < 1e-14 {
        return Err(Error::SingularNetwork("zero nodal admittance at PCC".into()));
    }
    let v_pcc = (v_t / zf + vg / zg) / y;
    Ok(NetworkPhasors {
        i_conv: (v_t - v_pcc) / zf,
        v_pcc,
        i_grid: (v_pcc - vg) / zg,
        i_fault: v_pcc * y_fault,
    })
}

fn fault_conductance(grid: &GridParams) -> f64 {
    if grid.r_fault > 0.0 {
        1.0 / grid.r_fault
    } else {
        1.0e6
    }
}

fn extinction_conductance(grid: &GridParams, stage: usize) -> f64 {
    let ratio = EXTINCTION_FLOOR.powf(1.0 / EXTINCTION_STAGES as f64);
    fault_conductance(grid) * ratio.powi(stage as i32 + 1)
}

fn continuous_model(
    filter: &FilterParams,
    grid: &GridParams,
    load: &LoadParams,
    topo: Topology,
    g: f64,
) -> (StateMat, InputMat) {
    let wb = grid.omega_base();
    let mut a = StateMat::zeros();
    let mut b = InputMat::zeros();

    // series R-L branch: (L/wb) di/dt = v_from - v_to - (R + jL) i
    let branch = |a: &mut StateMat, row: usize, r: f64, l: f64| {
        let k = wb / l;
        a[(row, row)] = -k * r;
        a[(row, row + 1)] = k * l;
        a[(row + 1, row + 1)] = -k * r;
        a[(row + 1, row)] = -k * l;
    };

    if topo.converter {
        branch(&mut a, 0, filter.r_f, filter.l_f);
        let kf = wb / filter.l_f;
        a[(0, 2)] = -kf;
        a[(1, 3)] = -kf;
        b[(0, 0)] = kf;
        b[(1, 1)] = kf;
    }

    let zg = grid.impedance();
    if topo.grid {
        branch(&mut a, 4, zg.re, zg.im);
        let kg = wb / zg.im;
        a[(4, 2)] = kg;
        a[(5, 3)] = kg;
        b[(4, 2)] = -kg;
        b[(5, 3)] = -kg;
    }
    let zl = load.impedance();
    if topo.load {
        branch(&mut a, 6, zl.re, zl.im);
        let kl = wb / zl.im;
        a[(6, 2)] = kl;
        a[(7, 3)] = kl;
    }

    // PCC capacitor: (C/wb) dv/dt = i_f - i_out - G v - jC v
    let kc = wb / filter.c_f;
    if topo.converter {
        a[(2, 0)] = kc;
        a[(3, 1)] = kc;
    }
    a[(2, 2)] = -kc * g;
    a[(3, 3)] = -kc * g;
    a[(2, 3)] = wb;
    a[(3, 2)] = -wb;
    if topo.grid {
        a[(2, 4)] = -kc;
        a[(3, 5)] = -kc;
    }
    if topo.load {
        a[(2, 6)] = -kc;
        a[(3, 7)] = -kc;
    }
    (a, b)
}

fn discretize_exact(a: &StateMat, b: &InputMat, dt: f64) -> Discrete {
    // d/dt [x; u; z] = [[A, B, 0], [0, 0, 0], [I, 0, 0]] [x; u; z]
    let n = N_STATES;
    let m = N_INPUTS;
    let size = 2 * n + m;
    let mut big = DMatrix::<f64>::zeros(size, size);
    for i in 0..n {
        for j in 0..n {
            big[(i, j)] = a[(i, j)] * dt;
        }
        for j in 0..m {
            big[(i, n + j)] = b[(i, j)] * dt;
        }
        big[(n + m + i, i)] = dt;
    }
    let e = big.exp();
    let mut d = Discrete {
        phi: StateMat::zeros(),
        gamma: InputMat::zeros(),
        psi_x: StateMat::zeros(),
        psi_u: InputMat::zeros(),
    };
    for i in 0..n {
        for j in 0..n {
            d.phi[(i, j)] = e[(i, j)];
            d.psi_x[(i, j)] = e[(n + m + i, j)];
        }
        for j in 0..m {
            d.gamma[(i, j)] = e[(i, n + j)];
            d.psi_u[(i, j)] = e[(n + m + i, n + j)];
        }
    }
    d
}

fn discretize_trapezoidal(a: &StateMat, b: &InputMat, dt: f64) -> Result<Discrete> {
    let eye = StateMat::identity();
    let lhs = eye - a * (0.5 * dt);
    let inv = lhs
        .try_inverse()
        .ok_or_else(|| Error::SingularNetwork("trapezoidal system matrix".into()))?;
    let phi = inv * (eye + a * (0.5 * dt));
    let gamma = inv * b * dt;
    Ok(Discrete {
        psi_x: (eye + phi) * (0.5 * dt),
        psi_u: gamma * (0.5 * dt),
        phi,
        gamma,
    })
}
