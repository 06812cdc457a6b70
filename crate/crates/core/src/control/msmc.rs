use serde::{Deserialize, Serialize};

use crate::plant::TurbineParams;

/// Operating region selected by the machine-side master controller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    Off,
    MinSpeed,
    Mppt,
    Rated,
    Curtail,
}

impl Region {
    pub fn code(self) -> f64 {
        match self {
            Region::Off => 0.0,
            Region::MinSpeed => 1.5,
            Region::Mppt => 2.0,
            Region::Rated => 3.0,
            Region::Curtail => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MsmcOutput {
    /// Speed error handed to the pitch controller, pu.
    pub delta_omega: f64,
    /// Electromagnetic torque reference, pu.
    pub t_e_ref: f64,
    pub region: Region,
}

/// Rated plant power and torque, pu.
pub const P_RATED: f64 = 1.0;
pub const T_RATED: f64 = 1.0;
pub const OMEGA_RATED: f64 = 1.0;

/// Machine-side master control: region selection and references.
pub fn msmc(v_w: f64, omega_r: f64, p_ref_plant: f64, params: &TurbineParams) -> MsmcOutput {
    let k_opt = params.optimal_gain_pu();
    if p_ref_plant < P_RATED {
        return MsmcOutput {
            delta_omega: omega_r - OMEGA_RATED,
            t_e_ref: if omega_r > 0.0 {
                p_ref_plant / omega_r
            } else {
                0.0
            },
            region: Region::Curtail,
        };
    }
    if v_w < params.cut_in {
        MsmcOutput {
            delta_omega: 0.0,
            t_e_ref: 0.0,
            region: Region::Off,
        }
    } else if v_w < params.v_inter {
        MsmcOutput {
            delta_omega: omega_r - params.omega_min,
            t_e_ref: k_opt * omega_r * omega_r,
            region: Region::MinSpeed,
        }
    } else if v_w < params.v_rated {
        MsmcOutput {
            delta_omega: 0.0,
            t_e_ref: k_opt * omega_r * omega_r,
            region: Region::Mppt,
        }
    } else if v_w < params.cut_out {
        MsmcOutput {
            delta_omega: omega_r - OMEGA_RATED,
            t_e_ref: T_RATED,
            region: Region::Rated,
        }
    } else {
        MsmcOutput {
            delta_omega: 0.0,
            t_e_ref: 0.0,
            region: Region::Off,
        }
    }
}

/// Active-power reference from the torque reference.
pub fn optimal_power_ref(t_e_ref: f64, omega_r: f64) -> f64 {
    t_e_ref * omega_r
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn curtailment_branch() {
        let p = TurbineParams::default();
        let o = msmc(12.0, 1.0, 0.8, &p);
        assert_eq!(o.region, Region::Curtail);
        assert_relative_eq!(o.t_e_ref, 0.8);
        assert_eq!(o.delta_omega, 0.0);
    }

    #[test]
    fn cut_out_turns_off() {
        let p = TurbineParams::default();
        let o = msmc(30.0, 1.0, 1.0, &p);
        assert_eq!(o.region, Region::Off);
        assert_eq!(o.t_e_ref, 0.0);
        assert_eq!(o.delta_omega, 0.0);
    }

    #[test]
    fn mppt_branch_uses_optimal_gain() {
        let p = TurbineParams::default();
        let o = msmc(10.0, 0.8, 1.0, &p);
        assert_eq!(o.region, Region::Mppt);
        assert_relative_eq!(o.t_e_ref, p.optimal_gain_pu() * 0.64, max_relative = 1e-12);
        assert_eq!(o.delta_omega, 0.0);
        let pr = optimal_power_ref(o.t_e_ref, 0.8);
        assert_relative_eq!(pr, p.optimal_gain_pu() * 0.512, max_relative = 1e-12);
    }

    #[test]
    fn thresholds_belong_to_upper_region() {
        let p = TurbineParams::default();
        assert_eq!(msmc(p.cut_in, 0.7, 1.0, &p).region, Region::MinSpeed);
        assert_eq!(msmc(p.v_inter, 0.7, 1.0, &p).region, Region::Mppt);
        assert_eq!(msmc(p.v_rated, 1.0, 1.0, &p).region, Region::Rated);
        assert_eq!(msmc(p.cut_out, 1.0, 1.0, &p).region, Region::Off);
    }

    #[test]
    fn optimal_power_ref_trivial() {
        assert_eq!(optimal_power_ref(0.0, 0.9), 0.0);
        assert_eq!(optimal_power_ref(0.8, 1.0), 0.8);
    }
}
