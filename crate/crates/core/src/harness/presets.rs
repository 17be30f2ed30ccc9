use super::{SweepAxis, SweepSpec, TrialConfig};
use crate::channel::IrsBsModel;
use crate::subspace::ThresholdRule;

/// Named configuration, optionally with the sweep it was made for.
#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub config: TrialConfig,
    pub sweep: Option<SweepSpec>,
}

pub const PRESET_NAMES: [&str; 8] = ["desk", "full", "single", "fig6", "fig7", "fig8", "fig9", "fig10"];

/// Desk-scale configuration: 64 IRS elements, 256 subcarriers at 100 MHz,
/// 32 blocks, 3 clusters of 4 targets, M_B = Q0 = 4, 200 trials.
///
/// Noise variance 0.01 and a zero weight on the path-length residual of the
/// near-field solve.
pub fn desk() -> TrialConfig {
    let mut c = TrialConfig::default();
    c.subspace.q0 = Some(4);
    c.ofdm.noise_var = 0.01;
    c.localize.near.w_path = 0.0;
    c
}

/// Full-scale configuration: 256 IRS elements at 28 GHz, 834 subcarriers,
/// 8 targets per cluster, 10^4 trials. Long-running.
pub fn full() -> TrialConfig {
    let mut c = desk();
    c.scene.wavelength = 3.0e8 / 28.0e9;
    c.scene.irs_elements = 256;
    c.ofdm.num_subcarriers = 834;
    c.ofdm.subcarrier_spacing = 1e8 / 834.0;
    c.harness.num_trials = 10_000;
    c.harness.targets_per_cluster = 8;
    c.subspace.k_max_assumed = 8;
    c.subspace.q0 = Some(4);
    c
}

pub fn preset(name: &str) -> Option<Preset> {
    let plain = |config| Some(Preset { config, sweep: None });
    let with = |config, axis, values: &[f64], fixed_product| {
        Some(Preset {
            config,
            sweep: Some(SweepSpec {
                axis,
                values: values.to_vec(),
                fixed_product,
            }),
        })
    };
    match name {
        "desk" => plain(desk()),
        "full" => plain(full()),
        "single" => {
            let mut c = desk();
            c.harness.num_trials = 1;
            c.harness.clusters_per_trial = 1;
            c.harness.targets_per_cluster = 1;
            c.ofdm.noise_var = 0.0;
            c.subspace.thresholds = ThresholdRule::Fixed { far: 10.0, near: 10.0 };
            plain(c)
        }
        "fig6" => with(desk(), SweepAxis::DetectionRadius, &[0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0], None),
        "fig7" => {
            let mut c = desk();
            c.subspace.q0 = Some(1);
            with(c, SweepAxis::NumBs, &[4.0, 6.0, 8.0, 10.0, 12.0], None)
        }
        "fig8" => {
            let mut c = desk();
            c.scene.irs_bs_model = IrsBsModel::FarField;
            c.subspace.q0 = Some(10);
            c.ofdm.symbols_per_block = 10;
            with(c, SweepAxis::NumBs, &[2.0, 4.0, 6.0, 8.0], None)
        }
        "fig9" => with(desk(), SweepAxis::Q0, &[1.0, 2.0, 3.0, 4.0, 6.0, 12.0], Some(12)),
        "fig10" => with(desk(), SweepAxis::TargetsPerCluster, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], None),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for name in PRESET_NAMES {
            let p = preset(name).unwrap();
            p.config.validate().unwrap();
            if let Some(s) = &p.sweep {
                for &v in &s.values {
                    super::super::apply_axis(&p.config, s, v).unwrap();
                }
            }
        }
        assert!(preset("nope").is_none());
    }
}
