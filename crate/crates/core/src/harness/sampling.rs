use super::TrialConfig;
use crate::channel::tap_of_range;
use crate::geometry::{Point2, Scene};
use crate::rng::{stream, Domain};
use crate::{Error, Result};
use rand::Rng;

/// Area-uniform point of the sector `d ∈ [d_min, d_max]`, `θ ∈ [θ_min, θ_max]`.
fn draw(rng: &mut impl Rng, scene: &Scene, cfg: &TrialConfig) -> Point2 {
    let r = &cfg.subspace.region;
    let (a, b) = (cfg.harness.d_min.powi(2), r.d_max.powi(2));
    let d = (a + rng.random::<f64>() * (b - a)).sqrt();
    let theta = r.theta_min + rng.random::<f64>() * (r.theta_max - r.theta_min);
    scene.point_at(d, theta)
}

fn total_range(scene: &Scene, p: Point2) -> f64 {
    scene.user_pos.distance(&p) + p.distance(&scene.irs_pos) + scene.irs_bs_distance()
}

/// Draws `clusters_per_trial` distinct occupied taps with `targets_per_cluster`
/// targets each. The first target of a cluster fixes its tap; the others are
/// rejection-sampled until they land in the same tap.
pub fn sample_scene(base: &Scene, cfg: &TrialConfig, seed: u64) -> Result<Scene> {
    let h = &cfg.harness;
    let width = cfg.ofdm.tap_width();
    let mut rng = stream(seed, Domain::Scene, 0, 0);
    let mut scene = base.clone();
    scene.targets.clear();
    let mut taps: Vec<usize> = Vec::new();
    let mut placed: Vec<Point2> = Vec::new();
    let separated = |placed: &[Point2], p: Point2| placed.iter().all(|q| q.distance(&p) >= h.min_separation);
    for _ in 0..h.clusters_per_trial {
        let mut budget = h.max_retries;
        let mut tap = None;
        let mut members = 0;
        while members < h.targets_per_cluster {
            if budget == 0 {
                return Err(Error::RetryBudgetExhausted(h.max_retries));
            }
            budget -= 1;
            let p = draw(&mut rng, &scene, cfg);
            let l = tap_of_range(total_range(&scene, p), width);
            let ok = match tap {
                None => l <= cfg.ofdm.num_taps && !taps.contains(&l),
                Some(t) => l == t,
            };
            if ok && separated(&placed, p) {
                tap = Some(l);
                placed.push(p);
                members += 1;
            }
        }
        if let Some(t) = tap {
            taps.push(t);
        }
    }
    for p in placed {
        scene.add_target(p, cfg.scene.target_pathloss)?;
    }
    Ok(scene)
}
