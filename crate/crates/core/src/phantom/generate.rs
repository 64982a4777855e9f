use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{burn_crosses, deepest_column_endpoints, PhantomSpec, Probe, Sample};
use crate::preproc::fov_mask;
use crate::{gaussian_blur, Error, Image, Mask, Result};

/// Blur applied to the noise-free intensity map so region borders are soft.
const STRUCTURE_BLUR: f64 = 3.0;

/// Deterministic frame for `(spec, seed)`.
///
/// Toggling `draw_crosses` leaves every other pixel unchanged, so a frame
/// with calipers can be paired with its clean twin.
pub fn generate_sample(spec: &PhantomSpec, seed: u64) -> Result<Sample> {
    if spec.depth_gated {
        return generate_depth_gated_sample(spec, seed).map(|(s, _)| s);
    }
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scene = Scene::draw(spec, &mut rng);
    let (rows, cols) = (spec.rows, spec.cols);
    let apex = spec.apex();
    let mut mean = Image::new(rows, cols);
    let mut mask = Mask::new(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            let (depth, lateral) = match apex {
                None => (r as f64, c as f64),
                Some(a) => {
                    let (dy, dx) = (r as f64 - a.row, c as f64 - a.col);
                    (dy.hypot(dx), dx.atan2(dy) * scene.pleura_depth)
                }
            };
            let (value, fluid) = scene.intensity(spec, depth, lateral);
            mean.set(r, c, value as f32);
            mask.set(r, c, fluid);
        }
    }
    finish(spec, seed, mean, mask, &mut rng)
}

/// Depth-gated frame plus the mask of its unlabelled shallow decoy.
pub fn generate_depth_gated_sample(spec: &PhantomSpec, seed: u64) -> Result<(Sample, Mask)> {
    if !spec.depth_gated {
        return Err(Error::config(
            "depth-gated generation needs depth_gated = true",
        ));
    }
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (rows, cols) = (spec.rows, spec.cols);
    let t_max = draw_int(&mut rng, spec.thickness) as f64;
    let extent = draw(&mut rng, spec.lateral_extent);
    let amp = draw(&mut rng, spec.waviness);
    let profile = Profile::draw(&mut rng, t_max, extent / 2.0, amp);
    let bump = draw(&mut rng, spec.waviness) / 2.0;
    let bump_len = draw(&mut rng, (24.0, 48.0));
    let bump_phase = draw(&mut rng, (0.0, TAU));
    let height = (t_max + 2.0 * bump).ceil() as usize + 1;
    let gate = spec.gate();
    let half = (extent / 2.0).ceil() as usize;
    let (lo_c, hi_c) = (
        spec.side_margin + half + 2,
        cols - spec.side_margin - half - 2,
    );
    let decoy_top = draw_int(
        &mut rng,
        (spec.edge_margin, gate - spec.gate_margin - height),
    );
    let target_top = draw_int(
        &mut rng,
        (gate + spec.gate_margin, rows - spec.edge_margin - height),
    );
    let decoy_col = draw_int(&mut rng, (lo_c, hi_c));
    let target_col = draw_int(&mut rng, (lo_c, hi_c));

    // Both regions share one integer-valued shape, only the anchor differs.
    let inside = |r: usize, c: usize, top: usize, col: usize| {
        let off = c as f64 - col as f64;
        let t = profile.thickness(off).round();
        if t <= 0.0 {
            return false;
        }
        let shift =
            ((t_max - t) / 2.0 + bump * ((TAU * off / bump_len + bump_phase).sin() + 1.0)).round();
        let start = top as f64 + shift;
        let r = r as f64;
        r >= start && r < start + t
    };
    let target = Mask::from_fn(rows, cols, |r, c| inside(r, c, target_top, target_col));
    let decoy = Mask::from_fn(rows, cols, |r, c| inside(r, c, decoy_top, decoy_col));
    let ints = &spec.intensities;
    let mean = Image::from_fn(rows, cols, |r, c| {
        if target.get(r, c) || decoy.get(r, c) {
            ints.effusion as f32
        } else {
            ints.tissue as f32
        }
    });
    let sample = finish(spec, seed, mean, target, &mut rng)?;
    let fov = fov_mask(rows, cols, &spec.fov())?;
    Ok((sample, decoy.and(&fov)))
}

/// `n` frames with seeds `seed + i` and ids `0000`, `0001`, ...
pub fn generate_dataset(n: usize, spec: &PhantomSpec, seed: u64) -> Result<Vec<Sample>> {
    if n == 0 {
        return Err(Error::config("dataset size must be at least 1"));
    }
    spec.validate()?;
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut s = generate_sample(spec, seed.wrapping_add(i as u64))?;
            s.id = format!("{i:04}");
            Ok(s)
        })
        .collect()
}

/// Like [`generate_dataset`] but insists on a depth-gated spec.
pub fn generate_depth_gated_dataset(
    n: usize,
    spec: &PhantomSpec,
    seed: u64,
) -> Result<Vec<Sample>> {
    if !spec.depth_gated {
        return Err(Error::config(
            "depth-gated dataset needs depth_gated = true",
        ));
    }
    generate_dataset(n, spec, seed)
}

/// Soft structure, speckle, FOV clipping and calipers.
fn finish(
    spec: &PhantomSpec,
    seed: u64,
    mean: Image,
    mask: Mask,
    rng: &mut ChaCha8Rng,
) -> Result<Sample> {
    let (rows, cols) = (spec.rows, spec.cols);
    let mut img = gaussian_blur(&mean, STRUCTURE_BLUR);
    for v in img.data_mut() {
        let u: f64 = rng.random_range(-1.0..1.0);
        *v = (*v as f64 * (1.0 + spec.speckle * u)) as f32;
    }
    let mut img = gaussian_blur(&img, spec.speckle_blur);
    let fov = fov_mask(rows, cols, &spec.fov())?;
    for r in 0..rows {
        for c in 0..cols {
            let v = if fov.get(r, c) {
                img.get(r, c).clamp(0.0, 1.0)
            } else {
                0.0
            };
            img.set(r, c, v);
        }
    }
    let mask = mask.and(&fov);
    let crosses: Vec<(usize, usize)> = deepest_column_endpoints(&mask)
        .map(|e| e.to_vec())
        .unwrap_or_default();
    if spec.draw_crosses {
        burn_crosses(&mut img, &crosses, &spec.template());
    }
    Ok(Sample {
        id: format!("{seed:04}"),
        image: img,
        mask,
        probe: spec.probe,
        apex: spec.apex(),
        crosses,
    })
}

fn draw(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    let u: f64 = rng.random();
    lo + (hi - lo) * u
}

fn draw_int(rng: &mut ChaCha8Rng, (lo, hi): (usize, usize)) -> usize {
    let u: f64 = rng.random();
    (lo + (u * (hi - lo + 1) as f64) as usize).min(hi)
}

/// Lens-shaped thickness profile with an undulating boundary.
struct Profile {
    t_max: f64,
    half: f64,
    amp: f64,
    len: f64,
    phase: f64,
}

impl Profile {
    fn draw(rng: &mut ChaCha8Rng, t_max: f64, half: f64, amp: f64) -> Self {
        let len = draw(rng, (16.0, 40.0));
        let phase = draw(rng, (0.0, TAU));
        Self {
            t_max,
            half,
            amp,
            len,
            phase,
        }
    }

    /// Thickness at lateral offset `off` from the centre; exactly `t_max` at 0.
    fn thickness(&self, off: f64) -> f64 {
        let x = off / self.half;
        if x.abs() >= 1.0 {
            return 0.0;
        }
        let w = 1.0 - x * x;
        let wave = (TAU * off / self.len + self.phase).sin() - self.phase.sin();
        (self.t_max * w.sqrt() + self.amp * w * wave).clamp(0.0, self.t_max)
    }
}

struct Rib {
    lateral: f64,
    half_width: f64,
    top: f64,
}

/// Geometry of one layered frame in (depth, lateral) coordinates; lateral is
/// the column for linear probes and arc length at the pleura for curved ones.
struct Scene {
    discrete: bool,
    pleura_depth: f64,
    pleura_amp: f64,
    pleura_len: f64,
    pleura_phase: f64,
    center: f64,
    profile: Profile,
    fascia: Vec<(f64, f64)>,
    ribs: Vec<Rib>,
}

const SHADOW_SPREAD: f64 = 0.08;

impl Scene {
    fn draw(spec: &PhantomSpec, rng: &mut ChaCha8Rng) -> Self {
        let discrete = spec.probe == Probe::Linear;
        let pleura_depth = draw(rng, spec.pleura_depth);
        let t_max = draw_int(rng, spec.thickness) as f64;
        let extent = draw(rng, spec.lateral_extent);
        let amp = draw(rng, spec.waviness);
        let pleura_len = draw(rng, (40.0, 90.0));
        let pleura_phase = draw(rng, (0.0, TAU));
        let profile = Profile::draw(rng, t_max, extent / 2.0, amp);
        let (lat_lo, lat_hi) = match spec.probe {
            Probe::Linear => (
                spec.side_margin as f64,
                (spec.cols - spec.side_margin) as f64 - 1.0,
            ),
            Probe::Curved => {
                let reach = spec.cone_half_angle_deg.to_radians() * pleura_depth;
                (-reach, reach)
            }
        };
        let margin = extent / 2.0 + if discrete { 2.0 } else { 4.0 };
        let mut center = draw(rng, (lat_lo + margin, lat_hi - margin));
        if discrete {
            center = center.round();
        }
        let n_fascia = draw_int(rng, (1, 2));
        let fascia = (0..n_fascia)
            .map(|_| {
                (
                    draw(rng, (6.0, (pleura_depth - 8.0).max(6.0))),
                    draw(rng, (0.0, TAU)),
                )
            })
            .collect();
        let n_ribs = draw_int(rng, spec.rib_shadows);
        let depth_span = (spec.rows as f64 + spec.apex_offset).max(spec.rows as f64);
        let mut ribs = Vec::new();
        for _ in 0..n_ribs {
            let half_width = draw(rng, (4.0, 7.0));
            let clear = extent / 2.0 + half_width + SHADOW_SPREAD * depth_span + 4.0;
            // a few tries; frames without room simply get fewer shadows
            for _ in 0..8 {
                let lateral = draw(rng, (lat_lo, lat_hi));
                let apart = ribs
                    .iter()
                    .all(|r: &Rib| (r.lateral - lateral).abs() > r.half_width + half_width + 6.0);
                if (lateral - center).abs() > clear && apart {
                    ribs.push(Rib {
                        lateral,
                        half_width,
                        top: (pleura_depth - 10.0).max(3.0),
                    });
                    break;
                }
            }
        }
        Self {
            discrete,
            pleura_depth,
            pleura_amp: amp / 2.0,
            pleura_len,
            pleura_phase,
            center,
            profile,
            fascia,
            ribs,
        }
    }

    fn pleura(&self, lateral: f64) -> f64 {
        let p = self.pleura_depth
            + self.pleura_amp * (TAU * lateral / self.pleura_len + self.pleura_phase).sin();
        if self.discrete {
            p.round()
        } else {
            p
        }
    }

    fn thickness(&self, lateral: f64) -> f64 {
        let t = self.profile.thickness(lateral - self.center);
        if self.discrete {
            t.round()
        } else {
            t
        }
    }

    /// Mean intensity and effusion membership at a point.
    fn intensity(&self, spec: &PhantomSpec, depth: f64, lateral: f64) -> (f64, bool) {
        let ints = &spec.intensities;
        let p = self.pleura(lateral);
        let t = self.thickness(lateral);
        let top = p + 2.0;
        let bottom = top + t;
        let mut fluid = false;
        let mut value = if depth < p - 1.5 {
            let on_fascia = self
                .fascia
                .iter()
                .any(|&(f, ph)| (depth - f - (TAU * lateral / 60.0 + ph).sin()).abs() < 0.75);
            if on_fascia {
                ints.fascia
            } else {
                ints.tissue
            }
        } else if depth < top {
            ints.pleura
        } else if t > 0.0 && depth < bottom {
            fluid = true;
            ints.effusion
        } else if t > 0.0 && depth < bottom + 2.0 {
            ints.pleura
        } else if t <= 0.0
            && (1..=2).any(|k| (depth - p - k as f64 * self.pleura_depth).abs() < 1.0)
        {
            ints.reverberation
        } else {
            ints.lung
        };
        for rib in &self.ribs {
            let off = (lateral - rib.lateral).abs();
            if depth >= rib.top && depth < rib.top + 3.0 && off < rib.half_width {
                value = ints.pleura;
            } else if depth >= rib.top + 3.0
                && off < rib.half_width + SHADOW_SPREAD * (depth - rib.top - 3.0)
            {
                value *= ints.shadow;
            }
        }
        (value, fluid)
    }
}
