//! Procedural part-labeled chairs and the evaluation protocols run on them.

mod chair;
mod corpus;
mod eval;

pub use chair::{
    generate_chair, Armrests, BackStyle, ChairParams, LegStyle, SeatShape, BACK_HEIGHT, BARS,
    ENVELOPE_MAX, ENVELOPE_MIN, LEG_THICKNESS, SEAT_HALF_WIDTH, SEAT_THICKNESS, SEAT_TOP,
};
pub use corpus::{read_corpus, write_corpus, CorpusEntry, MANIFEST_FILE};
pub use eval::{
    grid_cases, run_blend_eval, self_cases, shuffled_ground_truth, CasePick, EvalCase, EvalReport,
};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Draws one chair uniformly over styles and documented ranges.
pub fn random_params(seed: u64) -> ChairParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let leg_style = LegStyle::ALL[rng.gen_range(0..4)];
    let back_style = match rng.gen_range(0..3) {
        0 => BackStyle::SolidPanel,
        1 => BackStyle::NBars(rng.gen_range(BARS.0..=BARS.1)),
        _ => BackStyle::RoundTopPanel,
    };
    let seat_shape = if rng.gen_bool(0.5) {
        SeatShape::Square
    } else {
        SeatShape::Round
    };
    let armrests = [Armrests::None, Armrests::Box, Armrests::Loop][rng.gen_range(0..3)];
    ChairParams {
        leg_style,
        leg_thickness: rng.gen_range(LEG_THICKNESS.0..=LEG_THICKNESS.1),
        back_style,
        back_height: rng.gen_range(BACK_HEIGHT.0..=BACK_HEIGHT.1),
        seat_shape,
        seat_thickness: rng.gen_range(SEAT_THICKNESS.0..=SEAT_THICKNESS.1),
        armrests,
        seed,
    }
}

/// `n` random chairs; chair `i` is drawn from the `i`-th seed of a stream
/// started at `seed`.
pub fn random_corpus(n: usize, seed: u64) -> Result<Vec<CorpusEntry>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params: Vec<ChairParams> = (0..n).map(|_| random_params(rng.next_u64())).collect();
    params
        .into_par_iter()
        .enumerate()
        .map(|(i, p)| {
            Ok(CorpusEntry {
                id: i as u32,
                name: format!("chair_{i:04}"),
                mesh: generate_chair(&p)?,
                params: p,
            })
        })
        .collect()
}

/// `n` leg variants cycling through the styles, with thicknesses spread
/// over the allowed range.
pub fn default_leg_variants(n: usize) -> Vec<ChairParams> {
    let levels = n.div_ceil(LegStyle::ALL.len()).max(1);
    (0..n)
        .map(|k| {
            let t = (k / LegStyle::ALL.len()) as f64;
            ChairParams {
                leg_style: LegStyle::ALL[k % LegStyle::ALL.len()],
                leg_thickness: LEG_THICKNESS.0
                    + (LEG_THICKNESS.1 - LEG_THICKNESS.0) * (t + 0.5) / levels as f64,
                ..ChairParams::default()
            }
        })
        .collect()
}

/// `n` backrest variants cycling through solid, 2 to 6 bars and round
/// top, with heights spread over the allowed range.
pub fn default_back_variants(n: usize) -> Vec<ChairParams> {
    let mut styles = vec![BackStyle::SolidPanel];
    styles.extend((BARS.0..=BARS.1).map(BackStyle::NBars));
    styles.push(BackStyle::RoundTopPanel);
    let levels = n.div_ceil(styles.len()).max(1);
    (0..n)
        .map(|k| {
            let t = (k / styles.len()) as f64;
            ChairParams {
                back_style: styles[k % styles.len()],
                back_height: BACK_HEIGHT.0
                    + (BACK_HEIGHT.1 - BACK_HEIGHT.0) * (t + 0.5) / levels as f64,
                ..ChairParams::default()
            }
        })
        .collect()
}

/// The `L×B` leg/backrest grid: shape `(i, j)` takes its legs from
/// `leg_styles[i]`, its backrest from `back_styles[j]` and everything else
/// from `base`. Its id is `i·B + j`.
pub fn generate_grid(
    leg_styles: &[ChairParams],
    back_styles: &[ChairParams],
    base: &ChairParams,
) -> Result<Vec<CorpusEntry>> {
    let (l, b) = (leg_styles.len(), back_styles.len());
    if l < 2 || b < 2 {
        return Err(Error::Param(format!(
            "grid needs at least 2x2 variants, got {l}x{b}"
        )));
    }
    let cells: Vec<(usize, usize)> = (0..l).flat_map(|i| (0..b).map(move |j| (i, j))).collect();
    cells
        .into_par_iter()
        .map(|(i, j)| {
            let p = ChairParams {
                leg_style: leg_styles[i].leg_style,
                leg_thickness: leg_styles[i].leg_thickness,
                back_style: back_styles[j].back_style,
                back_height: back_styles[j].back_height,
                ..base.clone()
            };
            Ok(CorpusEntry {
                id: grid_id(i, j, b),
                name: format!("grid_{i:02}_{j:02}"),
                mesh: generate_chair(&p)?,
                params: p,
            })
        })
        .collect()
}

pub fn grid_id(i: usize, j: usize, backs: usize) -> u32 {
    (i * backs + j) as u32
}

/// Default `L×B` grid built from [`default_leg_variants`] and
/// [`default_back_variants`] over the default base chair.
pub fn default_grid(legs: usize, backs: usize) -> Result<Vec<CorpusEntry>> {
    generate_grid(
        &default_leg_variants(legs),
        &default_back_variants(backs),
        &ChairParams::default(),
    )
}
