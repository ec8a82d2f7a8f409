//! Labeled synthetic corpora: each virtual user performs one gesture per hug.

use hug_core::rng::{derive_seed, index_below};
use hug_core::{GestureClass, GestureInterval, HugRecording};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::signal::{SignalModel, Stroke, Timeline};
use crate::recording::StoredRecording;

/// Fraction of users who also pat while squeezing.
pub const COMBINED_FRACTION: (usize, usize) = (7, 32);

/// Seconds of each phase of a generated hug, as ranges.
#[derive(Debug, Clone, PartialEq)]
pub struct HugTiming {
    pub pre_rest: (f64, f64),
    pub lead_hold: (f64, f64),
    pub gesture: (f64, f64),
    pub tail_hold: (f64, f64),
    pub post_release: f64,
    /// Length of the extra pat performed during a squeeze.
    pub combined_pat: (f64, f64),
}

impl Default for HugTiming {
    fn default() -> Self {
        Self {
            pre_rest: (1.0, 2.0),
            lead_hold: (4.0, 5.5),
            gesture: (3.0, 6.0),
            tail_hold: (1.5, 3.0),
            post_release: 1.0,
            combined_pat: (1.0, 1.5),
        }
    }
}

fn draw(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    rng.random_range(lo..=hi)
}

/// `k` distinct users out of `n`, chosen with a partial shuffle.
fn pick_users(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<bool> {
    let mut order: Vec<usize> = (0..n).collect();
    for i in 0..k.min(n) {
        let j = i + index_below(rng, n - i);
        order.swap(i, j);
    }
    let mut chosen = vec![false; n];
    for &u in &order[..k.min(n)] {
        chosen[u] = true;
    }
    chosen
}

/// Gesture performed in hug `h` of user `u`. Rotating by user keeps the
/// classes balanced whenever `hugs_per_user` is a multiple of four.
pub fn planned_gesture(user: usize, hug: usize) -> GestureClass {
    GestureClass::ALL[(hug + user) % GestureClass::COUNT]
}

/// Annotations for a set of strokes. Holds are the background and are not
/// annotated; a rub or pat performed during a squeeze counts as part of the
/// squeeze.
pub fn annotate(strokes: &[Stroke]) -> Vec<GestureInterval> {
    let squeezes: Vec<&Stroke> = strokes.iter().filter(|s| s.label == GestureClass::Squeeze).collect();
    let mut out: Vec<GestureInterval> = strokes
        .iter()
        .filter(|s| s.label != GestureClass::Hold)
        .filter(|s| s.label == GestureClass::Squeeze || squeezes.iter().all(|q| !(s.t_start < q.t_end() && q.t_start < s.t_end())))
        .map(|s| GestureInterval::new(s.label, s.t_start, s.t_end()))
        .collect();
    out.sort_by(|a, b| a.t_start.total_cmp(&b.t_start));
    out
}

pub fn generate_corpus(n_users: usize, hugs_per_user: usize, model: &SignalModel, seed: u64) -> Vec<StoredRecording> {
    generate_corpus_with(n_users, hugs_per_user, model, &HugTiming::default(), seed)
}

pub fn generate_corpus_with(
    n_users: usize,
    hugs_per_user: usize,
    model: &SignalModel,
    timing: &HugTiming,
    seed: u64,
) -> Vec<StoredRecording> {
    let mut pick_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, u64::MAX));
    let (num, den) = COMBINED_FRACTION;
    let n_combined = (n_users * num + den / 2) / den;
    let combines = pick_users(n_users, n_combined, &mut pick_rng);

    let mut out = Vec::with_capacity(n_users * hugs_per_user);
    for u in 0..n_users {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, u as u64));
        let user = model.draw_user(&mut rng);
        for h in 0..hugs_per_user {
            let label = planned_gesture(u, h);
            let contact_at = draw(&mut rng, timing.pre_rest);
            let g_start = contact_at + draw(&mut rng, timing.lead_hold);
            let g_dur = draw(&mut rng, timing.gesture);
            let release_at = g_start + g_dur + draw(&mut rng, timing.tail_hold);
            let intensity = model.draw_intensity(&mut rng);
            let mut strokes = vec![Stroke { label, t_start: g_start, duration: g_dur, intensity }];
            if label == GestureClass::Squeeze && combines[u] {
                let d = draw(&mut rng, timing.combined_pat).min(g_dur);
                let start = g_start + rng.random_range(0.0..=(g_dur - d));
                let intensity = model.draw_intensity(&mut rng);
                strokes.push(Stroke { label: GestureClass::Pat, t_start: start, duration: d, intensity });
            }
            let timeline = Timeline { contact_at, release_at, end: release_at + timing.post_release, strokes };
            let samples = model.render(&user, &timeline, &mut rng);
            let annotations = annotate(&timeline.strokes);
            let participant = format!("u{u:02}");
            out.push(StoredRecording {
                id: format!("{participant}_h{h:02}"),
                hug_id: format!("h{h:02}"),
                recording: HugRecording {
                    samples,
                    annotations,
                    hug_start: contact_at,
                    hug_end: release_at,
                    participant_id: participant,
                },
            });
        }
    }
    out
}
