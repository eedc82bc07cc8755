use super::config::TieBreak;
use crate::model::{LabelMap, VoteGrid, UNLABELED};

/// Output of majority resolution for one frame.
#[derive(Clone, Debug, PartialEq)]
pub struct Resolution {
    pub labels: LabelMap,
    /// Pixels without any vote, filled from `fallback`.
    pub fallback_pixels: usize,
    /// Pixels whose top count was shared by several classes.
    pub tie_pixels: usize,
}

/// Per-pixel argmax of the weighted votes.
///
/// Ties go to `preferred[p]` when it is among the tied classes and the
/// policy is [`TieBreak::NearerKeyframe`], otherwise to the lowest class id.
/// Pixels with no votes at all take `fallback[p]`.
pub fn resolve_majority(
    votes: &VoteGrid,
    tie_break: TieBreak,
    preferred: Option<&[u8]>,
    fallback: &[u8],
    frame_index: usize,
) -> Resolution {
    let (w, h) = votes.dims();
    let mut data = vec![UNLABELED; w * h];
    let mut fallback_pixels = 0;
    let mut tie_pixels = 0;
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let counts = votes.pixel(x, y);
            let max = counts.iter().copied().fold(0.0f64, f64::max);
            if max <= 0.0 {
                data[i] = fallback[i];
                fallback_pixels += 1;
                continue;
            }
            let mut first = None;
            let mut tied = 0;
            for (c, &v) in counts.iter().enumerate() {
                if v == max {
                    tied += 1;
                    first.get_or_insert(c);
                }
            }
            let mut winner = first.unwrap() as u8;
            if tied > 1 {
                tie_pixels += 1;
                if tie_break == TieBreak::NearerKeyframe {
                    if let Some(p) = preferred.map(|p| p[i]) {
                        if (p as usize) < counts.len() && counts[p as usize] == max {
                            winner = p;
                        }
                    }
                }
            }
            data[i] = winner;
        }
    }
    Resolution {
        labels: LabelMap::from_vec(w, h, frame_index, data).expect("sized above"),
        fallback_pixels,
        tie_pixels,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_pixel(counts: &[f64]) -> VoteGrid {
        VoteGrid::from_vec(1, 1, counts.len(), counts.to_vec()).unwrap()
    }

    #[test]
    fn strict_majority() {
        let r = resolve_majority(&one_pixel(&[4.0, 2.0]), TieBreak::NearerKeyframe, Some(&[1]), &[1], 0);
        assert_eq!(r.labels.get(0, 0), 0);
        assert_eq!((r.tie_pixels, r.fallback_pixels), (0, 0));
    }

    #[test]
    fn tie_prefers_nearer_keyframe_class() {
        let votes = one_pixel(&[3.0, 3.0]);
        let r = resolve_majority(&votes, TieBreak::NearerKeyframe, Some(&[1]), &[0], 0);
        assert_eq!(r.labels.get(0, 0), 1);
        assert_eq!(r.tie_pixels, 1);
        let r = resolve_majority(&votes, TieBreak::LowestId, Some(&[1]), &[0], 0);
        assert_eq!(r.labels.get(0, 0), 0);
    }

    #[test]
    fn tie_ignores_preference_outside_tied_set() {
        let votes = one_pixel(&[1.0, 3.0, 3.0]);
        let r = resolve_majority(&votes, TieBreak::NearerKeyframe, Some(&[0]), &[0], 0);
        assert_eq!(r.labels.get(0, 0), 1);
        let r = resolve_majority(&votes, TieBreak::NearerKeyframe, Some(&[UNLABELED]), &[0], 0);
        assert_eq!(r.labels.get(0, 0), 1);
    }

    #[test]
    fn zero_votes_use_fallback() {
        let r = resolve_majority(&one_pixel(&[0.0, 0.0, 0.0]), TieBreak::NearerKeyframe, None, &[2], 7);
        assert_eq!(r.labels.get(0, 0), 2);
        assert_eq!(r.labels.frame_index, 7);
        assert_eq!(r.fallback_pixels, 1);
    }
}
