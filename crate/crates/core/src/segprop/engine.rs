use super::config::{PropagationConfig, TieBreak, UpdateMode};
use super::provider::{VoteContext, VoteProvider};
use super::report::{ChannelTotals, FitFailure, FrameReport, IterationStats, PropagationReport};
use super::resolve::resolve_majority;
use super::votes::{add_pull_votes, add_push_votes, cast_homography_votes, fit_region_homographies};
use crate::error::{Error, Result};
use crate::flow::{chain::chain_or_identity, FlowSource};
use crate::model::{LabelMap, VoteGrid, UNLABELED};
use crate::par;

struct RegisteredProvider {
    provider: Box<dyn VoteProvider>,
    weight: Option<f64>,
}

/// Labels for the interior frames of one keyframe interval.
#[derive(Clone, Debug)]
pub struct PairOutput {
    /// Frames `i+1 .. j`, in order.
    pub labels: Vec<LabelMap>,
    pub frames: Vec<FrameReport>,
    pub fit_failures: Vec<FitFailure>,
    pub provider_failures: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct SequenceOutput {
    /// One label map per frame, index = frame number.
    pub labels: Vec<LabelMap>,
    pub report: PropagationReport,
}

/// Propagation engine: configuration plus registered vote providers.
pub struct Propagator {
    config: PropagationConfig,
    providers: Vec<RegisteredProvider>,
}

struct FrameVotes {
    labels: LabelMap,
    report: FrameReport,
    provider_failures: Vec<String>,
}

impl Propagator {
    pub fn new(config: PropagationConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            providers: Vec::new(),
        })
    }

    pub fn config(&self) -> &PropagationConfig {
        &self.config
    }

    /// Adds a provider weighted by the configured external-channel weight.
    pub fn register_vote_provider(&mut self, provider: Box<dyn VoteProvider>) -> &mut Self {
        self.providers.push(RegisteredProvider { provider, weight: None });
        self
    }

    /// Adds a provider with its own weight.
    pub fn register_weighted_provider(&mut self, provider: Box<dyn VoteProvider>, weight: f64) -> &mut Self {
        self.providers.push(RegisteredProvider {
            provider,
            weight: Some(weight),
        });
        self
    }

    pub fn with_provider(mut self, provider: Box<dyn VoteProvider>) -> Self {
        self.register_vote_provider(provider);
        self
    }

    fn classes(&self) -> usize {
        self.config.num_classes
    }

    fn check_label(&self, label: &LabelMap, dims: (usize, usize)) -> Result<()> {
        if label.dims() != dims {
            return Err(Error::DimensionMismatch {
                expected: dims,
                actual: label.dims(),
            });
        }
        if let Some(&c) = label
            .as_slice()
            .iter()
            .find(|&&c| c != UNLABELED && c as usize >= self.classes())
        {
            return Err(Error::Invalid(format!(
                "frame {} has class {c} but only {} classes are configured",
                label.frame_index,
                self.classes()
            )));
        }
        Ok(())
    }

    fn check_keyframe(&self, label: &LabelMap, dims: (usize, usize)) -> Result<()> {
        self.check_label(label, dims)?;
        let missing = label.unlabeled_count();
        if missing > 0 {
            return Err(Error::Invalid(format!(
                "keyframe {} has {missing} unlabeled pixel(s)",
                label.frame_index
            )));
        }
        Ok(())
    }

    /// Merges every provider's votes; failures are logged and returned.
    fn add_provider_votes(
        &self,
        grid: &mut VoteGrid,
        ctx: &VoteContext<'_>,
        totals: &mut ChannelTotals,
    ) -> Vec<String> {
        let mut failures = Vec::new();
        for p in &self.providers {
            let weight = p.weight.unwrap_or(self.config.weights.external);
            let result = p.provider.cast(ctx).map_err(|e| e.to_string()).and_then(|g| {
                let mass = g.total() * weight;
                grid.merge(&g, weight)
                    .map(|_| mass)
                    .map_err(|e| format!("{}: {e}", p.provider.name()))
            });
            match result {
                Ok(mass) => totals.external += mass,
                Err(msg) => {
                    log::warn!("vote provider skipped for frame {}: {msg}", ctx.frame);
                    failures.push(format!("frame {}: {msg}", ctx.frame));
                }
            }
        }
        failures
    }

    /// Initial voting for every frame strictly between two keyframes.
    pub fn propagate_pair(&self, label_i: &LabelMap, label_j: &LabelMap, flows: &dyn FlowSource) -> Result<PairOutput> {
        let (i, j) = (label_i.frame_index, label_j.frame_index);
        if i >= j {
            return Err(Error::Invalid(format!("keyframes must satisfy i < j, got {i} and {j}")));
        }
        let dims = label_i.dims();
        self.check_keyframe(label_i, dims)?;
        self.check_keyframe(label_j, dims)?;
        let cfg = &self.config;

        let (fits_i, fits_j) = if cfg.homography && cfg.weights.homography > 0.0 {
            let i_to_j = chain_or_identity(flows, i, j, dims, &cfg.chain)?;
            let j_to_i = chain_or_identity(flows, j, i, dims, &cfg.chain)?;
            (
                Some(fit_region_homographies(label_i, &i_to_j, cfg)?),
                Some(fit_region_homographies(label_j, &j_to_i, cfg)?),
            )
        } else {
            (None, None)
        };

        let frames: Vec<usize> = (i + 1..j).collect();
        let results = par::map_slice(&frames, |&k| -> Result<FrameVotes> {
            let (w, h) = dims;
            let mut grid = VoteGrid::new(w, h, self.classes());
            let mut flow_grid = VoteGrid::new(w, h, self.classes());
            let pull_i = chain_or_identity(flows, k, i, dims, &cfg.chain)?;
            let pull_j = chain_or_identity(flows, k, j, dims, &cfg.chain)?;
            let push_i = chain_or_identity(flows, i, k, dims, &cfg.chain)?;
            let push_j = chain_or_identity(flows, j, k, dims, &cfg.chain)?;
            add_pull_votes(&mut flow_grid, label_i, &pull_i, 1.0)?;
            add_pull_votes(&mut flow_grid, label_j, &pull_j, 1.0)?;
            add_push_votes(&mut flow_grid, label_i, &push_i, 1.0)?;
            add_push_votes(&mut flow_grid, label_j, &push_j, 1.0)?;
            let mut totals = ChannelTotals {
                flow: flow_grid.total() * cfg.weights.flow,
                ..Default::default()
            };
            grid.merge(&flow_grid, cfg.weights.flow)?;

            if let (Some(fi), Some(fj)) = (&fits_i, &fits_j) {
                let hv = cast_homography_votes(fi, fj, k, dims, self.classes());
                totals.homography = hv.total() * cfg.weights.homography;
                grid.merge(&hv, cfg.weights.homography)?;
            }

            let ctx = VoteContext {
                frame: k,
                keyframe_i: i,
                keyframe_j: j,
                label_i,
                label_j,
                width: w,
                height: h,
                classes: self.classes(),
            };
            let provider_failures = self.add_provider_votes(&mut grid, &ctx, &mut totals);

            let (near_label, near_pull) = if k - i <= j - k {
                (label_i, &pull_i)
            } else {
                (label_j, &pull_j)
            };
            let preferred: Vec<u8> = (0..h)
                .flat_map(|y| (0..w).map(move |x| (x, y)))
                .map(|(x, y)| {
                    near_pull
                        .landing_pixel(x, y)
                        .map_or(UNLABELED, |(px, py)| near_label.get(px, py))
                })
                .collect();
            let res = resolve_majority(&grid, cfg.tie_break, Some(&preferred), near_label.as_slice(), k);
            Ok(FrameVotes {
                report: FrameReport {
                    frame: k,
                    keyframes: (i, j),
                    votes: totals,
                    valid_pull_pixels: pull_i.valid_count() + pull_j.valid_count(),
                    valid_push_pixels: push_i.valid_count() + push_j.valid_count(),
                    fallback_pixels: res.fallback_pixels,
                    tie_pixels: res.tie_pixels,
                },
                labels: res.labels,
                provider_failures,
            })
        });

        let mut out = PairOutput {
            labels: Vec::with_capacity(frames.len()),
            frames: Vec::with_capacity(frames.len()),
            fit_failures: Vec::new(),
            provider_failures: Vec::new(),
        };
        for fits in [fits_i, fits_j].into_iter().flatten() {
            out.fit_failures.extend(fits.failures);
        }
        for r in results {
            let r = r?;
            out.labels.push(r.labels);
            out.frames.push(r.report);
            out.provider_failures.extend(r.provider_failures);
        }
        Ok(out)
    }

    /// One-sided voting for a frame outside the keyframe range.
    fn propagate_edge(&self, key: &LabelMap, k: usize, flows: &dyn FlowSource) -> Result<FrameVotes> {
        let cfg = &self.config;
        let dims = key.dims();
        let (w, h) = dims;
        let kf = key.frame_index;
        let mut grid = VoteGrid::new(w, h, self.classes());
        let pull = chain_or_identity(flows, k, kf, dims, &cfg.chain)?;
        let push = chain_or_identity(flows, kf, k, dims, &cfg.chain)?;
        add_pull_votes(&mut grid, key, &pull, cfg.weights.flow)?;
        add_push_votes(&mut grid, key, &push, cfg.weights.flow)?;
        let mut totals = ChannelTotals {
            flow: grid.total(),
            ..Default::default()
        };
        let ctx = VoteContext {
            frame: k,
            keyframe_i: kf,
            keyframe_j: kf,
            label_i: key,
            label_j: key,
            width: w,
            height: h,
            classes: self.classes(),
        };
        let provider_failures = self.add_provider_votes(&mut grid, &ctx, &mut totals);
        let preferred: Vec<u8> = (0..h)
            .flat_map(|y| (0..w).map(move |x| (x, y)))
            .map(|(x, y)| pull.landing_pixel(x, y).map_or(UNLABELED, |(px, py)| key.get(px, py)))
            .collect();
        let res = resolve_majority(&grid, cfg.tie_break, Some(&preferred), key.as_slice(), k);
        Ok(FrameVotes {
            report: FrameReport {
                frame: k,
                keyframes: (kf, kf),
                votes: totals,
                valid_pull_pixels: pull.valid_count(),
                valid_push_pixels: push.valid_count(),
                fallback_pixels: res.fallback_pixels,
                tie_pixels: res.tie_pixels,
            },
            labels: res.labels,
            provider_failures,
        })
    }

    /// Votes for frame `k` from its `2f` temporal neighbors in `labels`.
    fn vote_neighborhood(
        &self,
        k: usize,
        labels: &[LabelMap],
        keyframes: &[usize],
        flows: &dyn FlowSource,
    ) -> Result<(LabelMap, usize, usize, Vec<String>)> {
        let cfg = &self.config;
        let n = labels.len();
        let current = &labels[k];
        let dims = current.dims();
        let (w, h) = dims;
        let mut grid = VoteGrid::new(w, h, self.classes());
        let mut totals = ChannelTotals::default();
        let mut fit_failures = 0;
        for d in 1..=cfg.f {
            let before = k.checked_sub(d);
            let after = (k + d < n).then_some(k + d);
            for s in [before, after].into_iter().flatten() {
                let pull = chain_or_identity(flows, k, s, dims, &cfg.chain)?;
                let push = chain_or_identity(flows, s, k, dims, &cfg.chain)?;
                add_pull_votes(&mut grid, &labels[s], &pull, cfg.weights.flow)?;
                add_push_votes(&mut grid, &labels[s], &push, cfg.weights.flow)?;
            }
            if let (Some(a), Some(b), true) = (before, after, cfg.iterate_homography && cfg.weights.homography > 0.0) {
                let a_to_b = chain_or_identity(flows, a, b, dims, &cfg.chain)?;
                let b_to_a = chain_or_identity(flows, b, a, dims, &cfg.chain)?;
                let fa = fit_region_homographies(&labels[a], &a_to_b, cfg)?;
                let fb = fit_region_homographies(&labels[b], &b_to_a, cfg)?;
                fit_failures += fa.failures.len() + fb.failures.len();
                let hv = cast_homography_votes(&fa, &fb, k, dims, self.classes());
                totals.homography += hv.total() * cfg.weights.homography;
                grid.merge(&hv, cfg.weights.homography)?;
            }
        }
        let provider_failures = if self.providers.is_empty() {
            Vec::new()
        } else {
            let left = keyframes
                .iter()
                .rev()
                .find(|&&f| f <= k)
                .or(keyframes.first())
                .copied()
                .unwrap();
            let right = keyframes
                .iter()
                .find(|&&f| f >= k)
                .or(keyframes.last())
                .copied()
                .unwrap();
            let ctx = VoteContext {
                frame: k,
                keyframe_i: left,
                keyframe_j: right,
                label_i: &labels[left],
                label_j: &labels[right],
                width: w,
                height: h,
                classes: self.classes(),
            };
            self.add_provider_votes(&mut grid, &ctx, &mut totals)
        };
        let preferred = (cfg.tie_break == TieBreak::NearerKeyframe).then_some(current.as_slice());
        let res = resolve_majority(&grid, cfg.tie_break, preferred, current.as_slice(), k);
        Ok((res.labels, res.fallback_pixels, fit_failures, provider_failures))
    }

    /// Runs the configured number of neighborhood passes. Keyframes never
    /// change; every other frame is re-voted from its neighbors.
    pub fn iterate(
        &self,
        labels: &mut [LabelMap],
        keyframes: &[usize],
        flows: &dyn FlowSource,
    ) -> Result<(Vec<IterationStats>, Vec<String>)> {
        if labels.is_empty() {
            return Ok((Vec::new(), Vec::new()));
        }
        if keyframes.is_empty() {
            return Err(Error::TooFewKeyframes(0));
        }
        let dims = labels[0].dims();
        for l in labels.iter() {
            self.check_label(l, dims)?;
        }
        let free: Vec<usize> = (0..labels.len())
            .filter(|k| keyframes.binary_search(k).is_err())
            .collect();
        let mut stats = Vec::with_capacity(self.config.iterations);
        let mut provider_failures = Vec::new();
        for iteration in 0..self.config.iterations {
            let mut changed = 0;
            let mut fallback = 0;
            match self.config.update_mode {
                UpdateMode::Parallel => {
                    let prev: &[LabelMap] = labels;
                    let updates = par::map_slice(&free, |&k| self.vote_neighborhood(k, prev, keyframes, flows));
                    let updates: Vec<_> = updates.into_iter().collect::<Result<_>>()?;
                    for (&k, (new, fb, _, pf)) in free.iter().zip(updates) {
                        changed += diff_count(&labels[k], &new);
                        fallback += fb;
                        provider_failures.extend(pf);
                        labels[k] = new;
                    }
                }
                UpdateMode::Sequential => {
                    for &k in &free {
                        let (new, fb, _, pf) = self.vote_neighborhood(k, labels, keyframes, flows)?;
                        changed += diff_count(&labels[k], &new);
                        fallback += fb;
                        provider_failures.extend(pf);
                        labels[k] = new;
                    }
                }
            }
            log::debug!("iteration {iteration}: {changed} pixel(s) changed");
            stats.push(IterationStats {
                iteration,
                changed_pixels: changed,
                fallback_pixels: fallback,
            });
        }
        Ok((stats, provider_failures))
    }

    /// Full pipeline: initial voting between consecutive keyframes (and
    /// one-sided voting beyond the ends), then the iterative passes.
    pub fn propagate_sequence(
        &self,
        keyframe_labels: &[LabelMap],
        frame_count: usize,
        flows: &dyn FlowSource,
    ) -> Result<SequenceOutput> {
        if keyframe_labels.len() < 2 {
            return Err(Error::TooFewKeyframes(keyframe_labels.len()));
        }
        let keyframes: Vec<usize> = keyframe_labels.iter().map(|l| l.frame_index).collect();
        if keyframes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Unsorted(keyframes));
        }
        if let Some(&k) = keyframes.iter().find(|&&k| k >= frame_count) {
            return Err(Error::Invalid(format!(
                "keyframe {k} out of range for {frame_count} frames"
            )));
        }
        let dims = keyframe_labels[0].dims();
        for l in keyframe_labels {
            self.check_keyframe(l, dims)?;
        }

        let mut report = PropagationReport::new(self.config.clone(), keyframes.clone());
        let mut slots: Vec<Option<LabelMap>> = vec![None; frame_count];
        for l in keyframe_labels {
            slots[l.frame_index] = Some(l.clone());
        }
        for pair in keyframe_labels.windows(2) {
            let out = self.propagate_pair(&pair[0], &pair[1], flows)?;
            for l in out.labels {
                let idx = l.frame_index;
                slots[idx] = Some(l);
            }
            report.frames.extend(out.frames);
            report.region_fit_failures.extend(out.fit_failures);
            report.provider_failures.extend(out.provider_failures);
        }

        let first = &keyframe_labels[0];
        let last = &keyframe_labels[keyframe_labels.len() - 1];
        let edges: Vec<(usize, &LabelMap)> = (0..first.frame_index)
            .map(|k| (k, first))
            .chain((last.frame_index + 1..frame_count).map(|k| (k, last)))
            .collect();
        if self.config.extend_edges {
            let results = par::map_slice(&edges, |&(k, key)| self.propagate_edge(key, k, flows));
            for r in results {
                let r = r?;
                report.frames.push(r.report);
                report.provider_failures.extend(r.provider_failures);
                let idx = r.labels.frame_index;
                slots[idx] = Some(r.labels);
            }
        } else {
            for (k, key) in edges {
                let mut copy = key.clone();
                copy.frame_index = k;
                slots[k] = Some(copy);
            }
        }
        report.frames.sort_by_key(|f| f.frame);

        let mut labels: Vec<LabelMap> = slots.into_iter().map(|s| s.expect("every frame filled")).collect();
        let (iterations, failures) = self.iterate(&mut labels, &keyframes, flows)?;
        report.iterations = iterations;
        report.provider_failures.extend(failures);
        Ok(SequenceOutput { labels, report })
    }
}

fn diff_count(a: &LabelMap, b: &LabelMap) -> usize {
    a.as_slice().iter().zip(b.as_slice()).filter(|(x, y)| x != y).count()
}
