use serde::{Deserialize, Serialize};

use crate::model::{Episode, GazeEntity};

/// Knobs for episode segmentation. The defaults reproduce plain run-length
/// segmentation of the raw labels.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentOptions {
    /// Runs shorter than this merge into the preceding episode of the same
    /// detected segment. A short run with no preceding episode stands alone.
    pub min_episode_frames: u64,
    /// Undetected gaps of at most this many frames are bridged: the gap is
    /// absorbed into the span of the episode before it, and episodes on
    /// either side count as adjacent. Zero disables bridging.
    pub max_gap_frames: u64,
}

#[derive(Debug, Clone, Copy)]
struct Run {
    entity: GazeEntity,
    start: u64,
    len: u64,
}

#[derive(Debug, Clone, Copy)]
struct OpenEpisode {
    entity: GazeEntity,
    start: u64,
    end: u64,
    detected: u64,
}

/// Incremental segmenter: feed labels one frame at a time, closed episodes
/// are handed to the sink as soon as they are final.
#[derive(Debug, Clone)]
pub struct EpisodeBuilder {
    opts: SegmentOptions,
    fps: f64,
    next_frame: u64,
    run: Option<Run>,
    current: Option<OpenEpisode>,
    gap: u64,
}

impl EpisodeBuilder {
    pub fn new(fps: f64, start_frame: u64, opts: SegmentOptions) -> Self {
        Self {
            opts,
            fps,
            next_frame: start_frame,
            run: None,
            current: None,
            gap: 0,
        }
    }

    pub fn push(&mut self, label: GazeEntity, sink: &mut impl FnMut(Episode)) {
        let frame = self.next_frame;
        self.next_frame += 1;

        if !label.is_detected() {
            self.close_run(sink);
            self.gap += 1;
            if self.gap > self.opts.max_gap_frames {
                self.emit_current(sink);
            }
            return;
        }

        if self.gap > 0 {
            if let Some(cur) = self.current.as_mut() {
                cur.end = frame;
            }
            self.gap = 0;
        }

        match self.run.as_mut() {
            Some(run) if run.entity == label => run.len += 1,
            _ => {
                self.close_run(sink);
                self.run = Some(Run {
                    entity: label,
                    start: frame,
                    len: 1,
                });
            }
        }
    }

    pub fn finish(mut self, sink: &mut impl FnMut(Episode)) {
        self.close_run(sink);
        self.emit_current(sink);
    }

    fn close_run(&mut self, sink: &mut impl FnMut(Episode)) {
        let Some(run) = self.run.take() else {
            return;
        };
        match self.current.as_mut() {
            Some(cur) if cur.entity == run.entity || run.len < self.opts.min_episode_frames => {
                cur.end = run.start + run.len;
                cur.detected += run.len;
            }
            _ => {
                self.emit_current(sink);
                self.current = Some(OpenEpisode {
                    entity: run.entity,
                    start: run.start,
                    end: run.start + run.len,
                    detected: run.len,
                });
            }
        }
    }

    fn emit_current(&mut self, sink: &mut impl FnMut(Episode)) {
        if let Some(cur) = self.current.take() {
            sink(Episode {
                entity: cur.entity,
                start_frame: cur.start,
                end_frame: cur.end,
                detected_frames: cur.detected,
                duration_s: cur.detected as f64 / self.fps,
            });
        }
    }
}

/// Run-length segmentation of a label sequence starting at frame 0.
///
/// Undetected frames split episodes; with `min_episode_frames > 0`, short
/// runs are folded into the episode before them.
pub fn segment_episodes(labels: &[GazeEntity], fps: f64, min_episode_frames: u64) -> Vec<Episode> {
    segment_episodes_with(
        labels,
        0,
        fps,
        SegmentOptions {
            min_episode_frames,
            ..SegmentOptions::default()
        },
    )
}

/// As [`segment_episodes`], with the first label at `start_frame`.
pub fn segment_episodes_with(
    labels: &[GazeEntity],
    start_frame: u64,
    fps: f64,
    opts: SegmentOptions,
) -> Vec<Episode> {
    let mut out = Vec::new();
    let mut sink = |e| out.push(e);
    let mut builder = EpisodeBuilder::new(fps, start_frame, opts);
    for &label in labels {
        builder.push(label, &mut sink);
    }
    builder.finish(&mut sink);
    out
}
