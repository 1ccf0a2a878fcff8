"""Temporally ordered mini-batches with positive pairs.

A batch concatenates equal-sized blocks from a few videos. Within a block,
anchors are drawn one per equal temporal bin, so the block covers its video
start to finish in strictly increasing frame order; the solvers downstream
rely on that ordering. Each anchor also gets a positive: a frame drawn
uniformly from a window around it, for the coherence loss.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .dataio import DatasetCatalog, FeatureSequence

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Batch:
    """One training batch of anchor/positive frame features.

    Attributes:
        features: B x dim anchor frames, video blocks concatenated in order.
        positive_features: B x dim positive frames, row-aligned with anchors.
        blocks: (video_id, start_row, length) per video block; rows
            start_row .. start_row+length-1 of ``features`` belong to it.
        positions: source frame index of each anchor, strictly increasing
            within each block.
        positive_positions: source frame index of each positive.
    """

    features: np.ndarray
    positive_features: np.ndarray
    blocks: list[tuple[str, int, int]]
    positions: np.ndarray
    positive_positions: np.ndarray

    @property
    def size(self) -> int:
        return self.features.shape[0]


def sample_ordered(num_frames: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """Strictly increasing frame indices, one uniform draw per temporal bin.

    Bin i (0-based) covers frames floor(i*F/n) .. floor((i+1)*F/n) - 1.
    Bins partition the video, so the draws never collide and come out
    sorted. With count == num_frames every frame is selected exactly once.

    Raises:
        ValueError: If ``count`` is not in [1, num_frames].
    """
    if not 1 <= count <= num_frames:
        raise ValueError(
            f"cannot draw {count} ordered frames from a {num_frames}-frame video"
        )
    edges = (np.arange(count + 1, dtype=np.int64) * num_frames) // count
    return rng.integers(edges[:-1], edges[1:])


def sample_positive(
    anchor: int, window: int, num_frames: int, rng: np.random.Generator
) -> int:
    """Uniform frame from [anchor-window, anchor+window] clamped to the video.

    The anchor itself is a legal draw.

    Raises:
        ValueError: If ``window < 1`` or the anchor is out of range.
    """
    if window < 1:
        raise ValueError(f"positive window must be >= 1, got {window}")
    if not 0 <= anchor < num_frames:
        raise ValueError(f"anchor {anchor} outside video of {num_frames} frames")
    lo = max(0, anchor - window)
    hi = min(num_frames - 1, anchor + window)
    return int(rng.integers(lo, hi + 1))


def eligible_videos(
    catalog: DatasetCatalog, frames_per_video: int
) -> list[FeatureSequence]:
    """Videos long enough to contribute a block; short ones are logged once."""
    keep = []
    for video in catalog.videos:
        if video.num_frames >= frames_per_video:
            keep.append(video)
        else:
            logger.warning(
                "skipping video %s: %d frames < block size %d",
                video.video_id,
                video.num_frames,
                frames_per_video,
            )
    return keep


def build_batch(
    videos: list[FeatureSequence],
    videos_per_batch: int,
    batch_size: int,
    rng: np.random.Generator,
    window: int = 30,
) -> Batch:
    """Draw a batch of ``videos_per_batch`` blocks totalling ``batch_size`` rows.

    Args:
        videos: Pool to draw from; every entry must have at least
            batch_size / videos_per_batch frames (see ``eligible_videos``).
        videos_per_batch: Number of distinct videos per batch.
        batch_size: Total anchors; must divide evenly into blocks.
        rng: Source of randomness; a fixed seed fixes the batch.
        window: Half-width of the positive sampling window, in frames.

    Raises:
        ValueError: If batch_size is not a positive multiple of
            videos_per_batch, or the pool is too small.
    """
    if videos_per_batch < 1:
        raise ValueError(f"videos_per_batch must be >= 1, got {videos_per_batch}")
    if batch_size < 1 or batch_size % videos_per_batch != 0:
        raise ValueError(
            f"batch_size ({batch_size}) must be a positive multiple of "
            f"videos_per_batch ({videos_per_batch})"
        )
    block_len = batch_size // videos_per_batch
    too_short = [v.video_id for v in videos if v.num_frames < block_len]
    if too_short:
        raise ValueError(
            f"videos shorter than block size {block_len}: {too_short}; "
            "filter with eligible_videos first"
        )
    if len(videos) < videos_per_batch:
        raise ValueError(
            f"need {videos_per_batch} videos with at least {block_len} frames, "
            f"only {len(videos)} available"
        )

    chosen = rng.choice(len(videos), size=videos_per_batch, replace=False)
    features = np.empty((batch_size, videos[0].dim))
    positive_features = np.empty_like(features)
    positions = np.empty(batch_size, dtype=np.int64)
    positive_positions = np.empty(batch_size, dtype=np.int64)
    blocks = []
    row = 0
    for idx in chosen:
        video = videos[int(idx)]
        anchors = sample_ordered(video.num_frames, block_len, rng)
        mates = np.asarray(
            [sample_positive(int(a), window, video.num_frames, rng) for a in anchors],
            dtype=np.int64,
        )
        features[row : row + block_len] = video.load_feature_rows(anchors)
        positive_features[row : row + block_len] = video.load_feature_rows(mates)
        positions[row : row + block_len] = anchors
        positive_positions[row : row + block_len] = mates
        blocks.append((video.video_id, row, block_len))
        row += block_len
    return Batch(
        features=features,
        positive_features=positive_features,
        blocks=blocks,
        positions=positions,
        positive_positions=positive_positions,
    )
