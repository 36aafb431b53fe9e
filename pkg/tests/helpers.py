"""Small builders shared across test modules."""

from __future__ import annotations

import numpy as np

from gazecast.ingest import GazeSequence


def make_sequence(
    n: int = 90,
    rate_hz: float = 30.0,
    xs=None,
    ys=None,
    dist=None,
    closed=None,
    source_id: str = "test",
) -> GazeSequence:
    ts = np.arange(n) * 1000.0 / rate_hz
    return GazeSequence(
        frame_index=np.arange(n),
        timestamp_ms=ts,
        gaze_x=np.zeros(n) if xs is None else np.asarray(xs, dtype=float),
        gaze_y=np.zeros(n) if ys is None else np.asarray(ys, dtype=float),
        screen_distance_mm=np.full(n, 600.0) if dist is None else np.asarray(dist, dtype=float),
        eye_closed=np.zeros(n, dtype=bool) if closed is None else np.asarray(closed, dtype=bool),
        source_id=source_id,
    )
