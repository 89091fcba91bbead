"""Synthetic mini-dataset in the Intel lab log layout.

Six sensors (3, 14, 16, 19, 39 and the sink 50) report for 200 epochs, 31 s
apart. With ``t`` the epoch index and ``N(s)`` Gaussian noise of standard
deviation ``s``::

    base(t)   = 21 + 2.5 sin(2 pi t / 120) + 0.8 sin(2 pi t / 29)
    heater(t) = 1.5 sin(2 pi t / 17)
    s3  = base + N(0.05)
    s14 = base + 0.6 heater + N(0.05)
    s16 = 0.9 base + 2 + N(0.3)
    s19 = 20 + heater + N(0.1)
    s39 = 22 + cumulative sum of N(0.05)
    s50 = base + 0.3 heater + N(0.05)

Roughly 2% of cells (never epoch 1) are missing. Sensor 5 has only 20
readings so ingestion drops it. The file also has two duplicate readings and
two malformed lines. Everything comes from ``numpy.random.default_rng(2004)``.
"""
from __future__ import annotations

from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

SEED = 2004
N_EPOCHS = 200
SENSORS = (3, 14, 16, 19, 39, 50)
SINK = 50
DATA_DIR = Path(__file__).parent / "data"

POSITIONS = {
    3: (4.0, 4.5), 5: (9.5, 3.0), 14: (12.0, 6.0), 16: (19.5, 8.5),
    19: (27.0, 11.0), 39: (34.5, 22.0), 50: (2.0, 12.0),
}


def _series(rng: np.random.Generator) -> dict[int, np.ndarray]:
    t = np.arange(N_EPOCHS)
    base = 21 + 2.5 * np.sin(2 * np.pi * t / 120) + 0.8 * np.sin(2 * np.pi * t / 29)
    heater = 1.5 * np.sin(2 * np.pi * t / 17)
    return {
        3: base + rng.normal(0, 0.05, N_EPOCHS),
        14: base + 0.6 * heater + rng.normal(0, 0.05, N_EPOCHS),
        16: 0.9 * base + 2 + rng.normal(0, 0.3, N_EPOCHS),
        19: 20 + heater + rng.normal(0, 0.1, N_EPOCHS),
        39: 22 + np.cumsum(rng.normal(0, 0.05, N_EPOCHS)),
        50: base + 0.3 * heater + rng.normal(0, 0.05, N_EPOCHS),
    }


def _line(stamp: datetime, epoch: int, mote: int, temp: float) -> str:
    humidity = 60.0 - 0.8 * temp
    light = 40.0 + 2.0 * mote
    return (f"{stamp:%Y-%m-%d} {stamp:%H:%M:%S.%f} {epoch} {mote} "
            f"{temp:.4f} {humidity:.4f} {light:.2f} 2.6996")


def generate(seed: int = SEED) -> tuple[str, str]:
    """Return ``(log_text, positions_text)``."""
    rng = np.random.default_rng(seed)
    series = _series(rng)
    missing = rng.random((N_EPOCHS, len(SENSORS))) < 0.02
    missing[0, :] = False
    start = datetime(2004, 2, 28, 0, 58, 46)
    lines = []
    for i in range(N_EPOCHS):
        stamp = start + timedelta(seconds=31 * i, microseconds=int(rng.integers(0, 10**6)))
        epoch = i + 1
        for j, mote in enumerate(SENSORS):
            if not missing[i, j]:
                lines.append(_line(stamp, epoch, mote, float(series[mote][i])))
        if i % 10 == 0 and i < 200:
            lines.append(_line(stamp, epoch, 5, 19.0 + 0.01 * i))
    lines.insert(57, lines[50])
    lines.insert(401, lines[400])
    lines.insert(123, "2004-02-28 01:30:00.1 garbled")
    lines.insert(777, "2004-02-28 02:00:00.5 x7 3 20.1 40.2 45.0 2.7")
    log_text = "\n".join(lines) + "\n"
    pos_text = "# mote_id x y (meters)\n" + "".join(
        f"{m} {x} {y}\n" for m, (x, y) in sorted(POSITIONS.items()))
    return log_text, pos_text


def write(directory: Path = DATA_DIR, seed: int = SEED) -> None:
    log_text, pos_text = generate(seed)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "mini_log.txt").write_text(log_text)
    (directory / "mini_positions.txt").write_text(pos_text)


if __name__ == "__main__":
    write()
