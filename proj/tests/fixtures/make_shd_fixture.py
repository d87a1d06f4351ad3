"""Writes tiny_shd.h5, a three-sample file in the published SHD layout."""
import pathlib

import h5py
import numpy as np

SAMPLES = [
    (3, [0.0, 0.0123, 0.025, 0.9999, 1.2], [0, 4, 12, 699, 5]),
    (19, [], []),
    (0, [0.5, 0.5], [100, 101]),
]


def main() -> None:
    out = pathlib.Path(__file__).with_name("tiny_shd.h5")
    times_t = h5py.vlen_dtype(np.dtype("float32"))
    units_t = h5py.vlen_dtype(np.dtype("uint16"))
    with h5py.File(out, "w") as f:
        spikes = f.create_group("spikes")
        times = spikes.create_dataset("times", (len(SAMPLES),), dtype=times_t)
        units = spikes.create_dataset("units", (len(SAMPLES),), dtype=units_t)
        for i, (_, t, u) in enumerate(SAMPLES):
            times[i] = np.asarray(t, dtype=np.float32)
            units[i] = np.asarray(u, dtype=np.uint16)
        f.create_dataset("labels", data=np.asarray([s[0] for s in SAMPLES], dtype=np.uint16))


if __name__ == "__main__":
    main()
