"""Labeled feature datasets for training occupancy classifiers."""
from __future__ import annotations

import numpy as np

from .errors import InvalidArgumentError
from .rng import stream
from .sensing import FEATURE_NAMES, FeatureConfig, extract_features
from .signalgen import ChannelModel, PuProfile, SignalFrame, apply_channel, gen_pu_signal, noise_var_for_snr

LABEL = "occupied"


def labeled_features(n: int, snr_db: float, frame_len: int, seed, cfg: FeatureConfig = FeatureConfig(),
                     profile: PuProfile = PuProfile(), occupancy: float = 0.5):
    """Features of ``n`` frames, each PU-occupied with probability ``occupancy``.

    Occupied frames carry a fresh random PU burst; the known pattern handed to
    the waveform feature is that burst. Returns (X n x 6, labels in {0, 1}).
    """
    if n < 1 or frame_len < 8:
        raise InvalidArgumentError("need n >= 1 and frame_len >= 8")
    rng_lab, rng_sig, rng_noise = (stream(seed, lab) for lab in ("labels", "symbols", "noise"))
    labels = (rng_lab.random(n) < occupancy).astype(int)
    ch = ChannelModel(1.0, noise_var_for_snr(snr_db, profile.amplitude))
    X = np.empty((n, len(FEATURE_NAMES)))
    for i, occ in enumerate(labels):
        x = gen_pu_signal(profile, frame_len, rng_sig)
        clean = x if occ else SignalFrame(np.zeros(frame_len))
        y = apply_channel(clean, ch, rng_noise)
        X[i] = extract_features(y, x, cfg).values
    return X, labels


def write_feature_csv(path, X, labels) -> None:
    header = ",".join(FEATURE_NAMES + (LABEL,))
    rows = [",".join(repr(float(v)) for v in x) + f",{int(lab)}" for x, lab in zip(X, labels)]
    with open(path, "w") as fh:
        fh.write(header + "\n" + "".join(r + "\n" for r in rows))


def read_feature_csv(path):
    """Inverse of :func:`write_feature_csv`; columns are matched by name."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        missing = [c for c in FEATURE_NAMES + (LABEL,) if c not in header]
        if missing:
            raise InvalidArgumentError(f"{path}: missing columns {missing}")
        try:
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
        except ValueError as exc:
            raise InvalidArgumentError(f"{path}: {exc}") from exc
    if data.shape[0] == 0:
        raise InvalidArgumentError(f"{path}: no rows")
    cols = [header.index(c) for c in FEATURE_NAMES]
    return data[:, cols], data[:, header.index(LABEL)].astype(int)
