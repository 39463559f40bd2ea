"""Three ways to decide whether a channel is occupied.

We calibrate an energy detector, a matched-filter (waveform) detector and a
cyclostationary detector to the same false-alarm rate, then watch how their
detection probability grows with SNR. Run: ``python demos/01_detectors.py``.
"""
import numpy as np

from fogcrn.rng import stream
from fogcrn.sensing import (Hypothesis, calibrate_cyclic_threshold, calibrate_energy_threshold,
                            calibrate_waveform_threshold, default_alpha_grid,
                            detect_cyclostationary, energy_metric, waveform_metric)
from fogcrn.signalgen import (ChannelModel, PuProfile, apply_channel, gen_pu_signal,
                              noise_var_for_snr)

N, PFA, TRIALS = 256, 0.1, 300
grid, taus = default_alpha_grid(), (0, 1, 2, 3)
profile = PuProfile()
pilot = gen_pu_signal(profile, N, stream(0, "pilot"))

# %% Calibrate once per SNR: the noise floor moves, the thresholds follow.
print(f"frame length {N}, target Pfa {PFA}, {TRIALS} occupied frames per point\n")
print(f"{'SNR dB':>7} {'energy':>8} {'waveform':>9} {'cyclic':>8}")
for i, snr in enumerate([-15, -10, -5, 0]):
    nv = noise_var_for_snr(snr)
    rho_e = calibrate_energy_threshold(PFA, nv, N, 10_000, stream(1, "e", i))
    rho_w = calibrate_waveform_threshold(PFA, nv, pilot, 10_000, stream(1, "w", i))
    # the cyclic score is scale free, so one calibration at unit noise would do
    rho_c = calibrate_cyclic_threshold(PFA, nv, N, 2000, stream(1, "c", i), grid, taus)
    hits = np.zeros(3)
    rng = stream(2, "h1", i)
    for _ in range(TRIALS):
        y = apply_channel(pilot, ChannelModel(1.0, nv), rng)
        hits += [energy_metric(y).value > rho_e,
                 waveform_metric(y, pilot) > rho_w,
                 detect_cyclostationary(y, grid, taus, rho_c).hypothesis is Hypothesis.H1]
    pd = hits / TRIALS
    print(f"{snr:>7} {pd[0]:>8.3f} {pd[1]:>9.3f} {pd[2]:>8.3f}")

# %% The matched filter wins whenever the pattern is known, which is why
# T1 and T2 nodes carry the PU pilot. The cyclic detector needs no pattern
# and no noise-power estimate, but pays for it with compute.
