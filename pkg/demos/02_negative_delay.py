"""Temporal shaping: all-pass stages only delay, mixing can advance.

Each stage is a first-order all-pass filter, so a pure cascade has unit gain
and positive group delay at every frequency. Mixing a stage output with its
input keeps the gain at or below one but can push the delay negative near
Nyquist when the mixing weight is below one half.
"""
import numpy as np

from fitsneuron.analysis import allpass_cascade, analysis_grid, group_delay_numeric, mixed_single_stage

w = analysis_grid(2048)

betas = [0.5, -0.3, 0.8]
delay = group_delay_numeric(lambda x: allpass_cascade(betas, x), w).delay
print(f"cascade {betas}: |A| in [{np.abs(allpass_cascade(betas, w)).min():.15f}, "
      f"{np.abs(allpass_cascade(betas, w)).max():.15f}], delay in [{delay.min():.3f}, {delay.max():.3f}] samples")

for lam in (0.1, 0.25, 0.4, 0.6):
    res = mixed_single_stage(lam, 0.0, w)
    neg = w[res.negative_region]
    band = f"negative for w > {neg.min():.3f} rad" if neg.size else "never negative"
    print(f"lambda={lam:4.2f}: delay at pi {res.delay[-1]:+.3f} samples, {band}")
