"""
Speech clarity of room impulse responses
========================================

C50 compares the energy arriving in the first 50 ms after the direct
path with everything that comes later. For an impulse response whose
energy decays as exp(-t/tau) there is a closed form, which makes a
handy sanity check.
"""

# %%
import math

import numpy as np

from contamkit.audio import AudioBuffer
from contamkit.rir import analyze_rir, compute_c50, exponential_c50, synth_exponential_rir

# %% [markdown]
# A short decay time means most of the energy is early, so clarity is high.

# %%
for tau in (0.01, 0.05 / math.log(10), 0.05 / math.log(2), 0.2, 0.5):
    measured = [compute_c50(synth_exponential_rir(tau, max(1.0, 14 * tau), seed=s)) for s in range(5)]
    print(f"tau={tau * 1000:6.1f} ms  closed form {exponential_c50(tau):7.3f} dB  "
          f"measured {np.mean(measured):7.3f} +/- {np.std(measured):.3f} dB")

# %% [markdown]
# The early window is anchored at the direct path, so a leading stretch of
# silence (propagation delay) changes nothing, and neither does overall level.

# %%
rir = synth_exponential_rir(0.08, 0.8, delay=0.012, seed=1)
onset_ms, c50 = analyze_rir(rir.ir)
print(f"onset {onset_ms:.1f} ms, C50 {c50:.3f} dB")
print("quieter copy:", compute_c50(AudioBuffer(0.125 * rir.ir.samples)))

# %% [markdown]
# A bare impulse has no late energy at all. Instead of +inf it reports the
# +60 dB ceiling used for labels.

# %%
impulse = np.zeros(1600)
impulse[0] = 1.0
print("anechoic:", compute_c50(AudioBuffer(impulse)))
