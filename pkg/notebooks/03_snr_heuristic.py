"""
A reference-free SNR estimate from VAD alone
============================================

Without access to the clean speech, frame SNR can still be approximated
by comparing the power of nearby speech frames with that of nearby
non-speech frames. Speech frames also contain noise, so the estimate is
biased upward by 10*log10(1 + 10**(-snr/10)).
"""

# %%
import math

import numpy as np

from contamkit.audio import AudioBuffer
from contamkit.contamination import AssetStore, contaminate, draw_recipe
from contamkit.desk import synth_noise, synth_speech
from contamkit.heuristic import HeuristicConfig, heuristic_snr
from contamkit.metrics import mae

# %% [markdown]
# Two tones with a whole number of cycles per frame are orthogonal frame by
# frame, so the estimate lands exactly on the predicted bias.

# %%
sr, spf = 16000, 256
rng = np.random.default_rng(1)
vad = rng.random(1000) < 0.6
n = np.arange(vad.size * spf)
for snr in (0.0, 10.0, 20.0, 30.0):
    x = 0.01 * np.sin(2 * np.pi * 1000 * n / sr)
    x += np.where(np.repeat(vad, spf), 0.01 * 10 ** (snr / 20) * np.sin(2 * np.pi * 500 * n / sr), 0.0)
    est = heuristic_snr(AudioBuffer(x), vad)
    print(f"true {snr:4.1f} dB  estimate {np.nanmean(est):8.5f}  predicted bias {10 * math.log10(1 + 10 ** (-snr / 10)):.5f}")

# %% [markdown]
# On a contaminated utterance the heuristic can be scored against the exact labels.

# %%
speech, activity = synth_speech(rng, 4.0)
assets = AssetStore({"n": synth_noise(rng, 5.0)}, {})
utt = contaminate(speech, activity, assets, draw_recipe("u", 3, ["n"], []))
est, tally = heuristic_snr(utt.audio, utt.vad, config=HeuristicConfig(window=6.0), return_tally=True)
print("MAE vs exact labels:", round(mae(est, utt.snr, mask=utt.vad, clamp=(-15, 30)), 3), "dB", tally)
