"""
Scoring predictions and looking at where they fail
==================================================
"""

# %%
import numpy as np

from contamkit.audio import SpeechActivity
from contamkit.metrics import conditioned_distribution, decile_report, mae, vad_counts, vad_fscore

ref = SpeechActivity(((0.20, 1.10), (1.50, 2.40)))
hyp = SpeechActivity(((0.25, 1.20), (1.60, 2.30)))
print(vad_counts(ref, hyp, 3.0))
print("P/R/F:", [round(v, 4) for v in vad_fscore(ref, hyp, 3.0)])
print("with a 50 ms collar:", [round(v, 4) for v in vad_fscore(ref, hyp, 3.0, collar=0.05)])

# %% [markdown]
# Regression errors are clamped to the range the model can express before
# averaging, so a gold value of 40 dB counts as 30 dB.

# %%
print(mae([40.0], [25.0], clamp=(-15, 30)))

# %% [markdown]
# Error analysis: split utterances into ten equal-size groups by SNR and
# look at the average error in each. Here the error curve is known.

# %%
rng = np.random.default_rng(0)
snr = rng.uniform(-5, 35, 804)
error = 0.9 / (1 + np.exp((snr - 8) / 4)) + 0.05 + rng.normal(0, 0.08, snr.size)
for row in decile_report(snr, error).rows():
    print(f"{row['low']:6.1f} .. {row['high']:6.1f} dB  n={row['count']:3d}  "
          f"mean {row['mean']:.3f} +/- {row['stderr']:.3f}")

# %%
wrong = (error > 0.5).astype(int)
for cls, summary in conditioned_distribution(snr, wrong, bin_width=5).items():
    print(cls, summary.count, f"median SNR {summary.median:.1f} dB")
