"""
Turning clean speech into a labelled noisy, reverberant utterance
=================================================================

The recipe for one utterance (which noise, which rooms, what SNR) is drawn
from a seed derived from the run seed and the utterance id, so any single
utterance can be regenerated on its own.
"""

# %%
import numpy as np

from contamkit.contamination import AssetStore, contaminate, draw_recipe, utterance_snr
from contamkit.desk import synth_noise, synth_speech
from contamkit.rir import synth_exponential_rir

rng = np.random.default_rng(0)
speech, activity = synth_speech(rng, 3.0)
print(f"clean: {speech.duration:.2f} s, {activity.speech_duration:.2f} s of speech in {len(activity)} regions")

assets = AssetStore(
    noises={"hum": synth_noise(rng, 2.0), "babble": synth_noise(rng, 6.0)},
    rirs={"small": synth_exponential_rir(0.02, 0.4, seed=1).ir, "hall": synth_exponential_rir(0.25, 2.0, seed=2).ir},
)

# %%
recipe = draw_recipe("demo-utt", master_seed=7, noise_ids=list(assets.noises), rir_ids=list(assets.rirs), p_rir=0.9)
print(recipe.to_dict())

# %% [markdown]
# Silence is added first so that at least 30% of the result is non-speech.
# Then speech and noise are reverberated separately and the noise is scaled
# to hit the target SNR, measured over the speech samples only.

# %%
utt = contaminate(speech, activity, assets, recipe)
print(f"mixture: {utt.audio.duration:.2f} s, non-speech share {1 - utt.activity.speech_duration / utt.audio.duration:.2f}")
print(f"target SNR {recipe.target_snr:.4f} dB, re-measured {utterance_snr(utt.speech, utt.activity, utt.noise):.4f} dB")
print(f"C50 label {utt.c50:.2f} dB, noise gain {utt.noise_gain:.4f}")

# %% [markdown]
# Frame labels: VAD is a boolean per 16 ms frame; SNR is NaN outside speech.

# %%
print("speech frames:", int(utt.vad.sum()), "of", utt.vad.size)
speech_snr = utt.snr[utt.vad]
print(f"frame SNR on speech: min {speech_snr.min():.1f}, median {np.median(speech_snr):.1f}, max {speech_snr.max():.1f} dB")
