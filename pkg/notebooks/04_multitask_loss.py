"""
Three-task loss with bounded regression heads
=============================================

Frame VAD uses binary cross-entropy on logits. SNR and C50 use squared
error after a scaled sigmoid that keeps predictions inside the label
range. SNR error only counts on speech frames.
"""

# %%
import numpy as np

from contamkit.loss import (
    bounded_activation,
    calibrate_norms,
    gradient_check,
    multitask_loss,
    random_batch,
    validation_score,
)

print(bounded_activation(np.array([-50.0, 0.0, 50.0]), (-15.0, 80.0)))

# %% [markdown]
# The SNR and C50 terms are rescaled by their largest value over ten
# calibration batches so that all three tasks start on a similar footing.

# %%
rng = np.random.default_rng(0)
batches = [random_batch(rng, (4, 50)) for _ in range(10)]
norms = calibrate_norms(batches)
print("norms:", [round(v, 2) for v in norms])
bundle = multitask_loss(*batches[0], norms)
print({k: round(getattr(bundle, k), 4) for k in ("l_vad", "l_snr", "l_c50", "total")})

# %% [markdown]
# Analytic gradients agree with central differences.

# %%
print(gradient_check(seed=1, num_batches=20))

# %% [markdown]
# Model selection folds F-score and the two MAEs into one number in [0, 1].

# %%
print(round(validation_score(0.92, 4.1, 3.5), 4))
