"""
Building a labelled corpus from manifests
=========================================

A small synthetic stand-in for real speech, noise and room recordings is
written to a temporary folder, then turned into a corpus. Re-running the
same configuration skips finished utterances; the output does not depend
on the number of worker processes.
"""

# %%
import json
import tempfile
from pathlib import Path

from contamkit.cli import main
from contamkit.corpus import RunConfig, read_asset_manifest, read_speech_manifest, run_synthesis
from contamkit.desk import make_desk_corpus

root = Path(tempfile.mkdtemp())
desk = make_desk_corpus(root / "inputs", n_utterances=20, seed=0)
speech = read_speech_manifest(desk.speech_manifest)
noises = read_asset_manifest(desk.noise_manifest)
rirs = read_asset_manifest(desk.rir_manifest)

# %%
result = run_synthesis(speech, noises, rirs, RunConfig(str(root / "corpus"), master_seed=1, workers=4))
print(json.dumps({k: result.summary[k] for k in ("utterances", "total_duration_s", "non_speech_ratio", "per_split")}, indent=1))
print(sorted(p.name for p in (root / "corpus").iterdir())[:6])

# %%
again = run_synthesis(speech, noises, rirs, RunConfig(str(root / "corpus"), master_seed=1, workers=1))
print("processed", again.processed, "skipped", again.skipped)

# %% [markdown]
# The same steps from the command line, followed by scoring the labels
# against themselves.

# %%
main(["synthesize", "--speech", str(desk.speech_manifest), "--noise", str(desk.noise_manifest),
      "--rir", str(desk.rir_manifest), "--out", str(root / "cli"), "--seed", "1"])
main(["eval-vad", "--ref", str(root / "cli"), "--hyp", str(root / "corpus")])
