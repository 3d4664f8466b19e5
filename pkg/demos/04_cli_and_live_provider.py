"""
Driving the command line, and pointing it at a real model
=========================================================

The same flow as the other demos through ``satdtax``. With
``--provider mock`` it is offline. For a live run write a config like
``live_config`` below and drop the flag.
"""

import json
import subprocess
import sys
import tempfile
from pathlib import Path

from satdtax.simulate import make_synthetic_dataset

work = Path(tempfile.mkdtemp())
manifest = make_synthetic_dataset(work / "qs", n=88)


def satdtax(*args):
    cmd = [sys.executable, "-m", "satdtax.cli", *map(str, args)]
    print("$ satdtax", " ".join(map(str, args)), flush=True)
    subprocess.run(cmd, check=True)


satdtax("run", "--provider", "mock", "--dataset", manifest, "--runs", 3, "--out", work / "pipeline")
satdtax("naive", "--provider", "mock", "--dataset", manifest, "--runs", 3, "--out", work / "naive")
for d in ("pipeline", "naive"):
    satdtax("eval", "--out", work / d, "--reference", manifest, "--embedder", "hash")
satdtax("report", "--pipeline", work / "pipeline", "--naive", work / "naive", "--out", work / "report")

# any OpenAI-compatible chat endpoint works; the key is read from the named variable
live_config = {
    "endpoint": "https://api.openai.com/v1",
    "model": "gpt-4o-mini",
    "api_key_env": "OPENAI_API_KEY",
    "temperature": 1.0,
    "max_retries": 3,
    "max_concurrency": 4,
    "pricing": {"input_per_million": 0.15, "output_per_million": 0.60},
    "runs": 10,
}
(work / "live.json").write_text(json.dumps(live_config, indent=2))
print(f"\nlive: satdtax run --config {work / 'live.json'} --dataset {manifest} --out {work / 'live'}")
