"""
Building a synthetic SATD corpus
================================

Writes a small project tree plus a labeled JSONL manifest and looks at
how much source context each comment would get.
"""

import tempfile
from collections import Counter
from pathlib import Path

from satdtax import extract_context, load_dataset
from satdtax.simulate import make_synthetic_dataset

root = Path(tempfile.mkdtemp(prefix="satd_demo_"))

# 88 comments spread over files of 40 to 5000 lines
manifest = make_synthetic_dataset(root, n=88)
dataset = load_dataset(manifest)
print(f"{len(dataset.comments)} comments, manifest at {manifest}")

# the human labels ride along in the manifest
print(Counter(c.human_main for c in dataset.comments))

# long files are cut to a 2000-line window, short ones are sent whole
for comment in dataset.comments[:6]:
    ctx = extract_context(dataset, comment)
    print(f"{comment.id} {comment.file_path}:{comment.line_number} -> "
          f"lines {ctx.start_line}-{ctx.end_line} truncated={ctx.truncated}")
