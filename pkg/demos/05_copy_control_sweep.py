"""Mini copy-control experiment: train three sampling presets on a small
synthetic corpus and watch the measured copy rate fall as more unseen-word
prediction enters training.

Run: python3 demos/05_copy_control_sweep.py  (a couple of minutes on CPU)

The full-size version is one command:
  copysum sweep --output-dir out --synth --presets case-a,case-b,case-c
"""

import tempfile
from pathlib import Path

from copysum.cli import main

with tempfile.TemporaryDirectory() as tmp:
    out = Path(tmp) / "sweep"
    rc = main([
        "sweep", "--output-dir", str(out), "--synth",
        "--train-pairs", "400", "--valid-pairs", "60", "--test-pairs", "60",
        "--presets", "case-a,case-b,case-c",
        "--epochs", "10", "--lr", "0.002", "--batch-size", "16",
        "--max-positions", "96", "--seed", "7",
    ])
    print(f"\nexit code {rc}")
    print((out / "report.txt").read_text())
    print("sample decodes per preset:")
    for preset in ("case-a", "case-b", "case-c"):
        line = (out / preset / "summaries.txt").read_text().splitlines()[0]
        print(f"  {preset}: {line}")
