"""
Command line round trip
=======================

Drives the installed romscat executable end to end in a temporary
directory: write a config, synthesize data, estimate the potential, and
render the report. The same three commands work from any shell.
"""

import json
import pathlib
import subprocess
import sys
import tempfile

work = pathlib.Path(tempfile.mkdtemp(prefix="romscat_demo_"))

# a small configuration so the walkthrough finishes in seconds
config = {
    "nx": 17, "ny": 17, "m": 2, "k_offset": 1.0, "k_spacing": 1.5,
    "n_k": 2, "phantom": "bump", "epsilon_noise": 2.5e-2, "seed": 3,
    "kind": "FWI", "n_iter": 3, "basis_grid": 2, "basis_width": 0.5,
    "out_dir": str(work / "out"),
}
cfg_path = work / "config.json"
cfg_path.write_text(json.dumps(config, indent=2))


def run(*args):
    cmd = [sys.executable, "-m", "romscat.cli", *args]
    print("$ romscat " + " ".join(args))
    out = subprocess.run(cmd, capture_output=True, text=True, check=True)
    print(out.stdout)
    return out


run("synthesize", "--config", str(cfg_path))
run("invert", "--config", str(cfg_path),
    "--data", str(work / "out" / "data_noisy.json"))
run("report", "--truth", str(work / "out" / "truth.json"),
    "--estimate", str(work / "out" / "estimate_FWI.json"))

# the report writes the summary plus one profile per vertical slice
for p in sorted((work / "out").iterdir()):
    print(f"  {p.name}")

report = json.loads((work / "out" / "report.json").read_text())
err = report["errors"][0]["rel_l2_error"]
print(f"\nrelative L2 error of the estimate: {err:.4f}")
