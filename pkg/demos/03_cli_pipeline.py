#!/usr/bin/env python3
"""Drive the whole pipeline through the `vds` command line.

Every artifact below is byte-deterministic: run the script twice and the
bundle, the bases file, the trained module, and the report (CSV + SVG +
manifest) come out identical, byte for byte. Timing goes to stderr so it
never contaminates the artifacts.
"""

import pathlib
import subprocess
import sys
import tempfile

def run(*args):
    cmd = [sys.executable, "-m", "vds.cli"] + list(args)
    print("$ vds " + " ".join(args))
    out = subprocess.run(cmd, capture_output=True, text=True)
    if out.returncode != 0:
        sys.stderr.write(out.stderr)
        raise SystemExit(out.returncode)
    for line in out.stdout.splitlines():
        print("  " + line)
    return out.stdout

work = pathlib.Path(tempfile.mkdtemp(prefix="vds-demo-"))
bundle = work / "fixture.vdsr"
bases = work / "bases.bin"
module = work / "simall.vdsm"
report = work / "report"

# 1. A synthetic bundle: known head, known classes, mixed representations.
run("synth", "--seed", "42", "--dim", "64", "--vocab", "200",
    "--classes", "5", "--train", "1000", "--test", "200",
    "--noise", "0.1", "--out", str(bundle))

# 2. Semantic bases from the bundle's head matrix.
run("bases", "--in", str(bundle), "--out", str(bases))

# 3. Baseline evaluation, straight cosine against the class bases.
run("eval", "--in", str(bundle), "--mode", "sim-all")

# 4. Train the clustering module (Adam, 100 epochs, tau 10).
run("train", "--in", str(bundle), "--mode", "sim-all", "--out", str(module))

# 5. The same evaluation, now through the trained module.
run("eval", "--in", str(bundle), "--mode", "sim-all", "--use-module", str(module))

# 6. Exact-cosine KNN before and after.
run("knn", "--in", str(bundle), "--k", "1", "--k", "16")
run("knn", "--in", str(bundle), "--k", "1", "--k", "16", "--use-module", str(module))

# 7. FLOP counts for the scoring rules at a realistic LM size.
run("flops", "--mode", "sim-all", "--dim", "4096", "--vocab", "128256")
run("flops", "--mode", "mat-mul", "--dim", "4096", "--vocab", "128256")

# 8. One report bundling it all: metrics.csv, scatter.svg, manifest.txt.
run("report", "--in", str(bundle), "--module", str(module),
    "--out-dir", str(report))

print()
print("--- " + str(report / "metrics.csv") + " ---")
print((report / "metrics.csv").read_text(), end="")
print("artifacts in", work)
