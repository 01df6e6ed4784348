# %% [markdown]
# # Command-line workflow
#
# The ``igeo`` command validates manifold files, runs the diagnostic
# battery and writes prior grids.  Here it is driven in-process.

# %%
import json
import tempfile
from pathlib import Path

from igeo.cli import main

work = Path(tempfile.mkdtemp())
spec = work / "r42.igm"
main(["random", "--dim", "3", "--seed", "42", "-o", str(spec)])
print(spec.read_text()[:400])

# %%
main(["validate", str(spec)])

# %%
code = main(["check", str(spec), "--points", "100", "--alpha", "0.5"])
print("exit code", code)

# %%
out = work / "prior.csv"
main(["prior", str(spec), "--alpha", "0", "--grid", "4,4,3", "-o", str(out)])
print(out.read_text().splitlines()[:5])
