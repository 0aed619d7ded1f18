"""Two-dimensional Nelson potential over T in [6, 8.5].

Uses the bundled ``nelson`` config (512^2 grid, a few minutes) or
``nelson_smoke`` with ``--smoke`` (128^2, seconds, exact values only
roughly right).  Writes the comparison CSV to ``out/demo_nelson``.
"""
import sys
import warnings

from cohprop.cli import RunLog, bundled_config, cmd_compare
from cohprop.propagator import ContourWarning, contour_switches

name = "nelson_smoke" if "--smoke" in sys.argv else "nelson"
cfg = bundled_config(name).with_overrides(out=f"out/demo_{name}")
with warnings.catch_warnings():
    warnings.simplefilter("ignore", ContourWarning)
    S = cmd_compare(cfg, RunLog(cfg.data["output"]["dir"]))
err = max(abs(abs(s.K_assembled) - abs(s.K_exact)) / abs(s.K_exact) for s in S)
print("switches:", [(t, f"C{a[0]} -> C{b[0]}") for t, a, b in contour_switches(S)])
print(f"max relative |K| error of the uniform result: {err:.3f}")
for s in S[::10]:
    print(f"T={s.T:.2f} |K|={abs(s.K_exact):.3e} |K2|={abs(s.K2_total):.3e} |Kun|={abs(s.K_assembled):.3e}")
