"""Root seeds in the w-plane of the quartic oscillator.

At short times there is a single root near ``w = 0.25 - 1.25i``; a second
contributing root comes in from afar and a third appears later.  Pass
``--plot`` to draw the ``Q''`` and ``P''`` contours through the target labels.
"""
import sys

import numpy as np

from cohprop.cli import bundled_config
from cohprop.shooting import ConvergenceError, WGrid, refine_root, scan_wplane

P = bundled_config("quartic").problem()
times = [0.06, 0.24, 0.70, 1.02, 2.20, 2.70]
maps = {}
for T in times:
    wm = scan_wplane(P, T, WGrid(n_alpha=161, n_beta=161))
    maps[T] = wm
    roots = set()
    for s in wm.seeds:
        try:
            r = refine_root(P, T, s)
        except ConvergenceError:
            continue
        if r.contributing:
            roots.add(np.round(r.w1, 4))
    print(f"T={T:.2f}: contributing roots " + ", ".join(f"{w:.3f}" for w in sorted(roots, key=abs)))

if "--plot" in sys.argv:
    import matplotlib.pyplot as plt
    fig, axes = plt.subplots(2, 3, figsize=(12, 8))
    q, p = P.label_out.q[0], P.label_out.p[0]
    for ax, T in zip(axes.ravel(), times):
        wm = maps[T]
        ax.contour(wm.alpha, wm.beta, wm.Qpp, levels=[q], colors="k")
        ax.contour(wm.alpha, wm.beta, wm.Ppp, levels=[p], colors="r", linestyles="--")
        ax.set_title(f"T = {T}")
        ax.set_xlabel("Re w")
        ax.set_ylabel("Im w")
    fig.tight_layout()
    fig.savefig("quartic_wplane.png", dpi=120)
    print("wrote quartic_wplane.png")
