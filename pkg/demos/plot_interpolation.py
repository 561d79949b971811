"""
Entropic interpolation between the two mini-batch losses
========================================================

The entropic outer coupling bridges the optimally-coupled loss and the
uniform average: as the regularization grows, the coupled loss climbs
from the BoMb-OT value to the m-OT value.
"""

from pathlib import Path

import matplotlib.pyplot as plt
import numpy as np

from mbot import bomb_loss, ebomb_loss, mot_loss

out_dir = Path(__file__).parent / "output"
out_dir.mkdir(exist_ok=True)

rng = np.random.default_rng(7)
C = rng.random((8, 8))
lo, _ = bomb_loss(C)
hi, _ = mot_loss(C)

lams = np.logspace(-3, 3, 25)
values = [ebomb_loss(C, lam)[0] for lam in lams]

fig, ax = plt.subplots(figsize=(6, 4))
ax.semilogx(lams, values, "o-", label="eBoMb-OT loss")
ax.axhline(lo, color="tab:green", ls="--", label="BoMb-OT (exact coupling)")
ax.axhline(hi, color="tab:red", ls="--", label="m-OT (uniform average)")
ax.set_xlabel("outer regularization")
ax.set_ylabel("loss on a random 8x8 batch cost matrix")
ax.legend()
fig.tight_layout()
fig.savefig(out_dir / "interpolation.png", dpi=120)
print(f"wrote {out_dir / 'interpolation.png'}")
