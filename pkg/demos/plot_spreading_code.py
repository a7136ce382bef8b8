"""
The covert spreading code
=========================

A 64-chip +-1 code from the m-sequence of z^6 + z + 1. Its aperiodic
autocorrelation has a 64 peak and sidelobes no larger than 6, which is
what lets the covert receiver lock onto a frame buried 35 dB under a
Wi-Fi packet.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from covertlink.sigcore import aperiodic_acf, build_spreading_code, pslr_db

code = build_spreading_code()
print("chips:", "".join("+" if c > 0 else "-" for c in code.chips))

acf = aperiodic_acf(code.chips)
lags = np.arange(-63, 64)
print(f"peak {acf.max():.0f}, largest sidelobe {np.abs(acf[lags != 0]).max():.0f}, "
      f"PSLR {pslr_db(code.chips):.2f} dB")

fig, ax = plt.subplots(figsize=(6, 3))
ax.stem(lags, acf, basefmt=" ")
ax.set_xlabel("lag (chips)")
ax.set_ylabel("autocorrelation")
fig.tight_layout()
fig.savefig("spreading_code_acf.svg")
