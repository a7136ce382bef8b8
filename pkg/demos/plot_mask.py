"""
Does the covert frame show in the spectrum?
===========================================

The 802.11 transmit mask is checked on an ensemble of packets with and
without a covert frame. At 35 dB below the packet the frame changes
neither the skirt margins nor the dip at the unused DC subcarrier; at
0 dB it fills the DC hole.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from covertlink.harness.mask import check_spectral_mask, mask_limit
from covertlink.harness.runners import run_experiment
from covertlink.harness.spec import ExperimentSpec

res = run_experiment(ExperimentSpec("mask_check", sir_db=[0.0, 35.0], packets_per_point=10, seed=3))
for r in res.reports:
    print(f"SIR {r['sir_db']:>4}: {'pass' if r['passed'] else 'FAIL'}  "
          f"min margin {r['min_margin_db']:.2f} dB  DC delta {r['dc_delta_db']:.2f} dB"
          + ("  (DC raised)" if r["dc_raised"] else ""))

###############################################################################
# One packet against the mask

from covertlink.harness.ota import random_psdu
from covertlink.ofdm import modulate

pkt = modulate(random_psdu(np.random.default_rng(0), 1000), 7).samples
m = check_spectral_mask(pkt)
fig, ax = plt.subplots(figsize=(6, 3.5))
ax.plot(m.freqs_hz / 1e6, m.psd_dbr, lw=0.8, label="packet")
ax.plot(m.freqs_hz / 1e6, mask_limit(m.freqs_hz), "k--", label="mask")
ax.set_xlabel("offset (MHz)")
ax.set_ylabel("dBr")
ax.set_ylim(-80, 5)
ax.legend()
fig.tight_layout()
fig.savefig("mask.svg")
