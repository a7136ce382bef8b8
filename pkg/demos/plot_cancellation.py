"""
Cancelling a Wi-Fi packet to find what is underneath
======================================================

One MCS 7 packet carries a covert DSSS frame 35 dB below it. The packet
goes through a CFO and a short multipath channel and picks up noise at
23 dB SNR. The receiver decodes the packet, rebuilds it, puts the
estimated channel and CFO back on, and subtracts. What remains is noise
plus the covert frame, which then despreads cleanly.

As with the recorded packets, the covert frame is added to the samples
after the channel, so it carries no CFO of its own.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from covertlink.canceller import recover_covert
from covertlink.channel import ChannelRealization, apply_channel, awgn_for_snr
from covertlink.covert import capacity_samples, covert_demodulate, covert_modulate, inject
from covertlink.covert import CovertConfig
from covertlink.harness.ota import random_psdu
from covertlink.ofdm import modulate
from covertlink.sigcore import psd_estimate

rng = np.random.default_rng(7)

psdu = random_psdu(rng, 1000)
pkt = modulate(psdu, 7).samples.samples
x = np.r_[np.zeros(80), pkt, np.zeros(80)]

###############################################################################
# The channel: 25 kHz offset and two echoes, then the covert frame

ch = ChannelRealization.from_hz(25e3, 20e6, taps=[1.0, 0.3j, 0.1], cfo_phi=0.4)
x = apply_channel(x, ch)

cfg = CovertConfig()
covert_bits = rng.integers(0, 2, capacity_samples(pkt.size, cfg))
start = 80 + cfg.start_offset
x = inject(x, covert_modulate(covert_bits, cfg), 35.0, start)
x = awgn_for_snr(x, 23.0, rng, ref_power=np.mean(np.abs(pkt) ** 2))

###############################################################################
# Despreading the raw samples: the packet swamps the frame

raw, _ = covert_demodulate(x, cfg, covert_bits.size, start)
print(f"without cancellation: {np.count_nonzero(raw != covert_bits)} / {covert_bits.size} bit errors")

rec = recover_covert(x, 7, 1000, covert_bits.size, covert_start=start)
print(f"with cancellation:    {np.count_nonzero(rec.bits != covert_bits)} / {covert_bits.size} bit errors")
print(f"suppression {rec.report.suppression_db:.1f} dB")

###############################################################################
# Spectra before and after

seg = slice(start, start + covert_bits.size * cfg.samples_per_symbol)
f, p_in = psd_estimate(x[seg], nfft=128, sample_rate_hz=20e6)
_, p_out = psd_estimate(rec.residue[seg], nfft=128, sample_rate_hz=20e6)
fig, ax = plt.subplots(figsize=(6, 3.5))
ax.plot(f / 1e6, p_in, label="received")
ax.plot(f / 1e6, p_out, label="residue")
ax.set_xlabel("frequency (MHz)")
ax.set_ylabel("power per bin (dB)")
ax.legend()
fig.tight_layout()
fig.savefig("cancellation_psd.svg")
