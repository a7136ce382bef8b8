import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import erfc

from conftest import make_packet
from covertlink.channel import (
    ChannelRealization,
    apply_channel,
    awgn_for_snr,
    complex_noise,
    exponential_taps,
)
from covertlink.covert import (
    CovertConfig,
    capacity,
    capacity_samples,
    covert_demodulate,
    covert_modulate,
    despread,
    inject,
)
from covertlink.ofdm.params import PREAMBLE_LEN
from covertlink.sigcore import ComplexBuffer, mean_power, measure_power_db, psd_estimate


def q_func(x):
    return 0.5 * erfc(x / np.sqrt(2))


# -- channel -----------------------------------------------------------------

def test_identity_channel(rng):
    x = rng.standard_normal(100) + 1j * rng.standard_normal(100)
    ch = ChannelRealization()
    assert ch.is_identity
    assert np.array_equal(apply_channel(x, ch), x)


def test_channel_tone_shift():
    fs = 20e6
    n = 1 << 15
    x = ComplexBuffer(np.exp(2j * np.pi * 1e6 * np.arange(n) / fs), fs)
    y = apply_channel(x, ChannelRealization.from_hz(50e3, fs))
    f, p = psd_estimate(y, nfft=4096)
    assert f[np.argmax(p)] == pytest.approx(1.05e6, abs=fs / 4096)


def test_channel_impulse_response():
    y = apply_channel(np.r_[1.0, np.zeros(3)], ChannelRealization(taps=[1, 0.5j]))
    assert np.allclose(y[:2], [1, 0.5j]) and np.allclose(y[2:], 0)


def test_channel_timing_offset_and_length():
    ch = ChannelRealization(taps=[1, 0, 0.1], timing_offset=7)
    y = apply_channel(np.ones(10), ch)
    assert y.size == 10 + 2 + 7 and np.all(y[:7] == 0)


def test_channel_validation():
    with pytest.raises(ValueError):
        ChannelRealization(taps=[0, 1])
    with pytest.raises(ValueError):
        ChannelRealization(timing_offset=-1)
    with pytest.raises(ValueError):
        apply_channel(np.ones(4), ChannelRealization(noise_power_db=-10))


def test_awgn_snr_23(rng):
    x = np.exp(2j * np.pi * rng.random(200_000))
    y = awgn_for_snr(x, 23.0, rng)
    assert measure_power_db(x) - measure_power_db(y - x) == pytest.approx(23.0, abs=0.1)


def test_awgn_infinite_snr(rng):
    x = rng.standard_normal(50) + 0j
    assert np.array_equal(awgn_for_snr(x, float("inf"), rng), x)


def test_awgn_0db_unit_signal(rng):
    x = np.ones(200_000, dtype=complex)
    y = awgn_for_snr(x, 0.0, rng)
    assert measure_power_db(y - x) == pytest.approx(0.0, abs=0.05)


def test_awgn_zero_power():
    with pytest.raises(ValueError):
        awgn_for_snr(np.zeros(10), 10, np.random.default_rng(0))


@given(st.integers(0, 2**32), st.integers(1, 5), st.floats(0, 10), st.integers(1, 4))
def test_exponential_taps_unit_energy(seed, n, decay, spacing):
    taps = exponential_taps(np.random.default_rng(seed), n, decay, spacing)
    assert np.sum(np.abs(taps) ** 2) == pytest.approx(1.0)
    assert taps[0].imag == pytest.approx(0.0, abs=1e-12) and taps[0].real > 0
    assert taps.size == (n - 1) * spacing + 1


@given(st.integers(0, 2**32))
def test_seeded_noise_reproducible(seed):
    a = complex_noise(np.random.default_rng(seed), 16, 1.0)
    b = complex_noise(np.random.default_rng(seed), 16, 1.0)
    assert np.array_equal(a, b)


# -- covert frame --------------------------------------------------------------

def test_config_timing():
    cfg = CovertConfig()
    assert cfg.chips_per_symbol == 64
    assert cfg.symbol_rate_baud == pytest.approx(156.25e3)
    assert cfg.symbol_duration_s == pytest.approx(6.4e-6)
    assert cfg.samples_per_symbol == 128


def test_config_rejects_fractional_chip():
    with pytest.raises(ValueError):
        CovertConfig(chip_rate_hz=3e6)


def test_one_bit_waveform():
    w = covert_modulate([0]).waveform.samples
    assert w.size == 128
    assert set(np.unique(w.real)) == {-1.0, 1.0} and np.all(w.imag == 0)


def test_antipodal():
    w = covert_modulate([1, 0]).waveform.samples
    assert np.array_equal(w[:128], -w[128:])


def test_empty_frame_rejected():
    with pytest.raises(ValueError):
        covert_modulate([])


def test_covert_psd_shape(rng):
    w = covert_modulate(rng.integers(0, 2, 4000)).waveform
    f, p = psd_estimate(w, nfft=256)
    lin = 10 ** (p / 10)
    # rectangular 2-sample chips: sinc^2(f / 10 MHz) envelope; the fixed code
    # adds ripple, so compare 2 MHz band averages against the envelope
    env = np.sinc(f / 10e6) ** 2
    ref = lin[np.abs(f) <= 1e6].mean()
    for lo in (0.0, 2e6, 4e6, 6e6):
        band = (np.abs(f) >= lo) & (np.abs(f) < lo + 2e6)
        got = 10 * np.log10(lin[band].mean() / ref)
        want = 10 * np.log10(env[band].mean() / env[np.abs(f) <= 1e6].mean())
        assert got == pytest.approx(want, abs=1.0)
    # no discrete line at DC
    dc = np.argmin(np.abs(f))
    assert lin[dc] < 2 * ref
    # near the 10 MHz null the density is well down
    assert p[np.argmin(np.abs(np.abs(f) - 9.9e6))] - 10 * np.log10(ref) < -20


def test_capacity_examples():
    assert capacity(64e-6) == 10 + 0 - int(np.ceil(PREAMBLE_LEN / 128))
    cfg0 = CovertConfig(start_offset=0)
    assert capacity(64e-6, cfg0) == 10
    assert capacity(6.3e-6, cfg0) == 0
    with pytest.raises(ValueError):
        capacity(0.0)


def test_capacity_1000_octet_mcs7(rng):
    pkt, _ = make_packet(rng, 7, 1000)
    duration = len(pkt) / 20e6
    # 16 us preamble + 4 us SIGNAL + 38 data symbols of 4 us
    assert duration == pytest.approx(16e-6 + 4e-6 * (1 + 38))
    assert capacity(duration) == capacity_samples(len(pkt)) == (len(pkt) - 320) // 128


@given(st.integers(1, 10_000))
def test_capacity_samples_matches_duration(n):
    assert capacity(n / 20e6) == capacity_samples(n)


def test_inject_sir_35(rng):
    pkt, _ = make_packet(rng, 7, 1000)
    frame = covert_modulate(rng.integers(0, 2, 20))
    y, scaled = inject(pkt.samples, frame, 35.0, return_scaled=True)
    win = slice(320, 320 + 20 * 128)
    ratio = 10 * np.log10(mean_power(pkt.samples.samples[win]) / mean_power(scaled))
    assert ratio == pytest.approx(35.0, abs=1e-9)


def test_inject_sir_0(rng):
    pkt, _ = make_packet(rng, 7, 1000)
    frame = covert_modulate(rng.integers(0, 2, 20))
    _, scaled = inject(pkt.samples, frame, 0.0, return_scaled=True)
    assert measure_power_db(scaled) == pytest.approx(measure_power_db(pkt.samples.samples[320:320 + 2560]),
                                                     abs=0.1)


def test_inject_infinite_sir(rng):
    pkt, _ = make_packet(rng, 7, 100)
    y = inject(pkt.samples, covert_modulate([1, 0]), float("inf"))
    assert np.array_equal(y.samples, pkt.samples.samples)


def test_inject_outside_window_untouched(rng):
    pkt, _ = make_packet(rng, 7, 300)
    y = inject(pkt.samples, covert_modulate(rng.integers(0, 2, 5)), 20.0, 400)
    x = pkt.samples.samples
    assert np.array_equal(y.samples[:400], x[:400])
    assert np.array_equal(y.samples[400 + 640:], x[400 + 640:])


def test_inject_too_long(rng):
    pkt, _ = make_packet(rng, 7, 20)
    with pytest.raises(ValueError):
        inject(pkt.samples, covert_modulate(np.zeros(100, dtype=int)), 30.0)


@given(st.integers(0, 2**32), st.floats(-10, 50))
def test_inject_linearity(seed, sir):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(3000) + 1j * rng.standard_normal(3000)
    frame = covert_modulate(rng.integers(0, 2, 10))
    y, scaled = inject(x, frame, sir, 100, return_scaled=True)
    # the addend comes back up to float rounding of the sum
    assert np.allclose(y[100:1380] - x[100:1380], scaled, rtol=0, atol=1e-12 * (1 + np.abs(x).max()))
    assert np.array_equal(y[:100], x[:100]) and np.array_equal(y[1380:], x[1380:])
    assert np.allclose(scaled / frame.waveform.samples, scaled[0] / frame.waveform.samples[0])


@given(st.lists(st.integers(0, 1), min_size=1, max_size=64), st.integers(0, 300))
def test_round_trip_any_bits(bits, start):
    w = covert_modulate(bits).waveform.samples
    x = np.r_[np.zeros(start), w, np.zeros(5)]
    got, soft = covert_demodulate(x, CovertConfig(), len(bits), start)
    assert got.tolist() == list(bits)
    assert np.allclose(np.abs(soft), 128)


def test_despread_short_buffer():
    with pytest.raises(ValueError):
        despread(np.zeros(100), CovertConfig(), 1)


def test_ber_chip_snr_minus_10(rng):
    """Chip SNR -10 dB, 64 chips: post-correlation Eb/N0 = 8 dB."""
    n_bits = 200_000
    bits = rng.integers(0, 2, n_bits)
    w = covert_modulate(bits).waveform.samples
    # chip energy 2 (two unit samples) over complex noise variance s2 per
    # sample: Ec/N0 = 2 / s2 = -10 dB, so Eb/N0 = 64 * 2 / s2 = +8.06 dB
    s2 = 2 * 10 ** 1.0
    noise = np.sqrt(s2 / 2) * (rng.standard_normal(w.size) + 1j * rng.standard_normal(w.size))
    got, _ = covert_demodulate(w + noise, CovertConfig(), n_bits)
    ber = np.mean(got != bits)
    expect = q_func(np.sqrt(2 * 128 / s2))
    assert expect == pytest.approx(q_func(np.sqrt(2 * 10 ** 0.8)), rel=0.1)
    # 200k bits at p ~ 2e-4: about 40 errors, allow 3 sigma
    assert abs(ber - expect) < 3 * np.sqrt(expect / n_bits)


def test_despreading_gain_white_interference(rng):
    n_sym = 10_000
    cfg = CovertConfig()
    bits = np.zeros(n_sym, dtype=int)
    w = covert_modulate(bits, cfg).waveform.samples
    noise = 3.0 * (rng.standard_normal(w.size) + 1j * rng.standard_normal(w.size))
    # chip-level SIR after integrating each chip's two samples
    chips_sig = w.reshape(-1, 2).sum(axis=1)
    chips_int = noise.reshape(-1, 2).sum(axis=1)
    sir_in = np.mean(np.abs(chips_sig) ** 2) / np.mean(np.abs(chips_int) ** 2)
    out_sig = despread(w, cfg, n_sym)
    out_int = despread(noise, cfg, n_sym)
    sir_out = np.mean(np.abs(out_sig) ** 2) / np.mean(np.abs(out_int) ** 2)
    gain = 10 * np.log10(sir_out / sir_in)
    assert gain == pytest.approx(10 * np.log10(64), abs=0.5)


def test_no_frame_gives_coin_flips(rng):
    x = rng.standard_normal(128 * 5000) + 1j * rng.standard_normal(128 * 5000)
    got, _ = covert_demodulate(x, CovertConfig(), 5000)
    assert abs(got.mean() - 0.5) < 0.03
