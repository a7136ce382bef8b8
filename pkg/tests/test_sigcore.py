import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from covertlink.sigcore import (
    CODE_POLY,
    ComplexBuffer,
    SpreadingCode,
    aperiodic_acf,
    build_spreading_code,
    lfsr_sequence,
    measure_power_db,
    psd_estimate,
    pslr_db,
    resample,
    rng_for,
    xcorr,
    xcorr_lags,
)

INIT = [0, 0, 0, 0, 0, 1]


# -- LFSR / spreading code ------------------------------------------------------

def test_lfsr_period_63():
    seq = lfsr_sequence(CODE_POLY, INIT, 126)
    assert np.array_equal(seq[:63], seq[63:])
    # and not a shorter period
    assert all(not np.array_equal(seq[:63 - p], seq[p:63]) for p in (1, 3, 7, 9, 21))


def test_lfsr_balance():
    seq = lfsr_sequence(CODE_POLY, INIT, 63)
    assert seq.sum() == 32 and (seq == 0).sum() == 31


def test_lfsr_zero_state_rejected():
    with pytest.raises(ValueError):
        lfsr_sequence(CODE_POLY, [0] * 6, 10)


def test_lfsr_wrong_register_length():
    with pytest.raises(ValueError):
        lfsr_sequence(CODE_POLY, [1, 0, 1], 10)


@given(st.lists(st.integers(0, 1), min_size=6, max_size=6).filter(any))
def test_lfsr_any_nonzero_state_has_period_63(state):
    seq = lfsr_sequence(CODE_POLY, state, 126 + 5)
    assert np.array_equal(seq[:68], seq[63:131])
    # every nonzero register state appears once per period: 32 ones
    assert seq[:63].sum() == 32


def test_code_shape_and_values():
    code = build_spreading_code()
    assert code.length == 64
    assert set(np.unique(code.chips)) == {-1.0, 1.0}


def test_code_bit_mapping():
    bits = lfsr_sequence(CODE_POLY, INIT, 64)
    assert np.array_equal(build_spreading_code().chips, 1.0 - 2.0 * bits)


def test_code_acf_peak():
    acf = aperiodic_acf(build_spreading_code().chips)
    assert acf.size == 127
    assert acf[63] == 64


def test_code_pslr_brute_force():
    chips = build_spreading_code().chips
    side = max(abs(sum(chips[i] * chips[i + lag] for i in range(64 - lag))) for lag in range(1, 64))
    assert side == 6
    assert pslr_db(chips) == pytest.approx(20 * np.log10(64 / 6), abs=1e-12)
    assert abs(pslr_db(chips) - 20.56) <= 0.05


def test_code_repeat_extension():
    code = build_spreading_code("repeat")
    assert code.length == 64 and code.chips[-1] == code.chips[0]
    with pytest.raises(ValueError):
        build_spreading_code("pad")


def test_code_other_init_differs():
    assert not np.array_equal(build_spreading_code(init_state=(1, 0, 1, 1, 0, 1)).chips,
                              build_spreading_code().chips)


def test_spreading_code_rejects_non_pm1():
    with pytest.raises(ValueError):
        SpreadingCode(np.array([1.0, 0.0, -1.0]))


# -- correlation --------------------------------------------------------------

def test_xcorr_code_lag0():
    c = build_spreading_code().chips
    out = xcorr(c, c)
    lags = xcorr_lags(64, 64)
    assert out[lags == 0][0] == pytest.approx(64)


def test_xcorr_with_zeros():
    c = build_spreading_code().chips
    assert np.all(xcorr(c, np.zeros(64)) == 0)


def test_xcorr_cyclic_shift_matches_periodic_acf():
    c = build_spreading_code().chips
    shifted = np.roll(c, 5)
    out = xcorr(c, shifted)
    lags = xcorr_lags(64, 64)
    at = dict(zip(lags.tolist(), out.real))
    # direct summation oracle for the aperiodic value at lag -5
    assert at[-5] == pytest.approx(sum(c[n - 5] * shifted[n] for n in range(5, 64)))

    def periodic_acf(k):
        return sum(c[n] * c[(n + k) % 64] for n in range(64))

    # folding the aperiodic lags k and k - 64 gives the circular correlation,
    # which against a 5-chip cyclic shift is the periodic ACF at lag k + 5
    for k in range(64):
        folded = at[k] + at.get(k - 64, 0.0)
        assert folded == pytest.approx(periodic_acf(k + 5))


def test_xcorr_empty_rejected():
    with pytest.raises(ValueError):
        xcorr([], [1.0])


cplx = st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False)


@given(arrays(np.complex128, st.integers(1, 40), elements=cplx),
       arrays(np.complex128, st.integers(1, 40), elements=cplx))
def test_xcorr_symmetry(a, b):
    ab = xcorr(a, b)
    ba = xcorr(b, a)
    assert np.allclose(ab, np.conj(ba[::-1]), atol=1e-8)


# -- power / PSD ------------------------------------------------------------------

def test_power_constant_unit():
    assert measure_power_db(np.exp(1j * np.arange(100))) == pytest.approx(0.0, abs=1e-12)


def test_power_scaling():
    x = np.random.default_rng(0).standard_normal(1000) + 0j
    assert measure_power_db(10 * x) - measure_power_db(x) == pytest.approx(20.0)


def test_power_noise_law_of_large_numbers():
    rng = np.random.default_rng(5)
    n = 1_000_000
    x = np.sqrt(0.01 / 2) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    assert measure_power_db(x) == pytest.approx(-20.0, abs=0.1)


def test_power_zero_and_empty():
    assert measure_power_db(np.zeros(8)) == float("-inf")
    with pytest.raises(ValueError):
        measure_power_db(np.zeros(0))


def test_psd_tone_bin():
    fs = 20e6
    x = ComplexBuffer(np.exp(2j * np.pi * (fs / 4) * np.arange(8192) / fs), fs)
    f, p = psd_estimate(x, nfft=256)
    assert f[np.argmax(p)] == pytest.approx(fs / 4)


def test_psd_white_noise_flat():
    rng = np.random.default_rng(2)
    x = rng.standard_normal(1_000_000) + 1j * rng.standard_normal(1_000_000)
    _, p = psd_estimate(x, nfft=256)
    assert np.ptp(p) / 2 <= 1.5
    assert np.all(np.abs(p - np.mean(p)) <= 1.5)


def test_psd_ofdm_occupancy(rng):
    from covertlink.ofdm import modulate
    from covertlink.harness.ota import random_psdu
    pkt = modulate(random_psdu(rng, 1000), 7).samples
    f, p = psd_estimate(pkt, nfft=256)
    inband = np.abs(f) <= 8e6
    outband = np.abs(f) >= 9.5e6
    # unwindowed symbols leave sinc skirts; still well down past the band edge
    assert np.max(p[outband]) < np.median(p[inband]) - 12
    dc = np.argmin(np.abs(f))
    assert p[dc] < np.median(p[inband]) - 6


@given(st.integers(0, 2**32), st.floats(-20, 20))
def test_parseval(seed, gain_db):
    rng = np.random.default_rng(seed)
    x = 10 ** (gain_db / 20) * (rng.standard_normal(4096) + 1j * rng.standard_normal(4096))
    _, p = psd_estimate(x, nfft=256)
    total = 10 * np.log10(np.sum(10 ** (p / 10)))
    assert total == pytest.approx(measure_power_db(x), abs=0.5)


def test_psd_argument_errors():
    with pytest.raises(ValueError):
        psd_estimate(np.ones(100), nfft=256)
    with pytest.raises(ValueError):
        psd_estimate(np.ones(1000), nfft=256, overlap=1.0)


# -- resampling ------------------------------------------------------------------

def _tone(freq, fs, n):
    return ComplexBuffer(np.exp(2j * np.pi * freq * np.arange(n) / fs), fs)


def test_resample_halves_length():
    x = _tone(1e6, 40e6, 10001)
    y = resample(x, 20e6)
    assert abs(len(y) - len(x) / 2) <= 1
    assert y.sample_rate_hz == 20e6


def test_resample_passband_tone():
    y = resample(_tone(1e6, 40e6, 40000), 20e6).samples[2000:-2000]
    assert abs(20 * np.log10(np.sqrt(np.mean(np.abs(y) ** 2)))) < 0.1


def test_resample_passband_ripple_edge():
    for f in (-8.125e6, -4e6, 3e6, 8.125e6):
        y = resample(_tone(f, 40e6, 40000), 20e6).samples[2000:-2000]
        assert abs(10 * np.log10(np.mean(np.abs(y) ** 2))) < 0.1


def test_resample_stopband_tone():
    y = resample(_tone(15e6, 40e6, 40000), 20e6).samples[2000:-2000]
    assert 10 * np.log10(np.mean(np.abs(y) ** 2)) < -40


def test_resample_bad_ratio():
    with pytest.raises(ValueError):
        resample(_tone(1e6, 40e6, 100), 40e6 * np.pi)
    with pytest.raises(ValueError):
        resample(_tone(1e6, 40e6, 100), 40e6 * 997 / 991)


def test_resample_round_trip():
    rng = np.random.default_rng(3)
    # band-limited test signal well inside the passband
    x = np.zeros(4000, dtype=complex)
    for f in rng.uniform(-6e6, 6e6, 8):
        x += np.exp(2j * np.pi * (f * np.arange(4000) / 20e6 + rng.random()))
    buf = ComplexBuffer(x, 20e6)
    back = resample(resample(buf, 40e6), 20e6)
    err = back.samples[200:-200] - x[200:-200]
    assert 10 * np.log10(np.mean(np.abs(err) ** 2) / np.mean(np.abs(x) ** 2)) < -40


def test_resample_identity_copies():
    x = _tone(1e6, 20e6, 100)
    y = resample(x, 20e6)
    assert np.array_equal(x.samples, y.samples) and y.samples is not x.samples


# -- buffers and seeding ---------------------------------------------------------------

def test_buffer_rate_validated():
    with pytest.raises(ValueError):
        ComplexBuffer(np.zeros(3), 0.0)


def test_buffer_duration():
    assert ComplexBuffer(np.zeros(40), 20e6).duration_s == pytest.approx(2e-6)


@given(st.integers(0, 2**64 - 1), st.lists(st.integers(0, 2**32), max_size=4))
def test_rng_for_reproducible(seed, keys):
    a = rng_for(seed, *keys).standard_normal(5)
    b = rng_for(seed, *keys).standard_normal(5)
    assert np.array_equal(a, b)


def test_rng_for_keys_separate_streams():
    assert not np.array_equal(rng_for(1, 0, 1).random(4), rng_for(1, 1, 0).random(4))
