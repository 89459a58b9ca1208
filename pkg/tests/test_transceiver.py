import math
from dataclasses import replace

import numpy as np
import pytest

from mgdm.errors import SyncError
from mgdm.transceiver import (
    CaptureSpec,
    TxSpec,
    aligned_reference,
    decide_and_count,
    decorrelate_ports,
    eye_points,
    load_capture,
    noise_sigma_for_q,
    ook_modulate,
    photodetect,
    prbs,
    prbs15,
    raw_bit_count,
    resample_sync,
    save_capture,
    scope_sample,
    two_cluster_threshold,
    usable_bits,
)
from mgdm.waveform import Waveform

TX = TxSpec()
P = 32767


@pytest.fixture(scope="module")
def pattern():
    return prbs15()


def test_prbs_period_and_balance(pattern):
    assert pattern.size == P
    assert int(pattern.sum()) == 16384


def test_prbs_recurrence(pattern):
    b = pattern.astype(int)
    i = np.arange(15, P)
    assert np.array_equal(b[i], b[i - 15] ^ b[i - 14])


def test_prbs_is_maximal_length(pattern):
    s = 2.0 * pattern - 1
    ac = np.fft.ifft(np.abs(np.fft.fft(s)) ** 2).real
    assert ac[0] == pytest.approx(P)
    assert np.allclose(ac[1:], -1, atol=1e-6)


@pytest.mark.parametrize("order", [7, 9, 11])
def test_short_prbs_orders(order):
    seq = prbs(order, seed=5)
    assert seq.size == 2 ** order - 1
    assert int(seq.sum()) == 2 ** (order - 1)


def test_prbs_zero_seed_rejected():
    with pytest.raises(ValueError):
        prbs15(0)


def test_seed_gives_cyclic_shift(pattern):
    other = prbs15(seed=12345)
    s, o = 2.0 * pattern - 1, 2.0 * other - 1
    xc = np.fft.ifft(np.fft.fft(o) * np.conj(np.fft.fft(s))).real
    assert np.max(xc) == pytest.approx(P)


def test_all_ones_field_is_constant():
    field = ook_modulate(np.ones(64, int), TX)
    assert np.allclose(field.samples, math.sqrt(TX.mark_power))
    field = ook_modulate(np.r_[0, np.ones(63, int)], TX)
    spb = TX.samples_per_bit
    assert np.allclose(field.samples[2 * spb:-spb], math.sqrt(TX.mark_power))


def test_ook_mean_power(pattern):
    field = ook_modulate(pattern, TX)
    mean = float(np.mean(np.abs(field.samples) ** 2))
    target = 0.5 * (TX.mark_power + TX.space_power)
    assert mean == pytest.approx(target, rel=0.02)
    assert field.rate == 112e9


def test_alternating_pattern_tone():
    bits = np.tile([1, 0], 512)
    power = np.abs(ook_modulate(bits, TX).samples) ** 2
    spectrum = np.abs(np.fft.rfft(power - power.mean()))
    freqs = np.fft.rfftfreq(power.size, 1 / TX.sample_rate)
    assert freqs[np.argmax(spectrum)] == pytest.approx(TX.bit_rate / 2)


def test_decorrelated_ports(pattern):
    tx = replace(TX, port_delay_bits=(0, 1000, 2000, 3000), rise_time_bits=0.0)
    field = ook_modulate(pattern, tx)
    ports = decorrelate_ports(field, tx)
    assert np.array_equal(ports[0].samples, field.samples)
    spb = tx.samples_per_bit
    signs = [np.sign(np.abs(p.samples[spb // 2::spb]) ** 2 - 0.5) for p in ports]
    for i in range(4):
        for j in range(i + 1, 4):
            assert np.dot(signs[i], signs[j]) / P == pytest.approx(-1 / P, abs=1e-12)
    whole = replace(tx, port_delay_bits=(P, 0))
    assert np.array_equal(decorrelate_ports(field, whole)[0].samples, field.samples)


def test_photodetect_phase_invariance_and_noise():
    rng = np.random.default_rng(0)
    e = rng.normal(size=1000) + 1j * rng.normal(size=1000)
    cap = CaptureSpec(electrical_noise_sigma=0.1)
    a = photodetect(Waveform(e, 1.0), cap, seed=4).samples
    b = photodetect(Waveform(e * np.exp(1j * np.pi / 3), 1.0), cap, seed=4).samples
    # the rotated field is itself rounded, so agreement is to a few ulp
    assert np.max(np.abs(a - b)) <= 8 * np.finfo(float).eps * np.max(np.abs(e) ** 2)
    silent = photodetect(Waveform(np.zeros(100, complex), 1.0), CaptureSpec(electrical_noise_sigma=0))
    assert np.array_equal(silent.samples, np.zeros(100))
    flat = photodetect(Waveform(np.ones(200_000, complex), 1.0), cap, seed=1).samples
    assert np.std(flat) == pytest.approx(0.1, rel=0.05)
    assert np.mean(flat) == pytest.approx(1.0, abs=1e-3)


def test_scope_same_rate_is_identity():
    x = Waveform(np.arange(1000.0), 80e9)
    out = scope_sample(x, CaptureSpec(scope_rate=80e9, total_samples=300))
    assert np.array_equal(out.samples, x.samples[:300])


def test_scope_preserves_tone_frequency():
    n = 32767 * 4
    f = 3.1e9
    t = np.arange(n) / TX.sample_rate
    period_f = round(f * n / TX.sample_rate) * TX.sample_rate / n
    x = Waveform(np.cos(2 * np.pi * period_f * t), TX.sample_rate)
    cap = CaptureSpec(scope_rate=80e9, total_samples=65536)
    y = scope_sample(x, cap, start=123).samples
    spec = np.abs(np.fft.rfft(y * np.hanning(y.size)))
    freqs = np.fft.rfftfreq(y.size, 1 / 80e9)
    assert abs(freqs[np.argmax(spec)] - period_f) <= freqs[1]


def test_bit_accounting():
    assert raw_bit_count(7, 80e9, 28e9) == 2
    assert raw_bit_count(1048576, 80e9, 28e9) == 367001
    assert usable_bits(1048576, 80e9, 28e9) == 327670
    assert usable_bits(1048576, 40e9, 28e9) == 688107


def test_two_cluster_threshold():
    x = np.r_[np.zeros(10), np.ones(90)]
    assert two_cluster_threshold(x) == pytest.approx(0.5)


def _loopback(pattern, delay, cap, invert=False, sigma=0.0, seed=0):
    field = ook_modulate(np.roll(pattern, delay), TX)
    current = photodetect(field, replace(cap, electrical_noise_sigma=sigma), seed=seed)
    if invert:
        current = Waveform(-current.samples, current.rate)
    return scope_sample(current, cap, start=0)


@pytest.mark.parametrize("rate", [80e9, 40e9])
@pytest.mark.parametrize("delay", [0, 1, 4321, 32766])
def test_sync_recovers_injected_delay(pattern, rate, delay):
    cap = CaptureSpec(scope_rate=rate)
    res = resample_sync(_loopback(pattern, delay, cap), TX, cap, pattern)
    assert res.offset == delay
    assert res.polarity == 1
    assert res.soft.size == usable_bits(cap.total_samples, rate, TX.bit_rate)
    report = decide_and_count(res.soft, aligned_reference(pattern, res.soft.size), 0)
    assert report.error_count == 0


def test_sync_handles_inverted_polarity(pattern):
    cap = CaptureSpec(scope_rate=80e9)
    res = resample_sync(_loopback(pattern, 77, cap, invert=True), TX, cap, pattern)
    assert res.offset == 77 and res.polarity == -1


def test_sync_failure_on_noise(pattern):
    cap = CaptureSpec(scope_rate=80e9)
    rng = np.random.default_rng(2)
    noise = Waveform(rng.normal(size=cap.total_samples), 80e9)
    with pytest.raises(SyncError):
        resample_sync(noise, TX, cap, pattern)


def test_sync_failure_on_short_capture(pattern):
    cap = CaptureSpec(scope_rate=80e9, total_samples=100_000)
    with pytest.raises(SyncError):
        resample_sync(_loopback(pattern, 0, cap), TX, cap, pattern)


def test_decisions_and_ber_arithmetic():
    ref = np.tile([0, 1, 1, 0], 1000).astype(np.uint8)
    soft = ref.astype(float)
    clean = decide_and_count(soft, ref, 3)
    assert clean.error_count == 0 and clean.ber == 0 and clean.sequence_index == 3
    flipped = soft.copy()
    flipped[[5, 17, 999]] = 1 - flipped[[5, 17, 999]]
    rep = decide_and_count(flipped, ref, 0)
    assert rep.error_count == 3
    assert list(rep.error_positions) == [5, 17, 999]
    with pytest.raises(ValueError):
        decide_and_count(soft[:-1], ref, 0)


@pytest.mark.parametrize("errors,expected", [(674, 9.7949882794391e-4), (1, 1.4532623559998663e-6)])
def test_ber_values(errors, expected):
    ref = np.zeros(688107, dtype=np.uint8)
    ref[::2] = 1
    soft = ref.astype(float)
    soft[np.arange(errors) * 1000 + 1] = 1.0
    rep = decide_and_count(soft, ref, 0)
    assert rep.error_count == errors
    assert rep.ber == pytest.approx(expected, rel=1e-12)


def test_noise_sigma_for_q():
    sigma = noise_sigma_for_q(4.0, 13.0)
    assert (1 - 10 ** -1.3) / (2 * sigma) == pytest.approx(4.0)


def test_eye_points(pattern):
    cap = CaptureSpec(scope_rate=80e9)
    capture = _loopback(pattern, 10, cap)
    sync = resample_sync(capture, TX, cap, pattern)
    phase, amp = eye_points(capture, TX, sync, n_bits=200)
    assert phase.size == amp.size == 1600
    assert np.all((phase >= 0) & (phase < 2))
    # bit centres sit near the extreme levels
    centre = np.abs(phase - 0.5) < 0.07
    assert np.all((amp[centre] > 0.8) | (amp[centre] < 0.2))


def test_capture_round_trip(tmp_path):
    x = Waveform(np.linspace(-1, 1, 1001), 40e9)
    path = tmp_path / "cap.bin"
    save_capture(path, x, seed=99)
    back, header = load_capture(path)
    assert header == {"rate": 40e9, "length": 1001, "seed": 99}
    assert back.rate == 40e9
    assert np.array_equal(back.samples, x.samples.astype(np.float32))


def test_parameter_validation():
    with pytest.raises(ValueError):
        TxSpec(samples_per_bit=2)
    with pytest.raises(ValueError):
        TxSpec(port_delay_bits=(0, 0, 1, 2))
    with pytest.raises(ValueError):
        CaptureSpec(scope_rate=-1.0)
