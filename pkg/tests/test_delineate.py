import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from healthcep import delineate as dl
from healthcep import dsp
from healthcep.synth import EcgTemplate, Wave, ecg_from_r_times, ecg_train

RATE = 500.0
CFG = dl.DelineationConfig()


def truth_offsets(template, rate=RATE):
    return {k: int(round(w.offset_ms * rate / 1000)) for k, w in zip("pqrst", template.waves())}


def test_template_train_all_points_valid():
    x, r_true = ecg_train(5.0, RATE, 60.0)
    k = dl.delineate_ecg(x, RATE)
    assert k.n_beats == 5
    assert np.all(np.abs(k.r_idx - r_true) <= 5)
    for name in "pqst":
        assert np.all(getattr(k, f"{name}_idx") >= 0), name
    off = truth_offsets(EcgTemplate())
    # gaussian bumps overlap, so landmarks sit near (not on) the bump centres
    for name, tol in (("q", 6), ("s", 6), ("p", 6), ("t", 6)):
        err = getattr(k, f"{name}_idx") - (r_true + off[name])
        assert np.all(np.abs(err) <= tol), (name, err)
    assert np.all(k.p_idx < k.q_idx) and np.all(k.q_idx < k.r_idx)
    assert np.all(k.r_idx < k.s_idx) and np.all(k.s_idx < k.t_idx)


def test_filtered_template_train():
    x, r_true = ecg_train(5.0, RATE, 60.0)
    y = dsp.butterworth(dsp.znormalize(x), dsp.FilterSpec.bandpass(0.5, 40, 4, RATE))
    k = dl.delineate_ecg(y, RATE)
    assert k.n_beats == 5
    # causal filtering delays the peaks by a few ms
    assert np.all(np.abs(k.r_idx - r_true) <= 5)


def test_constant_window_all_invalid():
    k = dl.delineate_ecg(np.full(2500, 0.3), RATE)
    assert k.degenerate and k.n_beats == 0
    bi = dl.beat_intervals(k)
    assert bi.hr_bpm == dl.INVALID_F and bi.mean_qrs_ms == dl.INVALID_F
    mf = dl.morphology(k)
    assert (mf.st_depression, mf.st_elevation, mf.inverted_t) == (dl.INVALID,) * 3


def test_edge_truncated_p_is_invalid():
    x, r_true = ecg_train(5.0, RATE, 60.0, first_r_ms=60.0)
    k = dl.delineate_ecg(x, RATE)
    assert k.r_idx[0] == r_true[0] == 30
    assert k.p_idx[0] == dl.INVALID and k.p_amp[0] == dl.INVALID_F
    assert k.q_idx[0] >= 0 and k.s_idx[0] >= 0 and k.t_idx[0] >= 0
    assert np.all(k.p_idx[1:] >= 0)


def test_edge_truncated_t_is_invalid():
    # last beat 200 ms before the window end: the T search range runs off the edge
    x = ecg_from_r_times([500, 1500, 2800], 3000.0, RATE)
    k = dl.delineate_ecg(x, RATE)
    assert k.n_beats == 3
    assert k.t_idx[-1] == dl.INVALID
    assert np.all(k.t_idx[:-1] >= 0)


def test_no_nan_leaves():
    rng = np.random.default_rng(2)
    for _ in range(20):
        k = dl.delineate_ecg(rng.normal(size=2500), RATE)
        for arr in (k.p_amp, k.q_amp, k.s_amp, k.t_amp):
            assert not np.any(np.isnan(arr))
        bi = dl.beat_intervals(k)
        assert not np.isnan(bi.hr_bpm) and not np.isnan(bi.mean_qt_ms)
        assert len(k.p_idx) == len(k.q_idx) == len(k.t_idx) == k.n_beats


@given(st.floats(1e-3, 1e3), st.floats(-1e3, 1e3))
def test_affine_invariance(a, b):
    x, _ = ecg_train(5.0, RATE, 60.0)
    ref = dl.delineate_ecg(x, RATE)
    got = dl.delineate_ecg(a * x + b, RATE)
    for name in "pqrst":
        assert getattr(got, f"{name}_idx").tolist() == getattr(ref, f"{name}_idx").tolist()


# intervals


def _kp(r, q=None, s=None, t=None, rate=RATE):
    n = len(r)
    inv = np.full(n, dl.INVALID, dtype=np.int64)
    arr = lambda v: inv.copy() if v is None else np.asarray(v, dtype=np.int64)
    z = np.zeros(n)
    return dl.EcgKeyPoints(np.asarray(r, dtype=np.int64), inv.copy(), arr(q), arr(s), arr(t), z, z, z, z, z,
                           np.zeros(10_000), rate)


def test_hr_from_rr():
    bi = dl.beat_intervals(_kp([100, 475, 850, 1225]))
    assert bi.rr_ms.tolist() == [750.0] * 3
    assert bi.hr_bpm == 80.0


def test_qrs_index_arithmetic():
    bi = dl.beat_intervals(_kp([130], q=[100], s=[160], t=[300]))
    assert bi.qrs_ms.tolist() == [120.0]
    assert bi.qt_ms.tolist() == [400.0]
    assert bi.hr_bpm == dl.INVALID_F  # single beat
    assert bi.mean_qrs_ms == 120.0


def test_invalid_constituents_propagate():
    bi = dl.beat_intervals(_kp([130, 630], q=[100, -1], s=[160, 660], t=[-1, 900]))
    assert bi.qrs_ms.tolist() == [120.0, -1.0]
    assert bi.qt_ms.tolist() == [-1.0, -1.0]
    assert bi.mean_qrs_ms == 120.0 and bi.mean_qt_ms == dl.INVALID_F


# morphology


def test_healthy_flags_false():
    x, _ = ecg_train(5.0, RATE, 60.0)
    mf = dl.morphology(dl.delineate_ecg(x, RATE))
    assert (mf.st_depression, mf.st_elevation, mf.inverted_t) == (0, 0, 0)


def test_st_depression_detected():
    # the template's normalized span is about 1.2 raw units, so 0.1 raw ≈ 2·θ_st normalized
    tmpl = EcgTemplate().with_(st_shift=-2 * CFG.theta_st * 1.2)
    x, _ = ecg_train(5.0, RATE, 60.0, template=tmpl)
    mf = dl.morphology(dl.delineate_ecg(x, RATE))
    assert mf.st_depression == 1 and mf.st_elevation == 0


def test_st_elevation_detected():
    tmpl = EcgTemplate().with_(st_shift=2 * CFG.theta_st * 1.2)
    x, _ = ecg_train(5.0, RATE, 60.0, template=tmpl)
    mf = dl.morphology(dl.delineate_ecg(x, RATE))
    assert mf.st_elevation == 1 and mf.st_depression == 0


def test_inverted_t_detected():
    tmpl = EcgTemplate().with_(t=Wave(250.0, -0.3, 40.0))
    x, _ = ecg_train(5.0, RATE, 60.0, template=tmpl)
    k = dl.delineate_ecg(x, RATE)
    assert np.all(k.t_idx >= 0)
    assert dl.morphology(k).inverted_t == 1


def test_no_p_means_invalid_flags():
    k = dl.delineate_ecg(ecg_train(5.0, RATE, 60.0, template=EcgTemplate().with_(p=Wave(-200.0, 0.0, 25.0)))[0], RATE)
    # without a P bump there is no maximum in the P range
    assert np.all(k.p_idx == dl.INVALID)
    mf = dl.morphology(k)
    assert (mf.st_depression, mf.st_elevation, mf.inverted_t) == (dl.INVALID,) * 3


# blood pressure


def test_bp_sine():
    t = np.arange(2500) / RATE
    f = dl.bp_features(100 + 40 * np.sin(2 * np.pi * 1.2 * t))
    assert f.sbp_mmhg == pytest.approx(140, abs=1)
    assert f.dbp_mmhg == pytest.approx(60, abs=1)


def test_bp_constant_invalid():
    f = dl.bp_features(np.full(2500, 100.0))
    assert f == dl.BpFeatures(dl.INVALID_F, dl.INVALID_F)


def test_bp_sawtooth():
    peaks = [120.0, 130.0, 125.0, 135.0]
    x = []
    for p in peaks:
        x += list(np.linspace(80.0, p, 50))
    x += [80.0]
    f = dl.bp_features(np.array(x))
    assert f.sbp_mmhg == pytest.approx(np.mean(peaks), abs=1e-6)
    # troughs: only the three interior restarts are minima
    assert f.dbp_mmhg == pytest.approx(80.0, abs=1e-6)
