import math

import numpy as np
import pytest

from polardet.channel import ChannelParams, random_filler_block, transmit
from polardet.detection import Method
from polardet.polar_core import build_code, encode, random_messages
from polardet.sim import (CurvePoint, DecoderSpec, MdrRow, StopRule, TrialConfig, _running_winner,
                          calibrate_operating_point, crossing_ebn0, run_bler, run_mdr, second_stage,
                          simulate_detection, write_csv)

OP = 4.28


@pytest.fixture(scope="module")
def code():
    return build_code()


@pytest.fixture(scope="module")
def small_run(code):
    return simulate_detection(code, OP, 120, root_seed=3, bp_iters=6, fastssc_modes=(True, False),
                              second_stage=True, chunk_trials=25)


# ---------------------------------------------------------------- decoder specs

@pytest.mark.parametrize("name,label", [("sc", "sc"), ("BP15", "bp15"), ("scl2", "scl2"),
                                        ("ca-scl4", "scl4"), ("scl8-nocrc", "scl8-nocrc"),
                                        ("fastssc", "fastssc")])
def test_decoder_spec_parse(name, label):
    assert DecoderSpec.parse(name).label == label


@pytest.mark.parametrize("name", ["bp0", "scl", "ldpc", "scl0"])
def test_decoder_spec_rejects(name):
    with pytest.raises(ValueError):
        DecoderSpec.parse(name)


# ---------------------------------------------------------------- BLER

@pytest.mark.parametrize("dec", ["sc", "fastssc", "bp2", "scl2", "scl2-nocrc"])
def test_noiseless_bler_is_zero(code, dec):
    pts = run_bler(code, dec, [math.inf], StopRule(500, 1, 500, chunk=250))
    assert pts[0].y == 0.0 and pts[0].n == 500


def test_bler_deterministic_and_worker_independent(code):
    stop = StopRule(600, 5, 3000, chunk=200)
    a = run_bler(code, "sc", [3.5], stop, root_seed=4)
    b = run_bler(code, "sc", [3.5], stop, root_seed=4, workers=2)
    assert a == b
    assert a[0].n >= 600 and (a[0].count >= 5 or a[0].n == 3000)


def test_stop_rule():
    s = StopRule(100, 10, 1000)
    assert not s.done(100, 9) and not s.done(99, 50)
    assert s.done(100, 10) and s.done(1000, 0)


def test_crossing_interpolation():
    pts = [CurvePoint(1.0, 1e-1, 10, 100), CurvePoint(2.0, 1e-3, 1, 1000)]
    assert crossing_ebn0(pts, 1e-2) == pytest.approx(1.5)
    with pytest.raises(ValueError):
        crossing_ebn0(pts, 1e-4)


def test_curve_point_ci():
    lo, hi = CurvePoint(0, 0.01, 100, 10_000).confidence_interval()
    assert lo < 0.01 < hi


def test_calibration_monotone_and_reproducible(code):
    stop = StopRule(3000, 150, 20_000, chunk=1000)
    hi_t = calibrate_operating_point(code, 0.3, "sc", lo=-2.0, hi=6.0, stop=stop, root_seed=1,
                                     resolution=0.05)
    lo_t = calibrate_operating_point(code, 0.03, "sc", lo=-2.0, hi=6.0, stop=stop, root_seed=1,
                                     resolution=0.05)
    assert hi_t.ebn0_db < lo_t.ebn0_db
    again = calibrate_operating_point(code, 0.3, "sc", lo=-2.0, hi=6.0, stop=stop, root_seed=1,
                                      resolution=0.05)
    assert again.ebn0_db == hi_t.ebn0_db


def test_calibration_errors(code):
    stop = StopRule(200, 1, 200, chunk=200)
    with pytest.raises(ValueError):
        calibrate_operating_point(code, 0.5, "sc", lo=10.0, hi=12.0, stop=stop)
    with pytest.raises(ValueError):
        calibrate_operating_point(code, 1.5, "sc")


# ---------------------------------------------------------------- detection runs

def test_mdr_basic_properties(small_run):
    run = small_run
    assert run.trials == 120
    assert set(run.ranks) == {"ls", "fs", "re", "fastssc", "fastssc-nospc"}
    assert 0 <= run.true_pos.min() and run.true_pos.max() < 44
    for label in run.ranks:
        for e in run.efforts(label):
            curve = run.mdr_curve(label, e)
            assert curve[-1] == 0.0
            assert np.all(np.diff(curve) <= 0)
            assert curve[10] == run.mdr(label, e, 11)


def test_ls_effort_starts_at_two(small_run):
    assert small_run.efforts("ls")[0] == 2
    with pytest.raises(ValueError):
        small_run.mdr("ls", 1, 5)


def test_trial_outcome_invariants(small_run):
    for t in range(small_run.trials):
        o = small_run.outcome("re", 5, t)
        miss = [o.missed_at_B[B] for B in range(1, 45)]
        assert all(a >= b for a, b in zip(miss, miss[1:]))
        if not o.decodable:
            assert not any(miss)
        if o.decodable and not o.missed_at_B[5]:
            assert o.second_stage_success[44] in (True, False)


def test_second_stage_picks_true_block_when_kept(small_run):
    # once every block is kept, a decodable true block is found unless a filler passes with a better metric
    w = small_run.winners["fs"][2, :, 43]
    hits = (w == small_run.true_pos)[small_run.decodable]
    assert hits.mean() > 0.95


def test_running_winner():
    order = np.array([[2, 0, 1, 3]])
    passed = np.array([True, False, True, True])
    metric = np.array([5.0, 0.0, 3.0, 1.0])
    assert _running_winner(order, passed, metric).tolist() == [[2, 2, 2, 3]]


def test_detection_reproducible_and_worker_independent(code):
    kw = dict(root_seed=9, bp_iters=3, fastssc_modes=(False,), chunk_trials=10)
    a = simulate_detection(code, OP, 40, **kw)
    b = simulate_detection(code, OP, 40, workers=2, **kw)
    c = simulate_detection(code, OP, 40, **{**kw, "chunk_trials": 7})
    for other in (b, c):
        assert np.array_equal(a.true_pos, other.true_pos)
        assert np.array_equal(a.decodable, other.decodable)
        for k in a.ranks:
            assert np.array_equal(a.ranks[k], other.ranks[k])


def test_decodable_fraction_matches_ca_scl_bler(code):
    n = 3000
    run = simulate_detection(code, OP, n, root_seed=21, chunk_trials=500)
    bler = run_bler(code, "scl2", [OP], StopRule(n, 0, n, chunk=1000), root_seed=21)[0].y
    miss = 1 - run.decodable.mean()
    sd = math.sqrt(miss * (1 - miss) / n + bler * (1 - bler) / n)
    assert abs(miss - bler) <= 3 * sd


def test_run_mdr_rows(code):
    cfg = TrialConfig(Method.FS, (2, 3), OP, B_values=(1, 22, 44), trials=30, root_seed=2)
    res = run_mdr(cfg, code)
    assert [(r.effort, r.B) for r in res.rows] == [(2, 1), (2, 22), (2, 44), (3, 1), (3, 22), (3, 44)]
    assert all(r.trials == 30 and r.mdr == r.misses / 30 for r in res.rows)
    assert res.rows[2].mdr == 0.0


def test_run_mdr_fastssc_clamps_effort(code):
    cfg = TrialConfig(Method.FASTSSC, (13, 14, 20), OP, B_values=(4,), trials=10, include_spc=False)
    res = run_mdr(cfg, code)
    assert [r.effort for r in res.rows] == [13, 14]
    assert res.rows[0].method == "fastssc-nospc"


@pytest.mark.parametrize("kwargs", [dict(method=Method.LS, efforts=(1, 2)),
                                    dict(method=Method.FS, efforts=()),
                                    dict(method=Method.FS, efforts=(2,), B_values=(0,)),
                                    dict(method=Method.FS, efforts=(2,), M=1),
                                    dict(method=Method.FS, efforts=(2,), trials=0)])
def test_trial_config_validation(kwargs):
    with pytest.raises(ValueError):
        TrialConfig(ebn0_db=OP, **kwargs)


def test_second_stage_single_true_candidate(code):
    u = random_messages(code, np.random.default_rng(1), 1)[0]
    llrs = transmit(encode(code, u), ChannelParams(6.0, code.info_rate), 5)
    assert second_stage(code, [llrs]) == 0
    fill = random_filler_block(code.N, ChannelParams(6.0, code.info_rate), 6, count=3)
    assert second_stage(code, np.vstack([fill, llrs[None]])) == 3


def test_second_stage_filler_false_alarms(code):
    fill = random_filler_block(code.N, ChannelParams(OP, code.info_rate), 8, count=4000)
    picks = [second_stage(code, fill[i:i + 8]) for i in range(0, 4000, 8)]
    # per set about 8 * 2 * 2**-16 = 2.4e-4 false-alarm probability
    assert sum(p is not None for p in picks) <= 2


# ---------------------------------------------------------------- CSV

def test_write_csv_bler(tmp_path):
    path = tmp_path / "b.csv"
    write_csv([CurvePoint(3.0, 0.25, 1, 4)], path, {"decoder": "sc"})
    assert path.read_text() == "# decoder: sc\nEbN0dB,FER,errors,blocks\n3.0,0.25,1,4\n"


def test_write_csv_mdr(tmp_path):
    path = tmp_path / "m.csv"
    write_csv([MdrRow("fs", 3, 1, 0.5, 5, 10)], path)
    assert path.read_text() == "method,effort,B,MDR,misses,trials\nfs,3,1,0.5,5,10\n"


def test_write_csv_unwritable(tmp_path):
    with pytest.raises(OSError):
        write_csv([], tmp_path / "missing" / "x.csv")
