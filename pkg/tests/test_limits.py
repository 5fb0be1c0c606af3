"""Function containers, LIM checks, envelopes, and continuity estimates."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import unit_grid
from hjlab import (
    CompactFamily,
    ExtFn,
    Fn,
    FnSequence,
    PreconditionError,
    SpaceSequence,
    check_LIM,
    check_P_closedness,
    check_strict_continuity_estimate,
    compute_LIMINF,
    compute_LIMSUP,
    lift_to_members,
    make_grid_sequence,
    sandwich_to_LIM,
    trig_polynomial,
)
from hjlab.limits import pair_norm


def test_fn_rejects_bad_values():
    s = unit_grid(4)
    with pytest.raises(ValueError):
        Fn(s, np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        Fn(s, np.array([1.0, np.inf, 0.0, 0.0]))


def test_fn_values_are_frozen():
    f = Fn(unit_grid(3), np.zeros(3))
    with pytest.raises(ValueError):
        f.values[0] = 1.0


def test_fn_algebra_and_truncation():
    s = unit_grid(4)
    f = Fn(s, np.array([1.0, -2.0, 3.0, 0.0]))
    g = Fn(s, np.ones(4))
    assert (f + g).values.tolist() == [2.0, -1.0, 4.0, 1.0]
    assert (f - 1.0).values.tolist() == [0.0, -3.0, 2.0, -1.0]
    assert (2.0 * f).norm == 6.0
    assert f.truncate_above(0.5).values.max() == 0.5
    assert f.truncate_below(0.0).values.min() == 0.0


def test_fn_operations_reject_other_spaces():
    f = Fn(unit_grid(4), np.zeros(4))
    g = Fn(unit_grid(4), np.zeros(4))
    with pytest.raises(ValueError):
        f + g


@given(st.lists(st.floats(-10, 10), min_size=5, max_size=5), st.floats(0, 4))
@settings(max_examples=50, deadline=None)
def test_fn_scaling_scales_the_norm(vals, c):
    f = Fn(unit_grid(5), np.array(vals))
    assert np.isclose((c * f).norm, c * f.norm)


def test_ext_fn_boundedness_flags_and_round_trip():
    s = unit_grid(3)
    e = ExtFn(s, np.array([1.0, -np.inf, 0.0]))
    assert e.bounded_above and not e.bounded_below and not e.finite
    with pytest.raises(ValueError):
        e.as_fn()
    with pytest.raises(ValueError):
        ExtFn(s, np.array([0.0, np.nan, 1.0]))
    f = Fn(s, np.arange(3.0))
    assert np.array_equal(f.as_ext().as_fn().values, f.values)


def _const_seq(seq, values_fn):
    return FnSequence(seq, tuple(Fn(m, values_fn(m)) for m in seq.members))


def test_check_lim_accepts_the_lifted_target():
    seq = make_grid_sequence((0.0, 1.0), [16, 32, 64])
    f = trig_polynomial(seq.limit, [0.0, 1.0])
    fs = lift_to_members(f, seq)
    verdict = check_LIM(fs, f, tol=2.0 * np.pi / 16)
    assert verdict.passed
    assert verdict.n0 == seq.n0
    assert set(verdict.per_level) == {0.5, 1.0}


def test_check_lim_rejects_a_constant_offset():
    seq = make_grid_sequence((0.0, 1.0), [16, 32, 64])
    f = trig_polynomial(seq.limit, [0.0, 1.0])
    fs = lift_to_members(f, seq)
    verdict = check_LIM(fs, f + 0.5, tol=0.1)
    assert not verdict.passed
    assert all(rec["worst_dev"] >= 0.4 for rec in verdict.per_level.values())


def test_check_lim_burn_in_ignores_early_members():
    seq = make_grid_sequence((0.0, 1.0), [16, 32, 64], n0=0)
    f = trig_polynomial(seq.limit, [0.0, 1.0])
    lifted = lift_to_members(f, seq)
    # corrupt the first member only
    members = (Fn(seq.members[0], lifted.members[0].values + 5.0),) + lifted.members[1:]
    fs = FnSequence(seq, members)
    assert not check_LIM(fs, f, tol=0.5, n0=0).passed
    assert check_LIM(fs, f, tol=0.5, n0=1).passed


def test_limsup_liminf_bracket_an_oscillating_sequence():
    seq = make_grid_sequence((0.0, 1.0), [16, 32, 64], n0=0)
    fs = FnSequence(
        seq,
        tuple(Fn(m, ((-1.0) ** n) * np.ones(m.size)) for n, m in enumerate(seq.members)),
    )
    up = compute_LIMSUP(fs)
    lo = compute_LIMINF(fs)
    assert np.all(up.values == 1.0)
    assert np.all(lo.values == -1.0)


def test_envelopes_mark_unreached_points_with_infinities():
    # compacts covering only half of the limit space leave the rest unset
    members = tuple(unit_grid(4, f"m{i}") for i in range(3))
    limit = unit_grid(4, "lim")
    compacts = CompactFamily(
        labels=(1.0,),
        member_sets=((np.arange(2),) * 3,),
        limit_sets=(np.arange(2),),
    )
    seq = SpaceSequence(members=members, limit=limit, compacts=compacts)
    fs = _const_seq(seq, lambda m: np.zeros(m.size))
    up = compute_LIMSUP(fs)
    lo = compute_LIMINF(fs)
    assert np.all(up.values[:2] == 0.0) and np.all(lo.values[:2] == 0.0)
    assert np.all(up.values[2:] == -np.inf)
    assert np.all(lo.values[2:] == np.inf)


def test_sandwich_confirms_limits_and_flags_gaps():
    seq = make_grid_sequence((0.0, 1.0), [16, 32, 64])
    f = trig_polynomial(seq.limit, [0.3])
    fs = lift_to_members(f, seq)
    assert sandwich_to_LIM(fs, f, tol=1e-9).passed
    off = sandwich_to_LIM(fs, f + 1.0, tol=0.1)
    assert not off.passed
    assert any("LIMSUP" in n or "LIMINF" in n for n in off.notes)


def test_lift_to_members_never_grows_norms():
    seq = make_grid_sequence((0.0, 1.0), [8, 16, 32])
    f = trig_polynomial(seq.limit, [0.0, 0.7], [0.1])
    fs = lift_to_members(f, seq)
    assert all(m.norm <= f.norm + 1e-12 for m in fs.members)
    assert pair_norm(fs, f) == max(fs.norm, f.norm)
    with pytest.raises(PreconditionError):
        lift_to_members(Fn(seq.members[0], np.zeros(8)), seq)


def test_p_closedness_accepts_a_cauchy_tower():
    seq = make_grid_sequence((0.0, 1.0), [16, 32, 64])
    f = trig_polynomial(seq.limit, [0.0, 1.0])
    base = lift_to_members(f, seq)
    pairs = []
    for k in (1.0, 0.25, 0.05, 0.01):
        fk = Fn(seq.limit, f.values + k)
        fsk = FnSequence(seq, tuple(Fn(m, v.values + k) for m, v in zip(seq.members, base.members)))
        pairs.append((fsk, fk))
    assert check_P_closedness(pairs, tol=0.5)


def test_p_closedness_rejects_growing_increments():
    seq = make_grid_sequence((0.0, 1.0), [16, 32, 64])
    f = trig_polynomial(seq.limit, [0.0, 1.0])
    base = lift_to_members(f, seq)

    def shifted(k):
        fk = Fn(seq.limit, f.values + k)
        fsk = FnSequence(
            seq, tuple(Fn(m, v.values + k) for m, v in zip(seq.members, base.members))
        )
        return fsk, fk

    with pytest.raises(PreconditionError, match="Cauchy"):
        check_P_closedness([shifted(0.0), shifted(0.1), shifted(1.0)], tol=0.5)
    with pytest.raises(PreconditionError, match="Cauchy"):
        check_P_closedness([shifted(0.0), shifted(2.0)], tol=0.5)


def test_continuity_estimate_fits_a_nonexpansive_map():
    s = unit_grid(32)
    K = np.arange(8)
    K_hat = np.arange(16)
    rng = np.random.default_rng(3)
    probes = []
    for _ in range(4):
        f = Fn(s, rng.uniform(-1, 1, 32))
        g = Fn(s, rng.uniform(-1, 1, 32))
        probes.append((f, g, K, 0.25, 1.0))
    fit = check_strict_continuity_estimate(
        lambda f: f, probes, candidate_hats=[K, K_hat, np.arange(32)]
    )
    assert fit.ok
    rec = fit.records[0]
    # identity needs no room beyond the variable term once K_hat covers K
    assert rec["C1"] == 1.0 and rec["C0"] == 0.0 and rec["hat_index"] == 0


def test_continuity_estimate_reports_an_unfittable_map():
    s = unit_grid(8)
    f = Fn(s, np.zeros(8))
    g = Fn(s, 0.01 * np.ones(8))
    # amplification by 1e3 cannot be absorbed at C1 <= 1 and capped C0
    blow_up = lambda u: Fn(s, 1e3 * u.values)
    fit = check_strict_continuity_estimate(
        blow_up, [(f, g, np.arange(8), 0.001, 0.01)], candidate_hats=[np.arange(8)]
    )
    assert not fit.ok
    assert fit.records[0]["hat_index"] is None
