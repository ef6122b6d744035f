"""Peering table, policy registry and switch commands."""

import pytest
from hypothesis import given
from hypothesis import strategies as st

from d2dsim import (Mode, PeeringTable, UnknownPolicyError, apply_mode_switch,
                    best_cqi_decide, do_mode_selection, get_policy,
                    policy_names, register_policy)


def test_best_cqi_prefers_stronger_link():
    assert best_cqi_decide(10, 4) is Mode.DM
    assert best_cqi_decide(4, 10) is Mode.IM


def test_best_cqi_tie_stays_direct():
    assert best_cqi_decide(7, 7) is Mode.DM
    assert best_cqi_decide(0, 0) is Mode.DM


@given(st.integers(0, 15), st.integers(0, 15))
def test_best_cqi_matches_argmax_with_dm_tiebreak(sl, ul):
    expected = Mode.DM if sl >= ul else Mode.IM
    assert best_cqi_decide(sl, ul) is expected


def test_registry_lookup():
    assert get_policy("D2DModeSelectionBestCqi") is best_cqi_decide
    assert "D2DModeSelectionBestCqi" in policy_names()
    with pytest.raises(UnknownPolicyError, match="NoSuchPolicy"):
        get_policy("NoSuchPolicy")


def test_register_custom_policy():
    @register_policy("AlwaysInfrastructure")
    def always_im(sl_cqi, ul_cqi):
        return Mode.IM
    assert get_policy("AlwaysInfrastructure") is always_im


def test_peering_is_unidirectional():
    table = PeeringTable()
    table.add_peering(1, 2)
    assert table.mode_of(1, 2) is Mode.DM
    assert table.mode_of(2, 1) is None


def test_self_peering_rejected():
    with pytest.raises(ValueError):
        PeeringTable().add_peering(3, 3)


def test_set_mode_returns_previous():
    table = PeeringTable()
    table.add_peering(1, 2)
    assert table.set_mode(1, 2, Mode.IM) is Mode.DM
    assert table.mode_of(1, 2) is Mode.IM
    with pytest.raises(KeyError):
        table.set_mode(2, 1, Mode.DM)


def test_do_mode_selection_emits_only_changes():
    table = PeeringTable()
    table.add_peering(1, 2, Mode.DM)
    table.add_peering(3, 4, Mode.DM)
    cqis = {(1, 2): (7, 12), (3, 4): (9, 3)}
    commands = do_mode_selection(table, best_cqi_decide,
                                 lambda s, d: cqis[(s, d)], tti=100)
    assert len(commands) == 1
    command = commands[0]
    assert (command.src_id, command.dst_id) == (1, 2)
    assert command.new_mode is Mode.IM
    assert command.apply_tti == 101  # takes effect one TTI later


def test_do_mode_selection_noop_when_settled():
    table = PeeringTable()
    table.add_peering(1, 2, Mode.IM)
    commands = do_mode_selection(table, best_cqi_decide,
                                 lambda s, d: (3, 12), tti=50)
    assert commands == []


def test_apply_mode_switch_commits_and_reports_old():
    table = PeeringTable()
    table.add_peering(1, 2, Mode.DM)
    [command] = do_mode_selection(table, best_cqi_decide,
                                  lambda s, d: (2, 9), tti=10)
    assert apply_mode_switch(table, command) is Mode.DM
    assert table.mode_of(1, 2) is Mode.IM
