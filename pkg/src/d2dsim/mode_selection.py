"""Sidelink mode selection: direct path versus infrastructure path.

Each D2D peering is unidirectional and carries its own mode.  In DM
(direct mode) the sender reaches its peer over the sidelink in one
hop; in IM (infrastructure mode) the same traffic is relayed by the
eNB as an ordinary uplink/downlink two-hop.  The eNB re-evaluates
modes periodically through a pluggable policy; a decision takes
effect one TTI after it is made, like a handover command, and data
already committed to the old path is lost.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable


class Mode(Enum):
    DM = "DM"
    IM = "IM"


class UnknownPolicyError(Exception):
    """Requested mode-selection policy was never registered."""


@dataclass(frozen=True)
class ModeSwitchCommand:
    src_id: int
    dst_id: int
    new_mode: Mode
    apply_tti: int


@dataclass
class PeeringTable:
    """Current mode of every (sender, receiver) D2D peering."""

    _modes: dict[tuple[int, int], Mode] = field(default_factory=dict)

    def add_peering(self, src_id: int, dst_id: int, mode: Mode = Mode.DM) -> None:
        if src_id == dst_id:
            raise ValueError("node cannot peer with itself")
        self._modes[(src_id, dst_id)] = mode

    def mode_of(self, src_id: int, dst_id: int) -> Mode | None:
        return self._modes.get((src_id, dst_id))

    def set_mode(self, src_id: int, dst_id: int, mode: Mode) -> Mode:
        """Switch a peering's mode, returning the mode it had before."""
        key = (src_id, dst_id)
        if key not in self._modes:
            raise KeyError(f"no peering {src_id}->{dst_id}")
        old = self._modes[key]
        self._modes[key] = mode
        return old

    def peerings(self) -> tuple[tuple[int, int], ...]:
        return tuple(self._modes)


# A policy maps the sidelink and uplink channel quality of one peering
# to the mode the peering should use.
Policy = Callable[[int, int], Mode]

_POLICIES: dict[str, Policy] = {}


def register_policy(name: str) -> Callable[[Policy], Policy]:
    def wrap(fn: Policy) -> Policy:
        _POLICIES[name] = fn
        return fn
    return wrap


def get_policy(name: str) -> Policy:
    try:
        return _POLICIES[name]
    except KeyError:
        known = ", ".join(sorted(_POLICIES))
        raise UnknownPolicyError(f"unknown policy {name!r} (known: {known})") from None


def policy_names() -> tuple[str, ...]:
    return tuple(sorted(_POLICIES))


@register_policy("D2DModeSelectionBestCqi")
def best_cqi_decide(sl_cqi: int, ul_cqi: int) -> Mode:
    """Prefer the link with the better CQI; ties go to the direct path."""
    return Mode.DM if sl_cqi >= ul_cqi else Mode.IM


SWITCH_DELAY_TTIS = 1


def do_mode_selection(table: PeeringTable, policy: Policy,
                      cqi_lookup: Callable[[int, int], tuple[int, int]],
                      tti: int) -> list[ModeSwitchCommand]:
    """Run one selection round over every peering.

    ``cqi_lookup(src, dst)`` supplies the (sidelink, uplink) CQI pair
    the eNB currently holds for that peering.  Only peerings whose
    desired mode differs from the current one produce a command.
    """
    commands: list[ModeSwitchCommand] = []
    for src_id, dst_id in table.peerings():
        sl_cqi, ul_cqi = cqi_lookup(src_id, dst_id)
        desired = policy(sl_cqi, ul_cqi)
        if desired is not table.mode_of(src_id, dst_id):
            commands.append(ModeSwitchCommand(src_id, dst_id, desired,
                                              tti + SWITCH_DELAY_TTIS))
    return commands


def apply_mode_switch(table: PeeringTable, command: ModeSwitchCommand) -> Mode:
    """Commit a switch command, returning the superseded mode."""
    return table.set_mode(command.src_id, command.dst_id, command.new_mode)
