"""Radio channel: path loss, shadowing, SINR and CQI mapping.

The propagation model is log-distance path loss with optional
log-normal shadowing::

    loss_db = referenceLossDb + 10 * n * log10(max(d, minDistanceM)) + X

where ``X ~ N(0, shadowingStdDevDb)`` is drawn independently per
(transmitter, receiver, TTI) and is identical across resource blocks
within that TTI.  Decoding is a step function: a transport block is
received iff its mean SINR meets the switching threshold of the CQI
it was encoded with.
"""

from __future__ import annotations

import math
import random
from bisect import bisect_right
from dataclasses import dataclass
from importlib import resources

from .binder import Binder, LinkDirection


@dataclass(frozen=True)
class ChannelParams:
    path_loss_exponent: float = 3.5
    reference_loss_db: float = 40.0
    shadowing_std_dev_db: float = 0.0
    noise_figure_db: float = 7.0
    thermal_noise_dbm_per_rb: float = -121.4
    min_distance_m: float = 1.0


def dbm_to_mw(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0)


def mw_to_dbm(mw: float) -> float:
    return 10.0 * math.log10(mw)


def path_loss_db(distance_m: float, params: ChannelParams) -> float:
    """Deterministic part of the link loss at a given distance."""
    d = max(distance_m, params.min_distance_m)
    return params.reference_loss_db + 10.0 * params.path_loss_exponent * math.log10(d)


def mean_sinr_db(sinr_values_db: list[float]) -> float:
    """Average per-block SINRs in the linear domain, back to dB."""
    if not sinr_values_db:
        raise ValueError("no SINR samples")
    mean_linear = sum(dbm_to_mw(v) for v in sinr_values_db) / len(sinr_values_db)
    return mw_to_dbm(mean_linear)


class CqiTable:
    """Switching thresholds and spectral efficiencies for CQI 1..15.

    ``sinr_to_cqi`` returns the largest CQI whose threshold the SINR
    meets, or 0 when even CQI 1 is out of reach.  Thresholds must be
    strictly increasing.
    """

    def __init__(self, thresholds_db: list[float], efficiencies: list[float]):
        if len(thresholds_db) != len(efficiencies):
            raise ValueError("threshold/efficiency length mismatch")
        if not thresholds_db:
            raise ValueError("empty table")
        if any(b <= a for a, b in zip(thresholds_db, thresholds_db[1:])):
            raise ValueError("thresholds must be strictly increasing")
        self._thresholds = list(thresholds_db)
        self._efficiencies = list(efficiencies)

    @classmethod
    def from_file(cls, path) -> "CqiTable":
        """Load ``cqi threshold_db efficiency_bits_per_re`` rows."""
        rows: dict[int, tuple[float, float]] = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                parts = line.split()
                if len(parts) != 3:
                    raise ValueError(f"{path}:{lineno}: expected 3 columns, got {len(parts)}")
                cqi, threshold, efficiency = int(parts[0]), float(parts[1]), float(parts[2])
                if cqi in rows:
                    raise ValueError(f"{path}:{lineno}: duplicate cqi {cqi}")
                rows[cqi] = (threshold, efficiency)
        expected = list(range(1, len(rows) + 1))
        if sorted(rows) != expected:
            raise ValueError(f"{path}: cqi values must be exactly 1..{len(rows)}")
        ordered = [rows[c] for c in expected]
        return cls([t for t, _ in ordered], [e for _, e in ordered])

    @classmethod
    def default(cls) -> "CqiTable":
        source = resources.files("d2dsim").joinpath("data/cqi_table.txt")
        with resources.as_file(source) as path:
            return cls.from_file(path)

    @property
    def max_cqi(self) -> int:
        return len(self._thresholds)

    def threshold_db(self, cqi: int) -> float:
        if not 1 <= cqi <= self.max_cqi:
            raise ValueError(f"cqi {cqi} outside 1..{self.max_cqi}")
        return self._thresholds[cqi - 1]

    def efficiency(self, cqi: int) -> float:
        if not 1 <= cqi <= self.max_cqi:
            raise ValueError(f"cqi {cqi} outside 1..{self.max_cqi}")
        return self._efficiencies[cqi - 1]

    def sinr_to_cqi(self, sinr_db: float) -> int:
        return bisect_right(self._thresholds, sinr_db)


def decode(mean_db: float, cqi: int, table: CqiTable) -> bool:
    """Step-function reception: succeeds iff the SINR supports the CQI."""
    return mean_db >= table.threshold_db(cqi)


class ChannelModel:
    """Stateless-per-query channel bound to a binder's geometry and ledger.

    Shadowing draws are keyed by (seed, tx, rx, tti) so any query for
    the same link and TTI sees the same value, with no cache to keep
    coherent.
    """

    def __init__(self, binder: Binder, params: ChannelParams,
                 table: CqiTable, seed: int):
        self.binder = binder
        self.params = params
        self.table = table
        self.seed = seed

    def shadowing_db(self, tx_id: int, rx_id: int, tti: int) -> float:
        sigma = self.params.shadowing_std_dev_db
        if sigma == 0.0:
            return 0.0
        rng = random.Random(f"{self.seed}:shadowing:{tx_id}:{rx_id}:{tti}")
        return rng.gauss(0.0, sigma)

    def link_loss_db(self, tx_id: int, rx_id: int, tti: int) -> float:
        tx = self.binder.record(tx_id)
        rx = self.binder.record(rx_id)
        distance = math.dist(tx.position, rx.position)
        return path_loss_db(distance, self.params) + self.shadowing_db(tx_id, rx_id, tti)

    def received_power_dbm(self, tx_id: int, rx_id: int, tti: int,
                           tx_power_dbm: float) -> float:
        return tx_power_dbm - self.link_loss_db(tx_id, rx_id, tti)

    def noise_mw_per_rb(self) -> float:
        return dbm_to_mw(self.params.thermal_noise_dbm_per_rb + self.params.noise_figure_db)

    def sinr_per_rb_db(self, tx_id: int, rx_id: int, *, tti: int, ledger_tti: int,
                       rbs: tuple[int, ...], tx_power_dbm: float,
                       direction: LinkDirection) -> list[float]:
        """Per-block SINR at the receiver against the booked interferers.

        ``tti`` keys the shadowing draw (the transmission instant);
        ``ledger_tti`` selects which TTI's allocations interfere, which
        differs from ``tti`` only for channel-quality probes.
        """
        signal_mw = dbm_to_mw(self.received_power_dbm(tx_id, rx_id, tti, tx_power_dbm))
        noise_mw = self.noise_mw_per_rb()
        out: list[float] = []
        for rb in rbs:
            interference_mw = 0.0
            for entry in self.binder.interferers(ledger_tti, rb, direction.band, tx_id):
                if entry.tx_node_id == rx_id:
                    continue  # a node cannot receive while it transmits on the block
                interference_mw += dbm_to_mw(self.received_power_dbm(
                    entry.tx_node_id, rx_id, tti, entry.tx_power_dbm))
            out.append(mw_to_dbm(signal_mw / (noise_mw + interference_mw)))
        return out

    def wideband_cqi(self, tx_id: int, rx_id: int, *, tti: int,
                     tx_power_dbm: float, direction: LinkDirection) -> int:
        """CQI a receiver would report from a full-band measurement now.

        Interference is taken from the previous TTI's ledger, the most
        recent one a measurement could have observed.
        """
        rbs = tuple(range(self.binder.num_rbs))
        sinrs = self.sinr_per_rb_db(
            tx_id, rx_id, tti=tti, ledger_tti=tti - 1, rbs=rbs,
            tx_power_dbm=tx_power_dbm, direction=direction)
        return self.table.sinr_to_cqi(mean_sinr_db(sinrs))
