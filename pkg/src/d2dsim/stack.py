"""Protocol stack building blocks: PDCP, RLC, MAC, HARQ and PHY.

These are the mechanisms the engine composes each TTI.  They hold no
clock of their own: every operation takes the state it works on, so
each piece can be exercised in isolation.

Traffic direction is decided once per hop at the PDCP layer.  A
UE-to-UE packet rides the sidelink in one hop when its peering is in
direct mode, and otherwise crosses the eNB as an ordinary uplink
transmission followed by a downlink one.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum

from .binder import AllocationEntry, Binder, LinkDirection
from .channel import ChannelModel, CqiTable, decode, mean_sinr_db
from .mode_selection import Mode


class Direction(Enum):
    DL = "DL"
    UL = "UL"
    D2D = "D2D"
    D2D_MULTI = "D2D_MULTI"

    @property
    def link(self) -> LinkDirection:
        if self is Direction.DL:
            return LinkDirection.DL
        if self is Direction.UL:
            return LinkDirection.UL
        return LinkDirection.SL


@dataclass(frozen=True)
class PacketDescriptor:
    """Identity of one application packet, fixed at creation."""

    packet_id: int
    flow_id: int
    src_id: int
    dst_id: int | None  # None for multicast
    group_address: str | None
    size_bits: int
    created_tti: int
    is_request: bool = False


def pdcp_classify(src_is_enb: bool, dst_is_enb: bool, is_multicast: bool,
                  peer_mode: Mode | None) -> Direction:
    """Pick the direction of a packet's next hop.

    ``peer_mode`` is the sender's peering mode toward the destination,
    or None when the pair is not peered; unpeered UE-to-UE traffic and
    peerings in infrastructure mode both go through the eNB.
    """
    if is_multicast:
        return Direction.D2D_MULTI
    if src_is_enb:
        return Direction.DL
    if dst_is_enb:
        return Direction.UL
    return Direction.D2D if peer_mode is Mode.DM else Direction.UL


# ---------------------------------------------------------------------------
# RLC (unacknowledged mode, byte-granular segmentation)

@dataclass(frozen=True)
class RlcChunk:
    packet: PacketDescriptor
    bits: int
    last: bool


@dataclass
class RlcTxQueue:
    """FIFO of packets awaiting transmission on one (link, direction).

    ``fill`` builds one transport block's payload: whole packets first,
    then at most one trailing fragment, cut at a byte boundary.  The
    fragmented packet's remainder stays at the head of the queue.
    """

    _pending: deque = field(default_factory=deque)  # [descriptor, remaining_bits]

    def push(self, packet: PacketDescriptor) -> None:
        self._pending.append([packet, packet.size_bits])

    @property
    def backlog_bits(self) -> int:
        return sum(remaining for _, remaining in self._pending)

    def __len__(self) -> int:
        return len(self._pending)

    def fill(self, capacity_bits: int) -> list[RlcChunk]:
        chunks: list[RlcChunk] = []
        capacity = capacity_bits
        while self._pending and capacity >= 8:
            packet, remaining = self._pending[0]
            if remaining <= capacity:
                chunks.append(RlcChunk(packet, remaining, last=True))
                capacity -= remaining
                self._pending.popleft()
            else:
                fragment = (capacity // 8) * 8
                chunks.append(RlcChunk(packet, fragment, last=False))
                self._pending[0][1] = remaining - fragment
                break
        return chunks

    def flush(self) -> list[PacketDescriptor]:
        """Drop everything queued, returning one descriptor per packet."""
        dropped = [packet for packet, _ in self._pending]
        self._pending.clear()
        return dropped

    def flush_where(self, predicate) -> list[PacketDescriptor]:
        """Drop only the queued packets matching ``predicate``."""
        dropped = [packet for packet, _ in self._pending if predicate(packet)]
        self._pending = deque(item for item in self._pending
                              if not predicate(item[0]))
        return dropped


@dataclass
class PacketAssembler:
    """Receiver-side reassembly: a packet completes when all bits arrive."""

    _received_bits: dict[int, int] = field(default_factory=dict)

    def add(self, chunk: RlcChunk) -> PacketDescriptor | None:
        pid = chunk.packet.packet_id
        total = self._received_bits.get(pid, 0) + chunk.bits
        if total >= chunk.packet.size_bits:
            self._received_bits.pop(pid, None)
            return chunk.packet
        self._received_bits[pid] = total
        return None


# ---------------------------------------------------------------------------
# AMC

def amc_tbs(cqi: int, num_rbs: int, rb_capacity_re: int, table: CqiTable) -> int:
    """Transport block size in bits for a grant of ``num_rbs`` blocks."""
    if cqi == 0:
        return 0
    return math.floor(num_rbs * rb_capacity_re * table.efficiency(cqi))


def rbs_needed(bits: int, cqi: int, rb_capacity_re: int, table: CqiTable) -> int | None:
    """Fewest blocks whose transport block fits ``bits``, or None at CQI 0."""
    if cqi == 0:
        return None
    if bits <= 0:
        return 0
    per_rb = rb_capacity_re * table.efficiency(cqi)
    n = max(1, math.ceil(bits / per_rb))
    while amc_tbs(cqi, n, rb_capacity_re, table) < bits:
        n += 1
    return n


# ---------------------------------------------------------------------------
# MAC scheduler

@dataclass(frozen=True)
class ScheduleRequest:
    node_id: int
    direction: Direction
    cqi: int
    backlog_bits: int = 0
    retx_rbs: int = 0  # exact grant size of a pending retransmission
    link_key: tuple = ()


@dataclass(frozen=True)
class ScheduleGrant:
    request: ScheduleRequest
    num_rbs: int
    rbs: tuple[int, ...]
    tbs_bits: int
    is_retx: bool


def schedule_band(requests: list[ScheduleRequest], num_rbs: int,
                  rb_capacity_re: int, table: CqiTable) -> list[ScheduleGrant]:
    """Share one band's blocks among this TTI's requests.

    Retransmissions come first, in node-id order, each all-or-nothing
    at its original size.  Remaining blocks go to new transmissions
    round-robin, one block per requester per round, so a node that
    needs few blocks finishes early and the rest keep absorbing the
    residue; when the last round cannot serve everyone, lower node ids
    win.  Granted counts are then laid out contiguously from index 0.
    """
    seen: set[tuple[int, Direction]] = set()
    for request in requests:
        key = (request.node_id, request.direction)
        if key in seen:
            raise ValueError(f"duplicate request for node {request.node_id} "
                             f"{request.direction.value}")
        seen.add(key)

    available = num_rbs
    ordered: list[tuple[ScheduleRequest, int, bool]] = []  # (request, rb count, retx)

    for request in sorted((r for r in requests if r.retx_rbs > 0),
                          key=lambda r: (r.node_id, r.direction.value)):
        if request.retx_rbs <= available:
            ordered.append((request, request.retx_rbs, True))
            available -= request.retx_rbs

    fresh = sorted((r for r in requests
                    if r.retx_rbs == 0 and r.backlog_bits > 0 and r.cqi >= 1),
                   key=lambda r: (r.node_id, r.direction.value))
    need = {id(r): rbs_needed(r.backlog_bits, r.cqi, rb_capacity_re, table)
            for r in fresh}
    counts = {id(r): 0 for r in fresh}
    active = list(fresh)
    while available > 0 and active:
        for request in list(active):
            if available == 0:
                break
            counts[id(request)] += 1
            available -= 1
            if counts[id(request)] >= need[id(request)]:
                active.remove(request)
    for request in fresh:
        if counts[id(request)] > 0:
            ordered.append((request, counts[id(request)], False))

    grants: list[ScheduleGrant] = []
    next_rb = 0
    for request, count, is_retx in ordered:
        rbs = tuple(range(next_rb, next_rb + count))
        next_rb += count
        grants.append(ScheduleGrant(
            request=request, num_rbs=count, rbs=rbs,
            tbs_bits=amc_tbs(request.cqi, count, rb_capacity_re, table),
            is_retx=is_retx))
    return grants


# ---------------------------------------------------------------------------
# HARQ (stop-and-wait processes, unicast only)

class HarqOutcome(Enum):
    RELEASED = "released"
    RETRANSMIT = "retransmit"
    DROPPED = "dropped"


@dataclass
class HarqProcess:
    process_id: int
    busy: bool = False
    chunks: tuple[RlcChunk, ...] = ()
    cqi: int = 0
    num_rbs: int = 0
    tx_count: int = 0
    awaiting_retx: bool = False


@dataclass
class HarqPool:
    """Per-link set of stop-and-wait processes.

    Multicast transmissions never allocate a process: with no single
    feedback source, each transport block is sent exactly once.

    ``epoch`` advances whenever the link is reset (a mode switch
    flushing its processes); feedback carrying an older epoch belongs
    to a transmission that no longer exists and must be ignored.
    """

    num_processes: int
    processes: list[HarqProcess] = field(default_factory=list)
    epoch: int = 0

    def __post_init__(self) -> None:
        if not self.processes:
            self.processes = [HarqProcess(i) for i in range(self.num_processes)]

    def allocate(self) -> HarqProcess | None:
        """Claim the lowest-numbered idle process, or None if all busy."""
        for process in self.processes:
            if not process.busy:
                process.busy = True
                process.awaiting_retx = False
                return process
        return None

    def has_idle(self) -> bool:
        return any(not p.busy for p in self.processes)

    def get(self, process_id: int) -> HarqProcess:
        return self.processes[process_id]

    def release(self, process: HarqProcess) -> None:
        process.busy = False
        process.chunks = ()
        process.cqi = 0
        process.num_rbs = 0
        process.tx_count = 0
        process.awaiting_retx = False

    def busy_processes(self) -> list[HarqProcess]:
        return [p for p in self.processes if p.busy]

    def pending_retx(self) -> HarqProcess | None:
        """Oldest process waiting for a retransmission grant, if any."""
        for process in self.processes:
            if process.busy and process.awaiting_retx:
                return process
        return None


def harq_on_feedback(process: HarqProcess, ack: bool, max_retx: int) -> HarqOutcome:
    """Advance one process on ACK/NACK.

    ``tx_count`` counts transmissions already performed, so a NACK
    after the initial attempt allows up to ``max_retx`` further tries.
    The caller releases the process on RELEASED/DROPPED and requests a
    grant of exactly ``process.num_rbs`` blocks on RETRANSMIT.
    """
    if not process.busy:
        raise ValueError(f"feedback for idle process {process.process_id}")
    if ack:
        return HarqOutcome.RELEASED
    if process.tx_count <= max_retx:
        process.awaiting_retx = True
        return HarqOutcome.RETRANSMIT
    return HarqOutcome.DROPPED


# ---------------------------------------------------------------------------
# PHY

@dataclass(frozen=True)
class TransportBlock:
    """One over-the-air transmission and everything needed to receive it."""

    tx_id: int
    direction: Direction
    chunks: tuple[RlcChunk, ...]
    cqi: int
    rbs: tuple[int, ...]
    tx_power_dbm: float
    tti: int
    dst_id: int | None = None
    group_address: str | None = None
    harq_key: tuple | None = None
    harq_process_id: int | None = None
    harq_epoch: int = 0
    is_retx: bool = False


@dataclass(frozen=True)
class ReceptionResult:
    decoded: bool
    mean_sinr_db: float


def phy_send(binder: Binder, tb: TransportBlock) -> AllocationEntry:
    """Put a transport block on the air by booking its blocks."""
    return binder.record_allocation(
        tb.tti, tb.tx_id, tb.direction.link, tb.rbs, tb.tx_power_dbm)


def phy_receive(channel: ChannelModel, tb: TransportBlock,
                rx_id: int) -> ReceptionResult:
    """Attempt reception of a transport block at one receiver.

    Interference comes from whatever else the binder shows on the
    block's TTI; decoding is all-or-nothing on the mean SINR.
    """
    sinrs = channel.sinr_per_rb_db(
        tb.tx_id, rx_id, tti=tb.tti, ledger_tti=tb.tti, rbs=tb.rbs,
        tx_power_dbm=tb.tx_power_dbm, direction=tb.direction.link)
    mean_db = mean_sinr_db(sinrs)
    ok = tb.cqi >= 1 and decode(mean_db, tb.cqi, channel.table)
    return ReceptionResult(decoded=ok, mean_sinr_db=mean_db)
