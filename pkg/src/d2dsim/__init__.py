"""Deterministic system-level simulator of an LTE-A cell with D2D sidelinks."""

from .binder import AllocationEntry, Binder, LinkDirection, NodeRecord, RbConflict
from .channel import (ChannelModel, ChannelParams, CqiTable, decode,
                      mean_sinr_db, path_loss_db)
from .config import (ConstraintViolationError, Diagnostic, FlowConfig,
                     MalformedPatternError, ModeSelectionConfig, MulticastGroup,
                     NodeConfig, Role, ScenarioConfig, ScenarioError,
                     ScenarioSyntaxError, SimParams, Transport, UnknownKeyError,
                     UnresolvedNodeReferenceError, is_multicast_address,
                     load_scenario, parse_scenario, resolve_pattern,
                     serialize_scenario, validate)
from .engine import (Engine, PastEvent, Phase, SimulationResult, TraceRow,
                     rng_stream, run_scenario)
from .mode_selection import (Mode, ModeSwitchCommand, PeeringTable,
                             UnknownPolicyError, apply_mode_switch,
                             best_cqi_decide, do_mode_selection, get_policy,
                             policy_names, register_policy)
from .stack import (Direction, HarqOutcome, HarqPool, HarqProcess,
                    PacketAssembler, PacketDescriptor, RlcChunk, RlcTxQueue,
                    ScheduleGrant, ScheduleRequest, TransportBlock, amc_tbs,
                    harq_on_feedback, pdcp_classify, phy_receive, phy_send,
                    rbs_needed, schedule_band)

__version__ = "0.1.0"
