"""Adaptive multi-center SCADA simulation built on overlapping agent organizations."""

from .errors import (
    ConfigInvalid,
    NotWritable,
    OrgScadaError,
    OutOfRange,
    ScenarioInvalid,
    ServiceUnknownEverywhere,
    SessionClosed,
    Unroutable,
)
from .harness import (
    BUILTIN_SCENARIOS,
    LatencyReport,
    RunResult,
    Scenario,
    ScriptStep,
    hop_count_oracle,
    load_scenario,
    make_lifecycle,
    make_orgs,
    make_benchmark,
    render_table,
    run,
)
from .kernel import Agent, AgentId, AgentSpec, Node, ServiceDescriptor
from .org import (
    Acquaintance,
    AgentDefaults,
    GlobalSupervisor,
    LocalSupervisor,
    OrganizationConfig,
    OverlapLink,
    boot_organization,
    spawn_operator,
)
from .plantsim import Plc, PlcConfig, VariableSpec, synthetic_variables
from .scada import (
    ControlAgent,
    LatencyRecord,
    OperatorSession,
    PATH_EXTEND,
    PATH_LOCAL,
    PATH_NEW,
    PATH_SHARED,
    RemoteOperatorAgent,
)
from .simnet import SimWorld
from .wire import MessageEnvelope, NetConfig, decode, encode, envelope
from .xmlconfig import load_org_config, parse_acquaintances, parse_processes

__version__ = "0.1.0"
