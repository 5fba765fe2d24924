from .model import (
    AgentInstance, ChannelDecl, Edge, GlobalState, MASGraph, Select, SlotTable,
    Sync, TransitionLabel, SERIAL,
)
from .semantics import ExplicitModel, enabled, initial_state, replay, step, unwrap
from .types import (
    BOOL, ArrayType, BoolType, EnumType, IntType, RecordType, VarDecl,
    default_init, flatten, flatten_init,
)
