from .algorithms import check_property
from .formulas import Property, SearchStats, Trace, Verdict
from .oracle import oracle_verdict
