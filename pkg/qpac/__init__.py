from . import (
    codec,
    config,
    core,
    eom,
    gf2,
    harness,
    lp,
    mps,
    oracle,
    pac,
    stabilizer,
    types,
    util,
)
from .__about__ import __version__

__all__ = [
    "__version__",
    "codec",
    "config",
    "core",
    "eom",
    "gf2",
    "harness",
    "lp",
    "mps",
    "oracle",
    "pac",
    "stabilizer",
    "types",
    "util",
]
