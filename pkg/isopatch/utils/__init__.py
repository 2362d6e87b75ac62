# Using a __init__.py to force the order of initialization:
# 1. load the env variables
# 2. flags parsed from the command line
# 3. everything that logs or typechecks
from . import (
    env,
    flags,
    errors,
    typechecker,
    logger,
    splines,
    nurbs,
    geometry,
    space,
    patches,
    assembly,
    solvers,
    patch_io,
    demos,
)

__all__ = [
    "env",
    "flags",
    "errors",
    "typechecker",
    "logger",
    "splines",
    "nurbs",
    "geometry",
    "space",
    "patches",
    "assembly",
    "solvers",
    "patch_io",
    "demos",
]
