"""
Sets the default value for environment variables, parse the actual values,
check their types and finally make them easier to access by other parts of
isopatch.
"""

import os

from beartype import BeartypeConf, beartype
from beartype.door import is_bearable
from beartype.typing import Literal, Optional, Union

# must create it because we can't import it from typechecker.py
warn_typecheck = beartype(conf=BeartypeConf(violation_type=UserWarning))


@warn_typecheck
def parse(val: str) -> Optional[Union[bool, int, float, str]]:
    if val.lower() == "true":
        return True
    elif val.lower() == "false":
        return False
    elif val.isdigit():
        return int(val)
    elif val.lower() == "none" or val == "":
        return None
    try:
        return float(val)
    except ValueError:
        return val


# integrands are closures, only cloudpickle based backends can ship them
BACKENDS = ("threading", "loky")

ISOPATCH_TYPECHECKING = "warn"
ISOPATCH_PARALLEL_BACKEND = "threading"
ISOPATCH_DEFAULT_WORKERS = 1
ISOPATCH_GMRES_RESTART = 30
ISOPATCH_GMRES_MAXITER = 1000
ISOPATCH_GMRES_RTOL = 1e-8
ISOPATCH_GMRES_ATOL = 1e-12
ISOPATCH_NEWTON_MAXITER = 20
ISOPATCH_NEWTON_RTOL = 1e-8
ISOPATCH_NEWTON_ATOL = 1e-12
ISOPATCH_SINGULAR_RTOL = 1e-14
ISOPATCH_PIVOT_SHIFT = 1e-12
ISOPATCH_VTK_RESOLUTION = 4
ISOPATCH_DEBUGGER = False

valid_types = {
    "ISOPATCH_TYPECHECKING": Literal["disabled", "warn", "crash"],
    "ISOPATCH_PARALLEL_BACKEND": Literal["threading", "loky"],
    "ISOPATCH_DEFAULT_WORKERS": int,
    "ISOPATCH_GMRES_RESTART": int,
    "ISOPATCH_GMRES_MAXITER": int,
    "ISOPATCH_GMRES_RTOL": float,
    "ISOPATCH_GMRES_ATOL": float,
    "ISOPATCH_NEWTON_MAXITER": int,
    "ISOPATCH_NEWTON_RTOL": float,
    "ISOPATCH_NEWTON_ATOL": float,
    "ISOPATCH_SINGULAR_RTOL": float,
    "ISOPATCH_PIVOT_SHIFT": float,
    "ISOPATCH_VTK_RESOLUTION": int,
    "ISOPATCH_DEBUGGER": bool,
}

# sanity check for the default values
for k, v in locals().copy().items():
    if not k.startswith("ISOPATCH_"):
        continue
    assert k in valid_types, k
    assert is_bearable(v, valid_types[k]), v

# store the env variable instead of the default values but check their types
for k in os.environ.keys():
    if not k.lower().startswith("isopatch_"):
        continue
    v = parse(os.environ[k])
    if k not in valid_types:
        print(
            f"Unexpected key env variable starting by 'isopatch_': {k}. This might be a typo in your configuration!"
        )
        continue
    # integers are accepted where a float is expected
    if valid_types[k] is float and isinstance(v, int) and not isinstance(v, bool):
        v = float(v)
    assert is_bearable(
        v, valid_types[k]
    ), f"Unexpected type of env variable '{k}': '{type(v)}' but expected '{valid_types[k]}'"
    locals()[k] = v
