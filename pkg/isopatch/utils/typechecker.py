"""
Decorator used in many places. It does runtime typechecking. By default
it's set to warn but the flag ISOPATCH_TYPECHECKING can be set to "crash" or
to "disabled".
"""

import numpy as np
from beartype import BeartypeConf, beartype
from beartype.typing import Callable, Union

from .env import ISOPATCH_TYPECHECKING

# numpy scalars are not subclasses of the builtin int
Int = Union[int, np.integer]
Real = Union[float, int, np.floating, np.integer]

if ISOPATCH_TYPECHECKING == "crash":
    optional_typecheck = beartype(conf=BeartypeConf(is_pep484_tower=True))
elif ISOPATCH_TYPECHECKING == "warn":
    optional_typecheck = beartype(
        conf=BeartypeConf(violation_type=UserWarning, is_pep484_tower=True)
    )
elif ISOPATCH_TYPECHECKING == "disabled":

    def optional_typecheck(func: Callable) -> Callable:
        return func

else:
    raise ValueError("Unexpected ISOPATCH_TYPECHECKING env value")
