"""
Main class.
"""

import faulthandler
import pdb
import sys
import traceback

import pyfiglet
from beartype.typing import List, Literal, Optional, Union

from .utils.demos import (
    CahnHilliardProblem,
    HyperelasticProblem,
    NeoHookean,
    cahn_hilliard_run,
    neohookean_run,
    poisson_run,
    scaling_bench,
)
from .utils.env import ISOPATCH_DEBUGGER, ISOPATCH_DEFAULT_WORKERS
from .utils.errors import IsopatchError
from .utils.flags import is_debug, is_silent, is_verbose
from .utils.logger import logger, md_printer, red, set_help_md_as_docstring, whi
from .utils.solvers import SolverConfig
from .utils.typechecker import optional_typecheck

logger.info("Starting isopatch")


@optional_typecheck
@set_help_md_as_docstring
class iga:
    """
    This docstring is dynamically updated with the content of isopatch/docs/help.md
    """

    VERSION: str = "0.1.0"
    md_printer = md_printer

    @staticmethod
    def run(
        problem: Literal["poisson", "cahn-hilliard", "cahn_hilliard", "hyperelastic", "bench"],
        N: int = 8,
        p: int = 2,
        c: Optional[int] = None,
        dim: int = 2,
        geometry: Literal["square", "annulus"] = "square",
        periodic: bool = False,
        rho_inf: float = 0.5,
        dt: float = 1e-4,
        steps: int = 10,
        load_steps: int = 15,
        workers: Union[int, List[int], tuple] = ISOPATCH_DEFAULT_WORKERS,
        patch: Optional[str] = None,
        out: Optional[str] = None,
        dump_matrix: bool = False,
        fixed_iters: bool = False,
        potential: Literal["polynomial", "logarithmic"] = "polynomial",
        seed: int = 0,
        debug: bool = False,
        verbose: bool = False,
        silent: bool = False,
    ) -> None:
        """
        Run one of the demo problems. An IsopatchError exits with its
        category exit code. See isopatch/docs/help.md for the arguments.
        """
        debug = debug or is_debug or ISOPATCH_DEBUGGER
        if debug:
            debug_exceptions()
        if not is_silent:
            red(pyfiglet.figlet_format("isopatch"))
        config = SolverConfig.fixed_protocol() if fixed_iters else None
        problem = problem.replace("_", "-")
        single = workers if isinstance(workers, int) else int(list(workers)[0])
        if periodic and problem != "cahn-hilliard":
            red(f"--periodic is ignored by {problem}")
        try:
            if problem == "poisson":
                poisson_run(
                    N=N, p=p, c=c, dim=dim, geometry=geometry, patch_file=patch,
                    workers=single, config=config, out=out, dump_matrix=dump_matrix,
                )
            elif problem == "cahn-hilliard":
                cahn_hilliard_run(
                    CahnHilliardProblem(potential=potential, seed=seed),
                    N=N, p=p, c=c, dim=dim, dt=dt, steps=steps, rho_inf=rho_inf,
                    workers=single, config=config, patch_file=patch, out=out,
                )
            elif problem == "hyperelastic":
                hp = HyperelasticProblem(
                    NeoHookean.from_young(),
                    displacement=(-0.2,) + (0.0,) * (dim - 1),
                    load_steps=load_steps,
                )
                neohookean_run(
                    hp, N=N, p=p, c=c, dim=dim, geometry=geometry, workers=single,
                    config=config, patch_file=patch, out=out, dump_matrix=dump_matrix,
                )
            else:
                counts = [workers] if isinstance(workers, int) else [int(w) for w in workers]
                if counts == [1]:
                    counts = [1, 2, 4, 8]
                scaling_bench(N=N, p=p, dim=dim, workers=counts, steps=steps, dt=dt, rho_inf=rho_inf, seed=seed, out=out)
        except IsopatchError as err:
            if debug:
                raise
            red(f"{err.category} error: {err}")
            if is_verbose:
                red("".join(traceback.format_exception(err)))
            sys.exit(err.exit_code)
        whi("Done")


def debug_exceptions() -> None:
    "open a debugger if --debug is set"

    def handle_exception(exc_type, exc_value, exc_traceback):
        if not issubclass(exc_type, KeyboardInterrupt):
            [red(line) for line in traceback.format_tb(exc_traceback)]
            red(str(exc_type) + " : " + str(exc_value))
            if getattr(exc_value, "__cause__", None) is not None:
                red("Detected a cause to the exception, opening the cause first")
                pdb.post_mortem(exc_value.__cause__.__traceback__)
                red("Out of the __cause__, now debugging the higher traceback:")
            pdb.post_mortem(exc_traceback)
            sys.exit(getattr(exc_value, "exit_code", 1))

    sys.excepthook = handle_exception
    faulthandler.enable()
