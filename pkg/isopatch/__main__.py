"""
Entry point file
"""

import os
import re
import sys

import fire

# set as early as possible, before importing isopatch
if re.findall(r"(^|\s)(--debug|-d)\b", " ".join(sys.argv[1:])):
    os.environ["ISOPATCH_DEBUGGER"] = "true"

from .isopatch import iga, is_verbose, whi

shorthands = {
    "-N": "--N",
    "-p": "--p",
    "-c": "--c",
    "-W": "--workers",
}


def cli_launcher() -> None:
    """entry point function, modifies arguments on the fly for easier
    shorthands then call iga"""
    sysline = " ".join(sys.argv)

    if " --version" in sysline:
        print(f"isopatch version: {iga.VERSION}")
        raise SystemExit(0)
    elif " --help" in sysline or " -h" in sysline:
        print("Showing help")
        iga.md_printer(iga.__doc__)
        raise SystemExit(0)
    elif " --completion" in sysline:
        if " -- --completion" in sysline:
            fire.Fire(iga)
            raise SystemExit(0)
        else:
            raise Exception(
                "To create completion scripts, use '-- --completion' as arguments."
            )
    elif len(sys.argv) == 1:
        whi("No args shown. Use '--help' to display the help.")
        raise SystemExit(0)

    # turn '-N 8' into '--N 8' and '-W=4' into '--workers=4'
    for i, arg in enumerate(sys.argv[1:], start=1):
        key, sep, val = arg.partition("=")
        if key in shorthands:
            sys.argv[i] = shorthands[key] + sep + val
            if is_verbose:
                whi(f"Replaced argument '{arg}' to '{sys.argv[i]}'")

    # make it so that 'iga poisson' is parsed like 'iga run poisson'
    if sys.argv[1] in ("poisson", "cahn-hilliard", "cahn_hilliard", "hyperelastic", "bench"):
        sys.argv.insert(1, "run")

    fire.Fire(iga)


if __name__ == "__main__":
    cli_launcher()
