"""
Logging to a rotating file plus coloured console printers that stay out of
the way of tqdm progress bars.
"""

from pathlib import Path
from textwrap import dedent

import numpy as np
import rtoml
from beartype.typing import Any, Callable, List, Optional, Type, Union
from loguru import logger
from platformdirs import user_log_dir
from rich.console import Console
from rich.markdown import Markdown
from rich.table import Table
from tqdm import tqdm

from .flags import is_silent, md_printing_disabled
from .typechecker import optional_typecheck

log_dir = Path(user_log_dir(appname="isopatch"))
log_dir.mkdir(exist_ok=True, parents=True)
log_file = log_dir / "isopatch.log"

logger.add(
    log_file,
    rotation="100MB",
    retention=5,
    format="{time} {level} {process} {module}.{function}:{line} {message}",
    level="DEBUG",
    enqueue=False,
    colorize=False,
)

ANSI = {
    "white": "\033[0m",
    "yellow": "\033[93m",
    "red": "\033[91m",
}
RESET = "\033[0m"

console = Console()


def _plain(value: Any) -> Any:
    "numpy scalars and arrays as python objects rtoml can dump"
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    return value


def as_text(message: Any) -> str:
    if isinstance(message, Exception):
        return f"{type(message).__name__}: {message}"
    if isinstance(message, dict):
        return rtoml.dumps(_plain(message), pretty=True).strip()
    if isinstance(message, np.ndarray):
        return np.array2string(message, precision=6)
    if isinstance(message, (list, tuple)):
        return ", ".join(str(m) for m in message)
    text = str(message)
    for code in ANSI.values():
        text = text.replace(code, "")
    return text


@optional_typecheck
def coloured_printer(colour: str) -> Callable:
    code = ANSI[colour]

    def printer(message: Any, **kwargs) -> str:
        text = as_text(message)
        if colour == "red":
            logger.warning(text)
        else:
            logger.info(text)
        if not is_silent:
            tqdm.write(code + text + RESET, **kwargs)
        return text

    return printer


whi = coloured_printer("white")
yel = coloured_printer("yellow")
red = coloured_printer("red")


@optional_typecheck
def md_printer(message: str, color: Optional[str] = None) -> str:
    "render markdown with rich, or print it raw when markdown is disabled"
    message = dedent(message)
    if md_printing_disabled:
        return coloured_printer(color if color in ANSI else "white")(message)
    logger.info(message)
    console.print(Markdown(message), style=color)
    return message


@optional_typecheck
def table_printer(title: str, header: List[str], rows: List[List[str]]) -> Table:
    "print rows as a rich table and log them"
    table = Table(title=title)
    for h in header:
        table.add_column(h, justify="right")
    for row in rows:
        table.add_row(*row)
    logger.info(title + "\n" + "\n".join(" | ".join(r) for r in [header] + rows))
    if not is_silent:
        console.print(table)
    return table


@optional_typecheck
def set_help_md_as_docstring(obj: Union[Type, Callable]) -> Union[Type, Callable]:
    "use isopatch/docs/help.md as the docstring of the CLI class"
    help_file = Path(__file__).parent.parent / "docs" / "help.md"
    content = help_file.read_text().strip() if help_file.exists() else ""
    if not content:
        red(f"Missing or empty help file '{help_file}'")
        content = "Help documentation not found."
    obj.__doc__ = "# Content of isopatch/docs/help.md\n\n" + content
    return obj
