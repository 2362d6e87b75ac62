from . import utils
from .isopatch import iga

__VERSION__ = iga.VERSION


__all__ = ["iga", "utils"]
