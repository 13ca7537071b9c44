"""Headless reflective model-workbench kernel.

Submodules: ``meta`` (meta-metamodel constructs and reflective queries),
``store`` (transactional tri-submodel store), ``lang`` (navigation
expressions), ``views`` (concrete-syntax engine), ``rules`` (ECA engine),
``validation``, ``fixtures``, ``service`` (collaboration back end), and
``cli`` (console).
"""

from .store import NodeInfo, ProjectStore, Transaction
from .workbench import Workbench

__all__ = ["NodeInfo", "ProjectStore", "Transaction", "Workbench"]

__version__ = "0.1.0"
