"""
Diagnostics evaluate measurable consequences of the theory
on a solved (or checkpointed) state and report them.

Each subpackage is a plugin with 'init()' and 'run()'; all of them
are imported here so that they are reachable by name.
"""
import importlib
import pkgutil

__all__ = sorted([ _m.name for _m in pkgutil.iter_modules(__path__) if _m.ispkg ])

for _name in __all__:
    importlib.import_module("." + _name, __name__)
