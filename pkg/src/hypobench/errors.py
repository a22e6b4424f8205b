"""Base exception for every domain error the workbench raises.

Modules define their own typed errors inheriting from WorkbenchError so the
CLI can map any domain failure to exit code 1 without enumerating them.
"""

from __future__ import annotations


class WorkbenchError(Exception):
    """Root of the workbench error hierarchy."""
