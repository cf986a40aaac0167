"""
config.py
─────────
Runtime settings for the EPSNI checker, read once at import.

Reads env vars from a .env file found from the working directory upwards
(python-dotenv); falls back to the real environment when no .env exists.

Optional env vars:
  EPSNI_MAX_STATES       derivation cap before StateSpaceLimitError (default 100000)
  EPSNI_SOLVER           default steady-state solver: exact | float  (default exact)
  EPSNI_FLOAT_TOLERANCE  max residual |ΠQ| accepted by the float solver (default 1e-12)
  EPSNI_LOG_LEVEL        logging level used by the CLI (default WARNING)
"""

from __future__ import annotations

import os
import sys

from dotenv import find_dotenv, load_dotenv

load_dotenv(find_dotenv(usecwd=True))


def _int_env(name: str, default: int) -> int:
    raw = os.getenv(name, "").strip()
    if not raw:
        return default
    try:
        value = int(raw)
    except ValueError:
        print(f"⚠️  {name}={raw!r} is not an integer, using {default}", file=sys.stderr)
        return default
    if value < 1:
        print(f"⚠️  {name} must be positive, using {default}", file=sys.stderr)
        return default
    return value


def _float_env(name: str, default: float) -> float:
    raw = os.getenv(name, "").strip()
    if not raw:
        return default
    try:
        return float(raw)
    except ValueError:
        print(f"⚠️  {name}={raw!r} is not a number, using {default}", file=sys.stderr)
        return default


def _choice_env(name: str, default: str, choices: tuple[str, ...]) -> str:
    raw = os.getenv(name, "").strip().lower()
    if not raw:
        return default
    if raw not in choices:
        print(f"⚠️  {name}={raw!r} not in {choices}, using {default}", file=sys.stderr)
        return default
    return raw


# ─── Config ──────────────────────────────────────────────────────────────────

MAX_STATES        = _int_env("EPSNI_MAX_STATES", 100_000)
SOLVER            = _choice_env("EPSNI_SOLVER", "exact", ("exact", "float"))
FLOAT_TOLERANCE   = _float_env("EPSNI_FLOAT_TOLERANCE", 1e-12)
LOG_LEVEL         = os.getenv("EPSNI_LOG_LEVEL", "WARNING").strip().upper() or "WARNING"

ORACLE_MAX_STATES = 10   # Bell(10) = 115975 partitions
