"""Ranked parallel closures with an MPI-style communicator."""

from ._mpignite import (
    Communicator,
    FrameKind,
    Future,
    JobFailure,
    Kind,
    LocalContext,
    MpigniteError,
    Routing,
    decode,
    encode,
    example_names,
    read_frame,
    run_example,
    set_log_level,
    write_frame,
)

__all__ = [
    "Communicator",
    "FrameKind",
    "Future",
    "JobFailure",
    "Kind",
    "LocalContext",
    "MpigniteError",
    "Routing",
    "decode",
    "encode",
    "example_names",
    "parallelize",
    "read_frame",
    "run_example",
    "set_log_level",
    "write_frame",
]

_default_context = None


def parallelize(fn, n, routing=Routing.P2P, parameter=None, parameter_kind=None, result_kind=None):
    """Run ``fn(comm)`` on ``n`` local ranks and return the results by rank."""
    global _default_context
    if _default_context is None:
        _default_context = LocalContext()
    return _default_context.run(fn, n, routing, parameter, parameter_kind, result_kind)
