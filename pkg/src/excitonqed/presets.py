"""Parameter sets of the published figures.

Rates are in units of the dispersive frequency ``omega``; every preset uses
``alpha = 1``.
"""

from __future__ import annotations

_BOTH = {"k": 0.05, "kprime": 0.05}
_NO_FIELD = {"k": 0.0, "kprime": 0.05}
_NO_MOL = {"k": 0.05, "kprime": 0.0}

_SHORT = {"t_max": 3.0, "n_steps": 3000}
_LONG = {"t_max": 50.0, "n_steps": 10000}


def _p(N, n, damping, grid, note=None):
    d = {"N_total": N, "n_excited": n, "alpha": 1.0, **damping, **grid}
    if note:
        d["note"] = note
    return d


_FIG5_NOTE = (
    "target regime is B=1; n_excited=1 gives n(m+1)=N and hence B=1 for any N. "
    "No damping is given for this figure; k=k'=0.05 omega is assumed."
)

PRESETS: dict[str, dict] = {
    "fig1a": _p(10, 5, _BOTH, _SHORT),
    "fig1b": _p(10, 5, _NO_FIELD, _SHORT),
    "fig1c": _p(10, 5, _NO_MOL, _SHORT),
    "fig1d": _p(1, 1, _NO_MOL, _SHORT, "single molecule: A = B = 1"),
    "fig2a": _p(10, 5, _BOTH, _SHORT),
    "fig2b": _p(10, 5, _NO_FIELD, _SHORT),
    "fig2c": _p(10, 5, _NO_MOL, _SHORT),
    "fig3a": _p(10, 5, _BOTH, _LONG),
    "fig3b": _p(10, 5, _NO_FIELD, _LONG),
    "fig3c": _p(10, 5, _NO_MOL, _LONG),
    "fig4a": _p(20, 10, _BOTH, _LONG),
    "fig4b": _p(50, 25, _BOTH, _LONG),
    "fig4c": _p(100, 50, _BOTH, _LONG),
    "fig5a": _p(1, 1, _BOTH, _LONG, _FIG5_NOTE),
    "fig5b": _p(10, 1, _BOTH, _LONG, _FIG5_NOTE),
    "fig5c": _p(100, 1, _BOTH, _LONG, _FIG5_NOTE),
    "fig6a": _p(30, 15, _NO_MOL, _LONG),
    "fig6b": _p(100, 50, _NO_MOL, _LONG),
}
