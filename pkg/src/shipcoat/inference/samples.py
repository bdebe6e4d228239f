"""Posterior draws of ``(ln a, ln b)`` per compartment, with CSV/JSON persistence."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from ..fleet import DataError
from ..nhpp import PowerLawParams
from . import diagnostics as diag
from .mcmc import HYPER_NAMES

CSV_BASE = ("compartment_id", "chain", "draw", "ln_a", "ln_b")
KEY_SEP = "/"


def key_to_str(key) -> str:
    ship, comp = key
    if KEY_SEP in ship:
        raise DataError(f"ship id {ship!r} may not contain {KEY_SEP!r} in a samples file")
    return f"{ship}{KEY_SEP}{comp}"


def str_to_key(text: str) -> tuple:
    if KEY_SEP not in text:
        raise DataError(f"compartment key {text!r} is not of the form ship{KEY_SEP}compartment")
    ship, comp = text.split(KEY_SEP, 1)
    return ship, comp


@dataclass
class PosteriorSamples:
    """Draws with layout ``draws[c, chain, draw, (ln_a, ln_b)]``.

    ``hyper`` (hierarchical fits) is ``[chain, draw, 4]`` in the order of
    ``HYPER_NAMES``.  ``log_post`` holds the per-compartment log density the
    sampler used for acceptance.
    """

    keys: tuple
    draws: np.ndarray
    hyper: np.ndarray | None = None
    log_post: np.ndarray | None = None
    mode: str = "bayes"
    meta: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.keys = tuple(tuple(k) for k in self.keys)
        self.draws = np.asarray(self.draws, dtype=float)
        if self.draws.ndim != 4 or self.draws.shape[0] != len(self.keys) or self.draws.shape[3] != 2:
            raise ValueError("draws must have shape (compartments, chains, draws, 2)")
        if self.hyper is not None:
            self.hyper = np.asarray(self.hyper, dtype=float)
            if self.hyper.shape != self.draws.shape[1:3] + (4,):
                raise ValueError("hyper draws must have shape (chains, draws, 4)")
        self._index = {k: i for i, k in enumerate(self.keys)}

    @property
    def n_chains(self) -> int:
        return self.draws.shape[1]

    @property
    def n_draws(self) -> int:
        return self.draws.shape[2]

    def index(self, key) -> int:
        try:
            return self._index[tuple(key)]
        except KeyError:
            raise KeyError(f"compartment {key} not in samples") from None

    def __contains__(self, key) -> bool:
        return tuple(key) in self._index

    def flat(self, key) -> np.ndarray:
        """All draws of one compartment, chains concatenated: shape (n, 2)."""
        return self.draws[self.index(key)].reshape(-1, 2)

    def point_estimate(self, key) -> PowerLawParams:
        """Exponentiated posterior mean of ``(ln a, ln b)``."""
        m = self.flat(key).mean(axis=0)
        return PowerLawParams.from_log(float(m[0]), float(m[1]))

    def compute_diagnostics(self) -> dict:
        out = {"compartments": {}, "hyper": {}}
        if self.n_draws < 4:
            self.diagnostics = out
            return out
        for i, key in enumerate(self.keys):
            out["compartments"][key_to_str(key)] = {
                "ln_a": diag.summarize(self.draws[i, :, :, 0]),
                "ln_b": diag.summarize(self.draws[i, :, :, 1]),
            }
        if self.hyper is not None:
            for j, name in enumerate(HYPER_NAMES):
                out["hyper"][name] = diag.summarize(self.hyper[:, :, j])
        self.diagnostics = out
        return out

    def problems(self) -> list:
        """Parameters failing the R-hat or ESS limits."""
        if not self.diagnostics:
            self.compute_diagnostics()
        bad = []
        for key, params in self.diagnostics.get("compartments", {}).items():
            for name, s in params.items():
                if not diag.converged(s):
                    bad.append(f"{key}:{name}")
        for name, s in self.diagnostics.get("hyper", {}).items():
            if not diag.converged(s):
                bad.append(name)
        return bad

    # persistence ----------------------------------------------------------
    def to_csv(self, target=None, comments=()) -> str:
        buf = io.StringIO()
        for c in comments:
            for line in str(c).splitlines():
                buf.write(f"# {line}\n")
        header = list(CSV_BASE) + (list(HYPER_NAMES) if self.hyper is not None else [])
        buf.write(",".join(header) + "\n")
        for i, key in enumerate(self.keys):
            k = key_to_str(key)
            for ch in range(self.n_chains):
                for d in range(self.n_draws):
                    row = [k, str(ch), str(d), repr(float(self.draws[i, ch, d, 0])),
                           repr(float(self.draws[i, ch, d, 1]))]
                    if self.hyper is not None:
                        row += [repr(float(v)) for v in self.hyper[ch, d]]
                    buf.write(",".join(row) + "\n")
        text = buf.getvalue()
        if target is not None:
            with open(target, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, source, mode: str | None = None) -> "PosteriorSamples":
        if hasattr(source, "read"):
            text = source.read()
        else:
            with open(source, encoding="utf-8") as fh:
                text = fh.read()
        lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        if not lines:
            raise DataError("samples file has no header")
        rows = list(csv.reader(lines))
        header = tuple(rows[0])
        has_hyper = header == CSV_BASE + HYPER_NAMES
        if header != CSV_BASE and not has_hyper:
            raise DataError(f"unexpected samples header {','.join(header)!r}")
        keys, pos = [], {}
        cells = {}
        n_chain = n_draw = 0
        for lineno, r in enumerate(rows[1:], start=2):
            if len(r) != len(header):
                raise DataError(f"samples row {lineno}: expected {len(header)} fields")
            try:
                key = str_to_key(r[0])
                ch, d = int(r[1]), int(r[2])
                vals = [float(v) for v in r[3:]]
            except ValueError as exc:
                raise DataError(f"samples row {lineno}: {exc}") from None
            if key not in pos:
                pos[key] = len(keys)
                keys.append(key)
            cells[(key, ch, d)] = vals
            n_chain = max(n_chain, ch + 1)
            n_draw = max(n_draw, d + 1)
        draws = np.full((len(keys), n_chain, n_draw, 2), np.nan)
        hyper = np.full((n_chain, n_draw, 4), np.nan) if has_hyper else None
        for (key, ch, d), vals in cells.items():
            draws[pos[key], ch, d] = vals[:2]
            if hyper is not None:
                hyper[ch, d] = vals[2:]
        if np.isnan(draws).any():
            raise DataError("samples file has missing (chain, draw) cells")
        return cls(tuple(keys), draws, hyper, mode=mode or ("hier" if has_hyper else "bayes"))

    def public_meta(self) -> dict:
        """Serializable run settings; sampler internals are left out."""
        out = {}
        for k, v in self.meta.items():
            if k in ("kernel", "tuning", "warmup_last", "joint_log_density"):
                continue
            if k == "acceptance":
                v = [float(np.mean(a)) for a in v]
            out[k] = v
        return out

    def summary(self) -> dict:
        if not self.diagnostics:
            self.compute_diagnostics()
        return {
            "mode": self.mode,
            "chains": self.n_chains,
            "draws_per_chain": self.n_draws,
            "compartments": len(self.keys),
            "diagnostics": _jsonable(self.diagnostics),
            "meta": _jsonable(self.public_meta()),
            "problems": self.problems(),
        }

    def diagnostics_json(self, target=None, extra: dict | None = None) -> str:
        doc = dict(extra or {})
        doc.update(self.summary())
        text = json.dumps(doc, indent=2, sort_keys=True, allow_nan=False)
        if target is not None:
            with open(target, "w", encoding="utf-8") as fh:
                fh.write(text + "\n")
        return text


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj
