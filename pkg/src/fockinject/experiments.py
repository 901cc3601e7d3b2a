"""Config-driven experiment runner.

A config is a JSON object with ``"schema_version": 1``, an ``"experiment"``
kind, an explicit integer ``"seed"`` and an ``"output"`` CSV path. Everything
random is drawn from named substreams of that seed, so a rerun of the same
config writes byte-identical CSV files whatever the thread count.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import jsonschema
import numpy as np

from . import analysis
from .channel import identity_injection, permutation_injection
from .circuit import circuit_from_dict, haar_unitary, load_circuit, universal_mesh, with_random_beamsplitters
from .fock import enumerate_basis
from .permanent import NAIVE_CAP, PERMANENT_CAP, gurvits_estimate, permanent_exact, permanent_naive
from .probestim import equivalent_from_pipeline, output_probability, simulate_injection_pipeline

SCHEMA_VERSION = 1
THREADS_ENV = "FOCKINJECT_THREADS"
KINDS = ("dof-curve", "dof-max", "purity-bounds", "birthday", "probestim", "perm-bench")


class ConfigError(Exception):
    """Config does not parse, validate, or reference existing files."""


_PIPELINE_SCHEMA = {
    "type": "object",
    "required": ["stages"],
    "properties": {
        "input": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "stages": {
            "type": "array",
            "items": {
                "type": "object",
                "minProperties": 1,
                "maxProperties": 1,
                "properties": {
                    "circuit": {"type": "object"},
                    "circuit_file": {"type": "string"},
                    "mesh": {
                        "type": "object",
                        "properties": {
                            "style": {"enum": ["triangular-rotations", "rotations-plus-phases"]},
                            "extra_beamsplitters": {"type": "integer", "minimum": 0},
                        },
                        "additionalProperties": False,
                    },
                    "injection": {
                        "type": "object",
                        "required": ["modes"],
                        "properties": {
                            "modes": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
                            "function": {"enum": ["identity", "permutation"]},
                            "permutation": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                        },
                        "additionalProperties": False,
                    },
                },
                "additionalProperties": False,
            },
        },
    },
    "additionalProperties": False,
}

_PRESET_SCHEMA = {
    "type": "object",
    "properties": {
        "injections": {"type": "integer", "minimum": 0},
        "extra_beamsplitters": {"type": "integer", "minimum": 0},
        "measured_mode": {"type": "integer", "minimum": 0},
    },
    "additionalProperties": False,
}

_COMMON = {
    "schema_version": {"const": SCHEMA_VERSION},
    "experiment": {"enum": list(KINDS)},
    "seed": {"type": "integer"},
    "output": {"type": "string", "minLength": 1},
}

_POS = {"type": "integer", "minimum": 1}
_NONNEG = {"type": "integer", "minimum": 0}
_TOL = {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}


def _schema(required: list[str], props: dict) -> dict:
    return {
        "type": "object",
        "required": ["schema_version", "experiment", "seed", "output", *required],
        "properties": {**_COMMON, **props},
        "additionalProperties": False,
    }


SCHEMAS = {
    "dof-curve": _schema(["modes", "photons"], {
        "modes": _POS, "photons": _NONNEG, "tolerance": _TOL,
        "pipeline": _PIPELINE_SCHEMA, "preset": _PRESET_SCHEMA,
        "expect_injection_gain": {"type": "boolean"},
    }),
    "dof-max": _schema(["modes", "photons", "trials"], {
        "modes": _POS, "photons": _NONNEG, "tolerance": _TOL, "trials": _POS,
        "pipeline": _PIPELINE_SCHEMA, "preset": _PRESET_SCHEMA,
        "expect_injection_gain": {"type": "boolean"},
    }),
    "purity-bounds": _schema(["modes", "photons", "layers", "trials"], {
        "modes": _POS, "photons": _NONNEG, "trials": _POS,
        "layers": {"type": "array", "items": _POS, "minItems": 1},
        "measured_mode": _NONNEG,
        "input": {"type": "array", "items": _NONNEG},
    }),
    "birthday": _schema(["modes", "photons", "samples"], {
        "modes": {"oneOf": [_POS, {"type": "array", "items": _POS, "minItems": 1}]},
        "photons": _POS, "samples": _POS,
    }),
    "probestim": _schema(["modes", "input", "injections"], {
        "modes": _POS, "injections": _NONNEG,
        "input": {"type": "array", "items": _NONNEG},
        "measured_mode": _NONNEG,
        "method": {"enum": ["exact", "gurvits"]},
        "samples": _POS,
        "cross_check": {"type": "boolean"},
        "records": {"type": "string", "minLength": 1},
    }),
    "perm-bench": _schema(["sizes", "trials", "samples"], {
        "sizes": {"type": "array", "items": {"type": "integer", "minimum": 0, "maximum": 20}, "minItems": 1},
        "trials": _POS, "samples": _POS,
    }),
}


def substream(seed: int, name: str) -> list[int]:
    """Entropy for a named purpose; feed it to SeedSequence or default_rng."""
    return [int(seed) & 0xFFFFFFFFFFFFFFFF, zlib.crc32(name.encode())]


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


# --- config loading ------------------------------------------------------------------

def load_config(path) -> dict:
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    validate_config(cfg, base=path.parent)
    return cfg


def validate_config(cfg: Any, base: Path = Path(".")) -> None:
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    kind = cfg.get("experiment")
    if kind not in SCHEMAS:
        raise ConfigError(f"unknown experiment kind {kind!r}; expected one of {list(KINDS)}")
    try:
        jsonschema.validate(cfg, SCHEMAS[kind])
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"invalid config: {exc.message} at {list(exc.absolute_path)}") from exc
    if "pipeline" in cfg and "preset" in cfg:
        raise ConfigError("give either 'pipeline' or 'preset', not both")
    if kind in ("dof-curve", "dof-max"):
        build_pipeline(cfg, base)  # surfaces bad circuits and missing files now
    if kind == "probestim":
        m = cfg["modes"]
        if len(cfg["input"]) != m:
            raise ConfigError(f"input has {len(cfg['input'])} entries, expected {m}")
        if cfg.get("measured_mode", m - 1) >= m:
            raise ConfigError("measured_mode outside the mode range")
        if sum(cfg["input"]) * (cfg["injections"] + 1) > PERMANENT_CAP:
            raise ConfigError(f"photons x (injections + 1) exceeds the permanent cap {PERMANENT_CAP}")
        if cfg.get("method", "exact") == "gurvits" and "samples" not in cfg:
            raise ConfigError("gurvits method needs 'samples'")
    if kind == "purity-bounds":
        m, n = cfg["modes"], cfg["photons"]
        if "input" in cfg and (len(cfg["input"]) != m or sum(cfg["input"]) != n):
            raise ConfigError("input must be an n-photon state on m modes")
        if cfg.get("measured_mode", 0) >= m:
            raise ConfigError("measured_mode outside the mode range")
    if kind == "birthday":
        ms = cfg["modes"] if isinstance(cfg["modes"], list) else [cfg["modes"]]
        if any(cfg["photons"] > m for m in ms):
            raise ConfigError("birthday check needs photons <= modes")


def build_pipeline(cfg: dict, base: Path = Path(".")) -> analysis.PipelineCircuit:
    m, n = cfg["modes"], cfg["photons"]
    if "pipeline" not in cfg:
        preset = cfg.get("preset", {})
        mm = preset.get("measured_mode", 0)
        if mm >= m:
            raise ConfigError("preset measured_mode outside the mode range")
        if m < 2:
            raise ConfigError("the preset pipeline needs at least two modes")
        return analysis.layered_mesh_pipeline(
            m, n, preset.get("injections", 2), preset.get("extra_beamsplitters", 5),
            substream(cfg["seed"], "pipeline"), mm,
        )
    desc = cfg["pipeline"]
    stages = []
    try:
        for idx, entry in enumerate(desc["stages"]):
            if "circuit" in entry:
                stages.append(circuit_from_dict(entry["circuit"]))
            elif "circuit_file" in entry:
                p = base / entry["circuit_file"]
                if not p.is_file():
                    raise ConfigError(f"circuit file {p} does not exist")
                stages.append(load_circuit(p))
            elif "mesh" in entry:
                spec = entry["mesh"]
                block = universal_mesh(m, spec.get("style", "triangular-rotations"))
                extra = spec.get("extra_beamsplitters", 0)
                if extra:
                    block = with_random_beamsplitters(block, extra, substream(cfg["seed"], f"mesh-{idx}"))
                stages.append(block)
            else:
                inj = entry["injection"]
                if inj.get("function", "identity") == "identity":
                    stages.append(identity_injection(inj["modes"]))
                else:
                    stages.append(permutation_injection(inj["modes"], inj.get("permutation", [])))
        state = desc.get("input", [n] + [0] * (m - 1))
        return analysis.PipelineCircuit(m, n, tuple(stages), tuple(state))
    except ConfigError:
        raise
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"invalid pipeline: {exc}") from exc


# --- results ---------------------------------------------------------------------------

@dataclass
class Outcome:
    """Artifacts and assertion results of one run."""

    tables: dict[str, tuple[list[str], list[list[Any]]]] = field(default_factory=dict)
    extra_files: dict[str, str] = field(default_factory=dict)
    checks: list[tuple[str, bool, str]] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def check(self, name: str, ok: bool, detail: str) -> None:
        self.checks.append((name, bool(ok), detail))

    @property
    def passed(self) -> bool:
        return all(ok for _, ok, _ in self.checks)


def fmt(x: Any) -> str:
    """Round-trip CSV formatting; refuses non-finite floats."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        if not math.isfinite(float(x)):
            raise ValueError(f"non-finite value {x} in CSV output")
        return repr(float(x))
    if x is None:
        return ""
    return str(x)


def render_csv(header: list[str], rows: list[list[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def _state_label(s) -> str:
    return " ".join(str(x) for x in s)


# --- runners ---------------------------------------------------------------------------

def _expect_gain(cfg: dict) -> bool:
    # injections are only guaranteed to add directions in the preset layout
    return cfg.get("expect_injection_gain", "pipeline" not in cfg)


def _run_dof_curve(cfg: dict, base: Path) -> Outcome:
    out = Outcome()
    pc = build_pipeline(cfg, base)
    tol = cfg.get("tolerance", analysis.DEFAULT_RANK_TOL)
    m = pc.modes
    theta_seed = substream(cfg["seed"], "theta")
    variants = [("with-injection", pc)] if pc.has_injection else []
    variants.append(("without-injection", pc.without_injections()))
    rows, finals = [], {}
    curves = {}
    for name, p in variants:
        curve = analysis.dof_curve(p, theta_seed, tol)
        curves[name] = curve
        for stage, pt in enumerate(curve):
            rows.append([name, stage, pt.gate_count, pt.kind, pt.rank])
        finals[name] = curve[-1].rank
    out.tables["output"] = (["variant", "stage", "gate_count", "kind", "rank"], rows)

    plain = curves["without-injection"]
    out.check("start-at-zero", all(c[0].rank == 0 for c in curves.values()), "first point has rank 0")
    peak = max(pt.rank for pt in plain)
    out.check("linear-optics-limit", peak <= m * m - 1, f"max rank without injection {peak} <= {m * m - 1}")
    if "pipeline" not in cfg:
        extra = cfg.get("preset", {}).get("extra_beamsplitters", 5)
        mesh_gates = m * (m - 1) // 2
        block_len = mesh_gates + extra
        flat = True
        b = 0
        while (b + 1) * block_len <= plain[-1].gate_count:
            start = b * block_len + mesh_gates
            seg = [pt.rank for pt in plain if start <= pt.gate_count <= (b + 1) * block_len]
            flat &= len(set(seg)) == 1
            b += 1
        out.check("extra-beamsplitter-plateau", flat,
                  f"rank constant across the {extra} extra beam-splitters of every block")
    if "with-injection" in finals and _expect_gain(cfg):
        out.check("injection-breaks-limit", finals["with-injection"] > finals["without-injection"],
                  f"final rank {finals['with-injection']} with injection vs {finals['without-injection']} without")
    return out


def _run_dof_max(cfg: dict, base: Path) -> Outcome:
    out = Outcome()
    pc = build_pipeline(cfg, base)
    tol = cfg.get("tolerance", analysis.DEFAULT_RANK_TOL)
    m = pc.modes
    variants = [("with-injection", pc)] if pc.has_injection else []
    variants.append(("without-injection", pc.without_injections()))
    rows, best = [], {}
    for name, p in variants:
        reports = analysis.dof_trials(p, cfg["trials"], substream(cfg["seed"], f"theta-{name}"), tol,
                                      workers=thread_count())
        ranks = [r.rank for r in reports]
        for i, r in enumerate(reports):
            rows.append([name, i, r.rank, float(r.singular_values[0]) if r.singular_values.size else 0.0])
        best[name] = max(ranks)
        out.check(f"constant-rank[{name}]", len(set(ranks)) == 1, f"ranks across draws: {sorted(set(ranks))}")
    out.tables["output"] = (["variant", "trial", "rank", "sigma_max"], rows)
    out.check("linear-optics-limit", best["without-injection"] <= m * m - 1,
              f"DoF_max without injection {best['without-injection']} <= {m * m - 1}")
    if "with-injection" in best and _expect_gain(cfg):
        out.check("injection-breaks-limit", best["with-injection"] > best["without-injection"],
                  f"DoF_max {best['with-injection']} with injection vs {best['without-injection']} without")
    return out


def _run_purity(cfg: dict, base: Path) -> Outcome:
    out = Outcome()
    m, n = cfg["modes"], cfg["photons"]
    rows = []
    for L in cfg["layers"]:
        rep = analysis.purity_bound_experiment(
            m, n, L, cfg["trials"], substream(cfg["seed"], f"layers-{L}"),
            input_state=cfg.get("input"), measured_mode=cfg.get("measured_mode", 0),
            workers=thread_count(),
        )
        for i, g in enumerate(rep.purities):
            rows.append([L, i, float(g), rep.worst_case_bound, rep.haar_bound])
        out.check(f"worst-case-bound[L={L}]", rep.worst_case_ok,
                  f"min purity {rep.purities.min():.6g} >= {rep.worst_case_bound:.6g}")
        if rep.haar_bound is not None:
            out.check(f"no-collision-bound[L={L}]", rep.haar_ok,
                      f"mean {rep.mean:.6g} - 3*se {3 * rep.std_error:.3g} >= {rep.haar_bound:.6g}")
        if L == 1:
            gap = float(np.max(np.abs(rep.purities - rep.first_layer_sum_sq)))
            out.check("single-layer-purity-law", gap <= 1e-10, f"max |purity - sum Pr[i]^2| = {gap:.3g}")
    out.tables["output"] = (["layers", "trial", "purity", "worst_case_bound", "haar_bound"], rows)
    return out


def _run_birthday(cfg: dict, base: Path) -> Outcome:
    out = Outcome()
    ms = cfg["modes"] if isinstance(cfg["modes"], list) else [cfg["modes"]]
    n = cfg["photons"]
    rows, means = [], {}
    for m in ms:
        rep = analysis.birthday_check(m, n, cfg["samples"], substream(cfg["seed"], f"haar-{m}"),
                                      workers=thread_count())
        means[m] = rep.mean
        for i, c in enumerate(rep.collision_probabilities):
            rows.append([m, n, i, float(c), rep.bound])
        out.check(f"birthday-bound[m={m}]", rep.ok, f"mean collision {rep.mean:.6g} < {rep.bound:.6g}")
    for m in sorted(means):
        if 2 * m in means and n > 1:
            ratio = means[m] / means[2 * m]
            # halving within a factor of two: ratio in [1, 4]
            out.check(f"birthday-trend[m={m}->{2 * m}]", 1.0 <= ratio <= 4.0, f"mean ratio {ratio:.4g}")
    out.tables["output"] = (["modes", "photons", "draw", "collision_probability", "bound"], rows)
    return out


def _run_probestim(cfg: dict, base: Path) -> Outcome:
    out = Outcome()
    m, k = cfg["modes"], cfg["injections"]
    t = tuple(cfg["input"])
    q = cfg.get("measured_mode", m - 1)
    rng = np.random.default_rng(substream(cfg["seed"], "layers"))
    layers = [haar_unitary(m, rng) for _ in range(k + 1)]
    em = equivalent_from_pipeline(layers, q)
    basis = enumerate_basis(m, sum(t))
    method = cfg.get("method", "exact")
    rows, records = [], []
    exact = np.array([output_probability(em, t, s).value for s in basis.states])
    if method == "exact":
        for s, v in zip(basis.states, exact):
            rows.append([_state_label(s), "exact", float(v), 0.0, float(v)])
            records.append({"t": list(t), "s": list(s), "method": "exact", "value": float(v), "std_error": 0.0})
    else:
        hits = 0
        for idx, s in enumerate(basis.states):
            est = output_probability(em, t, s, "gurvits", cfg["samples"],
                                     seed=substream(cfg["seed"], f"gurvits-{idx}"))
            rows.append([_state_label(s), est.method, est.value, est.std_error, est.bias_corrected])
            records.append(est.to_record(t, s))
            hits += abs(est.value - exact[idx]) <= 5 * est.std_error + 1e-15
        frac = hits / len(basis.states)
        out.check("gurvits-within-5se", frac >= 0.99, f"{hits}/{len(basis.states)} outputs within 5 standard errors")
    total = float(exact.sum())
    out.check("normalisation", abs(total - 1.0) <= 1e-8, f"sum of exact probabilities {total!r}")
    if cfg.get("cross_check", True):
        direct = simulate_injection_pipeline(layers, t, q)
        gap = float(np.max(np.abs(direct - exact)))
        out.check("channel-equivalence", gap <= 1e-9, f"max |pattern sum - channel simulation| = {gap:.3g}")
    out.tables["output"] = (["s", "method", "value", "std_error", "bias_corrected"], rows)
    if "records" in cfg:
        out.extra_files[cfg["records"]] = json.dumps(records, indent=1) + "\n"
    return out


def _run_perm_bench(cfg: dict, base: Path) -> Outcome:
    out = Outcome()
    rows = []
    hits = total = 0
    worst = 0.0
    permanent_exact(np.eye(2))  # load the compiled kernel outside the timed region
    for n in cfg["sizes"]:
        elapsed = 0.0
        for trial in range(cfg["trials"]):
            U = haar_unitary(n, np.random.default_rng(substream(cfg["seed"], f"matrix-{n}-{trial}"))) if n else np.zeros((0, 0))
            t0 = time.perf_counter()
            exact = permanent_exact(U)
            elapsed += time.perf_counter() - t0
            if n <= min(NAIVE_CAP, 8):
                ref = permanent_naive(U)
                worst = max(worst, abs(exact - ref) / max(abs(ref), 1e-300))
            est = gurvits_estimate(U, cfg["samples"], seed=substream(cfg["seed"], f"gurvits-{n}-{trial}"))
            err = abs(est.value - exact)
            total += 1
            hits += err <= 5 * est.empirical_std_error + 1e-12
            rows.append([n, trial, exact.real, exact.imag, est.value.real, est.value.imag,
                         est.empirical_std_error, err])
        # wall-clock numbers are not reproducible, so they go to stdout only
        out.notes.append(f"permanent_exact n={n}: {elapsed / cfg['trials'] * 1e3:.3f} ms per call")
    out.tables["output"] = (["n", "trial", "exact_re", "exact_im", "gurvits_re", "gurvits_im",
                             "std_error", "abs_error"], rows)
    out.check("exact-vs-naive", worst <= 1e-10, f"max relative error {worst:.3g}")
    out.check("gurvits-within-5se", hits >= 0.99 * total, f"{hits}/{total} estimates within 5 standard errors")
    return out


RUNNERS: dict[str, Callable[[dict, Path], Outcome]] = {
    "dof-curve": _run_dof_curve,
    "dof-max": _run_dof_max,
    "purity-bounds": _run_purity,
    "birthday": _run_birthday,
    "probestim": _run_probestim,
    "perm-bench": _run_perm_bench,
}


def execute(cfg: dict, base: Path = Path(".")) -> Outcome:
    return RUNNERS[cfg["experiment"]](cfg, base)


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_artifacts(cfg: dict, outcome: Outcome, base: Path = Path(".")) -> list[Path]:
    """Render everything first, then write; a rendering error leaves no files behind."""
    rendered: dict[Path, str] = {}
    for key, (header, rows) in outcome.tables.items():
        target = cfg["output"] if key == "output" else key
        rendered[base / target] = render_csv(header, rows)
    for target, text in outcome.extra_files.items():
        rendered[base / target] = text
    for path, text in rendered.items():
        _atomic_write(path, text)
    return list(rendered)
