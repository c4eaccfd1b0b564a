"""Config ingestion, seeded config generation, build and verify orchestration.

A certificate is one JSON document.  Its digest is the sha256 of the
canonical build body, which leaves out ``created``, ``digest`` and the
verifier results.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
import random
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Mapping

from .driver import (
    Config,
    FTask,
    GeneratorMatrix,
    StageRecord,
    StageTask,
    TMatrix,
    prefix_complete_t_matrix,
    run_recursion,
    validate_tasks,
)
from .errors import DependentFamily, Gf2CertError, MalformedCertificate, ParseError, ValidationError
from .gf2 import FinVec, is_independent
from .homomorphism import HTable
from .verify import FAIL, INCONCLUSIVE, PASS, Verdict, run_checks

FORMAT = "gf2cert/1"
EXIT_PASS, EXIT_FAIL, EXIT_INCONCLUSIVE, EXIT_INPUT = 0, 1, 2, 3


# -- config --------------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    config: Config
    T: TMatrix
    tasks: dict[int, StageTask]
    t_spec: dict
    source: dict

    def to_dict(self) -> dict:
        return normalize_config(self)


def _finvec(value, path: str) -> FinVec:
    try:
        return FinVec.parse(value)
    except (ValueError, TypeError) as exc:
        raise ValidationError(path, f"not a finite set: {value!r} ({exc})") from None


def _int(d: Mapping, key: str, path: str, default=None, required=False) -> int | None:
    if key not in d or d[key] is None:
        if required:
            raise ValidationError(f"{path}{key}", "required")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ValidationError(f"{path}{key}", f"expected an integer, got {v!r}")
    return v


def _parse_table(d: Mapping, path: str, stage: int) -> HTable:
    m = _int(d, "m", path + ".", required=True)
    rows_in = d.get("rows")
    if not isinstance(rows_in, Mapping) or not rows_in:
        raise ValidationError(path + ".rows", "expected a nonempty object n -> [entries]")
    rows = {}
    for key, entries in rows_in.items():
        try:
            n = int(key)
        except ValueError:
            raise ValidationError(f"{path}.rows", f"bad index {key!r}") from None
        if not isinstance(entries, list):
            raise ValidationError(f"{path}.rows.{key}", "expected a list of sets")
        rows[n] = tuple(_finvec(v, f"{path}.rows.{key}") for v in entries)
    for n, row in rows.items():
        for v in row:
            if not v.within(stage):
                raise ValidationError(path, "⋃ h_ξ(i,n) ⊆ ξ violated")
    try:
        return HTable(m, rows, label=f"h{stage}")
    except DependentFamily as exc:
        raise ValidationError(path, f"DependentFamily {list(exc.witness)}") from None
    except ValueError as exc:
        raise ValidationError(path, str(exc)) from None


def parse_config(raw: Any, source: str = "<config>") -> RunConfig:
    if not isinstance(raw, Mapping):
        raise ParseError(f"{source}: top level must be an object")
    ver = raw.get("verify", {}) or {}
    if not isinstance(ver, Mapping):
        raise ValidationError("verify", "expected an object")
    k = _int(raw, "k", "", required=True)
    ground = _int(raw, "ground", "", required=True)
    base = _int(raw, "base", "", required=True)
    stages = _int(raw, "stages", "", required=True)
    config = Config(
        k=k,
        ground=ground,
        base=base,
        stages=stages,
        repetition=_int(raw, "repetition", "", 3),
        window_width=_int(ver, "window_width", "verify.", 4),
        density_budget=_int(ver, "density_budget", "verify.", 8),
        combo_limit=_int(ver, "combo_limit", "verify.", 2),
        family_samples=_int(ver, "family_samples", "verify.", 50),
        claim_budget=_int(raw, "claim_budget", ""),
        min_codim=_int(raw, "min_codim", ""),
        seed=_int(raw, "seed", "", 0),
    )
    config.validate()

    t_spec = raw.get("t_matrix", {"mode": "prefix_complete"})
    if not isinstance(t_spec, Mapping):
        raise ValidationError("t_matrix", "expected an object")
    mode = t_spec.get("mode", "prefix_complete" if "rows" not in t_spec else "explicit")
    if mode == "prefix_complete":
        width = _int(t_spec, "width", "t_matrix.", config.window_width)
        tseed = _int(t_spec, "seed", "t_matrix.", config.seed)
        T = prefix_complete_t_matrix(base, ground, width, tseed)
        t_spec = {"mode": mode, "width": width, "seed": tseed}
    elif mode == "explicit":
        rows = t_spec.get("rows")
        if not isinstance(rows, Mapping):
            raise ValidationError("t_matrix.rows", "expected an object xi -> hex")
        try:
            T = TMatrix.from_dict(base, ground, rows)
        except (ValueError, TypeError) as exc:
            raise ValidationError("t_matrix.rows", str(exc)) from None
        t_spec = {"mode": mode}
    else:
        raise ValidationError("t_matrix.mode", f"unknown mode {mode!r}")

    assignments = raw.get("assignments", [])
    if not isinstance(assignments, list):
        raise ValidationError("assignments", "expected a list")
    tasks: dict[int, StageTask] = {}
    for idx, a in enumerate(assignments):
        path = f"assignments[{idx}]"
        if not isinstance(a, Mapping):
            raise ValidationError(path, "expected an object")
        stage = _int(a, "stage", path + ".", required=True)
        if stage in tasks:
            raise ValidationError(path + ".stage", f"stage {stage} assigned twice")
        h = _parse_table(a["h"], path + ".h", stage) if a.get("h") is not None else None
        f = None
        if a.get("f") is not None:
            fd = a["f"]
            if not isinstance(fd, Mapping):
                raise ValidationError(path + ".f", "expected an object")
            f = FTask(
                tuple(_finvec(v, path + ".f.f") for v in fd.get("f", [])),
                tuple(_finvec(v, path + ".f.targets") for v in fd.get("targets", [])),
            )
        tasks[stage] = StageTask(stage, h=h, f=f)
    validate_tasks(config, tasks)
    return RunConfig(config, T, tasks, dict(t_spec), dict(raw))


def load_config(path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ParseError(f"{p}: {exc.strerror or exc}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{p}: {exc}") from None
    return parse_config(raw, str(p))


def normalize_config(rc: RunConfig) -> dict:
    c = rc.config
    assignments = []
    for stage, task in sorted(rc.tasks.items()):
        a: dict[str, Any] = {"stage": stage}
        if task.h is not None:
            a["h"] = {"m": task.h.m, "rows": {str(n): [str(v) for v in task.h.row(n)] for n in task.h.C}}
        if task.f is not None:
            a["f"] = {"f": [str(v) for v in task.f.f], "targets": [str(v) for v in task.f.targets]}
        assignments.append(a)
    return {
        "k": c.k,
        "ground": c.ground,
        "base": c.base,
        "stages": c.stages,
        "repetition": c.repetition,
        "seed": c.seed,
        "min_codim": c.min_codim,
        "claim_budget": c.claim_budget,
        "t_matrix": rc.t_spec,
        "assignments": assignments,
        "verify": {
            "window_width": c.window_width,
            "density_budget": c.density_budget,
            "combo_limit": c.combo_limit,
            "family_samples": c.family_samples,
        },
    }


# -- seeded configs ------------------------------------------------------


def _fresh_table(rng: random.Random, m: int, ns: list[int], fresh: list[int], junk_below: int) -> dict:
    """Rows whose entries each own one fresh index plus optional low junk."""
    rows = {}
    it = iter(fresh)
    for n in ns:
        row = []
        for _ in range(m):
            s = {next(it)}
            if junk_below > 0 and rng.random() < 0.5:
                s |= set(rng.sample(range(junk_below), rng.randint(1, min(2, junk_below))))
            row.append(str(FinVec(s)))
        rows[str(n)] = row
    return rows


def gen_config(seed: int, k: int, stages: int) -> dict:
    """A valid config whose density windows are all satisfiable.

    Tables sit near the top: a table at ``beta`` with window depth
    ``D = stages - beta`` gets ``|C| = 2^(m D)`` rows and the repetition
    cap is ``2^(m (D - 1))``, so every class splits evenly.  Target tasks
    sit at earlier stages.
    """
    if k < 1:
        raise ValidationError("k", "must be a positive integer")
    base = 4
    if stages < base + 2:
        raise ValidationError("stages", f"need at least {base + 2} stages")
    rng = random.Random(seed)
    ground = stages * (k + 1)
    width = 1
    while width < base and (1 << (width + 1)) <= ground - base:
        width += 1

    assignments = []
    # Tables from the top down.  Each row entry owns one fresh index; fresh
    # ranges of different tables are disjoint and junk stays below all of them.
    plan = []
    ceiling = stages
    for m, depth in [(min(k, 2), 1), (1, 3), (1, 2)]:
        beta = stages - depth
        if any(p[0] == beta for p in plan) or beta <= base + 1:
            continue
        need = (1 << (m * depth)) * m
        top = min(beta, ceiling)
        if top - need < 1:
            continue
        plan.append((beta, m, depth, list(range(top - need, top))))
        ceiling = top - need
        if len(plan) == 2:
            break
    if not plan:
        raise ValidationError("stages", "too few stages to host a table")
    plan.sort()
    junk_below = min(ceiling, 4)
    rep = 1
    n_next = 0
    for beta, m, depth, fresh in plan:
        count = 1 << (m * depth)
        rep = max(rep, 1 << (m * (depth - 1)))
        ns = list(range(n_next, n_next + count))
        n_next += count + rng.randint(0, 3)
        assignments.append({"stage": beta, "h": {"m": m, "rows": _fresh_table(rng, m, ns, fresh, junk_below)}})
    first_table = plan[0][0]

    for gamma in range(base + 1, first_table):
        if rng.random() < 0.6:
            continue
        targets = []
        for i in range(k + 1):
            if rng.random() < 0.6:
                targets.append(str(FinVec(rng.sample(range(gamma), rng.randint(1, 2)))))
            else:
                targets.append("{}")
        union = FinVec()
        for t in targets:
            union = union | FinVec.parse(t)
        room = gamma - (len(union) + 4)
        size = min(room, 3 * (k + 1))
        if size < 1:
            continue
        while True:
            f = [FinVec(rng.sample(range(gamma), rng.randint(1, 2))) for _ in range(size)]
            if is_independent(f):
                break
        assignments.append({"stage": gamma, "f": {"f": [str(v) for v in f], "targets": targets}})

    assignments.sort(key=lambda a: a["stage"])
    return {
        "k": k,
        "ground": ground,
        "base": base,
        "stages": stages,
        "repetition": rep,
        "seed": seed,
        "min_codim": None,
        "t_matrix": {"mode": "prefix_complete", "width": width, "seed": seed},
        "assignments": assignments,
        "verify": {"window_width": width, "density_budget": 8, "combo_limit": 2, "family_samples": 50},
    }


# -- certificates --------------------------------------------------------


def canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


UNSIGNED = ("created", "digest", "verdicts", "status")


def body_of(cert: Mapping) -> dict:
    """Fields covered by the digest: the build output without timestamps
    and without verifier results."""
    return {k: v for k, v in cert.items() if k not in UNSIGNED}


def body_digest(cert: Mapping) -> str:
    return hashlib.sha256(canonical(body_of(cert)).encode()).hexdigest()


def overall_status(verdicts) -> str:
    states = [v["verdict"] if isinstance(v, Mapping) else v.verdict for v in verdicts]
    if FAIL in states:
        return FAIL
    if INCONCLUSIVE in states:
        return INCONCLUSIVE
    return PASS


def exit_code(status: str) -> int:
    return {PASS: EXIT_PASS, FAIL: EXIT_FAIL, INCONCLUSIVE: EXIT_INCONCLUSIVE}[status]


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def run_build(rc: RunConfig, created: str | None = None) -> dict:
    """Run the recursion; the result carries traces but no verdicts yet."""
    c = run_recursion(rc.config, rc.T, rc.tasks)
    cert = {
        "format": FORMAT,
        "config": normalize_config(rc),
        "t_matrix": {"digest": rc.T.digest(), "rows": rc.T.to_dict()},
        "generators": {"columns": c.matrix.columns, "rows": c.matrix.to_hex()},
        "stages": [c.records[g].to_dict() for g in sorted(c.records)],
        "verdicts": [],
        "status": "unverified",
        "created": created or _now(),
    }
    cert["digest"] = body_digest(cert)
    return cert


@dataclass
class ParsedCertificate:
    rc: RunConfig
    matrix: GeneratorMatrix
    records: dict[int, StageRecord]


def parse_certificate(cert: Any) -> ParsedCertificate:
    if not isinstance(cert, Mapping):
        raise MalformedCertificate("certificate must be an object")
    for key in ("format", "config", "t_matrix", "generators", "stages"):
        if key not in cert:
            raise MalformedCertificate(f"missing field {key!r}")
    if cert["format"] != FORMAT:
        raise MalformedCertificate(f"unknown format {cert['format']!r}")
    try:
        cfg = dict(cert["config"])
        cfg["t_matrix"] = {"mode": "explicit", "rows": cert["t_matrix"]["rows"]}
        rc = parse_config(cfg, "certificate.config")
        rc = replace(rc, t_spec=dict(cert["config"]["t_matrix"]))
        gen = cert["generators"]
        columns = int(gen["columns"])
        if columns != rc.config.stages or len(gen["rows"]) != rc.config.ground:
            raise MalformedCertificate("generator matrix shape does not match the config")
        matrix = GeneratorMatrix.from_hex(gen["rows"], columns)
        records = {}
        for d in cert["stages"]:
            r = StageRecord.from_dict(d)
            records[r.stage] = r
    except MalformedCertificate:
        raise
    except (Gf2CertError, KeyError, TypeError, ValueError, AttributeError) as exc:
        raise MalformedCertificate(f"{type(exc).__name__}: {exc}") from None
    return ParsedCertificate(rc, matrix, records)


def run_verify(cert: Mapping, window_width: int | None = None) -> tuple[dict, int]:
    """Recompute every verdict from the certificate alone."""
    parsed = parse_certificate(cert)
    rc = parsed.rc
    verdicts: list[Verdict] = run_checks(
        rc.config, rc.T, rc.tasks, parsed.matrix, parsed.records, window_width
    )
    stored = cert.get("digest")
    expect = body_digest(cert)
    verdicts.append(Verdict(
        "digest",
        PASS if stored == expect else FAIL,
        [],
        "build digest matches" if stored == expect else f"stored {stored} != recomputed {expect}",
        expect[:16],
    ))
    out = dict(cert)
    out["verdicts"] = [v.to_dict() for v in verdicts]
    out["status"] = overall_status(verdicts)
    return out, exit_code(out["status"])


def dumps(cert: Mapping) -> str:
    return canonical(dict(cert))


def loads(text: str) -> dict:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedCertificate(f"not valid JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise MalformedCertificate("certificate must be an object")
    return obj
