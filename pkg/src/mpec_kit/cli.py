"""``mpec-kit`` command-line front end."""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

from . import __version__
from .cones import (
    candidate_multipliers,
    critical_multiplier_vertices,
    critical_multipliers,
    directional_critical_set,
    dual_critical_lp,
    linearization_map,
    linearized_cone,
    require_multiplier,
)
from .expr import ExprError, format_rational, to_rational
from .instance import SchemaError, active_sets, as_point, feasibility_report, read_instance
from .multipliers import multiplier_set
from .oracle import PROFILES, brute_lp, random_instance
from .polyhedra import (
    ConeUnion,
    EnumerationLimitError,
    LpProblem,
    Polyhedron,
    enumerate_extreme_rays,
    enumerate_vertices,
    solve_lp,
)
from .stationarity import (
    NCP_SOURCE,
    full_pd_stationarity,
    kkt_reformulate,
    ncp_index_systems,
    nlp_linearized_cone,
    primal_stationarity,
)
from .tangent import (
    DEFAULT_RADII,
    check_full_cq,
    check_nlp_basic_cq,
    convex_hull_union,
    ray_matches_clusters,
    sample_tangent_directions,
    tangent_cone,
)

SCHEMA = "report-v1"
EXIT_OK, EXIT_ERROR, EXIT_INCONCLUSIVE = 0, 1, 2


# --------------------------------------------------------------------------
# report model


@dataclass
class AnalysisReport:
    command: str
    instance_digest: str | None
    point: list[str] | None
    sections: dict[str, Any] = field(default_factory=dict)
    provenance: list[str] = field(default_factory=list)
    asserted_cqs: list[str] = field(default_factory=list)
    inconclusive: bool = False
    heuristic: bool = False

    @property
    def status(self) -> str:
        if self.heuristic:
            return "heuristic"
        return "inconclusive" if self.inconclusive else "ok"

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA,
            "command": self.command,
            "instance_digest": self.instance_digest,
            "point": self.point,
            "asserted_cqs": self.asserted_cqs,
            "status": self.status,
            "sections": self.sections,
            "provenance": self.provenance,
        }

    @classmethod
    def from_json(cls, doc: dict) -> AnalysisReport:
        if doc.get("schema") != SCHEMA:
            raise ValueError(f"unsupported report schema {doc.get('schema')!r}")
        return cls(
            doc["command"],
            doc["instance_digest"],
            doc["point"],
            doc["sections"],
            doc["provenance"],
            doc["asserted_cqs"],
            doc["status"] != "ok",
            doc["status"] == "heuristic",
        )


def q(v) -> str:
    return format_rational(Fraction(v))


def vec(v) -> list[str]:
    return [q(x) for x in v]


def idx(ix) -> list[int]:
    return [i + 1 for i in ix]


def polyhedron_doc(P: Polyhedron) -> dict:
    return {
        "dim": P.dim,
        "inequalities": [{"a": vec(a), "b": q(b)} for a, b in zip(P.A, P.b)],
        "equalities": [{"a": vec(e), "b": q(d)} for e, d in zip(P.E, P.d)],
    }


def cone_doc(C) -> dict:
    r = enumerate_extreme_rays(C)
    return {
        "rays": [vec(x) for x in r.rays],
        "lineality": [vec(x) for x in r.lineality],
        "inequalities": [vec(a) for a in C.A],
        "equalities": [vec(e) for e in C.E],
    }


def union_doc(u: ConeUnion) -> list[dict]:
    return [cone_doc(p) for p in u.pieces]


# --------------------------------------------------------------------------
# rendering


def emit_report(r: AnalysisReport, fmt: str = "json") -> str:
    doc = r.to_json()
    if fmt == "json":
        return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False)
    if fmt != "text":
        raise ValueError(f"unknown format {fmt!r}")
    lines = [f"mpec-kit {doc['command']}  [{doc['schema']}]  status: {doc['status']}"]
    if doc["instance_digest"]:
        lines.append(f"instance digest: {doc['instance_digest']}")
    if doc["point"] is not None:
        lines.append(f"point: ({', '.join(doc['point'])})")
    if doc["asserted_cqs"]:
        lines.append(f"user-asserted CQs (not verified): {', '.join(doc['asserted_cqs'])}")
    for name in sorted(doc["sections"]):
        lines.append("")
        lines.append(f"== {name} ==")
        _render(doc["sections"][name], lines, 0)
    if doc["provenance"]:
        lines.append("")
        lines.append("== provenance ==")
        lines += [f"- {p}" for p in doc["provenance"]]
    return "\n".join(lines)


def _is_vector(v) -> bool:
    return isinstance(v, list) and all(isinstance(x, str) for x in v)


def _render(node, lines, depth):
    pad = "  " * depth
    if isinstance(node, dict):
        if "rays" in node and "lineality" in node:
            rays = ", ".join("(" + ", ".join(r) + ")" for r in node["rays"]) or "none"
            lin = ", ".join("(" + ", ".join(r) + ")" for r in node["lineality"]) or "none"
            lines.append(f"{pad}rays: {rays}")
            lines.append(f"{pad}lineality: {lin}")
            rest = {k: v for k, v in node.items() if k not in ("rays", "lineality")}
            if rest:
                _render(rest, lines, depth)
            return
        for k in sorted(node):
            v = node[k]
            if isinstance(v, (dict,)) or (isinstance(v, list) and v and not _is_vector(v)):
                lines.append(f"{pad}{k}:")
                _render(v, lines, depth + 1)
            else:
                lines.append(f"{pad}{k}: {_scalar(v)}")
    elif isinstance(node, list):
        for i, item in enumerate(node):
            if isinstance(item, (dict, list)) and not _is_vector(item):
                lines.append(f"{pad}[{i + 1}]")
                _render(item, lines, depth + 1)
            else:
                lines.append(f"{pad}- {_scalar(item)}")
    else:
        lines.append(f"{pad}{_scalar(node)}")


def _scalar(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "yes" if v else "no"
    if _is_vector(v):
        return "(" + ", ".join(v) + ")"
    if isinstance(v, list):
        return "[" + ", ".join(_scalar(x) for x in v) + "]" if v else "[]"
    return str(v)


# --------------------------------------------------------------------------
# argument helpers


def parse_vector(text: str) -> tuple[Fraction, ...]:
    text = text.strip()
    if not text:
        return ()
    try:
        return tuple(to_rational(t.strip()) for t in text.split(","))
    except (ValueError, ZeroDivisionError, TypeError):
        raise argparse.ArgumentTypeError(f"expected comma-separated rationals like 1,-1/2,0.25; got {text!r}")


def _load_multiplier_list(choice: str, inst, z):
    if choice == "extreme":
        lams, note = candidate_multipliers(inst, z)
        return lams, note
    if choice.startswith("list:"):
        path = choice[5:]
        with open(path) as fh:
            raw = json.load(fh)
        if not isinstance(raw, list):
            raise ValueError(f"{path}: expected a JSON list of multiplier vectors")
        lams = [tuple(to_rational(v) for v in lam) for lam in raw]
        for lam in lams:
            require_multiplier(inst, z, lam)
        return lams, f"user-supplied multiplier list from {path}"
    raise ValueError("--multipliers must be 'extreme' or 'list:<file>'")


def _base(args, inst, z, command) -> AnalysisReport:
    return AnalysisReport(
        command,
        inst.digest(),
        vec(as_point(inst, z).z),
        asserted_cqs=sorted(inst.asserted_cqs),
    )


def _require_point(args, inst):
    if args.point is None:
        raise ValueError("--point is required (comma-separated x then y entries)")
    return as_point(inst, args.point)


# --------------------------------------------------------------------------
# commands


def cmd_check(args) -> AnalysisReport:
    inst = read_instance(args.instance)
    z = _require_point(args, inst)
    r = _base(args, inst, z, "check")
    fr = feasibility_report(inst, z)
    r.sections["feasibility"] = {
        "feasible": fr.feasible,
        "in_Z": fr.in_Z,
        "g_feasible": fr.g_feasible,
        "complementarity": fr.complementarity,
        "multiplier_exists": fr.multiplier_exists,
        "certification": fr.certification,
        "violations": fr.violations,
    }
    sec = {"active": idx(active_sets(inst, z, ncp=False).active), "ncp_form": inst.ncp_form}
    if inst.ncp_form and fr.feasible:
        s = active_sets(inst, z)
        sec.update(alpha=idx(s.alpha), beta=idx(s.beta), gamma=idx(s.gamma))
    r.sections["active_sets"] = sec
    if not inst.ncp_form:
        r.provenance.append("lower-level feasibility is KKT-certified; lower-level convexity is not checked")
    return r


def _multiplier_section(ma) -> dict:
    doc = {
        "set": polyhedron_doc(ma.set),
        "empty": ma.is_empty,
        "singleton": ma.is_singleton,
        "extreme_points": [vec(v) for v in ma.extreme_points],
        "recession_rays": [vec(v) for v in ma.rays],
        "licq": ma.licq.value,
        "mfcq": ma.mfcq.value,
        "smfcq": ma.smfcq.value,
        "strongly_nondegenerate": ma.strongly_nondegenerate.value,
    }
    if ma.is_empty:
        doc["summary"] = "M(z) = ∅"
    return doc


def cmd_multipliers(args) -> AnalysisReport:
    inst = read_instance(args.instance)
    z = _require_point(args, inst)
    r = _base(args, inst, z, "multipliers")
    ma = multiplier_set(inst, z)
    r.sections["multipliers"] = _multiplier_section(ma)
    r.sections["active_sets"] = {"active": idx(ma.active)}
    r.provenance += [f"strong nondegeneracy test: {n}" for n in ma.notes]
    return r


def _lp_face_doc(res) -> dict:
    doc = {"status": res.status}
    if res.status == "optimal":
        doc["value"] = q(res.value)
        doc["optimal_face"] = polyhedron_doc(res.face)
    return doc


def cmd_critical(args) -> AnalysisReport:
    inst = read_instance(args.instance)
    z = _require_point(args, inst)
    if args.dx is None:
        raise ValueError("--dx is required")
    dx = args.dx
    r = _base(args, inst, z, "critical")
    r.sections["dx"] = vec(dx)
    ma = multiplier_set(inst, z)
    if ma.is_empty:
        r.sections["critical_multipliers"] = {"summary": "M(z) = ∅", "status": "not applicable"}
        return r
    cm = critical_multipliers(inst, z, dx)
    sec = _lp_face_doc(cm)
    verts = critical_multiplier_vertices(inst, z, dx) if cm.status == "optimal" else []
    sec["vertices"] = [vec(v) for v in verts]
    r.sections["critical_multipliers"] = sec
    r.sections["dual_critical_lp"] = _lp_face_doc(dual_critical_lp(inst, z, dx))
    lams = [args.lam] if args.lam is not None else verts
    dcs = []
    for lam in lams:
        lam = require_multiplier(inst, z, lam)
        K = directional_critical_set(inst, z, lam, dx)
        sol = linearization_map(inst, z, lam, dx)
        dcs.append({
            "lambda": vec(lam),
            "directional_critical_set": polyhedron_doc(K),
            "linearization_map": [
                {"active_face": idx(p.pattern), "piece": polyhedron_doc(p.piece)} for p in sol.pieces
            ],
        })
    r.sections["directional_critical_sets"] = dcs
    r.provenance.append(
        "multipliers examined: " + ("user-supplied lambda" if args.lam is not None else "vertices of M^c(z; dx)")
    )
    return r


def _tangent_section(T) -> dict:
    return {
        "status": T.status,
        "pieces": union_doc(T.cone),
        "branches": [
            {"label": b.label, "certified": bc.certified, "notes": bc.notes} for b, bc in T.branches
        ],
        "notes": T.notes,
    }


def cmd_cones(args) -> AnalysisReport:
    inst = read_instance(args.instance)
    z = _require_point(args, inst)
    r = _base(args, inst, z, "cones")
    lams, note = _load_multiplier_list(args.multipliers, inst, z)
    cq = check_full_cq(inst, z, lams, semantics=note)
    T = cq.tangent
    r.sections["tangent_cone"] = _tangent_section(T)
    r.sections["linearized_cone"] = {"multipliers": [vec(v) for v in lams], "pieces": union_doc(cq.linearized)}
    r.sections["tangent_hull"] = cone_doc(convex_hull_union(T.cone)) if T.cone.pieces else None
    r.sections["cq"] = {
        "verdict": cq.verdict,
        "witness": vec(cq.witness) if cq.witness is not None else None,
        "witness_in": {"first": "T only", "second": "L only"}.get(cq.side) if cq.side else None,
        "semantics": cq.semantics,
    }
    if not lams:
        r.sections["cq"]["summary"] = "M(z) = ∅, so the linearized cone is empty"
    r.provenance.append(f"linearized cone built from: {note}")
    if args.sample:
        s = sample_tangent_directions(inst, z, args.samples, args.radii, args.seed)
        rays = [tuple(x) for p in T.cone.pieces for x in enumerate_extreme_rays(p).rays]
        a, b = ray_matches_clusters(rays, s.clusters)
        r.sections["sampling"] = {
            "seed": args.seed,
            "radii": [repr(x) for x in args.radii],
            "clusters_float": [[f"{x:.6g}" for x in c] for c in s.clusters],
            "rays_confirmed": a,
            "clusters_explained": b,
            "failures": s.failures,
        }
        r.provenance.append("sampling is floating-point evidence only and never feeds exact verdicts")
    if cq.verdict == "inconclusive":
        r.inconclusive = True
    if not T.certified:
        r.heuristic = r.inconclusive = True
    return r


def cmd_stationarity(args) -> AnalysisReport:
    inst = read_instance(args.instance)
    z = _require_point(args, inst)
    r = _base(args, inst, z, "stationarity")
    lams, note = _load_multiplier_list(args.multipliers, inst, z)
    if not lams:
        r.sections["stationarity"] = {"verdict": "not applicable", "summary": "no KKT multiplier: M(z) = ∅"}
        return r
    L = linearized_cone(inst, z, lams)
    pv = primal_stationarity(inst, z, L)
    r.sections["primal_on_linearized_cone"] = {
        "stationary": pv.stationary,
        "counterexample": vec(pv.counterexample) if pv.counterexample else None,
    }
    if inst.ncp_form or inst.l == 0:
        T = tangent_cone(inst, z)
        tv = primal_stationarity(inst, z, T.cone)
        r.sections["primal_on_tangent_cone"] = {
            "status": T.status,
            "stationary": tv.stationary,
            "counterexample": vec(tv.counterexample) if tv.counterexample else None,
        }
        if not T.certified:
            r.heuristic = r.inconclusive = True
    rep = full_pd_stationarity(inst, z, lams, note)
    sec = {"verdict": rep.verdict, "systems_solved": len(rep.systems), "hypothesis": rep.hypothesis,
           "consistent_with_primal": rep.stationary == pv.stationary}
    if args.all_partitions:
        systems = []
        for part, cert in rep.systems:
            d = {
                "lambda": vec(part.lam),
                "alpha": idx(part.alpha),
                "alpha_bar": idx(part.alpha_bar),
                "i_plus": idx(part.i_plus),
                "feasible": cert is not None,
            }
            if cert is not None:
                d["certificate"] = {"zeta": vec(cert.zeta), "eta": vec(cert.eta), "pi": vec(cert.pi)}
            systems.append(d)
        sec["systems"] = systems
        if inst.ncp_form:
            beta = active_sets(inst, z).beta
            ncp = []
            from itertools import combinations

            for k in range(len(beta) + 1):
                for S in combinations(beta, k):
                    system, cert = ncp_index_systems(inst, z, S)
                    ncp.append({
                        "beta_1": idx(S),
                        "rows": system.describe(),
                        "feasible": cert is not None,
                        "pi": vec(cert.pi) if cert is not None else None,
                    })
            r.sections["ncp_systems"] = ncp
            r.provenance.append(NCP_SOURCE)
    r.sections["primal_dual"] = sec
    r.provenance.append(f"multipliers: {note}")
    r.provenance.append("primal-dual verdict is exact under CRCQ plus the extreme CQ (finite multiplier list)")
    return r


def cmd_kkt(args) -> AnalysisReport:
    inst = read_instance(args.instance)
    nlp = kkt_reformulate(inst)
    r = AnalysisReport("kkt-reformulate", inst.digest(), None, asserted_cqs=sorted(inst.asserted_cqs))
    r.sections["nlp"] = nlp.to_json()
    if args.point is not None:
        pt = args.point
        r.point = vec(pt)
        r.sections["nlp_linearized_cone"] = cone_doc(nlp_linearized_cone(nlp, pt))
        cq = check_nlp_basic_cq(nlp, pt)
        r.sections["nlp_tangent_cone"] = _tangent_section(cq.tangent)
        r.sections["nlp_basic_cq"] = {
            "verdict": cq.verdict,
            "witness": vec(cq.witness) if cq.witness is not None else None,
        }
        if cq.verdict == "inconclusive":
            r.inconclusive = True
        if not cq.tangent.certified:
            r.heuristic = r.inconclusive = True
    return r


def cmd_cross_check(args) -> AnalysisReport:
    if args.instance:
        inst = read_instance(args.instance)
        z = _require_point(args, inst)
    else:
        inst, z = random_instance(args.random, args.profile)
    r = _base(args, inst, z, "cross-check")
    diffs = []
    checks = 0
    ma = multiplier_set(inst, z)
    n = inst.n
    dirs = [tuple(Fraction(s if j == i else 0) for j in range(n)) for i in range(n) for s in (1, -1)] or [()]
    for dx in dirs:
        from .cones import _dx_offsets  # objective of the critical multiplier LP

        c = _dx_offsets(inst, z, dx)
        if inst.l <= 4 and len(ma.set.A) + len(ma.set.E) <= 10:
            a = solve_lp(LpProblem(c, ma.set, "max"))
            b = brute_lp(LpProblem(c, ma.set, "max"))
            checks += 1
            if (a.status, a.value) != (b.status, b.value):
                diffs.append(f"multiplier LP dx={vec(dx)}: simplex {a.status} {a.value}, brute {b.status} {b.value}")
        if not ma.is_empty and inst.m <= 4:
            primal = critical_multipliers(inst, z, dx)
            dual = dual_critical_lp(inst, z, dx)
            checks += 1
            if primal.status == "optimal" and (dual.status != "optimal" or dual.value != primal.value):
                diffs.append(f"LP duality dx={vec(dx)}: primal {primal.value}, dual {dual.value}")
    if not ma.is_empty and inst.l <= 4:
        verts = set(enumerate_vertices(ma.set).points)
        checks += 1
        if verts != set(ma.extreme_points):
            diffs.append("extreme multiplier mismatch")
    r.sections["cross_check"] = {"checks": checks, "disagreements": diffs, "agree": not diffs}
    if args.instance is None:
        r.provenance.append(f"random instance seed={args.random} profile={args.profile}")
    return r


# --------------------------------------------------------------------------
# entry point


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2, which this tool reserves for inconclusive analyses
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mpec-kit", description="Exact first-order analysis of MPECs at a point.")
    p.add_argument("--version", action="version", version=f"mpec-kit {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, point=True):
        sp.add_argument("instance", help="instance JSON file")
        if point:
            sp.add_argument("--point", type=parse_vector, help="x then y entries, e.g. 2,0,1,0 or 1/2,0")
        sp.add_argument("--format", choices=("json", "text"), default="text")

    sp = sub.add_parser("check", help="feasibility and active sets")
    common(sp)
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("multipliers", help="M(z), its extreme points and CQ flags")
    common(sp)
    sp.set_defaults(func=cmd_multipliers)

    sp = sub.add_parser("critical", help="critical multipliers, dual LP and directional critical sets")
    common(sp)
    sp.add_argument("--dx", type=parse_vector, help="upper-level direction")
    sp.add_argument("--lambda", dest="lam", type=parse_vector, help="a multiplier in M(z)")
    sp.set_defaults(func=cmd_critical)

    sp = sub.add_parser("cones", help="tangent cone, linearized cone, hull and the full/extreme CQ")
    common(sp)
    sp.add_argument("--multipliers", default="extreme", help="'extreme' or 'list:<file>'")
    sp.add_argument("--sample", action="store_true", help="also run the floating sampling oracle")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--samples", type=int, default=200)
    sp.add_argument("--radii", type=lambda s: tuple(float(x) for x in s.split(",")), default=DEFAULT_RADII)
    sp.set_defaults(func=cmd_cones)

    sp = sub.add_parser("stationarity", help="primal and primal-dual stationarity")
    common(sp)
    sp.add_argument("--multipliers", default="extreme", help="'extreme' or 'list:<file>'")
    sp.add_argument("--all-partitions", action="store_true", help="list every (lambda, alpha) system")
    sp.set_defaults(func=cmd_stationarity)

    sp = sub.add_parser("kkt-reformulate", help="emit the KKT-NLP reformulation")
    common(sp, point=False)
    sp.add_argument("--point", type=parse_vector, help="optional (x, y, lambda) point for the NLP cones")
    sp.set_defaults(func=cmd_kkt)

    sp = sub.add_parser("cross-check", help="compare main solvers with the brute-force oracles")
    sp.add_argument("instance", nargs="?", help="instance JSON file (omit with --random)")
    sp.add_argument("--point", type=parse_vector)
    sp.add_argument("--random", type=int, default=0, help="seed for a generated instance")
    sp.add_argument("--profile", choices=PROFILES, default="ncp-small")
    sp.add_argument("--format", choices=("json", "text"), default="text")
    sp.set_defaults(func=cmd_cross_check)
    return p


def run(argv=None) -> tuple[int, str]:
    parser = build_parser()
    args = parser.parse_args(argv)
    report = args.func(args)
    out = emit_report(report, args.format)
    if args.command == "cross-check" and not report.sections["cross_check"]["agree"]:
        return EXIT_ERROR, out
    return (EXIT_INCONCLUSIVE if report.inconclusive else EXIT_OK), out


def main(argv=None) -> int:
    try:
        code, out = run(argv)
    except (SchemaError, ExprError, EnumerationLimitError, ValueError, OSError) as exc:
        print(f"mpec-kit: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    print(out)
    return code


if __name__ == "__main__":
    sys.exit(main())
