"""Command-line front end.

    spincount COMMAND GRAPH MODEL [options]
    spincount diag WHAT GRAPH MODEL [options]
    spincount gen FAMILY --n N [options]

GRAPH is an edge-list file and MODEL a JSON model spec (see ``formats``).
Every command prints line-delimited JSON records with a "kind" field, to
stdout or atomically to ``--out``. Errors print one record of kind "error"
to stderr and exit with the code of their class (2 usage, 3 parse, 4 range,
5 validation, 6 size, 7 non-permissive, 8 infeasible pinning, 9 solver,
10 bracketing, 11 chain initialisation).
"""
import argparse
import json
import os
import platform
import sys
import tempfile
from dataclasses import dataclass, field

from . import __version__
from .arith import format_number, parse_number, to_exact
from .errors import SpinError, UsageError

COMMANDS = ("count", "ratio", "marginal", "tree", "lp-dump", "diag", "oracle", "gen")
MODES = ("oracle", "theoretical", "measured", "manual")
DIAGS = ("dobrushin", "influence", "kempe", "contraction", "ci")


@dataclass
class RunConfig:
    command: str
    graph_path: str | None = None
    model_path: str | None = None
    mode: str = "measured"
    R: int | None = None
    eta: object = None
    C: object = None
    b: object = None
    k: int | None = None
    eps: object = None
    seed: int = 0
    arith: str = "rational"
    cap_free_vertices: int = 12
    out: str | None = None
    extra: dict = field(default_factory=dict)

    def validate(self):
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        if self.mode not in MODES:
            raise UsageError(f"--mode must be one of {', '.join(MODES)}")
        if self.arith not in ("rational", "float"):
            raise UsageError("--arith must be rational or float")
        if self.R is not None and self.R < 1:
            raise UsageError("--R must be at least 1")
        if self.k is not None and self.k < 0:
            raise UsageError("--k must be nonnegative")
        if self.cap_free_vertices < 1:
            raise UsageError("--cap-free-vertices must be positive")
        for name in ("eta", "C", "b", "eps"):
            val = getattr(self, name)
            if val is None:
                continue
            try:
                val = parse_number(val) if isinstance(val, str) else to_exact(val)
            except ValueError as exc:
                raise UsageError(f"--{name}: {exc}") from None
            setattr(self, name, val)
        if self.eps is not None and not 0 < self.eps < 1:
            raise UsageError("--eps must lie in (0, 1)")
        if self.b is not None and not 0 < self.b < 1:
            raise UsageError("--b must lie in (0, 1)")
        if self.eta is not None and self.eta <= 0:
            raise UsageError("--eta must be positive")
        if self.C is not None and self.C <= 0:
            raise UsageError("--C must be positive")
        if self.mode == "manual" and (self.R is None or self.eta is None or self.b is None):
            raise UsageError("--mode manual needs --R, --eta and --b")
        if self.mode == "theoretical" and (self.C is None or self.b is None):
            raise UsageError("--mode theoretical needs --C and --b")
        if self.command != "gen" and (self.graph_path is None or self.model_path is None):
            raise UsageError(f"{self.command} needs GRAPH and MODEL arguments")
        return self

    def as_record(self) -> dict:
        out = {}
        for k, v in self.__dict__.items():
            if k == "extra":
                out.update({kk: vv for kk, vv in v.items() if vv is not None})
            elif v is not None and not isinstance(v, (str, int, bool)):
                out[k] = format_number(v)
            else:
                out[k] = v
        return out


def _num(x):
    return x if isinstance(x, float) else format_number(x)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--mode", default="measured", help="oracle | theoretical | measured | manual")
    common.add_argument("--R", type=int, help="coupling-tree radius")
    common.add_argument("--eta", help="overflow parameter (rational or decimal)")
    common.add_argument("--C", help="coupling-independence constant (theoretical mode)")
    common.add_argument("--b", help="marginal lower bound")
    common.add_argument("--k", type=int, help="recursion depth")
    common.add_argument("--eps", help="target relative error")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--arith", default="rational", help="rational | float")
    common.add_argument("--cap-free-vertices", type=int, default=12,
                        help="largest number of free vertices the exact oracle may enumerate")
    common.add_argument("--out", help="write output here (atomically) instead of stdout")

    p = argparse.ArgumentParser(prog="spincount", description="Deterministic approximate counting "
                                "for spin systems with an exact oracle and coupling diagnostics.")
    p.add_argument("--version", action="version", version=f"spincount {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def cmd(name, help_):
        sp = sub.add_parser(name, parents=[common], help=help_)
        if name == "diag":
            sp.add_argument("what", choices=DIAGS)
        if name != "gen":
            sp.add_argument("graph", help="edge-list file")
            sp.add_argument("model", help="JSON model spec")
        return sp

    cmd("count", "estimate the partition function")
    sp = cmd("ratio", "estimate mu(sigma) / mu(tau) for pinnings differing at one vertex")
    sp.add_argument("--sigma", required=True, help='pinning "v:c,..." (1-indexed)')
    sp.add_argument("--tau", required=True)
    sp = cmd("marginal", "estimate the conditional marginal at a vertex")
    sp.add_argument("--pin", default="-")
    sp.add_argument("--vertex", type=int, required=True)
    sp = cmd("tree", "coupling-tree statistics")
    sp.add_argument("--sigma", required=True)
    sp.add_argument("--tau", required=True)
    sp.add_argument("--serialize", action="store_true", help="include the canonical tree text")
    sp = cmd("lp-dump", "write the feasibility LP of a coupling tree")
    sp.add_argument("--sigma", required=True)
    sp.add_argument("--tau", required=True)
    sp.add_argument("--r-minus", required=True)
    sp.add_argument("--r-plus", required=True)
    sp = cmd("diag", "influence, Dobrushin and coupling diagnostics")
    sp.add_argument("--sigma")
    sp.add_argument("--tau")
    sp.add_argument("--vertex", type=int)
    sp.add_argument("--colour", type=int)
    sp.add_argument("--config", help="total configuration for kempe, comma separated colours")
    sp.add_argument("--ell-max", type=int)
    sp.add_argument("--chain", default="glauber", choices=("flip", "glauber"))
    sp.add_argument("--preset", default="vigoda2000")
    sp.add_argument("--trials", type=int, default=1000)
    sp.add_argument("--steps", type=int)
    sp.add_argument("--method", default="exact", choices=("exact", "mc"))
    sp.add_argument("--literal", action="store_true", help="literal Dobrushin enumeration")
    sp = cmd("oracle", "exact partition function, marginals and ratios")
    sp.add_argument("--pin", default="-")
    sp.add_argument("--vertex", type=int)
    sp.add_argument("--sigma")
    sp.add_argument("--tau")
    sp = cmd("gen", "generate a test graph as an edge list")
    sp.add_argument("family", choices=("path", "cycle", "star", "complete", "empty", "tree", "random"))
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--max-degree", type=int, default=3)
    return p


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    base = {"command", "graph", "model", "mode", "R", "eta", "C", "b", "k", "eps", "seed", "arith",
            "cap_free_vertices", "out"}
    extra = {k: v for k, v in vars(ns).items() if k not in base}
    return RunConfig(ns.command, getattr(ns, "graph", None), getattr(ns, "model", None), ns.mode,
                     ns.R, ns.eta, ns.C, ns.b, ns.k, ns.eps, ns.seed, ns.arith, ns.cap_free_vertices,
                     ns.out, extra).validate()


# command implementations ------------------------------------------------------

def _load(cfg: RunConfig):
    from .formats import parse_graph, parse_model
    from .model import SpinModel

    g = parse_graph(cfg.graph_path)
    model = parse_model(cfg.model_path, g)
    if cfg.arith == "float" and model.exact:
        model = SpinModel(g, model.q, [[float(x) for x in r] for r in model.A_E],
                          [[float(x) for x in r] for r in model.A_V], kind=model.kind,
                          spec=model.spec, exact=False)
    return model


def _cap(cfg, model):
    return model.q ** cfg.cap_free_vertices


def _pin(cfg, model, key):
    from .formats import parse_pinning

    return parse_pinning(cfg.extra.get(key), model.n, model.q)


def _params(cfg, model):
    from . import estimator as est

    k_max = cfg.k if cfg.k is not None else 5
    if cfg.mode == "manual":
        return est.ParamSet(R=cfg.R, eta=cfg.eta, b=cfg.b, k_max=k_max, mode="manual",
                            C=cfg.C, source="command line")
    if cfg.mode == "theoretical":
        return est.theoretical_params(cfg.C, cfg.b, model.graph.max_degree, k_max=k_max)
    p = est.measured_params(model, k_max=k_max)
    if cfg.R is not None:
        p.R = cfg.R
    return p


def _pair(cfg, model):
    sigma, tau = _pin(cfg, model, "sigma"), _pin(cfg, model, "tau")
    if sigma.domain != tau.domain:
        raise UsageError("--sigma and --tau must pin the same vertices")
    diff = sigma.differences(tau)
    if len(diff) != 1:
        raise UsageError("--sigma and --tau must differ at exactly one vertex")
    return sigma, tau, diff[0]


def _count(cfg, model):
    from . import estimator as est
    from .oracle import exact_conditional_Z

    if cfg.mode == "oracle":
        return [{"kind": "count", "mode": "oracle", "Z": _num(exact_conditional_Z(model, cap=_cap(cfg, model))),
                 "guarantee_valid": True}]
    eps = cfg.eps if cfg.eps is not None else to_exact("1/10")
    params = _params(cfg, model)
    res = est.estimate_partition(model, eps, params, k=cfg.k, details=True, cap=_cap(cfg, model))
    return [{"kind": "count", "mode": params.mode, "Z": _num(res.value), "eps": _num(eps),
             "k": res.k, "guarantee_valid": res.guarantee_valid, "params": res.params, "stats": res.stats}]


def _ratio(cfg, model):
    from . import estimator as est
    from .oracle import exact_ratio

    sigma, tau, u = _pair(cfg, model)
    if cfg.mode == "oracle":
        return [{"kind": "ratio", "mode": "oracle", "vertex": u + 1,
                 "value": _num(exact_ratio(model, sigma, tau, _cap(cfg, model)))}]
    params = _params(cfg, model)
    k = cfg.k if cfg.k is not None else params.k_max
    res = est.recursive_estimator(model, sigma, tau, k, u, params, details=True, cap=_cap(cfg, model))
    return [{"kind": "ratio", "mode": params.mode, "vertex": u + 1, "value": _num(res.value), "k": k,
             "guarantee_valid": res.guarantee_valid, "params": res.params, "stats": res.stats}]


def _marginal(cfg, model):
    from . import estimator as est
    from .oracle import exact_marginal

    pin = _pin(cfg, model, "pin")
    v = _vertex(cfg, model)
    if cfg.mode == "oracle":
        mu = exact_marginal(model, pin, v, _cap(cfg, model))
        return [{"kind": "marginal", "mode": "oracle", "vertex": v + 1, "probs": [_num(x) for x in mu.probs]}]
    params = _params(cfg, model)
    k = cfg.k if cfg.k is not None else params.k_max
    mu = est.marginal_from_ratios(model, pin, v, k, params, cap=_cap(cfg, model))
    return [{"kind": "marginal", "mode": params.mode, "vertex": v + 1, "k": k,
             "probs": [_num(x) for x in mu.probs], "params": params.as_record(),
             "guarantee_valid": params.guarantee_valid}]


def _vertex(cfg, model, key="vertex"):
    v = cfg.extra.get(key)
    if v is None:
        raise UsageError(f"--{key} is required")
    if not 1 <= v <= model.n:
        from .errors import RangeError

        raise RangeError(f"vertex {v} outside 1..{model.n}")
    return v - 1


def _radius(cfg):
    if cfg.R is None:
        raise UsageError("--R is required")
    return cfg.R


def _tree(cfg, model):
    from .couptree import build_tree, serialize_tree, tree_stats

    sigma, tau, u = _pair(cfg, model)
    tree = build_tree(model, sigma, tau, u, _radius(cfg))
    rec = {"kind": "tree", **tree_stats(tree)}
    if cfg.extra.get("serialize"):
        rec["serialization"] = serialize_tree(tree)
    return [rec]


def _lp_dump(cfg, model):
    from .couptree import build_tree
    from .lpcert import build_lp, dump_lp
    from .oracle import exact_ratio

    sigma, tau, u = _pair(cfg, model)
    if cfg.eta is None or cfg.eps is None:
        raise UsageError("lp-dump needs --eta and --eps")
    tree = build_tree(model, sigma, tau, u, _radius(cfg))
    ratios = {w.index: exact_ratio(model, w.sigma, w.tau, _cap(cfg, model)) for w in tree.nodes if w.is_leaf}
    try:
        r_minus, r_plus = parse_number(cfg.extra["r_minus"]), parse_number(cfg.extra["r_plus"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    lp = build_lp(tree, ratios, r_minus, r_plus, cfg.eps, cfg.eta, exact=model.exact)
    return dump_lp(lp)


def _diag(cfg, model):
    from . import cidiag

    what = cfg.extra["what"]
    if what == "dobrushin":
        rep = cidiag.dobrushin_matrix(model, literal=bool(cfg.extra.get("literal")), cap=_cap(cfg, model))
        return [rep.as_record()]
    if what == "kempe":
        text = cfg.extra.get("config")
        if not text:
            raise UsageError("kempe needs --config")
        try:
            X = [int(t) - 1 for t in text.split(",")]
        except ValueError:
            raise UsageError("--config must list one colour per vertex") from None
        if len(X) != model.n or any(not 0 <= c < model.q for c in X):
            raise UsageError("--config must list one colour in 1..q per vertex")
        c = cfg.extra.get("colour")
        if c is None or not 1 <= c <= model.q:
            raise UsageError("kempe needs --colour in 1..q")
        S = cidiag.kempe_component(model, X, _vertex(cfg, model), c - 1)
        return [{"kind": "kempe", "vertex": cfg.extra["vertex"], "colour": c,
                 "component": sorted(v + 1 for v in S)}]
    if what == "influence":
        sigma, tau, u = _pair(cfg, model)
        ell_max = cfg.extra.get("ell_max") or max(model.graph.diameter() if model.graph.is_connected() else model.n, 1)
        return [cidiag.influence_profile(model, sigma, tau, u, ell_max, _cap(cfg, model)).as_record()]
    if what == "contraction":
        chain = cfg.extra["chain"]
        params = cidiag.flip_preset(cfg.extra["preset"]) if chain == "flip" else None
        rep = cidiag.contraction_estimate(model, chain, params, trials=cfg.extra["trials"],
                                          steps=cfg.extra.get("steps"), seed=cfg.seed)
        return [rep.as_record()]
    sigma, tau, u = _pair(cfg, model)
    est = cidiag.ci_estimate(model, sigma, tau, cfg.extra["method"], trials=cfg.extra["trials"],
                             steps=cfg.extra.get("steps"), seed=cfg.seed, cap=_cap(cfg, model))
    return [est.as_record()]


def _oracle(cfg, model):
    from .oracle import exact_conditional_Z, exact_marginal, exact_ratio

    cap = _cap(cfg, model)
    if cfg.extra.get("sigma") or cfg.extra.get("tau"):
        sigma, tau, u = _pair(cfg, model)
        return [{"kind": "oracle", "quantity": "ratio", "vertex": u + 1,
                 "value": _num(exact_ratio(model, sigma, tau, cap))}]
    pin = _pin(cfg, model, "pin")
    free = len(pin.free())
    if free > cfg.cap_free_vertices:
        from .errors import SizeError

        raise SizeError(f"{free} free vertices exceed --cap-free-vertices {cfg.cap_free_vertices}")
    out = [{"kind": "oracle", "quantity": "Z", "value": _num(exact_conditional_Z(model, pin, cap))}]
    if cfg.extra.get("vertex") is not None:
        v = _vertex(cfg, model)
        out.append({"kind": "oracle", "quantity": "marginal", "vertex": v + 1,
                    "probs": [_num(x) for x in exact_marginal(model, pin, v, cap).probs]})
    return out


def _gen(cfg):
    from . import generators as G
    from .formats import serialize_graph

    fam, n = cfg.extra["family"], cfg.extra["n"]
    if n < 0:
        raise UsageError("--n must be nonnegative")
    if fam == "path":
        g = G.path(n)
    elif fam == "cycle":
        g = G.cycle(n)
    elif fam == "star":
        g = G.star(n)
    elif fam == "complete":
        g = G.complete(n)
    elif fam == "empty":
        g = G.empty(n)
    elif fam == "tree":
        g = G.random_tree(n, cfg.seed)
    else:
        g = G.random_bounded_degree(n, cfg.extra["max_degree"], cfg.seed)
    return serialize_graph(g)


HANDLERS = {"count": _count, "ratio": _ratio, "marginal": _marginal, "tree": _tree,
            "lp-dump": _lp_dump, "diag": _diag, "oracle": _oracle}


def _meta(cfg) -> dict:
    return {"kind": "run", "version": __version__, "python": platform.python_version(),
            "config": cfg.as_record()}


def run(cfg: RunConfig) -> str:
    """Execute a validated config and return the full output text."""
    if cfg.command == "gen":
        return _gen(cfg)
    model = _load(cfg)
    if cfg.command == "lp-dump":
        return _lp_dump(cfg, model)
    records = [_meta(cfg)] + HANDLERS[cfg.command](cfg, model)
    return "".join(json.dumps(r, sort_keys=False) + "\n" for r in records)


def write_atomic(path: str, text: str):
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".spincount-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = config_from_args(ns)
        text = run(cfg)
        if cfg.out:
            write_atomic(cfg.out, text)
        else:
            sys.stdout.write(text)
        return 0
    except SpinError as exc:
        rec = {"kind": "error", "error": type(exc).__name__, "message": str(exc), "exit_code": exc.exit_code}
        sys.stderr.write(json.dumps(rec) + "\n")
        return exc.exit_code
    except OSError as exc:
        rec = {"kind": "error", "error": "OSError", "message": str(exc), "exit_code": UsageError.exit_code}
        sys.stderr.write(json.dumps(rec) + "\n")
        return UsageError.exit_code


if __name__ == "__main__":
    sys.exit(main())
