"""Text formats: edge-list graphs, JSON model specs and pinning strings.

Vertices and colours are 1-indexed in every external format and 0-indexed
inside the library.

Edge list: a header line "n m" followed by m lines "u v". Blank lines and
lines starting with '#' are ignored, as is anything after a '#'.

Model spec (JSON object), by "kind":

* coloring: {"q": 3}
* list-coloring: {"q": 4, "lists": [[1, 2], [2, 3, 4], ...]}
* hardcore: {"lambda": "2/1"}
* ising: {"coupling": "3/2", "field_weight": "1"} (exact) or
  {"beta": 0.3, "field": 0.1} (floating point)
* general: {"q": 2, "A_E": [[...], ...], "A_V": [...] or [[...], ...]}

Numbers may be JSON integers, strings "p/q" or decimal strings (all exact),
or JSON floats (inexact).
"""
import json

from .arith import format_number, parse_number
from .errors import ParseError, RangeError, ValidationError
from .model import Graph, Pinning, SpinModel, coloring, hardcore, ising, list_coloring

KINDS = ("coloring", "list-coloring", "hardcore", "ising", "general")


# graphs ---------------------------------------------------------------------

def parse_graph_text(text: str) -> Graph:
    header = None
    edges = []
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(f"expected two integers, got {raw.strip()!r}", lineno)
        try:
            a, b = int(parts[0]), int(parts[1])
        except ValueError:
            raise ParseError(f"expected two integers, got {raw.strip()!r}", lineno) from None
        if header is None:
            if a < 0 or b < 0:
                raise ParseError("negative vertex or edge count", lineno)
            header = (a, b)
            continue
        n = header[0]
        if not (1 <= a <= n and 1 <= b <= n):
            raise RangeError(f"line {lineno}: vertex out of range 1..{n}")
        if a == b:
            raise ParseError(f"self-loop at vertex {a}", lineno)
        e = (min(a, b), max(a, b))
        if e in seen:
            raise ParseError(f"duplicate edge {a} {b}", lineno)
        seen.add(e)
        edges.append((a - 1, b - 1))
    if header is None:
        raise ParseError("missing header line 'n m'")
    if len(edges) != header[1]:
        raise ParseError(f"header announces {header[1]} edges, found {len(edges)}")
    return Graph(header[0], edges)


def parse_graph(path) -> Graph:
    with open(path, encoding="utf-8") as fh:
        return parse_graph_text(fh.read())


def serialize_graph(g: Graph) -> str:
    lines = [f"{g.n} {len(g.edges)}"] + [f"{u + 1} {v + 1}" for u, v in g.edges]
    return "\n".join(lines) + "\n"


# models ---------------------------------------------------------------------

def _number(x, where: str):
    if isinstance(x, bool) or x is None:
        raise ValidationError(f"{where}: not a number")
    if isinstance(x, float):
        return x
    if isinstance(x, int):
        return parse_number(str(x))
    if isinstance(x, str):
        try:
            return parse_number(x)
        except ValueError as exc:
            raise ValidationError(f"{where}: {exc}") from None
    raise ValidationError(f"{where}: not a number")


def _matrix(rows, where):
    if not isinstance(rows, list) or not all(isinstance(r, list) for r in rows):
        raise ValidationError(f"{where} must be a list of lists")
    return [[_number(x, where) for x in r] for r in rows]


def _unify(values):
    """All exact, or all float when any entry is a float."""
    flat = [x for row in values for x in row]
    if any(isinstance(x, float) for x in flat):
        return [[float(x) for x in row] for row in values], False
    return values, True


def model_from_spec(spec: dict, graph: Graph) -> SpinModel:
    if not isinstance(spec, dict):
        raise ValidationError("model spec must be a JSON object")
    kind = spec.get("kind")
    if kind not in KINDS:
        raise ValidationError(f"unknown model kind {kind!r}; expected one of {', '.join(KINDS)}")

    def need(key):
        if key not in spec:
            raise ValidationError(f"{kind} model needs field {key!r}")
        return spec[key]

    if kind in ("coloring", "list-coloring", "general"):
        q = spec.get("q")
        if kind != "general" or q is not None:
            q = need("q")
            if not isinstance(q, int) or isinstance(q, bool) or q < 2:
                raise ValidationError("q must be an integer >= 2")
    if kind == "coloring":
        return coloring(graph, q)
    if kind == "list-coloring":
        lists = need("lists")
        if not isinstance(lists, list) or len(lists) != graph.n:
            raise ValidationError(f"lists must give one list for each of the {graph.n} vertices")
        out = []
        for L in lists:
            if not isinstance(L, list) or not all(isinstance(c, int) and not isinstance(c, bool) for c in L):
                raise ValidationError("each list must be a list of colours")
            if any(not 1 <= c <= q for c in L):
                raise ValidationError(f"list colour outside 1..{q}")
            out.append([c - 1 for c in L])
        return list_coloring(graph, q, out)
    if kind == "hardcore":
        lam = _number(need("lambda"), "lambda")
        if lam <= 0:
            raise ValidationError("lambda must be positive")
        return hardcore(graph, lam)
    if kind == "ising":
        if "coupling" in spec:
            a = _number(spec["coupling"], "coupling")
            h = _number(spec.get("field_weight", 1), "field_weight")
            if a < 0:
                raise ValidationError("negative weight entry")
            if isinstance(a, float) or isinstance(h, float):
                a, h = float(a), float(h)
            return ising(graph, coupling=a, field_weight=h)
        beta = _number(need("beta"), "beta")
        field = _number(spec.get("field", 0.0), "field")
        return ising(graph, float(beta), float(field))
    A_E = _matrix(need("A_E"), "A_E")
    A_V = need("A_V")
    if isinstance(A_V, list) and A_V and not isinstance(A_V[0], list):
        A_V = [A_V] * graph.n
    A_V = _matrix(A_V, "A_V")
    q = len(A_E) if q is None else q
    if len(A_E) != q:
        raise ValidationError("A_E dimension does not match q")
    (A_E, A_V), exact = _unify_pair(A_E, A_V)
    return SpinModel(graph, q, A_E, A_V, kind="general", exact=exact)


def _unify_pair(A_E, A_V):
    both, exact = _unify(A_E + A_V)
    return (both[: len(A_E)], both[len(A_E):]), exact


def parse_model_text(text: str, graph: Graph) -> SpinModel:
    try:
        spec = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", exc.lineno) from None
    return model_from_spec(spec, graph)


def parse_model(path, graph: Graph) -> SpinModel:
    with open(path, encoding="utf-8") as fh:
        return parse_model_text(fh.read(), graph)


def _enc(x):
    return x if isinstance(x, float) else format_number(x)


def model_spec(model: SpinModel) -> dict:
    """JSON-ready spec; kind-specific when the model came from a named family,
    explicit matrices otherwise. Exact entries become "p/q" strings."""
    kind, s = model.kind, model.spec
    if kind == "coloring":
        return {"kind": "coloring", "q": model.q}
    if kind == "list-coloring":
        return {"kind": "list-coloring", "q": model.q, "lists": [[c + 1 for c in L] for L in s["lists"]]}
    if kind == "hardcore" and model.exact:
        return {"kind": "hardcore", "lambda": _enc(s["lambda"])}
    if kind == "ising" and "coupling" in s:
        return {"kind": "ising", "coupling": _enc(s["coupling"]), "field_weight": _enc(s["field_weight"])}
    return {"kind": "general", "q": model.q,
            "A_E": [[_enc(x) for x in row] for row in model.A_E],
            "A_V": [[_enc(x) for x in vec] for vec in model.A_V]}


def serialize_model(model: SpinModel) -> str:
    return json.dumps(model_spec(model), indent=1) + "\n"


# pinnings --------------------------------------------------------------------

def parse_pinning(text: str | None, n: int, q: int) -> Pinning:
    """"v:c,v:c" with 1-indexed vertices and colours; empty or "-" is the
    empty pinning."""
    vals = [-1] * n
    if text is None or text.strip() in ("", "-"):
        return Pinning(vals)
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        try:
            v, c = (int(t) for t in item.split(":"))
        except ValueError:
            raise ParseError(f"bad pinning entry {item!r}, expected vertex:colour") from None
        if not 1 <= v <= n:
            raise RangeError(f"pinned vertex {v} outside 1..{n}")
        if not 1 <= c <= q:
            raise RangeError(f"colour {c} outside 1..{q}")
        if vals[v - 1] >= 0 and vals[v - 1] != c - 1:
            raise ValidationError(f"vertex {v} pinned twice")
        vals[v - 1] = c - 1
    return Pinning(vals)


def format_pinning(pin: Pinning) -> str:
    return ",".join(f"{v + 1}:{c + 1}" for v, c in sorted(pin.as_dict().items())) or "-"
