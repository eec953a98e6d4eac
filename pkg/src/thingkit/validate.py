"""Static validation of thinging-machine models.

``validate`` is pure and total: every problem is reported as a
:class:`~thingkit.model.Diagnostic`, never raised.  An empty result means
the model satisfies all structural invariants.

The legal stage adjacency relation is the heart of the checker.  Things
enter a machine through Transfer/Receive, are changed by Process/Create,
and leave through Release/Transfer; stores may buffer any stage's output
and feed Process or Release.  A Transfer-to-Transfer flow is only legal
across a machine boundary.
"""

from __future__ import annotations

from .model import (
    Diagnostic,
    Endpoint,
    FlowRef,
    Machine,
    Model,
    Severity,
    Stage,
    StageKind,
    Store,
    flow_refs,
    trigger_refs,
    walk_machines,
)

E_ADJACENCY = "E_ADJACENCY"
E_BOUNDARY = "E_BOUNDARY"
E_BRANCH = "E_BRANCH"
E_CAPACITY = "E_CAPACITY"
E_DROP_EXIT = "E_DROP_EXIT"
E_DUP_ID = "E_DUP_ID"
E_DURATION = "E_DURATION"
E_ENDPOINT = "E_ENDPOINT"
E_TREE = "E_TREE"
E_TRIGGER_TARGET = "E_TRIGGER_TARGET"
E_UNDECLARED_THING = "E_UNDECLARED_THING"
E_UNRESOLVED = "E_UNRESOLVED"
W_SINK_EXIT = "W_SINK_EXIT"
W_UNREACHABLE = "W_UNREACHABLE"

K = StageKind

# Legal (from, to) stage pairs.  Transfer->Transfer additionally requires
# the endpoints to live in different machines (checked separately).
ADJACENCY: frozenset[tuple[StageKind, StageKind]] = frozenset(
    {
        (K.TRANSFER, K.RECEIVE),
        (K.RECEIVE, K.PROCESS),
        (K.RECEIVE, K.RELEASE),
        (K.PROCESS, K.RELEASE),
        (K.PROCESS, K.CREATE),
        (K.CREATE, K.PROCESS),
        (K.CREATE, K.RELEASE),
        (K.RELEASE, K.TRANSFER),
        (K.TRANSFER, K.TRANSFER),
    }
)

# A store accepts input from any stage and releases into these kinds.
STORE_EXIT_KINDS = frozenset({K.PROCESS, K.RELEASE})


def validate(model: Model) -> list[Diagnostic]:
    """Check a model against all structural invariants.

    Returns diagnostics ordered by source position.  The model itself is
    never modified, so repeated calls yield identical results.
    """
    diags: list[Diagnostic] = []
    _check_tree(model, diags)
    _check_ids(model, diags)
    _check_things(model, diags)
    _check_elements(model, diags)
    flows = flow_refs(model)
    trigs = trigger_refs(model)
    for ref in flows:
        _check_flow(model, ref, diags)
    for ref in trigs:
        _check_trigger(model, ref, diags)
    _check_branching(model, flows, diags)
    _check_reachability(model, flows, trigs, diags)
    return _ordered(diags)


def _span_key(diag_and_span):
    diag, span = diag_and_span
    if span is None:
        return ("~", 1 << 30, 1 << 30)
    return (span.file, span.line, span.column)


def _ordered(diags: list[tuple[Diagnostic, object]]) -> list[Diagnostic]:
    return [d for d, _ in sorted(diags, key=_span_key)]


def _add(diags, code, path, message, span, severity=Severity.ERROR) -> None:
    diags.append((Diagnostic(code, path, message, severity), span))


def _check_tree(model: Model, diags) -> None:
    seen: set[int] = set()

    def _visit(machine: Machine, path: str) -> None:
        if id(machine) in seen:
            _add(
                diags,
                E_TREE,
                path,
                "machine appears more than once in the hierarchy",
                machine.span,
            )
            return
        seen.add(id(machine))
        for sub in machine.submachines:
            _visit(sub, f"{path}.{sub.id}")

    for top in model.machines:
        _visit(top, top.id)


def _check_ids(model: Model, diags) -> None:
    top_seen: set[str] = set()
    for machine in model.machines:
        if machine.id in top_seen:
            _add(diags, E_DUP_ID, machine.id, f"duplicate top-level machine id {machine.id!r}", machine.span)
        top_seen.add(machine.id)
    for mpath, machine in walk_machines(model):
        seen: set[str] = set()
        for element in (*machine.stages, *machine.stores, *machine.submachines):
            if element.id in seen:
                _add(
                    diags,
                    E_DUP_ID,
                    f"{mpath}.{element.id}",
                    f"duplicate id {element.id!r} in machine {mpath!r}",
                    element.span,
                )
            seen.add(element.id)


def _check_things(model: Model, diags) -> None:
    seen: set[str] = set()
    for decl in model.things:
        if decl.name in seen:
            _add(diags, E_DUP_ID, decl.name, f"duplicate thing type {decl.name!r}", decl.span)
        seen.add(decl.name)


def _check_elements(model: Model, diags) -> None:
    declared = {t.name for t in model.things}
    for mpath, machine in walk_machines(model):
        for stage in machine.stages:
            path = f"{mpath}.{stage.id}"
            if stage.duration < 0:
                _add(diags, E_DURATION, path, "stage duration must be >= 0", stage.span)
            if stage.makes is not None and stage.makes not in declared:
                _add(
                    diags,
                    E_UNDECLARED_THING,
                    path,
                    f"stage makes undeclared thing type {stage.makes!r}",
                    stage.span,
                )
            if stage.makes is not None and stage.kind is not K.CREATE:
                _add(diags, E_TRIGGER_TARGET, path, "only create stages may declare 'makes'", stage.span)
        for store in machine.stores:
            path = f"{mpath}.{store.id}"
            if store.capacity is not None and store.capacity < 1:
                _add(diags, E_CAPACITY, path, "bounded store capacity must be >= 1", store.span)


def _endpoint_desc(ref: FlowRef, which: str) -> str:
    decl = ref.decl
    return decl.from_path if which == "from" else decl.to_path


def _check_flow(model: Model, ref: FlowRef, diags) -> None:
    declared = {t.name for t in model.things}
    flow = ref.decl
    arrow = f"{flow.from_path} -> {flow.to_path}"
    for which, end in (("from", ref.src), ("to", ref.dst)):
        if end is None:
            _add(
                diags,
                E_UNRESOLVED,
                ref.owner_path,
                f"flow {arrow}: cannot resolve {which!r} path {_endpoint_desc(ref, which)!r}",
                flow.span,
            )
    if ref.src is None or ref.dst is None:
        return
    src, dst = ref.src.element, ref.dst.element
    if isinstance(src, Machine) or isinstance(dst, Machine):
        _add(
            diags,
            E_ENDPOINT,
            ref.owner_path,
            f"flow {arrow}: endpoints must be stages or stores, not machines",
            flow.span,
        )
        return
    if isinstance(src, Store) and isinstance(dst, Store):
        _add(
            diags,
            E_ADJACENCY,
            ref.owner_path,
            f"flow {arrow}: a store cannot feed another store",
            flow.span,
        )
    elif isinstance(src, Store):
        if dst.kind not in STORE_EXIT_KINDS:
            _add(
                diags,
                E_ADJACENCY,
                ref.owner_path,
                f"flow {arrow}: a store releases into process or release, not {dst.kind.value}",
                flow.span,
            )
    elif isinstance(dst, Store):
        pass  # any stage may write a store
    else:
        pair = (src.kind, dst.kind)
        if pair not in ADJACENCY:
            _add(
                diags,
                E_ADJACENCY,
                ref.owner_path,
                f"flow {arrow}: illegal stage pair {src.kind.value} -> {dst.kind.value}",
                flow.span,
            )
        elif pair == (K.TRANSFER, K.TRANSFER) and ref.src.machine_path == ref.dst.machine_path:
            _add(
                diags,
                E_BOUNDARY,
                ref.owner_path,
                f"flow {arrow}: transfer -> transfer must cross a machine boundary",
                flow.span,
            )
    if flow.carries is not None and flow.carries not in declared:
        _add(
            diags,
            E_UNDECLARED_THING,
            ref.owner_path,
            f"flow {arrow}: undeclared thing type {flow.carries!r}",
            flow.span,
        )


def _check_trigger(model: Model, ref: FlowRef, diags) -> None:
    trig = ref.decl
    arrow = f"{trig.from_path} ~> {trig.to_path}"
    for which, end in (("from", ref.src), ("to", ref.dst)):
        if end is None:
            _add(
                diags,
                E_UNRESOLVED,
                ref.owner_path,
                f"trigger {arrow}: cannot resolve {which!r} path {_endpoint_desc(ref, which)!r}",
                trig.span,
            )
            continue
        if not isinstance(end.element, Stage):
            _add(
                diags,
                E_ENDPOINT,
                ref.owner_path,
                f"trigger {arrow}: endpoints must be stages",
                trig.span,
            )
    if ref.dst is not None and isinstance(ref.dst.element, Stage):
        if ref.dst.element.kind not in (K.CREATE, K.PROCESS):
            _add(
                diags,
                E_TRIGGER_TARGET,
                ref.owner_path,
                f"trigger {arrow}: target must be a create or process stage",
                trig.span,
            )


def _check_branching(model: Model, flows: list[FlowRef], diags) -> None:
    by_src: dict[str, list[FlowRef]] = {}
    for ref in flows:
        if ref.src is not None:
            by_src.setdefault(ref.src.path, []).append(ref)
    for src_path, outgoing in by_src.items():
        element = outgoing[0].src.element
        if isinstance(element, Stage):
            if element.drop:
                _add(
                    diags,
                    E_DROP_EXIT,
                    src_path,
                    "a drop stage destroys things; it cannot have outgoing flows",
                    element.span,
                )
            elif len(outgoing) > 1:
                missing = [r for r in outgoing if r.decl.when is None]
                if missing:
                    _add(
                        diags,
                        E_BRANCH,
                        src_path,
                        "every outgoing flow of a branch point needs a 'when' condition",
                        missing[0].decl.span,
                    )
        elif isinstance(element, Store):
            conditioned = [r for r in outgoing if r.decl.when is not None]
            if conditioned:
                _add(
                    diags,
                    E_BRANCH,
                    src_path,
                    "store outflows are selected by FIFO order, not conditions",
                    conditioned[0].decl.span,
                )
            consumers = [
                r
                for r in outgoing
                if r.dst is not None
                and not (isinstance(r.dst.element, Stage) and r.dst.element.drop)
            ]
            overflow = [
                r
                for r in outgoing
                if r.dst is not None
                and isinstance(r.dst.element, Stage)
                and r.dst.element.drop
            ]
            if len(consumers) > 1:
                _add(
                    diags,
                    E_BRANCH,
                    src_path,
                    "a store may have at most one consumer flow",
                    consumers[1].decl.span,
                )
            if len(overflow) > 1:
                _add(
                    diags,
                    E_BRANCH,
                    src_path,
                    "a store may have at most one overflow route",
                    overflow[1].decl.span,
                )


def _check_reachability(model: Model, flows, trigs, diags) -> None:
    fed: set[str] = set()
    for ref in flows:
        if ref.dst is not None:
            fed.add(ref.dst.path)
    for ref in trigs:
        if ref.dst is not None:
            fed.add(ref.dst.path)
    has_outflow = {ref.src.path for ref in flows if ref.src is not None}
    for mpath, machine in walk_machines(model):
        for stage in machine.stages:
            path = f"{mpath}.{stage.id}"
            if not stage.source and path not in fed:
                _add(
                    diags,
                    W_UNREACHABLE,
                    path,
                    "stage has no incoming flow or trigger and is not a source",
                    stage.span,
                    Severity.WARNING,
                )
            if stage.sink and path in has_outflow:
                _add(
                    diags,
                    W_SINK_EXIT,
                    path,
                    "sink stage has an outgoing flow",
                    stage.span,
                    Severity.WARNING,
                )
