"""Core domain types for thinging-machine models.

A model is a tree of machines.  Each machine owns the stages (the five
generic operations), the stores, the submachines, and the flows and
triggers declared in its scope.  Values are immutable after construction;
every operation in this package treats them as pure inputs, so models are
safe to share across threads.

Elements are addressed by dotted paths ("router.routing_table.table").
A path written inside a machine body is resolved lexically: the declaring
scope is searched first, then each enclosing scope out to the model's top
level.  Absolute (root-anchored) paths therefore resolve from any scope
that does not shadow their first segment.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Optional, Union


class StageKind(Enum):
    """The five generic operations.  There are no user-defined kinds."""

    CREATE = "create"
    PROCESS = "process"
    RELEASE = "release"
    TRANSFER = "transfer"
    RECEIVE = "receive"


class OverflowPolicy(Enum):
    """What a bounded store does with an arrival when it is full."""

    DROP = "drop"
    BLOCK = "block"


class AttrKind(Enum):
    """Attribute value kinds for declared thing types."""

    INT = "int"
    TEXT = "text"
    BOOL = "bool"


class Severity(Enum):
    ERROR = "error"
    WARNING = "warning"


@dataclass(frozen=True)
class SourceSpan:
    """Position of a construct in its source file (1-based line/column)."""

    file: str
    line: int
    column: int

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.column}"


@dataclass(frozen=True)
class Stage:
    """One operation box in a machine.

    ``step`` is an optional numeric label (``@n`` in the DSL) used to cite
    external documentation; it carries no semantics.  ``duration`` is the
    dwell time in simulation ticks.  ``source`` marks a simulation entry
    point, ``sink`` an intended exit, and ``drop`` a stage that destroys
    the things that enter it (counted as dropped, not completed).
    ``makes`` names the thing type produced when the stage is the target
    of a trigger.
    """

    id: str
    kind: StageKind
    label: Optional[str] = None
    step: Optional[int] = None
    duration: int = 0
    source: bool = False
    sink: bool = False
    drop: bool = False
    makes: Optional[str] = None
    span: Optional[SourceSpan] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Store:
    """A FIFO holder attached to flows.

    ``capacity`` is ``None`` for unbounded stores.  ``policy`` selects the
    overflow behaviour of bounded stores.
    """

    id: str
    label: Optional[str] = None
    step: Optional[int] = None
    capacity: Optional[int] = None
    policy: OverflowPolicy = OverflowPolicy.DROP
    span: Optional[SourceSpan] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Flow:
    """Solid-arrow movement of a thing between two stages/stores.

    Paths are as written in the declaring scope.  ``when`` names a branch
    condition resolved to a predicate at simulation time; ``carries``
    restricts the flow to a declared thing type.
    """

    from_path: str
    to_path: str
    when: Optional[str] = None
    carries: Optional[str] = None
    step: Optional[int] = None
    span: Optional[SourceSpan] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Trigger:
    """Dashed-arrow activation between two stages.  Carries no thing."""

    from_path: str
    to_path: str
    when: Optional[str] = None
    step: Optional[int] = None
    span: Optional[SourceSpan] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Machine:
    """A node of the machine tree."""

    id: str
    label: Optional[str] = None
    step: Optional[int] = None
    stages: tuple[Stage, ...] = ()
    stores: tuple[Store, ...] = ()
    submachines: tuple["Machine", ...] = ()
    flows: tuple[Flow, ...] = ()
    triggers: tuple[Trigger, ...] = ()
    span: Optional[SourceSpan] = field(default=None, compare=False, repr=False)

    def child(self, name: str) -> Optional[Union[Stage, Store, "Machine"]]:
        """Look up a directly owned stage, store, or submachine by id."""
        for stage in self.stages:
            if stage.id == name:
                return stage
        for store in self.stores:
            if store.id == name:
                return store
        for sub in self.submachines:
            if sub.id == name:
                return sub
        return None


@dataclass(frozen=True)
class ThingType:
    """A declared thing type: a tag plus an attribute schema."""

    name: str
    attrs: tuple[tuple[str, AttrKind], ...] = ()
    span: Optional[SourceSpan] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Model:
    """A whole diagram: thing declarations plus top-level machines.

    ``name`` is presentation metadata (usually the source file stem) and
    is excluded from structural equality.
    """

    name: str = field(default="model", compare=False)
    things: tuple[ThingType, ...] = ()
    machines: tuple[Machine, ...] = ()
    span: Optional[SourceSpan] = field(default=None, compare=False, repr=False)

    def thing_type(self, name: str) -> Optional[ThingType]:
        for decl in self.things:
            if decl.name == name:
                return decl
        return None


Element = Union[Stage, Store, Machine]


@dataclass(frozen=True)
class Diagnostic:
    """A validation finding.  ``path`` cites the offending element."""

    code: str
    path: str
    message: str
    severity: Severity = Severity.ERROR

    def __str__(self) -> str:
        return f"{self.severity.value.upper()} {self.code} {self.path}: {self.message}"


class NotFoundError(LookupError):
    """Raised when a dotted path does not resolve to any element."""

    def __init__(self, path: str):
        super().__init__(f"no element at path {path!r}")
        self.path = path


# ---------------------------------------------------------------------------
# Traversal and path resolution


def walk_machines(model: Model) -> Iterator[tuple[str, Machine]]:
    """Yield (path, machine) for every machine, depth-first, in declaration order."""

    def _walk(machine: Machine, prefix: str) -> Iterator[tuple[str, Machine]]:
        path = f"{prefix}.{machine.id}" if prefix else machine.id
        yield path, machine
        for sub in machine.submachines:
            yield from _walk(sub, path)

    for top in model.machines:
        yield from _walk(top, "")


def iter_stages_and_stores(model: Model) -> Iterator[tuple[str, Union[Stage, Store]]]:
    """Yield (path, element) for every stage and store.

    Order is deterministic: machines depth-first in declaration order; within
    a machine, stages before stores, each in declaration order.
    """
    for mpath, machine in walk_machines(model):
        for stage in machine.stages:
            yield f"{mpath}.{stage.id}", stage
        for store in machine.stores:
            yield f"{mpath}.{store.id}", store


def element_index(model: Model) -> dict[str, Element]:
    """Map every machine, stage, and store path to its element."""
    index: dict[str, Element] = {}
    for mpath, machine in walk_machines(model):
        index[mpath] = machine
        for stage in machine.stages:
            index[f"{mpath}.{stage.id}"] = stage
        for store in machine.stores:
            index[f"{mpath}.{store.id}"] = store
    return index


def resolve(model: Model, path: str) -> Element:
    """Return the machine, stage, or store at a root-anchored dotted path.

    Raises :class:`NotFoundError` when no element matches.
    """
    if not path:
        raise NotFoundError(path)
    first, _, rest = path.partition(".")
    current: Optional[Element] = None
    for machine in model.machines:
        if machine.id == first:
            current = machine
            break
    if current is None:
        raise NotFoundError(path)
    while rest:
        if not isinstance(current, Machine):
            raise NotFoundError(path)
        name, _, rest = rest.partition(".")
        current = current.child(name)
        if current is None:
            raise NotFoundError(path)
    return current


@dataclass(frozen=True)
class Endpoint:
    """A resolved flow/trigger endpoint: absolute path, element, owning machine."""

    path: str
    element: Element
    machine_path: str


@dataclass(frozen=True)
class FlowRef:
    """A flow (or trigger) with both endpoints resolved, if resolvable."""

    owner_path: str
    decl: Union[Flow, Trigger]
    src: Optional[Endpoint]
    dst: Optional[Endpoint]


def _resolve_in_scope(
    model: Model, scope: tuple[tuple[str, Machine], ...], path: str
) -> Optional[Endpoint]:
    """Resolve ``path`` from innermost scope outward (lexical lookup)."""
    if not path:
        return None
    first, _, rest = path.partition(".")
    # Innermost machine first, then ancestors, then the top level.
    for depth in range(len(scope) - 1, -2, -1):
        if depth >= 0:
            owner_path, owner = scope[depth]
            hit = owner.child(first)
            hit_path = f"{owner_path}.{first}"
            hit_owner = owner_path
        else:
            hit = None
            for top in model.machines:
                if top.id == first:
                    hit = top
                    break
            hit_path = first
            hit_owner = ""
        if hit is None:
            continue
        # Descend the remaining segments inside the hit.
        current, cpath = hit, hit_path
        owner_of_current = hit_owner
        remaining = rest
        ok = True
        while remaining:
            if not isinstance(current, Machine):
                ok = False
                break
            name, _, remaining = remaining.partition(".")
            nxt = current.child(name)
            if nxt is None:
                ok = False
                break
            owner_of_current = cpath
            current, cpath = nxt, f"{cpath}.{name}"
        if ok:
            return Endpoint(cpath, current, owner_of_current)
        # A shadowing first segment that does not contain the rest of the
        # path hides outer candidates, matching lexical scoping.
        return None
    return None


def flow_refs(model: Model) -> list[FlowRef]:
    """All flows with endpoints resolved relative to their declaring machine."""
    refs = []
    for scope in _scopes(model):
        owner_path, owner = scope[-1]
        for flow in owner.flows:
            refs.append(
                FlowRef(
                    owner_path,
                    flow,
                    _resolve_in_scope(model, scope, flow.from_path),
                    _resolve_in_scope(model, scope, flow.to_path),
                )
            )
    return refs


def trigger_refs(model: Model) -> list[FlowRef]:
    """All triggers with endpoints resolved relative to their declaring machine."""
    refs = []
    for scope in _scopes(model):
        owner_path, owner = scope[-1]
        for trig in owner.triggers:
            refs.append(
                FlowRef(
                    owner_path,
                    trig,
                    _resolve_in_scope(model, scope, trig.from_path),
                    _resolve_in_scope(model, scope, trig.to_path),
                )
            )
    return refs


def _scopes(model: Model) -> Iterator[tuple[tuple[str, Machine], ...]]:
    """Yield the ancestor chain (root machine ... this machine) for every machine."""

    def _walk(
        machine: Machine, chain: tuple[tuple[str, Machine], ...]
    ) -> Iterator[tuple[tuple[str, Machine], ...]]:
        prefix = chain[-1][0] if chain else ""
        path = f"{prefix}.{machine.id}" if prefix else machine.id
        here = chain + ((path, machine),)
        yield here
        for sub in machine.submachines:
            yield from _walk(sub, here)

    for top in model.machines:
        yield from _walk(top, ())
