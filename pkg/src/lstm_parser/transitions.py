"""Arc-standard transitions extended with SWAP.

Action names follow this convention, with ``u`` the stack top and ``v`` the
item below it:

* ``REDUCE_RIGHT(r)``: ``u`` becomes the head of ``v``; ``u`` stays on the stack.
* ``REDUCE_LEFT(r)``: ``v`` becomes the head of ``u``; ``v`` stays on the stack.
* ``SHIFT``: move the buffer front onto the stack.
* ``SWAP``: move ``v`` back to the front of the buffer.

The virtual root sits at the *end* of the buffer with position ``n + 1``, so
sentence roots are attached last, by ``REDUCE_RIGHT`` with the root on top.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, NamedTuple, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Graph, Node, Parameter
from .errors import ContractError, InvalidTreeError, OracleError

if TYPE_CHECKING:
    from .recurrent import StackLstm

SHIFT = "SHIFT"
SWAP = "SWAP"
REDUCE_LEFT = "REDUCE_LEFT"
REDUCE_RIGHT = "REDUCE_RIGHT"


class Action(NamedTuple):
    kind: str
    relation: str | None = None

    def __str__(self) -> str:
        return self.kind if self.relation is None else f"{self.kind}({self.relation})"


class ActionSet:
    """Action vocabulary: SHIFT, SWAP, then REDUCE_LEFT/REDUCE_RIGHT per relation."""

    def __init__(self, relations: Sequence[str]):
        self.relations = list(relations)
        self.actions = [Action(SHIFT), Action(SWAP)]
        for r in self.relations:
            self.actions.append(Action(REDUCE_LEFT, r))
            self.actions.append(Action(REDUCE_RIGHT, r))
        self._index = {a: k for k, a in enumerate(self.actions)}
        self.shift_id = 0
        self.swap_id = 1
        self.left_ids = list(range(2, len(self.actions), 2))
        self.right_ids = list(range(3, len(self.actions), 2))

    def __len__(self) -> int:
        return len(self.actions)

    def __getitem__(self, k: int) -> Action:
        return self.actions[k]

    def index(self, action: Action) -> int:
        try:
            return self._index[action]
        except KeyError:
            raise ContractError(f"action {action} is not in the action vocabulary") from None


@dataclass
class DependencyTree:
    """Heads are 1-based token positions, 0 for the virtual root."""

    heads: list[int]
    labels: list[str]

    def __post_init__(self):
        if len(self.heads) != len(self.labels):
            raise InvalidTreeError("heads and labels differ in length")

    def __len__(self) -> int:
        return len(self.heads)

    def validate(self) -> None:
        n = len(self.heads)
        for k, h in enumerate(self.heads, start=1):
            if not isinstance(h, (int, np.integer)) or not 0 <= h <= n:
                raise InvalidTreeError(f"head {h!r} of token {k} outside [0, {n}]")
            if h == k:
                raise InvalidTreeError(f"token {k} is its own head")
        state = [0] * (n + 1)  # 0 unvisited, 1 on path, 2 reaches root
        state[0] = 2
        for start in range(1, n + 1):
            path = []
            t = start
            while state[t] == 0:
                state[t] = 1
                path.append(t)
                t = self.heads[t - 1]
            if state[t] == 1:
                raise InvalidTreeError(f"cycle through token {t}")
            for p in path:
                state[p] = 2

    def children(self) -> list[list[int]]:
        """Children of every position 0..n, in increasing order."""
        out: list[list[int]] = [[] for _ in range(len(self.heads) + 1)]
        for k, h in enumerate(self.heads, start=1):
            out[h].append(k)
        return out


def is_projective(heads: Sequence[int], order: Sequence[int] | None = None) -> bool:
    """Whether no two arcs cross, with the root placed after every token.

    ``order`` optionally lists token positions in the linear order to test.
    """
    n = len(heads)
    if order is None:
        order = range(1, n + 1)
    place = {tok: k for k, tok in enumerate(order)}
    place[0] = n
    arcs = [tuple(sorted((place[h], place[d]))) for d, h in enumerate(heads, start=1)]
    for a, b in arcs:
        for c, d in arcs:
            if a < c < b < d:
                return False
    return True


def projective_order(tree: DependencyTree) -> list[int]:
    """Token positions in the in-order traversal of ``tree``.

    Each head is visited after its left children and before its right
    children; the root is treated as following every token. For a
    projective tree this is ``[1, ..., n]``.
    """
    tree.validate()
    kids = tree.children()
    out: list[int] = []
    # explicit stack of (node, emitted?) to avoid deep recursion
    stack: list[tuple[int, bool]] = [(0, False)]
    while stack:
        node, emitted = stack.pop()
        if emitted:
            out.append(node)
            continue
        left = [c for c in kids[node] if node == 0 or c < node]
        right = [c for c in kids[node] if node != 0 and c > node]
        for c in reversed(right):
            stack.append((c, False))
        if node != 0:
            stack.append((node, True))
        for c in reversed(left):
            stack.append((c, False))
    return out


@dataclass
class ParserItem:
    position: int
    form: str
    vector: Node | None = None
    has_dependents: bool = False


@dataclass
class Composer:
    """``g(head, dep, a) = tanh(U [head; dep; E[a]] + e)``."""

    U: Parameter
    e: Parameter
    table: Parameter


def compose(g: Graph, composer: Composer, head_vec: Node, dep_vec: Node, relation: int) -> Node:
    """Vector for a subtree formed by attaching ``dep_vec`` under ``head_vec``.

    ``relation`` is a row of the action/relation embedding table.
    """
    rel = g.lookup(composer.table, relation)
    return ad.tanh(g, ad.affine(g, composer.U, ad.concat(g, [head_vec, dep_vec, rel]), composer.e))


@dataclass
class NeuralState:
    """Stack LSTMs mirroring a configuration's stack, buffer, and history."""

    graph: Graph
    stack: StackLstm
    buffer: StackLstm
    history: StackLstm
    composer: Composer
    actions: ActionSet


@dataclass
class Configuration:
    n: int
    stack: list[ParserItem] = field(default_factory=list)
    buffer: list[ParserItem] = field(default_factory=list)  # front is the last element
    history: list[Action] = field(default_factory=list)
    heads: dict[int, tuple[int, str]] = field(default_factory=dict)
    neural: NeuralState | None = None

    @property
    def root_position(self) -> int:
        return self.n + 1

    def is_terminal(self) -> bool:
        return not self.buffer and len(self.stack) == 1 and self.stack[0].position == self.root_position

    def tree(self) -> DependencyTree:
        heads, labels = [], []
        root = self.root_position
        for k in range(1, self.n + 1):
            h, r = self.heads.get(k, (None, "_"))
            if h is None:
                raise ContractError(f"token {k} has no head yet")
            heads.append(0 if h == root else h)
            labels.append(r)
        return DependencyTree(heads, labels)


def initial_configuration(
    forms: Sequence[str],
    vectors: Sequence[Node] | None = None,
    root_vector: Node | None = None,
    neural: NeuralState | None = None,
) -> Configuration:
    n = len(forms)
    items = [ParserItem(k + 1, f, None if vectors is None else vectors[k]) for k, f in enumerate(forms)]
    root = ParserItem(n + 1, "<ROOT>", root_vector)
    c = Configuration(n, [], [root] + items[::-1], neural=neural)
    if neural is not None:
        for item in c.buffer:
            neural.buffer.push(item.vector)
    return c


def legal_kinds(c: Configuration) -> set[str]:
    if c.is_terminal():
        raise ContractError("no actions are legal in a terminal configuration")
    kinds = set()
    if c.buffer:
        kinds.add(SHIFT)
    if len(c.stack) >= 2:
        u, v = c.stack[-1], c.stack[-2]
        root = c.root_position
        if v.position != root:
            kinds.add(REDUCE_RIGHT)
            # ROOT stays last: swapping it back would only undo a shift
            if v.position < u.position and u.position != root:
                kinds.add(SWAP)
        if u.position != root:
            kinds.add(REDUCE_LEFT)
    return kinds


def legal_actions(c: Configuration, actions: ActionSet) -> list[int]:
    """Ids of the legal actions, ascending."""
    kinds = legal_kinds(c)
    out = []
    if SHIFT in kinds:
        out.append(actions.shift_id)
    if SWAP in kinds:
        out.append(actions.swap_id)
    if REDUCE_LEFT in kinds or REDUCE_RIGHT in kinds:
        for lid, rid in zip(actions.left_ids, actions.right_ids):
            if REDUCE_LEFT in kinds:
                out.append(lid)
            if REDUCE_RIGHT in kinds:
                out.append(rid)
    return out


def apply_action(c: Configuration, action: Action) -> None:
    """Apply ``action`` in place; stack LSTMs are updated when present."""
    if action.kind not in legal_kinds(c):
        raise ContractError(f"{action} is not legal here")
    nn = c.neural
    if action.kind == SHIFT:
        item = c.buffer.pop()
        c.stack.append(item)
        if nn is not None:
            nn.buffer.pop()
            nn.stack.push(item.vector)
    elif action.kind == SWAP:
        u = c.stack.pop()
        v = c.stack.pop()
        c.stack.append(u)
        c.buffer.append(v)
        if nn is not None:
            nn.stack.pop()
            nn.stack.pop()
            nn.stack.push(u.vector)
            nn.buffer.push(v.vector)
    else:
        u = c.stack.pop()
        v = c.stack.pop()
        head, dep = (u, v) if action.kind == REDUCE_RIGHT else (v, u)
        c.heads[dep.position] = (head.position, action.relation)
        vector = None
        if nn is not None:
            vector = compose(nn.graph, nn.composer, head.vector, dep.vector, nn.actions.index(action))
            nn.stack.pop()
            nn.stack.pop()
            nn.stack.push(vector)
        c.stack.append(ParserItem(head.position, head.form, vector, True))
    c.history.append(action)
    if nn is not None:
        nn.history.push(nn.graph.lookup(nn.composer.table, nn.actions.index(action)))


def max_transitions(n: int) -> int:
    """Upper bound on the length of any transition sequence for ``n`` tokens.

    Every pair of tokens can be swapped at most once, since SWAP needs the
    pair in original order and leaves it inverted; each swap also costs one
    extra shift. ROOT is never swapped.
    """
    return 2 * n + 1 + n * (n - 1)


def oracle(tree: DependencyTree) -> list[Action]:
    """Static eager-swap oracle.

    Reduces as soon as the would-be dependent has all of its gold dependents,
    swaps whenever the top two items are out of projective order, and
    shifts otherwise.
    """
    try:
        tree.validate()
    except InvalidTreeError as exc:
        raise OracleError(f"invalid gold tree: {exc}") from exc
    n = len(tree)
    root = n + 1
    gold = {k: (root if h == 0 else h) for k, h in enumerate(tree.heads, start=1)}
    label = {k: r for k, r in enumerate(tree.labels, start=1)}
    rank = {tok: k for k, tok in enumerate(projective_order(tree))}
    rank[root] = n
    pending = {k: 0 for k in range(1, n + 2)}
    for k in range(1, n + 1):
        pending[gold[k]] += 1

    c = initial_configuration(["_"] * n)
    out: list[Action] = []
    limit = max_transitions(n)
    while not c.is_terminal():
        if len(out) > limit:
            raise OracleError("oracle exceeded the maximum transition count")
        action = None
        if len(c.stack) >= 2:
            u, v = c.stack[-1].position, c.stack[-2].position
            if v != root and gold[v] == u and pending[v] == 0:
                action = Action(REDUCE_RIGHT, label[v])
                pending[u] -= 1
            elif u != root and gold[u] == v and pending[u] == 0:
                action = Action(REDUCE_LEFT, label[u])
                pending[v] -= 1
            elif rank[v] > rank[u]:
                action = Action(SWAP)
        if action is None:
            if not c.buffer:
                raise OracleError("stuck with an empty buffer")
            action = Action(SHIFT)
        apply_action(c, action)
        out.append(action)
    return out


def replay(n: int, actions: Sequence[Action]) -> DependencyTree:
    """Run ``actions`` from the initial configuration of an ``n``-token sentence."""
    c = initial_configuration(["_"] * n)
    for a in actions:
        apply_action(c, a)
    if not c.is_terminal():
        raise ContractError("action sequence does not reach a terminal configuration")
    return c.tree()
