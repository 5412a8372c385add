"""Leader and non-leader state machines as pure step functions.

One epoch tests an estimate ``k``: ``p`` phases of ``r`` rounds of potential
exchange, then ``k`` rounds in which the leader's verdict is flooded.  Every
function here takes a :class:`NodeState` and returns a new one.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Sequence

from adncount import numeric
from adncount.numeric import Backend, Ordering, Scalar
from adncount.params import EpsilonPolicy, ProtocolParams


class ProtocolError(RuntimeError):
    pass


class Status(str, enum.Enum):
    NORMAL = "normal"
    ALARM = "alarm"
    DONE = "done"


class Role(str, enum.Enum):
    LEADER = "leader"
    NONLEADER = "nonleader"


class Decision(str, enum.Enum):
    ACCEPT = "accept"
    REJECT = "reject"


class MessageKind(str, enum.Enum):
    PHASE = "phase_msg"
    DISSEMINATION = "dissemination_msg"


@dataclass(frozen=True)
class Message:
    kind: MessageKind
    status: Status
    phi: Scalar | None = None
    value_coords: tuple = ()


@dataclass(frozen=True)
class NodeState:
    role: Role
    k: int
    params: ProtocolParams
    backend: Backend
    phi: Scalar
    status: Status = Status.NORMAL
    rho: Scalar | None = None
    phase_index: int = 1
    round_index: int = 0          # rounds completed in the current phase
    value_coords: tuple = ()
    initial_coords: tuple = ()
    phase1_snapshot: tuple = ()
    input_value: int | None = None

    @property
    def is_leader(self) -> bool:
        return self.role is Role.LEADER


def _initial_phi(role: Role, params: ProtocolParams, backend: Backend) -> Scalar:
    if role is Role.LEADER:
        return backend.zero(params.d)
    return backend.one(params.d)


def _coords_from_bits(bits: Sequence[int], params: ProtocolParams, backend: Backend) -> tuple:
    return tuple(backend.one(params.d) if b else backend.zero(params.d) for b in bits)


def init_node(role: Role, k: int, params: ProtocolParams, backend: Backend = Backend(),
              initial_value: int | None = None, width: int = 0) -> NodeState:
    """Fresh state at the start of epoch ``k``.

    With ``width > 0`` the node also carries one value coordinate per input bit
    (least significant first).  The leader's coordinates start at zero; its
    input is kept aside and re-added when the sum is decoded.
    """
    if params.k != k:
        raise ProtocolError(f"params are for k={params.k}, not k={k}")
    role = Role(role)
    bits: tuple = ()
    if width:
        value = initial_value or 0
        if value < 0 or value >= 1 << width:
            raise ProtocolError(f"input {value} does not fit in {width} bits")
        if role is Role.LEADER:
            bits = (0,) * width
        else:
            bits = tuple((value >> j) & 1 for j in range(width))
    coords = _coords_from_bits(bits, params, backend)
    return NodeState(
        role=role,
        k=k,
        params=params,
        backend=backend,
        phi=_initial_phi(role, params, backend),
        rho=backend.zero(params.d) if role is Role.LEADER else None,
        value_coords=coords,
        initial_coords=bits,
        input_value=initial_value,
    )


def outgoing_message(s: NodeState) -> Message:
    return Message(MessageKind.PHASE, s.status, s.phi, s.value_coords)


def dissemination_message(s: NodeState) -> Message:
    return Message(MessageKind.DISSEMINATION, s.status)


def _mix(own: Scalar, received: Sequence[Scalar], d: int) -> Scalar:
    # own + sum(received)/d - |received|*own/d, written without subtraction
    total = numeric.scale(own, d - len(received))
    for x in received:
        total = numeric.add(total, x)
    return numeric.div_base(total, d)


def _one_like(s: NodeState) -> Scalar:
    if s.backend.exact:
        return s.backend.one(s.params.d, s.phi.exponent + 1)
    return 1.0


def apply_round(s: NodeState, inbox: Sequence[Message]) -> NodeState:
    """Process one round's inbox (messages from this round's neighbours)."""
    if s.status is Status.DONE:
        raise ProtocolError("a done node takes no further rounds")
    if not inbox:
        raise ProtocolError("empty inbox: the round graph is not connected")
    if any(m.kind is not MessageKind.PHASE for m in inbox):
        raise ProtocolError("dissemination message delivered during a phase round")
    d = s.params.d
    advanced = s.round_index + 1
    if s.status is Status.NORMAL and len(inbox) <= d - 1 and all(m.status is Status.NORMAL for m in inbox):
        phi = _mix(s.phi, [m.phi for m in inbox], d)
        coords = tuple(
            _mix(c, [m.value_coords[j] for m in inbox], d) for j, c in enumerate(s.value_coords)
        )
        return replace(s, phi=phi, value_coords=coords, round_index=advanced)
    # value coordinates freeze once alarmed
    return replace(s, status=Status.ALARM, phi=_one_like(s), round_index=advanced)


def end_of_phase(s: NodeState, phase_index: int | None = None) -> NodeState:
    """Phase-end processing after round ``r``: threshold alarm, snapshot, consumption."""
    phase_index = s.phase_index if phase_index is None else phase_index
    if phase_index != s.phase_index:
        raise ProtocolError(f"node is in phase {s.phase_index}, not {phase_index}")
    if s.round_index != s.params.r:
        raise ProtocolError(f"phase ended after {s.round_index} of {s.params.r} rounds")
    status, phi = s.status, s.phi
    snapshot = s.phase1_snapshot
    if phase_index == 1:
        if s.backend.compare(phi, s.params.tau) is Ordering.GREATER:
            status, phi = Status.ALARM, (phi if status is Status.ALARM else _one_like_at(s))
        snapshot = s.value_coords
    rho = s.rho
    if s.is_leader and status is Status.NORMAL:
        rho = numeric.add(rho, phi)
        phi = s.backend.zero(s.params.d, phi.exponent if s.backend.exact else 0)
    return replace(s, status=status, phi=phi, rho=rho, phase1_snapshot=snapshot,
                   phase_index=phase_index + 1, round_index=0)


def _one_like_at(s: NodeState) -> Scalar:
    if s.backend.exact:
        return s.backend.one(s.params.d, s.phi.exponent)
    return 1.0


def end_of_epoch_leader(s: NodeState) -> Decision:
    if not s.is_leader:
        raise ProtocolError("only the leader decides an epoch")
    if s.phase_index != s.params.p + 1:
        raise ProtocolError("epoch decision before all phases completed")
    k = s.k
    lo = numeric.to_fraction(k - 1) - numeric.to_fraction(1) / k
    hi = numeric.to_fraction(k - 1)
    if s.status is Status.NORMAL:
        cmp = s.backend.compare
        if isinstance(s.rho, float):
            lo, hi = float(lo), float(hi)
        if cmp(s.rho, lo) is not Ordering.LESS and cmp(s.rho, hi) is not Ordering.GREATER:
            return Decision.ACCEPT
    return Decision.REJECT


def conclude_epoch(s: NodeState, decision: Decision) -> NodeState:
    """Leader applies its verdict before the dissemination rounds."""
    if decision is Decision.ACCEPT:
        return replace(s, status=Status.DONE)
    return s


def dissemination_step(s: NodeState, inbox: Sequence[Message]) -> NodeState:
    if s.status is not Status.DONE and not s.is_leader:
        if any(m.status is Status.DONE for m in inbox):
            return replace(s, status=Status.DONE)
    return s


def finish_epoch(s: NodeState, policy: EpsilonPolicy) -> NodeState:
    """After the ``k`` dissemination rounds: stop if done, else start epoch ``k+1``."""
    if s.status is Status.DONE:
        return s
    k = s.k + 1
    params = policy.params(k)
    fresh = init_node(s.role, k, params, s.backend)
    coords = _coords_from_bits(s.initial_coords, params, s.backend)
    return replace(fresh, value_coords=coords, initial_coords=s.initial_coords, input_value=s.input_value)
